//! Event-driven simulation of the pulse-coupled hybrid system.
//!
//! Between firings every phase grows at `ω + p_i(t)`; flows are advanced in
//! closed form up to the next threshold crossing, so no step size is involved.
//! When a phase sits at 2π the oscillator fires: it resets to 0 and each
//! out-neighbor `j` moves by `l_j F_j(x_j)`. Simultaneous firers are handled
//! one at a time in ascending node id.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::prf::{PhaseResponseFunction, PiSelection, TWO_PI};
use crate::topology::{NetworkTopology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid simulation parameters: {0}")]
    Params(String),
    #[error("expected {expected} {what}, got {got}")]
    Count {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("phase of node {node} is {value}, outside [0, 2π]")]
    PhaseDomain { node: usize, value: f64 },
    #[error("phase of node {node} overshot 2π by {excess} at t = {t} (event detection failure)")]
    PhaseOverflow { node: usize, excess: f64, t: f64 },
    #[error("node {node} asked to fire with phase {phase}, not at 2π")]
    NotAtThreshold { node: usize, phase: f64 },
    #[error("no component is at 2π")]
    NotInJumpSet,
    #[error("next_event_time called with node {0} already at 2π")]
    InJumpSet(usize),
    #[error("more than {n} consecutive jumps at t = {t}")]
    TooManyJumps { n: usize, t: f64 },
    #[error("phase response of node {node} rejected: {source}")]
    Prf {
        node: usize,
        source: crate::prf::PrfError,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Topology plus one validated PRF per node.
#[derive(Debug, Clone)]
pub struct Network {
    topo: NetworkTopology,
    prfs: Vec<PhaseResponseFunction>,
}

impl Network {
    pub fn new(
        topo: NetworkTopology,
        prfs: Vec<PhaseResponseFunction>,
    ) -> Result<Self, EngineError> {
        if prfs.len() != topo.n() {
            return Err(EngineError::Count {
                what: "phase response functions",
                expected: topo.n(),
                got: prfs.len(),
            });
        }
        for (k, prf) in prfs.iter().enumerate() {
            let report = crate::prf::validate_prf(prf, crate::prf::DEFAULT_VALIDATION_GRID)
                .map_err(|source| EngineError::Prf { node: k + 1, source })?;
            if !report.is_empty() {
                return Err(EngineError::Prf {
                    node: k + 1,
                    source: crate::prf::PrfError::Invalid(report),
                });
            }
        }
        Ok(Network { topo, prfs })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topo
    }

    pub fn prfs(&self) -> &[PhaseResponseFunction] {
        &self.prfs
    }

    pub fn prf(&self, node: usize) -> &PhaseResponseFunction {
        &self.prfs[node - 1]
    }

    pub fn n(&self) -> usize {
        self.topo.n()
    }
}

/// One sinusoidal component `amplitude · sin(angular_freq · t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub amplitude: f64,
    pub angular_freq: f64,
    pub phase: f64,
}

/// `offset + Σ waves`, a frequency perturbation with a closed-form integral.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SineSum {
    pub offset: f64,
    pub waves: Vec<Wave>,
}

impl SineSum {
    pub fn constant(offset: f64) -> Self {
        SineSum {
            offset,
            waves: Vec::new(),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.offset
            + self
                .waves
                .iter()
                .map(|w| w.amplitude * (w.angular_freq * t + w.phase).sin())
                .sum::<f64>()
    }

    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        let waves: f64 = self
            .waves
            .iter()
            .map(|w| {
                if w.angular_freq == 0.0 {
                    w.amplitude * w.phase.sin() * (t1 - t0)
                } else {
                    w.amplitude / w.angular_freq
                        * ((w.angular_freq * t0 + w.phase).cos()
                            - (w.angular_freq * t1 + w.phase).cos())
                }
            })
            .sum();
        self.offset * (t1 - t0) + waves
    }

    pub fn bound(&self) -> f64 {
        self.offset.abs() + self.waves.iter().map(|w| w.amplitude.abs()).sum::<f64>()
    }
}

pub type RateFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Per-node additive frequency perturbation `p_i(t)`.
#[derive(Clone)]
pub enum Perturbation {
    /// Integrated in closed form.
    Sinusoids(Vec<SineSum>),
    /// Arbitrary rate `p(node, t)` with a caller-supplied bound on `|p|`;
    /// integrated by adaptive Simpson quadrature.
    Function { rate: RateFn, n: usize, bound: f64 },
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Sinusoids(s) => f.debug_tuple("Sinusoids").field(s).finish(),
            Perturbation::Function { n, bound, .. } => f
                .debug_struct("Function")
                .field("n", n)
                .field("bound", bound)
                .finish_non_exhaustive(),
        }
    }
}

const SIMPSON_TOL: f64 = 1e-12;

impl Perturbation {
    /// `p_k(t) = amplitude · sin(2πt + 2πk/n)` for `k = 1..=n`.
    pub fn sinusoid_family(amplitude: f64, n: usize) -> Self {
        Perturbation::Sinusoids(
            (1..=n)
                .map(|k| SineSum {
                    offset: 0.0,
                    waves: vec![Wave {
                        amplitude,
                        angular_freq: TWO_PI,
                        phase: TWO_PI * k as f64 / n as f64,
                    }],
                })
                .collect(),
        )
    }

    pub fn function<F>(n: usize, bound: f64, rate: F) -> Self
    where
        F: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        Perturbation::Function {
            rate: Arc::new(rate),
            n,
            bound,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Perturbation::Sinusoids(s) => s.len(),
            Perturbation::Function { n, .. } => *n,
        }
    }

    pub fn rate(&self, node: usize, t: f64) -> f64 {
        match self {
            Perturbation::Sinusoids(s) => s[node - 1].rate(t),
            Perturbation::Function { rate, .. } => rate(node, t),
        }
    }

    pub fn integral(&self, node: usize, t0: f64, t1: f64) -> f64 {
        match self {
            Perturbation::Sinusoids(s) => s[node - 1].integral(t0, t1),
            Perturbation::Function { rate, .. } => {
                adaptive_simpson(&|t| rate(node, t), t0, t1, SIMPSON_TOL)
            }
        }
    }

    pub fn bound(&self, node: usize) -> f64 {
        match self {
            Perturbation::Sinusoids(s) => s[node - 1].bound(),
            Perturbation::Function { bound, .. } => *bound,
        }
    }

    pub fn max_bound(&self) -> f64 {
        (1..=self.n()).map(|k| self.bound(k)).fold(0.0, f64::max)
    }

    /// Multiplies every node's perturbation by `sigma`.
    pub fn scaled(&self, sigma: f64) -> Self {
        match self {
            Perturbation::Sinusoids(s) => Perturbation::Sinusoids(
                s.iter()
                    .map(|ss| SineSum {
                        offset: ss.offset * sigma,
                        waves: ss
                            .waves
                            .iter()
                            .map(|w| Wave {
                                amplitude: w.amplitude * sigma,
                                ..*w
                            })
                            .collect(),
                    })
                    .collect(),
            ),
            Perturbation::Function { rate, n, bound } => {
                let inner = rate.clone();
                Perturbation::Function {
                    rate: Arc::new(move |k, t| sigma * inner(k, t)),
                    n: *n,
                    bound: bound * sigma.abs(),
                }
            }
        }
    }
}

pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordMode {
    EventsOnly,
    /// Also sample the flow on the global grid `k · sample_dt`.
    Dense(f64),
}

#[derive(Debug, Clone)]
pub struct SimulationParams {
    pub omega: f64,
    pub perturbation: Option<Perturbation>,
    pub pi_selection_override: Option<PiSelection>,
    pub t_end: f64,
    pub event_tolerance: f64,
    pub record_mode: RecordMode,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            omega: TWO_PI,
            perturbation: None,
            pi_selection_override: None,
            t_end: 50.0,
            event_tolerance: 1e-12,
            record_mode: RecordMode::EventsOnly,
        }
    }
}

impl SimulationParams {
    pub fn period(&self) -> f64 {
        TWO_PI / self.omega
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(EngineError::Params(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(EngineError::Params(format!(
                "t_end must be a nonnegative number, got {}",
                self.t_end
            )));
        }
        if !(self.event_tolerance.is_finite() && self.event_tolerance > 0.0) {
            return Err(EngineError::Params(format!(
                "event_tolerance must be positive, got {}",
                self.event_tolerance
            )));
        }
        if let RecordMode::Dense(dt) = self.record_mode {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(EngineError::Params(format!(
                    "dense sample interval must be positive, got {dt}"
                )));
            }
        }
        if let Some(p) = &self.perturbation {
            let b = p.max_bound();
            if !(b.is_finite() && b < self.omega) {
                return Err(EngineError::Params(format!(
                    "perturbation bound {b} must be below omega {}",
                    self.omega
                )));
            }
        }
        Ok(())
    }

    fn perturbation_bound(&self) -> f64 {
        self.perturbation.as_ref().map_or(0.0, Perturbation::max_bound)
    }

    /// Phase distance from 2π that counts as being at the threshold.
    pub fn phase_tolerance(&self) -> f64 {
        (self.omega + self.perturbation_bound()) * self.event_tolerance
            + 64.0 * f64::EPSILON * TWO_PI
    }

    fn increment(&self, node: usize, t: f64, dt: f64) -> f64 {
        let drift = self
            .perturbation
            .as_ref()
            .map_or(0.0, |p| p.integral(node, t, t + dt));
        self.omega * dt + drift
    }
}

/// Phase vector at hybrid time `(t, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub x: Vec<f64>,
    pub t: f64,
    pub j: u64,
}

impl HybridState {
    pub fn new(x: Vec<f64>) -> Self {
        HybridState { x, t: 0.0, j: 0 }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn phase(&self, node: usize) -> f64 {
        self.x[node - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiringEvent {
    pub t: f64,
    /// Jump counter immediately before this firing.
    pub j: u64,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<HybridState>,
    pub firings: Vec<FiringEvent>,
    pub record_mode: RecordMode,
    pub t_end: f64,
}

/// A single processed firing: the states right before and after it.
#[derive(Debug, Clone, Copy)]
pub struct Jump<'a> {
    pub pre: &'a HybridState,
    pub post: &'a HybridState,
    pub node: usize,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.samples.first().map_or(0, HybridState::n)
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.record_mode, RecordMode::Dense(_))
    }

    pub fn final_state(&self) -> &HybridState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn jump_count(&self) -> u64 {
        self.final_state().j
    }

    /// Pairs each recorded jump with the node that fired.
    pub fn jumps(&self) -> impl Iterator<Item = Jump<'_>> + '_ {
        self.samples.windows(2).filter_map(move |w| {
            if w[1].j != w[0].j + 1 {
                return None;
            }
            let idx = self.firings.binary_search_by_key(&w[0].j, |f| f.j).ok()?;
            Some(Jump {
                pre: &w[0],
                post: &w[1],
                node: self.firings[idx].node,
            })
        })
    }

    pub fn firing_times(&self, node: usize) -> Vec<f64> {
        self.firings
            .iter()
            .filter(|f| f.node == node)
            .map(|f| f.t)
            .collect()
    }

    /// Largest number of jumps sharing one continuous time instant.
    pub fn max_jumps_at_one_time(&self) -> usize {
        let mut best = 0;
        let mut run = 0;
        let mut last = f64::NAN;
        for f in &self.firings {
            if f.t == last {
                run += 1;
            } else {
                run = 1;
                last = f.t;
            }
            best = best.max(run);
        }
        best
    }
}

/// The single test for "this phase sits at 2π", shared by flow snapping,
/// jump-set detection and firing.
fn at_threshold(x: f64, tol: f64) -> bool {
    (x - TWO_PI).abs() <= tol
}

/// Advances all phases by `dt` along the flow.
pub fn flow(
    state: &HybridState,
    dt: f64,
    params: &SimulationParams,
) -> Result<HybridState, EngineError> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(EngineError::Params(format!("flow duration {dt} is invalid")));
    }
    let tol = params.phase_tolerance();
    let mut x = Vec::with_capacity(state.n());
    for (k, &xi) in state.x.iter().enumerate() {
        let node = k + 1;
        let v = xi + params.increment(node, state.t, dt);
        if !v.is_finite() {
            return Err(EngineError::PhaseDomain { node, value: v });
        }
        if v > TWO_PI + tol {
            return Err(EngineError::PhaseOverflow {
                node,
                excess: v - TWO_PI,
                t: state.t + dt,
            });
        }
        x.push(if at_threshold(v, tol) { TWO_PI } else { v });
    }
    Ok(HybridState {
        x,
        t: state.t + dt,
        j: state.j,
    })
}

/// Time until the first phase reaches 2π.
pub fn next_event_time(
    state: &HybridState,
    params: &SimulationParams,
) -> Result<f64, EngineError> {
    for (k, &xi) in state.x.iter().enumerate() {
        if !xi.is_finite() {
            return Err(EngineError::PhaseDomain {
                node: k + 1,
                value: xi,
            });
        }
        if xi >= TWO_PI {
            return Err(EngineError::InJumpSet(k + 1));
        }
    }
    let omega = params.omega;
    let Some(p) = &params.perturbation else {
        let dt = state
            .x
            .iter()
            .map(|&xi| (TWO_PI - xi) / omega)
            .fold(f64::INFINITY, f64::min);
        return Ok(dt);
    };

    let mut best = f64::INFINITY;
    for (k, &xi) in state.x.iter().enumerate() {
        let node = k + 1;
        let gap = TWO_PI - xi;
        let b = p.bound(node);
        let mut lo = gap / (omega + b);
        let mut hi = gap / (omega - b);
        if lo >= best {
            continue;
        }
        let reached = |s: f64| xi + omega * s + p.integral(node, state.t, state.t + s) >= TWO_PI;
        while hi - lo > params.event_tolerance {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if reached(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best = best.min(hi);
    }
    Ok(best)
}

/// Fires node `i`: resets it to 0 and applies the pulse to its out-neighbors.
pub fn fire(
    state: &HybridState,
    i: usize,
    network: &Network,
    params: &SimulationParams,
) -> Result<HybridState, EngineError> {
    let topo = network.topology();
    topo.check_id(i)?;
    let tol = params.phase_tolerance();
    let xi = state.phase(i);
    if !at_threshold(xi, tol) {
        return Err(EngineError::NotAtThreshold { node: i, phase: xi });
    }
    let mut x = state.x.clone();
    x[i - 1] = 0.0;
    for &nb in topo.out_neighbors(i)? {
        let xn = state.phase(nb);
        let prf = network.prf(nb);
        let sel = params.pi_selection_override.unwrap_or(prf.pi_selection);
        let shift = prf
            .eval_with(xn, sel)
            .map_err(|source| EngineError::Prf { node: nb, source })?;
        let v = xn + topo.coupling(nb) * shift;
        x[nb - 1] = if v > TWO_PI {
            if v - TWO_PI > tol {
                return Err(EngineError::PhaseOverflow {
                    node: nb,
                    excess: v - TWO_PI,
                    t: state.t,
                });
            }
            TWO_PI
        } else if v < 0.0 {
            if v < -tol {
                return Err(EngineError::PhaseDomain { node: nb, value: v });
            }
            0.0
        } else {
            v
        };
    }
    Ok(HybridState {
        x,
        t: state.t,
        j: state.j + 1,
    })
}

fn lowest_firer(state: &HybridState, tol: f64) -> Option<usize> {
    state
        .x
        .iter()
        .position(|&xi| at_threshold(xi, tol))
        .map(|k| k + 1)
}

fn drain_jump_set(
    mut state: HybridState,
    network: &Network,
    params: &SimulationParams,
    mut on_fire: impl FnMut(&FiringEvent, &HybridState),
) -> Result<HybridState, EngineError> {
    let tol = params.phase_tolerance();
    let n = network.n();
    let mut count = 0;
    while let Some(i) = lowest_firer(&state, tol) {
        if count == n {
            return Err(EngineError::TooManyJumps { n, t: state.t });
        }
        let event = FiringEvent {
            t: state.t,
            j: state.j,
            node: i,
        };
        state = fire(&state, i, network, params)?;
        on_fire(&event, &state);
        count += 1;
    }
    Ok(state)
}

/// Fires every oscillator sitting at 2π, lowest id first, until none is left.
/// Returns the final state and the firing order.
pub fn process_jump_set(
    state: &HybridState,
    network: &Network,
    params: &SimulationParams,
) -> Result<(HybridState, Vec<usize>), EngineError> {
    if lowest_firer(state, params.phase_tolerance()).is_none() {
        return Err(EngineError::NotInJumpSet);
    }
    let mut order = Vec::new();
    let post = drain_jump_set(state.clone(), network, params, |ev, _| order.push(ev.node))?;
    Ok((post, order))
}

/// Runs the hybrid system from `initial_x` until `params.t_end`.
pub fn simulate(
    initial_x: &[f64],
    network: &Network,
    params: &SimulationParams,
) -> Result<Trajectory, EngineError> {
    params.validate()?;
    let n = network.n();
    if initial_x.len() != n {
        return Err(EngineError::Count {
            what: "initial phases",
            expected: n,
            got: initial_x.len(),
        });
    }
    if let Some(p) = &params.perturbation {
        if p.n() != n {
            return Err(EngineError::Count {
                what: "perturbation entries",
                expected: n,
                got: p.n(),
            });
        }
    }
    for (k, &xi) in initial_x.iter().enumerate() {
        if !(0.0..=TWO_PI).contains(&xi) {
            return Err(EngineError::PhaseDomain {
                node: k + 1,
                value: xi,
            });
        }
    }

    let mut samples = vec![HybridState::new(initial_x.to_vec())];
    let mut firings = Vec::new();
    let mut state = samples[0].clone();
    loop {
        state = drain_jump_set(state, network, params, |ev, post| {
            firings.push(*ev);
            samples.push(post.clone());
        })?;
        if state.t >= params.t_end {
            break;
        }
        let dt = next_event_time(&state, params)?;
        let stop = state.t + dt > params.t_end;
        let span = if stop { params.t_end - state.t } else { dt };
        if let RecordMode::Dense(h) = params.record_mode {
            let first = (state.t / h).floor() as u64 + 1;
            let mut k = first;
            loop {
                let ts = k as f64 * h;
                if ts >= state.t + span {
                    break;
                }
                if ts > state.t {
                    samples.push(flow(&state, ts - state.t, params)?);
                }
                k += 1;
            }
        }
        state = flow(&state, span, params)?;
        if stop {
            state.t = params.t_end;
        }
        samples.push(state.clone());
        if stop {
            break;
        }
    }
    Ok(Trajectory {
        samples,
        firings,
        record_mode: params.record_mode,
        t_end: params.t_end,
    })
}
