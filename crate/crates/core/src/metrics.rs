//! Synchronization measures and property checks over trajectories.
//!
//! `Δ_i` is the shorter arc between chain neighbours `i` and `i + 1`, with the
//! last one closing the ring back to node 1. `L = Σ Δ_i` vanishes exactly on
//! the synchronization set and is nonincreasing along chain trajectories.
//! `V_c` is the shortest arc containing every phase.

use thiserror::Error;

use crate::engine::{HybridState, Network, Trajectory};
use crate::prf::{PiSelection, TWO_PI};
use crate::topology::TopologyKind;

/// `L` below this value counts as synchronized.
pub const SYNC_THRESHOLD: f64 = 1e-6;

/// Ties closer than this are resolved toward the non-strict case.
const CASE_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("phase {0} is outside [0, 2π]")]
    Domain(f64),
    #[error("closeness check needs densely recorded trajectories")]
    NotDense,
    #[error("need at least {needed} complete firing rounds, found {found}")]
    TooFewRounds { needed: usize, found: usize },
    #[error("firing-order analysis needs at least two oscillators")]
    SingleOscillator,
    #[error("jump-case analysis needs a chain topology, got {0}")]
    NotAChain(TopologyKind),
    #[error("node {firer} fired at hybrid time ({t}, {j}) but post state does not match a single firing")]
    NotAFiring { firer: usize, t: f64, j: u64 },
    #[error("jump case mismatch at t = {t}: {detail}")]
    CaseMismatch { t: f64, detail: String },
}

fn check_phase(x: f64) -> Result<f64, MetricsError> {
    if (0.0..=TWO_PI).contains(&x) {
        Ok(x)
    } else {
        Err(MetricsError::Domain(x))
    }
}

fn arc(xa: f64, xb: f64) -> f64 {
    let d = (xa - xb).abs();
    d.min(TWO_PI - d)
}

/// Length of the shorter arc between two phases.
pub fn delta(xa: f64, xb: f64) -> Result<f64, MetricsError> {
    Ok(arc(check_phase(xa)?, check_phase(xb)?))
}

/// `Δ_1 .. Δ_N` over the nodes in ring order.
pub fn deltas(x: &[f64]) -> Result<Vec<f64>, MetricsError> {
    for &xi in x {
        check_phase(xi)?;
    }
    let n = x.len();
    Ok((0..n).map(|k| arc(x[k], x[(k + 1) % n])).collect())
}

pub fn lyapunov_l(x: &[f64]) -> Result<f64, MetricsError> {
    Ok(deltas(x)?.iter().sum())
}

/// `L` restricted to one chain of node ids (1-based), closing the ring from
/// the last node back to the first.
pub fn chain_lyapunov(x: &[f64], chain: &[usize]) -> Result<f64, MetricsError> {
    let phases: Vec<f64> = chain.iter().map(|&k| x[k - 1]).collect();
    lyapunov_l(&phases)
}

/// Length of the shortest arc holding every phase.
pub fn containing_arc(x: &[f64]) -> Result<f64, MetricsError> {
    if x.len() < 2 {
        return Ok(0.0);
    }
    let mut sorted: Vec<f64> = x
        .iter()
        .map(|&v| check_phase(v).map(|v| if v == TWO_PI { 0.0 } else { v }))
        .collect::<Result<_, _>>()?;
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut largest_gap = sorted[0] + TWO_PI - sorted[n - 1];
    for w in sorted.windows(2) {
        largest_gap = largest_gap.max(w[1] - w[0]);
    }
    Ok((TWO_PI - largest_gap).max(0.0))
}

/// Circular sup-distance to the synchronization set: the smallest `r` such
/// that every phase lies within arc distance `r` of a common phase.
pub fn sync_distance(x: &[f64]) -> Result<f64, MetricsError> {
    Ok(containing_arc(x)? / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncMetrics {
    pub deltas: Vec<f64>,
    pub lyapunov_l: f64,
    pub containing_arc: f64,
    pub sync_distance: f64,
}

impl SyncMetrics {
    pub fn of(x: &[f64]) -> Result<Self, MetricsError> {
        let deltas = deltas(x)?;
        let lyapunov_l = deltas.iter().sum();
        let containing_arc = containing_arc(x)?;
        Ok(SyncMetrics {
            deltas,
            lyapunov_l,
            containing_arc,
            sync_distance: containing_arc / 2.0,
        })
    }

    pub fn is_synchronized(&self) -> bool {
        self.lyapunov_l < SYNC_THRESHOLD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Flow,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LViolation {
    pub kind: StepKind,
    pub t: f64,
    pub j: u64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonotoneReport {
    pub violations: Vec<LViolation>,
    /// Largest observed increase of `L` across a jump (0 if none).
    pub max_increase: f64,
    pub jumps_checked: usize,
}

impl MonotoneReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `L` is constant along flows and nonincreasing across jumps.
pub fn check_l_monotone(traj: &Trajectory, tol: f64) -> MonotoneReport {
    monotone_by(traj, tol, |x| lyapunov_l(x).unwrap_or(f64::NAN))
}

/// Same as [`check_l_monotone`] for the `L` of one decomposed chain.
pub fn check_chain_l_monotone(traj: &Trajectory, chain: &[usize], tol: f64) -> MonotoneReport {
    monotone_by(traj, tol, |x| chain_lyapunov(x, chain).unwrap_or(f64::NAN))
}

fn monotone_by(traj: &Trajectory, tol: f64, measure: impl Fn(&[f64]) -> f64) -> MonotoneReport {
    let mut report = MonotoneReport::default();
    let mut prev: Option<(&HybridState, f64)> = None;
    for s in &traj.samples {
        let l = measure(&s.x);
        if let Some((p, lp)) = prev {
            let kind = if s.j == p.j {
                StepKind::Flow
            } else {
                report.jumps_checked += 1;
                StepKind::Jump
            };
            let bad = match kind {
                StepKind::Flow => !((l - lp).abs() <= tol),
                StepKind::Jump => {
                    report.max_increase = report.max_increase.max(l - lp);
                    !(l <= lp + tol)
                }
            };
            if bad {
                report.violations.push(LViolation {
                    kind,
                    t: s.t,
                    j: s.j,
                    before: lp,
                    after: l,
                });
            }
        }
        prev = Some((s, l));
    }
    report
}

/// The four ways a pulse can change the pair of arcs around a moved neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpCase {
    /// Toward the far node, not passing it.
    TowardShort,
    /// Toward the far node, passing it.
    TowardPast,
    /// Away from the far node, the far arc stays the shorter one.
    AwayShort,
    /// Away from the far node, the far arc wraps past π.
    AwayWrap,
}

impl JumpCase {
    pub fn number(self) -> u8 {
        match self {
            JumpCase::TowardShort => 1,
            JumpCase::TowardPast => 2,
            JumpCase::AwayShort => 3,
            JumpCase::AwayWrap => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseRecord {
    pub neighbor: usize,
    pub far: usize,
    pub case: JumpCase,
    /// Jump magnitude of the neighbour.
    pub jump: f64,
    pub near_before: f64,
    pub far_before: f64,
    pub near_after: f64,
    pub far_after: f64,
}

impl CaseRecord {
    pub fn sum_before(&self) -> f64 {
        self.near_before + self.far_before
    }

    pub fn sum_after(&self) -> f64 {
        self.near_after + self.far_after
    }
}

/// Classifies how a single firing changed the arcs next to each moved chain
/// neighbour and checks the relation each case predicts.
///
/// For the neighbour `m` of the firer and the node `f` on m's other side
/// (ring-wrapped), the near arc `Δ(m, firer)` always shrinks by the jump `δ`,
/// while the far arc `Δ(m, f)` follows one of four cases. A side is skipped
/// when `f` is the firer or is itself moved by the pulse, which happens only
/// on chains with fewer than four nodes.
pub fn check_jump_cases(
    pre: &HybridState,
    post: &HybridState,
    firer: usize,
    network: &Network,
    pi_override: Option<PiSelection>,
    tol: f64,
) -> Result<Vec<CaseRecord>, MetricsError> {
    let topo = network.topology();
    if topo.kind() == TopologyKind::DirectedTree {
        return Err(MetricsError::NotAChain(topo.kind()));
    }
    let n = topo.n();
    let outs = topo
        .out_neighbors(firer)
        .map_err(|_| MetricsError::NotAFiring {
            firer,
            t: pre.t,
            j: pre.j,
        })?;
    if post.j != pre.j + 1 || post.phase(firer) != 0.0 {
        return Err(MetricsError::NotAFiring {
            firer,
            t: pre.t,
            j: pre.j,
        });
    }
    let mismatch = |detail: String| MetricsError::CaseMismatch { t: pre.t, detail };
    let ring = |k: isize| ((k - 1).rem_euclid(n as isize) + 1) as usize;

    let mut records = Vec::new();
    for &m in outs {
        let step = m as isize - firer as isize;
        let far = ring(m as isize + step);
        if far == firer || outs.contains(&far) {
            continue;
        }
        let xm = pre.phase(m);
        let xf = pre.phase(far);
        let prf = network.prf(m);
        let sel = pi_override.unwrap_or(prf.pi_selection);
        let shift = prf
            .eval_with(xm, sel)
            .map_err(|e| mismatch(e.to_string()))?;
        let jump = topo.coupling(m) * shift.abs();
        let observed = (post.phase(m) - xm).abs();
        if (observed - jump).abs() > tol {
            return Err(mismatch(format!(
                "node {m} moved {observed}, expected {jump}"
            )));
        }
        if post.phase(far) != xf {
            return Err(mismatch(format!("far node {far} moved")));
        }

        let advancing = xm > std::f64::consts::PI
            || (xm == std::f64::consts::PI && sel == PiSelection::Advance);
        // forward arc from m to the far node
        let fwd = (xf - xm).rem_euclid(TWO_PI);
        let near_before = arc(xm, TWO_PI);
        let far_before = arc(xm, xf);
        let toward = if far_before <= CASE_MARGIN {
            false
        } else if (far_before - std::f64::consts::PI).abs() <= CASE_MARGIN {
            true
        } else if advancing {
            fwd < std::f64::consts::PI
        } else {
            fwd > std::f64::consts::PI
        };
        let case = match (toward, jump <= far_before + CASE_MARGIN) {
            (true, true) => JumpCase::TowardShort,
            (true, false) => JumpCase::TowardPast,
            (false, _) if far_before + jump <= std::f64::consts::PI + CASE_MARGIN => {
                JumpCase::AwayShort
            }
            (false, _) => JumpCase::AwayWrap,
        };
        let rec = CaseRecord {
            neighbor: m,
            far,
            case,
            jump,
            near_before,
            far_before,
            near_after: arc(post.phase(m), 0.0),
            far_after: arc(post.phase(m), xf),
        };

        let expect_near = near_before - jump;
        if (rec.near_after - expect_near).abs() > tol {
            return Err(mismatch(format!(
                "near arc of node {m} is {}, expected {expect_near}",
                rec.near_after
            )));
        }
        let (expect_far, expect_sum) = match case {
            JumpCase::TowardShort => (far_before - jump, rec.sum_before() - 2.0 * jump),
            JumpCase::TowardPast => (jump - far_before, near_before - far_before),
            JumpCase::AwayShort => (far_before + jump, rec.sum_before()),
            JumpCase::AwayWrap => (
                TWO_PI - far_before - jump,
                near_before - jump + TWO_PI - far_before - jump,
            ),
        };
        if (rec.far_after - expect_far).abs() > tol {
            return Err(mismatch(format!(
                "case {} at node {m}: far arc {} expected {expect_far}",
                case.number(),
                rec.far_after
            )));
        }
        if (rec.sum_after() - expect_sum).abs() > tol || rec.sum_after() > rec.sum_before() + tol
        {
            return Err(mismatch(format!(
                "case {} at node {m}: arc sum {} -> {}",
                case.number(),
                rec.sum_before(),
                rec.sum_after()
            )));
        }
        if case == JumpCase::AwayWrap && !(rec.sum_after() < rec.sum_before()) {
            return Err(mismatch(format!(
                "case 4 at node {m} without strict decrease: {} -> {}",
                rec.sum_before(),
                rec.sum_after()
            )));
        }
        records.push(rec);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloseWitness {
    /// 1 when the point comes from the first trajectory, 2 otherwise.
    pub from: u8,
    pub t: f64,
    pub j: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closeness {
    pub close: bool,
    pub witness: Option<CloseWitness>,
}

fn same_j(samples: &[HybridState], j: u64) -> &[HybridState] {
    let lo = samples.partition_point(|s| s.j < j);
    let hi = samples.partition_point(|s| s.j <= j);
    &samples[lo..hi]
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn one_sided_close(a: &Trajectory, b: &Trajectory, tau: f64, eps: f64) -> Option<(f64, u64)> {
    for s in &a.samples {
        if s.t + s.j as f64 > tau {
            continue;
        }
        let group = same_j(&b.samples, s.j);
        let lo = group.partition_point(|q| q.t <= s.t - eps);
        let ok = group[lo..]
            .iter()
            .take_while(|q| q.t < s.t + eps)
            .any(|q| dist(&s.x, &q.x) < eps);
        if !ok {
            return Some((s.t, s.j));
        }
    }
    None
}

/// Pointwise hybrid-time closeness over recorded samples with `t + j <= tau`.
pub fn tau_eps_close(
    a: &Trajectory,
    b: &Trajectory,
    tau: f64,
    eps: f64,
) -> Result<Closeness, MetricsError> {
    if !a.is_dense() || !b.is_dense() {
        return Err(MetricsError::NotDense);
    }
    let fail = one_sided_close(a, b, tau, eps)
        .map(|(t, j)| CloseWitness { from: 1, t, j })
        .or_else(|| one_sided_close(b, a, tau, eps).map(|(t, j)| CloseWitness { from: 2, t, j }));
    Ok(Closeness {
        close: fail.is_none(),
        witness: fail,
    })
}

/// The infimum of the `ε` for which [`tau_eps_close`] holds.
pub fn closeness_epsilon(a: &Trajectory, b: &Trajectory, tau: f64) -> Result<f64, MetricsError> {
    if !a.is_dense() || !b.is_dense() {
        return Err(MetricsError::NotDense);
    }
    let one = |p: &Trajectory, q: &Trajectory| {
        p.samples
            .iter()
            .filter(|s| s.t + s.j as f64 <= tau)
            .map(|s| {
                same_j(&q.samples, s.j)
                    .iter()
                    .map(|r| (s.t - r.t).abs().max(dist(&s.x, &r.x)))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(one(a, b).max(one(b, a)))
}

/// Number of rounds whose firing order differs from the previous round.
///
/// A round runs from one firing of the lowest-numbered node to its next
/// firing; only rounds closed on both ends are compared.
pub fn firing_order_changes(traj: &Trajectory) -> Result<usize, MetricsError> {
    if traj.n() < 2 {
        return Err(MetricsError::SingleOscillator);
    }
    let anchor = 1;
    let starts: Vec<usize> = traj
        .firings
        .iter()
        .enumerate()
        .filter(|(_, f)| f.node == anchor)
        .map(|(k, _)| k)
        .collect();
    let rounds: Vec<Vec<usize>> = starts
        .windows(2)
        .map(|w| traj.firings[w[0]..w[1]].iter().map(|f| f.node).collect())
        .collect();
    if rounds.len() < 2 {
        return Err(MetricsError::TooFewRounds {
            needed: 2,
            found: rounds.len(),
        });
    }
    Ok(rounds.windows(2).filter(|w| w[0] != w[1]).count())
}

/// Longest stretch of time over which `node` did not fire, counting the lead
/// from `t = 0` and the tail up to the end of the run.
pub fn max_firing_gap(traj: &Trajectory, node: usize) -> f64 {
    let mut last = 0.0;
    let mut gap: f64 = 0.0;
    for t in traj.firing_times(node) {
        gap = gap.max(t - last);
        last = t;
    }
    gap.max(traj.t_end - last)
}

/// Earliest recorded time after which `measure` stays below `threshold`.
pub fn sync_time_by(
    traj: &Trajectory,
    threshold: f64,
    measure: impl Fn(&[f64]) -> f64,
) -> Option<f64> {
    let mut since = None;
    for s in &traj.samples {
        if measure(&s.x) < threshold {
            since.get_or_insert(s.t);
        } else {
            since = None;
        }
    }
    since
}

pub fn sync_time(traj: &Trajectory) -> Option<f64> {
    sync_time_by(traj, SYNC_THRESHOLD, |x| {
        lyapunov_l(x).unwrap_or(f64::INFINITY)
    })
}

/// Longest time interval over which `L` stayed within `tol` of one value
/// above the sync threshold.
pub fn longest_nonzero_plateau(traj: &Trajectory, tol: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut start: Option<(f64, f64)> = None;
    for s in &traj.samples {
        let l = lyapunov_l(&s.x).unwrap_or(f64::NAN);
        match start {
            Some((t0, l0)) if (l - l0).abs() <= tol && l >= SYNC_THRESHOLD => {
                best = best.max(s.t - t0);
            }
            _ => {
                start = (l >= SYNC_THRESHOLD).then_some((s.t, l));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, FiringEvent, RecordMode, SimulationParams};
    use crate::prf::{builtin_prf, BuiltinPrfId};
    use crate::topology::NetworkTopology;
    use std::f64::consts::PI;

    // Brute force: try every phase as the start of a forward arc.
    fn containing_arc_oracle(x: &[f64]) -> f64 {
        x.iter()
            .map(|&start| {
                x.iter()
                    .map(|&v| (v - start).rem_euclid(TWO_PI))
                    .map(|d| if (d - TWO_PI).abs() < 1e-15 { 0.0 } else { d })
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(0.0, TWO_PI).unwrap(), 0.0);
        assert_eq!(delta(PI / 2.0, 1.5 * PI).unwrap(), PI);
        assert!((delta(0.5, TWO_PI - 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(delta(-0.1, 1.0), Err(MetricsError::Domain(-0.1)));
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov_l(&[1.3; 5]).unwrap(), 0.0);
        assert_eq!(lyapunov_l(&[0.0, PI]).unwrap(), TWO_PI);
        let ring = [0.0, PI / 2.0, PI, 1.5 * PI];
        assert!((lyapunov_l(&ring).unwrap() - TWO_PI).abs() < 1e-15);
        assert!(lyapunov_l(&[0.0, 7.0]).is_err());
    }

    #[test]
    fn containing_arc_examples() {
        assert_eq!(containing_arc(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(containing_arc(&[0.0, PI / 2.0, PI]).unwrap(), PI);
        let ring = [0.0, PI / 2.0, PI, 1.5 * PI];
        assert!((containing_arc(&ring).unwrap() - 1.5 * PI).abs() < 1e-15);
        assert_eq!(containing_arc(&[0.0, TWO_PI]).unwrap(), 0.0);
        for x in [
            vec![0.1, 6.2, 3.0],
            vec![5.9, 0.2, 0.4, 6.0],
            vec![1.0, 2.0, 4.5],
        ] {
            assert!((containing_arc(&x).unwrap() - containing_arc_oracle(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_bundle() {
        let m = SyncMetrics::of(&[0.0, TWO_PI, 0.0]).unwrap();
        assert!(m.is_synchronized());
        assert_eq!(m.sync_distance, 0.0);
        let m = SyncMetrics::of(&[0.0, PI / 2.0, PI]).unwrap();
        assert_eq!(m.sync_distance, PI / 2.0);
        assert_eq!(m.deltas.len(), 3);
    }

    fn synthetic(samples: Vec<(f64, u64, Vec<f64>)>, firings: Vec<FiringEvent>) -> Trajectory {
        Trajectory {
            samples: samples
                .into_iter()
                .map(|(t, j, x)| HybridState { x, t, j })
                .collect(),
            firings,
            record_mode: RecordMode::Dense(0.1),
            t_end: 1.0,
        }
    }

    #[test]
    fn monotone_check_flags_inserted_increase() {
        let traj = synthetic(
            vec![
                (0.0, 0, vec![1.0, 2.0, 3.0]),
                (0.1, 0, vec![1.1, 2.1, 3.1]),
                (0.1, 1, vec![1.1, 2.1, 4.6]),
                (0.2, 1, vec![1.2, 2.2, 4.7]),
            ],
            vec![FiringEvent {
                t: 0.1,
                j: 0,
                node: 9,
            }],
        );
        let report = check_l_monotone(&traj, 1e-9);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, StepKind::Jump);
        assert!(report.max_increase > 0.0);
    }

    #[test]
    fn single_oscillator_l_is_zero() {
        let net = Network::new(
            NetworkTopology::undirected_chain(&[0.5]).unwrap(),
            vec![builtin_prf(BuiltinPrfId::A)],
        )
        .unwrap();
        let traj = simulate(&[0.3], &net, &SimulationParams::default()).unwrap();
        let report = check_l_monotone(&traj, 1e-9);
        assert!(report.is_clean());
        assert!(traj.samples.iter().all(|s| lyapunov_l(&s.x).unwrap() == 0.0));
        assert_eq!(
            firing_order_changes(&traj),
            Err(MetricsError::SingleOscillator)
        );
    }

    fn chain6() -> Network {
        let ids = [
            BuiltinPrfId::A,
            BuiltinPrfId::B,
            BuiltinPrfId::C,
            BuiltinPrfId::D,
            BuiltinPrfId::A,
            BuiltinPrfId::B,
        ];
        Network::new(
            NetworkTopology::undirected_chain(&[0.4, 0.5, 0.6, 0.6, 0.5, 0.4]).unwrap(),
            ids.iter().map(|&id| builtin_prf(id)).collect(),
        )
        .unwrap()
    }

    fn post_fire(net: &Network, x: &[f64], firer: usize) -> (HybridState, HybridState) {
        let pre = HybridState::new(x.to_vec());
        let post = crate::engine::fire(&pre, firer, net, &SimulationParams::default()).unwrap();
        (pre, post)
    }

    #[test]
    fn case_three_keeps_sum() {
        // node 3 fires; node 2 at 1.0 is delayed away from node 1 at 1.5
        let net = chain6();
        let (pre, post) = post_fire(&net, &[1.5, 1.0, TWO_PI, 3.0, 3.0, 3.0], 3);
        let recs = check_jump_cases(&pre, &post, 3, &net, None, 1e-9).unwrap();
        let left = recs.iter().find(|r| r.neighbor == 2).unwrap();
        assert_eq!(left.case, JumpCase::AwayShort);
        assert!((left.sum_after() - left.sum_before()).abs() < 1e-12);
    }

    #[test]
    fn case_four_strictly_decreases() {
        // node 2 at 1.0, node 1 at 4.0: the far arc is 3.0, so the delay wraps it past π
        let net = chain6();
        let (pre, post) = post_fire(&net, &[4.0, 1.0, TWO_PI, 3.0, 3.0, 3.0], 3);
        let recs = check_jump_cases(&pre, &post, 3, &net, None, 1e-9).unwrap();
        let left = recs.iter().find(|r| r.neighbor == 2).unwrap();
        assert_eq!(left.case, JumpCase::AwayWrap);
        assert!(left.sum_after() < left.sum_before());
    }

    #[test]
    fn cases_one_and_two() {
        let net = chain6();
        // node 2 delayed toward node 1 at 0.9: short of it
        let (pre, post) = post_fire(&net, &[0.9, 1.0, TWO_PI, 3.0, 3.0, 3.0], 3);
        let recs = check_jump_cases(&pre, &post, 3, &net, None, 1e-9).unwrap();
        assert_eq!(recs[0].case, JumpCase::TowardPast);
        let (pre, post) = post_fire(&net, &[0.1, 1.0, TWO_PI, 3.0, 3.0, 3.0], 3);
        let recs = check_jump_cases(&pre, &post, 3, &net, None, 1e-9).unwrap();
        assert_eq!(recs[0].case, JumpCase::TowardShort);
        assert!(recs[0].sum_after() < recs[0].sum_before());
    }

    #[test]
    fn zero_jump_keeps_sums() {
        let net = chain6();
        let (pre, post) = post_fire(&net, &[2.0, 0.0, TWO_PI, 3.0, 3.0, 3.0], 3);
        let recs = check_jump_cases(&pre, &post, 3, &net, None, 1e-9).unwrap();
        let left = recs.iter().find(|r| r.neighbor == 2).unwrap();
        assert_eq!(left.jump, 0.0);
        assert_eq!(left.sum_after(), left.sum_before());
        assert_eq!(recs.len(), 2);
    }

    #[test]
    fn tampered_post_state_is_a_mismatch() {
        let net = chain6();
        let (pre, mut post) = post_fire(&net, &[2.0, 1.0, TWO_PI, 3.0, 3.0, 3.0], 3);
        post.x[1] += 0.1;
        assert!(matches!(
            check_jump_cases(&pre, &post, 3, &net, None, 1e-9),
            Err(MetricsError::CaseMismatch { .. })
        ));
    }

    #[test]
    fn closeness_is_reflexive_and_needs_dense() {
        let net = chain6();
        let x0 = [0.3, 1.9, 4.0, 2.2, 5.5, 0.8];
        let p = SimulationParams {
            t_end: 5.0,
            record_mode: RecordMode::Dense(0.05),
            ..Default::default()
        };
        let traj = simulate(&x0, &net, &p).unwrap();
        assert!(tau_eps_close(&traj, &traj, 50.0, 1e-9).unwrap().close);
        assert_eq!(closeness_epsilon(&traj, &traj, 50.0).unwrap(), 0.0);

        let sparse = simulate(&x0, &net, &SimulationParams::default()).unwrap();
        assert_eq!(
            tau_eps_close(&traj, &sparse, 50.0, 1.0),
            Err(MetricsError::NotDense)
        );
    }

    #[test]
    fn synchronized_start_keeps_order() {
        let net = chain6();
        let traj = simulate(&[1.0; 6], &net, &SimulationParams::default()).unwrap();
        assert_eq!(firing_order_changes(&traj).unwrap(), 0);
        assert_eq!(sync_time(&traj), Some(0.0));
        assert!(max_firing_gap(&traj, 2) <= 1.0 + 1e-12);
    }

    #[test]
    fn too_few_rounds() {
        let net = chain6();
        let p = SimulationParams {
            t_end: 1.5,
            ..Default::default()
        };
        let traj = simulate(&[1.0; 6], &net, &p).unwrap();
        assert!(matches!(
            firing_order_changes(&traj),
            Err(MetricsError::TooFewRounds { .. })
        ));
    }
}
