//! Delay-advance phase response functions.
//!
//! A PRF is split into a delay branch on `[0, π]` and an advance branch on
//! `[π, 2π]`. Both branches are described declaratively as contiguous pieces,
//! each piece being a polynomial plus a sum of sinusoids in the shifted
//! variable `u = x - origin`. The same descriptor type backs the four built-in
//! curves and user-supplied curves loaded from a run config.
//!
//! At exactly `x = π` the response is two-valued; [`PiSelection`] picks which
//! branch value a simulation uses.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TWO_PI: f64 = 2.0 * PI;

/// Which branch value is used when the receiving phase is exactly π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PiSelection {
    #[default]
    Delay,
    Advance,
}

impl PiSelection {
    pub const ALL: [PiSelection; 2] = [PiSelection::Delay, PiSelection::Advance];
}

impl fmt::Display for PiSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PiSelection::Delay => f.write_str("delay"),
            PiSelection::Advance => f.write_str("advance"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// One piece of a branch, valid for arguments up to and including `until`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub until: f64,
    #[serde(default)]
    pub origin: f64,
    /// Ascending coefficients in `u = x - origin`.
    #[serde(default)]
    pub poly: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<SineTerm>,
}

impl Piece {
    pub fn poly(until: f64, origin: f64, coeffs: impl Into<Vec<f64>>) -> Self {
        Piece {
            until,
            origin,
            poly: coeffs.into(),
            sin: Vec::new(),
        }
    }

    pub fn sine(until: f64, origin: f64, terms: impl Into<Vec<SineTerm>>) -> Self {
        Piece {
            until,
            origin,
            poly: Vec::new(),
            sin: terms.into(),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let u = x - self.origin;
        let poly = self.poly.iter().rev().fold(0.0, |acc, c| acc * u + c);
        let waves: f64 = self
            .sin
            .iter()
            .map(|s| s.amplitude * (s.frequency * u + s.phase).sin())
            .sum();
        poly + waves
    }
}

/// A real function on a closed interval, made of contiguous pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Branch {
    pieces: Vec<Piece>,
}

impl Branch {
    pub fn new(pieces: Vec<Piece>) -> Self {
        Branch { pieces }
    }

    pub fn single(piece: Piece) -> Self {
        Branch {
            pieces: vec![piece],
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Evaluates at `x`; arguments past the last breakpoint use the last piece.
    pub fn eval(&self, x: f64) -> f64 {
        let piece = self
            .pieces
            .iter()
            .find(|p| x <= p.until)
            .or_else(|| self.pieces.last());
        match piece {
            Some(p) => p.eval(x),
            None => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinPrfId {
    A,
    B,
    C,
    D,
}

impl BuiltinPrfId {
    pub const ALL: [BuiltinPrfId; 4] = [
        BuiltinPrfId::A,
        BuiltinPrfId::B,
        BuiltinPrfId::C,
        BuiltinPrfId::D,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Some(BuiltinPrfId::A),
            "B" => Some(BuiltinPrfId::B),
            "C" => Some(BuiltinPrfId::C),
            "D" => Some(BuiltinPrfId::D),
            _ => None,
        }
    }
}

impl fmt::Display for BuiltinPrfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BuiltinPrfId::A => "A",
            BuiltinPrfId::B => "B",
            BuiltinPrfId::C => "C",
            BuiltinPrfId::D => "D",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrfError {
    #[error("phase {0} is outside [0, 2π]")]
    Domain(f64),
    #[error("phase response function rejected: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("validation grid needs at least 2 points, got {0}")]
    Grid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Delay,
    Advance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Delay branch at 0 or advance branch at 2π is not exactly zero.
    EndpointNonZero,
    /// Value outside `[-x, 0)` (delay) or `(0, 2π - x]` (advance).
    Bound,
    /// Adjacent grid values differ by more than the continuity threshold.
    Discontinuity,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub branch: BranchKind,
    pub kind: ViolationKind,
    pub x: f64,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} branch {:?} at x = {} (value {})",
            self.branch, self.kind, self.x, self.value
        )
    }
}

/// Grid resolution used when a PRF is checked at construction time.
pub const DEFAULT_VALIDATION_GRID: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseResponseFunction {
    pub delay: Branch,
    pub advance: Branch,
    #[serde(default)]
    pub pi_selection: PiSelection,
}

impl PhaseResponseFunction {
    /// Builds a PRF without checking it. See [`PhaseResponseFunction::validated`].
    pub fn new(delay: Branch, advance: Branch, pi_selection: PiSelection) -> Self {
        PhaseResponseFunction {
            delay,
            advance,
            pi_selection,
        }
    }

    /// Builds a PRF and rejects it unless [`validate_prf`] reports nothing.
    pub fn validated(
        delay: Branch,
        advance: Branch,
        pi_selection: PiSelection,
    ) -> Result<Self, PrfError> {
        let prf = Self::new(delay, advance, pi_selection);
        let report = validate_prf(&prf, DEFAULT_VALIDATION_GRID)?;
        if report.is_empty() {
            Ok(prf)
        } else {
            Err(PrfError::Invalid(report))
        }
    }

    pub fn with_pi_selection(mut self, sel: PiSelection) -> Self {
        self.pi_selection = sel;
        self
    }

    pub fn eval(&self, x: f64) -> Result<f64, PrfError> {
        self.eval_with(x, self.pi_selection)
    }

    pub fn eval_with(&self, x: f64, sel: PiSelection) -> Result<f64, PrfError> {
        if !(0.0..=TWO_PI).contains(&x) {
            return Err(PrfError::Domain(x));
        }
        let value = if x < PI {
            self.delay.eval(x)
        } else if x > PI {
            self.advance.eval(x)
        } else {
            match sel {
                PiSelection::Delay => self.delay.eval(x),
                PiSelection::Advance => self.advance.eval(x),
            }
        };
        Ok(value)
    }

    /// Draws a random piecewise-linear PRF satisfying the delay-advance bounds.
    ///
    /// Each branch interpolates `knots` interior values sampled strictly inside
    /// the admissible band, so every convex combination stays admissible.
    pub fn random_piecewise_linear<R: Rng + ?Sized>(rng: &mut R, knots: usize) -> Self {
        let knots = knots.max(1);
        // delay branch: points (0, 0), (x_k, -x_k * s_k) ..., (π, -π * s_end)
        let mut delay_pts = vec![(0.0, 0.0)];
        for k in 1..=knots {
            let x = PI * k as f64 / (knots + 1) as f64;
            delay_pts.push((x, -x * rng.gen_range(0.02..0.98)));
        }
        delay_pts.push((PI, -PI * rng.gen_range(0.02..0.98)));

        let mut advance_pts = vec![(PI, PI * rng.gen_range(0.02..0.98))];
        for k in 1..=knots {
            let x = PI + PI * k as f64 / (knots + 1) as f64;
            advance_pts.push((x, (TWO_PI - x) * rng.gen_range(0.02..0.98)));
        }
        advance_pts.push((TWO_PI, 0.0));

        PhaseResponseFunction::new(
            linear_pieces(&delay_pts),
            linear_pieces(&advance_pts),
            PiSelection::Delay,
        )
    }
}

/// Piecewise-linear interpolation; each segment is expanded about its left
/// knot, except a final segment ending at zero, which is expanded about its
/// right knot so the endpoint evaluates to exactly zero.
fn linear_pieces(points: &[(f64, f64)]) -> Branch {
    let n = points.len();
    let pieces = points
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            let slope = (y1 - y0) / (x1 - x0);
            if k == n - 2 && y1 == 0.0 {
                Piece::poly(x1, x1, vec![0.0, slope])
            } else if k == 0 && y0 == 0.0 {
                Piece::poly(x1, x0, vec![0.0, slope])
            } else {
                Piece::poly(x1, x0, vec![y0, slope])
            }
        })
        .collect();
    Branch::new(pieces)
}

pub fn prf_eval(prf: &PhaseResponseFunction, x: f64) -> Result<f64, PrfError> {
    prf.eval(x)
}

/// Evaluates both branches on a uniform grid and lists every violation of the
/// delay-advance conditions. An empty report means the PRF is accepted.
pub fn validate_prf(
    prf: &PhaseResponseFunction,
    grid_points: usize,
) -> Result<Vec<Violation>, PrfError> {
    if grid_points < 2 {
        return Err(PrfError::Grid(grid_points));
    }
    let jump_limit = 10.0 * (TWO_PI / grid_points as f64) + 1e-6;
    let mut report = Vec::new();

    for kind in [BranchKind::Delay, BranchKind::Advance] {
        let (branch, lo) = match kind {
            BranchKind::Delay => (&prf.delay, 0.0),
            BranchKind::Advance => (&prf.advance, PI),
        };
        let mut prev: Option<f64> = None;
        for k in 0..grid_points {
            let x = if k == grid_points - 1 {
                lo + PI
            } else {
                lo + PI * k as f64 / (grid_points - 1) as f64
            };
            let value = branch.eval(x);
            let mut push = |vk| {
                report.push(Violation {
                    branch: kind,
                    kind: vk,
                    x,
                    value,
                })
            };
            if !value.is_finite() {
                push(ViolationKind::NonFinite);
                prev = None;
                continue;
            }
            match kind {
                BranchKind::Delay if x == 0.0 => {
                    if value != 0.0 {
                        push(ViolationKind::EndpointNonZero);
                    }
                }
                BranchKind::Delay => {
                    if !(value >= -x && value < 0.0) {
                        push(ViolationKind::Bound);
                    }
                }
                BranchKind::Advance if x == TWO_PI => {
                    if value != 0.0 {
                        push(ViolationKind::EndpointNonZero);
                    }
                }
                BranchKind::Advance => {
                    if !(value > 0.0 && value <= TWO_PI - x) {
                        push(ViolationKind::Bound);
                    }
                }
            }
            if let Some(p) = prev {
                if (value - p).abs() > jump_limit {
                    push(ViolationKind::Discontinuity);
                }
            }
            prev = Some(value);
        }
    }
    Ok(report)
}

pub fn builtin_prf(id: BuiltinPrfId) -> PhaseResponseFunction {
    let (delay, advance) = match id {
        BuiltinPrfId::A => (
            Branch::single(Piece::poly(PI, 0.0, vec![0.0, -0.6])),
            Branch::single(Piece::poly(TWO_PI, TWO_PI, vec![0.0, -0.6])),
        ),
        BuiltinPrfId::B => (
            Branch::new(vec![
                Piece::poly(PI / 2.0, 0.0, vec![0.0, -0.7]),
                Piece::poly(PI, 0.0, vec![-0.35 * PI]),
            ]),
            Branch::new(vec![
                Piece::poly(1.5 * PI, 0.0, vec![0.35 * PI]),
                Piece::poly(TWO_PI, TWO_PI, vec![0.0, -0.7]),
            ]),
        ),
        // 1.5 sin(x/2) = -1.5 sin((x - 2π)/2) on the advance side.
        BuiltinPrfId::C => (
            Branch::single(Piece::sine(
                PI,
                0.0,
                vec![SineTerm {
                    amplitude: -1.5,
                    frequency: 0.5,
                    phase: 0.0,
                }],
            )),
            Branch::single(Piece::sine(
                TWO_PI,
                TWO_PI,
                vec![SineTerm {
                    amplitude: -1.5,
                    frequency: 0.5,
                    phase: 0.0,
                }],
            )),
        ),
        // Advance cubic -x³/π² + 5x²/π - 8.75x + 5.5π rewritten in u = x - 2π.
        BuiltinPrfId::D => (
            Branch::single(Piece::poly(
                PI,
                0.0,
                vec![0.0, -0.75, 1.0 / PI, -1.0 / (PI * PI)],
            )),
            Branch::single(Piece::poly(
                TWO_PI,
                TWO_PI,
                vec![0.0, -0.75, -1.0 / PI, -1.0 / (PI * PI)],
            )),
        ),
    };
    PhaseResponseFunction::new(delay, advance, PiSelection::Delay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Direct transcriptions of the closed forms, kept apart from the
    // piece descriptors the library uses.
    fn closed_form(id: BuiltinPrfId, x: f64) -> f64 {
        match id {
            BuiltinPrfId::A if x <= PI => -0.6 * x,
            BuiltinPrfId::A => 0.6 * (TWO_PI - x),
            BuiltinPrfId::B if x < PI / 2.0 => -0.7 * x,
            BuiltinPrfId::B if x <= PI => -0.35 * PI,
            BuiltinPrfId::B if x <= 1.5 * PI => 0.35 * PI,
            BuiltinPrfId::B => 0.7 * (TWO_PI - x),
            BuiltinPrfId::C if x <= PI => -1.5 * (0.5 * x).sin(),
            BuiltinPrfId::C => 1.5 * (0.5 * x).sin(),
            BuiltinPrfId::D if x <= PI => -x.powi(3) / (PI * PI) + x * x / PI - 0.75 * x,
            BuiltinPrfId::D => {
                -x.powi(3) / (PI * PI) + 5.0 * x * x / PI - 8.75 * x + 5.5 * PI
            }
        }
    }

    #[test]
    fn builtins_match_closed_forms() {
        for id in BuiltinPrfId::ALL {
            let prf = builtin_prf(id);
            for k in 0..=400 {
                let x = TWO_PI * k as f64 / 400.0;
                let got = prf.eval(x).unwrap();
                let want = closed_form(id, x);
                assert!((got - want).abs() < 1e-12, "{id} at {x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn eval_examples() {
        let a = builtin_prf(BuiltinPrfId::A);
        assert_eq!(a.eval(0.0).unwrap(), 0.0);
        assert!((a.eval(PI / 2.0).unwrap() - (-0.6 * PI / 2.0)).abs() < 1e-15);
        assert!((a.eval(PI / 2.0).unwrap() + 0.942_477_8).abs() < 1e-7);

        let c = builtin_prf(BuiltinPrfId::C);
        let v = c.eval(1.5 * PI).unwrap();
        assert!((v - 1.5 * (0.75 * PI).sin()).abs() < 1e-15);
        assert!((v - 1.060_660_2).abs() < 1e-7);

        let b = builtin_prf(BuiltinPrfId::B);
        let v = b.eval(1.25 * PI).unwrap();
        assert!((v - 0.35 * PI).abs() < 1e-15);
        assert!((v - 1.099_557_4).abs() < 1e-7);
    }

    #[test]
    fn branch_values_at_pi_and_endpoints() {
        let a = builtin_prf(BuiltinPrfId::A);
        assert!((a.delay.eval(PI) + 0.6 * PI).abs() < 1e-15);
        let d = builtin_prf(BuiltinPrfId::D);
        assert!((d.delay.eval(PI) + 0.75 * PI).abs() < 1e-14);
        assert!((d.advance.eval(PI) - 0.75 * PI).abs() < 1e-14);
        let c = builtin_prf(BuiltinPrfId::C);
        assert_eq!(c.advance.eval(TWO_PI), 0.0);

        for id in BuiltinPrfId::ALL {
            let prf = builtin_prf(id);
            assert_eq!(prf.eval(0.0).unwrap(), 0.0);
            assert_eq!(prf.eval(TWO_PI).unwrap(), 0.0);
            assert_eq!(prf.pi_selection, PiSelection::Delay);
            let lo = prf.eval_with(PI, PiSelection::Delay).unwrap();
            let hi = prf.eval_with(PI, PiSelection::Advance).unwrap();
            assert!(lo < 0.0 && hi > 0.0);
        }
    }

    #[test]
    fn out_of_domain_is_error() {
        let a = builtin_prf(BuiltinPrfId::A);
        assert_eq!(a.eval(-1e-9), Err(PrfError::Domain(-1e-9)));
        assert!(a.eval(TWO_PI + 1e-9).is_err());
        assert!(a.eval(f64::NAN).is_err());
    }

    #[test]
    fn builtins_validate_clean() {
        for id in BuiltinPrfId::ALL {
            assert!(validate_prf(&builtin_prf(id), 10_000).unwrap().is_empty());
        }
        assert!(validate_prf(&builtin_prf(BuiltinPrfId::D), 1000)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn positive_delay_branch_flagged_everywhere() {
        let mut prf = builtin_prf(BuiltinPrfId::A);
        prf.delay = Branch::single(Piece::poly(PI, 0.0, vec![0.0, 1.0]));
        let report = validate_prf(&prf, 10).unwrap();
        let bad: Vec<f64> = report
            .iter()
            .filter(|v| v.branch == BranchKind::Delay && v.kind == ViolationKind::Bound)
            .map(|v| v.x)
            .collect();
        assert_eq!(bad.len(), 9);
        assert!(bad.iter().all(|&x| x > 0.0));
        assert!(report.iter().all(|v| v.branch == BranchKind::Delay));
    }

    #[test]
    fn nonzero_origin_value_flagged() {
        let mut prf = builtin_prf(BuiltinPrfId::A);
        prf.delay = Branch::single(Piece::poly(PI, 0.0, vec![-0.1, -0.5]));
        let report = validate_prf(&prf, 10).unwrap();
        assert!(report
            .iter()
            .any(|v| v.x == 0.0 && v.kind == ViolationKind::EndpointNonZero));
    }

    #[test]
    fn non_finite_and_jumps_are_reported_not_panics() {
        let mut prf = builtin_prf(BuiltinPrfId::A);
        prf.advance = Branch::new(vec![
            Piece::poly(1.5 * PI, 0.0, vec![0.1]),
            Piece::poly(TWO_PI, TWO_PI, vec![0.0, -1.0]),
        ]);
        let report = validate_prf(&prf, 100).unwrap();
        assert!(report.iter().any(|v| v.kind == ViolationKind::Discontinuity));

        prf.advance = Branch::single(Piece::poly(TWO_PI, TWO_PI, vec![f64::NAN]));
        let report = validate_prf(&prf, 10).unwrap();
        assert_eq!(
            report
                .iter()
                .filter(|v| v.kind == ViolationKind::NonFinite)
                .count(),
            10
        );
        assert_eq!(validate_prf(&prf, 1), Err(PrfError::Grid(1)));
    }

    #[test]
    fn validated_constructor_rejects() {
        let bad = PhaseResponseFunction::validated(
            Branch::single(Piece::poly(PI, 0.0, vec![0.0, 1.0])),
            builtin_prf(BuiltinPrfId::A).advance,
            PiSelection::Delay,
        );
        assert!(matches!(bad, Err(PrfError::Invalid(_))));
    }

    #[test]
    fn random_piecewise_linear_prfs_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let knots = rng.gen_range(1..6);
            let prf = PhaseResponseFunction::random_piecewise_linear(&mut rng, knots);
            let report = validate_prf(&prf, 4000).unwrap();
            assert!(report.is_empty(), "{:?}", &report[..report.len().min(3)]);
        }
    }
}
