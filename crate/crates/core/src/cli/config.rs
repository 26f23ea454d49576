//! Run-config documents (TOML).
//!
//! Every numeric field accepts either a TOML number or a string expression in
//! multiples of π: `"pi"`, `"2pi"`, `"-0.35*pi"`, `"3pi/2"`, `"pi/2"`, `"1.5"`.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::Deserialize;
use thiserror::Error;

use crate::engine::{Network, Perturbation, RecordMode, SimulationParams, SineSum, Wave};
use crate::prf::{
    builtin_prf, validate_prf, Branch, BuiltinPrfId, PhaseResponseFunction, Piece, PiSelection,
    SineTerm, DEFAULT_VALIDATION_GRID, TWO_PI,
};
use crate::topology::{NetworkTopology, TopologyKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("config is invalid:\n{}", format_issues(.0))]
    Invalid(Vec<FieldIssue>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn format_issues(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses `"pi"`-style expressions: `[sign][coef][*]pi[/den]` or a decimal.
pub fn parse_pi_expr(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let lower = s.to_ascii_lowercase();
    let Some(pos) = lower.find("pi").or_else(|| lower.find('π')) else {
        return lower.parse::<f64>().ok().filter(|v| v.is_finite());
    };
    let token_len = if lower[pos..].starts_with("pi") { 2 } else { 'π'.len_utf8() };
    let (head, tail) = (&lower[..pos], &lower[pos + token_len..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().ok()?,
    };
    let den = match tail {
        "" => 1.0,
        t => t.strip_prefix('/')?.parse::<f64>().ok()?,
    };
    let v = coef * std::f64::consts::PI / den;
    v.is_finite().then_some(v)
}

/// A config number: plain TOML number or π-expression string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            I(i64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(v) => Ok(Num(v)),
            Raw::I(v) => Ok(Num(v as f64)),
            Raw::S(s) => parse_pi_expr(&s)
                .map(Num)
                .ok_or_else(|| de::Error::custom(format!("cannot read {s:?} as a number"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    omega: Option<Num>,
    /// Horizon in seconds.
    t_end: Option<Num>,
    /// Horizon in natural periods; used when `t_end` is absent.
    periods: Option<Num>,
    event_tolerance: Option<Num>,
    pi_selection: Option<PiSelection>,
    topology: RawTopology,
    prfs: Vec<RawPrf>,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    record: RawRecord,
    perturbation: Option<RawPerturbation>,
    batch: Option<RawBatch>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    kind: TopologyKind,
    n: Option<usize>,
    coupling: Vec<Num>,
    /// Parent id per node, 0 for the root.
    parents: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawPrf {
    Builtin(String),
    Custom(RawCustomPrf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustomPrf {
    delay: Vec<RawPiece>,
    advance: Vec<RawPiece>,
    pi_selection: Option<PiSelection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    until: Num,
    origin: Option<Num>,
    #[serde(default)]
    poly: Vec<Num>,
    #[serde(default)]
    sin: Vec<RawSine>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSine {
    amplitude: Num,
    frequency: Num,
    phase: Option<Num>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    phases: Option<Vec<Num>>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    dense: Option<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawPerturbation {
    SinusoidFamily { amplitude: Num },
    Custom { nodes: Vec<RawSineSum> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSineSum {
    offset: Option<Num>,
    #[serde(default)]
    waves: Vec<RawWave>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWave {
    amplitude: Num,
    angular_freq: Num,
    phase: Option<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBatch {
    count: usize,
    base_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPhases {
    Explicit(Vec<f64>),
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub count: usize,
    pub base_seed: u64,
}

/// Label of the PRF assigned to one node, for summaries.
#[derive(Debug, Clone, PartialEq)]
pub enum PrfLabel {
    Builtin(BuiltinPrfId),
    Custom,
}

impl fmt::Display for PrfLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrfLabel::Builtin(id) => write!(f, "{id}"),
            PrfLabel::Custom => f.write_str("custom"),
        }
    }
}

/// A fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub network: Network,
    pub prf_labels: Vec<PrfLabel>,
    pub params: SimulationParams,
    pub initial: InitialPhases,
    pub batch: Option<BatchSpec>,
}

impl RunConfig {
    pub fn n(&self) -> usize {
        self.network.n()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.initial = InitialPhases::Random { seed };
        if let Some(b) = &mut self.batch {
            b.base_seed = seed;
        }
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.params.t_end = t_end;
        self
    }

    pub fn with_dense(mut self, dt: f64) -> Self {
        self.params.record_mode = RecordMode::Dense(dt);
        self
    }

    pub fn with_pi_selection(mut self, sel: PiSelection) -> Self {
        self.params.pi_selection_override = Some(sel);
        self
    }

    pub fn seed(&self) -> Option<u64> {
        match self.initial {
            InitialPhases::Random { seed } => Some(seed),
            InitialPhases::Explicit(_) => None,
        }
    }

    pub fn initial_phases(&self) -> Vec<f64> {
        match &self.initial {
            InitialPhases::Explicit(x) => x.clone(),
            InitialPhases::Random { seed } => random_phases(self.n(), *seed),
        }
    }
}

/// Uniform phases on `[0, 2π)` from a seeded ChaCha8 stream.
pub fn random_phases(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..TWO_PI)).collect()
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    Validator::default().build(raw)
}

#[derive(Default)]
struct Validator {
    issues: Vec<FieldIssue>,
}

impl Validator {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(FieldIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn build(mut self, raw: RawConfig) -> Result<RunConfig, ConfigError> {
        let topo_raw = &raw.topology;
        let n = topo_raw.n.unwrap_or(topo_raw.coupling.len());
        if n == 0 {
            self.issue("topology.n", "network needs at least one oscillator");
        }
        if topo_raw.coupling.len() != n {
            self.issue(
                "topology.coupling",
                format!("expected {n} entries, got {}", topo_raw.coupling.len()),
            );
        }
        let coupling: Vec<f64> = topo_raw.coupling.iter().map(|c| c.0).collect();
        for (k, &l) in coupling.iter().enumerate() {
            if !(l > 0.0 && l < 1.0) {
                self.issue(
                    format!("topology.coupling[{k}]"),
                    format!("coupling {l} must lie strictly between 0 and 1"),
                );
            }
        }
        let parents = match (topo_raw.kind, &topo_raw.parents) {
            (TopologyKind::DirectedTree, None) => {
                self.issue("topology.parents", "a directed tree needs a parent list");
                None
            }
            (TopologyKind::DirectedTree, Some(p)) => {
                Some(p.iter().map(|&v| (v != 0).then_some(v)).collect::<Vec<_>>())
            }
            (_, Some(_)) => {
                self.issue("topology.parents", "only directed trees take a parent list");
                None
            }
            (_, None) => None,
        };

        if raw.prfs.len() != n {
            self.issue(
                "prfs",
                format!("expected one entry per node ({n}), got {}", raw.prfs.len()),
            );
        }
        let mut prfs = Vec::new();
        let mut labels = Vec::new();
        for (k, p) in raw.prfs.iter().enumerate() {
            let path = format!("prfs[{k}]");
            match p {
                RawPrf::Builtin(s) => match BuiltinPrfId::parse(s) {
                    Some(id) => {
                        prfs.push(builtin_prf(id));
                        labels.push(PrfLabel::Builtin(id));
                    }
                    None => self.issue(path, format!("unknown built-in PRF {s:?}")),
                },
                RawPrf::Custom(c) => {
                    let prf = PhaseResponseFunction::new(
                        branch(&c.delay),
                        branch(&c.advance),
                        c.pi_selection.unwrap_or_default(),
                    );
                    let report = validate_prf(&prf, DEFAULT_VALIDATION_GRID).unwrap_or_default();
                    for v in report.iter().take(5) {
                        self.issue(path.clone(), v.to_string());
                    }
                    if report.len() > 5 {
                        self.issue(path.clone(), format!("... {} more", report.len() - 5));
                    }
                    prfs.push(prf);
                    labels.push(PrfLabel::Custom);
                }
            }
        }

        let omega = raw.omega.map_or(TWO_PI, |v| v.0);
        if !(omega.is_finite() && omega > 0.0) {
            self.issue("omega", format!("must be positive, got {omega}"));
        }
        let period = TWO_PI / omega;
        let t_end = match (raw.t_end, raw.periods) {
            (Some(t), None) => t.0,
            (None, Some(p)) => p.0 * period,
            (None, None) => 50.0 * period,
            (Some(t), Some(_)) => {
                self.issue("periods", "give either t_end or periods, not both");
                t.0
            }
        };
        if !(t_end.is_finite() && t_end >= 0.0) {
            self.issue("t_end", format!("must be a nonnegative number, got {t_end}"));
        }
        let event_tolerance = raw.event_tolerance.map_or(1e-12, |v| v.0);
        if !(event_tolerance.is_finite() && event_tolerance > 0.0) {
            self.issue("event_tolerance", "must be positive");
        }
        let record_mode = match raw.record.dense {
            None => RecordMode::EventsOnly,
            Some(Num(dt)) if dt.is_finite() && dt > 0.0 => RecordMode::Dense(dt),
            Some(Num(dt)) => {
                self.issue("record.dense", format!("sample interval must be positive, got {dt}"));
                RecordMode::EventsOnly
            }
        };

        let perturbation = match &raw.perturbation {
            None => None,
            Some(RawPerturbation::SinusoidFamily { amplitude }) => {
                Some(Perturbation::sinusoid_family(amplitude.0, n))
            }
            Some(RawPerturbation::Custom { nodes }) => {
                if nodes.len() != n {
                    self.issue(
                        "perturbation.nodes",
                        format!("expected {n} entries, got {}", nodes.len()),
                    );
                }
                Some(Perturbation::Sinusoids(
                    nodes
                        .iter()
                        .map(|s| SineSum {
                            offset: s.offset.map_or(0.0, |v| v.0),
                            waves: s
                                .waves
                                .iter()
                                .map(|w| Wave {
                                    amplitude: w.amplitude.0,
                                    angular_freq: w.angular_freq.0,
                                    phase: w.phase.map_or(0.0, |v| v.0),
                                })
                                .collect(),
                        })
                        .collect(),
                ))
            }
        };
        if let Some(p) = &perturbation {
            let b = p.max_bound();
            if !(b.is_finite() && b < omega) {
                self.issue(
                    "perturbation",
                    format!("perturbation bound {b} must stay below omega {omega}"),
                );
            }
        }

        let initial = match (&raw.initial.phases, raw.initial.seed) {
            (Some(_), Some(_)) => {
                self.issue("initial", "give either phases or seed, not both");
                InitialPhases::Random { seed: 0 }
            }
            (Some(ph), None) => {
                if ph.len() != n {
                    self.issue(
                        "initial.phases",
                        format!("expected {n} entries, got {}", ph.len()),
                    );
                }
                for (k, v) in ph.iter().enumerate() {
                    if !(0.0..=TWO_PI).contains(&v.0) {
                        self.issue(
                            format!("initial.phases[{k}]"),
                            format!("{} is outside [0, 2π]", v.0),
                        );
                    }
                }
                InitialPhases::Explicit(ph.iter().map(|v| v.0).collect())
            }
            (None, seed) => InitialPhases::Random {
                seed: seed.unwrap_or(0),
            },
        };

        let batch = raw.batch.as_ref().map(|b| BatchSpec {
            count: b.count,
            base_seed: b.base_seed.unwrap_or(0),
        });
        if let Some(b) = &batch {
            if b.count == 0 {
                self.issue("batch.count", "must be at least 1");
            }
        }

        if !self.issues.is_empty() {
            return Err(ConfigError::Invalid(self.issues));
        }

        let topo = NetworkTopology::build(topo_raw.kind, n, &coupling, parents.as_deref())
            .map_err(|e| single("topology", e.to_string()))?;
        let network = Network::new(topo, prfs).map_err(|e| single("prfs", e.to_string()))?;
        let params = SimulationParams {
            omega,
            perturbation,
            pi_selection_override: raw.pi_selection,
            t_end,
            event_tolerance,
            record_mode,
        };
        params
            .validate()
            .map_err(|e| single("params", e.to_string()))?;
        Ok(RunConfig {
            name: raw.name.unwrap_or_else(|| "run".to_string()),
            network,
            prf_labels: labels,
            params,
            initial,
            batch,
        })
    }
}

fn single(path: &str, message: String) -> ConfigError {
    ConfigError::Invalid(vec![FieldIssue {
        path: path.to_string(),
        message,
    }])
}

fn branch(pieces: &[RawPiece]) -> Branch {
    Branch::new(
        pieces
            .iter()
            .map(|p| Piece {
                until: p.until.0,
                origin: p.origin.map_or(0.0, |v| v.0),
                poly: p.poly.iter().map(|c| c.0).collect(),
                sin: p
                    .sin
                    .iter()
                    .map(|s| SineTerm {
                        amplitude: s.amplitude.0,
                        frequency: s.frequency.0,
                        phase: s.phase.map_or(0.0, |v| v.0),
                    })
                    .collect(),
            })
            .collect(),
    )
}
