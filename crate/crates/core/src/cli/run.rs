//! Single runs and seeded batches.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use super::artifacts::{self, fmt_f64, key_value_csv, write_file};
use super::config::{random_phases, ConfigError, InitialPhases, RunConfig};
use crate::engine::{simulate, EngineError, Trajectory};
use crate::metrics::{
    chain_lyapunov, check_chain_l_monotone, check_l_monotone, containing_arc,
    firing_order_changes, lyapunov_l, sync_time_by, MetricsError, SYNC_THRESHOLD,
};
use crate::topology::TopologyKind;

/// Tolerance for the `L` monotonicity audit attached to every summary.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Engine(#[from] EngineError),
    #[error("metric evaluation failed: {0}")]
    Metrics(#[from] MetricsError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 1 validation, 2 invariant, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Io { .. }) | RunError::Io(_) => 3,
            RunError::Config(_) => 1,
            RunError::Engine(EngineError::Params(_))
            | RunError::Engine(EngineError::Count { .. })
            | RunError::Engine(EngineError::Topology(_)) => 1,
            RunError::Engine(_) | RunError::Metrics(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub n: usize,
    pub topology: TopologyKind,
    pub seed: Option<u64>,
    pub t_end: f64,
    pub jumps: u64,
    pub max_jumps_at_one_time: usize,
    pub final_l: f64,
    pub final_vc: f64,
    /// Earliest time after which the sync measure stays below threshold.
    pub sync_time: Option<f64>,
    /// Final `L` of each decomposed chain (trees only).
    pub chain_final_l: Vec<f64>,
    /// `None` when the run is perturbed and no monotonicity is expected.
    pub monotone_violations: Option<usize>,
    pub max_l_increase: Option<f64>,
    /// `None` when too few firing rounds were recorded.
    pub order_changes: Option<usize>,
}

impl RunSummary {
    pub fn synced(&self) -> bool {
        self.sync_time.is_some()
    }

    /// Invariant failures a run must never show.
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_jumps_at_one_time > self.n {
            out.push(format!(
                "{} jumps at one time instant with {} oscillators",
                self.max_jumps_at_one_time, self.n
            ));
        }
        if let Some(v) = self.monotone_violations.filter(|&v| v > 0) {
            out.push(format!(
                "L increased {v} times (largest increase {:e})",
                self.max_l_increase.unwrap_or(0.0)
            ));
        }
        out
    }

    pub fn rows(&self) -> Vec<(String, String)> {
        let opt_f = |v: Option<f64>| v.map_or_else(|| "none".to_string(), fmt_f64);
        let opt_u = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mut rows = vec![
            ("name".into(), self.name.clone()),
            ("n".into(), self.n.to_string()),
            ("topology".into(), self.topology.to_string()),
            (
                "seed".into(),
                self.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
            ),
            ("t_end".into(), fmt_f64(self.t_end)),
            ("jumps".into(), self.jumps.to_string()),
            (
                "max_jumps_at_one_time".into(),
                self.max_jumps_at_one_time.to_string(),
            ),
            ("final_L".into(), fmt_f64(self.final_l)),
            ("final_Vc".into(), fmt_f64(self.final_vc)),
            ("synced".into(), self.synced().to_string()),
            ("sync_time".into(), opt_f(self.sync_time)),
            ("l_monotone_violations".into(), opt_u(self.monotone_violations)),
            ("max_l_increase".into(), opt_f(self.max_l_increase)),
            ("firing_order_changes".into(), opt_u(self.order_changes)),
        ];
        for (k, l) in self.chain_final_l.iter().enumerate() {
            rows.push((format!("final_L_chain{}", k + 1), fmt_f64(*l)));
        }
        rows
    }
}

/// Simulates `cfg` from the initial phases it describes.
pub fn simulate_config(cfg: &RunConfig) -> Result<Trajectory, RunError> {
    Ok(simulate(&cfg.initial_phases(), &cfg.network, &cfg.params)?)
}

/// Summarises a trajectory produced from `cfg`.
pub fn summarize(cfg: &RunConfig, traj: &Trajectory) -> Result<RunSummary, RunError> {
    let topo = cfg.network.topology();
    let chains = match topo.kind() {
        TopologyKind::DirectedTree => topo.decompose_tree().map_err(EngineError::from)?,
        _ => Vec::new(),
    };
    let last = &traj.final_state().x;
    let final_l = lyapunov_l(last)?;
    let final_vc = containing_arc(last)?;
    let chain_final_l = chains
        .iter()
        .map(|c| chain_lyapunov(last, c))
        .collect::<Result<Vec<_>, _>>()?;

    let sync_time = if chains.is_empty() {
        sync_time_by(traj, SYNC_THRESHOLD, |x| {
            lyapunov_l(x).unwrap_or(f64::INFINITY)
        })
    } else {
        sync_time_by(traj, SYNC_THRESHOLD, |x| {
            chains
                .iter()
                .map(|c| chain_lyapunov(x, c).unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max)
        })
    };

    let (monotone_violations, max_l_increase) = if cfg.params.perturbation.is_some() {
        (None, None)
    } else if chains.is_empty() {
        let r = check_l_monotone(traj, MONOTONE_TOL);
        (Some(r.violations.len()), Some(r.max_increase))
    } else {
        let mut count = 0;
        let mut worst: f64 = 0.0;
        for c in &chains {
            let r = check_chain_l_monotone(traj, c, MONOTONE_TOL);
            count += r.violations.len();
            worst = worst.max(r.max_increase);
        }
        (Some(count), Some(worst))
    };

    Ok(RunSummary {
        name: cfg.name.clone(),
        n: cfg.n(),
        topology: topo.kind(),
        seed: cfg.seed(),
        t_end: cfg.params.t_end,
        jumps: traj.jump_count(),
        max_jumps_at_one_time: traj.max_jumps_at_one_time(),
        final_l,
        final_vc,
        sync_time,
        chain_final_l,
        monotone_violations,
        max_l_increase,
        order_changes: firing_order_changes(traj).ok(),
    })
}

/// Runs `cfg` and writes trajectory, firing, summary (and, for trees,
/// per-chain) tables into `out_dir`.
pub fn run_to_dir(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary, RunError> {
    let traj = simulate_config(cfg)?;
    let summary = summarize(cfg, &traj)?;
    std::fs::create_dir_all(out_dir)?;
    write_file(
        out_dir,
        artifacts::TRAJECTORY_FILE,
        &artifacts::trajectory_csv(&traj)?,
    )?;
    write_file(out_dir, artifacts::FIRINGS_FILE, &artifacts::firings_csv(&traj))?;
    write_file(out_dir, artifacts::SUMMARY_FILE, &key_value_csv(&summary.rows()))?;
    if cfg.network.topology().kind() == TopologyKind::DirectedTree {
        let chains = cfg
            .network
            .topology()
            .decompose_tree()
            .map_err(EngineError::from)?;
        write_file(
            out_dir,
            artifacts::CHAINS_FILE,
            &artifacts::chains_csv(&traj, &chains)?,
        )?;
    }
    Ok(summary)
}

/// Outcome of one seeded run inside a batch.
#[derive(Debug, Clone)]
pub struct BatchRun {
    pub seed: u64,
    pub result: Result<RunSummary, String>,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub name: String,
    pub perturbed: bool,
    pub runs: Vec<BatchRun>,
}

impl BatchReport {
    pub fn count(&self) -> usize {
        self.runs.len()
    }

    fn summaries(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter_map(|r| r.result.as_ref().ok())
    }

    pub fn aborted(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }

    pub fn synced(&self) -> usize {
        self.summaries().filter(|s| s.synced()).count()
    }

    pub fn success_rate(&self) -> f64 {
        self.synced() as f64 / self.count().max(1) as f64
    }

    /// Sorted sync times of the runs that synchronised.
    pub fn sync_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.summaries().filter_map(|s| s.sync_time).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn monotone_violations(&self) -> usize {
        self.summaries().filter_map(|s| s.monotone_violations).sum()
    }

    /// Fraction of runs with at least one firing-order change between rounds.
    pub fn order_change_incidence(&self) -> f64 {
        let with = self
            .summaries()
            .filter(|s| s.order_changes.is_some_and(|c| c > 0))
            .count();
        with as f64 / self.count().max(1) as f64
    }

    /// Batch-level failures. Sync and monotonicity are only demanded of
    /// unperturbed configurations.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.runs {
            match &r.result {
                Err(e) => out.push(format!("seed {}: {e}", r.seed)),
                Ok(s) => {
                    for f in s.invariant_failures() {
                        out.push(format!("seed {}: {f}", r.seed));
                    }
                    if !self.perturbed && !s.synced() {
                        out.push(format!("seed {}: did not synchronise", r.seed));
                    }
                }
            }
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "seed,synced,sync_time,final_L,jumps,max_jumps_at_one_time,l_monotone_violations,firing_order_changes,error\n",
        );
        for r in &self.runs {
            match &r.result {
                Ok(s) => {
                    let row = s.rows();
                    let get = |k: &str| {
                        row.iter()
                            .find(|(key, _)| key == k)
                            .map(|(_, v)| v.clone())
                            .unwrap_or_default()
                    };
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},\n",
                        r.seed,
                        s.synced(),
                        get("sync_time"),
                        get("final_L"),
                        s.jumps,
                        s.max_jumps_at_one_time,
                        get("l_monotone_violations"),
                        get("firing_order_changes"),
                    ));
                }
                Err(e) => out.push_str(&format!(
                    "{},,,,,,,,{}\n",
                    r.seed,
                    e.replace([',', '\n'], " ")
                )),
            }
        }
        out
    }

    pub fn summary_rows(&self) -> Vec<(String, String)> {
        let times = self.sync_times();
        let pick = |v: Option<&f64>| v.map_or_else(|| "none".to_string(), |t| fmt_f64(*t));
        let median = if times.is_empty() {
            None
        } else if times.len() % 2 == 1 {
            Some(times[times.len() / 2])
        } else {
            Some(0.5 * (times[times.len() / 2 - 1] + times[times.len() / 2]))
        };
        vec![
            ("name".into(), self.name.clone()),
            ("runs".into(), self.count().to_string()),
            ("aborted".into(), self.aborted().to_string()),
            ("synced".into(), self.synced().to_string()),
            ("success_rate".into(), fmt_f64(self.success_rate())),
            ("sync_time_min".into(), pick(times.first())),
            ("sync_time_median".into(), pick(median.as_ref())),
            ("sync_time_max".into(), pick(times.last())),
            (
                "l_monotone_violations".into(),
                if self.perturbed {
                    "none".into()
                } else {
                    self.monotone_violations().to_string()
                },
            ),
            (
                "order_change_incidence".into(),
                fmt_f64(self.order_change_incidence()),
            ),
        ]
    }
}

/// Runs seeds `base_seed .. base_seed + count` in parallel.
pub fn run_batch(cfg: &RunConfig, count: usize, base_seed: u64) -> Result<BatchReport, RunError> {
    if count == 0 {
        return Err(single_issue("batch.count", "must be at least 1"));
    }
    if matches!(cfg.initial, InitialPhases::Explicit(_)) {
        return Err(single_issue(
            "initial",
            "a batch draws random initial phases; remove initial.phases",
        ));
    }
    let runs = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed + k;
            let result = simulate(&random_phases(cfg.n(), seed), &cfg.network, &cfg.params)
                .map_err(RunError::from)
                .and_then(|traj| {
                    let run_cfg = cfg.clone().with_seed(seed);
                    summarize(&run_cfg, &traj)
                })
                .map_err(|e| e.to_string());
            BatchRun { seed, result }
        })
        .collect();
    Ok(BatchReport {
        name: cfg.name.clone(),
        perturbed: cfg.params.perturbation.is_some(),
        runs,
    })
}

/// Writes the per-run and aggregate batch tables into `out_dir`.
pub fn write_batch(report: &BatchReport, out_dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(out_dir)?;
    write_file(out_dir, artifacts::BATCH_RUNS_FILE, &report.runs_csv())?;
    write_file(
        out_dir,
        artifacts::BATCH_SUMMARY_FILE,
        &key_value_csv(&report.summary_rows()),
    )?;
    Ok(())
}

fn single_issue(path: &str, message: &str) -> RunError {
    RunError::Config(ConfigError::Invalid(vec![super::config::FieldIssue {
        path: path.into(),
        message: message.into(),
    }]))
}
