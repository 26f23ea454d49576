//! CSV artifacts. Floats use `{:.16e}`, rows end in `\n`, one header line.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::Trajectory;
use crate::metrics::{chain_lyapunov, containing_arc, deltas, lyapunov_l, MetricsError};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const FIRINGS_FILE: &str = "firings.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CHAINS_FILE: &str = "chains.csv";
pub const BATCH_RUNS_FILE: &str = "batch_runs.csv";
pub const BATCH_SUMMARY_FILE: &str = "batch_summary.csv";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_csv(traj: &Trajectory) -> Result<String, MetricsError> {
    let n = traj.n();
    let mut out = String::from("t,j");
    for k in 1..=n {
        write!(out, ",x{k}").unwrap();
    }
    for k in 1..=n {
        write!(out, ",delta{k}").unwrap();
    }
    out.push_str(",L,Vc\n");
    for s in &traj.samples {
        write!(out, "{},{}", fmt_f64(s.t), s.j).unwrap();
        for &x in &s.x {
            write!(out, ",{}", fmt_f64(x)).unwrap();
        }
        for d in deltas(&s.x)? {
            write!(out, ",{}", fmt_f64(d)).unwrap();
        }
        writeln!(
            out,
            ",{},{}",
            fmt_f64(lyapunov_l(&s.x)?),
            fmt_f64(containing_arc(&s.x)?)
        )
        .unwrap();
    }
    Ok(out)
}

pub fn firings_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,j,node\n");
    for f in &traj.firings {
        writeln!(out, "{},{},{}", fmt_f64(f.t), f.j, f.node).unwrap();
    }
    out
}

/// Per-chain `L` for every sample of a tree run.
pub fn chains_csv(traj: &Trajectory, chains: &[Vec<usize>]) -> Result<String, MetricsError> {
    let mut out = String::from("t,j");
    for k in 1..=chains.len() {
        write!(out, ",L_chain{k}").unwrap();
    }
    out.push('\n');
    for s in &traj.samples {
        write!(out, "{},{}", fmt_f64(s.t), s.j).unwrap();
        for c in chains {
            write!(out, ",{}", fmt_f64(chain_lyapunov(&s.x, c)?)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Two-column `key,value` table.
pub fn key_value_csv(rows: &[(String, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        writeln!(out, "{k},{v}").unwrap();
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::write(dir.join(name), contents)
}

/// A parsed CSV file: header names and rows of raw fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Table {
        let mut lines = text.lines();
        let header = lines
            .next()
            .map(|h| h.split(',').map(str::to_string).collect())
            .unwrap_or_default();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Table { header, rows }
    }

    pub fn read(path: &Path) -> std::io::Result<Table> {
        Ok(Table::parse(&std::fs::read_to_string(path)?))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Value of `key` in a `key,value` table.
    pub fn lookup(&self, key: &str) -> Option<&str> {
        self.rows
            .iter()
            .find(|r| r.first().map(String::as_str) == Some(key))
            .and_then(|r| r.get(1))
            .map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, Network, SimulationParams};
    use crate::prf::{builtin_prf, BuiltinPrfId};
    use crate::topology::NetworkTopology;

    #[test]
    fn trajectory_table_layout() {
        let topo = NetworkTopology::undirected_chain(&[0.5, 0.5]).unwrap();
        let net = Network::new(topo, vec![builtin_prf(BuiltinPrfId::A); 2]).unwrap();
        let params = SimulationParams {
            t_end: 3.0,
            ..SimulationParams::default()
        };
        let traj = simulate(&[1.0, 4.0], &net, &params).unwrap();
        let text = trajectory_csv(&traj).unwrap();
        assert!(!text.contains('\r'));
        let table = Table::parse(&text);
        assert_eq!(
            table.header,
            ["t", "j", "x1", "x2", "delta1", "delta2", "L", "Vc"]
        );
        assert_eq!(table.rows.len(), traj.samples.len());
        assert_eq!(table.rows[0][0], "0.0000000000000000e0");
        assert_eq!(table.rows[0][2], fmt_f64(1.0));
        let firings = Table::parse(&firings_csv(&traj));
        assert_eq!(firings.header, ["t", "j", "node"]);
        assert_eq!(firings.rows.len(), traj.firings.len());
    }

    #[test]
    fn key_value_lookup() {
        let t = Table::parse(&key_value_csv(&[("a".into(), "1".into())]));
        assert_eq!(t.lookup("a"), Some("1"));
        assert_eq!(t.lookup("b"), None);
    }
}
