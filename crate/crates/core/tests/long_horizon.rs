mod common;

use pcosync::metrics::{longest_nonzero_plateau, lyapunov_l, max_firing_gap, SYNC_THRESHOLD};
use pcosync::{simulate, SimulationParams, Trajectory};

const PLATEAU_TOL: f64 = 1e-12;
const LATE_SLACK: f64 = 1e-3;

fn run(network: &pcosync::Network, x0: &[f64], periods: f64) -> Trajectory {
    let params = SimulationParams {
        t_end: periods,
        ..SimulationParams::default()
    };
    simulate(x0, network, &params).unwrap()
}

fn final_l(traj: &Trajectory) -> f64 {
    lyapunov_l(&traj.final_state().x).unwrap()
}

/// Longest nonzero `L` plateau among samples recorded at `t >= from`.
fn late_plateau(traj: &Trajectory, from: f64) -> f64 {
    let tail = Trajectory {
        samples: traj.samples.iter().filter(|s| s.t >= from).cloned().collect(),
        firings: Vec::new(),
        record_mode: traj.record_mode,
        t_end: traj.t_end,
    };
    longest_nonzero_plateau(&tail, PLATEAU_TOL)
}

#[test]
fn l_never_stalls_at_a_nonzero_value() {
    let chain6 = common::preset_network("chain6");
    let mut cases: Vec<(pcosync::Network, Vec<f64>)> = (0..30)
        .map(|s| (chain6.clone(), common::seeded_phases(6, s)))
        .collect();
    cases.extend((0..10).map(|s| {
        let c = common::random_chain(500 + s);
        (c.network, c.x0)
    }));
    let horizons = [50.0, 100.0, 200.0, 400.0];
    let mut worst_late = vec![0.0f64; horizons.len()];
    for (k, (net, x0)) in cases.iter().enumerate() {
        let trajs: Vec<Trajectory> = horizons.iter().map(|&h| run(net, x0, h)).collect();
        for (h, traj) in trajs.iter().enumerate() {
            let whole = longest_nonzero_plateau(traj, PLATEAU_TOL);
            assert!(whole < 0.5 * traj.t_end, "case {k}: plateau {whole}");
            worst_late[h] = worst_late[h].max(late_plateau(traj, 0.5 * traj.t_end));
        }
        for w in trajs.windows(2) {
            if final_l(&w[0]) > SYNC_THRESHOLD {
                assert!(final_l(&w[1]) < final_l(&w[0]), "case {k}");
            }
        }
    }
    // Free flow between two bursts already keeps L fixed for up to one
    // period, so late plateaus settle near one period and must not grow.
    for w in worst_late.windows(2) {
        assert!(w[1] <= w[0] + LATE_SLACK, "late plateaus grew: {worst_late:?}");
    }
    assert!(worst_late[3] <= 1.0 + LATE_SLACK, "{worst_late:?}");
}

#[test]
fn second_and_penultimate_oscillators_keep_firing() {
    let chain6 = common::preset_network("chain6");
    for seed in 0..10 {
        let traj = run(&chain6, &common::seeded_phases(6, seed), 200.0);
        for node in [2, 5] {
            let gap = max_firing_gap(&traj, node);
            assert!(gap <= 3.0, "seed {seed} node {node}: gap {gap}");
        }
    }
    for seed in 0..20 {
        let c = common::random_chain(700 + seed);
        let n = c.network.n();
        let traj = run(&c.network, &c.x0, 200.0);
        for node in [2, n - 1] {
            if node == 0 {
                continue;
            }
            let gap = max_firing_gap(&traj, node);
            assert!(gap <= 3.0, "seed {seed} node {node}: gap {gap}");
        }
    }
}
