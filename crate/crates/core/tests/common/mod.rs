#![allow(dead_code)]

use pcosync::cli::load_preset;
use pcosync::prf::TWO_PI;
use pcosync::{Network, NetworkTopology, PhaseResponseFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coupling drawn uniformly from the open interval (0, 1).
pub fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let v: f64 = rng.gen_range(0.0..1.0);
        if v > 0.0 {
            return v;
        }
    }
}

pub fn random_phases<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..TWO_PI)).collect()
}

/// A random undirected chain: N in 2..=8, couplings in (0, 1), random
/// piecewise-linear delay-advance PRFs, uniform initial phases.
pub struct RandomChain {
    pub network: Network,
    pub x0: Vec<f64>,
}

pub fn random_chain(seed: u64) -> RandomChain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let coupling: Vec<f64> = (0..n).map(|_| open_unit(&mut rng)).collect();
    let prfs = (0..n)
        .map(|_| {
            let knots = rng.gen_range(1..=6);
            PhaseResponseFunction::random_piecewise_linear(&mut rng, knots)
        })
        .collect();
    let x0 = random_phases(&mut rng, n);
    let topo = NetworkTopology::undirected_chain(&coupling).unwrap();
    RandomChain {
        network: Network::new(topo, prfs).unwrap(),
        x0,
    }
}

pub fn preset_network(name: &str) -> Network {
    load_preset(name).unwrap().network
}

/// Initial phases used for seed `seed` by presets and batches.
pub fn seeded_phases(n: usize, seed: u64) -> Vec<f64> {
    pcosync::cli::config::random_phases(n, seed)
}
