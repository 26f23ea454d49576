//! Simulation and verification of pulse-coupled oscillator networks on chain
//! and directed-tree graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`prf`]: delay-advance phase response functions and the built-in curves.
//! * [`topology`]: interaction graphs and tree-to-chain decomposition.
//! * [`engine`]: the event-driven hybrid simulator.
//! * [`metrics`]: synchronization measures and trajectory property checks.
//! * [`cli`]: run configs, presets, CSV artifacts and batch sweeps.

pub mod cli;
pub mod engine;
pub mod metrics;
pub mod prf;
pub mod topology;

pub use engine::{
    fire, flow, next_event_time, process_jump_set, simulate, FiringEvent, HybridState, Network,
    Perturbation, RecordMode, SimulationParams, Trajectory,
};
pub use prf::{builtin_prf, prf_eval, validate_prf, BuiltinPrfId, PhaseResponseFunction, PiSelection};
pub use topology::{NetworkTopology, TopologyKind};
