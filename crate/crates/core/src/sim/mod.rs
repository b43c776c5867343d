//! Discrete Monte Carlo realization of the relay model.
//!
//! Nodes sit on a torus lattice. In each trial every node independently
//! decides whether to connect and to whom, routes greedily, and the regime's
//! rules decide between a direct transmission and a relayed one. Every
//! transmission of length `ℓ` charges `w` to the other nodes within `ℓ` of the
//! transmitter; per-node utilities are tallied by role and averaged.

mod engine;
mod lattice;
mod route;

pub use engine::{
    estimate_vs_analytic, lattice_expectation, per_node_outsider_means, run_instant,
    run_instant_traced, write_trace, Comparison, ConnectionEvent, RoleComparison, RoleEstimate,
    SimConfig, SimCounts, SimOutcome, TrialTotals,
};
pub use lattice::{Lattice, Offset};
pub use route::route_greedy;
