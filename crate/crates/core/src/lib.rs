//! Latency-minimizing routing and server assignment for elevated-LiDAR
//! backhaul networks.
//!
//! Sensors stream scans over a fiber backhaul to edge (MEC) or cloud
//! servers and receive processed maps back. Given the network, the crate
//! chooses for every sensor a processing server plus an uplink and downlink
//! path so that the priority-weighted sum of transmission and processing
//! latency is minimal, under one of three bandwidth-sharing schemes.
//!
//! * [`model`] and [`assignment`]: the network and decision variables, with
//!   structural and constraint checks;
//! * [`scan`]: octree scan sizes and sensor data rates;
//! * [`latency`]: objective evaluation;
//! * [`solver`]: exact branch-and-bound, exhaustive oracle, local search;
//! * [`experiments`]: parameter sweeps and CSV output;
//! * [`topology_file`]: the JSON topology format.

pub mod assignment;
pub mod experiments;
pub mod fixtures;
pub mod latency;
pub mod model;
pub mod paths;
pub mod scan;
pub mod solver;
pub mod topology_file;

pub use assignment::{
    check_assignment, job_counts, Assignment, ConstraintFamily, ConstraintViolation, ElidRoute,
    StructuralError,
};
pub use latency::{
    cloud_fraction, cloud_fraction_by_bytes, evaluate, link_shares, ElidLatency, LatencyBreakdown,
    LatencyError, LinkShare, Scheme, OBJECTIVE_TOLERANCE,
};
pub use model::{
    validate_topology, ElidParams, Link, LinkKey, Node, NodeId, Role, ServerParams, Topology,
    TopologyRule, TopologyViolation, GIGABYTE, MEGABYTE,
};
pub use scan::{data_rate, downlink_size, octree_bytes_per_m3, ScanError, ScanProfile};
pub use solver::{
    solve_exact, solve_heuristic, solve_oracle, Budget, SolveReport, SolveStatus, SolverError,
    SolverStats, Witness, WitnessKind,
};
pub use topology_file::{parse_topology, read_topology, topology_to_json, TopologyFileError};
