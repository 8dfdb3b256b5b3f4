//! Exhaustive enumeration of every assignment built from simple paths.
//!
//! Shares nothing with the branch-and-bound beyond the public model: paths
//! come from a breadth-first expansion over node ids, every leaf is checked
//! with [`check_assignment`] and scored with [`evaluate`].

use std::collections::{BTreeMap, VecDeque};

use crate::assignment::{check_assignment, Assignment, ElidRoute};
use crate::latency::{evaluate, LatencyBreakdown, Scheme, OBJECTIVE_TOLERANCE};
use crate::model::{NodeId, Role, Topology};

use super::SolverError;

pub const MAX_ORACLE_NODES: usize = 12;
pub const MAX_ORACLE_ELIDS: usize = 5;

/// Simple paths `from -> to` whose interior avoids sensors, by breadth-first
/// expansion of partial paths.
fn paths_bfs(topology: &Topology, from: NodeId, to: NodeId) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([vec![from]]);
    while let Some(path) = queue.pop_front() {
        let last = *path.last().unwrap();
        for next in topology.neighbours(last) {
            if path.contains(&next) {
                continue;
            }
            if next == to {
                let mut done = path.clone();
                done.push(next);
                out.push(done);
            } else if topology.role(next).is_some_and(|r| r != Role::Elid) {
                let mut longer = path.clone();
                longer.push(next);
                queue.push_back(longer);
            }
        }
    }
    out
}

fn check_guard_rails(topology: &Topology) -> Result<(), SolverError> {
    let nodes = topology.nodes().len();
    let elids = topology.elid_ids().len();
    if nodes > MAX_ORACLE_NODES || elids > MAX_ORACLE_ELIDS {
        return Err(SolverError::OracleRefused { nodes, elids });
    }
    Ok(())
}

/// Every (server, uplink, downlink) triple for one sensor.
fn routes_for(topology: &Topology, elid: NodeId) -> Vec<ElidRoute> {
    let mut out = Vec::new();
    for server in topology.server_ids() {
        if !topology.role(server).is_some_and(Role::can_process) {
            continue;
        }
        let ups = paths_bfs(topology, elid, server);
        let downs = paths_bfs(topology, server, elid);
        for up in &ups {
            for down in &downs {
                out.push(ElidRoute::from_paths(up, down));
            }
        }
    }
    out
}

pub(crate) struct OracleResult {
    pub best: Option<(Assignment, LatencyBreakdown)>,
    pub enumerated: u64,
}

/// Enumerate with some sensors pinned to given routes.
pub(crate) fn enumerate(
    topology: &Topology,
    scheme: &Scheme,
    fixed: &BTreeMap<NodeId, ElidRoute>,
) -> Result<OracleResult, SolverError> {
    check_guard_rails(topology)?;
    let elids = topology.elid_ids();
    let options: Vec<Vec<ElidRoute>> = elids
        .iter()
        .map(|&e| match fixed.get(&e) {
            Some(r) => vec![r.clone()],
            None => routes_for(topology, e),
        })
        .collect();

    let mut enumerated = 0u64;
    let mut feasible: Vec<(Assignment, LatencyBreakdown)> = Vec::new();
    let mut best_value = f64::INFINITY;

    if options.iter().any(Vec::is_empty) {
        return Ok(OracleResult {
            best: None,
            enumerated,
        });
    }

    let mut odometer = vec![0usize; elids.len()];
    loop {
        enumerated += 1;
        let routes: BTreeMap<NodeId, ElidRoute> = elids
            .iter()
            .zip(&odometer)
            .enumerate()
            .map(|(k, (&e, &i))| (e, options[k][i].clone()))
            .collect();
        let assignment = Assignment::new(routes);
        let valid = check_assignment(topology, &assignment).is_ok_and(|v| v.is_empty());
        if valid {
            if let Ok(breakdown) = evaluate(topology, &assignment, scheme) {
                if breakdown.objective <= best_value + OBJECTIVE_TOLERANCE {
                    best_value = best_value.min(breakdown.objective);
                    feasible.push((assignment, breakdown));
                    feasible.retain(|(_, b)| b.objective <= best_value + OBJECTIVE_TOLERANCE);
                }
            }
        }

        // advance the odometer; the last sensor varies fastest
        let mut k = elids.len();
        loop {
            if k == 0 {
                let best = feasible
                    .into_iter()
                    .min_by(|a, b| a.0.encoding().cmp(&b.0.encoding()));
                return Ok(OracleResult { best, enumerated });
            }
            k -= 1;
            odometer[k] += 1;
            if odometer[k] < options[k].len() {
                break;
            }
            odometer[k] = 0;
        }
    }
}
