//! Minimum-latency routing and server assignment.
//!
//! Three entry points share one report type:
//!
//! * [`solve_exact`]: branch-and-bound, optionally over several worker
//!   threads, with a certified optimum when it finishes within budget;
//! * [`solve_oracle`]: exhaustive enumeration for small instances, used to
//!   certify the exact solver;
//! * [`solve_heuristic`]: greedy construction plus local search.
//!
//! Among assignments whose objectives lie within [`OBJECTIVE_TOLERANCE`] of
//! the optimum, every solver returns the one with the smallest
//! [`Assignment::encoding`], so results do not depend on worker count or
//! exploration order.

mod exact;
mod heuristic;
mod instance;
mod oracle;

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::assignment::{Assignment, ConstraintFamily, ElidRoute};
use crate::latency::{evaluate, LatencyBreakdown, LatencyError, Scheme, OBJECTIVE_TOLERANCE};
use crate::model::{NodeId, Topology};

pub use oracle::{MAX_ORACLE_ELIDS, MAX_ORACLE_NODES};

use instance::{Choice, Instance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("oracle refuses instances above {MAX_ORACLE_NODES} nodes or {MAX_ORACLE_ELIDS} elids (got {nodes} nodes, {elids} elids)")]
    OracleRefused { nodes: usize, elids: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("fixed route for elid {0} is not a simple-path route of this topology")]
    UnknownRoute(NodeId),
    #[error(transparent)]
    Latency(#[from] LatencyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    FeasibleHeuristic,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleHeuristic => "feasible_heuristic",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What blocks feasibility.
#[derive(Debug, Clone, PartialEq)]
pub enum WitnessKind {
    Constraint(ConstraintFamily),
    /// Fixed-fraction channels run out on every route.
    ChannelSupply,
    /// The budget ran out before any feasible assignment was found; nothing
    /// is proven.
    Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub kind: WitnessKind,
    pub detail: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            WitnessKind::Constraint(c) => write!(f, "{c}: {}", self.detail),
            WitnessKind::ChannelSupply => write!(f, "channel supply: {}", self.detail),
            WitnessKind::Budget => write!(f, "budget: {}", self.detail),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    /// Search nodes for the exact solver, enumerated assignments for the
    /// oracle, zero for the heuristic.
    pub nodes_explored: u64,
    pub elapsed: Duration,
    /// The status is certified: optimality for `optimal`, impossibility
    /// for `infeasible`.
    pub proven: bool,
    /// Successive incumbent objectives of the exact search.
    pub incumbent_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub scheme: Scheme,
    /// Empty when infeasible.
    pub assignment: Assignment,
    pub breakdown: Option<LatencyBreakdown>,
    pub witness: Option<Witness>,
    pub stats: SolverStats,
}

impl SolveReport {
    pub fn objective(&self) -> Option<f64> {
        self.breakdown.as_ref().map(|b| b.objective)
    }

    pub fn mean_latency(&self) -> Option<f64> {
        self.breakdown.as_ref().map(LatencyBreakdown::mean_latency)
    }

    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }

    /// JSON document with paths as node-id sequences and the latency
    /// breakdown as embedded CSV. Timing and search statistics are only
    /// included on request since they vary between runs.
    pub fn to_json(&self, include_stats: bool) -> Value {
        let scheme = match self.scheme {
            Scheme::Fixed { epsilon } => json!({"name": "P1", "epsilon": epsilon}),
            Scheme::Decoupled { sigma } => json!({"name": "P2", "sigma": sigma}),
            Scheme::Combined => json!({"name": "P3"}),
        };
        let assignment: Vec<Value> = self
            .assignment
            .routes()
            .iter()
            .map(|(&elid, route)| {
                let ids = |p: Option<Vec<NodeId>>| -> Value {
                    p.map_or(Value::Null, |p| {
                        json!(p.iter().map(|n| n.0).collect::<Vec<_>>())
                    })
                };
                json!({
                    "elid": elid.0,
                    "server": route.server().map(|s| s.0),
                    "uplink": ids(route.uplink_path(elid)),
                    "downlink": ids(route.downlink_path()),
                })
            })
            .collect();
        let mut doc = json!({
            "status": self.status.as_str(),
            "scheme": scheme,
            "objective_s": self.objective(),
            "mean_latency_s": self.mean_latency(),
            "assignment": assignment,
            "latency_csv": self.breakdown.as_ref().map(LatencyBreakdown::to_csv),
            "witness": self.witness.as_ref().map(ToString::to_string),
        });
        if include_stats {
            doc["stats"] = json!({
                "nodes_explored": self.stats.nodes_explored,
                "elapsed_ms": self.stats.elapsed.as_secs_f64() * 1e3,
                "proven": self.stats.proven,
                "incumbent_trace": self.stats.incumbent_trace,
            });
        }
        doc
    }
}

#[derive(Debug, Clone)]
pub struct Budget {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    pub workers: usize,
    /// Longest path considered, in hops. Defaults to the node count.
    pub hop_limit: Option<usize>,
    /// Seed for the heuristic that provides the first incumbent.
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            node_limit: None,
            time_limit: None,
            workers: 1,
            hop_limit: None,
            seed: 0,
        }
    }
}

fn infeasible(scheme: Scheme, witness: Witness, stats: SolverStats) -> SolveReport {
    SolveReport {
        status: SolveStatus::Infeasible,
        scheme,
        assignment: Assignment::default(),
        breakdown: None,
        witness: Some(witness),
        stats,
    }
}

/// Infeasibility that is visible without search.
fn precheck(topology: &Topology, inst: &Instance) -> Option<Witness> {
    for (info, id) in inst
        .elids
        .iter()
        .map(|info| (info, inst.node_ids[info.node]))
    {
        if info.options.is_empty() {
            return Some(Witness {
                kind: WitnessKind::Constraint(ConstraintFamily::Processing),
                detail: format!("elid {id} reaches no server with RAM for {} B", info.rate),
            });
        }
    }
    let demand: u64 = inst.elids.iter().map(|e| e.rate).sum();
    let supply: u64 = topology
        .server_params()
        .iter()
        .filter(|(id, _)| topology.role(**id).is_some_and(|r| r.can_process()))
        .map(|(_, p)| p.ram)
        .sum();
    if demand > supply {
        return Some(Witness {
            kind: WitnessKind::Constraint(ConstraintFamily::Ram),
            detail: format!("aggregate demand {demand} B exceeds total server RAM {supply} B"),
        });
    }
    None
}

/// Pick the reported solution among near-optimal dense candidates.
fn select(
    topology: &Topology,
    inst: &Instance,
    scheme: &Scheme,
    candidates: Vec<(f64, Vec<Choice>)>,
) -> Result<Option<(Assignment, LatencyBreakdown)>, SolverError> {
    let mut scored = Vec::with_capacity(candidates.len());
    for (_, choices) in candidates {
        let assignment = inst.assignment(&choices);
        let breakdown = evaluate(topology, &assignment, scheme)?;
        scored.push((assignment, breakdown));
    }
    let Some(best) = scored
        .iter()
        .map(|(_, b)| b.objective)
        .min_by(f64::total_cmp)
    else {
        return Ok(None);
    };
    Ok(scored
        .into_iter()
        .filter(|(_, b)| b.objective <= best + OBJECTIVE_TOLERANCE)
        .min_by(|a, b| a.0.encoding().cmp(&b.0.encoding())))
}

/// Branch-and-bound. Status `optimal` when the search completes within
/// budget; otherwise the best assignment found so far as
/// `feasible_heuristic`.
pub fn solve_exact(
    topology: &Topology,
    scheme: &Scheme,
    budget: &Budget,
) -> Result<SolveReport, SolverError> {
    let started = Instant::now();
    let inst = Instance::build(topology, *scheme, budget.hop_limit)?;
    if let Some(w) = precheck(topology, &inst) {
        let stats = SolverStats {
            proven: true,
            elapsed: started.elapsed(),
            ..Default::default()
        };
        return Ok(infeasible(*scheme, w, stats));
    }

    let shared = exact::Shared::new(budget.node_limit, budget.time_limit.map(|t| started + t));
    let seed = heuristic::search(&inst, budget.seed);
    let candidates = exact::run(&inst, &shared, seed, budget.workers.max(1));
    let truncated = shared.truncated();
    let stats = SolverStats {
        nodes_explored: shared.nodes(),
        elapsed: started.elapsed(),
        proven: !truncated,
        incumbent_trace: shared.trace(),
    };

    match select(topology, &inst, scheme, candidates)? {
        Some((assignment, breakdown)) => Ok(SolveReport {
            status: if truncated {
                SolveStatus::FeasibleHeuristic
            } else {
                SolveStatus::Optimal
            },
            scheme: *scheme,
            assignment,
            breakdown: Some(breakdown),
            witness: None,
            stats,
        }),
        None => {
            let witness = if truncated {
                Witness {
                    kind: WitnessKind::Budget,
                    detail: "search stopped before finding a feasible assignment".into(),
                }
            } else if let Some(cap) = scheme.channel_capacity() {
                Witness {
                    kind: WitnessKind::ChannelSupply,
                    detail: format!(
                        "no routing keeps every link within {cap} fixed-fraction channels"
                    ),
                }
            } else {
                Witness {
                    kind: WitnessKind::Constraint(ConstraintFamily::Ram),
                    detail: "no packing of elids onto reachable servers fits their RAM".into(),
                }
            };
            Ok(infeasible(*scheme, witness, stats))
        }
    }
}

/// Exhaustive enumeration. Refuses instances above the guard rails.
pub fn solve_oracle(topology: &Topology, scheme: &Scheme) -> Result<SolveReport, SolverError> {
    let started = Instant::now();
    let result = oracle::enumerate(topology, scheme, &BTreeMap::new())?;
    let stats = SolverStats {
        nodes_explored: result.enumerated,
        elapsed: started.elapsed(),
        proven: true,
        incumbent_trace: Vec::new(),
    };
    Ok(match result.best {
        Some((assignment, breakdown)) => SolveReport {
            status: SolveStatus::Optimal,
            scheme: *scheme,
            assignment,
            breakdown: Some(breakdown),
            witness: None,
            stats,
        },
        None => infeasible(
            *scheme,
            Witness {
                kind: WitnessKind::Constraint(ConstraintFamily::Processing),
                detail: "no enumerated assignment satisfies every constraint".into(),
            },
            stats,
        ),
    })
}

/// Best objective over assignments that keep `fixed` routes for the given
/// sensors, by enumeration. `None` when no completion is feasible.
pub fn oracle_best_completion(
    topology: &Topology,
    scheme: &Scheme,
    fixed: &BTreeMap<NodeId, ElidRoute>,
) -> Result<Option<f64>, SolverError> {
    let result = oracle::enumerate(topology, scheme, fixed)?;
    Ok(result.best.map(|(_, b)| b.objective))
}

/// The branch-and-bound lower bound at the search node where the first
/// sensors (in id order) are fixed to `prefix` and the rest are open.
pub fn search_lower_bound(
    topology: &Topology,
    scheme: &Scheme,
    prefix: &[ElidRoute],
) -> Result<f64, SolverError> {
    let inst = Instance::build(topology, *scheme, None)?;
    let mut choices = Vec::with_capacity(prefix.len());
    for (e, route) in prefix.iter().enumerate() {
        let elid = inst.node_ids[inst.elids[e].node];
        choices.push(
            inst.choice_for(e, route)
                .ok_or(SolverError::UnknownRoute(elid))?,
        );
    }
    let shared = exact::Shared::new(None, None);
    let mut search = exact::Search::new(&inst, &shared);
    search.fix_prefix(&choices);
    Ok(search.bound())
}

/// Greedy construction and local search; never claims optimality.
pub fn solve_heuristic(
    topology: &Topology,
    scheme: &Scheme,
    seed: u64,
) -> Result<SolveReport, SolverError> {
    solve_heuristic_with(topology, scheme, seed, None)
}

pub fn solve_heuristic_with(
    topology: &Topology,
    scheme: &Scheme,
    seed: u64,
    hop_limit: Option<usize>,
) -> Result<SolveReport, SolverError> {
    let started = Instant::now();
    let inst = Instance::build(topology, *scheme, hop_limit)?;
    if let Some(w) = precheck(topology, &inst) {
        let stats = SolverStats {
            proven: true,
            elapsed: started.elapsed(),
            ..Default::default()
        };
        return Ok(infeasible(*scheme, w, stats));
    }
    let stats = |proven| SolverStats {
        elapsed: started.elapsed(),
        proven,
        ..Default::default()
    };
    match heuristic::search(&inst, seed) {
        Some((choices, _)) => {
            let assignment = inst.assignment(&choices);
            let breakdown = evaluate(topology, &assignment, scheme)?;
            Ok(SolveReport {
                status: SolveStatus::FeasibleHeuristic,
                scheme: *scheme,
                assignment,
                breakdown: Some(breakdown),
                witness: None,
                stats: stats(false),
            })
        }
        None => Ok(infeasible(
            *scheme,
            Witness {
                kind: WitnessKind::Budget,
                detail: "greedy construction found no feasible assignment".into(),
            },
            stats(false),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::check_assignment;
    use crate::model::{GIGABYTE, MEGABYTE};

    fn worked_example() -> Topology {
        Topology::builder()
            .elid(1, 100 * MEGABYTE)
            .mec(2, GIGABYTE, 0.25e9)
            .link(1, 2, 1e9)
            .beta(0.8)
            .build()
    }

    #[test]
    fn single_link_instance() {
        let t = worked_example();
        let exact = solve_exact(&t, &Scheme::combined(), &Budget::default()).unwrap();
        assert_eq!(exact.status, SolveStatus::Optimal);
        assert!((exact.objective().unwrap() - 0.76).abs() < 1e-12);
        let oracle = solve_oracle(&t, &Scheme::combined()).unwrap();
        assert_eq!(oracle.stats.nodes_explored, 1);
        assert_eq!(oracle.assignment, exact.assignment);
        let heuristic = solve_heuristic(&t, &Scheme::combined(), 3).unwrap();
        assert_eq!(heuristic.status, SolveStatus::FeasibleHeuristic);
        assert_eq!(heuristic.assignment, exact.assignment);
    }

    #[test]
    fn no_elids_is_trivially_optimal() {
        let t = Topology::builder().mec(1, 10, 1.0).build();
        let oracle = solve_oracle(&t, &Scheme::combined()).unwrap();
        assert_eq!(oracle.status, SolveStatus::Optimal);
        assert!(oracle.assignment.is_empty());
        assert_eq!(oracle.objective(), Some(0.0));
        let exact = solve_exact(&t, &Scheme::combined(), &Budget::default()).unwrap();
        assert_eq!(exact.objective(), Some(0.0));
    }

    #[test]
    fn zero_ram_everywhere_is_infeasible() {
        let t = Topology::builder()
            .elid(1, 10)
            .router(2)
            .mec(3, 0, 1.0)
            .cloud(4, 0, 1.0)
            .link(1, 2, 1.0)
            .link(2, 3, 1.0)
            .link(2, 4, 1.0)
            .build();
        let r = solve_exact(&t, &Scheme::combined(), &Budget::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(
            r.witness.unwrap().kind,
            WitnessKind::Constraint(ConstraintFamily::Processing)
        );
        assert!(r.stats.proven);
    }

    #[test]
    fn aggregate_ram_shortfall() {
        let t = Topology::builder()
            .elid(1, 10)
            .elid(2, 10)
            .mec(3, 15, 1.0)
            .link(1, 3, 1.0)
            .link(2, 3, 1.0)
            .build();
        let r = solve_exact(&t, &Scheme::combined(), &Budget::default()).unwrap();
        assert_eq!(
            r.witness.unwrap().kind,
            WitnessKind::Constraint(ConstraintFamily::Ram)
        );
    }

    #[test]
    fn channel_supply_exhausted_everywhere() {
        // epsilon 0.6 allows one message per link; uplink and downlink of the
        // only sensor must share its single access link
        let t = worked_example();
        let r = solve_exact(&t, &Scheme::fixed(0.6).unwrap(), &Budget::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.witness.unwrap().kind, WitnessKind::ChannelSupply);
    }

    /// Two sensors behind one router; the MEC holds only one of them.
    fn offload_instance(rates: (u64, u64)) -> Topology {
        Topology::builder()
            .elid(1, rates.0)
            .elid(2, rates.1)
            .router(3)
            .mec(4, 150 * MEGABYTE, 1e9)
            .cloud(5, 256 * GIGABYTE, 55e9)
            .link(1, 3, 1e9)
            .link(2, 3, 1e9)
            .link(3, 4, 5e9)
            .link(4, 5, 1e9)
            .beta(0.8)
            .build()
    }

    #[test]
    fn exactly_one_sensor_offloaded() {
        let t = offload_instance((100 * MEGABYTE, 100 * MEGABYTE));
        let scheme = Scheme::combined();
        let r = solve_exact(&t, &scheme, &Budget::default()).unwrap();
        let servers: Vec<u32> = r
            .assignment
            .routes()
            .values()
            .map(|route| route.server().unwrap().0)
            .collect();
        assert_eq!(servers.iter().filter(|&&s| s == 5).count(), 1);
        assert_eq!(servers.iter().filter(|&&s| s == 4).count(), 1);

        // brute force over the two feasible splits
        let split = |mec: u32| {
            let path = |e: u32, s: u32| -> (Vec<NodeId>, Vec<NodeId>) {
                let up: Vec<NodeId> = if s == 4 {
                    vec![e, 3, 4]
                } else {
                    vec![e, 3, 4, 5]
                }
                .into_iter()
                .map(NodeId)
                .collect();
                let mut down = up.clone();
                down.reverse();
                (up, down)
            };
            let routes = [1, 2]
                .into_iter()
                .map(|e| {
                    let (u, d) = path(e, if e == mec { 4 } else { 5 });
                    (NodeId(e), ElidRoute::from_paths(&u, &d))
                })
                .collect();
            let a = Assignment::new(routes);
            assert!(check_assignment(&t, &a).unwrap().is_empty());
            evaluate(&t, &a, &scheme).unwrap().objective
        };
        let (first, second) = (split(1), split(2));
        let expected_mec = if (first - second).abs() <= OBJECTIVE_TOLERANCE || first < second {
            1
        } else {
            2
        };
        assert_eq!(
            r.assignment.route(NodeId(expected_mec)).unwrap().server(),
            Some(NodeId(4))
        );
        assert!((r.objective().unwrap() - first.min(second)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_tie_breaks_lexicographically() {
        // two identical routers between the sensor and the MEC
        let t = Topology::builder()
            .elid(1, 10 * MEGABYTE)
            .router(2)
            .router(3)
            .mec(4, GIGABYTE, 1e9)
            .link(1, 2, 1e9)
            .link(1, 3, 1e9)
            .link(2, 4, 1e9)
            .link(3, 4, 1e9)
            .beta(0.5)
            .build();
        let scheme = Scheme::combined();
        let r = solve_exact(&t, &scheme, &Budget::default()).unwrap();
        let route = r.assignment.route(NodeId(1)).unwrap();
        assert_eq!(
            route.uplink_path(NodeId(1)).unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(4)]
        );
        // splitting directions is strictly cheaper than sharing router 2
        assert_eq!(
            route.downlink_path().unwrap(),
            vec![NodeId(4), NodeId(3), NodeId(1)]
        );
        let o = solve_oracle(&t, &scheme).unwrap();
        assert_eq!(o.assignment, r.assignment);
    }

    #[test]
    fn oracle_guard_rails() {
        let mut b = Topology::builder().mec(100, GIGABYTE, 1e9);
        for e in 1..=6 {
            b = b.elid(e, 1).link(e, 100, 1.0);
        }
        assert!(matches!(
            solve_oracle(&b.build(), &Scheme::combined()),
            Err(SolverError::OracleRefused { elids: 6, .. })
        ));
    }

    #[test]
    fn node_limit_truncates() {
        let t = offload_instance((100 * MEGABYTE, 100 * MEGABYTE));
        let budget = Budget {
            node_limit: Some(1),
            ..Budget::default()
        };
        let r = solve_exact(&t, &Scheme::combined(), &budget).unwrap();
        // the heuristic incumbent survives truncation
        assert_eq!(r.status, SolveStatus::FeasibleHeuristic);
        assert!(!r.stats.proven);
    }

    #[test]
    fn report_json_shape() {
        let t = worked_example();
        let r = solve_exact(&t, &Scheme::combined(), &Budget::default()).unwrap();
        let doc = r.to_json(false);
        assert_eq!(doc["status"], "optimal");
        assert_eq!(doc["scheme"]["name"], "P3");
        assert_eq!(doc["assignment"][0]["uplink"], json!([1, 2]));
        assert_eq!(doc["assignment"][0]["downlink"], json!([2, 1]));
        assert!(doc["latency_csv"].as_str().unwrap().starts_with("elid_id,"));
        assert!(doc.get("stats").is_none());
        assert!(r.to_json(true).get("stats").is_some());
    }
}
