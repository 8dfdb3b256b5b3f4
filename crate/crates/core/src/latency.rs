//! Latency objective under the three bandwidth-sharing schemes.
//!
//! Every link is shared by all messages crossing it, in either direction.
//! A hop costs `size / (share * bandwidth)`; processing costs
//! `jobs_on_server * size / throughput`. Shares depend on the scheme:
//!
//! * fixed: every message gets the same fraction `epsilon` of the link;
//! * decoupled: uplinks split `sigma = 1 / (1 + beta)` of the link evenly,
//!   downlinks split the remaining `1 - sigma`;
//! * combined: all messages on the link split it evenly.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::assignment::{job_counts, Assignment, ElidRoute};
use crate::model::{LinkKey, NodeId, Role, Topology};

/// Objective comparisons treat values closer than this (seconds) as equal.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Fixed channel fraction per message (P1).
    Fixed { epsilon: f64 },
    /// Separate uplink/downlink pools (P2).
    Decoupled { sigma: f64 },
    /// One pool shared by uplink and downlink (P3).
    Combined,
}

impl Scheme {
    pub fn fixed(epsilon: f64) -> Result<Self, LatencyError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(LatencyError::InvalidScheme(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        Ok(Scheme::Fixed { epsilon })
    }

    /// Uplink pool fraction is `1 / (1 + beta)`.
    pub fn decoupled(beta: f64) -> Result<Self, LatencyError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(LatencyError::InvalidScheme(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        Ok(Scheme::Decoupled {
            sigma: 1.0 / (1.0 + beta),
        })
    }

    pub fn combined() -> Self {
        Scheme::Combined
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Fixed { .. } => "P1",
            Scheme::Decoupled { .. } => "P2",
            Scheme::Combined => "P3",
        }
    }

    /// Maximum number of messages one link can carry under the fixed scheme.
    pub fn channel_capacity(&self) -> Option<u32> {
        match *self {
            // the small slack keeps 1/0.1 from landing on 9.999...
            Scheme::Fixed { epsilon } => Some((1.0 / epsilon + 1e-9).floor() as u32),
            _ => None,
        }
    }

    /// Share of a link granted to one uplink message when the link carries
    /// `up` uplink and `down` downlink messages (the message itself included).
    pub fn uplink_share(&self, up: u32, down: u32) -> f64 {
        match *self {
            Scheme::Fixed { epsilon } => epsilon,
            Scheme::Decoupled { sigma } => sigma / f64::from(up),
            Scheme::Combined => 1.0 / f64::from(up + down),
        }
    }

    pub fn downlink_share(&self, up: u32, down: u32) -> f64 {
        match *self {
            Scheme::Fixed { epsilon } => epsilon,
            Scheme::Decoupled { sigma } => (1.0 - sigma) / f64::from(down),
            Scheme::Combined => 1.0 / f64::from(up + down),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Fixed { epsilon } => write!(f, "P1 (fixed, epsilon = {epsilon})"),
            Scheme::Decoupled { sigma } => write!(f, "P2 (decoupled, sigma = {sigma})"),
            Scheme::Combined => write!(f, "P3 (combined)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatencyError {
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("link {link} carries {messages} messages but the fixed channel supply is {capacity}")]
    ChannelSupplyExhausted {
        link: LinkKey,
        messages: u32,
        capacity: u32,
    },
    #[error("elid {elid}: edge {from}->{to} has no fiber link")]
    MissingLink {
        elid: NodeId,
        from: NodeId,
        to: NodeId,
    },
    #[error("elid {0} has no single processing server")]
    NoServer(NodeId),
    #[error("elid {elid} is processed at node {node}, which cannot process jobs")]
    NotAServer { elid: NodeId, node: NodeId },
    #[error("node {0} is not an elid of this topology")]
    UnknownElid(NodeId),
    #[error("topology has no cloud node")]
    NoCloud,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkShare {
    pub uplink_messages: u32,
    pub downlink_messages: u32,
    /// Fraction of the link each uplink message receives.
    pub uplink_share: f64,
    /// Fraction of the link each downlink message receives.
    pub downlink_share: f64,
}

impl LinkShare {
    pub fn allocated(&self) -> f64 {
        f64::from(self.uplink_messages) * self.uplink_share
            + f64::from(self.downlink_messages) * self.downlink_share
    }
}

fn message_counts<'a>(
    topology: &Topology,
    routes: impl Iterator<Item = (NodeId, &'a ElidRoute)>,
) -> Result<BTreeMap<LinkKey, (u32, u32)>, LatencyError> {
    let mut counts: BTreeMap<LinkKey, (u32, u32)> = BTreeMap::new();
    for (elid, route) in routes {
        for (edges, downlink) in [(&route.uplink, false), (&route.downlink, true)] {
            for &(from, to) in edges {
                if topology.link(from, to).is_none() {
                    return Err(LatencyError::MissingLink { elid, from, to });
                }
                let entry = counts.entry(LinkKey::new(from, to)).or_insert((0, 0));
                if downlink {
                    entry.1 += 1;
                } else {
                    entry.0 += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Per-message bandwidth shares on every link that carries traffic.
pub fn link_shares(
    topology: &Topology,
    assignment: &Assignment,
    scheme: &Scheme,
) -> Result<BTreeMap<LinkKey, LinkShare>, LatencyError> {
    let counts = message_counts(topology, assignment.routes().iter().map(|(&e, r)| (e, r)))?;
    let capacity = scheme.channel_capacity();
    counts
        .into_iter()
        .map(|(key, (up, down))| {
            if let Some(capacity) = capacity {
                if up + down > capacity {
                    return Err(LatencyError::ChannelSupplyExhausted {
                        link: key,
                        messages: up + down,
                        capacity,
                    });
                }
            }
            Ok((
                key,
                LinkShare {
                    uplink_messages: up,
                    downlink_messages: down,
                    uplink_share: scheme.uplink_share(up, down),
                    downlink_share: scheme.downlink_share(up, down),
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElidLatency {
    pub server: NodeId,
    pub uplink: f64,
    pub downlink: f64,
    pub processing: f64,
    pub total: f64,
}

/// Per-sensor latency decomposition plus the priority-weighted objective,
/// all in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyBreakdown {
    pub per_elid: BTreeMap<NodeId, ElidLatency>,
    pub objective: f64,
}

impl LatencyBreakdown {
    /// Unweighted mean of the per-sensor totals; zero when there are none.
    pub fn mean_latency(&self) -> f64 {
        if self.per_elid.is_empty() {
            return 0.0;
        }
        self.per_elid.values().map(|l| l.total).sum::<f64>() / self.per_elid.len() as f64
    }

    pub const CSV_HEADER: &'static str =
        "elid_id,uplink_s,downlink_s,processing_s,total_s,server_id";

    /// One row per sensor followed by an `objective` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for (elid, l) in &self.per_elid {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                elid, l.uplink, l.downlink, l.processing, l.total, l.server
            );
        }
        let _ = writeln!(out, "objective,,,,{},", self.objective);
        out
    }
}

/// Latency of every sensor and the weighted objective for a feasible
/// assignment. Bit-for-bit deterministic.
pub fn evaluate(
    topology: &Topology,
    assignment: &Assignment,
    scheme: &Scheme,
) -> Result<LatencyBreakdown, LatencyError> {
    let shares = link_shares(topology, assignment, scheme)?;
    let jobs = job_counts(assignment);
    let beta = topology.beta();

    let mut per_elid = BTreeMap::new();
    let mut objective = 0.0;
    for (&elid, route) in assignment.routes() {
        let params = topology.elid(elid).ok_or(LatencyError::UnknownElid(elid))?;
        let server = route.server().ok_or(LatencyError::NoServer(elid))?;
        let throughput = match topology.role(server) {
            Some(role) if role != Role::Elid => topology
                .server(server)
                .map(|p| p.throughput)
                .filter(|&w| w > 0.0),
            _ => None,
        }
        .ok_or(LatencyError::NotAServer { elid, node: server })?;

        let up_size = params.data_rate as f64;
        let down_size = beta * up_size;
        let hop = |from: NodeId, to: NodeId, size: f64, downlink: bool| {
            let share = &shares[&LinkKey::new(from, to)];
            let fraction = if downlink {
                share.downlink_share
            } else {
                share.uplink_share
            };
            let bandwidth = topology
                .link(from, to)
                .expect("checked in link_shares")
                .bandwidth;
            size / (fraction * bandwidth)
        };

        let uplink: f64 = route
            .uplink
            .iter()
            .map(|&(i, j)| hop(i, j, up_size, false))
            .sum();
        let downlink: f64 = route
            .downlink
            .iter()
            .map(|&(i, j)| hop(i, j, down_size, true))
            .sum();
        let y = f64::from(jobs.get(&server).copied().unwrap_or(0));
        let processing = y * up_size / throughput;
        let total = uplink + downlink + processing;
        objective += params.priority * total;
        per_elid.insert(
            elid,
            ElidLatency {
                server,
                uplink,
                downlink,
                processing,
                total,
            },
        );
    }
    Ok(LatencyBreakdown {
        per_elid,
        objective,
    })
}

/// Fraction of sensors processed in the cloud.
pub fn cloud_fraction(topology: &Topology, assignment: &Assignment) -> Result<f64, LatencyError> {
    cloud_fraction_weighted(topology, assignment, |_| 1.0)
}

/// Fraction of sensor data (weighted by data rate) processed in the cloud.
pub fn cloud_fraction_by_bytes(
    topology: &Topology,
    assignment: &Assignment,
) -> Result<f64, LatencyError> {
    cloud_fraction_weighted(topology, assignment, |e| {
        topology.elid(e).map_or(0.0, |p| p.data_rate as f64)
    })
}

fn cloud_fraction_weighted(
    topology: &Topology,
    assignment: &Assignment,
    weight: impl Fn(NodeId) -> f64,
) -> Result<f64, LatencyError> {
    if topology.cloud_ids().is_empty() {
        return Err(LatencyError::NoCloud);
    }
    let mut total = 0.0;
    let mut cloud = 0.0;
    for (&elid, route) in assignment.routes() {
        let w = weight(elid);
        total += w;
        if route
            .server()
            .and_then(|s| topology.role(s))
            .is_some_and(|r| r == Role::Cloud)
        {
            cloud += w;
        }
    }
    Ok(if total > 0.0 { cloud / total } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GIGABYTE, MEGABYTE};

    fn n(ids: &[u32]) -> Vec<NodeId> {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    fn route(up: &[u32], down: &[u32]) -> ElidRoute {
        ElidRoute::from_paths(&n(up), &n(down))
    }

    fn worked_example() -> (Topology, Assignment) {
        let t = Topology::builder()
            .elid(1, 100 * MEGABYTE)
            .mec(2, GIGABYTE, 0.25e9)
            .link(1, 2, 1e9)
            .beta(0.8)
            .build();
        let a = Assignment::new(BTreeMap::from([(NodeId(1), route(&[1, 2], &[2, 1]))]));
        (t, a)
    }

    #[test]
    fn combined_single_link_worked_example() {
        let (t, a) = worked_example();
        let b = evaluate(&t, &a, &Scheme::combined()).unwrap();
        let l = b.per_elid[&NodeId(1)];
        assert!((l.uplink - 0.2).abs() < 1e-12);
        assert!((l.downlink - 0.16).abs() < 1e-12);
        assert!((l.processing - 0.4).abs() < 1e-12);
        assert!((l.total - 0.76).abs() < 1e-12);
        assert!((b.objective - 0.76).abs() < 1e-12);
    }

    #[test]
    fn second_job_doubles_processing() {
        let t = Topology::builder()
            .elid(1, 100 * MEGABYTE)
            .elid(3, 100 * MEGABYTE)
            .mec(2, GIGABYTE, 0.25e9)
            .link(1, 2, 1e9)
            .link(3, 2, 1e9)
            .beta(0.8)
            .build();
        let a = Assignment::new(BTreeMap::from([
            (NodeId(1), route(&[1, 2], &[2, 1])),
            (NodeId(3), route(&[3, 2], &[2, 3])),
        ]));
        let b = evaluate(&t, &a, &Scheme::combined()).unwrap();
        assert!((b.per_elid[&NodeId(1)].processing - 0.8).abs() < 1e-12);
        assert!((b.per_elid[&NodeId(3)].processing - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_priorities_zero_objective() {
        let t = Topology::builder()
            .elid_with_priority(1, 100 * MEGABYTE, 0.0)
            .mec(2, GIGABYTE, 0.25e9)
            .link(1, 2, 1e9)
            .beta(0.8)
            .build();
        let a = Assignment::new(BTreeMap::from([(NodeId(1), route(&[1, 2], &[2, 1]))]));
        let b = evaluate(&t, &a, &Scheme::combined()).unwrap();
        assert_eq!(b.objective, 0.0);
        assert!(b.per_elid[&NodeId(1)].total > 0.0);
    }

    #[test]
    fn combined_share_is_half_for_round_trip() {
        let (t, a) = worked_example();
        let s = link_shares(&t, &a, &Scheme::combined()).unwrap();
        let share = s[&LinkKey::new(NodeId(1), NodeId(2))];
        assert_eq!(share.uplink_share, 0.5);
        assert_eq!(share.downlink_share, 0.5);
        assert_eq!(share.allocated(), 1.0);
    }

    fn star(uplinks: u32) -> (Topology, Assignment) {
        // `uplinks` sensors all pushing through router 100 to mec 101
        let mut b = Topology::builder()
            .router(100)
            .mec(101, 1000 * GIGABYTE, 1e9)
            .link(100, 101, 1e9)
            .beta(0.8);
        let mut routes = BTreeMap::new();
        for e in 1..=uplinks {
            b = b.elid(e, MEGABYTE).link(e, 100, 1e9);
            routes.insert(NodeId(e), route(&[e, 100, 101], &[101, 100, e]));
        }
        (b.build(), Assignment::new(routes))
    }

    #[test]
    fn decoupled_uplink_share() {
        let (t, a) = star(2);
        let scheme = Scheme::decoupled(0.8).unwrap();
        let Scheme::Decoupled { sigma } = scheme else {
            unreachable!()
        };
        assert!((sigma - 1.0 / 1.8).abs() < 1e-15);
        let s = link_shares(&t, &a, &scheme).unwrap();
        let trunk = s[&LinkKey::new(NodeId(100), NodeId(101))];
        assert_eq!(trunk.uplink_messages, 2);
        assert!((trunk.uplink_share - 0.277_777_777_777_777_8).abs() < 1e-12);
        assert!((trunk.allocated() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_channel_supply_is_enforced() {
        let scheme = Scheme::fixed(0.1).unwrap();
        assert_eq!(scheme.channel_capacity(), Some(10));

        // 11 uplink messages on one link
        let mut b = Topology::builder().mec(100, 1000 * GIGABYTE, 1e9).beta(1.0);
        let mut routes = BTreeMap::new();
        for e in 1..=11 {
            b = b.elid(e, MEGABYTE).link(e, 100, 1e9);
            routes.insert(
                NodeId(e),
                ElidRoute {
                    processing: vec![NodeId(100)],
                    uplink: vec![(NodeId(e), NodeId(100))],
                    downlink: vec![],
                },
            );
        }
        let t = b.link(200, 100, 1e9).router(200).build();
        // funnel: replace each uplink with one crossing the shared 200-100 link
        let funnel: BTreeMap<_, _> = routes
            .keys()
            .map(|&e| {
                (
                    e,
                    ElidRoute {
                        processing: vec![NodeId(100)],
                        uplink: vec![(NodeId(200), NodeId(100))],
                        downlink: vec![],
                    },
                )
            })
            .collect();
        let err = link_shares(&t, &Assignment::new(funnel), &scheme).unwrap_err();
        assert_eq!(
            err,
            LatencyError::ChannelSupplyExhausted {
                link: LinkKey::new(NodeId(100), NodeId(200)),
                messages: 11,
                capacity: 10
            }
        );
        assert!(link_shares(&t, &Assignment::new(routes), &scheme).is_ok());
    }

    #[test]
    fn invalid_schemes() {
        assert!(Scheme::fixed(0.0).is_err());
        assert!(Scheme::fixed(1.5).is_err());
        assert!(Scheme::decoupled(0.0).is_err());
        assert!(Scheme::decoupled(1.0).is_ok());
    }

    #[test]
    fn beta_one_equalises_pools() {
        let Scheme::Decoupled { sigma } = Scheme::decoupled(1.0).unwrap() else {
            unreachable!()
        };
        assert_eq!(sigma, 0.5);
    }

    #[test]
    fn cloud_fraction_counts() {
        let mut b = Topology::builder()
            .router(10)
            .mec(11, GIGABYTE, 1e9)
            .cloud(12, 100 * GIGABYTE, 1e10)
            .link(10, 11, 1e9)
            .link(10, 12, 1e9);
        for e in 1..=4 {
            b = b.elid(e, MEGABYTE).link(e, 10, 1e9);
        }
        let t = b.build();
        let assign = |cloud: &[u32]| {
            Assignment::new(
                (1..=4)
                    .map(|e| {
                        let s = if cloud.contains(&e) { 12 } else { 11 };
                        (NodeId(e), route(&[e, 10, s], &[s, 10, e]))
                    })
                    .collect(),
            )
        };
        assert_eq!(cloud_fraction(&t, &assign(&[])).unwrap(), 0.0);
        assert_eq!(cloud_fraction(&t, &assign(&[1, 2, 3, 4])).unwrap(), 1.0);
        assert_eq!(cloud_fraction(&t, &assign(&[3])).unwrap(), 0.25);
        assert_eq!(cloud_fraction_by_bytes(&t, &assign(&[3])).unwrap(), 0.25);

        let (no_cloud, a) = worked_example();
        assert_eq!(cloud_fraction(&no_cloud, &a), Err(LatencyError::NoCloud));
    }

    #[test]
    fn csv_layout() {
        let (t, a) = worked_example();
        let csv = evaluate(&t, &a, &Scheme::combined()).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], LatencyBreakdown::CSV_HEADER);
        assert!(lines[1].starts_with("1,0.2,0.16,0.4,"));
        assert!(lines[1].ends_with(",2"));
        assert!(lines[2].starts_with("objective,,,,"));
    }

    #[test]
    fn processing_at_router_is_rejected() {
        let t = Topology::builder()
            .elid(1, 10)
            .router(2)
            .link(1, 2, 1.0)
            .build();
        let a = Assignment::new(BTreeMap::from([(NodeId(1), route(&[1, 2], &[2, 1]))]));
        assert_eq!(
            evaluate(&t, &a, &Scheme::combined()),
            Err(LatencyError::NotAServer {
                elid: NodeId(1),
                node: NodeId(2)
            })
        );
    }
}
