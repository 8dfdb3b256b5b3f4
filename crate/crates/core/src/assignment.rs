//! Routing/processing decisions and the seven constraint families they must
//! satisfy.
//!
//! An [`ElidRoute`] stores the decision variables for one sensor in edge-set
//! form (uplink edges, downlink edges, processing nodes) rather than as node
//! paths. Solvers only ever produce simple paths, but the edge-set form is what
//! the constraints are written against and lets every constraint family be
//! violated in isolation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{NodeId, Role, Topology};

pub type Edge = (NodeId, NodeId);

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ElidRoute {
    /// Nodes flagged as processing this sensor's data; a valid route has
    /// exactly one.
    pub processing: Vec<NodeId>,
    pub uplink: Vec<Edge>,
    pub downlink: Vec<Edge>,
}

impl ElidRoute {
    /// Route from node sequences. The uplink path must end at the processing
    /// server and the downlink path start there.
    pub fn from_paths(uplink: &[NodeId], downlink: &[NodeId]) -> Self {
        ElidRoute {
            processing: uplink.last().copied().into_iter().collect(),
            uplink: path_edges(uplink),
            downlink: path_edges(downlink),
        }
    }

    pub fn server(&self) -> Option<NodeId> {
        match self.processing.as_slice() {
            [s] => Some(*s),
            _ => None,
        }
    }

    /// Uplink as a node sequence starting at `elid`, if the edges form one
    /// simple path.
    pub fn uplink_path(&self, elid: NodeId) -> Option<Vec<NodeId>> {
        edges_to_path(&self.uplink, elid)
    }

    /// Downlink as a node sequence starting at the processing server.
    pub fn downlink_path(&self) -> Option<Vec<NodeId>> {
        edges_to_path(&self.downlink, self.server()?)
    }
}

pub fn path_edges(path: &[NodeId]) -> Vec<Edge> {
    path.windows(2).map(|w| (w[0], w[1])).collect()
}

fn edges_to_path(edges: &[Edge], start: NodeId) -> Option<Vec<NodeId>> {
    let mut next: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for &(i, j) in edges {
        if next.insert(i, j).is_some() {
            return None;
        }
    }
    let mut path = vec![start];
    let mut seen = BTreeSet::from([start]);
    let mut current = start;
    while let Some(&n) = next.get(&current) {
        if !seen.insert(n) {
            return None;
        }
        path.push(n);
        current = n;
    }
    (path.len() == edges.len() + 1).then_some(path)
}

/// Server ids, then (uplink, downlink) node sequences, both in sensor order.
pub type Encoding = (Vec<u32>, Vec<(Vec<u32>, Vec<u32>)>);

/// Decision variables for every sensor plus the job-count variables `y_s`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    routes: BTreeMap<NodeId, ElidRoute>,
    jobs: BTreeMap<NodeId, u32>,
}

impl Assignment {
    /// Job counts are derived from the routes.
    pub fn new(routes: BTreeMap<NodeId, ElidRoute>) -> Self {
        let jobs = count_jobs(&routes);
        Assignment { routes, jobs }
    }

    /// Overrides the job-count variables. Only useful for exercising the
    /// job-count constraint; solvers never produce inconsistent counts.
    pub fn with_declared_jobs(mut self, jobs: BTreeMap<NodeId, u32>) -> Self {
        self.jobs = jobs;
        self
    }

    pub fn routes(&self) -> &BTreeMap<NodeId, ElidRoute> {
        &self.routes
    }

    pub fn route(&self, elid: NodeId) -> Option<&ElidRoute> {
        self.routes.get(&elid)
    }

    pub fn declared_jobs(&self) -> &BTreeMap<NodeId, u32> {
        &self.jobs
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Tie-break key: processing servers in sensor order, then the uplink and
    /// downlink node sequences in sensor order.
    pub fn encoding(&self) -> Encoding {
        let servers = self
            .routes
            .values()
            .map(|r| r.server().map_or(u32::MAX, |s| s.0))
            .collect();
        let paths = self
            .routes
            .iter()
            .map(|(&elid, r)| {
                let up = r.uplink_path(elid).unwrap_or_default();
                let down = r.downlink_path().unwrap_or_default();
                (
                    up.into_iter().map(|n| n.0).collect(),
                    down.into_iter().map(|n| n.0).collect(),
                )
            })
            .collect();
        (servers, paths)
    }
}

fn count_jobs(routes: &BTreeMap<NodeId, ElidRoute>) -> BTreeMap<NodeId, u32> {
    let mut jobs = BTreeMap::new();
    for route in routes.values() {
        for &s in &route.processing {
            *jobs.entry(s).or_insert(0) += 1;
        }
    }
    jobs
}

/// Number of jobs on each server, derived from the processing choices.
/// Servers with no jobs are absent.
pub fn job_counts(assignment: &Assignment) -> BTreeMap<NodeId, u32> {
    count_jobs(&assignment.routes)
}

/// The seven constraint families a feasible assignment satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintFamily {
    /// Traffic entering a non-sensor node leaves it again unless processed there.
    FlowConservation,
    /// Each sensor sends exactly one uplink and receives exactly one downlink,
    /// and sensors never forward.
    UplinkDownlink,
    /// Traffic only uses existing links.
    TopologyLimit,
    /// A flow never uses both directions of a link.
    DoubleCounting,
    Ram,
    JobCount,
    /// Each sensor's data is processed on exactly one server.
    Processing,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 7] = [
        ConstraintFamily::FlowConservation,
        ConstraintFamily::UplinkDownlink,
        ConstraintFamily::TopologyLimit,
        ConstraintFamily::DoubleCounting,
        ConstraintFamily::Ram,
        ConstraintFamily::JobCount,
        ConstraintFamily::Processing,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstraintFamily::FlowConservation => "flow conservation",
            ConstraintFamily::UplinkDownlink => "uplink/downlink requirement",
            ConstraintFamily::TopologyLimit => "topology limitation",
            ConstraintFamily::DoubleCounting => "double counting",
            ConstraintFamily::Ram => "server RAM",
            ConstraintFamily::JobCount => "job count",
            ConstraintFamily::Processing => "processing requirement",
        }
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "constraint {} ({})", self.number(), self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintViolation {
    pub family: ConstraintFamily,
    pub elid: Option<NodeId>,
    pub detail: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.elid {
            Some(e) => write!(f, "{} [elid {}]: {}", self.family, e, self.detail),
            None => write!(f, "{}: {}", self.family, self.detail),
        }
    }
}

/// The assignment refers to things that do not exist; distinct from a
/// constraint violation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructuralError {
    #[error("unknown node {0} in assignment")]
    UnknownNode(NodeId),
    #[error("node {0} has a route but is not an elid")]
    NotAnElid(NodeId),
    #[error("elid {elid}: edge {from}->{to} listed twice in one direction class")]
    RepeatedEdge {
        elid: NodeId,
        from: NodeId,
        to: NodeId,
    },
    #[error("elid {elid}: processing node {node} listed twice")]
    RepeatedProcessing { elid: NodeId, node: NodeId },
}

fn check_structure(topology: &Topology, assignment: &Assignment) -> Result<(), StructuralError> {
    let known = |n: NodeId| {
        if topology.contains(n) {
            Ok(())
        } else {
            Err(StructuralError::UnknownNode(n))
        }
    };
    for (&elid, route) in &assignment.routes {
        known(elid)?;
        if topology.role(elid) != Some(Role::Elid) {
            return Err(StructuralError::NotAnElid(elid));
        }
        let mut seen = BTreeSet::new();
        for &s in &route.processing {
            known(s)?;
            if !seen.insert(s) {
                return Err(StructuralError::RepeatedProcessing { elid, node: s });
            }
        }
        for edges in [&route.uplink, &route.downlink] {
            let mut seen = BTreeSet::new();
            for &(i, j) in edges {
                known(i)?;
                known(j)?;
                if !seen.insert((i, j)) {
                    return Err(StructuralError::RepeatedEdge {
                        elid,
                        from: i,
                        to: j,
                    });
                }
            }
        }
    }
    for &s in assignment.jobs.keys() {
        known(s)?;
    }
    Ok(())
}

#[derive(Default)]
struct Degrees {
    inbound: BTreeMap<NodeId, u32>,
    outbound: BTreeMap<NodeId, u32>,
}

impl Degrees {
    fn of(edges: &[Edge]) -> Self {
        let mut d = Degrees::default();
        for &(i, j) in edges {
            *d.outbound.entry(i).or_insert(0) += 1;
            *d.inbound.entry(j).or_insert(0) += 1;
        }
        d
    }

    fn inbound(&self, n: NodeId) -> u32 {
        self.inbound.get(&n).copied().unwrap_or(0)
    }

    fn outbound(&self, n: NodeId) -> u32 {
        self.outbound.get(&n).copied().unwrap_or(0)
    }
}

/// All constraint violations of `assignment`, grouped by family in family
/// order. Sensors missing from the assignment are treated as having no
/// route at all.
pub fn check_assignment(
    topology: &Topology,
    assignment: &Assignment,
) -> Result<Vec<ConstraintViolation>, StructuralError> {
    check_structure(topology, assignment)?;

    let empty = ElidRoute::default();
    let elids = topology.elid_ids();
    let servers = topology.server_ids();
    let route_of = |e: NodeId| assignment.routes.get(&e).unwrap_or(&empty);

    let mut out = Vec::new();
    let mut push = |family, elid: Option<NodeId>, detail: String| {
        out.push(ConstraintViolation {
            family,
            elid,
            detail,
        })
    };

    // 1. flow conservation at every non-sensor node
    for &elid in &elids {
        let route = route_of(elid);
        let up = Degrees::of(&route.uplink);
        let down = Degrees::of(&route.downlink);
        for &s in &servers {
            let c = u32::from(route.processing.contains(&s));
            if up.inbound(s) != up.outbound(s) + c {
                push(
                    ConstraintFamily::FlowConservation,
                    Some(elid),
                    format!(
                        "uplink at node {s}: in {} != out {} + processed {c}",
                        up.inbound(s),
                        up.outbound(s)
                    ),
                );
            }
            if down.outbound(s) != down.inbound(s) + c {
                push(
                    ConstraintFamily::FlowConservation,
                    Some(elid),
                    format!(
                        "downlink at node {s}: out {} != in {} + processed {c}",
                        down.outbound(s),
                        down.inbound(s)
                    ),
                );
            }
        }
    }

    // 2. one uplink out of / one downlink into the sensor; sensors never forward
    for &elid in &elids {
        let route = route_of(elid);
        let up = Degrees::of(&route.uplink);
        let down = Degrees::of(&route.downlink);
        if up.outbound(elid) != 1 {
            push(
                ConstraintFamily::UplinkDownlink,
                Some(elid),
                format!(
                    "{} uplink edges leave the elid, expected 1",
                    up.outbound(elid)
                ),
            );
        }
        if down.inbound(elid) != 1 {
            push(
                ConstraintFamily::UplinkDownlink,
                Some(elid),
                format!(
                    "{} downlink edges reach the elid, expected 1",
                    down.inbound(elid)
                ),
            );
        }
        for &other in &elids {
            for (class, d) in [("uplink", &up), ("downlink", &down)] {
                if d.inbound(other) > 0 && d.outbound(other) > 0 {
                    push(
                        ConstraintFamily::UplinkDownlink,
                        Some(elid),
                        format!("{class} is forwarded through elid {other}"),
                    );
                }
            }
        }
    }

    // 3. edges only where a link exists
    for &elid in &elids {
        let route = route_of(elid);
        for (class, edges) in [("uplink", &route.uplink), ("downlink", &route.downlink)] {
            for &(i, j) in edges {
                if i == j || topology.link(i, j).is_none() {
                    push(
                        ConstraintFamily::TopologyLimit,
                        Some(elid),
                        format!("{class} edge {i}->{j} has no fiber link"),
                    );
                }
            }
        }
    }

    // 4. at most one direction per link and direction class
    for &elid in &elids {
        let route = route_of(elid);
        for (class, edges) in [("uplink", &route.uplink), ("downlink", &route.downlink)] {
            let set: BTreeSet<Edge> = edges.iter().copied().collect();
            for &(i, j) in edges {
                if i < j && set.contains(&(j, i)) {
                    push(
                        ConstraintFamily::DoubleCounting,
                        Some(elid),
                        format!("{class} uses both {i}->{j} and {j}->{i}"),
                    );
                }
            }
        }
    }

    // 5. RAM
    let mut load: BTreeMap<NodeId, u64> = BTreeMap::new();
    for &elid in &elids {
        let rate = topology.elid(elid).map_or(0, |p| p.data_rate);
        for &s in &route_of(elid).processing {
            *load.entry(s).or_insert(0) += rate;
        }
    }
    for (&s, &bytes) in &load {
        if topology.role(s) == Some(Role::Elid) {
            continue;
        }
        let ram = topology.server(s).map_or(0, |p| p.ram);
        if bytes > ram {
            push(
                ConstraintFamily::Ram,
                None,
                format!("node {s}: load {bytes} B exceeds RAM {ram} B"),
            );
        }
    }

    // 6. declared job counts match the processing choices
    let derived = job_counts(assignment);
    let keys: BTreeSet<NodeId> = derived
        .keys()
        .chain(assignment.jobs.keys())
        .copied()
        .collect();
    for s in keys {
        let want = derived.get(&s).copied().unwrap_or(0);
        let have = assignment.jobs.get(&s).copied().unwrap_or(0);
        if want != have {
            push(
                ConstraintFamily::JobCount,
                None,
                format!("node {s}: declared {have} jobs, {want} sensors processed there"),
            );
        }
    }

    // 7. processed on exactly one server
    for &elid in &elids {
        let route = route_of(elid);
        let mut on_servers = 0;
        for &s in &route.processing {
            if topology.role(s) == Some(Role::Elid) {
                push(
                    ConstraintFamily::Processing,
                    Some(elid),
                    format!("node {s} is an elid, not a server"),
                );
            } else {
                on_servers += 1;
            }
        }
        if on_servers != 1 {
            push(
                ConstraintFamily::Processing,
                Some(elid),
                format!("processed on {on_servers} servers, expected 1"),
            );
        }
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GIGABYTE, MEGABYTE};

    fn n(ids: &[u32]) -> Vec<NodeId> {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    fn single_hop() -> Topology {
        Topology::builder()
            .elid(1, 100 * MEGABYTE)
            .mec(2, GIGABYTE, 2.5e8)
            .link(1, 2, 1e9)
            .beta(0.8)
            .build()
    }

    #[test]
    fn single_hop_round_trip_is_feasible() {
        let t = single_hop();
        let a = Assignment::new(BTreeMap::from([(
            NodeId(1),
            ElidRoute::from_paths(&n(&[1, 2]), &n(&[2, 1])),
        )]));
        assert_eq!(check_assignment(&t, &a).unwrap(), vec![]);
    }

    #[test]
    fn unknown_node_is_structural() {
        let t = single_hop();
        let a = Assignment::new(BTreeMap::from([(
            NodeId(1),
            ElidRoute::from_paths(&n(&[1, 9]), &n(&[9, 1])),
        )]));
        assert_eq!(
            check_assignment(&t, &a),
            Err(StructuralError::UnknownNode(NodeId(9)))
        );
    }

    #[test]
    fn route_keyed_by_server_is_structural() {
        let t = single_hop();
        let a = Assignment::new(BTreeMap::from([(NodeId(2), ElidRoute::default())]));
        assert_eq!(
            check_assignment(&t, &a),
            Err(StructuralError::NotAnElid(NodeId(2)))
        );
    }

    #[test]
    fn job_counts_examples() {
        let r = |s: u32| ElidRoute {
            processing: vec![NodeId(s)],
            ..Default::default()
        };
        let all_one = Assignment::new(BTreeMap::from([
            (NodeId(1), r(9)),
            (NodeId(2), r(9)),
            (NodeId(3), r(9)),
        ]));
        assert_eq!(job_counts(&all_one), BTreeMap::from([(NodeId(9), 3)]));
        let split = Assignment::new(BTreeMap::from([(NodeId(1), r(8)), (NodeId(2), r(9))]));
        assert_eq!(
            job_counts(&split),
            BTreeMap::from([(NodeId(8), 1), (NodeId(9), 1)])
        );
        assert!(job_counts(&Assignment::default()).is_empty());
    }

    #[test]
    fn path_reconstruction() {
        let route = ElidRoute::from_paths(&n(&[1, 3, 2]), &n(&[2, 4, 1]));
        assert_eq!(route.uplink_path(NodeId(1)), Some(n(&[1, 3, 2])));
        assert_eq!(route.downlink_path(), Some(n(&[2, 4, 1])));

        let mut cyclic = route.clone();
        cyclic.uplink.push((NodeId(2), NodeId(1)));
        assert_eq!(cyclic.uplink_path(NodeId(1)), None);
    }

    #[test]
    fn missing_route_violates_requirement_and_processing() {
        let t = single_hop();
        let v = check_assignment(&t, &Assignment::default()).unwrap();
        let families: BTreeSet<_> = v.iter().map(|v| v.family).collect();
        assert_eq!(
            families,
            BTreeSet::from([
                ConstraintFamily::UplinkDownlink,
                ConstraintFamily::Processing
            ])
        );
    }

    #[test]
    fn family_numbers_are_one_based() {
        let numbers: Vec<u8> = ConstraintFamily::ALL.iter().map(|f| f.number()).collect();
        assert_eq!(numbers, vec![1, 2, 3, 4, 5, 6, 7]);
    }
}
