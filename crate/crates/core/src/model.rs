//! Network model: nodes, fiber links, per-sensor and per-server parameters.
//!
//! A [`Topology`] is plain data. Nothing here rejects a malformed network at
//! construction time; [`validate_topology`] reports every broken rule so that
//! callers can show all of them at once.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Bytes per decimal megabyte.
pub const MEGABYTE: u64 = 1_000_000;
/// Bytes per decimal gigabyte.
pub const GIGABYTE: u64 = 1_000_000_000;

/// Throughput recorded for routers. Routers never process jobs, so any
/// positive value would be a lie; zero makes accidental use loud.
pub const ROUTER_THROUGHPUT: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Elid,
    Router,
    Mec,
    Cloud,
}

impl Role {
    /// Whether a node of this role can host processing jobs at all.
    pub fn can_process(self) -> bool {
        matches!(self, Role::Mec | Role::Cloud)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Elid => "elid",
            Role::Router => "router",
            Role::Mec => "mec",
            Role::Cloud => "cloud",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
}

/// Bidirectional fiber link. `bandwidth` is in bytes/second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth: f64,
}

impl Link {
    pub fn key(&self) -> LinkKey {
        LinkKey::new(self.a, self.b)
    }
}

/// Unordered endpoint pair identifying a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey(pub NodeId, pub NodeId);

impl LinkKey {
    pub fn new(i: NodeId, j: NodeId) -> Self {
        if i <= j {
            LinkKey(i, j)
        } else {
            LinkKey(j, i)
        }
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// Per-sensor parameters: raw data rate (bytes/second) and priority weight.
/// Lower priority values mean more important sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElidParams {
    pub data_rate: u64,
    pub priority: f64,
}

/// RAM in bytes and processing throughput in bytes/second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerParams {
    pub ram: u64,
    pub throughput: f64,
}

impl ServerParams {
    pub fn router() -> Self {
        ServerParams {
            ram: 0,
            throughput: ROUTER_THROUGHPUT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    elids: BTreeMap<NodeId, ElidParams>,
    servers: BTreeMap<NodeId, ServerParams>,
    beta: f64,
    adjacency: BTreeMap<NodeId, Vec<(NodeId, usize)>>,
    link_index: BTreeMap<LinkKey, usize>,
}

impl Topology {
    pub fn new(
        nodes: Vec<Node>,
        links: Vec<Link>,
        elids: BTreeMap<NodeId, ElidParams>,
        servers: BTreeMap<NodeId, ServerParams>,
        beta: f64,
    ) -> Self {
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, usize)>> = BTreeMap::new();
        let mut link_index = BTreeMap::new();
        for (idx, link) in links.iter().enumerate() {
            if link.a == link.b {
                continue;
            }
            // first occurrence wins; duplicates are reported by validation
            if link_index.contains_key(&link.key()) {
                continue;
            }
            link_index.insert(link.key(), idx);
            adjacency.entry(link.a).or_default().push((link.b, idx));
            adjacency.entry(link.b).or_default().push((link.a, idx));
        }
        for neighbours in adjacency.values_mut() {
            neighbours.sort_by_key(|&(n, _)| n);
        }
        Topology {
            nodes,
            links,
            elids,
            servers,
            beta,
            adjacency,
            link_index,
        }
    }

    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn elid_params(&self) -> &BTreeMap<NodeId, ElidParams> {
        &self.elids
    }

    pub fn server_params(&self) -> &BTreeMap<NodeId, ServerParams> {
        &self.servers
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn role(&self, id: NodeId) -> Option<Role> {
        self.node(id).map(|n| n.role)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    /// Sensor ids in ascending order.
    pub fn elid_ids(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.role == Role::Elid)
            .map(|n| n.id)
            .collect();
        ids.sort();
        ids
    }

    /// Non-sensor node ids (routers, MEC devices, cloud) in ascending order.
    pub fn server_ids(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.role != Role::Elid)
            .map(|n| n.id)
            .collect();
        ids.sort();
        ids
    }

    pub fn elid(&self, id: NodeId) -> Option<&ElidParams> {
        self.elids.get(&id)
    }

    pub fn server(&self, id: NodeId) -> Option<&ServerParams> {
        self.servers.get(&id)
    }

    pub fn link(&self, i: NodeId, j: NodeId) -> Option<&Link> {
        self.link_index
            .get(&LinkKey::new(i, j))
            .map(|&idx| &self.links[idx])
    }

    /// Neighbours of `id` in ascending id order.
    pub fn neighbours(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency
            .get(&id)
            .into_iter()
            .flat_map(|v| v.iter().map(|&(n, _)| n))
    }

    /// Downlink-to-uplink size ratio must lie in (0, 1].
    pub fn with_beta(&self, beta: f64) -> Topology {
        let mut t = self.clone();
        t.beta = beta;
        t
    }

    /// Copy with every sensor producing `rate` bytes/second.
    pub fn with_uniform_data_rate(&self, rate: u64) -> Topology {
        let mut t = self.clone();
        for p in t.elids.values_mut() {
            p.data_rate = rate;
        }
        t
    }

    /// Copy with every node of `role` processing at `throughput` bytes/second.
    pub fn with_role_throughput(&self, role: Role, throughput: f64) -> Topology {
        let mut t = self.clone();
        for node in &self.nodes {
            if node.role == role {
                if let Some(p) = t.servers.get_mut(&node.id) {
                    p.throughput = throughput;
                }
            }
        }
        t
    }

    pub fn cloud_ids(&self) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.role == Role::Cloud)
            .map(|n| n.id)
            .collect();
        ids.sort();
        ids
    }
}

/// Incremental construction for tests, fixtures and programmatic use.
/// Sensor priorities default to the sensor's 1-based position.
#[derive(Debug, Default, Clone)]
pub struct TopologyBuilder {
    nodes: Vec<Node>,
    links: Vec<Link>,
    elids: BTreeMap<NodeId, ElidParams>,
    servers: BTreeMap<NodeId, ServerParams>,
    beta: Option<f64>,
    elid_count: u32,
}

impl TopologyBuilder {
    pub fn elid(self, id: u32, data_rate: u64) -> Self {
        let position = self.elid_count + 1;
        self.elid_with_priority(id, data_rate, f64::from(position))
    }

    pub fn elid_with_priority(mut self, id: u32, data_rate: u64, priority: f64) -> Self {
        self.elid_count += 1;
        self.nodes.push(Node {
            id: NodeId(id),
            role: Role::Elid,
        });
        self.elids.insert(
            NodeId(id),
            ElidParams {
                data_rate,
                priority,
            },
        );
        self
    }

    pub fn router(mut self, id: u32) -> Self {
        self.nodes.push(Node {
            id: NodeId(id),
            role: Role::Router,
        });
        self.servers.insert(NodeId(id), ServerParams::router());
        self
    }

    pub fn mec(self, id: u32, ram: u64, throughput: f64) -> Self {
        self.server(id, Role::Mec, ram, throughput)
    }

    pub fn cloud(self, id: u32, ram: u64, throughput: f64) -> Self {
        self.server(id, Role::Cloud, ram, throughput)
    }

    fn server(mut self, id: u32, role: Role, ram: u64, throughput: f64) -> Self {
        self.nodes.push(Node {
            id: NodeId(id),
            role,
        });
        self.servers
            .insert(NodeId(id), ServerParams { ram, throughput });
        self
    }

    pub fn link(mut self, a: u32, b: u32, bandwidth: f64) -> Self {
        self.links.push(Link {
            a: NodeId(a),
            b: NodeId(b),
            bandwidth,
        });
        self
    }

    pub fn beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn build(self) -> Topology {
        Topology::new(
            self.nodes,
            self.links,
            self.elids,
            self.servers,
            self.beta.unwrap_or(1.0),
        )
    }
}

/// Which structural rule a topology breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TopologyRule {
    DuplicateNodeId,
    NoElid,
    NoProcessingNode,
    MissingParams,
    NonPositiveDataRate,
    NonPositivePriority,
    NonPositiveThroughput,
    RouterAcceptsJobs,
    UnknownLinkEndpoint,
    SelfLoop,
    DuplicateLink,
    NonPositiveBandwidth,
    BetaOutOfRange,
    NoReachableServer,
}

impl TopologyRule {
    pub fn description(self) -> &'static str {
        match self {
            TopologyRule::DuplicateNodeId => "duplicate node id",
            TopologyRule::NoElid => "topology has no elid",
            TopologyRule::NoProcessingNode => "topology has no mec or cloud node",
            TopologyRule::MissingParams => "missing role parameters",
            TopologyRule::NonPositiveDataRate => "nonpositive data rate",
            TopologyRule::NonPositivePriority => "nonpositive priority",
            TopologyRule::NonPositiveThroughput => "nonpositive throughput",
            TopologyRule::RouterAcceptsJobs => "router has nonzero RAM",
            TopologyRule::UnknownLinkEndpoint => "link endpoint is not a node",
            TopologyRule::SelfLoop => "self-loop link",
            TopologyRule::DuplicateLink => "duplicate link for node pair",
            TopologyRule::NonPositiveBandwidth => "nonpositive bandwidth",
            TopologyRule::BetaOutOfRange => "beta outside (0, 1]",
            TopologyRule::NoReachableServer => "no reachable server with sufficient RAM",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyViolation {
    pub rule: TopologyRule,
    pub subject: String,
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule.description())
    }
}

fn violation(rule: TopologyRule, subject: impl Into<String>) -> TopologyViolation {
    TopologyViolation {
        rule,
        subject: subject.into(),
    }
}

/// Every broken structural rule, in a stable order. Empty means valid.
pub fn validate_topology(topology: &Topology) -> Vec<TopologyViolation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for node in topology.nodes() {
        if !seen.insert(node.id) {
            out.push(violation(
                TopologyRule::DuplicateNodeId,
                format!("node {}", node.id),
            ));
        }
    }

    if !topology.nodes().iter().any(|n| n.role == Role::Elid) {
        out.push(violation(TopologyRule::NoElid, "topology"));
    }
    if !topology.nodes().iter().any(|n| n.role.can_process()) {
        out.push(violation(TopologyRule::NoProcessingNode, "topology"));
    }

    for node in topology.nodes() {
        let subject = format!("node {} ({})", node.id, node.role);
        match node.role {
            Role::Elid => match topology.elid(node.id) {
                None => out.push(violation(TopologyRule::MissingParams, subject)),
                Some(p) => {
                    if p.data_rate == 0 {
                        out.push(violation(
                            TopologyRule::NonPositiveDataRate,
                            subject.clone(),
                        ));
                    }
                    if p.priority.is_nan() || p.priority <= 0.0 {
                        out.push(violation(TopologyRule::NonPositivePriority, subject));
                    }
                }
            },
            Role::Router => {
                if let Some(p) = topology.server(node.id) {
                    if p.ram != 0 {
                        out.push(violation(TopologyRule::RouterAcceptsJobs, subject));
                    }
                }
            }
            Role::Mec | Role::Cloud => match topology.server(node.id) {
                None => out.push(violation(TopologyRule::MissingParams, subject)),
                Some(p) => {
                    if !p.throughput.is_finite() || p.throughput <= 0.0 {
                        out.push(violation(TopologyRule::NonPositiveThroughput, subject));
                    }
                }
            },
        }
    }

    let mut pairs = BTreeSet::new();
    for (idx, link) in topology.links().iter().enumerate() {
        let subject = format!("link {} ({}-{})", idx, link.a, link.b);
        if !topology.contains(link.a) || !topology.contains(link.b) {
            out.push(violation(
                TopologyRule::UnknownLinkEndpoint,
                subject.clone(),
            ));
        }
        if link.a == link.b {
            out.push(violation(TopologyRule::SelfLoop, subject.clone()));
        } else if !pairs.insert(link.key()) {
            out.push(violation(TopologyRule::DuplicateLink, subject.clone()));
        }
        if !link.bandwidth.is_finite() || link.bandwidth <= 0.0 {
            out.push(violation(TopologyRule::NonPositiveBandwidth, subject));
        }
    }

    let beta = topology.beta();
    if !(beta > 0.0 && beta <= 1.0) {
        out.push(violation(
            TopologyRule::BetaOutOfRange,
            format!("beta = {beta}"),
        ));
    }

    for elid in topology.elid_ids() {
        let Some(params) = topology.elid(elid) else {
            continue;
        };
        if !reaches_server_with_ram(topology, elid, params.data_rate) {
            out.push(violation(
                TopologyRule::NoReachableServer,
                format!("node {elid} (elid)"),
            ));
        }
    }

    out
}

/// Breadth-first search from `elid` through non-sensor nodes only, since
/// sensors never forward traffic.
fn reaches_server_with_ram(topology: &Topology, elid: NodeId, demand: u64) -> bool {
    let mut visited = BTreeSet::from([elid]);
    let mut queue = VecDeque::from([elid]);
    while let Some(current) = queue.pop_front() {
        for next in topology.neighbours(current) {
            if topology.role(next).is_none_or(|r| r == Role::Elid) || !visited.insert(next) {
                continue;
            }
            let role = topology.role(next).unwrap();
            if role.can_process() && topology.server(next).is_some_and(|p| p.ram >= demand) {
                return true;
            }
            queue.push_back(next);
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(ram: u64) -> Topology {
        Topology::builder()
            .elid(1, 100 * MEGABYTE)
            .mec(2, ram, 2.5e8)
            .link(1, 2, 1e9)
            .beta(0.8)
            .build()
    }

    fn rules(t: &Topology) -> Vec<TopologyRule> {
        validate_topology(t).into_iter().map(|v| v.rule).collect()
    }

    #[test]
    fn minimal_network_is_valid() {
        assert!(validate_topology(&minimal(GIGABYTE)).is_empty());
    }

    #[test]
    fn zero_ram_everywhere_is_unreachable() {
        let v = validate_topology(&minimal(0));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, TopologyRule::NoReachableServer);
        assert_eq!(
            v[0].to_string(),
            "node 1 (elid): no reachable server with sufficient RAM"
        );
    }

    #[test]
    fn zero_bandwidth_is_flagged() {
        let t = Topology::builder()
            .elid(1, 10)
            .mec(2, 100, 1.0)
            .link(1, 2, 0.0)
            .build();
        assert!(rules(&t).contains(&TopologyRule::NonPositiveBandwidth));
    }

    #[test]
    fn structural_link_errors() {
        let t = Topology::builder()
            .elid(1, 10)
            .mec(2, 100, 1.0)
            .link(1, 2, 1.0)
            .link(2, 1, 1.0)
            .link(2, 2, 1.0)
            .link(2, 9, 1.0)
            .build();
        let r = rules(&t);
        assert!(r.contains(&TopologyRule::DuplicateLink));
        assert!(r.contains(&TopologyRule::SelfLoop));
        assert!(r.contains(&TopologyRule::UnknownLinkEndpoint));
    }

    #[test]
    fn sensors_do_not_forward() {
        // 1 -> 2 -> 3 where 2 is another sensor: server 3 is unreachable for 1
        let t = Topology::builder()
            .elid(1, 10)
            .elid(2, 10)
            .mec(3, 100, 1.0)
            .link(1, 2, 1.0)
            .link(2, 3, 1.0)
            .build();
        let v = validate_topology(&t);
        assert_eq!(v.len(), 1);
        assert!(v[0].subject.starts_with("node 1"));
    }

    #[test]
    fn missing_roles_and_beta() {
        let t = Topology::builder().router(1).beta(1.5).build();
        let r = rules(&t);
        assert!(r.contains(&TopologyRule::NoElid));
        assert!(r.contains(&TopologyRule::NoProcessingNode));
        assert!(r.contains(&TopologyRule::BetaOutOfRange));
    }

    #[test]
    fn default_priorities_follow_position() {
        let t = Topology::builder()
            .elid(7, 1)
            .elid(3, 1)
            .mec(9, 10, 1.0)
            .build();
        assert_eq!(t.elid(NodeId(7)).unwrap().priority, 1.0);
        assert_eq!(t.elid(NodeId(3)).unwrap().priority, 2.0);
    }

    #[test]
    fn neighbours_are_sorted() {
        let t = Topology::builder()
            .router(1)
            .router(5)
            .router(3)
            .router(2)
            .link(1, 5, 1.0)
            .link(1, 3, 1.0)
            .link(2, 1, 1.0)
            .build();
        let n: Vec<u32> = t.neighbours(NodeId(1)).map(|n| n.0).collect();
        assert_eq!(n, vec![2, 3, 5]);
    }
}
