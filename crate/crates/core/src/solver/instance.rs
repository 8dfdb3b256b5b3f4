//! Dense, index-based view of a topology used by the search routines.
//!
//! Node indices follow ascending [`NodeId`] order, so comparing index
//! sequences is the same as comparing id sequences.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::assignment::{Assignment, ElidRoute};
use crate::latency::Scheme;
use crate::model::{NodeId, Role, Topology};
use crate::paths::all_simple_paths;

use super::SolverError;

#[derive(Debug, Clone)]
pub(crate) struct PathInfo {
    /// Node indices from the sensor to the server.
    pub nodes: Vec<usize>,
    pub links: Vec<usize>,
}

/// One candidate processing server for one sensor together with every
/// simple uplink path to it. Downlinks reuse the same paths reversed.
#[derive(Debug, Clone)]
pub(crate) struct ServerOption {
    pub server: usize,
    pub paths: Vec<PathInfo>,
    /// Path indices in uplink preference order (static cost, then node ids).
    pub up_order: Vec<usize>,
    /// Path indices in downlink preference order (static cost, then the
    /// reversed node ids).
    pub down_order: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct ElidInfo {
    pub node: usize,
    pub rate: u64,
    pub size: f64,
    pub priority: f64,
    pub options: Vec<ServerOption>,
}

/// A complete decision for one sensor: option index, uplink path index and
/// downlink path index (both into `options[opt].paths`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Choice {
    pub opt: usize,
    pub up: usize,
    pub down: usize,
}

#[derive(Debug)]
pub(crate) struct Instance {
    pub scheme: Scheme,
    pub beta: f64,
    pub node_ids: Vec<NodeId>,
    pub is_elid: Vec<bool>,
    pub ram: Vec<u64>,
    pub throughput: Vec<f64>,
    pub bandwidth: Vec<f64>,
    /// (neighbour, link) pairs in ascending neighbour order.
    pub adjacency: Vec<Vec<(usize, usize)>>,
    pub elids: Vec<ElidInfo>,
    /// Sensors in branching order: heaviest weighted data rate first.
    pub order: Vec<usize>,
    pub capacity: Option<u32>,
}

impl Instance {
    pub fn build(
        topology: &Topology,
        scheme: Scheme,
        hop_limit: Option<usize>,
    ) -> Result<Self, SolverError> {
        let mut node_ids: Vec<NodeId> = topology.nodes().iter().map(|n| n.id).collect();
        node_ids.sort();
        node_ids.dedup();
        let index: BTreeMap<NodeId, usize> =
            node_ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let n = node_ids.len();

        let mut is_elid = vec![false; n];
        let mut ram = vec![0u64; n];
        let mut throughput = vec![0.0f64; n];
        let mut can_process = vec![false; n];
        for (i, &id) in node_ids.iter().enumerate() {
            let role = topology.role(id).expect("id came from the node table");
            is_elid[i] = role == Role::Elid;
            if let Some(p) = topology.server(id) {
                ram[i] = p.ram;
                throughput[i] = p.throughput;
                can_process[i] = role.can_process() && p.throughput > 0.0;
            }
        }

        let mut bandwidth = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for &id in &node_ids {
            for nb in topology.neighbours(id) {
                if id < nb {
                    let link = topology.link(id, nb).expect("neighbours share a link");
                    let (a, b) = (index[&id], index[&nb]);
                    let l = bandwidth.len();
                    bandwidth.push(link.bandwidth);
                    adjacency[a].push((b, l));
                    adjacency[b].push((a, l));
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort();
        }

        let plain_adjacency: Vec<Vec<usize>> = adjacency
            .iter()
            .map(|v| v.iter().map(|&(nb, _)| nb).collect())
            .collect();
        let max_hops = hop_limit.unwrap_or(n).max(1);
        let transit = |i: usize| !is_elid[i];

        let mut elids = Vec::new();
        for id in topology.elid_ids() {
            let params = topology.elid(id).ok_or_else(|| {
                SolverError::InvalidTopology(format!("elid {id} has no parameters"))
            })?;
            let node = index[&id];
            let mut options = Vec::new();
            for s in 0..n {
                if !can_process[s] || ram[s] < params.data_rate {
                    continue;
                }
                let raw = all_simple_paths(&plain_adjacency, node, s, max_hops, &transit);
                if raw.is_empty() {
                    continue;
                }
                let paths: Vec<PathInfo> = raw
                    .into_iter()
                    .map(|nodes| {
                        let links = nodes
                            .windows(2)
                            .map(|w| link_between(&adjacency, w[0], w[1]))
                            .collect();
                        PathInfo { nodes, links }
                    })
                    .collect();
                let static_cost =
                    |p: &PathInfo| -> f64 { p.links.iter().map(|&l| 1.0 / bandwidth[l]).sum() };
                let mut up_order: Vec<usize> = (0..paths.len()).collect();
                up_order.sort_by(|&a, &b| {
                    static_cost(&paths[a])
                        .total_cmp(&static_cost(&paths[b]))
                        .then_with(|| paths[a].nodes.cmp(&paths[b].nodes))
                });
                let mut down_order: Vec<usize> = (0..paths.len()).collect();
                down_order.sort_by(|&a, &b| {
                    static_cost(&paths[a])
                        .total_cmp(&static_cost(&paths[b]))
                        .then_with(|| paths[a].nodes.iter().rev().cmp(paths[b].nodes.iter().rev()))
                });
                options.push(ServerOption {
                    server: s,
                    paths,
                    up_order,
                    down_order,
                });
            }
            elids.push(ElidInfo {
                node,
                rate: params.data_rate,
                size: params.data_rate as f64,
                priority: params.priority,
                options,
            });
        }

        let mut order: Vec<usize> = (0..elids.len()).collect();
        order.sort_by(|&a, &b| {
            let w = |e: usize| elids[e].priority * elids[e].size;
            w(b).total_cmp(&w(a)).then(a.cmp(&b))
        });

        Ok(Instance {
            scheme,
            beta: topology.beta(),
            node_ids,
            is_elid,
            ram,
            throughput,
            bandwidth,
            adjacency,
            elids,
            order,
            capacity: scheme.channel_capacity(),
        })
    }

    pub fn link_count(&self) -> usize {
        self.bandwidth.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn path(&self, e: usize, opt: usize, p: usize) -> &PathInfo {
        &self.elids[e].options[opt].paths[p]
    }

    pub fn server_of(&self, e: usize, c: &Choice) -> usize {
        self.elids[e].options[c.opt].server
    }

    pub fn route(&self, e: usize, c: &Choice) -> ElidRoute {
        let ids = |nodes: &mut dyn Iterator<Item = &usize>| -> Vec<NodeId> {
            nodes.map(|&i| self.node_ids[i]).collect()
        };
        let up = ids(&mut self.path(e, c.opt, c.up).nodes.iter());
        let down = ids(&mut self.path(e, c.opt, c.down).nodes.iter().rev());
        ElidRoute::from_paths(&up, &down)
    }

    pub fn assignment(&self, choices: &[Choice]) -> Assignment {
        Assignment::new(
            choices
                .iter()
                .enumerate()
                .map(|(e, c)| (self.node_ids[self.elids[e].node], self.route(e, c)))
                .collect(),
        )
    }

    /// Map a route back to a dense choice, if it is one the search considers.
    pub fn choice_for(&self, e: usize, route: &ElidRoute) -> Option<Choice> {
        let elid = self.node_ids[self.elids[e].node];
        let server = route.server()?;
        let up = route.uplink_path(elid)?;
        let mut down = route.downlink_path()?;
        down.reverse();
        let opt = self.elids[e]
            .options
            .iter()
            .position(|o| self.node_ids[o.server] == server)?;
        let find = |seq: &[NodeId]| {
            self.elids[e].options[opt].paths.iter().position(|p| {
                p.nodes.len() == seq.len()
                    && p.nodes
                        .iter()
                        .zip(seq)
                        .all(|(&i, &id)| self.node_ids[i] == id)
            })
        };
        Some(Choice {
            opt,
            up: find(&up)?,
            down: find(&down)?,
        })
    }

    pub fn weighted_size(&self, e: usize) -> f64 {
        self.elids[e].priority * self.elids[e].size
    }

    /// Per-hop uplink latency on `link` when it carries `up`/`down` messages.
    pub fn uplink_hop(&self, size: f64, link: usize, up: u32, down: u32) -> f64 {
        size / (self.scheme.uplink_share(up, down) * self.bandwidth[link])
    }

    pub fn downlink_hop(&self, size: f64, link: usize, up: u32, down: u32) -> f64 {
        size / (self.scheme.downlink_share(up, down) * self.bandwidth[link])
    }

    pub fn fits(&self, up: u32, down: u32) -> bool {
        self.capacity.is_none_or(|c| up + down <= c)
    }

    /// Full objective of a complete choice vector, or `None` when a link
    /// exceeds the fixed channel supply or a server's RAM is exceeded.
    pub fn objective(&self, choices: &[Choice]) -> Option<f64> {
        let mut state = Loads::new(self);
        for (e, c) in choices.iter().enumerate() {
            if !state.can_host(self, e, c.opt) {
                return None;
            }
            state.add_server(self, e, c.opt);
            state.add_up(self, e, c);
            state.add_down(self, e, c);
        }
        if !state.within_capacity(self) {
            return None;
        }
        Some(
            choices
                .iter()
                .enumerate()
                .map(|(e, c)| self.elids[e].priority * state.elid_cost(self, e, c))
                .sum(),
        )
    }
}

fn link_between(adjacency: &[Vec<(usize, usize)>], a: usize, b: usize) -> usize {
    adjacency[a]
        .iter()
        .find(|&&(nb, _)| nb == b)
        .map(|&(_, l)| l)
        .expect("consecutive path nodes are adjacent")
}

/// Message counts per link and job/RAM tallies per node, plus the
/// priority-weighted bytes behind each count.
#[derive(Debug, Clone)]
pub(crate) struct Loads {
    pub up: Vec<u32>,
    pub down: Vec<u32>,
    pub jobs: Vec<u32>,
    pub ram_used: Vec<u64>,
    weight_up: Vec<f64>,
    weight_down: Vec<f64>,
    weight_jobs: Vec<f64>,
}

impl Loads {
    pub fn new(inst: &Instance) -> Self {
        Loads {
            up: vec![0; inst.link_count()],
            down: vec![0; inst.link_count()],
            jobs: vec![0; inst.node_count()],
            ram_used: vec![0; inst.node_count()],
            weight_up: vec![0.0; inst.link_count()],
            weight_down: vec![0.0; inst.link_count()],
            weight_jobs: vec![0.0; inst.node_count()],
        }
    }

    pub fn can_host(&self, inst: &Instance, e: usize, opt: usize) -> bool {
        let s = inst.elids[e].options[opt].server;
        self.ram_used[s] + inst.elids[e].rate <= inst.ram[s]
    }

    pub fn add_server(&mut self, inst: &Instance, e: usize, opt: usize) {
        let s = inst.elids[e].options[opt].server;
        self.jobs[s] += 1;
        self.ram_used[s] += inst.elids[e].rate;
        self.weight_jobs[s] += inst.weighted_size(e);
    }

    pub fn remove_server(&mut self, inst: &Instance, e: usize, opt: usize) {
        let s = inst.elids[e].options[opt].server;
        self.jobs[s] -= 1;
        self.ram_used[s] -= inst.elids[e].rate;
        self.weight_jobs[s] -= inst.weighted_size(e);
    }

    pub fn add_up(&mut self, inst: &Instance, e: usize, c: &Choice) {
        self.add_uplink_path(inst, e, &inst.path(e, c.opt, c.up).links);
    }

    pub fn add_down(&mut self, inst: &Instance, e: usize, c: &Choice) {
        self.add_downlink_path(inst, e, &inst.path(e, c.opt, c.down).links);
    }

    pub fn add_uplink_path(&mut self, inst: &Instance, e: usize, links: &[usize]) {
        let w = inst.weighted_size(e);
        for &l in links {
            self.up[l] += 1;
            self.weight_up[l] += w;
        }
    }

    pub fn remove_uplink_path(&mut self, inst: &Instance, e: usize, links: &[usize]) {
        let w = inst.weighted_size(e);
        for &l in links {
            self.up[l] -= 1;
            self.weight_up[l] -= w;
        }
    }

    pub fn add_downlink_path(&mut self, inst: &Instance, e: usize, links: &[usize]) {
        let w = inst.beta * inst.weighted_size(e);
        for &l in links {
            self.down[l] += 1;
            self.weight_down[l] += w;
        }
    }

    pub fn remove_downlink_path(&mut self, inst: &Instance, e: usize, links: &[usize]) {
        let w = inst.beta * inst.weighted_size(e);
        for &l in links {
            self.down[l] -= 1;
            self.weight_down[l] -= w;
        }
    }

    pub fn add(&mut self, inst: &Instance, e: usize, c: &Choice) {
        self.add_server(inst, e, c.opt);
        self.add_up(inst, e, c);
        self.add_down(inst, e, c);
    }

    pub fn within_capacity(&self, inst: &Instance) -> bool {
        (0..inst.link_count()).all(|l| inst.fits(self.up[l], self.down[l]))
    }

    pub fn path_fits(&self, inst: &Instance, links: &[usize]) -> bool {
        links
            .iter()
            .all(|&l| inst.fits(self.up[l] + 1, self.down[l]))
    }

    pub fn processing(&self, inst: &Instance, e: usize, opt: usize) -> f64 {
        let s = inst.elids[e].options[opt].server;
        f64::from(self.jobs[s]) * inst.elids[e].size / inst.throughput[s]
    }

    pub fn uplink_cost(&self, inst: &Instance, e: usize, links: &[usize]) -> f64 {
        let size = inst.elids[e].size;
        links
            .iter()
            .map(|&l| inst.uplink_hop(size, l, self.up[l], self.down[l]))
            .sum()
    }

    pub fn downlink_cost(&self, inst: &Instance, e: usize, links: &[usize]) -> f64 {
        let size = inst.beta * inst.elids[e].size;
        links
            .iter()
            .map(|&l| inst.downlink_hop(size, l, self.up[l], self.down[l]))
            .sum()
    }

    /// Unweighted latency of a sensor whose messages are already counted.
    pub fn elid_cost(&self, inst: &Instance, e: usize, c: &Choice) -> f64 {
        self.uplink_cost(inst, e, &inst.path(e, c.opt, c.up).links)
            + self.downlink_cost(inst, e, &inst.path(e, c.opt, c.down).links)
            + self.processing(inst, e, c.opt)
    }

    /// Weighted latency every message on `link` would have with the
    /// given counts and weighted bytes.
    fn link_total(
        &self,
        inst: &Instance,
        l: usize,
        up: u32,
        down: u32,
        w_up: f64,
        w_down: f64,
    ) -> f64 {
        let r = inst.bandwidth[l];
        let mut total = 0.0;
        if up > 0 {
            total += w_up / (inst.scheme.uplink_share(up, down) * r);
        }
        if down > 0 {
            total += w_down / (inst.scheme.downlink_share(up, down) * r);
        }
        total
    }

    /// Increase of the weighted objective if sensor `e` sent one more
    /// uplink message over `l`: its own hop plus the slowdown of every
    /// message already sharing the link. `None` if the link is full.
    pub fn uplink_marginal(&self, inst: &Instance, e: usize, l: usize) -> Option<f64> {
        let (u, d) = (self.up[l], self.down[l]);
        if !inst.fits(u + 1, d) {
            return None;
        }
        let (wu, wd) = (self.weight_up[l], self.weight_down[l]);
        let w = inst.weighted_size(e);
        let after = self.link_total(inst, l, u + 1, d, wu + w, wd);
        Some((after - self.link_total(inst, l, u, d, wu, wd)).max(0.0))
    }

    pub fn downlink_marginal(&self, inst: &Instance, e: usize, l: usize) -> Option<f64> {
        let (u, d) = (self.up[l], self.down[l]);
        if !inst.fits(u, d + 1) {
            return None;
        }
        let (wu, wd) = (self.weight_up[l], self.weight_down[l]);
        let w = inst.beta * inst.weighted_size(e);
        let after = self.link_total(inst, l, u, d + 1, wu, wd + w);
        Some((after - self.link_total(inst, l, u, d, wu, wd)).max(0.0))
    }

    /// Increase of the weighted objective if sensor `e` became one more job
    /// at server `s`.
    pub fn processing_marginal(&self, inst: &Instance, e: usize, s: usize) -> f64 {
        let w = inst.weighted_size(e);
        (self.weight_jobs[s] + f64::from(self.jobs[s] + 1) * w) / inst.throughput[s]
    }

    /// Cheapest weighted uplink marginal from sensor `e` to every node,
    /// ignoring hop limits. Infinite where unreachable.
    pub fn cheapest_uplinks(&self, inst: &Instance, e: usize) -> Vec<f64> {
        self.dijkstra(inst, e, |l| self.uplink_marginal(inst, e, l))
    }

    pub fn cheapest_downlinks(&self, inst: &Instance, e: usize) -> Vec<f64> {
        self.dijkstra(inst, e, |l| self.downlink_marginal(inst, e, l))
    }

    fn dijkstra(
        &self,
        inst: &Instance,
        e: usize,
        weight: impl Fn(usize) -> Option<f64>,
    ) -> Vec<f64> {
        let source = inst.elids[e].node;
        let mut dist = vec![f64::INFINITY; inst.node_count()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Frontier(0.0, source));
        while let Some(Frontier(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            // sensors terminate paths; only the source may be left
            if u != source && inst.is_elid[u] {
                continue;
            }
            for &(v, l) in &inst.adjacency[u] {
                let Some(w) = weight(l) else { continue };
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Frontier(nd, v));
                }
            }
        }
        dist
    }
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}
