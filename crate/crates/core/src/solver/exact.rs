//! Depth-first branch-and-bound over (server, uplink path, downlink path) per
//! sensor, heaviest sensors first.
//!
//! The bound of a node is the current latency of every decided component
//! plus, for every missing component, the cheapest marginal cost of adding
//! that component alone to the current loads: its own latency plus the
//! slowdown it inflicts on everything already sharing its links or server.
//! On each link and server the weighted latency has the form
//! `count * weighted bytes`, so marginals only grow as traffic is added and
//! the sum of independent marginals never exceeds the true increase.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::instance::{Choice, Instance, Loads};

/// Pruning slack. Wider than the reporting tolerance so that every solution
/// within tolerance of the optimum survives to the final tie-break.
pub(crate) const SEARCH_SLACK: f64 = 2e-9;

const NODE_BATCH: u64 = 256;

pub(crate) struct Shared {
    incumbent: AtomicU64,
    trace: Mutex<Vec<f64>>,
    nodes: AtomicU64,
    stop: AtomicBool,
    node_limit: Option<u64>,
    deadline: Option<Instant>,
}

impl Shared {
    pub fn new(node_limit: Option<u64>, deadline: Option<Instant>) -> Self {
        Shared {
            incumbent: AtomicU64::new(f64::INFINITY.to_bits()),
            trace: Mutex::new(Vec::new()),
            nodes: AtomicU64::new(0),
            stop: AtomicBool::new(false),
            node_limit,
            deadline,
        }
    }

    pub fn incumbent(&self) -> f64 {
        f64::from_bits(self.incumbent.load(Ordering::Acquire))
    }

    pub fn offer(&self, value: f64) {
        let mut trace = self.trace.lock().expect("trace lock");
        if value < self.incumbent() {
            self.incumbent.store(value.to_bits(), Ordering::Release);
            trace.push(value);
        }
    }

    pub fn truncated(&self) -> bool {
        self.stop.load(Ordering::Relaxed)
    }

    pub fn nodes(&self) -> u64 {
        self.nodes.load(Ordering::Relaxed)
    }

    pub fn trace(&self) -> Vec<f64> {
        self.trace.lock().expect("trace lock").clone()
    }

    fn account(&self, batch: u64) {
        let total = self.nodes.fetch_add(batch, Ordering::Relaxed) + batch;
        let over_nodes = self.node_limit.is_some_and(|limit| total >= limit);
        let over_time = self.deadline.is_some_and(|d| Instant::now() >= d);
        if over_nodes || over_time {
            self.stop.store(true, Ordering::Relaxed);
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    opt: Option<usize>,
    up: Option<usize>,
    down: Option<usize>,
}

pub(crate) struct Search<'a> {
    inst: &'a Instance,
    shared: &'a Shared,
    loads: Loads,
    partial: Vec<Partial>,
    pub candidates: Vec<(f64, Vec<Choice>)>,
    pending: u64,
}

impl<'a> Search<'a> {
    pub fn new(inst: &'a Instance, shared: &'a Shared) -> Self {
        Search {
            inst,
            shared,
            loads: Loads::new(inst),
            partial: vec![Partial::default(); inst.elids.len()],
            candidates: Vec::new(),
            pending: 0,
        }
    }

    /// Fix the leading sensors' complete choices. Used for bound testing.
    pub fn fix_prefix(&mut self, prefix: &[Choice]) {
        for (e, c) in prefix.iter().enumerate() {
            self.apply_server(e, c.opt);
            self.apply_up(e, c.up);
            self.apply_down(e, c.down);
        }
    }

    fn apply_server(&mut self, e: usize, opt: usize) {
        self.loads.add_server(self.inst, e, opt);
        self.partial[e].opt = Some(opt);
    }

    fn undo_server(&mut self, e: usize, opt: usize) {
        self.loads.remove_server(self.inst, e, opt);
        self.partial[e].opt = None;
    }

    fn apply_up(&mut self, e: usize, p: usize) {
        let opt = self.partial[e].opt.expect("server first");
        self.loads
            .add_uplink_path(self.inst, e, &self.inst.path(e, opt, p).links);
        self.partial[e].up = Some(p);
    }

    fn undo_up(&mut self, e: usize, p: usize) {
        let opt = self.partial[e].opt.expect("server first");
        self.loads
            .remove_uplink_path(self.inst, e, &self.inst.path(e, opt, p).links);
        self.partial[e].up = None;
    }

    fn apply_down(&mut self, e: usize, p: usize) {
        let opt = self.partial[e].opt.expect("server first");
        self.loads
            .add_downlink_path(self.inst, e, &self.inst.path(e, opt, p).links);
        self.partial[e].down = Some(p);
    }

    fn undo_down(&mut self, e: usize, p: usize) {
        let opt = self.partial[e].opt.expect("server first");
        self.loads
            .remove_downlink_path(self.inst, e, &self.inst.path(e, opt, p).links);
        self.partial[e].down = None;
    }

    /// Lower bound on the objective of every completion of the current node.
    /// Exact at leaves.
    pub fn bound(&self) -> f64 {
        let inst = self.inst;
        let mut total = 0.0;
        for (e, p) in self.partial.iter().enumerate() {
            let info = &inst.elids[e];
            let weighted = match p.opt {
                Some(opt) => {
                    let s = info.options[opt].server;
                    let mut t = info.priority * self.loads.processing(inst, e, opt);
                    t += match p.up {
                        Some(u) => {
                            info.priority
                                * self.loads.uplink_cost(inst, e, &inst.path(e, opt, u).links)
                        }
                        None => self.loads.cheapest_uplinks(inst, e)[s],
                    };
                    t += match p.down {
                        Some(d) => {
                            info.priority
                                * self
                                    .loads
                                    .downlink_cost(inst, e, &inst.path(e, opt, d).links)
                        }
                        None => self.loads.cheapest_downlinks(inst, e)[s],
                    };
                    t
                }
                None => {
                    let ups = self.loads.cheapest_uplinks(inst, e);
                    let downs = self.loads.cheapest_downlinks(inst, e);
                    info.options
                        .iter()
                        .enumerate()
                        .filter(|&(opt, _)| self.loads.can_host(inst, e, opt))
                        .map(|(_, o)| {
                            let s = o.server;
                            self.loads.processing_marginal(inst, e, s) + ups[s] + downs[s]
                        })
                        .fold(f64::INFINITY, f64::min)
                }
            };
            total += weighted;
            if total.is_infinite() {
                return f64::INFINITY;
            }
        }
        total
    }

    fn tick(&mut self) -> bool {
        self.pending += 1;
        if self.pending >= NODE_BATCH {
            self.shared.account(self.pending);
            self.pending = 0;
        }
        self.shared.truncated()
    }

    pub fn flush(&mut self) {
        if self.pending > 0 {
            self.shared.account(self.pending);
            self.pending = 0;
        }
    }

    fn admissible(&self, bound: f64) -> bool {
        bound <= self.shared.incumbent() + SEARCH_SLACK
    }

    fn record_leaf(&mut self) {
        let cost = self.bound();
        if !self.admissible(cost) {
            return;
        }
        let choices = self
            .partial
            .iter()
            .map(|p| Choice {
                opt: p.opt.unwrap(),
                up: p.up.unwrap(),
                down: p.down.unwrap(),
            })
            .collect();
        self.shared.offer(cost);
        self.candidates.push((cost, choices));
        if self.candidates.len() > 256 {
            let limit = self.shared.incumbent() + SEARCH_SLACK;
            self.candidates.retain(|(c, _)| *c <= limit);
        }
    }

    /// Explore the subtree below the `depth`-th sensor in branching order at
    /// `stage` (0 = choose server, 1 = uplink, 2 = downlink).
    pub fn dfs(&mut self, depth: usize, stage: u8) {
        if self.tick() {
            return;
        }
        let inst = self.inst;
        let Some(&e) = inst.order.get(depth) else {
            self.record_leaf();
            return;
        };
        match stage {
            0 => {
                let mut kids = Vec::new();
                for opt in 0..inst.elids[e].options.len() {
                    if !self.loads.can_host(inst, e, opt) {
                        continue;
                    }
                    self.apply_server(e, opt);
                    kids.push((self.bound(), opt));
                    self.undo_server(e, opt);
                }
                kids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (b, opt) in kids {
                    if !self.admissible(b) {
                        break;
                    }
                    self.apply_server(e, opt);
                    self.dfs(depth, 1);
                    self.undo_server(e, opt);
                }
            }
            1 => {
                let opt = self.partial[e].opt.unwrap();
                let option = &inst.elids[e].options[opt];
                let mut kids = Vec::new();
                for (rank, &p) in option.up_order.iter().enumerate() {
                    if !self.loads.path_fits(inst, &option.paths[p].links) {
                        continue;
                    }
                    self.apply_up(e, p);
                    kids.push((self.bound(), rank, p));
                    self.undo_up(e, p);
                }
                kids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (b, _, p) in kids {
                    if !self.admissible(b) {
                        break;
                    }
                    self.apply_up(e, p);
                    self.dfs(depth, 2);
                    self.undo_up(e, p);
                }
            }
            _ => {
                let opt = self.partial[e].opt.unwrap();
                let option = &inst.elids[e].options[opt];
                let mut kids = Vec::new();
                for (rank, &p) in option.down_order.iter().enumerate() {
                    let fits = option.paths[p]
                        .links
                        .iter()
                        .all(|&l| inst.fits(self.loads.up[l], self.loads.down[l] + 1));
                    if !fits {
                        continue;
                    }
                    self.apply_down(e, p);
                    kids.push((self.bound(), rank, p));
                    self.undo_down(e, p);
                }
                kids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (b, _, p) in kids {
                    if !self.admissible(b) {
                        break;
                    }
                    self.apply_down(e, p);
                    self.dfs(depth + 1, 0);
                    self.undo_down(e, p);
                }
            }
        }
    }
}

/// Root subproblems for parallel search: every (server, uplink) pair of the
/// first sensor that fits, cheapest bound first.
fn root_tasks(inst: &Instance, shared: &Shared) -> Vec<(usize, usize)> {
    let first = inst.order[0];
    let mut probe = Search::new(inst, shared);
    let mut tasks = Vec::new();
    for opt in 0..inst.elids[first].options.len() {
        if !probe.loads.can_host(inst, 0, opt) {
            continue;
        }
        probe.apply_server(first, opt);
        let option = &inst.elids[first].options[opt];
        for &p in &option.up_order {
            if !probe.loads.path_fits(inst, &option.paths[p].links) {
                continue;
            }
            probe.apply_up(first, p);
            tasks.push((probe.bound(), opt, p));
            probe.undo_up(first, p);
        }
        probe.undo_server(first, opt);
    }
    tasks.sort_by(|a, b| a.0.total_cmp(&b.0));
    tasks.into_iter().map(|(_, o, p)| (o, p)).collect()
}

/// Run the search with `workers` threads. Returns every candidate within the
/// search slack of the best cost found.
pub(crate) fn run(
    inst: &Instance,
    shared: &Shared,
    seed: Option<(Vec<Choice>, f64)>,
    workers: usize,
) -> Vec<(f64, Vec<Choice>)> {
    let mut candidates = Vec::new();
    if let Some((choices, obj)) = seed {
        shared.offer(obj);
        candidates.push((obj, choices));
    }

    if workers <= 1 || inst.elids.is_empty() {
        let mut search = Search::new(inst, shared);
        search.dfs(0, 0);
        search.flush();
        candidates.extend(search.candidates);
    } else {
        let tasks = root_tasks(inst, shared);
        let first = inst.order[0];
        let next = AtomicUsize::new(0);
        let results: Vec<Vec<(f64, Vec<Choice>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut search = Search::new(inst, shared);
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            let Some(&(opt, up)) = tasks.get(i) else {
                                break;
                            };
                            search.apply_server(first, opt);
                            search.apply_up(first, up);
                            if search.admissible(search.bound()) {
                                search.dfs(0, 2);
                            }
                            search.undo_up(first, up);
                            search.undo_server(first, opt);
                            if shared.truncated() {
                                break;
                            }
                        }
                        search.flush();
                        search.candidates
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("search worker panicked"))
                .collect()
        });
        candidates.extend(results.into_iter().flatten());
    }

    let limit = shared.incumbent() + SEARCH_SLACK;
    candidates.retain(|(c, _)| *c <= limit);
    candidates
}
