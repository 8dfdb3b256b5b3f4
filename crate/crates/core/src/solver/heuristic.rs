//! Greedy construction followed by first-improvement local search.
//!
//! Neighbourhoods are scanned in a fixed order (server move, reroute, swap);
//! the seed only permutes the order in which sensors are visited within a
//! pass.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::latency::OBJECTIVE_TOLERANCE;

use super::instance::{Choice, Instance, Loads};

/// Paths per server considered when rerouting.
const REROUTE_CANDIDATES: usize = 64;
const MAX_IMPROVEMENTS: usize = 10_000;

fn loads_without(inst: &Instance, choices: &[Choice], skip: &[usize]) -> Loads {
    let mut loads = Loads::new(inst);
    for (e, c) in choices.iter().enumerate() {
        if !skip.contains(&e) {
            loads.add(inst, e, c);
        }
    }
    loads
}

/// Cheapest uplink then downlink to option `opt` given the other sensors'
/// loads. `None` if no path fits the channel supply.
fn best_paths(inst: &Instance, loads: &Loads, e: usize, opt: usize) -> Option<Choice> {
    let option = &inst.elids[e].options[opt];
    let size = inst.elids[e].size;
    let down_size = inst.beta * size;

    let mut best_up: Option<(f64, usize)> = None;
    for &p in option.up_order.iter().take(REROUTE_CANDIDATES) {
        let links = &option.paths[p].links;
        if !links
            .iter()
            .all(|&l| inst.fits(loads.up[l] + 1, loads.down[l]))
        {
            continue;
        }
        let cost: f64 = links
            .iter()
            .map(|&l| inst.uplink_hop(size, l, loads.up[l] + 1, loads.down[l]))
            .sum();
        if best_up.is_none_or(|(b, _)| cost < b) {
            best_up = Some((cost, p));
        }
    }
    let (_, up) = best_up?;

    let mut with_up = loads.clone();
    for &l in &option.paths[up].links {
        with_up.up[l] += 1;
    }
    let mut best_down: Option<(f64, usize)> = None;
    for &p in option.down_order.iter().take(REROUTE_CANDIDATES) {
        let links = &option.paths[p].links;
        if !links
            .iter()
            .all(|&l| inst.fits(with_up.up[l], with_up.down[l] + 1))
        {
            continue;
        }
        let cost: f64 = links
            .iter()
            .map(|&l| inst.downlink_hop(down_size, l, with_up.up[l], with_up.down[l] + 1))
            .sum();
        if best_down.is_none_or(|(b, _)| cost < b) {
            best_down = Some((cost, p));
        }
    }
    let (_, down) = best_down?;
    Some(Choice { opt, up, down })
}

fn greedy(inst: &Instance) -> Option<Vec<Choice>> {
    let mut order: Vec<usize> = (0..inst.elids.len()).collect();
    order.sort_by(|&a, &b| {
        inst.elids[a]
            .priority
            .total_cmp(&inst.elids[b].priority)
            .then(a.cmp(&b))
    });

    let mut decided: Vec<Option<Choice>> = vec![None; inst.elids.len()];
    let mut loads = Loads::new(inst);
    for e in order {
        let mut best: Option<(f64, Choice)> = None;
        for opt in 0..inst.elids[e].options.len() {
            if !loads.can_host(inst, e, opt) {
                continue;
            }
            let mut trial = loads.clone();
            trial.add_server(inst, e, opt);
            let Some(choice) = best_paths(inst, &trial, e, opt) else {
                continue;
            };
            trial.add_up(inst, e, &choice);
            trial.add_down(inst, e, &choice);
            let cost: f64 = decided
                .iter()
                .enumerate()
                .filter_map(|(d, c)| c.map(|c| (d, c)))
                .chain(std::iter::once((e, choice)))
                .map(|(d, c)| inst.elids[d].priority * trial.elid_cost(inst, d, &c))
                .sum();
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, choice));
            }
        }
        let (_, choice) = best?;
        loads.add(inst, e, &choice);
        decided[e] = Some(choice);
    }
    decided.into_iter().collect()
}

struct Improver<'a> {
    inst: &'a Instance,
    choices: Vec<Choice>,
    objective: f64,
}

impl Improver<'_> {
    fn try_accept(&mut self, candidate: Vec<Choice>) -> bool {
        match self.inst.objective(&candidate) {
            Some(obj) if obj < self.objective - OBJECTIVE_TOLERANCE => {
                self.choices = candidate;
                self.objective = obj;
                true
            }
            _ => false,
        }
    }

    fn server_move(&mut self, order: &[usize]) -> bool {
        for &e in order {
            let loads = loads_without(self.inst, &self.choices, &[e]);
            for opt in 0..self.inst.elids[e].options.len() {
                if opt == self.choices[e].opt || !loads.can_host(self.inst, e, opt) {
                    continue;
                }
                let mut trial = loads.clone();
                trial.add_server(self.inst, e, opt);
                if let Some(choice) = best_paths(self.inst, &trial, e, opt) {
                    let mut candidate = self.choices.clone();
                    candidate[e] = choice;
                    if self.try_accept(candidate) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn reroute(&mut self, order: &[usize]) -> bool {
        for &e in order {
            let current = self.choices[e];
            let option = &self.inst.elids[e].options[current.opt];
            for &p in option.up_order.iter().take(REROUTE_CANDIDATES) {
                if p != current.up {
                    let mut candidate = self.choices.clone();
                    candidate[e].up = p;
                    if self.try_accept(candidate) {
                        return true;
                    }
                }
            }
            for &p in option.down_order.iter().take(REROUTE_CANDIDATES) {
                if p != current.down {
                    let mut candidate = self.choices.clone();
                    candidate[e].down = p;
                    if self.try_accept(candidate) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn swap(&mut self, order: &[usize]) -> bool {
        let inst = self.inst;
        for (i, &a) in order.iter().enumerate() {
            for &b in &order[i + 1..] {
                let (sa, sb) = (
                    inst.server_of(a, &self.choices[a]),
                    inst.server_of(b, &self.choices[b]),
                );
                if sa == sb {
                    continue;
                }
                let find =
                    |e: usize, s: usize| inst.elids[e].options.iter().position(|o| o.server == s);
                let (Some(opt_a), Some(opt_b)) = (find(a, sb), find(b, sa)) else {
                    continue;
                };
                let mut loads = loads_without(inst, &self.choices, &[a, b]);
                if !loads.can_host(inst, a, opt_a) {
                    continue;
                }
                loads.add_server(inst, a, opt_a);
                let Some(ca) = best_paths(inst, &loads, a, opt_a) else {
                    continue;
                };
                loads.add_up(inst, a, &ca);
                loads.add_down(inst, a, &ca);
                if !loads.can_host(inst, b, opt_b) {
                    continue;
                }
                loads.add_server(inst, b, opt_b);
                let Some(cb) = best_paths(inst, &loads, b, opt_b) else {
                    continue;
                };
                let mut candidate = self.choices.clone();
                candidate[a] = ca;
                candidate[b] = cb;
                if self.try_accept(candidate) {
                    return true;
                }
            }
        }
        false
    }
}

/// Deterministic for a given seed. `None` when greedy construction finds no
/// feasible assignment.
pub(crate) fn search(inst: &Instance, seed: u64) -> Option<(Vec<Choice>, f64)> {
    let start = greedy(inst)?;
    let objective = inst.objective(&start)?;
    let mut improver = Improver {
        inst,
        choices: start,
        objective,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..inst.elids.len()).collect();
    for _ in 0..MAX_IMPROVEMENTS {
        order.shuffle(&mut rng);
        let improved =
            improver.server_move(&order) || improver.reroute(&order) || improver.swap(&order);
        if !improved {
            break;
        }
    }
    Some((improver.choices, improver.objective))
}
