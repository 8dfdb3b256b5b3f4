//! Bundled reference topologies. See `fixtures/MANIFEST.md` at the
//! repository root for how they were put together.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::{Assignment, ConstraintFamily, ElidRoute};
use crate::model::{validate_topology, NodeId, Role, Topology, GIGABYTE, MEGABYTE};
use crate::paths::routing_paths;
use crate::topology_file::parse_topology;

pub const SPARSE: &str = include_str!("../../../fixtures/sparse.topo");
pub const DENSE: &str = include_str!("../../../fixtures/dense.topo");
pub const TINY: &str = include_str!("../../../fixtures/tiny.topo");

fn load(name: &str, text: &str) -> Topology {
    parse_topology(text).unwrap_or_else(|e| panic!("bundled fixture {name} is malformed: {e}"))
}

/// Ten nodes: four sensors, three routers, two MEC devices, one cloud.
pub fn sparse() -> Topology {
    load("sparse", SPARSE)
}

/// The sparse node set with seven extra links.
pub fn dense() -> Topology {
    load("dense", DENSE)
}

/// Two sensors, one router, one MEC, one cloud.
pub fn tiny() -> Topology {
    load("tiny", TINY)
}

/// Sensors 1 and 2 behind router 3; MEC 4 holds exactly one job, cloud 5
/// holds both. Links 1-3, 2-3, 3-4, 3-5, 4-5.
pub fn constraint_topology() -> Topology {
    Topology::builder()
        .elid(1, 100 * MEGABYTE)
        .elid(2, 100 * MEGABYTE)
        .router(3)
        .mec(4, 100 * MEGABYTE, 250e6)
        .cloud(5, 256 * GIGABYTE, 55e9)
        .link(1, 3, 1e9)
        .link(2, 3, 1e9)
        .link(3, 4, 5e9)
        .link(3, 5, 1e9)
        .link(4, 5, 1e9)
        .beta(0.8)
        .build()
}

fn ids(path: &[u32]) -> Vec<NodeId> {
    path.iter().map(|&i| NodeId(i)).collect()
}

/// A feasible assignment on [`constraint_topology`] (sensor 1 at the MEC,
/// sensor 2 in the cloud) and, for every constraint family, a mutation of
/// it that breaks that family and no other.
pub fn constraint_mutations() -> (Assignment, Vec<(ConstraintFamily, Assignment)>) {
    let route = |up: &[u32], down: &[u32]| ElidRoute::from_paths(&ids(up), &ids(down));
    let e1 = route(&[1, 3, 4], &[4, 3, 1]);
    let e2 = route(&[2, 3, 5], &[5, 3, 2]);
    let with_e1 =
        |r: ElidRoute| Assignment::new(BTreeMap::from([(NodeId(1), r), (NodeId(2), e2.clone())]));
    let base = with_e1(e1.clone());

    let mut dropped = e1.clone();
    dropped
        .uplink
        .retain(|&edge| edge != (NodeId(3), NodeId(4)));

    let misdelivered = route(&[1, 3, 4], &[4, 3, 2]);

    let mut shortcut = e1.clone();
    shortcut.uplink = vec![(NodeId(1), NodeId(4))];

    let mut both_ways = e1.clone();
    both_ways
        .uplink
        .extend([(NodeId(4), NodeId(5)), (NodeId(5), NodeId(4))]);

    let crowded = Assignment::new(BTreeMap::from([
        (NodeId(1), e1.clone()),
        (NodeId(2), route(&[2, 3, 4], &[4, 3, 2])),
    ]));

    let miscounted = base
        .clone()
        .with_declared_jobs(BTreeMap::from([(NodeId(4), 2), (NodeId(5), 1)]));

    let unprocessed = ElidRoute {
        processing: Vec::new(),
        uplink: vec![(NodeId(1), NodeId(3)), (NodeId(3), NodeId(2))],
        downlink: vec![(NodeId(2), NodeId(3)), (NodeId(3), NodeId(1))],
    };

    let mutations = vec![
        (ConstraintFamily::FlowConservation, with_e1(dropped)),
        (ConstraintFamily::UplinkDownlink, with_e1(misdelivered)),
        (ConstraintFamily::TopologyLimit, with_e1(shortcut)),
        (ConstraintFamily::DoubleCounting, with_e1(both_ways)),
        (ConstraintFamily::Ram, crowded),
        (ConstraintFamily::JobCount, miscounted),
        (ConstraintFamily::Processing, with_e1(unprocessed)),
    ];
    (base, mutations)
}

/// Upper limit on the number of assignments an oracle would enumerate for a
/// [`random_small`] instance.
pub const RANDOM_MAX_ASSIGNMENTS: u64 = 20_000;

/// Number of (server, uplink, downlink) combinations across all sensors,
/// saturating.
pub fn assignment_count(topology: &Topology) -> u64 {
    let servers: Vec<_> = topology
        .server_ids()
        .into_iter()
        .filter(|&s| topology.role(s).is_some_and(Role::can_process))
        .collect();
    let mut total: u64 = 1;
    for e in topology.elid_ids() {
        let mut per_elid: u64 = 0;
        for &s in &servers {
            let up = routing_paths(topology, e, s, None).len() as u64;
            let down = routing_paths(topology, s, e, None).len() as u64;
            per_elid = per_elid.saturating_add(up.saturating_mul(down));
        }
        total = total.saturating_mul(per_elid);
    }
    total
}

/// A valid random instance within the oracle guard rails and small enough
/// to enumerate (see [`RANDOM_MAX_ASSIGNMENTS`]). Same seed, same instance.
pub fn random_small(seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let t = random_candidate(&mut rng);
        if validate_topology(&t).is_empty() && assignment_count(&t) <= RANDOM_MAX_ASSIGNMENTS {
            return t;
        }
    }
}

fn random_candidate(rng: &mut ChaCha8Rng) -> Topology {
    let elids = rng.gen_range(1..=4u32);
    let routers = rng.gen_range(0..=2u32);
    let mecs = rng.gen_range(1..=2u32);
    let clouds = rng.gen_range(0..=1u32);
    let bandwidths = [1e9, 5e9, 10e9];

    let mut b = Topology::builder().beta(*[0.5, 0.8, 1.0].choose(rng).unwrap());
    let mut max_rate = 0;
    for id in 1..=elids {
        let rate = rng.gen_range(1..=10u64) * 10 * MEGABYTE;
        max_rate = max_rate.max(rate);
        b = b.elid_with_priority(id, rate, f64::from(rng.gen_range(1..=4u32)));
    }
    let mut backbone = Vec::new();
    let mut next = elids + 1;
    for _ in 0..routers {
        b = b.router(next);
        backbone.push(next);
        next += 1;
    }
    for _ in 0..mecs {
        // between one and three of the largest jobs, so RAM sometimes binds
        let ram = max_rate * rng.gen_range(1..=3u64);
        b = b.mec(next, ram, *[50e6, 250e6, 1e9].choose(rng).unwrap());
        backbone.push(next);
        next += 1;
    }
    for _ in 0..clouds {
        b = b.cloud(next, 256 * GIGABYTE, 55e9);
        backbone.push(next);
        next += 1;
    }
    backbone.shuffle(rng);

    // random tree over the backbone plus at most one chord
    let mut pairs = Vec::new();
    for k in 1..backbone.len() {
        let parent = backbone[rng.gen_range(0..k)];
        pairs.push((parent, backbone[k]));
    }
    if backbone.len() >= 3 && rng.gen_bool(0.5) {
        let a = backbone[rng.gen_range(0..backbone.len())];
        let c = backbone[rng.gen_range(0..backbone.len())];
        if a != c && !pairs.contains(&(a, c)) && !pairs.contains(&(c, a)) {
            pairs.push((a, c));
        }
    }
    for e in 1..=elids {
        let attach = rng.gen_range(1..=2usize).min(backbone.len());
        for &n in backbone.choose_multiple(rng, attach) {
            pairs.push((e, n));
        }
    }
    for (x, y) in pairs {
        b = b.link(x, y, *bandwidths.choose(rng).unwrap());
    }
    b.build()
}
