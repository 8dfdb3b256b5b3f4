//! Simple-path enumeration.

use crate::model::{NodeId, Role, Topology};

/// All simple paths from `from` to `to` with at most `max_hops` edges, visiting
/// only intermediate nodes for which `transit` holds. Neighbours are expanded
/// in adjacency order, so the output order is deterministic.
pub fn all_simple_paths(
    adjacency: &[Vec<usize>],
    from: usize,
    to: usize,
    max_hops: usize,
    transit: &dyn Fn(usize) -> bool,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if from == to {
        return out;
    }
    let mut visited = vec![false; adjacency.len()];
    let mut path = vec![from];
    visited[from] = true;
    // explicit stack of neighbour cursors
    let mut cursors = vec![0usize];
    while let Some(cursor) = cursors.last_mut() {
        let current = *path.last().unwrap();
        let Some(&next) = adjacency[current].get(*cursor) else {
            cursors.pop();
            visited[current] = false;
            path.pop();
            continue;
        };
        *cursor += 1;
        if visited[next] {
            continue;
        }
        if next == to {
            let mut p = path.clone();
            p.push(to);
            out.push(p);
            continue;
        }
        if path.len() < max_hops && transit(next) {
            visited[next] = true;
            path.push(next);
            cursors.push(0);
        }
    }
    out
}

/// Simple paths between two nodes of a topology that never pass through a
/// sensor. `max_hops` defaults to the node count.
pub fn routing_paths(
    topology: &Topology,
    from: NodeId,
    to: NodeId,
    max_hops: Option<usize>,
) -> Vec<Vec<NodeId>> {
    let ids: Vec<NodeId> = topology.nodes().iter().map(|n| n.id).collect();
    let index = |id: NodeId| ids.iter().position(|&n| n == id);
    let (Some(f), Some(t)) = (index(from), index(to)) else {
        return Vec::new();
    };
    let adjacency: Vec<Vec<usize>> = ids
        .iter()
        .map(|&id| topology.neighbours(id).filter_map(index).collect())
        .collect();
    let transit = |i: usize| topology.role(ids[i]) != Some(Role::Elid);
    all_simple_paths(&adjacency, f, t, max_hops.unwrap_or(ids.len()), &transit)
        .into_iter()
        .map(|p| p.into_iter().map(|i| ids[i]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect()
    }

    #[test]
    fn complete_graph_path_count() {
        // paths 0 -> 1 in K_n: sum over k intermediates of (n-2)!/(n-2-k)!
        for n in 2..=7usize {
            let expected: usize = (0..=n - 2)
                .map(|k| ((n - 1 - k)..=(n - 2)).product::<usize>())
                .sum();
            let got = all_simple_paths(&complete(n), 0, 1, n, &|_| true).len();
            assert_eq!(got, expected, "K_{n}");
        }
    }

    #[test]
    fn hop_limit() {
        let adj = complete(5);
        let paths = all_simple_paths(&adj, 0, 1, 1, &|_| true);
        assert_eq!(paths, vec![vec![0, 1]]);
        let two = all_simple_paths(&adj, 0, 1, 2, &|_| true);
        assert_eq!(two.len(), 4);
        assert!(two.iter().all(|p| p.len() <= 3));
    }

    #[test]
    fn transit_filter_and_trivial() {
        // 0 - 2 - 1 and 0 - 3 - 1; node 3 may not be crossed
        let adj = vec![vec![2, 3], vec![2, 3], vec![0, 1], vec![0, 1]];
        let paths = all_simple_paths(&adj, 0, 1, 4, &|n| n != 3);
        assert_eq!(paths, vec![vec![0, 2, 1]]);
        assert!(all_simple_paths(&adj, 0, 0, 4, &|_| true).is_empty());
    }

    #[test]
    fn sensors_are_not_transit() {
        let t = Topology::builder()
            .elid(1, 1)
            .elid(2, 1)
            .router(3)
            .mec(4, 10, 1.0)
            .link(1, 2, 1.0)
            .link(2, 4, 1.0)
            .link(1, 3, 1.0)
            .link(3, 4, 1.0)
            .build();
        let paths = routing_paths(&t, NodeId(1), NodeId(4), None);
        assert_eq!(paths, vec![vec![NodeId(1), NodeId(3), NodeId(4)]]);
    }
}
