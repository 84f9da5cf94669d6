use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

/// Fill-reducing ordering by greedy minimum degree on the explicit elimination
/// graph. Ties go to the lowest index so the result is deterministic.
///
/// `edges` are off-diagonal pairs of a symmetric pattern. Returns `perm` with
/// `perm[new] = old`.
// TODO: switch to quotient-graph elimination with element absorption; explicit
// cliques cost cubic time once a few thousand columns merge, which the full
// case25 planning model reaches.
pub(crate) fn minimum_degree(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in edges {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_center_goes_last() {
        let edges: Vec<_> = (1..6).map(|i| (0, i)).collect();
        let p = minimum_degree(6, &edges);
        assert_eq!(p.len(), 6);
        // Once four leaves are gone the centre ties with the last leaf.
        assert!(p[4] == 0 || p[5] == 0, "{p:?}");
    }

    #[test]
    fn is_a_permutation() {
        let edges = vec![(0, 3), (1, 3), (2, 4), (3, 4), (0, 1)];
        let mut p = minimum_degree(5, &edges);
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }
}
