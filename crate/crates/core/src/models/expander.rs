//! Random expander graphs as unions of Hamiltonian cycles.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Union of `degree / 2` independent random Hamiltonian cycles on `0..n`,
/// returned as deduplicated undirected edges `(u, v)` with `u < v`, sorted.
///
/// Every node ends with degree at most `degree` (less where cycles overlap),
/// and the result is connected because each cycle alone spans all nodes.
pub fn build_expander(n: usize, degree: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if degree < 2 || !degree.is_multiple_of(2) {
        return Err(Error::config(format!("expander degree {degree} must be even and >= 2")));
    }
    if n < 3 {
        return Err(Error::config(format!("expander needs at least 3 nodes, got {n}")));
    }
    let mut rng = rng::stream(seed, "expander", 0);
    let mut edges = BTreeSet::new();
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..degree / 2 {
        perm.shuffle(&mut rng);
        for i in 0..n {
            let (a, b) = (perm[i], perm[(i + 1) % n]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    Ok(edges.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degrees(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
        let mut d = vec![0; n];
        for &(u, v) in edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn single_cycle_on_five_nodes() {
        let e = build_expander(5, 2, 1).unwrap();
        assert_eq!(e.len(), 5);
        assert!(degrees(5, &e).iter().all(|&d| d == 2));
        assert!(connected(5, &e));
    }

    #[test]
    fn degree_four_on_fifty_nodes() {
        let e = build_expander(50, 4, 3).unwrap();
        assert!(connected(50, &e));
        assert!(degrees(50, &e).iter().all(|d| (2..=4).contains(d)));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(build_expander(10, 3, 0), Err(Error::Config(_))));
        assert!(matches!(build_expander(10, 0, 0), Err(Error::Config(_))));
        assert!(matches!(build_expander(2, 2, 0), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_and_connected_over_seeds() {
        for seed in 0..100 {
            let e = build_expander(40, 4, seed).unwrap();
            assert_eq!(e, build_expander(40, 4, seed).unwrap());
            assert!(connected(40, &e));
            assert!(e.iter().all(|&(u, v)| u < v));
        }
    }
}
