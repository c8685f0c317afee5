//! Destination-sorted directed edge lists used by message passing and
//! edge-wise attention.

use crate::error::{Error, Result};

/// Directed edges `src -> dst` over `n` nodes, sorted by `(dst, src)`.
///
/// Sorting fixes the summation order of every per-destination reduction, so
/// aggregation results are bit-reproducible regardless of input edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeIndex {
    n: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    /// `offsets[v]..offsets[v + 1]` is the edge range with destination `v`.
    offsets: Vec<usize>,
}

impl EdgeIndex {
    /// Sorts `(src, dst)` pairs and returns the index together with the
    /// permutation applied (`sorted[i] = input[perm[i]]`), so callers can
    /// reorder any per-edge payload the same way.
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<(Self, Vec<usize>)> {
        for &(u, v) in pairs {
            for endpoint in [u, v] {
                if endpoint >= n {
                    return Err(Error::Index {
                        what: "edge endpoint",
                        index: endpoint,
                        bound: n,
                    });
                }
            }
        }
        let mut perm: Vec<usize> = (0..pairs.len()).collect();
        perm.sort_by_key(|&i| (pairs[i].1, pairs[i].0, i));
        let src: Vec<usize> = perm.iter().map(|&i| pairs[i].0).collect();
        let dst: Vec<usize> = perm.iter().map(|&i| pairs[i].1).collect();
        let mut offsets = vec![0usize; n + 1];
        for &v in &dst {
            offsets[v + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        Ok((Self { n, src, dst, offsets }, perm))
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.src.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    #[inline]
    pub fn src(&self) -> &[usize] {
        &self.src
    }

    #[inline]
    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    /// Edge positions whose destination is `v`.
    #[inline]
    pub fn incoming(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }
}

/// Weighted destination-sorted adjacency: `out[v] = Σ w(u→v) · h[u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdj {
    index: EdgeIndex,
    weight: Vec<f64>,
}

impl SparseAdj {
    pub fn new(n: usize, pairs: &[(usize, usize)], weights: &[f64]) -> Result<Self> {
        if weights.len() != pairs.len() {
            return Err(Error::Dimension {
                op: "sparse_adj",
                left: (pairs.len(), 2),
                right: (weights.len(), 1),
            });
        }
        let (index, perm) = EdgeIndex::new(n, pairs)?;
        let weight = perm.iter().map(|&i| weights[i]).collect();
        Ok(Self { index, weight })
    }

    #[inline]
    pub fn index(&self) -> &EdgeIndex {
        &self.index
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.index.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_by_destination_then_source() {
        let (idx, perm) = EdgeIndex::new(3, &[(2, 0), (1, 2), (0, 0), (0, 2)]).unwrap();
        assert_eq!(idx.dst(), &[0, 0, 2, 2]);
        assert_eq!(idx.src(), &[0, 2, 0, 1]);
        assert_eq!(perm, vec![2, 0, 3, 1]);
        assert_eq!(idx.incoming(1), 2..2);
        assert_eq!(idx.incoming(2), 2..4);
    }

    #[test]
    fn rejects_out_of_range_endpoint() {
        let err = EdgeIndex::new(2, &[(0, 2)]).unwrap_err();
        assert!(matches!(err, Error::Index { index: 2, bound: 2, .. }));
    }
}
