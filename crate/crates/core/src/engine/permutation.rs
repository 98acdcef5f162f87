use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A bijection on `0..D`, stored as its image sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(d: usize) -> Self {
        Self((0..d).collect())
    }

    /// Validates that `values` is a bijection on `0..values.len()`.
    pub fn new(values: Vec<usize>) -> Result<Self> {
        let d = values.len();
        let mut seen = vec![false; d];
        for (pos, &v) in values.iter().enumerate() {
            if v >= d || seen[v] {
                return Err(Error::InvalidArgument(format!(
                    "not a permutation: value {v} at position {pos}"
                )));
            }
            seen[v] = true;
        }
        Ok(Self(values))
    }

    /// From 1-based values, as printed for humans.
    pub fn from_one_based(values: &[usize]) -> Result<Self> {
        if values.contains(&0) {
            return Err(Error::InvalidArgument("1-based permutation contains 0".into()));
        }
        Self::new(values.iter().map(|v| v - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|v| v + 1).collect()
    }

    /// In-place interchange of positions `i` and `j`.
    pub(crate) fn swap(&mut self, i: usize, j: usize) {
        self.0.swap(i, j);
    }
}

impl core::ops::Index<usize> for Permutation {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Number of positions at which the two permutations differ.
pub fn hamming(p: &Permutation, q: &Permutation) -> Result<usize> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(p.0.iter().zip(&q.0).filter(|(a, b)| a != b).count())
}

/// Copy of `p` with the values at positions `i` and `j` exchanged.
pub fn interchange(p: &Permutation, i: usize, j: usize) -> Result<Permutation> {
    if i == j {
        return Err(Error::InvalidArgument(format!(
            "interchange needs two distinct positions, got {i} twice"
        )));
    }
    if i >= p.len() || j >= p.len() {
        return Err(Error::InvalidArgument(format!(
            "interchange ({i}, {j}) outside 0..{}",
            p.len()
        )));
    }
    let mut out = p.clone();
    out.swap(i, j);
    Ok(out)
}

/// Interchanges turning `from` into `to`, at most `D − 1` of them, read off
/// the cycle decomposition of `to ∘ from⁻¹`.
pub fn interchange_path(from: &Permutation, to: &Permutation) -> Result<Vec<(usize, usize)>> {
    if from.len() != to.len() {
        return Err(Error::DimensionMismatch {
            expected: from.len(),
            found: to.len(),
        });
    }
    let d = from.len();
    // where each value currently sits
    let mut pos = vec![0usize; d];
    let mut cur = from.clone();
    for (i, &v) in cur.0.iter().enumerate() {
        pos[v] = i;
    }
    let mut swaps = Vec::new();
    for i in 0..d {
        let want = to.0[i];
        if cur.0[i] != want {
            let j = pos[want];
            let displaced = cur.0[i];
            cur.swap(i, j);
            pos[displaced] = j;
            pos[want] = i;
            swaps.push((i, j));
        }
    }
    Ok(swaps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_one_based(v).unwrap()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&p(&[1, 2, 3]), &p(&[1, 2, 3])).unwrap(), 0);
        assert_eq!(hamming(&p(&[1, 2, 3]), &p(&[2, 1, 3])).unwrap(), 2);
        assert_eq!(hamming(&p(&[1, 2, 3, 4]), &p(&[4, 3, 2, 1])).unwrap(), 4);
        assert!(hamming(&p(&[1, 2]), &p(&[1, 2, 3])).is_err());
    }

    #[test]
    fn interchange_examples() {
        let a = p(&[1, 2, 3]);
        let b = interchange(&a, 0, 2).unwrap();
        assert_eq!(b, p(&[3, 2, 1]));
        assert_eq!(a, p(&[1, 2, 3]));
        assert_eq!(interchange(&b, 0, 2).unwrap(), a);
        assert!(interchange(&a, 1, 1).is_err());
        assert!(interchange(&a, 1, 3).is_err());
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(Permutation::from_one_based(&[0, 1]).is_err());
    }

    #[test]
    fn path_reaches_target() {
        let from = p(&[3, 1, 2, 5, 4]);
        let to = p(&[1, 2, 3, 4, 5]);
        let path = interchange_path(&from, &to).unwrap();
        assert!(path.len() <= 4);
        let mut cur = from;
        for (i, j) in path {
            cur = interchange(&cur, i, j).unwrap();
        }
        assert_eq!(cur, to);
    }
}
