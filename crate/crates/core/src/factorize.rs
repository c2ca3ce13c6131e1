//! Tame factorization through a canonical LS, and the mixed-radix bijection
//! between Z_|G| and index vectors.

use serde::{Deserialize, Serialize};

use crate::error::{MlsError, Result};
use crate::lscore::{group_member, CanonicalLs, OpCount};
use crate::matgroups::Matrix;

/// One index per block.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexVector(pub Vec<usize>);

impl IndexVector {
    pub fn zero(blocks: usize) -> Self {
        IndexVector(vec![0; blocks])
    }

    pub fn check(&self, sizes: &[usize]) -> Result<()> {
        if self.0.len() != sizes.len() {
            return Err(MlsError::DimensionMismatch { expected: sizes.len(), found: self.0.len() });
        }
        match self.0.iter().zip(sizes).position(|(&i, &s)| i >= s) {
            Some(k) => Err(MlsError::OutOfRange(format!("index {} in block {k} of size {}", self.0[k], sizes[k]))),
            None => Ok(()),
        }
    }
}

/// Σ iₖ·∏_{j<k} sⱼ: the first block is the least significant digit.
pub fn rank(idx: &[usize], sizes: &[usize]) -> Result<u64> {
    IndexVector(idx.to_vec()).check(sizes)?;
    let mut acc = 0u64;
    let mut w = 1u64;
    for (&i, &s) in idx.iter().zip(sizes) {
        acc += i as u64 * w;
        w *= s as u64;
    }
    Ok(acc)
}

pub fn unrank(mut n: u64, sizes: &[usize]) -> Result<Vec<usize>> {
    let total: u64 = sizes.iter().map(|&s| s as u64).product();
    if n >= total {
        return Err(MlsError::OutOfRange(format!("{n} is not below {total}")));
    }
    Ok(sizes
        .iter()
        .map(|&s| {
            let d = (n % s as u64) as usize;
            n /= s as u64;
            d
        })
        .collect())
}

/// Indices with g = ∏ blocks[k][iₖ], found by table lookups, a discrete log
/// and recursion. The recomposition is checked before returning.
pub fn tame_factor(g: &Matrix, c: &CanonicalLs) -> Result<IndexVector> {
    tame_factor_counted(g, c, &mut OpCount::default())
}

pub fn tame_factor_counted(g: &Matrix, c: &CanonicalLs, ops: &mut OpCount) -> Result<IndexVector> {
    let desc = c.descriptor();
    if !group_member(&desc, g, &c.fq)? {
        return Err(MlsError::NotInGroup(desc.to_string()));
    }
    let idx = c.decode(g, ops)?;
    let f = &*c.fq;
    let back = c.ls.product(&idx, f)?;
    let same = back == *g || (desc.family.is_projective() && back == g.neg(f));
    if !same {
        return Err(MlsError::ConstructionMismatch("decoded indices do not recompose to the element".into()));
    }
    Ok(IndexVector(idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[1, 2, 1], &[2, 3, 2]).unwrap(), 11);
        assert_eq!(unrank(0, &[2, 3, 2]).unwrap(), vec![0, 0, 0]);
        assert!(unrank(12, &[2, 3, 2]).is_err());
        assert!(rank(&[2, 0, 0], &[2, 3, 2]).is_err());
        for n in 0..8 {
            assert_eq!(rank(&unrank(n, &[2, 2, 2]).unwrap(), &[2, 2, 2]).unwrap(), n);
        }
    }

    proptest! {
        #[test]
        fn rank_unrank_inverse(sizes in proptest::collection::vec(1usize..7, 0..6), seed in any::<u64>()) {
            let total: u64 = sizes.iter().map(|&s| s as u64).product();
            let n = seed % total;
            let v = unrank(n, &sizes).unwrap();
            prop_assert_eq!(rank(&v, &sizes).unwrap(), n);
        }
    }
}
