//! Logarithmic signatures: the data type, the length bound, cyclic sets,
//! projection to quotients and verification.

mod canonical;
mod hermitian;
mod parabolic;
mod search;
mod spreadcheck;
mod verify;

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::error::{MlsError, Result};
use crate::fields::Fq;
use crate::forms::StdForm;
use crate::matgroups::matrix::MatrixRepr;
use crate::matgroups::{Family, GroupDescriptor, Matrix};

pub use canonical::{
    canonical_ls, canonical_ls_seeded, check_injectivity, project_ls, spread_witness, CanonicalLs, Center, ConstructionReport,
    LevelReport, OpCount, SpreadWitness, DEFAULT_SEED,
};
pub use parabolic::{enumerate_orthogonal, parabolic_ls, ParabolicLs};
pub use search::{fallback_search, FallbackWitness};
pub use spreadcheck::{spread_check, SpreadCheck, CLASSICAL_LIMIT};
pub use verify::{verify_ls, Collision, VerifyMode, VerifyOptions, VerifyReport};

/// Blocks of group elements such that every element of `group` is a unique
/// product taking one element from each block, left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSignature {
    pub group: GroupDescriptor,
    pub blocks: Vec<Vec<Matrix>>,
    pub claimed_order: u64,
}

#[derive(Serialize, Deserialize)]
struct LsFile {
    group: GroupDescriptor,
    claimed_order: u64,
    blocks: Vec<Vec<MatrixRepr>>,
}

impl LogSignature {
    /// Checks that no block is empty and that block sizes multiply to the claimed order.
    pub fn new(group: GroupDescriptor, blocks: Vec<Vec<Matrix>>, claimed_order: u64) -> Result<Self> {
        let ls = LogSignature { group, blocks, claimed_order };
        ls.check_shape()?;
        Ok(ls)
    }

    pub fn check_shape(&self) -> Result<()> {
        if let Some(i) = self.blocks.iter().position(Vec::is_empty) {
            return Err(MlsError::InvalidParameter(format!("block {i} is empty")));
        }
        let n = group_dim(&self.group);
        if let Some(g) = self.blocks.iter().flatten().find(|g| g.n() != n) {
            return Err(MlsError::DimensionMismatch { expected: n, found: g.n() });
        }
        let prod = self
            .sizes()
            .iter()
            .try_fold(1u64, |acc, &s| acc.checked_mul(s as u64))
            .ok_or_else(|| MlsError::InvalidParameter("block sizes overflow".into()))?;
        if prod != self.claimed_order {
            return Err(MlsError::InvalidParameter(format!(
                "block sizes multiply to {prod}, claimed order is {}",
                self.claimed_order
            )));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// l(α): the sum of block sizes.
    pub fn length(&self) -> u64 {
        self.blocks.iter().map(|b| b.len() as u64).sum()
    }

    pub fn dim(&self) -> usize {
        group_dim(&self.group)
    }

    pub fn field(&self) -> Result<Fq> {
        let (p, e) = self.group.p_e();
        Fq::new(p, e)
    }

    /// The product a_{1,i₁} ⋯ a_{s,i_s}.
    pub fn product(&self, idx: &[usize], f: &Fq) -> Result<Matrix> {
        if idx.len() != self.blocks.len() {
            return Err(MlsError::DimensionMismatch { expected: self.blocks.len(), found: idx.len() });
        }
        let mut g = Matrix::identity(self.dim());
        for (k, (&i, b)) in idx.iter().zip(&self.blocks).enumerate() {
            let x = b.get(i).ok_or_else(|| MlsError::OutOfRange(format!("index {i} in block {k} of size {}", b.len())))?;
            g = g.mul(x, f);
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = self.field()?;
        let file = LsFile {
            group: self.group,
            claimed_order: self.claimed_order,
            blocks: self.blocks.iter().map(|b| b.iter().map(|g| g.to_repr(&f)).collect()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses an LS file. Shape invariants are left to the verifier.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: LsFile = serde_json::from_str(s)?;
        file.group.validate()?;
        let (p, e) = file.group.p_e();
        let f = Fq::new(p, e)?;
        let blocks = file
            .blocks
            .iter()
            .map(|b| b.iter().map(|r| Matrix::from_repr(r, &f)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(LogSignature { group: file.group, blocks, claimed_order: file.claimed_order })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Matrix size for a descriptor.
pub fn group_dim(desc: &GroupDescriptor) -> usize {
    desc.n
}

/// Membership in the group a descriptor names.
pub fn group_member(desc: &GroupDescriptor, g: &Matrix, f: &Arc<Fq>) -> Result<bool> {
    if g.n() != desc.n {
        return Ok(false);
    }
    Ok(match desc.family {
        Family::GL => g.det(f) != 0,
        Family::Orth { flavor, kind, projective } => {
            let form = StdForm::new(kind, desc.n, f.clone())?;
            if projective {
                form.member_projective(g, flavor)
            } else {
                form.member(g, flavor)
            }
        }
        Family::Parabolic(kind) => {
            let form = StdForm::new(kind, desc.n, f.clone())?;
            let k = desc.k.unwrap_or(1);
            form.member(g, crate::matgroups::Flavor::O)
                && (0..k).all(|j| (k..desc.n).all(|i| g.get(i, j) == 0))
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LengthBound {
    pub order: u64,
    pub bound: u64,
}

/// Σ aⱼpⱼ over the prime factorization ∏ pⱼ^{aⱼ} of the order.
pub fn min_length_bound(order: u64) -> Result<LengthBound> {
    if order == 0 {
        return Err(MlsError::InvalidParameter("group order must be positive".into()));
    }
    let bound = factorize(order).into_iter().map(|(p, a)| p * a as u64).sum();
    Ok(LengthBound { order, bound })
}

/// The set {xⁱ : 0 ≤ i < s} split into blocks {x^{j·M_t} : j < r_t}, where
/// r₁ ≤ r₂ ≤ … are the prime factors of s and M_t = r₁⋯r_{t−1}.
#[derive(Clone, Debug)]
pub struct CyclicSet {
    pub gen: Matrix,
    pub size: u64,
    pub radices: Vec<u64>,
    pub strides: Vec<u64>,
    pub blocks: Vec<Vec<Matrix>>,
}

impl CyclicSet {
    /// Positional digits of an exponent i < s, one per block.
    pub fn digits(&self, i: u64) -> Vec<usize> {
        self.radices.iter().zip(&self.strides).map(|(&r, &m)| ((i / m) % r) as usize).collect()
    }

    pub fn exponent(&self, digits: &[usize]) -> u64 {
        digits.iter().zip(&self.strides).map(|(&d, &m)| d as u64 * m).sum()
    }
}

pub fn cyclic_set_mls(x: &Matrix, s: u64, f: &Fq) -> Result<CyclicSet> {
    if s == 0 {
        return Err(MlsError::InvalidParameter("a cyclic set needs s ≥ 1".into()));
    }
    let radices: Vec<u64> = factorize(s).into_iter().flat_map(|(p, a)| std::iter::repeat_n(p, a as usize)).collect();
    let mut strides = Vec::with_capacity(radices.len());
    let mut blocks = Vec::with_capacity(radices.len());
    let mut m = 1u64;
    for &r in &radices {
        strides.push(m);
        let step = x.pow(m, f);
        let mut cur = Matrix::identity(x.n());
        let mut block = Vec::with_capacity(r as usize);
        for _ in 0..r {
            block.push(cur.clone());
            cur = cur.mul(&step, f);
        }
        blocks.push(block);
        m *= r;
    }
    Ok(CyclicSet { gen: x.clone(), size: s, radices, strides, blocks })
}

/// [A, B] for subgroups with A ∩ B = {1} and |AB| = |A||B|; a trivial A is dropped.
pub fn semidirect_ls(group: GroupDescriptor, a: &[Matrix], b: &[Matrix], f: &Fq) -> Result<LogSignature> {
    let sa: HashSet<&Matrix> = a.iter().collect();
    if let Some(x) = b.iter().find(|x| !x.is_identity() && sa.contains(x)) {
        return Err(MlsError::Overlap(format!("A and B share the non-identity element {:?}", x.rows())));
    }
    let mut seen = HashSet::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            if !seen.insert(x.mul(y, f)) {
                return Err(MlsError::Overlap("|AB| < |A||B|".into()));
            }
        }
    }
    let order = (a.len() * b.len()) as u64;
    let blocks = if a.len() == 1 && a[0].is_identity() { vec![b.to_vec()] } else { vec![a.to_vec(), b.to_vec()] };
    LogSignature::new(group, blocks, order)
}
