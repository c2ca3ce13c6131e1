//! Subspaces, classical and orbit partial spreads, and partition checks.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{MlsError, Result};
use crate::fields::{FieldTower, Fq};
use crate::forms::{all_vectors, normalize};
use crate::matgroups::matrix::echelon;
use crate::matgroups::Matrix;

/// A subspace stored by its reduced row echelon basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Subspace {
    pub basis: Vec<Vec<u16>>,
}

impl Subspace {
    pub fn span(vecs: &[Vec<u16>], f: &Fq) -> Subspace {
        Subspace { basis: echelon(vecs, f) }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn image(&self, g: &Matrix, f: &Fq) -> Subspace {
        let imgs: Vec<Vec<u16>> = self.basis.iter().map(|v| g.apply(v, f)).collect();
        Subspace::span(&imgs, f)
    }

    /// Canonical representatives of all points of P(W).
    pub fn points(&self, f: &Fq) -> Vec<Vec<u16>> {
        let d = self.dim();
        let Some(n) = self.basis.first().map(Vec::len) else { return Vec::new() };
        let mut out: Vec<Vec<u16>> = all_vectors(d, f.q)
            .filter(|c| c.iter().find(|&&x| x != 0) == Some(&1))
            .map(|c| {
                let mut v = vec![0u16; n];
                for (ci, b) in c.iter().zip(&self.basis) {
                    for (x, &y) in v.iter_mut().zip(b) {
                        *x = f.add(*x, f.mul(*ci, y));
                    }
                }
                normalize(&v, f).expect("nonzero combination of a basis")
            })
            .collect();
        out.sort();
        out
    }

    pub fn contains(&self, v: &[u16], f: &Fq) -> bool {
        let mut vs = self.basis.clone();
        vs.push(v.to_vec());
        echelon(&vs, f).len() == self.dim()
    }

    pub fn meets_trivially(&self, other: &Subspace, f: &Fq) -> bool {
        let mut vs = self.basis.clone();
        vs.extend(other.basis.iter().cloned());
        echelon(&vs, f).len() == self.dim() + other.dim()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PartialSpread {
    pub members: Vec<Subspace>,
}

impl PartialSpread {
    /// Checks that all members have trivial pairwise intersection.
    pub fn validate(&self, f: &Fq) -> Result<()> {
        let mut owner: HashMap<Vec<u16>, usize> = HashMap::new();
        for (i, w) in self.members.iter().enumerate() {
            for pt in w.points(f) {
                if let Some(&j) = owner.get(&pt) {
                    return Err(MlsError::NotAPartialSpread(j, i));
                }
                owner.insert(pt, i);
            }
        }
        Ok(())
    }
}

/// The F_q-basis θ^k·α^i (k < m) of W·α^i, with θ a primitive element of F_{q^m}.
fn subfield_translate(tower: &FieldTower, i: u64) -> Result<Subspace> {
    let f = tower.fq();
    let qm = tower.q().pow(tower.m as u32);
    let theta = tower.pow(&tower.alpha, qm + 1);
    let shift = tower.pow(&tower.alpha, i);
    let mut x = shift;
    let mut vecs = Vec::with_capacity(tower.m);
    for _ in 0..tower.m {
        vecs.push(tower.top_coords(&x)?);
        x = tower.mul(&x, &theta)?;
    }
    Ok(Subspace::span(&vecs, &f))
}

/// The q^m + 1 translates W·α^i, 0 ≤ i ≤ q^m, of the subfield W = F_{q^m},
/// in the coordinates of the basis 1, α, …, α^{2m−1}.
pub fn classical_spread(tower: &FieldTower) -> Result<PartialSpread> {
    let qm = tower.q().pow(tower.m as u32);
    let members = (0..=qm).map(|i| subfield_translate(tower, i)).collect::<Result<_>>()?;
    Ok(PartialSpread { members })
}

/// The same list indexed by W·α^{(q^m−1)i}; kept to exhibit its repetitions.
pub fn classical_spread_torus_indexed(tower: &FieldTower) -> Result<PartialSpread> {
    let qm = tower.q().pow(tower.m as u32);
    let members = (0..=qm).map(|i| subfield_translate(tower, (qm - 1) * i)).collect::<Result<_>>()?;
    Ok(PartialSpread { members })
}

/// The subfield F_{q^m} itself.
pub fn subfield(tower: &FieldTower) -> Result<Subspace> {
    subfield_translate(tower, 0)
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitSpread {
    pub spread: PartialSpread,
    /// |orbit| = |A|, the prerequisite for sharp transitivity.
    pub sharp: bool,
}

/// The orbit {a(W0) : a ∈ A}, deduplicated in order of first appearance.
pub fn orbit_partial_spread(a_set: &[Matrix], w0: &Subspace, f: &Fq) -> Result<OrbitSpread> {
    let mut seen = HashMap::new();
    let mut members = Vec::new();
    for a in a_set {
        let w = w0.image(a, f);
        if !seen.contains_key(&w) {
            seen.insert(w.clone(), members.len());
            members.push(w);
        }
    }
    let spread = PartialSpread { members };
    spread.validate(f)?;
    let sharp = spread.members.len() == a_set.len();
    Ok(OrbitSpread { spread, sharp })
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PartitionReport {
    pub members: usize,
    pub points: usize,
    pub covered: usize,
    pub points_per_member: Vec<usize>,
    pub ok: bool,
    pub violation: Option<String>,
}

/// Does every point of `l` lie in exactly one member, each member meeting `l`
/// in the same positive number of points?
pub fn verify_partition(s: &PartialSpread, l: &[Vec<u16>], f: &Fq) -> PartitionReport {
    let lset: HashMap<&Vec<u16>, usize> = l.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut owner: Vec<Option<usize>> = vec![None; l.len()];
    let mut per = Vec::with_capacity(s.members.len());
    let mut violation = None;
    for (i, w) in s.members.iter().enumerate() {
        let mut cnt = 0;
        for pt in w.points(f) {
            if let Some(&k) = lset.get(&pt) {
                cnt += 1;
                if let Some(j) = owner[k] {
                    violation.get_or_insert_with(|| format!("point {pt:?} lies in members {j} and {i}"));
                } else {
                    owner[k] = Some(i);
                }
            }
        }
        per.push(cnt);
    }
    let covered = owner.iter().filter(|o| o.is_some()).count();
    if violation.is_none() {
        if let Some(k) = owner.iter().position(Option::is_none) {
            violation = Some(format!("point {:?} is not covered", l[k]));
        } else if per.iter().any(|&c| c == 0 || c != per[0]) {
            violation = Some(format!("members meet L in unequal or empty sets: {per:?}"));
        }
    }
    PartitionReport {
        members: s.members.len(),
        points: l.len(),
        covered,
        points_per_member: per,
        ok: violation.is_none(),
        violation,
    }
}
