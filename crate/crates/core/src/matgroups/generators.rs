//! The literal generators a, b (and the starred b*) of the O and SO rows.
//!
//! Everything is returned in Witt coordinates of the standard form. Where a
//! literal matrix is not an isometry or has the wrong order the problem is
//! recorded as a mismatch rather than patched.

use std::sync::Arc;

use serde::Serialize;

use super::descriptor::{Family, Flavor, GroupDescriptor, Kind};
use super::matrix::Matrix;
use crate::error::{MlsError, Result};
use crate::fields::{make_tower, Fq};
use crate::forms::{all_vectors, minus_trace_gram, mult_matrix, QuadraticSpace, StdForm};

const ORDER_CAP: u64 = 1 << 20;

/// Companion matrix of the lexicographically smallest primitive polynomial
/// of degree k over F_q: multiplication by a primitive element of F_{q^k}.
pub fn singer_generator(k: usize, f: &Fq) -> Result<Matrix> {
    if k == 0 {
        return Err(MlsError::InvalidParameter("Singer cycle needs k ≥ 1".into()));
    }
    let target = (f.q as u64).pow(k as u32) - 1;
    for c in all_vectors(k, f.q) {
        if c[0] == 0 {
            continue;
        }
        let m = companion(&c, f);
        if m.pow(target, f).is_identity() && m.order_dividing(target, f)? == target {
            return Ok(m);
        }
    }
    Err(MlsError::NotFound { what: "primitive polynomial".into(), budget: (f.q as u64).pow(k as u32) })
}

/// Companion of x^k + c_{k−1}x^{k−1} + … + c_0 acting on 1, x, …, x^{k−1}.
fn companion(c: &[u16], f: &Fq) -> Matrix {
    let k = c.len();
    let mut m = Matrix::zero(k);
    for j in 0..k - 1 {
        m.set(j + 1, j, 1);
    }
    for (i, &ci) in c.iter().enumerate() {
        m.set(i, k - 1, f.neg(ci));
    }
    m
}

/// An element of largest order in O_d(q) for the dot-product form.
fn max_order_dot_orthogonal(d: usize, f: &Fq) -> Option<Matrix> {
    if d == 0 || (f.q as u64).pow((d * d) as u32) > 1 << 20 {
        return None;
    }
    let id = Matrix::identity(d);
    let mut best: Option<(u64, Matrix)> = None;
    for v in all_vectors(d * d, f.q) {
        let rows: Vec<Vec<u16>> = v.chunks(d).map(<[u16]>::to_vec).collect();
        let m = Matrix::from_rows(&rows).ok()?;
        if m.mul(&m.transpose(), f) != id {
            continue;
        }
        let o = m.element_order(ORDER_CAP, f).ok()?;
        if best.as_ref().is_none_or(|(bo, _)| o > *bo) {
            best = Some((o, m));
        }
    }
    best.map(|(_, m)| m)
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorRow {
    pub family: String,
    pub n: usize,
    pub q: u64,
    /// Dimension of the totally singular subspace on which b acts.
    pub d: usize,
    #[serde(skip)]
    pub a: Matrix,
    #[serde(skip)]
    pub b: Matrix,
    pub a_order: Option<u64>,
    pub b_order: Option<u64>,
    pub a_expected: u64,
    pub b_expected: u64,
    pub mismatches: Vec<String>,
}

fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let n: usize = blocks.iter().map(|b| b.n()).sum();
    let mut m = Matrix::zero(n);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.n() {
            for j in 0..b.n() {
                m.set(off + i, off + j, b.get(i, j));
            }
        }
        off += b.n();
    }
    m
}

/// The norm-one multiplication of F_{q^{2k}} on its minus trace model:
/// returns (gram, matrix) in model coordinates, order q^k + 1.
fn torus_block(p: u64, e: usize, k: usize) -> Result<(Matrix, Matrix)> {
    let t = make_tower(p, e, k)?;
    let qk = t.q().pow(k as u32);
    let s = t.pow(&t.alpha, qk - 1);
    Ok((minus_trace_gram(&t)?, mult_matrix(&s, &t)?))
}

/// Literal a and b for an O or SO row, with every mismatch listed.
pub fn literal_generators(desc: &GroupDescriptor) -> Result<GeneratorRow> {
    let (flavor, kind) = match desc.family {
        Family::Orth { flavor: fl @ (Flavor::O | Flavor::SO), kind, projective: false } => (fl, kind),
        other => return Err(MlsError::Unsupported(format!("no literal generator pair for {other}"))),
    };
    let (p, e) = desc.p_e();
    let fq = Arc::new(Fq::new(p, e)?);
    let f = &*fq;
    let q = desc.q;
    let n = desc.n;
    let m = kind.half_rank(n)?;
    if m == 0 {
        return Err(MlsError::Unsupported("literal generators need m ≥ 1".into()));
    }
    let std = StdForm::new(kind, n, fq.clone())?;
    let mut mismatches = Vec::new();

    // a: a norm-one torus padded by identity, conjugated into Witt coordinates.
    let (a, a_expected) = match kind {
        Kind::Minus => {
            let (g, t) = torus_block(p, e, m)?;
            let sp = QuadraticSpace::from_gram(Kind::Minus, g, fq.clone(), None, &[])?;
            (sp.to_witt(&t), q.pow(m as u32) + 1)
        }
        Kind::Plus => {
            let expected = q.pow(m as u32 - 1) + 1;
            if m == 1 {
                mismatches.push("a₂ = x₂^0 is the identity when m = 1".into());
                (Matrix::identity(n), expected)
            } else {
                let (g, t) = torus_block(p, e, m - 1)?;
                let plane = StdForm::new(Kind::Minus, 2, fq.clone())?;
                let gram = block_diag(&[&g, plane.gram()]);
                let sp = QuadraticSpace::from_gram(Kind::Plus, gram, fq.clone(), None, &[])?;
                (sp.to_witt(&block_diag(&[&t, &Matrix::identity(2)])), expected)
            }
        }
        Kind::Odd => {
            let (g, t) = torus_block(p, e, m)?;
            let mut found = None;
            for c in [1u16, f.nonsquare()] {
                let line = Matrix::scalar(1, f.add(c, c));
                let gram = block_diag(&[&g, &line]);
                if let Ok(sp) = QuadraticSpace::from_gram(Kind::Odd, gram, fq.clone(), None, &[]) {
                    found = Some(sp.to_witt(&block_diag(&[&t, &Matrix::identity(1)])));
                    break;
                }
            }
            let a = found.ok_or_else(|| MlsError::ConstructionMismatch("no anisotropic line matches".into()))?;
            (a, q.pow(m as u32) + 1)
        }
    };

    // b: Levi action of a Singer cycle (or, starred, an orthogonal D*) on ⟨e₁..e_d⟩.
    let d = match kind {
        Kind::Minus => m - 1,
        _ => m,
    };
    let b_expected = q.pow(d as u32).saturating_sub(1);
    let b = if d == 0 {
        mismatches.push("b acts on a zero-dimensional subspace".into());
        Matrix::identity(n)
    } else if flavor == Flavor::O {
        std.levi(&singer_generator(d, f)?)?
    } else {
        match max_order_dot_orthogonal(d, f) {
            Some(ds) => {
                let mut g = Matrix::identity(n);
                let dt = ds.transpose();
                for i in 0..d {
                    for j in 0..d {
                        g.set(i, j, ds.get(i, j));
                        g.set(std.r + i, std.r + j, dt.get(i, j));
                    }
                }
                g
            }
            None => {
                mismatches.push(format!("no orthogonal D* enumerated for d = {d}"));
                Matrix::identity(n)
            }
        }
    };

    let a_iso = std.is_isometry(&a);
    let b_iso = std.is_isometry(&b);
    if !a_iso {
        mismatches.push("a is not an isometry".into());
    }
    if !b_iso {
        mismatches.push("b is not an isometry".into());
    }
    let a_order = a.element_order(ORDER_CAP, f).ok();
    let b_order = b.element_order(ORDER_CAP, f).ok();
    if a_order != Some(a_expected) {
        mismatches.push(format!("order(a) = {a_order:?}, expected {a_expected}"));
    }
    if b_order != Some(b_expected) {
        mismatches.push(format!("order(b) = {b_order:?}, expected {b_expected}"));
    }
    if flavor == Flavor::SO {
        if a_iso && a.det(f) != 1 {
            mismatches.push("a has determinant −1".into());
        }
        if b_iso && b.det(f) != 1 {
            mismatches.push("b has determinant −1".into());
        }
    }
    Ok(GeneratorRow { family: desc.family.to_string(), n, q, d, a, b, a_order, b_order, a_expected, b_expected, mismatches })
}

/// The literal pair, or a CONSTRUCTION_MISMATCH naming what failed.
pub fn generator_pair(desc: &GroupDescriptor) -> Result<(Matrix, Matrix)> {
    let row = literal_generators(desc)?;
    if row.mismatches.is_empty() {
        Ok((row.a, row.b))
    } else {
        Err(MlsError::ConstructionMismatch(row.mismatches.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singer_examples() {
        let f = Fq::new(3, 1).unwrap();
        assert_eq!(singer_generator(1, &f).unwrap(), Matrix::from_rows(&[vec![2]]).unwrap());
        let s2 = singer_generator(2, &f).unwrap();
        assert_eq!(s2.element_order(100, &f).unwrap(), 8);
        assert!(s2.pow(8, &f).is_identity());
        let s3 = singer_generator(3, &Fq::new(5, 1).unwrap()).unwrap();
        assert_eq!(s3.order_dividing(124, &Fq::new(5, 1).unwrap()).unwrap(), 124);
    }

    #[test]
    fn literal_orders() {
        let row = literal_generators(&GroupDescriptor::new("O-".parse().unwrap(), 3, 4).unwrap()).unwrap();
        assert_eq!(row.a_order, Some(10));
        let row = literal_generators(&GroupDescriptor::new("O+".parse().unwrap(), 3, 4).unwrap()).unwrap();
        assert_eq!(row.b_order, Some(8));
        assert_eq!(row.a_order, Some(4));
        assert!(row.mismatches.is_empty(), "{:?}", row.mismatches);
        let row = literal_generators(&GroupDescriptor::new("Oodd".parse().unwrap(), 3, 3).unwrap()).unwrap();
        assert_eq!(row.a_order, Some(4));
        assert!(row.mismatches.is_empty(), "{:?}", row.mismatches);
    }

    #[test]
    fn starred_b_is_reported() {
        let row = literal_generators(&GroupDescriptor::new("SO-".parse().unwrap(), 3, 6).unwrap()).unwrap();
        assert!(row.mismatches.iter().any(|s| s.contains("b")), "{:?}", row.mismatches);
        assert!(generator_pair(&GroupDescriptor::new("SO-".parse().unwrap(), 3, 6).unwrap()).is_err());
    }
}
