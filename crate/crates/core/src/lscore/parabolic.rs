//! The LS [R, Q] of the stabilizer of ⟨e₁..e_k⟩: R its unipotent radical,
//! Q = {diag(D, y, D^{-T})} with D ∈ GL_k(q) and y in the orthogonal group
//! of the middle part.

use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;

use super::LogSignature;
use crate::error::{MlsError, Result};
use crate::fields::Fq;
use crate::forms::{all_points, all_vectors, StdForm};
use crate::matgroups::closure::closure;
use crate::matgroups::{GroupDescriptor, Matrix};

const CLOSURE_BUDGET: usize = 2_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct ParabolicLs {
    #[serde(skip)]
    pub ls: LogSignature,
    pub k: usize,
    pub r_size: u64,
    pub q_size: u64,
    pub shape_order: u64,
}

/// v ↦ v + f(v,e)u − f(v,u)e − Q(u)f(v,e)e for singular e and u ⊥ e.
fn eichler(form: &StdForm, e: &[u16], u: &[u16]) -> Result<Matrix> {
    let f = form.f();
    let qu = form.qf(u);
    let cols: Vec<Vec<u16>> = (0..form.n)
        .map(|j| {
            let v = form.unit(j);
            let a = form.bil(&v, e);
            let b = form.bil(&v, u);
            let c = f.add(b, f.mul(qu, a));
            v.iter().zip(u).zip(e).map(|((&x, &y), &z)| f.sub(f.add(x, f.mul(a, y)), f.mul(c, z))).collect()
        })
        .collect();
    Matrix::from_cols(&cols)
}

/// All isometries of a standard form, by closure over its reflections.
pub fn enumerate_orthogonal(form: &StdForm) -> Result<Vec<Matrix>> {
    let f = form.f();
    if form.n == 0 {
        return Ok(vec![Matrix::identity(0)]);
    }
    let gens: Vec<Matrix> = all_points(form.n, f.q)
        .filter(|v| form.qf(v) != 0)
        .map(|v| form.reflection(&v))
        .collect::<Result<_>>()?;
    let mut g: Vec<Matrix> = closure(&gens, form.n, CLOSURE_BUDGET, f)?.into_iter().collect();
    g.sort();
    Ok(g)
}

fn enumerate_gl(k: usize, f: &Fq) -> Vec<Matrix> {
    all_vectors(k * k, f.q)
        .filter_map(|v| Matrix::from_rows(&v.chunks(k).map(<[u16]>::to_vec).collect::<Vec<_>>()).ok())
        .filter(|m| m.det(f) != 0)
        .collect()
}

pub fn parabolic_ls(form: &StdForm, k: usize) -> Result<ParabolicLs> {
    let f = form.f();
    let n = form.n;
    let r = form.r;
    if k == 0 || k > r {
        return Err(MlsError::InvalidParameter(format!("k = {k} must lie in 1..={r}")));
    }
    let desc = GroupDescriptor::parabolic(form.kind, form.q(), n, k)?;
    let mid: Vec<usize> = (0..n).filter(|&i| !(i < k || (r..r + k).contains(&i))).collect();

    let mut gens = Vec::new();
    for i in 0..k {
        let e = form.e(i);
        for &j in &mid {
            gens.push(eichler(form, &e, &form.unit(j))?);
        }
        for j in i + 1..k {
            gens.push(eichler(form, &e, &form.e(j))?);
        }
    }
    let mut rset: Vec<Matrix> = closure(&gens, n, CLOSURE_BUDGET, f)?.into_iter().collect();
    rset.sort();

    let mid_form = StdForm::new(form.kind, n - 2 * k, Arc::new(f.clone()))?;
    let ys = enumerate_orthogonal(&mid_form)?;
    let mut qset = Vec::new();
    for d in enumerate_gl(k, f) {
        let levi = form.levi(&d)?;
        for y in &ys {
            qset.push(levi.mul(&y.embed(&mid, n), f));
        }
    }
    let rs: HashSet<&Matrix> = rset.iter().collect();
    if let Some(x) = qset.iter().find(|x| !x.is_identity() && rs.contains(x)) {
        return Err(MlsError::Overlap(format!("R and Q share {:?}", x.rows())));
    }
    let shape_order = desc.order()?;
    let (r_size, q_size) = (rset.len() as u64, qset.len() as u64);
    let ls = LogSignature::new(desc, vec![rset, qset], shape_order)
        .map_err(|e| MlsError::ConstructionMismatch(format!("|R|·|Q| differs from the parabolic order: {e}")))?;
    Ok(ParabolicLs { ls, k, r_size, q_size, shape_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroups::Kind;

    #[test]
    fn minus4_q3() {
        let form = StdForm::new(Kind::Minus, 4, Arc::new(Fq::new(3, 1).unwrap())).unwrap();
        let p = parabolic_ls(&form, 1).unwrap();
        assert_eq!((p.r_size, p.q_size, p.shape_order), (9, 16, 144));
        assert!(parabolic_ls(&form, 2).is_err());
    }

    #[test]
    fn odd3_q3() {
        let form = StdForm::new(Kind::Odd, 3, Arc::new(Fq::new(3, 1).unwrap())).unwrap();
        let p = parabolic_ls(&form, 1).unwrap();
        assert_eq!((p.r_size, p.q_size), (3, 4));
    }

    #[test]
    fn plus4_k2() {
        let form = StdForm::new(Kind::Plus, 4, Arc::new(Fq::new(3, 1).unwrap())).unwrap();
        let p = parabolic_ls(&form, 2).unwrap();
        assert_eq!(p.r_size, 3);
        assert_eq!(p.q_size, 48);
    }
}
