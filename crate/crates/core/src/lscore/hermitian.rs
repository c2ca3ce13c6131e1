//! F_{q²}³ with the Hermitian norm Σ v_k v̄_k, read as a 6-dimensional
//! quadratic space over F_q of minus type. Its isotropic F_{q²}-points are
//! q³ + 1 totally singular lines partitioning the singular points.

use std::sync::Arc;

use crate::error::{MlsError, Result};
use crate::fields::{make_tower, FieldElement, FieldTower, Fq, Level};
use crate::forms::{all_vectors, gram_qf, QuadraticSpace};
use crate::matgroups::{Kind, Matrix};
use crate::spreads::Subspace;

pub struct HermitianModel {
    pub space: QuadraticSpace,
    /// Spread members in Witt coordinates; the first is ⟨e₁, e₂⟩.
    pub members: Vec<Subspace>,
    /// Unitary generators in Witt coordinates.
    pub gens: Vec<Matrix>,
}

struct Coords<'a> {
    t: &'a FieldTower,
}

impl Coords<'_> {
    fn split(&self, v: &[u16]) -> Vec<FieldElement> {
        v.chunks(2).map(|c| self.t.from_top_coords(c)).collect()
    }

    fn join(&self, xs: &[FieldElement]) -> Result<Vec<u16>> {
        let mut out = Vec::with_capacity(2 * xs.len());
        for x in xs {
            out.extend(self.t.top_coords(x)?);
        }
        Ok(out)
    }

    fn scale(&self, s: &FieldElement, v: &[u16]) -> Result<Vec<u16>> {
        let xs = self.split(v).iter().map(|x| self.t.mul(s, x)).collect::<Result<Vec<_>>>()?;
        self.join(&xs)
    }

    /// The F_q-matrix of an F_{q²}-linear map given by its 3×3 matrix.
    fn realize(&self, u: &[Vec<FieldElement>]) -> Result<Matrix> {
        let t = self.t;
        let mut cols = Vec::with_capacity(6);
        for k in 0..3 {
            for j in 0..2u64 {
                let b = t.pow(&t.alpha, j);
                let img: Vec<FieldElement> = (0..3).map(|i| t.mul(&u[i][k], &b)).collect::<Result<_>>()?;
                cols.push(self.join(&img)?);
            }
        }
        Matrix::from_cols(&cols)
    }
}

fn unitary_gens(t: &FieldTower) -> Result<Vec<Vec<Vec<FieldElement>>>> {
    let zero = t.zero(Level::Top);
    let one = t.one(Level::Top);
    let ident = || vec![vec![one.clone(), zero.clone(), zero.clone()], vec![zero.clone(), one.clone(), zero.clone()], vec![zero.clone(), zero.clone(), one.clone()]];
    let q = t.q();
    let zeta = t.pow(&t.alpha, q - 1);
    let mut gens = Vec::new();
    let mut d = ident();
    d[0][0] = zeta;
    gens.push(d);
    let mut cyc = vec![vec![zero.clone(); 3]; 3];
    for i in 0..3 {
        cyc[(i + 1) % 3][i] = one.clone();
    }
    gens.push(cyc);
    let mut sw = vec![vec![zero.clone(); 3]; 3];
    sw[0][1] = one.clone();
    sw[1][0] = one.clone();
    sw[2][2] = one.clone();
    gens.push(sw);
    // [[a, b], [−b̄, ā]] with N(a) + N(b) = 1 and ab ≠ 0.
    let norm = |x: &FieldElement| t.norm(x, Level::Base);
    let mut found = 0;
    'outer: for i in 1..q * q {
        let a = t.pow(&t.alpha, i);
        for j in 1..q * q {
            let b = t.pow(&t.alpha, j);
            let s = t.add(&norm(&a)?, &norm(&b)?)?;
            if s == t.one(Level::Base) {
                let mut g = ident();
                g[0][0] = a.clone();
                g[0][1] = b.clone();
                g[1][0] = t.sub(&zero, &t.bar(&b)?)?;
                g[1][1] = t.bar(&a)?;
                gens.push(g);
                found += 1;
                if found == 3 {
                    break 'outer;
                }
                continue 'outer;
            }
        }
    }
    Ok(gens)
}

pub fn hermitian_model(fq: Arc<Fq>) -> Result<HermitianModel> {
    let f = &*fq;
    let tower = make_tower(fq.p as u64, fq.e, 1)?;
    let c = Coords { t: &tower };
    let basis: Vec<Vec<u16>> = (0..6).map(|i| (0..6).map(|j| u16::from(i == j)).collect()).collect();
    let q_of = |v: &[u16]| -> Result<u16> {
        let mut s = tower.zero(Level::Base);
        for x in c.split(v) {
            s = tower.add(&s, &tower.norm(&x, Level::Base)?)?;
        }
        tower.to_fq(&s)
    };
    let mut gram = Matrix::zero(6);
    for i in 0..6 {
        for j in 0..6 {
            let sum: Vec<u16> = basis[i].iter().zip(&basis[j]).map(|(&a, &b)| f.add(a, b)).collect();
            let v = f.sub(f.sub(q_of(&sum)?, q_of(&basis[i])?), q_of(&basis[j])?);
            gram.set(i, j, v);
        }
    }
    let alpha = tower.alpha.clone();
    let v0 = all_vectors(6, f.q)
        .find(|v| v.iter().any(|&x| x != 0) && gram_qf(&gram, v, f) == 0)
        .ok_or_else(|| MlsError::ConstructionMismatch("Hermitian form has no isotropic vector".into()))?;
    let initial = vec![v0.clone(), c.scale(&alpha, &v0)?];
    let space = QuadraticSpace::from_gram(Kind::Minus, gram.clone(), fq.clone(), None, &initial)?;
    let to_std = |v: &[u16]| space.witt_inv.apply(v, f);
    let mut members = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in all_vectors(6, f.q) {
        if v.iter().all(|&x| x == 0) || gram_qf(&gram, &v, f) != 0 {
            continue;
        }
        let w = Subspace::span(&[to_std(&v), to_std(&c.scale(&alpha, &v)?)], f);
        if seen.insert(w.clone()) {
            members.push(w);
        }
    }
    let e12 = Subspace::span(&[space.form.e(0), space.form.e(1)], f);
    let pos = members
        .iter()
        .position(|w| *w == e12)
        .ok_or_else(|| MlsError::ConstructionMismatch("⟨e₁, e₂⟩ is not an F_{q²}-point".into()))?;
    members.swap(0, pos);
    let q = f.q as usize;
    if members.len() != q * q * q + 1 {
        return Err(MlsError::ConstructionMismatch(format!("{} isotropic points, expected q³+1", members.len())));
    }
    let gens = unitary_gens(&tower)?
        .iter()
        .map(|u| c.realize(u).map(|m| space.to_witt(&m)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = gens.iter().position(|g| !space.form.is_isometry(g)) {
        return Err(MlsError::ConstructionMismatch(format!("unitary generator {i} is not an isometry")));
    }
    Ok(HermitianModel { space, members, gens })
}
