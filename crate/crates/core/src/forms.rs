//! Quadratic spaces of minus, plus and odd kind.
//!
//! Group elements live in Witt coordinates: e_1..e_r, f_1..f_r, then the
//! anisotropic part. [`StdForm`] is that coordinate form; [`QuadraticSpace`]
//! is a model space (trace form or fixed Gram) together with its Witt basis.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{MlsError, Result};
use crate::fields::{FieldElement, FieldTower, Fq, Level};
use crate::matgroups::closure::closure_incremental;
use crate::matgroups::matrix::{dot, echelon};
use crate::matgroups::{Flavor, Kind, Matrix};

/// Q(v) = ½ vᵀ G v for a Gram matrix with f(v, v) = 2Q(v).
pub fn gram_qf(gram: &Matrix, v: &[u16], f: &Fq) -> u16 {
    f.mul(f.half(), dot(v, &gram.apply(v, f), f))
}

pub fn gram_bil(gram: &Matrix, u: &[u16], v: &[u16], f: &Fq) -> u16 {
    dot(u, &gram.apply(v, f), f)
}

/// Canonical representative of a projective point: first nonzero entry 1.
pub fn normalize(v: &[u16], f: &Fq) -> Option<Vec<u16>> {
    let lead = *v.iter().find(|&&c| c != 0)?;
    let inv = f.inv(lead).ok()?;
    Some(v.iter().map(|&c| f.mul(c, inv)).collect())
}

/// All vectors of F_q^n in lexicographic order, first coordinate most significant.
pub fn all_vectors(n: usize, q: u16) -> impl Iterator<Item = Vec<u16>> {
    let total = (q as u64).pow(n as u32);
    (0..total).map(move |mut k| {
        let mut v = vec![0u16; n];
        for i in (0..n).rev() {
            v[i] = (k % q as u64) as u16;
            k /= q as u64;
        }
        v
    })
}

/// Canonical representatives of all points of P(F_q^n), in lexicographic order.
pub fn all_points(n: usize, q: u16) -> impl Iterator<Item = Vec<u16>> {
    all_vectors(n, q).filter(|v| v.iter().find(|&&c| c != 0) == Some(&1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PointClass {
    pub isotropic: bool,
    pub singular: bool,
}

/// The form in Witt coordinates.
#[derive(Clone, Debug)]
pub struct StdForm {
    pub kind: Kind,
    pub n: usize,
    pub r: usize,
    /// Q-values of the anisotropic basis vectors.
    pub aniso: Vec<u16>,
    pub fq: Arc<Fq>,
    gram: Matrix,
}

impl StdForm {
    pub fn new(kind: Kind, n: usize, fq: Arc<Fq>) -> Result<StdForm> {
        let f = &*fq;
        let (r, aniso) = match kind {
            Kind::Plus if n % 2 == 0 => (n / 2, vec![]),
            Kind::Minus if n % 2 == 0 && n >= 2 => (n / 2 - 1, vec![1, f.neg(f.nonsquare())]),
            Kind::Odd if n % 2 == 1 => (n / 2, vec![1]),
            _ => return Err(MlsError::InvalidParameter(format!("no {kind:?} form in dimension {n}"))),
        };
        let mut gram = Matrix::zero(n);
        for i in 0..r {
            gram.set(i, r + i, 1);
            gram.set(r + i, i, 1);
        }
        for (k, &c) in aniso.iter().enumerate() {
            gram.set(2 * r + k, 2 * r + k, f.add(c, c));
        }
        Ok(StdForm { kind, n, r, aniso, fq, gram })
    }

    pub fn f(&self) -> &Fq {
        &self.fq
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn q(&self) -> u64 {
        self.fq.q as u64
    }

    pub fn bil(&self, u: &[u16], v: &[u16]) -> u16 {
        let f = self.f();
        let r = self.r;
        let mut s = 0u16;
        for i in 0..r {
            s = f.add(s, f.mul(u[i], v[r + i]));
            s = f.add(s, f.mul(u[r + i], v[i]));
        }
        for (k, &c) in self.aniso.iter().enumerate() {
            let j = 2 * r + k;
            s = f.add(s, f.mul(f.add(c, c), f.mul(u[j], v[j])));
        }
        s
    }

    pub fn qf(&self, u: &[u16]) -> u16 {
        let f = self.f();
        let r = self.r;
        let mut s = 0u16;
        for i in 0..r {
            s = f.add(s, f.mul(u[i], u[r + i]));
        }
        for (k, &c) in self.aniso.iter().enumerate() {
            let j = 2 * r + k;
            s = f.add(s, f.mul(c, f.mul(u[j], u[j])));
        }
        s
    }

    pub fn unit(&self, i: usize) -> Vec<u16> {
        let mut v = vec![0u16; self.n];
        v[i] = 1;
        v
    }

    pub fn e(&self, i: usize) -> Vec<u16> {
        self.unit(i)
    }

    pub fn fvec(&self, i: usize) -> Vec<u16> {
        self.unit(self.r + i)
    }

    pub fn classify(&self, v: &[u16]) -> Result<PointClass> {
        if v.iter().all(|&c| c == 0) {
            return Err(MlsError::InvalidParameter("the zero vector is not a point".into()));
        }
        Ok(PointClass { isotropic: self.bil(v, v) == 0, singular: self.qf(v) == 0 })
    }

    pub fn is_isometry(&self, g: &Matrix) -> bool {
        let f = self.f();
        g.n() == self.n && g.transpose().mul(&self.gram, f).mul(g, f) == self.gram
    }

    /// Spinor norm of an isometry as an F_q code, computed from Wall's form
    /// on im(1 − g).
    pub fn spinor_norm(&self, g: &Matrix) -> u16 {
        let f = self.f();
        let m = Matrix::identity(self.n).sub(g, f);
        let cols: Vec<Vec<u16>> = (0..self.n).map(|j| m.col(j)).collect();
        let pivots = pivot_columns(&cols, f);
        if pivots.is_empty() {
            return 1;
        }
        let k = pivots.len();
        let mut wall = Matrix::zero(k);
        for (a, &i) in pivots.iter().enumerate() {
            let ui = self.unit(i);
            for (b, &j) in pivots.iter().enumerate() {
                wall.set(a, b, self.bil(&ui, &cols[j]));
            }
        }
        wall.det(f)
    }

    pub fn member(&self, g: &Matrix, flavor: Flavor) -> bool {
        if !self.is_isometry(g) {
            return false;
        }
        let f = self.f();
        match flavor {
            Flavor::O => true,
            Flavor::SO => g.det(f) == 1,
            Flavor::Omega => g.det(f) == 1 && f.is_square(self.spinor_norm(g)),
        }
    }

    /// Membership in the quotient by {±I}: any lift qualifies.
    pub fn member_projective(&self, g: &Matrix, flavor: Flavor) -> bool {
        self.member(g, flavor) || self.member(&g.neg(self.f()), flavor)
    }

    /// rank(I + g) even; reported next to the spinor-norm test.
    pub fn even_rank_criterion(&self, g: &Matrix) -> bool {
        let f = self.f();
        Matrix::identity(self.n).add(g, f).rank(f) % 2 == 0
    }

    /// u ↦ u − f(u, v)/Q(v) · v.
    pub fn reflection(&self, v: &[u16]) -> Result<Matrix> {
        let f = self.f();
        let qv = self.qf(v);
        if qv == 0 {
            return Err(MlsError::InvalidParameter(
                "reflection needs Q(v) ≠ 0; f(v,v) = 0 would divide by zero".into(),
            ));
        }
        let c = f.inv(qv)?;
        let cols: Vec<Vec<u16>> = (0..self.n)
            .map(|j| {
                let b = self.unit(j);
                let k = f.mul(self.bil(&b, v), c);
                b.iter().zip(v).map(|(&x, &y)| f.sub(x, f.mul(k, y))).collect()
            })
            .collect();
        Matrix::from_cols(&cols)
    }

    /// Coordinates of ⟨e_1, f_1⟩^⊥.
    pub fn wprime_idx(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| i != 0 && i != self.r).collect()
    }

    /// The form on ⟨e_1, f_1⟩^⊥ in its own Witt coordinates.
    pub fn sub_form(&self) -> Result<StdForm> {
        if self.r == 0 {
            return Err(MlsError::InvalidParameter("no hyperbolic pair to split off".into()));
        }
        if self.kind == Kind::Minus && self.n == 2 {
            return Err(MlsError::InvalidParameter("anisotropic plane has no hyperbolic pair".into()));
        }
        StdForm::new(self.kind, self.n - 2, self.fq.clone())
    }

    /// v ↦ v + f(v,e₁)u − f(v,u)e₁ − Q(u)f(v,e₁)e₁ for u ⊥ ⟨e₁, f₁⟩.
    pub fn siegel(&self, u: &[u16]) -> Result<Matrix> {
        if self.r == 0 || u.len() != self.n || u[0] != 0 || u[self.r] != 0 {
            return Err(MlsError::InvalidParameter("Siegel parameter must lie in ⟨e₁, f₁⟩^⊥".into()));
        }
        let f = self.f();
        let e1 = self.e(0);
        let qu = self.qf(u);
        let cols: Vec<Vec<u16>> = (0..self.n)
            .map(|j| {
                let v = self.unit(j);
                let a = self.bil(&v, &e1);
                let b = self.bil(&v, u);
                let mut w: Vec<u16> = v.iter().zip(u).map(|(&x, &y)| f.add(x, f.mul(a, y))).collect();
                w[0] = f.sub(w[0], f.add(b, f.mul(qu, a)));
                w
            })
            .collect();
        Matrix::from_cols(&cols)
    }

    /// e₁ ↦ λe₁, f₁ ↦ λ⁻¹f₁, identity elsewhere.
    pub fn d_lambda(&self, lambda: u16) -> Result<Matrix> {
        if self.r == 0 {
            return Err(MlsError::InvalidParameter("no hyperbolic pair".into()));
        }
        let f = self.f();
        let mut m = Matrix::identity(self.n);
        m.set(0, 0, lambda);
        m.set(self.r, self.r, f.inv(lambda)?);
        Ok(m)
    }

    /// diag(M, M^{-T}) on ⟨e₁..e_d⟩ ⊕ ⟨f₁..f_d⟩, identity elsewhere.
    pub fn levi(&self, m: &Matrix) -> Result<Matrix> {
        let d = m.n();
        if d > self.r {
            return Err(MlsError::DimensionMismatch { expected: self.r, found: d });
        }
        let mt = m.transpose_inv(self.f())?;
        let mut g = Matrix::identity(self.n);
        for i in 0..d {
            for j in 0..d {
                g.set(i, j, m.get(i, j));
                g.set(self.r + i, self.r + j, mt.get(i, j));
            }
        }
        Ok(g)
    }

    /// Canonical representatives of all singular points.
    pub fn singular_points(&self, budget: u64) -> Result<Vec<Vec<u16>>> {
        let total = (self.q()).checked_pow(self.n as u32).unwrap_or(u64::MAX);
        if total > budget {
            return Err(MlsError::BudgetExceeded { what: "point enumeration".into(), needed: total, budget });
        }
        Ok(all_points(self.n, self.fq.q).filter(|v| self.qf(v) == 0).collect())
    }

    pub fn random_vector<R: Rng>(&self, rng: &mut R) -> Vec<u16> {
        (0..self.n).map(|_| rng.gen_range(0..self.fq.q)).collect()
    }

    pub fn random_nonsingular<R: Rng>(&self, rng: &mut R) -> Vec<u16> {
        loop {
            let v = self.random_vector(rng);
            if self.qf(&v) != 0 {
                return v;
            }
        }
    }

    /// A random element of the given flavor as a product of reflections.
    pub fn random_element<R: Rng>(&self, flavor: Flavor, rng: &mut R) -> Matrix {
        let f = self.f();
        let mut g = Matrix::identity(self.n);
        if self.n == 0 {
            return g;
        }
        let pairs = self.n + 1;
        for _ in 0..pairs {
            let v = self.random_nonsingular(rng);
            let w = loop {
                let w = self.random_nonsingular(rng);
                let ok = flavor != Flavor::Omega || f.is_square(f.mul(self.qf(&v), self.qf(&w)));
                if ok {
                    break w;
                }
            };
            g = g.mul(&self.reflection(&v).expect("nonsingular"), f);
            g = g.mul(&self.reflection(&w).expect("nonsingular"), f);
        }
        if flavor == Flavor::O && rng.gen_bool(0.5) {
            let v = self.random_nonsingular(rng);
            g = g.mul(&self.reflection(&v).expect("nonsingular"), f);
        }
        g
    }
}

/// Indices of a maximal independent subset of `cols`, greedily from the left.
pub fn pivot_columns(cols: &[Vec<u16>], f: &Fq) -> Vec<usize> {
    let mut chosen: Vec<Vec<u16>> = Vec::new();
    let mut idx = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        if c.iter().all(|&x| x == 0) {
            continue;
        }
        chosen.push(c.clone());
        if echelon(&chosen, f).len() == chosen.len() {
            idx.push(j);
        } else {
            chosen.pop();
        }
    }
    idx
}

/// A model space with its Witt basis.
#[derive(Clone, Debug)]
pub struct QuadraticSpace {
    pub kind: Kind,
    pub n: usize,
    pub tower: Option<Arc<FieldTower>>,
    /// Gram matrix of f in the model basis.
    pub gram: Matrix,
    /// Columns are the Witt basis e₁..e_r, f₁..f_r, anisotropic part.
    pub witt: Matrix,
    pub witt_inv: Matrix,
    pub form: StdForm,
}

#[derive(Serialize)]
pub struct SpaceRepr {
    pub kind: Kind,
    pub n: usize,
    pub gram: Vec<Vec<u16>>,
    pub witt: Vec<Vec<u16>>,
    pub witt_index: usize,
}

impl QuadraticSpace {
    pub fn f(&self) -> &Fq {
        self.form.f()
    }

    pub fn witt_index(&self) -> usize {
        self.form.r
    }

    pub fn qf(&self, v: &[u16]) -> u16 {
        gram_qf(&self.gram, v, self.f())
    }

    pub fn bil(&self, u: &[u16], v: &[u16]) -> u16 {
        gram_bil(&self.gram, u, v, self.f())
    }

    pub fn classify(&self, v: &[u16]) -> Result<PointClass> {
        if v.iter().all(|&c| c == 0) {
            return Err(MlsError::InvalidParameter("the zero vector is not a point".into()));
        }
        Ok(PointClass { isotropic: self.bil(v, v) == 0, singular: self.qf(v) == 0 })
    }

    pub fn is_isometry(&self, g: &Matrix) -> bool {
        let f = self.f();
        g.n() == self.n && g.transpose().mul(&self.gram, f).mul(g, f) == self.gram
    }

    /// Model-coordinate matrix expressed in Witt coordinates.
    pub fn to_witt(&self, g: &Matrix) -> Matrix {
        let f = self.f();
        self.witt_inv.mul(g, f).mul(&self.witt, f)
    }

    pub fn from_witt(&self, g: &Matrix) -> Matrix {
        let f = self.f();
        self.witt.mul(g, f).mul(&self.witt_inv, f)
    }

    pub fn enumerate_l(&self, budget: u64) -> Result<Vec<Vec<u16>>> {
        let total = (self.f().q as u64).checked_pow(self.n as u32).unwrap_or(u64::MAX);
        if total > budget {
            return Err(MlsError::BudgetExceeded { what: "point enumeration".into(), needed: total, budget });
        }
        Ok(all_points(self.n, self.f().q).filter(|v| self.qf(v) == 0).collect())
    }

    pub fn repr(&self) -> SpaceRepr {
        SpaceRepr {
            kind: self.kind,
            n: self.n,
            gram: self.gram.rows(),
            witt: self.witt.rows(),
            witt_index: self.witt_index(),
        }
    }

    /// Wraps a model Gram matrix, computing its Witt basis; `initial` are
    /// totally singular vectors that become e₁, e₂, … in order.
    pub fn from_gram(kind: Kind, gram: Matrix, fq: Arc<Fq>, tower: Option<Arc<FieldTower>>, initial: &[Vec<u16>]) -> Result<Self> {
        let f = &*fq;
        let n = gram.n();
        if gram.det(f) == 0 {
            return Err(MlsError::ConstructionMismatch("form is degenerate".into()));
        }
        let form = StdForm::new(kind, n, fq.clone())?;
        let witt = witt_basis(&gram, &form, initial)?;
        let witt_inv = witt.inv(f)?;
        if witt.transpose().mul(&gram, f).mul(&witt, f) != *form.gram() {
            return Err(MlsError::ConstructionMismatch("Witt basis does not give the standard Gram matrix".into()));
        }
        Ok(QuadraticSpace { kind, n, tower, gram, witt, witt_inv, form })
    }
}

/// Greedy Witt basis in lexicographic scan order. Returns the change-of-basis
/// matrix whose columns are e₁..e_r, f₁..f_r, a₁.. in model coordinates.
pub fn witt_basis(gram: &Matrix, target: &StdForm, initial: &[Vec<u16>]) -> Result<Matrix> {
    let f = target.f();
    let n = gram.n();
    let bil = |u: &[u16], v: &[u16]| gram_bil(gram, u, v, f);
    let qf = |v: &[u16]| gram_qf(gram, v, f);
    let mut es: Vec<Vec<u16>> = Vec::new();
    let mut fs: Vec<Vec<u16>> = Vec::new();
    for e in initial {
        if qf(e) != 0 || initial.iter().any(|e2| bil(e, e2) != 0) {
            return Err(MlsError::InvalidParameter("initial vectors are not totally singular".into()));
        }
    }
    if echelon(initial, f).len() != initial.len() {
        return Err(MlsError::InvalidParameter("initial vectors are dependent".into()));
    }
    for (i, e) in initial.iter().enumerate() {
        let y = all_vectors(n, f.q)
            .find(|y| {
                initial.iter().enumerate().all(|(j, ej)| bil(y, ej) == u16::from(i == j))
                    && fs.iter().all(|fk| bil(y, fk) == 0)
            })
            .ok_or_else(|| MlsError::ConstructionMismatch("no hyperbolic partner".into()))?;
        let qy = qf(&y);
        let fi: Vec<u16> = y.iter().zip(e).map(|(&a, &b)| f.sub(a, f.mul(qy, b))).collect();
        es.push(e.clone());
        fs.push(fi);
    }
    let in_u = |v: &[u16], es: &[Vec<u16>], fs: &[Vec<u16>]| {
        es.iter().chain(fs.iter()).all(|w| bil(v, w) == 0)
    };
    while let Some(e) = all_vectors(n, f.q).find(|v| v.iter().any(|&c| c != 0) && qf(v) == 0 && in_u(v, &es, &fs)) {
        let y = all_vectors(n, f.q)
            .find(|y| in_u(y, &es, &fs) && bil(&e, y) != 0)
            .expect("nondegenerate complement");
        let s = f.inv(bil(&e, &y))?;
        let y: Vec<u16> = y.iter().map(|&c| f.mul(c, s)).collect();
        let qy = qf(&y);
        let fv: Vec<u16> = y.iter().zip(&e).map(|(&a, &b)| f.sub(a, f.mul(qy, b))).collect();
        es.push(e);
        fs.push(fv);
    }
    if es.len() != target.r {
        return Err(MlsError::ConstructionMismatch(format!(
            "Witt index {} but the {:?} kind needs {}",
            es.len(),
            target.kind,
            target.r
        )));
    }
    let mut aniso: Vec<Vec<u16>> = Vec::new();
    for &c in &target.aniso {
        let v = all_vectors(n, f.q)
            .find(|v| qf(v) == c && in_u(v, &es, &fs) && aniso.iter().all(|a| bil(v, a) == 0))
            .ok_or_else(|| MlsError::ConstructionMismatch(format!("anisotropic part does not represent {c}")))?;
        aniso.push(v);
    }
    let cols: Vec<Vec<u16>> = es.into_iter().chain(fs).chain(aniso).collect();
    Matrix::from_cols(&cols)
}

fn fq_of(tower: &FieldTower) -> Arc<Fq> {
    Arc::new(tower.fq())
}

/// Minus-kind trace model on F_{q^{2m}}: f(x, y) = tr(x ȳ + x̄ y), Q(x) = tr(x x̄),
/// in the basis 1, α, …, α^{2m−1}.
pub fn minus_trace_gram(tower: &FieldTower) -> Result<Matrix> {
    let n = 2 * tower.m;
    let mut powers = Vec::with_capacity(n);
    let mut x = tower.one(Level::Top);
    for _ in 0..n {
        powers.push(x.clone());
        x = tower.mul(&x, &tower.alpha)?;
    }
    let mut g = Matrix::zero(n);
    for i in 0..n {
        for j in 0..n {
            let s = tower.add(
                &tower.mul(&powers[i], &tower.bar(&powers[j])?)?,
                &tower.mul(&tower.bar(&powers[i])?, &powers[j])?,
            )?;
            let mid = tower.convert(&s, Level::Mid)?;
            g.set(i, j, tower.to_fq(&tower.trace_to_base(&mid)?)?);
        }
    }
    Ok(g)
}

/// Plus-kind trace model: vectors x₁ + x₂β with x₁, x₂ ∈ F_{q^m} and
/// Q(x₁ + x₂β) = tr(x₁x₂), in the basis ω^i, ω^iβ.
pub fn plus_trace_gram(tower: &FieldTower) -> Result<Matrix> {
    let m = tower.m;
    let omega = tower.generator(Level::Mid);
    let mut pw = Vec::with_capacity(2 * m);
    let mut x = tower.one(Level::Mid);
    for _ in 0..2 * m {
        pw.push(x.clone());
        x = tower.mul(&x, &omega)?;
    }
    let mut g = Matrix::zero(2 * m);
    for i in 0..m {
        for j in 0..m {
            let t = tower.to_fq(&tower.trace_to_base(&pw[i + j])?)?;
            g.set(i, m + j, t);
            g.set(m + j, i, t);
        }
    }
    Ok(g)
}

/// β = α^{q^m − 1}, the label of the second coordinate block of the plus model.
pub fn plus_beta(tower: &FieldTower) -> FieldElement {
    tower.pow(&tower.alpha, tower.q().pow(tower.m as u32) - 1)
}

/// Builds the model space of the given kind from a tower.
pub fn build_space(kind: Kind, tower: Arc<FieldTower>) -> Result<QuadraticSpace> {
    let fq = fq_of(&tower);
    let gram = match kind {
        Kind::Minus => minus_trace_gram(&tower)?,
        Kind::Plus => plus_trace_gram(&tower)?,
        Kind::Odd => StdForm::new(Kind::Odd, 2 * tower.m + 1, fq.clone())?.gram().clone(),
    };
    QuadraticSpace::from_gram(kind, gram, fq, Some(tower), &[])
}

/// Model-coordinate matrix of v ↦ sv on F_{q^{2m}} in the basis 1, α, …, α^{2m−1}.
pub fn mult_matrix(s: &FieldElement, tower: &FieldTower) -> Result<Matrix> {
    if tower.is_zero(s) {
        return Err(MlsError::InvalidParameter("multiplication by zero is not invertible".into()));
    }
    let s = tower.convert(s, Level::Top)?;
    let n = 2 * tower.m;
    let mut cols = Vec::with_capacity(n);
    let mut x = tower.one(Level::Top);
    for _ in 0..n {
        cols.push(tower.top_coords(&tower.mul(&s, &x)?)?);
        x = tower.mul(&x, &tower.alpha)?;
    }
    Matrix::from_cols(&cols)
}

const ORACLE_BUDGET: usize = 2_000_000;

/// The isometry group and its commutator subgroup, both by closure over the
/// reflections of the form.
pub struct ClosureOracle {
    pub full: HashSet<Matrix>,
    pub derived: HashSet<Matrix>,
}

pub fn closure_oracle(form: &StdForm) -> Result<ClosureOracle> {
    let f = form.f();
    let n = form.n;
    let refl: Vec<Matrix> = all_points(n, f.q)
        .filter(|v| form.qf(v) != 0)
        .map(|v| form.reflection(&v))
        .collect::<Result<_>>()?;
    let (full, _) = closure_incremental(refl.iter().cloned(), n, ORACLE_BUDGET, f)?;
    let comms: Vec<Matrix> = refl
        .iter()
        .flat_map(|s| refl.iter().map(move |t| s.mul(t, f).mul(s, f).mul(t, f)))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    let mut comms = comms;
    comms.sort();
    let (derived, _) = closure_incremental(comms, n, ORACLE_BUDGET, f)?;
    Ok(ClosureOracle { full, derived })
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionTally {
    pub name: &'static str,
    pub accepted: u64,
    pub disagreements: u64,
    pub witnesses: Vec<Vec<Vec<u16>>>,
}

/// Element-by-element comparison of Ω membership tests against the
/// commutator subgroup, over all of SO.
#[derive(Clone, Debug, Serialize)]
pub struct OmegaAudit {
    pub kind: Kind,
    pub n: usize,
    pub q: u64,
    pub o_order: u64,
    pub so_order: u64,
    pub oracle_order: u64,
    pub criteria: Vec<CriterionTally>,
}

impl OmegaAudit {
    pub fn agrees(&self, name: &str) -> Option<bool> {
        self.criteria.iter().find(|c| c.name == name).map(|c| c.disagreements == 0)
    }
}

pub fn omega_audit(form: &StdForm) -> Result<OmegaAudit> {
    let f = form.f();
    let oracle = closure_oracle(form)?;
    let tests: [(&'static str, Box<dyn Fn(&Matrix) -> bool>); 2] = [
        ("even_rank", Box::new(|g| form.even_rank_criterion(g))),
        ("spinor_norm", Box::new(|g| form.member(g, Flavor::Omega))),
    ];
    let mut so: Vec<&Matrix> = oracle.full.iter().filter(|g| g.det(f) == 1).collect();
    so.sort();
    let criteria = tests
        .iter()
        .map(|(name, test)| {
            let mut t = CriterionTally { name, accepted: 0, disagreements: 0, witnesses: Vec::new() };
            for g in &so {
                let says = test(g);
                t.accepted += u64::from(says);
                if says != oracle.derived.contains(*g) {
                    t.disagreements += 1;
                    if t.witnesses.len() < 5 {
                        t.witnesses.push(g.rows());
                    }
                }
            }
            t
        })
        .collect();
    Ok(OmegaAudit {
        kind: form.kind,
        n: form.n,
        q: form.q(),
        o_order: oracle.full.len() as u64,
        so_order: so.len() as u64,
        oracle_order: oracle.derived.len() as u64,
        criteria,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_tower;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std(kind: Kind, n: usize, q: (u64, usize)) -> StdForm {
        StdForm::new(kind, n, Arc::new(Fq::new(q.0, q.1).unwrap())).unwrap()
    }

    #[test]
    fn model_point_counts() {
        let t = Arc::new(make_tower(3, 1, 1).unwrap());
        let minus = build_space(Kind::Minus, t.clone()).unwrap();
        assert_eq!(minus.enumerate_l(1 << 20).unwrap().len(), 0);
        assert_eq!(minus.witt_index(), 0);
        let plus = build_space(Kind::Plus, t.clone()).unwrap();
        assert_eq!(plus.enumerate_l(1 << 20).unwrap().len(), 2);
        assert_eq!(plus.witt_index(), 1);
        let t2 = Arc::new(make_tower(3, 1, 2).unwrap());
        assert_eq!(build_space(Kind::Minus, t2.clone()).unwrap().enumerate_l(1 << 20).unwrap().len(), 10);
        assert_eq!(build_space(Kind::Plus, t2).unwrap().enumerate_l(1 << 20).unwrap().len(), 16);
        assert_eq!(build_space(Kind::Odd, t).unwrap().enumerate_l(1 << 20).unwrap().len(), 4);
    }

    #[test]
    fn norm_one_multiplication_is_isometry() {
        let t = Arc::new(make_tower(3, 1, 2).unwrap());
        let sp = build_space(Kind::Minus, t.clone()).unwrap();
        let s = t.pow(&t.alpha, 8);
        let g = mult_matrix(&s, &t).unwrap();
        assert!(sp.is_isometry(&g));
        assert!(sp.form.is_isometry(&sp.to_witt(&g)));
        // 2I scales Q by 4, which is 1 in F_3
        assert!(sp.is_isometry(&Matrix::scalar(4, 2)));
        let sp5 = build_space(Kind::Minus, Arc::new(make_tower(5, 1, 1).unwrap())).unwrap();
        assert!(!sp5.is_isometry(&Matrix::scalar(2, 2)));
        assert!(sp.is_isometry(&Matrix::identity(4)));
    }

    #[test]
    fn mult_matrix_homomorphism_and_norm() {
        let t = make_tower(3, 1, 2).unwrap();
        let f = t.fq();
        let one = mult_matrix(&t.one(Level::Top), &t).unwrap();
        assert!(one.is_identity());
        assert!(mult_matrix(&t.zero(Level::Top), &t).is_err());
        for k in 1..21u64 {
            let s = t.pow(&t.alpha, k * 7);
            let ms = mult_matrix(&s, &t).unwrap();
            let mi = mult_matrix(&t.inv(&s).unwrap(), &t).unwrap();
            assert!(ms.mul(&mi, &f).is_identity());
            let nrm = t.norm(&s, Level::Base).unwrap();
            assert_eq!(ms.det(&f), t.to_fq(&nrm).unwrap());
        }
    }

    #[test]
    fn witt_examples() {
        let t = Arc::new(make_tower(3, 1, 1).unwrap());
        let plus = build_space(Kind::Plus, t.clone()).unwrap();
        assert_eq!(plus.witt_index(), 1);
        let minus = build_space(Kind::Minus, t).unwrap();
        assert_eq!(minus.witt_index(), 0);
    }

    #[test]
    fn reflection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (kind, n) in [(Kind::Minus, 4), (Kind::Plus, 4), (Kind::Odd, 5)] {
            let s = std(kind, n, (3, 1));
            let f = s.f();
            for _ in 0..10 {
                let v = s.random_nonsingular(&mut rng);
                let r = s.reflection(&v).unwrap();
                assert!(s.is_isometry(&r));
                assert_eq!(r.apply(&v, f), v.iter().map(|&c| f.neg(c)).collect::<Vec<_>>());
                assert!(r.mul(&r, f).is_identity());
                assert_eq!(r.det(f), f.minus_one());
                assert!(s.member(&r, Flavor::O) && !s.member(&r, Flavor::SO));
                assert_eq!(s.spinor_norm(&r), s.qf(&v));
            }
            assert!(s.reflection(&s.e(0)).is_err());
        }
    }

    #[test]
    fn minus_identity_in_omega() {
        for (kind, n, q, expect) in [
            (Kind::Plus, 4, 3, true),
            (Kind::Minus, 4, 3, false),
            (Kind::Plus, 2, 3, false),
            (Kind::Minus, 2, 3, true),
            (Kind::Plus, 2, 5, true),
            (Kind::Minus, 6, 3, true),
        ] {
            let s = std(kind, n, (q, 1));
            let mi = Matrix::identity(n).neg(s.f());
            assert_eq!(s.member(&mi, Flavor::Omega), expect, "{kind:?} {n} {q}");
            assert!(s.even_rank_criterion(&mi));
        }
    }

    #[test]
    fn siegel_maps() {
        let s = std(Kind::Minus, 4, (3, 1));
        let f = s.f();
        let idx = s.wprime_idx();
        assert!(s.siegel(&vec![0; 4]).unwrap().is_identity());
        let mut images = std::collections::HashSet::new();
        for a in 0..3u16 {
            for b in 0..3u16 {
                let mut u = vec![0u16; 4];
                u[idx[0]] = a;
                u[idx[1]] = b;
                let g = s.siegel(&u).unwrap();
                assert!(s.is_isometry(&g));
                assert_eq!(g.apply(&s.e(0), f), s.e(0));
                images.insert(g);
            }
        }
        assert_eq!(images.len(), 9);
        assert!(s.siegel(&s.e(0)).is_err());
    }

    #[test]
    fn classify_is_projective() {
        let s = std(Kind::Odd, 5, (3, 1));
        let c = s.classify(&s.e(0)).unwrap();
        assert!(c.singular && c.isotropic);
        assert!(!s.classify(&s.unit(4)).unwrap().singular);
        assert!(s.classify(&[0; 5]).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_form_law(seed in any::<u64>()) {
            let s = std(Kind::Minus, 6, (5, 1));
            let f = s.f();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = s.random_vector(&mut rng);
            let v = s.random_vector(&mut rng);
            let l: u16 = rand::Rng::gen_range(&mut rng, 0..5);
            let luv: Vec<u16> = u.iter().zip(&v).map(|(&a, &b)| f.add(f.mul(l, a), b)).collect();
            let rhs = f.add(f.add(f.mul(f.mul(l, l), s.qf(&u)), f.mul(l, s.bil(&u, &v))), s.qf(&v));
            prop_assert_eq!(s.qf(&luv), rhs);
        }

        #[test]
        fn isometries_compose_and_preserve_q(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = std(Kind::Odd, 5, (3, 1));
            let f = s.f();
            let g = s.random_element(Flavor::O, &mut rng);
            let h = s.random_element(Flavor::SO, &mut rng);
            prop_assert!(s.is_isometry(&g.mul(&h, f)));
            prop_assert!(s.is_isometry(&g.inv(f).unwrap()));
            let v = s.random_vector(&mut rng);
            prop_assert_eq!(s.qf(&g.apply(&v, f)), s.qf(&v));
            let w = s.random_element(Flavor::Omega, &mut rng);
            prop_assert!(s.member(&w, Flavor::Omega));
            let prod = f.mul(s.spinor_norm(&g), s.spinor_norm(&h));
            prop_assert_eq!(f.is_square(s.spinor_norm(&g.mul(&h, f))), f.is_square(prod));
        }
    }

    #[test]
    fn omega_audit_small() {
        for (kind, n, q) in [(Kind::Minus, 4, 3), (Kind::Plus, 4, 3), (Kind::Odd, 3, 3), (Kind::Odd, 3, 5)] {
            let (p, e) = crate::arith::prime_power(q).unwrap();
            let form = StdForm::new(kind, n, Arc::new(Fq::new(p, e as usize).unwrap())).unwrap();
            let a = omega_audit(&form).unwrap();
            let want = crate::matgroups::descriptor::flavor_order(Flavor::Omega, kind, n, q).unwrap();
            assert_eq!(a.oracle_order, want);
            assert_eq!(a.agrees("spinor_norm"), Some(true));
        }
    }
}
