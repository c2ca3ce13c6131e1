//! Finite field tower F_q ⊂ F_{q^m} ⊂ F_{q^{2m}} over an odd prime p.
//!
//! Every level is stored in the power basis of its own modulus; embeddings
//! between levels go through cached images of the level generators in the
//! top field.

use serde::{Deserialize, Serialize};

use crate::arith::{factorize, is_prime};
use crate::error::{MlsError, Result};

type Poly = Vec<u64>;

fn trim(mut a: Poly) -> Poly {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn poly_rem(a: &[u64], m: &[u64], p: u64) -> Poly {
    let mut r = trim(a.to_vec());
    let dm = m.len() - 1;
    let lead_inv = crate::arith::mod_inv(m[dm], p);
    while r.len() > dm {
        let top = r.len() - 1;
        let c = r[top] * lead_inv % p;
        if c != 0 {
            for (i, &mi) in m.iter().enumerate() {
                let k = top - dm + i;
                r[k] = (r[k] + p - c * mi % p) % p;
            }
        }
        r = trim(r);
    }
    r
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut r = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            r[i + j] = (r[i + j] + x * y) % p;
        }
    }
    trim(r)
}

fn poly_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Poly {
    poly_rem(&poly_mul(a, b, p), m, p)
}

fn poly_powmod(base: &[u64], mut e: u64, m: &[u64], p: u64) -> Poly {
    let mut r = vec![1u64];
    let mut b = poly_rem(base, m, p);
    while e > 0 {
        if e & 1 == 1 {
            r = poly_mulmod(&r, &b, m, p);
        }
        b = poly_mulmod(&b, &b, m, p);
        e >>= 1;
    }
    r
}

fn poly_sub(a: &[u64], b: &[u64], p: u64) -> Poly {
    let n = a.len().max(b.len());
    let r = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    trim(r)
}

fn poly_gcd(a: &[u64], b: &[u64], p: u64) -> Poly {
    let (mut a, mut b) = (trim(a.to_vec()), trim(b.to_vec()));
    while !b.is_empty() {
        let r = poly_rem(&a, &b, p);
        a = b;
        b = r;
    }
    a
}

/// Rabin's irreducibility test for a monic polynomial over F_p.
pub fn is_irreducible(f: &[u64], p: u64) -> bool {
    let n = f.len() - 1;
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let x = vec![0u64, 1];
    let frob = |k: usize| {
        let mut t = x.clone();
        for _ in 0..k {
            t = poly_powmod(&t, p, f, p);
        }
        t
    };
    if !poly_sub(&frob(n), &x, p).is_empty() {
        return false;
    }
    factorize(n as u64).iter().all(|&(r, _)| {
        let g = poly_gcd(f, &poly_sub(&frob(n / r as usize), &x, p), p);
        g.len() == 1
    })
}

/// Coefficient vector number `k` in the low-degree-first lexicographic order.
fn nth_lex(k: u64, len: usize, p: u64) -> Vec<u64> {
    let mut v = vec![0u64; len];
    let mut k = k;
    for i in (0..len).rev() {
        v[i] = k % p;
        k /= p;
    }
    v
}

/// Lexicographically smallest monic irreducible of degree `d` over F_p,
/// comparing coefficient vectors from the constant term upwards.
pub fn smallest_irreducible(p: u64, d: usize) -> Poly {
    let count = p.pow(d as u32);
    (0..count)
        .map(|k| {
            let mut f = nth_lex(k, d, p);
            f.push(1);
            f
        })
        .find(|f| is_irreducible(f, p))
        .expect("an irreducible polynomial of every degree exists")
}

/// One simple extension F_p[x]/(modulus).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtField {
    pub p: u64,
    pub modulus: Poly,
}

impl ExtField {
    pub fn new(p: u64, deg: usize) -> Self {
        ExtField { p, modulus: smallest_irreducible(p, deg) }
    }

    pub fn degree(&self) -> usize {
        self.modulus.len() - 1
    }

    pub fn size(&self) -> u64 {
        self.p.pow(self.degree() as u32)
    }

    fn pad(&self, mut v: Poly) -> Vec<u64> {
        v.resize(self.degree(), 0);
        v
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.degree()]
    }

    pub fn one(&self) -> Vec<u64> {
        self.pad(vec![1])
    }

    pub fn scalar(&self, c: u64) -> Vec<u64> {
        self.pad(vec![c % self.p])
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + y) % self.p).collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + self.p - y) % self.p).collect()
    }

    pub fn neg(&self, a: &[u64]) -> Vec<u64> {
        a.iter().map(|x| (self.p - x) % self.p).collect()
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        self.pad(poly_mulmod(a, b, &self.modulus, self.p))
    }

    pub fn pow(&self, a: &[u64], e: u64) -> Vec<u64> {
        self.pad(poly_powmod(a, e, &self.modulus, self.p))
    }

    pub fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&c| c == 0)
    }

    pub fn inv(&self, a: &[u64]) -> Result<Vec<u64>> {
        if self.is_zero(a) {
            return Err(MlsError::DivisionByZero);
        }
        Ok(self.pow(a, self.size() - 2))
    }

    /// Multiplicative order of a nonzero element.
    pub fn order(&self, a: &[u64]) -> u64 {
        let n = self.size() - 1;
        let one = self.one();
        let mut ord = n;
        for (r, _) in factorize(n) {
            while ord % r == 0 && self.pow(a, ord / r) == one {
                ord /= r;
            }
        }
        ord
    }

    /// The `k`-th element in lexicographic order (constant term most significant).
    pub fn nth(&self, k: u64) -> Vec<u64> {
        nth_lex(k, self.degree(), self.p)
    }

    pub fn eval(&self, f: &[u64], x: &[u64]) -> Vec<u64> {
        f.iter().rev().fold(self.zero(), |acc, &c| self.add(&self.mul(&acc, x), &self.scalar(c)))
    }
}

/// Position of a field in the tower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Base = 0,
    Mid = 1,
    Top = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Base, Level::Mid, Level::Top];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Level> {
        Level::ALL.get(i).copied().ok_or_else(|| MlsError::InvalidParameter(format!("no tower level {i}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    pub level: Level,
    pub coeffs: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct FieldElementRepr {
    level: usize,
    coeffs: Vec<u64>,
}

impl Serialize for FieldElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldElementRepr { level: self.level.index(), coeffs: self.coeffs.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FieldElementRepr::deserialize(d)?;
        let level = Level::from_index(r.level).map_err(serde::de::Error::custom)?;
        Ok(FieldElement { level, coeffs: r.coeffs })
    }
}

#[derive(Clone, Debug)]
pub struct FieldTower {
    pub p: u64,
    pub e: usize,
    pub m: usize,
    fields: [ExtField; 3],
    pub alpha: FieldElement,
    /// Image of each level's generator in the top field.
    gen_top: [Vec<u64>; 3],
    /// Solves top-field coordinates back to each level (F_p matrices, row-major).
    restrict_mats: [Vec<Vec<u64>>; 3],
    fq_basis_inv: Vec<Vec<u64>>,
}

#[derive(Serialize)]
pub struct TowerRepr {
    pub p: u64,
    pub e: usize,
    pub m: usize,
    pub moduli: Vec<Vec<u64>>,
    pub alpha: FieldElement,
}

/// Inverse of a square matrix over F_p by Gauss-Jordan elimination.
fn invert_fp(a: &[Vec<u64>], p: u64) -> Option<Vec<Vec<u64>>> {
    let n = a.len();
    let mut m: Vec<Vec<u64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| u64::from(i == j)));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).find(|&r| m[r][c] != 0)?;
        m.swap(c, piv);
        let inv = crate::arith::mod_inv(m[c][c], p);
        for x in m[c].iter_mut() {
            *x = *x * inv % p;
        }
        for r in 0..n {
            if r != c && m[r][c] != 0 {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot_row) {
                    *x = (*x + p - f * y % p) % p;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn mat_vec_fp(a: &[Vec<u64>], v: &[u64], p: u64) -> Vec<u64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y % p).sum::<u64>() % p).collect()
}

impl FieldTower {
    pub fn field(&self, level: Level) -> &ExtField {
        &self.fields[level.index()]
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.e as u32)
    }

    pub fn degree(&self, level: Level) -> usize {
        self.field(level).degree()
    }

    pub fn repr(&self) -> TowerRepr {
        TowerRepr {
            p: self.p,
            e: self.e,
            m: self.m,
            moduli: self.fields.iter().map(|f| f.modulus.clone()).collect(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn element(&self, level: Level, coeffs: Vec<u64>) -> Result<FieldElement> {
        let f = self.field(level);
        if coeffs.len() != f.degree() || coeffs.iter().any(|&c| c >= self.p) {
            return Err(MlsError::InvalidParameter(format!("coefficients {coeffs:?} do not fit level {level:?}")));
        }
        Ok(FieldElement { level, coeffs })
    }

    pub fn zero(&self, level: Level) -> FieldElement {
        FieldElement { level, coeffs: self.field(level).zero() }
    }

    pub fn one(&self, level: Level) -> FieldElement {
        FieldElement { level, coeffs: self.field(level).one() }
    }

    /// The generator x of a level's power basis.
    pub fn generator(&self, level: Level) -> FieldElement {
        let f = self.field(level);
        let coeffs = if f.degree() == 1 { f.zero() } else { f.pad(vec![0, 1]) };
        FieldElement { level, coeffs }
    }

    fn same(&self, x: &FieldElement, y: &FieldElement) -> Result<()> {
        if x.level != y.level {
            return Err(MlsError::LevelMismatch(x.level.index(), y.level.index()));
        }
        Ok(())
    }

    pub fn add(&self, x: &FieldElement, y: &FieldElement) -> Result<FieldElement> {
        self.same(x, y)?;
        Ok(FieldElement { level: x.level, coeffs: self.field(x.level).add(&x.coeffs, &y.coeffs) })
    }

    pub fn sub(&self, x: &FieldElement, y: &FieldElement) -> Result<FieldElement> {
        self.same(x, y)?;
        Ok(FieldElement { level: x.level, coeffs: self.field(x.level).sub(&x.coeffs, &y.coeffs) })
    }

    pub fn mul(&self, x: &FieldElement, y: &FieldElement) -> Result<FieldElement> {
        self.same(x, y)?;
        Ok(FieldElement { level: x.level, coeffs: self.field(x.level).mul(&x.coeffs, &y.coeffs) })
    }

    pub fn inv(&self, x: &FieldElement) -> Result<FieldElement> {
        Ok(FieldElement { level: x.level, coeffs: self.field(x.level).inv(&x.coeffs)? })
    }

    pub fn pow(&self, x: &FieldElement, e: u64) -> FieldElement {
        FieldElement { level: x.level, coeffs: self.field(x.level).pow(&x.coeffs, e) }
    }

    pub fn is_zero(&self, x: &FieldElement) -> bool {
        x.coeffs.iter().all(|&c| c == 0)
    }

    pub fn order(&self, x: &FieldElement) -> Result<u64> {
        if self.is_zero(x) {
            return Err(MlsError::DivisionByZero);
        }
        Ok(self.field(x.level).order(&x.coeffs))
    }

    fn to_top(&self, x: &FieldElement) -> Vec<u64> {
        let top = self.field(Level::Top);
        let g = &self.gen_top[x.level.index()];
        x.coeffs
            .iter()
            .rev()
            .fold(top.zero(), |acc, &c| top.add(&top.mul(&acc, g), &top.scalar(c)))
    }

    /// Moves an element to another level, failing if it does not lie in the
    /// target subfield.
    pub fn convert(&self, x: &FieldElement, to: Level) -> Result<FieldElement> {
        if x.level == to {
            return Ok(x.clone());
        }
        let t = self.to_top(x);
        if to == Level::Top {
            return Ok(FieldElement { level: to, coeffs: t });
        }
        let sol = mat_vec_fp(&self.restrict_mats[to.index()], &t, self.p);
        let d = self.degree(to);
        if sol[d..].iter().any(|&c| c != 0) {
            return Err(MlsError::InvalidParameter(format!("element does not lie in level {to:?}")));
        }
        Ok(FieldElement { level: to, coeffs: sol[..d].to_vec() })
    }

    /// x^{q^m} on the top field.
    pub fn bar(&self, x: &FieldElement) -> Result<FieldElement> {
        if x.level != Level::Top {
            return Err(MlsError::LevelMismatch(x.level.index(), Level::Top.index()));
        }
        Ok(self.pow(x, self.q().pow(self.m as u32)))
    }

    /// Relative trace from the level of `x` down to `to`.
    pub fn trace(&self, x: &FieldElement, to: Level) -> Result<FieldElement> {
        if to > x.level {
            return Err(MlsError::LevelMismatch(x.level.index(), to.index()));
        }
        let k = self.degree(x.level) / self.degree(to);
        let sz = self.field(to).size();
        let mut acc = self.zero(x.level);
        let mut y = x.clone();
        for _ in 0..k {
            acc = self.add(&acc, &y)?;
            y = self.pow(&y, sz);
        }
        self.convert(&acc, to)
    }

    pub fn trace_to_base(&self, x: &FieldElement) -> Result<FieldElement> {
        self.trace(x, Level::Base)
    }

    /// Relative norm from the level of `x` down to `to`.
    pub fn norm(&self, x: &FieldElement, to: Level) -> Result<FieldElement> {
        if to > x.level {
            return Err(MlsError::LevelMismatch(x.level.index(), to.index()));
        }
        let big = self.field(x.level).size() - 1;
        let small = self.field(to).size() - 1;
        self.convert(&self.pow(x, big / small), to)
    }

    /// The compact representation of F_q used for matrix entries.
    pub fn fq(&self) -> Fq {
        Fq::new(self.p, self.e).expect("tower parameters already validated")
    }

    pub fn to_fq(&self, x: &FieldElement) -> Result<u16> {
        let b = self.convert(x, Level::Base)?;
        Ok(b.coeffs.iter().rev().fold(0u64, |acc, &c| acc * self.p + c) as u16)
    }

    pub fn from_fq(&self, c: u16, level: Level) -> FieldElement {
        let coeffs = nth_lex_rev(c as u64, self.e, self.p);
        let b = FieldElement { level: Level::Base, coeffs };
        self.convert(&b, level).expect("embedding into a larger level")
    }

    /// Coordinates of a top-field element over F_q in the basis 1, α, …, α^{2m−1}.
    pub fn top_coords(&self, x: &FieldElement) -> Result<Vec<u16>> {
        let t = self.convert(x, Level::Top)?;
        let sol = mat_vec_fp(&self.fq_basis_inv, &t.coeffs, self.p);
        Ok(sol
            .chunks(self.e)
            .map(|ch| ch.iter().rev().fold(0u64, |acc, &c| acc * self.p + c) as u16)
            .collect())
    }

    /// Inverse of [`FieldTower::top_coords`].
    pub fn from_top_coords(&self, c: &[u16]) -> FieldElement {
        let top = self.field(Level::Top);
        let mut acc = top.zero();
        let mut apow = top.one();
        for &ci in c {
            let s = self.from_fq(ci, Level::Top);
            acc = top.add(&acc, &top.mul(&s.coeffs, &apow));
            apow = top.mul(&apow, &self.alpha.coeffs);
        }
        FieldElement { level: Level::Top, coeffs: acc }
    }
}

/// Code digits with the constant term least significant.
fn nth_lex_rev(k: u64, len: usize, p: u64) -> Vec<u64> {
    let mut k = k;
    (0..len)
        .map(|_| {
            let d = k % p;
            k /= p;
            d
        })
        .collect()
}

/// Smallest root of `f` in the top field, searching the subfield of size p^d.
fn smallest_root(top: &ExtField, alpha: &[u64], f: &[u64]) -> Vec<u64> {
    let d = f.len() - 1;
    let sub = top.p.pow(d as u32) - 1;
    let beta = top.pow(alpha, (top.size() - 1) / sub);
    let mut roots = Vec::new();
    if top.is_zero(&top.eval(f, &top.zero())) {
        roots.push(top.zero());
    }
    let mut x = top.one();
    for _ in 0..sub {
        if top.is_zero(&top.eval(f, &x)) {
            roots.push(x.clone());
        }
        x = top.mul(&x, &beta);
    }
    roots.into_iter().min().expect("irreducible polynomial splits in the top field")
}

/// Builds the tower F_q ⊂ F_{q^m} ⊂ F_{q^{2m}} with q = p^e.
pub fn make_tower(p: u64, e: usize, m: usize) -> Result<FieldTower> {
    if p % 2 == 0 || !is_prime(p) {
        return Err(MlsError::InvalidParameter(format!("p must be an odd prime, got {p}")));
    }
    if e == 0 || m == 0 {
        return Err(MlsError::InvalidParameter("e and m must be at least 1".into()));
    }
    let top_deg = 2 * e * m;
    if (p as f64).powi(top_deg as i32) > 1.0e7 {
        return Err(MlsError::Unsupported(format!("field of size {p}^{top_deg} is beyond desk scale")));
    }
    let fields = [ExtField::new(p, e), ExtField::new(p, e * m), ExtField::new(p, top_deg)];
    let top = &fields[2];
    let full = top.size() - 1;
    let alpha = (1..top.size())
        .map(|k| top.nth(k))
        .find(|a| !top.is_zero(a) && top.order(a) == full)
        .expect("a primitive element exists");

    let mut gen_top: [Vec<u64>; 3] = Default::default();
    gen_top[2] = top.pad(vec![0, 1]);
    gen_top[1] = smallest_root(top, &alpha, &fields[1].modulus);
    gen_top[0] = smallest_root(top, &alpha, &fields[0].modulus);

    let restrict_mats: [Vec<Vec<u64>>; 3] = std::array::from_fn(|l| {
        // columns: images of g_l^i for i < deg_l, completed to a basis of the top field
        let d = fields[l].degree();
        let mut cols: Vec<Vec<u64>> = Vec::new();
        let mut x = top.one();
        for _ in 0..d {
            cols.push(x.clone());
            x = top.mul(&x, &gen_top[l]);
        }
        complete_basis(&mut cols, top_deg, p);
        let a: Vec<Vec<u64>> = (0..top_deg).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
        invert_fp(&a, p).expect("basis columns are independent")
    });

    let fq_basis_inv = {
        let mut cols = Vec::new();
        let mut apow = top.one();
        for _ in 0..2 * m {
            let mut th = top.one();
            for _ in 0..e {
                cols.push(top.mul(&th, &apow));
                th = top.mul(&th, &gen_top[0]);
            }
            apow = top.mul(&apow, &alpha);
        }
        let a: Vec<Vec<u64>> = (0..top_deg).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
        invert_fp(&a, p).expect("1, α, …, α^{2m−1} is an F_q-basis")
    };

    let tower = FieldTower {
        p,
        e,
        m,
        fields,
        alpha: FieldElement { level: Level::Top, coeffs: alpha },
        gen_top,
        restrict_mats,
        fq_basis_inv,
    };
    tower.spot_check()?;
    Ok(tower)
}

/// Extends independent columns to a basis with unit vectors.
fn complete_basis(cols: &mut Vec<Vec<u64>>, n: usize, p: u64) {
    for i in 0..n {
        if cols.len() == n {
            break;
        }
        let mut unit = vec![0u64; n];
        unit[i] = 1;
        cols.push(unit);
        if rank_fp(cols, p) < cols.len() {
            cols.pop();
        }
    }
}

fn rank_fp(cols: &[Vec<u64>], p: u64) -> usize {
    let mut rows: Vec<Vec<u64>> = cols.to_vec();
    let n = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..n {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else { continue };
        rows.swap(rank, piv);
        let inv = crate::arith::mod_inv(rows[rank][c], p);
        let pr: Vec<u64> = rows[rank].iter().map(|x| x * inv % p).collect();
        for r in rank + 1..rows.len() {
            let f = rows[r][c];
            if f != 0 {
                for (x, y) in rows[r].iter_mut().zip(&pr) {
                    *x = (*x + p - f * y % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

impl FieldTower {
    fn spot_check(&self) -> Result<()> {
        for l in [Level::Base, Level::Mid] {
            let f = self.field(l);
            let n = f.size();
            for k in [1, 2, n / 3, n / 2, n - 1] {
                let x = FieldElement { level: l, coeffs: f.nth(k % n) };
                let y = FieldElement { level: l, coeffs: f.nth((k * 7 + 3) % n) };
                let lhs = self.convert(&self.mul(&x, &y)?, Level::Top)?;
                let rhs = self.mul(&self.convert(&x, Level::Top)?, &self.convert(&y, Level::Top)?)?;
                let sl = self.convert(&self.add(&x, &y)?, Level::Top)?;
                let sr = self.add(&self.convert(&x, Level::Top)?, &self.convert(&y, Level::Top)?)?;
                if lhs != rhs || sl != sr {
                    return Err(MlsError::ConstructionMismatch(format!("embedding of level {l:?} is not a homomorphism")));
                }
            }
        }
        Ok(())
    }
}

/// Compact F_q with u16 codes; code = Σ c_i p^i over the base modulus.
#[derive(Clone, Debug)]
pub struct Fq {
    pub p: u16,
    pub e: usize,
    pub q: u16,
    add_t: Vec<u16>,
    mul_t: Vec<u16>,
    inv_t: Vec<u16>,
    sqrt_t: Vec<Option<u16>>,
    nonsquare: u16,
    primitive: u16,
}

impl PartialEq for Fq {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.e == other.e
    }
}

impl Fq {
    pub fn new(p: u64, e: usize) -> Result<Fq> {
        if p % 2 == 0 || !is_prime(p) || e == 0 {
            return Err(MlsError::InvalidParameter(format!("F_q needs an odd prime p and e ≥ 1, got p={p}, e={e}")));
        }
        let q = p.pow(e as u32);
        if q > 1024 {
            return Err(MlsError::Unsupported(format!("q = {q} is beyond desk scale")));
        }
        let f = ExtField::new(p, e);
        let qs = q as usize;
        let decode = |c: usize| nth_lex_rev(c as u64, e, p);
        let encode = |v: &[u64]| v.iter().rev().fold(0u64, |acc, &c| acc * p + c) as u16;
        let mut add_t = vec![0u16; qs * qs];
        let mut mul_t = vec![0u16; qs * qs];
        for a in 0..qs {
            let va = decode(a);
            for b in 0..qs {
                let vb = decode(b);
                add_t[a * qs + b] = encode(&f.add(&va, &vb));
                mul_t[a * qs + b] = encode(&f.mul(&va, &vb));
            }
        }
        let mut inv_t = vec![0u16; qs];
        let mut sqrt_t = vec![None; qs];
        for a in 0..qs {
            for b in 0..qs {
                if mul_t[a * qs + b] == 1 {
                    inv_t[a] = b as u16;
                }
            }
            let sq = mul_t[a * qs + a] as usize;
            if sqrt_t[sq].is_none() {
                sqrt_t[sq] = Some(a as u16);
            }
        }
        let nonsquare = (1..qs).find(|&a| sqrt_t[a].is_none()).expect("q odd has nonsquares") as u16;
        let mut fq = Fq { p: p as u16, e, q: q as u16, add_t, mul_t, inv_t, sqrt_t, nonsquare, primitive: 0 };
        fq.primitive = (1..q as u16).find(|&a| fq.mult_order(a) == q as u64 - 1).expect("F_q* is cyclic");
        Ok(fq)
    }

    #[inline]
    pub fn add(&self, a: u16, b: u16) -> u16 {
        self.add_t[a as usize * self.q as usize + b as usize]
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        self.mul_t[a as usize * self.q as usize + b as usize]
    }

    #[inline]
    pub fn neg(&self, a: u16) -> u16 {
        self.mul(self.minus_one(), a)
    }

    #[inline]
    pub fn sub(&self, a: u16, b: u16) -> u16 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn minus_one(&self) -> u16 {
        self.p - 1
    }

    pub fn inv(&self, a: u16) -> Result<u16> {
        if a == 0 {
            return Err(MlsError::DivisionByZero);
        }
        Ok(self.inv_t[a as usize])
    }

    pub fn pow(&self, a: u16, mut e: u64) -> u16 {
        let mut r = 1u16;
        let mut b = a;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        r
    }

    pub fn from_int(&self, k: i64) -> u16 {
        k.rem_euclid(self.p as i64) as u16
    }

    pub fn is_square(&self, a: u16) -> bool {
        self.sqrt_t[a as usize].is_some()
    }

    pub fn sqrt(&self, a: u16) -> Option<u16> {
        self.sqrt_t[a as usize]
    }

    /// Smallest nonsquare code.
    pub fn nonsquare(&self) -> u16 {
        self.nonsquare
    }

    /// Smallest code of multiplicative order q − 1.
    pub fn primitive(&self) -> u16 {
        self.primitive
    }

    pub fn mult_order(&self, a: u16) -> u64 {
        let n = self.q as u64 - 1;
        let mut ord = n;
        for (r, _) in factorize(n) {
            while ord % r == 0 && self.pow(a, ord / r) == 1 {
                ord /= r;
            }
        }
        ord
    }

    /// Discrete log to the base `g` by table scan.
    pub fn dlog(&self, g: u16, a: u16) -> Option<u64> {
        let mut x = 1u16;
        for k in 0..self.q as u64 {
            if x == a {
                return Some(k);
            }
            x = self.mul(x, g);
        }
        None
    }

    pub fn elements(&self) -> impl Iterator<Item = u16> {
        0..self.q
    }

    pub fn half(&self) -> u16 {
        self.inv_t[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f9_tower() {
        let t = make_tower(3, 1, 1).unwrap();
        assert_eq!(t.field(Level::Top).modulus, vec![1, 0, 1]);
        assert_eq!(t.alpha.coeffs, vec![1, 1]);
        assert_eq!(t.order(&t.alpha).unwrap(), 8);
        let x = t.generator(Level::Top);
        assert_eq!(t.mul(&x, &x).unwrap().coeffs, vec![2, 0]);
        let a2 = t.pow(&t.alpha, 2);
        assert_eq!(a2.coeffs, vec![0, 2]);
        assert_eq!(t.pow(&t.alpha, 4).coeffs, vec![2, 0]);
    }

    #[test]
    fn f81_alpha() {
        let t = make_tower(3, 1, 2).unwrap();
        assert_eq!(t.order(&t.alpha).unwrap(), 80);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_tower(2, 1, 1).is_err());
        assert!(make_tower(9, 1, 1).is_err());
        assert!(make_tower(3, 0, 1).is_err());
        assert!(make_tower(3, 1, 0).is_err());
    }

    #[test]
    fn trace_examples() {
        let t = make_tower(3, 1, 1).unwrap();
        let one = t.one(Level::Top);
        assert_eq!(t.trace(&one, Level::Base).unwrap().coeffs, vec![2]);
        let x = t.generator(Level::Top);
        assert_eq!(t.trace(&x, Level::Base).unwrap().coeffs, vec![0]);
        assert_eq!(t.trace(&t.zero(Level::Top), Level::Base).unwrap().coeffs, vec![0]);
        assert_eq!(t.inv(&one).unwrap(), one);
        assert!(t.inv(&t.zero(Level::Top)).is_err());
    }

    #[test]
    fn trace_to_base_from_mid() {
        let t = make_tower(3, 1, 2).unwrap();
        let one = t.one(Level::Mid);
        assert_eq!(t.trace_to_base(&one).unwrap().coeffs, vec![2]);
    }

    #[test]
    fn norm_lands_in_mid() {
        let t = make_tower(3, 1, 2).unwrap();
        let n = t.mul(&t.bar(&t.alpha).unwrap(), &t.alpha).unwrap();
        assert!(t.convert(&n, Level::Mid).is_ok());
        assert!(t.convert(&t.alpha, Level::Mid).is_err());
    }

    #[test]
    fn tower_with_e2() {
        let t = make_tower(3, 2, 1).unwrap();
        assert_eq!(t.q(), 9);
        assert_eq!(t.order(&t.alpha).unwrap(), 80);
        for k in 0..9 {
            let c = t.from_fq(k, Level::Top);
            assert_eq!(t.to_fq(&c).unwrap(), k);
            assert_eq!(t.bar(&c).unwrap(), c);
        }
    }

    #[test]
    fn top_coords_roundtrip() {
        let t = make_tower(3, 1, 2).unwrap();
        for k in 0..81 {
            let x = FieldElement { level: Level::Top, coeffs: t.field(Level::Top).nth(k) };
            let c = t.top_coords(&x).unwrap();
            assert_eq!(t.from_top_coords(&c), x);
        }
        assert_eq!(t.top_coords(&t.alpha).unwrap(), vec![0, 1, 0, 0]);
    }

    #[test]
    fn fq_tables() {
        let f = Fq::new(3, 1).unwrap();
        assert_eq!(f.nonsquare(), 2);
        assert_eq!(f.primitive(), 2);
        let f9 = Fq::new(3, 2).unwrap();
        for a in 1..9 {
            assert_eq!(f9.mul(a, f9.inv(a).unwrap()), 1);
            assert_eq!(f9.pow(a, 8), 1);
        }
        assert_eq!(f9.mult_order(f9.primitive()), 8);
        assert_eq!((1..9).filter(|&a| f9.is_square(a)).count(), 4);
        assert!(Fq::new(2, 1).is_err());
    }

    fn t525() -> &'static FieldTower {
        static T: std::sync::OnceLock<FieldTower> = std::sync::OnceLock::new();
        T.get_or_init(|| make_tower(5, 1, 2).unwrap())
    }

    fn t312() -> &'static FieldTower {
        static T: std::sync::OnceLock<FieldTower> = std::sync::OnceLock::new();
        T.get_or_init(|| make_tower(3, 1, 2).unwrap())
    }

    fn elem(t: &FieldTower, l: Level, k: u64) -> FieldElement {
        let f = t.field(l);
        FieldElement { level: l, coeffs: f.nth(k % f.size()) }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn ring_axioms(a in 0u64..625, b in 0u64..625, c in 0u64..625) {
            let t = t525();
            let (x, y, z) = (elem(t, Level::Top, a), elem(t, Level::Top, b), elem(t, Level::Top, c));
            prop_assert_eq!(t.mul(&x, &y).unwrap(), t.mul(&y, &x).unwrap());
            prop_assert_eq!(t.add(&x, &y).unwrap(), t.add(&y, &x).unwrap());
            prop_assert_eq!(t.mul(&t.mul(&x, &y).unwrap(), &z).unwrap(), t.mul(&x, &t.mul(&y, &z).unwrap()).unwrap());
            prop_assert_eq!(
                t.mul(&x, &t.add(&y, &z).unwrap()).unwrap(),
                t.add(&t.mul(&x, &y).unwrap(), &t.mul(&x, &z).unwrap()).unwrap()
            );
        }

        #[test]
        fn trace_linear_and_bar_automorphism(a in 0u64..81, b in 0u64..81, l in 0u64..3) {
            let t = t312();
            let (x, y) = (elem(t, Level::Top, a), elem(t, Level::Top, b));
            let lam = t.from_fq(l as u16, Level::Top);
            let lhs = t.trace(&t.add(&t.mul(&lam, &x).unwrap(), &y).unwrap(), Level::Base).unwrap();
            let rhs = t.add(
                &t.mul(&t.from_fq(l as u16, Level::Base), &t.trace(&x, Level::Base).unwrap()).unwrap(),
                &t.trace(&y, Level::Base).unwrap(),
            ).unwrap();
            prop_assert_eq!(lhs, rhs);
            let bx = t.bar(&x).unwrap();
            let by = t.bar(&y).unwrap();
            prop_assert_eq!(t.bar(&t.mul(&x, &y).unwrap()).unwrap(), t.mul(&bx, &by).unwrap());
            prop_assert_eq!(t.bar(&t.add(&x, &y).unwrap()).unwrap(), t.add(&bx, &by).unwrap());
            prop_assert_eq!(t.bar(&bx).unwrap(), x);
        }

        #[test]
        fn mid_elements_fixed_by_bar(a in 0u64..9) {
            let t = t312();
            let c = t.convert(&elem(t, Level::Mid, a), Level::Top).unwrap();
            prop_assert_eq!(t.bar(&c).unwrap(), c);
        }
    }
}
