use serde::{Deserialize, Serialize};

use crate::error::{MlsError, Result};
use crate::fields::{FieldElement, Fq, Level};

/// Dense square matrix over F_q, row-major, entries as F_q codes.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Matrix {
    n: usize,
    data: Vec<u16>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct MatrixRepr {
    pub n: usize,
    pub entries: Vec<Vec<FieldElement>>,
}

impl Matrix {
    pub fn zero(n: usize) -> Self {
        Matrix { n, data: vec![0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn scalar(n: usize, c: u16) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.data[i * n + i] = c;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u16>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(MlsError::DimensionMismatch { expected: n, found: r.len() });
        }
        Ok(Matrix { n, data: rows.concat() })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<u16>]) -> Result<Self> {
        Ok(Self::from_rows(cols)?.transpose())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u16) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn col(&self, j: usize) -> Vec<u16> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u16>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn raw(&self) -> &[u16] {
        &self.data
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix, f: &Fq) -> Matrix {
        assert_eq!(self.n, other.n, "matrix dimensions differ");
        let n = self.n;
        let mut out = vec![0u16; n * n];
        if f.e == 1 {
            let p = f.p as u32;
            for i in 0..n {
                let a = &self.data[i * n..(i + 1) * n];
                for j in 0..n {
                    let mut s = 0u32;
                    for (k, &aik) in a.iter().enumerate() {
                        s += aik as u32 * other.data[k * n + j] as u32;
                    }
                    out[i * n + j] = (s % p) as u16;
                }
            }
        } else {
            for i in 0..n {
                for k in 0..n {
                    let aik = self.data[i * n + k];
                    if aik == 0 {
                        continue;
                    }
                    for j in 0..n {
                        let prod = f.mul(aik, other.data[k * n + j]);
                        out[i * n + j] = f.add(out[i * n + j], prod);
                    }
                }
            }
        }
        Matrix { n, data: out }
    }

    pub fn checked_mul(&self, other: &Matrix, f: &Fq) -> Result<Matrix> {
        if self.n != other.n {
            return Err(MlsError::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(self.mul(other, f))
    }

    pub fn apply(&self, v: &[u16], f: &Fq) -> Vec<u16> {
        let n = self.n;
        (0..n)
            .map(|i| dot(&self.data[i * n..(i + 1) * n], v, f))
            .collect()
    }

    pub fn neg(&self, f: &Fq) -> Matrix {
        self.scale(f.minus_one(), f)
    }

    pub fn scale(&self, c: u16, f: &Fq) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|&x| f.mul(c, x)).collect() }
    }

    pub fn add(&self, other: &Matrix, f: &Fq) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(&a, &b)| f.add(a, b)).collect() }
    }

    pub fn sub(&self, other: &Matrix, f: &Fq) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(&a, &b)| f.sub(a, b)).collect() }
    }

    /// Row echelon reduction in place; returns pivot columns and the product
    /// of pivots with sign from swaps.
    fn eliminate(rows: &mut [Vec<u16>], f: &Fq) -> (Vec<usize>, u16) {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        let mut det = 1u16;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..nc {
            if r == nr {
                break;
            }
            let Some(piv) = (r..nr).find(|&i| rows[i][c] != 0) else { continue };
            if piv != r {
                rows.swap(piv, r);
                det = f.neg(det);
            }
            let pv = rows[r][c];
            det = f.mul(det, pv);
            let inv = f.inv(pv).expect("pivot is nonzero");
            for x in rows[r].iter_mut() {
                *x = f.mul(*x, inv);
            }
            let pr = rows[r].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i == r || row[c] == 0 {
                    continue;
                }
                let k = row[c];
                for (x, &y) in row.iter_mut().zip(&pr) {
                    *x = f.sub(*x, f.mul(k, y));
                }
            }
            pivots.push(c);
            r += 1;
        }
        (pivots, det)
    }

    pub fn det(&self, f: &Fq) -> u16 {
        let mut rows = self.rows();
        let (piv, d) = Self::eliminate(&mut rows, f);
        if piv.len() < self.n { 0 } else { d }
    }

    pub fn rank(&self, f: &Fq) -> usize {
        let mut rows = self.rows();
        Self::eliminate(&mut rows, f).0.len()
    }

    pub fn inv(&self, f: &Fq) -> Result<Matrix> {
        let n = self.n;
        let mut rows: Vec<Vec<u16>> = (0..n)
            .map(|i| {
                let mut r = self.row(i).to_vec();
                r.extend((0..n).map(|j| u16::from(i == j)));
                r
            })
            .collect();
        let (piv, _) = Self::eliminate(&mut rows, f);
        if piv.len() < n || piv[n - 1] != n - 1 {
            return Err(MlsError::Singular);
        }
        Ok(Matrix { n, data: rows.into_iter().flat_map(|r| r[n..].to_vec()).collect() })
    }

    pub fn transpose_inv(&self, f: &Fq) -> Result<Matrix> {
        Ok(self.inv(f)?.transpose())
    }

    pub fn pow(&self, mut e: u64, f: &Fq) -> Matrix {
        let mut r = Self::identity(self.n);
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                r = r.mul(&b, f);
            }
            b = b.mul(&b, f);
            e >>= 1;
        }
        r
    }

    /// Least t ≤ cap with g^t = I.
    pub fn element_order(&self, cap: u64, f: &Fq) -> Result<u64> {
        if self.det(f) == 0 {
            return Err(MlsError::Singular);
        }
        let id = Self::identity(self.n);
        let mut x = self.clone();
        for t in 1..=cap {
            if x == id {
                return Ok(t);
            }
            x = x.mul(self, f);
        }
        Err(MlsError::CapExceeded(cap))
    }

    /// Order of g given a multiple `n` of it.
    pub fn order_dividing(&self, n: u64, f: &Fq) -> Result<u64> {
        if !self.pow(n, f).is_identity() {
            return Err(MlsError::InvalidParameter(format!("{n} is not a multiple of the element order")));
        }
        let mut ord = n;
        for (r, _) in crate::arith::factorize(n) {
            while ord % r == 0 && self.pow(ord / r, f).is_identity() {
                ord /= r;
            }
        }
        Ok(ord)
    }

    /// Block-diagonal embedding: `self` acts on coordinates `idx` of an
    /// `n`-dimensional space, identity elsewhere.
    pub fn embed(&self, idx: &[usize], n: usize) -> Matrix {
        let mut m = Self::identity(n);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(i, j, self.get(a, b));
            }
        }
        m
    }

    /// Submatrix on the given rows and columns.
    pub fn restrict(&self, idx: &[usize]) -> Matrix {
        let k = idx.len();
        let mut m = Self::zero(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }

    pub fn to_repr(&self, f: &Fq) -> MatrixRepr {
        let entries = (0..self.n)
            .map(|i| self.row(i).iter().map(|&c| code_to_element(c, f)).collect())
            .collect();
        MatrixRepr { n: self.n, entries }
    }

    pub fn from_repr(r: &MatrixRepr, f: &Fq) -> Result<Matrix> {
        let rows: Vec<Vec<u16>> = r
            .entries
            .iter()
            .map(|row| row.iter().map(|e| element_to_code(e, f)).collect::<Result<Vec<u16>>>())
            .collect::<Result<_>>()?;
        if rows.len() != r.n {
            return Err(MlsError::DimensionMismatch { expected: r.n, found: rows.len() });
        }
        Matrix::from_rows(&rows)
    }
}

pub fn dot(a: &[u16], b: &[u16], f: &Fq) -> u16 {
    if f.e == 1 {
        let s: u32 = a.iter().zip(b).map(|(&x, &y)| x as u32 * y as u32).sum();
        (s % f.p as u32) as u16
    } else {
        a.iter().zip(b).fold(0, |acc, (&x, &y)| f.add(acc, f.mul(x, y)))
    }
}

pub fn code_to_element(c: u16, f: &Fq) -> FieldElement {
    let mut k = c as u64;
    let coeffs = (0..f.e)
        .map(|_| {
            let d = k % f.p as u64;
            k /= f.p as u64;
            d
        })
        .collect();
    FieldElement { level: Level::Base, coeffs }
}

pub fn element_to_code(e: &FieldElement, f: &Fq) -> Result<u16> {
    if e.level != Level::Base || e.coeffs.len() != f.e || e.coeffs.iter().any(|&c| c >= f.p as u64) {
        return Err(MlsError::InvalidParameter(format!("{e:?} is not an element of F_{}", f.q)));
    }
    Ok(e.coeffs.iter().rev().fold(0u64, |acc, &c| acc * f.p as u64 + c) as u16)
}

/// Reduced row echelon basis of the span of `vecs`.
pub fn echelon(vecs: &[Vec<u16>], f: &Fq) -> Vec<Vec<u16>> {
    let mut rows = vecs.to_vec();
    let (piv, _) = Matrix::eliminate(&mut rows, f);
    rows.truncate(piv.len());
    rows
}

/// Solves A x = b for square or tall A given by rows, if consistent.
pub fn solve(a: &Matrix, b: &[u16], f: &Fq) -> Option<Vec<u16>> {
    let n = a.n();
    let mut rows: Vec<Vec<u16>> = (0..n)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.push(b[i]);
            r
        })
        .collect();
    let (piv, _) = Matrix::eliminate(&mut rows, f);
    if piv.contains(&n) {
        return None;
    }
    let mut x = vec![0u16; n];
    for (r, &c) in piv.iter().enumerate() {
        x[c] = rows[r][n];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f3() -> Fq {
        Fq::new(3, 1).unwrap()
    }

    #[test]
    fn basics() {
        let f = f3();
        assert_eq!(Matrix::identity(4).inv(&f).unwrap(), Matrix::identity(4));
        assert_eq!(Matrix::zero(4).rank(&f), 0);
        let a = Matrix::from_rows(&[vec![1, 1], vec![0, 2]]).unwrap();
        assert_eq!(a.det(&f), 2);
        assert_eq!(Matrix::identity(3).element_order(10, &f).unwrap(), 1);
        assert_eq!(Matrix::identity(3).neg(&f).element_order(10, &f).unwrap(), 2);
        assert!(matches!(Matrix::zero(2).inv(&f), Err(MlsError::Singular)));
        assert!(matches!(Matrix::zero(2).element_order(5, &f), Err(MlsError::Singular)));
        let c = Matrix::from_rows(&[vec![0, 1], vec![1, 1]]).unwrap();
        assert!(matches!(c.element_order(3, &f), Err(MlsError::CapExceeded(3))));
        assert!(Matrix::identity(2).checked_mul(&Matrix::identity(3), &f).is_err());
    }

    #[test]
    fn repr_roundtrip() {
        let f = Fq::new(3, 2).unwrap();
        let a = Matrix::from_rows(&[vec![5, 1], vec![0, 8]]).unwrap();
        let r = a.to_repr(&f);
        assert_eq!(r.entries[0][0].coeffs, vec![2, 1]);
        assert_eq!(Matrix::from_repr(&r, &f).unwrap(), a);
    }

    fn arb_matrix(n: usize, q: u16) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(0..q, n * n).prop_map(move |d| Matrix { n, data: d })
    }

    proptest! {
        #[test]
        fn inverse_and_transpose_inv(a in arb_matrix(4, 5)) {
            let f = Fq::new(5, 1).unwrap();
            prop_assume!(a.det(&f) != 0);
            let ai = a.inv(&f).unwrap();
            prop_assert!(a.mul(&ai, &f).is_identity());
            prop_assert_eq!(a.transpose_inv(&f).unwrap(), a.transpose().inv(&f).unwrap());
            prop_assert_eq!(a.rank(&f), 4);
        }

        #[test]
        fn det_multiplicative(a in arb_matrix(3, 9), b in arb_matrix(3, 9)) {
            let f = Fq::new(3, 2).unwrap();
            prop_assert_eq!(a.mul(&b, &f).det(&f), f.mul(a.det(&f), b.det(&f)));
        }
    }
}
