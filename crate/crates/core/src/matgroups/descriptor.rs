use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::prime_power;
use crate::error::{MlsError, Result};

/// Geometry of the underlying quadratic space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Minus,
    Plus,
    Odd,
}

impl Kind {
    pub fn suffix(self) -> &'static str {
        match self {
            Kind::Minus => "-",
            Kind::Plus => "+",
            Kind::Odd => "odd",
        }
    }

    /// ε = ±1 for even dimension.
    pub fn epsilon(self) -> i64 {
        match self {
            Kind::Minus => -1,
            _ => 1,
        }
    }

    pub fn dim(self, m: usize) -> usize {
        match self {
            Kind::Odd => 2 * m + 1,
            _ => 2 * m,
        }
    }

    /// Witt index of the space of this kind with half-rank m.
    pub fn witt_index(self, m: usize) -> usize {
        match self {
            Kind::Minus => m.saturating_sub(1),
            _ => m,
        }
    }

    pub fn half_rank(self, n: usize) -> Result<usize> {
        match (self, n % 2) {
            (Kind::Odd, 1) | (Kind::Minus | Kind::Plus, 0) => Ok(n / 2),
            _ => Err(MlsError::InvalidParameter(format!("dimension {n} does not fit kind {self:?}"))),
        }
    }
}

impl FromStr for Kind {
    type Err = MlsError;
    fn from_str(s: &str) -> Result<Kind> {
        match s {
            "minus" | "-" => Ok(Kind::Minus),
            "plus" | "+" => Ok(Kind::Plus),
            "odd" => Ok(Kind::Odd),
            _ => Err(MlsError::InvalidParameter(format!("unknown kind {s}"))),
        }
    }
}

/// Which subgroup of the isometry group is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    O,
    SO,
    Omega,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Orth { flavor: Flavor, kind: Kind, projective: bool },
    GL,
    Parabolic(Kind),
}

impl Family {
    pub fn orth(flavor: Flavor, kind: Kind) -> Family {
        Family::Orth { flavor, kind, projective: false }
    }

    pub fn kind(self) -> Option<Kind> {
        match self {
            Family::Orth { kind, .. } | Family::Parabolic(kind) => Some(kind),
            Family::GL => None,
        }
    }

    pub fn flavor(self) -> Option<Flavor> {
        match self {
            Family::Orth { flavor, .. } => Some(flavor),
            Family::Parabolic(_) => Some(Flavor::O),
            Family::GL => None,
        }
    }

    pub fn is_projective(self) -> bool {
        matches!(self, Family::Orth { projective: true, .. })
    }

    /// The linear family covering a projective one.
    pub fn linear(self) -> Family {
        match self {
            Family::Orth { flavor, kind, .. } => Family::Orth { flavor, kind, projective: false },
            other => other,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Orth { flavor, kind, projective } => {
                let p = if *projective { "P" } else { "" };
                let fl = match flavor {
                    Flavor::O => "O",
                    Flavor::SO => "SO",
                    Flavor::Omega => "Omega",
                };
                write!(f, "{p}{fl}{}", kind.suffix())
            }
            Family::GL => write!(f, "GL"),
            Family::Parabolic(k) => write!(f, "parabolic{}", k.suffix()),
        }
    }
}

impl FromStr for Family {
    type Err = MlsError;
    fn from_str(s: &str) -> Result<Family> {
        if s == "GL" {
            return Ok(Family::GL);
        }
        let (body, kind) = if let Some(b) = s.strip_suffix("odd") {
            (b, Kind::Odd)
        } else if let Some(b) = s.strip_suffix('-') {
            (b, Kind::Minus)
        } else if let Some(b) = s.strip_suffix('+') {
            (b, Kind::Plus)
        } else {
            return Err(MlsError::InvalidParameter(format!("unknown family {s}")));
        };
        let fam = match body {
            "O" => Family::Orth { flavor: Flavor::O, kind, projective: false },
            "SO" => Family::Orth { flavor: Flavor::SO, kind, projective: false },
            "Omega" => Family::Orth { flavor: Flavor::Omega, kind, projective: false },
            "PSO" => Family::Orth { flavor: Flavor::SO, kind, projective: true },
            "POmega" => Family::Orth { flavor: Flavor::Omega, kind, projective: true },
            "parabolic" => Family::Parabolic(kind),
            _ => return Err(MlsError::InvalidParameter(format!("unknown family {s}"))),
        };
        Ok(fam)
    }
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupDescriptor {
    pub family: Family,
    pub q: u64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

fn mul_checked(acc: u64, x: u64) -> Result<u64> {
    acc.checked_mul(x).ok_or_else(|| MlsError::Unsupported("group order overflows u64".into()))
}

fn qpow(q: u64, e: usize) -> Result<u64> {
    q.checked_pow(e as u32).ok_or_else(|| MlsError::Unsupported("group order overflows u64".into()))
}

/// |O^ε_n(q)| for the given kind and dimension.
pub fn orthogonal_order(kind: Kind, n: usize, q: u64) -> Result<u64> {
    if n == 0 {
        return Ok(1);
    }
    let m = kind.half_rank(n)?;
    let mut acc = 2u64;
    match kind {
        Kind::Odd => {
            acc = mul_checked(acc, qpow(q, m * m)?)?;
            for i in 1..=m {
                acc = mul_checked(acc, qpow(q, 2 * i)? - 1)?;
            }
        }
        Kind::Minus | Kind::Plus => {
            acc = mul_checked(acc, qpow(q, m * (m - 1))?)?;
            let qm = qpow(q, m)?;
            acc = mul_checked(acc, if kind == Kind::Plus { qm - 1 } else { qm + 1 })?;
            for i in 1..m {
                acc = mul_checked(acc, qpow(q, 2 * i)? - 1)?;
            }
        }
    }
    Ok(acc)
}

pub fn gl_order(k: usize, q: u64) -> Result<u64> {
    let mut acc = 1u64;
    for i in 0..k {
        acc = mul_checked(acc, qpow(q, k)? - qpow(q, i)?)?;
    }
    Ok(acc)
}

/// Whether −I lies in the group of the given flavor.
pub fn minus_one_in(flavor: Flavor, kind: Kind, n: usize, q: u64) -> bool {
    match flavor {
        Flavor::O => n > 0,
        Flavor::SO => n > 0 && n % 2 == 0,
        Flavor::Omega => {
            if n == 0 || n % 2 == 1 {
                return false;
            }
            let qm = q.pow((n / 2) as u32);
            match kind {
                Kind::Plus => qm % 4 == 1,
                Kind::Minus => qm % 4 == 3,
                Kind::Odd => false,
            }
        }
    }
}

pub fn flavor_order(flavor: Flavor, kind: Kind, n: usize, q: u64) -> Result<u64> {
    let o = orthogonal_order(kind, n, q)?;
    Ok(match flavor {
        Flavor::O => o,
        Flavor::SO => (o / 2).max(1),
        Flavor::Omega => {
            if n <= 1 { 1 } else { o / 4 }
        }
    })
}

impl GroupDescriptor {
    pub fn new(family: Family, q: u64, n: usize) -> Result<Self> {
        let d = GroupDescriptor { family, q, n, k: None };
        d.validate()?;
        Ok(d)
    }

    pub fn parabolic(kind: Kind, q: u64, n: usize, k: usize) -> Result<Self> {
        let d = GroupDescriptor { family: Family::Parabolic(kind), q, n, k: Some(k) };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match prime_power(self.q) {
            Some((p, _)) if p % 2 == 1 => {}
            _ => return Err(MlsError::InvalidParameter(format!("q = {} is not an odd prime power", self.q))),
        }
        if let Some(kind) = self.family.kind() {
            kind.half_rank(self.n)?;
        }
        if let Family::Parabolic(kind) = self.family {
            let k = self.k.ok_or_else(|| MlsError::InvalidParameter("parabolic needs k".into()))?;
            let r = kind.witt_index(kind.half_rank(self.n)?);
            if k == 0 || k > r {
                return Err(MlsError::InvalidParameter(format!("k = {k} must lie in 1..={r}")));
            }
        }
        Ok(())
    }

    pub fn p_e(&self) -> (u64, usize) {
        let (p, e) = prime_power(self.q).expect("validated");
        (p, e as usize)
    }

    /// Group order from the closed forms.
    pub fn order(&self) -> Result<u64> {
        let q = self.q;
        match self.family {
            Family::GL => gl_order(self.n, q),
            Family::Orth { flavor, kind, projective } => {
                let o = flavor_order(flavor, kind, self.n, q)?;
                Ok(if projective && minus_one_in(flavor, kind, self.n, q) { o / 2 } else { o })
            }
            Family::Parabolic(kind) => {
                let k = self.k.expect("validated");
                let n = self.n;
                let unip = k * (k - 1) / 2 + k * (n - 2 * k);
                let mut acc = qpow(q, unip)?;
                acc = mul_checked(acc, gl_order(k, q)?)?;
                mul_checked(acc, orthogonal_order(kind, n - 2 * k, q)?)
            }
        }
    }

    /// Number of singular points of P(V).
    pub fn singular_points(kind: Kind, n: usize, q: u64) -> u64 {
        singular_point_count(kind, n, q)
    }
}

/// Closed-form count of singular points in dimension n.
pub fn singular_point_count(kind: Kind, n: usize, q: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let m = n / 2;
    match kind {
        Kind::Minus => (q.pow(m as u32) + 1) * (q.pow(m as u32 - 1) - 1) / (q - 1),
        Kind::Plus => (q.pow(m as u32) - 1) * (q.pow(m as u32 - 1) + 1) / (q - 1),
        Kind::Odd => (q.pow(2 * m as u32) - 1) / (q - 1),
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}({})", self.family, self.n, self.q)?;
        if let Some(k) = self.k {
            write!(f, "[k={k}]")?;
        }
        Ok(())
    }
}
