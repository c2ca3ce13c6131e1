//! A PGM-style permutation of Z_|G| keyed by two logarithmic signatures of
//! the same group. Demonstration only: no security claims are made.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MlsError, Result};
use crate::factorize::{rank, unrank};
use crate::forms::StdForm;
use crate::lscore::{canonical_ls, verify_ls, CanonicalLs, LogSignature, OpCount, VerifyMode, VerifyOptions};
use crate::matgroups::{Family, GroupDescriptor, Matrix};

/// How beta is derived from alpha.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyOptions {
    pub shuffle: bool,
    pub translate: bool,
}

impl Default for KeyOptions {
    fn default() -> Self {
        KeyOptions { shuffle: true, translate: true }
    }
}

/// Key verification outcome for one of the two signatures.
#[derive(Clone, Debug, Serialize)]
pub struct KeyCheck {
    pub mode: VerifyMode,
    pub checked: u64,
    pub failures: u64,
}

#[derive(Clone, Debug)]
pub struct PgmKey {
    pub alpha_ls: LogSignature,
    pub beta_ls: LogSignature,
    pub seed: u64,
    pub options: KeyOptions,
    pub alpha_check: KeyCheck,
    pub beta_check: KeyCheck,
    alpha: CanonicalLs,
    /// beta block k, index i is built from alpha block k, index perms[k][i].
    perms: Vec<Vec<usize>>,
    /// beta(i) = left⁻¹ · alpha(perm(i)) · right.
    left: Matrix,
    right_inv: Matrix,
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    group: GroupDescriptor,
    seed: u64,
    options: KeyOptions,
    alpha: serde_json::Value,
    beta: serde_json::Value,
}

const SAMPLED_CHECKS: u64 = 2000;

fn random_member(desc: &GroupDescriptor, alpha: &CanonicalLs, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let Family::Orth { flavor, kind, .. } = desc.family else {
        return Err(MlsError::Unsupported(format!("PGM keys for {}", desc.family)));
    };
    let form = StdForm::new(kind, desc.n, alpha.fq.clone())?;
    Ok(form.random_element(flavor, rng))
}

pub fn keygen(desc: &GroupDescriptor, seed: u64) -> Result<PgmKey> {
    keygen_with(desc, seed, KeyOptions::default())
}

pub fn keygen_with(desc: &GroupDescriptor, seed: u64, options: KeyOptions) -> Result<PgmKey> {
    let alpha = canonical_ls(desc)?;
    let f = Arc::clone(&alpha.fq);
    let n = alpha.ls.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = alpha.ls.blocks.len();

    let perms: Vec<Vec<usize>> = alpha
        .ls
        .sizes()
        .iter()
        .map(|&len| {
            let mut p: Vec<usize> = (0..len).collect();
            if options.shuffle {
                p.shuffle(&mut rng);
            }
            p
        })
        .collect();
    let ts: Vec<Matrix> = (0..=s)
        .map(|_| if options.translate { random_member(desc, &alpha, &mut rng) } else { Ok(Matrix::identity(n)) })
        .collect::<Result<_>>()?;
    let t_inv: Vec<Matrix> = ts.iter().map(|t| t.inv(&f)).collect::<Result<_>>()?;

    let blocks = alpha
        .ls
        .blocks
        .iter()
        .enumerate()
        .map(|(k, b)| perms[k].iter().map(|&j| t_inv[k].mul(&b[j], &f).mul(&ts[k + 1], &f)).collect())
        .collect();
    let beta_ls = LogSignature::new(alpha.ls.group, blocks, alpha.ls.claimed_order)?;

    let mut key = PgmKey {
        alpha_ls: alpha.ls.clone(),
        beta_ls,
        seed,
        options,
        alpha_check: KeyCheck { mode: VerifyMode::Sampled, checked: 0, failures: 0 },
        beta_check: KeyCheck { mode: VerifyMode::Sampled, checked: 0, failures: 0 },
        left: ts[0].clone(),
        right_inv: t_inv[s].clone(),
        alpha,
        perms,
    };
    key.alpha_check = key.check_alpha()?;
    key.beta_check = key.check_beta()?;
    if key.alpha_check.failures > 0 || key.beta_check.failures > 0 {
        return Err(MlsError::ConstructionMismatch("derived key fails verification".into()));
    }
    Ok(key)
}

impl PgmKey {
    pub fn descriptor(&self) -> GroupDescriptor {
        self.alpha_ls.group
    }

    pub fn order(&self) -> u64 {
        self.alpha_ls.claimed_order
    }

    fn exhaustive(&self) -> bool {
        self.order() <= VerifyOptions::default().budget
    }

    fn check_alpha(&self) -> Result<KeyCheck> {
        let mode = if self.exhaustive() { VerifyMode::Exhaustive } else { VerifyMode::Sampled };
        let opts = VerifyOptions { mode, samples: SAMPLED_CHECKS, seed: self.seed, ..VerifyOptions::default() };
        let r = verify_ls(&self.alpha_ls, &opts, Some(&self.alpha))?;
        let failures = (r.collisions.len() + r.non_members.len()) as u64 + r.roundtrip_failures + u64::from(!r.valid);
        Ok(KeyCheck { mode, checked: r.products, failures })
    }

    /// Literal check when small, otherwise decode round-trips on random indices.
    fn check_beta(&self) -> Result<KeyCheck> {
        if self.exhaustive() {
            let opts = VerifyOptions::default();
            let r = verify_ls(&self.beta_ls, &opts, None)?;
            let failures = (r.collisions.len() + r.non_members.len()) as u64 + u64::from(!r.valid);
            return Ok(KeyCheck { mode: VerifyMode::Exhaustive, checked: r.products, failures });
        }
        let f = &*self.alpha.fq;
        let sizes = self.beta_ls.sizes();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed);
        let mut failures = 0;
        for _ in 0..SAMPLED_CHECKS {
            let idx: Vec<usize> = sizes.iter().map(|&s| rand::Rng::gen_range(&mut rng, 0..s)).collect();
            let g = self.beta_ls.product(&idx, f)?;
            if !matches!(self.beta_decode(&g), Ok(back) if back == idx) {
                failures += 1;
            }
        }
        Ok(KeyCheck { mode: VerifyMode::Sampled, checked: SAMPLED_CHECKS, failures })
    }

    /// Tame factorization with respect to beta.
    pub fn beta_decode(&self, g: &Matrix) -> Result<Vec<usize>> {
        let f = &*self.alpha.fq;
        let h = self.left.mul(g, f).mul(&self.right_inv, f);
        let j = self.alpha.decode(&h, &mut OpCount::default())?;
        j.iter()
            .zip(&self.perms)
            .map(|(&jk, p)| p.iter().position(|&x| x == jk).ok_or_else(|| MlsError::OutOfRange(format!("{jk}"))))
            .collect()
    }

    fn check_range(&self, m: u64) -> Result<()> {
        if m >= self.order() {
            return Err(MlsError::OutOfRange(format!("{m} is not below |G| = {}", self.order())));
        }
        Ok(())
    }

    pub fn encrypt(&self, m: u64) -> Result<u64> {
        self.check_range(m)?;
        let f = &*self.alpha.fq;
        let g = self.alpha_ls.product(&unrank(m, &self.alpha_ls.sizes())?, f)?;
        rank(&self.beta_decode(&g)?, &self.beta_ls.sizes())
    }

    pub fn decrypt(&self, c: u64) -> Result<u64> {
        self.check_range(c)?;
        let f = &*self.alpha.fq;
        let g = self.beta_ls.product(&unrank(c, &self.beta_ls.sizes())?, f)?;
        let idx = self.alpha.decode(&g, &mut OpCount::default())?;
        rank(&idx, &self.alpha_ls.sizes())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = KeyFile {
            group: self.descriptor(),
            seed: self.seed,
            options: self.options,
            alpha: serde_json::from_str(&self.alpha_ls.to_json()?)?,
            beta: serde_json::from_str(&self.beta_ls.to_json()?)?,
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Rebuilds the key from its seed and checks it against the stored signatures.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: KeyFile = serde_json::from_str(s)?;
        let key = keygen_with(&file.group, file.seed, file.options)?;
        let alpha = LogSignature::from_json(&file.alpha.to_string())?;
        let beta = LogSignature::from_json(&file.beta.to_string())?;
        if alpha != key.alpha_ls || beta != key.beta_ls {
            return Err(MlsError::ConstructionMismatch("key file does not match its seed".into()));
        }
        Ok(key)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroups::{Flavor, Kind};

    fn o2_minus() -> GroupDescriptor {
        GroupDescriptor::new(Family::orth(Flavor::O, Kind::Minus), 3, 2).unwrap()
    }

    #[test]
    fn tiny_roundtrip_and_determinism() {
        let key = keygen(&o2_minus(), 7).unwrap();
        assert_eq!(key.beta_check.mode, VerifyMode::Exhaustive);
        assert_eq!(key.beta_check.failures, 0);
        for m in 0..8 {
            assert_eq!(key.decrypt(key.encrypt(m).unwrap()).unwrap(), m);
        }
        let again = keygen(&o2_minus(), 7).unwrap();
        assert_eq!(again.beta_ls, key.beta_ls);
        assert!(key.encrypt(8).is_err());
    }

    #[test]
    fn seeds_differ() {
        let desc = o2_minus();
        let keys: Vec<LogSignature> = (0..10).map(|s| keygen(&desc, s).unwrap().beta_ls).collect();
        let distinct = keys.iter().enumerate().filter(|(i, k)| keys[..*i].iter().all(|o| o != *k)).count();
        assert!(distinct >= 2);
    }

    #[test]
    fn untranslated_key_fixes_zero() {
        let key = keygen_with(&o2_minus(), 3, KeyOptions { shuffle: false, translate: false }).unwrap();
        assert_eq!(key.encrypt(0).unwrap(), 0);
    }

    #[test]
    fn key_file_roundtrip() {
        let key = keygen(&o2_minus(), 11).unwrap();
        let back = PgmKey::from_json(&key.to_json().unwrap()).unwrap();
        assert_eq!(back.beta_ls, key.beta_ls);
    }
}
