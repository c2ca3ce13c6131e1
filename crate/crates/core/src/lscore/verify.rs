//! Exhaustive and sampled verification of the LS property.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::canonical::{CanonicalLs, OpCount};
use super::{group_member, min_length_bound, LogSignature};
use crate::error::{MlsError, Result};
use crate::factorize::{rank, unrank};
use crate::fields::Fq;
use crate::matgroups::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Exhaustive,
    Sampled,
}

impl std::str::FromStr for VerifyMode {
    type Err = MlsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(VerifyMode::Exhaustive),
            "sampled" => Ok(VerifyMode::Sampled),
            _ => Err(MlsError::InvalidParameter(format!("unknown mode {s}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerifyOptions {
    pub mode: VerifyMode,
    pub samples: u64,
    pub seed: u64,
    pub budget: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { mode: VerifyMode::Exhaustive, samples: 10_000, seed: 42, budget: 1_000_000 }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Collision {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub group: String,
    pub mode: VerifyMode,
    pub claimed_order: u64,
    pub group_order: u64,
    pub block_sizes: Vec<usize>,
    pub length: u64,
    pub bound: u64,
    pub valid: bool,
    pub mls: bool,
    pub products: u64,
    pub distinct: u64,
    pub collisions: Vec<Collision>,
    /// (block, index) of block elements outside the group.
    pub non_members: Vec<(usize, usize)>,
    pub shape_error: Option<String>,
    pub samples: u64,
    pub roundtrip_failures: u64,
    pub failure_witnesses: Vec<Vec<usize>>,
    pub seed: u64,
    pub budget: u64,
}

const MAX_WITNESSES: usize = 5;

fn key(g: Matrix, projective: bool, f: &Fq) -> Matrix {
    if projective {
        let h = g.neg(f);
        g.min(h)
    } else {
        g
    }
}

/// Checks unique factorization literally (exhaustive) or by
/// decode round-trips through the tame tables (sampled).
pub fn verify_ls(ls: &LogSignature, opts: &VerifyOptions, tame: Option<&CanonicalLs>) -> Result<VerifyReport> {
    let desc = ls.group;
    let (p, e) = desc.p_e();
    let fq = Arc::new(Fq::new(p, e)?);
    let f = &*fq;
    let group_order = desc.order()?;
    let sizes = ls.sizes();
    let mut rep = VerifyReport {
        group: desc.to_string(),
        mode: opts.mode,
        claimed_order: ls.claimed_order,
        group_order,
        block_sizes: sizes.clone(),
        length: ls.length(),
        bound: min_length_bound(group_order)?.bound,
        valid: false,
        mls: false,
        products: 0,
        distinct: 0,
        collisions: Vec::new(),
        non_members: Vec::new(),
        shape_error: None,
        samples: 0,
        roundtrip_failures: 0,
        failure_witnesses: Vec::new(),
        seed: opts.seed,
        budget: opts.budget,
    };
    if let Err(e) = ls.check_shape() {
        rep.shape_error = Some(e.to_string());
        return Ok(rep);
    }
    if ls.claimed_order != group_order {
        rep.shape_error = Some(format!("claimed order {} but |G| = {group_order}", ls.claimed_order));
        return Ok(rep);
    }
    for (k, b) in ls.blocks.iter().enumerate() {
        for (i, g) in b.iter().enumerate() {
            if !group_member(&desc, g, &fq)? {
                rep.non_members.push((k, i));
            }
        }
    }
    let projective = desc.family.is_projective();
    match opts.mode {
        VerifyMode::Exhaustive => {
            if ls.claimed_order > opts.budget {
                return Err(MlsError::BudgetExceeded {
                    what: "exhaustive verification".into(),
                    needed: ls.claimed_order,
                    budget: opts.budget,
                });
            }
            let mut seen: HashMap<Matrix, u64> = HashMap::with_capacity(ls.claimed_order as usize);
            let s = ls.blocks.len();
            let n = ls.dim();
            let mut idx = vec![0usize; s];
            let mut prefix = vec![Matrix::identity(n)];
            for k in 0..s {
                let next = prefix[k].mul(&ls.blocks[k][0], f);
                prefix.push(next);
            }
            loop {
                rep.products += 1;
                let g = key(prefix[s].clone(), projective, f);
                let r = rank(&idx, &sizes)?;
                if let Some(&other) = seen.get(&g) {
                    if rep.collisions.len() < MAX_WITNESSES {
                        rep.collisions.push(Collision { first: unrank(other, &sizes)?, second: idx.clone() });
                    }
                } else {
                    seen.insert(g, r);
                }
                // advance the last position that can still move, odometer style
                let Some(k) = (0..s).rev().find(|&k| idx[k] + 1 < sizes[k]) else { break };
                idx[k] += 1;
                for j in k + 1..s {
                    idx[j] = 0;
                }
                for j in k..s {
                    prefix[j + 1] = prefix[j].mul(&ls.blocks[j][idx[j]], f);
                }
            }
            rep.distinct = seen.len() as u64;
            rep.valid = rep.collisions.is_empty() && rep.non_members.is_empty() && rep.distinct == group_order;
        }
        VerifyMode::Sampled => {
            let tame = tame.ok_or_else(|| MlsError::Unsupported("sampled verification needs the tame tables of a canonical LS".into()))?;
            if tame.ls.blocks != ls.blocks {
                return Err(MlsError::Unsupported("sampled verification needs the canonical LS the tables belong to".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for _ in 0..opts.samples {
                let idx: Vec<usize> = sizes.iter().map(|&s| rng.gen_range(0..s)).collect();
                let g = ls.product(&idx, f)?;
                let mut ops = OpCount::default();
                let ok = matches!(tame.decode(&g, &mut ops), Ok(back) if back == idx);
                if !ok {
                    rep.roundtrip_failures += 1;
                    if rep.failure_witnesses.len() < MAX_WITNESSES {
                        rep.failure_witnesses.push(idx);
                    }
                }
            }
            rep.samples = opts.samples;
            rep.products = opts.samples;
            rep.valid = rep.roundtrip_failures == 0 && rep.non_members.is_empty();
        }
    }
    rep.mls = rep.valid && rep.length == rep.bound;
    Ok(rep)
}
