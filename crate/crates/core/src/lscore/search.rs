//! Randomized search for sharply transitive sets on spreads and on P(W0).

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{cyclic_set_mls, CyclicSet};
use crate::arith::{divisors, gcd};
use crate::error::{MlsError, Result};
use crate::fields::Fq;
use crate::forms::StdForm;
use crate::matgroups::{closure::closure, Flavor, Matrix};
use crate::spreads::Subspace;

/// A finite set of subspaces permuted by the group.
#[derive(Clone, Debug)]
pub struct SubspaceAction {
    pub members: Vec<Subspace>,
    pub index: HashMap<Subspace, usize>,
    pub fq: Arc<Fq>,
}

impl SubspaceAction {
    pub fn new(members: Vec<Subspace>, fq: Arc<Fq>) -> Self {
        let index = members.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        SubspaceAction { members, index, fq }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn act(&self, g: &Matrix, i: usize) -> Option<usize> {
        self.index.get(&self.members[i].image(g, &self.fq)).copied()
    }

    pub fn perm(&self, g: &Matrix) -> Option<Vec<usize>> {
        (0..self.len()).map(|i| self.act(g, i)).collect()
    }
}

fn cycle_ids(perm: &[usize]) -> (Vec<usize>, Vec<u64>) {
    let mut id = vec![usize::MAX; perm.len()];
    let mut lens = Vec::new();
    for s in 0..perm.len() {
        if id[s] != usize::MAX {
            continue;
        }
        let c = lens.len();
        let mut x = s;
        let mut len = 0;
        while id[x] == usize::MAX {
            id[x] = c;
            x = perm[x];
            len += 1;
        }
        lens.push(len);
    }
    (id, lens)
}

/// Largest s dividing `n` for which a power of the permutation has all
/// cycles of length s, with the exponent of that power.
fn best_semiregular_power(perm: &[usize], n: u64) -> (u64, u64) {
    let (_, lens) = cycle_ids(perm);
    let l = lens.iter().fold(1u64, |acc, &c| acc / gcd(acc, c) * c);
    let mut ds = divisors(n);
    ds.sort_unstable_by(|a, b| b.cmp(a));
    for s in ds {
        if l % s != 0 {
            continue;
        }
        let k = l / s;
        if lens.iter().all(|&c| c / gcd(c, k) == s) {
            return (s, k);
        }
    }
    (1, 1)
}

/// Random walk on the group generated by `gens`, restricted to a predicate.
pub struct Walker<'a> {
    gens: Vec<Matrix>,
    cur: Matrix,
    keep: Box<dyn Fn(&Matrix) -> bool + 'a>,
    fq: Arc<Fq>,
}

impl<'a> Walker<'a> {
    pub fn new(gens: Vec<Matrix>, keep: Box<dyn Fn(&Matrix) -> bool + 'a>, fq: Arc<Fq>) -> Self {
        let n = gens.first().map_or(0, Matrix::n);
        Walker { gens, cur: Matrix::identity(n), keep, fq }
    }

    pub fn next<R: Rng>(&mut self, rng: &mut R) -> Matrix {
        loop {
            let s = self.gens.choose(rng).expect("walker has generators");
            self.cur = self.cur.mul(s, &self.fq);
            if (self.keep)(&self.cur) {
                return self.cur.clone();
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    pub x_candidates: usize,
    pub z_tries: usize,
    pub restarts: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { x_candidates: 120, z_tries: 6000, restarts: 12 }
    }
}

/// x^i·z_k⋯z_1 maps the base member bijectively onto all members: a cyclic
/// set of a semiregular x followed by transversal blocks of prime size.
#[derive(Clone, Debug)]
pub struct SharpSet {
    pub cyclic: Option<CyclicSet>,
    pub transversal: Vec<Vec<Matrix>>,
    pub s1: u64,
    pub s2: u64,
    /// Which structured candidate supplied x, if any.
    pub structured_gen: Option<usize>,
}

impl SharpSet {
    pub fn blocks(&self) -> Vec<Vec<Matrix>> {
        let mut out: Vec<Vec<Matrix>> = self.cyclic.iter().flat_map(|c| c.blocks.clone()).collect();
        out.extend(self.transversal.iter().cloned());
        out
    }
}

pub fn find_sharp_set<R: Rng>(
    action: &SubspaceAction,
    base: usize,
    structured: &[Matrix],
    walker: &mut Walker<'_>,
    rng: &mut R,
    budget: SearchBudget,
) -> Result<SharpSet> {
    let n = action.len() as u64;
    let f = action.fq.clone();
    if n == 1 {
        return Ok(SharpSet { cyclic: None, transversal: Vec::new(), s1: 1, s2: 1, structured_gen: None });
    }
    let mut best: Option<(u64, Matrix, Option<usize>)> = None;
    let consider = |g: Matrix, tag: Option<usize>, best: &mut Option<(u64, Matrix, Option<usize>)>| -> bool {
        let Some(perm) = action.perm(&g) else { return false };
        let (s, k) = best_semiregular_power(&perm, n);
        if best.as_ref().is_none_or(|(bs, _, _)| s > *bs) {
            *best = Some((s, g.pow(k, &f), tag));
        }
        s == n
    };
    let mut done = false;
    for (i, g) in structured.iter().enumerate() {
        if consider(g.clone(), Some(i), &mut best) {
            done = true;
            break;
        }
    }
    if !done {
        for _ in 0..budget.x_candidates {
            if consider(walker.next(rng), None, &mut best) {
                break;
            }
        }
    }
    let (s1, x, tag) = best.expect("at least the identity was considered");
    let s2 = n / s1;
    let xperm = action.perm(&x).expect("x preserves the members");
    let (cyc, _) = cycle_ids(&xperm);
    let transversal = find_transversal(action, base, &cyc, s2, walker, rng, budget)?;
    let cyclic = if s1 > 1 { Some(cyclic_set_mls(&x, s1, &f)?) } else { None };
    Ok(SharpSet { cyclic, transversal, s1, s2, structured_gen: tag })
}

/// Blocks Z_k, …, Z_1 (leftmost first) of prime sizes with Z_k⋯Z_1(base)
/// meeting each x-cycle exactly once.
fn find_transversal<R: Rng>(
    action: &SubspaceAction,
    base: usize,
    cycle: &[usize],
    s2: u64,
    walker: &mut Walker<'_>,
    rng: &mut R,
    budget: SearchBudget,
) -> Result<Vec<Vec<Matrix>>> {
    if s2 == 1 {
        return Ok(Vec::new());
    }
    let primes: Vec<u64> = crate::arith::factorize(s2)
        .into_iter()
        .flat_map(|(p, a)| std::iter::repeat_n(p, a as usize))
        .collect();
    let n = action.members[0].basis[0].len();
    'restart: for _ in 0..budget.restarts {
        let mut set = vec![base];
        let mut used: HashSet<usize> = [cycle[base]].into();
        let mut blocks = Vec::new();
        for &p in &primes {
            let mut block = vec![Matrix::identity(n)];
            let mut grown = set.clone();
            for _ in 1..p {
                let mut found = None;
                for _ in 0..budget.z_tries {
                    let z = walker.next(rng);
                    let Some(imgs) = set.iter().map(|&m| action.act(&z, m)).collect::<Option<Vec<_>>>() else {
                        continue;
                    };
                    let cs: HashSet<usize> = imgs.iter().map(|&m| cycle[m]).collect();
                    if cs.len() == imgs.len() && cs.is_disjoint(&used) {
                        found = Some((z, imgs, cs));
                        break;
                    }
                }
                let Some((z, imgs, cs)) = found else { continue 'restart };
                used.extend(cs);
                grown.extend(imgs);
                block.push(z);
            }
            set = grown;
            blocks.push(block);
        }
        blocks.reverse();
        return Ok(blocks);
    }
    Err(MlsError::NotFound {
        what: format!("transversal of {s2} cycles"),
        budget: (budget.restarts * budget.z_tries) as u64,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FallbackWitness {
    #[serde(skip)]
    pub a: Matrix,
    #[serde(skip)]
    pub b: Matrix,
    pub a_order: u64,
    pub b_order: u64,
    pub d: usize,
    pub spread_size: usize,
    pub t: u64,
    pub candidates_examined: u64,
}

/// Searches the group for a of order |A| whose powers move ⟨e₁..e_d⟩ through
/// |A| pairwise disjoint totally singular subspaces, and b of order |B| fixing
/// ⟨e₁..e_d⟩ whose first t = |B|/(q−1) powers move ⟨e₁⟩ through distinct points.
/// d is read off from t = (q^d − 1)/(q − 1).
pub fn fallback_search(
    form: &StdForm,
    flavor: Flavor,
    targets: (u64, u64),
    seed: u64,
    budget: u64,
) -> Result<FallbackWitness> {
    let f = form.fq.clone();
    let q = form.q();
    let (ta, tb) = targets;
    if tb == 0 || tb % (q - 1) != 0 {
        return Err(MlsError::InvalidParameter(format!("|B| = {tb} is not a multiple of q − 1")));
    }
    let t = tb / (q - 1);
    let d = (1..=form.r)
        .find(|&d| (q.pow(d as u32) - 1) / (q - 1) == t)
        .ok_or_else(|| MlsError::InvalidParameter(format!("t = {t} is not a point count of P(W0)")))?;
    let w0 = Subspace::span(&(0..d).map(|i| form.e(i)).collect::<Vec<_>>(), &f);
    let e1 = Subspace::span(&[form.e(0)], &f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens: Vec<Matrix> = (0..6).map(|_| form.random_element(flavor, &mut rng)).collect();
    let pool: Vec<Matrix> = match closure(&gens, form.n, budget as usize, &f) {
        Ok(all) => {
            let mut v: Vec<Matrix> = all.into_iter().collect();
            v.sort();
            v.shuffle(&mut rng);
            v
        }
        Err(_) => (0..budget).map(|_| form.random_element(flavor, &mut rng)).collect(),
    };
    let mut a = None;
    let mut b = None;
    let mut examined = 0u64;
    for g in &pool {
        examined += 1;
        if a.is_none() && g.order_dividing(ta, &f).ok() == Some(ta) && sharp_spread_orbit(form, g, ta, &w0) {
            a = Some(g.clone());
        }
        if b.is_none() && g.order_dividing(tb, &f).ok() == Some(tb) && w0.image(g, &f) == w0 {
            let mut pts = HashSet::new();
            let mut x = Matrix::identity(form.n);
            for _ in 0..t {
                pts.insert(e1.image(&x, &f));
                x = x.mul(g, &f);
            }
            if pts.len() as u64 == t {
                b = Some(g.clone());
            }
        }
        if a.is_some() && b.is_some() {
            break;
        }
    }
    match (a, b) {
        (Some(a), Some(b)) => Ok(FallbackWitness {
            a,
            b,
            a_order: ta,
            b_order: tb,
            d,
            spread_size: ta as usize,
            t,
            candidates_examined: examined,
        }),
        (a, _) => Err(MlsError::NotFound {
            what: if a.is_none() { format!("a of order {ta} sharp on its orbit") } else { format!("b of order {tb}") },
            budget: examined,
        }),
    }
}

fn sharp_spread_orbit(form: &StdForm, a: &Matrix, ord: u64, w0: &Subspace) -> bool {
    let f = form.f();
    let mut seen: HashMap<Vec<u16>, ()> = HashMap::new();
    let mut x = Matrix::identity(form.n);
    for _ in 0..ord {
        for pt in w0.image(&x, f).points(f) {
            if form.qf(&pt) != 0 || seen.insert(pt, ()).is_some() {
                return false;
            }
        }
        x = x.mul(a, f);
    }
    true
}
