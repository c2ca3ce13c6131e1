//! The canonical tame LS: per level [A, B, P, X, Y] where A moves W0 through
//! a spread of totally singular d-spaces, B moves ⟨e₁⟩ through P(W0), P is the
//! unipotent radical of the point stabilizer, X its GL₁ part and Y the group
//! of ⟨e₁, f₁⟩^⊥, treated recursively down to dimension ≤ 2.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::hermitian::hermitian_model;
use super::search::{find_sharp_set, SearchBudget, SharpSet, SubspaceAction, Walker};
use super::{cyclic_set_mls, min_length_bound, CyclicSet, LogSignature};
use crate::error::{MlsError, Result};
use crate::fields::Fq;
use crate::forms::{all_vectors, normalize, StdForm};
use crate::matgroups::descriptor::minus_one_in;
use crate::matgroups::generators::{singer_generator, literal_generators};
use crate::matgroups::{Family, Flavor, GroupDescriptor, Kind, Matrix};
use crate::spreads::{PartialSpread, Subspace};

pub const DEFAULT_SEED: u64 = 42;
const POINT_BUDGET: u64 = 20_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub n: usize,
    pub kind: Kind,
    pub flavor: Flavor,
    /// Witt index: the dimension of W0 when a spread of maximal subspaces exists.
    pub spec_d: usize,
    pub d: usize,
    pub model: String,
    pub spread_size: u64,
    pub t: u64,
    /// (s₁, s₂): cyclic part and transversal part of the A segment.
    pub a_split: (u64, u64),
    pub b_split: (u64, u64),
    /// Whether the literal a (resp. b) is sharply transitive on its target.
    pub literal_a_sharp: Option<bool>,
    pub literal_b_sharp: Option<bool>,
    pub literal_a_used: bool,
    pub literal_b_used: bool,
    pub mismatches: Vec<String>,
    pub skipped: Vec<String>,
    pub fallback: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstructionReport {
    pub group: String,
    pub order: u64,
    pub length: u64,
    pub bound: u64,
    pub seed: u64,
    pub levels: Vec<LevelReport>,
    pub base: String,
    pub halved: Option<String>,
}

#[derive(Clone, Debug)]
struct Segment<K> {
    blocks: Vec<Vec<Matrix>>,
    lookup: HashMap<K, (Vec<usize>, Matrix)>,
}

#[derive(Clone, Debug)]
struct Plane {
    cyc: CyclicSet,
    lut: HashMap<Matrix, u64>,
    refl: Option<Matrix>,
}

#[derive(Clone, Debug)]
struct Step {
    form: StdForm,
    w0: Subspace,
    /// Keyed by every point of every spread member.
    a: Segment<Vec<u16>>,
    b: Segment<Vec<u16>>,
    p_basis: Vec<(usize, u16)>,
    p_blocks: Vec<Vec<Matrix>>,
    x: CyclicSet,
    x_inv_pows: Vec<Matrix>,
    lambda_base: u16,
    wp: Vec<usize>,
    sub: Stage,
}

#[derive(Clone, Debug)]
enum Stage {
    Trivial(usize),
    /// O₁ = {I, −I}; holds −I.
    Sign(Matrix),
    Plane(Plane),
    Step(Box<Step>),
}

/// Operation counts of one decode, for checking that decoding does no search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub lookups: u64,
    pub dlogs: u64,
    pub mat_ops: u64,
    pub depth: u64,
}

fn out_of_range() -> MlsError {
    MlsError::OutOfRange("cyclic exponent beyond the halved segment".into())
}

impl Stage {
    fn n(&self) -> usize {
        match self {
            Stage::Trivial(n) => *n,
            Stage::Sign(_) => 1,
            Stage::Plane(_) => 2,
            Stage::Step(s) => s.form.n,
        }
    }

    fn blocks(&self) -> Vec<Vec<Matrix>> {
        match self {
            Stage::Trivial(_) => Vec::new(),
            Stage::Sign(m) => vec![vec![Matrix::identity(1), m.clone()]],
            Stage::Plane(p) => {
                let mut b = p.cyc.blocks.clone();
                if let Some(r) = &p.refl {
                    b.push(vec![Matrix::identity(2), r.clone()]);
                }
                b
            }
            Stage::Step(s) => {
                let n = s.form.n;
                let mut b = s.a.blocks.clone();
                b.extend(s.b.blocks.iter().cloned());
                b.extend(s.p_blocks.iter().cloned());
                b.extend(s.x.blocks.iter().cloned());
                b.extend(s.sub.blocks().into_iter().map(|blk| blk.iter().map(|g| g.embed(&s.wp, n)).collect()));
                b
            }
        }
    }

    fn decode(&self, g: &Matrix, f: &Fq, ops: &mut OpCount) -> Result<Vec<usize>> {
        ops.depth += 1;
        match self {
            Stage::Trivial(_) => {
                if g.is_identity() {
                    Ok(Vec::new())
                } else {
                    Err(MlsError::NotInGroup("the trivial group".into()))
                }
            }
            Stage::Sign(m) => {
                if g.is_identity() {
                    Ok(vec![0])
                } else if g == m {
                    Ok(vec![1])
                } else {
                    Err(MlsError::NotInGroup("O₁".into()))
                }
            }
            Stage::Plane(p) => {
                let mut h = g.clone();
                let mut tail = Vec::new();
                if let Some(r) = &p.refl {
                    let j = usize::from(g.det(f) != 1);
                    if j == 1 {
                        h = h.mul(r, f);
                        ops.mat_ops += 1;
                    }
                    tail.push(j);
                }
                ops.lookups += 1;
                let i = *p.lut.get(&h).ok_or_else(|| MlsError::NotInGroup("the plane group".into()))?;
                if i >= p.cyc.size {
                    return Err(out_of_range());
                }
                let mut out = p.cyc.digits(i);
                out.extend(tail);
                Ok(out)
            }
            Stage::Step(s) => s.decode(g, f, ops),
        }
    }
}

impl Step {
    fn decode(&self, g: &Matrix, f: &Fq, ops: &mut OpCount) -> Result<Vec<usize>> {
        let n = self.form.n;
        let r = self.form.r;
        let not_in = || MlsError::NotInGroup(format!("the level of dimension {n}"));
        ops.lookups += 1;
        let (ia, a_inv) = normalize(&g.col(0), f).and_then(|pt| self.a.lookup.get(&pt)).ok_or_else(not_in)?;
        let h1 = a_inv.mul(g, f);
        let pt = normalize(&h1.col(0), f).ok_or_else(not_in)?;
        ops.lookups += 1;
        let (ib, b_inv) = self.b.lookup.get(&pt).ok_or_else(not_in)?;
        let h2 = b_inv.mul(&h1, f);
        ops.mat_ops += 2;
        let lambda = h2.get(0, 0);
        if lambda == 0 {
            return Err(not_in());
        }
        let mut levi = Matrix::zero(n);
        levi.set(0, 0, lambda);
        levi.set(r, r, f.inv(lambda)?);
        for &i in &self.wp {
            for &j in &self.wp {
                levi.set(i, j, h2.get(i, j));
            }
        }
        let p = h2.mul(&levi.inv(f).map_err(|_| not_in())?, f);
        let u: Vec<u16> = (0..n).map(|i| if i == 0 || i == r { 0 } else { p.get(i, r) }).collect();
        if self.form.siegel(&u)? != p {
            return Err(not_in());
        }
        ops.mat_ops += 3;
        let pp = f.p as u16;
        let ip = self.p_basis.iter().map(|&(c, pj)| ((u[self.wp[c]] / pj) % pp) as usize);
        ops.dlogs += 1;
        let i = f.dlog(self.lambda_base, lambda).ok_or_else(not_in)?;
        if i >= self.x_inv_pows.len() as u64 {
            return Err(not_in());
        }
        if i >= self.x.size {
            return Err(out_of_range());
        }
        let y = self.x_inv_pows[i as usize].mul(&levi, f);
        ops.mat_ops += 1;
        let sub_idx = self.sub.decode(&y.restrict(&self.wp), f, ops)?;
        let mut out = ia.clone();
        out.extend(ib.iter().copied());
        out.extend(ip);
        out.extend(self.x.digits(i));
        out.extend(sub_idx);
        Ok(out)
    }
}

/// A canonical LS with the tables that make it tame.
#[derive(Clone, Debug)]
pub struct CanonicalLs {
    pub ls: LogSignature,
    pub report: ConstructionReport,
    pub fq: Arc<Fq>,
    stage: Stage,
}

impl CanonicalLs {
    pub fn descriptor(&self) -> GroupDescriptor {
        self.ls.group
    }

    /// Index vector of g (or of the coset ±g in a projective group).
    pub fn decode(&self, g: &Matrix, ops: &mut OpCount) -> Result<Vec<usize>> {
        let f = &*self.fq;
        if g.n() != self.stage.n() {
            return Err(MlsError::DimensionMismatch { expected: self.stage.n(), found: g.n() });
        }
        match self.stage.decode(g, f, ops) {
            Err(MlsError::OutOfRange(_)) if self.ls.group.family.is_projective() => {
                self.stage.decode(&g.neg(f), f, ops)
            }
            other => other,
        }
    }

    /// The base dimension of the spread on the top level, with the sets that
    /// realize both sharply transitive actions.
    pub fn top_step_sets(&self) -> Option<(Subspace, Vec<Matrix>, Vec<Matrix>)> {
        let Stage::Step(s) = &self.stage else { return None };
        let f = &*self.fq;
        Some((s.w0.clone(), all_products(&s.a.blocks, s.form.n, f), all_products(&s.b.blocks, s.form.n, f)))
    }
}

fn all_products(blocks: &[Vec<Matrix>], n: usize, f: &Fq) -> Vec<Matrix> {
    let mut acc = vec![Matrix::identity(n)];
    for b in blocks {
        acc = acc.iter().flat_map(|x| b.iter().map(move |y| x.mul(y, f))).collect();
    }
    acc
}

fn all_indices(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut acc = vec![Vec::new()];
    for &s in sizes {
        acc = acc
            .into_iter()
            .flat_map(|v| {
                (0..s).map(move |i| {
                    let mut w = v.clone();
                    w.push(i);
                    w
                })
            })
            .collect();
    }
    acc
}

fn product_of(blocks: &[Vec<Matrix>], idx: &[usize], n: usize, f: &Fq) -> Matrix {
    idx.iter().zip(blocks).fold(Matrix::identity(n), |g, (&i, b)| g.mul(&b[i], f))
}

/// r_a·r_b for a, b supported on `coords` with Q(a)Q(b) a nonsquare: an
/// element of SO with nonsquare spinor norm.
fn nonsquare_rotation(form: &StdForm, coords: &[usize]) -> Result<Option<Matrix>> {
    if coords.len() < 2 {
        return Ok(None);
    }
    let f = form.f();
    let lift = |c: &[u16]| {
        let mut v = vec![0u16; form.n];
        for (&i, &x) in coords.iter().zip(c) {
            v[i] = x;
        }
        v
    };
    let vs: Vec<Vec<u16>> = all_vectors(coords.len(), f.q).map(|c| lift(&c)).filter(|v| form.qf(v) != 0).collect();
    let Some(a) = vs.first() else { return Ok(None) };
    let qa = form.qf(a);
    let Some(b) = vs.iter().find(|b| !f.is_square(f.mul(qa, form.qf(b)))) else { return Ok(None) };
    Ok(Some(form.reflection(a)?.mul(&form.reflection(b)?, f)))
}

struct Builder {
    fq: Arc<Fq>,
    flavor: Flavor,
    rng: ChaCha8Rng,
    budget: SearchBudget,
    levels: Vec<LevelReport>,
    base: String,
}

struct Model {
    name: &'static str,
    action: SubspaceAction,
    gens: Vec<Matrix>,
}

impl Builder {
    fn build(&mut self, form: StdForm) -> Result<Stage> {
        match form.n {
            0 => {
                self.base = "dimension 0".into();
                Ok(Stage::Trivial(0))
            }
            1 => {
                self.base = format!("{:?}₁", self.flavor);
                Ok(if self.flavor == Flavor::O { Stage::Sign(Matrix::scalar(1, self.fq.minus_one())) } else { Stage::Trivial(1) })
            }
            2 => self.build_plane(&form).map(Stage::Plane),
            _ => self.build_step(form).map(|s| Stage::Step(Box::new(s))),
        }
    }

    fn build_plane(&mut self, form: &StdForm) -> Result<Plane> {
        let f = &*self.fq;
        let isos: Vec<Matrix> = all_vectors(4, f.q)
            .filter_map(|v| Matrix::from_rows(&[v[..2].to_vec(), v[2..].to_vec()]).ok())
            .filter(|g| form.is_isometry(g))
            .collect();
        let so2: Vec<&Matrix> = isos.iter().filter(|g| g.det(f) == 1).collect();
        let s = so2.len() as u64;
        let c = so2
            .iter()
            .find(|g| g.element_order(s, f).ok() == Some(s))
            .ok_or_else(|| MlsError::ConstructionMismatch("SO₂ is not cyclic".into()))?;
        let (gen, size) = if self.flavor == Flavor::Omega { (c.mul(c, f), s / 2) } else { ((*c).clone(), s) };
        let cyc = cyclic_set_mls(&gen, size, f)?;
        let mut lut = HashMap::new();
        let mut x = Matrix::identity(2);
        for i in 0..size {
            lut.insert(x.clone(), i);
            x = x.mul(&gen, f);
        }
        let refl = if self.flavor == Flavor::O {
            Some(isos.iter().find(|g| g.det(f) != 1).cloned().ok_or_else(|| MlsError::ConstructionMismatch("no reflection".into()))?)
        } else {
            None
        };
        self.base = format!("{:?}₂ of kind {:?}: cyclic part of order {size}{}", self.flavor, form.kind, if refl.is_some() { " and a reflection" } else { "" });
        Ok(Plane { cyc, lut, refl })
    }

    fn h_flavor(&self) -> Flavor {
        if self.flavor == Flavor::O { Flavor::SO } else { self.flavor }
    }

    fn model(&mut self, form: &StdForm, d: usize, n_members: u64, l: &[Vec<u16>]) -> Result<Option<Model>> {
        let f = self.fq.clone();
        if d == 1 {
            let members = l.iter().map(|p| Subspace::span(std::slice::from_ref(p), &f)).collect();
            let gens = (0..10).map(|_| form.random_element(self.flavor, &mut self.rng)).collect();
            return Ok(Some(Model { name: "points", action: SubspaceAction::new(members, f), gens }));
        }
        let (name, members, gens) = if form.kind == Kind::Minus && form.n == 6 && d == 2 {
            let h = hermitian_model(f.clone())?;
            if h.space.form.gram() != form.gram() {
                return Err(MlsError::ConstructionMismatch("Hermitian model has a different Witt form".into()));
            }
            ("hermitian", h.members, h.gens)
        } else {
            let hf = self.h_flavor();
            let gens: Vec<Matrix> = (0..10).map(|_| form.random_element(hf, &mut self.rng)).collect();
            let w0 = Subspace::span(&(0..d).map(|i| form.e(i)).collect::<Vec<_>>(), &f);
            let mut seen: HashSet<Subspace> = [w0.clone()].into();
            let mut members = vec![w0];
            let mut k = 0;
            while k < members.len() {
                for g in &gens {
                    let w = members[k].image(g, &f);
                    if seen.insert(w.clone()) {
                        members.push(w);
                        if members.len() as u64 > n_members {
                            return Ok(None);
                        }
                    }
                }
                k += 1;
            }
            ("orbit", members, gens)
        };
        if members.len() as u64 != n_members {
            return Ok(None);
        }
        if (PartialSpread { members: members.clone() }).validate(&f).is_err() {
            return Ok(None);
        }
        Ok(Some(Model { name, action: SubspaceAction::new(members, f), gens }))
    }

    fn build_step(&mut self, form: StdForm) -> Result<Step> {
        let q = form.q();
        let n = form.n;
        let flavor = self.flavor;
        let l = form.singular_points(POINT_BUDGET)?;
        let literal = match flavor {
            Flavor::O | Flavor::SO => GroupDescriptor::new(Family::orth(flavor, form.kind), q, n)
                .and_then(|desc| literal_generators(&desc))
                .ok(),
            Flavor::Omega => None,
        };
        let mut skipped = Vec::new();
        for d in (1..=form.r).rev() {
            let t = (q.pow(d as u32) - 1) / (q - 1);
            if l.len() as u64 % t != 0 {
                skipped.push(format!("d = {d}: t = {t} does not divide |L| = {}", l.len()));
                continue;
            }
            let n_members = l.len() as u64 / t;
            let Some(model) = self.model(&form, d, n_members, &l)? else {
                skipped.push(format!("d = {d}: no spread of {n_members} totally singular {d}-spaces found"));
                continue;
            };
            match self.try_level(&form, d, t, model, literal.as_ref(), &skipped)? {
                Some(step) => return Ok(step),
                None => skipped.push(format!("d = {d}: sharp set search exhausted its budget")),
            }
        }
        Err(MlsError::NotFound { what: format!("LS level for dimension {n}: {}", skipped.join("; ")), budget: 0 })
    }

    fn try_level(
        &mut self,
        form: &StdForm,
        d: usize,
        t: u64,
        model: Model,
        literal: Option<&crate::matgroups::generators::GeneratorRow>,
        skipped: &[String],
    ) -> Result<Option<Step>> {
        let f = self.fq.clone();
        let fr = &*f;
        let n = form.n;
        let r = form.r;
        let flavor = self.flavor;
        let member = |g: &Matrix| form.member(g, flavor);
        let mut mismatches = Vec::new();
        if let Some(row) = literal {
            mismatches.extend(row.mismatches.iter().cloned());
            if row.d != d {
                mismatches.push(format!("no spread of totally singular {}-spaces; W0 has dimension {d}", row.d));
            }
        }
        let literal = literal.filter(|row| row.d == d);
        let n_members = model.action.len() as u64;
        let w0 = Subspace::span(&(0..d).map(|i| form.e(i)).collect::<Vec<_>>(), fr);
        let a_base = *model.action.index.get(&w0).ok_or_else(|| MlsError::ConstructionMismatch("W0 is not a spread member".into()))?;

        // A: sharply transitive on the spread.
        let mut literal_a_sharp = None;
        let mut structured_a = Vec::new();
        if let Some(row) = literal {
            let sharp = model.action.perm(&row.a).is_some_and(|p| single_cycle_from(&p, a_base) == n_members)
                && row.a_order == Some(n_members);
            literal_a_sharp = Some(sharp);
            if !sharp {
                let orbit = model.action.perm(&row.a).map(|p| single_cycle_from(&p, a_base));
                mismatches.push(format!("⟨a⟩ is not sharply transitive on the {n_members} spread members (orbit of W0: {orbit:?}, order {:?})", row.a_order));
            }
            if member(&row.a) {
                structured_a.push(row.a.clone());
            }
        }
        let gens_a = model.gens.clone();
        let mut walker = Walker::new(gens_a, Box::new(member), f.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng.gen());
        let sharp_a = match find_sharp_set(&model.action, a_base, &structured_a, &mut walker, &mut rng, self.budget) {
            Ok(s) => s,
            Err(MlsError::NotFound { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };

        // B: sharply transitive on P(W0).
        let points: Vec<Subspace> = w0.points(fr).into_iter().map(|p| Subspace::span(&[p], fr)).collect();
        let e1 = Subspace::span(&[form.e(0)], fr);
        let base = points.iter().position(|p| *p == e1).expect("e₁ lies in W0");
        let pact = SubspaceAction::new(points, f.clone());
        let comp: Vec<usize> = (0..n).filter(|&i| !(i < d || (r..r + d).contains(&i))).collect();
        let zc = nonsquare_rotation(form, &comp)?;
        let singer = singer_generator(d, fr)?;
        let ls = form.levi(&singer)?;
        let mut structured_b = Vec::new();
        let mut literal_b_sharp = None;
        if let Some(row) = literal {
            let sharp = w0.image(&row.b, fr) == w0 && pact.perm(&row.b).is_some_and(|p| single_cycle_from(&p, base) == t);
            literal_b_sharp = Some(sharp);
            if !sharp {
                mismatches.push(format!("{{bʲ : j < {t}}} is not sharply transitive on P(W0)"));
            }
            if sharp && member(&row.b) {
                structured_b.push(row.b.clone());
            }
        }
        structured_b.push(ls.clone());
        if let Some(z) = &zc {
            structured_b.push(ls.mul(z, fr));
        }
        structured_b.push(ls.mul(&ls, fr));
        structured_b.retain(|g| member(g));
        let mut gens_b = Vec::new();
        while gens_b.len() < 8 {
            let m = loop {
                let v: Vec<u16> = (0..d * d).map(|_| self.rng.gen_range(0..fr.q)).collect();
                let m = Matrix::from_rows(&v.chunks(d).map(<[u16]>::to_vec).collect::<Vec<_>>())?;
                if m.det(fr) != 0 {
                    break m;
                }
            };
            let mut g = form.levi(&m)?;
            if let Some(z) = &zc {
                if self.rng.gen_bool(0.5) {
                    g = g.mul(z, fr);
                }
            }
            if member(&g) {
                gens_b.push(g);
            }
        }
        let mut walker_b = Walker::new(gens_b, Box::new(member), f.clone());
        let sharp_b = match find_sharp_set(&pact, base, &structured_b, &mut walker_b, &mut rng, self.budget) {
            Ok(s) => s,
            Err(MlsError::NotFound { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let literal_a_used = literal.is_some() && sharp_a.structured_gen == Some(0) && literal_a_sharp == Some(true);
        let literal_b_used = literal_b_sharp == Some(true) && sharp_b.structured_gen == Some(0);

        let a = segment_subspaces(&sharp_a, &w0, n, fr)?;
        if a.lookup.len() as u64 != n_members * t {
            return Err(MlsError::ConstructionMismatch("A segment is not sharply transitive".into()));
        }
        let b = segment_points(&sharp_b, &form.e(0), n, fr)?;
        if b.lookup.len() as u64 != t {
            return Err(MlsError::ConstructionMismatch("B segment is not sharply transitive".into()));
        }

        // P: Siegel maps E(a·θʲ·ε_c).
        let wp = form.wprime_idx();
        let mut p_basis = Vec::new();
        let mut p_blocks = Vec::new();
        for (c, &i) in wp.iter().enumerate() {
            let mut pj = 1u16;
            for _ in 0..fr.e {
                let block = (0..fr.p)
                    .map(|a| {
                        let mut u = vec![0u16; n];
                        u[i] = fr.mul(a, pj);
                        form.siegel(&u)
                    })
                    .collect::<Result<Vec<_>>>()?;
                p_basis.push((c, pj));
                p_blocks.push(block);
                pj *= fr.p;
            }
        }

        // X: the GL₁ part, corrected on W' for Ω.
        let gamma = fr.primitive();
        let q1 = fr.q as u64 - 1;
        let (x, lambda_base, s) = match flavor {
            Flavor::O | Flavor::SO => (form.d_lambda(gamma)?, gamma, q1),
            Flavor::Omega => match nonsquare_rotation(form, &wp)? {
                Some(z) => (form.d_lambda(gamma)?.mul(&z, fr), gamma, q1),
                None => {
                    let g2 = fr.mul(gamma, gamma);
                    (form.d_lambda(g2)?, g2, q1 / 2)
                }
            },
        };
        if !member(&x) {
            return Err(MlsError::ConstructionMismatch("X generator is not in the group".into()));
        }
        let xc = cyclic_set_mls(&x, s, fr)?;
        let xi = x.inv(fr)?;
        let mut x_inv_pows = Vec::with_capacity(s as usize);
        let mut cur = Matrix::identity(n);
        for _ in 0..s {
            x_inv_pows.push(cur.clone());
            cur = cur.mul(&xi, fr);
        }

        self.levels.push(LevelReport {
            n,
            kind: form.kind,
            flavor,
            spec_d: form.r,
            d,
            model: model.name.to_string(),
            spread_size: n_members,
            t,
            a_split: (sharp_a.s1, sharp_a.s2),
            b_split: (sharp_b.s1, sharp_b.s2),
            literal_a_sharp,
            literal_b_sharp,
            literal_a_used,
            literal_b_used,
            fallback: !(literal_a_used && literal_b_used),
            mismatches,
            skipped: skipped.to_vec(),
        });
        let sub = self.build(form.sub_form()?)?;
        Ok(Some(Step {
            form: form.clone(),
            w0,
            a,
            b,
            p_basis,
            p_blocks,
            x: xc,
            x_inv_pows,
            lambda_base,
            wp,
            sub,
        }))
    }
}

fn single_cycle_from(perm: &[usize], start: usize) -> u64 {
    let mut x = perm[start];
    let mut len = 1;
    while x != start {
        x = perm[x];
        len += 1;
    }
    len
}

fn segment_subspaces(s: &SharpSet, w0: &Subspace, n: usize, f: &Fq) -> Result<Segment<Vec<u16>>> {
    let blocks = s.blocks();
    let mut lookup = HashMap::new();
    for idx in all_indices(&blocks.iter().map(Vec::len).collect::<Vec<_>>()) {
        let g = product_of(&blocks, &idx, n, f);
        let g_inv = g.inv(f)?;
        for pt in w0.image(&g, f).points(f) {
            if lookup.insert(pt, (idx.clone(), g_inv.clone())).is_some() {
                return Err(MlsError::ConstructionMismatch("A segment images of W0 overlap".into()));
            }
        }
    }
    Ok(Segment { blocks, lookup })
}

fn segment_points(s: &SharpSet, e1: &[u16], n: usize, f: &Fq) -> Result<Segment<Vec<u16>>> {
    let blocks = s.blocks();
    let mut lookup = HashMap::new();
    for idx in all_indices(&blocks.iter().map(Vec::len).collect::<Vec<_>>()) {
        let g = product_of(&blocks, &idx, n, f);
        let pt = normalize(&g.apply(e1, f), f).expect("nonzero image");
        if lookup.insert(pt, (idx, g.inv(f)?)).is_some() {
            return Err(MlsError::ConstructionMismatch("B segment repeats a point".into()));
        }
    }
    Ok(Segment { blocks, lookup })
}

pub fn canonical_ls(desc: &GroupDescriptor) -> Result<CanonicalLs> {
    canonical_ls_seeded(desc, DEFAULT_SEED)
}

/// Builds the LS for an O, SO or Ω family (linear or projective).
pub fn canonical_ls_seeded(desc: &GroupDescriptor, seed: u64) -> Result<CanonicalLs> {
    desc.validate()?;
    let Family::Orth { flavor, kind, projective } = desc.family else {
        return Err(MlsError::Unsupported(format!("canonical LS for {}", desc.family)));
    };
    let (p, e) = desc.p_e();
    let fq = Arc::new(Fq::new(p, e)?);
    let form = StdForm::new(kind, desc.n, fq.clone())?;
    let mut b = Builder {
        fq: fq.clone(),
        flavor,
        rng: ChaCha8Rng::seed_from_u64(seed),
        budget: SearchBudget::default(),
        levels: Vec::new(),
        base: String::new(),
    };
    let stage = b.build(form)?;
    let linear = GroupDescriptor { family: desc.family.linear(), ..*desc };
    let order = linear.order()?;
    let ls = LogSignature::new(linear, stage.blocks(), order)
        .map_err(|e| MlsError::ConstructionMismatch(format!("block sizes do not match |G|: {e}")))?;
    let bound = min_length_bound(order)?.bound;
    let report = ConstructionReport {
        group: linear.to_string(),
        order,
        length: ls.length(),
        bound,
        seed,
        levels: b.levels,
        base: b.base,
        halved: None,
    };
    let c = CanonicalLs { ls, report, fq, stage };
    if projective {
        project_ls(&c, Center::PlusMinus)
    } else {
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Center {
    Trivial,
    PlusMinus,
}

/// Rejects an LS some block of which contains both g and −g.
pub fn check_injectivity(ls: &LogSignature, f: &Fq) -> Result<()> {
    for (k, b) in ls.blocks.iter().enumerate() {
        let set: HashMap<&Matrix, usize> = b.iter().enumerate().map(|(i, g)| (g, i)).collect();
        for (i, g) in b.iter().enumerate() {
            if let Some(&j) = set.get(&g.neg(f)) {
                return Err(MlsError::InjectivityFail(format!("block {k} contains g (index {i}) and −g (index {j})")));
            }
        }
    }
    Ok(())
}

/// The LS of G/Z. For Z = {±I} ⊂ G the cyclic segment through −I's coset
/// (the top X segment, or the cyclic part of a plane group) is halved.
pub fn project_ls(c: &CanonicalLs, center: Center) -> Result<CanonicalLs> {
    let desc = c.ls.group;
    let Family::Orth { flavor, kind, .. } = desc.family else {
        return Err(MlsError::Unsupported("projection of a non-orthogonal family".into()));
    };
    if center == Center::Trivial {
        return Ok(c.clone());
    }
    let f = &*c.fq;
    let pdesc = GroupDescriptor { family: Family::Orth { flavor, kind, projective: true }, ..desc };
    let mut stage = c.stage.clone();
    let mut halved = None;
    if minus_one_in(flavor, kind, desc.n, desc.q) {
        match &mut stage {
            Stage::Step(s) => {
                if s.x.size % 2 != 0 {
                    return Err(MlsError::InjectivityFail("X segment has odd size".into()));
                }
                s.x = cyclic_set_mls(&s.x.gen, s.x.size / 2, f)?;
                halved = Some(format!("X segment of dimension {}: {} → {}", s.form.n, s.x.size * 2, s.x.size));
            }
            Stage::Plane(p) => {
                if p.cyc.size % 2 != 0 {
                    return Err(MlsError::InjectivityFail("cyclic segment has odd size".into()));
                }
                p.cyc = cyclic_set_mls(&p.cyc.gen, p.cyc.size / 2, f)?;
                halved = Some(format!("plane cyclic segment: {} → {}", p.cyc.size * 2, p.cyc.size));
            }
            Stage::Sign(_) | Stage::Trivial(_) => {
                return Err(MlsError::InjectivityFail("−I has no cyclic segment to absorb it".into()));
            }
        }
    }
    let ls = LogSignature::new(pdesc, stage.blocks(), pdesc.order()?)?;
    check_injectivity(&ls, f)?;
    let mut report = c.report.clone();
    report.group = pdesc.to_string();
    report.order = ls.claimed_order;
    report.length = ls.length();
    report.bound = min_length_bound(ls.claimed_order)?.bound;
    report.halved = halved;
    Ok(CanonicalLs { ls, report, fq: c.fq.clone(), stage })
}

/// The objects behind the spread and transitivity checks for an O group of
/// the given kind: W0, the A set, the B set, the singular points.
#[derive(Clone, Debug)]
pub struct SpreadWitness {
    pub w0: Option<Subspace>,
    pub a_set: Vec<Matrix>,
    pub b_set: Vec<Matrix>,
    pub points: Vec<Vec<u16>>,
    pub report: Option<LevelReport>,
}

pub fn spread_witness(kind: Kind, q: u64, m: usize, seed: u64) -> Result<SpreadWitness> {
    let n = kind.dim(m);
    let desc = GroupDescriptor::new(Family::orth(Flavor::O, kind), q, n)?;
    let (p, e) = desc.p_e();
    let fq = Arc::new(Fq::new(p, e)?);
    let form = StdForm::new(kind, n, fq.clone())?;
    let points = form.singular_points(POINT_BUDGET)?;
    if form.r == 0 {
        return Ok(SpreadWitness { w0: None, a_set: Vec::new(), b_set: Vec::new(), points, report: None });
    }
    if n == 2 {
        let f = &*fq;
        let v: Vec<u16> = vec![1, f.minus_one()];
        let r = form.reflection(&v)?;
        let w0 = Subspace::span(&[form.e(0)], f);
        return Ok(SpreadWitness { w0: Some(w0), a_set: vec![Matrix::identity(2), r], b_set: vec![Matrix::identity(2)], points, report: None });
    }
    let c = canonical_ls_seeded(&desc, seed)?;
    let (w0, a_set, b_set) = c.top_step_sets().expect("dimension ≥ 3 has a step level");
    Ok(SpreadWitness { w0: Some(w0), a_set, b_set, points, report: c.report.levels.first().cloned() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(s: &str, q: u64, n: usize) -> GroupDescriptor {
        GroupDescriptor::new(s.parse().unwrap(), q, n).unwrap()
    }

    #[test]
    fn small_orders_and_lengths() {
        for (fam, n, len) in [("O-", 2, 6), ("O+", 2, 4), ("SO+", 2, 2), ("SO-", 2, 4), ("Oodd", 1, 2), ("Oodd", 3, 11), ("O-", 4, 21), ("O+", 4, 20)] {
            let c = canonical_ls(&desc(fam, 3, n)).unwrap();
            assert_eq!(c.ls.length(), len, "{fam} {n}");
            assert_eq!(c.report.bound, len);
        }
    }

    #[test]
    fn decode_identity_and_a_power() {
        let c = canonical_ls(&desc("O-", 3, 4)).unwrap();
        let f = &*c.fq;
        let mut ops = OpCount::default();
        let z = c.decode(&Matrix::identity(4), &mut ops).unwrap();
        assert!(z.iter().all(|&i| i == 0));
        let a = &c.ls.blocks[0][1];
        let a3 = a.pow(3, f);
        let idx = c.decode(&a3, &mut ops).unwrap();
        assert_eq!(c.ls.product(&idx, f).unwrap(), a3);
    }

    #[test]
    fn aliased_block_fails() {
        let c = canonical_ls(&desc("SO-", 3, 4)).unwrap();
        let f = &*c.fq;
        let mut ls = c.ls.clone();
        let g = ls.blocks[0][1].clone();
        ls.blocks[0][0] = g.neg(f);
        assert!(matches!(check_injectivity(&ls, f), Err(MlsError::InjectivityFail(_))));
    }
}
