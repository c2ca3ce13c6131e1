use std::collections::HashSet;
use std::sync::Arc;

use mls_core::arith::prime_power;
use mls_core::factorize::{rank, tame_factor, tame_factor_counted, unrank};
use mls_core::fields::Fq;
use mls_core::forms::{closure_oracle, StdForm};
use mls_core::lscore::{canonical_ls, parabolic_ls, verify_ls, LogSignature, OpCount, VerifyOptions};
use mls_core::matgroups::{Family, Flavor, GroupDescriptor, Kind, Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fq(q: u64) -> Arc<Fq> {
    let (p, e) = prime_power(q).unwrap();
    Arc::new(Fq::new(p, e as usize).unwrap())
}

fn desc(family: &str, q: u64, n: usize) -> GroupDescriptor {
    GroupDescriptor::new(family.parse::<Family>().unwrap(), q, n).unwrap()
}

fn small_groups() -> Vec<GroupDescriptor> {
    let mut v = Vec::new();
    for flavor in ["O", "SO", "Omega", "PSO", "POmega"] {
        for (kind, n) in [("-", 2), ("+", 2), ("odd", 3), ("-", 4), ("+", 4)] {
            v.push(desc(&format!("{flavor}{kind}"), 3, n));
        }
    }
    v.push(desc("Oodd", 5, 3));
    v.push(desc("Omegaodd", 5, 3));
    v.push(desc("O-", 5, 2));
    v.push(desc("O+", 7, 2));
    v.push(desc("O-", 9, 2));
    v
}

#[test]
fn tame_roundtrip_exhaustive_small() {
    for d in small_groups() {
        let order = d.order().unwrap();
        assert!(order <= 2000, "{d}");
        let c = canonical_ls(&d).unwrap();
        assert_eq!(c.ls.length(), c.report.bound, "{d}");
        let sizes = c.ls.sizes();
        for msg in 0..order {
            let idx = unrank(msg, &sizes).unwrap();
            let g = c.ls.product(&idx, &c.fq).unwrap();
            let back = tame_factor(&g, &c).unwrap_or_else(|e| panic!("{d} rank {msg}: {e}"));
            assert_eq!(rank(&back.0, &sizes).unwrap(), msg, "{d}");
        }
    }
}

#[test]
fn small_groups_verify_exhaustively() {
    for d in small_groups() {
        let c = canonical_ls(&d).unwrap();
        let r = verify_ls(&c.ls, &VerifyOptions::default(), None).unwrap();
        assert!(r.mls, "{d}: {r:?}");
    }
}

#[test]
fn decode_cost_is_bounded() {
    for (fam, n) in [("O-", 6), ("O+", 6), ("Oodd", 5), ("Omega-", 6), ("POmega+", 6), ("O-", 8), ("O+", 8)] {
        let d = desc(fam, 3, n);
        let c = canonical_ls(&d).unwrap();
        let levels = c.report.levels.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sizes = c.ls.sizes();
        for _ in 0..200 {
            let msg = rng.gen_range(0..c.ls.claimed_order);
            let g = c.ls.product(&unrank(msg, &sizes).unwrap(), &c.fq).unwrap();
            let mut ops = OpCount::default();
            tame_factor_counted(&g, &c, &mut ops).unwrap();
            // per level: A lookup, B lookup, one X discrete log; plus the base
            assert!(ops.depth <= levels + 1, "{fam}{n}: {ops:?}");
            assert!(ops.lookups <= 2 * (levels + 1) + 1, "{fam}{n}: {ops:?}");
            assert!(ops.dlogs <= levels + 1, "{fam}{n}: {ops:?}");
            assert!(ops.mat_ops <= 64 * (levels + 1) * n as u64, "{fam}{n}: {ops:?}");
        }
    }
}

#[test]
fn closure_orders_match_closed_forms() {
    for (kind, n, q) in [
        (Kind::Minus, 2, 3),
        (Kind::Plus, 2, 3),
        (Kind::Odd, 1, 3),
        (Kind::Odd, 3, 3),
        (Kind::Minus, 4, 3),
        (Kind::Plus, 4, 3),
        (Kind::Odd, 3, 5),
        (Kind::Minus, 2, 5),
        (Kind::Plus, 2, 7),
        (Kind::Minus, 2, 9),
    ] {
        let form = StdForm::new(kind, n, fq(q)).unwrap();
        let f = form.f();
        let o = closure_oracle(&form).unwrap();
        let so = o.full.iter().filter(|g| g.det(f) == 1).count() as u64;
        for (flavor, got) in [(Flavor::O, o.full.len() as u64), (Flavor::SO, so), (Flavor::Omega, o.derived.len() as u64)] {
            let want = GroupDescriptor::new(Family::orth(flavor, kind), q, n).unwrap().order().unwrap();
            assert_eq!(got, want, "{flavor:?} {kind:?} {n} {q}");
        }
        let members: Vec<&Matrix> = o.full.iter().filter(|g| form.member(g, Flavor::Omega)).collect();
        let set: HashSet<&Matrix> = members.iter().copied().collect();
        assert_eq!(set.len(), o.derived.len());
        for g in &members {
            assert!(form.member(&g.inv(f).unwrap(), Flavor::Omega));
        }
        for (i, g) in members.iter().enumerate().step_by(7) {
            let h = members[(i * 31 + 5) % members.len()];
            assert!(set.contains(&g.mul(h, f)));
        }
    }
}

fn gl_order(k: u32, q: u64) -> u64 {
    (0..k).map(|i| q.pow(k) - q.pow(i)).product()
}

#[test]
fn parabolic_shape_orders() {
    for (kind, n, q, k) in [
        (Kind::Minus, 4, 3, 1),
        (Kind::Plus, 4, 3, 1),
        (Kind::Plus, 4, 3, 2),
        (Kind::Odd, 3, 3, 1),
        (Kind::Odd, 5, 3, 1),
        (Kind::Odd, 5, 3, 2),
        (Kind::Minus, 6, 3, 2),
        (Kind::Plus, 6, 3, 3),
        (Kind::Plus, 4, 5, 1),
    ] {
        let form = StdForm::new(kind, n, fq(q)).unwrap();
        let p = parabolic_ls(&form, k).unwrap();
        let mid = StdForm::new(kind, n - 2 * k, fq(q)).unwrap();
        let mid_o = closure_oracle(&mid).unwrap().full.len() as u64;
        let kk = k as u32;
        let r = q.pow(kk * (kk - 1) / 2 + kk * (n as u32 - 2 * kk));
        assert_eq!(p.r_size, r, "{kind:?} {n} {k}");
        assert_eq!(p.q_size, gl_order(kk, q) * mid_o, "{kind:?} {n} {k}");
        assert_eq!(p.shape_order, p.r_size * p.q_size);
    }
}

fn literal_bijection(ls: &LogSignature, f: &Fq) -> bool {
    let sizes = ls.sizes();
    let products: HashSet<Matrix> = (0..ls.claimed_order).map(|m| ls.product(&unrank(m, &sizes).unwrap(), f).unwrap()).collect();
    products.len() as u64 == ls.claimed_order
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // a random element swapped into a block: the verifier agrees with a direct count
    #[test]
    fn verifier_matches_direct_count(block in 0usize..16, pos in 0usize..8, seed in any::<u64>(), minus in any::<bool>()) {
        let d = desc(if minus { "O-" } else { "Oodd" }, 3, if minus { 4 } else { 3 });
        let c = canonical_ls(&d).unwrap();
        let f = c.fq.clone();
        let kind = d.family.kind().unwrap();
        let form = StdForm::new(kind, d.n, f.clone()).unwrap();
        let mut ls = c.ls.clone();
        let b = block % ls.blocks.len();
        let i = pos % ls.blocks[b].len();
        ls.blocks[b][i] = form.random_element(Flavor::O, &mut ChaCha8Rng::seed_from_u64(seed));
        let r = verify_ls(&ls, &VerifyOptions::default(), None).unwrap();
        prop_assert_eq!(r.valid, literal_bijection(&ls, &f));
    }

    #[test]
    fn products_are_members(seed in any::<u64>(), which in 0usize..6) {
        let fams = [("Omega-", 6), ("Omega+", 6), ("SO-", 6), ("PSO+", 6), ("Omegaodd", 5), ("POmega-", 6)];
        let (fam, n) = fams[which];
        let d = desc(fam, 3, n);
        let c = canonical_ls(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = c.ls.sizes().iter().map(|&s| rng.gen_range(0..s)).collect();
        let g = c.ls.product(&idx, &c.fq).unwrap();
        prop_assert!(mls_core::lscore::group_member(&d, &g, &c.fq).unwrap());
        prop_assert_eq!(tame_factor(&g, &c).unwrap().0, idx);
    }
}
