//! Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if a criterion fails that is not listed in KNOWN_FAILING.

use std::sync::Arc;
use std::time::{Duration, Instant};

use mls_core::arith::prime_power;
use mls_core::factorize::{rank, tame_factor, unrank};
use mls_core::fields::{make_tower, Fq};
use mls_core::forms::{all_points, build_space, closure_oracle, omega_audit, StdForm};
use mls_core::lscore::{
    canonical_ls, parabolic_ls, project_ls, spread_check, verify_ls, Center, VerifyMode, VerifyOptions,
};
use mls_core::matgroups::{Family, GroupDescriptor, Kind};
use mls_core::pgm::keygen;
use mls_core::spreads::{classical_spread, verify_partition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COUNT_LIMIT: Duration = Duration::from_secs(10);
const EXHAUSTIVE_LIMIT: Duration = Duration::from_secs(60);
const ROUNDTRIP_LIMIT: Duration = Duration::from_secs(120);
const ROUNDTRIP_SAMPLES: u64 = 10_000;
const SEED: u64 = 42;
const CLASSICAL_POINTS: u64 = 6561;

/// |Ω₃(q)| is q(q²−1)/2, half of |Sp₂(q)|; see the project notes.
const KNOWN_FAILING: &[u32] = &[9];

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn fq(q: u64) -> Arc<Fq> {
    let (p, e) = prime_power(q).unwrap();
    Arc::new(Fq::new(p, e as usize).unwrap())
}

fn desc(family: &str, q: u64, n: usize) -> GroupDescriptor {
    GroupDescriptor::new(family.parse::<Family>().unwrap(), q, n).unwrap()
}

// closed forms
fn points_closed(kind: Kind, q: u64, m: u32) -> u64 {
    match kind {
        Kind::Minus => (q.pow(m) + 1) * (q.pow(m - 1) - 1) / (q - 1),
        Kind::Plus => (q.pow(m) - 1) * (q.pow(m - 1) + 1) / (q - 1),
        Kind::Odd => (q.pow(2 * m) - 1) / (q - 1),
    }
}

fn o_order(kind: Kind, q: u64, n: usize) -> u64 {
    let m = (n / 2) as u32;
    let prod: u64 = (1..=m).map(|i| q.pow(2 * i) - 1).product();
    match kind {
        Kind::Odd => 2 * q.pow(m * m) * prod,
        Kind::Minus | Kind::Plus => {
            let eps: i64 = if kind == Kind::Plus { 1 } else { -1 };
            let inner: u64 = (1..m).map(|i| q.pow(2 * i) - 1).product();
            2 * q.pow(m * (m - 1)) * (q.pow(m) as i64 - eps) as u64 * inner
        }
    }
}

fn length_bound(mut n: u64) -> u64 {
    let mut s = 0;
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            s += p;
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        s += n;
    }
    s
}

fn count_cases() -> Vec<(Kind, u64, usize)> {
    let mut v = Vec::new();
    for kind in [Kind::Minus, Kind::Plus, Kind::Odd] {
        for q in [3, 5] {
            for m in [1, 2] {
                v.push((kind, q, m));
            }
        }
    }
    v.push((Kind::Minus, 3, 3));
    v.push((Kind::Plus, 3, 3));
    v
}

fn criterion_1() -> Line {
    let mut bad = Vec::new();
    let mut slow = Vec::new();
    for (kind, q, m) in count_cases() {
        let t0 = Instant::now();
        let (p, e) = prime_power(q).unwrap();
        let tower = Arc::new(make_tower(p, e as usize, m).unwrap());
        let got = build_space(kind, tower).unwrap().enumerate_l(u64::MAX).unwrap().len() as u64;
        let want = points_closed(kind, q, m as u32);
        if got != want {
            bad.push(format!("{kind:?}({q},{m}): {got} vs {want}"));
        }
        if t0.elapsed() > COUNT_LIMIT {
            slow.push(format!("{kind:?}({q},{m})"));
        }
    }
    let pinned = [(Kind::Minus, 3, 2, 10), (Kind::Plus, 3, 2, 16), (Kind::Odd, 3, 1, 4)];
    for (kind, q, m, v) in pinned {
        if points_closed(kind, q, m) != v {
            bad.push(format!("closed form {kind:?}({q},{m}) ≠ {v}"));
        }
    }
    let n = count_cases().len();
    Line { id: 1, pass: bad.is_empty() && slow.is_empty(), detail: format!("{n} cases, mismatches {bad:?}, over time {slow:?}") }
}

fn criterion_2_3() -> (Line, Line) {
    let mut classical = 0;
    let mut classical_bad = Vec::new();
    for q in [3u64, 5, 7, 9] {
        for m in 1.. {
            if q.pow(2 * m) > CLASSICAL_POINTS {
                break;
            }
            let (p, e) = prime_power(q).unwrap();
            let t = make_tower(p, e as usize, m as usize).unwrap();
            let f = t.fq();
            let s = classical_spread(&t).unwrap();
            let pts: Vec<Vec<u16>> = all_points(2 * m as usize, f.q).collect();
            let r = verify_partition(&s, &pts, &f);
            classical += 1;
            if !r.ok || r.members as u64 != q.pow(m) + 1 {
                classical_bad.push(format!("q={q} m={m}: {:?}", r.violation));
            }
        }
    }
    let mut partial_bad = Vec::new();
    let mut sharp_bad = Vec::new();
    let mut literal_notes = Vec::new();
    for (kind, q, m) in count_cases() {
        let c = spread_check(kind, q, m, SEED).unwrap();
        let part_ok = c.vacuous || c.partial.as_ref().is_some_and(|p| p.ok && p.covered == p.points);
        if !part_ok || c.singular_points as u64 != points_closed(kind, q, m as u32) {
            partial_bad.push(format!("{kind:?}({q},{m})"));
        }
        if !(c.a_sharp && c.b_sharp && c.ok) {
            sharp_bad.push(format!("{kind:?}({q},{m})"));
        }
        if let Some(l) = &c.level {
            if l.literal_a_sharp == Some(false) || l.literal_b_sharp == Some(false) {
                literal_notes.push(format!("{kind:?}({q},{m}): literal fails, {} mismatch notes", l.mismatches.len()));
            }
        }
    }
    let l2 = Line {
        id: 2,
        pass: classical_bad.is_empty() && partial_bad.is_empty(),
        detail: format!(
            "classical spreads checked {classical}, violations {classical_bad:?}; partial spreads violations {partial_bad:?}"
        ),
    };
    let l3 = Line {
        id: 3,
        pass: sharp_bad.is_empty(),
        detail: format!("A and B sharp on all cases except {sharp_bad:?}; literal blocks replaced by search in {} cases", literal_notes.len()),
    };
    (l2, l3)
}

fn criterion_4() -> Line {
    let groups = [
        ("O-", 2),
        ("O+", 2),
        ("SO-", 2),
        ("SO+", 2),
        ("Oodd", 1),
        ("Oodd", 3),
        ("O-", 4),
        ("O+", 4),
        ("SO-", 4),
        ("SO+", 4),
    ];
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for (fam, n) in groups {
        let t0 = Instant::now();
        let d = desc(fam, 3, n);
        let kind = d.family.kind().unwrap();
        let oracle = closure_oracle(&StdForm::new(kind, n, fq(3)).unwrap()).unwrap();
        let f = fq(3);
        let closure_order = if fam.starts_with("SO") {
            oracle.full.iter().filter(|g| g.det(&f) == 1).count() as u64
        } else {
            oracle.full.len() as u64
        };
        let closed = if fam.starts_with("SO") { o_order(kind, 3, n) / 2 } else { o_order(kind, 3, n) };
        let c = canonical_ls(&d).unwrap();
        let r = verify_ls(&c.ls, &VerifyOptions::default(), None).unwrap();
        let bound = length_bound(closed);
        let ok = r.valid
            && r.mode == VerifyMode::Exhaustive
            && r.distinct == closed
            && closure_order == closed
            && d.order().unwrap() == closed
            && c.ls.length() == bound
            && t0.elapsed() < EXHAUSTIVE_LIMIT;
        notes.push(format!("{d}: |G| {closed}, length {}", c.ls.length()));
        if !ok {
            bad.push(format!("{d}: valid {} closure {closure_order} length {} bound {bound}", r.valid, c.ls.length()));
        }
    }
    let o3 = desc("Oodd", 3, 3).order().unwrap() == 48 && length_bound(48) == 11;
    let o4 = length_bound(1440) == 21 && length_bound(1152) == 20;
    Line { id: 4, pass: bad.is_empty() && o3 && o4, detail: format!("{}; failures {bad:?}", notes.join(", ")) }
}

fn criterion_5() -> Line {
    let mut details = Vec::new();
    let mut pass = true;
    for fam in ["O-", "O+"] {
        let t0 = Instant::now();
        let c = canonical_ls(&desc(fam, 3, 6)).unwrap();
        let f = c.fq.clone();
        let sizes = c.ls.sizes();
        let order = c.ls.claimed_order;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut failures = 0;
        for _ in 0..ROUNDTRIP_SAMPLES {
            let msg = rng.gen_range(0..order);
            let idx = unrank(msg, &sizes).unwrap();
            let g = c.ls.product(&idx, &f).unwrap();
            match tame_factor(&g, &c) {
                Ok(back) if back.0 == idx && rank(&back.0, &sizes).unwrap() == msg => {}
                _ => failures += 1,
            }
        }
        let el = t0.elapsed();
        pass &= failures == 0 && el < ROUNDTRIP_LIMIT;
        details.push(format!("{fam}6(3): {failures} failures in {ROUNDTRIP_SAMPLES} ({:.1}s)", el.as_secs_f64()));
    }
    Line { id: 5, pass, detail: details.join(", ") }
}

fn criterion_6() -> Line {
    let mut details = Vec::new();
    let mut pass = true;
    for (fam, want) in [("SO-", 360u64), ("SO+", 288)] {
        let c = canonical_ls(&desc(fam, 3, 4)).unwrap();
        let p = project_ls(&c, Center::PlusMinus).unwrap();
        let r = verify_ls(&p.ls, &VerifyOptions::default(), None).unwrap();
        let ok = r.valid && r.distinct == want && p.ls.claimed_order == want && p.ls.length() == length_bound(want);
        pass &= ok;
        details.push(format!("{} order {} length {} bound {}", p.ls.group, r.distinct, p.ls.length(), length_bound(want)));
    }
    Line { id: 6, pass, detail: details.join(", ") }
}

fn criterion_7() -> Line {
    let mut details = Vec::new();
    let mut pass = true;
    for kind in [Kind::Minus, Kind::Plus] {
        let a = omega_audit(&StdForm::new(kind, 4, fq(3)).unwrap()).unwrap();
        for c in &a.criteria {
            // a stated outcome: agreement, or a disagreement count backed by witnesses
            let stated = c.disagreements == 0 || !c.witnesses.is_empty();
            let consistent = c.accepted.abs_diff(a.oracle_order) <= c.disagreements;
            pass &= stated && consistent;
            let verdict = if c.disagreements == 0 { "agrees".to_string() } else { format!("disagrees on {}", c.disagreements) };
            details.push(format!("{kind:?} {}: {verdict}", c.name));
        }
    }
    Line { id: 7, pass, detail: details.join(", ") }
}

fn criterion_8() -> Line {
    let mut details = Vec::new();
    let mut pass = true;
    for (kind, n) in [(Kind::Odd, 3), (Kind::Minus, 4), (Kind::Plus, 4), (Kind::Minus, 6)] {
        let form = StdForm::new(kind, n, fq(3)).unwrap();
        let p = parabolic_ls(&form, 1).unwrap();
        let l = form.singular_points(u64::MAX).unwrap().len() as u64;
        let g = o_order(kind, 3, n);
        let ok = g % l == 0 && p.r_size * p.q_size == g / l;
        pass &= ok;
        details.push(format!("{kind:?}{n}: {}·{} vs {g}/{l}", p.r_size, p.q_size));
    }
    Line { id: 8, pass, detail: details.join(", ") }
}

fn criterion_9() -> Line {
    let mut details = Vec::new();
    let mut pass = true;
    for q in [3u64, 5] {
        let oracle = closure_oracle(&StdForm::new(Kind::Odd, 3, fq(q)).unwrap()).unwrap();
        let omega = oracle.derived.len() as u64;
        let sp2 = q * (q * q - 1);
        pass &= omega == sp2;
        details.push(format!("q={q}: |Ω3| {omega} vs |Sp2| {sp2}"));
    }
    Line { id: 9, pass, detail: details.join(", ") }
}

fn criterion_10() -> Line {
    let d = desc("O-", 3, 4);
    let key = keygen(&d, SEED).unwrap();
    let order = key.order();
    let cts: Vec<u64> = (0..order).map(|m| key.encrypt(m).unwrap()).collect();
    let mut sorted = cts.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let permutation = order == 1440 && sorted.len() as u64 == order && sorted.iter().all(|&c| c < order);
    let inverse = cts.iter().enumerate().all(|(m, &c)| key.decrypt(c).unwrap() == m as u64);
    let again = keygen(&d, SEED).unwrap();
    let deterministic = again.beta_ls == key.beta_ls && (0..order).step_by(7).all(|m| again.encrypt(m).unwrap() == cts[m as usize]);
    Line {
        id: 10,
        pass: permutation && inverse && deterministic,
        detail: format!("permutation of Z_{order} {permutation}, decrypt∘encrypt = id {inverse}, deterministic {deterministic}"),
    }
}

fn main() {
    let mut lines = vec![criterion_1()];
    let (l2, l3) = criterion_2_3();
    lines.push(l2);
    lines.push(l3);
    lines.extend([criterion_4(), criterion_5(), criterion_6(), criterion_7(), criterion_8(), criterion_9(), criterion_10()]);
    let mut unexpected = 0;
    for l in &lines {
        let known = KNOWN_FAILING.contains(&l.id);
        let tag = match (l.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("acceptance criterion {:>2}: {tag}: {}", l.id, l.detail);
        if !l.pass && !known {
            unexpected += 1;
        }
    }
    println!("acceptance: {} of {} criteria pass", lines.iter().filter(|l| l.pass).count(), lines.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
