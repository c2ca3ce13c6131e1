//! Command-line front end. Every command prints a JSON report followed by a
//! short human-readable summary.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arith::prime_power;
use crate::error::{MlsError, Result};
use crate::factorize::{rank, tame_factor_counted, unrank};
use crate::fields::{make_tower, Fq};
use crate::forms::{build_space, omega_audit, StdForm};
use crate::lscore::{
    canonical_ls, canonical_ls_seeded, min_length_bound, parabolic_ls, project_ls, spread_check, verify_ls, Center,
    LogSignature, OpCount, VerifyMode, VerifyOptions, VerifyReport, DEFAULT_SEED,
};
use crate::matgroups::descriptor::singular_point_count;
use crate::matgroups::matrix::MatrixRepr;
use crate::matgroups::{Family, Flavor, GroupDescriptor, Kind, Matrix};
use crate::pgm::{keygen, PgmKey};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Largest group whose PGM permutation is checked on every message.
const PGM_EXHAUSTIVE_LIMIT: u64 = 2000;

#[derive(Parser, Debug)]
#[command(name = "mls", version, about = "Logarithmic signatures for finite orthogonal groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Leave timing out of the report so that reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GroupArgs {
    /// O-, O+, Oodd, SO-, ..., POmegaodd
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub q: u64,
    /// Half rank; the dimension follows from the kind.
    #[arg(long, conflicts_with = "n")]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpaceArgs {
    /// minus, plus or odd
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub q: u64,
    #[arg(long, conflicts_with = "n")]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Limits {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Build the canonical LS of a group and check it.
    Construct {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an LS file, literally or by sampled decode round-trips.
    Verify {
        #[arg(conflicts_with = "input")]
        file: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value = "exhaustive")]
        mode: String,
        #[command(flatten)]
        limits: Limits,
        /// Seed the file was constructed with (sampled mode rebuilds its tables).
        #[arg(long, default_value_t = DEFAULT_SEED)]
        construct_seed: u64,
    },
    /// Tame factorization through the canonical LS.
    Factor {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        limits: Limits,
        /// A matrix file to factor.
        #[arg(long = "in", conflicts_with = "rank")]
        input: Option<PathBuf>,
        /// Factor the element with this rank.
        #[arg(long)]
        rank: Option<u64>,
    },
    /// Count singular points by enumeration and by closed form.
    Counts {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        limits: Limits,
    },
    /// Spread partitions and sharp transitivity of the top-level blocks.
    SpreadCheck {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        limits: Limits,
    },
    /// The two-block LS of the stabilizer of ⟨e1..ek⟩.
    Parabolic {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a canonical LS to the quotient by {±I}.
    Project {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Key generation, encryption and decryption of the LS-keyed permutation.
    PgmDemo {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Ω membership tests against the commutator subgroup, element by element.
    OmegaCheck {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        limits: Limits,
    },
}

impl Command {
    fn limits(&self) -> &Limits {
        match self {
            Command::Construct { limits, .. }
            | Command::Verify { limits, .. }
            | Command::Factor { limits, .. }
            | Command::Counts { limits, .. }
            | Command::SpreadCheck { limits, .. }
            | Command::Parabolic { limits, .. }
            | Command::Project { limits, .. }
            | Command::PgmDemo { limits, .. }
            | Command::OmegaCheck { limits, .. } => limits,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a Command,
    seed: u64,
    budgets: &'a Limits,
    timing_ms: Option<u128>,
    pass: bool,
    error: Option<String>,
    result: Value,
}

/// What a command hands back: pass/fail, the JSON result, summary lines.
struct Outcome {
    pass: bool,
    result: Value,
    summary: Vec<String>,
}

/// Exit code and everything that goes to stdout.
#[derive(Debug)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, T>(argv: I) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let text = e.render().to_string();
            return if code == EXIT_PASS {
                RunOutput { code, stdout: text, stderr: String::new() }
            } else {
                RunOutput { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let start = Instant::now();
    let res = dispatch(&cli.command);
    let timing_ms = (!cli.no_timing).then(|| start.elapsed().as_millis());
    let limits = cli.command.limits();
    let (code, pass, error, result, summary) = match res {
        Ok(o) => (if o.pass { EXIT_PASS } else { EXIT_VIOLATION }, o.pass, None, o.result, o.summary),
        Err(e) => (EXIT_ERROR, false, Some(e.to_string()), Value::Null, vec![format!("error: {e}")]),
    };
    let report = Report {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: &cli.command,
        seed: limits.seed,
        budgets: limits,
        timing_ms,
        pass,
        error: error.clone(),
        result,
    };
    let mut stdout = serde_json::to_string_pretty(&report).expect("report serializes");
    stdout.push('\n');
    for line in summary {
        stdout.push_str(&line);
        stdout.push('\n');
    }
    RunOutput { code, stdout, stderr: error.map(|e| format!("error: {e}\n")).unwrap_or_default() }
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Construct { group, limits, out } => construct(group, limits, out.as_ref()),
        Command::Verify { file, input, mode, limits, construct_seed } => {
            let path = file
                .as_ref()
                .or(input.as_ref())
                .ok_or_else(|| MlsError::InvalidParameter("verify needs an LS file".into()))?;
            verify(path, mode.parse()?, limits, *construct_seed)
        }
        Command::Factor { group, limits, input, rank } => factor(group, limits, input.as_ref(), *rank),
        Command::Counts { space, limits } => counts(space, limits),
        Command::SpreadCheck { space, limits } => spread(space, limits),
        Command::Parabolic { space, k, limits, out } => parabolic(space, *k, limits, out.as_ref()),
        Command::Project { group, limits, out } => project(group, limits, out.as_ref()),
        Command::PgmDemo { group, limits, out, input } => pgm_demo(group, limits, out.as_ref(), input.as_ref()),
        Command::OmegaCheck { space, limits } => omega(space, limits),
    }
}

fn resolve_n(kind: Kind, m: Option<usize>, n: Option<usize>) -> Result<usize> {
    match (m, n) {
        (Some(m), None) => Ok(kind.dim(m)),
        (None, Some(n)) => {
            kind.half_rank(n)?;
            Ok(n)
        }
        _ => Err(MlsError::InvalidParameter("give exactly one of --m and --n".into())),
    }
}

impl GroupArgs {
    fn descriptor(&self) -> Result<GroupDescriptor> {
        let family: Family = self.family.parse()?;
        let kind = family
            .kind()
            .ok_or_else(|| MlsError::Unsupported(format!("family {family} has no orthogonal kind")))?;
        GroupDescriptor::new(family, self.q, resolve_n(kind, self.m, self.n)?)
    }
}

impl SpaceArgs {
    fn kind(&self) -> Result<Kind> {
        self.kind.parse()
    }

    fn m(&self) -> Result<usize> {
        let kind = self.kind()?;
        let n = resolve_n(kind, self.m, self.n)?;
        kind.half_rank(n)
    }

    fn form(&self) -> Result<StdForm> {
        let kind = self.kind()?;
        let n = resolve_n(kind, self.m, self.n)?;
        Ok(StdForm::new(kind, n, Arc::new(fq(self.q)?))?)
    }
}

fn fq(q: u64) -> Result<Fq> {
    let (p, e) = prime_power(q).ok_or_else(|| MlsError::InvalidParameter(format!("q = {q} is not a prime power")))?;
    Fq::new(p, e as usize)
}

fn verify_auto(ls: &LogSignature, limits: &Limits, tame: Option<&crate::lscore::CanonicalLs>) -> Result<VerifyReport> {
    let mode = if ls.claimed_order <= limits.budget { VerifyMode::Exhaustive } else { VerifyMode::Sampled };
    let opts = VerifyOptions { mode, samples: limits.samples, seed: limits.seed, budget: limits.budget };
    verify_ls(ls, &opts, tame)
}

fn verify_summary(r: &VerifyReport) -> String {
    format!(
        "{}: {} check, order {}, blocks {:?}, length {} (bound {}), {}",
        r.group,
        match r.mode {
            VerifyMode::Exhaustive => "exhaustive",
            VerifyMode::Sampled => "sampled",
        },
        r.group_order,
        r.block_sizes,
        r.length,
        r.bound,
        if r.mls {
            "MLS confirmed"
        } else if r.valid {
            "LS confirmed, not minimal"
        } else {
            "NOT an LS"
        }
    )
}

fn construct(group: &GroupArgs, limits: &Limits, out: Option<&PathBuf>) -> Result<Outcome> {
    let desc = group.descriptor()?;
    let c = canonical_ls_seeded(&desc, limits.seed)?;
    if let Some(p) = out {
        c.ls.save(p)?;
    }
    let v = verify_auto(&c.ls, limits, Some(&c))?;
    let mut summary = vec![verify_summary(&v)];
    if let Some(p) = out {
        summary.push(format!("written to {}", p.display()));
    }
    Ok(Outcome { pass: v.mls, result: json!({ "construction": c.report, "verification": v }), summary })
}

fn verify(path: &PathBuf, mode: VerifyMode, limits: &Limits, construct_seed: u64) -> Result<Outcome> {
    let ls = LogSignature::load(path)?;
    let opts = VerifyOptions { mode, samples: limits.samples, seed: limits.seed, budget: limits.budget };
    let tame = match mode {
        VerifyMode::Sampled => Some(canonical_ls_seeded(&ls.group, construct_seed)?),
        VerifyMode::Exhaustive => None,
    };
    let r = verify_ls(&ls, &opts, tame.as_ref())?;
    let mut summary = vec![verify_summary(&r)];
    if let Some(s) = &r.shape_error {
        summary.push(format!("shape: {s}"));
    }
    for c in &r.collisions {
        summary.push(format!("collision: {:?} and {:?} give the same element", c.first, c.second));
    }
    for (k, i) in &r.non_members {
        summary.push(format!("block {k} element {i} is not in the group"));
    }
    Ok(Outcome { pass: r.valid, result: serde_json::to_value(&r)?, summary })
}

fn random_element(desc: &GroupDescriptor, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let Family::Orth { flavor, kind, .. } = desc.family else {
        return Err(MlsError::Unsupported(format!("random elements of {}", desc.family)));
    };
    let form = StdForm::new(kind, desc.n, Arc::new(fq(desc.q)?))?;
    Ok(form.random_element(flavor, rng))
}

fn factor(group: &GroupArgs, limits: &Limits, input: Option<&PathBuf>, at_rank: Option<u64>) -> Result<Outcome> {
    let desc = group.descriptor()?;
    let c = canonical_ls(&desc)?;
    let f = &*c.fq;
    let sizes = c.ls.sizes();
    let single = match (input, at_rank) {
        (Some(p), _) => {
            let r: MatrixRepr = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            Some(Matrix::from_repr(&r, f)?)
        }
        (None, Some(r)) => Some(c.ls.product(&unrank(r, &sizes)?, f)?),
        (None, None) => None,
    };
    if let Some(g) = single {
        let mut ops = OpCount::default();
        let idx = tame_factor_counted(&g, &c, &mut ops)?;
        let r = rank(&idx.0, &sizes)?;
        let summary = vec![format!("{}: indices {:?}, rank {r}, {} lookups, {} dlogs", desc, idx.0, ops.lookups, ops.dlogs)];
        return Ok(Outcome { pass: true, result: json!({ "indices": idx, "rank": r, "ops": ops, "block_sizes": sizes }), summary });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);
    let mut failures = Vec::new();
    let mut max_ops = OpCount::default();
    for i in 0..limits.samples {
        let g = random_element(&desc, &mut rng)?;
        let mut ops = OpCount::default();
        if let Err(e) = tame_factor_counted(&g, &c, &mut ops) {
            if failures.len() < 5 {
                failures.push(json!({ "sample": i, "error": e.to_string() }));
            }
        }
        max_ops.lookups = max_ops.lookups.max(ops.lookups);
        max_ops.dlogs = max_ops.dlogs.max(ops.dlogs);
        max_ops.mat_ops = max_ops.mat_ops.max(ops.mat_ops);
        max_ops.depth = max_ops.depth.max(ops.depth);
    }
    let pass = failures.is_empty();
    let summary = vec![format!(
        "{}: {} random elements factored, {} failures, at most {} lookups and {} dlogs each",
        desc,
        limits.samples,
        failures.len(),
        max_ops.lookups,
        max_ops.dlogs
    )];
    Ok(Outcome { pass, result: json!({ "samples": limits.samples, "failures": failures, "max_ops": max_ops }), summary })
}

fn counts(space: &SpaceArgs, limits: &Limits) -> Result<Outcome> {
    let kind = space.kind()?;
    let m = space.m()?;
    let (p, e) = prime_power(space.q).ok_or_else(|| MlsError::InvalidParameter(format!("q = {} is not a prime power", space.q)))?;
    let tower = Arc::new(make_tower(p, e as usize, m.max(1))?);
    let n = kind.dim(m);
    let enumerated = if m == 0 {
        0
    } else {
        build_space(kind, tower)?.enumerate_l(limits.budget.max(1))?.len() as u64
    };
    let closed = singular_point_count(kind, n, space.q);
    Ok(Outcome {
        pass: enumerated == closed,
        result: json!({ "kind": kind, "q": space.q, "m": m, "n": n, "enumerated": enumerated, "closed_form": closed }),
        summary: vec![enumerated.to_string()],
    })
}

fn spread(space: &SpaceArgs, limits: &Limits) -> Result<Outcome> {
    let c = spread_check(space.kind()?, space.q, space.m()?, limits.seed)?;
    let mut summary = vec![format!(
        "{:?} q={} m={}: classical spread {}, partial spread {}, A sharp {}, B sharp {}",
        c.kind,
        c.q,
        c.m,
        c.classical.as_ref().map_or("skipped".into(), |r| if r.ok { "partitions V\\0".to_string() } else { "FAILS".into() }),
        if c.vacuous {
            "vacuous (no singular points)".to_string()
        } else {
            c.partial.as_ref().map_or("n/a".into(), |r| format!("{} members over {} points, ok={}", r.members, r.points, r.ok))
        },
        c.a_sharp,
        c.b_sharp
    )];
    if let Some(l) = &c.level {
        summary.extend(l.mismatches.iter().map(|m| format!("mismatch: {m}")));
    }
    Ok(Outcome { pass: c.ok, result: serde_json::to_value(&c)?, summary })
}

fn parabolic(space: &SpaceArgs, k: usize, limits: &Limits, out: Option<&PathBuf>) -> Result<Outcome> {
    let form = space.form()?;
    let p = parabolic_ls(&form, k)?;
    if let Some(path) = out {
        p.ls.save(path)?;
    }
    let o_order = crate::matgroups::descriptor::orthogonal_order(form.kind, form.n, form.q())?;
    let points = form.singular_points(limits.budget.max(1))?.len() as u64;
    let stabilizer = if k == 1 { Some(o_order / points) } else { None };
    let orbit_ok = stabilizer.map_or(true, |s| o_order % points == 0 && s == p.r_size * p.q_size);
    let v = if p.shape_order <= limits.budget { Some(verify_auto(&p.ls, limits, None)?) } else { None };
    let pass = orbit_ok && p.r_size * p.q_size == p.shape_order && v.as_ref().map_or(true, |v| v.valid);
    let summary = vec![format!(
        "{:?} n={} k={k}: |R| = {}, |Q| = {}, |R||Q| = {}, |G|/|L| = {}{}",
        form.kind,
        form.n,
        p.r_size,
        p.q_size,
        p.r_size * p.q_size,
        stabilizer.map_or("n/a".into(), |s| s.to_string()),
        v.as_ref().map_or(String::new(), |v| format!(", exhaustive LS check {}", if v.valid { "passed" } else { "FAILED" }))
    )];
    Ok(Outcome {
        pass,
        result: json!({ "parabolic": p, "o_order": o_order, "singular_points": points, "stabilizer_order": stabilizer, "verification": v }),
        summary,
    })
}

fn project(group: &GroupArgs, limits: &Limits, out: Option<&PathBuf>) -> Result<Outcome> {
    let desc = group.descriptor()?;
    let linear = GroupDescriptor { family: desc.family.linear(), ..desc };
    let c = canonical_ls_seeded(&linear, limits.seed)?;
    let pc = project_ls(&c, Center::PlusMinus)?;
    if let Some(p) = out {
        pc.ls.save(p)?;
    }
    let v = verify_auto(&pc.ls, limits, Some(&pc))?;
    let bound = min_length_bound(pc.ls.claimed_order)?;
    let summary = vec![
        format!("{} → {}: {}", c.ls.group, pc.ls.group, pc.report.halved.clone().unwrap_or_else(|| "−I not in the group, blocks unchanged".into())),
        verify_summary(&v),
    ];
    Ok(Outcome {
        pass: v.mls,
        result: json!({ "linear": c.report, "projective": pc.report, "bound": bound, "verification": v }),
        summary,
    })
}

fn pgm_demo(group: &GroupArgs, limits: &Limits, out: Option<&PathBuf>, input: Option<&PathBuf>) -> Result<Outcome> {
    let key = match input {
        Some(p) => PgmKey::load(p)?,
        None => keygen(&group.descriptor()?, limits.seed)?,
    };
    if let Some(p) = out {
        key.save(p)?;
    }
    let order = key.order();
    let exhaustive = order <= PGM_EXHAUSTIVE_LIMIT;
    let messages: Vec<u64> = if exhaustive {
        (0..order).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);
        (0..limits.samples).map(|_| rng.gen_range(0..order)).collect()
    };
    let mut seen = HashSet::new();
    let mut collisions = 0u64;
    let mut roundtrip_failures = 0u64;
    let mut sample = Vec::new();
    for &m in &messages {
        let c = key.encrypt(m)?;
        if seen.insert(m) {
            if sample.len() < 8 {
                sample.push((m, c));
            }
        }
        if key.decrypt(c)? != m {
            roundtrip_failures += 1;
        }
    }
    let images: HashSet<u64> = seen.iter().map(|&m| key.encrypt(m)).collect::<Result<_>>()?;
    collisions += (seen.len() - images.len()) as u64;
    let again = keygen(&key.descriptor(), key.seed)?;
    let deterministic = again.beta_ls == key.beta_ls
        && sample.iter().all(|&(m, c)| again.encrypt(m).map_or(false, |c2| c2 == c));
    let permutation = collisions == 0 && (!exhaustive || images.len() as u64 == order);
    let pass = permutation && roundtrip_failures == 0 && deterministic;
    let summary = vec![format!(
        "{}: encrypt {} on {} messages ({}), decrypt∘encrypt failures {roundtrip_failures}, deterministic {deterministic}",
        key.descriptor(),
        if permutation { "is injective" } else { "COLLIDES" },
        seen.len(),
        if exhaustive { "all of Z_|G|" } else { "sampled" }
    )];
    Ok(Outcome {
        pass,
        result: json!({
            "group": key.descriptor().to_string(),
            "order": order,
            "exhaustive": exhaustive,
            "messages": seen.len(),
            "permutation": permutation,
            "collisions": collisions,
            "roundtrip_failures": roundtrip_failures,
            "deterministic": deterministic,
            "alpha_check": key.alpha_check,
            "beta_check": key.beta_check,
            "sample": sample,
        }),
        summary,
    })
}

fn omega(space: &SpaceArgs, _limits: &Limits) -> Result<Outcome> {
    let form = space.form()?;
    let a = omega_audit(&form)?;
    let closed = crate::matgroups::descriptor::flavor_order(Flavor::Omega, form.kind, form.n, form.q())?;
    let mut summary: Vec<String> = a
        .criteria
        .iter()
        .map(|c| {
            if c.disagreements == 0 {
                format!("{}: agrees with the commutator subgroup on all {} elements of SO", c.name, a.so_order)
            } else {
                format!("{}: disagrees on {} of {} elements of SO (accepts {}, oracle has {})", c.name, c.disagreements, a.so_order, c.accepted, a.oracle_order)
            }
        })
        .collect();
    let q = form.q();
    let sp2 = q * (q * q - 1);
    if form.n == 3 {
        summary.push(format!("|Ω_3({q})| = {} by closure, |Sp_2({q})| = {sp2}", a.oracle_order));
    }
    Ok(Outcome {
        pass: true,
        result: json!({ "audit": a, "closed_form_omega_order": closed, "sp2_order": (form.n == 3).then_some(sp2) }),
        summary,
    })
}
