//! Seeded experiment runner: rejection-rate estimates and the verification
//! sweeps, with row output as CSV or JSON.
//!
//! Every random quantity comes from a ChaCha8 stream seeded by
//! [`derive_seed`]`(master, index)`, and parallel results are collected in
//! index order, so output bytes depend only on the inputs.

use std::io::Write;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blue::{check_blue_chain, random_blue_instance};
use crate::boolfn::{noisy_monotone, random_function, BooleanFunction, QueryOracle, TruthTable};
use crate::dichotomy::{check_lemmas, verify_dichotomy, verify_paths, LemmaCheck};
use crate::error::{Error, Result};
use crate::hypercube::{draw_pair, full_mask, level, level_pair_prob, make_params, MAX_DIM};
use crate::rational::{int, to_f64, to_pq};
use crate::testers::{combined_test, edge_test_once, path_test_once, sensitivity_test};

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed. Fixed for reproducibility; do not change.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TesterKind {
    /// One edge draw per trial.
    Edge,
    /// One path draw per trial.
    Path,
    /// One full combined-tester run per trial.
    Combined,
    /// One full sensitivity-tester run per trial.
    Sensitivity,
}

impl std::str::FromStr for TesterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(TesterKind::Edge),
            "path" => Ok(TesterKind::Path),
            "combined" => Ok(TesterKind::Combined),
            "sensitivity" => Ok(TesterKind::Sensitivity),
            _ => Err(Error::InvalidParameter(format!("unknown tester '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSpec {
    pub tester: TesterKind,
    pub eps: f64,
    /// Path draws only; the combined and sensitivity testers pick their own.
    pub sigma: f64,
    pub budget_constant: f64,
    /// Required by the sensitivity tester.
    pub avg_sensitivity: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub tester: TesterKind,
    pub trials: u64,
    pub rejections: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub queries_total: u64,
    pub mean_queries: f64,
}

/// Runs the tester `trials` times, trial `k` seeded by `derive_seed(seed, k)`.
pub fn estimate_rejection(f: &(dyn BooleanFunction + Sync), spec: &EstimateSpec) -> Result<EstimateResult> {
    if spec.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let n = f.dim();
    if n == 0 || n > MAX_DIM {
        return Err(Error::Dimension { n, max: MAX_DIM });
    }
    let params = make_params(n, spec.eps, spec.sigma)?;
    if spec.tester == TesterKind::Sensitivity && spec.avg_sensitivity.is_none() {
        return Err(Error::InvalidParameter(
            "sensitivity tester needs the average sensitivity".into(),
        ));
    }
    let outcomes: Vec<(bool, u64)> = (0..spec.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(spec.seed, k);
            let mut o = QueryOracle::new(f);
            let (rejected, q) = match spec.tester {
                TesterKind::Edge => {
                    let v = edge_test_once(&mut o, &mut rng)?;
                    (v.rejected, v.queries_used)
                }
                TesterKind::Path => {
                    let v = path_test_once(&mut o, &params, &mut rng)?;
                    (v.rejected, v.queries_used)
                }
                TesterKind::Combined => {
                    let r = combined_test(&mut o, spec.eps, spec.budget_constant, &mut rng)?;
                    (r.verdict.rejected, r.verdict.queries_used)
                }
                TesterKind::Sensitivity => {
                    let i = spec.avg_sensitivity.unwrap_or(0.0);
                    let r = sensitivity_test(&mut o, spec.eps, i, spec.budget_constant, &mut rng)?;
                    (r.verdict.rejected, r.verdict.queries_used)
                }
            };
            Ok((rejected, q))
        })
        .collect::<Result<_>>()?;
    let rejections = outcomes.iter().filter(|o| o.0).count() as u64;
    let queries_total: u64 = outcomes.iter().map(|o| o.1).sum();
    let (ci_low, ci_high) = wilson_interval(rejections, spec.trials, 1.96);
    Ok(EstimateResult {
        tester: spec.tester,
        trials: spec.trials,
        rejections,
        estimate: rejections as f64 / spec.trials as f64,
        ci_low,
        ci_high,
        queries_total,
        mean_queries: queries_total as f64 / spec.trials as f64,
    })
}

/// Exact rejection probability of one path draw: total pair mass on
/// violating pairs.
pub fn exact_path_rejection(f: &TruthTable, eps: f64, sigma: f64) -> Result<BigRational> {
    let n = f.dim();
    let params = make_params(n, eps, sigma)?;
    let g = crate::metrics::ViolationGraph::build(f)?;
    let mut by_levels = vec![0u64; ((n + 1) * (n + 1)) as usize];
    for (x, y) in g.pairs() {
        by_levels[(level(x) * (n + 1) + level(y)) as usize] += 1;
    }
    let mut total = BigRational::zero();
    for (k, &c) in by_levels.iter().enumerate() {
        if c > 0 {
            let (a, b) = (k as u32 / (n + 1), k as u32 % (n + 1));
            total += level_pair_prob(a, b, &params)? * int(c);
        }
    }
    Ok(total)
}

/// Where the functions of a sweep come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSet {
    /// Every function on `n ≤ 4` variables, indexed by truth table.
    Exhaustive { n: u32 },
    /// Uniform random tables; function `k` uses `derive_seed(seed, k)`.
    Random { n: u32, count: u64, seed: u64 },
    /// Random monotone functions with `flips` points toggled.
    NoisyMonotone { n: u32, count: u64, seed: u64, flips: u32 },
    /// Alternates uniform random and noisy monotone (`2^n/16` flips).
    Mixed { n: u32, count: u64, seed: u64 },
}

impl FunctionSet {
    pub fn dim(&self) -> u32 {
        match *self {
            FunctionSet::Exhaustive { n }
            | FunctionSet::Random { n, .. }
            | FunctionSet::NoisyMonotone { n, .. }
            | FunctionSet::Mixed { n, .. } => n,
        }
    }

    pub fn len(&self) -> u64 {
        match *self {
            FunctionSet::Exhaustive { n } => 1u64 << (1u64 << n),
            FunctionSet::Random { count, .. }
            | FunctionSet::NoisyMonotone { count, .. }
            | FunctionSet::Mixed { count, .. } => count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if let FunctionSet::Exhaustive { n } = *self {
            if n == 0 || n > 4 {
                return Err(Error::Dimension { n, max: 4 });
            }
        }
        Ok(())
    }

    /// `(id, table)` of member `k`.
    pub fn get(&self, k: u64) -> Result<(String, TruthTable)> {
        match *self {
            FunctionSet::Exhaustive { n } => Ok((format!("table:{k}"), TruthTable::from_u64(n, k)?)),
            FunctionSet::Random { n, seed, .. } => {
                let s = derive_seed(seed, k);
                Ok((format!("random:{s}"), random_function(n, s)?))
            }
            FunctionSet::NoisyMonotone { n, seed, flips, .. } => {
                let s = derive_seed(seed, k);
                Ok((format!("noisy:{s}:{flips}"), noisy_monotone(n, flips, s)?))
            }
            FunctionSet::Mixed { n, seed, .. } => {
                let s = derive_seed(seed, k);
                if k.is_multiple_of(2) {
                    Ok((format!("random:{s}"), random_function(n, s)?))
                } else {
                    let flips = ((1u32 << n) / 16).max(1);
                    Ok((format!("noisy:{s}:{flips}"), noisy_monotone(n, flips, s)?))
                }
            }
        }
    }
}

/// One row of sweep output.
pub trait SweepRow: Serialize + Send {
    fn pass(&self) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyRow {
    pub id: String,
    pub n: u32,
    pub eps_f: String,
    pub eps_f_approx: f64,
    pub phi_plus: String,
    pub gamma_plus: String,
    pub r: String,
    pub product: String,
    pub product_approx: f64,
    pub bound: String,
    pub bound_approx: f64,
    pub pass: bool,
    pub piece3_pass: bool,
    pub piece4_pass: bool,
    pub per_dim_pass: bool,
}

impl SweepRow for DichotomyRow {
    fn pass(&self) -> bool {
        self.pass && self.piece3_pass && self.piece4_pass && self.per_dim_pass
    }
}

pub fn dichotomy_sweep(set: &FunctionSet) -> Result<Vec<DichotomyRow>> {
    set.validate()?;
    (0..set.len())
        .into_par_iter()
        .map(|k| {
            let (id, f) = set.get(k)?;
            let d = verify_dichotomy(&f)?;
            Ok(DichotomyRow {
                id,
                n: d.n,
                eps_f: to_pq(&d.eps_f.0),
                eps_f_approx: to_f64(&d.eps_f.0),
                phi_plus: to_pq(&d.phi_plus.0),
                gamma_plus: to_pq(&d.gamma_plus.0),
                r: to_pq(&d.r.0),
                product: to_pq(&d.product.0),
                product_approx: to_f64(&d.product.0),
                bound: to_pq(&d.bound.0),
                bound_approx: to_f64(&d.bound.0),
                pass: d.pass,
                piece3_pass: d.piece3_pass,
                piece4_pass: d.piece4_pass,
                per_dim_pass: d.per_dim_pass,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow {
    pub id: String,
    pub n: u32,
    pub eps_f: String,
    pub matching_size: u64,
    pub r: String,
    pub piece3_pass: bool,
    pub piece4_pass: bool,
    pub per_dim_pass: bool,
    pub f_edges: u64,
    pub extracted: u64,
    pub max_degree_f: u64,
    pub f_size_pass: bool,
    pub extracted_size_pass: bool,
    pub extracted_edges_valid: bool,
    pub routing_groups: u64,
    pub routing_pass: bool,
    pub sequences: u64,
    pub distinct_sequences: u64,
    pub sequences_with_violation: u64,
    pub alternating_pass: bool,
    pub pass: bool,
}

impl SweepRow for LemmaRow {
    fn pass(&self) -> bool {
        self.pass
    }
}

fn lemma_row(id: String, c: &LemmaCheck) -> LemmaRow {
    let d = &c.dichotomy;
    let e = &c.extraction;
    let seqs = c.alternating.iter().map(|a| a.sequences.len() as u64).sum();
    LemmaRow {
        id,
        n: d.n,
        eps_f: to_pq(&d.eps_f.0),
        matching_size: d.matching_size,
        r: to_pq(&d.r.0),
        piece3_pass: d.piece3_pass,
        piece4_pass: d.piece4_pass,
        per_dim_pass: c.per_dimension.all_pass(),
        f_edges: e.f_edges.len() as u64,
        extracted: e.matching.len() as u64,
        max_degree_f: e.max_degree_f as u64,
        f_size_pass: e.f_size_pass,
        extracted_size_pass: e.size_pass,
        extracted_edges_valid: e.edges_valid,
        routing_groups: e.groups.len() as u64,
        routing_pass: e.groups.iter().all(|g| g.verified),
        sequences: seqs,
        distinct_sequences: c.alternating.iter().map(|a| a.distinct_sequences as u64).sum(),
        sequences_with_violation: c
            .alternating
            .iter()
            .flat_map(|a| &a.sequences)
            .filter(|s| s.violated_h_edge.is_some())
            .count() as u64,
        alternating_pass: c.alternating.iter().all(|a| a.pass()),
        pass: c.all_pass(),
    }
}

/// Runs the lemma pipeline on every function; functions already monotone
/// are skipped, since every check is vacuous for them.
pub fn lemma_sweep(set: &FunctionSet) -> Result<Vec<LemmaRow>> {
    Ok(lemma_checks(set)?
        .into_iter()
        .map(|(id, c)| lemma_row(id, &c))
        .collect())
}

fn lemma_checks(set: &FunctionSet) -> Result<Vec<(String, LemmaCheck)>> {
    set.validate()?;
    let out: Vec<Option<(String, LemmaCheck)>> = (0..set.len())
        .into_par_iter()
        .map(|k| {
            let (id, f) = set.get(k)?;
            if crate::boolfn::is_monotone_exact(&f) {
                return Ok(None);
            }
            Ok(Some((id, check_lemmas(&f)?)))
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingRow {
    pub id: String,
    pub n: u32,
    pub lower_level: u32,
    pub upper_level: u32,
    pub requested: u64,
    pub found: u64,
    pub verified: bool,
}

impl SweepRow for RoutingRow {
    fn pass(&self) -> bool {
        self.verified && self.found == self.requested
    }
}

/// Routing instances harvested from the extraction step of the lemma
/// pipeline, each re-verified independently.
pub fn routing_sweep(set: &FunctionSet) -> Result<Vec<RoutingRow>> {
    let mut rows = Vec::new();
    for (id, c) in lemma_checks(set)? {
        for g in &c.extraction.groups {
            rows.push(RoutingRow {
                id: id.clone(),
                n: g.instance.n,
                lower_level: g.instance.lower_level,
                upper_level: g.instance.upper_level,
                requested: g.instance.pairs.len() as u64,
                found: g.paths.len() as u64,
                verified: verify_paths(&g.instance, &g.paths),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairProbRow {
    /// Lower point as a coordinate string, or `*` for the normalization row.
    pub x: String,
    pub y: String,
    pub lower_level: u32,
    pub upper_level: u32,
    pub prob: String,
    pub prob_approx: f64,
    pub observed: u64,
    pub draws: u64,
    /// Standardized deviation of the observed frequency.
    pub z: f64,
    pub pass: bool,
}

impl SweepRow for PairProbRow {
    fn pass(&self) -> bool {
        self.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairProbSpec {
    pub n: u32,
    pub eps: f64,
    pub sigma: f64,
    pub draws: u64,
    pub seed: u64,
    /// Outcomes below this probability are not compared.
    pub min_prob: f64,
    /// Allowed standardized deviation.
    pub z_limit: f64,
}

/// Dimension limit for the outcome-by-outcome comparison.
pub const PAIRPROB_MAX_DIM: u32 = 12;

const PAIRPROB_CHUNK: u64 = 100_000;

/// Compares sampled path-tester outcomes with the exact pair probability.
/// The last row checks that all outcome probabilities sum to exactly 1.
pub fn pairprob_sweep(spec: &PairProbSpec) -> Result<Vec<PairProbRow>> {
    let n = spec.n;
    if n == 0 || n > PAIRPROB_MAX_DIM {
        return Err(Error::Dimension {
            n,
            max: PAIRPROB_MAX_DIM,
        });
    }
    let params = make_params(n, spec.eps, spec.sigma)?;
    let size = 1usize << n;
    let chunks = spec.draws.div_ceil(PAIRPROB_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trial_rng(spec.seed, c);
            let todo = PAIRPROB_CHUNK.min(spec.draws - c * PAIRPROB_CHUNK);
            let mut counts = vec![0u32; size * size];
            for _ in 0..todo {
                if let Some((a, b)) = draw_pair(&params, &mut rng) {
                    let (lo, hi) = if level(a) <= level(b) { (a, b) } else { (b, a) };
                    counts[lo as usize * size + hi as usize] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u32; size * size],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let nplus1 = n + 1;
    let mut level_prob = vec![BigRational::zero(); (nplus1 * nplus1) as usize];
    for a in 0..=n {
        for b in a..=n {
            level_prob[(a * nplus1 + b) as usize] = level_pair_prob(a, b, &params)?;
        }
    }
    let mask = full_mask(n);
    let mut rows = Vec::new();
    let mut total = BigRational::zero();
    let bits = |v: u32| crate::hypercube::Point::new(v, n).map(|p| p.to_bit_string());
    let draws = spec.draws as f64;
    for x in 0..=mask {
        let comp = !x & mask;
        let mut sub = comp;
        loop {
            let y = x | sub;
            let (a, b) = (level(x), level(y));
            let p = &level_prob[(a * nplus1 + b) as usize];
            if !p.is_zero() {
                total += p;
                let pf = to_f64(p);
                if pf >= spec.min_prob {
                    let observed = u64::from(counts[x as usize * size + y as usize]);
                    let se = (pf * (1.0 - pf) / draws).sqrt();
                    let z = if se > 0.0 {
                        (observed as f64 / draws - pf) / se
                    } else {
                        0.0
                    };
                    rows.push(PairProbRow {
                        x: bits(x)?,
                        y: bits(y)?,
                        lower_level: a,
                        upper_level: b,
                        prob: to_pq(p),
                        prob_approx: pf,
                        observed,
                        draws: spec.draws,
                        z,
                        pass: z.abs() <= spec.z_limit,
                    });
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & comp;
        }
    }
    rows.push(PairProbRow {
        x: "*".into(),
        y: "*".into(),
        lower_level: params.i_lo,
        upper_level: params.i_hi,
        prob: to_pq(&total),
        prob_approx: to_f64(&total),
        observed: spec.draws,
        draws: spec.draws,
        z: 0.0,
        pass: total.is_one(),
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlueRow {
    pub instance: u64,
    pub seed: u64,
    pub n: u32,
    pub eps: f64,
    pub sigma: f64,
    pub blue_count: u64,
    pub prob: String,
    pub prob_approx: f64,
    pub fraction: String,
    pub bound_a: String,
    pub bound_a_approx: f64,
    pub pass_a: bool,
    pub bound_b: Option<String>,
    pub pass_b: Option<bool>,
    pub pass: bool,
}

impl SweepRow for BlueRow {
    fn pass(&self) -> bool {
        self.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlueSweepSpec {
    pub n: u32,
    pub eps: f64,
    pub sigmas: Vec<f64>,
    /// Random blue sets per sigma.
    pub instances: u64,
    pub seed: u64,
}

pub fn blue_sweep(spec: &BlueSweepSpec) -> Result<Vec<BlueRow>> {
    let mut jobs = Vec::new();
    for &sigma in &spec.sigmas {
        let params = make_params(spec.n, spec.eps, sigma)?;
        for k in 0..spec.instances {
            jobs.push((params.clone(), jobs.len() as u64, k));
        }
    }
    jobs.into_par_iter()
        .map(|(params, idx, _)| {
            let seed = derive_seed(spec.seed, idx);
            let inst = random_blue_instance(&params, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let r = check_blue_chain(&inst)?;
            Ok(BlueRow {
                instance: idx,
                seed,
                n: r.n,
                eps: r.eps,
                sigma: r.sigma,
                blue_count: r.blue_count,
                prob: to_pq(&r.prob.0),
                prob_approx: to_f64(&r.prob.0),
                fraction: to_pq(&r.fraction.0),
                bound_a: to_pq(&r.bound_a.0),
                bound_a_approx: to_f64(&r.bound_a.0),
                pass_a: r.pass_a,
                bound_b: r.bound_b.as_ref().map(|b| to_pq(&b.0)),
                pass_b: r.pass_b,
                pass: r.pass(),
            })
        })
        .collect()
}

/// Which sweep to run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExperimentSpec {
    Dichotomy { set: FunctionSet },
    Lemmas { set: FunctionSet },
    Routing { set: FunctionSet },
    PairProb(PairProbSpec),
    Blue(BlueSweepSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Format(format!("unknown output format '{s}'"))),
        }
    }
}

/// Rows of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutput {
    Dichotomy(Vec<DichotomyRow>),
    Lemmas(Vec<LemmaRow>),
    Routing(Vec<RoutingRow>),
    PairProb(Vec<PairProbRow>),
    Blue(Vec<BlueRow>),
}

fn write_rows<R: SweepRow, W: Write>(rows: &[R], format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn count_failures<R: SweepRow>(rows: &[R]) -> usize {
    rows.iter().filter(|r| !r.pass()).count()
}

impl SweepOutput {
    pub fn len(&self) -> usize {
        match self {
            SweepOutput::Dichotomy(r) => r.len(),
            SweepOutput::Lemmas(r) => r.len(),
            SweepOutput::Routing(r) => r.len(),
            SweepOutput::PairProb(r) => r.len(),
            SweepOutput::Blue(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn failures(&self) -> usize {
        match self {
            SweepOutput::Dichotomy(r) => count_failures(r),
            SweepOutput::Lemmas(r) => count_failures(r),
            SweepOutput::Routing(r) => count_failures(r),
            SweepOutput::PairProb(r) => count_failures(r),
            SweepOutput::Blue(r) => count_failures(r),
        }
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match self {
            SweepOutput::Dichotomy(r) => write_rows(r, format, out),
            SweepOutput::Lemmas(r) => write_rows(r, format, out),
            SweepOutput::Routing(r) => write_rows(r, format, out),
            SweepOutput::PairProb(r) => write_rows(r, format, out),
            SweepOutput::Blue(r) => write_rows(r, format, out),
        }
    }

    pub fn to_bytes(&self, format: Format) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(format, &mut buf)?;
        Ok(buf)
    }
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    Ok(match spec {
        ExperimentSpec::Dichotomy { set } => SweepOutput::Dichotomy(dichotomy_sweep(set)?),
        ExperimentSpec::Lemmas { set } => SweepOutput::Lemmas(lemma_sweep(set)?),
        ExperimentSpec::Routing { set } => SweepOutput::Routing(routing_sweep(set)?),
        ExperimentSpec::PairProb(p) => SweepOutput::PairProb(pairprob_sweep(p)?),
        ExperimentSpec::Blue(b) => SweepOutput::Blue(blue_sweep(b)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{anti_dictator, anti_majority, dictator};

    #[test]
    fn seeds_are_fixed() {
        // frozen values; changing the derivation breaks reproducibility
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (a, b) = wilson_interval(500, 1000, 1.96);
        assert!(b - a < hi - lo);
    }

    #[test]
    fn estimate_examples() {
        let mono = dictator(3, 0).unwrap();
        let spec = EstimateSpec {
            tester: TesterKind::Edge,
            eps: 0.5,
            sigma: 0.5,
            budget_constant: 1.0,
            avg_sensitivity: None,
            trials: 1000,
            seed: 1,
        };
        let r = estimate_rejection(&mono, &spec).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.ci_low, 0.0);
        assert!(r.ci_high > 0.0);

        let f = anti_dictator(3, 0).unwrap();
        let spec = EstimateSpec {
            trials: 100_000,
            ..spec
        };
        let r = estimate_rejection(&f, &spec).unwrap();
        assert!(r.ci_low <= 1.0 / 3.0 && 1.0 / 3.0 <= r.ci_high, "{r:?}");

        let g = anti_majority(2).unwrap();
        let exact = to_f64(&exact_path_rejection(&g, 0.5, 0.25).unwrap());
        let spec = EstimateSpec {
            tester: TesterKind::Path,
            sigma: 0.25,
            ..spec
        };
        let r = estimate_rejection(&g, &spec).unwrap();
        let se = (exact * (1.0 - exact) / r.trials as f64).sqrt();
        assert!((r.estimate - exact).abs() <= 4.0 * se);
    }

    #[test]
    fn zero_trials_rejected() {
        let f = dictator(3, 0).unwrap();
        let spec = EstimateSpec {
            tester: TesterKind::Edge,
            eps: 0.5,
            sigma: 0.5,
            budget_constant: 1.0,
            avg_sensitivity: None,
            trials: 0,
            seed: 1,
        };
        assert!(estimate_rejection(&f, &spec).is_err());
    }

    #[test]
    fn small_sweeps_pass_and_repeat() {
        let set = FunctionSet::Mixed { n: 5, count: 20, seed: 3 };
        for spec in [
            ExperimentSpec::Dichotomy { set: set.clone() },
            ExperimentSpec::Lemmas { set: set.clone() },
            ExperimentSpec::Routing { set },
            ExperimentSpec::Blue(BlueSweepSpec {
                n: 8,
                eps: 0.25,
                sigmas: vec![0.1],
                instances: 5,
                seed: 4,
            }),
            ExperimentSpec::PairProb(PairProbSpec {
                n: 4,
                eps: 0.5,
                sigma: 0.5,
                draws: 200_000,
                seed: 5,
                min_prob: 1e-4,
                z_limit: 4.0,
            }),
        ] {
            let a = run_sweep(&spec).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a.failures(), 0, "{spec:?}");
            let b = run_sweep(&spec).unwrap();
            for fmt in [Format::Csv, Format::Json] {
                assert_eq!(a.to_bytes(fmt).unwrap(), b.to_bytes(fmt).unwrap());
            }
        }
    }

    #[test]
    fn exhaustive_n2_dichotomy() {
        let rows = dichotomy_sweep(&FunctionSet::Exhaustive { n: 2 }).unwrap();
        assert_eq!(rows.len(), 16);
        assert!(rows.iter().all(SweepRow::pass));
        let csv = SweepOutput::Dichotomy(rows).to_bytes(Format::Csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("id,n,eps_f,"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 17);
    }
}
