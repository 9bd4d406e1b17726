//! Non-adaptive one-sided testers: edge, path, and their combinations.
//!
//! Every tester consumes randomness in a fixed order that never depends on
//! query answers, so replaying a seed against two functions yields the same
//! query sequence up to the first rejection.

use rand::Rng;
use serde::Serialize;

use crate::boolfn::QueryOracle;
use crate::error::{Error, Result};
use crate::hypercube::{draw_pair, level, make_params, Point, TesterParams, MAX_DIM};

/// Default multiplier on the asymptotic repetition counts.
pub const DEFAULT_BUDGET_CONSTANT: f64 = 200.0;

/// A violating pair as observed by a tester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub lower: Point,
    pub upper: Point,
    pub f_lower: bool,
    pub f_upper: bool,
}

impl Witness {
    /// Re-checks the pair against a fresh evaluation of the function.
    pub fn reverify(&self, oracle: &mut QueryOracle<'_>) -> Result<bool> {
        Ok(self.lower.precedes(self.upper)
            && self.lower != self.upper
            && oracle.evaluate(self.lower)?
            && !oracle.evaluate(self.upper)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub rejected: bool,
    pub witness: Option<Witness>,
    pub queries_used: u64,
}

impl Verdict {
    fn accept(queries_used: u64) -> Self {
        Verdict {
            rejected: false,
            witness: None,
            queries_used,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TesterMode {
    Combined,
    EdgeOnly,
    Sensitivity,
    PathOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TesterConfig {
    pub mode: TesterMode,
    pub eps: f64,
    /// `None` when no path draw can happen.
    pub sigma: Option<f64>,
    pub repetitions: u64,
    pub budget_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TesterRun {
    pub config: TesterConfig,
    pub verdict: Verdict,
    /// Rounds actually executed (early exit on the first violation).
    pub rounds: u64,
    pub edge_rounds: u64,
    pub path_rounds: u64,
}

/// Decides a queried pair `lower ≺ upper`.
fn judge(oracle: &mut QueryOracle<'_>, lower: u32, upper: u32) -> Verdict {
    let n = oracle.dim();
    let f_lower = oracle.query(lower);
    if lower == upper {
        return Verdict::accept(1);
    }
    let f_upper = oracle.query(upper);
    if f_lower && !f_upper {
        Verdict {
            rejected: true,
            witness: Some(Witness {
                lower: Point::from_raw(lower, n),
                upper: Point::from_raw(upper, n),
                f_lower,
                f_upper,
            }),
            queries_used: 2,
        }
    } else {
        Verdict::accept(2)
    }
}

fn check_oracle(oracle: &QueryOracle<'_>) -> Result<()> {
    let n = oracle.dim();
    if n == 0 || n > MAX_DIM {
        return Err(Error::Dimension { n, max: MAX_DIM });
    }
    Ok(())
}

fn edge_draw<R: Rng + ?Sized>(oracle: &mut QueryOracle<'_>, rng: &mut R) -> Verdict {
    let n = oracle.dim();
    let i = rng.gen_range(0..n);
    let x = rng.gen_range(0..1u32 << (n - 1));
    // insert a zero at position i
    let low = x & ((1u32 << i) - 1);
    let x = ((x >> i) << (i + 1)) | low;
    judge(oracle, x, x | 1 << i)
}

fn path_draw<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    params: &TesterParams,
    rng: &mut R,
) -> Verdict {
    match draw_pair(params, rng) {
        None => Verdict::accept(0),
        Some((a, b)) => {
            let (lo, hi) = if level(a) <= level(b) { (a, b) } else { (b, a) };
            judge(oracle, lo, hi)
        }
    }
}

/// One draw of the edge tester: a uniform hypercube edge, rejected iff
/// violated. Rejection probability is `Φ⁺ / n`.
pub fn edge_test_once<R: Rng + ?Sized>(oracle: &mut QueryOracle<'_>, rng: &mut R) -> Result<Verdict> {
    check_oracle(oracle)?;
    Ok(edge_draw(oracle, rng))
}

/// One draw of the path tester under `params`.
pub fn path_test_once<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    params: &TesterParams,
    rng: &mut R,
) -> Result<Verdict> {
    check_oracle(oracle)?;
    if params.n != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: params.n,
        });
    }
    Ok(path_draw(oracle, params, rng))
}

/// One round of the combined tester: a fair coin (`true` = edge), then the
/// chosen draw.
pub fn combined_round<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    params: &TesterParams,
    rng: &mut R,
) -> Result<Verdict> {
    check_oracle(oracle)?;
    if rng.gen::<bool>() {
        Ok(edge_draw(oracle, rng))
    } else {
        path_test_once(oracle, params, rng)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 0.5 {
        Ok(())
    } else {
        Err(Error::Epsilon(eps))
    }
}

fn rounds(x: f64) -> Result<u64> {
    if !(x.is_finite() && (0.0..1e15).contains(&x)) {
        return Err(Error::InvalidParameter(format!(
            "repetition count {x} is not representable"
        )));
    }
    Ok(x.ceil() as u64)
}

fn check_budget(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("budget constant {c}")))
    }
}

/// `σ` used by the combined tester at dimension `n`.
pub fn combined_sigma(n: u32, eps: f64) -> f64 {
    (n as f64).powf(-0.125) * eps.sqrt() / 32.0
}

/// True when the combined tester falls back to the edge tester alone.
pub fn uses_edge_only(n: u32, eps: f64) -> bool {
    eps < (n as f64).powf(-0.25)
}

/// Parameters of the path draws inside the combined tester.
pub fn combined_params(n: u32, eps: f64) -> Result<TesterParams> {
    make_params(n, eps, combined_sigma(n, eps))
}

struct Loop {
    verdict: Verdict,
    rounds: u64,
    edge_rounds: u64,
    path_rounds: u64,
}

fn run_loop<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    repetitions: u64,
    rng: &mut R,
    mut step: impl FnMut(&mut QueryOracle<'_>, &mut R) -> (Verdict, bool),
) -> Loop {
    let mut out = Loop {
        verdict: Verdict::accept(0),
        rounds: 0,
        edge_rounds: 0,
        path_rounds: 0,
    };
    for _ in 0..repetitions {
        let (v, was_edge) = step(oracle, rng);
        out.rounds += 1;
        if was_edge {
            out.edge_rounds += 1;
        } else {
            out.path_rounds += 1;
        }
        out.verdict.queries_used += v.queries_used;
        if v.rejected {
            out.verdict.rejected = true;
            out.verdict.witness = v.witness;
            break;
        }
    }
    out
}

fn finish(config: TesterConfig, l: Loop) -> TesterRun {
    TesterRun {
        config,
        verdict: l.verdict,
        rounds: l.rounds,
        edge_rounds: l.edge_rounds,
        path_rounds: l.path_rounds,
    }
}

/// The combined tester. Below `eps = n^{-1/4}` only edge draws are made,
/// `⌈c·n/eps⌉` of them; otherwise `⌈c·n^{7/8}·eps^{-3/2}·ln(1/eps)⌉` rounds
/// each pick edge or path by a fair coin.
pub fn combined_test<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    eps: f64,
    budget_constant: f64,
    rng: &mut R,
) -> Result<TesterRun> {
    check_oracle(oracle)?;
    check_eps(eps)?;
    check_budget(budget_constant)?;
    let n = oracle.dim();
    let nf = n as f64;
    if uses_edge_only(n, eps) {
        let repetitions = rounds(budget_constant * nf / eps)?;
        let l = run_loop(oracle, repetitions, rng, |o, r| (edge_draw(o, r), true));
        let config = TesterConfig {
            mode: TesterMode::EdgeOnly,
            eps,
            sigma: None,
            repetitions,
            budget_constant,
        };
        return Ok(finish(config, l));
    }
    let params = combined_params(n, eps)?;
    let repetitions =
        rounds(budget_constant * nf.powf(0.875) * eps.powf(-1.5) * (1.0 / eps).ln())?;
    let l = run_loop(oracle, repetitions, rng, |o, r| {
        if r.gen::<bool>() {
            (edge_draw(o, r), true)
        } else {
            (path_draw(o, &params, r), false)
        }
    });
    let config = TesterConfig {
        mode: TesterMode::Combined,
        eps,
        sigma: Some(params.sigma),
        repetitions,
        budget_constant,
    };
    Ok(finish(config, l))
}

/// Path tester alone with `σ = eps² / (32·I)`, capped at 1, for
/// `⌈c·√n·eps^{-6}·I³·ln(1/eps)⌉` rounds.
pub fn sensitivity_test<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    eps: f64,
    avg_sensitivity: f64,
    budget_constant: f64,
    rng: &mut R,
) -> Result<TesterRun> {
    check_oracle(oracle)?;
    check_eps(eps)?;
    check_budget(budget_constant)?;
    if !(avg_sensitivity > 0.0 && avg_sensitivity.is_finite()) {
        return Err(Error::Sensitivity(avg_sensitivity));
    }
    let n = oracle.dim();
    let sigma = (eps * eps / (32.0 * avg_sensitivity)).min(1.0);
    let params = make_params(n, eps, sigma)?;
    let repetitions = rounds(
        budget_constant
            * (n as f64).sqrt()
            * eps.powi(-6)
            * avg_sensitivity.powi(3)
            * (1.0 / eps).ln(),
    )?;
    let l = run_loop(oracle, repetitions, rng, |o, r| (path_draw(o, &params, r), false));
    let config = TesterConfig {
        mode: TesterMode::Sensitivity,
        eps,
        sigma: Some(sigma),
        repetitions,
        budget_constant,
    };
    Ok(finish(config, l))
}

/// Path tester alone for an explicit number of rounds. No rejection-rate
/// guarantee is claimed for this mode.
pub fn path_only_test<R: Rng + ?Sized>(
    oracle: &mut QueryOracle<'_>,
    params: &TesterParams,
    repetitions: u64,
    rng: &mut R,
) -> Result<TesterRun> {
    check_oracle(oracle)?;
    if params.n != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: params.n,
        });
    }
    let l = run_loop(oracle, repetitions, rng, |o, r| (path_draw(o, params, r), false));
    let config = TesterConfig {
        mode: TesterMode::PathOnly,
        eps: params.eps,
        sigma: Some(params.sigma),
        repetitions,
        budget_constant: f64::NAN,
    };
    Ok(finish(config, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{
        anti_dictator, anti_majority, constant, dictator, majority, random_function,
        random_monotone, TruthTable,
    };
    use crate::hypercube::pair_prob;
    use crate::metrics::phi_plus;
    use crate::rational::to_f64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn within_4se(hits: u64, draws: u64, p: f64) -> bool {
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        ((hits as f64 / draws as f64) - p).abs() <= 4.0 * se + 1e-12
    }

    #[test]
    fn edge_tester_rate_matches_exact() {
        let f = anti_dictator(3, 0).unwrap();
        let p = to_f64(&phi_plus(&f)) / 3.0;
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
        let mut o = QueryOracle::new(&f);
        let mut r = rng(1);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| edge_test_once(&mut o, &mut r).unwrap().rejected)
            .count() as u64;
        assert!(within_4se(hits, draws, p), "{hits}");
    }

    #[test]
    fn edge_draw_is_uniform_over_edges() {
        // 12 edges at n = 3
        let f = constant(3, true).unwrap();
        let mut o = QueryOracle::with_log(&f);
        let mut r = rng(2);
        let draws = 120_000u64;
        for _ in 0..draws {
            edge_test_once(&mut o, &mut r).unwrap();
        }
        let log = o.query_log().unwrap();
        let mut counts = std::collections::HashMap::new();
        for q in log.chunks(2) {
            assert_eq!((q[0] ^ q[1]).count_ones(), 1);
            assert!(q[0] < q[1]);
            *counts.entry((q[0], q[1])).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 12);
        for &c in counts.values() {
            assert!(within_4se(c, draws, 1.0 / 12.0));
        }
    }

    #[test]
    fn monotone_never_rejected() {
        for f in [constant(4, false).unwrap(), dictator(4, 2).unwrap(), majority(5).unwrap()] {
            let mut o = QueryOracle::new(&f);
            let run = combined_test(&mut o, 0.5, 5.0, &mut rng(3)).unwrap();
            assert!(!run.verdict.rejected);
            let p = make_params(f.dim(), 0.5, 0.5).unwrap();
            let run = path_only_test(&mut o, &p, 2000, &mut rng(4)).unwrap();
            assert!(!run.verdict.rejected);
        }
    }

    #[test]
    fn path_rate_matches_pair_sum() {
        let f = anti_majority(2).unwrap();
        let params = make_params(2, 0.5, 0.25).unwrap();
        let mut exact = 0.0;
        for x in 0..4u32 {
            for y in 0..4u32 {
                if x != y && x & !y == 0 && f.get(x) && !f.get(y) {
                    let (px, py) = (Point::new(x, 2).unwrap(), Point::new(y, 2).unwrap());
                    exact += pair_prob(px, py, &params).unwrap().prob.to_f64();
                }
            }
        }
        let mut o = QueryOracle::new(&f);
        let mut r = rng(5);
        let draws = 200_000u64;
        let hits = (0..draws)
            .filter(|_| path_test_once(&mut o, &params, &mut r).unwrap().rejected)
            .count() as u64;
        assert!(exact > 0.0);
        assert!(within_4se(hits, draws, exact), "{hits} vs {exact}");
    }

    #[test]
    fn witnesses_reverify() {
        for seed in 0..20 {
            let f = random_function(6, seed).unwrap();
            let mut o = QueryOracle::new(&f);
            let run = combined_test(&mut o, 0.3, 2.0, &mut rng(seed)).unwrap();
            if let Some(w) = run.verdict.witness {
                assert!(run.verdict.rejected);
                assert!(w.reverify(&mut QueryOracle::new(&f)).unwrap());
            } else {
                assert!(!run.verdict.rejected);
            }
            assert!(run.verdict.queries_used <= 2 * run.config.repetitions);
            assert_eq!(run.rounds, run.edge_rounds + run.path_rounds);
        }
    }

    #[test]
    fn query_sequence_is_oblivious() {
        // Both functions are monotone so neither run exits early.
        let f = dictator(8, 3).unwrap();
        let g = random_monotone(8, 9).unwrap();
        let params = make_params(8, 0.5, 0.5).unwrap();
        let log_of = |t: &TruthTable| {
            let mut o = QueryOracle::with_log(t);
            let mut r = rng(11);
            for _ in 0..500 {
                combined_round(&mut o, &params, &mut r).unwrap();
            }
            o.query_log().unwrap().to_vec()
        };
        assert_eq!(log_of(&f), log_of(&g));
    }

    #[test]
    fn combined_mode_switch() {
        assert!(uses_edge_only(16, 0.4));
        assert!(!uses_edge_only(16, 0.5));
        let f = anti_dictator(16, 0).unwrap();
        let mut o = QueryOracle::new(&f);
        let run = combined_test(&mut o, 0.4, 1.0, &mut rng(0)).unwrap();
        assert_eq!(run.config.mode, TesterMode::EdgeOnly);
        assert_eq!(run.config.repetitions, 40);
        let run = combined_test(&mut o, 0.5, 1.0, &mut rng(0)).unwrap();
        assert_eq!(run.config.mode, TesterMode::Combined);
        let expected = (16f64.powf(0.875) * 0.5f64.powf(-1.5) * 2f64.ln()).ceil() as u64;
        assert_eq!(run.config.repetitions, expected);
    }

    #[test]
    fn anti_dictator_rejected_by_combined() {
        let f = anti_dictator(16, 0).unwrap();
        let rejections = (0..100)
            .filter(|&s| {
                let mut o = QueryOracle::new(&f);
                combined_test(&mut o, 0.5, 200.0, &mut rng(s)).unwrap().verdict.rejected
            })
            .count();
        assert!(rejections >= 95);
    }

    #[test]
    fn sensitivity_tester_examples() {
        let f = anti_dictator(16, 0).unwrap();
        let mut o = QueryOracle::new(&f);
        let run = sensitivity_test(&mut o, 0.5, 1.0, 1.0, &mut rng(0)).unwrap();
        assert_eq!(run.config.sigma, Some(1.0 / 128.0));
        let rejections = (0..100)
            .filter(|&s| {
                let mut o = QueryOracle::new(&f);
                sensitivity_test(&mut o, 0.5, 1.0, 500.0, &mut rng(s))
                    .unwrap()
                    .verdict
                    .rejected
            })
            .count();
        assert!(rejections >= 95, "{rejections}");
        let c = constant(6, true).unwrap();
        let mut o = QueryOracle::new(&c);
        assert!(matches!(
            sensitivity_test(&mut o, 0.5, 0.0, 1.0, &mut rng(0)),
            Err(Error::Sensitivity(_))
        ));
    }

    #[test]
    fn bad_eps_rejected() {
        let f = anti_dictator(4, 0).unwrap();
        let mut o = QueryOracle::new(&f);
        assert!(matches!(combined_test(&mut o, 0.6, 1.0, &mut rng(0)), Err(Error::Epsilon(_))));
        assert!(matches!(combined_test(&mut o, 0.0, 1.0, &mut rng(0)), Err(Error::Epsilon(_))));
    }
}
