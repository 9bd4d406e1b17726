//! Blue-blue correlation: the chance that one path-tester draw lands on two
//! points of a fixed set of middle-layer points, computed exactly and
//! compared against the chain of lower bounds used in the tester analysis.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypercube::{draw_pair, full_mask, level, level_pair_prob, TesterParams};
use crate::rational::{int, ratio, rational_above, rational_below, Exact};

/// Dimension limit for exact blue-pair counting (3^n submask walk).
pub const BLUE_EXACT_MAX_DIM: u32 = 12;
/// Dimension limit for the closed-form blue fraction.
pub const BLUE_FRACTION_MAX_DIM: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BlueInstance {
    params: TesterParams,
    /// Sorted, distinct.
    blue: Vec<u32>,
}

impl BlueInstance {
    /// Every blue point must lie on a middle layer of `params`.
    pub fn new(params: TesterParams, mut blue: Vec<u32>) -> Result<Self> {
        let n = params.n;
        if n > BLUE_FRACTION_MAX_DIM {
            return Err(Error::Dimension {
                n,
                max: BLUE_FRACTION_MAX_DIM,
            });
        }
        blue.sort_unstable();
        blue.dedup();
        if let Some(&x) = blue.iter().find(|&&x| x > full_mask(n)) {
            return Err(Error::InvalidBlueInstance(format!("point {x:#b} out of range")));
        }
        if let Some(&x) = blue.iter().find(|&&x| !params.in_window(level(x))) {
            return Err(Error::InvalidBlueInstance(format!(
                "point {x:#b} outside the middle layers"
            )));
        }
        Ok(BlueInstance { params, blue })
    }

    pub fn params(&self) -> &TesterParams {
        &self.params
    }

    pub fn blue(&self) -> &[u32] {
        &self.blue
    }

    pub fn dim(&self) -> u32 {
        self.params.n
    }

    /// `|blue| / 2^n`.
    pub fn sigma_actual(&self) -> BigRational {
        ratio(self.blue.len() as u64, 1u64 << self.dim())
    }

    pub fn layer_counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.dim() as usize + 1];
        for &x in &self.blue {
            c[level(x) as usize] += 1;
        }
        c
    }

    fn membership(&self) -> Vec<bool> {
        let mut m = vec![false; 1usize << self.dim()];
        for &x in &self.blue {
            m[x as usize] = true;
        }
        m
    }
}

/// `ceil(sigma · 2^n)` distinct points drawn uniformly from the middle layers.
pub fn random_blue_instance<R: Rng + ?Sized>(
    params: &TesterParams,
    rng: &mut R,
) -> Result<BlueInstance> {
    let n = params.n;
    if n > BLUE_FRACTION_MAX_DIM {
        return Err(Error::Dimension {
            n,
            max: BLUE_FRACTION_MAX_DIM,
        });
    }
    let middle: Vec<u32> = (0..=full_mask(n))
        .filter(|&x| params.in_window(level(x)))
        .collect();
    let want = (params.sigma * (1u64 << n) as f64).ceil() as usize;
    if want > middle.len() {
        return Err(Error::InvalidBlueInstance(format!(
            "need {want} blue points but the middle layers hold {}",
            middle.len()
        )));
    }
    let blue = sample(rng, middle.len(), want)
        .into_iter()
        .map(|k| middle[k])
        .collect();
    BlueInstance::new(params.clone(), blue)
}

/// `ceil(sigma · 2^n)` points filling the middle layers one at a time,
/// starting at `start_level` and moving outward.
pub fn concentrated_blue_instance(params: &TesterParams, start_level: u32) -> Result<BlueInstance> {
    let n = params.n;
    if n > BLUE_FRACTION_MAX_DIM {
        return Err(Error::Dimension {
            n,
            max: BLUE_FRACTION_MAX_DIM,
        });
    }
    let want = (params.sigma * (1u64 << n) as f64).ceil() as usize;
    let mut levels: Vec<u32> = (params.i_lo..=params.i_hi).collect();
    levels.sort_by_key(|&l| (l.abs_diff(start_level), l));
    let mut blue = Vec::with_capacity(want);
    'outer: for l in levels {
        for x in 0..=full_mask(n) {
            if blue.len() == want {
                break 'outer;
            }
            if level(x) == l {
                blue.push(x);
            }
        }
    }
    if blue.len() < want {
        return Err(Error::InvalidBlueInstance("middle layers too small".into()));
    }
    BlueInstance::new(params.clone(), blue)
}

/// `pairs[a][b]` = comparable blue pairs `x ≺ y`, `x ≠ y`, with levels `a < b`.
fn comparable_blue_counts(inst: &BlueInstance) -> Vec<Vec<u64>> {
    let n = inst.dim();
    let mask = full_mask(n);
    let member = inst.membership();
    let mut counts = vec![vec![0u64; n as usize + 1]; n as usize + 1];
    let hi = inst.params.i_hi;
    for &x in &inst.blue {
        let a = level(x);
        let comp = !x & mask;
        let mut sub = comp;
        while sub != 0 {
            let y = x | sub;
            let b = a + sub.count_ones();
            if b <= hi && member[y as usize] {
                counts[a as usize][b as usize] += 1;
            }
            sub = (sub - 1) & comp;
        }
    }
    counts
}

/// Exact probability that one path-tester draw returns two blue points
/// (the same point twice counts when the gap allows it).
pub fn exact_blue_prob(inst: &BlueInstance) -> Result<BigRational> {
    let n = inst.dim();
    if n > BLUE_EXACT_MAX_DIM {
        return Err(Error::Dimension {
            n,
            max: BLUE_EXACT_MAX_DIM,
        });
    }
    let p = &inst.params;
    let counts = comparable_blue_counts(inst);
    let mut total = BigRational::zero();
    for a in p.i_lo..=p.i_hi {
        for b in a + 1..=p.i_hi {
            let c = counts[a as usize][b as usize];
            if c > 0 {
                total += level_pair_prob(a, b, p)? * int(c);
            }
        }
    }
    if p.min_gap() == 0 {
        for (a, &c) in inst.layer_counts().iter().enumerate() {
            if c > 0 {
                total += level_pair_prob(a as u32, a as u32, p)? * int(c);
            }
        }
    }
    Ok(total)
}

fn binomial(n: u32, k: u32) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// Expected blue fraction of the middle vertices of a random path:
/// the average over middle layers of `blue on layer / layer size`.
pub fn expected_blue_fraction(inst: &BlueInstance) -> BigRational {
    let p = &inst.params;
    let counts = inst.layer_counts();
    let sum = (p.i_lo..=p.i_hi).fold(BigRational::zero(), |acc, i| {
        acc + BigRational::new(counts[i as usize].into(), binomial(p.n, i).into())
    });
    sum / int(p.window_len())
}

/// Monte Carlo estimate of the blue-pair probability.
pub fn sample_blue_prob<R: Rng + ?Sized>(inst: &BlueInstance, draws: u64, rng: &mut R) -> u64 {
    let member = inst.membership();
    (0..draws)
        .filter(|_| {
            draw_pair(&inst.params, rng)
                .is_some_and(|(x, y)| member[x as usize] && member[y as usize])
        })
        .count() as u64
}

/// Monte Carlo estimate of the blue fraction of a path's middle vertices.
pub fn sample_blue_fraction<R: Rng + ?Sized>(inst: &BlueInstance, draws: u64, rng: &mut R) -> f64 {
    let member = inst.membership();
    let p = &inst.params;
    let n = p.n;
    let mut acc = 0u64;
    let mut order: Vec<u32> = (0..n).collect();
    for _ in 0..draws {
        use rand::seq::SliceRandom;
        order.shuffle(rng);
        let mut x = 0u32;
        for k in 0..=n {
            if k > 0 {
                x |= 1 << order[k as usize - 1];
            }
            if p.in_window(k) && member[x as usize] {
                acc += 1;
            }
        }
    }
    acc as f64 / (draws as f64 * p.window_len() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlueChainReport {
    pub n: u32,
    pub eps: f64,
    pub sigma: f64,
    pub blue_count: u64,
    pub prob: Exact,
    /// Expected blue fraction `E`.
    pub fraction: Exact,
    /// Conservative rational lower bound on `μ = σ / (16 C_ε)`.
    pub mu: Exact,
    /// `E·(E − μ)`.
    pub bound_a: Exact,
    pub pass_a: bool,
    /// `σ·√n / |X_p|` with `√n` rounded up; absent when some middle layer
    /// is larger than `2^n/√n`.
    pub bound_b: Option<Exact>,
    pub pass_b: Option<bool>,
}

impl BlueChainReport {
    pub fn pass(&self) -> bool {
        self.pass_a && self.pass_b.unwrap_or(true)
    }
}

/// Checks `Pr ≥ E(E − μ)` and, where every middle layer has at most
/// `2^n/√n` points, `E ≥ σ√n/|X_p|`. Irrational constants are replaced by
/// rationals that make each comparison stricter.
pub fn check_blue_chain(inst: &BlueInstance) -> Result<BlueChainReport> {
    let p = &inst.params;
    let n = p.n;
    let sigma_nominal = BigRational::from_float(p.sigma)
        .ok_or(Error::Sigma(p.sigma))?;
    if inst.sigma_actual() < sigma_nominal {
        return Err(Error::InvalidBlueInstance(format!(
            "blue density {} is below sigma {}",
            crate::rational::to_f64(&inst.sigma_actual()),
            p.sigma
        )));
    }
    let prob = exact_blue_prob(inst)?;
    let e = expected_blue_fraction(inst);
    let mu = rational_below(p.mu(), 1e-12);
    let bound_a = &e * (&e - &mu);
    let pass_a = prob >= bound_a;

    let pow4 = BigUint::one() << (2 * n as usize);
    let layers_ok = (p.i_lo..=p.i_hi).all(|i| {
        let c = binomial(n, i);
        &c * &c * BigUint::from(n) <= pow4
    });
    let (bound_b, pass_b) = if layers_ok {
        let b = sigma_nominal * rational_above((n as f64).sqrt(), 1e-12) / int(p.window_len());
        let pass = e >= b;
        (Some(Exact(b)), Some(pass))
    } else {
        (None, None)
    };
    Ok(BlueChainReport {
        n,
        eps: p.eps,
        sigma: p.sigma,
        blue_count: inst.blue.len() as u64,
        prob: prob.into(),
        fraction: e.into(),
        mu: mu.into(),
        bound_a: bound_a.into(),
        pass_a,
        bound_b,
        pass_b,
    })
}
