//! Points, layers and the sampling machinery of the directed hypercube.
//!
//! Coordinate `i` of a point is bit `i` of its integer encoding. That encoding
//! fixes iteration order and the truth-table file layout everywhere else in
//! the crate.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: u32 = 30;

/// Largest dimension for which pair probabilities are computed exactly.
pub const EXACT_PROB_MAX_DIM: u32 = 20;

#[inline]
pub fn level(bits: u32) -> u32 {
    bits.count_ones()
}

/// `x ≺ y` in the coordinatewise order (reflexive).
#[inline]
pub fn precedes(x: u32, y: u32) -> bool {
    x & !y == 0
}

#[inline]
pub fn full_mask(n: u32) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

pub(crate) fn check_dim(n: u32) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::Dimension { n, max: MAX_DIM });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Point {
    bits: u32,
    n: u32,
}

impl Point {
    pub fn new(bits: u32, n: u32) -> Result<Self> {
        check_dim(n)?;
        if bits > full_mask(n) {
            return Err(Error::PointOutOfRange {
                bits: bits as u64,
                n,
            });
        }
        Ok(Point { bits, n })
    }

    pub(crate) fn from_raw(bits: u32, n: u32) -> Self {
        debug_assert!(bits <= full_mask(n));
        Point { bits, n }
    }

    pub fn zero(n: u32) -> Result<Self> {
        Self::new(0, n)
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn dim(self) -> u32 {
        self.n
    }

    pub fn level(self) -> u32 {
        level(self.bits)
    }

    pub fn coord(self, i: u32) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn precedes(self, other: Point) -> bool {
        self.n == other.n && precedes(self.bits, other.bits)
    }

    pub fn comparable(self, other: Point) -> bool {
        self.precedes(other) || other.precedes(self)
    }

    pub fn distance(self, other: Point) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    /// Bit string with coordinate 0 first.
    pub fn to_bit_string(self) -> String {
        (0..self.n)
            .map(|i| if self.coord(i) { '1' } else { '0' })
            .collect()
    }
}

/// Constants that govern the path tester.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TesterParams {
    pub n: u32,
    pub eps: f64,
    /// `sqrt(10 ln(1/eps))`.
    pub c_eps: f64,
    /// `2 * ceil(c_eps * sqrt(n))`.
    pub ell: u32,
    /// Lowest middle layer (inclusive, clipped to 0).
    pub i_lo: u32,
    /// Highest middle layer (inclusive, clipped to n).
    pub i_hi: u32,
    pub sigma: f64,
    /// Minimum level distance between the two sampled points. May be negative.
    pub tau: f64,
}

pub fn make_params(n: u32, eps: f64, sigma: f64) -> Result<TesterParams> {
    // Pure arithmetic, so any positive dimension is accepted; operations that
    // touch points enforce MAX_DIM themselves.
    if n == 0 {
        return Err(Error::Dimension { n, max: u32::MAX });
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Epsilon(eps));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Sigma(sigma));
    }
    let c_eps = (10.0 * (1.0 / eps).ln()).sqrt();
    let ell = 2 * (c_eps * (n as f64).sqrt()).ceil() as u32;
    let half = (ell / 2) as i64;
    let n_i = n as i64;
    // Integer layers inside [n/2 - ell/2, n/2 + ell/2].
    let lo = (n_i - 2 * half).div_euclid(2) + i64::from((n_i - 2 * half).rem_euclid(2) != 0);
    let hi = (n_i + 2 * half).div_euclid(2);
    let tau = sigma * ell as f64 / (32.0 * c_eps) - 1.0;
    Ok(TesterParams {
        n,
        eps,
        c_eps,
        ell,
        i_lo: lo.max(0) as u32,
        i_hi: hi.min(n_i) as u32,
        sigma,
        tau,
    })
}

impl TesterParams {
    /// Number of middle layers, i.e. `|X_p|` for every path.
    pub fn window_len(&self) -> u32 {
        self.i_hi - self.i_lo + 1
    }

    pub fn in_window(&self, lvl: u32) -> bool {
        (self.i_lo..=self.i_hi).contains(&lvl)
    }

    /// Smallest integer level distance `d` with `d >= tau`.
    pub fn min_gap(&self) -> u32 {
        if self.tau <= 0.0 {
            0
        } else {
            self.tau.ceil() as u32
        }
    }

    /// `sigma / (16 c_eps)`.
    pub fn mu(&self) -> f64 {
        self.sigma / (16.0 * self.c_eps)
    }

    /// Number of middle layers at level distance at least `tau` from `lvl`.
    pub fn s_of(&self, lvl: u32) -> Result<u32> {
        if !self.in_window(lvl) {
            return Err(Error::NotInSet);
        }
        Ok(self.s_unchecked(lvl))
    }

    pub(crate) fn s_unchecked(&self, lvl: u32) -> u32 {
        let gap = self.min_gap();
        (self.i_lo..=self.i_hi)
            .filter(|&i| i.abs_diff(lvl) >= gap)
            .count() as u32
    }
}

/// A monotone path from `0^n` to `1^n`, stored as the order in which
/// coordinates are switched on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathSample {
    order: Vec<u8>,
}

impl PathSample {
    pub fn from_order(order: Vec<u8>) -> Result<Self> {
        let n = order.len() as u32;
        check_dim(n)?;
        let mut seen = 0u32;
        for &c in &order {
            if u32::from(c) >= n || seen >> c & 1 == 1 {
                return Err(Error::InvalidParameter(
                    "path order is not a permutation".into(),
                ));
            }
            seen |= 1 << c;
        }
        Ok(PathSample { order })
    }

    pub fn dim(&self) -> u32 {
        self.order.len() as u32
    }

    pub fn order(&self) -> &[u8] {
        &self.order
    }

    /// The vertex of the path at level `k`.
    pub fn vertex_at(&self, k: u32) -> u32 {
        self.order[..k as usize]
            .iter()
            .fold(0u32, |acc, &c| acc | 1 << c)
    }

    /// All `n + 1` vertices, from `0^n` to `1^n`.
    pub fn vertices(&self) -> Vec<Point> {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.order.len() + 1);
        let mut cur = 0u32;
        out.push(Point::from_raw(cur, n));
        for &c in &self.order {
            cur |= 1 << c;
            out.push(Point::from_raw(cur, n));
        }
        out
    }
}

pub fn sample_path<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<PathSample> {
    check_dim(n)?;
    let mut order: Vec<u8> = (0..n as u8).collect();
    order.shuffle(rng);
    Ok(PathSample { order })
}

/// Path vertices whose level lies in the middle window, by increasing level.
pub fn middle_points(path: &PathSample, params: &TesterParams) -> Result<Vec<Point>> {
    if path.dim() != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            got: path.dim(),
        });
    }
    Ok(path
        .vertices()
        .into_iter()
        .filter(|p| params.in_window(p.level()))
        .collect())
}

/// Members of `xs` at level distance at least `tau` from `x`.
///
/// `xs` must lie on a single path, so the `l1` distance equals the level
/// difference.
pub fn y_set(xs: &[Point], x: Point, params: &TesterParams) -> Result<Vec<Point>> {
    if !xs.contains(&x) {
        return Err(Error::NotInSet);
    }
    Ok(xs
        .iter()
        .copied()
        .filter(|z| z.distance(x) as f64 >= params.tau)
        .collect())
}

pub fn factorial(k: u32) -> BigUint {
    (2..=k).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// Number of `0^n -> 1^n` paths through a fixed pair `x ≺ y` with `|x| = t`
/// and `|y| - |x| = u`: `t! u! (n-u-t)!`.
pub fn count_paths_through_pair(t: u32, u: u32, n: u32) -> Result<BigUint> {
    if u == 0 || t + u > n {
        return Err(Error::InvalidParameter(format!(
            "levels t={t}, u={u} invalid for n={n}"
        )));
    }
    Ok(factorial(t) * factorial(u) * factorial(n - u - t))
}

/// Probability value, exact for small dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    Approx(f64),
}

impl Probability {
    pub fn to_f64(&self) -> f64 {
        match self {
            Probability::Exact(r) => rational_to_f64(r),
            Probability::Approx(v) => *v,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Probability::Exact(r) => r.is_zero(),
            Probability::Approx(v) => *v == 0.0,
        }
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone)]
pub struct PairProbability {
    pub x: Point,
    pub y: Point,
    pub prob: Probability,
    /// Conditional probability of picking the pair given a path through both.
    pub theta: f64,
    /// Paths through both points (0 when incomparable).
    pub path_count: BigUint,
}

/// Probability that one path-tester draw produces the unordered outcome with
/// lower point on level `a` and upper point on level `b`, for one fixed
/// comparable pair at those levels.
///
/// The first point is uniform over the `window_len()` middle vertices of the
/// path, the second uniform over the `s(x)` admissible ones.
pub fn level_pair_prob(a: u32, b: u32, params: &TesterParams) -> Result<BigRational> {
    if params.n > EXACT_PROB_MAX_DIM {
        return Err(Error::Dimension {
            n: params.n,
            max: EXACT_PROB_MAX_DIM,
        });
    }
    let (a, b) = (a.min(b), a.max(b));
    if b > params.n || !params.in_window(a) || !params.in_window(b) || b - a < params.min_gap()
    {
        return Ok(BigRational::zero());
    }
    let n = params.n;
    let m = BigRational::from_integer(params.window_len().into());
    let inv = |s: u32| BigRational::new(1.into(), s.into());
    let sa = params.s_unchecked(a);
    let sb = params.s_unchecked(b);
    let theta = if a == b {
        inv(sa) / &m
    } else {
        (inv(sa) + inv(sb)) / &m
    };
    let paths = factorial(a) * factorial(b - a) * factorial(n - b);
    let frac = BigRational::new(paths.into(), factorial(n).into());
    Ok(theta * frac)
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

pub fn pair_prob(x: Point, y: Point, params: &TesterParams) -> Result<PairProbability> {
    if x.dim() != params.n || y.dim() != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            got: if x.dim() != params.n { x.dim() } else { y.dim() },
        });
    }
    let (lo, hi) = if x.level() <= y.level() { (x, y) } else { (y, x) };
    let zero = |lo, hi| PairProbability {
        x: lo,
        y: hi,
        prob: if params.n <= EXACT_PROB_MAX_DIM {
            Probability::Exact(BigRational::zero())
        } else {
            Probability::Approx(0.0)
        },
        theta: 0.0,
        path_count: BigUint::zero(),
    };
    if !lo.precedes(hi) {
        return Ok(zero(lo, hi));
    }
    let (a, b, n) = (lo.level(), hi.level(), params.n);
    let path_count = factorial(a) * factorial(b - a) * factorial(n - b);
    if !params.in_window(a) || !params.in_window(b) || b - a < params.min_gap() {
        return Ok(PairProbability {
            path_count,
            ..zero(lo, hi)
        });
    }
    let m = params.window_len() as f64;
    let sa = params.s_unchecked(a) as f64;
    let sb = params.s_unchecked(b) as f64;
    let theta = if a == b {
        1.0 / (m * sa)
    } else {
        (1.0 / sa + 1.0 / sb) / m
    };
    let prob = if n <= EXACT_PROB_MAX_DIM {
        Probability::Exact(level_pair_prob(a, b, params)?)
    } else {
        let log_frac = ln_factorial(a) + ln_factorial(b - a) + ln_factorial(n - b) - ln_factorial(n);
        Probability::Approx(theta * log_frac.exp())
    };
    Ok(PairProbability {
        x: lo,
        y: hi,
        prob,
        theta,
        path_count,
    })
}

/// One path-tester draw: returns `(first, second)` as point encodings, or
/// `None` when the first point has no admissible partner.
///
/// Randomness is consumed in a fixed order: path permutation, first point,
/// second point.
///
/// Panics if `params.n` exceeds `MAX_DIM`.
pub fn draw_pair<R: Rng + ?Sized>(params: &TesterParams, rng: &mut R) -> Option<(u32, u32)> {
    let n = params.n as usize;
    let mut order = [0u8; MAX_DIM as usize];
    for (i, slot) in order[..n].iter_mut().enumerate() {
        *slot = i as u8;
    }
    order[..n].shuffle(rng);
    let m = params.window_len();
    let a = params.i_lo + rng.gen_range(0..m);
    let gap = params.min_gap();
    let s = params.s_unchecked(a);
    if s == 0 {
        return None;
    }
    let mut k = rng.gen_range(0..s);
    let mut b = params.i_lo;
    for lvl in params.i_lo..=params.i_hi {
        if lvl.abs_diff(a) >= gap {
            if k == 0 {
                b = lvl;
                break;
            }
            k -= 1;
        }
    }
    let prefix = |k: u32| {
        order[..k as usize]
            .iter()
            .fold(0u32, |acc, &c| acc | 1 << c)
    };
    Some((prefix(a), prefix(b)))
}
