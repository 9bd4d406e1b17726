//! Truth tables, query-counting oracles and the named function families.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypercube::{check_dim, full_mask, level, Point};

pub const BFTT_MAGIC: &[u8; 4] = b"BFTT";
pub const BFTT_VERSION: u8 = 1;

/// Read access to a Boolean function on `{0,1}^n`.
pub trait BooleanFunction {
    fn dim(&self) -> u32;
    fn value(&self, x: u32) -> bool;
}

/// A complete Boolean function, one bit per point, indexed by point encoding.
///
/// Bits beyond index `2^n - 1` are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruthTable {
    n: u32,
    words: Vec<u64>,
}

impl fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n <= 6 {
            write!(f, "TruthTable(n={}, {:#x})", self.n, self.words[0])
        } else {
            write!(f, "TruthTable(n={}, ones={})", self.n, self.count_ones())
        }
    }
}

impl TruthTable {
    pub fn zeros(n: u32) -> Result<Self> {
        check_dim(n)?;
        let len = (1usize << n).div_ceil(64);
        Ok(TruthTable {
            n,
            words: vec![0; len],
        })
    }

    pub fn from_fn<F: FnMut(u32) -> bool>(n: u32, mut f: F) -> Result<Self> {
        let mut t = Self::zeros(n)?;
        for x in 0..=full_mask(n) {
            if f(x) {
                t.words[(x >> 6) as usize] |= 1 << (x & 63);
            }
        }
        Ok(t)
    }

    /// Build from the low `2^n` bits of `mask` (n ≤ 6).
    pub fn from_u64(n: u32, mask: u64) -> Result<Self> {
        if n > 6 {
            return Err(Error::Dimension { n, max: 6 });
        }
        let mut t = Self::zeros(n)?;
        t.words[0] = mask & low_bits(1 << n);
        Ok(t)
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn size(&self) -> u64 {
        1u64 << self.n
    }

    #[inline]
    pub fn get(&self, x: u32) -> bool {
        self.words[(x >> 6) as usize] >> (x & 63) & 1 == 1
    }

    pub fn set(&mut self, x: u32, v: bool) {
        let w = &mut self.words[(x >> 6) as usize];
        if v {
            *w |= 1 << (x & 63);
        } else {
            *w &= !(1 << (x & 63));
        }
    }

    pub fn flip(&mut self, x: u32) {
        self.words[(x >> 6) as usize] ^= 1 << (x & 63);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = u32> + '_ {
        (0..=full_mask(self.n)).filter(move |&x| self.get(x))
    }

    /// Number of violated directed edges crossing each dimension.
    pub fn violated_edges_by_dim(&self) -> Vec<u64> {
        self.edge_counts_by_dim(|lo, hi| lo & !hi)
    }

    /// Number of bichromatic edges crossing each dimension.
    pub fn bichromatic_edges_by_dim(&self) -> Vec<u64> {
        self.edge_counts_by_dim(|lo, hi| lo ^ hi)
    }

    /// For each dimension `i`, counts lower endpoints `x` (bit `i` clear) where
    /// `op(f(x), f(x + e_i))` is set, evaluated 64 points at a time.
    fn edge_counts_by_dim(&self, op: impl Fn(u64, u64) -> u64) -> Vec<u64> {
        let n = self.n;
        let mut out = vec![0u64; n as usize];
        for i in 0..n {
            let mut count = 0u64;
            if i < 6 {
                let shift = 1u32 << i;
                let lower = LOWER_MASKS[i as usize];
                for &w in &self.words {
                    count += (op(w, w >> shift) & lower).count_ones() as u64;
                }
            } else {
                let stride = 1usize << (i - 6);
                for (j, &w) in self.words.iter().enumerate() {
                    if j & stride == 0 {
                        count += op(w, self.words[j + stride]).count_ones() as u64;
                    }
                }
            }
            out[i as usize] = count;
        }
        out
    }

    /// Serialize in the `BFTT` format: magic, version, `n`, then `ceil(2^n/8)`
    /// bytes with point `x` at bit `x % 8` of byte `x / 8`.
    pub fn to_bftt_bytes(&self) -> Vec<u8> {
        let nbytes = (1usize << self.n).div_ceil(8);
        let mut out = Vec::with_capacity(6 + nbytes);
        out.extend_from_slice(BFTT_MAGIC);
        out.push(BFTT_VERSION);
        out.push(self.n as u8);
        out.extend(
            self.words
                .iter()
                .flat_map(|w| w.to_le_bytes())
                .take(nbytes),
        );
        out
    }

    pub fn from_bftt_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 6 || &data[..4] != BFTT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        if data[4] != BFTT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", data[4])));
        }
        let n = u32::from(data[5]);
        check_dim(n).map_err(|_| Error::Format(format!("unsupported dimension {n}")))?;
        let nbytes = (1usize << n).div_ceil(8);
        let body = &data[6..];
        if body.len() != nbytes {
            return Err(Error::Format(format!(
                "expected {nbytes} payload bytes, found {}",
                body.len()
            )));
        }
        if n < 3 && body[0] >> (1u32 << n) != 0 {
            return Err(Error::Format("padding bits set".into()));
        }
        let mut t = Self::zeros(n)?;
        for (w, chunk) in t.words.iter_mut().zip(body.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_le_bytes(buf);
        }
        Ok(t)
    }

    pub fn write_bftt<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bftt_bytes())?;
        Ok(())
    }

    pub fn read_bftt<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bftt_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bftt_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bftt_bytes(&std::fs::read(path)?)
    }
}

fn low_bits(k: u32) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// `LOWER_MASKS[i]` has bit `x` set iff bit `i` of `x` is clear (x < 64).
const LOWER_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

impl BooleanFunction for TruthTable {
    fn dim(&self) -> u32 {
        self.n
    }

    fn value(&self, x: u32) -> bool {
        self.get(x)
    }
}

/// Oracle access that counts (and optionally logs) every query.
pub struct QueryOracle<'f> {
    function: &'f dyn BooleanFunction,
    count: u64,
    log: Option<Vec<u32>>,
}

impl<'f> QueryOracle<'f> {
    pub fn new(function: &'f dyn BooleanFunction) -> Self {
        QueryOracle {
            function,
            count: 0,
            log: None,
        }
    }

    pub fn with_log(function: &'f dyn BooleanFunction) -> Self {
        QueryOracle {
            function,
            count: 0,
            log: Some(Vec::new()),
        }
    }

    pub fn dim(&self) -> u32 {
        self.function.dim()
    }

    pub fn evaluate(&mut self, x: Point) -> Result<bool> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(self.query(x.bits()))
    }

    pub(crate) fn query(&mut self, x: u32) -> bool {
        self.count += 1;
        if let Some(log) = &mut self.log {
            log.push(x);
        }
        self.function.value(x)
    }

    pub fn query_count(&self) -> u64 {
        self.count
    }

    pub fn query_log(&self) -> Option<&[u32]> {
        self.log.as_deref()
    }
}

pub fn constant(n: u32, b: bool) -> Result<TruthTable> {
    TruthTable::from_fn(n, |_| b)
}

pub fn dictator(n: u32, i: u32) -> Result<TruthTable> {
    check_coord(n, i)?;
    TruthTable::from_fn(n, |x| x >> i & 1 == 1)
}

pub fn anti_dictator(n: u32, i: u32) -> Result<TruthTable> {
    check_coord(n, i)?;
    TruthTable::from_fn(n, |x| x >> i & 1 == 0)
}

fn check_coord(n: u32, i: u32) -> Result<()> {
    check_dim(n)?;
    if i >= n {
        return Err(Error::InvalidParameter(format!(
            "coordinate {i} out of range for n={n}"
        )));
    }
    Ok(())
}

/// `f(x) = 1` iff `|x| <= n/2`.
pub fn anti_majority(n: u32) -> Result<TruthTable> {
    TruthTable::from_fn(n, |x| 2 * level(x) <= n)
}

/// `f(x) = 1` iff `|x| >= n/2`.
pub fn majority(n: u32) -> Result<TruthTable> {
    TruthTable::from_fn(n, |x| 2 * level(x) >= n)
}

/// Two monotone threshold halves glued across coordinate 0 so that every
/// violated edge crosses dimension 0. Domain dimension is `n + 1`.
///
/// With `r` the weight of the remaining `n` coordinates:
/// `f(0, r) = [r > n/2 - 2 sqrt(n)]`, `f(1, r) = [r > n/2 + 2 sqrt(n)]`.
pub fn two_block_example(n: u32) -> Result<TruthTable> {
    check_dim(n + 1)?;
    let half = n as f64 / 2.0;
    let spread = 2.0 * (n as f64).sqrt();
    let (lo, hi) = (half - spread, half + spread);
    TruthTable::from_fn(n + 1, |x| {
        let rest = level(x >> 1) as f64;
        if x & 1 == 0 {
            rest > lo
        } else {
            rest > hi
        }
    })
}

pub fn random_function(n: u32, seed: u64) -> Result<TruthTable> {
    let mut t = TruthTable::zeros(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let valid = low_bits(1 << n.min(6));
    for w in t.words.iter_mut() {
        *w = rng.gen::<u64>() & valid;
    }
    Ok(t)
}

/// Upward closure of a random seed set.
///
/// Draws between 1 and `n` seed points, each with coordinates set
/// independently at a per-function density in `[0.3, 0.8)`, and sets
/// `f(y) = 1` iff some seed lies below `y`. Always monotone; not uniform over
/// monotone functions.
pub fn random_monotone(n: u32, seed: u64) -> Result<TruthTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = TruthTable::zeros(n)?;
    let density: f64 = rng.gen_range(0.3..0.8);
    let seeds = rng.gen_range(1..=n);
    for _ in 0..seeds {
        let mut x = 0u32;
        for i in 0..n {
            if rng.gen_bool(density) {
                x |= 1 << i;
            }
        }
        t.set(x, true);
    }
    upward_closure(&mut t);
    Ok(t)
}

/// A random monotone function with `flips` points toggled afterwards.
pub fn noisy_monotone(n: u32, flips: u32, seed: u64) -> Result<TruthTable> {
    let mut t = random_monotone(n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_795f_6d6f);
    for _ in 0..flips {
        t.flip(rng.gen_range(0..=full_mask(n)));
    }
    Ok(t)
}

/// `f(y) |= f(x)` for every `x ≺ y`.
pub(crate) fn upward_closure(t: &mut TruthTable) {
    let n = t.n;
    for i in 0..n {
        let bit = 1u32 << i;
        for x in 0..=full_mask(n) {
            if x & bit != 0 && t.get(x ^ bit) {
                t.set(x, true);
            }
        }
    }
}

/// No directed edge `(x, x + e_i)` has `f(x) = 1`, `f(x + e_i) = 0`.
pub fn is_monotone_exact(f: &TruthTable) -> bool {
    f.violated_edges_by_dim().iter().all(|&c| c == 0)
}

/// A named function family, parsed from `name[:arg[:arg]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    Constant(bool),
    Dictator(u32),
    AntiDictator(u32),
    Majority,
    AntiMajority,
    /// Takes the domain dimension; requires `n >= 2`.
    TwoBlock,
    Random(u64),
    RandomMonotone(u64),
    NoisyMonotone { seed: u64, flips: u32 },
}

impl Family {
    pub fn table(&self, n: u32) -> Result<TruthTable> {
        match *self {
            Family::Constant(b) => constant(n, b),
            Family::Dictator(i) => dictator(n, i),
            Family::AntiDictator(i) => anti_dictator(n, i),
            Family::Majority => majority(n),
            Family::AntiMajority => anti_majority(n),
            Family::TwoBlock => {
                if n < 2 {
                    return Err(Error::InvalidParameter("two-block needs n >= 2".into()));
                }
                two_block_example(n - 1)
            }
            Family::Random(seed) => random_function(n, seed),
            Family::RandomMonotone(seed) => random_monotone(n, seed),
            Family::NoisyMonotone { seed, flips } => noisy_monotone(n, flips, seed),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |k: usize, default: u64| -> Result<u64> {
            match args.get(k) {
                None => Ok(default),
                Some(a) => a
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad argument `{a}` in `{s}`"))),
            }
        };
        let fam = match name {
            "constant" => Family::Constant(num(0, 0)? != 0),
            "dictator" => Family::Dictator(num(0, 0)? as u32),
            "anti-dictator" => Family::AntiDictator(num(0, 0)? as u32),
            "majority" => Family::Majority,
            "anti-majority" => Family::AntiMajority,
            "two-block" => Family::TwoBlock,
            "random" => Family::Random(num(0, 0)?),
            "random-monotone" => Family::RandomMonotone(num(0, 0)?),
            "noisy-monotone" => Family::NoisyMonotone {
                seed: num(0, 0)?,
                flips: num(1, 1)? as u32,
            },
            _ => return Err(Error::UnknownFamily(s.to_string())),
        };
        Ok(fam)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Constant(b) => write!(f, "constant:{}", u8::from(*b)),
            Family::Dictator(i) => write!(f, "dictator:{i}"),
            Family::AntiDictator(i) => write!(f, "anti-dictator:{i}"),
            Family::Majority => write!(f, "majority"),
            Family::AntiMajority => write!(f, "anti-majority"),
            Family::TwoBlock => write!(f, "two-block"),
            Family::Random(s) => write!(f, "random:{s}"),
            Family::RandomMonotone(s) => write!(f, "random-monotone:{s}"),
            Family::NoisyMonotone { seed, flips } => write!(f, "noisy-monotone:{seed}:{flips}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(bits: u32, n: u32) -> Point {
        Point::new(bits, n).unwrap()
    }

    #[test]
    fn oracle_counts_queries() {
        let f = constant(5, true).unwrap();
        let mut o = QueryOracle::new(&f);
        assert!(o.evaluate(pt(3, 5)).unwrap());
        assert_eq!(o.query_count(), 1);
        assert!(o.evaluate(pt(3, 4)).is_err());
        assert_eq!(o.query_count(), 1);
    }

    #[test]
    fn named_values() {
        let d = dictator(3, 0).unwrap();
        let mut o = QueryOracle::new(&d);
        assert!(o.evaluate(pt(0b001, 3)).unwrap());
        let am = anti_majority(2).unwrap();
        let mut o = QueryOracle::with_log(&am);
        assert!(!o.evaluate(pt(0b11, 2)).unwrap());
        assert_eq!(o.query_log().unwrap(), &[0b11]);
    }

    #[test]
    fn anti_majority_small() {
        let f = anti_majority(2).unwrap();
        assert_eq!(
            (0..4).map(|x| f.get(x)).collect::<Vec<_>>(),
            vec![true, true, true, false]
        );
        let f = anti_majority(1).unwrap();
        assert!(f.get(0) && !f.get(1));
        let f = anti_majority(3).unwrap();
        assert_eq!(f.count_ones(), 4);
        assert!(f.ones().all(|x| level(x) <= 1));
    }

    #[test]
    fn two_block_structure() {
        let f = two_block_example(16).unwrap();
        assert_eq!(f.dim(), 17);
        for x in 0..1u32 << 17 {
            let rest = level(x >> 1);
            let expect = if x & 1 == 0 { rest > 0 } else { rest > 16 };
            assert_eq!(f.get(x), expect);
        }
        let by_dim = f.violated_edges_by_dim();
        assert!(by_dim[0] > 0);
        assert!(by_dim[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn family_monotonicity() {
        assert!(is_monotone_exact(&dictator(3, 0).unwrap()));
        assert!(is_monotone_exact(&constant(4, true).unwrap()));
        assert!(is_monotone_exact(&constant(4, false).unwrap()));
        assert!(!is_monotone_exact(&anti_majority(2).unwrap()));
        let ad = anti_dictator(3, 0).unwrap();
        assert_eq!(ad.violated_edges_by_dim(), vec![4, 0, 0]);
        for seed in 0..20 {
            assert!(is_monotone_exact(&random_monotone(6, seed).unwrap()));
        }
        assert!(is_monotone_exact(&random_monotone(6, 7).unwrap()));
    }

    #[test]
    fn edge_counts_match_scan() {
        for n in [1u32, 3, 6, 7, 9] {
            for seed in 0..4 {
                let f = random_function(n, seed).unwrap();
                let fast_v = f.violated_edges_by_dim();
                let fast_b = f.bichromatic_edges_by_dim();
                for i in 0..n {
                    let mut v = 0;
                    let mut b = 0;
                    for x in 0..1u32 << n {
                        if x >> i & 1 == 0 {
                            let (a, c) = (f.get(x), f.get(x | 1 << i));
                            v += u64::from(a && !c);
                            b += u64::from(a != c);
                        }
                    }
                    assert_eq!(fast_v[i as usize], v);
                    assert_eq!(fast_b[i as usize], b);
                }
            }
        }
    }

    #[test]
    fn bftt_round_trip_and_rejects() {
        for n in [1u32, 2, 3, 4, 10] {
            let f = random_function(n, 11).unwrap();
            let bytes = f.to_bftt_bytes();
            assert_eq!(bytes.len(), 6 + (1usize << n).div_ceil(8));
            assert_eq!(TruthTable::from_bftt_bytes(&bytes).unwrap(), f);
        }
        let f = anti_majority(3).unwrap();
        let good = f.to_bftt_bytes();
        assert_eq!(good, vec![b'B', b'F', b'T', b'T', 1, 3, 0b0001_0111]);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(TruthTable::from_bftt_bytes(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(TruthTable::from_bftt_bytes(&bad).is_err());
        let mut bad = good.clone();
        bad.push(0);
        assert!(TruthTable::from_bftt_bytes(&bad).is_err());
        let short = &good[..good.len() - 1];
        assert!(TruthTable::from_bftt_bytes(short).is_err());
    }

    #[test]
    fn family_parse_display() {
        for s in [
            "anti-majority",
            "anti-dictator:0",
            "dictator:3",
            "constant:1",
            "random:42",
            "random-monotone:7",
            "noisy-monotone:3:5",
            "two-block",
            "majority",
        ] {
            let fam: Family = s.parse().unwrap();
            assert_eq!(fam.to_string(), s);
        }
        assert!("nope".parse::<Family>().is_err());
        assert!("random:x".parse::<Family>().is_err());
    }
}
