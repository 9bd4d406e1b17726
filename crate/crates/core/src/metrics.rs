//! Exact combinatorial quantities of a truth table.
//!
//! All ratios are exact. Distance to monotonicity comes from a minimum s-t cut
//! over the covering relation; matchings over violating pairs use
//! Hopcroft-Karp (cardinality) or min-cost flow (minimum total length).

use num_rational::BigRational;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::boolfn::TruthTable;
use crate::error::{Error, Result};
use crate::flow::{hopcroft_karp, Dinic, MinCostFlow};
use crate::hypercube::{full_mask, level, make_params, TesterParams};
use crate::rational::{int, ratio, Exact};

/// Dimension limit for the min-cut distance computation.
pub const DISTANCE_MAX_DIM: u32 = 20;
/// Dimension limit for comparable-pair enumeration (3^n pairs).
pub const PAIR_MAX_DIM: u32 = 16;
/// Dimension limit for the minimum-length maximum matching.
pub const MIN_LENGTH_MAX_DIM: u32 = 12;
/// Dimension limit for the middle-layer edge matching.
pub const GAMMA_MAX_DIM: u32 = 24;

fn limit(n: u32, max: u32) -> Result<()> {
    if n > max {
        Err(Error::Dimension { n, max })
    } else {
        Ok(())
    }
}

/// All comparable violating pairs `x ≺ y`, `f(x) = 1`, `f(y) = 0`, as a
/// bipartite graph from the 1-points to the 0-points.
#[derive(Debug, Clone)]
pub struct ViolationGraph {
    pub n: u32,
    pub ones: Vec<u32>,
    pub zeros: Vec<u32>,
    /// `adj[i]` lists indices into `zeros` above `ones[i]`.
    pub adj: Vec<Vec<u32>>,
}

impl ViolationGraph {
    pub fn build(f: &TruthTable) -> Result<Self> {
        let n = f.dim();
        limit(n, PAIR_MAX_DIM)?;
        let mask = full_mask(n);
        let mut zero_index = vec![u32::MAX; 1usize << n];
        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        for x in 0..=mask {
            if f.get(x) {
                ones.push(x);
            } else {
                zero_index[x as usize] = zeros.len() as u32;
                zeros.push(x);
            }
        }
        let adj = ones
            .iter()
            .map(|&x| {
                let comp = !x & mask;
                let mut out = Vec::new();
                let mut sub = comp;
                loop {
                    let zi = zero_index[(x | sub) as usize];
                    if zi != u32::MAX {
                        out.push(zi);
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & comp;
                }
                out.reverse();
                out
            })
            .collect();
        Ok(ViolationGraph {
            n,
            ones,
            zeros,
            adj,
        })
    }

    pub fn pair_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .map(move |&j| (self.ones[i], self.zeros[j as usize]))
        })
    }

    pub fn max_matching_size(&self) -> usize {
        hopcroft_karp(self.ones.len(), self.zeros.len(), &self.adj)
            .iter()
            .flatten()
            .count()
    }
}

/// Vertex-disjoint violating pairs `(x, y)` with `x ≺ y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub n: u32,
    pub pairs: Vec<(u32, u32)>,
    pub total_length: u64,
    /// `per_dimension[i]` = pairs crossing dimension `i` (`x_i = 0`, `y_i = 1`).
    pub per_dimension: Vec<u64>,
}

impl Matching {
    pub fn from_pairs(n: u32, mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        let mut per_dimension = vec![0u64; n as usize];
        let mut total_length = 0u64;
        for &(x, y) in &pairs {
            let diff = x ^ y;
            total_length += u64::from(diff.count_ones());
            for (i, c) in per_dimension.iter_mut().enumerate() {
                *c += u64::from(diff >> i & 1);
            }
        }
        Matching {
            n,
            pairs,
            total_length,
            per_dimension,
        }
    }

    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Average pair length `r`; zero for the empty matching.
    pub fn avg_length(&self) -> BigRational {
        if self.pairs.is_empty() {
            BigRational::zero()
        } else {
            ratio(self.total_length, self.pairs.len() as u64)
        }
    }

    /// Partner of every matched point (`u32::MAX` when unmatched).
    pub fn partner_map(&self) -> Vec<u32> {
        let mut m = vec![u32::MAX; 1usize << self.n];
        for &(x, y) in &self.pairs {
            m[x as usize] = y;
            m[y as usize] = x;
        }
        m
    }

    /// Checks every pair is a violation of `f` and no point is reused.
    pub fn validate(&self, f: &TruthTable) -> Result<()> {
        let mut used = vec![false; 1usize << self.n];
        for &(x, y) in &self.pairs {
            if x == y || x & !y != 0 || !f.get(x) || f.get(y) {
                return Err(Error::InvalidMatching(format!(
                    "pair ({x:#b}, {y:#b}) is not a violation"
                )));
            }
            for p in [x, y] {
                if std::mem::replace(&mut used[p as usize], true) {
                    return Err(Error::InvalidMatching(format!("point {p:#b} used twice")));
                }
            }
        }
        Ok(())
    }
}

/// Minimum number of point changes to reach a monotone function, with one
/// optimal repair.
#[derive(Debug, Clone)]
pub struct MonotoneRepair {
    pub changes: u64,
    pub repaired: TruthTable,
}

/// Minimum s-t cut: `s -> x` (unit) for `f(x) = 1`, `x -> t` (unit) for
/// `f(x) = 0`, and uncuttable arcs `x -> x + e_i`. Points left on the source
/// side take value 1 in the repair.
pub fn monotone_repair(f: &TruthTable) -> Result<MonotoneRepair> {
    let n = f.dim();
    limit(n, DISTANCE_MAX_DIM)?;
    let size = 1usize << n;
    let (s, t) = (size, size + 1);
    let big = size as i64 + 1;
    let mut g = Dinic::new(size + 2);
    for x in 0..size as u32 {
        if f.get(x) {
            g.add_edge(s, x as usize, 1);
        } else {
            g.add_edge(x as usize, t, 1);
        }
        for i in 0..n {
            if x >> i & 1 == 0 {
                g.add_edge(x as usize, (x | 1 << i) as usize, big);
            }
        }
    }
    let changes = g.max_flow(s, t) as u64;
    let side = g.source_side(s);
    let repaired = TruthTable::from_fn(n, |x| side[x as usize])?;
    Ok(MonotoneRepair { changes, repaired })
}

pub fn min_changes_to_monotone(f: &TruthTable) -> Result<u64> {
    Ok(monotone_repair(f)?.changes)
}

/// `ε_f` = minimum changes / `2^n`.
pub fn distance_to_monotonicity(f: &TruthTable) -> Result<BigRational> {
    Ok(ratio(min_changes_to_monotone(f)?, f.size()))
}

#[derive(Debug, Clone)]
pub struct ViolatedEdges {
    /// `(x, x + e_i)` with `f(x) = 1`, `f(x + e_i) = 0`.
    pub edges: Vec<(u32, u32)>,
    /// Violated edges / `2^(n-1)`.
    pub phi_plus: BigRational,
}

pub fn violated_edges(f: &TruthTable) -> ViolatedEdges {
    let n = f.dim();
    let mut edges = Vec::new();
    for x in f.ones() {
        for i in 0..n {
            let y = x | 1 << i;
            if y != x && !f.get(y) {
                edges.push((x, y));
            }
        }
    }
    let phi_plus = ratio(edges.len() as u64, f.size() / 2);
    ViolatedEdges { edges, phi_plus }
}

pub fn violated_edge_count(f: &TruthTable) -> u64 {
    f.violated_edges_by_dim().iter().sum()
}

pub fn phi_plus(f: &TruthTable) -> BigRational {
    ratio(violated_edge_count(f), f.size() / 2)
}

/// Bichromatic edges / `2^(n-1)`.
pub fn average_sensitivity(f: &TruthTable) -> BigRational {
    let count: u64 = f.bichromatic_edges_by_dim().iter().sum();
    ratio(count, f.size() / 2)
}

#[derive(Debug, Clone)]
pub struct GammaPlus {
    /// Matching size / `2^n`.
    pub value: BigRational,
    /// Matched violated edges `(x, x + e_i)`, both endpoints in the middle layers.
    pub matching: Vec<(u32, u32)>,
}

/// Maximum matching of violated edges with both endpoints in the middle
/// layers of `params`; bipartite by level parity.
pub fn gamma_plus(f: &TruthTable, params: &TesterParams) -> Result<GammaPlus> {
    let n = f.dim();
    limit(n, GAMMA_MAX_DIM)?;
    if params.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: params.n,
        });
    }
    let mut even_id = vec![u32::MAX; 1usize << n];
    let mut odd_id = vec![u32::MAX; 1usize << n];
    let mut evens = Vec::new();
    let mut odds = Vec::new();
    let mut adj: Vec<Vec<u32>> = Vec::new();
    for x in f.ones() {
        let lx = level(x);
        if !params.in_window(lx) || !params.in_window(lx + 1) {
            continue;
        }
        for i in 0..n {
            let y = x | 1 << i;
            if y == x || f.get(y) {
                continue;
            }
            let (e, o) = if lx.is_multiple_of(2) { (x, y) } else { (y, x) };
            if even_id[e as usize] == u32::MAX {
                even_id[e as usize] = evens.len() as u32;
                evens.push(e);
                adj.push(Vec::new());
            }
            if odd_id[o as usize] == u32::MAX {
                odd_id[o as usize] = odds.len() as u32;
                odds.push(o);
            }
            adj[even_id[e as usize] as usize].push(odd_id[o as usize]);
        }
    }
    let mate = hopcroft_karp(evens.len(), odds.len(), &adj);
    let mut matching: Vec<(u32, u32)> = mate
        .iter()
        .enumerate()
        .filter_map(|(u, m)| {
            m.map(|v| {
                let (a, b) = (evens[u], odds[v as usize]);
                if a < b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
        })
        .collect();
    matching.sort_unstable();
    Ok(GammaPlus {
        value: ratio(matching.len() as u64, f.size()),
        matching,
    })
}

/// Middle-layer parameters derived from a distance value (`eps = 1/2` when
/// the function is monotone). `sigma` does not affect the layer window.
pub fn window_params(n: u32, eps_f: &BigRational) -> Result<TesterParams> {
    let eps = if eps_f.is_zero() {
        0.5
    } else {
        crate::rational::to_f64(eps_f).min(0.5)
    };
    make_params(n, eps, 1.0)
}

/// A maximal (not necessarily maximum) matching of violating pairs, greedy
/// under a seeded random pair order.
pub fn greedy_maximal_violation_matching<R: Rng + ?Sized>(
    f: &TruthTable,
    rng: &mut R,
) -> Result<Matching> {
    let g = ViolationGraph::build(f)?;
    let mut pairs: Vec<(u32, u32)> = g.pairs().collect();
    pairs.shuffle(rng);
    let mut used = vec![false; 1usize << f.dim()];
    let chosen = pairs
        .into_iter()
        .filter(|&(x, y)| {
            if used[x as usize] || used[y as usize] {
                false
            } else {
                used[x as usize] = true;
                used[y as usize] = true;
                true
            }
        })
        .collect();
    Ok(Matching::from_pairs(f.dim(), chosen))
}

/// Maximum-cardinality matching of violating pairs minimizing total length.
pub fn min_length_max_matching(f: &TruthTable) -> Result<Matching> {
    limit(f.dim(), MIN_LENGTH_MAX_DIM)?;
    let g = ViolationGraph::build(f)?;
    Ok(min_length_matching_of(&g))
}

pub(crate) fn min_length_matching_of(g: &ViolationGraph) -> Matching {
    let (l, r) = (g.ones.len(), g.zeros.len());
    let (s, t) = (l + r, l + r + 1);
    let mut mcf = MinCostFlow::new(l + r + 2);
    let mut arcs = Vec::with_capacity(g.pair_count());
    for (i, row) in g.adj.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        mcf.add_edge(s, i, 1, 0);
        for &j in row {
            let len = (g.ones[i] ^ g.zeros[j as usize]).count_ones();
            arcs.push((i, j, mcf.add_edge(i, l + j as usize, 1, i64::from(len))));
        }
    }
    let mut has_in = vec![false; r];
    for row in &g.adj {
        for &j in row {
            has_in[j as usize] = true;
        }
    }
    for (j, _) in has_in.iter().enumerate().filter(|(_, &h)| h) {
        mcf.add_edge(l + j, t, 1, 0);
    }
    mcf.min_cost_flow(s, t, i64::MAX);
    let pairs = arcs
        .into_iter()
        .filter(|&(_, _, e)| mcf.flow_on(e) > 0)
        .map(|(i, j, _)| (g.ones[i], g.zeros[j as usize]))
        .collect();
    Matching::from_pairs(g.n, pairs)
}

/// Exact metrics of one function.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub n: u32,
    pub eps_f: Exact,
    pub phi_plus: Exact,
    pub gamma_plus: Exact,
    pub avg_sensitivity: Exact,
    /// Present when `n` is small enough for the minimum-length matching.
    pub r: Option<Exact>,
    pub min_changes: u64,
    pub violated_edges: u64,
    pub bichromatic_edges: u64,
    pub gamma_matching_size: u64,
    pub window: (u32, u32),
    pub matching_size: Option<u64>,
    pub matching_total_length: Option<u64>,
}

pub fn compute_metrics(f: &TruthTable) -> Result<MetricsReport> {
    let n = f.dim();
    let changes = min_changes_to_monotone(f)?;
    let eps_f = ratio(changes, f.size());
    let params = window_params(n, &eps_f)?;
    let gamma = gamma_plus(f, &params)?;
    let violated = violated_edge_count(f);
    let bichromatic: u64 = f.bichromatic_edges_by_dim().iter().sum();
    let matching = if n <= MIN_LENGTH_MAX_DIM {
        Some(min_length_max_matching(f)?)
    } else {
        None
    };
    Ok(MetricsReport {
        n,
        eps_f: eps_f.into(),
        phi_plus: ratio(violated, f.size() / 2).into(),
        gamma_plus: gamma.value.into(),
        avg_sensitivity: ratio(bichromatic, f.size() / 2).into(),
        r: matching.as_ref().map(|m| m.avg_length().into()),
        min_changes: changes,
        violated_edges: violated,
        bichromatic_edges: bichromatic,
        gamma_matching_size: gamma.matching.len() as u64,
        window: (params.i_lo, params.i_hi),
        matching_size: matching.as_ref().map(|m| m.size() as u64),
        matching_total_length: matching.as_ref().map(|m| m.total_length),
    })
}

/// `Φ⁺ ≤ I(f)` and `Γ⁺ 2^n ≤ Φ⁺ 2^(n-1)` hold for every report.
pub fn report_is_consistent(m: &MetricsReport) -> bool {
    m.phi_plus.0 <= m.avg_sensitivity.0
        && m.gamma_matching_size <= m.violated_edges
        && m.eps_f.0 <= ratio(1, 2)
        && m.eps_f.0 >= int(0)
}
