//! Exact verifiers for the dichotomy inequality and the constructive steps
//! behind it: per-dimension edge counts, disjoint-path routing between two
//! layers, violated-edge extraction, and alternating sequences.

use std::collections::HashSet;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::boolfn::TruthTable;
use crate::error::{Error, Result};
use crate::flow::Dinic;
use crate::hypercube::{full_mask, level, precedes};
use crate::metrics::{
    gamma_plus, min_changes_to_monotone, min_length_max_matching, window_params, Matching,
    ViolationGraph, MIN_LENGTH_MAX_DIM, PAIR_MAX_DIM,
};
use crate::rational::{int, ratio, Exact};

/// Dimension limit for the extraction pipeline.
pub const EXTRACTION_MAX_DIM: u32 = 10;

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub n: u32,
    pub eps_f: Exact,
    pub phi_plus: Exact,
    pub gamma_plus: Exact,
    pub r: Exact,
    pub product: Exact,
    /// `eps_f² / 32`.
    pub bound: Exact,
    pub pass: bool,
    /// `Γ⁺ ≥ eps_f / (32 r)`.
    pub piece3_pass: bool,
    /// `Φ⁺ ≥ r · eps_f`.
    pub piece4_pass: bool,
    pub per_dim_pass: bool,
    pub matching_size: u64,
    pub violated_edges: u64,
}

impl DichotomyReport {
    pub fn all_pass(&self) -> bool {
        self.pass && self.piece3_pass && self.piece4_pass && self.per_dim_pass
    }
}

/// Checks `Φ⁺·Γ⁺ ≥ ε_f²/32` together with the two lemma conclusions and
/// the per-dimension inequality, all in exact arithmetic.
pub fn verify_dichotomy(f: &TruthTable) -> Result<DichotomyReport> {
    let n = f.dim();
    if n > MIN_LENGTH_MAX_DIM {
        return Err(Error::Dimension {
            n,
            max: MIN_LENGTH_MAX_DIM,
        });
    }
    let eps_f = ratio(min_changes_to_monotone(f)?, f.size());
    let by_dim = f.violated_edges_by_dim();
    let violated: u64 = by_dim.iter().sum();
    let phi = ratio(violated, f.size() / 2);
    let params = window_params(n, &eps_f)?;
    let gamma = gamma_plus(f, &params)?.value;
    let m = min_length_max_matching(f)?;
    let r = m.avg_length();
    let product = &phi * &gamma;
    let bound = &eps_f * &eps_f / int(32);
    let vacuous = eps_f.is_zero() || r.is_zero();
    let pass = eps_f.is_zero() || product >= bound;
    let piece3_pass = vacuous || gamma >= &eps_f / (int(32) * &r);
    let piece4_pass = vacuous || phi >= &r * &eps_f;
    let per_dim_pass = by_dim
        .iter()
        .zip(&m.per_dimension)
        .all(|(v, mi)| v >= mi);
    Ok(DichotomyReport {
        n,
        eps_f: eps_f.into(),
        phi_plus: phi.into(),
        gamma_plus: gamma.into(),
        r: r.into(),
        product: product.into(),
        bound: bound.into(),
        pass,
        piece3_pass,
        piece4_pass,
        per_dim_pass,
        matching_size: m.size() as u64,
        violated_edges: violated,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerDimensionCheck {
    /// Violated edges across each dimension.
    pub violated: Vec<u64>,
    /// Matching pairs crossing each dimension.
    pub matched: Vec<u64>,
    pub pass: Vec<bool>,
}

impl PerDimensionCheck {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Violated dimension-`i` edges versus `M_i` for the minimum-length matching.
pub fn per_dimension_check(f: &TruthTable) -> Result<PerDimensionCheck> {
    let m = min_length_max_matching(f)?;
    Ok(per_dimension_check_with(f, &m))
}

pub fn per_dimension_check_with(f: &TruthTable, m: &Matching) -> PerDimensionCheck {
    let violated = f.violated_edges_by_dim();
    let pass = violated
        .iter()
        .zip(&m.per_dimension)
        .map(|(v, mi)| v >= mi)
        .collect();
    PerDimensionCheck {
        violated,
        matched: m.per_dimension.clone(),
        pass,
    }
}

/// Sources on one layer, sinks on a higher one, paired by containment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutingInstance {
    pub n: u32,
    pub lower_level: u32,
    pub upper_level: u32,
    /// `(source, sink)` with `source ≺ sink`.
    pub pairs: Vec<(u32, u32)>,
}

impl RoutingInstance {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedInstance(m));
        if self.n == 0 || self.n > PAIR_MAX_DIM {
            return Err(Error::Dimension {
                n: self.n,
                max: PAIR_MAX_DIM,
            });
        }
        if self.lower_level >= self.upper_level || self.upper_level > self.n {
            return bad(format!(
                "layers {} -> {} are not ascending",
                self.lower_level, self.upper_level
            ));
        }
        let mask = full_mask(self.n);
        let mut seen_s = HashSet::new();
        let mut seen_r = HashSet::new();
        for &(s, r) in &self.pairs {
            if s > mask || r > mask {
                return bad(format!("point out of range in ({s:#b}, {r:#b})"));
            }
            if level(s) != self.lower_level || level(r) != self.upper_level {
                return bad(format!("({s:#b}, {r:#b}) not on the stated layers"));
            }
            if !precedes(s, r) {
                return bad(format!("({s:#b}, {r:#b}) is not a comparable pair"));
            }
            if !seen_s.insert(s) || !seen_r.insert(r) {
                return bad(format!("endpoint repeated in ({s:#b}, {r:#b})"));
            }
        }
        Ok(())
    }
}

/// Ascending vertex sequences, one per source.
pub type PathSet = Vec<Vec<u32>>;

/// Maximum set of vertex-disjoint ascending paths from the sources to the
/// sinks (as sets), via unit vertex capacities on layers `lower..=upper`.
/// Fails with `RoutingFailed` if fewer than `|pairs|` paths exist.
pub fn lehman_ron_route(inst: &RoutingInstance) -> Result<PathSet> {
    inst.validate()?;
    let n = inst.n;
    let (lo, hi) = (inst.lower_level, inst.upper_level);
    let size = 1usize << n;
    // vertices above some source (up to `hi`) and below some sink (down to `lo`)
    let mut up = vec![false; size];
    let mut down = vec![false; size];
    let mut frontier: Vec<u32> = inst.pairs.iter().map(|p| p.0).collect();
    for &v in &frontier {
        up[v as usize] = true;
    }
    for _ in lo..hi {
        let mut next = Vec::new();
        for &v in &frontier {
            for b in 0..n {
                let w = v | 1 << b;
                if w != v && !up[w as usize] {
                    up[w as usize] = true;
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    let mut frontier: Vec<u32> = inst.pairs.iter().map(|p| p.1).collect();
    for &v in &frontier {
        down[v as usize] = true;
    }
    for _ in lo..hi {
        let mut next = Vec::new();
        for &v in &frontier {
            for b in 0..n {
                let w = v & !(1 << b);
                if w != v && !down[w as usize] {
                    down[w as usize] = true;
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    let verts: Vec<u32> = (0..size as u32)
        .filter(|&v| up[v as usize] && down[v as usize])
        .collect();
    let mut id = vec![u32::MAX; size];
    for (k, &v) in verts.iter().enumerate() {
        id[v as usize] = k as u32;
    }
    let k = verts.len();
    let (src, snk) = (2 * k, 2 * k + 1);
    let mut g = Dinic::new(2 * k + 2);
    for (a, &v) in verts.iter().enumerate() {
        g.add_edge(2 * a, 2 * a + 1, 1);
        if level(v) < hi {
            for b in 0..n {
                let w = v | 1 << b;
                if w != v && id[w as usize] != u32::MAX {
                    g.add_edge(2 * a + 1, 2 * id[w as usize] as usize, 1);
                }
            }
        }
    }
    let mut sources: Vec<u32> = inst.pairs.iter().map(|p| p.0).collect();
    let mut sinks: Vec<u32> = inst.pairs.iter().map(|p| p.1).collect();
    sources.sort_unstable();
    sinks.sort_unstable();
    for &s in &sources {
        g.add_edge(src, 2 * id[s as usize] as usize, 1);
    }
    for &r in &sinks {
        g.add_edge(2 * id[r as usize] as usize + 1, snk, 1);
    }
    let found = g.max_flow(src, snk) as usize;
    if found < inst.pairs.len() {
        return Err(Error::RoutingFailed {
            found,
            requested: inst.pairs.len(),
        });
    }
    let mut paths = Vec::with_capacity(found);
    for &s in &sources {
        let mut path = vec![s];
        let mut node = 2 * id[s as usize] as usize + 1;
        loop {
            let next = g
                .flow_successors(node)
                .map(|(to, _)| to)
                .next()
                .expect("flow is conserved");
            if next == snk {
                break;
            }
            let v = verts[next / 2];
            path.push(v);
            node = next + 1;
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Independent check of a routing result: one path per source, each
/// ascending one level per step from a source to a sink, pairwise
/// vertex-disjoint, endpoints covering sources and sinks as sets.
pub fn verify_paths(inst: &RoutingInstance, paths: &PathSet) -> bool {
    if paths.len() != inst.pairs.len() {
        return false;
    }
    let sources: HashSet<u32> = inst.pairs.iter().map(|p| p.0).collect();
    let sinks: HashSet<u32> = inst.pairs.iter().map(|p| p.1).collect();
    let mut used = HashSet::new();
    let mut starts = HashSet::new();
    let mut ends = HashSet::new();
    for p in paths {
        let (Some(&first), Some(&last)) = (p.first(), p.last()) else {
            return false;
        };
        if p.len() as u32 != inst.upper_level - inst.lower_level + 1 {
            return false;
        }
        for w in p.windows(2) {
            let diff = w[0] ^ w[1];
            if diff.count_ones() != 1 || w[0] & diff != 0 {
                return false;
            }
        }
        if !p.iter().all(|v| used.insert(*v)) {
            return false;
        }
        starts.insert(first);
        ends.insert(last);
    }
    starts == sources && ends == sinks
}

#[derive(Debug, Clone, Serialize)]
pub struct RoutedGroup {
    pub instance: RoutingInstance,
    pub paths: PathSet,
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Extraction {
    pub matching_size: u64,
    pub matching_total_length: u64,
    pub window: (u32, u32),
    pub groups: Vec<RoutedGroup>,
    /// One violated edge per routed path; may repeat edges.
    pub f_edges: Vec<(u32, u32)>,
    /// Greedy matching drawn from `f_edges`.
    pub matching: Vec<(u32, u32)>,
    /// Largest number of `f_edges` entries meeting one vertex. Diagnostic.
    pub max_degree_f: usize,
    /// `|F| ≥ |M| / 4`.
    pub f_size_pass: bool,
    /// `|E| ≥ |M| / (16 r)`.
    pub size_pass: bool,
    /// Every edge of `matching` is violated and no vertex repeats.
    pub edges_valid: bool,
}

impl Extraction {
    pub fn all_pass(&self) -> bool {
        self.f_size_pass
            && self.size_pass
            && self.edges_valid
            && self.groups.iter().all(|g| g.verified)
    }
}

/// Groups `m` by the level pair of its endpoints (both in the middle window,
/// level gap at most `2r`), routes each group, keeps the first violated edge
/// of every path and extracts a matching greedily.
pub fn extract_violated_edge_matching(f: &TruthTable, m: &Matching) -> Result<Extraction> {
    let n = f.dim();
    if n > EXTRACTION_MAX_DIM {
        return Err(Error::Dimension {
            n,
            max: EXTRACTION_MAX_DIM,
        });
    }
    if m.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.n,
        });
    }
    m.validate(f)?;
    let eps_f = ratio(min_changes_to_monotone(f)?, f.size());
    let params = window_params(n, &eps_f)?;
    let size = m.size() as u64;
    let total = m.total_length;

    let mut buckets = vec![Vec::new(); ((n + 1) * (n + 1)) as usize];
    for &(x, y) in &m.pairs {
        let (a, b) = (level(x), level(y));
        if params.in_window(a)
            && params.in_window(b)
            && u64::from(b - a) * size <= 2 * total
        {
            buckets[(a * (n + 1) + b) as usize].push((x, y));
        }
    }
    let mut groups = Vec::new();
    let mut f_edges = Vec::new();
    for (key, pairs) in buckets.into_iter().enumerate() {
        if pairs.is_empty() {
            continue;
        }
        let key = key as u32;
        let instance = RoutingInstance {
            n,
            lower_level: key / (n + 1),
            upper_level: key % (n + 1),
            pairs,
        };
        let paths = lehman_ron_route(&instance)?;
        for p in &paths {
            let edge = p
                .windows(2)
                .find(|w| f.get(w[0]) && !f.get(w[1]))
                .map(|w| (w[0], w[1]))
                .ok_or_else(|| {
                    Error::InvalidMatching("routed path without a violated edge".into())
                })?;
            f_edges.push(edge);
        }
        let verified = verify_paths(&instance, &paths);
        groups.push(RoutedGroup {
            instance,
            paths,
            verified,
        });
    }

    let mut used = HashSet::new();
    let mut matching = Vec::new();
    let mut degree = std::collections::HashMap::new();
    for &(x, y) in &f_edges {
        *degree.entry(x).or_insert(0usize) += 1;
        *degree.entry(y).or_insert(0usize) += 1;
        if !used.contains(&x) && !used.contains(&y) {
            used.insert(x);
            used.insert(y);
            matching.push((x, y));
        }
    }
    let edges_valid = matching.iter().all(|&(x, y)| {
        (x ^ y).count_ones() == 1
            && precedes(x, y)
            && f.get(x)
            && !f.get(y)
            && params.in_window(level(x))
            && params.in_window(level(y))
    });
    let e = matching.len() as u64;
    Ok(Extraction {
        matching_size: size,
        matching_total_length: total,
        window: (params.i_lo, params.i_hi),
        groups,
        max_degree_f: degree.values().copied().max().unwrap_or(0),
        f_size_pass: 4 * f_edges.len() as u64 >= size,
        size_pass: size == 0 || 16 * e * total >= size * size,
        f_edges,
        matching,
        edges_valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedX,
    Unmatched,
    CycleGuard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepLabel {
    H,
    M,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlternatingSequence {
    pub origin: u32,
    pub steps: Vec<u32>,
    pub termination: Termination,
    /// First dimension-`i` edge of the walk that is violated, as `(lower, upper)`.
    pub violated_h_edge: Option<(u32, u32)>,
}

impl AlternatingSequence {
    /// Label of the move from `steps[k]` to `steps[k + 1]`.
    pub fn label(k: usize) -> StepLabel {
        if k.is_multiple_of(2) {
            StepLabel::H
        } else {
            StepLabel::M
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlternatingReport {
    pub dim: u32,
    pub m_i: u64,
    pub sequences: Vec<AlternatingSequence>,
    /// Sequences up to vertex set.
    pub distinct_sequences: usize,
    pub distinct_violated_h_edges: usize,
    pub all_contain_violated: bool,
    /// `distinct_violated_h_edges ≥ m_i`.
    pub count_pass: bool,
}

impl AlternatingReport {
    pub fn pass(&self) -> bool {
        self.all_contain_violated && self.count_pass
    }
}

/// Walks from every endpoint of the pairs crossing dimension `i`,
/// alternating the dimension-`i` perfect matching with `m`, and checks each
/// walk meets a violated dimension-`i` edge.
pub fn alternating_sequences(f: &TruthTable, m: &Matching, i: u32) -> Result<AlternatingReport> {
    let n = f.dim();
    if m.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.n,
        });
    }
    if i >= n {
        return Err(Error::InvalidParameter(format!("dimension {i} out of range")));
    }
    m.validate(f)?;
    if m.size() != ViolationGraph::build(f)?.max_matching_size() {
        return Err(Error::InvalidMatching("matching is not maximum".into()));
    }
    let partner = m.partner_map();
    let bit = 1u32 << i;
    let mut in_x = vec![false; 1usize << n];
    let mut xs = Vec::new();
    for &(x, y) in &m.pairs {
        if (x ^ y) & bit != 0 {
            for p in [x, y] {
                in_x[p as usize] = true;
                xs.push(p);
            }
        }
    }
    xs.sort_unstable();
    let h_violation = |a: u32, b: u32| {
        let (lo, hi) = if a & bit == 0 { (a, b) } else { (b, a) };
        (f.get(lo) && !f.get(hi)).then_some((lo, hi))
    };

    let mut sequences = Vec::with_capacity(xs.len());
    let mut distinct = HashSet::new();
    let mut violated_edges = HashSet::new();
    for &x in &xs {
        let mut steps = vec![x];
        let mut visited = HashSet::from([x]);
        let mut violated_h_edge = None;
        let termination = loop {
            let cur = *steps.last().unwrap();
            let next = if (steps.len() - 1) % 2 == 0 {
                cur ^ bit
            } else {
                if in_x[cur as usize] {
                    break Termination::ReachedX;
                }
                match partner[cur as usize] {
                    u32::MAX => break Termination::Unmatched,
                    p => p,
                }
            };
            if !visited.insert(next) {
                break Termination::CycleGuard;
            }
            if (steps.len() - 1) % 2 == 0 {
                if let Some(e) = h_violation(cur, next) {
                    violated_edges.insert(e);
                    violated_h_edge.get_or_insert(e);
                }
            }
            steps.push(next);
        };
        let mut key = steps.clone();
        key.sort_unstable();
        distinct.insert(key);
        sequences.push(AlternatingSequence {
            origin: x,
            steps,
            termination,
            violated_h_edge,
        });
    }
    let m_i = m.per_dimension[i as usize];
    Ok(AlternatingReport {
        dim: i,
        m_i,
        all_contain_violated: sequences.iter().all(|s| s.violated_h_edge.is_some()),
        distinct_sequences: distinct.len(),
        distinct_violated_h_edges: violated_edges.len(),
        count_pass: violated_edges.len() as u64 >= m_i,
        sequences,
    })
}

/// Everything checked for one function in the lemma sweep.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    pub dichotomy: DichotomyReport,
    pub per_dimension: PerDimensionCheck,
    pub extraction: Extraction,
    pub alternating: Vec<AlternatingReport>,
}

impl LemmaCheck {
    pub fn all_pass(&self) -> bool {
        self.dichotomy.all_pass()
            && self.per_dimension.all_pass()
            && self.extraction.all_pass()
            && self.alternating.iter().all(AlternatingReport::pass)
    }
}

pub fn check_lemmas(f: &TruthTable) -> Result<LemmaCheck> {
    let dichotomy = verify_dichotomy(f)?;
    let m = min_length_max_matching(f)?;
    let per_dimension = per_dimension_check_with(f, &m);
    let extraction = extract_violated_edge_matching(f, &m)?;
    let alternating = (0..f.dim())
        .map(|i| alternating_sequences(f, &m, i))
        .collect::<Result<_>>()?;
    Ok(LemmaCheck {
        dichotomy,
        per_dimension,
        extraction,
        alternating,
    })
}

/// `ε_f² / 32` for a change count at dimension `n`.
pub fn dichotomy_bound(changes: u64, n: u32) -> BigRational {
    let e = ratio(changes, 1u64 << n);
    &e * &e / int(32)
}
