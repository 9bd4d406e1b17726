use std::collections::{HashMap, HashSet};

use monotest_core::boolfn::{
    anti_majority, is_monotone_exact, noisy_monotone, random_function, random_monotone, QueryOracle,
    TruthTable,
};
use monotest_core::dichotomy::{lehman_ron_route, verify_paths, RoutingInstance};
use monotest_core::flow::hopcroft_karp;
use monotest_core::hypercube::{
    count_paths_through_pair, level, make_params, middle_points, pair_prob, sample_path, y_set,
    PathSample, Point, TesterParams,
};
use monotest_core::metrics::{
    average_sensitivity, compute_metrics, gamma_plus, min_changes_to_monotone,
    min_length_max_matching, phi_plus, window_params, ViolationGraph,
};
use monotest_core::rational::{int, ratio};
use monotest_core::testers::{combined_params, combined_round, combined_test, path_only_test};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn chi_square(counts: &[u64], total: u64) -> f64 {
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

// Upper 1e-3 quantiles of the chi-square distribution.
const CHI2_999: [(usize, f64); 4] = [(2, 13.816), (3, 16.266), (5, 20.515), (23, 49.728)];

fn chi2_limit(df: usize) -> f64 {
    CHI2_999.iter().find(|(d, _)| *d == df).unwrap().1
}

fn path_index(p: &PathSample) -> usize {
    // Lehmer code
    let order = p.order();
    let n = order.len();
    let mut idx = 0;
    for i in 0..n {
        let smaller = order[i + 1..].iter().filter(|&&c| c < order[i]).count();
        idx = idx * (n - i) + smaller;
    }
    idx
}

#[test]
fn path_sampler_uniform_over_permutations() {
    for (n, draws, seed) in [(3u32, 600_000u64, 1u64), (4, 240_000, 2)] {
        let k = (1..=n as usize).product::<usize>();
        let mut counts = vec![0u64; k];
        let mut r = rng(seed);
        for _ in 0..draws {
            counts[path_index(&sample_path(n, &mut r).unwrap())] += 1;
        }
        assert!(chi_square(&counts, draws) < chi2_limit(k - 1), "n={n}");
        if n == 3 {
            let p = 1.0 / 6.0;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            for &c in &counts {
                assert!((c as f64 / draws as f64 - p).abs() <= 4.0 * se);
            }
        }
    }
}

#[test]
fn layer_vertex_is_uniform() {
    let n = 4;
    let draws = 200_000u64;
    let mut by_layer: Vec<HashMap<u32, u64>> = vec![HashMap::new(); n as usize + 1];
    let mut r = rng(3);
    for _ in 0..draws {
        let p = sample_path(n, &mut r).unwrap();
        for (i, v) in p.vertices().iter().enumerate() {
            *by_layer[i].entry(v.bits()).or_insert(0) += 1;
        }
    }
    for (i, m) in by_layer.iter().enumerate().skip(1).take(n as usize - 1) {
        let counts: Vec<u64> = m.values().copied().collect();
        assert_eq!(counts.len(), [1, 4, 6, 4, 1][i]);
        assert!(chi_square(&counts, draws) < chi2_limit(counts.len() - 1), "layer {i}");
    }
    // n = 3, layer 1
    let draws = 300_000u64;
    let mut counts = [0u64; 8];
    let mut r = rng(4);
    for _ in 0..draws {
        counts[sample_path(3, &mut r).unwrap().vertex_at(1) as usize] += 1;
    }
    let se = ((1.0 / 3.0) * (2.0 / 3.0) / draws as f64).sqrt();
    for x in [1usize, 2, 4] {
        assert!((counts[x] as f64 / draws as f64 - 1.0 / 3.0).abs() <= 4.0 * se);
    }
}

fn binom(n: u32, k: u32) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn mass_outside_middle_layers_is_small() {
    // eps as exact fractions: 3/10 and 1/2
    for n in [64u32, 100, 256] {
        for (num, den) in [(3u32, 10u32), (1, 2)] {
            let p = make_params(n, num as f64 / den as f64, 0.5).unwrap();
            assert!(p.ell < n);
            let outside: BigUint = (0..=n).filter(|&i| !p.in_window(i)).map(|i| binom(n, i)).sum();
            let lhs = outside * BigUint::from(den).pow(5);
            let rhs = BigUint::from(num).pow(5) << n as usize;
            assert!(lhs <= rhs, "n={n} eps={num}/{den}");
        }
    }
}

#[test]
fn middle_points_examples() {
    let p = make_params(100, 0.5, 1.0 / 32.0).unwrap();
    assert_eq!((p.i_lo, p.i_hi), (23, 77));
    assert_eq!(p.window_len(), 55);
    let mut narrow = make_params(3, 0.5, 0.5).unwrap();
    narrow.i_lo = 1;
    narrow.i_hi = 2;
    let path = sample_path(3, &mut rng(5)).unwrap();
    let xs = middle_points(&path, &narrow).unwrap();
    assert_eq!(xs.iter().map(|x| x.level()).collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn s_of_matches_y_set_on_random_paths() {
    let mut r = rng(6);
    for trial in 0..1000u32 {
        let n = 2 + trial % 12;
        let mut p = make_params(n, 0.5, 0.5).unwrap();
        // force positive gaps and narrower windows on some trials
        if trial % 3 == 1 {
            p.tau = (trial % 5) as f64 + 0.5;
        }
        if trial % 4 == 2 && n > 4 {
            p.i_lo = 1;
            p.i_hi = n - 1;
        }
        let path = sample_path(n, &mut r).unwrap();
        let xs = middle_points(&path, &p).unwrap();
        let x = *xs.choose(&mut r).unwrap();
        let ys = y_set(&xs, x, &p).unwrap();
        assert_eq!(ys.len() as u32, p.s_of(x.level()).unwrap());
        // independent scan of the definition
        let scan = xs
            .iter()
            .filter(|z| (z.level() as f64 - x.level() as f64).abs() >= p.tau)
            .count();
        assert_eq!(ys.len(), scan);
    }
}

#[test]
fn path_count_matches_enumeration_at_n7() {
    // x = {0,1}, y = {0,1,2,3,4}: t = 2, u = 3
    let (x, y) = (0b11u32, 0b11111u32);
    let mut perm: Vec<u8> = (0..7).collect();
    let mut hits = 0u64;
    permute(&mut perm, 0, &mut |order| {
        let p = PathSample::from_order(order.to_vec()).unwrap();
        let vs: HashSet<u32> = p.vertices().iter().map(|v| v.bits()).collect();
        if vs.contains(&x) && vs.contains(&y) {
            hits += 1;
        }
    });
    assert_eq!(hits, 24);
    assert_eq!(count_paths_through_pair(2, 3, 7).unwrap(), BigUint::from(24u32));
}

fn permute(a: &mut Vec<u8>, k: usize, f: &mut dyn FnMut(&[u8])) {
    if k == a.len() {
        f(a);
        return;
    }
    for i in k..a.len() {
        a.swap(k, i);
        permute(a, k + 1, f);
        a.swap(k, i);
    }
}

/// Sum of pair_prob over every unordered outcome, by explicit enumeration.
fn total_mass(p: &TesterParams) -> BigRational {
    let n = p.n;
    let mut total = BigRational::zero();
    for x in 0..1u32 << n {
        for y in x..1u32 << n {
            if x & !y == 0 {
                let px = Point::new(x, n).unwrap();
                let py = Point::new(y, n).unwrap();
                let a = pair_prob(px, py, p).unwrap();
                let b = pair_prob(py, px, p).unwrap();
                assert_eq!(a.prob.to_f64(), b.prob.to_f64());
                if let monotest_core::Probability::Exact(q) = a.prob {
                    total += q;
                }
            }
        }
    }
    total
}

#[test]
fn pair_probabilities_sum_to_one() {
    for (n, eps, sigma) in [(1u32, 0.5, 1.0), (3, 0.5, 0.25), (5, 0.1, 0.5), (6, 0.5, 1.0)] {
        let p = make_params(n, eps, sigma).unwrap();
        assert_eq!(total_mass(&p), int(1), "n={n}");
    }
    // positive gaps and narrowed windows
    for (n, lo, hi, tau) in [(6u32, 0u32, 6u32, 2.0), (6, 1, 5, 1.5), (7, 2, 5, 3.0)] {
        let mut p = make_params(n, 0.5, 0.5).unwrap();
        p.i_lo = lo;
        p.i_hi = hi;
        p.tau = tau;
        // draws whose first point has no admissible partner produce no outcome
        let dead = (lo..=hi).filter(|&a| p.s_of(a).unwrap() == 0).count();
        let expected = int(1) - ratio(dead as u64, p.window_len());
        assert_eq!(total_mass(&p), expected, "n={n} tau={tau}");
    }
}

#[test]
fn edge_check_equals_pairwise_check() {
    let mut monotone = 0;
    for n in 1..=4u32 {
        for t in 0..1u64 << (1u32 << n) {
            let f = TruthTable::from_u64(n, t).unwrap();
            let size = 1u32 << n;
            let pairwise = (0..size)
                .all(|x| (0..size).all(|y| x & !y != 0 || !f.get(x) || f.get(y)));
            assert_eq!(is_monotone_exact(&f), pairwise);
            if n == 4 && pairwise {
                monotone += 1;
            }
        }
    }
    assert_eq!(monotone, 168);
}

#[test]
fn min_length_matching_beats_random_maximum_matchings() {
    let f = anti_majority(4).unwrap();
    let m = min_length_max_matching(&f).unwrap();
    let g = ViolationGraph::build(&f).unwrap();
    assert_eq!(m.size(), g.max_matching_size());
    let mut r = rng(7);
    for _ in 0..100 {
        let mut adj = g.adj.clone();
        for row in adj.iter_mut() {
            row.shuffle(&mut r);
        }
        let mate = hopcroft_karp(g.ones.len(), g.zeros.len(), &adj);
        let pairs: Vec<(u32, u32)> = mate
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (g.ones[i], g.zeros[j as usize])))
            .collect();
        assert_eq!(pairs.len(), m.size());
        let total: u64 = pairs.iter().map(|(x, y)| u64::from((x ^ y).count_ones())).sum();
        assert!(total >= m.total_length);
    }
}

/// Backtracking search for `k` vertex-disjoint ascending paths from the
/// sources to the sinks (as sets).
fn brute_force_disjoint(inst: &RoutingInstance) -> bool {
    let sinks: HashSet<u32> = inst.pairs.iter().map(|p| p.1).collect();
    let sources: Vec<u32> = inst.pairs.iter().map(|p| p.0).collect();
    fn extend(
        v: u32,
        top: u32,
        n: u32,
        sinks: &HashSet<u32>,
        used: &mut HashSet<u32>,
        rest: &[u32],
    ) -> bool {
        if level(v) == top {
            return sinks.contains(&v) && place(rest, top, n, sinks, used);
        }
        for b in 0..n {
            let w = v | 1 << b;
            if w != v && !used.contains(&w) {
                used.insert(w);
                if extend(w, top, n, sinks, used, rest) {
                    return true;
                }
                used.remove(&w);
            }
        }
        false
    }
    fn place(rest: &[u32], top: u32, n: u32, sinks: &HashSet<u32>, used: &mut HashSet<u32>) -> bool {
        match rest.split_first() {
            None => true,
            Some((&s, tail)) => {
                if used.contains(&s) {
                    return false;
                }
                used.insert(s);
                let ok = extend(s, top, n, sinks, used, tail);
                if !ok {
                    used.remove(&s);
                }
                ok
            }
        }
    }
    place(&sources, inst.upper_level, inst.n, &sinks, &mut HashSet::new())
}

fn random_instance(n: u32, lo: u32, hi: u32, k: usize, r: &mut ChaCha8Rng) -> Option<RoutingInstance> {
    let lower: Vec<u32> = (0..1u32 << n).filter(|&x| level(x) == lo).collect();
    let upper: Vec<u32> = (0..1u32 << n).filter(|&x| level(x) == hi).collect();
    let mut pairs = Vec::new();
    let mut used_s = HashSet::new();
    let mut used_r = HashSet::new();
    for _ in 0..50 {
        if pairs.len() == k {
            break;
        }
        let s = *lower.choose(r).unwrap();
        let cands: Vec<u32> = upper.iter().copied().filter(|&y| s & !y == 0 && !used_r.contains(&y)).collect();
        if used_s.contains(&s) || cands.is_empty() {
            continue;
        }
        let t = *cands.choose(r).unwrap();
        used_s.insert(s);
        used_r.insert(t);
        pairs.push((s, t));
    }
    (!pairs.is_empty()).then_some(RoutingInstance {
        n,
        lower_level: lo,
        upper_level: hi,
        pairs,
    })
}

#[test]
fn routing_agrees_with_exhaustive_search() {
    let mut r = rng(8);
    for trial in 0..300u32 {
        let n = 3 + trial % 3;
        let lo = trial % 2;
        let hi = (lo + 1 + trial % 3).min(n);
        let k = 1 + (trial % 4) as usize;
        let Some(inst) = random_instance(n, lo, hi, k, &mut r) else { continue };
        assert!(brute_force_disjoint(&inst), "{inst:?}");
        let paths = lehman_ron_route(&inst).unwrap();
        assert!(verify_paths(&inst, &paths));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bftt_round_trip(n in 1u32..=12, seed: u64) {
        let f = random_function(n, seed).unwrap();
        let bytes = f.to_bftt_bytes();
        prop_assert_eq!(bytes.len(), 6 + (1usize << n).div_ceil(8));
        prop_assert_eq!(TruthTable::from_bftt_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn metrics_invariants(n in 1u32..=7, seed: u64, noisy: bool) {
        let f = if noisy {
            noisy_monotone(n, 1 + (seed % 4) as u32, seed).unwrap()
        } else {
            random_function(n, seed).unwrap()
        };
        let m = compute_metrics(&f).unwrap();
        prop_assert!(m.eps_f.0 >= int(0) && m.eps_f.0 <= ratio(1, 2));
        prop_assert!(m.phi_plus.0 <= m.avg_sensitivity.0);
        prop_assert!(m.gamma_plus.0.clone() * int(2) <= m.phi_plus.0);
        prop_assert_eq!(phi_plus(&f), m.phi_plus.0.clone());
        prop_assert_eq!(average_sensitivity(&f), m.avg_sensitivity.0.clone());
        // ε 2^{n-1} ≤ |M| ≤ ε 2^n
        let size = m.matching_size.unwrap();
        prop_assert!(2 * size >= m.min_changes && size <= m.min_changes);
        let mm = min_length_max_matching(&f).unwrap();
        mm.validate(&f).unwrap();
        prop_assert_eq!(mm.per_dimension.iter().sum::<u64>(), mm.total_length);
        prop_assert_eq!(m.min_changes == 0, is_monotone_exact(&f));
        let p = window_params(n, &m.eps_f.0).unwrap();
        let g = gamma_plus(&f, &p).unwrap();
        let mut seen = HashSet::new();
        for &(x, y) in &g.matching {
            prop_assert!(f.get(x) && !f.get(y) && (x ^ y).count_ones() == 1 && x & !y == 0);
            prop_assert!(seen.insert(x) && seen.insert(y));
        }
    }

    #[test]
    fn monotone_inputs_never_rejected(n in 1u32..=16, seed: u64) {
        let f = random_monotone(n, seed).unwrap();
        prop_assert!(is_monotone_exact(&f));
        prop_assert_eq!(min_changes_to_monotone(&f).unwrap_or(0), 0);
        let mut o = QueryOracle::new(&f);
        let run = combined_test(&mut o, 0.5, 0.5, &mut rng(seed)).unwrap();
        prop_assert!(!run.verdict.rejected);
        let p = make_params(n, 0.5, 0.5).unwrap();
        let run = path_only_test(&mut o, &p, 200, &mut rng(seed ^ 1)).unwrap();
        prop_assert!(!run.verdict.rejected);
    }

    #[test]
    fn queries_are_oblivious_and_witnesses_valid(n in 2u32..=10, s1: u64, s2: u64, seed: u64) {
        let f = random_function(n, s1).unwrap();
        let g = random_function(n, s2).unwrap();
        let params = combined_params(n, 0.5).unwrap();
        let play = |t: &TruthTable| {
            let mut o = QueryOracle::with_log(t);
            let mut r = rng(seed);
            let mut witness = None;
            let mut queries = 0;
            for _ in 0..200 {
                let v = combined_round(&mut o, &params, &mut r).unwrap();
                queries += v.queries_used;
                prop_assert!(v.queries_used <= 2);
                if let Some(w) = v.witness {
                    witness = Some(w);
                    break;
                }
            }
            prop_assert_eq!(queries, o.query_count());
            Ok((o.query_log().unwrap().to_vec(), witness))
        };
        let (lf, wf) = play(&f)?;
        let (lg, wg) = play(&g)?;
        let k = lf.len().min(lg.len());
        prop_assert_eq!(&lf[..k], &lg[..k]);
        for (t, w) in [(&f, wf), (&g, wg)] {
            if let Some(w) = w {
                prop_assert!(w.reverify(&mut QueryOracle::new(t)).unwrap());
            }
        }
    }
}
