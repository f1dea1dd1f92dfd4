//! MAP estimation as max-weight perfect bipartite matching, the factorial
//! brute-force oracle, and cycle-type machinery for pairs of matchings.

use std::collections::BTreeMap;

use crate::dist::{DatabasePair, Matching, ProductForm};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Two matchings whose totals differ by at most this much are treated as
/// tied; ties resolve to the lexicographically smallest permutation. The
/// same tolerance drives the brute-force oracle so the two agree on
/// degenerate instances.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Hard cap for the factorial oracle.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Log-likelihood weights `w[u][v]`; entries may be `-inf` (forbidden
/// cells) but never NaN or `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    mat: Mat,
}

impl WeightMatrix {
    pub fn new(mat: Mat) -> Result<Self> {
        if mat.rows() != mat.cols() {
            return Err(Error::DimensionMismatch {
                context: format!("weight matrix is {}x{}", mat.rows(), mat.cols()),
            });
        }
        if mat.data().iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::DimensionMismatch {
                context: "weight matrix contains NaN or +inf".into(),
            });
        }
        Ok(WeightMatrix { mat })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.mat.rows()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.mat.get(u, v)
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    /// Total weight of a matching, summed in user order.
    pub fn matching_weight(&self, m: &Matching) -> f64 {
        (0..self.n()).map(|u| self.get(u, m.get(u))).sum()
    }
}

/// Builds the log-likelihood weight matrix `w[u][v] = sum_k ln q[a_uk][b_vk]`.
pub fn build_weights(pair: &DatabasePair, model: &ProductForm) -> Result<WeightMatrix> {
    if pair.n() > 0 && pair.reps() != model.reps() as usize {
        return Err(Error::DimensionMismatch {
            context: format!(
                "pair has reps = {}, model has reps = {}",
                pair.reps(),
                model.reps()
            ),
        });
    }
    let q = model.base();
    let log_q: Vec<f64> = q
        .matrix()
        .data()
        .iter()
        .map(|&p| if p == 0.0 { f64::NEG_INFINITY } else { p.ln() })
        .collect();
    let cols = q.size_b();
    let n = pair.n();
    let mut w = Mat::zeros(n, n);
    for u in 0..n {
        let ea = pair.entry_a(u);
        for v in 0..n {
            let eb = pair.entry_b(v);
            let mut total = 0.0;
            for k in 0..ea.len() {
                total += log_q[ea[k] as usize * cols + eb[k] as usize];
            }
            w.set(u, v, total);
        }
    }
    WeightMatrix::new(w)
}

/// The MAP estimate: max-weight matching on the log-likelihood weights,
/// lexicographically smallest among ties.
pub fn map_estimate(pair: &DatabasePair, model: &ProductForm) -> Result<Matching> {
    max_weight_matching(&build_weights(pair, model)?)
}

/// Factorial-oracle MAP estimate; limited to `n <= 8`.
pub fn brute_force_map(pair: &DatabasePair, model: &ProductForm) -> Result<Matching> {
    brute_force_matching(&build_weights(pair, model)?)
}

struct HungarianOutcome {
    row_to_col: Vec<usize>,
    potential_u: Vec<f64>,
    potential_v: Vec<f64>,
}

/// Classic O(n^3) assignment on a square min-cost matrix, returning the
/// assignment together with the dual potentials (used to recover the set
/// of tight edges).
fn hungarian_min_cost(cost: &Mat) -> HungarianOutcome {
    let n = cost.rows();
    // 1-indexed arrays with a virtual column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned_row = vec![0usize; n + 1]; // column -> row
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if assigned_row[j] > 0 {
            row_to_col[assigned_row[j] - 1] = j - 1;
        }
    }
    HungarianOutcome {
        row_to_col,
        potential_u: u,
        potential_v: v,
    }
}

/// Max-weight perfect matching with deterministic tie-breaking.
///
/// Forbidden (`-inf`) cells are mapped to a finite sentinel strictly
/// dominated by every all-finite matching; if the solver still selects
/// one, no finite-weight perfect matching exists. Among matchings tied
/// within [`TIE_TOLERANCE`] the lexicographically smallest permutation is
/// returned, found by a local-search pass over zero-reduced-cost edges.
pub fn max_weight_matching(w: &WeightMatrix) -> Result<Matching> {
    let n = w.n();
    let max_abs_finite = w
        .matrix()
        .data()
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if w.matrix().data().iter().all(|v| !v.is_finite()) {
        return Err(Error::Infeasible);
    }
    // One sentinel edge must cost more than any all-finite matching can
    // recover, so it is more negative than 2n * max|w| + 1.
    let sentinel = -(2.0 * n as f64 * max_abs_finite.max(1.0) + 1.0);
    let mut cost = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let wij = w.get(i, j);
            cost.set(i, j, if wij.is_finite() { -wij } else { -sentinel });
        }
    }

    let outcome = hungarian_min_cost(&cost);
    for (i, &j) in outcome.row_to_col.iter().enumerate() {
        if !w.get(i, j).is_finite() {
            return Err(Error::Infeasible);
        }
    }

    // Tight edges (zero reduced cost up to roundoff) are exactly the edges
    // optimal matchings may use.
    let tol = TIE_TOLERANCE * max_abs_finite.max(1.0);
    let mut tight: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut all_unique = true;
    for i in 0..n {
        for j in 0..n {
            if !w.get(i, j).is_finite() {
                continue;
            }
            let rc = cost.get(i, j) - outcome.potential_u[i + 1] - outcome.potential_v[j + 1];
            if rc.abs() <= tol {
                tight[i].push(j);
            }
        }
        if tight[i].len() != 1 {
            all_unique = false;
        }
        if !tight[i].contains(&outcome.row_to_col[i]) {
            tight[i].push(outcome.row_to_col[i]);
            tight[i].sort_unstable();
        }
    }

    let perm = if all_unique {
        outcome.row_to_col
    } else {
        let lex = lexicographic_min_matching(&tight, outcome.row_to_col.clone());
        // Guard against false ties degrading the optimum: keep the solver's
        // matching if the lexicographic pass lost weight beyond roundoff.
        let lex_m = Matching::new(lex.clone()).expect("lex pass preserves bijectivity");
        let hun_m = Matching::new(outcome.row_to_col.clone()).expect("solver returns a bijection");
        if w.matching_weight(&lex_m) < w.matching_weight(&hun_m) - tol {
            outcome.row_to_col
        } else {
            lex
        }
    };
    Matching::new(perm)
}

/// Lexicographically smallest perfect matching within the tight-edge
/// graph, starting from a known perfect matching of that graph. Rows are
/// fixed in order; a row moves to a smaller column only when the displaced
/// row can re-match among the rows not yet fixed.
fn lexicographic_min_matching(tight: &[Vec<usize>], init: Vec<usize>) -> Vec<usize> {
    let n = init.len();
    let mut row_to_col = init;
    let mut col_to_row: Vec<Option<usize>> = vec![None; n];
    for (r, &c) in row_to_col.iter().enumerate() {
        col_to_row[c] = Some(r);
    }
    for row in 0..n {
        let current = row_to_col[row];
        for &cand in tight[row].iter() {
            if cand >= current {
                break;
            }
            let owner = match col_to_row[cand] {
                Some(r) => r,
                None => unreachable!("perfect matching covers every column"),
            };
            if owner < row {
                continue; // column already fixed to an earlier row
            }
            row_to_col[row] = cand;
            col_to_row[cand] = Some(row);
            col_to_row[current] = None;
            row_to_col[owner] = usize::MAX;
            let mut visited = vec![false; n];
            if augment(owner, row, tight, &mut row_to_col, &mut col_to_row, &mut visited) {
                break;
            }
            // revert the tentative move
            row_to_col[owner] = cand;
            col_to_row[cand] = Some(owner);
            row_to_col[row] = current;
            col_to_row[current] = Some(row);
        }
    }
    row_to_col
}

/// Kuhn-style augmenting search for `row` over tight edges, treating rows
/// `<= fixed_up_to` (and hence their columns) as immovable.
fn augment(
    row: usize,
    fixed_up_to: usize,
    tight: &[Vec<usize>],
    row_to_col: &mut [usize],
    col_to_row: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &c in tight[row].iter() {
        if visited[c] {
            continue;
        }
        visited[c] = true;
        match col_to_row[c] {
            None => {
                row_to_col[row] = c;
                col_to_row[c] = Some(row);
                return true;
            }
            Some(owner) => {
                if owner <= fixed_up_to {
                    continue;
                }
                if augment(owner, fixed_up_to, tight, row_to_col, col_to_row, visited) {
                    row_to_col[row] = c;
                    col_to_row[c] = Some(row);
                    return true;
                }
            }
        }
    }
    false
}

/// Exhaustive max-weight matching over all n! permutations in
/// lexicographic order, with the same tie semantics as
/// [`max_weight_matching`]. Guarded to `n <= 8`.
pub fn brute_force_matching(w: &WeightMatrix) -> Result<Matching> {
    let n = w.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            context: format!("n = {n} exceeds the factorial-oracle limit {BRUTE_FORCE_LIMIT}"),
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let total: f64 = perm
            .iter()
            .enumerate()
            .map(|(u, &v)| w.get(u, v))
            .sum();
        if total > f64::NEG_INFINITY {
            match &best {
                // strictly-better beyond the tie tolerance replaces; a tie
                // keeps the earlier (lexicographically smaller) permutation
                Some((_, best_total)) if total <= best_total + TIE_TOLERANCE => {}
                _ => best = Some((perm.clone(), total)),
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    match best {
        Some((perm, _)) => Matching::new(perm),
        None => Err(Error::Infeasible),
    }
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Multiset of cycle lengths of the permutation composed from two
/// matchings (second inverted, then first). The length-1 count is the
/// overlap; lengths weighted by counts sum to n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleType {
    counts: BTreeMap<usize, usize>,
    n: usize,
}

impl CycleType {
    pub fn from_counts(counts: BTreeMap<usize, usize>) -> Self {
        let n = counts.iter().map(|(len, c)| len * c).sum();
        CycleType { counts, n }
    }

    pub fn counts(&self) -> &BTreeMap<usize, usize> {
        &self.counts
    }

    pub fn count(&self, len: usize) -> usize {
        self.counts.get(&len).copied().unwrap_or(0)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// d = n - |m1 ∩ m2|, the number of users matched differently.
    pub fn difference(&self) -> usize {
        self.n - self.count(1)
    }
}

/// Cycle type of `m2^T ∘ m1`, i.e. of `u -> m2^{-1}(m1(u))`.
pub fn cycle_type(m1: &Matching, m2: &Matching) -> Result<CycleType> {
    if m1.n() != m2.n() {
        return Err(Error::DimensionMismatch {
            context: format!("matchings have n = {} and n = {}", m1.n(), m2.n()),
        });
    }
    let n = m1.n();
    let inv2 = m2.inverse();
    let mut seen = vec![false; n];
    let mut counts = BTreeMap::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut u = start;
        while !seen[u] {
            seen[u] = true;
            len += 1;
            u = inv2.get(m1.get(u));
        }
        *counts.entry(len).or_insert(0) += 1;
    }
    Ok(CycleType { counts, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample_pair, JointDistribution};
    use proptest::prelude::*;

    fn canonical_q() -> JointDistribution {
        JointDistribution::new(&[vec![0.45, 0.05], vec![0.05, 0.45]]).unwrap()
    }

    #[test]
    fn build_weights_single_user() {
        let model = ProductForm::new(canonical_q(), 2);
        let pair = DatabasePair::new(vec![vec![0, 1]], vec![vec![1, 1]], &model).unwrap();
        let w = build_weights(&pair, &model).unwrap();
        let ll = crate::dist::log_likelihood(&pair, &Matching::identity(1), &model).unwrap();
        assert!((w.get(0, 0) - ll).abs() < 1e-15);
    }

    #[test]
    fn build_weights_forbidden_diagonal() {
        let q = JointDistribution::new(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let model = ProductForm::new(q, 1);
        let pair = DatabasePair::new(vec![vec![0], vec![1]], vec![vec![1], vec![0]], &model).unwrap();
        let w = build_weights(&pair, &model).unwrap();
        assert_eq!(w.get(0, 0), f64::NEG_INFINITY);
        assert_eq!(w.get(1, 1), f64::NEG_INFINITY);
        assert!((w.get(0, 1) - 0.5f64.ln()).abs() < 1e-15);
        assert!((w.get(1, 0) - 0.5f64.ln()).abs() < 1e-15);
        let m = max_weight_matching(&w).unwrap();
        assert_eq!(m.perm(), &[1, 0]);
    }

    #[test]
    fn build_weights_per_cell_oracle() {
        let model = ProductForm::new(canonical_q(), 3);
        let (pair, _) = sample_pair(&model, 4, 11);
        let w = build_weights(&pair, &model).unwrap();
        for u in 0..4 {
            for v in 0..4 {
                let mut expect = 0.0;
                for k in 0..3 {
                    expect += canonical_q()
                        .get(pair.entry_a(u)[k] as usize, pair.entry_b(v)[k] as usize)
                        .ln();
                }
                assert!((w.get(u, v) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_user_matching() {
        let model = ProductForm::new(canonical_q(), 1);
        let (pair, _) = sample_pair(&model, 1, 5);
        let m = map_estimate(&pair, &model).unwrap();
        assert_eq!(m.perm(), &[0]);
    }

    #[test]
    fn only_feasible_matching_wins() {
        let w = WeightMatrix::new(
            Mat::from_rows(&[
                vec![0.0, f64::NEG_INFINITY],
                vec![f64::NEG_INFINITY, 0.0],
            ])
            .unwrap(),
        )
        .unwrap();
        let m = max_weight_matching(&w).unwrap();
        assert_eq!(m.perm(), &[0, 1]);
    }

    #[test]
    fn infeasible_when_all_matchings_blocked() {
        // both perfect matchings traverse a forbidden cell
        let w = WeightMatrix::new(
            Mat::from_rows(&[
                vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
                vec![0.0, 0.0],
            ])
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(max_weight_matching(&w), Err(Error::Infeasible)));
        assert!(matches!(brute_force_matching(&w), Err(Error::Infeasible)));
    }

    #[test]
    fn sentinel_never_beats_feasible() {
        // a single forbidden cell with large finite weights elsewhere
        let w = WeightMatrix::new(
            Mat::from_rows(&[
                vec![f64::NEG_INFINITY, 100.0],
                vec![100.0, -100.0],
            ])
            .unwrap(),
        )
        .unwrap();
        let m = max_weight_matching(&w).unwrap();
        // the all-finite matching (0->1, 1->0) wins even though the
        // diagonal would score higher if the sentinel were mild
        assert_eq!(m.perm(), &[1, 0]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let w = WeightMatrix::new(Mat::from_rows(&vec![vec![1.0; 3]; 3]).unwrap()).unwrap();
        let m = max_weight_matching(&w).unwrap();
        assert_eq!(m.perm(), &[0, 1, 2]);
        let b = brute_force_matching(&w).unwrap();
        assert_eq!(b.perm(), &[0, 1, 2]);
    }

    #[test]
    fn brute_force_two_candidates() {
        let w = WeightMatrix::new(Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap()).unwrap();
        let m = brute_force_matching(&w).unwrap();
        assert_eq!(m.perm(), &[0, 1]);
    }

    #[test]
    fn brute_force_recovers_distinct_correlated_entries() {
        // fully correlated q: distinct entry vectors identify the matching
        let q = JointDistribution::new(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let model = ProductForm::new(q, 8);
        let (pair, truth) = sample_pair(&model, 5, 31);
        let distinct: std::collections::HashSet<_> =
            (0..5).map(|u| pair.entry_a(u).to_vec()).collect();
        if distinct.len() == 5 {
            let m = brute_force_map(&pair, &model).unwrap();
            assert_eq!(m, truth);
        }
    }

    #[test]
    fn brute_force_too_large() {
        let model = ProductForm::new(canonical_q(), 1);
        let (pair, _) = sample_pair(&model, 9, 1);
        assert!(matches!(
            brute_force_map(&pair, &model),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn hungarian_matches_brute_force_on_seeded_instances() {
        let model = ProductForm::new(canonical_q(), 2);
        for seed in 0..200u64 {
            let n = 2 + (seed % 6) as usize;
            let (pair, _) = sample_pair(&model, n, seed);
            let w = build_weights(&pair, &model).unwrap();
            let fast = max_weight_matching(&w).unwrap();
            let slow = brute_force_matching(&w).unwrap();
            assert_eq!(
                w.matching_weight(&fast),
                w.matching_weight(&slow),
                "seed {seed}: {:?} vs {:?}",
                fast.perm(),
                slow.perm()
            );
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn tie_dense_weights_match_brute_force() {
        // discrete weight levels and duplicated rows force exact ties;
        // both solvers must agree on the lexicographic representative
        let levels: &[&[f64]] = &[
            &[1.0],
            &[0.0, 1.0],
            &[f64::NEG_INFINITY, 0.0, 1.0],
        ];
        let mut jointly_infeasible = 0;
        for seed in 0..2000u64 {
            let mut rng = crate::rng::rng_from_seed(seed);
            let n = 1 + crate::rng::uniform_index(&mut rng, 6);
            let set = levels[crate::rng::uniform_index(&mut rng, levels.len())];
            let mut data = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                data.push(set[crate::rng::uniform_index(&mut rng, set.len())]);
            }
            if n >= 2 && crate::rng::uniform_f64(&mut rng) < 0.5 {
                let src = crate::rng::uniform_index(&mut rng, n);
                let dst = crate::rng::uniform_index(&mut rng, n);
                let row: Vec<f64> = data[src * n..(src + 1) * n].to_vec();
                data[dst * n..(dst + 1) * n].copy_from_slice(&row);
            }
            let w = WeightMatrix::new(Mat::from_vec(n, n, data)).unwrap();
            match (max_weight_matching(&w), brute_force_matching(&w)) {
                (Ok(fast), Ok(slow)) => {
                    assert_eq!(w.matching_weight(&fast), w.matching_weight(&slow), "seed {seed}");
                    assert_eq!(fast, slow, "seed {seed}");
                }
                (Err(_), Err(_)) => jointly_infeasible += 1,
                (a, b) => panic!("seed {seed}: feasibility disagreement {a:?} vs {b:?}"),
            }
        }
        assert!(jointly_infeasible > 0, "corpus should include infeasible instances");
    }

    #[test]
    fn cycle_type_examples() {
        let id = Matching::identity(4);
        let ct = cycle_type(&id, &id).unwrap();
        assert_eq!(ct.count(1), 4);
        assert_eq!(ct.difference(), 0);

        let shift = Matching::new(vec![1, 2, 0]).unwrap();
        let ct = cycle_type(&Matching::identity(3), &shift).unwrap();
        assert_eq!(ct.count(3), 1);
        assert_eq!(ct.count(1), 0);

        let swap = Matching::new(vec![1, 0]).unwrap();
        let ct = cycle_type(&Matching::identity(2), &swap).unwrap();
        assert_eq!(ct.count(1), 0);
        assert_eq!(ct.count(2), 1);
        assert_eq!(ct.difference(), 2);
    }

    #[test]
    fn cycle_type_overlap_is_fixed_points() {
        let m1 = Matching::new(vec![2, 0, 1, 3]).unwrap();
        let m2 = Matching::new(vec![2, 1, 0, 3]).unwrap();
        let ct = cycle_type(&m1, &m2).unwrap();
        assert_eq!(ct.count(1), m1.overlap(&m2));
        let total: usize = ct.counts().iter().map(|(l, c)| l * c).sum();
        assert_eq!(total, 4);
    }

    proptest! {
        #[test]
        fn cycle_type_symmetric(seed in 0u64..500, n in 1usize..8) {
            let mut rng = crate::rng::rng_from_seed(seed);
            let m1 = Matching::new(crate::rng::random_permutation(&mut rng, n)).unwrap();
            let m2 = Matching::new(crate::rng::random_permutation(&mut rng, n)).unwrap();
            let a = cycle_type(&m1, &m2).unwrap();
            let b = cycle_type(&m2, &m1).unwrap();
            prop_assert_eq!(a.counts(), b.counts());
        }

        #[test]
        fn estimate_dominates_truth(seed in 0u64..300) {
            let model = ProductForm::new(canonical_q(), 3);
            let n = 2 + (seed % 5) as usize;
            let (pair, truth) = sample_pair(&model, n, seed);
            let w = build_weights(&pair, &model).unwrap();
            let m = max_weight_matching(&w).unwrap();
            prop_assert!(w.matching_weight(&m) >= w.matching_weight(&truth) - TIE_TOLERANCE);
        }
    }
}
