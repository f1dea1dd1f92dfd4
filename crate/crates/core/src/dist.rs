//! Generative model: joint distributions over entry alphabets, product
//! forms `q^(x)reps`, and sampling of database pairs correlated through a
//! uniformly random hidden matching.
//!
//! All information quantities downstream are in nats; logarithms here and
//! everywhere else in the crate are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng;

/// Absolute slack allowed on "sums to one" checks at construction time.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Materialization guard for explicit tensor powers.
pub const TENSOR_ENTRY_LIMIT: u64 = 10_000_000;

/// A joint probability distribution over a pair of finite alphabets,
/// with both marginals cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    matrix: Mat,
    marginal_a: Vec<f64>,
    marginal_b: Vec<f64>,
}

impl JointDistribution {
    /// Validates and wraps a probability matrix (rows: first alphabet,
    /// columns: second alphabet).
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_mat(Mat::from_rows(rows)?)
    }

    pub fn from_mat(matrix: Mat) -> Result<Self> {
        matrix.check_nonnegative()?;
        let total = matrix.sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum: total });
        }
        let mut marginal_a = vec![0.0; matrix.rows()];
        let mut marginal_b = vec![0.0; matrix.cols()];
        for i in 0..matrix.rows() {
            for j in 0..matrix.cols() {
                let v = matrix.get(i, j);
                marginal_a[i] += v;
                marginal_b[j] += v;
            }
        }
        Ok(JointDistribution {
            matrix,
            marginal_a,
            marginal_b,
        })
    }

    /// Diagonal distribution diag(p') on a square alphabet pair.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        let mut m = Mat::zeros(n, n);
        for (i, &p) in probs.iter().enumerate() {
            m.set(i, i, p);
        }
        Self::from_mat(m)
    }

    /// The binary symmetric family: two symbols per side, correlation
    /// parameter `epsilon` in [0, 1]. At 0 the sides are independent; at 1
    /// they are equal almost surely. `epsilon = 0.8` gives the matrix
    /// [[0.45, 0.05], [0.05, 0.45]].
    pub fn binary_symmetric(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::NotADistribution {
                context: format!("epsilon {epsilon} outside [0, 1]"),
            });
        }
        let same = (1.0 + epsilon) / 4.0;
        let diff = (1.0 - epsilon) / 4.0;
        Self::new(&[vec![same, diff], vec![diff, same]])
    }

    #[inline]
    pub fn size_a(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn size_b(&self) -> usize {
        self.matrix.cols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn marginal_a(&self) -> &[f64] {
        &self.marginal_a
    }

    pub fn marginal_b(&self) -> &[f64] {
        &self.marginal_b
    }

    /// Entrywise square root of the probability matrix.
    pub fn sqrt_matrix(&self) -> Mat {
        self.matrix.map(f64::sqrt)
    }

    pub fn transpose(&self) -> JointDistribution {
        JointDistribution {
            matrix: self.matrix.transpose(),
            marginal_a: self.marginal_b.clone(),
            marginal_b: self.marginal_a.clone(),
        }
    }

    /// Explicit k-fold tensor power, indexed by symbol tuples in row-major
    /// tuple order. Guarded: refuses to materialize more than
    /// [`TENSOR_ENTRY_LIMIT`] entries.
    pub fn tensor_power(&self, k: u32) -> Result<JointDistribution> {
        assert!(k >= 1, "tensor power requires k >= 1");
        let ra = self.size_a() as u128;
        let cb = self.size_b() as u128;
        let entries = ra.pow(k) * cb.pow(k);
        if entries > TENSOR_ENTRY_LIMIT as u128 {
            return Err(Error::SizeOverflow {
                entries,
                limit: TENSOR_ENTRY_LIMIT,
            });
        }
        let rows = (ra.pow(k)) as usize;
        let cols = (cb.pow(k)) as usize;
        let mut out = Mat::zeros(rows, cols);
        for a in 0..rows {
            // decode the row-major tuple a = (a_0, ..., a_{k-1})
            let mut a_digits = vec![0usize; k as usize];
            let mut rest = a;
            for t in (0..k as usize).rev() {
                a_digits[t] = rest % self.size_a();
                rest /= self.size_a();
            }
            for b in 0..cols {
                let mut prod = 1.0;
                let mut rest_b = b;
                for t in (0..k as usize).rev() {
                    let bj = rest_b % self.size_b();
                    rest_b /= self.size_b();
                    prod *= self.get(a_digits[t], bj);
                }
                out.set(a, b, prod);
            }
        }
        JointDistribution::from_mat(out)
    }
}

/// Entrywise power `x^(.theta)` with the convention that zero entries stay
/// zero for every theta, including theta = 0. This preserves the support
/// pattern, which the exponent-curve endpoints rely on.
pub fn entrywise_power(x: &Mat, theta: f64) -> Result<Mat> {
    assert!(theta >= 0.0, "entrywise power requires theta >= 0");
    x.check_nonnegative()?;
    Ok(x.map(|v| if v == 0.0 { 0.0 } else { v.powf(theta) }))
}

/// A joint distribution presented as `base^(x)reps` without materializing
/// the product alphabet. `reps = 1` is the plain distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductForm {
    base: JointDistribution,
    reps: u32,
}

impl ProductForm {
    pub fn new(base: JointDistribution, reps: u32) -> Self {
        assert!(reps >= 1, "reps must be >= 1");
        ProductForm { base, reps }
    }

    pub fn from_joint(base: JointDistribution) -> Self {
        ProductForm { base, reps: 1 }
    }

    pub fn base(&self) -> &JointDistribution {
        &self.base
    }

    pub fn reps(&self) -> u32 {
        self.reps
    }

    pub fn with_reps(&self, reps: u32) -> ProductForm {
        ProductForm::new(self.base.clone(), reps)
    }

    pub fn with_base(&self, base: JointDistribution) -> ProductForm {
        ProductForm::new(base, self.reps)
    }

    /// Parses the distribution file format `{"q": [[...], ...], "reps": k}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(s).map_err(|e| Error::NotADistribution {
            context: format!("invalid distribution JSON: {e}"),
        })?;
        let base = JointDistribution::new(&file.q)?;
        if file.reps < 1 {
            return Err(Error::NotADistribution {
                context: "reps must be >= 1".into(),
            });
        }
        Ok(ProductForm::new(base, file.reps))
    }

    pub fn to_json_string(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.base.size_a())
            .map(|i| self.base.matrix().row(i).to_vec())
            .collect();
        serde_json::to_string(&DistributionFile {
            q: rows,
            reps: self.reps,
        })
        .expect("distribution serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    q: Vec<Vec<f64>>,
    #[serde(default = "default_reps")]
    reps: u32,
}

fn default_reps() -> u32 {
    1
}

/// A bijection between the two user sets, stored as `perm[u] = v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching {
    perm: Vec<usize>,
}

impl Matching {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &v in &perm {
            if v >= n || seen[v] {
                return Err(Error::DimensionMismatch {
                    context: "perm is not a permutation".into(),
                });
            }
            seen[v] = true;
        }
        Ok(Matching { perm })
    }

    pub fn identity(n: usize) -> Self {
        Matching {
            perm: (0..n).collect(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    #[inline]
    pub fn get(&self, u: usize) -> usize {
        self.perm[u]
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Matching {
        let mut inv = vec![0; self.perm.len()];
        for (u, &v) in self.perm.iter().enumerate() {
            inv[v] = u;
        }
        Matching { perm: inv }
    }

    /// Number of positions where the two matchings agree.
    pub fn overlap(&self, other: &Matching) -> usize {
        self.perm
            .iter()
            .zip(other.perm.iter())
            .filter(|(a, b)| a == b)
            .count()
    }
}

/// Two databases of `n` entries each; every entry is a vector of `reps`
/// symbol indices over its side's base alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabasePair {
    entries_a: Vec<Vec<u16>>,
    entries_b: Vec<Vec<u16>>,
}

impl DatabasePair {
    pub fn new(entries_a: Vec<Vec<u16>>, entries_b: Vec<Vec<u16>>, model: &ProductForm) -> Result<Self> {
        if entries_a.len() != entries_b.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "entries_a has {} rows, entries_b has {}",
                    entries_a.len(),
                    entries_b.len()
                ),
            });
        }
        let reps = model.reps() as usize;
        let check = |entries: &[Vec<u16>], alphabet: usize, side: &str| -> Result<()> {
            for (u, e) in entries.iter().enumerate() {
                if e.len() != reps {
                    return Err(Error::DimensionMismatch {
                        context: format!("entry {u} on side {side} has {} coordinates, expected {reps}", e.len()),
                    });
                }
                if let Some(&s) = e.iter().find(|&&s| s as usize >= alphabet) {
                    return Err(Error::DimensionMismatch {
                        context: format!("symbol {s} out of range on side {side} (alphabet {alphabet})"),
                    });
                }
            }
            Ok(())
        };
        check(&entries_a, model.base().size_a(), "a")?;
        check(&entries_b, model.base().size_b(), "b")?;
        Ok(DatabasePair {
            entries_a,
            entries_b,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.entries_a.len()
    }

    pub fn reps(&self) -> usize {
        self.entries_a.first().map_or(0, Vec::len)
    }

    pub fn entry_a(&self, u: usize) -> &[u16] {
        &self.entries_a[u]
    }

    pub fn entry_b(&self, v: usize) -> &[u16] {
        &self.entries_b[v]
    }

    pub fn entries_a(&self) -> &[Vec<u16>] {
        &self.entries_a
    }

    pub fn entries_b(&self) -> &[Vec<u16>] {
        &self.entries_b
    }
}

/// Cumulative table for drawing (i, j) cells of a base distribution.
struct CellSampler {
    cdf: Vec<f64>,
    cols: usize,
}

impl CellSampler {
    fn new(q: &JointDistribution) -> Self {
        let mut cdf = Vec::with_capacity(q.size_a() * q.size_b());
        let mut acc = 0.0;
        for i in 0..q.size_a() {
            for j in 0..q.size_b() {
                acc += q.get(i, j);
                cdf.push(acc);
            }
        }
        let total = acc;
        for c in cdf.iter_mut() {
            *c /= total;
        }
        CellSampler {
            cdf,
            cols: q.size_b(),
        }
    }

    fn draw(&self, u: f64) -> (u16, u16) {
        let idx = match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&u).expect("cdf is NaN-free"))
        {
            Ok(k) => k + 1,
            Err(k) => k,
        };
        let idx = idx.min(self.cdf.len() - 1);
        ((idx / self.cols) as u16, (idx % self.cols) as u16)
    }
}

/// Samples a database pair of size `n` under `model` with hidden matching
/// drawn uniformly from all bijections.
///
/// Deterministic in `(model, n, seed)`. Stream layout: the Fisher-Yates
/// shuffle first, then for each user `u = 0..n` in order, `reps` i.i.d.
/// cell draws from the base distribution; the pair for user `u` lands at
/// `entries_a[u]` and `entries_b[perm[u]]`.
pub fn sample_pair(model: &ProductForm, n: usize, seed: u64) -> (DatabasePair, Matching) {
    assert!(n >= 1, "n must be >= 1");
    let mut rng = rng::rng_from_seed(seed);
    let perm = rng::random_permutation(&mut rng, n);
    let sampler = CellSampler::new(model.base());
    let reps = model.reps() as usize;
    let mut entries_a = vec![Vec::with_capacity(reps); n];
    let mut entries_b = vec![vec![0u16; reps]; n];
    for u in 0..n {
        for k in 0..reps {
            let (i, j) = sampler.draw(rng::uniform_f64(&mut rng));
            entries_a[u].push(i);
            entries_b[perm[u]][k] = j;
        }
    }
    (
        DatabasePair {
            entries_a,
            entries_b,
        },
        Matching { perm },
    )
}

/// Log-likelihood of observing `pair` under matching `m`:
/// the sum over users and coordinates of `ln q[a][b]`. Returns `-inf`
/// when the matching traverses a zero-probability cell.
pub fn log_likelihood(pair: &DatabasePair, m: &Matching, model: &ProductForm) -> Result<f64> {
    if pair.n() != m.n() {
        return Err(Error::DimensionMismatch {
            context: format!("pair has n = {}, matching has n = {}", pair.n(), m.n()),
        });
    }
    if pair.reps() != model.reps() as usize && pair.n() > 0 {
        return Err(Error::DimensionMismatch {
            context: format!(
                "pair has reps = {}, model has reps = {}",
                pair.reps(),
                model.reps()
            ),
        });
    }
    let q = model.base();
    let mut total = 0.0;
    for u in 0..pair.n() {
        let ea = pair.entry_a(u);
        let eb = pair.entry_b(m.get(u));
        for k in 0..ea.len() {
            let p = q.get(ea[k] as usize, eb[k] as usize);
            if p == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += p.ln();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical_q() -> JointDistribution {
        JointDistribution::new(&[vec![0.45, 0.05], vec![0.05, 0.45]]).unwrap()
    }

    #[test]
    fn uniform_product_marginals() {
        let p = JointDistribution::new(&[vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        assert_eq!(p.marginal_a(), &[0.5, 0.5]);
        assert_eq!(p.marginal_b(), &[0.5, 0.5]);
    }

    #[test]
    fn correlated_marginals_by_independent_summation() {
        let p = canonical_q();
        // independent summation cross-check
        for i in 0..2 {
            let row_sum: f64 = (0..2).map(|j| p.get(i, j)).sum();
            assert!((p.marginal_a()[i] - row_sum).abs() < 1e-15);
            assert!((row_sum - 0.5).abs() < 1e-12);
        }
        for j in 0..2 {
            let col_sum: f64 = (0..2).map(|i| p.get(i, j)).sum();
            assert!((p.marginal_b()[j] - col_sum).abs() < 1e-15);
            assert!((col_sum - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn unnormalized_rejected() {
        let err = JointDistribution::new(&[vec![0.6, 0.5], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
    }

    #[test]
    fn negative_rejected() {
        let err = JointDistribution::new(&[vec![1.1, -0.1], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { .. }));
    }

    #[test]
    fn binary_symmetric_matches_canonical() {
        let q = JointDistribution::binary_symmetric(0.8).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((q.get(i, j) - canonical_q().get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn entrywise_power_examples() {
        let x = Mat::from_rows(&[vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let y = entrywise_power(&x, 0.5).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(y.get(i, j), 0.5);
            }
        }

        // theta = 1 is the identity
        let q = canonical_q();
        let same = entrywise_power(q.matrix(), 1.0).unwrap();
        assert_eq!(&same, q.matrix());

        // scalar-power oracle loop
        let half = entrywise_power(q.matrix(), 0.5).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((half.get(i, j) - q.get(i, j).powf(0.5)).abs() < 1e-15);
            }
        }
        assert!((half.get(0, 0) - 0.6708).abs() < 1e-4);
        assert!((half.get(0, 1) - 0.2236).abs() < 1e-4);
    }

    #[test]
    fn entrywise_power_preserves_support_at_zero() {
        let x = Mat::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let y = entrywise_power(&x, 0.0).unwrap();
        assert_eq!(y.get(0, 0), 1.0);
        assert_eq!(y.get(0, 1), 0.0);
        assert_eq!(y.get(1, 0), 0.0);
        assert_eq!(y.get(1, 1), 1.0);
    }

    #[test]
    fn tensor_power_identity_and_diagonal() {
        let q = canonical_q();
        let t1 = q.tensor_power(1).unwrap();
        assert_eq!(t1, q);

        let d = JointDistribution::new(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let t2 = d.tensor_power(2).unwrap();
        assert_eq!(t2.size_a(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.25 } else { 0.0 };
                assert!((t2.get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_power_entry_against_brute_force() {
        let q = canonical_q();
        let t2 = q.tensor_power(2).unwrap();
        // entry at a = (0,1), b = (0,0): row index 0*2+1, col index 0
        assert!((t2.get(1, 0) - 0.45 * 0.05).abs() < 1e-15);
        // brute-force double loop over all tuple pairs
        for a0 in 0..2 {
            for a1 in 0..2 {
                for b0 in 0..2 {
                    for b1 in 0..2 {
                        let expect = q.get(a0, b0) * q.get(a1, b1);
                        let got = t2.get(a0 * 2 + a1, b0 * 2 + b1);
                        assert!((got - expect).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_power_sums_to_one_and_marginals_factor() {
        let q = JointDistribution::new(&[
            vec![0.2, 0.1, 0.05],
            vec![0.05, 0.3, 0.05],
            vec![0.1, 0.05, 0.1],
        ])
        .unwrap();
        for k in 1..=3u32 {
            let t = q.tensor_power(k).unwrap();
            assert!((t.matrix().sum() - 1.0).abs() < 1e-9);
            // marginal of the power equals the power of the marginal
            let ma = t.marginal_a();
            for (idx, &v) in ma.iter().enumerate() {
                let mut rest = idx;
                let mut expect = 1.0;
                for _ in 0..k {
                    // digits in row-major order; order of multiplication
                    // does not matter for the product
                    expect *= q.marginal_a()[rest % 3];
                    rest /= 3;
                }
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tensor_power_overflow_guard() {
        let q = JointDistribution::new(&vec![vec![0.01; 10]; 10]).unwrap();
        let err = q.tensor_power(4).unwrap_err();
        assert!(matches!(err, Error::SizeOverflow { .. }));
    }

    #[test]
    fn matching_validation() {
        assert!(Matching::new(vec![2, 0, 1]).is_ok());
        assert!(Matching::new(vec![0, 0, 1]).is_err());
        assert!(Matching::new(vec![0, 3, 1]).is_err());
        let m = Matching::new(vec![2, 0, 1]).unwrap();
        assert_eq!(m.inverse().perm(), &[1, 2, 0]);
    }

    #[test]
    fn sample_point_mass() {
        let q = JointDistribution::new(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let model = ProductForm::new(q, 3);
        let (pair, m) = sample_pair(&model, 5, 123);
        for u in 0..5 {
            assert_eq!(pair.entry_a(u), &[0, 0, 0]);
            assert_eq!(pair.entry_b(m.get(u)), &[0, 0, 0]);
        }
    }

    #[test]
    fn sample_perfectly_correlated() {
        let q = JointDistribution::new(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let model = ProductForm::new(q, 4);
        let (pair, m) = sample_pair(&model, 3, 7);
        for u in 0..3 {
            assert_eq!(pair.entry_a(u), pair.entry_b(m.get(u)));
        }
    }

    #[test]
    fn sample_is_deterministic() {
        let model = ProductForm::new(canonical_q(), 6);
        let (p1, m1) = sample_pair(&model, 20, 42);
        let (p2, m2) = sample_pair(&model, 20, 42);
        assert_eq!(p1, p2);
        assert_eq!(m1, m2);
        let (p3, _) = sample_pair(&model, 20, 43);
        assert_ne!(p1, p3);
    }

    #[test]
    fn sample_frequencies_match_distribution() {
        // Monte-Carlo frequency oracle: coordinate-pair frequencies within
        // 3 sigma of the cell probabilities.
        let model = ProductForm::new(canonical_q(), 1);
        let trials = 100_000;
        let mut counts = [[0u32; 2]; 2];
        let (pair, m) = sample_pair(&model, trials, 2024);
        for u in 0..trials {
            counts[pair.entry_a(u)[0] as usize][pair.entry_b(m.get(u))[0] as usize] += 1;
        }
        for i in 0..2 {
            for j in 0..2 {
                let p = canonical_q().get(i, j);
                let sigma = (p * (1.0 - p) / trials as f64).sqrt();
                let freq = counts[i][j] as f64 / trials as f64;
                assert!(
                    (freq - p).abs() <= 3.0 * sigma,
                    "cell ({i},{j}): freq {freq} vs p {p}"
                );
            }
        }
    }

    #[test]
    fn sampled_likelihood_is_finite() {
        let model = ProductForm::new(canonical_q(), 3);
        for seed in 0..50 {
            let (pair, m) = sample_pair(&model, 10, seed);
            let ll = log_likelihood(&pair, &m, &model).unwrap();
            assert!(ll.is_finite());
        }
    }

    #[test]
    fn log_likelihood_examples() {
        let q = JointDistribution::new(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let model = ProductForm::new(q, 1);
        let pair = DatabasePair::new(vec![vec![0], vec![1]], vec![vec![0], vec![1]], &model).unwrap();
        let id = Matching::identity(2);
        let ll = log_likelihood(&pair, &id, &model).unwrap();
        assert!((ll - 2.0 * 0.5f64.ln()).abs() < 1e-12);

        // crossing the diagonal hits zero-probability cells
        let swapped = Matching::new(vec![1, 0]).unwrap();
        let ll = log_likelihood(&pair, &swapped, &model).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn log_likelihood_brute_force_product() {
        let model = ProductForm::new(canonical_q(), 3);
        let (pair, m) = sample_pair(&model, 5, 99);
        let ll = log_likelihood(&pair, &m, &model).unwrap();
        let mut product = 1.0;
        for u in 0..5 {
            for k in 0..3 {
                product *= canonical_q().get(pair.entry_a(u)[k] as usize, pair.entry_b(m.get(u))[k] as usize);
            }
        }
        assert!((ll - product.ln()).abs() < 1e-9);
    }

    #[test]
    fn distribution_file_roundtrip() {
        let model = ProductForm::new(canonical_q(), 24);
        let json = model.to_json_string();
        let parsed = ProductForm::from_json_str(&json).unwrap();
        assert_eq!(parsed, model);
        // reps defaults to 1 when omitted
        let plain = ProductForm::from_json_str(r#"{"q": [[0.25,0.25],[0.25,0.25]]}"#).unwrap();
        assert_eq!(plain.reps(), 1);
        // reps = 0 is rejected
        assert!(ProductForm::from_json_str(r#"{"q": [[0.5,0.5]], "reps": 0}"#).is_err());
    }
}
