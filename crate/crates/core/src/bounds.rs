//! Generating functions over matching pairs and the finite-n error bounds
//! built from them.
//!
//! The central quantity is `b_circ(x, y, l) = tr((x y^T)^l)`. For a pair of
//! matchings with cycle type `{t_l}`, the pair generating function
//! factorizes as `B = prod_l b_circ^(t_l)`, which turns the Chernoff bound
//! on a pairwise error into a power of `b_circ(z, z, 2)`. Everything that
//! raises that value to `reps * d / 2` works in log space so the bounds
//! survive the deep-product regime without underflow.

use serde::Serialize;

use crate::dist::{entrywise_power, JointDistribution, Matching, ProductForm};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::matching::CycleType;
use crate::rng;
use crate::spectral::cycle_mi;

/// Materialization guard for [`b_direct`]'s exhaustive database sum.
pub const DIRECT_SUM_LIMIT: u128 = 10_000_000;

/// `tr((x y^T)^order)`, computed on the smaller-side product.
pub fn b_circ(x: &Mat, y: &Mat, order: u32) -> Result<f64> {
    assert!(order >= 1, "order must be >= 1");
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "shapes {}x{} and {}x{} differ",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols()
            ),
        });
    }
    // tr((xy^T)^l) = tr((y^T x)^l); pick the smaller square product
    let g = if x.rows() <= x.cols() {
        x.matmul(&y.transpose())
    } else {
        y.transpose().matmul(x)
    };
    let mut power = g.clone();
    for _ in 1..order {
        power = power.matmul(&g);
    }
    Ok(power.trace())
}

/// Pair generating function via the cycle-type factorization:
/// the product over cycle lengths `l` of `b_circ(x, y, l)^(t_l)`.
pub fn b_via_cycles(ct: &CycleType, x: &Mat, y: &Mat) -> Result<f64> {
    let mut value = 1.0;
    for (&len, &count) in ct.counts() {
        value *= b_circ(x, y, len as u32)?.powi(count as i32);
    }
    Ok(value)
}

/// Pair generating function by direct summation over every database pair:
/// `sum_{f_a, f_b} t(m1; f_a, f_b; x) t(m2; f_a, f_b; y)` with
/// `t(m; f_a, f_b; x) = prod_{(u,v) in m} x[f_a(u)][f_b(v)]`.
/// Exponential in n; the independent oracle for [`b_via_cycles`].
pub fn b_direct(m1: &Matching, m2: &Matching, x: &Mat, y: &Mat) -> Result<f64> {
    if m1.n() != m2.n() {
        return Err(Error::DimensionMismatch {
            context: format!("matchings have n = {} and n = {}", m1.n(), m2.n()),
        });
    }
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            context: "x and y must share a shape".into(),
        });
    }
    let n = m1.n() as u32;
    let ra = x.rows() as u128;
    let cb = x.cols() as u128;
    let states = ra
        .checked_pow(n)
        .and_then(|r| cb.checked_pow(n).and_then(|c| r.checked_mul(c)))
        .unwrap_or(u128::MAX);
    if states > DIRECT_SUM_LIMIT {
        return Err(Error::TooLarge {
            context: format!("{states} database pairs exceed the limit {DIRECT_SUM_LIMIT}"),
        });
    }
    let n = m1.n();
    let mut total = 0.0;
    let mut fa = vec![0usize; n];
    loop {
        let mut fb = vec![0usize; n];
        loop {
            let mut term = 1.0;
            for u in 0..n {
                term *= x.get(fa[u], fb[m1.get(u)]);
                if term == 0.0 {
                    break;
                }
            }
            if term != 0.0 {
                for u in 0..n {
                    term *= y.get(fa[u], fb[m2.get(u)]);
                    if term == 0.0 {
                        break;
                    }
                }
                total += term;
            }
            if !increment(&mut fb, x.cols()) {
                break;
            }
        }
        if !increment(&mut fa, x.rows()) {
            break;
        }
    }
    Ok(total)
}

fn increment(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Natural log of `b_circ(z, z, 2)` for the base distribution, the
/// per-repetition pairwise error exponent.
pub fn log_b2(q: &JointDistribution) -> f64 {
    let z = q.sqrt_matrix();
    b_circ(&z, &z, 2)
        .expect("same matrix twice always has compatible shape")
        .ln()
}

/// Chernoff bound on the probability that a matching differing from the
/// truth in `d` places is preferred: `b2^(reps * d / 2)`.
pub fn pairwise_error_bound(model: &ProductForm, d: u32) -> f64 {
    assert!(d >= 2, "matchings differ in at least 2 places");
    (model.reps() as f64 * d as f64 / 2.0 * log_b2(model.base())).exp()
}

/// Joint-error bound for two alternatives with `d = n - |m2 ∩ m3|`;
/// the converse uses d in {3, 4}.
pub fn three_matchings_bound(model: &ProductForm, d: u32) -> f64 {
    assert!(matches!(d, 3 | 4), "pairs of transpositions overlap in n-3 or n-4 places");
    (model.reps() as f64 * d as f64 / 2.0 * log_b2(model.base())).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct UnionBoundTerm {
    /// Number of positions where the alternative differs from the truth.
    pub d: usize,
    /// The n^d cap on how many alternatives differ in exactly d places.
    pub count_cap: f64,
    /// count_cap * b2^(d/2), in probability units.
    pub term: f64,
}

/// The achievability union bound and its context: per-d terms, their
/// total, the geometric closed-form cap when it converges, and how far the
/// order-2 threshold condition is from holding.
#[derive(Debug, Clone, Serialize)]
pub struct UnionBoundReport {
    pub n: usize,
    /// b_circ(z, z, 2) for the full product model, i.e. b2(base)^reps.
    pub b2: f64,
    pub cmi2_nats: f64,
    pub two_log_n: f64,
    /// cmi2_nats - two_log_n; the sufficient condition asks for this to
    /// be (well) above zero.
    pub margin_nats: f64,
    pub condition_holds: bool,
    /// False when n * sqrt(b2) >= 1, in which case the geometric series
    /// diverges and the bound says nothing.
    pub conclusive: bool,
    pub terms: Vec<UnionBoundTerm>,
    pub total: f64,
    /// n^2 b2 / (1 - n sqrt(b2)) when n sqrt(b2) < 1.
    pub geometric_cap: Option<f64>,
}

/// Sums the union bound `sum_{d=2}^n n^d b2^(d/2)` in log space.
pub fn union_bound(model: &ProductForm, n: usize) -> UnionBoundReport {
    assert!(n >= 2, "the union bound needs n >= 2");
    let log_b2_model = model.reps() as f64 * log_b2(model.base());
    let log_n = (n as f64).ln();
    let cmi2 = cycle_mi(model, 2.0).expect("a valid model has a cycle MI");

    let mut terms = Vec::with_capacity(n - 1);
    let mut total = 0.0;
    for d in 2..=n {
        let log_term = d as f64 * log_n + d as f64 / 2.0 * log_b2_model;
        let term = log_term.exp();
        terms.push(UnionBoundTerm {
            d,
            // exact for small counts; saturates to inf long before the
            // clamp can matter (n^d overflows f64 near d = 1074)
            count_cap: (n as f64).powi(d.min(2048) as i32),
            term,
        });
        total += term;
    }

    let log_ratio = log_n + log_b2_model / 2.0; // ln(n sqrt(b2))
    let geometric_cap = if log_ratio < 0.0 {
        Some((2.0 * log_n + log_b2_model).exp() / (1.0 - log_ratio.exp()))
    } else {
        None
    };
    let margin = cmi2 - 2.0 * log_n;
    UnionBoundReport {
        n,
        b2: log_b2_model.exp(),
        cmi2_nats: cmi2,
        two_log_n: 2.0 * log_n,
        margin_nats: margin,
        condition_holds: margin >= 0.0,
        conclusive: log_ratio < 0.0,
        terms,
        total,
        geometric_cap,
    }
}

/// One point of the Chernoff exponent curve:
/// `value = b_circ(q^(.theta), q^(.(1-theta)), 2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentPoint {
    pub theta: f64,
    pub value: f64,
}

/// Evaluates the exponent curve on a grid of theta values in [0, 1].
/// The curve is symmetric about 1/2, log-convex, and minimized there.
pub fn exponent_curve(q: &JointDistribution, thetas: &[f64]) -> Vec<ExponentPoint> {
    thetas
        .iter()
        .map(|&theta| {
            assert!((0.0..=1.0).contains(&theta), "theta must lie in [0, 1]");
            let x = entrywise_power(q.matrix(), theta).expect("probabilities are nonnegative");
            let y = entrywise_power(q.matrix(), 1.0 - theta).expect("probabilities are nonnegative");
            let value = b_circ(&x, &y, 2).expect("powers of one matrix share its shape");
            ExponentPoint { theta, value }
        })
        .collect()
}

/// Chebyshev second-moment report for the count of transposition errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondMomentReport {
    /// Probability of one specific transposition error.
    pub eps1: f64,
    /// Joint probability of two transposition errors sharing a user.
    pub eps2: f64,
    /// Upper bound on Pr[no error event occurs]:
    /// [C(n,2)(e1 - e1^2) + 6 C(n,3)(e2 - e1^2)] / (C(n,2) e1)^2,
    /// clamped at zero when sampling noise drives it negative.
    pub ratio: f64,
}

pub fn second_moment_ratio(n: usize, eps1: f64, eps2: f64) -> Result<SecondMomentReport> {
    assert!(n >= 4, "the pair-type census needs n >= 4");
    assert!((0.0..=1.0).contains(&eps1) && (0.0..=1.0).contains(&eps2));
    if eps1 == 0.0 {
        return Err(Error::DegenerateEps);
    }
    let c2 = binomial(n, 2);
    let c3 = binomial(n, 3);
    let numerator = c2 * (eps1 - eps1 * eps1) + 6.0 * c3 * (eps2 - eps1 * eps1);
    let ratio = (numerator / (c2 * eps1).powi(2)).max(0.0);
    Ok(SecondMomentReport { eps1, eps2, ratio })
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// A Monte-Carlo probability estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub samples: u64,
}

/// Exact probability that swapping two users is preferred to the truth,
/// by enumeration of every two-user database pair. Guarded by the state
/// count `(|Y_a| |Y_b|)^(2 reps)`.
pub fn transposition_error_exact(model: &ProductForm) -> Result<f64> {
    let q = model.base();
    let cells = (q.size_a() * q.size_b()) as u128;
    let states = cells.checked_pow(2 * model.reps()).unwrap_or(u128::MAX);
    if states > DIRECT_SUM_LIMIT {
        return Err(Error::TooLarge {
            context: format!("{states} two-user outcomes exceed the limit {DIRECT_SUM_LIMIT}"),
        });
    }
    let reps = model.reps() as usize;
    // one coordinate of two user pairs: ((i1, j1), (i2, j2))
    let mut coord_states = Vec::new();
    for i1 in 0..q.size_a() {
        for j1 in 0..q.size_b() {
            for i2 in 0..q.size_a() {
                for j2 in 0..q.size_b() {
                    let prob = q.get(i1, j1) * q.get(i2, j2);
                    if prob > 0.0 {
                        // swapped likelihood pairs the a-symbols with the
                        // other user's b-symbols
                        let swapped = q.get(i1, j2) * q.get(i2, j1);
                        let straight = q.get(i1, j1) * q.get(i2, j2);
                        coord_states.push((prob, straight, swapped));
                    }
                }
            }
        }
    }
    let mut error_prob = 0.0;
    let mut stack = vec![(0usize, 1.0f64, 1.0f64, 1.0f64)];
    while let Some((depth, prob, straight, swapped)) = stack.pop() {
        if depth == reps {
            if swapped >= straight {
                error_prob += prob;
            }
            continue;
        }
        for &(p, s, w) in &coord_states {
            stack.push((depth + 1, prob * p, straight * s, swapped * w));
        }
    }
    Ok(error_prob)
}

/// Monte-Carlo estimate of the transposition error probability.
pub fn transposition_error_mc(model: &ProductForm, samples: u64, seed: u64) -> McEstimate {
    let mut hits = 0u64;
    let mut rng = rng::rng_from_seed(seed);
    let q = model.base();
    let reps = model.reps() as usize;
    let sampler = CdfSampler::new(q);
    for _ in 0..samples {
        let mut log_straight = 0.0;
        let mut log_swapped = 0.0;
        for _ in 0..reps {
            let (i1, j1) = sampler.draw(&mut rng);
            let (i2, j2) = sampler.draw(&mut rng);
            log_straight += (q.get(i1, j1) * q.get(i2, j2)).ln();
            let cross = q.get(i1, j2) * q.get(i2, j1);
            if cross == 0.0 {
                log_swapped = f64::NEG_INFINITY;
            } else {
                log_swapped += cross.ln();
            }
        }
        if log_swapped >= log_straight {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / samples as f64;
    McEstimate {
        p_hat,
        std_err: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
        samples,
    }
}

/// Joint Monte-Carlo estimate of (eps1, eps2): the probability of one
/// transposition error and of two simultaneous transposition errors
/// sharing a user. Both events are evaluated on the same three sampled
/// user pairs per trial (common random numbers).
pub fn joint_error_mc(model: &ProductForm, samples: u64, seed: u64) -> (McEstimate, McEstimate) {
    let mut hits1 = 0u64;
    let mut hits2 = 0u64;
    let mut rng = rng::rng_from_seed(seed);
    let q = model.base();
    let reps = model.reps() as usize;
    let sampler = CdfSampler::new(q);
    for _ in 0..samples {
        // users 0, 1, 2; m2 swaps {0, 1}, m3 swaps {1, 2}
        let mut log_true = 0.0;
        let mut log_m2 = 0.0;
        let mut log_m3 = 0.0;
        for _ in 0..reps {
            let (a0, b0) = sampler.draw(&mut rng);
            let (a1, b1) = sampler.draw(&mut rng);
            let (a2, b2) = sampler.draw(&mut rng);
            log_true += (q.get(a0, b0) * q.get(a1, b1) * q.get(a2, b2)).ln();
            let m2 = q.get(a0, b1) * q.get(a1, b0) * q.get(a2, b2);
            let m3 = q.get(a0, b0) * q.get(a1, b2) * q.get(a2, b1);
            log_m2 = if m2 == 0.0 { f64::NEG_INFINITY } else { log_m2 + m2.ln() };
            log_m3 = if m3 == 0.0 { f64::NEG_INFINITY } else { log_m3 + m3.ln() };
        }
        let e2 = log_m2 >= log_true;
        let e3 = log_m3 >= log_true;
        if e2 {
            hits1 += 1;
        }
        if e2 && e3 {
            hits2 += 1;
        }
    }
    let wrap = |hits: u64| {
        let p_hat = hits as f64 / samples as f64;
        McEstimate {
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
            samples,
        }
    };
    (wrap(hits1), wrap(hits2))
}

/// Flat-CDF cell sampler reused by the Monte-Carlo estimators.
struct CdfSampler {
    cdf: Vec<f64>,
    cols: usize,
}

impl CdfSampler {
    fn new(q: &JointDistribution) -> Self {
        let mut cdf = Vec::with_capacity(q.size_a() * q.size_b());
        let mut acc = 0.0;
        for i in 0..q.size_a() {
            for j in 0..q.size_b() {
                acc += q.get(i, j);
                cdf.push(acc);
            }
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        CdfSampler {
            cdf,
            cols: q.size_b(),
        }
    }

    fn draw(&self, rng: &mut impl rand_core::RngCore) -> (usize, usize) {
        let u = rng::uniform_f64(rng);
        let idx = match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&u).expect("cdf is NaN-free"))
        {
            Ok(k) => k + 1,
            Err(k) => k,
        }
        .min(self.cdf.len() - 1);
        (idx / self.cols, idx % self.cols)
    }
}
