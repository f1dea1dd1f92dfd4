//! Spectral side of the correlation measure.
//!
//! For a joint distribution p let z be its entrywise square root. The
//! squared singular values of z sum to one and therefore form a
//! probability vector; the order-l cycle mutual information of p is the
//! order-l Renyi entropy of that vector, equivalently
//! `(1/(1-l)) ln tr((zz^T)^l)` for integer l >= 2. Both routes are
//! implemented and cross-checked: [`cycle_mi`] goes through the
//! eigendecomposition, [`cycle_mi_trace`] through explicit matrix powers.

use crate::dist::{JointDistribution, ProductForm};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Eigenvalues below this threshold do not count toward the support for
/// order-0 (Hartley) entropy.
pub const RANK_THRESHOLD: f64 = 1e-12;

/// Off-diagonal Frobenius norm at which the Jacobi iteration stops.
pub const JACOBI_TOL: f64 = 1e-13;

/// Jacobi sweep cap; hitting it is reported as non-convergence.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Nonincreasing vector of squared singular values of sqrt(p); always a
/// probability vector up to eigensolver roundoff.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    sigma_sq: Vec<f64>,
}

impl SpectralProfile {
    pub fn sigma_sq(&self) -> &[f64] {
        &self.sigma_sq
    }

    pub fn len(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_sq.is_empty()
    }
}

/// Gram matrix of z = sqrt(p) on the smaller side: zz^T when the first
/// alphabet is no larger than the second, z^T z otherwise. Its diagonal is
/// the corresponding marginal distribution.
pub fn gram_matrix(p: &JointDistribution) -> Mat {
    let z = p.sqrt_matrix();
    if p.size_a() <= p.size_b() {
        z.matmul(&z.transpose())
    } else {
        z.transpose().matmul(&z)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// nonincreasing. Only the values are accumulated; eigenvectors are never
/// formed.
pub fn jacobi_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    assert_eq!(a.rows(), a.cols(), "jacobi requires a square matrix");
    let n = a.rows();
    let mut m = a.data().to_vec();
    let idx = |i: usize, j: usize| i * n + j;

    let off_frobenius = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[idx(i, j)] * m[idx(i, j)];
            }
        }
        s.sqrt()
    };

    let mut converged = off_frobenius(&m) <= JACOBI_TOL;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                // smaller-magnitude root of t^2 + 2 tau t - 1 = 0
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[idx(k, p)];
                    let akq = m[idx(k, q)];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[idx(k, p)] = new_kp;
                    m[idx(p, k)] = new_kp;
                    m[idx(k, q)] = new_kq;
                    m[idx(q, k)] = new_kq;
                }
                m[idx(p, p)] = app - t * apq;
                m[idx(q, q)] = aqq + t * apq;
                m[idx(p, q)] = 0.0;
                m[idx(q, p)] = 0.0;
            }
        }
        converged = off_frobenius(&m) <= JACOBI_TOL;
    }
    if !converged {
        return Err(Error::EigenNoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[idx(i, i)]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    Ok(eig)
}

/// Squared-singular-value profile of sqrt(p): eigenvalues of the Gram
/// matrix, clamped at zero (the Gram matrix is PSD; negatives are
/// roundoff) and sorted nonincreasing.
pub fn spectral_profile(p: &JointDistribution) -> Result<SpectralProfile> {
    let eig = jacobi_eigenvalues(&gram_matrix(p))?;
    Ok(SpectralProfile {
        sigma_sq: eig.into_iter().map(|v| v.max(0.0)).collect(),
    })
}

/// Renyi entropy of a probability vector, in nats.
///
/// Order 1 is the Shannon limit; order 0 counts the support above
/// [`RANK_THRESHOLD`]. Zero entries never contribute.
pub fn renyi_entropy(dist: &[f64], order: f64) -> Result<f64> {
    assert!(order >= 0.0, "order must be >= 0");
    let mut sum = 0.0;
    for &p in dist {
        if p < 0.0 || p.is_nan() {
            return Err(Error::NotADistribution {
                context: format!("negative entry {p}"),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotADistribution {
            context: format!("entries sum to {sum}"),
        });
    }
    if order == 1.0 {
        return Ok(dist
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum());
    }
    if order == 0.0 {
        let support = dist.iter().filter(|&&p| p > RANK_THRESHOLD).count();
        return Ok((support as f64).ln());
    }
    // factor out the largest entry so high orders cannot underflow the sum
    let max = dist.iter().copied().fold(0.0f64, f64::max);
    if max == 0.0 {
        return Err(Error::NotADistribution {
            context: "all entries are zero".into(),
        });
    }
    let scaled: f64 = dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| (p / max).powf(order))
        .sum();
    Ok((order * max.ln() + scaled.ln()) / (1.0 - order))
}

/// Cycle mutual information of order `order`, in nats, via the spectral
/// route: `reps` times the Renyi entropy of the base profile.
pub fn cycle_mi(model: &ProductForm, order: f64) -> Result<f64> {
    let profile = spectral_profile(model.base())?;
    Ok(model.reps() as f64 * renyi_entropy(profile.sigma_sq(), order)?)
}

/// Cycle mutual information for a plain joint distribution (reps = 1).
pub fn cycle_mi_joint(p: &JointDistribution, order: f64) -> Result<f64> {
    cycle_mi(&ProductForm::from_joint(p.clone()), order)
}

/// Trace route for integer orders >= 2:
/// `reps/(1-order) * ln tr(G^order)` with G the Gram matrix of the base.
/// Independent of the eigensolver; used as the dual-path check on
/// [`cycle_mi`].
pub fn cycle_mi_trace(model: &ProductForm, order: u32) -> Result<f64> {
    assert!(order >= 2, "trace route requires integer order >= 2");
    let g = gram_matrix(model.base());
    let mut power = g.clone();
    for _ in 1..order {
        power = power.matmul(&g);
    }
    Ok(model.reps() as f64 * power.trace().ln() / (1.0 - order as f64))
}

/// Outcome of a majorization check: `holds` plus the largest prefix-sum
/// deficit found (0 when none).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorizationCheck {
    pub holds: bool,
    pub max_violation: f64,
}

/// Checks that the profile majorizes the marginal: every prefix sum of
/// the sorted-descending profile must dominate the marginal's, within a
/// 1e-9 slack. Vectors of different lengths are compared as if padded
/// with zeros.
pub fn check_majorization(profile: &SpectralProfile, marginal: &[f64]) -> MajorizationCheck {
    let mass_p: f64 = profile.sigma_sq().iter().sum();
    let mass_m: f64 = marginal.iter().sum();
    assert!(
        (mass_p - mass_m).abs() <= 1e-9,
        "majorization requires equal total mass ({mass_p} vs {mass_m})"
    );
    let mut sorted_m = marginal.to_vec();
    sorted_m.sort_by(|a, b| b.partial_cmp(a).expect("marginal is NaN-free"));
    // profile is already sorted nonincreasing
    let mut max_violation: f64 = 0.0;
    let mut prefix_p = 0.0;
    let mut prefix_m = 0.0;
    for k in 0..profile.len().max(sorted_m.len()) {
        prefix_p += profile.sigma_sq().get(k).copied().unwrap_or(0.0);
        prefix_m += sorted_m.get(k).copied().unwrap_or(0.0);
        max_violation = max_violation.max(prefix_m - prefix_p);
    }
    MajorizationCheck {
        holds: max_violation <= 1e-9,
        max_violation,
    }
}

/// Data-processing gap for integer order >= 2:
/// `I_order(diag(prior) q) - I_order(diag(prior) q r)`, which the
/// processing inequality keeps nonnegative.
pub fn dpi_gap(prior: &[f64], channel_q: &Mat, channel_r: &Mat, order: u32) -> Result<f64> {
    assert!(order >= 2, "the processing inequality is used for integer order >= 2");
    let sum: f64 = prior.iter().sum();
    if prior.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotADistribution {
            context: format!("prior sums to {sum}"),
        });
    }
    if prior.len() != channel_q.rows() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "prior has {} states, channel has {} rows",
                prior.len(),
                channel_q.rows()
            ),
        });
    }
    check_stochastic(channel_q)?;
    check_stochastic(channel_r)?;
    if channel_q.cols() != channel_r.rows() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "first channel emits {} symbols, second accepts {}",
                channel_q.cols(),
                channel_r.rows()
            ),
        });
    }

    let joint_q = diag_times_channel(prior, channel_q)?;
    let joint_qr = diag_times_channel(prior, &channel_q.matmul(channel_r))?;
    Ok(cycle_mi_joint(&joint_q, order as f64)? - cycle_mi_joint(&joint_qr, order as f64)?)
}

fn check_stochastic(channel: &Mat) -> Result<()> {
    for i in 0..channel.rows() {
        let mut row_sum = 0.0;
        for j in 0..channel.cols() {
            let v = channel.get(i, j);
            if v < 0.0 || v.is_nan() {
                return Err(Error::NotStochastic { row: i, sum: v });
            }
            row_sum += v;
        }
        if (row_sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotStochastic { row: i, sum: row_sum });
        }
    }
    Ok(())
}

fn diag_times_channel(prior: &[f64], channel: &Mat) -> Result<JointDistribution> {
    let mut m = Mat::zeros(prior.len(), channel.cols());
    for (i, &p) in prior.iter().enumerate() {
        for j in 0..channel.cols() {
            m.set(i, j, p * channel.get(i, j));
        }
    }
    JointDistribution::from_mat(m)
}
