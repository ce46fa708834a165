//! Full-covariance Gaussian mixtures fitted by expectation-maximization.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{Scalar, Tensor};

pub const COVARIANCE_JITTER: f64 = 1e-6;
pub const COLLAPSE_WEIGHT: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel<S> {
    pub weights: Vec<S>,
    pub means: Vec<Vec<S>>,
    /// Row-major `d × d` covariance per component.
    pub covariances: Vec<Vec<S>>,
    dim: usize,
}

/// `gamma[i][k]`: posterior probability that sample `i` came from component `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities<S> {
    pub gamma: Tensor<S>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig {
    pub components: usize,
    pub max_iters: usize,
    /// Stop once the mean log-likelihood improves by less than this.
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            components: 3,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmFit<S> {
    pub model: GmmModel<S>,
    /// Mean per-sample log-likelihood of the initial model and after each
    /// M-step; the last entry belongs to `model`.
    pub log_likelihood: Vec<S>,
    /// Components re-seeded after their weight collapsed.
    pub reseeded: usize,
}

/// Lower Cholesky factor of a symmetric `d × d` matrix.
pub(crate) fn cholesky<S: Scalar>(a: &[S], d: usize) -> Option<Vec<S>> {
    let mut l = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum = sum - l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(sum > S::zero()) || !sum.is_finite() {
                    return None;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Cached factorization of one component.
struct Factor<S> {
    chol: Vec<S>,
    log_det: S,
}

impl<S: Scalar> Factor<S> {
    fn new(cov: &[S], d: usize, k: usize) -> Result<Self> {
        let chol = cholesky(cov, d)
            .ok_or_else(|| Error::numeric(format!("covariance of component {k} is not positive definite")))?;
        let log_det = (0..d).map(|i| chol[i * d + i].ln()).sum::<S>() * S::lit(2.0);
        Ok(Self { chol, log_det })
    }

    /// `log N(x | mean, LLᵀ)`.
    fn log_density(&self, x: &[S], mean: &[S], d: usize) -> S {
        // Solve L z = x − μ by forward substitution; Mahalanobis = ‖z‖².
        let mut z = vec![S::zero(); d];
        let mut maha = S::zero();
        for i in 0..d {
            let mut v = x[i] - mean[i];
            for j in 0..i {
                v = v - self.chol[i * d + j] * z[j];
            }
            z[i] = v / self.chol[i * d + i];
            maha = maha + z[i] * z[i];
        }
        -S::lit(0.5) * (S::lit(d as f64 * (2.0 * std::f64::consts::PI).ln()) + self.log_det + maha)
    }
}

fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let m = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if m == S::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<S>().ln()
}

fn check_data<S: Scalar>(data: &Tensor<S>) -> Result<(usize, usize)> {
    if data.shape().len() != 2 || data.cols() == 0 {
        return Err(Error::dim(format!("samples must be [N, d], got {:?}", data.shape())));
    }
    if !data.is_finite() {
        return Err(Error::numeric("non-finite sample"));
    }
    Ok((data.rows(), data.cols()))
}

/// Sample mean and (1/N) covariance, plus jitter on the diagonal.
fn pooled<S: Scalar>(data: &Tensor<S>, jitter: S) -> (Vec<S>, Vec<S>) {
    let (n, d) = (data.rows(), data.cols());
    let inv_n = S::one() / S::lit(n as f64);
    let mut mean = vec![S::zero(); d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(data.row(i)) {
            *m = *m + x * inv_n;
        }
    }
    let mut cov = vec![S::zero(); d * d];
    for i in 0..n {
        let x = data.row(i);
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] = cov[a * d + b] + (x[a] - mean[a]) * (x[b] - mean[b]) * inv_n;
            }
        }
    }
    for a in 0..d {
        cov[a * d + a] = cov[a * d + a] + jitter;
    }
    (mean, cov)
}

impl<S: Scalar> GmmModel<S> {
    pub fn new(weights: Vec<S>, means: Vec<Vec<S>>, covariances: Vec<Vec<S>>) -> Result<Self> {
        let k = weights.len();
        let dim = means.first().map_or(0, Vec::len);
        if k == 0 || dim == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::dim("mixture needs matching weights, means and covariances"));
        }
        if means.iter().any(|m| m.len() != dim) || covariances.iter().any(|c| c.len() != dim * dim) {
            return Err(Error::dim("component dimensions disagree"));
        }
        if weights.iter().any(|&w| w < S::zero()) {
            return Err(Error::contract("negative mixing weight"));
        }
        let total: S = weights.iter().copied().sum();
        if (total - S::one()).abs() > S::lit(1e-9) {
            return Err(Error::contract(format!("mixing weights sum to {total}")));
        }
        Ok(Self {
            weights,
            means,
            covariances,
            dim,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn factors(&self) -> Result<Vec<Factor<S>>> {
        self.covariances
            .iter()
            .enumerate()
            .map(|(k, c)| Factor::new(c, self.dim, k))
            .collect()
    }

    /// Mixture log-density at `x`.
    pub fn log_pdf(&self, x: &[S]) -> Result<S> {
        let factors = self.factors()?;
        let terms: Vec<S> = (0..self.components())
            .map(|k| self.weights[k].ln() + factors[k].log_density(x, &self.means[k], self.dim))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    /// E-step: responsibilities and the mean per-sample log-likelihood.
    pub fn responsibilities(&self, data: &Tensor<S>) -> Result<(Responsibilities<S>, S)> {
        let (n, d) = check_data(data)?;
        if d != self.dim {
            return Err(Error::dim(format!("samples have {d} columns, mixture has {}", self.dim)));
        }
        let k = self.components();
        let factors = self.factors()?;
        let log_w: Vec<S> = self.weights.iter().map(|w| w.ln()).collect();
        let mut gamma = Vec::with_capacity(n * k);
        let mut total = S::zero();
        let mut terms = vec![S::zero(); k];
        for i in 0..n {
            let x = data.row(i);
            for c in 0..k {
                terms[c] = log_w[c] + factors[c].log_density(x, &self.means[c], d);
            }
            let lse = log_sum_exp(&terms);
            total = total + lse;
            gamma.extend(terms.iter().map(|&t| (t - lse).exp()));
        }
        let ll = total / S::lit(n as f64);
        Ok((
            Responsibilities {
                gamma: Tensor::new(vec![n, k], gamma)?,
            },
            ll,
        ))
    }
}

/// k-means++-style seeding: means picked from the samples with probability
/// proportional to squared distance, equal weights, pooled covariance.
fn initialize<S: Scalar, R: Rng + ?Sized>(data: &Tensor<S>, k: usize, rng: &mut R) -> GmmModel<S> {
    let (n, d) = (data.rows(), data.cols());
    let (_, cov) = pooled(data, S::lit(COVARIANCE_JITTER));
    let mut means: Vec<Vec<S>> = vec![data.row(rng.random_range(0..n)).to_vec()];
    let sq = |a: &[S], b: &[S]| a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<S>();
    while means.len() < k {
        let dist: Vec<f64> = (0..n)
            .map(|i| {
                means
                    .iter()
                    .map(|m| sq(data.row(i), m))
                    .fold(S::infinity(), S::min)
                    .as_f64()
            })
            .collect();
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            dist.iter()
                .position(|&w| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        means.push(data.row(pick).to_vec());
    }
    let w = S::one() / S::lit(k as f64);
    GmmModel {
        weights: vec![w; k],
        means,
        covariances: vec![cov; k],
        dim: d,
    }
}

/// M-step from responsibilities. Collapsed components are re-seeded.
fn maximize<S: Scalar, R: Rng + ?Sized>(
    data: &Tensor<S>,
    resp: &Responsibilities<S>,
    rng: &mut R,
    reseeded: &mut usize,
) -> GmmModel<S> {
    let (n, d) = (data.rows(), data.cols());
    let k = resp.gamma.cols();
    let jitter = S::lit(COVARIANCE_JITTER);
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    let mut collapsed = Vec::new();
    for c in 0..k {
        let nk: S = (0..n).map(|i| resp.gamma.at(i, c)).sum();
        if nk / S::lit(n as f64) < S::lit(COLLAPSE_WEIGHT) {
            collapsed.push(c);
            weights.push(S::zero());
            means.push(vec![S::zero(); d]);
            covariances.push(vec![S::zero(); d * d]);
            continue;
        }
        let mut mean = vec![S::zero(); d];
        for i in 0..n {
            let g = resp.gamma.at(i, c);
            for (m, &x) in mean.iter_mut().zip(data.row(i)) {
                *m = *m + g * x;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / nk);
        let mut cov = vec![S::zero(); d * d];
        for i in 0..n {
            let g = resp.gamma.at(i, c);
            let x = data.row(i);
            for a in 0..d {
                let da = g * (x[a] - mean[a]);
                for b in 0..d {
                    cov[a * d + b] = cov[a * d + b] + da * (x[b] - mean[b]);
                }
            }
        }
        cov.iter_mut().for_each(|v| *v = *v / nk);
        for a in 0..d {
            cov[a * d + a] = cov[a * d + a] + jitter;
        }
        weights.push(nk / S::lit(n as f64));
        means.push(mean);
        covariances.push(cov);
    }
    if !collapsed.is_empty() {
        let (_, pooled_cov) = pooled(data, jitter);
        for &c in &collapsed {
            log::warn!("mixture component {c} collapsed; re-seeding from a random sample");
            means[c] = data.row(rng.random_range(0..n)).to_vec();
            covariances[c] = pooled_cov.clone();
            weights[c] = S::one() / S::lit(k as f64);
            *reseeded += 1;
        }
    }
    let total: S = weights.iter().copied().sum();
    weights.iter_mut().for_each(|w| *w = *w / total);
    GmmModel {
        weights,
        means,
        covariances,
        dim: d,
    }
}

/// Fit a `K`-component mixture to `N × d` samples.
pub fn em_fit<S: Scalar, R: Rng + ?Sized>(data: &Tensor<S>, config: &EmConfig, rng: &mut R) -> Result<EmFit<S>> {
    let (n, _) = check_data(data)?;
    let k = config.components;
    if k == 0 || n < k {
        return Err(Error::contract(format!("need at least K = {k} samples, got {n}")));
    }
    em_from(data, initialize(data, k, rng), config, rng)
}

/// EM starting from a given model.
pub fn em_from<S: Scalar, R: Rng + ?Sized>(
    data: &Tensor<S>,
    init: GmmModel<S>,
    config: &EmConfig,
    rng: &mut R,
) -> Result<EmFit<S>> {
    let mut model = init;
    let (mut resp, mut ll) = model.responsibilities(data)?;
    let mut trace = vec![ll];
    let mut reseeded = 0;
    let tol = S::lit(config.tol);
    for _ in 0..config.max_iters {
        let before = reseeded;
        let next = maximize(data, &resp, rng, &mut reseeded);
        let (next_resp, next_ll) = next.responsibilities(data)?;
        model = next;
        resp = next_resp;
        let improvement = next_ll - ll;
        ll = next_ll;
        trace.push(ll);
        if reseeded == before && improvement < tol {
            break;
        }
    }
    Ok(EmFit {
        model,
        log_likelihood: trace,
        reseeded,
    })
}

/// `−Σ w_k log w_k + Σ w_k · ½ log((2πe)^d |Σ_k|)`, in nats.
///
/// An upper bound on the mixture's true differential entropy.
pub fn gmm_entropy<S: Scalar>(model: &GmmModel<S>) -> Result<S> {
    let d = model.dim();
    let log_2pie = S::lit(d as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
    let factors = model.factors()?;
    let mut h = S::zero();
    for (w, f) in model.weights.iter().zip(&factors) {
        if *w > S::zero() {
            h = h - *w * w.ln() + *w * S::lit(0.5) * (log_2pie + f.log_det);
        }
    }
    Ok(h)
}
