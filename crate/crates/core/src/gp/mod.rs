//! Subset-of-data sparse Gaussian process over the plane.
//!
//! The model conditions exactly on a small inducing set `Z` of observed
//! `(point, value)` pairs. Everything downstream (cost, selection) reads the
//! posterior through [`SparseGP`].

mod fit;
mod select;

pub use fit::{log_marginal_likelihood, refit_hyperparams, LikelihoodEval};
pub use select::{greedy_select, greedy_select_indices, merge_inducing, smw_extend};

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;

/// Diagonal jitter, relative to the signal variance, used when the plain
/// regularized gram fails to factorize.
pub const JITTER_FACTOR: f64 = 1e-8;

/// Floor on the Schur complement of an incremental inverse update.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("Schur complement {0:e} below singularity threshold")]
    Singular(f64),
    #[error("inducing points {0} and {1} share a location")]
    DuplicateInducing(usize, usize),
    #[error("inverse has {got} rows but the inducing set has {expected} points")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Squared-exponential kernel hyperparameters plus a constant prior mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    #[serde(default)]
    pub prior_mean: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { lengthscale: 10.0, signal_variance: 1.0, noise_variance: 0.01, prior_mean: 0.0 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), GpError> {
        let ok = self.lengthscale.is_finite()
            && self.lengthscale > 0.0
            && self.signal_variance.is_finite()
            && self.signal_variance > 0.0
            && self.noise_variance.is_finite()
            && self.noise_variance >= 0.0
            && self.prior_mean.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GpError::InvalidHyper(format!("{self:?}")))
        }
    }

    pub fn kernel(&self, a: &Point, b: &Point) -> f64 {
        kernel(a, b, self)
    }

    fn jitter(&self) -> f64 {
        JITTER_FACTOR * self.signal_variance
    }
}

/// `signal_variance · exp(−‖a−b‖² / (2·lengthscale²))`.
pub fn kernel(a: &Point, b: &Point, hyper: &Hyperparams) -> f64 {
    let d2 = (a - b).norm_squared();
    hyper.signal_variance * (-0.5 * d2 / (hyper.lengthscale * hyper.lengthscale)).exp()
}

/// One observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub point: Point,
    pub value: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64, value: f64) -> Self {
        Self { point: Point::new(x, y), value }
    }

    /// Bit-exact location key; `-0.0` and `0.0` compare equal.
    pub(crate) fn location_key(&self) -> (u64, u64) {
        ((self.point.x + 0.0).to_bits(), (self.point.y + 0.0).to_bits())
    }
}

/// Temporary store of fresh measurements between model refreshes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleBuffer {
    entries: Vec<Sample>,
}

impl SampleBuffer {
    pub fn push(&mut self, sample: Sample) {
        self.entries.push(sample);
    }

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Kernel matrix between two point lists.
pub fn cross_kernel(a: &[Point], b: &[Point], hyper: &Hyperparams) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| kernel(&a[i], &b[j], hyper))
}

/// `K_ZZ + σ²I` for the given points.
pub fn regularized_gram(points: &[Point], hyper: &Hyperparams) -> DMatrix<f64> {
    let mut gram = cross_kernel(points, points, hyper);
    for i in 0..points.len() {
        gram[(i, i)] += hyper.noise_variance;
    }
    gram
}

/// Posterior mean vector and covariance matrix at a set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// A GP conditioned on its inducing set, with the inverse regularized gram cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGP {
    hyper: Hyperparams,
    inducing: Vec<Sample>,
    points: Vec<Point>,
    inv_gram: DMatrix<f64>,
    /// `inv_gram · (y − μ)`.
    weights: DVector<f64>,
    jittered: bool,
}

impl SparseGP {
    /// The prior: no inducing points.
    pub fn prior(hyper: Hyperparams) -> Result<Self, GpError> {
        Self::new(hyper, Vec::new())
    }

    /// Conditions on `inducing`, inverting `K_ZZ + σ²I` from scratch.
    pub fn new(hyper: Hyperparams, inducing: Vec<Sample>) -> Result<Self, GpError> {
        hyper.validate()?;
        let mut seen = std::collections::HashMap::with_capacity(inducing.len());
        for (i, s) in inducing.iter().enumerate() {
            if let Some(&first) = seen.get(&s.location_key()) {
                return Err(GpError::DuplicateInducing(first, i));
            }
            seen.insert(s.location_key(), i);
        }
        let points: Vec<Point> = inducing.iter().map(|s| s.point).collect();
        let gram = regularized_gram(&points, &hyper);
        let (inv_gram, jittered) = match gram.clone().cholesky() {
            Some(chol) => (chol.inverse(), false),
            None => {
                let mut padded = gram;
                for i in 0..points.len() {
                    padded[(i, i)] += hyper.jitter();
                }
                let chol = padded.cholesky().ok_or(GpError::Singular(hyper.jitter()))?;
                (chol.inverse(), true)
            }
        };
        Ok(Self::assemble(hyper, inducing, points, inv_gram, jittered))
    }

    /// Uses a caller-supplied inverse, e.g. one maintained incrementally.
    pub fn with_inverse(hyper: Hyperparams, inducing: Vec<Sample>, inv_gram: DMatrix<f64>) -> Result<Self, GpError> {
        hyper.validate()?;
        if inv_gram.nrows() != inducing.len() || inv_gram.ncols() != inducing.len() {
            return Err(GpError::DimensionMismatch { expected: inducing.len(), got: inv_gram.nrows() });
        }
        let points = inducing.iter().map(|s| s.point).collect();
        Ok(Self::assemble(hyper, inducing, points, inv_gram, false))
    }

    fn assemble(
        hyper: Hyperparams,
        inducing: Vec<Sample>,
        points: Vec<Point>,
        inv_gram: DMatrix<f64>,
        jittered: bool,
    ) -> Self {
        let centered = DVector::from_iterator(inducing.len(), inducing.iter().map(|s| s.value - hyper.prior_mean));
        let weights = &inv_gram * centered;
        Self { hyper, inducing, points, inv_gram, weights, jittered }
    }

    /// Same inducing set under new hyperparameters.
    pub fn with_hyper(&self, hyper: Hyperparams) -> Result<Self, GpError> {
        Self::new(hyper, self.inducing.clone())
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn inducing(&self) -> &[Sample] {
        &self.inducing
    }

    pub fn inducing_points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.inducing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inducing.is_empty()
    }

    pub fn inv_gram(&self) -> &DMatrix<f64> {
        &self.inv_gram
    }

    /// Whether diagonal jitter was needed to factorize the gram.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// Frobenius norm of `inv_gram · (K_ZZ + σ²I) − I`.
    pub fn inverse_residual(&self) -> f64 {
        let gram = regularized_gram(&self.points, &self.hyper);
        let n = self.points.len();
        (&self.inv_gram * gram - DMatrix::identity(n, n)).norm()
    }

    /// `k(q, Z)` as a vector.
    pub fn kernel_vector(&self, q: &Point) -> DVector<f64> {
        DVector::from_iterator(self.points.len(), self.points.iter().map(|z| kernel(q, z, &self.hyper)))
    }

    pub fn mean_at(&self, q: &Point) -> f64 {
        let ls2 = self.hyper.lengthscale * self.hyper.lengthscale;
        let sv = self.hyper.signal_variance;
        let dot: f64 = self
            .points
            .iter()
            .zip(self.weights.iter())
            .map(|(z, w)| w * sv * (-0.5 * (q - z).norm_squared() / ls2).exp())
            .sum();
        self.hyper.prior_mean + dot
    }

    pub fn variance_at(&self, q: &Point) -> f64 {
        let k = self.kernel_vector(q);
        self.hyper.signal_variance - k.dot(&(&self.inv_gram * &k))
    }

    pub fn means(&self, queries: &[Point]) -> Vec<f64> {
        queries.iter().map(|q| self.mean_at(q)).collect()
    }

    /// Posterior covariance among `queries`, symmetrized.
    pub fn covariance(&self, queries: &[Point]) -> DMatrix<f64> {
        let prior = cross_kernel(queries, queries, &self.hyper);
        if self.points.is_empty() {
            return prior;
        }
        let kqz = cross_kernel(queries, &self.points, &self.hyper);
        let proj = &kqz * &self.inv_gram;
        let mut cov = prior - proj * kqz.transpose();
        let n = cov.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
        }
        cov
    }

    /// Joint posterior at `queries`. The empty inducing set yields the prior.
    pub fn posterior(&self, queries: &[Point]) -> Posterior {
        let mean = DVector::from_vec(self.means(queries));
        Posterior { mean, cov: self.covariance(queries) }
    }
}

/// Free-function form of [`SparseGP::posterior`].
pub fn posterior(gp: &SparseGP, queries: &[Point]) -> Posterior {
    gp.posterior(queries)
}

pub(crate) fn dedup_by_location(samples: impl IntoIterator<Item = Sample>) -> Vec<Sample> {
    let mut seen = HashSet::new();
    samples.into_iter().filter(|s| seen.insert(s.location_key())).collect()
}
