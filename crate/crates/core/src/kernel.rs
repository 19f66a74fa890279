//! Simplicial kernels and the classical (least-squares) local smoothers.
//!
//! A simplicial kernel centred at `x` evaluates a radial profile on the ilr
//! image of `u ⊖ x`, i.e. on `u* - x*`, rescaled by a bandwidth matrix `H`:
//!
//! ```text
//! K_H(u ⊖ x) = det(H)^-1 * K~(H^-1 (u* - x*))
//! ```
//!
//! All computations below therefore work on the cached ilr images of the data.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, solve_normal_equations};
use crate::simplex::{ilr, IlrVector, SimplexPoint};

/// Relative slack when comparing a cumulative weight sum against a quantile level.
const CDF_SLACK: f64 = 1e-12;

/// Radial profile of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelProfile {
    /// Standard multivariate normal density.
    #[default]
    Gaussian,
}

/// Kernel profile plus a symmetric positive definite bandwidth matrix.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    profile: KernelProfile,
    bandwidth: DMatrix<f64>,
    inverse: Vec<f64>,
    det: f64,
}

impl KernelSpec {
    pub fn new(profile: KernelProfile, bandwidth: DMatrix<f64>) -> Result<Self> {
        if bandwidth.nrows() == 0 || !is_symmetric(&bandwidth, 1e-10) {
            return Err(Error::SingularBandwidth);
        }
        if bandwidth.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularBandwidth);
        }
        let chol = Cholesky::new(bandwidth.clone()).ok_or(Error::SingularBandwidth)?;
        let det = chol.determinant();
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::SingularBandwidth);
        }
        let inverse = chol.inverse();
        let k = bandwidth.nrows();
        let inverse = (0..k * k).map(|i| inverse[(i / k, i % k)]).collect();
        Ok(Self {
            profile,
            bandwidth,
            inverse,
            det,
        })
    }

    /// Gaussian kernel with `H = h I` on `coord_dim = D - 1` ilr coordinates.
    pub fn isotropic(h: f64, coord_dim: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::SingularBandwidth);
        }
        Self::new(
            KernelProfile::Gaussian,
            DMatrix::from_diagonal_element(coord_dim, coord_dim, h),
        )
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    pub fn bandwidth(&self) -> &DMatrix<f64> {
        &self.bandwidth
    }

    /// Dimension of the ilr space the kernel acts on.
    pub fn coord_dim(&self) -> usize {
        self.bandwidth.nrows()
    }

    /// Squared Euclidean norm of `H^-1 (u - x)`.
    fn scaled_sq_norm(&self, u: &[f64], x: &[f64]) -> f64 {
        let k = self.coord_dim();
        let mut total = 0.0;
        for row in 0..k {
            let mut z = 0.0;
            for col in 0..k {
                z += self.inverse[row * k + col] * (u[col] - x[col]);
            }
            total += z * z;
        }
        total
    }

    fn profile_value(&self, sq_norm: f64) -> f64 {
        match self.profile {
            KernelProfile::Gaussian => {
                let k = self.coord_dim() as f64;
                (2.0 * std::f64::consts::PI).powf(-0.5 * k) * (-0.5 * sq_norm).exp()
            }
        }
    }
}

/// `K~_H(u* - x*)`, a genuine density on the ilr space.
pub fn kernel_value(spec: &KernelSpec, u_star: &[f64], x_star: &[f64]) -> Result<f64> {
    let k = spec.coord_dim();
    for len in [u_star.len(), x_star.len()] {
        if len != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: len,
            });
        }
    }
    Ok(spec.profile_value(spec.scaled_sq_norm(u_star, x_star)) / spec.det)
}

/// Paired covariates and responses, with the ilr images of the covariates cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Vec<SimplexPoint>,
    responses: Vec<f64>,
    coords: Vec<IlrVector>,
}

impl Dataset {
    pub fn new(covariates: Vec<SimplexPoint>, responses: Vec<f64>) -> Result<Self> {
        if covariates.len() != responses.len() {
            return Err(Error::LengthMismatch {
                left: covariates.len(),
                right: responses.len(),
            });
        }
        if covariates.is_empty() {
            return Err(Error::InvalidParameter("dataset is empty".into()));
        }
        let dim = covariates[0].dim();
        if let Some(bad) = covariates.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        let coords = covariates.iter().map(ilr).collect();
        Ok(Self {
            covariates,
            responses,
            coords,
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Number of parts `D` of the covariates.
    pub fn parts(&self) -> usize {
        self.covariates[0].dim()
    }

    pub fn covariates(&self) -> &[SimplexPoint] {
        &self.covariates
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn ilr_coords(&self) -> &[IlrVector] {
        &self.coords
    }

    /// The observations at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::FoldTooSmall);
        }
        Ok(Self {
            covariates: indices.iter().map(|&i| self.covariates[i].clone()).collect(),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
            coords: indices.iter().map(|&i| self.coords[i].clone()).collect(),
        })
    }

    /// Same covariates, new responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        if responses.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: responses.len(),
            });
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("responses"));
        }
        Ok(Self {
            covariates: self.covariates.clone(),
            responses,
            coords: self.coords.clone(),
        })
    }
}

/// Nonnegative kernel weights normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Normalizes nonnegative raw weights.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::AllWeightsZero);
        }
        Ok(Self {
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Kish effective sample size `(sum w)^2 / sum w^2`.
    pub fn effective_count(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        s * s / s2
    }
}

/// Kernel weights of every datum relative to the query composition `x`.
pub fn kernel_weights(spec: &KernelSpec, data: &Dataset, x: &SimplexPoint) -> Result<WeightVector> {
    if x.dim() != data.parts() {
        return Err(Error::DimensionMismatch {
            expected: data.parts(),
            found: x.dim(),
        });
    }
    kernel_weights_ilr(spec, data, &ilr(x))
}

/// Kernel weights at a query point given by its ilr coordinates.
pub fn kernel_weights_ilr(
    spec: &KernelSpec,
    data: &Dataset,
    x_star: &IlrVector,
) -> Result<WeightVector> {
    if x_star.dim() != spec.coord_dim() || data.parts() - 1 != spec.coord_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.coord_dim(),
            found: x_star.dim(),
        });
    }
    let raw: Vec<f64> = data
        .coords
        .iter()
        .map(|u| spec.profile_value(spec.scaled_sq_norm(u.coords(), x_star.coords())) / spec.det)
        .collect();
    WeightVector::from_raw(raw)
}

/// Weighted empirical CDF `sum_i w_i 1{y_i <= y}`.
pub fn conditional_cdf(weights: &[f64], responses: &[f64], y: f64) -> f64 {
    weights
        .iter()
        .zip(responses)
        .filter(|(_, &yi)| yi <= y)
        .map(|(w, _)| w)
        .sum()
}

/// Smallest response whose weighted CDF reaches `q` (left-continuous inverse, no interpolation).
///
/// Panics if the inputs are empty or of different lengths.
pub fn weighted_quantile(weights: &[f64], responses: &[f64], q: f64) -> f64 {
    assert_eq!(weights.len(), responses.len(), "weights/responses length");
    assert!(!responses.is_empty(), "weighted quantile of an empty sample");
    let mut order: Vec<usize> = (0..responses.len()).collect();
    order.sort_by(|&a, &b| responses[a].total_cmp(&responses[b]));
    let total: f64 = weights.iter().sum();
    let target = q * total * (1.0 - CDF_SLACK);
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum >= target {
            return responses[i];
        }
    }
    responses[*order.last().expect("nonempty")]
}

/// Local constant (Nadaraya-Watson) estimate: the kernel-weighted mean response.
pub fn fit_local_constant_ls(spec: &KernelSpec, data: &Dataset, x: &SimplexPoint) -> Result<f64> {
    let w = kernel_weights(spec, data, x)?;
    Ok(weighted_mean(w.as_slice(), data.responses()))
}

pub(crate) fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    weights.iter().zip(values).map(|(w, y)| w * y).sum::<f64>() / total
}

/// Intercept and ilr-slope of a local linear fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinear {
    pub intercept: f64,
    pub slope: Vec<f64>,
}

/// Local linear least-squares fit at `x`; the estimate is the intercept.
pub fn fit_local_linear_ls(
    spec: &KernelSpec,
    data: &Dataset,
    x: &SimplexPoint,
) -> Result<LocalLinear> {
    let w = kernel_weights(spec, data, x)?;
    weighted_linear_fit(w.as_slice(), data, &ilr(x), data.responses())
}

/// Solves `(X^T W X) beta = X^T W y` with rows `(1, x_i* - x*)`.
pub(crate) fn weighted_linear_fit(
    weights: &[f64],
    data: &Dataset,
    x_star: &IlrVector,
    responses: &[f64],
) -> Result<LocalLinear> {
    let p = x_star.dim() + 1;
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwy = DVector::zeros(p);
    let mut row = vec![0.0; p];
    row[0] = 1.0;
    for ((w, u), y) in weights.iter().zip(data.ilr_coords()).zip(responses) {
        if *w == 0.0 {
            continue;
        }
        for (slot, (a, b)) in row[1..].iter_mut().zip(u.coords().iter().zip(x_star.coords())) {
            *slot = a - b;
        }
        for r in 0..p {
            let wr = w * row[r];
            xtwy[r] += wr * y;
            for c in 0..=r {
                xtwx[(r, c)] += wr * row[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            xtwx[(c, r)] = xtwx[(r, c)];
        }
    }
    let beta = solve_normal_equations(xtwx, xtwy)?;
    Ok(LocalLinear {
        intercept: beta[0],
        slope: beta.as_slice()[1..].to_vec(),
    })
}
