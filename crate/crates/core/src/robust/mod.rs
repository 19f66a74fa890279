//! Robust local M-smoothers.
//!
//! Both smoothers start from the local median and iterate weighted least
//! squares with weights `w_i(x) * W_c1(r_i)`, where `r_i` are residuals
//! standardized by a robust scale. A bounded `rho` (Tukey) gives observations
//! far from the current fit zero weight, which is what protects the estimate
//! against vertical outliers.

mod rho;
mod scale;

pub use rho::{
    psi, rho, weight_w, RhoFamily, RhoSpec, S_SCALE_B, TUKEY_LOCATION_C1, TUKEY_SCALE_C0,
};
pub use scale::{global_s_scale, local_mad, local_s_scale, s_scale, ScaleKind, ScaleSpec};

use crate::error::{Error, Result};
use crate::kernel::{
    kernel_weights, weighted_linear_fit, weighted_quantile, Dataset, KernelSpec,
};
use crate::simplex::{ilr, IlrVector, SimplexPoint};
use crate::smoother::{self, FitOptions, Method, SmootherFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalDegree {
    Constant,
    #[default]
    Linear,
}

/// Tuning of the robust M-smoothers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSmootherConfig {
    rho1: RhoSpec,
    scale: ScaleSpec,
    max_iter: usize,
    tol: f64,
    degree: LocalDegree,
}

impl MSmootherConfig {
    pub fn new(
        rho1: RhoSpec,
        scale: ScaleSpec,
        max_iter: usize,
        tol: f64,
        degree: LocalDegree,
    ) -> Result<Self> {
        if rho1.family() == RhoFamily::HardRejection {
            return Err(Error::InvalidParameter(
                "hard-rejection rho has no score; use it only for scale".into(),
            ));
        }
        if !(rho1.c() > scale.rho0().c()) {
            return Err(Error::InvalidParameter(format!(
                "location tuning c1 = {} must exceed scale tuning c0 = {}",
                rho1.c(),
                scale.rho0().c()
            )));
        }
        if max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self {
            rho1,
            scale,
            max_iter,
            tol,
            degree,
        })
    }

    pub fn rho1(&self) -> &RhoSpec {
        &self.rho1
    }

    pub fn scale(&self) -> &ScaleSpec {
        &self.scale
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn degree(&self) -> LocalDegree {
        self.degree
    }

    pub fn with_degree(mut self, degree: LocalDegree) -> Self {
        self.degree = degree;
        self
    }
}

impl Default for MSmootherConfig {
    /// Tukey `c1 = 4.685`, global S-scale, 100 iterations, `tol = 1e-8`, local linear.
    fn default() -> Self {
        Self {
            rho1: RhoSpec::tukey(TUKEY_LOCATION_C1).expect("positive constant"),
            scale: ScaleSpec::default(),
            max_iter: 100,
            tol: 1e-8,
            degree: LocalDegree::Linear,
        }
    }
}

/// Result of one IRWLS run. Non-converged runs carry the last iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct MFit {
    pub estimate: f64,
    /// ilr slope for local linear fits.
    pub slope: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Local median: the weighted median of the responses.
pub fn local_median(weights: &[f64], responses: &[f64]) -> f64 {
    weighted_quantile(weights, responses, 0.5)
}

/// Robust local constant M-smoother at `x` with scale `sigma`.
pub fn fit_local_m(
    spec: &KernelSpec,
    cfg: &MSmootherConfig,
    data: &Dataset,
    x: &SimplexPoint,
    sigma: f64,
) -> Result<MFit> {
    check_sigma(sigma)?;
    let w = kernel_weights(spec, data, x)?;
    Ok(irwls_constant(w.as_slice(), data.responses(), sigma, cfg, |_| {}))
}

/// Robust local linear M-smoother at `x` with scale `sigma`.
pub fn fit_local_linear_m(
    spec: &KernelSpec,
    cfg: &MSmootherConfig,
    data: &Dataset,
    x: &SimplexPoint,
    sigma: f64,
) -> Result<MFit> {
    check_sigma(sigma)?;
    let w = kernel_weights(spec, data, x)?;
    irwls_linear(w.as_slice(), data, &ilr(x), sigma, cfg)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "scale must be positive, got {sigma}"
        )))
    }
}

/// Local constant IRWLS. `observe` sees every iterate, starting with the local median.
pub(crate) fn irwls_constant(
    weights: &[f64],
    responses: &[f64],
    sigma: f64,
    cfg: &MSmootherConfig,
    mut observe: impl FnMut(f64),
) -> MFit {
    let mut m = local_median(weights, responses);
    observe(m);
    for iteration in 1..=cfg.max_iter {
        let mut num = 0.0;
        let mut den = 0.0;
        for (w, y) in weights.iter().zip(responses) {
            let wi = w * cfg.rho1.weight((y - m) / sigma);
            num += wi * y;
            den += wi;
        }
        if !(den > 0.0) {
            return MFit {
                estimate: m,
                slope: None,
                iterations: iteration,
                converged: false,
            };
        }
        let next = num / den;
        observe(next);
        let step = (next - m).abs();
        m = next;
        if step <= cfg.tol * (1.0 + m.abs()) {
            return MFit {
                estimate: m,
                slope: None,
                iterations: iteration,
                converged: true,
            };
        }
    }
    MFit {
        estimate: m,
        slope: None,
        iterations: cfg.max_iter,
        converged: false,
    }
}

/// Local linear IRWLS from `(local median, 0)`.
pub(crate) fn irwls_linear(
    weights: &[f64],
    data: &Dataset,
    x_star: &IlrVector,
    sigma: f64,
    cfg: &MSmootherConfig,
) -> Result<MFit> {
    let responses = data.responses();
    let k = x_star.dim();
    let mut intercept = local_median(weights, responses);
    let mut slope = vec![0.0; k];
    let mut irls_weights = vec![0.0; weights.len()];
    for iteration in 1..=cfg.max_iter {
        for (i, (u, y)) in data.ilr_coords().iter().zip(responses).enumerate() {
            let fitted = intercept + linear_term(&slope, u, x_star);
            irls_weights[i] = weights[i] * cfg.rho1.weight((y - fitted) / sigma);
        }
        if !(irls_weights.iter().sum::<f64>() > 0.0) {
            return Ok(MFit {
                estimate: intercept,
                slope: Some(slope),
                iterations: iteration,
                converged: false,
            });
        }
        let next = weighted_linear_fit(&irls_weights, data, x_star, responses)?;
        let step = next
            .slope
            .iter()
            .zip(&slope)
            .map(|(a, b)| (a - b).abs())
            .fold((next.intercept - intercept).abs(), f64::max);
        intercept = next.intercept;
        slope = next.slope;
        if step <= cfg.tol * (1.0 + intercept.abs()) {
            return Ok(MFit {
                estimate: intercept,
                slope: Some(slope),
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(MFit {
        estimate: intercept,
        slope: Some(slope),
        iterations: cfg.max_iter,
        converged: false,
    })
}

fn linear_term(slope: &[f64], u: &IlrVector, x_star: &IlrVector) -> f64 {
    slope
        .iter()
        .zip(u.coords().iter().zip(x_star.coords()))
        .map(|(b, (a, x))| b * (a - x))
        .sum()
}

/// `sum_i w_i psi((y_i - m) / sigma)`, normalized by `sum_i w_i`.
///
/// Zero at a local constant M-estimate.
pub fn constant_score(weights: &[f64], responses: &[f64], m: f64, sigma: f64, rho1: &RhoSpec) -> f64 {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .zip(responses)
        .map(|(w, y)| w * rho1.psi((y - m) / sigma))
        .sum::<f64>()
        / total
}

/// Max-norm of `sum_i w_i psi(r_i) (1, x_i* - x*)`, normalized by `sum_i w_i`.
///
/// Zero at a local linear M-estimate.
pub fn linear_score(
    weights: &[f64],
    data: &Dataset,
    x_star: &IlrVector,
    intercept: f64,
    slope: &[f64],
    sigma: f64,
    rho1: &RhoSpec,
) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut score = vec![0.0; slope.len() + 1];
    for ((w, u), y) in weights.iter().zip(data.ilr_coords()).zip(data.responses()) {
        let fitted = intercept + linear_term(slope, u, x_star);
        let p = w * rho1.psi((y - fitted) / sigma);
        score[0] += p;
        for (s, (a, x)) in score[1..].iter_mut().zip(u.coords().iter().zip(x_star.coords())) {
            *s += p * (a - x);
        }
    }
    score.iter().map(|s| (s / total).abs()).fold(0.0, f64::max)
}

/// Where the M-smoother scale comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// One S-scale from the residuals of the local medians at the data (homoscedastic models).
    #[default]
    Global,
    /// A scale per query point: local MAD or local S-scale, per the config's [`ScaleKind`].
    Local,
}

/// Full robust pipeline: local medians at the data, scale, then the configured M-smoother
/// at every query point. Per-point failures are recorded, not propagated.
pub fn fit_surface(
    spec: &KernelSpec,
    cfg: &MSmootherConfig,
    data: &Dataset,
    query_points: &[SimplexPoint],
    scale_mode: ScaleMode,
) -> Result<SmootherFit> {
    let method = match cfg.degree {
        LocalDegree::Constant => Method::Rob0,
        LocalDegree::Linear => Method::Rob1,
    };
    let options = FitOptions {
        method,
        robust: *cfg,
        scale_mode,
        fallback_to_constant: true,
    };
    smoother::fit(data, spec, &options, query_points)
}
