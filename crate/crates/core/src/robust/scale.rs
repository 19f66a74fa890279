//! Local and global robust scale estimators.

use super::rho::{RhoSpec, S_SCALE_B, TUKEY_SCALE_C0};
use crate::error::{Error, Result};
use crate::kernel::{weighted_quantile, Dataset};

const BISECTION_MAX_STEPS: usize = 400;
const BRACKET_MAX_EXPANSIONS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleKind {
    LocalMad,
    LocalS,
    GlobalS,
}

/// Which scale estimator to use and how to tune its S-equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSpec {
    kind: ScaleKind,
    rho0: RhoSpec,
    b: f64,
}

impl ScaleSpec {
    pub fn new(kind: ScaleKind, rho0: RhoSpec, b: f64) -> Result<Self> {
        let upper = rho0.sup().unwrap_or(f64::INFINITY);
        if !(b > 0.0 && b < upper) {
            return Err(Error::InvalidParameter(format!(
                "scale target b must lie in (0, {upper}), got {b}"
            )));
        }
        Ok(Self { kind, rho0, b })
    }

    pub fn kind(&self) -> ScaleKind {
        self.kind
    }

    pub fn rho0(&self) -> &RhoSpec {
        &self.rho0
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn with_kind(mut self, kind: ScaleKind) -> Self {
        self.kind = kind;
        self
    }
}

impl Default for ScaleSpec {
    /// Global S-scale, Tukey `c0 = 1.54764`, `b = 1/2`.
    fn default() -> Self {
        Self {
            kind: ScaleKind::GlobalS,
            rho0: RhoSpec::tukey(TUKEY_SCALE_C0).expect("positive constant"),
            b: S_SCALE_B,
        }
    }
}

/// Weighted median of `|y_i - m_ini|`.
pub fn local_mad(weights: &[f64], responses: &[f64], m_ini: f64) -> Result<f64> {
    let abs: Vec<f64> = responses.iter().map(|y| (y - m_ini).abs()).collect();
    let mad = weighted_quantile(weights, &abs, 0.5);
    if mad > 0.0 {
        Ok(mad)
    } else {
        Err(Error::ZeroScale)
    }
}

/// Solves `sum_i w_i rho_c0((y_i - m_ini) / s) = b` for `s`.
pub fn local_s_scale(
    weights: &[f64],
    responses: &[f64],
    m_ini: f64,
    spec: &ScaleSpec,
) -> Result<f64> {
    let residuals: Vec<f64> = responses.iter().map(|y| y - m_ini).collect();
    s_scale(weights, &residuals, &spec.rho0, spec.b)
}

/// Solves `(1/n) sum_i rho_c0((y_i - m_ini(x_i)) / s) = b`.
pub fn global_s_scale(data: &Dataset, m_ini_values: &[f64], spec: &ScaleSpec) -> Result<f64> {
    if m_ini_values.len() != data.len() {
        return Err(Error::LengthMismatch {
            left: data.len(),
            right: m_ini_values.len(),
        });
    }
    let residuals: Vec<f64> = data
        .responses()
        .iter()
        .zip(m_ini_values)
        .map(|(y, m)| y - m)
        .collect();
    let weights = vec![1.0 / residuals.len() as f64; residuals.len()];
    s_scale(&weights, &residuals, &spec.rho0, spec.b)
}

/// Root in `s` of the nonincreasing map `s -> sum_i w_i rho(r_i / s) - b`, found by bisection.
///
/// For step-shaped rho (hard rejection) the returned value is the jump point
/// where the sum first drops to `b` or below.
pub fn s_scale(weights: &[f64], residuals: &[f64], rho: &RhoSpec, b: f64) -> Result<f64> {
    if weights.len() != residuals.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: residuals.len(),
        });
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("residuals"));
    }
    let total: f64 = weights.iter().sum();
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let nonzero_mass: f64 = weights
        .iter()
        .zip(&abs)
        .filter(|(_, a)| **a > 0.0)
        .map(|(w, _)| w / total)
        .sum();
    if nonzero_mass == 0.0 {
        return Err(Error::ZeroScale);
    }
    if let Some(sup) = rho.sup() {
        if nonzero_mass * sup <= b {
            return Err(Error::NoBracket);
        }
    }

    let excess = |s: f64| -> f64 {
        weights
            .iter()
            .zip(&abs)
            .map(|(w, a)| w * rho.rho(a / s))
            .sum::<f64>()
            / total
            - b
    };

    let max_abs = abs.iter().copied().fold(0.0, f64::max);
    let median_abs = weighted_quantile(weights, &abs, 0.5);
    let mut lo = (median_abs / 1e6).max(1e-12);
    let mut hi = 10.0 * max_abs;
    let mut expansions = 0;
    while excess(lo) <= 0.0 {
        lo /= 10.0;
        expansions += 1;
        if expansions > BRACKET_MAX_EXPANSIONS || lo == 0.0 {
            return Err(Error::NoBracket);
        }
    }
    expansions = 0;
    while excess(hi) > 0.0 {
        hi *= 10.0;
        expansions += 1;
        if expansions > BRACKET_MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::NoBracket);
        }
    }

    for _ in 0..BISECTION_MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
