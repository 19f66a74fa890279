//! One entry point for the four estimators (classical/robust x constant/linear).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{
    kernel_weights_ilr, weighted_linear_fit, weighted_mean, Dataset, KernelSpec,
};
use crate::robust::{
    irwls_constant, irwls_linear, local_mad, local_median, s_scale, global_s_scale,
    LocalDegree, MSmootherConfig, ScaleKind, ScaleMode,
};
use crate::simplex::{ilr, IlrVector, SimplexPoint};

/// Estimator label: classical (least squares) or robust, local constant or local linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cl0,
    Cl1,
    Rob0,
    Rob1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cl0, Method::Cl1, Method::Rob0, Method::Rob1];

    pub fn label(self) -> &'static str {
        match self {
            Method::Cl0 => "CL0",
            Method::Cl1 => "CL1",
            Method::Rob0 => "ROB0",
            Method::Rob1 => "ROB1",
        }
    }

    pub fn is_robust(self) -> bool {
        matches!(self, Method::Rob0 | Method::Rob1)
    }

    pub fn degree(self) -> LocalDegree {
        match self {
            Method::Cl0 | Method::Rob0 => LocalDegree::Constant,
            Method::Cl1 | Method::Rob1 => LocalDegree::Linear,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cl0" => Ok(Method::Cl0),
            "cl1" => Ok(Method::Cl1),
            "rob0" => Ok(Method::Rob0),
            "rob1" => Ok(Method::Rob1),
            other => Err(Error::InvalidParameter(format!(
                "unknown method {other:?} (expected cl0, cl1, rob0 or rob1)"
            ))),
        }
    }
}

/// Everything besides the kernel that determines a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub method: Method,
    /// Used by the robust methods only; its degree is overridden by `method`.
    pub robust: MSmootherConfig,
    pub scale_mode: ScaleMode,
    /// Degrade local linear fits to local constant where the design is singular
    /// or fewer than `D` effective neighbours carry the weight.
    pub fallback_to_constant: bool,
}

impl FitOptions {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            robust: MSmootherConfig::default(),
            scale_mode: ScaleMode::Global,
            fallback_to_constant: true,
        }
    }
}

/// Estimate at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFit {
    pub estimate: f64,
    pub slope: Option<Vec<f64>>,
    /// Scale used by a robust fit.
    pub scale: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A local linear fit was replaced by a local constant one.
    pub fell_back: bool,
    /// A zero local scale was replaced by the global S-scale.
    pub scale_substituted: bool,
}

impl PointFit {
    fn classical(estimate: f64, slope: Option<Vec<f64>>, fell_back: bool) -> Self {
        Self {
            estimate,
            slope,
            scale: None,
            iterations: 0,
            converged: true,
            fell_back,
            scale_substituted: false,
        }
    }
}

/// A fitted estimator prepared on one dataset, ready to be evaluated anywhere.
#[derive(Debug, Clone)]
pub struct Smoother<'a> {
    data: &'a Dataset,
    spec: KernelSpec,
    options: FitOptions,
    global_scale: Option<Result<f64>>,
}

impl<'a> Smoother<'a> {
    /// For robust methods this computes the local medians at every datum and the global S-scale.
    pub fn new(data: &'a Dataset, spec: &KernelSpec, options: &FitOptions) -> Result<Self> {
        if spec.coord_dim() + 1 != data.parts() {
            return Err(Error::DimensionMismatch {
                expected: data.parts() - 1,
                found: spec.coord_dim(),
            });
        }
        let mut options = *options;
        options.robust = options.robust.with_degree(options.method.degree());
        let global_scale = if options.method.is_robust() {
            let scale = initial_global_scale(data, spec, &options.robust);
            if options.scale_mode == ScaleMode::Global {
                Some(Ok(scale?))
            } else {
                Some(scale)
            }
        } else {
            None
        };
        Ok(Self {
            data,
            spec: spec.clone(),
            options,
            global_scale,
        })
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    pub fn global_scale(&self) -> Option<f64> {
        self.global_scale.as_ref().and_then(|s| s.as_ref().ok().copied())
    }

    pub fn fit_point(&self, x_star: &IlrVector) -> Result<PointFit> {
        let weights = kernel_weights_ilr(&self.spec, self.data, x_star)?;
        let w = weights.as_slice();
        let y = self.data.responses();
        let linear = self.options.method.degree() == LocalDegree::Linear;
        let thin = weights.effective_count() < self.data.parts() as f64;
        let may_fall_back = self.options.fallback_to_constant;
        if linear && thin && may_fall_back {
            return self.fit_constant(w, x_star, true);
        }
        if !linear {
            return self.fit_constant(w, x_star, false);
        }
        let attempt = if self.options.method.is_robust() {
            let (sigma, substituted) = self.scale_at(w)?;
            irwls_linear(w, self.data, x_star, sigma, &self.options.robust).map(|m| PointFit {
                estimate: m.estimate,
                slope: m.slope,
                scale: Some(sigma),
                iterations: m.iterations,
                converged: m.converged,
                fell_back: false,
                scale_substituted: substituted,
            })
        } else {
            weighted_linear_fit(w, self.data, x_star, y)
                .map(|f| PointFit::classical(f.intercept, Some(f.slope), false))
        };
        match attempt {
            Err(Error::SingularDesign(_)) if may_fall_back => self.fit_constant(w, x_star, true),
            other => other,
        }
    }

    fn fit_constant(&self, w: &[f64], _x_star: &IlrVector, fell_back: bool) -> Result<PointFit> {
        let y = self.data.responses();
        if !self.options.method.is_robust() {
            return Ok(PointFit::classical(weighted_mean(w, y), None, fell_back));
        }
        let (sigma, substituted) = self.scale_at(w)?;
        let m = irwls_constant(w, y, sigma, &self.options.robust, |_| {});
        Ok(PointFit {
            estimate: m.estimate,
            slope: None,
            scale: Some(sigma),
            iterations: m.iterations,
            converged: m.converged,
            fell_back,
            scale_substituted: substituted,
        })
    }

    /// Scale at a query point with weights `w`, and whether the global scale was substituted.
    fn scale_at(&self, w: &[f64]) -> Result<(f64, bool)> {
        let global = || match &self.global_scale {
            Some(Ok(s)) => Ok(*s),
            Some(Err(e)) => Err(e.clone()),
            None => Err(Error::ZeroScale),
        };
        match self.options.scale_mode {
            ScaleMode::Global => Ok((global()?, false)),
            ScaleMode::Local => {
                let y = self.data.responses();
                let m_ini = local_median(w, y);
                let scale_cfg = self.options.robust.scale();
                let local = match scale_cfg.kind() {
                    ScaleKind::LocalMad => local_mad(w, y, m_ini),
                    ScaleKind::LocalS | ScaleKind::GlobalS => {
                        let r: Vec<f64> = y.iter().map(|v| v - m_ini).collect();
                        s_scale(w, &r, scale_cfg.rho0(), scale_cfg.b())
                    }
                };
                match local {
                    Ok(s) => Ok((s, false)),
                    Err(Error::ZeroScale | Error::NoBracket) => Ok((global()?, true)),
                    Err(e) => Err(e),
                }
            }
        }
    }

    /// Evaluates at every query point in parallel; output order follows the input.
    pub fn fit_points(&self, queries: &[IlrVector]) -> Vec<Result<PointFit>> {
        queries.par_iter().map(|q| self.fit_point(q)).collect()
    }
}

/// Local medians at every datum, then the S-scale of their residuals.
fn initial_global_scale(data: &Dataset, spec: &KernelSpec, cfg: &MSmootherConfig) -> Result<f64> {
    let m_ini = local_medians_at_data(data, spec)?;
    global_s_scale(data, &m_ini, cfg.scale())
}

/// `m_INI(x_i)` for every datum.
pub fn local_medians_at_data(data: &Dataset, spec: &KernelSpec) -> Result<Vec<f64>> {
    data.ilr_coords()
        .par_iter()
        .map(|x| {
            let w = kernel_weights_ilr(spec, data, x)?;
            Ok(local_median(w.as_slice(), data.responses()))
        })
        .collect()
}

/// Estimates at query points plus residuals at the data.
#[derive(Debug, Clone)]
pub struct SmootherFit {
    pub method: Method,
    pub bandwidth: DMatrix<f64>,
    pub scale_mode: ScaleMode,
    /// Global S-scale, when one was computed.
    pub global_scale: Option<f64>,
    pub points: Vec<Result<PointFit>>,
    /// `y_i - m_hat(x_i)` at every datum.
    pub residuals: Vec<Result<f64>>,
}

impl SmootherFit {
    pub fn estimates(&self) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| p.as_ref().ok().map(|f| f.estimate))
            .collect()
    }
}

/// Fits `options.method` at `queries` and at every datum.
pub fn fit(
    data: &Dataset,
    spec: &KernelSpec,
    options: &FitOptions,
    queries: &[SimplexPoint],
) -> Result<SmootherFit> {
    if let Some(bad) = queries.iter().find(|q| q.dim() != data.parts()) {
        return Err(Error::DimensionMismatch {
            expected: data.parts(),
            found: bad.dim(),
        });
    }
    let smoother = Smoother::new(data, spec, options)?;
    let query_coords: Vec<IlrVector> = queries.iter().map(ilr).collect();
    let points = smoother.fit_points(&query_coords);
    let residuals = smoother
        .fit_points(data.ilr_coords())
        .into_iter()
        .zip(data.responses())
        .map(|(fit, y)| fit.map(|f| y - f.estimate))
        .collect();
    Ok(SmootherFit {
        method: options.method,
        bandwidth: spec.bandwidth().clone(),
        scale_mode: options.scale_mode,
        global_scale: smoother.global_scale(),
        points,
        residuals,
    })
}
