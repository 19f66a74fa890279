//! Monte Carlo comparison of the four estimators on Dirichlet covariates.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{Dataset, KernelSpec};
use crate::models::{dirichlet_sample, error_sample_tagged, DirichletParams, ErrorLaw, RngStream};
use crate::robust::{MSmootherConfig, ScaleMode};
use crate::simplex::{aitchison_inner, ilr, IlrVector, SimplexPoint};
use crate::smoother::{FitOptions, Method, Smoother};

/// Regression coefficient composition of the reference design.
pub const REFERENCE_B: [f64; 3] = [0.05920067, 0.7193872, 0.2214121];
/// Fraction of excluded replications above which an estimator's aggregate is not trusted.
pub const MAX_EXCLUSION_FRACTION: f64 = 0.01;

/// `sin(<x, b>_a)`.
pub fn true_regression(x: &SimplexPoint, b_comp: &SimplexPoint) -> Result<f64> {
    Ok(aitchison_inner(x, b_comp)?.sin())
}

/// Short, file-name safe tag: `C0` or `C1_<delta>_<shift>`.
pub fn error_law_label(law: &ErrorLaw) -> String {
    if law.delta() == 0.0 {
        "C0".to_string()
    } else {
        format!("C1_{:.2}_{}", law.delta(), law.mu_shift())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McScenario {
    pub name: String,
    pub alpha: DirichletParams,
    pub b_comp: SimplexPoint,
    pub sigma: f64,
    pub error_law: ErrorLaw,
    pub n: usize,
    pub n_reps: usize,
    pub n_pred: usize,
    /// Isotropic bandwidth, `H = h I`.
    pub h: f64,
    pub methods: Vec<Method>,
    pub robust: MSmootherConfig,
    pub seed: u64,
}

impl McScenario {
    /// The reference design with `alpha` and `h`: `n = 100`, 500 replications, 100 prediction points.
    pub fn reference(alpha: [f64; 3], h: f64, error_law: ErrorLaw, seed: u64) -> Result<Self> {
        let alpha = DirichletParams::new(alpha.to_vec())?;
        let label = alpha
            .alpha()
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join("-");
        Ok(Self {
            name: format!("a{label}_{}", error_law_label(&error_law)),
            alpha,
            b_comp: SimplexPoint::new(&REFERENCE_B)?,
            sigma: 1.0,
            error_law,
            n: 100,
            n_reps: 500,
            n_pred: 100,
            h,
            methods: Method::ALL.to_vec(),
            robust: MSmootherConfig::default(),
            seed,
        })
    }

    /// `alpha = (5, 7, 1)`, `H = 2 I`.
    pub fn alpha_571(error_law: ErrorLaw, seed: u64) -> Result<Self> {
        Self::reference([5.0, 7.0, 1.0], 2.0, error_law, seed)
    }

    /// `alpha = (5, 7, 4)`, `H = I`.
    pub fn alpha_574(error_law: ErrorLaw, seed: u64) -> Result<Self> {
        Self::reference([5.0, 7.0, 4.0], 1.0, error_law, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_reps == 0 || self.n_pred == 0 {
            return Err(Error::InvalidParameter(
                "n, n_reps and n_pred must be at least 1".into(),
            ));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {}",
                self.h
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.b_comp.dim() != self.alpha.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.alpha.dim(),
                found: self.b_comp.dim(),
            });
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no estimators requested".into()));
        }
        Ok(())
    }
}

/// One simulated sample together with fresh prediction covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub data: Dataset,
    pub prediction_points: Vec<SimplexPoint>,
    /// Whether each error was drawn from the contaminating component.
    pub contaminated: Vec<bool>,
}

/// Draws replication `rep_index` from stream `(seed, rep_index)`: `n` covariates,
/// then `n` errors, then `n_pred` prediction covariates.
pub fn generate_replication(sc: &McScenario, rep_index: u64) -> Result<Replication> {
    let mut rng = RngStream::new(sc.seed, rep_index);
    let xs = (0..sc.n)
        .map(|_| dirichlet_sample(&sc.alpha, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut ys = Vec::with_capacity(sc.n);
    let mut contaminated = Vec::with_capacity(sc.n);
    for x in &xs {
        let (eps, outlying) = error_sample_tagged(&sc.error_law, &mut rng);
        contaminated.push(outlying);
        ys.push(true_regression(x, &sc.b_comp)? + sc.sigma * eps);
    }
    let prediction_points = (0..sc.n_pred)
        .map(|_| dirichlet_sample(&sc.alpha, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Replication {
        data: Dataset::new(xs, ys)?,
        prediction_points,
        contaminated,
    })
}

/// `(1/M) sum_s (estimate_s - truth_s)^2`.
pub fn ise(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truths.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::InvalidParameter("empty prediction grid".into()));
    }
    Ok(estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t).powi(2))
        .sum::<f64>()
        / truths.len() as f64)
}

/// Squared bias of the replication-averaged estimate, averaged over the grid.
/// Each row of `all_estimates` holds one replication.
pub fn squared_bias(all_estimates: &[Vec<f64>], truths: &[f64]) -> Result<f64> {
    if all_estimates.is_empty() {
        return Err(Error::InvalidParameter("no replications".into()));
    }
    if let Some(row) = all_estimates.iter().find(|r| r.len() != truths.len()) {
        return Err(Error::LengthMismatch {
            left: truths.len(),
            right: row.len(),
        });
    }
    let reps = all_estimates.len() as f64;
    let mean: Vec<f64> = (0..truths.len())
        .map(|s| all_estimates.iter().map(|r| r[s]).sum::<f64>() / reps)
        .collect();
    ise(&mean, truths)
}

/// Aggregates of one estimator over the replications it did not fail on.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub method: Method,
    /// `NaN` if every replication failed.
    pub mise: f64,
    pub bias2: f64,
    /// Per-replication ISE; `None` for excluded replications.
    pub ise: Vec<Option<f64>>,
    /// Replications excluded for a failed or non-converged fit.
    pub n_failures: usize,
    /// Prediction points, over all replications, where a local linear fit fell back to local constant.
    pub n_fallback_points: usize,
}

impl EstimatorSummary {
    pub fn exclusion_fraction(&self) -> f64 {
        self.n_failures as f64 / self.ise.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub scenario: String,
    pub estimators: Vec<EstimatorSummary>,
    /// The grid shared by every replication.
    pub prediction_points: Vec<SimplexPoint>,
    pub truths: Vec<f64>,
}

impl McReport {
    pub fn estimator(&self, method: Method) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.method == method)
    }

    /// True when no estimator lost more than 1% of its replications.
    pub fn within_exclusion_budget(&self) -> bool {
        self.estimators
            .iter()
            .all(|e| e.exclusion_fraction() <= MAX_EXCLUSION_FRACTION)
    }
}

struct RepOutcome {
    estimates: Option<Vec<f64>>,
    fallbacks: usize,
}

fn fit_replication(
    sc: &McScenario,
    spec: &KernelSpec,
    grid: &[IlrVector],
    rep: &Replication,
) -> Vec<RepOutcome> {
    sc.methods
        .iter()
        .map(|&method| {
            let options = FitOptions {
                method,
                robust: sc.robust,
                scale_mode: ScaleMode::Global,
                fallback_to_constant: true,
            };
            let Ok(smoother) = Smoother::new(&rep.data, spec, &options) else {
                return RepOutcome {
                    estimates: None,
                    fallbacks: 0,
                };
            };
            let fits: Vec<_> = grid.iter().map(|x| smoother.fit_point(x)).collect();
            let fallbacks = fits
                .iter()
                .filter(|f| f.as_ref().is_ok_and(|p| p.fell_back))
                .count();
            let estimates = fits
                .into_iter()
                .map(|f| f.ok().filter(|p| p.converged).map(|p| p.estimate))
                .collect::<Option<Vec<f64>>>();
            RepOutcome {
                estimates,
                fallbacks,
            }
        })
        .collect()
}

/// Runs every replication (in parallel; results do not depend on the thread
/// count) and aggregates per estimator on the grid drawn by replication 0.
pub fn run_study(sc: &McScenario) -> Result<McReport> {
    sc.validate()?;
    let spec = KernelSpec::isotropic(sc.h, sc.alpha.dim() - 1)?;
    let grid_points = generate_replication(sc, 0)?.prediction_points;
    let grid: Vec<IlrVector> = grid_points.iter().map(ilr).collect();
    let truths = grid_points
        .iter()
        .map(|x| true_regression(x, &sc.b_comp))
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<Vec<RepOutcome>> = (0..sc.n_reps as u64)
        .into_par_iter()
        .map(|r| Ok(fit_replication(sc, &spec, &grid, &generate_replication(sc, r)?)))
        .collect::<Result<_>>()?;

    let estimators = sc
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let rows: Vec<&RepOutcome> = outcomes.iter().map(|o| &o[k]).collect();
            let ise_values: Vec<Option<f64>> = rows
                .iter()
                .map(|o| o.estimates.as_ref().map(|e| ise(e, &truths).expect("grid-sized")))
                .collect();
            let kept: Vec<Vec<f64>> = rows.iter().filter_map(|o| o.estimates.clone()).collect();
            let ok: Vec<f64> = ise_values.iter().flatten().copied().collect();
            let (mise, bias2) = if ok.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (
                    ok.iter().sum::<f64>() / ok.len() as f64,
                    squared_bias(&kept, &truths)?,
                )
            };
            Ok(EstimatorSummary {
                method,
                mise,
                bias2,
                n_failures: ise_values.len() - ok.len(),
                ise: ise_values,
                n_fallback_points: rows.iter().map(|o| o.fallbacks).sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(McReport {
        scenario: sc.name.clone(),
        estimators,
        prediction_points: grid_points,
        truths,
    })
}
