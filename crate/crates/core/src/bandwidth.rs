//! Cross-validated choice of an isotropic bandwidth `H = h I`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::{Dataset, KernelSpec};
use crate::models::RngStream;
use crate::robust::{s_scale, RhoSpec, S_SCALE_B, TUKEY_SCALE_C0};
use crate::smoother::{FitOptions, Smoother};

/// Normal-consistency factor of the MAD.
pub const MAD_CONSISTENCY: f64 = 1.4826;
/// Tuning constants of the tau-scale: weights for the location, truncation for the scale.
pub const TAU_C1: f64 = 4.5;
pub const TAU_C2: f64 = 3.0;
/// Fraction of failed predictions above which a candidate is dropped.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
/// Scores within `TIE_TOLERANCE * var(y)` of the minimum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Folds {
    LeaveOneOut,
    K(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvCriterion {
    /// Mean squared cross-validation residual.
    LeastSquares,
    /// Squared robust location plus squared robust dispersion of the residuals.
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Location {
    #[default]
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dispersion {
    /// MAD scaled by 1.4826.
    #[default]
    Mad,
    /// Tau-scale with normal consistency.
    Tau,
    /// Tukey S-scale, `c0 = 1.54764`, `b = 1/2`.
    S,
}

/// Second pass around the first-pass winner: `chosen + j * step` for `|j * step| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub step: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    grid: Vec<f64>,
    folds: Folds,
    criterion: CvCriterion,
    location: Location,
    dispersion: Dispersion,
    seed: u64,
    refine: Option<Refinement>,
}

impl CvConfig {
    pub fn new(grid: Vec<f64>, folds: Folds, criterion: CvCriterion, seed: u64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidParameter("bandwidth grid is empty".into()));
        }
        if grid.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidParameter(
                "bandwidth candidates must be positive".into(),
            ));
        }
        if grid.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParameter(
                "bandwidth grid must be strictly increasing".into(),
            ));
        }
        if let Folds::K(k) = folds {
            if k < 2 {
                return Err(Error::InvalidParameter(format!(
                    "need at least 2 folds, got {k}"
                )));
            }
        }
        Ok(Self {
            grid,
            folds,
            criterion,
            location: Location::Median,
            dispersion: Dispersion::Mad,
            seed,
            refine: None,
        })
    }

    pub fn with_dispersion(mut self, dispersion: Dispersion) -> Self {
        self.dispersion = dispersion;
        self
    }

    pub fn with_refinement(mut self, step: f64, radius: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0 && radius.is_finite() && radius >= step) {
            return Err(Error::InvalidParameter(format!(
                "refinement needs 0 < step <= radius, got step {step}, radius {radius}"
            )));
        }
        self.refine = Some(Refinement { step, radius });
        Ok(self)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn folds(&self) -> Folds {
        self.folds
    }

    pub fn criterion(&self) -> CvCriterion {
        self.criterion
    }

    pub fn location(&self) -> Location {
        self.location
    }

    pub fn dispersion(&self) -> Dispersion {
        self.dispersion
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn refinement(&self) -> Option<Refinement> {
        self.refine
    }
}

/// Assignment of observations to folds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FoldPartition {
    fold_of: Vec<usize>,
    n_folds: usize,
}

impl FoldPartition {
    /// Leave-one-out keeps index order; K folds shuffle the indices and cut them
    /// into contiguous blocks whose sizes differ by at most one.
    pub fn new(n: usize, folds: Folds, rng: &mut RngStream) -> Result<Self> {
        match folds {
            Folds::LeaveOneOut => {
                if n < 2 {
                    return Err(Error::FoldTooSmall);
                }
                Ok(Self {
                    fold_of: (0..n).collect(),
                    n_folds: n,
                })
            }
            Folds::K(k) => {
                if k < 2 || k > n {
                    return Err(Error::InvalidParameter(format!(
                        "{k} folds for {n} observations"
                    )));
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(rng);
                let mut fold_of = vec![0; n];
                let (base, extra) = (n / k, n % k);
                let mut pos = 0;
                for fold in 0..k {
                    let size = base + usize::from(fold < extra);
                    for &i in &order[pos..pos + size] {
                        fold_of[i] = fold;
                    }
                    pos += size;
                }
                Ok(Self { fold_of, n_folds: k })
            }
        }
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    /// Indices in `fold`, ascending.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Indices outside `fold`, ascending.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.hash(&mut hasher);
        hasher.finish()
    }
}

/// `y_i - m_hat^{(-fold(i))}(x_i)` for every observation, in index order.
///
/// Robust fits recompute their global scale on each training set.
pub fn cv_residuals(
    data: &Dataset,
    h: f64,
    options: &FitOptions,
    partition: &FoldPartition,
) -> Result<Vec<Result<f64>>> {
    if partition.fold_of.len() != data.len() {
        return Err(Error::LengthMismatch {
            left: data.len(),
            right: partition.fold_of.len(),
        });
    }
    let spec = KernelSpec::isotropic(h, data.parts() - 1)?;
    let per_fold: Vec<Vec<(usize, Result<f64>)>> = (0..partition.n_folds())
        .into_par_iter()
        .map(|fold| {
            let held_out = partition.members(fold);
            let fitted = data
                .subset(&partition.training(fold))
                .and_then(|train| {
                    let smoother = Smoother::new(&train, &spec, options)?;
                    Ok(held_out
                        .iter()
                        .map(|&i| {
                            smoother
                                .fit_point(&data.ilr_coords()[i])
                                .map(|f| data.responses()[i] - f.estimate)
                        })
                        .collect::<Vec<_>>())
                });
            match fitted {
                Ok(res) => held_out.into_iter().zip(res).collect(),
                Err(e) => held_out.into_iter().map(|i| (i, Err(e.clone()))).collect(),
            }
        })
        .collect();
    let mut out: Vec<Result<f64>> = vec![Err(Error::FoldTooSmall); data.len()];
    for (i, r) in per_fold.into_iter().flatten() {
        out[i] = r;
    }
    Ok(out)
}

pub fn score_ls(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64
}

/// `mu^2 + s^2` with `mu` the median and `s` the chosen dispersion of the residuals.
pub fn score_robust(residuals: &[f64], location: Location, dispersion: Dispersion) -> f64 {
    let mu = match location {
        Location::Median => median(residuals),
    };
    let s = match dispersion {
        Dispersion::Mad => mad(residuals, mu),
        Dispersion::Tau => tau_scale(residuals),
        Dispersion::S => {
            let centred: Vec<f64> = residuals.iter().map(|r| r - mu).collect();
            let w = vec![1.0 / residuals.len() as f64; residuals.len()];
            let rho = RhoSpec::tukey(TUKEY_SCALE_C0).expect("positive constant");
            s_scale(&w, &centred, &rho, S_SCALE_B).unwrap_or(0.0)
        }
    };
    mu * mu + s * s
}

/// Sample median, averaging the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Normalized median absolute deviation about `center`.
pub fn mad(values: &[f64], center: f64) -> f64 {
    let abs: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    MAD_CONSISTENCY * median(&abs)
}

/// Tau-scale: a bisquare-weighted location, then a truncated quadratic scale,
/// divided by its expectation under the standard normal.
pub fn tau_scale(values: &[f64]) -> f64 {
    let med = median(values);
    let s0 = mad(values, med);
    if s0 == 0.0 {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for v in values {
        let u = (v - med) / (TAU_C1 * s0);
        if u.abs() < 1.0 {
            let w = (1.0 - u * u).powi(2);
            num += w * v;
            den += w;
        }
    }
    let mu = num / den;
    let c2sq = TAU_C2 * TAU_C2;
    let mean_rho = values
        .iter()
        .map(|v| ((v - mu) / s0).powi(2).min(c2sq))
        .sum::<f64>()
        / values.len() as f64;
    let normal = Normal::standard();
    let expected = 2.0 * ((1.0 - c2sq) * normal.cdf(TAU_C2) - TAU_C2 * normal.pdf(TAU_C2) + c2sq)
        - 1.0;
    s0 * (mean_rho / expected).sqrt()
}

/// Criterion value and cross-validation residuals at one bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct CvEntry {
    pub h: f64,
    /// `None` if too many predictions failed.
    pub score: Option<f64>,
    pub n_failures: usize,
    /// `None` where the prediction failed.
    pub residuals: Vec<Option<f64>>,
    /// Whether the candidate came from the refinement pass.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub entries: Vec<CvEntry>,
    pub chosen_h: f64,
    pub partition_fingerprint: u64,
}

impl CvResult {
    pub fn chosen(&self) -> &CvEntry {
        self.entries
            .iter()
            .find(|e| e.h == self.chosen_h)
            .expect("chosen bandwidth is among the entries")
    }
}

fn evaluate(
    data: &Dataset,
    h: f64,
    cfg: &CvConfig,
    options: &FitOptions,
    partition: &FoldPartition,
    refined: bool,
) -> Result<CvEntry> {
    let residuals: Vec<Option<f64>> = cv_residuals(data, h, options, partition)?
        .into_iter()
        .map(|r| r.ok())
        .collect();
    let ok: Vec<f64> = residuals.iter().flatten().copied().collect();
    let n_failures = residuals.len() - ok.len();
    let usable = !ok.is_empty() && n_failures as f64 <= MAX_FAILURE_FRACTION * data.len() as f64;
    let score = usable.then(|| match cfg.criterion {
        CvCriterion::LeastSquares => score_ls(&ok),
        CvCriterion::Robust => score_robust(&ok, cfg.location, cfg.dispersion),
    });
    Ok(CvEntry {
        h,
        score,
        n_failures,
        residuals,
        refined,
    })
}

/// Smallest `h` whose score is within the tie tolerance of the best score.
fn argmin(entries: &[CvEntry], tie: f64) -> Option<f64> {
    let best = entries
        .iter()
        .filter_map(|e| e.score)
        .fold(f64::INFINITY, f64::min);
    entries
        .iter()
        .filter(|e| e.score.is_some_and(|s| s <= best + tie))
        .map(|e| e.h)
        .min_by(f64::total_cmp)
}

/// Evaluates the criterion over the grid (and the refinement, if configured) on
/// one shared fold partition and returns the minimizer.
pub fn select_bandwidth(data: &Dataset, cfg: &CvConfig, options: &FitOptions) -> Result<CvResult> {
    let mut rng = RngStream::new(cfg.seed, 0);
    let partition = FoldPartition::new(data.len(), cfg.folds, &mut rng)?;
    let y = data.responses();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    let tie = TIE_TOLERANCE * var;

    let mut entries: Vec<CvEntry> = cfg
        .grid
        .par_iter()
        .map(|&h| evaluate(data, h, cfg, options, &partition, false))
        .collect::<Result<_>>()?;
    let no_usable = Error::NoUsableBandwidth((MAX_FAILURE_FRACTION * 100.0) as u32);
    let mut chosen = argmin(&entries, tie).ok_or_else(|| no_usable.clone())?;

    if let Some(Refinement { step, radius }) = cfg.refine {
        let reach = (radius / step + 1e-9).floor() as i64;
        let extra: Vec<f64> = (-reach..=reach)
            .map(|j| chosen + j as f64 * step)
            .filter(|&h| h > 0.0)
            .filter(|h| !entries.iter().any(|e| (e.h - h).abs() <= 1e-12 * h))
            .collect();
        let more: Vec<CvEntry> = extra
            .par_iter()
            .map(|&h| evaluate(data, h, cfg, options, &partition, true))
            .collect::<Result<_>>()?;
        entries.extend(more);
        entries.sort_by(|a, b| a.h.total_cmp(&b.h));
        chosen = argmin(&entries, tie).ok_or(no_usable)?;
    }

    Ok(CvResult {
        entries,
        chosen_h: chosen,
        partition_fingerprint: partition.fingerprint(),
    })
}
