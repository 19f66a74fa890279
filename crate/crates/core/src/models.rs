//! Probability models on the simplex and the regression error laws.
//!
//! Samplers are generic over [`rand::Rng`]; reproducible experiments use
//! [`RngStream`], a ChaCha8 generator addressed by `(seed, stream_id)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::simplex::{closure, inv_ilr, IlrVector, SimplexPoint};

/// Attempts made before a Dirichlet draw with an underflowed gamma component is abandoned.
pub const DIRICHLET_MAX_ATTEMPTS: usize = 100;

/// Default standard deviation of the contaminating normal component.
pub const DEFAULT_SD_CONTAM: f64 = 0.1;

/// A deterministic random stream: identical `(seed, stream_id)` pairs give
/// identical draw sequences regardless of thread scheduling.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Shape vector of a Dirichlet law on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::DimensionTooSmall(alpha.len()));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet shape must be positive and finite, got {a}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Mean composition `alpha / sum(alpha)`.
    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.alpha.iter().sum();
        self.alpha.iter().map(|a| a / total).collect()
    }
}

/// Dirichlet density with respect to Lebesgue measure on the simplex.
pub fn dirichlet_density(x: &SimplexPoint, params: &DirichletParams) -> Result<f64> {
    if x.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: x.dim(),
        });
    }
    let total: f64 = params.alpha.iter().sum();
    let log_norm = ln_gamma(total) - params.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    let log_kernel: f64 = x
        .parts()
        .iter()
        .zip(&params.alpha)
        .map(|(p, a)| (a - 1.0) * p.ln())
        .sum();
    Ok((log_norm + log_kernel).exp())
}

/// Draws a Dirichlet composition as the closure of independent `Gamma(alpha_j, 1)` variates.
pub fn dirichlet_sample<R: Rng + ?Sized>(
    params: &DirichletParams,
    rng: &mut R,
) -> Result<SimplexPoint> {
    let gammas: Vec<Gamma<f64>> = params
        .alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("shape validated at construction"))
        .collect();
    let mut raw = vec![0.0; params.dim()];
    for _ in 0..DIRICHLET_MAX_ATTEMPTS {
        for (slot, g) in raw.iter_mut().zip(&gammas) {
            *slot = g.sample(rng);
        }
        if raw.iter().all(|v| *v > 0.0) {
            return closure(&raw);
        }
    }
    Err(Error::DegenerateDraw(DIRICHLET_MAX_ATTEMPTS))
}

/// Normal law on the simplex: ilr coordinates are `N(mu, sigma)` in the pivot basis.
#[derive(Debug, Clone)]
pub struct LogisticNormalParams {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl LogisticNormalParams {
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let k = mu.len();
        if k == 0 {
            return Err(Error::DimensionTooSmall(1));
        }
        if sigma.nrows() != k || sigma.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: sigma.nrows(),
            });
        }
        if !crate::linalg::is_symmetric(&sigma, 1e-10) {
            return Err(Error::SingularCovariance);
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::SingularCovariance)?;
        Ok(Self {
            mu: DVector::from_vec(mu),
            sigma,
            chol,
        })
    }

    pub fn mu(&self) -> &[f64] {
        self.mu.as_slice()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Number of parts `D` of the compositions this law generates.
    pub fn parts(&self) -> usize {
        self.mu.len() + 1
    }
}

/// Draws `z ~ N(mu, sigma)` in ilr coordinates and maps it back to the simplex.
pub fn logistic_normal_sample<R: Rng + ?Sized>(
    params: &LogisticNormalParams,
    rng: &mut R,
) -> Result<SimplexPoint> {
    inv_ilr(&logistic_normal_sample_ilr(params, rng)?)
}

/// Same draw as [`logistic_normal_sample`], returned in ilr coordinates.
pub fn logistic_normal_sample_ilr<R: Rng + ?Sized>(
    params: &LogisticNormalParams,
    rng: &mut R,
) -> Result<IlrVector> {
    let k = params.mu.len();
    let std: DVector<f64> = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
    let z = &params.mu + params.chol.l() * std;
    IlrVector::new(z.as_slice().to_vec())
}

/// `N_{D-1}(mu, sigma)` density at `v`.
pub fn logistic_normal_density_ilr(v: &IlrVector, params: &LogisticNormalParams) -> Result<f64> {
    let k = params.mu.len();
    if v.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: v.dim(),
        });
    }
    let diff = DVector::from_column_slice(v.coords()) - &params.mu;
    let solved = params.chol.solve(&diff);
    let quad = diff.dot(&solved);
    let log_det: f64 = params
        .chol
        .l()
        .diagonal()
        .iter()
        .map(|d| 2.0 * d.ln())
        .sum();
    let log_density =
        -0.5 * (k as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * quad;
    Ok(log_density.exp())
}

/// Two-component Gaussian error law `(1 - delta) N(0, 1) + delta N(mu_shift, sd_contam^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorLaw {
    delta: f64,
    mu_shift: f64,
    sd_contam: f64,
}

impl ErrorLaw {
    pub fn new(delta: f64, mu_shift: f64, sd_contam: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "contamination fraction must lie in [0, 1), got {delta}"
            )));
        }
        if !mu_shift.is_finite() {
            return Err(Error::NonFinite("contamination shift"));
        }
        if !(sd_contam.is_finite() && sd_contam > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "contamination sd must be positive, got {sd_contam}"
            )));
        }
        Ok(Self {
            delta,
            mu_shift,
            sd_contam,
        })
    }

    /// Uncontaminated standard normal errors.
    pub fn clean() -> Self {
        Self {
            delta: 0.0,
            mu_shift: 0.0,
            sd_contam: DEFAULT_SD_CONTAM,
        }
    }

    /// Shifted contamination with the default contaminating sd.
    pub fn contaminated(delta: f64, mu_shift: f64) -> Result<Self> {
        Self::new(delta, mu_shift, DEFAULT_SD_CONTAM)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mu_shift(&self) -> f64 {
        self.mu_shift
    }

    pub fn sd_contam(&self) -> f64 {
        self.sd_contam
    }
}

/// One draw from `law`. Always consumes one uniform and one normal variate.
pub fn error_sample<R: Rng + ?Sized>(law: &ErrorLaw, rng: &mut R) -> f64 {
    error_sample_tagged(law, rng).0
}

/// Like [`error_sample`], also reporting whether the contaminating component was drawn.
pub fn error_sample_tagged<R: Rng + ?Sized>(law: &ErrorLaw, rng: &mut R) -> (f64, bool) {
    let u: f64 = rng.random();
    let z: f64 = StandardNormal.sample(rng);
    if u < law.delta {
        (law.mu_shift + law.sd_contam * z, true)
    } else {
        (z, false)
    }
}
