//! Aitchison geometry on the simplex.
//!
//! Compositions are stored closed (unit sum) with strictly positive parts.
//! Perturbation and powering make the simplex a real vector space of
//! dimension `D - 1`; the three log-ratio maps (alr, clr, ilr) carry it
//! onto ordinary coordinate spaces, and ilr does so isometrically.
//!
//! The ilr map always uses the pivot (balance) basis
//!
//! ```text
//! u*_j = sqrt(j / (j + 1)) * log( g(u_1, ..., u_j) / u_{j+1} ),   j = 1..D-1
//! ```
//!
//! where `g` is the geometric mean.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance on the sum of a clr vector accepted by [`inv_clr`].
pub const CLR_SUM_TOLERANCE: f64 = 1e-8;

/// A `D`-part composition with strictly positive parts summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    parts: Vec<f64>,
}

impl SimplexPoint {
    /// Closes `raw` onto the simplex. Alias of [`closure`].
    pub fn new(raw: &[f64]) -> Result<Self> {
        closure(raw)
    }

    /// The neutral element `(1/D, ..., 1/D)`.
    pub fn neutral(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        Ok(Self {
            parts: vec![1.0 / dim as f64; dim],
        })
    }

    pub fn parts(&self) -> &[f64] {
        &self.parts
    }

    /// Number of parts `D`.
    pub fn dim(&self) -> usize {
        self.parts.len()
    }

    /// The perturbation-inverse `C(1/x_1, ..., 1/x_D)`.
    pub fn inverse(&self) -> Self {
        power(-1.0, self).expect("inverse of a valid composition is valid")
    }

    /// Geometric mean of the parts.
    pub fn geometric_mean(&self) -> f64 {
        let mean_log = self.parts.iter().map(|p| p.ln()).sum::<f64>() / self.dim() as f64;
        mean_log.exp()
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

/// Isometric log-ratio coordinates of a composition (length `D - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct IlrVector {
    coords: Vec<f64>,
}

impl IlrVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionTooSmall(1));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("ilr coordinates"));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Number of coordinates, `D - 1`.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// The `D x (D-1)` contrast matrix `U` of the pivot basis: `ilr(x) = U^T log(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    entries: DMatrix<f64>,
}

impl ContrastMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Number of parts `D`.
    pub fn parts(&self) -> usize {
        self.entries.nrows()
    }
}

/// Normalizes strictly positive values to unit sum.
pub fn closure(raw: &[f64]) -> Result<SimplexPoint> {
    if raw.len() < 2 {
        return Err(Error::DimensionTooSmall(raw.len()));
    }
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite("composition part"));
        }
        if value <= 0.0 {
            return Err(Error::NonPositivePart { index, value });
        }
    }
    let total: f64 = raw.iter().sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("composition sum"));
    }
    let parts: Vec<f64> = raw.iter().map(|v| v / total).collect();
    if let Some(index) = parts.iter().position(|&p| p <= 0.0) {
        return Err(Error::NonPositivePart {
            index,
            value: parts[index],
        });
    }
    Ok(SimplexPoint { parts })
}

/// Closure of `exp(v)`, shifted by `max(v)` so large coordinates do not overflow.
fn closure_of_exp(v: &[f64]) -> Result<SimplexPoint> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("log-ratio coordinates"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = v.iter().map(|c| (c - max).exp()).collect();
    closure(&raw)
}

/// Perturbation `x ⊕ y = C(x_1 y_1, ..., x_D y_D)`.
pub fn perturb(x: &SimplexPoint, y: &SimplexPoint) -> Result<SimplexPoint> {
    x.check_same_dim(y)?;
    let logs: Vec<f64> = x
        .parts
        .iter()
        .zip(&y.parts)
        .map(|(a, b)| a.ln() + b.ln())
        .collect();
    closure_of_exp(&logs)
}

/// Powering `alpha ⊙ x = C(x_1^alpha, ..., x_D^alpha)`.
pub fn power(alpha: f64, x: &SimplexPoint) -> Result<SimplexPoint> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite("powering scalar"));
    }
    let logs: Vec<f64> = x.parts.iter().map(|p| alpha * p.ln()).collect();
    closure_of_exp(&logs)
}

/// Difference perturbation `x ⊖ y = C(x_1 / y_1, ..., x_D / y_D)`.
pub fn perturb_diff(x: &SimplexPoint, y: &SimplexPoint) -> Result<SimplexPoint> {
    x.check_same_dim(y)?;
    let logs: Vec<f64> = x
        .parts
        .iter()
        .zip(&y.parts)
        .map(|(a, b)| a.ln() - b.ln())
        .collect();
    closure_of_exp(&logs)
}

/// Aitchison inner product, evaluated as the dot product of clr images.
pub fn aitchison_inner(x: &SimplexPoint, y: &SimplexPoint) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(clr(x).iter().zip(clr(y)).map(|(a, b)| a * b).sum())
}

/// Aitchison norm `sqrt(<x, x>_a)`.
pub fn aitchison_norm(x: &SimplexPoint) -> f64 {
    clr(x).iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Aitchison distance `||x ⊖ y||_a`.
pub fn aitchison_dist(x: &SimplexPoint, y: &SimplexPoint) -> Result<f64> {
    x.check_same_dim(y)?;
    let cx = clr(x);
    let cy = clr(y);
    Ok(cx
        .iter()
        .zip(&cy)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Additive log-ratio `log(x_j / x_D)`, `j = 1..D-1`.
pub fn alr(x: &SimplexPoint) -> Vec<f64> {
    let last = x.parts[x.dim() - 1].ln();
    x.parts[..x.dim() - 1].iter().map(|p| p.ln() - last).collect()
}

/// Inverse of [`alr`]: `C(exp(v_1), ..., exp(v_{D-1}), 1)`.
pub fn inv_alr(v: &[f64]) -> Result<SimplexPoint> {
    let mut logs = v.to_vec();
    logs.push(0.0);
    closure_of_exp(&logs)
}

/// Centred log-ratio `log(x_j / g(x))`; the output sums to zero.
pub fn clr(x: &SimplexPoint) -> Vec<f64> {
    let logs: Vec<f64> = x.parts.iter().map(|p| p.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - mean).collect()
}

/// Inverse of [`clr`]. The input must lie in the zero-sum hyperplane.
pub fn inv_clr(v: &[f64]) -> Result<SimplexPoint> {
    if v.len() < 2 {
        return Err(Error::DimensionTooSmall(v.len()));
    }
    let sum: f64 = v.iter().sum();
    if !(sum.abs() <= CLR_SUM_TOLERANCE) {
        return Err(Error::NotInHyperplane(sum));
    }
    closure_of_exp(v)
}

/// Contrast matrix of the pivot basis for `dim` parts.
///
/// Column `j` (1-based) has `1/sqrt(j(j+1))` in rows `1..=j`,
/// `-sqrt(j/(j+1))` in row `j+1` and zeros below.
pub fn pivot_contrast_matrix(dim: usize) -> Result<ContrastMatrix> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let mut u = DMatrix::zeros(dim, dim - 1);
    for col in 0..dim - 1 {
        let j = (col + 1) as f64;
        let head = 1.0 / (j * (j + 1.0)).sqrt();
        for row in 0..=col {
            u[(row, col)] = head;
        }
        u[(col + 1, col)] = -(j / (j + 1.0)).sqrt();
    }
    Ok(ContrastMatrix { entries: u })
}

/// Pivot ilr coordinates, computed with running log sums in `O(D)`.
pub fn ilr(x: &SimplexPoint) -> IlrVector {
    let logs: Vec<f64> = x.parts.iter().map(|p| p.ln()).collect();
    let mut coords = Vec::with_capacity(x.dim() - 1);
    let mut running = 0.0;
    for j in 1..x.dim() {
        running += logs[j - 1];
        let jf = j as f64;
        coords.push((jf / (jf + 1.0)).sqrt() * (running / jf - logs[j]));
    }
    IlrVector { coords }
}

/// Inverse pivot ilr: `C(exp(U z))`, with `U z` evaluated from the closed-form columns.
pub fn inv_ilr(z: &IlrVector) -> Result<SimplexPoint> {
    let d = z.dim() + 1;
    let mut clr_coords = vec![0.0; d];
    // tail[l] = sum_{j >= l+1} z_j / sqrt(j (j+1)), 1-based j
    let mut tail = 0.0;
    for row in (0..d).rev() {
        if row < d - 1 {
            let j = (row + 1) as f64;
            tail += z.coords[row] / (j * (j + 1.0)).sqrt();
        }
        let mut value = tail;
        if row > 0 {
            let l = row as f64;
            value -= (l / (l + 1.0)).sqrt() * z.coords[row - 1];
        }
        clr_coords[row] = value;
    }
    closure_of_exp(&clr_coords)
}
