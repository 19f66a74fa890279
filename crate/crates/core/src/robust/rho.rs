//! Rho-functions, their scores and IRWLS weights.
//!
//! Every family is parameterized as `rho_c(r) = rho(r / c)` with the score
//! `psi_c = d/dr rho_c` and the weight `W_c(r) = psi_c(r) / r`.

use crate::error::{Error, Result};

/// Tuning constant of the Tukey rho in the S-scale equation (Fisher-consistent at the normal with `b = 1/2`).
pub const TUKEY_SCALE_C0: f64 = 1.54764;
/// Tuning constant of the Tukey rho used by the M-smoothers.
pub const TUKEY_LOCATION_C1: f64 = 4.685;
/// Right-hand side of the S-scale equation.
pub const S_SCALE_B: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoFamily {
    /// `min(3s^2 - 3s^4 + s^6, 1)`.
    TukeyBisquare,
    /// `s^2 / 2` inside `[-1, 1]`, `|s| - 1/2` outside. Unbounded.
    Huber,
    /// `1{|s| > 1}`. Only meaningful inside scale equations.
    HardRejection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSpec {
    family: RhoFamily,
    c: f64,
}

impl RhoSpec {
    pub fn new(family: RhoFamily, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho tuning constant must be positive, got {c}"
            )));
        }
        Ok(Self { family, c })
    }

    pub fn tukey(c: f64) -> Result<Self> {
        Self::new(RhoFamily::TukeyBisquare, c)
    }

    pub fn huber(c: f64) -> Result<Self> {
        Self::new(RhoFamily::Huber, c)
    }

    pub fn hard_rejection() -> Self {
        Self {
            family: RhoFamily::HardRejection,
            c: 1.0,
        }
    }

    pub fn family(&self) -> RhoFamily {
        self.family
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `sup rho`, or `None` for unbounded families.
    pub fn sup(&self) -> Option<f64> {
        match self.family {
            RhoFamily::TukeyBisquare | RhoFamily::HardRejection => Some(1.0),
            RhoFamily::Huber => None,
        }
    }

    pub fn rho(&self, r: f64) -> f64 {
        let s = r / self.c;
        match self.family {
            RhoFamily::TukeyBisquare => {
                if s.abs() >= 1.0 {
                    1.0
                } else {
                    let s2 = s * s;
                    s2 * (3.0 - 3.0 * s2 + s2 * s2)
                }
            }
            RhoFamily::Huber => {
                if s.abs() <= 1.0 {
                    0.5 * s * s
                } else {
                    s.abs() - 0.5
                }
            }
            RhoFamily::HardRejection => {
                if s.abs() > 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn psi(&self, r: f64) -> f64 {
        let s = r / self.c;
        match self.family {
            RhoFamily::TukeyBisquare => {
                if s.abs() > 1.0 {
                    0.0
                } else {
                    let s2 = s * s;
                    6.0 * s * (1.0 - s2) * (1.0 - s2) / self.c
                }
            }
            RhoFamily::Huber => s.clamp(-1.0, 1.0) / self.c,
            RhoFamily::HardRejection => 0.0,
        }
    }

    /// `psi(r) / r`, extended continuously to `r = 0`.
    pub fn weight(&self, r: f64) -> f64 {
        let s = r / self.c;
        let c2 = self.c * self.c;
        match self.family {
            RhoFamily::TukeyBisquare => {
                if s.abs() > 1.0 {
                    0.0
                } else {
                    let t = 1.0 - s * s;
                    6.0 * t * t / c2
                }
            }
            RhoFamily::Huber => {
                if s.abs() <= 1.0 {
                    1.0 / c2
                } else {
                    1.0 / (c2 * s.abs())
                }
            }
            RhoFamily::HardRejection => 0.0,
        }
    }
}

pub fn rho(spec: &RhoSpec, r: f64) -> f64 {
    spec.rho(r)
}

pub fn psi(spec: &RhoSpec, r: f64) -> f64 {
    spec.psi(r)
}

pub fn weight_w(spec: &RhoSpec, r: f64) -> f64 {
    spec.weight(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tukey_unit_values() {
        let t = RhoSpec::tukey(1.0).unwrap();
        assert_eq!(t.rho(0.0), 0.0);
        assert_eq!(t.rho(1.0), 1.0);
        assert_eq!(t.rho(-3.0), 1.0);
        assert!((t.psi(0.5) - 1.6875).abs() < 1e-15);
        assert_eq!(t.weight(0.0), 6.0);
    }

    #[test]
    fn tukey_weight_vanishes_at_c() {
        let t = RhoSpec::tukey(4.685).unwrap();
        assert!(t.weight(4.685 * (1.0 - 1e-9)) < 1e-15);
        assert_eq!(t.weight(4.685 * (1.0 + 1e-9)), 0.0);
        assert_eq!(t.weight(4.685), 0.0);
    }

    #[test]
    fn psi_is_derivative_of_rho() {
        let specs = [
            RhoSpec::tukey(1.7).unwrap(),
            RhoSpec::huber(1.3).unwrap(),
        ];
        let h = 1e-6;
        for spec in specs {
            for r in [-2.5, -1.0, -0.4, 0.1, 0.9, 1.2, 3.0] {
                let fd = (spec.rho(r + h) - spec.rho(r - h)) / (2.0 * h);
                assert!((fd - spec.psi(r)).abs() < 1e-6, "{spec:?} at {r}");
                assert!((spec.weight(r) * r - spec.psi(r)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rho_shape() {
        for spec in [
            RhoSpec::tukey(2.0).unwrap(),
            RhoSpec::huber(1.0).unwrap(),
            RhoSpec::hard_rejection(),
        ] {
            let mut prev = spec.rho(0.0);
            assert_eq!(prev, 0.0);
            for i in 1..200 {
                let r = i as f64 * 0.05;
                assert_eq!(spec.rho(r), spec.rho(-r));
                assert!(spec.rho(r) >= prev);
                prev = spec.rho(r);
            }
        }
    }

    #[test]
    fn nonpositive_tuning_rejected() {
        assert!(RhoSpec::tukey(0.0).is_err());
        assert!(RhoSpec::huber(f64::NAN).is_err());
    }
}
