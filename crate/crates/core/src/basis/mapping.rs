//! Monotone maps between the unbounded covariate domain and `(-1, 1)`.
//!
//! A mapping is a pair `x = g(y; s)` / `y = u(x; s)` with `g' > 0`, sending
//! `(-1, 1)` onto the whole line or the positive half-line. Basis functions on
//! `[0, 1]` are transported through `ŷ(x) = (u(x; s) + 1) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingKind {
    Algebraic,
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingDomain {
    WholeLine,
    HalfLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mapping<T> {
    pub kind: MappingKind,
    pub domain: MappingDomain,
    pub scale: T,
}

impl<T: Scalar> Default for Mapping<T> {
    fn default() -> Self {
        Self::algebraic(T::one())
    }
}

impl<T: Scalar> Mapping<T> {
    pub fn new(kind: MappingKind, domain: MappingDomain, scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::Config(format!("mapping scale must be positive, got {scale}")));
        }
        Ok(Self { kind, domain, scale })
    }

    /// Whole-line algebraic map `x = s y / sqrt(1 - y^2)`.
    pub fn algebraic(scale: T) -> Self {
        Self {
            kind: MappingKind::Algebraic,
            domain: MappingDomain::WholeLine,
            scale,
        }
    }

    /// Whole-line logarithmic map `x = (s/2) ln((1 + y) / (1 - y))`.
    pub fn logarithmic(scale: T) -> Self {
        Self {
            kind: MappingKind::Logarithmic,
            domain: MappingDomain::WholeLine,
            scale,
        }
    }

    pub fn in_domain(&self, x: T) -> bool {
        x.is_finite()
            && match self.domain {
                MappingDomain::WholeLine => true,
                MappingDomain::HalfLine => x > T::zero(),
            }
    }

    fn check_x(&self, x: T) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("x = {x} outside the {:?} mapping domain", self.domain)))
        }
    }

    /// `g(y; s)` for `|y| < 1`.
    pub fn forward(&self, y: T) -> Result<T> {
        if !(y.abs() < T::one()) {
            return Err(Error::Domain(format!("mapping requires |y| < 1, got {y}")));
        }
        let s = self.scale;
        let one = T::one();
        let half = lit::<T>(0.5);
        Ok(match (self.domain, self.kind) {
            (MappingDomain::WholeLine, MappingKind::Algebraic) => {
                s * y / ((one - y) * (one + y)).sqrt()
            }
            (MappingDomain::WholeLine, MappingKind::Logarithmic) => {
                s * half * (y.ln_1p() - (-y).ln_1p())
            }
            (MappingDomain::HalfLine, MappingKind::Algebraic) => s * (one + y) / (one - y),
            (MappingDomain::HalfLine, MappingKind::Logarithmic) => {
                s * half * ((lit::<T>(3.0) + y) / (one - y)).ln()
            }
        })
    }

    /// `u(x; s)`, the inverse of [`Mapping::forward`].
    pub fn inverse(&self, x: T) -> Result<T> {
        self.check_x(x)?;
        let s = self.scale;
        let one = T::one();
        Ok(match (self.domain, self.kind) {
            (MappingDomain::WholeLine, MappingKind::Algebraic) => {
                if x.abs() <= s {
                    x / (x * x + s * s).sqrt()
                } else {
                    let r = s / x;
                    x.signum() / (one + r * r).sqrt()
                }
            }
            (MappingDomain::WholeLine, MappingKind::Logarithmic) => (x / s).tanh(),
            (MappingDomain::HalfLine, MappingKind::Algebraic) => (x - s) / (x + s),
            // The inverse of (s/2) ln((3+y)/(1-y)) is 2 tanh(x/s) - 1.
            (MappingDomain::HalfLine, MappingKind::Logarithmic) => {
                lit::<T>(2.0) * (x / s).tanh() - one
            }
        })
    }

    /// `u'(x; s)`.
    pub fn inverse_derivative(&self, x: T) -> Result<T> {
        self.check_x(x)?;
        let s = self.scale;
        let one = T::one();
        Ok(match (self.domain, self.kind) {
            (MappingDomain::WholeLine, MappingKind::Algebraic) => {
                let r = if x.abs() <= s {
                    s / (x * x + s * s).sqrt()
                } else {
                    let q = s / x;
                    q.abs() / (one + q * q).sqrt()
                };
                r * r * r / s
            }
            (MappingDomain::WholeLine, MappingKind::Logarithmic) => {
                let sech = one / (x / s).cosh();
                sech * sech / s
            }
            (MappingDomain::HalfLine, MappingKind::Algebraic) => {
                lit::<T>(2.0) * s / ((x + s) * (x + s))
            }
            (MappingDomain::HalfLine, MappingKind::Logarithmic) => {
                let sech = one / (x / s).cosh();
                lit::<T>(2.0) * sech * sech / s
            }
        })
    }

    /// `ŷ(x) = (u(x) + 1) / 2 ∈ [0, 1]`.
    pub fn to_unit(&self, x: T) -> Result<T> {
        Ok((self.inverse(x)? + T::one()) * lit(0.5))
    }

    /// `ŷ'(x) = u'(x) / 2`.
    pub fn to_unit_derivative(&self, x: T) -> Result<T> {
        Ok(self.inverse_derivative(x)? * lit(0.5))
    }

    /// `g(2y - 1)` for `y ∈ (0, 1)`.
    pub fn from_unit(&self, y: T) -> Result<T> {
        self.forward(lit::<T>(2.0) * y - T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn algebraic_forward_values() {
        let m = Mapping::<f64>::algebraic(1.0);
        assert_eq!(m.forward(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(m.forward(1.0 / 2f64.sqrt()).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn logarithmic_forward_at_zero() {
        let m = Mapping::<f64>::logarithmic(1.0);
        assert_eq!(m.forward(0.0).unwrap(), 0.0);
    }

    #[test]
    fn algebraic_inverse_values() {
        let m = Mapping::<f64>::algebraic(1.0);
        assert_eq!(m.inverse(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(m.inverse(1.0).unwrap(), 0.70710678, epsilon = 1e-8);
        assert_abs_diff_eq!(m.inverse(m.forward(0.3).unwrap()).unwrap(), 0.3, epsilon = 1e-10);
    }

    #[test]
    fn forward_rejects_boundary() {
        let m = Mapping::<f64>::algebraic(1.0);
        assert!(matches!(m.forward(1.0), Err(Error::Domain(_))));
        assert!(matches!(m.forward(-1.5), Err(Error::Domain(_))));
        assert!(m.forward(f64::NAN).is_err());
    }

    #[test]
    fn half_line_rejects_negative() {
        let m = Mapping::<f64>::new(MappingKind::Algebraic, MappingDomain::HalfLine, 1.0).unwrap();
        assert!(m.inverse(-0.5).is_err());
        assert!(m.inverse(0.0).is_err());
        assert!(m.inverse(2.0).is_ok());
    }

    #[test]
    fn half_line_limits() {
        for kind in [MappingKind::Algebraic, MappingKind::Logarithmic] {
            let m = Mapping::<f64>::new(kind, MappingDomain::HalfLine, 1.0).unwrap();
            assert!(m.forward(-1.0 + 1e-12).unwrap().abs() < 1e-6);
            assert!(m.forward(1.0 - 1e-12).unwrap() > 10.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let kinds = [MappingKind::Algebraic, MappingKind::Logarithmic];
        let domains = [MappingDomain::WholeLine, MappingDomain::HalfLine];
        for kind in kinds {
            for domain in domains {
                let m = Mapping::<f64>::new(kind, domain, 1.3).unwrap();
                for &x in &[0.2, 0.9, 2.5, 4.0] {
                    let h = 1e-6;
                    let fd = (m.inverse(x + h).unwrap() - m.inverse(x - h).unwrap()) / (2.0 * h);
                    assert_abs_diff_eq!(m.inverse_derivative(x).unwrap(), fd, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(Mapping::<f64>::new(MappingKind::Algebraic, MappingDomain::WholeLine, 0.0).is_err());
    }
}
