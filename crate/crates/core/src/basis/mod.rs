//! Orthonormal sieve bases on `[0, 1]` and their mapped versions on the line
//! or half-line.

mod diagnostics;
pub mod jacobi;
pub mod mapping;
mod tensor;
pub mod wavelet;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub use diagnostics::{compute_basis_norms, gram_matrix, BasisDiagnostics};
pub use mapping::{Mapping, MappingDomain, MappingKind};
pub use tensor::TensorBasis;

/// Which orthonormal system on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BasisFamily {
    Fourier,
    Jacobi { alpha: f64, beta: f64 },
    Daubechies { order: usize, level: u32 },
}

impl BasisFamily {
    pub fn legendre() -> Self {
        BasisFamily::Jacobi { alpha: 0.0, beta: 0.0 }
    }

    pub fn chebyshev() -> Self {
        BasisFamily::Jacobi { alpha: -0.5, beta: -0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Support<T> {
    UnitInterval,
    Mapped {
        mapping: Mapping<T>,
        jacobian_weight: bool,
    },
}

#[derive(Debug, Clone)]
enum Kernel<T> {
    Fourier,
    Jacobi(jacobi::JacobiSystem<T>),
    Daubechies(Arc<wavelet::PeriodizedScaling<T>>),
}

/// A finite orthonormal family `φ_1..φ_count`, optionally transported to an
/// unbounded domain.
#[derive(Debug, Clone)]
pub struct BasisSet<T> {
    family: BasisFamily,
    count: usize,
    support: Support<T>,
    kernel: Kernel<T>,
}

impl<T: Scalar> BasisSet<T> {
    pub fn new(family: BasisFamily, count: usize, support: Support<T>) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("basis count must be positive".into()));
        }
        let kernel = match family {
            BasisFamily::Fourier => Kernel::Fourier,
            BasisFamily::Jacobi { alpha, beta } => {
                Kernel::Jacobi(jacobi::JacobiSystem::new(alpha, beta, count)?)
            }
            BasisFamily::Daubechies { order, level } => {
                let sys = wavelet::PeriodizedScaling::new(order, level)?;
                if count > sys.dimension() {
                    return Err(Error::Config(format!(
                        "daubechies level {level} provides {} functions, {count} requested",
                        sys.dimension()
                    )));
                }
                Kernel::Daubechies(Arc::new(sys))
            }
        };
        Ok(Self {
            family,
            count,
            support,
            kernel,
        })
    }

    /// Basis on `[0, 1]`.
    pub fn unit(family: BasisFamily, count: usize) -> Result<Self> {
        Self::new(family, count, Support::UnitInterval)
    }

    /// Mapped basis with the Jacobian weight switched on.
    pub fn mapped(family: BasisFamily, count: usize, mapping: Mapping<T>) -> Result<Self> {
        Self::new(
            family,
            count,
            Support::Mapped {
                mapping,
                jacobian_weight: true,
            },
        )
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn support(&self) -> &Support<T> {
        &self.support
    }

    pub fn mapping(&self) -> Option<&Mapping<T>> {
        match &self.support {
            Support::UnitInterval => None,
            Support::Mapped { mapping, .. } => Some(mapping),
        }
    }

    /// The same family and size with a different count.
    pub fn resized(&self, count: usize) -> Result<Self> {
        Self::new(self.family, count, self.support)
    }

    /// All `count` functions of the unmapped system at `t ∈ [0, 1]`.
    pub fn eval_unit_all(&self, t: T, out: &mut [T]) -> Result<()> {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::Domain(format!("basis argument t = {t} outside [0, 1]")));
        }
        check_len(out, self.count)?;
        match &self.kernel {
            Kernel::Fourier => {
                let two_pi = T::two_pi();
                let r2 = lit::<T>(std::f64::consts::SQRT_2);
                out[0] = T::one();
                for k in 2..=self.count {
                    let arg = two_pi * lit::<T>((k / 2) as f64) * t;
                    out[k - 1] = r2 * if k % 2 == 0 { arg.cos() } else { arg.sin() };
                }
                Ok(())
            }
            Kernel::Jacobi(sys) => sys.eval_all(t, out),
            Kernel::Daubechies(sys) => {
                let mut full = vec![T::zero(); sys.dimension()];
                sys.eval_all(t, &mut full);
                out.copy_from_slice(&full[..self.count]);
                Ok(())
            }
        }
    }

    /// All functions at a point of the set's domain: `t` for unit-interval
    /// sets, `x` for mapped sets.
    pub fn eval_all(&self, x: T, out: &mut [T]) -> Result<()> {
        match &self.support {
            Support::UnitInterval => self.eval_unit_all(x, out),
            Support::Mapped {
                mapping,
                jacobian_weight,
            } => {
                let y = mapping.to_unit(x)?;
                if *jacobian_weight {
                    let dy = mapping.to_unit_derivative(x)?;
                    check_len(out, self.count)?;
                    if dy <= T::zero() {
                        out.iter_mut().for_each(|v| *v = T::zero());
                        return Ok(());
                    }
                    self.eval_unit_all(y, out)?;
                    let w = dy.sqrt();
                    out.iter_mut().for_each(|v| *v *= w);
                    Ok(())
                } else {
                    self.eval_unit_all(y, out)
                }
            }
        }
    }

    /// Single function `k` (1-based) at `x`.
    pub fn eval(&self, k: usize, x: T) -> Result<T> {
        if k == 0 || k > self.count {
            return Err(Error::IndexOutOfRange {
                index: k,
                count: self.count,
            });
        }
        let mut out = vec![T::zero(); self.count];
        self.eval_all(x, &mut out)?;
        Ok(out[k - 1])
    }

    /// Convenience allocation of [`BasisSet::eval_all`].
    pub fn eval_vec(&self, x: T) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.count];
        self.eval_all(x, &mut out)?;
        Ok(out)
    }

    /// Whether the first function is numerically constant on its domain
    /// (range below 1e-8 over 512 points).
    pub fn first_is_constant(&self) -> bool {
        let npts = 512;
        let mut out = vec![T::zero(); self.count];
        let mut lo = T::max_value().unwrap_or_else(|| lit(f64::MAX));
        let mut hi = -lo;
        for i in 0..npts {
            let y = lit::<T>((i as f64 + 0.5) / npts as f64);
            let arg = match &self.support {
                Support::UnitInterval => Ok(y),
                Support::Mapped { mapping, .. } => mapping.from_unit(y),
            };
            let Ok(arg) = arg else { return false };
            if self.eval_all(arg, &mut out).is_err() {
                return false;
            }
            lo = lo.min(out[0]);
            hi = hi.max(out[0]);
        }
        hi - lo < lit(1e-8)
    }

    /// First tensor index used for this state basis: 2 when the first
    /// function is constant, otherwise 1.
    pub fn hierarchy_start(&self) -> usize {
        if self.first_is_constant() {
            2
        } else {
            1
        }
    }
}

fn check_len<T>(out: &[T], count: usize) -> Result<()> {
    if out.len() != count {
        return Err(Error::LengthMismatch {
            what: "basis output buffer",
            expected: count,
            found: out.len(),
        });
    }
    Ok(())
}
