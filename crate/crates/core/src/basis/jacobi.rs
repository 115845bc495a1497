//! Jacobi polynomials `P_n^{(α,β)}` on `[-1, 1]`, shifted and normalized to
//! an orthonormal system on `[0, 1]`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// `γ_n = ∫ (P_n)^2 (1-y)^α (1+y)^β dy`, computed in log space.
pub fn squared_norm(n: usize, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    let ab = alpha + beta;
    let log_num = (ab + 1.0) * std::f64::consts::LN_2
        + libm::lgamma(nf + alpha + 1.0)
        + libm::lgamma(nf + beta + 1.0);
    let log_den = if n == 0 {
        // (α+β+1) Γ(α+β+1) = Γ(α+β+2) removes the removable singularity at α+β = -1.
        libm::lgamma(ab + 2.0)
    } else {
        (2.0 * nf + ab + 1.0).ln() + libm::lgamma(nf + 1.0) + libm::lgamma(nf + ab + 1.0)
    };
    (log_num - log_den).exp()
}

/// Fill `out[k] = P_k^{(α,β)}(y)` for `k < out.len()` by the three-term recurrence.
pub fn polynomials<T: Scalar>(y: T, alpha: T, beta: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    let one = T::one();
    let two = lit::<T>(2.0);
    out[0] = one;
    if out.len() == 1 {
        return;
    }
    out[1] = (alpha + one) + (alpha + beta + two) * (y - one) / two;
    for n in 2..out.len() {
        let nf = lit::<T>(n as f64);
        let s = two * nf + alpha + beta;
        let a = two * nf * (nf + alpha + beta) * (s - two);
        let b = (s - one) * (s * (s - two) * y + alpha * alpha - beta * beta);
        let c = two * (nf + alpha - one) * (nf + beta - one) * s;
        out[n] = (b * out[n - 1] - c * out[n - 2]) / a;
    }
}

/// Orthonormal shifted Jacobi system `sqrt(2 ω(2t-1) / γ_k) P_k(2t-1)`.
#[derive(Debug, Clone)]
pub struct JacobiSystem<T> {
    alpha: T,
    beta: T,
    // sqrt(2 / γ_k)
    scale: Vec<T>,
}

impl<T: Scalar> JacobiSystem<T> {
    pub fn new(alpha: f64, beta: f64, count: usize) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::Config(format!(
                "jacobi parameters must exceed -1, got ({alpha}, {beta})"
            )));
        }
        let scale = (0..count)
            .map(|k| lit::<T>((2.0 / squared_norm(k, alpha, beta)).sqrt()))
            .collect();
        Ok(Self {
            alpha: lit(alpha),
            beta: lit(beta),
            scale,
        })
    }

    pub fn eval_all(&self, t: T, out: &mut [T]) -> Result<()> {
        let one = T::one();
        let y = lit::<T>(2.0) * t - one;
        let weight = if self.alpha == T::zero() && self.beta == T::zero() {
            one
        } else {
            (one - y).powf(self.alpha) * (one + y).powf(self.beta)
        };
        if !weight.is_finite() {
            return Err(Error::Domain(format!(
                "jacobi weight is singular at t = {t}"
            )));
        }
        polynomials(y, self.alpha, self.beta, out);
        let w = weight.sqrt();
        for (v, s) in out.iter_mut().zip(&self.scale) {
            *v *= *s * w;
        }
        Ok(())
    }
}
