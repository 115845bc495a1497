use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::{lit, to_f64, Scalar};

use super::{BasisSet, Support};

/// Grid sup-norm surrogates of the basis magnitudes entering the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisDiagnostics {
    /// `max_j sup_{i,t} |φ_i(t)|` over the time bases.
    pub xi: f64,
    /// `max_j sup_{ℓ,x} (|ϕ_ℓ(x)| + |ϕ_ℓ'(x)|)` over the state bases.
    pub varsigma: f64,
    /// `max_j sup_x |(ϕ_1(x), …, ϕ_d(x))|_2`.
    pub iota: f64,
    /// `max_j sup_t |(φ_1(t), …, φ_c(t))|_2`.
    pub gamma: f64,
    /// `sup_{t,x} |b(t,x)|_2` over the stacked tensor products.
    pub zeta: f64,
}

/// Pairwise inner products of the set by composite Gauss–Legendre quadrature
/// in the unit coordinate. Mapped sets are evaluated at the transported nodes
/// and integrated against `dx` (weight on) or `dŷ` (weight off).
pub fn gram_matrix<T: Scalar>(set: &BasisSet<T>, grid: usize) -> Result<DMatrix<T>> {
    let count = set.count();
    if grid < 10 * count {
        return Err(Error::Config(format!(
            "gram grid {grid} too coarse for {count} functions (need >= {})",
            10 * count
        )));
    }
    let (nodes, weights) = gauss_legendre(T::zero(), T::one(), (grid / 8).max(1));
    let mut gram = DMatrix::<T>::zeros(count, count);
    let mut v = vec![T::zero(); count];
    for (&y, &w) in nodes.iter().zip(&weights) {
        let w = match set.support() {
            Support::UnitInterval => {
                set.eval_all(y, &mut v)?;
                w
            }
            Support::Mapped {
                mapping,
                jacobian_weight,
            } => {
                let x = mapping.from_unit(y)?;
                set.eval_all(x, &mut v)?;
                if *jacobian_weight {
                    // dx = dŷ / ŷ'(x)
                    w / mapping.to_unit_derivative(x)?
                } else {
                    w
                }
            }
        };
        for a in 0..count {
            let wa = w * v[a];
            for b in a..count {
                gram[(a, b)] += wa * v[b];
            }
        }
    }
    for a in 0..count {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    Ok(gram)
}

/// Diagnostics over a `t` grid and an `x` grid. `time_sets[0]` is the
/// intercept basis; `time_sets[j]` pairs with `state_sets[j - 1]`.
pub fn compute_basis_norms<T: Scalar>(
    time_sets: &[BasisSet<T>],
    state_sets: &[BasisSet<T>],
    t_grid: &[T],
    x_grid: &[T],
) -> Result<BasisDiagnostics> {
    if t_grid.is_empty() || (!state_sets.is_empty() && x_grid.is_empty()) {
        return Err(Error::Config("diagnostic grids must be nonempty".into()));
    }
    let mut xi = 0.0f64;
    let mut gamma = 0.0f64;
    let mut time_l2 = Vec::with_capacity(time_sets.len());
    for set in time_sets {
        let mut best = 0.0f64;
        for &t in t_grid {
            let v = set.eval_vec(t)?;
            let mut sq = 0.0;
            for &e in &v {
                let e = to_f64(e);
                xi = xi.max(e.abs());
                sq += e * e;
            }
            best = best.max(sq.sqrt());
        }
        gamma = gamma.max(best);
        time_l2.push(best);
    }

    let mut varsigma = 0.0f64;
    let mut iota = 0.0f64;
    let mut zeta_sq = 0.0f64;
    for (j, set) in state_sets.iter().enumerate() {
        let mut best = 0.0f64;
        for &x in x_grid {
            let v = set.eval_vec(x)?;
            let h = lit::<T>(1e-5) * (T::one() + x.abs());
            let up = set.eval_vec(x + h);
            let dn = set.eval_vec(x - h);
            let mut sq = 0.0;
            for (l, &e) in v.iter().enumerate() {
                let e = to_f64(e);
                let deriv = match (&up, &dn) {
                    (Ok(u), Ok(d)) => to_f64((u[l] - d[l]) / (h + h)),
                    (Ok(u), Err(_)) => to_f64((u[l] - v[l]) / h),
                    (Err(_), Ok(d)) => to_f64((v[l] - d[l]) / h),
                    _ => 0.0,
                };
                varsigma = varsigma.max(e.abs() + deriv.abs());
                sq += e * e;
            }
            best = best.max(sq.sqrt());
        }
        iota = iota.max(best);
        // |b(t,x)|^2 = |φ(t)|^2 |ϕ(x)|^2 for a single tensor block.
        if let Some(&g) = time_l2.get(j + 1) {
            zeta_sq += (g * best).powi(2);
        }
    }
    Ok(BasisDiagnostics {
        xi,
        varsigma,
        iota,
        gamma,
        zeta: zeta_sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisFamily, Mapping};
    use crate::quadrature::linspace;

    fn assert_identity(g: &DMatrix<f64>, tol: f64) {
        for a in 0..g.nrows() {
            for b in 0..g.ncols() {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((g[(a, b)] - target).abs() <= tol, "entry ({a},{b}) = {}", g[(a, b)]);
            }
        }
    }

    // Independent oracle: trapezoid rule on a uniform grid.
    fn trapezoid_gram(set: &BasisSet<f64>, n: usize) -> DMatrix<f64> {
        let c = set.count();
        let mut g = DMatrix::zeros(c, c);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 } / n as f64;
            let v = set.eval_vec(t).unwrap();
            for a in 0..c {
                for b in 0..c {
                    g[(a, b)] += w * v[a] * v[b];
                }
            }
        }
        g
    }

    #[test]
    fn fourier_and_legendre_are_orthonormal() {
        for fam in [BasisFamily::Fourier, BasisFamily::legendre()] {
            let set = BasisSet::<f64>::unit(fam, 5).unwrap();
            let g = gram_matrix(&set, 4096).unwrap();
            assert_identity(&g, 1e-3);
            let oracle = trapezoid_gram(&set, 4096);
            assert_identity(&oracle, 1e-3);
            assert!((g - oracle).abs().max() < 1e-3);
        }
    }

    #[test]
    fn constant_basis_gram() {
        let set = BasisSet::<f64>::unit(BasisFamily::Fourier, 1).unwrap();
        let g = gram_matrix(&set, 64).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mapped_weighted_sets_are_orthonormal() {
        let set = BasisSet::<f64>::mapped(BasisFamily::Fourier, 7, Mapping::algebraic(1.0)).unwrap();
        assert_identity(&gram_matrix(&set, 4096).unwrap(), 1e-3);
        let set =
            BasisSet::<f64>::mapped(BasisFamily::legendre(), 6, Mapping::logarithmic(2.0)).unwrap();
        assert_identity(&gram_matrix(&set, 4096).unwrap(), 1e-3);
    }

    #[test]
    fn daubechies_orthonormal() {
        let set = BasisSet::<f64>::unit(BasisFamily::Daubechies { order: 4, level: 3 }, 8).unwrap();
        assert_identity(&gram_matrix(&set, 8192).unwrap(), 1e-3);
    }

    #[test]
    fn coarse_grid_rejected() {
        let set = BasisSet::<f64>::unit(BasisFamily::Fourier, 5).unwrap();
        assert!(gram_matrix(&set, 49).is_err());
    }

    #[test]
    fn fourier_sup_norm() {
        let set = BasisSet::<f64>::unit(BasisFamily::Fourier, 7).unwrap();
        let t = linspace(0.0, 1.0, 201);
        let d = compute_basis_norms(&[set], &[], &t, &[]).unwrap();
        assert!((d.xi - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn constant_basis_norms() {
        let set = BasisSet::<f64>::unit(BasisFamily::Fourier, 1).unwrap();
        let t = linspace(0.0, 1.0, 11);
        let d = compute_basis_norms(&[set], &[], &t, &[]).unwrap();
        assert_eq!(d.xi, 1.0);
        assert_eq!(d.gamma, 1.0);
    }

    #[test]
    fn zeta_grows_with_dimension() {
        let t = linspace(0.0, 1.0, 101);
        let x = linspace(-10.0, 10.0, 201);
        let zeta = |c: usize| {
            let time = BasisSet::<f64>::unit(BasisFamily::Fourier, c).unwrap();
            let state = BasisSet::<f64>::mapped(BasisFamily::Fourier, c, Mapping::algebraic(1.0)).unwrap();
            let d = compute_basis_norms(&[time.clone(), time], &[state], &t, &x).unwrap();
            assert!(d.varsigma.is_finite() && d.iota >= 0.0);
            d.zeta
        };
        assert!(zeta(4) > zeta(2));
    }
}
