use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

use super::{Bases, RegressionData, SieveConfig};

/// Relative singular-value tolerance below which a design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Sieve design `W = [W_0 | W_1]`.
#[derive(Debug, Clone)]
pub struct DesignMatrix<T: Scalar> {
    pub matrix: DMatrix<T>,
    /// Column range of the intercept (index 0) and of each component.
    pub blocks: Vec<std::ops::Range<usize>>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Fill one design row from `t` and the covariates.
pub(crate) fn design_row<T: Scalar>(bases: &Bases<T>, t: T, x: &[T], out: &mut [T]) -> Result<()> {
    let c0 = bases.intercept_count();
    if let Some(b) = &bases.intercept {
        b.eval_all(t, &mut out[..c0])?;
    }
    let mut off = c0;
    for (block, &xj) in bases.blocks.iter().zip(x) {
        let phi_t = block.time().eval_vec(t)?;
        let phi_x = block.state().eval_vec(xj)?;
        block.combine(&phi_t, &phi_x, &mut out[off..off + block.dim()]);
        off += block.dim();
    }
    Ok(())
}

pub fn build_design<T: Scalar>(data: &RegressionData<T>, cfg: &SieveConfig<T>) -> Result<DesignMatrix<T>> {
    let bases = cfg.bases()?;
    build_design_with(data, &bases)
}

pub(crate) fn build_design_with<T: Scalar>(
    data: &RegressionData<T>,
    bases: &Bases<T>,
) -> Result<DesignMatrix<T>> {
    if data.r() != bases.blocks.len() {
        return Err(Error::LengthMismatch {
            what: "covariate count",
            expected: bases.blocks.len(),
            found: data.r(),
        });
    }
    let n = data.rows();
    let p = bases.param_count();
    if n <= p {
        return Err(Error::Underdetermined { rows: n, params: p });
    }
    let mut matrix = DMatrix::<T>::zeros(n, p);
    let mut row = vec![T::zero(); p];
    for i in 0..n {
        design_row(bases, data.t[i], &data.covariates(i), &mut row)?;
        for (col, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteDesign { row: i, column: col });
            }
            matrix[(i, col)] = v;
        }
    }
    let blocks = (0..=bases.blocks.len()).map(|j| bases.range(j)).collect();
    Ok(DesignMatrix { matrix, blocks })
}

/// Least-squares solution by Householder QR together with `R^{-1}`.
#[derive(Debug, Clone)]
pub(crate) struct Ols<T: Scalar> {
    pub beta: DVector<T>,
    pub r_inv: DMatrix<T>,
}

impl<T: Scalar> Ols<T> {
    /// `n (W^T W)^{-1} = n R^{-1} R^{-T}`.
    pub fn gram_inverse(&self, n: usize) -> DMatrix<T> {
        (&self.r_inv * self.r_inv.transpose()) * lit::<T>(n as f64)
    }
}

pub(crate) fn ols<T: Scalar>(w: &DMatrix<T>, y: &DVector<T>) -> Result<Ols<T>> {
    let (n, p) = w.shape();
    if n < p {
        return Err(Error::Underdetermined { rows: n, params: p });
    }
    let qr = w.clone().qr();
    let r = qr.r();
    let sv = r.clone().singular_values();
    let smax = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    let smin = sv.iter().fold(smax, |a, &b| a.min(b));
    if !(smax > T::zero()) || !(smin > smax * lit::<T>(RANK_TOLERANCE)) {
        let condition = if smin > T::zero() {
            to_f64(smax / smin)
        } else {
            f64::INFINITY
        };
        return Err(Error::SingularDesign { condition });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&head)
        .ok_or(Error::SingularDesign { condition: f64::INFINITY })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::SingularDesign { condition: f64::INFINITY })?;
    Ok(Ols { beta, r_inv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisFamily, TensorBasis};
    use crate::estimator::ComponentConfig;

    #[test]
    fn hand_regression() {
        let w = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        let fit = ols(&w, &y).unwrap();
        assert!((fit.beta[0]).abs() < 1e-12);
        assert!((fit.beta[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_fail() {
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        assert!(matches!(ols(&w, &y), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn gram_inverse_identity() {
        let w = DMatrix::from_fn(40, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 + if i == j { 5.0 } else { 0.0 });
        let fit = ols(&w, &DVector::zeros(40)).unwrap();
        let prod = fit.gram_inverse(40) * (w.transpose() * &w / 40.0);
        assert!((prod - DMatrix::identity(3, 3)).abs().max() < 1e-8);
    }

    fn weight_off(r: usize, c: usize, d: usize) -> SieveConfig<f64> {
        SieveConfig {
            jacobian_weight: false,
            components: vec![
                ComponentConfig {
                    start: Some(1),
                    ..ComponentConfig::new(c, d)
                };
                r
            ],
            ..SieveConfig::uniform(r, c, d)
        }
    }

    #[test]
    fn ones_design() {
        let cfg = SieveConfig {
            c0: 1,
            ..weight_off(1, 1, 1)
        };
        let data = RegressionData::new(vec![0.0; 4], vec![vec![0.3, -1.0, 2.0, 5.0]]).unwrap();
        let w = build_design(&data, &cfg).unwrap();
        assert_eq!(w.matrix.shape(), (4, 2));
        assert!(w.matrix.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn entries_match_direct_evaluation() {
        let cfg = SieveConfig::<f64>::uniform(1, 3, 4).with_families(BasisFamily::Fourier, BasisFamily::legendre());
        let xs: Vec<f64> = (0..30).map(|i| ((i as f64) * 0.77).sin() * 4.0).collect();
        let data = RegressionData::new(vec![0.0; 30], vec![xs.clone()]).unwrap();
        let w = build_design(&data, &cfg).unwrap();
        let bases = cfg.bases().unwrap();
        let tb: &TensorBasis<f64> = &bases.blocks[0];
        for i in (0..30).step_by(3) {
            let direct = tb.time().eval(1, data.t[i]).unwrap() * tb.state().eval(1, xs[i]).unwrap();
            assert_eq!(w.matrix[(i, cfg.c0)], direct);
            let direct = tb.time().eval(2, data.t[i]).unwrap() * tb.state().eval(3, xs[i]).unwrap();
            assert_eq!(w.matrix[(i, cfg.c0 + tb.flat_index(2, 3))], direct);
        }
    }

    #[test]
    fn underdetermined_design() {
        let cfg = SieveConfig::<f64>::uniform(1, 3, 3);
        let data = RegressionData::new(vec![0.0; 10], vec![vec![0.1; 10]]).unwrap();
        assert!(matches!(build_design(&data, &cfg), Err(Error::Underdetermined { .. })));
    }
}
