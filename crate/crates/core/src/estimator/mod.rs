//! Pilot sieve least squares, mean-shift estimation and the identifiability
//! correction.

mod config;
mod data;
mod design;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use config::{Bases, ComponentConfig, SieveConfig};
pub use data::RegressionData;
pub use design::{build_design, DesignMatrix, RANK_TOLERANCE};

use design::{build_design_with, design_row};
pub(crate) use design::ols;

/// Mean-shift fits `ϑ̂_{j,ℓ}(t) = γ̂ᵀ φ(t)` of one component.
#[derive(Debug, Clone)]
struct ShiftBlock<T: Scalar> {
    bases: Vec<BasisSet<T>>,
    coefs: Vec<DVector<T>>,
}

/// A fitted sieve model.
#[derive(Debug, Clone)]
pub struct SieveFit<T: Scalar> {
    config: SieveConfig<T>,
    bases: Bases<T>,
    beta: DVector<T>,
    gram_inv: DMatrix<T>,
    residuals: Vec<T>,
    shifts: Option<Vec<ShiftBlock<T>>>,
    data: Arc<RegressionData<T>>,
}

impl<T: Scalar> SieveFit<T> {
    /// Pilot fit followed by the mean-shift regressions.
    pub fn fit(data: RegressionData<T>, cfg: &SieveConfig<T>) -> Result<Self> {
        let mut fit = fit_pilot(data, cfg)?;
        fit.fit_mean_shifts()?;
        Ok(fit)
    }

    pub fn config(&self) -> &SieveConfig<T> {
        &self.config
    }

    pub fn bases(&self) -> &Bases<T> {
        &self.bases
    }

    pub fn data(&self) -> &RegressionData<T> {
        &self.data
    }

    pub fn beta(&self) -> &DVector<T> {
        &self.beta
    }

    /// `(n^{-1} WᵀW)^{-1}`.
    pub fn gram_inv(&self) -> &DMatrix<T> {
        &self.gram_inv
    }

    pub fn residuals(&self) -> &[T] {
        &self.residuals
    }

    pub fn r(&self) -> usize {
        self.bases.blocks.len()
    }

    pub fn param_count(&self) -> usize {
        self.beta.len()
    }

    /// Column range of component `j` (0 is the intercept).
    pub fn block_range(&self, j: usize) -> Result<std::ops::Range<usize>> {
        self.check_component(j)?;
        Ok(self.bases.range(j))
    }

    pub fn has_mean_shifts(&self) -> bool {
        self.shifts.is_some()
    }

    fn check_component(&self, j: usize) -> Result<()> {
        if j > self.r() {
            Err(Error::NoSuchComponent(j))
        } else {
            Ok(())
        }
    }

    fn require_component(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.r() {
            Err(Error::NoSuchComponent(j))
        } else {
            Ok(())
        }
    }

    /// Replace the coefficients (residuals are recomputed).
    pub fn set_coefficients(&mut self, beta: DVector<T>) -> Result<()> {
        if beta.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                what: "coefficient vector",
                expected: self.param_count(),
                found: beta.len(),
            });
        }
        self.beta = beta;
        self.residuals = self.residuals_for(&self.data.clone())?;
        Ok(())
    }

    /// Regress each used `ϕ_ℓ(X_j)` on its time basis.
    pub fn fit_mean_shifts(&mut self) -> Result<()> {
        let data = self.data.clone();
        let n = data.rows();
        let mut blocks = Vec::with_capacity(self.r());
        for (j, block) in self.bases.blocks.iter().enumerate() {
            let sizes = &self.bases.shift_sizes[j];
            let state = block.state();
            let mut phi = DMatrix::<T>::zeros(n, state.count());
            for i in 0..n {
                let v = state.eval_vec(data.x[j][i])?;
                phi.row_mut(i).copy_from_slice(&v);
            }
            let mut bases = Vec::with_capacity(sizes.len());
            let mut coefs = Vec::with_capacity(sizes.len());
            for (pos, &size) in sizes.iter().enumerate() {
                let l = block.start() + pos;
                let tb = BasisSet::unit(self.config.time_family, size)?;
                let mut w = DMatrix::<T>::zeros(n, size);
                for i in 0..n {
                    let v = tb.eval_vec(data.t[i])?;
                    w.row_mut(i).copy_from_slice(&v);
                }
                let target = phi.column(l - 1).into_owned();
                coefs.push(ols(&w, &target)?.beta);
                bases.push(tb);
            }
            blocks.push(ShiftBlock { bases, coefs });
        }
        self.shifts = Some(blocks);
        Ok(())
    }

    /// `b_j(t, x)`, the tensor features of component `j`.
    pub fn block_features(&self, j: usize, t: T, x: T) -> Result<Vec<T>> {
        self.require_component(j)?;
        self.bases.blocks[j - 1].eval_vec(t, x)
    }

    /// `ϑ̂_{j,ℓ}(t)` for every used state index `ℓ`.
    pub fn mean_shifts(&self, j: usize, t: T) -> Result<Vec<T>> {
        self.require_component(j)?;
        let shifts = self.shifts.as_ref().ok_or(Error::MeanShiftsMissing)?;
        let block = &shifts[j - 1];
        block
            .bases
            .iter()
            .zip(&block.coefs)
            .map(|(b, g)| Ok(dot(&b.eval_vec(t)?, g.as_slice())))
            .collect()
    }

    /// `f̂_j(t)`: entries `φ_{ℓ1}(t) ϑ̂_{j,ℓ2}(t)` in tensor order.
    pub fn shift_features(&self, j: usize, t: T) -> Result<Vec<T>> {
        let theta = self.mean_shifts(j, t)?;
        let tb = &self.bases.blocks[j - 1];
        let phi_t = tb.time().eval_vec(t)?;
        let mut out = Vec::with_capacity(tb.dim());
        for &a in &phi_t {
            out.extend(theta.iter().map(|&b| a * b));
        }
        Ok(out)
    }

    /// `b_j(t, x) - f̂_j(t)`.
    pub fn centered_features(&self, j: usize, t: T, x: T) -> Result<Vec<T>> {
        let mut b = self.block_features(j, t, x)?;
        let f = self.shift_features(j, t)?;
        b.iter_mut().zip(&f).for_each(|(b, f)| *b -= *f);
        Ok(b)
    }

    fn block_beta(&self, j: usize) -> &[T] {
        let range = self.bases.range(j);
        &self.beta.as_slice()[range]
    }

    /// Pilot surfaces: `m̂*_0(t)` for `j = 0` (`x` ignored), `m̂*_j(t, x)` otherwise.
    pub fn eval_pilot(&self, j: usize, t: T, x: T) -> Result<T> {
        self.check_component(j)?;
        let features = if j == 0 {
            match &self.bases.intercept {
                Some(b) => b.eval_vec(t)?,
                None => return Ok(T::zero()),
            }
        } else {
            self.block_features(j, t, x)?
        };
        Ok(dot(&features, self.block_beta(j)))
    }

    /// `χ̂_j(t) = Σ β̂_{j,ℓ1,ℓ2} φ_{ℓ1}(t) ϑ̂_{j,ℓ2}(t)`.
    pub fn eval_chi(&self, j: usize, t: T) -> Result<T> {
        let f = self.shift_features(j, t)?;
        Ok(dot(&f, self.block_beta(j)))
    }

    /// Corrected surfaces `m̂_0 = m̂*_0 + Σ χ̂_j` and `m̂_j = m̂*_j - χ̂_j`.
    pub fn eval_corrected(&self, j: usize, t: T, x: T) -> Result<T> {
        self.check_component(j)?;
        if j == 0 {
            let mut v = self.eval_pilot(0, t, x)?;
            for k in 1..=self.r() {
                v += self.eval_chi(k, t)?;
            }
            Ok(v)
        } else {
            Ok(self.eval_pilot(j, t, x)? - self.eval_chi(j, t)?)
        }
    }

    /// Total pilot fit `m̂*_0(t) + Σ_j m̂*_j(t, x_j)`.
    pub fn predict(&self, t: T, x: &[T]) -> Result<T> {
        if x.len() != self.r() {
            return Err(Error::LengthMismatch {
                what: "covariate vector",
                expected: self.r(),
                found: x.len(),
            });
        }
        let mut row = vec![T::zero(); self.param_count()];
        design_row(&self.bases, t, x, &mut row)?;
        Ok(dot(&row, self.beta.as_slice()))
    }

    /// `ε̂_i = Y_i - m̂*_0(t_i) - Σ_j m̂*_j(t_i, X_{j,i})` for any data set.
    pub fn residuals_for(&self, data: &RegressionData<T>) -> Result<Vec<T>> {
        (0..data.rows())
            .map(|i| Ok(data.y[i] - self.predict(data.t[i], &data.covariates(i))?))
            .collect()
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Ordinary least squares on the sieve design.
pub fn fit_pilot<T: Scalar>(data: RegressionData<T>, cfg: &SieveConfig<T>) -> Result<SieveFit<T>> {
    let bases = cfg.bases()?;
    let design = build_design_with(&data, &bases)?;
    let y = DVector::from_column_slice(&data.y);
    let sol = ols(&design.matrix, &y)?;
    let fitted = &design.matrix * &sol.beta;
    let residuals = y.iter().zip(fitted.iter()).map(|(&a, &b)| a - b).collect();
    Ok(SieveFit {
        config: cfg.clone(),
        gram_inv: sol.gram_inverse(data.rows()),
        beta: sol.beta,
        bases,
        residuals,
        shifts: None,
        data: Arc::new(data),
    })
}

/// Residuals of a fitted model on `data`.
pub fn residuals<T: Scalar>(fit: &SieveFit<T>, data: &RegressionData<T>) -> Result<Vec<T>> {
    fit.residuals_for(data)
}
