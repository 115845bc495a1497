use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::estimator::{dot, SieveFit};
use crate::quadrature::linspace;
use crate::scalar::{from_usize, lit, Scalar};

use super::{bootstrap_pool, BootstrapConfig, BootstrapPool};

/// Smallest admissible `ĥ`; smaller standard deviations are floored here.
pub const H_FLOOR: f64 = 1e-12;

/// `Π̂⁻¹ r̄(t, x)` with `r̄ = (0, b_j − f̂_j, 0)` in component `j`'s columns.
pub fn t_direction<T: Scalar>(fit: &SieveFit<T>, j: usize, t: T, x: T) -> Result<DVector<T>> {
    let range = fit.block_range(j)?;
    let feat = fit.centered_features(j, t, x)?;
    let g = fit.gram_inv();
    let mut out = DVector::<T>::zeros(fit.param_count());
    for (k, &f) in range.zip(&feat) {
        out.axpy(f, &g.column(k), T::one());
    }
    Ok(out)
}

/// `T̂_j(t, x) = Ξᵀ Π̂⁻¹ r̄(t, x)`.
pub fn eval_t<T: Scalar>(fit: &SieveFit<T>, xi: &DVector<T>, j: usize, t: T, x: T) -> Result<T> {
    let v = t_direction(fit, j, t, x)?;
    Ok(xi.dot(&v))
}

/// Uniform time axis on `[0, 1]` and a state axis uniform in the mapped
/// coordinate between the images of the window ends.
pub fn scr_grid_axes<T: Scalar>(fit: &SieveFit<T>, cfg: &BootstrapConfig) -> Result<(Vec<T>, Vec<T>)> {
    let mapping = fit.config().mapping;
    let t = linspace(T::zero(), T::one(), cfg.grid_t);
    let lo = mapping.to_unit(lit(cfg.x_window[0]))?;
    let hi = mapping.to_unit(lit(cfg.x_window[1]))?;
    let x = linspace(lo, hi, cfg.grid_x)
        .into_iter()
        .map(|y| mapping.from_unit(y))
        .collect::<Result<Vec<T>>>()?;
    Ok((t, x))
}

/// Sample standard deviation with divisor `k − 1`.
pub fn sample_sd<T: Scalar>(values: &[T]) -> T {
    let k = values.len();
    if k < 2 {
        return T::zero();
    }
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / from_usize(k);
    let ss = values.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
    (ss / from_usize(k - 1)).sqrt()
}

/// Order statistic `𝒯_(⌊M(1−α)⌋+1)`, index clamped to `[1, M]`.
pub fn critical_value<T: Scalar>(sup_stats: &[T], alpha: f64) -> T {
    let m = sup_stats.len();
    assert!(m > 0, "critical value of an empty pool");
    if (m as f64) * alpha < 1.0 {
        warn!("M = {m} draws cannot resolve level {alpha}; using the sample maximum");
    }
    let mut sorted = sup_stats.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in bootstrap statistics"));
    let q = (((m as f64) * (1.0 - alpha)).floor() as usize + 1).clamp(1, m);
    sorted[q - 1]
}

/// Estimates and bootstrap summaries over a product grid, indexed `a·C₂ + l`.
#[derive(Debug, Clone)]
pub struct GridStatistics<T> {
    pub m_hat: Vec<T>,
    pub h_hat: Vec<T>,
    /// `𝒯_k = max over the grid of |T̂_{j,k}/ĥ|` for each draw of the `ĉ_α` pool.
    pub sup_stats: Vec<T>,
    /// Grid points whose `ĥ` was floored.
    pub degenerate: usize,
}

/// Evaluate `m̂_j`, `ĥ_j` and the normalized sup statistics on `t_axis × x_axis`.
pub fn grid_statistics<T: Scalar>(
    fit: &SieveFit<T>,
    pool: &BootstrapPool<T>,
    j: usize,
    t_axis: &[T],
    x_axis: &[T],
) -> Result<GridStatistics<T>> {
    let range = fit.block_range(j)?;
    if j == 0 {
        return Err(crate::error::Error::NoSuchComponent(0));
    }
    let beta = &fit.beta().as_slice()[range.clone()];
    let g_rows = fit.gram_inv().rows(range.start, range.len()).into_owned();
    let floor = lit::<T>(H_FLOOR);
    let c2 = x_axis.len();

    let rows: Vec<(Vec<T>, Vec<T>, Vec<T>, usize)> = t_axis
        .par_iter()
        .map(|&t| -> Result<_> {
            let f = fit.shift_features(j, t)?;
            let mut feats = DMatrix::<T>::zeros(c2, range.len());
            let mut m_row = Vec::with_capacity(c2);
            for (l, &x) in x_axis.iter().enumerate() {
                let mut b = fit.block_features(j, t, x)?;
                b.iter_mut().zip(&f).for_each(|(b, f)| *b -= *f);
                m_row.push(dot(&b, beta));
                feats.row_mut(l).copy_from_slice(&b);
            }
            let dirs = feats * &g_rows;
            let th = &pool.h * dirs.transpose();
            let mut h_row = Vec::with_capacity(c2);
            let mut degenerate = 0;
            for l in 0..c2 {
                let col: Vec<T> = th.column(l).iter().copied().collect();
                let mut h = sample_sd(&col);
                if !(h > floor) {
                    h = floor;
                    degenerate += 1;
                }
                h_row.push(h);
            }
            let tc = &pool.c * dirs.transpose();
            let sup: Vec<T> = (0..tc.nrows())
                .map(|k| {
                    (0..c2).fold(T::zero(), |acc, l| acc.max((tc[(k, l)] / h_row[l]).abs()))
                })
                .collect();
            Ok((m_row, h_row, sup, degenerate))
        })
        .collect::<Result<_>>()?;

    let mut out = GridStatistics {
        m_hat: Vec::with_capacity(t_axis.len() * c2),
        h_hat: Vec::with_capacity(t_axis.len() * c2),
        sup_stats: vec![T::zero(); pool.c_draws()],
        degenerate: 0,
    };
    for (m_row, h_row, sup, degenerate) in rows {
        out.m_hat.extend(m_row);
        out.h_hat.extend(h_row);
        out.sup_stats.iter_mut().zip(sup).for_each(|(a, b)| *a = a.max(b));
        out.degenerate += degenerate;
    }
    if out.degenerate > 0 {
        warn!(
            "bootstrap standard deviation degenerate at {} grid points; floored at {H_FLOOR:e}",
            out.degenerate
        );
    }
    Ok(out)
}

/// Simultaneous confidence region of one component on a product grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScrGrid<T> {
    pub component: usize,
    pub t: Vec<T>,
    pub x: Vec<T>,
    /// Values at `(t[a], x[l])` are stored at `a · x.len() + l`.
    pub m_hat: Vec<T>,
    pub h_hat: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub c_alpha: T,
    pub alpha: f64,
    /// Regression sample size used in the `√n` scaling.
    pub n: usize,
    /// Sorted sup statistics of the `ĉ_α` pool.
    pub sup_stats: Vec<T>,
    pub degenerate: usize,
}

impl<T: Scalar> ScrGrid<T> {
    pub fn len(&self) -> usize {
        self.m_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_hat.is_empty()
    }

    pub fn point(&self, k: usize) -> (T, T) {
        let c2 = self.x.len();
        (self.t[k / c2], self.x[k % c2])
    }

    /// All grid points in storage order.
    pub fn points(&self) -> Vec<(T, T)> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// `√n |m̂ − v| / ĥ` at grid point `k`.
    pub fn normalized_deviation(&self, k: usize, v: T) -> T {
        from_usize::<T>(self.n).sqrt() * (self.m_hat[k] - v).abs() / self.h_hat[k]
    }

    /// Assemble the region from grid statistics.
    pub fn from_statistics(
        component: usize,
        t: Vec<T>,
        x: Vec<T>,
        stats: GridStatistics<T>,
        alpha: f64,
        n: usize,
    ) -> Self {
        let c_alpha = critical_value(&stats.sup_stats, alpha);
        let root_n = from_usize::<T>(n).sqrt();
        let half: Vec<T> = stats.h_hat.iter().map(|&h| c_alpha * h / root_n).collect();
        let lower = stats.m_hat.iter().zip(&half).map(|(&m, &w)| m - w).collect();
        let upper = stats.m_hat.iter().zip(&half).map(|(&m, &w)| m + w).collect();
        let mut sup_stats = stats.sup_stats;
        sup_stats.sort_by(|a, b| a.partial_cmp(b).expect("NaN in bootstrap statistics"));
        Self {
            component,
            t,
            x,
            m_hat: stats.m_hat,
            h_hat: stats.h_hat,
            lower,
            upper,
            c_alpha,
            alpha,
            n,
            sup_stats,
            degenerate: stats.degenerate,
        }
    }
}

/// Draw a pool and build the region for component `j`.
pub fn build_scr<T: Scalar>(fit: &SieveFit<T>, cfg: &BootstrapConfig, j: usize) -> Result<ScrGrid<T>> {
    let pool = bootstrap_pool(fit, cfg)?;
    build_scr_with_pool(fit, cfg, j, &pool)
}

/// Build the region for component `j` from an existing pool.
pub fn build_scr_with_pool<T: Scalar>(
    fit: &SieveFit<T>,
    cfg: &BootstrapConfig,
    j: usize,
    pool: &BootstrapPool<T>,
) -> Result<ScrGrid<T>> {
    let (t, x) = scr_grid_axes(fit, cfg)?;
    let stats = grid_statistics(fit, pool, j, &t, &x)?;
    Ok(ScrGrid::from_statistics(j, t, x, stats, cfg.alpha, fit.data().rows()))
}
