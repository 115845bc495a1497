use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::SieveFit;
use crate::rng::stream;
use crate::scalar::{from_usize, Scalar};

use super::BootstrapConfig;

/// Blocked score vectors `Û(i, m)`, one row per block start.
#[derive(Debug, Clone)]
pub struct BlockedScores<T: Scalar> {
    matrix: DMatrix<T>,
    scale: T,
    block_length: usize,
}

impl<T: Scalar> BlockedScores<T> {
    /// Row `i` stacks `ε̂_{i,m} φ₀(t_i)` and, per component, `φ_j(t_i) ⊗ û_{j,m}(i)`
    /// with the time index outer, matching the design columns. Sums run over
    /// `o = i..=i+m`.
    pub fn new(fit: &SieveFit<T>, m: usize) -> Result<Self> {
        let data = fit.data();
        let n = data.rows();
        let r = fit.r();
        if m == 0 || m >= n || data.n_obs <= m + r {
            return Err(Error::BlockLength { block: m, rows: n });
        }
        let bases = fit.bases();
        let eps = fit.residuals();

        // Per-row raw scores: ε̂_o followed by ϕ_k(X_{j,o}) ε̂_o for each block.
        let widths: Vec<usize> = bases.blocks.iter().map(|b| b.state_dim()).collect();
        let q = 1 + widths.iter().sum::<usize>();
        let mut prefix = vec![T::zero(); (n + 1) * q];
        let mut state_buf = Vec::new();
        for o in 0..n {
            let (head, tail) = prefix.split_at_mut((o + 1) * q);
            let prev = &head[o * q..];
            let row = &mut tail[..q];
            row[0] = prev[0] + eps[o];
            let mut off = 1;
            for (j, block) in bases.blocks.iter().enumerate() {
                state_buf.resize(block.state().count(), T::zero());
                block.state().eval_all(data.x[j][o], &mut state_buf)?;
                for (k, &phi) in state_buf[block.start() - 1..].iter().enumerate() {
                    row[off + k] = prev[off + k] + phi * eps[o];
                }
                off += widths[j];
            }
        }

        let blocks = n - m;
        let p = fit.param_count();
        let mut matrix = DMatrix::<T>::zeros(blocks, p);
        let mut sums = vec![T::zero(); q];
        let mut row = vec![T::zero(); p];
        for i in 0..blocks {
            let lo = &prefix[i * q..(i + 1) * q];
            let hi = &prefix[(i + m + 1) * q..(i + m + 2) * q];
            sums.iter_mut().zip(hi.iter().zip(lo)).for_each(|(s, (&h, &l))| *s = h - l);
            let t = data.t[i];
            let mut col = 0;
            if let Some(b) = &bases.intercept {
                let phi = b.eval_vec(t)?;
                for v in phi {
                    row[col] = sums[0] * v;
                    col += 1;
                }
            }
            let mut off = 1;
            for (j, block) in bases.blocks.iter().enumerate() {
                let phi_t = block.time().eval_vec(t)?;
                let u = &sums[off..off + widths[j]];
                for &a in &phi_t {
                    for &b in u {
                        row[col] = a * b;
                        col += 1;
                    }
                }
                off += widths[j];
            }
            matrix.row_mut(i).copy_from_slice(&row);
        }
        let denom = from_usize::<T>((data.n_obs - m - r) * m);
        Ok(Self {
            matrix,
            scale: T::one() / denom.sqrt(),
            block_length: m,
        })
    }

    pub fn blocks(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Unscaled block rows.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// `((n − m − r) m)^{-1/2}`.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// `Ξ` for given multipliers `R_i`.
    pub fn combine(&self, multipliers: &[T]) -> Result<DVector<T>> {
        if multipliers.len() != self.blocks() {
            return Err(Error::LengthMismatch {
                what: "bootstrap multipliers",
                expected: self.blocks(),
                found: multipliers.len(),
            });
        }
        let r = DVector::from_column_slice(multipliers);
        Ok(self.matrix.tr_mul(&r) * self.scale)
    }

    /// `Ξ` with fresh Gaussian multipliers.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let r = DVector::from_fn(self.blocks(), |_, _| T::standard_normal(rng));
        self.matrix.tr_mul(&r) * self.scale
    }

    /// `Cov(Ξ | data) = s² Σ_i Û(i,m) Û(i,m)ᵀ`.
    pub fn covariance(&self) -> DMatrix<T> {
        self.matrix.tr_mul(&self.matrix) * (self.scale * self.scale)
    }
}

/// One bootstrap draw of `Ξ`.
pub fn draw_xi<T: Scalar, R: Rng + ?Sized>(
    fit: &SieveFit<T>,
    cfg: &BootstrapConfig,
    rng: &mut R,
) -> Result<DVector<T>> {
    Ok(BlockedScores::new(fit, cfg.block_length)?.draw(rng))
}

/// Disjoint pools of `Ξ` draws: rows of `h` estimate `ĥ`, rows of `c` give `ĉ_α`.
#[derive(Debug, Clone)]
pub struct BootstrapPool<T: Scalar> {
    pub h: DMatrix<T>,
    pub c: DMatrix<T>,
    pub seed: u64,
}

impl<T: Scalar> BootstrapPool<T> {
    /// Draw `B + M` vectors; draw `k` uses its own stream of the master seed.
    pub fn draw(scores: &BlockedScores<T>, h_draws: usize, c_draws: usize, seed: u64) -> Self {
        let draws: Vec<DVector<T>> = (0..h_draws + c_draws)
            .into_par_iter()
            .map(|k| scores.draw(&mut stream(seed, k as u64)))
            .collect();
        let p = scores.dim();
        let mut h = DMatrix::<T>::zeros(h_draws, p);
        let mut c = DMatrix::<T>::zeros(c_draws, p);
        for (k, xi) in draws.iter().enumerate() {
            if k < h_draws {
                h.row_mut(k).tr_copy_from(xi);
            } else {
                c.row_mut(k - h_draws).tr_copy_from(xi);
            }
        }
        Self { h, c, seed }
    }

    pub fn h_draws(&self) -> usize {
        self.h.nrows()
    }

    pub fn c_draws(&self) -> usize {
        self.c.nrows()
    }

    /// The same draws with the two pools exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            h: self.c.clone(),
            c: self.h.clone(),
            seed: self.seed,
        }
    }
}

pub fn bootstrap_pool<T: Scalar>(fit: &SieveFit<T>, cfg: &BootstrapConfig) -> Result<BootstrapPool<T>> {
    cfg.validate(fit.data().rows())?;
    let scores = BlockedScores::new(fit, cfg.block_length)?;
    Ok(BootstrapPool::draw(&scores, cfg.h_draws, cfg.c_draws, cfg.seed))
}
