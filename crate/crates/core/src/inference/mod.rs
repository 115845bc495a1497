//! Multiplier bootstrap, simultaneous confidence regions and the
//! structural hypothesis tests built on them.

mod bootstrap;
mod hypothesis;
mod scr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{bootstrap_pool, draw_xi, BlockedScores, BootstrapPool};
pub use hypothesis::{
    compare_surface, separable_fit, separable_surface, test_exact_form, test_homogeneity, test_separability,
    HypothesisKind, TestReport,
};
pub use scr::{
    build_scr, build_scr_with_pool, critical_value, eval_t, grid_statistics, sample_sd, scr_grid_axes,
    t_direction, GridStatistics, ScrGrid, H_FLOOR,
};

/// Settings of the multiplier bootstrap and of the evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    /// Block length `m`.
    pub block_length: usize,
    /// Draws used for `ĥ` (`B`).
    pub h_draws: usize,
    /// Draws used for `ĉ_α` (`M`).
    pub c_draws: usize,
    /// Grid points in time (`C₁`).
    pub grid_t: usize,
    /// Grid points in the mapped state coordinate (`C₂`).
    pub grid_x: usize,
    /// Level `α` of the `1 − α` region.
    pub alpha: f64,
    pub seed: u64,
    /// Covariate window covered by the state grid.
    pub x_window: [f64; 2],
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            block_length: 8,
            h_draws: 1000,
            c_draws: 1000,
            grid_t: 100,
            grid_x: 100,
            alpha: 0.05,
            seed: 0,
            x_window: [-10.0, 10.0],
        }
    }
}

impl BootstrapConfig {
    /// Defaults with `m ≈ n^{1/3}`.
    pub fn for_sample_size(n: usize) -> Self {
        Self {
            block_length: default_block_length(n),
            ..Self::default()
        }
    }

    /// Check the invariants against a sample of `rows` observations.
    pub fn validate(&self, rows: usize) -> Result<()> {
        if self.block_length == 0 || 2 * self.block_length >= rows {
            return Err(Error::BlockLength {
                block: self.block_length,
                rows,
            });
        }
        if self.h_draws < 100 || self.c_draws < 100 {
            return Err(Error::Config(format!(
                "bootstrap needs at least 100 draws per pool, got B = {}, M = {}",
                self.h_draws, self.c_draws
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.grid_t == 0 || self.grid_x == 0 {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        let [lo, hi] = self.x_window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid x window [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// `round(n^{1/3})`, at least 1.
pub fn default_block_length(n: usize) -> usize {
    ((n as f64).cbrt().round() as usize).max(1)
}
