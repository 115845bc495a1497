use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Response, covariates and rescaled times of a regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionData<T> {
    pub y: Vec<T>,
    /// `x[j][i]` is covariate `j + 1` at row `i`.
    pub x: Vec<Vec<T>>,
    pub t: Vec<T>,
    /// Number of raw observations behind the rows (the full series length in
    /// autoregressive mode, the row count otherwise).
    pub n_obs: usize,
    /// Lag order when built by [`RegressionData::autoregressive`].
    pub ar_lags: Option<usize>,
}

impl<T: Scalar> RegressionData<T> {
    /// Rows `i = 1..n` at `t_i = i / n`.
    pub fn new(y: Vec<T>, x: Vec<Vec<T>>) -> Result<Self> {
        let n = y.len();
        for xs in &x {
            if xs.len() != n {
                return Err(Error::LengthMismatch {
                    what: "covariate series",
                    expected: n,
                    found: xs.len(),
                });
            }
        }
        let t = (1..=n).map(|i| lit(i as f64 / n as f64)).collect();
        Ok(Self {
            y,
            x,
            t,
            n_obs: n,
            ar_lags: None,
        })
    }

    /// Autoregressive rows `Y_i = X_{r+i}`, `X_{j,i} = X_{r+i-j}` for
    /// `i = 1..n-r`, with the response time `(r+i)/n`.
    pub fn autoregressive(series: &[T], r: usize) -> Result<Self> {
        let n = series.len();
        if r == 0 || n <= r {
            return Err(Error::Config(format!(
                "autoregressive mode needs 1 <= r < n, got r = {r}, n = {n}"
            )));
        }
        let y = series[r..].to_vec();
        let x = (1..=r).map(|j| series[r - j..n - j].to_vec()).collect();
        let t = (r + 1..=n).map(|k| lit(k as f64 / n as f64)).collect();
        Ok(Self {
            y,
            x,
            t,
            n_obs: n,
            ar_lags: Some(r),
        })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn r(&self) -> usize {
        self.x.len()
    }

    /// Covariates of row `i`.
    pub fn covariates(&self, i: usize) -> Vec<T> {
        self.x.iter().map(|xs| xs[i]).collect()
    }

    /// The first `rows` rows with their original times.
    pub fn head(&self, rows: usize) -> Self {
        let rows = rows.min(self.rows());
        Self {
            y: self.y[..rows].to_vec(),
            x: self.x.iter().map(|xs| xs[..rows].to_vec()).collect(),
            t: self.t[..rows].to_vec(),
            n_obs: rows + self.ar_lags.unwrap_or(0),
            ar_lags: self.ar_lags,
        }
    }
}
