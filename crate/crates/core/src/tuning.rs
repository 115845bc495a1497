//! Data-driven choice of the basis sizes and of the bootstrap block length.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit_pilot, RegressionData, SieveConfig, SieveFit};
use crate::inference::BlockedScores;
use crate::scalar::{to_f64, Scalar};

/// Relative tolerance under which two scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Default neighborhood radius of the minimum-volatility rule.
pub const DEFAULT_H0: usize = 3;

/// Candidate sets for both selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub cd: Vec<(usize, usize)>,
    /// Validation length `l`.
    pub validation: usize,
    /// Extended block-length ladder `m_{−h₀+1} < … < m_{n₀+h₀}`.
    pub m: Vec<usize>,
    pub h0: usize,
}

impl TuneGrid {
    /// `(c, d) ∈ {2, …, ⌈2 log n⌉}²`, `l = ⌊3 log₂ n⌋`, `h₀ = 3` and the
    /// default block-length ladder.
    pub fn defaults(n: usize) -> Self {
        let top = ((2.0 * (n as f64).ln()).ceil() as usize).max(2);
        let cd = (2..=top).flat_map(|c| (2..=top).map(move |d| (c, d))).collect();
        Self {
            cd,
            validation: default_validation_length(n),
            m: default_m_ladder(n, DEFAULT_H0),
            h0: DEFAULT_H0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.validation == 0 || 2 * self.validation >= n {
            return Err(Error::Config(format!(
                "validation length {} must satisfy 1 <= l < n/2 = {}",
                self.validation,
                n / 2
            )));
        }
        if self.h0 == 0 {
            return Err(Error::Config("h0 must be at least 1".into()));
        }
        if self.m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("block-length candidates must be strictly increasing".into()));
        }
        if self.cd.is_empty() {
            return Err(Error::InsufficientCandidates { found: 0, required: 1 });
        }
        Ok(())
    }
}

/// `⌊3 log₂ n⌋`.
pub fn default_validation_length(n: usize) -> usize {
    (3.0 * (n as f64).log2()).floor() as usize
}

/// Nine interior block lengths spaced by `2^{1/4}` around `n^{1/3}`, extended
/// by `h₀` on each side; consecutive integers when rounding would collide.
/// Values not below `n/2` are dropped.
pub fn default_m_ladder(n: usize, h0: usize) -> Vec<usize> {
    let total = 9 + 2 * h0;
    let center = (n as f64).cbrt();
    let half = (total / 2) as i64;
    let mut ladder: Vec<usize> = (0..total as i64)
        .map(|i| ((center * 2f64.powf((i - half) as f64 / 4.0)).round() as usize).max(1))
        .collect();
    ladder.dedup();
    if ladder.len() < total {
        let first = (center.round() as usize).saturating_sub(half as usize).max(1);
        ladder = (first..first + total).collect();
    }
    ladder.retain(|&m| 2 * m < n);
    ladder
}

/// Score of one `(c, d)` candidate; `None` when the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdScore {
    pub c: usize,
    pub d: usize,
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdSelection {
    pub c: usize,
    pub d: usize,
    pub scores: Vec<CdScore>,
}

/// `base` with every block (and the intercept) sized `(c, d)`.
pub fn with_sizes<T: Scalar>(base: &SieveConfig<T>, c: usize, d: usize) -> SieveConfig<T> {
    let mut cfg = base.clone();
    if cfg.c0 > 0 {
        cfg.c0 = c;
    }
    for comp in &mut cfg.components {
        comp.c = c;
        comp.d = d;
        comp.shift_sizes = None;
        if comp.start.is_some_and(|s| s > d) {
            comp.start = None;
        }
    }
    cfg
}

/// Fit each candidate on the first `n − l` rows and score the one-step
/// predictions of the last `l` responses by their mean squared error.
pub fn select_cd<T: Scalar>(
    data: &RegressionData<T>,
    base: &SieveConfig<T>,
    candidates: &[(usize, usize)],
    l: usize,
) -> Result<CdSelection> {
    let n = data.rows();
    if l == 0 || l >= n {
        return Err(Error::Config(format!("validation length {l} outside 1..{n}")));
    }
    if candidates.is_empty() {
        return Err(Error::InsufficientCandidates { found: 0, required: 1 });
    }
    let train = data.head(n - l);
    let scores: Vec<CdScore> = candidates
        .par_iter()
        .map(|&(c, d)| CdScore {
            c,
            d,
            mse: validation_mse(data, &train, &with_sizes(base, c, d), n - l).ok(),
        })
        .collect();
    let best = scores
        .iter()
        .filter_map(|s| s.mse.map(|v| (s, v)))
        .reduce(|a, b| if better(b, a) { b } else { a })
        .ok_or_else(|| Error::TuningFailure("every (c, d) candidate failed to fit".into()))?;
    Ok(CdSelection {
        c: best.0.c,
        d: best.0.d,
        scores,
    })
}

fn better(a: (&CdScore, f64), b: (&CdScore, f64)) -> bool {
    let scale = a.1.abs().max(b.1.abs()).max(f64::MIN_POSITIVE);
    if (a.1 - b.1).abs() > TIE_TOLERANCE * scale {
        return a.1 < b.1;
    }
    let key = |s: &CdScore| (s.c * s.d, s.c, s.d);
    key(a.0) < key(b.0)
}

fn validation_mse<T: Scalar>(
    data: &RegressionData<T>,
    train: &RegressionData<T>,
    cfg: &SieveConfig<T>,
    from: usize,
) -> Result<f64> {
    let fit = fit_pilot(train.clone(), cfg)?;
    let n = data.rows();
    let mut acc = 0.0;
    for k in from..n {
        let e = to_f64(data.y[k] - fit.predict(data.t[k], &data.covariates(k))?);
        acc += e * e;
    }
    let mse = acc / (n - from) as f64;
    if mse.is_finite() {
        Ok(mse)
    } else {
        Err(Error::TuningFailure("non-finite validation error".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSelection {
    pub m: usize,
    /// `(m_j, se(m_j))` for the interior candidates.
    pub se: Vec<(usize, f64)>,
}

/// Minimum-volatility index over a sequence of covariance estimates.
///
/// Returns the position of the selected interior entry and `se` for every
/// interior position `h₀..len − h₀`.
pub fn min_volatility(omegas: &[DMatrix<f64>], h0: usize) -> Result<(usize, Vec<f64>)> {
    let len = omegas.len();
    if h0 == 0 || len < 2 * h0 + 1 {
        return Err(Error::InsufficientCandidates {
            found: len,
            required: 2 * h0 + 1,
        });
    }
    let se: Vec<f64> = (h0..len - h0)
        .map(|pos| {
            let hood = &omegas[pos - h0..=pos + h0];
            let mean = hood.iter().fold(DMatrix::zeros(omegas[0].nrows(), omegas[0].ncols()), |a, b| a + b)
                / hood.len() as f64;
            let ss: f64 = hood.iter().map(|o| (&mean - o).norm_squared()).sum();
            (ss / (2 * h0) as f64).sqrt()
        })
        .collect();
    let scale = omegas.iter().map(|o| o.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let min = se.iter().copied().fold(f64::INFINITY, f64::min);
    let pick = se
        .iter()
        .position(|&s| s <= min + TIE_TOLERANCE * scale)
        .expect("non-empty interior");
    Ok((pick + h0, se))
}

/// Choose `m` from the extended ladder by the minimum-volatility rule applied
/// to the blocked-score covariances.
pub fn select_m<T: Scalar>(fit: &SieveFit<T>, ladder: &[usize], h0: usize) -> Result<MSelection> {
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("block-length candidates must be strictly increasing".into()));
    }
    let omegas: Vec<DMatrix<f64>> = ladder
        .par_iter()
        .map(|&m| {
            let cov = BlockedScores::new(fit, m)?.covariance();
            Ok(cov.map(|v| to_f64(v)))
        })
        .collect::<Result<_>>()?;
    let (pos, se) = min_volatility(&omegas, h0)?;
    Ok(MSelection {
        m: ladder[pos],
        se: ladder[h0..ladder.len() - h0].iter().copied().zip(se).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::build_design;
    use crate::rng::stream;
    use nalgebra::DVector;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn span_data(n: usize, seed: u64) -> RegressionData<f64> {
        let cfg = SieveConfig::<f64>::uniform(1, 2, 2);
        let mut rng = stream(seed, 0);
        let xs: Vec<f64> = (0..n).map(|_| f64::standard_normal(&mut rng)).collect();
        let probe = RegressionData::new(vec![0.0; n], vec![xs.clone()]).unwrap();
        let w = build_design(&probe, &cfg).unwrap().matrix;
        let beta = DVector::from_fn(w.ncols(), |_, _| rng.random_range(-1.0..1.0));
        RegressionData::new((&w * beta).as_slice().to_vec(), vec![xs]).unwrap()
    }

    #[test]
    fn single_candidate_is_returned() {
        let data = span_data(200, 1);
        let sel = select_cd(&data, &SieveConfig::uniform(1, 2, 2), &[(3, 5)], 20).unwrap();
        assert_eq!((sel.c, sel.d), (3, 5));
    }

    #[test]
    fn planted_span_is_selected() {
        let data = span_data(300, 2);
        let base = SieveConfig::uniform(1, 2, 2);
        let sel = select_cd(&data, &base, &[(1, 1), (2, 2), (4, 4)], 24).unwrap();
        assert_eq!((sel.c, sel.d), (2, 2));
        let again = select_cd(&data, &base, &[(1, 1), (2, 2), (4, 4)], 24).unwrap();
        assert_eq!(sel, again);
    }

    #[test]
    fn selection_ignores_candidate_order() {
        let data = span_data(300, 3);
        let base = SieveConfig::uniform(1, 2, 2);
        let mut cands = vec![(1, 1), (1, 3), (2, 2), (3, 1), (4, 4), (2, 3)];
        let first = select_cd(&data, &base, &cands, 24).unwrap();
        for k in 0..5 {
            cands.shuffle(&mut stream(9, k));
            let sel = select_cd(&data, &base, &cands, 24).unwrap();
            assert_eq!((sel.c, sel.d), (first.c, first.d));
        }
    }

    #[test]
    fn all_candidates_failing() {
        let data = span_data(60, 4);
        let err = select_cd(&data, &SieveConfig::uniform(1, 2, 2), &[(10, 10)], 10);
        assert!(matches!(err, Err(Error::TuningFailure(_))));
    }

    #[test]
    fn constant_covariances_pick_smallest_interior() {
        let omegas = vec![DMatrix::<f64>::identity(3, 3) * 2.0; 11];
        let (pos, se) = min_volatility(&omegas, DEFAULT_H0).unwrap();
        assert_eq!(pos, DEFAULT_H0);
        assert_eq!(se.len(), 11 - 2 * DEFAULT_H0);
        assert!(se.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn too_few_covariances() {
        let omegas = vec![DMatrix::<f64>::identity(2, 2); 6];
        assert!(matches!(
            min_volatility(&omegas, 3),
            Err(Error::InsufficientCandidates { found: 6, required: 7 })
        ));
    }

    #[test]
    fn volatility_is_nonnegative_and_finds_plateau() {
        // Wild at both ends, flat in the middle.
        let omegas: Vec<DMatrix<f64>> = (0..15)
            .map(|k| {
                let wobble = if (5..=10).contains(&k) { 0.0 } else { (k as f64).sin() * 3.0 };
                DMatrix::identity(2, 2) * (1.0 + wobble)
            })
            .collect();
        let (pos, se) = min_volatility(&omegas, 2).unwrap();
        assert!(se.iter().all(|&s| s >= 0.0));
        assert!((7..=8).contains(&pos), "picked {pos}");
    }

    #[test]
    fn default_ladders() {
        for n in [250, 500, 2000, 5000] {
            let ladder = default_m_ladder(n, DEFAULT_H0);
            assert_eq!(ladder.len(), 15);
            assert!(ladder.windows(2).all(|w| w[0] < w[1]));
            let interior = &ladder[3..12];
            let c = (n as f64).cbrt();
            assert!(interior[0] as f64 <= c && c <= interior[8] as f64);
        }
        let grid = TuneGrid::defaults(500);
        assert_eq!(grid.h0, 3);
        assert_eq!(grid.validation, 26);
        assert!(grid.cd.contains(&(2, 2)) && grid.cd.contains(&(13, 13)));
        grid.validate(500).unwrap();
    }

    /// Regression residuals following an AR(1) with coefficient `a`.
    fn ar_residual_fit(a: f64, seed: u64) -> SieveFit<f64> {
        let n = 500;
        let mut rng = stream(seed, 0);
        let x: Vec<f64> = (0..n).map(|_| f64::standard_normal(&mut rng)).collect();
        let mut e = 0.0;
        let y: Vec<f64> = (0..n)
            .map(|_| {
                e = a * e + f64::standard_normal(&mut rng);
                e
            })
            .collect();
        SieveFit::fit(RegressionData::new(y, vec![x]).unwrap(), &SieveConfig::uniform(1, 2, 2)).unwrap()
    }

    #[test]
    fn block_length_grows_with_dependence() {
        let ladder = default_m_ladder(500, DEFAULT_H0);
        let mut wins = 0;
        for seed in 0..30 {
            let weak = select_m(&ar_residual_fit(0.1, seed), &ladder, DEFAULT_H0).unwrap().m;
            let strong = select_m(&ar_residual_fit(0.8, seed), &ladder, DEFAULT_H0).unwrap().m;
            if strong >= weak {
                wins += 1;
            }
        }
        assert!(wins >= 21, "{wins} of 30");
    }

    #[test]
    fn select_m_is_deterministic() {
        let fit = ar_residual_fit(0.5, 7);
        let ladder = default_m_ladder(500, DEFAULT_H0);
        let a = select_m(&fit, &ladder, DEFAULT_H0).unwrap();
        let b = select_m(&fit, &ladder, DEFAULT_H0).unwrap();
        assert_eq!(a, b);
        assert!(ladder[3..12].contains(&a.m));
    }
}
