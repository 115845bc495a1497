//! Seeded Monte Carlo replication of coverage and rejection rates.

use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{RegressionData, SieveConfig, SieveFit};
use crate::inference::{
    build_scr, test_homogeneity, test_separability, BootstrapConfig, HypothesisKind, ScrGrid,
};
use crate::process::{simulate_scenario_with, CenteredTruth, Scenario, SimOptions};
use crate::rng::derive;
use crate::tuning::{select_cd, select_m, with_sizes, TuneGrid};

/// Fraction of replicates allowed to fail before the study is abandoned.
pub const FAILURE_BUDGET: f64 = 0.05;

/// Monte Carlo size of the stationary centering of the true surface.
pub const DEFAULT_CENTERING_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "kind")]
pub enum StudyMode {
    /// Does the region contain the centered true surface at every grid point?
    Coverage,
    /// Does the test reject? Exact-form runs test the centered true surface.
    Test(HypothesisKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub replicates: usize,
    pub sieve: SieveConfig<f64>,
    pub bootstrap: BootstrapConfig,
    pub mode: StudyMode,
    pub seed: u64,
    pub centering_samples: usize,
    /// Per-replicate data-driven choice of `(c, d)` and `m`; the fixed sizes
    /// and block length are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneGrid>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("a study needs at least one replicate".into()));
        }
        if self.sieve.r() != self.scenario.lags() {
            return Err(Error::Config(format!(
                "sieve has {} components but the scenario has {} lags",
                self.sieve.r(),
                self.scenario.lags()
            )));
        }
        self.sieve.validate()?;
        self.bootstrap.validate(self.n - self.scenario.lags())
    }
}

/// Result of one replicate; `outcome` is `None` when the replicate failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub id: usize,
    pub outcome: Option<bool>,
    pub statistic: Option<f64>,
    pub c_alpha: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub replicates: usize,
    pub failures: usize,
    /// Coverage or rejection rate over the successful replicates.
    pub rate: f64,
    /// `√(rate (1 − rate) / R)`.
    pub se: f64,
}

impl StudySummary {
    pub fn from_outcomes(outcomes: &[ReplicateOutcome]) -> Self {
        let ok: Vec<bool> = outcomes.iter().filter_map(|o| o.outcome).collect();
        let r = ok.len();
        let rate = if r == 0 {
            0.0
        } else {
            ok.iter().filter(|&&b| b).count() as f64 / r as f64
        };
        Self {
            replicates: outcomes.len(),
            failures: outcomes.len() - r,
            rate,
            se: if r == 0 { 0.0 } else { (rate * (1.0 - rate) / r as f64).sqrt() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub outcomes: Vec<ReplicateOutcome>,
    pub summary: StudySummary,
}

/// Run all replicates, on `workers` threads when given. Replicate `k` draws
/// its data from stream `k` of the master seed and its bootstrap from a seed
/// derived from `(seed, k)`, so results do not depend on scheduling.
pub fn run_study(cfg: &StudyConfig, workers: Option<usize>) -> Result<StudyResult> {
    let outcomes = run_replicates(cfg, 0..cfg.replicates, workers)?;
    let summary = StudySummary::from_outcomes(&outcomes);
    check_budget(&summary)?;
    Ok(StudyResult { outcomes, summary })
}

/// Run the replicates with ids in `ids`, ordered by id. Failures are recorded
/// in the outcomes, not raised.
pub fn run_replicates(
    cfg: &StudyConfig,
    ids: std::ops::Range<usize>,
    workers: Option<usize>,
) -> Result<Vec<ReplicateOutcome>> {
    cfg.validate()?;
    let truth = Arc::new(CenteredTruth::new(
        cfg.scenario,
        cfg.scenario.focus_component(),
        cfg.centering_samples,
        derive(cfg.seed, u64::MAX),
    ));
    let body = || -> Vec<ReplicateOutcome> {
        ids.clone()
            .into_par_iter()
            .map(|id| match run_replicate(cfg, &truth, id) {
                Ok((outcome, statistic, c_alpha)) => ReplicateOutcome {
                    id,
                    outcome: Some(outcome),
                    statistic: Some(statistic),
                    c_alpha: Some(c_alpha),
                    error: None,
                },
                Err(e) => {
                    warn!("replicate {id} failed: {e}");
                    ReplicateOutcome {
                        id,
                        outcome: None,
                        statistic: None,
                        c_alpha: None,
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect()
    };
    match workers {
        Some(w) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(body)),
        None => Ok(body()),
    }
}

/// Error when the failures exceed [`FAILURE_BUDGET`].
pub fn check_budget(summary: &StudySummary) -> Result<()> {
    if summary.failures as f64 > FAILURE_BUDGET * summary.replicates as f64 {
        return Err(Error::FailureBudget {
            failed: summary.failures,
            total: summary.replicates,
        });
    }
    Ok(())
}

/// Simulate and fit replicate `id`.
pub fn replicate_fit(cfg: &StudyConfig, id: usize) -> Result<SieveFit<f64>> {
    let opts = SimOptions {
        stream: id as u64,
        ..SimOptions::default()
    };
    let series = simulate_scenario_with::<f64>(&cfg.scenario, cfg.n, cfg.seed, opts)?;
    let data = RegressionData::autoregressive(&series.values, cfg.scenario.lags())?;
    match &cfg.tune {
        Some(grid) => {
            let sel = select_cd(&data, &cfg.sieve, &grid.cd, grid.validation)?;
            SieveFit::fit(data, &with_sizes(&cfg.sieve, sel.c, sel.d))
        }
        None => SieveFit::fit(data, &cfg.sieve),
    }
}

/// Whether the region contains `truth` at every grid point.
pub fn covers(scr: &ScrGrid<f64>, truth: impl Fn(f64, f64) -> f64) -> bool {
    scr.points()
        .into_iter()
        .enumerate()
        .all(|(k, (t, x))| {
            let v = truth(t, x);
            scr.lower[k] <= v && v <= scr.upper[k]
        })
}

fn run_replicate(cfg: &StudyConfig, truth: &CenteredTruth, id: usize) -> Result<(bool, f64, f64)> {
    let fit = replicate_fit(cfg, id)?;
    let block_length = match &cfg.tune {
        Some(grid) => select_m(&fit, &grid.m, grid.h0)?.m,
        None => cfg.bootstrap.block_length,
    };
    let boot = BootstrapConfig {
        seed: derive(cfg.bootstrap.seed, id as u64),
        block_length,
        ..cfg.bootstrap.clone()
    };
    let j = cfg.scenario.focus_component();
    let scr = build_scr(&fit, &boot, j)?;
    match cfg.mode {
        StudyMode::Coverage => {
            let ok = covers(&scr, |t, x| truth.eval(t, x));
            let stat = scr
                .points()
                .into_iter()
                .enumerate()
                .map(|(k, (t, x))| scr.normalized_deviation(k, truth.eval(t, x)))
                .fold(0.0, f64::max);
            Ok((ok, stat, scr.c_alpha))
        }
        StudyMode::Test(kind) => {
            let rep = match kind {
                HypothesisKind::Exact => crate::inference::test_exact_form(&scr, |t, x| truth.eval(t, x))?,
                HypothesisKind::Homogeneity => test_homogeneity(&fit, &scr)?,
                HypothesisKind::Separability => test_separability(&fit, &scr)?,
            };
            Ok((rep.reject, rep.statistic, rep.c_alpha))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{InnovationKind, Setup};

    fn tiny(mode: StudyMode, replicates: usize) -> StudyConfig {
        StudyConfig {
            scenario: Scenario::new(Setup::One, 1.0, InnovationKind::TvAr2).unwrap(),
            n: 200,
            replicates,
            sieve: SieveConfig::uniform(1, 3, 3),
            bootstrap: BootstrapConfig {
                block_length: 6,
                h_draws: 100,
                c_draws: 100,
                grid_t: 8,
                grid_x: 8,
                ..BootstrapConfig::default()
            },
            mode,
            seed: 5,
            centering_samples: 20_000,
            tune: None,
        }
    }

    #[test]
    fn single_replicate_summary() {
        let res = run_study(&tiny(StudyMode::Coverage, 1), Some(1)).unwrap();
        assert_eq!(res.outcomes.len(), 1);
        assert_eq!(res.summary.replicates, 1);
        assert!(res.summary.rate == 0.0 || res.summary.rate == 1.0);
        assert_eq!(res.summary.se, 0.0);
    }

    #[test]
    fn summary_rate_and_standard_error() {
        let outcomes: Vec<ReplicateOutcome> = [true, false, true, true]
            .iter()
            .enumerate()
            .map(|(id, &b)| ReplicateOutcome {
                id,
                outcome: Some(b),
                statistic: None,
                c_alpha: None,
                error: None,
            })
            .collect();
        let s = StudySummary::from_outcomes(&outcomes);
        assert_eq!(s.rate, 0.75);
        assert!((s.se - (0.75f64 * 0.25 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn outcomes_do_not_depend_on_workers() {
        let cfg = tiny(StudyMode::Test(HypothesisKind::Homogeneity), 6);
        let a = run_study(&cfg, Some(1)).unwrap();
        let b = run_study(&cfg, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tuned_replicates_run() {
        let mut cfg = tiny(StudyMode::Coverage, 2);
        cfg.tune = Some(TuneGrid {
            cd: vec![(2, 2), (3, 3)],
            validation: 20,
            m: crate::tuning::default_m_ladder(200, 2),
            h0: 2,
        });
        let res = run_study(&cfg, Some(2)).unwrap();
        assert_eq!(res.summary.failures, 0);
    }

    #[test]
    fn shards_reassemble_the_full_study() {
        let cfg = tiny(StudyMode::Coverage, 4);
        let full = run_study(&cfg, Some(1)).unwrap();
        let mut parts = run_replicates(&cfg, 2..4, None).unwrap();
        parts.splice(0..0, run_replicates(&cfg, 0..2, None).unwrap());
        assert_eq!(parts, full.outcomes);
    }

    #[test]
    fn mismatched_component_count() {
        let mut cfg = tiny(StudyMode::Coverage, 1);
        cfg.sieve = SieveConfig::uniform(2, 3, 3);
        assert!(run_study(&cfg, None).is_err());
    }
}
