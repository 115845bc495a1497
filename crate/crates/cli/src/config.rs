//! Run configuration: a TOML file whose sections are all optional, with
//! command-line flags applied on top.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mapsieve::basis::{BasisFamily, Mapping};
use mapsieve::estimator::{ComponentConfig, SieveConfig};
use mapsieve::inference::{default_block_length, BootstrapConfig, HypothesisKind};
use mapsieve::process::{InnovationKind, Scenario, Setup, DEFAULT_BURN_IN};
use mapsieve::study::{StudyMode, DEFAULT_CENTERING_SAMPLES};
use mapsieve::tuning::{default_m_ladder, default_validation_length, TuneGrid};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub data: DataSection,
    pub scenario: ScenarioSection,
    pub sieve: SieveSection,
    pub bootstrap: BootstrapSection,
    pub inference: InferenceSection,
    pub tune: TuneSection,
    pub study: StudySection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub input: Option<PathBuf>,
    /// Read a single series and regress it on its first `ar_lags` lags.
    pub ar_lags: Option<usize>,
    pub series_column: String,
    pub response_column: String,
    /// Covariates are read from `<prefix>1, <prefix>2, …`.
    pub covariate_prefix: String,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            input: None,
            ar_lags: None,
            series_column: "X".into(),
            response_column: "Y".into(),
            covariate_prefix: "X".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub setup: Setup,
    pub delta: f64,
    pub innovation: InnovationKind,
    pub n: usize,
    pub burn_in: usize,
    /// Extra lagged columns `X_lag1..` written by `simulate`.
    pub lagged_columns: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            setup: Setup::One,
            delta: 1.0,
            innovation: InnovationKind::TvAr2,
            n: 500,
            burn_in: DEFAULT_BURN_IN,
            lagged_columns: 0,
        }
    }
}

impl ScenarioSection {
    pub fn scenario(&self) -> CliResult<Scenario> {
        Ok(Scenario::new(self.setup, self.delta, self.innovation)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SieveSection {
    /// Time basis size of every component without an explicit entry.
    pub c: usize,
    /// State basis size of every component without an explicit entry.
    pub d: usize,
    /// Intercept size; `c` when absent.
    pub c0: Option<usize>,
    pub time_family: BasisFamily,
    pub state_family: BasisFamily,
    pub mapping: Mapping<f64>,
    pub jacobian_weight: bool,
    /// Per-component sizes; overrides `c` and `d` when nonempty.
    pub components: Vec<ComponentConfig>,
}

impl Default for SieveSection {
    fn default() -> Self {
        Self {
            c: 3,
            d: 3,
            c0: None,
            time_family: BasisFamily::Fourier,
            state_family: BasisFamily::Fourier,
            mapping: Mapping::default(),
            jacobian_weight: true,
            components: Vec::new(),
        }
    }
}

impl SieveSection {
    pub fn build(&self, r: usize) -> CliResult<SieveConfig<f64>> {
        let components = if self.components.is_empty() {
            vec![ComponentConfig::new(self.c, self.d); r]
        } else if self.components.len() == r {
            self.components.clone()
        } else {
            return Err(CliError::Config(format!(
                "[sieve].components lists {} entries but the data have {r} covariates",
                self.components.len()
            )));
        };
        let m = &self.mapping;
        let cfg = SieveConfig {
            c0: self.c0.unwrap_or(self.c),
            components,
            time_family: self.time_family,
            state_family: self.state_family,
            mapping: Mapping::new(m.kind, m.domain, m.scale)?,
            jacobian_weight: self.jacobian_weight,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    /// Block length `m`; `round(n^{1/3})` when absent.
    pub block_length: Option<usize>,
    pub h_draws: usize,
    pub c_draws: usize,
    pub grid_t: usize,
    pub grid_x: usize,
    pub alpha: f64,
    /// Bootstrap seed; the master seed when absent.
    pub seed: Option<u64>,
    pub x_window: [f64; 2],
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let b = BootstrapConfig::default();
        Self {
            block_length: None,
            h_draws: b.h_draws,
            c_draws: b.c_draws,
            grid_t: b.grid_t,
            grid_x: b.grid_x,
            alpha: b.alpha,
            seed: None,
            x_window: b.x_window,
        }
    }
}

impl BootstrapSection {
    pub fn build(&self, rows: usize, master_seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            block_length: self.block_length.unwrap_or_else(|| default_block_length(rows)),
            h_draws: self.h_draws,
            c_draws: self.c_draws,
            grid_t: self.grid_t,
            grid_x: self.grid_x,
            alpha: self.alpha,
            seed: self.seed.unwrap_or(master_seed),
            x_window: self.x_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSection {
    pub component: usize,
    pub kind: HypothesisKind,
    /// Exact-form target: `fitted`, `zero`, `scenario`, `expr:<f(t, x)>` or
    /// `csv:<path>`.
    pub m0: Option<String>,
    /// Choose `m` by minimum volatility over the `[tune]` ladder.
    pub tune_m: bool,
}

impl Default for InferenceSection {
    fn default() -> Self {
        Self {
            component: 1,
            kind: HypothesisKind::Exact,
            m0: None,
            tune_m: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    /// Candidate time sizes; `2..=⌈2 ln n⌉` when empty.
    pub c: Vec<usize>,
    /// Candidate state sizes; `2..=⌈2 ln n⌉` when empty.
    pub d: Vec<usize>,
    /// Validation length; `⌊3 log₂ n⌋` when absent.
    pub validation: Option<usize>,
    /// Block-length ladder; geometric around `n^{1/3}` when empty.
    pub m: Vec<usize>,
    pub h0: usize,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            c: Vec::new(),
            d: Vec::new(),
            validation: None,
            m: Vec::new(),
            h0: mapsieve::tuning::DEFAULT_H0,
        }
    }
}

impl TuneSection {
    pub fn build(&self, rows: usize) -> CliResult<TuneGrid> {
        let defaults = TuneGrid::defaults(rows);
        let top = ((2.0 * (rows as f64).ln()).ceil() as usize).max(2);
        let cs = if self.c.is_empty() { (2..=top).collect() } else { self.c.clone() };
        let ds = if self.d.is_empty() { (2..=top).collect() } else { self.d.clone() };
        let grid = TuneGrid {
            cd: cs.iter().flat_map(|&c| ds.iter().map(move |&d| (c, d))).collect(),
            validation: self.validation.unwrap_or_else(|| default_validation_length(rows)),
            m: if self.m.is_empty() {
                if self.h0 == defaults.h0 {
                    defaults.m
                } else {
                    default_m_ladder(rows, self.h0)
                }
            } else {
                self.m.clone()
            },
            h0: self.h0,
        };
        grid.validate(rows)?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub replicates: usize,
    /// `coverage`, `exact`, `homogeneity` or `separability`.
    pub mode: String,
    pub centering_samples: usize,
    /// Per-replicate CV and minimum-volatility tuning over `[tune]`.
    pub tune: bool,
    /// First replicate id of this shard.
    pub first: usize,
    /// Replicates in this shard; through the last replicate when absent.
    pub count: Option<usize>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            replicates: 100,
            mode: "coverage".into(),
            centering_samples: DEFAULT_CENTERING_SAMPLES,
            tune: false,
            first: 0,
            count: None,
        }
    }
}

impl StudySection {
    pub fn mode(&self) -> CliResult<StudyMode> {
        match self.mode.as_str() {
            "coverage" => Ok(StudyMode::Coverage),
            other => Ok(StudyMode::Test(HypothesisKind::parse(other)?)),
        }
    }

    pub fn ids(&self) -> CliResult<std::ops::Range<usize>> {
        let end = match self.count {
            Some(k) => self.first + k,
            None => self.replicates,
        };
        if self.first >= end || end > self.replicates {
            return Err(CliError::Config(format!(
                "replicate range {}..{end} is empty or exceeds the {} replicates",
                self.first, self.replicates
            )));
        }
        Ok(self.first..end)
    }
}

pub fn parse_innovation(s: &str) -> Result<InnovationKind, String> {
    match s {
        "tv-ar2" | "a" => Ok(InnovationKind::TvAr2),
        "setar" | "b" => Ok(InnovationKind::Setar),
        "bilinear" | "c" => Ok(InnovationKind::Bilinear),
        other => Err(format!("unknown innovation `{other}` (tv-ar2, setar, bilinear)")),
    }
}

pub fn parse_setup(s: &str) -> Result<Setup, String> {
    Setup::parse(s).map_err(|e| e.to_string())
}

pub fn parse_kind(s: &str) -> Result<HypothesisKind, String> {
    HypothesisKind::parse(s).map_err(|e| e.to_string())
}
