use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, BasisSet, Mapping, Support, TensorBasis};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sizes for one covariate block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentConfig {
    /// Time basis size `c_j`.
    pub c: usize,
    /// State basis size `d_j`.
    pub d: usize,
    /// First state index `𝗀`; detected from the basis when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    /// Time basis sizes for the mean-shift regressions, one per used state
    /// index; `c` for every index when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_sizes: Option<Vec<usize>>,
    /// Time family of this block; the model's time family when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_family: Option<BasisFamily>,
}

impl ComponentConfig {
    pub fn new(c: usize, d: usize) -> Self {
        Self {
            c,
            d,
            start: None,
            shift_sizes: None,
            time_family: None,
        }
    }
}

/// Basis sizes and families of the additive sieve model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveConfig<T> {
    /// Intercept basis size `c_0`; zero drops the intercept.
    pub c0: usize,
    pub components: Vec<ComponentConfig>,
    pub time_family: BasisFamily,
    pub state_family: BasisFamily,
    pub mapping: Mapping<T>,
    pub jacobian_weight: bool,
}

impl<T: Scalar> SieveConfig<T> {
    /// `r` covariates sharing sizes `(c, d)`, `c_0 = c`, Fourier in time and
    /// weighted algebraic-mapped Fourier in state.
    pub fn uniform(r: usize, c: usize, d: usize) -> Self {
        Self {
            c0: c,
            components: vec![ComponentConfig::new(c, d); r],
            time_family: BasisFamily::Fourier,
            state_family: BasisFamily::Fourier,
            mapping: Mapping::algebraic(T::one()),
            jacobian_weight: true,
        }
    }

    pub fn with_families(mut self, time: BasisFamily, state: BasisFamily) -> Self {
        self.time_family = time;
        self.state_family = state;
        self
    }

    pub fn r(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (j, comp) in self.components.iter().enumerate() {
            if comp.c == 0 || comp.d == 0 {
                return Err(Error::Config(format!(
                    "component {} needs positive (c, d), got ({}, {})",
                    j + 1,
                    comp.c,
                    comp.d
                )));
            }
            if let Some(s) = comp.start {
                if s == 0 || s > comp.d {
                    return Err(Error::Config(format!(
                        "component {} start index {s} outside 1..={}",
                        j + 1,
                        comp.d
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn state_support(&self) -> Support<T> {
        Support::Mapped {
            mapping: self.mapping,
            jacobian_weight: self.jacobian_weight,
        }
    }

    /// Instantiate the basis objects.
    pub fn bases(&self) -> Result<Bases<T>> {
        self.validate()?;
        let intercept = match self.c0 {
            0 => None,
            c0 => Some(BasisSet::unit(self.time_family, c0)?),
        };
        let mut blocks = Vec::with_capacity(self.r());
        let mut shift_sizes = Vec::with_capacity(self.r());
        for comp in &self.components {
            let time = BasisSet::unit(comp.time_family.unwrap_or(self.time_family), comp.c)?;
            let state = BasisSet::new(self.state_family, comp.d, self.state_support())?;
            let tensor = match comp.start {
                Some(s) => TensorBasis::with_start(time, state, s),
                None => TensorBasis::hierarchical(time, state),
            };
            let sizes = match &comp.shift_sizes {
                Some(v) => {
                    if v.len() != tensor.state_dim() {
                        return Err(Error::LengthMismatch {
                            what: "mean-shift sizes",
                            expected: tensor.state_dim(),
                            found: v.len(),
                        });
                    }
                    if v.iter().any(|&c| c == 0) {
                        return Err(Error::Config("mean-shift sizes must be positive".into()));
                    }
                    v.clone()
                }
                None => vec![comp.c; tensor.state_dim()],
            };
            blocks.push(tensor);
            shift_sizes.push(sizes);
        }
        Ok(Bases {
            intercept,
            blocks,
            shift_sizes,
        })
    }
}

/// Basis objects of a configured model.
#[derive(Debug, Clone)]
pub struct Bases<T> {
    pub intercept: Option<BasisSet<T>>,
    pub blocks: Vec<TensorBasis<T>>,
    /// Per block, per used state index, the mean-shift time basis size.
    pub shift_sizes: Vec<Vec<usize>>,
}

impl<T: Scalar> Bases<T> {
    pub fn intercept_count(&self) -> usize {
        self.intercept.as_ref().map_or(0, |b| b.count())
    }

    /// Total parameter count `𝗉 = c_0 + Σ c_j (d_j - 𝗀 + 1)`.
    pub fn param_count(&self) -> usize {
        self.intercept_count() + self.blocks.iter().map(|b| b.dim()).sum::<usize>()
    }

    /// Column offset of block `j` (1-based component index; 0 is the intercept).
    pub fn offset(&self, j: usize) -> usize {
        if j == 0 {
            return 0;
        }
        self.intercept_count() + self.blocks[..j - 1].iter().map(|b| b.dim()).sum::<usize>()
    }

    /// Column range of component `j`.
    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        let start = self.offset(j);
        let len = if j == 0 {
            self.intercept_count()
        } else {
            self.blocks[j - 1].dim()
        };
        start..start + len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_and_ranges() {
        let cfg = SieveConfig::<f64> {
            jacobian_weight: false,
            ..SieveConfig::uniform(2, 3, 4)
        };
        let b = cfg.bases().unwrap();
        // Weight off: constant first state function is skipped.
        assert_eq!(b.blocks[0].dim(), 9);
        assert_eq!(b.param_count(), 3 + 9 + 9);
        assert_eq!(b.range(0), 0..3);
        assert_eq!(b.range(1), 3..12);
        assert_eq!(b.range(2), 12..21);

        let on = SieveConfig::<f64>::uniform(1, 3, 4).bases().unwrap();
        assert_eq!(on.param_count(), 3 + 12);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SieveConfig::<f64>::uniform(1, 3, 4);
        cfg.components[0].d = 0;
        assert!(cfg.bases().is_err());
        let mut cfg = SieveConfig::<f64>::uniform(1, 3, 4);
        cfg.components[0].shift_sizes = Some(vec![2]);
        assert!(matches!(cfg.bases(), Err(Error::LengthMismatch { .. })));
    }
}
