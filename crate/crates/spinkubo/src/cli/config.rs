//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::lattice_model::{
    build_kane_mele, Axis, HoppingKernel, InternalBasis, KaneMeleParams, SwitchFunction,
    SwitchProfile, C64,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub switches: SwitchConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    KaneMele,
    Generic,
}

/// One matrix element `H_{0,offset}[row, col]`; its hermitian partner is added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingEntry {
    pub offset: [i64; 2],
    pub row: usize,
    pub col: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub kind: ModelKind,
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub lambda_v: f64,
    #[serde(default)]
    pub lambda_so: f64,
    #[serde(default)]
    pub lambda_r: f64,
    /// Orbitals per cell for generic models (each carries spin ½).
    pub orbitals: Option<usize>,
    #[serde(default)]
    pub hopping: Vec<HoppingEntry>,
}

impl ModelConfig {
    pub fn kane_mele(&self) -> KaneMeleParams {
        KaneMeleParams::new(self.t, self.lambda_v, self.lambda_so, self.lambda_r)
    }

    /// Kane-Mele kernel plus any extra entries, or a generic kernel built
    /// from the entries alone.
    pub fn hamiltonian(&self) -> Result<HoppingKernel, ConfigError> {
        let mut h = match self.kind {
            ModelKind::KaneMele => build_kane_mele(&self.kane_mele()),
            ModelKind::Generic => {
                let n = self
                    .orbitals
                    .ok_or_else(|| invalid("generic model needs `orbitals`"))?;
                if n == 0 {
                    return Err(invalid("`orbitals` must be positive"));
                }
                HoppingKernel::new(InternalBasis::spinful(n))
            }
        };
        for e in &self.hopping {
            h.add_hermitian_entry(e.offset, e.row, e.col, C64::new(e.re, e.im))
                .map_err(|err| invalid(format!("hopping {:?}: {err}", e.offset)))?;
        }
        h.prune();
        if h.is_empty() && self.kind == ModelKind::Generic {
            return Err(invalid("generic model has no hoppings"));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Brillouin-zone grid size.
    pub m: usize,
    /// Kernel radius; chosen from the decay fit (capped at `m/2 - 1`) when absent.
    pub r: Option<usize>,
    pub l_max: usize,
    pub transverse_cutoff: Option<usize>,
    /// Defaults to half the internal dimension.
    pub filled_bands: Option<usize>,
    pub mu: Option<f64>,
    /// Torus sides for `oracle-check`.
    pub oracle_sides: Vec<usize>,
    /// Ramp width `l` of the approximate position in `decomposition`.
    pub decomposition_l: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            m: 48,
            r: None,
            l_max: 41,
            transverse_cutoff: None,
            filled_bands: None,
            mu: None,
            oracle_sides: vec![15],
            decomposition_l: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchConfig {
    /// Switch along axis 1.
    pub lambda1: SwitchProfile,
    /// Switch along axis 2.
    pub lambda2: SwitchProfile,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            lambda1: SwitchFunction::sharp(Axis::One).profile,
            lambda2: SwitchFunction::sharp(Axis::Two).profile,
        }
    }
}

impl SwitchConfig {
    pub fn functions(&self) -> (SwitchFunction, SwitchFunction) {
        (
            SwitchFunction {
                axis: Axis::One,
                profile: self.lambda1,
            },
            SwitchFunction {
                axis: Axis::Two,
                profile: self.lambda2,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
        }
    }
}

/// Model parameters that a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    T,
    LambdaV,
    LambdaSo,
    LambdaR,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::T => "t",
            SweepParameter::LambdaV => "lambda_v",
            SweepParameter::LambdaSo => "lambda_so",
            SweepParameter::LambdaR => "lambda_r",
        }
    }

    pub fn apply(&self, model: &mut ModelConfig, value: f64) {
        match self {
            SweepParameter::T => model.t = value,
            SweepParameter::LambdaV => model.lambda_v = value,
            SweepParameter::LambdaSo => model.lambda_so = value,
            SweepParameter::LambdaR => model.lambda_r = value,
        }
    }
}

/// Evenly spaced values `start + i (stop - start)/(steps - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub first: SweepAxis,
    pub second: Option<SweepAxis>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn filled_bands(&self, dim: usize) -> usize {
        self.numerics.filled_bands.unwrap_or(dim / 2)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.numerics;
        let m = &self.model;
        for (name, x) in [
            ("t", m.t),
            ("lambda_v", m.lambda_v),
            ("lambda_so", m.lambda_so),
            ("lambda_r", m.lambda_r),
        ] {
            if !x.is_finite() {
                return Err(invalid(format!("model.{name} must be finite")));
            }
        }
        if n.m < 2 {
            return Err(invalid("numerics.m must be at least 2"));
        }
        if let Some(r) = n.r {
            if n.m <= 2 * r {
                return Err(invalid(format!(
                    "numerics.m = {} must exceed 2r = {}",
                    n.m,
                    2 * r
                )));
            }
        }
        if n.l_max == 0 || n.l_max.is_multiple_of(2) {
            return Err(invalid("numerics.l_max must be odd and positive"));
        }
        if n.filled_bands == Some(0) {
            return Err(invalid("numerics.filled_bands must be positive"));
        }
        if n.oracle_sides.iter().any(|&l| l % 2 == 0 || l < 3) {
            return Err(invalid("numerics.oracle_sides must be odd and at least 3"));
        }
        if n.decomposition_l.is_nan() || n.decomposition_l <= 0.0 {
            return Err(invalid("numerics.decomposition_l must be positive"));
        }
        for p in [self.switches.lambda1, self.switches.lambda2] {
            match p {
                SwitchProfile::Ramp { start, end } if end <= start => {
                    return Err(invalid("ramp switch needs end > start"))
                }
                SwitchProfile::Xi { l } if (l.is_nan() || l <= 0.0) => {
                    return Err(invalid("xi switch needs l > 0"))
                }
                _ => {}
            }
        }
        if let Some(s) = &self.sweep {
            for a in std::iter::once(&s.first).chain(&s.second) {
                if a.steps == 0 {
                    return Err(invalid("sweep steps must be positive"));
                }
            }
        }
        Ok(())
    }
}
