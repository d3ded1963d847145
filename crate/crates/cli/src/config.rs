use std::path::{Path, PathBuf};

use qbrown::discrete::ChainSpec;
use qbrown::finite_bath::{Schedule, ThermalRule};
use qbrown::lindblad::CatStateSpec;
use qbrown::weyl::WeylWord;
use qbrown::{ProcessParams, SpectralDensity, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Grids shared by the commands. Absent lists fall back to per-command defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub times: Option<Vec<f64>>,
    /// Conditioning times for `conditional`.
    pub s_times: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    /// `|α - β|` values for the cat sweep.
    pub distances: Option<Vec<f64>>,
    /// Fock truncation.
    pub dim: Option<usize>,
}

/// One JSON document per run. Command-line flags override `out` and `seed`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub process: Option<ProcessParams>,
    pub density: Option<SpectralDensity>,
    pub eps: Option<f64>,
    pub thermal: Option<ThermalRule>,
    pub schedule: Option<Schedule>,
    pub chain: Option<ChainSpec>,
    pub cat: Option<CatStateSpec>,
    /// Coherent probes `(b, c)` for matrix elements.
    pub probe: Option<(C64, C64)>,
    pub word: Option<WeylWord>,
    pub grid: Grid,
    pub samples: Option<usize>,
    pub trunc: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn process_or(&self, default: ProcessParams) -> Result<ProcessParams, CliError> {
        let p = self.process.unwrap_or(default);
        p.validate()?;
        Ok(p)
    }
}

/// Uses `values` or the default, and requires a strictly increasing list.
pub fn increasing(name: &str, values: &Option<Vec<f64>>, default: &[f64]) -> Result<Vec<f64>, CliError> {
    let v = values.clone().unwrap_or_else(|| default.to_vec());
    if v.is_empty() {
        return Err(CliError::Config(format!("{name} grid is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Config(format!("{name} grid must be finite and strictly increasing")));
    }
    Ok(v)
}

pub fn steps(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}
