//! Bath spectral densities `r(ω)` on the positive frequency axis.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectral density families. Every family vanishes for `ω < 0`.
///
/// The Lorentzian and Gaussian families are antisymmetrized about `ω = 0`
/// so that `r(0) = 0` and `∫ r(ω)/ω dω` converges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SpectralDensity {
    /// `A w/π [1/((ω-c)²+w²) - 1/((ω+c)²+w²)]`
    Lorentzian { amplitude: f64, center: f64, width: f64 },
    /// `g ω e^{-ω/ω_c}`
    OhmicCutoff { strength: f64, cutoff: f64 },
    /// `A [e^{-(ω-c)²/2w²} - e^{-(ω+c)²/2w²}]`
    GaussianBump { amplitude: f64, center: f64, width: f64 },
    /// `level` on `[lo, hi]`, zero elsewhere.
    Window { level: f64, lo: f64, hi: f64 },
    /// Linear interpolation between samples, zero outside the sampled range.
    Tabulated { omega: Vec<f64>, r: Vec<f64> },
}

impl SpectralDensity {
    pub fn eval(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        match self {
            Self::Lorentzian { amplitude, center, width } => {
                let l = |x: f64| width / (x * x + width * width);
                amplitude / PI * (l(w - center) - l(w + center))
            }
            Self::OhmicCutoff { strength, cutoff } => strength * w * (-w / cutoff).exp(),
            Self::GaussianBump { amplitude, center, width } => {
                let g = |x: f64| (-(x * x) / (2.0 * width * width)).exp();
                amplitude * (g(w - center) - g(w + center))
            }
            Self::Window { level, lo, hi } => {
                if w >= *lo && w <= *hi {
                    *level
                } else {
                    0.0
                }
            }
            Self::Tabulated { omega, r } => interpolate(omega, r, w),
        }
    }

    /// Points where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Window { lo, hi, .. } => vec![*lo, *hi],
            Self::Tabulated { omega, .. } => omega.clone(),
            _ => Vec::new(),
        }
    }

    /// Upper end of the support, if bounded.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            Self::Window { hi, .. } => Some(*hi),
            Self::Tabulated { omega, .. } => omega.last().copied(),
            _ => None,
        }
    }

    /// Frequency scale beyond which the density is in its tail.
    pub fn scale(&self) -> f64 {
        match self {
            Self::Lorentzian { center, width, .. } | Self::GaussianBump { center, width, .. } => center.abs() + 4.0 * width,
            Self::OhmicCutoff { cutoff, .. } => 4.0 * cutoff,
            Self::Window { hi, .. } => *hi,
            Self::Tabulated { omega, .. } => omega.last().copied().unwrap_or(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("spectral density parameter {name} must be positive, got {v}")))
            }
        };
        match self {
            Self::Lorentzian { amplitude, center, width } | Self::GaussianBump { amplitude, center, width } => {
                positive("amplitude", *amplitude)?;
                positive("center", *center)?;
                positive("width", *width)
            }
            Self::OhmicCutoff { strength, cutoff } => {
                positive("strength", *strength)?;
                positive("cutoff", *cutoff)
            }
            Self::Window { level, lo, hi } => {
                if !(*level >= 0.0) {
                    return Err(Error::Config(format!("window level must be nonnegative, got {level}")));
                }
                if !(*lo > 0.0 && hi > lo) {
                    // lo = 0 would make ∫ r/ω diverge.
                    return Err(Error::Config(format!("window needs 0 < lo < hi, got [{lo}, {hi}]")));
                }
                Ok(())
            }
            Self::Tabulated { omega, r } => {
                if omega.len() != r.len() || omega.len() < 2 {
                    return Err(Error::Config("tabulated density needs at least two (omega, r) samples".into()));
                }
                if omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("tabulated omega must be strictly increasing".into()));
                }
                if omega[0] < 0.0 {
                    return Err(Error::Config("tabulated omega must be nonnegative".into()));
                }
                if r.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Config("tabulated r must be finite and nonnegative".into()));
                }
                if omega[0] == 0.0 && r[0] != 0.0 {
                    return Err(Error::Config("r(0) must vanish for the integral of r(ω)/ω to converge".into()));
                }
                Ok(())
            }
        }
    }

    /// Reads a two-column `(omega, r)` CSV; a non-numeric first row is taken as a header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut omega = Vec::new();
        let mut r = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Config(format!("row {i}: expected two columns, found {}", rec.len())));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(w), Ok(v)) => {
                    omega.push(w);
                    r.push(v);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::Config(format!("row {i}: non-numeric entry {:?}", rec))),
            }
        }
        let d = Self::Tabulated { omega, r };
        d.validate()?;
        Ok(d)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x);
    if i == n {
        return ys[n - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let f = (x - x0) / (x1 - x0);
    ys[i - 1] + f * (ys[i] - ys[i - 1])
}
