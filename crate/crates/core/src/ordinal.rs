//! Ordinal label spaces: PSPI-style intensity quantization and Gaussian
//! soft encoding of ordinal levels.
//!
//! The PSPI table below has six bins (levels 0 through 5) even though it
//! is usually described as a five-level quantization; the six listed bins
//! are what is implemented.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default number of ordinal levels.
pub const DEFAULT_LEVELS: usize = 6;

/// Default Gaussian width used for weak ordinal labels.
pub const DEFAULT_SIGMA: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrdinalLevel {
    value: usize,
    levels: usize,
}

impl OrdinalLevel {
    pub fn new(value: usize, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(invalid(format!("need at least 2 ordinal levels, got {levels}")));
        }
        if value >= levels {
            return Err(invalid(format!("level {value} outside [0, {}]", levels - 1)));
        }
        Ok(Self { value, levels })
    }

    pub fn value(self) -> usize {
        self.value
    }

    pub fn levels(self) -> usize {
        self.levels
    }
}

/// Maps a raw PSPI score in `[0, 15]` onto six levels:
/// `0→0, 1→1, 2→2, 3→3, 4..=5→4, 6..=15→5`.
pub fn quantize_intensity(raw: u32) -> Result<OrdinalLevel> {
    let level = match raw {
        0..=3 => raw as usize,
        4..=5 => 4,
        6..=15 => 5,
        _ => return Err(invalid(format!("PSPI score {raw} outside [0, 15]"))),
    };
    OrdinalLevel::new(level, DEFAULT_LEVELS)
}

/// Soft label over `K` ordinal levels peaking at `center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCode {
    pub values: Vec<f64>,
    pub sigma: f64,
    pub center: usize,
}

impl GaussianCode {
    pub fn levels(&self) -> usize {
        self.values.len()
    }
}

/// `values[k] = exp(−(k − label)² / (2σ²))`, optionally divided by the sum.
///
/// The unnormalized form has its mode at exactly 1.
pub fn gaussian_encode(label: OrdinalLevel, sigma: f64, normalize: bool) -> Result<GaussianCode> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be positive and finite, got {sigma}")));
    }
    let y = label.value() as f64;
    let mut values: Vec<f64> = (0..label.levels())
        .map(|k| {
            let d = k as f64 - y;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    if normalize {
        let total: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(GaussianCode {
        values,
        sigma,
        center: label.value(),
    })
}

/// One-hot vector at `label`; the σ→0 limit of [`gaussian_encode`].
pub fn one_hot(label: OrdinalLevel) -> GaussianCode {
    let mut values = vec![0.0; label.levels()];
    values[label.value()] = 1.0;
    GaussianCode {
        values,
        sigma: 0.0,
        center: label.value(),
    }
}

/// How weak bag labels are turned into target vectors for the ordinal head.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LabelEncoding {
    OneHot,
    Gaussian { sigma: f64 },
    GaussianNormalized { sigma: f64 },
}

impl Default for LabelEncoding {
    fn default() -> Self {
        LabelEncoding::Gaussian {
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl LabelEncoding {
    pub fn encode(self, label: OrdinalLevel) -> Result<GaussianCode> {
        match self {
            LabelEncoding::OneHot => Ok(one_hot(label)),
            LabelEncoding::Gaussian { sigma } => gaussian_encode(label, sigma, false),
            LabelEncoding::GaussianNormalized { sigma } => gaussian_encode(label, sigma, true),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            LabelEncoding::OneHot => Ok(()),
            LabelEncoding::Gaussian { sigma } | LabelEncoding::GaussianNormalized { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("encoding sigma must be positive, got {sigma}")))
                }
            }
        }
    }
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
