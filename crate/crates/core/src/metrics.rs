//! Agreement metrics between predicted and ground-truth intensity series:
//! Pearson correlation, ICC(3,1) from between/error mean squares, and MAE.
//!
//! PCC and ICC are undefined for degenerate series (constant input, or a
//! zero ICC denominator). They come back as `None` and are left out of any
//! average rather than counted as zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn check_pair(y: &[f64], h: &[f64], min_len: usize) -> Result<()> {
    if y.len() != h.len() {
        return Err(invalid(format!(
            "series lengths differ: {} vs {}",
            y.len(),
            h.len()
        )));
    }
    if y.len() < min_len {
        return Err(invalid(format!("need at least {min_len} points, got {}", y.len())));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson correlation in computational form:
/// `(nΣyh − ΣyΣh) / sqrt([nΣy² − (Σy)²][nΣh² − (Σh)²])`.
pub fn pcc(y: &[f64], h: &[f64]) -> Result<Option<f64>> {
    check_pair(y, h, 1)?;
    if y.len() < 2 || is_constant(y) || is_constant(h) {
        return Ok(None);
    }
    let n = y.len() as f64;
    let (sy, sh) = (y.iter().sum::<f64>(), h.iter().sum::<f64>());
    let syh: f64 = y.iter().zip(h).map(|(a, b)| a * b).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let shh: f64 = h.iter().map(|b| b * b).sum();
    let vy = n * syy - sy * sy;
    let vh = n * shh - sh * sh;
    if vy <= 0.0 || vh <= 0.0 {
        return Ok(None);
    }
    Ok(Some(((n * syh - sy * sh) / (vy * vh).sqrt()).clamp(-1.0, 1.0)))
}

/// Between-subject mean square over the paired ratings.
pub fn bms(y: &[f64], h: &[f64]) -> f64 {
    let n = y.len() as f64;
    let s2: f64 = y.iter().zip(h).map(|(a, b)| (a + b) * (a + b)).sum();
    let s = y.iter().sum::<f64>() + h.iter().sum::<f64>();
    (n * s2 - s * s) / (2.0 * n * (n - 1.0))
}

/// Error mean square over the paired ratings.
pub fn ems(y: &[f64], h: &[f64]) -> f64 {
    let n = y.len() as f64;
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let shh: f64 = h.iter().map(|b| b * b).sum();
    let s2: f64 = y.iter().zip(h).map(|(a, b)| (a + b) * (a + b)).sum();
    (2.0 * syy + 2.0 * shh - s2) / (2.0 * n)
}

/// ICC(3,1) as `(BMS − EMS) / (BMS + EMS)`.
pub fn icc31(y: &[f64], h: &[f64]) -> Result<Option<f64>> {
    check_pair(y, h, 1)?;
    if y.len() < 2 {
        return Ok(None);
    }
    let (b, e) = (bms(y, h), ems(y, h));
    if b + e == 0.0 {
        return Ok(None);
    }
    Ok(Some(((b - e) / (b + e)).clamp(-1.0, 1.0)))
}

pub fn mae(y: &[f64], h: &[f64]) -> Result<f64> {
    check_pair(y, h, 1)?;
    Ok(y.iter().zip(h).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Frame,
    Sequence,
}

/// How per-series metrics are combined across test sequences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Metric per series, then the unweighted mean of defined values.
    #[default]
    PerSequence,
    /// One metric over all series concatenated.
    Pooled,
}

/// Ground truth and prediction for one test sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPair {
    pub subject: u32,
    pub sequence: u32,
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub subject: u32,
    pub sequence: u32,
    pub n: usize,
    pub pcc: Option<f64>,
    pub icc: Option<f64>,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub level: Level,
    pub aggregation: Aggregation,
    pub pcc: Option<f64>,
    pub icc: Option<f64>,
    pub mae: f64,
    pub n_series: usize,
    pub n_points: usize,
    /// Series whose PCC (or ICC) was undefined and left out of the mean.
    pub missing_pcc: usize,
    pub missing_icc: usize,
    pub per_sequence: Vec<SeriesMetrics>,
}

fn series_metrics(p: &SeriesPair) -> Result<SeriesMetrics> {
    Ok(SeriesMetrics {
        subject: p.subject,
        sequence: p.sequence,
        n: p.truth.len(),
        pcc: pcc(&p.truth, &p.predicted)?,
        icc: icc31(&p.truth, &p.predicted)?,
        mae: mae(&p.truth, &p.predicted)?,
    })
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut count, mut missing) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                count += 1;
            }
            None => missing += 1,
        }
    }
    ((count > 0).then(|| sum / count as f64), missing)
}

/// Combines per-series metrics into one report.
pub fn evaluate(level: Level, pairs: &[SeriesPair], aggregation: Aggregation) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let per_sequence = pairs.iter().map(series_metrics).collect::<Result<Vec<_>>>()?;
    let n_points = pairs.iter().map(|p| p.truth.len()).sum();
    let (pcc_v, icc_v, mae_v, missing_pcc, missing_icc) = match aggregation {
        Aggregation::PerSequence => {
            let (p, mp) = mean_defined(per_sequence.iter().map(|m| m.pcc));
            let (i, mi) = mean_defined(per_sequence.iter().map(|m| m.icc));
            let m = per_sequence.iter().map(|m| m.mae).sum::<f64>() / per_sequence.len() as f64;
            (p, i, m, mp, mi)
        }
        Aggregation::Pooled => {
            let truth: Vec<f64> = pairs.iter().flat_map(|p| p.truth.iter().copied()).collect();
            let pred: Vec<f64> = pairs.iter().flat_map(|p| p.predicted.iter().copied()).collect();
            let p = pcc(&truth, &pred)?;
            let i = icc31(&truth, &pred)?;
            (p, i, mae(&truth, &pred)?, p.is_none() as usize, i.is_none() as usize)
        }
    };
    Ok(MetricsReport {
        level,
        aggregation,
        pcc: pcc_v,
        icc: icc_v,
        mae: mae_v,
        n_series: pairs.len(),
        n_points,
        missing_pcc,
        missing_icc,
        per_sequence,
    })
}
