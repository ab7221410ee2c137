//! Running a trained network over sequences to get predicted levels.

use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::Result;
use crate::metrics::SeriesPair;
use crate::milbags::{make_bags, PoolingMode, Sequence};
use crate::network::NetworkParams;
use crate::ordinal::{argmax, OrdinalLevel};

/// Argmax level of the ordinal head for every frame.
pub fn predict_levels(params: &NetworkParams, frames: &[Vec<f64>]) -> Result<Vec<usize>> {
    let probs = params.forward_target(&Tensor::from_rows(frames)?)?;
    Ok(probs.row_iter().map(argmax).collect())
}

/// Per-sequence frame-level predicted levels against ground-truth levels.
pub fn frame_pairs(params: &NetworkParams, sequences: &[Sequence]) -> Result<Vec<SeriesPair>> {
    sequences
        .iter()
        .map(|seq| {
            let predicted = predict_levels(params, seq.frames())?;
            Ok(SeriesPair {
                subject: seq.subject,
                sequence: seq.index,
                truth: seq.frame_labels().to_vec(),
                predicted: predicted.into_iter().map(|l| l as f64).collect(),
            })
        })
        .collect()
}

/// Per-sequence bag-level predictions (argmax of the pooled vector)
/// against weak bag labels. Sequences shorter than `window` are skipped.
pub fn bag_pairs(
    params: &NetworkParams,
    sequences: &[Sequence],
    window: usize,
    stride: usize,
    pooling: PoolingMode,
    quantize: impl Fn(f64) -> Result<OrdinalLevel> + Copy,
) -> Result<Vec<SeriesPair>> {
    let mut out = Vec::new();
    for seq in sequences {
        let bags = make_bags(seq, window, stride, quantize)?;
        if bags.is_empty() {
            continue;
        }
        let probs = params.forward_target(&Tensor::from_rows(seq.frames())?)?;
        let rows: Vec<&[f64]> = probs.row_iter().collect();
        let mut truth = Vec::with_capacity(bags.len());
        let mut predicted = Vec::with_capacity(bags.len());
        for bag in &bags {
            let o = bag.origin.offset;
            let pooled = pooling.pool(&rows[o..o + window])?;
            truth.push(bag.weak_label.value() as f64);
            predicted.push(argmax(&pooled) as f64);
        }
        out.push(SeriesPair {
            subject: seq.subject,
            sequence: seq.index,
            truth,
            predicted,
        });
    }
    Ok(out)
}

/// One row of a frame-level localization trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub subject: u32,
    pub sequence: u32,
    pub frame: usize,
    pub truth: f64,
    pub predicted: f64,
}

pub fn trace_rows(pairs: &[SeriesPair]) -> Vec<TraceRow> {
    pairs
        .iter()
        .flat_map(|p| {
            p.truth
                .iter()
                .zip(&p.predicted)
                .enumerate()
                .map(|(frame, (&truth, &predicted))| TraceRow {
                    subject: p.subject,
                    sequence: p.sequence,
                    frame,
                    truth,
                    predicted,
                })
        })
        .collect()
}
