//! Training scenarios, leave-one-subject-out evaluation and ablation cells.
//!
//! Every scenario is scored through the ordinal head: per-frame argmax
//! against the hidden target frame levels.
//!
//! | mode          | source regression | weak bags          | discriminator |
//! |---------------|-------------------|--------------------|---------------|
//! | `none`        | yes               | target             | no            |
//! | `source-only` | yes               | source             | no            |
//! | `target-only` | no                | target             | no            |
//! | `joint-no-da` | yes               | source ∪ target    | no            |
//! | `adversarial` | yes               | target             | yes           |
//! | `transfer`    | `source-only` for the first half of the epochs, then `target-only` |||

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::{evaluate, Aggregation, Level, MetricsReport};
use crate::milbags::{make_bags, make_labeled_bags, Bag, LabeledBag, PoolingMode, Sequence};
use crate::network::{init_network, NetworkConfig, NetworkParams};
use crate::ordinal::LabelEncoding;
use crate::predict::{bag_pairs, frame_pairs};
use crate::synth::{source_quantizer, target_quantizer, Dataset};
use crate::trainer::{fit, EpochRecord, Objective, TrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaMode {
    None,
    SourceOnly,
    TargetOnly,
    JointNoDa,
    #[default]
    Adversarial,
    Transfer,
}

impl DaMode {
    pub const ALL: [DaMode; 6] = [
        DaMode::None,
        DaMode::SourceOnly,
        DaMode::TargetOnly,
        DaMode::JointNoDa,
        DaMode::Adversarial,
        DaMode::Transfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DaMode::None => "none",
            DaMode::SourceOnly => "source-only",
            DaMode::TargetOnly => "target-only",
            DaMode::JointNoDa => "joint-no-da",
            DaMode::Adversarial => "adversarial",
            DaMode::Transfer => "transfer",
        }
    }
}

/// How bags are cut, pooled and encoded, and which scenario to train.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub da_mode: DaMode,
    pub pooling: PoolingMode,
    pub encoding: LabelEncoding,
    pub window: usize,
    pub stride: usize,
    pub aggregation: Aggregation,
    /// Run only the first `max_folds` folds; zero runs all of them.
    pub max_folds: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            da_mode: DaMode::Adversarial,
            pooling: PoolingMode::Adaptive,
            encoding: LabelEncoding::default(),
            window: 64,
            stride: 8,
            aggregation: Aggregation::PerSequence,
            max_folds: 0,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.stride == 0 {
            return Err(invalid("experiment.window and experiment.stride must be ≥ 1"));
        }
        self.encoding.validate()
    }
}

/// One leave-one-subject-out fold over target subjects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub test: u32,
    pub validation: u32,
    pub train: Vec<u32>,
}

/// Fold `i` tests on subject `i` and validates on the next subject
/// (cyclically). The validation subject is kept out of training unless
/// it is the only other subject.
pub fn loso_folds(subjects: &[u32]) -> Result<Vec<Fold>> {
    if subjects.len() < 2 {
        return Err(invalid(format!(
            "leave-one-subject-out needs at least 2 target subjects, got {}",
            subjects.len()
        )));
    }
    let n = subjects.len();
    Ok((0..n)
        .map(|i| {
            let test = subjects[i];
            let validation = subjects[(i + 1) % n];
            let train = subjects
                .iter()
                .copied()
                .filter(|&s| s != test && (n == 2 || s != validation))
                .collect();
            Fold {
                index: i,
                test,
                validation,
                train,
            }
        })
        .collect())
}

/// Seed for fold `fold` derived from a base seed.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// All bags of a dataset, cut once and filtered per fold.
#[derive(Clone, Debug)]
pub struct BagSet {
    pub source: Vec<LabeledBag>,
    pub target: Vec<Bag>,
}

impl BagSet {
    pub fn new(dataset: &Dataset, protocol: &Protocol, levels: usize) -> Result<Self> {
        let mut source = Vec::new();
        for seq in &dataset.source {
            source.extend(make_labeled_bags(
                seq,
                protocol.window,
                protocol.stride,
                source_quantizer(levels),
            )?);
        }
        let mut target = Vec::new();
        for seq in &dataset.target {
            target.extend(make_bags(
                seq,
                protocol.window,
                protocol.stride,
                target_quantizer(levels),
            )?);
        }
        Ok(Self { source, target })
    }

    pub fn target_for(&self, subjects: &[u32]) -> Vec<Bag> {
        self.target
            .iter()
            .filter(|b| subjects.contains(&b.origin.subject))
            .cloned()
            .collect()
    }
}

/// Result of training one model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

fn objective(protocol: &Protocol, regression: bool, weak: bool, domain: bool) -> Objective {
    Objective {
        regression,
        weak,
        domain,
        pooling: protocol.pooling,
        encoding: protocol.encoding,
    }
}

/// Trains one model for `protocol.da_mode` from a fresh initialization.
///
/// `target` holds the weak target bags visible to training; their frame
/// levels are never read.
pub fn train_model(
    protocol: &Protocol,
    network: &NetworkConfig,
    train: &TrainConfig,
    source: &[LabeledBag],
    target: &[Bag],
    validation: &[Sequence],
) -> Result<TrainedModel> {
    let init = init_network(network)?;
    let source_weak: Vec<Bag> = source.iter().map(|b| b.bag.clone()).collect();
    let run = |obj: Objective, cfg: &TrainConfig, init, src: &[LabeledBag], weak: &[Bag]| {
        fit(cfg, &obj, init, src, weak, validation)
    };
    let outcome = match protocol.da_mode {
        DaMode::None => run(objective(protocol, true, true, false), train, init, source, target)?,
        DaMode::SourceOnly => run(
            objective(protocol, true, true, false),
            train,
            init,
            source,
            &source_weak,
        )?,
        DaMode::TargetOnly => run(objective(protocol, false, true, false), train, init, &[], target)?,
        DaMode::JointNoDa => {
            let mut weak = source_weak;
            weak.extend_from_slice(target);
            run(objective(protocol, true, true, false), train, init, source, &weak)?
        }
        DaMode::Adversarial => {
            run(objective(protocol, true, true, true), train, init, source, target)?
        }
        DaMode::Transfer => {
            let first = train.epochs.div_ceil(2);
            let pre_cfg = TrainConfig {
                epochs: first,
                ..train.clone()
            };
            let pre = run(
                objective(protocol, true, true, false),
                &pre_cfg,
                init,
                source,
                &source_weak,
            )?;
            if first == train.epochs {
                pre
            } else {
                let fine_cfg = TrainConfig {
                    epochs: train.epochs - first,
                    seed: train.seed.wrapping_add(1),
                    ..train.clone()
                };
                let mut fine = run(
                    objective(protocol, false, true, false),
                    &fine_cfg,
                    pre.best.clone(),
                    &[],
                    target,
                )?;
                for r in &mut fine.history {
                    r.epoch += pre.history.len();
                }
                let mut history = pre.history;
                let offset = history.len();
                history.append(&mut fine.history);
                fine.history = history;
                fine.best_epoch += offset;
                fine
            }
        }
    };
    Ok(TrainedModel {
        params: outcome.best,
        best_epoch: outcome.best_epoch,
        history: outcome.history,
    })
}

/// Frame-level and bag-level metrics of a model on test sequences.
pub fn score(
    params: &NetworkParams,
    sequences: &[Sequence],
    protocol: &Protocol,
) -> Result<(MetricsReport, MetricsReport)> {
    if sequences.is_empty() {
        return Err(Error::Empty("test sequences"));
    }
    let levels = params.config.levels;
    let frame = evaluate(
        Level::Frame,
        &frame_pairs(params, sequences)?,
        protocol.aggregation,
    )?;
    let bags = bag_pairs(
        params,
        sequences,
        protocol.window,
        protocol.stride,
        protocol.pooling,
        target_quantizer(levels),
    )?;
    if bags.is_empty() {
        return Err(invalid(format!(
            "test sequences are shorter than the {}-frame window",
            protocol.window
        )));
    }
    let sequence = evaluate(Level::Sequence, &bags, protocol.aggregation)?;
    Ok((frame, sequence))
}

/// Means of fold metrics; folds with a missing value are left out of
/// that value's mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pcc: Option<f64>,
    pub icc: Option<f64>,
    pub mae: f64,
    pub folds: usize,
    pub missing_pcc: usize,
    pub missing_icc: usize,
}

impl Summary {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Self {
        let reports: Vec<&MetricsReport> = reports.into_iter().collect();
        let mean = |vals: Vec<f64>| {
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let pccs: Vec<f64> = reports.iter().filter_map(|r| r.pcc).collect();
        let iccs: Vec<f64> = reports.iter().filter_map(|r| r.icc).collect();
        let n = reports.len();
        Self {
            missing_pcc: n - pccs.len(),
            missing_icc: n - iccs.len(),
            pcc: mean(pccs),
            icc: mean(iccs),
            mae: if n == 0 {
                0.0
            } else {
                reports.iter().map(|r| r.mae).sum::<f64>() / n as f64
            },
            folds: n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: Fold,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub frame: MetricsReport,
    pub sequence: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub da_mode: DaMode,
    pub folds: Vec<FoldResult>,
    pub frame: Summary,
    pub sequence: Summary,
}

fn subject_sequences(seqs: &[Sequence], subject: u32) -> Vec<Sequence> {
    seqs.iter().filter(|s| s.subject == subject).cloned().collect()
}

/// Leave-one-subject-out over target subjects: each fold trains on all
/// source data plus the weak bags of its training subjects and is scored
/// on the held-out subject.
pub fn loso_evaluate(
    protocol: &Protocol,
    network: &NetworkConfig,
    train: &TrainConfig,
    dataset: &Dataset,
) -> Result<LosoReport> {
    protocol.validate()?;
    network.validate()?;
    if let Some(dim) = dataset.feature_dim() {
        network.check_input_dim(dim)?;
    }
    let bags = BagSet::new(dataset, protocol, network.levels)?;
    let mut folds = loso_folds(&dataset.target_subjects())?;
    if protocol.max_folds > 0 {
        folds.truncate(protocol.max_folds);
    }
    let mut results = Vec::with_capacity(folds.len());
    for fold in folds {
        let target = bags.target_for(&fold.train);
        assert!(target.iter().all(|b| b.origin.subject != fold.test));
        let seed = fold_seed(train.seed, fold.index);
        let model = train_model(
            protocol,
            &NetworkConfig {
                seed,
                ..network.clone()
            },
            &TrainConfig {
                seed,
                ..train.clone()
            },
            &bags.source,
            &target,
            &subject_sequences(&dataset.target, fold.validation),
        )?;
        let (frame, sequence) = score(
            &model.params,
            &subject_sequences(&dataset.target, fold.test),
            protocol,
        )?;
        results.push(FoldResult {
            fold,
            seed,
            best_epoch: model.best_epoch,
            epochs_run: model.history.len(),
            frame,
            sequence,
        });
    }
    Ok(LosoReport {
        da_mode: protocol.da_mode,
        frame: Summary::of(results.iter().map(|r| &r.frame)),
        sequence: Summary::of(results.iter().map(|r| &r.sequence)),
        folds: results,
    })
}

/// Trains one model on every target subject except the last, which is
/// used for early stopping.
pub fn train_single(
    protocol: &Protocol,
    network: &NetworkConfig,
    train: &TrainConfig,
    dataset: &Dataset,
) -> Result<(TrainedModel, Fold)> {
    protocol.validate()?;
    network.validate()?;
    if let Some(dim) = dataset.feature_dim() {
        network.check_input_dim(dim)?;
    }
    let subjects = dataset.target_subjects();
    if subjects.len() < 2 {
        return Err(invalid("training needs at least 2 target subjects"));
    }
    let validation = *subjects.last().expect("len ≥ 2");
    let train_subjects: Vec<u32> = subjects[..subjects.len() - 1].to_vec();
    let bags = BagSet::new(dataset, protocol, network.levels)?;
    let model = train_model(
        protocol,
        network,
        train,
        &bags.source,
        &bags.target_for(&train_subjects),
        &subject_sequences(&dataset.target, validation),
    )?;
    let fold = Fold {
        index: 0,
        test: validation,
        validation,
        train: train_subjects,
    };
    Ok((model, fold))
}

/// A named variant of the base protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub name: String,
    pub protocol: Protocol,
}

fn sigma_of(encoding: LabelEncoding) -> f64 {
    match encoding {
        LabelEncoding::Gaussian { sigma } | LabelEncoding::GaussianNormalized { sigma } => sigma,
        LabelEncoding::OneHot => crate::ordinal::DEFAULT_SIGMA,
    }
}

/// The four pooling × encoding cells: one-hot or Gaussian codes, max or
/// adaptive pooling. Gaussian cells take σ from the base protocol.
pub fn ablation_cells(base: &Protocol) -> Vec<Cell> {
    let gaussian = match base.encoding {
        LabelEncoding::OneHot => LabelEncoding::Gaussian {
            sigma: sigma_of(base.encoding),
        },
        e => e,
    };
    [
        ("baseline", LabelEncoding::OneHot, PoolingMode::Max),
        ("baseline+amilp", LabelEncoding::OneHot, PoolingMode::Adaptive),
        ("baseline+gm", gaussian, PoolingMode::Max),
        ("baseline+gm+amilp", gaussian, PoolingMode::Adaptive),
    ]
    .into_iter()
    .map(|(name, encoding, pooling)| Cell {
        name: name.to_string(),
        protocol: Protocol {
            encoding,
            pooling,
            ..base.clone()
        },
    })
    .collect()
}

/// One cell per training scenario, sharing the base pooling and encoding.
pub fn scenario_cells(base: &Protocol) -> Vec<Cell> {
    DaMode::ALL
        .into_iter()
        .map(|da_mode| Cell {
            name: da_mode.name().to_string(),
            protocol: Protocol {
                da_mode,
                ..base.clone()
            },
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub cell: String,
    pub da_mode: DaMode,
    pub pooling: PoolingMode,
    pub encoding: String,
    pub seed: u64,
    pub frame_pcc: Option<f64>,
    pub frame_icc: Option<f64>,
    pub frame_mae: f64,
    pub sequence_pcc: Option<f64>,
    pub sequence_icc: Option<f64>,
    pub sequence_mae: f64,
}

pub fn encoding_name(encoding: LabelEncoding) -> String {
    match encoding {
        LabelEncoding::OneHot => "onehot".to_string(),
        LabelEncoding::Gaussian { sigma } => format!("gaussian({sigma})"),
        LabelEncoding::GaussianNormalized { sigma } => format!("gaussian-normalized({sigma})"),
    }
}

/// Runs every cell with the same seeds and dataset.
pub fn run_cells(
    cells: &[Cell],
    network: &NetworkConfig,
    train: &TrainConfig,
    dataset: &Dataset,
) -> Result<Vec<AblationRow>> {
    cells
        .iter()
        .map(|cell| {
            let report = loso_evaluate(&cell.protocol, network, train, dataset)?;
            Ok(AblationRow {
                cell: cell.name.clone(),
                da_mode: cell.protocol.da_mode,
                pooling: cell.protocol.pooling,
                encoding: encoding_name(cell.protocol.encoding),
                seed: train.seed,
                frame_pcc: report.frame.pcc,
                frame_icc: report.frame.icc,
                frame_mae: report.frame.mae,
                sequence_pcc: report.sequence.pcc,
                sequence_icc: report.sequence.icc,
                sequence_mae: report.sequence.mae,
            })
        })
        .collect()
}
