//! Adversarial training: SGD with momentum and weight decay over
//! `L = L_S + L_T − λ·L_d`, where the minus sign is realized by the
//! gradient-reversal node in front of the discriminator.
//!
//! Each step draws a source batch (frame-labelled bags) and a weak batch
//! (bags with only a weak ordinal label). Weak bags are drawn with
//! probability inversely proportional to the size of their label class.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, NodeId, Tensor};
use crate::error::{invalid, Error, Result};
use crate::losses::{
    domain_loss_node, lambda_schedule, source_loss_node, target_loss_node, LossReport,
};
use crate::metrics::{evaluate, Aggregation, Level};
use crate::milbags::{Bag, LabeledBag, PoolingMode, Sequence};
use crate::network::NetworkParams;
use crate::ordinal::LabelEncoding;
use crate::predict::frame_pairs;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub source_batch: usize,
    pub target_batch: usize,
    /// First epoch at which the learning rate is annealed.
    pub anneal_start: usize,
    pub anneal_every: usize,
    pub anneal_factor: f64,
    /// Steepness of the λ warm-up.
    pub gamma: f64,
    pub patience: usize,
    /// Steps per epoch; when zero, one pass over the weak bags.
    pub steps_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 1e-5,
            epochs: 60,
            source_batch: 4,
            target_batch: 2,
            anneal_start: 20,
            anneal_every: 5,
            anneal_factor: 0.5,
            gamma: 10.0,
            patience: 10,
            steps_per_epoch: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("anneal_factor", self.anneal_factor),
            ("gamma", self.gamma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("train.{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return Err(invalid("train.momentum must be in [0, 1) and weight_decay ≥ 0"));
        }
        if self.epochs == 0 || self.source_batch == 0 || self.target_batch == 0 {
            return Err(invalid("train.epochs and batch sizes must be ≥ 1"));
        }
        if self.patience == 0 || self.anneal_every == 0 {
            return Err(invalid("train.patience and train.anneal_every must be ≥ 1"));
        }
        Ok(())
    }

    /// Learning rate for a 0-based epoch: the base rate times
    /// `anneal_factor` once per `anneal_every` epochs past `anneal_start`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.anneal_start {
            return self.lr;
        }
        let decays = ((epoch - self.anneal_start) / self.anneal_every) as i32;
        self.lr * self.anneal_factor.powi(decays)
    }
}

/// Which loss terms a step optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    /// Source regression term on frame-labelled bags.
    pub regression: bool,
    /// Weak cross-entropy on pooled predictions of weak bags.
    pub weak: bool,
    /// Domain discriminator term behind the gradient-reversal node.
    pub domain: bool,
    pub pooling: PoolingMode,
    pub encoding: LabelEncoding,
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            regression: true,
            weak: true,
            domain: true,
            pooling: PoolingMode::Adaptive,
            encoding: LabelEncoding::default(),
        }
    }
}

/// SGD with momentum; weight decay enters as `wd · θ` added to the gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    buffers: Vec<Tensor>,
}

impl Sgd {
    pub fn new(params: &NetworkParams, momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            buffers: params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn buffers(&self) -> &[Tensor] {
        &self.buffers
    }

    /// `v ← μ·v + (g + wd·θ)`, `θ ← θ − lr·v`.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &[Tensor], lr: f64) {
        for ((theta, v), g) in params.tensors_mut().into_iter().zip(&mut self.buffers).zip(grads) {
            let (theta, v, g) = (theta.data_mut(), v.data_mut(), g.data());
            for i in 0..theta.len() {
                v[i] = self.momentum * v[i] + g[i] + self.weight_decay * theta[i];
                theta[i] -= lr * v[i];
            }
        }
    }
}

/// Endless stream of bag indices with class-balanced probabilities.
#[derive(Clone, Debug)]
pub struct WeightedSampler {
    dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl WeightedSampler {
    /// Bag `i` is drawn with probability ∝ `1 / |{j : class(j) = class(i)}|`.
    pub fn new(classes: &[usize], seed: u64) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Empty("weighted sampler"));
        }
        let max = *classes.iter().max().expect("non-empty");
        let mut counts = vec![0usize; max + 1];
        for &c in classes {
            counts[c] += 1;
        }
        let weights: Vec<f64> = classes.iter().map(|&c| 1.0 / counts[c] as f64).collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?;
        Ok(Self {
            dist,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn for_bags(bags: &[&Bag], seed: u64) -> Result<Self> {
        let classes: Vec<usize> = bags.iter().map(|b| b.weak_label.value()).collect();
        Self::new(&classes, seed)
    }
}

impl Iterator for WeightedSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.dist.sample(&mut self.rng))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: NetworkParams,
    pub optimizer: Sgd,
    pub epoch: usize,
    pub best_score: Option<f64>,
    pub epochs_since_improvement: usize,
    pub history: Vec<EpochRecord>,
    /// Optimizer steps taken so far.
    pub steps: usize,
}

impl TrainState {
    pub fn new(params: NetworkParams, config: &TrainConfig) -> Self {
        let optimizer = Sgd::new(&params, config.momentum, config.weight_decay);
        Self {
            params,
            optimizer,
            epoch: 0,
            best_score: None,
            epochs_since_improvement: 0,
            history: Vec::new(),
            steps: 0,
        }
    }
}

/// Extra information from one step beyond the loss values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    /// Weak bags with a non-zero label whose pooled frames were all
    /// predicted at level 0.
    pub zero_level_pools: usize,
}

fn stack_frames<'a>(bags: impl Iterator<Item = &'a Bag>) -> Result<Tensor> {
    let rows: Vec<&[f64]> = bags.flat_map(|b| b.frames.iter().map(|f| f.as_slice())).collect();
    Tensor::from_rows(&rows)
}

fn non_finite(state: &TrainState, report: &LossReport) -> Error {
    let norms: Vec<String> = state
        .params
        .named_tensors()
        .into_iter()
        .map(|(n, t)| format!("{n}={:.3e}", t.sq_norm().sqrt()))
        .collect();
    Error::NonFiniteLoss {
        epoch: state.epoch,
        step: state.steps,
        detail: format!("losses {report:?}; parameter norms [{}]", norms.join(", ")),
    }
}

/// One SGD-with-momentum update on the active loss terms.
///
/// The discriminator learns to separate `source` frames (label 0) from
/// weak-bag frames (labelled by their bag's domain); the extractor
/// receives that gradient reversed and scaled by `lambda`.
pub fn train_step(
    state: &mut TrainState,
    source: &[&LabeledBag],
    weak: &[&Bag],
    lambda: f64,
    lr: f64,
    objective: &Objective,
) -> Result<(LossReport, StepStats)> {
    let use_source = objective.regression || objective.domain;
    let use_weak = objective.weak || objective.domain;
    if (use_source && source.is_empty() && objective.regression) || (objective.weak && weak.is_empty()) {
        return Err(Error::Empty("training batch"));
    }
    let mut g = Graph::new();
    let net = state.params.bind(&mut g);
    let mut terms: Vec<NodeId> = Vec::new();
    let (mut ls, mut lt, mut ld) = (0.0, 0.0, 0.0);
    let mut stats = StepStats::default();
    let domain_sequences = if objective.domain {
        source.len() + weak.len()
    } else {
        0
    };
    let mut domain_terms: Vec<NodeId> = Vec::new();

    if use_source && !source.is_empty() {
        let x = g.leaf(stack_frames(source.iter().map(|b| &b.bag))?);
        let feats = net.features(&mut g, x)?;
        if objective.regression {
            let labels: Vec<f64> = source.iter().flat_map(|b| b.frame_labels.iter().copied()).collect();
            let labels = Tensor::matrix(labels.len(), 1, labels)?;
            let pred = net.source_head(&mut g, feats)?;
            let loss = source_loss_node(&mut g, pred, &labels, source.len())?;
            ls = g.value(loss).item();
            terms.push(loss);
        }
        if objective.domain {
            let d = net.domain_head(&mut g, feats, lambda)?;
            let zeros = Tensor::zeros(g.value(d).shape());
            let frames: Vec<usize> = source.iter().map(|b| b.bag.frames.len()).collect();
            domain_terms.push(domain_loss_node(&mut g, d, &zeros, &frames, domain_sequences)?);
        }
    }

    if use_weak && !weak.is_empty() {
        let x = g.leaf(stack_frames(weak.iter().copied())?);
        let feats = net.features(&mut g, x)?;
        if objective.weak {
            let probs = net.target_head(&mut g, feats)?;
            let mut groups = Vec::with_capacity(weak.len());
            let mut codes = Vec::with_capacity(weak.len());
            let mut start = 0;
            for bag in weak {
                let n = bag.frames.len();
                let rows: Vec<&[f64]> = (start..start + n).map(|r| g.value(probs).row(r)).collect();
                let selected = objective.pooling.select(&rows)?;
                if objective.pooling == PoolingMode::Adaptive
                    && bag.weak_label.value() > 0
                    && crate::ordinal::argmax(rows[selected[0]]) == 0
                {
                    stats.zero_level_pools += 1;
                }
                groups.push(selected.into_iter().map(|i| start + i).collect());
                codes.push(objective.encoding.encode(bag.weak_label)?.values);
                start += n;
            }
            let pooled = g.gather_mean(probs, groups)?;
            let loss = target_loss_node(&mut g, pooled, &Tensor::from_rows(&codes)?)?;
            lt = g.value(loss).item();
            terms.push(loss);
        }
        if objective.domain {
            let d = net.domain_head(&mut g, feats, lambda)?;
            let labels: Vec<f64> = weak
                .iter()
                .flat_map(|b| std::iter::repeat_n(b.origin.domain.label(), b.frames.len()))
                .collect();
            let labels = Tensor::matrix(labels.len(), 1, labels)?;
            let frames: Vec<usize> = weak.iter().map(|b| b.frames.len()).collect();
            domain_terms.push(domain_loss_node(&mut g, d, &labels, &frames, domain_sequences)?);
        }
    }

    if !domain_terms.is_empty() {
        let mut acc = domain_terms[0];
        for &t in &domain_terms[1..] {
            acc = g.add(acc, t)?;
        }
        ld = g.value(acc).item();
        terms.push(acc);
    }
    let Some(&first) = terms.first() else {
        return Err(Error::Empty("active loss terms"));
    };
    let mut root = first;
    for &t in &terms[1..] {
        root = g.add(root, t)?;
    }

    let report = LossReport::new(ls, lt, ld, if objective.domain { lambda } else { 0.0 });
    if !report.is_finite() || !g.value(root).is_finite() {
        return Err(non_finite(state, &report));
    }
    g.backward(root)?;
    let grads: Vec<Tensor> = net.param_nodes().into_iter().map(|n| g.grad(n).clone()).collect();
    state.optimizer.step(&mut state.params, &grads, lr);
    state.steps += 1;
    if !state.params.is_finite() {
        return Err(non_finite(state, &report));
    }
    Ok((report, stats))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub lambda: f64,
    pub steps: usize,
    /// Mean of the per-step loss reports.
    pub loss: LossReport,
    pub validation_pcc: Option<f64>,
    pub zero_level_pools: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub best: NetworkParams,
    pub best_epoch: usize,
    pub best_score: Option<f64>,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Frame-level PCC of the ordinal head on held-out sequences.
pub fn validation_score(params: &NetworkParams, validation: &[Sequence]) -> Result<Option<f64>> {
    let pairs = frame_pairs(params, validation)?;
    Ok(evaluate(Level::Frame, &pairs, Aggregation::Pooled)?.pcc)
}

/// Trains from `init` until the epoch budget or the patience on
/// validation frame-level PCC runs out, and returns the best parameters.
pub fn fit(
    config: &TrainConfig,
    objective: &Objective,
    init: NetworkParams,
    source: &[LabeledBag],
    weak: &[Bag],
    validation: &[Sequence],
) -> Result<FitOutcome> {
    config.validate()?;
    if validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let source_refs: Vec<&LabeledBag> = source.iter().collect();
    let weak_refs: Vec<&Bag> = weak.iter().collect();
    let needs_source = objective.regression || objective.domain;
    let needs_weak = objective.weak || objective.domain;
    if needs_source && objective.regression && source.is_empty() {
        return Err(Error::Empty("source bags"));
    }
    if needs_weak && objective.weak && weak.is_empty() {
        return Err(Error::Empty("weak bags"));
    }

    let mut weak_sampler = if needs_weak && !weak.is_empty() {
        Some(WeightedSampler::for_bags(&weak_refs, config.seed)?)
    } else {
        None
    };
    let mut source_rng = ChaCha8Rng::seed_from_u64(config.seed);
    source_rng.set_stream(1);

    let steps = if config.steps_per_epoch > 0 {
        config.steps_per_epoch
    } else if !weak.is_empty() && needs_weak {
        weak.len().div_ceil(config.target_batch)
    } else {
        source.len().div_ceil(config.source_batch)
    };

    let mut state = TrainState::new(init, config);
    let mut best = state.params.clone();
    let mut best_epoch = 0;
    let mut stopped_early = false;

    for epoch in 0..config.epochs {
        state.epoch = epoch;
        let lr = config.lr_at(epoch);
        let lambda = if objective.domain {
            lambda_schedule(epoch as f64 / config.epochs as f64, config.gamma)
        } else {
            0.0
        };
        let mut sum = LossReport::default();
        let mut zero_pools = 0;
        for _ in 0..steps {
            let src: Vec<&LabeledBag> = if needs_source && !source.is_empty() {
                (0..config.source_batch)
                    .map(|_| source_refs[source_rng.random_range(0..source_refs.len())])
                    .collect()
            } else {
                Vec::new()
            };
            let wk: Vec<&Bag> = match weak_sampler.as_mut() {
                Some(s) => s.take(config.target_batch).map(|i| weak_refs[i]).collect(),
                None => Vec::new(),
            };
            let (report, stats) = train_step(&mut state, &src, &wk, lambda, lr, objective)?;
            sum.source += report.source;
            sum.target += report.target;
            sum.domain += report.domain;
            zero_pools += stats.zero_level_pools;
        }
        let n = steps as f64;
        let mean = LossReport::new(sum.source / n, sum.target / n, sum.domain / n, lambda);
        let score = validation_score(&state.params, validation)?;
        state.history.push(EpochRecord {
            epoch,
            lr,
            lambda,
            steps,
            loss: mean,
            validation_pcc: score,
            zero_level_pools: zero_pools,
        });

        let improved = match (score, state.best_score) {
            (Some(s), Some(b)) => s > b,
            (Some(_), None) => true,
            (None, _) => epoch == 0,
        };
        if improved {
            state.best_score = score;
            state.epochs_since_improvement = 0;
            best = state.params.clone();
            best_epoch = epoch;
        } else {
            state.epochs_since_improvement += 1;
            if state.epochs_since_improvement >= config.patience {
                stopped_early = epoch + 1 < config.epochs;
                break;
            }
        }
    }

    Ok(FitOutcome {
        best,
        best_epoch,
        best_score: state.best_score,
        history: state.history,
        stopped_early,
    })
}
