//! The adaptation model: a shared feature extractor feeding a source
//! regression head, a target ordinal softmax head, and a domain
//! discriminator that sits behind a gradient-reversal node.
//!
//! Frames are processed independently by dense layers; temporal structure
//! only enters through bagging and pooling.
//!
//! # Checkpoint format
//!
//! Plain UTF-8 text, one item per line:
//!
//! ```text
//! wsdaor-checkpoint 1
//! config {"input_dim":12,"feature_dim":16,...}
//! tensor extractor.0.weight 12 32
//! <12·32 space-separated values>
//! tensor extractor.0.bias 32
//! <32 values>
//! ...
//! end
//! ```
//!
//! Values are written in Rust's shortest round-trip notation, so loading a
//! checkpoint reproduces every parameter bit for bit. Tensors appear in the
//! fixed order extractor, source, target, domain; layer by layer, weight
//! before bias.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, NodeId, Tensor};
use crate::error::{invalid, Error, Result};
use crate::ordinal::DEFAULT_LEVELS;

const CHECKPOINT_MAGIC: &str = "wsdaor-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub feature_dim: usize,
    /// Hidden widths of the extractor before its final `feature_dim` layer.
    pub extractor_hidden: Vec<usize>,
    pub source_hidden: Vec<usize>,
    pub target_hidden: Vec<usize>,
    pub domain_hidden: Vec<usize>,
    pub levels: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: 12,
            feature_dim: 16,
            extractor_hidden: vec![32],
            source_hidden: vec![],
            target_hidden: vec![],
            domain_hidden: vec![8],
            levels: DEFAULT_LEVELS,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [self.input_dim, self.feature_dim]
            .into_iter()
            .chain(self.extractor_hidden.iter().copied())
            .chain(self.source_hidden.iter().copied())
            .chain(self.target_hidden.iter().copied())
            .chain(self.domain_hidden.iter().copied());
        for w in widths {
            if w == 0 {
                return Err(invalid("network widths must be ≥ 1"));
            }
        }
        if self.levels < 2 {
            return Err(invalid(format!("need ≥ 2 ordinal levels, got {}", self.levels)));
        }
        Ok(())
    }

    pub fn check_input_dim(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim {
            return Err(Error::Incompatible(format!(
                "network expects {} input features, data has {dim}",
                self.input_dim
            )));
        }
        Ok(())
    }

    fn stack(input: usize, hidden: &[usize], output: usize) -> Vec<(usize, usize)> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Layer {
    fn xavier(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = xavier_bound(fan_in, fan_out);
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-a..=a))
            .collect();
        Self {
            weight: Tensor::matrix(fan_in, fan_out, data).expect("positive dims"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }
}

/// Half-width of the uniform initialization range, `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Extractor,
    Source,
    Target,
    Domain,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::Extractor,
        Component::Source,
        Component::Target,
        Component::Domain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Extractor => "extractor",
            Component::Source => "source",
            Component::Target => "target",
            Component::Domain => "domain",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    pub extractor: Vec<Layer>,
    pub source: Vec<Layer>,
    pub target: Vec<Layer>,
    pub domain: Vec<Layer>,
}

/// Draws every weight uniformly in `[−a, a]`, `a = sqrt(6/(fan_in+fan_out))`,
/// with zero biases. Deterministic in `cfg.seed`.
pub fn init_network(cfg: &NetworkConfig) -> Result<NetworkParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut build = |input, hidden: &[usize], output| -> Vec<Layer> {
        NetworkConfig::stack(input, hidden, output)
            .into_iter()
            .map(|(i, o)| Layer::xavier(i, o, &mut rng))
            .collect()
    };
    let extractor = build(cfg.input_dim, &cfg.extractor_hidden, cfg.feature_dim);
    let source = build(cfg.feature_dim, &cfg.source_hidden, 1);
    let target = build(cfg.feature_dim, &cfg.target_hidden, cfg.levels);
    let domain = build(cfg.feature_dim, &cfg.domain_hidden, 1);
    Ok(NetworkParams {
        config: cfg.clone(),
        extractor,
        source,
        target,
        domain,
    })
}

impl NetworkParams {
    pub fn component(&self, c: Component) -> &[Layer] {
        match c {
            Component::Extractor => &self.extractor,
            Component::Source => &self.source,
            Component::Target => &self.target,
            Component::Domain => &self.domain,
        }
    }

    fn component_mut(&mut self, c: Component) -> &mut Vec<Layer> {
        match c {
            Component::Extractor => &mut self.extractor,
            Component::Source => &mut self.source,
            Component::Target => &mut self.target,
            Component::Domain => &mut self.domain,
        }
    }

    /// `(name, tensor)` pairs in checkpoint order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for c in Component::ALL {
            for (i, layer) in self.component(c).iter().enumerate() {
                out.push((format!("{}.{i}.weight", c.name()), &layer.weight));
                out.push((format!("{}.{i}.bias", c.name()), &layer.bias));
            }
        }
        out
    }

    /// Mutable tensors in the same order as [`NetworkParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        let NetworkParams {
            extractor,
            source,
            target,
            domain,
            ..
        } = self;
        for layers in [extractor, source, target, domain] {
            for layer in layers.iter_mut() {
                out.push(&mut layer.weight);
                out.push(&mut layer.bias);
            }
        }
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Places every parameter on `g` as a leaf.
    pub fn bind(&self, g: &mut Graph) -> BoundNetwork {
        let mut bind_layers = |layers: &[Layer]| -> Vec<(NodeId, NodeId)> {
            layers
                .iter()
                .map(|l| (g.leaf(l.weight.clone()), g.leaf(l.bias.clone())))
                .collect()
        };
        BoundNetwork {
            extractor: bind_layers(&self.extractor),
            source: bind_layers(&self.source),
            target: bind_layers(&self.target),
            domain: bind_layers(&self.domain),
            input_dim: self.config.input_dim,
        }
    }

    fn check_frames(&self, frames: &Tensor) -> Result<()> {
        if frames.shape().len() != 2 || frames.cols() != self.config.input_dim {
            return Err(Error::ShapeMismatch {
                op: "network input",
                left: frames.shape().to_vec(),
                right: vec![frames.rows(), self.config.input_dim],
            });
        }
        Ok(())
    }

    /// Per-frame regression output, `[batch × 1]`.
    pub fn forward_source(&self, frames: &Tensor) -> Result<Tensor> {
        self.check_frames(frames)?;
        let mut g = Graph::new();
        let net = self.bind(&mut g);
        let x = g.leaf(frames.clone());
        let f = net.features(&mut g, x)?;
        let y = net.source_head(&mut g, f)?;
        Ok(g.value(y).clone())
    }

    /// Per-frame softmax over ordinal levels, `[batch × K]`.
    pub fn forward_target(&self, frames: &Tensor) -> Result<Tensor> {
        self.check_frames(frames)?;
        let mut g = Graph::new();
        let net = self.bind(&mut g);
        let x = g.leaf(frames.clone());
        let f = net.features(&mut g, x)?;
        let y = net.target_head(&mut g, f)?;
        Ok(g.value(y).clone())
    }

    /// Per-frame probability of the target domain, `[batch × 1]`.
    pub fn forward_domain(&self, frames: &Tensor, lambda: f64) -> Result<Tensor> {
        self.check_frames(frames)?;
        let mut g = Graph::new();
        let net = self.bind(&mut g);
        let x = g.leaf(frames.clone());
        let f = net.features(&mut g, x)?;
        let y = net.domain_head(&mut g, f, lambda)?;
        Ok(g.value(y).clone())
    }

    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        let config = serde_json::to_string(&self.config).expect("config serializes");
        writeln!(out, "config {config}").unwrap();
        for (name, t) in self.named_tensors() {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            writeln!(out, "tensor {name} {}", dims.join(" ")).unwrap();
            let values: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", values.join(" ")).unwrap();
        }
        out.push_str("end\n");
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        match header.split_once(' ') {
            Some((CHECKPOINT_MAGIC, v)) if v == CHECKPOINT_VERSION.to_string() => {}
            _ => return Err(bad(format!("unrecognized header {header:?}"))),
        }
        let config_line = lines.next().ok_or_else(|| bad("missing config".into()))?;
        let config_json = config_line
            .strip_prefix("config ")
            .ok_or_else(|| bad("missing config line".into()))?;
        let config: NetworkConfig = serde_json::from_str(config_json)
            .map_err(|e| bad(format!("config: {e}")))?;
        let mut params = init_network(&config)?;
        let expected: Vec<(String, Vec<usize>)> = params
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        let mut loaded = Vec::with_capacity(expected.len());
        for (name, shape) in &expected {
            let head = lines
                .next()
                .ok_or_else(|| bad(format!("missing tensor {name}")))?;
            let mut parts = head.split_whitespace();
            if parts.next() != Some("tensor") || parts.next() != Some(name.as_str()) {
                return Err(bad(format!("expected tensor {name}, found {head:?}")));
            }
            let dims = parts
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("{name}: bad dimension: {e}")))?;
            if &dims != shape {
                return Err(Error::Incompatible(format!(
                    "{name}: checkpoint shape {dims:?} does not match config shape {shape:?}"
                )));
            }
            let row = lines
                .next()
                .ok_or_else(|| bad(format!("missing values for {name}")))?;
            let values = row
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("{name}: bad value: {e}")))?;
            loaded.push(Tensor::new(dims, values).map_err(|e| bad(format!("{name}: {e}")))?);
        }
        if lines.next() != Some("end") {
            return Err(bad("missing end marker".into()));
        }
        for (slot, t) in params.tensors_mut().into_iter().zip(loaded) {
            *slot = t;
        }
        Ok(params)
    }

    /// Fails when a dataset's feature width differs from the network input.
    pub fn check_input_dim(&self, dim: usize) -> Result<()> {
        self.config.check_input_dim(dim)
    }

    /// Sets every weight and bias in one component to zero.
    pub fn zero_component(&mut self, c: Component) {
        for layer in self.component_mut(c) {
            layer.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
            layer.bias.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Parameter leaves of one network on one graph.
#[derive(Clone, Debug)]
pub struct BoundNetwork {
    pub extractor: Vec<(NodeId, NodeId)>,
    pub source: Vec<(NodeId, NodeId)>,
    pub target: Vec<(NodeId, NodeId)>,
    pub domain: Vec<(NodeId, NodeId)>,
    input_dim: usize,
}

impl BoundNetwork {
    /// Dense layers with ReLU between them; `relu_last` also rectifies the output.
    fn stack(
        g: &mut Graph,
        layers: &[(NodeId, NodeId)],
        mut x: NodeId,
        relu_last: bool,
    ) -> Result<NodeId> {
        for (i, &(w, b)) in layers.iter().enumerate() {
            x = g.affine(x, w, b)?;
            if relu_last || i + 1 < layers.len() {
                x = g.relu(x);
            }
        }
        Ok(x)
    }

    pub fn features(&self, g: &mut Graph, frames: NodeId) -> Result<NodeId> {
        if g.value(frames).cols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                op: "network input",
                left: g.value(frames).shape().to_vec(),
                right: vec![g.value(frames).rows(), self.input_dim],
            });
        }
        Self::stack(g, &self.extractor, frames, true)
    }

    pub fn source_head(&self, g: &mut Graph, features: NodeId) -> Result<NodeId> {
        Self::stack(g, &self.source, features, false)
    }

    pub fn target_head(&self, g: &mut Graph, features: NodeId) -> Result<NodeId> {
        let logits = Self::stack(g, &self.target, features, false)?;
        g.softmax_rows(logits)
    }

    /// Discriminator output; features pass through a gradient-reversal
    /// node scaled by `lambda` first.
    pub fn domain_head(&self, g: &mut Graph, features: NodeId, lambda: f64) -> Result<NodeId> {
        let reversed = g.grl(features, lambda);
        let logit = Self::stack(g, &self.domain, reversed, false)?;
        Ok(g.sigmoid(logit))
    }

    /// Parameter leaves in [`NetworkParams::tensors_mut`] order.
    pub fn param_nodes(&self) -> Vec<NodeId> {
        [&self.extractor, &self.source, &self.target, &self.domain]
            .into_iter()
            .flat_map(|layers| layers.iter().flat_map(|&(w, b)| [w, b]))
            .collect()
    }
}
