//! Source regression, weak target cross-entropy and domain logistic losses,
//! their λ-weighted combination, and the λ warm-up schedule.
//!
//! Each loss exists twice: as a plain function over numbers (used for
//! reporting and as a reference) and as a graph builder used in training.
//! Both normalize by sequence (or bag) count while summing over frames, so
//! the source and domain terms grow with window length.

use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, NodeId, Tensor, LOG_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::ordinal::GaussianCode;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub source: f64,
    pub target: f64,
    pub domain: f64,
    pub lambda: f64,
    pub total: f64,
}

impl LossReport {
    /// `total = source + target − lambda · domain`.
    pub fn new(source: f64, target: f64, domain: f64, lambda: f64) -> Self {
        Self {
            source,
            target,
            domain,
            lambda,
            total: source + target - lambda * domain,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.source, self.target, self.domain, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// `(1/N_s) Σ_sequences Σ_frames (pred − label)²` with `N_s = preds.len()`.
pub fn source_loss<P: AsRef<[f64]>, L: AsRef<[f64]>>(preds: &[P], labels: &[L]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("source_loss"));
    }
    if preds.len() != labels.len() {
        return Err(invalid("source_loss: sequence counts differ"));
    }
    let mut total = 0.0;
    for (p, l) in preds.iter().zip(labels) {
        let (p, l) = (p.as_ref(), l.as_ref());
        if p.len() != l.len() {
            return Err(invalid("source_loss: frame counts differ"));
        }
        total += p.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / preds.len() as f64)
}

/// `−(1/N_T) Σ_i code_i · ln P_i` with the log clamped at [`LOG_FLOOR`].
pub fn target_weak_loss<P: AsRef<[f64]>>(pooled: &[P], codes: &[GaussianCode]) -> Result<f64> {
    if pooled.is_empty() {
        return Err(Error::Empty("target_weak_loss"));
    }
    if pooled.len() != codes.len() {
        return Err(invalid("target_weak_loss: bag counts differ"));
    }
    let mut total = 0.0;
    for (p, code) in pooled.iter().zip(codes) {
        let p = p.as_ref();
        if p.len() != code.levels() {
            return Err(Error::ShapeMismatch {
                op: "target_weak_loss",
                left: vec![code.levels()],
                right: vec![p.len()],
            });
        }
        total += code.values.iter().zip(p).map(|(y, q)| y * clamped_ln(*q)).sum::<f64>();
    }
    Ok(-total / pooled.len() as f64)
}

/// Binary cross-entropy averaged over each sequence's frames, then over
/// the `N_s + N_T = preds.len()` sequences.
pub fn domain_loss<P: AsRef<[f64]>, D: AsRef<[f64]>>(preds: &[P], domains: &[D]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("domain_loss"));
    }
    if preds.len() != domains.len() {
        return Err(invalid("domain_loss: sequence counts differ"));
    }
    let mut total = 0.0;
    for (p, d) in preds.iter().zip(domains) {
        let (p, d) = (p.as_ref(), d.as_ref());
        if p.len() != d.len() {
            return Err(invalid("domain_loss: frame counts differ"));
        }
        if p.is_empty() {
            return Err(Error::Empty("domain_loss sequence"));
        }
        let mut seq = 0.0;
        for (&pv, &dv) in p.iter().zip(d) {
            check_domain_label(dv)?;
            seq -= dv * clamped_ln(pv) + (1.0 - dv) * clamped_ln(1.0 - pv);
        }
        total += seq / p.len() as f64;
    }
    Ok(total / preds.len() as f64)
}

fn check_domain_label(d: f64) -> Result<()> {
    if d == 0.0 || d == 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("domain label must be 0 or 1, got {d}")))
    }
}

/// `λ(p) = 2 / (1 + exp(−γ·p)) − 1` for training progress `p ∈ [0, 1]`.
pub fn lambda_schedule(progress: f64, gamma: f64) -> f64 {
    let p = progress.clamp(0.0, 1.0);
    2.0 / (1.0 + (-gamma * p).exp()) - 1.0
}

/// Graph form of [`source_loss`]; `preds` and `labels` are `[n × 1]` with
/// frames of all `sequences` stacked.
pub fn source_loss_node(
    g: &mut Graph,
    preds: NodeId,
    labels: &Tensor,
    sequences: usize,
) -> Result<NodeId> {
    if sequences == 0 {
        return Err(Error::Empty("source_loss_node"));
    }
    let y = g.leaf(labels.clone());
    let diff = g.sub(preds, y)?;
    let sq = g.square(diff);
    let total = g.sum(sq);
    Ok(g.scale(total, 1.0 / sequences as f64))
}

/// Graph form of [`target_weak_loss`]; `pooled` is `[B × K]`, `codes`
/// the matching `[B × K]` code matrix.
pub fn target_loss_node(g: &mut Graph, pooled: NodeId, codes: &Tensor) -> Result<NodeId> {
    let bags = g.value(pooled).rows();
    let log_p = g.log(pooled);
    let y = g.leaf(codes.clone());
    let prod = g.mul(log_p, y)?;
    let total = g.sum(prod);
    Ok(g.scale(total, -1.0 / bags as f64))
}

/// Graph form of [`domain_loss`]; `preds` and `domains` are `[n × 1]`
/// with the frames of consecutive sequences of lengths `frames` stacked.
/// The result is divided by `sequences`, which may exceed `frames.len()`
/// when the batch is split over several calls.
pub fn domain_loss_node(
    g: &mut Graph,
    preds: NodeId,
    domains: &Tensor,
    frames: &[usize],
    sequences: usize,
) -> Result<NodeId> {
    if sequences == 0 || frames.is_empty() || frames.contains(&0) {
        return Err(Error::Empty("domain_loss_node"));
    }
    for &d in domains.data() {
        check_domain_label(d)?;
    }
    let rows = g.value(preds).rows();
    if frames.iter().sum::<usize>() != rows {
        return Err(invalid("domain_loss_node: frame counts do not cover the rows"));
    }
    let weights: Vec<f64> = frames
        .iter()
        .flat_map(|&n| std::iter::repeat_n(1.0 / (n * sequences) as f64, n))
        .collect();
    let shape = g.value(preds).shape().to_vec();
    let ones = g.leaf(Tensor::filled(&shape, 1.0));
    let d = g.leaf(domains.clone());
    let not_d = g.leaf(domains.map(|v| 1.0 - v));
    let log_p = g.log(preds);
    let q = g.sub(ones, preds)?;
    let log_q = g.log(q);
    let a = g.mul(d, log_p)?;
    let b = g.mul(not_d, log_q)?;
    let both = g.add(a, b)?;
    let w = g.leaf(Tensor::matrix(rows, 1, weights)?);
    let weighted = g.mul(both, w)?;
    let total = g.sum(weighted);
    Ok(g.scale(total, -1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::gradcheck::{max_relative_error, numeric_gradient, FD_STEP};
    use crate::ordinal::{gaussian_encode, one_hot, OrdinalLevel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn source_examples() {
        assert_eq!(source_loss(&[vec![0.3, -0.2]], &[vec![0.3, -0.2]]).unwrap(), 0.0);
        assert_eq!(source_loss(&[vec![1.0, 2.0]], &[vec![0.0, 0.0]]).unwrap(), 5.0);
        let one = source_loss(&[vec![1.0, 2.0]], &[vec![0.5, 0.0]]).unwrap();
        let two = source_loss(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[vec![0.5, 0.0], vec![0.5, 0.0]])
            .unwrap();
        assert_eq!(one, two);
        assert!(source_loss::<Vec<f64>, Vec<f64>>(&[], &[]).is_err());
        assert!(source_loss(&[vec![1.0]], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn source_zero_iff_exact() {
        assert!(source_loss(&[vec![1.0]], &[vec![1.0 + 1e-9]]).unwrap() > 0.0);
    }

    #[test]
    fn target_examples() {
        let level = OrdinalLevel::new(2, 4).unwrap();
        let code = one_hot(level);
        let uniform = vec![0.25; 4];
        let l = target_weak_loss(&[uniform.clone(), uniform], &[code.clone(), code]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);

        // mode term vanishes, off-mode terms hit the clamp
        let code = gaussian_encode(level, 0.3, false).unwrap();
        let peaked = vec![0.0, 0.0, 1.0, 0.0];
        let l = target_weak_loss(&[peaked], &[code.clone()]).unwrap();
        let off: f64 = code.values.iter().enumerate().filter(|&(k, _)| k != 2).map(|(_, v)| v).sum();
        assert!((l - (-off * LOG_FLOOR.ln())).abs() < 1e-9);

        assert!(target_weak_loss(&[vec![0.5, 0.5]], &[code]).is_err());
    }

    #[test]
    fn target_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = 6;
        let pooled: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let r: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let codes: Vec<_> = (0..5)
            .map(|i| gaussian_encode(OrdinalLevel::new(i % k, k).unwrap(), 0.7, false).unwrap())
            .collect();
        let mut want = 0.0;
        for i in 0..5 {
            for j in 0..k {
                want += codes[i].values[j] * pooled[i][j].ln();
            }
        }
        want = -want / 5.0;
        assert!((target_weak_loss(&pooled, &codes).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn target_drops_with_more_mode_mass() {
        let code = gaussian_encode(OrdinalLevel::new(1, 4).unwrap(), 0.5, false).unwrap();
        let base = [0.1, 0.4, 0.3, 0.2];
        let mut prev = f64::INFINITY;
        for boost in [0.0, 0.1, 0.2, 0.3, 0.5] {
            let mode = base[1] + boost * (1.0 - base[1]);
            let rest = (1.0 - mode) / (1.0 - base[1]);
            let p: Vec<f64> = base
                .iter()
                .enumerate()
                .map(|(k, &v)| if k == 1 { mode } else { v * rest })
                .collect();
            let l = target_weak_loss(&[p], &[code.clone()]).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn domain_examples() {
        let l = domain_loss(&[vec![1.0, 0.0]], &[vec![1.0, 0.0]]).unwrap();
        assert!(l.abs() < 1e-11);
        let l = domain_loss(&[vec![0.5; 3], vec![0.5; 3]], &[vec![0.0; 3], vec![1.0; 3]]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!(domain_loss(&[vec![0.5]], &[vec![0.5]]).is_err());

        let p = [vec![0.2, 0.7], vec![0.9]];
        let d = [vec![0.0, 0.0], vec![1.0]];
        let want = -(((0.8f64).ln() + (0.3f64).ln()) / 2.0 + (0.9f64).ln()) / 2.0;
        assert!((domain_loss(&p, &d).unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(lambda_schedule(0.0, 10.0), 0.0);
        let end = lambda_schedule(1.0, 10.0);
        assert!((end - (2.0 / (1.0 + (-10f64).exp()) - 1.0)).abs() < 1e-15);
        assert!((end - 0.99991).abs() < 1e-5);
        let grid: Vec<f64> = (0..100).map(|i| lambda_schedule(i as f64 / 99.0, 10.0)).collect();
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn report_invariant() {
        let r = LossReport::new(1.5, 0.25, 3.0, 0.75);
        assert!((r.total - (1.5 + 0.25 - 0.75 * 3.0)).abs() <= 1e-12);
        assert!(r.total < 0.0);
    }

    #[test]
    fn graph_losses_match_plain_and_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = 6;
            let preds = Tensor::matrix(n, 1, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let labels = Tensor::matrix(n, 1, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let eval = |p: &Tensor| {
                let mut g = Graph::new();
                let pi = g.leaf(p.clone());
                let l = source_loss_node(&mut g, pi, &labels, 2).unwrap();
                g.backward(l).unwrap();
                (g.value(l).item(), g.grad(pi).clone())
            };
            let (v, grad) = eval(&preds);
            let plain = source_loss(
                &[&preds.data()[..3], &preds.data()[3..]],
                &[&labels.data()[..3], &labels.data()[3..]],
            )
            .unwrap();
            assert!((v - plain).abs() <= 1e-12);
            let num = numeric_gradient(|p| eval(p).0, &preds, FD_STEP);
            assert!(max_relative_error(&grad, &num, 1e-3) <= 1e-4);

            let probs = Tensor::matrix(n, 1, (0..n).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap();
            let doms = Tensor::matrix(n, 1, (0..n).map(|i| (i % 2) as f64).collect()).unwrap();
            let eval = |p: &Tensor| {
                let mut g = Graph::new();
                let pi = g.leaf(p.clone());
                let l = domain_loss_node(&mut g, pi, &doms, &[2, 2, 2], 3).unwrap();
                g.backward(l).unwrap();
                (g.value(l).item(), g.grad(pi).clone())
            };
            let (v, grad) = eval(&probs);
            let chunks: Vec<&[f64]> = probs.data().chunks(2).collect();
            let dchunks: Vec<&[f64]> = doms.data().chunks(2).collect();
            assert!((v - domain_loss(&chunks, &dchunks).unwrap()).abs() <= 1e-12);
            let num = numeric_gradient(|p| eval(p).0, &probs, FD_STEP);
            assert!(max_relative_error(&grad, &num, 1e-3) <= 1e-4);

            let k = 4;
            let pooled = Tensor::matrix(2, k, (0..2 * k).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap();
            let codes: Vec<_> = (0..2)
                .map(|i| gaussian_encode(OrdinalLevel::new(i + 1, k).unwrap(), 0.8, false).unwrap())
                .collect();
            let code_t = Tensor::from_rows(&codes.iter().map(|c| c.values.clone()).collect::<Vec<_>>()).unwrap();
            let eval = |p: &Tensor| {
                let mut g = Graph::new();
                let pi = g.leaf(p.clone());
                let l = target_loss_node(&mut g, pi, &code_t).unwrap();
                g.backward(l).unwrap();
                (g.value(l).item(), g.grad(pi).clone())
            };
            let (v, grad) = eval(&pooled);
            let rows: Vec<&[f64]> = pooled.row_iter().collect();
            assert!((v - target_weak_loss(&rows, &codes).unwrap()).abs() <= 1e-12);
            let num = numeric_gradient(|p| eval(p).0, &pooled, FD_STEP);
            assert!(max_relative_error(&grad, &num, 1e-3) <= 1e-4);
        }
    }
}
