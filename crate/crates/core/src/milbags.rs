//! Sequences, fixed-window bags with weak labels, and the MIL pooling
//! operators that turn per-frame softmax rows into one bag prediction.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ordinal::{argmax, OrdinalLevel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    /// Domain label used by the discriminator: source 0, target 1.
    pub fn label(self) -> f64 {
        match self {
            Domain::Source => 0.0,
            Domain::Target => 1.0,
        }
    }

    pub fn from_label(v: f64) -> Result<Self> {
        match v {
            x if x == 0.0 => Ok(Domain::Source),
            x if x == 1.0 => Ok(Domain::Target),
            _ => Err(invalid(format!("domain label must be 0 or 1, got {v}"))),
        }
    }
}

/// An ordered run of frame feature vectors with per-frame labels.
///
/// Source sequences carry continuous intensities; target sequences carry
/// ordinal levels, which only evaluation code should read. Training code
/// consumes target data through [`Bag`]s.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub subject: u32,
    pub index: u32,
    pub domain: Domain,
    frames: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl Sequence {
    pub fn new(
        subject: u32,
        index: u32,
        domain: Domain,
        frames: Vec<Vec<f64>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("sequence frames"));
        }
        if frames.len() != labels.len() {
            return Err(invalid(format!(
                "sequence has {} frames but {} labels",
                frames.len(),
                labels.len()
            )));
        }
        let dim = frames[0].len();
        if dim == 0 || frames.iter().any(|f| f.len() != dim) {
            return Err(invalid("frames must share one positive dimensionality"));
        }
        Ok(Self {
            subject,
            index,
            domain,
            frames,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    /// Ground-truth frame labels.
    pub fn frame_labels(&self) -> &[f64] {
        &self.labels
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOrigin {
    pub domain: Domain,
    pub subject: u32,
    pub sequence: u32,
    pub offset: usize,
}

/// A fixed-length window of frames carrying one weak ordinal label.
#[derive(Clone, Debug, PartialEq)]
pub struct Bag {
    pub frames: Vec<Vec<f64>>,
    pub weak_label: OrdinalLevel,
    pub origin: BagOrigin,
}

/// A bag that also exposes its frame labels (source domain).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBag {
    pub bag: Bag,
    pub frame_labels: Vec<f64>,
}

fn windows(n: usize, window: usize, stride: usize) -> Result<impl Iterator<Item = usize>> {
    if window == 0 || stride == 0 {
        return Err(invalid(format!(
            "window and stride must be ≥ 1, got window={window} stride={stride}"
        )));
    }
    let count = if n >= window { (n - window) / stride + 1 } else { 0 };
    Ok((0..count).map(move |i| i * stride))
}

/// Cuts `seq` into windows of `window` frames every `stride` frames.
///
/// Each bag's weak label is the maximum of `quantize` over the frame labels
/// in its window. Sequences shorter than `window` produce no bags.
pub fn make_bags(
    seq: &Sequence,
    window: usize,
    stride: usize,
    quantize: impl Fn(f64) -> Result<OrdinalLevel>,
) -> Result<Vec<Bag>> {
    let levels = seq
        .labels
        .iter()
        .map(|&l| quantize(l))
        .collect::<Result<Vec<_>>>()?;
    windows(seq.len(), window, stride)?
        .map(|offset| {
            let weak_label = levels[offset..offset + window]
                .iter()
                .copied()
                .max()
                .expect("window is non-empty");
            Ok(Bag {
                frames: seq.frames[offset..offset + window].to_vec(),
                weak_label,
                origin: BagOrigin {
                    domain: seq.domain,
                    subject: seq.subject,
                    sequence: seq.index,
                    offset,
                },
            })
        })
        .collect()
}

/// Like [`make_bags`] but keeps each window's frame labels.
pub fn make_labeled_bags(
    seq: &Sequence,
    window: usize,
    stride: usize,
    quantize: impl Fn(f64) -> Result<OrdinalLevel>,
) -> Result<Vec<LabeledBag>> {
    let bags = make_bags(seq, window, stride, quantize)?;
    Ok(bags
        .into_iter()
        .map(|bag| {
            let o = bag.origin.offset;
            LabeledBag {
                frame_labels: seq.labels[o..o + window].to_vec(),
                bag,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingMode {
    Max,
    Mean,
    #[default]
    Adaptive,
}

impl PoolingMode {
    /// Frames whose softmax rows are averaged into the bag prediction.
    pub fn select<R: AsRef<[f64]>>(self, preds: &[R]) -> Result<Vec<usize>> {
        check_rows(preds)?;
        Ok(match self {
            PoolingMode::Max => vec![max_selection(preds)],
            PoolingMode::Mean => (0..preds.len()).collect(),
            PoolingMode::Adaptive => adaptive_selection(preds),
        })
    }

    pub fn pool<R: AsRef<[f64]>>(self, preds: &[R]) -> Result<Vec<f64>> {
        let selected = self.select(preds)?;
        Ok(mean_of(preds, &selected))
    }
}

fn check_rows<R: AsRef<[f64]>>(preds: &[R]) -> Result<()> {
    let first = preds.first().ok_or(Error::Empty("pooling input"))?;
    let k = first.as_ref().len();
    if k == 0 || preds.iter().any(|p| p.as_ref().len() != k) {
        return Err(invalid("pooling rows must share one positive width"));
    }
    Ok(())
}

fn mean_of<R: AsRef<[f64]>>(preds: &[R], rows: &[usize]) -> Vec<f64> {
    let k = preds[rows[0]].as_ref().len();
    let mut acc = vec![0.0; k];
    for &r in rows {
        for (a, v) in acc.iter_mut().zip(preds[r].as_ref()) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    acc.into_iter().map(|a| a / n).collect()
}

/// Highest predicted level; ties go to the larger probability at that
/// level, then to the earlier frame.
fn max_selection<R: AsRef<[f64]>>(preds: &[R]) -> usize {
    let key = |i: usize| {
        let row = preds[i].as_ref();
        let level = argmax(row);
        (level, row[level])
    };
    let mut best = 0;
    let mut best_key = key(0);
    for i in 1..preds.len() {
        let k = key(i);
        if k.0 > best_key.0 || (k.0 == best_key.0 && k.1 > best_key.1) {
            best = i;
            best_key = k;
        }
    }
    best
}

fn adaptive_selection<R: AsRef<[f64]>>(preds: &[R]) -> Vec<usize> {
    let levels: Vec<usize> = preds.iter().map(|p| argmax(p.as_ref())).collect();
    let top = *levels.iter().max().expect("non-empty");
    (0..preds.len()).filter(|&i| levels[i] == top).collect()
}

/// Softmax row of the single frame predicting the highest level, with its index.
pub fn max_pool<R: AsRef<[f64]>>(preds: &[R]) -> Result<(Vec<f64>, usize)> {
    check_rows(preds)?;
    let i = max_selection(preds);
    Ok((preds[i].as_ref().to_vec(), i))
}

/// Mean of the rows whose predicted level equals the bag's highest
/// predicted level, with the number of rows averaged.
///
/// When that level is 0 every argmax-0 frame is pooled, which for a
/// neutral prediction means the whole bag.
pub fn adaptive_pool<R: AsRef<[f64]>>(preds: &[R]) -> Result<(Vec<f64>, usize)> {
    check_rows(preds)?;
    let selected = adaptive_selection(preds);
    Ok((mean_of(preds, &selected), selected.len()))
}

pub fn mean_pool<R: AsRef<[f64]>>(preds: &[R]) -> Result<Vec<f64>> {
    PoolingMode::Mean.pool(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq_with_levels(levels: &[usize]) -> Sequence {
        let frames = (0..levels.len()).map(|i| vec![i as f64]).collect();
        let labels = levels.iter().map(|&l| l as f64).collect();
        Sequence::new(0, 0, Domain::Target, frames, labels).unwrap()
    }

    fn as_level(v: f64) -> Result<OrdinalLevel> {
        OrdinalLevel::new(v as usize, 6)
    }

    #[test]
    fn bag_offsets() {
        let seq = seq_with_levels(&[0; 100]);
        let bags = make_bags(&seq, 64, 8, as_level).unwrap();
        let offsets: Vec<_> = bags.iter().map(|b| b.origin.offset).collect();
        assert_eq!(offsets, vec![0, 8, 16, 24, 32]);
        assert!(bags.iter().all(|b| b.frames.len() == 64));
        assert!(make_bags(&seq_with_levels(&[0; 63]), 64, 8, as_level)
            .unwrap()
            .is_empty());
        assert!(make_bags(&seq, 0, 8, as_level).is_err());
        assert!(make_bags(&seq, 4, 0, as_level).is_err());
    }

    #[test]
    fn weak_label_is_window_max() {
        let bags = make_bags(&seq_with_levels(&[0, 0, 3, 1]), 4, 1, as_level).unwrap();
        assert_eq!(bags.len(), 1);
        assert_eq!(bags[0].weak_label.value(), 3);

        let seq = seq_with_levels(&[0, 0, 0, 0, 2, 0, 0, 0]);
        for bag in make_bags(&seq, 3, 1, as_level).unwrap() {
            let o = bag.origin.offset;
            let any_event = (o..o + 3).any(|i| i == 4);
            assert_eq!(bag.weak_label.value() == 0, !any_event);
            if bag.weak_label.value() == 0 {
                assert!(seq.frame_labels()[o..o + 3].iter().all(|&l| l == 0.0));
            }
        }
    }

    #[test]
    fn labeled_bags_keep_frame_labels() {
        let seq = seq_with_levels(&[0, 1, 2, 3, 4, 5]);
        let bags = make_labeled_bags(&seq, 3, 2, as_level).unwrap();
        assert_eq!(bags.len(), 2);
        assert_eq!(bags[1].frame_labels, vec![2.0, 3.0, 4.0]);
    }

    fn row(level: usize, p: f64) -> Vec<f64> {
        let mut v = vec![(1.0 - p) / 5.0; 6];
        v[level] = p;
        v
    }

    #[test]
    fn max_pool_examples() {
        let preds = vec![row(0, 0.9), row(0, 0.8), row(2, 0.5), row(1, 0.7)];
        assert_eq!(max_pool(&preds).unwrap(), (preds[2].clone(), 2));

        let preds = vec![row(2, 0.6), row(2, 0.9), row(0, 0.99)];
        assert_eq!(max_pool(&preds).unwrap().1, 1);

        let preds = vec![row(2, 0.6), row(2, 0.6)];
        assert_eq!(max_pool(&preds).unwrap().1, 0);

        let single = vec![row(4, 0.4)];
        assert_eq!(max_pool(&single).unwrap(), (single[0].clone(), 0));
        assert!(max_pool::<Vec<f64>>(&[]).is_err());
    }

    #[test]
    fn adaptive_pool_examples() {
        let v = row(3, 0.5);
        let preds = vec![v.clone(); 5];
        let (p, n) = adaptive_pool(&preds).unwrap();
        assert_eq!(n, 5);
        for (a, b) in p.iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }

        let (u, w, z) = (row(2, 0.5), row(2, 0.8), row(0, 0.9));
        let (p, n) = adaptive_pool(&[u.clone(), w.clone(), z]).unwrap();
        assert_eq!(n, 2);
        for k in 0..6 {
            assert!((p[k] - (u[k] + w[k]) / 2.0).abs() < 1e-15);
        }

        let (p, n) = adaptive_pool(&[row(0, 0.6), row(0, 0.8)]).unwrap();
        assert_eq!(n, 2);
        assert!((p[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn mean_pool_examples() {
        let single = vec![row(1, 0.3)];
        assert_eq!(mean_pool(&single).unwrap(), single[0]);
        assert_eq!(
            mean_pool(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(mean_pool(&[vec![1.0, 0.0], vec![1.0]]).is_err());
    }

    fn simplex_rows(max_frames: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, 6), 1..max_frames).prop_map(
            |rows| {
                rows.into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.into_iter().map(|v| v / s).collect()
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn adaptive_pool_stays_on_simplex(preds in simplex_rows(20)) {
            let (p, n) = adaptive_pool(&preds).unwrap();
            prop_assert!(n >= 1);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn unique_top_level_matches_max_pool(preds in simplex_rows(20)) {
            let levels: Vec<_> = preds.iter().map(|p| argmax(p)).collect();
            let top = *levels.iter().max().unwrap();
            let (p, n) = adaptive_pool(&preds).unwrap();
            if levels.iter().filter(|&&l| l == top).count() == 1 {
                prop_assert_eq!(n, 1);
                prop_assert_eq!(p, max_pool(&preds).unwrap().0);
            }
        }

        #[test]
        fn adaptive_pool_permutation_invariant(preds in simplex_rows(20), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = preds.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (p1, n1) = adaptive_pool(&preds).unwrap();
            let (p2, n2) = adaptive_pool(&shuffled).unwrap();
            prop_assert_eq!(n1, n2);
            for (a, b) in p1.iter().zip(&p2) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn bags_carry_window_max(levels in prop::collection::vec(0usize..6, 1..120),
                                 window in 1usize..40, stride in 1usize..12) {
            let seq = seq_with_levels(&levels);
            for bag in make_bags(&seq, window, stride, as_level).unwrap() {
                let o = bag.origin.offset;
                prop_assert!(o + window <= levels.len());
                prop_assert_eq!(bag.weak_label.value(), *levels[o..o + window].iter().max().unwrap());
            }
        }
    }
}
