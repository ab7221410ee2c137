//! Deterministic two-domain synthetic sequence data.
//!
//! Every frame has a latent intensity `z ∈ [0, 1]`. Most frames sit at the
//! baseline `z = 0`; a configured fraction falls inside expression episodes
//! that ramp up to a random peak, hold, and ramp back down, so neighbouring
//! frames are correlated. Features are drawn around a per-level centroid
//! with a within-level drift, a per-subject offset and isotropic noise.
//!
//! Source frames are labelled with the continuous value `2z − 1 ∈ [−1, 1]`.
//! Target frames go through the same process, then through the affine
//! shift `x ↦ A·x + b`, and are labelled with ordinal levels obtained by
//! thresholding `z`.
//!
//! # CSV format
//!
//! One row per frame, with a header:
//!
//! ```text
//! subject,sequence,frame,f0,f1,...,f{D-1},label,domain
//! ```
//!
//! `domain` is 0 for source and 1 for target. Rows of one sequence are
//! contiguous and ordered by `frame`, starting at 0.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::milbags::{Domain, Sequence};
use crate::ordinal::{OrdinalLevel, DEFAULT_LEVELS};

/// Affine map applied to target features.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineShift {
    /// `D × D`, row-major.
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineShift {
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Self {
            matrix,
            offset: vec![0.0; dim],
        }
    }

    /// `scale · R(angle)` plus `offset` on every coordinate, where `R`
    /// rotates coordinate pairs (0,1), (2,3), ... by `angle` radians.
    pub fn from_params(dim: usize, scale: f64, angle: f64, offset: f64) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        let (s, c) = angle.sin_cos();
        let mut i = 0;
        while i < dim {
            if i + 1 < dim {
                matrix[i * dim + i] = scale * c;
                matrix[i * dim + i + 1] = -scale * s;
                matrix[(i + 1) * dim + i] = scale * s;
                matrix[(i + 1) * dim + i + 1] = scale * c;
                i += 2;
            } else {
                matrix[i * dim + i] = scale;
                i += 1;
            }
        }
        Self {
            matrix,
            offset: vec![offset; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|r| {
                let row = &self.matrix[r * d..(r + 1) * d];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset[r]
            })
            .collect()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let d = self.dim();
        let mut m = self.matrix.clone();
        let mut det = 1.0;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&a, &b| m[a * d + col].abs().total_cmp(&m[b * d + col].abs()))
                .expect("non-empty range");
            if m[pivot * d + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..d {
                    m.swap(pivot * d + k, col * d + k);
                }
                det = -det;
            }
            let p = m[col * d + col];
            det *= p;
            for r in col + 1..d {
                let f = m[r * d + col] / p;
                for k in col..d {
                    m[r * d + k] -= f * m[col * d + k];
                }
            }
        }
        det
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    pub source_subjects: u32,
    pub target_subjects: u32,
    pub sequences_per_subject: u32,
    pub frames_per_sequence: usize,
    pub feature_dim: usize,
    pub levels: usize,
    /// Fraction of frames inside expression episodes.
    pub event_rate: f64,
    pub episode_min: usize,
    pub episode_max: usize,
    /// Episode peaks are uniform in `[peak_min, 1]`.
    pub peak_min: f64,
    /// Distance scale between neighbouring level centroids.
    pub level_separation: f64,
    /// Spread of the per-subject feature offset.
    pub subject_spread: f64,
    /// Frame noise standard deviation.
    pub noise: f64,
    pub shift_scale: f64,
    pub shift_rotation: f64,
    pub shift_offset: f64,
    pub seed: u64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            source_subjects: 20,
            target_subjects: 10,
            sequences_per_subject: 1,
            frames_per_sequence: 300,
            feature_dim: 12,
            levels: DEFAULT_LEVELS,
            event_rate: 0.3,
            episode_min: 16,
            episode_max: 48,
            peak_min: 0.2,
            level_separation: 1.0,
            subject_spread: 0.3,
            noise: 0.6,
            shift_scale: 1.0,
            shift_rotation: 0.0,
            shift_offset: 0.0,
            seed: 0,
        }
    }
}

impl DomainSpec {
    pub fn shift(&self) -> AffineShift {
        AffineShift::from_params(
            self.feature_dim,
            self.shift_scale,
            self.shift_rotation,
            self.shift_offset,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames_per_sequence == 0 || self.feature_dim == 0 || self.sequences_per_subject == 0
        {
            return Err(invalid("frames, feature_dim and sequences_per_subject must be ≥ 1"));
        }
        if self.levels < 2 {
            return Err(invalid("levels must be ≥ 2"));
        }
        if !(0.0..=1.0).contains(&self.event_rate) {
            return Err(invalid(format!("event_rate {} outside [0, 1]", self.event_rate)));
        }
        if self.episode_min == 0 || self.episode_min > self.episode_max {
            return Err(invalid("need 1 ≤ episode_min ≤ episode_max"));
        }
        if !(0.0..=1.0).contains(&self.peak_min) {
            return Err(invalid("peak_min must lie in [0, 1]"));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("subject_spread", self.subject_spread),
            ("level_separation", self.level_separation),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be finite and ≥ 0")));
            }
        }
        if self.shift().determinant().abs() < 1e-12 {
            return Err(invalid("shift matrix is singular"));
        }
        Ok(())
    }

    /// Ordinal level of a latent intensity: 0 at baseline, otherwise
    /// `ceil(z · (K−1))` so every episode frame is at least level 1.
    pub fn latent_level(&self, z: f64) -> usize {
        latent_level(z, self.levels)
    }

    /// Quantizer for source frame labels (`2z − 1`).
    pub fn source_quantizer(&self) -> impl Fn(f64) -> Result<OrdinalLevel> + Copy {
        source_quantizer(self.levels)
    }

    /// Quantizer for target frame labels, which are already levels.
    pub fn target_quantizer(&self) -> impl Fn(f64) -> Result<OrdinalLevel> + Copy {
        target_quantizer(self.levels)
    }
}

/// Maps a source frame label in `[−1, 1]` to one of `levels` levels.
pub fn source_quantizer(levels: usize) -> impl Fn(f64) -> Result<OrdinalLevel> + Copy {
    move |label| OrdinalLevel::new(latent_level((label + 1.0) / 2.0, levels), levels)
}

/// Checks that a target frame label is a valid level.
pub fn target_quantizer(levels: usize) -> impl Fn(f64) -> Result<OrdinalLevel> + Copy {
    move |label| {
        if label < 0.0 || label.fract() != 0.0 {
            return Err(invalid(format!("target label {label} is not a level")));
        }
        OrdinalLevel::new(label as usize, levels)
    }
}

pub fn latent_level(z: f64, levels: usize) -> usize {
    if z <= 0.0 {
        0
    } else {
        ((z * (levels - 1) as f64).ceil() as usize).clamp(1, levels - 1)
    }
}

/// Shared generative structure derived from the domain seed.
struct World {
    centroids: Vec<Vec<f64>>,
    drift: Vec<f64>,
}

impl World {
    fn new(spec: &DomainSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let d = spec.feature_dim;
        let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let normal = Normal::new(0.0, 1.0).expect("valid");
            let v: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm).collect()
        };
        // Each step between levels moves along a fresh random direction, so
        // the centroid path bends and a linear readout is not enough.
        let mut centroids = vec![vec![0.0; d]];
        for _ in 1..spec.levels {
            let step = unit(&mut rng);
            let prev = centroids.last().expect("non-empty").clone();
            centroids.push(
                prev.iter()
                    .zip(&step)
                    .map(|(p, s)| p + spec.level_separation * s)
                    .collect(),
            );
        }
        let drift = unit(&mut rng)
            .into_iter()
            .map(|v| v * 0.5 * spec.level_separation)
            .collect();
        Self { centroids, drift }
    }

    fn frame(&self, z: f64, levels: usize, subject: &[f64], noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let level = latent_level(z, levels);
        // position of z within its level bin, in [-0.5, 0.5]
        let within = if level == 0 {
            0.0
        } else {
            z * (levels - 1) as f64 - level as f64 + 0.5
        };
        self.centroids[level]
            .iter()
            .zip(&self.drift)
            .zip(subject)
            .map(|((c, w), s)| c + within * w + s + noise.sample(rng))
            .collect()
    }
}

fn subject_rng(seed: u64, domain: Domain, subject: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = match domain {
        Domain::Source => 1u64 << 32,
        Domain::Target => 2u64 << 32,
    } + subject as u64;
    rng.set_stream(stream);
    rng
}

/// Latent intensity trace of one sequence with the configured event rate.
fn latent_trace(spec: &DomainSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = spec.frames_per_sequence;
    let events = (spec.event_rate * n as f64).round() as usize;
    let mut lengths = Vec::new();
    let mut placed = 0;
    while placed < events {
        let len = rng
            .random_range(spec.episode_min..=spec.episode_max)
            .min(events - placed);
        lengths.push(len);
        placed += len;
    }
    let baseline = n - events;
    let mut cuts: Vec<usize> = (0..lengths.len())
        .map(|_| rng.random_range(0..=baseline))
        .collect();
    cuts.sort_unstable();

    let mut z = Vec::with_capacity(n);
    let mut prev_cut = 0;
    for (&len, &cut) in lengths.iter().zip(&cuts) {
        z.extend(std::iter::repeat_n(0.0, cut - prev_cut));
        prev_cut = cut;
        let peak = rng.random_range(spec.peak_min.max(1e-6)..=1.0);
        let ramp = (len / 3).max(1) as f64;
        for t in 0..len {
            let rise = (t + 1) as f64 / ramp;
            let fall = (len - t) as f64 / ramp;
            z.push(peak * rise.min(fall).min(1.0));
        }
    }
    z.extend(std::iter::repeat_n(0.0, baseline - prev_cut));
    debug_assert_eq!(z.len(), n);
    z
}

fn generate_domain(spec: &DomainSpec, domain: Domain) -> Result<Vec<Sequence>> {
    spec.validate()?;
    let world = World::new(spec);
    let shift = spec.shift();
    let noise = Normal::new(0.0, spec.noise).map_err(|e| invalid(e.to_string()))?;
    let spread = Normal::new(0.0, spec.subject_spread).map_err(|e| invalid(e.to_string()))?;
    let subjects = match domain {
        Domain::Source => spec.source_subjects,
        Domain::Target => spec.target_subjects,
    };
    let mut out = Vec::new();
    for subject in 0..subjects {
        let mut rng = subject_rng(spec.seed, domain, subject);
        let offset: Vec<f64> = (0..spec.feature_dim).map(|_| spread.sample(&mut rng)).collect();
        for index in 0..spec.sequences_per_subject {
            let z = latent_trace(spec, &mut rng);
            let mut frames = Vec::with_capacity(z.len());
            let mut labels = Vec::with_capacity(z.len());
            for &zt in &z {
                let x = world.frame(zt, spec.levels, &offset, &noise, &mut rng);
                match domain {
                    Domain::Source => {
                        frames.push(x);
                        labels.push(2.0 * zt - 1.0);
                    }
                    Domain::Target => {
                        frames.push(shift.apply(&x));
                        labels.push(spec.latent_level(zt) as f64);
                    }
                }
            }
            out.push(Sequence::new(subject, index, domain, frames, labels)?);
        }
    }
    Ok(out)
}

/// Fully labelled source-domain sequences.
pub fn generate_source(spec: &DomainSpec) -> Result<Vec<Sequence>> {
    generate_domain(spec, Domain::Source)
}

/// Shifted target-domain sequences with ordinal frame labels.
pub fn generate_target(spec: &DomainSpec) -> Result<Vec<Sequence>> {
    generate_domain(spec, Domain::Target)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub source: Vec<Sequence>,
    pub target: Vec<Sequence>,
}

impl Dataset {
    pub fn generate(spec: &DomainSpec) -> Result<Self> {
        Ok(Self {
            source: generate_source(spec)?,
            target: generate_target(spec)?,
        })
    }

    pub fn target_subjects(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.target.iter().map(|q| q.subject).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.source.first().or(self.target.first()).map(|s| s.dim())
    }
}

/// Writes sequences as CSV rows (see the module docs for columns).
pub fn write_csv<W: Write>(writer: W, sequences: &[Sequence]) -> Result<()> {
    let dim = sequences.first().map(|s| s.dim()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["subject".to_string(), "sequence".into(), "frame".into()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    header.extend(["label".to_string(), "domain".into()]);
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for seq in sequences {
        if seq.dim() != dim {
            return Err(Error::Dataset("sequences differ in feature width".into()));
        }
        let domain = match seq.domain {
            Domain::Source => "0",
            Domain::Target => "1",
        };
        for (i, (frame, label)) in seq.frames().iter().zip(seq.frame_labels()).enumerate() {
            record.clear();
            record.push(seq.subject.to_string());
            record.push(seq.index.to_string());
            record.push(i.to_string());
            record.extend(frame.iter().map(|v| format!("{v:?}")));
            record.push(format!("{label:?}"));
            record.push(domain.to_string());
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Sequence>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let width = header.len();
    let dim = width.checked_sub(5).filter(|&d| d > 0).ok_or_else(|| {
        Error::Dataset(format!("expected at least 6 columns, found {width}"))
    })?;
    let fixed = ["subject", "sequence", "frame"];
    for (i, name) in fixed.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(Error::Dataset(format!("column {i} should be {name:?}")));
        }
    }
    if header.get(width - 2) != Some("label") || header.get(width - 1) != Some("domain") {
        return Err(Error::Dataset("last columns must be label,domain".into()));
    }

    let num = |s: &str, line: u64| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Dataset(format!("line {line}: bad number {s:?}")))
    };
    let int = |s: &str, line: u64| -> Result<u32> {
        s.parse::<u32>()
            .map_err(|_| Error::Dataset(format!("line {line}: bad integer {s:?}")))
    };

    let mut out = Vec::new();
    let mut current: Option<(u32, u32, Domain, Vec<Vec<f64>>, Vec<f64>)> = None;
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let subject = int(&rec[0], line)?;
        let sequence = int(&rec[1], line)?;
        let frame = int(&rec[2], line)? as usize;
        let features = (0..dim)
            .map(|i| num(&rec[3 + i], line))
            .collect::<Result<Vec<_>>>()?;
        let label = num(&rec[3 + dim], line)?;
        let domain = Domain::from_label(num(&rec[4 + dim], line)?)?;

        let same = matches!(&current, Some((s, q, d, _, _)) if *s == subject && *q == sequence && *d == domain);
        if !same {
            if let Some((s, q, d, f, l)) = current.take() {
                out.push(Sequence::new(s, q, d, f, l)?);
            }
            current = Some((subject, sequence, domain, Vec::new(), Vec::new()));
        }
        let (_, _, _, frames, labels) = current.as_mut().expect("set above");
        if frame != frames.len() {
            return Err(Error::Dataset(format!(
                "line {line}: expected frame {}, found {frame}",
                frames.len()
            )));
        }
        frames.push(features);
        labels.push(label);
    }
    if let Some((s, q, d, f, l)) = current {
        out.push(Sequence::new(s, q, d, f, l)?);
    }
    Ok(out)
}

pub fn save_csv(path: &Path, sequences: &[Sequence]) -> Result<()> {
    write_csv(File::create(path)?, sequences)
}

pub fn load_csv(path: &Path) -> Result<Vec<Sequence>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    read_csv(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DomainSpec {
        DomainSpec {
            source_subjects: 3,
            target_subjects: 2,
            frames_per_sequence: 120,
            ..DomainSpec::default()
        }
    }

    #[test]
    fn zero_event_rate_stays_at_baseline() {
        let spec = DomainSpec {
            event_rate: 0.0,
            ..small()
        };
        for seq in generate_source(&spec).unwrap() {
            assert!(seq.frame_labels().iter().all(|&l| l == -1.0));
        }
        for seq in generate_target(&spec).unwrap() {
            assert!(seq.frame_labels().iter().all(|&l| l == 0.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small();
        assert_eq!(Dataset::generate(&spec).unwrap(), Dataset::generate(&spec).unwrap());
        let other = DomainSpec { seed: 1, ..spec.clone() };
        assert_ne!(generate_source(&spec).unwrap(), generate_source(&other).unwrap());
    }

    #[test]
    fn subjects_differ() {
        let seqs = generate_target(&small()).unwrap();
        assert_ne!(seqs[0].frame_labels(), seqs[1].frame_labels());
    }

    #[test]
    fn event_rate_matches_over_many_frames() {
        let spec = DomainSpec {
            source_subjects: 100,
            frames_per_sequence: 1000,
            event_rate: 0.27,
            ..DomainSpec::default()
        };
        let seqs = generate_source(&spec).unwrap();
        let (mut events, mut total) = (0usize, 0usize);
        for s in &seqs {
            events += s.frame_labels().iter().filter(|&&l| l > -1.0).count();
            total += s.len();
        }
        assert_eq!(total, 100_000);
        assert!((events as f64 / total as f64 - 0.27).abs() <= 0.02);
    }

    #[test]
    fn labels_in_range() {
        let spec = small();
        for s in generate_source(&spec).unwrap() {
            assert!(s.frame_labels().iter().all(|l| (-1.0..=1.0).contains(l)));
        }
        for s in generate_target(&spec).unwrap() {
            assert!(s
                .frame_labels()
                .iter()
                .all(|&l| l >= 0.0 && l <= (spec.levels - 1) as f64 && l.fract() == 0.0));
        }
    }

    #[test]
    fn unshifted_target_matches_source_in_law() {
        let spec = DomainSpec {
            source_subjects: 40,
            target_subjects: 40,
            frames_per_sequence: 250,
            ..DomainSpec::default()
        };
        let (src, tgt) = (generate_source(&spec).unwrap(), generate_target(&spec).unwrap());
        let stats = |seqs: &[Sequence], d: usize| {
            let vals: Vec<f64> = seqs.iter().flat_map(|s| s.frames().iter().map(move |f| f[d])).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var, n)
        };
        for d in 0..spec.feature_dim {
            let (ms, vs, ns) = stats(&src, d);
            let (mt, vt, nt) = stats(&tgt, d);
            let se = (vs / ns + vt / nt).sqrt();
            // subject offsets make frames within a subject dependent; the
            // effective sample is the subject count, not the frame count
            let se_subject = se * (spec.frames_per_sequence as f64).sqrt();
            assert!((ms - mt).abs() < 3.0 * se_subject, "dim {d}: {ms} vs {mt}");
        }
    }

    #[test]
    fn shift_is_applied_to_target() {
        let base = small();
        let shifted = DomainSpec {
            shift_offset: 3.0,
            ..base.clone()
        };
        let a = generate_target(&base).unwrap();
        let b = generate_target(&shifted).unwrap();
        assert_eq!(a[0].frame_labels(), b[0].frame_labels());
        for (x, y) in a[0].frames().iter().zip(b[0].frames()) {
            for (u, v) in x.iter().zip(y) {
                assert!((v - u - 3.0).abs() < 1e-12);
            }
        }
        assert_eq!(generate_source(&base).unwrap(), generate_source(&shifted).unwrap());
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(generate_source(&DomainSpec { event_rate: 1.5, ..small() }).is_err());
        assert!(generate_source(&DomainSpec { shift_scale: 0.0, ..small() }).is_err());
        assert!(generate_source(&DomainSpec { frames_per_sequence: 0, ..small() }).is_err());
        assert!(generate_source(&DomainSpec { episode_min: 0, ..small() }).is_err());
    }

    #[test]
    fn affine_shift_helpers() {
        let s = AffineShift::from_params(3, 2.0, 0.5, 1.0);
        assert!((s.determinant() - 8.0).abs() < 1e-12);
        assert_eq!(AffineShift::identity(4).apply(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn level_thresholds() {
        assert_eq!(latent_level(0.0, 6), 0);
        assert_eq!(latent_level(0.01, 6), 1);
        assert_eq!(latent_level(0.2, 6), 1);
        assert_eq!(latent_level(0.21, 6), 2);
        assert_eq!(latent_level(1.0, 6), 5);
        let q = small().source_quantizer();
        assert_eq!(q(-1.0).unwrap().value(), 0);
        assert_eq!(q(1.0).unwrap().value(), 5);
    }

    #[test]
    fn csv_round_trip() {
        let data = Dataset::generate(&small()).unwrap();
        for seqs in [&data.source, &data.target] {
            let mut buf = Vec::new();
            write_csv(&mut buf, seqs).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            assert_eq!(&back, seqs);
        }
    }

    #[test]
    fn csv_rejects_gaps() {
        let text = "subject,sequence,frame,f0,label,domain\n0,0,0,1.0,0.0,1\n0,0,2,1.0,0.0,1\n";
        assert!(read_csv(text.as_bytes()).is_err());
        let text = "subject,sequence,frame,f0,label,domain\n0,0,0,1.0,0.0,7\n";
        assert!(read_csv(text.as_bytes()).is_err());
    }
}
