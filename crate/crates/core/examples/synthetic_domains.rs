//! Generates a shifted two-domain dataset, writes it as CSV and reads it back.

use wsdaor::synth::{read_csv, write_csv, Dataset, DomainSpec};

fn mean_feature(seqs: &[wsdaor::milbags::Sequence]) -> f64 {
    let (sum, n) = seqs
        .iter()
        .flat_map(|s| s.frames())
        .fold((0.0, 0usize), |(s, n), f| (s + f.iter().sum::<f64>(), n + f.len()));
    sum / n as f64
}

fn main() -> wsdaor::Result<()> {
    let spec = DomainSpec {
        source_subjects: 4,
        target_subjects: 3,
        shift_offset: 1.5,
        shift_rotation: 0.4,
        ..DomainSpec::default()
    };
    let data = Dataset::generate(&spec)?;
    println!("source: {} sequences, target: {} sequences", data.source.len(), data.target.len());
    println!("mean feature value: source {:.3}, target {:.3}", mean_feature(&data.source), mean_feature(&data.target));

    let t = &data.target[0];
    let mut hist = vec![0usize; spec.levels];
    for &l in t.frame_labels() {
        hist[l as usize] += 1;
    }
    println!("level histogram of target subject 0: {hist:?}");

    let mut buf = Vec::new();
    write_csv(&mut buf, &data.target)?;
    let back = read_csv(buf.as_slice())?;
    assert_eq!(back, data.target);
    let header = String::from_utf8_lossy(&buf).lines().next().unwrap_or_default().to_string();
    println!("csv header: {header}");
    Ok(())
}
