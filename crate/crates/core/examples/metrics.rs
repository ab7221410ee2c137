//! Agreement metrics on a toy prediction, per sequence and pooled.

use wsdaor::metrics::{evaluate, icc31, mae, pcc, Aggregation, Level, SeriesPair};

fn main() -> wsdaor::Result<()> {
    let truth = [0.0, 0.0, 1.0, 3.0, 4.0, 2.0, 0.0];
    let shifted: Vec<f64> = truth.iter().map(|v| v + 1.0).collect();
    println!("prediction = truth + 1");
    println!("  pcc {:?}", pcc(&truth, &shifted)?);
    println!("  icc {:?}", icc31(&truth, &shifted)?);
    println!("  mae {}", mae(&truth, &shifted)?);

    let pairs = vec![
        SeriesPair {
            subject: 0,
            sequence: 0,
            truth: truth.to_vec(),
            predicted: vec![0.0, 1.0, 1.0, 2.0, 4.0, 2.0, 0.0],
        },
        SeriesPair {
            subject: 1,
            sequence: 0,
            truth: vec![0.0, 2.0, 5.0, 1.0],
            predicted: vec![0.0, 0.0, 0.0, 0.0],
        },
    ];
    for agg in [Aggregation::PerSequence, Aggregation::Pooled] {
        let r = evaluate(Level::Frame, &pairs, agg)?;
        println!(
            "{agg:?}: pcc {:?} icc {:?} mae {:.3} (undefined pcc in {} sequence(s))",
            r.pcc, r.icc, r.mae, r.missing_pcc
        );
    }
    Ok(())
}
