//! Trains the adversarial model on a small shifted dataset, prints the
//! loss history and round-trips the best checkpoint.
//!
//! Run with `--release`; a debug build is several times slower.

use wsdaor::experiment::{score, train_single, Protocol};
use wsdaor::network::{NetworkConfig, NetworkParams};
use wsdaor::synth::{Dataset, DomainSpec};
use wsdaor::trainer::TrainConfig;

fn main() -> wsdaor::Result<()> {
    let spec = DomainSpec {
        source_subjects: 8,
        target_subjects: 4,
        shift_offset: 1.0,
        shift_rotation: 0.3,
        seed: 1,
        ..DomainSpec::default()
    };
    let data = Dataset::generate(&spec)?;
    let protocol = Protocol::default();
    let network = NetworkConfig {
        seed: 1,
        ..NetworkConfig::default()
    };
    let train = TrainConfig {
        epochs: 15,
        seed: 1,
        ..TrainConfig::default()
    };

    let (model, fold) = train_single(&protocol, &network, &train, &data)?;
    println!("trained on target subjects {:?}, early-stopped on {}", fold.train, fold.validation);
    println!("epoch      lr  lambda   L_S     L_T     L_d    val pcc");
    for r in &model.history {
        println!(
            "{:>5} {:>7.5} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>9}",
            r.epoch,
            r.lr,
            r.lambda,
            r.loss.source,
            r.loss.target,
            r.loss.domain,
            r.validation_pcc.map_or("n/a".into(), |v| format!("{v:.3}")),
        );
    }
    println!("best epoch: {}", model.best_epoch);

    let text = model.params.to_checkpoint();
    let restored = NetworkParams::from_checkpoint(&text)?;
    assert_eq!(restored, model.params);
    println!("checkpoint: {} parameters, {} bytes", restored.parameter_count(), text.len());

    let (frame, _) = score(&restored, &data.target, &protocol)?;
    println!("frame-level on all target subjects: pcc {:?} icc {:?} mae {:.3}", frame.pcc, frame.icc, frame.mae);
    Ok(())
}
