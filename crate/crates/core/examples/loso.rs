//! Leave-one-subject-out comparison of training scenarios under a domain
//! shift.
//!
//! Run with `--release`.

use wsdaor::experiment::{loso_evaluate, DaMode, Protocol};
use wsdaor::network::NetworkConfig;
use wsdaor::synth::{Dataset, DomainSpec};
use wsdaor::trainer::TrainConfig;

fn main() -> wsdaor::Result<()> {
    let spec = DomainSpec {
        source_subjects: 8,
        target_subjects: 4,
        shift_offset: 1.0,
        shift_rotation: 0.3,
        seed: 2,
        ..DomainSpec::default()
    };
    let data = Dataset::generate(&spec)?;
    let network = NetworkConfig {
        seed: 2,
        ..NetworkConfig::default()
    };
    let train = TrainConfig {
        epochs: 10,
        // same number of updates for every scenario
        steps_per_epoch: 60,
        seed: 2,
        ..TrainConfig::default()
    };
    println!("{:<12} {:>8} {:>8} {:>8}", "scenario", "pcc", "icc", "mae");
    for mode in DaMode::ALL {
        let protocol = Protocol {
            da_mode: mode,
            ..Protocol::default()
        };
        let report = loso_evaluate(&protocol, &network, &train, &data)?;
        let f = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<12} {:>8} {:>8} {:>8.3}",
            mode.name(),
            f(report.frame.pcc),
            f(report.frame.icc),
            report.frame.mae
        );
    }
    Ok(())
}
