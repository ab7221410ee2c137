//! Pooling and label-encoding ablation: one-hot or Gaussian codes with
//! max or adaptive pooling, all with the same seeds.
//!
//! Run with `--release`.

use wsdaor::experiment::{run_cells, ablation_cells, Protocol};
use wsdaor::network::NetworkConfig;
use wsdaor::synth::{Dataset, DomainSpec};
use wsdaor::trainer::TrainConfig;

fn main() -> wsdaor::Result<()> {
    let spec = DomainSpec {
        source_subjects: 8,
        target_subjects: 4,
        seed: 3,
        ..DomainSpec::default()
    };
    let data = Dataset::generate(&spec)?;
    let network = NetworkConfig {
        seed: 3,
        ..NetworkConfig::default()
    };
    let train = TrainConfig {
        epochs: 10,
        seed: 3,
        ..TrainConfig::default()
    };
    let rows = run_cells(&ablation_cells(&Protocol::default()), &network, &train, &data)?;
    let mut out = csv::Writer::from_writer(std::io::stdout());
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}
