//! Quantizes raw intensity scores and prints their soft label codes.

use wsdaor::ordinal::{argmax, quantize_intensity, LabelEncoding, OrdinalLevel};

fn show(name: &str, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    println!("  {name:<22} [{}]", cells.join(", "));
}

fn main() -> wsdaor::Result<()> {
    println!("raw score -> level");
    for raw in [0, 2, 4, 5, 7, 15] {
        println!("  {raw:>2} -> {}", quantize_intensity(raw)?.value());
    }

    let label = OrdinalLevel::new(3, 6)?;
    println!("\ncodes for level {} of {}", label.value(), label.levels());
    for (name, enc) in [
        ("one-hot", LabelEncoding::OneHot),
        ("gaussian σ=0.3", LabelEncoding::Gaussian { sigma: 0.3 }),
        ("gaussian σ=1.0", LabelEncoding::Gaussian { sigma: 1.0 }),
        ("normalized σ=1.0", LabelEncoding::GaussianNormalized { sigma: 1.0 }),
    ] {
        let code = enc.encode(label)?;
        assert_eq!(argmax(&code.values), label.value());
        show(name, &code.values);
    }
    Ok(())
}
