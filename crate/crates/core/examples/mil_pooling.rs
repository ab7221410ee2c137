//! Cuts a labelled sequence into bags and compares the pooling operators
//! on a hand-written bag of per-frame level distributions.

use wsdaor::milbags::{adaptive_pool, make_bags, max_pool, mean_pool, Domain, Sequence};
use wsdaor::ordinal::OrdinalLevel;

fn main() -> wsdaor::Result<()> {
    let labels: Vec<f64> = (0..48).map(|t| if (20..30).contains(&t) { 2.0 } else { 0.0 }).collect();
    let frames = labels.iter().map(|&l| vec![l, 1.0 - l]).collect();
    let seq = Sequence::new(0, 0, Domain::Target, frames, labels)?;
    let bags = make_bags(&seq, 16, 8, |l| OrdinalLevel::new(l as usize, 3))?;
    println!("{} bags of 16 frames, stride 8", bags.len());
    for bag in &bags {
        println!("  offset {:>2}: weak label {}", bag.origin.offset, bag.weak_label.value());
    }

    // three levels; frames 1 and 3 both peak at level 2
    let preds = [
        [0.80, 0.15, 0.05],
        [0.10, 0.30, 0.60],
        [0.30, 0.50, 0.20],
        [0.05, 0.25, 0.70],
    ];
    let (max, picked) = max_pool(&preds)?;
    let (adaptive, n) = adaptive_pool(&preds)?;
    println!("\nmax pooling      -> frame {picked}: {max:.3?}");
    println!("adaptive pooling -> mean of {n} frames: {adaptive:.3?}");
    println!("mean pooling     -> {:.3?}", mean_pool(&preds)?);
    Ok(())
}
