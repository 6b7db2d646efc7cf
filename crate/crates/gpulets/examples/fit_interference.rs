//! Fits the five-coefficient linear interference model on synthetic co-run
//! samples (2,500 observations, 5% relative noise, split 1750/750) and
//! prints the recovered coefficients plus the validation error CDF.
//!
//! Run with: cargo run --example fit_interference

use gpulets::experiments::{corun_samples_for_profiles, default_profiles};
use gpulets::interference::{fit, InterferenceModel};

fn main() -> gpulets::Result<()> {
    let (profiles, _) = default_profiles();
    let truth = InterferenceModel::default_mild();
    // 5 models → 15 unordered pairs; ~167 samples per pair ≈ 2,500 points
    let samples = corun_samples_for_profiles(&profiles, &truth, 167, 0.05, 42);
    println!("generated {} co-run samples", samples.len());

    let report = fit(&samples, 1750.0 / samples.len() as f64, 7)?;
    println!("planted   c = {:?}", truth.coef);
    println!("recovered c = {:?}", report.model.coef);
    println!(
        "train/validation = {}/{}",
        report.train_count, report.validation_count
    );
    for pct in [50, 90, 95, 99] {
        println!(
            "p{pct:<3} relative error: {:.4}",
            report.validation.quantile(pct as f64 / 100.0)
        );
    }
    Ok(())
}
