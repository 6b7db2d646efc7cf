//! The canonical schedulability sweep: every per-model rate combination
//! over {0, 200, 400, 600} req/s (4^5 − 1 = 1023 scenarios) on four GPUs,
//! for the SBP baseline and both elastic-partitioning variants.
//!
//! Run with: cargo run --release --example sweep

use gpulets::experiments::{
    canonical_rate_vectors, default_fitted_interference, default_profiles, sweep_schedulability,
    CANONICAL_LEVELS,
};
use gpulets::scheduler::Mode;

fn main() -> gpulets::Result<()> {
    let (profiles, models) = default_profiles();
    let intf = default_fitted_interference(&profiles, 1);
    let vectors = canonical_rate_vectors(models.len(), &CANONICAL_LEVELS);
    println!("sweeping {} scenarios over 4 GPUs...", vectors.len());

    let modes = [Mode::Sbp, Mode::Gpulet, Mode::GpuletInt];
    let result = sweep_schedulability(
        &models,
        &vectors,
        &modes,
        4,
        gpulets::profile::DEFAULT_PARTITION_GRID,
        &profiles,
        &intf,
        200_000,
    )?;
    for mode in modes {
        println!(
            "{:<11} {:>5}/{} schedulable",
            mode.to_string(),
            result.schedulable_count(mode),
            vectors.len()
        );
    }

    let path = std::env::temp_dir().join("gpulets_sweep.csv");
    result.write_csv(std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
