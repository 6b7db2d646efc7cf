//! Compares elastic partitioning with interference awareness against the
//! exhaustive ideal oracle over the canonical 1,023-scenario sweep.
//!
//! Run with: cargo run --release --example compare_ideal

use gpulets::experiments::{
    canonical_rate_vectors, compare_ideal, default_fitted_interference, default_profiles,
    SweepVerdict, CANONICAL_LEVELS,
};
use gpulets::scheduler::Mode;

fn main() -> gpulets::Result<()> {
    let (profiles, models) = default_profiles();
    let intf = default_fitted_interference(&profiles, 1);
    let vectors = canonical_rate_vectors(models.len(), &CANONICAL_LEVELS);

    let result = compare_ideal(
        &models,
        &vectors,
        4,
        gpulets::profile::DEFAULT_PARTITION_GRID,
        &profiles,
        &intf,
        200_000,
    )?;
    let ideal = result.schedulable_count(Mode::Ideal);
    let elastic = result.schedulable_count(Mode::GpuletInt);
    let over_budget = result
        .outcomes
        .iter()
        .filter(|o| o.verdicts.get(&Mode::Ideal) == Some(&SweepVerdict::BudgetExceeded))
        .count();

    println!("scenarios:          {}", vectors.len());
    println!("ideal schedulable:  {ideal} ({over_budget} over budget)");
    println!("gpulet+int:         {elastic}");
    println!(
        "heuristic/oracle:   {:.1}%",
        100.0 * elastic as f64 / ideal as f64
    );

    // cases the oracle schedules but the heuristic misses
    let missed: Vec<usize> = result
        .outcomes
        .iter()
        .filter(|o| {
            o.verdicts.get(&Mode::Ideal) == Some(&SweepVerdict::Schedulable)
                && o.verdicts.get(&Mode::GpuletInt) == Some(&SweepVerdict::NotSchedulable)
        })
        .map(|o| o.scenario_id)
        .collect();
    println!(
        "missed by heuristic: {} scenarios {:?}...",
        missed.len(),
        &missed[..missed.len().min(8)]
    );
    Ok(())
}
