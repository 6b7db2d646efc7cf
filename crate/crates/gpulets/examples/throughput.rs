//! Max achievable throughput search for the three named request scenarios,
//! comparing the SBP baseline against elastic partitioning with and without
//! interference awareness.
//!
//! Run with: cargo run --release --example throughput

use gpulets::experiments::{default_fitted_interference, default_profiles, named_scenario};
use gpulets::scheduler::{Mode, WorkloadModel};
use gpulets::sim::{max_achievable_throughput, ThroughputSearch};

fn main() -> gpulets::Result<()> {
    let (profiles, models) = default_profiles();
    let intf = default_fitted_interference(&profiles, 1);
    let search = ThroughputSearch::default();

    println!(
        "{:<11} {:>10} {:>10} {:>12}",
        "scenario", "sbp", "gpulet", "gpulet+int"
    );
    for scenario in ["equal", "long-only", "short-skew"] {
        let rates = named_scenario(scenario)?;
        let base: Vec<WorkloadModel> = models
            .iter()
            .map(|(n, s)| WorkloadModel {
                name: n.clone(),
                slo_ms: *s,
                rate: rates
                    .iter()
                    .find(|(rn, _)| rn == n)
                    .map(|(_, r)| *r)
                    .unwrap_or(0.0),
            })
            .collect();
        let mut row = Vec::new();
        for mode in [Mode::Sbp, Mode::Gpulet, Mode::GpuletInt] {
            let intf_opt = (mode == Mode::GpuletInt).then_some(&intf);
            let rate = max_achievable_throughput(
                &base,
                4,
                mode,
                gpulets::profile::DEFAULT_PARTITION_GRID,
                &profiles,
                intf_opt,
                None,
                &search,
            )?;
            row.push(rate);
        }
        println!(
            "{:<11} {:>10.0} {:>10.0} {:>12.0}   (gpulet vs sbp: {:+.1}%)",
            scenario,
            row[0],
            row[1],
            row[2],
            100.0 * (row[1] / row[0] - 1.0)
        );
    }
    Ok(())
}
