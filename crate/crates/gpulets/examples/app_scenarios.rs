//! The two multi-model applications: `game` fans one request out into six
//! digit recognitions plus one image recognition; `traffic` runs detection
//! followed by two recognitions. Each is scheduled, driven with Poisson
//! arrivals at 90% of its searched maximum rate, and measured for SLO
//! violations.
//!
//! Run with: cargo run --release --example app_scenarios

use gpulets::experiments::{
    app_max_throughput, default_fitted_interference, default_profiles, run_app_scenario,
    AppScenario,
};
use gpulets::scheduler::Mode;
use gpulets::sim::{ArrivalKind, SimConfig, ThroughputSearch};

fn main() -> gpulets::Result<()> {
    let (profiles, _) = default_profiles();
    let intf = default_fitted_interference(&profiles, 1);

    for app in [AppScenario::game(), AppScenario::traffic()] {
        let slo = app.app_slo_ms(&profiles)?;
        println!(
            "== {} (app SLO {slo} ms, fanout {:?})",
            app.name, app.fanout
        );
        // gate the search on measured violations under Poisson arrivals
        let search = ThroughputSearch {
            arrivals: ArrivalKind::Poisson,
            ..Default::default()
        };
        let max = app_max_throughput(
            &app,
            Mode::GpuletInt,
            4,
            gpulets::profile::DEFAULT_PARTITION_GRID,
            &profiles,
            Some(&intf),
            &search,
        )?;
        println!("   max sustainable rate: {max:.0} app req/s (Poisson-gated)");

        let rate = 0.9 * max;
        let config = SimConfig {
            duration_s: 60.0,
            seed: 3,
            ..Default::default()
        };
        let report = run_app_scenario(
            &app,
            rate,
            Mode::GpuletInt,
            4,
            gpulets::profile::DEFAULT_PARTITION_GRID,
            &profiles,
            Some(&intf),
            &config,
        )?;
        for (model, stats) in &report.per_model {
            println!(
                "   {model:<5} arrivals {:>7}  completed {:>7}  violation rate {:.5}",
                stats.arrivals,
                stats.completed,
                report.violation_rate(model)
            );
        }
        println!(
            "   total violation fraction at 0.9×max: {:.5}",
            report.total_violation_fraction()
        );
    }
    Ok(())
}
