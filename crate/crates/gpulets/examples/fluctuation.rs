//! Live-mode simulation under fluctuating request rates: two traffic waves
//! (the second 30% taller), with the scheduler re-invoked every 20 s on
//! EWMA-tracked rates and partition reorganizations costing 10–15 s during
//! which the old layout keeps serving.
//!
//! Run with: cargo run --release --example fluctuation

use std::collections::BTreeMap;

use gpulets::experiments::{
    default_fitted_interference, default_profiles, fluctuation_experiment, two_wave_trace,
};
use gpulets::scheduler::Mode;
use gpulets::sim::SimConfig;

fn main() -> gpulets::Result<()> {
    let (profiles, models) = default_profiles();
    let intf = default_fitted_interference(&profiles, 1);

    let mut traces = BTreeMap::new();
    for (name, _) in &models {
        let peak = match name.as_str() {
            "le" => 700.0,
            "goo" => 280.0,
            _ => 110.0,
        };
        traces.insert(
            name.clone(),
            two_wave_trace(0.2 * peak, peak, 1200.0, 1.3, 40),
        );
    }

    let config = SimConfig {
        duration_s: 1200.0,
        seed: 5,
        ewma_alpha: 0.7,
        ..Default::default()
    };
    let report = fluctuation_experiment(
        &traces,
        Mode::GpuletInt,
        4,
        gpulets::profile::DEFAULT_PARTITION_GRID,
        &profiles,
        Some(&intf),
        &config,
    )?;

    println!(
        "{:<7} {:>12} {:>10} {:>10}",
        "period", "offered", "utilized", "violation%"
    );
    let periods = (config.duration_s / config.scheduling_period_s) as u64;
    for k in 0..periods {
        let t = k as f64 * config.scheduling_period_s + 10.0;
        let offered: f64 = traces.values().map(|tr| tr.rate_at(t)).sum();
        let row = report.periods.iter().find(|r| r.period == k).unwrap();
        let viol: f64 = report
            .periods
            .iter()
            .filter(|r| r.period == k)
            .map(|r| r.violation_rate)
            .fold(0.0, f64::max);
        println!(
            "{k:<7} {offered:>12.0} {:>10} {:>9.3}%",
            row.utilized_partition_sum,
            100.0 * viol
        );
    }
    println!(
        "\ntotal violation fraction {:.5} | {} reorganizations | {} skipped reschedules",
        report.total_violation_fraction(),
        report.reorgs.len(),
        report.skipped_reschedules
    );
    for reorg in &report.reorgs {
        println!(
            "  reorg decided at {:.0}s, active at {:.1}s",
            reorg.decided_at_s, reorg.activates_at_s
        );
    }
    Ok(())
}
