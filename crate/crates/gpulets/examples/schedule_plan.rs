//! Schedules one workload and prints the plan dump: the verdict line
//! followed by the per-GPU gpulet/lane layout as JSON.
//!
//! Run with: cargo run --example schedule_plan [workload.json]
//!
//! Without an argument, a built-in workload over the default synthetic
//! profiles is used. The JSON format matches `WorkloadSpec`:
//! {"models":[{"name":"vgg","slo_ms":130.0,"rate":200.0}],"num_gpus":4,"mode":"gpulet+int"}

use gpulets::experiments::{default_fitted_interference, default_profiles};
use gpulets::scheduler::{plan, Mode, WorkloadModel, WorkloadSpec};

fn main() -> gpulets::Result<()> {
    let (profiles, models) = default_profiles();
    let spec = match std::env::args().nth(1) {
        Some(path) => WorkloadSpec::from_json_file(path)?,
        None => WorkloadSpec::new(
            models
                .iter()
                .map(|(name, slo)| WorkloadModel {
                    name: name.clone(),
                    slo_ms: *slo,
                    rate: match name.as_str() {
                        "le" => 400.0,
                        "goo" => 200.0,
                        _ => 100.0,
                    },
                })
                .collect(),
            2,
            Mode::GpuletInt,
        ),
    };
    let intf = default_fitted_interference(&profiles, 1);
    let schedule = plan(&spec, &profiles, Some(&intf))?;
    println!("{}", schedule.dump());
    eprintln!(
        "\nutilized partition sum: {} | assigned: {:?}",
        schedule.utilized_partition_sum(),
        schedule.assigned
    );
    Ok(())
}
