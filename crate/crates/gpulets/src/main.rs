//! Experiment CLI: schedulability sweeps, max-throughput searches,
//! multi-model app scenarios, rate-fluctuation runs, interference fitting,
//! and synthetic profile generation. All heavy lifting lives in the library;
//! this binary only parses flags, wires files, and prints summaries.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use gpulets::error::Result;
use gpulets::experiments::{
    app_max_throughput, canonical_rate_vectors, compare_ideal, default_archetypes,
    default_fitted_interference, default_profiles, fluctuation_experiment, gen_synthetic_profiles,
    named_scenario, run_app_scenario, slo_from_profile, sweep_schedulability, AppScenario,
    ModelArchetype, SweepVerdict, CANONICAL_LEVELS,
};
use gpulets::interference::{fit, load_samples, InterferenceModel};
use gpulets::profile::{ProfileSet, DEFAULT_PARTITION_GRID};
use gpulets::scheduler::{Mode, WorkloadModel, WorkloadSpec, DEFAULT_IDEAL_BUDGET};
use gpulets::sim::{load_traces, max_achievable_throughput, SimConfig, ThroughputSearch};

#[derive(Parser)]
#[command(
    name = "gpulets",
    about = "SLO-aware multi-model GPU inference scheduling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Profile CSV (model,batch,partition_pct,latency_ms,l2_util,mem_bw_util);
    /// omitted = built-in synthetic five-model set.
    #[arg(long)]
    profiles: Option<PathBuf>,

    /// Physical GPU count.
    #[arg(long, default_value_t = 4)]
    gpus: u32,

    /// Partition grid (percent, comma separated, complement-closed).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<u32>>,

    /// Master seed for anything randomized.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Co-run sample CSV to fit the interference model from; omitted = a
    /// built-in synthetic fit over the loaded profiles.
    #[arg(long)]
    corun_samples: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Count schedulable scenarios per mode over the canonical rate sweep.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Scheduler modes to run.
        #[arg(long, value_delimiter = ',', default_values_t = vec![Mode::Sbp, Mode::Gpulet, Mode::GpuletInt])]
        modes: Vec<Mode>,
        /// Per-model rate levels of the sweep.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// State budget for the ideal oracle.
        #[arg(long, default_value_t = DEFAULT_IDEAL_BUDGET)]
        budget: u64,
    },
    /// Max achievable throughput of a request scenario via binary search.
    Throughput {
        #[command(flatten)]
        common: CommonArgs,
        /// Named scenario: equal, long-only or short-skew.
        #[arg(long, conflicts_with = "workload")]
        scenario: Option<String>,
        /// Workload spec JSON (models with slo_ms and base rates).
        #[arg(long)]
        workload: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![Mode::Sbp, Mode::Gpulet, Mode::GpuletInt])]
        modes: Vec<Mode>,
    },
    /// Schedule and simulate a multi-model application.
    App {
        #[command(flatten)]
        common: CommonArgs,
        /// Application name: game or traffic.
        #[arg(long)]
        app: String,
        #[arg(long, default_value_t = Mode::GpuletInt)]
        mode: Mode,
        /// App request rate; omitted = search the max sustainable rate and
        /// simulate at 90% of it.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
    },
    /// Live-mode simulation over a piecewise-constant rate trace.
    Fluctuate {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace CSV: time_s,model,rate.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = Mode::GpuletInt)]
        mode: Mode,
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
    },
    /// Fit the linear interference model and emit its validation error CDF.
    FitInterference {
        /// Co-run sample CSV: l2_a,l2_b,mem_a,mem_b,observed_factor.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        train_frac: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic latency/utilization profiles.
    GenProfiles {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generate N random archetypes instead of the default five models.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare elastic+interference against the exhaustive ideal oracle.
    CompareIdeal {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_IDEAL_BUDGET)]
        budget: u64,
    },
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

/// Loaded profiles plus (model, SLO) pairs under the doubling rule.
fn load_profile_set(common: &CommonArgs) -> Result<(ProfileSet, Vec<(String, f64)>)> {
    let profiles = match &common.profiles {
        Some(path) => ProfileSet::load_path(path)?,
        None => default_profiles().0,
    };
    let models = profiles
        .iter()
        .map(|p| (p.name().to_string(), slo_from_profile(p)))
        .collect();
    Ok((profiles, models))
}

fn load_interference(common: &CommonArgs, profiles: &ProfileSet) -> Result<InterferenceModel> {
    match &common.corun_samples {
        Some(path) => {
            let samples = load_samples(File::open(path)?)?;
            Ok(fit(&samples, 0.7, common.seed)?.model)
        }
        None => Ok(default_fitted_interference(profiles, common.seed)),
    }
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(std::io::stdout()),
    })
}

fn grid_of(common: &CommonArgs) -> Vec<u32> {
    common
        .grid
        .clone()
        .unwrap_or_else(|| DEFAULT_PARTITION_GRID.to_vec())
}

fn scenario_workload(name: &str, models: &[(String, f64)]) -> Result<Vec<WorkloadModel>> {
    let rates = named_scenario(name)?;
    Ok(models
        .iter()
        .map(|(n, s)| {
            let rate = rates
                .iter()
                .find(|(rn, _)| rn == n)
                .map(|(_, r)| *r)
                .unwrap_or(0.0);
            WorkloadModel {
                name: n.clone(),
                slo_ms: *s,
                rate,
            }
        })
        .collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep {
            common,
            modes,
            levels,
            budget,
        } => {
            let (profiles, models) = load_profile_set(&common)?;
            let intf = load_interference(&common, &profiles)?;
            let levels = levels.unwrap_or_else(|| CANONICAL_LEVELS.to_vec());
            let vectors = canonical_rate_vectors(models.len(), &levels);
            let result = sweep_schedulability(
                &models,
                &vectors,
                &modes,
                common.gpus,
                &grid_of(&common),
                &profiles,
                &intf,
                budget,
            )?;
            let mut out = open_out(&common.out)?;
            result.write_csv(&mut out)?;
            for mode in &modes {
                eprintln!(
                    "{mode}: {}/{} schedulable",
                    result.schedulable_count(*mode),
                    result.outcomes.len()
                );
            }
        }
        Command::Throughput {
            common,
            scenario,
            workload,
            modes,
        } => {
            let (profiles, models) = load_profile_set(&common)?;
            let intf = load_interference(&common, &profiles)?;
            let (label, base) = match (&scenario, &workload) {
                (Some(name), None) => (name.clone(), scenario_workload(name, &models)?),
                (None, Some(path)) => {
                    let spec = WorkloadSpec::from_json_file(path)?;
                    (path.display().to_string(), spec.models)
                }
                _ => ("equal".to_string(), scenario_workload("equal", &models)?),
            };
            let search = ThroughputSearch {
                seed: common.seed,
                ..Default::default()
            };
            let mut out = open_out(&common.out)?;
            writeln!(out, "# throughput scenario={label} gpus={}", common.gpus)?;
            writeln!(out, "scenario,mode,max_throughput_req_s")?;
            for mode in modes {
                let intf_opt = matches!(mode, Mode::GpuletInt | Mode::Ideal).then_some(&intf);
                let rate = max_achievable_throughput(
                    &base,
                    common.gpus,
                    mode,
                    &grid_of(&common),
                    &profiles,
                    intf_opt,
                    None,
                    &search,
                )?;
                writeln!(out, "{label},{mode},{rate}")?;
                eprintln!("{mode}: {rate:.1} req/s");
            }
        }
        Command::App {
            common,
            app,
            mode,
            rate,
            duration,
        } => {
            let (profiles, _) = load_profile_set(&common)?;
            let intf = load_interference(&common, &profiles)?;
            let app = AppScenario::by_name(&app)?;
            let intf_opt = matches!(mode, Mode::GpuletInt | Mode::Ideal).then_some(&intf);
            let rate = match rate {
                Some(r) => r,
                None => {
                    let search = ThroughputSearch {
                        seed: common.seed,
                        arrivals: gpulets::sim::ArrivalKind::Poisson,
                        ..Default::default()
                    };
                    let max = app_max_throughput(
                        &app,
                        mode,
                        common.gpus,
                        &grid_of(&common),
                        &profiles,
                        intf_opt,
                        &search,
                    )?;
                    eprintln!(
                        "max sustainable {} rate: {max:.1} req/s (Poisson-gated)",
                        app.name
                    );
                    max * 0.9
                }
            };
            let config = SimConfig {
                duration_s: duration,
                seed: common.seed,
                ..Default::default()
            };
            let report = run_app_scenario(
                &app,
                rate,
                mode,
                common.gpus,
                &grid_of(&common),
                &profiles,
                intf_opt,
                &config,
            )?;
            let mut out = open_out(&common.out)?;
            report.write_csv(&mut out)?;
            eprintln!(
                "{} at {rate:.1} req/s: violation fraction {:.5}",
                app.name,
                report.total_violation_fraction()
            );
        }
        Command::Fluctuate {
            common,
            trace,
            mode,
            duration,
        } => {
            let (profiles, _) = load_profile_set(&common)?;
            let intf = load_interference(&common, &profiles)?;
            let traces = load_traces(File::open(trace)?)?;
            let intf_opt = matches!(mode, Mode::GpuletInt | Mode::Ideal).then_some(&intf);
            let config = SimConfig {
                duration_s: duration,
                seed: common.seed,
                ..Default::default()
            };
            let report = fluctuation_experiment(
                &traces,
                mode,
                common.gpus,
                &grid_of(&common),
                &profiles,
                intf_opt,
                &config,
            )?;
            let mut out = open_out(&common.out)?;
            report.write_csv(&mut out)?;
            eprintln!(
                "violation fraction {:.5}, {} reorganizations, {} skipped reschedules",
                report.total_violation_fraction(),
                report.reorgs.len(),
                report.skipped_reschedules
            );
        }
        Command::FitInterference {
            samples,
            train_frac,
            seed,
            out,
        } => {
            let samples = load_samples(File::open(samples)?)?;
            let report = fit(&samples, train_frac, seed)?;
            let mut w = open_out(&out)?;
            writeln!(
                w,
                "# fit train={} validation={} coefficients={:?}",
                report.train_count, report.validation_count, report.model.coef
            )?;
            report.validation.write_csv(&mut w)?;
            eprintln!(
                "c = {:?}; p90 relative error {:.4}, p95 {:.4}",
                report.model.coef,
                report.validation.quantile(0.90),
                report.validation.quantile(0.95)
            );
        }
        Command::GenProfiles { out, random, seed } => {
            let archetypes = match random {
                Some(n) => {
                    use rand::SeedableRng;
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                    (0..n)
                        .map(|i| ModelArchetype::random(format!("model{i}"), &mut rng))
                        .collect()
                }
                None => default_archetypes(),
            };
            let profiles = gen_synthetic_profiles(&archetypes)?;
            let mut w = open_out(&out)?;
            profiles.write(&mut w)?;
            eprintln!("wrote {} model profiles", profiles.len());
        }
        Command::CompareIdeal {
            common,
            levels,
            budget,
        } => {
            let (profiles, models) = load_profile_set(&common)?;
            let intf = load_interference(&common, &profiles)?;
            let levels = levels.unwrap_or_else(|| CANONICAL_LEVELS.to_vec());
            let vectors = canonical_rate_vectors(models.len(), &levels);
            let result = compare_ideal(
                &models,
                &vectors,
                common.gpus,
                &grid_of(&common),
                &profiles,
                &intf,
                budget,
            )?;
            let mut out = open_out(&common.out)?;
            result.write_csv(&mut out)?;
            let ideal = result.schedulable_count(Mode::Ideal);
            let elastic = result.schedulable_count(Mode::GpuletInt);
            let completed = result.completed_count(Mode::Ideal);
            let budget_hits = result
                .outcomes
                .iter()
                .filter(|o| o.verdicts.get(&Mode::Ideal) == Some(&SweepVerdict::BudgetExceeded))
                .count();
            eprintln!(
                "ideal {ideal} vs gpulet+int {elastic} schedulable ({completed} oracle-completed, {budget_hits} over budget)"
            );
            if ideal > 0 {
                eprintln!(
                    "heuristic reaches {:.1}% of the oracle",
                    100.0 * elastic as f64 / ideal as f64
                );
            }
        }
    }
    Ok(())
}
