//! Experiment drivers behind the CLI and the examples: synthetic profile
//! generation, canonical schedulability sweeps, multi-model application
//! scenarios, max-throughput searches, and rate-fluctuation runs.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::InterferenceModel;
use crate::profile::{
    LatencyProfile, ProfileSet, SoloStats, DEFAULT_BATCH_GRID, DEFAULT_PARTITION_GRID,
};
use crate::scheduler::{ideal_exhaustive, plan, Mode, SchedulePlan, WorkloadModel, WorkloadSpec};
use crate::sim::{
    max_achievable_throughput, run, ArrivalKind, PlanSource, RateTrace, RequestStream, SimConfig,
    SimulationReport, ThroughputSearch,
};

// ── synthetic profiles ──────────────────────────────────────────────────────

/// Closed-form latency family: `L(b,p) = β + α·b / s(p/100)` with the
/// saturating speedup `s(x) = (1+σ)x / (1+σx)` (s(1)=1), so capacity curves
/// flatten at large partitions and a knee exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchetype {
    pub name: String,
    /// ms per batch element at the full GPU.
    pub alpha: f64,
    /// Fixed per-batch overhead in ms.
    pub beta: f64,
    /// Saturation strength; 0 = perfectly linear speedup.
    pub saturation: f64,
    /// Solo L2 utilization at the full GPU.
    pub l2_full: f64,
    /// Solo memory-bandwidth utilization at the full GPU.
    pub mem_full: f64,
}

impl ModelArchetype {
    pub fn new(name: impl Into<String>, alpha: f64, beta: f64, saturation: f64) -> Self {
        Self {
            name: name.into(),
            alpha,
            beta,
            saturation,
            l2_full: 0.5,
            mem_full: 0.5,
        }
    }

    pub fn speedup(&self, partition: u32) -> f64 {
        let x = partition as f64 / 100.0;
        (1.0 + self.saturation) * x / (1.0 + self.saturation * x)
    }

    pub fn latency_ms(&self, batch: u32, partition: u32) -> f64 {
        self.beta + self.alpha * batch as f64 / self.speedup(partition)
    }

    /// The evaluation's SLO rule: double the solo latency of the largest
    /// profiled batch on a whole GPU.
    pub fn slo_ms(&self, max_batch: u32) -> f64 {
        2.0 * self.latency_ms(max_batch, 100)
    }

    pub fn random(name: impl Into<String>, rng: &mut impl Rng) -> Self {
        Self {
            name: name.into(),
            alpha: rng.gen_range(0.1..2.0),
            beta: rng.gen_range(0.2..10.0),
            saturation: rng.gen_range(0.2..0.8),
            l2_full: rng.gen_range(0.1..0.9),
            mem_full: rng.gen_range(0.1..0.9),
        }
    }
}

/// The default five-model set with the published SLO constants
/// (le 5, goo 44, res 95, ssd 136, vgg 130 ms): β + 32·α = SLO/2 exactly.
pub fn default_archetypes() -> Vec<ModelArchetype> {
    let mut models = vec![
        ModelArchetype::new("le", (2.5 - 0.3) / 32.0, 0.3, 0.4),
        ModelArchetype::new("goo", (22.0 - 3.0) / 32.0, 3.0, 0.5),
        ModelArchetype::new("res", (47.5 - 6.0) / 32.0, 6.0, 0.5),
        ModelArchetype::new("ssd", (68.0 - 10.0) / 32.0, 10.0, 0.45),
        ModelArchetype::new("vgg", (65.0 - 8.0) / 32.0, 8.0, 0.6),
    ];
    for (m, (l2, mem)) in models.iter_mut().zip([
        (0.25, 0.20),
        (0.45, 0.35),
        (0.55, 0.50),
        (0.60, 0.55),
        (0.70, 0.65),
    ]) {
        m.l2_full = l2;
        m.mem_full = mem;
    }
    models
}

/// Generates validated profiles for the archetypes over the default batch
/// and partition grids. Utilizations scale monotonically with partition
/// size.
pub fn gen_synthetic_profiles(archetypes: &[ModelArchetype]) -> Result<ProfileSet> {
    let mut profiles = Vec::new();
    for a in archetypes {
        if a.alpha < 0.0 || a.beta <= 0.0 || a.saturation < 0.0 {
            return Err(Error::Config(format!(
                "archetype '{}': alpha must be >= 0, beta > 0, saturation >= 0",
                a.name
            )));
        }
        let mut entries = BTreeMap::new();
        let mut utils = BTreeMap::new();
        for &p in DEFAULT_PARTITION_GRID {
            let x = p as f64 / 100.0;
            let scale = 0.5 + 0.5 * x;
            utils.insert(
                p,
                SoloStats {
                    l2: (a.l2_full * scale).clamp(0.0, 1.0),
                    mem_bw: (a.mem_full * scale).clamp(0.0, 1.0),
                },
            );
            for &b in DEFAULT_BATCH_GRID {
                entries.insert((b, p), a.latency_ms(b, p));
            }
        }
        profiles.push(LatencyProfile::from_entries(&a.name, &entries, &utils)?);
    }
    Ok(ProfileSet::new(profiles))
}

/// Default profiles plus the workload models (name, SLO) they imply.
pub fn default_profiles() -> (ProfileSet, Vec<(String, f64)>) {
    let archetypes = default_archetypes();
    let profiles = gen_synthetic_profiles(&archetypes).expect("default archetypes are valid");
    let models = archetypes
        .iter()
        .map(|a| {
            (
                a.name.clone(),
                a.slo_ms(*DEFAULT_BATCH_GRID.last().unwrap()),
            )
        })
        .collect();
    (profiles, models)
}

/// SLO implied by a loaded profile under the doubling rule.
pub fn slo_from_profile(profile: &LatencyProfile) -> f64 {
    2.0 * profile
        .lookup_latency(profile.max_batch(), 100)
        .expect("profiles cover the full GPU")
}

// ── scenario suites ─────────────────────────────────────────────────────────

/// All per-model rate combinations over `levels`, excluding the all-zero
/// vector: exactly levels^M − 1 scenarios.
pub fn canonical_rate_vectors(num_models: usize, levels: &[f64]) -> Vec<Vec<f64>> {
    let total = levels.len().checked_pow(num_models as u32);
    let total = total.filter(|&t| t <= 1 << 20).unwrap_or_else(|| {
        panic!(
            "sweep of {}^{num_models} scenarios is too large; reduce levels or models",
            levels.len()
        )
    });
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut rates = vec![0.0; num_models];
        for slot in rates.iter_mut().rev() {
            *slot = levels[code % levels.len()];
            code /= levels.len();
        }
        if rates.iter().any(|&r| r > 0.0) {
            out.push(rates);
        }
    }
    out
}

/// The canonical sweep levels.
pub const CANONICAL_LEVELS: [f64; 4] = [0.0, 200.0, 400.0, 600.0];

/// The three named request scenarios over (le, goo, res, ssd, vgg).
pub fn named_scenario(name: &str) -> Result<Vec<(&'static str, f64)>> {
    match name {
        "equal" => Ok(vec![
            ("le", 50.0),
            ("goo", 50.0),
            ("res", 50.0),
            ("ssd", 50.0),
            ("vgg", 50.0),
        ]),
        "long-only" => Ok(vec![
            ("le", 0.0),
            ("goo", 0.0),
            ("res", 100.0),
            ("ssd", 100.0),
            ("vgg", 100.0),
        ]),
        "short-skew" => Ok(vec![
            ("le", 100.0),
            ("goo", 100.0),
            ("res", 100.0),
            ("ssd", 50.0),
            ("vgg", 50.0),
        ]),
        other => Err(Error::Config(format!(
            "unknown scenario '{other}' (expected equal, long-only or short-skew)"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVerdict {
    Schedulable,
    NotSchedulable,
    BudgetExceeded,
}

impl std::fmt::Display for SweepVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepVerdict::Schedulable => write!(f, "Schedulable"),
            SweepVerdict::NotSchedulable => write!(f, "NotSchedulable"),
            SweepVerdict::BudgetExceeded => write!(f, "BudgetExceeded"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub scenario_id: usize,
    pub rates: Vec<f64>,
    pub verdicts: BTreeMap<Mode, SweepVerdict>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub model_names: Vec<String>,
    pub modes: Vec<Mode>,
    pub num_gpus: u32,
    pub outcomes: Vec<SweepOutcome>,
}

impl SweepResult {
    pub fn schedulable_count(&self, mode: Mode) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.verdicts.get(&mode) == Some(&SweepVerdict::Schedulable))
            .count()
    }

    pub fn completed_count(&self, mode: Mode) -> usize {
        self.outcomes
            .iter()
            .filter(|o| {
                matches!(
                    o.verdicts.get(&mode),
                    Some(SweepVerdict::Schedulable) | Some(SweepVerdict::NotSchedulable)
                )
            })
            .count()
    }

    /// `scenario_id,mode,verdict` rows behind `#` configuration lines.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(
            writer,
            "# sweep gpus={} models={} modes={} scenarios={}",
            self.num_gpus,
            self.model_names.join("+"),
            self.modes
                .iter()
                .map(Mode::as_str)
                .collect::<Vec<_>>()
                .join("+"),
            self.outcomes.len()
        )?;
        for mode in &self.modes {
            writeln!(writer, "# total {}={}", mode, self.schedulable_count(*mode))?;
        }
        writeln!(writer, "scenario_id,mode,verdict")?;
        for outcome in &self.outcomes {
            for mode in &self.modes {
                if let Some(v) = outcome.verdicts.get(mode) {
                    writeln!(writer, "{},{},{}", outcome.scenario_id, mode, v)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs each scheduler mode over each rate vector (scenarios run in
/// parallel; output order is deterministic).
#[allow(clippy::too_many_arguments)]
pub fn sweep_schedulability(
    models: &[(String, f64)],
    rate_vectors: &[Vec<f64>],
    modes: &[Mode],
    num_gpus: u32,
    grid: &[u32],
    profiles: &ProfileSet,
    intf: &InterferenceModel,
    ideal_budget: u64,
) -> Result<SweepResult> {
    crate::scheduler::validate_grid(grid)?;
    let outcomes: Vec<SweepOutcome> = rate_vectors
        .par_iter()
        .enumerate()
        .map(|(scenario_id, rates)| {
            let workload: Vec<WorkloadModel> = models
                .iter()
                .zip(rates.iter())
                .map(|((name, slo), &rate)| WorkloadModel {
                    name: name.clone(),
                    slo_ms: *slo,
                    rate,
                })
                .collect();
            let mut verdicts = BTreeMap::new();
            for &mode in modes {
                let mut spec = WorkloadSpec::new(workload.clone(), num_gpus, mode);
                spec.grid = grid.to_vec();
                let verdict = match mode {
                    Mode::Ideal => match ideal_exhaustive(&spec, profiles, intf, ideal_budget) {
                        Ok(p) if p.verdict.is_schedulable() => SweepVerdict::Schedulable,
                        Ok(_) => SweepVerdict::NotSchedulable,
                        Err(Error::BudgetExceeded { .. }) => SweepVerdict::BudgetExceeded,
                        Err(e) => return Err(e),
                    },
                    _ => {
                        let p = plan(&spec, profiles, Some(intf))?;
                        if p.verdict.is_schedulable() {
                            SweepVerdict::Schedulable
                        } else {
                            SweepVerdict::NotSchedulable
                        }
                    }
                };
                verdicts.insert(mode, verdict);
            }
            Ok(SweepOutcome {
                scenario_id,
                rates: rates.clone(),
                verdicts,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        model_names: models.iter().map(|(n, _)| n.clone()).collect(),
        modes: modes.to_vec(),
        num_gpus,
        outcomes,
    })
}

// ── multi-model applications ────────────────────────────────────────────────

/// An application request fans out into fixed per-model multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct AppScenario {
    pub name: String,
    pub fanout: Vec<(String, f64)>,
}

impl AppScenario {
    /// Game streaming analysis: six digit recognitions plus one image
    /// recognition per request.
    pub fn game() -> Self {
        Self {
            name: "game".into(),
            fanout: vec![("le".into(), 6.0), ("res".into(), 1.0)],
        }
    }

    /// Traffic surveillance: detection followed by two recognitions.
    pub fn traffic() -> Self {
        Self {
            name: "traffic".into(),
            fanout: vec![
                ("ssd".into(), 1.0),
                ("goo".into(), 1.0),
                ("vgg".into(), 1.0),
            ],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "game" => Ok(Self::game()),
            "traffic" => Ok(Self::traffic()),
            other => Err(Error::Config(format!(
                "unknown app '{other}' (expected game or traffic)"
            ))),
        }
    }

    /// The app SLO: the doubling rule applied to the longest component
    /// model, i.e. the max of the components' profile-derived SLOs.
    pub fn app_slo_ms(&self, profiles: &ProfileSet) -> Result<f64> {
        let mut slo: f64 = 0.0;
        for (model, _) in &self.fanout {
            slo = slo.max(slo_from_profile(profiles.get(model)?));
        }
        Ok(slo)
    }

    /// Per-model workload induced by `rate` app requests per second; every
    /// component serves under the app SLO.
    pub fn workload(&self, rate: f64, profiles: &ProfileSet) -> Result<Vec<WorkloadModel>> {
        let slo = self.app_slo_ms(profiles)?;
        Ok(self
            .fanout
            .iter()
            .map(|(model, mult)| WorkloadModel {
                name: model.clone(),
                slo_ms: slo,
                rate: rate * mult,
            })
            .collect())
    }
}

/// Schedules and simulates an app scenario at `rate` app requests/s.
/// A zero rate yields an empty report.
#[allow(clippy::too_many_arguments)]
pub fn run_app_scenario(
    app: &AppScenario,
    rate: f64,
    mode: Mode,
    num_gpus: u32,
    grid: &[u32],
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    config: &SimConfig,
) -> Result<SimulationReport> {
    let models = app.workload(rate, profiles)?;
    if rate <= 0.0 {
        return Ok(SimulationReport {
            per_model: models
                .iter()
                .map(|m| (m.name.clone(), Default::default()))
                .collect(),
            periods: Vec::new(),
            reorgs: Vec::new(),
            skipped_reschedules: 0,
            duration_s: 0.0,
            period_s: config.scheduling_period_s,
            config_echo: format!("app={} rate=0 {}", app.name, "empty"),
        });
    }
    let mut spec = WorkloadSpec::new(models.clone(), num_gpus, mode);
    spec.grid = grid.to_vec();
    let schedule = plan(&spec, profiles, intf)?;
    if !schedule.verdict.is_schedulable() {
        return Err(Error::Config(format!(
            "app '{}' at rate {rate} is {} in mode {mode}",
            app.name, schedule.verdict
        )));
    }
    let streams: Vec<RequestStream> = models
        .iter()
        .enumerate()
        .filter(|(_, m)| m.rate > 0.0)
        .map(|(i, m)| RequestStream {
            model: m.name.clone(),
            trace: RateTrace::constant(m.rate),
            seed: config.seed.wrapping_add(i as u64 + 1),
            kind: ArrivalKind::Poisson,
        })
        .collect();
    run(
        PlanSource::Static(&schedule),
        &streams,
        profiles,
        intf,
        config,
    )
}

/// Max sustainable app request rate via the throughput search.
pub fn app_max_throughput(
    app: &AppScenario,
    mode: Mode,
    num_gpus: u32,
    grid: &[u32],
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    search: &ThroughputSearch,
) -> Result<f64> {
    let base = app.workload(1.0, profiles)?;
    let total_mult: f64 = app.fanout.iter().map(|(_, m)| m).sum();
    let aggregate =
        max_achievable_throughput(&base, num_gpus, mode, grid, profiles, intf, None, search)?;
    // the search reports the aggregate per-model rate; app rate divides out
    Ok(aggregate / total_mult)
}

// ── rate fluctuation ────────────────────────────────────────────────────────

/// Live-mode simulation over per-model rate traces; SLOs derive from the
/// profiles via the doubling rule.
pub fn fluctuation_experiment(
    traces: &BTreeMap<String, RateTrace>,
    mode: Mode,
    num_gpus: u32,
    grid: &[u32],
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    config: &SimConfig,
) -> Result<SimulationReport> {
    crate::scheduler::validate_grid(grid)?;
    let slos: BTreeMap<String, f64> = traces
        .keys()
        .map(|m| profiles.get(m).map(|p| (m.clone(), slo_from_profile(p))))
        .collect::<Result<_>>()?;
    let streams: Vec<RequestStream> = traces
        .iter()
        .enumerate()
        .map(|(i, (model, trace))| RequestStream {
            model: model.clone(),
            trace: trace.clone(),
            seed: config.seed.wrapping_add(1000 + i as u64),
            kind: ArrivalKind::Poisson,
        })
        .collect();
    let scheduler = |rates: &BTreeMap<String, f64>| -> Result<SchedulePlan> {
        let models: Vec<WorkloadModel> = rates
            .iter()
            .map(|(name, &rate)| WorkloadModel {
                name: name.clone(),
                slo_ms: slos[name],
                rate,
            })
            .collect();
        if !models.iter().any(|m| m.rate > 0.0) {
            return Ok(empty_plan(num_gpus, mode));
        }
        let mut spec = WorkloadSpec::new(models, num_gpus, mode);
        spec.grid = grid.to_vec();
        plan(&spec, profiles, intf)
    };
    run(
        PlanSource::Live(&scheduler),
        &streams,
        profiles,
        intf,
        config,
    )
}

/// A schedulable plan allocating nothing: one whole, lane-free gpulet per
/// GPU (the idle-window outcome).
fn empty_plan(num_gpus: u32, mode: Mode) -> SchedulePlan {
    SchedulePlan {
        verdict: crate::scheduler::Verdict::Schedulable,
        mode,
        num_gpus,
        gpus: (0..num_gpus)
            .map(|gpu_id| crate::scheduler::GpuPlan {
                gpu_id,
                gpulets: vec![crate::scheduler::GpuletSnapshot {
                    id: gpu_id,
                    size: 100,
                    lanes: Vec::new(),
                }],
            })
            .collect(),
        assigned: BTreeMap::new(),
        optimistic_placements: 0,
    }
}

/// A two-wave trace shape for fluctuation studies: rises from `base` to
/// `peak` and back, twice, the second wave `second_scale` times taller.
pub fn two_wave_trace(
    base: f64,
    peak: f64,
    duration_s: f64,
    second_scale: f64,
    steps: usize,
) -> RateTrace {
    let steps = steps.max(2);
    let mut segments = Vec::new();
    let half = duration_s / 2.0;
    for wave in 0..2 {
        let scale = if wave == 0 { 1.0 } else { second_scale };
        let start = wave as f64 * half;
        for i in 0..steps {
            let frac = i as f64 / (steps - 1) as f64;
            // triangular rise and fall
            let level = 1.0 - (2.0 * frac - 1.0).abs();
            let rate = base + (peak * scale - base) * level;
            segments.push((start + frac * half * 0.96, rate.max(0.0)));
        }
    }
    RateTrace::new(segments).expect("wave segments are valid")
}

// ── co-run sample generation over a model set ───────────────────────────────

/// Synthesizes co-run samples for the profiled model pairs across partition
/// splits, with observations drawn from `truth` plus relative noise —
/// standing in for measured co-run data.
pub fn corun_samples_for_profiles(
    profiles: &ProfileSet,
    truth: &InterferenceModel,
    per_pair: usize,
    noise_sigma: f64,
    seed: u64,
) -> Vec<crate::interference::CoRunSample> {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let names: Vec<&str> = profiles.names().collect();
    let splits: Vec<(u32, u32)> = vec![(20, 80), (40, 60), (50, 50), (60, 40), (80, 20)];
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in names.iter().skip(i) {
            let pa = profiles.get(a).unwrap();
            let pb = profiles.get(b).unwrap();
            for k in 0..per_pair {
                let (sa, sb) = splits[k % splits.len()];
                let (Ok(ua), Ok(ub)) = (pa.solo_stats(sa), pb.solo_stats(sb)) else {
                    continue;
                };
                let base = truth.raw_predict(ua, ub);
                let noise = if noise_sigma > 0.0 {
                    noise_sigma * normal.sample(&mut rng)
                } else {
                    0.0
                };
                out.push(crate::interference::CoRunSample {
                    l2_a: ua.l2,
                    l2_b: ub.l2,
                    mem_a: ua.mem_bw,
                    mem_b: ub.mem_bw,
                    observed_factor: (base * (1.0 + noise)).max(1e-3),
                });
            }
        }
    }
    out
}

/// Compares elastic+interference against the exhaustive oracle on a set of
/// rate vectors; returns (sweep, elastic count, ideal count over completed).
pub fn compare_ideal(
    models: &[(String, f64)],
    rate_vectors: &[Vec<f64>],
    num_gpus: u32,
    grid: &[u32],
    profiles: &ProfileSet,
    intf: &InterferenceModel,
    ideal_budget: u64,
) -> Result<SweepResult> {
    sweep_schedulability(
        models,
        rate_vectors,
        &[Mode::GpuletInt, Mode::Ideal],
        num_gpus,
        grid,
        profiles,
        intf,
        ideal_budget,
    )
}

/// The interference model experiments default to when no co-run samples are
/// supplied: the mild planted truth fitted on synthetic samples over the
/// loaded profiles.
pub fn default_fitted_interference(profiles: &ProfileSet, seed: u64) -> InterferenceModel {
    let truth = InterferenceModel::default_mild();
    let samples = corun_samples_for_profiles(profiles, &truth, 50, 0.02, seed);
    crate::interference::fit(&samples, 0.7, seed)
        .map(|r| r.model)
        .unwrap_or(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_suite_sizes() {
        let levels = CANONICAL_LEVELS;
        assert_eq!(canonical_rate_vectors(5, &levels).len(), 1023);
        // 2 levels, 3 models: 2^3 − 1
        let small = canonical_rate_vectors(3, &[0.0, 100.0]);
        assert_eq!(small.len(), 7);
        let expected: Vec<Vec<f64>> = vec![
            vec![0.0, 0.0, 100.0],
            vec![0.0, 100.0, 0.0],
            vec![0.0, 100.0, 100.0],
            vec![100.0, 0.0, 0.0],
            vec![100.0, 0.0, 100.0],
            vec![100.0, 100.0, 0.0],
            vec![100.0, 100.0, 100.0],
        ];
        assert_eq!(small, expected);
    }

    #[test]
    fn synthetic_zero_alpha_is_constant() {
        let a = ModelArchetype::new("flat", 0.0, 7.5, 0.5);
        for &b in DEFAULT_BATCH_GRID {
            for &p in DEFAULT_PARTITION_GRID {
                assert_eq!(a.latency_ms(b, p), 7.5);
            }
        }
        // still loads through the validators
        gen_synthetic_profiles(&[a]).unwrap();
    }

    #[test]
    fn synthetic_profiles_pass_validators_and_round_trip() {
        let profiles = gen_synthetic_profiles(&default_archetypes()).unwrap();
        let mut buf = Vec::new();
        profiles.write(&mut buf).unwrap();
        let back = ProfileSet::load(buf.as_slice()).unwrap();
        assert_eq!(profiles, back);
    }

    #[test]
    fn doubling_alpha_doubles_latency_minus_beta() {
        let a1 = ModelArchetype::new("m", 0.7, 4.0, 0.5);
        let a2 = ModelArchetype::new("m", 1.4, 4.0, 0.5);
        for &b in DEFAULT_BATCH_GRID {
            for &p in DEFAULT_PARTITION_GRID {
                let d1 = a1.latency_ms(b, p) - 4.0;
                let d2 = a2.latency_ms(b, p) - 4.0;
                assert!((d2 - 2.0 * d1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_slos_match_published_constants() {
        let (_, models) = default_profiles();
        let slos: BTreeMap<&str, f64> = models.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        assert_eq!(slos["le"], 5.0);
        assert_eq!(slos["goo"], 44.0);
        assert_eq!(slos["res"], 95.0);
        assert_eq!(slos["ssd"], 136.0);
        assert_eq!(slos["vgg"], 130.0);
    }

    #[test]
    fn game_fanout_multiplies_lenet_by_six() {
        let (profiles, _) = default_profiles();
        let models = AppScenario::game().workload(10.0, &profiles).unwrap();
        let le = models.iter().find(|m| m.name == "le").unwrap();
        let res = models.iter().find(|m| m.name == "res").unwrap();
        assert_eq!(le.rate, 60.0);
        assert_eq!(res.rate, 10.0);
        // app SLO = max component SLO (res: 95)
        assert_eq!(le.slo_ms, 95.0);
        assert_eq!(res.slo_ms, 95.0);
    }

    #[test]
    fn traffic_app_slo_is_ssd() {
        let (profiles, _) = default_profiles();
        assert_eq!(AppScenario::traffic().app_slo_ms(&profiles).unwrap(), 136.0);
    }

    #[test]
    fn traffic_at_zero_rate_is_empty() {
        let (profiles, _) = default_profiles();
        let report = run_app_scenario(
            &AppScenario::traffic(),
            0.0,
            Mode::Gpulet,
            4,
            crate::profile::DEFAULT_PARTITION_GRID,
            &profiles,
            None,
            &SimConfig::default(),
        )
        .unwrap();
        assert!(report.per_model.values().all(|s| s.arrivals == 0));
    }
}
