//! Schedulers producing [`SchedulePlan`]s from (profiles, rates, SLOs):
//! elastic partitioning (with and without interference awareness), the
//! squishy-bin-packing temporal-sharing baseline, and an exhaustive ideal
//! oracle for small instances.

mod engine;
mod ideal;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::InterferenceModel;
use crate::partition::Lane;
use crate::profile::{ProfileSet, DEFAULT_PARTITION_GRID};

pub use engine::validate_plan_gpus;
pub use ideal::ideal_exhaustive;

/// Default state budget for the exhaustive oracle.
pub const DEFAULT_IDEAL_BUDGET: u64 = 2_000_000;

/// Residual request rate below which a model counts as fully assigned.
pub(crate) const RATE_DONE_EPS: f64 = 1e-6;

/// Scheduling algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "sbp")]
    Sbp,
    #[serde(rename = "gpulet")]
    Gpulet,
    #[serde(rename = "gpulet+int")]
    GpuletInt,
    #[serde(rename = "ideal")]
    Ideal,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Sbp, Mode::Gpulet, Mode::GpuletInt, Mode::Ideal];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sbp => "sbp",
            Mode::Gpulet => "gpulet",
            Mode::GpuletInt => "gpulet+int",
            Mode::Ideal => "ideal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sbp" => Ok(Mode::Sbp),
            "gpulet" => Ok(Mode::Gpulet),
            "gpulet+int" | "gpulet_int" => Ok(Mode::GpuletInt),
            "ideal" => Ok(Mode::Ideal),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected sbp, gpulet, gpulet+int or ideal)"
            ))),
        }
    }
}

/// One model's demand within a workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadModel {
    pub name: String,
    pub slo_ms: f64,
    pub rate: f64,
}

fn default_grid() -> Vec<u32> {
    DEFAULT_PARTITION_GRID.to_vec()
}

/// A scheduling problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub models: Vec<WorkloadModel>,
    pub num_gpus: u32,
    pub mode: Mode,
    #[serde(default = "default_grid")]
    pub grid: Vec<u32>,
}

impl WorkloadSpec {
    pub fn new(models: Vec<WorkloadModel>, num_gpus: u32, mode: Mode) -> Self {
        Self {
            models,
            num_gpus,
            mode,
            grid: default_grid(),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_gpus == 0 {
            return Err(Error::Config("num_gpus must be >= 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("workload has no models".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Config(format!("duplicate model name '{}'", m.name)));
            }
            if m.slo_ms <= 0.0 {
                return Err(Error::Config(format!(
                    "model '{}': slo_ms must be > 0",
                    m.name
                )));
            }
            if m.rate < 0.0 {
                return Err(Error::Config(format!(
                    "model '{}': rate must be >= 0",
                    m.name
                )));
            }
        }
        if !self.models.iter().any(|m| m.rate > 0.0) {
            return Err(Error::Config(
                "at least one model needs a positive rate".into(),
            ));
        }
        validate_grid(&self.grid)?;
        Ok(())
    }

    /// Models with positive rate, sorted by rate descending (name ascending
    /// on ties) — the allocation order.
    pub(crate) fn active_models_sorted(&self) -> Vec<&WorkloadModel> {
        let mut active: Vec<&WorkloadModel> = self.models.iter().filter(|m| m.rate > 0.0).collect();
        active.sort_by(|a, b| {
            b.rate
                .partial_cmp(&a.rate)
                .unwrap()
                .then_with(|| a.name.cmp(&b.name))
        });
        active
    }

    /// Every model must be profiled across the whole grid.
    pub(crate) fn check_profile_coverage(&self, profiles: &ProfileSet) -> Result<()> {
        for m in &self.models {
            let profile = profiles.get(&m.name)?;
            for &p in &self.grid {
                if !profile.partitions().contains(&p) {
                    return Err(Error::Config(format!(
                        "profile for '{}' does not cover grid partition {p}%",
                        m.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The grid must be usable by split: sorted, on (0,100], containing 100, and
/// closed under complement so every split remainder is a valid gpulet size.
pub fn validate_grid(grid: &[u32]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("partition grid is empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != grid.len() || sorted != grid {
        return Err(Error::Config(
            "partition grid must be sorted and duplicate-free".into(),
        ));
    }
    if *grid.last().unwrap() != 100 {
        return Err(Error::Config("partition grid must contain 100".into()));
    }
    for &p in grid {
        if p == 0 || p > 100 {
            return Err(Error::Config(format!("grid value {p} out of (0, 100]")));
        }
        if p < 100 && !grid.contains(&(100 - p)) {
            return Err(Error::Config(format!(
                "grid is not complement-closed: {p} present but {} missing",
                100 - p
            )));
        }
    }
    Ok(())
}

/// Scheduler outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Schedulable,
    NotSchedulable { model: String },
}

impl Verdict {
    pub fn is_schedulable(&self) -> bool {
        matches!(self, Verdict::Schedulable)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Schedulable => write!(f, "Schedulable"),
            Verdict::NotSchedulable { model } => write!(f, "NotSchedulable (stuck on '{model}')"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuletSnapshot {
    pub id: u32,
    pub size: u32,
    pub lanes: Vec<Lane>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuPlan {
    pub gpu_id: u32,
    pub gpulets: Vec<GpuletSnapshot>,
}

/// Full output of a scheduler run: the verdict, the gpulet layout with lane
/// assignments, and the per-model assigned-rate ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub verdict: Verdict,
    pub mode: Mode,
    pub num_gpus: u32,
    pub gpus: Vec<GpuPlan>,
    pub assigned: BTreeMap<String, f64>,
    /// Lanes placed while their sibling gpulet was still unallocated; their
    /// interference allowance was zero at placement time and was re-checked
    /// when the sibling later received lanes.
    pub optimistic_placements: u32,
}

impl SchedulePlan {
    /// Sum of allocated gpulet sizes (percent units).
    pub fn utilized_partition_sum(&self) -> u32 {
        self.gpus
            .iter()
            .flat_map(|g| &g.gpulets)
            .filter(|g| !g.lanes.is_empty())
            .map(|g| g.size)
            .sum()
    }

    pub fn lanes(&self) -> impl Iterator<Item = (&GpuPlan, &GpuletSnapshot, &Lane)> {
        self.gpus.iter().flat_map(|gpu| {
            gpu.gpulets
                .iter()
                .flat_map(move |gl| gl.lanes.iter().map(move |lane| (gpu, gl, lane)))
        })
    }

    /// Structural fingerprint: partition sizes and model placements. Two
    /// plans with equal fingerprints differ at most in batch sizes and
    /// routing weights — frontend knobs that apply without rebuilding the
    /// partitions (no reorganization cost).
    pub fn fingerprint(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        for gpu in &self.gpus {
            let mut gpulets: Vec<String> = gpu
                .gpulets
                .iter()
                .map(|g| {
                    let mut lanes: Vec<&str> = g.lanes.iter().map(|l| l.model.as_str()).collect();
                    lanes.sort_unstable();
                    format!("{}[{}]", g.size, lanes.join(","))
                })
                .collect();
            gpulets.sort();
            parts.push(format!("g{}({})", gpu.gpu_id, gpulets.join("+")));
        }
        parts.join("|")
    }

    /// One-line verdict followed by the stable JSON layout dump.
    pub fn dump(&self) -> String {
        let json = serde_json::to_string_pretty(&self.gpus).expect("plan serializes");
        format!("{}\n{}", self.verdict, json)
    }
}

/// Runs the scheduler selected by `spec.mode`. `gpulet+int` and `ideal`
/// require an interference model.
pub fn plan(
    spec: &WorkloadSpec,
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
) -> Result<SchedulePlan> {
    spec.validate()?;
    spec.check_profile_coverage(profiles)?;
    match spec.mode {
        Mode::Sbp => squishy_bin_packing(spec, profiles),
        Mode::Gpulet => engine::run_heuristic(spec, profiles, None, Mode::Gpulet, false),
        Mode::GpuletInt => {
            let intf = intf.ok_or_else(|| {
                Error::Config("mode gpulet+int requires an interference model".into())
            })?;
            engine::run_heuristic(spec, profiles, Some(intf), Mode::GpuletInt, false)
        }
        Mode::Ideal => {
            let intf = intf
                .ok_or_else(|| Error::Config("mode ideal requires an interference model".into()))?;
            ideal_exhaustive(spec, profiles, intf, DEFAULT_IDEAL_BUDGET)
        }
    }
}

/// Elastic partitioning: per model (descending rate) allocate best-fit
/// gpulets of size min(p_eff, p_req) until the whole rate is assigned.
pub fn elastic_partitioning(
    spec: &WorkloadSpec,
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
) -> Result<SchedulePlan> {
    spec.validate()?;
    spec.check_profile_coverage(profiles)?;
    let mode = if intf.is_some() {
        Mode::GpuletInt
    } else {
        Mode::Gpulet
    };
    engine::run_heuristic(spec, profiles, intf, mode, false)
}

/// Temporal-sharing-only baseline: every allocation takes (or shares) a
/// whole GPU; no spatial splits, no interference accounting.
pub fn squishy_bin_packing(spec: &WorkloadSpec, profiles: &ProfileSet) -> Result<SchedulePlan> {
    spec.validate()?;
    spec.check_profile_coverage(profiles)?;
    engine::run_heuristic(spec, profiles, None, Mode::Sbp, true)
}
