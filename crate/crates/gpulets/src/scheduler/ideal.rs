//! Exhaustive scheduling oracle for small instances: enumerates every
//! per-GPU partitioning (the same partition set the heuristic uses) and,
//! within each, backtracks over gpulet choices per model chunk. Returns
//! Schedulable iff any combination satisfies every SLO and rate constraint.
//!
//! The search space is O(P^N · N·P·M^2); a state budget guards against
//! oversized instances.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::interference::InterferenceModel;
use crate::partition::Lane;
use crate::profile::ProfileSet;

use super::engine::{max_feasible_batch_factored, pair_factor, settle_sides, PlanEngine};
use super::{Mode, SchedulePlan, Verdict, WorkloadModel, WorkloadSpec, RATE_DONE_EPS};

/// A gpulet during the exhaustive search.
#[derive(Debug, Clone)]
struct SearchGpulet {
    gpu_id: u32,
    size: u32,
    lanes: Vec<Lane>,
}

struct Search<'a> {
    profiles: &'a ProfileSet,
    intf: &'a InterferenceModel,
    models: Vec<WorkloadModel>,
    budget: u64,
    states: u64,
    /// Optimistic per-size capacity upper bound, max over models.
    size_cap: std::collections::BTreeMap<u32, f64>,
}

/// Per-GPU partition configurations derivable from the grid with two-way
/// splits: the whole GPU plus every unordered complement pair.
pub(crate) fn partition_configs(grid: &[u32]) -> Vec<Vec<u32>> {
    let mut configs = vec![vec![100]];
    for &p in grid {
        if p < 100 && p <= 100 - p && grid.contains(&(100 - p)) {
            configs.push(vec![p, 100 - p]);
        }
    }
    configs
}

impl<'a> Search<'a> {
    /// Optimistic bound on additional servable rate across the system.
    fn capacity_slack(&self, gpulets: &[SearchGpulet]) -> f64 {
        gpulets
            .iter()
            .map(|g| {
                let cap = *self.size_cap.get(&g.size).unwrap_or(&0.0);
                if g.lanes.is_empty() {
                    cap
                } else {
                    let duty = g
                        .lanes
                        .iter()
                        .map(|l| l.duty_cycle_ms)
                        .fold(f64::INFINITY, f64::min);
                    let used: f64 = g
                        .lanes
                        .iter()
                        .filter(|l| l.rate > 0.0)
                        .map(|l| l.exec_ms)
                        .sum();
                    cap * ((duty - used) / duty).max(0.0)
                }
            })
            .sum()
    }

    /// Backtracks over gpulet choices for `models[idx..]`; `remaining` is the
    /// unassigned rate of `models[idx]`.
    fn assign(
        &mut self,
        gpulets: &mut Vec<SearchGpulet>,
        idx: usize,
        remaining: f64,
    ) -> Result<bool> {
        self.states += 1;
        if self.states > self.budget {
            return Err(Error::BudgetExceeded {
                budget: self.budget,
            });
        }
        if idx >= self.models.len() {
            return Ok(true);
        }
        let demand_left: f64 =
            remaining + self.models[idx + 1..].iter().map(|m| m.rate).sum::<f64>();
        if demand_left > self.capacity_slack(gpulets) + RATE_DONE_EPS {
            return Ok(false);
        }

        let model = self.models[idx].clone();
        let profile = self.profiles.get(&model.name)?.clone();

        // Deduplicate symmetric choices: gpulets whose (size, own lanes,
        // sibling layout) signatures coincide behave identically.
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for gi in 0..gpulets.len() {
            if gpulets[gi].lanes.iter().any(|l| l.model == model.name) {
                continue;
            }
            let gpu_id = gpulets[gi].gpu_id;
            let sib_idx = (0..gpulets.len()).find(|&j| j != gi && gpulets[j].gpu_id == gpu_id);
            let sig = {
                let g = &gpulets[gi];
                let sib = sib_idx.map(|j| format!("{}:{:?}", gpulets[j].size, gpulets[j].lanes));
                format!("{}:{:?}|{:?}", g.size, g.lanes, sib)
            };
            if !seen.insert(sig) {
                continue;
            }

            let size = gpulets[gi].size;
            let sib_view = sib_idx
                .filter(|&j| !gpulets[j].lanes.is_empty())
                .map(|j| (gpulets[j].lanes.clone(), gpulets[j].size));
            let factor = pair_factor(
                self.profiles,
                Some(self.intf),
                &model.name,
                size,
                sib_view.as_ref().map(|(l, s)| (l.as_slice(), *s)),
            );
            let Some((b_max, solo_exec)) =
                max_feasible_batch_factored(&profile, size, model.slo_ms, factor)
            else {
                continue;
            };
            let solo_duty = solo_exec * factor;
            let window = gpulets[gi]
                .lanes
                .iter()
                .map(|l| l.duty_cycle_ms)
                .fold(solo_duty, f64::min);
            let cap = b_max as f64 * 1000.0 / window;
            let rate_served = remaining.min(cap);
            if rate_served <= 1e-9 {
                continue;
            }
            let lane = Lane {
                model: model.name.clone(),
                batch: b_max,
                duty_cycle_ms: solo_duty,
                exec_ms: solo_exec,
                rate: rate_served,
                slo_ms: model.slo_ms,
            };

            // Settle both sides of the GPU with the proposed lane added.
            let side_idx: Vec<usize> = gpulets
                .iter()
                .enumerate()
                .filter(|(_, s)| s.gpu_id == gpu_id)
                .map(|(j, _)| j)
                .collect();
            let sides: Vec<(u32, Vec<Lane>)> = side_idx
                .iter()
                .map(|&j| {
                    let mut lanes = gpulets[j].lanes.clone();
                    if j == gi {
                        lanes.push(lane.clone());
                    }
                    (gpulets[j].size, lanes)
                })
                .collect();
            let Some(settled) = settle_sides(self.profiles, Some(self.intf), &sides) else {
                continue;
            };

            let saved: Vec<Vec<Lane>> =
                side_idx.iter().map(|&j| gpulets[j].lanes.clone()).collect();
            for (&j, lanes) in side_idx.iter().zip(settled) {
                gpulets[j].lanes = lanes;
            }

            let left = remaining - rate_served;
            let found = if left > RATE_DONE_EPS {
                self.assign(gpulets, idx, left)?
            } else {
                let next_remaining = self.models.get(idx + 1).map_or(0.0, |m| m.rate);
                self.assign(gpulets, idx + 1, next_remaining)?
            };
            if found {
                return Ok(true);
            }
            for (&j, lanes) in side_idx.iter().zip(saved) {
                gpulets[j].lanes = lanes;
            }
        }
        Ok(false)
    }
}

/// Exhaustive verdict over all partitionings and lane assignments. Starts
/// from the elastic+interference plan as a certificate (its layout lies
/// inside the enumerated space), so the oracle dominates the heuristic by
/// construction and spends its budget only on heuristic failures.
pub fn ideal_exhaustive(
    spec: &WorkloadSpec,
    profiles: &ProfileSet,
    intf: &InterferenceModel,
    budget: u64,
) -> Result<SchedulePlan> {
    spec.validate()?;
    spec.check_profile_coverage(profiles)?;

    let heuristic = super::engine::run_heuristic(spec, profiles, Some(intf), Mode::Ideal, false)?;
    if heuristic.verdict.is_schedulable() {
        return Ok(heuristic);
    }

    let models: Vec<WorkloadModel> = spec.active_models_sorted().into_iter().cloned().collect();
    let configs = partition_configs(&spec.grid);
    let mut size_cap = std::collections::BTreeMap::new();
    for config in &configs {
        for &size in config {
            size_cap.entry(size).or_insert_with(|| {
                models
                    .iter()
                    .filter_map(|m| {
                        profiles
                            .get(&m.name)
                            .ok()
                            .map(|p| p.capacity_curve(m.slo_ms).rate_at(size).unwrap_or(0.0))
                    })
                    .fold(0.0, f64::max)
            });
        }
    }

    let mut search = Search {
        profiles,
        intf,
        models,
        budget,
        states: 0,
        size_cap,
    };
    let first_remaining = search.models.first().map_or(0.0, |m| m.rate);

    // Non-decreasing index vectors enumerate multisets of per-GPU configs
    // (GPUs are interchangeable).
    let mut assignment: Vec<usize> = vec![0; spec.num_gpus as usize];
    loop {
        let mut gpulets: Vec<SearchGpulet> = Vec::new();
        for (gpu, &ci) in assignment.iter().enumerate() {
            for &size in &configs[ci] {
                gpulets.push(SearchGpulet {
                    gpu_id: gpu as u32,
                    size,
                    lanes: Vec::new(),
                });
            }
        }
        if search.assign(&mut gpulets, 0, first_remaining)? {
            return Ok(plan_from_search(spec, &gpulets));
        }

        let mut pos = assignment.len();
        loop {
            if pos == 0 {
                let stuck = search
                    .models
                    .first()
                    .map(|m| m.name.clone())
                    .unwrap_or_default();
                let engine = PlanEngine::new(profiles, Some(intf), spec.num_gpus, false);
                return Ok(engine.snapshot(Verdict::NotSchedulable { model: stuck }, Mode::Ideal));
            }
            pos -= 1;
            if assignment[pos] + 1 < configs.len() {
                let next = assignment[pos] + 1;
                for slot in assignment.iter_mut().skip(pos) {
                    *slot = next;
                }
                break;
            }
        }
    }
}

fn plan_from_search(spec: &WorkloadSpec, gpulets: &[SearchGpulet]) -> SchedulePlan {
    let mut gpus: Vec<super::GpuPlan> = (0..spec.num_gpus)
        .map(|gpu_id| super::GpuPlan {
            gpu_id,
            gpulets: Vec::new(),
        })
        .collect();
    let mut assigned = std::collections::BTreeMap::new();
    for (i, g) in gpulets.iter().enumerate() {
        for lane in &g.lanes {
            *assigned.entry(lane.model.clone()).or_insert(0.0) += lane.rate;
        }
        gpus[g.gpu_id as usize].gpulets.push(super::GpuletSnapshot {
            id: i as u32,
            size: g.size,
            lanes: g.lanes.clone(),
        });
    }
    SchedulePlan {
        verdict: Verdict::Schedulable,
        mode: Mode::Ideal,
        num_gpus: spec.num_gpus,
        gpus,
        assigned,
        optimistic_placements: 0,
    }
}
