//! Shared placement machinery: best-fit gpulet selection with splits,
//! temporal merges, interference allowances, and both-sides re-derivation
//! whenever a GPU gains a co-tenant.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::interference::InterferenceModel;
use crate::partition::{
    derive_shared_lanes, highest_util_stats, lanes_satisfy_sharing, GpuletId, GpuletInventory, Lane,
};
use crate::profile::{LatencyProfile, ProfileSet};

use super::{
    GpuPlan, GpuletSnapshot, Mode, SchedulePlan, Verdict, WorkloadModel, WorkloadSpec,
    RATE_DONE_EPS,
};

/// Interference factor for `model` at `size` next to sibling lanes at
/// `sibling_size`; 1.0 without a model or a co-tenant.
pub(crate) fn pair_factor(
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    model: &str,
    size: u32,
    sibling: Option<(&[Lane], u32)>,
) -> f64 {
    let Some(intf) = intf else { return 1.0 };
    let Some((sib_lanes, sib_size)) = sibling else {
        return 1.0;
    };
    let Some(partner) = highest_util_stats(sib_lanes, sib_size, profiles) else {
        return 1.0;
    };
    let Ok(profile) = profiles.get(model) else {
        return 1.0;
    };
    let Ok(own) = profile.solo_stats(size) else {
        return 1.0;
    };
    intf.predict(own, partner)
}

/// Capacity headroom demanded of co-resident lanes: a gpulet hosting more
/// than one lane must be able to cover every lane's rate scaled by 1/0.85,
/// so temporal packing never rides at the edge of its shared window.
pub(crate) const SHARED_COVERAGE_HEADROOM: f64 = 0.85;

/// Re-derives every side of one GPU under the factors induced by the
/// proposed lane sets, stretching duty windows as needed, and checks the
/// sharability inequalities. Returns the settled lane set per side in input
/// order, or None if any side fails.
pub(crate) fn settle_sides(
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    sides: &[(u32, Vec<Lane>)],
) -> Option<Vec<Vec<Lane>>> {
    let mut settled = Vec::with_capacity(sides.len());
    for (i, (size, lanes)) in sides.iter().enumerate() {
        if lanes.is_empty() {
            settled.push(Vec::new());
            continue;
        }
        let sibling = sides
            .iter()
            .enumerate()
            .find(|(j, (_, sl))| *j != i && !sl.is_empty())
            .map(|(_, (ssize, slanes))| (slanes.as_slice(), *ssize));
        let factor_of = |m: &str| pair_factor(profiles, intf, m, *size, sibling);
        if lanes.iter().filter(|l| l.rate > 0.0).count() > 1 {
            let padded: Vec<Lane> = lanes
                .iter()
                .map(|l| Lane {
                    rate: l.rate / SHARED_COVERAGE_HEADROOM,
                    ..l.clone()
                })
                .collect();
            let check = derive_shared_lanes(*size, &padded, profiles, factor_of)?;
            if !lanes_satisfy_sharing(&check, factor_of) {
                return None;
            }
        }
        let derived = derive_shared_lanes(*size, lanes, profiles, factor_of)?;
        if !lanes_satisfy_sharing(&derived, factor_of) {
            return None;
        }
        settled.push(derived);
    }
    Some(settled)
}

/// Largest tabulated batch b with `2·L(b,size)·factor <= slo`: the duty
/// window equals the interference-inflated execution time, so a request's
/// worst-case latency is two windows.
pub(crate) fn max_feasible_batch_factored(
    profile: &LatencyProfile,
    size: u32,
    slo: f64,
    factor: f64,
) -> Option<(u32, f64)> {
    let factor = factor.max(1.0);
    for &b in profile.batches().iter().rev() {
        let Ok(exec) = profile.lookup_latency(b, size) else {
            continue;
        };
        if 2.0 * exec * factor <= slo + 1e-9 {
            return Some((b, exec));
        }
    }
    None
}

pub(crate) struct PlanEngine<'a> {
    pub profiles: &'a ProfileSet,
    pub intf: Option<&'a InterferenceModel>,
    pub whole_gpu_only: bool,
    pub inv: GpuletInventory,
    pub optimistic: u32,
}

/// A committed allocation step.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct Placement {
    pub gpulet_id: GpuletId,
    pub rate_served: f64,
    pub merged: bool,
}

impl<'a> PlanEngine<'a> {
    pub fn new(
        profiles: &'a ProfileSet,
        intf: Option<&'a InterferenceModel>,
        num_gpus: u32,
        whole_gpu_only: bool,
    ) -> Self {
        Self {
            profiles,
            intf,
            whole_gpu_only,
            inv: GpuletInventory::new(num_gpus),
            optimistic: 0,
        }
    }

    fn sibling_view(&self, id: GpuletId) -> Option<(Vec<Lane>, u32)> {
        self.inv
            .sibling_of(id)
            .filter(|s| s.is_allocated())
            .map(|s| (s.lanes.clone(), s.size))
    }

    /// The (size, lanes) sides of a GPU with substitutions applied, plus the
    /// matching gpulet ids.
    fn gpu_sides_with(
        &self,
        gpu_id: u32,
        overrides: &[(GpuletId, Vec<Lane>)],
    ) -> (Vec<GpuletId>, Vec<(u32, Vec<Lane>)>) {
        let mut ids = Vec::new();
        let mut sides = Vec::new();
        for g in self.inv.iter().filter(|g| g.gpu_id == gpu_id) {
            let lanes = overrides
                .iter()
                .find(|(id, _)| *id == g.id)
                .map(|(_, l)| l.clone())
                .unwrap_or_else(|| g.lanes.clone());
            ids.push(g.id);
            sides.push((g.size, lanes));
        }
        (ids, sides)
    }

    /// Settles a GPU with overrides and commits the derived lane sets.
    /// Returns false (no mutation) when the sides cannot co-exist.
    fn settle_and_commit(&mut self, gpu_id: u32, overrides: &[(GpuletId, Vec<Lane>)]) -> bool {
        let (ids, sides) = self.gpu_sides_with(gpu_id, overrides);
        let Some(settled) = settle_sides(self.profiles, self.intf, &sides) else {
            return false;
        };
        for (id, lanes) in ids.into_iter().zip(settled) {
            self.inv.set_lanes(id, lanes).expect("gpulet exists");
        }
        true
    }

    /// Best-fit allocation per the elastic-partitioning control flow: scan
    /// the remain set ascending by size, splitting whole GPUs down to
    /// `p_ideal`; prefer a temporal merge onto an already-allocated gpulet;
    /// when the remain set has no feasible candidate, merges are still
    /// attempted directly.
    pub fn find_best_fit(
        &mut self,
        model: &WorkloadModel,
        p_ideal: u32,
        remaining: f64,
    ) -> Option<Placement> {
        let profile = self.profiles.get(&model.name).ok()?.clone();

        let mut candidates: Vec<(u32, u32, GpuletId)> = self
            .inv
            .remain_gpulets()
            .filter(|g| g.size >= p_ideal)
            .map(|g| (g.size, g.gpu_id, g.id))
            .collect();
        candidates.sort_unstable();

        for (_, _, mut cand_id) in candidates {
            let size = self.inv.gpulet(cand_id).ok()?.size;
            let mut did_split = false;
            if size == 100 && p_ideal < 100 && !self.whole_gpu_only {
                match self.inv.split(cand_id, p_ideal) {
                    Ok((ideal, rest)) => {
                        cand_id = ideal;
                        did_split = rest.is_some();
                    }
                    Err(_) => continue,
                }
            }

            let size = self.inv.gpulet(cand_id).unwrap().size;
            let sibling = self.sibling_view(cand_id);
            let factor = pair_factor(
                self.profiles,
                self.intf,
                &model.name,
                size,
                sibling.as_ref().map(|(l, s)| (l.as_slice(), *s)),
            );
            let Some((batch, exec)) =
                max_feasible_batch_factored(&profile, size, model.slo_ms, factor)
            else {
                if did_split {
                    let _ = self.inv.revert_split(cand_id);
                }
                continue;
            };
            let duty = exec * factor;
            let capacity = batch as f64 * 1000.0 / duty;
            let rate_served = remaining.min(capacity);
            let lane = Lane {
                model: model.name.clone(),
                batch,
                duty_cycle_ms: duty,
                exec_ms: exec,
                rate: rate_served,
                slo_ms: model.slo_ms,
            };

            // A temporal merge serves the lane on an existing gpulet and
            // releases the candidate.
            if let Some(target_id) = self.try_merge_lane(&lane, p_ideal, cand_id) {
                if did_split {
                    let _ = self.inv.revert_split(cand_id);
                }
                return Some(Placement {
                    gpulet_id: target_id,
                    rate_served,
                    merged: true,
                });
            }

            // Fresh placement: both sides of the GPU must settle.
            let gpu_id = self.inv.gpulet(cand_id).unwrap().gpu_id;
            let optimistic_here = self
                .inv
                .sibling_of(cand_id)
                .is_some_and(|s| !s.is_allocated());
            if self.settle_and_commit(gpu_id, &[(cand_id, vec![lane])]) {
                if optimistic_here {
                    self.optimistic += 1;
                }
                return Some(Placement {
                    gpulet_id: cand_id,
                    rate_served,
                    merged: false,
                });
            }
            if did_split {
                let _ = self.inv.revert_split(cand_id);
            }
        }

        // Remain set exhausted or infeasible: attempt a direct merge with the
        // lane sized at each target.
        self.try_merge_prospective(model, p_ideal, remaining)
            .map(|(target_id, rate_served)| Placement {
                gpulet_id: target_id,
                rate_served,
                merged: true,
            })
    }

    /// Merge targets ordered best-fit: ascending size, then gpu, then id.
    /// A model never gets two lanes on one gpulet.
    fn merge_targets(&self, p_ideal: u32, exclude: GpuletId, model: &str) -> Vec<GpuletId> {
        let mut targets: Vec<(u32, u32, GpuletId)> = self
            .inv
            .alloc_gpulets()
            .filter(|g| g.id != exclude && g.size >= p_ideal)
            .filter(|g| g.lanes.iter().all(|l| l.model != model))
            .map(|g| (g.size, g.gpu_id, g.id))
            .collect();
        targets.sort_unstable();
        targets.into_iter().map(|(_, _, id)| id).collect()
    }

    /// Tries to host `lane` on an allocated gpulet via temporal sharing,
    /// keeping the candidate gpulet (if any) out of the picture.
    fn try_merge_lane(&mut self, lane: &Lane, p_ideal: u32, cand_id: GpuletId) -> Option<GpuletId> {
        for target_id in self.merge_targets(p_ideal, cand_id, &lane.model) {
            let target = self.inv.gpulet(target_id).unwrap();
            let gpu_id = target.gpu_id;
            let mut proposed = target.lanes.clone();
            proposed.push(lane.clone());
            let mut overrides = vec![(target_id, proposed)];
            // The candidate may sit on the same GPU; it stays lane-free.
            if self.inv.gpulet(cand_id).map(|c| c.gpu_id).ok() == Some(gpu_id) {
                overrides.push((cand_id, Vec::new()));
            }
            if self.settle_and_commit(gpu_id, &overrides) {
                return Some(target_id);
            }
        }
        None
    }

    /// Builds a lane directly at each merge target when no remain candidate
    /// exists. Returns (target, rate served).
    fn try_merge_prospective(
        &mut self,
        model: &WorkloadModel,
        p_ideal: u32,
        remaining: f64,
    ) -> Option<(GpuletId, f64)> {
        let profile = self.profiles.get(&model.name).ok()?.clone();
        for target_id in self.merge_targets(p_ideal, u32::MAX, &model.name) {
            let target = self.inv.gpulet(target_id).unwrap().clone();
            let size = target.size;
            let sibling = self.sibling_view(target_id);
            let factor = pair_factor(
                self.profiles,
                self.intf,
                &model.name,
                size,
                sibling.as_ref().map(|(l, s)| (l.as_slice(), *s)),
            );
            let Some((b_max, solo_exec)) =
                max_feasible_batch_factored(&profile, size, model.slo_ms, factor)
            else {
                continue;
            };
            let solo_duty = solo_exec * factor;
            let window = target.min_duty_ms().map_or(solo_duty, |d| d.min(solo_duty));
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
            let mut proposed = target.lanes.clone();
            proposed.push(lane);
            if self.settle_and_commit(target.gpu_id, &[(target_id, proposed)]) {
                return Some((target_id, rate_served));
            }
        }
        None
    }

    pub fn snapshot(&self, verdict: Verdict, mode: Mode) -> SchedulePlan {
        let mut gpus: Vec<GpuPlan> = (0..self.inv.num_gpus())
            .map(|gpu_id| GpuPlan {
                gpu_id,
                gpulets: Vec::new(),
            })
            .collect();
        let mut assigned: BTreeMap<String, f64> = BTreeMap::new();
        for g in self.inv.iter() {
            for lane in &g.lanes {
                *assigned.entry(lane.model.clone()).or_insert(0.0) += lane.rate;
            }
            gpus[g.gpu_id as usize].gpulets.push(GpuletSnapshot {
                id: g.id,
                size: g.size,
                lanes: g.lanes.clone(),
            });
        }
        SchedulePlan {
            verdict,
            mode,
            num_gpus: self.inv.num_gpus(),
            gpus,
            assigned,
            optimistic_placements: self.optimistic,
        }
    }
}

/// The descending-rate allocation loop shared by elastic partitioning and
/// the squishy-bin-packing baseline (which pins p_ideal to whole GPUs).
pub(crate) fn run_heuristic(
    spec: &WorkloadSpec,
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    mode: Mode,
    whole_gpu_only: bool,
) -> Result<SchedulePlan> {
    let mut engine = PlanEngine::new(profiles, intf, spec.num_gpus, whole_gpu_only);
    for model in spec.active_models_sorted() {
        let profile = profiles.get(&model.name)?;
        let curve = profile.capacity_curve(model.slo_ms);
        let mut remaining = model.rate;
        while remaining > RATE_DONE_EPS {
            let p_ideal = if whole_gpu_only {
                100
            } else {
                let p_eff = curve.max_efficient_partition();
                let p_req = curve.min_required_partition(remaining).partition;
                p_eff.min(p_req)
            };
            match engine.find_best_fit(model, p_ideal, remaining) {
                Some(p) if p.rate_served > 1e-9 => remaining -= p.rate_served,
                _ => {
                    let verdict = Verdict::NotSchedulable {
                        model: model.name.clone(),
                    };
                    return Ok(engine.snapshot(verdict, mode));
                }
            }
        }
        debug_assert!(engine.inv.check_conservation().is_ok());
    }
    engine.inv.check_conservation()?;
    Ok(engine.snapshot(Verdict::Schedulable, mode))
}

/// Re-checks a finished plan's per-GPU constraints with the given
/// interference model: the soundness gate used by tests and the simulator.
pub fn validate_plan_gpus(
    plan: &SchedulePlan,
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
) -> bool {
    for gpu in &plan.gpus {
        for gl in &gpu.gpulets {
            if gl.lanes.is_empty() {
                continue;
            }
            let sibling = gpu
                .gpulets
                .iter()
                .find(|o| o.id != gl.id && !o.lanes.is_empty())
                .map(|o| (o.lanes.as_slice(), o.size));
            let ok = lanes_satisfy_sharing(&gl.lanes, |model| {
                pair_factor(profiles, intf, model, gl.size, sibling)
            });
            if !ok {
                return false;
            }
        }
    }
    true
}
