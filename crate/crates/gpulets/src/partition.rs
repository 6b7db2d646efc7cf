//! Gpulet inventory: physical GPUs, their spatial splits, lane allocation
//! state, and the split / temporal-merge / revert-split primitives the
//! schedulers drive.
//!
//! Invariants maintained at all times:
//! - per physical GPU, gpulet sizes sum to exactly 100,
//! - at most two gpulets per GPU (two-way splits only),
//! - a gpulet with lanes is allocated; a lane-free gpulet is in the remain
//!   set (membership is derived, never tracked separately).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::ProfileSet;

pub type GpuletId = u32;

/// Maximum gpulets per physical GPU. A config constant so a deeper split
/// support is a configuration change rather than a redesign.
pub const MAX_GPULETS_PER_GPU: usize = 2;

/// One model's time share of a gpulet: its dispatch batch, the shared duty
/// window, the planned execution latency at the gpulet's size, and the
/// request rate routed to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub model: String,
    pub batch: u32,
    pub duty_cycle_ms: f64,
    pub exec_ms: f64,
    pub rate: f64,
    pub slo_ms: f64,
}

/// A virtual GPU backed by `size` percent of one physical GPU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gpulet {
    pub id: GpuletId,
    pub gpu_id: u32,
    pub size: u32,
    pub lanes: Vec<Lane>,
}

impl Gpulet {
    pub fn is_allocated(&self) -> bool {
        !self.lanes.is_empty()
    }

    /// The unified duty window: minimum over lanes.
    pub fn min_duty_ms(&self) -> Option<f64> {
        self.lanes
            .iter()
            .map(|l| l.duty_cycle_ms)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }

    /// Lane with the highest combined solo utilization at this gpulet's
    /// size — the stats an interference partner is judged by.
    pub fn highest_util_lane(&self, profiles: &ProfileSet) -> Option<&Lane> {
        let mut best: Option<(&Lane, f64)> = None;
        for lane in &self.lanes {
            let Ok(profile) = profiles.get(&lane.model) else {
                continue;
            };
            let Ok(stats) = profile.solo_stats(self.size) else {
                continue;
            };
            let combined = stats.l2 + stats.mem_bw;
            if best.is_none_or(|(_, b)| combined > b) {
                best = Some((lane, combined));
            }
        }
        best.map(|(l, _)| l)
    }
}

/// Solo stats of the highest-utilization lane among `lanes` at `size` — how
/// a co-tenant gpulet is seen by the interference predictor.
pub fn highest_util_stats(
    lanes: &[Lane],
    size: u32,
    profiles: &ProfileSet,
) -> Option<crate::profile::SoloStats> {
    let mut best: Option<crate::profile::SoloStats> = None;
    let mut best_combined = f64::NEG_INFINITY;
    for lane in lanes {
        let Ok(profile) = profiles.get(&lane.model) else {
            continue;
        };
        let Ok(stats) = profile.solo_stats(size) else {
            continue;
        };
        let combined = stats.l2 + stats.mem_bw;
        if combined > best_combined {
            best_combined = combined;
            best = Some(stats);
        }
    }
    best
}

/// Tolerances for the sharability inequalities: absolute slack on latency
/// sums (ms) and on rate coverage (req/s), protecting exactly-tight plans
/// from float round-off.
const LAT_EPS: f64 = 1e-9;
const RATE_EPS: f64 = 1e-6;

/// Re-derives a lane set for co-residence on a gpulet of `size` under
/// per-model interference factors (>= 1 against the sibling gpulet).
///
/// The shared duty window starts at the minimum over the lanes' current
/// windows and stretches until the factor-inflated executions of one round
/// (at the rate-covering batches) fit inside it. Each lane's dispatch batch
/// is then grown through the tabulated levels as far as the sharing
/// inequalities allow, so lanes keep burst headroom beyond their mean rate.
/// Returns None when a lane cannot cover its rate within the table or the
/// window fixpoint does not settle.
pub fn derive_shared_lanes(
    size: u32,
    lanes: &[Lane],
    profiles: &ProfileSet,
    factor_of: impl Fn(&str) -> f64,
) -> Option<Vec<Lane>> {
    let mut duty = lanes
        .iter()
        .map(|l| l.duty_cycle_ms)
        .fold(f64::INFINITY, f64::min);
    if !duty.is_finite() || duty <= 0.0 {
        return None;
    }
    let mut settled: Option<Vec<Lane>> = None;
    for _ in 0..64 {
        let mut out = Vec::with_capacity(lanes.len());
        let mut sum_inflated = 0.0;
        for lane in lanes {
            if lane.rate <= 0.0 {
                out.push(Lane {
                    duty_cycle_ms: duty,
                    batch: 0,
                    exec_ms: 0.0,
                    ..lane.clone()
                });
                continue;
            }
            let profile = profiles.get(&lane.model).ok()?;
            let needed = (lane.rate * duty / 1000.0 - 1e-9).ceil().max(1.0);
            if needed > profile.max_batch() as f64 {
                return None;
            }
            let batch = needed as u32;
            let exec_ms = profile.lookup_latency(batch, size).ok()?;
            sum_inflated += exec_ms * factor_of(&lane.model).max(1.0);
            out.push(Lane {
                duty_cycle_ms: duty,
                batch,
                exec_ms,
                ..lane.clone()
            });
        }
        if sum_inflated <= duty + LAT_EPS {
            settled = Some(out);
            break;
        }
        duty = sum_inflated;
    }
    let mut out = settled?;

    // Free alignment: raise each batch to the tabulated level its execution
    // latency already pays for.
    for lane in out.iter_mut().filter(|l| l.rate > 0.0) {
        let profile = profiles.get(&lane.model).ok()?;
        if let Some(&tab) = profile.batches().iter().find(|&&b| b >= lane.batch) {
            lane.batch = tab;
        }
    }

    // Grow dispatch caps level by level, stretching the shared window as
    // far as every lane's SLO and rate coverage allow. Extra cap beyond the
    // assigned rate is what absorbs arrival bursts.
    let min_slo = out
        .iter()
        .filter(|l| l.rate > 0.0)
        .map(|l| l.slo_ms)
        .fold(f64::INFINITY, f64::min);
    let mut sum_inflated: f64 = out
        .iter()
        .filter(|l| l.rate > 0.0)
        .map(|l| l.exec_ms * factor_of(&l.model).max(1.0))
        .sum();
    loop {
        let mut grew = false;
        for i in 0..out.len() {
            if out[i].rate <= 0.0 {
                continue;
            }
            let profile = profiles.get(&out[i].model).ok()?;
            let Some(&next) = profile.batches().iter().find(|&&b| b > out[i].batch) else {
                continue;
            };
            let Ok(exec) = profile.lookup_latency(next, size) else {
                continue;
            };
            let factor = factor_of(&out[i].model).max(1.0);
            let new_sum = sum_inflated - out[i].exec_ms * factor + exec * factor;
            let new_duty = duty.max(new_sum);
            let fits_own_slo = 2.0 * exec * factor <= out[i].slo_ms + LAT_EPS;
            let fits_all_slo = new_duty + new_sum <= min_slo + LAT_EPS;
            let covers_all = out.iter().enumerate().all(|(j, l)| {
                if l.rate <= 0.0 {
                    return true;
                }
                let b = if j == i { next } else { l.batch };
                (b as f64) * 1000.0 / new_duty + RATE_EPS >= l.rate
            });
            if fits_own_slo && fits_all_slo && covers_all {
                out[i].batch = next;
                out[i].exec_ms = exec;
                sum_inflated = new_sum;
                duty = new_duty;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    for lane in out.iter_mut() {
        lane.duty_cycle_ms = duty;
    }
    Some(out)
}

/// Checks the temporal-sharing inequalities for a lane set sharing one
/// gpulet, given per-model interference factors (>= 1) against the sibling
/// gpulet. With the shared window `D = min duty` and inflated executions
/// `ê_i = exec_i · factor_i` the conditions are:
/// - one round of executions fits the window: `Σ ê <= D`,
/// - worst-case request latency per lane: `D + Σ ê <= SLO_i`,
/// - each lane's dispatch capacity covers its rate: `b_i / D >= rate_i`,
/// - each lane stays feasible at its own batch: `2·ê_i <= SLO_i`.
pub fn lanes_satisfy_sharing(lanes: &[Lane], factor_of: impl Fn(&str) -> f64) -> bool {
    if lanes.is_empty() {
        return true;
    }
    let duty = lanes
        .iter()
        .map(|l| l.duty_cycle_ms)
        .fold(f64::INFINITY, f64::min);
    let sum_inflated: f64 = lanes
        .iter()
        .filter(|l| l.rate > 0.0)
        .map(|l| l.exec_ms * factor_of(&l.model).max(1.0))
        .sum();
    if sum_inflated > duty + LAT_EPS {
        return false;
    }
    for lane in lanes.iter().filter(|l| l.rate > 0.0) {
        let inflated = lane.exec_ms * factor_of(&lane.model).max(1.0);
        if duty + sum_inflated > lane.slo_ms + LAT_EPS {
            return false;
        }
        if 2.0 * inflated > lane.slo_ms + LAT_EPS {
            return false;
        }
        if (lane.batch as f64) * 1000.0 / duty + RATE_EPS < lane.rate {
            return false;
        }
    }
    true
}

/// The merged lane set `g`'s lanes would form on `target`, if sharable.
pub fn plan_merge(
    g: &Gpulet,
    target: &Gpulet,
    profiles: &ProfileSet,
    factor_of: impl Fn(&str) -> f64,
) -> Option<Vec<Lane>> {
    let mut combined: Vec<Lane> = target.lanes.clone();
    combined.extend(g.lanes.iter().cloned());
    let merged = derive_shared_lanes(target.size, &combined, profiles, &factor_of)?;
    lanes_satisfy_sharing(&merged, factor_of).then_some(merged)
}

/// Whether `g`'s lanes can move onto `target` under temporal sharing.
pub fn temporally_sharable(
    g: &Gpulet,
    target: &Gpulet,
    profiles: &ProfileSet,
    factor_of: impl Fn(&str) -> f64,
) -> bool {
    plan_merge(g, target, profiles, factor_of).is_some()
}

/// The gpulet inventory of a scheduling run.
#[derive(Debug, Clone, PartialEq)]
pub struct GpuletInventory {
    num_gpus: u32,
    next_id: GpuletId,
    gpulets: BTreeMap<GpuletId, Gpulet>,
}

impl GpuletInventory {
    /// One whole (100%) gpulet per physical GPU.
    pub fn new(num_gpus: u32) -> Self {
        let gpulets = (0..num_gpus)
            .map(|i| {
                (
                    i,
                    Gpulet {
                        id: i,
                        gpu_id: i,
                        size: 100,
                        lanes: Vec::new(),
                    },
                )
            })
            .collect();
        Self {
            num_gpus,
            next_id: num_gpus,
            gpulets,
        }
    }

    pub fn num_gpus(&self) -> u32 {
        self.num_gpus
    }

    pub fn gpulet(&self, id: GpuletId) -> Result<&Gpulet> {
        self.gpulets
            .get(&id)
            .ok_or_else(|| Error::State(format!("no gpulet with id {id}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Gpulet> {
        self.gpulets.values()
    }

    /// Lane-free gpulets, ordered by id.
    pub fn remain_gpulets(&self) -> impl Iterator<Item = &Gpulet> {
        self.gpulets.values().filter(|g| !g.is_allocated())
    }

    /// Allocated gpulets, ordered by id.
    pub fn alloc_gpulets(&self) -> impl Iterator<Item = &Gpulet> {
        self.gpulets.values().filter(|g| g.is_allocated())
    }

    /// The other gpulet on the same physical GPU, if the GPU is split.
    pub fn sibling_of(&self, id: GpuletId) -> Option<&Gpulet> {
        let gpu_id = self.gpulets.get(&id)?.gpu_id;
        self.gpulets
            .values()
            .find(|g| g.gpu_id == gpu_id && g.id != id)
    }

    /// Splits a whole, unallocated gpulet into (`p_ideal`, `100 − p_ideal`).
    /// A split at 100 is a no-op returning the gpulet itself.
    pub fn split(&mut self, id: GpuletId, p_ideal: u32) -> Result<(GpuletId, Option<GpuletId>)> {
        let g = self.gpulet(id)?;
        if g.is_allocated() {
            return Err(Error::State(format!("cannot split allocated gpulet {id}")));
        }
        if g.size != 100 {
            return Err(Error::State(format!(
                "cannot split gpulet {id} of size {}%; only whole GPUs split",
                g.size
            )));
        }
        if p_ideal == 0 || p_ideal > 100 {
            return Err(Error::State(format!("split size {p_ideal}% out of range")));
        }
        if p_ideal == 100 {
            return Ok((id, None));
        }
        let gpu_id = g.gpu_id;
        self.gpulets.get_mut(&id).unwrap().size = p_ideal;
        let rest_id = self.next_id;
        self.next_id += 1;
        self.gpulets.insert(
            rest_id,
            Gpulet {
                id: rest_id,
                gpu_id,
                size: 100 - p_ideal,
                lanes: Vec::new(),
            },
        );
        Ok((id, Some(rest_id)))
    }

    /// Recombines an unallocated gpulet with its sibling into a whole GPU
    /// when the sibling is also unallocated; otherwise the gpulet simply
    /// stays in the remain set.
    pub fn revert_split(&mut self, id: GpuletId) -> Result<()> {
        let g = self.gpulet(id)?;
        if g.is_allocated() {
            return Err(Error::State(format!("cannot revert allocated gpulet {id}")));
        }
        let Some(sib) = self.sibling_of(id) else {
            return Ok(());
        };
        if sib.is_allocated() {
            return Ok(());
        }
        let (sib_id, gpu_id) = (sib.id, g.gpu_id);
        let total = g.size + sib.size;
        debug_assert_eq!(total, 100, "per-GPU size conservation");
        self.gpulets.remove(&id);
        self.gpulets.remove(&sib_id);
        let keep = id.min(sib_id);
        self.gpulets.insert(
            keep,
            Gpulet {
                id: keep,
                gpu_id,
                size: total,
                lanes: Vec::new(),
            },
        );
        Ok(())
    }

    /// Places the first lane on an unallocated gpulet.
    pub fn place_lane(&mut self, id: GpuletId, lane: Lane) -> Result<()> {
        let g = self
            .gpulets
            .get_mut(&id)
            .ok_or_else(|| Error::State(format!("no gpulet with id {id}")))?;
        if g.is_allocated() {
            return Err(Error::State(format!(
                "gpulet {id} already allocated; co-residence goes through merge"
            )));
        }
        g.lanes.push(lane);
        Ok(())
    }

    /// Moves `g`'s lanes onto the allocated gpulet `target` under temporal
    /// sharing, then releases `g` via revert_split. Errors when the target
    /// is unallocated or the sharability predicate fails.
    pub fn merge_temporal(
        &mut self,
        g_id: GpuletId,
        target_id: GpuletId,
        profiles: &ProfileSet,
        factor_of: impl Fn(&str) -> f64,
    ) -> Result<()> {
        if g_id == target_id {
            return Err(Error::State("cannot merge a gpulet with itself".into()));
        }
        let target = self.gpulet(target_id)?;
        if !target.is_allocated() {
            return Err(Error::State(format!(
                "merge target {target_id} has no lanes; must merge into an allocated gpulet"
            )));
        }
        let g = self.gpulet(g_id)?;
        let merged = plan_merge(g, target, profiles, factor_of)
            .ok_or_else(|| Error::NotSharable(format!("gpulet {g_id} onto {target_id}")))?;
        self.gpulets.get_mut(&target_id).unwrap().lanes = merged;
        self.gpulets.get_mut(&g_id).unwrap().lanes.clear();
        self.revert_split(g_id)
    }

    /// Replaces a gpulet's lane set (used when a merge re-derivation was
    /// validated externally).
    pub fn set_lanes(&mut self, id: GpuletId, lanes: Vec<Lane>) -> Result<()> {
        let g = self
            .gpulets
            .get_mut(&id)
            .ok_or_else(|| Error::State(format!("no gpulet with id {id}")))?;
        g.lanes = lanes;
        Ok(())
    }

    /// Removes all lanes from a gpulet, returning it to the remain set
    /// (without recombining).
    pub fn clear_lanes(&mut self, id: GpuletId) -> Result<()> {
        self.set_lanes(id, Vec::new())
    }

    /// Verifies the structural invariants: exact per-GPU size conservation
    /// and the two-gpulet cap.
    pub fn check_conservation(&self) -> Result<()> {
        let mut per_gpu: BTreeMap<u32, (u32, usize)> = BTreeMap::new();
        for g in self.gpulets.values() {
            let e = per_gpu.entry(g.gpu_id).or_insert((0, 0));
            e.0 += g.size;
            e.1 += 1;
        }
        if per_gpu.len() != self.num_gpus as usize {
            return Err(Error::State(format!(
                "expected {} GPUs with gpulets, found {}",
                self.num_gpus,
                per_gpu.len()
            )));
        }
        for (gpu, (total, count)) in per_gpu {
            if total != 100 {
                return Err(Error::State(format!(
                    "GPU {gpu}: sizes sum to {total}, not 100"
                )));
            }
            if count > MAX_GPULETS_PER_GPU {
                return Err(Error::State(format!(
                    "GPU {gpu}: {count} gpulets exceed the cap"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{LatencyProfile, SoloStats};
    use std::collections::BTreeMap as Map;

    fn no_intf(_: &str) -> f64 {
        1.0
    }

    /// Profiles where L(b, p) = base·b/(p/100) over batches {1,2,4,8}.
    fn profiles(models: &[(&str, f64)]) -> ProfileSet {
        let parts = [20u32, 40, 50, 60, 80, 100];
        ProfileSet::new(models.iter().map(|&(name, base)| {
            let mut entries = Map::new();
            for &b in &[1u32, 2, 4, 8] {
                for &p in &parts {
                    entries.insert((b, p), base * b as f64 / (p as f64 / 100.0));
                }
            }
            let utils: Map<u32, SoloStats> = parts
                .iter()
                .map(|&p| {
                    (
                        p,
                        SoloStats {
                            l2: 0.4,
                            mem_bw: 0.4,
                        },
                    )
                })
                .collect();
            LatencyProfile::from_entries(name, &entries, &utils).unwrap()
        }))
    }

    #[test]
    fn split_produces_complementary_sizes() {
        let mut inv = GpuletInventory::new(1);
        let (ideal, rest) = inv.split(0, 40).unwrap();
        let rest = rest.unwrap();
        assert_eq!(inv.gpulet(ideal).unwrap().size, 40);
        assert_eq!(inv.gpulet(rest).unwrap().size, 60);
        assert_eq!(
            inv.gpulet(ideal).unwrap().gpu_id,
            inv.gpulet(rest).unwrap().gpu_id
        );
        inv.check_conservation().unwrap();
    }

    #[test]
    fn split_at_100_is_noop() {
        let mut inv = GpuletInventory::new(1);
        let (ideal, rest) = inv.split(0, 100).unwrap();
        assert_eq!(ideal, 0);
        assert!(rest.is_none());
        assert_eq!(inv.iter().count(), 1);
    }

    #[test]
    fn split_rejects_partial_or_allocated() {
        let mut inv = GpuletInventory::new(1);
        inv.split(0, 60).unwrap();
        assert!(matches!(inv.split(0, 40), Err(Error::State(_))));

        let mut inv = GpuletInventory::new(1);
        let lane = Lane {
            model: "m".into(),
            batch: 1,
            duty_cycle_ms: 10.0,
            exec_ms: 10.0,
            rate: 1.0,
            slo_ms: 100.0,
        };
        inv.place_lane(0, lane).unwrap();
        assert!(matches!(inv.split(0, 40), Err(Error::State(_))));
    }

    #[test]
    fn revert_recombines_free_siblings() {
        let mut inv = GpuletInventory::new(1);
        let (_, rest) = inv.split(0, 40).unwrap();
        inv.revert_split(rest.unwrap()).unwrap();
        assert_eq!(inv.iter().count(), 1);
        assert_eq!(inv.gpulet(0).unwrap().size, 100);
        inv.check_conservation().unwrap();
    }

    #[test]
    fn revert_leaves_gpulet_when_sibling_allocated() {
        let mut inv = GpuletInventory::new(1);
        let (ideal, rest) = inv.split(0, 40).unwrap();
        let lane = Lane {
            model: "m".into(),
            batch: 1,
            duty_cycle_ms: 10.0,
            exec_ms: 10.0,
            rate: 1.0,
            slo_ms: 100.0,
        };
        inv.place_lane(ideal, lane).unwrap();
        inv.revert_split(rest.unwrap()).unwrap();
        assert_eq!(inv.iter().count(), 2);
        inv.check_conservation().unwrap();
    }

    #[test]
    fn revert_rejects_allocated_gpulet() {
        let mut inv = GpuletInventory::new(1);
        let (ideal, _) = inv.split(0, 40).unwrap();
        let lane = Lane {
            model: "m".into(),
            batch: 1,
            duty_cycle_ms: 10.0,
            exec_ms: 10.0,
            rate: 1.0,
            slo_ms: 100.0,
        };
        inv.place_lane(ideal, lane).unwrap();
        assert!(matches!(inv.revert_split(ideal), Err(Error::State(_))));
    }

    #[test]
    fn split_then_revert_is_identity() {
        let mut inv = GpuletInventory::new(3);
        let before: Vec<Gpulet> = inv.iter().cloned().collect();
        let (_, rest) = inv.split(1, 20).unwrap();
        inv.revert_split(rest.unwrap()).unwrap();
        let after: Vec<Gpulet> = inv.iter().cloned().collect();
        assert_eq!(after, before);
    }

    /// Worked merge: model A (duty 40, exec 20, SLO 95) onto a gpulet running
    /// model B (duty 40, exec 15, SLO 130). Window 40 fits 20+15=35 of
    /// execution and both worst-case latencies (75) sit inside their SLOs.
    #[test]
    fn merge_worked_example_is_sharable() {
        // a: L(4,100)=20 → base 5; b: L(4,100)=15 → base 3.75
        let profiles = profiles(&[("a", 5.0), ("b", 3.75)]);
        let mut inv = GpuletInventory::new(2);
        // rate 100 req/s with duty 40ms re-derives to batch 4 on both lanes
        inv.place_lane(
            0,
            Lane {
                model: "b".into(),
                batch: 4,
                duty_cycle_ms: 40.0,
                exec_ms: 15.0,
                rate: 100.0,
                slo_ms: 130.0,
            },
        )
        .unwrap();
        inv.place_lane(
            1,
            Lane {
                model: "a".into(),
                batch: 4,
                duty_cycle_ms: 40.0,
                exec_ms: 20.0,
                rate: 100.0,
                slo_ms: 95.0,
            },
        )
        .unwrap();

        assert!(temporally_sharable(
            inv.gpulet(1).unwrap(),
            inv.gpulet(0).unwrap(),
            &profiles,
            no_intf
        ));
        inv.merge_temporal(1, 0, &profiles, no_intf).unwrap();
        let target = inv.gpulet(0).unwrap();
        assert_eq!(target.lanes.len(), 2);
        let exec_sum: f64 = target.lanes.iter().map(|l| l.exec_ms).sum();
        assert!((exec_sum - 35.0).abs() < 1e-9);
        assert!(target.lanes.iter().all(|l| l.duty_cycle_ms == 40.0));
        // gpulet 1 is free again
        assert!(!inv.gpulet(1).unwrap().is_allocated());
        inv.check_conservation().unwrap();
    }

    #[test]
    fn merge_rejected_when_exec_exceeds_window() {
        // both lanes exec 30ms at their batches; window 40 < 60 total
        let profiles = profiles(&[("a", 7.5), ("b", 7.5)]);
        let mut inv = GpuletInventory::new(2);
        inv.place_lane(
            0,
            Lane {
                model: "b".into(),
                batch: 4,
                duty_cycle_ms: 40.0,
                exec_ms: 30.0,
                rate: 100.0,
                slo_ms: 200.0,
            },
        )
        .unwrap();
        inv.place_lane(
            1,
            Lane {
                model: "a".into(),
                batch: 4,
                duty_cycle_ms: 40.0,
                exec_ms: 30.0,
                rate: 100.0,
                slo_ms: 200.0,
            },
        )
        .unwrap();
        assert!(matches!(
            inv.merge_temporal(1, 0, &profiles, no_intf),
            Err(Error::NotSharable(_))
        ));
    }

    #[test]
    fn merge_rejected_for_tight_slo_lane() {
        // a short-SLO lane cannot share a window with a 90ms execution
        let profiles = profiles(&[("tiny", 0.5), ("big", 22.5)]);
        let mut inv = GpuletInventory::new(2);
        inv.place_lane(
            0,
            Lane {
                model: "big".into(),
                batch: 4,
                duty_cycle_ms: 90.0,
                exec_ms: 90.0,
                rate: 40.0,
                slo_ms: 200.0,
            },
        )
        .unwrap();
        inv.place_lane(
            1,
            Lane {
                model: "tiny".into(),
                batch: 2,
                duty_cycle_ms: 1.0,
                exec_ms: 1.0,
                rate: 100.0,
                slo_ms: 5.0,
            },
        )
        .unwrap();
        assert!(!temporally_sharable(
            inv.gpulet(1).unwrap(),
            inv.gpulet(0).unwrap(),
            &profiles,
            no_intf
        ));
    }

    #[test]
    fn zero_rate_lanes_impose_no_constraints() {
        let profiles = profiles(&[("a", 5.0), ("b", 5.0)]);
        let mut inv = GpuletInventory::new(2);
        inv.place_lane(
            0,
            Lane {
                model: "b".into(),
                batch: 4,
                duty_cycle_ms: 40.0,
                exec_ms: 20.0,
                rate: 100.0,
                slo_ms: 130.0,
            },
        )
        .unwrap();
        inv.place_lane(
            1,
            Lane {
                model: "a".into(),
                batch: 0,
                duty_cycle_ms: 40.0,
                exec_ms: 0.0,
                rate: 0.0,
                slo_ms: 1.0,
            },
        )
        .unwrap();
        assert!(temporally_sharable(
            inv.gpulet(1).unwrap(),
            inv.gpulet(0).unwrap(),
            &profiles,
            no_intf
        ));
    }

    #[test]
    fn merge_into_unallocated_target_is_state_error() {
        let profiles = profiles(&[("a", 5.0)]);
        let mut inv = GpuletInventory::new(2);
        inv.place_lane(
            1,
            Lane {
                model: "a".into(),
                batch: 4,
                duty_cycle_ms: 40.0,
                exec_ms: 20.0,
                rate: 100.0,
                slo_ms: 95.0,
            },
        )
        .unwrap();
        assert!(matches!(
            inv.merge_temporal(1, 0, &profiles, no_intf),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn merge_never_increases_allocated_count() {
        let profiles = profiles(&[("a", 2.0), ("b", 2.0)]);
        let mut inv = GpuletInventory::new(2);
        inv.place_lane(
            0,
            Lane {
                model: "b".into(),
                batch: 2,
                duty_cycle_ms: 20.0,
                exec_ms: 4.0,
                rate: 50.0,
                slo_ms: 130.0,
            },
        )
        .unwrap();
        inv.place_lane(
            1,
            Lane {
                model: "a".into(),
                batch: 2,
                duty_cycle_ms: 20.0,
                exec_ms: 4.0,
                rate: 50.0,
                slo_ms: 130.0,
            },
        )
        .unwrap();
        let before = inv.alloc_gpulets().count();
        inv.merge_temporal(1, 0, &profiles, no_intf).unwrap();
        assert!(inv.alloc_gpulets().count() < before);
    }
}
