//! Discrete-event simulator executing schedule plans against request
//! streams.
//!
//! Requests arrive per model, are routed to that model's lanes in proportion
//! to their planned rates, accumulate in per-lane batches, and dispatch when
//! the batch is full or the lane's duty window elapses — whichever first.
//! Each gpulet executes one batch at a time; execution takes
//! `L(n, size) · factor`, where the factor models co-run interference with
//! the sibling gpulet (from the fitted model, or a ground-truth table when
//! supplied). A request whose queueing delay can no longer meet its SLO is
//! dropped at dispatch time and counted as a violation.
//!
//! In live mode the scheduler is re-invoked every period on EWMA-tracked
//! rates; a structural plan change triggers a reorganization that activates
//! after a 10–15 s delay, during which the old plan keeps serving. Undispatched
//! requests migrate to the new plan's lanes; nothing is silently lost.

mod arrivals;

pub use arrivals::{generate_arrivals, load_traces, ArrivalKind, RateTrace, RequestStream};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interference::InterferenceModel;
use crate::partition::{highest_util_stats, Lane};
use crate::profile::ProfileSet;
use crate::scheduler::{Mode, SchedulePlan, WorkloadModel, WorkloadSpec};

/// Ground-truth co-run factors per unordered model pair (default 1.0), used
/// to study scheduling under mis-predicted interference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorTable {
    pairs: BTreeMap<(String, String), f64>,
}

impl FactorTable {
    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn insert(&mut self, a: &str, b: &str, factor: f64) {
        self.pairs.insert(Self::key(a, b), factor.max(1.0));
    }

    pub fn factor(&self, a: &str, b: &str) -> f64 {
        self.pairs.get(&Self::key(a, b)).copied().unwrap_or(1.0)
    }
}

/// Simulator parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub duration_s: f64,
    /// Live-mode rescheduling period (also the report bucketing window).
    pub scheduling_period_s: f64,
    /// Reorganization latency range; sampled uniformly per event.
    pub reorg_latency_range_s: (f64, f64),
    /// EWMA weight for observed window rates.
    pub ewma_alpha: f64,
    /// Master seed (reorg delays; stream seeds live on the streams).
    pub seed: u64,
    /// Live mode reschedules once tracked load exceeds this fraction of the
    /// plan's deliverable capacity, keeping queues away from saturation.
    pub reschedule_headroom: f64,
    /// Weight of the one-period EWMA trend added when projecting the next
    /// window's rates (rising loads are met ahead of the reorg latency;
    /// falling trends are not extrapolated).
    pub trend_gain: f64,
    /// When set, execution uses these factors instead of the fitted model.
    pub ground_truth: Option<FactorTable>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            scheduling_period_s: 20.0,
            reorg_latency_range_s: (10.0, 15.0),
            ewma_alpha: 0.5,
            seed: 0,
            reschedule_headroom: 0.85,
            trend_gain: 2.0,
            ground_truth: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_s <= 0.0 {
            return Err(Error::Config("duration_s must be > 0".into()));
        }
        let (lo, hi) = self.reorg_latency_range_s;
        if !(0.0 <= lo && lo <= hi) {
            return Err(Error::Config("bad reorg latency range".into()));
        }
        // the reorganization must finish inside one scheduling window
        if self.scheduling_period_s <= hi {
            return Err(Error::Config(format!(
                "scheduling period {}s must exceed the max reorg latency {}s",
                self.scheduling_period_s, hi
            )));
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(Error::Config("ewma_alpha must be in (0,1]".into()));
        }
        if !(self.reschedule_headroom > 0.0 && self.reschedule_headroom <= 1.0) {
            return Err(Error::Config("reschedule_headroom must be in (0,1]".into()));
        }
        if self.trend_gain < 0.0 {
            return Err(Error::Config("trend_gain must be >= 0".into()));
        }
        Ok(())
    }

    fn echo(&self) -> String {
        format!(
            "duration_s={} period_s={} reorg_s=[{},{}] ewma_alpha={} headroom={} trend_gain={} seed={} ground_truth_pairs={}",
            self.duration_s,
            self.scheduling_period_s,
            self.reorg_latency_range_s.0,
            self.reorg_latency_range_s.1,
            self.ewma_alpha,
            self.reschedule_headroom,
            self.trend_gain,
            self.seed,
            self.ground_truth.as_ref().map_or(0, |t| t.pairs.len())
        )
    }
}

/// Exponentially-weighted moving average update.
pub fn ewma_rate(previous: f64, observed: f64, alpha: f64) -> f64 {
    alpha * observed + (1.0 - alpha) * previous
}

/// Where plans come from during a run.
pub enum PlanSource<'a> {
    Static(&'a SchedulePlan),
    /// Invoked each period with the EWMA rate estimates.
    Live(&'a dyn Fn(&BTreeMap<String, f64>) -> Result<SchedulePlan>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelStats {
    pub arrivals: u64,
    pub completed: u64,
    /// Late completions plus drops.
    pub violations: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRow {
    pub period: u64,
    pub model: String,
    pub throughput: f64,
    pub violation_rate: f64,
    pub utilized_partition_sum: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReorgEvent {
    pub decided_at_s: f64,
    pub activates_at_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub per_model: BTreeMap<String, ModelStats>,
    pub periods: Vec<PeriodRow>,
    pub reorgs: Vec<ReorgEvent>,
    /// Period boundaries where rescheduling produced NotSchedulable (old
    /// plan kept serving).
    pub skipped_reschedules: u32,
    pub duration_s: f64,
    pub period_s: f64,
    pub config_echo: String,
}

impl SimulationReport {
    pub fn violation_rate(&self, model: &str) -> f64 {
        self.per_model.get(model).map_or(0.0, |s| {
            if s.arrivals == 0 {
                0.0
            } else {
                s.violations as f64 / s.arrivals as f64
            }
        })
    }

    pub fn total_violation_fraction(&self) -> f64 {
        let (v, a) = self
            .per_model
            .values()
            .fold((0u64, 0u64), |(v, a), s| (v + s.violations, a + s.arrivals));
        if a == 0 {
            0.0
        } else {
            v as f64 / a as f64
        }
    }

    pub fn total_throughput(&self) -> f64 {
        self.per_model
            .values()
            .map(|s| s.completed as f64)
            .sum::<f64>()
            / self.duration_s
    }

    /// `period,model,throughput,violation_rate,utilized_partition_sum` rows,
    /// preceded by `#` header lines echoing the effective configuration.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "# {}", self.config_echo)?;
        writeln!(
            writer,
            "# reorgs={} skipped_reschedules={}",
            self.reorgs.len(),
            self.skipped_reschedules
        )?;
        writeln!(
            writer,
            "period,model,throughput,violation_rate,utilized_partition_sum"
        )?;
        for row in &self.periods {
            writeln!(
                writer,
                "{},{},{},{},{}",
                row.period,
                row.model,
                row.throughput,
                row.violation_rate,
                row.utilized_partition_sum
            )?;
        }
        Ok(())
    }
}

// ── event heap ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
enum Event {
    Arrival { model: usize },
    LaneDeadline { lane: usize, window: u64 },
    ExecDone { unit: usize },
    PeriodEnd,
    Activate,
}

#[derive(Debug, Clone)]
struct HeapItem {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: the binary heap pops the earliest (time, seq)
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

// ── runtime state ───────────────────────────────────────────────────────────

#[derive(Debug)]
struct LaneUnit {
    model: usize,
    unit: usize,
    batch_cap: u32,
    duty_s: f64,
    slo_s: f64,
    /// Queueing delay beyond which a request cannot meet its SLO even
    /// executing immediately: slo − L(1, size).
    drop_cutoff_s: f64,
    factor: f64,
    rate: f64,
    queue: VecDeque<f64>,
    window: u64,
    window_open: bool,
    retired: bool,
}

#[derive(Debug)]
struct ExecBatch {
    lane: usize,
    members: Vec<f64>,
    exec_s: f64,
}

#[derive(Debug)]
struct GpuletUnit {
    size: u32,
    queue: VecDeque<ExecBatch>,
    executing: Option<ExecBatch>,
    retired: bool,
}

struct SimState<'a> {
    profiles: &'a ProfileSet,
    intf: Option<&'a InterferenceModel>,
    config: &'a SimConfig,
    model_names: Vec<String>,
    arrivals: Vec<Vec<f64>>,
    cursors: Vec<usize>,
    heap: BinaryHeap<HeapItem>,
    seq: u64,
    lanes: Vec<LaneUnit>,
    units: Vec<GpuletUnit>,
    /// Active lane indices per model, with routing credits.
    router: Vec<Vec<usize>>,
    credits: Vec<Vec<f64>>,
    stats: Vec<ModelStats>,
    period_arrivals: Vec<Vec<u64>>,
    period_completed: Vec<Vec<u64>>,
    period_violations: Vec<Vec<u64>>,
    utilized_by_period: Vec<u32>,
    window_arrivals: Vec<u64>,
    ewma: Vec<f64>,
    prev_ewma: Vec<f64>,
    current_fingerprint: String,
    current_utilized: u32,
    /// Deliverable rate per model under the installed plan (sum of lane
    /// dispatch capacities).
    plan_capacity: BTreeMap<String, f64>,
    pending: Option<SchedulePlan>,
    reorgs: Vec<ReorgEvent>,
    skipped: u32,
    reorg_rng: ChaCha8Rng,
    num_periods: usize,
}

impl<'a> SimState<'a> {
    fn push(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.heap.push(HeapItem {
            time,
            seq: self.seq,
            event,
        });
    }

    fn period_of(&self, t: f64) -> usize {
        ((t / self.config.scheduling_period_s) as usize).min(self.num_periods - 1)
    }

    fn model_idx(&self, name: &str) -> Option<usize> {
        self.model_names.iter().position(|m| m == name)
    }

    /// Execution factor for a lane: ground truth (worst pair against the
    /// sibling) when configured, else the fitted interference model, else 1.
    fn lane_factor(&self, model: &str, size: u32, sibling: Option<(&[Lane], u32)>) -> f64 {
        let Some((sib_lanes, sib_size)) = sibling else {
            return 1.0;
        };
        if let Some(table) = &self.config.ground_truth {
            return sib_lanes
                .iter()
                .map(|l| table.factor(model, &l.model))
                .fold(1.0, f64::max);
        }
        let Some(intf) = self.intf else { return 1.0 };
        let Some(partner) = highest_util_stats(sib_lanes, sib_size, self.profiles) else {
            return 1.0;
        };
        let Ok(profile) = self.profiles.get(model) else {
            return 1.0;
        };
        let Ok(own) = profile.solo_stats(size) else {
            return 1.0;
        };
        intf.predict(own, partner)
    }

    /// Installs a plan: retires old units, migrates undispatched requests,
    /// rebuilds the router.
    fn install(&mut self, plan: &SchedulePlan, now: f64) {
        // collect undispatched requests per model, in arrival order
        let mut pool: Vec<(f64, usize)> = Vec::new();
        for lane in &mut self.lanes {
            if lane.retired {
                continue;
            }
            lane.retired = true;
            lane.window_open = false;
            for t in lane.queue.drain(..) {
                pool.push((t, lane.model));
            }
        }
        for unit in &mut self.units {
            if unit.retired {
                continue;
            }
            unit.retired = true;
            for batch in unit.queue.drain(..) {
                let model = self.lanes[batch.lane].model;
                for t in batch.members {
                    pool.push((t, model));
                }
            }
            // an executing batch finishes under the old plan
        }
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

        // build new units and lanes
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
                let unit_idx = self.units.len();
                self.units.push(GpuletUnit {
                    size: gl.size,
                    queue: VecDeque::new(),
                    executing: None,
                    retired: false,
                });
                for lane in &gl.lanes {
                    if lane.batch == 0 || lane.rate <= 0.0 {
                        continue;
                    }
                    let Some(model) = self.model_idx(&lane.model) else {
                        continue;
                    };
                    let factor = self.lane_factor(&lane.model, gl.size, sibling);
                    let l1_ms = self
                        .profiles
                        .get(&lane.model)
                        .and_then(|p| p.lookup_latency(1, gl.size))
                        .unwrap_or(0.0);
                    self.lanes.push(LaneUnit {
                        model,
                        unit: unit_idx,
                        batch_cap: lane.batch,
                        duty_s: lane.duty_cycle_ms / 1000.0,
                        slo_s: lane.slo_ms / 1000.0,
                        drop_cutoff_s: (lane.slo_ms - l1_ms) / 1000.0,
                        factor,
                        rate: lane.rate,
                        queue: VecDeque::new(),
                        window: 0,
                        window_open: false,
                        retired: false,
                    });
                }
            }
        }

        // rebuild router over active lanes
        self.router = vec![Vec::new(); self.model_names.len()];
        for (i, lane) in self.lanes.iter().enumerate() {
            if !lane.retired {
                self.router[lane.model].push(i);
            }
        }
        self.credits = self
            .router
            .iter()
            .map(|lanes| vec![0.0; lanes.len()])
            .collect();

        self.current_fingerprint = plan.fingerprint();
        self.current_utilized = plan.utilized_partition_sum();
        self.plan_capacity.clear();
        for (_, _, lane) in plan.lanes() {
            if lane.batch > 0 && lane.duty_cycle_ms > 0.0 {
                *self.plan_capacity.entry(lane.model.clone()).or_insert(0.0) +=
                    lane.batch as f64 * 1000.0 / lane.duty_cycle_ms;
            }
        }

        // re-route migrated requests
        for (t, model) in pool {
            self.enqueue(model, t, now);
        }
    }

    /// Routes one request of `model` (arrived at `arrived`) at current time
    /// `now`: weighted-credit lane choice, window bookkeeping, dispatches.
    fn enqueue(&mut self, model: usize, arrived: f64, now: f64) {
        let lanes = &self.router[model];
        if lanes.is_empty() {
            // no lane serves this model under the active plan
            self.stats[model].dropped += 1;
            self.stats[model].violations += 1;
            let p = self.period_of(now);
            self.period_violations[p][model] += 1;
            return;
        }
        let total_rate: f64 = lanes.iter().map(|&l| self.lanes[l].rate).sum();
        let mut pick = 0usize;
        if lanes.len() > 1 && total_rate > 0.0 {
            let mut best = f64::NEG_INFINITY;
            for (j, &l) in lanes.iter().enumerate() {
                self.credits[model][j] += self.lanes[l].rate / total_rate;
                if self.credits[model][j] > best {
                    best = self.credits[model][j];
                    pick = j;
                }
            }
            self.credits[model][pick] -= 1.0;
        }
        let lane_idx = lanes[pick];
        self.lanes[lane_idx].queue.push_back(arrived);
        if !self.lanes[lane_idx].window_open {
            self.lanes[lane_idx].window += 1;
            self.lanes[lane_idx].window_open = true;
            let deadline = now + self.lanes[lane_idx].duty_s;
            let window = self.lanes[lane_idx].window;
            self.push(
                deadline,
                Event::LaneDeadline {
                    lane: lane_idx,
                    window,
                },
            );
        }
        if self.lanes[lane_idx].queue.len() >= self.lanes[lane_idx].batch_cap as usize {
            self.dispatch(lane_idx, now);
        }
    }

    /// Closes the lane's window, forms a batch (dropping requests that can
    /// no longer meet their SLO), hands it to the gpulet, and reopens a
    /// window if requests remain.
    fn dispatch(&mut self, lane_idx: usize, now: f64) {
        loop {
            let lane = &mut self.lanes[lane_idx];
            lane.window_open = false;
            let take = (lane.batch_cap as usize).min(lane.queue.len());
            if take == 0 {
                return;
            }
            let mut members = Vec::with_capacity(take);
            let mut drops = 0u64;
            for _ in 0..take {
                let t = lane.queue.pop_front().unwrap();
                if now - t > lane.drop_cutoff_s + 1e-9 {
                    drops += 1;
                } else {
                    members.push(t);
                }
            }
            let model = lane.model;
            let unit_idx = lane.unit;
            let factor = lane.factor;
            let more = !lane.queue.is_empty();
            let full_again = lane.queue.len() >= lane.batch_cap as usize;
            if more {
                lane.window += 1;
                lane.window_open = true;
                let deadline = now + lane.duty_s;
                let window = lane.window;
                self.push(
                    deadline,
                    Event::LaneDeadline {
                        lane: lane_idx,
                        window,
                    },
                );
            }
            if drops > 0 {
                self.stats[model].dropped += drops;
                self.stats[model].violations += drops;
                let p = self.period_of(now);
                self.period_violations[p][model] += drops;
            }
            if !members.is_empty() {
                let size = self.units[unit_idx].size;
                let n = members.len() as u32;
                let exec_ms = self
                    .profiles
                    .get(&self.model_names[model])
                    .and_then(|p| p.lookup_latency(n, size))
                    .unwrap_or(0.0);
                let batch = ExecBatch {
                    lane: lane_idx,
                    members,
                    exec_s: exec_ms * factor / 1000.0,
                };
                self.units[unit_idx].queue.push_back(batch);
                self.try_start(unit_idx, now);
            }
            if !full_again {
                return;
            }
        }
    }

    fn try_start(&mut self, unit_idx: usize, now: f64) {
        let unit = &mut self.units[unit_idx];
        if unit.executing.is_some() {
            return;
        }
        let Some(batch) = unit.queue.pop_front() else {
            return;
        };
        let done = now + batch.exec_s;
        unit.executing = Some(batch);
        self.push(done, Event::ExecDone { unit: unit_idx });
    }

    fn complete(&mut self, unit_idx: usize, now: f64) {
        let Some(batch) = self.units[unit_idx].executing.take() else {
            return;
        };
        let lane = &self.lanes[batch.lane];
        let model = lane.model;
        let slo = lane.slo_s;
        let p = self.period_of(now);
        for arrived in &batch.members {
            self.stats[model].completed += 1;
            self.period_completed[p][model] += 1;
            if now - arrived > slo + 1e-9 {
                self.stats[model].violations += 1;
                self.period_violations[p][model] += 1;
            }
        }
        if !self.units[unit_idx].retired {
            self.try_start(unit_idx, now);
        }
    }
}

/// Runs the simulation. Static plans must cover every stream's model; in
/// live mode the scheduler closure is invoked each period on EWMA rates.
pub fn run(
    source: PlanSource<'_>,
    streams: &[RequestStream],
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    config: &SimConfig,
) -> Result<SimulationReport> {
    config.validate()?;
    let model_names: Vec<String> = streams.iter().map(|s| s.model.clone()).collect();
    {
        let mut seen = std::collections::BTreeSet::new();
        for name in &model_names {
            if !seen.insert(name) {
                return Err(Error::Config(format!(
                    "duplicate stream for model '{name}'"
                )));
            }
        }
    }

    if let PlanSource::Static(plan) = &source {
        for stream in streams {
            let offered = stream.trace.mean_rate(config.duration_s);
            let covered = plan
                .lanes()
                .any(|(_, _, l)| l.model == stream.model && l.batch > 0);
            if offered > 0.0 && !covered {
                return Err(Error::Config(format!(
                    "static plan has no lane for model '{}'",
                    stream.model
                )));
            }
        }
    }

    let num_periods = ((config.duration_s / config.scheduling_period_s).ceil() as usize).max(1);
    let mut state = SimState {
        profiles,
        intf,
        config,
        arrivals: streams
            .iter()
            .map(|s| generate_arrivals(s, config.duration_s))
            .collect(),
        cursors: vec![0; streams.len()],
        heap: BinaryHeap::new(),
        seq: 0,
        lanes: Vec::new(),
        units: Vec::new(),
        router: vec![Vec::new(); model_names.len()],
        credits: vec![Vec::new(); model_names.len()],
        stats: vec![ModelStats::default(); model_names.len()],
        period_arrivals: vec![vec![0; model_names.len()]; num_periods],
        period_completed: vec![vec![0; model_names.len()]; num_periods],
        period_violations: vec![vec![0; model_names.len()]; num_periods],
        utilized_by_period: vec![0; num_periods],
        window_arrivals: vec![0; model_names.len()],
        ewma: streams.iter().map(|s| s.trace.rate_at(0.0)).collect(),
        prev_ewma: streams.iter().map(|s| s.trace.rate_at(0.0)).collect(),
        current_fingerprint: String::new(),
        current_utilized: 0,
        plan_capacity: BTreeMap::new(),
        pending: None,
        reorgs: Vec::new(),
        skipped: 0,
        reorg_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f0f),
        num_periods,
        model_names,
    };

    // initial plan
    match &source {
        PlanSource::Static(plan) => state.install(plan, 0.0),
        PlanSource::Live(scheduler) => {
            let rates: BTreeMap<String, f64> = state
                .model_names
                .iter()
                .cloned()
                .zip(state.ewma.iter().copied())
                .collect();
            match scheduler(&rates) {
                Ok(plan) if plan.verdict.is_schedulable() => state.install(&plan, 0.0),
                _ => state.skipped += 1,
            }
        }
    }
    state.utilized_by_period[0] = state.current_utilized;

    // seed events
    for m in 0..state.model_names.len() {
        if let Some(&t) = state.arrivals[m].first() {
            state.push(t, Event::Arrival { model: m });
        }
    }
    for k in 1..num_periods {
        state.push(k as f64 * config.scheduling_period_s, Event::PeriodEnd);
    }

    while let Some(item) = state.heap.pop() {
        let now = item.time;
        if now >= config.duration_s && !matches!(item.event, Event::ExecDone { .. }) {
            continue;
        }
        match item.event {
            Event::Arrival { model } => {
                let idx = state.cursors[model];
                state.cursors[model] += 1;
                let arrived = state.arrivals[model][idx];
                state.stats[model].arrivals += 1;
                state.window_arrivals[model] += 1;
                let period = state.period_of(now);
                state.period_arrivals[period][model] += 1;
                if let Some(&next) = state.arrivals[model].get(idx + 1) {
                    state.push(next, Event::Arrival { model });
                }
                state.enqueue(model, arrived, now);
            }
            Event::LaneDeadline { lane, window } => {
                let l = &state.lanes[lane];
                if l.retired || !l.window_open || l.window != window {
                    continue;
                }
                state.dispatch(lane, now);
            }
            Event::ExecDone { unit } => {
                state.complete(unit, now);
            }
            Event::PeriodEnd => {
                let period = state.period_of(now);
                if let PlanSource::Live(scheduler) = &source {
                    let window = config.scheduling_period_s;
                    let mut projected = Vec::with_capacity(state.model_names.len());
                    for m in 0..state.model_names.len() {
                        let observed = state.window_arrivals[m] as f64 / window;
                        state.prev_ewma[m] = state.ewma[m];
                        state.ewma[m] = ewma_rate(state.ewma[m], observed, config.ewma_alpha);
                        state.window_arrivals[m] = 0;
                        let trend = (state.ewma[m] - state.prev_ewma[m]).max(0.0);
                        projected.push(state.ewma[m] + config.trend_gain * trend);
                    }
                    // Rescheduling is required only when the current plan
                    // under-provisions some model (SLO risk) or a fresh plan
                    // would occupy less of the GPUs (resources to reclaim).
                    let headroom = config.reschedule_headroom;
                    let under_provisioned =
                        state.model_names.iter().enumerate().any(|(m, name)| {
                            let capacity = state.plan_capacity.get(name).copied().unwrap_or(0.0);
                            projected[m] > capacity * headroom + 1e-9
                        });
                    let rates: BTreeMap<String, f64> = state
                        .model_names
                        .iter()
                        .cloned()
                        .zip(projected.iter().copied())
                        .collect();
                    match scheduler(&rates) {
                        Ok(plan) if plan.verdict.is_schedulable() => {
                            // shrink only for a meaningful saving, so noise
                            // does not flap the system into tighter packings
                            let reclaims = (plan.utilized_partition_sum() as f64)
                                < 0.75 * state.current_utilized as f64;
                            let required = under_provisioned || reclaims;
                            let fp = plan.fingerprint();
                            if required
                                && fp == state.current_fingerprint
                                && state.pending.is_none()
                            {
                                // same partition layout: batch sizes and
                                // routing weights apply without a reorg
                                state.install(&plan, now);
                            } else if required
                                && fp != state.current_fingerprint
                                && state.pending.as_ref().map(|p| p.fingerprint())
                                    != Some(fp.clone())
                            {
                                let (lo, hi) = config.reorg_latency_range_s;
                                let delay = lo + state.reorg_rng.gen::<f64>() * (hi - lo);
                                state.reorgs.push(ReorgEvent {
                                    decided_at_s: now,
                                    activates_at_s: now + delay,
                                });
                                state.pending = Some(plan);
                                state.push(now + delay, Event::Activate);
                            }
                        }
                        _ => {
                            if under_provisioned {
                                state.skipped += 1;
                            }
                        }
                    }
                }
                state.utilized_by_period[period] = state.current_utilized;
            }
            Event::Activate => {
                if let Some(plan) = state.pending.take() {
                    state.install(&plan, now);
                }
            }
        }
    }

    // assemble the report
    let mut per_model = BTreeMap::new();
    for (i, name) in state.model_names.iter().enumerate() {
        per_model.insert(name.clone(), state.stats[i].clone());
    }
    let mut periods = Vec::new();
    for k in 0..num_periods {
        for (m, name) in state.model_names.iter().enumerate() {
            let arr = state.period_arrivals[k][m];
            let viol = state.period_violations[k][m];
            periods.push(PeriodRow {
                period: k as u64,
                model: name.clone(),
                throughput: state.period_completed[k][m] as f64 / config.scheduling_period_s,
                violation_rate: if arr == 0 {
                    0.0
                } else {
                    viol as f64 / arr as f64
                },
                utilized_partition_sum: state.utilized_by_period[k],
            });
        }
    }
    Ok(SimulationReport {
        per_model,
        periods,
        reorgs: state.reorgs,
        skipped_reschedules: state.skipped,
        duration_s: config.duration_s,
        period_s: config.scheduling_period_s,
        config_echo: config.echo(),
    })
}

/// Search configuration for [`max_achievable_throughput`].
#[derive(Debug, Clone)]
pub struct ThroughputSearch {
    pub sim_duration_s: f64,
    pub violation_threshold: f64,
    pub rel_tol: f64,
    pub arrivals: ArrivalKind,
    pub seed: u64,
}

impl Default for ThroughputSearch {
    fn default() -> Self {
        Self {
            sim_duration_s: 30.0,
            violation_threshold: 0.01,
            rel_tol: 0.01,
            arrivals: ArrivalKind::Deterministic,
            seed: 7,
        }
    }
}

/// Binary-searches the largest global rate multiplier whose plan is
/// Schedulable *and* whose simulated violation rate stays at or below the
/// threshold; returns the aggregate request rate at that multiplier.
#[allow(clippy::too_many_arguments)]
pub fn max_achievable_throughput(
    base: &[WorkloadModel],
    num_gpus: u32,
    mode: Mode,
    grid: &[u32],
    profiles: &ProfileSet,
    intf: Option<&InterferenceModel>,
    ground_truth: Option<&FactorTable>,
    search: &ThroughputSearch,
) -> Result<f64> {
    let base_total: f64 = base.iter().map(|m| m.rate).sum();
    if base_total <= 0.0 {
        return Err(Error::Config("base scenario has no positive rate".into()));
    }

    let eval = |mult: f64| -> Result<bool> {
        let models: Vec<WorkloadModel> = base
            .iter()
            .map(|m| WorkloadModel {
                name: m.name.clone(),
                slo_ms: m.slo_ms,
                rate: m.rate * mult,
            })
            .collect();
        let mut spec = WorkloadSpec::new(models.clone(), num_gpus, mode);
        spec.grid = grid.to_vec();
        let plan = crate::scheduler::plan(&spec, profiles, intf)?;
        if !plan.verdict.is_schedulable() {
            return Ok(false);
        }
        let streams: Vec<RequestStream> = models
            .iter()
            .enumerate()
            .filter(|(_, m)| m.rate > 0.0)
            .map(|(i, m)| RequestStream {
                model: m.name.clone(),
                trace: RateTrace::constant(m.rate),
                seed: search.seed.wrapping_add(i as u64),
                kind: search.arrivals,
            })
            .collect();
        let config = SimConfig {
            duration_s: search.sim_duration_s,
            ground_truth: ground_truth.cloned(),
            seed: search.seed,
            ..SimConfig::default()
        };
        let report = run(PlanSource::Static(&plan), &streams, profiles, intf, &config)?;
        Ok(report.total_violation_fraction() <= search.violation_threshold)
    };

    let schedulable = |mult: f64| -> Result<bool> {
        let models: Vec<WorkloadModel> = base
            .iter()
            .map(|m| WorkloadModel {
                name: m.name.clone(),
                slo_ms: m.slo_ms,
                rate: m.rate * mult,
            })
            .collect();
        let mut spec = WorkloadSpec::new(models, num_gpus, mode);
        spec.grid = grid.to_vec();
        Ok(crate::scheduler::plan(&spec, profiles, intf)?
            .verdict
            .is_schedulable())
    };

    let eps = 1e-3;
    if !eval(eps)? {
        return Ok(0.0);
    }
    // ceiling of the scheduler verdict alone
    let mut ceiling = 1.0f64.max(2.0 * eps);
    let mut doublings = 0;
    while schedulable(ceiling)? {
        ceiling *= 2.0;
        doublings += 1;
        if doublings > 30 {
            break;
        }
    }
    // The violation gate need not be monotone in the rate (packings change
    // shape), so scan a descending grid below the ceiling for the highest
    // passing point, then refine toward its failing neighbor.
    const GRID: u32 = 32;
    let mut lo = eps;
    let mut hi = ceiling;
    for k in (1..=GRID).rev() {
        let m = ceiling * k as f64 / GRID as f64;
        if m <= eps {
            break;
        }
        if eval(m)? {
            lo = m;
            hi = ceiling * (k + 1) as f64 / GRID as f64;
            break;
        }
    }
    while hi - lo > search.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(base_total * lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{LatencyProfile, SoloStats};
    use crate::scheduler::{plan, Mode, WorkloadModel, WorkloadSpec};
    use std::collections::BTreeMap as Map;

    fn test_profiles() -> ProfileSet {
        // L(b,p) = 1 + 2·b/(p/100), batches {1,2,4,8,16,32}
        let parts = [20u32, 40, 50, 60, 80, 100];
        let mut entries = Map::new();
        for &b in &[1u32, 2, 4, 8, 16, 32] {
            for &p in &parts {
                entries.insert((b, p), 1.0 + 2.0 * b as f64 / (p as f64 / 100.0));
            }
        }
        let utils: Map<u32, SoloStats> = parts
            .iter()
            .map(|&p| {
                (
                    p,
                    SoloStats {
                        l2: 0.3,
                        mem_bw: 0.3,
                    },
                )
            })
            .collect();
        ProfileSet::new([LatencyProfile::from_entries("m", &entries, &utils).unwrap()])
    }

    fn simple_plan(rate: f64, profiles: &ProfileSet) -> SchedulePlan {
        let spec = WorkloadSpec::new(
            vec![WorkloadModel {
                name: "m".into(),
                slo_ms: 150.0,
                rate,
            }],
            1,
            Mode::Gpulet,
        );
        plan(&spec, profiles, None).unwrap()
    }

    #[test]
    fn ewma_examples() {
        assert_eq!(ewma_rate(100.0, 200.0, 1.0), 200.0);
        assert_eq!(ewma_rate(100.0, 200.0, 0.5), 150.0);
        let mut r = 0.0;
        for _ in 0..200 {
            r = ewma_rate(r, 42.0, 0.3);
        }
        assert!((r - 42.0).abs() < 1e-6);
    }

    #[test]
    fn zero_arrivals_zero_everything() {
        let profiles = test_profiles();
        let p = simple_plan(50.0, &profiles);
        let streams = vec![RequestStream::poisson("m", 0.0, 1)];
        let cfg = SimConfig {
            duration_s: 40.0,
            ..Default::default()
        };
        let report = run(PlanSource::Static(&p), &streams, &profiles, None, &cfg).unwrap();
        let s = &report.per_model["m"];
        assert_eq!(s.arrivals, 0);
        assert_eq!(s.completed, 0);
        assert_eq!(s.violations, 0);
    }

    #[test]
    fn deterministic_replay_at_capacity_has_zero_violations() {
        let profiles = test_profiles();
        let rate = 100.0;
        let p = simple_plan(rate, &profiles);
        assert!(p.verdict.is_schedulable());
        let streams = vec![RequestStream::deterministic("m", rate)];
        let cfg = SimConfig {
            duration_s: 60.0,
            ..Default::default()
        };
        let report = run(PlanSource::Static(&p), &streams, &profiles, None, &cfg).unwrap();
        assert_eq!(
            report.per_model["m"].violations, 0,
            "stats: {:?}",
            report.per_model["m"]
        );
        assert!(report.per_model["m"].completed > 0);
    }

    #[test]
    fn reports_are_deterministic() {
        let profiles = test_profiles();
        let p = simple_plan(80.0, &profiles);
        let streams = vec![RequestStream::poisson("m", 60.0, 3)];
        let cfg = SimConfig {
            duration_s: 45.0,
            ..Default::default()
        };
        let a = run(PlanSource::Static(&p), &streams, &profiles, None, &cfg).unwrap();
        let b = run(PlanSource::Static(&p), &streams, &profiles, None, &cfg).unwrap();
        assert_eq!(a, b);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn throughput_accounting_identity() {
        let profiles = test_profiles();
        let p = simple_plan(90.0, &profiles);
        let streams = vec![RequestStream::poisson("m", 70.0, 11)];
        let cfg = SimConfig {
            duration_s: 60.0,
            ..Default::default()
        };
        let report = run(PlanSource::Static(&p), &streams, &profiles, None, &cfg).unwrap();
        let from_periods: f64 = report
            .periods
            .iter()
            .map(|r| r.throughput * report.period_s)
            .sum();
        let completed = report.per_model["m"].completed as f64;
        assert!((from_periods - completed).abs() < 1e-6);
        assert!(report.total_throughput() <= 70.0 * 1.1);
    }

    #[test]
    fn static_plan_must_cover_stream_models() {
        let profiles = test_profiles();
        let p = simple_plan(50.0, &profiles);
        let streams = vec![RequestStream::poisson("other", 10.0, 1)];
        assert!(matches!(
            run(
                PlanSource::Static(&p),
                &streams,
                &profiles,
                None,
                &SimConfig::default()
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_requires_period_above_reorg_latency() {
        let cfg = SimConfig {
            scheduling_period_s: 12.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn throughput_search_matches_analytic_capacity() {
        let profiles = test_profiles();
        let profile = profiles.get("m").unwrap();
        let slo = 150.0;
        // independent closed-form capacity: the best two-way split of the GPU
        let cap = |p: u32| -> f64 {
            let mut best = 0.0f64;
            for &b in profile.batches() {
                let l = profile.lookup_latency(b, p).unwrap();
                if 2.0 * l <= slo {
                    best = best.max(b as f64 * 1000.0 / l);
                }
            }
            best
        };
        let analytic = [vec![100u32], vec![20, 80], vec![40, 60], vec![50, 50]]
            .iter()
            .map(|c| c.iter().map(|&p| cap(p)).sum::<f64>())
            .fold(0.0, f64::max);
        let base = vec![WorkloadModel {
            name: "m".into(),
            slo_ms: slo,
            rate: 100.0,
        }];
        let got = max_achievable_throughput(
            &base,
            1,
            Mode::Gpulet,
            crate::profile::DEFAULT_PARTITION_GRID,
            &profiles,
            None,
            None,
            &ThroughputSearch::default(),
        )
        .unwrap();
        // within one bisection step of the closed-form value
        assert!(
            (got - analytic).abs() / analytic < 0.02,
            "got {got}, analytic {analytic}"
        );
    }

    #[test]
    fn throughput_search_returns_zero_when_unschedulable() {
        let profiles = test_profiles();
        // SLO below L(1, 100): no rate is schedulable
        let base = vec![WorkloadModel {
            name: "m".into(),
            slo_ms: 2.0,
            rate: 100.0,
        }];
        let got = max_achievable_throughput(
            &base,
            1,
            Mode::Gpulet,
            crate::profile::DEFAULT_PARTITION_GRID,
            &profiles,
            None,
            None,
            &ThroughputSearch::default(),
        )
        .unwrap();
        assert_eq!(got, 0.0);
    }
}
