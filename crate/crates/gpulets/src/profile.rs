//! Per-model latency/utilization profiles and the derived quantities the
//! scheduler consumes: SLO-feasible batch sizes, capacity-vs-partition curves,
//! the cost-effectiveness knee (`p_eff`) and the minimum required partition
//! (`p_req`).
//!
//! A profile tabulates `L(b, p)`: the latency of executing a batch of `b`
//! requests on a gpulet owning `p` percent of one GPU's compute resource,
//! plus the model's solo-run L2 and memory-bandwidth utilization per
//! partition size. Profiles are immutable after load and safe to share.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Partition sizes (percent of one GPU) used throughout: the union of the
/// split ratios and the 20–100% sweep exercised by the evaluation.
pub const DEFAULT_PARTITION_GRID: &[u32] = &[20, 40, 50, 60, 80, 100];

/// Batch sizes tabulated by the synthetic profile generator.
pub const DEFAULT_BATCH_GRID: &[u32] = &[1, 2, 4, 8, 16, 32];

/// A served model: its latency budget and the largest batch its profile covers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub slo_ms: f64,
    pub max_batch: u32,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, slo_ms: f64, max_batch: u32) -> Result<Self> {
        let name = name.into();
        if slo_ms <= 0.0 {
            return Err(Error::Config(format!("model '{name}': slo_ms must be > 0")));
        }
        if max_batch < 1 {
            return Err(Error::Config(format!(
                "model '{name}': max_batch must be >= 1"
            )));
        }
        Ok(Self {
            name,
            slo_ms,
            max_batch,
        })
    }
}

/// Solo-run utilization statistics at one partition size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoloStats {
    pub l2: f64,
    pub mem_bw: f64,
}

/// Latency table of one model: `L(b, p)` over a batch grid × partition grid,
/// plus per-partition solo-run utilizations.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyProfile {
    name: String,
    batches: Vec<u32>,
    partitions: Vec<u32>,
    /// latency_ms[batch_idx][part_idx]
    latency_ms: Vec<Vec<f64>>,
    l2_util: Vec<f64>,
    mem_bw_util: Vec<f64>,
}

impl LatencyProfile {
    /// Builds and validates a profile from raw (batch, partition, latency)
    /// entries plus per-partition utilizations.
    pub fn from_entries(
        name: impl Into<String>,
        entries: &BTreeMap<(u32, u32), f64>,
        utils: &BTreeMap<u32, SoloStats>,
    ) -> Result<Self> {
        let name = name.into();
        let mut batches: Vec<u32> = entries.keys().map(|&(b, _)| b).collect();
        batches.sort_unstable();
        batches.dedup();
        let mut partitions: Vec<u32> = entries.keys().map(|&(_, p)| p).collect();
        partitions.sort_unstable();
        partitions.dedup();
        if batches.is_empty() {
            return Err(Error::Data {
                model: name,
                msg: "empty latency table".into(),
            });
        }

        let mut latency_ms = vec![vec![0.0; partitions.len()]; batches.len()];
        for (bi, &b) in batches.iter().enumerate() {
            for (pi, &p) in partitions.iter().enumerate() {
                match entries.get(&(b, p)) {
                    Some(&l) if l > 0.0 => latency_ms[bi][pi] = l,
                    Some(_) => {
                        return Err(Error::Data {
                            model: name,
                            msg: format!("non-positive latency at (b={b}, p={p})"),
                        })
                    }
                    // the partition grid must be identical for every batch size
                    None => {
                        return Err(Error::Data {
                            model: name,
                            msg: format!("missing entry (b={b}, p={p}); grid must be rectangular"),
                        })
                    }
                }
            }
        }

        let mut l2_util = Vec::with_capacity(partitions.len());
        let mut mem_bw_util = Vec::with_capacity(partitions.len());
        for &p in &partitions {
            let s = utils.get(&p).ok_or_else(|| Error::Data {
                model: name.clone(),
                msg: format!("missing utilization stats for partition {p}%"),
            })?;
            for (label, v) in [("l2_util", s.l2), ("mem_bw_util", s.mem_bw)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Data {
                        model: name,
                        msg: format!("{label}={v} out of [0,1] at partition {p}%"),
                    });
                }
            }
            l2_util.push(s.l2);
            mem_bw_util.push(s.mem_bw);
        }

        let profile = Self {
            name,
            batches,
            partitions,
            latency_ms,
            l2_util,
            mem_bw_util,
        };
        profile.validate_monotonicity()?;
        Ok(profile)
    }

    /// Latency must be non-decreasing in batch size at fixed partition, and
    /// non-increasing in partition size at fixed batch.
    fn validate_monotonicity(&self) -> Result<()> {
        for pi in 0..self.partitions.len() {
            for bi in 1..self.batches.len() {
                if self.latency_ms[bi][pi] < self.latency_ms[bi - 1][pi] {
                    return Err(Error::Data {
                        model: self.name.clone(),
                        msg: format!(
                            "latency decreases with batch size at (b={}, p={}): {} < {}",
                            self.batches[bi],
                            self.partitions[pi],
                            self.latency_ms[bi][pi],
                            self.latency_ms[bi - 1][pi]
                        ),
                    });
                }
            }
        }
        for bi in 0..self.batches.len() {
            for pi in 1..self.partitions.len() {
                if self.latency_ms[bi][pi] > self.latency_ms[bi][pi - 1] {
                    return Err(Error::Data {
                        model: self.name.clone(),
                        msg: format!(
                            "latency increases with partition size at (b={}, p={}): {} > {}",
                            self.batches[bi],
                            self.partitions[pi],
                            self.latency_ms[bi][pi],
                            self.latency_ms[bi][pi - 1]
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn batches(&self) -> &[u32] {
        &self.batches
    }

    pub fn partitions(&self) -> &[u32] {
        &self.partitions
    }

    pub fn max_batch(&self) -> u32 {
        *self.batches.last().unwrap()
    }

    fn part_idx(&self, p: u32) -> Result<usize> {
        self.partitions
            .iter()
            .position(|&g| g == p)
            .ok_or(Error::OffGrid {
                model: self.name.clone(),
                partition: p,
            })
    }

    /// Solo-run utilization stats at partition `p` (on-grid lookup only).
    pub fn solo_stats(&self, p: u32) -> Result<SoloStats> {
        let pi = self.part_idx(p)?;
        Ok(SoloStats {
            l2: self.l2_util[pi],
            mem_bw: self.mem_bw_util[pi],
        })
    }

    /// Batch latency lookup. Untabulated batches resolve to the smallest
    /// tabulated batch >= `b` (a conservative ceiling); batches beyond the
    /// table are a capacity error.
    pub fn lookup_latency(&self, b: u32, p: u32) -> Result<f64> {
        let pi = self.part_idx(p)?;
        if b == 0 {
            return Ok(0.0);
        }
        match self.batches.iter().position(|&tb| tb >= b) {
            Some(bi) => Ok(self.latency_ms[bi][pi]),
            None => Err(Error::BatchCapacity {
                model: self.name.clone(),
                batch: b,
                max: self.max_batch(),
            }),
        }
    }

    /// Duty cycle paired with a batch execution: the batch-building window
    /// equals the batch execution latency, so a request's worst-case solo
    /// latency is `2·L(b,p)`.
    pub fn duty_cycle_ms(&self, b: u32, p: u32) -> Result<f64> {
        self.lookup_latency(b, p)
    }

    /// Largest tabulated batch whose duty cycle plus execution plus a fixed
    /// interference allowance fits the SLO. `None` when even b=1 does not fit.
    pub fn max_feasible_batch(&self, p: u32, slo_ms: f64, overhead_ms: f64) -> Result<Option<u32>> {
        let pi = self.part_idx(p)?;
        for (bi, &b) in self.batches.iter().enumerate().rev() {
            let exec = self.latency_ms[bi][pi];
            if 2.0 * exec + overhead_ms <= slo_ms + FEAS_EPS {
                return Ok(Some(b));
            }
        }
        Ok(None)
    }

    /// Max sustainable request rate at each grid partition under `slo_ms`,
    /// scanning every feasible batch. Zero where no batch fits.
    pub fn capacity_curve(&self, slo_ms: f64) -> CapacityCurve {
        let mut rates = Vec::with_capacity(self.partitions.len());
        for pi in 0..self.partitions.len() {
            let mut best = 0.0f64;
            for bi in 0..self.batches.len() {
                let exec = self.latency_ms[bi][pi];
                if 2.0 * exec <= slo_ms + FEAS_EPS {
                    let rate = self.batches[bi] as f64 * 1000.0 / exec;
                    best = best.max(rate);
                }
            }
            rates.push(best);
        }
        CapacityCurve {
            model: self.name.clone(),
            partitions: self.partitions.clone(),
            rates,
        }
    }
}

/// Slack applied to feasibility comparisons so that float round-off on
/// exactly-tight inputs does not flip a verdict.
pub(crate) const FEAS_EPS: f64 = 1e-9;

/// Achievable request rate as a function of partition size.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityCurve {
    pub model: String,
    pub partitions: Vec<u32>,
    pub rates: Vec<f64>,
}

/// Result of a minimum-required-partition query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequiredPartition {
    pub partition: u32,
    /// True when even the largest grid point cannot cover the rate; the
    /// residual rate is handled by further scheduler iterations.
    pub saturating: bool,
}

impl CapacityCurve {
    pub fn rate_at(&self, p: u32) -> Option<f64> {
        self.partitions
            .iter()
            .position(|&g| g == p)
            .map(|i| self.rates[i])
    }

    /// The knee: interior grid point of maximum discrete curvature on the
    /// normalized curve (rates scaled to max 1, grid span to 1 — making the
    /// choice invariant under uniform rate scaling). Ties break toward the
    /// smaller partition; curves with fewer than 3 points fall back to the
    /// largest grid point.
    pub fn max_efficient_partition(&self) -> u32 {
        let n = self.partitions.len();
        if n < 3 {
            return *self
                .partitions
                .last()
                .expect("curve has at least one point");
        }
        let p0 = self.partitions[0] as f64;
        let span = self.partitions[n - 1] as f64 - p0;
        let rmax = self.rates.iter().cloned().fold(0.0, f64::max);
        let yscale = if rmax > 0.0 { rmax } else { 1.0 };
        let x: Vec<f64> = self
            .partitions
            .iter()
            .map(|&p| (p as f64 - p0) / span)
            .collect();
        let y: Vec<f64> = self.rates.iter().map(|r| r / yscale).collect();

        let mut best_i = 1;
        let mut best_mag = -1.0f64;
        for i in 1..n - 1 {
            let left = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            let right = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
            let kappa = (right - left) / ((x[i + 1] - x[i - 1]) / 2.0);
            // the epsilon keeps float noise from breaking the smaller-p tie rule
            if kappa.abs() > best_mag + 1e-9 {
                best_mag = kappa.abs();
                best_i = i;
            }
        }
        self.partitions[best_i]
    }

    /// Smallest grid partition whose capacity covers `rate`; the largest grid
    /// point flagged saturating when none does.
    pub fn min_required_partition(&self, rate: f64) -> RequiredPartition {
        for (i, &p) in self.partitions.iter().enumerate() {
            if self.rates[i] >= rate {
                return RequiredPartition {
                    partition: p,
                    saturating: false,
                };
            }
        }
        RequiredPartition {
            partition: *self.partitions.last().unwrap(),
            saturating: true,
        }
    }
}

/// An immutable set of validated profiles, keyed by model name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileSet {
    profiles: BTreeMap<String, LatencyProfile>,
}

impl ProfileSet {
    pub fn new(profiles: impl IntoIterator<Item = LatencyProfile>) -> Self {
        Self {
            profiles: profiles.into_iter().map(|p| (p.name.clone(), p)).collect(),
        }
    }

    pub fn get(&self, model: &str) -> Result<&LatencyProfile> {
        self.profiles
            .get(model)
            .ok_or_else(|| Error::Config(format!("no profile loaded for model '{model}'")))
    }

    pub fn contains(&self, model: &str) -> bool {
        self.profiles.contains_key(model)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatencyProfile> {
        self.profiles.values()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::load(file)
    }

    /// Loads profiles from CSV rows
    /// `model,batch,partition_pct,latency_ms,l2_util,mem_bw_util`.
    /// Utilizations repeat per partition row and must be consistent.
    pub fn load(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut entries: BTreeMap<String, BTreeMap<(u32, u32), f64>> = BTreeMap::new();
        let mut utils: BTreeMap<String, BTreeMap<u32, SoloStats>> = BTreeMap::new();

        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let parse = |idx: usize, what: &str| -> Result<&str> {
                record.get(idx).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing column '{what}'"),
                })
            };
            let model = parse(0, "model")?.to_string();
            let batch: u32 = parse(1, "batch")?.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad batch: {e}"),
            })?;
            let partition: u32 = parse(2, "partition_pct")?
                .parse()
                .map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad partition_pct: {e}"),
                })?;
            let latency: f64 = parse(3, "latency_ms")?.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad latency_ms: {e}"),
            })?;
            let l2: f64 = parse(4, "l2_util")?.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad l2_util: {e}"),
            })?;
            let mem: f64 = parse(5, "mem_bw_util")?.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad mem_bw_util: {e}"),
            })?;
            if batch == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "batch must be >= 1".into(),
                });
            }

            if let Some(prev) = entries
                .entry(model.clone())
                .or_default()
                .insert((batch, partition), latency)
            {
                if prev != latency {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "conflicting duplicate entry for ({model}, b={batch}, p={partition})"
                        ),
                    });
                }
            }
            let stats = SoloStats { l2, mem_bw: mem };
            if let Some(prev) = utils
                .entry(model.clone())
                .or_default()
                .insert(partition, stats)
            {
                if prev != stats {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "utilization stats for ({model}, p={partition}) differ between rows"
                        ),
                    });
                }
            }
        }

        let mut profiles = BTreeMap::new();
        for (model, table) in entries {
            let model_utils = utils.remove(&model).unwrap_or_default();
            let profile = LatencyProfile::from_entries(model.clone(), &table, &model_utils)?;
            profiles.insert(model, profile);
        }
        Ok(Self { profiles })
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(file)
    }

    /// Writes the profile CSV, rows ordered (model, batch, partition).
    pub fn write(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "model",
            "batch",
            "partition_pct",
            "latency_ms",
            "l2_util",
            "mem_bw_util",
        ])?;
        for profile in self.profiles.values() {
            for (bi, &b) in profile.batches.iter().enumerate() {
                for (pi, &p) in profile.partitions.iter().enumerate() {
                    w.write_record([
                        profile.name.clone(),
                        b.to_string(),
                        p.to_string(),
                        format!("{}", profile.latency_ms[bi][pi]),
                        format!("{}", profile.l2_util[pi]),
                        format!("{}", profile.mem_bw_util[pi]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(u32, u32, f64)]) -> BTreeMap<(u32, u32), f64> {
        rows.iter().map(|&(b, p, l)| ((b, p), l)).collect()
    }

    fn flat_utils(parts: &[u32]) -> BTreeMap<u32, SoloStats> {
        parts
            .iter()
            .map(|&p| {
                (
                    p,
                    SoloStats {
                        l2: 0.5,
                        mem_bw: 0.5,
                    },
                )
            })
            .collect()
    }

    /// L(b, 100%) = 5·b over batches {1,2,4,8,16}, single partition.
    fn linear_profile() -> LatencyProfile {
        let rows: Vec<(u32, u32, f64)> = [1, 2, 4, 8, 16]
            .iter()
            .map(|&b| (b, 100, 5.0 * b as f64))
            .collect();
        LatencyProfile::from_entries("lin", &table(&rows), &flat_utils(&[100])).unwrap()
    }

    #[test]
    fn load_maps_fields_directly() {
        let csv = "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n\
                   toy,1,20,10.0,0.30,0.25\n";
        let set = ProfileSet::load(csv.as_bytes()).unwrap();
        let p = set.get("toy").unwrap();
        assert_eq!(p.lookup_latency(1, 20).unwrap(), 10.0);
        let s = p.solo_stats(20).unwrap();
        assert_eq!(s.l2, 0.30);
        assert_eq!(s.mem_bw, 0.25);
    }

    #[test]
    fn load_rejects_batch_monotonicity_violation() {
        let csv = "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n\
                   toy,1,20,10.0,0.3,0.25\n\
                   toy,2,20,9.0,0.3,0.25\n";
        let err = ProfileSet::load(csv.as_bytes()).unwrap_err();
        match err {
            Error::Data { model, msg } => {
                assert_eq!(model, "toy");
                assert!(msg.contains("b=2"), "got: {msg}");
                assert!(msg.contains("p=20"), "got: {msg}");
            }
            other => panic!("expected data error, got {other}"),
        }
    }

    #[test]
    fn load_rejects_partition_monotonicity_violation() {
        let csv = "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n\
                   toy,1,20,10.0,0.3,0.25\n\
                   toy,1,40,12.0,0.4,0.3\n";
        assert!(matches!(
            ProfileSet::load(csv.as_bytes()).unwrap_err(),
            Error::Data { .. }
        ));
    }

    #[test]
    fn load_rejects_malformed_row_with_line_number() {
        let csv = "model,batch,partition_pct,latency_ms,l2_util,mem_bw_util\n\
                   toy,1,20,10.0,0.3,0.25\n\
                   toy,two,20,11.0,0.3,0.25\n";
        match ProfileSet::load(csv.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn lookup_exact_and_ceiling_and_capacity_error() {
        let rows = [
            (1, 40, 8.0),
            (2, 40, 12.0),
            (4, 40, 20.0),
            (8, 40, 36.0),
            (16, 40, 70.0),
            (32, 40, 140.0),
        ];
        let p = LatencyProfile::from_entries("m", &table(&rows), &flat_utils(&[40])).unwrap();
        assert_eq!(p.lookup_latency(4, 40).unwrap(), 20.0);
        // b=3 ceilings to the tabulated b=4
        assert_eq!(p.lookup_latency(3, 40).unwrap(), 20.0);
        match p.lookup_latency(64, 40).unwrap_err() {
            Error::BatchCapacity { batch, max, .. } => {
                assert_eq!(batch, 64);
                assert_eq!(max, 32);
            }
            other => panic!("expected capacity error, got {other}"),
        }
        assert!(matches!(
            p.lookup_latency(4, 33).unwrap_err(),
            Error::OffGrid { .. }
        ));
    }

    /// Brute-force oracle: scan every tabulated batch for the feasibility
    /// inequality and keep the largest.
    fn brute_max_feasible(p: &LatencyProfile, part: u32, slo: f64, ov: f64) -> Option<u32> {
        let mut best = None;
        for &b in p.batches() {
            let l = p.lookup_latency(b, part).unwrap();
            if 2.0 * l + ov <= slo + FEAS_EPS {
                best = Some(b);
            }
        }
        best
    }

    #[test]
    fn max_feasible_batch_matches_brute_force() {
        let p = linear_profile();
        // 2·5b <= 130 → b <= 13 → largest tabulated is 8
        assert_eq!(p.max_feasible_batch(100, 130.0, 0.0).unwrap(), Some(8));
        assert_eq!(brute_max_feasible(&p, 100, 130.0, 0.0), Some(8));
        // overhead 60 excludes b=8 (80+60 <= 130 fails) but not b=4 (40+60 <= 130)
        assert_eq!(p.max_feasible_batch(100, 130.0, 60.0).unwrap(), Some(4));
        assert_eq!(brute_max_feasible(&p, 100, 130.0, 60.0), Some(4));
        // SLO below L(1, p) → nothing fits
        assert_eq!(p.max_feasible_batch(100, 9.0, 0.0).unwrap(), None);
    }

    #[test]
    fn max_feasible_batch_is_maximal() {
        let p = linear_profile();
        let b = p.max_feasible_batch(100, 130.0, 0.0).unwrap().unwrap();
        let l = p.lookup_latency(b, 100).unwrap();
        assert!(2.0 * l <= 130.0);
        if let Some(next) = p.batches().iter().find(|&&nb| nb > b) {
            let ln = p.lookup_latency(*next, 100).unwrap();
            assert!(2.0 * ln > 130.0);
        }
    }

    #[test]
    fn capacity_curve_matches_exhaustive_scan() {
        // L(b,p) = c·b/(p/100) with c = 2 ms
        let parts = [20u32, 40, 50, 60, 80, 100];
        let mut rows = Vec::new();
        for &b in &[1u32, 2, 4, 8] {
            for &p in &parts {
                rows.push((b, p, 2.0 * b as f64 / (p as f64 / 100.0)));
            }
        }
        let prof = LatencyProfile::from_entries("m", &table(&rows), &flat_utils(&parts)).unwrap();
        let slo = 40.0;
        let curve = prof.capacity_curve(slo);
        for (i, &p) in parts.iter().enumerate() {
            let mut best = 0.0f64;
            for &b in prof.batches() {
                let l = prof.lookup_latency(b, p).unwrap();
                if 2.0 * l <= slo + FEAS_EPS {
                    best = best.max(b as f64 * 1000.0 / l);
                }
            }
            assert_eq!(curve.rates[i], best, "at p={p}");
        }
        // non-decreasing in p
        for w in curve.rates.windows(2) {
            assert!(w[0] <= w[1] + FEAS_EPS);
        }
    }

    #[test]
    fn capacity_curve_zero_when_infeasible() {
        let rows = [(1, 20, 30.0), (1, 100, 10.0)];
        let prof =
            LatencyProfile::from_entries("m", &table(&rows), &flat_utils(&[20, 100])).unwrap();
        let curve = prof.capacity_curve(50.0);
        assert_eq!(curve.rate_at(20), Some(0.0)); // 2·30 > 50
        assert_eq!(curve.rate_at(100), Some(100.0)); // 1/(10ms)
    }

    #[test]
    fn capacity_curve_single_point_grid() {
        let rows = [(1, 100, 10.0)];
        let prof = LatencyProfile::from_entries("m", &table(&rows), &flat_utils(&[100])).unwrap();
        let curve = prof.capacity_curve(25.0);
        assert_eq!(curve.partitions, vec![100]);
        assert_eq!(curve.rates.len(), 1);
    }

    #[test]
    fn knee_of_worked_curve_is_40() {
        let curve = CapacityCurve {
            model: "m".into(),
            partitions: vec![20, 40, 60, 80, 100],
            rates: vec![100.0, 200.0, 240.0, 260.0, 270.0],
        };
        assert_eq!(curve.max_efficient_partition(), 40);
    }

    #[test]
    fn knee_is_scale_invariant() {
        let base = CapacityCurve {
            model: "m".into(),
            partitions: vec![20, 40, 60, 80, 100],
            rates: vec![100.0, 200.0, 240.0, 260.0, 270.0],
        };
        for scale in [0.001, 0.5, 7.0, 1234.5] {
            let scaled = CapacityCurve {
                model: "m".into(),
                partitions: base.partitions.clone(),
                rates: base.rates.iter().map(|r| r * scale).collect(),
            };
            assert_eq!(scaled.max_efficient_partition(), 40, "scale {scale}");
        }
    }

    #[test]
    fn knee_linear_curve_ties_to_smallest_interior() {
        let curve = CapacityCurve {
            model: "m".into(),
            partitions: vec![20, 40, 60, 80],
            rates: vec![100.0, 200.0, 300.0, 400.0],
        };
        assert_eq!(curve.max_efficient_partition(), 40);
    }

    #[test]
    fn knee_two_point_curve_falls_back_to_largest() {
        let curve = CapacityCurve {
            model: "m".into(),
            partitions: vec![40, 100],
            rates: vec![10.0, 20.0],
        };
        assert_eq!(curve.max_efficient_partition(), 100);
    }

    #[test]
    fn min_required_partition_examples() {
        let curve = CapacityCurve {
            model: "m".into(),
            partitions: vec![20, 40, 60],
            rates: vec![100.0, 200.0, 240.0],
        };
        assert_eq!(
            curve.min_required_partition(150.0),
            RequiredPartition {
                partition: 40,
                saturating: false
            }
        );
        assert_eq!(
            curve.min_required_partition(500.0),
            RequiredPartition {
                partition: 60,
                saturating: true
            }
        );
        assert_eq!(
            curve.min_required_partition(0.0),
            RequiredPartition {
                partition: 20,
                saturating: false
            }
        );
        // brute-force: the returned point is the unique smallest feasible one
        let req = curve.min_required_partition(150.0);
        for (i, &p) in curve.partitions.iter().enumerate() {
            if p < req.partition {
                assert!(curve.rates[i] < 150.0);
            }
        }
    }
}
