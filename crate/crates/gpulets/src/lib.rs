//! SLO-aware scheduling of multi-model ML inference workloads onto spatially
//! partitioned virtual GPUs ("gpulets"), with real GPUs replaced by
//! profile-driven simulation.
//!
//! The crate provides:
//! - [`profile`]: per-model latency/utilization tables and the derived
//!   capacity curves, knee (`p_eff`) and minimum-required (`p_req`)
//!   partition queries,
//! - [`interference`]: a five-coefficient linear predictor of the co-run
//!   slowdown between two gpulets sharing a physical GPU,
//! - [`partition`]: the gpulet inventory with split / temporal-merge /
//!   revert-split primitives,
//! - [`scheduler`]: elastic partitioning (with and without interference
//!   awareness), the squishy-bin-packing baseline, and an exhaustive ideal
//!   oracle,
//! - [`sim`]: a deterministic discrete-event simulator executing plans
//!   against request streams, with periodic rescheduling and reorganization
//!   cost,
//! - [`experiments`]: the experiment drivers (schedulability sweeps,
//!   max-throughput search, multi-model app scenarios, rate-fluctuation
//!   runs, synthetic profile generation) behind the CLI and the examples.

pub mod error;
pub mod experiments;
pub mod interference;
pub mod partition;
pub mod profile;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
pub use interference::{CoRunSample, InterferenceModel};
pub use partition::{Gpulet, GpuletInventory, Lane};
pub use profile::{CapacityCurve, LatencyProfile, ModelSpec, ProfileSet};
pub use scheduler::{Mode, SchedulePlan, Verdict, WorkloadModel, WorkloadSpec};
pub use sim::{SimConfig, SimulationReport};
