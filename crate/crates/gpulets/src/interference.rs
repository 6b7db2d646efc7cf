//! Linear interference-factor model for two gpulets co-running on one
//! physical GPU.
//!
//! The factor (co-run latency / solo latency) is predicted from the two
//! models' solo-run L2 and memory-bandwidth utilizations:
//!
//! `factor = c1·l2_a + c2·l2_b + c3·mem_a + c4·mem_b + c5`
//!
//! Coefficients are fitted by ordinary least squares on co-run samples; a
//! held-out split yields a relative-error CDF. Predictions are clamped below
//! at 1.0 — a co-run never speeds execution up, and the clamp keeps fit
//! noise from being exploited by the scheduler.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::profile::{LatencyProfile, SoloStats};

/// One observed co-run: the two models' solo utilizations and the measured
/// latency ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoRunSample {
    pub l2_a: f64,
    pub l2_b: f64,
    pub mem_a: f64,
    pub mem_b: f64,
    pub observed_factor: f64,
}

impl CoRunSample {
    fn validate(&self) -> Result<()> {
        for (label, v) in [
            ("l2_a", self.l2_a),
            ("l2_b", self.l2_b),
            ("mem_a", self.mem_a),
            ("mem_b", self.mem_b),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Fit(format!("{label}={v} out of [0,1]")));
            }
        }
        if self.observed_factor <= 0.0 {
            return Err(Error::Fit(format!(
                "observed_factor={} must be positive",
                self.observed_factor
            )));
        }
        Ok(())
    }
}

/// Fitted (or planted) coefficients c1..c5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceModel {
    pub coef: [f64; 5],
}

impl InterferenceModel {
    pub fn new(coef: [f64; 5]) -> Self {
        Self { coef }
    }

    /// A model that predicts no slowdown for any pair.
    pub fn none() -> Self {
        Self {
            coef: [0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    /// Built-in mild default used by experiments when no fitted model is
    /// supplied: low-utilization pairs clamp to 1.0, high-utilization pairs
    /// reach ~1.5x.
    pub fn default_mild() -> Self {
        Self {
            coef: [0.25, 0.25, 0.4, 0.4, 0.4],
        }
    }

    /// Unclamped linear prediction.
    pub fn raw_predict(&self, a: SoloStats, b: SoloStats) -> f64 {
        let [c1, c2, c3, c4, c5] = self.coef;
        c1 * a.l2 + c2 * b.l2 + c3 * a.mem_bw + c4 * b.mem_bw + c5
    }

    /// Interference factor, clamped below at 1.0.
    pub fn predict(&self, a: SoloStats, b: SoloStats) -> f64 {
        self.raw_predict(a, b).max(1.0)
    }

    /// Additional latency for executing a batch of `b` requests of model `a`
    /// at partition `p` while the partner gpulet co-runs on the same GPU.
    /// Zero when the gpulet is alone on the physical GPU.
    pub fn overhead_ms(
        &self,
        profile_a: &LatencyProfile,
        b: u32,
        p: u32,
        partner: Option<(&LatencyProfile, u32)>,
    ) -> Result<f64> {
        let Some((profile_b, p_b)) = partner else {
            return Ok(0.0);
        };
        let exec = profile_a.lookup_latency(b, p)?;
        let factor = self.predict(profile_a.solo_stats(p)?, profile_b.solo_stats(p_b)?);
        Ok(exec * (factor - 1.0))
    }
}

/// Empirical relative-error distribution on a validation split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorCdf {
    /// Sorted ascending.
    errors: Vec<f64>,
}

impl ErrorCdf {
    pub fn from_errors(mut errors: Vec<f64>) -> Self {
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { errors }
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// Nearest-rank quantile, `q` in (0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        if self.errors.is_empty() {
            return 0.0;
        }
        let rank = (q * self.errors.len() as f64).ceil() as usize;
        self.errors[rank.clamp(1, self.errors.len()) - 1]
    }

    /// Writes `percentile,relative_error` rows for percentiles 1..=100.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["percentile", "relative_error"])?;
        for pct in 1..=100u32 {
            let q = self.quantile(pct as f64 / 100.0);
            w.write_record([pct.to_string(), format!("{q}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of [`fit`]: the model plus its held-out error distribution.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: InterferenceModel,
    pub validation: ErrorCdf,
    pub train_count: usize,
    pub validation_count: usize,
}

/// Fits c1..c5 by least squares on a random train split and evaluates
/// relative error on the remainder. The split is seeded so runs reproduce.
pub fn fit(samples: &[CoRunSample], train_fraction: f64, seed: u64) -> Result<FitReport> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Fit(format!(
            "train_fraction={train_fraction} out of [0,1]"
        )));
    }
    for s in samples {
        s.validate()?;
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = ((samples.len() as f64 * train_fraction).round() as usize).min(samples.len());
    if n_train < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 training samples for 5 coefficients, got {n_train}"
        )));
    }
    let (train_idx, valid_idx) = order.split_at(n_train);

    let mut design = DMatrix::<f64>::zeros(n_train, 5);
    let mut target = DVector::<f64>::zeros(n_train);
    for (row, &i) in train_idx.iter().enumerate() {
        let s = &samples[i];
        design[(row, 0)] = s.l2_a;
        design[(row, 1)] = s.l2_b;
        design[(row, 2)] = s.mem_a;
        design[(row, 3)] = s.mem_b;
        design[(row, 4)] = 1.0;
        target[row] = s.observed_factor;
    }

    let svd = design.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-10)
        .count();
    if rank < 5 {
        return Err(Error::Fit(format!(
            "design matrix is rank-deficient (rank {rank} of 5); provide more diverse samples"
        )));
    }
    let solution = svd
        .solve(&target, smax * 1e-12)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let model = InterferenceModel::new([
        solution[0],
        solution[1],
        solution[2],
        solution[3],
        solution[4],
    ]);

    let errors = valid_idx
        .iter()
        .map(|&i| {
            let s = &samples[i];
            let pred = model.raw_predict(
                SoloStats {
                    l2: s.l2_a,
                    mem_bw: s.mem_a,
                },
                SoloStats {
                    l2: s.l2_b,
                    mem_bw: s.mem_b,
                },
            );
            (pred - s.observed_factor).abs() / s.observed_factor
        })
        .collect();

    Ok(FitReport {
        model,
        validation: ErrorCdf::from_errors(errors),
        train_count: n_train,
        validation_count: valid_idx.len(),
    })
}

/// Generates co-run samples from a planted model over uniform-random
/// utilizations, with optional relative Gaussian noise on the observation.
pub fn synth_corun_samples(
    truth: &InterferenceModel,
    count: usize,
    noise_sigma: f64,
    seed: u64,
) -> Vec<CoRunSample> {
    use rand::Rng;
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    (0..count)
        .map(|_| {
            let l2_a = rng.gen::<f64>();
            let l2_b = rng.gen::<f64>();
            let mem_a = rng.gen::<f64>();
            let mem_b = rng.gen::<f64>();
            let base = truth.raw_predict(
                SoloStats {
                    l2: l2_a,
                    mem_bw: mem_a,
                },
                SoloStats {
                    l2: l2_b,
                    mem_bw: mem_b,
                },
            );
            let noise = if noise_sigma > 0.0 {
                noise_sigma * normal.sample(&mut rng)
            } else {
                0.0
            };
            CoRunSample {
                l2_a,
                l2_b,
                mem_a,
                mem_b,
                observed_factor: (base * (1.0 + noise)).max(1e-3),
            }
        })
        .collect()
}

/// Reads co-run samples from CSV rows `l2_a,l2_b,mem_a,mem_b,observed_factor`.
pub fn load_samples(reader: impl Read) -> Result<Vec<CoRunSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing column {i}"),
                })?
                .parse()
                .map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad float: {e}"),
                })
        };
        let s = CoRunSample {
            l2_a: field(0)?,
            l2_b: field(1)?,
            mem_a: field(2)?,
            mem_b: field(3)?,
            observed_factor: field(4)?,
        };
        s.validate().map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

/// Writes co-run samples in the same CSV layout `load_samples` reads.
pub fn write_samples(samples: &[CoRunSample], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["l2_a", "l2_b", "mem_a", "mem_b", "observed_factor"])?;
    for s in samples {
        w.write_record([
            format!("{}", s.l2_a),
            format!("{}", s.l2_b),
            format!("{}", s.mem_a),
            format!("{}", s.mem_b),
            format!("{}", s.observed_factor),
        ])?;
    }
    w.flush()?;
    Ok(())
}
