//! Request arrival generation: seeded Poisson (inverse-CDF exponential
//! inter-arrivals) or deterministic uniform spacing, over piecewise-constant
//! rate traces.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Piecewise-constant request rate λ(t): `segments[i] = (start_s, rate)`,
/// each holding until the next start (the last until the horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct RateTrace {
    segments: Vec<(f64, f64)>,
}

impl RateTrace {
    pub fn constant(rate: f64) -> Self {
        Self {
            segments: vec![(0.0, rate.max(0.0))],
        }
    }

    pub fn new(mut segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("rate trace has no segments".into()));
        }
        segments.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(t, r) in &segments {
            if t < 0.0 || !t.is_finite() {
                return Err(Error::Config(format!("bad segment start {t}")));
            }
            if r < 0.0 || !r.is_finite() {
                return Err(Error::Config(format!("bad segment rate {r}")));
            }
        }
        if segments[0].0 > 0.0 {
            segments.insert(0, (0.0, 0.0));
        }
        Ok(Self { segments })
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        let mut rate = self.segments[0].1;
        for &(start, r) in &self.segments {
            if start <= t {
                rate = r;
            } else {
                break;
            }
        }
        rate
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    /// Mean offered rate over [0, duration).
    pub fn mean_rate(&self, duration_s: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(start, rate)) in self.segments.iter().enumerate() {
            let end = self
                .segments
                .get(i + 1)
                .map_or(duration_s, |s| s.0)
                .min(duration_s);
            if end > start {
                total += rate * (end - start);
            }
        }
        total / duration_s
    }
}

/// How inter-arrival times are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalKind {
    /// Exponential inter-arrivals (memoryless), seeded.
    Poisson,
    /// Uniform spacing 1/λ — the replay mode used by soundness checks.
    Deterministic,
}

/// One model's request stream.
#[derive(Debug, Clone)]
pub struct RequestStream {
    pub model: String,
    pub trace: RateTrace,
    pub seed: u64,
    pub kind: ArrivalKind,
}

impl RequestStream {
    pub fn poisson(model: impl Into<String>, rate: f64, seed: u64) -> Self {
        Self {
            model: model.into(),
            trace: RateTrace::constant(rate),
            seed,
            kind: ArrivalKind::Poisson,
        }
    }

    pub fn deterministic(model: impl Into<String>, rate: f64) -> Self {
        Self {
            model: model.into(),
            trace: RateTrace::constant(rate),
            seed: 0,
            kind: ArrivalKind::Deterministic,
        }
    }
}

/// Ordered arrival timestamps on [0, duration). Identical streams produce
/// identical sequences; piecewise-constant rates are generated per segment.
pub fn generate_arrivals(stream: &RequestStream, duration_s: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream.seed);
    let mut out = Vec::new();
    let segs = stream.trace.segments();
    for (i, &(start, rate)) in segs.iter().enumerate() {
        let end = segs.get(i + 1).map_or(duration_s, |s| s.0).min(duration_s);
        if rate <= 0.0 || end <= start {
            continue;
        }
        match stream.kind {
            ArrivalKind::Poisson => {
                let mut t = start;
                loop {
                    // inverse-CDF exponential draw
                    let u: f64 = rng.gen::<f64>();
                    t += -(1.0 - u).ln() / rate;
                    if t >= end {
                        break;
                    }
                    out.push(t);
                }
            }
            ArrivalKind::Deterministic => {
                let step = 1.0 / rate;
                let mut k = 1u64;
                loop {
                    let t = start + k as f64 * step;
                    if t >= end {
                        break;
                    }
                    out.push(t);
                    k += 1;
                }
            }
        }
    }
    out
}

/// Reads a `time_s,model,rate` trace CSV into per-model rate traces.
pub fn load_traces(reader: impl Read) -> Result<std::collections::BTreeMap<String, RateTrace>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut raw: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let time: f64 = record
            .get(0)
            .ok_or_else(|| Error::Parse {
                line,
                msg: "missing time_s".into(),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                line,
                msg: format!("bad time_s: {e}"),
            })?;
        let model = record
            .get(1)
            .ok_or_else(|| Error::Parse {
                line,
                msg: "missing model".into(),
            })?
            .to_string();
        let rate: f64 = record
            .get(2)
            .ok_or_else(|| Error::Parse {
                line,
                msg: "missing rate".into(),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                line,
                msg: format!("bad rate: {e}"),
            })?;
        raw.entry(model).or_default().push((time, rate));
    }
    raw.into_iter()
        .map(|(m, segs)| RateTrace::new(segs).map(|t| (m, t)))
        .collect()
}
