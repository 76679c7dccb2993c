//! Data layer: excitation synthesis, experiment-log CSV I/O, preprocessing
//! and train/test splitting.
//!
//! Dataset CSV schema:
//!
//! ```text
//! # label: <free text>        (optional, before the header)
//! # dt: <sample period>       (optional, before the header)
//! t,u,psi[,r]
//! <seconds>,<PWM units>,<radians>[,<rad/s>]
//! ```
//!
//! `#` comment lines are only permitted before the header. `# label:` sets
//! the dataset label and `# dt:` pins the sample period exactly; readers
//! without the hint fall back to the median time delta. Numbers use `.` as
//! the decimal point and are emitted in shortest round-trip form, LF line
//! endings (CRLF accepted on input).

use crate::sim::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Read, Write};
use thiserror::Error;

/// Practical minimum record length for estimation.
pub const MIN_ESTIMATION_SAMPLES: usize = 50;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid wave spec: {0}")]
    InvalidWaveSpec(&'static str),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("non-uniform sampling at line {line}: delta {delta} deviates more than 1% from median {median}")]
    NonUniformSampling {
        line: usize,
        delta: f64,
        median: f64,
    },
    #[error("non-finite value at line {line}, column {column}")]
    NonFiniteValue { line: usize, column: usize },
    #[error("too few samples: {got} (need at least {min})")]
    TooFewSamples { got: usize, min: usize },
    #[error("split too small: parts of {train} and {test} samples (both need >= {min})")]
    SplitTooSmall {
        train: usize,
        test: usize,
        min: usize,
    },
    #[error("invalid dataset: {0}")]
    InvalidDataset(&'static str),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Uniformly sampled experiment log: PWM input `u`, yaw angle `psi` and an
/// optional yaw-rate channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    sample_period: f64,
    time_origin: f64,
    input_u: TimeSeries,
    output_yaw: TimeSeries,
    output_rate: Option<TimeSeries>,
    label: String,
}

impl TimeSeriesDataset {
    pub fn new(
        sample_period: f64,
        time_origin: f64,
        input_u: Vec<f64>,
        output_yaw: Vec<f64>,
        output_rate: Option<Vec<f64>>,
        label: impl Into<String>,
    ) -> Result<Self, SignalError> {
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(SignalError::InvalidDataset("sample_period must be > 0"));
        }
        if !time_origin.is_finite() {
            return Err(SignalError::InvalidDataset("time_origin must be finite"));
        }
        if input_u.len() != output_yaw.len() {
            return Err(SignalError::InvalidDataset("input and yaw lengths differ"));
        }
        if let Some(r) = &output_rate {
            if r.len() != input_u.len() {
                return Err(SignalError::InvalidDataset("rate channel length differs"));
            }
        }
        if input_u.len() < 4 {
            return Err(SignalError::TooFewSamples {
                got: input_u.len(),
                min: 4,
            });
        }
        let mk = |v: Vec<f64>| {
            TimeSeries::new(sample_period, v)
                .map_err(|_| SignalError::InvalidDataset("non-finite sample"))
        };
        Ok(Self {
            sample_period,
            time_origin,
            input_u: mk(input_u)?,
            output_yaw: mk(output_yaw)?,
            output_rate: output_rate.map(mk).transpose()?,
            label: label.into(),
        })
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn time_origin(&self) -> f64 {
        self.time_origin
    }

    pub fn input_u(&self) -> &TimeSeries {
        &self.input_u
    }

    pub fn output_yaw(&self) -> &TimeSeries {
        &self.output_yaw
    }

    pub fn output_rate(&self) -> Option<&TimeSeries> {
        self.output_rate.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.input_u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_u.is_empty()
    }

    /// Time of sample `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        self.time_origin + k as f64 * self.sample_period
    }
}

/// Symmetric square wave: `+amplitude` while the fractional phase of the
/// cycle is below `duty`, `-amplitude` otherwise. The first sample is on
/// the positive half. Length is `floor(duration / dt)`.
pub fn square_wave(
    amplitude: f64,
    period: f64,
    duration: f64,
    dt: f64,
    duty: f64,
) -> Result<TimeSeries, SignalError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SignalError::InvalidWaveSpec("dt must be > 0"));
    }
    if !(period.is_finite() && period >= 2.0 * dt) {
        return Err(SignalError::InvalidWaveSpec("period must be >= 2*dt"));
    }
    if !(duration.is_finite() && duration >= period) {
        return Err(SignalError::InvalidWaveSpec("duration must be >= period"));
    }
    if !(duty.is_finite() && duty > 0.0 && duty < 1.0) {
        return Err(SignalError::InvalidWaveSpec("duty must be in (0, 1)"));
    }
    if !amplitude.is_finite() {
        return Err(SignalError::InvalidWaveSpec("amplitude must be finite"));
    }
    let n = (duration / dt).floor() as usize;
    let values = (0..n)
        .map(|k| {
            let phase = (k as f64 * dt) % period / period;
            if phase < duty {
                amplitude
            } else {
                -amplitude
            }
        })
        .collect();
    TimeSeries::new(dt, values).map_err(|_| SignalError::InvalidWaveSpec("non-finite samples"))
}

/// Additive Gaussian measurement noise.
///
/// Determinism contract: the stream is ChaCha8 seeded with the 64-bit seed,
/// and normal variates come from the Box-Muller transform of consecutive
/// uniform pairs. Identical seeds give bit-identical output everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    std_dev: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(std_dev: f64, seed: u64) -> Result<Self, SignalError> {
        if !(std_dev.is_finite() && std_dev >= 0.0) {
            return Err(SignalError::InvalidDataset("noise std_dev must be >= 0"));
        }
        Ok(Self { std_dev, seed })
    }

    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Adds i.i.d. Gaussian(0, std_dev^2) noise to every sample. A zero
/// standard deviation returns the input unchanged (and untouched by the
/// generator, so traces stay bit-identical).
pub fn add_noise(ts: &TimeSeries, spec: &NoiseSpec) -> TimeSeries {
    if spec.std_dev == 0.0 {
        return ts.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values: Vec<f64> = ts
        .values()
        .iter()
        .map(|&v| v + spec.std_dev * standard_normal(&mut rng))
        .collect();
    TimeSeries::new(ts.sample_period(), values).expect("finite noise")
}

/// One standard-normal variate by Box-Muller.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Shifts the yaw channel so its first sample is zero; the input and rate
/// channels are untouched. Idempotent.
pub fn detrend(ds: &TimeSeriesDataset) -> TimeSeriesDataset {
    let offset = ds.output_yaw.values()[0];
    let yaw: Vec<f64> = ds.output_yaw.values().iter().map(|v| v - offset).collect();
    TimeSeriesDataset {
        sample_period: ds.sample_period,
        time_origin: ds.time_origin,
        input_u: ds.input_u.clone(),
        output_yaw: TimeSeries::new(ds.sample_period, yaw).expect("finite"),
        output_rate: ds.output_rate.clone(),
        label: ds.label.clone(),
    }
}

/// Contiguous prefix/suffix split at `floor(N * train_fraction)`; no
/// shuffling. Both parts must keep at least [`MIN_ESTIMATION_SAMPLES`].
pub fn split_dataset(
    ds: &TimeSeriesDataset,
    train_fraction: f64,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset), SignalError> {
    if !(train_fraction.is_finite() && train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SignalError::InvalidDataset("train_fraction must be in (0, 1)"));
    }
    let n = ds.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    let n_test = n - n_train;
    if n_train < MIN_ESTIMATION_SAMPLES || n_test < MIN_ESTIMATION_SAMPLES {
        return Err(SignalError::SplitTooSmall {
            train: n_train,
            test: n_test,
            min: MIN_ESTIMATION_SAMPLES,
        });
    }
    let part = |range: std::ops::Range<usize>, origin: f64, suffix: &str| {
        TimeSeriesDataset::new(
            ds.sample_period,
            origin,
            ds.input_u.values()[range.clone()].to_vec(),
            ds.output_yaw.values()[range.clone()].to_vec(),
            ds.output_rate
                .as_ref()
                .map(|r| r.values()[range.clone()].to_vec()),
            if ds.label.is_empty() {
                suffix.to_string()
            } else {
                format!("{} ({suffix})", ds.label)
            },
        )
    };
    let train = part(0..n_train, ds.time_origin, "train")?;
    let test = part(n_train..n, ds.time_at(n_train), "test")?;
    Ok((train, test))
}

/// Numerical yaw rate: central differences in the interior, one-sided at
/// the ends. Exact for affine yaw traces; interior samples are exact for
/// quadratics.
pub fn differentiate_yaw(ds: &TimeSeriesDataset) -> TimeSeries {
    let psi = ds.output_yaw.values();
    let dt = ds.sample_period;
    let n = psi.len();
    let mut r = Vec::with_capacity(n);
    r.push((psi[1] - psi[0]) / dt);
    for k in 1..n - 1 {
        r.push((psi[k + 1] - psi[k - 1]) / (2.0 * dt));
    }
    r.push((psi[n - 1] - psi[n - 2]) / dt);
    TimeSeries::new(dt, r).expect("finite")
}

/// Writes the dataset CSV schema to `sink`.
pub fn save_dataset<W: Write>(ds: &TimeSeriesDataset, sink: &mut W) -> Result<(), SignalError> {
    if !ds.label.is_empty() {
        writeln!(sink, "# label: {}", ds.label)?;
    }
    writeln!(sink, "# dt: {}", ds.sample_period)?;
    let has_rate = ds.output_rate.is_some();
    writeln!(sink, "{}", if has_rate { "t,u,psi,r" } else { "t,u,psi" })?;
    for k in 0..ds.len() {
        let t = ds.time_at(k);
        let u = ds.input_u.values()[k];
        let psi = ds.output_yaw.values()[k];
        match &ds.output_rate {
            Some(rate) => writeln!(sink, "{t},{u},{psi},{}", rate.values()[k])?,
            None => writeln!(sink, "{t},{u},{psi}")?,
        }
    }
    Ok(())
}

/// Parses and validates a dataset CSV stream.
///
/// The sample period is the `# dt:` hint when present and consistent,
/// otherwise the median of successive time deltas. Any delta deviating more
/// than 1% from the median is rejected as non-uniform sampling.
pub fn load_dataset<R: Read>(source: R) -> Result<TimeSeriesDataset, SignalError> {
    let reader = BufReader::new(source);
    let mut label = String::new();
    let mut dt_hint: Option<f64> = None;
    let mut header: Option<(usize, bool)> = None; // (line no, has rate column)

    let mut times: Vec<f64> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut psi: Vec<f64> = Vec::new();
    let mut rate: Vec<f64> = Vec::new();
    let mut row_lines: Vec<usize> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let raw = line?;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if header.is_some() {
                return Err(SignalError::Parse {
                    line: line_no,
                    column: 1,
                    message: "comment lines are only allowed before the header".into(),
                });
            }
            let comment = comment.trim();
            if let Some(l) = comment.strip_prefix("label:") {
                label = l.trim().to_string();
            } else if let Some(d) = comment.strip_prefix("dt:") {
                dt_hint = d.trim().parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0);
            }
            continue;
        }
        match header {
            None => {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                let has_rate = match cols.as_slice() {
                    ["t", "u", "psi"] => false,
                    ["t", "u", "psi", "r"] => true,
                    _ => {
                        return Err(SignalError::Parse {
                            line: line_no,
                            column: 1,
                            message: format!("expected header `t,u,psi` or `t,u,psi,r`, got `{line}`"),
                        })
                    }
                };
                header = Some((line_no, has_rate));
            }
            Some((_, has_rate)) => {
                let expected = if has_rate { 4 } else { 3 };
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() != expected {
                    return Err(SignalError::Parse {
                        line: line_no,
                        column: cols.len().min(expected),
                        message: format!("expected {expected} columns, got {}", cols.len()),
                    });
                }
                let mut parsed = [0.0f64; 4];
                for (c, text) in cols.iter().enumerate() {
                    let v: f64 = text.parse().map_err(|_| SignalError::Parse {
                        line: line_no,
                        column: c + 1,
                        message: format!("invalid number `{text}`"),
                    })?;
                    if !v.is_finite() {
                        return Err(SignalError::NonFiniteValue {
                            line: line_no,
                            column: c + 1,
                        });
                    }
                    parsed[c] = v;
                }
                times.push(parsed[0]);
                u.push(parsed[1]);
                psi.push(parsed[2]);
                if has_rate {
                    rate.push(parsed[3]);
                }
                row_lines.push(line_no);
            }
        }
    }

    let (header_line, has_rate) = header.ok_or(SignalError::Parse {
        line: 1,
        column: 1,
        message: "missing header line".into(),
    })?;
    let _ = header_line;
    if times.len() < 4 {
        return Err(SignalError::TooFewSamples {
            got: times.len(),
            min: 4,
        });
    }

    // Uniformity: every delta within 1% of the median delta, strictly
    // increasing time.
    let deltas: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = deltas.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    if !(median.is_finite() && median > 0.0) {
        return Err(SignalError::NonUniformSampling {
            line: row_lines[1],
            delta: median,
            median,
        });
    }
    for (i, &d) in deltas.iter().enumerate() {
        if d <= 0.0 || (d - median).abs() > 0.01 * median {
            return Err(SignalError::NonUniformSampling {
                line: row_lines[i + 1],
                delta: d,
                median,
            });
        }
    }

    let sample_period = match dt_hint {
        Some(h) if (h - median).abs() <= 0.01 * median => h,
        _ => median,
    };

    TimeSeriesDataset::new(
        sample_period,
        times[0],
        u,
        psi,
        if has_rate { Some(rate) } else { None },
        label,
    )
}
