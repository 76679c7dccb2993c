//! Parameter estimation and validation.
//!
//! Identification runs in two stages. A linear equation-error (ARX)
//! regression on the discrete record seeds the parameters; matched pole
//! mapping and DC-gain matching pull the discrete fit back to the
//! continuous `(K, a1, a0)` triple. The seed is then refined by
//! Levenberg-Marquardt on the output-error criterion: the sum of squared
//! differences between the measured yaw and the free-run ZOH simulation of
//! the candidate model, with the Jacobian taken by forward finite
//! differences of the full simulation. `a1` and `a0` are kept non-negative
//! by projection; `K` is free-sign.
//!
//! Fitness uses the NRMSE convention
//! `100 * (1 - ||y - y_hat|| / ||y - mean(y)||)`: 100 is a perfect fit,
//! 0 matches the mean predictor, negative is worse than the mean.

use crate::model::{SecondOrderTf, SimState};
use crate::signals::{TimeSeriesDataset, MIN_ESTIMATION_SAMPLES};
use crate::sim::{discretize_zoh, SimError, TimeSeries};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimError {
    #[error("rank-deficient regression: the input is not sufficiently exciting")]
    RankDeficientRegression,
    #[error("objective became non-finite; last good parameters K={0}, a1={1}, a0={2}", last_good[0], last_good[1], last_good[2])]
    DivergedNonFinite { last_good: [f64; 3] },
    #[error("no descent direction found")]
    NoDescentDirection,
    #[error("reference series is constant; fitness is undefined")]
    ConstantReference,
    #[error("series lengths differ: {measured} vs {simulated}")]
    LengthMismatch { measured: usize, simulated: usize },
    #[error("too few samples: {got} (need at least {min})")]
    TooFewSamples { got: usize, min: usize },
    #[error("degenerate initializer: {0}")]
    DegenerateInitializer(&'static str),
    #[error("model file parse error at line {line}: {message}")]
    ModelFileParse { line: usize, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Levenberg-Marquardt settings. The defaults are deliberately tight: the
/// objective is cheap for three parameters.
#[derive(Debug, Clone, Copy)]
pub struct EstimationOptions {
    pub max_iterations: usize,
    /// Relative decrease of the objective below which iteration stops.
    pub objective_rel_tol: f64,
    /// Parameter step norm (relative to the parameter norm) below which
    /// iteration stops.
    pub step_tol: f64,
    /// Initial LM damping factor.
    pub initial_damping: f64,
    /// Relative step for the forward finite-difference Jacobian.
    pub finite_difference_rel_step: f64,
    /// Elementwise lower bounds on `(K, a1, a0)`; the gain is free-sign.
    pub lower_bounds: [f64; 3],
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            objective_rel_tol: 1e-10,
            step_tol: 1e-12,
            initial_damping: 1e-3,
            finite_difference_rel_step: 1e-6,
            lower_bounds: [f64::NEG_INFINITY, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    ConvergedObjective,
    ConvergedStep,
    MaxIterations,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminationReason::ConvergedObjective => "converged-objective",
            TerminationReason::ConvergedStep => "converged-step",
            TerminationReason::MaxIterations => "max-iterations",
        };
        f.write_str(s)
    }
}

/// Result of an output-error estimation run.
#[derive(Debug, Clone)]
pub struct EstimationReport {
    pub model: SecondOrderTf,
    pub training_fit_percent: f64,
    /// SSE after the initial point and after every accepted iteration;
    /// non-increasing by construction.
    pub objective_trace: Vec<f64>,
    pub iterations_used: usize,
    pub termination_reason: TerminationReason,
    pub initializer_model: SecondOrderTf,
}

/// Equation-error seed plus diagnostics about any clamping that was needed
/// to keep it physical.
#[derive(Debug, Clone)]
pub struct InitializerOutcome {
    pub model: SecondOrderTf,
    /// Discrete poles landed on or outside the unit circle and were pulled
    /// back to radius 0.999 before the continuous mapping.
    pub clamped_unstable_poles: bool,
    /// The mapped `a1` or `a0` came out negative and was clamped to zero.
    pub clamped_negative_coeffs: bool,
}

const UNIT_CIRCLE_CLAMP: f64 = 0.999;

/// Linear least-squares seed for the output-error refinement.
///
/// Fits the one-step regression
/// `psi[k] = -alpha1*psi[k-1] - alpha2*psi[k-2] + beta1*u[k-1] + beta2*u[k-2]`
/// and maps the fitted discrete poles back to continuous time by
/// `s = ln(z) / dt`, recovering the gain by matching the steady-state (or,
/// for integrating seeds, low-frequency) response.
pub fn equation_error_init(ds: &TimeSeriesDataset) -> Result<InitializerOutcome, EstimError> {
    let n = ds.len();
    if n < MIN_ESTIMATION_SAMPLES {
        return Err(EstimError::TooFewSamples {
            got: n,
            min: MIN_ESTIMATION_SAMPLES,
        });
    }
    let u = ds.input_u().values();
    let psi = ds.output_yaw().values();
    let dt = ds.sample_period();

    let first = u[0];
    if u.iter().all(|&v| v == first) {
        return Err(EstimError::RankDeficientRegression);
    }

    let rows = n - 2;
    let mut a = DMatrix::<f64>::zeros(rows, 4);
    let mut b = DVector::<f64>::zeros(rows);
    for k in 2..n {
        let i = k - 2;
        a[(i, 0)] = -psi[k - 1];
        a[(i, 1)] = -psi[k - 2];
        a[(i, 2)] = u[k - 1];
        a[(i, 3)] = u[k - 2];
        b[i] = psi[k];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax.is_finite() && smax > 0.0) || svd.singular_values.min() < 1e-10 * smax {
        return Err(EstimError::RankDeficientRegression);
    }
    let theta = svd
        .solve(&b, 0.0)
        .map_err(|_| EstimError::RankDeficientRegression)?;
    let (alpha1, alpha2, beta1, beta2) = (theta[0], theta[1], theta[2], theta[3]);

    // Discrete poles: roots of z^2 + alpha1*z + alpha2.
    let disc = alpha1 * alpha1 - 4.0 * alpha2;
    let (mut z1, mut z2) = if disc >= 0.0 {
        let sq = disc.sqrt();
        (
            Complex64::new((-alpha1 + sq) / 2.0, 0.0),
            Complex64::new((-alpha1 - sq) / 2.0, 0.0),
        )
    } else {
        let im = (-disc).sqrt() / 2.0;
        let z = Complex64::new(-alpha1 / 2.0, im);
        (z, z.conj())
    };

    let mut clamped_unstable = false;
    for z in [&mut z1, &mut z2] {
        let r = z.norm();
        if r >= 1.0 {
            clamped_unstable = true;
            if r > 0.0 {
                *z *= UNIT_CIRCLE_CLAMP / r;
            }
        }
    }

    // Matched pole mapping: s_i = ln(z_i) / dt.
    let s1 = z1.ln() / dt;
    let s2 = z2.ln() / dt;
    let mut a1 = -(s1 + s2).re;
    let mut a0 = (s1 * s2).re;
    let mut clamped_negative = false;
    if a1 < 0.0 {
        a1 = 0.0;
        clamped_negative = true;
    }
    if a0 < 0.0 {
        a0 = 0.0;
        clamped_negative = true;
    }

    // Gain by response matching. At DC when the seed has a steady state;
    // otherwise (integrating seed) at a low probe frequency.
    let dc_denom = 1.0 + alpha1 + alpha2;
    let gain = if a0 > 1e-12 && dc_denom.abs() > 1e-9 {
        a0 * (beta1 + beta2) / dc_denom
    } else {
        let omega = 0.01 / dt;
        let z = Complex64::new(0.0, omega * dt).exp();
        let gd = (beta1 * z + beta2) / (z * z + alpha1 * z + alpha2);
        let s = Complex64::new(0.0, omega);
        (gd * (s * s + a1 * s + a0)).re
    };
    if !(gain.is_finite() && gain != 0.0) {
        return Err(EstimError::DegenerateInitializer("recovered gain is zero or non-finite"));
    }

    Ok(InitializerOutcome {
        model: SecondOrderTf::new(gain, a1, a0)?,
        clamped_unstable_poles: clamped_unstable,
        clamped_negative_coeffs: clamped_negative,
    })
}

/// Free-run yaw prediction of a raw candidate triple against the dataset
/// input, from rest.
fn simulate_candidate(theta: &[f64; 3], ds: &TimeSeriesDataset) -> Result<Vec<f64>, EstimError> {
    let tf = SecondOrderTf::raw(theta[0], theta[1], theta[2]);
    let dm = discretize_zoh(&tf, ds.sample_period())?;
    let (psi, _) = dm
        .simulate(ds.input_u(), SimState::default())
        .map_err(|e| match e {
            SimError::NumericalOverflow { .. } => EstimError::DivergedNonFinite { last_good: *theta },
            other => EstimError::Sim(other),
        })?;
    Ok(psi.into_values())
}

fn sse(measured: &[f64], predicted: &[f64]) -> f64 {
    measured
        .iter()
        .zip(predicted)
        .map(|(y, yh)| (y - yh) * (y - yh))
        .sum()
}

fn project(theta: [f64; 3], lower: &[f64; 3]) -> [f64; 3] {
    [
        theta[0].max(lower[0]),
        theta[1].max(lower[1]),
        theta[2].max(lower[2]),
    ]
}

/// Output-error refinement of `init` by Levenberg-Marquardt.
///
/// Minimizes the free-run sum of squared yaw errors over `(K, a1, a0)`.
/// Only strictly descending steps are accepted, so the objective trace is
/// non-increasing; the run is deterministic for fixed inputs.
pub fn estimate_output_error(
    ds: &TimeSeriesDataset,
    init: &SecondOrderTf,
    opts: &EstimationOptions,
) -> Result<EstimationReport, EstimError> {
    let y = ds.output_yaw().values();
    let mut theta = project(
        [init.gain(), init.damping_coeff(), init.stiffness_coeff()],
        &opts.lower_bounds,
    );
    let mut psi_hat = simulate_candidate(&theta, ds)?;
    let mut objective = sse(y, &psi_hat);
    if !objective.is_finite() {
        return Err(EstimError::DivergedNonFinite { last_good: theta });
    }
    let mut trace = vec![objective];
    let mut lambda = opts.initial_damping;
    let mut reason = TerminationReason::MaxIterations;
    let mut iterations_used = 0;

    'outer: for iter in 1..=opts.max_iterations {
        // Forward finite-difference Jacobian of the prediction.
        let n = y.len();
        let mut jac = DMatrix::<f64>::zeros(n, 3);
        for j in 0..3 {
            let h = if theta[j] != 0.0 {
                opts.finite_difference_rel_step * theta[j].abs()
            } else {
                opts.finite_difference_rel_step
            };
            let mut probe = theta;
            probe[j] += h;
            let psi_probe = simulate_candidate(&probe, ds)?;
            for i in 0..n {
                jac[(i, j)] = (psi_probe[i] - psi_hat[i]) / h;
            }
        }
        let residual = DVector::from_iterator(n, y.iter().zip(&psi_hat).map(|(a, b)| a - b));
        let jtj_full = jac.transpose() * &jac;
        let gradient_full = jac.transpose() * residual;
        let jtj = Matrix3::from_fn(|r, c| jtj_full[(r, c)]);
        let gradient = Vector3::from_fn(|r, _| gradient_full[r]);

        loop {
            let mut damped = jtj;
            for d in 0..3 {
                let diag = jtj[(d, d)].max(1e-30);
                damped[(d, d)] += lambda * diag;
            }
            let step = damped.lu().solve(&gradient);
            let delta = match step {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e14 {
                        return Err(EstimError::NoDescentDirection);
                    }
                    continue;
                }
            };
            let candidate = project(
                [theta[0] + delta[0], theta[1] + delta[1], theta[2] + delta[2]],
                &opts.lower_bounds,
            );
            let actual_step = [
                candidate[0] - theta[0],
                candidate[1] - theta[1],
                candidate[2] - theta[2],
            ];
            let step_norm = actual_step.iter().map(|v| v * v).sum::<f64>().sqrt();
            let theta_norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();

            let psi_new = simulate_candidate(&candidate, ds)?;
            let obj_new = sse(y, &psi_new);
            if obj_new.is_finite() && obj_new < objective {
                let improvement = objective - obj_new;
                theta = candidate;
                psi_hat = psi_new;
                objective = obj_new;
                trace.push(objective);
                iterations_used = iter;
                lambda = (lambda / 10.0).max(1e-12);
                if improvement <= opts.objective_rel_tol * objective.max(f64::MIN_POSITIVE) {
                    reason = TerminationReason::ConvergedObjective;
                    break 'outer;
                }
                if step_norm <= opts.step_tol * (theta_norm + opts.step_tol) {
                    reason = TerminationReason::ConvergedStep;
                    break 'outer;
                }
                break;
            }
            // Rejected: a vanishing proposed step means we are at a local
            // minimum up to the tolerances.
            if step_norm <= opts.step_tol * (theta_norm + opts.step_tol) {
                iterations_used = iter;
                reason = TerminationReason::ConvergedStep;
                break 'outer;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                return Err(EstimError::NoDescentDirection);
            }
        }
    }

    let model = SecondOrderTf::new(theta[0], theta[1], theta[2])?;
    let training_fit_percent = fit_percent_slices(y, &psi_hat)?;
    Ok(EstimationReport {
        model,
        training_fit_percent,
        objective_trace: trace,
        iterations_used,
        termination_reason: reason,
        initializer_model: *init,
    })
}

/// NRMSE fitness `100 * (1 - ||y - y_hat|| / ||y - mean(y)||)` in percent.
pub fn fit_percent(measured: &TimeSeries, simulated: &TimeSeries) -> Result<f64, EstimError> {
    fit_percent_slices(measured.values(), simulated.values())
}

fn fit_percent_slices(measured: &[f64], simulated: &[f64]) -> Result<f64, EstimError> {
    if measured.len() != simulated.len() {
        return Err(EstimError::LengthMismatch {
            measured: measured.len(),
            simulated: simulated.len(),
        });
    }
    if measured.len() < 2 {
        return Err(EstimError::ConstantReference);
    }
    let mean = measured.iter().sum::<f64>() / measured.len() as f64;
    let denom = measured
        .iter()
        .map(|y| (y - mean) * (y - mean))
        .sum::<f64>()
        .sqrt();
    if denom == 0.0 {
        return Err(EstimError::ConstantReference);
    }
    let num = measured
        .iter()
        .zip(simulated)
        .map(|(y, yh)| (y - yh) * (y - yh))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * (1.0 - num / denom))
}

/// Free-run validation of `model` against a held-out record.
///
/// The candidate is simulated against the test input and scored with
/// [`fit_percent`]. The unknown state at the start of the record (a
/// contiguous suffix of a longer experiment is mid-motion) is recovered by
/// linear least squares over the two free-response basis traces, which is
/// exact for the generating model and adds no freedom to the forced
/// response being judged.
pub fn cross_validate(model: &SecondOrderTf, test: &TimeSeriesDataset) -> Result<f64, EstimError> {
    Ok(cross_validate_detailed(model, test)?.fit_percent)
}

/// Validation outcome with the predicted trace, for overlay exports.
#[derive(Debug, Clone)]
pub struct ValidationOutcome {
    pub fit_percent: f64,
    pub predicted_yaw: TimeSeries,
    /// Initial `(psi, r)` recovered for the start of the record.
    pub initial_state: SimState,
}

/// See [`cross_validate`]; additionally returns the predicted yaw trace and
/// the recovered initial state.
pub fn cross_validate_detailed(
    model: &SecondOrderTf,
    test: &TimeSeriesDataset,
) -> Result<ValidationOutcome, EstimError> {
    let dm = discretize_zoh(model, test.sample_period())?;
    let (forced, _) = dm.simulate(test.input_u(), SimState::default())?;
    let zero_input = TimeSeries::constant(test.sample_period(), 0.0, test.len())?;
    let (free_yaw, _) = dm.simulate(&zero_input, SimState::new(1.0, 0.0))?;
    let (free_rate, _) = dm.simulate(&zero_input, SimState::new(0.0, 1.0))?;

    let y = test.output_yaw().values();
    let f = forced.values();
    let g1 = free_yaw.values();
    let g2 = free_rate.values();

    // 2x2 normal equations for the initial (psi, r).
    let mut gtg = Matrix2::<f64>::zeros();
    let mut gty = Vector2::<f64>::zeros();
    for k in 0..y.len() {
        let e = y[k] - f[k];
        gtg[(0, 0)] += g1[k] * g1[k];
        gtg[(0, 1)] += g1[k] * g2[k];
        gtg[(1, 1)] += g2[k] * g2[k];
        gty[0] += g1[k] * e;
        gty[1] += g2[k] * e;
    }
    gtg[(1, 0)] = gtg[(0, 1)];
    let coeffs = gtg.lu().solve(&gty).unwrap_or_else(Vector2::zeros);
    let coeffs = if coeffs.iter().all(|v| v.is_finite()) {
        coeffs
    } else {
        Vector2::zeros()
    };

    let predicted: Vec<f64> = (0..y.len())
        .map(|k| f[k] + coeffs[0] * g1[k] + coeffs[1] * g2[k])
        .collect();
    let fit = fit_percent_slices(y, &predicted)?;
    Ok(ValidationOutcome {
        fit_percent: fit,
        predicted_yaw: TimeSeries::new(test.sample_period(), predicted)?,
        initial_state: SimState::new(coeffs[0], coeffs[1]),
    })
}

/// Identified-model file contents (`K=`, `a1=`, `a0=`, `dt_identified=`,
/// `fit_train_percent=` lines, `#` comments allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: SecondOrderTf,
    pub dt_identified: f64,
    pub fit_train_percent: f64,
}

pub fn write_model_file<W: Write>(mf: &ModelFile, sink: &mut W) -> Result<(), EstimError> {
    writeln!(sink, "K={}", mf.model.gain())?;
    writeln!(sink, "a1={}", mf.model.damping_coeff())?;
    writeln!(sink, "a0={}", mf.model.stiffness_coeff())?;
    writeln!(sink, "dt_identified={}", mf.dt_identified)?;
    writeln!(sink, "fit_train_percent={}", mf.fit_train_percent)?;
    Ok(())
}

pub fn read_model_file<R: Read>(source: R) -> Result<ModelFile, EstimError> {
    let reader = BufReader::new(source);
    let mut fields: [Option<f64>; 5] = [None; 5];
    const KEYS: [&str; 5] = ["K", "a1", "a0", "dt_identified", "fit_train_percent"];
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let raw = line?;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| EstimError::ModelFileParse {
            line: line_no,
            message: format!("expected `key=value`, got `{line}`"),
        })?;
        let key = key.trim();
        let slot = KEYS.iter().position(|k| *k == key).ok_or_else(|| {
            EstimError::ModelFileParse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            }
        })?;
        let parsed: f64 = value.trim().parse().map_err(|_| EstimError::ModelFileParse {
            line: line_no,
            message: format!("invalid number `{}`", value.trim()),
        })?;
        fields[slot] = Some(parsed);
    }
    let get = |slot: usize| {
        fields[slot].ok_or_else(|| EstimError::ModelFileParse {
            line: 0,
            message: format!("missing `{}` line", KEYS[slot]),
        })
    };
    let model = SecondOrderTf::new(get(0)?, get(1)?, get(2)?)?;
    Ok(ModelFile {
        model,
        dt_identified: get(3)?,
        fit_train_percent: get(4)?,
    })
}
