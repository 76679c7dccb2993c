//! Discrete-time simulation of the second-order yaw model.
//!
//! The continuous state is `x = (psi, r)` with
//!
//! ```text
//! psi_dot = r
//! r_dot   = -a0*psi - a1*r + K*u
//! ```
//!
//! [`discretize_zoh`] computes the exact zero-order-hold discretization via
//! the closed-form 2x2 matrix exponential, so simulation of piecewise
//! constant inputs is exact at the sample instants (up to rounding).
//!
//! Output convention: sample `k` of a simulation is the state *after*
//! applying input sample `k` for one full period. Golden traces depend on
//! this convention; it is fixed.

use crate::model::{SecondOrderTf, SimState};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("sample period must be finite and > 0 (got {0})")]
    InvalidSamplePeriod(f64),
    #[error("input sample period {input} does not match model sample period {model}")]
    SampleRateMismatch { input: f64, model: f64 },
    #[error("time series sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("step response needs duration > dt > 0 (duration {duration}, dt {dt})")]
    InvalidDuration { duration: f64, dt: f64 },
    #[error("simulation produced a non-finite state at sample {index}")]
    NumericalOverflow { index: usize },
}

/// Uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    sample_period: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_period: f64, values: Vec<f64>) -> Result<Self, SimError> {
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(SimError::InvalidSamplePeriod(sample_period));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteSample { index });
        }
        Ok(Self {
            sample_period,
            values,
        })
    }

    /// Constant signal of `len` samples.
    pub fn constant(sample_period: f64, value: f64, len: usize) -> Result<Self, SimError> {
        Self::new(sample_period, vec![value; len])
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Exact ZOH discretization of a [`SecondOrderTf`] at a fixed sample period.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    sample_period: f64,
    state_transition: [[f64; 2]; 2],
    input_matrix: [f64; 2],
    output_row: [f64; 2],
}

impl DiscreteModel {
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn state_transition(&self) -> &[[f64; 2]; 2] {
        &self.state_transition
    }

    pub fn input_matrix(&self) -> &[f64; 2] {
        &self.input_matrix
    }

    pub fn output_row(&self) -> &[f64; 2] {
        &self.output_row
    }

    /// Runs the state recursion over `input` from `initial`, returning the
    /// yaw trace and the companion yaw-rate trace.
    pub fn simulate(
        &self,
        input: &TimeSeries,
        initial: SimState,
    ) -> Result<(TimeSeries, TimeSeries), SimError> {
        if input.sample_period() != self.sample_period {
            return Err(SimError::SampleRateMismatch {
                input: input.sample_period(),
                model: self.sample_period,
            });
        }
        let a = &self.state_transition;
        let b = &self.input_matrix;
        let mut psi = initial.yaw;
        let mut rate = initial.yaw_rate;
        let mut psi_out = Vec::with_capacity(input.len());
        let mut rate_out = Vec::with_capacity(input.len());
        for (k, &u) in input.values().iter().enumerate() {
            let psi_next = a[0][0] * psi + a[0][1] * rate + b[0] * u;
            let rate_next = a[1][0] * psi + a[1][1] * rate + b[1] * u;
            if !(psi_next.is_finite() && rate_next.is_finite()) {
                return Err(SimError::NumericalOverflow { index: k });
            }
            psi = psi_next;
            rate = rate_next;
            psi_out.push(psi);
            rate_out.push(rate);
        }
        Ok((
            TimeSeries {
                sample_period: self.sample_period,
                values: psi_out,
            },
            TimeSeries {
                sample_period: self.sample_period,
                values: rate_out,
            },
        ))
    }
}

/// Exact zero-order-hold discretization of `tf` at sample period `dt`.
///
/// `A_d = exp(A*dt)` and `B_d = (integral of exp(A*tau) over [0, dt]) * B`
/// are evaluated in closed form through the scalar functions of the two
/// denominator roots: distinct roots (real or a conjugate pair) go through
/// complex arithmetic, a repeated root through its limit formulas. Root
/// functions near zero switch to series so the integrator structures
/// (`a0 = 0`, and the double integrator) stay exact.
pub fn discretize_zoh(tf: &SecondOrderTf, dt: f64) -> Result<DiscreteModel, SimError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidSamplePeriod(dt));
    }
    let a1 = tf.damping_coeff();
    let a0 = tf.stiffness_coeff();
    let gain = tf.gain();

    let (alpha, beta, phi1, phi2) = transition_coeffs(a1, a0, dt);

    // A = [[0, 1], [-a0, -a1]], B = [0, K].
    let state_transition = [[alpha, beta], [-a0 * beta, alpha - a1 * beta]];
    let input_matrix = [phi2 * gain, (phi1 - a1 * phi2) * gain];
    Ok(DiscreteModel {
        sample_period: dt,
        state_transition,
        input_matrix,
        output_row: [1.0, 0.0],
    })
}

/// Scalar coefficients of `exp(A*t) = alpha*I + beta*A` and
/// `int_0^t exp(A*tau) dtau = phi1*I + phi2*A` for a 2x2 companion matrix
/// with characteristic polynomial `s^2 + a1*s + a0`.
fn transition_coeffs(a1: f64, a0: f64, t: f64) -> (f64, f64, f64, f64) {
    let disc = a1 * a1 - 4.0 * a0;
    let scale = a1 * a1 + 4.0 * a0.abs();
    if disc.abs() <= 1e-12 * scale || scale == 0.0 {
        // Repeated (necessarily real) root p = -a1/2.
        let p = -a1 / 2.0;
        let ept = (p * t).exp();
        let alpha = ept * (1.0 - p * t);
        let beta = t * ept;
        let phi2 = int_t_exp(p, t);
        let phi1 = int_exp_real(p, t) - p * phi2;
        (alpha, beta, phi1, phi2)
    } else {
        // Distinct roots, possibly complex conjugate; the final
        // coefficients are real either way.
        let (p1, p2) = if disc >= 0.0 {
            let sq = disc.sqrt();
            (
                Complex64::new((-a1 - sq) / 2.0, 0.0),
                Complex64::new((-a1 + sq) / 2.0, 0.0),
            )
        } else {
            let im = (-disc).sqrt() / 2.0;
            (
                Complex64::new(-a1 / 2.0, -im),
                Complex64::new(-a1 / 2.0, im),
            )
        };
        let e1 = (p1 * t).exp();
        let e2 = (p2 * t).exp();
        let i1 = int_exp(p1, t);
        let i2 = int_exp(p2, t);
        let denom = p1 - p2;
        let alpha = (p1 * e2 - p2 * e1) / denom;
        let beta = (e1 - e2) / denom;
        let phi1 = (p1 * i2 - p2 * i1) / denom;
        let phi2 = (i1 - i2) / denom;
        (alpha.re, beta.re, phi1.re, phi2.re)
    }
}

/// `int_0^t exp(p*tau) dtau`, series-guarded at `p*t -> 0`.
fn int_exp(p: Complex64, t: f64) -> Complex64 {
    let pt = p * t;
    if pt.norm() < 1e-8 {
        t * (Complex64::new(1.0, 0.0) + pt / 2.0 + pt * pt / 6.0)
    } else {
        (pt.exp() - 1.0) / p
    }
}

fn int_exp_real(p: f64, t: f64) -> f64 {
    let pt = p * t;
    if pt.abs() < 1e-8 {
        t * (1.0 + pt / 2.0 + pt * pt / 6.0)
    } else {
        ((pt).exp() - 1.0) / p
    }
}

/// `int_0^t tau * exp(p*tau) dtau`, series-guarded at `p*t -> 0`.
fn int_t_exp(p: f64, t: f64) -> f64 {
    let pt = p * t;
    if pt.abs() < 1e-6 {
        t * t * (0.5 + pt / 3.0 + pt * pt / 8.0 + pt * pt * pt / 30.0)
    } else {
        ((pt - 1.0) * pt.exp() + 1.0) / (p * p)
    }
}

/// Yaw response to a constant input of `amplitude` from rest, sampled over
/// `duration` at period `dt`.
pub fn step_response(
    tf: &SecondOrderTf,
    amplitude: f64,
    duration: f64,
    dt: f64,
) -> Result<TimeSeries, SimError> {
    if !(duration.is_finite() && dt.is_finite() && duration > dt && dt > 0.0) {
        return Err(SimError::InvalidDuration { duration, dt });
    }
    let dm = discretize_zoh(tf, dt)?;
    let n = (duration / dt).floor() as usize;
    let input = TimeSeries::constant(dt, amplitude, n)?;
    let (psi, _) = dm.simulate(&input, SimState::default())?;
    Ok(psi)
}
