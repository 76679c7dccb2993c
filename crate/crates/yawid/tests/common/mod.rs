//! Shared helpers for the integration suites: synthetic plant records and
//! an independent fixed-step RK4 reference integrator.
#![allow(dead_code)]

use yawid::model::{SecondOrderTf, SimState};
use yawid::signals::{add_noise, square_wave, NoiseSpec, TimeSeriesDataset};
use yawid::sim::{discretize_zoh, TimeSeries};

pub const DEFAULT_AMPLITUDE: f64 = 50.0;
pub const DEFAULT_PERIOD: f64 = 20.0;
pub const DEFAULT_DURATION: f64 = 200.0;
pub const DEFAULT_DT: f64 = 0.05;

/// Default square-wave excitation record of `tf`, from rest, with optional
/// additive Gaussian yaw noise.
pub fn synthetic_dataset(tf: &SecondOrderTf, noise_std: f64, seed: u64) -> TimeSeriesDataset {
    synthetic_dataset_with(
        tf,
        DEFAULT_AMPLITUDE,
        DEFAULT_PERIOD,
        DEFAULT_DURATION,
        DEFAULT_DT,
        noise_std,
        seed,
    )
}

pub fn synthetic_dataset_with(
    tf: &SecondOrderTf,
    amplitude: f64,
    period: f64,
    duration: f64,
    dt: f64,
    noise_std: f64,
    seed: u64,
) -> TimeSeriesDataset {
    let input = square_wave(amplitude, period, duration, dt, 0.5).unwrap();
    let dm = discretize_zoh(tf, dt).unwrap();
    let (psi, rate) = dm.simulate(&input, SimState::default()).unwrap();
    let psi = add_noise(&psi, &NoiseSpec::new(noise_std, seed).unwrap());
    TimeSeriesDataset::new(
        dt,
        0.0,
        input.into_values(),
        psi.into_values(),
        Some(rate.into_values()),
        "synthetic",
    )
    .unwrap()
}

/// Standard deviation of a slice.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Classic fixed-step RK4 integration of the continuous yaw dynamics under
/// zero-order-hold inputs, `substeps` steps per sample. Returns the yaw at
/// the sample instants using the same "state after input interval k"
/// convention as the discrete simulator.
pub fn rk4_yaw(
    tf: &SecondOrderTf,
    input: &TimeSeries,
    initial: SimState,
    substeps: usize,
) -> Vec<f64> {
    let a0 = tf.stiffness_coeff();
    let a1 = tf.damping_coeff();
    let gain = tf.gain();
    let h = input.sample_period() / substeps as f64;
    let deriv = |psi: f64, r: f64, u: f64| -> (f64, f64) { (r, -a0 * psi - a1 * r + gain * u) };

    let mut psi = initial.yaw;
    let mut r = initial.yaw_rate;
    let mut out = Vec::with_capacity(input.len());
    for &u in input.values() {
        for _ in 0..substeps {
            let (k1p, k1r) = deriv(psi, r, u);
            let (k2p, k2r) = deriv(psi + 0.5 * h * k1p, r + 0.5 * h * k1r, u);
            let (k3p, k3r) = deriv(psi + 0.5 * h * k2p, r + 0.5 * h * k2r, u);
            let (k4p, k4r) = deriv(psi + h * k3p, r + h * k3r, u);
            psi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        }
        out.push(psi);
    }
    out
}
