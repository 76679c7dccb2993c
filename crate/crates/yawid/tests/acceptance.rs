//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (run with `--nocapture` to see
//! them). The criteria pin the reference-model behavior, the oracle
//! equivalences and the end-to-end identification contracts.

mod common;

use common::{rk4_yaw, std_dev, synthetic_dataset, DEFAULT_DT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use yawid::estim::{
    cross_validate, equation_error_init, estimate_output_error, EstimationOptions,
};
use yawid::model::{reference_model, SecondOrderTf, SimState, Stability};
use yawid::signals::{
    detrend, load_dataset, save_dataset, split_dataset, square_wave, SignalError,
    TimeSeriesDataset,
};
use yawid::sim::{discretize_zoh, step_response};

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

#[test]
fn criterion_1_reference_poles_and_stability() {
    let tf = reference_model();
    let start = Instant::now();
    let (p1, p2) = tf.poles();
    let stability = tf.stability();
    let elapsed = start.elapsed();

    assert!((p1.re - -1.8284).abs() < 1e-3, "fast pole {p1}");
    assert!((p2.re - -0.2516).abs() < 1e-3, "slow pole {p2}");
    assert_eq!(p1.im, 0.0);
    assert_eq!(p2.im, 0.0);
    assert_eq!(stability, Stability::AsymptoticallyStable);
    assert!(elapsed.as_micros() < 1000, "took {elapsed:?}");
    println!(
        "criterion 1 (reference poles/stability): PASS  poles {:.4}, {:.4}; {stability}; {elapsed:?}",
        p1.re, p2.re
    );
}

#[test]
fn criterion_2_step_response_contract() {
    let tf = reference_model();
    let start = Instant::now();
    let psi = step_response(&tf, 1.0, 120.0, 0.05).unwrap();
    let elapsed = start.elapsed();

    let dc = tf.dc_gain().unwrap();
    for (k, w) in psi.values().windows(2).enumerate() {
        assert!(w[1] >= w[0] - 1e-12, "non-monotone at sample {k}");
    }
    let peak = psi.values().iter().cloned().fold(f64::MIN, f64::max);
    assert!(peak <= dc * (1.0 + 1e-9), "overshoot: peak {peak} vs dc {dc}");
    let last = *psi.values().last().unwrap();
    assert!(rel_err(last, 0.028261) < 1e-3, "final {last}");
    assert!(elapsed.as_millis() < 50, "took {elapsed:?}");
    println!(
        "criterion 2 (step-response contract): PASS  final {last:.6} vs dc {dc:.6}; {elapsed:?}"
    );
}

#[test]
fn criterion_3_zoh_matches_rk4_oracle() {
    let tf = reference_model();
    let input = square_wave(50.0, 20.0, 200.0, DEFAULT_DT, 0.5).unwrap();
    let start = Instant::now();
    let dm = discretize_zoh(&tf, DEFAULT_DT).unwrap();
    let (psi, _) = dm.simulate(&input, SimState::default()).unwrap();
    let reference = rk4_yaw(&tf, &input, SimState::default(), 100);
    let elapsed = start.elapsed();

    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for (k, (&sim, &oracle)) in psi.values().iter().zip(&reference).enumerate() {
        let rel = (sim - oracle).abs() / scale;
        worst = worst.max(rel);
        assert!(rel < 1e-6, "sample {k}: relative deviation {rel}");
    }
    assert!(elapsed.as_millis() < 1000, "took {elapsed:?}");
    println!("criterion 3 (ZOH vs RK4 oracle): PASS  worst relative {worst:.2e}; {elapsed:?}");
}

#[test]
fn criterion_4_noiseless_round_trip_identification() {
    let truth = reference_model();
    let ds = synthetic_dataset(&truth, 0.0, 0);
    let start = Instant::now();
    let ds = detrend(&ds);
    let (train, test) = split_dataset(&ds, 0.5).unwrap();
    let init = equation_error_init(&train).unwrap();
    let report = estimate_output_error(&train, &init.model, &EstimationOptions::default()).unwrap();
    let validation_fit = cross_validate(&report.model, &test).unwrap();
    let elapsed = start.elapsed();

    let m = report.model;
    assert!(rel_err(m.gain(), 0.013) < 0.01, "K {}", m.gain());
    assert!(rel_err(m.damping_coeff(), 2.08) < 0.01, "a1 {}", m.damping_coeff());
    assert!(rel_err(m.stiffness_coeff(), 0.46) < 0.01, "a0 {}", m.stiffness_coeff());
    assert!(report.training_fit_percent >= 99.0, "train fit {}", report.training_fit_percent);
    assert!(validation_fit >= 99.0, "validation fit {validation_fit}");
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    println!(
        "criterion 4 (noiseless round trip): PASS  K {:.6} a1 {:.4} a0 {:.4}; train {:.2}% val {:.2}%; {elapsed:?}",
        m.gain(), m.damping_coeff(), m.stiffness_coeff(), report.training_fit_percent, validation_fit
    );
}

#[test]
fn criterion_5_noisy_round_trip_identification() {
    // Noise level: 5% of the noiseless yaw standard deviation. Seed 5 is
    // committed together with the frozen tolerances (parameters within 5%
    // relative, held-out fit at least 80%): training happens on half the
    // record, so per-seed scatter is larger than on the full record.
    let truth = reference_model();
    let clean = synthetic_dataset(&truth, 0.0, 0);
    let sigma = 0.05 * std_dev(clean.output_yaw().values());
    let ds = synthetic_dataset(&truth, sigma, 5);
    let start = Instant::now();
    let ds = detrend(&ds);
    let (train, test) = split_dataset(&ds, 0.5).unwrap();
    let init = equation_error_init(&train).unwrap();
    let report = estimate_output_error(&train, &init.model, &EstimationOptions::default()).unwrap();
    let validation_fit = cross_validate(&report.model, &test).unwrap();
    let elapsed = start.elapsed();

    let m = report.model;
    assert!(rel_err(m.gain(), 0.013) < 0.05, "K {}", m.gain());
    assert!(rel_err(m.damping_coeff(), 2.08) < 0.05, "a1 {}", m.damping_coeff());
    assert!(rel_err(m.stiffness_coeff(), 0.46) < 0.05, "a0 {}", m.stiffness_coeff());
    assert!(validation_fit >= 80.0, "validation fit {validation_fit}");
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    println!(
        "criterion 5 (noisy round trip): PASS  K {:.6} a1 {:.4} a0 {:.4}; val {:.2}%; {elapsed:?}",
        m.gain(), m.damping_coeff(), m.stiffness_coeff(), validation_fit
    );
}

#[test]
fn criterion_6_estimator_property_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for plant_idx in 0..20 {
        let truth = SecondOrderTf::new(
            rng.gen_range(0.002..0.5),
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.05..1.5),
        )
        .unwrap();
        let noise = rng.gen_range(0.0..0.01);
        let seed = rng.gen::<u64>();
        let ds = common::synthetic_dataset_with(&truth, 20.0, 20.0, 100.0, 0.05, noise, seed);
        let init = equation_error_init(&ds).unwrap();
        let report =
            estimate_output_error(&ds, &init.model, &EstimationOptions::default()).unwrap();

        // SSE trace never increases over accepted iterations.
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0], "plant {plant_idx}: trace rose {} -> {}", w[0], w[1]);
        }
        // The refinement never loses to its initializer.
        let first = report.objective_trace[0];
        let last = *report.objective_trace.last().unwrap();
        assert!(last <= first, "plant {plant_idx}: {last} > {first}");

        // Forward-difference gain column vs the exact psi_hat/K relation.
        let theta = report.model;
        let dm = discretize_zoh(&theta, ds.sample_period()).unwrap();
        let (psi, _) = dm.simulate(ds.input_u(), SimState::default()).unwrap();
        let h = 1e-6 * theta.gain();
        let bumped = SecondOrderTf::new(theta.gain() + h, theta.damping_coeff(), theta.stiffness_coeff()).unwrap();
        let dmb = discretize_zoh(&bumped, ds.sample_period()).unwrap();
        let (psib, _) = dmb.simulate(ds.input_u(), SimState::default()).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..psi.len() {
            let fd = (psib.values()[k] - psi.values()[k]) / h;
            let exact = psi.values()[k] / theta.gain();
            num += (fd - exact) * (fd - exact);
            den += exact * exact;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-4, "plant {plant_idx}: gain column deviation {rel}");
    }
    println!("criterion 6 (estimator properties, 20 seeded plants): PASS");
}

#[test]
fn criterion_7_fit_percent_unit_truths() {
    use yawid::estim::fit_percent;
    use yawid::sim::TimeSeries;

    let y = TimeSeries::new(1.0, vec![0.4, -0.3, 1.2, 0.9, -2.0]).unwrap();
    assert_eq!(fit_percent(&y, &y).unwrap(), 100.0);

    let y = TimeSeries::new(1.0, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let mean = TimeSeries::new(1.0, vec![1.5; 4]).unwrap();
    assert!(fit_percent(&y, &mean).unwrap().abs() < 1e-12);

    let yh = TimeSeries::new(1.0, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
    let fit = fit_percent(&y, &yh).unwrap();
    assert!((fit - 55.279).abs() < 1e-3, "hand case {fit}");
    println!("criterion 7 (fitness unit truths): PASS  hand case {fit:.4}");
}

#[test]
fn criterion_8_data_layer_contracts() {
    // 100 randomized datasets survive save -> load bit-identically.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let n = rng.gen_range(4..200);
        let dt = [0.01, 0.02, 0.05, 0.1, 0.25, 1.0 / 3.0][rng.gen_range(0..6)];
        let t0 = rng.gen_range(-1000.0..1000.0);
        let with_rate = rng.gen_bool(0.5);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-255.0..255.0)).collect();
        let psi: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.2..3.2)).collect();
        let rate: Option<Vec<f64>> =
            with_rate.then(|| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let ds = TimeSeriesDataset::new(dt, t0, u, psi, rate, format!("case {case}")).unwrap();
        let mut buf = Vec::new();
        save_dataset(&ds, &mut buf).unwrap();
        let back = load_dataset(&buf[..]).unwrap();
        assert_eq!(ds, back, "round trip drifted in case {case}");
    }

    // Square wave matches an independently formulated phase oracle on
    // randomized grids.
    for _ in 0..50 {
        let period = rng.gen_range(1.0..60.0);
        let dt = period / rng.gen_range(4.0..64.0);
        let duty = rng.gen_range(0.05..0.95);
        let amp = rng.gen_range(0.1..200.0);
        let duration = period * rng.gen_range(1.0..6.0);
        let wave = square_wave(amp, period, duration, dt, duty).unwrap();
        assert_eq!(wave.len(), (duration / dt).floor() as usize);
        for (k, &v) in wave.values().iter().enumerate() {
            let t = k as f64 * dt;
            let frac = t / period - (t / period).floor();
            let expect = if frac < duty { amp } else { -amp };
            assert_eq!(v, expect, "phase mismatch at sample {k}");
        }
    }

    // Non-uniform time columns are rejected.
    let mut text = String::from("t,u,psi\n");
    let mut t = 0.0;
    for k in 0..40 {
        text.push_str(&format!("{t},1,{}\n", k as f64 * 0.01));
        t += if k == 19 { 0.2 } else { 0.05 };
    }
    assert!(matches!(
        load_dataset(text.as_bytes()),
        Err(SignalError::NonUniformSampling { .. })
    ));
    println!("criterion 8 (data-layer contracts): PASS");
}

#[test]
fn criterion_9_pipeline_determinism_via_cli() {
    use std::process::Command;
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        for args in [
            vec![
                "excite",
                "--reference",
                "--noise-std",
                "0.04",
                "--seed",
                "17",
                "--out",
                &format!("data_{run}.csv"),
            ],
            vec![
                "identify",
                "--dataset",
                &format!("data_{run}.csv"),
                "--out",
                &format!("model_{run}.txt"),
            ],
        ] {
            let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            let out = Command::new(env!("CARGO_BIN_EXE_yawid"))
                .args(&args)
                .current_dir(tmp.path())
                .output()
                .unwrap();
            assert!(out.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
        }
    }
    let a = std::fs::read(tmp.path().join("model_a.txt")).unwrap();
    let b = std::fs::read(tmp.path().join("model_b.txt")).unwrap();
    assert_eq!(a, b, "model files differ between identical runs");
    println!(
        "criterion 9 (pipeline determinism): PASS  model files byte-identical ({} bytes)",
        a.len()
    );
}
