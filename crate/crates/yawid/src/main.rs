//! Batch CLI for the yaw identification toolkit.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O failure, 4 data (parse or
//! validation) error, 5 numerical/estimation failure.

use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use yawid::estim::{
    self, cross_validate_detailed, equation_error_init, estimate_output_error, EstimError,
    EstimationOptions, ModelFile,
};
use yawid::model::{reference_model, PhysicalParams, SecondOrderTf, SimState};
use yawid::signals::{
    add_noise, detrend, load_dataset, save_dataset, split_dataset, square_wave, NoiseSpec,
    SignalError, TimeSeriesDataset,
};
use yawid::sim::{discretize_zoh, step_response};

const EXIT_USAGE: i32 = 2;
const EXIT_IO: i32 = 3;
const EXIT_DATA: i32 = 4;
const EXIT_NUMERICAL: i32 = 5;

#[derive(Parser)]
#[command(
    name = "yawid",
    version,
    about = "Gray-box yaw system identification for twin-thruster surface vehicles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a square-wave excitation experiment on a known plant and
    /// write the logged dataset CSV.
    Excite(ExciteArgs),
    /// Identify a second-order yaw model from a dataset CSV.
    Identify(IdentifyArgs),
    /// Score a model against a dataset and optionally write an overlay CSV.
    Validate(ValidateArgs),
    /// Print poles, stability, DC gain and time constant of a model.
    Info(InfoArgs),
    /// Write the step response of a model as a CSV trace.
    Step(StepArgs),
}

/// Plant/model source shared by several subcommands.
#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// Transfer-function coefficients `K,a1,a0`.
    #[arg(long, value_name = "K,A1,A0", value_parser = parse_tf)]
    tf: Option<SecondOrderTf>,
    /// Physical parameters `Iz,by,at,l` (yaw inertia, drag coefficient,
    /// thrust coefficient, moment arm).
    #[arg(long, value_name = "IZ,BY,AT,L", value_parser = parse_physical)]
    physical: Option<SecondOrderTf>,
    /// Model file written by `identify`.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Built-in reference model identified from pool trials.
    #[arg(long)]
    reference: bool,
}

impl ModelSource {
    fn resolve(&self) -> Result<SecondOrderTf, CliError> {
        if let Some(tf) = self.tf {
            return Ok(tf);
        }
        if let Some(tf) = self.physical {
            return Ok(tf);
        }
        if let Some(path) = &self.model {
            let file = open_input(path)?;
            let mf = estim::read_model_file(file).map_err(estim_to_cli)?;
            return Ok(mf.model);
        }
        debug_assert!(self.reference);
        Ok(reference_model())
    }
}

#[derive(Args)]
struct WaveArgs {
    /// Square-wave amplitude, PWM units.
    #[arg(long, default_value_t = 50.0)]
    amplitude: f64,
    /// Square-wave period, seconds.
    #[arg(long, default_value_t = 20.0)]
    period: f64,
    /// Experiment duration, seconds.
    #[arg(long, default_value_t = 200.0)]
    duration: f64,
    /// Sample period, seconds.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    /// Duty fraction of the positive half, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    duty: f64,
}

#[derive(Args)]
struct ExciteArgs {
    #[command(flatten)]
    plant: ModelSource,
    #[command(flatten)]
    wave: WaveArgs,
    /// Additive Gaussian noise standard deviation on yaw, radians.
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    /// Noise generator seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Dataset label recorded in the CSV.
    #[arg(long, default_value = "synthetic excitation")]
    label: String,
    /// Output dataset CSV path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    /// Input dataset CSV path.
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Output model file path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Fraction of the record used for training; the rest validates.
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    /// Maximum refinement iterations.
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Model file written by `identify`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Dataset CSV to validate against.
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Optional overlay CSV (`t,psi_measured,psi_simulated`).
    #[arg(long, value_name = "FILE")]
    overlay: Option<PathBuf>,
    /// Emit yaw angles in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct InfoArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Display the DC gain in degrees per PWM unit.
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct StepArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Step amplitude, PWM units.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Duration, seconds.
    #[arg(long, default_value_t = 120.0)]
    duration: f64,
    /// Sample period, seconds.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    /// Output CSV path (`t,psi`).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Emit yaw in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn parse_tf(s: &str) -> Result<SecondOrderTf, String> {
    let parts = parse_numbers(s, 3)?;
    SecondOrderTf::new(parts[0], parts[1], parts[2]).map_err(|e| e.to_string())
}

fn parse_physical(s: &str) -> Result<SecondOrderTf, String> {
    let parts = parse_numbers(s, 4)?;
    PhysicalParams::new(parts[0], parts[1], parts[2], parts[3])
        .map(|p| p.to_tf())
        .map_err(|e| e.to_string())
}

fn parse_numbers(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(format!("expected {count} comma-separated numbers"));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| format!("invalid number `{p}`")))
        .collect()
}

fn open_input(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::new(EXIT_IO, format!("cannot open {}: {e}", path.display())))
}

fn create_output(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn signal_to_cli(err: SignalError) -> CliError {
    match err {
        SignalError::Io(e) => CliError::new(EXIT_IO, e.to_string()),
        SignalError::InvalidWaveSpec(_) => CliError::new(EXIT_USAGE, err.to_string()),
        other => CliError::new(EXIT_DATA, other.to_string()),
    }
}

fn estim_to_cli(err: EstimError) -> CliError {
    match err {
        EstimError::Io(e) => CliError::new(EXIT_IO, e.to_string()),
        EstimError::ModelFileParse { .. } | EstimError::Model(_) => {
            CliError::new(EXIT_DATA, err.to_string())
        }
        other => CliError::new(EXIT_NUMERICAL, other.to_string()),
    }
}

/// Six significant digits for human-readable output; files keep shortest
/// round-trip formatting.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(), // clap: 0 for --help/--version, 2 for usage errors
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Excite(args) => cmd_excite(args),
        Command::Identify(args) => cmd_identify(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Info(args) => cmd_info(args),
        Command::Step(args) => cmd_step(args),
    }
}

fn cmd_excite(args: ExciteArgs) -> Result<(), CliError> {
    if args.wave.amplitude.abs() > 255.0 {
        eprintln!(
            "warning: amplitude {} is outside the usual 8-bit PWM range [-255, 255]",
            args.wave.amplitude
        );
    }
    let tf = args.plant.resolve()?;
    let input = square_wave(
        args.wave.amplitude,
        args.wave.period,
        args.wave.duration,
        args.wave.dt,
        args.wave.duty,
    )
    .map_err(signal_to_cli)?;
    let dm = discretize_zoh(&tf, args.wave.dt)
        .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    let (psi, rate) = dm
        .simulate(&input, SimState::default())
        .map_err(|e| CliError::new(EXIT_NUMERICAL, e.to_string()))?;
    let spec = NoiseSpec::new(args.noise_std, args.seed).map_err(signal_to_cli)?;
    let psi_noisy = add_noise(&psi, &spec);
    let ds = TimeSeriesDataset::new(
        args.wave.dt,
        0.0,
        input.into_values(),
        psi_noisy.into_values(),
        Some(rate.into_values()),
        args.label,
    )
    .map_err(signal_to_cli)?;
    let mut out = create_output(&args.out)?;
    save_dataset(&ds, &mut out).map_err(signal_to_cli)?;
    out.flush()
        .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    println!("wrote {} samples to {}", ds.len(), args.out.display());
    Ok(())
}

fn cmd_identify(args: IdentifyArgs) -> Result<(), CliError> {
    let file = open_input(&args.dataset)?;
    let ds = load_dataset(file).map_err(signal_to_cli)?;
    let ds = detrend(&ds);
    let (train, test) = split_dataset(&ds, args.train_fraction).map_err(signal_to_cli)?;

    let init = equation_error_init(&train).map_err(estim_to_cli)?;
    let opts = EstimationOptions {
        max_iterations: args.max_iterations,
        ..EstimationOptions::default()
    };
    let report = estimate_output_error(&train, &init.model, &opts).map_err(estim_to_cli)?;
    let validation_fit = estim::cross_validate(&report.model, &test).map_err(estim_to_cli)?;

    let mf = ModelFile {
        model: report.model,
        dt_identified: ds.sample_period(),
        fit_train_percent: report.training_fit_percent,
    };
    let mut out = create_output(&args.out)?;
    estim::write_model_file(&mf, &mut out).map_err(estim_to_cli)?;
    out.flush()
        .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;

    let model = report.model;
    let (p1, p2) = model.poles();
    println!("dataset:        {} ({} samples, dt = {} s)", ds.label(), ds.len(), sig6(ds.sample_period()));
    if init.clamped_unstable_poles {
        println!("initializer:    unstable discrete poles clamped to radius 0.999");
    }
    if init.clamped_negative_coeffs {
        println!("initializer:    negative coefficients clamped to zero");
    }
    println!(
        "initializer:    K = {}, a1 = {}, a0 = {}",
        sig6(init.model.gain()),
        sig6(init.model.damping_coeff()),
        sig6(init.model.stiffness_coeff())
    );
    println!(
        "model:          K = {}, a1 = {}, a0 = {}",
        sig6(model.gain()),
        sig6(model.damping_coeff()),
        sig6(model.stiffness_coeff())
    );
    println!("poles:          {}, {}", fmt_pole(p1), fmt_pole(p2));
    println!("stability:      {}", model.stability());
    match model.dc_gain() {
        Ok(dc) => println!("dc gain:        {} rad/PWM", sig6(dc)),
        Err(_) => println!("dc gain:        undefined (free integrator)"),
    }
    println!("training fit:   {} %", sig6(report.training_fit_percent));
    println!("validation fit: {} %", sig6(validation_fit));
    println!(
        "iterations:     {} ({})",
        report.iterations_used, report.termination_reason
    );
    println!("model file:     {}", args.out.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let mf = estim::read_model_file(open_input(&args.model)?).map_err(estim_to_cli)?;
    let ds = load_dataset(open_input(&args.dataset)?).map_err(signal_to_cli)?;
    let outcome = cross_validate_detailed(&mf.model, &ds).map_err(estim_to_cli)?;
    println!("validation fit: {} %", sig6(outcome.fit_percent));
    if let Some(path) = &args.overlay {
        let scale = if args.degrees { 180.0 / std::f64::consts::PI } else { 1.0 };
        let mut out = create_output(path)?;
        writeln!(out, "t,psi_measured,psi_simulated")
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
        for k in 0..ds.len() {
            writeln!(
                out,
                "{},{},{}",
                ds.time_at(k),
                ds.output_yaw().values()[k] * scale,
                outcome.predicted_yaw.values()[k] * scale
            )
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
        }
        out.flush()
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
        println!("overlay:        {}", path.display());
    }
    Ok(())
}

fn cmd_info(args: InfoArgs) -> Result<(), CliError> {
    let tf = args.source.resolve()?;
    let (p1, p2) = tf.poles();
    println!(
        "model:         K = {}, a1 = {}, a0 = {}",
        sig6(tf.gain()),
        sig6(tf.damping_coeff()),
        sig6(tf.stiffness_coeff())
    );
    println!("poles:         {}, {}", fmt_pole(p1), fmt_pole(p2));
    let stability = tf.stability();
    if tf.stiffness_coeff() == 0.0 {
        println!("stability:     {stability} (integrator)");
    } else {
        println!("stability:     {stability}");
    }
    match tf.dc_gain() {
        Ok(dc) => {
            if args.degrees {
                println!("dc gain:       {} deg/PWM", sig6(dc.to_degrees()));
            } else {
                println!("dc gain:       {} rad/PWM", sig6(dc));
            }
        }
        Err(_) => println!("dc gain:       undefined (free integrator)"),
    }
    // Dominant time constant: reciprocal of the slowest decay rate.
    let slowest = [p1.re, p2.re]
        .iter()
        .map(|r| r.abs())
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    if slowest.is_finite() {
        println!("time constant: {} s", sig6(1.0 / slowest));
    } else {
        println!("time constant: unbounded (pole at the origin)");
    }
    Ok(())
}

fn cmd_step(args: StepArgs) -> Result<(), CliError> {
    let tf = args.source.resolve()?;
    let psi = step_response(&tf, args.amplitude, args.duration, args.dt)
        .map_err(|e| CliError::new(EXIT_USAGE, e.to_string()))?;
    let scale = if args.degrees { 180.0 / std::f64::consts::PI } else { 1.0 };
    let mut out = create_output(&args.out)?;
    writeln!(out, "t,psi").map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    for (k, v) in psi.values().iter().enumerate() {
        writeln!(out, "{},{}", k as f64 * args.dt, v * scale)
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    }
    out.flush()
        .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    println!("wrote {} samples to {}", psi.len(), args.out.display());
    Ok(())
}

fn fmt_pole(p: num_complex::Complex64) -> String {
    if p.im == 0.0 {
        sig6(p.re)
    } else if p.im > 0.0 {
        format!("{} + {}i", sig6(p.re), sig6(p.im))
    } else {
        format!("{} - {}i", sig6(p.re), sig6(-p.im))
    }
}
