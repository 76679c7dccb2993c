//! Continuous-time yaw dynamics of a twin-thruster surface vehicle.
//!
//! The plant is the linear second-order yaw model
//!
//! ```text
//! I_z * r_dot = 2 * l * a_t * u - b_y * r,      r = psi_dot
//! ```
//!
//! whose transfer function from PWM input `u` to yaw angle `psi` is
//! `K / (s^2 + a1*s + a0)`. The physical derivation yields `a0 = 0`
//! (a free integrator); [`SecondOrderTf`] additionally admits `a0 > 0`
//! so that models identified from data, which typically exhibit a
//! restoring-like term, are representable.

use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid transfer function: {0}")]
    InvalidTf(&'static str),
    #[error("free integrator (a0 = 0): steady-state yaw is unbounded under constant input")]
    Integrator,
}

/// Physical plant coefficients of the yaw channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    inertia_z: f64,
    drag_coeff: f64,
    thrust_coeff: f64,
    moment_arm: f64,
}

impl PhysicalParams {
    /// Builds a parameter set, rejecting non-physical values.
    ///
    /// `inertia_z` (kg m^2) and `moment_arm` (m) must be strictly positive,
    /// `drag_coeff` (N m s/rad) non-negative and `thrust_coeff`
    /// (N per PWM unit) strictly positive. Use
    /// [`PhysicalParams::with_signed_thrust`] for a reversed thrust mapping.
    pub fn new(
        inertia_z: f64,
        drag_coeff: f64,
        thrust_coeff: f64,
        moment_arm: f64,
    ) -> Result<Self, ModelError> {
        if !(thrust_coeff.is_finite() && thrust_coeff > 0.0) {
            return Err(ModelError::InvalidParams("thrust_coeff must be > 0"));
        }
        Self::with_signed_thrust(inertia_z, drag_coeff, thrust_coeff, moment_arm)
    }

    /// Like [`PhysicalParams::new`] but permits a negative thrust
    /// coefficient (thruster wired for reversed torque). Zero is still
    /// rejected: a plant with no control authority cannot be excited.
    pub fn with_signed_thrust(
        inertia_z: f64,
        drag_coeff: f64,
        thrust_coeff: f64,
        moment_arm: f64,
    ) -> Result<Self, ModelError> {
        if !(inertia_z.is_finite() && inertia_z > 0.0) {
            return Err(ModelError::InvalidParams("inertia_z must be > 0"));
        }
        if !(moment_arm.is_finite() && moment_arm > 0.0) {
            return Err(ModelError::InvalidParams("moment_arm must be > 0"));
        }
        if !(drag_coeff.is_finite() && drag_coeff >= 0.0) {
            return Err(ModelError::InvalidParams("drag_coeff must be >= 0"));
        }
        if !(thrust_coeff.is_finite() && thrust_coeff != 0.0) {
            return Err(ModelError::InvalidParams("thrust_coeff must be finite and non-zero"));
        }
        Ok(Self {
            inertia_z,
            drag_coeff,
            thrust_coeff,
            moment_arm,
        })
    }

    pub fn inertia_z(&self) -> f64 {
        self.inertia_z
    }

    pub fn drag_coeff(&self) -> f64 {
        self.drag_coeff
    }

    pub fn thrust_coeff(&self) -> f64 {
        self.thrust_coeff
    }

    pub fn moment_arm(&self) -> f64 {
        self.moment_arm
    }

    /// Transfer function `K / (s^2 + a1*s)` of the physical plant, with
    /// `K = 2*l*a_t / I_z` and `a1 = b_y / I_z`. The physical structure has
    /// no restoring term, so the stiffness coefficient is always zero.
    pub fn to_tf(&self) -> SecondOrderTf {
        SecondOrderTf {
            gain: 2.0 * self.moment_arm * self.thrust_coeff / self.inertia_z,
            damping_coeff: self.drag_coeff / self.inertia_z,
            stiffness_coeff: 0.0,
        }
    }

    /// Torque applied by the thruster pair for a differential PWM input:
    /// `2 * l * a_t * u`.
    pub fn applied_torque(&self, input: f64) -> Torque {
        Torque(2.0 * self.moment_arm * self.thrust_coeff * input)
    }

    /// Linear yaw drag torque `b_y * r`.
    pub fn drag_torque(&self, rate: f64) -> Torque {
        Torque(self.drag_coeff * rate)
    }

    /// Yaw acceleration `(2*l*a_t*u - b_y*r) / I_z`.
    pub fn yaw_accel(&self, state: &SimState, input: f64) -> f64 {
        (self.applied_torque(input).0 - self.drag_torque(state.yaw_rate).0) / self.inertia_z
    }
}

/// Continuous-time yaw model `psi(s)/u(s) = K / (s^2 + a1*s + a0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderTf {
    gain: f64,
    damping_coeff: f64,
    stiffness_coeff: f64,
}

impl SecondOrderTf {
    /// Builds a transfer function. The gain must be finite and non-zero;
    /// the denominator coefficients must be finite and non-negative
    /// (dissipative models only).
    pub fn new(gain: f64, damping_coeff: f64, stiffness_coeff: f64) -> Result<Self, ModelError> {
        if !(gain.is_finite() && gain != 0.0) {
            return Err(ModelError::InvalidTf("gain must be finite and non-zero"));
        }
        if !(damping_coeff.is_finite() && damping_coeff >= 0.0) {
            return Err(ModelError::InvalidTf("damping_coeff must be finite and >= 0"));
        }
        if !(stiffness_coeff.is_finite() && stiffness_coeff >= 0.0) {
            return Err(ModelError::InvalidTf("stiffness_coeff must be finite and >= 0"));
        }
        Ok(Self {
            gain,
            damping_coeff,
            stiffness_coeff,
        })
    }

    /// Unchecked constructor for estimator-internal candidates.
    pub(crate) fn raw(gain: f64, damping_coeff: f64, stiffness_coeff: f64) -> Self {
        Self {
            gain,
            damping_coeff,
            stiffness_coeff,
        }
    }

    /// Numerator constant `K`, rad/(s^2 * PWM unit).
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Denominator coefficient `a1`, 1/s.
    pub fn damping_coeff(&self) -> f64 {
        self.damping_coeff
    }

    /// Denominator coefficient `a0`, 1/s^2.
    pub fn stiffness_coeff(&self) -> f64 {
        self.stiffness_coeff
    }

    /// Roots of `s^2 + a1*s + a0`, sorted by real part ascending and then by
    /// imaginary part ascending. Complex roots come as a conjugate pair.
    pub fn poles(&self) -> (Complex64, Complex64) {
        let a1 = self.damping_coeff;
        let a0 = self.stiffness_coeff;
        let disc = a1 * a1 - 4.0 * a0;
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
        // Sorted by construction: equal real parts order by imaginary part.
        (p1, p2)
    }

    /// Stability classification from the pole pattern. For this denominator
    /// family (`a1, a0 >= 0`) the classification reduces to coefficient
    /// signs: both positive gives asymptotic stability, a single simple pole
    /// on the imaginary axis gives marginal stability, and a repeated pole
    /// at the origin (`a1 = a0 = 0`) is unstable.
    pub fn stability(&self) -> Stability {
        let a1 = self.damping_coeff;
        let a0 = self.stiffness_coeff;
        if a1 > 0.0 && a0 > 0.0 {
            Stability::AsymptoticallyStable
        } else if a1 > 0.0 || a0 > 0.0 {
            // a0 = 0: simple pole at origin plus a pole at -a1.
            // a1 = 0: simple conjugate pair at +/- i*sqrt(a0).
            Stability::MarginallyStable
        } else {
            // Double integrator: repeated pole at the origin.
            Stability::Unstable
        }
    }

    /// Steady-state yaw per unit constant input, `K / a0`. The physical
    /// structure (`a0 = 0`) integrates constant inputs without bound and has
    /// no DC gain.
    pub fn dc_gain(&self) -> Result<f64, ModelError> {
        if self.stiffness_coeff == 0.0 {
            Err(ModelError::Integrator)
        } else {
            Ok(self.gain / self.stiffness_coeff)
        }
    }
}

impl fmt::Display for SecondOrderTf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} / (s^2 + {}*s + {})",
            self.gain, self.damping_coeff, self.stiffness_coeff
        )
    }
}

/// Reference yaw model of the twin-thruster USV, identified from pool
/// trials: `0.013 / (s^2 + 2.08*s + 0.46)`. Used as the default plant in
/// synthetic experiments and throughout the test suite.
pub fn reference_model() -> SecondOrderTf {
    SecondOrderTf {
        gain: 0.013,
        damping_coeff: 2.08,
        stiffness_coeff: 0.46,
    }
}

/// Yaw angle `psi` (rad) and yaw rate `r = psi_dot` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    pub yaw: f64,
    pub yaw_rate: f64,
}

impl SimState {
    pub fn new(yaw: f64, yaw_rate: f64) -> Self {
        Self { yaw, yaw_rate }
    }
}

/// Torque about the vertical axis, N m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Torque(pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    AsymptoticallyStable,
    MarginallyStable,
    Unstable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stability::AsymptoticallyStable => "asymptotically stable",
            Stability::MarginallyStable => "marginally stable",
            Stability::Unstable => "unstable",
        };
        f.write_str(s)
    }
}
