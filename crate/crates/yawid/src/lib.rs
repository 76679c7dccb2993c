//! Gray-box system identification for the yaw channel of a twin-thruster
//! unmanned surface vehicle.
//!
//! The toolkit covers the full offline workflow:
//!
//! - [`model`]: continuous-time yaw dynamics — physical parameterization,
//!   second-order transfer function, poles, stability, DC gain.
//! - [`sim`]: exact zero-order-hold discretization and discrete simulation,
//!   including step responses.
//! - [`signals`]: square-wave excitation synthesis, dataset CSV I/O,
//!   preprocessing, train/test splitting and seeded measurement noise.
//! - [`estim`]: equation-error initializer, output-error refinement by
//!   Levenberg-Marquardt, NRMSE fitness scoring and cross-validation.
//!
//! The `yawid` binary wires these into `excite`, `identify`, `validate`,
//! `info` and `step` subcommands.

pub mod estim;
pub mod model;
pub mod signals;
pub mod sim;
