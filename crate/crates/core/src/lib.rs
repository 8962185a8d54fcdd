//! Intrinsic force sensing and force control for hydraulic soft fluidic
//! actuators (SFAs) and the three-actuator parallel soft end-effector (SEE).
//!
//! The crate is organised bottom-up:
//!
//! * [`types`] and [`linalg`]: unit conventions, actuator-space vectors and
//!   the small dense linear-algebra contract everything else relies on.
//! * [`kinematics`]: constant-curvature poses and the actuator/Cartesian
//!   wrench transform `H`.
//! * [`plant`]: the ground-truth fixed-step simulator that stands in for the
//!   hardware (pumps, transducers, clamps, weights).
//! * [`sensing`]: static, quasi-static and dynamic force estimators.
//! * [`calib`]: identification of stiffness, damping and transmission.
//! * [`control`]: EMA filtering, discrete PID and the closed loop.
//! * [`harness`]: scenario configuration, experiment runners, summaries.
//!
//! Units everywhere: ml, kPa, N, ml/s, mm, s, rad.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod control;
pub mod harness;
pub mod kinematics;
pub mod linalg;
pub mod plant;
pub mod sensing;
pub mod types;

pub use types::{ActuatorState, ActuatorVector, StiffnessMatrix};
