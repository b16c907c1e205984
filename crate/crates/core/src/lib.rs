//! Near-field ISAC with uniform circular arrays: Cramér–Rao and SPEB bounds
//! for coplanar and non-coplanar targets, and transmit beamformer design
//! under a communication SINR constraint.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod error;
pub mod fisher;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod scenario;
pub mod special;
pub mod wavefront;

pub use error::{Error, Result};
pub use fisher::{FimReport, TransmitCovariance};
pub use geometry::{AntennaLayout, LayoutKind};
pub use scenario::Scenario;
pub use wavefront::{Case, CVector, Coord, RVector, SteeringBundle, TargetState};
