//! Hardware-free model of a keyboard-driven Arduino car.
//!
//! The pipeline, host to wheels:
//!
//! - [`protocol`]: one byte per drive command, ASCII acknowledgement lines back
//! - [`transport`]: loopback and lossy in-memory links, plus a serial adapter
//! - [`firmware`]: the sketch's serial loop and H-bridge execution table
//! - [`drivetrain`]: pins to wheel speed through battery sag and current limits
//! - [`dynamics`]: differential-drive kinematics and caster disturbance
//! - [`course`]: obstacle courses, authoring, collisions and scoring
//! - [`session`]: the fixed-timestep loop tying it together, record and replay
//! - [`wire`]: JSON messages for session clients

pub mod conformance;
pub mod course;
pub mod drivetrain;
pub mod dynamics;
pub mod firmware;
pub mod protocol;
pub mod session;
pub mod transport;
pub mod wire;

pub use protocol::{decode_command, encode_command, Command, TelemetryEvent};
pub use session::{Session, SessionConfig, SessionEvent};
