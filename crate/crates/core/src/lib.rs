//! Simulation and analysis toolkit for 3D inverted-pendulum walking gaits
//! under virtual constraints.
//!
//! The crate synthesizes periodic gaits for a variable-length inverted
//! pendulum, simulates the hybrid walking dynamics (continuous single
//! support plus an instantaneous support exchange), and quantifies
//! self-synchronization and self-stabilization through the contraction of
//! the synchronization measure and the eigenvalues of the Poincare return
//! map.

pub mod dynamics;
pub mod error;
pub mod gait;
pub mod hybrid;
mod linalg;
pub mod lip;
pub mod manifold;
pub mod stability;
pub mod surface;
pub mod sweep;
pub mod swing;

pub use dynamics::{IntegrationOptions, ZeroDynState};
pub use error::{Result, WalkError};
pub use gait::{GaitConfig, PeriodicGait};
pub use hybrid::{simulate, StepSummary, StepTrace, WalkOutcome};
pub use lip::{LipParams, LipState};
pub use manifold::SwitchingManifold;
pub use stability::{PoincareCoords, StabilityReport};
pub use surface::ComSurface;
pub use sweep::{SweepCell, SweepSpec};
pub use swing::{SwingConstraint, SwingParams};
