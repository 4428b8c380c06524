//! Maximum-stable-delay analysis for planar bi-modal hybrid systems.
//!
//! The crate computes, for a two-mode hybrid system with identity resets
//! (the canonical instance being a dissipative bouncing ball), the largest
//! switching delay under which the equilibrium remains attractive. The
//! estimate is obtained by locating the smallest delay that admits a closed
//! orbit of the delayed return map on a transversal section.
//!
//! Layering, bottom to top:
//! - [`ode`]: adaptive Runge–Kutta integration, dense output, event location;
//! - [`hybrid`]: two-mode automaton semantics, exact and delayed simulation;
//! - [`models`]: the bundled nonlinear and affine bouncing-ball instances;
//! - [`poincare`]: section geometry, the delayed return map, and the
//!   orbit-closing delay `h2*`;
//! - [`msd`]: scans and the 2-D minimization producing the delay bound;
//! - [`io`]: CSV/JSON export and deterministic number formatting.

pub mod error;
pub mod hybrid;
pub mod models;
pub mod ode;
pub mod vec2;

pub use error::{Result, SolverError};
pub use hybrid::{join, simulate, spatial_hits, BimodalAutomaton, DelayPolicy, DomainBox,
    HybridTrajectory, Mode, Transition};
pub use models::{bouncing_ball, bouncing_ball_affine, BouncingBallParams, ModelConfig, ModelKind};
pub use ode::{flow, integrate_dense, locate_event, DenseOutput, DenseSegment, Direction,
    IntegratorSettings, VectorField};
pub use vec2::Vec2;
