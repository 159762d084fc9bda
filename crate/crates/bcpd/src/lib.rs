//! Border-collision period-doubling analysis under alternate pacing.
//!
//! A border-collision bifurcation happens when a fixed point of a
//! continuous, piecewise-smooth map crosses the surface where the map's
//! derivatives jump. Near such a crossing the dynamics reduce to a
//! piecewise-linear normal form, and the period-doubling flavor of the
//! bifurcation responds to alternate pacing (a subharmonic perturbation of
//! the bifurcation parameter) in a way that is qualitatively different from
//! the classical, smooth period-doubling case. This crate implements that
//! analysis pipeline end to end:
//!
//! * [`matrix`] — minimal dense linear algebra (LU, QR eigenvalues,
//!   operator norms) for dimensions up to 16;
//! * [`normal_form`] — the piecewise-linear normal form, its fixed points
//!   and period-two orbits, and the structural condition checks;
//! * [`reduction`] — numeric reduction of a general continuous
//!   piecewise-smooth map to the normal form at a border crossing;
//! * [`pacing`] — closed-form paced period-two responses (unilateral,
//!   bilateral in-phase, bilateral out-of-phase) plus a brute-force paced
//!   simulator used as an oracle;
//! * [`gain`] — prebifurcation gain, gain parameter sweeps, the classical
//!   gain cubic, and a classifier that tells the two bifurcation types
//!   apart from sampled gain curves;
//! * [`sun`] — the Sun et al. atrioventricular nodal conduction model as a
//!   built-in case study.
//!
//! # Example
//!
//! ```
//! use bcpd::{gain, pacing};
//! use bcpd::{matrix::Matrix, NormalFormMap};
//!
//! # fn main() -> bcpd::Result<()> {
//! // The scalar map a = 0.5, b = -1.5, c = 1.
//! let map = NormalFormMap::new(
//!     Matrix::new(1, 1, vec![0.5])?,
//!     Matrix::new(1, 1, vec![-1.5])?,
//!     vec![1.0],
//! )?;
//! assert!(map.check_conditions().analysis_ready());
//!
//! // Closed-form paced response and gain, cross-checked by brute force.
//! let response = pacing::predicted_response(&map, 0.1, 1.0)?;
//! assert!((response.y_upper[0] - 1.4).abs() < 1e-12);
//! let gamma = gain::gain_theory_bc(&map, 0.1, 1.0)?;
//! let sim = pacing::simulate_paced(&map, 0.1, 1.0, &[0.5], &Default::default())?;
//! assert!((gain::gain_of_response(&sim.response)? - gamma).abs() < 1e-8);
//! # Ok(())
//! # }
//! ```

pub mod error;
pub mod gain;
pub mod matrix;
pub mod normal_form;
pub mod pacing;
pub mod reduction;
pub mod sun;

pub use error::{Error, Result};
pub use gain::{ClassifierVerdict, GainCurve, GainParams, Verdict};
pub use matrix::{ComplexList, Matrix};
pub use normal_form::{ConditionReport, ConditionStatus, NormalFormMap, PeriodTwoOrbit};
pub use pacing::{PacedResponse, PacingDerived, ResponseKind, SimOptions};
pub use reduction::{PiecewiseSmoothMap, ReductionResult};
pub use sun::{SunParams, SunState};
