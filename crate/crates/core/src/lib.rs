//! Zeroth-order Nash equilibrium seeking in discrete time.
//!
//! * [`game`]: games, pseudogradients, constraint sets, reference equilibria.
//! * [`sync`]: forward-backward iteration and its dither-based zeroth-order version.
//! * [`schedule`] and [`async_seek`]: periodic sampling timers and the asynchronous
//!   algorithms, with the epoch operators and the step-size bound.
//! * [`averaging`]: numerical checks of the averaging bounds behind the algorithms.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix it.

// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod async_seek;
pub mod averaging;
pub mod error;
pub mod game;
pub mod linalg;
pub mod scalar;
pub mod schedule;
pub mod sync;

pub use error::{Error, Result};
pub use game::{ConstraintSet, Game, GameKind};
pub use linalg::Matrix;
pub use scalar::Scalar;
pub use schedule::TimerSchedule;
pub use sync::{GradientSource, OscillatorBank, SyncState, SyncZoParams};
pub use async_seek::AsyncState;

pub type Game64 = Game<f64>;
pub type Game32 = Game<f32>;
pub type ConstraintSet64 = ConstraintSet<f64>;
pub type OscillatorBank64 = OscillatorBank<f64>;
pub type OscillatorBank32 = OscillatorBank<f32>;
pub type SyncState64 = SyncState<f64>;
pub type SyncState32 = SyncState<f32>;
pub type AsyncState64 = AsyncState<f64>;
pub type AsyncState32 = AsyncState<f32>;
pub type SyncZoParams64 = SyncZoParams<f64>;
pub type Matrix64 = Matrix<f64>;
