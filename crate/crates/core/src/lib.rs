//! Multi-layer optical OFDM (ADO, HACO, LACO) simulation and analysis.
//!
//! The crate covers the single-layer clipping modulators, layered
//! transmitters with a successive-cancellation receiver, a worst-case model
//! of the residual clipping noise left by imperfect cancellation, closed-form
//! symbol error rates built on that model, and an SER-constrained bit and
//! power allocator. Monte Carlo drivers in [`experiment`] check the models
//! against simulation.

pub mod allocator;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod experiment;
pub mod modems;
pub mod multilayer;
pub mod numerics;
pub mod rcn_model;
pub mod ser_theory;

pub use error::{Error, Result};
pub use numerics::{Complex, FrameSignal, FrameSpectrum};
