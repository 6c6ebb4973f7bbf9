//! Photon-echo and multiwave-mixing signals of qubit ensembles dephasing
//! through bosonic reservoirs under impulsive (bang-bang) pulse control.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! `*F64` aliases below cover the common case.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod csvio;
pub mod error;
pub mod fit;
pub mod gamma;
pub mod kernels;
pub mod oracle;
pub mod pulses;
pub mod quad;
pub mod real;
pub mod signals;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};
pub use gamma::{QuadConfig, WeakExponents};
pub use kernels::{Coeffs3, GammaKind, Sign};
pub use pulses::{DiffractionOrder, Pulse, PulseMode, PulseSequence};
pub use real::Real;
pub use signals::{EnsembleSpec, Medium, Observable, SignalCurve, TimeIntegration, WeakSignal};
pub use spectral::SpectralDensity;
pub use units::PhysConst;

pub type SpectralDensityF64 = SpectralDensity<f64>;
pub type PulseSequenceF64 = PulseSequence<f64>;
pub type QuadConfigF64 = QuadConfig<f64>;
pub type MediumF64 = Medium<f64>;
pub type SignalCurveF64 = SignalCurve<f64>;

pub type SpectralDensityF32 = SpectralDensity<f32>;
pub type PulseSequenceF32 = PulseSequence<f32>;

pub type FitProblemF64 = fit::FitProblem<f64>;
pub type FitResultF64 = fit::FitResult<f64>;
