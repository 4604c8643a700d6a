//! Secret-key-rate analysis for plug-and-play, dual-phase-modulated
//! measurement-device-independent CV-QKD.
//!
//! The crate is organised bottom-up:
//!
//! * [`gaussian_info`]: entropy function, symplectic spectrum, mutual
//!   information, Holevo bound and the asymptotic key rate of a two-mode
//!   Gaussian state in the `(a, b, c)` parametrisation.
//! * [`channel`]: fiber loss and entangling-cloner noise mapped onto that
//!   covariance, plus distance sweeps and the tolerable-excess-noise search.
//! * [`finite_size`]: the finite-block key rate with local (`n = N`) and
//!   conventional (`n = m = N/2`) parameter estimation.
//! * [`dpm_optics`]: Jones calculus for the Faraday-mirror round trip and the
//!   two-arm phase-modulator interferometer that replaces the amplitude
//!   modulator.
//! * [`protocol_sim`]: pulse-level Monte-Carlo run of the prepare-and-measure
//!   protocol, including Charlie's Bell measurement, the displacement step and
//!   local covariance estimation.
//!
//! All quadrature variances are in shot-noise units (vacuum = 1).

pub mod channel;
pub mod dpm_optics;
mod error;
pub mod finite_size;
pub mod gaussian_info;
pub mod numeric;
pub mod protocol_sim;
pub mod rng;

pub use error::{Error, Result};
