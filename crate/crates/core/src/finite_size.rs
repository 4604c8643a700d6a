//! Finite-block key rate
//!
//! ```text
//! K = (n/N) [β I(A:B) - S - Δ(n)]
//! ```
//!
//! in two flavours. With local estimation every signal is a key signal
//! (`n = N`) and `S` is the Holevo bound of the locally estimated covariance.
//! The conventional flavour sacrifices `m = N - n` signals and evaluates `S`
//! on the worst-case covariance compatible with them except with
//! probability `ε_PE`.

use std::fmt;

use rayon::prelude::*;

use crate::channel::{build_covariance, check_sorted, ChannelParams};
use crate::gaussian_info::{holevo_bound, mutual_information, TwoModeCovariance};
use crate::numeric::bisect;
use crate::{Error, Result};

/// Default for `ε̄`, `ε_PE` and `ε_PA`.
pub const DEFAULT_FAILURE_PROBABILITY: f64 = 1e-10;

/// Block sizes of the standard finite-size figure.
pub const DEFAULT_BLOCK_SIZES: [u64; 5] = [10_000, 100_000, 1_000_000, 10_000_000, 100_000_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `n = N`; parameters come from the locally estimated covariance.
    LocalEstimation,
    /// `n = m = N/2`; parameters come from worst-case bounds on `m` samples.
    Conventional,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::LocalEstimation, Mode::Conventional];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::LocalEstimation => "local",
            Mode::Conventional => "conventional",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeParams {
    /// `N`, total exchanged signals.
    pub total_signals: u64,
    /// `n`, signals that end up in the key.
    pub key_signals: u64,
    /// Smoothing parameter `ε̄`.
    pub eps_smooth: f64,
    pub eps_pe: f64,
    pub eps_pa: f64,
    /// Dimension of the raw-key Hilbert space (binary encoding).
    pub dim_h: u32,
}

impl FiniteSizeParams {
    pub fn for_mode(total_signals: u64, mode: Mode) -> Self {
        let key_signals = match mode {
            Mode::LocalEstimation => total_signals,
            Mode::Conventional => total_signals / 2,
        };
        Self {
            total_signals,
            key_signals,
            eps_smooth: DEFAULT_FAILURE_PROBABILITY,
            eps_pe: DEFAULT_FAILURE_PROBABILITY,
            eps_pa: DEFAULT_FAILURE_PROBABILITY,
            dim_h: 2,
        }
    }

    pub fn with_failure_probabilities(self, eps_smooth: f64, eps_pe: f64, eps_pa: f64) -> Self {
        Self { eps_smooth, eps_pe, eps_pa, ..self }
    }

    /// `m = N - n`, signals sacrificed for parameter estimation.
    pub fn estimation_signals(&self) -> u64 {
        self.total_signals - self.key_signals
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_signals == 0 || self.key_signals == 0 || self.key_signals > self.total_signals {
            return Err(Error::Precondition(format!(
                "need 0 < n <= N, got n = {}, N = {}",
                self.key_signals, self.total_signals
            )));
        }
        for (what, value) in [
            ("smoothing parameter", self.eps_smooth),
            ("parameter-estimation failure probability", self.eps_pe),
            ("privacy-amplification failure probability", self.eps_pa),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Domain { what, value });
            }
        }
        Ok(())
    }
}

/// `Δ(n) = (2 dim H + 3) √(log2(2/ε̄)/n) + (2/n) log2(1/ε_PA)`.
pub fn privacy_amp_penalty(n: u64, fsp: &FiniteSizeParams) -> f64 {
    let n = n as f64;
    let dim = f64::from(fsp.dim_h);
    (2.0 * dim + 3.0) * ((2.0 / fsp.eps_smooth).log2() / n).sqrt()
        + 2.0 / n * (1.0 / fsp.eps_pa).log2()
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `(1 - erf(z/√2))/2 - ε_PE/2`; zero at the confidence coefficient.
pub fn confidence_residual(z: f64, eps_pe: f64) -> f64 {
    (1.0 - erf(z / std::f64::consts::SQRT_2)) / 2.0 - eps_pe / 2.0
}

/// Two-sided Gaussian quantile `z_{ε_PE/2}`: the upper tail beyond `z`
/// holds probability `ε_PE/2`.
pub fn confidence_coefficient(eps_pe: f64) -> Result<f64> {
    if !(eps_pe > 0.0 && eps_pe < 1.0) {
        return Err(Error::Domain { what: "parameter-estimation failure probability", value: eps_pe });
    }
    // erfc keeps full relative precision in the tail, unlike 1 - erf.
    let tail = |z: f64| Ok(erfc(z / std::f64::consts::SQRT_2) - eps_pe);
    let z = bisect(tail, 0.0, 40.0, 1e-14, 0.0)?;
    let residual = confidence_residual(z, eps_pe);
    if residual.abs() > 1e-10 {
        return Err(Error::Numeric(format!("confidence coefficient residual {residual}")));
    }
    Ok(z)
}

/// Pessimistic channel parameters after estimation on `m` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseParams {
    pub t_min: f64,
    pub sigma2_max: f64,
    /// Set when the raw lower bound on `t` was negative and got clamped to 0.
    pub t_clamped: bool,
}

/// ```text
/// t_min   = √η - z √((1 + ηε)/(m X'))
/// σ²_max  = 1 + ηε + z √2 (1 + ηε)/√m
/// ```
pub fn worst_case_params(eta: f64, eps: f64, m: u64, x_mod: f64, z: f64) -> Result<WorstCaseParams> {
    if m == 0 {
        return Err(Error::Precondition("no signals left for parameter estimation".into()));
    }
    if !(x_mod > 0.0) {
        return Err(Error::Domain { what: "estimator modulation variance", value: x_mod });
    }
    let m = m as f64;
    let noise = 1.0 + eta * eps;
    let t = eta.sqrt() - z * (noise / (m * x_mod)).sqrt();
    Ok(WorstCaseParams {
        t_min: t.max(0.0),
        sigma2_max: noise + z * std::f64::consts::SQRT_2 * noise / m.sqrt(),
        t_clamped: t < 0.0,
    })
}

/// `[[V I, t Z σ_z], [t Z σ_z, (t² V + σ²) I]]` with `Z = √(V² - 1)`.
pub fn worst_case_covariance(v: f64, wc: &WorstCaseParams) -> Result<TwoModeCovariance> {
    if !(v > 1.0) {
        return Err(Error::Domain { what: "modulation variance", value: v });
    }
    let t = wc.t_min;
    let cov = TwoModeCovariance::new(v, t * t * v + wc.sigma2_max, t * (v * v - 1.0).sqrt())?;
    cov.check_physical()?;
    Ok(cov)
}

/// Finite-size key rate in bits per pulse.
///
/// Conventional mode bounds one arm as a point-to-point channel with
/// `η = T` and estimator variance `X' = V - 1`.
pub fn finite_size_key_rate(p: &ChannelParams, fsp: &FiniteSizeParams, mode: Mode) -> Result<f64> {
    fsp.validate()?;
    let cov = build_covariance(p)?;
    let info = mutual_information(&cov)?;
    let leak = match mode {
        Mode::LocalEstimation => {
            if fsp.key_signals != fsp.total_signals {
                return Err(Error::Precondition("local estimation uses n = N".into()));
            }
            holevo_bound(&cov)?
        }
        Mode::Conventional => {
            let z = confidence_coefficient(fsp.eps_pe)?;
            let v = p.modulation_variance;
            let wc = worst_case_params(
                p.arm_transmittance(),
                p.excess_noise,
                fsp.estimation_signals(),
                v - 1.0,
                z,
            )?;
            holevo_bound(&worst_case_covariance(v, &wc)?)?
        }
    };
    let n = fsp.key_signals;
    let ratio = n as f64 / fsp.total_signals as f64;
    Ok(ratio * (p.beta * info - leak - privacy_amp_penalty(n, fsp)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeRow {
    pub block_size: u64,
    pub mode: Mode,
    pub distance_km: f64,
    pub key_rate: f64,
}

/// Rows ordered by block size, then mode (local first), then distance.
/// Failure probabilities are taken from `template`; its block sizes are
/// ignored.
pub fn finite_size_sweep(
    p: &ChannelParams,
    template: &FiniteSizeParams,
    block_sizes: &[u64],
    distances_km: &[f64],
) -> Result<Vec<FiniteSizeRow>> {
    if block_sizes.is_empty() || distances_km.is_empty() {
        return Err(Error::Precondition("empty sweep grid".into()));
    }
    check_sorted(distances_km)?;
    let jobs: Vec<(u64, Mode, f64)> = block_sizes
        .iter()
        .flat_map(|&n| {
            Mode::ALL
                .into_iter()
                .flat_map(move |mode| distances_km.iter().map(move |&d| (n, mode, d)))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(block_size, mode, distance_km)| {
            let fsp = FiniteSizeParams::for_mode(block_size, mode)
                .with_failure_probabilities(template.eps_smooth, template.eps_pe, template.eps_pa);
            let key_rate = finite_size_key_rate(&p.with_distance(distance_km), &fsp, mode)?;
            Ok(FiniteSizeRow { block_size, mode, distance_km, key_rate })
        })
        .collect()
}

/// Largest distance with a strictly positive rate, if any.
pub fn cutoff_distance<I>(points: I) -> Option<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    points
        .into_iter()
        .filter(|&(_, k)| k > 0.0)
        .map(|(d, _)| d)
        .reduce(f64::max)
}
