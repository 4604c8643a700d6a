//! Fiber channel with an entangling-cloner attack on each arm.
//!
//! Both arms are symmetric: Alice-Charlie and Bob-Charlie each span half of
//! the Alice-to-Bob distance. Loss follows `T = 10^(-α L / 10)`.

use rayon::prelude::*;

use crate::gaussian_info::{
    asymptotic_key_rate, check_beta, holevo_bound, mutual_information, TwoModeCovariance,
};
use crate::numeric::bisect;
use crate::{Error, Result};

/// Standard single-mode fiber loss in dB/km.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Alice-to-Bob distance; each arm is half of it.
    pub total_distance_km: f64,
    pub attenuation_db_per_km: f64,
    /// Excess noise referred to the channel input, SNU.
    pub excess_noise: f64,
    /// Total variance `V` of modes A and B, SNU.
    pub modulation_variance: f64,
    /// Reconciliation efficiency.
    pub beta: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            total_distance_km: 0.0,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            excess_noise: 0.001,
            modulation_variance: 20.0,
            beta: 0.95,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("distance", self.total_distance_km, self.total_distance_km >= 0.0),
            ("attenuation", self.attenuation_db_per_km, self.attenuation_db_per_km > 0.0),
            ("excess noise", self.excess_noise, self.excess_noise >= 0.0),
            ("modulation variance", self.modulation_variance, self.modulation_variance > 1.0),
        ];
        for (what, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::Domain { what, value });
            }
        }
        check_beta(self.beta)
    }

    pub fn with_distance(self, total_distance_km: f64) -> Self {
        Self { total_distance_km, ..self }
    }

    pub fn with_excess_noise(self, excess_noise: f64) -> Self {
        Self { excess_noise, ..self }
    }

    /// `T1 = T2`, the transmittance of one arm.
    pub fn arm_transmittance(&self) -> f64 {
        transmittance_from_distance(self.total_distance_km / 2.0, self.attenuation_db_per_km)
    }

    pub fn cloner_noise(&self) -> Result<ClonerNoise> {
        let w = cloner_variance(self.arm_transmittance(), self.excess_noise)?;
        Ok(ClonerNoise { w1: w, w2: w })
    }
}

/// Variances of Eve's EPR ancillas on the two arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClonerNoise {
    pub w1: f64,
    pub w2: f64,
}

pub fn transmittance_from_distance(arm_km: f64, alpha_db_per_km: f64) -> f64 {
    10f64.powf(-alpha_db_per_km * arm_km / 10.0)
}

/// `W = T χ / (1 - T)` with `χ = (1 - T)/T + ε`, i.e. `1 + T ε / (1 - T)`.
pub fn cloner_variance(t: f64, eps: f64) -> Result<f64> {
    if t == 1.0 {
        return Err(Error::LosslessSingularity);
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain { what: "transmittance", value: t });
    }
    if !(eps >= 0.0) {
        return Err(Error::Domain { what: "excess noise", value: eps });
    }
    let chi = (1.0 - t) / t + eps;
    Ok(t * chi / (1.0 - t))
}

/// Noise injected by the cloner into one arm, `(1 - T) W`, continuous at `T = 1`.
pub(crate) fn cloner_contribution(t: f64, eps: f64) -> Result<f64> {
    if t == 1.0 {
        return Ok(eps);
    }
    Ok((1.0 - t) * cloner_variance(t, eps)?)
}

/// Covariance of the EPR state of variance `v` after arms of transmittance
/// `t1`, `t2` under cloner attacks with input-referred excess noise `eps`.
pub fn covariance_from_arms(t1: f64, t2: f64, eps: f64, v: f64) -> Result<TwoModeCovariance> {
    if !(v > 1.0) {
        return Err(Error::Domain { what: "modulation variance", value: v });
    }
    let a = t1 * v + cloner_contribution(t1, eps)?;
    let b = t2 * v + cloner_contribution(t2, eps)?;
    let c = (t1 * t2 * (v * v - 1.0)).sqrt();
    let cov = TwoModeCovariance::new(a, b, c).map_err(internal)?;
    cov.check_physical().map_err(internal)?;
    Ok(cov)
}

fn internal(e: Error) -> Error {
    Error::Numeric(format!("channel model produced an inconsistent covariance: {e}"))
}

pub fn build_covariance(p: &ChannelParams) -> Result<TwoModeCovariance> {
    p.validate()?;
    let t = p.arm_transmittance();
    covariance_from_arms(t, t, p.excess_noise, p.modulation_variance)
}

pub fn key_rate(p: &ChannelParams) -> Result<f64> {
    asymptotic_key_rate(&build_covariance(p)?, p.beta)
}

/// One row of an asymptotic distance sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub distance_km: f64,
    pub arm_transmittance: f64,
    pub covariance: TwoModeCovariance,
    pub mutual_info: f64,
    pub holevo: f64,
    pub key_rate: f64,
}

pub fn rate_point(p: &ChannelParams) -> Result<RatePoint> {
    let covariance = build_covariance(p)?;
    let mutual_info = mutual_information(&covariance)?;
    let holevo = holevo_bound(&covariance)?;
    Ok(RatePoint {
        distance_km: p.total_distance_km,
        arm_transmittance: p.arm_transmittance(),
        covariance,
        mutual_info,
        holevo,
        key_rate: p.beta * mutual_info - holevo,
    })
}

/// Asymptotic key rate over a distance grid. `base.total_distance_km` is
/// ignored; results follow the order of `distances_km`.
pub fn rate_vs_distance(base: &ChannelParams, distances_km: &[f64]) -> Result<Vec<RatePoint>> {
    check_sorted(distances_km)?;
    distances_km
        .par_iter()
        .map(|&d| rate_point(&base.with_distance(d)))
        .collect()
}

pub(crate) fn check_sorted(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Precondition("distance grid must be sorted ascending".into()));
    }
    Ok(())
}

const NOISE_BRACKET_START: f64 = 1.0;
const NOISE_BRACKET_LIMIT: f64 = 100.0;

/// Excess noise at which the asymptotic key rate reaches zero at
/// `distance_km`. `base.excess_noise` is ignored.
pub fn tolerable_excess_noise(base: &ChannelParams, distance_km: f64) -> Result<f64> {
    let at = base.with_distance(distance_km);
    let rate = |eps: f64| key_rate(&at.with_excess_noise(eps));
    if rate(0.0)? <= 0.0 {
        return Err(Error::NoPositiveRate { distance_km });
    }
    let mut hi = NOISE_BRACKET_START;
    while rate(hi)? >= 0.0 {
        hi *= 2.0;
        if hi > NOISE_BRACKET_LIMIT {
            return Err(Error::Numeric(format!(
                "key rate still positive at excess noise {NOISE_BRACKET_LIMIT}"
            )));
        }
    }
    bisect(rate, 0.0, hi, 1e-12, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn defaults(distance: f64) -> ChannelParams {
        ChannelParams::default().with_distance(distance)
    }

    #[test]
    fn transmittance_examples() {
        assert_eq!(transmittance_from_distance(0.0, 0.2), 1.0);
        assert_abs_diff_eq!(transmittance_from_distance(50.0, 0.2), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(
            transmittance_from_distance(15.0, 0.2),
            10f64.powf(-0.3),
            epsilon = 1e-15
        );
    }

    #[test]
    fn cloner_examples() {
        for t in [0.01, 0.3, 0.9] {
            assert_abs_diff_eq!(cloner_variance(t, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(cloner_variance(0.5, 0.001).unwrap(), 1.001, epsilon = 1e-15);
        assert_eq!(cloner_variance(1.0, 0.001), Err(Error::LosslessSingularity));
        let t = 1.0 - 1e-9;
        let w = cloner_variance(t, 0.001).unwrap();
        assert!(w > 1e5);
        assert_abs_diff_eq!((1.0 - t) * w, 0.001, epsilon = 1e-9);
    }

    #[test]
    fn lossless_noiseless_is_epr() {
        let p = ChannelParams { excess_noise: 0.0, ..defaults(0.0) };
        let c = build_covariance(&p).unwrap();
        assert_eq!(c.a, 20.0);
        assert_eq!(c.b, 20.0);
        assert_abs_diff_eq!(c.c, 399f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn half_transmittance_pure_loss() {
        let c = covariance_from_arms(0.5, 0.5, 0.0, 20.0).unwrap();
        assert_abs_diff_eq!(c.a, 0.5 * 20.0 + 0.5, epsilon = 1e-14);
    }

    #[test]
    fn twenty_km_entries() {
        // Independent form a = T V + (1 - T) + T ε with T = 10^(-0.2).
        let c = build_covariance(&defaults(20.0)).unwrap();
        let t = 10f64.powf(-0.2);
        let a = t * 20.0 + (1.0 - t) + t * 0.001;
        assert_abs_diff_eq!(c.a, a, epsilon = 1e-12);
        assert_abs_diff_eq!(c.a, 12.988_820_502_468_152, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c, 12.603_363_084_940_678, epsilon = 1e-12);
    }

    #[test]
    fn continuity_at_unit_transmittance() {
        let near = covariance_from_arms(1.0 - 1e-9, 1.0 - 1e-9, 0.001, 20.0).unwrap();
        let at = covariance_from_arms(1.0, 1.0, 0.001, 20.0).unwrap();
        assert_abs_diff_eq!(at.a, 20.001, epsilon = 1e-15);
        assert!((near.a - 20.001).abs() < 1e-6);
    }

    #[test]
    fn lossless_epr_rate_is_positive() {
        let p = ChannelParams { excess_noise: 0.0, beta: 1.0, ..defaults(0.0) };
        let pts = rate_vs_distance(&p, &[0.0]).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].key_rate > 0.0);
        assert_abs_diff_eq!(pts[0].key_rate, 3.392_317_422_778_760_3, epsilon = 1e-8);
    }

    #[test]
    fn heavy_noise_kills_the_key() {
        let p = defaults(0.0).with_excess_noise(0.5);
        let grid: Vec<f64> = (0..50).map(|i| i as f64).collect();
        for pt in rate_vs_distance(&p, &grid).unwrap() {
            assert!(pt.key_rate < 0.0, "{pt:?}");
        }
    }

    #[test]
    fn unsorted_grid_rejected() {
        assert!(rate_vs_distance(&defaults(0.0), &[2.0, 1.0]).is_err());
    }

    #[test]
    fn tolerable_noise_residual() {
        for d in [0.0, 1.0, 3.0, 6.0] {
            let eps = tolerable_excess_noise(&defaults(0.0), d).unwrap();
            assert!(eps > 0.0);
            let k = key_rate(&defaults(d).with_excess_noise(eps)).unwrap();
            assert!(k.abs() < 1e-10, "d = {d}: K(ε*) = {k}");
        }
    }

    #[test]
    fn tolerable_noise_needs_positive_rate() {
        assert!(matches!(
            tolerable_excess_noise(&defaults(0.0), 30.0),
            Err(Error::NoPositiveRate { .. })
        ));
    }

    #[test]
    fn invalid_params() {
        assert!(build_covariance(&ChannelParams { beta: 0.0, ..defaults(1.0) }).is_err());
        assert!(build_covariance(&ChannelParams { modulation_variance: 1.0, ..defaults(1.0) }).is_err());
        assert!(build_covariance(&defaults(-1.0)).is_err());
        assert!(build_covariance(&defaults(1.0).with_excess_noise(-0.1)).is_err());
    }
}
