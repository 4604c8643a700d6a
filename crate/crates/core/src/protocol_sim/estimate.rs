//! Local estimation from simulated records: tripartite moments, gain
//! optimisation and the effective two-mode covariance.

use nalgebra::{Matrix2, SMatrix};
use rayon::prelude::*;

use super::{displace_keys, Gain, RoundRecord, SimConfig, DISPLACEMENT_SIGNS};
use crate::channel::{cloner_contribution, covariance_from_arms};
use crate::gaussian_info::{asymptotic_key_rate, check_beta, TwoModeCovariance};
use crate::numeric::golden_section_max;
use crate::rng::chunks;
use crate::{Error, Result};

pub const MIN_RECORDS_FOR_GAIN: usize = 1000;
pub const GAIN_SEARCH_MAX: f64 = 4.0;
const GAIN_TOL: f64 = 1e-6;
const GAIN_SCAN_POINTS: usize = 81;
const CONVENTION_SIGMAS: f64 = 5.0;
/// Relative standard error `√(2/n)` of a variance above which a run is
/// flagged as statistically insufficient.
const MAX_RELATIVE_SE: f64 = 0.01;

type Matrix6 = SMatrix<f64, 6, 6>;

/// Second moments of `(x_A', p_A')` (X), `(x_B', p_B')` (Y) and
/// `(x_Z, p_Z)` (Z). Cross blocks are indexed `[row of first][col of second]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripartiteCovariance {
    pub x: Matrix2<f64>,
    pub y: Matrix2<f64>,
    pub z: Matrix2<f64>,
    pub c_xz: Matrix2<f64>,
    pub c_yz: Matrix2<f64>,
    pub c_xy: Matrix2<f64>,
    pub count: usize,
}

impl TripartiteCovariance {
    /// Order `x_A', p_A', x_B', p_B', x_Z, p_Z`.
    pub fn to_matrix(&self) -> Matrix6 {
        let mut m = Matrix6::zeros();
        let blocks = [
            (0, 0, self.x),
            (2, 2, self.y),
            (4, 4, self.z),
            (0, 4, self.c_xz),
            (2, 4, self.c_yz),
            (0, 2, self.c_xy),
        ];
        for (r, c, b) in blocks {
            m.fixed_view_mut::<2, 2>(r, c).copy_from(&b);
            if r != c {
                m.fixed_view_mut::<2, 2>(c, r).copy_from(&b.transpose());
            }
        }
        m
    }

    fn from_matrix(m: &Matrix6, count: usize) -> Self {
        let b = |r, c| m.fixed_view::<2, 2>(r, c).into_owned();
        Self {
            x: b(0, 0),
            y: b(2, 2),
            z: b(4, 4),
            c_xz: b(0, 4),
            c_yz: b(2, 4),
            c_xy: b(0, 2),
            count,
        }
    }
}

fn chunk_sums<F, const D: usize>(records: &[RoundRecord], f: F) -> Vec<[f64; D]>
where
    F: Fn(&[RoundRecord]) -> [f64; D] + Sync,
{
    chunks(records.len())
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(_, start, len)| f(&records[start..start + len]))
        .collect()
}

fn ordered_total<const D: usize>(parts: &[[f64; D]]) -> [f64; D] {
    let mut total = [0.0; D];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Sample covariance (mean-subtracted, `n - 1` normalisation) of six
/// columns per record. Partial sums are combined in chunk order, so the
/// result is independent of the worker count.
fn sample_covariance<G>(records: &[RoundRecord], columns: G) -> Result<Matrix6>
where
    G: Fn(&RoundRecord) -> [f64; 6] + Sync,
{
    let n = records.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "covariance estimation needs at least 2 records, got {n}"
        )));
    }
    let sums = ordered_total(&chunk_sums(records, |rs| {
        let mut s = [0.0; 6];
        for r in rs {
            for (acc, v) in s.iter_mut().zip(columns(r)) {
                *acc += v;
            }
        }
        s
    }));
    let mean = sums.map(|s| s / n as f64);
    let products = ordered_total(&chunk_sums(records, |rs| {
        let mut s = [0.0; 21];
        for r in rs {
            let v = columns(r);
            let d: [f64; 6] = std::array::from_fn(|i| v[i] - mean[i]);
            let mut k = 0;
            for i in 0..6 {
                for j in i..6 {
                    s[k] += d[i] * d[j];
                    k += 1;
                }
            }
        }
        s
    }));
    let mut m = Matrix6::zeros();
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            let v = products[k] / (n - 1) as f64;
            m[(i, j)] = v;
            m[(j, i)] = v;
            k += 1;
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample moments".into()));
    }
    Ok(m)
}

pub fn estimate_tripartite_covariance(records: &[RoundRecord]) -> Result<TripartiteCovariance> {
    let m = sample_covariance(records, RoundRecord::tripartite)?;
    Ok(TripartiteCovariance::from_matrix(&m, records.len()))
}

/// Population moments implied by the channel model.
pub fn analytic_tripartite_covariance(cfg: &SimConfig) -> Result<TripartiteCovariance> {
    cfg.validate()?;
    let (sa, sb) = (cfg.modulation_a(), cfg.modulation_b());
    let (t1, t2) = (cfg.t1, cfg.t2);
    let noise_a = t1 + cloner_contribution(t1, cfg.excess_noise)?;
    let noise_b = t2 + cloner_contribution(t2, cfg.excess_noise)?;
    let z = 0.5 * (t1 * sa + noise_a + t2 * sb + noise_b);
    let ga = (t1 / 2.0).sqrt() * sa;
    let gb = (t2 / 2.0).sqrt() * sb;
    Ok(TripartiteCovariance {
        x: Matrix2::from_diagonal_element(sa),
        y: Matrix2::from_diagonal_element(sb),
        z: Matrix2::from_diagonal_element(z),
        c_xz: Matrix2::from_diagonal_element(ga),
        c_yz: Matrix2::new(-gb, 0.0, 0.0, gb),
        c_xy: Matrix2::zeros(),
        count: cfg.num_pulses,
    })
}

/// Gaussian standard error of each sample covariance entry,
/// `√((σ_ii σ_jj + σ_ij²) / n)`.
pub fn standard_errors(population: &TripartiteCovariance, n: usize) -> Matrix6 {
    let m = population.to_matrix();
    Matrix6::from_fn(|i, j| ((m[(i, i)] * m[(j, j)] + m[(i, j)].powi(2)) / n as f64).sqrt())
}

/// Variances and cross-covariances of the displaced keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacedMoments {
    pub var_xa: f64,
    pub var_pa: f64,
    pub var_xb: f64,
    pub var_pb: f64,
    /// `⟨x_A x_B⟩`.
    pub c_x: f64,
    /// `⟨p_A p_B⟩`.
    pub c_p: f64,
}

impl DisplacedMoments {
    /// Sum over both quadratures of the Gaussian mutual information between
    /// Alice's and Bob's displaced values.
    pub fn mutual_information(&self) -> f64 {
        let one = |va: f64, vb: f64, c: f64| {
            let det = va * vb - c * c;
            if !(det > 0.0) {
                return f64::NAN;
            }
            0.5 * (va * vb / det).log2()
        };
        one(self.var_xa, self.var_xb, self.c_x) + one(self.var_pa, self.var_pb, self.c_p)
    }
}

/// Moments of the displaced keys at gain `k`, obtained as `L Σ Lᵀ` from the
/// tripartite covariance.
pub fn displaced_moments(tri: &TripartiteCovariance, k: f64) -> DisplacedMoments {
    let [sxa, spa, sxb, spb] = DISPLACEMENT_SIGNS;
    let mut l = SMatrix::<f64, 4, 6>::identity();
    l[(0, 4)] = -sxa * k;
    l[(1, 5)] = -spa * k;
    l[(2, 4)] = -sxb * k;
    l[(3, 5)] = -spb * k;
    let m = l * tri.to_matrix() * l.transpose();
    DisplacedMoments {
        var_xa: m[(0, 0)],
        var_pa: m[(1, 1)],
        var_xb: m[(2, 2)],
        var_pb: m[(3, 3)],
        c_x: m[(0, 2)],
        c_p: m[(1, 3)],
    }
}

/// Displaced-pair mutual information at gain `k`, counted only while the
/// correlations keep the convention signs (`⟨x_A x_B⟩ > 0`, `⟨p_A p_B⟩ < 0`).
/// For large `k` both keys are dominated by the public `k γ` term and the
/// correlation flips sign; that branch carries no secret information and
/// scores zero.
pub fn mutual_information_at_gain(tri: &TripartiteCovariance, k: f64) -> f64 {
    let m = displaced_moments(tri, k);
    if m.c_x > 0.0 && m.c_p < 0.0 {
        m.mutual_information()
    } else {
        0.0
    }
}

/// Maximises the displaced-pair mutual information over `k ∈ [0, 4]`: a
/// uniform scan locates the peak, golden-section refines it to `1e-6`.
pub fn optimize_gain_from_moments(tri: &TripartiteCovariance) -> Result<f64> {
    let prepared = tri.x.trace().min(tri.y.trace());
    if !(prepared > 1e-12) {
        return Err(Error::DegenerateOptimum);
    }
    let step = GAIN_SEARCH_MAX / (GAIN_SCAN_POINTS - 1) as f64;
    let scan: Vec<f64> = (0..GAIN_SCAN_POINTS)
        .map(|i| mutual_information_at_gain(tri, i as f64 * step))
        .collect();
    if scan.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateOptimum);
    }
    let (best, &peak) = scan
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is non-empty");
    let floor = scan.iter().copied().fold(f64::INFINITY, f64::min);
    if peak - floor < 1e-9 * peak.abs().max(1.0) {
        return Err(Error::DegenerateOptimum);
    }
    let lo = best.saturating_sub(1) as f64 * step;
    let hi = ((best + 1).min(GAIN_SCAN_POINTS - 1)) as f64 * step;
    let objective = |k: f64| {
        let v = mutual_information_at_gain(tri, k);
        if v.is_finite() { v } else { f64::NEG_INFINITY }
    };
    Ok(golden_section_max(objective, lo, hi, GAIN_TOL))
}

pub fn optimize_gain(records: &[RoundRecord]) -> Result<f64> {
    if records.len() < MIN_RECORDS_FOR_GAIN {
        return Err(Error::Precondition(format!(
            "gain optimisation needs at least {MIN_RECORDS_FOR_GAIN} records, got {}",
            records.len()
        )));
    }
    optimize_gain_from_moments(&estimate_tripartite_covariance(records)?)
}

/// Per-arm transmittances and excess noise fitted from the tripartite
/// moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    pub t1: f64,
    pub t2: f64,
    pub excess_noise: f64,
    /// Residual variance of Charlie's outcomes given the prepared data,
    /// `1 + (T₁ + T₂) ε / 2` in expectation.
    pub residual_variance: f64,
}

/// Least-squares regression of `x_Z` on `(x_A', x_B')` and of `p_Z` on
/// `(p_A', p_B')`. The slopes are `±√(T/2)`; the residual variance carries
/// the excess noise. Estimated transmittances are clamped to `(0, 1]` and
/// the noise to `ε ≥ 0`.
pub fn estimate_channel(tri: &TripartiteCovariance) -> Result<ChannelEstimate> {
    let n = tri.count;
    if n < 4 {
        return Err(Error::Precondition(format!(
            "channel fit needs at least 4 records, got {n}"
        )));
    }
    let fit = |q: usize| -> Result<([f64; 2], f64)> {
        let s = Matrix2::new(tri.x[(q, q)], tri.c_xy[(q, q)], tri.c_xy[(q, q)], tri.y[(q, q)]);
        let r = nalgebra::Vector2::new(tri.c_xz[(q, q)], tri.c_yz[(q, q)]);
        let inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular prepared-data covariance".into()))?;
        let beta = inv * r;
        let resid = (tri.z[(q, q)] - r.dot(&beta)) * (n - 1) as f64 / (n - 3) as f64;
        Ok(([beta[0], beta[1]], resid))
    };
    let (bx, rx) = fit(0)?;
    let (bp, rp) = fit(1)?;
    let [sxa, spa, sxb, spb] = DISPLACEMENT_SIGNS;
    let slope_a = 0.5 * (sxa * bx[0] + spa * bp[0]);
    let slope_b = 0.5 * (sxb * bx[1] + spb * bp[1]);
    if !(slope_a > 0.0 && slope_b > 0.0) {
        return Err(Error::Unphysical(format!(
            "fitted arm gains ({slope_a}, {slope_b}) are not positive"
        )));
    }
    let t1 = (2.0 * slope_a * slope_a).min(1.0);
    let t2 = (2.0 * slope_b * slope_b).min(1.0);
    let residual_variance = 0.5 * (rx + rp);
    let excess_noise = (2.0 * (residual_variance - 1.0) / (t1 + t2)).max(0.0);
    Ok(ChannelEstimate { t1, t2, excess_noise, residual_variance })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCovariance {
    pub displaced: DisplacedMoments,
    pub channel: ChannelEstimate,
    pub covariance: TwoModeCovariance,
}

/// Checks the displaced keys against the sign convention
/// (`⟨p_A p_B⟩ ≈ -⟨x_A x_B⟩`), fits the channel from the same records and
/// returns the entangled-equivalent covariance for senders of variance
/// `variance`.
pub fn effective_two_mode_covariance(
    records: &[RoundRecord],
    variance: f64,
) -> Result<EffectiveCovariance> {
    if records.iter().any(|r| !r.is_displaced()) {
        return Err(Error::Precondition("records have not been displaced".into()));
    }
    let keys = |r: &RoundRecord| [r.xa, r.pa, r.xb, r.pb, 0.0, 0.0];
    let m = sample_covariance(records, keys)?;
    let displaced = DisplacedMoments {
        var_xa: m[(0, 0)],
        var_pa: m[(1, 1)],
        var_xb: m[(2, 2)],
        var_pb: m[(3, 3)],
        c_x: m[(0, 2)],
        c_p: m[(1, 3)],
    };
    let n = records.len() as f64;
    let se = |va: f64, vb: f64, c: f64| (va * vb + c * c) / n;
    let tolerance = CONVENTION_SIGMAS
        * (se(displaced.var_xa, displaced.var_xb, displaced.c_x)
            + se(displaced.var_pa, displaced.var_pb, displaced.c_p))
        .sqrt();
    if (displaced.c_x + displaced.c_p).abs() > tolerance {
        return Err(Error::ConventionViolation { xx: displaced.c_x, pp: displaced.c_p, tolerance });
    }
    let channel = estimate_channel(&estimate_tripartite_covariance(records)?)?;
    let covariance = covariance_from_arms(channel.t1, channel.t2, channel.excess_noise, variance)?;
    Ok(EffectiveCovariance { displaced, channel, covariance })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub gain: f64,
    /// `true` when automatic optimisation failed on a small sample and
    /// `k = 0` was used instead.
    pub gain_fallback: bool,
    pub tripartite: TripartiteCovariance,
    pub analytic: TripartiteCovariance,
    /// Largest `|empirical - analytic| / standard error` over Γ_XYZ.
    pub max_z_score: f64,
    pub effective: Option<EffectiveCovariance>,
    pub empirical_key_rate: f64,
    pub analytic_key_rate: f64,
    pub relative_error: f64,
    pub insufficient_statistics: bool,
}

fn is_insufficient(n: usize) -> bool {
    n < MIN_RECORDS_FOR_GAIN || (2.0 / n as f64).sqrt() > MAX_RELATIVE_SE
}

/// Simulates, displaces and estimates. The returned records carry the
/// displaced keys. Symmetric sender variances are required for the key
/// rate comparison.
pub fn run_simulation(cfg: &SimConfig, beta: f64) -> Result<(Vec<RoundRecord>, SimulationReport)> {
    check_beta(beta)?;
    if cfg.variance_a != cfg.variance_b {
        return Err(Error::Precondition(
            "key rate comparison needs equal sender variances".into(),
        ));
    }
    let mut records = super::simulate_batch(cfg)?;
    let n = records.len();
    let insufficient = is_insufficient(n);
    let tripartite = estimate_tripartite_covariance(&records)?;
    let (gain, gain_fallback) = match cfg.gain {
        Gain::Fixed(k) => (k, false),
        Gain::Auto => match optimize_gain_from_moments(&tripartite) {
            Ok(k) => (k, false),
            Err(_) if insufficient => (0.0, true),
            Err(e) => return Err(e),
        },
    };
    displace_keys(&mut records, gain);

    let analytic = analytic_tripartite_covariance(cfg)?;
    let se = standard_errors(&analytic, n);
    let diff = tripartite.to_matrix() - analytic.to_matrix();
    let max_z_score = diff.zip_map(&se, |d, s| d.abs() / s).max();

    let analytic_key_rate = asymptotic_key_rate(
        &covariance_from_arms(cfg.t1, cfg.t2, cfg.excess_noise, cfg.variance_a)?,
        beta,
    )?;
    let effective = match effective_two_mode_covariance(&records, cfg.variance_a) {
        Ok(e) => Some(e),
        Err(_) if insufficient => None,
        Err(e) => return Err(e),
    };
    let empirical_key_rate = match &effective {
        Some(e) => asymptotic_key_rate(&e.covariance, beta)?,
        None => f64::NAN,
    };
    let relative_error = (empirical_key_rate - analytic_key_rate).abs() / analytic_key_rate.abs();
    let report = SimulationReport {
        gain,
        gain_fallback,
        tripartite,
        analytic,
        max_z_score,
        effective,
        empirical_key_rate,
        analytic_key_rate,
        relative_error,
        insufficient_statistics: insufficient,
    };
    Ok((records, report))
}
