//! Pulse-level Monte-Carlo simulation of the prepare-and-measure protocol.
//!
//! Each round:
//!
//! 1. Alice and Bob draw `(x', p')` from `N(0, V - 1)` and emit coherent
//!    states centred there (unit vacuum noise on top).
//! 2. Each arm applies `q -> √T q + √(1 - T) e` with Eve's ancilla
//!    `e ~ N(0, W)`.
//! 3. Charlie interferes the pulses on a balanced splitter and announces
//!    `x_Z = (x_A - x_B)/√2` and `p_Z = (p_A + p_B)/√2`.
//! 4. Both sides displace their prepared data by `k γ` (see
//!    [`displace_keys`]).
//!
//! Rounds are generated in fixed chunks on independent random streams, so
//! the record stream depends only on the seed.

mod estimate;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::cloner_contribution;
use crate::numeric::format_float;
use crate::rng::{chunk_rng, chunks};
use crate::{Error, Result};

pub use estimate::{
    analytic_tripartite_covariance, displaced_moments, effective_two_mode_covariance,
    estimate_channel, estimate_tripartite_covariance, mutual_information_at_gain, optimize_gain,
    optimize_gain_from_moments, run_simulation, standard_errors, ChannelEstimate, DisplacedMoments,
    EffectiveCovariance, SimulationReport, TripartiteCovariance, GAIN_SEARCH_MAX,
    MIN_RECORDS_FOR_GAIN,
};

/// Displacement gain: optimised from the data or fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gain {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Total variance `V_A` of Alice's states (prepared variance `V_A - 1`).
    pub variance_a: f64,
    pub variance_b: f64,
    pub t1: f64,
    pub t2: f64,
    pub excess_noise: f64,
    pub gain: Gain,
    pub num_pulses: usize,
    pub seed: u64,
}

impl SimConfig {
    /// Symmetric run: both senders use variance `v`, both arms `t`.
    pub fn symmetric(v: f64, t: f64, excess_noise: f64, num_pulses: usize, seed: u64) -> Self {
        Self {
            variance_a: v,
            variance_b: v,
            t1: t,
            t2: t,
            excess_noise,
            gain: Gain::Auto,
            num_pulses,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, value, ok) in [
            ("variance of A", self.variance_a, self.variance_a >= 1.0),
            ("variance of B", self.variance_b, self.variance_b >= 1.0),
            ("transmittance T1", self.t1, self.t1 > 0.0 && self.t1 <= 1.0),
            ("transmittance T2", self.t2, self.t2 > 0.0 && self.t2 <= 1.0),
            ("excess noise", self.excess_noise, self.excess_noise >= 0.0),
        ] {
            if !ok || !value.is_finite() {
                return Err(Error::Domain { what, value });
            }
        }
        if let Gain::Fixed(k) = self.gain {
            if !k.is_finite() {
                return Err(Error::Domain { what: "gain", value: k });
            }
        }
        if self.num_pulses == 0 {
            return Err(Error::Precondition("at least one pulse is required".into()));
        }
        Ok(())
    }

    pub fn modulation_a(&self) -> f64 {
        self.variance_a - 1.0
    }

    pub fn modulation_b(&self) -> f64 {
        self.variance_b - 1.0
    }
}

/// One protocol round. The displaced keys are `NaN` until
/// [`displace_keys`] runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub xa_p: f64,
    pub pa_p: f64,
    pub xb_p: f64,
    pub pb_p: f64,
    pub xz: f64,
    pub pz: f64,
    pub xa: f64,
    pub pa: f64,
    pub xb: f64,
    pub pb: f64,
}

impl RoundRecord {
    pub fn is_displaced(&self) -> bool {
        !(self.xa.is_nan() || self.pa.is_nan() || self.xb.is_nan() || self.pb.is_nan())
    }

    /// `(x_A', p_A', x_B', p_B', x_Z, p_Z)`.
    pub fn tripartite(&self) -> [f64; 6] {
        [self.xa_p, self.pa_p, self.xb_p, self.pb_p, self.xz, self.pz]
    }
}

/// One lossy, noisy arm: `√T (q + vacuum) + √((1-T) W) n`.
struct Arm {
    sqrt_t: f64,
    noise_std: f64,
}

impl Arm {
    fn new(t: f64, eps: f64) -> Result<Self> {
        Ok(Self { sqrt_t: t.sqrt(), noise_std: cloner_contribution(t, eps)?.sqrt() })
    }

    fn transmit<R: Rng>(&self, q: f64, rng: &mut R) -> f64 {
        let vacuum: f64 = rng.sample(StandardNormal);
        let noise: f64 = rng.sample(StandardNormal);
        self.sqrt_t * (q + vacuum) + self.noise_std * noise
    }
}

fn simulate_chunk(cfg: &SimConfig, chunk: u64, len: usize) -> Result<Vec<RoundRecord>> {
    let mut rng = chunk_rng(cfg.seed, chunk);
    let sa = cfg.modulation_a().sqrt();
    let sb = cfg.modulation_b().sqrt();
    let arm_a = Arm::new(cfg.t1, cfg.excess_noise)?;
    let arm_b = Arm::new(cfg.t2, cfg.excess_noise)?;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let xa_p = sa * rng.sample::<f64, _>(StandardNormal);
        let pa_p = sa * rng.sample::<f64, _>(StandardNormal);
        let xb_p = sb * rng.sample::<f64, _>(StandardNormal);
        let pb_p = sb * rng.sample::<f64, _>(StandardNormal);
        let xa3 = arm_a.transmit(xa_p, &mut rng);
        let pa3 = arm_a.transmit(pa_p, &mut rng);
        let xb3 = arm_b.transmit(xb_p, &mut rng);
        let pb3 = arm_b.transmit(pb_p, &mut rng);
        out.push(RoundRecord {
            xa_p,
            pa_p,
            xb_p,
            pb_p,
            xz: (xa3 - xb3) / std::f64::consts::SQRT_2,
            pz: (pa3 + pb3) / std::f64::consts::SQRT_2,
            xa: f64::NAN,
            pa: f64::NAN,
            xb: f64::NAN,
            pb: f64::NAN,
        });
    }
    Ok(out)
}

/// Runs `cfg.num_pulses` rounds (steps 1 and 2).
pub fn simulate_batch(cfg: &SimConfig) -> Result<Vec<RoundRecord>> {
    cfg.validate()?;
    let parts: Vec<Result<Vec<RoundRecord>>> = chunks(cfg.num_pulses)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(chunk, _, len)| simulate_chunk(cfg, chunk, len))
        .collect();
    let mut records = Vec::with_capacity(cfg.num_pulses);
    for part in parts {
        records.extend(part?);
    }
    Ok(records)
}

/// Sign of `k γ` subtracted from each prepared quadrature. With the Bell
/// measurement above, `x_B'` anti-correlates with `x_Z`, so Bob's x-shift
/// flips sign; the remaining three quadratures correlate positively.
pub const DISPLACEMENT_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, 1.0];

/// Step 4:
///
/// ```text
/// x_A = x_A' - k x_Z    p_A = p_A' - k p_Z
/// x_B = x_B' + k x_Z    p_B = p_B' - k p_Z
/// ```
pub fn displace_keys(records: &mut [RoundRecord], k: f64) {
    let [sxa, spa, sxb, spb] = DISPLACEMENT_SIGNS;
    records.par_iter_mut().for_each(|r| {
        r.xa = r.xa_p - sxa * k * r.xz;
        r.pa = r.pa_p - spa * k * r.pz;
        r.xb = r.xb_p - sxb * k * r.xz;
        r.pb = r.pb_p - spb * k * r.pz;
    });
}

pub const RECORD_COLUMNS: [&str; 10] =
    ["xa_p", "pa_p", "xb_p", "pb_p", "xz", "pz", "xa", "pa", "xb", "pb"];

/// Header row plus one row per round, 17 significant digits.
pub fn write_records_csv<W: Write>(records: &[RoundRecord], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Numeric(format!("writing records: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS).map_err(io)?;
    for r in records {
        let row = [r.xa_p, r.pa_p, r.xb_p, r.pb_p, r.xz, r.pz, r.xa, r.pa, r.xb, r.pb];
        w.write_record(row.iter().map(|&x| format_float(x))).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("writing records: {e}")))?;
    Ok(())
}
