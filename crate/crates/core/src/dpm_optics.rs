//! Jones calculus for the plug-and-play dual-phase-modulation transmitter.
//!
//! Light from Charlie enters the sender's station, is split between two
//! arms, each holding a phase modulator and a Faraday mirror, and the
//! reflected halves recombine on the way back. With equal insertion loss the
//! pair of phases `(φ1, φ2)` sets both the amplitude `cos((φ1 - φ2)/2)` and
//! the phase `(φ1 + φ2)/2` of the returned pulse, so a Gaussian modulation is
//! reachable with phase modulators only.

use std::f64::consts::{FRAC_PI_4, PI};
use std::ops::{Add, Mul};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::{chunk_rng, chunks};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ideal Faraday rotator angle: 45° per pass.
pub const FARADAY_ANGLE: f64 = FRAC_PI_4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub ex: Complex64,
    pub ey: Complex64,
}

impl JonesVector {
    pub fn new(ex: Complex64, ey: Complex64) -> Self {
        Self { ex, ey }
    }

    pub fn horizontal(amplitude: f64) -> Self {
        Self::new(Complex64::new(amplitude, 0.0), ZERO)
    }

    pub fn norm(&self) -> f64 {
        (self.ex.norm_sqr() + self.ey.norm_sqr()).sqrt()
    }

    /// Hermitian inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.ex.conj() * other.ex + self.ey.conj() * other.ey
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.ex * s, self.ey * s)
    }

    pub fn max_abs_diff(&self, other: &JonesVector) -> f64 {
        (self.ex - other.ex).norm().max((self.ey - other.ey).norm())
    }
}

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix(pub [[Complex64; 2]; 2]);

impl JonesMatrix {
    pub const IDENTITY: JonesMatrix = JonesMatrix([[ONE, ZERO], [ZERO, ONE]]);

    pub fn real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        JonesMatrix([
            [Complex64::new(m00, 0.0), Complex64::new(m01, 0.0)],
            [Complex64::new(m10, 0.0), Complex64::new(m11, 0.0)],
        ])
    }

    pub fn diag(d0: Complex64, d1: Complex64) -> Self {
        JonesMatrix([[d0, ZERO], [ZERO, d1]])
    }

    /// Coordinate rotation `[[cos, -sin], [sin, cos]]`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::real(c, -s, s, c)
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        JonesMatrix([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        JonesMatrix([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        JonesMatrix(self.0.map(|row| row.map(|x| x * s)))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &JonesMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }
}

impl Mul for JonesMatrix {
    type Output = JonesMatrix;

    fn mul(self, rhs: JonesMatrix) -> JonesMatrix {
        let (a, b) = (&self.0, &rhs.0);
        JonesMatrix([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Mul<JonesVector> for JonesMatrix {
    type Output = JonesVector;

    fn mul(self, v: JonesVector) -> JonesVector {
        let m = &self.0;
        JonesVector::new(m[0][0] * v.ex + m[0][1] * v.ey, m[1][0] * v.ex + m[1][1] * v.ey)
    }
}

impl Add for JonesMatrix {
    type Output = JonesMatrix;

    fn add(self, rhs: JonesMatrix) -> JonesMatrix {
        let (a, b) = (&self.0, &rhs.0);
        JonesMatrix([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

/// Faraday mirror `[[cos 2θ, -sin 2θ], [-sin 2θ, -cos 2θ]]`.
pub fn faraday_mirror(theta: f64) -> JonesMatrix {
    let (s, c) = (2.0 * theta).sin_cos();
    JonesMatrix::real(c, -s, -s, -c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Birefringent fiber section with eigen-axes at angle `delta`.
///
/// Forward is `T(+δ)`, backward `T(-δ)`, where
/// `T(±δ) = Rot(±δ) · diag(e^{iφo}, e^{iφe}) · Rot(±δ)ᵀ`.
pub fn birefringent_line(delta: f64, phi_o: f64, phi_e: f64, direction: Direction) -> JonesMatrix {
    let angle = match direction {
        Direction::Forward => delta,
        Direction::Backward => -delta,
    };
    let rot = JonesMatrix::rotation(angle);
    let phases = JonesMatrix::diag(Complex64::cis(phi_o), Complex64::cis(phi_e));
    rot * phases * rot.transpose()
}

/// Forward pass, mirror, backward pass: `T(-δ) J_FM T(δ)`.
///
/// For the ideal 45° mirror this collapses to `e^{i(φo+φe)} J_FM`, whatever
/// the fiber birefringence.
pub fn roundtrip_rotated_element(delta: f64, phi_o: f64, phi_e: f64, theta: f64) -> JonesMatrix {
    birefringent_line(delta, phi_o, phi_e, Direction::Backward)
        * faraday_mirror(theta)
        * birefringent_line(delta, phi_o, phi_e, Direction::Forward)
}

/// One arm: `ς e^{iφ} R` with insertion loss `ς`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub varsigma: f64,
    pub phi: f64,
}

fn check_varsigma(varsigma: f64) -> Result<()> {
    if varsigma > 0.0 && varsigma <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { what: "insertion-loss coefficient", value: varsigma })
    }
}

pub fn dpm_arm(varsigma: f64, phi: f64, r: &JonesMatrix) -> Result<JonesMatrix> {
    check_varsigma(varsigma)?;
    Ok(r.scale(Complex64::cis(phi) * varsigma))
}

/// Interferometer output `½ (J_arm1 + J_arm2) · input`.
pub fn dpm_output(input: &JonesVector, arm1: Arm, arm2: Arm, r: &JonesMatrix) -> Result<JonesVector> {
    let sum = dpm_arm(arm1.varsigma, arm1.phi, r)? + dpm_arm(arm2.varsigma, arm2.phi, r)?;
    Ok(sum.scale(Complex64::new(0.5, 0.0)) * *input)
}

/// Equal-loss closed form `ς e^{i(φ1+φ2)/2} cos((φ1-φ2)/2) R · input`.
pub fn dpm_simplified_output(
    input: &JonesVector,
    varsigma: f64,
    phi1: f64,
    phi2: f64,
    r: &JonesMatrix,
) -> Result<JonesVector> {
    check_varsigma(varsigma)?;
    let factor = Complex64::cis(0.5 * (phi1 + phi2)) * (varsigma * (0.5 * (phi1 - phi2)).cos());
    Ok((*r * *input).scale(factor))
}

/// Amplitude and phase imprinted by the phase pair, amplitude kept
/// non-negative (a negative cosine becomes a π phase shift). The phase is
/// reduced to `(-π, π]`.
pub fn imprinted_amplitude_phase(varsigma: f64, phi1: f64, phi2: f64, input_amplitude: f64) -> (f64, f64) {
    let cos = (0.5 * (phi1 - phi2)).cos();
    let mut phase = 0.5 * (phi1 + phi2);
    if cos < 0.0 {
        phase += PI;
    }
    (varsigma * input_amplitude * cos.abs(), wrap_phase(phase))
}

pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Phase pair producing the requested amplitude and phase:
/// `φ1,2 = ϑ ± arccos(A / (ς A_in))`.
pub fn synthesize_phases(
    target_amplitude: f64,
    target_phase: f64,
    varsigma: f64,
    input_amplitude: f64,
) -> Result<(f64, f64)> {
    check_varsigma(varsigma)?;
    if !(target_amplitude >= 0.0) {
        return Err(Error::Domain { what: "target amplitude", value: target_amplitude });
    }
    let reachable = varsigma * input_amplitude;
    let ratio = target_amplitude / reachable;
    if !(ratio <= 1.0) {
        return Err(Error::Unreachable { target: target_amplitude, reachable });
    }
    let spread = ratio.acos();
    Ok((target_phase + spread, target_phase - spread))
}

/// Transmitter configuration for Gaussian modulation by phase pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpmTransmitter {
    pub varsigma: f64,
    /// Linearly polarised pulse entering the station.
    pub input: JonesVector,
    /// Round-trip element of the arms.
    pub round_trip: JonesMatrix,
}

impl DpmTransmitter {
    /// Input sized so that `ς |input|` covers `radius`, behind a Faraday
    /// mirror seen through an arbitrary but fixed birefringent fiber.
    pub fn covering(radius: f64, varsigma: f64) -> Self {
        Self {
            varsigma,
            input: JonesVector::horizontal(radius / varsigma),
            round_trip: roundtrip_rotated_element(0.37, 1.1, -0.4, FARADAY_ANGLE),
        }
    }

    /// Complex amplitude of the emitted pulse relative to the unmodulated
    /// reference `R · input`, scaled to input units.
    pub fn emitted_amplitude(&self, phi1: f64, phi2: f64) -> Result<Complex64> {
        let out = dpm_simplified_output(&self.input, self.varsigma, phi1, phi2, &self.round_trip)?;
        let reference = self.round_trip * self.input;
        Ok(reference.inner(&out) / reference.inner(&reference) * self.input.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpmSample {
    pub phi1: f64,
    pub phi2: f64,
    /// `x + i p` of the emitted coherent-state displacement.
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpmModulation {
    pub samples: Vec<DpmSample>,
    /// Gaussian draws outside the reachable disc that were drawn again.
    pub redrawn: usize,
    pub transmitter: DpmTransmitter,
}

/// Reachable radius in units of the per-quadrature standard deviation.
pub const COVERAGE_SIGMAS: f64 = 6.0;

/// Draws `count` Gaussian targets with per-quadrature variance `v_mod`,
/// synthesises their phase pairs and records what the interferometer emits.
///
/// Bit-identical for a given seed regardless of the rayon pool size.
pub fn gaussian_modulation_via_dpm(v_mod: f64, count: usize, seed: u64) -> Result<DpmModulation> {
    if !(v_mod > 0.0) {
        return Err(Error::Domain { what: "modulation variance", value: v_mod });
    }
    if count == 0 {
        return Err(Error::Precondition("sample count must be positive".into()));
    }
    let sigma = v_mod.sqrt();
    let transmitter = DpmTransmitter::covering(COVERAGE_SIGMAS * sigma, 1.0);
    let reach = transmitter.varsigma * transmitter.input.norm();
    let parts: Vec<Result<(Vec<DpmSample>, usize)>> = chunks(count)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(chunk, _, len)| {
            let mut rng = chunk_rng(seed, chunk);
            let mut out = Vec::with_capacity(len);
            let mut redrawn = 0;
            while out.len() < len {
                let x: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                let p: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
                let target = Complex64::new(x, p);
                if target.norm() > reach {
                    redrawn += 1;
                    continue;
                }
                let (phi1, phi2) =
                    synthesize_phases(target.norm(), target.arg(), transmitter.varsigma, transmitter.input.norm())?;
                let amplitude = transmitter.emitted_amplitude(phi1, phi2)?;
                out.push(DpmSample { phi1, phi2, amplitude });
            }
            Ok((out, redrawn))
        })
        .collect();
    let mut samples = Vec::with_capacity(count);
    let mut redrawn = 0;
    for part in parts {
        let (s, r) = part?;
        samples.extend(s);
        redrawn += r;
    }
    Ok(DpmModulation { samples, redrawn, transmitter })
}

/// Empirical moments of emitted amplitudes (`x = Re`, `p = Im`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationStats {
    pub count: usize,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl ModulationStats {
    pub fn from_samples(samples: &[DpmSample]) -> Self {
        let n = samples.len() as f64;
        let (sx, sp) = samples
            .iter()
            .fold((0.0, 0.0), |(x, p), s| (x + s.amplitude.re, p + s.amplitude.im));
        let (mean_x, mean_p) = (sx / n, sp / n);
        let (mut vx, mut vp, mut cxp) = (0.0, 0.0, 0.0);
        for s in samples {
            let dx = s.amplitude.re - mean_x;
            let dp = s.amplitude.im - mean_p;
            vx += dx * dx;
            vp += dp * dp;
            cxp += dx * dp;
        }
        Self {
            count: samples.len(),
            mean_x,
            mean_p,
            var_x: vx / n,
            var_p: vp / n,
            cov_xp: cxp / n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mirror_examples() {
        assert!(faraday_mirror(0.0).max_abs_diff(&JonesMatrix::real(1.0, 0.0, 0.0, -1.0)) < 1e-15);
        assert!(faraday_mirror(FRAC_PI_4).max_abs_diff(&JonesMatrix::real(0.0, -1.0, -1.0, 0.0)) < 1e-15);
        for theta in [0.1, 0.9, 2.3] {
            let j = faraday_mirror(theta);
            assert!((j * j).max_abs_diff(&JonesMatrix::IDENTITY) < 1e-14);
            assert!((j.det() - c(-1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn mirror_matches_rotated_reflection() {
        // Rot(θ)ᵀ · diag(1, -1) · Rot(θ)
        let theta = 0.3;
        let r = JonesMatrix::rotation(theta);
        let built = r.transpose() * JonesMatrix::real(1.0, 0.0, 0.0, -1.0) * r;
        assert!(built.max_abs_diff(&faraday_mirror(theta)) < 1e-15);
    }

    #[test]
    fn birefringent_examples() {
        let t = birefringent_line(0.0, 0.0, 0.0, Direction::Forward);
        assert!(t.max_abs_diff(&JonesMatrix::IDENTITY) < 1e-15);
        let t = birefringent_line(0.0, 0.4, 1.3, Direction::Backward);
        assert!(t.max_abs_diff(&JonesMatrix::diag(Complex64::cis(0.4), Complex64::cis(1.3))) < 1e-15);
        let t = birefringent_line(0.7, 0.4, 1.3, Direction::Forward);
        assert!((t * t.adjoint()).max_abs_diff(&JonesMatrix::IDENTITY) < 1e-14);
    }

    #[test]
    fn birefringent_sign_pattern() {
        // T(+δ) = [[c, -s], [s, c]] D [[c, s], [-s, c]]
        let (d, po, pe) = (0.3f64, 0.2, 1.0);
        let (s, cth) = d.sin_cos();
        let left = JonesMatrix::real(cth, -s, s, cth);
        let right = JonesMatrix::real(cth, s, -s, cth);
        let mid = JonesMatrix::diag(Complex64::cis(po), Complex64::cis(pe));
        let fwd = birefringent_line(d, po, pe, Direction::Forward);
        assert!((left * mid * right).max_abs_diff(&fwd) < 1e-15);
        let bwd = birefringent_line(d, po, pe, Direction::Backward);
        assert!((right * mid * left).max_abs_diff(&bwd) < 1e-15);
    }

    #[test]
    fn roundtrip_examples() {
        let r = roundtrip_rotated_element(0.0, 0.0, 0.0, 0.2);
        assert!(r.max_abs_diff(&faraday_mirror(0.2)) < 1e-15);
        let r = roundtrip_rotated_element(0.8, 1.9, PI - 1.9, FRAC_PI_4);
        assert!(r.max_abs_diff(&JonesMatrix::real(0.0, 1.0, 1.0, 0.0)) < 1e-13);
    }

    #[test]
    fn compensation_needs_the_45_degree_mirror() {
        let r = roundtrip_rotated_element(0.5, 0.3, 1.7, 0.3);
        let closed = faraday_mirror(0.3).scale(Complex64::cis(0.3 + 1.7));
        assert!(r.max_abs_diff(&closed) > 1e-2);
    }

    #[test]
    fn arm_examples() {
        let r = roundtrip_rotated_element(0.2, 0.5, 0.9, FRAC_PI_4);
        assert!(dpm_arm(1.0, 0.0, &r).unwrap().max_abs_diff(&r) < 1e-15);
        let half = dpm_arm(0.5, PI, &r).unwrap();
        assert!(half.max_abs_diff(&r.scale(c(-0.5, 0.0))) < 1e-15);
        assert!((half.det().norm() - 0.25 * r.det().norm()).abs() < 1e-15);
        assert!(dpm_arm(0.0, 0.0, &r).is_err());
        assert!(dpm_arm(1.2, 0.0, &r).is_err());
    }

    #[test]
    fn interference_examples() {
        let r = roundtrip_rotated_element(0.2, 0.5, 0.9, FRAC_PI_4);
        let input = JonesVector::new(c(0.6, 0.1), c(-0.2, 0.7));
        let arm = Arm { varsigma: 0.8, phi: 1.1 };
        let out = dpm_output(&input, arm, arm, &r).unwrap();
        let single = (r * input).scale(Complex64::cis(1.1) * 0.8);
        assert!(out.max_abs_diff(&single) < 1e-15);

        let other = Arm { phi: 1.1 + PI, ..arm };
        let dark = dpm_output(&input, arm, other, &r).unwrap();
        assert!(dark.norm() < 1e-15);
    }

    #[test]
    fn simplified_examples() {
        let r = roundtrip_rotated_element(0.2, 0.5, 0.9, FRAC_PI_4);
        let input = JonesVector::new(c(0.6, 0.1), c(-0.2, 0.7));
        let out = dpm_simplified_output(&input, 0.9, 0.0, 0.0, &r).unwrap();
        assert!(out.max_abs_diff(&(r * input).scale(c(0.9, 0.0))) < 1e-15);

        let vartheta = 0.35;
        let out = dpm_simplified_output(&input, 1.0, 2.0 * vartheta, -2.0 * vartheta, &r).unwrap();
        let expected = (r * input).scale(c((2.0 * vartheta).cos(), 0.0));
        assert!(out.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn negative_cosine_becomes_pi_shift() {
        let (amp, phase) = imprinted_amplitude_phase(1.0, 3.0, -0.5, 2.0);
        assert!((amp - 2.0 * (1.75f64).cos().abs()).abs() < 1e-15);
        assert!((phase - wrap_phase(1.25 + PI)).abs() < 1e-15);
    }

    #[test]
    fn synthesis_examples() {
        let (p1, p2) = synthesize_phases(2.0, 0.0, 1.0, 2.0).unwrap();
        assert_eq!((p1, p2), (0.0, 0.0));
        let (p1, p2) = synthesize_phases(0.0, 0.7, 0.9, 2.0).unwrap();
        assert!((p1 - p2 - PI).abs() < 1e-15);
        assert!((0.5 * (p1 - p2) - FRAC_PI_2).abs() < 1e-15);
        assert!(matches!(
            synthesize_phases(2.5, 0.0, 1.0, 2.0),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn emitted_amplitude_round_trip() {
        let tx = DpmTransmitter::covering(5.0, 0.8);
        let (p1, p2) = synthesize_phases(3.0, -2.0, tx.varsigma, tx.input.norm()).unwrap();
        let z = tx.emitted_amplitude(p1, p2).unwrap();
        assert!((z - Complex64::from_polar(3.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn modulation_is_seeded() {
        let a = gaussian_modulation_via_dpm(4.0, 5000, 11).unwrap();
        let b = gaussian_modulation_via_dpm(4.0, 5000, 11).unwrap();
        assert_eq!(a, b);
        let c = gaussian_modulation_via_dpm(4.0, 5000, 12).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(gaussian_modulation_via_dpm(0.0, 10, 1).is_err());
        assert!(gaussian_modulation_via_dpm(1.0, 0, 1).is_err());
    }
}
