//! Gaussian-state information measures for the two-mode `(a, b, c)` family.
//!
//! A [`TwoModeCovariance`] stands for the 4×4 matrix
//!
//! ```text
//! [ a·I    c·Z ]
//! [ c·Z    b·I ]      I = diag(1, 1), Z = diag(1, -1)
//! ```
//!
//! in quadrature order `(x_A, p_A, x_B, p_B)` and shot-noise units.

use nalgebra::Matrix4;

use crate::{Error, Result};

/// Slack allowed on every `λ ≥ 1` physicality check.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Negative radicands down to this value are treated as rounding noise.
const RADICAND_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TwoModeCovariance {
    /// Checks the diagonal entries against the shot-noise floor. Full
    /// physicality is established by [`symplectic_eigenvalues`].
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::Unphysical(format!("non-finite entry ({a}, {b}, {c})")));
        }
        if a < 1.0 - PHYSICALITY_TOL || b < 1.0 - PHYSICALITY_TOL {
            return Err(Error::Unphysical(format!(
                "variance below shot noise (a = {a}, b = {b})"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Dense matrix in `(x_A, p_A, x_B, p_B)` order.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let Self { a, b, c } = *self;
        Matrix4::new(
            a, 0.0, c, 0.0, //
            0.0, a, 0.0, -c, //
            c, 0.0, b, 0.0, //
            0.0, -c, 0.0, b,
        )
    }

    /// `ab - c²`, the square root of the determinant.
    pub fn det_root(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    /// `a² + b² - 2c²`.
    pub fn seralian(&self) -> f64 {
        self.a * self.a + self.b * self.b - 2.0 * self.c * self.c
    }

    /// Returns an error unless both symplectic eigenvalues are at least one.
    pub fn check_physical(&self) -> Result<()> {
        symplectic_eigenvalues(self).map(|_| ())
    }
}

/// Symplectic eigenvalues, `lambda1 >= lambda2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

/// `G(x) = (x+1) log2(x+1) - x log2 x`, with `G(0) = 0`.
pub fn von_neumann_g(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain { what: "von_neumann_g", value: x });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((x + 1.0) * (x + 1.0).log2() - x * x.log2())
}

/// Entropy contribution `G((λ - 1)/2)` of one symplectic eigenvalue.
fn mode_entropy(lambda: f64) -> Result<f64> {
    von_neumann_g(((lambda - 1.0) / 2.0).max(0.0))
}

pub fn symplectic_eigenvalues(cov: &TwoModeCovariance) -> Result<SymplecticPair> {
    let TwoModeCovariance { a, b, c } = *cov;
    let delta = cov.seralian();
    let d = cov.det_root();
    // Δ² - 4D² factors as (a - b)²((a + b)² - 4c²), which avoids cancellation.
    let mut radicand = (a - b).powi(2) * ((a + b).powi(2) - 4.0 * c * c);
    if radicand < 0.0 {
        if radicand >= -RADICAND_CLAMP {
            radicand = 0.0;
        } else {
            return Err(Error::Unphysical(format!(
                "negative discriminant {radicand} for (a, b, c) = ({a}, {b}, {c})"
            )));
        }
    }
    let lambda1 = ((delta + radicand.sqrt()) / 2.0).sqrt();
    if d <= 0.0 || !lambda1.is_finite() || lambda1 <= 0.0 {
        return Err(Error::Unphysical(format!(
            "ab - c² = {d} for (a, b, c) = ({a}, {b}, {c})"
        )));
    }
    // λ1·λ2 = D; dividing keeps λ2 accurate when Δ ≈ √(Δ² - 4D²).
    let lambda2 = d / lambda1;
    if lambda2 < 1.0 - PHYSICALITY_TOL {
        return Err(Error::Unphysical(format!(
            "symplectic eigenvalue {lambda2} < 1 for (a, b, c) = ({a}, {b}, {c})"
        )));
    }
    Ok(SymplecticPair { lambda1, lambda2 })
}

/// Symplectic eigenvalue of B conditioned on a heterodyne measurement of A,
/// `λ3 = b - c²/(a + 1)`.
pub fn conditional_eigenvalue_heterodyne(cov: &TwoModeCovariance) -> f64 {
    cov.b - cov.c * cov.c / (cov.a + 1.0)
}

/// Shannon information between heterodyne outcomes on A and B.
pub fn mutual_information(cov: &TwoModeCovariance) -> Result<f64> {
    let denom = cov.b + 1.0 - cov.c * cov.c / (cov.a + 1.0);
    if denom <= 0.0 {
        return Err(Error::Unphysical(format!(
            "mutual information denominator {denom} <= 0"
        )));
    }
    Ok(((cov.b + 1.0) / denom).log2())
}

/// Holevo bound on Eve's information for direct reconciliation:
/// `S(AB) - S(B|A)` with Eve purifying the state.
pub fn holevo_bound(cov: &TwoModeCovariance) -> Result<f64> {
    let SymplecticPair { lambda1, lambda2 } = symplectic_eigenvalues(cov)?;
    let lambda3 = conditional_eigenvalue_heterodyne(cov);
    if lambda3 < 1.0 - PHYSICALITY_TOL {
        return Err(Error::Unphysical(format!(
            "conditional symplectic eigenvalue {lambda3} < 1"
        )));
    }
    Ok(mode_entropy(lambda1)? + mode_entropy(lambda2)? - mode_entropy(lambda3)?)
}

/// `β I(A:B) - χ_E` in bits per pulse. Non-positive means no key.
pub fn asymptotic_key_rate(cov: &TwoModeCovariance, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta * mutual_information(cov)? - holevo_bound(cov)?)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { what: "reconciliation efficiency", value: beta })
    }
}

/// The symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]` for two modes.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// Brute-force symplectic spectrum: moduli of the eigenvalues of `iΩΓ`,
/// returned as `[λ_max, λ_min]`.
///
/// Independent of the closed form in [`symplectic_eigenvalues`]; meant for
/// verification only.
pub fn symplectic_spectrum_oracle(gamma: &Matrix4<f64>) -> Result<[f64; 2]> {
    let scale = gamma.amax().max(1.0);
    if (gamma - gamma.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Precondition("covariance matrix is not symmetric".into()));
    }
    // iΩΓ has eigenvalues ±λ_k; ΩΓ has ±iλ_k, so the moduli coincide.
    let eig = (symplectic_form() * gamma).complex_eigenvalues();
    let mut moduli: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|x, y| y.total_cmp(x));
    Ok([
        0.5 * (moduli[0] + moduli[1]),
        0.5 * (moduli[2] + moduli[3]),
    ])
}
