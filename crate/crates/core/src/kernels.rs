//! Renormalized coincidence-limit Wick squares W(M²) = ⟨χ²⟩_ren for the
//! supported backgrounds. These are the source of the LPA flow,
//! ∂_t U = k² W(M²), with M² = k² + m² + λρ at the truncation level.
//!
//! Conventions: the kernels return the full ⟨χ²⟩ (twice ω[χ²/2]); the
//! local ambiguity constants are set to zero, so the only residual scheme
//! freedom is the mass parameter μ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{self, digamma, tetragamma, trigamma};

/// How the renormalization mass μ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MuMode {
    /// μ² held at a fixed value.
    Fixed { mu2: f64 },
    /// μ = k.
    TiedToK,
    /// μ² = 12H² (de Sitter only).
    TiedToH,
}

impl MuMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MuMode::Fixed { mu2 } if !(mu2 > 0.0 && mu2.is_finite()) => {
                Err(Error::domain("mu mode", format!("fixed mu2 must be positive, got {mu2}")))
            }
            _ => Ok(()),
        }
    }

    /// μ² at scale `k`. `h2` is the Hubble rate squared when the background has one.
    pub fn mu2(&self, k: f64, h2: Option<f64>) -> Result<f64> {
        match *self {
            MuMode::Fixed { mu2 } => Ok(mu2),
            MuMode::TiedToK => {
                if k > 0.0 {
                    Ok(k * k)
                } else {
                    Err(Error::domain("mu mode", format!("mu = k requires k > 0, got {k}")))
                }
            }
            MuMode::TiedToH => h2
                .map(|h2| 12.0 * h2)
                .ok_or_else(|| Error::domain("mu mode", "mu^2 = 12 H^2 needs a de Sitter background")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiVacuum {
    /// Even spacetime dimension.
    pub d: u32,
    pub mu: MuMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thermal {
    /// Inverse temperature; `f64::INFINITY` is the vacuum.
    pub beta: f64,
    /// μ-prescription for the vacuum part.
    pub mu: MuMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeSitter {
    /// Hubble rate squared.
    pub h2: f64,
    /// Curvature coupling ξ.
    pub xi: f64,
    pub mu: MuMode,
}

/// The physical setting of the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Background {
    MinkowskiVacuum(MinkowskiVacuum),
    Thermal(Thermal),
    DeSitter(DeSitter),
}

impl MinkowskiVacuum {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.d % 2 != 0 {
            return Err(Error::domain(
                "minkowski vacuum",
                format!("dimension must be even and >= 2, got {}", self.d),
            ));
        }
        if self.mu == MuMode::TiedToH {
            return Err(Error::domain("minkowski vacuum", "mu tied to H has no meaning here"));
        }
        self.mu.validate()
    }
}

impl Thermal {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::domain("thermal", format!("beta must be positive, got {}", self.beta)));
        }
        if self.mu == MuMode::TiedToH {
            return Err(Error::domain("thermal", "mu tied to H has no meaning here"));
        }
        self.mu.validate()
    }
}

impl DeSitter {
    pub fn validate(&self) -> Result<()> {
        if !(self.h2 > 0.0 && self.h2.is_finite()) {
            return Err(Error::domain("de sitter", format!("H^2 must be positive, got {}", self.h2)));
        }
        if !self.xi.is_finite() {
            return Err(Error::domain("de sitter", "xi must be finite"));
        }
        self.mu.validate()
    }

    /// ν² = 9/4 − 12ξ + M²/H².
    pub fn nu_squared(&self, m2: f64) -> f64 {
        2.25 - 12.0 * self.xi + m2 / self.h2
    }

    /// log(12H²/μ²) at scale `k`.
    fn log_term(&self, k: f64) -> Result<f64> {
        if self.mu == MuMode::TiedToH {
            return Ok(0.0);
        }
        let mu2 = self.mu.mu2(k, Some(self.h2))?;
        Ok((12.0 * self.h2 / mu2).ln())
    }
}

impl Background {
    pub fn validate(&self) -> Result<()> {
        match self {
            Background::MinkowskiVacuum(b) => b.validate(),
            Background::Thermal(b) => b.validate(),
            Background::DeSitter(b) => b.validate(),
        }
    }

    pub fn mu(&self) -> MuMode {
        match self {
            Background::MinkowskiVacuum(b) => b.mu,
            Background::Thermal(b) => b.mu,
            Background::DeSitter(b) => b.mu,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Background::MinkowskiVacuum(_) => "minkowski-vacuum",
            Background::Thermal(_) => "thermal",
            Background::DeSitter(_) => "de-sitter",
        }
    }
}

/// A renormalized Wick square and the mass-squared it was evaluated at.
/// Units are [mass]^(d−2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TadpoleValue {
    pub value: f64,
    pub mass_squared: f64,
}

fn finite(what: &'static str, v: f64, m2: f64) -> Result<TadpoleValue> {
    if v.is_finite() {
        Ok(TadpoleValue {
            value: v,
            mass_squared: m2,
        })
    } else {
        Err(Error::domain(what, format!("non-finite value at M^2 = {m2}")))
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, j| acc * j as f64)
}

/// Minkowski-vacuum Wick square in even dimension `d`:
/// (−1)^{d/2} · 2/(Γ(d/2)(4π)^{d/2}) · M^{d−2} · log(M²/μ²).
///
/// For d = 4 this is (M²/8π²) log(M²/μ²).
pub fn minkowski_vacuum_wick_square(m2: f64, mu2: f64, d: u32) -> Result<TadpoleValue> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::domain("minkowski wick square", format!("odd or too small dimension {d}")));
    }
    if !(m2 > 0.0) {
        return Err(Error::domain(
            "minkowski wick square",
            format!("M^2 = {m2} is not positive"),
        ));
    }
    if !(mu2 > 0.0) {
        return Err(Error::domain("minkowski wick square", format!("mu^2 = {mu2} is not positive")));
    }
    let half = d / 2;
    let sign = if half % 2 == 0 { 1.0 } else { -1.0 };
    let norm = 2.0 / (factorial(half - 1) * (4.0 * PI).powi(half as i32));
    let v = sign * norm * m2.powi(half as i32 - 1) * (m2 / mu2).ln();
    finite("minkowski wick square", v, m2)
}

/// Vacuum and Bose parts of the thermal Wick square, separately.
pub fn thermal_wick_square_parts(m2: f64, bg: &Thermal, k: f64) -> Result<(f64, f64)> {
    let mu2 = bg.mu.mu2(k, None)?;
    let vacuum = minkowski_vacuum_wick_square(m2, mu2, 4)?.value;
    let bose = if bg.beta.is_infinite() {
        0.0
    } else {
        specfun::bose_tadpole(m2, bg.beta)?
    };
    Ok((vacuum, bose))
}

/// Thermal Wick square: d = 4 vacuum part plus the Bose-Einstein part.
pub fn thermal_wick_square(m2: f64, bg: &Thermal, k: f64) -> Result<TadpoleValue> {
    let (vacuum, bose) = thermal_wick_square_parts(m2, bg, k)?;
    finite("thermal wick square", vacuum + bose, m2)
}

/// ν = √(9/4 − 12ξ + M²/H²), rejecting the imaginary branch.
pub fn desitter_nu(m2: f64, bg: &DeSitter) -> Result<f64> {
    let nu2 = bg.nu_squared(m2);
    if !(nu2 >= 0.0) {
        return Err(Error::domain(
            "de sitter wick square",
            format!("imaginary nu: nu^2 = {nu2} at M^2 = {m2}"),
        ));
    }
    Ok(nu2.sqrt())
}

/// Bunch–Davies Wick square in de Sitter:
///
/// −(1/16π²){ −2H²/3 + [M² + 12(ξ − 1/6)H²]·[ψ(3/2+ν) + ψ(3/2−ν) + log(12H²/μ²)] }.
pub fn desitter_wick_square(m2: f64, bg: &DeSitter, k: f64) -> Result<TadpoleValue> {
    let nu = desitter_nu(m2, bg)?;
    let log_term = bg.log_term(k)?;
    let psi_sum = digamma(1.5 + nu)? + digamma(1.5 - nu)?;
    let bracket = m2 + 12.0 * (bg.xi - 1.0 / 6.0) * bg.h2;
    let v = -(-2.0 * bg.h2 / 3.0 + bracket * (psi_sum + log_term)) / (16.0 * PI * PI);
    finite("de sitter wick square", v, m2)
}

/// W, dW/dM² and d²W/dM⁴ of the de Sitter kernel, obtained by
/// differentiating the closed form (dν/dM² = 1/(2νH²)).
pub fn desitter_wick_square_derivatives(m2: f64, bg: &DeSitter, k: f64) -> Result<[f64; 3]> {
    let w = desitter_wick_square(m2, bg, k)?.value;
    let nu = desitter_nu(m2, bg)?;
    if nu == 0.0 {
        return Err(Error::domain("de sitter wick square", "derivatives singular at nu = 0"));
    }
    let h2 = bg.h2;
    let log_term = bg.log_term(k)?;
    let (plus, minus) = (1.5 + nu, 1.5 - nu);
    let psi_sum = digamma(plus)? + digamma(minus)?;
    // D = ψ'(3/2+ν) − ψ'(3/2−ν), S2 = ψ''(3/2+ν) + ψ''(3/2−ν)
    let d = trigamma(plus)? - trigamma(minus)?;
    let s2 = tetragamma(plus)? + tetragamma(minus)?;
    let p = m2 + 12.0 * (bg.xi - 1.0 / 6.0) * h2;
    let norm = -1.0 / (16.0 * PI * PI);
    let w1 = norm * (psi_sum + log_term + p * d / (2.0 * nu * h2));
    let w2 = norm / (nu * h2) * (d + p / (4.0 * nu * nu * h2) * (-d + nu * s2));
    Ok([w, w1, w2])
}

/// Dispatch on the background.
pub fn wick_square(m2: f64, bg: &Background, k: f64) -> Result<TadpoleValue> {
    match bg {
        Background::MinkowskiVacuum(b) => {
            b.validate()?;
            let mu2 = b.mu.mu2(k, None)?;
            minkowski_vacuum_wick_square(m2, mu2, b.d)
        }
        Background::Thermal(b) => thermal_wick_square(m2, b, k),
        Background::DeSitter(b) => desitter_wick_square(m2, b, k),
    }
}
