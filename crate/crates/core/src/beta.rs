//! Beta functions of the running couplings (U₀, m², λ) of the truncated
//! potential U = U₀ + m²ρ + λρ²/6, ρ = φ²/2.
//!
//! Every system has a transcribed form (the closed formulas) and, where a
//! kernel exists, a kernel-derived form that differentiates the flow
//! source S(ρ) = k² W(k² + m² + λρ) numerically at ρ = 0:
//!
//! ```text
//! dU₀/dt = S(0),   dm²/dt = S′(0),   dλ/dt = 3 S″(0)
//! ```
//!
//! The two routes are kept independent so that each can check the other.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, Background, DeSitter, MinkowskiVacuum, MuMode, Thermal};
use crate::ode::FlowField;
use crate::quadrature::QuadOptions;
use crate::specfun::{bose_tadpole_derivative, digamma, tetragamma, trigamma, ZETA3};

const EIGHT_PI2: f64 = 8.0 * PI * PI;
const SIXTEEN_PI2: f64 = 16.0 * PI * PI;

/// Scaling convention of a coupling vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "convention", rename_all = "kebab-case")]
pub enum Convention {
    Dimensionful,
    /// Ũ = U₀/k⁴, m̃² = m²/k², λ̃ = λ.
    Minkowski,
    /// Ũ₀ = U₀β²/k, m̃² = m²/k², λ̃ = λ/(βk).
    ThermalHighT { beta: f64 },
    /// Ũ₀ = U₀/H⁴, m̃² = m²/H², λ̃ = k²λ/H².
    DeSitter { h2: f64 },
}

impl Convention {
    pub fn is_dimensionless(&self) -> bool {
        !matches!(self, Convention::Dimensionful)
    }

    pub fn to_dimensionless(&self, g: [f64; 3], k: f64) -> [f64; 3] {
        let [u0, m2, lambda] = g;
        match *self {
            Convention::Dimensionful => g,
            Convention::Minkowski => [u0 / k.powi(4), m2 / (k * k), lambda],
            Convention::ThermalHighT { beta } => {
                [u0 * beta * beta / k, m2 / (k * k), lambda / (beta * k)]
            }
            Convention::DeSitter { h2 } => [u0 / (h2 * h2), m2 / h2, k * k * lambda / h2],
        }
    }

    pub fn to_dimensionful(&self, g: [f64; 3], k: f64) -> [f64; 3] {
        let [u0, m2, lambda] = g;
        match *self {
            Convention::Dimensionful => g,
            Convention::Minkowski => [u0 * k.powi(4), m2 * k * k, lambda],
            Convention::ThermalHighT { beta } => {
                [u0 * k / (beta * beta), m2 * k * k, lambda * beta * k]
            }
            Convention::DeSitter { h2 } => [u0 * h2 * h2, m2 * h2, lambda * h2 / (k * k)],
        }
    }

    /// Converts a dimensionful rate d g/dt into the rate of the
    /// dimensionless couplings `g_dimless`, adding the scaling terms.
    pub fn rate_to_dimensionless(&self, rate: [f64; 3], g_dimless: [f64; 3], k: f64) -> [f64; 3] {
        let [r0, r1, r2] = rate;
        let [u0, m2, lambda] = g_dimless;
        match *self {
            Convention::Dimensionful => rate,
            Convention::Minkowski => [r0 / k.powi(4) - 4.0 * u0, r1 / (k * k) - 2.0 * m2, r2],
            Convention::ThermalHighT { beta } => [
                r0 * beta * beta / k - u0,
                r1 / (k * k) - 2.0 * m2,
                r2 / (beta * k) - lambda,
            ],
            Convention::DeSitter { h2 } => [r0 / (h2 * h2), r1 / h2, 2.0 * lambda + k * k * r2 / h2],
        }
    }
}

/// Running couplings, always ordered (U₀, m², λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector {
    #[serde(rename = "U0")]
    pub u0: f64,
    pub m2: f64,
    pub lambda: f64,
    pub convention: Convention,
}

impl CouplingVector {
    pub fn new(values: [f64; 3], convention: Convention) -> Self {
        let [u0, m2, lambda] = values;
        Self {
            u0,
            m2,
            lambda,
            convention,
        }
    }

    pub fn values(&self) -> [f64; 3] {
        [self.u0, self.m2, self.lambda]
    }

    pub fn dimensionless(&self) -> bool {
        self.convention.is_dimensionless()
    }
}

/// How a beta system is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BetaMode {
    /// Closed formulas.
    #[default]
    Transcribed,
    /// Finite differences in ρ of the kernel source; `fd_step` is relative to M².
    KernelDerived { fd_step: f64 },
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

impl BetaMode {
    pub fn kernel() -> Self {
        BetaMode::KernelDerived {
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaMode::KernelDerived { fd_step } if !(1e-8..=1e-2).contains(&fd_step) => Err(
                Error::InvalidProblem(format!("fd_step {fd_step} outside [1e-8, 1e-2]")),
            ),
            _ => Ok(()),
        }
    }
}

/// Which sign of the ψ′ difference the de Sitter system uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    /// The printed formulas: leading ψ′(3/2−ν) − ψ′(3/2+ν) terms.
    PaperTranscribed,
    /// The signs obtained by differentiating the de Sitter Wick square.
    #[default]
    KernelConsistent,
}

/// How k/H enters the de Sitter system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "kebab-case")]
pub enum DeSitterScale {
    /// k = Λ eᵗ.
    Running { cutoff: f64 },
    /// k²/H² held at an exact value (0 is the inflationary limit).
    Frozen { k2_over_h2: f64 },
}

impl DeSitterScale {
    fn k2_over_h2(&self, t: f64, h2: f64) -> f64 {
        match *self {
            DeSitterScale::Running { cutoff } => (cutoff * t.exp()).powi(2) / h2,
            DeSitterScale::Frozen { k2_over_h2 } => k2_over_h2,
        }
    }
}

fn require_positive_mass(what: &'static str, one_plus_m2: f64) -> Result<()> {
    if one_plus_m2 > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(what, format!("1 + m2 = {one_plus_m2} is not positive")))
    }
}

/// log(k²/μ²) with k = Λ eᵗ.
fn log_k2_over_mu2(t: f64, mu: MuMode, cutoff: f64) -> Result<f64> {
    match mu {
        MuMode::TiedToK => Ok(0.0),
        MuMode::Fixed { mu2 } => Ok(2.0 * t + (cutoff * cutoff / mu2).ln()),
        MuMode::TiedToH => Err(Error::domain("minkowski beta", "mu tied to H needs de Sitter")),
    }
}

/// Dimensionless d = 4 Minkowski-vacuum system in (Ũ, m̃², λ̃).
pub fn beta_minkowski_vacuum(g: [f64; 3], t: f64, mu: MuMode, cutoff: f64) -> Result<[f64; 3]> {
    let [u, m2, lambda] = g;
    let one_m = 1.0 + m2;
    require_positive_mass("minkowski beta", one_m)?;
    let log_k = log_k2_over_mu2(t, mu, cutoff)?;
    let log_m = one_m.ln();
    Ok([
        -4.0 * u + one_m * (log_m + log_k) / EIGHT_PI2,
        -2.0 * m2 + lambda * (1.0 + log_m + log_k) / EIGHT_PI2,
        3.0 * lambda * lambda / (EIGHT_PI2 * one_m),
    ])
}

/// Dimensionful d = 4 Minkowski-vacuum system in (U₀, m², λ) at scale k.
pub fn beta_minkowski_dimensionful(g: [f64; 3], k: f64, mu2: f64) -> Result<[f64; 3]> {
    let [_, m2, lambda] = g;
    let mass2 = k * k + m2;
    require_positive_mass("minkowski beta", mass2)?;
    let log = (mass2 / mu2).ln();
    let k2 = k * k;
    Ok([
        k2 * mass2 * log / EIGHT_PI2,
        k2 * lambda * (1.0 + log) / EIGHT_PI2,
        3.0 * k2 * lambda * lambda / (EIGHT_PI2 * mass2),
    ])
}

/// High-temperature system in (Ũ₀, m̃², λ̃); the vacuum part is dropped.
pub fn beta_thermal_high_t(g: [f64; 3]) -> Result<[f64; 3]> {
    let [u, m2, lambda] = g;
    let one_m = 1.0 + m2;
    require_positive_mass("thermal high-T beta", one_m)?;
    let two_pi2 = 2.0 * PI * PI;
    Ok([
        -u + ZETA3 / two_pi2,
        -2.0 * m2 - lambda / (two_pi2 * one_m.sqrt()),
        -lambda + 3.0 * lambda * lambda / (EIGHT_PI2 * one_m.powf(1.5)),
    ])
}

/// Full thermal system (vacuum + Bose parts) in dimensionful (U₀, m², λ),
/// with the Bose M²-derivatives integrated from the differentiated integrand.
pub fn beta_thermal_exact(g: [f64; 3], k: f64, bg: &Thermal) -> Result<[f64; 3]> {
    bg.validate()?;
    let [_, m2, lambda] = g;
    let mass2 = k * k + m2;
    require_positive_mass("thermal beta", mass2)?;
    let mu2 = bg.mu.mu2(k, None)?;
    let log = (mass2 / mu2).ln();
    let vac = [mass2 * log / EIGHT_PI2, (1.0 + log) / EIGHT_PI2, 1.0 / (EIGHT_PI2 * mass2)];
    let opts = QuadOptions {
        rel_tol: 1e-12,
        ..QuadOptions::default()
    };
    let bose = if bg.beta.is_infinite() {
        [0.0; 3]
    } else {
        [
            bose_tadpole_derivative(0, mass2, bg.beta, &opts)?,
            bose_tadpole_derivative(1, mass2, bg.beta, &opts)?,
            bose_tadpole_derivative(2, mass2, bg.beta, &opts)?,
        ]
    };
    let k2 = k * k;
    Ok([
        k2 * (vac[0] + bose[0]),
        k2 * lambda * (vac[1] + bose[1]),
        3.0 * k2 * lambda * lambda * (vac[2] + bose[2]),
    ])
}

struct DeSitterPoint {
    nu: f64,
    /// k²/H² + m̃² + 12(ξ − 1/6)
    p: f64,
    log_term: f64,
    k2_over_h2: f64,
}

fn desitter_point(g: [f64; 3], t: f64, bg: &DeSitter, scale: DeSitterScale) -> Result<DeSitterPoint> {
    bg.validate()?;
    let k2_over_h2 = scale.k2_over_h2(t, bg.h2);
    let m2 = g[1];
    let nu2 = 2.25 - 12.0 * bg.xi + k2_over_h2 + m2;
    if !(nu2 > 0.0) {
        return Err(Error::domain("de sitter beta", format!("nu^2 = {nu2} is not positive")));
    }
    let log_term = match bg.mu {
        MuMode::TiedToH => 0.0,
        mu => {
            let k = (k2_over_h2 * bg.h2).sqrt();
            (12.0 * bg.h2 / mu.mu2(k, Some(bg.h2))?).ln()
        }
    };
    Ok(DeSitterPoint {
        nu: nu2.sqrt(),
        p: k2_over_h2 + m2 + 12.0 * (bg.xi - 1.0 / 6.0),
        log_term,
        k2_over_h2,
    })
}

/// Dimensionless de Sitter system in (Ũ₀, m̃², λ̃).
///
/// `PaperTranscribed` follows the printed formulas. `KernelConsistent` is
/// assembled from the analytic M²-derivatives of the de Sitter Wick square;
/// the two differ in the sign of the leading ψ′ difference of both rates.
/// The Ũ₀ rate is zero unless `include_u0` is set, in which case it is
/// (k²/H²)·W/H².
pub fn beta_desitter(
    g: [f64; 3],
    t: f64,
    bg: &DeSitter,
    scale: DeSitterScale,
    sign: SignMode,
    include_u0: bool,
) -> Result<[f64; 3]> {
    let pt = desitter_point(g, t, bg, scale)?;
    let lambda = g[2];
    let h2 = bg.h2;
    let u0_rate = |w: f64| if include_u0 { pt.k2_over_h2 * w / h2 } else { 0.0 };
    match sign {
        SignMode::PaperTranscribed => {
            let nu = pt.nu;
            let (minus, plus) = (1.5 - nu, 1.5 + nu);
            let psi_sum = digamma(minus)? + digamma(plus)?;
            let dpsi1 = trigamma(minus)? - trigamma(plus)?;
            let psi2_sum = tetragamma(minus)? + tetragamma(plus)?;
            let brace_m = pt.log_term + psi_sum + pt.p / (2.0 * nu) * dpsi1;
            let brace_l = dpsi1 + pt.p / (4.0 * nu * nu) * (dpsi1 + nu * psi2_sum);
            let w = if include_u0 {
                kernels::desitter_wick_square(pt.k2_over_h2 * h2 + g[1] * h2, bg, (pt.k2_over_h2 * h2).sqrt())?
                    .value
            } else {
                0.0
            };
            Ok([
                u0_rate(w),
                -lambda / SIXTEEN_PI2 * brace_m,
                2.0 * lambda - 3.0 * lambda * lambda / (SIXTEEN_PI2 * nu) * brace_l,
            ])
        }
        SignMode::KernelConsistent => {
            let k = (pt.k2_over_h2 * h2).sqrt();
            let mass2 = h2 * (pt.k2_over_h2 + g[1]);
            let [w, w1, w2] = kernels::desitter_wick_square_derivatives(mass2, bg, k)?;
            Ok([
                u0_rate(w),
                lambda * w1,
                2.0 * lambda + 3.0 * lambda * lambda * h2 * w2,
            ])
        }
    }
}

/// Flow rates of the dimensionful couplings from the kernel source
/// S(ρ) = k²·W(k² + m² + λρ) by finite differences at ρ = 0.
///
/// The first derivative uses a central difference with step
/// `fd_step`·M²/|λ| in ρ; the second uses the Richardson-extrapolated
/// (five-point) central difference with step `fd_step`^0.6·M²/|λ|, which
/// keeps round-off below the truncation error of a plain 1e-5 stencil.
pub fn beta_from_kernel(g: [f64; 3], k: f64, bg: &Background, fd_step: f64) -> Result<[f64; 3]> {
    BetaMode::KernelDerived { fd_step }.validate()?;
    bg.validate()?;
    let [_, m2, lambda] = g;
    let k2 = k * k;
    let base = k2 + m2;
    let source = |rho: f64| -> Result<f64> {
        let mass2 = base + lambda * rho;
        kernels::wick_square(mass2, bg, k)
            .map(|w| k2 * w.value)
            .map_err(|e| match e {
                Error::Domain { what, detail } => Error::Domain {
                    what,
                    detail: format!("{detail} (stencil point rho = {rho:e})"),
                },
                Error::Pole { what, x } => Error::Domain {
                    what,
                    detail: format!("pole at {x} (stencil point rho = {rho:e})"),
                },
                other => other,
            })
    };
    let s0 = source(0.0)?;
    if lambda == 0.0 {
        return Ok([s0, 0.0, 0.0]);
    }
    let scale = base.abs().max(k2).max(f64::MIN_POSITIVE);
    let h1 = fd_step * scale / lambda.abs();
    let d1 = (source(h1)? - source(-h1)?) / (2.0 * h1);
    let h2 = fd_step.powf(0.6) * scale / lambda.abs();
    let (sp1, sm1) = (source(h2)?, source(-h2)?);
    let (sp2, sm2) = (source(2.0 * h2)?, source(-2.0 * h2)?);
    let d2 = (-sp2 + 16.0 * sp1 - 30.0 * s0 + 16.0 * sm1 - sm2) / (12.0 * h2 * h2);
    Ok([s0, d1, 3.0 * d2])
}

/// A registered beta system, evaluated at renormalization time t = log(k/Λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "kebab-case")]
pub enum BetaSystem {
    /// d = 4 vacuum in dimensionless couplings.
    MinkowskiVacuum { mu: MuMode, cutoff: f64, mode: BetaMode },
    /// d = 4 vacuum in dimensionful couplings.
    MinkowskiDimensionful { mu: MuMode, cutoff: f64, mode: BetaMode },
    /// High-temperature limit in dimensionless couplings.
    ThermalHighT,
    /// Vacuum plus Bose parts in dimensionful couplings.
    Thermal { beta: f64, mu: MuMode, cutoff: f64, mode: BetaMode },
    /// Bunch–Davies state in dimensionless couplings.
    DeSitter {
        background: DeSitter,
        scale: DeSitterScale,
        sign: SignMode,
        include_u0: bool,
    },
}

impl BetaSystem {
    /// The μ = k vacuum system, which is autonomous.
    pub fn minkowski_mu_k() -> Self {
        BetaSystem::MinkowskiVacuum {
            mu: MuMode::TiedToK,
            cutoff: 1.0,
            mode: BetaMode::Transcribed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BetaSystem::MinkowskiVacuum { .. } => "minkowski-vacuum",
            BetaSystem::MinkowskiDimensionful { .. } => "minkowski-vacuum-dimensionful",
            BetaSystem::ThermalHighT => "thermal-high-t",
            BetaSystem::Thermal { .. } => "thermal",
            BetaSystem::DeSitter { .. } => "de-sitter",
        }
    }

    /// Reference scale Λ, with k = Λ eᵗ.
    pub fn cutoff(&self) -> f64 {
        match *self {
            BetaSystem::MinkowskiVacuum { cutoff, .. }
            | BetaSystem::MinkowskiDimensionful { cutoff, .. }
            | BetaSystem::Thermal { cutoff, .. } => cutoff,
            BetaSystem::DeSitter {
                scale: DeSitterScale::Running { cutoff },
                ..
            } => cutoff,
            BetaSystem::DeSitter {
                background,
                scale: DeSitterScale::Frozen { k2_over_h2 },
                ..
            } => (k2_over_h2 * background.h2).sqrt(),
            BetaSystem::ThermalHighT => 1.0,
        }
    }

    pub fn convention(&self) -> Convention {
        match *self {
            BetaSystem::MinkowskiVacuum { .. } => Convention::Minkowski,
            BetaSystem::MinkowskiDimensionful { .. } | BetaSystem::Thermal { .. } => {
                Convention::Dimensionful
            }
            // the rescaling absorbs β; the transcribed system has no explicit β left
            BetaSystem::ThermalHighT => Convention::ThermalHighT { beta: 1.0 },
            BetaSystem::DeSitter { background, .. } => Convention::DeSitter { h2: background.h2 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidProblem(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            BetaSystem::MinkowskiVacuum { mu, cutoff, mode }
            | BetaSystem::MinkowskiDimensionful { mu, cutoff, mode } => {
                positive("cutoff", cutoff)?;
                mode.validate()?;
                MinkowskiVacuum { d: 4, mu }.validate()
            }
            BetaSystem::ThermalHighT => Ok(()),
            BetaSystem::Thermal {
                beta,
                mu,
                cutoff,
                mode,
            } => {
                positive("cutoff", cutoff)?;
                mode.validate()?;
                Thermal { beta, mu }.validate()
            }
            BetaSystem::DeSitter {
                background, scale, ..
            } => {
                match scale {
                    DeSitterScale::Running { cutoff } => positive("cutoff", cutoff)?,
                    DeSitterScale::Frozen { k2_over_h2 } if !(k2_over_h2 >= 0.0) => {
                        return Err(Error::InvalidProblem(format!(
                            "k^2/H^2 must be non-negative, got {k2_over_h2}"
                        )))
                    }
                    _ => {}
                }
                background.validate()
            }
        }
    }

    /// Rates of the couplings at time t.
    pub fn rate(&self, t: f64, g: [f64; 3]) -> Result<[f64; 3]> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(self.name(), format!("non-finite couplings {g:?}")));
        }
        match *self {
            BetaSystem::MinkowskiVacuum { mu, cutoff, mode } => match mode {
                BetaMode::Transcribed => beta_minkowski_vacuum(g, t, mu, cutoff),
                BetaMode::KernelDerived { fd_step } => {
                    let k = cutoff * t.exp();
                    let conv = Convention::Minkowski;
                    require_positive_mass("minkowski beta", 1.0 + g[1])?;
                    let bg = Background::MinkowskiVacuum(MinkowskiVacuum { d: 4, mu });
                    let rate = beta_from_kernel(conv.to_dimensionful(g, k), k, &bg, fd_step)?;
                    Ok(conv.rate_to_dimensionless(rate, g, k))
                }
            },
            BetaSystem::MinkowskiDimensionful { mu, cutoff, mode } => {
                let k = cutoff * t.exp();
                match mode {
                    BetaMode::Transcribed => beta_minkowski_dimensionful(g, k, mu.mu2(k, None)?),
                    BetaMode::KernelDerived { fd_step } => {
                        let bg = Background::MinkowskiVacuum(MinkowskiVacuum { d: 4, mu });
                        beta_from_kernel(g, k, &bg, fd_step)
                    }
                }
            }
            BetaSystem::ThermalHighT => beta_thermal_high_t(g),
            BetaSystem::Thermal {
                beta,
                mu,
                cutoff,
                mode,
            } => {
                let k = cutoff * t.exp();
                let th = Thermal { beta, mu };
                match mode {
                    BetaMode::Transcribed => beta_thermal_exact(g, k, &th),
                    BetaMode::KernelDerived { fd_step } => {
                        beta_from_kernel(g, k, &Background::Thermal(th), fd_step)
                    }
                }
            }
            BetaSystem::DeSitter {
                background,
                scale,
                sign,
                include_u0,
            } => beta_desitter(g, t, &background, scale, sign, include_u0),
        }
    }
}

impl FlowField for BetaSystem {
    fn dim(&self) -> usize {
        3
    }

    fn rate(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let g: [f64; 3] = y
            .try_into()
            .map_err(|_| Error::InvalidProblem(format!("expected 3 couplings, got {}", y.len())))?;
        dy.copy_from_slice(&BetaSystem::rate(self, t, g)?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    /// Agreement of two rates, relative to the largest component so that
    /// components that vanish analytically are judged on the overall scale.
    fn agree(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        let scale = a.iter().chain(b.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        a.iter()
            .zip(b.iter())
            .all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1e-3 * scale).max(1e-300))
    }

    #[test]
    fn gaussian_point_is_fixed() {
        let r = beta_minkowski_vacuum([0.0; 3], 0.3, MuMode::TiedToK, 1.0).unwrap();
        assert_eq!(r, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn gaussian_line_decouples() {
        let r = beta_minkowski_vacuum([0.2, 0.7, 0.0], 0.0, MuMode::TiedToK, 1.0).unwrap();
        assert_eq!(r[2], 0.0);
        assert_eq!(r[1], -1.4);
    }

    #[test]
    fn unit_quartic_rate() {
        let r = beta_minkowski_vacuum([0.0, 0.0, 1.0], 0.0, MuMode::TiedToK, 1.0).unwrap();
        assert!(rel(r[2], 0.037_995_443_865_876_66) < 1e-14);
        let sys = BetaSystem::MinkowskiVacuum {
            mu: MuMode::TiedToK,
            cutoff: 1.0,
            mode: BetaMode::kernel(),
        };
        let k = sys.rate(0.0, [0.0, 0.0, 1.0]).unwrap();
        assert!(rel(k[2], r[2]) < 1e-6);
    }

    #[test]
    fn minkowski_domain() {
        assert!(beta_minkowski_vacuum([0.0, -1.0, 0.1], 0.0, MuMode::TiedToK, 1.0).is_err());
        assert!(beta_thermal_high_t([0.0, -1.5, 0.1]).is_err());
    }

    #[test]
    fn thermal_fixed_point_closes() {
        let lam = 8.0 / 3.0 * PI * PI * 0.6f64.powf(1.5);
        let r = beta_thermal_high_t([ZETA3 / (2.0 * PI * PI), -0.4, lam]).unwrap();
        for v in r {
            assert!(v.abs() <= 1e-12, "{r:?}");
        }
        assert!(rel(lam, 12.231_940_313_303_844) < 1e-14);
    }

    #[test]
    fn thermal_at_origin() {
        let r = beta_thermal_high_t([0.0; 3]).unwrap();
        assert!(rel(r[0], 0.060_896_914_116_786_54) < 1e-14);
        assert_eq!(r[1], 0.0);
        assert_eq!(r[2], 0.0);
        let r = beta_thermal_high_t([0.3, 0.5, 0.0]).unwrap();
        assert_eq!(r[2], 0.0);
        assert_eq!(r[1], -1.0);
    }

    #[test]
    fn desitter_gaussian_line_is_invariant() {
        let bg = DeSitter { h2: 1.0, xi: 1.0 / 6.0, mu: MuMode::TiedToH };
        for sign in [SignMode::PaperTranscribed, SignMode::KernelConsistent] {
            let r = beta_desitter(
                [0.0, 0.3, 0.0],
                0.0,
                &bg,
                DeSitterScale::Frozen { k2_over_h2: 0.0 },
                sign,
                false,
            )
            .unwrap();
            assert_eq!(r[1], 0.0);
            assert_eq!(r[2], 0.0);
        }
    }

    #[test]
    fn desitter_sign_modes_differ_only_in_the_leading_difference() {
        let bg = DeSitter { h2: 1.0, xi: 0.1, mu: MuMode::TiedToH };
        let scale = DeSitterScale::Frozen { k2_over_h2: 0.3 };
        let g = [0.0, 0.2, 5.0];
        let a = beta_desitter(g, 0.0, &bg, scale, SignMode::PaperTranscribed, false).unwrap();
        let b = beta_desitter(g, 0.0, &bg, scale, SignMode::KernelConsistent, false).unwrap();
        let nu = (2.25 - 1.2 + 0.3 + 0.2f64).sqrt();
        let d = trigamma(1.5 + nu).unwrap() - trigamma(1.5 - nu).unwrap();
        let p = 0.3 + 0.2 + 12.0 * (0.1 - 1.0 / 6.0);
        // β_m differs by 2·(λ̃/16π²)·P·D/(2ν)
        let dm = b[1] - a[1];
        assert!(rel(dm, -g[2] / SIXTEEN_PI2 * p * d / nu) < 1e-12);
        // β_λ differs by 2·(3λ̃²/16π²ν)·D
        let dl = b[2] - a[2];
        assert!(rel(dl, -2.0 * 3.0 * g[2] * g[2] / (SIXTEEN_PI2 * nu) * d) < 1e-12);
    }

    #[test]
    fn desitter_kernel_consistent_matches_finite_differences() {
        let h2 = 1.7;
        for (xi, k2h, m2, lam) in [(1.0 / 6.0, 0.4, 0.1646, 179.2), (0.1, 1.0, 0.5, 3.0), (0.0, 2.0, 0.3, 0.5)] {
            let bg = DeSitter { h2, xi, mu: MuMode::TiedToH };
            let scale = DeSitterScale::Frozen { k2_over_h2: k2h };
            let g = [0.0, m2, lam];
            let analytic = beta_desitter(g, 0.0, &bg, scale, SignMode::KernelConsistent, false).unwrap();
            let k = (k2h * h2).sqrt();
            let conv = Convention::DeSitter { h2 };
            let fd = beta_from_kernel(conv.to_dimensionful(g, k), k, &Background::DeSitter(bg), DEFAULT_FD_STEP)
                .unwrap();
            let fd = conv.rate_to_dimensionless(fd, g, k);
            assert!(rel(analytic[1], fd[1]) < 1e-6, "{analytic:?} {fd:?}");
            assert!(rel(analytic[2], fd[2]) < 1e-6, "{analytic:?} {fd:?}");
        }
    }

    #[test]
    fn desitter_pole_and_domain() {
        let bg = DeSitter { h2: 1.0, xi: 0.0, mu: MuMode::TiedToH };
        let scale = DeSitterScale::Frozen { k2_over_h2: 0.0 };
        let err = beta_desitter([0.0, 0.0, 1.0], 0.0, &bg, scale, SignMode::PaperTranscribed, false).unwrap_err();
        assert!(matches!(err, Error::Pole { .. }));
        let bg = DeSitter { xi: 0.5, ..bg };
        let err = beta_desitter([0.0, 0.0, 1.0], 0.0, &bg, scale, SignMode::KernelConsistent, false).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn desitter_u0_option() {
        let bg = DeSitter { h2: 1.0, xi: 1.0 / 6.0, mu: MuMode::TiedToH };
        let scale = DeSitterScale::Frozen { k2_over_h2: 0.5 };
        let g = [0.0, 0.2, 1.0];
        for sign in [SignMode::PaperTranscribed, SignMode::KernelConsistent] {
            let off = beta_desitter(g, 0.0, &bg, scale, sign, false).unwrap();
            let on = beta_desitter(g, 0.0, &bg, scale, sign, true).unwrap();
            assert_eq!(off[0], 0.0);
            let w = kernels::desitter_wick_square(0.7, &bg, 0.5f64.sqrt()).unwrap().value;
            assert!(rel(on[0], 0.5 * w) < 1e-14);
        }
    }

    #[test]
    fn kernel_matches_transcribed_minkowski_grid() {
        for mu in [MuMode::TiedToK, MuMode::Fixed { mu2: 0.7 }] {
            for t in [0.0, -0.8] {
                for m2 in [-0.5, 0.0, 1.0] {
                    for lam in [0.0, 0.1, 1.0] {
                        let g = [0.01, m2, lam];
                        let tr = BetaSystem::MinkowskiVacuum { mu, cutoff: 1.3, mode: BetaMode::Transcribed };
                        let kd = BetaSystem::MinkowskiVacuum { mu, cutoff: 1.3, mode: BetaMode::kernel() };
                        let a = tr.rate(t, g).unwrap();
                        let b = kd.rate(t, g).unwrap();
                        assert!(agree(b, a, 1e-6), "{mu:?} t {t} g {g:?}: {a:?} vs {b:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_matches_exact_thermal() {
        for (m2, lam) in [(-0.5, 0.1), (0.0, 1.0), (1.0, 0.5)] {
            let g = [0.0, m2, lam];
            let th = |mode| BetaSystem::Thermal { beta: 1.0, mu: MuMode::Fixed { mu2: 1.0 }, cutoff: 1.0, mode };
            let a = th(BetaMode::Transcribed).rate(0.0, g).unwrap();
            let b = th(BetaMode::kernel()).rate(0.0, g).unwrap();
            assert!(agree(b, a, 1e-6), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn kernel_lambda_zero_has_no_quartic_flow() {
        let bg = Background::Thermal(Thermal { beta: 1.0, mu: MuMode::Fixed { mu2: 1.0 } });
        let r = beta_from_kernel([0.0, 0.3, 0.0], 1.0, &bg, DEFAULT_FD_STEP).unwrap();
        assert!(r[2].abs() < 1e-9);
        let (vac, bose) = kernels::thermal_wick_square_parts(1.3, &Thermal { beta: 1.0, mu: MuMode::Fixed { mu2: 1.0 } }, 1.0).unwrap();
        assert!(rel(r[0], vac + bose) < 1e-14);
    }

    #[test]
    fn kernel_reports_stencil_point() {
        let bg = Background::MinkowskiVacuum(MinkowskiVacuum { d: 4, mu: MuMode::TiedToK });
        // M²(0) just above zero, negative λ pushes the +ρ stencil point below zero
        let err = beta_from_kernel([0.0, -1.0 + 1e-9, -1.0], 1.0, &bg, 1e-2).unwrap_err();
        match err {
            Error::Domain { detail, .. } => assert!(detail.contains("stencil point"), "{detail}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn fd_step_bounds() {
        let bg = Background::MinkowskiVacuum(MinkowskiVacuum { d: 4, mu: MuMode::TiedToK });
        assert!(beta_from_kernel([0.0, 0.0, 0.1], 1.0, &bg, 1e-9).is_err());
        assert!(beta_from_kernel([0.0, 0.0, 0.1], 1.0, &bg, 0.1).is_err());
    }

    #[test]
    fn dimensional_consistency_minkowski() {
        for mu in [MuMode::TiedToK, MuMode::Fixed { mu2: 2.0 }] {
            for t in [0.0, -1.0, 0.5] {
                let cutoff = 1.5;
                let k = cutoff * f64::exp(t);
                for g in [[0.1, 0.2, 0.3], [-0.2, -0.4, 2.0], [0.0, 3.0, 0.01]] {
                    let direct = beta_minkowski_vacuum(g, t, mu, cutoff).unwrap();
                    let conv = Convention::Minkowski;
                    let dimful = beta_minkowski_dimensionful(conv.to_dimensionful(g, k), k, mu.mu2(k, None).unwrap()).unwrap();
                    let via = conv.rate_to_dimensionless(dimful, g, k);
                    for i in 0..3 {
                        assert!((direct[i] - via[i]).abs() <= 1e-10 * direct[i].abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn convention_round_trip() {
        let convs = [
            Convention::Minkowski,
            Convention::ThermalHighT { beta: 0.3 },
            Convention::DeSitter { h2: 2.0 },
            Convention::Dimensionful,
        ];
        for c in convs {
            let g = [0.3, -0.2, 4.0];
            let back = c.to_dimensionful(c.to_dimensionless(g, 1.7), 1.7);
            for i in 0..3 {
                assert!(rel(back[i], g[i]) < 1e-15);
            }
        }
    }

    #[test]
    fn system_rejects_bad_configuration() {
        let s = BetaSystem::MinkowskiVacuum { mu: MuMode::TiedToH, cutoff: 1.0, mode: BetaMode::Transcribed };
        assert!(s.validate().is_err());
        let s = BetaSystem::Thermal { beta: 1.0, mu: MuMode::TiedToK, cutoff: 0.0, mode: BetaMode::Transcribed };
        assert!(s.validate().is_err());
        assert!(BetaSystem::minkowski_mu_k().rate(0.0, [f64::NAN, 0.0, 0.0]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quartic_hyperplane_is_invariant(u in -1.0f64..1.0, m2 in -0.5f64..2.0, t in -2.0f64..0.5) {
                let g = [u, m2, 0.0];
                prop_assert_eq!(beta_minkowski_vacuum(g, t, MuMode::TiedToK, 1.0).unwrap()[2], 0.0);
                prop_assert_eq!(beta_minkowski_vacuum(g, t, MuMode::Fixed { mu2: 3.0 }, 1.0).unwrap()[2], 0.0);
                prop_assert_eq!(beta_thermal_high_t(g).unwrap()[2], 0.0);
                let bg = DeSitter { h2: 1.0, xi: 0.1, mu: MuMode::TiedToH };
                for sign in [SignMode::PaperTranscribed, SignMode::KernelConsistent] {
                    let r = beta_desitter(g, t, &bg, DeSitterScale::Running { cutoff: 1.0 }, sign, false);
                    if let Ok(r) = r {
                        prop_assert_eq!(r[2], 0.0);
                    }
                }
                let th = Thermal { beta: 2.0, mu: MuMode::TiedToK };
                prop_assert_eq!(beta_thermal_exact([u, m2, 0.0], 1.0, &th).unwrap()[2], 0.0);
            }
        }
    }
}
