//! Special functions used by the source kernels: polygamma of order 0–2,
//! ζ(3), and the thermal Bose-Einstein tadpole integral.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

/// Riemann ζ(3) (Apéry's constant).
pub const ZETA3: f64 = 1.202_056_903_159_594_285_399_738_161_511_449_990_764_986_292;

/// Arguments at or above this value go straight to the asymptotic series.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Lowest argument reachable by upward recurrence before we refuse.
const RECURRENCE_FLOOR: f64 = -1.0e4;

/// B_{2j} for j = 1..=8.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Order of a polygamma derivative: ψ, ψ′ or ψ″.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolyOrder {
    Digamma,
    Trigamma,
    Tetragamma,
}

impl PolyOrder {
    pub fn n(self) -> u32 {
        match self {
            PolyOrder::Digamma => 0,
            PolyOrder::Trigamma => 1,
            PolyOrder::Tetragamma => 2,
        }
    }
}

impl TryFrom<u32> for PolyOrder {
    type Error = Error;

    fn try_from(n: u32) -> Result<Self> {
        match n {
            0 => Ok(PolyOrder::Digamma),
            1 => Ok(PolyOrder::Trigamma),
            2 => Ok(PolyOrder::Tetragamma),
            _ => Err(Error::domain("polygamma", format!("order {n} not in {{0, 1, 2}}"))),
        }
    }
}

fn asymptotic(order: PolyOrder, x: f64) -> f64 {
    let inv = x.recip();
    let inv2 = inv * inv;
    match order {
        PolyOrder::Digamma => {
            // ln x - 1/2x - sum B_2j / (2j x^2j)
            let mut acc = 0.0;
            let mut p = inv2;
            for (j, b) in BERNOULLI.iter().enumerate() {
                acc += b / (2.0 * (j as f64 + 1.0)) * p;
                p *= inv2;
            }
            x.ln() - 0.5 * inv - acc
        }
        PolyOrder::Trigamma => {
            // 1/x + 1/2x^2 + sum B_2j / x^(2j+1)
            let mut acc = 0.0;
            let mut p = inv2 * inv;
            for b in BERNOULLI {
                acc += b * p;
                p *= inv2;
            }
            inv + 0.5 * inv2 + acc
        }
        PolyOrder::Tetragamma => {
            // -1/x^2 - 1/x^3 - sum (2j+1) B_2j / x^(2j+2)
            let mut acc = 0.0;
            let mut p = inv2 * inv2;
            for (j, b) in BERNOULLI.iter().enumerate() {
                acc += (2.0 * (j as f64 + 1.0) + 1.0) * b * p;
                p *= inv2;
            }
            -inv2 - inv2 * inv - acc
        }
    }
}

/// Polygamma function ψ⁽ⁿ⁾(x) for n ∈ {0, 1, 2}.
///
/// The argument is shifted up to x ≥ 10 with
/// ψ⁽ⁿ⁾(x) = ψ⁽ⁿ⁾(x+1) − (−1)ⁿ n!/xⁿ⁺¹ and then evaluated from the
/// Bernoulli asymptotic series. Negative non-integer arguments are reached
/// by the same recurrence down to −10⁴. Non-positive integers are poles.
pub fn polygamma(order: PolyOrder, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("polygamma", format!("argument {x}")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Pole {
            what: "polygamma",
            x,
        });
    }
    if x < RECURRENCE_FLOOR {
        return Err(Error::domain(
            "polygamma",
            format!("argument {x} below recurrence floor {RECURRENCE_FLOOR}"),
        ));
    }
    let n = order.n();
    // (-1)^n n!
    let coeff = match n {
        0 => 1.0,
        1 => -1.0,
        _ => 2.0,
    };
    let mut shift = 0.0;
    let mut y = x;
    while y < ASYMPTOTIC_THRESHOLD {
        shift += coeff / y.powi(n as i32 + 1);
        y += 1.0;
    }
    Ok(asymptotic(order, y) - shift)
}

pub fn digamma(x: f64) -> Result<f64> {
    polygamma(PolyOrder::Digamma, x)
}

pub fn trigamma(x: f64) -> Result<f64> {
    polygamma(PolyOrder::Trigamma, x)
}

pub fn tetragamma(x: f64) -> Result<f64> {
    polygamma(PolyOrder::Tetragamma, x)
}

pub fn zeta3() -> f64 {
    ZETA3
}

/// Upper end of the Bose integral in u = βp; e^{-50} < 2e-22.
pub const BOSE_U_MAX: f64 = 50.0;

fn check_thermal_args(m2: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain("bose_tadpole", format!("inverse temperature {beta}")));
    }
    if !(m2 >= 0.0) || !m2.is_finite() {
        return Err(Error::domain("bose_tadpole", format!("mass-squared {m2}")));
    }
    Ok(())
}

/// u / (e^u - 1), continued to 1 at u = 0.
fn bose_weight(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        u / u.exp_m1()
    }
}

/// Thermal part of the coincidence-limit Wick square,
/// T_B(M², β) = (1/2π²) ∫₀^∞ dp p²/√(p²+M²) · 1/(e^{βp} − 1).
///
/// Note the Bose factor carries the massless energy |p| while the mode
/// factor carries √(p²+M²).
pub fn bose_tadpole(m2: f64, beta: f64) -> Result<f64> {
    bose_tadpole_with(m2, beta, &QuadOptions::default())
}

pub fn bose_tadpole_with(m2: f64, beta: f64, opts: &QuadOptions) -> Result<f64> {
    bose_tadpole_derivative(0, m2, beta, opts)
}

/// `order`-th derivative of [`bose_tadpole`] with respect to M², for
/// `order` ∈ {0, 1, 2}. Derivatives are integrated directly from the
/// differentiated integrand; they require M² > 0.
pub fn bose_tadpole_derivative(order: u32, m2: f64, beta: f64, opts: &QuadOptions) -> Result<f64> {
    check_thermal_args(m2, beta)?;
    if order > 0 && m2 == 0.0 {
        return Err(Error::domain(
            "bose_tadpole",
            "M² derivatives diverge at M² = 0",
        ));
    }
    let a2 = beta * beta * m2;
    let (prefactor, power) = match order {
        0 => (1.0 / (2.0 * PI * PI * beta * beta), 0.5),
        1 => (-1.0 / (4.0 * PI * PI), 1.5),
        2 => (3.0 * beta * beta / (8.0 * PI * PI), 2.5),
        _ => {
            return Err(Error::domain(
                "bose_tadpole",
                format!("derivative order {order} not in {{0, 1, 2}}"),
            ))
        }
    };
    // u^2 / (u^2 + a^2)^power / (e^u - 1), written to stay finite at u -> 0.
    let integrand = |u: f64| -> f64 {
        let s = u * u + a2;
        u * bose_weight(u) / s.powf(power)
    };
    let r = quadrature::integrate(integrand, 0.0, BOSE_U_MAX, opts)?;
    Ok(prefactor * r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_431;

    /// ψ(x) = −γ + Σ_{j≥0} (1/(j+1) − 1/(j+x)), with the tail beyond J
    /// handled by Richardson extrapolation in 1/J.
    fn digamma_series(x: f64) -> f64 {
        let partial = |terms: usize| -> f64 {
            let mut s = 0.0;
            for j in (0..terms).rev() {
                let j = j as f64;
                s += 1.0 / (j + 1.0) - 1.0 / (j + x);
            }
            s
        };
        // S(J) = S + c1/J + c2/J^2 + ...
        let (j1, j2, j3) = (200_000usize, 400_000usize, 800_000usize);
        let (s1, s2, s3) = (partial(j1), partial(j2), partial(j3));
        let r1 = 2.0 * s2 - s1;
        let r2 = 2.0 * s3 - s2;
        let s = (4.0 * r2 - r1) / 3.0;
        -EULER_GAMMA + s
    }

    /// Σ_{j≥1} j^{-p} with an Euler–Maclaurin tail after J terms.
    fn zeta_series(p: i32) -> f64 {
        let big_j = 100_000;
        let mut s = 0.0;
        for j in (1..=big_j).rev() {
            s += (j as f64).powi(-p);
        }
        let jf = big_j as f64;
        let pf = p as f64;
        s + jf.powf(1.0 - pf) / (pf - 1.0) - 0.5 * jf.powf(-pf) + pf / 12.0 * jf.powf(-pf - 1.0)
    }

    #[test]
    fn digamma_at_one_matches_series() {
        let v = digamma(1.0).unwrap();
        assert!((v + EULER_GAMMA).abs() < 1e-15);
        assert!((v - digamma_series(1.0)).abs() < 1e-12);
        assert!((v + 0.577_215_664_901_532_86).abs() < 1e-15);
    }

    #[test]
    fn digamma_at_integers_from_harmonic_sums() {
        // ψ(n) = −γ + H_{n−1}
        let mut harmonic = 0.0;
        for n in 1..=1000u32 {
            let v = digamma(n as f64).unwrap();
            let o = -EULER_GAMMA + harmonic;
            assert!((v - o).abs() <= 1e-13 * o.abs().max(1.0), "n = {n}");
            harmonic += 1.0 / n as f64;
        }
    }

    #[test]
    fn trigamma_at_one_is_pi_squared_over_six() {
        let v = trigamma(1.0).unwrap();
        assert!((v - 1.644_934_066_848_226_44).abs() < 1e-14);
        assert!((v - zeta_series(2)).abs() < 1e-12);
        assert!((v - PI * PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn tetragamma_at_one_is_minus_two_zeta3() {
        let v = tetragamma(1.0).unwrap();
        assert!((v + 2.404_113_806_319_188_57).abs() < 1e-14);
        assert!((v + 2.0 * zeta_series(3)).abs() < 1e-12);
    }

    #[test]
    fn digamma_at_two_by_recurrence() {
        let v = digamma(2.0).unwrap();
        assert!((v - 0.422_784_335_098_467_14).abs() < 1e-15);
    }

    #[test]
    fn digamma_at_half() {
        let v = digamma(0.5).unwrap();
        let closed = -EULER_GAMMA - 2.0 * 2f64.ln();
        assert!((v - closed).abs() < 1e-14);
        assert!((v - digamma_series(0.5)).abs() < 1e-12);
    }

    #[test]
    fn series_oracle_on_a_spread_of_arguments() {
        for &x in &[1e-3, 0.1, 0.37, 3.3, 9.99, 10.0, 27.5] {
            let v = digamma(x).unwrap();
            let o = digamma_series(x);
            assert!(
                (v - o).abs() <= 1e-12 * (1.0 + o.abs()),
                "x = {x}: {v} vs {o}"
            );
        }
    }

    #[test]
    fn zeta3_constant() {
        assert!((zeta3() - zeta_series(3)).abs() < 1e-14);
        assert!((zeta3() + tetragamma(1.0).unwrap() / 2.0).abs() < 1e-13);
        assert!(zeta3() > 1.2 && zeta3() < 1.21);
    }

    #[test]
    fn poles_are_reported() {
        for x in [0.0, -1.0, -7.0] {
            for order in [PolyOrder::Digamma, PolyOrder::Trigamma, PolyOrder::Tetragamma] {
                assert!(matches!(polygamma(order, x), Err(Error::Pole { .. })));
            }
        }
        assert!(polygamma(PolyOrder::Digamma, f64::NAN).is_err());
        assert!(polygamma(PolyOrder::Digamma, -2e4 + 0.5).is_err());
    }

    #[test]
    fn negative_non_integer_uses_recurrence() {
        // ψ(x) = ψ(x+1) - 1/x
        let x = -0.3;
        let lhs = digamma(x).unwrap();
        let rhs = digamma(x + 1.0).unwrap() - 1.0 / x;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn order_conversion() {
        assert_eq!(PolyOrder::try_from(2).unwrap(), PolyOrder::Tetragamma);
        assert!(PolyOrder::try_from(3).is_err());
    }

    #[test]
    fn massless_bose_tadpole_is_one_over_twelve_beta_squared() {
        for beta in [0.1, 1.0, 10.0] {
            let v = bose_tadpole(0.0, beta).unwrap();
            let exact = 1.0 / (12.0 * beta * beta);
            assert!((v - exact).abs() / exact < 1e-10, "beta {beta}: {v}");
        }
    }

    /// Composite Simpson on p ∈ [0, 50/β] with 10⁶ intervals.
    fn bose_simpson(m2: f64, beta: f64) -> f64 {
        let n = 1_000_000usize;
        let b = BOSE_U_MAX / beta;
        let h = b / n as f64;
        let f = |p: f64| -> f64 {
            if p == 0.0 {
                0.0
            } else {
                p * p / (p * p + m2).sqrt() / (beta * p).exp_m1()
            }
        };
        let mut s = f(0.0) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / (2.0 * PI * PI)
    }

    #[test]
    fn bose_tadpole_regression_against_simpson() {
        // frozen from the Simpson oracle below (and an independent mpmath check)
        const FROZEN: f64 = 7.874_581_289_277_627;
        let oracle = bose_simpson(1.0, 0.1);
        assert!((oracle - FROZEN).abs() / FROZEN < 1e-10);
        let v = bose_tadpole(1.0, 0.1).unwrap();
        assert!((v - FROZEN).abs() / FROZEN < 1e-10, "{v}");
    }

    #[test]
    fn bose_tadpole_other_frozen_points() {
        let v = bose_tadpole(1.0, 1.0).unwrap();
        assert!((v - 0.053_643_620_985_427_34).abs() / v < 1e-10);
        let v = bose_tadpole(2.0, 0.5).unwrap();
        assert!((v - 0.239_362_947_811_201_4).abs() / v < 1e-10);
    }

    /// The Bose factor carries the massless energy, so a heavy mode is only
    /// suppressed by 1/M: T_B → ζ(3)/(π² M β³) for M ≫ 1/β.
    #[test]
    fn heavy_mode_is_suppressed() {
        let m2 = 1e6;
        let v = bose_tadpole(m2, 1.0).unwrap();
        let leading = ZETA3 / (PI * PI * m2.sqrt());
        assert!((v - leading).abs() / leading < 1e-5, "{v} vs {leading}");
        assert!(v < 1.3e-4);
        assert!(bose_tadpole(1e16, 1.0).unwrap() < 1e-8);
    }

    #[test]
    fn bose_tadpole_is_monotone_on_grid() {
        let m2s = [0.0, 0.5, 1.0, 4.0, 20.0];
        let betas = [0.1, 0.5, 1.0, 3.0, 10.0];
        for &beta in &betas {
            for w in m2s.windows(2) {
                let lo = bose_tadpole(w[0], beta).unwrap();
                let hi = bose_tadpole(w[1], beta).unwrap();
                assert!(hi < lo, "M2 {w:?} beta {beta}");
            }
        }
        for &m2 in &m2s {
            for w in betas.windows(2) {
                let lo = bose_tadpole(m2, w[0]).unwrap();
                let hi = bose_tadpole(m2, w[1]).unwrap();
                assert!(hi < lo, "M2 {m2} beta {w:?}");
            }
        }
    }

    #[test]
    fn tightening_tolerance_changes_little() {
        for (m2, beta) in [(1.0, 0.1), (0.3, 2.0), (5.0, 1.0)] {
            let coarse_tol = 1e-8;
            let coarse = bose_tadpole_with(m2, beta, &QuadOptions { rel_tol: coarse_tol, max_panels: 10_000 }).unwrap();
            let fine = bose_tadpole_with(m2, beta, &QuadOptions { rel_tol: coarse_tol / 2.0, max_panels: 10_000 }).unwrap();
            assert!((coarse - fine).abs() <= coarse_tol * fine.abs());
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let opts = QuadOptions { rel_tol: 1e-12, max_panels: 10_000 };
        for (m2, beta) in [(1.0, 1.0), (0.2, 0.3), (3.0, 2.0)] {
            let h = 1e-3 * m2;
            let f = |x: f64| bose_tadpole_with(x, beta, &opts).unwrap();
            let d1 = (f(m2 + h) - f(m2 - h)) / (2.0 * h);
            let d2 = (f(m2 + h) - 2.0 * f(m2) + f(m2 - h)) / (h * h);
            let a1 = bose_tadpole_derivative(1, m2, beta, &opts).unwrap();
            let a2 = bose_tadpole_derivative(2, m2, beta, &opts).unwrap();
            assert!((d1 - a1).abs() < 1e-6 * a1.abs(), "{d1} {a1}");
            assert!((d2 - a2).abs() < 1e-4 * a2.abs(), "{d2} {a2}");
        }
    }

    #[test]
    fn bad_thermal_arguments() {
        assert!(bose_tadpole(1.0, 0.0).is_err());
        assert!(bose_tadpole(-1.0, 1.0).is_err());
        assert!(bose_tadpole_derivative(1, 0.0, 1.0, &QuadOptions::default()).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn recurrence_holds(x in 0.1f64..100.0, n in 0u32..3) {
                let order = PolyOrder::try_from(n).unwrap();
                let a = polygamma(order, x + 1.0).unwrap();
                let b = polygamma(order, x).unwrap();
                let sign_fact = match n { 0 => 1.0, 1 => -1.0, _ => 2.0 };
                let resid = a - b - sign_fact / x.powi(n as i32 + 1);
                prop_assert!(resid.abs() <= 1e-12 * (1.0 + b.abs()));
            }

            #[test]
            fn trigamma_positive_tetragamma_negative(x in 1e-3f64..1e3) {
                prop_assert!(trigamma(x).unwrap() > 0.0);
                prop_assert!(tetragamma(x).unwrap() < 0.0);
            }
        }
    }
}
