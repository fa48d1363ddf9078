//! Globally adaptive Gauss–Kronrod (7, 15) quadrature on a finite interval.

use crate::error::{Error, Result};

// Kronrod abscissae, symmetric about 0; the odd-indexed ones are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Target relative error of the total.
    pub rel_tol: f64,
    /// Maximum number of panels before giving up.
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_panels: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, bisecting the panel with the largest error
/// estimate until the summed estimate drops below `rel_tol * |I|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) || !(opts.rel_tol > 0.0) || opts.max_panels == 0 {
        return Err(Error::InvalidProblem(format!(
            "quadrature on [{a}, {b}] with rel_tol {}",
            opts.rel_tol
        )));
    }
    let mut panels = vec![gk15(&f, a, b)];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return Err(Error::Convergence {
                what: "quadrature",
                detail: "non-finite integrand".into(),
            });
        }
        if error <= opts.rel_tol * value.abs() || error <= f64::MIN_POSITIVE {
            return Ok(QuadResult {
                value,
                error,
                panels: panels.len(),
            });
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Convergence {
                what: "quadrature",
                detail: format!(
                    "{} panels exhausted with error {error:e} on value {value:e}",
                    panels.len()
                ),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact_on_one_panel() {
        let r = integrate(|x| x.powi(6) - 2.0 * x, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((r.value - (128.0 / 7.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.panels, 1);
    }

    #[test]
    fn peaked_integrand_refines() {
        let a = 1e-3;
        let r = integrate(|x| a / (x * x + a * a), -1.0, 1.0, &QuadOptions::default()).unwrap();
        let exact = 2.0 * (1.0 / a).atan();
        assert!((r.value - exact).abs() / exact < 1e-10);
        assert!(r.panels > 1);
    }

    #[test]
    fn panel_budget_is_enforced() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            max_panels: 3,
        };
        let err = integrate(|x: f64| x.abs().sqrt().recip(), -1.0, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
    }
}
