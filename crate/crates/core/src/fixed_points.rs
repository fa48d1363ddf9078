//! Fixed points of dimensionless beta systems and their linearization.
//!
//! Critical exponents follow θᵢ = −eigᵢ(∂β/∂g̃), so relevant directions
//! (growing towards the infrared, t → −∞) carry θ > 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::FlowField;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const FD_REL_STEP: f64 = 1e-6;
pub const FD_ABS_STEP: f64 = 1e-8;
pub const DEDUP_RADIUS: f64 = 1e-6;
const MAX_HALVINGS: usize = 30;
const ARMIJO_C: f64 = 1e-4;
// Newton steps below this (relative to the iterate) count as converged.
const STEP_TOL: f64 = 1e-12;
// |Re θ| at or below this is reported as marginal.
const MARGINAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Renormalization time at which the (autonomous) system is evaluated.
    pub t: f64,
    /// Multiplies both FD step rules; 1 gives the defaults.
    pub fd_scale: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            t: 0.0,
            fd_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Classification {
    /// Every direction is relevant (all Re θ > 0).
    UvAttractive { relevant: usize },
    Mixed {
        relevant: usize,
        irrelevant: usize,
        marginal: usize,
    },
    /// Every direction is irrelevant (all Re θ < 0).
    IrAttractive,
}

impl Classification {
    fn from_exponents(theta: &[Eigenvalue]) -> Self {
        let relevant = theta.iter().filter(|e| e.re > MARGINAL).count();
        let irrelevant = theta.iter().filter(|e| e.re < -MARGINAL).count();
        let marginal = theta.len() - relevant - irrelevant;
        if relevant == theta.len() {
            Classification::UvAttractive { relevant }
        } else if irrelevant == theta.len() {
            Classification::IrAttractive
        } else {
            Classification::Mixed {
                relevant,
                irrelevant,
                marginal,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: Vec<f64>,
    /// ‖β(location)‖∞.
    pub residual: f64,
    pub iterations: usize,
    /// Row-major ∂βᵢ/∂g̃ⱼ.
    pub stability_matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Eigenvalue>,
    pub critical_exponents: Vec<Eigenvalue>,
    pub classification: Classification,
}

fn eval<F: FlowField>(f: &F, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let mut r = vec![0.0; x.len()];
    f.rate(t, x, &mut r)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("beta system", format!("non-finite rate at {x:?}")));
    }
    Ok(r)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Central-difference Jacobian with step max(1e−6 |xⱼ|, 1e−8), both scaled
/// by `fd_scale`.
pub fn fd_jacobian<F: FlowField>(f: &F, t: f64, x: &[f64], fd_scale: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = fd_scale * (FD_REL_STEP * x[j].abs()).max(FD_ABS_STEP);
        xp[j] = x[j] + h;
        let fp = eval(f, t, &xp)?;
        xp[j] = x[j] - h;
        let fm = eval(f, t, &xp)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn newton_step(jac: &DMatrix<f64>, r: &[f64]) -> Option<Vec<f64>> {
    // The SVD least-squares solve also copes with singular Jacobians, which
    // occur at the Gaussian point and for decoupled constant rows.
    let rhs = -DVector::from_column_slice(r);
    let svd = jac.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-13).max(f64::MIN_POSITIVE);
    let dx = svd.solve(&rhs, eps).ok()?;
    dx.iter().all(|v| v.is_finite()).then(|| dx.iter().copied().collect())
}

/// Damped Newton iteration for β(g̃) = 0.
///
/// Converged once ‖β‖∞ ≤ tol. While the full Newton step stays inside the
/// tolerance but still moves the iterate, iteration continues: this polishes
/// roots of multiplicity > 1, where a small residual alone leaves the iterate
/// far from the root.
pub fn find_fixed_point<F: FlowField>(f: &F, guess: &[f64], opts: &NewtonOptions) -> Result<FixedPointReport> {
    if guess.len() != f.dim() {
        return Err(Error::InvalidProblem(format!(
            "guess has {} components, system has {}",
            guess.len(),
            f.dim()
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidProblem(format!(
            "tolerance {} / max_iter {}",
            opts.tol, opts.max_iter
        )));
    }
    let mut x = guess.to_vec();
    let mut r = eval(f, opts.t, &x)?;
    let mut res = sup_norm(&r);
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let converged = res <= opts.tol;
        let jac = fd_jacobian(f, opts.t, &x, opts.fd_scale)?;
        let Some(dx) = newton_step(&jac, &r) else {
            break;
        };
        let scale = sup_norm(&x).max(1.0);
        if converged && sup_norm(&dx) <= STEP_TOL * scale {
            break;
        }
        iterations += 1;

        if converged {
            // polishing: take the full step only if the residual stays small
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            match eval(f, opts.t, &trial) {
                Ok(rt) if sup_norm(&rt) <= opts.tol => {
                    x = trial;
                    r = rt;
                    res = sup_norm(&r);
                    continue;
                }
                _ => break,
            }
        }

        let merit = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
            // leaving the domain counts as an infinite merit
            if let Ok(rt) = eval(f, opts.t, &trial) {
                let m = 0.5 * rt.iter().map(|v| v * v).sum::<f64>();
                if m <= (1.0 - 2.0 * ARMIJO_C * alpha) * merit {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xt, rt)) => {
                x = xt;
                r = rt;
                res = sup_norm(&r);
            }
            None => {
                return Err(Error::NoConvergence {
                    iterate: x,
                    residual: res,
                    iterations,
                })
            }
        }
    }

    if res > opts.tol {
        return Err(Error::NoConvergence {
            iterate: x,
            residual: res,
            iterations,
        });
    }
    let mut report = stability_analysis_with(f, &x, opts)?;
    report.iterations = iterations;
    Ok(report)
}

/// Linearization at `fp` with the default FD steps.
///
/// The residual at `fp` is reported, not enforced, so that rounded
/// published coordinates can still be analysed.
pub fn stability_analysis<F: FlowField>(f: &F, fp: &[f64]) -> Result<FixedPointReport> {
    stability_analysis_with(f, fp, &NewtonOptions::default())
}

pub fn stability_analysis_with<F: FlowField>(f: &F, fp: &[f64], opts: &NewtonOptions) -> Result<FixedPointReport> {
    if fp.len() != f.dim() {
        return Err(Error::InvalidProblem(format!(
            "point has {} components, system has {}",
            fp.len(),
            f.dim()
        )));
    }
    let r = eval(f, opts.t, fp)?;
    let jac = fd_jacobian(f, opts.t, fp, opts.fd_scale)?;
    let mut eigenvalues: Vec<Eigenvalue> = jac
        .complex_eigenvalues()
        .iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect();
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let critical_exponents: Vec<Eigenvalue> = eigenvalues
        .iter()
        .map(|e| Eigenvalue { re: 0.0 - e.re, im: 0.0 - e.im })
        .collect();
    let n = fp.len();
    Ok(FixedPointReport {
        location: fp.to_vec(),
        residual: sup_norm(&r),
        iterations: 0,
        stability_matrix: (0..n).map(|i| (0..n).map(|j| jac[(i, j)]).collect()).collect(),
        classification: Classification::from_exponents(&critical_exponents),
        eigenvalues,
        critical_exponents,
    })
}

/// One axis of a scan grid; `count` points spaced evenly over [min, max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    /// A single node at `value`.
    pub fn fixed(value: f64) -> Self {
        Self::new(value, value, 1)
    }

    fn node(&self, i: usize) -> f64 {
        if self.count <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    /// Distinct roots, sorted by residual.
    pub roots: Vec<FixedPointReport>,
    pub starts: usize,
    /// Starts that failed to converge or left the domain.
    pub failed_starts: usize,
}

/// Runs Newton from every node of the grid and merges roots closer than
/// 1e−6 in the max norm.
pub fn scan_fixed_points<F: FlowField>(f: &F, axes: &[Axis], opts: &NewtonOptions) -> Result<ScanOutcome> {
    if axes.len() != f.dim() {
        return Err(Error::InvalidProblem(format!(
            "grid has {} axes, system has {}",
            axes.len(),
            f.dim()
        )));
    }
    let total: usize = axes.iter().map(|a| a.count).product();
    let mut roots: Vec<FixedPointReport> = Vec::new();
    let mut failed = 0;
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        let start: Vec<f64> = axes.iter().zip(&idx).map(|(a, &i)| a.node(i)).collect();
        match find_fixed_point(f, &start, opts) {
            Ok(rep) => {
                let dup = roots.iter_mut().find(|r| {
                    r.location
                        .iter()
                        .zip(&rep.location)
                        .all(|(a, b)| (a - b).abs() <= DEDUP_RADIUS)
                });
                match dup {
                    Some(existing) if existing.residual <= rep.residual => {}
                    Some(existing) => *existing = rep,
                    None => roots.push(rep),
                }
            }
            Err(_) => failed += 1,
        }
        // odometer increment over the grid
        for (d, a) in axes.iter().enumerate() {
            idx[d] += 1;
            if idx[d] < a.count {
                break;
            }
            idx[d] = 0;
        }
    }
    roots.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    Ok(ScanOutcome {
        roots,
        starts: total,
        failed_starts: failed,
    })
}
