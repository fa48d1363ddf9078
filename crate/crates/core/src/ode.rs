//! Dormand–Prince 5(4) integration in renormalization time t = log(k/Λ).
//!
//! Flows run in either direction of t. A trial step whose stage evaluation
//! fails (the state left the field's domain) is bisected down to a floor,
//! after which the flow ends with [`Termination::DomainStop`]. States whose
//! magnitude passes a blow-up threshold end it with [`Termination::PoleStop`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of an autonomous or t-dependent flow dy/dt = f(t, y).
pub trait FlowField {
    fn dim(&self) -> usize;

    /// Writes f(t, y) into `dy`. Returns an error when (t, y) is outside the
    /// field's domain.
    fn rate(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F: FlowField + ?Sized> FlowField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn rate(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (**self).rate(t, y, dy)
    }
}

/// Wraps a closure as a [`FlowField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> FlowField for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rate(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.f)(t, y, dy)
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// 5th-order weights minus the embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;
pub const BLOWUP_THRESHOLD: f64 = 1e12;
pub const STEP_FLOOR: f64 = 1e-12;

/// An initial-value problem for a [`FlowField`].
#[derive(Debug, Clone)]
pub struct FlowProblem<F> {
    pub field: F,
    pub y0: Vec<f64>,
    pub t0: f64,
    pub t_end: f64,
    /// Reference scale Λ; samples report k = Λ eᵗ.
    pub cutoff: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Times at which a step is forced to land.
    pub checkpoints: Vec<f64>,
    /// When set, take uniform steps of this size with no error control.
    pub fixed_step: Option<f64>,
}

impl<F: FlowField> FlowProblem<F> {
    pub fn new(field: F, y0: Vec<f64>, t0: f64, t_end: f64) -> Self {
        Self {
            field,
            y0,
            t0,
            t_end,
            cutoff: 1.0,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_steps: DEFAULT_MAX_STEPS,
            checkpoints: Vec::new(),
            fixed_step: None,
        }
    }

    pub fn cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    pub fn checkpoints(mut self, ts: Vec<f64>) -> Self {
        self.checkpoints = ts;
        self
    }

    pub fn fixed_step(mut self, h: f64) -> Self {
        self.fixed_step = Some(h);
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if !(self.t0.is_finite() && self.t_end.is_finite()) || self.t0 == self.t_end {
            return bad(format!("time span [{}, {}]", self.t0, self.t_end));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return bad(format!("cutoff {}", self.cutoff));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad(format!("tolerances {} / {}", self.rel_tol, self.abs_tol));
        }
        if self.y0.len() != self.field.dim() {
            return bad(format!(
                "initial state has {} components, field expects {}",
                self.y0.len(),
                self.field.dim()
            ));
        }
        if self.y0.iter().any(|v| !v.is_finite()) {
            return bad("non-finite initial state".into());
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("fixed step {h}"));
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps is zero".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub k: f64,
    pub state: Vec<f64>,
}

/// Why a flow stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    ReachedEnd,
    /// A trial step kept leaving the domain down to the step floor.
    DomainStop { t: f64, reason: String },
    /// Component `index` passed the blow-up threshold during the step from `t`.
    PoleStop { t: f64, index: usize, value: f64 },
    StepBudget { t: f64 },
}

impl Termination {
    pub fn is_complete(&self) -> bool {
        matches!(self, Termination::ReachedEnd)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Samples of a flow: the initial state plus one per accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub stats: StepStats,
}

impl FlowTrajectory {
    pub fn last(&self) -> &Sample {
        // never empty: the initial sample is always present
        self.samples.last().expect("trajectory has an initial sample")
    }

    /// The sample landed exactly at `t`, if any.
    pub fn at(&self, t: f64) -> Option<&Sample> {
        self.samples.iter().find(|s| s.t == t)
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], rel_tol: f64, abs_tol: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = abs_tol + rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

struct Stepper<'a, F> {
    field: &'a F,
    k: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    evaluations: usize,
}

impl<'a, F: FlowField> Stepper<'a, F> {
    fn new(field: &'a F, dim: usize) -> Self {
        Self {
            field,
            k: vec![vec![0.0; dim]; 7],
            scratch: vec![0.0; dim],
            evaluations: 0,
        }
    }

    /// One Dormand–Prince step from (t, y) with k[0] = f(t, y) already set.
    /// Leaves the 5th-order solution in `y_new` and the error estimate in
    /// `err`; k[6] = f(t+h, y_new).
    fn step(&mut self, t: f64, y: &[f64], h: f64, y_new: &mut [f64], err: &mut [f64]) -> Result<()> {
        let dim = y.len();
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += a * self.k[j][i];
                }
                self.scratch[i] = y[i] + h * acc;
            }
            self.evaluations += 1;
            self.field.rate(t + C[s] * h, &self.scratch, &mut self.k[s])?;
            if self.k[s].iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("flow field", format!("non-finite rate at t = {}", t + C[s] * h)));
            }
        }
        // stage 7 was evaluated at the 5th-order solution
        y_new.copy_from_slice(&self.scratch);
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, e) in E.iter().enumerate() {
                acc += e * self.k[j][i];
            }
            err[i] = h * acc;
        }
        Ok(())
    }
}

/// Integrates the problem from `t0` to `t_end`.
pub fn integrate<F: FlowField>(p: &FlowProblem<F>) -> Result<FlowTrajectory> {
    p.validate()?;
    let dim = p.y0.len();
    let dir = (p.t_end - p.t0).signum();
    let span = (p.t_end - p.t0).abs();
    let k_of = |t: f64| p.cutoff * t.exp();

    let mut stops: Vec<f64> = p
        .checkpoints
        .iter()
        .copied()
        .filter(|&c| (c - p.t0) * dir > 0.0 && (p.t_end - c) * dir > 0.0)
        .collect();
    stops.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    stops.dedup();
    stops.push(p.t_end);
    let mut next_stop = 0usize;

    let mut stepper = Stepper::new(&p.field, dim);
    let mut t = p.t0;
    let mut y = p.y0.clone();
    stepper.evaluations += 1;
    p.field.rate(t, &y, &mut stepper.k[0])?;

    let mut samples = vec![Sample {
        t,
        k: k_of(t),
        state: y.clone(),
    }];
    let mut stats = StepStats::default();

    let mut h = match p.fixed_step {
        Some(h) => h.min(span),
        None => initial_step(p, &y, &stepper.k[0]),
    };
    let mut err_prev: f64 = 1e-4;
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let termination = loop {
        if stats.accepted >= p.max_steps {
            break Termination::StepBudget { t };
        }
        let target = stops[next_stop];
        let remaining = (target - t).abs();
        let lands = h >= remaining;
        let h_try = if lands { remaining } else { h };

        match stepper.step(t, &y, dir * h_try, &mut y_new, &mut err) {
            Err(e) => {
                stats.rejected += 1;
                h = 0.5 * h_try;
                if h < STEP_FLOOR {
                    break Termination::DomainStop {
                        t,
                        reason: e.to_string(),
                    };
                }
                continue;
            }
            Ok(()) => {}
        }

        let norm = if p.fixed_step.is_some() {
            0.0
        } else {
            error_norm(&y, &y_new, &err, p.rel_tol, p.abs_tol)
        };
        if !norm.is_finite() || norm > 1.0 {
            stats.rejected += 1;
            let shrink = if norm.is_finite() {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.5
            };
            h = h_try * shrink;
            if h < STEP_FLOOR {
                break Termination::DomainStop {
                    t,
                    reason: format!("step size underflow (error norm {norm:e})"),
                };
            }
            continue;
        }

        // accept
        stats.accepted += 1;
        let t_new = if lands { target } else { t + dir * h_try };
        if let Some((index, value)) = y_new
            .iter()
            .copied()
            .enumerate()
            .find(|(_, v)| v.abs() > BLOWUP_THRESHOLD)
        {
            break Termination::PoleStop { t, index, value };
        }
        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        stepper.k.swap(0, 6);
        samples.push(Sample {
            t,
            k: k_of(t),
            state: y.clone(),
        });
        if lands {
            next_stop += 1;
            if next_stop == stops.len() {
                break Termination::ReachedEnd;
            }
        }

        if p.fixed_step.is_none() {
            // PI control
            let n = norm.max(1e-10);
            let factor = 0.9 * n.powf(-0.17) * err_prev.powf(0.04);
            h = h_try * factor.clamp(0.2, 10.0);
            err_prev = n;
            if lands && h < h_try {
                h = h_try;
            }
        }
        h = h.min(span);
    };

    stats.evaluations = stepper.evaluations;
    Ok(FlowTrajectory {
        samples,
        termination,
        stats,
    })
}

/// Starting step from the Hairer–Wanner heuristic.
fn initial_step<F: FlowField>(p: &FlowProblem<F>, y: &[f64], f0: &[f64]) -> f64 {
    let span = (p.t_end - p.t0).abs();
    let dir = (p.t_end - p.t0).signum();
    let sc: Vec<f64> = y.iter().map(|v| p.abs_tol + p.rel_tol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len().max(1) as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    if p.field.rate(p.t0 + dir * h0, &y1, &mut f1).is_err() {
        return h0;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = rms(&diff);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}
