//! Full LPA flow of the potential U(t, ρ) on a uniform ρ-grid, by the method
//! of lines:
//!
//! ```text
//! ∂_t Uᵢ = k² W(M²(ρᵢ)),   M²(ρ) = k² + U′(ρ) + 2ρ U″(ρ)
//! ```
//!
//! U is stored purely as a function of ρ = φ²/2, so the solver never sees
//! odd powers of the field. Evolving the whole mass profile M²(ρ) goes
//! beyond the truncation at the minimum; at ρ = 0 the two agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{wick_square, Background};
use crate::ode::{self, FlowField, FlowProblem, StepStats, Termination};

pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialGrid {
    pub rho_max: f64,
    /// U at ρᵢ = i·h, h = rho_max/(N − 1).
    pub values: Vec<f64>,
    /// Scale k at which the values hold.
    pub k: f64,
}

impl PotentialGrid {
    pub fn new(rho_max: f64, values: Vec<f64>, k: f64) -> Result<Self> {
        let g = Self { rho_max, values, k };
        g.validate()?;
        Ok(g)
    }

    /// Samples `u` on `n` nodes of [0, rho_max].
    pub fn from_fn(rho_max: f64, n: usize, k: f64, u: impl Fn(f64) -> f64) -> Result<Self> {
        let h = rho_max / (n.max(2) - 1) as f64;
        Self::new(rho_max, (0..n).map(|i| u(i as f64 * h)).collect(), k)
    }

    /// Truncated potential U₀ + m²ρ + λρ²/6.
    pub fn quartic(rho_max: f64, n: usize, k: f64, [u0, m2, lambda]: [f64; 3]) -> Result<Self> {
        Self::from_fn(rho_max, n, k, |r| u0 + m2 * r + lambda * r * r / 6.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < MIN_NODES {
            return Err(Error::InvalidProblem(format!(
                "potential grid needs at least {MIN_NODES} nodes, got {}",
                self.values.len()
            )));
        }
        if !(self.rho_max > 0.0 && self.rho_max.is_finite()) {
            return Err(Error::InvalidProblem(format!("rho_max {}", self.rho_max)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidProblem(format!("scale k {}", self.k)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite potential values".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.rho_max / (self.values.len() - 1) as f64
    }

    pub fn rho(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }
}

/// Default grid extent 10·max(|m²|, Λ²)/max(λ, ε), with ε = 1e−3.
pub fn default_rho_max(m2: f64, lambda: f64, cutoff: f64) -> f64 {
    10.0 * m2.abs().max(cutoff * cutoff) / lambda.max(1e-3)
}

/// U′ and U″ at every node: central stencils inside, one-sided
/// second-order stencils at both ends.
fn derivatives(u: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        d1[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
        d2[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
    }
    d1[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d2[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h);
    let l = n - 1;
    d1[l] = (3.0 * u[l] - 4.0 * u[l - 1] + u[l - 2]) / (2.0 * h);
    d2[l] = (2.0 * u[l] - 5.0 * u[l - 1] + 4.0 * u[l - 2] - u[l - 3]) / (h * h);
    (d1, d2)
}

fn mass_profile(u: &[f64], h: f64, k: f64) -> Vec<f64> {
    let (d1, d2) = derivatives(u, h);
    (0..u.len())
        .map(|i| {
            let rho = i as f64 * h;
            k * k + d1[i] + 2.0 * rho * d2[i]
        })
        .collect()
}

/// M²(ρᵢ) = k² + U′(ρᵢ) + 2ρᵢ U″(ρᵢ).
pub fn mass_squared_profile(g: &PotentialGrid) -> Vec<f64> {
    mass_profile(&g.values, g.spacing(), g.k)
}

/// (U₀, m², λ) read off at ρ = 0: U(0), U′(0) and 3U″(0).
pub fn couplings_at_origin(g: &PotentialGrid) -> [f64; 3] {
    let (d1, d2) = derivatives(&g.values, g.spacing());
    [g.values[0], d1[0], 3.0 * d2[0]]
}

/// The semi-discrete system dUᵢ/dt = k² W(M²(ρᵢ)), with k = Λ eᵗ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialField {
    pub background: Background,
    pub cutoff: f64,
    pub rho_max: f64,
    pub nodes: usize,
}

impl PotentialField {
    fn spacing(&self) -> f64 {
        self.rho_max / (self.nodes - 1) as f64
    }
}

impl FlowField for PotentialField {
    fn dim(&self) -> usize {
        self.nodes
    }

    fn rate(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let k = self.cutoff * t.exp();
        let m2 = mass_profile(y, self.spacing(), k);
        for (i, (out, &mass2)) in dy.iter_mut().zip(&m2).enumerate() {
            let w = wick_square(mass2, &self.background, k).map_err(|e| match e {
                Error::Domain { what, detail } => Error::Domain {
                    what,
                    detail: format!("{detail} at node {i}"),
                },
                other => other,
            })?;
            *out = k * k * w.value;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFlowOptions {
    pub t0: f64,
    pub t_end: f64,
    /// Reference scale Λ.
    pub cutoff: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Times at which snapshots are taken in addition to the endpoints.
    pub checkpoints: Vec<f64>,
}

impl Default for PotentialFlowOptions {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_end: -1.0,
            cutoff: 1.0,
            rel_tol: ode::DEFAULT_REL_TOL,
            abs_tol: ode::DEFAULT_ABS_TOL,
            max_steps: ode::DEFAULT_MAX_STEPS,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub grid: PotentialGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFlow {
    /// Initial grid, every reached checkpoint, and the last accepted state.
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub stats: StepStats,
}

impl PotentialFlow {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("flow has an initial snapshot")
    }
}

/// Flows the grid from `opts.t0` to `opts.t_end`.
///
/// The input grid's `k` is ignored in favour of Λ e^{t0}; snapshot grids
/// carry their own k.
pub fn flow_potential(g: &PotentialGrid, bg: &Background, opts: &PotentialFlowOptions) -> Result<PotentialFlow> {
    g.validate()?;
    bg.validate()?;
    let field = PotentialField {
        background: *bg,
        cutoff: opts.cutoff,
        rho_max: g.rho_max,
        nodes: g.len(),
    };
    let problem = FlowProblem::new(field, g.values.clone(), opts.t0, opts.t_end)
        .cutoff(opts.cutoff)
        .tolerances(opts.rel_tol, opts.abs_tol)
        .max_steps(opts.max_steps)
        .checkpoints(opts.checkpoints.clone());
    let traj = ode::integrate(&problem)?;

    let snap = |s: &ode::Sample| Snapshot {
        t: s.t,
        grid: PotentialGrid {
            rho_max: g.rho_max,
            values: s.state.clone(),
            k: s.k,
        },
    };
    let mut snapshots = vec![snap(&traj.samples[0])];
    for s in &traj.samples[1..] {
        if opts.checkpoints.contains(&s.t) {
            snapshots.push(snap(s));
        }
    }
    let last = traj.last();
    if snapshots.last().map(|s| s.t) != Some(last.t) {
        snapshots.push(snap(last));
    }
    Ok(PotentialFlow {
        snapshots,
        termination: traj.termination,
        stats: traj.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{MinkowskiVacuum, MuMode, Thermal};

    fn minkowski(mu2: f64) -> Background {
        Background::MinkowskiVacuum(MinkowskiVacuum {
            d: 4,
            mu: MuMode::Fixed { mu2 },
        })
    }

    #[test]
    fn quartic_profile_is_exact() {
        let g = PotentialGrid::quartic(20.0, 33, 1.5, [0.3, 0.2, 0.7]).unwrap();
        for (i, m2) in mass_squared_profile(&g).iter().enumerate() {
            let exact = 1.5 * 1.5 + 0.2 + 0.7 * g.rho(i);
            assert!((m2 - exact).abs() < 1e-11 * exact.abs().max(1.0), "node {i}");
        }
        let c = couplings_at_origin(&g);
        for (a, b) in c.iter().zip([0.3, 0.2, 0.7]) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn trivial_profiles() {
        let zero = PotentialGrid::from_fn(5.0, 16, 2.0, |_| 0.0).unwrap();
        assert!(mass_squared_profile(&zero).iter().all(|&m| m == 4.0));
        let linear = PotentialGrid::from_fn(5.0, 16, 2.0, |r| 0.25 * r).unwrap();
        assert!(mass_squared_profile(&linear).iter().all(|m| (m - 4.25).abs() < 1e-13));
    }

    #[test]
    fn grid_validation() {
        assert!(PotentialGrid::from_fn(1.0, 15, 1.0, |_| 0.0).is_err());
        assert!(PotentialGrid::from_fn(0.0, 16, 1.0, |_| 0.0).is_err());
        assert!(PotentialGrid::from_fn(1.0, 16, 1.0, |r| 1.0 / (r - r)).is_err());
    }

    #[test]
    fn vanishing_source_at_k_equal_mu() {
        let field = PotentialField {
            background: minkowski(1.0),
            cutoff: 1.0,
            rho_max: 10.0,
            nodes: 16,
        };
        let mut dy = vec![1.0; 16];
        field.rate(0.0, &vec![0.0; 16], &mut dy).unwrap();
        assert!(dy.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_data_stays_linear() {
        let g = PotentialGrid::from_fn(50.0, 32, 1.0, |r| 0.1 * r).unwrap();
        let opts = PotentialFlowOptions {
            t_end: -0.5,
            ..Default::default()
        };
        let out = flow_potential(&g, &minkowski(100.0), &opts).unwrap();
        assert!(out.termination.is_complete());
        let u = &out.last().grid.values;
        let slope = u[1] - u[0];
        for (i, v) in u.iter().enumerate() {
            assert!((v - u[0] - slope * i as f64).abs() <= 1e-10, "node {i}");
        }
    }

    #[test]
    fn cold_thermal_matches_vacuum() {
        let g = PotentialGrid::quartic(20.0, 16, 1.0, [0.0, 0.01, 0.05]).unwrap();
        let opts = PotentialFlowOptions {
            t_end: -0.2,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            checkpoints: vec![-0.1],
            ..Default::default()
        };
        let mu = MuMode::Fixed { mu2: 100.0 };
        let vac = flow_potential(&g, &minkowski(100.0), &opts).unwrap();
        let hot = flow_potential(&g, &Background::Thermal(Thermal { beta: 1e3, mu }), &opts).unwrap();
        assert_eq!(vac.snapshots.len(), 3);
        assert_eq!(hot.snapshots.len(), 3);
        for (a, b) in vac.snapshots.iter().zip(&hot.snapshots) {
            assert_eq!(a.t, b.t);
            for (x, y) in a.grid.values.iter().zip(&b.grid.values) {
                assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn negative_mass_stops_the_flow() {
        // M² = k² + m² < 0 everywhere once k drops below 1
        let g = PotentialGrid::quartic(10.0, 16, 1.0, [0.0, -0.9, 0.0]).unwrap();
        let opts = PotentialFlowOptions {
            t_end: -1.0,
            ..Default::default()
        };
        let out = flow_potential(&g, &minkowski(100.0), &opts).unwrap();
        match &out.termination {
            Termination::DomainStop { reason, .. } => assert!(reason.contains("node")),
            other => panic!("{other:?}"),
        }
        let last = &out.last().grid;
        assert!(mass_squared_profile(last).iter().all(|&m| m > 0.0));
    }

    #[test]
    fn default_extent() {
        assert_eq!(default_rho_max(0.01, 0.05, 1.0), 200.0);
        assert_eq!(default_rho_max(-4.0, 0.0, 1.0), 40_000.0);
    }
}
