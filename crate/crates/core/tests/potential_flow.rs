use lfrg::beta::{BetaMode, BetaSystem};
use lfrg::kernels::{Background, MinkowskiVacuum, MuMode};
use lfrg::ode::{integrate, FlowProblem};
use lfrg::potential::{couplings_at_origin, default_rho_max, flow_potential, PotentialFlowOptions, PotentialGrid};

// W′(M²) < 0 for M² < μ²/e, which keeps the flow towards the infrared well posed
// over the whole grid.
const MU2: f64 = 100.0;
const INITIAL: [f64; 3] = [0.0, 0.01, 0.05];

fn background() -> Background {
    Background::MinkowskiVacuum(MinkowskiVacuum {
        d: 4,
        mu: MuMode::Fixed { mu2: MU2 },
    })
}

fn opts() -> PotentialFlowOptions {
    PotentialFlowOptions {
        t0: 0.0,
        t_end: -0.5,
        ..Default::default()
    }
}

fn grid_flow(n: usize) -> Vec<f64> {
    let rho_max = default_rho_max(INITIAL[1], INITIAL[2], 1.0);
    let g = PotentialGrid::quartic(rho_max, n, 1.0, INITIAL).unwrap();
    // U reaches O(100) at the far end, so the time error must sit well below
    // the O(h²) spatial error being measured
    let opts = PotentialFlowOptions {
        rel_tol: 1e-13,
        abs_tol: 1e-13,
        ..opts()
    };
    let out = flow_potential(&g, &background(), &opts).unwrap();
    assert!(out.termination.is_complete(), "{:?}", out.termination);
    out.last().grid.values.clone()
}

pub fn truncated_oracle() -> [f64; 3] {
    let sys = BetaSystem::MinkowskiDimensionful {
        mu: MuMode::Fixed { mu2: MU2 },
        cutoff: 1.0,
        mode: BetaMode::Transcribed,
    };
    let traj = integrate(&FlowProblem::new(sys, INITIAL.to_vec(), 0.0, -0.5)).unwrap();
    assert!(traj.termination.is_complete());
    traj.last().state.clone().try_into().unwrap()
}

#[test]
fn grid_flow_matches_truncation_at_origin() {
    let rho_max = default_rho_max(INITIAL[1], INITIAL[2], 1.0);
    let g = PotentialGrid::quartic(rho_max, 256, 1.0, INITIAL).unwrap();
    let out = flow_potential(&g, &background(), &opts()).unwrap();
    let grid = couplings_at_origin(&out.last().grid);
    let oracle = truncated_oracle();
    for i in 1..3 {
        let rel = (grid[i] - oracle[i]).abs() / oracle[i].abs();
        assert!(rel <= 1e-3, "coupling {i}: grid {} vs truncation {} ({rel:e})", grid[i], oracle[i]);
    }
}

#[test]
fn grid_refinement_is_second_order() {
    let coarse = grid_flow(129);
    let mid = grid_flow(257);
    let fine = grid_flow(513);
    let e1 = coarse.iter().enumerate().map(|(i, v)| (v - mid[2 * i]).abs()).fold(0.0, f64::max);
    let e2 = mid
        .iter()
        .step_by(2)
        .enumerate()
        .map(|(i, v)| (v - fine[4 * i]).abs())
        .fold(0.0, f64::max);
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "observed order {order} ({e1:e}, {e2:e})");
}
