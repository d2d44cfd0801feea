//! Time steps of the grid solver against a direct active-set solve, and comparison of ordered data.

use stefan_homog::geometry::{make_grid, GridProblem, InitialProfile, NodeKind};
use stefan_homog::harness::audit_comparison;
use stefan_homog::media::{build_f, LatentHeatField};
use stefan_homog::obstacle::lcp::{LcpMatrix, LcpSystem};
use stefan_homog::obstacle::{
    advance, assemble_step, ObstacleState, Relaxation, RunSchedule, SolverParams, SweepOrdering,
};

/// Dense copy of the system matrix, recovered row by row from residuals of unit vectors.
fn dense<A: LcpMatrix<f64>>(sys: &LcpSystem<f64, A>) -> Vec<Vec<f64>> {
    let n = sys.dim();
    let zero = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        e[j] = 1.0;
        for (i, row) in m.iter_mut().enumerate() {
            row[j] = sys.row_residual(i, &e) - sys.row_residual(i, &zero);
        }
        e[j] = 0.0;
    }
    m
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Active-set method for M-matrix LCPs: grow the free set by every row whose slack is negative and
/// re-solve the free block exactly. The free set grows monotonically, so it stops in at most `n`
/// rounds at the exact solution.
fn active_set_solve<A: LcpMatrix<f64>>(sys: &LcpSystem<f64, A>) -> Vec<f64> {
    let m = dense(sys);
    let q = &sys.rhs;
    let n = q.len();
    let mut free: Vec<bool> = sys.constrained.iter().map(|c| !c).collect();
    loop {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let a = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| m[i][j]).collect())
            .collect();
        let x = gauss_solve(a, idx.iter().map(|&i| q[i]).collect());
        let mut u = vec![0.0; n];
        for (&i, xi) in idx.iter().zip(x) {
            u[i] = xi;
        }
        let mut grew = false;
        for i in 0..n {
            let w: f64 = m[i].iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() - q[i];
            if !free[i] && w < -1e-12 * (1.0 + q[i].abs()) {
                free[i] = true;
                grew = true;
            }
        }
        if !grew {
            return u;
        }
    }
}

fn small_problem() -> GridProblem<f64> {
    // 25 × 25 nodes.
    make_grid(
        2,
        1.0 / 16.0,
        0.75,
        0.125,
        0.375,
        1.0,
        InitialProfile::Linear,
    )
    .unwrap()
}

fn solver() -> SolverParams<f64> {
    SolverParams {
        relaxation: Relaxation::Auto,
        tol: 1e-13,
        ..SolverParams::default()
    }
}

#[test]
fn grid_steps_match_active_set_solution() {
    let p = small_problem();
    let g = LatentHeatField::periodic_checkerboard(0.5, 1.0, 0.25, 2).unwrap();
    let f = build_f(&g, p.v0(), &p);
    let dt = 1.0 / 32.0;
    let mut state = ObstacleState::initial(&p);
    for _ in 0..4 {
        let sys = assemble_step(&state, &p, dt, &f, None, SweepOrdering::Lexicographic);
        let exact = active_set_solve(&sys);
        let next = advance(&state, &p, &f, dt, &solver()).unwrap();
        let err = next
            .u
            .values
            .iter()
            .zip(&exact)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let scale = exact.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        assert!(err <= 1e-9 * scale, "step {}: {err}", next.step_index);
        state = next;
    }
    assert!(state.u.values.iter().any(|&x| x > 0.0));
}

#[test]
fn ordered_initial_data_give_ordered_solutions() {
    let p = small_problem();
    // Raise v₀ on the fluid part of Ω₀ and switch it on in a thin ring just outside.
    let bumped: Vec<f64> = (0..p.len())
        .map(|idx| {
            let r = p.grid().radius(idx);
            match p.mask()[idx] {
                NodeKind::Fluid if p.v0()[idx] > 0.0 => p.v0()[idx] + 0.2,
                NodeKind::Fluid if r < 0.4375 => 0.1,
                _ => p.v0()[idx],
            }
        })
        .collect();
    let high = p.with_v0(bumped);
    let g = LatentHeatField::constant(1.0, 2).unwrap();
    let f_low = build_f(&g, p.v0(), &p);
    let f_high = build_f(&g, high.v0(), &high);
    assert!(f_low.iter().zip(&f_high).all(|(a, b)| a <= b));

    let schedule = RunSchedule {
        guard_cells: 1,
        ..RunSchedule::new(0.125, 1.0 / 32.0, vec![0.03125, 0.0625, 0.125])
    };
    let report = audit_comparison((&p, &f_low), (&high, &f_high), &schedule, &solver()).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
    assert!(report.max_violation <= 0.0);

    // The two trajectories are also the exact LCP solutions, step by step.
    for (problem, f) in [(&p, &f_low), (&high, &f_high)] {
        let mut state = ObstacleState::initial(problem);
        for _ in 0..3 {
            let sys = assemble_step(
                &state,
                problem,
                1.0 / 32.0,
                f,
                None,
                SweepOrdering::RedBlack,
            );
            let exact = active_set_solve(&sys);
            state = advance(&state, problem, f, 1.0 / 32.0, &solver()).unwrap();
            for (x, y) in state.u.values.iter().zip(&exact) {
                assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }
    }
}

#[test]
fn identical_data_compare_equal() {
    let p = small_problem();
    let g = LatentHeatField::constant(0.5, 2).unwrap();
    let f = build_f(&g, p.v0(), &p);
    let schedule = RunSchedule {
        guard_cells: 1,
        ..RunSchedule::new(0.125, 1.0 / 32.0, vec![0.125])
    };
    let report = audit_comparison((&p, &f), (&p, &f), &schedule, &solver()).unwrap();
    assert!(report.passed());
    assert_eq!(report.max_violation, 0.0);
}
