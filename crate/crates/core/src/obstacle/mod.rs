//! Implicit time stepping of the parabolic obstacle problem for `u(x, t) = ∫₀ᵗ v(x, s) ds`.
//!
//! Each step solves the complementarity problem
//!
//! ```text
//! U ≥ 0,   (I/Δt − Δ_h) U − (U_prev/Δt + f) ≥ 0,   complementary,
//! ```
//!
//! on fluid nodes, with `U = datum · t` on the core ball and `U = 0` on the box faces. The weak
//! solution is recovered as the backward difference `V = (U − U_prev) / Δt`.

pub mod lcp;

use thiserror::Error;

use crate::frontmetrics::extract_front;
use crate::geometry::{GridProblem, NodeKind};
use crate::grid::GridFunction;
use crate::media::{build_f, LatentHeatField};
use crate::scalar::Scalar;

pub use lcp::{solve_lcp_psor, DenseMatrix, LcpError, LcpMatrix, LcpSystem, PsorParams, PsorStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObstacleError {
    #[error(transparent)]
    Lcp(#[from] LcpError),
    #[error("time step must be positive and finite (got {0})")]
    TimeStep(f64),
    #[error("weak solution V = {value:e} < 0 at node {node} exceeds round-off clamp")]
    NegativeVelocity { node: usize, value: f64 },
    #[error("positivity set reached the guard band of the box at t = {t} (radius {radius})")]
    DomainOverflow { t: f64, radius: f64 },
    #[error("snapshot time {0} outside [0, T]")]
    SnapshotOutOfRange(f64),
}

/// Relaxation factor for PSOR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation<T> {
    Fixed(T),
    /// SOR-optimal factor for the model problem on the current sweep window.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrdering {
    Lexicographic,
    RedBlack,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams<T> {
    pub relaxation: Relaxation<T>,
    pub tol: T,
    /// Defaults to `50 · nodes per axis` when `None`.
    pub max_iterations: Option<usize>,
    pub ordering: SweepOrdering,
    pub parallel: bool,
    /// Initial number of cells the sweep window extends beyond the current positivity set.
    pub window_margin: usize,
}

impl<T: Scalar> Default for SolverParams<T> {
    fn default() -> Self {
        Self {
            relaxation: Relaxation::Fixed(T::lit(1.5)),
            tol: T::lit(1e-10),
            max_iterations: None,
            ordering: SweepOrdering::Lexicographic,
            parallel: false,
            window_margin: 4,
        }
    }
}

/// `I/Δt − Δ_h` with the standard `2n + 1` point Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStencil<T> {
    axes: usize,
    strides: [usize; 3],
    len: usize,
    diag: T,
    inv_diag: T,
    coupling: T,
}

impl<T: Scalar> GridStencil<T> {
    pub fn new(problem: &GridProblem<T>, dt: T) -> Self {
        let grid = problem.grid();
        let h2 = grid.h() * grid.h();
        let axes = grid.dimension();
        let diag = T::one() / dt + T::from_usize_lossy(2 * axes) / h2;
        Self {
            axes,
            strides: grid.strides(),
            len: grid.len(),
            diag,
            inv_diag: T::one() / diag,
            coupling: T::one() / h2,
        }
    }

    /// Magnitude of the off-diagonal entries, `1/h²`.
    pub fn coupling(&self) -> T {
        self.coupling
    }
}

impl<T: Scalar> LcpMatrix<T> for GridStencil<T> {
    fn dim(&self) -> usize {
        self.len
    }
    #[inline]
    fn diagonal(&self, _i: usize) -> T {
        self.diag
    }
    #[inline]
    fn inv_diagonal(&self, _i: usize) -> T {
        self.inv_diag
    }
    #[inline]
    fn off_diagonal_dot(&self, i: usize, u: &[T]) -> T {
        let sy = self.strides[1];
        let mut s = u[i - 1] + u[i + 1] + u[i - sy] + u[i + sy];
        if self.axes == 3 {
            let sz = self.strides[2];
            s += u[i - sz] + u[i + sz];
        }
        -self.coupling * s
    }
}

/// Inclusive index box `lo..=hi` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Window {
    fn include(&mut self, c: [usize; 3]) {
        for d in 0..3 {
            self.lo[d] = self.lo[d].min(c[d]);
            self.hi[d] = self.hi[d].max(c[d]);
        }
    }

    fn dilate(&self, margin: usize, limit_lo: [usize; 3], limit_hi: [usize; 3]) -> Window {
        let mut w = *self;
        for d in 0..3 {
            w.lo[d] = self.lo[d].saturating_sub(margin).max(limit_lo[d]);
            w.hi[d] = (self.hi[d] + margin).min(limit_hi[d]);
        }
        w
    }

    fn extent(&self, d: usize) -> usize {
        self.hi[d] + 1 - self.lo[d]
    }
}

/// Discrete obstacle solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleState<T> {
    /// `U ≈ u(·, t)`.
    pub u: GridFunction<T>,
    /// `V ≈ u_t(·, t)`, the weak solution.
    pub v: GridFunction<T>,
    pub t: T,
    pub step_index: usize,
    /// Natural complementarity residual of the last solve.
    pub residual: T,
    pub iterations: usize,
}

impl<T: Scalar> ObstacleState<T> {
    /// `U = 0`, `V = v₀` at `t = 0`.
    pub fn initial(problem: &GridProblem<T>) -> Self {
        Self {
            u: GridFunction::zeros(problem.grid().clone()),
            v: problem.v0_function(),
            t: T::zero(),
            step_index: 0,
            residual: T::zero(),
            iterations: 0,
        }
    }

    /// Positivity mask of `U` with the relative threshold used for fronts.
    pub fn positivity(&self) -> Vec<bool> {
        let eps = positivity_threshold(&self.u);
        self.u.values.iter().map(|&x| x > eps).collect()
    }
}

/// `1e-12 · max U`; absolute zero tests are meaningless after iterative round-off.
pub fn positivity_threshold<T: Scalar>(u: &GridFunction<T>) -> T {
    T::lit(1e-12) * u.max_value().max(T::zero())
}

/// Bounding box of the nodes that may be nonzero at the next step: positive `U`, positive `v₀`,
/// and the core.
fn active_box<T: Scalar>(state: &ObstacleState<T>, problem: &GridProblem<T>) -> Window {
    let grid = problem.grid();
    let mut w = Window {
        lo: [usize::MAX; 3],
        hi: [0; 3],
    };
    let v0 = problem.v0();
    for (idx, kind) in problem.mask().iter().enumerate() {
        let live = match kind {
            NodeKind::Core => true,
            NodeKind::Fluid => state.u.values[idx] > T::zero() || v0[idx] > T::zero(),
            NodeKind::Far => false,
        };
        if live {
            w.include(grid.coords(idx));
        }
    }
    w
}

fn fluid_limits<T: Scalar>(problem: &GridProblem<T>) -> ([usize; 3], [usize; 3]) {
    let dims = problem.grid().dims();
    let mut lo = [0; 3];
    let mut hi = [0; 3];
    for d in 0..problem.dimension() {
        lo[d] = 1;
        hi[d] = dims[d] - 2;
    }
    (lo, hi)
}

/// Assembles the step `t → t + dt`: stencil, right-hand side `U_prev/dt + f` on fluid nodes,
/// identity rows on core (`datum · (t + dt)`) and far (`0`) nodes. Fluid nodes inside `window`
/// (all fluid nodes when `None`) are swept.
pub fn assemble_step<T: Scalar>(
    state: &ObstacleState<T>,
    problem: &GridProblem<T>,
    dt: T,
    f: &[T],
    window: Option<Window>,
    ordering: SweepOrdering,
) -> LcpSystem<T, GridStencil<T>> {
    let matrix = GridStencil::new(problem, dt);
    let t_next = state.t + dt;
    let datum = problem.datum();
    let mask = problem.mask();
    let inv_dt = T::one() / dt;
    let rhs: Vec<T> = mask
        .iter()
        .enumerate()
        .map(|(idx, kind)| match kind {
            NodeKind::Core => datum * t_next,
            NodeKind::Far => T::zero(),
            NodeKind::Fluid => state.u.values[idx] * inv_dt + f[idx],
        })
        .collect();
    let constrained: Vec<bool> = mask.iter().map(|k| *k == NodeKind::Fluid).collect();
    let (lim_lo, lim_hi) = fluid_limits(problem);
    let window = window.unwrap_or(Window {
        lo: lim_lo,
        hi: lim_hi,
    });
    let (sweep, colour_split) = sweep_order(problem, &constrained, &window, ordering);
    LcpSystem {
        matrix,
        rhs,
        constrained,
        sweep,
        colour_split,
    }
}

fn sweep_order<T: Scalar>(
    problem: &GridProblem<T>,
    constrained: &[bool],
    w: &Window,
    ordering: SweepOrdering,
) -> (Vec<u32>, Option<usize>) {
    let grid = problem.grid();
    let mut red = Vec::new();
    let mut black = Vec::new();
    for k in w.lo[2]..=w.hi[2] {
        for j in w.lo[1]..=w.hi[1] {
            for i in w.lo[0]..=w.hi[0] {
                let idx = grid.index([i, j, k]);
                if !constrained[idx] {
                    continue;
                }
                if ordering == SweepOrdering::RedBlack && (i + j + k) % 2 == 1 {
                    black.push(idx as u32);
                } else {
                    red.push(idx as u32);
                }
            }
        }
    }
    match ordering {
        SweepOrdering::Lexicographic => (red, None),
        SweepOrdering::RedBlack => {
            let split = red.len();
            red.extend(black);
            (red, Some(split))
        }
    }
}

/// SOR-optimal relaxation for `I/dt − Δ_h` on a box of the given node counts.
fn auto_omega<T: Scalar>(problem: &GridProblem<T>, dt: T, w: &Window) -> T {
    let n = problem.dimension();
    let h2 = problem.h() * problem.h();
    let mut off = T::zero();
    for d in 0..n {
        let cells = T::from_usize_lossy(w.extent(d) + 1);
        off += T::lit(2.0) * (T::PI() / cells).cos();
    }
    let rho = (off / h2) / (T::one() / dt + T::from_usize_lossy(2 * n) / h2);
    let omega = T::lit(2.0) / (T::one() + (T::one() - rho * rho).max(T::zero()).sqrt());
    omega.min(T::lit(1.99))
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<T> {
    pub step_index: usize,
    pub t: T,
    pub residual: T,
    pub iterations: usize,
    pub front_min_radius: T,
    pub front_max_radius: T,
}

/// Advances one implicit step.
pub fn advance<T: Scalar>(
    state: &ObstacleState<T>,
    problem: &GridProblem<T>,
    f: &[T],
    dt: T,
    params: &SolverParams<T>,
) -> Result<ObstacleState<T>, ObstacleError> {
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(ObstacleError::TimeStep(dt.as_f64()));
    }
    let grid = problem.grid();
    let n = problem.dimension();
    let dims = grid.dims();
    let (lim_lo, lim_hi) = fluid_limits(problem);
    let seed = active_box(state, problem);

    // Warm start: linear extrapolation of U in time.
    let mut u: Vec<T> = state
        .u
        .values
        .iter()
        .zip(&state.v.values)
        .map(|(&u, &v)| (u + dt * v).max(T::zero()))
        .collect();
    for (x, kind) in u.iter_mut().zip(problem.mask()) {
        if *kind == NodeKind::Far {
            *x = T::zero();
        }
    }

    let max_iterations = params.max_iterations.unwrap_or(50 * grid.nodes_per_axis());
    let mut margin = params.window_margin.max(1);
    let mut total_iterations = 0;
    loop {
        let window = seed.dilate(margin, lim_lo, lim_hi);
        // Nodes outside the window are pinned at zero for this solve.
        let sys = assemble_step(state, problem, dt, f, Some(window), params.ordering);
        for idx in 0..u.len() {
            if sys.constrained[idx] && !in_window(grid.coords(idx), &window, n) {
                u[idx] = T::zero();
            }
        }
        let omega = match params.relaxation {
            Relaxation::Fixed(w) => w,
            Relaxation::Auto => auto_omega(problem, dt, &window),
        };
        let psor = PsorParams {
            omega,
            tol: params.tol,
            max_iterations: max_iterations.saturating_sub(total_iterations).max(1),
            check_every: 8,
            parallel: params.parallel,
        };
        let stats = solve_lcp_psor(&sys, &psor, &mut u).map_err(|e| match e {
            LcpError::NoConvergence { residual, .. } => {
                ObstacleError::Lcp(LcpError::NoConvergence {
                    iterations: max_iterations,
                    residual,
                })
            }
            other => ObstacleError::Lcp(other),
        })?;
        total_iterations += stats.iterations;

        // A window is valid when no positive node sits on a face that can still grow.
        let touches = window_face_positive(&u, grid, &window, &lim_lo, &lim_hi, n, dims);
        if touches {
            margin *= 2;
            continue;
        }

        let inv_dt = T::one() / dt;
        let clamp = T::lit(1e-12) * problem.datum();
        let mut v = Vec::with_capacity(u.len());
        for (idx, (&new, &old)) in u.iter().zip(&state.u.values).enumerate() {
            let mut vel = (new - old) * inv_dt;
            if vel < T::zero() {
                if vel >= -clamp {
                    vel = T::zero();
                } else {
                    return Err(ObstacleError::NegativeVelocity {
                        node: idx,
                        value: vel.as_f64(),
                    });
                }
            }
            v.push(vel);
        }
        return Ok(ObstacleState {
            u: GridFunction::new(grid.clone(), u),
            v: GridFunction::new(grid.clone(), v),
            t: state.t + dt,
            step_index: state.step_index + 1,
            residual: stats.residual,
            iterations: total_iterations,
        });
    }
}

fn in_window(c: [usize; 3], w: &Window, n: usize) -> bool {
    (0..n).all(|d| c[d] >= w.lo[d] && c[d] <= w.hi[d])
}

fn window_face_positive<T: Scalar>(
    u: &[T],
    grid: &crate::grid::CartesianGrid<T>,
    w: &Window,
    lim_lo: &[usize; 3],
    lim_hi: &[usize; 3],
    n: usize,
    _dims: [usize; 3],
) -> bool {
    for k in w.lo[2]..=w.hi[2] {
        for j in w.lo[1]..=w.hi[1] {
            for i in w.lo[0]..=w.hi[0] {
                let c = [i, j, k];
                let on_growable_face = (0..n).any(|d| {
                    (c[d] == w.lo[d] && w.lo[d] > lim_lo[d])
                        || (c[d] == w.hi[d] && w.hi[d] < lim_hi[d])
                });
                if on_growable_face && u[grid.index(c)] > T::zero() {
                    return true;
                }
            }
        }
    }
    false
}

/// Time horizon, step and snapshot schedule of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSchedule<T> {
    pub t_end: T,
    pub dt: T,
    /// Times at which states are kept; each is rounded to the nearest step.
    pub snapshots: Vec<T>,
    /// Positive nodes closer than this many cells to a box face abort the run.
    pub guard_cells: usize,
}

impl<T: Scalar> RunSchedule<T> {
    pub fn new(t_end: T, dt: T, snapshots: Vec<T>) -> Self {
        Self {
            t_end,
            dt,
            snapshots,
            guard_cells: 4,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub snapshots: Vec<ObstacleState<T>>,
    pub log: Vec<StepRecord<T>>,
}

/// Runs the obstacle solver from `t = 0`, keeping the requested snapshots.
pub fn run<T: Scalar>(
    problem: &GridProblem<T>,
    field: &LatentHeatField<T>,
    schedule: &RunSchedule<T>,
    params: &SolverParams<T>,
) -> Result<RunOutput<T>, ObstacleError> {
    let f = build_f(field, problem.v0(), problem);
    run_with_f(problem, &f, schedule, params)
}

/// [`run`] with a precomputed right-hand side `f`.
pub fn run_with_f<T: Scalar>(
    problem: &GridProblem<T>,
    f: &[T],
    schedule: &RunSchedule<T>,
    params: &SolverParams<T>,
) -> Result<RunOutput<T>, ObstacleError> {
    let dt = schedule.dt;
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(ObstacleError::TimeStep(dt.as_f64()));
    }
    let steps = schedule.steps();
    let mut wanted: Vec<usize> = Vec::with_capacity(schedule.snapshots.len());
    for &t in &schedule.snapshots {
        if t < T::zero() || t > schedule.t_end * (T::one() + T::lit(1e-12)) {
            return Err(ObstacleError::SnapshotOutOfRange(t.as_f64()));
        }
        wanted.push((t / dt).round().to_usize().unwrap_or(0).min(steps));
    }
    wanted.sort_unstable();
    wanted.dedup();

    let mut state = ObstacleState::initial(problem);
    let mut out = RunOutput {
        snapshots: Vec::new(),
        log: Vec::new(),
    };
    let mut next = 0;
    if wanted.first() == Some(&0) {
        out.snapshots.push(state.clone());
        next = 1;
    }
    for step in 1..=steps {
        let mut s = advance(&state, problem, f, dt, params)?;
        // Accumulate time by multiplication to avoid drift.
        s.t = dt * T::from_usize_lossy(step);
        check_guard(&s, problem, schedule.guard_cells)?;
        let front = extract_front(&s.u);
        let (rmin, rmax) = front.radial_extent().unwrap_or((T::zero(), T::zero()));
        out.log.push(StepRecord {
            step_index: s.step_index,
            t: s.t,
            residual: s.residual,
            iterations: s.iterations,
            front_min_radius: rmin,
            front_max_radius: rmax,
        });
        if next < wanted.len() && wanted[next] == step {
            out.snapshots.push(s.clone());
            next += 1;
        }
        state = s;
    }
    Ok(out)
}

fn check_guard<T: Scalar>(
    state: &ObstacleState<T>,
    problem: &GridProblem<T>,
    guard: usize,
) -> Result<(), ObstacleError> {
    let grid = problem.grid();
    let dims = grid.dims();
    let n = problem.dimension();
    let eps = positivity_threshold(&state.u);
    for (idx, &x) in state.u.values.iter().enumerate() {
        if x <= eps || problem.mask()[idx] != NodeKind::Fluid {
            continue;
        }
        let c = grid.coords(idx);
        if (0..n).any(|d| c[d] <= guard || c[d] + guard >= dims[d] - 1) {
            return Err(ObstacleError::DomainOverflow {
                t: state.t.as_f64(),
                radius: grid.radius(idx).as_f64(),
            });
        }
    }
    Ok(())
}

/// Both sides of the discrete enthalpy identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnthalpyBalance<T> {
    /// `Σ_fluid [V + (1/g) 1{U > 0, v₀ = 0}] hⁿ`.
    pub stored: T,
    /// Same sum at `t = 0`, i.e. `Σ v₀ hⁿ`.
    pub stored_initial: T,
    /// Time-integrated flux through `∂K`: `Σ_{core c ~ fluid i} (U_c − U_i) h^{n−2}`.
    pub flux: T,
}

impl<T: Scalar> EnthalpyBalance<T> {
    pub fn relative_error(&self) -> T {
        let gained = self.stored - self.stored_initial;
        (gained - self.flux).abs() / self.flux.abs().max(T::min_positive_value())
    }
}

pub fn enthalpy_balance<T: Scalar>(
    state: &ObstacleState<T>,
    problem: &GridProblem<T>,
    field: &LatentHeatField<T>,
) -> EnthalpyBalance<T> {
    let grid = problem.grid();
    let n = problem.dimension();
    let h = grid.h();
    let cell = h.powi(n as i32);
    let eps = positivity_threshold(&state.u);
    let v0 = problem.v0();
    let mask = problem.mask();
    let strides = grid.strides();
    let mut stored = T::zero();
    let mut initial = T::zero();
    let mut flux = T::zero();
    let mut x = [T::zero(); 3];
    for idx in 0..grid.len() {
        if mask[idx] != NodeKind::Fluid {
            continue;
        }
        initial += v0[idx];
        stored += state.v.values[idx];
        if state.u.values[idx] > eps && v0[idx] == T::zero() {
            grid.position(idx, &mut x);
            stored += T::one() / field.eval(&x[..n]);
        }
        for &s in &strides[..n] {
            for nb in [idx - s, idx + s] {
                if mask[nb] == NodeKind::Core {
                    flux += state.u.values[nb] - state.u.values[idx];
                }
            }
        }
    }
    EnthalpyBalance {
        stored: stored * cell,
        stored_initial: initial * cell,
        flux: flux * h.powi(n as i32 - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_grid, InitialProfile};

    fn small_problem() -> GridProblem<f64> {
        make_grid(2, 1.0 / 32.0, 1.0, 0.125, 0.25, 1.0, InitialProfile::Linear).unwrap()
    }

    #[test]
    fn stencil_arithmetic() {
        let p = make_grid(2, 1.0, 12.0, 1.0, 5.0, 1.0, InitialProfile::Linear).unwrap();
        let s = GridStencil::new(&p, 1.0);
        assert_eq!(s.diagonal(0), 5.0);
        assert_eq!(s.coupling(), 1.0);
        let mut u = vec![0.0; p.len()];
        let c = p.grid().index([5, 5, 0]);
        u[c + 1] = 1.0;
        u[c - 1] = 1.0;
        assert_eq!(s.off_diagonal_dot(c, &u), -2.0);
    }

    #[test]
    fn rhs_assembly() {
        let p = small_problem();
        let mut state = ObstacleState::initial(&p);
        let fluid = p.mask().iter().position(|k| *k == NodeKind::Fluid).unwrap();
        state.u.values[fluid] = 2.0;
        state.t = 1.0;
        let mut f = vec![0.0; p.len()];
        f[fluid] = -1.0;
        let sys = assemble_step(&state, &p, 0.5, &f, None, SweepOrdering::Lexicographic);
        assert_eq!(sys.rhs[fluid], 3.0);
        let core = p.grid().index([32, 32, 0]);
        assert!(!sys.constrained[core]);
        assert_eq!(sys.rhs[core], 1.5);
        assert!(!sys.constrained[0]);
        assert_eq!(sys.rhs[0], 0.0);
    }

    #[test]
    fn zero_data_stays_zero_far_from_core() {
        // v0 = 0 off K: f = -1/g everywhere outside the core.
        let p = small_problem();
        let p = p.with_v0(vec![0.0; p.len()]);
        let g = LatentHeatField::constant(1.0, 2).unwrap();
        let f = build_f(&g, p.v0(), &p);
        let s0 = ObstacleState::initial(&p);
        let s1 = advance(&s0, &p, &f, 1e-3, &SolverParams::default()).unwrap();
        for idx in 0..p.len() {
            if p.grid().radius(idx) > 0.5 {
                assert_eq!(s1.u.values[idx], 0.0);
                assert_eq!(s1.v.values[idx], 0.0);
            }
        }
    }

    #[test]
    fn step_is_monotone_and_complementary() {
        let p = small_problem();
        let g = LatentHeatField::constant(1.0, 2).unwrap();
        let f = build_f(&g, p.v0(), &p);
        let params = SolverParams {
            relaxation: Relaxation::Auto,
            ..Default::default()
        };
        let mut s = ObstacleState::initial(&p);
        for _ in 0..5 {
            let next = advance(&s, &p, &f, 0.01, &params).unwrap();
            for (a, b) in next.u.values.iter().zip(&s.u.values) {
                assert!(a >= b);
            }
            assert!(next.u.values.iter().all(|&x| x >= 0.0));
            let sys = assemble_step(&s, &p, 0.01, &f, None, SweepOrdering::Lexicographic);
            assert!(sys.full_natural_residual(&next.u.values) <= 1e-10 * sys.scale() * 1.0001);
            s = next;
        }
    }

    #[test]
    fn red_black_matches_lexicographic_solution() {
        let p = small_problem();
        let g = LatentHeatField::constant(1.0, 2).unwrap();
        let f = build_f(&g, p.v0(), &p);
        let s0 = ObstacleState::initial(&p);
        let lex = advance(&s0, &p, &f, 0.01, &SolverParams::default()).unwrap();
        for parallel in [false, true] {
            let rb = advance(
                &s0,
                &p,
                &f,
                0.01,
                &SolverParams {
                    ordering: SweepOrdering::RedBlack,
                    parallel,
                    ..Default::default()
                },
            )
            .unwrap();
            for (a, b) in lex.u.values.iter().zip(&rb.u.values) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn parallel_red_black_is_bitwise_serial() {
        let p = small_problem();
        let g = LatentHeatField::constant(1.0, 2).unwrap();
        let f = build_f(&g, p.v0(), &p);
        let s0 = ObstacleState::initial(&p);
        let run = |parallel| {
            advance(
                &s0,
                &p,
                &f,
                0.01,
                &SolverParams {
                    ordering: SweepOrdering::RedBlack,
                    parallel,
                    ..Default::default()
                },
            )
            .unwrap()
        };
        assert_eq!(run(false).u.values, run(true).u.values);
    }

    #[test]
    fn guard_band_aborts() {
        let p = make_grid(
            2,
            1.0 / 16.0,
            0.75,
            0.125,
            0.375,
            1.0,
            InitialProfile::Linear,
        )
        .unwrap();
        let g = LatentHeatField::constant(1.0, 2).unwrap();
        let schedule = RunSchedule::new(5.0, 0.1, vec![5.0]);
        let err = run(&p, &g, &schedule, &SolverParams::default()).unwrap_err();
        assert!(matches!(err, ObstacleError::DomainOverflow { .. }));
    }

    #[test]
    fn rejects_bad_step() {
        let p = small_problem();
        let f = vec![0.0; p.len()];
        let s0 = ObstacleState::initial(&p);
        assert!(matches!(
            advance(&s0, &p, &f, 0.0, &SolverParams::default()),
            Err(ObstacleError::TimeStep(_))
        ));
    }
}
