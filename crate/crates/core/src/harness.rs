//! Convergence studies along a `λ` ladder and invariant audits of completed runs.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::RunConfig;
use crate::frontmetrics::{extract_front, hausdorff, sphere_deviation, FrontError, FrontSet};
use crate::geometry::{make_grid, GeometryError, GridProblem, InitialProfile, NodeKind};
use crate::grid::CartesianGrid;
use crate::media::{build_f, LatentHeatField, MediaError};
use crate::obstacle::{
    enthalpy_balance, positivity_threshold, run, run_with_f, EnthalpyBalance, ObstacleError,
    ObstacleState, RunSchedule, SolverParams, StepRecord,
};
use crate::reference::{cstar, rho, ReferenceError, SelfSimilarSolution};
use crate::rescale::{make_params, rescale_snapshot, RescaleError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Obstacle(#[from] ObstacleError),
    #[error(transparent)]
    Rescale(#[from] RescaleError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Front(#[from] FrontError),
}

/// A `λ` ladder in original variables compared against the homogenized point-source limit.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dimension: usize,
    /// Mesh size of every original-variable run.
    pub h: f64,
    pub core_radius: f64,
    pub omega0_radius: f64,
    pub datum: f64,
    pub profile: InitialProfile,
    pub field: LatentHeatField<f64>,
    pub average_samples: usize,
    pub lambdas: Vec<f64>,
    pub rescaled_times: Vec<f64>,
    /// `(r_inner, r_outer)` in rescaled variables.
    pub annulus: (f64, f64),
    /// Mesh of the rescaled comparison grid.
    pub target_h: f64,
    /// Time step in rescaled units; the original step is `λ` times larger.
    pub rescaled_dt: f64,
    /// Box half-width in rescaled units; derived from the limit front when `None`.
    pub box_extent: Option<f64>,
    /// Multipliers of the reference amplitude to compare against as well.
    pub amplitude_probes: Vec<f64>,
    pub solver: SolverParams<f64>,
    pub guard_cells: usize,
}

impl StudyConfig {
    pub fn from_run_config(c: &RunConfig) -> Result<Self, HarnessError> {
        Ok(Self {
            dimension: c.grid.dimension,
            h: c.grid.h,
            core_radius: c.core.radius,
            omega0_radius: c.omega0.radius,
            datum: c.core.datum,
            profile: c.omega0.profile,
            field: c.field()?,
            average_samples: c.media.average_samples,
            lambdas: c.study.lambdas.clone(),
            rescaled_times: c.study.rescaled_times.clone(),
            annulus: (c.study.annulus_inner, c.study.annulus_outer),
            target_h: c.rescale.target_h,
            rescaled_dt: c.study.rescaled_dt,
            box_extent: c.study.box_extent,
            amplitude_probes: c.study.amplitude_probes.clone(),
            solver: c.solver_params(),
            guard_cells: c.time.guard_cells,
        })
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if !(self.annulus.0 > 0.0 && self.annulus.0 < self.annulus.1) {
            return bad("annulus must satisfy 0 < r_inner < r_outer");
        }
        if self.rescaled_times.is_empty() || self.rescaled_times.iter().any(|&t| !(t > 0.0)) {
            return bad("rescaled times must be positive");
        }
        if self.lambdas.is_empty() || !self.lambdas.windows(2).all(|w| w[0] < w[1]) {
            return bad("lambdas must be strictly increasing");
        }
        if !(self.rescaled_dt > 0.0 && self.target_h > 0.0) {
            return bad("rescaled_dt and target_h must be positive");
        }
        Ok(())
    }

    /// Limit amplitude `C*` of the point source.
    pub fn amplitude(&self) -> f64 {
        cstar(self.core_radius, self.datum, self.dimension)
    }

    fn t_max(&self) -> f64 {
        self.rescaled_times.iter().copied().fold(0.0, f64::max)
    }

    /// Box half-width in rescaled units.
    pub fn rescaled_box(&self, latent: f64) -> f64 {
        self.box_extent.unwrap_or_else(|| {
            let front = rho(self.amplitude(), latent, self.dimension, self.t_max());
            (1.3 * front).max(self.annulus.1) + self.target_h
        })
    }

    /// Problem in original variables for one `λ`.
    pub fn problem_for(&self, lambda: f64, latent: f64) -> Result<GridProblem<f64>, HarnessError> {
        let p = make_params(lambda, self.dimension)?;
        let margin = (self.guard_cells + 2) as f64 * self.h;
        let extent =
            (p.space_factor * self.rescaled_box(latent) + margin).max(self.omega0_radius + margin);
        Ok(make_grid(
            self.dimension,
            self.h,
            extent,
            self.core_radius,
            self.omega0_radius,
            self.datum,
            self.profile,
        )?)
    }

    /// `<1/g>` sampled over the box of the largest `λ`.
    pub fn latent_heat(&self) -> Result<f64, HarnessError> {
        let lambda = *self.lambdas.last().expect("validated non-empty");
        let s = make_params(lambda, self.dimension)?.space_factor;
        let window = 2.0 * (s * self.annulus.1).max(self.field.period());
        Ok(self
            .field
            .averaged_latent_heat(window, self.average_samples)?)
    }
}

/// Errors of one `(λ, t)` evaluation, in rescaled variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub lambda: f64,
    pub t_rescaled: f64,
    pub sup_err_v: f64,
    pub sup_err_u: f64,
    pub hausdorff: f64,
    pub dev_sphere: f64,
}

/// `sup |v^λ − V_{f·C*, L}|` on the annulus for a probe multiplier `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub lambda: f64,
    pub t_rescaled: f64,
    pub factor: f64,
    pub sup_err_v: f64,
}

/// Audits of the original-variable run behind one `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaAudit {
    pub lambda: f64,
    pub monotonicity: AuditReport,
    pub enthalpy: EnthalpyBalance<f64>,
    pub steps: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub probes: Vec<ProbeRow>,
    pub audits: Vec<LambdaAudit>,
    /// `(λ, message)` for every `λ` whose run failed; its rows carry NaN.
    pub failures: Vec<(f64, String)>,
    pub cstar: f64,
    pub l_hom: f64,
    pub grid_h: f64,
    pub seed: u64,
}

impl StudyReport {
    pub fn row(&self, lambda: f64, t: f64) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.lambda == lambda && r.t_rescaled == t)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "lambda,t_rescaled,sup_err_v,sup_err_u,hausdorff,dev_sphere,cstar,L_hom,grid_h,seed\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.lambda,
                r.t_rescaled,
                r.sup_err_v,
                r.sup_err_u,
                r.hausdorff,
                r.dev_sphere,
                self.cstar,
                self.l_hom,
                self.grid_h,
                self.seed
            );
        }
        s
    }

    pub fn probes_csv(&self) -> String {
        let mut s = String::from("lambda,t_rescaled,amplitude_factor,amplitude,sup_err_v\n");
        for p in &self.probes {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                p.lambda,
                p.t_rescaled,
                p.factor,
                p.factor * self.cstar,
                p.sup_err_v
            );
        }
        s
    }
}

struct LambdaOutcome {
    rows: Vec<StudyRow>,
    probes: Vec<ProbeRow>,
    audit: LambdaAudit,
}

/// Runs every `λ` of the ladder (in parallel on the current rayon pool) and compares the
/// rescaled solutions with `V_{C*, L}` / `U_{C*, L}` on the annulus. Rows are ordered by
/// `(λ, t)` regardless of scheduling.
pub fn convergence_study(config: &StudyConfig) -> Result<StudyReport, HarnessError> {
    config.validate()?;
    let l_hom = config.latent_heat()?;
    let outcomes: Vec<Result<LambdaOutcome, HarnessError>> = config
        .lambdas
        .par_iter()
        .map(|&lambda| study_lambda(config, lambda, l_hom))
        .collect();
    let mut report = StudyReport {
        rows: Vec::new(),
        probes: Vec::new(),
        audits: Vec::new(),
        failures: Vec::new(),
        cstar: config.amplitude(),
        l_hom,
        grid_h: config.h,
        seed: config.field.seed(),
    };
    for (&lambda, outcome) in config.lambdas.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                report.rows.extend(o.rows);
                report.probes.extend(o.probes);
                report.audits.push(o.audit);
            }
            Err(e) => {
                report.failures.push((lambda, e.to_string()));
                for &t in &config.rescaled_times {
                    report.rows.push(StudyRow {
                        lambda,
                        t_rescaled: t,
                        sup_err_v: f64::NAN,
                        sup_err_u: f64::NAN,
                        hausdorff: f64::NAN,
                        dev_sphere: f64::NAN,
                    });
                }
            }
        }
    }
    Ok(report)
}

fn study_lambda(
    config: &StudyConfig,
    lambda: f64,
    l_hom: f64,
) -> Result<LambdaOutcome, HarnessError> {
    let n = config.dimension;
    let params = make_params(lambda, n)?;
    let problem = config.problem_for(lambda, l_hom)?;
    let dt = config.rescaled_dt * params.time_factor;
    let mut snapshots = vec![0.0];
    snapshots.extend(
        config
            .rescaled_times
            .iter()
            .map(|&t| t * params.time_factor),
    );
    let schedule = RunSchedule {
        t_end: config.t_max() * params.time_factor,
        dt,
        snapshots,
        guard_cells: config.guard_cells,
    };
    let out = run(&problem, &config.field, &schedule, &config.solver)?;

    let amplitude = config.amplitude();
    let reference = SelfSimilarSolution::new(amplitude, l_hom, n)?;
    let probes: Vec<(f64, SelfSimilarSolution<f64>)> = config
        .amplitude_probes
        .iter()
        .map(|&f| SelfSimilarSolution::new(f * amplitude, l_hom, n).map(|s| (f, s)))
        .collect::<Result<_, _>>()?;
    let target = CartesianGrid::covering(n, config.target_h, config.annulus.1);
    let (r_in, r_out) = config.annulus;

    let mut rows = Vec::new();
    let mut probe_rows = Vec::new();
    for (snap, &t) in out.snapshots[1..].iter().zip(&config.rescaled_times) {
        let (v_l, u_l) = rescale_snapshot(&snap.u, &snap.v, &params, &target)?;
        let mut err_v = 0.0f64;
        let mut err_u = 0.0f64;
        let mut probe_err = vec![0.0f64; probes.len()];
        for idx in 0..target.len() {
            let r = target.radius(idx);
            if r < r_in || r > r_out {
                continue;
            }
            let vl = v_l.values[idx];
            err_v = err_v.max((vl - reference.v(r, t)?).abs());
            err_u = err_u.max((u_l.values[idx] - reference.u(r, t)?).abs());
            for (e, (_, s)) in probe_err.iter_mut().zip(&probes) {
                *e = e.max((vl - s.v(r, t)?).abs());
            }
        }
        let front = extract_front(&snap.u)
            .scaled(1.0 / params.space_factor)
            .with_time(t);
        let spacing = front.h.min(config.target_h) / 2.0;
        let sphere = FrontSet::sphere(n, reference.rho(t), spacing, t);
        let hd = hausdorff(&front, &sphere)?;
        let dev = sphere_deviation(&front, &[0.0; 3][..n])?;
        rows.push(StudyRow {
            lambda,
            t_rescaled: t,
            sup_err_v: err_v,
            sup_err_u: err_u,
            hausdorff: hd,
            dev_sphere: dev.deviation,
        });
        for ((f, _), e) in probes.iter().zip(probe_err) {
            probe_rows.push(ProbeRow {
                lambda,
                t_rescaled: t,
                factor: *f,
                sup_err_v: e,
            });
        }
    }
    let last = out.snapshots.last().expect("at least the initial snapshot");
    let audit = LambdaAudit {
        lambda,
        monotonicity: audit_monotonicity(&problem, &out.snapshots),
        enthalpy: enthalpy_balance(last, &problem, &config.field),
        steps: out.log.len(),
        iterations: out.log.iter().map(|r: &StepRecord<f64>| r.iterations).sum(),
    };
    Ok(LambdaOutcome {
        rows,
        probes: probe_rows,
        audit,
    })
}

/// One named check with an optional human-readable witness of its failure.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    pub witness: Option<String>,
}

impl AuditCheck {
    fn ok(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            witness: None,
        }
    }
    fn fail(name: &'static str, witness: String) -> Self {
        Self {
            name,
            passed: false,
            witness: Some(witness),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
    /// `max_t sup_{Ω₀} v₀ / max(V(·, t), ε)`: empirical constant of weak monotonicity, reported
    /// but never thresholded.
    pub c_mono: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = write!(s, "{}: {}", c.name, if c.passed { "pass" } else { "FAIL" });
            if let Some(w) = &c.witness {
                let _ = write!(s, " ({w})");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "c_mono: {}", self.c_mono);
        s
    }
}

/// Relative slack for comparisons between iterates of a PSOR-converged scheme.
const AUDIT_SLACK: f64 = 1e-8;

/// Checks `V ≥ 0`, `V ≤ datum`, `U` nondecreasing in time and nested positivity sets
/// `Ω₀ ⊂ Ω_t ⊂ Ω_s` over the snapshots, which must be in increasing time order.
pub fn audit_monotonicity(
    problem: &GridProblem<f64>,
    snapshots: &[ObstacleState<f64>],
) -> AuditReport {
    let grid = problem.grid();
    let mask = problem.mask();
    let datum = problem.datum();
    let v0 = problem.v0();
    let witness = |k: usize, s: &ObstacleState<f64>, idx: usize, what: String| {
        let mut x = [0.0; 3];
        grid.position(idx, &mut x);
        format!(
            "snapshot {k} (t = {}), node {idx} at {:?}: {what}",
            s.t,
            &x[..problem.dimension()]
        )
    };

    let mut negative = AuditCheck::ok("velocity_nonnegative");
    let mut bounded = AuditCheck::ok("velocity_bounded");
    'outer: for (k, s) in snapshots.iter().enumerate() {
        for (idx, &v) in s.v.values.iter().enumerate() {
            if !(v >= 0.0) && negative.passed {
                negative =
                    AuditCheck::fail(negative.name, witness(k, s, idx, format!("V = {v:e}")));
            }
            if v > datum * (1.0 + 1e-6) && bounded.passed {
                bounded = AuditCheck::fail(
                    bounded.name,
                    witness(k, s, idx, format!("V = {v:e} > datum")),
                );
            }
            if !negative.passed && !bounded.passed {
                break 'outer;
            }
        }
    }

    let mut monotone = AuditCheck::ok("u_nondecreasing");
    let mut nested = AuditCheck::ok("nested_positivity");
    for k in 1..snapshots.len() {
        let (a, b) = (&snapshots[k - 1], &snapshots[k]);
        let slack = AUDIT_SLACK * b.u.max_value().max(1.0);
        let eps_a = positivity_threshold(&a.u);
        for idx in 0..grid.len() {
            let (ua, ub) = (a.u.values[idx], b.u.values[idx]);
            if ub < ua - slack && monotone.passed {
                monotone = AuditCheck::fail(
                    monotone.name,
                    witness(k, b, idx, format!("U decreased from {ua:e} to {ub:e}")),
                );
            }
            if mask[idx] == NodeKind::Fluid && ua > eps_a && !(ub > eps_a) && nested.passed {
                nested = AuditCheck::fail(
                    nested.name,
                    witness(k, b, idx, "left the positivity set".into()),
                );
            }
        }
    }
    // Ω₀ ⊂ Ω_t for every t > 0.
    let mut c_mono = 0.0f64;
    let floor = 1e-12 * datum;
    for (k, s) in snapshots.iter().enumerate().filter(|(_, s)| s.t > 0.0) {
        let eps = positivity_threshold(&s.u);
        for idx in 0..grid.len() {
            if mask[idx] != NodeKind::Fluid || !(v0[idx] > 0.0) {
                continue;
            }
            if !(s.u.values[idx] > eps) && nested.passed {
                nested = AuditCheck::fail(
                    nested.name,
                    witness(
                        k,
                        s,
                        idx,
                        "initial liquid node not in the positivity set".into(),
                    ),
                );
            }
            c_mono = c_mono.max(v0[idx] / s.v.values[idx].max(floor));
        }
    }
    AuditReport {
        checks: vec![negative, bounded, monotone, nested],
        c_mono,
    }
}

/// Result of running two ordered problems side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub checks: Vec<AuditCheck>,
    /// `max (U_low − U_high)` over all snapshots and nodes (≤ 0 when ordered).
    pub max_violation: f64,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the same geometry with right-hand sides `f_low ≤ f_high` and checks `U_low ≤ U_high`
/// and `Ω(U_low) ⊂ Ω(U_high)` at every snapshot.
pub fn audit_comparison(
    low: (&GridProblem<f64>, &[f64]),
    high: (&GridProblem<f64>, &[f64]),
    schedule: &RunSchedule<f64>,
    params: &SolverParams<f64>,
) -> Result<ComparisonReport, HarnessError> {
    if low.0.grid() != high.0.grid() || low.0.mask() != high.0.mask() {
        return Err(HarnessError::Config(
            "comparison needs identical geometry".into(),
        ));
    }
    let mut ordered_data = AuditCheck::ok("data_ordered");
    if let Some(idx) = (0..low.1.len()).find(|&i| low.1[i] > high.1[i]) {
        ordered_data = AuditCheck::fail(
            ordered_data.name,
            format!(
                "f_low = {} > f_high = {} at node {idx}",
                low.1[idx], high.1[idx]
            ),
        );
    }
    let a = run_with_f(low.0, low.1, schedule, params)?;
    let b = run_with_f(high.0, high.1, schedule, params)?;
    let mut ordered = AuditCheck::ok("u_ordered");
    let mut nested = AuditCheck::ok("positivity_nested");
    let mut max_violation = f64::NEG_INFINITY;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let slack = AUDIT_SLACK * sb.u.max_value().max(1.0);
        let eps = positivity_threshold(&sa.u);
        for idx in 0..sa.u.values.len() {
            let (ua, ub) = (sa.u.values[idx], sb.u.values[idx]);
            max_violation = max_violation.max(ua - ub);
            if ua > ub + slack && ordered.passed {
                ordered = AuditCheck::fail(
                    ordered.name,
                    format!("t = {}, node {idx}: {ua:e} > {ub:e}", sa.t),
                );
            }
            if ua > eps && !(ub > 0.0) && nested.passed {
                nested = AuditCheck::fail(nested.name, format!("t = {}, node {idx}", sa.t));
            }
        }
    }
    Ok(ComparisonReport {
        checks: vec![ordered_data, ordered, nested],
        max_violation,
    })
}

/// Comparison of two media on the same geometry (`g_low ≤ g_high` gives `f_low ≤ f_high`).
pub fn audit_comparison_media(
    problem: &GridProblem<f64>,
    g_low: &LatentHeatField<f64>,
    g_high: &LatentHeatField<f64>,
    schedule: &RunSchedule<f64>,
    params: &SolverParams<f64>,
) -> Result<ComparisonReport, HarnessError> {
    let f_low = build_f(g_low, problem.v0(), problem);
    let f_high = build_f(g_high, problem.v0(), problem);
    audit_comparison((problem, &f_low), (problem, &f_high), schedule, params)
}

/// Discrete enthalpy identity within relative tolerance `tol`.
pub fn audit_enthalpy(
    state: &ObstacleState<f64>,
    problem: &GridProblem<f64>,
    field: &LatentHeatField<f64>,
    tol: f64,
) -> (AuditCheck, EnthalpyBalance<f64>) {
    let b = enthalpy_balance(state, problem, field);
    let err = b.relative_error();
    let check = if err <= tol {
        AuditCheck::ok("enthalpy_balance")
    } else {
        AuditCheck::fail(
            "enthalpy_balance",
            format!("relative error {err:e} > {tol:e} at t = {}", state.t),
        )
    };
    (check, b)
}

/// `max θ(r) r^{n−2}` over radial profiles.
pub fn fit_bound_constant(r: &[f64], profiles: &[&[f64]], n: usize) -> f64 {
    let mut c = 0.0f64;
    for p in profiles {
        for (&ri, &th) in r.iter().zip(p.iter()) {
            c = c.max(th * ri.powi(n as i32 - 2));
        }
    }
    c
}

/// Checks `θ(r) ≤ C r^{2−n}` (relative slack `1e-9`) on radial profiles.
pub fn audit_boundedness(r: &[f64], profiles: &[&[f64]], n: usize, c: f64) -> AuditCheck {
    for (k, p) in profiles.iter().enumerate() {
        for (&ri, &th) in r.iter().zip(p.iter()) {
            let bound = c * ri.powi(2 - n as i32);
            if th > bound * (1.0 + 1e-9) {
                return AuditCheck::fail(
                    "bounded_by_far_field",
                    format!("profile {k}, r = {ri}: θ = {th:e} > {bound:e}"),
                );
            }
        }
    }
    AuditCheck::ok("bounded_by_far_field")
}
