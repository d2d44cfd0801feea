//! Reference solutions: the self-similar point-source Hele-Shaw solution `V_{A,L}` and its time
//! integral `U_{A,L}`, the radial Hele-Shaw front, a radial Stefan solver built on the same
//! complementarity kernel as the grid solver, and the near-field constant `C*` for ball cores.

use thiserror::Error;

use crate::obstacle::lcp::{solve_lcp_psor, LcpError, LcpMatrix, LcpSystem, PsorParams};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("self-similar solution needs A > 0, L > 0, n >= 2 (got A = {a}, L = {l}, n = {n})")]
    InvalidParameters { a: f64, l: f64, n: usize },
    #[error("the point-source solution is singular at the origin")]
    Origin,
    #[error("radii must satisfy 0 < a < b (got a = {a}, b = {b})")]
    Radii { a: f64, b: f64 },
    #[error("front moved {increment} > R/10 = {limit} in one step at t = {t}; reduce dt")]
    StepTooLarge { t: f64, increment: f64, limit: f64 },
    #[error("time step and horizon must be positive (dt = {dt}, T = {t_end})")]
    Time { dt: f64, t_end: f64 },
    #[error("radial front reached the truncation radius {r_max} at t = {t}")]
    DomainOverflow { t: f64, r_max: f64 },
    #[error(transparent)]
    Lcp(#[from] LcpError),
}

/// `ρ(t) = (A n (n−2) t / L)^{1/n}` for `n ≥ 3`, `(2 A t / L)^{1/2}` for `n = 2`.
pub fn rho<T: Scalar>(amplitude: T, latent: T, n: usize, t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let nn = T::from_usize_lossy(n);
    if n == 2 {
        (T::lit(2.0) * amplitude * t / latent).sqrt()
    } else {
        (amplitude * nn * (nn - T::lit(2.0)) * t / latent).powf(T::one() / nn)
    }
}

/// Point-source Hele-Shaw solution `V_{A,L}` with front `ρ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarSolution<T> {
    pub amplitude: T,
    pub latent: T,
    pub dimension: usize,
}

impl<T: Scalar> SelfSimilarSolution<T> {
    pub fn new(amplitude: T, latent: T, dimension: usize) -> Result<Self, ReferenceError> {
        if !(amplitude > T::zero() && latent > T::zero() && dimension >= 2) {
            return Err(ReferenceError::InvalidParameters {
                a: amplitude.as_f64(),
                l: latent.as_f64(),
                n: dimension,
            });
        }
        Ok(Self {
            amplitude,
            latent,
            dimension,
        })
    }

    pub fn rho(&self, t: T) -> T {
        rho(self.amplitude, self.latent, self.dimension, t)
    }

    /// Growth constant `c` with `ρ(t)^n = c t` (`n ≥ 3`) or `ρ(t)² = c t` (`n = 2`).
    fn growth(&self) -> T {
        let nn = T::from_usize_lossy(self.dimension);
        if self.dimension == 2 {
            T::lit(2.0) * self.amplitude / self.latent
        } else {
            self.amplitude * nn * (nn - T::lit(2.0)) / self.latent
        }
    }

    /// Time at which the front reaches radius `r`.
    pub fn onset_time(&self, r: T) -> T {
        let power = if self.dimension == 2 {
            2
        } else {
            self.dimension
        };
        r.powi(power as i32) / self.growth()
    }

    /// `V_{A,L}` at radius `r > 0`.
    pub fn v(&self, r: T, t: T) -> Result<T, ReferenceError> {
        if !(r > T::zero()) {
            return Err(ReferenceError::Origin);
        }
        let rho = self.rho(t);
        if r >= rho {
            return Ok(T::zero());
        }
        let a = self.amplitude;
        Ok(if self.dimension == 2 {
            a * (rho / r).ln()
        } else {
            let e = 2 - self.dimension as i32;
            a * (r.powi(e) - rho.powi(e))
        })
    }

    /// `V_{A,L}` at a point.
    pub fn v_at(&self, x: &[T], t: T) -> Result<T, ReferenceError> {
        self.v(radius(x), t)
    }

    /// `U_{A,L}(r, t) = ∫₀ᵗ V_{A,L}(r, s) ds`, in closed form.
    pub fn u(&self, r: T, t: T) -> Result<T, ReferenceError> {
        if !(r > T::zero()) {
            return Err(ReferenceError::Origin);
        }
        let onset = self.onset_time(r);
        if t <= onset {
            return Ok(T::zero());
        }
        let a = self.amplitude;
        let c = self.growth();
        let half = T::lit(0.5);
        Ok(if self.dimension == 2 {
            // V = A (½ ln(c s) − ln r)
            let prim = |s: T| half * (s * (c * s).ln() - s) - s * r.ln();
            a * (prim(t) - prim(onset))
        } else {
            // V = A (r^{2−n} − (c s)^{(2−n)/n})
            let nn = T::from_usize_lossy(self.dimension);
            let e = 2 - self.dimension as i32;
            let p = T::lit(2.0) / nn;
            let k = c.powf((T::lit(2.0) - nn) / nn) * nn * half;
            a * (r.powi(e) * (t - onset) - k * (t.powf(p) - onset.powf(p)))
        })
    }

    pub fn u_at(&self, x: &[T], t: T) -> Result<T, ReferenceError> {
        self.u(radius(x), t)
    }
}

fn radius<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&c| c * c).sum::<T>().sqrt()
}

/// Sampled radial front `R(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFront<T> {
    pub a: T,
    pub b: T,
    pub amplitude: T,
    pub latent: T,
    pub dimension: usize,
    /// `(t, R(t))`, increasing in `t`.
    pub samples: Vec<(T, T)>,
}

impl<T: Scalar> RadialFront<T> {
    pub fn last(&self) -> (T, T) {
        *self.samples.last().expect("front has samples")
    }

    /// `R(t)` by linear interpolation between samples.
    pub fn radius_at(&self, t: T) -> T {
        let s = &self.samples;
        match s.binary_search_by(|p| p.0.partial_cmp(&t).expect("finite time")) {
            Ok(i) => s[i].1,
            Err(0) => s[0].1,
            Err(i) if i >= s.len() => s[s.len() - 1].1,
            Err(i) => {
                let (t0, r0) = s[i - 1];
                let (t1, r1) = s[i];
                r0 + (r1 - r0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// `R(t) / ρ(t)` for each sample (`ρ` of the point source with the same `A`, `L`).
    pub fn ratio_to_rho(&self) -> Vec<(T, T, T)> {
        self.samples
            .iter()
            .map(|&(t, r)| {
                let rho = rho(self.amplitude, self.latent, self.dimension, t);
                let ratio = if rho > T::zero() { r / rho } else { T::nan() };
                (t, r, ratio)
            })
            .collect()
    }
}

/// `R'(t)` of the radial Hele-Shaw problem with `p = A a^{2−n}` on `|x| = a`.
fn hele_shaw_speed<T: Scalar>(r: T, a: T, amplitude: T, latent: T, n: usize) -> T {
    if n == 2 {
        amplitude / (latent * r * (r / a).ln())
    } else {
        let e = 2 - n as i32;
        let nn = T::from_usize_lossy(n);
        (nn - T::lit(2.0)) * amplitude * a.powi(e)
            / ((a.powi(e) - r.powi(e)) * latent * r.powi(n as i32 - 1))
    }
}

/// Integrates the radial Hele-Shaw front from `R(0) = b` with classical RK4 and fixed `dt`.
///
/// About 10⁴ samples are kept regardless of the number of steps; the last step is always kept.
pub fn radial_hele_shaw_front<T: Scalar>(
    a: T,
    b: T,
    amplitude: T,
    latent: T,
    n: usize,
    t_end: T,
    dt: T,
) -> Result<RadialFront<T>, ReferenceError> {
    if !(a > T::zero() && a < b) {
        return Err(ReferenceError::Radii {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    if !(dt > T::zero() && t_end >= T::zero()) {
        return Err(ReferenceError::Time {
            dt: dt.as_f64(),
            t_end: t_end.as_f64(),
        });
    }
    SelfSimilarSolution::new(amplitude, latent, n)?;
    let steps = (t_end / dt).ceil().to_usize().unwrap_or(0);
    let stride = (steps / 10_000).max(1);
    let speed = |r: T| hele_shaw_speed(r, a, amplitude, latent, n);
    let mut samples = vec![(T::zero(), b)];
    let mut r = b;
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    for step in 1..=steps {
        let t0 = dt * T::from_usize_lossy(step - 1);
        let h = (t_end - t0).min(dt);
        let k1 = speed(r);
        let k2 = speed(r + h * k1 / two);
        let k3 = speed(r + h * k2 / two);
        let k4 = speed(r + h * k3);
        let inc = h * (k1 + two * k2 + two * k3 + k4) / six;
        let limit = r / T::lit(10.0);
        if !(inc <= limit) {
            return Err(ReferenceError::StepTooLarge {
                t: t0.as_f64(),
                increment: inc.as_f64(),
                limit: limit.as_f64(),
            });
        }
        r += inc;
        if step % stride == 0 || step == steps {
            samples.push((t0 + h, r));
        }
    }
    Ok(RadialFront {
        a,
        b,
        amplitude,
        latent,
        dimension: n,
        samples,
    })
}

/// Near-field constant of `K = B_a` with boundary datum `d`: `d a^{n−2}` (`n ≥ 3`), `d` (`n = 2`).
pub fn cstar<T: Scalar>(core_radius: T, datum: T, n: usize) -> T {
    if n == 2 {
        datum
    } else {
        datum * core_radius.powi(n as i32 - 2)
    }
}

/// Symmetrised radial operator `diag(w)(I/Δt) − div(r^{n−1} ∂_r)`, `w_i = r_i^{n−1} Δr`.
#[derive(Debug, Clone)]
pub struct RadialStencil<T> {
    diag: Vec<T>,
    /// `lower[i]` couples node `i` with `i − 1` (entry `−r_{i−½}^{n−1}/Δr`).
    lower: Vec<T>,
    upper: Vec<T>,
    weight: Vec<T>,
}

impl<T: Scalar> RadialStencil<T> {
    pub fn new(r: &[T], dr: T, dt: T, n: usize) -> Self {
        let m = r.len();
        let p = n as i32 - 1;
        let half = dr / T::lit(2.0);
        let mut diag = vec![T::one(); m];
        let mut lower = vec![T::zero(); m];
        let mut upper = vec![T::zero(); m];
        let mut weight = vec![T::zero(); m];
        for i in 0..m {
            let w = r[i].powi(p) * dr;
            let left = (r[i] - half).powi(p) / dr;
            let right = (r[i] + half).powi(p) / dr;
            weight[i] = w;
            diag[i] = w / dt + left + right;
            lower[i] = -left;
            upper[i] = -right;
        }
        Self {
            diag,
            lower,
            upper,
            weight,
        }
    }

    pub fn weight(&self, i: usize) -> T {
        self.weight[i]
    }

    /// Brennan–Schwartz elimination for rows `1..=hi` with `u[0]` given and `u[hi + 1] = 0`:
    /// Thomas forward sweep from the inner boundary, then back substitution from the outer end
    /// with projection onto `u ≥ 0`. Exact when the positive set is `{1, …, k − 1}`.
    pub fn projected_thomas(&self, rhs: &[T], hi: usize, u: &mut [T]) {
        let mut c = vec![T::zero(); hi + 1];
        let mut d = vec![T::zero(); hi + 1];
        for i in 1..=hi {
            let (denom, carried) = if i == 1 {
                (self.diag[1], rhs[1] - self.lower[1] * u[0])
            } else {
                let denom = self.diag[i] - self.lower[i] * c[i - 1];
                (denom, rhs[i] - self.lower[i] * d[i - 1])
            };
            c[i] = self.upper[i] / denom;
            d[i] = carried / denom;
        }
        let mut next = T::zero();
        for i in (1..=hi).rev() {
            next = (d[i] - c[i] * next).max(T::zero());
            u[i] = next;
        }
    }
}

impl<T: Scalar> LcpMatrix<T> for RadialStencil<T> {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn diagonal(&self, i: usize) -> T {
        self.diag[i]
    }
    fn off_diagonal_dot(&self, i: usize, u: &[T]) -> T {
        // Only called on interior rows.
        self.lower[i] * u[i - 1] + self.upper[i] * u[i + 1]
    }
}

/// Inputs of [`radial_stefan_solve`].
pub struct RadialStefanParams<'a, T> {
    pub dimension: usize,
    pub a: T,
    pub b: T,
    pub amplitude: T,
    pub latent: T,
    /// Initial temperature on `[a, ∞)`, supported in `[a, b]`, `θ₀(a) = A a^{2−n}`.
    pub theta0: &'a dyn Fn(T) -> T,
    pub t_end: T,
    pub dr: T,
    pub dt: T,
    pub snapshots: Vec<T>,
    /// Truncation radius; derived from a Hele-Shaw upper bound when `None`.
    pub r_max: Option<T>,
    pub omega: Option<T>,
    pub tol: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSnapshot<T> {
    pub t: T,
    /// Time-integrated temperature `U`.
    pub u: Vec<T>,
    /// Temperature `θ = (U − U_prev)/Δt`.
    pub theta: Vec<T>,
    pub front: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialStefanOutput<T> {
    /// Node radii `a + i Δr`.
    pub r: Vec<T>,
    pub snapshots: Vec<RadialSnapshot<T>>,
    pub front: RadialFront<T>,
    pub total_iterations: usize,
}

impl<T: Scalar> RadialStefanOutput<T> {
    /// `θ(r)` of a snapshot by linear interpolation; zero beyond the truncation.
    pub fn theta_at(&self, snapshot: &RadialSnapshot<T>, r: T) -> T {
        interpolate(&self.r, &snapshot.theta, r)
    }
    pub fn u_at(&self, snapshot: &RadialSnapshot<T>, r: T) -> T {
        interpolate(&self.r, &snapshot.u, r)
    }
}

fn interpolate<T: Scalar>(r: &[T], values: &[T], x: T) -> T {
    let dr = r[1] - r[0];
    let s = (x - r[0]) / dr;
    if s <= T::zero() {
        return values[0];
    }
    let i = s.floor().to_usize().unwrap_or(usize::MAX);
    if i + 1 >= r.len() {
        return T::zero();
    }
    let w = s - T::from_usize_lossy(i);
    values[i] * (T::one() - w) + values[i + 1] * w
}

/// Upper bound for the radial Hele-Shaw front, valid because `R' ≤ R'(b)·(b/R)^{n−1}`.
fn hele_shaw_bound<T: Scalar>(a: T, b: T, amplitude: T, latent: T, n: usize, t: T) -> T {
    if n == 2 {
        (b * b + T::lit(2.0) * amplitude * t / (latent * (b / a).ln())).sqrt()
    } else {
        let e = 2 - n as i32;
        let nn = T::from_usize_lossy(n);
        let c1 = (nn - T::lit(2.0)) * amplitude * a.powi(e) / (a.powi(e) - b.powi(e));
        (b.powi(n as i32) + nn * c1 * t / latent).powf(T::one() / nn)
    }
}

/// One-phase radial Stefan problem on `|x| ≥ a` with `θ = A a^{2−n}` on `|x| = a`, solved in its
/// obstacle form with the same projected-SOR kernel as the grid solver.
pub fn radial_stefan_solve<T: Scalar>(
    p: &RadialStefanParams<'_, T>,
) -> Result<RadialStefanOutput<T>, ReferenceError> {
    let (a, b, n) = (p.a, p.b, p.dimension);
    if !(a > T::zero() && a < b) {
        return Err(ReferenceError::Radii {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    if !(p.dt > T::zero() && p.t_end > T::zero() && p.dr > T::zero()) {
        return Err(ReferenceError::Time {
            dt: p.dt.as_f64(),
            t_end: p.t_end.as_f64(),
        });
    }
    SelfSimilarSolution::new(p.amplitude, p.latent, n)?;
    let r_max = p.r_max.unwrap_or_else(|| {
        T::lit(1.2) * hele_shaw_bound(a, b, p.amplitude, p.latent, n, p.t_end) + T::lit(8.0) * p.dr
    });
    let nodes = ((r_max - a) / p.dr).ceil().to_usize().unwrap_or(0).max(8) + 1;
    let r: Vec<T> = (0..nodes)
        .map(|i| a + p.dr * T::from_usize_lossy(i))
        .collect();
    let last = nodes - 1;
    let boundary = p.amplitude * a.powi(2 - n as i32);
    let theta0: Vec<T> = r
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 {
                boundary
            } else if i == last {
                T::zero()
            } else {
                (p.theta0)(x).max(T::zero())
            }
        })
        .collect();
    let f: Vec<T> = theta0
        .iter()
        .map(|&th| if th > T::zero() { th } else { -p.latent })
        .collect();
    let matrix = RadialStencil::new(&r, p.dr, p.dt, n);
    let inv_dt = T::one() / p.dt;
    let steps = (p.t_end / p.dt).round().to_usize().unwrap_or(0);
    let mut wanted: Vec<usize> = p
        .snapshots
        .iter()
        .map(|&t| (t / p.dt).round().to_usize().unwrap_or(0).min(steps))
        .collect();
    wanted.sort_unstable();
    wanted.dedup();

    let mut u = vec![T::zero(); nodes];
    let mut theta = theta0.clone();
    let mut constrained = vec![true; nodes];
    constrained[0] = false;
    constrained[last] = false;
    let mut rhs = vec![T::zero(); nodes];
    let mut snapshots = Vec::new();
    let front_of = |u: &[T]| -> T {
        let eps = T::lit(1e-12) * u.iter().fold(T::zero(), |m, &x| m.max(x));
        let k = (1..nodes).take_while(|&i| u[i] > eps).count();
        r[k] + p.dr / T::lit(2.0)
    };
    let mut samples = vec![(T::zero(), b)];
    if wanted.first() == Some(&0) {
        snapshots.push(RadialSnapshot {
            t: T::zero(),
            u: u.clone(),
            theta: theta.clone(),
            front: b,
        });
    }
    let mut next = usize::from(wanted.first() == Some(&0));
    let mut total_iterations = 0;
    let mut margin = 8usize;
    for step in 1..=steps {
        let t = p.dt * T::from_usize_lossy(step);
        rhs[0] = boundary * t;
        rhs[last] = T::zero();
        for i in 1..last {
            rhs[i] = matrix.weight(i) * (u[i] * inv_dt + f[i]);
        }
        let prev = u.clone();
        u[0] = rhs[0];
        let positive_end = (1..last)
            .rev()
            .find(|&i| prev[i] > T::zero() || theta0[i] > T::zero())
            .unwrap_or(1);
        loop {
            let hi = (positive_end + margin).min(last - 1);
            for x in u.iter_mut().take(last).skip(hi + 1) {
                *x = T::zero();
            }
            // Exact for a melted interval [a, R); PSOR below certifies (and if needed repairs) it.
            matrix.projected_thomas(&rhs, hi, &mut u);
            let sys = LcpSystem {
                matrix: matrix.clone(),
                rhs: rhs.clone(),
                constrained: constrained.clone(),
                sweep: (1..=hi as u32).collect(),
                colour_split: None,
            };
            let omega = p.omega.unwrap_or_else(|| {
                let rho_j = (T::PI() / T::from_usize_lossy(hi + 2)).cos()
                    * (T::lit(2.0) / (p.dr * p.dr))
                    / (inv_dt + T::lit(2.0) / (p.dr * p.dr));
                (T::lit(2.0) / (T::one() + (T::one() - rho_j * rho_j).sqrt())).min(T::lit(1.99))
            });
            let stats = solve_lcp_psor(
                &sys,
                &PsorParams {
                    omega,
                    tol: p.tol,
                    max_iterations: 200 * nodes,
                    check_every: 16,
                    parallel: false,
                },
                &mut u,
            )?;
            total_iterations += stats.iterations;
            if hi < last - 1 && u[hi] > T::zero() {
                margin *= 2;
                continue;
            }
            break;
        }
        for i in 0..nodes {
            theta[i] = ((u[i] - prev[i]) * inv_dt).max(T::zero());
        }
        let front = front_of(&u);
        if front >= r[last] - T::lit(4.0) * p.dr {
            return Err(ReferenceError::DomainOverflow {
                t: t.as_f64(),
                r_max: r[last].as_f64(),
            });
        }
        samples.push((t, front));
        if next < wanted.len() && wanted[next] == step {
            snapshots.push(RadialSnapshot {
                t,
                u: u.clone(),
                theta: theta.clone(),
                front,
            });
            next += 1;
        }
    }
    Ok(RadialStefanOutput {
        r,
        snapshots,
        front: RadialFront {
            a,
            b,
            amplitude: p.amplitude,
            latent: p.latent,
            dimension: n,
            samples,
        },
        total_iterations,
    })
}
