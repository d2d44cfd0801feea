//! Hyperbolic rescalings `v^λ(x, t) = a(λ) v(s(λ) x, λ t)` and resampling onto a fixed grid.

use thiserror::Error;

use crate::grid::{CartesianGrid, GridFunction};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RescaleError {
    #[error("lambda = {lambda} out of range for n = {n} (need lambda >= 1 for n >= 3, lambda > e for n = 2)")]
    Lambda { lambda: f64, n: usize },
    #[error("dimension must be at least 2 (got {0})")]
    Dimension(usize),
    #[error("R^2 log R = {lambda} did not converge (residual {residual})")]
    NoConvergence { lambda: f64, residual: f64 },
    #[error(
        "source grid of extent {source_extent} does not cover pulled-back target extent {needed}"
    )]
    Coverage { source_extent: f64, needed: f64 },
    #[error("source and target dimensions differ ({source_dim} vs {target})")]
    DimensionMismatch { source_dim: usize, target: usize },
}

/// Large root of `R² log R = λ` (`λ > e`), by safeguarded Newton iteration.
#[allow(non_snake_case)]
pub fn solve_R<T: Scalar>(lambda: T) -> Result<T, RescaleError> {
    if !(lambda > T::E()) || !lambda.is_finite() {
        return Err(RescaleError::Lambda {
            lambda: lambda.as_f64(),
            n: 2,
        });
    }
    let f = |r: T| r * r * r.ln() - lambda;
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
    let half = T::lit(0.5);
    // F is increasing for R > e^{-1/2}; F(1) < 0 and F(λ) > 0 bracket the root.
    let (mut lo, mut hi) = (T::one(), lambda);
    let mut r = (lambda / T::one().max(half * lambda.ln())).sqrt();
    if !(r > lo && r < hi) {
        r = half * (lo + hi);
    }
    for _ in 0..200 {
        let fr = f(r);
        if fr.abs() <= tol * lambda {
            return Ok(r);
        }
        if fr < T::zero() {
            lo = r;
        } else {
            hi = r;
        }
        let df = r * (T::lit(2.0) * r.ln() + T::one());
        let newton = r - fr / df;
        r = if newton > lo && newton < hi {
            newton
        } else {
            half * (lo + hi)
        };
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    let residual = f(r).abs() / lambda;
    if residual <= tol {
        Ok(r)
    } else {
        Err(RescaleError::NoConvergence {
            lambda: lambda.as_f64(),
            residual: residual.as_f64(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleParams<T> {
    pub lambda: T,
    pub dimension: usize,
    pub space_factor: T,
    pub amplitude_factor: T,
    pub time_factor: T,
}

impl<T: Scalar> RescaleParams<T> {
    /// Amplitude applied to the time-integrated unknown: `λ^{−2/n}`, or `log 𝓡 / λ` for `n = 2`.
    pub fn u_amplitude(&self) -> T {
        self.amplitude_factor / self.time_factor
    }

    pub fn identity(dimension: usize) -> Self {
        Self {
            lambda: T::one(),
            dimension,
            space_factor: T::one(),
            amplitude_factor: T::one(),
            time_factor: T::one(),
        }
    }
}

pub fn make_params<T: Scalar>(lambda: T, n: usize) -> Result<RescaleParams<T>, RescaleError> {
    if n < 2 {
        return Err(RescaleError::Dimension(n));
    }
    if n == 2 {
        let r = solve_R(lambda)?;
        return Ok(RescaleParams {
            lambda,
            dimension: 2,
            space_factor: r,
            amplitude_factor: r.ln(),
            time_factor: lambda,
        });
    }
    if !(lambda >= T::one()) || !lambda.is_finite() {
        return Err(RescaleError::Lambda {
            lambda: lambda.as_f64(),
            n,
        });
    }
    let nn = T::from_usize_lossy(n);
    Ok(RescaleParams {
        lambda,
        dimension: n,
        space_factor: lambda.powf(T::one() / nn),
        amplitude_factor: lambda.powf((nn - T::lit(2.0)) / nn),
        time_factor: lambda,
    })
}

/// Pulls a field back onto `target`: `out(x) = amplitude · source(space_factor · x)`.
pub fn rescale_field<T: Scalar>(
    source: &GridFunction<T>,
    space_factor: T,
    amplitude: T,
    target: &CartesianGrid<T>,
) -> Result<GridFunction<T>, RescaleError> {
    let src = &source.grid;
    if src.dimension() != target.dimension() {
        return Err(RescaleError::DimensionMismatch {
            source_dim: src.dimension(),
            target: target.dimension(),
        });
    }
    let needed = space_factor * target.extent();
    if needed > src.extent() * (T::one() + T::lit(1e-12)) {
        return Err(RescaleError::Coverage {
            source_extent: src.extent().as_f64(),
            needed: needed.as_f64(),
        });
    }
    let n = target.dimension();
    let values = (0..target.len())
        .map(|idx| {
            let mut x = [T::zero(); 3];
            target.position(idx, &mut x);
            for c in x.iter_mut().take(n) {
                *c *= space_factor;
                // Clamp boundary round-off into the source box.
                *c = c.max(-src.extent()).min(src.extent());
            }
            amplitude
                * source
                    .interpolate(&x[..n])
                    .expect("point clamped into the source box")
        })
        .collect();
    Ok(GridFunction::new(target.clone(), values))
}

/// Rescaled pair `(v^λ, u^λ)` of a snapshot `(U, V)` taken at original time `λ t`.
pub fn rescale_snapshot<T: Scalar>(
    u: &GridFunction<T>,
    v: &GridFunction<T>,
    params: &RescaleParams<T>,
    target: &CartesianGrid<T>,
) -> Result<(GridFunction<T>, GridFunction<T>), RescaleError> {
    let v_l = rescale_field(v, params.space_factor, params.amplitude_factor, target)?;
    let u_l = rescale_field(u, params.space_factor, params.u_amplitude(), target)?;
    Ok((v_l, u_l))
}

/// Bound on `|f − I_h f|` for multilinear interpolation of a `C²` function on a cell of size `h`:
/// `n h²/8 · max_i sup |∂_ii f|`.
pub fn multilinear_error_bound<T: Scalar>(h: T, dimension: usize, second_derivative_bound: T) -> T {
    T::from_usize_lossy(dimension) * h * h / T::lit(8.0) * second_derivative_bound
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_r_at_e_squared() {
        let e = std::f64::consts::E;
        let r = solve_R(e * e).unwrap();
        assert!((r - e).abs() < 1e-12);
    }

    #[test]
    fn solve_r_residual_and_monotone() {
        let mut prev = 0.0;
        for &lambda in &[3.0, 10.0, 100.0, 1e4, 1e6, 1e12] {
            let r: f64 = solve_R(lambda).unwrap();
            assert!((r * r * r.ln() - lambda).abs() <= 1e-12 * lambda);
            assert!(r > prev);
            prev = r;
        }
        assert!(solve_R(2.0f64).is_err());
        assert!(solve_R(f64::NAN).is_err());
    }

    #[test]
    fn params_n3() {
        let p = make_params(8.0f64, 3).unwrap();
        assert!((p.space_factor - 2.0).abs() < 1e-15);
        assert!((p.amplitude_factor - 2.0).abs() < 1e-15);
        assert_eq!(p.time_factor, 8.0);
        let id = make_params(1.0f64, 3).unwrap();
        assert_eq!(
            (id.space_factor, id.amplitude_factor, id.time_factor),
            (1.0, 1.0, 1.0)
        );
        assert!(make_params(0.5f64, 3).is_err());
    }

    #[test]
    fn params_n2() {
        let e = std::f64::consts::E;
        let p = make_params(e * e, 2).unwrap();
        assert!((p.space_factor - e).abs() < 1e-12);
        assert!((p.amplitude_factor - 1.0).abs() < 1e-12);
        assert!((p.u_amplitude() - 1.0 / (e * e)).abs() < 1e-12);
    }

    #[test]
    fn identity_rescale_is_exact() {
        let g = CartesianGrid::new(2, 0.1, 10);
        let f = GridFunction::from_fn(g.clone(), |x: &[f64]| x[0] * x[0] - 3.0 * x[1]);
        let out = rescale_field(&f, 1.0, 1.0, &g).unwrap();
        assert_eq!(out.values, f.values);
    }

    #[test]
    fn coverage_error() {
        let src = CartesianGrid::new(2, 0.1, 10);
        let f = GridFunction::zeros(src);
        let target = CartesianGrid::new(2, 0.1, 6);
        assert!(matches!(
            rescale_field(&f, 2.0, 1.0, &target),
            Err(RescaleError::Coverage { .. })
        ));
        assert!(rescale_field(&f, 1.5, 1.0, &target).is_ok());
    }

    #[test]
    fn error_bound_formula() {
        assert!((multilinear_error_bound(0.1f64, 2, 4.0) - 0.01).abs() < 1e-15);
    }
}
