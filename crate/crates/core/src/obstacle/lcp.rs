//! Linear complementarity problems `U ≥ 0, MU - q ≥ 0, U·(MU - q) = 0` and projected SOR.
//!
//! Rows come in two flavours. Constrained rows carry the complementarity condition. Fixed rows are
//! identity rows `U_i = q_i` (Dirichlet values); PSOR never touches them after initialisation.
//! Only the constrained rows listed in the sweep order are relaxed, so a caller can restrict work
//! to a window where the solution may be nonzero; every other constrained row stays at its
//! initial value.

use rayon::prelude::*;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LcpError {
    #[error("relaxation factor must lie in (0, 2) (got {0})")]
    InvalidRelaxation(f64),
    #[error("projected SOR did not converge in {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("initial guess has {got} entries, system has {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Row access needed by projected relaxation.
pub trait LcpMatrix<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn diagonal(&self, i: usize) -> T;
    /// `Σ_{j ≠ i} M_ij u_j`.
    fn off_diagonal_dot(&self, i: usize, u: &[T]) -> T;

    #[inline]
    fn inv_diagonal(&self, i: usize) -> T {
        T::one() / self.diagonal(i)
    }
}

/// Row-major dense matrix, for small systems and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, u: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * u[j]).sum())
            .collect()
    }
}

impl<T: Scalar> LcpMatrix<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }
    fn diagonal(&self, i: usize) -> T {
        self.get(i, i)
    }
    fn off_diagonal_dot(&self, i: usize, u: &[T]) -> T {
        let row = &self.data[i * self.n..(i + 1) * self.n];
        row.iter()
            .zip(u)
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (&a, &x))| a * x)
            .sum()
    }
}

/// Matrix, right-hand side, row classification and sweep order.
#[derive(Debug, Clone)]
pub struct LcpSystem<T, A> {
    pub matrix: A,
    pub rhs: Vec<T>,
    /// `true` for complementarity rows, `false` for identity rows `U_i = q_i`.
    pub constrained: Vec<bool>,
    /// Constrained rows relaxed by PSOR, in sweep order.
    pub sweep: Vec<u32>,
    /// Length of the first independent colour block of `sweep` when the order is red-black;
    /// `None` for a plain (lexicographic) order.
    pub colour_split: Option<usize>,
}

impl<T: Scalar, A: LcpMatrix<T>> LcpSystem<T, A> {
    /// Every row constrained, lexicographic sweep.
    pub fn all_constrained(matrix: A, rhs: Vec<T>) -> Self {
        let n = matrix.dim();
        assert_eq!(rhs.len(), n);
        Self {
            matrix,
            rhs,
            constrained: vec![true; n],
            sweep: (0..n as u32).collect(),
            colour_split: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `max(1, ‖q‖∞)`, the scale the tolerance is relative to.
    pub fn scale(&self) -> T {
        self.rhs.iter().fold(T::one(), |acc, &q| acc.max(q.abs()))
    }

    /// `(MU - q)_i`.
    #[inline]
    pub fn row_residual(&self, i: usize, u: &[T]) -> T {
        if self.constrained[i] {
            self.matrix.diagonal(i) * u[i] + self.matrix.off_diagonal_dot(i, u) - self.rhs[i]
        } else {
            u[i] - self.rhs[i]
        }
    }

    /// `max_i |min(U_i, (MU - q)_i)|` over the swept rows (fixed rows hold exactly).
    pub fn natural_residual(&self, u: &[T]) -> T {
        self.sweep.iter().fold(T::zero(), |acc, &i| {
            let i = i as usize;
            let r = self.row_residual(i, u);
            acc.max(u[i].min(r).abs())
        })
    }

    /// Natural residual over every row, swept or not.
    pub fn full_natural_residual(&self, u: &[T]) -> T {
        (0..self.dim()).fold(T::zero(), |acc, i| {
            let r = self.row_residual(i, u);
            if self.constrained[i] {
                acc.max(u[i].min(r).abs())
            } else {
                acc.max(r.abs())
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorParams<T> {
    pub omega: T,
    /// Relative tolerance: converged when the natural residual is `≤ tol · max(1, ‖q‖∞)`.
    pub tol: T,
    pub max_iterations: usize,
    /// Sweeps between residual evaluations.
    pub check_every: usize,
    /// Relax each colour block in parallel (red-black orders only).
    pub parallel: bool,
}

impl<T: Scalar> Default for PsorParams<T> {
    fn default() -> Self {
        Self {
            omega: T::lit(1.5),
            tol: T::lit(1e-10),
            max_iterations: 10_000,
            check_every: 8,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorStats<T> {
    pub iterations: usize,
    pub residual: T,
}

/// Projected SOR starting from the guess in `u`; on success `u` holds the solution.
pub fn solve_lcp_psor<T: Scalar, A: LcpMatrix<T>>(
    sys: &LcpSystem<T, A>,
    params: &PsorParams<T>,
    u: &mut [T],
) -> Result<PsorStats<T>, LcpError> {
    let omega = params.omega;
    if !(omega > T::zero() && omega < T::lit(2.0)) {
        return Err(LcpError::InvalidRelaxation(omega.as_f64()));
    }
    if u.len() != sys.dim() {
        return Err(LcpError::SizeMismatch {
            expected: sys.dim(),
            got: u.len(),
        });
    }
    for (i, c) in sys.constrained.iter().enumerate() {
        if !c {
            u[i] = sys.rhs[i];
        }
    }
    for &i in &sys.sweep {
        let i = i as usize;
        if u[i] < T::zero() {
            u[i] = T::zero();
        }
    }
    let threshold = params.tol * sys.scale();
    let check_every = params.check_every.max(1);
    let mut residual = sys.natural_residual(u);
    if residual <= threshold {
        return Ok(PsorStats {
            iterations: 0,
            residual,
        });
    }
    for it in 1..=params.max_iterations {
        match (sys.colour_split, params.parallel) {
            (Some(split), true) => {
                let (first, second) = sys.sweep.split_at(split);
                relax_parallel(sys, omega, first, u);
                relax_parallel(sys, omega, second, u);
            }
            _ => relax_serial(sys, omega, &sys.sweep, u),
        }
        if it % check_every == 0 || it == params.max_iterations {
            residual = sys.natural_residual(u);
            if residual <= threshold {
                return Ok(PsorStats {
                    iterations: it,
                    residual,
                });
            }
        }
    }
    Err(LcpError::NoConvergence {
        iterations: params.max_iterations,
        residual: residual.as_f64(),
    })
}

#[inline]
fn relax_row<T: Scalar, A: LcpMatrix<T>>(sys: &LcpSystem<T, A>, omega: T, i: usize, u: &[T]) -> T {
    let target = (sys.rhs[i] - sys.matrix.off_diagonal_dot(i, u)) * sys.matrix.inv_diagonal(i);
    let cur = u[i];
    let next = cur + omega * (target - cur);
    if next > T::zero() {
        next
    } else {
        T::zero()
    }
}

fn relax_serial<T: Scalar, A: LcpMatrix<T>>(
    sys: &LcpSystem<T, A>,
    omega: T,
    order: &[u32],
    u: &mut [T],
) {
    for &i in order {
        let i = i as usize;
        u[i] = relax_row(sys, omega, i, u);
    }
}

#[derive(Clone, Copy)]
struct SharedSlice<T>(*mut T);
unsafe impl<T: Send> Send for SharedSlice<T> {}
unsafe impl<T: Send> Sync for SharedSlice<T> {}

/// Relaxes a block of mutually independent rows concurrently. The result equals the serial sweep
/// over the same block because no row in the block reads another row of the block.
fn relax_parallel<T: Scalar, A: LcpMatrix<T>>(
    sys: &LcpSystem<T, A>,
    omega: T,
    block: &[u32],
    u: &mut [T],
) {
    let len = u.len();
    let base = SharedSlice(u.as_mut_ptr());
    block.par_chunks(4096).for_each(|chunk| {
        let ptr = base;
        // SAFETY: rows of one colour block never read each other, and each index is written by
        // exactly one task, so reads of other-colour entries do not race with these writes.
        let view = unsafe { std::slice::from_raw_parts(ptr.0 as *const T, len) };
        for &i in chunk {
            let i = i as usize;
            let next = relax_row(sys, omega, i, view);
            unsafe { *ptr.0.add(i) = next };
        }
    });
}
