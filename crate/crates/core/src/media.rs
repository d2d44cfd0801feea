//! Inhomogeneous latent-heat coefficient `g(x)` and its homogenized average `<1/g>`.
//!
//! Three families are supported:
//!
//! * `Constant`: `g ≡ m`.
//! * `PeriodicCheckerboard`: cubes of edge `period / 2` alternating between `m` (even parity of
//!   the summed cell index) and `M` (odd parity). The pattern repeats with `period` along every
//!   axis.
//! * `RandomCheckerboard`: cubes of edge `period`, each independently `m` or `M` with probability
//!   1/2. The value of a cell is a pure function of `(seed, cell index)` so the field is
//!   reproducible and can be evaluated in any order.
//!
//! Checkerboards are piecewise constant. `with_mollification(true)` replaces the jumps by a linear
//! blend over a band of width `period / 8` centred on each cell face, which makes `g` Lipschitz.

use thiserror::Error;

use crate::geometry::GridProblem;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediaError {
    #[error("latent-heat bounds must satisfy 0 < m <= M (got m = {m}, M = {big_m})")]
    InvalidBounds { m: f64, big_m: f64 },
    #[error("period must be positive and finite (got {0})")]
    InvalidPeriod(f64),
    #[error("dimension must be at least 2 (got {0})")]
    InvalidDimension(usize),
    #[error("sampling window {extent} too small: need at least {required} for this medium")]
    ExtentTooSmall { extent: f64, required: f64 },
    #[error("samples_per_cell must be at least 1")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MediumKind {
    Constant,
    PeriodicCheckerboard,
    RandomCheckerboard,
}

impl MediumKind {
    pub fn name(self) -> &'static str {
        match self {
            MediumKind::Constant => "constant",
            MediumKind::PeriodicCheckerboard => "periodic-checkerboard",
            MediumKind::RandomCheckerboard => "random-checkerboard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(MediumKind::Constant),
            "periodic-checkerboard" => Some(MediumKind::PeriodicCheckerboard),
            "random-checkerboard" => Some(MediumKind::RandomCheckerboard),
            _ => None,
        }
    }
}

/// The coefficient `g` of the free-boundary velocity law `V = g |Dv|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentHeatField<T> {
    kind: MediumKind,
    lower: T,
    upper: T,
    period: T,
    seed: u64,
    dimension: usize,
    mollify: bool,
}

impl<T: Scalar> LatentHeatField<T> {
    /// `g ≡ value`.
    pub fn constant(value: T, dimension: usize) -> Result<Self, MediaError> {
        Self::new(MediumKind::Constant, value, value, T::one(), 0, dimension)
    }

    pub fn periodic_checkerboard(
        m: T,
        big_m: T,
        period: T,
        dimension: usize,
    ) -> Result<Self, MediaError> {
        Self::new(
            MediumKind::PeriodicCheckerboard,
            m,
            big_m,
            period,
            0,
            dimension,
        )
    }

    pub fn random_checkerboard(
        m: T,
        big_m: T,
        period: T,
        seed: u64,
        dimension: usize,
    ) -> Result<Self, MediaError> {
        Self::new(
            MediumKind::RandomCheckerboard,
            m,
            big_m,
            period,
            seed,
            dimension,
        )
    }

    pub fn new(
        kind: MediumKind,
        m: T,
        big_m: T,
        period: T,
        seed: u64,
        dimension: usize,
    ) -> Result<Self, MediaError> {
        if !(m > T::zero() && m <= big_m && big_m.is_finite()) {
            return Err(MediaError::InvalidBounds {
                m: m.as_f64(),
                big_m: big_m.as_f64(),
            });
        }
        if !(period > T::zero() && period.is_finite()) {
            return Err(MediaError::InvalidPeriod(period.as_f64()));
        }
        if dimension < 2 {
            return Err(MediaError::InvalidDimension(dimension));
        }
        Ok(Self {
            kind,
            lower: m,
            upper: big_m,
            period,
            seed,
            dimension,
            mollify: false,
        })
    }

    pub fn with_mollification(mut self, on: bool) -> Self {
        self.mollify = on;
        self
    }

    pub fn kind(&self) -> MediumKind {
        self.kind
    }
    pub fn lower(&self) -> T {
        self.lower
    }
    pub fn upper(&self) -> T {
        self.upper
    }
    pub fn period(&self) -> T {
        self.period
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn is_mollified(&self) -> bool {
        self.mollify
    }

    /// Edge length of one constant cell.
    pub fn cell_size(&self) -> T {
        match self.kind {
            MediumKind::PeriodicCheckerboard => self.period / T::lit(2.0),
            _ => self.period,
        }
    }

    /// Value of `g` on the cell with integer index `cell`.
    fn cell_value(&self, cell: &[i64]) -> T {
        let high = match self.kind {
            MediumKind::Constant => false,
            MediumKind::PeriodicCheckerboard => cell.iter().sum::<i64>().rem_euclid(2) == 1,
            MediumKind::RandomCheckerboard => random_cell_bit(self.seed, cell),
        };
        if high {
            self.upper
        } else {
            self.lower
        }
    }

    /// Evaluates `g(x)`. Only the first `dimension` coordinates of `x` are used.
    pub fn eval(&self, x: &[T]) -> T {
        if self.kind == MediumKind::Constant {
            return self.lower;
        }
        let n = self.dimension.min(x.len());
        let cell = self.cell_size();
        let mut index = [0i64; 8];
        let mut frac = [T::zero(); 8];
        for d in 0..n {
            let s = x[d] / cell;
            let k = s.floor();
            index[d] = k.to_i64().unwrap_or(0);
            frac[d] = s - k;
        }
        if !self.mollify {
            return self.cell_value(&index[..n]);
        }

        // Half-width of the blending band in cell units.
        let half_band = self.period / T::lit(16.0) / cell;
        let half = T::lit(0.5);
        let mut neighbour = [0i64; 8];
        let mut own_weight = [T::one(); 8];
        for d in 0..n {
            let f = frac[d];
            let (dist, step) = if f < half { (f, -1) } else { (T::one() - f, 1) };
            neighbour[d] = index[d] + step;
            if dist < half_band {
                own_weight[d] = half + dist / (half_band + half_band);
            }
        }
        let mut acc = T::zero();
        let mut probe = [0i64; 8];
        for corner in 0..(1usize << n) {
            let mut w = T::one();
            for d in 0..n {
                if corner >> d & 1 == 1 {
                    probe[d] = neighbour[d];
                    w *= T::one() - own_weight[d];
                } else {
                    probe[d] = index[d];
                    w *= own_weight[d];
                }
            }
            if w > T::zero() {
                acc += w * self.cell_value(&probe[..n]);
            }
        }
        acc.max(self.lower).min(self.upper)
    }

    /// Estimates the homogenized latent heat `<1/g>`.
    ///
    /// `sample_extent` is the edge length of the sampling window `[0, extent)^n`. The periodic
    /// kind is averaged over exactly one period (larger windows give identical results); the
    /// random kind needs at least 50 cells per axis and averages over all whole cells inside the
    /// window. Unmollified checkerboards are averaged cell by cell, which is exact; mollified
    /// fields use a midpoint rule with `samples_per_cell` points per cell and axis.
    pub fn averaged_latent_heat(
        &self,
        sample_extent: T,
        samples_per_cell: usize,
    ) -> Result<T, MediaError> {
        if samples_per_cell == 0 {
            return Err(MediaError::NoSamples);
        }
        let cells_per_axis = match self.kind {
            MediumKind::Constant => return Ok(T::one() / self.lower),
            MediumKind::PeriodicCheckerboard => {
                if !(sample_extent >= self.period) {
                    return Err(MediaError::ExtentTooSmall {
                        extent: sample_extent.as_f64(),
                        required: self.period.as_f64(),
                    });
                }
                2
            }
            MediumKind::RandomCheckerboard => {
                let required = self.period * T::lit(50.0);
                if !(sample_extent >= required) {
                    return Err(MediaError::ExtentTooSmall {
                        extent: sample_extent.as_f64(),
                        required: required.as_f64(),
                    });
                }
                (sample_extent / self.period)
                    .floor()
                    .to_usize()
                    .unwrap_or(50)
            }
        };
        let n = self.dimension;
        let cell = self.cell_size();
        let per_axis = if self.mollify {
            cells_per_axis * samples_per_cell
        } else {
            cells_per_axis
        };
        let step = cell * T::from_usize_lossy(cells_per_axis) / T::from_usize_lossy(per_axis);
        let total = per_axis.pow(n as u32);
        let mut sum = T::zero();
        let mut counter = vec![0usize; n];
        let mut x = vec![T::zero(); n];
        for _ in 0..total {
            for d in 0..n {
                x[d] = (T::from_usize_lossy(counter[d]) + T::lit(0.5)) * step;
            }
            sum += T::one() / self.eval(&x);
            for c in counter.iter_mut() {
                *c += 1;
                if *c < per_axis {
                    break;
                }
                *c = 0;
            }
        }
        Ok(sum / T::from_usize_lossy(total))
    }
}

/// Deterministic fair coin for a random-checkerboard cell.
pub(crate) fn random_cell_bit(seed: u64, cell: &[i64]) -> bool {
    let mut h = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    for &c in cell {
        h = splitmix64(h ^ c as u64);
    }
    h >> 63 == 1
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Right-hand side of the obstacle problem: `f = v0` where `v0 > 0`, `f = -1/g` where `v0 = 0`.
pub fn build_f<T: Scalar>(field: &LatentHeatField<T>, v0: &[T], grid: &GridProblem<T>) -> Vec<T> {
    let mut x = [T::zero(); 3];
    v0.iter()
        .enumerate()
        .map(|(idx, &v)| {
            if v > T::zero() {
                v
            } else {
                grid.node_position(idx, &mut x);
                -T::one() / field.eval(&x[..grid.dimension()])
            }
        })
        .collect()
}
