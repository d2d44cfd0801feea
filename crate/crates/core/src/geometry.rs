//! Computational box, the core ball `K`, the initial liquid ball `Ω₀`, and initial data `v₀`.

use thiserror::Error;

use crate::grid::{CartesianGrid, GridFunction};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be 2 or 3 (got {0})")]
    Dimension(usize),
    #[error("mesh size h must be positive (got {0})")]
    MeshSize(f64),
    #[error("radii must satisfy 0 < core.radius < omega0.radius < grid.extent (got a = {a}, b = {b}, extent = {extent})")]
    Radii { a: f64, b: f64, extent: f64 },
    #[error("annulus omega0.radius - core.radius = {width} spans fewer than 4 cells of size {h}")]
    UnderResolved { width: f64, h: f64 },
    #[error("boundary datum must be positive (got {0})")]
    Datum(f64),
}

/// Radial shape of `v₀` on `Ω₀ \ K`. `s = (|x| - a) / (b - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialProfile {
    /// `datum * (1 - s)`.
    Linear,
    /// `datum * (1 - s) * (1 + s - s²)`: flat at `∂K`, slope `-datum / (b - a)` at `∂Ω₀`.
    Cubic,
}

impl InitialProfile {
    pub fn name(self) -> &'static str {
        match self {
            InitialProfile::Linear => "linear",
            InitialProfile::Cubic => "cubic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(InitialProfile::Linear),
            "cubic" => Some(InitialProfile::Cubic),
            _ => None,
        }
    }

    /// Profile value at radius `r`.
    pub fn eval<T: Scalar>(self, r: T, a: T, b: T, datum: T) -> T {
        if r <= a {
            return datum;
        }
        if r >= b {
            return T::zero();
        }
        let s = (r - a) / (b - a);
        let one = T::one();
        match self {
            InitialProfile::Linear => datum * (one - s),
            InitialProfile::Cubic => datum * (one - s) * (one + s - s * s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Inside `K`: Dirichlet value `datum * t` for the time-integrated unknown.
    Core,
    /// Free node of the complementarity problem.
    Fluid,
    /// On a face of the truncated box: Dirichlet zero.
    Far,
}

/// Per-node classification of a [`GridProblem`].
pub type NodeMask = Vec<NodeKind>;

/// Geometry and initial data of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProblem<T> {
    grid: CartesianGrid<T>,
    core_radius: T,
    omega0_radius: T,
    datum: T,
    profile: InitialProfile,
    mask: NodeMask,
    v0: Vec<T>,
}

impl<T: Scalar> GridProblem<T> {
    pub fn grid(&self) -> &CartesianGrid<T> {
        &self.grid
    }
    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }
    pub fn h(&self) -> T {
        self.grid.h()
    }
    pub fn extent(&self) -> T {
        self.grid.extent()
    }
    pub fn core_radius(&self) -> T {
        self.core_radius
    }
    pub fn omega0_radius(&self) -> T {
        self.omega0_radius
    }
    pub fn datum(&self) -> T {
        self.datum
    }
    pub fn profile(&self) -> InitialProfile {
        self.profile
    }
    pub fn mask(&self) -> &[NodeKind] {
        &self.mask
    }
    pub fn v0(&self) -> &[T] {
        &self.v0
    }
    pub fn len(&self) -> usize {
        self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
    pub fn node_position(&self, idx: usize, x: &mut [T; 3]) {
        self.grid.position(idx, x)
    }

    pub fn v0_function(&self) -> GridFunction<T> {
        GridFunction::new(self.grid.clone(), self.v0.clone())
    }

    /// Same geometry with a different initial datum on each node (used for comparison studies).
    /// Values on core nodes are forced to the boundary datum and far nodes to zero.
    pub fn with_v0(&self, mut v0: Vec<T>) -> Self {
        assert_eq!(v0.len(), self.len());
        for (v, kind) in v0.iter_mut().zip(&self.mask) {
            match kind {
                NodeKind::Core => *v = self.datum,
                NodeKind::Far => *v = T::zero(),
                NodeKind::Fluid => *v = v.max(T::zero()),
            }
        }
        Self { v0, ..self.clone() }
    }
}

/// Builds the grid, node mask and sampled `v₀`.
///
/// The box `[-extent, extent]^n` is discretised with `round(extent / h)` cells per half axis.
pub fn make_grid<T: Scalar>(
    dimension: usize,
    h: T,
    extent: T,
    core_radius: T,
    omega0_radius: T,
    datum: T,
    profile: InitialProfile,
) -> Result<GridProblem<T>, GeometryError> {
    if dimension != 2 && dimension != 3 {
        return Err(GeometryError::Dimension(dimension));
    }
    if !(h > T::zero() && h.is_finite()) {
        return Err(GeometryError::MeshSize(h.as_f64()));
    }
    let (a, b) = (core_radius, omega0_radius);
    if !(a > T::zero() && a < b && b < extent) {
        return Err(GeometryError::Radii {
            a: a.as_f64(),
            b: b.as_f64(),
            extent: extent.as_f64(),
        });
    }
    if !(datum > T::zero() && datum.is_finite()) {
        return Err(GeometryError::Datum(datum.as_f64()));
    }
    // Small slack so that e.g. (0.5 - 0.25) / 0.0625 = 4 is accepted despite rounding.
    if (b - a) / h < T::lit(4.0) - T::lit(1e-9) {
        return Err(GeometryError::UnderResolved {
            width: (b - a).as_f64(),
            h: h.as_f64(),
        });
    }
    let half = (extent / h).round().to_usize().unwrap_or(0);
    let grid = CartesianGrid::new(dimension, h, half);
    if !(grid.extent() > b) {
        return Err(GeometryError::Radii {
            a: a.as_f64(),
            b: b.as_f64(),
            extent: grid.extent().as_f64(),
        });
    }
    let mask = mask_for(&grid, a);
    let v0 = (0..grid.len())
        .map(|idx| match mask[idx] {
            NodeKind::Core => datum,
            NodeKind::Far => T::zero(),
            NodeKind::Fluid => profile.eval(grid.radius(idx), a, b, datum),
        })
        .collect();
    Ok(GridProblem {
        grid,
        core_radius: a,
        omega0_radius: b,
        datum,
        profile,
        mask,
        v0,
    })
}

fn mask_for<T: Scalar>(grid: &CartesianGrid<T>, core_radius: T) -> NodeMask {
    // Closed ball; tolerance keeps nodes at exactly |x| = a inside K despite rounding.
    let cutoff = core_radius * (T::one() + T::lit(1e-12));
    (0..grid.len())
        .map(|idx| {
            if grid.on_box_face(idx) {
                NodeKind::Far
            } else if grid.radius(idx) <= cutoff {
                NodeKind::Core
            } else {
                NodeKind::Fluid
            }
        })
        .collect()
}

/// Tags every node as core, fluid or far.
pub fn classify_nodes<T: Scalar>(grid: &GridProblem<T>) -> NodeMask {
    mask_for(&grid.grid, grid.core_radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridProblem<f64> {
        make_grid(2, 0.02, 2.0, 0.25, 0.5, 1.0, InitialProfile::Linear).unwrap()
    }

    #[test]
    fn node_count() {
        let g = sample();
        assert_eq!(g.grid().dims(), [201, 201, 1]);
    }

    #[test]
    fn initial_data_on_core_and_outside() {
        let g = sample();
        for idx in 0..g.len() {
            let r = g.grid().radius(idx);
            if r <= 0.25 {
                assert_eq!(g.v0()[idx], 1.0);
            }
            if r >= 0.5 {
                assert_eq!(g.v0()[idx], 0.0);
            }
            if r > 0.25 && r < 0.5 && g.mask()[idx] == NodeKind::Fluid {
                assert!(g.v0()[idx] > 0.0);
            }
        }
        assert_eq!(InitialProfile::Linear.eval(0.25, 0.25, 0.5, 1.0), 1.0);
        assert_eq!(InitialProfile::Cubic.eval(0.25, 0.25, 0.5, 1.0), 1.0);
    }

    #[test]
    fn cubic_profile_has_nonzero_slope_at_outer_radius() {
        let (a, b, d) = (0.25f64, 0.5, 1.0);
        let eps = 1e-6;
        let slope = (InitialProfile::Cubic.eval(b - eps, a, b, d)
            - InitialProfile::Cubic.eval(b - 2.0 * eps, a, b, d))
            / eps;
        assert!((slope + d / (b - a)).abs() < 1e-3);
        let flat = (InitialProfile::Cubic.eval(a + eps, a, b, d) - d) / eps;
        assert!(flat.abs() < 1e-3);
    }

    #[test]
    fn classification() {
        let g = sample();
        let mask = classify_nodes(&g);
        assert_eq!(mask, g.mask());
        let grid = g.grid();
        assert_eq!(mask[grid.index([100, 100, 0])], NodeKind::Core);
        // |x| = 0.375 on the x axis.
        let i = 100 + (0.375f64 / 0.02).round() as usize;
        assert!(((i as f64 - 100.0) * 0.02 - 0.375).abs() < 0.011);
        assert_eq!(mask[grid.index([i, 100, 0])], NodeKind::Fluid);
        assert_eq!(mask[grid.index([200, 100, 0])], NodeKind::Far);
        assert_eq!(mask[grid.index([0, 0, 0])], NodeKind::Far);
    }

    #[test]
    fn core_is_radially_monotone() {
        let g = sample();
        let grid = g.grid();
        for j in 0..201usize {
            // Along each row, core nodes form one contiguous run centred on the axis.
            let core: Vec<usize> = (0..201)
                .filter(|&i| g.mask()[grid.index([i, j, 0])] == NodeKind::Core)
                .collect();
            if let (Some(&lo), Some(&hi)) = (core.first(), core.last()) {
                assert_eq!(hi - lo + 1, core.len());
                assert_eq!(lo + hi, 200);
            }
        }
    }

    #[test]
    fn invalid_geometry() {
        let bad = make_grid(2, 0.02, 2.0, 0.5, 0.25, 1.0, InitialProfile::Linear);
        assert!(matches!(bad, Err(GeometryError::Radii { .. })));
        let bad = make_grid(2, 0.1, 2.0, 0.25, 0.5, 1.0, InitialProfile::Linear);
        assert!(matches!(bad, Err(GeometryError::UnderResolved { .. })));
        let bad = make_grid(4, 0.02, 2.0, 0.25, 0.5, 1.0, InitialProfile::Linear);
        assert!(matches!(bad, Err(GeometryError::Dimension(4))));
    }
}
