//! Space-time grids, fields, boundary elements and discrete differential
//! operators.
//!
//! Collocation nodes sit at cell centres. A grid covers
//! `origin + [0, dims*h]` in space and `t0 + [0, nt*dt]` in time; node `(m, c)`
//! is cell `c` of time slab `m`.

use std::io::{self, Write};

use thiserror::Error;

use crate::kernels::SpaceTimePoint;
use crate::lattice::LatticeSpec;
use crate::spinor::Spinor;
use crate::witt_algebra::WittQuaternion;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("axis {axis} has {nodes} nodes; at least 3 are needed on a non-periodic axis")]
    GridTooSmall { axis: usize, nodes: usize },
    #[error("time axis has {nt} slabs; at least 2 are needed")]
    TooFewSlabs { nt: usize },
    #[error("{name} = {value} is not an integer multiple of the spacing {spacing}")]
    NotAMultiple { name: &'static str, value: f64, spacing: f64 },
    #[error("periodic axis {axis} must have unit pitch (dims*h = 1), got {pitch}")]
    PitchMismatch { axis: usize, pitch: f64 },
    #[error("free-axis extents: expected {expected}, got {got}")]
    ExtentCount { expected: usize, got: usize },
    #[error("field does not live on this grid")]
    ShapeMismatch,
}

/// Boundary behaviour of one spatial axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrap {
    None,
    Periodic,
    Antiperiodic,
}

impl Wrap {
    pub fn is_wrapped(self) -> bool {
        self != Wrap::None
    }

    /// Factor picked up when a stencil crosses the fundamental cell.
    pub fn crossing_sign(self) -> f64 {
        if self == Wrap::Antiperiodic {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    pub h: f64,
    pub dt: f64,
    pub dims: [usize; 3],
    pub nt: usize,
    pub wrap: [Wrap; 3],
    pub origin: [f64; 3],
    pub t0: f64,
}

fn count_of(name: &'static str, value: f64, spacing: f64) -> Result<usize, DomainError> {
    if !(value > 0.0) {
        return Err(DomainError::NonPositive { name, value });
    }
    let n = (value / spacing).round();
    if n < 1.0 || ((n * spacing - value) / value).abs() > 1e-9 {
        return Err(DomainError::NotAMultiple { name, value, spacing });
    }
    Ok(n as usize)
}

impl SpaceTimeGrid {
    pub fn new(
        h: f64,
        dt: f64,
        dims: [usize; 3],
        nt: usize,
        wrap: [Wrap; 3],
    ) -> Result<Self, DomainError> {
        if !(h > 0.0) {
            return Err(DomainError::NonPositive { name: "h", value: h });
        }
        if !(dt > 0.0) {
            return Err(DomainError::NonPositive { name: "dt", value: dt });
        }
        for a in 0..3 {
            if wrap[a].is_wrapped() {
                let pitch = dims[a] as f64 * h;
                if (pitch - 1.0).abs() > 1e-9 {
                    return Err(DomainError::PitchMismatch { axis: a, pitch });
                }
            } else if dims[a] < 3 {
                return Err(DomainError::GridTooSmall { axis: a, nodes: dims[a] });
            }
        }
        if nt < 2 {
            return Err(DomainError::TooFewSlabs { nt });
        }
        Ok(Self { h, dt, dims, nt, wrap, origin: [0.0; 3], t0: 0.0 })
    }

    /// Cube `[0,1]^3 x [0,1]` with `n` cells per axis and `nt` slabs.
    pub fn unit_box(n: usize, nt: usize) -> Result<Self, DomainError> {
        Self::new(1.0 / n as f64, 1.0 / nt as f64, [n; 3], nt, [Wrap::None; 3])
    }

    pub fn periodic(&self) -> [bool; 3] {
        self.wrap.map(Wrap::is_wrapped)
    }

    pub fn ncells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn len(&self) -> usize {
        self.ncells() * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    pub fn horizon(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.dims[axis] as f64 * self.h
    }

    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    pub fn cell_of(&self, idx: usize) -> [usize; 3] {
        let l = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, l]
    }

    /// Flat node index, time-major.
    pub fn index(&self, m: usize, c: [usize; 3]) -> usize {
        m * self.ncells() + self.cell_index(c)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as f64 + 0.5) * self.h
    }

    pub fn center(&self, c: [usize; 3]) -> [f64; 3] {
        [self.coord(0, c[0]), self.coord(1, c[1]), self.coord(2, c[2])]
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t0 + (m as f64 + 0.5) * self.dt
    }

    pub fn point(&self, idx: usize) -> SpaceTimePoint {
        let m = idx / self.ncells();
        let c = self.cell_of(idx % self.ncells());
        SpaceTimePoint { x: self.center(c), t: self.time(m) }
    }
}

/// Spinor-valued grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpaceTimeGrid,
    values: Vec<Spinor>,
}

impl Field {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self { grid: grid.clone(), values: vec![Spinor::ZERO; grid.len()] }
    }

    pub fn from_values(grid: &SpaceTimeGrid, values: Vec<Spinor>) -> Result<Self, DomainError> {
        if values.len() != grid.len() {
            return Err(DomainError::ShapeMismatch);
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Samples `f(x, t)` at every node.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn([f64; 3], f64) -> Spinor) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let p = grid.point(idx);
                f(p.x, p.t)
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Spinor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Spinor] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Spinor> {
        self.values
    }

    pub fn at(&self, m: usize, c: [usize; 3]) -> Spinor {
        self.values[self.grid.index(m, c)]
    }

    pub fn same_grid(&self, other: &Field) -> Result<(), DomainError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(DomainError::ShapeMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Spinor) -> Spinor) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(Spinor, Spinor) -> Spinor) -> Result<Field, DomainError> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(other.values.iter()).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &Field) -> Result<Field, DomainError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field, DomainError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| v.scale(a))
    }

    /// Discrete L2 inner product over all 8 real components.
    pub fn dot(&self, other: &Field) -> Result<f64, DomainError> {
        self.same_grid(other)?;
        let w = self.grid.cell_volume() * self.grid.dt;
        Ok(self.values.iter().zip(other.values.iter()).map(|(a, b)| a.dot(b)).sum::<f64>() * w)
    }

    pub fn l2(&self) -> f64 {
        discrete_norm(self, NormKind::L2)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flat_map(|v| v.0.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Flattened real components, node-major.
    pub fn to_reals(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.0).collect()
    }

    pub fn from_reals(grid: &SpaceTimeGrid, reals: &[f64]) -> Result<Field, DomainError> {
        if reals.len() != 8 * grid.len() {
            return Err(DomainError::ShapeMismatch);
        }
        let values = reals.chunks_exact(8).map(|c| Spinor(std::array::from_fn(|i| c[i]))).collect();
        Ok(Field { grid: grid.clone(), values })
    }
}

/// Derivative along spatial `axis`: central in the interior, second-order
/// one-sided at non-periodic edges, wrapped (with the spin sign) on periodic
/// axes.
pub fn diff_space(u: &Field, axis: usize) -> Field {
    let g = u.grid();
    let n = g.dims[axis];
    let wrap = g.wrap[axis];
    let inv2h = 0.5 / g.h;
    let mut out = Field::zeros(g);
    let ncell = g.ncells();
    for m in 0..g.nt {
        for ci in 0..ncell {
            let c = g.cell_of(ci);
            let i = c[axis];
            let val = |k: isize| -> Spinor {
                let mut cc = c;
                let mut sign = 1.0;
                let mut kk = k;
                if kk < 0 {
                    kk += n as isize;
                    sign = wrap.crossing_sign();
                } else if kk >= n as isize {
                    kk -= n as isize;
                    sign = wrap.crossing_sign();
                }
                cc[axis] = kk as usize;
                u.at(m, cc).scale(sign)
            };
            let i = i as isize;
            let d = if wrap.is_wrapped() || (i > 0 && i < n as isize - 1) {
                (val(i + 1) - val(i - 1)).scale(inv2h)
            } else if i == 0 {
                (val(0).scale(-3.0) + val(1).scale(4.0) - val(2)).scale(inv2h)
            } else {
                (val(i).scale(3.0) - val(i - 1).scale(4.0) + val(i - 2)).scale(inv2h)
            };
            out.values[g.index(m, c)] = d;
        }
    }
    out
}

/// Time derivative: central in the interior, first-order one-sided on the
/// first and last slab.
pub fn diff_time(u: &Field) -> Field {
    let g = u.grid();
    let nc = g.ncells();
    let mut out = Field::zeros(g);
    for m in 0..g.nt {
        let (a, b, w) = if m == 0 {
            (1, 0, 1.0 / g.dt)
        } else if m == g.nt - 1 {
            (m, m - 1, 1.0 / g.dt)
        } else {
            (m + 1, m - 1, 0.5 / g.dt)
        };
        for ci in 0..nc {
            out.values[m * nc + ci] = (u.values[a * nc + ci] - u.values[b * nc + ci]).scale(w);
        }
    }
    out
}

/// `sum_j e_j d_j u`.
pub fn discrete_spatial_dirac(u: &Field) -> Field {
    let mut out = Field::zeros(u.grid());
    for j in 0..3 {
        let d = diff_space(u, j);
        for (o, v) in out.values.iter_mut().zip(d.values.iter()) {
            *o += v.e(j);
        }
    }
    out
}

/// Divergence of the vector part of the upper quaternion, as a scalar field.
pub fn discrete_div(u: &Field) -> Field {
    discrete_spatial_dirac(u).map(|v| Spinor::scalar(-v[0]))
}

/// Gradient of the scalar part of the upper quaternion, as a vector field.
pub fn discrete_grad(p: &Field) -> Field {
    discrete_spatial_dirac(&p.map(|v| Spinor::scalar(v[0])))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    W11,
}

pub fn discrete_norm(u: &Field, kind: NormKind) -> f64 {
    let g = u.grid();
    let w = g.cell_volume() * g.dt;
    let mut acc: f64 = u.values.iter().map(Spinor::norm_sq).sum();
    if kind == NormKind::W11 {
        for j in 0..3 {
            acc += diff_space(u, j).values.iter().map(Spinor::norm_sq).sum::<f64>();
        }
        acc += diff_time(u).values.iter().map(Spinor::norm_sq).sum::<f64>();
    }
    (acc * w).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Face patch on the plane `x_axis = side * extent`; `face` indexes the two
    /// remaining axes in increasing order.
    Lateral { axis: usize, side: usize, face: [usize; 2], slab: usize },
    /// Spatial cell on the initial (`top = false`) or terminal time plane.
    Cap { top: bool, cell: [usize; 3] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryElement {
    pub pos: SpaceTimePoint,
    pub weight: f64,
    pub conormal: WittQuaternion,
    pub kind: BoundaryKind,
}

/// The two axes spanning a face normal to `axis`.
pub fn face_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub grid: SpaceTimeGrid,
    pub lattice: LatticeSpec,
    pub boundary: Vec<BoundaryElement>,
    lateral_len: usize,
}

impl Domain {
    fn assemble(grid: SpaceTimeGrid, lattice: LatticeSpec) -> Self {
        let mut boundary = Vec::new();
        for axis in 0..3 {
            if grid.wrap[axis].is_wrapped() {
                continue;
            }
            let [b, c] = face_axes(axis);
            for side in 0..2 {
                let mut normal = [0.0; 3];
                normal[axis] = if side == 1 { 1.0 } else { -1.0 };
                for slab in 0..grid.nt {
                    for ib in 0..grid.dims[b] {
                        for ic in 0..grid.dims[c] {
                            let mut x = [0.0; 3];
                            x[axis] = grid.origin[axis] + side as f64 * grid.extent(axis);
                            x[b] = grid.coord(b, ib);
                            x[c] = grid.coord(c, ic);
                            boundary.push(BoundaryElement {
                                pos: SpaceTimePoint { x, t: grid.time(slab) },
                                weight: grid.h * grid.h * grid.dt,
                                conormal: WittQuaternion::vector(normal),
                                kind: BoundaryKind::Lateral { axis, side, face: [ib, ic], slab },
                            });
                        }
                    }
                }
            }
        }
        let lateral_len = boundary.len();
        for top in [false, true] {
            let t = if top { grid.t0 + grid.horizon() } else { grid.t0 };
            let conormal = if top { WittQuaternion::F } else { -WittQuaternion::F };
            for ci in 0..grid.ncells() {
                let cell = grid.cell_of(ci);
                boundary.push(BoundaryElement {
                    pos: SpaceTimePoint { x: grid.center(cell), t },
                    weight: grid.cell_volume(),
                    conormal,
                    kind: BoundaryKind::Cap { top, cell },
                });
            }
        }
        Domain { grid, lattice, boundary, lateral_len }
    }

    pub fn lateral_len(&self) -> usize {
        self.lateral_len
    }

    /// Index range of the initial cap within `boundary`.
    pub fn bottom_range(&self) -> std::ops::Range<usize> {
        self.lateral_len..self.lateral_len + self.grid.ncells()
    }

    pub fn top_range(&self) -> std::ops::Range<usize> {
        let s = self.lateral_len + self.grid.ncells();
        s..s + self.grid.ncells()
    }

    /// Index of the lateral element on `(axis, side)` at `face`, `slab`.
    pub fn lateral_index(&self, axis: usize, side: usize, face: [usize; 2], slab: usize) -> usize {
        let g = &self.grid;
        let mut off = 0;
        for a in 0..axis {
            if !g.wrap[a].is_wrapped() {
                let [b, c] = face_axes(a);
                off += 2 * g.nt * g.dims[b] * g.dims[c];
            }
        }
        let [b, c] = face_axes(axis);
        let per_slab = g.dims[b] * g.dims[c];
        off + (side * g.nt + slab) * per_slab + face[0] * g.dims[c] + face[1]
    }
}

/// Axis-aligned box `[0, extent] x [0, horizon]`.
pub fn build_box_domain(extent: [f64; 3], horizon: f64, h: f64, dt: f64) -> Result<Domain, DomainError> {
    if !(h > 0.0) {
        return Err(DomainError::NonPositive { name: "h", value: h });
    }
    if !(dt > 0.0) {
        return Err(DomainError::NonPositive { name: "dt", value: dt });
    }
    const NAMES: [&str; 3] = ["extent[0]", "extent[1]", "extent[2]"];
    let mut dims = [0; 3];
    for a in 0..3 {
        dims[a] = count_of(NAMES[a], extent[a], h)?;
    }
    let nt = count_of("horizon", horizon, dt)?;
    let grid = SpaceTimeGrid::new(h, dt, dims, nt, [Wrap::None; 3])?;
    Ok(Domain::assemble(grid, LatticeSpec::euclidean()))
}

/// Quotient of space by the rank-`spec.rank` unit lattice on the leading axes;
/// the remaining axes are boxes of the given extents.
pub fn build_quotient_domain(
    spec: &LatticeSpec,
    free_extent: &[f64],
    horizon: f64,
    h: f64,
    dt: f64,
) -> Result<Domain, DomainError> {
    let rank = spec.rank();
    if free_extent.len() != 3 - rank {
        return Err(DomainError::ExtentCount { expected: 3 - rank, got: free_extent.len() });
    }
    if !(h > 0.0) {
        return Err(DomainError::NonPositive { name: "h", value: h });
    }
    if !(dt > 0.0) {
        return Err(DomainError::NonPositive { name: "dt", value: dt });
    }
    let mut dims = [0; 3];
    let mut wrap = [Wrap::None; 3];
    for a in 0..3 {
        if a < rank {
            dims[a] = count_of("lattice pitch", 1.0, h)?;
            wrap[a] = if spec.anti_flags()[a] { Wrap::Antiperiodic } else { Wrap::Periodic };
        } else {
            dims[a] = count_of("free extent", free_extent[a - rank], h)?;
        }
    }
    let nt = count_of("horizon", horizon, dt)?;
    let grid = SpaceTimeGrid::new(h, dt, dims, nt, wrap)?;
    Ok(Domain::assemble(grid, spec.clone()))
}

fn fmt_num(x: f64) -> String {
    format!("{x:.12e}")
}

/// CSV with columns `x,y,z,t,a0,a1,a2,a3,b0,b1,b2,b3` (upper and lower
/// quaternion), time-major row order.
pub fn write_field_csv(u: &Field, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "x,y,z,t,a0,a1,a2,a3,b0,b1,b2,b3")?;
    let g = u.grid();
    for (idx, v) in u.values().iter().enumerate() {
        let p = g.point(idx);
        let cols: Vec<String> = p.x.iter().chain(std::iter::once(&p.t)).chain(v.0.iter()).map(|&c| fmt_num(c)).collect();
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Solver view `x,y,z,t,u1,u2,u3,p`: vector part of `u` and scalar part of `p`.
pub fn write_solver_csv(u: &Field, p: &Field, mut w: impl Write) -> io::Result<()> {
    if u.same_grid(p).is_err() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "velocity and pressure grids differ"));
    }
    writeln!(w, "x,y,z,t,u1,u2,u3,p")?;
    let g = u.grid();
    for idx in 0..g.len() {
        let pt = g.point(idx);
        let v = u.values()[idx];
        let cols = [pt.x[0], pt.x[1], pt.x[2], pt.t, v[1], v[2], v[3], p.values()[idx][0]];
        let cols: Vec<String> = cols.iter().map(|&c| fmt_num(c)).collect();
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::unit_box(n, 4).unwrap()
    }

    #[test]
    fn box_counts_match_enumeration() {
        let d = build_box_domain([1.0; 3], 1.0, 0.25, 0.25).unwrap();
        assert_eq!(d.lateral_len(), 6 * 16 * 4);
        assert_eq!(d.boundary.len(), 6 * 16 * 4 + 2 * 64);
        let lat: f64 = d.boundary[..d.lateral_len()].iter().map(|e| e.weight).sum();
        assert!((lat - 6.0).abs() < 1e-12);
        let caps: f64 = d.boundary[d.lateral_len()..].iter().map(|e| e.weight).sum();
        assert!((caps - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conormals() {
        let d = build_box_domain([1.0; 3], 1.0, 0.25, 0.25).unwrap();
        for e in &d.boundary {
            assert!((e.conormal.coeff_norm() - 1.0).abs() < 1e-15);
            match e.kind {
                BoundaryKind::Lateral { axis, side, .. } => {
                    let v = e.conormal.to_array()[1 + axis];
                    assert_eq!(v, if side == 1 { 1.0 } else { -1.0 });
                    assert_eq!(e.pos.x[axis], side as f64);
                }
                BoundaryKind::Cap { top, .. } => {
                    assert_eq!(e.conormal, if top { WittQuaternion::F } else { -WittQuaternion::F });
                }
            }
        }
    }

    #[test]
    fn lateral_index_matches_layout() {
        let spec = LatticeSpec::new(1, vec![true]).unwrap();
        let d = build_quotient_domain(&spec, &[1.0, 1.0], 1.0, 0.25, 0.5).unwrap();
        for (i, e) in d.boundary[..d.lateral_len()].iter().enumerate() {
            if let BoundaryKind::Lateral { axis, side, face, slab } = e.kind {
                assert_eq!(d.lateral_index(axis, side, face, slab), i);
                assert_ne!(axis, 0);
            }
        }
    }

    #[test]
    fn quotient_domains() {
        let spec = LatticeSpec::new(3, vec![false, true, false]).unwrap();
        let d = build_quotient_domain(&spec, &[], 1.0, 0.25, 0.25).unwrap();
        assert_eq!(d.lateral_len(), 0);
        assert_eq!(d.boundary.len(), 2 * 64);
        assert_eq!(d.grid.wrap[1], Wrap::Antiperiodic);
        let spec = LatticeSpec::new(1, vec![false]).unwrap();
        let d = build_quotient_domain(&spec, &[0.75, 1.0], 1.0, 0.25, 0.5).unwrap();
        assert_eq!(d.grid.dims, [4, 3, 4]);
        assert_eq!(d.grid.len(), 4 * 3 * 4 * 2);
        let bad = build_quotient_domain(&spec, &[0.75, 1.0], 1.0, 0.3, 0.5);
        assert!(bad.is_err());
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(build_box_domain([0.5, 1.0, 1.0], 1.0, 0.25, 0.25).is_err());
        assert!(build_box_domain([1.0, 1.0, 1.0], 1.0, 0.25, 0.75).is_err());
        assert!(build_box_domain([1.0, -1.0, 1.0], 1.0, 0.25, 0.25).is_err());
    }

    #[test]
    fn divergence_and_gradient_of_polynomials() {
        let g = grid(6);
        let u = Field::from_fn(&g, |x, _| Spinor::vector([x[0], 0.0, 0.0]));
        let div = discrete_div(&u);
        assert!(div.values().iter().all(|v| (v[0] - 1.0).abs() < 1e-12));
        let p = Field::from_fn(&g, |x, _| Spinor::scalar(x[0] * x[0]));
        let gp = discrete_grad(&p);
        for idx in 0..g.len() {
            let pt = g.point(idx);
            let c = g.cell_of(idx % g.ncells());
            if c[0] > 0 && c[0] < 5 {
                assert!((gp.values()[idx][1] - 2.0 * pt.x[0]).abs() < 1e-12);
            }
        }
        let rot = Field::from_fn(&g, |x, _| Spinor::vector([-x[1], x[0], 0.0]));
        let d = discrete_spatial_dirac(&rot);
        for v in d.values() {
            assert!(v[0].abs() < 1e-12);
            assert!((v[3] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_sided_stencils_are_second_order_exact_on_quadratics() {
        let g = grid(5);
        let u = Field::from_fn(&g, |x, _| Spinor::scalar(x[2] * x[2] - x[2]));
        let d = diff_space(&u, 2);
        for idx in 0..g.len() {
            let z = g.point(idx).x[2];
            assert!((d.values()[idx][0] - (2.0 * z - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_stencils_commute_with_shifts() {
        let spec = LatticeSpec::new(3, vec![true, false, false]).unwrap();
        let d = build_quotient_domain(&spec, &[], 1.0, 0.125, 0.5).unwrap();
        let g = &d.grid;
        let u = Field::from_fn(g, |x, t| {
            let s = (std::f64::consts::PI * x[0]).sin() * (2.0 * std::f64::consts::PI * x[1]).cos();
            Spinor([s, t, 0.0, s * s, 0.0, 1.0, 0.0, s])
        });
        let shift = |f: &Field| -> Field {
            let mut out = Field::zeros(g);
            for idx in 0..g.len() {
                let m = idx / g.ncells();
                let mut c = g.cell_of(idx % g.ncells());
                c[1] = (c[1] + 1) % g.dims[1];
                out.values_mut()[g.index(m, c)] = f.values()[idx];
            }
            out
        };
        let a = discrete_spatial_dirac(&shift(&u));
        let b = shift(&discrete_spatial_dirac(&u));
        assert_eq!(a, b);
    }

    #[test]
    fn norms() {
        let g = grid(4);
        let z = Field::zeros(&g);
        assert_eq!(discrete_norm(&z, NormKind::L2), 0.0);
        assert_eq!(discrete_norm(&z, NormKind::W11), 0.0);
        let c = Field::from_fn(&g, |_, _| Spinor([3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
        assert!((discrete_norm(&c, NormKind::L2) - 5.0).abs() < 1e-12);
        assert!((discrete_norm(&c, NormKind::W11) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn csv_header_and_rows() {
        let g = grid(3);
        let u = Field::from_fn(&g, |x, _| Spinor::vector(x));
        let mut buf = Vec::new();
        write_solver_csv(&u, &Field::zeros(&g), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,z,t,u1,u2,u3,p"));
        assert_eq!(text.lines().count(), g.len() + 1);
        let mut buf = Vec::new();
        write_field_csv(&u, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,y,z,t,a0,"));
    }
}
