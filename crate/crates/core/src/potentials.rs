//! Discrete Teodorescu transform `T`, Cauchy transform `F`, trace and the
//! Bergman projections `P = F (tr T F)⁺ tr T`, `Q = I - P`.
//!
//! Kernels are applied as `E(y - x, τ - t)` with `(y, τ)` the target and
//! `(x, t)` the source, so all operators are causal. Densities are piecewise
//! constant in space (per cell or face patch) and piecewise linear in time
//! between slab centres, constant on the first half slab. Against these the
//! kernel is integrated exactly in space (error functions) and by composite
//! Gauss–Legendre in `σ = √s` in time. The `f`-part `∂s(HΦ)` is integrated by
//! parts, which includes the `(1/k) f δ` term of the distributional kernel.
//!
//! On quotient domains each wrapped axis uses the signed periodic sum of the
//! one-dimensional Gaussian factors; `Φ` factorizes over axes and so does the
//! spin-structure sign, so this equals the lattice-periodized kernel.

use std::sync::{Arc, OnceLock};

use faer::prelude::*;
use faer::{Mat, Side};
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{face_axes, BoundaryKind, Domain, DomainError, Field};
use crate::kernels::{Convention, KernelParams};
use crate::lattice::{signed_axis_sum, LatticeSpec};
use crate::quadrature::SqrtRule;
use crate::spectral::{accumulate, Fft3, KernelHat, KernelTable, SlabHat};
use crate::spinor::Spinor;

/// Condition-number estimate above which the ridge is increased.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("operators require the calibrated convention {expected:?}, got {got:?}")]
    Uncalibrated { expected: Convention, got: Convention },
    #[error("field does not live on the operator grid")]
    GridMismatch,
    #[error("boundary data has {got} values, the domain has {expected} elements")]
    BoundaryShape { expected: usize, got: usize },
    #[error("{name} must be positive, got {value}")]
    BadOption { name: &'static str, value: f64 },
    #[error("Bergman boundary system is ill-conditioned (estimated condition number {cond:e})")]
    Conditioning { cond: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContextOptions {
    /// Relative tolerance of the one-dimensional lattice sums.
    pub quad_tol: f64,
    /// Ridge of the boundary system relative to its mean diagonal.
    pub bergman_reg: f64,
    /// Gauss points per time panel.
    pub quad_points: usize,
    /// Iterated-Tikhonov refinement steps applied after the ridge solve.
    pub refine_steps: usize,
}

impl Default for ContextOptions {
    fn default() -> Self {
        Self { quad_tol: 1e-15, bergman_reg: 1e-10, quad_points: 12, refine_steps: 2 }
    }
}

/// Values per boundary element, in the order of `Domain::boundary`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub values: Vec<Spinor>,
}

impl BoundaryData {
    pub fn zeros(domain: &Domain) -> Self {
        Self { values: vec![Spinor::ZERO; domain.boundary.len()] }
    }

    pub fn from_values(domain: &Domain, values: Vec<Spinor>) -> Result<Self, PotentialError> {
        if values.len() != domain.boundary.len() {
            return Err(PotentialError::BoundaryShape { expected: domain.boundary.len(), got: values.len() });
        }
        Ok(Self { values })
    }
}

/// Kernel spectra for the two kinds of source nodes: `interior[l]` for a
/// source slab `m >= 1` at lag `l = M - m`, `first[M]` for source slab 0.
#[derive(Debug)]
struct TimeKernels {
    interior: Vec<KernelHat>,
    first: Vec<KernelHat>,
}

impl TimeKernels {
    fn weight(&self, target: usize, source: usize) -> &KernelHat {
        if source == 0 {
            &self.first[target]
        } else {
            &self.interior[target - source]
        }
    }
}

#[derive(Debug)]
struct Face {
    axis: usize,
    side: usize,
    kernels: TimeKernels,
}

/// One-dimensional factors along an axis: the cell integral of `g` (or `g`
/// itself on a face normal), its `z`-derivative and second derivative.
struct AxisFactors {
    val: Vec<f64>,
    der: Vec<f64>,
    der2: Vec<f64>,
}

fn gauss(z: f64, s: f64, k: f64) -> f64 {
    let e = -k * z * z / (4.0 * s);
    if e < crate::kernels::UNDERFLOW_EXPONENT {
        0.0
    } else {
        e.exp() / (4.0 * std::f64::consts::PI * s).sqrt()
    }
}

fn gauss_d(z: f64, s: f64, k: f64) -> f64 {
    -(k * z / (2.0 * s)) * gauss(z, s, k)
}

/// `∫_a^b g(z, s) dz`.
fn cell_gauss(a: f64, b: f64, s: f64, k: f64) -> f64 {
    let c = k.sqrt() / (2.0 * s.sqrt());
    let v = if a >= 0.0 {
        libm::erfc(a * c) - libm::erfc(b * c)
    } else if b <= 0.0 {
        libm::erfc(-b * c) - libm::erfc(-a * c)
    } else {
        libm::erf(b * c) - libm::erf(a * c)
    };
    v / (2.0 * k.sqrt())
}

/// Table geometry shared by all kernel builders.
struct Geometry<'a> {
    domain: &'a Domain,
    fft: &'a Fft3,
    k: f64,
    tol: f64,
    anti: [bool; 3],
}

impl Geometry<'_> {
    fn wrapped(&self, axis: usize) -> bool {
        self.domain.grid.wrap[axis].is_wrapped()
    }

    fn periodize(&self, axis: usize, f: impl Fn(f64) -> f64) -> f64 {
        if self.wrapped(axis) {
            signed_axis_sum(f, self.anti[axis], self.tol)
        } else {
            f(0.0)
        }
    }

    /// Offset (in cells) stored at padded index `i`, if any.
    fn offset(&self, axis: usize, i: usize) -> Option<isize> {
        let (n, big) = (self.fft.cells[axis], self.fft.dims[axis]);
        if i < n {
            Some(i as isize)
        } else if i > big - n {
            Some(i as isize - big as isize)
        } else {
            None
        }
    }

    fn cell_axis(&self, axis: usize, s: f64) -> AxisFactors {
        let (h, k) = (self.domain.grid.h, self.k);
        let len = self.fft.dims[axis];
        let mut out = AxisFactors { val: vec![0.0; len], der: vec![0.0; len], der2: vec![0.0; len] };
        for i in 0..len {
            if let Some(d) = self.offset(axis, i) {
                let (a, b) = ((d as f64 - 0.5) * h, (d as f64 + 0.5) * h);
                out.val[i] = self.periodize(axis, |m| cell_gauss(a + m, b + m, s, k));
                out.der[i] = self.periodize(axis, |m| gauss(b + m, s, k) - gauss(a + m, s, k));
                out.der2[i] = self.periodize(axis, |m| gauss_d(b + m, s, k) - gauss_d(a + m, s, k));
            }
        }
        out
    }

    /// Normal-axis factors of a face at `side` of a free axis: the target
    /// cell centre minus the face position.
    fn normal_axis(&self, axis: usize, side: usize, s: f64) -> AxisFactors {
        let g = &self.domain.grid;
        let len = self.fft.dims[axis];
        let mut out = AxisFactors { val: vec![0.0; len], der: vec![0.0; len], der2: vec![0.0; len] };
        for i in 0..g.dims[axis] {
            let z = (i as f64 + 0.5) * g.h - side as f64 * g.extent(axis);
            out.val[i] = gauss(z, s, self.k);
            out.der[i] = gauss_d(z, s, self.k);
        }
        out
    }

    /// `[V_0, V_1, V_2, Φ]` cell or face integrals on the padded box.
    fn products(&self, f: &[AxisFactors; 3]) -> [Vec<f64>; 4] {
        let [d0, d1, d2] = self.fft.dims;
        let sk = self.k.sqrt();
        let len = d0 * d1 * d2;
        let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; len]);
        for i in 0..d0 {
            let (v0, g0) = (f[0].val[i], f[0].der[i]);
            if v0 == 0.0 && g0 == 0.0 {
                continue;
            }
            for j in 0..d1 {
                let (v1, g1) = (f[1].val[j], f[1].der[j]);
                let base = (i * d1 + j) * d2;
                for l in 0..d2 {
                    let (v2, g2) = (f[2].val[l], f[2].der[l]);
                    out[0][base + l] = sk * g0 * v1 * v2;
                    out[1][base + l] = sk * v0 * g1 * v2;
                    out[2][base + l] = sk * v0 * v1 * g2;
                    out[3][base + l] = sk * v0 * v1 * v2;
                }
            }
        }
        out
    }

    /// Kernel table at a fixed time lag `s` against a density constant on
    /// each cell (used for the initial cap).
    fn fixed_time(&self, f: &[AxisFactors; 3]) -> KernelTable {
        let [d0, d1, d2] = self.fft.dims;
        let (k, sk) = (self.k, self.k.sqrt());
        let mut t = KernelTable::zeros(d0 * d1 * d2);
        for i in 0..d0 {
            for j in 0..d1 {
                for l in 0..d2 {
                    let idx = (i * d1 + j) * d2 + l;
                    let (v0, v1, v2) = (f[0].val[i], f[1].val[j], f[2].val[l]);
                    t.v[0][idx] = sk * f[0].der[i] * v1 * v2;
                    t.v[1][idx] = sk * v0 * f[1].der[j] * v2;
                    t.v[2][idx] = sk * v0 * v1 * f[2].der[l];
                    let lap = f[0].der2[i] * v1 * v2 + v0 * f[1].der2[j] * v2 + v0 * v1 * f[2].der2[l];
                    t.ff[idx] = sk * lap / k;
                    t.ffd[idx] = k * sk * v0 * v1 * v2;
                }
            }
        }
        t
    }
}

/// Time moments of `[V_0, V_1, V_2, Φ]` on one interval.
struct Moments {
    lo: f64,
    hi: f64,
    m0: [Vec<f64>; 4],
    m1: [Vec<f64>; 4],
    phi_lo: Vec<f64>,
    phi_hi: Vec<f64>,
}

impl Moments {
    fn compute(lo: f64, hi: f64, rule: &SqrtRule, eval: &dyn Fn(f64) -> [Vec<f64>; 4]) -> Self {
        let r = rule.rule(lo, hi);
        let mut m0: Option<[Vec<f64>; 4]> = None;
        let mut m1: Option<[Vec<f64>; 4]> = None;
        for (&s, &w) in r.nodes.iter().zip(&r.weights) {
            let p = eval(s);
            let (a, b) = (m0.get_or_insert_with(|| zeros_like(&p)), w * (s - lo));
            for q in 0..4 {
                axpy(&mut a[q], w, &p[q]);
            }
            let c = m1.get_or_insert_with(|| zeros_like(&p));
            for q in 0..4 {
                axpy(&mut c[q], b, &p[q]);
            }
        }
        let phi_hi = eval(hi)[3].clone();
        let phi_lo = if lo == 0.0 { vec![0.0; phi_hi.len()] } else { eval(lo)[3].clone() };
        Self { lo, hi, m0: m0.expect("nonempty rule"), m1: m1.expect("nonempty rule"), phi_lo, phi_hi }
    }

    /// Kernel integrated against `w0 + w1 (s - lo)`.
    fn combine(&self, k: f64, w0: f64, w1: f64) -> KernelTable {
        let len = self.phi_hi.len();
        let mix = |q: usize| -> Vec<f64> { (0..len).map(|i| w0 * self.m0[q][i] + w1 * self.m1[q][i]).collect() };
        let end = w0 + w1 * (self.hi - self.lo);
        let ff = (0..len).map(|i| self.phi_hi[i] * end - self.phi_lo[i] * w0 - w1 * self.m0[3][i]).collect();
        let ffd = mix(3).into_iter().map(|x| k * x).collect();
        KernelTable { v: [mix(0), mix(1), mix(2)], ff, ffd }
    }
}

fn zeros_like(p: &[Vec<f64>; 4]) -> [Vec<f64>; 4] {
    std::array::from_fn(|q| vec![0.0; p[q].len()])
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (p, q) in y.iter_mut().zip(x) {
        *p += a * q;
    }
}

fn time_kernels(nt: usize, dt: f64, k: f64, fft: &Fft3, rule: &SqrtRule, eval: &dyn Fn(f64) -> [Vec<f64>; 4]) -> TimeKernels {
    let full: Vec<Moments> = (0..nt - 1).map(|l| Moments::compute(l as f64 * dt, (l + 1) as f64 * dt, rule, eval)).collect();
    let half: Vec<Moments> =
        (0..nt).map(|m| Moments::compute(m as f64 * dt, (m as f64 + 0.5) * dt, rule, eval)).collect();
    let a: Vec<KernelTable> = full.iter().map(|m| m.combine(k, 1.0, -1.0 / dt)).collect();
    let b: Vec<KernelTable> = full.iter().map(|m| m.combine(k, 0.0, 1.0 / dt)).collect();
    let interior = (0..nt - 1)
        .map(|l| {
            let mut t = a[l].clone();
            if l >= 1 {
                t.axpy(1.0, &b[l - 1]);
            }
            fft.kernel_hat(&t)
        })
        .collect();
    let first = (0..nt)
        .map(|m| {
            let mut t = half[m].combine(k, 1.0, 0.0);
            if m >= 1 {
                t.axpy(1.0, &b[m - 1]);
            }
            fft.kernel_hat(&t)
        })
        .collect();
    TimeKernels { interior, first }
}

/// Dense factorization of the Bergman boundary system.
struct Bergman {
    /// `tr T F` restricted to lateral rows and lateral + initial-cap columns.
    a: Mat<f64>,
    gram: Mat<f64>,
    llt: faer::linalg::solvers::Llt<f64>,
    ridge: f64,
    cond: f64,
}

impl std::fmt::Debug for Bergman {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bergman").field("rows", &self.a.nrows()).field("cols", &self.a.ncols()).finish()
    }
}

/// Summary of the factorized Bergman system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BergmanInfo {
    pub rows: usize,
    pub cols: usize,
    pub ridge: f64,
    pub condition_estimate: f64,
}

#[derive(Debug)]
pub struct OperatorContext {
    pub domain: Domain,
    pub params: KernelParams,
    pub quad_tol: f64,
    pub bergman_reg: f64,
    refine_steps: usize,
    fft: Fft3,
    volume: TimeKernels,
    faces: Vec<Face>,
    cap: Vec<KernelHat>,
    bergman: OnceLock<Result<Arc<Bergman>, PotentialError>>,
}

/// A nonzero source slab of the Cauchy transform.
enum Source {
    Face { face: usize, slab: usize, hat: SlabHat },
    Cap { hat: SlabHat },
}

impl OperatorContext {
    pub fn new(
        domain: Domain,
        params: KernelParams,
        convention: Convention,
        opts: ContextOptions,
    ) -> Result<Self, PotentialError> {
        if convention != Convention::ADOPTED {
            return Err(PotentialError::Uncalibrated { expected: Convention::ADOPTED, got: convention });
        }
        if !(opts.quad_tol > 0.0) {
            return Err(PotentialError::BadOption { name: "quad_tol", value: opts.quad_tol });
        }
        if !(opts.bergman_reg >= 0.0) {
            return Err(PotentialError::BadOption { name: "bergman_reg", value: opts.bergman_reg });
        }
        let g = domain.grid.clone();
        let fft = Fft3::new(g.dims);
        let k = params.k;
        let rule = SqrtRule::new(opts.quad_points, 0.01 * g.h * k.sqrt().min(1.0));
        let geo = Geometry { domain: &domain, fft: &fft, k, tol: opts.quad_tol, anti: domain.lattice.axis_anti() };

        let cells = |s: f64| [geo.cell_axis(0, s), geo.cell_axis(1, s), geo.cell_axis(2, s)];
        let volume = time_kernels(g.nt, g.dt, k, &fft, &rule, &|s| geo.products(&cells(s)));

        let mut faces = Vec::new();
        for axis in 0..3 {
            if g.wrap[axis].is_wrapped() {
                continue;
            }
            for side in 0..2 {
                let eval = |s: f64| {
                    let f: [AxisFactors; 3] = std::array::from_fn(|a| {
                        if a == axis {
                            geo.normal_axis(axis, side, s)
                        } else {
                            geo.cell_axis(a, s)
                        }
                    });
                    geo.products(&f)
                };
                let kernels = time_kernels(g.nt, g.dt, k, &fft, &rule, &eval);
                faces.push(Face { axis, side, kernels });
            }
        }
        let cap = (0..g.nt).map(|m| fft.kernel_hat(&geo.fixed_time(&cells((m as f64 + 0.5) * g.dt)))).collect();
        Ok(Self {
            domain,
            params,
            quad_tol: opts.quad_tol,
            bergman_reg: opts.bergman_reg,
            refine_steps: opts.refine_steps,
            fft,
            volume,
            faces,
            cap,
            bergman: OnceLock::new(),
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.domain.lattice
    }

    fn check(&self, u: &Field) -> Result<(), PotentialError> {
        if *u.grid() == self.domain.grid {
            Ok(())
        } else {
            Err(PotentialError::GridMismatch)
        }
    }

    fn slabs(&self, u: &Field) -> Vec<Option<SlabHat>> {
        let nc = self.domain.grid.ncells();
        u.values()
            .chunks(nc)
            .map(|s| if s.iter().all(|v| *v == Spinor::ZERO) { None } else { Some(self.fft.slab_hat(s)) })
            .collect()
    }

    fn assemble(&self, slabs: Vec<Vec<Spinor>>) -> Field {
        let values = slabs.into_iter().flatten().collect();
        Field::from_values(&self.domain.grid, values).expect("slab sizes match the grid")
    }

    fn zero_slab(&self) -> Vec<Spinor> {
        vec![Spinor::ZERO; self.domain.grid.ncells()]
    }

    /// Volume potential `(T u)(y, τ) = ∫ E(y - x, τ - t) u(x, t) dx dt`.
    pub fn teodorescu(&self, u: &Field) -> Result<Field, PotentialError> {
        self.check(u)?;
        let hats = self.slabs(u);
        let nt = self.domain.grid.nt;
        let out = (0..nt)
            .into_par_iter()
            .map(|target| {
                let mut acc: Option<SlabHat> = None;
                for (source, hat) in hats.iter().enumerate().take(target + 1) {
                    if let Some(h) = hat {
                        let a = acc.get_or_insert_with(|| self.fft.zero_hat());
                        accumulate(a, self.volume.weight(target, source), h);
                    }
                }
                acc.map_or_else(|| self.zero_slab(), |a| self.fft.slab_values(a))
            })
            .collect();
        Ok(self.assemble(out))
    }

    fn face_index(&self, axis: usize, side: usize) -> usize {
        self.faces.iter().position(|f| f.axis == axis && f.side == side).expect("face of a free axis")
    }

    fn sources(&self, bd: &BoundaryData) -> Vec<Source> {
        let g = &self.domain.grid;
        let nc = g.ncells();
        let mut lateral: Vec<Vec<Option<Vec<Spinor>>>> = (0..self.faces.len()).map(|_| vec![None; g.nt]).collect();
        let mut cap: Option<Vec<Spinor>> = None;
        for (el, v) in self.domain.boundary.iter().zip(&bd.values) {
            if *v == Spinor::ZERO {
                continue;
            }
            match el.kind {
                BoundaryKind::Lateral { axis, side, face, slab } => {
                    let f = self.face_index(axis, side);
                    let [b, c] = face_axes(axis);
                    let mut cell = [0; 3];
                    cell[b] = face[0];
                    cell[c] = face[1];
                    // -N φ with N = ±e_axis
                    let sgn = if side == 1 { -1.0 } else { 1.0 };
                    let slab_vals = lateral[f][slab].get_or_insert_with(|| vec![Spinor::ZERO; nc]);
                    slab_vals[g.cell_index(cell)] = v.e(axis).scale(sgn);
                }
                BoundaryKind::Cap { top: false, cell } => {
                    // -N φ with N = -f
                    cap.get_or_insert_with(|| vec![Spinor::ZERO; nc])[g.cell_index(cell)] = v.f();
                }
                BoundaryKind::Cap { top: true, .. } => {}
            }
        }
        let mut out = Vec::new();
        for (face, slabs) in lateral.into_iter().enumerate() {
            for (slab, vals) in slabs.into_iter().enumerate() {
                if let Some(v) = vals {
                    out.push(Source::Face { face, slab, hat: self.fft.slab_hat(&v) });
                }
            }
        }
        if let Some(v) = cap {
            out.push(Source::Cap { hat: self.fft.slab_hat(&v) });
        }
        out
    }

    /// Boundary potential `(F φ)(y, τ) = -∫_Γ E(y - x, τ - t) N φ dσ`. The
    /// terminal cap contributes nothing by causality.
    pub fn cauchy(&self, bd: &BoundaryData) -> Result<Field, PotentialError> {
        if bd.values.len() != self.domain.boundary.len() {
            return Err(PotentialError::BoundaryShape { expected: self.domain.boundary.len(), got: bd.values.len() });
        }
        let sources = self.sources(bd);
        let nt = self.domain.grid.nt;
        let out = (0..nt)
            .into_par_iter()
            .map(|target| {
                let mut acc: Option<SlabHat> = None;
                for s in &sources {
                    let (kernel, hat) = match s {
                        Source::Face { face, slab, hat } if *slab <= target => {
                            (self.faces[*face].kernels.weight(target, *slab), hat)
                        }
                        Source::Face { .. } => continue,
                        Source::Cap { hat } => (&self.cap[target], hat),
                    };
                    accumulate(acc.get_or_insert_with(|| self.fft.zero_hat()), kernel, hat);
                }
                acc.map_or_else(|| self.zero_slab(), |a| self.fft.slab_values(a))
            })
            .collect();
        Ok(self.assemble(out))
    }

    /// Boundary values by linear extrapolation from the two nearest nodes
    /// along the normal (space or time).
    pub fn trace(&self, u: &Field) -> Result<BoundaryData, PotentialError> {
        self.check(u)?;
        let values = self.domain.boundary.iter().map(|el| trace_at(u, el.kind)).collect();
        Ok(BoundaryData { values })
    }

    fn trace_lateral(&self, u: &Field) -> Vec<Spinor> {
        self.domain.boundary[..self.domain.lateral_len()].iter().map(|el| trace_at(u, el.kind)).collect()
    }

    fn bergman(&self) -> Result<Arc<Bergman>, PotentialError> {
        match self.bergman.get_or_init(|| self.factor_bergman().map(Arc::new)) {
            Ok(b) => Ok(b.clone()),
            Err(e) => Err(e.clone()),
        }
    }

    /// Number of unknown boundary elements: lateral faces and the initial cap.
    fn unknown_elements(&self) -> usize {
        self.domain.lateral_len() + self.domain.grid.ncells()
    }

    fn column_pair(&self, el: usize) -> [Vec<Spinor>; 2] {
        let units = [Spinor::new([1.0, 0.0, 0.0, 0.0], [0.0; 4]), Spinor::new([0.0; 4], [1.0, 0.0, 0.0, 0.0])];
        units.map(|unit| {
            let mut bd = BoundaryData::zeros(&self.domain);
            bd.values[el] = unit;
            let f = self.cauchy(&bd).expect("shapes match");
            self.trace_lateral(&self.teodorescu(&f).expect("grid matches"))
        })
    }

    fn factor_bergman(&self) -> Result<Bergman, PotentialError> {
        let rows = 8 * self.domain.lateral_len();
        let nel = self.unknown_elements();
        let quats = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        // Every operator commutes with right multiplication by quaternions, so
        // two solves per element give all eight columns.
        let pairs: Vec<[Vec<Spinor>; 2]> = (0..nel).into_par_iter().map(|el| self.column_pair(el)).collect();
        let mut a = Mat::<f64>::zeros(rows, 8 * nel);
        for (el, pair) in pairs.iter().enumerate() {
            for (half, col) in pair.iter().enumerate() {
                for (qi, q) in quats.iter().enumerate() {
                    let j = 8 * el + 4 * half + qi;
                    for (r, v) in col.iter().enumerate() {
                        let w = v.right_mul(*q);
                        for c in 0..8 {
                            a[(8 * r + c, j)] = w[c];
                        }
                    }
                }
            }
        }
        let gram = &a * a.transpose();
        let scale = (0..rows).map(|i| gram[(i, i)]).sum::<f64>() / rows as f64;
        let mut ridge = self.bergman_reg * scale;
        for _ in 0..8 {
            let mut g = gram.clone();
            for i in 0..rows {
                g[(i, i)] += ridge;
            }
            if let Ok(llt) = g.llt(Side::Lower) {
                let l = llt.L();
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for i in 0..rows {
                    lo = lo.min(l[(i, i)].abs());
                    hi = hi.max(l[(i, i)].abs());
                }
                let cond = (hi / lo).powi(2);
                if cond <= CONDITION_LIMIT {
                    return Ok(Bergman { a, gram, llt, ridge, cond });
                }
            }
            ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
        }
        Err(PotentialError::Conditioning { cond: f64::INFINITY })
    }

    pub fn bergman_info(&self) -> Result<BergmanInfo, PotentialError> {
        let b = self.bergman()?;
        Ok(BergmanInfo { rows: b.a.nrows(), cols: b.a.ncols(), ridge: b.ridge, condition_estimate: b.cond })
    }

    /// Boundary densities `(tr T F)⁺ tr T u` for a batch of fields.
    fn densities(&self, fields: &[Field]) -> Result<Vec<BoundaryData>, PotentialError> {
        let b = self.bergman()?;
        let rows = b.a.nrows();
        let traces: Vec<Vec<Spinor>> =
            fields.par_iter().map(|u| self.teodorescu(u).map(|t| self.trace_lateral(&t))).collect::<Result<_, _>>()?;
        let rhs = Mat::<f64>::from_fn(rows, fields.len(), |i, j| traces[j][i / 8][i % 8]);
        let mut y = b.llt.solve(&rhs);
        for _ in 0..self.refine_steps {
            let r = &rhs - &b.gram * &y;
            y += b.llt.solve(&r);
        }
        let phi = b.a.transpose() * &y;
        let nel = self.unknown_elements();
        Ok((0..fields.len())
            .map(|j| {
                let mut bd = BoundaryData::zeros(&self.domain);
                // unknowns are the leading lateral and initial-cap elements
                for el in 0..nel {
                    bd.values[el] = Spinor(std::array::from_fn(|c| phi[(8 * el + c, j)]));
                }
                bd
            })
            .collect())
    }

    /// Bergman projection of a batch of fields.
    pub fn bergman_p_many(&self, fields: &[Field]) -> Result<Vec<Field>, PotentialError> {
        for u in fields {
            self.check(u)?;
        }
        let dens = self.densities(fields)?;
        dens.par_iter().map(|d| self.cauchy(d)).collect()
    }

    pub fn bergman_p(&self, u: &Field) -> Result<Field, PotentialError> {
        Ok(self.bergman_p_many(std::slice::from_ref(u))?.remove(0))
    }

    pub fn bergman_q(&self, u: &Field) -> Result<Field, PotentialError> {
        Ok(u.sub(&self.bergman_p(u)?)?)
    }

    pub fn bergman_q_many(&self, fields: &[Field]) -> Result<Vec<Field>, PotentialError> {
        let p = self.bergman_p_many(fields)?;
        fields.iter().zip(p).map(|(u, pu)| Ok(u.sub(&pu)?)).collect()
    }
}

fn trace_at(u: &Field, kind: BoundaryKind) -> Spinor {
    let g = u.grid();
    match kind {
        BoundaryKind::Lateral { axis, side, face, slab } => {
            let [b, c] = face_axes(axis);
            let n = g.dims[axis];
            let mut c0 = [0; 3];
            c0[b] = face[0];
            c0[c] = face[1];
            let mut c1 = c0;
            if side == 0 {
                c1[axis] = 1;
            } else {
                c0[axis] = n - 1;
                c1[axis] = n - 2;
            }
            u.at(slab, c0).scale(1.5) - u.at(slab, c1).scale(0.5)
        }
        BoundaryKind::Cap { top, cell } => {
            let (m0, m1) = if top { (g.nt - 1, g.nt - 2) } else { (0, 1) };
            u.at(m0, cell).scale(1.5) - u.at(m1, cell).scale(0.5)
        }
    }
}
