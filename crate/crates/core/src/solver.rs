//! Stokes and Navier–Stokes solves through the representation formulas
//! `ℜ(Q T D p) = ℜ(Q T f)`, `u = T Q T (f − D p)` and the Picard iteration
//! built on them.
//!
//! Velocities are vector parts of the upper quaternion, pressures its scalar
//! part. Viscosity is 1.

use std::sync::{Arc, OnceLock};

use faer::Mat;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{
    diff_space, diff_time, discrete_div, discrete_grad, discrete_norm, DomainError, Field, NormKind, SpaceTimeGrid,
};
use crate::potentials::{OperatorContext, PotentialError};
use crate::spinor::Spinor;

#[derive(Clone, Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{what} must be e-vector valued (node {node} has a non-vector component)")]
    NotVectorValued { what: &'static str, node: usize },
    #[error("invalid {name}: {value}")]
    BadArgument { name: &'static str, value: f64 },
    #[error("pressure system has no finite solution")]
    PressureSolve,
    #[error("fixed-point iteration diverged: residual grew three times in a row (iteration {iteration})")]
    Diverged { iteration: usize, history: Vec<f64> },
    #[error("power iteration did not settle after {iterations} steps (relative change {change:e})")]
    PowerIteration { iterations: usize, change: f64 },
}

/// Operator constants of the Picard iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    /// `‖T Q T‖` from L2 into W11.
    pub c1: f64,
    /// Largest sampled `‖(u·∇)u‖₂ / ‖u‖²_{W11}`; a lower bound for the true
    /// constant, so every verdict built on it is conditional.
    pub c2: f64,
    pub power_iterations: usize,
    pub bump_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// `‖u_n − u_{n−1}‖_{W11}`, starting from `u_0`.
    pub residual_history: Vec<f64>,
    /// `None` when no constants were estimated (plain linear solves).
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub w: Option<f64>,
    pub l: Option<f64>,
    pub admissible: bool,
    pub converged: bool,
    /// Space-time mean of the returned pressure.
    pub p_gauge: f64,
    /// `‖div u‖₂ / ‖u‖₂` of the returned velocity.
    pub divergence: f64,
    /// Relative size of the non-vector components dropped from `T Q T (f − D p)`.
    pub spurious: f64,
    /// `u_0` had to be projected onto e-vector fields vanishing on the boundary.
    pub projected_start: bool,
}

impl SolverReport {
    pub fn summary(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6e}"));
        format!(
            "C1={} C2={} W={} L={} admissible={} iterations={} final_residual={:.6e}",
            opt(self.c1),
            opt(self.c2),
            opt(self.w),
            opt(self.l),
            self.admissible,
            self.iterations,
            self.residual_history.last().copied().unwrap_or(0.0)
        )
    }
}

/// Filtered SVD of the gauge-augmented pressure matrix.
struct PressureSystem {
    u: Mat<f64>,
    filter: Vec<f64>,
    v: Mat<f64>,
}

impl PressureSystem {
    fn new(s: Mat<f64>, reg: f64) -> Result<Self, SolverError> {
        let svd = s.thin_svd().map_err(|_| SolverError::PressureSolve)?;
        let sv: Vec<f64> = (0..svd.S().dim()).map(|i| svd.S()[i]).collect();
        let lam = reg * sv.iter().copied().fold(0.0, f64::max);
        let filter = sv.iter().map(|&x| if x > 0.0 { x / (x * x + lam * lam) } else { 0.0 }).collect();
        Ok(Self { u: svd.U().to_owned(), filter, v: svd.V().to_owned() })
    }

    fn solve(&self, b: &Mat<f64>) -> Mat<f64> {
        let mut c = self.u.transpose() * b;
        for (i, f) in self.filter.iter().enumerate() {
            for j in 0..c.ncols() {
                c[(i, j)] *= f;
            }
        }
        &self.v * c
    }
}

pub struct NSEProblem<'a> {
    pub ctx: &'a OperatorContext,
    pub forcing: Field,
    /// Constants used by the fixed-point verdict; estimated on demand if unset.
    pub constants: Option<Constants>,
    /// Tikhonov level of the pressure solve, relative to the largest
    /// singular value.
    pub pressure_reg: f64,
    pressure: OnceLock<Result<Arc<PressureSystem>, SolverError>>,
}

impl std::fmt::Debug for NSEProblem<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NSEProblem").field("forcing_l2", &self.forcing.l2()).field("constants", &self.constants).finish()
    }
}

const VECTOR_TOL: f64 = 1e-12;
pub const PRESSURE_REG: f64 = 1e-8;
const ROUNDOFF: f64 = 1e-10;

fn check_vector(u: &Field, what: &'static str) -> Result<(), SolverError> {
    let scale = u.max_abs().max(1.0);
    match u.values().iter().position(|v| [0, 4, 5, 6, 7].iter().any(|&c| v[c].abs() > VECTOR_TOL * scale)) {
        Some(node) => Err(SolverError::NotVectorValued { what, node }),
        None => Ok(()),
    }
}

/// Vector part of the upper quaternion.
pub fn vector_part(u: &Field) -> Field {
    u.map(|v| Spinor::vector([v[1], v[2], v[3]]))
}

fn scalar_part(u: &Field) -> Vec<f64> {
    u.values().iter().map(|v| v[0]).collect()
}

fn vanish_on_boundary(u: &Field) -> Field {
    let g = u.grid().clone();
    let mut out = u.clone();
    for m in 0..g.nt {
        for ci in 0..g.ncells() {
            let c = g.cell_of(ci);
            let edge = (0..3).any(|a| !g.wrap[a].is_wrapped() && (c[a] == 0 || c[a] + 1 == g.dims[a]));
            if m == 0 || edge {
                out.values_mut()[g.index(m, c)] = Spinor::ZERO;
            }
        }
    }
    out
}

/// `(u·∇)u` on the vector part of `u`, each component differentiated with
/// the central stencil of [`diff_space`].
pub fn convective_term(u: &Field) -> Field {
    let v = vector_part(u);
    let mut out = Field::zeros(u.grid());
    for j in 0..3 {
        let d = diff_space(&v, j);
        for ((o, a), dv) in out.values_mut().iter_mut().zip(v.values()).zip(d.values()) {
            *o += dv.scale(a[j + 1]);
        }
    }
    out
}

#[allow(non_snake_case)]
pub fn M_functional(u: &Field, f: &Field) -> Result<Field, SolverError> {
    Ok(convective_term(u).sub(f)?)
}

/// Theorem-4 admissibility: returns `(admissible, W, L)`; `W` and `L` are
/// `None` when the square root is imaginary.
pub fn convergence_check(c1: f64, c2: f64, f_norm: f64, u0_norm: f64) -> (bool, Option<f64>, Option<f64>) {
    let a = 1.0 / (16.0 * c1 * c1 * c2 * c2) - f_norm / c2;
    if !(a >= 0.0) || !(f_norm <= 1.0 / (16.0 * c1 * c1 * c2)) {
        return (false, None, None);
    }
    let w = a.sqrt();
    let l = 1.0 - 4.0 * c1 * c2 * w;
    let radius = (1.0 / (2.0 * c1 * c2)).min(1.0 / (4.0 * c1 * c2) + w);
    (u0_norm <= radius && l < 1.0, Some(w), Some(l))
}

impl<'a> NSEProblem<'a> {
    pub fn new(ctx: &'a OperatorContext, forcing: Field) -> Result<Self, SolverError> {
        if *forcing.grid() != ctx.domain.grid {
            return Err(PotentialError::GridMismatch.into());
        }
        check_vector(&forcing, "forcing")?;
        Ok(Self { ctx, forcing, constants: None, pressure_reg: PRESSURE_REG, pressure: OnceLock::new() })
    }

    pub fn with_constants(mut self, c: Constants) -> Self {
        self.constants = Some(c);
        self
    }

    fn pressure(&self) -> Result<Arc<PressureSystem>, SolverError> {
        match self.pressure.get_or_init(|| self.assemble_pressure().map(Arc::new)) {
            Ok(s) => Ok(s.clone()),
            Err(e) => Err(e.clone()),
        }
    }

    /// Dense `p ↦ ℜ(Q T D p)`, one column per node, stacked on the per-slab
    /// mean rows that fix the gauge.
    fn assemble_matrix(&self) -> Result<Mat<f64>, SolverError> {
        let g = &self.ctx.domain.grid;
        let n = g.len();
        let nc = g.ncells();
        let tds: Vec<Field> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut delta = Field::zeros(g);
                delta.values_mut()[i] = Spinor::scalar(1.0);
                self.ctx.teodorescu(&discrete_grad(&delta))
            })
            .collect::<Result<_, _>>()?;
        let cols = self.ctx.bergman_q_many(&tds)?;
        let mut s = Mat::<f64>::zeros(n + g.nt, n);
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.values().iter().enumerate() {
                s[(i, j)] = v[0];
            }
        }
        let frob = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| s[(i, j)].powi(2)).sum::<f64>();
        let gamma = (frob / n as f64).sqrt().max(f64::MIN_POSITIVE);
        for m in 0..g.nt {
            for ci in 0..nc {
                s[(n + m, m * nc + ci)] = gamma / nc as f64;
            }
        }
        Ok(s)
    }

    fn assemble_pressure(&self) -> Result<PressureSystem, SolverError> {
        PressureSystem::new(self.assemble_matrix()?, self.pressure_reg)
    }

    /// One Stokes solve for the right-hand side `rhs`: returns the full
    /// `T Q T (rhs − D p)` and the scalar pressure.
    fn stokes(&self, rhs: &Field) -> Result<(Field, Field), SolverError> {
        let ctx = self.ctx;
        let g = &ctx.domain.grid;
        let sys = self.pressure()?;
        let r = scalar_part(&ctx.bergman_q(&ctx.teodorescu(rhs)?)?);
        let mut b = Mat::<f64>::zeros(g.len() + g.nt, 1);
        for (i, v) in r.iter().enumerate() {
            b[(i, 0)] = *v;
        }
        let x = sys.solve(&b);
        if (0..g.len()).any(|i| !x[(i, 0)].is_finite()) {
            return Err(SolverError::PressureSolve);
        }
        let p = Field::from_values(g, (0..g.len()).map(|i| Spinor::scalar(x[(i, 0)])).collect())?;
        let w = ctx.bergman_q(&ctx.teodorescu(&rhs.sub(&discrete_grad(&p))?)?)?;
        Ok((ctx.teodorescu(&w)?, p))
    }

    fn finish(&self, full: &Field, p: &Field) -> (Field, f64, f64, f64) {
        let u = vector_part(full);
        let norm = u.l2();
        let spurious = if norm > 0.0 { full.sub(&u).map_or(0.0, |d| d.l2()) / norm } else { full.l2() };
        let divergence = if norm > 0.0 { discrete_div(&u).l2() / norm } else { 0.0 };
        let gauge = scalar_part(p).iter().sum::<f64>() / p.values().len() as f64;
        (u, gauge, divergence, spurious)
    }

    /// Stokes–heat solve `−Δu + k∂t u + ∇p = f`, `div u = 0`, `u = 0` on the
    /// lateral boundary and at `t = 0`.
    pub fn solve_linear(&self) -> Result<(Field, Field, SolverReport), SolverError> {
        let (full, p) = self.stokes(&self.forcing)?;
        let (u, p_gauge, divergence, spurious) = self.finish(&full, &p);
        let report = SolverReport {
            iterations: 1,
            residual_history: vec![discrete_norm(&u, NormKind::W11)],
            c1: None,
            c2: None,
            w: None,
            l: None,
            admissible: false,
            converged: true,
            p_gauge,
            divergence,
            spurious,
            projected_start: false,
        };
        Ok((u, p, report))
    }

    /// Picard iteration `u_n = T Q T [f − (u_{n−1}·∇)u_{n−1} − D p_n]`.
    ///
    /// Stops once `‖u_n − u_{n−1}‖_{W11} < tol` or the update drops to the
    /// roundoff level `1e-10 ‖u_n‖_{W11}`; on `max_iter` exhaustion the
    /// last iterate is returned with `converged = false` and
    /// `admissible = false`.
    pub fn fixed_point_solve(
        &self,
        u0: &Field,
        max_iter: usize,
        tol: f64,
    ) -> Result<(Field, Field, SolverReport), SolverError> {
        if max_iter == 0 {
            return Err(SolverError::BadArgument { name: "max_iter", value: 0.0 });
        }
        if !(tol > 0.0) {
            return Err(SolverError::BadArgument { name: "tol", value: tol });
        }
        if *u0.grid() != self.ctx.domain.grid {
            return Err(PotentialError::GridMismatch.into());
        }
        let start = vanish_on_boundary(&vector_part(u0));
        let projected_start = start.sub(u0)?.max_abs() > VECTOR_TOL * u0.max_abs().max(1.0);
        let constants = match self.constants {
            Some(c) => c,
            None => estimate_constants(self.ctx)?,
        };
        let f_norm = discrete_norm(&self.forcing, NormKind::L2);
        let (mut admissible, w, l) =
            convergence_check(constants.c1, constants.c2, f_norm, discrete_norm(&start, NormKind::W11));

        let mut u = start;
        let mut p = Field::zeros(u.grid());
        let mut full = u.clone();
        let mut history = Vec::new();
        let mut growth = 0;
        let mut converged = false;
        for it in 1..=max_iter {
            let rhs = self.forcing.sub(&convective_term(&u))?;
            let (nf, np) = self.stokes(&rhs)?;
            let nu = vector_part(&nf);
            let r = discrete_norm(&nu.sub(&u)?, NormKind::W11);
            if r < tol || r <= ROUNDOFF * discrete_norm(&nu, NormKind::W11) {
                history.push(r);
                (p, full) = (np, nf);
                converged = true;
                break;
            }
            if history.last().is_some_and(|&prev| r > prev) {
                growth += 1;
                if growth >= 3 {
                    history.push(r);
                    return Err(SolverError::Diverged { iteration: it, history });
                }
            } else {
                growth = 0;
            }
            history.push(r);
            (u, p, full) = (nu, np, nf);
        }
        if !converged {
            admissible = false;
        }
        let (u, p_gauge, divergence, spurious) = self.finish(&full, &p);
        let report = SolverReport {
            iterations: history.len(),
            residual_history: history,
            c1: Some(constants.c1),
            c2: Some(constants.c2),
            w,
            l,
            admissible,
            converged,
            p_gauge,
            divergence,
            spurious,
            projected_start,
        };
        Ok((u, p, report))
    }
}

pub const DEFAULT_SEED: u64 = 20_240_517;
pub const BUMP_SAMPLES: usize = 200;
const POWER_TOL: f64 = 1e-6;
const POWER_MAX: usize = 500;

pub fn estimate_constants(ctx: &OperatorContext) -> Result<Constants, SolverError> {
    estimate_constants_seeded(ctx, DEFAULT_SEED)
}

/// `‖(u·∇)u‖₂ / ‖u‖²_{W11}`; zero for the zero field.
pub fn convective_ratio(u: &Field) -> f64 {
    let d = discrete_norm(u, NormKind::W11);
    if d == 0.0 {
        0.0
    } else {
        discrete_norm(&convective_term(u), NormKind::L2) / (d * d)
    }
}

/// Smooth bump `amp · exp(−|x−c|²/σ²) · Π sin²(π x_a / L_a) · t / T`.
pub fn bump_field(ctx: &OperatorContext, center: [f64; 3], sigma: f64, amp: [f64; 3]) -> Field {
    let g = &ctx.domain.grid;
    let ext: [f64; 3] = std::array::from_fn(|a| g.extent(a));
    let horizon = g.horizon();
    Field::from_fn(g, |x, t| {
        let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
        let cut: f64 = (0..3).map(|a| (std::f64::consts::PI * (x[a] - g.origin[a]) / ext[a]).sin().powi(2)).product();
        let s = (-r2 / (sigma * sigma)).exp() * cut * (t - g.t0) / horizon;
        Spinor::vector(amp.map(|c| c * s))
    })
}

/// C1 from power iteration on `(W M)ᵀ(W M)`, `M` the dense `T Q T` and `W`
/// the stacked identity and difference stencils of the W11 norm; C2 from
/// [`BUMP_SAMPLES`] seeded bumps.
pub fn estimate_constants_seeded(ctx: &OperatorContext, seed: u64) -> Result<Constants, SolverError> {
    let g = &ctx.domain.grid;
    if g.is_empty() {
        return Err(SolverError::BadArgument { name: "grid size", value: 0.0 });
    }
    let n = g.len();
    let units = [Spinor::new([1.0, 0.0, 0.0, 0.0], [0.0; 4]), Spinor::new([0.0; 4], [1.0, 0.0, 0.0, 0.0])];
    let sources: Vec<Field> = (0..2 * n)
        .map(|j| {
            let mut f = Field::zeros(g);
            f.values_mut()[j / 2] = units[j % 2];
            f
        })
        .collect();
    let ts: Vec<Field> = sources.par_iter().map(|f| ctx.teodorescu(f)).collect::<Result<_, _>>()?;
    let qs = ctx.bergman_q_many(&ts)?;
    let ms: Vec<Field> = qs.par_iter().map(|f| ctx.teodorescu(f)).collect::<Result<_, _>>()?;

    let quats = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let dim = 8 * n;
    let mut wm = Mat::<f64>::zeros(5 * dim, dim);
    for (j, m) in ms.iter().enumerate() {
        let (node, half) = (j / 2, j % 2);
        for (qi, q) in quats.iter().enumerate() {
            let col = 8 * node + 4 * half + qi;
            let f = m.map(|v| v.right_mul(*q));
            let blocks = [f.clone(), diff_space(&f, 0), diff_space(&f, 1), diff_space(&f, 2), diff_time(&f)];
            for (b, blk) in blocks.iter().enumerate() {
                for (i, v) in blk.values().iter().enumerate() {
                    for c in 0..8 {
                        wm[(b * dim + 8 * i + c, col)] = v[c];
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Mat::<f64>::from_fn(dim, 1, |_, _| rng.random_range(-1.0..1.0));
    let mut lambda = 0.0;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < POWER_MAX {
        iterations += 1;
        let norm = v.norm_l2();
        v = v * faer::Scale(1.0 / norm);
        let z = wm.transpose() * (&wm * &v);
        let next = z.norm_l2();
        change = (next - lambda).abs() / next.max(f64::MIN_POSITIVE);
        lambda = next;
        v = z;
        if change <= POWER_TOL || lambda == 0.0 {
            break;
        }
    }
    if change > POWER_TOL && lambda != 0.0 {
        return Err(SolverError::PowerIteration { iterations, change });
    }

    let ext: [f64; 3] = std::array::from_fn(|a| g.extent(a));
    let lmin = ext.iter().copied().fold(f64::INFINITY, f64::min);
    let mut c2 = 0.0f64;
    for _ in 0..BUMP_SAMPLES {
        let center: [f64; 3] = std::array::from_fn(|a| g.origin[a] + ext[a] * rng.random_range(0.25..0.75));
        let sigma = lmin * rng.random_range(0.1..0.3);
        let amp: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        c2 = c2.max(convective_ratio(&bump_field(ctx, center, sigma, amp)));
    }
    Ok(Constants { c1: lambda.sqrt(), c2, power_iterations: iterations, bump_samples: BUMP_SAMPLES })
}

/// Manufactured Stokes–heat solutions. `Vortex` and `Shear` live on the
/// channel that is unit-periodic in `x` and `y` with walls at `z = 0, 1`;
/// `Cavity` vanishes on every face of the unit box. All start from rest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowPreset {
    Zero,
    Vortex,
    Shear,
    Cavity,
}

/// Exact velocity and pressure with the forcing `−Δu + k ∂t u + ∇p`.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub forcing: Field,
    pub velocity: Field,
    pub pressure: Field,
}

// g = (s(1−s))² and its derivatives
fn wall(s: f64) -> [f64; 4] {
    [
        (s * (1.0 - s)).powi(2),
        2.0 * s - 6.0 * s * s + 4.0 * s.powi(3),
        2.0 - 12.0 * s + 12.0 * s * s,
        -12.0 + 24.0 * s,
    ]
}

impl FlowPreset {
    pub const ALL: [FlowPreset; 4] = [FlowPreset::Zero, FlowPreset::Vortex, FlowPreset::Shear, FlowPreset::Cavity];

    pub fn name(self) -> &'static str {
        match self {
            FlowPreset::Zero => "zero",
            FlowPreset::Vortex => "vortex",
            FlowPreset::Shear => "shear",
            FlowPreset::Cavity => "cavity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Samples at the nodes of `grid`, measuring time from `grid.t0` and
    /// space from `grid.origin`.
    pub fn build(self, grid: &SpaceTimeGrid, k: f64, amplitude: f64) -> Manufactured {
        use std::f64::consts::PI;
        let tp = 2.0 * PI;
        let a = amplitude;
        let local = |x: [f64; 3], t: f64| (std::array::from_fn::<f64, 3, _>(|i| x[i] - grid.origin[i]), t - grid.t0);
        // (velocity, pressure, −Δu, ∇p) at a point, for t-linear profiles
        let eval = |x: [f64; 3], t: f64| -> ([f64; 3], f64, [f64; 3], [f64; 3]) {
            let (x, t) = local(x, t);
            match self {
                FlowPreset::Zero => ([0.0; 3], 0.0, [0.0; 3], [0.0; 3]),
                FlowPreset::Vortex => {
                    // u = curl(0, 0, t sin(2πx) sin(2πy) g(z))
                    let (sx, cx, sy, cy) = ((tp * x[0]).sin(), (tp * x[0]).cos(), (tp * x[1]).sin(), (tp * x[1]).cos());
                    let g = wall(x[2]);
                    let u = [tp * sx * cy * g[0], -tp * cx * sy * g[0], 0.0];
                    let lap = -2.0 * tp * tp * g[0] + g[2];
                    let lap_u = [tp * sx * cy * lap, -tp * cx * sy * lap, 0.0];
                    let (c2, s2) = ((PI * x[2]).cos(), (PI * x[2]).sin());
                    let p = cx * cy * c2;
                    let gp = [-tp * sx * cy * c2, -tp * cx * sy * c2, -PI * cx * cy * s2];
                    (u.map(|v| a * t * v), a * t * p, lap_u.map(|v| -a * t * v), gp.map(|v| a * t * v))
                }
                FlowPreset::Shear => {
                    // u = t g(z) (1, cos(2πx)/2, 0), p = t cos(πz)
                    let g = wall(x[2]);
                    let c = 0.5 * (tp * x[0]).cos();
                    let u = [g[0], c * g[0], 0.0];
                    let lap_u = [g[2], c * (g[2] - tp * tp * g[0]), 0.0];
                    let gp = [0.0, 0.0, -PI * (PI * x[2]).sin()];
                    (u.map(|v| a * t * v), a * t * (PI * x[2]).cos(), lap_u.map(|v| -a * t * v), gp.map(|v| a * t * v))
                }
                FlowPreset::Cavity => {
                    // u = curl(0, 0, t g(x) g(y) g(z)), p = t cos(πx) cos(πy) cos(πz)
                    let (gx, gy, gz) = (wall(x[0]), wall(x[1]), wall(x[2]));
                    let u = [gx[0] * gy[1] * gz[0], -gx[1] * gy[0] * gz[0], 0.0];
                    let lap_u = [
                        gx[2] * gy[1] * gz[0] + gx[0] * gy[3] * gz[0] + gx[0] * gy[1] * gz[2],
                        -(gx[3] * gy[0] * gz[0] + gx[1] * gy[2] * gz[0] + gx[1] * gy[0] * gz[2]),
                        0.0,
                    ];
                    let c = [(PI * x[0]).cos(), (PI * x[1]).cos(), (PI * x[2]).cos()];
                    let s = [(PI * x[0]).sin(), (PI * x[1]).sin(), (PI * x[2]).sin()];
                    let gp = [-PI * s[0] * c[1] * c[2], -PI * c[0] * s[1] * c[2], -PI * c[0] * c[1] * s[2]];
                    (u.map(|v| a * t * v), a * t * c[0] * c[1] * c[2], lap_u.map(|v| -a * t * v), gp.map(|v| a * t * v))
                }
            }
        };
        let velocity = Field::from_fn(grid, |x, t| Spinor::vector(eval(x, t).0));
        let pressure = Field::from_fn(grid, |x, t| Spinor::scalar(eval(x, t).1));
        let forcing = Field::from_fn(grid, |x, t| {
            let (u, _, neg_lap, gp) = eval(x, t);
            let tl = t - grid.t0;
            // u is linear in t, so ∂t u = u / t
            let ut = if tl > 0.0 { u.map(|v| v / tl) } else { [0.0; 3] };
            Spinor::vector(std::array::from_fn(|i| neg_lap[i] + k * ut[i] + gp[i]))
        });
        Manufactured { forcing, velocity, pressure }
    }
}
