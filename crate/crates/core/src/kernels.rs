//! Fundamental solutions of the parabolic Dirac operators and the discrete
//! operators `D± = sum_j e_j d_j + f d_t ± k fd`.
//!
//! With the Gaussian `Φ(x,t) = √k (4πt)^{-3/2} exp(-k|x|²/4t)`, which solves
//! `(-Δ + k ∂t) Φ = δ`, the fundamental solution of `D+` is `E = D+ Φ`:
//!
//! ```text
//! E(x,t;k) = H(t) Φ ( -(k/2t) Σ e_j x_j + f (k|x|²/4t² - 3/2t) + k fd )
//! ```
//!
//! As a distribution `E` also carries `(1/k) f δ(x) δ(t)`; the volume
//! potentials account for it.

use thiserror::Error;

use crate::domain::{diff_time, discrete_spatial_dirac, Field, SpaceTimeGrid};
use crate::spinor::Spinor;
use crate::witt_algebra::WittQuaternion;

/// Power of `k` multiplying `fd` in `D±`, fixed by the calibration oracle in
/// [`crate::verify::calibrate_convention`].
pub const FDAGGER_POWER: i32 = 1;

/// Operator convention: `fd` coefficient `k^fdagger_power` and factorization
/// coefficient `c(k) = k^c_power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Convention {
    pub fdagger_power: i32,
    pub c_power: i32,
}

impl Convention {
    /// The convention adopted after calibration.
    pub const ADOPTED: Convention = Convention { fdagger_power: FDAGGER_POWER, c_power: 1 };
}

/// Below this exponent the Gaussian factor is flushed to zero.
pub const UNDERFLOW_EXPONENT: f64 = -700.0;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel parameter k must be positive, got {0}")]
    InvalidK(f64),
    #[error("the fundamental solution is singular at (x, t) = (0, 0)")]
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub k: f64,
}

impl KernelParams {
    pub fn new(k: f64) -> Result<Self, KernelError> {
        if k > 0.0 && k.is_finite() {
            Ok(Self { k })
        } else {
            Err(KernelError::InvalidK(k))
        }
    }

    /// Coefficient of `fd` in `D+`.
    pub fn fdagger_coefficient(&self) -> f64 {
        self.k.powi(FDAGGER_POWER)
    }

    /// `c(k)` in `(D±)² = -Δ ± c(k) ∂t`.
    pub fn factorization_coefficient(&self) -> f64 {
        self.fdagger_coefficient()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimePoint {
    pub x: [f64; 3],
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: [f64; 3], t: f64) -> Self {
        Self { x, t }
    }

    pub fn norm_sq(&self) -> f64 {
        self.x.iter().map(|c| c * c).sum()
    }
}

/// `√k (4πt)^{-3/2} exp(-k r²/4t)` for `t > 0`, else 0.
pub fn heat_kernel(r2: f64, t: f64, k: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let e = -k * r2 / (4.0 * t);
    if e < UNDERFLOW_EXPONENT {
        return 0.0;
    }
    k.sqrt() * (4.0 * std::f64::consts::PI * t).powf(-1.5) * e.exp()
}

fn reject_origin(p: &SpaceTimePoint) -> Result<(), KernelError> {
    if p.t == 0.0 && p.x == [0.0; 3] {
        Err(KernelError::Singular)
    } else {
        Ok(())
    }
}

/// Fundamental solution of `D+_{x,t,k}`; zero for `t <= 0`.
#[allow(non_snake_case)]
pub fn eval_E(p: &SpaceTimePoint, params: &KernelParams) -> Result<WittQuaternion, KernelError> {
    reject_origin(p)?;
    let (t, k) = (p.t, params.k);
    let r2 = p.norm_sq();
    let phi = heat_kernel(r2, t, k);
    if phi == 0.0 {
        return Ok(WittQuaternion::ZERO);
    }
    let a = -k / (2.0 * t) * phi;
    Ok(WittQuaternion::new(
        0.0,
        a * p.x[0],
        a * p.x[1],
        a * p.x[2],
        phi * (k * r2 / (4.0 * t * t) - 1.5 / t),
        phi * params.fdagger_coefficient(),
        0.0,
    ))
}

/// Time-reflected fundamental solution of the dual operator `D-_{x,t}` (k = 1);
/// zero for `t <= 0`.
#[allow(non_snake_case)]
pub fn eval_E_minus(p: &SpaceTimePoint) -> Result<WittQuaternion, KernelError> {
    reject_origin(p)?;
    let t = p.t;
    let r2 = p.norm_sq();
    let phi = heat_kernel(r2, t, 1.0);
    if phi == 0.0 {
        return Ok(WittQuaternion::ZERO);
    }
    let a = phi / (2.0 * t);
    Ok(WittQuaternion::new(
        0.0,
        a * p.x[0],
        a * p.x[1],
        a * p.x[2],
        phi * (1.5 / t - r2 / (4.0 * t * t)),
        -phi,
        0.0,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Discrete `D±_{x,t,k} u`.
pub fn apply_parabolic_dirac(u: &Field, params: &KernelParams, sign: Sign) -> Field {
    let mut out = discrete_spatial_dirac(u);
    let ut = diff_time(u);
    let c = sign.value() * params.fdagger_coefficient();
    for ((o, v), w) in out.values_mut().iter_mut().zip(ut.values()).zip(u.values()) {
        *o += v.f() + w.fd().scale(c);
    }
    out
}

/// Smooth test field: one Gaussian bump times a per-component linear factor
/// and a quadratic in time, with closed-form Laplacian and time derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPreset {
    pub center: [f64; 3],
    pub width: f64,
    pub slopes: [[f64; 3]; 8],
    pub time_coeffs: [f64; 3],
}

impl Default for GaussianPreset {
    fn default() -> Self {
        let mut slopes = [[0.0; 3]; 8];
        for (c, s) in slopes.iter_mut().enumerate() {
            let c = c as f64;
            *s = [0.3 * c - 1.0, 0.5 - 0.2 * c, 0.1 * c];
        }
        Self { center: [0.5; 3], width: 0.3, slopes, time_coeffs: [1.0, 0.5, -0.25] }
    }
}

impl GaussianPreset {
    fn parts(&self, x: [f64; 3]) -> (f64, [f64; 3], f64) {
        let s2 = self.width * self.width;
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let r2: f64 = d.iter().map(|c| c * c).sum();
        let g = (-r2 / (2.0 * s2)).exp();
        let grad = d.map(|c| -c / s2 * g);
        let lap = g * (r2 / (s2 * s2) - 3.0 / s2);
        (g, grad, lap)
    }

    fn time(&self, t: f64) -> (f64, f64) {
        let [a, b, c] = self.time_coeffs;
        (a + b * t + c * t * t, b + 2.0 * c * t)
    }

    fn linear(&self, c: usize, x: [f64; 3]) -> f64 {
        1.0 + (0..3).map(|j| self.slopes[c][j] * (x[j] - self.center[j])).sum::<f64>()
    }

    pub fn value(&self, x: [f64; 3], t: f64) -> Spinor {
        let (g, _, _) = self.parts(x);
        let (tau, _) = self.time(t);
        Spinor(std::array::from_fn(|c| g * self.linear(c, x) * tau))
    }

    /// `(-Δ + a ∂t) u` in closed form.
    pub fn heat(&self, x: [f64; 3], t: f64, a: f64) -> Spinor {
        let (g, grad, lap) = self.parts(x);
        let (tau, dtau) = self.time(t);
        Spinor(std::array::from_fn(|c| {
            let p = self.linear(c, x);
            let cross: f64 = (0..3).map(|j| grad[j] * self.slopes[c][j]).sum();
            let lap_u = (lap * p + 2.0 * cross) * tau;
            -lap_u + a * g * p * dtau
        }))
    }

    pub fn sample(&self, grid: &SpaceTimeGrid) -> Field {
        Field::from_fn(grid, |x, t| self.value(x, t))
    }
}

/// Max-norm of `D±(D± u) - (-Δ ± c(k) ∂t) u` over nodes at least two cells
/// away from every non-periodic edge and from both time ends.
pub fn factorization_residual(
    preset: &GaussianPreset,
    grid: &SpaceTimeGrid,
    params: &KernelParams,
    sign: Sign,
) -> f64 {
    let u = preset.sample(grid);
    let dd = apply_parabolic_dirac(&apply_parabolic_dirac(&u, params, sign), params, sign);
    let a = sign.value() * params.factorization_coefficient();
    let inner = |i: usize, n: usize, wrapped: bool| wrapped || (i >= 2 && i + 2 < n);
    let mut worst = 0.0f64;
    for idx in 0..grid.len() {
        let m = idx / grid.ncells();
        let c = grid.cell_of(idx % grid.ncells());
        if !inner(m, grid.nt, false) || !(0..3).all(|j| inner(c[j], grid.dims[j], grid.wrap[j].is_wrapped())) {
            continue;
        }
        let p = grid.point(idx);
        let r = dd.values()[idx] - preset.heat(p.x, p.t, a);
        worst = worst.max(r.0.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent transcription of the closed forms.
    fn transcribed_e(x: [f64; 3], t: f64, k: f64) -> [f64; 7] {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let pref = k.sqrt() * (-k * r2 / (4.0 * t)).exp() / (2.0 * (std::f64::consts::PI * t).sqrt()).powi(3);
        [
            0.0,
            -pref * k * x[0] / (2.0 * t),
            -pref * k * x[1] / (2.0 * t),
            -pref * k * x[2] / (2.0 * t),
            pref * (k * r2 / (4.0 * t * t) - 3.0 / (2.0 * t)),
            pref * k,
            0.0,
        ]
    }

    #[test]
    fn closed_form_oracle() {
        let k = KernelParams::new(1.0).unwrap();
        let e = eval_E(&SpaceTimePoint::new([1.0, 0.0, 0.0], 0.25), &k).unwrap().to_array();
        let o = transcribed_e([1.0, 0.0, 0.0], 0.25, 1.0);
        for i in 0..7 {
            assert!((e[i] - o[i]).abs() <= 1e-14 * o[i].abs().max(1e-300), "{i}: {} vs {}", e[i], o[i]);
        }
    }

    #[test]
    fn kernel_is_d_plus_of_heat_kernel() {
        // Central differences of Φ reproduce E to O(eps²).
        let k = 1.7;
        let (x, t) = ([0.3, -0.2, 0.4], 0.35);
        let phi = |x: [f64; 3], t: f64| heat_kernel(x.iter().map(|c| c * c).sum(), t, k);
        let eps = 1e-5;
        let e = eval_E(&SpaceTimePoint::new(x, t), &KernelParams::new(k).unwrap()).unwrap().to_array();
        for j in 0..3 {
            let (mut a, mut b) = (x, x);
            a[j] += eps;
            b[j] -= eps;
            let d = (phi(a, t) - phi(b, t)) / (2.0 * eps);
            assert!((d - e[1 + j]).abs() < 1e-7 * d.abs().max(1.0));
        }
        let dt = (phi(x, t + eps) - phi(x, t - eps)) / (2.0 * eps);
        assert!((dt - e[4]).abs() < 1e-7 * dt.abs().max(1.0));
        assert!((k * phi(x, t) - e[5]).abs() < 1e-14);
    }

    #[test]
    fn causality_and_parity() {
        let k = KernelParams::new(2.0).unwrap();
        assert_eq!(eval_E(&SpaceTimePoint::new([0.1, 0.2, 0.3], -1.0), &k).unwrap(), WittQuaternion::ZERO);
        assert_eq!(eval_E(&SpaceTimePoint::new([0.1, 0.2, 0.3], 0.0), &k).unwrap(), WittQuaternion::ZERO);
        assert_eq!(eval_E(&SpaceTimePoint::new([0.0; 3], 0.0), &k), Err(KernelError::Singular));
        let e0 = eval_E(&SpaceTimePoint::new([0.0; 3], 0.7), &k).unwrap();
        assert_eq!(e0.vector_part(), WittQuaternion::ZERO);
        let a = eval_E(&SpaceTimePoint::new([0.1, -0.4, 0.2], 0.3), &k).unwrap();
        let b = eval_E(&SpaceTimePoint::new([-0.1, 0.4, -0.2], 0.3), &k).unwrap();
        assert_eq!(a.vector_part(), -b.vector_part());
        assert_eq!((a.wf, a.wfd, a.wn), (b.wf, b.wfd, b.wn));
    }

    #[test]
    fn dual_kernel_examples() {
        assert_eq!(eval_E_minus(&SpaceTimePoint::new([0.3, 0.0, 0.0], -1.0)).unwrap(), WittQuaternion::ZERO);
        let e = eval_E_minus(&SpaceTimePoint::new([0.0; 3], 1.0)).unwrap();
        let c = 1.0 / (2.0 * std::f64::consts::PI.sqrt()).powi(3);
        let expect = WittQuaternion::new(0.0, 0.0, 0.0, 0.0, 1.5 * c, -c, 0.0);
        assert!((e - expect).coeff_norm() < 1e-15);
        let a = eval_E_minus(&SpaceTimePoint::new([0.5, 0.1, -0.3], 0.4)).unwrap();
        let b = eval_E_minus(&SpaceTimePoint::new([-0.5, -0.1, 0.3], 0.4)).unwrap();
        assert_eq!(a.vector_part(), -b.vector_part());
        assert_eq!((a.wf, a.wfd), (b.wf, b.wfd));
    }

    #[test]
    fn underflow_is_flushed() {
        assert_eq!(heat_kernel(1e6, 1e-3, 1.0), 0.0);
        let e = eval_E(&SpaceTimePoint::new([100.0, 0.0, 0.0], 1e-3), &KernelParams::new(1.0).unwrap()).unwrap();
        assert_eq!(e, WittQuaternion::ZERO);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(KernelParams::new(0.0).is_err());
        assert!(KernelParams::new(-1.0).is_err());
        assert!(KernelParams::new(f64::NAN).is_err());
    }

    #[test]
    fn dirac_of_constant_and_linear_fields() {
        let g = SpaceTimeGrid::unit_box(4, 3).unwrap();
        let params = KernelParams::new(1.5).unwrap();
        let c = Spinor([1.0, 2.0, -1.0, 0.5, 3.0, 0.0, 1.0, -2.0]);
        let u = Field::from_fn(&g, |_, _| c);
        for sign in [Sign::Plus, Sign::Minus] {
            let d = apply_parabolic_dirac(&u, &params, sign);
            let expect = c.fd().scale(sign.value() * 1.5);
            assert!(d.values().iter().all(|v| (*v - expect).norm() < 1e-12));
        }
        let u = Field::from_fn(&g, |x, _| Spinor::vector([x[0], 0.0, 0.0]));
        let d = apply_parabolic_dirac(&u, &KernelParams::new(1.0).unwrap(), Sign::Plus);
        assert!(d.values().iter().all(|v| (v[0] + 1.0).abs() < 1e-12 && v[1].abs() + v[2].abs() + v[3].abs() < 1e-12));
    }

    #[test]
    fn factorization_is_second_order() {
        let preset = GaussianPreset::default();
        let params = KernelParams::new(1.0).unwrap();
        assert_eq!(
            factorization_residual(
                &GaussianPreset { time_coeffs: [0.0; 3], ..preset.clone() },
                &SpaceTimeGrid::unit_box(8, 8).unwrap(),
                &params,
                Sign::Plus
            ),
            0.0
        );
        let r16 = factorization_residual(&preset, &SpaceTimeGrid::unit_box(16, 16).unwrap(), &params, Sign::Plus);
        let r32 = factorization_residual(&preset, &SpaceTimeGrid::unit_box(32, 32).unwrap(), &params, Sign::Plus);
        assert!(r16 / r32 > 3.0, "ratio {}", r16 / r32);
    }
}
