//! Lattice shells, spin-structure signs and the periodized kernel
//! `𝓔(x,t) = Σ_ω sign(ω) E(x + ω, t)` on cylinders and tori.

use thiserror::Error;

use crate::kernels::{eval_E, KernelError, KernelParams, SpaceTimePoint};
use crate::witt_algebra::WittQuaternion;

/// Default cap on the number of shells summed in tolerance mode.
pub const DEFAULT_SHELL_CAP: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("lattice rank must be 0..=3, got {0}")]
    BadRank(usize),
    #[error("rank {rank} needs {rank} antiperiodicity flags, got {flags}")]
    FlagCount { rank: usize, flags: usize },
    #[error("tail bound needs m_start > r (m_start = {m_start}, r = {r})")]
    TailPrecondition { m_start: usize, r: f64 },
    #[error("tail bound needs t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("target tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("lattice sum not converged within the shell cap of {cap} (tail bound {tail:e})")]
    ShellCap { cap: usize, tail: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSpec {
    rank: usize,
    anti_flags: Vec<bool>,
}

impl LatticeSpec {
    pub fn new(rank: usize, anti_flags: Vec<bool>) -> Result<Self, LatticeError> {
        if rank > 3 {
            return Err(LatticeError::BadRank(rank));
        }
        if anti_flags.len() != rank {
            return Err(LatticeError::FlagCount { rank, flags: anti_flags.len() });
        }
        Ok(Self { rank, anti_flags })
    }

    pub fn euclidean() -> Self {
        Self { rank: 0, anti_flags: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn anti_flags(&self) -> &[bool] {
        &self.anti_flags
    }

    /// Antiperiodicity per spatial axis (false beyond the rank).
    pub fn axis_anti(&self) -> [bool; 3] {
        std::array::from_fn(|a| a < self.rank && self.anti_flags[a])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeShell {
    pub m: usize,
    pub points: Vec<[i64; 3]>,
}

/// Points of the rank-ρ sublattice with max-norm exactly `m`, lexicographic.
pub fn shell_points(m: usize, spec: &LatticeSpec) -> LatticeShell {
    let m_i = m as i64;
    let range = |a: usize| if a < spec.rank { -m_i..=m_i } else { 0..=0 };
    let mut points = Vec::new();
    for x in range(0) {
        for y in range(1) {
            for z in range(2) {
                let p = [x, y, z];
                if p.iter().map(|c| c.abs()).max().unwrap_or(0) == m_i {
                    points.push(p);
                }
            }
        }
    }
    LatticeShell { m, points }
}

/// `(-1)^(sum of ω over antiperiodic generators)`.
pub fn sign_of(omega: [i64; 3], spec: &LatticeSpec) -> f64 {
    let e: i64 = (0..spec.rank).filter(|&a| spec.anti_flags[a]).map(|a| omega[a]).sum();
    if e.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn shell_count(m: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        let m = m as f64;
        (2.0 * m + 1.0).powi(3) - (2.0 * m - 1.0).powi(3)
    }
}

fn majorant_term(m: usize, r: f64, t: f64, k: f64) -> f64 {
    // Sum of absolute coefficient majorants of E(x + ω) for |x|_max <= r,
    // |ω|_max = m: |x+ω|_max <= r + m, |x+ω|_2 >= m - r and Σ|x_j| <= 3(r+m).
    let a = r + m as f64;
    let d = m as f64 - r;
    let e = -k * d * d / (4.0 * t);
    if e < crate::kernels::UNDERFLOW_EXPONENT {
        return 0.0;
    }
    let pref = k.sqrt() * (4.0 * std::f64::consts::PI * t).powf(-1.5);
    let bracket = 3.0 * k * a / (2.0 * t) + 1.5 / t + 3.0 * k * a * a / (4.0 * t * t) + k;
    shell_count(m) * pref * bracket * e.exp()
}

/// Rigorous bound on `Σ_{m >= m_start}` of the shell contributions for
/// evaluation points with `|x|_max <= r`.
pub fn tail_bound(m_start: usize, r: f64, t: f64, params: &KernelParams) -> Result<f64, LatticeError> {
    if !(m_start as f64 > r) || r < 0.0 {
        return Err(LatticeError::TailPrecondition { m_start, r });
    }
    if !(t > 0.0) {
        return Err(LatticeError::NonPositiveTime(t));
    }
    let k = params.k;
    let mut total = 0.0;
    let mut m = m_start;
    let mut prev = majorant_term(m, r, t, k);
    total += prev;
    loop {
        m += 1;
        let term = majorant_term(m, r, t, k);
        total += term;
        if term == 0.0 {
            return Ok(total);
        }
        let q = term / prev;
        let q_next = majorant_term(m + 1, r, t, k) / term;
        // Once successive ratios decrease below 1 the remainder is dominated
        // by a geometric series with ratio q_next.
        if q < 1.0 && q_next <= q && term < 1e-3 * total {
            return Ok(total + term * q_next / (1.0 - q_next));
        }
        prev = term;
        if m > m_start + 100_000 {
            return Ok(f64::INFINITY);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodizedValue {
    pub value: WittQuaternion,
    pub tail: f64,
    pub shells_used: usize,
}

fn shifted(p: &SpaceTimePoint, w: [i64; 3]) -> SpaceTimePoint {
    SpaceTimePoint::new([p.x[0] + w[0] as f64, p.x[1] + w[1] as f64, p.x[2] + w[2] as f64], p.t)
}

fn check_singular(p: &SpaceTimePoint, spec: &LatticeSpec) -> Result<(), LatticeError> {
    if p.t != 0.0 {
        return Ok(());
    }
    let on_lattice = (0..3).all(|a| {
        if a < spec.rank {
            p.x[a] == p.x[a].round()
        } else {
            p.x[a] == 0.0
        }
    });
    if on_lattice {
        Err(KernelError::Singular.into())
    } else {
        Ok(())
    }
}

fn shell_sum(p: &SpaceTimePoint, params: &KernelParams, spec: &LatticeSpec, m: usize) -> Result<WittQuaternion, LatticeError> {
    let mut acc = WittQuaternion::ZERO;
    for w in shell_points(m, spec).points {
        acc += sign_of(w, spec) * eval_E(&shifted(p, w), params)?;
    }
    Ok(acc)
}

fn radius(p: &SpaceTimePoint) -> f64 {
    p.x.iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

/// Shell-ordered sum until the tail bound of the remaining shells drops below
/// `target_tol`.
pub fn periodized_kernel(
    p: &SpaceTimePoint,
    params: &KernelParams,
    spec: &LatticeSpec,
    target_tol: f64,
) -> Result<PeriodizedValue, LatticeError> {
    periodized_kernel_capped(p, params, spec, target_tol, DEFAULT_SHELL_CAP)
}

pub fn periodized_kernel_capped(
    p: &SpaceTimePoint,
    params: &KernelParams,
    spec: &LatticeSpec,
    target_tol: f64,
    cap: usize,
) -> Result<PeriodizedValue, LatticeError> {
    if !(target_tol > 0.0) {
        return Err(LatticeError::BadTolerance(target_tol));
    }
    check_singular(p, spec)?;
    if p.t <= 0.0 {
        return Ok(PeriodizedValue { value: WittQuaternion::ZERO, tail: 0.0, shells_used: 0 });
    }
    if spec.rank == 0 {
        return Ok(PeriodizedValue { value: eval_E(p, params)?, tail: 0.0, shells_used: 1 });
    }
    let r = radius(p);
    let mut acc = WittQuaternion::ZERO;
    let mut tail = f64::INFINITY;
    for m in 0..cap {
        acc += shell_sum(p, params, spec, m)?;
        if (m + 1) as f64 > r {
            tail = tail_bound(m + 1, r, p.t, params)?;
            if tail < target_tol {
                return Ok(PeriodizedValue { value: acc, tail, shells_used: m + 1 });
            }
        }
    }
    Err(LatticeError::ShellCap { cap, tail })
}

/// Fixed number of shells `0..shells`; the tail is infinite when the bound's
/// precondition `shells > r` fails.
pub fn periodized_kernel_fixed(
    p: &SpaceTimePoint,
    params: &KernelParams,
    spec: &LatticeSpec,
    shells: usize,
) -> Result<PeriodizedValue, LatticeError> {
    check_singular(p, spec)?;
    if p.t <= 0.0 {
        return Ok(PeriodizedValue { value: WittQuaternion::ZERO, tail: 0.0, shells_used: 0 });
    }
    if spec.rank == 0 {
        return Ok(PeriodizedValue { value: eval_E(p, params)?, tail: 0.0, shells_used: 1 });
    }
    let mut acc = WittQuaternion::ZERO;
    for m in 0..shells {
        acc += shell_sum(p, params, spec, m)?;
    }
    let r = radius(p);
    let tail = if shells as f64 > r { tail_bound(shells, r, p.t, params)? } else { f64::INFINITY };
    Ok(PeriodizedValue { value: acc, tail, shells_used: shells })
}

/// Signed 1-D lattice sum `Σ_m σ^m f(m)` over all integers, with `σ = -1`
/// when `anti`. Terms are added in the order `0, ±1, ±2, …` and summation
/// stops once two consecutive pairs are negligible relative to `tol`.
pub fn signed_axis_sum(f: impl Fn(f64) -> f64, anti: bool, tol: f64) -> f64 {
    let mut acc = f(0.0);
    let mut quiet = 0;
    for m in 1..10_000 {
        let s = if anti && m % 2 == 1 { -1.0 } else { 1.0 };
        let (a, b) = (f(m as f64), f(-(m as f64)));
        acc += s * (a + b);
        if a.abs() + b.abs() <= tol * acc.abs().max(f64::MIN_POSITIVE) || a.abs() + b.abs() == 0.0 {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rank: usize, flags: &[bool]) -> LatticeSpec {
        LatticeSpec::new(rank, flags.to_vec()).unwrap()
    }

    #[test]
    fn shells() {
        assert_eq!(shell_points(0, &spec(3, &[false; 3])).points, vec![[0, 0, 0]]);
        assert_eq!(shell_points(1, &spec(3, &[false; 3])).points.len(), 26);
        assert_eq!(shell_points(1, &spec(1, &[false])).points, vec![[-1, 0, 0], [1, 0, 0]]);
        for m in 1..=10 {
            assert_eq!(shell_points(m, &spec(3, &[false; 3])).points.len() as f64, shell_count(m));
            let r2 = shell_points(m, &spec(2, &[false; 2])).points.len();
            assert_eq!(r2, (2 * m + 1).pow(2) - (2 * m - 1).pow(2));
        }
    }

    #[test]
    fn signs() {
        assert_eq!(sign_of([3, 5, 0], &spec(3, &[false; 3])), 1.0);
        assert_eq!(sign_of([3, 5, 0], &spec(3, &[true, false, false])), -1.0);
        assert_eq!(sign_of([1, 1, 0], &spec(3, &[true, true, false])), 1.0);
        assert_eq!(sign_of([-1, 0, 0], &spec(1, &[true])), -1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(LatticeSpec::new(4, vec![false; 4]).is_err());
        assert!(LatticeSpec::new(2, vec![false]).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        let k = KernelParams::new(1.0).unwrap();
        assert!(tail_bound(40, 1.0, 1.0, &k).unwrap() < 1e-100);
        for m in 2..10 {
            assert!(tail_bound(m + 1, 1.0, 0.5, &k).unwrap() < tail_bound(m, 1.0, 0.5, &k).unwrap());
        }
        assert!(tail_bound(1, 1.0, 0.5, &k).is_err());
    }

    #[test]
    fn rank_zero_and_causal_cases() {
        let k = KernelParams::new(1.0).unwrap();
        let p = SpaceTimePoint::new([0.3, 0.2, 0.1], 0.5);
        let v = periodized_kernel(&p, &k, &LatticeSpec::euclidean(), 1e-10).unwrap();
        assert_eq!(v.value, eval_E(&p, &k).unwrap());
        assert_eq!(v.shells_used, 1);
        let v = periodized_kernel(&SpaceTimePoint::new([0.3, 0.2, 0.1], -0.5), &k, &spec(3, &[true; 3]), 1e-10).unwrap();
        assert_eq!((v.value, v.tail), (WittQuaternion::ZERO, 0.0));
        assert!(periodized_kernel(&SpaceTimePoint::new([1.0, -2.0, 0.0], 0.0), &k, &spec(3, &[false; 3]), 1e-10).is_err());
    }

    #[test]
    fn shell_cap_is_reported() {
        let k = KernelParams::new(1.0).unwrap();
        let p = SpaceTimePoint::new([0.3, 0.2, 0.1], 50.0);
        let err = periodized_kernel_capped(&p, &k, &spec(3, &[false; 3]), 1e-12, 2).unwrap_err();
        assert!(matches!(err, LatticeError::ShellCap { cap: 2, .. }));
    }

    #[test]
    fn measured_tail_is_below_bound() {
        let k = KernelParams::new(1.0).unwrap();
        let s = spec(3, &[false; 3]);
        let p = SpaceTimePoint::new([0.9, -0.7, 0.5], 0.5);
        let cut = periodized_kernel_fixed(&p, &k, &s, 6).unwrap().value;
        let full = periodized_kernel_fixed(&p, &k, &s, 13).unwrap().value;
        let measured: f64 = (full - cut).to_array().iter().map(|c| c.abs()).sum();
        assert!(measured <= tail_bound(7, 1.0, 0.5, &k).unwrap() + tail_bound(6, 1.0, 0.5, &k).unwrap());
        assert!(measured <= tail_bound(6, 1.0, 0.5, &k).unwrap());
    }

    #[test]
    fn axis_sum_matches_direct_sum() {
        let f = |m: f64| (-(0.3 + m) * (0.3 + m) / 0.2).exp();
        let direct: f64 = (-30..=30).map(|m| f(m as f64) * if m % 2 == 0 { 1.0 } else { -1.0 }).sum();
        assert!((signed_axis_sum(f, true, 1e-17) - direct).abs() < 1e-15);
    }
}
