//! Spinor values: pairs of quaternions on which the Witt generators act
//! associatively.
//!
//! `e_j` acts as `(a, b) -> (e_j a, -e_j b)`, `f` as `(a, b) -> (b, 0)` and
//! `fd` as `(a, b) -> (0, a)`. These operators satisfy every relation of the
//! Witt-extended quaternions except the annihilation rules, which are replaced
//! by anticommutation of `e_j` with `f` and `fd`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::witt_algebra::WittQuaternion;

/// Quaternion `q0 + q1 e1 + q2 e2 + q3 e3`.
pub type Quat = [f64; 4];

/// Hamilton product.
pub fn qmul(p: Quat, q: Quat) -> Quat {
    [
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
    ]
}

/// Left multiplication by `e_{j+1}` (`j` zero-based).
#[inline]
pub fn e_left(j: usize, a: Quat) -> Quat {
    match j {
        0 => [-a[1], a[0], -a[3], a[2]],
        1 => [-a[2], a[3], a[0], -a[1]],
        _ => [-a[3], -a[2], a[1], a[0]],
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Spinor(pub [f64; 8]);

impl Spinor {
    pub const ZERO: Spinor = Spinor([0.0; 8]);

    pub fn new(up: Quat, lo: Quat) -> Self {
        Spinor([up[0], up[1], up[2], up[3], lo[0], lo[1], lo[2], lo[3]])
    }

    /// Scalar `p` placed in the real slot of the upper quaternion.
    pub fn scalar(p: f64) -> Self {
        Self::new([p, 0.0, 0.0, 0.0], [0.0; 4])
    }

    /// Vector field value `u1 e1 + u2 e2 + u3 e3` in the upper quaternion.
    pub fn vector(u: [f64; 3]) -> Self {
        Self::new([0.0, u[0], u[1], u[2]], [0.0; 4])
    }

    pub fn up(&self) -> Quat {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn lo(&self) -> Quat {
        [self.0[4], self.0[5], self.0[6], self.0[7]]
    }

    /// Action of `e_{j+1}`.
    #[inline]
    pub fn e(&self, j: usize) -> Self {
        let lo = e_left(j, self.lo());
        Self::new(e_left(j, self.up()), [-lo[0], -lo[1], -lo[2], -lo[3]])
    }

    /// Action of `f`.
    #[inline]
    pub fn f(&self) -> Self {
        Self::new(self.lo(), [0.0; 4])
    }

    /// Action of `fd`.
    #[inline]
    pub fn fd(&self) -> Self {
        Self::new([0.0; 4], self.up())
    }

    /// Action of a Witt element through the block matrix
    /// `[[s + v + wn, wf], [wfd, s - v]]`.
    pub fn act(&self, w: &WittQuaternion) -> Self {
        let (a, b) = (self.up(), self.lo());
        let p = [w.s + w.wn, w.v1, w.v2, w.v3];
        let m = [w.s, -w.v1, -w.v2, -w.v3];
        let pa = qmul(p, a);
        let mb = qmul(m, b);
        let mut out = [0.0; 8];
        for c in 0..4 {
            out[c] = pa[c] + w.wf * b[c];
            out[4 + c] = w.wfd * a[c] + mb[c];
        }
        Spinor(out)
    }

    /// Right multiplication of both quaternions by `q`; every operator in this
    /// crate commutes with it.
    pub fn right_mul(&self, q: Quat) -> Self {
        Self::new(qmul(self.up(), q), qmul(self.lo(), q))
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.0.iter().zip(o.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        Spinor(self.0.map(|c| a * c))
    }
}

impl Index<usize> for Spinor {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Spinor {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Spinor {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Spinor(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl AddAssign for Spinor {
    fn add_assign(&mut self, o: Self) {
        for i in 0..8 {
            self.0[i] += o.0[i];
        }
    }
}

impl Sub for Spinor {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Spinor(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl SubAssign for Spinor {
    fn sub_assign(&mut self, o: Self) {
        for i in 0..8 {
            self.0[i] -= o.0[i];
        }
    }
}

impl Neg for Spinor {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul<Spinor> for f64 {
    type Output = Spinor;
    fn mul(self, s: Spinor) -> Spinor {
        s.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witt_algebra::WittQuaternion as W;

    fn sample() -> Spinor {
        Spinor([0.3, -1.2, 0.7, 2.0, -0.4, 0.9, 1.1, -0.6])
    }

    fn close(a: Spinor, b: Spinor) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn generator_actions_match_block_matrix() {
        let u = sample();
        assert!(close(u.act(&W::E1), u.e(0)));
        assert!(close(u.act(&W::E2), u.e(1)));
        assert!(close(u.act(&W::E3), u.e(2)));
        assert!(close(u.act(&W::F), u.f()));
        assert!(close(u.act(&W::FD), u.fd()));
        assert!(close(u.act(&W::FFD), u.fd().f()));
    }

    #[test]
    fn clifford_and_witt_relations() {
        let u = sample();
        for i in 0..3 {
            assert!(close(u.e(i).e(i), -u));
            for j in 0..3 {
                if i != j {
                    assert!(close(u.e(j).e(i) + u.e(i).e(j), Spinor::ZERO));
                }
            }
            assert!(close(u.f().e(i) + u.e(i).f(), Spinor::ZERO));
            assert!(close(u.fd().e(i) + u.e(i).fd(), Spinor::ZERO));
        }
        assert!(close(u.f().f(), Spinor::ZERO));
        assert!(close(u.fd().fd(), Spinor::ZERO));
        assert!(close(u.fd().f() + u.f().fd(), u));
        // e1 e2 e3 acts as -1 on the upper and +1 on the lower quaternion
        assert!(close(u.e(2).e(1).e(0), u.f().fd() - u.fd().f()));
    }

    #[test]
    fn right_multiplication_commutes() {
        let u = sample();
        let q = [0.2, -0.5, 1.3, 0.4];
        for j in 0..3 {
            assert!(close(u.e(j).right_mul(q), u.right_mul(q).e(j)));
        }
        assert!(close(u.f().right_mul(q), u.right_mul(q).f()));
        assert!(close(u.fd().right_mul(q), u.right_mul(q).fd()));
    }
}
