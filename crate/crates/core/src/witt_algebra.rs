//! Quaternions extended by the Witt pair 𝔣, 𝔣†.
//!
//! The basis is `{1, e1, e2, e3, f, fd, ffd}` with `fd·f` stored as `1 - ffd`.
//! [`WittQuaternion::mul`] is the bilinear extension of the basis table below.
//! The relations `e_j f = f e_j = 0` together with `f fd + fd f = 1` cannot
//! hold in an associative algebra, so [`associativity_defects`] is non-empty;
//! see [`crate::spinor`] for the representation used to act on fields.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Number of basis directions.
pub const DIM: usize = 7;

/// Basis labels in coefficient order.
pub const BASIS_NAMES: [&str; DIM] = ["1", "e1", "e2", "e3", "f", "fd", "ffd"];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WittQuaternion {
    pub s: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub wf: f64,
    pub wfd: f64,
    pub wn: f64,
}

// Structure constants: TABLE[i][j] is the coefficient vector of basis_i * basis_j.
const fn unit(i: usize) -> [i8; DIM] {
    let mut c = [0i8; DIM];
    c[i] = 1;
    c
}

const fn neg_unit(i: usize) -> [i8; DIM] {
    let mut c = [0i8; DIM];
    c[i] = -1;
    c
}

const Z: [i8; DIM] = [0; DIM];

const TABLE: [[[i8; DIM]; DIM]; DIM] = [
    // 1 * x
    [unit(0), unit(1), unit(2), unit(3), unit(4), unit(5), unit(6)],
    // e1 * x
    [unit(1), neg_unit(0), unit(3), neg_unit(2), Z, Z, Z],
    // e2 * x
    [unit(2), neg_unit(3), neg_unit(0), unit(1), Z, Z, Z],
    // e3 * x
    [unit(3), unit(2), neg_unit(1), neg_unit(0), Z, Z, Z],
    // f * x: f f = 0, f fd = ffd, f ffd = 0
    [unit(4), Z, Z, Z, Z, unit(6), Z],
    // fd * x: fd f = 1 - ffd, fd fd = 0, fd ffd = fd
    [unit(5), Z, Z, Z, [1, 0, 0, 0, 0, 0, -1], Z, unit(5)],
    // ffd * x: ffd f = f, ffd fd = 0, ffd ffd = ffd
    [unit(6), Z, Z, Z, unit(4), Z, unit(6)],
];

/// Coefficients of the product of two basis elements.
pub fn basis_product(i: usize, j: usize) -> [i64; DIM] {
    let mut out = [0i64; DIM];
    for (o, &c) in out.iter_mut().zip(TABLE[i][j].iter()) {
        *o = c as i64;
    }
    out
}

/// Bilinear product on coefficient arrays; generic so the algebra checks can
/// run in exact integer arithmetic.
pub fn mul_coeffs<T>(a: &[T; DIM], b: &[T; DIM]) -> [T; DIM]
where
    T: Copy + Default + Add<Output = T> + Mul<Output = T> + From<i8>,
{
    let mut out = [T::default(); DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            let ab = a[i] * b[j];
            for k in 0..DIM {
                let c = TABLE[i][j][k];
                if c != 0 {
                    out[k] = out[k] + T::from(c) * ab;
                }
            }
        }
    }
    out
}

fn int_unit(i: usize) -> [i64; DIM] {
    let mut c = [0i64; DIM];
    c[i] = 1;
    c
}

/// All basis triples `(i, j, k)` with `(b_i b_j) b_k != b_i (b_j b_k)`, in
/// lexicographic order, computed exactly.
pub fn associativity_defects() -> Vec<(usize, usize, usize)> {
    let mut bad = Vec::new();
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                let (a, b, c) = (int_unit(i), int_unit(j), int_unit(k));
                let left = mul_coeffs(&mul_coeffs(&a, &b), &c);
                let right = mul_coeffs(&a, &mul_coeffs(&b, &c));
                if left != right {
                    bad.push((i, j, k));
                }
            }
        }
    }
    bad
}

/// Outcome of checking the Witt and annihilation relations exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationReport {
    pub quaternion_rules: bool,
    pub witt_nilpotent: bool,
    pub witt_anticommutator: bool,
    pub annihilation: bool,
}

impl RelationReport {
    pub fn all(&self) -> bool {
        self.quaternion_rules && self.witt_nilpotent && self.witt_anticommutator && self.annihilation
    }
}

/// Checks `e_i^2 = e1 e2 e3 = -1`, `f^2 = fd^2 = 0`, `f fd + fd f = 1` and
/// `e_j x = x e_j = 0` for `x` in `{f, fd, ffd}`.
pub fn check_relations() -> RelationReport {
    let e = |i: usize| int_unit(i);
    let minus_one = {
        let mut c = [0i64; DIM];
        c[0] = -1;
        c
    };
    let quaternion_rules = (1..4).all(|i| mul_coeffs(&e(i), &e(i)) == minus_one)
        && mul_coeffs(&mul_coeffs(&e(1), &e(2)), &e(3)) == minus_one;
    let zero = [0i64; DIM];
    let witt_nilpotent = mul_coeffs(&e(4), &e(4)) == zero && mul_coeffs(&e(5), &e(5)) == zero;
    let ffd = mul_coeffs(&e(4), &e(5));
    let fdf = mul_coeffs(&e(5), &e(4));
    let mut sum = [0i64; DIM];
    for k in 0..DIM {
        sum[k] = ffd[k] + fdf[k];
    }
    let witt_anticommutator = sum == int_unit(0);
    let annihilation = (1..4).all(|j| {
        (4..7).all(|w| mul_coeffs(&e(j), &e(w)) == zero && mul_coeffs(&e(w), &e(j)) == zero)
    });
    RelationReport {
        quaternion_rules,
        witt_nilpotent,
        witt_anticommutator,
        annihilation,
    }
}

impl WittQuaternion {
    pub const ZERO: Self = Self::from_array([0.0; DIM]);
    pub const ONE: Self = Self::basis(0);
    pub const E1: Self = Self::basis(1);
    pub const E2: Self = Self::basis(2);
    pub const E3: Self = Self::basis(3);
    pub const F: Self = Self::basis(4);
    pub const FD: Self = Self::basis(5);
    pub const FFD: Self = Self::basis(6);

    pub const fn new(s: f64, v1: f64, v2: f64, v3: f64, wf: f64, wfd: f64, wn: f64) -> Self {
        Self { s, v1, v2, v3, wf, wfd, wn }
    }

    pub const fn basis(i: usize) -> Self {
        let mut c = [0.0; DIM];
        c[i] = 1.0;
        Self::from_array(c)
    }

    pub const fn from_array(c: [f64; DIM]) -> Self {
        Self::new(c[0], c[1], c[2], c[3], c[4], c[5], c[6])
    }

    pub const fn to_array(self) -> [f64; DIM] {
        [self.s, self.v1, self.v2, self.v3, self.wf, self.wfd, self.wn]
    }

    /// Pure vector `v1 e1 + v2 e2 + v3 e3`.
    pub const fn vector(v: [f64; 3]) -> Self {
        Self::new(0.0, v[0], v[1], v[2], 0.0, 0.0, 0.0)
    }

    pub fn mul(self, rhs: Self) -> Self {
        Self::from_array(mul_coeffs(&self.to_array(), &rhs.to_array()))
    }

    pub fn scalar_part(self) -> f64 {
        self.s
    }

    pub fn vector_part(self) -> Self {
        Self::vector([self.v1, self.v2, self.v3])
    }

    pub fn coeff_norm(self) -> f64 {
        self.to_array().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scale(self, a: f64) -> Self {
        Self::from_array(self.to_array().map(|c| a * c))
    }
}

impl Add for WittQuaternion {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.to_array(), rhs.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl AddAssign for WittQuaternion {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for WittQuaternion {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for WittQuaternion {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for WittQuaternion {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        WittQuaternion::mul(self, rhs)
    }
}

impl Mul<WittQuaternion> for f64 {
    type Output = WittQuaternion;
    fn mul(self, rhs: WittQuaternion) -> WittQuaternion {
        rhs.scale(self)
    }
}

/// Renders as `s + v1·e1 + v2·e2 + v3·e3 + wf·f + wfd·fd + wn·ffd`, every term
/// always present so the layout is fixed.
impl fmt::Display for WittQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.to_array();
        let prec = f.precision();
        let num = |x: f64| match prec {
            Some(p) => format!("{x:.p$}"),
            None => format!("{x}"),
        };
        write!(f, "{}", num(c[0]))?;
        for k in 1..DIM {
            write!(f, " + {}·{}", num(c[k]), BASIS_NAMES[k])?;
        }
        Ok(())
    }
}
