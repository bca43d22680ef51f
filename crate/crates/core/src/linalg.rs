//! Plane vectors and 2×2 matrices.
//!
//! Matrices are row-major: `m[r][c]`. Column `c` of a Jacobian holds the
//! partial derivatives with respect to coordinate `c`.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn normalized(self) -> Vec2 {
        self.scale(1.0 / self.norm())
    }

    /// Rotation by −π/2: (x, y) ↦ (y, −x).
    pub fn rot_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    /// Unsigned angle between two nonzero vectors, in [0, π].
    pub fn angle_to(self, o: Vec2) -> f64 {
        self.cross(o).abs().atan2(self.dot(o))
    }

    /// Angle between the lines spanned by two nonzero vectors, in [0, π/2].
    pub fn line_angle(self, o: Vec2) -> f64 {
        self.cross(o).abs().atan2(self.dot(o).abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);

    pub fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn from_cols(c0: Vec2, c1: Vec2) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        match v {
            [a, b, c, d] => Some(Self::new(*a, *b, *c, *d)),
            _ => None,
        }
    }

    pub fn col(&self, c: usize) -> Vec2 {
        Vec2::new(self.m[0][c], self.m[1][c])
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    /// Adjugate: `adj(M)·M = det(M)·I`.
    pub fn adjugate(&self) -> Mat2 {
        Mat2::new(self.m[1][1], -self.m[0][1], -self.m[1][0], self.m[0][0])
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let [a, b, c, d] = self.entries();
        Mat2::new(a * s, b * s, c * s, d * s)
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        let [a, b, c, d] = self.entries();
        a.hypot(b).hypot(c.hypot(d))
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }

    /// Rotation-invariant split `E, F, G, H` with `Q = hypot(E, H)` and
    /// `R = hypot(F, G)`; the singular values are `Q + R` and `|Q − R|`.
    pub(crate) fn efgh(&self) -> (f64, f64, f64, f64) {
        let [a, b, c, d] = self.entries();
        (0.5 * (a + d), 0.5 * (a - d), 0.5 * (c + b), 0.5 * (c - b))
    }

    /// Singular values `(σ_max, σ_min)`. `σ_min` comes from `|det|/σ_max`,
    /// which keeps full relative accuracy when `σ_min ≪ σ_max`.
    pub fn singular_values(&self) -> (f64, f64) {
        let (e, f, g, h) = self.efgh();
        let smax = e.hypot(h) + f.hypot(g);
        if smax == 0.0 {
            return (0.0, 0.0);
        }
        (smax, self.det().abs() / smax)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        self.singular_values().0
    }

    /// Smallest singular value `‖M⁻¹‖⁻¹`.
    pub fn conorm(&self) -> f64 {
        self.singular_values().1
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.mul_vec(v)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let [a, b, c, d] = self.entries();
        let [e, f, g, h] = o.entries();
        Mat2::new(a + e, b + f, c + g, d + h)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

/// `log(exp(a) + exp(b))` without overflow; `−∞` is the additive identity.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log Σ exp(xᵢ)`; an empty input gives `−∞`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, log_add_exp)
}

/// Natural log of a nonnegative value, mapping 0 to `−∞`.
pub fn ln0(v: f64) -> f64 {
    if v == 0.0 {
        f64::NEG_INFINITY
    } else {
        v.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_diagonal_and_rotation() {
        let (s1, s2) = Mat2::diag(3.0, -0.5).singular_values();
        assert!((s1 - 3.0).abs() < 1e-15 && (s2 - 0.5).abs() < 1e-15);
        let (r1, r2) = Mat2::rotation(0.7).singular_values();
        assert!((r1 - 1.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let m = Mat2::new(0.3, -2.8, 0.0, 0.3);
        let g = m.transpose() * m;
        let tr = g.trace();
        let disc = (tr * tr - 4.0 * g.det()).sqrt();
        let l1 = 0.5 * (tr + disc);
        let (s1, s2) = m.singular_values();
        assert!((s1 * s1 - l1).abs() < 1e-13 * l1);
        assert!((s1 * s2 - m.det().abs()).abs() < 1e-15);
    }

    #[test]
    fn conorm_keeps_relative_accuracy_for_thin_matrices() {
        let m = Mat2::new(1.0, 1.0, 1.0, 1.0 + 1e-12);
        let (s1, s2) = m.singular_values();
        assert!((s1 * s2 / m.det() - 1.0).abs() < 1e-14);
        assert!(s2 > 0.0);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn adjugate_inverts_up_to_det() {
        let m = Mat2::new(1.5, -0.2, 0.7, 2.0);
        let p = m.adjugate() * m;
        let d = m.det();
        assert!((p.m[0][0] - d).abs() < 1e-15 && p.m[0][1].abs() < 1e-15);
        assert!((p.m[1][1] - d).abs() < 1e-15 && p.m[1][0].abs() < 1e-15);
    }
}
