//! Norms of second derivatives and of bilinear maps in small dimension.
//!
//! For a bilinear `B : ℝⁿ × ℝⁿ → ℝⁿ` and an orthonormal basis `u_k`:
//! `max_k ‖B(v, u_k)‖ ≤ ‖B(v, ·)‖ ≤ √n max_k ‖B(v, u_k)‖` and
//! `max_k ‖B(·, u_k)‖ ≤ ‖B‖ ≤ √n max_k ‖B(·, u_k)‖`. For `D²Φ` the maps
//! `B(·, ∂_k)` are the second-partial matrices `∂_k DΦ`.

use crate::error::Result;
use crate::linalg::{Mat2, Vec2};
use crate::maps::MapSpec;
use crate::report::{BoundReport, InequalityCheck};
use rand::Rng;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

/// Angular resolution of the sampled bilinear norm in the plane.
pub const BILINEAR_GRID: usize = 720;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
    pub per_axis: [f64; 2],
}

/// `max_ς ‖∂_ς DΦ‖` and `√2` times it.
pub fn second_derivative_bracket(partials: &[Mat2; 2]) -> NormBracket {
    let per_axis = [partials[0].norm(), partials[1].norm()];
    let lower = per_axis[0].max(per_axis[1]);
    NormBracket { lower, upper: SQRT_2 * lower, per_axis }
}

/// `max_ς ‖(∂_ς DΦ) v‖` and `√2` times it.
pub fn second_derivative_v_bracket(partials: &[Mat2; 2], v: Vec2) -> NormBracket {
    let per_axis = [(partials[0] * v).norm(), (partials[1] * v).norm()];
    let lower = per_axis[0].max(per_axis[1]);
    NormBracket { lower, upper: SQRT_2 * lower, per_axis }
}

/// `D²Φ(v, ·)` as a matrix: column `k` is `(∂_k DΦ) v`.
pub fn d2_v_matrix(partials: &[Mat2; 2], v: Vec2) -> Mat2 {
    Mat2::from_cols(partials[0] * v, partials[1] * v)
}

/// `‖D²Φ(v, ·)‖`, exact through the closed-form 2×2 norm.
pub fn d2_v_norm(partials: &[Mat2; 2], v: Vec2) -> f64 {
    d2_v_matrix(partials, v).norm()
}

/// `max ‖D²Φ(u, w)‖` over a `grid × grid` sampling of unit `u, w` (angles
/// in `[0, π)`; sign symmetry covers the rest of the circle).
pub fn sampled_bilinear_norm(partials: &[Mat2; 2], grid: usize) -> f64 {
    let dirs: Vec<Vec2> = (0..grid)
        .map(|i| {
            let (s, c) = (i as f64 * PI / grid as f64).sin_cos();
            Vec2::new(c, s)
        })
        .collect();
    let mut best: f64 = 0.0;
    for &w in &dirs {
        let m = partials[0].scale(w.x) + partials[1].scale(w.y);
        for &u in &dirs {
            best = best.max((m * u).norm());
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecondDerivativeNorm {
    pub bracket: NormBracket,
    pub sampled: f64,
    /// Sampling resolution: the true norm is at most `sampled / cos²(π/2N)`.
    pub sampled_upper: f64,
    pub inside: bool,
    pub v_bracket: Option<NormBracket>,
    pub v_exact: Option<f64>,
}

/// Brackets `‖D²Φ_p‖` (and `‖D²Φ_p(v, ·)‖` when `v` is given) and checks
/// the sampled bilinear norm lies inside the bracket.
pub fn second_derivative_norm(spec: &MapSpec, p: Vec2, v: Option<Vec2>) -> Result<SecondDerivativeNorm> {
    let partials = spec.eval_second_derivative(p)?;
    let bracket = second_derivative_bracket(&partials);
    let sampled = sampled_bilinear_norm(&partials, BILINEAR_GRID);
    let c = (PI / (2.0 * BILINEAR_GRID as f64)).cos();
    let sampled_upper = sampled / (c * c);
    let slack = 1e-12 * bracket.upper;
    let inside = sampled <= bracket.upper + slack && sampled_upper >= bracket.lower - slack;
    let (v_bracket, v_exact) = match v {
        Some(v) => (Some(second_derivative_v_bracket(&partials, v)), Some(d2_v_norm(&partials, v))),
        None => (None, None),
    };
    Ok(SecondDerivativeNorm { bracket, sampled, sampled_upper, inside, v_bracket, v_exact })
}

/// Checks `D²Φ_p(v, ∂_k) = (∂_k DΦ_p) v` entrywise.
///
/// The left side is the coordinate expansion `Σ_i v^i ∂²Φ_m/∂x^i∂x^k` with
/// the mixed partials taken as central differences of the Jacobian in
/// direction `x^i` (exact up to rounding for maps of degree ≤ 3). The right
/// side uses the analytic `∂_k DΦ`, which differentiates in direction
/// `x^k`; agreement is the symmetry of second derivatives.
pub fn d2_contraction_identity(spec: &MapSpec, p: Vec2, v: Vec2, h: f64, tol: f64) -> Result<BoundReport> {
    let partials = spec.eval_second_derivative(p)?;
    let hx = Vec2::new(h, 0.0);
    let hy = Vec2::new(0.0, h);
    // hess_cols[i] = ∂_i DΦ by differences, so hess_cols[i][m][k] = ∂²Φ_m/∂x^i∂x^k.
    let hess_cols = [
        (spec.eval_jacobian(p + hx)? - spec.eval_jacobian(p - hx)?).scale(0.5 / h),
        (spec.eval_jacobian(p + hy)? - spec.eval_jacobian(p - hy)?).scale(0.5 / h),
    ];
    let vv = [v.x, v.y];
    let mut check = InequalityCheck::new("D²Φ(v,∂_k) = (∂_k DΦ)v", 0.0).with_abs_tolerance(tol);
    for k in 0..2 {
        let rhs = partials[k] * v;
        for m in 0..2 {
            let lhs: f64 = (0..2).map(|i| vv[i] * hess_cols[i].m[m][k]).sum();
            let r = if m == 0 { rhs.x } else { rhs.y };
            let scale = 1.0_f64.max(r.abs());
            check.push(Some(k), Some(m), (lhs - r).abs() / scale, 0.0);
        }
    }
    let mut rep = BoundReport::new(format!("{} at ({}, {})", spec.name, p.x, p.y));
    rep.add(check);
    Ok(rep)
}

/// Dense `rows × cols` matrix for the dimension-`n` lemmas.
#[derive(Clone, Debug, PartialEq)]
pub struct DMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c) * v[c]).sum()).collect()
    }

    pub fn tmul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|c| (0..self.rows).map(|r| self.get(r, c) * v[r]).sum()).collect()
    }

    pub fn column_norm(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self.get(r, c).powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_column_norm(&self) -> f64 {
        (0..self.cols).map(|c| self.column_norm(c)).fold(0.0, f64::max)
    }

    /// Spectral norm by power iteration on `AᵀA`, with the top right
    /// singular vector.
    pub fn norm_with_vector(&self) -> (f64, Vec<f64>) {
        let n = self.cols;
        if self.data.iter().all(|&x| x == 0.0) {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            return (0.0, v);
        }
        // Start from the largest column to avoid an orthogonal start.
        let start = (0..n).max_by(|&a, &b| self.column_norm(a).total_cmp(&self.column_norm(b))).unwrap();
        let mut v: Vec<f64> = (0..n).map(|i| if i == start { 1.0 } else { 0.1 }).collect();
        normalize(&mut v);
        let mut sigma = 0.0;
        for _ in 0..500 {
            let mut w = self.tmul_vec(&self.mul_vec(&v));
            let nw = norm(&w);
            if nw == 0.0 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= nw);
            let s_new = norm(&self.mul_vec(&w));
            let done = (s_new - sigma).abs() <= 1e-15 * s_new;
            v = w;
            sigma = s_new;
            if done {
                break;
            }
        }
        (sigma, v)
    }

    pub fn norm(&self) -> f64 {
        self.norm_with_vector().0
    }

    /// Largest `‖A v‖` over `samples` random unit vectors.
    pub fn sampled_norm<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        (0..samples)
            .map(|_| norm(&self.mul_vec(&random_unit(rng, self.cols))))
            .fold(0.0, f64::max)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// Uniform random unit vector from normalized Gaussian-like samples.
pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            v.iter_mut().for_each(|x| *x /= r);
            return v;
        }
    }
}

/// Bilinear map `ℝⁿ × ℝⁿ → ℝⁿ`, `B(u, w)_m = Σ_{ij} b[m][i][j] u_i w_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bilinear {
    pub n: usize,
    pub coeffs: Vec<f64>,
}

impl Bilinear {
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        Self { n, coeffs: (0..n * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect() }
    }

    fn c(&self, m: usize, i: usize, j: usize) -> f64 {
        self.coeffs[(m * self.n + i) * self.n + j]
    }

    pub fn apply(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|m| (0..n).map(|i| (0..n).map(|j| self.c(m, i, j) * u[i] * w[j]).sum::<f64>()).sum())
            .collect()
    }

    /// The matrix of `w ↦ B(u, w)`.
    pub fn with_first(&self, u: &[f64]) -> DMat {
        let n = self.n;
        let mut a = DMat::zeros(n, n);
        for m in 0..n {
            for j in 0..n {
                a.set(m, j, (0..n).map(|i| self.c(m, i, j) * u[i]).sum());
            }
        }
        a
    }

    /// The matrix of `u ↦ B(u, w)`.
    pub fn with_second(&self, w: &[f64]) -> DMat {
        let n = self.n;
        let mut a = DMat::zeros(n, n);
        for m in 0..n {
            for i in 0..n {
                a.set(m, i, (0..n).map(|j| self.c(m, i, j) * w[j]).sum());
            }
        }
        a
    }

    /// Estimate of `‖B‖ = max_{|u|=|w|=1} ‖B(u, w)‖`: random and basis
    /// starts, each refined by alternating maximization. Never exceeds the
    /// true norm.
    pub fn norm_estimate<R: Rng>(&self, rng: &mut R, starts: usize) -> f64 {
        let n = self.n;
        let mut inits: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                e
            })
            .collect();
        inits.extend((0..starts).map(|_| random_unit(rng, n)));
        let mut best: f64 = 0.0;
        for w0 in inits {
            let mut w = w0;
            let mut val: f64 = 0.0;
            for _ in 0..100 {
                let (_, u) = self.with_second(&w).norm_with_vector();
                let (s, w_new) = self.with_first(&u).norm_with_vector();
                let done = (s - val).abs() <= 1e-14 * s;
                val = s;
                w = w_new;
                if done {
                    break;
                }
            }
            best = best.max(val);
        }
        best
    }
}

pub const COLUMN_LOWER: &str = "max_k ‖a_k‖ ≤ ‖A‖";
pub const COLUMN_UPPER: &str = "‖A‖ ≤ √n max_k ‖a_k‖";
pub const SAMPLED_BELOW_POWER: &str = "sampled ‖A‖ ≤ ‖A‖";
pub const BILINEAR_V_LOWER: &str = "max_k ‖B(v,u_k)‖ ≤ ‖B(v,·)‖";
pub const BILINEAR_V_UPPER: &str = "‖B(v,·)‖ ≤ √n max_k ‖B(v,u_k)‖";
pub const BILINEAR_LOWER: &str = "max_k ‖B(·,u_k)‖ ≤ ‖B‖";
pub const BILINEAR_UPPER: &str = "‖B‖ ≤ √n max_k ‖B(·,u_k)‖";
const COLUMN_TOL: f64 = 1e-9;

fn unit_basis(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// The column lemma for one matrix. `‖A‖` comes from power iteration and
/// is cross-checked against the best of `samples` random unit vectors.
pub fn matrix_column_bounds<R: Rng>(a: &DMat, rng: &mut R, samples: usize) -> BoundReport {
    let mut rep = BoundReport::new("column bounds");
    let norm = a.norm();
    let col = a.max_column_norm();
    let sampled = a.sampled_norm(rng, samples);
    let root_n = (a.cols as f64).sqrt();
    for (name, lhs, rhs) in [
        (COLUMN_LOWER, col, norm),
        (COLUMN_UPPER, norm, root_n * col),
        (SAMPLED_BELOW_POWER, sampled, norm),
    ] {
        let mut ch = InequalityCheck::new(name, COLUMN_TOL);
        ch.push(None, None, lhs, rhs);
        rep.add(ch);
    }
    rep
}

/// Both bilinear brackets for `B` and the slice `B(v, ·)`, in the standard
/// basis. `‖B‖` is the alternating-maximization estimate, which never
/// exceeds the true norm, so the upper bracket is checked conservatively.
pub fn bilinear_column_bounds<R: Rng>(b: &Bilinear, v: &[f64], rng: &mut R, starts: usize) -> BoundReport {
    let n = b.n;
    let root_n = (n as f64).sqrt();
    let mut rep = BoundReport::new("bilinear column bounds");
    let slice_v = b.with_first(v).norm();
    let max_v = (0..n).map(|k| norm(&b.apply(v, &unit_basis(n, k)))).fold(0.0, f64::max);
    let max_slice = (0..n).map(|k| b.with_second(&unit_basis(n, k)).norm()).fold(0.0, f64::max);
    let full = b.norm_estimate(rng, starts);
    for (name, lhs, rhs) in [
        (BILINEAR_V_LOWER, max_v, slice_v),
        (BILINEAR_V_UPPER, slice_v, root_n * max_v),
        (BILINEAR_LOWER, max_slice, full),
        (BILINEAR_UPPER, full, root_n * max_slice),
    ] {
        let mut ch = InequalityCheck::new(name, COLUMN_TOL);
        ch.push(None, None, lhs, rhs);
        rep.add(ch);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_map_brackets_vanish() {
        let s = second_derivative_norm(&MapSpec::linear(Mat2::new(1.0, 2.0, 3.0, 4.0)), Vec2::new(0.1, 0.2), Some(Vec2::new(1.0, 0.0)))
            .unwrap();
        assert_eq!((s.bracket.lower, s.bracket.upper), (0.0, 0.0));
        assert_eq!(s.sampled, 0.0);
        assert!(s.inside);
    }

    #[test]
    fn henon_bracket_and_sampled_norm() {
        let a = 1.4;
        let s = second_derivative_norm(&MapSpec::henon(a, 0.3), Vec2::new(0.5, 0.1), None).unwrap();
        assert!((s.bracket.lower - 2.0 * a).abs() < 1e-15);
        assert!((s.bracket.upper / SQRT_2 - 2.0 * a).abs() < 1e-14);
        assert!((s.sampled - 2.0 * a).abs() < 1e-3);
        assert!(s.inside);
    }

    #[test]
    fn henon_contraction_identity() {
        let h = MapSpec::henon(1.4, 0.3);
        let p = second_derivative_v_bracket(&h.eval_second_derivative(Vec2::new(0.2, 0.0)).unwrap(), Vec2::new(1.0, 0.0));
        assert!((p.per_axis[0] - 2.8).abs() < 1e-15 && p.per_axis[1] == 0.0);
        let r = d2_contraction_identity(&h, Vec2::new(0.2, -0.1), Vec2::new(1.0, 0.0), 1e-3, 1e-10).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn column_lemma_examples() {
        let mut id = DMat::zeros(2, 2);
        id.set(0, 0, 1.0);
        id.set(1, 1, 1.0);
        assert!((id.norm() - 1.0).abs() < 1e-14 && id.max_column_norm() == 1.0);
        let mut a = DMat::zeros(2, 2);
        a.set(0, 0, 1.0);
        a.set(0, 1, 1.0);
        assert!((a.norm() - SQRT_2).abs() < 1e-14);
        assert!((a.max_column_norm() - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = matrix_column_bounds(&a, &mut rng, 64);
        assert!(rep.passed());
        let upper = &rep.check(COLUMN_UPPER).unwrap().rows[0];
        assert!((upper.lhs - upper.rhs).abs() < 1e-14);
    }

    #[test]
    fn bilinear_brackets_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=4 {
            let b = Bilinear::random(&mut rng, n);
            let v = random_unit(&mut rng, n);
            let rep = bilinear_column_bounds(&b, &v, &mut rng, 8);
            assert!(rep.passed(), "{n}: {:?}", rep.first_failure());
        }
    }

    #[test]
    fn bilinear_estimate_dominates_basis_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=4 {
            let b = Bilinear::random(&mut rng, n);
            let est = b.norm_estimate(&mut rng, 8);
            for k in 0..n {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                assert!(b.with_second(&e).norm() <= est * (1.0 + 1e-12));
            }
        }
    }
}
