//! Orbit segments and derivative cocycle products in scaled form.
//!
//! A [`ScaledMatrix`] stores `exp(log_scale)·body` with the largest body
//! entry renormalized into `[1/2, 1)` by an exact power of two after every
//! product. Determinants are never read off a long product: they are
//! accumulated as sums of per-step `ln|det|`, which keeps co-norms and
//! co-eccentricities accurate long after the product has become numerically
//! rank one.

use crate::error::{Error, Result};
use crate::linalg::{ln0, Mat2, Vec2};
use crate::maps::MapSpec;
use serde::Serialize;
use std::f64::consts::LN_2;

/// Mantissa in `[0.5, 1)` and exponent with `x = m·2^e`.
pub(crate) fn frexp(x: f64) -> (f64, i32) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !(0x7ff_u64 << 52)) | (1022_u64 << 52));
    (m, exp - 1022)
}

/// `x·2^e` without intermediate overflow of the power.
pub(crate) fn ldexp(x: f64, e: i32) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaledMatrix {
    pub body: Mat2,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub const IDENTITY: ScaledMatrix = ScaledMatrix { body: Mat2::IDENTITY, log_scale: 0.0 };

    pub fn new(body: Mat2, log_scale: f64) -> Self {
        Self { body, log_scale }.normalized()
    }

    pub fn from_mat(m: Mat2) -> Self {
        Self::new(m, 0.0)
    }

    fn normalized(self) -> Self {
        let mx = self.body.max_abs();
        if mx == 0.0 {
            return Self { body: Mat2::ZERO, log_scale: 0.0 };
        }
        let (_, e) = frexp(mx);
        let [a, b, c, d] = self.body.entries();
        Self {
            body: Mat2::new(ldexp(a, -e), ldexp(b, -e), ldexp(c, -e), ldexp(d, -e)),
            log_scale: self.log_scale + e as f64 * LN_2,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.body.max_abs() == 0.0
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &ScaledMatrix) -> ScaledMatrix {
        ScaledMatrix { body: self.body * rhs.body, log_scale: self.log_scale + rhs.log_scale }
            .normalized()
    }

    /// Left-multiplies by an unscaled matrix: `m · self`.
    pub fn premul(&self, m: &Mat2) -> ScaledMatrix {
        ScaledMatrix { body: *m * self.body, log_scale: self.log_scale }.normalized()
    }

    /// The represented matrix; overflows to `±∞` or flushes to 0 when the
    /// scale leaves the `f64` range.
    pub fn to_mat(&self) -> Mat2 {
        self.body.scale(self.log_scale.exp())
    }

    pub fn transpose(&self) -> ScaledMatrix {
        ScaledMatrix { body: self.body.transpose(), log_scale: self.log_scale }
    }

    pub fn log_norm(&self) -> f64 {
        ln0(self.body.norm()) + self.log_scale
    }

    /// `(log‖M‖, log conorm, log|det|, sign det)` using the body determinant.
    pub fn norm_conorm_det(&self) -> Result<NormConormDet> {
        if self.is_zero() {
            return Err(Error::ZeroMatrix);
        }
        let d = self.body.det();
        let log_abs_det = ln0(d.abs()) + 2.0 * self.log_scale;
        Ok(NormConormDet::from_parts(self.log_norm(), log_abs_det, d.signum()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormConormDet {
    pub log_norm: f64,
    pub log_conorm: f64,
    pub log_abs_det: f64,
    /// `+1` or `−1`; `0` for a singular matrix.
    pub det_sign: f64,
}

impl NormConormDet {
    fn from_parts(log_norm: f64, log_abs_det: f64, sign: f64) -> Self {
        let singular = log_abs_det == f64::NEG_INFINITY;
        Self {
            log_norm,
            log_conorm: if singular { f64::NEG_INFINITY } else { log_abs_det - log_norm },
            log_abs_det,
            det_sign: if singular { 0.0 } else { sign },
        }
    }
}

/// A finite sequence of step matrices `A_0, …, A_{k−1}` with prefix products
/// `A_{i−1}···A_0` and accumulated determinants.
#[derive(Clone, Debug, Serialize)]
pub struct Cocycle {
    pub steps: Vec<Mat2>,
    pub step_log_abs_dets: Vec<f64>,
    pub step_det_signs: Vec<f64>,
    /// `prefix[i]` represents `A_{i−1}···A_0`; `prefix[0]` is the identity.
    pub prefix: Vec<ScaledMatrix>,
    /// `ln|det prefix[i]|`, summed from the steps.
    pub prefix_log_abs_dets: Vec<f64>,
    pub prefix_det_signs: Vec<f64>,
}

impl Cocycle {
    pub fn from_steps(steps: Vec<Mat2>) -> Self {
        let k = steps.len();
        let mut prefix = Vec::with_capacity(k + 1);
        let mut pld = Vec::with_capacity(k + 1);
        let mut psign = Vec::with_capacity(k + 1);
        let mut sld = Vec::with_capacity(k);
        let mut ssign = Vec::with_capacity(k);
        prefix.push(ScaledMatrix::IDENTITY);
        pld.push(0.0);
        psign.push(1.0);
        for (i, s) in steps.iter().enumerate() {
            let d = s.det();
            sld.push(ln0(d.abs()));
            ssign.push(if d == 0.0 { 0.0 } else { d.signum() });
            prefix.push(prefix[i].premul(s));
            pld.push(pld[i] + sld[i]);
            psign.push(psign[i] * ssign[i]);
        }
        Self {
            steps,
            step_log_abs_dets: sld,
            step_det_signs: ssign,
            prefix,
            prefix_log_abs_dets: pld,
            prefix_det_signs: psign,
        }
    }

    /// Number of steps `k`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i > j || j > self.len() {
            return Err(Error::IndexOutOfRange(format!("block ({i}, {j}) with k = {}", self.len())));
        }
        Ok(())
    }

    /// `A_{j−1}···A_i`, the identity when `i = j`.
    pub fn block(&self, i: usize, j: usize) -> Result<ScaledMatrix> {
        self.check(i, j)?;
        if i == 0 {
            return Ok(self.prefix[j]);
        }
        Ok(self.steps[i..j].iter().fold(ScaledMatrix::IDENTITY, |acc, s| acc.premul(s)))
    }

    /// `ln|det(A_{j−1}···A_i)|`.
    pub fn block_log_abs_det(&self, i: usize, j: usize) -> f64 {
        self.step_log_abs_dets[i..j].iter().sum()
    }

    /// `ln‖DΦ^i‖`.
    pub fn log_norm(&self, i: usize) -> f64 {
        self.prefix[i].log_norm()
    }

    pub fn log_abs_det(&self, i: usize) -> f64 {
        self.prefix_log_abs_dets[i]
    }

    /// `ln‖(DΦ^i)⁻¹‖⁻¹` from the accumulated determinant.
    pub fn log_conorm(&self, i: usize) -> f64 {
        self.log_abs_det(i) - self.log_norm(i)
    }

    /// `ln C_{ξ₀,i} = ln|det| − 2 ln‖·‖`.
    pub fn log_coecc(&self, i: usize) -> f64 {
        self.log_abs_det(i) - 2.0 * self.log_norm(i)
    }

    /// `ln‖A_j‖`.
    pub fn step_log_norm(&self, j: usize) -> f64 {
        ln0(self.steps[j].norm())
    }

    /// `ln C_{ξ_j,1}`.
    pub fn step_log_coecc(&self, j: usize) -> f64 {
        self.step_log_abs_dets[j] - 2.0 * self.step_log_norm(j)
    }

    /// Full norm/co-norm/determinant triple of the prefix product.
    pub fn norm_conorm_det(&self, i: usize) -> NormConormDet {
        NormConormDet::from_parts(
            self.log_norm(i),
            self.prefix_log_abs_dets[i],
            self.prefix_det_signs[i],
        )
    }
}

/// Points `ξ₀…ξ_k` of an orbit with their derivative data.
#[derive(Clone, Debug)]
pub struct OrbitSegment {
    pub spec: MapSpec,
    pub points: Vec<Vec2>,
    pub cocycle: Cocycle,
    pub step_second_partials: Vec<[Mat2; 2]>,
}

impl OrbitSegment {
    pub fn k(&self) -> usize {
        self.cocycle.len()
    }

    pub fn step_jacobians(&self) -> &[Mat2] {
        &self.cocycle.steps
    }

    pub fn cocycle_block(&self, i: usize, j: usize) -> Result<ScaledMatrix> {
        self.cocycle.block(i, j)
    }

    /// The first `k` steps of this orbit.
    pub fn truncated(&self, k: usize) -> OrbitSegment {
        let k = k.min(self.k());
        OrbitSegment {
            spec: self.spec.clone(),
            points: self.points[..=k].to_vec(),
            cocycle: Cocycle::from_steps(self.cocycle.steps[..k].to_vec()),
            step_second_partials: self.step_second_partials[..k].to_vec(),
        }
    }
}

/// Iterates `spec` from `xi0` for `k` steps, keeping every `ξ_i` (including
/// `ξ_k`) at least `guard` away from the singular set.
pub fn compute_orbit(spec: &MapSpec, xi0: Vec2, k: usize, guard: f64) -> Result<OrbitSegment> {
    if k == 0 {
        return Err(Error::IndexOutOfRange("orbit order must be at least 1".into()));
    }
    let raw = spec.raw();
    let mut points = Vec::with_capacity(k + 1);
    let mut steps = Vec::with_capacity(k);
    let mut seconds = Vec::with_capacity(k);
    let mut p = xi0;
    for i in 0..=k {
        if !raw.in_domain(p) {
            return Err(if i == 0 { Error::OutsideDomain(p.x, p.y) } else { Error::OrbitEscaped(i) });
        }
        let d = raw.singular_distance(p);
        if d == 0.0 || d < guard {
            return Err(Error::SingularEncounter(i));
        }
        points.push(p);
        if i < k {
            steps.push(raw.jacobian(p));
            seconds.push(raw.second_partials(p));
            p = raw.eval(p);
        }
    }
    Ok(OrbitSegment {
        spec: spec.clone(),
        points,
        cocycle: Cocycle::from_steps(steps),
        step_second_partials: seconds,
    })
}

/// Same as [`compute_orbit`] with the map's default guard.
pub fn orbit(spec: &MapSpec, xi0: Vec2, k: usize) -> Result<OrbitSegment> {
    compute_orbit(spec, xi0, k, spec.default_guard)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn frexp_ranges() {
        for &x in &[1.0, 0.5, 3.0, 1e-310, 7e300, -0.75] {
            let (m, e) = frexp(x);
            assert!((0.5..1.0).contains(&m.abs()), "{x}");
            assert_eq!(ldexp(m, e), x);
        }
    }

    #[test]
    fn scaled_body_invariant() {
        let s = ScaledMatrix::from_mat(Mat2::new(1e200, 3.0, -2e199, 0.0));
        let mx = s.body.max_abs();
        assert!((0.5..=2.0).contains(&mx));
        let z = ScaledMatrix::from_mat(Mat2::ZERO);
        assert_eq!(z.body, Mat2::ZERO);
        assert_eq!(z.log_scale, 0.0);
    }

    #[test]
    fn diagonal_powers() {
        let spec = MapSpec::linear(Mat2::diag(2.0, 0.5));
        let o = compute_orbit(&spec, Vec2::new(1.0, 1.0), 3, 0.0).unwrap();
        let m = o.cocycle.prefix[3].to_mat();
        assert!(close(m.m[0][0], 8.0, 1e-15) && close(m.m[1][1], 0.125, 1e-15));
        assert_eq!(m.m[0][1], 0.0);
    }

    #[test]
    fn henon_two_step_cocycle() {
        let spec = MapSpec::henon(1.4, 0.3);
        let o = compute_orbit(&spec, Vec2::new(0.0, 0.0), 2, 0.0).unwrap();
        assert_eq!(o.points[1], Vec2::new(1.0, 0.0));
        assert!((o.points[2].x + 0.4).abs() < 1e-15 && (o.points[2].y - 0.3).abs() < 1e-15);
        let m = o.cocycle.prefix[2].to_mat();
        let want = Mat2::new(0.3, -2.8, 0.0, 0.3);
        assert!((m - want).max_abs() < 1e-14, "{m:?}");
    }

    #[test]
    fn anti_diagonal_norm_conorm_det() {
        let n = ScaledMatrix::from_mat(Mat2::new(0.0, 1.0, 0.3, 0.0)).norm_conorm_det().unwrap();
        assert!(n.log_norm.abs() < 1e-15);
        assert!((n.log_conorm - 0.3f64.ln()).abs() < 1e-14);
        assert!((n.log_abs_det - 0.3f64.ln()).abs() < 1e-14);
        assert_eq!(n.det_sign, -1.0);
    }

    #[test]
    fn rotation_is_isometry() {
        let n = ScaledMatrix::from_mat(Mat2::rotation(1.1)).norm_conorm_det().unwrap();
        assert!(n.log_norm.abs() < 1e-15 && n.log_conorm.abs() < 1e-15 && n.log_abs_det.abs() < 1e-15);
        assert_eq!(n.det_sign, 1.0);
    }

    #[test]
    fn zero_and_singular() {
        assert_eq!(ScaledMatrix::from_mat(Mat2::ZERO).norm_conorm_det(), Err(Error::ZeroMatrix));
        let s = ScaledMatrix::from_mat(Mat2::new(1.0, 2.0, 2.0, 4.0)).norm_conorm_det().unwrap();
        assert_eq!(s.log_conorm, f64::NEG_INFINITY);
        assert_eq!(s.det_sign, 0.0);
    }

    #[test]
    fn blocks_match_direct_products() {
        let spec = MapSpec::henon(1.4, 0.3);
        let o = compute_orbit(&spec, Vec2::new(0.1, 0.05), 8, 0.0).unwrap();
        let id = o.cocycle_block(4, 4).unwrap();
        assert_eq!(id, ScaledMatrix::IDENTITY);
        assert_eq!(o.cocycle_block(0, 8).unwrap(), o.cocycle.prefix[8]);
        let direct = o.step_jacobians()[2..5].iter().fold(Mat2::IDENTITY, |acc, s| *s * acc);
        let blk = o.cocycle_block(2, 5).unwrap().to_mat();
        assert!((blk - direct).max_abs() <= 1e-12 * direct.max_abs());
        assert!(o.cocycle_block(5, 2).is_err());
        assert!(o.cocycle_block(0, 9).is_err());
    }

    #[test]
    fn singular_encounter_on_lorenz() {
        let p = crate::maps::Lorenz2d::default();
        let spec = MapSpec::lorenz2d(p);
        let y0 = 0.2;
        let x0 = p.zero_of_first_component(y0);
        let x1 = spec.eval_map(Vec2::new(x0, y0)).unwrap().x;
        assert!(x1.abs() < 1e-12);
        let err = compute_orbit(&spec, Vec2::new(x0, y0), 5, 1e-8).unwrap_err();
        assert_eq!(err, Error::SingularEncounter(1));
    }

    #[test]
    fn escape_is_reported() {
        let spec = MapSpec::henon(1.4, 0.3);
        let err = compute_orbit(&spec, Vec2::new(10.0, 0.0), 20, 0.0).unwrap_err();
        assert!(matches!(err, Error::OrbitEscaped(_)));
    }
}
