//! Order-k hyperbolic coordinates.
//!
//! `e^(k)` is the most contracted and `f^(k)` the most expanded unit vector
//! of `DΦ^k_{ξ₀}`. Sign convention: `e_y > 0`, or `e_y = 0` and `e_x > 0`;
//! `f` is `e` rotated by `−π/2`.
//!
//! Angles use the `(sin θ, cos θ)` parametrization of unit vectors, so
//! `θ = 0` is the `y` axis and `θ = π/2` the `x` axis. The standard polar
//! angle of the same direction is `π/2 − θ`.

use crate::cocycle::{Cocycle, OrbitSegment, ScaledMatrix};
use crate::error::{Error, Result};
use crate::linalg::{ln0, Mat2, Vec2};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

/// Frames with co-eccentricity at or above `1 − EPS_CC` do not exist.
pub const EPS_CC: f64 = 1e-12;
/// Co-eccentricity above which a frame is flagged as low confidence.
pub const LOW_CONFIDENCE_COECC: f64 = 0.999;

/// Closed-form singular value decomposition of a scaled 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Svd2 {
    /// `ln σ_max`.
    pub sigma_max: f64,
    /// `ln σ_min`; `−∞` for a singular matrix.
    pub sigma_min: f64,
    pub f_dir: Vec2,
    pub e_dir: Vec2,
    /// Unit image direction of `f_dir`.
    pub u_max: Vec2,
    /// Unit image direction of `e_dir`.
    pub u_min: Vec2,
    pub singular: bool,
}

/// Two-rotation SVD `M = R(φ)·diag(Q + R, Q − R)·R(θ)` of an unscaled body,
/// with `|det|` supplied by the caller. Returns `(σ_max, σ_min, f, e, u_f, u_e)`
/// in linear scale with `M f = σ_max u_f` and `M e = ±σ_min u_e`, the sign
/// being that of `det`.
fn svd_body(m: &Mat2, abs_det: f64, det_sign: f64) -> (f64, f64, Vec2, Vec2, Vec2, Vec2) {
    let (e, f, g, h) = m.efgh();
    let q = e.hypot(h);
    let r = f.hypot(g);
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    let theta = 0.5 * (a2 - a1);
    let phi = 0.5 * (a2 + a1);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let smax = q + r;
    let smin = if smax > 0.0 { abs_det / smax } else { 0.0 };
    let f_dir = Vec2::new(ct, -st);
    let e_dir = Vec2::new(st, ct);
    let u_max = Vec2::new(cp, sp);
    let mut u_min = Vec2::new(-sp, cp);
    // M e = (Q − R)·u_min and sign(Q − R) = sign(det).
    if det_sign < 0.0 {
        u_min = -u_min;
    }
    (smax, smin, f_dir, e_dir, u_max, u_min)
}

fn svd_with_det(m: &ScaledMatrix, log_abs_det: f64, det_sign: f64) -> Result<Svd2> {
    if m.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let body_abs_det = if log_abs_det == f64::NEG_INFINITY {
        0.0
    } else {
        (log_abs_det - 2.0 * m.log_scale).exp()
    };
    let (smax, smin, f_dir, e_dir, u_max, u_min) = svd_body(&m.body, body_abs_det, det_sign);
    let singular = smin == 0.0;
    Ok(Svd2 {
        sigma_max: smax.ln() + m.log_scale,
        sigma_min: if singular { f64::NEG_INFINITY } else { log_abs_det - (smax.ln() + m.log_scale) },
        f_dir,
        e_dir,
        u_max,
        u_min,
        singular,
    })
}

/// SVD of a scaled matrix using its body determinant. A singular matrix
/// returns `Err(SingularMatrix)`; [`svd2_lenient`] returns the flagged result.
pub fn svd2(m: &ScaledMatrix) -> Result<Svd2> {
    let s = svd2_lenient(m)?;
    if s.singular {
        return Err(Error::SingularMatrix);
    }
    Ok(s)
}

/// As [`svd2`], but a singular matrix yields `sigma_min = −∞` and
/// `singular = true` instead of an error.
pub fn svd2_lenient(m: &ScaledMatrix) -> Result<Svd2> {
    let d = m.body.det();
    svd_with_det(m, ln0(d.abs()) + 2.0 * m.log_scale, d.signum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HyperbolicFrame {
    pub k: usize,
    pub e: Vec2,
    pub f: Vec2,
    /// `ln‖DΦ^k‖`.
    pub sigma_max: f64,
    /// `ln‖(DΦ^k)⁻¹‖⁻¹`.
    pub sigma_min: f64,
    /// `C_{ξ₀,k}`.
    pub coecc: f64,
    /// Angle of `f` in the `(sin θ, cos θ)` parametrization, in `[0, π)`.
    pub theta: f64,
    pub low_confidence: bool,
    /// Image direction `e^(k)_k / ‖e^(k)_k‖`, sign-matched to `e`.
    pub u_e: Vec2,
    /// Image direction `f^(k)_k / ‖f^(k)_k‖`, sign-matched to `f`.
    pub u_f: Vec2,
}

impl HyperbolicFrame {
    pub fn log_coecc(&self) -> f64 {
        self.sigma_min - self.sigma_max
    }

    /// This frame with `e` and `f` (and their images) negated.
    pub fn flipped(&self) -> HyperbolicFrame {
        HyperbolicFrame { e: -self.e, f: -self.f, u_e: -self.u_e, u_f: -self.u_f, ..*self }
    }

    /// Flips signs so that `e` has nonnegative dot product with `reference`.
    pub fn aligned_to(&self, reference: Vec2) -> HyperbolicFrame {
        if self.e.dot(reference) < 0.0 {
            self.flipped()
        } else {
            *self
        }
    }
}

/// `θ` in `[0, π)` with `v ∥ (sin θ, cos θ)`.
pub fn direction_angle(v: Vec2) -> f64 {
    let t = v.x.atan2(v.y);
    wrap_pi(t)
}

fn wrap_pi(t: f64) -> f64 {
    let r = t.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Distance between two angles modulo `π`.
pub fn angle_diff_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Frame of a cocycle at order `k`, using the accumulated determinant.
pub fn frame_of_cocycle(c: &Cocycle, k: usize) -> Result<HyperbolicFrame> {
    if k == 0 || k > c.len() {
        return Err(Error::IndexOutOfRange(format!("frame order {k} with orbit length {}", c.len())));
    }
    let s = svd_with_det(&c.prefix[k], c.prefix_log_abs_dets[k], c.prefix_det_signs[k])?;
    frame_from_svd(k, &s)
}

fn frame_from_svd(k: usize, s: &Svd2) -> Result<HyperbolicFrame> {
    let log_coecc = s.sigma_min - s.sigma_max;
    let coecc = log_coecc.exp();
    if coecc >= 1.0 - EPS_CC {
        return Err(Error::NoHyperbolicCoordinates { k, coecc });
    }
    let mut e = s.e_dir;
    let mut u_e = s.u_min;
    let mut u_f = s.u_max;
    if e.y < 0.0 || (e.y == 0.0 && e.x < 0.0) {
        e = -e;
        u_e = -u_e;
    }
    let f = e.rot_cw();
    if f.dot(s.f_dir) < 0.0 {
        u_f = -u_f;
    }
    Ok(HyperbolicFrame {
        k,
        e,
        f,
        sigma_max: s.sigma_max,
        sigma_min: s.sigma_min,
        coecc,
        theta: direction_angle(f),
        low_confidence: coecc > LOW_CONFIDENCE_COECC,
        u_e,
        u_f,
    })
}

/// Order-`k` hyperbolic coordinates at the start of `orbit`.
pub fn hyperbolic_coordinates(orbit: &OrbitSegment, k: usize) -> Result<HyperbolicFrame> {
    frame_of_cocycle(&orbit.cocycle, k)
}

/// Frame of a single matrix, as an order-1 frame.
pub fn frame_of_matrix(m: &Mat2) -> Result<HyperbolicFrame> {
    frame_of_cocycle(&Cocycle::from_steps(vec![*m]), 1)
}

/// The three expressions `|det|/‖M‖²`, `conorm²/|det|`, `conorm/‖M‖`.
///
/// They are evaluated along independent paths: the first uses the
/// two-rotation norm, the second the Gram-matrix eigenvalue, the third the
/// direct difference `|Q − R|` of the rotation split. The third loses
/// relative accuracy roughly like `ε / C` and is meant for moderate `C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coeccentricity {
    pub det_over_norm_sq: Option<f64>,
    pub conorm_sq_over_det: Option<f64>,
    pub conorm_over_norm: f64,
}

impl Coeccentricity {
    pub fn max_rel_spread(&self) -> f64 {
        let vals: Vec<f64> = [self.det_over_norm_sq, self.conorm_sq_over_det, Some(self.conorm_over_norm)]
            .into_iter()
            .flatten()
            .collect();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi == 0.0 {
            0.0
        } else {
            (hi - lo) / hi
        }
    }
}

/// Co-eccentricity of a matrix body with its determinant, three ways.
pub fn coeccentricity_of(body: &Mat2, det: f64) -> Result<Coeccentricity> {
    if body.max_abs() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let (e, f, g, h) = body.efgh();
    let q = e.hypot(h);
    let r = f.hypot(g);
    let third = (q - r).abs() / (q + r);
    if det == 0.0 {
        return Ok(Coeccentricity { det_over_norm_sq: None, conorm_sq_over_det: None, conorm_over_norm: third });
    }
    let ad = det.abs();
    let first = ad / ((q + r) * (q + r));
    let tr = {
        let [a, b, c, d] = body.entries();
        a * a + b * b + c * c + d * d
    };
    let disc = ((tr - 2.0 * ad) * (tr + 2.0 * ad)).max(0.0).sqrt();
    let lmax = 0.5 * (tr + disc);
    let lmin = ad * ad / lmax;
    let second = lmin / ad;
    Ok(Coeccentricity { det_over_norm_sq: Some(first), conorm_sq_over_det: Some(second), conorm_over_norm: third })
}

/// Co-eccentricity `C_{ξ₀,k}` three ways, with the determinant taken from
/// the accumulated step determinants.
pub fn coeccentricity(orbit: &OrbitSegment, k: usize) -> Result<Coeccentricity> {
    let c = &orbit.cocycle;
    if k == 0 || k > c.len() {
        return Err(Error::IndexOutOfRange(format!("order {k}")));
    }
    let m = &c.prefix[k];
    let det = if c.prefix_log_abs_dets[k] == f64::NEG_INFINITY {
        0.0
    } else {
        c.prefix_det_signs[k] * (c.prefix_log_abs_dets[k] - 2.0 * m.log_scale).exp()
    };
    let r = coeccentricity_of(&m.body, det)?;
    if r.det_over_norm_sq.is_none() {
        return Err(Error::SingularMatrix);
    }
    Ok(r)
}

/// The two critical angles of `θ ↦ ‖M (sin θ, cos θ)‖` from the partials of
/// `Φ^k`, as `(θ_expand, θ_contract)` in `[0, π)`.
///
/// With `X = ∂_x Φ^k`, `Y = ∂_y Φ^k`, `num = 2⟨X, Y⟩` and
/// `den = |X|² − |Y|²`, the squared norm is
/// `(|X|² + |Y|²)/2 − (den/2) cos 2θ + (num/2) sin 2θ`, maximized at
/// `2θ = atan2(num, −den)`. Equivalently `tan 2θ = −num/den` in this
/// parametrization; the unsigned ratio `num/den` gives the critical angles
/// of the `(cos θ, sin θ)` parametrization.
pub fn angle_theta(dx_phi1: f64, dx_phi2: f64, dy_phi1: f64, dy_phi2: f64) -> Result<(f64, f64)> {
    let x = Vec2::new(dx_phi1, dx_phi2);
    let y = Vec2::new(dy_phi1, dy_phi2);
    let num = 2.0 * x.dot(y);
    let den = x.dot(x) - y.dot(y);
    let scale = x.dot(x) + y.dot(y);
    if num.abs() <= 1e-14 * scale && den.abs() <= 1e-14 * scale {
        return Err(Error::ConformalDegenerate);
    }
    let expand = wrap_pi(0.5 * num.atan2(-den));
    let contract = wrap_pi(expand + FRAC_PI_2);
    Ok((expand, contract))
}

/// [`angle_theta`] applied to the columns of a matrix.
pub fn angle_theta_of(m: &Mat2) -> Result<(f64, f64)> {
    angle_theta(m.m[0][0], m.m[1][0], m.m[0][1], m.m[1][1])
}

/// Uniform angular grid on `[0, π)` with cached `(sin, cos)` samples.
pub struct OracleGrid {
    samples: Vec<(f64, f64)>,
}

impl OracleGrid {
    pub fn new(n: usize) -> Self {
        let n = n.max(4);
        let step = PI / n as f64;
        Self { samples: (0..n).map(|i| (i as f64 * step).sin_cos()).collect() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Brute-force extremal directions of `θ ↦ ‖M (sin θ, cos θ)‖`.
    pub fn extremal_directions(&self, m: &ScaledMatrix) -> OracleResult {
        let x = m.body.col(0);
        let y = m.body.col(1);
        let (xx, xy, yy) = (x.dot(x), x.dot(y), y.dot(y));
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut worst = (f64::INFINITY, 0usize);
        for (i, &(s, c)) in self.samples.iter().enumerate() {
            let q = s * s * xx + 2.0 * s * c * xy + c * c * yy;
            if q > best.0 {
                best = (q, i);
            }
            if q < worst.0 {
                worst = (q, i);
            }
        }
        let step = PI / self.samples.len() as f64;
        let log_max = 0.5 * ln0(best.0.max(0.0)) + m.log_scale;
        let log_min = 0.5 * ln0(worst.0.max(0.0)) + m.log_scale;
        OracleResult {
            theta_max: best.1 as f64 * step,
            theta_min: worst.1 as f64 * step,
            log_norm_max: log_max,
            log_norm_min: log_min,
            flat: best.0 - worst.0 <= 1e-12 * best.0,
            grid_n: self.samples.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub theta_max: f64,
    pub theta_min: f64,
    pub log_norm_max: f64,
    pub log_norm_min: f64,
    /// All sampled norms agree to 1e-12 relative (conformal matrix).
    pub flat: bool,
    pub grid_n: usize,
}

impl OracleResult {
    pub fn norm_max(&self) -> f64 {
        self.log_norm_max.exp()
    }
    pub fn norm_min(&self) -> f64 {
        self.log_norm_min.exp()
    }
}

/// One-off grid oracle; reuse an [`OracleGrid`] for sweeps.
pub fn oracle_extremal_directions(m: &ScaledMatrix, grid_n: usize) -> OracleResult {
    OracleGrid::new(grid_n).extremal_directions(m)
}

/// A vector `exp(log_scale)·body`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaledVec {
    pub body: Vec2,
    pub log_scale: f64,
}

impl ScaledVec {
    pub fn new(body: Vec2, log_scale: f64) -> Self {
        let n = body.norm();
        if n == 0.0 || !n.is_finite() {
            return Self { body, log_scale };
        }
        Self { body: body.scale(1.0 / n), log_scale: log_scale + n.ln() }
    }

    pub fn log_norm(&self) -> f64 {
        ln0(self.body.norm()) + self.log_scale
    }

    pub fn unit(&self) -> Vec2 {
        self.body.normalized()
    }

    pub fn to_vec(&self) -> Vec2 {
        self.body.scale(self.log_scale.exp())
    }
}

/// `(e^(k)_i, f^(k)_i)` for one index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pushforward {
    pub i: usize,
    pub e: ScaledVec,
    pub f: ScaledVec,
}

impl Pushforward {
    /// `|cos|` of the angle between `e_i` and `f_i`; 0 means orthogonal.
    pub fn orthogonality_residual(&self) -> f64 {
        self.e.unit().dot(self.f.unit()).abs()
    }
}

/// All pushforwards `DΦ^i e^(k)`, `DΦ^i f^(k)` for `0 ≤ i ≤ k`.
///
/// `f_i` is iterated forward. `e_i` is iterated backward from
/// `e_k = ±σ_min·u_e` through inverse step Jacobians, since forward
/// iteration of the contracted direction is swamped by rounding along the
/// expanded one.
pub fn pushforwards_of(c: &Cocycle, frame: &HyperbolicFrame) -> Result<Vec<Pushforward>> {
    let k = frame.k;
    let mut fs = Vec::with_capacity(k + 1);
    fs.push(ScaledVec::new(frame.f, 0.0));
    for i in 0..k {
        let prev = fs[i];
        fs.push(ScaledVec::new(c.steps[i] * prev.body, prev.log_scale));
    }
    let mut es = vec![ScaledVec::new(frame.e, 0.0); k + 1];
    es[k] = ScaledVec::new(frame.u_e, frame.sigma_min);
    for i in (1..k).rev() {
        let a = &c.steps[i];
        let d = a.det();
        if d == 0.0 {
            return Err(Error::ZeroDeterminant(i));
        }
        let next = es[i + 1];
        let body = a.adjugate().scale(d.signum()) * next.body;
        es[i] = ScaledVec::new(body, next.log_scale - c.step_log_abs_dets[i]);
    }
    Ok((0..=k).map(|i| Pushforward { i, e: es[i], f: fs[i] }).collect())
}

/// `(e^(k)_i, f^(k)_i)` for a single `i`.
pub fn pushforward_frames(orbit: &OrbitSegment, k: usize, i: usize) -> Result<Pushforward> {
    if i > k {
        return Err(Error::IndexOutOfRange(format!("pushforward index {i} > k = {k}")));
    }
    let frame = hyperbolic_coordinates(orbit, k)?;
    Ok(pushforwards_of(&orbit.cocycle, &frame)?[i])
}

/// Backward-iterated `e^(k)_0`, which should reproduce `e^(k)`.
pub fn backward_e0(c: &Cocycle, frame: &HyperbolicFrame) -> Result<ScaledVec> {
    let k = frame.k;
    let mut v = ScaledVec::new(frame.u_e, frame.sigma_min);
    for i in (0..k).rev() {
        let a = &c.steps[i];
        let d = a.det();
        if d == 0.0 {
            return Err(Error::ZeroDeterminant(i));
        }
        v = ScaledVec::new(a.adjugate().scale(d.signum()) * v.body, v.log_scale - c.step_log_abs_dets[i]);
    }
    Ok(v)
}

/// `ℒ^(k) = (DΦ^k)ᵀ DΦ^k` in scaled form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GramOperator {
    pub body: Mat2,
    pub log_scale: f64,
}

impl GramOperator {
    pub fn of(m: &ScaledMatrix) -> Self {
        Self { body: m.body.transpose() * m.body, log_scale: 2.0 * m.log_scale }
    }

    /// `|ℒ₁₂ − ℒ₂₁|` relative to `‖ℒ‖`.
    pub fn symmetry_residual(&self) -> f64 {
        (self.body.m[0][1] - self.body.m[1][0]).abs() / self.body.norm()
    }

    /// Smallest eigenvalue relative to the trace (≥ −1e-12 for PSD).
    pub fn min_eigen_over_trace(&self) -> f64 {
        let tr = self.body.trace();
        let det = self.body.det();
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let lmax = 0.5 * (tr + disc);
        let lmin = if lmax > 0.0 { det / lmax } else { 0.0 };
        lmin / tr
    }

    /// Residuals `‖ℒe − ‖e_k‖² e‖`, `‖ℒf − ‖f_k‖² f‖`, relative to `‖ℒ‖`.
    pub fn eigen_residuals(&self, frame: &HyperbolicFrame) -> (f64, f64) {
        let norm = self.body.norm();
        let s = -self.log_scale;
        let lam_e = (2.0 * frame.sigma_min + s).exp();
        let lam_f = (2.0 * frame.sigma_max + s).exp();
        let re = (self.body * frame.e - frame.e.scale(lam_e)).norm() / norm;
        let rf = (self.body * frame.f - frame.f.scale(lam_f)).norm() / norm;
        (re, rf)
    }
}

pub fn gram_operator(orbit: &OrbitSegment, k: usize) -> Result<GramOperator> {
    if k == 0 || k > orbit.k() {
        return Err(Error::IndexOutOfRange(format!("order {k}")));
    }
    Ok(GramOperator::of(&orbit.cocycle.prefix[k]))
}

/// Residuals of the diagonal form of `M` in the bases `{e, f}` and
/// `{u_e, u_f}`: `(max |off-diagonal|, max |diagonal − (σ_min, σ_max)|)`,
/// both relative to `σ_max`.
pub fn diagonal_form_residuals(m: &ScaledMatrix, frame: &HyperbolicFrame) -> (f64, f64) {
    let s = (frame.sigma_max - m.log_scale).exp();
    let me = m.body * frame.e;
    let mf = m.body * frame.f;
    let d_ee = frame.u_e.dot(me);
    let d_ff = frame.u_f.dot(mf);
    let off = frame.u_e.dot(mf).abs().max(frame.u_f.dot(me).abs());
    let smin = (frame.sigma_min - m.log_scale).exp();
    let diag = (d_ee - smin).abs().max((d_ff - s).abs());
    (off / s, diag / s)
}
