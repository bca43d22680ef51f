//! Slow variation of the frame field: the terms `𝔈_i`, `𝔉_i`, a
//! finite-difference estimate of `Df^(k)`, an exact chain-rule oracle for
//! `⟨e, ∂_ς f⟩`, and the inequality chain bounding `‖De^(k)‖`.

use super::norms::{d2_v_norm, second_derivative_v_bracket};
use crate::certificate::{check_quasi_hyperbolic, AuxiliaryConstants, ConstantsLedger};
use crate::cocycle::{compute_orbit, Cocycle, OrbitSegment};
use crate::error::{Error, Result};
use crate::frame::{frame_of_cocycle, hyperbolic_coordinates, pushforwards_of, HyperbolicFrame, LOW_CONFIDENCE_COECC};
use crate::linalg::{ln0, log_sum_exp, Mat2, Vec2};
use crate::maps::MapSpec;
use crate::report::{BoundReport, InequalityCheck};
use serde::Serialize;
use std::f64::consts::SQRT_2;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Floor of the additive allowance granted to finite-difference left sides.
pub const FD_TOL_FLOOR: f64 = 1e-6;
/// Below this `|dot|` a neighbor frame cannot be sign-aligned reliably.
pub const FLIP_AMBIGUITY: f64 = 0.1;
pub const RICHARDSON_MAX_REL: f64 = 0.05;
pub const ORTHOGONAL_COMPONENT_MAX: f64 = 1e-6;
const SLOW_TOL: f64 = 1e-9;

pub const CHAIN_A: &str = "‖De^(k)‖ ≤ K₁‖D²Φ(e^(1),·)‖ + K₂c";
pub const CHAIN_A_EXACT: &str = "‖De^(k)‖ (chain rule) ≤ K₁‖D²Φ(e^(1),·)‖ + K₂c";
pub const CHAIN_B: &str = "‖D²Φ(e^(1),·)‖ ≤ √2 max_ς‖(∂_ςDΦ)e^(1)‖";
pub const APOSTERIORI: &str = "√2 max_ς|⟨e,∂_ςf⟩| ≤ K₁(𝔈₀ + Σ𝔈_i + C_k²Σ𝔉_i)";
pub const APRIORI_VAR: &str = "‖Df^(k)‖ ≤ A_k𝔈₀ + A_kΣ𝔈_i + B_kΣ𝔉_i";
pub const DF_MAX: &str = "‖Df^(k)‖ ≤ √2 max_ς|⟨e,∂_ςf⟩|";
pub const F_COMPONENT: &str = "|⟨f,∂_ςf⟩| ≤ 1e-6";
pub const RICHARDSON: &str = "|‖Df‖_h − ‖Df‖_{h/2}| ≤ 5%·‖Df‖_{h/2}";
pub const A_K1: &str = "A_k ≤ K₁";
pub const B_K1: &str = "B_k ≤ C_k²K₁";
pub const E0_I: &str = "𝔈₀ ≤ ‖D²Φ(e^(1),·)‖ + Q₃c";
pub const ESUM_I: &str = "Σ_{i≥1}𝔈_i ≤ Q₄c";
pub const E0_II: &str = "𝔈₀ ≤ ‖D²Φ(e^(1),·)‖ + Q̃₃c/c̃";
pub const ESUM_II: &str = "Σ_{i≥1}𝔈_i ≤ Q̃₄c/c̃";
pub const FSUM: &str = "C_k²Σ𝔉_i ≤ Qc";

const AXES: [&str; 2] = ["x", "y"];

/// The terms of the a-priori slow-variation bound for one axis `ς`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlowVariationTerms {
    pub k: usize,
    pub axis: usize,
    /// `C_{ξ₀,k} = ‖e_k‖/‖f_k‖`.
    pub coecc: f64,
    pub a_k: f64,
    pub b_k: f64,
    /// `𝔈^(k)_i` for `0 ≤ i < k`.
    pub ee: Vec<f64>,
    /// `𝔉^(k)_i` for `0 ≤ i < k`.
    pub ff: Vec<f64>,
    pub log_ee: Vec<f64>,
    pub log_ff: Vec<f64>,
    pub rhs_apriori: f64,
}

impl SlowVariationTerms {
    pub fn e0(&self) -> f64 {
        self.ee[0]
    }

    /// `Σ_{i≥1} 𝔈_i`.
    pub fn e_tail(&self) -> f64 {
        log_sum_exp(self.log_ee[1..].iter().copied()).exp()
    }

    /// `Σ_{i≥0} 𝔉_i`.
    pub fn f_sum(&self) -> f64 {
        log_sum_exp(self.log_ff.iter().copied()).exp()
    }

    /// `C_k² Σ 𝔉_i`, assembled in logs.
    pub fn weighted_f_sum(&self) -> f64 {
        (2.0 * self.coecc.ln() + log_sum_exp(self.log_ff.iter().copied())).exp()
    }

    /// `𝔈₀ + Σ𝔈_i + C_k²Σ𝔉_i`.
    pub fn aposteriori_bracket(&self) -> f64 {
        self.e0() + self.e_tail() + self.weighted_f_sum()
    }
}

/// `𝔈_i = ‖(∂_ςDΦ_{ξ_i}) e_i‖‖e_{i+1}‖/|det DΦ^{i+1}|` and the matching
/// `𝔉_i`, with `∂_ς` the partial in the coordinates at `ξ_i`.
pub fn slow_variation_terms(orbit: &OrbitSegment, k: usize, axis: usize) -> Result<SlowVariationTerms> {
    if axis > 1 {
        return Err(Error::IndexOutOfRange(format!("axis {axis}")));
    }
    let co = &orbit.cocycle;
    let frame = hyperbolic_coordinates(orbit, k)?;
    if let Some(j) = (0..k).find(|&j| co.step_log_abs_dets[j] == f64::NEG_INFINITY) {
        return Err(Error::ZeroDeterminant(j));
    }
    let push = pushforwards_of(co, &frame)?;
    let mut log_ee = Vec::with_capacity(k);
    let mut log_ff = Vec::with_capacity(k);
    for i in 0..k {
        let p = orbit.step_second_partials[i][axis];
        let ldet = co.prefix_log_abs_dets[i + 1];
        let (e, f) = (push[i].e, push[i].f);
        log_ee.push(ln0((p * e.body).norm()) + e.log_scale + push[i + 1].e.log_norm() - ldet);
        log_ff.push(ln0((p * f.body).norm()) + f.log_scale + push[i + 1].f.log_norm() - ldet);
    }
    let c2 = frame.coecc * frame.coecc;
    let a_k = SQRT_2 / (1.0 - c2);
    let b_k = SQRT_2 * c2 / (1.0 - c2);
    let rhs_apriori = (a_k.ln() + log_sum_exp(log_ee.iter().copied())).exp()
        + (b_k.ln() + log_sum_exp(log_ff.iter().copied())).exp();
    Ok(SlowVariationTerms {
        k,
        axis,
        coecc: frame.coecc,
        a_k,
        b_k,
        ee: log_ee.iter().map(|v| v.exp()).collect(),
        ff: log_ff.iter().map(|v| v.exp()).collect(),
        log_ee,
        log_ff,
        rhs_apriori,
    })
}

/// Central-difference estimate of `Df^(k)` at `base`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameDerivativeEstimate {
    pub k: usize,
    pub base: Vec2,
    pub h: f64,
    pub e: Vec2,
    pub f: Vec2,
    /// Columns `∂_x f`, `∂_y f`.
    pub df: Mat2,
    pub norm: f64,
    /// `⟨e, ∂_ς f⟩` for `ς = x, y`.
    pub inner_e: [f64; 2],
    /// `⟨f, ∂_ς f⟩`, which vanishes for the exact derivative.
    pub inner_f: [f64; 2],
}

fn stencil_frame(spec: &MapSpec, p: Vec2, k: usize) -> Result<HyperbolicFrame> {
    let what = |e: Error| Error::StencilDegenerate(format!("({}, {}): {e}", p.x, p.y));
    let o = compute_orbit(spec, p, k, spec.default_guard).map_err(what)?;
    let fr = frame_of_cocycle(&o.cocycle, k).map_err(what)?;
    if fr.coecc >= LOW_CONFIDENCE_COECC {
        return Err(Error::StencilDegenerate(format!("({}, {}): co-eccentricity {}", p.x, p.y, fr.coecc)));
    }
    Ok(fr)
}

/// `f^(k)` at `p`, flipped to agree with `center`.
fn aligned_f(spec: &MapSpec, p: Vec2, k: usize, center: Vec2) -> Result<Vec2> {
    let f = stencil_frame(spec, p, k)?.f;
    let d = f.dot(center);
    if d.abs() < FLIP_AMBIGUITY {
        return Err(Error::FrameFlipUnresolvable(d.abs()));
    }
    Ok(if d < 0.0 { -f } else { f })
}

pub fn frame_derivative_fd(spec: &MapSpec, xi0: Vec2, k: usize, h: f64) -> Result<FrameDerivativeEstimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::BadParameter(format!("finite-difference step {h}")));
    }
    let center = stencil_frame(spec, xi0, k)?;
    let mut cols = [Vec2::new(0.0, 0.0); 2];
    for (axis, col) in cols.iter_mut().enumerate() {
        let d = if axis == 0 { Vec2::new(h, 0.0) } else { Vec2::new(0.0, h) };
        let plus = aligned_f(spec, xi0 + d, k, center.f)?;
        let minus = aligned_f(spec, xi0 - d, k, center.f)?;
        *col = (plus - minus).scale(0.5 / h);
    }
    let df = Mat2::from_cols(cols[0], cols[1]);
    Ok(FrameDerivativeEstimate {
        k,
        base: xi0,
        h,
        e: center.e,
        f: center.f,
        df,
        norm: df.norm(),
        inner_e: [center.e.dot(cols[0]), center.e.dot(cols[1])],
        inner_f: [center.f.dot(cols[0]), center.f.dot(cols[1])],
    })
}

/// Estimates at `h` and `h/2` with the resulting tolerance budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RichardsonPair {
    pub coarse: FrameDerivativeEstimate,
    pub fine: FrameDerivativeEstimate,
    /// `‖Df‖_h − ‖Df‖_{h/2}`.
    pub delta: f64,
    /// `max(1e-6, 2|delta|)`.
    pub fd_tol: f64,
}

impl RichardsonPair {
    pub fn rel_change(&self) -> f64 {
        if self.fine.norm == 0.0 {
            if self.delta == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.delta.abs() / self.fine.norm
        }
    }
}

pub fn frame_derivative_richardson(spec: &MapSpec, xi0: Vec2, k: usize, h: f64) -> Result<RichardsonPair> {
    let coarse = frame_derivative_fd(spec, xi0, k, h)?;
    let fine = frame_derivative_fd(spec, xi0, k, 0.5 * h)?;
    let delta = coarse.norm - fine.norm;
    Ok(RichardsonPair { coarse, fine, delta, fd_tol: FD_TOL_FLOOR.max(2.0 * delta.abs()) })
}

/// `(∂_ς DΦ^k) v / ‖DΦ^k‖` via the chain rule
/// `∂_ς(DΦ^k) = Σ_i DΦ^{k−i−1}_{ξ_{i+1}} (Σ_m (DΦ^i ∂_ς)_m ∂_m DΦ_{ξ_i}) DΦ^i`.
fn scaled_dm_v(c: &Cocycle, seconds: &[[Mat2; 2]], k: usize, axis: usize, v: Vec2, log_top: f64) -> Result<Vec2> {
    let mut acc = Vec2::new(0.0, 0.0);
    for i in 0..k {
        let pre = c.prefix[i];
        let col = pre.body.col(axis);
        let p = seconds[i][0].scale(col.x) + seconds[i][1].scale(col.y);
        let w = p * (pre.body * v);
        let post = c.block(i + 1, k)?;
        let term = post.body * w;
        acc = acc + term.scale((2.0 * pre.log_scale + post.log_scale - log_top).exp());
    }
    Ok(acc)
}

/// Exact `⟨e^(k), ∂_ς f^(k)⟩ = ⟨e, (∂_ςℒ) f⟩/(‖f_k‖² − ‖e_k‖²)` for both axes.
pub fn frame_derivative_exact(orbit: &OrbitSegment, k: usize) -> Result<[f64; 2]> {
    let co = &orbit.cocycle;
    let fr = hyperbolic_coordinates(orbit, k)?;
    let cc = fr.coecc;
    let mut out = [0.0; 2];
    for (axis, slot) in out.iter_mut().enumerate() {
        let dme = scaled_dm_v(co, &orbit.step_second_partials, k, axis, fr.e, fr.sigma_max)?;
        let dmf = scaled_dm_v(co, &orbit.step_second_partials, k, axis, fr.f, fr.sigma_max)?;
        // ⟨∂M e, M f⟩ + ⟨M e, ∂M f⟩ over σ_max², with M f = σ_max u_f, M e = σ_min u_e.
        let num = dme.dot(fr.u_f) + cc * fr.u_e.dot(dmf);
        *slot = num / (1.0 - cc * cc);
    }
    Ok(out)
}

/// Verifies the slow-variation chain at the orbit's order `k`.
pub fn verify_slow_variation(
    orbit: &OrbitSegment,
    ledger: &ConstantsLedger,
    aux: &AuxiliaryConstants,
    h: f64,
) -> Result<BoundReport> {
    let cert = check_quasi_hyperbolic(orbit, ledger);
    if !cert.verdict {
        let why = cert.first_failure().unwrap_or_else(|| "certificate fails".into());
        return Err(Error::CertificateRequired(why));
    }
    let k = orbit.k();
    let xi0 = orbit.points[0];
    let l = ledger;
    let frame1 = hyperbolic_coordinates(orbit, 1)?;
    let partials0 = &orbit.step_second_partials[0];
    let d2e1 = d2_v_norm(partials0, frame1.e);
    let terms = [slow_variation_terms(orbit, k, 0)?, slow_variation_terms(orbit, k, 1)?];
    let fd = frame_derivative_richardson(&orbit.spec, xi0, k, h)?;
    let est = &fd.coarse;
    let exact = frame_derivative_exact(orbit, k)?;
    let ks = Some(k);

    let mut rep = BoundReport::new(format!("{} slow variation (k = {k}, {})", orbit.spec.name, l.flavor));
    let mut one = |name: String, tol: f64, abs: f64, lhs: f64, rhs: f64| {
        let mut ch = InequalityCheck::new(name, tol).with_abs_tolerance(abs);
        ch.push(None, ks, lhs, rhs);
        rep.add(ch);
    };
    let theorem_rhs = aux.k1 * d2e1 + aux.k2 * l.c;
    one(CHAIN_A.into(), SLOW_TOL, fd.fd_tol, est.norm, theorem_rhs);
    one(CHAIN_A_EXACT.into(), SLOW_TOL, 0.0, exact[0].hypot(exact[1]), theorem_rhs);
    let bracket = second_derivative_v_bracket(partials0, frame1.e);
    one(CHAIN_B.into(), 1e-12, 0.0, d2e1, bracket.upper);
    let inner_max = est.inner_e[0].abs().max(est.inner_e[1].abs());
    let post_max = terms[0].aposteriori_bracket().max(terms[1].aposteriori_bracket());
    one(APOSTERIORI.into(), SLOW_TOL, fd.fd_tol, SQRT_2 * inner_max, aux.k1 * post_max);
    let prior_max = terms[0].rhs_apriori.max(terms[1].rhs_apriori);
    one(APRIORI_VAR.into(), SLOW_TOL, fd.fd_tol, est.norm, prior_max);
    one(DF_MAX.into(), SLOW_TOL, fd.fd_tol, est.norm, SQRT_2 * inner_max);
    let f_comp = est.inner_f[0].abs().max(est.inner_f[1].abs());
    one(F_COMPONENT.into(), 0.0, 0.0, f_comp, ORTHOGONAL_COMPONENT_MAX);
    one(RICHARDSON.into(), 0.0, 1e-9, fd.delta.abs(), RICHARDSON_MAX_REL * fd.fine.norm);
    let c2 = terms[0].coecc * terms[0].coecc;
    one(A_K1.into(), SLOW_TOL, 0.0, terms[0].a_k, aux.k1);
    one(B_K1.into(), SLOW_TOL, 0.0, terms[0].b_k, c2 * aux.k1);

    for t in &terms {
        let tag = |s: &str| format!("{s} [ς={}]", AXES[t.axis]);
        if let (true, Some(q3), Some(q4)) = (l.flavor.has_i(), aux.q3, aux.q4) {
            one(tag(E0_I), SLOW_TOL, 0.0, t.e0(), d2e1 + q3 * l.c);
            one(tag(ESUM_I), SLOW_TOL, 0.0, t.e_tail(), q4 * l.c);
        }
        if let (true, Some(q3), Some(q4)) = (l.flavor.has_ii(), aux.qt3, aux.qt4) {
            let r = l.c / l.c_tilde;
            one(tag(E0_II), SLOW_TOL, 0.0, t.e0(), d2e1 + q3 * r);
            one(tag(ESUM_II), SLOW_TOL, 0.0, t.e_tail(), q4 * r);
        }
        one(tag(FSUM), SLOW_TOL, 0.0, t.weighted_f_sum(), aux.q * l.c);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{auxiliary_constants, fit_constants, Flavor};
    use crate::cocycle::orbit;
    use crate::fixtures;
    use crate::frame::angle_theta_of;

    #[test]
    fn linear_map_has_no_variation() {
        let spec = MapSpec::linear(Mat2::diag(2.0, 0.5));
        let o = orbit(&spec, Vec2::new(0.2, 0.1), 6).unwrap();
        let t = slow_variation_terms(&o, 6, 0).unwrap();
        assert!(t.ee.iter().chain(&t.ff).all(|&v| v == 0.0));
        assert_eq!(t.rhs_apriori, 0.0);
        let fd = frame_derivative_fd(&spec, Vec2::new(0.2, 0.1), 6, 1e-5).unwrap();
        assert!(fd.norm <= 1e-9);
        assert_eq!(frame_derivative_exact(&o, 6).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn a_k_and_b_k_identities() {
        let o = orbit(&fixtures::henon(), fixtures::henon_point(), 8).unwrap();
        let t = slow_variation_terms(&o, 8, 0).unwrap();
        assert!(t.a_k >= SQRT_2);
        assert!((t.b_k / t.a_k - t.coecc * t.coecc).abs() <= 1e-15);
        assert!(t.ee.iter().chain(&t.ff).all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn henon_order_one_matches_angle_formula() {
        let spec = fixtures::henon();
        let p = Vec2::new(0.1, 0.05);
        let h = 1e-5;
        let theta = |q: Vec2| angle_theta_of(&spec.eval_jacobian(q).unwrap()).unwrap().0;
        let fd = frame_derivative_fd(&spec, p, 1, h).unwrap();
        for axis in 0..2 {
            let d = if axis == 0 { Vec2::new(h, 0.0) } else { Vec2::new(0.0, h) };
            let dtheta = (theta(p + d) - theta(p - d)) / (2.0 * h);
            assert!((fd.inner_e[axis].abs() - dtheta.abs()).abs() <= 1e-4, "{axis}");
        }
    }

    #[test]
    fn exact_derivative_matches_fd() {
        let spec = fixtures::henon();
        let p = fixtures::henon_point();
        for k in 1..=8 {
            let o = orbit(&spec, p, k).unwrap();
            let exact = frame_derivative_exact(&o, k).unwrap();
            let fd = frame_derivative_fd(&spec, p, k, 1e-6).unwrap();
            for axis in 0..2 {
                let err = (exact[axis] - fd.inner_e[axis]).abs();
                assert!(err <= 1e-4 * exact[axis].abs().max(1.0), "k={k} axis={axis}: {err}");
            }
        }
    }

    #[test]
    fn henon_chain_passes() {
        let spec = fixtures::henon();
        let o = orbit(&spec, fixtures::henon_point(), 8).unwrap();
        let l = fit_constants(&o, Flavor::SingularII, 1.05).unwrap();
        let aux = auxiliary_constants(&l).unwrap();
        let rep = verify_slow_variation(&o, &l, &aux, DEFAULT_FD_STEP).unwrap();
        assert!(rep.passed(), "{:?}\n{}", rep.first_failure(), rep.to_csv());
    }
}
