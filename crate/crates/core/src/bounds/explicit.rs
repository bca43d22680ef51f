//! Explicit exponential convergence bounds under a passing certificate.

use super::apriori::{aligned_frames, ctilde_of, diff_aligned, log_tail_t, Pieces, APRIORI_TOL, UNIT_ABS_TOL};
use crate::certificate::{check_quasi_hyperbolic, AuxiliaryConstants, ConstantsLedger, Flavor};
use crate::cocycle::OrbitSegment;
use crate::error::{Error, Result};
use crate::frame::pushforwards_of;
use crate::linalg::log_sum_exp;
use crate::report::{BoundReport, InequalityCheck};

pub const I_DIFF: &str = "‖e^(k)−e^(i)‖ ≤ Q₁(ΓΓ̃c/λ)^i";
pub const I_PUSH: &str = "‖e^(k)_i‖ ≤ Q₁(Γ²Γ̃c/λ)^i";
pub const I_DET: &str = "‖e^(k)_i‖/|det DΦ^i| ≤ Q₂(ΓΓ̃/λ²)^i";
pub const II_DIFF: &str = "‖e^(k)−e^(i)‖ ≤ Q̃₁(c/c̃)^i";
pub const II_PUSH: &str = "‖e^(k)_i‖ ≤ Q̃₁(Γc/c̃)^i";
pub const II_DET: &str = "‖e^(k)_i‖/|det DΦ^i| ≤ Q̃₂(Γ/(λ²c̃))^i";
pub const NS_DIFF: &str = "‖e^(k)−e^(i)‖ ≤ Q̃₁c^i";
pub const CTILDE_EST: &str = "C̃_{ξ₀,k} ≤ Q₀";
pub const CONORM_EST: &str = "conorm(DΦ^i) ≤ BD(Γc)^i";
pub const I_SUM_EST: &str = "C̃ Σ C_j‖DΦ^j‖‖DΦ_{ξ_j}‖/‖DΦ^{j+1}‖ ≤ Q₀BD²Γ/(C(λ−ΓΓ̃c))·(ΓΓ̃c/λ)^i";
pub const II_TAIL_EST: &str = "𝒯 ≤ Bc̃/(B̃(c̃−c))·(c/c̃)^i";
pub const GEOMETRIC: &str = "Σ_{j=i}^{k−1} r^j ≤ r^i/(1−r)";

/// Checks the explicit bounds at every pair `1 ≤ i ≤ k' ≤ k`, after
/// confirming that the ledger certifies the orbit.
pub fn verify_explicit_convergence(
    orbit: &OrbitSegment,
    ledger: &ConstantsLedger,
    aux: &AuxiliaryConstants,
) -> Result<BoundReport> {
    let cert = check_quasi_hyperbolic(orbit, ledger);
    if !cert.verdict {
        let why = cert.first_failure().unwrap_or_else(|| "certificate fails".into());
        return Err(Error::CertificateRequired(why));
    }
    let l = ledger;
    let (g, gt, lam, c, ct) = (l.gamma, l.gamma_tilde, l.lambda, l.c, l.c_tilde);
    let (bb, bt, cc, dd) = (l.big_b, l.big_b_tilde, l.big_c, l.big_d);
    let co = &orbit.cocycle;
    let kmax = orbit.k();
    let frames = aligned_frames(co, kmax)?;
    let p = Pieces::of(co);
    let mut rep = BoundReport::new(format!("{} explicit convergence ({})", orbit.spec.name, l.flavor));

    let branch_i = l.flavor.has_i().then_some(()).and(aux.q1.zip(aux.q2));
    let branch_ii = l.flavor.has_ii().then_some(()).and(aux.qt1.zip(aux.qt2));
    // A row with `lhs ≤ exp(log_pref + i·ln r)`.
    let geo = |pref: f64, r: f64, i: usize| (pref.ln() + i as f64 * r.ln()).exp();

    let mut named: Vec<InequalityCheck> = Vec::new();
    let mut push = |name: &str, abs: f64, i: Option<usize>, k: Option<usize>, lhs: f64, rhs: f64| {
        match named.iter_mut().find(|c| c.name == name) {
            Some(ch) => {
                ch.push(i, k, lhs, rhs);
            }
            None => {
                let mut ch = InequalityCheck::new(name, APRIORI_TOL).with_abs_tolerance(abs);
                ch.push(i, k, lhs, rhs);
                named.push(ch);
            }
        }
    };

    for k in 1..=kmax {
        let fk = &frames[k - 1];
        let pf = pushforwards_of(co, fk)?;
        let ct_k = ctilde_of(co, k)?;
        push(CTILDE_EST, 0.0, None, Some(k), ct_k, aux.q0);
        for i in 1..=k {
            let diff = diff_aligned(frames[i - 1].e, fk.e);
            let le = pf[i].e.log_norm();
            let push_norm = le.exp();
            let det_ratio = (le - p.ldet[i]).exp();
            let (si, sk) = (Some(i), Some(k));
            if let Some((q1, q2)) = branch_i {
                push(I_DIFF, UNIT_ABS_TOL, si, sk, diff, geo(q1, g * gt * c / lam, i));
                push(I_PUSH, 0.0, si, sk, push_norm, geo(q1, g * g * gt * c / lam, i));
                push(I_DET, 0.0, si, sk, det_ratio, geo(q2, g * gt / (lam * lam), i));
                let s1 = log_sum_exp((i..k).map(|j| p.lc[j] + p.ln[j] + p.step_ln[j] - p.ln[j + 1]));
                let pref = aux.q0 * bb * dd * dd * g / (cc * (lam - g * gt * c));
                push(I_SUM_EST, 0.0, si, sk, ct_k * s1.exp(), geo(pref, g * gt * c / lam, i));
            }
            if let Some((qt1, qt2)) = branch_ii {
                push(II_DIFF, UNIT_ABS_TOL, si, sk, diff, geo(qt1, c / ct, i));
                push(II_PUSH, 0.0, si, sk, push_norm, geo(qt1, g * c / ct, i));
                push(II_DET, 0.0, si, sk, det_ratio, geo(qt2, g / (lam * lam * ct), i));
                let t = if i < k { log_tail_t(co, i, k)?.exp() } else { 0.0 };
                push(II_TAIL_EST, 0.0, si, sk, t, geo(bb * ct / (bt * (ct - c)), c / ct, i));
                if l.flavor == Flavor::NonSingular {
                    push(NS_DIFF, UNIT_ABS_TOL, si, sk, diff, geo(qt1, c, i));
                }
            }
        }
    }
    for i in 1..=kmax {
        push(CONORM_EST, 0.0, Some(i), None, (p.ln[i] + p.lc[i]).exp(), geo(bb * dd, g * c, i));
    }
    for r in contraction_ratios(l) {
        for i in 1..=kmax {
            let sum: f64 = (i..kmax).map(|j| r.powi(j as i32)).sum();
            push(GEOMETRIC, 0.0, Some(i), Some(kmax), sum, r.powi(i as i32) / (1.0 - r));
        }
    }
    for ch in named {
        rep.add(ch);
    }
    Ok(rep)
}

/// The ratios summed as geometric series by the flavor's estimates; each
/// is below 1 for a structurally valid ledger.
pub fn contraction_ratios(l: &ConstantsLedger) -> Vec<f64> {
    let (g, gt, lam, b, c, ct) = (l.gamma, l.gamma_tilde, l.lambda, l.b, l.c, l.c_tilde);
    let mut out = Vec::new();
    if l.flavor.has_i() {
        out.extend([g * gt * c / lam, gt * b / (lam * lam), (g * gt).powi(3) * c / lam.powi(3)]);
    }
    if l.flavor.has_ii() {
        out.extend([c / ct, b / (lam * lam * ct), g * g * gt * c / (lam * lam * ct * ct)]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::{auxiliary_constants, fit_constants};
    use crate::cocycle::orbit;
    use crate::fixtures;
    use crate::linalg::{Mat2, Vec2};
    use crate::maps::MapSpec;

    #[test]
    fn diagonal_passes_with_zero_differences() {
        let o = orbit(&MapSpec::linear(Mat2::diag(2.0, 0.5)), Vec2::new(0.3, 0.2), 12).unwrap();
        for flavor in [Flavor::SingularI, Flavor::SingularII, Flavor::NonSingular] {
            let l = fit_constants(&o, flavor, 1.05).unwrap();
            let aux = auxiliary_constants(&l).unwrap();
            let rep = verify_explicit_convergence(&o, &l, &aux).unwrap();
            assert!(rep.passed(), "{flavor}: {:?}", rep.first_failure());
            let diff = rep.checks.iter().find(|c| c.name.starts_with("‖e^(k)−e^(i)‖")).unwrap();
            assert!(diff.rows.iter().all(|r| r.lhs == 0.0));
        }
    }

    #[test]
    fn henon_type_ii_passes() {
        let o = orbit(&fixtures::henon(), fixtures::henon_point(), 20).unwrap();
        let l = fit_constants(&o, Flavor::SingularII, 1.05).unwrap();
        let aux = auxiliary_constants(&l).unwrap();
        let rep = verify_explicit_convergence(&o, &l, &aux).unwrap();
        assert!(rep.passed(), "{:?}", rep.first_failure());
        assert_eq!(rep.check(II_DIFF).unwrap().rows.len(), 20 * 21 / 2);
    }

    #[test]
    fn corrupted_ledger_is_refused() {
        let o = orbit(&fixtures::henon(), fixtures::henon_point(), 20).unwrap();
        let mut l = fit_constants(&o, Flavor::SingularII, 1.05).unwrap();
        l.c *= 0.05;
        let aux = auxiliary_constants(&l).unwrap();
        assert!(matches!(verify_explicit_convergence(&o, &l, &aux), Err(Error::CertificateRequired(_))));
    }
}
