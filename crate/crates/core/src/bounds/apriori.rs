//! Convergence bounds that need only the existence of hyperbolic
//! coordinates: `‖e^(k) − e^(i)‖`, `‖e^(k)_i‖` and `‖e^(k)_i‖/|det DΦ^i|`
//! against sums over the cocycle.

use crate::cocycle::{Cocycle, OrbitSegment};
use crate::error::{Error, Result};
use crate::frame::{frame_of_cocycle, pushforwards_of, HyperbolicFrame, EPS_CC};
use crate::linalg::{log_sum_exp, Vec2};
use crate::report::{BoundReport, InequalityCheck};

/// Relative tolerance of every a-priori check.
pub const APRIORI_TOL: f64 = 1e-9;
/// Absolute allowance for differences of unit vectors.
pub const UNIT_ABS_TOL: f64 = 1e-13;

pub const APRIORI_1: &str = "‖e^(k)−e^(i)‖ ≤ C̃ Σ C_j‖DΦ^j‖‖DΦ_{ξ_j}‖/‖DΦ^{j+1}‖";
pub const APRIORI_2: &str = "‖e^(k)_i‖ ≤ conorm(DΦ^i) + C̃‖DΦ^i‖ Σ C_j‖DΦ^j‖‖DΦ_{ξ_j}‖/‖DΦ^{j+1}‖";
pub const APRIORI_3: &str =
    "‖e^(k)_i‖/|det DΦ^i| ≤ 1/‖DΦ^i‖ + C̃‖DΦ^i‖ Σ |det DΦ^{j−i}_{ξ_i}|‖DΦ_{ξ_j}‖/(‖DΦ^j‖‖DΦ^{j+1}‖)";
pub const SACRIFICE_1: &str = "‖e^(k)−e^(i)‖ ≤ 𝒯 C̃";
pub const SACRIFICE_2: &str = "‖e^(k)_i‖ ≤ conorm(DΦ^i) + ‖DΦ^i‖ 𝒯 C̃";
pub const SACRIFICE_3: &str =
    "‖e^(k)_i‖/|det DΦ^i| ≤ 1/‖DΦ^i‖ + C̃‖DΦ^i‖ Σ |det DΦ^{j−i}_{ξ_i}|/(‖DΦ^j‖² C_{ξ_j,1})";
pub const ALTERNATIVE: &str = "‖e^(k)−e^(i)‖ ≤ C̃ C_i‖DΦ^i‖‖DΦ^{k−i}_{ξ_i}‖/‖DΦ^k‖";
pub const SIN_ANGLE: &str = "sin²θ_j ≤ C_j²‖DΦ^j‖²‖DΦ_{ξ_j}‖²/((1−C_{j+1}²)‖DΦ^{j+1}‖²)";
pub const SIN_STEP: &str = "‖e^(j+1)−e^(j)‖ ≤ √2|sin θ_j|";

/// `C̃_{ξ₀,k} = max_{1≤i≤k} √(2/(1 − C_{ξ₀,i}²))` of a cocycle.
pub fn ctilde_of(c: &Cocycle, k: usize) -> Result<f64> {
    if k == 0 || k > c.len() {
        return Err(Error::IndexOutOfRange(format!("C̃ order {k} with length {}", c.len())));
    }
    let mut worst: f64 = 0.0;
    for i in 1..=k {
        let cc = c.log_coecc(i).exp();
        if !(cc < 1.0 - EPS_CC) {
            return Err(Error::DegenerateCoeccentricity(i));
        }
        worst = worst.max(cc);
    }
    Ok((2.0 / (1.0 - worst * worst)).sqrt())
}

pub fn ctilde(orbit: &OrbitSegment, k: usize) -> Result<f64> {
    ctilde_of(&orbit.cocycle, k)
}

/// `𝒯^(k)_{ξ₀,i} = Σ_{j=i}^{k−1} C_{ξ₀,j}/C_{ξ_j,1}`.
pub fn tail_t_of(c: &Cocycle, i: usize, k: usize) -> Result<f64> {
    Ok(log_tail_t(c, i, k)?.exp())
}

pub fn tail_t(orbit: &OrbitSegment, i: usize, k: usize) -> Result<f64> {
    tail_t_of(&orbit.cocycle, i, k)
}

pub(crate) fn log_tail_t(c: &Cocycle, i: usize, k: usize) -> Result<f64> {
    if i == 0 || i > k || k > c.len() {
        return Err(Error::IndexOutOfRange(format!("tail (i, k) = ({i}, {k})")));
    }
    let mut terms = Vec::with_capacity(k - i);
    for j in i..k {
        let one = c.step_log_coecc(j);
        if one == f64::NEG_INFINITY {
            return Err(Error::DegenerateStep(j));
        }
        terms.push(c.log_coecc(j) - one);
    }
    Ok(log_sum_exp(terms))
}

/// Frames of every order `1..=kmax` with each `e` aligned to the previous
/// order, so that differences between orders are meaningful.
pub fn aligned_frames(c: &Cocycle, kmax: usize) -> Result<Vec<HyperbolicFrame>> {
    let mut out: Vec<HyperbolicFrame> = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let fr = frame_of_cocycle(c, k)?;
        let fr = match out.last() {
            Some(prev) => fr.aligned_to(prev.e),
            None => fr,
        };
        out.push(fr);
    }
    Ok(out)
}

pub(crate) fn diff_aligned(a: Vec2, b: Vec2) -> f64 {
    let b = if a.dot(b) < 0.0 { -b } else { b };
    (a - b).norm()
}

/// Log-domain ingredients shared by every `(i, k)` pair.
pub(crate) struct Pieces {
    pub(crate) ln: Vec<f64>,
    pub(crate) lc: Vec<f64>,
    pub(crate) step_ln: Vec<f64>,
    pub(crate) step_lc: Vec<f64>,
    /// Prefix sums of step log-determinants.
    pub(crate) ldet: Vec<f64>,
}

impl Pieces {
    pub(crate) fn of(c: &Cocycle) -> Self {
        let k = c.len();
        Self {
            ln: (0..=k).map(|i| c.log_norm(i)).collect(),
            lc: (0..=k).map(|i| c.log_coecc(i)).collect(),
            step_ln: (0..k).map(|j| c.step_log_norm(j)).collect(),
            step_lc: (0..k).map(|j| c.step_log_coecc(j)).collect(),
            ldet: c.prefix_log_abs_dets.clone(),
        }
    }
}

/// Checks the six a-priori inequalities at one pair `(i, k)`.
pub fn verify_apriori_convergence(orbit: &OrbitSegment, i: usize, k: usize) -> Result<BoundReport> {
    let frames = aligned_frames(&orbit.cocycle, k)?;
    let mut rep = BoundReport::new(format!("{} a-priori convergence", orbit.spec.name));
    apriori_pair(&orbit.cocycle, &Pieces::of(&orbit.cocycle), &frames, i, k, &mut rep)?;
    Ok(rep)
}

/// All pairs `1 ≤ i ≤ k ≤ kmax` plus the per-step sin-angle checks.
pub fn verify_apriori_all(c: &Cocycle, kmax: usize, label: &str) -> Result<BoundReport> {
    let kmax = kmax.min(c.len());
    let frames = aligned_frames(c, kmax)?;
    let pieces = Pieces::of(c);
    let mut rep = BoundReport::new(label);
    for k in 1..=kmax {
        for i in 1..=k {
            apriori_pair(c, &pieces, &frames, i, k, &mut rep)?;
        }
    }
    sin_angle_checks(&pieces, &frames, &mut rep);
    Ok(rep)
}

fn apriori_pair(
    c: &Cocycle,
    p: &Pieces,
    frames: &[HyperbolicFrame],
    i: usize,
    k: usize,
    rep: &mut BoundReport,
) -> Result<()> {
    if i == 0 || i > k || k > frames.len() {
        return Err(Error::IndexOutOfRange(format!("a-priori pair (i, k) = ({i}, {k})")));
    }
    let ct = ctilde_of(c, k)?;
    let lct = ct.ln();
    let (fk, fi) = (&frames[k - 1], &frames[i - 1]);
    let diff = diff_aligned(fi.e, fk.e);
    let push = pushforwards_of(c, fk)?;
    let le_i = push[i].e.log_norm();
    let (ln_i, lc_i) = (p.ln[i], p.lc[i]);
    let lconorm_i = ln_i + lc_i;

    // Σ_j C_j‖DΦ^j‖‖A_j‖/‖DΦ^{j+1}‖.
    let s1 = log_sum_exp((i..k).map(|j| p.lc[j] + p.ln[j] + p.step_ln[j] - p.ln[j + 1]));
    // Σ_j |det DΦ^{j−i}_{ξ_i}|‖A_j‖/(‖DΦ^j‖‖DΦ^{j+1}‖).
    let s3 = log_sum_exp((i..k).map(|j| p.ldet[j] - p.ldet[i] + p.step_ln[j] - p.ln[j] - p.ln[j + 1]));
    let lt = if i < k { log_tail_t(c, i, k)? } else { f64::NEG_INFINITY };
    // Σ_j |det DΦ^{j−i}_{ξ_i}|/(‖DΦ^j‖² C_{ξ_j,1}).
    let s9 = log_sum_exp((i..k).map(|j| p.ldet[j] - p.ldet[i] - 2.0 * p.ln[j] - p.step_lc[j]));

    let ratio_lhs = (le_i - p.ldet[i]).exp();
    let mut add = |name: &str, abs: f64, lhs: f64, rhs: f64| {
        let mut ch = InequalityCheck::new(name, APRIORI_TOL).with_abs_tolerance(abs);
        ch.push_ik(i, k, lhs, rhs);
        rep.add(ch);
    };
    add(APRIORI_1, UNIT_ABS_TOL, diff, (lct + s1).exp());
    add(APRIORI_2, 0.0, le_i.exp(), lconorm_i.exp() + (lct + ln_i + s1).exp());
    add(APRIORI_3, 0.0, ratio_lhs, (-ln_i).exp() + (lct + ln_i + s3).exp());
    add(SACRIFICE_1, UNIT_ABS_TOL, diff, (lt + lct).exp());
    add(SACRIFICE_2, 0.0, le_i.exp(), lconorm_i.exp() + (ln_i + lt + lct).exp());
    add(SACRIFICE_3, 0.0, ratio_lhs, (-ln_i).exp() + (lct + ln_i + s9).exp());
    let block = c.block(i, k)?.log_norm();
    add(ALTERNATIVE, UNIT_ABS_TOL, diff, (lct + lc_i + ln_i + block - p.ln[k]).exp());
    Ok(())
}

/// Per-step checks of the angle between consecutive orders.
fn sin_angle_checks(p: &Pieces, frames: &[HyperbolicFrame], rep: &mut BoundReport) {
    let mut sin2 = InequalityCheck::new(SIN_ANGLE, APRIORI_TOL).with_abs_tolerance(UNIT_ABS_TOL);
    let mut step = InequalityCheck::new(SIN_STEP, APRIORI_TOL).with_abs_tolerance(UNIT_ABS_TOL);
    for j in 1..frames.len() {
        let (a, b) = (&frames[j - 1], &frames[j]);
        // e^(j) = cos θ e^(j+1) + sin θ f^(j+1).
        let s = a.e.dot(b.f);
        let c2 = b.coecc * b.coecc;
        let rhs = (2.0 * (p.lc[j] + p.ln[j] + p.step_ln[j] - p.ln[j + 1])).exp() / (1.0 - c2);
        sin2.push(Some(j), None, s * s, rhs);
        step.push(Some(j), None, diff_aligned(b.e, a.e), std::f64::consts::SQRT_2 * s.abs());
    }
    rep.add(sin2);
    rep.add(step);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::orbit;
    use crate::linalg::Mat2;
    use crate::maps::MapSpec;

    #[test]
    fn ctilde_examples() {
        let o = orbit(&MapSpec::linear(Mat2::diag(2.0, 0.5)), Vec2::new(0.1, 0.1), 3).unwrap();
        assert!((ctilde(&o, 1).unwrap() - (32.0_f64 / 15.0).sqrt()).abs() < 1e-14);
        let id = orbit(&MapSpec::linear(Mat2::IDENTITY), Vec2::new(0.1, 0.1), 3).unwrap();
        assert!(matches!(ctilde(&id, 2), Err(Error::DegenerateCoeccentricity(1))));
    }

    #[test]
    fn tail_of_diagonal_is_geometric() {
        let o = orbit(&MapSpec::linear(Mat2::diag(2.0, 0.5)), Vec2::new(0.1, 0.1), 10).unwrap();
        assert_eq!(tail_t(&o, 10, 10).unwrap(), 0.0);
        for i in 1..10 {
            let want: f64 = (i..10).map(|j| 4.0_f64.powi(1 - j as i32)).sum();
            let got = tail_t(&o, i, 10).unwrap();
            assert!((got - want).abs() <= 1e-13 * want, "{i}: {got} vs {want}");
        }
    }

    #[test]
    fn constant_diagonal_has_zero_differences() {
        let o = orbit(&MapSpec::linear(Mat2::diag(2.0, 0.5)), Vec2::new(0.1, 0.1), 8).unwrap();
        let rep = verify_apriori_all(&o.cocycle, 8, "diag").unwrap();
        assert!(rep.passed(), "{:?}", rep.first_failure());
        assert!(rep.check(APRIORI_1).unwrap().rows.iter().all(|r| r.lhs == 0.0));
    }

    #[test]
    fn henon_pair_passes() {
        let h = MapSpec::henon(1.4, 0.3);
        let o = orbit(&h, crate::fixtures::henon_point(), 12).unwrap();
        let rep = verify_apriori_convergence(&o, 3, 12).unwrap();
        assert!(rep.passed(), "{:?}", rep.first_failure());
        assert_eq!(rep.checks.len(), 7);
    }
}
