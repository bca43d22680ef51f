//! Quasi-hyperbolicity certificates: the constants ledger, per-index checks
//! along an orbit, an envelope fit of minimal constants, and the auxiliary
//! constants derived from a ledger.
//!
//! Per-index checks run in log units. A strict inequality needs a gap of
//! more than [`STRICT_MARGIN`]; a non-strict one tolerates that much excess.

use crate::bounds::norms::second_derivative_bracket;
use crate::cocycle::OrbitSegment;
use crate::error::{Error, Result};
use crate::frame::EPS_CC;
use crate::linalg::ln0;
use crate::report::{csv_field, fmt17};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};
use std::str::FromStr;

pub const STRICT_MARGIN: f64 = 1e-12;
pub const DEFAULT_SLACK: f64 = 1.05;
/// Floor `1 + δ` for the fitted upper rate `Γ`.
pub const GAMMA_FLOOR_DELTA: f64 = 1e-6;
/// Log-unit padding that turns fitted envelopes into strict bounds.
const FIT_PAD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    NonSingular,
    SingularI,
    SingularII,
    SingularBoth,
}

impl Flavor {
    /// Whether the type (I) constraints apply.
    pub fn has_i(self) -> bool {
        matches!(self, Flavor::SingularI | Flavor::SingularBoth)
    }

    /// Whether the one-step co-eccentricity lower bound is checked.
    pub fn has_ii(self) -> bool {
        matches!(self, Flavor::NonSingular | Flavor::SingularII | Flavor::SingularBoth)
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::NonSingular => "NonSingular",
            Flavor::SingularI => "SingularI",
            Flavor::SingularII => "SingularII",
            Flavor::SingularBoth => "SingularBoth",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nonsingular" | "ns" => Ok(Flavor::NonSingular),
            "singulari" | "i" => Ok(Flavor::SingularI),
            "singularii" | "ii" => Ok(Flavor::SingularII),
            "singularboth" | "both" => Ok(Flavor::SingularBoth),
            _ => Err(Error::BadParameter(format!("unknown flavor `{s}`"))),
        }
    }
}

/// The certificate constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "GammaTilde")]
    pub gamma_tilde: f64,
    pub lambda: f64,
    pub b: f64,
    pub c: f64,
    #[serde(rename = "cTilde")]
    pub c_tilde: f64,
    #[serde(rename = "B")]
    pub big_b: f64,
    #[serde(rename = "BTilde")]
    pub big_b_tilde: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "D")]
    pub big_d: f64,
    pub flavor: Flavor,
}

const LEDGER_KEYS: [&str; 11] =
    ["Gamma", "GammaTilde", "lambda", "b", "c", "cTilde", "B", "BTilde", "C", "D", "flavor"];

impl ConstantsLedger {
    /// Builds and validates a ledger. A `NonSingular` ledger always carries
    /// `c̃ = Γ̃ = 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        flavor: Flavor,
        gamma: f64,
        gamma_tilde: f64,
        lambda: f64,
        b: f64,
        c: f64,
        c_tilde: f64,
        big_b: f64,
        big_b_tilde: f64,
        big_c: f64,
        big_d: f64,
    ) -> Result<Self> {
        let l = Self::unchecked(flavor, gamma, gamma_tilde, lambda, b, c, c_tilde, big_b, big_b_tilde, big_c, big_d);
        l.validate()?;
        Ok(l)
    }

    /// Builds a ledger without validation.
    #[allow(clippy::too_many_arguments)]
    pub fn unchecked(
        flavor: Flavor,
        gamma: f64,
        gamma_tilde: f64,
        lambda: f64,
        b: f64,
        c: f64,
        c_tilde: f64,
        big_b: f64,
        big_b_tilde: f64,
        big_c: f64,
        big_d: f64,
    ) -> Self {
        let (gamma_tilde, c_tilde) =
            if flavor == Flavor::NonSingular { (1.0, 1.0) } else { (gamma_tilde, c_tilde) };
        Self { gamma, gamma_tilde, lambda, b, c, c_tilde, big_b, big_b_tilde, big_c, big_d, flavor }
    }

    /// Range violations of the individual constants.
    pub fn range_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let pos = [
            ("Γ", self.gamma),
            ("Γ̃", self.gamma_tilde),
            ("λ", self.lambda),
            ("b", self.b),
            ("c", self.c),
            ("c̃", self.c_tilde),
        ];
        for (name, x) in pos {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} > 0"));
            }
        }
        for (name, x) in [("B", self.big_b), ("D", self.big_d)] {
            if !(x.is_finite() && x >= 1.0) {
                v.push(format!("{name} ≥ 1"));
            }
        }
        for (name, x) in [("B̃", self.big_b_tilde), ("C", self.big_c)] {
            if !(x > 0.0 && x <= 1.0) {
                v.push(format!("0 < {name} ≤ 1"));
            }
        }
        if self.flavor == Flavor::NonSingular && (self.gamma_tilde != 1.0 || self.c_tilde != 1.0) {
            v.push("c̃ = Γ̃ = 1".into());
        }
        v
    }

    /// Violated structural inequalities of this ledger's flavor, each named
    /// by the inequality that fails.
    pub fn structural_violations(&self) -> Vec<String> {
        let (g, gt, l, b, c, ct) =
            (self.gamma, self.gamma_tilde, self.lambda, self.b, self.c, self.c_tilde);
        let mut v = Vec::new();
        let mut need = |ok: bool, name: &str| {
            if !ok {
                v.push(name.to_string());
            }
        };
        if self.flavor == Flavor::NonSingular {
            need(g >= l.max(1.0), "Γ ≥ max{λ, 1}");
            need(b < l * l, "b < λ²");
            let r = l * l / (g * g);
            need(c < r, "c < λ²/Γ²");
            need(r < 1.0, "λ²/Γ² < 1");
            return v;
        }
        need(gt >= 1.0, "Γ̃ ≥ 1");
        need(g > l.max(1.0), "Γ > max{λ, 1}");
        need(b < g * g * gt, "b < Γ²Γ̃");
        if self.flavor.has_i() {
            need(b < l * l / gt, "b < λ²/Γ̃");
            let r = (l / (g * gt)).powi(3);
            need(c < r, "c < λ³/(Γ³Γ̃³)");
            need(r < 1.0, "λ³/(Γ³Γ̃³) < 1");
        }
        if self.flavor.has_ii() {
            need(b < l * l * ct, "b < λ²c̃");
            let r = l * l * ct * ct / (g * g * gt);
            need(c < r, "c < λ²c̃²/(Γ²Γ̃)");
            need(r < ct, "λ²c̃²/(Γ²Γ̃) < c̃");
            need(ct <= 1.0, "c̃ ≤ 1");
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = self.range_violations();
        v.extend(self.structural_violations());
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidLedger(v.join("; ")))
        }
    }

    /// Flat `name = value` text, one constant per line.
    pub fn to_kv(&self) -> String {
        let vals = [
            self.gamma,
            self.gamma_tilde,
            self.lambda,
            self.b,
            self.c,
            self.c_tilde,
            self.big_b,
            self.big_b_tilde,
            self.big_c,
            self.big_d,
        ];
        let mut s = String::new();
        for (k, v) in LEDGER_KEYS.iter().zip(vals) {
            writeln!(s, "{k} = {v:?}").unwrap();
        }
        writeln!(s, "flavor = {}", self.flavor).unwrap();
        s
    }

    /// Parses [`to_kv`](Self::to_kv) output. Blank lines and `#` comments
    /// are skipped; unknown or missing keys are errors. The result is
    /// validated.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 10] = [None; 10];
        let mut flavor = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("ledger line {}: expected `name = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "flavor" {
                flavor = Some(v.parse::<Flavor>()?);
                continue;
            }
            let idx = LEDGER_KEYS[..10]
                .iter()
                .position(|&name| name == k)
                .ok_or_else(|| Error::Config(format!("unknown ledger key `{k}`")))?;
            let x = v.parse::<f64>().map_err(|_| Error::Config(format!("ledger key `{k}`: bad number `{v}`")))?;
            vals[idx] = Some(x);
        }
        let get = |i: usize| vals[i].ok_or_else(|| Error::Config(format!("ledger key `{}` missing", LEDGER_KEYS[i])));
        let flavor = flavor.ok_or_else(|| Error::Config("ledger key `flavor` missing".into()))?;
        let (gt, ct) = if flavor == Flavor::NonSingular {
            (vals[1].unwrap_or(1.0), vals[5].unwrap_or(1.0))
        } else {
            (get(1)?, get(5)?)
        };
        Self::new(flavor, get(0)?, gt, get(2)?, get(3)?, get(4)?, ct, get(6)?, get(7)?, get(8)?, get(9)?)
    }
}

/// One inequality `lhs < rhs` (strict) or `lhs ≤ rhs`, in log units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub strict: bool,
    pub pass: bool,
}

impl ConditionCheck {
    fn new(condition: &'static str, lhs: f64, rhs: f64, strict: bool) -> Self {
        // Equal infinities compare as a zero gap.
        let margin = if lhs == rhs { 0.0 } else { rhs - lhs };
        let pass = if strict { margin > STRICT_MARGIN } else { margin >= -STRICT_MARGIN };
        Self { condition, lhs, rhs, margin, strict, pass }
    }
}

pub const COND_LOWER: &str = "Cλ^i < ‖DΦ^i‖";
pub const COND_UPPER: &str = "‖DΦ^i‖ < DΓ^i";
pub const COND_FRAME: &str = "C_{ξ₀,i} < 1";
pub const COND_COECC: &str = "C_{ξ₀,i} ≤ Bc^i";
pub const COND_COECC_UNIT: &str = "Bc^i < 1";
pub const COND_STEP: &str = "‖DΦ_{ξ_{i−1}}‖ < DΓΓ̃^{i−1}";
pub const COND_STEP2: &str = "‖D²Φ_{ξ_{i−1}}‖ < DΓΓ̃^{i−1}";
pub const COND_DET: &str = "|det DΦ_{ξ_{i−1}}| ≤ b";
pub const COND_ONESTEP: &str = "B̃c̃^{i−1} ≤ C_{ξ_{i−1},1}";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexRecord {
    pub i: usize,
    pub checks: Vec<ConditionCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstFailure {
    pub condition: String,
    pub i: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub flavor: Flavor,
    pub k: usize,
    pub ledger: ConstantsLedger,
    pub records: Vec<IndexRecord>,
    /// Structural or range violations of the ledger itself.
    pub ledger_violations: Vec<String>,
    pub first_failures: Vec<FirstFailure>,
    pub verdict: bool,
}

impl CertificateReport {
    /// `"condition fails at i=…"` for the earliest failing index.
    pub fn first_failure(&self) -> Option<String> {
        if let Some(v) = self.ledger_violations.first() {
            return Some(format!("ledger: {v}"));
        }
        self.first_failures
            .iter()
            .min_by_key(|f| f.i)
            .map(|f| format!("{} fails at i={}", f.condition, f.i))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,condition,lhs_log,rhs_log,margin,strict,pass\n");
        for r in &self.records {
            for c in &r.checks {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.i,
                    csv_field(c.condition),
                    fmt17(c.lhs),
                    fmt17(c.rhs),
                    fmt17(c.margin),
                    c.strict,
                    c.pass
                )
                .unwrap();
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-index log data of an orbit, 1-based in `i` for cocycle quantities
/// and 0-based in `j = i − 1` for step quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitLogData {
    pub log_norm: Vec<f64>,
    pub log_coecc: Vec<f64>,
    pub step_log_norm: Vec<f64>,
    /// `ln(√2 max_ς ‖∂_ς DΦ‖)`.
    pub step_log_second: Vec<f64>,
    pub step_log_abs_det: Vec<f64>,
    pub step_log_coecc: Vec<f64>,
}

impl OrbitLogData {
    pub fn of(orbit: &OrbitSegment) -> Self {
        let c = &orbit.cocycle;
        let k = orbit.k();
        let mut log_norm = vec![0.0; k + 1];
        let mut log_coecc = vec![0.0; k + 1];
        for i in 1..=k {
            log_norm[i] = c.log_norm(i);
            log_coecc[i] = c.log_coecc(i);
        }
        Self {
            log_norm,
            log_coecc,
            step_log_norm: (0..k).map(|j| c.step_log_norm(j)).collect(),
            step_log_second: orbit
                .step_second_partials
                .iter()
                .map(|p| ln0(second_derivative_bracket(p).upper))
                .collect(),
            step_log_abs_det: c.step_log_abs_dets.clone(),
            step_log_coecc: (0..k).map(|j| c.step_log_coecc(j)).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.step_log_norm.len()
    }
}

/// Checks every per-index condition of `ledger` along `orbit`.
pub fn check_quasi_hyperbolic(orbit: &OrbitSegment, ledger: &ConstantsLedger) -> CertificateReport {
    check_log_data(&OrbitLogData::of(orbit), ledger)
}

pub fn check_log_data(d: &OrbitLogData, ledger: &ConstantsLedger) -> CertificateReport {
    let k = d.k();
    let l = ledger;
    let (ln_lam, ln_gam, ln_gt, ln_c, ln_ct) =
        (l.lambda.ln(), l.gamma.ln(), l.gamma_tilde.ln(), l.c.ln(), l.c_tilde.ln());
    let (ln_bb, ln_bt, ln_cc, ln_dd, ln_b) =
        (l.big_b.ln(), l.big_b_tilde.ln(), l.big_c.ln(), l.big_d.ln(), l.b.ln());
    let mut records = Vec::with_capacity(k);
    let mut first: Vec<FirstFailure> = Vec::new();
    for i in 1..=k {
        let fi = i as f64;
        let j = i - 1;
        let step_rhs = ln_dd + ln_gam + j as f64 * ln_gt;
        let mut checks = vec![
            ConditionCheck::new(COND_LOWER, ln_cc + fi * ln_lam, d.log_norm[i], true),
            ConditionCheck::new(COND_UPPER, d.log_norm[i], ln_dd + fi * ln_gam, true),
            ConditionCheck::new(COND_FRAME, d.log_coecc[i], 0.0, true),
            ConditionCheck::new(COND_COECC, d.log_coecc[i], ln_bb + fi * ln_c, false),
            ConditionCheck::new(COND_COECC_UNIT, ln_bb + fi * ln_c, 0.0, true),
            ConditionCheck::new(COND_STEP, d.step_log_norm[j], step_rhs, true),
            ConditionCheck::new(COND_STEP2, d.step_log_second[j], step_rhs, true),
            ConditionCheck::new(COND_DET, d.step_log_abs_det[j], ln_b, false),
        ];
        if l.flavor.has_ii() {
            checks.push(ConditionCheck::new(COND_ONESTEP, ln_bt + j as f64 * ln_ct, d.step_log_coecc[j], false));
        }
        for c in &checks {
            if !c.pass && !first.iter().any(|f| f.condition == c.condition) {
                first.push(FirstFailure { condition: c.condition.to_string(), i });
            }
        }
        records.push(IndexRecord { i, checks });
    }
    let mut ledger_violations = l.range_violations();
    ledger_violations.extend(l.structural_violations());
    let verdict = k >= 1 && first.is_empty() && ledger_violations.is_empty();
    CertificateReport { flavor: l.flavor, k, ledger: *ledger, records, ledger_violations, first_failures: first, verdict }
}

/// How a fitted ledger was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitOutcome {
    pub ledger: ConstantsLedger,
    /// First index of the tail over which the rates `λ, Γ, c` were taken;
    /// 1 means the literal envelopes over all indices.
    pub tail_start: usize,
    pub gamma_tilde_from_envelope: bool,
    pub c_tilde_from_envelope: bool,
}

/// Fits rates and prefactors to `orbit` with multiplicative slack `eta`.
/// See [`fit_constants_detailed`].
pub fn fit_constants(orbit: &OrbitSegment, flavor: Flavor, eta: f64) -> Result<ConstantsLedger> {
    fit_constants_detailed(orbit, flavor, eta).map(|o| o.ledger)
}

/// Envelope fit of a ledger that passes [`check_quasi_hyperbolic`].
///
/// Rates are geometric envelopes `‖DΦ^i‖^{1/i}`, `C_{ξ₀,i}^{1/i}` over the
/// indices `i ≥ m`, widened by `eta`; prefactors are then the minimal `B, D`
/// and maximal `C, B̃` covering every index. The literal choice `m = 1` is
/// tried first. When it violates a structural inequality (short transients
/// can make the envelope rates too far apart) later tail starts are tried
/// and the transient is absorbed into the prefactors. `Γ̃ = 1` and `c̃ = 1`
/// are tried before the step-growth envelopes.
pub fn fit_constants_detailed(orbit: &OrbitSegment, flavor: Flavor, eta: f64) -> Result<FitOutcome> {
    if !(eta > 1.0 && eta.is_finite()) {
        return Err(Error::BadParameter(format!("slack must exceed 1, got {eta}")));
    }
    fit_log_data(&OrbitLogData::of(orbit), flavor, eta)
}

pub fn fit_log_data(d: &OrbitLogData, flavor: Flavor, eta: f64) -> Result<FitOutcome> {
    let k = d.k();
    if k == 0 {
        return Err(Error::IndexOutOfRange("fit needs k ≥ 1".into()));
    }
    let cc_cap = (1.0 - EPS_CC).ln();
    if let Some(i) = (1..=k).find(|&i| !(d.log_coecc[i] < cc_cap)) {
        return Err(Error::Infeasible(format!("C_{{ξ₀,i}} < 1 fails at i={i}")));
    }
    let ln_eta = eta.ln();
    let max_det = d.step_log_abs_det.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let b = (ln_eta + max_det).exp();
    let step_env: Vec<f64> =
        (0..k).map(|j| d.step_log_norm[j].max(d.step_log_second[j])).collect();

    // Γ̃ from the growth of the step envelope relative to its start.
    let gt_env = (1..k)
        .map(|j| (step_env[j] - step_env[0]) / j as f64)
        .fold(0.0_f64, f64::max);
    let gt_candidates = [1.0, (ln_eta + gt_env).exp()];
    let ct_literal = if k >= 2 {
        let m = (2..=k)
            .map(|i| d.step_log_coecc[i - 1] / (i - 1) as f64)
            .fold(f64::INFINITY, f64::min);
        (m - ln_eta).exp().min(1.0)
    } else {
        1.0
    };
    let ct_candidates: &[f64] = if flavor.has_ii() && flavor != Flavor::NonSingular {
        &[1.0, ct_literal]
    } else {
        &[1.0]
    };
    let gt_candidates: &[f64] = if flavor == Flavor::NonSingular { &gt_candidates[..1] } else { &gt_candidates };

    let mut literal_reason: Option<String> = None;
    for m in 1..=k {
        let root = |i: usize| d.log_norm[i] / i as f64;
        let min_root = (m..=k).map(root).fold(f64::INFINITY, f64::min);
        let max_root = (m..=k).map(root).fold(f64::NEG_INFINITY, f64::max);
        let max_cc = (m..=k).map(|i| d.log_coecc[i] / i as f64).fold(f64::NEG_INFINITY, f64::max);
        let lambda = (min_root - ln_eta).exp();
        let gamma = eta * max_root.exp().max(1.0 + GAMMA_FLOOR_DELTA);
        let c = (ln_eta + max_cc).exp();
        let (ln_lam, ln_gam, ln_c) = (lambda.ln(), gamma.ln(), c.ln());
        let ln_cc = (1..=k)
            .map(|i| d.log_norm[i] - i as f64 * ln_lam)
            .fold(0.0_f64, f64::min)
            - FIT_PAD;
        let ln_bb = (1..=k)
            .map(|i| d.log_coecc[i] - i as f64 * ln_c)
            .fold(0.0_f64, f64::max)
            + FIT_PAD;
        for &gt in gt_candidates {
            let ln_gt = gt.ln();
            let ln_dd = (1..=k)
                .map(|i| d.log_norm[i] - i as f64 * ln_gam)
                .chain((0..k).map(|j| step_env[j] - ln_gam - j as f64 * ln_gt))
                .fold(0.0_f64, f64::max)
                + FIT_PAD;
            for &ct in ct_candidates {
                let ln_ct = ct.ln();
                let ln_bt = if flavor.has_ii() {
                    (0..k)
                        .map(|j| d.step_log_coecc[j] - j as f64 * ln_ct)
                        .fold(0.0_f64, f64::min)
                        - FIT_PAD
                } else {
                    0.0
                };
                let ledger = ConstantsLedger::unchecked(
                    flavor,
                    gamma,
                    gt,
                    lambda,
                    b,
                    c,
                    ct,
                    ln_bb.exp(),
                    ln_bt.exp(),
                    ln_cc.exp(),
                    ln_dd.exp(),
                );
                let mut problems = ledger.range_violations();
                problems.extend(ledger.structural_violations());
                if problems.is_empty() {
                    let rep = check_log_data(d, &ledger);
                    if rep.verdict {
                        return Ok(FitOutcome {
                            ledger,
                            tail_start: m,
                            gamma_tilde_from_envelope: gt != 1.0,
                            c_tilde_from_envelope: ct != 1.0,
                        });
                    }
                    problems.push(rep.first_failure().unwrap_or_default());
                }
                if literal_reason.is_none() {
                    literal_reason = Some(problems.join("; "));
                }
            }
        }
    }
    Err(Error::Infeasible(literal_reason.unwrap_or_else(|| "no candidate ledger".into())))
}

/// Derived constants of a ledger. Members of a branch whose flavor does
/// not apply are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuxiliaryConstants {
    #[serde(rename = "Q0")]
    pub q0: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "Q1")]
    pub q1: Option<f64>,
    #[serde(rename = "Q2")]
    pub q2: Option<f64>,
    #[serde(rename = "Q3")]
    pub q3: Option<f64>,
    #[serde(rename = "Q4")]
    pub q4: Option<f64>,
    #[serde(rename = "Qt1")]
    pub qt1: Option<f64>,
    #[serde(rename = "Qt2")]
    pub qt2: Option<f64>,
    #[serde(rename = "Qt3")]
    pub qt3: Option<f64>,
    #[serde(rename = "Qt4")]
    pub qt4: Option<f64>,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    pub branch_i: bool,
    pub branch_ii: bool,
    /// Set when `K2` is the maximum over a single branch only.
    pub k2_single_branch: bool,
}

fn positive(value: f64, name: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::DomainViolation(format!("{name} ≤ 0")))
    }
}

/// Evaluates `Q₀, K₁`, the type (I) family `Q₁…Q₄`, the type (II) family
/// `Q̃₁…Q̃₄`, `Q` and `K₂` for the branches the ledger's flavor admits.
/// `NonSingular` uses the (II) branch with `c̃ = Γ̃ = B̃ = 1` semantics of
/// its stored values.
pub fn auxiliary_constants(ledger: &ConstantsLedger) -> Result<AuxiliaryConstants> {
    let l = ledger;
    let (g, gt, lam, b, c, ct) = (l.gamma, l.gamma_tilde, l.lambda, l.b, l.c, l.c_tilde);
    let (bb, bt, cc, dd) = (l.big_b, l.big_b_tilde, l.big_c, l.big_d);
    let q0 = (2.0 / positive(1.0 - bb * bb * c * c, "1 − B²c²")?).sqrt();
    let k1 = q0 * q0 / std::f64::consts::SQRT_2;
    let q = bb * dd.powi(3) * g.powi(4) * gt
        / (cc * cc * lam * lam * positive(g * g * gt - b, "Γ²Γ̃ − b")?);

    let (mut q1, mut q2, mut q3, mut q4) = (None, None, None, None);
    let (mut qt1, mut qt2, mut qt3, mut qt4) = (None, None, None, None);
    let mut k2 = f64::NEG_INFINITY;
    if l.flavor.has_i() {
        let d1 = positive(lam - g * gt * c, "λ − ΓΓ̃c")?;
        let d2 = positive(lam * lam - gt * b, "λ² − Γ̃b")?;
        let d4 = positive(lam.powi(3) - (g * gt).powi(3) * c, "λ³ − Γ³Γ̃³c")?;
        let v1 = bb * dd + q0 * bb * dd.powi(3) * g / (cc * d1);
        let v2 = 1.0 / cc + q0 * dd * dd * g * lam / (cc * cc * d2);
        let v3 = v1 * dd * g * g * gt / lam;
        let v4 = v1 * v2 * dd * g.powi(5) * gt.powi(4) / (lam * lam * d4);
        k2 = k2.max(k1 * (v3 + v4 + q));
        (q1, q2, q3, q4) = (Some(v1), Some(v2), Some(v3), Some(v4));
    }
    if l.flavor.has_ii() {
        let d1 = positive(ct - c, "c̃ − c")?;
        let d2 = positive(lam * lam * ct - b, "λ²c̃ − b")?;
        let d4 = positive(lam * lam * ct * ct - g * g * gt * c, "λ²c̃² − Γ²Γ̃c")?;
        let v1 = bb * dd + q0 * bb * ct / (bt * d1);
        let v2 = 1.0 / cc + q0 * dd * lam * lam * ct / (bt * cc * cc * d2);
        let v3 = v1 * dd * g;
        let v4 = v1 * v2 * dd * g.powi(4) * gt / (lam * lam * d4);
        k2 = k2.max(k1 * (v3 + v4 + q));
        (qt1, qt2, qt3, qt4) = (Some(v1), Some(v2), Some(v3), Some(v4));
    }
    let branch_i = l.flavor.has_i();
    let branch_ii = l.flavor.has_ii();
    Ok(AuxiliaryConstants {
        q0,
        k1,
        q1,
        q2,
        q3,
        q4,
        qt1,
        qt2,
        qt3,
        qt4,
        q,
        k2,
        branch_i,
        branch_ii,
        k2_single_branch: branch_i != branch_ii,
    })
}

impl AuxiliaryConstants {
    /// Populated members as `(name, value)` pairs.
    pub fn members(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("Q0", self.q0), ("K1", self.k1)];
        let opt = [
            ("Q1", self.q1),
            ("Q2", self.q2),
            ("Q3", self.q3),
            ("Q4", self.q4),
            ("Qt1", self.qt1),
            ("Qt2", self.qt2),
            ("Qt3", self.qt3),
            ("Qt4", self.qt4),
        ];
        v.extend(opt.iter().filter_map(|&(n, x)| x.map(|x| (n, x))));
        v.push(("Q", self.q));
        v.push(("K2", self.k2));
        v
    }
}

/// Axes of a structural-feasibility scan at fixed `Γ`; `λ = ratio·Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGrid {
    pub gamma: f64,
    pub ratio: Vec<f64>,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
    pub c_tilde: Vec<f64>,
}

impl ScanGrid {
    /// `n` evenly spaced points in `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanCell {
    pub ratio: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub c: f64,
    pub b: f64,
    pub gamma_tilde: f64,
    pub c_tilde: f64,
    pub feasible: bool,
    pub violated: Vec<String>,
}

/// Structural verdict on every grid cell, in row-major axis order.
pub fn feasibility_region_scan(flavor: Flavor, grid: &ScanGrid) -> Result<Vec<ScanCell>> {
    let all = [&grid.ratio, &grid.c, &grid.b, &grid.gamma_tilde, &grid.c_tilde];
    if !(grid.gamma > 0.0) || all.iter().any(|a| a.iter().any(|&x| !(x > 0.0 && x.is_finite()))) {
        return Err(Error::BadParameter("scan grid values must be positive".into()));
    }
    let mut tuples = Vec::new();
    for &r in &grid.ratio {
        for &c in &grid.c {
            for &b in &grid.b {
                for &gt in &grid.gamma_tilde {
                    for &ct in &grid.c_tilde {
                        tuples.push((r, c, b, gt, ct));
                    }
                }
            }
        }
    }
    Ok(tuples
        .par_iter()
        .map(|&(r, c, b, gt, ct)| {
            let lambda = r * grid.gamma;
            let l = ConstantsLedger::unchecked(flavor, grid.gamma, gt, lambda, b, c, ct, 1.0, 1.0, 1.0, 1.0);
            let violated = l.structural_violations();
            ScanCell {
                ratio: r,
                lambda,
                gamma: grid.gamma,
                c,
                b,
                gamma_tilde: l.gamma_tilde,
                c_tilde: l.c_tilde,
                feasible: violated.is_empty(),
                violated,
            }
        })
        .collect())
}

pub fn scan_to_csv(cells: &[ScanCell]) -> String {
    let mut s = String::from("ratio,lambda,Gamma,c,b,GammaTilde,cTilde,feasible,violated\n");
    for c in cells {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            fmt17(c.ratio),
            fmt17(c.lambda),
            fmt17(c.gamma),
            fmt17(c.c),
            fmt17(c.b),
            fmt17(c.gamma_tilde),
            fmt17(c.c_tilde),
            c.feasible,
            csv_field(&c.violated.join("; "))
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::orbit;
    use crate::linalg::{Mat2, Vec2};
    use crate::maps::MapSpec;

    fn diag_orbit(k: usize) -> OrbitSegment {
        orbit(&MapSpec::linear(Mat2::diag(2.0, 0.5)), Vec2::new(0.1, 0.1), k).unwrap()
    }

    fn hand_ledger() -> ConstantsLedger {
        ConstantsLedger::new(Flavor::SingularII, 2.1, 1.0, 1.9, 1.5, 0.3, 1.0, 1.0, 0.25, 1.0, 1.0).unwrap()
    }

    #[test]
    fn diagonal_cocycle_passes_hand_ledger() {
        let rep = check_quasi_hyperbolic(&diag_orbit(20), &hand_ledger());
        assert!(rep.verdict, "{:?}", rep.first_failure());
        assert_eq!(rep.records.len(), 20);
    }

    #[test]
    fn identity_fails_at_first_index() {
        let o = orbit(&MapSpec::linear(Mat2::IDENTITY), Vec2::new(0.0, 0.0), 5).unwrap();
        let rep = check_quasi_hyperbolic(&o, &hand_ledger());
        assert!(!rep.verdict);
        let f = rep.first_failures.iter().find(|f| f.condition == COND_FRAME).unwrap();
        assert_eq!(f.i, 1);
    }

    #[test]
    fn diagonal_fit_rates() {
        let eta = 1.05;
        let out = fit_constants_detailed(&diag_orbit(10), Flavor::SingularII, eta).unwrap();
        let l = out.ledger;
        assert_eq!(out.tail_start, 1);
        assert!((l.lambda - 2.0 / eta).abs() < 1e-12);
        assert!((l.gamma - 2.0 * eta).abs() < 1e-12);
        assert!((l.c - eta / 4.0).abs() < 1e-12);
        assert!((l.b - eta).abs() < 1e-12);
        assert_eq!((l.c_tilde, l.gamma_tilde), (1.0, 1.0));
    }

    #[test]
    fn rotation_is_infeasible() {
        let o = orbit(&MapSpec::linear(Mat2::rotation(0.3)), Vec2::new(0.1, 0.0), 6).unwrap();
        match fit_constants(&o, Flavor::SingularII, 1.05) {
            Err(Error::Infeasible(m)) => assert!(m.contains("C_{ξ₀,i} < 1 fails")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonsingular_matches_reduced_type_ii() {
        let o = diag_orbit(12);
        let ns = fit_constants(&o, Flavor::NonSingular, 1.05).unwrap();
        let mut ii = ns;
        ii.flavor = Flavor::SingularII;
        let (a, b) = (check_quasi_hyperbolic(&o, &ns), check_quasi_hyperbolic(&o, &ii));
        assert_eq!(a.records, b.records);
        assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn ledger_kv_round_trip() {
        let l = hand_ledger();
        assert_eq!(ConstantsLedger::from_kv(&l.to_kv()).unwrap(), l);
        assert!(matches!(ConstantsLedger::from_kv("Gamma = 2\nfoo = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn auxiliary_closed_forms() {
        let l = ConstantsLedger::new(Flavor::SingularII, 2.1, 1.0, 1.9, 1.5, 0.5, 1.0, 1.0, 0.25, 1.0, 1.0);
        // c = 0.5 violates c < λ²/Γ² ≈ 0.8186 only if larger; here it is valid.
        let a = auxiliary_constants(&l.unwrap()).unwrap();
        assert!((a.q0 - (8.0_f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((a.k1 - (8.0 / 3.0) / std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(a.k2_single_branch && a.q1.is_none() && a.qt1.is_some());
    }

    #[test]
    fn auxiliary_domain_violation_names_denominator() {
        let l = ConstantsLedger::unchecked(Flavor::SingularI, 2.0, 1.0, 1.0, 0.5, 0.6, 1.0, 1.0, 1.0, 1.0, 1.0);
        match auxiliary_constants(&l) {
            Err(Error::DomainViolation(m)) => assert_eq!(m, "λ − ΓΓ̃c ≤ 0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scan_boundaries() {
        let grid = ScanGrid {
            gamma: 1.5,
            ratio: vec![1.0],
            c: vec![0.1, 1.0],
            b: vec![1.0, 2.25],
            gamma_tilde: vec![1.0],
            c_tilde: vec![1.0],
        };
        let cells = feasibility_region_scan(Flavor::SingularII, &grid).unwrap();
        assert_eq!(cells.len(), 4);
        // λ = Γ breaks Γ > λ and makes the (II) chain an equality.
        assert!(cells.iter().all(|c| !c.feasible));
        assert!(cells[0].violated.contains(&"λ²c̃²/(Γ²Γ̃) < c̃".to_string()));
        let ok = ScanGrid { ratio: vec![0.9], ..grid.clone() };
        let cells = feasibility_region_scan(Flavor::SingularII, &ok).unwrap();
        assert!(cells[0].feasible);
        assert!(!cells[2].feasible && cells[2].violated.iter().any(|v| v == "c < λ²c̃²/(Γ²Γ̃)"));
        let edge = ScanGrid { ratio: vec![0.9], c: vec![0.1], b: vec![(0.9 * 1.5) * (0.9 * 1.5) * 1.0], ..grid };
        assert!(!feasibility_region_scan(Flavor::SingularII, &edge).unwrap()[0].feasible);
    }
}
