//! Inequality reports and their CSV/JSON renderings.
//!
//! CSV floats use 17 significant digits; JSON floats use the shortest
//! round-trip form (non-finite values become `null`).

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use std::fmt::Write as _;

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// One evaluated instance of an inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub i: Option<usize>,
    pub k: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub pass: bool,
}

/// All rows of one named inequality.
///
/// A row passes iff `lhs ≤ rhs·(1 + tolerance) + abs_tolerance`. The
/// absolute part is nonzero only where the left side is a difference of
/// unit vectors whose resolution is limited by rounding.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub tolerance: f64,
    pub abs_tolerance: f64,
    pub verdict: bool,
    pub rows: Vec<BoundRow>,
}

impl InequalityCheck {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self { name: name.into(), tolerance, abs_tolerance: 0.0, verdict: true, rows: Vec::new() }
    }

    pub fn with_abs_tolerance(mut self, abs: f64) -> Self {
        self.abs_tolerance = abs;
        self
    }

    pub fn push(&mut self, i: Option<usize>, k: Option<usize>, lhs: f64, rhs: f64) -> bool {
        let pass = lhs <= rhs * (1.0 + self.tolerance) + self.abs_tolerance;
        self.verdict &= pass;
        self.rows.push(BoundRow { i, k, lhs, rhs, margin: rhs - lhs, pass });
        pass
    }

    pub fn push_ik(&mut self, i: usize, k: usize, lhs: f64, rhs: f64) -> bool {
        self.push(Some(i), Some(k), lhs, rhs)
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn first_failure(&self) -> Option<&BoundRow> {
        self.rows.iter().find(|r| !r.pass)
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn extend(&mut self, other: InequalityCheck) {
        self.verdict &= other.verdict;
        self.rows.extend(other.rows);
    }
}

/// A labelled collection of inequality checks.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub label: String,
    pub checks: Vec<InequalityCheck>,
}

impl BoundReport {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), checks: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict)
    }

    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations()).sum()
    }

    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Adds `c`, merging rows into an existing check of the same name.
    pub fn add(&mut self, c: InequalityCheck) {
        if let Some(existing) = self.checks.iter_mut().find(|e| e.name == c.name) {
            existing.extend(c);
        } else {
            self.checks.push(c);
        }
    }

    pub fn merge(&mut self, other: BoundReport) {
        for c in other.checks {
            self.add(c);
        }
    }

    /// `"name at (i, k)"` of the first failing row, if any.
    pub fn first_failure(&self) -> Option<String> {
        self.checks.iter().find_map(|c| {
            c.first_failure().map(|r| {
                let mut s = c.name.clone();
                match (r.i, r.k) {
                    (Some(i), Some(k)) => write!(s, " fails at i={i}, k={k}").unwrap(),
                    (Some(i), None) => write!(s, " fails at i={i}").unwrap(),
                    (None, Some(k)) => write!(s, " fails at k={k}").unwrap(),
                    (None, None) => s.push_str(" fails"),
                }
                s
            })
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,i,k,lhs,rhs,margin,pass\n");
        for c in &self.checks {
            for r in &c.rows {
                let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    csv_field(&c.name),
                    opt(r.i),
                    opt(r.k),
                    fmt17(r.lhs),
                    fmt17(r.rhs),
                    fmt17(r.margin),
                    r.pass
                )
                .unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl Serialize for BoundReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Checks<'a>(&'a [InequalityCheck]);
        impl Serialize for Checks<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.len()))?;
                for c in self.0 {
                    m.serialize_entry(&c.name, c)?;
                }
                m.end()
            }
        }
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("label", &self.label)?;
        m.serialize_entry("verdict", &self.passed())?;
        m.serialize_entry("inequalities", &Checks(&self.checks))?;
        m.end()
    }
}

/// Quotes a CSV field when it contains a separator or quote.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_round_trips() {
        for &v in &[0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt17(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn verdict_and_tolerance() {
        let mut c = InequalityCheck::new("x ≤ y", 1e-9);
        assert!(c.push(Some(1), None, 1.0, 1.0));
        assert!(c.push(Some(2), None, 1.0 + 1e-10, 1.0));
        assert!(!c.push(Some(3), None, 1.1, 1.0));
        assert_eq!(c.violations(), 1);
        let mut r = BoundReport::new("t");
        r.add(c);
        assert!(!r.passed());
        assert_eq!(r.first_failure().unwrap(), "x ≤ y fails at i=3");
    }

    #[test]
    fn json_is_nested_by_name() {
        let mut r = BoundReport::new("demo");
        let mut c = InequalityCheck::new("a, b", 0.0);
        c.push(None, None, 0.0, 1.0);
        r.add(c);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["inequalities"]["a, b"]["rows"][0]["rhs"], 1.0);
        assert!(r.to_csv().contains("\"a, b\""));
    }
}
