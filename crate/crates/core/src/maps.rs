//! Planar maps with closed-form first and second derivatives.
//!
//! Second partials follow the entrywise layout: `∂_ς DΦ` is the matrix whose
//! `(m, j)` entry is `∂²Φ_m / ∂x^j ∂ς`. For smooth maps the two matrices
//! satisfy `(∂_x DΦ).col(1) == (∂_y DΦ).col(0)`.
//!
//! Built-ins:
//!
//! | name       | formula                                                      |
//! |------------|--------------------------------------------------------------|
//! | `henon`    | `(1 + y − a x², b x)`                                        |
//! | `standard` | `(x + y + K sin x, y + K sin x)` (unreduced lift)            |
//! | `lorenz2d` | `(s(k1 |x|^α (1 + m1 y) + c1), |x|^β (k2 + m2 y) + c2)`, `s = sgn x` |
//! | `linear`   | `M p`                                                        |
//! | `cubic`    | seeded random cubic polynomial in each component             |
//!
//! `lorenz2d` is a representative Lorenz-like map with a singular line
//! `x = 0` on which `‖DΦ‖` blows up (for `α < 1`). It is not a Poincaré
//! section of the Lorenz flow.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Closed-form description of a planar map.
pub trait PlanarMap: Send + Sync + fmt::Debug {
    fn eval(&self, p: Vec2) -> Vec2;
    fn jacobian(&self, p: Vec2) -> Mat2;
    /// `(∂_x DΦ_p, ∂_y DΦ_p)`.
    fn second_partials(&self, p: Vec2) -> [Mat2; 2];
    /// Distance to the singular set; `∞` for smooth maps.
    fn singular_distance(&self, _p: Vec2) -> f64 {
        f64::INFINITY
    }
    fn in_domain(&self, p: Vec2) -> bool {
        p.is_finite() && p.max_abs() < 1e8
    }
}

/// A named map with its parameters and default singular guard.
#[derive(Clone)]
pub struct MapSpec {
    pub name: String,
    pub parameters: Vec<(String, f64)>,
    pub default_guard: f64,
    map: Arc<dyn PlanarMap>,
}

impl fmt::Debug for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapSpec")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .finish()
    }
}

impl MapSpec {
    pub fn new(
        name: impl Into<String>,
        parameters: Vec<(String, f64)>,
        default_guard: f64,
        map: Arc<dyn PlanarMap>,
    ) -> Self {
        Self { name: name.into(), parameters, default_guard, map }
    }

    pub fn henon(a: f64, b: f64) -> Self {
        Self::new("henon", params(&[("a", a), ("b", b)]), 0.0, Arc::new(Henon { a, b }))
    }

    pub fn standard(k: f64) -> Self {
        Self::new("standard", params(&[("K", k)]), 0.0, Arc::new(Standard { k }))
    }

    pub fn lorenz2d(p: Lorenz2d) -> Self {
        let list = params(&[
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("k1", p.k1),
            ("m1", p.m1),
            ("c1", p.c1),
            ("k2", p.k2),
            ("m2", p.m2),
            ("c2", p.c2),
        ]);
        Self::new("lorenz2d", list, 1e-8, Arc::new(p))
    }

    pub fn linear(m: Mat2) -> Self {
        let [a, b, c, d] = m.entries();
        let list = params(&[("m11", a), ("m12", b), ("m21", c), ("m22", d)]);
        Self::new("linear", list, 0.0, Arc::new(Linear { m }))
    }

    pub fn cubic(seed: u64, scale: f64) -> Self {
        let list = params(&[("seed", seed as f64), ("scale", scale)]);
        Self::new("cubic", list, 0.0, Arc::new(Cubic::random(seed, scale)))
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn singular_distance(&self, p: Vec2) -> f64 {
        self.map.singular_distance(p)
    }

    pub fn in_domain(&self, p: Vec2) -> bool {
        self.map.in_domain(p)
    }

    fn guard(&self, p: Vec2) -> Result<()> {
        if !self.map.in_domain(p) {
            return Err(Error::OutsideDomain(p.x, p.y));
        }
        if self.map.singular_distance(p) <= 0.0 {
            return Err(Error::OnSingularSet(p.x, p.y));
        }
        Ok(())
    }

    pub fn eval_map(&self, p: Vec2) -> Result<Vec2> {
        self.guard(p)?;
        Ok(self.map.eval(p))
    }

    pub fn eval_jacobian(&self, p: Vec2) -> Result<Mat2> {
        self.guard(p)?;
        Ok(self.map.jacobian(p))
    }

    pub fn eval_second_derivative(&self, p: Vec2) -> Result<[Mat2; 2]> {
        self.guard(p)?;
        Ok(self.map.second_partials(p))
    }

    /// Unchecked evaluation for callers that already validated `p`.
    pub(crate) fn raw(&self) -> &dyn PlanarMap {
        self.map.as_ref()
    }

    /// Compares analytic derivatives with central differences of step `h`.
    pub fn fd_validate(&self, p: Vec2, h: f64) -> Result<FdReport> {
        self.guard(p)?;
        if self.map.singular_distance(p) <= 10.0 * h {
            return Err(Error::OnSingularSet(p.x, p.y));
        }
        let m = self.raw();
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        let inv = 0.5 / h;

        let dx = (m.eval(p + ex) - m.eval(p - ex)).scale(inv);
        let dy = (m.eval(p + ey) - m.eval(p - ey)).scale(inv);
        let jac_fd = Mat2::from_cols(dx, dy);
        let jac_rel_err = rel_err(&m.jacobian(p), &jac_fd);

        let sx = (m.jacobian(p + ex) - m.jacobian(p - ex)).scale(inv);
        let sy = (m.jacobian(p + ey) - m.jacobian(p - ey)).scale(inv);
        let [ax, ay] = m.second_partials(p);
        let second_rel_err = rel_err(&ax, &sx).max(rel_err(&ay, &sy));
        Ok(FdReport { h, jacobian_rel_err: jac_rel_err, second_rel_err })
    }
}

fn params(list: &[(&str, f64)]) -> Vec<(String, f64)> {
    list.iter().map(|(n, v)| (n.to_string(), *v)).collect()
}

/// Max-entry error relative to the largest analytic entry; absolute when the
/// analytic matrix is zero.
fn rel_err(exact: &Mat2, approx: &Mat2) -> f64 {
    let diff = (*exact - *approx).max_abs();
    let scale = exact.max_abs();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FdReport {
    pub h: f64,
    pub jacobian_rel_err: f64,
    pub second_rel_err: f64,
}

impl FdReport {
    pub fn passes(&self, jac_tol: f64, second_tol: f64) -> bool {
        self.jacobian_rel_err <= jac_tol && self.second_rel_err <= second_tol
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Henon {
    pub a: f64,
    pub b: f64,
}

impl PlanarMap for Henon {
    fn eval(&self, p: Vec2) -> Vec2 {
        Vec2::new(1.0 + p.y - self.a * p.x * p.x, self.b * p.x)
    }
    fn jacobian(&self, p: Vec2) -> Mat2 {
        Mat2::new(-2.0 * self.a * p.x, 1.0, self.b, 0.0)
    }
    fn second_partials(&self, _p: Vec2) -> [Mat2; 2] {
        [Mat2::new(-2.0 * self.a, 0.0, 0.0, 0.0), Mat2::ZERO]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Standard {
    pub k: f64,
}

impl PlanarMap for Standard {
    fn eval(&self, p: Vec2) -> Vec2 {
        let kick = self.k * p.x.sin();
        Vec2::new(p.x + p.y + kick, p.y + kick)
    }
    fn jacobian(&self, p: Vec2) -> Mat2 {
        let kc = self.k * p.x.cos();
        Mat2::new(1.0 + kc, 1.0, kc, 1.0)
    }
    fn second_partials(&self, p: Vec2) -> [Mat2; 2] {
        let ks = -self.k * p.x.sin();
        [Mat2::new(ks, 0.0, ks, 0.0), Mat2::ZERO]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lorenz2d {
    pub alpha: f64,
    pub beta: f64,
    pub k1: f64,
    pub m1: f64,
    pub c1: f64,
    pub k2: f64,
    pub m2: f64,
    pub c2: f64,
}

impl Default for Lorenz2d {
    /// Orbits from `[−1, 1]²` stay inside `[−1, 1]²`.
    fn default() -> Self {
        Self { alpha: 0.5, beta: 1.5, k1: 1.8, m1: 0.1, c1: -1.0, k2: 0.6, m2: 0.3, c2: -0.1 }
    }
}

impl Lorenz2d {
    /// The `|x|` at which the first component vanishes for a given `y`.
    pub fn zero_of_first_component(&self, y: f64) -> f64 {
        (-self.c1 / (self.k1 * (1.0 + self.m1 * y))).powf(1.0 / self.alpha)
    }
}

impl PlanarMap for Lorenz2d {
    fn eval(&self, p: Vec2) -> Vec2 {
        let s = p.x.signum();
        let u = p.x.abs();
        let g1 = 1.0 + self.m1 * p.y;
        let g2 = self.k2 + self.m2 * p.y;
        Vec2::new(
            s * (self.k1 * u.powf(self.alpha) * g1 + self.c1),
            u.powf(self.beta) * g2 + self.c2,
        )
    }
    fn jacobian(&self, p: Vec2) -> Mat2 {
        let s = p.x.signum();
        let u = p.x.abs();
        let (al, be) = (self.alpha, self.beta);
        let g1 = 1.0 + self.m1 * p.y;
        let g2 = self.k2 + self.m2 * p.y;
        Mat2::new(
            self.k1 * al * u.powf(al - 1.0) * g1,
            s * self.k1 * u.powf(al) * self.m1,
            s * be * u.powf(be - 1.0) * g2,
            u.powf(be) * self.m2,
        )
    }
    fn second_partials(&self, p: Vec2) -> [Mat2; 2] {
        let s = p.x.signum();
        let u = p.x.abs();
        let (al, be) = (self.alpha, self.beta);
        let g1 = 1.0 + self.m1 * p.y;
        let g2 = self.k2 + self.m2 * p.y;
        let xx1 = s * self.k1 * al * (al - 1.0) * u.powf(al - 2.0) * g1;
        let xy1 = self.k1 * al * u.powf(al - 1.0) * self.m1;
        let xx2 = be * (be - 1.0) * u.powf(be - 2.0) * g2;
        let xy2 = s * be * u.powf(be - 1.0) * self.m2;
        [Mat2::new(xx1, xy1, xx2, xy2), Mat2::new(xy1, 0.0, xy2, 0.0)]
    }
    fn singular_distance(&self, p: Vec2) -> f64 {
        p.x.abs()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub m: Mat2,
}

impl PlanarMap for Linear {
    fn eval(&self, p: Vec2) -> Vec2 {
        self.m * p
    }
    fn jacobian(&self, _p: Vec2) -> Mat2 {
        self.m
    }
    fn second_partials(&self, _p: Vec2) -> [Mat2; 2] {
        [Mat2::ZERO, Mat2::ZERO]
    }
}

/// Exponents `(i, j)` of the monomials `x^i y^j` with `i + j ≤ 3`.
pub const CUBIC_MONOMIALS: [(u32, u32); 10] =
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

#[derive(Clone, Debug)]
pub struct Cubic {
    pub coeffs: [[f64; 10]; 2],
}

impl Cubic {
    pub fn random(seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = [[0.0; 10]; 2];
        for row in coeffs.iter_mut() {
            for c in row.iter_mut() {
                *c = rng.gen_range(-scale..scale);
            }
        }
        Self { coeffs }
    }

    /// `∂^{dx+dy} Φ_m / ∂x^dx ∂y^dy` at `p`.
    pub fn derivative(&self, m: usize, dx: u32, dy: u32, p: Vec2) -> f64 {
        CUBIC_MONOMIALS
            .iter()
            .zip(self.coeffs[m].iter())
            .filter(|((i, j), _)| *i >= dx && *j >= dy)
            .map(|(&(i, j), c)| {
                c * falling(i, dx) * falling(j, dy) * p.x.powi((i - dx) as i32) * p.y.powi((j - dy) as i32)
            })
            .sum()
    }
}

fn falling(n: u32, k: u32) -> f64 {
    (0..k).map(|t| (n - t) as f64).product()
}

impl PlanarMap for Cubic {
    fn eval(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.derivative(0, 0, 0, p), self.derivative(1, 0, 0, p))
    }
    fn jacobian(&self, p: Vec2) -> Mat2 {
        let d = |m, dx, dy| self.derivative(m, dx, dy, p);
        Mat2::new(d(0, 1, 0), d(0, 0, 1), d(1, 1, 0), d(1, 0, 1))
    }
    fn second_partials(&self, p: Vec2) -> [Mat2; 2] {
        let d = |m, dx, dy| self.derivative(m, dx, dy, p);
        [
            Mat2::new(d(0, 2, 0), d(0, 1, 1), d(1, 2, 0), d(1, 1, 1)),
            Mat2::new(d(0, 1, 1), d(0, 0, 2), d(1, 1, 1), d(1, 0, 2)),
        ]
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["henon", "standard", "lorenz2d", "linear", "cubic"];

/// Builds a registered map, overriding default parameters by name.
///
/// Defaults: henon `a = 1.4, b = 0.3`; standard `K = 1.2`; lorenz2d per
/// [`Lorenz2d::default`]; linear identity; cubic `seed = 0, scale = 0.5`.
pub fn builtin(name: &str, overrides: &[(String, f64)]) -> Result<MapSpec> {
    let get = |key: &str, default: f64| -> f64 {
        overrides.iter().rev().find(|(n, _)| n == key).map(|(_, v)| *v).unwrap_or(default)
    };
    let allowed: &[&str] = match name {
        "henon" => &["a", "b"],
        "standard" => &["K"],
        "lorenz2d" => &["alpha", "beta", "k1", "m1", "c1", "k2", "m2", "c2"],
        "linear" => &["m11", "m12", "m21", "m22"],
        "cubic" => &["seed", "scale"],
        other => return Err(Error::UnknownMap(other.to_string())),
    };
    if let Some((bad, _)) = overrides.iter().find(|(n, _)| !allowed.contains(&n.as_str())) {
        return Err(Error::BadParameter(format!("`{bad}` is not a parameter of {name}")));
    }
    let spec = match name {
        "henon" => MapSpec::henon(get("a", 1.4), get("b", 0.3)),
        "standard" => MapSpec::standard(get("K", 1.2)),
        "lorenz2d" => {
            let d = Lorenz2d::default();
            let p = Lorenz2d {
                alpha: get("alpha", d.alpha),
                beta: get("beta", d.beta),
                k1: get("k1", d.k1),
                m1: get("m1", d.m1),
                c1: get("c1", d.c1),
                k2: get("k2", d.k2),
                m2: get("m2", d.m2),
                c2: get("c2", d.c2),
            };
            if !(p.alpha > 0.0 && p.alpha < 1.0 && p.beta >= 1.0) {
                return Err(Error::BadParameter("lorenz2d needs 0 < alpha < 1 ≤ beta".into()));
            }
            MapSpec::lorenz2d(p)
        }
        "linear" => MapSpec::linear(Mat2::new(
            get("m11", 1.0),
            get("m12", 0.0),
            get("m21", 0.0),
            get("m22", 1.0),
        )),
        _ => {
            let seed = get("seed", 0.0);
            if seed < 0.0 || seed.fract() != 0.0 {
                return Err(Error::BadParameter("cubic seed must be a nonnegative integer".into()));
            }
            MapSpec::cubic(seed as u64, get("scale", 0.5))
        }
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn henon_values() {
        let h = MapSpec::henon(1.4, 0.3);
        assert_eq!(h.eval_map(Vec2::new(0.0, 0.0)).unwrap(), Vec2::new(1.0, 0.0));
        let q = h.eval_map(Vec2::new(1.0, 0.0)).unwrap();
        assert!((q.x + 0.4).abs() < 1e-15 && (q.y - 0.3).abs() < 1e-15);
        assert_eq!(h.eval_jacobian(Vec2::new(0.0, 0.0)).unwrap(), Mat2::new(0.0, 1.0, 0.3, 0.0));
        let [sx, sy] = h.eval_second_derivative(Vec2::new(0.4, -2.0)).unwrap();
        assert_eq!(sx, Mat2::new(-2.8, 0.0, 0.0, 0.0));
        assert_eq!(sy, Mat2::ZERO);
    }

    #[test]
    fn linear_identity_is_fixed() {
        let id = MapSpec::linear(Mat2::IDENTITY);
        let p = Vec2::new(0.3, -0.7);
        assert_eq!(id.eval_map(p).unwrap(), p);
        let r = id.fd_validate(p, 1e-6).unwrap();
        assert!(r.jacobian_rel_err <= 1e-9 && r.second_rel_err <= 1e-14);
    }

    #[test]
    fn standard_map_is_area_preserving() {
        let s = MapSpec::standard(1.2);
        for i in 0..50 {
            let p = Vec2::new(0.37 * i as f64 - 3.0, 0.11 * i as f64);
            let d = s.eval_jacobian(p).unwrap().det();
            assert!((d.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lorenz_rejects_singular_line() {
        let l = MapSpec::lorenz2d(Lorenz2d::default());
        assert!(matches!(l.eval_map(Vec2::new(0.0, 0.2)), Err(Error::OnSingularSet(..))));
        assert!(matches!(l.fd_validate(Vec2::new(0.0, 0.2), 1e-6), Err(Error::OnSingularSet(..))));
        assert!(matches!(l.fd_validate(Vec2::new(5e-6, 0.2), 1e-6), Err(Error::OnSingularSet(..))));
    }

    #[test]
    fn lorenz_second_partials_match_fd_near_singular_line() {
        let l = MapSpec::lorenz2d(Lorenz2d::default());
        for &x in &[0.01, -0.02, 0.05, -0.3, 0.9] {
            let r = l.fd_validate(Vec2::new(x, 0.3), 1e-6).unwrap();
            assert!(r.jacobian_rel_err <= 1e-6, "{x}: {r:?}");
            assert!(r.second_rel_err <= 1e-4, "{x}: {r:?}");
        }
    }

    #[test]
    fn cubic_second_partials_are_symmetric() {
        let c = MapSpec::cubic(3, 1.0);
        let [sx, sy] = c.eval_second_derivative(Vec2::new(0.2, -0.4)).unwrap();
        assert_eq!(sx.col(1), sy.col(0));
    }

    #[test]
    fn registry_overrides_and_rejects_unknowns() {
        let h = builtin("henon", &[("a".into(), 1.2)]).unwrap();
        assert_eq!(h.parameter("a"), Some(1.2));
        assert_eq!(h.parameter("b"), Some(0.3));
        assert!(matches!(builtin("tent", &[]), Err(Error::UnknownMap(_))));
        assert!(matches!(builtin("henon", &[("K".into(), 1.0)]), Err(Error::BadParameter(_))));
        for name in BUILTIN_NAMES {
            assert!(builtin(name, &[]).is_ok());
        }
    }
}
