//! Integral curves of the unit fields `e^(k)` and `f^(k)`: finite-time
//! stable and unstable curves, their grids, and checks of their images.

use crate::certificate::{fit_constants, Flavor};
use crate::cocycle::{compute_orbit, orbit};
use crate::error::{Error, Result};
use crate::frame::{frame_of_cocycle, pushforwards_of, HyperbolicFrame, LOW_CONFIDENCE_COECC};
use crate::linalg::Vec2;
use crate::maps::MapSpec;
use crate::report::{fmt17, BoundReport, InequalityCheck};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;
use std::fmt::{self, Write as _};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const TANGENCY_TOL_RAD: f64 = 5e-3;
pub const IMAGE_ORTHOGONALITY_TOL_RAD: f64 = 1e-3;
pub const SEED_ORTHOGONALITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Field {
    /// `e^(k)`, the most contracted direction.
    Stable,
    /// `f^(k)`, the most expanded direction.
    Unstable,
}

impl Field {
    pub fn of(self, fr: &HyperbolicFrame) -> Vec2 {
        match self {
            Field::Stable => fr.e,
            Field::Unstable => fr.f,
        }
    }

    pub fn other(self) -> Field {
        match self {
            Field::Stable => Field::Unstable,
            Field::Unstable => Field::Stable,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Stable => "e",
            Field::Unstable => "f",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    LengthReached,
    Degeneracy,
    SingularSet,
    DomainExit,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::LengthReached => "length reached",
            Termination::Degeneracy => "degeneracy",
            Termination::SingularSet => "singular set",
            Termination::DomainExit => "domain exit",
        })
    }
}

/// A polyline following one unit field. `tangents[j]` is the field at
/// `points[j]`, sign-continued along the curve; `arclength` is
/// cumulative polyline length (negative before the seed on two-sided
/// curves).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoliationCurve {
    pub k: usize,
    pub field: Field,
    pub points: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    pub arclength: Vec<f64>,
    /// Index of the seed vertex.
    pub seed_index: usize,
    pub termination: Termination,
}

impl FoliationCurve {
    pub fn seed(&self) -> Vec2 {
        self.points[self.seed_index]
    }

    pub fn length(&self) -> f64 {
        self.arclength.last().unwrap() - self.arclength[0]
    }

    /// Largest angle between a segment and the field at its start vertex.
    pub fn max_field_deviation(&self) -> f64 {
        self.points
            .windows(2)
            .zip(&self.tangents)
            .map(|(w, t)| (w[1] - w[0]).angle_to(*t))
            .fold(0.0, f64::max)
    }
}

fn classify(e: &Error) -> Termination {
    match e {
        Error::SingularEncounter(_) | Error::OnSingularSet(..) => Termination::SingularSet,
        Error::OutsideDomain(..) | Error::OrbitEscaped(_) => Termination::DomainExit,
        _ => Termination::Degeneracy,
    }
}

/// The order-`k` frame at `p`, refused in the low-confidence band.
pub fn frame_at(spec: &MapSpec, p: Vec2, k: usize) -> Result<HyperbolicFrame> {
    let o = compute_orbit(spec, p, k, spec.default_guard)?;
    let fr = frame_of_cocycle(&o.cocycle, k)?;
    if fr.coecc > LOW_CONFIDENCE_COECC {
        return Err(Error::NoHyperbolicCoordinates { k, coecc: fr.coecc });
    }
    Ok(fr)
}

fn sample(spec: &MapSpec, p: Vec2, k: usize, field: Field, like: Vec2) -> std::result::Result<Vec2, Termination> {
    let v = field.of(&frame_at(spec, p, k).map_err(|e| classify(&e))?);
    Ok(if v.dot(like) < 0.0 { -v } else { v })
}

/// Integrates from `start` along `direction·field` (the sign of the
/// initial tangent is chosen to agree with `direction`).
fn integrate_one_way(
    spec: &MapSpec,
    start: Vec2,
    k: usize,
    field: Field,
    direction: Vec2,
    total: f64,
    step: f64,
) -> (Vec<Vec2>, Vec<Vec2>, Termination) {
    let mut points = vec![start];
    let mut tangents = Vec::new();
    let n = (total / step).round().max(1.0) as usize;
    let mut p = start;
    let mut t = direction;
    for _ in 0..n {
        let rk = (|| {
            let k1 = sample(spec, p, k, field, t)?;
            let k2 = sample(spec, p + k1.scale(0.5 * step), k, field, k1)?;
            let k3 = sample(spec, p + k2.scale(0.5 * step), k, field, k1)?;
            let k4 = sample(spec, p + k3.scale(step), k, field, k1)?;
            Ok::<_, Termination>((k1, k1 + k2.scale(2.0) + k3.scale(2.0) + k4))
        })();
        match rk {
            Ok((k1, sum)) => {
                tangents.push(k1);
                p = p + sum.scale(step / 6.0);
                t = k1;
                points.push(p);
            }
            Err(reason) => {
                tangents.push(t);
                return (points, tangents, reason);
            }
        }
    }
    // Tangent at the final vertex, for tangency checks.
    tangents.push(sample(spec, p, k, field, t).unwrap_or(t));
    (points, tangents, Termination::LengthReached)
}

fn stamps(points: &[Vec2], offset: f64) -> Vec<f64> {
    let mut s = vec![offset];
    for w in points.windows(2) {
        s.push(s.last().unwrap() + (w[1] - w[0]).norm());
    }
    s
}

/// One-sided curve of arclength `total` from `start`, leaving along the
/// field's conventional sign.
pub fn integrate_curve(
    spec: &MapSpec,
    start: Vec2,
    k: usize,
    field: Field,
    total: f64,
    step: f64,
) -> Result<FoliationCurve> {
    if !(step > 0.0 && step <= total) {
        return Err(Error::BadParameter(format!("step {step} with arclength {total}")));
    }
    let fr = frame_at(spec, start, k).map_err(|e| Error::NoFrameAtStart(e.to_string()))?;
    let (points, tangents, termination) = integrate_one_way(spec, start, k, field, field.of(&fr), total, step);
    let arclength = stamps(&points, 0.0);
    Ok(FoliationCurve { k, field, points, tangents, arclength, seed_index: 0, termination })
}

/// Curve through `seed` extending `half_length` on both sides. The
/// termination is the first non-length reason of the two halves.
pub fn integrate_two_sided(
    spec: &MapSpec,
    seed: Vec2,
    k: usize,
    field: Field,
    half_length: f64,
    step: f64,
) -> Result<FoliationCurve> {
    if !(step > 0.0 && step <= half_length) {
        return Err(Error::BadParameter(format!("step {step} with half length {half_length}")));
    }
    let fr = frame_at(spec, seed, k).map_err(|e| Error::NoFrameAtStart(e.to_string()))?;
    let v = field.of(&fr);
    let (fp, ft, fterm) = integrate_one_way(spec, seed, k, field, v, half_length, step);
    let (bp, bt, bterm) = integrate_one_way(spec, seed, k, field, -v, half_length, step);
    let seed_index = bp.len() - 1;
    let mut points: Vec<Vec2> = bp.into_iter().rev().collect();
    let mut tangents: Vec<Vec2> = bt.into_iter().rev().map(|t| -t).collect();
    points.extend_from_slice(&fp[1..]);
    tangents.pop();
    tangents.extend(ft);
    let back_len: f64 = points[..=seed_index].windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let arclength = stamps(&points, -back_len);
    let termination = if bterm != Termination::LengthReached { bterm } else { fterm };
    Ok(FoliationCurve { k, field, points, tangents, arclength, seed_index, termination })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::BadParameter(format!("rectangle [{x0}, {x1}]×[{y0}, {y1}]")));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    /// Lattice points with the given spacing, centered in the rectangle.
    pub fn seeds(&self, spacing: f64) -> Vec<Vec2> {
        let axis = |lo: f64, hi: f64| {
            let n = ((hi - lo) / spacing).floor() as usize;
            let pad = 0.5 * ((hi - lo) - n as f64 * spacing);
            (0..=n).map(move |i| lo + pad + i as f64 * spacing).collect::<Vec<_>>()
        };
        let xs = axis(self.x0, self.x1);
        let ys = axis(self.y0, self.y1);
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| Vec2::new(x, y))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridOptions {
    pub spacing: f64,
    pub half_length: f64,
    pub step: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { spacing: 0.25, half_length: 0.1, step: DEFAULT_STEP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoliationGrid {
    pub k: usize,
    pub field: Field,
    pub curves: Vec<FoliationCurve>,
    /// Seeds without a usable frame, with the reason.
    pub failures: Vec<(Vec2, String)>,
}

/// Two-sided curves through every lattice seed of `rect`, in seed order.
pub fn foliation_grid(spec: &MapSpec, rect: &Rect, k: usize, field: Field, opts: &GridOptions) -> Result<FoliationGrid> {
    if !(opts.spacing > 0.0) {
        return Err(Error::BadParameter(format!("seed spacing {}", opts.spacing)));
    }
    let results: Vec<(Vec2, Result<FoliationCurve>)> = rect
        .seeds(opts.spacing)
        .into_par_iter()
        .map(|s| (s, integrate_two_sided(spec, s, k, field, opts.half_length, opts.step)))
        .collect();
    let mut curves = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in results {
        match r {
            Ok(c) => curves.push(c),
            Err(e) => failures.push((s, e.to_string())),
        }
    }
    Ok(FoliationGrid { k, field, curves, failures })
}

/// `|⟨e, f⟩|` of the seed tangents of matching e- and f-curves.
pub fn seed_orthogonality(e_grid: &FoliationGrid, f_grid: &FoliationGrid) -> BoundReport {
    let mut ch = InequalityCheck::new("|⟨e,f⟩| at seeds ≤ 1e-9", 0.0);
    for (i, ec) in e_grid.curves.iter().enumerate() {
        if let Some(fc) = f_grid.curves.iter().find(|c| c.seed() == ec.seed()) {
            let dot = ec.tangents[ec.seed_index].dot(fc.tangents[fc.seed_index]).abs();
            ch.push(Some(i), Some(e_grid.k), dot, SEED_ORTHOGONALITY_TOL);
        }
    }
    let mut rep = BoundReport::new("grid orthogonality");
    rep.add(ch);
    rep
}

fn iterate(spec: &MapSpec, p: Vec2, i: usize) -> Result<Vec2> {
    (0..i).try_fold(p, |q, _| spec.eval_map(q))
}

/// Direction of the image polyline at vertex `j` (central difference).
fn image_tangent(img: &[Vec2], j: usize) -> Vec2 {
    let lo = j.saturating_sub(1);
    let hi = (j + 1).min(img.len() - 1);
    img[hi] - img[lo]
}

/// Tangency of `Φ^i(curve)` to the pushforward field `e^(k)_i` (or
/// `f^(k)_i`) at every image vertex.
pub fn pushforward_consistency(spec: &MapSpec, curve: &FoliationCurve, i: usize) -> Result<BoundReport> {
    if i > curve.k {
        return Err(Error::IndexOutOfRange(format!("pushforward index {i} > k = {}", curve.k)));
    }
    let img: Vec<Vec2> = curve.points.iter().map(|&p| iterate(spec, p, i)).collect::<Result<_>>()?;
    let mut ch = InequalityCheck::new(format!("∠(Φ^i curve, {}^(k)_i) ≤ 5e-3 rad", curve.field), 0.0);
    for (j, &p) in curve.points.iter().enumerate() {
        if img.len() < 2 {
            break;
        }
        let o = orbit(spec, p, curve.k)?;
        let fr = frame_of_cocycle(&o.cocycle, curve.k)?;
        let pf = pushforwards_of(&o.cocycle, &fr)?;
        let dir = match curve.field {
            Field::Stable => pf[i].e.unit(),
            Field::Unstable => pf[i].f.unit(),
        };
        ch.push(Some(i), Some(j), (image_tangent(&img, j)).line_angle(dir), TANGENCY_TOL_RAD);
    }
    let mut rep = BoundReport::new(format!("pushforward tangency (k = {}, i = {i})", curve.k));
    rep.add(ch);
    Ok(rep)
}

/// Angle between the images under `DΦ^i` of the e- and f-curve tangents
/// at a shared seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImageAngle {
    /// `|∠ − π/2|`.
    pub deviation: f64,
    /// Rounding bound on the measured angle, `4ε‖M‖(1/‖Mt_e‖ + 1/‖Mt_f‖)`
    /// for `M = DΦ^i`; the measurement says nothing below it.
    pub resolution: f64,
}

/// Images of the seed tangents under the tangent map `DΦ^i`, formed by
/// multiplying the step Jacobians directly rather than through the SVD.
pub fn image_orthogonality_deviation(spec: &MapSpec, e_curve: &FoliationCurve, f_curve: &FoliationCurve, i: usize) -> Result<ImageAngle> {
    if e_curve.seed() != f_curve.seed() {
        return Err(Error::BadParameter("curves do not share a seed".into()));
    }
    let te = e_curve.tangents[e_curve.seed_index];
    let tf = f_curve.tangents[f_curve.seed_index];
    if i == 0 {
        return Ok(ImageAngle { deviation: (te.line_angle(tf) - FRAC_PI_2).abs(), resolution: 4.0 * f64::EPSILON });
    }
    let o = orbit(spec, e_curve.seed(), i)?;
    let m = o.cocycle.prefix[i].body;
    let (ie, if_) = (m * te, m * tf);
    let mn = m.norm();
    let resolution = 4.0 * f64::EPSILON * mn * (1.0 / ie.norm() + 1.0 / if_.norm());
    Ok(ImageAngle { deviation: (ie.line_angle(if_) - FRAC_PI_2).abs(), resolution })
}

/// Endpoint shifts of one-sided curves at steps `h`, `h/2`, `h/4` and
/// their ratio, which is about 16 for a fourth-order integrator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderCheck {
    pub steps: [f64; 3],
    pub shift_coarse: f64,
    pub shift_fine: f64,
    pub ratio: f64,
}

pub fn integrator_order_check(spec: &MapSpec, start: Vec2, k: usize, field: Field, total: f64, h: f64) -> Result<OrderCheck> {
    let steps = [h, 0.5 * h, 0.25 * h];
    let mut ends = Vec::with_capacity(3);
    for &s in &steps {
        let c = integrate_curve(spec, start, k, field, total, s)?;
        if c.termination != Termination::LengthReached {
            return Err(Error::BadParameter(format!("curve stopped early ({}) at step {s}", c.termination)));
        }
        ends.push(*c.points.last().unwrap());
    }
    let shift_coarse = (ends[0] - ends[1]).norm();
    let shift_fine = (ends[1] - ends[2]).norm();
    Ok(OrderCheck { steps, shift_coarse, shift_fine, ratio: shift_coarse / shift_fine })
}

/// Angles between consecutive orders at a seed, against the certified
/// geometric envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceProfile {
    /// `∠(e^(k), e^(k+1))` for `k = 1..kmax−1`.
    pub angles: Vec<f64>,
    /// Per-order decay fitted by least squares on `ln ∠` above the rounding floor.
    pub measured_ratio: f64,
    pub envelope_ratio: f64,
}

/// Angles below this are rounding noise and excluded from the fit.
const ANGLE_FLOOR: f64 = 1e-12;

pub fn convergence_profile(spec: &MapSpec, seed: Vec2, kmax: usize, flavor: Flavor, eta: f64) -> Result<ConvergenceProfile> {
    let o = orbit(spec, seed, kmax)?;
    let l = fit_constants(&o, flavor, eta)?;
    let envelope_ratio = if flavor.has_ii() { l.c / l.c_tilde } else { l.gamma * l.gamma_tilde * l.c / l.lambda };
    let frames: Vec<HyperbolicFrame> = (1..=kmax).map(|k| frame_of_cocycle(&o.cocycle, k)).collect::<Result<_>>()?;
    let angles: Vec<f64> = frames.windows(2).map(|w| (w[0].e).line_angle(w[1].e)).collect();
    let pts: Vec<(f64, f64)> = angles
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > ANGLE_FLOOR)
        .map(|(j, &a)| (j as f64, a.ln()))
        .collect();
    let measured_ratio = if pts.len() < 2 {
        0.0
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    };
    Ok(ConvergenceProfile { angles, measured_ratio, envelope_ratio })
}

/// `curve_id,s,x,y` rows.
pub fn curves_to_csv(curves: &[FoliationCurve]) -> String {
    let mut out = String::from("curve_id,s,x,y\n");
    for (id, c) in curves.iter().enumerate() {
        for (p, s) in c.points.iter().zip(&c.arclength) {
            writeln!(out, "{id},{},{},{}", fmt17(*s), fmt17(p.x), fmt17(p.y)).unwrap();
        }
    }
    out
}

/// Polylines in a fixed 1000×1000 viewbox covering `rect`, y pointing up.
pub fn curves_to_svg(curves: &[FoliationCurve], rect: &Rect) -> String {
    let mut out = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 1000\" width=\"1000\" height=\"1000\">\n",
    );
    for c in curves {
        let color = match c.field {
            Field::Stable => "#1f5fbf",
            Field::Unstable => "#bf3f1f",
        };
        out.push_str("<polyline fill=\"none\" stroke-width=\"1\" stroke=\"");
        out.push_str(color);
        out.push_str("\" points=\"");
        for (j, p) in c.points.iter().enumerate() {
            let x = 1000.0 * (p.x - rect.x0) / (rect.x1 - rect.x0);
            let y = 1000.0 * (rect.y1 - p.y) / (rect.y1 - rect.y0);
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{x:.3},{y:.3}").unwrap();
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</svg>\n");
    out
}
