use rand::Rng;
use serde::Serialize;

use crate::curve::{det2, merge_breakpoints, perp, PolylineCurve, Vec2};
use crate::energy::ReducedDensity;
use crate::error::{Result, RodError};
use crate::exact::orient;
use crate::fixtures::rng;
use crate::geometry::{image_length, is_injective, point_segment_distance};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldProvenance {
    Normal,
    Minimizer,
    Smoothed,
    Given,
}

/// Transverse director along the rod.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum FieldShape {
    /// values[j] on (breaks[j], breaks[j+1]).
    Constant { breaks: Vec<f64>, values: Vec<Vec2> },
    /// Continuous, affine between consecutive knots.
    Linear { knots: Vec<f64>, values: Vec<Vec2> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CosseratField {
    pub shape: FieldShape,
    pub provenance: FieldProvenance,
}

fn locate(knots: &[f64], s: f64) -> usize {
    let m = knots.len() - 1;
    match knots.binary_search_by(|k| k.partial_cmp(&s).unwrap()) {
        Ok(k) => k.min(m - 1),
        Err(k) => (k.max(1) - 1).min(m - 1),
    }
}

impl CosseratField {
    pub fn constant(breaks: Vec<f64>, values: Vec<Vec2>, provenance: FieldProvenance) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(RodError::Precondition("field needs one value per piece".into()));
        }
        Ok(Self { shape: FieldShape::Constant { breaks, values }, provenance })
    }

    pub fn linear(knots: Vec<f64>, values: Vec<Vec2>, provenance: FieldProvenance) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(RodError::Precondition("field needs one value per knot".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(RodError::Precondition("field knots must increase from 0 to 1".into()));
        }
        Ok(Self { shape: FieldShape::Linear { knots, values }, provenance })
    }

    pub fn knots(&self) -> &[f64] {
        match &self.shape {
            FieldShape::Constant { breaks, .. } => breaks,
            FieldShape::Linear { knots, .. } => knots,
        }
    }

    /// Right-continuous at jumps.
    pub fn eval(&self, s: f64) -> Vec2 {
        match &self.shape {
            FieldShape::Constant { breaks, values } => values[locate(breaks, s)],
            FieldShape::Linear { knots, values } => {
                let j = locate(knots, s);
                let r = ((s - knots[j]) / (knots[j + 1] - knots[j])).clamp(0.0, 1.0);
                values[j] + (values[j + 1] - values[j]) * r
            }
        }
    }

    /// Value and derivative on the open knot interval j.
    fn piece(&self, j: usize) -> (Vec2, Vec2, Vec2) {
        match &self.shape {
            FieldShape::Constant { values, .. } => (values[j], values[j], Vec2::zeros()),
            FieldShape::Linear { knots, values } => {
                (values[j], values[j + 1], (values[j + 1] - values[j]) / (knots[j + 1] - knots[j]))
            }
        }
    }

    pub fn is_continuous(&self) -> bool {
        match &self.shape {
            FieldShape::Constant { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
            FieldShape::Linear { .. } => true,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.shape {
            FieldShape::Constant { values, .. } | FieldShape::Linear { values, .. } => {
                values.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// sup |b'|; infinite across a jump.
    pub fn derivative_sup(&self) -> f64 {
        if !self.is_continuous() {
            return f64::INFINITY;
        }
        (0..self.knots().len() - 1).map(|j| self.piece(j).2.norm()).fold(0.0, f64::max)
    }

    /// L^p distance, exact for even integer p.
    pub fn lp_distance(&self, other: &CosseratField, p: f64) -> f64 {
        let ts = merge_breakpoints(self.knots(), other.knots());
        let even = p.fract() == 0.0 && (p as i64) % 2 == 0;
        let mut total = 0.0;
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let mid = 0.5 * (t0 + t1);
            let (ja, jb) = (locate(self.knots(), mid), locate(other.knots(), mid));
            let at = |f: &CosseratField, j: usize, t: f64| {
                let (v0, _, d) = f.piece(j);
                v0 + d * (t - f.knots()[j])
            };
            let d0 = at(self, ja, t0) - at(other, jb, t0);
            let d1 = at(self, ja, t1) - at(other, jb, t1);
            if d0 == Vec2::zeros() && d1 == Vec2::zeros() {
                continue;
            }
            let g = |r: f64| (d0 + (d1 - d0) * r).norm().powf(p);
            let integral = if even {
                quad::gauss_legendre(g, 0.0, 1.0, (p as usize) / 2 + 1)
            } else {
                quad::adaptive(g, 0.0, 1.0, 1e-13)
            };
            total += integral * (t1 - t0);
        }
        total.powf(1.0 / p)
    }
}

fn slopes(y: &PolylineCurve) -> Result<Vec<Vec2>> {
    let a: Vec<Vec2> = (0..y.num_segments()).map(|j| y.slope(j)).collect();
    if let Some(j) = a.iter().position(|v| *v == Vec2::zeros()) {
        return Err(RodError::DegenerateInput(format!("piece {j} has zero speed")));
    }
    Ok(a)
}

/// b = perp(y') / |y'| per piece.
pub fn cosserat_normal(y: &PolylineCurve) -> Result<CosseratField> {
    let vals = slopes(y)?.into_iter().map(|a| perp(a) / a.norm()).collect();
    CosseratField::constant(y.breakpoints().to_vec(), vals, FieldProvenance::Normal)
}

/// b = argmin_xi W(y'|xi) per piece.
pub fn cosserat_minimizer(y: &PolylineCurve, f: &ReducedDensity) -> Result<CosseratField> {
    let vals = slopes(y)?.into_iter().map(|a| f.eval_with_minimizer(a).1).collect();
    CosseratField::constant(y.breakpoints().to_vec(), vals, FieldProvenance::Minimizer)
}

/// Minimum of det(y'|b) over (0,1), exact for piecewise affine data.
pub fn min_det(y: &PolylineCurve, b: &CosseratField) -> f64 {
    let ts = merge_breakpoints(y.breakpoints(), b.knots());
    let mut m = f64::INFINITY;
    for w in ts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let a = y.slope(y.segment_index(mid));
        let j = locate(b.knots(), mid);
        let (v0, _, d) = b.piece(j);
        let k0 = b.knots()[j];
        for t in [w[0], w[1]] {
            m = m.min(det2(a, v0 + d * (t - k0)));
        }
    }
    m
}

#[derive(Debug, Clone, Serialize)]
pub struct Smoothed {
    pub field: CosseratField,
    /// Corner vectors, one per interior vertex.
    pub zetas: Vec<Vec2>,
    pub eps_tilde: f64,
    pub floor: f64,
    pub min_det: f64,
    pub kernel_width: f64,
}

/// Corners turning by less than this relative determinant count as straight.
pub const ALIGNED_TOL: f64 = 1e-9;

/// Replace b near each corner by zeta (corner windows of radius 1/i), then
/// average with a box kernel of width 1/(4i).
pub fn smooth_cosserat(y: &PolylineCurve, b: &CosseratField, i: usize, delta: f64) -> Result<Smoothed> {
    let FieldShape::Constant { breaks, values } = &b.shape else {
        return Err(RodError::Precondition("smoothing expects a piecewise-constant field".into()));
    };
    if breaks.as_slice() != y.breakpoints() {
        return Err(RodError::Precondition("field pieces must match the rod pieces".into()));
    }
    if !(delta > 0.0) {
        return Err(RodError::Precondition("det floor must be positive".into()));
    }
    let a = slopes(y)?;
    let m = a.len();
    for l in 0..m {
        if det2(a[l], values[l]) < 2.0 * delta {
            return Err(RodError::Precondition(format!("det(a|b) < 2 delta on piece {l}")));
        }
    }
    let bp = y.breakpoints();
    let min_len = bp.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let r = 1.0 / i.max(1) as f64;
    if i == 0 || r >= min_len / 2.0 {
        return Err(RodError::Precondition(format!("1/i = {r} must be below half the shortest piece {min_len}")));
    }
    let mut zetas = Vec::with_capacity(m.saturating_sub(1));
    let mut eps_tilde = f64::INFINITY;
    for l in 0..m.saturating_sub(1) {
        let turn = det2(a[l], a[l + 1]);
        let aligned = turn.abs() <= ALIGNED_TOL * a[l].norm() * a[l + 1].norm();
        let side = if aligned { 0 } else { orient(Vec2::zeros(), a[l], a[l + 1]) };
        let z = match side {
            1 => a[l + 1] - a[l],
            -1 => a[l] - a[l + 1],
            _ => {
                if a[l].dot(&a[l + 1]) < 0.0 {
                    return Err(RodError::Precondition(format!("rod folds back at vertex {}", l + 1)));
                }
                values[l]
            }
        };
        eps_tilde = eps_tilde.min(det2(a[l], z)).min(det2(a[l + 1], z));
        zetas.push(z);
    }
    if !(eps_tilde > 0.0) && m > 1 {
        return Err(RodError::Degeneracy("corner vector does not keep the orientation".into()));
    }
    // Piecewise-constant modified field: jumps at xs, value vs[k] right of xs[k-1].
    let mut jumps = Vec::new();
    let mut vs = vec![values[0]];
    for l in 0..m.saturating_sub(1) {
        let c = bp[l + 1];
        jumps.push(c - r);
        vs.push(zetas[l]);
        jumps.push(c + r);
        vs.push(values[l + 1]);
    }
    let w = r / 4.0;
    let value_of = |x: f64| vs[jumps.partition_point(|&j| j <= x)];
    let average = |x: f64| {
        let (lo, hi) = (x - w / 2.0, x + w / 2.0);
        let mut acc = Vec2::zeros();
        let mut cur = lo;
        for &j in jumps.iter().filter(|&&j| j > lo && j < hi) {
            acc += value_of(0.5 * (cur + j)) * (j - cur);
            cur = j;
        }
        acc += value_of(0.5 * (cur + hi)) * (hi - cur);
        acc / w
    };
    let mut knots = vec![0.0, 1.0];
    for &j in &jumps {
        knots.push(j - w / 2.0);
        knots.push(j + w / 2.0);
    }
    knots.retain(|k| (0.0..=1.0).contains(k));
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();
    let vals: Vec<Vec2> = knots.iter().map(|&k| average(k)).collect();
    let field = CosseratField::linear(knots, vals, FieldProvenance::Smoothed)?;
    let md = min_det(y, &field);
    let floor = eps_tilde.min(delta);
    if md < floor * (1.0 - 1e-12) {
        return Err(RodError::Construction(format!("smoothed det {md} below floor {floor}")));
    }
    Ok(Smoothed { field, zetas, eps_tilde, floor, min_det: md, kernel_width: w })
}

/// Rod slope, field values at both ends and field slope on one cell.
struct StripCell {
    a: Vec2,
    b0: Vec2,
    b1: Vec2,
    db: Vec2,
}

fn cells(y: &PolylineCurve, b: &CosseratField) -> Vec<StripCell> {
    let ts = merge_breakpoints(y.breakpoints(), b.knots());
    ts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let a = y.slope(y.segment_index(mid));
            let j = locate(b.knots(), mid);
            let (v0, _, d) = b.piece(j);
            let k0 = b.knots()[j];
            StripCell { a, b0: v0 + d * (w[0] - k0), b1: v0 + d * (w[1] - k0), db: d }
        })
        .collect()
}

/// Exact minimum of det(grad y_h) over (0,1) x [-h/2, h/2]; the determinant
/// is bilinear on every cell.
pub fn strip_min_det(y: &PolylineCurve, b: &CosseratField, h: f64) -> f64 {
    let mut m = f64::INFINITY;
    for c in cells(y, b) {
        for bb in [c.b0, c.b1] {
            for u in [-0.5 * h, 0.5 * h] {
                m = m.min(det2(c.a + c.db * u, bb));
            }
        }
    }
    m
}

pub fn strip_point(y: &PolylineCurve, b: &CosseratField, s: f64, u: f64) -> Vec2 {
    y.eval_unchecked(s) + b.eval(s) * u
}

/// Closed boundary polygon of the strip: upper edge forward, lower edge back.
pub fn strip_boundary(y: &PolylineCurve, b: &CosseratField, h: f64) -> Vec<Vec2> {
    let ts = merge_breakpoints(y.breakpoints(), b.knots());
    let hb = 0.5 * h;
    let mut pts: Vec<Vec2> = ts.iter().map(|&s| y.eval_unchecked(s) + b.eval(s.min(1.0)) * hb).collect();
    let cs = cells(y, b);
    // Use the left-limit of b at the end knot.
    *pts.last_mut().unwrap() = y.eval_unchecked(1.0) + cs.last().unwrap().b1 * hb;
    pts[0] = y.eval_unchecked(0.0) + cs[0].b0 * hb;
    let mut lower: Vec<Vec2> = ts.iter().map(|&s| y.eval_unchecked(s) - b.eval(s) * hb).collect();
    *lower.last_mut().unwrap() = y.eval_unchecked(1.0) - cs.last().unwrap().b1 * hb;
    lower[0] = y.eval_unchecked(0.0) - cs[0].b0 * hb;
    pts.extend(lower.into_iter().rev());
    pts.push(pts[0]);
    pts
}

#[derive(Debug, Clone, Serialize)]
pub struct StripCertificate {
    pub h: f64,
    pub delta: f64,
    /// Exact minimum of det(grad y_h).
    pub min_det: f64,
    pub det_ok: bool,
    pub boundary_simple: bool,
    pub samples: usize,
    pub sampled_min_det: f64,
    pub det_failures: usize,
    pub local_failures: usize,
    pub far_failures: usize,
    pub passes: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StripMap {
    pub h: f64,
    pub h0: f64,
    pub h1: f64,
    pub h3: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub delta: f64,
    pub binding: &'static str,
    pub b_sup: f64,
    pub b_lip: f64,
    pub field: CosseratField,
    pub certificate: StripCertificate,
    #[serde(skip)]
    pub y: PolylineCurve,
}

/// Clearance between segment pairs whose parameter intervals are at least
/// 2 gamma apart; infinite when there is no such pair.
pub fn clearance(y: &PolylineCurve, gamma: f64) -> f64 {
    let bp = y.breakpoints();
    let m = y.num_segments();
    let mut best = f64::INFINITY;
    for i in 0..m {
        let (p0, p1) = y.segment(i);
        for j in i + 1..m {
            if bp[j] - bp[i + 1] < 2.0 * gamma {
                continue;
            }
            let (q0, q1) = y.segment(j);
            let d = point_segment_distance(p0, q0, q1)
                .min(point_segment_distance(p1, q0, q1))
                .min(point_segment_distance(q0, p0, p1))
                .min(point_segment_distance(q1, p0, p1));
            best = best.min(d);
        }
    }
    best
}

/// y_h(s, u) = y(s) + u b(s) checked on draws of parameter pairs: half
/// uniform, half within gamma of each other.
pub fn verify_strip(
    y: &PolylineCurve,
    b: &CosseratField,
    h: f64,
    delta: f64,
    gamma: f64,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> StripCertificate {
    let md = strip_min_det(y, b, h);
    let det_ok = md >= delta / 2.0;
    let boundary = strip_boundary(y, b, h);
    let boundary_simple = PolylineCurve::uniform(boundary).map(|c| is_injective(&c)).unwrap_or(false);
    let bp = y.breakpoints();
    let b_sup = b.sup_norm();
    let mut r = rng(seed);
    let window = gamma.min(0.05);
    let mut sampled_min_det = f64::INFINITY;
    let (mut det_failures, mut local_failures, mut far_failures) = (0, 0, 0);
    let grad_det = |s: f64, u: f64| {
        let j = locate(b.knots(), s);
        let (v0, _, d) = b.piece(j);
        let bb = v0 + d * (s - b.knots()[j]);
        det2(y.slope(y.segment_index(s)) + d * u, bb)
    };
    for k in 0..samples {
        let s1: f64 = r.gen_range(0.0..1.0);
        let u1 = r.gen_range(-0.5..=0.5) * h;
        let s2: f64 = if k % 2 == 0 {
            r.gen_range(0.0..1.0)
        } else {
            (s1 + r.gen_range(-1.0..=1.0) * window).clamp(0.0, 1.0)
        };
        let u2 = r.gen_range(-0.5..=0.5) * h;
        let dt = grad_det(s1, u1);
        sampled_min_det = sampled_min_det.min(dt);
        if dt < delta / 2.0 {
            det_failures += 1;
        }
        let f1 = strip_point(y, b, s1, u1);
        let f2 = strip_point(y, b, s2, u2);
        let dist = (f1 - f2).norm();
        let (i, j) = {
            let (i, j) = (y.segment_index(s1), y.segment_index(s2));
            (i.min(j), i.max(j))
        };
        let far = j > i && bp[j] - bp[i + 1] >= 2.0 * gamma;
        if far {
            if dist < alpha - h * b_sup {
                far_failures += 1;
            }
        } else {
            let dx = ((s1 - s2).powi(2) + (u1 - u2).powi(2)).sqrt();
            if dist < 0.25 * delta * dx * (1.0 - 1e-12) {
                local_failures += 1;
            }
        }
    }
    let passes = det_ok && boundary_simple && det_failures == 0 && local_failures == 0 && far_failures == 0;
    StripCertificate {
        h,
        delta,
        min_det: md,
        det_ok,
        boundary_simple,
        samples,
        sampled_min_det,
        det_failures,
        local_failures,
        far_failures,
        passes,
    }
}

pub const DEFAULT_SAMPLES: usize = 10_000;

/// Thickness h for which the strip map is certified injective, by the
/// three-stage shrink: orientation, local lower Lipschitz bound, clearance.
pub fn tubular_thickness(y: &PolylineCurve, b: &CosseratField, delta: f64, cap: f64, seed: u64) -> Result<StripMap> {
    if !(delta > 0.0) || !(cap > 0.0) {
        return Err(RodError::Precondition("delta and the thickness cap must be positive".into()));
    }
    if y.is_closed() {
        return Err(RodError::Precondition("strip extrusion needs an open rod".into()));
    }
    if !is_injective(y) {
        return Err(RodError::Precondition("rod is not injective".into()));
    }
    if !b.is_continuous() {
        return Err(RodError::Precondition("Cosserat field jumps; smooth it first".into()));
    }
    let d = min_det(y, b);
    if d < delta {
        return Err(RodError::Precondition(format!("det(y'|b) = {d} below the floor {delta}")));
    }
    let cs = cells(y, b);
    let mut h0 = f64::INFINITY;
    for c in &cs {
        for bb in [c.b0, c.b1] {
            let num = det2(c.a, bb) - delta / 2.0;
            let e = det2(c.db, bb).abs();
            if e > 0.0 {
                h0 = h0.min(2.0 * num / e * (1.0 - 1e-9));
            }
        }
    }
    let constant = cs.iter().all(|c| c.a == cs[0].a && c.db == Vec2::zeros() && c.b0 == cs[0].b0);
    let b_lip = b.derivative_sup();
    let b_sup = b.sup_norm();
    let (h1, gamma) = if constant {
        (f64::INFINITY, f64::INFINITY)
    } else {
        // sqrt(h1^2 + 4 gamma^2) |grad y_h|_inf <= delta/4 with gamma = h1/2
        // and |grad y_h| <= A + (h/2) B.
        let a_max = cs.iter().map(|c| c.a.norm() + c.b0.norm().max(c.b1.norm())).fold(0.0, f64::max);
        let s2 = std::f64::consts::SQRT_2;
        let r = if b_lip > 0.0 {
            let (qa, qb, qc) = (s2 * b_lip / 2.0, s2 * a_max, delta / 4.0);
            2.0 * qc / (qb + (qb * qb + 4.0 * qa * qc).sqrt())
        } else {
            delta / (4.0 * s2 * a_max)
        };
        let h1 = r.min(h0);
        (h1, h1 / 2.0)
    };
    let alpha = clearance(y, if gamma.is_finite() { gamma } else { 1.0 });
    if alpha == 0.0 {
        return Err(RodError::Precondition("rod touches itself: no uniform tubular thickness".into()));
    }
    let h3 = if alpha.is_finite() { alpha / (4.0 * b_sup) * (1.0 - 1e-9) } else { f64::INFINITY };
    let mut h = cap;
    let mut binding = "cap";
    for (v, name) in [(h0, "orientation"), (h1, "local"), (h3, "clearance")] {
        if v < h {
            h = v;
            binding = name;
        }
    }
    if !(h > 0.0) {
        return Err(RodError::Degeneracy("tubular thickness collapsed to zero".into()));
    }
    let certificate = verify_strip(y, b, h, delta, gamma, alpha, DEFAULT_SAMPLES, seed);
    Ok(StripMap {
        h,
        h0,
        h1,
        h3,
        gamma,
        alpha,
        delta,
        binding,
        b_sup,
        b_lip,
        field: b.clone(),
        certificate,
        y: y.clone(),
    })
}

impl StripMap {
    /// The same map and bounds at another thickness.
    pub fn recertify(&self, h: f64, seed: u64) -> StripCertificate {
        verify_strip(&self.y, &self.field, h, self.delta, self.gamma, self.alpha, DEFAULT_SAMPLES, seed)
    }

    pub fn boundary(&self) -> Vec<Vec2> {
        strip_boundary(&self.y, &self.field, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CnVerdict {
    Satisfied,
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct CnReport {
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: CnVerdict,
}

/// Parametric length against the length of the image.
pub fn ciarlet_necas_1d_check(y: &PolylineCurve) -> CnReport {
    let lhs = y.length();
    let rhs = image_length(y);
    let verdict = if lhs <= rhs + 1e-12 * lhs.max(1.0) { CnVerdict::Satisfied } else { CnVerdict::Violated };
    CnReport { lhs, rhs, verdict }
}
