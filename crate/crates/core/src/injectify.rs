//! Injective piecewise-affine approximation through a good arrival grid.

use rand::Rng;
use serde::Serialize;

use crate::curve::{c0_distance, sobolev_distance, sobolev_parts, PolylineCurve, Vec2};
use crate::error::{Result, RodError};
use crate::exact::{q, q_to_f64, Q};
use crate::fixtures;
use crate::geometry::{self_intersections, IntersectionReport};
use crate::witness::{find_injective_witness, WitnessStatus};

const MARGIN: f64 = 0.1;

/// Axis-aligned grid inside the square Q(0,L). `xs` are the abscissae of
/// the vertical lines, `ys` the ordinates of the horizontal ones; both start
/// at -L and end at L.
#[derive(Debug, Clone, Serialize)]
pub struct ArrivalGrid {
    pub l: f64,
    pub delta: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl ArrivalGrid {
    fn lines(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.xs,
            Axis::Y => &self.ys,
        }
    }

    /// Distance from p to the nearest grid line of either family.
    pub fn distance(&self, p: Vec2) -> f64 {
        nearest_gap(&self.xs, p.x).min(nearest_gap(&self.ys, p.y))
    }

    /// Cell [xs[i], xs[i+1]] x [ys[j], ys[j+1]] containing p (closed, lower
    /// index on ties).
    pub fn cell(&self, p: Vec2) -> (usize, usize) {
        let f = |w: &[f64], x: f64| w.partition_point(|&v| v < x).clamp(1, w.len() - 1) - 1;
        (f(&self.xs, p.x), f(&self.ys, p.y))
    }

    pub fn cell_contains(&self, cell: (usize, usize), p: Vec2) -> bool {
        let (i, j) = cell;
        self.xs[i] <= p.x && p.x <= self.xs[i + 1] && self.ys[j] <= p.y && p.y <= self.ys[j + 1]
    }
}

fn nearest_gap(w: &[f64], x: f64) -> f64 {
    let k = w.partition_point(|&v| v < x);
    let mut d = f64::INFINITY;
    if k < w.len() {
        d = d.min(w[k] - x);
    }
    if k > 0 {
        d = d.min(x - w[k - 1]);
    }
    d
}

/// Orientation of the grid line a crossing lies on: `X` for a vertical line
/// x = const, `Y` for a horizontal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn coord(self, p: Vec2) -> f64 {
        match self {
            Axis::X => p.x,
            Axis::Y => p.y,
        }
    }

    fn unit(self) -> Vec2 {
        match self {
            Axis::X => Vec2::new(1.0, 0.0),
            Axis::Y => Vec2::new(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingDatum {
    pub t: f64,
    pub segment: usize,
    pub axis: Axis,
    pub line: usize,
    pub z: Vec2,
    #[serde(skip)]
    t_exact: Q,
    #[serde(skip)]
    z_exact: (Q, Q),
    pub n_t: Vec2,
    /// |<phi'(t), n_t>| on the incident segment.
    pub speed: f64,
    pub v: f64,
    pub eta: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub tilde_t_minus: f64,
    pub tilde_t_plus: f64,
}

impl CrossingDatum {
    fn same_image(&self, other: &CrossingDatum) -> bool {
        self.z == other.z && self.z_exact == other.z_exact
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Radii {
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub epsilon3: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub epsilon_tilde: f64,
}

fn validate(curve: &PolylineCurve, delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(RodError::Precondition(format!("delta must be positive, got {delta}")));
    }
    let v0 = curve.vertices()[0];
    if curve.vertices().iter().all(|v| *v == v0) {
        return Err(RodError::DegenerateInput("curve is constant".into()));
    }
    Ok(())
}

/// Picks one coordinate per interval of length <= delta/2, at the centre of
/// the widest gap between forbidden values. With `jitter` the split point is
/// drawn from the middle of the gap instead.
fn choose_lines(l: f64, delta: f64, forbidden: &mut Vec<f64>, jitter: Option<&mut rand_chacha::ChaCha8Rng>) -> Vec<f64> {
    forbidden.sort_by(f64::total_cmp);
    forbidden.dedup();
    let m = ((4.0 * l / delta).ceil() as usize).max(1);
    let len = 2.0 * l / m as f64;
    let mut out = vec![-l];
    let mut rng = jitter;
    for n in 0..m {
        let a = -l + n as f64 * len;
        let b = if n + 1 == m { l } else { -l + (n + 1) as f64 * len };
        let lo = forbidden.partition_point(|&v| v <= a);
        let hi = forbidden.partition_point(|&v| v < b);
        let mut pts = vec![a];
        pts.extend_from_slice(&forbidden[lo..hi]);
        pts.push(b);
        let (mut ga, mut gb) = (a, a);
        for w in pts.windows(2) {
            if w[1] - w[0] > gb - ga {
                ga = w[0];
                gb = w[1];
            }
        }
        let frac = match rng.as_deref_mut() {
            Some(r) => 0.35 + 0.3 * r.gen::<f64>(),
            None => 0.5,
        };
        let w = ga + frac * (gb - ga);
        out.push(w);
    }
    out.push(l);
    out
}

struct RawCrossing {
    t: Q,
    segment: usize,
    axis: Axis,
    line: usize,
    other: Q,
}

/// Exact intersections of the curve with the lines of one family, excluding
/// the bounding lines.
fn raw_crossings(curve: &PolylineCurve, lines: &[f64], axis: Axis) -> Vec<RawCrossing> {
    let bp = curve.breakpoints();
    let mut out = Vec::new();
    for j in 0..curve.num_segments() {
        let (a, b) = curve.segment(j);
        let (ca, cb) = (axis.coord(a), axis.coord(b));
        if ca == cb {
            continue;
        }
        let (lo, hi) = if ca < cb { (ca, cb) } else { (cb, ca) };
        let k0 = lines.partition_point(|&w| w <= lo).max(1);
        let k1 = lines.partition_point(|&w| w < hi).min(lines.len() - 1);
        if k0 >= k1 {
            continue;
        }
        let (qa, qb) = (q(ca), q(cb));
        let (oa, ob) = match axis {
            Axis::X => (q(a.y), q(b.y)),
            Axis::Y => (q(a.x), q(b.x)),
        };
        let (t0, t1) = (q(bp[j]), q(bp[j + 1]));
        for (k, &w) in lines.iter().enumerate().take(k1).skip(k0) {
            if w == ca || w == cb {
                continue;
            }
            let s = (q(w) - &qa) / (&qb - &qa);
            let other = &oa + &s * (&ob - &oa);
            let t = &t0 + &s * (&t1 - &t0);
            out.push(RawCrossing { t, segment: j, axis, line: k, other });
        }
    }
    out
}

fn hits_line(lines: &[f64], x: &Q) -> bool {
    let xf = q_to_f64(x);
    let k = lines.partition_point(|&w| w < xf);
    (k.saturating_sub(1)..(k + 2).min(lines.len())).any(|i| q(lines[i]) == *x)
}

fn grid_violation(curve: &PolylineCurve, grid: &ArrivalGrid) -> Option<String> {
    let bp = curve.breakpoints();
    for (j, v) in curve.vertices().iter().enumerate() {
        if grid.xs.contains(&v.x) || grid.ys.contains(&v.y) {
            return Some(format!("vertex {j} at t={} lies on the grid", bp[j]));
        }
    }
    for c in raw_crossings(curve, &grid.xs, Axis::X) {
        if hits_line(&grid.ys, &c.other) {
            return Some(format!("crossing at t={} is a grid cross point", q_to_f64(&c.t)));
        }
    }
    None
}

/// Builds a delta-fine good arrival grid for a polyline. Vertical lines avoid
/// all vertex and self-intersection coordinates; horizontal lines additionally avoid the ordinates
/// where the curve meets the vertical lines, so no crossing is a corner.
pub fn build_good_arrival_grid(curve: &PolylineCurve, delta: f64) -> Result<ArrivalGrid> {
    validate(curve, delta)?;
    let vmax = curve.vertices().iter().map(|v| v.x.abs().max(v.y.abs())).fold(0.0, f64::max);
    let l = vmax + delta / 4.0;
    let mut base: Vec<f64> = curve.vertices().iter().flat_map(|v| [v.x, v.y]).collect();
    for v in self_intersections(curve).violations {
        let w = v.witness_f64();
        base.extend([w.x, w.y]);
    }
    let mut rng = fixtures::rng(0x9e37);
    for attempt in 0..8 {
        let jitter = if attempt == 0 { None } else { Some(&mut rng) };
        let mut fx = base.clone();
        let (xs, jitter) = match jitter {
            None => (choose_lines(l, delta, &mut fx, None), None),
            Some(r) => (choose_lines(l, delta, &mut fx, Some(&mut *r)), Some(r)),
        };
        let mut fy = base.clone();
        fy.extend(raw_crossings(curve, &xs, Axis::X).iter().map(|c| q_to_f64(&c.other)));
        let ys = choose_lines(l, delta, &mut fy, jitter);
        let grid = ArrivalGrid { l, delta, xs, ys };
        if grid_violation(curve, &grid).is_none() {
            return Ok(grid);
        }
    }
    Err(RodError::GridInvalid("no valid grid after 8 re-seeded attempts".into()))
}

/// All parameters where the curve meets the grid, sorted, with the
/// transversality data of each crossing.
pub fn crossing_set(curve: &PolylineCurve, grid: &ArrivalGrid) -> Result<Vec<CrossingDatum>> {
    if let Some(msg) = grid_violation(curve, grid) {
        return Err(RodError::GridInvalid(msg));
    }
    let mut raw = raw_crossings(curve, &grid.xs, Axis::X);
    raw.extend(raw_crossings(curve, &grid.ys, Axis::Y));
    raw.sort_by(|a, b| a.t.cmp(&b.t));
    let bp = curve.breakpoints();
    let mut out: Vec<CrossingDatum> = raw
        .into_iter()
        .map(|c| {
            let w = grid.lines(c.axis)[c.line];
            let z_exact = match c.axis {
                Axis::X => (q(w), c.other.clone()),
                Axis::Y => (c.other.clone(), q(w)),
            };
            let z = Vec2::new(q_to_f64(&z_exact.0), q_to_f64(&z_exact.1));
            let slope = curve.slope(c.segment);
            let e = c.axis.unit();
            let dn = slope.dot(&e);
            let n_t = if dn > 0.0 { e } else { -e };
            CrossingDatum {
                t: q_to_f64(&c.t),
                segment: c.segment,
                axis: c.axis,
                line: c.line,
                z,
                t_exact: c.t,
                z_exact,
                n_t,
                speed: dn.abs(),
                v: (1.0 - MARGIN) * dn.abs(),
                eta: 0.0,
                t_minus: f64::NAN,
                t_plus: f64::NAN,
                tilde_t_minus: f64::NAN,
                tilde_t_plus: f64::NAN,
            }
        })
        .collect();
    for k in 0..out.len() {
        if out[k].speed == 0.0 {
            return Err(RodError::GridInvalid(format!("tangential crossing at t={}", out[k].t)));
        }
        if k > 0 && out[k - 1].t_exact == out[k].t_exact {
            return Err(RodError::GridInvalid(format!("crossing at t={} is a grid cross point", out[k].t)));
        }
        let j = out[k].segment;
        let t = out[k].t;
        let mut eta = (t - bp[j]).min(bp[j + 1] - t);
        if k > 0 {
            eta = eta.min(0.5 * (t - out[k - 1].t));
        }
        if k + 1 < out.len() {
            eta = eta.min(0.5 * (out[k + 1].t - t));
        }
        out[k].eta = (1.0 - MARGIN) * eta;
    }
    Ok(out)
}

fn exact_distance(a: &CrossingDatum, b: &CrossingDatum) -> f64 {
    let d = (a.z - b.z).norm();
    if d > 0.0 {
        return d;
    }
    let dx = q_to_f64(&(&a.z_exact.0 - &b.z_exact.0));
    let dy = q_to_f64(&(&a.z_exact.1 - &b.z_exact.1));
    dx.hypot(dy)
}

/// Smallest distance between crossing images that differ.
fn min_distinct_distance(cr: &[CrossingDatum]) -> f64 {
    let mut idx: Vec<usize> = (0..cr.len()).collect();
    idx.sort_by(|&a, &b| cr[a].z.x.total_cmp(&cr[b].z.x));
    let mut best = f64::INFINITY;
    for a in 0..idx.len() {
        for &jb in &idx[a + 1..] {
            let (p, r) = (&cr[idx[a]], &cr[jb]);
            if r.z.x - p.z.x > best {
                break;
            }
            if p.same_image(r) {
                continue;
            }
            best = best.min(exact_distance(p, r));
        }
    }
    best
}

/// The epsilon chain of the construction; also fills t_minus / t_plus.
pub fn neighborhood_radii(curve: &PolylineCurve, grid: &ArrivalGrid, crossings: &mut [CrossingDatum], p: f64) -> Result<Radii> {
    if crossings.is_empty() {
        return Err(RodError::Precondition("empty crossing set".into()));
    }
    if !(p >= 1.0) {
        return Err(RodError::Precondition(format!("exponent p must be >= 1, got {p}")));
    }
    let delta = grid.delta;
    let nf = crossings.len() as f64;
    let mut eps1 = f64::INFINITY;
    let mut line_gap = f64::INFINITY;
    for c in crossings.iter() {
        let (own, other) = match c.axis {
            Axis::X => (&grid.xs, &grid.ys),
            Axis::Y => (&grid.ys, &grid.xs),
        };
        let along = match c.axis {
            Axis::X => c.z.y,
            Axis::Y => c.z.x,
        };
        eps1 = eps1.min(nearest_gap(other, along));
        line_gap = line_gap.min(own[c.line] - own[c.line - 1]).min(own[c.line + 1] - own[c.line]);
    }
    let dmin = min_distinct_distance(crossings);
    let eps2 = eps1.min(dmin).min(0.5 * line_gap);
    let etav = crossings.iter().map(|c| c.eta * c.v).fold(f64::INFINITY, f64::min);
    let eps3 = 0.5 * eps2.min(etav);
    let dt = crossings.windows(2).map(|w| w[1].t - w[0].t).fold(f64::INFINITY, f64::min);
    let nu_a = delta * dmin / 4.0;
    let nu_b = if dt.is_finite() { (delta * dt.powf(p - 1.0) / nf).powf(1.0 / p) } else { f64::INFINITY };
    let nu = 0.5 * nu_a.min(nu_b);
    let eps = 0.5 * eps3.min(nu).min(delta / nf);
    if !(eps > 0.0) || !eps.is_finite() {
        let culprit = crossings
            .windows(2)
            .find(|w| w[0].same_image(&w[1]))
            .map(|w| format!(" (crossings t={} and t={})", w[0].t, w[1].t))
            .unwrap_or_default();
        return Err(RodError::Degeneracy(format!("ball radius collapsed to {eps}{culprit}")));
    }
    for c in crossings.iter_mut() {
        let s = curve.slope(c.segment).norm();
        c.t_minus = c.t - eps / s;
        c.t_plus = c.t + eps / s;
    }
    let mut far = f64::INFINITY;
    for v in curve.vertices() {
        far = far.min(grid.distance(*v));
    }
    for c in crossings.iter() {
        far = far.min(grid.distance(curve.eval_unchecked(c.t_minus)));
        far = far.min(grid.distance(curve.eval_unchecked(c.t_plus)));
    }
    if !(far > 0.0) {
        return Err(RodError::Degeneracy(format!("curve outside the balls touches the grid (epsilon = {eps:.3e})")));
    }
    Ok(Radii { epsilon1: eps1, epsilon2: eps2, epsilon3: eps3, nu, epsilon: eps, epsilon_tilde: 0.5 * far })
}

/// Distance of the whole curve from the grid, halved; the witness tolerance
/// when the curve never meets the grid.
fn free_clearance(curve: &PolylineCurve, grid: &ArrivalGrid) -> f64 {
    0.5 * curve.vertices().iter().map(|v| grid.distance(*v)).fold(f64::INFINITY, f64::min)
}

/// Smallest (first = true) or largest parameter in [lo, hi] where the
/// witness lies on the circle |x - z| = r.
fn circle_hit(w: &PolylineCurve, lo: f64, hi: f64, z: Vec2, r: f64, first: bool) -> Option<(f64, Vec2)> {
    let bp = w.breakpoints();
    let j0 = w.segment_index(lo);
    let j1 = w.segment_index(hi);
    let order: Vec<usize> = if first { (j0..=j1).collect() } else { (j0..=j1).rev().collect() };
    for j in order {
        let (t0, t1) = (bp[j], bp[j + 1]);
        let (a, b) = w.segment(j);
        let d = b - a;
        let f = a - z;
        let qa = d.norm_squared();
        if qa == 0.0 {
            continue;
        }
        let qb = f.dot(&d);
        let qc = f.norm_squared() - r * r;
        let disc = qb * qb - qa * qc;
        if disc < 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        let mut roots = [(-qb - sq) / qa, (-qb + sq) / qa];
        if !first {
            roots.reverse();
        }
        for u in roots {
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            let t = t0 + u * (t1 - t0);
            if t >= lo && t <= hi {
                return Some((t, a + d * u));
            }
        }
    }
    None
}

/// Replaces the witness inside each ball B(z, epsilon) by the two segments
/// through the point where its chord meets the grid (phi-hat). Where the
/// witness runs along the curve's own affine piece through the ball the chord
/// is that piece and the witness is kept. Fills the tilde parameters of each
/// crossing.
pub fn tear_on_grid(
    curve: &PolylineCurve,
    witness: &PolylineCurve,
    grid: &ArrivalGrid,
    crossings: &mut [CrossingDatum],
    radii: &Radii,
) -> Result<(PolylineCurve, Vec<Vec2>)> {
    let gap = c0_distance(witness, curve);
    if !(gap < radii.epsilon_tilde) {
        return Err(RodError::Precondition(format!(
            "witness is {gap:.3e} from the curve; must be below epsilon_tilde = {:.3e}",
            radii.epsilon_tilde
        )));
    }
    let eps = radii.epsilon;
    let mut hats = Vec::with_capacity(crossings.len());
    let mut ends = Vec::with_capacity(crossings.len());
    let mut keep = Vec::with_capacity(crossings.len());
    for c in crossings.iter_mut() {
        let (lo, hi) = (c.t - c.eta, c.t + c.eta);
        let Some((tm, pm)) = circle_hit(witness, lo, c.t, c.z, eps, true) else {
            return Err(RodError::Construction(format!("witness does not enter the ball at t={}", c.t)));
        };
        let Some((tp, pp)) = circle_hit(witness, c.t, hi, c.z, eps, false) else {
            return Err(RodError::Construction(format!("witness does not leave the ball at t={}", c.t)));
        };
        if !(tm < c.t && c.t < tp) {
            return Err(RodError::Construction(format!("ball parameters out of order at t={}", c.t)));
        }
        let w = grid.lines(c.axis)[c.line];
        let (am, ap) = (c.axis.coord(pm) - w, c.axis.coord(pp) - w);
        if !(am * ap < 0.0) {
            return Err(RodError::Construction(format!(
                "chord in the ball at t={} does not cross the grid exactly once",
                c.t
            )));
        }
        let u = am / (am - ap);
        let h = match c.axis {
            Axis::X => Vec2::new(w, pm.y + u * (pp.y - pm.y)),
            Axis::Y => Vec2::new(pm.x + u * (pp.x - pm.x), w),
        };
        c.tilde_t_minus = tm;
        c.tilde_t_plus = tp;
        let jw = witness.segment_index(tm);
        let untouched = jw == witness.segment_index(tp)
            && witness.segment(jw) == curve.segment(c.segment)
            && witness.breakpoints()[jw] == curve.breakpoints()[c.segment]
            && witness.breakpoints()[jw + 1] == curve.breakpoints()[c.segment + 1];
        hats.push(if untouched { c.z } else { h });
        ends.push((pm, pp));
        keep.push(untouched);
    }
    let wb = witness.breakpoints();
    let wv = witness.vertices();
    let mut bp = Vec::new();
    let mut vs = Vec::new();
    let mut k = 0;
    for (i, c) in crossings.iter().enumerate() {
        if keep[i] {
            continue;
        }
        while k < wb.len() && wb[k] < c.tilde_t_minus {
            bp.push(wb[k]);
            vs.push(wv[k]);
            k += 1;
        }
        while k < wb.len() && wb[k] <= c.tilde_t_plus {
            k += 1;
        }
        bp.extend([c.tilde_t_minus, c.t, c.tilde_t_plus]);
        vs.extend([ends[i].0, hats[i], ends[i].1]);
    }
    bp.extend_from_slice(&wb[k..]);
    vs.extend_from_slice(&wv[k..]);
    let hat = PolylineCurve::new(bp, vs)?;
    let rep = self_intersections(&hat);
    if !rep.is_injective {
        return Err(RodError::Construction(format!("torn curve is not injective: {}", describe(&rep))));
    }
    Ok((hat, hats))
}

fn describe(rep: &IntersectionReport) -> String {
    match rep.violations.first() {
        Some(v) => format!("segments {} and {} ({:?})", v.i, v.j, v.kind),
        None => "none".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectifyMode {
    /// phi_delta is the torn witness itself; it keeps every vertex of the
    /// witness between the balls.
    Anchored,
    /// phi_delta interpolates the torn witness at the crossings only, with
    /// generalized segments on same-side pairs.
    Chord,
}

#[derive(Debug, Clone)]
pub struct InjectifyOptions {
    pub mode: InjectifyMode,
    pub alpha: f64,
    pub xi_halvings: usize,
    pub witness_budget: usize,
}

impl Default for InjectifyOptions {
    fn default() -> Self {
        Self { mode: InjectifyMode::Anchored, alpha: 0.125, xi_halvings: 40, witness_budget: crate::witness::DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairEnergy {
    pub t1: f64,
    pub t2: f64,
    pub distinct_images: bool,
    pub input: f64,
    pub output: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct L1Bounds {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub r: f64,
    pub applicable: bool,
    pub bound: f64,
    pub measured: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InjectifyCertificate {
    pub mode: InjectifyMode,
    pub delta: f64,
    pub p: f64,
    pub grid_lines: [usize; 2],
    pub crossings: usize,
    pub radii: Option<Radii>,
    pub eta: f64,
    pub v: f64,
    pub xi: Option<f64>,
    /// Parameter intervals carried by generalized segments (chord mode).
    pub generalized_segments: Vec<[f64; 2]>,
    pub witness_c0: f64,
    pub w1p_error: f64,
    pub c0_error: f64,
    pub energy_input: f64,
    pub energy_output: f64,
    pub energy_ratio: f64,
    pub c: f64,
    pub injective: bool,
    pub pairs: Vec<PairEnergy>,
    pub l1: L1Bounds,
}

/// Integral of |c'|^p over [a, b].
pub fn energy_between(c: &PolylineCurve, a: f64, b: f64, p: f64) -> f64 {
    let bp = c.breakpoints();
    let mut s = 0.0;
    for j in c.segment_index(a)..c.num_segments() {
        let lo = bp[j].max(a);
        let hi = bp[j + 1].min(b);
        if hi > lo {
            s += c.slope(j).norm().powf(p) * (hi - lo);
        }
        if bp[j + 1] >= b {
            break;
        }
    }
    s
}

fn inward(grid: &ArrivalGrid, c: &CrossingDatum, interior: Vec2) -> Vec2 {
    let w = grid.lines(c.axis)[c.line];
    let s = if c.axis.coord(interior) > w { 1.0 } else { -1.0 };
    c.axis.unit() * s
}

enum End {
    Direct,
    Stub(f64),
}

fn chord_curve(
    curve: &PolylineCurve,
    hat: &PolylineCurve,
    grid: &ArrivalGrid,
    cr: &[CrossingDatum],
    hats: &[Vec2],
    xi: f64,
    ends: (&End, &End),
) -> Result<(PolylineCurve, Vec<usize>, Vec<usize>)> {
    let n = cr.len();
    let mut bp = vec![0.0];
    let mut vs = vec![match ends.0 {
        End::Direct => curve.vertices()[0],
        End::Stub(s) => hats[0] + inward(grid, &cr[0], hat.eval_unchecked(0.5 * cr[0].t)) * *s,
    }];
    let mut tents = Vec::new();
    let mut tent_segments = Vec::new();
    for i in 0..n {
        bp.push(cr[i].t);
        vs.push(hats[i]);
        if i + 1 < n && cr[i].axis == cr[i + 1].axis && cr[i].line == cr[i + 1].line {
            let (x, y) = (hats[i], hats[i + 1]);
            let tm = 0.5 * (cr[i].t + cr[i + 1].t);
            let dir = inward(grid, &cr[i], hat.eval_unchecked(tm));
            tent_segments.push(vs.len() - 1);
            bp.push(tm);
            vs.push((x + y) * 0.5 + dir * (xi * (x - y).norm() / 2.0));
            tents.push(i);
        }
    }
    let last = n - 1;
    bp.push(1.0);
    vs.push(match ends.1 {
        End::Direct => *curve.vertices().last().unwrap(),
        End::Stub(s) => hats[last] + inward(grid, &cr[last], hat.eval_unchecked(0.5 * (cr[last].t + 1.0))) * *s,
    });
    Ok((PolylineCurve::new(bp, vs)?, tents, tent_segments))
}

struct Prepared {
    grid: ArrivalGrid,
    crossings: Vec<CrossingDatum>,
    radii: Option<Radii>,
    tolerance: f64,
}

fn prepare(curve: &PolylineCurve, delta: f64, p: f64) -> Result<Prepared> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(RodError::Precondition(format!("exponent p must be >= 1, got {p}")));
    }
    let grid = build_good_arrival_grid(curve, delta)?;
    let mut crossings = crossing_set(curve, &grid)?;
    if crossings.is_empty() {
        let tolerance = free_clearance(curve, &grid);
        return Ok(Prepared { grid, crossings, radii: None, tolerance });
    }
    let radii = neighborhood_radii(curve, &grid, &mut crossings, p)?;
    Ok(Prepared { tolerance: radii.epsilon_tilde, grid, crossings, radii: Some(radii) })
}

/// Runs the construction with an explicit injective witness.
pub fn pl_injectify(
    curve: &PolylineCurve,
    witness: &PolylineCurve,
    delta: f64,
    p: f64,
    opts: &InjectifyOptions,
) -> Result<(PolylineCurve, InjectifyCertificate)> {
    let prep = prepare(curve, delta, p)?;
    run(curve, witness, prep, delta, p, opts)
}

/// Witness tolerance used by [`injectify`]: epsilon_tilde / 2, tightened to
/// delta^2 epsilon_tilde so the tear's speed distortion (of order
/// witness offset / epsilon) vanishes with delta.
pub fn witness_tolerance(epsilon_tilde: f64, delta: f64) -> f64 {
    (0.5 * epsilon_tilde).min(delta * delta * epsilon_tilde)
}

/// Obtains a witness by the local-repair search, then runs the construction.
pub fn injectify(curve: &PolylineCurve, delta: f64, p: f64, opts: &InjectifyOptions) -> Result<(PolylineCurve, InjectifyCertificate)> {
    let prep = prepare(curve, delta, p)?;
    let tol = witness_tolerance(prep.tolerance, delta);
    if !(tol > 0.0) {
        return Err(RodError::Degeneracy("witness tolerance collapsed to zero".into()));
    }
    let wr = find_injective_witness(curve, tol, opts.witness_budget);
    let witness = match (wr.status, wr.witness) {
        (WitnessStatus::WitnessFound, Some(w)) => w,
        (WitnessStatus::InterpenetrationDetected, _) => {
            let at = wr.crossing.map(|c| format!(" at ({}, {})", c.x, c.y)).unwrap_or_default();
            return Err(RodError::Precondition(format!("curve is interpenetrative: certified crossing{at}")));
        }
        _ => {
            return Err(RodError::Precondition(format!(
                "no injective witness within {:.3e} after {} attempts",
                tol,
                wr.attempts
            )))
        }
    };
    run(curve, &witness, prep, delta, p, opts)
}

fn run(
    curve: &PolylineCurve,
    witness: &PolylineCurve,
    prep: Prepared,
    delta: f64,
    p: f64,
    opts: &InjectifyOptions,
) -> Result<(PolylineCurve, InjectifyCertificate)> {
    let Prepared { grid, mut crossings, radii, tolerance } = prep;
    if !self_intersections(witness).is_injective {
        return Err(RodError::Precondition("witness is not injective".into()));
    }
    let witness_c0 = c0_distance(witness, curve);
    let mut generalized = Vec::new();
    let (out, xi) = match radii {
        None => {
            if !(witness_c0 < tolerance) {
                return Err(RodError::Precondition(format!(
                    "witness is {witness_c0:.3e} from the curve; must be below {tolerance:.3e}"
                )));
            }
            (witness.clone(), None)
        }
        Some(r) => {
            let (hat, hats) = tear_on_grid(curve, witness, &grid, &mut crossings, &r)?;
            match opts.mode {
                InjectifyMode::Anchored => (hat, None),
                InjectifyMode::Chord => {
                    let (c, xi, tents) = chord_mode(curve, &hat, &grid, &crossings, &hats, &r, delta, opts)?;
                    generalized = tents;
                    (c, Some(xi))
                }
            }
        }
    };
    let injective = self_intersections(&out).is_injective;
    if !injective {
        return Err(RodError::Construction("output failed the exact injectivity check".into()));
    }
    let ein = curve.energy_p(p);
    let eout = out.energy_p(p);
    let growth = (1.0 + delta).powf(2.0 * p);
    let pairs: Vec<PairEnergy> = crossings
        .windows(2)
        .map(|w| {
            let (t1, t2) = (w[0].t, w[1].t);
            let distinct = !w[0].same_image(&w[1]);
            let input = energy_between(curve, t1, t2, p);
            let eta = w[0].eta.max(w[1].eta);
            let bound = if distinct {
                growth * input
            } else {
                (4.0 * (1.0 + delta)).powf(p) * (t2 - t1).powf(1.0 - p) * eta.powf(p)
            };
            PairEnergy { t1, t2, distinct_images: distinct, input, output: energy_between(&out, t1, t2, p), bound }
        })
        .collect();
    let c = (eout - growth * ein).max(0.0) / delta;
    let l1 = l1_bounds(curve, &out, delta, opts.alpha);
    let cert = InjectifyCertificate {
        mode: opts.mode,
        delta,
        p,
        grid_lines: [grid.xs.len(), grid.ys.len()],
        crossings: crossings.len(),
        radii,
        eta: crossings.iter().map(|c| c.eta).fold(f64::INFINITY, f64::min),
        v: crossings.iter().map(|c| c.v).fold(f64::INFINITY, f64::min),
        xi,
        generalized_segments: generalized,
        witness_c0,
        w1p_error: sobolev_distance(&out, curve, p),
        c0_error: c0_distance(&out, curve),
        energy_input: ein,
        energy_output: eout,
        energy_ratio: if ein > 0.0 { eout / ein } else { f64::INFINITY },
        c,
        injective,
        pairs,
        l1,
    };
    Ok((out, cert))
}

#[allow(clippy::too_many_arguments)]
fn chord_mode(
    curve: &PolylineCurve,
    hat: &PolylineCurve,
    grid: &ArrivalGrid,
    cr: &[CrossingDatum],
    hats: &[Vec2],
    radii: &Radii,
    delta: f64,
    opts: &InjectifyOptions,
) -> Result<(PolylineCurve, f64, Vec<[f64; 2]>)> {
    let mut xi = 0.5 * delta / cr.len() as f64;
    let mut first = End::Direct;
    let mut last = End::Direct;
    let mut report = String::new();
    for _ in 0..=opts.xi_halvings {
        let (c, tents, tent_segments) = chord_curve(curve, hat, grid, cr, hats, xi, (&first, &last))?;
        let rep = self_intersections(&c);
        if rep.is_injective {
            return Ok((c, xi, tents.iter().map(|&i| [cr[i].t, cr[i + 1].t]).collect()));
        }
        let m = c.num_segments();
        let touches = |s: usize| rep.violations.iter().any(|v| v.i == s || v.j == s);
        let mut moved = false;
        if touches(0) {
            first = match first {
                End::Direct => End::Stub(0.5 * radii.epsilon),
                End::Stub(s) => End::Stub(0.5 * s),
            };
            moved = true;
        }
        if touches(m - 1) {
            last = match last {
                End::Direct => End::Stub(0.5 * radii.epsilon),
                End::Stub(s) => End::Stub(0.5 * s),
            };
            moved = true;
        }
        let tent_hit = tent_segments.iter().any(|&s| touches(s) || touches(s + 1));
        if tent_hit || !moved {
            xi *= 0.5;
        }
        report = describe(&rep);
    }
    Err(RodError::Construction(format!("generalized-segment parameter exhausted; blocking pair {report}")))
}

/// Lebesgue-point parameters of the W^{1,1} argument and the resulting
/// bound on the derivative error, with the measured value.
pub fn l1_bounds(curve: &PolylineCurve, out: &PolylineCurve, delta: f64, alpha: f64) -> L1Bounds {
    let bp = curve.breakpoints();
    let m = curve.num_segments();
    let mut pieces: Vec<(f64, f64)> = (0..m).map(|j| (curve.slope(j).norm(), bp[j + 1] - bp[j])).collect();
    pieces.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut beta = 0.0;
    let mut acc = 0.0;
    for &(s, len) in &pieces {
        if acc + s * len >= alpha {
            beta += if s > 0.0 { (alpha - acc) / s } else { len };
            acc = alpha;
            break;
        }
        acc += s * len;
        beta += len;
    }
    if acc < alpha {
        beta = 1.0;
    }
    let jumps = (1..m).filter(|&j| curve.slope(j) != curve.slope(j - 1)).count() as f64 + 1.0;
    let mut best: Option<(f64, f64)> = None;
    for a in 1..=30 {
        let lambda = alpha * 0.5f64.powi(a);
        let slow: f64 = (0..m)
            .filter(|&j| {
                let s = curve.slope(j).norm();
                s > 0.0 && s <= lambda
            })
            .map(|j| bp[j + 1] - bp[j])
            .sum();
        for b in 1..=30 {
            let r = alpha * 0.5f64.powi(b);
            if slow + 2.0 * r * jumps < beta {
                if best.map_or(true, |(l0, r0)| lambda * r > l0 * r0) {
                    best = Some((lambda, r));
                }
                break;
            }
        }
    }
    let (lambda, r) = best.unwrap_or((0.0, 0.0));
    let c = 1.0 + (1.0 + delta).powi(2);
    let bound = c * alpha + alpha / 8.0 + alpha / 4.0 + 8.0 * delta + 2.0 * delta * curve.sup_norm();
    let (_, measured) = sobolev_parts(out, curve, 1.0);
    L1Bounds { alpha, beta, lambda, r, applicable: delta < lambda * r / 8.0, bound, measured }
}
