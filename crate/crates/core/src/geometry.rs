use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{PolylineCurve, Vec2};
use crate::error::{Result, RodError};
use crate::exact::{self, classify, on_segment, orient, q, qpt, rational_string, SegHit, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    TransversalCrossing,
    Overlap,
    VertexTouch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub kind: ViolationKind,
    pub witness: (Q, Q),
}

impl Violation {
    pub fn witness_f64(&self) -> Vec2 {
        Vec2::new(exact::q_to_f64(&self.witness.0), exact::q_to_f64(&self.witness.1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionReport {
    pub is_injective: bool,
    pub violations: Vec<Violation>,
}

#[derive(Serialize)]
struct ViolationJson {
    segments: [usize; 2],
    kind: ViolationKind,
    witness: [String; 2],
}

#[derive(Serialize)]
struct ReportJson {
    is_injective: bool,
    violations: Vec<ViolationJson>,
}

impl IntersectionReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        let r = ReportJson {
            is_injective: self.is_injective,
            violations: self
                .violations
                .iter()
                .map(|v| ViolationJson {
                    segments: [v.i, v.j],
                    kind: v.kind,
                    witness: [rational_string(&v.witness.0), rational_string(&v.witness.1)],
                })
                .collect(),
        };
        serde_json::to_value(r).expect("report serialization")
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

fn consecutive(i: usize, j: usize, m: usize, closed: bool) -> bool {
    j == i + 1 || (closed && m > 2 && i == 0 && j == m - 1)
}

/// Contact between segments i < j, or None when they are disjoint or only
/// share the vertex joining them.
pub fn pair_violation(curve: &PolylineCurve, i: usize, j: usize) -> Option<Violation> {
    let m = curve.num_segments();
    let closed = curve.is_closed();
    let (p1, p2) = curve.segment(i);
    let (q1, q2) = curve.segment(j);
    if p1 == p2 || q1 == q2 {
        return None;
    }
    let hit = classify(p1, p2, q1, q2);
    let adj = consecutive(i, j, m, closed);
    match hit {
        SegHit::None => None,
        SegHit::Proper => Some(Violation {
            i,
            j,
            kind: ViolationKind::TransversalCrossing,
            witness: exact::line_intersection(p1, p2, q1, q2),
        }),
        SegHit::Touch(pt) => {
            if adj {
                let shared = if j == i + 1 { p2 } else { p1 };
                if pt == shared && only_shared(p1, p2, q1, q2, shared) {
                    return None;
                }
                let w = other_contact(p1, p2, q1, q2, shared).unwrap_or(pt);
                Some(Violation { i, j, kind: ViolationKind::VertexTouch, witness: qpt(w) })
            } else {
                Some(Violation { i, j, kind: ViolationKind::VertexTouch, witness: qpt(pt) })
            }
        }
        SegHit::Overlap(pt) => Some(Violation { i, j, kind: ViolationKind::Overlap, witness: qpt(pt) }),
    }
}

/// For adjacent segments meeting at `shared`, true when no other endpoint lies
/// on the opposite segment.
fn only_shared(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2, shared: Vec2) -> bool {
    other_contact(p1, p2, q1, q2, shared).is_none()
}

fn other_contact(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2, shared: Vec2) -> Option<Vec2> {
    for (pt, a, b) in [(q1, p1, p2), (q2, p1, p2), (p1, q1, q2), (p2, q1, q2)] {
        if pt != shared && on_segment(pt, a, b) {
            return Some(pt);
        }
    }
    None
}

fn degenerate_violations(curve: &PolylineCurve) -> Vec<Violation> {
    (0..curve.num_segments())
        .filter_map(|i| {
            let (a, b) = curve.segment(i);
            (a == b).then(|| Violation { i, j: i, kind: ViolationKind::Overlap, witness: qpt(a) })
        })
        .collect()
}

/// Candidate pairs from a sweep over x-extents with a y-extent filter.
fn candidate_pairs(curve: &PolylineCurve) -> Vec<(usize, usize)> {
    let m = curve.num_segments();
    let ext: Vec<(f64, f64, f64, f64)> = (0..m)
        .map(|k| {
            let (a, b) = curve.segment(k);
            (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y))
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ext[a].0.partial_cmp(&ext[b].0).unwrap().then(a.cmp(&b)));
    let mut pairs = Vec::new();
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if ext[b].0 > ext[a].1 {
                break;
            }
            if ext[b].2 <= ext[a].3 && ext[a].2 <= ext[b].3 {
                pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

pub fn self_intersections(curve: &PolylineCurve) -> IntersectionReport {
    let mut violations = degenerate_violations(curve);
    for (i, j) in candidate_pairs(curve) {
        if let Some(v) = pair_violation(curve, i, j) {
            violations.push(v);
        }
    }
    violations.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    IntersectionReport { is_injective: violations.is_empty(), violations }
}

/// All-pairs reference implementation of `self_intersections`.
pub fn self_intersections_brute(curve: &PolylineCurve) -> IntersectionReport {
    let m = curve.num_segments();
    let mut violations = degenerate_violations(curve);
    for i in 0..m {
        for j in i + 1..m {
            if let Some(v) = pair_violation(curve, i, j) {
                violations.push(v);
            }
        }
    }
    violations.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    IntersectionReport { is_injective: violations.is_empty(), violations }
}

pub fn is_injective(curve: &PolylineCurve) -> bool {
    if (0..curve.num_segments()).any(|i| {
        let (a, b) = curve.segment(i);
        a == b
    }) {
        return false;
    }
    candidate_pairs(curve).into_iter().all(|(i, j)| pair_violation(curve, i, j).is_none())
}

/// Exact canonical key (A, B, C) of the line A x + B y + C = 0 through a != b,
/// scaled so the first non-zero of A, B equals 1.
fn line_key(a: Vec2, b: Vec2) -> (Q, Q, Q) {
    let (ax, ay) = qpt(a);
    let (bx, by) = qpt(b);
    let la = &by - &ay;
    let lb = &ax - &bx;
    let lc = -(&la * &ax + &lb * &ay);
    let s = if la != Q::from_integer(0.into()) { la.clone() } else { lb.clone() };
    (la / &s, lb / &s, lc / &s)
}

/// One-dimensional measure of the image set.
pub fn image_length(curve: &PolylineCurve) -> f64 {
    let mut lines: BTreeMap<(Q, Q, Q), Vec<(Vec2, Vec2)>> = BTreeMap::new();
    for k in 0..curve.num_segments() {
        let (a, b) = curve.segment(k);
        if a != b {
            lines.entry(line_key(a, b)).or_default().push((a, b));
        }
    }
    let mut total = 0.0;
    for (key, segs) in lines {
        let vertical = key.0 == q(1.0) && key.1 == q(0.0);
        let k = |p: &Vec2| if vertical { p.y } else { p.x };
        let mut iv: Vec<(Vec2, Vec2)> =
            segs.into_iter().map(|(a, b)| if k(&a) <= k(&b) { (a, b) } else { (b, a) }).collect();
        iv.sort_by(|x, y| k(&x.0).partial_cmp(&k(&y.0)).unwrap());
        let mut cur = iv[0];
        for s in &iv[1..] {
            if k(&s.0) <= k(&cur.1) {
                if k(&s.1) > k(&cur.1) {
                    cur.1 = s.1;
                }
            } else {
                total += (cur.1 - cur.0).norm();
                cur = *s;
            }
        }
        total += (cur.1 - cur.0).norm();
    }
    total
}

/// O(M^2) oracle for [`image_length`]: chop every segment at all vertices
/// lying on it and count each sub-piece once.
pub fn image_length_brute(c: &PolylineCurve) -> f64 {
    let n = c.num_segments();
    let mut pieces: Vec<(Vec2, Vec2)> = Vec::new();
    for k in 0..n {
        let (a, b) = c.segment(k);
        if a == b {
            continue;
        }
        let mut ts: Vec<f64> = vec![0.0, 1.0];
        for p in c.vertices() {
            if crate::exact::on_segment(*p, a, b) {
                let d = b - a;
                ts.push((p - a).dot(&d) / d.norm_squared());
            }
        }
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ts.dedup();
        for w in ts.windows(2) {
            pieces.push((a + (b - a) * w[0], a + (b - a) * w[1]));
        }
    }
    let mut total = 0.0;
    for (idx, (a, b)) in pieces.iter().enumerate() {
        let m = (a + b) * 0.5;
        let dup = pieces[..idx].iter().any(|(c0, c1)| {
            let d = c1 - c0;
            let off = |q: &Vec2| (q - c0).perp(&d).abs() <= 1e-12 * d.norm();
            let s = (m - c0).dot(&d) / d.norm_squared();
            off(a) && off(b) && s > 0.0 && s < 1.0
        });
        if !dup {
            total += (b - a).norm();
        }
    }
    total
}

/// Winding number of a closed curve about `p`, by signed upward/downward
/// edge crossings with exact orientation tests.
pub fn winding_degree(curve: &PolylineCurve, p: Vec2) -> Result<i64> {
    if !curve.is_closed() {
        return Err(RodError::Domain("winding degree needs a closed curve".into()));
    }
    let mut wn = 0i64;
    for k in 0..curve.num_segments() {
        let (a, b) = curve.segment(k);
        if on_segment(p, a, b) {
            return Err(RodError::OnCurve);
        }
        if a.y <= p.y {
            if b.y > p.y && orient(a, b, p) > 0 {
                wn += 1;
            }
        } else if b.y <= p.y && orient(a, b, p) < 0 {
            wn -= 1;
        }
    }
    Ok(wn)
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&d) / l2).clamp(0.0, 1.0);
    (p - (a + d * s)).norm()
}

pub fn distance_to_curve(curve: &PolylineCurve, p: Vec2) -> f64 {
    (0..curve.num_segments())
        .map(|k| {
            let (a, b) = curve.segment(k);
            point_segment_distance(p, a, b)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeMap {
    pub lo: Vec2,
    pub hi: Vec2,
    pub resolution: usize,
    pub band: f64,
    /// Row-major over (y, x) cell centres; None inside the band.
    pub degrees: Vec<Option<i64>>,
}

impl DegreeMap {
    pub fn sample_point(&self, ix: usize, iy: usize) -> Vec2 {
        let n = self.resolution as f64;
        let d = self.hi - self.lo;
        Vec2::new(self.lo.x + d.x * (ix as f64 + 0.5) / n, self.lo.y + d.y * (iy as f64 + 0.5) / n)
    }

    pub fn samples(&self) -> impl Iterator<Item = (Vec2, Option<i64>)> + '_ {
        let n = self.resolution;
        (0..n * n).map(move |k| (self.sample_point(k % n, k / n), self.degrees[k]))
    }

    pub fn defined_values(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.degrees.iter().flatten().cloned().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,degree\n");
        for (p, d) in self.samples() {
            match d {
                Some(d) => out.push_str(&format!("{},{},{}\n", p.x, p.y, d)),
                None => out.push_str(&format!("{},{},NA\n", p.x, p.y)),
            }
        }
        out
    }
}

pub fn degree_map(curve: &PolylineCurve, resolution: usize, band: f64) -> Result<DegreeMap> {
    if !curve.is_closed() {
        return Err(RodError::Domain("degree map needs a closed curve".into()));
    }
    if resolution == 0 {
        return Err(RodError::Domain("resolution must be positive".into()));
    }
    let (lo, hi) = curve.bbox();
    let pad = band + 0.05 * (hi - lo).max();
    let lo = lo - Vec2::new(pad, pad);
    let hi = hi + Vec2::new(pad, pad);
    let mut map = DegreeMap { lo, hi, resolution, band, degrees: Vec::new() };
    let n = resolution;
    let degrees: Result<Vec<Option<i64>>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let p = map.sample_point(k % n, k / n);
            if distance_to_curve(curve, p) <= band {
                return Ok(None);
            }
            match winding_degree(curve, p) {
                Ok(d) => Ok(Some(d)),
                Err(RodError::OnCurve) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    map.degrees = degrees?;
    Ok(map)
}
