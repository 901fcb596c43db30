use serde::Serialize;

use crate::curve::{c0_distance, perp, PolylineCurve, Vec2};
use crate::exact::{det_sign, dot_sign, on_segment};
use crate::geometry::{self_intersections, IntersectionReport, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessStatus {
    WitnessFound,
    InterpenetrationDetected,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct WitnessResult {
    pub status: WitnessStatus,
    pub witness: Option<PolylineCurve>,
    pub c0_gap: f64,
    pub attempts: usize,
    /// Point of the certified crossing, when one was found.
    pub crossing: Option<Vec2>,
}

/// A passage of the curve through a point: the rays to the previous and next
/// vertices, absent at curve ends.
#[derive(Debug, Clone)]
struct Passage {
    rays: Vec<Vec2>,
    segs: (usize, usize),
}

fn passages(curve: &PolylineCurve, p: Vec2) -> Vec<Passage> {
    let vs = curve.vertices();
    let m = curve.num_segments();
    let closed = curve.is_closed();
    let mut out = Vec::new();
    for k in 0..m {
        let (a, b) = curve.segment(k);
        if a == b || !on_segment(p, a, b) {
            continue;
        }
        if p != a && p != b {
            out.push(Passage { rays: vec![a, b], segs: (k, k) });
        }
    }
    for (k, &v) in vs.iter().enumerate() {
        if v != p {
            continue;
        }
        if closed && k == m {
            continue;
        }
        let mut rays = Vec::new();
        let prev = if k > 0 {
            Some(k - 1)
        } else if closed {
            Some(m - 1)
        } else {
            None
        };
        if let Some(pk) = prev {
            if let Some(r) = (0..=pk).rev().map(|i| vs[i]).find(|&w| w != p) {
                rays.push(r);
            }
        }
        if k < m {
            if let Some(r) = vs[k + 1..].iter().cloned().find(|&w| w != p) {
                rays.push(r);
            }
        }
        out.push(Passage { rays, segs: (prev.unwrap_or(k), k.min(m - 1)) });
    }
    out
}

/// Strictly inside the counter-clockwise angular sector from ray r1 to ray r2.
fn in_ccw_sector(p: Vec2, r1: Vec2, r2: Vec2, s: Vec2) -> bool {
    let d12 = det_sign(p, r1, p, r2);
    let d1s = det_sign(p, r1, p, s);
    let ds2 = det_sign(p, s, p, r2);
    match d12 {
        1 => d1s > 0 && ds2 > 0,
        -1 => !(det_sign(p, r2, p, s) >= 0 && det_sign(p, s, p, r1) >= 0),
        _ => d1s > 0,
    }
}

fn same_direction(p: Vec2, a: Vec2, b: Vec2) -> bool {
    det_sign(p, a, p, b) == 0 && dot_sign(p, a, p, b) > 0
}

/// Two passages through p whose four rays are pairwise distinct in direction
/// and interleave angularly: every C0-small perturbation keeps a crossing.
fn robust_crossing(p: Vec2, a: &Passage, b: &Passage) -> bool {
    if a.rays.len() != 2 || b.rays.len() != 2 {
        return false;
    }
    let all: Vec<Vec2> = a.rays.iter().chain(b.rays.iter()).cloned().collect();
    for x in 0..4 {
        for y in x + 1..4 {
            if same_direction(p, all[x], all[y]) {
                return false;
            }
        }
    }
    let s1 = in_ccw_sector(p, a.rays[0], a.rays[1], b.rays[0]);
    let s2 = in_ccw_sector(p, a.rays[0], a.rays[1], b.rays[1]);
    s1 != s2
}

/// A crossing stable under perturbation, if the report contains one.
pub fn certified_crossing(curve: &PolylineCurve, report: &IntersectionReport) -> Option<Vec2> {
    for v in &report.violations {
        match v.kind {
            ViolationKind::TransversalCrossing => return Some(v.witness_f64()),
            ViolationKind::VertexTouch => {
                let p = v.witness_f64();
                let ps = passages(curve, p);
                for x in 0..ps.len() {
                    for y in x + 1..ps.len() {
                        if ps[x].segs != ps[y].segs && robust_crossing(p, &ps[x], &ps[y]) {
                            return Some(p);
                        }
                    }
                }
            }
            ViolationKind::Overlap => {}
        }
    }
    None
}

fn unit_normal(curve: &PolylineCurve, k: usize) -> Option<Vec2> {
    let (a, b) = curve.segment(k);
    let d = b - a;
    let n = d.norm();
    (n > 0.0).then(|| perp(d) / n)
}

enum Move {
    Vertices(Vec<usize>),
    /// Insert an offset vertex at the parameter midpoint of a segment.
    Midpoint(usize),
}

fn apply_move(cur: &PolylineCurve, mv: &Move, offset: Vec2) -> Option<PolylineCurve> {
    let m = cur.num_segments();
    let mut vs = cur.vertices().to_vec();
    let mut bp = cur.breakpoints().to_vec();
    match mv {
        Move::Vertices(ks) => {
            let mut ks = ks.clone();
            if cur.is_closed() {
                if ks.contains(&0) {
                    ks.push(m);
                } else if ks.contains(&m) {
                    ks.push(0);
                }
            }
            for k in ks {
                vs[k] += offset;
            }
        }
        Move::Midpoint(s) => {
            let t = 0.5 * (bp[*s] + bp[s + 1]);
            if !(t > bp[*s] && t < bp[s + 1]) {
                return None;
            }
            let p = cur.eval_unchecked(t) + offset;
            bp.insert(s + 1, t);
            vs.insert(s + 1, p);
        }
    }
    PolylineCurve::new(bp, vs).ok()
}

pub const DEFAULT_BUDGET: usize = 2000;

/// Search for an injective curve uniformly within `tol`: certify an
/// obstruction, or push apart touching pieces by normal vertex offsets and
/// re-test exactly.
pub fn find_injective_witness(curve: &PolylineCurve, tol: f64, budget: usize) -> WitnessResult {
    assert!(tol > 0.0, "tolerance must be positive");
    let report = self_intersections(curve);
    if report.is_injective {
        return WitnessResult {
            status: WitnessStatus::WitnessFound,
            witness: Some(curve.clone()),
            c0_gap: 0.0,
            attempts: 0,
            crossing: None,
        };
    }
    if let Some(p) = certified_crossing(curve, &report) {
        return WitnessResult {
            status: WitnessStatus::InterpenetrationDetected,
            witness: None,
            c0_gap: f64::INFINITY,
            attempts: 0,
            crossing: Some(p),
        };
    }
    let mut cur = curve.clone();
    let mut cur_count = report.violations.len();
    let mut cur_report = report;
    let mut attempts = 0usize;
    let mut tau = 0.5 * tol;
    while attempts < budget {
        let v = cur_report.violations[0].clone();
        let mut best: Option<(usize, PolylineCurve, IntersectionReport)> = None;
        'search: for &s in &[v.i, v.j] {
            let Some(n) = unit_normal(&cur, s) else { continue };
            for mv in [Move::Vertices(vec![s + 1]), Move::Vertices(vec![s]), Move::Vertices(vec![s, s + 1]), Move::Midpoint(s)] {
                for sign in [1.0, -1.0] {
                    for scale in [1.0, 0.5] {
                        if attempts >= budget {
                            break 'search;
                        }
                        attempts += 1;
                        let Some(cand) = apply_move(&cur, &mv, n * (sign * scale * tau)) else { continue };
                        if c0_distance(&cand, curve) > tol {
                            continue;
                        }
                        let rep = self_intersections(&cand);
                        let c = rep.violations.len();
                        if c > 0 && certified_crossing(&cand, &rep).is_some() {
                            continue;
                        }
                        if c < cur_count && best.as_ref().map_or(true, |b| c < b.0) {
                            let done = c == 0;
                            best = Some((c, cand, rep));
                            if done {
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        match best {
            Some((c, cand, rep)) => {
                cur = cand;
                cur_count = c;
                cur_report = rep;
                if c == 0 {
                    let gap = c0_distance(&cur, curve);
                    if gap <= tol {
                        return WitnessResult {
                            status: WitnessStatus::WitnessFound,
                            witness: Some(cur),
                            c0_gap: gap,
                            attempts,
                            crossing: None,
                        };
                    }
                    break;
                }
            }
            None => {
                tau *= 0.5;
                if tau < tol / 64.0 {
                    break;
                }
            }
        }
    }
    WitnessResult {
        status: WitnessStatus::Unknown,
        witness: None,
        c0_gap: c0_distance(&cur, curve),
        attempts,
        crossing: None,
    }
}
