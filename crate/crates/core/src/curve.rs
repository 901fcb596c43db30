use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::quad;

pub type Vec2 = Vector2<f64>;

/// Continuous piecewise-affine map [0,1] -> R^2.
#[derive(Debug, Clone, PartialEq)]
pub struct PolylineCurve {
    breakpoints: Vec<f64>,
    vertices: Vec<Vec2>,
}

#[derive(Serialize, Deserialize)]
struct CurveFile {
    breakpoints: Vec<f64>,
    vertices: Vec<[f64; 2]>,
}

impl PolylineCurve {
    pub fn new(breakpoints: Vec<f64>, vertices: Vec<Vec2>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(RodError::InvalidCurve("need at least two breakpoints".into()));
        }
        if breakpoints.len() != vertices.len() {
            return Err(RodError::InvalidCurve(format!(
                "{} breakpoints but {} vertices",
                breakpoints.len(),
                vertices.len()
            )));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(RodError::InvalidCurve("breakpoints must run from 0 to 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(RodError::InvalidCurve("breakpoints must be strictly increasing".into()));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(RodError::InvalidCurve("non-finite vertex".into()));
        }
        Ok(Self { breakpoints, vertices })
    }

    /// Uniform parametrization of a vertex list.
    pub fn uniform(vertices: Vec<Vec2>) -> Result<Self> {
        let m = vertices.len();
        if m < 2 {
            return Err(RodError::InvalidCurve("need at least two vertices".into()));
        }
        let mut bp: Vec<f64> = (0..m).map(|j| j as f64 / (m - 1) as f64).collect();
        bp[m - 1] = 1.0;
        Self::new(bp, vertices)
    }

    pub fn from_points(breakpoints: Vec<f64>, pts: &[[f64; 2]]) -> Result<Self> {
        Self::new(breakpoints, pts.iter().map(|p| Vec2::new(p[0], p[1])).collect())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn num_segments(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn segment(&self, j: usize) -> (Vec2, Vec2) {
        (self.vertices[j], self.vertices[j + 1])
    }

    pub fn is_closed(&self) -> bool {
        self.vertices[0] == *self.vertices.last().unwrap()
    }

    /// Index of the segment containing `t`, right-continuous at breakpoints.
    pub fn segment_index(&self, t: f64) -> usize {
        let m = self.num_segments();
        match self.breakpoints.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(m - 1),
            Err(k) => (k.max(1) - 1).min(m - 1),
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec2> {
        if !(0.0..=1.0).contains(&t) {
            return Err(RodError::Domain(format!("parameter {t} outside [0,1]")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub fn eval_unchecked(&self, t: f64) -> Vec2 {
        let j = self.segment_index(t);
        let (t0, t1) = (self.breakpoints[j], self.breakpoints[j + 1]);
        let s = (t - t0) / (t1 - t0);
        let (a, b) = self.segment(j);
        if s <= 0.0 {
            a
        } else if s >= 1.0 {
            b
        } else {
            a + (b - a) * s
        }
    }

    pub fn derivative(&self, t: f64) -> Result<Vec2> {
        if !(0.0..=1.0).contains(&t) {
            return Err(RodError::Domain(format!("parameter {t} outside [0,1]")));
        }
        Ok(self.slope(self.segment_index(t)))
    }

    pub fn slope(&self, j: usize) -> Vec2 {
        let (a, b) = self.segment(j);
        (b - a) / (self.breakpoints[j + 1] - self.breakpoints[j])
    }

    pub fn lipschitz(&self) -> f64 {
        (0..self.num_segments()).map(|j| self.slope(j).norm()).fold(0.0, f64::max)
    }

    /// Parametric length, the integral of |phi'|.
    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Integral of |phi'|^p.
    pub fn energy_p(&self, p: f64) -> f64 {
        (0..self.num_segments())
            .map(|j| self.slope(j).norm().powf(p) * (self.breakpoints[j + 1] - self.breakpoints[j]))
            .sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn map_vertices(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        Self::new(self.breakpoints.clone(), self.vertices.iter().map(|v| f(*v)).collect())
    }

    /// phi(1 - t).
    pub fn reversed(&self) -> Self {
        let bp: Vec<f64> = self.breakpoints.iter().rev().map(|t| 1.0 - t).collect();
        let vs: Vec<Vec2> = self.vertices.iter().rev().cloned().collect();
        let mut bp = bp;
        bp[0] = 0.0;
        *bp.last_mut().unwrap() = 1.0;
        Self { breakpoints: bp, vertices: vs }
    }

    /// The curve evaluated on a finer partition containing `extra`.
    pub fn refined(&self, extra: &[f64]) -> Self {
        let bp = merge_breakpoints(&self.breakpoints, extra);
        let vs = bp.iter().map(|&t| self.eval_unchecked(t)).collect();
        Self { breakpoints: bp, vertices: vs }
    }

    pub fn to_json(&self) -> String {
        let f = CurveFile {
            breakpoints: self.breakpoints.clone(),
            vertices: self.vertices.iter().map(|v| [v.x, v.y]).collect(),
        };
        serde_json::to_string_pretty(&f).expect("curve serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: CurveFile = serde_json::from_str(s).map_err(|e| RodError::Parse(e.to_string()))?;
        Self::from_points(f.breakpoints, &f.vertices)
    }
}

/// Sorted union of two breakpoint lists, exact duplicates removed.
pub fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).cloned().filter(|t| (0.0..=1.0).contains(t)).collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup();
    all
}

fn diff_pieces(a: &PolylineCurve, b: &PolylineCurve) -> Vec<(f64, f64, Vec2, Vec2, Vec2)> {
    let bp = merge_breakpoints(&a.breakpoints, &b.breakpoints);
    bp.windows(2)
        .map(|w| {
            let (t0, t1) = (w[0], w[1]);
            let mid = 0.5 * (t0 + t1);
            let d0 = a.eval_unchecked(t0) - b.eval_unchecked(t0);
            let d1 = a.eval_unchecked(t1) - b.eval_unchecked(t1);
            let dd = a.slope(a.segment_index(mid)) - b.slope(b.segment_index(mid));
            (t0, t1, d0, d1, dd)
        })
        .collect()
}

/// Position and derivative parts of the W^{1,p} distance.
pub fn sobolev_parts(a: &PolylineCurve, b: &PolylineCurve, p: f64) -> (f64, f64) {
    assert!(p >= 1.0, "Sobolev exponent must be at least 1");
    let mut pos = 0.0;
    let mut der = 0.0;
    let even = p.fract() == 0.0 && (p as i64) % 2 == 0;
    for (t0, t1, d0, d1, dd) in diff_pieces(a, b) {
        let h = t1 - t0;
        der += dd.norm().powf(p) * h;
        if d0 == Vec2::zeros() && d1 == Vec2::zeros() {
            continue;
        }
        let g = |s: f64| (d0 + (d1 - d0) * s).norm().powf(p);
        let integral = if even {
            quad::gauss_legendre(g, 0.0, 1.0, (p as usize) / 2 + 1)
        } else {
            quad::adaptive(g, 0.0, 1.0, 1e-12)
        };
        pos += integral * h;
    }
    (pos.powf(1.0 / p), der.powf(1.0 / p))
}

pub fn sobolev_distance(a: &PolylineCurve, b: &PolylineCurve, p: f64) -> f64 {
    let (x, y) = sobolev_parts(a, b, p);
    x + y
}

/// Sup-distance; exact because |a-b| is convex on every common piece.
pub fn c0_distance(a: &PolylineCurve, b: &PolylineCurve) -> f64 {
    merge_breakpoints(&a.breakpoints, &b.breakpoints)
        .iter()
        .map(|&t| (a.eval_unchecked(t) - b.eval_unchecked(t)).norm())
        .fold(0.0, f64::max)
}

pub fn constant_speed_reparam(path: &[Vec2]) -> Result<PolylineCurve> {
    if path.len() < 2 {
        return Err(RodError::DegenerateInput("need at least two points".into()));
    }
    if path.iter().all(|p| *p == path[0]) {
        return Err(RodError::DegenerateInput("all points coincide".into()));
    }
    let pts: Vec<Vec2> = {
        let mut v = vec![path[0]];
        for p in &path[1..] {
            if p != v.last().unwrap() {
                v.push(*p);
            }
        }
        v
    };
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    let mut bp: Vec<f64> = cum.iter().map(|c| c / total).collect();
    *bp.last_mut().unwrap() = 1.0;
    for k in 1..bp.len() {
        if bp[k] <= bp[k - 1] {
            return Err(RodError::DegenerateInput("segment too short to parametrize".into()));
        }
    }
    PolylineCurve::new(bp, pts)
}

pub fn perp(a: Vec2) -> Vec2 {
    Vec2::new(-a.y, a.x)
}

pub fn det2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}
