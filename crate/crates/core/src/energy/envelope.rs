use rayon::prelude::*;
use serde::Serialize;

use super::hull::{orient3d, quickhull, Hull, P3};
use super::{Provenance, ReducedDensity};
use crate::curve::Vec2;
use crate::error::{Result, RodError};
use crate::exact::orient;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Laminate {
    pub weights: Vec<f64>,
    pub vectors: Vec<[f64; 2]>,
}

impl Laminate {
    pub fn singleton(a: Vec2) -> Self {
        Self { weights: vec![1.0], vectors: vec![[a.x, a.y]] }
    }

    pub fn vecs(&self) -> Vec<Vec2> {
        self.vectors.iter().map(|v| Vec2::new(v[0], v[1])).collect()
    }

    pub fn barycenter(&self) -> Vec2 {
        self.vecs().iter().zip(&self.weights).map(|(a, t)| a * *t).sum()
    }

    pub fn energy(&self, f: &ReducedDensity) -> f64 {
        self.vecs().iter().zip(&self.weights).map(|(a, t)| t * f.eval(*a)).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvexifyOptions {
    pub lo: Vec2,
    pub hi: Vec2,
    pub n: usize,
    pub gamma: f64,
    pub max_n: usize,
    pub cap: f64,
}

impl Default for ConvexifyOptions {
    fn default() -> Self {
        Self { lo: Vec2::new(-3.0, -3.0), hi: Vec2::new(3.0, 3.0), n: 65, gamma: 1e-3, max_n: 1025, cap: 1e3 }
    }
}

pub struct ConvexEnvelopeTable {
    pub lo: Vec2,
    pub hi: Vec2,
    pub n: usize,
    pub cap: f64,
    /// Largest probe excess of the hull over f: Cf lies in [H - gamma, H].
    pub gamma: f64,
    pub target_gamma: f64,
    pub provenance: Provenance,
    pub f_nodes: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub laminates: Vec<Option<Laminate>>,
    pub f: ReducedDensity,
    locator: Locator,
}

/// Lower hull facets, counter-clockwise in projection, with a bucket index.
struct Locator {
    pts: Vec<P3>,
    faces: Vec<[usize; 3]>,
    adj: Vec<[usize; 3]>,
    lo: Vec2,
    hi: Vec2,
    nb: usize,
    buckets: Vec<Vec<u32>>,
}

fn p2(p: &P3) -> Vec2 {
    Vec2::new(p[0], p[1])
}

impl Locator {
    fn new(hull: &Hull, lo: Vec2, hi: Vec2, nb: usize) -> Self {
        let mut map = vec![usize::MAX; hull.faces.len()];
        let mut faces = Vec::new();
        let mut src = Vec::new();
        for (id, f) in hull.alive_faces() {
            let [a, b, c] = f.v;
            let o = orient(p2(&hull.points[a]), p2(&hull.points[b]), p2(&hull.points[c]));
            if o < 0 {
                map[id] = faces.len();
                faces.push([a, c, b]);
                src.push(id);
            }
        }
        let adj = src
            .iter()
            .map(|&id| {
                let nb = hull.faces[id].nb;
                // Edge order flips with the vertex swap a, c, b.
                [nb[2], nb[1], nb[0]].map(|g| map[g])
            })
            .collect();
        let mut buckets = vec![Vec::new(); nb * nb];
        let d = hi - lo;
        let cell = |x: f64, lo: f64, w: f64| (((x - lo) / w * nb as f64).floor().max(0.0) as usize).min(nb - 1);
        for (k, f) in faces.iter().enumerate() {
            let ps: Vec<Vec2> = f.iter().map(|&i| p2(&hull.points[i])).collect();
            let (x0, x1) = (ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min), ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (ps.iter().map(|p| p.y).fold(f64::INFINITY, f64::min), ps.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max));
            for by in cell(y0, lo.y, d.y)..=cell(y1, lo.y, d.y) {
                for bx in cell(x0, lo.x, d.x)..=cell(x1, lo.x, d.x) {
                    buckets[by * nb + bx].push(k as u32);
                }
            }
        }
        Self { pts: hull.points.clone(), faces, adj, lo, hi, nb, buckets }
    }

    fn contains(&self, f: &[usize; 3], q: Vec2) -> bool {
        let [a, b, c] = f.map(|i| p2(&self.pts[i]));
        orient(a, b, q) >= 0 && orient(b, c, q) >= 0 && orient(c, a, q) >= 0
    }

    fn locate(&self, q: Vec2) -> Option<usize> {
        if q.x < self.lo.x || q.x > self.hi.x || q.y < self.lo.y || q.y > self.hi.y {
            return None;
        }
        let d = self.hi - self.lo;
        let nb = self.nb;
        let bx = (((q.x - self.lo.x) / d.x * nb as f64).floor().max(0.0) as usize).min(nb - 1);
        let by = (((q.y - self.lo.y) / d.y * nb as f64).floor().max(0.0) as usize).min(nb - 1);
        self.buckets[by * nb + bx].iter().map(|&k| k as usize).find(|&k| self.contains(&self.faces[k], q))
    }

    /// Barycentric weights of q in triangle (a, b, c); exactly zero on edges.
    fn weights(&self, tri: &[usize; 3], q: Vec2) -> [f64; 3] {
        let [a, b, c] = tri.map(|i| p2(&self.pts[i]));
        let area = (b - a).perp(&(c - a));
        let mut w = [(c - b).perp(&(q - b)) / area, (a - c).perp(&(q - c)) / area, (b - a).perp(&(q - a)) / area];
        let edges = [(b, c), (c, a), (a, b)];
        for i in 0..3 {
            if orient(edges[i].0, edges[i].1, q) == 0 {
                w[i] = 0.0;
            }
        }
        let s: f64 = w.iter().sum();
        w.map(|x| x / s)
    }

    fn height(&self, k: usize, q: Vec2) -> f64 {
        let tri = self.faces[k];
        let w = self.weights(&tri, q);
        (0..3).map(|i| w[i] * self.pts[tri[i]][2]).sum()
    }

    /// Supporting triangle for q, breaking ties among exactly coplanar
    /// neighbouring facets by the lexicographically smallest vertex triple.
    fn support(&self, k: usize, q: Vec2) -> [usize; 3] {
        let base = self.faces[k];
        let [a, b, c] = base.map(|i| self.pts[i]);
        let mut seen = vec![k];
        let mut verts: Vec<usize> = base.to_vec();
        let mut i = 0;
        while i < seen.len() && verts.len() < 64 {
            let f = seen[i];
            i += 1;
            for &g in &self.adj[f] {
                if g == usize::MAX || seen.contains(&g) {
                    continue;
                }
                if self.faces[g].iter().all(|&v| orient3d(&a, &b, &c, &self.pts[v]) == 0) {
                    seen.push(g);
                    for &v in &self.faces[g] {
                        if !verts.contains(&v) {
                            verts.push(v);
                        }
                    }
                }
            }
        }
        if verts.len() == 3 {
            return base;
        }
        verts.sort_by(|&x, &y| {
            let (px, py) = (&self.pts[x], &self.pts[y]);
            px[0].total_cmp(&py[0]).then(px[1].total_cmp(&py[1]))
        });
        let m = verts.len();
        for x in 0..m {
            for y in x + 1..m {
                for z in y + 1..m {
                    let mut t = [verts[x], verts[y], verts[z]];
                    let o = orient(p2(&self.pts[t[0]]), p2(&self.pts[t[1]]), p2(&self.pts[t[2]]));
                    if o == 0 {
                        continue;
                    }
                    if o < 0 {
                        t.swap(1, 2);
                    }
                    if self.contains(&t, q) {
                        return t;
                    }
                }
            }
        }
        base
    }
}

impl ConvexEnvelopeTable {
    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        node_point(self.lo, self.hi, self.n, ix, iy)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec2> + '_ {
        let n = self.n;
        (0..n * n).map(move |k| self.node(k % n, k / n))
    }

    fn capped(&self, tri: &[usize; 3]) -> bool {
        tri.iter().any(|&i| self.locator.pts[i][2] >= self.cap)
    }

    /// Hull height at q, the table's value of Cf.
    pub fn cf(&self, q: Vec2) -> Result<f64> {
        let k = self
            .locator
            .locate(q)
            .ok_or_else(|| RodError::Domain(format!("({}, {}) outside the table domain", q.x, q.y)))?;
        let tri = self.locator.faces[k];
        if self.capped(&tri) {
            return Err(RodError::Domain("supporting facet touches the cap".into()));
        }
        Ok(self.locator.height(k, q))
    }

    pub fn laminate_at(&self, q: Vec2) -> Result<Laminate> {
        let k = self
            .locator
            .locate(q)
            .ok_or_else(|| RodError::Domain(format!("({}, {}) outside the table domain", q.x, q.y)))?;
        let tri = self.locator.support(k, q);
        if self.capped(&tri) {
            return Err(RodError::Domain("supporting facet touches the cap".into()));
        }
        let w = self.locator.weights(&tri, q);
        let mut lam = Laminate { weights: Vec::new(), vectors: Vec::new() };
        for i in 0..3 {
            if w[i] > 0.0 {
                let p = self.locator.pts[tri[i]];
                lam.weights.push(w[i]);
                lam.vectors.push([p[0], p[1]]);
            }
        }
        Ok(lam)
    }

    pub fn contains(&self, q: Vec2) -> bool {
        q.x >= self.lo.x && q.x <= self.hi.x && q.y >= self.lo.y && q.y <= self.hi.y
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Node<'a> {
            a: [f64; 2],
            f: Option<f64>,
            cf: Option<f64>,
            laminate: Option<&'a Laminate>,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            lo: [f64; 2],
            hi: [f64; 2],
            n: usize,
            cap: f64,
            gamma: f64,
            target_gamma: f64,
            provenance: Provenance,
            density: &'a str,
            nodes: Vec<Node<'a>>,
        }
        let nodes = self
            .nodes()
            .enumerate()
            .map(|(k, a)| Node {
                a: [a.x, a.y],
                f: self.f_nodes[k].is_finite().then_some(self.f_nodes[k]),
                cf: self.values[k],
                laminate: self.laminates[k].as_ref(),
            })
            .collect();
        serde_json::to_value(Out {
            lo: [self.lo.x, self.lo.y],
            hi: [self.hi.x, self.hi.y],
            n: self.n,
            cap: self.cap,
            gamma: self.gamma,
            target_gamma: self.target_gamma,
            provenance: self.f.provenance,
            density: self.f.density.name(),
            nodes,
        })
        .expect("table serialization")
    }
}

fn node_point(lo: Vec2, hi: Vec2, n: usize, ix: usize, iy: usize) -> Vec2 {
    let d = hi - lo;
    let c = |i: usize, l: f64, w: f64| if i == n - 1 { l + w } else { l + w * i as f64 / (n - 1) as f64 };
    Vec2::new(c(ix, lo.x, d.x), c(iy, lo.y, d.y))
}

fn sample(f: &ReducedDensity, lo: Vec2, hi: Vec2, n: usize) -> Vec<f64> {
    (0..n * n).into_par_iter().map(|k| f.eval(node_point(lo, hi, n, k % n, k / n))).collect()
}

/// Lower convex envelope of f sampled on an n x n grid over the box, refined
/// (n -> 2n - 1) until the probe gap drops to the target.
pub fn convexify(f: &ReducedDensity, opt: &ConvexifyOptions) -> Result<ConvexEnvelopeTable> {
    if opt.n < 8 {
        return Err(RodError::Precondition("grid resolution must be at least 8".into()));
    }
    if !(opt.lo.x < opt.hi.x && opt.lo.y < opt.hi.y) {
        return Err(RodError::Precondition("empty domain box".into()));
    }
    let mut n = opt.n;
    let mut fvals = sample(f, opt.lo, opt.hi, n);
    loop {
        let pts: Vec<P3> = (0..n * n)
            .map(|k| {
                let a = node_point(opt.lo, opt.hi, n, k % n, k / n);
                [a.x, a.y, fvals[k].min(opt.cap)]
            })
            .collect();
        let hull = quickhull(pts).ok_or_else(|| RodError::Construction("degenerate hull input".into()))?;
        let loc = Locator::new(&hull, opt.lo, opt.hi, (n / 2).max(1));
        let m = 2 * n - 1;
        let fine = sample(f, opt.lo, opt.hi, m);
        let gap = (0..m * m)
            .into_par_iter()
            .filter(|k| (k % m) % 2 == 1 || (k / m) % 2 == 1)
            .map(|k| {
                let q = node_point(opt.lo, opt.hi, m, k % m, k / m);
                match loc.locate(q) {
                    Some(face) if !loc.faces[face].iter().any(|&i| loc.pts[i][2] >= opt.cap) => {
                        (loc.height(face, q) - fine[k].min(opt.cap)).max(0.0)
                    }
                    _ => 0.0,
                }
            })
            .reduce(|| 0.0, f64::max);
        if gap <= opt.gamma || m > opt.max_n {
            if gap > opt.gamma {
                return Err(RodError::Budget { what: format!("convex envelope gap at n = {n}"), achieved: gap });
            }
            let mut table = ConvexEnvelopeTable {
                lo: opt.lo,
                hi: opt.hi,
                n,
                cap: opt.cap,
                gamma: gap,
                target_gamma: opt.gamma,
                provenance: f.provenance,
                f_nodes: fvals,
                values: Vec::new(),
                laminates: Vec::new(),
                f: f.clone(),
                locator: loc,
            };
            let results: Vec<(Option<f64>, Option<Laminate>)> = (0..n * n)
                .into_par_iter()
                .map(|k| {
                    let q = table.node(k % n, k / n);
                    (table.cf(q).ok(), table.laminate_at(q).ok())
                })
                .collect();
            for (v, l) in results {
                table.values.push(v);
                table.laminates.push(l);
            }
            return Ok(table);
        }
        n = m;
        fvals = fine;
    }
}
