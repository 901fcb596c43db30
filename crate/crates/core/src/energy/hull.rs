//! Three-dimensional quickhull with filtered exact orientation.

use std::collections::HashMap;

use num_rational::BigRational;

use crate::exact::{q, sign_q};

pub type P3 = [f64; 3];

fn orient3d_exact(a: &P3, b: &P3, c: &P3, d: &P3) -> i8 {
    let v = |p: &P3| [q(p[0]), q(p[1]), q(p[2])];
    let (a, b, c, d) = (v(a), v(b), v(c), v(d));
    let sub = |x: &[BigRational; 3], y: &[BigRational; 3]| [&x[0] - &y[0], &x[1] - &y[1], &x[2] - &y[2]];
    let u = sub(&b, &a);
    let w = sub(&c, &a);
    let z = sub(&d, &a);
    let det = &u[0] * (&w[1] * &z[2] - &w[2] * &z[1]) - &u[1] * (&w[0] * &z[2] - &w[2] * &z[0])
        + &u[2] * (&w[0] * &z[1] - &w[1] * &z[0]);
    sign_q(&det)
}

/// Sign of det(b - a, c - a, d - a); positive when d lies on the side the
/// right-handed normal (b - a) x (c - a) points to.
pub fn orient3d(a: &P3, b: &P3, c: &P3, d: &P3) -> i8 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let z = [d[0] - a[0], d[1] - a[1], d[2] - a[2]];
    let m0 = w[1] * z[2] - w[2] * z[1];
    let m1 = w[0] * z[2] - w[2] * z[0];
    let m2 = w[0] * z[1] - w[1] * z[0];
    let det = u[0] * m0 - u[1] * m1 + u[2] * m2;
    let perm = u[0].abs() * ((w[1] * z[2]).abs() + (w[2] * z[1]).abs())
        + u[1].abs() * ((w[0] * z[2]).abs() + (w[2] * z[0]).abs())
        + u[2].abs() * ((w[0] * z[1]).abs() + (w[1] * z[0]).abs());
    // Translation rounding doubles the usual bound; the exact path decides the rest.
    let bound = 2.0 * 7.771561172376103e-16 * perm;
    if det > bound {
        1
    } else if -det > bound {
        -1
    } else {
        orient3d_exact(a, b, c, d)
    }
}

#[derive(Debug, Clone)]
pub struct Face {
    pub v: [usize; 3],
    /// Neighbour across edge (v[i], v[(i+1)%3]).
    pub nb: [usize; 3],
    pub alive: bool,
    outside: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Hull {
    pub points: Vec<P3>,
    pub faces: Vec<Face>,
}

fn normal(a: &P3, b: &P3, c: &P3) -> P3 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]]
}

fn plane_dist(pts: &[P3], f: &[usize; 3], p: usize) -> f64 {
    let (a, b, c) = (&pts[f[0]], &pts[f[1]], &pts[f[2]]);
    let n = normal(a, b, c);
    let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let d = &pts[p];
    ((d[0] - a[0]) * n[0] + (d[1] - a[1]) * n[1] + (d[2] - a[2]) * n[2]) / nn
}

impl Hull {
    pub fn alive_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| f.alive)
    }

    fn above(&self, f: usize, p: usize) -> bool {
        let v = self.faces[f].v;
        orient3d(&self.points[v[0]], &self.points[v[1]], &self.points[v[2]], &self.points[p]) > 0
    }
}

/// Convex hull of a point set in general enough position to contain a
/// non-degenerate tetrahedron. Returns None for coplanar input.
pub fn quickhull(points: Vec<P3>) -> Option<Hull> {
    let n = points.len();
    if n < 4 {
        return None;
    }
    let (mut i0, mut i1) = (0, 0);
    for i in 0..n {
        if points[i][0] < points[i0][0] || (points[i][0] == points[i0][0] && points[i][1] < points[i0][1]) {
            i0 = i;
        }
        if points[i][0] > points[i1][0] || (points[i][0] == points[i1][0] && points[i][1] > points[i1][1]) {
            i1 = i;
        }
    }
    if i0 == i1 {
        return None;
    }
    let line_d = |p: &P3| {
        let a = &points[i0];
        let b = &points[i1];
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let w = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
        let c = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
        c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
    };
    let i2 = (0..n).max_by(|&a, &b| line_d(&points[a]).total_cmp(&line_d(&points[b])))?;
    if line_d(&points[i2]) == 0.0 {
        return None;
    }
    let tri = [i0, i1, i2];
    let i3 = (0..n)
        .filter(|&p| orient3d(&points[i0], &points[i1], &points[i2], &points[p]) != 0)
        .max_by(|&a, &b| plane_dist(&points, &tri, a).abs().total_cmp(&plane_dist(&points, &tri, b).abs()))?;
    let (a, b, c, d) = if orient3d(&points[i0], &points[i1], &points[i2], &points[i3]) < 0 {
        (i0, i1, i2, i3)
    } else {
        (i0, i2, i1, i3)
    };
    // a, b, c has d below; the four outward faces:
    let mk = |v: [usize; 3]| Face { v, nb: [usize::MAX; 3], alive: true, outside: Vec::new() };
    let mut hull = Hull { points, faces: vec![mk([a, b, c]), mk([a, d, b]), mk([b, d, c]), mk([c, d, a])] };
    link_all(&mut hull, &[0, 1, 2, 3]);
    let mut assigned = vec![false; n];
    for s in [a, b, c, d] {
        assigned[s] = true;
    }
    for p in 0..n {
        if assigned[p] {
            continue;
        }
        for f in 0..4 {
            if hull.above(f, p) {
                hull.faces[f].outside.push(p);
                break;
            }
        }
    }
    let mut stack: Vec<usize> = (0..4).filter(|&f| !hull.faces[f].outside.is_empty()).collect();
    let mut visited_mark = vec![0u32; 4];
    let mut stamp = 0u32;
    while let Some(f0) = stack.pop() {
        if !hull.faces[f0].alive || hull.faces[f0].outside.is_empty() {
            continue;
        }
        let eye = {
            let fv = hull.faces[f0].v;
            *hull.faces[f0]
                .outside
                .iter()
                .max_by(|&&x, &&y| {
                    plane_dist(&hull.points, &fv, x).total_cmp(&plane_dist(&hull.points, &fv, y)).then(y.cmp(&x))
                })
                .unwrap()
        };
        stamp += 1;
        visited_mark.resize(hull.faces.len(), 0);
        let mut visible = vec![f0];
        visited_mark[f0] = stamp;
        let mut k = 0;
        let mut horizon: Vec<(usize, usize, usize)> = Vec::new();
        while k < visible.len() {
            let f = visible[k];
            k += 1;
            for e in 0..3 {
                let g = hull.faces[f].nb[e];
                if visited_mark[g] == stamp {
                    continue;
                }
                if hull.above(g, eye) {
                    visited_mark[g] = stamp;
                    visible.push(g);
                }
            }
        }
        for &f in &visible {
            for e in 0..3 {
                let g = hull.faces[f].nb[e];
                if visited_mark[g] != stamp {
                    let fv = hull.faces[f].v;
                    horizon.push((fv[e], fv[(e + 1) % 3], g));
                }
            }
        }
        let mut orphans: Vec<usize> = Vec::new();
        for &f in &visible {
            hull.faces[f].alive = false;
            orphans.append(&mut hull.faces[f].outside);
        }
        let first_new = hull.faces.len();
        let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(horizon.len());
        for (idx, &(u, v, g)) in horizon.iter().enumerate() {
            let fid = first_new + idx;
            hull.faces.push(Face { v: [u, v, eye], nb: [g, usize::MAX, usize::MAX], alive: true, outside: Vec::new() });
            let ge = (0..3).find(|&e| hull.faces[g].v[e] == v && hull.faces[g].v[(e + 1) % 3] == u).unwrap();
            hull.faces[g].nb[ge] = fid;
            by_start.insert(u, fid);
        }
        for idx in 0..horizon.len() {
            let fid = first_new + idx;
            let (u, v, _) = horizon[idx];
            let next = by_start[&v];
            hull.faces[fid].nb[1] = next;
            hull.faces[next].nb[2] = fid;
            let _ = u;
        }
        for p in orphans {
            if p == eye {
                continue;
            }
            for fid in first_new..hull.faces.len() {
                if hull.above(fid, p) {
                    hull.faces[fid].outside.push(p);
                    break;
                }
            }
        }
        for fid in first_new..hull.faces.len() {
            if !hull.faces[fid].outside.is_empty() {
                stack.push(fid);
            }
        }
    }
    Some(hull)
}

fn link_all(hull: &mut Hull, ids: &[usize]) {
    let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for &f in ids {
        for e in 0..3 {
            let v = hull.faces[f].v;
            edges.insert((v[e], v[(e + 1) % 3]), (f, e));
        }
    }
    for &f in ids {
        for e in 0..3 {
            let v = hull.faces[f].v;
            let (g, _) = edges[&(v[(e + 1) % 3], v[e])];
            hull.faces[f].nb[e] = g;
        }
    }
}
