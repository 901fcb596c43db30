//! Exact predicates on f64 inputs. Every finite double is a dyadic rational,
//! so the fallback path converts coordinates losslessly and decides signs in
//! `BigRational`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::curve::Vec2;

pub type Q = BigRational;

pub fn q(x: f64) -> Q {
    BigRational::from_float(x).expect("finite coordinate")
}

pub fn qpt(p: Vec2) -> (Q, Q) {
    (q(p.x), q(p.y))
}

fn orient_exact(a: Vec2, b: Vec2, c: Vec2) -> i8 {
    let (ax, ay) = qpt(a);
    let (bx, by) = qpt(b);
    let (cx, cy) = qpt(c);
    let d = (&ax - &cx) * (&by - &cy) - (&ay - &cy) * (&bx - &cx);
    sign_q(&d)
}

pub fn sign_q(d: &Q) -> i8 {
    if d.is_positive() {
        1
    } else if d.is_negative() {
        -1
    } else {
        0
    }
}

/// Sign of det(b - a, c - a): +1 when a, b, c turn counter-clockwise.
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> i8 {
    let l = (a.x - c.x) * (b.y - c.y);
    let r = (a.y - c.y) * (b.x - c.x);
    let det = l - r;
    let bound = 3.3306690738754716e-16 * (l.abs() + r.abs());
    if det > bound {
        1
    } else if -det > bound {
        -1
    } else {
        orient_exact(a, b, c)
    }
}

/// Exact sign of det(u, v) for difference vectors u = b - a, v = d - c.
pub fn det_sign(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> i8 {
    let (ax, ay) = qpt(a);
    let (bx, by) = qpt(b);
    let (cx, cy) = qpt(c);
    let (dx, dy) = qpt(d);
    sign_q(&((&bx - &ax) * (&dy - &cy) - (&by - &ay) * (&dx - &cx)))
}

/// Exact sign of the dot product of b - a and d - c.
pub fn dot_sign(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> i8 {
    let (ax, ay) = qpt(a);
    let (bx, by) = qpt(b);
    let (cx, cy) = qpt(c);
    let (dx, dy) = qpt(d);
    sign_q(&((&bx - &ax) * (&dx - &cx) + (&by - &ay) * (&dy - &cy)))
}

fn in_box(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Exact test that `p` lies on the closed segment [a, b].
pub fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    in_box(p, a, b) && orient(a, b, p) == 0
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegHit {
    None,
    /// Interiors cross at a single point.
    Proper,
    /// Single common point that is an endpoint of at least one segment.
    Touch(Vec2),
    /// Collinear with a common piece of positive length; carries one point of it.
    Overlap(Vec2),
}

fn key(p: Vec2, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

pub fn classify(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> SegHit {
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);
    if o1 == 0 && o2 == 0 && o3 == 0 && o4 == 0 {
        return collinear(p1, p2, q1, q2);
    }
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return SegHit::Proper;
    }
    if o1 == 0 && in_box(q1, p1, p2) {
        return SegHit::Touch(q1);
    }
    if o2 == 0 && in_box(q2, p1, p2) {
        return SegHit::Touch(q2);
    }
    if o3 == 0 && in_box(p1, q1, q2) {
        return SegHit::Touch(p1);
    }
    if o4 == 0 && in_box(p2, q1, q2) {
        return SegHit::Touch(p2);
    }
    SegHit::None
}

fn collinear(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> SegHit {
    let ext = |a: Vec2, b: Vec2| ((b.x - a.x).abs(), (b.y - a.y).abs());
    let (ex, ey) = ext(p1, p2);
    let (fx, fy) = ext(q1, q2);
    let axis = if ex.max(fx) >= ey.max(fy) { 0 } else { 1 };
    let sort = |a: Vec2, b: Vec2| if key(a, axis) <= key(b, axis) { (a, b) } else { (b, a) };
    let (plo, phi) = sort(p1, p2);
    let (qlo, qhi) = sort(q1, q2);
    if p1 == p2 && q1 == q2 {
        return if p1 == q1 { SegHit::Touch(p1) } else { SegHit::None };
    }
    let lo = if key(plo, axis) >= key(qlo, axis) { plo } else { qlo };
    let hi = if key(phi, axis) <= key(qhi, axis) { phi } else { qhi };
    match key(lo, axis).partial_cmp(&key(hi, axis)).unwrap() {
        Ordering::Greater => SegHit::None,
        Ordering::Equal => SegHit::Touch(lo),
        Ordering::Less => SegHit::Overlap(lo),
    }
}

/// Exact intersection point of the supporting lines of two non-parallel segments.
pub fn line_intersection(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> (Q, Q) {
    let (ax, ay) = qpt(p1);
    let (bx, by) = qpt(p2);
    let (cx, cy) = qpt(q1);
    let (dx, dy) = qpt(q2);
    let rx = &bx - &ax;
    let ry = &by - &ay;
    let sx = &dx - &cx;
    let sy = &dy - &cy;
    let den = &rx * &sy - &ry * &sx;
    let num = (&cx - &ax) * &sy - (&cy - &ay) * &sx;
    let t = num / den;
    (&ax + &t * &rx, &ay + &t * &ry)
}

/// Decimal rendering when the denominator is of the form 2^a 5^b, else "p/q".
pub fn rational_string(x: &Q) -> String {
    let x = x.reduced();
    let mut d = x.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut a = 0u32;
    let mut b = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        a += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        b += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", x.numer(), x.denom());
    }
    let digits = a.max(b);
    let scaled = x.numer() * num_traits::pow(BigInt::from(10), digits as usize) / x.denom();
    if digits == 0 {
        return scaled.to_string();
    }
    let neg = scaled.is_negative();
    let mut s = scaled.abs().to_string();
    while s.len() <= digits as usize {
        s.insert(0, '0');
    }
    let split = s.len() - digits as usize;
    let (int, frac) = s.split_at(split);
    let frac = frac.trim_end_matches('0');
    let body = if frac.is_empty() { int.to_string() } else { format!("{int}.{frac}") };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
