use serde::Serialize;

use crate::curve::{c0_distance, perp, PolylineCurve, Vec2};
use crate::energy::{ConvexEnvelopeTable, Laminate, ReducedDensity};
use crate::error::{Result, RodError};
use crate::exact::orient;
use crate::geometry::is_injective;

/// Relative size of the perpendicular tilt applied to opposite co-linear slopes.
pub const TILT: f64 = 1.0 / 64.0;

const MIN_WEIGHT: f64 = 1e-12;
const MAX_SUBCELLS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Construction {
    Straight,
    Periodic { order: [usize; 3] },
    Tilted,
    Shifted,
    Nested { leg: usize, subcells: usize },
}

/// The curve y_n for a laminate together with the slopes actually used.
#[derive(Debug, Clone)]
pub struct Zigzag {
    pub curve: PolylineCurve,
    pub construction: Construction,
    /// Weights and slopes carried by the curve; differs from the input only
    /// after a tilt or shift.
    pub effective: Laminate,
    pub endpoint: Vec2,
}

impl Zigzag {
    /// max |a_i| over the slopes used.
    pub fn lipschitz(&self) -> f64 {
        self.effective.vecs().iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Energy of the effective slopes minus that of the requested laminate.
    pub fn correction(&self, requested: &Laminate, f: &ReducedDensity) -> f64 {
        self.effective.energy(f) - requested.energy(f)
    }
}

fn collinear(a: Vec2, b: Vec2) -> bool {
    orient(Vec2::zeros(), a, b) == 0
}

fn normalize(lam: &Laminate) -> Result<(Vec<f64>, Vec<Vec2>)> {
    if lam.weights.len() != lam.vectors.len() || lam.weights.is_empty() || lam.weights.len() > 3 {
        return Err(RodError::Precondition("laminate needs one to three weighted vectors".into()));
    }
    if lam.weights.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(RodError::Precondition("laminate weights must be non-negative".into()));
    }
    let sum: f64 = lam.weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(RodError::Precondition(format!("laminate weights sum to {sum}")));
    }
    let mut ts: Vec<f64> = Vec::new();
    let mut vs: Vec<Vec2> = Vec::new();
    for (t, a) in lam.weights.iter().zip(lam.vecs()) {
        if a == Vec2::zeros() || !a.x.is_finite() || !a.y.is_finite() {
            return Err(RodError::Precondition("laminate vectors must be non-zero".into()));
        }
        if *t < MIN_WEIGHT {
            continue;
        }
        match vs.iter().position(|v| *v == a) {
            Some(k) => ts[k] += t,
            None => {
                ts.push(*t);
                vs.push(a);
            }
        }
    }
    let s: f64 = ts.iter().sum();
    ts.iter_mut().for_each(|t| *t /= s);
    Ok((ts, vs))
}

/// One cell as (parameter length, slope) pieces.
type Cell = Vec<(f64, Vec2)>;

fn assemble(cell: &Cell, n: usize) -> Result<(PolylineCurve, Vec2)> {
    let xi: Vec2 = cell.iter().map(|(l, a)| a * *l).sum();
    let mut tau = vec![0.0];
    let mut pts = vec![Vec2::zeros()];
    for (l, a) in &cell[..cell.len() - 1] {
        tau.push(tau.last().unwrap() + l);
        pts.push(pts.last().unwrap() + a * *l);
    }
    let nf = n as f64;
    let mut bp = Vec::with_capacity(n * tau.len() + 1);
    let mut vs = Vec::with_capacity(n * tau.len() + 1);
    for c in 0..n {
        let base = xi * c as f64;
        for (s, p) in tau.iter().zip(&pts) {
            bp.push((c as f64 + s) / nf);
            vs.push((base + p) / nf);
        }
    }
    bp.push(1.0);
    vs.push(xi);
    Ok((PolylineCurve::new(bp, vs)?, xi))
}

fn effective(cell: &Cell) -> Laminate {
    let mut lam = Laminate { weights: Vec::new(), vectors: Vec::new() };
    for (l, a) in cell {
        match lam.vectors.iter().position(|v| v[0] == a.x && v[1] == a.y) {
            Some(k) => lam.weights[k] += l,
            None => {
                lam.weights.push(*l);
                lam.vectors.push([a.x, a.y]);
            }
        }
    }
    lam
}

fn finish(cell: &Cell, n: usize, construction: Construction) -> Result<Option<Zigzag>> {
    let (curve, endpoint) = assemble(cell, n)?;
    if !is_injective(&curve) {
        return Ok(None);
    }
    Ok(Some(Zigzag { curve, construction, effective: effective(cell), endpoint }))
}

/// Two opposite co-linear slopes tilted in opposite perpendicular directions
/// so that their average is kept.
fn tilted(ts: &[f64], vs: &[Vec2]) -> Cell {
    let nu = perp(vs[0]).normalize();
    let c = TILT * (ts[0] * vs[0].norm()).min(ts[1] * vs[1].norm());
    vec![(ts[0], vs[0] + nu * (c / ts[0])), (ts[1], vs[1] - nu * (c / ts[1]))]
}

/// Macro chain alternating slope a_leg with the average of the other two,
/// the latter realized by a finer zigzag whose side flips halfway.
fn nested(ts: &[f64], vs: &[Vec2], leg: usize, m: usize) -> Option<Cell> {
    let (j, k) = match leg {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let w = ts[j] + ts[k];
    let mean = (vs[j] * ts[j] + vs[k] * ts[k]) / w;
    if collinear(mean, vs[leg]) || collinear(vs[j], vs[k]) {
        return None;
    }
    let nu = perp(mean);
    let sigma = vs[leg].dot(&nu);
    let (first, second) = if vs[j].dot(&nu) * sigma > 0.0 { (j, k) } else { (k, j) };
    let mut cell = vec![(ts[leg], vs[leg])];
    let mf = m as f64;
    for q in 0..m {
        let order = if q < m / 2 { [first, second] } else { [second, first] };
        for i in order {
            cell.push((ts[i] / mf, vs[i]));
        }
    }
    Some(cell)
}

fn permutations(r: usize) -> Vec<Vec<usize>> {
    match r {
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]],
    }
}

/// The oscillating curve x -> y(nx)/n of a laminate, checked injective.
pub fn zigzag_laminate_curve(lam: &Laminate, n: usize) -> Result<Zigzag> {
    if n == 0 {
        return Err(RodError::Precondition("oscillation count must be positive".into()));
    }
    let (ts, vs) = normalize(lam)?;
    if vs.len() == 1 {
        let cell = vec![(1.0, vs[0])];
        return finish(&cell, n, Construction::Straight)?
            .ok_or_else(|| RodError::Construction("straight laminate curve failed the check".into()));
    }
    let r = vs.len();
    for perm in permutations(r) {
        let cell: Cell = perm.iter().map(|&i| (ts[i], vs[i])).collect();
        let mut order = [0usize; 3];
        order[..r].copy_from_slice(&perm);
        if let Some(z) = finish(&cell, n, Construction::Periodic { order })? {
            return Ok(z);
        }
    }
    if r == 2 {
        if collinear(vs[0], vs[1]) {
            let xi = vs[0] * ts[0] + vs[1] * ts[1];
            let cell = if xi == Vec2::zeros() {
                let nu = perp(vs[0]).normalize();
                vec![(ts[0], vs[0] + nu * (TILT * vs[0].norm())), (ts[1], vs[1])]
            } else {
                tilted(&ts, &vs)
            };
            let kind = if xi == Vec2::zeros() { Construction::Shifted } else { Construction::Tilted };
            if let Some(z) = finish(&cell, n, kind)? {
                return Ok(z);
            }
        }
        return Err(RodError::Construction("no injective two-slope oscillation".into()));
    }
    let mut m = 2;
    while m <= MAX_SUBCELLS {
        for leg in 0..3 {
            if let Some(cell) = nested(&ts, &vs, leg, m) {
                if let Some(z) = finish(&cell, n, Construction::Nested { leg, subcells: m })? {
                    return Ok(z);
                }
            }
        }
        m *= 2;
    }
    Err(RodError::Construction("no injective arrangement of the laminate".into()))
}

/// Straight line x -> xi x on [0,1].
pub fn affine_limit(xi: Vec2) -> PolylineCurve {
    PolylineCurve::new(vec![0.0, 1.0], vec![Vec2::zeros(), xi]).expect("two-point curve")
}

/// Integral of f(y') over a polyline.
pub fn unrelaxed_energy(y: &PolylineCurve, f: &ReducedDensity) -> f64 {
    let bp = y.breakpoints();
    (0..y.num_segments()).map(|j| f.eval(y.slope(j)) * (bp[j + 1] - bp[j])).sum()
}

/// The table laminate at a, or the singleton when f(a) is already no larger.
pub fn best_laminate(table: &ConvexEnvelopeTable, a: Vec2) -> Result<Laminate> {
    let lam = table.laminate_at(a)?;
    if table.f.eval(a) <= lam.energy(&table.f) {
        return Ok(Laminate::singleton(a));
    }
    Ok(lam)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Schedules {
    /// Oscillation count; default k^2.
    pub n: Option<usize>,
    /// Buffer length; default min piece length / max(k^2, 4).
    pub beta: Option<f64>,
    /// Doublings of n tried when an insertion collides.
    pub retries: usize,
}

impl Schedules {
    pub fn defaults() -> Self {
        Self { n: None, beta: None, retries: 4 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryTerms {
    pub k: usize,
    pub n: usize,
    pub beta: f64,
    /// I of the output.
    pub energy: f64,
    /// I^C of the input, from the table.
    pub relaxed: f64,
    /// I of the input.
    pub unrelaxed: f64,
    /// Sum over pieces of 2 beta f(slope).
    pub buffer: f64,
    /// Energy added by tilted slopes.
    pub correction: f64,
    pub table_gap: f64,
    pub inv_n: f64,
    pub inv_k: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub curve: PolylineCurve,
    pub terms: RecoveryTerms,
    pub attempts: usize,
    pub constructions: Vec<Construction>,
}

/// Replace the middle of every affine piece of y by the oscillation of the
/// laminate of its slope, leaving buffers of length beta at both ends.
pub fn recovery_rod_sequence(
    y: &PolylineCurve,
    table: &ConvexEnvelopeTable,
    k: usize,
    sched: &Schedules,
) -> Result<Recovery> {
    if k == 0 {
        return Err(RodError::Precondition("k must be positive".into()));
    }
    if !is_injective(y) {
        return Err(RodError::Precondition("input rod is not injective".into()));
    }
    let bp = y.breakpoints();
    let pieces = y.num_segments();
    let min_len = bp.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let kk = k * k;
    let beta = sched.beta.unwrap_or(min_len / kk.max(4) as f64);
    if !(beta > 0.0 && 2.0 * beta < min_len) {
        return Err(RodError::Precondition(format!("buffer {beta} must lie in (0, {})", min_len / 2.0)));
    }
    let n0 = sched.n.unwrap_or(kk);
    if n0 == 0 {
        return Err(RodError::Precondition("oscillation count must be positive".into()));
    }
    let f = &table.f;
    let laminates: Vec<Laminate> = (0..pieces).map(|j| best_laminate(table, y.slope(j))).collect::<Result<_>>()?;
    let relaxed = crate::energy::rod_energy(y, table)?;
    let unrelaxed = unrelaxed_energy(y, f);
    let buffer: f64 = (0..pieces).map(|j| 2.0 * beta * f.eval(y.slope(j))).sum();

    let mut n = n0;
    for attempt in 0..=sched.retries {
        let mut bps = vec![0.0];
        let mut vs = vec![y.vertices()[0]];
        let mut correction = 0.0;
        let mut constructions = Vec::with_capacity(pieces);
        for j in 0..pieces {
            let (x0, x1) = (bp[j], bp[j + 1]);
            let s = y.slope(j);
            let (p0, p1) = y.segment(j);
            let (a, b) = (p0 + s * beta, p1 - s * beta);
            let mid = x1 - x0 - 2.0 * beta;
            bps.push(x0 + beta);
            vs.push(a);
            let lam = &laminates[j];
            if lam.weights.len() > 1 {
                let z = zigzag_laminate_curve(lam, n)?;
                correction += mid * z.correction(lam, f);
                constructions.push(z.construction);
                let zb = z.curve.breakpoints();
                let zv = z.curve.vertices();
                for i in 1..zv.len() - 1 {
                    bps.push(x0 + beta + mid * zb[i]);
                    vs.push(a + zv[i] * mid);
                }
            } else {
                constructions.push(Construction::Straight);
            }
            bps.push(x1 - beta);
            vs.push(b);
            bps.push(x1);
            vs.push(p1);
        }
        *bps.last_mut().unwrap() = 1.0;
        let curve = PolylineCurve::new(bps, vs)?;
        if !is_injective(&curve) {
            n *= 2;
            continue;
        }
        let energy = unrelaxed_energy(&curve, f);
        let inv_n = 1.0 / n as f64;
        let inv_k = 1.0 / k as f64;
        let bound = relaxed + buffer + inv_n + inv_k;
        let terms = RecoveryTerms {
            k,
            n,
            beta,
            energy,
            relaxed,
            unrelaxed,
            buffer,
            correction,
            table_gap: table.gamma,
            inv_n,
            inv_k,
            bound,
            holds: energy <= bound,
        };
        return Ok(Recovery { curve, terms, attempts: attempt + 1, constructions });
    }
    Err(RodError::Construction(format!("laminate insertions collide up to n = {}", n / 2)))
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessityStep {
    pub n: usize,
    pub energy: f64,
    pub c0: f64,
    pub injective: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessityReport {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub t: f64,
    pub perturbed: bool,
    pub steps: Vec<NecessityStep>,
    /// t f(a) + (1 - t) f(b).
    pub limit: f64,
    pub numeric_limit: f64,
    /// Table value H of Cf at ta + (1-t)b; the envelope lies in [H - gap, H].
    pub cf: f64,
    pub gap: f64,
    pub dominates: bool,
}

/// Two-slope oscillations y_n with weak limit (ta + (1-t)b) x; opposite
/// co-linear slopes get a 1/n perturbation of a.
pub fn convexity_necessity_experiment(
    table: &ConvexEnvelopeTable,
    a: Vec2,
    b: Vec2,
    t: f64,
    n_max: usize,
) -> Result<NecessityReport> {
    if a == Vec2::zeros() || b == Vec2::zeros() {
        return Err(RodError::Precondition("slopes must be non-zero".into()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(RodError::Precondition("weight must lie in (0,1)".into()));
    }
    let f = &table.f;
    let perturbed = a != b && collinear(a, b) && a.dot(&b) < 0.0;
    let mut steps = Vec::new();
    let mut n = 1;
    while n <= n_max.max(1) {
        let h = 1.0 / n as f64;
        let an = if !perturbed {
            a
        } else if b.y != 0.0 {
            Vec2::new(a.x + h, a.y)
        } else {
            Vec2::new(a.x, a.y + h)
        };
        let lam = Laminate { weights: vec![t, 1.0 - t], vectors: vec![[an.x, an.y], [b.x, b.y]] };
        let z = zigzag_laminate_curve(&lam, n)?;
        let xi = an * t + b * (1.0 - t);
        steps.push(NecessityStep {
            n,
            energy: unrelaxed_energy(&z.curve, f),
            c0: c0_distance(&z.curve, &affine_limit(xi)),
            injective: is_injective(&z.curve),
        });
        n *= 2;
    }
    let limit = t * f.eval(a) + (1.0 - t) * f.eval(b);
    let cf = table.cf(a * t + b * (1.0 - t))?;
    Ok(NecessityReport {
        a: [a.x, a.y],
        b: [b.x, b.y],
        t,
        perturbed,
        numeric_limit: steps.last().map(|s| s.energy).unwrap_or(limit),
        steps,
        limit,
        cf,
        gap: table.gamma,
        dominates: limit >= cf - table.gamma,
    })
}
