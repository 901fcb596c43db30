use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::{c0_distance, merge_breakpoints, sobolev_parts, PolylineCurve, Vec2};
use crate::energy::{bulk_energy, mat_cols, rod_energy, BulkField, ConvexEnvelopeTable, EnergyDensity};
use crate::error::{Result, RodError};
use crate::extrusion::{cosserat_minimizer, min_det, smooth_cosserat, tubular_thickness, CosseratField};
use crate::geometry::is_injective;
use crate::injectify::{injectify, InjectifyOptions};
use crate::relaxation::{recovery_rod_sequence, RecoveryTerms, Schedules};
use crate::witness::{find_injective_witness, WitnessStatus, DEFAULT_BUDGET};

/// Value of the limit functional: finite, +inf for a certified
/// interpenetration, or unknown when neither a witness nor a crossing is found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitValue {
    Finite(f64),
    Infinite,
    Unknown,
}

impl LimitValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            LimitValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_text(self) -> String {
        match self {
            LimitValue::Finite(v) => format!("{v}"),
            LimitValue::Infinite => "inf".into(),
            LimitValue::Unknown => "unknown".into(),
        }
    }
}

impl Serialize for LimitValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LimitValue::Finite(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_text()),
        }
    }
}

pub const WITNESS_TOL: f64 = 1e-3;

/// J(y) = integral of Cf(y') on non-interpenetrative rods.
pub fn limit_energy(y: &PolylineCurve, table: &ConvexEnvelopeTable) -> Result<LimitValue> {
    if !is_injective(y) {
        match find_injective_witness(y, WITNESS_TOL, DEFAULT_BUDGET).status {
            WitnessStatus::WitnessFound => {}
            WitnessStatus::InterpenetrationDetected => return Ok(LimitValue::Infinite),
            WitnessStatus::Unknown => return Ok(LimitValue::Unknown),
        }
    }
    Ok(LimitValue::Finite(rod_energy(y, table)?))
}

/// Fiber average over x2 in (-1/2, 1/2), exact at every mesh column and
/// interpolated linearly between columns.
pub fn project_pi(field: &BulkField) -> Result<PolylineCurve> {
    let mut cols: Vec<f64> = field.reference.iter().map(|p| p.x).collect();
    cols.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cols.dedup();
    if cols.len() < 2 {
        return Err(RodError::Mesh("mesh has fewer than two columns".into()));
    }
    let x_max = *cols.last().unwrap();
    let tris: Vec<[Vec2; 3]> = field.triangles.iter().map(|t| t.map(|i| field.reference[i])).collect();
    let vals: Vec<[Vec2; 3]> = field.triangles.iter().map(|t| t.map(|i| field.values[i])).collect();
    // Triangles meeting each column, taken from the right except at the last.
    let mut at_col: Vec<Vec<usize>> = vec![Vec::new(); cols.len()];
    for (k, t) in tris.iter().enumerate() {
        let lo = t.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let hi = t.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let first = cols.partition_point(|&c| c < lo);
        let last = cols.partition_point(|&c| c < hi);
        for c in first..last {
            at_col[c].push(k);
        }
        if hi == x_max && lo < hi {
            at_col[cols.len() - 1].push(k);
        }
    }
    let values: Vec<Vec2> = cols
        .par_iter()
        .zip(&at_col)
        .map(|(&x, list)| {
            let mut acc = Vec2::zeros();
            for &k in list {
                let (t, u) = (&tris[k], &vals[k]);
                let mut hits: Vec<(f64, Vec2)> = Vec::with_capacity(4);
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let (p, q) = (t[i], t[j]);
                    if p.x == q.x {
                        if p.x == x {
                            hits.push((p.y, u[i]));
                            hits.push((q.y, u[j]));
                        }
                    } else if (p.x.min(q.x)..=p.x.max(q.x)).contains(&x) {
                        let s = (x - p.x) / (q.x - p.x);
                        hits.push((p.y + s * (q.y - p.y), u[i] + (u[j] - u[i]) * s));
                    }
                }
                let bottom = hits.iter().min_by(|a, b| a.0.partial_cmp(&b.0).unwrap()).unwrap();
                let top = hits.iter().max_by(|a, b| a.0.partial_cmp(&b.0).unwrap()).unwrap();
                acc += (bottom.1 + top.1) * (0.5 * (top.0 - bottom.0));
            }
            acc
        })
        .collect();
    PolylineCurve::new(cols, values)
}

/// Closed boundary polygon of the mesh (edges used by one triangle), or
/// None when it is not a single cycle.
pub fn mesh_boundary(field: &BulkField) -> Option<Vec<Vec2>> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &field.triangles {
        for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *count.entry((i.min(j), i.max(j))).or_default() += 1;
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for t in &field.triangles {
        let area = crate::curve::det2(field.reference[t[1]] - field.reference[t[0]], field.reference[t[2]] - field.reference[t[0]]);
        let t = if area > 0.0 { *t } else { [t[0], t[2], t[1]] };
        for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            if count[&(i.min(j), i.max(j))] == 1 && next.insert(i, j).is_some() {
                return None;
            }
        }
    }
    let &start = next.keys().min()?;
    let mut cycle = vec![start];
    let mut cur = next[&start];
    while cur != start {
        cycle.push(cur);
        cur = *next.get(&cur)?;
        if cycle.len() > next.len() {
            return None;
        }
    }
    if cycle.len() != next.len() {
        return None;
    }
    let mut pts: Vec<Vec2> = cycle.iter().map(|&i| field.values[i]).collect();
    pts.push(pts[0]);
    Some(pts)
}

/// A piecewise-affine map with positive Jacobian everywhere and a simple
/// boundary image is injective.
pub fn bulk_injective(field: &BulkField) -> Result<bool> {
    for k in 0..field.triangles.len() {
        if field.gradient(k)?.0.determinant() <= 0.0 {
            return Ok(false);
        }
    }
    Ok(match mesh_boundary(field) {
        Some(pts) => PolylineCurve::uniform(pts).map(|c| is_injective(&c)).unwrap_or(false),
        None => false,
    })
}

/// L^p norm of d2 y over the reference strip.
pub fn transverse_norm(field: &BulkField, p: f64) -> Result<f64> {
    let mut s = 0.0;
    for k in 0..field.triangles.len() {
        let (g, area) = field.gradient(k)?;
        s += Vec2::from(g.column(1)).norm().powf(p) * area;
    }
    Ok(s.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StepSpec {
    pub k: usize,
    /// Corner sharpness; chosen from the rod when absent.
    pub i: Option<usize>,
    /// Thickness; the certified tubular thickness when absent.
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BulkTerms {
    /// c0 distance of the injective approximation from y.
    pub approx_c0: f64,
    pub rod: RecoveryTerms,
    /// J_h minus the rod energy of the laminated rod: the corner windows.
    pub smoothing: f64,
    pub eps_tilde: f64,
    pub det_floor: f64,
}

#[derive(Debug, Clone)]
pub struct BulkRecovery {
    pub field: BulkField,
    pub curve: PolylineCurve,
    pub cosserat: CosseratField,
    pub h: f64,
    pub h_max: f64,
    pub i: usize,
    pub k: usize,
    pub energy: f64,
    pub det_min: f64,
    pub certified: bool,
    pub terms: BulkTerms,
}

/// Columns per field cell in the bulk mesh.
pub const COLUMN_SPLIT: usize = 4;
pub const ROWS: usize = 4;

fn pow2_at_least(x: f64) -> usize {
    let mut i = 1usize;
    while (i as f64) < x {
        i *= 2;
    }
    i
}

/// y_{h,k,i}(x1, x2) = ybar_k(x1) + h x2 b_{k,i}(x1) on a structured mesh.
pub fn recovery_bulk_sequence(
    y: &PolylineCurve,
    table: &ConvexEnvelopeTable,
    w: &dyn EnergyDensity,
    spec: StepSpec,
) -> Result<BulkRecovery> {
    let k = spec.k;
    if k == 0 {
        return Err(RodError::Precondition("k must be positive".into()));
    }
    let (base, approx_c0) = if is_injective(y) {
        (y.clone(), 0.0)
    } else {
        let delta = 1.0 / (4.0 * k as f64);
        let (out, _) = injectify(y, delta, w.p(), &InjectifyOptions::default())?;
        let d = c0_distance(&out, y);
        (out, d)
    };
    let rec = recovery_rod_sequence(&base, table, k, &Schedules::defaults())?;
    let rod = rec.curve;
    let b = cosserat_minimizer(&rod, &table.f)?;
    let det_b = min_det(&rod, &b);
    if !(det_b > 0.0) {
        return Err(RodError::Degeneracy("minimizer field loses orientation".into()));
    }
    let delta = det_b / 2.0;
    let bp = rod.breakpoints();
    let min_len = bp.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let corners = rod.num_segments().saturating_sub(1).max(1);
    let i = spec.i.unwrap_or_else(|| pow2_at_least((4.0 / min_len).max(8.0 * (k * corners) as f64)));
    let sm = smooth_cosserat(&rod, &b, i, delta)?;
    let floor = sm.floor;
    let strip = tubular_thickness(&rod, &sm.field, floor, 1.0, k as u64)?;
    let h_max = strip.h;
    let h = spec.h.unwrap_or(h_max);
    if !(h > 0.0) || h > h_max {
        return Err(RodError::Precondition(format!("thickness {h} exceeds the certified {h_max}")));
    }
    let certified = if h == h_max { strip.certificate.passes } else { strip.recertify(h, k as u64).passes };
    let knots = merge_breakpoints(rod.breakpoints(), sm.field.knots());
    let mut xs = Vec::with_capacity((knots.len() - 1) * COLUMN_SPLIT + 1);
    for wdw in knots.windows(2) {
        for c in 0..COLUMN_SPLIT {
            xs.push(wdw[0] + (wdw[1] - wdw[0]) * c as f64 / COLUMN_SPLIT as f64);
        }
    }
    xs.push(1.0);
    let rows: Vec<f64> = (0..=ROWS).map(|r| -0.5 + r as f64 / ROWS as f64).collect();
    let field = sm.field.clone();
    let bulk = BulkField::from_grid(&xs, &rows, |x, r| rod.eval_unchecked(x) + field.eval(x) * (h * r));
    let energy = bulk_energy(&bulk, w, h, certified)?;
    let det_min = bulk.min_scaled_det(h)?;
    let smoothing = energy - rec.terms.energy;
    Ok(BulkRecovery {
        field: bulk,
        curve: rod,
        cosserat: sm.field,
        h,
        h_max,
        i,
        k,
        energy,
        det_min,
        certified,
        terms: BulkTerms { approx_c0, rod: rec.terms, smoothing, eps_tilde: sm.eps_tilde, det_floor: floor },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaStep {
    pub h: f64,
    pub k: usize,
    pub i: usize,
    pub j_h: f64,
    pub j: LimitValue,
    pub gap: f64,
    pub det_min: f64,
    pub proj_err: f64,
    /// J_h <= J + 3/k + table gap
    pub chain_holds: bool,
    pub terms: Option<BulkTerms>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeStep {
    pub h: f64,
    pub j_h: f64,
    pub proj_c0: f64,
    pub transverse: f64,
    pub transverse_scaled: f64,
    /// ((J_h + c0)/c)^(1/p), the coercivity bound on the scaled transverse norm.
    pub transverse_bound: f64,
    pub liminf_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LiminfProbe {
    pub j: LimitValue,
    pub steps: Vec<ProbeStep>,
    pub liminf_holds: bool,
    pub scaled_bounded: bool,
    pub transverse_vanishing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaReport {
    pub density: String,
    pub p: f64,
    pub j: LimitValue,
    pub steps: Vec<GammaStep>,
    pub probe: Option<LiminfProbe>,
}

impl GammaReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,k,i,J_h,J,gap,det_min,proj_err\n");
        for st in &self.steps {
            if st.skipped.is_some() {
                s.push_str(&format!("{},{},{},skipped,{},,,\n", st.h, st.k, st.i, st.j.to_text()));
            } else {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    st.h,
                    st.k,
                    st.i,
                    st.j_h,
                    st.j.to_text(),
                    st.gap,
                    st.det_min,
                    st.proj_err
                ));
            }
        }
        s
    }
}

pub const LIMINF_TOL: f64 = 1e-9;

/// J_h along given bulk sequences against J at the target rod.
pub fn liminf_probe(
    y: &PolylineCurve,
    table: &ConvexEnvelopeTable,
    w: &dyn EnergyDensity,
    sequence: &[(f64, BulkField)],
) -> Result<LiminfProbe> {
    let j = limit_energy(y, table)?;
    let p = w.p();
    let mut steps = Vec::with_capacity(sequence.len());
    for (h, field) in sequence {
        let cert = bulk_injective(field)?;
        let j_h = bulk_energy(field, w, *h, cert)?;
        let proj = project_pi(field)?;
        let t = transverse_norm(field, p)?;
        let bound = ((j_h + w.c0()) / w.c()).powf(1.0 / p);
        let liminf_ok = match j {
            LimitValue::Finite(v) => j_h >= v - LIMINF_TOL,
            _ => true,
        };
        steps.push(ProbeStep {
            h: *h,
            j_h,
            proj_c0: c0_distance(&proj, y),
            transverse: t,
            transverse_scaled: t / h,
            transverse_bound: bound,
            liminf_ok,
        });
    }
    let finite: Vec<&ProbeStep> = steps.iter().filter(|s| s.j_h.is_finite()).collect();
    let scaled_bounded = finite.iter().all(|s| s.transverse_scaled <= s.transverse_bound * (1.0 + 1e-9));
    let transverse_vanishing = finite.windows(2).all(|w| w[1].transverse <= w[0].transverse)
        && finite.last().map_or(true, |s| s.transverse <= s.h * s.transverse_bound * (1.0 + 1e-9));
    Ok(LiminfProbe { j, liminf_holds: steps.iter().all(|s| s.liminf_ok), steps, scaled_bounded, transverse_vanishing })
}

/// Recovery steps along the schedule, optionally with a liminf probe.
pub fn gamma_experiment(
    y: &PolylineCurve,
    table: &ConvexEnvelopeTable,
    w: Arc<dyn EnergyDensity>,
    schedule: &[StepSpec],
    probe: Option<&[(f64, BulkField)]>,
) -> Result<GammaReport> {
    let j = limit_energy(y, table)?;
    let p = w.p();
    let steps: Vec<GammaStep> = schedule
        .par_iter()
        .map(|spec| match recovery_bulk_sequence(y, table, w.as_ref(), *spec) {
            Ok(r) => {
                let proj = project_pi(&r.field).ok();
                let proj_err = proj.map_or(f64::NAN, |c| sobolev_parts(&c, y, p).0);
                let gap = match j {
                    LimitValue::Finite(v) => (r.energy - v).abs(),
                    _ => f64::INFINITY,
                };
                let chain_holds = match j {
                    LimitValue::Finite(v) => r.energy <= v + 3.0 / r.k as f64 + table.gamma,
                    _ => false,
                };
                GammaStep {
                    h: r.h,
                    k: r.k,
                    i: r.i,
                    j_h: r.energy,
                    j,
                    gap,
                    det_min: r.det_min,
                    proj_err,
                    chain_holds,
                    terms: Some(r.terms),
                    skipped: None,
                }
            }
            Err(e) => GammaStep {
                h: spec.h.unwrap_or(f64::NAN),
                k: spec.k,
                i: spec.i.unwrap_or(0),
                j_h: f64::NAN,
                j,
                gap: f64::NAN,
                det_min: f64::NAN,
                proj_err: f64::NAN,
                chain_holds: false,
                terms: None,
                skipped: Some(e.to_string()),
            },
        })
        .collect();
    let probe = match probe {
        Some(seq) => Some(liminf_probe(y, table, w.as_ref(), seq)?),
        None => None,
    };
    Ok(GammaReport { density: w.name().to_string(), p, j, steps, probe })
}

/// y(x1) + h x2 b(x1) with a constant director on a uniform grid; a handy
/// bulk sequence for probes.
pub fn straight_extrusion(y: &PolylineCurve, b: Vec2, h: f64, cols: usize, rows: usize) -> BulkField {
    let mut xs = merge_breakpoints(y.breakpoints(), &(0..=cols).map(|c| c as f64 / cols as f64).collect::<Vec<_>>());
    xs.dedup();
    let rs: Vec<f64> = (0..=rows).map(|r| -0.5 + r as f64 / rows as f64).collect();
    BulkField::from_grid(&xs, &rs, |x, r| y.eval_unchecked(x) + b * (h * r))
}

pub fn scaled_gradient(field: &BulkField, k: usize, h: f64) -> Result<crate::energy::Mat2> {
    let (g, _) = field.gradient(k)?;
    Ok(mat_cols(g.column(0).into(), Vec2::from(g.column(1)) / h))
}
