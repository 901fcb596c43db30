use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use rodlab::energy::*;
use rodlab::fixtures;
use rodlab::gamma_lab::*;
use rodlab::relaxation::affine_limit;
use rodlab::{c0_distance, Vec2};

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

fn w() -> Arc<dyn EnergyDensity> {
    Arc::new(NeoHookean2D)
}

fn table() -> &'static ConvexEnvelopeTable {
    static T: OnceLock<ConvexEnvelopeTable> = OnceLock::new();
    T.get_or_init(|| {
        let f = ReducedDensity::new(w());
        convexify(&f, &ConvexifyOptions { n: 65, gamma: 2e-2, ..Default::default() }).unwrap()
    })
}

fn schedule(ks: &[usize]) -> Vec<StepSpec> {
    ks.iter().map(|&k| StepSpec { k, i: None, h: None }).collect()
}

fn grid(cols: usize, rows: usize, map: impl Fn(f64, f64) -> Vec2) -> BulkField {
    let xs: Vec<f64> = (0..=cols).map(|c| c as f64 / cols as f64).collect();
    let rs: Vec<f64> = (0..=rows).map(|r| -0.5 + r as f64 / rows as f64).collect();
    BulkField::from_grid(&xs, &rs, map)
}

#[test]
fn projection_of_the_flat_strip() {
    let f = grid(8, 4, |x, r| v(x, 0.01 * r));
    let p = project_pi(&f).unwrap();
    assert_eq!(p.num_segments(), 8);
    for (k, q) in p.vertices().iter().enumerate() {
        assert_relative_eq!(q.x, k as f64 / 8.0, epsilon = 1e-15);
        assert!(q.y.abs() < 1e-16);
    }
}

#[test]
fn projection_of_a_quadratic_profile() {
    let f = grid(16, 64, |x, r| v(x + r * r, 0.0));
    let p = project_pi(&f).unwrap();
    for k in 0..=32 {
        let t = k as f64 / 32.0;
        assert_relative_eq!(p.eval(t).unwrap().x, t + 1.0 / 12.0, epsilon = 1e-4);
    }
}

#[test]
fn projection_on_unstructured_triangles() {
    // one cell cut the other way, affine data: the average is exact
    let reference = vec![v(0.0, -0.5), v(1.0, -0.5), v(1.0, 0.5), v(0.0, 0.5), v(0.5, 0.0)];
    let values: Vec<Vec2> = reference.iter().map(|p| v(2.0 * p.x + p.y, 3.0 * p.y)).collect();
    let triangles = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
    let f = BulkField { reference, values, triangles };
    let p = project_pi(&f).unwrap();
    assert_eq!(p.breakpoints(), &[0.0, 0.5, 1.0]);
    for (q, t) in p.vertices().iter().zip([0.0, 0.5, 1.0]) {
        assert_relative_eq!(q.x, 2.0 * t, epsilon = 1e-15);
        assert!(q.y.abs() < 1e-15);
    }
    assert!(bulk_injective(&f).unwrap());
}

#[test]
fn boundary_of_a_grid_mesh() {
    let f = grid(3, 2, |x, r| v(x, r));
    let b = mesh_boundary(&f).unwrap();
    assert_eq!(b.len(), 11);
    assert!(bulk_injective(&f).unwrap());
    let folded = grid(4, 1, |x, r| v(1.0 - (2.0 * x - 1.0).abs(), r));
    assert!(!bulk_injective(&folded).unwrap());
}

#[test]
fn stress_free_rod() {
    let y = affine_limit(v(1.0, 0.0));
    let r = gamma_experiment(&y, table(), w(), &schedule(&[1, 2, 4]), None).unwrap();
    for st in &r.steps {
        assert!(st.skipped.is_none());
        assert!(st.j_h.abs() < 1e-12, "{}", st.j_h);
        assert!(st.gap <= table().gamma);
        assert_eq!(st.proj_err, 0.0);
    }
}

#[test]
fn stretched_rod_needs_no_oscillation() {
    let y = affine_limit(v(2.0, 0.0));
    let r = gamma_experiment(&y, table(), w(), &schedule(&[2, 4, 8, 16]), None).unwrap();
    for st in &r.steps {
        assert_relative_eq!(st.j_h, 3.0 - 2.0 * 2f64.ln(), epsilon = 1e-12);
        assert!(st.gap < table().gamma);
        assert!(st.chain_holds);
        assert!(st.det_min > 0.0);
    }
}

#[test]
fn compressed_rod_gap_decays() {
    let y = affine_limit(v(0.5, 0.0));
    let r = gamma_experiment(&y, table(), w(), &schedule(&[2, 4, 8, 16]), None).unwrap();
    let gaps: Vec<f64> = r.steps.iter().map(|s| s.gap).collect();
    let frozen = [0.3955010115286495, 0.11485295535377307, 0.03712255123383942, 0.013537851650950347];
    for (g, f) in gaps.iter().zip(frozen) {
        assert_relative_eq!(*g, f, max_relative = 1e-6);
    }
    for (st, k) in r.steps.iter().zip([2.0, 4.0, 8.0, 16.0]) {
        assert!(st.gap <= 5.0 / k);
        assert!(st.chain_holds);
        assert!(st.det_min > 0.0);
        assert!(st.j_h.is_finite());
        let t = st.terms.as_ref().unwrap();
        assert!(t.smoothing >= 0.0);
        assert_eq!(t.approx_c0, 0.0);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    let csv = r.to_csv();
    assert!(csv.starts_with("h,k,i,J_h,J,gap,det_min,proj_err\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn projection_returns_the_laminated_rod() {
    let y = affine_limit(v(0.5, 0.0));
    let r = recovery_bulk_sequence(&y, table(), &NeoHookean2D, StepSpec { k: 4, i: None, h: None }).unwrap();
    let p = project_pi(&r.field).unwrap();
    assert!(c0_distance(&p, &r.curve) < 1e-12);
    assert!(r.certified);
    assert!(r.h > 0.0 && r.h == r.h_max);
    let half = recovery_bulk_sequence(&y, table(), &NeoHookean2D, StepSpec { k: 4, i: None, h: Some(r.h / 2.0) })
        .unwrap();
    assert!(half.certified);
    assert!(half.energy.is_finite());
}

#[test]
fn thickness_above_the_certified_one_is_skipped() {
    let y = affine_limit(v(0.5, 0.0));
    let sched = [StepSpec { k: 2, i: None, h: Some(0.5) }, StepSpec { k: 2, i: None, h: None }];
    let r = gamma_experiment(&y, table(), w(), &sched, None).unwrap();
    assert!(r.steps[0].skipped.as_ref().unwrap().contains("exceeds the certified"));
    assert!(r.steps[1].skipped.is_none());
    assert!(r.to_csv().contains(",skipped,"));
}

#[test]
fn crossing_rod_has_infinite_limit() {
    assert_eq!(limit_energy(&fixtures::x_crossing(), table()).unwrap(), LimitValue::Infinite);
    let j = limit_energy(&fixtures::l_shape(), table()).unwrap().finite().unwrap();
    assert!((j - (3.0 - 2.0 * 2f64.ln())).abs() <= table().gamma);
}

#[test]
fn liminf_probe_on_straight_extrusions() {
    let y = affine_limit(v(0.5, 0.0));
    let seq: Vec<(f64, BulkField)> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&h| (h, straight_extrusion(&y, v(0.0, 1.0), h, 8, 2)))
        .collect();
    let p = liminf_probe(&y, table(), &NeoHookean2D, &seq).unwrap();
    assert!(p.liminf_holds && p.scaled_bounded && p.transverse_vanishing);
    for s in &p.steps {
        // W((1/2,0)|(0,1)) = 1/4 + 1 - 2 ln(1/2) - 2
        assert_relative_eq!(s.j_h, 2f64.ln() * 2.0 - 0.75, epsilon = 1e-12);
        assert_relative_eq!(s.transverse_scaled, 1.0, epsilon = 1e-12);
        assert!(s.proj_c0 < 1e-15);
    }
}

#[test]
fn orientation_violating_sequence_is_infinite() {
    let y = affine_limit(v(0.5, 0.0));
    let seq = vec![(0.1, straight_extrusion(&y, v(0.0, -1.0), 0.1, 8, 2))];
    let p = liminf_probe(&y, table(), &NeoHookean2D, &seq).unwrap();
    assert_eq!(p.steps[0].j_h, f64::INFINITY);
    assert!(p.liminf_holds);
}

#[test]
fn bent_rod_recovery() {
    let y = fixtures::l_shape();
    let r = gamma_experiment(&y, table(), w(), &schedule(&[2, 4]), None).unwrap();
    for st in &r.steps {
        assert!(st.skipped.is_none(), "{:?}", st.skipped);
        assert!(st.det_min > 0.0);
        assert!(st.j_h.is_finite());
    }
    assert!(r.steps[1].gap < r.steps[0].gap);
}

#[test]
fn report_is_deterministic() {
    let y = affine_limit(v(0.5, 0.0));
    let a = gamma_experiment(&y, table(), w(), &schedule(&[2, 4]), None).unwrap();
    let b = gamma_experiment(&y, table(), w(), &schedule(&[2, 4]), None).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
