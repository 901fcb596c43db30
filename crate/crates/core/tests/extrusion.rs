use approx::assert_relative_eq;
use proptest::prelude::*;
use rodlab::curve::{det2, Vec2};
use rodlab::extrusion::*;
use rodlab::fixtures;
use rodlab::{PolylineCurve, RodError};

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

fn smoothed_u(i: usize, delta: f64) -> Smoothed {
    let y = fixtures::u_shape(0.2);
    let b = cosserat_normal(&y).unwrap();
    smooth_cosserat(&y, &b, i, delta).unwrap()
}

#[test]
fn normal_of_horizontal_and_vertical_pieces() {
    let b = cosserat_normal(&fixtures::straight()).unwrap();
    assert_eq!(b.eval(0.3), v(0.0, 1.0));
    assert_eq!(min_det(&fixtures::straight(), &b), 1.0);
    let y = PolylineCurve::from_points(vec![0.0, 1.0], &[[0.0, 0.0], [0.0, 2.0]]).unwrap();
    let b = cosserat_normal(&y).unwrap();
    assert_eq!(b.eval(0.5), v(-1.0, 0.0));
    assert_eq!(min_det(&y, &b), 2.0);
}

#[test]
fn fold_normal_flips() {
    let b = cosserat_normal(&fixtures::fold()).unwrap();
    assert_eq!(b.eval(0.25), v(0.0, 1.0));
    assert_eq!(b.eval(0.75), v(0.0, -1.0));
    assert!(!b.is_continuous());
    assert_eq!(b.provenance, FieldProvenance::Normal);
}

#[test]
fn zero_speed_piece_is_degenerate() {
    let y = PolylineCurve::from_points(vec![0.0, 0.5, 1.0], &[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
    assert!(matches!(cosserat_normal(&y), Err(RodError::DegenerateInput(_))));
}

#[test]
fn right_angle_corner() {
    let y = fixtures::l_shape();
    let b = cosserat_normal(&y).unwrap();
    let s = smooth_cosserat(&y, &b, 16, 0.5).unwrap();
    // slopes (2,0) and (0,2)
    assert_eq!(s.zetas, vec![v(-2.0, 2.0)]);
    assert_eq!(s.eps_tilde, 4.0);
    assert_eq!(s.floor, 0.5);
    assert!(s.min_det >= 0.5);
    assert!(s.field.is_continuous());
    assert_eq!(s.field.provenance, FieldProvenance::Smoothed);
}

#[test]
fn unit_right_angle_zeta() {
    let y = PolylineCurve::from_points(vec![0.0, 0.5, 1.0], &[[0.0, 0.0], [0.5, 0.0], [0.5, 0.5]]).unwrap();
    let b = cosserat_normal(&y).unwrap();
    let s = smooth_cosserat(&y, &b, 8, 0.25).unwrap();
    assert_eq!(s.zetas, vec![v(-1.0, 1.0)]);
    assert_eq!(det2(v(1.0, 0.0), s.zetas[0]), 1.0);
    assert_eq!(det2(v(0.0, 1.0), s.zetas[0]), 1.0);
}

#[test]
fn straight_chain_carries_the_field_over() {
    let y = PolylineCurve::from_points(vec![0.0, 0.5, 1.0], &[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]).unwrap();
    let b = cosserat_normal(&y).unwrap();
    let s = smooth_cosserat(&y, &b, 8, 0.25).unwrap();
    assert_eq!(s.zetas, vec![v(0.0, 1.0)]);
    for k in 0..=100 {
        assert_eq!(s.field.eval(k as f64 / 100.0), v(0.0, 1.0));
    }
}

#[test]
fn clockwise_turn() {
    let y = PolylineCurve::from_points(vec![0.0, 0.5, 1.0], &[[0.0, 0.0], [0.5, 0.0], [0.5, -0.5]]).unwrap();
    let b = cosserat_normal(&y).unwrap();
    let s = smooth_cosserat(&y, &b, 16, 0.25).unwrap();
    assert_eq!(s.zetas, vec![v(1.0, 1.0)]);
    assert_eq!(s.eps_tilde, 1.0);
    let mut r = fixtures::rng(3);
    use rand::Rng;
    for _ in 0..10_000 {
        let t: f64 = r.gen_range(0.0..1.0);
        let a = y.slope(y.segment_index(t));
        assert!(det2(a, s.field.eval(t)) >= s.floor);
    }
}

#[test]
fn smoothing_preconditions() {
    let y = fixtures::u_shape(0.2);
    let b = cosserat_normal(&y).unwrap();
    assert!(matches!(smooth_cosserat(&y, &b, 4, 0.1), Err(RodError::Precondition(_))));
    assert!(matches!(smooth_cosserat(&y, &b, 16, 0.3), Err(RodError::Precondition(_))));
    let f = fixtures::fold();
    let bf = cosserat_normal(&f).unwrap();
    assert!(smooth_cosserat(&f, &bf, 16, 0.1).is_err());
}

#[test]
fn det_floor_and_convergence_across_sharpness() {
    use rand::Rng;
    let y = fixtures::u_shape(0.2);
    let b = cosserat_normal(&y).unwrap();
    let mut last = f64::INFINITY;
    for i in [16, 64, 256] {
        let s = smooth_cosserat(&y, &b, i, 0.1).unwrap();
        assert_eq!(s.floor, 0.1);
        let mut r = fixtures::rng(i as u64);
        for _ in 0..10_000 {
            let t: f64 = r.gen_range(0.0..1.0);
            assert!(det2(y.slope(y.segment_index(t)), s.field.eval(t)) >= s.floor);
        }
        let d = s.field.lp_distance(&b, 2.0);
        assert!(d < last, "i = {i}: {d} !< {last}");
        last = d;
    }
}

#[test]
fn lp_distance_of_a_single_jump() {
    let b = CosseratField::constant(vec![0.0, 1.0], vec![v(0.0, 1.0)], FieldProvenance::Given).unwrap();
    let c = CosseratField::constant(vec![0.0, 0.5, 1.0], vec![v(0.0, 1.0), v(0.0, 3.0)], FieldProvenance::Given)
        .unwrap();
    assert_relative_eq!(b.lp_distance(&c, 2.0), 2.0f64.sqrt(), epsilon = 1e-14);
    assert_relative_eq!(b.lp_distance(&c, 3.0), 4.0f64.powf(1.0 / 3.0), epsilon = 1e-10);
    assert_eq!(b.lp_distance(&b, 2.0), 0.0);
}

#[test]
fn straight_segment_takes_any_cap() {
    let y = fixtures::straight();
    let b = cosserat_normal(&y).unwrap();
    for cap in [0.1, 1.0, 10.0] {
        let m = tubular_thickness(&y, &b, 0.5, cap, 1).unwrap();
        assert_eq!(m.h, cap);
        assert_eq!(m.binding, "cap");
        assert!(m.alpha.is_infinite());
        assert!(m.certificate.passes, "cap {cap}");
    }
}

#[test]
fn u_shape_passes_at_h_and_fails_at_eight_h() {
    let y = fixtures::u_shape(0.2);
    for i in [16, 64, 256] {
        let s = smoothed_u(i, 0.1);
        let m = tubular_thickness(&y, &s.field, 0.1, 1.0, 7).unwrap();
        assert_relative_eq!(m.alpha, 0.2, epsilon = 1e-15);
        assert!(m.h < m.alpha / (4.0 * m.b_sup));
        assert!(m.certificate.passes, "i = {i}: {:?}", m.certificate);
        assert_eq!(m.certificate.samples, 10_000);
        assert!(m.certificate.min_det >= 0.05);
        let wide = m.recertify(8.0 * m.h, 7);
        assert!(!wide.passes, "i = {i}: {wide:?}");
    }
    let m = tubular_thickness(&y, &smoothed_u(16, 0.1).field, 0.1, 1.0, 7).unwrap();
    assert_eq!(m.binding, "local");
    assert_relative_eq!(m.h, 0.010211985024104362, max_relative = 1e-12);
}

#[test]
fn halving_h_keeps_the_certificate() {
    let y = fixtures::u_shape(0.2);
    let s = smoothed_u(16, 0.1);
    let m = tubular_thickness(&y, &s.field, 0.1, 1.0, 11).unwrap();
    let mut h = m.h;
    for _ in 0..5 {
        h /= 2.0;
        assert!(m.recertify(h, 11).passes, "h = {h}");
    }
}

#[test]
fn tubular_preconditions() {
    let f = fixtures::fold();
    let bf = cosserat_normal(&f).unwrap();
    assert!(matches!(tubular_thickness(&f, &bf, 0.1, 1.0, 0), Err(RodError::Precondition(_))));
    let y = fixtures::u_shape(0.2);
    let b = cosserat_normal(&y).unwrap();
    // jumping field
    assert!(matches!(tubular_thickness(&y, &b, 0.1, 1.0, 0), Err(RodError::Precondition(_))));
    let s = smoothed_u(16, 0.1);
    assert!(matches!(tubular_thickness(&y, &s.field, 0.4, 1.0, 0), Err(RodError::Precondition(_))));
    assert!(tubular_thickness(&fixtures::square_loop(), &s.field, 0.1, 1.0, 0).is_err());
    assert!(tubular_thickness(&fixtures::x_crossing(), &s.field, 0.1, 1.0, 0).is_err());
}

#[test]
fn touching_rod_has_no_clearance() {
    // a hairpin whose arms share a point at parameter distance 0.5
    let y = PolylineCurve::uniform(vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0), v(0.5, 0.0)]);
    let y = y.unwrap();
    assert_eq!(clearance(&y, 0.05), 0.0);
}

#[test]
fn cn_on_fold_crossing_and_arc() {
    let r = ciarlet_necas_1d_check(&fixtures::fold());
    assert_eq!((r.lhs, r.rhs, r.verdict), (2.0, 1.0, CnVerdict::Violated));
    let r = ciarlet_necas_1d_check(&fixtures::x_crossing());
    assert_relative_eq!(r.lhs, 1.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    assert_relative_eq!(r.lhs, r.rhs, epsilon = 1e-12);
    assert_eq!(r.verdict, CnVerdict::Satisfied);
    let r = ciarlet_necas_1d_check(&fixtures::u_shape(0.2));
    assert_relative_eq!(r.lhs, 0.5, epsilon = 1e-15);
    assert_relative_eq!(r.lhs, r.rhs, epsilon = 1e-15);
    assert_eq!(r.verdict, CnVerdict::Satisfied);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn normal_is_rotation_equivariant(theta in -3.2f64..3.2, seed in 0u64..1000) {
        let y = fixtures::random_injective(&mut fixtures::rng(seed), 6);
        let (c, s) = (theta.cos(), theta.sin());
        let rot = |p: Vec2| v(c * p.x - s * p.y, s * p.x + c * p.y);
        let z = y.map_vertices(|p| rot(p) + v(0.3, -1.0)).unwrap();
        let (by, bz) = (cosserat_normal(&y).unwrap(), cosserat_normal(&z).unwrap());
        for k in 0..50 {
            let t = (k as f64 + 0.5) / 50.0;
            prop_assert!((rot(by.eval(t)) - bz.eval(t)).norm() < 1e-12);
            prop_assert!((bz.eval(t).norm() - 1.0).abs() < 1e-12);
        }
    }
}
