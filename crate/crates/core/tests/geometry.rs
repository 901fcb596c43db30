use proptest::prelude::*;
use rodlab::fixtures;
use rodlab::geometry::*;
use rodlab::witness::{find_injective_witness, WitnessStatus};
use rodlab::{c0_distance, PolylineCurve, Vec2};

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

#[test]
fn l_shape_is_injective() {
    let r = self_intersections(&fixtures::l_shape());
    assert!(r.is_injective);
    assert!(r.violations.is_empty());
}

#[test]
fn x_chain_has_one_crossing_at_centre() {
    let r = self_intersections(&fixtures::x_crossing());
    assert_eq!(r.violations.len(), 1);
    let w = &r.violations[0];
    assert_eq!((w.i, w.j), (0, 2));
    assert_eq!(w.kind, ViolationKind::TransversalCrossing);
    let js = r.to_json_value();
    assert_eq!(js["violations"][0]["witness"][0], "0.5");
    assert_eq!(js["violations"][0]["witness"][1], "0.5");
}

#[test]
fn fold_overlaps() {
    let r = self_intersections(&fixtures::fold());
    assert!(!r.is_injective);
    assert_eq!(r.violations[0].kind, ViolationKind::Overlap);
}

#[test]
fn non_terminating_witness_renders_as_fraction() {
    let c = PolylineCurve::uniform(vec![v(0.0, 0.0), v(3.0, 1.0), v(3.0, 0.0), v(0.0, 2.0)]).unwrap();
    let r = self_intersections(&c);
    let js = r.to_json_value();
    let x = js["violations"][0]["witness"][1].as_str().unwrap().to_string();
    assert!(x.contains('/'), "{x}");
}

#[test]
fn image_lengths() {
    assert_eq!(image_length(&fixtures::straight()), 1.0);
    assert_eq!(image_length(&fixtures::fold()), 1.0);
    let x = PolylineCurve::uniform(vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0)]).unwrap();
    let two_diagonals = 2.0 * 2f64.sqrt() + 1.0;
    assert!((image_length(&x) - two_diagonals).abs() < 1e-15);
}

#[test]
fn winding_square() {
    let sq = fixtures::square_loop();
    assert_eq!(winding_degree(&sq, v(0.5, 0.5)).unwrap(), 1);
    assert_eq!(winding_degree(&sq, v(2.0, 2.0)).unwrap(), 0);
    assert_eq!(winding_degree(&sq, v(1.0, 0.5)), Err(rodlab::RodError::OnCurve));
    assert!(winding_degree(&fixtures::l_shape(), v(0.5, 0.5)).is_err());
}

#[test]
fn horned_devil_degree_one_in_rectangle_and_horns() {
    let d = fixtures::horned_devil();
    for p in [v(19.7, 0.0), v(18.32, 3.0), v(21.2, 3.0)] {
        assert_eq!(winding_degree(&d, p).unwrap(), 1, "at {p:?}");
    }
    assert_eq!(winding_degree(&d, v(25.0, 0.0)).unwrap(), 0);
    let map = degree_map(&d, 100, 0.02).unwrap();
    assert!(map.defined_values().iter().all(|x| *x == 0 || *x == 1));
}

#[test]
fn square_and_figure_eight_maps() {
    let map = degree_map(&fixtures::square_loop(), 100, 0.01).unwrap();
    assert_eq!(map.defined_values(), vec![0, 1]);
    let fe = degree_map(&fixtures::figure_eight(), 60, 0.01).unwrap();
    assert_eq!(fe.defined_values(), vec![-1, 0, 1]);
    assert!(map.to_csv().lines().any(|l| l.ends_with(",NA")));
}

#[test]
fn witness_statuses() {
    let l = find_injective_witness(&fixtures::l_shape(), 0.01, 200);
    assert_eq!(l.status, WitnessStatus::WitnessFound);
    assert_eq!(l.c0_gap, 0.0);
    let t = find_injective_witness(&fixtures::tangential_touch(), 0.01, 200);
    assert_eq!(t.status, WitnessStatus::WitnessFound);
    let w = t.witness.unwrap();
    assert!(self_intersections(&w).is_injective);
    assert!(c0_distance(&w, &fixtures::tangential_touch()) <= 0.01);
    let x = find_injective_witness(&fixtures::x_crossing(), 0.01, 200);
    assert_eq!(x.status, WitnessStatus::InterpenetrationDetected);
    let f = find_injective_witness(&fixtures::fold(), 0.01, 200);
    assert_eq!(f.status, WitnessStatus::WitnessFound);
    let hd = find_injective_witness(&fixtures::horned_devil(), 0.05, 200);
    assert_ne!(hd.status, WitnessStatus::WitnessFound);
}

#[test]
fn vertex_touch_that_crosses_is_certified() {
    // Second strand passes through the first strand's vertex from one side to the other.
    let c = PolylineCurve::uniform(vec![v(0.0, 0.0), v(1.0, 1.0), v(2.0, 0.0), v(2.0, 2.0), v(1.0, 1.0), v(1.0, -1.0)])
        .unwrap();
    let r = find_injective_witness(&c, 0.01, 200);
    assert_eq!(r.status, WitnessStatus::InterpenetrationDetected);
}

#[test]
fn oracle_on_fixtures() {
    for name in fixtures::NAMES {
        let c = fixtures::by_name(name).unwrap();
        assert_eq!(self_intersections(&c), self_intersections_brute(&c), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn sweep_matches_brute(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let c = fixtures::random_polyline(&mut rng, 50);
        prop_assert_eq!(self_intersections(&c), self_intersections_brute(&c));
    }

    #[test]
    fn image_length_below_parametric(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let c = fixtures::random_polyline(&mut rng, 30);
        let il = image_length(&c);
        prop_assert!(il <= c.length() + 1e-12);
        let r = self_intersections(&c);
        let overlaps = r.violations.iter().filter(|v| v.kind == ViolationKind::Overlap && v.i != v.j).count();
        if overlaps == 0 {
            prop_assert!((il - c.length()).abs() <= 1e-12 * c.length().max(1.0));
        } else {
            prop_assert!(il < c.length());
        }
        prop_assert!((il - image_length_brute(&c)).abs() <= 1e-12);
    }

    #[test]
    fn winding_invariant_under_rigid_motion(theta in 0.0..6.28f64, tx in -3.0..3.0f64, ty in -3.0..3.0f64) {
        let d = fixtures::horned_devil();
        let rot = |p: Vec2| Vec2::new(theta.cos() * p.x - theta.sin() * p.y + tx, theta.sin() * p.x + theta.cos() * p.y + ty);
        let moved = d.map_vertices(rot).unwrap();
        for p in [v(19.7, 0.0), v(18.32, 3.0), v(25.0, 0.0), v(17.0, 1.0)] {
            let a = winding_degree(&d, p).unwrap();
            let b = winding_degree(&moved, rot(p)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn witness_found_is_verified(seed in any::<u64>()) {
        let mut rng = fixtures::rng(seed);
        let c = fixtures::random_polyline(&mut rng, 8);
        let r = find_injective_witness(&c, 0.05, 100);
        if r.status == WitnessStatus::WitnessFound {
            let w = r.witness.unwrap();
            prop_assert!(self_intersections(&w).is_injective);
            prop_assert!(c0_distance(&w, &c) <= 0.05);
        }
    }
}
