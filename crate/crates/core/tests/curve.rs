use approx::assert_relative_eq;
use proptest::prelude::*;
use rodlab::curve::*;
use rodlab::fixtures;

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

fn seg(a: Vec2, b: Vec2) -> PolylineCurve {
    PolylineCurve::new(vec![0.0, 1.0], vec![a, b]).unwrap()
}

#[test]
fn eval_examples() {
    assert_eq!(seg(v(0.0, 0.0), v(1.0, 0.0)).eval(0.5).unwrap(), v(0.5, 0.0));
    let l = fixtures::l_shape();
    assert_eq!(l.eval(0.0).unwrap(), v(0.0, 0.0));
    assert_eq!(l.eval(0.75).unwrap(), v(1.0, 0.5));
    assert!(l.eval(1.5).is_err());
    assert!(l.eval(-0.1).is_err());
}

#[test]
fn derivative_examples() {
    assert_eq!(seg(v(0.0, 0.0), v(2.0, 0.0)).derivative(0.3).unwrap(), v(2.0, 0.0));
    let f = fixtures::fold_half();
    assert_eq!(f.derivative(0.25).unwrap(), v(1.0, 0.0));
    assert_eq!(f.derivative(0.75).unwrap(), v(-1.0, 0.0));
    assert_eq!(f.derivative(0.5).unwrap(), v(-1.0, 0.0));
}

#[test]
fn rejects_bad_breakpoints() {
    assert!(PolylineCurve::new(vec![0.0, 0.5, 0.5, 1.0], vec![v(0., 0.); 4]).is_err());
    assert!(PolylineCurve::new(vec![0.0, 0.7, 0.5, 1.0], vec![v(0., 0.); 4]).is_err());
    assert!(PolylineCurve::new(vec![0.0, 1.0], vec![v(0., 0.); 3]).is_err());
    assert!(PolylineCurve::new(vec![0.0, 1.0], vec![v(0., 0.), v(f64::NAN, 0.)]).is_err());
    let js = r#"{"breakpoints":[0,0.6,0.4,1],"vertices":[[0,0],[1,0],[2,0],[3,0]]}"#;
    assert!(PolylineCurve::from_json(js).is_err());
}

#[test]
fn json_roundtrip() {
    let c = fixtures::w_zigzag();
    assert_eq!(PolylineCurve::from_json(&c.to_json()).unwrap(), c);
}

#[test]
fn sobolev_examples() {
    let a = seg(v(0.0, 0.0), v(1.0, 0.0));
    assert_eq!(sobolev_distance(&a, &a, 2.0), 0.0);
    let b = seg(v(0.0, 0.3), v(1.0, 0.3));
    assert_relative_eq!(sobolev_distance(&a, &b, 2.0), 0.3, epsilon = 1e-14);
    assert_relative_eq!(sobolev_distance(&a, &b, 3.0), 0.3, epsilon = 1e-11);
    // Fold against the straight unit-speed segment: the derivatives differ by 2 on the second half.
    let fold = fixtures::fold_half();
    let (_, der) = sobolev_parts(&fold, &a, 1.0);
    assert_relative_eq!(der, 1.0, epsilon = 1e-14);
}

#[test]
fn sobolev_position_part_closed_form() {
    // d(t) = (t, 0): ||d||_p^p = 1/(p+1).
    let a = seg(v(0.0, 0.0), v(1.0, 0.0));
    let z = seg(v(0.0, 0.0), v(0.0, 0.0));
    for p in [1.0, 1.5, 2.0, 4.0, 6.0] {
        let (pos, der) = sobolev_parts(&a, &z, p);
        assert_relative_eq!(pos, (1.0 / (p + 1.0)).powf(1.0 / p), epsilon = 1e-12);
        assert_relative_eq!(der, 1.0, epsilon = 1e-14);
    }
}

#[test]
fn c0_examples() {
    let a = seg(v(0.0, 0.0), v(1.0, 0.0));
    let b = seg(v(0.0, 0.3), v(1.0, 0.3));
    assert_eq!(c0_distance(&a, &a), 0.0);
    assert_relative_eq!(c0_distance(&a, &b), 0.3, epsilon = 1e-15);
}

#[test]
fn reparam_examples() {
    let c = constant_speed_reparam(&[v(0., 0.), v(1., 0.), v(1., 1.)]).unwrap();
    assert_eq!(c.breakpoints(), &[0.0, 0.5, 1.0]);
    let c = constant_speed_reparam(&[v(0., 0.), v(3., 0.), v(3., 1.)]).unwrap();
    assert_eq!(c.breakpoints(), &[0.0, 0.75, 1.0]);
    let c = constant_speed_reparam(&[v(0., 0.), v(3., 0.)]).unwrap();
    assert_eq!(c.breakpoints(), &[0.0, 1.0]);
    assert!(constant_speed_reparam(&[v(1., 1.), v(1., 1.)]).is_err());
}

fn arb_curve() -> impl Strategy<Value = PolylineCurve> {
    (1usize..8).prop_flat_map(|m| {
        (
            proptest::collection::vec(0.05f64..1.0, m),
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), m + 1),
        )
            .prop_map(|(gaps, pts)| {
                let total: f64 = gaps.iter().sum();
                let mut bp = vec![0.0];
                let mut acc = 0.0;
                for g in &gaps[..gaps.len() - 1] {
                    acc += g / total;
                    bp.push(acc);
                }
                bp.push(1.0);
                PolylineCurve::new(bp, pts.into_iter().map(|(x, y)| v(x, y)).collect()).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn eval_is_lipschitz(c in arb_curve(), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let d = (c.eval(s).unwrap() - c.eval(t).unwrap()).norm();
        prop_assert!(d <= c.lipschitz() * (s - t).abs() * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn sobolev_is_a_metric(a in arb_curve(), b in arb_curve(), c in arb_curve(), p in prop::sample::select(vec![1.0, 2.0, 3.5, 4.0])) {
        let ab = sobolev_distance(&a, &b, p);
        let ba = sobolev_distance(&b, &a, p);
        let ac = sobolev_distance(&a, &c, p);
        let cb = sobolev_distance(&c, &b, p);
        prop_assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab));
        prop_assert!(ab <= ac + cb + 1e-9);
        prop_assert_eq!(sobolev_distance(&a, &a, p), 0.0);
        if c0_distance(&a, &b) > 1e-6 {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn c0_bounded_by_w11(a in arb_curve(), b in arb_curve()) {
        let (_, der) = sobolev_parts(&a, &b, 1.0);
        let start = (a.eval(0.0).unwrap() - b.eval(0.0).unwrap()).norm();
        prop_assert!(c0_distance(&a, &b) <= der + start + 1e-9);
    }

    #[test]
    fn reparam_preserves_image_and_length(c in arb_curve()) {
        let pts = c.vertices().to_vec();
        if pts.windows(2).all(|w| w[0] != w[1]) {
            let r = constant_speed_reparam(&pts).unwrap();
            prop_assert_eq!(r.vertices(), &pts[..]);
            prop_assert!((r.length() - c.length()).abs() <= 1e-12 * c.length().max(1.0));
            let speeds: Vec<f64> = (0..r.num_segments()).map(|j| r.slope(j).norm()).collect();
            for s in &speeds {
                prop_assert!((s - r.length()).abs() <= 1e-9 * r.length());
            }
        }
    }
}
