use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use proptest::prelude::*;
use rodlab::energy::*;
use rodlab::geometry::is_injective;
use rodlab::relaxation::*;
use rodlab::{c0_distance, PolylineCurve, RodError, Vec2};

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

fn lam(ts: &[f64], vs: &[[f64; 2]]) -> Laminate {
    Laminate { weights: ts.to_vec(), vectors: vs.to_vec() }
}

fn neo() -> ReducedDensity {
    ReducedDensity::new(Arc::new(NeoHookean2D))
}

fn table() -> &'static ConvexEnvelopeTable {
    static T: OnceLock<ConvexEnvelopeTable> = OnceLock::new();
    T.get_or_init(|| convexify(&neo(), &ConvexifyOptions { n: 65, gamma: 2e-2, ..Default::default() }).unwrap())
}

fn line(xi: Vec2) -> PolylineCurve {
    affine_limit(xi)
}

#[test]
fn sawtooth_of_two_diagonals() {
    let z = zigzag_laminate_curve(&lam(&[0.5, 0.5], &[[1.0, 1.0], [1.0, -1.0]]), 4).unwrap();
    assert_eq!(z.curve.num_segments(), 8);
    assert_eq!(z.curve.vertices()[0], v(0.0, 0.0));
    assert_eq!(*z.curve.vertices().last().unwrap(), v(1.0, 0.0));
    assert_eq!(z.curve.vertices()[1], v(0.125, 0.125));
    assert_eq!(z.construction, Construction::Periodic { order: [0, 1, 0] });
    assert!(is_injective(&z.curve));
    assert_relative_eq!(c0_distance(&z.curve, &line(v(1.0, 0.0))), 0.125, epsilon = 1e-15);
}

#[test]
fn opposite_slopes_with_zero_mean_are_shifted() {
    let l = lam(&[0.5, 0.5], &[[1.0, 0.0], [-1.0, 0.0]]);
    let z = zigzag_laminate_curve(&l, 8).unwrap();
    assert_eq!(z.construction, Construction::Shifted);
    assert!(is_injective(&z.curve));
    assert_relative_eq!(z.endpoint.x, 0.0);
    assert_relative_eq!(z.endpoint.y, 0.5 * TILT, epsilon = 1e-15);
    assert_relative_eq!(z.effective.vectors[0][1], TILT);
}

#[test]
fn opposite_slopes_with_offset_mean_are_tilted() {
    let l = lam(&[0.75, 0.25], &[[1.0, 0.0], [-1.0, 0.0]]);
    let z = zigzag_laminate_curve(&l, 16).unwrap();
    assert_eq!(z.construction, Construction::Tilted);
    assert!(is_injective(&z.curve));
    assert_relative_eq!(z.endpoint, v(0.5, 0.0), epsilon = 1e-15);
    assert_relative_eq!(z.effective.barycenter(), v(0.5, 0.0), epsilon = 1e-15);
    let f = neo();
    let corr = z.correction(&l, &f);
    assert!(corr > 0.0 && corr < 1e-3, "{corr}");
}

#[test]
fn same_direction_slopes_stay_straight() {
    let z = zigzag_laminate_curve(&lam(&[0.5, 0.5], &[[1.0, 0.0], [3.0, 0.0]]), 5).unwrap();
    assert!(matches!(z.construction, Construction::Periodic { .. }));
    assert_relative_eq!(z.endpoint, v(2.0, 0.0));
}

#[test]
fn singleton_laminate_is_a_line() {
    let z = zigzag_laminate_curve(&Laminate::singleton(v(2.0, 0.0)), 3).unwrap();
    assert_eq!(z.construction, Construction::Straight);
    assert_eq!(c0_distance(&z.curve, &line(v(2.0, 0.0))), 0.0);
}

#[test]
fn invalid_laminates() {
    let bad = [
        lam(&[0.5, 0.5], &[[0.0, 0.0], [1.0, 0.0]]),
        lam(&[0.7, 0.5], &[[1.0, 0.0], [0.0, 1.0]]),
        lam(&[1.5, -0.5], &[[1.0, 0.0], [0.0, 1.0]]),
        lam(&[], &[]),
    ];
    for l in &bad {
        assert!(matches!(zigzag_laminate_curve(l, 4), Err(RodError::Precondition(_))));
    }
    assert!(zigzag_laminate_curve(&Laminate::singleton(v(1.0, 0.0)), 0).is_err());
}

#[test]
fn three_slopes_around_the_origin_need_nesting() {
    // Periodic arrangements of these slopes overlap the neighbouring cells.
    let l = lam(&[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], &[[1.0, 0.0], [-0.5, 0.8660254037844386], [-0.5, -0.8660254037844386]]);
    let z = zigzag_laminate_curve(&l, 8).unwrap();
    assert!(matches!(z.construction, Construction::Nested { .. }));
    assert!(is_injective(&z.curve));
    assert_relative_eq!(z.endpoint, l.barycenter(), epsilon = 1e-15);
    assert_eq!(z.correction(&l, &neo()), 0.0);
}

#[test]
fn weak_convergence_rate() {
    let l = lam(&[0.3, 0.3, 0.4], &[[1.0, 1.0], [0.5, -1.5], [-0.4, 0.2]]);
    let xi = l.barycenter();
    let mut last = f64::INFINITY;
    for j in 0..8 {
        let n = 1 << j;
        let z = zigzag_laminate_curve(&l, n).unwrap();
        let d = c0_distance(&z.curve, &line(xi));
        assert!(d <= z.lipschitz() / n as f64 + 1e-15, "n={n}: {d}");
        assert!(d < last);
        last = d;
    }
}

#[test]
fn laminate_energy_is_attained() {
    let f = neo();
    let l = lam(&[0.3, 0.3, 0.4], &[[1.0, 1.0], [0.5, -1.5], [-0.4, 0.2]]);
    for n in [1, 3, 16, 100] {
        let z = zigzag_laminate_curve(&l, n).unwrap();
        let e = unrelaxed_energy(&z.curve, &f);
        assert_relative_eq!(e, l.energy(&f) + z.correction(&l, &f), max_relative = 1e-10);
    }
}

#[test]
fn table_laminate_at_half() {
    let t = table();
    let f = neo();
    let l = t.laminate_at(v(0.5, 0.0)).unwrap();
    let mut prev = None;
    for n in [16, 64, 256] {
        let z = zigzag_laminate_curve(&l, n).unwrap();
        assert!(is_injective(&z.curve));
        let e = unrelaxed_energy(&z.curve, &f);
        assert!(e <= t.gamma + 1e-12, "{e}");
        if let Some(p) = prev {
            assert_relative_eq!(e, p, max_relative = 1e-9);
        }
        prev = Some(e);
    }
}

#[test]
fn recovery_of_compressed_rod() {
    let t = table();
    let y = PolylineCurve::uniform(vec![v(0.0, 0.0), v(0.5, 0.0)]).unwrap();
    let f = neo();
    assert_relative_eq!(unrelaxed_energy(&y, &f), 0.25 + 2.0 * std::f64::consts::LN_2 - 1.0, epsilon = 1e-12);
    let mut last = f64::INFINITY;
    for k in [2, 4, 8, 16] {
        let r = recovery_rod_sequence(&y, t, k, &Schedules::defaults()).unwrap();
        assert!(is_injective(&r.curve));
        assert!(r.terms.holds, "{:?}", r.terms);
        assert_eq!(r.curve.vertices()[0], v(0.0, 0.0));
        assert_eq!(*r.curve.vertices().last().unwrap(), v(0.5, 0.0));
        assert!(r.terms.energy < last);
        last = r.terms.energy;
        let excess = r.terms.energy - r.terms.relaxed;
        assert!(excess <= r.terms.buffer + r.terms.correction + 1e-12, "{:?}", r.terms);
        assert!(c0_distance(&r.curve, &y) <= 2.0 / r.terms.n as f64);
    }
    assert!(last < 1e-2, "{last}");
}

#[test]
fn recovery_leaves_convex_slopes_alone() {
    let t = table();
    let y = PolylineCurve::uniform(vec![v(0.0, 0.0), v(2.0, 0.0)]).unwrap();
    let r = recovery_rod_sequence(&y, t, 4, &Schedules::defaults()).unwrap();
    assert_eq!(r.constructions, vec![Construction::Straight]);
    assert_eq!(c0_distance(&r.curve, &y), 0.0);
    assert_relative_eq!(r.terms.energy, 3.0 - 2.0 * std::f64::consts::LN_2, epsilon = 1e-12);
}

#[test]
fn recovery_on_a_bent_rod() {
    let t = table();
    let y = PolylineCurve::uniform(vec![v(0.0, 0.0), v(0.2, 0.0), v(0.2, 0.8), v(-0.3, 0.8)]).unwrap();
    for k in [2, 4, 8] {
        let r = recovery_rod_sequence(&y, t, k, &Schedules::defaults()).unwrap();
        assert!(is_injective(&r.curve));
        assert!(r.terms.holds);
        for (a, b) in y.vertices().iter().zip([0usize, 1, 2, 3]) {
            assert_eq!(r.curve.eval(b as f64 / 3.0).unwrap(), *a);
        }
    }
}

#[test]
fn recovery_preconditions() {
    let t = table();
    let y = PolylineCurve::uniform(vec![v(0.0, 0.0), v(0.5, 0.0)]).unwrap();
    let fold = rodlab::fixtures::fold();
    assert!(matches!(recovery_rod_sequence(&fold, t, 2, &Schedules::defaults()), Err(RodError::Precondition(_))));
    let wide = Schedules { beta: Some(0.6), ..Schedules::defaults() };
    assert!(matches!(recovery_rod_sequence(&y, t, 2, &wide), Err(RodError::Precondition(_))));
    assert!(recovery_rod_sequence(&y, t, 0, &Schedules::defaults()).is_err());
}

#[test]
fn necessity_on_unit_circle() {
    let t = table();
    let r = convexity_necessity_experiment(t, v(0.5, 0.75f64.sqrt()), v(0.5, -(0.75f64.sqrt())), 0.5, 256).unwrap();
    assert!(!r.perturbed);
    assert!(r.limit.abs() < 1e-12);
    assert!(r.cf.abs() < 1e-2);
    assert!(r.dominates);
    assert!(r.steps.iter().all(|s| s.injective));
    for w in r.steps.windows(2) {
        assert!(w[1].c0 < w[0].c0);
    }
}

#[test]
fn necessity_with_equal_slopes() {
    let t = table();
    let r = convexity_necessity_experiment(t, v(2.0, 0.0), v(2.0, 0.0), 0.3, 8).unwrap();
    assert_relative_eq!(r.limit, 3.0 - 2.0 * std::f64::consts::LN_2, epsilon = 1e-12);
    assert_relative_eq!(r.numeric_limit, r.limit, epsilon = 1e-12);
    assert!(r.dominates);
}

#[test]
fn necessity_with_opposite_slopes() {
    let t = table();
    let r = convexity_necessity_experiment(t, v(1.0, 0.0), v(-1.0, 0.0), 0.5, 1024).unwrap();
    assert!(r.perturbed);
    assert!(r.steps.iter().all(|s| s.injective));
    assert_eq!(r.limit, 0.0);
    assert!(r.numeric_limit < 1e-5);
    assert!(r.dominates);
    for w in r.steps.windows(2) {
        assert!(w[1].energy <= w[0].energy);
    }
}

#[test]
fn necessity_rejects_bad_input() {
    let t = table();
    assert!(convexity_necessity_experiment(t, v(0.0, 0.0), v(1.0, 0.0), 0.5, 4).is_err());
    assert!(convexity_necessity_experiment(t, v(1.0, 0.0), v(1.0, 1.0), 1.0, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn random_laminates_give_injective_oscillations(
        angles in prop::array::uniform3(0.0..std::f64::consts::TAU),
        radii in prop::array::uniform3(0.3..2.5f64),
        w in prop::array::uniform3(0.05..1.0f64),
        j in 0u32..6,
    ) {
        let s: f64 = w.iter().sum();
        let vs: Vec<[f64; 2]> = (0..3).map(|i| [radii[i] * angles[i].cos(), radii[i] * angles[i].sin()]).collect();
        let l = lam(&[w[0] / s, w[1] / s, 1.0 - w[0] / s - w[1] / s], &vs);
        let xi = l.barycenter();
        prop_assume!(xi.norm() > 1e-2);
        let n = 1 << j;
        let z = zigzag_laminate_curve(&l, n).unwrap();
        prop_assert!(is_injective(&z.curve));
        prop_assert!((z.endpoint - xi).norm() < 1e-12);
        prop_assert!(c0_distance(&z.curve, &line(xi)) <= z.lipschitz() / n as f64 + 1e-12);
    }
}
