//! Named test curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curve::{constant_speed_reparam, PolylineCurve, Vec2};
use crate::geometry::is_injective;

fn pts(p: &[[f64; 2]]) -> Vec<Vec2> {
    p.iter().map(|q| Vec2::new(q[0], q[1])).collect()
}

pub fn straight() -> PolylineCurve {
    PolylineCurve::from_points(vec![0.0, 1.0], &[[0.0, 0.0], [1.0, 0.0]]).unwrap()
}

pub fn l_shape() -> PolylineCurve {
    PolylineCurve::from_points(vec![0.0, 0.5, 1.0], &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap()
}

/// Out to (1,0) and back, speed 2.
pub fn fold() -> PolylineCurve {
    PolylineCurve::from_points(vec![0.0, 0.5, 1.0], &[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]).unwrap()
}

/// x -> (x,0) on [0,1/2], then (1-x,0): the unit-speed fold.
pub fn fold_half() -> PolylineCurve {
    PolylineCurve::from_points(vec![0.0, 0.5, 1.0], &[[0.0, 0.0], [0.5, 0.0], [0.0, 0.0]]).unwrap()
}

pub fn x_crossing() -> PolylineCurve {
    PolylineCurve::uniform(pts(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])).unwrap()
}

/// Passes twice through (1/2,1/2) without crossing: a downward V meets an
/// upward V at their tips.
pub fn tangential_touch() -> PolylineCurve {
    constant_speed_reparam(&pts(&[
        [0.0, 0.0],
        [0.5, 0.5],
        [1.0, 0.0],
        [1.0, 1.2],
        [0.5, 0.5],
        [0.0, 1.0],
    ]))
    .unwrap()
}

pub fn w_zigzag() -> PolylineCurve {
    constant_speed_reparam(&pts(&[[0.0, 0.0], [0.25, 1.0], [0.5, 0.2], [0.75, 1.0], [1.0, 0.0]])).unwrap()
}

/// Open U with arms of length 0.15 separated by `gap`.
pub fn u_shape(gap: f64) -> PolylineCurve {
    constant_speed_reparam(&pts(&[[0.15, gap], [0.0, gap], [0.0, 0.0], [0.15, 0.0]])).unwrap()
}

pub fn square_loop() -> PolylineCurve {
    PolylineCurve::uniform(pts(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])).unwrap()
}

/// Closed bow-tie whose lobes wind +1 (left) and -1 (right).
pub fn figure_eight() -> PolylineCurve {
    PolylineCurve::uniform(pts(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])).unwrap()
}

/// Closed rectangle with two horns; the top side is run through three times
/// (right, back left, right again) and the horns sit on different passes.
pub fn horned_devil() -> PolylineCurve {
    let cw = pts(&[
        [19.72, -1.7],
        [16.2, -1.7],
        [16.2, 1.48],
        [17.96, 1.48],
        [18.32, 4.36],
        [18.68, 1.48],
        [22.98, 1.48],
        [16.44, 1.48],
        [20.9, 1.48],
        [21.2, 4.38],
        [21.4, 1.48],
        [23.24, 1.48],
        [23.24, -1.7],
        [19.72, -1.7],
    ]);
    let ccw: Vec<Vec2> = cw.into_iter().rev().collect();
    constant_speed_reparam(&ccw).unwrap()
}

/// One member of a non-injective approximating sequence of the horned devil:
/// the strokes are separated but one horn cuts the vertical connection.
pub fn horned_devil_approximant() -> PolylineCurve {
    let cw = pts(&[
        [4.08, -1.76],
        [0.56, -1.74],
        [0.56, 1.4],
        [2.32, 1.38],
        [2.68, 4.3],
        [2.94, 1.38],
        [7.34, 1.42],
        [0.82, 1.04],
        [5.14, 0.96],
        [5.54, 4.1],
        [5.72, 0.94],
        [7.58, 0.94],
        [7.6, -1.78],
        [4.08, -1.76],
    ]);
    let ccw: Vec<Vec2> = cw.into_iter().rev().collect();
    constant_speed_reparam(&ccw).unwrap()
}

/// phi_k = (h_k, 0) with h_k' = 1/k outside the band |x - 1/2| < 1/k and k/2 inside.
pub fn simple_sequence(k: usize) -> PolylineCurve {
    assert!(k >= 3, "band must fit in [0,1]");
    let kf = k as f64;
    let a = 0.5 - 1.0 / kf;
    let b = 0.5 + 1.0 / kf;
    let h1 = a / kf;
    let h2 = h1 + (b - a) * kf / 2.0;
    let h3 = h2 + (1.0 - b) / kf;
    PolylineCurve::from_points(vec![0.0, a, b, 1.0], &[[0.0, 0.0], [h1, 0.0], [h2, 0.0], [h3, 0.0]]).unwrap()
}

pub const NAMES: &[&str] = &[
    "straight",
    "l-shape",
    "fold",
    "fold-half",
    "x-crossing",
    "touch",
    "w-zigzag",
    "u-shape",
    "square",
    "figure-eight",
    "horned-devil",
    "horned-devil-approx",
    "simple-8",
];

pub fn by_name(name: &str) -> Option<PolylineCurve> {
    Some(match name {
        "straight" => straight(),
        "l-shape" => l_shape(),
        "fold" => fold(),
        "fold-half" => fold_half(),
        "x-crossing" => x_crossing(),
        "touch" => tangential_touch(),
        "w-zigzag" => w_zigzag(),
        "u-shape" => u_shape(0.2),
        "square" => square_loop(),
        "figure-eight" => figure_eight(),
        "horned-devil" => horned_devil(),
        "horned-devil-approx" => horned_devil_approximant(),
        "simple-8" => simple_sequence(8),
        _ => return None,
    })
}

/// Random injective polyline with at most `max_segments` pieces: a turning
/// random walk whose steps are redrawn when they would hit the path so far.
pub fn random_injective(rng: &mut ChaCha8Rng, max_segments: usize) -> PolylineCurve {
    let m = rng.gen_range(1..=max_segments.max(1));
    let mut heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut path = vec![Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))];
    'grow: while path.len() <= m {
        for _ in 0..30 {
            let h = heading + rng.gen_range(-1.2..1.2);
            let len = rng.gen_range(0.02..0.3);
            let p = *path.last().unwrap() + Vec2::new(h.cos(), h.sin()) * len;
            let mut trial = path.clone();
            trial.push(p);
            if let Ok(c) = PolylineCurve::uniform(trial.clone()) {
                if is_injective(&c) {
                    path = trial;
                    heading = h;
                    continue 'grow;
                }
            }
        }
        break;
    }
    constant_speed_reparam(&path).unwrap()
}

/// Random polyline with no injectivity constraint.
pub fn random_polyline(rng: &mut ChaCha8Rng, max_segments: usize) -> PolylineCurve {
    let m = rng.gen_range(1..=max_segments.max(1));
    let grid = rng.gen_bool(0.3);
    let path: Vec<Vec2> = (0..=m)
        .map(|_| {
            if grid {
                Vec2::new(rng.gen_range(0..5) as f64 * 0.25, rng.gen_range(0..5) as f64 * 0.25)
            } else {
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        })
        .collect();
    PolylineCurve::uniform(path).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
