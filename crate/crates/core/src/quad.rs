use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1,1] via Newton iteration.
pub fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    legendre_rule(n.max(1)).iter().map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
}

/// Adaptive bisection with an 8-point rule against its two halves.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let rule = legendre_rule(8);
    let q = |lo: f64, hi: f64| {
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        rule.iter().map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
    };
    let mut stack = vec![(a, b, q(a, b), 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (l, r) = (q(lo, mid), q(mid, hi));
        if (l + r - whole).abs() <= tol * (hi - lo).max(1e-3) || depth >= 40 {
            total += l + r;
        } else {
            stack.push((lo, mid, l, depth + 1));
            stack.push((mid, hi, r, depth + 1));
        }
    }
    total
}
