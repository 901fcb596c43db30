//! Stored-energy densities, reduced densities, convex envelopes and the rod
//! and bulk functionals.

mod envelope;
mod functional;
pub mod hull;
mod optimize;

use std::sync::Arc;

use nalgebra::Matrix2;
use serde::Serialize;

use crate::curve::{det2, perp, Vec2};
use crate::error::{Result, RodError};

pub use envelope::{convexify, ConvexEnvelopeTable, ConvexifyOptions, Laminate};
pub use functional::{bulk_energy, rod_energy, BulkField};
pub use optimize::nelder_mead;

pub type Mat2 = Matrix2<f64>;

pub fn mat_cols(a: Vec2, b: Vec2) -> Mat2 {
    Mat2::new(a.x, b.x, a.y, b.y)
}

/// Contract for a stored-energy density on 2x2 matrices. Implementations
/// must return +inf exactly when det F <= 0.
pub trait EnergyDensity: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, f: &Mat2) -> f64;
    /// Growth exponent p >= 2.
    fn p(&self) -> f64;
    /// Coercivity c |F|^p - c0 <= W(F).
    fn c(&self) -> f64;
    fn c0(&self) -> f64 {
        0.0
    }
    /// Growth constant: W(F) <= c_delta (1 + |F|^p) on det F >= delta.
    fn c_delta(&self, delta: f64) -> f64;
    /// Closed form of min over xi of W(a|xi) with its minimizer, if known.
    fn reduced_closed_form(&self, _a: Vec2) -> Option<(f64, Vec2)> {
        None
    }
}

/// W(F) = |F|^2 - 2 ln det F - 2.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeoHookean2D;

impl EnergyDensity for NeoHookean2D {
    fn name(&self) -> &str {
        "neohookean"
    }

    fn eval(&self, f: &Mat2) -> f64 {
        let d = f.determinant();
        if d <= 0.0 {
            return f64::INFINITY;
        }
        f.norm_squared() - 2.0 * d.ln() - 2.0
    }

    fn p(&self) -> f64 {
        2.0
    }

    fn c(&self) -> f64 {
        0.5
    }

    fn c0(&self) -> f64 {
        2.0 * std::f64::consts::LN_2
    }

    fn c_delta(&self, delta: f64) -> f64 {
        1.0 + (-2.0 * delta.ln()).max(0.0)
    }

    fn reduced_closed_form(&self, a: Vec2) -> Option<(f64, Vec2)> {
        let r = a.norm();
        if r == 0.0 {
            return Some((f64::INFINITY, Vec2::zeros()));
        }
        Some((r * r - 2.0 * r.ln() - 1.0, perp(a) / r))
    }
}

/// Frame-indifferent double well with stress-free states on |F e1| = 1:
/// W = (|a|^2 - 1)^2 + s^4 + r^4 - 4 ln s - 1 with a = F e1,
/// s = det F / |a| and r = <F e2, a> / |a|.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

impl EnergyDensity for DoubleWell {
    fn name(&self) -> &str {
        "double-well"
    }

    fn eval(&self, f: &Mat2) -> f64 {
        let d = f.determinant();
        if d <= 0.0 {
            return f64::INFINITY;
        }
        let a = Vec2::new(f[(0, 0)], f[(1, 0)]);
        let xi = Vec2::new(f[(0, 1)], f[(1, 1)]);
        let na = a.norm();
        let s = d / na;
        let r = xi.dot(&a) / na;
        let w = na * na - 1.0;
        w * w + s.powi(4) + r.powi(4) - 4.0 * s.ln() - 1.0
    }

    fn p(&self) -> f64 {
        4.0
    }

    fn c(&self) -> f64 {
        1.0 / 6.0
    }

    fn c0(&self) -> f64 {
        1.0 + std::f64::consts::LN_2
    }

    fn c_delta(&self, delta: f64) -> f64 {
        3.0 + 4.0 * (-delta.ln()).max(0.0)
    }

    fn reduced_closed_form(&self, a: Vec2) -> Option<(f64, Vec2)> {
        let r = a.norm();
        if r == 0.0 {
            return Some((f64::INFINITY, Vec2::zeros()));
        }
        let w = r * r - 1.0;
        Some((w * w, perp(a) / r))
    }
}

pub fn density_by_name(name: &str) -> Result<Arc<dyn EnergyDensity>> {
    match name {
        "neohookean" => Ok(Arc::new(NeoHookean2D)),
        "double-well" => Ok(Arc::new(DoubleWell)),
        other => Err(RodError::Precondition(format!("unknown density '{other}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub starts: usize,
    pub tol: f64,
    pub det_guard: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { starts: 16, tol: 1e-10, det_guard: 1e-8 }
    }
}

/// f(a) = min over xi of W(a|xi).
#[derive(Clone)]
pub struct ReducedDensity {
    pub density: Arc<dyn EnergyDensity>,
    pub provenance: Provenance,
    pub options: MinimizeOptions,
}

impl ReducedDensity {
    /// Closed form when the density provides one, numeric otherwise.
    pub fn new(density: Arc<dyn EnergyDensity>) -> Self {
        let provenance = if density.reduced_closed_form(Vec2::new(1.0, 0.0)).is_some() {
            Provenance::ClosedForm
        } else {
            Provenance::Numeric
        };
        Self { density, provenance, options: MinimizeOptions::default() }
    }

    pub fn numeric(density: Arc<dyn EnergyDensity>) -> Self {
        Self { density, provenance: Provenance::Numeric, options: MinimizeOptions::default() }
    }

    pub fn eval(&self, a: Vec2) -> f64 {
        self.eval_with_minimizer(a).0
    }

    pub fn eval_with_minimizer(&self, a: Vec2) -> (f64, Vec2) {
        match self.provenance {
            Provenance::ClosedForm => self.density.reduced_closed_form(a).expect("closed form"),
            Provenance::Numeric => reduced_density_numeric(self.density.as_ref(), a, &self.options),
        }
    }
}

/// Multi-start Nelder-Mead over xi with the admissibility guard
/// det(a|xi) >= det_guard |a|^2.
pub fn reduced_density_numeric(w: &dyn EnergyDensity, a: Vec2, opt: &MinimizeOptions) -> (f64, Vec2) {
    let na2 = a.norm_squared();
    if na2 == 0.0 {
        return (f64::INFINITY, Vec2::zeros());
    }
    let guard = opt.det_guard * na2;
    let obj = |x: &[f64]| {
        let xi = Vec2::new(x[0], x[1]);
        if det2(a, xi) < guard {
            return f64::INFINITY;
        }
        w.eval(&mat_cols(a, xi))
    };
    let base = perp(a) / na2;
    let mut starts = vec![base];
    let angles = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let scales = [0.5 * na2.sqrt(), na2.sqrt(), 2.0 * na2.sqrt()];
    'outer: for s in scales {
        for th in angles {
            if starts.len() >= opt.starts {
                break 'outer;
            }
            let (c, sn) = (f64::cos(th), f64::sin(th));
            starts.push(Vec2::new(c * base.x - sn * base.y, sn * base.x + c * base.y) * s);
        }
    }
    let mut best = (f64::INFINITY, base);
    for x0 in starts {
        let (x, fx) = nelder_mead(&obj, &[x0.x, x0.y], 0.1 * x0.norm().max(1e-3), opt.tol, 4000);
        if fx < best.0 {
            best = (fx, Vec2::new(x[0], x[1]));
        }
    }
    best
}
