use super::{mat_cols, ConvexEnvelopeTable, EnergyDensity};
use crate::curve::{PolylineCurve, Vec2};
use crate::error::{Result, RodError};

/// Integral of Cf(y'), exact per affine piece.
pub fn rod_energy(y: &PolylineCurve, table: &ConvexEnvelopeTable) -> Result<f64> {
    let bp = y.breakpoints();
    let mut total = 0.0;
    for j in 0..y.num_segments() {
        total += table.cf(y.slope(j))? * (bp[j + 1] - bp[j]);
    }
    Ok(total)
}

/// Piecewise-affine field on a triangulation of (0,1) x (-1/2, 1/2).
#[derive(Debug, Clone)]
pub struct BulkField {
    pub reference: Vec<Vec2>,
    pub values: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
}

impl BulkField {
    /// Gradient (d1 y | d2 y) of the affine interpolant on triangle k.
    pub fn gradient(&self, k: usize) -> Result<(nalgebra::Matrix2<f64>, f64)> {
        let [i, j, l] = self.triangles[k];
        let (x0, x1, x2) = (self.reference[i], self.reference[j], self.reference[l]);
        let dx = mat_cols(x1 - x0, x2 - x0);
        let area = 0.5 * dx.determinant();
        if area.abs() <= 1e-300 {
            return Err(RodError::Mesh(format!("triangle {k} is degenerate")));
        }
        let dy = mat_cols(self.values[j] - self.values[i], self.values[l] - self.values[i]);
        let inv = dx.try_inverse().ok_or_else(|| RodError::Mesh(format!("triangle {k} is degenerate")))?;
        Ok((dy * inv, area.abs()))
    }

    pub fn min_scaled_det(&self, h: f64) -> Result<f64> {
        let mut m = f64::INFINITY;
        for k in 0..self.triangles.len() {
            let (g, _) = self.gradient(k)?;
            m = m.min(g.determinant() / h);
        }
        Ok(m)
    }

    /// Tensor-product mesh from column positions x1 and row positions x2,
    /// each cell cut along its rising diagonal.
    pub fn from_grid(xs: &[f64], rows: &[f64], map: impl Fn(f64, f64) -> Vec2) -> Self {
        let mut reference = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            for &x in xs {
                reference.push(Vec2::new(x, r));
                values.push(map(x, r));
            }
        }
        let nx = xs.len();
        let mut triangles = Vec::new();
        for j in 0..rows.len() - 1 {
            for i in 0..nx - 1 {
                let a = j * nx + i;
                let b = a + 1;
                let c = a + nx + 1;
                let d = a + nx;
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self { reference, values, triangles }
    }
}

/// Integral over the reference strip of W(d1 y | d2 y / h), triangle by
/// triangle; +inf if any scaled gradient has det <= 0 or the caller's
/// injectivity certificate is negative.
pub fn bulk_energy(field: &BulkField, w: &dyn EnergyDensity, h: f64, certified: bool) -> Result<f64> {
    if !(h > 0.0) {
        return Err(RodError::Precondition("thickness must be positive".into()));
    }
    let mut total = 0.0;
    let mut infinite = !certified;
    for k in 0..field.triangles.len() {
        let (g, area) = field.gradient(k)?;
        let scaled = mat_cols(g.column(0).into(), Vec2::from(g.column(1)) / h);
        if scaled.determinant() <= 0.0 {
            infinite = true;
            continue;
        }
        total += w.eval(&scaled) * area;
    }
    Ok(if infinite { f64::INFINITY } else { total })
}
