//! Residual a posteriori error estimator with the cut-cell scalings.

use std::io::Write;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::assembly::{physical_basis, Data};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryFace, CellStatus, Classification, FaceKind, Geometry};
use crate::hierarchy::{CellId, HierarchicalSpace};

/// Space dimension entering the scaling exponents.
const DIM: usize = 2;

/// The root of `t = -ln t`.
pub fn eta() -> f64 {
    static ETA: OnceLock<f64> = OnceLock::new();
    *ETA.get_or_init(|| {
        let g = |t: f64| t + t.ln();
        let (mut lo, mut hi) = (0.1, 1.0);
        while hi - lo > 0.0 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if g(lo).abs() <= g(hi).abs() {
            lo
        } else {
            hi
        }
    })
}

/// `c_S = max(-ln |S|, eta)^(1/2)`.
pub fn cut_constant(measure: f64) -> f64 {
    (-measure.ln()).max(eta()).sqrt()
}

/// Scaling of the interior residual of a cell.
pub fn cell_delta(status: CellStatus, h: f64, measure: f64) -> Result<f64> {
    match status {
        CellStatus::Interior => Ok(h),
        CellStatus::Cut if measure > 0.0 => {
            Ok(cut_constant(measure) * measure.powf(1.0 / DIM as f64))
        }
        CellStatus::Cut => Err(Error::Inconsistent(format!(
            "cut cell with clipped measure {measure:e}"
        ))),
        CellStatus::Exterior => Ok(0.0),
    }
}

/// Scaling of the Neumann residual on a boundary face.
pub fn face_delta(face: &BoundaryFace) -> Result<f64> {
    match face.kind {
        FaceKind::Full => Ok(face.h.sqrt()),
        FaceKind::Cut if face.measure > 0.0 => Ok(cut_constant(face.measure)
            * face.measure.powf(1.0 / (2.0 * (DIM as f64 - 1.0)))),
        FaceKind::Cut => Err(Error::Inconsistent(format!(
            "cut face with measure {:e}",
            face.measure
        ))),
    }
}

/// Squared contributions of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellIndicator {
    pub cell: CellId,
    pub status: CellStatus,
    pub delta: f64,
    /// `delta_K^2 |f + lap u_h|^2` on the clipped cell.
    pub interior: f64,
    /// Neumann face terms.
    pub neumann: f64,
    /// `h_K |g_N - du_h/dn|^2` on the trimming curve.
    pub trimming: f64,
}

impl CellIndicator {
    /// `E_K^2`
    pub fn squared(&self) -> f64 {
        self.interior + self.neumann + self.trimming
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    /// One entry per active cell, in classification order.
    pub cells: Vec<CellIndicator>,
}

impl Estimate {
    /// Global estimator `E`.
    pub fn total(&self) -> f64 {
        self.cells.iter().map(|c| c.squared()).sum::<f64>().sqrt()
    }

    pub fn squares(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.squared()).collect()
    }

    /// CSV with one row per cell.
    pub fn write_csv(&self, hs: &HierarchicalSpace, out: &mut impl Write) -> Result<()> {
        writeln!(out, "level,x0,x1,y0,y1,status,e2,interior,neumann,trimming")?;
        for c in &self.cells {
            let r = hs.cell_rect(c.cell);
            let status = match c.status {
                CellStatus::Interior => "interior",
                CellStatus::Cut => "cut",
                CellStatus::Exterior => "exterior",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{:e},{:e},{:e},{:e}",
                c.cell.level,
                r.min[0],
                r.max[0],
                r.min[1],
                r.max[1],
                status,
                c.squared(),
                c.interior,
                c.neumann,
                c.trimming
            )?;
        }
        Ok(())
    }
}

/// Evaluate all cell indicators of the discrete solution `coeffs`.
pub fn estimate(
    hs: &HierarchicalSpace,
    cl: &Classification,
    geom: &Geometry,
    coeffs: &[f64],
    data: &dyn Data,
) -> Result<Estimate> {
    let order = hs.degree() + 2;
    let cells = cl
        .cells
        .par_iter()
        .map(|cg| {
            let delta = cell_delta(cg.status, cg.h, cg.area)?;
            let mut ind = CellIndicator {
                cell: cg.cell,
                status: cg.status,
                delta,
                interior: 0.0,
                neumann: 0.0,
                trimming: 0.0,
            };
            if cg.status == CellStatus::Exterior {
                return Ok(ind);
            }
            let ext = hs.extraction(cg.cell);
            let local_coeffs: Vec<f64> = ext.functions.iter().map(|&f| coeffs[f]).collect();
            let rule = geom.domain_rule(cg, order)?;
            let mut r2 = 0.0;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let b = physical_basis(hs, &geom.map, &ext, *x, true)?;
                let lap: f64 = local_coeffs.iter().zip(&b.laplacians).map(|(c, l)| c * l).sum();
                r2 += w * (data.source(b.map.x) + lap).powi(2);
            }
            ind.interior = delta * delta * r2;

            let jump = |rule: &crate::geometry::BoundaryRule| -> Result<f64> {
                let mut j2 = 0.0;
                for k in 0..rule.len() {
                    let b = physical_basis(hs, &geom.map, &ext, rule.points[k], false)?;
                    let n = rule.normals[k];
                    let mut dn = 0.0;
                    for (c, g) in local_coeffs.iter().zip(&b.gradients) {
                        dn += c * (g[0] * n[0] + g[1] * n[1]);
                    }
                    j2 += rule.weights[k] * (data.neumann(b.map.x, n) - dn).powi(2);
                }
                Ok(j2)
            };
            for face in cg.faces.iter().filter(|f| !geom.is_dirichlet(f.side)) {
                let d = face_delta(face)?;
                ind.neumann += d * d * jump(&geom.face_rule(face, order)?)?;
            }
            if !cg.gamma.is_empty() {
                ind.trimming = cg.h * jump(&geom.gamma_rule(cg, order)?)?;
            }
            Ok(ind)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate { cells })
}
