//! Jacobi-scaled conjugate gradients.

use rayon::prelude::*;
use sprs::CsMat;

use crate::error::{Error, Result};

/// Convergence record of a solve.
#[derive(Debug, Clone, Default)]
pub struct CgReport {
    pub iterations: usize,
    /// Final residual relative to the reference norm.
    pub residual: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn spmv(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().enumerate().for_each(|(i, yi)| {
        let row = a.outer_view(i).expect("row in range");
        *yi = row.iter().map(|(j, v)| v * x[j]).sum();
    });
}

/// Solve `a x = b` for a symmetric positive definite CSR matrix, after the
/// symmetric scaling `D^{-1/2} a D^{-1/2}` with `D = diag(a)`.
///
/// Iterates until the scaled residual drops below `tol * reference`, where
/// `reference` defaults to the norm of the scaled right-hand side.
pub fn conjugate_gradient(
    a: &CsMat<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    reference: Option<f64>,
) -> Result<(Vec<f64>, CgReport)> {
    let n = b.len();
    if a.rows() != n || a.cols() != n || !a.is_csr() {
        return Err(Error::InvalidInput(format!(
            "expected a {n}x{n} CSR matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut scale = vec![0.0; n];
    for (i, s) in scale.iter_mut().enumerate() {
        let d = a.get(i, i).copied().unwrap_or(0.0);
        if d <= 0.0 {
            return Err(Error::Inconsistent(format!("nonpositive diagonal {d:e} in row {i}")));
        }
        *s = 1.0 / d.sqrt();
    }
    let mut scaled = a.clone();
    for (i, mut row) in scaled.outer_iterator_mut().enumerate() {
        for (j, v) in row.iter_mut() {
            *v *= scale[i] * scale[j];
        }
    }
    let rhs: Vec<f64> = b.iter().zip(&scale).map(|(b, s)| b * s).collect();
    let reference = reference.unwrap_or_else(|| dot(&rhs, &rhs).sqrt());

    let mut y = vec![0.0; n];
    let mut r = rhs.clone();
    let mut rr = dot(&r, &r);
    let mut report = CgReport::default();
    let rel = |rr: f64| if reference > 0.0 { rr.sqrt() / reference } else { rr.sqrt() };
    report.residual = rel(rr);
    report.history.push(report.residual);
    if rr.sqrt() <= tol * reference || rr == 0.0 {
        return Ok((y, report));
    }
    let mut p = r.clone();
    let mut q = vec![0.0; n];
    for it in 1..=max_iter {
        spmv(&scaled, &p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            break;
        }
        let alpha = rr / pq;
        for k in 0..n {
            y[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let rr_new = dot(&r, &r);
        report.iterations = it;
        report.residual = rel(rr_new);
        report.history.push(report.residual);
        if rr_new.sqrt() <= tol * reference {
            // guard against drift of the recursive residual
            spmv(&scaled, &y, &mut q);
            let true_rr: f64 = rhs.iter().zip(&q).map(|(b, ay)| (b - ay).powi(2)).sum();
            if true_rr.sqrt() <= tol * reference {
                report.residual = rel(true_rr);
                let x = y.iter().zip(&scale).map(|(y, s)| y * s).collect();
                return Ok((x, report));
            }
            r = rhs.iter().zip(&q).map(|(b, ay)| b - ay).collect();
            p = r.clone();
            rr = true_rr;
            continue;
        }
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
    }
    Err(Error::SolverDivergence {
        iterations: report.iterations,
        residual: report.residual,
        history: report.history,
    })
}
