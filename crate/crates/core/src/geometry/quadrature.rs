//! Gauss-Legendre rules and the quadrature containers shared by the
//! assembly and estimation code.

use std::sync::OnceLock;

use crate::rect::Point;

const MAX_CACHED: usize = 40;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    assert!(n >= 1, "a Gauss rule needs at least one point");
    if n <= MAX_CACHED {
        let cache = CACHE.get_or_init(|| (1..=MAX_CACHED).map(compute).collect());
        return cache[n - 1].clone();
    }
    compute(n)
}

fn compute(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Area rule: parametric points with physical weights.
#[derive(Debug, Clone, Default)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Curve rule: parametric points, physical length weights and unit
/// physical normals pointing out of the trimmed domain.
#[derive(Debug, Clone, Default)]
pub struct BoundaryRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<[f64; 2]>,
}

impl BoundaryRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn extend(&mut self, other: BoundaryRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
        self.normals.extend(other.normals);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_rules_integrate_monomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for d in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert_abs_diff_eq!(q, 1.0 / (d as f64 + 1.0), epsilon = 1e-14);
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn single_point_rule_is_midpoint() {
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.5]);
        assert_eq!(w, vec![1.0]);
    }
}
