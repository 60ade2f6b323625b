//! Analytic geometry maps from the parametric square to the physical domain.

use crate::error::{Error, Result};
use crate::rect::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeoMap {
    Identity,
    /// `F(p) = origin + scale * p`
    Scaled { origin: Point, scale: f64 },
    /// `F(s, t) = center + (r_inner + (r_outer - r_inner) t) (cos a, sin a)`
    /// with `a = angle_start + s (angle_end - angle_start)`.
    PolarAnnulus {
        center: Point,
        r_inner: f64,
        r_outer: f64,
        angle_start: f64,
        angle_end: f64,
    },
}

/// Map data at one parametric point, with the coefficients needed to push
/// parametric derivatives forward.
#[derive(Debug, Clone, Copy)]
pub struct MapPoint {
    pub x: Point,
    /// `jac[a][k] = dF_a / dxi_k`
    pub jac: [[f64; 2]; 2],
    /// `inv[k][a] = dxi_k / dx_a`
    pub inv: [[f64; 2]; 2],
    pub abs_det: f64,
    /// Laplacian weights of the parametric Hessian entries `[xx, xy, yy]`.
    lap_second: [f64; 3],
    /// Laplacian weights of the parametric gradient entries.
    lap_first: [f64; 2],
}

impl GeoMap {
    pub fn is_affine(&self) -> bool {
        matches!(self, GeoMap::Identity | GeoMap::Scaled { .. })
    }

    pub fn eval(&self, p: Point) -> Point {
        match *self {
            GeoMap::Identity => p,
            GeoMap::Scaled { origin, scale } => {
                [origin[0] + scale * p[0], origin[1] + scale * p[1]]
            }
            GeoMap::PolarAnnulus {
                center,
                r_inner,
                r_outer,
                angle_start,
                angle_end,
            } => {
                let a = angle_start + p[0] * (angle_end - angle_start);
                let r = r_inner + p[1] * (r_outer - r_inner);
                [center[0] + r * a.cos(), center[1] + r * a.sin()]
            }
        }
    }

    pub fn jacobian(&self, p: Point) -> [[f64; 2]; 2] {
        match *self {
            GeoMap::Identity => [[1.0, 0.0], [0.0, 1.0]],
            GeoMap::Scaled { scale, .. } => [[scale, 0.0], [0.0, scale]],
            GeoMap::PolarAnnulus {
                r_inner,
                r_outer,
                angle_start,
                angle_end,
                ..
            } => {
                let da = angle_end - angle_start;
                let dr = r_outer - r_inner;
                let a = angle_start + p[0] * da;
                let r = r_inner + p[1] * dr;
                let (s, c) = a.sin_cos();
                [[-r * da * s, dr * c], [r * da * c, dr * s]]
            }
        }
    }

    /// Hessian `[xx, xy, yy]` of each physical component.
    pub fn hessians(&self, p: Point) -> [[f64; 3]; 2] {
        match *self {
            GeoMap::Identity | GeoMap::Scaled { .. } => [[0.0; 3]; 2],
            GeoMap::PolarAnnulus {
                r_inner,
                r_outer,
                angle_start,
                angle_end,
                ..
            } => {
                let da = angle_end - angle_start;
                let dr = r_outer - r_inner;
                let a = angle_start + p[0] * da;
                let r = r_inner + p[1] * dr;
                let (s, c) = a.sin_cos();
                [
                    [-r * da * da * c, -dr * da * s, 0.0],
                    [-r * da * da * s, dr * da * c, 0.0],
                ]
            }
        }
    }

    pub fn abs_det(&self, p: Point) -> f64 {
        let j = self.jacobian(p);
        (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs()
    }

    pub fn at(&self, p: Point) -> Result<MapPoint> {
        let jac = self.jacobian(p);
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-14 {
            return Err(Error::SingularGeometry(p[0], p[1]));
        }
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        let hess = self.hessians(p);
        // sum_a G_ka G_la for (k, l) in {xx, xy, yy}; the mixed entry is
        // counted twice in the Laplacian.
        let gg = |k: usize, l: usize| inv[k][0] * inv[l][0] + inv[k][1] * inv[l][1];
        let lap_second = [gg(0, 0), 2.0 * gg(0, 1), gg(1, 1)];
        // sum_a d2 xi_k / dx_a^2 = -sum_m G_km sum_ij H^m_ij (sum_a G_ia G_ja)
        let mut lap_first = [0.0; 2];
        for (k, lf) in lap_first.iter_mut().enumerate() {
            let mut s = 0.0;
            for (m, h) in hess.iter().enumerate() {
                let contracted = h[0] * gg(0, 0) + 2.0 * h[1] * gg(0, 1) + h[2] * gg(1, 1);
                s += inv[k][m] * contracted;
            }
            *lf = -s;
        }
        Ok(MapPoint {
            x: self.eval(p),
            jac,
            inv,
            abs_det: det.abs(),
            lap_second,
            lap_first,
        })
    }
}

impl MapPoint {
    /// Physical gradient from the parametric one.
    pub fn gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// Physical Laplacian from parametric gradient and Hessian `[xx, xy, yy]`.
    pub fn laplacian(&self, g: [f64; 2], h: [f64; 3]) -> f64 {
        self.lap_second[0] * h[0]
            + self.lap_second[1] * h[1]
            + self.lap_second[2] * h[2]
            + self.lap_first[0] * g[0]
            + self.lap_first[1] * g[1]
    }

    /// Unit physical normal from a parametric (not necessarily unit) normal.
    pub fn normal(&self, n: [f64; 2]) -> [f64; 2] {
        let v = self.gradient(n);
        let l = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[0] / l, v[1] / l]
    }

    /// Physical length of a parametric tangent vector.
    pub fn stretch(&self, t: [f64; 2]) -> f64 {
        let v = [
            self.jac[0][0] * t[0] + self.jac[0][1] * t[1],
            self.jac[1][0] * t[0] + self.jac[1][1] * t[1],
        ];
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }
}
