//! Straight segments and circular arcs: clipping of primitive boundaries to
//! rectangles and pairwise intersections.

use std::f64::consts::PI;

use super::region::Primitive;
use crate::rect::{Point, Rect};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    Segment { a: Point, b: Point },
    /// Counter-clockwise arc from angle `t0` to `t1 > t0`.
    Arc {
        center: Point,
        radius: f64,
        t0: f64,
        t1: f64,
    },
}

impl Curve {
    pub fn point(&self, s: f64) -> Point {
        match *self {
            Curve::Segment { a, b } => [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
            Curve::Arc {
                center,
                radius,
                t0,
                t1,
            } => {
                let t = t0 + s * (t1 - t0);
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            }
        }
    }

    /// Derivative with respect to the curve parameter `s` in `[0, 1]`.
    pub fn derivative(&self, s: f64) -> [f64; 2] {
        match *self {
            Curve::Segment { a, b } => [b[0] - a[0], b[1] - a[1]],
            Curve::Arc {
                radius, t0, t1, ..
            } => {
                let t = t0 + s * (t1 - t0);
                let d = t1 - t0;
                [-radius * d * t.sin(), radius * d * t.cos()]
            }
        }
    }

    /// Unit normal obtained by rotating the tangent counter-clockwise.
    pub fn left_normal(&self, s: f64) -> [f64; 2] {
        let d = self.derivative(s);
        let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
        [-d[1] / l, d[0] / l]
    }

    pub fn length(&self) -> f64 {
        match *self {
            Curve::Segment { a, b } => ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt(),
            Curve::Arc {
                radius, t0, t1, ..
            } => radius * (t1 - t0),
        }
    }

    pub fn sub(&self, s0: f64, s1: f64) -> Curve {
        match *self {
            Curve::Segment { .. } => Curve::Segment {
                a: self.point(s0),
                b: self.point(s1),
            },
            Curve::Arc {
                center,
                radius,
                t0,
                t1,
            } => Curve::Arc {
                center,
                radius,
                t0: t0 + s0 * (t1 - t0),
                t1: t0 + s1 * (t1 - t0),
            },
        }
    }

    /// Split into pieces at the given parameters (any order, duplicates and
    /// out-of-range values are ignored).
    pub fn split(&self, params: &[f64]) -> Vec<Curve> {
        let mut ps: Vec<f64> = params
            .iter()
            .copied()
            .filter(|s| *s > 1e-13 && *s < 1.0 - 1e-13)
            .collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        let mut out = Vec::with_capacity(ps.len() + 1);
        let mut prev = 0.0;
        for s in ps.into_iter().chain(std::iter::once(1.0)) {
            out.push(self.sub(prev, s));
            prev = s;
        }
        out
    }

    /// Parameters in `[0, 1]` where `self` meets `other`.
    pub fn intersections(&self, other: &Curve) -> Vec<f64> {
        let pts = match (*self, *other) {
            (Curve::Segment { a, b }, Curve::Segment { a: c, b: d }) => seg_seg(a, b, c, d)
                .map(|(s, _)| vec![s])
                .unwrap_or_default(),
            (Curve::Segment { a, b }, Curve::Arc { center, radius, t0, t1 }) => {
                seg_circle(a, b, center, radius)
                    .into_iter()
                    .filter(|&s| {
                        let p = lerp(a, b, s);
                        angle_in(angle_of(center, p), t0, t1)
                    })
                    .collect()
            }
            (Curve::Arc { center, radius, t0, t1 }, Curve::Segment { a, b }) => {
                seg_circle(a, b, center, radius)
                    .into_iter()
                    .filter_map(|s| {
                        let t = angle_of(center, lerp(a, b, s));
                        arc_param(t, t0, t1)
                    })
                    .collect()
            }
            (
                Curve::Arc { center, radius, t0, t1 },
                Curve::Arc { center: c2, radius: r2, t0: u0, t1: u1 },
            ) => circle_circle(center, radius, c2, r2)
                .into_iter()
                .filter(|p| angle_in(angle_of(c2, *p), u0, u1))
                .filter_map(|p| arc_param(angle_of(center, p), t0, t1))
                .collect(),
        };
        pts.into_iter().filter(|s| (-TOL..=1.0 + TOL).contains(s)).collect()
    }
}

fn lerp(a: Point, b: Point, s: f64) -> Point {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

fn angle_of(c: Point, p: Point) -> f64 {
    (p[1] - c[1]).atan2(p[0] - c[0])
}

/// Angle `t` shifted by multiples of 2 pi into `[t0, t0 + 2 pi)`.
fn unwrap_from(t: f64, t0: f64) -> f64 {
    let mut u = t;
    while u < t0 - 1e-14 {
        u += 2.0 * PI;
    }
    while u >= t0 + 2.0 * PI - 1e-14 {
        u -= 2.0 * PI;
    }
    u
}

fn angle_in(t: f64, t0: f64, t1: f64) -> bool {
    unwrap_from(t, t0) <= t1 + 1e-12
}

fn arc_param(t: f64, t0: f64, t1: f64) -> Option<f64> {
    let u = unwrap_from(t, t0);
    (u <= t1 + 1e-12).then(|| (u - t0) / (t1 - t0))
}

fn seg_seg(a: Point, b: Point, c: Point, d: Point) -> Option<(f64, f64)> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let q = [d[0] - c[0], d[1] - c[1]];
    let den = r[0] * q[1] - r[1] * q[0];
    let scale = (r[0].hypot(r[1])) * (q[0].hypot(q[1]));
    if den.abs() <= 1e-14 * scale {
        return None;
    }
    let w = [c[0] - a[0], c[1] - a[1]];
    let s = (w[0] * q[1] - w[1] * q[0]) / den;
    let u = (w[0] * r[1] - w[1] * r[0]) / den;
    ((-TOL..=1.0 + TOL).contains(&s) && (-TOL..=1.0 + TOL).contains(&u)).then_some((s, u))
}

/// Parameters of the segment `a + s (b - a)` on the circle.
fn seg_circle(a: Point, b: Point, c: Point, r: f64) -> Vec<f64> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let f = [a[0] - c[0], a[1] - c[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    let qb = 2.0 * (f[0] * d[0] + f[1] * d[1]);
    let qc = f[0] * f[0] + f[1] * f[1] - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 || qa == 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    vec![(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
}

fn circle_circle(c1: Point, r1: f64, c2: Point, r2: f64) -> Vec<Point> {
    let dx = c2[0] - c1[0];
    let dy = c2[1] - c1[1];
    let d = dx.hypot(dy);
    if d == 0.0 || d > r1 + r2 || d < (r1 - r2).abs() {
        return Vec::new();
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let m = [c1[0] + a * dx / d, c1[1] + a * dy / d];
    vec![
        [m[0] - h * dy / d, m[1] + h * dx / d],
        [m[0] + h * dy / d, m[1] - h * dx / d],
    ]
}

/// Clip the segment `a -> b` to the closed rectangle (Liang-Barsky).
pub fn clip_segment(a: Point, b: Point, r: &Rect) -> Option<Curve> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for k in 0..2 {
        if d[k].abs() < 1e-300 {
            if a[k] < r.min[k] - TOL || a[k] > r.max[k] + TOL {
                return None;
            }
            continue;
        }
        let u = (r.min[k] - a[k]) / d[k];
        let v = (r.max[k] - a[k]) / d[k];
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    let len = d[0].hypot(d[1]);
    ((t1 - t0) * len > TOL).then(|| Curve::Segment {
        a: lerp(a, b, t0),
        b: lerp(a, b, t1),
    })
}

/// Boundary of a primitive inside the closed rectangle.
pub fn clip_boundary(prim: &Primitive, r: &Rect) -> Vec<Curve> {
    match *prim {
        Primitive::HalfPlane { point, normal } => {
            // a segment long enough to cross the whole rectangle
            let dir = [-normal[1], normal[0]];
            let c = r.center();
            let s = (c[0] - point[0]) * dir[0] + (c[1] - point[1]) * dir[1];
            let foot = [point[0] + s * dir[0], point[1] + s * dir[1]];
            let ext = 2.0 * (r.width() + r.height()) + 1.0;
            let a = [foot[0] - ext * dir[0], foot[1] - ext * dir[1]];
            let b = [foot[0] + ext * dir[0], foot[1] + ext * dir[1]];
            clip_segment(a, b, r).into_iter().collect()
        }
        Primitive::Rect(q) => {
            let c = q.corners();
            (0..4)
                .filter_map(|k| clip_segment(c[k], c[(k + 1) % 4], r))
                .collect()
        }
        Primitive::Disk { center, radius } => clip_circle(center, radius, r),
    }
}

fn clip_circle(center: Point, radius: f64, r: &Rect) -> Vec<Curve> {
    let mut angles = Vec::new();
    for k in 0..2 {
        for v in [r.min[k], r.max[k]] {
            let dv = v - center[k];
            if dv.abs() > radius {
                continue;
            }
            let h = (radius * radius - dv * dv).sqrt();
            for sgn in [-1.0, 1.0] {
                let mut p = [0.0; 2];
                p[k] = v;
                p[1 - k] = center[1 - k] + sgn * h;
                if p[1 - k] >= r.min[1 - k] - TOL && p[1 - k] <= r.max[1 - k] + TOL {
                    angles.push(angle_of(center, p));
                }
            }
        }
    }
    let inside = |t: f64| {
        let p = [center[0] + radius * t.cos(), center[1] + radius * t.sin()];
        r.min[0] < p[0] && p[0] < r.max[0] && r.min[1] < p[1] && p[1] < r.max[1]
    };
    if angles.is_empty() {
        if inside(0.0) {
            // whole circle, in quarters to keep the arcs short
            return (0..4)
                .map(|q| Curve::Arc {
                    center,
                    radius,
                    t0: -PI + q as f64 * PI / 2.0,
                    t1: -PI + (q + 1) as f64 * PI / 2.0,
                })
                .collect();
        }
        return Vec::new();
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let n = angles.len();
    let mut out = Vec::new();
    for k in 0..n {
        let t0 = angles[k];
        let t1 = if k + 1 < n { angles[k + 1] } else { angles[0] + 2.0 * PI };
        if (t1 - t0) * radius <= TOL {
            continue;
        }
        if inside(0.5 * (t0 + t1)) {
            out.push(Curve::Arc {
                center,
                radius,
                t0,
                t1,
            });
        }
    }
    out
}
