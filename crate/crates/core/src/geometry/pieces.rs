//! Exact decomposition of `rect ∩ primitive` and `rect \ primitive` into
//! rectangles, convex polygons and polar sectors, with their quadrature.

use std::f64::consts::PI;

use super::quadrature::gauss_legendre;
use super::region::Primitive;
use crate::rect::{Point, Rect};

const TOL: f64 = 1e-12;

/// Radial bound of a polar sector, as a function of the angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radial {
    Zero,
    Const(f64),
    /// The vertical line `x = v`.
    LineX(f64),
    /// The horizontal line `y = v`.
    LineY(f64),
}

impl Radial {
    fn at(&self, c: Point, t: f64) -> f64 {
        match *self {
            Radial::Zero => 0.0,
            Radial::Const(r) => r,
            Radial::LineX(v) => (v - c[0]) / t.cos(),
            Radial::LineY(v) => (v - c[1]) / t.sin(),
        }
    }

    /// Antiderivative of `rho(t)^2 / 2`.
    fn half_square_primitive(&self, c: Point, t: f64) -> f64 {
        match *self {
            Radial::Zero => 0.0,
            Radial::Const(r) => 0.5 * r * r * t,
            Radial::LineX(v) => 0.5 * (v - c[0]).powi(2) * t.tan(),
            Radial::LineY(v) => -0.5 * (v - c[1]).powi(2) / t.tan(),
        }
    }
}

/// `{c + r (cos t, sin t) : a < t < b, lo(t) < r < hi(t)}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub a: f64,
    pub b: f64,
    pub lo: Radial,
    pub hi: Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Rect(Rect),
    /// Convex polygon, counter-clockwise.
    Polygon(Vec<Point>),
    Polar { center: Point, sectors: Vec<Sector> },
    /// Fallback point cloud with parametric weights.
    Sampled(Vec<(Point, f64)>),
}

impl Piece {
    /// Exact parametric area (rule sum for sampled pieces).
    pub fn area(&self) -> f64 {
        match self {
            Piece::Rect(r) => r.area(),
            Piece::Polygon(v) => polygon_area(v),
            Piece::Polar { center, sectors } => sectors
                .iter()
                .map(|s| {
                    let hi = s.hi.half_square_primitive(*center, s.b)
                        - s.hi.half_square_primitive(*center, s.a);
                    let lo = s.lo.half_square_primitive(*center, s.b)
                        - s.lo.half_square_primitive(*center, s.a);
                    hi - lo
                })
                .sum(),
            Piece::Sampled(p) => p.iter().map(|(_, w)| w).sum(),
        }
    }

    /// Parametric rule with `order` Gauss points per direction. Rectangles
    /// touching `singular` are graded geometrically `grading` times.
    pub fn rule(&self, order: usize, singular: Option<Point>, grading: usize) -> Vec<(Point, f64)> {
        let mut out = Vec::new();
        match self {
            Piece::Rect(r) => {
                let rects = match singular {
                    Some(s) => graded_rects(r, s, grading),
                    None => vec![(*r, None)],
                };
                for (q, apex) in rects {
                    match apex {
                        Some(a) => corner_rule(&q, a, order, &mut out),
                        None => tensor_rule(&q, order, &mut out),
                    }
                }
            }
            Piece::Polygon(v) => {
                for k in 1..v.len().saturating_sub(1) {
                    triangle_rule(v[0], v[k], v[k + 1], order, &mut out);
                }
            }
            Piece::Polar { center, sectors } => {
                for s in sectors {
                    sector_rule(*center, s, order, &mut out);
                }
            }
            Piece::Sampled(p) => out.extend_from_slice(p),
        }
        out
    }
}

pub(crate) fn tensor_rule(r: &Rect, order: usize, out: &mut Vec<(Point, f64)>) {
    let (x, w) = gauss_legendre(order);
    let (dx, dy) = (r.width(), r.height());
    for (yj, wj) in x.iter().zip(&w) {
        for (xi, wi) in x.iter().zip(&w) {
            out.push((
                [r.min[0] + xi * dx, r.min[1] + yj * dy],
                wi * wj * dx * dy,
            ));
        }
    }
}

/// Collapsed (Duffy) tensor rule on a triangle.
fn triangle_rule(a: Point, b: Point, c: Point, order: usize, out: &mut Vec<(Point, f64)>) {
    let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
    if area2 == 0.0 {
        return;
    }
    let (x, w) = gauss_legendre(order + 1);
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            // P = a + u (b - a) + u v (c - b), Jacobian 2 |T| u
            let p = [
                a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1]),
            ];
            out.push((p, wu * wv * area2 * u));
        }
    }
}

/// Rule on a rectangle for integrands singular at its corner `apex`: two
/// Duffy triangles with the radial variable `u = t^3`, which turns the
/// powers `r^(-2/3)` and `r^(-1/3)` into polynomials in `t`.
fn corner_rule(q: &Rect, apex: Point, order: usize, out: &mut Vec<(Point, f64)>) {
    let c = q.corners();
    let k = (0..4)
        .min_by(|&i, &j| dist2(c[i], apex).total_cmp(&dist2(c[j], apex)))
        .expect("four corners");
    let a = c[k];
    let (xt, wt) = gauss_legendre(order + 3);
    let (xv, wv) = gauss_legendre(order + 1);
    for (b, d) in [(c[(k + 1) % 4], c[(k + 2) % 4]), (c[(k + 2) % 4], c[(k + 3) % 4])] {
        let area2 = ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0])).abs();
        for (t, w1) in xt.iter().zip(&wt) {
            let u = t * t * t;
            for (v, w2) in xv.iter().zip(&wv) {
                let p = [
                    a[0] + u * (b[0] - a[0]) + u * v * (d[0] - b[0]),
                    a[1] + u * (b[1] - a[1]) + u * v * (d[1] - b[1]),
                ];
                out.push((p, w1 * w2 * area2 * u * 3.0 * t * t));
            }
        }
    }
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn sector_rule(c: Point, s: &Sector, order: usize, out: &mut Vec<(Point, f64)>) {
    let (xt, wt) = gauss_legendre(order + 4);
    let (xr, wr) = gauss_legendre(order + 1);
    for (a, b) in angle_chunks(s) {
        let h = b - a;
        for (ti, wti) in xt.iter().zip(&wt) {
            let t = a + ti * h;
            let lo = s.lo.at(c, t);
            let hi = s.hi.at(c, t);
            if hi <= lo {
                continue;
            }
            let (st, ct) = t.sin_cos();
            for (ri, wri) in xr.iter().zip(&wr) {
                let r = lo + ri * (hi - lo);
                out.push(([c[0] + r * ct, c[1] + r * st], wti * h * wri * (hi - lo) * r));
            }
        }
    }
}

impl Radial {
    /// Angular distance from `[a, b]` to the nearest pole of the bound.
    fn pole_distance(&self, a: f64, b: f64) -> f64 {
        let offset = match self {
            Radial::LineX(_) => PI / 2.0,
            Radial::LineY(_) => 0.0,
            _ => return f64::INFINITY,
        };
        let k = ((0.5 * (a + b) - offset) / PI).round();
        let pole = offset + k * PI;
        let mut d = (pole - a).abs().min((pole - b).abs());
        for q in [pole - PI, pole + PI] {
            d = d.min((q - a).abs().min((q - b).abs()));
        }
        d
    }
}

/// Angular chunks of at most pi/16, shrunk geometrically where a line bound
/// approaches grazing incidence.
fn angle_chunks(s: &Sector) -> Vec<(f64, f64)> {
    let n = ((s.b - s.a) / (PI / 16.0)).ceil().max(1.0) as usize;
    let h = (s.b - s.a) / n as f64;
    let mut stack: Vec<(f64, f64)> = (0..n)
        .rev()
        .map(|k| (s.a + k as f64 * h, s.a + (k + 1) as f64 * h))
        .collect();
    let mut out = Vec::new();
    while let Some((a, b)) = stack.pop() {
        let d = s.lo.pole_distance(a, b).min(s.hi.pole_distance(a, b));
        if b - a > 0.5 * d && b - a > 1e-9 {
            let m = 0.5 * (a + b);
            stack.push((m, b));
            stack.push((a, m));
        } else {
            out.push((a, b));
        }
    }
    out
}

/// Split `r` so that `s` becomes a corner of every part containing it, then
/// halve repeatedly towards `s`.
/// Geometric subdivision of `r` towards `s` (or towards the closest point
/// of `r` when `s` lies just outside). Sub-rectangles touching that point
/// after `depth` levels are returned with it as their singular corner.
pub(crate) fn graded_rects(r: &Rect, s: Point, depth: usize) -> Vec<(Rect, Option<Point>)> {
    let p = [s[0].clamp(r.min[0], r.max[0]), s[1].clamp(r.min[1], r.max[1])];
    if dist2(p, s).sqrt() > 0.5 * r.width().min(r.height()) {
        return vec![(*r, None)];
    }
    let xs: Vec<f64> = if p[0] > r.min[0] + TOL && p[0] < r.max[0] - TOL {
        vec![r.min[0], p[0], r.max[0]]
    } else {
        vec![r.min[0], r.max[0]]
    };
    let ys: Vec<f64> = if p[1] > r.min[1] + TOL && p[1] < r.max[1] - TOL {
        vec![r.min[1], p[1], r.max[1]]
    } else {
        vec![r.min[1], r.max[1]]
    };
    let mut out = Vec::new();
    for yw in ys.windows(2) {
        for xw in xs.windows(2) {
            let q = Rect::new(xw[0], xw[1], yw[0], yw[1]);
            grade_corner(&q, p, depth, &mut out);
        }
    }
    out
}

fn grade_corner(q: &Rect, s: Point, depth: usize, out: &mut Vec<(Rect, Option<Point>)>) {
    let at_corner = q.corners().iter().any(|c| (c[0] - s[0]).abs() <= TOL && (c[1] - s[1]).abs() <= TOL);
    if !at_corner {
        out.push((*q, None));
    } else if depth == 0 {
        out.push((*q, Some(s)));
    } else {
        for child in q.quadrants() {
            grade_corner(&child, s, depth - 1, out);
        }
    }
}

pub(crate) fn polygon_area(v: &[Point]) -> f64 {
    // relative to the first vertex to keep tiny polygons accurate
    let o = v[0];
    let mut a = 0.0;
    for k in 1..v.len().saturating_sub(1) {
        let (p, q) = (v[k], v[k + 1]);
        a += (p[0] - o[0]) * (q[1] - o[1]) - (q[0] - o[0]) * (p[1] - o[1]);
    }
    0.5 * a.abs()
}

/// Sutherland-Hodgman clip of a convex polygon to `{x : (x - p) . n < 0}`.
fn clip_polygon(poly: &[Point], p: Point, n: [f64; 2]) -> Vec<Point> {
    let f = |x: Point| (x[0] - p[0]) * n[0] + (x[1] - p[1]) * n[1];
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (fa, fb) = (f(a), f(b));
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Pieces of `r ∩ prim` (`keep_inside`) or `r \ prim`.
pub fn clip_pieces(r: &Rect, prim: &Primitive, keep_inside: bool) -> Vec<Piece> {
    let mut out = match *prim {
        Primitive::Rect(q) => rect_pieces(r, &q, keep_inside),
        Primitive::HalfPlane { point, normal } => {
            let n = if keep_inside { normal } else { [-normal[0], -normal[1]] };
            let poly = clip_polygon(&r.corners(), point, n);
            if poly.len() >= 3 {
                vec![Piece::Polygon(poly)]
            } else {
                Vec::new()
            }
        }
        Primitive::Disk { center, radius } => polar_pieces(r, center, radius, keep_inside),
    };
    out.retain(|p| p.area() > 0.0);
    out
}

fn rect_pieces(r: &Rect, q: &Rect, keep_inside: bool) -> Vec<Piece> {
    let x0 = r.min[0].max(q.min[0]);
    let x1 = r.max[0].min(q.max[0]);
    let y0 = r.min[1].max(q.min[1]);
    let y1 = r.max[1].min(q.max[1]);
    if keep_inside {
        if x1 > x0 && y1 > y0 {
            return vec![Piece::Rect(Rect::new(x0, x1, y0, y1))];
        }
        return Vec::new();
    }
    if !(x1 > x0 && y1 > y0) {
        return vec![Piece::Rect(*r)];
    }
    let mut out = Vec::new();
    let mut push = |a: f64, b: f64, c: f64, d: f64| {
        if b - a > TOL && d - c > TOL {
            out.push(Piece::Rect(Rect::new(a, b, c, d)));
        }
    };
    push(r.min[0], x0, r.min[1], r.max[1]);
    push(x1, r.max[0], r.min[1], r.max[1]);
    push(x0, x1, r.min[1], y0);
    push(x0, x1, y1, r.max[1]);
    out
}

fn polar_pieces(r: &Rect, c: Point, radius: f64, keep_inside: bool) -> Vec<Piece> {
    let center_in = r.contains(c, 0.0);
    let angle = |p: Point| (p[1] - c[1]).atan2(p[0] - c[0]);
    let mut cuts: Vec<f64> = Vec::new();
    for p in r.corners() {
        if (p[0] - c[0]).hypot(p[1] - c[1]) > 1e-15 {
            cuts.push(angle(p));
        }
    }
    for k in 0..2 {
        for v in [r.min[k], r.max[k]] {
            let dv = v - c[k];
            if dv.abs() >= radius {
                continue;
            }
            let h = (radius * radius - dv * dv).sqrt();
            for sgn in [-1.0, 1.0] {
                let mut p = [0.0; 2];
                p[k] = v;
                p[1 - k] = c[1 - k] + sgn * h;
                if p[1 - k] >= r.min[1 - k] && p[1 - k] <= r.max[1 - k] {
                    cuts.push(angle(p));
                }
            }
        }
    }
    let (lo, hi) = if center_in {
        (-PI, PI)
    } else {
        // the rectangle is seen under an angle below pi; unwrap around the
        // direction of its centre
        let m = r.center();
        let reference = angle(m);
        for t in cuts.iter_mut() {
            let mut d = *t - reference;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
            }
            *t = reference + d;
        }
        let corner_angles: Vec<f64> = cuts[..4.min(cuts.len())].to_vec();
        let lo = corner_angles.iter().copied().fold(f64::MAX, f64::min);
        let hi = corner_angles.iter().copied().fold(f64::MIN, f64::max);
        (lo, hi)
    };
    cuts.push(lo);
    cuts.push(hi);
    cuts.retain(|t| *t >= lo && *t <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut sectors = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-15 {
            continue;
        }
        let t = 0.5 * (a + b);
        let d = [t.cos(), t.sin()];
        let mut enter = (f64::NEG_INFINITY, Radial::Zero);
        let mut exit = (f64::INFINITY, Radial::Zero);
        let mut empty = false;
        for k in 0..2 {
            let line = |v: f64| if k == 0 { Radial::LineX(v) } else { Radial::LineY(v) };
            if d[k].abs() < 1e-300 {
                if c[k] < r.min[k] || c[k] > r.max[k] {
                    empty = true;
                }
                continue;
            }
            let t1 = (r.min[k] - c[k]) / d[k];
            let t2 = (r.max[k] - c[k]) / d[k];
            let (near, far) = if d[k] > 0.0 {
                ((t1, line(r.min[k])), (t2, line(r.max[k])))
            } else {
                ((t2, line(r.max[k])), (t1, line(r.min[k])))
            };
            if near.0 > enter.0 {
                enter = near;
            }
            if far.0 < exit.0 {
                exit = far;
            }
        }
        if center_in {
            enter = (0.0, Radial::Zero);
        }
        if empty || enter.0 >= exit.0 {
            continue;
        }
        let sector = if keep_inside {
            if radius <= enter.0 {
                continue;
            }
            let hi = if radius < exit.0 { Radial::Const(radius) } else { exit.1 };
            Sector { a, b, lo: enter.1, hi }
        } else {
            if radius >= exit.0 {
                continue;
            }
            let lo = if radius > enter.0 { Radial::Const(radius) } else { enter.1 };
            Sector { a, b, lo, hi: exit.1 }
        };
        sectors.push(sector);
    }
    if sectors.is_empty() {
        return Vec::new();
    }
    vec![Piece::Polar { center: c, sectors }]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn integrate(p: &Piece, order: usize, f: impl Fn(Point) -> f64) -> f64 {
        p.rule(order, None, 0).iter().map(|(x, w)| w * f(*x)).sum()
    }

    #[test]
    fn half_plane_through_edge_midpoints() {
        let h = Primitive::half_plane([0.5, 0.0], [1.0, -1.0]);
        let pieces = clip_pieces(&Rect::UNIT, &h, false);
        assert_eq!(pieces.len(), 1);
        // below the line y = x - 0.5: triangle (0.5, 0), (1, 0), (1, 0.5)
        assert_abs_diff_eq!(pieces[0].area(), 0.125, epsilon = 1e-15);
        // line through (0, 0.5) and (0.5, 1): triangle of area 1/8
        let g = Primitive::half_plane([0.0, 0.5], [1.0, -1.0]);
        let tri = clip_pieces(&Rect::UNIT, &g, true);
        assert_abs_diff_eq!(tri[0].area(), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(integrate(&tri[0], 2, |_| 1.0), 0.125, epsilon = 1e-15);
        // through two edge midpoints, diagonal cut in half
        let d = Primitive::half_plane([0.5, 0.5], [1.0, -1.0]);
        let half = clip_pieces(&Rect::UNIT, &d, true);
        assert_abs_diff_eq!(integrate(&half[0], 2, |_| 1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn quarter_disk_moment() {
        // int over the quarter disk of radius R of x^2 y = R^5 / 15
        let r = 0.3;
        let d = Primitive::disk([0.0, 0.0], r);
        let p = clip_pieces(&Rect::UNIT, &d, true);
        assert_abs_diff_eq!(p[0].area(), PI * r * r / 4.0, epsilon = 1e-15);
        let q = integrate(&p[0], 3, |x| x[0] * x[0] * x[1]);
        assert_abs_diff_eq!(q, r.powi(5) / 15.0, epsilon = 1e-13);
    }

    #[test]
    fn disk_complements_sum_to_cell() {
        let cells = [
            Rect::new(0.0, 0.25, 0.0, 0.25),
            Rect::new(0.2, 0.3, 0.1, 0.4),
            Rect::new(0.3, 0.5, 0.2, 0.4),
            Rect::new(0.26, 0.5, 0.0, 0.5),
            Rect::new(0.1, 0.4, 0.1, 0.4),
        ];
        let d = Primitive::disk([0.25, 0.25], 0.1);
        for cell in cells {
            let inside: f64 = clip_pieces(&cell, &d, true).iter().map(|p| p.area()).sum();
            let outside: f64 = clip_pieces(&cell, &d, false).iter().map(|p| p.area()).sum();
            assert_abs_diff_eq!(inside + outside, cell.area(), epsilon = 1e-15);
            let qi: f64 = clip_pieces(&cell, &d, true).iter().map(|p| integrate(p, 3, |_| 1.0)).sum();
            assert_abs_diff_eq!(qi, inside, epsilon = 1e-13);
            let qo: f64 = clip_pieces(&cell, &d, false).iter().map(|p| integrate(p, 3, |_| 1.0)).sum();
            assert_abs_diff_eq!(qo, outside, epsilon = 1e-13);
        }
        let whole: f64 = clip_pieces(&cells[4], &d, true).iter().map(|p| p.area()).sum();
        assert_abs_diff_eq!(whole, PI * 0.01, epsilon = 1e-15);
    }

    #[test]
    fn rect_difference() {
        let q = Primitive::Rect(Rect::new(0.5, 1.0, 0.0, 0.5));
        let r = Rect::new(0.25, 0.75, 0.25, 0.75);
        let out: f64 = clip_pieces(&r, &q, false).iter().map(|p| p.area()).sum();
        assert_abs_diff_eq!(out, 0.25 - 0.0625, epsilon = 1e-15);
        let inn: f64 = clip_pieces(&r, &q, true).iter().map(|p| p.area()).sum();
        assert_abs_diff_eq!(inn, 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn corner_rule_integrates_inverse_cube_root_singularity() {
        // 2 (3/4) int_0^{pi/4} sec(t)^{4/3} dt, by composite Simpson
        let n = 2000;
        let h = PI / 4.0 / n as f64;
        let f = |t: f64| t.cos().powf(-4.0 / 3.0);
        let mut simpson = f(0.0) + f(PI / 4.0);
        for k in 1..n {
            simpson += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        let exact = 1.5 * simpson * h / 3.0;
        for (order, tol) in [(3, 1e-5), (10, 1e-11)] {
            let mut out = Vec::new();
            corner_rule(&Rect::new(0.0, 1.0, 0.0, 1.0), [0.0, 0.0], order, &mut out);
            let q: f64 = out.iter().map(|(p, w)| w * p[0].hypot(p[1]).powf(-2.0 / 3.0)).sum();
            assert_abs_diff_eq!(q, exact, epsilon = tol * exact);
            let area: f64 = out.iter().map(|(_, w)| w).sum();
            assert_abs_diff_eq!(area, 1.0, epsilon = 1e-14);
        }
        // the same through the graded rule of a rect piece
        let piece = Piece::Rect(Rect::new(0.0, 1.0, 0.0, 1.0));
        let q: f64 = piece
            .rule(3, Some([0.0, 0.0]), 4)
            .iter()
            .map(|(p, w)| w * p[0].hypot(p[1]).powf(-2.0 / 3.0))
            .sum();
        assert_abs_diff_eq!(q, exact, epsilon = 1e-5 * exact);
    }

    #[test]
    fn graded_rects_tile_and_refine_towards_point() {
        let r = Rect::new(0.0, 1.0, 0.0, 1.0);
        let g = graded_rects(&r, [0.5, 0.5], 3);
        let a: f64 = g.iter().map(|(q, _)| q.area()).sum();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        let smallest = g.iter().map(|(q, _)| q.width()).fold(f64::MAX, f64::min);
        assert_abs_diff_eq!(smallest, 0.5 / 8.0);
        assert_eq!(g.iter().filter(|(_, apex)| apex.is_some()).count(), 4);
        assert_eq!(graded_rects(&r, [2.0, 2.0], 3).len(), 1);
        // a point just outside grades towards the closest boundary point
        let g = graded_rects(&r, [1.0 + 1e-6, 0.25], 2);
        assert!(g.iter().any(|(_, apex)| *apex == Some([1.0, 0.25])));
    }
}
