//! Trimmed geometry: maps, trimming regions, cell classification and the
//! quadrature rules on clipped cells, trimming curves and boundary faces.

pub mod curves;
pub mod map;
pub mod pieces;
pub mod quadrature;
pub mod region;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::{CellId, HierarchicalSpace};
use crate::rect::{dist, Point, Rect};
pub use curves::Curve;
pub use map::{GeoMap, MapPoint};
pub use pieces::Piece;
pub use quadrature::{gauss_legendre, BoundaryRule, QuadRule};
pub use region::{Primitive, Region, Relation};

use curves::clip_boundary;
use pieces::clip_pieces;

const MAX_SPLIT_DEPTH: usize = 8;
const EDGE_TOL: f64 = 1e-13;
/// Cells whose clipped area is below this fraction of their area are treated
/// as lying outside the domain.
pub const DEGENERATE_RATIO: f64 = 1e-16;

/// Sides of the parametric square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// `x = 0`
    Left,
    /// `x = 1`
    Right,
    /// `y = 0`
    Bottom,
    /// `y = 1`
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Unit normal pointing into the square.
    pub fn inward(&self) -> [f64; 2] {
        match self {
            Side::Left => [1.0, 0.0],
            Side::Right => [-1.0, 0.0],
            Side::Bottom => [0.0, 1.0],
            Side::Top => [0.0, -1.0],
        }
    }

    /// Edge of `r` lying on this side, if any.
    pub fn edge_of(&self, r: &Rect) -> Option<Curve> {
        let seg = |a: Point, b: Point| Some(Curve::Segment { a, b });
        match self {
            Side::Left if r.min[0] == 0.0 => seg([0.0, r.min[1]], [0.0, r.max[1]]),
            Side::Right if r.max[0] == 1.0 => seg([1.0, r.min[1]], [1.0, r.max[1]]),
            Side::Bottom if r.min[1] == 0.0 => seg([r.min[0], 0.0], [r.max[0], 0.0]),
            Side::Top if r.max[1] == 1.0 => seg([r.min[0], 1.0], [r.max[0], 1.0]),
            _ => None,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "bottom" => Ok(Side::Bottom),
            "top" => Ok(Side::Top),
            _ => Err(Error::InvalidInput(format!("unknown side `{s}`"))),
        }
    }
}

/// Geometric description of a problem: map, trimming region (removed from
/// the square), Dirichlet sides and an optional singular point around which
/// quadrature is graded.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub map: GeoMap,
    pub region: Region,
    pub dirichlet: Vec<Side>,
    pub singular: Option<Point>,
    pub grading: usize,
}

impl Geometry {
    pub fn new(map: GeoMap, region: Region) -> Self {
        Geometry {
            map,
            region,
            dirichlet: Vec::new(),
            singular: None,
            grading: 0,
        }
    }

    pub fn with_dirichlet(mut self, sides: &[Side]) -> Self {
        self.dirichlet = sides.to_vec();
        self
    }

    pub fn with_singular_point(mut self, p: Point, grading: usize) -> Self {
        self.singular = Some(p);
        self.grading = grading;
        self
    }

    pub fn is_dirichlet(&self, side: Side) -> bool {
        self.dirichlet.contains(&side)
    }

    /// Rule on `K ∩ Ω` with physical weights.
    pub fn domain_rule(&self, cg: &CellGeometry, order: usize) -> Result<QuadRule> {
        let mut rule = QuadRule::default();
        for piece in &cg.pieces {
            for (p, w) in piece.rule(order, self.singular, self.grading) {
                let det = self.map.abs_det(p);
                if det < 1e-14 {
                    return Err(Error::SingularGeometry(p[0], p[1]));
                }
                rule.points.push(p);
                rule.weights.push(w * det);
            }
        }
        Ok(rule)
    }

    /// Rule on the trimming curve inside the cell, normals out of the domain.
    pub fn gamma_rule(&self, cg: &CellGeometry, order: usize) -> Result<BoundaryRule> {
        let mut rule = BoundaryRule::default();
        for seg in &cg.gamma {
            let sign = if seg.flip { -1.0 } else { 1.0 };
            self.curve_rule(&seg.curve, order, |s| {
                let n = seg.curve.left_normal(s);
                [sign * n[0], sign * n[1]]
            }, &mut rule)?;
        }
        Ok(rule)
    }

    /// Rule on the kept part of a boundary face, normals out of the square.
    pub fn face_rule(&self, face: &BoundaryFace, order: usize) -> Result<BoundaryRule> {
        let mut rule = BoundaryRule::default();
        let inward = face.side.inward();
        for c in &face.kept {
            self.curve_rule(c, order, |_| [-inward[0], -inward[1]], &mut rule)?;
        }
        Ok(rule)
    }

    fn curve_rule(
        &self,
        curve: &Curve,
        order: usize,
        normal: impl Fn(f64) -> [f64; 2],
        rule: &mut BoundaryRule,
    ) -> Result<()> {
        // arcs are split into chunks of at most pi/16 with extra points
        let (chunks, points) = match *curve {
            Curve::Arc { t0, t1, .. } => {
                (((t1 - t0).abs() / (std::f64::consts::PI / 16.0)).ceil().max(1.0) as usize, order + 3)
            }
            Curve::Segment { .. } => (1, order),
        };
        let (x, w) = gauss_legendre(points);
        let (xs, ws) = gauss_legendre(points + 2);
        // graded intervals sit a fixed ratio away from the singularity
        let (xg, wg) = gauss_legendre(points + 5);
        let params = self.graded_params(curve);
        let graded = params.len() > 1;
        for (a, b, end) in params {
            let h = (b - a) / chunks as f64;
            for k in 0..chunks {
                let (s0, s1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
                // cubic substitution on the piece touching the singular end
                let sub = match end {
                    SingularEnd::Start if k == 0 => Some(s0),
                    SingularEnd::Finish if k + 1 == chunks => Some(s1),
                    _ => None,
                };
                let (gx, gw) = match (sub, graded) {
                    (Some(_), _) => (&xs, &ws),
                    (None, true) => (&xg, &wg),
                    (None, false) => (&x, &w),
                };
                for (xi, wi) in gx.iter().zip(gw) {
                    let (s, jac) = match sub {
                        None => (s0 + xi * (s1 - s0), s1 - s0),
                        Some(o) => {
                            let far = if o == s0 { s1 } else { s0 };
                            (o + xi.powi(3) * (far - o), 3.0 * xi * xi * (s1 - s0))
                        }
                    };
                    let p = curve.point(s);
                    let mp = self.map.at(p)?;
                    let d = curve.derivative(s);
                    rule.points.push(p);
                    rule.weights.push(wi * jac * mp.stretch(d));
                    rule.normals.push(mp.normal(normal(s)));
                }
            }
        }
        Ok(())
    }

    fn graded_params(&self, curve: &Curve) -> Vec<(f64, f64, SingularEnd)> {
        let Some(sp) = self.singular else {
            return vec![(0.0, 1.0, SingularEnd::None)];
        };
        let near = |p: Point| dist(p, sp) <= 1e-12;
        let g = self.grading;
        let at_start = near(curve.point(0.0));
        if !(at_start || near(curve.point(1.0))) {
            return vec![(0.0, 1.0, SingularEnd::None)];
        }
        // breakpoints 0, 2^-g, ..., 1/2, 1 measured from the singular end
        let mut bps = vec![0.0];
        for k in (0..g).rev() {
            bps.push(0.5f64.powi(k as i32 + 1));
        }
        bps.push(1.0);
        bps.windows(2)
            .enumerate()
            .map(|(i, w)| {
                let tag = if i == 0 { SingularEnd::Start } else { SingularEnd::None };
                if at_start {
                    (w[0], w[1], tag)
                } else {
                    let tag = if i == 0 { SingularEnd::Finish } else { SingularEnd::None };
                    (1.0 - w[1], 1.0 - w[0], tag)
                }
            })
            .collect()
    }

    /// Physical length of a parametric curve.
    pub fn curve_length(&self, curve: &Curve) -> Result<f64> {
        if self.map.is_affine() {
            let d = curve.derivative(0.5);
            return Ok(self.map.at(curve.point(0.5))?.stretch(d) / d[0].hypot(d[1]).max(f64::MIN_POSITIVE) * curve.length());
        }
        let (x, w) = gauss_legendre(8);
        let mut l = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            l += wi * self.map.at(curve.point(*xi))?.stretch(curve.derivative(*xi));
        }
        Ok(l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SingularEnd {
    None,
    Start,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellStatus {
    Interior,
    Cut,
    Exterior,
}

/// Piece of the trimming curve. The unit normal pointing out of the domain
/// is the curve's left normal, negated when `flip` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimSegment {
    pub curve: Curve,
    pub flip: bool,
}

impl TrimSegment {
    pub fn normal(&self, s: f64) -> [f64; 2] {
        let n = self.curve.left_normal(s);
        if self.flip {
            [-n[0], -n[1]]
        } else {
            n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// The whole face lies on the domain boundary.
    Full,
    /// Only part of the face does.
    Cut,
}

/// Cell edge on the boundary of the square, with its part on the boundary
/// of the trimmed domain.
#[derive(Debug, Clone)]
pub struct BoundaryFace {
    pub side: Side,
    pub edge: Curve,
    pub kept: Vec<Curve>,
    pub kind: FaceKind,
    /// Physical length of the whole edge.
    pub h: f64,
    /// Physical length of the kept part.
    pub measure: f64,
}

#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub cell: CellId,
    pub rect: Rect,
    pub status: CellStatus,
    /// Decomposition of the clipped cell.
    pub pieces: Vec<Piece>,
    /// Parametric measure of the clipped cell.
    pub param_area: f64,
    /// Physical measure of the clipped cell.
    pub area: f64,
    /// Physical diameter.
    pub h: f64,
    pub gamma: Vec<TrimSegment>,
    pub faces: Vec<BoundaryFace>,
    /// Set when the exact decomposition gave up and sampling was used.
    pub flagged: bool,
}

/// Classification of all active cells, in the order of
/// [`HierarchicalSpace::active_cells`].
#[derive(Debug, Clone)]
pub struct Classification {
    pub cells: Vec<CellGeometry>,
}

impl Classification {
    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

pub fn classify(hs: &HierarchicalSpace, geom: &Geometry) -> Result<Classification> {
    let prims = geom.region.primitives();
    let cells = hs
        .active_cells()
        .par_iter()
        .map(|&c| classify_cell(geom, &prims, c, hs.cell_rect(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Classification { cells })
}

/// Classify a single rectangle of the parametric square.
pub fn classify_cell(
    geom: &Geometry,
    prims: &[Primitive],
    cell: CellId,
    rect: Rect,
) -> Result<CellGeometry> {
    let mut flagged = false;
    let top = geom.region.eval_with(&relations(prims, &rect));
    let mut pieces = Vec::new();
    decompose(geom, prims, &rect, 0, &mut pieces, &mut flagged);
    let param_area: f64 = pieces.iter().map(|p| p.area()).sum();

    let corners = rect.corners();
    let mut probes: Vec<Point> = corners.to_vec();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        probes.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mapped: Vec<Point> = probes.iter().map(|&p| geom.map.eval(p)).collect();
    let mut h: f64 = 0.0;
    for a in 0..mapped.len() {
        for b in a + 1..mapped.len() {
            h = h.max(dist(mapped[a], mapped[b]));
        }
    }

    if param_area <= DEGENERATE_RATIO * rect.area() {
        return Ok(CellGeometry {
            cell,
            rect,
            status: CellStatus::Exterior,
            pieces: Vec::new(),
            param_area: 0.0,
            area: 0.0,
            h,
            gamma: Vec::new(),
            faces: Vec::new(),
            flagged,
        });
    }

    // curves are clipped even when the region misses the open cell, since
    // trimming curves running along a cell edge are attached to the cell on
    // the domain side
    let clipped: Vec<Vec<Curve>> = prims.iter().map(|p| clip_boundary(p, &rect)).collect();
    let gamma = trimming_segments(geom, &clipped, &rect);
    let full = top == Relation::Outside
        || (pieces.len() == 1 && matches!(pieces[0], Piece::Rect(r) if r == rect));
    let status = if full || (param_area - rect.area()).abs() <= 1e-14 * rect.area() {
        CellStatus::Interior
    } else {
        CellStatus::Cut
    };

    let area = if geom.map.is_affine() {
        param_area * geom.map.abs_det(rect.center())
    } else {
        let mut a = 0.0;
        for piece in &pieces {
            for (p, w) in piece.rule(3, None, 0) {
                a += w * geom.map.abs_det(p);
            }
        }
        a
    };

    let mut faces = Vec::new();
    for side in Side::ALL {
        let Some(edge) = side.edge_of(&rect) else { continue };
        let params: Vec<f64> = clipped
            .iter()
            .flatten()
            .flat_map(|c| edge.intersections(c))
            .collect();
        let inward = side.inward();
        let full_len = edge.length();
        let tau = 1e-7 * full_len;
        let kept: Vec<Curve> = edge
            .split(&params)
            .into_iter()
            .filter(|piece| {
                let m = piece.point(0.5);
                let p = [m[0] + tau * inward[0], m[1] + tau * inward[1]];
                !geom.region.contains(p)
            })
            .collect();
        let kept_len: f64 = kept.iter().map(|c| c.length()).sum();
        if geom.is_dirichlet(side) && kept_len < full_len * (1.0 - 1e-12) {
            return Err(Error::UnsupportedConfiguration(format!(
                "Dirichlet side {side:?} meets the trimming region on cell {cell:?}"
            )));
        }
        if kept.is_empty() {
            continue;
        }
        let kind = if kept_len >= full_len * (1.0 - 1e-12) {
            FaceKind::Full
        } else {
            FaceKind::Cut
        };
        let mut measure = 0.0;
        for c in &kept {
            measure += geom.curve_length(c)?;
        }
        faces.push(BoundaryFace {
            side,
            edge,
            h: geom.curve_length(&edge)?,
            kept,
            kind,
            measure,
        });
    }

    Ok(CellGeometry {
        cell,
        rect,
        status,
        pieces,
        param_area,
        area,
        h,
        gamma,
        faces,
        flagged,
    })
}

fn relations(prims: &[Primitive], r: &Rect) -> Vec<Relation> {
    prims.iter().map(|p| p.relation(r)).collect()
}

fn decompose(
    geom: &Geometry,
    prims: &[Primitive],
    r: &Rect,
    depth: usize,
    out: &mut Vec<Piece>,
    flagged: &mut bool,
) {
    let rel = relations(prims, r);
    match geom.region.eval_with(&rel) {
        Relation::Inside => return,
        Relation::Outside => {
            out.push(Piece::Rect(*r));
            return;
        }
        Relation::Crossing => {}
    }
    let crossing: Vec<usize> = (0..rel.len()).filter(|&k| rel[k] == Relation::Crossing).collect();
    if crossing.len() == 1 {
        let k = crossing[0];
        let mut fixed = rel.clone();
        fixed[k] = Relation::Inside;
        let with = geom.region.eval_with(&fixed);
        fixed[k] = Relation::Outside;
        let without = geom.region.eval_with(&fixed);
        match (with, without) {
            (Relation::Inside, Relation::Outside) => out.extend(clip_pieces(r, &prims[k], false)),
            (Relation::Outside, Relation::Inside) => out.extend(clip_pieces(r, &prims[k], true)),
            (Relation::Outside, Relation::Outside) => out.push(Piece::Rect(*r)),
            _ => {}
        }
        return;
    }
    if depth < MAX_SPLIT_DEPTH {
        for q in r.quadrants() {
            decompose(geom, prims, &q, depth + 1, out, flagged);
        }
        return;
    }
    *flagged = true;
    let mut pts = Vec::new();
    for q in r.quadrants() {
        pieces::tensor_rule(&q, 4, &mut pts);
    }
    pts.retain(|(p, _)| !geom.region.contains(*p));
    if !pts.is_empty() {
        out.push(Piece::Sampled(pts));
    }
}

fn on_edge(c: &Curve, r: &Rect) -> Option<usize> {
    let pts = [c.point(0.0), c.point(0.5), c.point(1.0)];
    // edges in the order left, right, bottom, top
    let checks = [(0, r.min[0]), (0, r.max[0]), (1, r.min[1]), (1, r.max[1])];
    checks
        .iter()
        .position(|&(k, v)| pts.iter().all(|p| (p[k] - v).abs() <= EDGE_TOL))
}

fn trimming_segments(geom: &Geometry, clipped: &[Vec<Curve>], r: &Rect) -> Vec<TrimSegment> {
    let mut out = Vec::new();
    for (k, curves) in clipped.iter().enumerate() {
        for c in curves {
            let params: Vec<f64> = clipped
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, others)| others.iter().flat_map(|o| c.intersections(o)))
                .collect();
            for piece in c.split(&params) {
                let len = piece.length();
                if len <= 1e-14 {
                    continue;
                }
                let m = piece.point(0.5);
                let tau = 1e-6 * len.min(r.width()).min(r.height());
                let n = piece.left_normal(0.5);
                if let Some(e) = on_edge(&piece, r) {
                    let on_square = match e {
                        0 => r.min[0] == 0.0,
                        1 => r.max[0] == 1.0,
                        2 => r.min[1] == 0.0,
                        _ => r.max[1] == 1.0,
                    };
                    if on_square {
                        continue;
                    }
                    let inward = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]][e];
                    let inside = [m[0] + tau * inward[0], m[1] + tau * inward[1]];
                    let outside = [m[0] - tau * inward[0], m[1] - tau * inward[1]];
                    if !geom.region.contains(inside) && geom.region.contains(outside) {
                        let flip = n[0] * inward[0] + n[1] * inward[1] > 0.0;
                        out.push(TrimSegment { curve: piece, flip });
                    }
                    continue;
                }
                let plus = geom.region.contains([m[0] + tau * n[0], m[1] + tau * n[1]]);
                let minus = geom.region.contains([m[0] - tau * n[0], m[1] - tau * n[1]]);
                if plus != minus {
                    out.push(TrimSegment { curve: piece, flip: !plus });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::BasisMode;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn two_disks() -> Region {
        Region::union(vec![
            Region::Primitive(Primitive::disk([0.25, 0.25], 0.1)),
            Region::Primitive(Primitive::disk([0.75, 0.75], 0.1)),
        ])
    }

    fn uniform_space(n: usize) -> HierarchicalSpace {
        let b: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        HierarchicalSpace::new(2, &b, &b, BasisMode::Thb, 2).unwrap()
    }

    #[test]
    fn empty_region_gives_interior_cells() {
        let hs = uniform_space(4);
        let g = Geometry::new(GeoMap::Identity, Region::Empty);
        let cl = classify(&hs, &g).unwrap();
        assert_eq!(cl.count(CellStatus::Interior), 16);
        assert_abs_diff_eq!(cl.total_area(), 1.0, epsilon = 1e-15);
        let r = g.domain_rule(&cl.cells[5], 3).unwrap();
        assert_abs_diff_eq!(r.total(), 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn single_disk_area_and_cut_cells() {
        let hs = uniform_space(4);
        let g = Geometry::new(
            GeoMap::Identity,
            Region::Primitive(Primitive::disk([0.25, 0.25], 0.1)),
        );
        let cl = classify(&hs, &g).unwrap();
        assert_abs_diff_eq!(cl.total_area(), 1.0 - PI * 0.01, epsilon = 1e-14);
        assert_eq!(cl.count(CellStatus::Cut), 4);
        assert!(cl.cells.iter().all(|c| (c.status == CellStatus::Interior) == (c.param_area == c.rect.area())));
        // Monte-Carlo cross-check of the clipped area
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| !g.region.contains([rng.gen(), rng.gen()]))
            .count();
        assert!((hits as f64 / n as f64 - cl.total_area()).abs() < 5e-3);
    }

    #[test]
    fn two_disk_measure_and_circumference() {
        let mut hs = uniform_space(4);
        let g = Geometry::new(GeoMap::Identity, two_disks());
        for _ in 0..3 {
            let cl = classify(&hs, &g).unwrap();
            assert_abs_diff_eq!(cl.total_area(), 1.0 - 2.0 * PI * 0.01, epsilon = 1e-8);
            let mut perimeter = 0.0;
            for cg in &cl.cells {
                let r = g.gamma_rule(cg, 4).unwrap();
                perimeter += r.total();
                for (p, n) in r.points.iter().zip(&r.normals) {
                    assert_abs_diff_eq!(n[0].hypot(n[1]), 1.0, epsilon = 1e-12);
                    // into the disk: opposite to the radial direction
                    let c = if p[0] < 0.5 { [0.25, 0.25] } else { [0.75, 0.75] };
                    let rad = [(p[0] - c[0]) / 0.1, (p[1] - c[1]) / 0.1];
                    assert_abs_diff_eq!(n[0] * rad[0] + n[1] * rad[1], -1.0, epsilon = 1e-12);
                }
                let q = g.domain_rule(cg, 3).unwrap();
                assert_abs_diff_eq!(q.total(), cg.area, epsilon = 1e-13);
            }
            assert_abs_diff_eq!(perimeter, 2.0 * 2.0 * PI * 0.1, epsilon = 1e-10);
            let marked: Vec<CellId> = cl
                .cells
                .iter()
                .filter(|c| c.status == CellStatus::Cut)
                .map(|c| c.cell)
                .collect();
            hs.refine(&marked);
        }
    }

    #[test]
    fn monte_carlo_never_contradicts_status() {
        let hs = uniform_space(8);
        let g = Geometry::new(GeoMap::Identity, two_disks());
        let cl = classify(&hs, &g).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100_000 {
            let p: Point = [rng.gen(), rng.gen()];
            let c = hs.find_cell(p).unwrap();
            let cg = &cl.cells[hs.cell_position(c).unwrap()];
            match cg.status {
                CellStatus::Interior => assert!(!g.region.contains(p)),
                CellStatus::Exterior => assert!(g.region.contains(p)),
                CellStatus::Cut => {}
            }
        }
    }

    #[test]
    fn pentagon_tiny_triangle() {
        for eps in [1e-5, 1e-6, 1e-7] {
            let bx: Vec<f64> = (0..=4)
                .map(|k| if k == 0 || k == 4 { k as f64 / 4.0 } else { k as f64 / 4.0 + eps })
                .collect();
            let by: Vec<f64> = (0..=4)
                .map(|k| if k == 0 || k == 4 { k as f64 / 4.0 } else { k as f64 / 4.0 - eps })
                .collect();
            let hs = HierarchicalSpace::new(3, &bx, &by, BasisMode::Thb, 3).unwrap();
            let g = Geometry::new(
                GeoMap::Identity,
                Region::Primitive(Primitive::half_plane([0.0, 0.25], [1.0, -1.0])),
            );
            let cl = classify(&hs, &g).unwrap();
            let tiny: Vec<&CellGeometry> = cl
                .cells
                .iter()
                .filter(|c| c.status == CellStatus::Cut && c.area < 1e-6)
                .collect();
            assert_eq!(tiny.len(), 2);
            for c in tiny {
                assert!((c.area / (2.0 * eps * eps) - 1.0).abs() < 1e-6, "{} vs {}", c.area, 2.0 * eps * eps);
                let q = g.domain_rule(c, 4).unwrap();
                assert!((q.total() / c.area - 1.0).abs() < 1e-9);
            }
            // the region minus the triangle {y > x + 1/4} has area 1 - 0.75^2 / 2
            assert_abs_diff_eq!(cl.total_area(), 1.0 - 0.28125, epsilon = 1e-14);
        }
    }

    #[test]
    fn lshape_faces_and_singular_grading() {
        let eps = 1e-5;
        let bx: Vec<f64> = (0..=4).map(|k| if k == 0 || k == 4 { k as f64 / 4.0 } else { k as f64 / 4.0 - eps }).collect();
        let by: Vec<f64> = (0..=4).map(|k| if k == 0 || k == 4 { k as f64 / 4.0 } else { k as f64 / 4.0 + eps }).collect();
        let hs = HierarchicalSpace::new(2, &bx, &by, BasisMode::Thb, 2).unwrap();
        let g = Geometry::new(
            GeoMap::Identity,
            Region::Primitive(Primitive::Rect(Rect::new(0.5, 1.0, 0.0, 0.5))),
        )
        .with_dirichlet(&[Side::Top, Side::Left])
        .with_singular_point([0.5, 0.5], 4);
        let cl = classify(&hs, &g).unwrap();
        assert_abs_diff_eq!(cl.total_area(), 0.75, epsilon = 1e-14);
        let mut bottom = 0.0;
        let mut right = 0.0;
        let mut gamma = 0.0;
        let mut singular = 0.0;
        for cg in &cl.cells {
            for f in &cg.faces {
                match f.side {
                    Side::Bottom => bottom += f.measure,
                    Side::Right => right += f.measure,
                    _ => {}
                }
            }
            let gr = g.gamma_rule(cg, 3).unwrap();
            gamma += gr.total();
            let r = cg.rect;
            if r.contains([0.5, 0.5], 0.0) {
                for (x, w) in gr.points.iter().zip(&gr.weights) {
                    singular += w * (x[0] - 0.5).hypot(x[1] - 0.5).powf(-2.0 / 3.0);
                }
            }
            let q = g.domain_rule(cg, 3).unwrap();
            assert_abs_diff_eq!(q.total(), cg.area, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(bottom, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(right, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(gamma, 1.0, epsilon = 1e-14);
        // the corner cell holds two legs of length 1/4 - eps, each integrating
        // s^{-2/3} to 3 l^{1/3}
        assert_abs_diff_eq!(singular, 6.0 * (0.25f64 - eps).cbrt(), epsilon = 1e-11);
        // a Dirichlet side touching the region is rejected
        let bad = g.clone().with_dirichlet(&[Side::Bottom]);
        assert!(matches!(classify(&hs, &bad), Err(Error::UnsupportedConfiguration(_))));
    }

    #[test]
    fn mapped_measures() {
        let hs = uniform_space(4);
        let map = GeoMap::PolarAnnulus {
            center: [2.0, 0.0],
            r_inner: 1.0,
            r_outer: 3.0,
            angle_start: 7.0 * PI / 8.0,
            angle_end: 9.0 * PI / 8.0,
        };
        let g = Geometry::new(map, Region::Primitive(Primitive::Rect(Rect::new(0.5, 1.0, 0.0, 0.5))));
        let cl = classify(&hs, &g).unwrap();
        // annulus sector area (pi/4) (9 - 1) / 2 = pi, minus the quarter
        // removed by the trimming rectangle (angle pi/8, radii 1..2)
        let removed = 0.5 * (PI / 8.0) * (4.0 - 1.0);
        assert_abs_diff_eq!(cl.total_area(), PI - removed, epsilon = 1e-12);
        // trimming curve: radial segment of length 1 plus arc of radius 2
        let gamma: f64 = cl.cells.iter().map(|c| g.gamma_rule(c, 4).unwrap().total()).sum();
        assert_abs_diff_eq!(gamma, 1.0 + 2.0 * PI / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn disconnected_trimming_curve_in_one_cell() {
        // two small disks inside a single cell
        let hs = uniform_space(1);
        let g = Geometry::new(
            GeoMap::Identity,
            Region::union(vec![
                Region::Primitive(Primitive::disk([0.3, 0.3], 0.1)),
                Region::Primitive(Primitive::disk([0.7, 0.7], 0.1)),
            ]),
        );
        let cl = classify(&hs, &g).unwrap();
        assert_eq!(cl.cells[0].status, CellStatus::Cut);
        let r = g.gamma_rule(&cl.cells[0], 5).unwrap();
        assert_abs_diff_eq!(r.total(), 4.0 * PI * 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(cl.total_area(), 1.0 - 2.0 * PI * 0.01, epsilon = 1e-10);
        assert!(!cl.cells[0].flagged);
    }

    #[test]
    fn overlapping_disks_split_boundary() {
        let hs = uniform_space(2);
        let g = Geometry::new(
            GeoMap::Identity,
            Region::union(vec![
                Region::Primitive(Primitive::disk([0.4, 0.4], 0.2)),
                Region::Primitive(Primitive::disk([0.6, 0.4], 0.2)),
            ]),
        );
        let cl = classify(&hs, &g).unwrap();
        // lens-union perimeter: two arcs of angle 2pi - 2 acos(0.5)
        let each = 0.2 * (2.0 * PI - 2.0 * (0.5f64).acos());
        let gamma: f64 = cl.cells.iter().map(|c| g.gamma_rule(c, 6).unwrap().total()).sum();
        assert_abs_diff_eq!(gamma, 2.0 * each, epsilon = 1e-10);
        let overlap = 2.0 * 0.04 * (0.5f64).acos() - 0.5 * 0.2 * (4.0 * 0.04 - 0.04f64).sqrt();
        let union = 2.0 * PI * 0.04 - overlap;
        assert_abs_diff_eq!(cl.total_area(), 1.0 - union, epsilon = 1e-6);
    }
}
