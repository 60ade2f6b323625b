//! Boolean trimming regions built from disks, half-planes and rectangles.
//!
//! All primitives are open sets of the parametric plane. The trimmed domain
//! is the unit square minus the closure of the region.

use crate::rect::{Point, Rect};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Disk { center: Point, radius: f64 },
    /// Points `x` with `(x - point) . normal < 0`; `normal` points out of
    /// the half-plane.
    HalfPlane { point: Point, normal: [f64; 2] },
    Rect(Rect),
}

/// Position of a primitive relative to a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Inside,
    Outside,
    Crossing,
}

impl Primitive {
    pub fn disk(center: Point, radius: f64) -> Self {
        Primitive::Disk { center, radius }
    }

    pub fn half_plane(point: Point, normal: [f64; 2]) -> Self {
        let l = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
        Primitive::HalfPlane {
            point,
            normal: [normal[0] / l, normal[1] / l],
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Primitive::Disk { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy < radius * radius
            }
            Primitive::HalfPlane { point, normal } => {
                (p[0] - point[0]) * normal[0] + (p[1] - point[1]) * normal[1] < 0.0
            }
            Primitive::Rect(r) => {
                p[0] > r.min[0] && p[0] < r.max[0] && p[1] > r.min[1] && p[1] < r.max[1]
            }
        }
    }

    pub fn relation(&self, s: &Rect) -> Relation {
        match *self {
            Primitive::Disk { center, radius } => {
                let nx = center[0].clamp(s.min[0], s.max[0]);
                let ny = center[1].clamp(s.min[1], s.max[1]);
                let dmin = ((nx - center[0]).powi(2) + (ny - center[1]).powi(2)).sqrt();
                let fx = (center[0] - s.min[0]).abs().max((center[0] - s.max[0]).abs());
                let fy = (center[1] - s.min[1]).abs().max((center[1] - s.max[1]).abs());
                let dmax = (fx * fx + fy * fy).sqrt();
                if dmax <= radius + TOL {
                    Relation::Inside
                } else if dmin >= radius - TOL {
                    Relation::Outside
                } else {
                    Relation::Crossing
                }
            }
            Primitive::HalfPlane { point, normal } => {
                let vals = s
                    .corners()
                    .map(|c| (c[0] - point[0]) * normal[0] + (c[1] - point[1]) * normal[1]);
                let hi = vals.iter().copied().fold(f64::MIN, f64::max);
                let lo = vals.iter().copied().fold(f64::MAX, f64::min);
                if hi <= TOL {
                    Relation::Inside
                } else if lo >= -TOL {
                    Relation::Outside
                } else {
                    Relation::Crossing
                }
            }
            Primitive::Rect(r) => {
                let ox = s.max[0].min(r.max[0]) - s.min[0].max(r.min[0]);
                let oy = s.max[1].min(r.max[1]) - s.min[1].max(r.min[1]);
                if ox <= TOL || oy <= TOL {
                    Relation::Outside
                } else if r.contains_rect(s, TOL) {
                    Relation::Inside
                } else {
                    Relation::Crossing
                }
            }
        }
    }
}

/// Boolean expression over primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Empty,
    Primitive(Primitive),
    Union(Vec<Region>),
    Intersection(Vec<Region>),
    Difference(Box<Region>, Box<Region>),
}

impl Region {
    pub fn union(parts: Vec<Region>) -> Self {
        Region::Union(parts)
    }

    pub fn intersection(parts: Vec<Region>) -> Self {
        Region::Intersection(parts)
    }

    pub fn difference(a: Region, b: Region) -> Self {
        Region::Difference(Box::new(a), Box::new(b))
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            Region::Empty => false,
            Region::Primitive(q) => q.contains(p),
            Region::Union(v) => v.iter().any(|r| r.contains(p)),
            Region::Intersection(v) => v.iter().all(|r| r.contains(p)),
            Region::Difference(a, b) => a.contains(p) && !b.contains(p),
        }
    }

    /// Primitives in depth-first order; their position is the index used by
    /// [`eval_with`](Self::eval_with).
    pub fn primitives(&self) -> Vec<Primitive> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<Primitive>) {
        match self {
            Region::Empty => {}
            Region::Primitive(q) => out.push(*q),
            Region::Union(v) | Region::Intersection(v) => v.iter().for_each(|r| r.collect(out)),
            Region::Difference(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    /// Three-valued evaluation from per-primitive relations.
    pub fn eval_with(&self, rel: &[Relation]) -> Relation {
        let mut k = 0;
        self.eval_rec(rel, &mut k)
    }

    fn eval_rec(&self, rel: &[Relation], k: &mut usize) -> Relation {
        use Relation::*;
        match self {
            Region::Empty => Outside,
            Region::Primitive(_) => {
                let r = rel[*k];
                *k += 1;
                r
            }
            Region::Union(v) => {
                let rs: Vec<Relation> = v.iter().map(|r| r.eval_rec(rel, k)).collect();
                if rs.contains(&Inside) {
                    Inside
                } else if rs.iter().all(|r| *r == Outside) {
                    Outside
                } else {
                    Crossing
                }
            }
            Region::Intersection(v) => {
                let rs: Vec<Relation> = v.iter().map(|r| r.eval_rec(rel, k)).collect();
                if rs.contains(&Outside) {
                    Outside
                } else if rs.iter().all(|r| *r == Inside) {
                    Inside
                } else {
                    Crossing
                }
            }
            Region::Difference(a, b) => {
                let ra = a.eval_rec(rel, k);
                let rb = b.eval_rec(rel, k);
                match (ra, rb) {
                    (Outside, _) | (_, Inside) => Outside,
                    (Inside, Outside) => Inside,
                    _ => Crossing,
                }
            }
        }
    }
}
