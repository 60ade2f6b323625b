/// A point of the plane, parametric or physical depending on context.
pub type Point = [f64; 2];

/// Closed axis-aligned rectangle `[min.0, max.0] x [min.1, max.1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        min: [0.0, 0.0],
        max: [1.0, 1.0],
    };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect {
            min: [x0, y0],
            max: [x1, y1],
        }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    /// Corners in counter-clockwise order starting at `min`.
    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            [self.max[0], self.min[1]],
            self.max,
            [self.min[0], self.max[1]],
        ]
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.min[0] - tol
            && p[0] <= self.max[0] + tol
            && p[1] >= self.min[1] - tol
            && p[1] <= self.max[1] + tol
    }

    /// Interiors overlap (open-set intersection is nonempty).
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min[0] < other.max[0]
            && other.min[0] < self.max[0]
            && self.min[1] < other.max[1]
            && other.min[1] < self.max[1]
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        self.contains(other.min, tol) && self.contains(other.max, tol)
    }

    /// The four children obtained by bisecting both directions.
    pub fn quadrants(&self) -> [Rect; 4] {
        let [cx, cy] = self.center();
        [
            Rect::new(self.min[0], cx, self.min[1], cy),
            Rect::new(cx, self.max[0], self.min[1], cy),
            Rect::new(self.min[0], cx, cy, self.max[1]),
            Rect::new(cx, self.max[0], cy, self.max[1]),
        ]
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
