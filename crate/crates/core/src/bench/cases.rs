//! Manufactured solutions and the benchmark setups.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::adapt::{run_loop, IterationState, LoopOutcome, LoopSettings, Mode};
use crate::assembly::Data;
use crate::error::{Error, Result};
use crate::geometry::{GeoMap, Geometry, Primitive, Region, Side};
use crate::hierarchy::{BasisMode, HierarchicalSpace};
use crate::rect::{Point, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    TwoDisks,
    Pentagon,
    LShape,
    LShapeMapped,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [
        CaseId::TwoDisks,
        CaseId::Pentagon,
        CaseId::LShape,
        CaseId::LShapeMapped,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CaseId::TwoDisks => "two-disks",
            CaseId::Pentagon => "pentagon",
            CaseId::LShape => "lshape",
            CaseId::LShapeMapped => "lshape-mapped",
        }
    }

    /// Mesh shifts studied for this case (zero: unshifted mesh).
    pub fn default_epsilons(&self) -> &'static [f64] {
        match self {
            CaseId::TwoDisks => &[0.0],
            _ => &[1e-5, 1e-6, 1e-7],
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown case `{s}`")))
    }
}

/// Exact solutions in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exact {
    /// `sin(3 pi x) + cos(5 pi y)`
    Trigonometric,
    /// `atan(15 (x - y + 1/4))`
    ArcTangent,
    /// `r^(2/3) sin(2 phi / 3)` around `corner`, with the angle taken in
    /// `[-pi/4, 7 pi/4)` so that the cut lies in the removed quadrant.
    Corner { corner: Point },
}

const ATAN_SLOPE: f64 = 15.0;
const CORNER_EXP: f64 = 2.0 / 3.0;

impl Exact {
    fn polar(corner: Point, x: Point) -> (f64, f64) {
        let (dx, dy) = (x[0] - corner[0], x[1] - corner[1]);
        let mut phi = dy.atan2(dx);
        if phi < -PI / 4.0 {
            phi += 2.0 * PI;
        }
        (dx.hypot(dy), phi)
    }

    pub fn value(&self, x: Point) -> f64 {
        match *self {
            Exact::Trigonometric => (3.0 * PI * x[0]).sin() + (5.0 * PI * x[1]).cos(),
            Exact::ArcTangent => (ATAN_SLOPE * (x[0] - x[1] + 0.25)).atan(),
            Exact::Corner { corner } => {
                let (r, phi) = Self::polar(corner, x);
                r.powf(CORNER_EXP) * (CORNER_EXP * phi).sin()
            }
        }
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        match *self {
            Exact::Trigonometric => [
                3.0 * PI * (3.0 * PI * x[0]).cos(),
                -5.0 * PI * (5.0 * PI * x[1]).sin(),
            ],
            Exact::ArcTangent => {
                let s = ATAN_SLOPE * (x[0] - x[1] + 0.25);
                let d = ATAN_SLOPE / (1.0 + s * s);
                [d, -d]
            }
            Exact::Corner { corner } => {
                let (r, phi) = Self::polar(corner, x);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let a = CORNER_EXP;
                let m = a * r.powf(a - 1.0);
                [m * ((a - 1.0) * phi).sin(), m * ((a - 1.0) * phi).cos()]
            }
        }
    }

    /// `-lap u`
    pub fn source(&self, x: Point) -> f64 {
        match *self {
            Exact::Trigonometric => {
                9.0 * PI * PI * (3.0 * PI * x[0]).sin() + 25.0 * PI * PI * (5.0 * PI * x[1]).cos()
            }
            Exact::ArcTangent => {
                let a = ATAN_SLOPE;
                let s = x[0] - x[1] + 0.25;
                let q = 1.0 + a * a * s * s;
                4.0 * a.powi(3) * s / (q * q)
            }
            Exact::Corner { .. } => 0.0,
        }
    }
}

impl Data for Exact {
    fn source(&self, x: Point) -> f64 {
        Exact::source(self, x)
    }

    fn neumann(&self, x: Point, n: [f64; 2]) -> f64 {
        let g = self.gradient(x);
        g[0] * n[0] + g[1] * n[1]
    }

    fn dirichlet(&self, x: Point) -> f64 {
        self.value(x)
    }
}

/// Fully resolved benchmark setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: CaseId,
    pub degree: usize,
    pub theta: f64,
    pub epsilon: f64,
    pub mode: Mode,
    pub mu: usize,
    pub basis: BasisMode,
    pub max_dof: usize,
    pub max_levels: usize,
    pub max_iterations: usize,
    /// Geometric quadrature refinements towards the singular corner.
    pub grading: usize,
}

pub const L_CORNER: Point = [0.5, 0.5];

impl Case {
    pub fn new(id: CaseId) -> Case {
        let (degree, theta, epsilon, max_levels) = match id {
            CaseId::TwoDisks => (2, 0.8, 0.0, usize::MAX),
            CaseId::Pentagon => (3, 0.9, 1e-5, usize::MAX),
            CaseId::LShape => (2, 0.9, 1e-5, 12),
            CaseId::LShapeMapped => (3, 0.9, 1e-5, 12),
        };
        Case {
            id,
            degree,
            theta,
            epsilon,
            mode: Mode::Adaptive,
            mu: degree,
            basis: BasisMode::Thb,
            max_dof: 10_000,
            max_levels,
            max_iterations: 60,
            grading: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(Error::InvalidInput(format!(
                "degree {} is below 2, the discrete space would not be C1",
                self.degree
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidInput(format!("theta {} outside (0, 1]", self.theta)));
        }
        if !(0.0..0.05).contains(&self.epsilon) {
            return Err(Error::InvalidInput(format!("epsilon {} outside [0, 0.05)", self.epsilon)));
        }
        if self.mu < 2 {
            return Err(Error::InvalidInput(format!("admissibility class {} below 2", self.mu)));
        }
        Ok(())
    }

    pub fn exact(&self) -> Exact {
        match self.id {
            CaseId::TwoDisks => Exact::Trigonometric,
            CaseId::Pentagon => Exact::ArcTangent,
            CaseId::LShape => Exact::Corner { corner: L_CORNER },
            CaseId::LShapeMapped => Exact::Corner { corner: [0.0, 0.0] },
        }
    }

    pub fn map(&self) -> GeoMap {
        match self.id {
            CaseId::LShapeMapped => GeoMap::PolarAnnulus {
                center: [2.0, 0.0],
                r_inner: 1.0,
                r_outer: 3.0,
                angle_start: 7.0 * PI / 8.0,
                angle_end: 9.0 * PI / 8.0,
            },
            _ => GeoMap::Identity,
        }
    }

    pub fn geometry(&self) -> Geometry {
        match self.id {
            CaseId::TwoDisks => Geometry::new(
                self.map(),
                Region::union(vec![
                    Region::Primitive(Primitive::disk([0.25, 0.25], 0.1)),
                    Region::Primitive(Primitive::disk([0.75, 0.75], 0.1)),
                ]),
            )
            .with_dirichlet(&[Side::Bottom]),
            CaseId::Pentagon => Geometry::new(
                self.map(),
                // trimmed: above the line through (0, 1/4) and (3/4, 1)
                Region::Primitive(Primitive::half_plane([0.0, 0.25], [1.0, -1.0])),
            )
            .with_dirichlet(&[Side::Bottom, Side::Right]),
            CaseId::LShape | CaseId::LShapeMapped => Geometry::new(
                self.map(),
                Region::Primitive(Primitive::Rect(Rect::new(0.5, 1.0, 0.0, 0.5))),
            )
            .with_dirichlet(&[Side::Top, Side::Left])
            .with_singular_point(L_CORNER, self.grading),
        }
    }

    /// Interior breakpoints of the initial 4x4 mesh, shifted by `epsilon`.
    pub fn breakpoints(&self) -> [Vec<f64>; 2] {
        let shifted = |sign: f64| -> Vec<f64> {
            (0..=4)
                .map(|k| {
                    if k == 0 || k == 4 {
                        k as f64 / 4.0
                    } else {
                        k as f64 / 4.0 + sign * self.epsilon
                    }
                })
                .collect()
        };
        match self.id {
            CaseId::TwoDisks => [shifted(0.0), shifted(0.0)],
            CaseId::Pentagon => [shifted(1.0), shifted(-1.0)],
            CaseId::LShape | CaseId::LShapeMapped => [shifted(-1.0), shifted(1.0)],
        }
    }

    pub fn initial_space(&self) -> Result<HierarchicalSpace> {
        self.validate()?;
        let [bx, by] = self.breakpoints();
        HierarchicalSpace::new(self.degree, &bx, &by, self.basis, self.mu)
    }

    pub fn settings(&self) -> LoopSettings {
        LoopSettings {
            mode: self.mode,
            theta: self.theta,
            max_dof: self.max_dof,
            max_levels: self.max_levels,
            max_iterations: self.max_iterations,
        }
    }

    /// Run the adaptive or uniform loop.
    pub fn run(&self, observer: &mut dyn FnMut(&IterationState) -> Result<()>) -> Result<LoopOutcome> {
        let hs = self.initial_space()?;
        let geom = self.geometry();
        let exact = self.exact();
        let grad = move |x: Point| exact.gradient(x);
        Ok(run_loop(hs, &geom, &exact, &grad, &self.settings(), observer))
    }

    /// Human-readable resolved settings.
    pub fn describe(&self) -> String {
        let eps: Vec<String> = self.id.default_epsilons().iter().map(|e| format!("{e:e}")).collect();
        let levels = if self.max_levels == usize::MAX {
            "unbounded".to_string()
        } else {
            self.max_levels.to_string()
        };
        format!(
            "id = {}\ndegree = {}\ntheta = {}\nepsilon = {:e}\nepsilon_defaults = [{}]\nmode = {}\nmu = {}\nbasis = {}\nmax_dof = {}\nmax_levels = {}\nmax_iterations = {}\ngrading = {}\n",
            self.id,
            self.degree,
            self.theta,
            self.epsilon,
            eps.join(", "),
            match self.mode {
                Mode::Adaptive => "adaptive",
                Mode::Uniform => "uniform",
            },
            self.mu,
            match self.basis {
                BasisMode::Hb => "hb",
                BasisMode::Thb => "thb",
            },
            self.max_dof,
            levels,
            self.max_iterations,
            self.grading,
        )
    }
}
