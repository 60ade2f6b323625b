//! Dörfler marking, ghost cells and the solve-estimate-mark-refine loop.

use std::time::{Duration, Instant};

use rustc_hash::FxHashSet;

use crate::assembly::{energy_error, solve_problem, Data, Solution};
use crate::error::{Error, Result};
use crate::estimator::{estimate, Estimate};
use crate::geometry::{classify, CellStatus, Classification, Geometry};
use crate::hierarchy::{CellId, HierarchicalSpace};
use crate::rect::Point;

/// Greedy Dörfler marking: indices sorted by decreasing contribution (ties
/// by index) are taken until their sum reaches `theta^2` of the total.
pub fn doerfler(squares: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidInput(format!("marking parameter {theta} outside (0, 1]")));
    }
    let total: f64 = squares.iter().sum();
    if total <= 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..squares.len()).filter(|&k| squares[k] > 0.0).collect();
    order.sort_by(|&a, &b| squares[b].total_cmp(&squares[a]).then(a.cmp(&b)));
    let target = theta * theta * total;
    let mut acc = 0.0;
    let mut out = Vec::new();
    for k in order {
        if acc >= target {
            break;
        }
        acc += squares[k];
        out.push(k);
    }
    Ok(out)
}

/// Exterior cells of the same level as a marked cut cell on which some
/// active function nonzero on the cut cell is also nonzero.
pub fn ghost_cells(hs: &HierarchicalSpace, cl: &Classification, marked: &[CellId]) -> Vec<CellId> {
    let marked_set: FxHashSet<CellId> = marked.iter().copied().collect();
    let mut seen: FxHashSet<CellId> = FxHashSet::default();
    let mut out = Vec::new();
    for &k in marked {
        let Some(pos) = hs.cell_position(k) else { continue };
        if cl.cells[pos].status != CellStatus::Cut {
            continue;
        }
        let funcs = hs.extraction(k).functions;
        let space = hs.level_space(k.level);
        let [nx, ny] = space.n_cells();
        for &f in &funcs {
            let r = hs.support_rect(hs.functions()[f]);
            // level-k cells inside the support rectangle
            let bx = space.dirs[0].breakpoints();
            let by = space.dirs[1].breakpoints();
            let i0 = bx.partition_point(|&x| x < r.min[0] - 1e-14);
            let j0 = by.partition_point(|&y| y < r.min[1] - 1e-14);
            for j in j0..ny {
                if by[j] >= r.max[1] - 1e-14 {
                    break;
                }
                for i in i0..nx {
                    if bx[i] >= r.max[0] - 1e-14 {
                        break;
                    }
                    let c = CellId::new(k.level, i, j);
                    if marked_set.contains(&c) || seen.contains(&c) {
                        continue;
                    }
                    let Some(cp) = hs.cell_position(c) else { continue };
                    if cl.cells[cp].status != CellStatus::Exterior {
                        continue;
                    }
                    if hs.extraction(c).functions.binary_search(&f).is_ok() {
                        seen.insert(c);
                        out.push(c);
                    }
                }
            }
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Adaptive,
    Uniform,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Mode::Adaptive),
            "uniform" => Ok(Mode::Uniform),
            _ => Err(Error::InvalidInput(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoopSettings {
    pub mode: Mode,
    pub theta: f64,
    /// Stop once the number of dofs exceeds this.
    pub max_dof: usize,
    /// Stop once the number of levels exceeds this.
    pub max_levels: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub n_dof: usize,
    pub n_levels: usize,
    pub energy_error: f64,
    pub estimator: f64,
    pub effectivity: f64,
    pub n_marked: usize,
    pub wall_time: Duration,
}

/// State handed to the observer after each estimate.
pub struct IterationState<'a> {
    pub record: &'a IterationRecord,
    pub space: &'a HierarchicalSpace,
    pub classification: &'a Classification,
    pub solution: &'a Solution,
    pub estimate: &'a Estimate,
    /// Cells about to be refined (empty on the last iteration).
    pub marked: &'a [CellId],
}

/// Records of a run; `error` is set when a stage failed, in which case the
/// records collected up to then are kept.
#[derive(Debug)]
pub struct LoopOutcome {
    pub records: Vec<IterationRecord>,
    pub space: HierarchicalSpace,
    pub error: Option<Error>,
}

/// Number of levels carrying active cells.
pub fn active_levels(hs: &HierarchicalSpace) -> usize {
    hs.active_cells().iter().map(|c| c.level).max().map_or(0, |l| l + 1)
}

pub fn run_loop(
    mut hs: HierarchicalSpace,
    geom: &Geometry,
    data: &dyn Data,
    exact_gradient: &(dyn Fn(Point) -> [f64; 2] + Sync),
    settings: &LoopSettings,
    observer: &mut dyn FnMut(&IterationState) -> Result<()>,
) -> LoopOutcome {
    let mut records = Vec::new();
    for iter in 0..settings.max_iterations {
        let started = Instant::now();
        let step = (|| -> Result<bool> {
            let cl = classify(&hs, geom)?;
            let solution = solve_problem(&hs, &cl, geom, data)?;
            let est = estimate(&hs, &cl, geom, &solution.coeffs, data)?;
            let err = energy_error(&hs, &cl, geom, &solution.coeffs, exact_gradient)?;
            let estimator = est.total();
            let n_dof = solution.dofs.n_dofs();
            let n_levels = active_levels(&hs);
            let last = n_dof > settings.max_dof
                || n_levels > settings.max_levels
                || estimator == 0.0
                || iter + 1 == settings.max_iterations;
            let (marked, n_marked) = if last {
                (Vec::new(), 0)
            } else {
                match settings.mode {
                    Mode::Uniform => {
                        let all = hs.active_cells().to_vec();
                        let n = all.len();
                        (all, n)
                    }
                    Mode::Adaptive => {
                        let picked: Vec<CellId> = doerfler(&est.squares(), settings.theta)?
                            .into_iter()
                            .map(|k| est.cells[k].cell)
                            .collect();
                        let n = picked.len();
                        let mut all = picked.clone();
                        all.extend(ghost_cells(&hs, &cl, &picked));
                        (all, n)
                    }
                }
            };
            let record = IterationRecord {
                iter,
                n_dof,
                n_levels,
                energy_error: err,
                estimator,
                effectivity: if err > 0.0 { estimator / err } else { f64::NAN },
                n_marked,
                wall_time: started.elapsed(),
            };
            observer(&IterationState {
                record: &record,
                space: &hs,
                classification: &cl,
                solution: &solution,
                estimate: &est,
                marked: &marked,
            })?;
            records.push(record);
            if last || marked.is_empty() {
                return Ok(false);
            }
            hs.refine(&marked);
            Ok(true)
        })();
        match step {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                return LoopOutcome {
                    records,
                    space: hs,
                    error: Some(e),
                }
            }
        }
    }
    LoopOutcome {
        records,
        space: hs,
        error: None,
    }
}

/// Least-squares slope of `log y` against `log n_dof` over the last
/// `ceil(len / 2)` records (at least three).
pub fn fitted_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let take = points.len().div_ceil(2).max(3);
    let tail = &points[points.len() - take..];
    let xs: Vec<f64> = tail.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Mean effectivity over the last three records.
pub fn asymptotic_effectivity(records: &[IterationRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let tail = &records[records.len().saturating_sub(3)..];
    Some(tail.iter().map(|r| r.effectivity).sum::<f64>() / tail.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GeoMap, Primitive, Region, Side};
    use crate::hierarchy::BasisMode;
    use proptest::prelude::*;

    #[test]
    fn doerfler_examples() {
        assert_eq!(doerfler(&[9.0, 16.0], 0.6f64.sqrt()).unwrap(), vec![1]);
        assert_eq!(doerfler(&[1.0, 0.0, 2.0], 1.0).unwrap(), vec![2, 0]);
        assert!(doerfler(&[0.0, 0.0], 0.5).unwrap().is_empty());
        assert!(doerfler(&[1.0], 0.0).is_err());
        // ties broken by index
        assert_eq!(doerfler(&[1.0, 1.0, 1.0, 1.0], 0.5).unwrap(), vec![0]);
        for m in [5usize, 16, 37] {
            for theta in [0.3, 0.8, 0.9] {
                let marked = doerfler(&vec![1.0; m], theta).unwrap();
                let expected = (theta * theta * m as f64 - 1e-12).ceil() as usize;
                assert_eq!(marked.len(), expected);
            }
        }
    }

    proptest! {
        #[test]
        fn doerfler_fraction_holds(v in prop::collection::vec(0.0f64..10.0, 1..60), theta in 0.05f64..1.0) {
            let marked = doerfler(&v, theta).unwrap();
            let total: f64 = v.iter().sum();
            let got: f64 = marked.iter().map(|&k| v[k]).sum();
            prop_assert!(got >= theta * theta * total * (1.0 - 1e-12));
            // greedy prefix: dropping the last pick breaks the inequality
            if let Some((_, rest)) = marked.split_last() {
                let partial: f64 = rest.iter().map(|&k| v[k]).sum();
                prop_assert!(partial < theta * theta * total);
            }
        }
    }

    fn disk_setup() -> (HierarchicalSpace, Geometry) {
        let b: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let hs = HierarchicalSpace::new(2, &b, &b, BasisMode::Thb, 2).unwrap();
        let geom = Geometry::new(
            GeoMap::Identity,
            Region::Primitive(Primitive::disk([0.5, 0.5], 0.3)),
        )
        .with_dirichlet(&[Side::Bottom]);
        (hs, geom)
    }

    fn brute_force_ghosts(hs: &HierarchicalSpace, cl: &Classification, marked: &[CellId]) -> Vec<CellId> {
        let mut out = Vec::new();
        for (pos, &c) in hs.active_cells().iter().enumerate() {
            if cl.cells[pos].status != CellStatus::Exterior || marked.contains(&c) {
                continue;
            }
            let fc = hs.extraction(c).functions;
            let hit = marked.iter().any(|&k| {
                k.level == c.level
                    && cl.cells[hs.cell_position(k).unwrap()].status == CellStatus::Cut
                    && hs.extraction(k).functions.iter().any(|f| fc.contains(f))
            });
            if hit {
                out.push(c);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn ghosts_match_brute_force() {
        let (mut hs, geom) = disk_setup();
        let cl = classify(&hs, &geom).unwrap();
        let cut: Vec<CellId> = hs
            .active_cells()
            .iter()
            .zip(&cl.cells)
            .filter(|(_, g)| g.status == CellStatus::Cut)
            .map(|(c, _)| *c)
            .collect();
        let one = [cut[0]];
        let g = ghost_cells(&hs, &cl, &one);
        assert!(!g.is_empty());
        assert_eq!(g, brute_force_ghosts(&hs, &cl, &one));
        assert_eq!(ghost_cells(&hs, &cl, &cut), brute_force_ghosts(&hs, &cl, &cut));
        // interior cells do not trigger ghosts
        let interior: Vec<CellId> = hs
            .active_cells()
            .iter()
            .zip(&cl.cells)
            .filter(|(_, g)| g.status == CellStatus::Interior)
            .map(|(c, _)| *c)
            .collect();
        assert!(ghost_cells(&hs, &cl, &interior).is_empty());
        // after a refinement step
        hs.refine(&cut[..3]);
        let cl = classify(&hs, &geom).unwrap();
        let fine_cut: Vec<CellId> = hs
            .active_cells()
            .iter()
            .zip(&cl.cells)
            .filter(|(c, g)| g.status == CellStatus::Cut && c.level == 1)
            .map(|(c, _)| *c)
            .collect();
        assert_eq!(
            ghost_cells(&hs, &cl, &fine_cut),
            brute_force_ghosts(&hs, &cl, &fine_cut)
        );
    }

    struct Harmonic;
    impl Data for Harmonic {
        fn source(&self, _: Point) -> f64 {
            0.0
        }
        fn neumann(&self, x: Point, n: [f64; 2]) -> f64 {
            let g = harmonic_gradient(x);
            g[0] * n[0] + g[1] * n[1]
        }
        fn dirichlet(&self, x: Point) -> f64 {
            x[0].exp() * x[1].cos()
        }
    }

    fn harmonic_gradient(x: Point) -> [f64; 2] {
        [x[0].exp() * x[1].cos(), -x[0].exp() * x[1].sin()]
    }

    #[test]
    fn loop_stops_on_dof_budget() {
        let (hs, geom) = disk_setup();
        let settings = LoopSettings {
            mode: Mode::Adaptive,
            theta: 0.8,
            max_dof: 10,
            max_levels: 20,
            max_iterations: 10,
        };
        let out = run_loop(hs, &geom, &Harmonic, &harmonic_gradient, &settings, &mut |_| Ok(()));
        assert!(out.error.is_none());
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].n_marked, 0);
    }

    #[test]
    fn adaptive_loop_invariants() {
        let (hs, geom) = disk_setup();
        let settings = LoopSettings {
            mode: Mode::Adaptive,
            theta: 0.8,
            max_dof: 1500,
            max_levels: 20,
            max_iterations: 8,
        };
        let mut previous: Option<(Vec<CellId>, usize)> = None;
        let out = run_loop(hs, &geom, &Harmonic, &harmonic_gradient, &settings, &mut |st| {
            assert!(st.space.check_admissibility().admissible);
            if let Some((marked, n_dof)) = &previous {
                for c in marked {
                    assert!(!st.space.is_active(*c));
                }
                assert!(st.record.n_dof > *n_dof);
            }
            // the Dörfler step never picks exterior cells
            for c in &st.marked[..st.record.n_marked] {
                let pos = st.space.cell_position(*c).unwrap();
                assert_ne!(st.classification.cells[pos].status, CellStatus::Exterior);
            }
            assert!(st.record.effectivity >= 1.0);
            previous = Some((st.marked.to_vec(), st.record.n_dof));
            Ok(())
        });
        assert!(out.error.is_none());
        assert!(out.records.len() >= 3);
        let errs: Vec<f64> = out.records.iter().map(|r| r.energy_error).collect();
        assert!(errs.last().unwrap() < &errs[0]);
    }

    #[test]
    fn uniform_loop_quadruples() {
        let b: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let hs = HierarchicalSpace::new(2, &b, &b, BasisMode::Thb, 2).unwrap();
        let geom = Geometry::new(GeoMap::Identity, Region::Empty).with_dirichlet(&Side::ALL);
        let settings = LoopSettings {
            mode: Mode::Uniform,
            theta: 1.0,
            max_dof: 2000,
            max_levels: 20,
            max_iterations: 10,
        };
        let out = run_loop(hs, &geom, &Harmonic, &harmonic_gradient, &settings, &mut |_| Ok(()));
        let n: Vec<usize> = out.records.iter().map(|r| r.n_dof).collect();
        // (2^k 4 + 2)^2 functions
        assert_eq!(n, vec![36, 100, 324, 1156, 4356]);
        let pts: Vec<(f64, f64)> = out.records.iter().map(|r| (r.n_dof as f64, r.energy_error)).collect();
        let slope = fitted_slope(&pts).unwrap();
        assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn slope_and_effectivity_helpers() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|k| (10f64.powi(k), 10f64.powi(-k))).collect();
        assert!((fitted_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert!(fitted_slope(&pts[..2]).is_none());
        let rec = |e: f64| IterationRecord {
            iter: 0,
            n_dof: 1,
            n_levels: 1,
            energy_error: 1.0,
            estimator: e,
            effectivity: e,
            n_marked: 0,
            wall_time: Duration::ZERO,
        };
        let rs = vec![rec(10.0), rec(2.0), rec(3.0), rec(4.0)];
        assert_eq!(asymptotic_effectivity(&rs), Some(3.0));
    }
}
