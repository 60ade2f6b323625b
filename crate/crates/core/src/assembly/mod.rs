//! Galerkin assembly of the Poisson problem on the trimmed space, strong
//! Dirichlet conditions and the linear solve.

mod solver;

use rayon::prelude::*;
use sprs::{CsMat, TriMat};

pub use solver::{conjugate_gradient, CgReport};

use crate::error::{Error, Result};
use crate::geometry::{CellStatus, Classification, GeoMap, Geometry, MapPoint};
use crate::hierarchy::{CellExtraction, HierarchicalSpace};
use crate::rect::Point;

/// Relative residual required from the linear solver.
pub const SOLVER_TOL: f64 = 1e-10;

/// Problem data, evaluated at physical points.
pub trait Data: Sync {
    /// Right-hand side `f`.
    fn source(&self, x: Point) -> f64;
    /// Neumann datum on a boundary point with outward unit normal `n`.
    fn neumann(&self, x: Point, n: [f64; 2]) -> f64;
    fn dirichlet(&self, x: Point) -> f64;
}

/// Physical values and derivatives of the functions of a cell extraction.
#[derive(Debug, Clone)]
pub struct PhysicalBasis {
    pub map: MapPoint,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    /// Empty unless second derivatives were requested.
    pub laplacians: Vec<f64>,
}

/// Evaluate the functions of `ext` at the parametric point `x`.
pub fn physical_basis(
    hs: &HierarchicalSpace,
    map: &GeoMap,
    ext: &CellExtraction,
    x: Point,
    second: bool,
) -> Result<PhysicalBasis> {
    let mp = map.at(x)?;
    let local = hs.local_basis(ext.cell, x, if second { 2 } else { 1 });
    let ev = ext.apply(&local);
    let gradients = ev.gradients.iter().map(|g| mp.gradient(*g)).collect();
    let laplacians = if second {
        ev.gradients
            .iter()
            .zip(&ev.hessians)
            .map(|(g, h)| mp.laplacian(*g, *h))
            .collect()
    } else {
        Vec::new()
    };
    Ok(PhysicalBasis {
        map: mp,
        values: ev.values,
        gradients,
        laplacians,
    })
}

/// Numbering of the active functions whose support meets the trimmed domain.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Dof of each active function, `None` for functions vanishing on the
    /// domain.
    pub dof_of: Vec<Option<usize>>,
    /// Active function of each dof.
    pub functions: Vec<usize>,
    /// Dofs whose trace on a Dirichlet side is nonzero.
    pub dirichlet: Vec<bool>,
}

impl DofMap {
    pub fn build(hs: &HierarchicalSpace, cl: &Classification, geom: &Geometry) -> Result<DofMap> {
        let mut used = vec![false; hs.n_functions()];
        let mut on_dirichlet = vec![false; hs.n_functions()];
        let order = hs.degree() + 1;
        for cg in cl.cells.iter().filter(|c| c.status != CellStatus::Exterior) {
            let ext = hs.extraction(cg.cell);
            for &f in &ext.functions {
                used[f] = true;
            }
            for face in cg.faces.iter().filter(|f| geom.is_dirichlet(f.side)) {
                let rule = geom.face_rule(face, order)?;
                for x in &rule.points {
                    let ev = ext.apply(&hs.local_basis(cg.cell, *x, 0));
                    for (&f, v) in ext.functions.iter().zip(&ev.values) {
                        if v.abs() > 1e-12 {
                            on_dirichlet[f] = true;
                        }
                    }
                }
            }
        }
        let mut dof_of = vec![None; hs.n_functions()];
        let mut functions = Vec::new();
        let mut dirichlet = Vec::new();
        for f in 0..hs.n_functions() {
            if used[f] {
                dof_of[f] = Some(functions.len());
                functions.push(f);
                dirichlet.push(on_dirichlet[f]);
            }
        }
        Ok(DofMap {
            dof_of,
            functions,
            dirichlet,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.functions.len()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.dirichlet.iter().filter(|d| **d).count()
    }

    pub fn n_free(&self) -> usize {
        self.n_dofs() - self.n_dirichlet()
    }

    /// Expand dof values to coefficients of all active functions.
    pub fn expand(&self, dofs: &[f64], n_functions: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_functions];
        for (d, &f) in self.functions.iter().enumerate() {
            out[f] = dofs[d];
        }
        out
    }
}

/// Stiffness matrix and load vector over all dofs, Dirichlet rows included.
#[derive(Debug, Clone)]
pub struct System {
    pub matrix: CsMat<f64>,
    pub rhs: Vec<f64>,
}

struct CellContribution {
    dofs: Vec<usize>,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

fn cell_contribution(
    hs: &HierarchicalSpace,
    cl: &Classification,
    index: usize,
    geom: &Geometry,
    dofs: &DofMap,
    data: &dyn Data,
) -> Result<Option<CellContribution>> {
    let cg = &cl.cells[index];
    if cg.status == CellStatus::Exterior {
        return Ok(None);
    }
    let order = hs.degree() + 1;
    let ext = hs.extraction(cg.cell);
    let n = ext.functions.len();
    let mut matrix = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    let rule = geom.domain_rule(cg, order)?;
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        let b = physical_basis(hs, &geom.map, &ext, *x, false)?;
        let f = data.source(b.map.x);
        for a in 0..n {
            let ga = b.gradients[a];
            rhs[a] += w * f * b.values[a];
            for c in a..n {
                let gc = b.gradients[c];
                matrix[a * n + c] += w * (ga[0] * gc[0] + ga[1] * gc[1]);
            }
        }
    }
    for a in 0..n {
        for c in 0..a {
            matrix[a * n + c] = matrix[c * n + a];
        }
    }
    let mut boundary = geom.gamma_rule(cg, order)?;
    for face in cg.faces.iter().filter(|f| !geom.is_dirichlet(f.side)) {
        boundary.extend(geom.face_rule(face, order)?);
    }
    for k in 0..boundary.len() {
        let x = boundary.points[k];
        let mp = geom.map.at(x)?;
        let g = data.neumann(mp.x, boundary.normals[k]);
        let ev = ext.apply(&hs.local_basis(cg.cell, x, 0));
        for a in 0..n {
            rhs[a] += boundary.weights[k] * g * ev.values[a];
        }
    }
    let dof_ids = ext
        .functions
        .iter()
        .map(|&f| {
            dofs.dof_of[f].ok_or_else(|| {
                Error::Inconsistent(format!("function {f} on cell {:?} has no dof", cg.cell))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(CellContribution {
        dofs: dof_ids,
        matrix,
        rhs,
    }))
}

/// Assemble stiffness and load, cell by cell in parallel, merged in cell
/// order so that the result is reproducible.
pub fn assemble(
    hs: &HierarchicalSpace,
    cl: &Classification,
    geom: &Geometry,
    dofs: &DofMap,
    data: &dyn Data,
) -> Result<System> {
    let parts = (0..cl.cells.len())
        .into_par_iter()
        .map(|k| cell_contribution(hs, cl, k, geom, dofs, data))
        .collect::<Result<Vec<_>>>()?;
    let n = dofs.n_dofs();
    let mut tri = TriMat::new((n, n));
    let mut rhs = vec![0.0; n];
    for part in parts.into_iter().flatten() {
        let m = part.dofs.len();
        for a in 0..m {
            rhs[part.dofs[a]] += part.rhs[a];
            for c in 0..m {
                let v = part.matrix[a * m + c];
                if v != 0.0 {
                    tri.add_triplet(part.dofs[a], part.dofs[c], v);
                }
            }
        }
    }
    Ok(System {
        matrix: tri.to_csr(),
        rhs,
    })
}

/// Least-squares fit of the Dirichlet datum against the traces of the
/// Dirichlet dofs. Returns a vector over all dofs, zero on free dofs.
pub fn dirichlet_lift(
    hs: &HierarchicalSpace,
    cl: &Classification,
    geom: &Geometry,
    dofs: &DofMap,
    data: &dyn Data,
) -> Result<Vec<f64>> {
    let mut lift = vec![0.0; dofs.n_dofs()];
    let bdofs: Vec<usize> = (0..dofs.n_dofs()).filter(|&d| dofs.dirichlet[d]).collect();
    if bdofs.is_empty() {
        return Ok(lift);
    }
    let mut local_of = vec![usize::MAX; dofs.n_dofs()];
    for (k, &d) in bdofs.iter().enumerate() {
        local_of[d] = k;
    }
    let nb = bdofs.len();
    let order = hs.degree() + 3;
    let mut tri = TriMat::new((nb, nb));
    let mut rhs = vec![0.0; nb];
    for cg in cl.cells.iter().filter(|c| c.status != CellStatus::Exterior) {
        let faces: Vec<_> = cg.faces.iter().filter(|f| geom.is_dirichlet(f.side)).collect();
        if faces.is_empty() {
            continue;
        }
        let ext = hs.extraction(cg.cell);
        for face in faces {
            let rule = geom.face_rule(face, order)?;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let ev = ext.apply(&hs.local_basis(cg.cell, *x, 0));
                let g = data.dirichlet(geom.map.eval(*x));
                let ids: Vec<(usize, f64)> = ext
                    .functions
                    .iter()
                    .zip(&ev.values)
                    .filter_map(|(&f, &v)| {
                        let d = dofs.dof_of[f]?;
                        (local_of[d] != usize::MAX).then_some((local_of[d], v))
                    })
                    .collect();
                for &(a, va) in &ids {
                    rhs[a] += w * g * va;
                    for &(c, vc) in &ids {
                        tri.add_triplet(a, c, w * va * vc);
                    }
                }
            }
        }
    }
    let (fit, _) = conjugate_gradient(&tri.to_csr(), &rhs, 1e-14, 20 * nb + 100, None)?;
    for (k, &d) in bdofs.iter().enumerate() {
        lift[d] = fit[k];
    }
    Ok(lift)
}

/// Solve with the Dirichlet dofs fixed to `lift`. Returns the values of all
/// dofs.
pub fn solve(system: &System, dofs: &DofMap, lift: &[f64]) -> Result<(Vec<f64>, CgReport)> {
    solve_with_tolerance(system, dofs, lift, SOLVER_TOL)
}

pub fn solve_with_tolerance(
    system: &System,
    dofs: &DofMap,
    lift: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, CgReport)> {
    let n = dofs.n_dofs();
    let mut free_of = vec![usize::MAX; n];
    let mut free = Vec::new();
    for d in 0..n {
        if !dofs.dirichlet[d] {
            free_of[d] = free.len();
            free.push(d);
        }
    }
    let nf = free.len();
    let mut tri = TriMat::new((nf, nf));
    let mut load: Vec<f64> = free.iter().map(|&d| system.rhs[d]).collect();
    let mut coupling = vec![0.0; nf];
    for (i, row) in system.matrix.outer_iterator().enumerate() {
        let fi = free_of[i];
        if fi == usize::MAX {
            continue;
        }
        for (j, &v) in row.iter() {
            if free_of[j] == usize::MAX {
                coupling[fi] += v * lift[j];
            } else {
                tri.add_triplet(fi, free_of[j], v);
            }
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let reference_raw = norm(&load) + norm(&coupling);
    for k in 0..nf {
        load[k] -= coupling[k];
    }
    let mut values = lift.to_vec();
    if nf == 0 {
        return Ok((values, CgReport::default()));
    }
    let matrix: CsMat<f64> = tri.to_csr();
    // the reference norm is measured in the scaled system, like the residual
    let scaled_reference = {
        let mut load_s = 0.0;
        let mut coupling_s = 0.0;
        for (k, row) in matrix.outer_iterator().enumerate() {
            let d = row.get(k).copied().unwrap_or(1.0).sqrt();
            load_s += (system.rhs[free[k]] / d).powi(2);
            coupling_s += (coupling[k] / d).powi(2);
        }
        load_s.sqrt() + coupling_s.sqrt()
    };
    let reference = if reference_raw > 0.0 { Some(scaled_reference) } else { None };
    let max_iter = 20 * nf + 1000;
    let (x, report) = conjugate_gradient(&matrix, &load, tol, max_iter, reference)?;
    for (k, &d) in free.iter().enumerate() {
        values[d] = x[k];
    }
    Ok((values, report))
}

/// Discrete solution on a hierarchical space.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Coefficients of all active functions (zero outside the domain).
    pub coeffs: Vec<f64>,
    pub dofs: DofMap,
    pub report: CgReport,
}

/// Assemble, impose the Dirichlet datum and solve.
pub fn solve_problem(
    hs: &HierarchicalSpace,
    cl: &Classification,
    geom: &Geometry,
    data: &dyn Data,
) -> Result<Solution> {
    let dofs = DofMap::build(hs, cl, geom)?;
    let system = assemble(hs, cl, geom, &dofs, data)?;
    let lift = dirichlet_lift(hs, cl, geom, &dofs, data)?;
    let (values, report) = solve(&system, &dofs, &lift)?;
    Ok(Solution {
        coeffs: dofs.expand(&values, hs.n_functions()),
        dofs,
        report,
    })
}

/// Value and physical derivatives of a discrete function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub gradient: [f64; 2],
    /// Zero unless second derivatives were requested.
    pub laplacian: f64,
}

/// Evaluate `sum_B coeffs[B] B` at the parametric point `x`.
pub fn eval_solution(
    hs: &HierarchicalSpace,
    map: &GeoMap,
    coeffs: &[f64],
    x: Point,
    max_deriv: usize,
) -> Result<PointValue> {
    let cell = hs.find_cell(x)?;
    eval_in_cell(hs, map, &hs.extraction(cell), coeffs, x, max_deriv >= 2)
}

pub(crate) fn eval_in_cell(
    hs: &HierarchicalSpace,
    map: &GeoMap,
    ext: &CellExtraction,
    coeffs: &[f64],
    x: Point,
    second: bool,
) -> Result<PointValue> {
    let b = physical_basis(hs, map, ext, x, second)?;
    let mut out = PointValue {
        value: 0.0,
        gradient: [0.0; 2],
        laplacian: 0.0,
    };
    for (k, &f) in ext.functions.iter().enumerate() {
        let c = coeffs[f];
        out.value += c * b.values[k];
        out.gradient[0] += c * b.gradients[k][0];
        out.gradient[1] += c * b.gradients[k][1];
        if second {
            out.laplacian += c * b.laplacians[k];
        }
    }
    Ok(out)
}

/// `|grad(u - u_h)|_{0, Omega}` for an exact gradient given at physical
/// points.
pub fn energy_error(
    hs: &HierarchicalSpace,
    cl: &Classification,
    geom: &Geometry,
    coeffs: &[f64],
    exact_gradient: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> Result<f64> {
    let order = hs.degree() + 3;
    let parts = cl
        .cells
        .par_iter()
        .filter(|c| c.status != CellStatus::Exterior)
        .map(|cg| {
            let ext = hs.extraction(cg.cell);
            let rule = geom.domain_rule(cg, order)?;
            let mut e = 0.0;
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let v = eval_in_cell(hs, &geom.map, &ext, coeffs, *x, false)?;
                let g = exact_gradient(geom.map.eval(*x));
                e += w * ((v.gradient[0] - g[0]).powi(2) + (v.gradient[1] - g[1]).powi(2));
            }
            Ok(e)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify, Primitive, Region, Side};
    use crate::hierarchy::{BasisMode, CellId};
    use crate::rect::Rect;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    struct Linear;

    impl Data for Linear {
        fn source(&self, _: Point) -> f64 {
            0.0
        }
        fn neumann(&self, _: Point, n: [f64; 2]) -> f64 {
            n[0] + n[1]
        }
        fn dirichlet(&self, x: Point) -> f64 {
            x[0] + x[1]
        }
    }

    struct Constant(f64);

    impl Data for Constant {
        fn source(&self, _: Point) -> f64 {
            0.0
        }
        fn neumann(&self, _: Point, _: [f64; 2]) -> f64 {
            0.0
        }
        fn dirichlet(&self, _: Point) -> f64 {
            self.0
        }
    }

    fn space(p: usize, n: usize) -> HierarchicalSpace {
        let b: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        HierarchicalSpace::new(p, &b, &b, BasisMode::Thb, p).unwrap()
    }

    fn two_disks() -> Region {
        Region::union(vec![
            Region::Primitive(Primitive::disk([0.25, 0.25], 0.1)),
            Region::Primitive(Primitive::disk([0.75, 0.75], 0.1)),
        ])
    }

    #[test]
    fn constant_dirichlet_gives_constant_solution() {
        let mut hs = space(2, 4);
        hs.refine(&[CellId::new(0, 1, 1)]);
        let geom = Geometry::new(GeoMap::Identity, two_disks()).with_dirichlet(&[Side::Bottom]);
        let cl = classify(&hs, &geom).unwrap();
        let dofs = DofMap::build(&hs, &cl, &geom).unwrap();
        let system = assemble(&hs, &cl, &geom, &dofs, &Constant(3.0)).unwrap();
        let lift = dirichlet_lift(&hs, &cl, &geom, &dofs, &Constant(3.0)).unwrap();
        let (u, report) = solve_with_tolerance(&system, &dofs, &lift, 1e-14).unwrap();
        assert!(report.residual < 1e-14);
        // homogeneous data: the initial residual check already succeeds
        let zero = Constant(0.0);
        let system0 = assemble(&hs, &cl, &geom, &dofs, &zero).unwrap();
        let lift0 = dirichlet_lift(&hs, &cl, &geom, &dofs, &zero).unwrap();
        let (u0, report0) = solve(&system0, &dofs, &lift0).unwrap();
        assert_eq!(report0.iterations, 0);
        assert!(u0.iter().all(|v| *v == 0.0));
        for (d, v) in u.iter().enumerate() {
            if dofs.dirichlet[d] {
                assert_abs_diff_eq!(*v, 3.0, epsilon = 1e-12);
            }
        }
        // algebraic residual on the free rows
        let mut r = system.rhs.clone();
        for (i, row) in system.matrix.outer_iterator().enumerate() {
            for (j, v) in row.iter() {
                r[i] -= v * u[j];
            }
        }
        for d in (0..dofs.n_dofs()).filter(|&d| !dofs.dirichlet[d]) {
            assert!(r[d].abs() < 1e-12);
        }
        let coeffs = dofs.expand(&u, hs.n_functions());
        let v = eval_solution(&hs, &geom.map, &coeffs, [0.6, 0.3], 2).unwrap();
        assert_abs_diff_eq!(v.value, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn patch_test_on_trimmed_mapped_domains() {
        let maps = [
            GeoMap::Identity,
            GeoMap::Scaled {
                origin: [1.0, -2.0],
                scale: 0.5,
            },
        ];
        for map in maps {
            for p in [2, 3] {
                let mut hs = space(p, 4);
                hs.refine(&[CellId::new(0, 0, 0), CellId::new(0, 3, 3)]);
                let geom = Geometry::new(map, two_disks()).with_dirichlet(&[Side::Bottom, Side::Left]);
                let cl = classify(&hs, &geom).unwrap();
                let sol = solve_problem(&hs, &cl, &geom, &Linear).unwrap();
                assert!(sol.report.residual < SOLVER_TOL);
                let err = energy_error(&hs, &cl, &geom, &sol.coeffs, &|_| [1.0, 1.0]).unwrap();
                assert!(err < 1e-10, "p = {p}: energy error {err:e}");
                let v = eval_solution(&hs, &geom.map, &sol.coeffs, [0.55, 0.45], 1).unwrap();
                assert_abs_diff_eq!(v.gradient[0], 1.0, epsilon = 1e-10);
                assert_abs_diff_eq!(v.gradient[1], 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn dof_count_matches_support_intersection() {
        let hs = space(2, 4);
        let geom = Geometry::new(GeoMap::Identity, two_disks()).with_dirichlet(&[Side::Bottom]);
        let cl = classify(&hs, &geom).unwrap();
        let dofs = DofMap::build(&hs, &cl, &geom).unwrap();
        // the disks leave every cell partly inside the domain, so all 36
        // functions are kept; the bottom row of 6 is constrained
        assert_eq!(dofs.n_dofs(), 36);
        assert_eq!(dofs.n_dirichlet(), 6);
        // with a region swallowing whole cells, brute force over supports
        let big = Geometry::new(
            GeoMap::Identity,
            Region::Primitive(Primitive::Rect(Rect::new(0.5, 1.0, 0.5, 1.0))),
        );
        let cl = classify(&hs, &big).unwrap();
        let dofs = DofMap::build(&hs, &cl, &big).unwrap();
        let expected = hs
            .functions()
            .iter()
            .filter(|f| {
                let r = hs.support_rect(**f);
                !(r.min[0] >= 0.5 && r.min[1] >= 0.5)
            })
            .count();
        assert_eq!(dofs.n_dofs(), expected);
        assert_eq!(expected, 36 - 4);
    }

    #[test]
    fn trace_fit_reproduces_spline_traces() {
        let mut hs = space(3, 4);
        hs.refine(&[CellId::new(0, 1, 0)]);
        let geom = Geometry::new(GeoMap::Identity, Region::Empty).with_dirichlet(&[Side::Bottom]);
        let cl = classify(&hs, &geom).unwrap();
        let dofs = DofMap::build(&hs, &cl, &geom).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let target: Vec<f64> = (0..hs.n_functions()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        struct Trace<'a>(&'a HierarchicalSpace, &'a [f64]);
        impl Data for Trace<'_> {
            fn source(&self, _: Point) -> f64 {
                0.0
            }
            fn neumann(&self, _: Point, _: [f64; 2]) -> f64 {
                0.0
            }
            fn dirichlet(&self, x: Point) -> f64 {
                eval_solution(self.0, &GeoMap::Identity, self.1, x, 0).unwrap().value
            }
        }
        let lift = dirichlet_lift(&hs, &cl, &geom, &dofs, &Trace(&hs, &target)).unwrap();
        for d in (0..dofs.n_dofs()).filter(|&d| dofs.dirichlet[d]) {
            assert_abs_diff_eq!(lift[d], target[dofs.functions[d]], epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_fit_converges_at_optimal_rate() {
        struct Sine;
        impl Data for Sine {
            fn source(&self, _: Point) -> f64 {
                0.0
            }
            fn neumann(&self, _: Point, _: [f64; 2]) -> f64 {
                0.0
            }
            fn dirichlet(&self, x: Point) -> f64 {
                (3.0 * std::f64::consts::PI * x[0]).sin()
            }
        }
        let mut errors = Vec::new();
        for n in [4, 8, 16, 32] {
            let hs = space(2, n);
            let geom = Geometry::new(GeoMap::Identity, Region::Empty).with_dirichlet(&[Side::Bottom]);
            let cl = classify(&hs, &geom).unwrap();
            let dofs = DofMap::build(&hs, &cl, &geom).unwrap();
            let lift = dirichlet_lift(&hs, &cl, &geom, &dofs, &Sine).unwrap();
            let coeffs = dofs.expand(&lift, hs.n_functions());
            let (x, w) = crate::geometry::gauss_legendre(12);
            let mut e = 0.0;
            for k in 0..n {
                for (xi, wi) in x.iter().zip(&w) {
                    let s = (k as f64 + xi) / n as f64;
                    let v = eval_solution(&hs, &GeoMap::Identity, &coeffs, [s, 0.0], 0).unwrap().value;
                    e += wi / n as f64 * (v - Sine.dirichlet([s, 0.0])).powi(2);
                }
            }
            errors.push(e.sqrt());
        }
        for w in errors.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 2.7, "rate {rate} from {errors:?}");
        }
    }

    #[test]
    fn energy_error_of_zero_against_linear() {
        let hs = space(2, 3);
        let geom = Geometry::new(GeoMap::Identity, Region::Empty);
        let cl = classify(&hs, &geom).unwrap();
        let zero = vec![0.0; hs.n_functions()];
        let e = energy_error(&hs, &cl, &geom, &zero, &|_| [1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut hs = space(3, 4);
        hs.refine(&[CellId::new(0, 1, 1), CellId::new(0, 2, 1)]);
        let map = GeoMap::PolarAnnulus {
            center: [2.0, 0.0],
            r_inner: 1.0,
            r_outer: 3.0,
            angle_start: 7.0 * std::f64::consts::PI / 8.0,
            angle_end: 9.0 * std::f64::consts::PI / 8.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let coeffs: Vec<f64> = (0..hs.n_functions()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..100 {
            let x: Point = [rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)];
            let v = eval_solution(&hs, &map, &coeffs, x, 2).unwrap();
            // differentiate along the physical axes through the inverse map
            let mp = map.at(x).unwrap();
            let h = 1e-6;
            for a in 0..2 {
                let step = [mp.inv[0][a] * h, mp.inv[1][a] * h];
                let up = eval_solution(&hs, &map, &coeffs, [x[0] + step[0], x[1] + step[1]], 0).unwrap().value;
                let dn = eval_solution(&hs, &map, &coeffs, [x[0] - step[0], x[1] - step[1]], 0).unwrap().value;
                let fd = (up - dn) / (2.0 * h);
                assert!((fd - v.gradient[a]).abs() <= 1e-6 * v.gradient[a].abs().max(1.0));
            }
        }
    }
}
