//! Hierarchical (truncated) B-spline spaces over dyadically nested tensor
//! levels, together with admissible local refinement.
//!
//! The hierarchy is stored as the sets of subdivided cells per level. A cell
//! of level `l > 0` exists in the domain of its level iff its parent was
//! subdivided, and it is active iff it exists and is not itself subdivided.

use std::str::FromStr;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::rect::{Point, Rect};
use crate::splines::{tensor_product, BasisEval, KnotVector, TensorSpace};

/// Cell of the Bezier mesh of a given level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub level: usize,
    pub i: usize,
    pub j: usize,
}

impl CellId {
    pub fn new(level: usize, i: usize, j: usize) -> Self {
        CellId { level, i, j }
    }

    pub fn parent(&self) -> Option<CellId> {
        (self.level > 0).then(|| CellId::new(self.level - 1, self.i / 2, self.j / 2))
    }

    pub fn children(&self) -> [CellId; 4] {
        let (l, i, j) = (self.level + 1, 2 * self.i, 2 * self.j);
        [
            CellId::new(l, i, j),
            CellId::new(l, i + 1, j),
            CellId::new(l, i, j + 1),
            CellId::new(l, i + 1, j + 1),
        ]
    }

    /// Ancestor of level `k <= self.level`.
    pub fn ancestor(&self, k: usize) -> CellId {
        let s = self.level - k;
        CellId::new(k, self.i >> s, self.j >> s)
    }
}

/// Tensor-product B-spline of a given level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionId {
    pub level: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisMode {
    Hb,
    #[default]
    Thb,
}

impl FromStr for BasisMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hb" => Ok(BasisMode::Hb),
            "thb" => Ok(BasisMode::Thb),
            _ => Err(Error::InvalidInput(format!("unknown basis mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    space: TensorSpace,
    /// Local two-scale matrices from the parent level, indexed by child cell.
    local: [Vec<Vec<f64>>; 2],
}

/// Expansion of the active functions nonzero on one cell in terms of the
/// `(p+1)^2` tensor functions of the cell's own level.
#[derive(Debug, Clone)]
pub struct CellExtraction {
    pub cell: CellId,
    /// Global indices of the active functions (in increasing order).
    pub functions: Vec<usize>,
    /// Row-major `functions.len() x (p+1)^2` coefficients.
    pub coeffs: Vec<f64>,
    n_local: usize,
}

/// Values and derivatives of the active functions nonzero at a point.
#[derive(Debug, Clone)]
pub struct HierEval {
    pub functions: Vec<usize>,
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    pub hessians: Vec<[f64; 3]>,
}

impl CellExtraction {
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.n_local..(k + 1) * self.n_local]
    }

    pub fn apply(&self, local: &BasisEval) -> HierEval {
        let n = self.functions.len();
        let mut values = vec![0.0; n];
        let mut gradients = vec![[0.0; 2]; if local.gradients.is_empty() { 0 } else { n }];
        let mut hessians = vec![[0.0; 3]; if local.hessians.is_empty() { 0 } else { n }];
        for k in 0..n {
            let row = self.row(k);
            let mut v = 0.0;
            let mut g = [0.0; 2];
            let mut h = [0.0; 3];
            for (l, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                v += c * local.values[l];
                if !gradients.is_empty() {
                    g[0] += c * local.gradients[l][0];
                    g[1] += c * local.gradients[l][1];
                }
                if !hessians.is_empty() {
                    for d in 0..3 {
                        h[d] += c * local.hessians[l][d];
                    }
                }
            }
            values[k] = v;
            if !gradients.is_empty() {
                gradients[k] = g;
            }
            if !hessians.is_empty() {
                hessians[k] = h;
            }
        }
        HierEval {
            functions: self.functions.clone(),
            values,
            gradients,
            hessians,
        }
    }

    /// Local tensor coefficients of `sum_B global[B] B` on this cell.
    pub fn localize(&self, global: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_local];
        for (k, &f) in self.functions.iter().enumerate() {
            let u = global[f];
            if u == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(self.row(k)) {
                *o += u * c;
            }
        }
        out
    }
}

/// Result of the admissibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    pub violators: Vec<CellId>,
}

#[derive(Debug, Clone)]
pub struct HierarchicalSpace {
    degree: usize,
    mode: BasisMode,
    mu: usize,
    levels: Vec<Level>,
    refined: Vec<FxHashSet<(usize, usize)>>,
    // derived data, rebuilt after every modification
    cells: Vec<CellId>,
    cell_index: FxHashMap<CellId, usize>,
    functions: Vec<FunctionId>,
    function_index: FxHashMap<FunctionId, usize>,
    contained: Vec<FxHashSet<(usize, usize)>>,
}

impl HierarchicalSpace {
    /// Single-level space on the given breakpoints.
    pub fn new(
        degree: usize,
        breaks_x: &[f64],
        breaks_y: &[f64],
        mode: BasisMode,
        mu: usize,
    ) -> Result<Self> {
        if mu < 2 {
            return Err(Error::InvalidInput(
                "admissibility class must be at least 2".into(),
            ));
        }
        let u = KnotVector::new(degree, breaks_x)?;
        let v = KnotVector::new(degree, breaks_y)?;
        let mut hs = HierarchicalSpace {
            degree,
            mode,
            mu,
            levels: vec![Level {
                space: TensorSpace::new(0, u, v),
                local: [Vec::new(), Vec::new()],
            }],
            refined: vec![FxHashSet::default()],
            cells: Vec::new(),
            cell_index: FxHashMap::default(),
            functions: Vec::new(),
            function_index: FxHashMap::default(),
            contained: Vec::new(),
        };
        hs.rebuild();
        Ok(hs)
    }

    /// Space built from an explicit list of subdivided cells per level. The
    /// lists must describe a nested hierarchy.
    pub fn from_refined(
        degree: usize,
        breaks_x: &[f64],
        breaks_y: &[f64],
        mode: BasisMode,
        mu: usize,
        refined: &[Vec<(usize, usize)>],
    ) -> Result<Self> {
        let mut hs = Self::new(degree, breaks_x, breaks_y, mode, mu)?;
        for (l, cells) in refined.iter().enumerate() {
            for &(i, j) in cells {
                let c = CellId::new(l, i, j);
                let [nx, ny] = hs.levels[l].space.n_cells();
                if i >= nx || j >= ny || !hs.in_domain(c) {
                    return Err(Error::InvalidInput(format!(
                        "refined cell {c:?} is not in the domain of its level"
                    )));
                }
                hs.mark_subdivided(c);
            }
        }
        hs.rebuild();
        Ok(hs)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    /// Number of levels holding at least one active cell.
    pub fn n_levels(&self) -> usize {
        self.cells.iter().map(|c| c.level).max().unwrap_or(0) + 1
    }

    pub fn level_space(&self, level: usize) -> &TensorSpace {
        &self.levels[level].space
    }

    pub fn active_cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn cell_position(&self, cell: CellId) -> Option<usize> {
        self.cell_index.get(&cell).copied()
    }

    pub fn functions(&self) -> &[FunctionId] {
        &self.functions
    }

    pub fn n_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn function_position(&self, f: FunctionId) -> Option<usize> {
        self.function_index.get(&f).copied()
    }

    pub fn n_local(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn cell_rect(&self, cell: CellId) -> Rect {
        self.levels[cell.level].space.cell_rect(cell.i, cell.j)
    }

    /// Subdivided cells of a level, sorted.
    pub fn refined_cells(&self, level: usize) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .refined
            .get(level)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        v.sort_unstable();
        v
    }

    pub fn in_domain(&self, cell: CellId) -> bool {
        match cell.parent() {
            None => true,
            Some(p) => self
                .refined
                .get(p.level)
                .is_some_and(|s| s.contains(&(p.i, p.j))),
        }
    }

    pub fn is_refined(&self, cell: CellId) -> bool {
        self.refined
            .get(cell.level)
            .is_some_and(|s| s.contains(&(cell.i, cell.j)))
    }

    pub fn is_active(&self, cell: CellId) -> bool {
        if cell.level >= self.levels.len() {
            return false;
        }
        let [nx, ny] = self.levels[cell.level].space.n_cells();
        cell.i < nx && cell.j < ny && self.in_domain(cell) && !self.is_refined(cell)
    }

    /// Active cell containing `x` (points on shared edges go to the upper one).
    pub fn find_cell(&self, x: Point) -> Result<CellId> {
        let s0 = &self.levels[0].space;
        let mut c = CellId::new(0, s0.dirs[0].find_cell(x[0])?, s0.dirs[1].find_cell(x[1])?);
        while self.is_refined(c) {
            let fine = &self.levels[c.level + 1].space;
            let mx = fine.dirs[0].breakpoints()[2 * c.i + 1];
            let my = fine.dirs[1].breakpoints()[2 * c.j + 1];
            c = CellId::new(
                c.level + 1,
                2 * c.i + usize::from(x[0] >= mx),
                2 * c.j + usize::from(x[1] >= my),
            );
        }
        Ok(c)
    }

    /// Cells of the untruncated support of a tensor function.
    pub fn support_cells(&self, f: FunctionId) -> Vec<CellId> {
        let s = &self.levels[f.level].space;
        let mut out = Vec::new();
        for j in s.dirs[1].support_cells(f.j) {
            for i in s.dirs[0].support_cells(f.i) {
                out.push(CellId::new(f.level, i, j));
            }
        }
        out
    }

    pub fn support_rect(&self, f: FunctionId) -> Rect {
        let s = &self.levels[f.level].space;
        let xs = s.dirs[0].support_cells(f.i);
        let ys = s.dirs[1].support_cells(f.j);
        let bx = s.dirs[0].breakpoints();
        let by = s.dirs[1].breakpoints();
        Rect::new(bx[*xs.start()], bx[*xs.end() + 1], by[*ys.start()], by[*ys.end() + 1])
    }

    /// Support extension of the level-`k` ancestor of `cell`.
    pub fn multilevel_support_extension(&self, cell: CellId, k: usize) -> Result<Rect> {
        if k > cell.level {
            return Err(Error::InvalidInput(format!(
                "level {k} is finer than the cell level {}",
                cell.level
            )));
        }
        let a = cell.ancestor(k);
        self.levels[k].space.support_extension(a.i, a.j)
    }

    /// Active cells of level `l - mu + 1` meeting the support extension of
    /// the level `l - mu + 2` ancestor of `cell`.
    pub fn neighborhood(&self, cell: CellId) -> Vec<CellId> {
        if cell.level + 1 < self.mu {
            return Vec::new();
        }
        let k2 = cell.level + 2 - self.mu;
        let k1 = k2 - 1;
        let a = cell.ancestor(k2);
        let s = &self.levels[k2].space;
        let xs = s.dirs[0].extension_cells(a.i);
        let ys = s.dirs[1].extension_cells(a.j);
        let mut out = Vec::new();
        for j in ys.start() / 2..=ys.end() / 2 {
            for i in xs.start() / 2..=xs.end() / 2 {
                let c = CellId::new(k1, i, j);
                if self.is_active(c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Refine the marked cells, first refining their neighborhoods
    /// recursively so that admissibility of class `mu` is preserved.
    pub fn refine(&mut self, marked: &[CellId]) {
        if marked.is_empty() {
            return;
        }
        let mut stack: Vec<(CellId, bool)> = marked.iter().rev().map(|&c| (c, false)).collect();
        while let Some((c, expanded)) = stack.pop() {
            if !self.is_active(c) {
                continue;
            }
            if expanded {
                self.mark_subdivided(c);
            } else {
                stack.push((c, true));
                for n in self.neighborhood(c).into_iter().rev() {
                    stack.push((n, false));
                }
            }
        }
        self.rebuild();
    }

    /// Subdivide cells without any admissibility closure.
    pub fn subdivide_unchecked(&mut self, cells: &[CellId]) {
        for &c in cells {
            if self.is_active(c) {
                self.mark_subdivided(c);
            }
        }
        self.rebuild();
    }

    fn mark_subdivided(&mut self, c: CellId) {
        if c.level + 1 == self.levels.len() {
            let last = &self.levels[c.level].space;
            let (u, tu) = last.dirs[0].dyadic_refine();
            let (v, tv) = last.dirs[1].dyadic_refine();
            let lu = (0..u.n_cells()).map(|m| tu.local(m)).collect();
            let lv = (0..v.n_cells()).map(|m| tv.local(m)).collect();
            self.levels.push(Level {
                space: TensorSpace::new(c.level + 1, u, v),
                local: [lu, lv],
            });
            self.refined.push(FxHashSet::default());
        }
        self.refined[c.level].insert((c.i, c.j));
    }

    fn rebuild(&mut self) {
        let p = self.degree;
        let n_levels = self.levels.len();
        let mut cells = Vec::new();
        let mut domain_cells: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n_levels);
        for l in 0..n_levels {
            let mut dom = Vec::new();
            if l == 0 {
                let [nx, ny] = self.levels[0].space.n_cells();
                for i in 0..nx {
                    for j in 0..ny {
                        dom.push((i, j));
                    }
                }
            } else {
                for &(i, j) in &self.refined[l - 1] {
                    for c in CellId::new(l - 1, i, j).children() {
                        dom.push((c.i, c.j));
                    }
                }
            }
            dom.sort_unstable();
            for &(i, j) in &dom {
                if !self.refined[l].contains(&(i, j)) {
                    cells.push(CellId::new(l, i, j));
                }
            }
            domain_cells.push(dom);
        }

        let mut contained = Vec::with_capacity(n_levels);
        let mut functions = Vec::new();
        for (l, dom) in domain_cells.iter().enumerate() {
            let dom_set: FxHashSet<(usize, usize)> = dom.iter().copied().collect();
            let s = &self.levels[l].space;
            let mut seen = FxHashSet::default();
            let mut inside = FxHashSet::default();
            for &(ci, cj) in dom {
                for fj in cj..=cj + p {
                    for fi in ci..=ci + p {
                        if !seen.insert((fi, fj)) {
                            continue;
                        }
                        let all_in = s.dirs[1].support_cells(fj).all(|j| {
                            s.dirs[0].support_cells(fi).all(|i| dom_set.contains(&(i, j)))
                        });
                        if all_in {
                            inside.insert((fi, fj));
                        }
                    }
                }
            }
            for &(fi, fj) in &inside {
                let all_refined = s.dirs[1].support_cells(fj).all(|j| {
                    s.dirs[0]
                        .support_cells(fi)
                        .all(|i| self.refined[l].contains(&(i, j)))
                });
                if !all_refined {
                    functions.push(FunctionId { level: l, i: fi, j: fj });
                }
            }
            contained.push(inside);
        }
        functions.sort_unstable();
        cells.sort_unstable();
        self.cell_index = cells.iter().enumerate().map(|(k, c)| (*c, k)).collect();
        self.function_index = functions.iter().enumerate().map(|(k, f)| (*f, k)).collect();
        self.cells = cells;
        self.functions = functions;
        self.contained = contained;
    }

    /// Expansion of the active functions nonzero on `cell` in the current
    /// basis mode.
    pub fn extraction(&self, cell: CellId) -> CellExtraction {
        self.extraction_with(cell, self.mode == BasisMode::Thb)
    }

    fn extraction_with(&self, cell: CellId, truncate: bool) -> CellExtraction {
        let p = self.degree;
        let n = p + 1;
        let nl = n * n;
        let mut funcs: Vec<usize> = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut tmp = vec![0.0; nl];
        for m in 0..=cell.level {
            let a = cell.ancestor(m);
            if m > 0 {
                let tx = &self.levels[m].local[0][a.i];
                let ty = &self.levels[m].local[1][a.j];
                for row in rows.iter_mut() {
                    // x direction: tmp[bx + n*ay] = sum_ax row[ax + n*ay] tx[ax][bx]
                    for ay in 0..n {
                        for bx in 0..n {
                            let mut s = 0.0;
                            for ax in 0..n {
                                s += row[ax + n * ay] * tx[ax * n + bx];
                            }
                            tmp[bx + n * ay] = s;
                        }
                    }
                    for by in 0..n {
                        for bx in 0..n {
                            let mut s = 0.0;
                            for ay in 0..n {
                                s += tmp[bx + n * ay] * ty[ay * n + by];
                            }
                            row[bx + n * by] = s;
                        }
                    }
                    if truncate {
                        for by in 0..n {
                            for bx in 0..n {
                                if self.contained[m].contains(&(a.i + bx, a.j + by)) {
                                    row[bx + n * by] = 0.0;
                                }
                            }
                        }
                    }
                }
                let mut k = 0;
                while k < rows.len() {
                    if rows[k].iter().all(|c| c.abs() < 1e-15) {
                        rows.swap_remove(k);
                        funcs.swap_remove(k);
                    } else {
                        k += 1;
                    }
                }
            }
            for by in 0..n {
                for bx in 0..n {
                    let f = FunctionId {
                        level: m,
                        i: a.i + bx,
                        j: a.j + by,
                    };
                    if let Some(&g) = self.function_index.get(&f) {
                        let mut row = vec![0.0; nl];
                        row[bx + n * by] = 1.0;
                        rows.push(row);
                        funcs.push(g);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..funcs.len()).collect();
        order.sort_unstable_by_key(|&k| funcs[k]);
        let mut coeffs = Vec::with_capacity(order.len() * nl);
        for &k in &order {
            coeffs.extend_from_slice(&rows[k]);
        }
        CellExtraction {
            cell,
            functions: order.iter().map(|&k| funcs[k]).collect(),
            coeffs,
            n_local: nl,
        }
    }

    /// Tensor basis of the cell's level evaluated at `x`.
    pub fn local_basis(&self, cell: CellId, x: Point, max_deriv: usize) -> BasisEval {
        let s = &self.levels[cell.level].space;
        let bu = s.dirs[0].eval_in_cell(cell.i, x[0], max_deriv);
        let bv = s.dirs[1].eval_in_cell(cell.j, x[1], max_deriv);
        tensor_product(&bu, &bv, max_deriv)
    }

    /// Active functions nonzero at `x` with derivatives up to `max_deriv`.
    pub fn eval(&self, x: Point, max_deriv: usize) -> Result<HierEval> {
        let cell = self.find_cell(x)?;
        let ext = self.extraction(cell);
        Ok(ext.apply(&self.local_basis(cell, x, max_deriv)))
    }

    /// Class-`mu` check: the truncated functions nonzero on each active cell
    /// must belong to at most `mu` consecutive levels.
    pub fn check_admissibility(&self) -> Admissibility {
        let violators: Vec<CellId> = self
            .cells
            .iter()
            .filter(|&&c| {
                let ext = self.extraction_with(c, true);
                let lo = ext.functions.iter().map(|&f| self.functions[f].level).min();
                let hi = ext.functions.iter().map(|&f| self.functions[f].level).max();
                match (lo, hi) {
                    (Some(lo), Some(hi)) => hi - lo + 1 > self.mu,
                    _ => false,
                }
            })
            .copied()
            .collect();
        Admissibility {
            admissible: violators.is_empty(),
            violators,
        }
    }
}

/// Least superset of the current hierarchy plus `marked` in which every
/// subdivided cell of level `l` has all level `l - mu + 1` cells of the
/// support extension of its level `l - mu + 2` ancestor subdivided as well.
/// Used as an independent reference for [`HierarchicalSpace::refine`].
pub fn refinement_closure(hs: &HierarchicalSpace, marked: &[CellId]) -> Vec<FxHashSet<(usize, usize)>> {
    let mu = hs.mu();
    let p = hs.degree();
    let n0 = hs.level_space(0).n_cells();
    let mut sets: Vec<FxHashSet<(usize, usize)>> = (0..hs.levels.len())
        .map(|l| hs.refined_cells(l).into_iter().collect())
        .collect();
    fn add(sets: &mut Vec<FxHashSet<(usize, usize)>>, c: CellId) -> bool {
        while sets.len() <= c.level + 1 {
            sets.push(FxHashSet::default());
        }
        let mut changed = false;
        for k in 0..=c.level {
            let a = c.ancestor(k);
            changed |= sets[k].insert((a.i, a.j));
        }
        changed
    }
    for &c in marked {
        add(&mut sets, c);
    }
    loop {
        let mut pending = Vec::new();
        for (l, set) in sets.iter().enumerate() {
            if l + 1 < mu {
                continue;
            }
            let k2 = l + 2 - mu;
            let k1 = k2 - 1;
            let ncx = n0[0] << k2;
            let ncy = n0[1] << k2;
            let mut items: Vec<_> = set.iter().copied().collect();
            items.sort_unstable();
            for (i, j) in items {
                let a = CellId::new(l, i, j).ancestor(k2);
                let xs = a.i.saturating_sub(p)..=(a.i + p).min(ncx - 1);
                let ys = a.j.saturating_sub(p)..=(a.j + p).min(ncy - 1);
                for jj in ys.start() / 2..=ys.end() / 2 {
                    for ii in xs.start() / 2..=xs.end() / 2 {
                        if !set_contains(&sets, k1, (ii, jj)) {
                            pending.push(CellId::new(k1, ii, jj));
                        }
                    }
                }
            }
        }
        let mut changed = false;
        for c in pending {
            changed |= add(&mut sets, c);
        }
        if !changed {
            break;
        }
    }
    while sets.last().is_some_and(|s| s.is_empty()) {
        sets.pop();
    }
    sets
}

fn set_contains(sets: &[FxHashSet<(usize, usize)>], l: usize, c: (usize, usize)) -> bool {
    sets.get(l).is_some_and(|s| s.contains(&c))
}

impl HierarchicalSpace {
    /// Non-empty subdivided-cell sets, for comparison with
    /// [`refinement_closure`].
    pub fn refined_sets(&self) -> Vec<FxHashSet<(usize, usize)>> {
        let mut v = self.refined.clone();
        while v.last().is_some_and(|s| s.is_empty()) {
            v.pop();
        }
        v
    }
}
