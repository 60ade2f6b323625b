//! Univariate and tensor-product B-spline spaces on `[0, 1]`.
//!
//! Knot vectors are open (boundary multiplicity `degree + 1`) with simple
//! interior knots, so a space of degree `p` is `C^{p-1}` across every
//! breakpoint. Cells are addressed by the index of their breakpoint interval.

use crate::error::{Error, Result};
use crate::rect::{Point, Rect};

/// Open knot vector with simple interior knots.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
    breakpoints: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, breakpoints: &[f64]) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidInput("degree must be at least 1".into()));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidInput(
                "at least two breakpoints are required".into(),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        // written to also reject NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let mut knots = Vec::with_capacity(breakpoints.len() + 2 * degree);
        knots.extend(std::iter::repeat_n(0.0, degree));
        knots.extend_from_slice(breakpoints);
        knots.extend(std::iter::repeat_n(1.0, degree));
        Ok(KnotVector {
            degree,
            knots,
            breakpoints: breakpoints.to_vec(),
        })
    }

    /// `n` uniform cells.
    pub fn uniform(degree: usize, n: usize) -> Result<Self> {
        let bp: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        Self::new(degree, &bp)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_dof(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn n_cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn cell_bounds(&self, m: usize) -> (f64, f64) {
        (self.breakpoints[m], self.breakpoints[m + 1])
    }

    /// Index of the cell containing `x`; `x = 1` belongs to the last cell.
    pub fn find_cell(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(x));
        }
        let n = self.n_cells();
        // first breakpoint strictly greater than x
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        Ok(idx.saturating_sub(1).min(n - 1))
    }

    /// Cells covered by the support of function `i`.
    pub fn support_cells(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        let lo = i.saturating_sub(self.degree);
        let hi = i.min(self.n_cells() - 1);
        lo..=hi
    }

    /// Cell range of the support extension of cell `m`.
    pub fn extension_cells(&self, m: usize) -> std::ops::RangeInclusive<usize> {
        let lo = m.saturating_sub(self.degree);
        let hi = (m + self.degree).min(self.n_cells() - 1);
        lo..=hi
    }

    /// Support extension `(xi_{i-p}, xi_{i+p+1})` of cell `m`.
    pub fn support_extension(&self, m: usize) -> Result<(f64, f64)> {
        if m >= self.n_cells() {
            return Err(Error::InvalidInput(format!("cell index {m} out of range")));
        }
        let span = self.degree + m;
        Ok((self.knots[span - self.degree], self.knots[span + self.degree + 1]))
    }

    /// Values (and derivatives up to `max_deriv`) of the `p + 1` functions
    /// nonzero on the cell containing `x`.
    pub fn eval(&self, x: f64, max_deriv: usize) -> Result<BasisEval1d> {
        let m = self.find_cell(x)?;
        Ok(self.eval_in_cell(m, x, max_deriv))
    }

    /// Same as [`eval`](Self::eval) with the cell prescribed; `x` may lie on
    /// the cell boundary and the polynomial piece of cell `m` is used.
    pub fn eval_in_cell(&self, m: usize, x: f64, max_deriv: usize) -> BasisEval1d {
        let ders = ders_basis_funs(&self.knots, self.degree, self.degree + m, x, max_deriv);
        BasisEval1d { first: m, ders }
    }

    /// Global evaluation of function `i`, zero outside its support.
    pub fn eval_function(&self, i: usize, x: f64) -> Result<f64> {
        let m = self.find_cell(x)?;
        if i < m || i > m + self.degree {
            return Ok(0.0);
        }
        let b = self.eval_in_cell(m, x, 0);
        Ok(b.ders[0][i - m])
    }

    /// Bisect every cell; returns the child knot vector and the two-scale
    /// coefficients expressing each coarse function in the child basis.
    pub fn dyadic_refine(&self) -> (KnotVector, TwoScale) {
        let mut bp = Vec::with_capacity(2 * self.breakpoints.len() - 1);
        for w in self.breakpoints.windows(2) {
            bp.push(w[0]);
            bp.push(0.5 * (w[0] + w[1]));
        }
        bp.push(1.0);
        let fine = KnotVector::new(self.degree, &bp).expect("bisection preserves validity");
        let table = two_scale(self);
        (fine, table)
    }
}

/// One-dimensional basis evaluation: functions `first..=first + p`.
#[derive(Debug, Clone)]
pub struct BasisEval1d {
    pub first: usize,
    /// `ders[k][j]`: k-th derivative of function `first + j`.
    pub ders: Vec<Vec<f64>>,
}

/// Two-scale relation between consecutive dyadic levels.
#[derive(Debug, Clone)]
pub struct TwoScale {
    degree: usize,
    /// `rows[i]`: sparse coefficients of coarse function `i` on the fine basis.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl TwoScale {
    pub fn coefficient(&self, coarse: usize, fine: usize) -> f64 {
        self.rows[coarse]
            .iter()
            .find(|(j, _)| *j == fine)
            .map_or(0.0, |(_, c)| *c)
    }

    /// Local `(p+1) x (p+1)` matrix restricted to child cell `child` of
    /// coarse cell `child / 2`: entry `[a][b]` relates coarse function
    /// `child/2 + a` to fine function `child + b`.
    pub fn local(&self, child: usize) -> Vec<f64> {
        let p = self.degree;
        let parent = child / 2;
        let mut out = vec![0.0; (p + 1) * (p + 1)];
        for a in 0..=p {
            for &(j, c) in &self.rows[parent + a] {
                if j >= child && j <= child + p {
                    out[a * (p + 1) + (j - child)] = c;
                }
            }
        }
        out
    }
}

fn two_scale(coarse: &KnotVector) -> TwoScale {
    let p = coarse.degree;
    let nel = coarse.n_cells();
    let fine_index = |i: usize| -> usize {
        if i <= p {
            i
        } else if i <= p + nel {
            p + 2 * (i - p)
        } else {
            p + 2 * nel + (i - p - nel)
        }
    };
    let rows = (0..coarse.n_dof())
        .map(|i| {
            // Knot insertion on the local knot vector of function i.
            let mut local: Vec<f64> = coarse.knots[i..=i + p + 1].to_vec();
            let mut coeffs = vec![1.0];
            let mids: Vec<f64> = local
                .windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| 0.5 * (w[0] + w[1]))
                .collect();
            for t in mids {
                let k = local.partition_point(|&u| u <= t);
                let mut next = vec![0.0; coeffs.len() + 1];
                for (j, slot) in next.iter_mut().enumerate() {
                    let alpha = if t >= local[j + p] {
                        1.0
                    } else if t <= local[j] {
                        0.0
                    } else {
                        (t - local[j]) / (local[j + p] - local[j])
                    };
                    let cur = coeffs.get(j).copied().unwrap_or(0.0);
                    let prev = if j > 0 { coeffs[j - 1] } else { 0.0 };
                    *slot = alpha * cur + (1.0 - alpha) * prev;
                }
                local.insert(k, t);
                coeffs = next;
            }
            let base = fine_index(i);
            coeffs
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c != 0.0)
                .map(|(j, c)| (base + j, c))
                .collect()
        })
        .collect();
    TwoScale { degree: p, rows }
}

/// Nonzero basis functions and their derivatives at a point (NURBS-book
/// style triangular scheme). `span` is the knot span index.
fn ders_basis_funs(knots: &[f64], p: usize, span: usize, u: f64, n: usize) -> Vec<Vec<f64>> {
    let mut ders = vec![vec![0.0; p + 1]; n + 1];
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let nd = n.min(p);
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nd {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize {
                k - 1
            } else {
                p - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=nd {
        for v in ders[k].iter_mut() {
            *v *= fac;
        }
        fac *= (p - k) as f64;
    }
    ders
}

/// Tensor-product space of one hierarchical level.
#[derive(Debug, Clone)]
pub struct TensorSpace {
    pub level: usize,
    pub dirs: [KnotVector; 2],
}

/// Bivariate evaluation of the `(p1+1)(p2+1)` functions nonzero on a cell.
/// Local function `(a, b)` is stored at `a + (p1 + 1) * b`.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub first: [usize; 2],
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 2]>,
    /// `[d2/dx2, d2/dxdy, d2/dy2]`
    pub hessians: Vec<[f64; 3]>,
}

impl TensorSpace {
    pub fn new(level: usize, u: KnotVector, v: KnotVector) -> Self {
        TensorSpace { level, dirs: [u, v] }
    }

    pub fn degrees(&self) -> [usize; 2] {
        [self.dirs[0].degree(), self.dirs[1].degree()]
    }

    pub fn n_cells(&self) -> [usize; 2] {
        [self.dirs[0].n_cells(), self.dirs[1].n_cells()]
    }

    pub fn n_dof(&self) -> [usize; 2] {
        [self.dirs[0].n_dof(), self.dirs[1].n_dof()]
    }

    pub fn cell_rect(&self, i: usize, j: usize) -> Rect {
        let (x0, x1) = self.dirs[0].cell_bounds(i);
        let (y0, y1) = self.dirs[1].cell_bounds(j);
        Rect::new(x0, x1, y0, y1)
    }

    pub fn support_extension(&self, i: usize, j: usize) -> Result<Rect> {
        let (x0, x1) = self.dirs[0].support_extension(i)?;
        let (y0, y1) = self.dirs[1].support_extension(j)?;
        Ok(Rect::new(x0, x1, y0, y1))
    }

    pub fn eval(&self, x: Point, max_deriv: usize) -> Result<BasisEval> {
        let i = self.dirs[0].find_cell(x[0])?;
        let j = self.dirs[1].find_cell(x[1])?;
        Ok(self.eval_in_cell([i, j], x, max_deriv))
    }

    pub fn eval_in_cell(&self, cell: [usize; 2], x: Point, max_deriv: usize) -> BasisEval {
        let bu = self.dirs[0].eval_in_cell(cell[0], x[0], max_deriv);
        let bv = self.dirs[1].eval_in_cell(cell[1], x[1], max_deriv);
        tensor_product(&bu, &bv, max_deriv)
    }
}

pub(crate) fn tensor_product(bu: &BasisEval1d, bv: &BasisEval1d, max_deriv: usize) -> BasisEval {
    let nu = bu.ders[0].len();
    let nv = bv.ders[0].len();
    let n = nu * nv;
    let mut values = Vec::with_capacity(n);
    let mut gradients = Vec::with_capacity(if max_deriv >= 1 { n } else { 0 });
    let mut hessians = Vec::with_capacity(if max_deriv >= 2 { n } else { 0 });
    for b in 0..nv {
        for a in 0..nu {
            let (u0, v0) = (bu.ders[0][a], bv.ders[0][b]);
            values.push(u0 * v0);
            if max_deriv >= 1 {
                let (u1, v1) = (bu.ders[1][a], bv.ders[1][b]);
                gradients.push([u1 * v0, u0 * v1]);
                if max_deriv >= 2 {
                    let (u2, v2) = (bu.ders[2][a], bv.ders[2][b]);
                    hessians.push([u2 * v0, u1 * v1, u0 * v2]);
                }
            }
        }
    }
    BasisEval {
        first: [bu.first, bv.first],
        values,
        gradients,
        hessians,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    /// Textbook recursive Cox-de Boor, independent of the triangular scheme.
    fn naive(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            let last = *knots.last().unwrap();
            let in_span = knots[i] <= x && x < knots[i + 1];
            let closes = x == last && knots[i + 1] == last && knots[i] < last;
            return if in_span || closes { 1.0 } else { 0.0 };
        }
        let mut out = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            out += (x - knots[i]) / d1 * naive(knots, i, p - 1, x);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            out += (knots[i + p + 1] - x) / d2 * naive(knots, i + 1, p - 1, x);
        }
        out
    }

    #[test]
    fn knot_vector_construction() {
        let kv = KnotVector::new(1, &[0.0, 1.0]).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(kv.n_dof(), 2);

        let kv = KnotVector::new(2, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(kv.n_dof(), 4);

        let kv = KnotVector::new(2, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(kv.n_dof(), 6);
        assert_eq!(kv.knots().len() - 2 - 1, 6);
    }

    #[test]
    fn knot_vector_rejects_bad_breakpoints() {
        assert!(KnotVector::new(2, &[0.0, 0.6, 0.4, 1.0]).is_err());
        assert!(KnotVector::new(2, &[0.1, 1.0]).is_err());
        assert!(KnotVector::new(2, &[0.0, 0.9]).is_err());
        assert!(KnotVector::new(0, &[0.0, 1.0]).is_err());
        assert!(KnotVector::new(2, &[0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn hat_functions_at_midpoint() {
        let kv = KnotVector::new(1, &[0.0, 1.0]).unwrap();
        let b = kv.eval(0.5, 0).unwrap();
        assert_eq!(b.ders[0], vec![0.5, 0.5]);
    }

    #[test]
    fn quadratic_at_breakpoint_matches_naive_recursion() {
        let kv = KnotVector::new(2, &[0.0, 0.5, 1.0]).unwrap();
        let all: Vec<f64> = (0..4).map(|i| naive(kv.knots(), i, 2, 0.5)).collect();
        assert_abs_diff_eq!(all[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(all.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for i in 0..4 {
            assert_abs_diff_eq!(kv.eval_function(i, 0.5).unwrap(), all[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn eval_matches_naive_recursion_everywhere() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p in 1..=4 {
            let kv = KnotVector::new(p, &[0.0, 0.1, 0.35, 0.4, 0.8, 1.0]).unwrap();
            for _ in 0..200 {
                let x: f64 = rng.gen();
                for i in 0..kv.n_dof() {
                    let a = kv.eval_function(i, x).unwrap();
                    let b = naive(kv.knots(), i, p, x);
                    assert_abs_diff_eq!(a, b, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn evaluation_outside_domain_is_an_error() {
        let kv = KnotVector::uniform(2, 3).unwrap();
        assert!(matches!(kv.eval(1.5, 0), Err(Error::Domain(_))));
        assert!(kv.eval(-0.1, 0).is_err());
    }

    #[test]
    fn right_endpoint_belongs_to_last_cell() {
        let kv = KnotVector::uniform(3, 4).unwrap();
        let b = kv.eval(1.0, 1).unwrap();
        assert_eq!(b.first, 3);
        assert_abs_diff_eq!(b.ders[0][3], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(kv.eval_function(kv.n_dof() - 1, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn partition_of_unity_and_zero_derivative_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for p in 1..=4 {
            let kv = KnotVector::new(p, &[0.0, 0.2, 0.3, 0.55, 0.9, 1.0]).unwrap();
            for _ in 0..1000 {
                let x: f64 = rng.gen();
                let b = kv.eval(x, 2).unwrap();
                assert_eq!(b.ders[0].len(), p + 1);
                assert!((b.ders[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(b.ders[1].iter().sum::<f64>().abs() < 1e-9);
                assert!(b.ders[0].iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for p in 2..=4 {
            let kv = KnotVector::new(p, &[0.0, 0.3, 0.45, 0.7, 1.0]).unwrap();
            for &x in &[0.1, 0.33, 0.5, 0.61, 0.9] {
                let m = kv.find_cell(x).unwrap();
                let b = kv.eval_in_cell(m, x, 2);
                let bp = kv.eval_in_cell(m, x + h, 2);
                let bm = kv.eval_in_cell(m, x - h, 2);
                for j in 0..=p {
                    let fd1 = (bp.ders[0][j] - bm.ders[0][j]) / (2.0 * h);
                    assert!((fd1 - b.ders[1][j]).abs() <= 1e-6 * b.ders[1][j].abs().max(1.0));
                    let fd2 = (bp.ders[1][j] - bm.ders[1][j]) / (2.0 * h);
                    assert!((fd2 - b.ders[2][j]).abs() <= 1e-4 * b.ders[2][j].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn support_extension_examples() {
        let kv = KnotVector::new(1, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(kv.support_extension(0).unwrap(), (0.0, 1.0));
        for p in 1..=4 {
            let kv = KnotVector::uniform(p, 1).unwrap();
            assert_eq!(kv.support_extension(0).unwrap(), (0.0, 1.0));
        }
        // deep inside a uniform mesh: width (2p+1) h
        let kv = KnotVector::uniform(2, 16).unwrap();
        let (a, b) = kv.support_extension(8).unwrap();
        assert_abs_diff_eq!(b - a, 5.0 / 16.0, epsilon = 1e-15);
        assert!(kv.support_extension(16).is_err());
    }

    #[test]
    fn linear_subdivision_mask() {
        let kv = KnotVector::new(1, &[0.0, 1.0]).unwrap();
        let (fine, ts) = kv.dyadic_refine();
        assert_eq!(fine.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(ts.rows[0], vec![(0, 1.0), (1, 0.5)]);
        assert_eq!(ts.rows[1], vec![(1, 0.5), (2, 1.0)]);
    }

    #[test]
    fn quadratic_interior_mask() {
        let kv = KnotVector::uniform(2, 4).unwrap();
        let (_, ts) = kv.dyadic_refine();
        // function 2 is the interior one with uniform knots 0.25, 0.5, 0.75
        let coeffs: Vec<f64> = ts.rows[2].iter().map(|(_, c)| *c).collect();
        let expected = [0.25, 0.75, 0.75, 0.25];
        assert_eq!(coeffs.len(), 4);
        for (c, e) in coeffs.iter().zip(expected) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_scale_reproduces_coarse_functions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for p in 1..=4 {
            let kv = KnotVector::new(p, &[0.0, 0.25 + 1e-5, 0.5 + 1e-5, 0.75 + 1e-5, 1.0]).unwrap();
            let (fine, ts) = kv.dyadic_refine();
            for row in &ts.rows {
                assert!(row.iter().all(|(_, c)| *c >= 0.0));
            }
            for _ in 0..100 {
                let x: f64 = rng.gen();
                for i in 0..kv.n_dof() {
                    let coarse = kv.eval_function(i, x).unwrap();
                    let refined: f64 = ts.rows[i]
                        .iter()
                        .map(|&(j, c)| c * fine.eval_function(j, x).unwrap())
                        .sum();
                    assert_abs_diff_eq!(coarse, refined, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn tensor_eval_counts_and_unity() {
        let ts = TensorSpace::new(
            0,
            KnotVector::uniform(2, 3).unwrap(),
            KnotVector::uniform(3, 5).unwrap(),
        );
        let b = ts.eval([0.4, 0.77], 2).unwrap();
        assert_eq!(b.values.len(), 3 * 4);
        assert_abs_diff_eq!(b.values.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        let gsum = b.gradients.iter().fold([0.0, 0.0], |s, g| [s[0] + g[0], s[1] + g[1]]);
        assert!(gsum[0].abs() < 1e-12 && gsum[1].abs() < 1e-12);
    }
}
