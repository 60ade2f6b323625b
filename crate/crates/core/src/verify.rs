//! Randomized property suites that can be run outside the test harness.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapt::{doerfler, ghost_cells};
use crate::estimator::{cell_delta, cut_constant, eta};
use crate::geometry::{classify, CellStatus, Classification, GeoMap, Geometry, Primitive, Region};
use crate::hierarchy::{refinement_closure, BasisMode, CellId, HierarchicalSpace};
use crate::splines::KnotVector;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_breakpoints(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut inner: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.02..0.98)).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut bp = vec![0.0];
    bp.extend(inner);
    bp.push(1.0);
    bp
}

pub fn spline_partition_and_derivatives() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sum: f64 = 0.0;
    let mut worst_der: f64 = 0.0;
    for _ in 0..100 {
        let p = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=9);
        let kv = KnotVector::new(p, &random_breakpoints(&mut rng, n)).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let x: f64 = rng.gen();
            let b = kv.eval(x, 2).map_err(|e| e.to_string())?;
            let s: f64 = b.ders[0].iter().sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
            ensure((s - 1.0).abs() < 1e-13, || format!("sum {s} at {x}, degree {p}"))?;
            // derivative sums vanish
            for k in 1..b.ders.len() {
                let d: f64 = b.ders[k].iter().sum();
                ensure(d.abs() < 1e-8 * (1.0 + b.ders[k].iter().map(|v| v.abs()).sum::<f64>()), || {
                    format!("derivative {k} sums to {d}")
                })?;
            }
            // first derivative against central differences inside the cell
            let m = kv.find_cell(x).map_err(|e| e.to_string())?;
            let (a, c) = kv.cell_bounds(m);
            let h = 1e-6 * (c - a);
            if x - 2.0 * h < a || x + 2.0 * h > c {
                continue;
            }
            let lo = kv.eval_in_cell(m, x - h, 0);
            let hi = kv.eval_in_cell(m, x + h, 0);
            let scale = b.ders[1].iter().fold(1.0f64, |s, v| s.max(v.abs()));
            for j in 0..=p {
                let fd = (hi.ders[0][j] - lo.ders[0][j]) / (2.0 * h);
                let err = (fd - b.ders[1][j]).abs() / scale;
                worst_der = worst_der.max(err);
                ensure(err < 1e-5, || format!("derivative mismatch {err:e}, degree {p}"))?;
            }
        }
    }
    Ok(format!("max |sum - 1| {worst_sum:.1e}, max derivative error {worst_der:.1e}"))
}

pub fn two_scale_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let p = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=8);
        let kv = KnotVector::new(p, &random_breakpoints(&mut rng, n)).map_err(|e| e.to_string())?;
        let (fine, table) = kv.dyadic_refine();
        for _ in 0..40 {
            let x: f64 = rng.gen();
            for i in 0..kv.n_dof() {
                let coarse = kv.eval_function(i, x).map_err(|e| e.to_string())?;
                let mut sum = 0.0;
                for &(j, c) in &table.rows[i] {
                    sum += c * fine.eval_function(j, x).map_err(|e| e.to_string())?;
                }
                worst = worst.max((coarse - sum).abs());
                ensure((coarse - sum).abs() < 1e-13, || {
                    format!("function {i} at {x}: {coarse} vs {sum}")
                })?;
            }
        }
    }
    Ok(format!("max deviation {worst:.1e}"))
}

fn random_active(rng: &mut ChaCha8Rng, hs: &HierarchicalSpace, max_level: usize) -> Option<CellId> {
    let cands: Vec<CellId> = hs.active_cells().iter().copied().filter(|c| c.level < max_level).collect();
    cands.choose(rng).copied()
}

pub fn thb_partition_of_unity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
    let mut hs = HierarchicalSpace::new(2, &b, &b, BasisMode::Thb, 2).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for step in 0..200 {
        if let Some(c) = random_active(&mut rng, &hs, 6) {
            hs.refine(&[c]);
        }
        for _ in 0..5 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let ev = hs.eval(x, 1).map_err(|e| e.to_string())?;
            let s: f64 = ev.values.iter().sum();
            let g = ev.gradients.iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
            worst = worst.max((s - 1.0).abs());
            ensure((s - 1.0).abs() < 1e-12, || format!("step {step}: sum {s} at {x:?}"))?;
            ensure(g[0].abs() + g[1].abs() < 1e-9, || format!("step {step}: gradient sum {g:?}"))?;
        }
    }
    Ok(format!(
        "{} active cells, {} functions, max |sum - 1| {worst:.1e}",
        hs.active_cells().len(),
        hs.n_functions()
    ))
}

pub fn admissibility_preservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let b: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
    let mut steps = 0;
    for seq in 0..50 {
        let p = 2 + seq % 2;
        let mu = 2 + (seq / 2) % 2;
        let mut hs = HierarchicalSpace::new(p, &b, &b, BasisMode::Thb, mu).map_err(|e| e.to_string())?;
        for _ in 0..6 {
            let k = rng.gen_range(1..=3);
            let mut marked: Vec<CellId> =
                (0..k).filter_map(|_| random_active(&mut rng, &hs, 5)).collect();
            marked.sort();
            marked.dedup();
            let expected = refinement_closure(&hs, &marked);
            hs.refine(&marked);
            ensure(hs.refined_sets() == expected, || {
                format!("sequence {seq}: refinement differs from the closure of {marked:?}")
            })?;
            let adm = hs.check_admissibility();
            ensure(adm.admissible, || {
                format!("sequence {seq}: violators {:?}", &adm.violators[..adm.violators.len().min(4)])
            })?;
            for c in &marked {
                ensure(!hs.is_active(*c), || format!("marked cell {c:?} still active"))?;
            }
            steps += 1;
        }
    }
    Ok(format!("{steps} refinement steps"))
}

fn gamma_length(geom: &Geometry, cl: &Classification) -> std::result::Result<f64, String> {
    let mut l = 0.0;
    for cg in &cl.cells {
        l += geom.gamma_rule(cg, 2).map_err(|e| e.to_string())?.total();
    }
    Ok(l)
}

pub fn cut_quadrature_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for trial in 0..12 {
        let n = rng.gen_range(3..=7);
        let b = random_breakpoints(&mut rng, n);
        let mut hs = HierarchicalSpace::new(2, &b, &b, BasisMode::Thb, 2).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            if let Some(c) = random_active(&mut rng, &hs, 3) {
                hs.refine(&[c]);
            }
        }
        let r = rng.gen_range(0.05..0.2);
        let c = [rng.gen_range(0.25..0.75), rng.gen_range(0.25..0.75)];
        // line through (0, y0) with slope one
        let y0 = rng.gen_range(0.1..0.5);
        let cases: [(Region, f64, f64); 3] = [
            (Region::Primitive(Primitive::disk(c, r)), 1.0 - PI * r * r, 2.0 * PI * r),
            (
                Region::Primitive(Primitive::half_plane([0.0, y0], [1.0, -1.0])),
                1.0 - 0.5 * (1.0 - y0).powi(2),
                (1.0 - y0) * 2f64.sqrt(),
            ),
            (
                Region::Primitive(Primitive::Rect(crate::rect::Rect::new(0.5, 1.0, 0.0, c[1]))),
                1.0 - 0.5 * c[1],
                0.5 + c[1],
            ),
        ];
        for (region, area, length) in cases {
            let geom = Geometry::new(GeoMap::Identity, region);
            let cl = classify(&hs, &geom).map_err(|e| e.to_string())?;
            let a = cl.total_area();
            let l = gamma_length(&geom, &cl)?;
            worst = worst.max((a - area).abs()).max((l - length).abs());
            ensure((a - area).abs() < 1e-10, || format!("trial {trial}: area {a} vs {area}"))?;
            ensure((l - length).abs() < 1e-10, || format!("trial {trial}: length {l} vs {length}"))?;
            for cg in &cl.cells {
                let rule = geom.domain_rule(cg, 3).map_err(|e| e.to_string())?;
                ensure((rule.total() - cg.area).abs() < 1e-12, || {
                    format!("cell {:?}: rule weight {} vs area {}", cg.cell, rule.total(), cg.area)
                })?;
            }
        }
    }
    Ok(format!("max deviation {worst:.1e}"))
}

pub fn scaling_spot_values() -> Check {
    let e = eta();
    ensure((e + e.ln()).abs() < 1e-14, || format!("eta + ln eta = {:e}", e + e.ln()))?;
    ensure((e - 0.5671432904).abs() < 1e-9, || format!("eta = {e}"))?;
    let c = cut_constant(1e-10);
    ensure((c - 4.798525).abs() < 1e-6, || format!("c(1e-10) = {c}"))?;
    let c = cut_constant(0.8);
    ensure((c - 0.753089).abs() < 1e-6, || format!("c(0.8) = {c}"))?;
    let d = cell_delta(CellStatus::Cut, 0.25, 1e-10).map_err(|e| e.to_string())?;
    ensure((d - 4.798525e-5).abs() < 1e-11, || format!("delta = {d}"))?;
    let d = cell_delta(CellStatus::Interior, 0.25, 1e-10).map_err(|e| e.to_string())?;
    ensure(d == 0.25, || format!("interior delta = {d}"))?;
    Ok(format!("eta = {e:.16}"))
}

pub fn doerfler_fraction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..2000 {
        let n = rng.gen_range(1..200);
        let v: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>().powi(4) })
            .collect();
        let theta = rng.gen_range(0.01..=1.0);
        let m = doerfler(&v, theta).map_err(|e| e.to_string())?;
        let total: f64 = v.iter().sum();
        let mut acc = 0.0;
        for &k in &m {
            acc += v[k];
        }
        ensure(acc >= theta * theta * total, || format!("fraction {acc} < {theta}^2 {total}"))?;
        // dropping the smallest marked entry breaks the inequality
        if let Some((&last, rest)) = m.split_last() {
            let partial: f64 = rest.iter().map(|&k| v[k]).sum();
            ensure(partial < theta * theta * total, || format!("marking not minimal at {last}"))?;
        }
    }
    Ok("2000 random vectors".into())
}

/// Ghost cells by evaluating the active basis at interior sample points.
fn sampled_ghosts(hs: &HierarchicalSpace, cl: &Classification, marked: &[CellId]) -> Vec<CellId> {
    let offsets = [0.2113, 0.5, 0.7887];
    let nonzero = |c: CellId| -> Vec<usize> {
        let r = hs.cell_rect(c);
        let mut f = Vec::new();
        for &a in &offsets {
            for &b in &offsets {
                let x = [r.min[0] + a * r.width(), r.min[1] + b * r.height()];
                let ev = hs.eval(x, 0).expect("inside the unit square");
                for (k, &v) in ev.values.iter().enumerate() {
                    if v.abs() > 1e-14 {
                        f.push(ev.functions[k]);
                    }
                }
            }
        }
        f.sort_unstable();
        f.dedup();
        f
    };
    let status = |c: CellId| cl.cells[hs.cell_position(c).expect("active")].status;
    let trigger: Vec<(CellId, Vec<usize>)> = marked
        .iter()
        .filter(|&&k| status(k) == CellStatus::Cut)
        .map(|&k| (k, nonzero(k)))
        .collect();
    let mut out = Vec::new();
    for &c in hs.active_cells() {
        if status(c) != CellStatus::Exterior || marked.contains(&c) {
            continue;
        }
        let fc = nonzero(c);
        if trigger
            .iter()
            .any(|(k, fk)| k.level == c.level && fk.iter().any(|f| fc.binary_search(f).is_ok()))
        {
            out.push(c);
        }
    }
    out.sort();
    out
}

pub fn ghost_set_equality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let mut total = 0;
    for trial in 0..6 {
        let mut hs = HierarchicalSpace::new(2, &b, &b, BasisMode::Thb, 2).map_err(|e| e.to_string())?;
        let geom = Geometry::new(
            GeoMap::Identity,
            Region::union(vec![
                Region::Primitive(Primitive::disk([0.3, 0.3], rng.gen_range(0.12..0.22))),
                Region::Primitive(Primitive::disk([0.72, 0.7], rng.gen_range(0.1..0.2))),
            ]),
        );
        for _ in 0..2 {
            let cl = classify(&hs, &geom).map_err(|e| e.to_string())?;
            let mut marked: Vec<CellId> = hs
                .active_cells()
                .iter()
                .zip(&cl.cells)
                .filter(|(_, g)| g.status != CellStatus::Exterior)
                .map(|(c, _)| *c)
                .filter(|_| rng.gen_bool(0.3))
                .collect();
            marked.sort();
            let got = ghost_cells(&hs, &cl, &marked);
            let want = sampled_ghosts(&hs, &cl, &marked);
            ensure(got == want, || format!("trial {trial}: {got:?} vs {want:?}"))?;
            total += got.len();
            hs.refine(&marked);
        }
    }
    Ok(format!("{total} ghost cells compared"))
}

type Suite = (&'static str, fn() -> Check);

const SUITES: [Suite; 8] = [
    ("spline partition of unity and derivatives", spline_partition_and_derivatives),
    ("two-scale exactness", two_scale_exactness),
    ("THB partition of unity under random refinement", thb_partition_of_unity),
    ("admissibility preservation", admissibility_preservation),
    ("cut quadrature exactness", cut_quadrature_exactness),
    ("scaling spot values", scaling_spot_values),
    ("Doerfler fraction", doerfler_fraction),
    ("ghost set equality", ghost_set_equality),
];

/// Run every suite and collect the outcomes.
pub fn run_all() -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|&(name, f)| {
            let t = Instant::now();
            let (passed, detail) = match std::panic::catch_unwind(f) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(d)) => (false, d),
                Err(_) => (false, "panicked".to_string()),
            };
            SuiteResult {
                name,
                passed,
                detail,
                elapsed: t.elapsed(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
