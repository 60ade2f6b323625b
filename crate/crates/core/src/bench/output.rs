//! CSV and SVG emitters.

use std::fmt::Write as _;
use std::io::Write;

use crate::adapt::IterationRecord;
use crate::error::Result;
use crate::geometry::{CellStatus, Classification, GeoMap};
use crate::hierarchy::HierarchicalSpace;
use crate::rect::Point;

pub const CSV_HEADER: &str = "iter,n_dof,n_levels,energy_error,estimator,effectivity,n_marked";

/// One row per iteration. Floats use the shortest exact representation so
/// that identical runs give identical bytes.
pub fn write_records(records: &[IterationRecord], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{}",
            r.iter, r.n_dof, r.n_levels, r.energy_error, r.estimator, r.effectivity, r.n_marked
        )?;
    }
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#59a14f", "#edc948", "#f28e2b", "#e15759", "#b07aa1", "#76b7b2", "#9c755f",
];

const SIZE: f64 = 800.0;

fn sample_edge(map: &GeoMap, a: Point, b: Point, n: usize, out: &mut Vec<Point>) {
    for k in 0..n {
        let t = k as f64 / n as f64;
        out.push(map.eval([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]));
    }
}

/// Active cells in physical space, filled by level and faded by status,
/// with the trimming curves drawn on top.
pub fn mesh_svg(hs: &HierarchicalSpace, cl: &Classification, map: &GeoMap) -> String {
    let per_edge = if map.is_affine() { 1 } else { 8 };
    let mut outline = Vec::new();
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    for k in 0..4 {
        sample_edge(map, corners[k], corners[(k + 1) % 4], 32, &mut outline);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &outline {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let scale = SIZE / (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let px = |p: Point| ((p[0] - lo[0]) * scale, (hi[1] - p[1]) * scale);
    let width = (hi[0] - lo[0]) * scale;
    let height = (hi[1] - lo[1]) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="-2 -2 {:.1} {:.1}">"#,
        width,
        height,
        width + 4.0,
        height + 4.0
    );
    for cg in &cl.cells {
        let r = cg.rect;
        let c = r.corners();
        let mut pts = Vec::new();
        for k in 0..4 {
            sample_edge(map, c[k], c[(k + 1) % 4], per_edge, &mut pts);
        }
        let opacity = match cg.status {
            CellStatus::Interior => 0.85,
            CellStatus::Cut => 0.55,
            CellStatus::Exterior => 0.12,
        };
        let _ = write!(s, r#"<polygon points=""#);
        for p in pts {
            let (x, y) = px(p);
            let _ = write!(s, "{x:.3},{y:.3} ");
        }
        let _ = writeln!(
            s,
            r##"" fill="{}" fill-opacity="{opacity}" stroke="#222" stroke-width="0.3"/>"##,
            PALETTE[cg.cell.level % PALETTE.len()]
        );
    }
    for cg in &cl.cells {
        for seg in &cg.gamma {
            let _ = write!(s, r#"<polyline points=""#);
            for k in 0..=16 {
                let (x, y) = px(map.eval(seg.curve.point(k as f64 / 16.0)));
                let _ = write!(s, "{x:.3},{y:.3} ");
            }
            let _ = writeln!(s, r##"" fill="none" stroke="#d00" stroke-width="1.2"/>"##);
        }
    }
    let _ = writeln!(s, "<!-- {} active cells, {} levels -->", cl.cells.len(), hs.n_levels());
    s.push_str("</svg>\n");
    s
}
