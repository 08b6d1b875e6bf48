//! Built-in structured mesh generators for the test geometries, so nothing
//! in the repository depends on an external mesher. Generated meshes are
//! deterministic for fixed parameters and can be written back to MSH 2.2.

use super::{Mesh, RegionTag, Triangle};
use crate::error::{Error, Result};
use std::f64::consts::TAU;

/// Disk of radius `r_gamma` (air) inside an annulus up to `r_outer` (iron),
/// concentric at the origin. The interface ring lies exactly at `r_gamma`.
#[derive(Debug, Clone)]
pub struct DiskAnnulus {
    pub r_gamma: f64,
    pub r_outer: f64,
    /// Target element size.
    pub h: f64,
    /// Optional evaluation disk `(cx, cy, radius)` overlaying air.
    pub eval: Option<[f64; 3]>,
}

/// Rectangle of air inside a larger iron rectangle, both centered at the
/// origin. Extra breakpoints force grid lines through winding rectangles.
#[derive(Debug, Clone)]
pub struct RectInRect {
    pub air_w: f64,
    pub air_h: f64,
    pub iron_w: f64,
    pub iron_h: f64,
    pub h: f64,
    pub breaks_x: Vec<f64>,
    pub breaks_y: Vec<f64>,
    pub eval: Option<[f64; 3]>,
}

fn in_eval(eval: &Option<[f64; 3]>, p: [f64; 2]) -> bool {
    match eval {
        Some([cx, cy, r]) => {
            let (dx, dy) = (p[0] - cx, p[1] - cy);
            dx * dx + dy * dy < r * r
        }
        None => false,
    }
}

/// Polar mesh of a disk in an annulus. Ring node counts grow with the radius
/// so elements stay close to isotropic; adjacent rings with different counts
/// are joined by merging the two node circles in angular order.
pub fn disk_in_annulus(spec: &DiskAnnulus) -> Result<Mesh> {
    let DiskAnnulus {
        r_gamma,
        r_outer,
        h,
        ref eval,
    } = *spec;
    if !(r_gamma > 0.0 && r_outer > r_gamma) {
        return Err(Error::Config(format!(
            "disk-in-annulus requires 0 < r_gamma < r_outer, got {r_gamma} and {r_outer}"
        )));
    }
    if !(h > 0.0 && h < r_outer) {
        return Err(Error::Config(format!("invalid element size h = {h}")));
    }

    // Radial grid: uniform inside and outside, with a ring exactly at r_gamma.
    let n_in = (r_gamma / h).round().max(2.0) as usize;
    let n_out = ((r_outer - r_gamma) / h).round().max(1.0) as usize;
    let mut radii = Vec::with_capacity(n_in + n_out + 1);
    for k in 0..=n_in {
        radii.push(r_gamma * k as f64 / n_in as f64);
    }
    for k in 1..=n_out {
        radii.push(r_gamma + (r_outer - r_gamma) * k as f64 / n_out as f64);
    }

    // Nodes ring by ring; counts are multiples of 8 so four-fold symmetric
    // source layouts see a symmetric mesh.
    let ring_count = |r: f64| -> usize {
        if r == 0.0 {
            1
        } else {
            (((TAU * r / h) / 8.0).ceil() as usize).max(1) * 8
        }
    };
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(radii.len());
    for &r in &radii {
        let m = ring_count(r);
        let mut ring = Vec::with_capacity(m);
        if r == 0.0 {
            ring.push(nodes.len());
            nodes.push([0.0, 0.0]);
        } else {
            for i in 0..m {
                let th = TAU * i as f64 / m as f64;
                ring.push(nodes.len());
                nodes.push([r * th.cos(), r * th.sin()]);
            }
        }
        rings.push(ring);
    }

    let mut tris: Vec<[usize; 3]> = Vec::new();
    for w in radii.windows(2).enumerate() {
        let (k, _) = w;
        let inner = &rings[k];
        let outer = &rings[k + 1];
        if inner.len() == 1 {
            // Center fan.
            let c = inner[0];
            let m = outer.len();
            for j in 0..m {
                tris.push([c, outer[j], outer[(j + 1) % m]]);
            }
        } else {
            band(&mut tris, inner, outer);
        }
    }

    let gamma2 = r_gamma * r_gamma;
    let triangles = tris
        .into_iter()
        .map(|t| {
            let c = [
                (nodes[t[0]][0] + nodes[t[1]][0] + nodes[t[2]][0]) / 3.0,
                (nodes[t[0]][1] + nodes[t[1]][1] + nodes[t[2]][1]) / 3.0,
            ];
            let tag = if c[0] * c[0] + c[1] * c[1] < gamma2 {
                if in_eval(eval, c) {
                    RegionTag::Eval
                } else {
                    RegionTag::Air
                }
            } else {
                RegionTag::Iron
            };
            Triangle { nodes: t, tag }
        })
        .collect();

    Mesh::build(nodes, triangles)
}

/// Triangulates the band between two concentric node rings by advancing
/// around both circles in angular order. Produces `|inner| + |outer|`
/// triangles for any combination of ring sizes.
fn band(tris: &mut Vec<[usize; 3]>, inner: &[usize], outer: &[usize]) {
    let (ma, mb) = (inner.len(), outer.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < ma || j < mb {
        let a_next = (i + 1) as f64 / ma as f64;
        let b_next = (j + 1) as f64 / mb as f64;
        let advance_inner = if i == ma {
            false
        } else if j == mb {
            true
        } else {
            a_next <= b_next
        };
        if advance_inner {
            tris.push([inner[i % ma], outer[j % mb], inner[(i + 1) % ma]]);
            i += 1;
        } else {
            tris.push([inner[i % ma], outer[j % mb], outer[(j + 1) % mb]]);
            j += 1;
        }
    }
}

/// Structured grid over the iron rectangle with grid lines forced through
/// the air-rectangle boundary and any extra breakpoints; each cell is split
/// into two triangles.
pub fn rect_in_rect(spec: &RectInRect) -> Result<Mesh> {
    let RectInRect {
        air_w,
        air_h,
        iron_w,
        iron_h,
        h,
        ref breaks_x,
        ref breaks_y,
        ref eval,
    } = *spec;
    if !(air_w > 0.0 && air_h > 0.0 && iron_w > air_w && iron_h > air_h) {
        return Err(Error::Config(
            "rect-in-rect requires 0 < air rectangle < iron rectangle".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("invalid element size h = {h}")));
    }

    let xs = axis_grid(iron_w, air_w, breaks_x, h)?;
    let ys = axis_grid(iron_h, air_h, breaks_y, h)?;

    let nx = xs.len();
    let mut nodes = Vec::with_capacity(nx * ys.len());
    for &y in &ys {
        for &x in &xs {
            nodes.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * nx + i;

    let (hw, hh) = (air_w / 2.0, air_h / 2.0);
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ys.len() - 1));
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let quad = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            for t in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                let c = [
                    (nodes[t[0]][0] + nodes[t[1]][0] + nodes[t[2]][0]) / 3.0,
                    (nodes[t[0]][1] + nodes[t[1]][1] + nodes[t[2]][1]) / 3.0,
                ];
                let tag = if c[0].abs() < hw && c[1].abs() < hh {
                    if in_eval(eval, c) {
                        RegionTag::Eval
                    } else {
                        RegionTag::Air
                    }
                } else {
                    RegionTag::Iron
                };
                triangles.push(Triangle { nodes: t, tag });
            }
        }
    }

    Mesh::build(nodes, triangles)
}

/// Symmetric 1D grid over `[-outer/2, outer/2]` passing exactly through
/// `±inner/2` and all breakpoints, with spacing at most `h` per segment.
fn axis_grid(outer: f64, inner: f64, breaks: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut marks = vec![-outer / 2.0, -inner / 2.0, inner / 2.0, outer / 2.0];
    for &b in breaks {
        if b.abs() > outer / 2.0 + 1e-12 {
            return Err(Error::Config(format!(
                "breakpoint {b} outside the iron rectangle"
            )));
        }
        marks.push(b);
    }
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut grid = Vec::new();
    for w in marks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        for k in 0..n {
            grid.push(a + (b - a) * k as f64 / n as f64);
        }
    }
    grid.push(*marks.last().unwrap());
    Ok(grid)
}
