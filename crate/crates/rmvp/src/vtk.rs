//! Legacy ASCII VTK writer (UNSTRUCTURED_GRID) with point data `Az` and
//! cell data `B`. Formatting is fixed-precision so identical runs produce
//! identical bytes.

use crate::error::{Error, Result};
use crate::fem::{FEFunction, FeField, FieldEval};
use crate::mesh::{Mesh, RegionId};
use std::fmt::Write as _;

/// Writes the given P1 field on its region's submesh.
pub fn write_fe_field(path: &std::path::Path, mesh: &Mesh, f: &FEFunction, title: &str) -> Result<()> {
    let reg = mesh.region(f.region);
    let fe = FeField { mesh, f };
    let az_of = |node: usize| f.node_value(mesh, node).unwrap_or(0.0);
    let b_of = |tri: usize| {
        let c = mesh.centroid(tri);
        fe.az_b(c).map(|(_, b)| b).unwrap_or([0.0, 0.0])
    };
    let text = render(mesh, &reg.nodes, &reg.tris, az_of, b_of, title);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes an arbitrary field sampled at nodes (Az) and element centroids (B)
/// over a region.
pub fn write_field_eval(
    path: &std::path::Path,
    mesh: &Mesh,
    field: &impl FieldEval,
    region: RegionId,
    title: &str,
) -> Result<()> {
    let reg = mesh.region(region);
    let az_of = |node: usize| field.az_b(mesh.node(node)).map(|(az, _)| az).unwrap_or(0.0);
    let b_of = |tri: usize| {
        field
            .az_b(mesh.centroid(tri))
            .map(|(_, b)| b)
            .unwrap_or([0.0, 0.0])
    };
    let text = render(mesh, &reg.nodes, &reg.tris, az_of, b_of, title);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn render(
    mesh: &Mesh,
    nodes: &[usize],
    tris: &[usize],
    az_of: impl Fn(usize) -> f64,
    b_of: impl Fn(usize) -> [f64; 2],
    title: &str,
) -> String {
    let mut renumber = vec![usize::MAX; mesh.n_nodes()];
    for (i, &n) in nodes.iter().enumerate() {
        renumber[n] = i;
    }

    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{title}");
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", nodes.len());
    for &n in nodes {
        let p = mesh.node(n);
        let _ = writeln!(s, "{:.9e} {:.9e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", tris.len(), 4 * tris.len());
    for &t in tris {
        let [a, b, c] = mesh.triangle(t).nodes;
        let _ = writeln!(s, "3 {} {} {}", renumber[a], renumber[b], renumber[c]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", tris.len());
    for _ in tris {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", nodes.len());
    s.push_str("SCALARS Az double 1\nLOOKUP_TABLE default\n");
    for &n in nodes {
        let _ = writeln!(s, "{:.9e}", az_of(n));
    }
    let _ = writeln!(s, "CELL_DATA {}", tris.len());
    s.push_str("VECTORS B double\n");
    for &t in tris {
        let b = b_of(t);
        let _ = writeln!(s, "{:.9e} {:.9e} 0", b[0], b[1]);
    }
    s
}
