//! Conforming 2D triangle meshes with tagged regions.
//!
//! A mesh partitions the computational domain into an air region `Va`
//! (which holds the line currents) and an iron region `Vi`, separated by the
//! interface curve Γ. An optional `eval` tag overlays part of the air region
//! and marks the evaluation sub-domain used by energy and error norms.

mod generate;
mod interface;
mod msh;

pub use generate::{disk_in_annulus, rect_in_rect, DiskAnnulus, RectInRect};
pub use interface::InterfaceCurve;
pub use msh::{Role, TagMap};

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Element tag as read from the mesh file. `Eval` overlays air: those
/// triangles belong to `Va` for solving and to the evaluation sub-domain for
/// post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    Air,
    Iron,
    Eval,
}

impl RegionTag {
    /// True for triangles that belong to the air region `Va`.
    pub fn is_air(self) -> bool {
        matches!(self, RegionTag::Air | RegionTag::Eval)
    }
}

/// Identifies one of the node/element subsets a finite-element space lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionId {
    All,
    Air,
    Iron,
}

/// Node and element subset for one region, with its own contiguous dof
/// numbering (`dof = position in `nodes``).
#[derive(Debug, Clone)]
pub struct Region {
    pub id: RegionId,
    /// Mesh node ids, ascending.
    pub nodes: Vec<usize>,
    /// Mesh node id -> region dof, -1 if the node is not in the region.
    node_dof: Vec<i64>,
    /// Triangle ids in the region.
    pub tris: Vec<usize>,
}

impl Region {
    pub fn n_dofs(&self) -> usize {
        self.nodes.len()
    }

    /// Region dof of a mesh node, if the node belongs to the region.
    pub fn dof_of(&self, node: usize) -> Option<usize> {
        match self.node_dof[node] {
            -1 => None,
            d => Some(d as usize),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub tag: RegionTag,
}

/// Result of point location: containing triangle and barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Located {
    pub tri: usize,
    pub bary: [f64; 3],
}

/// Barycentric coordinates may undershoot zero by this much and the point is
/// still accepted as inside (boundary tolerance).
pub const BARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<Triangle>,
    areas: Vec<f64>,
    /// Edges incident to exactly one triangle (outer boundary and hole
    /// boundaries), as sorted node pairs.
    boundary_edges: Vec<[usize; 2]>,
    regions: Vec<Region>,
    /// Sorted-edge -> adjacent triangles (at most two on a conforming mesh).
    edge_tris: BTreeMap<(usize, usize), [i64; 2]>,
    max_edge: f64,
    mean_edge: f64,
    buckets: Buckets,
}

#[derive(Debug, Clone)]
struct Buckets {
    x0: f64,
    y0: f64,
    inv_dx: f64,
    inv_dy: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl Mesh {
    /// Builds and validates a mesh from raw node and triangle lists.
    /// Clockwise triangles are reoriented; degenerate ones are rejected.
    pub fn build(nodes: Vec<[f64; 2]>, mut triangles: Vec<Triangle>) -> Result<Mesh> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::MeshValidation("mesh has no nodes or triangles".into()));
        }
        for t in &triangles {
            for &n in &t.nodes {
                if n >= nodes.len() {
                    return Err(Error::MeshValidation(format!(
                        "triangle references node {n} out of {}",
                        nodes.len()
                    )));
                }
            }
        }

        let mut areas = Vec::with_capacity(triangles.len());
        for t in triangles.iter_mut() {
            let a = signed_area(&nodes, t.nodes);
            if a < 0.0 {
                t.nodes.swap(1, 2);
            }
            let a = a.abs();
            if a < 1e-16 {
                return Err(Error::MeshValidation(format!(
                    "degenerate triangle {:?} with area {a:.3e}",
                    t.nodes
                )));
            }
            areas.push(a);
        }

        let mut edge_tris: BTreeMap<(usize, usize), [i64; 2]> = BTreeMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = t.nodes[k];
                let b = t.nodes[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let entry = edge_tris.entry(key).or_insert([-1, -1]);
                if entry[0] == -1 {
                    entry[0] = ti as i64;
                } else if entry[1] == -1 {
                    entry[1] = ti as i64;
                } else {
                    return Err(Error::MeshValidation(format!(
                        "edge ({},{}) shared by more than two triangles",
                        key.0, key.1
                    )));
                }
            }
        }

        let boundary_edges: Vec<[usize; 2]> = edge_tris
            .iter()
            .filter(|(_, t)| t[1] == -1)
            .map(|(&(a, b), _)| [a, b])
            .collect();

        let mut max_edge = 0.0f64;
        let mut sum_edge = 0.0f64;
        for (&(a, b), _) in &edge_tris {
            let l = dist(nodes[a], nodes[b]);
            max_edge = max_edge.max(l);
            sum_edge += l;
        }
        let mean_edge = sum_edge / edge_tris.len() as f64;

        let regions = vec![
            make_region(RegionId::All, &nodes, &triangles, |_| true),
            make_region(RegionId::Air, &nodes, &triangles, |t| t.is_air()),
            make_region(RegionId::Iron, &nodes, &triangles, |t| t == RegionTag::Iron),
        ];

        let buckets = Buckets::build(&nodes, &triangles);

        Ok(Mesh {
            nodes,
            triangles,
            areas,
            boundary_edges,
            regions,
            edge_tris,
            max_edge,
            mean_edge,
            buckets,
        })
    }

    /// Reads an ASCII Gmsh MSH 2.2 file.
    pub fn load_msh(path: &std::path::Path, tags: &TagMap) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_msh_str(&text, tags)
    }

    pub fn from_msh_str(text: &str, tags: &TagMap) -> Result<Mesh> {
        msh::parse(text, tags)
    }

    /// Writes the mesh as ASCII Gmsh MSH 2.2 with the built-in physical names
    /// (`air`, `iron`, `eval`, `outer_boundary`).
    pub fn write_msh(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_msh_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_msh_string(&self) -> String {
        msh::write(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangle(&self, i: usize) -> &Triangle {
        &self.triangles[i]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn area(&self, tri: usize) -> f64 {
        self.areas[tri]
    }

    pub fn centroid(&self, tri: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[tri].nodes;
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn region(&self, id: RegionId) -> &Region {
        match id {
            RegionId::All => &self.regions[0],
            RegionId::Air => &self.regions[1],
            RegionId::Iron => &self.regions[2],
        }
    }

    pub fn region_area(&self, id: RegionId) -> f64 {
        self.region(id).tris.iter().map(|&t| self.areas[t]).sum()
    }

    /// Triangles whose tag is `Eval`.
    pub fn eval_tris(&self) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].tag == RegionTag::Eval)
            .collect()
    }

    /// Boundary edges (incident to exactly one triangle), sorted node pairs.
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Nodes on the domain boundary, ascending and unique.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_edges.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Adjacent triangles of a sorted edge, -1 entries when absent.
    pub(crate) fn edge_adjacency(&self) -> &BTreeMap<(usize, usize), [i64; 2]> {
        &self.edge_tris
    }

    /// Longest edge in the mesh; the abscissa of the convergence studies.
    pub fn mesh_length(&self) -> f64 {
        self.max_edge
    }

    /// Mean edge length, recorded as a study diagnostic.
    pub fn mean_edge_length(&self) -> f64 {
        self.mean_edge
    }

    /// P1 gradient pieces of a triangle: `(grad_1, grad_2, grad_3)` of the
    /// barycentric basis, each already divided by 2A.
    pub fn gradients(&self, tri: usize) -> [[f64; 2]; 3] {
        let [i, j, k] = self.triangles[tri].nodes;
        let (p1, p2, p3) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        let inv2a = 0.5 / self.areas[tri];
        [
            [(p2[1] - p3[1]) * inv2a, (p3[0] - p2[0]) * inv2a],
            [(p3[1] - p1[1]) * inv2a, (p1[0] - p3[0]) * inv2a],
            [(p1[1] - p2[1]) * inv2a, (p2[0] - p1[0]) * inv2a],
        ]
    }

    /// Locates the triangle containing a point.
    pub fn locate(&self, p: [f64; 2]) -> Result<Located> {
        if let Some(loc) = self.buckets.locate(self, p) {
            return Ok(loc);
        }
        Err(Error::PointOutsideDomain(p[0], p[1]))
    }

    /// Barycentric coordinates of `p` in triangle `tri` (may be negative).
    pub fn barycentric(&self, tri: usize, p: [f64; 2]) -> [f64; 3] {
        let [i, j, k] = self.triangles[tri].nodes;
        let (p1, p2, p3) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        let inv2a = 0.5 / self.areas[tri];
        let l1 = ((p2[1] - p3[1]) * (p[0] - p3[0]) + (p3[0] - p2[0]) * (p[1] - p3[1])) * inv2a;
        let l2 = ((p3[1] - p1[1]) * (p[0] - p3[0]) + (p1[0] - p3[0]) * (p[1] - p3[1])) * inv2a;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// Extracts the air/iron interface. See [`InterfaceCurve`].
    pub fn extract_interface(&self) -> Result<InterfaceCurve> {
        interface::extract(self)
    }
}

fn make_region(
    id: RegionId,
    nodes: &[[f64; 2]],
    triangles: &[Triangle],
    pred: impl Fn(RegionTag) -> bool,
) -> Region {
    let mut in_region = vec![false; nodes.len()];
    let mut tris = Vec::new();
    for (ti, t) in triangles.iter().enumerate() {
        if pred(t.tag) {
            tris.push(ti);
            for &n in &t.nodes {
                in_region[n] = true;
            }
        }
    }
    let mut region_nodes = Vec::new();
    let mut node_dof = vec![-1i64; nodes.len()];
    for (n, &inside) in in_region.iter().enumerate() {
        if inside {
            node_dof[n] = region_nodes.len() as i64;
            region_nodes.push(n);
        }
    }
    Region {
        id,
        nodes: region_nodes,
        node_dof,
        tris,
    }
}

pub(crate) fn signed_area(nodes: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let (a, b, c) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Buckets {
    fn build(nodes: &[[f64; 2]], triangles: &[Triangle]) -> Buckets {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in nodes {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let n = ((triangles.len() as f64 / 2.0).sqrt() as usize).clamp(1, 512);
        let (nx, ny) = (n, n);
        let dx = ((x1 - x0) / nx as f64).max(1e-300);
        let dy = ((y1 - y0) / ny as f64).max(1e-300);
        let mut cells = vec![Vec::new(); nx * ny];
        for (ti, t) in triangles.iter().enumerate() {
            let (mut bx0, mut by0) = (f64::INFINITY, f64::INFINITY);
            let (mut bx1, mut by1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &nidx in &t.nodes {
                let p = nodes[nidx];
                bx0 = bx0.min(p[0]);
                by0 = by0.min(p[1]);
                bx1 = bx1.max(p[0]);
                by1 = by1.max(p[1]);
            }
            let i0 = (((bx0 - x0) / dx) as usize).min(nx - 1);
            let i1 = (((bx1 - x0) / dx) as usize).min(nx - 1);
            let j0 = (((by0 - y0) / dy) as usize).min(ny - 1);
            let j1 = (((by1 - y0) / dy) as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    cells[j * nx + i].push(ti as u32);
                }
            }
        }
        Buckets {
            x0,
            y0,
            inv_dx: 1.0 / dx,
            inv_dy: 1.0 / dy,
            nx,
            ny,
            cells,
        }
    }

    fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<Located> {
        let fi = (p[0] - self.x0) * self.inv_dx;
        let fj = (p[1] - self.y0) * self.inv_dy;
        if fi < -0.5 || fj < -0.5 {
            return None;
        }
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = (fj.max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(f64, Located)> = None;
        for &ti in &self.cells[j * self.nx + i] {
            let bary = mesh.barycentric(ti as usize, p);
            let worst = bary[0].min(bary[1]).min(bary[2]);
            if worst >= -BARY_TOL {
                return Some(Located {
                    tri: ti as usize,
                    bary,
                });
            }
            if best.map_or(true, |(w, _)| worst > w) {
                best = Some((
                    worst,
                    Located {
                        tri: ti as usize,
                        bary,
                    },
                ));
            }
        }
        // Tolerate points marginally outside the hull of the candidate cell
        // (curved boundaries represented by polygons).
        if let Some((w, loc)) = best {
            if w >= -1e-6 {
                return Some(loc);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        // Two triangles, air below the diagonal, iron above.
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tris = vec![
            Triangle {
                nodes: [0, 1, 2],
                tag: RegionTag::Air,
            },
            Triangle {
                nodes: [0, 2, 3],
                tag: RegionTag::Iron,
            },
        ];
        Mesh::build(nodes, tris).unwrap()
    }

    #[test]
    fn orientation_fixed_on_build() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        // Clockwise input.
        let tris = vec![Triangle {
            nodes: [0, 2, 1],
            tag: RegionTag::Iron,
        }];
        let m = Mesh::build(nodes, tris).unwrap();
        assert!(signed_area(m.nodes(), m.triangle(0).nodes) > 0.0);
        assert!((m.area(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let tris = vec![Triangle {
            nodes: [0, 1, 2],
            tag: RegionTag::Air,
        }];
        assert!(Mesh::build(nodes, tris).is_err());
    }

    #[test]
    fn mesh_length_is_max_edge() {
        let nodes = vec![[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]];
        let tris = vec![Triangle {
            nodes: [0, 1, 2],
            tag: RegionTag::Air,
        }];
        let m = Mesh::build(nodes, tris).unwrap();
        // 3-4-5 triangle.
        assert!((m.mesh_length() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn mesh_length_uniform_grid() {
        let m = rect_in_rect(&RectInRect {
            air_w: 1.0,
            air_h: 1.0,
            iron_w: 2.0,
            iron_h: 2.0,
            h: 0.1,
            breaks_x: vec![],
            breaks_y: vec![],
            eval: None,
        })
        .unwrap();
        // Hypotenuse of a 0.1 x 0.1 cell.
        assert!((m.mesh_length() - 0.1 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn refinement_halves_mesh_length() {
        let spec = |h| RectInRect {
            air_w: 1.0,
            air_h: 1.0,
            iron_w: 2.0,
            iron_h: 2.0,
            h,
            breaks_x: vec![],
            breaks_y: vec![],
            eval: None,
        };
        let coarse = rect_in_rect(&spec(0.25)).unwrap();
        let fine = rect_in_rect(&spec(0.125)).unwrap();
        // Oracle: exhaustive scan over triangle edges.
        let scan = |m: &Mesh| {
            let mut h = 0.0f64;
            for t in m.triangles() {
                for k in 0..3 {
                    h = h.max(dist(m.node(t.nodes[k]), m.node(t.nodes[(k + 1) % 3])));
                }
            }
            h
        };
        assert!((coarse.mesh_length() - scan(&coarse)).abs() < 1e-15);
        assert!((fine.mesh_length() - scan(&fine)).abs() < 1e-15);
        assert!((fine.mesh_length() / coarse.mesh_length() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn locate_centroid_and_nodes() {
        let m = unit_square();
        let c = m.centroid(0);
        let loc = m.locate(c).unwrap();
        assert_eq!(loc.tri, 0);
        for b in loc.bary {
            assert!((b - 1.0 / 3.0).abs() < 1e-12);
        }
        // A mesh node: one barycentric coordinate equals 1.
        let loc = m.locate([0.0, 0.0]).unwrap();
        let max = loc.bary.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locate_agrees_with_brute_force() {
        let m = rect_in_rect(&RectInRect {
            air_w: 1.0,
            air_h: 0.6,
            iron_w: 2.0,
            iron_h: 1.4,
            h: 0.23,
            breaks_x: vec![],
            breaks_y: vec![],
            eval: None,
        })
        .unwrap();
        // Deterministic pseudo-random points in the domain.
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let p = [(next() - 0.5) * 1.98, (next() - 0.5) * 1.38];
            let loc = m.locate(p).unwrap();
            // Brute force: any triangle containing p.
            let mut found = false;
            for ti in 0..m.n_triangles() {
                let b = m.barycentric(ti, p);
                if b.iter().all(|&x| x >= -BARY_TOL) {
                    found = true;
                    break;
                }
            }
            assert!(found);
            let b = m.barycentric(loc.tri, p);
            assert!(b.iter().all(|&x| x >= -1e-6));
            assert!((b[0] + b[1] + b[2] - 1.0).abs() < 1e-12);
        }
        assert!(m.locate([5.0, 5.0]).is_err());
    }

    #[test]
    fn region_partition() {
        let m = unit_square();
        assert_eq!(m.region(RegionId::Air).tris, vec![0]);
        assert_eq!(m.region(RegionId::Iron).tris, vec![1]);
        assert_eq!(m.region(RegionId::All).n_dofs(), 4);
        assert_eq!(m.region(RegionId::Air).n_dofs(), 3);
        assert!((m.region_area(RegionId::All) - 1.0).abs() < 1e-15);
    }
}
