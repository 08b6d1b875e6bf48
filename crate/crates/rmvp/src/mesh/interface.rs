//! Extraction of the oriented air/iron interface curve Γ.
//!
//! Interface edges are the edges shared by exactly one air and one iron
//! triangle. They are chained into closed loops, directed so that the air
//! region lies to the left of the traversal; the unit normal `n = (t_y, -t_x)`
//! then points from air into iron, and the tangent is `n` rotated by +90°.

use super::{dist, Mesh};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// One directed interface edge.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceEdge {
    /// Directed node pair (air on the left).
    pub nodes: [usize; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub len: f64,
}

/// Oriented interface between the air and iron regions, one or more closed
/// loops. Trace dofs are numbered along the concatenated loops.
#[derive(Debug, Clone)]
pub struct InterfaceCurve {
    /// Directed edges, grouped per loop.
    pub edges: Vec<InterfaceEdge>,
    /// Edge index ranges per loop.
    pub loop_ranges: Vec<std::ops::Range<usize>>,
    /// Mesh node ids in traversal order (trace dof -> mesh node).
    pub nodes: Vec<usize>,
    node_dof: HashMap<usize, usize>,
    /// Unit tangent per trace dof (mean of the adjacent edge tangents).
    pub node_tangent: Vec<[f64; 2]>,
    /// Arc-length coordinate per trace dof, measured from its loop start.
    pub node_arc: Vec<f64>,
    /// Half the summed length of the two adjacent edges, per trace dof.
    pub lumped_len: Vec<f64>,
    pub total_len: f64,
    /// True when the stored tangents follow the standard convention
    /// (air on the left). `flipped()` negates it.
    pub standard_orientation: bool,
}

impl InterfaceCurve {
    pub fn n_dofs(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_loops(&self) -> usize {
        self.loop_ranges.len()
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.node_dof.get(&node).copied()
    }

    /// Sign converting stored-tangent quantities to the standard convention.
    pub fn orientation_sign(&self) -> f64 {
        if self.standard_orientation {
            1.0
        } else {
            -1.0
        }
    }

    /// The same curve with tangents and normals negated. Used to check that
    /// the composed field does not depend on the orientation convention.
    pub fn flipped(&self) -> InterfaceCurve {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.nodes.swap(0, 1);
            e.tangent = [-e.tangent[0], -e.tangent[1]];
            e.normal = [-e.normal[0], -e.normal[1]];
        }
        for t in &mut out.node_tangent {
            *t = [-t[0], -t[1]];
        }
        out.standard_orientation = !self.standard_orientation;
        out
    }
}

pub fn extract(mesh: &Mesh) -> Result<InterfaceCurve> {
    // Directed interface edges: orient as they appear in their air triangle
    // (counter-clockwise element => air on the left of the edge).
    let mut outgoing: HashMap<usize, (usize, usize)> = HashMap::new(); // start node -> (end node, air tri)
    let mut n_edges = 0usize;
    for (&(a, b), tris) in mesh.edge_adjacency() {
        if tris[1] == -1 {
            continue;
        }
        let (t0, t1) = (tris[0] as usize, tris[1] as usize);
        let tag0 = mesh.triangle(t0).tag;
        let tag1 = mesh.triangle(t1).tag;
        if tag0.is_air() == tag1.is_air() {
            continue;
        }
        let air_tri = if tag0.is_air() { t0 } else { t1 };
        let nodes = mesh.triangle(air_tri).nodes;
        // Find the directed occurrence of (a, b) within the air triangle.
        let mut dir = None;
        for k in 0..3 {
            let (u, v) = (nodes[k], nodes[(k + 1) % 3]);
            if (u == a && v == b) || (u == b && v == a) {
                dir = Some((u, v));
                break;
            }
        }
        let (u, v) = dir.expect("adjacent triangle must contain the edge");
        if outgoing.insert(u, (v, air_tri)).is_some() {
            return Err(Error::Interface(format!(
                "non-manifold interface at node {u}"
            )));
        }
        n_edges += 1;
    }

    if n_edges == 0 {
        return Err(Error::Interface(
            "no edges between the air and iron regions".into(),
        ));
    }

    // Chain into loops; start each loop at its smallest node id so the
    // result is stable across reloads.
    let mut starts: Vec<usize> = outgoing.keys().copied().collect();
    starts.sort_unstable();
    let mut visited: HashMap<usize, bool> = HashMap::new();

    let mut edges: Vec<InterfaceEdge> = Vec::with_capacity(n_edges);
    let mut loop_ranges = Vec::new();
    let mut nodes_order: Vec<usize> = Vec::new();

    for &start in &starts {
        if visited.get(&start).copied().unwrap_or(false) {
            continue;
        }
        let lo = edges.len();
        let mut cur = start;
        loop {
            visited.insert(cur, true);
            nodes_order.push(cur);
            let &(next, _air_tri) = outgoing
                .get(&cur)
                .ok_or_else(|| Error::Interface(format!("open interface chain at node {cur}")))?;
            let (pa, pb) = (mesh.node(cur), mesh.node(next));
            let len = dist(pa, pb);
            let tangent = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
            let normal = [tangent[1], -tangent[0]];
            edges.push(InterfaceEdge {
                nodes: [cur, next],
                tangent,
                normal,
                len,
            });
            cur = next;
            if cur == start {
                break;
            }
            if visited.get(&cur).copied().unwrap_or(false) {
                return Err(Error::Interface(format!(
                    "interface chain re-enters node {cur} without closing its loop"
                )));
            }
        }
        loop_ranges.push(lo..edges.len());
    }

    if edges.len() != n_edges {
        return Err(Error::Interface("open interface chain".into()));
    }

    // Orientation sanity: the normal must point from the air centroid toward
    // the iron centroid for every edge.
    for e in &edges {
        let key = (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]));
        let tris = mesh.edge_adjacency()[&key];
        let (t0, t1) = (tris[0] as usize, tris[1] as usize);
        let (air, iron) = if mesh.triangle(t0).tag.is_air() {
            (t0, t1)
        } else {
            (t1, t0)
        };
        let ca = mesh.centroid(air);
        let ci = mesh.centroid(iron);
        let d = [ci[0] - ca[0], ci[1] - ca[1]];
        if e.normal[0] * d[0] + e.normal[1] * d[1] <= 0.0 {
            return Err(Error::Interface(
                "interface normal does not point from air into iron".into(),
            ));
        }
    }

    // Per-node data.
    let mut node_dof = HashMap::with_capacity(nodes_order.len());
    for (i, &n) in nodes_order.iter().enumerate() {
        node_dof.insert(n, i);
    }
    let mut node_tangent = vec![[0.0f64; 2]; nodes_order.len()];
    let mut lumped_len = vec![0.0f64; nodes_order.len()];
    let mut node_arc = vec![0.0f64; nodes_order.len()];
    for r in &loop_ranges {
        let mut arc = 0.0;
        for ei in r.clone() {
            let e = &edges[ei];
            let d0 = node_dof[&e.nodes[0]];
            let d1 = node_dof[&e.nodes[1]];
            node_tangent[d0][0] += e.tangent[0];
            node_tangent[d0][1] += e.tangent[1];
            node_tangent[d1][0] += e.tangent[0];
            node_tangent[d1][1] += e.tangent[1];
            lumped_len[d0] += 0.5 * e.len;
            lumped_len[d1] += 0.5 * e.len;
            node_arc[d0] = arc;
            arc += e.len;
        }
    }
    for t in &mut node_tangent {
        let n = (t[0] * t[0] + t[1] * t[1]).sqrt();
        if n > 0.0 {
            *t = [t[0] / n, t[1] / n];
        }
    }
    let total_len = edges.iter().map(|e| e.len).sum();

    Ok(InterfaceCurve {
        edges,
        loop_ranges,
        nodes: nodes_order,
        node_dof,
        node_tangent,
        node_arc,
        lumped_len,
        total_len,
        standard_orientation: true,
    })
}
