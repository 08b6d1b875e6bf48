//! Free-space source field of out-of-plane line currents.
//!
//! A line current `I` at `r_k` contributes
//! `Az(r) = μ0 I / 2π · ln(1/|r - r_k|)` and
//! `H(r) = I / 2π · (-(y - y_k), x - x_k) / |r - r_k|²`;
//! sets of currents superpose in list order. Kernel evaluations are counted
//! so the runtime study can compare formulations machine-independently.

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, solve_spd, FEFunction, SparseSystem, TraceFunction};
use crate::materials::MU_0;
use crate::mesh::{InterfaceCurve, Mesh, RegionId};
use std::sync::atomic::{AtomicU64, Ordering};

/// Squared distance below which an evaluation counts as singular.
const SINGULAR_DIST2: f64 = 1e-24;

/// One out-of-plane line current: position (m) and signed current (A),
/// positive out of the plane.
#[derive(Debug, Clone, Copy, serde::Deserialize, serde::Serialize)]
pub struct LineCurrent {
    pub x: f64,
    pub y: f64,
    pub current: f64,
}

/// Monotone evaluation counters. `kernel_evals` counts source-target pairs.
#[derive(Debug, Default)]
pub struct EvalCounters {
    az_targets: AtomicU64,
    h_targets: AtomicU64,
    kernel_evals: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct CounterSnapshot {
    pub az_targets: u64,
    pub h_targets: u64,
    pub kernel_evals: u64,
}

/// A set of line currents with superposition semantics.
#[derive(Debug, Default)]
pub struct SourceSet {
    sources: Vec<LineCurrent>,
    counters: EvalCounters,
}

impl SourceSet {
    pub fn new(sources: Vec<LineCurrent>) -> SourceSet {
        SourceSet {
            sources,
            counters: EvalCounters::default(),
        }
    }

    /// Parses CSV with header `x_m,y_m,I_A`.
    pub fn from_csv_str(text: &str) -> Result<SourceSet> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty sources CSV".into()))?;
        if header.trim() != "x_m,y_m,I_A" {
            return Err(Error::Config(format!(
                "sources CSV header must be 'x_m,y_m,I_A', got '{header}'"
            )));
        }
        let mut sources = Vec::new();
        for (i, l) in lines.enumerate() {
            let mut it = l.split(',');
            let mut field = |name: &str| -> Result<f64> {
                it.next()
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| {
                        Error::Config(format!("bad {name} in sources CSV row {}", i + 2))
                    })
            };
            let x = field("x_m")?;
            let y = field("y_m")?;
            let current = field("I_A")?;
            if !current.is_finite() {
                return Err(Error::Config(format!(
                    "non-finite current in sources CSV row {}",
                    i + 2
                )));
            }
            sources.push(LineCurrent { x, y, current });
        }
        Ok(SourceSet::new(sources))
    }

    pub fn sources(&self) -> &[LineCurrent] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Snapshot of the evaluation counters.
    pub fn eval_count(&self) -> CounterSnapshot {
        CounterSnapshot {
            az_targets: self.counters.az_targets.load(Ordering::Relaxed),
            h_targets: self.counters.h_targets.load(Ordering::Relaxed),
            kernel_evals: self.counters.kernel_evals.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counters(&self) {
        self.counters.az_targets.store(0, Ordering::Relaxed);
        self.counters.h_targets.store(0, Ordering::Relaxed);
        self.counters.kernel_evals.store(0, Ordering::Relaxed);
    }

    fn count(&self, az_targets: u64, h_targets: u64) {
        let kernels = (az_targets + h_targets) * self.sources.len() as u64;
        self.counters.az_targets.fetch_add(az_targets, Ordering::Relaxed);
        self.counters.h_targets.fetch_add(h_targets, Ordering::Relaxed);
        self.counters.kernel_evals.fetch_add(kernels, Ordering::Relaxed);
    }

    fn az_raw(&self, p: [f64; 2]) -> Result<f64> {
        let mut acc = 0.0;
        for s in &self.sources {
            let (dx, dy) = (p[0] - s.x, p[1] - s.y);
            let d2 = dx * dx + dy * dy;
            if d2 < SINGULAR_DIST2 {
                return Err(Error::SingularEvaluation { x: p[0], y: p[1] });
            }
            // ln(1/|d|) = -ln(d²)/2, avoiding the square root.
            acc += s.current * (-0.5) * d2.ln();
        }
        Ok(MU_0 / (2.0 * std::f64::consts::PI) * acc)
    }

    fn h_raw(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let mut hx = 0.0;
        let mut hy = 0.0;
        for s in &self.sources {
            let (dx, dy) = (p[0] - s.x, p[1] - s.y);
            let d2 = dx * dx + dy * dy;
            if d2 < SINGULAR_DIST2 {
                return Err(Error::SingularEvaluation { x: p[0], y: p[1] });
            }
            hx -= s.current * dy / d2;
            hy += s.current * dx / d2;
        }
        let c = 1.0 / (2.0 * std::f64::consts::PI);
        Ok([c * hx, c * hy])
    }

    /// Source potential `Az` (T·m) at one point.
    pub fn az_at(&self, p: [f64; 2]) -> Result<f64> {
        self.count(1, 0);
        self.az_raw(p)
    }

    /// Source magnetic field strength `H` (A/m) at one point.
    pub fn h_at(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        self.count(0, 1);
        self.h_raw(p)
    }

    /// `Az` at many points. With `workers > 1` the target loop runs on a
    /// thread pool; per-target sums stay in source order, so results are
    /// bitwise identical for any worker count.
    pub fn az_many(&self, pts: &[[f64; 2]], workers: usize) -> Result<Vec<f64>> {
        self.count(pts.len() as u64, 0);
        run_batch(pts, workers, |p| self.az_raw(p))
    }

    /// `H` at many points; parallel contract as [`SourceSet::az_many`].
    pub fn h_many(&self, pts: &[[f64; 2]], workers: usize) -> Result<Vec<[f64; 2]>> {
        self.count(0, pts.len() as u64);
        run_batch(pts, workers, |p| self.h_raw(p))
    }

    /// Nodal interpolation of the source potential on a mesh region:
    /// coefficient `j` is `az_at(node_j)` (the partition-of-unity projection
    /// specialized to nodal elements).
    pub fn interpolate_nodal(
        &self,
        mesh: &Mesh,
        region: RegionId,
        workers: usize,
    ) -> Result<FEFunction> {
        let reg = mesh.region(region);
        let pts: Vec<[f64; 2]> = reg.nodes.iter().map(|&n| mesh.node(n)).collect();
        let values = self.az_many(&pts, workers)?;
        Ok(FEFunction::from_values(region, values))
    }

    /// Weak L2 projection of the source potential onto the P1 space of a
    /// region: solves `M a = b` with `b_i = ∫ Az φ_i dV` by a degree-5 rule,
    /// recursively subdividing quadrature triangles that contain a source
    /// within one diameter (up to depth 6).
    pub fn project_l2(&self, mesh: &Mesh, region: RegionId, workers: usize) -> Result<FEFunction> {
        let reg = mesh.region(region);
        let mut rhs = vec![0.0f64; reg.n_dofs()];

        // Gather quadrature points and weights element by element.
        let mut pts: Vec<[f64; 2]> = Vec::new();
        let mut contrib: Vec<[(usize, f64); 3]> = Vec::new(); // dof, basis*weight per point
        for &tri in &reg.tris {
            let nodes = mesh.triangle(tri).nodes;
            let dofs = nodes.map(|n| reg.dof_of(n).expect("region node"));
            let corners = [
                mesh.node(nodes[0]),
                mesh.node(nodes[1]),
                mesh.node(nodes[2]),
            ];
            quad_points(
                &mut pts,
                &mut contrib,
                corners,
                corners,
                dofs,
                mesh.area(tri),
                self,
                0,
            );
        }
        let az = self.az_many(&pts, workers)?;
        for (k, c) in contrib.iter().enumerate() {
            for &(dof, w) in c {
                rhs[dof] += w * az[k];
            }
        }

        let mass = assemble_mass(mesh, region);
        let values = solve_spd(&SparseSystem::new(mass, rhs), 1e-12)?;
        Ok(FEFunction::from_values(region, values))
    }

    /// Tangential source field `t·H` at the interface nodes, in the stored
    /// tangent convention: the `n × Hs` part of the surface current density.
    pub fn trace_tangential_h(&self, mesh: &Mesh, interface: &InterfaceCurve) -> Result<TraceFunction> {
        let pts: Vec<[f64; 2]> = interface.nodes.iter().map(|&n| mesh.node(n)).collect();
        let h = self.h_many(&pts, 1)?;
        let values = h
            .iter()
            .zip(interface.node_tangent.iter())
            .map(|(h, t)| h[0] * t[0] + h[1] * t[1])
            .collect();
        Ok(TraceFunction { values })
    }
}

fn run_batch<T: Send + Copy + Default>(
    pts: &[[f64; 2]],
    workers: usize,
    f: impl Fn([f64; 2]) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if workers <= 1 || pts.len() < 64 {
        return pts.iter().map(|&p| f(p)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::SolverFailure(format!("thread pool: {e}")))?;
    let mut out = vec![T::default(); pts.len()];
    let chunk = pts.len().div_ceil(workers * 4).max(1);
    let err = std::sync::Mutex::new(None);
    pool.install(|| {
        rayon::scope(|s| {
            for (slot, part) in out.chunks_mut(chunk).zip(pts.chunks(chunk)) {
                let f = &f;
                let err = &err;
                s.spawn(move |_| {
                    for (o, &p) in slot.iter_mut().zip(part) {
                        match f(p) {
                            Ok(v) => *o = v,
                            Err(e) => {
                                *err.lock().unwrap() = Some(e);
                                return;
                            }
                        }
                    }
                });
            }
        })
    });
    match err.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Emits degree-5 quadrature points for `cell`, splitting it four ways
/// (up to depth 6) while any source lies within one diameter. Basis weights
/// always refer to the P1 hats of the original `parent` element.
fn quad_points(
    pts: &mut Vec<[f64; 2]>,
    contrib: &mut Vec<[(usize, f64); 3]>,
    cell: [[f64; 2]; 3],
    parent: [[f64; 2]; 3],
    dofs: [usize; 3],
    area: f64,
    sources: &SourceSet,
    depth: usize,
) {
    let edge2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let diam2 = edge2(cell[0], cell[1])
        .max(edge2(cell[1], cell[2]))
        .max(edge2(cell[2], cell[0]));
    let centroid = [
        (cell[0][0] + cell[1][0] + cell[2][0]) / 3.0,
        (cell[0][1] + cell[1][1] + cell[2][1]) / 3.0,
    ];
    let near = sources.sources.iter().any(|s| {
        let (dx, dy) = (centroid[0] - s.x, centroid[1] - s.y);
        dx * dx + dy * dy < 4.0 * diam2
    });
    if near && depth < 6 {
        let m01 = mid(cell[0], cell[1]);
        let m12 = mid(cell[1], cell[2]);
        let m20 = mid(cell[2], cell[0]);
        for child in [
            [cell[0], m01, m20],
            [m01, cell[1], m12],
            [m20, m12, cell[2]],
            [m01, m12, m20],
        ] {
            quad_points(pts, contrib, child, parent, dofs, area / 4.0, sources, depth + 1);
        }
        return;
    }
    emit_rule(pts, contrib, cell, parent, dofs, area);
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

/// 7-point degree-5 rule on `cell`, with P1 hats of `parent` as weights.
fn emit_rule(
    pts: &mut Vec<[f64; 2]>,
    contrib: &mut Vec<[(usize, f64); 3]>,
    cell: [[f64; 2]; 3],
    parent: [[f64; 2]; 3],
    dofs: [usize; 3],
    area: f64,
) {
    const A1: f64 = 0.470_142_064_105_115;
    const A2: f64 = 0.101_286_507_323_456;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506;
    const W2: f64 = 0.125_939_180_544_827;
    let rule: [([f64; 3], f64); 7] = [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([1.0 - 2.0 * A2, A2, A2], W2),
    ];
    // Parent barycentric machinery for attributing basis weights.
    let det = (parent[1][0] - parent[0][0]) * (parent[2][1] - parent[0][1])
        - (parent[2][0] - parent[0][0]) * (parent[1][1] - parent[0][1]);
    for (bc, w) in rule {
        let p = [
            bc[0] * cell[0][0] + bc[1] * cell[1][0] + bc[2] * cell[2][0],
            bc[0] * cell[0][1] + bc[1] * cell[1][1] + bc[2] * cell[2][1],
        ];
        let l1 = ((parent[1][0] - p[0]) * (parent[2][1] - p[1])
            - (parent[2][0] - p[0]) * (parent[1][1] - p[1]))
            / det;
        let l2 = ((parent[2][0] - p[0]) * (parent[0][1] - p[1])
            - (parent[0][0] - p[0]) * (parent[2][1] - p[1]))
            / det;
        let l3 = 1.0 - l1 - l2;
        pts.push(p);
        let wa = w * area;
        contrib.push([
            (dofs[0], wa * l1),
            (dofs[1], wa * l2),
            (dofs[2], wa * l3),
        ]);
    }
}
