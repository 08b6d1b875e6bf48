//! Field evaluation, magnetic energy and L2 norms/errors over regions or
//! disk sub-domains.

use super::FEFunction;
use crate::error::Result;
use crate::materials::MaterialMap;
use crate::mesh::{Located, Mesh, RegionId};

/// Anything that reports `(Az, B)` at a point.
pub trait FieldEval {
    fn az_b(&self, p: [f64; 2]) -> Result<(f64, [f64; 2])>;
}

/// A P1 function bound to its mesh.
pub struct FeField<'a> {
    pub mesh: &'a Mesh,
    pub f: &'a FEFunction,
}

impl FieldEval for FeField<'_> {
    fn az_b(&self, p: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let loc = locate_in(self.mesh, self.f.region, p)?;
        Ok(eval_at(self.mesh, self.f, &loc))
    }
}

/// Analytic field from a closure.
pub struct FnField<F: Fn([f64; 2]) -> (f64, [f64; 2])>(pub F);

impl<F: Fn([f64; 2]) -> (f64, [f64; 2])> FieldEval for FnField<F> {
    fn az_b(&self, p: [f64; 2]) -> Result<(f64, [f64; 2])> {
        Ok((self.0)(p))
    }
}

/// Locates `p` in a triangle belonging to the given region (points on the
/// region boundary resolve to a region-side element).
pub fn locate_in(mesh: &Mesh, region: RegionId, p: [f64; 2]) -> Result<Located> {
    let loc = mesh.locate(p)?;
    let in_region = |tri: usize| match region {
        RegionId::All => true,
        RegionId::Air => mesh.triangle(tri).tag.is_air(),
        RegionId::Iron => !mesh.triangle(tri).tag.is_air(),
    };
    if in_region(loc.tri) {
        return Ok(loc);
    }
    // The located element is on the other side of an interface; try the
    // neighbors sharing its closest edge(s).
    let nodes = mesh.triangle(loc.tri).nodes;
    for k in 0..3 {
        let (a, b) = (nodes[k], nodes[(k + 1) % 3]);
        let key = (a.min(b), a.max(b));
        if let Some(adj) = mesh.edge_adjacency().get(&key) {
            for &t in adj {
                if t >= 0 && in_region(t as usize) {
                    let bary = mesh.barycentric(t as usize, p);
                    if bary.iter().all(|&x| x >= -1e-9) {
                        return Ok(Located { tri: t as usize, bary });
                    }
                }
            }
        }
    }
    Err(crate::error::Error::PointOutsideDomain(p[0], p[1]))
}

/// `(Az, B)` of a P1 field at a located point: barycentric interpolation for
/// `Az`; `B = (dAz/dy, -dAz/dx)`, constant per element.
pub fn eval_at(mesh: &Mesh, f: &FEFunction, loc: &Located) -> (f64, [f64; 2]) {
    let reg = mesh.region(f.region);
    let nodes = mesh.triangle(loc.tri).nodes;
    let grads = mesh.gradients(loc.tri);
    let mut az = 0.0;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for k in 0..3 {
        let a = f.values[reg.dof_of(nodes[k]).expect("field region covers element")];
        az += a * loc.bary[k];
        gx += a * grads[k][0];
        gy += a * grads[k][1];
    }
    (az, [gy, -gx])
}

/// Element selection for norms, energies and error maps. Disk and annulus
/// membership is decided by the element centroid.
#[derive(Debug, Clone)]
pub enum Domain {
    Region(RegionId),
    /// Elements whose centroid lies inside the disk.
    Disk { center: [f64; 2], radius: f64 },
    /// Elements whose centroid lies in `r0 <= r < r1` around the center.
    Annulus {
        center: [f64; 2],
        r0: f64,
        r1: f64,
    },
    /// Elements carrying the `eval` mesh tag.
    EvalTag,
}

impl Domain {
    pub fn tris(&self, mesh: &Mesh) -> Vec<usize> {
        match self {
            Domain::Region(r) => mesh.region(*r).tris.clone(),
            Domain::Disk { center, radius } => (0..mesh.n_triangles())
                .filter(|&t| {
                    let c = mesh.centroid(t);
                    let (dx, dy) = (c[0] - center[0], c[1] - center[1]);
                    dx * dx + dy * dy < radius * radius
                })
                .collect(),
            Domain::Annulus { center, r0, r1 } => (0..mesh.n_triangles())
                .filter(|&t| {
                    let c = mesh.centroid(t);
                    let (dx, dy) = (c[0] - center[0], c[1] - center[1]);
                    let r2 = dx * dx + dy * dy;
                    r2 >= r0 * r0 && r2 < r1 * r1
                })
                .collect(),
            Domain::EvalTag => mesh.eval_tris(),
        }
    }
}

/// Magnetic energy per unit length `½ Σ ν_e |B_e|² A_e` of a P1 field,
/// exact per element (co-energy-consistent `½ ∫ ν B²` convention for
/// nonlinear materials).
pub fn energy(mesh: &Mesh, f: &FEFunction, mats: &MaterialMap, dom: &Domain) -> f64 {
    let reg = mesh.region(f.region);
    let mut w = 0.0;
    for t in dom.tris(mesh) {
        if !reg.tris.contains(&t) && f.region != RegionId::All {
            continue;
        }
        let grads = mesh.gradients(t);
        let mut gx = 0.0;
        let mut gy = 0.0;
        let mut ok = true;
        for (k, &node) in mesh.triangle(t).nodes.iter().enumerate() {
            match reg.dof_of(node) {
                Some(d) => {
                    gx += f.values[d] * grads[k][0];
                    gy += f.values[d] * grads[k][1];
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let b2 = gx * gx + gy * gy;
        let nu = mats.for_tag(mesh.triangle(t).tag).nu(b2);
        w += 0.5 * nu * b2 * mesh.area(t);
    }
    w
}

/// Midpoint-rule energy of an arbitrary field (used for composed totals).
pub fn energy_of(
    mesh: &Mesh,
    field: &impl FieldEval,
    mats: &MaterialMap,
    dom: &Domain,
) -> Result<f64> {
    let mut w = 0.0;
    for t in dom.tris(mesh) {
        let c = mesh.centroid(t);
        let (_, b) = field.az_b(c)?;
        let b2 = b[0] * b[0] + b[1] * b[1];
        let nu = mats.for_tag(mesh.triangle(t).tag).nu(b2);
        w += 0.5 * nu * b2 * mesh.area(t);
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Az,
    B,
}

/// L2 norm of `f` over the selected elements of `mesh`. `B` uses the element
/// midpoint (exact for P1 fields), `Az` the degree-2 edge-midpoint rule.
pub fn norm_l2(
    f: &impl FieldEval,
    mesh: &Mesh,
    dom: &Domain,
    q: Quantity,
) -> Result<f64> {
    let mut acc = 0.0;
    for t in dom.tris(mesh) {
        acc += element_quad(mesh, t, q, |p| {
            let (az, b) = f.az_b(p)?;
            Ok(match q {
                Quantity::Az => az * az,
                Quantity::B => b[0] * b[0] + b[1] * b[1],
            })
        })?;
    }
    Ok(acc.sqrt())
}

/// Absolute and relative L2 difference between two fields over the selected
/// elements; the relative value is normalized by ‖f‖.
pub fn l2_error(
    f: &impl FieldEval,
    g: &impl FieldEval,
    mesh: &Mesh,
    dom: &Domain,
    q: Quantity,
) -> Result<(f64, f64)> {
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    for t in dom.tris(mesh) {
        diff2 += element_quad(mesh, t, q, |p| {
            let (fa, fb) = f.az_b(p)?;
            let (ga, gb) = g.az_b(p)?;
            Ok(match q {
                Quantity::Az => (fa - ga) * (fa - ga),
                Quantity::B => {
                    let (dx, dy) = (fb[0] - gb[0], fb[1] - gb[1]);
                    dx * dx + dy * dy
                }
            })
        })?;
        ref2 += element_quad(mesh, t, q, |p| {
            let (fa, fb) = f.az_b(p)?;
            Ok(match q {
                Quantity::Az => fa * fa,
                Quantity::B => fb[0] * fb[0] + fb[1] * fb[1],
            })
        })?;
    }
    let abs = diff2.sqrt();
    Ok((abs, abs / ref2.sqrt().max(1e-300)))
}

fn element_quad(
    mesh: &Mesh,
    tri: usize,
    q: Quantity,
    mut integrand: impl FnMut([f64; 2]) -> Result<f64>,
) -> Result<f64> {
    let [a, b, c] = mesh.triangle(tri).nodes;
    let (pa, pb, pc) = (mesh.node(a), mesh.node(b), mesh.node(c));
    let area = mesh.area(tri);
    match q {
        Quantity::B => {
            let mid = [
                (pa[0] + pb[0] + pc[0]) / 3.0,
                (pa[1] + pb[1] + pc[1]) / 3.0,
            ];
            Ok(area * integrand(nudge_inside(mid, pa))?)
        }
        Quantity::Az => {
            let mids = [
                [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0],
                [(pb[0] + pc[0]) / 2.0, (pb[1] + pc[1]) / 2.0],
                [(pc[0] + pa[0]) / 2.0, (pc[1] + pa[1]) / 2.0],
            ];
            let mut s = 0.0;
            for m in mids {
                s += integrand(nudge_inside(m, pa))?;
            }
            Ok(area * s / 3.0)
        }
    }
}

/// Pulls a quadrature point a hair toward a vertex so that edge-midpoints of
/// boundary elements stay inside the located triangle under roundoff.
fn nudge_inside(p: [f64; 2], toward: [f64; 2]) -> [f64; 2] {
    let eps = 1e-12;
    [
        p[0] + (toward[0] - p[0]) * eps,
        p[1] + (toward[1] - p[1]) * eps,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{MaterialModel, MU_0};
    use crate::mesh::{disk_in_annulus, DiskAnnulus};

    fn interp(mesh: &Mesh, g: impl Fn([f64; 2]) -> f64) -> FEFunction {
        FEFunction::from_values(
            RegionId::All,
            mesh.nodes().iter().map(|&p| g(p)).collect(),
        )
    }

    #[test]
    fn linear_fields_have_constant_curl() {
        let mesh = disk_in_annulus(&DiskAnnulus {
            r_gamma: 0.5,
            r_outer: 1.0,
            h: 0.2,
            eval: None,
        })
        .unwrap();
        let fx = interp(&mesh, |p| p[0]);
        let fy = interp(&mesh, |p| p[1]);
        for p in [[0.1, 0.2], [-0.4, 0.3], [0.7, -0.1]] {
            let (az, b) = FeField { mesh: &mesh, f: &fx }.az_b(p).unwrap();
            assert!((az - p[0]).abs() < 1e-12);
            assert!((b[0] - 0.0).abs() < 1e-12 && (b[1] + 1.0).abs() < 1e-12);
            let (_, b) = FeField { mesh: &mesh, f: &fy }.az_b(p).unwrap();
            assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12);
        }
    }

    #[test]
    fn energy_of_concentric_annulus_matches_formula() {
        // Nodal interpolant of the free-space Az of a centered line current;
        // energy in a <= r <= b compared with mu0 I² ln(b/a) / 4π.
        let mesh = disk_in_annulus(&DiskAnnulus {
            r_gamma: 0.5,
            r_outer: 1.0,
            h: 0.02,
            eval: None,
        })
        .unwrap();
        let current = 100.0;
        let az = |p: [f64; 2]| {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt().max(1e-9);
            MU_0 * current / (2.0 * std::f64::consts::PI) * (1.0 / r).ln()
        };
        let f = interp(&mesh, az);
        let mats = MaterialMap::new(MaterialModel::linear(1.0), MaterialModel::linear(1.0));
        let (ra, rb) = (0.5, 1.0);
        let w_outer = energy(
            &mesh,
            &f,
            &mats,
            &Domain::Disk {
                center: [0.0, 0.0],
                radius: rb + 1.0,
            },
        );
        let w_inner = energy(
            &mesh,
            &f,
            &mats,
            &Domain::Disk {
                center: [0.0, 0.0],
                radius: ra,
            },
        );
        let w = w_outer - w_inner;
        let exact = MU_0 * current * current * (rb / ra).ln() / (4.0 * std::f64::consts::PI);
        assert!(
            (w - exact).abs() / exact < 0.01,
            "w={w}, exact={exact}, rel={}",
            (w - exact).abs() / exact
        );
        // Doubling the current quadruples the energy (quadratic form).
        let f2 = FEFunction::from_values(
            RegionId::All,
            f.values.iter().map(|v| 2.0 * v).collect(),
        );
        let w2 = energy(
            &mesh,
            &f2,
            &mats,
            &Domain::Disk {
                center: [0.0, 0.0],
                radius: rb + 1.0,
            },
        ) - energy(
            &mesh,
            &f2,
            &mats,
            &Domain::Disk {
                center: [0.0, 0.0],
                radius: ra,
            },
        );
        assert!((w2 - 4.0 * w).abs() / w2 < 1e-12);
        // Zero field: zero energy.
        let z = FEFunction::zeros(&mesh, RegionId::All);
        assert_eq!(energy(&mesh, &z, &mats, &Domain::Region(RegionId::All)), 0.0);
    }

    #[test]
    fn l2_error_trivials_and_p1_rate() {
        let mesh = disk_in_annulus(&DiskAnnulus {
            r_gamma: 0.5,
            r_outer: 1.0,
            h: 0.1,
            eval: None,
        })
        .unwrap();
        let f = interp(&mesh, |p| p[0] * p[0] + p[1] * p[1]);
        let fe = FeField { mesh: &mesh, f: &f };
        let (abs, rel) = l2_error(&fe, &fe, &mesh, &Domain::Region(RegionId::All), Quantity::Az)
            .unwrap();
        assert!(abs == 0.0 && rel == 0.0);
        let zero = FnField(|_p| (0.0, [0.0, 0.0]));
        let (abs_z, rel_z) =
            l2_error(&fe, &zero, &mesh, &Domain::Region(RegionId::All), Quantity::Az).unwrap();
        let nrm = norm_l2(&fe, &mesh, &Domain::Region(RegionId::All), Quantity::Az).unwrap();
        assert!((abs_z - nrm).abs() < 1e-12);
        assert!((rel_z - 1.0).abs() < 1e-12);

        // Manufactured Az = x² + y² against its P1 interpolant: O(h²) in Az.
        let exact = FnField(|p: [f64; 2]| {
            (p[0] * p[0] + p[1] * p[1], [2.0 * p[1], -2.0 * p[0]])
        });
        let mut errs = Vec::new();
        for h in [0.2, 0.1, 0.05] {
            let m = disk_in_annulus(&DiskAnnulus {
                r_gamma: 0.5,
                r_outer: 1.0,
                h,
                eval: None,
            })
            .unwrap();
            let fi = FEFunction::from_values(
                RegionId::All,
                m.nodes().iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect(),
            );
            let fe = FeField { mesh: &m, f: &fi };
            let (_, rel) =
                l2_error(&exact, &fe, &m, &Domain::Region(RegionId::All), Quantity::Az).unwrap();
            errs.push(rel);
        }
        let rate1 = (errs[0] / errs[1]).log2();
        let rate2 = (errs[1] / errs[2]).log2();
        assert!(rate1 > 1.6 && rate2 > 1.6, "rates {rate1} {rate2}");
    }
}
