//! Damped Newton iteration for nonlinear reluctivity, applied to a single
//! region problem `K(a) a = f` with prescribed-value constraints.

use super::sparse::{solve_spd, SparseSystem};
use super::{assemble_newton, assemble_stiffness, FEFunction};
use crate::error::{Error, Result};
use crate::materials::MaterialMap;
use crate::mesh::{Mesh, RegionId};

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Stop when the residual norm falls below `tol` times the initial one.
    pub tol: f64,
    pub max_iter: usize,
    /// Step-halvings per iteration before declaring divergence.
    pub max_halvings: usize,
    /// Relative-residual tolerance of the inner linear solves.
    pub lin_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-8,
            max_iter: 50,
            max_halvings: 10,
            lin_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Relative residual after each accepted step, starting at 1.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

fn free_norm(r: &[f64], is_fixed: &[bool]) -> f64 {
    r.iter()
        .zip(is_fixed)
        .filter(|(_, &fixed)| !fixed)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Solves `K(a) a = f` on a region with Dirichlet constraints. Linear
/// materials short-circuit to a single solve; nonlinear ones run damped
/// Newton from the zero state (line search by halving until the residual
/// decreases).
pub fn solve_nonlinear(
    mesh: &Mesh,
    region: RegionId,
    mats: &MaterialMap,
    f: &[f64],
    dirichlet: &[(usize, f64)],
    opts: &NewtonOptions,
) -> Result<(FEFunction, NewtonReport)> {
    let n = mesh.region(region).n_dofs();
    debug_assert_eq!(f.len(), n);

    let linear = mesh.region(region).tris.iter().all(|&t| {
        mats.for_tag(mesh.triangle(t).tag).is_linear()
    });

    if linear {
        let k = assemble_stiffness(mesh, region, mats, None)?;
        let mut sys = SparseSystem::new(k, f.to_vec());
        sys.constraints = dirichlet.to_vec();
        let x = solve_spd(&sys, opts.lin_tol)?;
        return Ok((
            FEFunction::from_values(region, x),
            NewtonReport {
                iterations: 1,
                residuals: vec![1.0, 0.0],
                converged: true,
            },
        ));
    }

    let mut is_fixed = vec![false; n];
    let mut a = FEFunction::zeros(mesh, region);
    for &(dof, v) in dirichlet {
        is_fixed[dof] = true;
        a.values[dof] = v;
    }

    let (_, r0) = assemble_newton(mesh, region, mats, &a, f)?;
    let norm0 = free_norm(&r0, &is_fixed).max(1e-300);
    let mut rnorm = norm0;
    let mut residual = r0;
    let mut history = vec![1.0];

    for it in 1..=opts.max_iter {
        let (jac, _) = assemble_newton(mesh, region, mats, &a, f)?;
        // Solve J δ = -r with δ = 0 on constrained dofs.
        let mut sys = SparseSystem::new(jac, residual.iter().map(|v| -v).collect());
        sys.constraints = dirichlet.iter().map(|&(d, _)| (d, 0.0)).collect();
        let delta = solve_spd(&sys, opts.lin_tol)?;

        let mut step = 1.0f64;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = a.clone();
            for i in 0..n {
                trial.values[i] += step * delta[i];
            }
            let (_, r_trial) = assemble_newton(mesh, region, mats, &trial, f)?;
            let trial_norm = free_norm(&r_trial, &is_fixed);
            if trial_norm < rnorm {
                a = trial;
                residual = r_trial;
                rnorm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                iterations: it,
                residual: rnorm / norm0,
            });
        }
        history.push(rnorm / norm0);
        if rnorm / norm0 <= opts.tol {
            return Ok((
                a,
                NewtonReport {
                    iterations: it,
                    residuals: history,
                    converged: true,
                },
            ));
        }
    }

    Err(Error::NewtonDiverged {
        iterations: opts.max_iter,
        residual: rnorm / norm0,
    })
}
