//! P1 finite-element machinery for the 2D curl-curl problem, which reduces
//! to `-div(ν grad Az) = Jz` for the out-of-plane component. The standard
//! edge functions of the 2D problem are equivalent to nodal hats on `Az`, so
//! the assembled spaces are scalar; no gauge is needed in 2D.

mod assemble;
mod eval;
mod newton;
pub mod sparse;

pub use assemble::{
    assemble_interface_coupling, assemble_mass, assemble_newton, assemble_stiffness,
    assemble_surface_current_rhs, assemble_trace_mass,
};
pub use eval::{
    energy, energy_of, eval_at, l2_error, locate_in, norm_l2, Domain, FeField, FieldEval, FnField,
    Quantity,
};
pub use newton::{solve_nonlinear, NewtonOptions, NewtonReport};
pub use sparse::{solve_saddle, solve_spd, Csr, SaddleSolution, SparseSystem, TripletMatrix};

use crate::mesh::{Mesh, RegionId};

/// Nodal coefficients of `Az` (T·m) on one mesh region, one value per region
/// node, in region dof order.
#[derive(Debug, Clone)]
pub struct FEFunction {
    pub region: RegionId,
    pub values: Vec<f64>,
}

impl FEFunction {
    pub fn zeros(mesh: &Mesh, region: RegionId) -> FEFunction {
        FEFunction {
            region,
            values: vec![0.0; mesh.region(region).n_dofs()],
        }
    }

    pub fn from_values(region: RegionId, values: Vec<f64>) -> FEFunction {
        FEFunction { region, values }
    }

    /// Value at a mesh node, if the node belongs to the function's region.
    pub fn node_value(&self, mesh: &Mesh, node: usize) -> Option<f64> {
        mesh.region(self.region).dof_of(node).map(|d| self.values[d])
    }
}

/// Scalar coefficients on the interface Γ: tangential-field traces (A/m) or
/// surface current densities, one value per interface node in trace dof
/// order. The sign convention follows the owning interface's stored tangent.
#[derive(Debug, Clone)]
pub struct TraceFunction {
    pub values: Vec<f64>,
}

impl TraceFunction {
    pub fn zeros(n: usize) -> TraceFunction {
        TraceFunction {
            values: vec![0.0; n],
        }
    }
}
