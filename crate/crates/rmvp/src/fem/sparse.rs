//! Sparse symmetric systems: triplet assembly, CSR storage, and direct
//! solves. The SPD path is a sparse Cholesky factorization; the saddle-point
//! path exploits that the interface constraint block is an invertible trace
//! mass matrix, which reduces the indefinite system to an SPD solve plus a
//! multiplier recovery, exactly equivalent to the full block solve.

use crate::error::{Error, Result};
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};

/// Triplet accumulator for a square matrix.
#[derive(Debug, Clone)]
pub struct TripletMatrix {
    pub n: usize,
    trips: Vec<(u32, u32, f64)>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> TripletMatrix {
        TripletMatrix {
            n,
            trips: Vec::new(),
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.trips.push((i as u32, j as u32, v));
    }

    /// Compresses duplicates into CSR, deterministic for fixed insertions.
    pub fn to_csr(&self) -> Csr {
        let n = self.n;
        let mut order: Vec<u32> = (0..self.trips.len() as u32).collect();
        order.sort_unstable_by_key(|&k| {
            let (i, j, _) = self.trips[k as usize];
            ((i as u64) << 32) | j as u64
        });

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<u32> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut prev: Option<(u32, u32)> = None;
        for &k in &order {
            let (i, j, v) = self.trips[k as usize];
            if prev == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_ptr[i as usize + 1] += 1;
                prev = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }
}

/// Compressed sparse rows, full (both halves of a symmetric matrix stored).
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[i] = s;
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| (self.col_idx[k] as usize, self.vals[k]))
    }

    /// Largest relative asymmetry |a_ij - a_ji| / max|a|.
    pub fn asymmetry(&self) -> f64 {
        let amax = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if amax == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j < i {
                    continue;
                }
                let vt = self
                    .row(j)
                    .find(|&(c, _)| c == i)
                    .map(|(_, v)| v)
                    .unwrap_or(0.0);
                worst = worst.max((v - vt).abs());
            }
        }
        worst / amax
    }
}

/// Symmetric system with optional prescribed-value constraints
/// (Dirichlet dofs), eliminated symmetrically before the solve.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: Csr,
    pub rhs: Vec<f64>,
    /// (dof, prescribed value); duplicates must agree.
    pub constraints: Vec<(usize, f64)>,
}

impl SparseSystem {
    pub fn new(matrix: Csr, rhs: Vec<f64>) -> SparseSystem {
        SparseSystem {
            matrix,
            rhs,
            constraints: Vec::new(),
        }
    }
}

/// Direct solve of an SPD system with constraint elimination. The factor is
/// sequential and the result deterministic for fixed inputs; the relative
/// residual of the reduced system is verified against `tol` (one step of
/// iterative refinement is applied first if needed).
pub fn solve_spd(sys: &SparseSystem, tol: f64) -> Result<Vec<f64>> {
    let n = sys.matrix.n;
    let mut fixed_val = vec![f64::NAN; n];
    for &(dof, v) in &sys.constraints {
        if dof >= n {
            return Err(Error::SolverFailure(format!(
                "constraint dof {dof} out of range {n}"
            )));
        }
        if !fixed_val[dof].is_nan() && fixed_val[dof] != v {
            return Err(Error::SolverFailure(format!(
                "conflicting constraints on dof {dof}"
            )));
        }
        fixed_val[dof] = v;
    }

    // Map free dofs to compact indices.
    let mut free_of = vec![-1i64; n];
    let mut free = Vec::with_capacity(n);
    for i in 0..n {
        if fixed_val[i].is_nan() {
            free_of[i] = free.len() as i64;
            free.push(i);
        }
    }
    let nf = free.len();
    if nf == 0 {
        return Ok((0..n).map(|i| fixed_val[i]).collect());
    }

    let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut rhs = vec![0.0f64; nf];
    for (fi, &i) in free.iter().enumerate() {
        rhs[fi] = sys.rhs[i];
        for (j, v) in sys.matrix.row(i) {
            let fj = free_of[j];
            if fj >= 0 {
                trips.push(Triplet::new(fi, fj as usize, v));
            } else {
                rhs[fi] -= v * fixed_val[j];
            }
        }
    }

    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &trips)
        .map_err(|e| Error::SolverFailure(format!("matrix build failed: {e:?}")))?;
    let chol = mat
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| Error::SolverFailure(format!("Cholesky factorization failed: {e:?}")))?;

    let b = faer::Mat::<f64>::from_fn(nf, 1, |i, _| rhs[i]);
    let mut x = chol.solve(&b);

    // Residual check with one refinement step.
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for attempt in 0..2 {
        let mut r = rhs.clone();
        for t in trips.iter() {
            r[t.row] -= t.val * x[(t.col, 0)];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm / bnorm <= tol {
            break;
        }
        if attempt == 1 {
            return Err(Error::SolverFailure(format!(
                "relative residual {:.3e} above tolerance {tol:.1e}",
                rnorm / bnorm
            )));
        }
        let rm = faer::Mat::<f64>::from_fn(nf, 1, |i, _| r[i]);
        let dx = chol.solve(&rm);
        for i in 0..nf {
            x[(i, 0)] += dx[(i, 0)];
        }
    }

    let mut out = vec![0.0f64; n];
    for i in 0..n {
        out[i] = if fixed_val[i].is_nan() {
            x[(free_of[i] as usize, 0)]
        } else {
            fixed_val[i]
        };
    }
    Ok(out)
}

/// Solution of the interface saddle-point problem
/// `[[K, C], [Cᵀ, 0]] [a; λ] = [f; g]`, where the constraint block `Cᵀ`
/// restricted to the trace dofs is the invertible trace mass matrix `M`.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub primal: Vec<f64>,
    pub multiplier: Vec<f64>,
}

/// Solves the saddle system by block elimination:
/// the constraint `M a|Γ = g` fixes the trace values, the interior unknowns
/// solve the SPD Dirichlet problem `K a = f`, and the multiplier follows from
/// the trace rows, `M λ = (f - K a)|Γ`.
///
/// `trace_dofs[j]` is the primal dof carrying trace dof `j`; `m_trace` is the
/// trace mass matrix.
pub fn solve_saddle(
    k: &Csr,
    f: &[f64],
    trace_dofs: &[usize],
    m_trace: &Csr,
    g: &[f64],
    tol: f64,
) -> Result<SaddleSolution> {
    let nt = trace_dofs.len();
    debug_assert_eq!(m_trace.n, nt);
    debug_assert_eq!(g.len(), nt);

    // Trace values from the constraint.
    let m_sys = SparseSystem::new(m_trace.clone(), g.to_vec());
    let a_trace = solve_spd(&m_sys, tol)?;

    // SPD solve with the trace prescribed.
    let mut sys = SparseSystem::new(k.clone(), f.to_vec());
    for (j, &dof) in trace_dofs.iter().enumerate() {
        sys.constraints.push((dof, a_trace[j]));
    }
    let primal = solve_spd(&sys, tol)?;

    // Multiplier from the trace rows of the primal equations.
    let mut ka = vec![0.0f64; k.n];
    k.matvec(&primal, &mut ka);
    let resid: Vec<f64> = trace_dofs
        .iter()
        .map(|&dof| f[dof] - ka[dof])
        .collect();
    let lam_sys = SparseSystem::new(m_trace.clone(), resid);
    let multiplier = solve_spd(&lam_sys, tol)?;

    Ok(SaddleSolution {
        primal,
        multiplier,
    })
}
