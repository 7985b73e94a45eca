//! Symmetric positive-definite systems `M_S u = b` with
//! `M = diag(a) − W` restricted to a vertex subset `S`, where `W` holds
//! the edge conductances and self-loops. Every harmonic-function problem of
//! the killed walk reduces to one of these; `M_S` is positive definite as
//! soon as every component of `S` leaks to the ghost or to `V ∖ S`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::graph::KilledWeightedGraph;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Largest system solved by dense Cholesky factorization.
    pub dense_limit: usize,
    /// Relative residual target of the iterative solver.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dense_limit: 4000, tolerance: 1e-12, max_iterations: 200_000 }
    }
}

enum Backend {
    Dense(Cholesky<f64, Dyn>),
    Sparse { diag: Vec<f64>, rows: Vec<Vec<(usize, f64)>> },
}

pub(crate) struct ReducedSystem {
    /// Global vertex index of each local unknown.
    indices: Vec<usize>,
    backend: Backend,
    config: SolverConfig,
}

impl ReducedSystem {
    pub fn new(graph: &KilledWeightedGraph, in_set: &[bool], config: SolverConfig) -> Result<Self> {
        let n = graph.vertex_count();
        let indices: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
        let mut local = vec![None; n];
        for (l, &g) in indices.iter().enumerate() {
            local[g] = Some(l);
        }
        let m = indices.len();
        let diag: Vec<f64> = indices
            .iter()
            .map(|&g| graph.total_weights()[g] - graph.self_loop_weight(g.into()))
            .collect();
        let rows: Vec<Vec<(usize, f64)>> = indices
            .iter()
            .map(|&g| {
                graph
                    .neighbors(g.into())
                    .iter()
                    .filter_map(|&(y, w)| local[y].map(|ly| (ly, -w)))
                    .collect()
            })
            .collect();
        let backend = if m <= config.dense_limit {
            let mut mat = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                mat[(i, i)] = diag[i];
                for &(j, v) in &rows[i] {
                    mat[(i, j)] = v;
                }
            }
            let chol = Cholesky::new(mat).ok_or_else(|| {
                Error::Solver("reduced system is not positive definite (singular)".into())
            })?;
            Backend::Dense(chol)
        } else {
            Backend::Sparse { diag, rows }
        };
        Ok(ReducedSystem { indices, backend, config })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(rhs.len(), self.len());
        if self.indices.is_empty() {
            return Ok(Vec::new());
        }
        match &self.backend {
            Backend::Dense(chol) => Ok(chol.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()),
            Backend::Sparse { diag, rows } => pcg(diag, rows, rhs, &self.config),
        }
    }

    /// Solves and scatters the result into a global vector (zero outside `S`).
    pub fn solve_global(&self, rhs: &[f64], n: usize) -> Result<Vec<f64>> {
        let sol = self.solve(rhs)?;
        let mut out = vec![0.0; n];
        for (l, &g) in self.indices.iter().enumerate() {
            out[g] = sol[l];
        }
        Ok(out)
    }
}

fn apply(diag: &[f64], rows: &[Vec<(usize, f64)>], x: &[f64], out: &mut [f64]) {
    for i in 0..diag.len() {
        let mut s = diag[i] * x[i];
        for &(j, v) in &rows[i] {
            s += v * x[j];
        }
        out[i] = s;
    }
}

/// Jacobi-preconditioned conjugate gradient.
fn pcg(diag: &[f64], rows: &[Vec<(usize, f64)>], b: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    let m = diag.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; m];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..cfg.max_iterations {
        apply(diag, rows, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::Solver("conjugate gradient breakdown: matrix not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= cfg.tolerance * bnorm {
            return Ok(x);
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!(
        "conjugate gradient did not reach relative residual {} within {} iterations",
        cfg.tolerance, cfg.max_iterations
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_lattice_box;

    #[test]
    fn dense_and_iterative_backends_agree() {
        let g = make_lattice_box(3, 3).unwrap();
        let n = g.vertex_count();
        let mut mask = vec![true; n];
        mask[n / 2] = false;
        let dense = ReducedSystem::new(&g, &mask, SolverConfig::default()).unwrap();
        let sparse = ReducedSystem::new(&g, &mask, SolverConfig { dense_limit: 0, ..Default::default() }).unwrap();
        let rhs: Vec<f64> = (0..dense.len()).map(|i| g.kill_weights()[dense.indices()[i]]).collect();
        let a = dense.solve(&rhs).unwrap();
        let b = sparse.solve(&rhs).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "max deviation {err}");
    }
}
