//! Derivatives of the curvatures with respect to the radii, assembled over
//! directed edges so that loops and multiple edges need no special cases.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polytope::{GeneralizedPolytope, Pyramid};
use crate::trig::SINE_FLOOR;

fn checked(s: f64) -> Result<f64> {
    if s.abs() < SINE_FLOOR {
        Err(Error::NearDegenerate(s))
    } else {
        Ok(s)
    }
}

/// `∂κ_i/∂r_j` for all vertices.
pub fn assemble_jacobian(p: &GeneralizedPolytope) -> Result<DMatrix<f64>> {
    let pyr = p.pyramids()?;
    assemble_from_pyramids(p, &pyr)
}

pub fn assemble_from_pyramids(p: &GeneralizedPolytope, pyr: &[Pyramid]) -> Result<DMatrix<f64>> {
    let mesh = &p.mesh;
    let n = mesh.vertex_count;
    let mut j = DMatrix::zeros(n, n);
    // Every half-edge h stands for the directed edge e from its tail a to its
    // head b; its twin stands for -e. The dihedral angles on the two sides of
    // the edge are read from the two pyramids.
    for h in 0..mesh.twin.len() {
        let t = mesh.twin[h];
        let (f, s) = (h / 3, h % 3);
        let (a, b) = (mesh.tail(h), mesh.head(h));
        let phi = pyr[f].phi[s];
        let c = (pyr[f].cot_alpha[s] + pyr[t / 3].cot_alpha[t % 3]) / checked(pyr[f].sin_rho[s])?;
        let w = c / (mesh.edge_length(h) * checked(pyr[f].sin_rho_rev[s])?);
        // ∂ρ_e/∂r_b and ∂ρ_e/∂r_a; for a loop both land on the diagonal
        j[(a, b)] += w;
        j[(a, a)] -= w * phi.cos();
    }
    Ok(j)
}

#[derive(Debug, Clone)]
pub struct RankProfile {
    pub rank: usize,
    pub corank: usize,
    /// Singular values in decreasing order.
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of the numerical kernel, one column per vector.
    pub kernel: DMatrix<f64>,
}

/// Rank, corank and kernel of `j` with singular values below
/// `tol · σ_max` treated as zero.
pub fn rank_profile(j: &DMatrix<f64>, tol: f64) -> RankProfile {
    let sym = (j + j.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let singular_values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].abs()).collect();
    let cut = tol * singular_values.first().copied().unwrap_or(0.0);
    let zero: Vec<usize> = order.iter().copied().filter(|&k| eig.eigenvalues[k].abs() <= cut).collect();
    let kernel = DMatrix::from_fn(j.nrows(), zero.len(), |r, c| eig.eigenvectors[(r, zero[c])]);
    RankProfile {
        rank: j.nrows() - zero.len(),
        corank: zero.len(),
        singular_values,
        kernel,
    }
}

/// `σ_max / σ_min`.
pub fn condition_number(j: &DMatrix<f64>) -> f64 {
    let sv = j.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Dense row-major text dump.
pub fn dump_matrix(j: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..j.nrows() {
        let row: Vec<String> = (0..j.ncols()).map(|c| format!("{:.17e}", j[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
