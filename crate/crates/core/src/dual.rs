//! Generalized convex polyhedra given by a simplicial fan and altitudes, the
//! dual of a generalized convex polytope, face areas, volume and their mixed
//! forms.
//!
//! The fan shares its triangulation with the polytope: fan vertex `i` is the
//! normal of face `i` of the polyhedron. Edge quantities are stored per
//! half-edge and refer to the direction from the tail.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polytope::GeneralizedPolytope;
use crate::triangulation::CornerMesh;
use crate::trig;

const FAN_SINE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DualPolyhedron {
    pub mesh: CornerMesh,
    /// Angle between the normals at the two ends of every half-edge.
    pub phi: Vec<f64>,
    pub h: Vec<f64>,
    /// Fan angle at every corner.
    pub omega: Vec<[f64; 3]>,
    pub sin_phi: Vec<f64>,
    pub sin_omega: Vec<[f64; 3]>,
    pub cos_omega: Vec<[f64; 3]>,
}

/// Quantities derived from the altitudes.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Fan angle at every corner.
    pub omega: Vec<[f64; 3]>,
    /// `h_ij` for the half-edge from `i` to `j`.
    pub h_edge: Vec<f64>,
    /// Per corner: the orthoscheme parameter towards the next and towards
    /// the previous corner of the face.
    pub h_corner: Vec<[[f64; 2]; 3]>,
    /// Dual edge length per half-edge.
    pub l_star: Vec<f64>,
    pub area: Vec<f64>,
    pub volume: f64,
}

fn checked(s: f64) -> Result<f64> {
    if s.abs() < FAN_SINE_FLOOR {
        Err(Error::NearDegenerate(s))
    } else {
        Ok(s)
    }
}

/// The polyhedron dual to `p`: fan angles are the apex angles of the lateral
/// triangles and altitudes are inverse radii.
pub fn dualize(p: &GeneralizedPolytope) -> Result<DualPolyhedron> {
    let pyr = p.pyramids()?;
    let phi = (0..p.mesh.twin.len()).map(|h| pyr[h / 3].phi[h % 3]).collect();
    // The fan angles are the dihedral angles at the radial edges. Taken from
    // the pyramids, with their sines, they keep their precision near flat
    // limits, where φ and ω approach π.
    Ok(DualPolyhedron {
        mesh: p.mesh.clone(),
        phi,
        h: p.r.iter().map(|r| 1.0 / r).collect(),
        omega: pyr.iter().map(|py| py.omega).collect(),
        sin_phi: (0..p.mesh.twin.len()).map(|h| pyr[h / 3].sin_phi[h % 3]).collect(),
        sin_omega: pyr.iter().map(|py| py.sin_omega).collect(),
        cos_omega: pyr.iter().map(|py| py.cos_omega).collect(),
    })
}

impl DualPolyhedron {
    /// A fan given by its edge angles; the fan angles follow by spherical
    /// trigonometry.
    pub fn from_fan(mesh: CornerMesh, phi: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let omega = (0..mesh.face_count())
            .map(|f| Ok(trig::spherical_angles(phi[3 * f], phi[3 * f + 1], phi[3 * f + 2])?.0))
            .collect::<Result<Vec<[f64; 3]>>>()?;
        let sin_phi = phi.iter().map(|x| x.sin()).collect();
        let sin_omega = omega.iter().map(|w| w.map(f64::sin)).collect();
        let cos_omega = omega.iter().map(|w| w.map(f64::cos)).collect();
        Ok(DualPolyhedron { mesh, phi, h, omega, sin_phi, sin_omega, cos_omega })
    }

    /// All derived quantities for the altitudes `x` over this fan.
    pub fn decompose_with(&self, x: &[f64]) -> Result<Decomposition> {
        let mesh = &self.mesh;
        let omega = self.omega.clone();
        let mut h_edge = vec![0.0; mesh.twin.len()];
        for (e, he) in h_edge.iter_mut().enumerate() {
            let s = checked(self.sin_phi[e])?;
            *he = (x[mesh.head(e)] - x[mesh.tail(e)] * self.phi[e].cos()) / s;
        }
        let mut h_corner = vec![[[0.0; 2]; 3]; mesh.face_count()];
        for f in 0..mesh.face_count() {
            for c in 0..3 {
                let (s, cos) = (checked(self.sin_omega[f][c])?, self.cos_omega[f][c]);
                // towards the next corner along side c + 2, towards the
                // previous one along the reverse of side c + 1
                let to_next = h_edge[3 * f + (c + 2) % 3];
                let to_prev = h_edge[mesh.twin[3 * f + (c + 1) % 3]];
                h_corner[f][c] = [(to_prev - to_next * cos) / s, (to_next - to_prev * cos) / s];
            }
        }
        let mut l_star = vec![0.0; mesh.twin.len()];
        for (e, ls) in l_star.iter_mut().enumerate() {
            let (f, s) = (e / 3, e % 3);
            let t = mesh.twin[e];
            let (g, r) = (t / 3, t % 3);
            *ls = h_corner[f][(s + 1) % 3][0] + h_corner[g][(r + 2) % 3][1];
        }
        let mut area = vec![0.0; mesh.vertex_count];
        for e in 0..mesh.twin.len() {
            area[mesh.tail(e)] += 0.5 * h_edge[e] * l_star[e];
        }
        let volume = area.iter().zip(x).map(|(a, h)| h * a).sum::<f64>() / 3.0;
        Ok(Decomposition { omega, h_edge, h_corner, l_star, area, volume })
    }

    pub fn decompose(&self) -> Result<Decomposition> {
        self.decompose_with(&self.h)
    }

    /// `F_i(x, y)`.
    pub fn mixed_area(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        let (dx, dy) = (self.decompose_with(x)?, self.decompose_with(y)?);
        Ok((0..self.mesh.twin.len())
            .filter(|&e| self.mesh.tail(e) == i)
            .map(|e| 0.5 * dx.h_edge[e] * dy.l_star[e])
            .sum())
    }

    /// `vol(x, y, z)`.
    pub fn mixed_volume(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        let (dy, dz) = (self.decompose_with(y)?, self.decompose_with(z)?);
        let mut total = 0.0;
        for e in 0..self.mesh.twin.len() {
            total += x[self.mesh.tail(e)] * 0.5 * dy.h_edge[e] * dz.l_star[e];
        }
        Ok(total / 3.0)
    }

    /// `∂F_i/∂h_j`, the Hessian of the volume.
    pub fn volume_hessian(&self) -> Result<DMatrix<f64>> {
        let d = self.decompose()?;
        let n = self.mesh.vertex_count;
        let mut m = DMatrix::zeros(n, n);
        for e in 0..self.mesh.twin.len() {
            let (i, j) = (self.mesh.tail(e), self.mesh.head(e));
            let w = d.l_star[e] / checked(self.sin_phi[e])?;
            m[(i, j)] += w;
            m[(i, i)] -= w * self.phi[e].cos();
        }
        Ok(m)
    }

    /// Edges around vertex `i` in rotation order as half-edges leaving `i`,
    /// and the fan angle between consecutive ones: corner `m` of the star
    /// lies between edge `m` and edge `m + 1`.
    pub fn link(&self, i: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        let omega = &self.omega;
        let star = &self.mesh.vertex_stars()[i];
        let mut edges = Vec::with_capacity(star.len());
        let mut angles = Vec::with_capacity(star.len());
        for &(f, c) in star {
            edges.push(self.mesh.twin[3 * f + (c + 1) % 3]);
            angles.push(omega[f][c]);
        }
        Ok((edges, angles))
    }

    /// The projection `x ↦ (x_ij)` onto the link coordinates of vertex `i`.
    pub fn link_projection(&self, i: usize) -> Result<DMatrix<f64>> {
        let (edges, _) = self.link(i)?;
        let mut p = DMatrix::zeros(edges.len(), self.mesh.vertex_count);
        for (m, &e) in edges.iter().enumerate() {
            let s = checked(self.sin_phi[e])?;
            p[(m, self.mesh.head(e))] += 1.0 / s;
            p[(m, i)] -= self.phi[e].cos() / s;
        }
        Ok(p)
    }

    /// Matrix of the face area of vertex `i` as a quadratic form in its link
    /// coordinates.
    pub fn link_form(&self, i: usize) -> Result<DMatrix<f64>> {
        let (_, angles) = self.link(i)?;
        link_form_from_angles(&angles)
    }
}

/// Matrix of the area of a generalized polygon as a quadratic form in the
/// altitudes of its sides, given the angles between consecutive normals.
pub fn link_form_from_angles(angles: &[f64]) -> Result<DMatrix<f64>> {
    let d = angles.len();
    let mut b = DMatrix::zeros(d, d);
    for (m, &w) in angles.iter().enumerate() {
        let s = checked(w.sin())?;
        let next = (m + 1) % d;
        b[(m, m)] -= 0.5 * w.cos() / s;
        b[(next, next)] -= 0.5 * w.cos() / s;
        b[(m, next)] += 0.5 / s;
        b[(next, m)] += 0.5 / s;
    }
    Ok(b)
}

/// Per vertex: whether the dual face area is positive, and the residual of
/// `Σ (ω − γ) = δ − κ` over the corners at the vertex, where `γ` is the base
/// angle recovered from the vertex figure of each pyramid.
pub fn face_positivity_check(p: &GeneralizedPolytope) -> Result<(Vec<bool>, Vec<f64>)> {
    let dual = dualize(p)?;
    let d = dual.decompose()?;
    let pyr = p.pyramids()?;
    let rep = p.report_unchecked(&pyr);
    let cone = p.mesh.cone_angles();
    let mut sum = vec![0.0; p.mesh.vertex_count];
    for (f, py) in pyr.iter().enumerate() {
        for c in 0..3 {
            let to_next = py.rho[(c + 2) % 3];
            let to_prev = py.rho_rev[(c + 1) % 3];
            let gamma = trig::spherical_third_side(to_next, to_prev, py.omega[c]);
            sum[p.mesh.vertex[f][c]] += py.omega[c] - gamma;
        }
    }
    let residual = (0..sum.len())
        .map(|i| (sum[i] - (2.0 * PI - cone[i] - rep.kappa[i])).abs())
        .collect();
    Ok((d.area.iter().map(|&a| a > 0.0).collect(), residual))
}
