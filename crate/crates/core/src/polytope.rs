//! Generalized convex polytopes: a triangulation of the metric together with
//! a radius at every vertex, realized as a complex of pyramids with a common
//! apex. Curvatures at the radial edges, dihedral angles at the boundary
//! edges, and the total scalar curvature.

use std::f64::consts::PI;

use nalgebra::{Matrix5, Vector3};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::triangulation::{self, CornerMesh, FlipEvent};
use crate::trig;

/// Boundary dihedral angles may exceed `π` by at most this much.
pub const THETA_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct GeneralizedPolytope {
    pub mesh: CornerMesh,
    pub r: Vec<f64>,
    /// Low-order parts of the radii. Near flat limits the pyramid heights
    /// are below what a single double can resolve in `r² − |foot|²`.
    pub r_lo: Vec<f64>,
}

/// A pyramid over one face, in a frame where the base lies in `z = 0` with
/// corner 0 at the origin and corner 1 on the positive x-axis, and the apex
/// has positive height.
///
/// Per-side arrays are indexed by the side `s` of the face, i.e. by the
/// half-edge from corner `s + 1` (the tail) to corner `s + 2` (the head).
#[derive(Debug, Clone, Copy)]
pub struct Pyramid {
    pub base: [[f64; 3]; 3],
    pub apex: [f64; 3],
    pub altitude: f64,
    /// Angle at the tail in the lateral triangle.
    pub rho: [f64; 3],
    /// Angle at the head in the lateral triangle.
    pub rho_rev: [f64; 3],
    /// Angle at the apex in the lateral triangle.
    pub phi: [f64; 3],
    /// Dihedral angle between the base and the lateral face at side `s`.
    pub alpha: [f64; 3],
    /// Dihedral angle at the radial edge through corner `c`.
    pub omega: [f64; 3],
    // Sines and cotangents from the apex position rather than from the
    // angles: near flat limits several angles are close to 0 or π and
    // their doubles no longer resolve the distance.
    pub sin_rho: [f64; 3],
    pub sin_rho_rev: [f64; 3],
    pub sin_phi: [f64; 3],
    pub sin_omega: [f64; 3],
    pub cos_omega: [f64; 3],
    pub cot_alpha: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub kappa: Vec<f64>,
    /// Boundary dihedral angle at every half-edge (equal for twins).
    pub theta: Vec<f64>,
    /// Total scalar curvature.
    pub h: f64,
}

/// The Cayley-Menger determinant of a pyramid with base sides `lengths`
/// (side `s` opposite corner `s`) and squared lateral edges `q`.
pub fn cayley_menger(lengths: [f64; 3], q: [f64; 3]) -> f64 {
    let [a, b, c] = lengths.map(|x| x * x);
    // corners i, j, k = 0, 1, 2: l_ij = side 2, l_ik = side 1, l_jk = side 0
    #[rustfmt::skip]
    let m = Matrix5::new(
        0.0, 1.0, 1.0, 1.0, 1.0,
        1.0, 0.0, q[0], q[1], q[2],
        1.0, q[0], 0.0, c, b,
        1.0, q[1], c, 0.0, a,
        1.0, q[2], b, a, 0.0,
    );
    m.determinant()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0] - b[0], a[1] - b[1], a[2] - b[2])
}

/// `a / b` to double-double accuracy. The library's own quotient of two
/// double-doubles is only accurate to a double.
fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q = a.hi() / b.hi();
    let rest = a - b * q;
    TwoFloat::new_add(q, 0.0) + rest / b.hi()
}

type Dd3 = [TwoFloat; 3];

fn dd_cross(a: Dd3, b: Dd3) -> Dd3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dd_dot(a: Dd3, b: Dd3) -> TwoFloat {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Apex position in the base frame of [`Pyramid`], evaluated in
/// double-double arithmetic.
struct Apex {
    xy: [f64; 2],
    h2: f64,
    /// Signed distances from the foot to the sides, positive inwards.
    dist: [f64; 3],
    /// Cosines of the dihedral angles at the radial edges; zero without a
    /// pyramid.
    cos_omega: [f64; 3],
}

fn apex_split(lengths: [f64; 3], r: [f64; 3], r_lo: [f64; 3]) -> Apex {
    let dd = TwoFloat::from;
    let q = [0, 1, 2].map(|c| {
        let x = TwoFloat::new_add(r[c], r_lo[c]);
        x * x
    });
    let l = lengths.map(|x| TwoFloat::new_mul(x, x));
    let two_l2 = 2.0 * lengths[2];
    let cx = (l[1] - l[0] + l[2]) / two_l2;
    let cy = (l[1] - cx * cx).sqrt();
    // |x - p_c|² = q_c; subtracting the first equation leaves a linear system
    let x = (q[0] - q[1] + l[2]) / two_l2;
    let y = dd_div(q[0] - q[2] + l[1] - x * cx * 2.0, cy * 2.0);
    let h2 = q[0] - x * x - y * y;
    // signed distances from the foot to the sides, positive inwards
    let corners = [(dd(0.0), dd(0.0)), (dd(lengths[2]), dd(0.0)), (cx, cy)];
    let dist = [0, 1, 2].map(|s| {
        let (pa, pb) = (corners[(s + 1) % 3], corners[(s + 2) % 3]);
        let cross = (pb.0 - pa.0) * (y - pa.1) - (pb.1 - pa.1) * (x - pa.0);
        f64::from(cross / lengths[s])
    });
    let mut cos_omega = [0.0; 3];
    if h2.hi() > 0.0 {
        // outward normals of the lateral faces, the base being
        // counterclockwise seen from the apex
        let h = h2.sqrt();
        let to = |c: usize| [corners[c].0 - x, corners[c].1 - y, -h];
        let normal = [0, 1, 2].map(|s| dd_cross(to((s + 1) % 3), to((s + 2) % 3)));
        for (c, out) in cos_omega.iter_mut().enumerate() {
            let (n1, n2) = (normal[(c + 1) % 3], normal[(c + 2) % 3]);
            let norms = (dd_dot(n1, n1) * dd_dot(n2, n2)).sqrt();
            *out = -f64::from(dd_div(dd_dot(n1, n2), norms));
        }
    }
    Apex { xy: [f64::from(x), f64::from(y)], h2: f64::from(h2), dist, cos_omega }
}

/// `32 A² h²` for the pyramid over a base of area `A` with altitude `h`;
/// equals the Cayley-Menger determinant, but keeps its precision when the
/// apex is close to the base plane.
pub fn pyramid_volume_form(lengths: [f64; 3], r: [f64; 3], r_lo: [f64; 3]) -> f64 {
    let area = 0.25 * trig::quadruple_area(lengths[0], lengths[1], lengths[2]);
    32.0 * area * area * apex_split(lengths, r, r_lo).h2
}

/// Builds the pyramid with base sides `lengths` and lateral edges `r`.
pub fn solve_pyramid(lengths: [f64; 3], r: [f64; 3]) -> Result<Pyramid> {
    solve_pyramid_split(lengths, r, [0.0; 3])
}

/// As [`solve_pyramid`] with lateral edges `r + r_lo`.
pub fn solve_pyramid_split(lengths: [f64; 3], r: [f64; 3], r_lo: [f64; 3]) -> Result<Pyramid> {
    let [l0, l1, l2] = lengths;
    let area = 0.25 * trig::quadruple_area(l0, l1, l2);
    let Apex { xy: [x, y], h2, dist, cos_omega } = apex_split(lengths, r, r_lo);
    if !(h2 > 0.0) || r.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NoPyramid { face: usize::MAX, cm: 32.0 * area * area * h2 });
    }
    let cx = (l1 * l1 - l0 * l0 + l2 * l2) / (2.0 * l2);
    let cy = trig::quadruple_area(l0, l1, l2) / (2.0 * l2);
    let base = [[0.0, 0.0, 0.0], [l2, 0.0, 0.0], [cx, cy, 0.0]];
    let altitude = h2.sqrt();
    let apex = [x, y, altitude];

    let mut p = Pyramid {
        base,
        apex,
        altitude,
        rho: [0.0; 3],
        rho_rev: [0.0; 3],
        phi: [0.0; 3],
        alpha: [0.0; 3],
        omega: [0.0; 3],
        sin_rho: [0.0; 3],
        sin_rho_rev: [0.0; 3],
        sin_phi: [0.0; 3],
        sin_omega: [0.0; 3],
        cos_omega: [0.0; 3],
        cot_alpha: [0.0; 3],
    };
    // height of the lateral triangle over side s
    let slant = dist.map(|d| (h2 + d * d).sqrt());
    for s in 0..3 {
        let (a, b) = ((s + 1) % 3, (s + 2) % 3);
        let t = trig::euclidean_angles(lengths[s], r[b], r[a])?;
        p.phi[s] = t.0[0];
        p.rho[s] = t.0[1];
        p.rho_rev[s] = t.0[2];
        p.alpha[s] = altitude.atan2(dist[s]);
        p.cot_alpha[s] = dist[s] / altitude;
        p.sin_rho[s] = slant[s] / r[a];
        p.sin_rho_rev[s] = slant[s] / r[b];
        p.sin_phi[s] = lengths[s] * slant[s] / (r[a] * r[b]);
    }
    let gamma = trig::euclidean_angles(l0, l1, l2)?.0;
    for c in 0..3 {
        // law of sines in the vertex figure at base corner c
        p.sin_omega[c] = gamma[c].sin() * altitude * r[c] / (slant[(c + 1) % 3] * slant[(c + 2) % 3]);
        p.cos_omega[c] = cos_omega[c];
        p.omega[c] = p.sin_omega[c].atan2(cos_omega[c]);
    }
    Ok(p)
}

impl Pyramid {
    /// Solid angle of the pyramid at its apex.
    pub fn solid_angle(&self) -> f64 {
        let v: Vec<Vector3<f64>> = self.base.iter().map(|&b| sub(b, self.apex)).collect();
        let (a, b, c) = (v[0].norm(), v[1].norm(), v[2].norm());
        let triple = v[0].dot(&v[1].cross(&v[2])).abs();
        let denom = a * b * c + v[0].dot(&v[1]) * c + v[0].dot(&v[2]) * b + v[1].dot(&v[2]) * a;
        2.0 * triple.atan2(denom)
    }
}

impl GeneralizedPolytope {
    pub fn new(mesh: CornerMesh, r: Vec<f64>) -> Self {
        let r_lo = vec![0.0; r.len()];
        GeneralizedPolytope { mesh, r, r_lo }
    }

    /// Equal radii on the given mesh after making it Delaunay for those
    /// weights.
    pub fn with_radii(mesh: CornerMesh, r: Vec<f64>) -> Result<(Self, Vec<FlipEvent>)> {
        let r_lo = vec![0.0; r.len()];
        Self::with_split_radii(mesh, r, r_lo)
    }

    pub fn with_split_radii(mut mesh: CornerMesh, r: Vec<f64>, r_lo: Vec<f64>) -> Result<(Self, Vec<FlipEvent>)> {
        let q: Vec<f64> = r.iter().map(|x| x * x).collect();
        let limit = triangulation::default_max_flips(&mesh);
        let events = triangulation::weighted_delaunay(&mut mesh, &q, limit)?;
        Ok((GeneralizedPolytope { mesh, r, r_lo }, events))
    }

    pub fn weights(&self) -> Vec<f64> {
        self.r.iter().map(|x| x * x).collect()
    }

    pub fn face_radii(&self, f: usize) -> [f64; 3] {
        self.mesh.vertex[f].map(|v| self.r[v])
    }

    fn face_radii_lo(&self, f: usize) -> [f64; 3] {
        self.mesh.vertex[f].map(|v| self.r_lo[v])
    }

    /// The Cayley-Menger determinant of the pyramid over face `f`.
    pub fn cayley_menger(&self, f: usize) -> f64 {
        pyramid_volume_form(self.mesh.length[f], self.face_radii(f), self.face_radii_lo(f))
    }

    pub fn pyramids(&self) -> Result<Vec<Pyramid>> {
        (0..self.mesh.face_count())
            .map(|f| {
                solve_pyramid_split(self.mesh.length[f], self.face_radii(f), self.face_radii_lo(f)).map_err(|e| match e {
                    Error::NoPyramid { cm, .. } => Error::NoPyramid { face: f, cm },
                    other => other,
                })
            })
            .collect()
    }

    /// Curvatures, dihedral angles and total scalar curvature without the
    /// convexity check on the dihedral angles.
    pub fn report_unchecked(&self, pyramids: &[Pyramid]) -> CurvatureReport {
        let mesh = &self.mesh;
        let mut omega = vec![0.0; mesh.vertex_count];
        for (f, p) in pyramids.iter().enumerate() {
            for c in 0..3 {
                omega[mesh.vertex[f][c]] += p.omega[c];
            }
        }
        let kappa: Vec<f64> = omega.iter().map(|w| 2.0 * PI - w).collect();
        let alpha = |h: usize| pyramids[h / 3].alpha[h % 3];
        let theta: Vec<f64> = (0..mesh.twin.len()).map(|h| alpha(h) + alpha(mesh.twin[h])).collect();
        let mut h_total: f64 = kappa.iter().zip(&self.r).map(|(k, r)| k * r).sum();
        for h in mesh.edges() {
            h_total += mesh.edge_length(h) * (PI - theta[h]);
        }
        CurvatureReport { kappa, theta, h: h_total }
    }

    /// Curvature report; fails if a pyramid does not exist or a boundary
    /// dihedral angle exceeds `π`.
    pub fn curvatures(&self) -> Result<CurvatureReport> {
        let pyr = self.pyramids()?;
        let rep = self.report_unchecked(&pyr);
        if let Some(h) = (0..rep.theta.len()).find(|&h| rep.theta[h] > PI + THETA_SLACK) {
            return Err(Error::InvalidPolytope(format!(
                "dihedral angle {} > π at edge {}–{}",
                rep.theta[h],
                self.mesh.tail(h),
                self.mesh.head(h)
            )));
        }
        Ok(rep)
    }

    /// Checks pyramid existence, then that the weights need no flips.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.r.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidPolytope(format!("radius {} at vertex {i}", self.r[i])));
        }
        for f in 0..self.mesh.face_count() {
            let cm = self.cayley_menger(f);
            if !(cm > 0.0) {
                return Err(Error::NoPyramid { face: f, cm });
            }
        }
        let q = self.weights();
        if let Some(h) = self.mesh.edges().into_iter().find(|&h| self.mesh.edge_is_bad(h, &q)) {
            return Err(Error::InvalidPolytope(format!(
                "edge {}–{} is not weighted Delaunay",
                self.mesh.tail(h),
                self.mesh.head(h)
            )));
        }
        Ok(())
    }

    pub fn total_scalar_curvature(&self) -> Result<f64> {
        Ok(self.curvatures()?.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use crate::surface::build_metric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EQ: [f64; 3] = [1.0, 1.0, 1.0];

    #[test]
    fn cayley_menger_examples() {
        assert!(cayley_menger(EQ, [1.0; 3]) > 0.0);
        let p = solve_pyramid(EQ, EQ).unwrap();
        assert!((p.altitude - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!(cayley_menger(EQ, [0.0; 3]) < 0.0);
        for eps in [1e-6, -1e-6, 1e-3, -1e-3] {
            let cm = cayley_menger(EQ, [1.0 / 3.0 + eps; 3]);
            assert_eq!(cm > 0.0, eps > 0.0, "eps {eps}: {cm}");
        }
        // determinant equals 288 V²
        let v = p.altitude * 3f64.sqrt() / 4.0 / 3.0;
        assert!((cayley_menger(EQ, [1.0; 3]) - 288.0 * v * v).abs() < 1e-12);
    }

    #[test]
    fn regular_pyramid_angles() {
        let p = solve_pyramid(EQ, EQ).unwrap();
        for s in 0..3 {
            assert!((p.rho[s] - PI / 3.0).abs() < 1e-14);
            assert!((p.rho_rev[s] - PI / 3.0).abs() < 1e-14);
            assert!((p.omega[s] - p.omega[0]).abs() < 1e-14);
            // regular tetrahedron dihedral
            assert!((p.alpha[s] - (1.0f64 / 3.0).acos()).abs() < 1e-14);
            assert!((p.omega[s] - (1.0f64 / 3.0).acos()).abs() < 1e-14);
        }
    }

    #[test]
    fn double_double_quotient() {
        let third = dd_div(TwoFloat::from(1.0), TwoFloat::from(3.0));
        assert!(f64::from(third * 3.0 - 1.0).abs() < 1e-30);
        let a = TwoFloat::new_add(0.7071067812076511, -5.1560819783600595e-17);
        let b = TwoFloat::new_add(1.4142135623730951, -9.667293313452916e-17);
        assert!(f64::from(dd_div(a, b) * b - a).abs() < 1e-31);
    }

    #[test]
    fn sines_match_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p = samples::random_polytope(&mut rng);
            for py in p.pyramids().unwrap() {
                for k in 0..3 {
                    assert!((py.sin_rho[k] - py.rho[k].sin()).abs() < 1e-12);
                    assert!((py.sin_rho_rev[k] - py.rho_rev[k].sin()).abs() < 1e-12);
                    assert!((py.sin_phi[k] - py.phi[k].sin()).abs() < 1e-12);
                    assert!((py.sin_omega[k] - py.omega[k].sin()).abs() < 1e-12);
                    assert!((py.sin_omega[k].hypot(py.cos_omega[k]) - 1.0).abs() < 1e-12);
                    assert!((py.cot_alpha[k] - 1.0 / py.alpha[k].tan()).abs() < 1e-10 * (1.0 + py.cot_alpha[k].abs()));
                }
            }
        }
    }

    #[test]
    fn apex_reproduces_radii() {
        let l = [1.1, 0.9, 1.3];
        let r = [2.0, 1.7, 2.3];
        let p = solve_pyramid(l, r).unwrap();
        for c in 0..3 {
            assert!((sub(p.base[c], p.apex).norm() - r[c]).abs() < 1e-12);
        }
        for s in 0..3 {
            let (a, b) = ((s + 1) % 3, (s + 2) % 3);
            assert!((sub(p.base[a], p.base[b]).norm() - l[s]).abs() < 1e-12);
            let ta = sub(p.apex, p.base[a]);
            let tb = sub(p.base[b], p.base[a]);
            assert!((ta.angle(&tb) - p.rho[s]).abs() < 1e-12);
        }
        // vertex figure at each base corner obeys the spherical law of cosines
        let base_angles = trig::euclidean_angles(l[0], l[1], l[2]).unwrap().0;
        for c in 0..3 {
            let (to_next, to_prev) = (p.rho[(c + 2) % 3], p.rho_rev[(c + 1) % 3]);
            let sph = trig::spherical_angles(base_angles[c], to_next, to_prev).unwrap();
            assert!((sph.0[0] - p.omega[c]).abs() < 1e-10);
        }
    }

    #[test]
    fn large_radii_make_rho_right() {
        let p = solve_pyramid(EQ, [1e6; 3]).unwrap();
        for s in 0..3 {
            assert!((p.rho[s] - PI / 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn flat_pyramid_rejected() {
        let rc = (1.0f64 / 3.0).sqrt();
        assert!(matches!(solve_pyramid(EQ, [rc; 3]), Err(Error::NoPyramid { .. })));
        assert!(matches!(solve_pyramid(EQ, [0.1; 3]), Err(Error::NoPyramid { .. })));
    }

    fn tetrahedron(r: f64) -> GeneralizedPolytope {
        let m = CornerMesh::from_metric(&build_metric(samples::regular_tetrahedron(1.0)).unwrap());
        GeneralizedPolytope::with_radii(m, vec![r; 4]).unwrap().0
    }

    #[test]
    fn tetrahedron_at_circumradius_is_flat() {
        let p = tetrahedron((3.0f64 / 8.0).sqrt());
        p.validate().unwrap();
        let rep = p.curvatures().unwrap();
        let dihedral = (1.0f64 / 3.0).acos();
        for k in &rep.kappa {
            assert!(k.abs() < 1e-12);
        }
        for t in &rep.theta {
            assert!((t - dihedral).abs() < 1e-12);
        }
        assert!((rep.h - 6.0 * (PI - dihedral)).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_at_large_radius() {
        let rep = tetrahedron(100.0).curvatures().unwrap();
        for k in &rep.kappa {
            assert!(*k > 0.0 && *k < PI);
            assert!(PI - k < 1e-3);
        }
    }

    #[test]
    fn spherical_section_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let p = samples::random_polytope(&mut rng);
            let pyr = p.pyramids().unwrap();
            let rep = p.curvatures().unwrap();
            let solid: f64 = pyr.iter().map(Pyramid::solid_angle).sum();
            let kappa: f64 = rep.kappa.iter().sum();
            assert!((solid - (4.0 * PI - kappa)).abs() < 1e-8);
        }
    }

    fn h_of(mesh: &CornerMesh, r: &[f64]) -> f64 {
        let (p, _) = GeneralizedPolytope::with_radii(mesh.clone(), r.to_vec()).unwrap();
        p.curvatures().unwrap().h
    }

    #[test]
    fn gradient_of_total_scalar_curvature_is_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = samples::random_polytope(&mut rng);
            let rep = p.curvatures().unwrap();
            for i in 0..p.r.len() {
                let step = 1e-5 * p.r[i];
                let mut up = p.r.clone();
                up[i] += step;
                let mut down = p.r.clone();
                down[i] -= step;
                let fd = (h_of(&p.mesh, &up) - h_of(&p.mesh, &down)) / (2.0 * step);
                assert!((fd - rep.kappa[i]).abs() < 1e-6, "vertex {i}: {fd} vs {}", rep.kappa[i]);
            }
        }
    }

    #[test]
    fn convexity_criteria_agree() {
        // on a fixed triangulation, an edge is bad exactly when the dihedral
        // angle of the pyramids there exceeds π
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        let mut bad_seen = 0;
        while checked < 300 {
            let p = samples::random_polytope(&mut rng);
            let r: Vec<f64> = p.r.iter().map(|x| x * rng.gen_range(0.9..1.1)).collect();
            let moved = GeneralizedPolytope::new(p.mesh.clone(), r);
            let Ok(pyr) = moved.pyramids() else { continue };
            let rep = moved.report_unchecked(&pyr);
            let q = moved.weights();
            for h in moved.mesh.edges() {
                let gap = (rep.theta[h] - PI).abs();
                if gap < 1e-7 {
                    continue;
                }
                let bad = moved.mesh.edge_is_bad(h, &q);
                bad_seen += bad as usize;
                assert_eq!(bad, rep.theta[h] > PI);
                checked += 1;
            }
        }
        assert!(bad_seen > 0);
    }

    #[test]
    fn equal_large_radii_start_conditions() {
        for dev in [samples::regular_tetrahedron(1.0), samples::cube(1.0), samples::offset_polygons(6)] {
            let metric = build_metric(dev).unwrap();
            let m = CornerMesh::from_metric(&metric);
            let big = 50.0 * metric.max_edge();
            let (p, _) = GeneralizedPolytope::with_radii(m, vec![big; metric.vertex_count()]).unwrap();
            let rep = p.curvatures().unwrap();
            for (k, d) in rep.kappa.iter().zip(&metric.deficits) {
                assert!(*k > 0.0 && k < d);
            }
        }
    }
}
