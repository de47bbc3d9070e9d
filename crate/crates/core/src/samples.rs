//! Ready-made developments: classical solids, doubly covered polygons, and
//! boundaries of convex hulls of random points on the sphere.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;

use crate::polytope::GeneralizedPolytope;
use crate::surface::{build_metric, Development, PolyhedralMetric};
use crate::triangulation::CornerMesh;

/// Builds a development from a closed oriented triangle mesh given by vertex
/// ids; `sides[f][k]` is the length opposite corner `k` of face `f`.
/// Each directed edge `(u, w)` is glued to its reverse `(w, u)`.
pub fn glue_labeled_faces(faces: &[[usize; 3]], sides: Vec<[f64; 3]>) -> Development {
    let mut directed: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (f, tri) in faces.iter().enumerate() {
        for s in 0..3 {
            let key = (tri[(s + 1) % 3], tri[(s + 2) % 3]);
            let prev = directed.insert(key, (f, s));
            assert!(prev.is_none(), "directed edge {key:?} used twice");
        }
    }
    let mut gluings = Vec::new();
    for (&(u, w), &a) in &directed {
        if u < w {
            let b = directed[&(w, u)];
            gluings.push((a, b));
        }
    }
    gluings.sort();
    Development::new(sides, gluings).expect("labeled mesh glues into a valid development")
}

/// Development of the boundary of a triangulated surface embedded in space.
/// Faces must be consistently oriented.
pub fn from_surface(points: &[[f64; 3]], faces: &[[usize; 3]]) -> Development {
    let d = |a: usize, b: usize| {
        let (p, q) = (points[a], points[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let sides = faces
        .iter()
        .map(|t| [d(t[1], t[2]), d(t[2], t[0]), d(t[0], t[1])])
        .collect();
    glue_labeled_faces(faces, sides)
}

/// Two copies of the triangle with sides `a, b, c` glued along the boundary.
pub fn doubly_covered_triangle(a: f64, b: f64, c: f64) -> Development {
    Development::new(
        vec![[a, b, c], [a, c, b]],
        // triangle 1 lists the corners in the order 0, 2, 1
        vec![((0, 0), (1, 0)), ((0, 1), (1, 2)), ((0, 2), (1, 1))],
    )
    .expect("valid triangle")
}

/// Regular tetrahedron with the given edge length.
pub fn regular_tetrahedron(edge: f64) -> Development {
    glue_labeled_faces(&tetrahedron_faces(), vec![[edge; 3]; 4])
}

/// Outward oriented faces of the tetrahedron with vertices
/// `(s,s,s), (s,−s,−s), (−s,s,−s), (−s,−s,s)`.
pub fn tetrahedron_faces() -> [[usize; 3]; 4] {
    [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
}

/// Vertices of the axis-aligned cube `[0, edge]³`.
pub fn cube_points(edge: f64) -> Vec<[f64; 3]> {
    (0..8)
        .map(|i| {
            [
                edge * (i & 1) as f64,
                edge * ((i >> 1) & 1) as f64,
                edge * ((i >> 2) & 1) as f64,
            ]
        })
        .collect()
}

/// Cube boundary with every square split by one diagonal (12 triangles).
pub fn cube(edge: f64) -> Development {
    from_surface(&cube_points(edge), &cube_faces())
}

pub fn cube_faces() -> Vec<[usize; 3]> {
    // outward orientation for vertex index bits (x, y, z)
    let quads = [
        [0, 2, 3, 1], // z = 0
        [4, 5, 7, 6], // z = 1
        [0, 1, 5, 4], // y = 0
        [2, 6, 7, 3], // y = 1
        [0, 4, 6, 2], // x = 0
        [1, 3, 7, 5], // x = 1
    ];
    quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect()
}

/// Two copies of a convex planar polygon glued along the boundary. The top
/// copy is fan-triangulated from vertex 0, the bottom copy from vertex 1, so
/// no diagonal appears twice.
pub fn doubly_covered_polygon(points: &[[f64; 2]]) -> Development {
    // both copies use the same fan, so every length appears with the same
    // rounding on either side
    let n = points.len();
    let d = |a: usize, b: usize| (points[a][0] - points[b][0]).hypot(points[a][1] - points[b][1]);
    let mut faces = Vec::new();
    for k in 1..n - 1 {
        faces.push([0, k, k + 1]);
    }
    for k in 1..n - 1 {
        faces.push([0, k + 1, k]);
    }
    let sides: Vec<[f64; 3]> = faces.iter().map(|t| [d(t[1], t[2]), d(t[2], t[0]), d(t[0], t[1])]).collect();
    // diagonals are glued within their own copy, boundary sides across
    let mut open: HashMap<(usize, usize, usize), (usize, usize)> = HashMap::new();
    let mut gluings = Vec::new();
    for (f, t) in faces.iter().enumerate() {
        for s in 0..3 {
            let (u, w) = (t[(s + 1) % 3], t[(s + 2) % 3]);
            let boundary = (u + 1) % n == w || (w + 1) % n == u;
            let layer = if boundary { 0 } else { 1 + f / (n - 2) };
            let key = (u.min(w), u.max(w), layer);
            match open.remove(&key) {
                Some(other) => gluings.push((other, (f, s))),
                None => {
                    open.insert(key, (f, s));
                }
            }
        }
    }
    gluings.sort();
    Development::new(sides, gluings).expect("doubly covered polygon glues into a valid development")
}

/// Doubly covered square of the given edge length.
pub fn doubly_covered_square(edge: f64) -> Development {
    doubly_covered_polygon(&[[0.0, 0.0], [edge, 0.0], [edge, edge], [0.0, edge]])
}

/// Doubly covered regular `n`-gon with the center of each copy as an extra
/// vertex. Both centers are flat, so this is not a convex cone metric.
pub fn doubly_covered_fan(n: usize, radius: f64) -> Development {
    let mut p3 = vec![[0.0, 0.0, 0.0]];
    for k in 0..n {
        let a = 2.0 * PI * k as f64 / n as f64;
        p3.push([radius * a.cos(), radius * a.sin(), 0.0]);
    }
    p3.push([0.0, 0.0, 0.0]);
    let bottom = n + 1;
    let mut faces = Vec::new();
    for k in 0..n {
        let (a, b) = (1 + k, 1 + (k + 1) % n);
        faces.push([0, a, b]);
        faces.push([bottom, b, a]);
    }
    from_surface(&p3, &faces)
}

/// Two regular `n`-gons of circumradius 1 glued along their boundaries with
/// the vertices of one meeting the side midpoints of the other.
pub fn offset_polygons(n: usize) -> Development {
    let m = 2 * n;
    let mut pts = Vec::with_capacity(m);
    for k in 0..n {
        let a0 = 2.0 * PI * k as f64 / n as f64;
        let a1 = 2.0 * PI * (k + 1) as f64 / n as f64;
        let p = [a0.cos(), a0.sin()];
        let q = [a1.cos(), a1.sin()];
        pts.push(p);
        pts.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
    }
    let d = |a: usize, b: usize| ((pts[a][0] - pts[b][0]).powi(2) + (pts[a][1] - pts[b][1]).powi(2)).sqrt();
    // Cut off the triangle at every polygon corner, then fan the inner polygon
    // of side midpoints from the first midpoint. Local points are used as is
    // for the top piece and shifted by one for the bottom piece, so the two
    // pieces use disjoint diagonals.
    let mut local = Vec::new();
    for k in 0..n {
        local.push([2 * k + 1, (2 * k + 2) % m, (2 * k + 3) % m]);
    }
    for k in 1..n - 1 {
        local.push([1, 2 * k + 1, 2 * k + 3]);
    }
    let mut faces = Vec::new();
    let mut sides = Vec::new();
    for t in &local {
        faces.push(*t);
        sides.push([d(t[1], t[2]), d(t[2], t[0]), d(t[0], t[1])]);
    }
    let lab = |k: usize| (k + 1) % m;
    for t in &local {
        faces.push([lab(t[0]), lab(t[2]), lab(t[1])]);
        sides.push([d(t[2], t[1]), d(t[1], t[0]), d(t[0], t[2])]);
    }
    glue_labeled_faces(&faces, sides)
}

/// Uniform random point on the unit sphere.
pub fn random_sphere_point<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: Vector3<f64> = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            let u = v / n;
            return [u.x, u.y, u.z];
        }
    }
}

/// Convex hull boundary of a finite point set.
#[derive(Debug, Clone)]
pub struct Hull {
    pub points: Vec<[f64; 3]>,
    /// Indices (into `points`) of the hull vertices.
    pub vertices: Vec<usize>,
    /// Outward oriented triangles; polygonal facets are fan-triangulated from
    /// their lowest-index vertex.
    pub faces: Vec<[usize; 3]>,
}

/// Brute-force convex hull for small point sets. Returns `None` when the hull
/// is degenerate (fewer than four affinely independent points).
pub fn convex_hull(points: &[[f64; 3]]) -> Option<Hull> {
    let n = points.len();
    let p: Vec<Vector3<f64>> = points.iter().map(|a| Vector3::from(*a)).collect();
    let scale = p.iter().map(|v| v.norm()).fold(1e-300, f64::max);
    let eps = 1e-10 * scale;
    let mut planes: Vec<(Vector3<f64>, f64, Vec<usize>)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let nrm = (p[b] - p[a]).cross(&(p[c] - p[a]));
                let len = nrm.norm();
                if len < 1e-12 * scale * scale {
                    continue;
                }
                let nrm = nrm / len;
                let off = nrm.dot(&p[a]);
                let (mut above, mut below) = (false, false);
                for (i, q) in p.iter().enumerate() {
                    if i == a || i == b || i == c {
                        continue;
                    }
                    let s = nrm.dot(q) - off;
                    if s > eps {
                        above = true;
                    } else if s < -eps {
                        below = true;
                    }
                }
                if above && below {
                    continue;
                }
                if !above && !below {
                    return None;
                }
                let (nrm, off) = if above { (-nrm, -off) } else { (nrm, off) };
                if planes
                    .iter()
                    .any(|(m, o, _)| (m - nrm).norm() < 1e-9 && (o - off).abs() < eps)
                {
                    continue;
                }
                let on: Vec<usize> = (0..n).filter(|&i| (nrm.dot(&p[i]) - off).abs() <= eps).collect();
                planes.push((nrm, off, on));
            }
        }
    }
    if planes.len() < 4 {
        return None;
    }
    let mut faces = Vec::new();
    let mut used = vec![false; n];
    for (nrm, _, on) in &planes {
        let centroid = on.iter().map(|&i| p[i]).sum::<Vector3<f64>>() / on.len() as f64;
        let u = (p[on[0]] - centroid).normalize();
        let w = nrm.cross(&u);
        let mut ring: Vec<(f64, usize)> = on
            .iter()
            .map(|&i| {
                let d = p[i] - centroid;
                (d.dot(&w).atan2(d.dot(&u)), i)
            })
            .collect();
        ring.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ring: Vec<usize> = ring.into_iter().map(|(_, i)| i).collect();
        let start = ring
            .iter()
            .enumerate()
            .min_by_key(|(_, &i)| i)
            .map(|(k, _)| k)
            .unwrap();
        let m = ring.len();
        for k in 1..m - 1 {
            faces.push([ring[start], ring[(start + k) % m], ring[(start + k + 1) % m]]);
        }
        for &i in on {
            used[i] = true;
        }
    }
    let vertices = (0..n).filter(|&i| used[i]).collect();
    Some(Hull { points: points.to_vec(), vertices, faces })
}

impl Hull {
    /// Development of the hull boundary together with the input point index
    /// of every triangle corner.
    pub fn development(&self) -> (Development, Vec<[usize; 3]>) {
        // relabel hull vertices densely
        let mut dense = vec![usize::MAX; self.points.len()];
        for (k, &v) in self.vertices.iter().enumerate() {
            dense[v] = k;
        }
        let faces: Vec<[usize; 3]> = self
            .faces
            .iter()
            .map(|f| [dense[f[0]], dense[f[1]], dense[f[2]]])
            .collect();
        let pts: Vec<[f64; 3]> = self.vertices.iter().map(|&v| self.points[v]).collect();
        let dev = from_surface(&pts, &faces);
        (dev, self.faces.clone())
    }

    /// Input point of every vertex of a metric built from
    /// [`Hull::development`].
    pub fn vertex_points(&self, metric: &PolyhedralMetric) -> Vec<[f64; 3]> {
        metric
            .vertex_labels
            .iter()
            .map(|&(t, c)| self.points[self.faces[t][c]])
            .collect()
    }
}

/// Convex hull of `n` random points on the unit sphere, resampled until it
/// is nondegenerate.
pub fn random_hull<R: Rng>(rng: &mut R, n: usize) -> Hull {
    loop {
        let pts: Vec<[f64; 3]> = (0..n).map(|_| random_sphere_point(rng)).collect();
        if let Some(h) = convex_hull(&pts) {
            return h;
        }
    }
}

/// A random valid generalized convex polytope over the boundary of a random
/// convex hull: squared radii are squared distances to an interior point
/// plus a randomly perturbed positive constant.
pub fn random_polytope<R: Rng>(rng: &mut R) -> GeneralizedPolytope {
    loop {
        let n = rng.gen_range(5..=12);
        let hull = random_hull(rng, n);
        let Ok(metric) = build_metric(hull.development().0) else { continue };
        let pts = hull.vertex_points(&metric);
        let mut a = [0.0; 3];
        let mut total = 0.0;
        for p in &pts {
            let w: f64 = rng.gen_range(0.1..1.0);
            total += w;
            for k in 0..3 {
                a[k] += w * p[k];
            }
        }
        a = a.map(|x| x / total);
        let c: f64 = rng.gen_range(0.02..1.0);
        let r: Vec<f64> = pts
            .iter()
            .map(|p| {
                let d2: f64 = (0..3).map(|k| (p[k] - a[k]).powi(2)).sum();
                (d2 + c * rng.gen_range(0.7..1.3)).sqrt()
            })
            .collect();
        let Ok((poly, _)) = GeneralizedPolytope::with_radii(CornerMesh::from_metric(&metric), r) else { continue };
        if poly.validate().is_ok() && poly.curvatures().is_ok() {
            return poly;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn hull_of_cube_corners() {
        let h = convex_hull(&cube_points(1.0)).unwrap();
        assert_eq!(h.vertices.len(), 8);
        assert_eq!(h.faces.len(), 12);
        // fans start at the lowest-index vertex of each square
        for f in &h.faces {
            assert!(f[0] <= f[1] && f[0] <= f[2]);
        }
    }

    #[test]
    fn hull_rejects_planar_points() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(convex_hull(&pts).is_none());
    }

    #[test]
    fn hull_of_sphere_points_is_closed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..12).map(|_| random_sphere_point(&mut rng)).collect();
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices.len(), 12);
        assert_eq!(h.faces.len(), 2 * 12 - 4);
        let (dev, _) = h.development();
        assert_eq!(dev.gluings.len(), 3 * 12 - 6);
    }

    #[test]
    fn offset_polygons_metric() {
        let m = crate::surface::build_metric(offset_polygons(6)).unwrap();
        assert_eq!(m.vertex_count(), 12);
        for &d in &m.deficits {
            assert!((d - PI / 3.0).abs() < 1e-12);
        }
    }
}
