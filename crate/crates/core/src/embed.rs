//! Realization of a converged generalized polytope as a convex polytope in
//! space: glue the pyramids around their common apex, reconcile vertex
//! positions, merge coplanar triangles, and locate the apex point.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polytope::{GeneralizedPolytope, Pyramid};

/// Edges with `|π − θ|` below this are treated as flat when merging faces.
pub const COPLANAR_TOLERANCE: f64 = 1e-6;
/// Degenerate iff the volume is at most this times the cube of the diameter.
pub const FLAT_VOLUME: f64 = 1e-8;
pub const APEX_MAX_ITERATIONS: usize = 10_000;
const POLISH_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddedPolytope {
    pub vertices: Vec<[f64; 3]>,
    /// Triangles of the final mesh, counterclockwise seen from outside.
    pub triangles: Vec<[usize; 3]>,
    /// Polygons after merging across flat edges, or the triangles.
    pub faces: Vec<Vec<usize>>,
    /// Common apex of the pyramids.
    pub apex: [f64; 3],
    /// Largest distance between two placements of the same vertex.
    pub closure_residual: f64,
    /// Largest relative deviation of a chord from its intrinsic length after
    /// the polish.
    pub length_residual: f64,
    pub diameter: f64,
    pub volume: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ApexSolve {
    pub a: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
}

fn v3(p: [f64; 3]) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

fn arr(v: Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Orthonormal frame with first axis along `u` and `w` in the first two axes.
fn frame(u: Vector3<f64>, w: Vector3<f64>) -> Matrix3<f64> {
    let e1 = u.normalize();
    let e2 = (w - e1 * e1.dot(&w)).normalize();
    Matrix3::from_columns(&[e1, e2, e1.cross(&e2)])
}

/// Corner positions of a pyramid relative to its apex.
fn local_corners(p: &Pyramid) -> [Vector3<f64>; 3] {
    let a = v3(p.apex);
    p.base.map(|b| v3(b) - a)
}

/// Places every pyramid with its apex at the origin, starting from face
/// `seed` in its own frame and crossing edges breadth-first. Returns the
/// placed corners of every face.
fn place_corners(p: &GeneralizedPolytope, pyr: &[Pyramid], seed: usize) -> Vec<[Vector3<f64>; 3]> {
    let mesh = &p.mesh;
    let nf = mesh.face_count();
    let local: Vec<[Vector3<f64>; 3]> = pyr.iter().map(local_corners).collect();
    let mut placed: Vec<Option<[Vector3<f64>; 3]>> = vec![None; nf];
    placed[seed] = Some(local[seed]);
    let mut queue = VecDeque::from([seed]);
    while let Some(f) = queue.pop_front() {
        let world = placed[f].expect("queued faces are placed");
        for s in 0..3 {
            let t = mesh.twin[3 * f + s];
            let g = t / 3;
            if placed[g].is_some() {
                continue;
            }
            // the twin runs from our head to our tail
            let (tail, head) = ((s + 1) % 3, (s + 2) % 3);
            let (gt, gh) = ((t % 3 + 1) % 3, (t % 3 + 2) % 3);
            let from = frame(local[g][gt], local[g][gh]);
            let to = frame(world[head], world[tail]);
            let rot = to * from.transpose();
            placed[g] = Some(local[g].map(|c| rot * c));
            queue.push_back(g);
        }
    }
    placed.into_iter().map(|x| x.expect("the dual graph is connected")).collect()
}

fn diameter(points: &[Vector3<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d = d.max((points[i] - points[j]).norm());
        }
    }
    d
}

/// Gauss-Newton on the squared chord-length errors of the mesh edges, with
/// minimum-norm steps (rigid motions are in the kernel).
fn polish(p: &GeneralizedPolytope, x: &mut [Vector3<f64>]) -> f64 {
    let mesh = &p.mesh;
    let edges: Vec<(usize, usize, f64)> = mesh
        .edges()
        .into_iter()
        .map(|h| (mesh.tail(h), mesh.head(h), mesh.edge_length(h)))
        .filter(|e| e.0 != e.1)
        .collect();
    let residual = |x: &[Vector3<f64>]| -> DVector<f64> {
        DVector::from_iterator(edges.len(), edges.iter().map(|&(a, b, l)| (x[a] - x[b]).norm() - l))
    };
    let mut res = residual(x);
    for _ in 0..POLISH_ITERATIONS {
        let mut jac = DMatrix::zeros(edges.len(), 3 * x.len());
        for (k, &(a, b, _)) in edges.iter().enumerate() {
            let d = x[a] - x[b];
            let u = d / d.norm();
            for c in 0..3 {
                jac[(k, 3 * a + c)] = u[c];
                jac[(k, 3 * b + c)] = -u[c];
            }
        }
        let svd = jac.svd(true, true);
        let cut = 1e-12 * svd.singular_values.max();
        let Ok(step) = svd.solve(&res, cut) else { break };
        let trial: Vec<Vector3<f64>> = x
            .iter()
            .enumerate()
            .map(|(i, p)| p - Vector3::new(step[3 * i], step[3 * i + 1], step[3 * i + 2]))
            .collect();
        let next = residual(&trial);
        if !(next.norm() < res.norm()) {
            break;
        }
        x.copy_from_slice(&trial);
        res = next;
    }
    edges
        .iter()
        .zip(res.iter())
        .fold(0.0, |m, (e, r)| m.max(r.abs() / e.2))
}

/// Signed volume enclosed by the triangles.
pub fn volume(vertices: &[[f64; 3]], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| v3(vertices[i]));
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum()
}

/// Connected groups of triangles across edges that pass `flat`, each
/// returned as its boundary polygon in the triangles' orientation. A group
/// whose boundary is not a single simple cycle is returned as triangles.
fn merge_faces(p: &GeneralizedPolytope, flat: &dyn Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let mesh = &p.mesh;
    let nf = mesh.face_count();
    let mut group = vec![usize::MAX; nf];
    let mut groups = Vec::new();
    for f0 in 0..nf {
        if group[f0] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![f0];
        group[f0] = id;
        let mut k = 0;
        while k < members.len() {
            let f = members[k];
            k += 1;
            for s in 0..3 {
                let h = 3 * f + s;
                let g = mesh.twin[h] / 3;
                if group[g] == usize::MAX && flat(h) {
                    group[g] = id;
                    members.push(g);
                }
            }
        }
        groups.push(members);
    }
    let outward = |f: usize| {
        let v = mesh.vertex[f];
        vec![v[0], v[2], v[1]]
    };
    let mut out = Vec::new();
    for members in groups {
        if members.len() == 1 {
            out.push(outward(members[0]));
            continue;
        }
        let id = group[members[0]];
        let boundary: Vec<usize> = members
            .iter()
            .flat_map(|&f| (0..3).map(move |s| 3 * f + s))
            .filter(|&h| group[mesh.twin[h] / 3] != id || !flat(h))
            .collect();
        let next = |v: usize| boundary.iter().filter(move |&&h| mesh.tail(h) == v).map(|&h| mesh.head(h));
        let start = mesh.tail(boundary[0]);
        let mut cycle = vec![start];
        let mut ok = boundary.iter().all(|&h| next(mesh.tail(h)).count() == 1);
        while ok {
            let v = next(*cycle.last().unwrap()).next().unwrap();
            if v == start {
                break;
            }
            if cycle.contains(&v) || cycle.len() > boundary.len() {
                ok = false;
            }
            cycle.push(v);
        }
        if ok && cycle.len() == boundary.len() {
            cycle.reverse();
            out.push(cycle);
        } else {
            out.extend(members.iter().map(|&f| outward(f)));
        }
    }
    out
}

/// Embeds the polytope by gluing pyramids around the origin starting from
/// face `seed`.
pub fn place_faces(p: &GeneralizedPolytope, seed: usize, merge_coplanar: bool) -> Result<EmbeddedPolytope> {
    let mesh = &p.mesh;
    let pyr = p.pyramids()?;
    let corners = place_corners(p, &pyr, seed);
    let n = mesh.vertex_count;
    let mut sum = vec![Vector3::zeros(); n];
    let mut placements: Vec<Vec<Vector3<f64>>> = vec![Vec::new(); n];
    for (f, c) in corners.iter().enumerate() {
        for k in 0..3 {
            let v = mesh.vertex[f][k];
            sum[v] += c[k];
            placements[v].push(c[k]);
        }
    }
    let mut closure: f64 = 0.0;
    for list in &placements {
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                closure = closure.max((list[i] - list[j]).norm());
            }
        }
    }
    let mut x: Vec<Vector3<f64>> = sum.iter().zip(&placements).map(|(s, l)| s / l.len() as f64).collect();
    let length_residual = polish(p, &mut x);
    let diam = diameter(&x);
    let vertices: Vec<[f64; 3]> = x.iter().map(|&v| arr(v)).collect();
    let triangles: Vec<[usize; 3]> = mesh.vertex.iter().map(|v| [v[0], v[2], v[1]]).collect();
    let vol = volume(&vertices, &triangles);
    let faces = if merge_coplanar {
        let theta = p.report_unchecked(&pyr).theta;
        merge_faces(p, &|h| (PI - theta[h]).abs() <= COPLANAR_TOLERANCE)
    } else {
        triangles.iter().map(|t| t.to_vec()).collect()
    };
    Ok(EmbeddedPolytope {
        vertices,
        triangles,
        faces,
        apex: [0.0; 3],
        closure_residual: closure,
        length_residual,
        diameter: diam,
        volume: vol,
        degenerate: vol <= FLAT_VOLUME * diam.powi(3),
    })
}

impl EmbeddedPolytope {
    /// Fails when the placements of some vertex disagree by more than
    /// `1e-6·diameter`; flat limits are exempt since there the mismatch is
    /// twice the vanishing pyramid height.
    pub fn check_closure(&self) -> Result<()> {
        if !self.degenerate && self.closure_residual > 1e-6 * self.diameter {
            return Err(Error::Closure { residual: self.closure_residual });
        }
        Ok(())
    }

    /// Unit outward normal and offset `n·x = d` of a face's plane, fitted
    /// through its vertices.
    fn plane(&self, face: &[usize]) -> (Vector3<f64>, f64) {
        let pts: Vec<Vector3<f64>> = face.iter().map(|&i| v3(self.vertices[i])).collect();
        let mut n = Vector3::zeros();
        for k in 0..pts.len() {
            n += pts[k].cross(&pts[(k + 1) % pts.len()]);
        }
        let n = n.normalize();
        let c = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        (n, n.dot(&c))
    }

    /// Smallest distance from `a` to a face plane, negative if outside.
    pub fn depth(&self, a: [f64; 3]) -> f64 {
        let a = v3(a);
        self.faces
            .iter()
            .map(|f| {
                let (n, d) = self.plane(f);
                d - n.dot(&a)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest distance of a vertex outside a face plane.
    pub fn convexity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for f in &self.faces {
            let (n, d) = self.plane(f);
            for v in &self.vertices {
                worst = worst.max(n.dot(&v3(*v)) - d);
            }
        }
        worst
    }

    /// Dihedral angles at the edges between distinct faces, keyed by the
    /// edge's endpoints.
    pub fn dihedral_angles(&self) -> Vec<((usize, usize), f64)> {
        let mut owner = std::collections::HashMap::new();
        for (k, f) in self.faces.iter().enumerate() {
            for i in 0..f.len() {
                owner.insert((f[i], f[(i + 1) % f.len()]), k);
            }
        }
        let mut out = Vec::new();
        for (&(a, b), &k) in &owner {
            if a < b {
                if let Some(&m) = owner.get(&(b, a)) {
                    let (n1, _) = self.plane(&self.faces[k]);
                    let (n2, _) = self.plane(&self.faces[m]);
                    out.push(((a, b), PI - n1.cross(&n2).norm().atan2(n1.dot(&n2))));
                }
            }
        }
        out.sort_by(|x, y| x.0.cmp(&y.0));
        out
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            writeln!(s, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]).unwrap();
        }
        for f in &self.faces {
            let idx: Vec<String> = f.iter().map(|i| (i + 1).to_string()).collect();
            writeln!(s, "f {}", idx.join(" ")).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices,
            "faces": self.faces,
            "apex": self.apex,
        })
    }
}

/// Embeds the end state of a path and solves for the apex point with the
/// initial curvatures as weights.
pub fn embed_solution(sol: &crate::solver::Solution, merge_coplanar: bool) -> Result<(EmbeddedPolytope, ApexSolve)> {
    let mut e = place_faces(&sol.polytope, 0, merge_coplanar)?;
    let apex = solve_apex(&e.vertices, &sol.kappa_initial)?;
    e.apex = apex.a;
    Ok((e, apex))
}

/// Minimizer of `Σ w_i ‖p_i − x‖` by Weiszfeld iteration from the weighted
/// centroid.
pub fn solve_apex(points: &[[f64; 3]], weights: &[f64]) -> Result<ApexSolve> {
    let p: Vec<Vector3<f64>> = points.iter().map(|&x| v3(x)).collect();
    let total: f64 = weights.iter().sum();
    let gradient = |a: &Vector3<f64>| -> Vector3<f64> {
        p.iter().zip(weights).map(|(q, w)| (q - a) * (*w / (q - a).norm())).sum()
    };
    let mut a = p.iter().zip(weights).map(|(q, w)| q * *w).sum::<Vector3<f64>>() / total;
    let scale = diameter(&p).max(f64::MIN_POSITIVE);
    for it in 0..=APEX_MAX_ITERATIONS {
        // a vertex coincident with the iterate: nudge off it, the minimum is
        // never at a vertex when every weight is below the sum of the others
        if p.iter().any(|q| (q - a).norm() < 1e-14 * scale) {
            a += Vector3::new(1.0, 0.7, 0.3) * (1e-9 * scale);
        }
        let g = gradient(&a);
        if g.norm() <= 1e-9 * total {
            return Ok(ApexSolve { a: arr(a), residual: g.norm(), iterations: it });
        }
        let (mut num, mut den) = (Vector3::zeros(), 0.0);
        for (q, w) in p.iter().zip(weights) {
            let d = (q - a).norm();
            num += q * (w / d);
            den += w / d;
        }
        a = num / den;
    }
    Err(Error::ApexIterations { iterations: APEX_MAX_ITERATIONS })
}

/// Root-mean-square distance between corresponding vertices after the best
/// rigid motion, allowing a reflection.
pub fn congruence_check(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::VertexMismatch(a.len(), b.len()));
    }
    let n = a.len() as f64;
    let pa: Vec<Vector3<f64>> = a.iter().map(|&x| v3(x)).collect();
    let pb: Vec<Vector3<f64>> = b.iter().map(|&x| v3(x)).collect();
    let ca = pa.iter().sum::<Vector3<f64>>() / n;
    let cb = pb.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (x, y) in pa.iter().zip(&pb) {
        h += (x - ca) * (y - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let rms = |r: Matrix3<f64>| {
        let s: f64 = pa.iter().zip(&pb).map(|(x, y)| (r * (x - ca) - (y - cb)).norm_squared()).sum();
        (s / n).sqrt()
    };
    // singular values come unsorted, so try every sign pattern; this covers
    // the best rotation and the best reflection
    let best = (0..8)
        .map(|k| {
            let d = Vector3::from_fn(|i, _| if k >> i & 1 == 1 { -1.0 } else { 1.0 });
            rms(vt.transpose() * Matrix3::from_diagonal(&d) * u.transpose())
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}
