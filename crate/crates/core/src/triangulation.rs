//! Corner based triangulations of the metric (loops and multiple edges
//! allowed), quadrilateral developments, flips, and the weighted Delaunay
//! flip algorithm.
//!
//! Half-edge `3f + s` is side `s` of face `f`, directed from corner `s + 1`
//! to corner `s + 2`. `twin` maps it to the oppositely directed copy of the
//! same edge in the neighboring face slot.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::surface::PolyhedralMetric;
use crate::trig;

/// Interior angles of a quadrilateral must stay below `π` minus this.
pub const CONVEX_MARGIN: f64 = 1e-10;
/// Relative tolerance for classifying an edge as bad.
pub const BAD_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for classifying an edge as inessential.
pub const FLAT_EDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CornerMesh {
    /// Vertex of each corner.
    pub vertex: Vec<[usize; 3]>,
    /// Length of the side opposite each corner.
    pub length: Vec<[f64; 3]>,
    /// Opposite half-edge of every half-edge.
    pub twin: Vec<usize>,
    pub vertex_count: usize,
}

pub type Point = [f64; 2];

/// Two triangles adjacent along a half-edge `i → j`, unfolded into the plane
/// with `i` at the origin, `j` on the positive x-axis, `k` above and `l`
/// below.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub i: Point,
    pub j: Point,
    pub k: Point,
    pub l: Point,
    /// Vertex labels of `i, j, k, l`.
    pub labels: [usize; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipEvent {
    /// Endpoints of the removed edge.
    pub removed: (usize, usize),
    /// Endpoints of the inserted edge.
    pub inserted: (usize, usize),
    pub length: f64,
}

impl CornerMesh {
    /// The triangulation given by the development itself.
    pub fn from_metric(metric: &PolyhedralMetric) -> Self {
        let dev = &metric.development;
        let mut twin = vec![usize::MAX; 3 * dev.triangles.len()];
        for &((t, s), (u, r)) in &dev.gluings {
            twin[3 * t + s] = 3 * u + r;
            twin[3 * u + r] = 3 * t + s;
        }
        CornerMesh {
            vertex: metric.corner_vertex.clone(),
            length: dev.triangles.clone(),
            twin,
            vertex_count: metric.vertex_count(),
        }
    }

    pub fn face_count(&self) -> usize {
        self.vertex.len()
    }

    pub fn edge_count(&self) -> usize {
        self.twin.len() / 2
    }

    /// One half-edge per edge (the smaller id).
    pub fn edges(&self) -> Vec<usize> {
        (0..self.twin.len()).filter(|&h| h < self.twin[h]).collect()
    }

    pub fn tail(&self, h: usize) -> usize {
        self.vertex[h / 3][(h % 3 + 1) % 3]
    }

    pub fn head(&self, h: usize) -> usize {
        self.vertex[h / 3][(h % 3 + 2) % 3]
    }

    pub fn edge_length(&self, h: usize) -> f64 {
        self.length[h / 3][h % 3]
    }

    /// Corner angles of face `f`.
    pub fn angles(&self, f: usize) -> [f64; 3] {
        let l = self.length[f];
        trig::euclidean_angles(l[0], l[1], l[2])
            .expect("mesh triangles are nondegenerate")
            .0
    }

    /// Sum of corner angles at every vertex.
    pub fn cone_angles(&self) -> Vec<f64> {
        let mut cone = vec![0.0; self.vertex_count];
        for f in 0..self.face_count() {
            let a = self.angles(f);
            for c in 0..3 {
                cone[self.vertex[f][c]] += a[c];
            }
        }
        cone
    }

    /// Next corner around the same vertex, across the side leaving corner `c`
    /// towards corner `c + 1`.
    pub fn rotate(&self, f: usize, c: usize) -> (usize, usize) {
        let t = self.twin[3 * f + (c + 2) % 3];
        (t / 3, (t % 3 + 2) % 3)
    }

    /// Corners around every vertex in rotation order.
    pub fn vertex_stars(&self) -> Vec<Vec<(usize, usize)>> {
        let mut stars = vec![Vec::new(); self.vertex_count];
        let mut seen = vec![[false; 3]; self.face_count()];
        for f in 0..self.face_count() {
            for c in 0..3 {
                if seen[f][c] {
                    continue;
                }
                let v = self.vertex[f][c];
                let (mut g, mut d) = (f, c);
                while !seen[g][d] {
                    seen[g][d] = true;
                    stars[v].push((g, d));
                    (g, d) = self.rotate(g, d);
                }
            }
        }
        stars
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        for (h, &t) in self.twin.iter().enumerate() {
            if t >= self.twin.len() || self.twin[t] != h || t == h {
                return Err(format!("twin is not an involution at half-edge {h}"));
            }
            if self.tail(h) != self.head(t) || self.head(h) != self.tail(t) {
                return Err(format!("half-edge {h} and its twin disagree on endpoints"));
            }
            let (a, b) = (self.edge_length(h), self.edge_length(t));
            if (a - b).abs() > 1e-12 * a.max(b) {
                return Err(format!("half-edge {h}: lengths {a} and {b} differ"));
            }
        }
        let chi = self.vertex_count as i64 - self.edge_count() as i64 + self.face_count() as i64;
        if chi != 2 {
            return Err(format!("Euler characteristic {chi}"));
        }
        Ok(())
    }

    /// Unfolds the two triangles adjacent to half-edge `h` into the plane.
    /// When both sides of the edge belong to the same face, two copies of it
    /// are developed.
    pub fn develop_quad(&self, h: usize) -> Quad {
        let (f1, s1) = (h / 3, h % 3);
        let t = self.twin[h];
        let (f2, s2) = (t / 3, t % 3);
        let len = self.length[f1][s1];
        let ik = self.length[f1][(s1 + 2) % 3];
        let jk = self.length[f1][(s1 + 1) % 3];
        let il = self.length[f2][(s2 + 1) % 3];
        let jl = self.length[f2][(s2 + 2) % 3];
        let kx = (ik * ik - jk * jk + len * len) / (2.0 * len);
        let ky = trig::quadruple_area(len, ik, jk) / (2.0 * len);
        let lx = (il * il - jl * jl + len * len) / (2.0 * len);
        let ly = -trig::quadruple_area(len, il, jl) / (2.0 * len);
        Quad {
            i: [0.0, 0.0],
            j: [len, 0.0],
            k: [kx, ky],
            l: [lx, ly],
            labels: [
                self.vertex[f1][(s1 + 1) % 3],
                self.vertex[f1][(s1 + 2) % 3],
                self.vertex[f1][s1],
                self.vertex[f2][s2],
            ],
        }
    }

    /// Whether the quadrilateral around `h` is strictly convex and the edge
    /// can be flipped.
    pub fn is_flippable(&self, h: usize) -> bool {
        let t = self.twin[h];
        if h / 3 == t / 3 {
            return false;
        }
        let q = self.develop_quad(h);
        let at_i = angle(q.i, q.j, q.k) + angle(q.i, q.j, q.l);
        let at_j = angle(q.j, q.i, q.k) + angle(q.j, q.i, q.l);
        at_i < std::f64::consts::PI - CONVEX_MARGIN && at_j < std::f64::consts::PI - CONVEX_MARGIN
    }

    /// Replaces the edge of `h` by the other diagonal of its quadrilateral.
    /// Afterwards the new edge is side 1 of both faces; returns its length.
    pub fn flip(&mut self, h: usize) -> Result<f64> {
        if !self.is_flippable(h) {
            return Err(Error::FlipRefused { edge: h });
        }
        let q = self.develop_quad(h);
        let (f1, s1) = (h / 3, h % 3);
        let t = self.twin[h];
        let (f2, s2) = (t / 3, t % 3);
        let [vi, vj, vk, vl] = q.labels;
        let diag = dist(q.k, q.l);

        let old = [
            3 * f1 + (s1 + 1) % 3, // j → k
            3 * f1 + (s1 + 2) % 3, // k → i
            3 * f2 + (s2 + 1) % 3, // i → l
            3 * f2 + (s2 + 2) % 3, // l → j
        ];
        let new = [3 * f2, 3 * f1 + 2, 3 * f1, 3 * f2 + 2];
        let lens: Vec<f64> = old.iter().map(|&e| self.edge_length(e)).collect();
        let map = |e: usize| old.iter().position(|&o| o == e).map_or(e, |p| new[p]);
        let outer: Vec<(usize, usize)> = old
            .iter()
            .zip(&new)
            .map(|(&o, &n)| (n, map(self.twin[o])))
            .collect();

        self.vertex[f1] = [vk, vi, vl];
        self.vertex[f2] = [vl, vj, vk];
        self.length[f1] = [lens[2], diag, lens[1]];
        self.length[f2] = [lens[0], diag, lens[3]];
        for (n, m) in outer {
            self.twin[n] = m;
            self.twin[m] = n;
        }
        self.twin[3 * f1 + 1] = 3 * f2 + 1;
        self.twin[3 * f2 + 1] = 3 * f1 + 1;
        Ok(diag)
    }

    /// Whether the piecewise quadratic extension of `q` fails to be
    /// Q-concave across the edge of `h`.
    pub fn edge_is_bad(&self, h: usize, q: &[f64]) -> bool {
        let quad = self.develop_quad(h);
        let [vi, vj, vk, vl] = quad.labels;
        let scale = [q[vi], q[vj], q[vk], q[vl]]
            .iter()
            .fold(1.0f64, |m, x| m.max(x.abs()));
        match ext_value([quad.i, quad.j, quad.k], [q[vi], q[vj], q[vk]], quad.l) {
            Ok(ext) => q[vl] > ext + BAD_TOLERANCE * scale,
            Err(_) => false,
        }
    }

    /// `ext_{ijk}(l) − q_l` across the edge of `h`; zero for flat edges.
    pub fn concavity_gap(&self, h: usize, q: &[f64]) -> f64 {
        let quad = self.develop_quad(h);
        let [vi, vj, vk, vl] = quad.labels;
        ext_value([quad.i, quad.j, quad.k], [q[vi], q[vj], q[vk]], quad.l)
            .map_or(f64::NAN, |e| e - q[vl])
    }

    /// Debug dump of faces, lengths and adjacency.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "vertex_count": self.vertex_count,
            "faces": self.vertex,
            "lengths": self.length,
            "twin": self.twin,
        })
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Angle at `p` between the directions to `a` and `b`.
fn angle(p: Point, a: Point, b: Point) -> f64 {
    let (u, v) = ([a[0] - p[0], a[1] - p[1]], [b[0] - p[0], b[1] - p[1]]);
    (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
}

/// Value at `target` of the function `|x − a|² + b` taking the values `q` at
/// the three points.
pub fn ext_value(points: [Point; 3], q: [f64; 3], target: Point) -> Result<f64> {
    // Subtracting the equation at the first point cancels the quadratic terms:
    // 2⟨p_m − p_0, −a⟩ = q_m − q_0 − |p_m|² + |p_0|², written relative to p_0.
    let o = points[0];
    let rel = |p: Point| [p[0] - o[0], p[1] - o[1]];
    let (u, v) = (rel(points[1]), rel(points[2]));
    let det = u[0] * v[1] - u[1] * v[0];
    let scale = (u[0].hypot(u[1]) * v[0].hypot(v[1])).max(f64::MIN_POSITIVE);
    if det.abs() <= 1e-14 * scale {
        return Err(Error::Collinear);
    }
    // Q(p_0 + y) = |y|² + ⟨c, y⟩ + q_0 with c solving ⟨c, u⟩ = q_1 − q_0 − |u|²
    // and ⟨c, v⟩ = q_2 − q_0 − |v|².
    let ru = q[1] - q[0] - (u[0] * u[0] + u[1] * u[1]);
    let rv = q[2] - q[0] - (v[0] * v[0] + v[1] * v[1]);
    let c = [(ru * v[1] - rv * u[1]) / det, (u[0] * rv - v[0] * ru) / det];
    let y = rel(target);
    Ok(y[0] * y[0] + y[1] * y[1] + c[0] * y[0] + c[1] * y[1] + q[0])
}

/// Same as [`ext_value`] through a generic dense solve; used as an oracle.
pub fn ext_value_dense(points: [Point; 3], q: [f64; 3], target: Point) -> Result<f64> {
    let m = Matrix3::from_fn(|r, c| if c < 2 { points[r][c] } else { 1.0 });
    let rhs = Vector3::from_fn(|r, _| q[r] - points[r][0].powi(2) - points[r][1].powi(2));
    let sol = m.lu().solve(&rhs).ok_or(Error::Collinear)?;
    Ok(target[0].powi(2) + target[1].powi(2) + sol[0] * target[0] + sol[1] * target[1] + sol[2])
}

pub fn default_max_flips(mesh: &CornerMesh) -> usize {
    100 * mesh.edge_count() * mesh.edge_count()
}

/// Flips bad edges until every edge is good for the weights `q`.
pub fn weighted_delaunay(mesh: &mut CornerMesh, q: &[f64], max_flips: usize) -> Result<Vec<FlipEvent>> {
    let mut queue: VecDeque<usize> = mesh.edges().into();
    let mut queued = vec![false; mesh.twin.len()];
    for &h in &queue {
        queued[h] = true;
    }
    let mut events = Vec::new();
    while let Some(h) = queue.pop_front() {
        queued[h] = false;
        if !mesh.edge_is_bad(h, q) {
            continue;
        }
        if events.len() >= max_flips {
            return Err(Error::FlipLimit { limit: max_flips });
        }
        if !mesh.is_flippable(h) {
            return Err(Error::Inadmissible { edge: h });
        }
        let before = if cfg!(debug_assertions) { Some(diagonal_crossing_values(mesh, h, q)) } else { None };
        let removed = (mesh.tail(h), mesh.head(h));
        let (f1, f2) = (h / 3, mesh.twin[h] / 3);
        let length = mesh.flip(h)?;
        if let Some((old, point)) = before {
            let new = pq_value_on_new_diagonal(mesh, f1, point, q);
            debug_assert!(
                new >= old - 1e-9 * old.abs().max(1.0),
                "extension decreased across a flip: {old} -> {new}"
            );
        }
        let d = 3 * f1 + 1;
        events.push(FlipEvent { removed, inserted: (mesh.tail(d), mesh.head(d)), length });
        for e in [3 * f1, 3 * f1 + 2, 3 * f2, 3 * f2 + 2] {
            let e = e.min(mesh.twin[e]);
            if !queued[e] {
                queued[e] = true;
                queue.push_back(e);
            }
        }
    }
    Ok(events)
}

/// Value of the old extension where the two diagonals of the quadrilateral
/// cross, and that point measured along `k → l`.
fn diagonal_crossing_values(mesh: &CornerMesh, h: usize, q: &[f64]) -> (f64, f64) {
    let quad = mesh.develop_quad(h);
    let [vi, vj, vk, _] = quad.labels;
    // crossing of kl with the x-axis
    let s = quad.k[1] / (quad.k[1] - quad.l[1]);
    let x = [quad.k[0] + s * (quad.l[0] - quad.k[0]), 0.0];
    let old = ext_value([quad.i, quad.j, quad.k], [q[vi], q[vj], q[vk]], x).unwrap_or(f64::NAN);
    (old, s * dist(quad.k, quad.l))
}

/// Value of the new extension on the diagonal `k → l` of face `f1` after a
/// flip, at distance `along` from `k`.
fn pq_value_on_new_diagonal(mesh: &CornerMesh, f1: usize, along: f64, q: &[f64]) -> f64 {
    // new face f1 is (k, i, l); the diagonal is side 1, from l to k
    let h = 3 * f1 + 1;
    let quad = mesh.develop_quad(h);
    let [vl, vk, vi, _] = quad.labels;
    let len = dist(quad.i, quad.j);
    let x = [len - along, 0.0];
    ext_value([quad.i, quad.j, quad.k], [q[vl], q[vk], q[vi]], x).unwrap_or(f64::NAN)
}

/// Flips `count` randomly chosen flippable edges.
pub fn random_flips<R: Rng>(mesh: &mut CornerMesh, rng: &mut R, count: usize) -> usize {
    let mut done = 0;
    for _ in 0..20 * count {
        if done == count {
            break;
        }
        let h = rng.gen_range(0..mesh.twin.len());
        if mesh.is_flippable(h) && mesh.flip(h).is_ok() {
            done += 1;
        }
    }
    done
}

/// The tesselation obtained from a weighted Delaunay triangulation by erasing
/// the edges across which the extension is flat.
#[derive(Debug, Clone)]
pub struct Tesselation {
    /// Per half-edge.
    pub inessential: Vec<bool>,
    /// Sorted region descriptors; equal for equal tesselations.
    pub signature: Vec<Region>,
}

/// A region of the tesselation: its essential boundary edges as
/// `(min label, max label, rounded length)` and its rounded area.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Region {
    pub boundary: Vec<(usize, usize, i64)>,
    pub area: i64,
}

pub fn canonical_tesselation(mesh: &CornerMesh, q: &[f64]) -> Tesselation {
    let nh = mesh.twin.len();
    let mut inessential = vec![false; nh];
    for h in mesh.edges() {
        let quad = mesh.develop_quad(h);
        let scale = quad.labels.iter().fold(1.0f64, |m, &v| m.max(q[v].abs()));
        let gap = mesh.concavity_gap(h, q);
        if gap.abs() <= FLAT_EDGE_TOLERANCE * scale {
            inessential[h] = true;
            inessential[mesh.twin[h]] = true;
        }
    }
    let nf = mesh.face_count();
    let mut parent: Vec<usize> = (0..nf).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for h in 0..nh {
        if inessential[h] {
            let (a, b) = (find(&mut parent, h / 3), find(&mut parent, mesh.twin[h] / 3));
            parent[a.max(b)] = a.min(b);
        }
    }
    let round = |x: f64| (x * 1e9).round() as i64;
    let mut regions: std::collections::BTreeMap<usize, Region> = Default::default();
    for f in 0..nf {
        let root = find(&mut parent, f);
        let reg = regions.entry(root).or_insert(Region { boundary: Vec::new(), area: 0 });
        let l = mesh.length[f];
        reg.area += round(trig::triangle_area(l[0], l[1], l[2]));
        for s in 0..3 {
            let h = 3 * f + s;
            if !inessential[h] {
                let (a, b) = (mesh.tail(h), mesh.head(h));
                reg.boundary.push((a.min(b), a.max(b), round(mesh.edge_length(h))));
            }
        }
    }
    let mut signature: Vec<Region> = regions
        .into_values()
        .map(|mut r| {
            r.boundary.sort();
            // areas summed per triangle; compare at a coarser grain
            r.area = (r.area as f64 / 1e3).round() as i64;
            r
        })
        .collect();
    signature.sort();
    Tesselation { inessential, signature }
}
