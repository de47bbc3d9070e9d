//! Developments (glued Euclidean triangles) and the polyhedral metric they
//! define on the sphere.
//!
//! Side `k` of a triangle is opposite corner `k` and runs from corner
//! `k + 1` to corner `k + 2` (indices mod 3, corners in counterclockwise
//! order). Two glued sides are identified with reversed orientation, so
//! corner `s + 1` of one side meets corner `s' + 2` of the other.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig;

/// Relative tolerance for matching lengths of glued sides.
pub const GLUE_TOLERANCE: f64 = 1e-12;

/// Absolute tolerance for the discrete Gauss-Bonnet check.
pub const GAUSS_BONNET_TOLERANCE: f64 = 1e-9;

/// Deficits at or below this value are treated as flat (not a cone point).
pub const FLAT_TOLERANCE: f64 = 1e-12;

/// A side of a triangle: `(triangle index, side index)`.
pub type SideRef = (usize, usize);

/// Validated set of glued triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Development {
    pub triangles: Vec<[f64; 3]>,
    pub gluings: Vec<(SideRef, SideRef)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTriangle {
    sides: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDevelopment {
    triangles: Vec<RawTriangle>,
    gluings: Vec<[[usize; 2]; 2]>,
}

/// Parses and validates a development from its JSON document.
pub fn parse_development(text: &str) -> Result<Development> {
    let raw: RawDevelopment = serde_json::from_str(text)?;
    Development::new(
        raw.triangles.into_iter().map(|t| t.sides).collect(),
        raw.gluings
            .into_iter()
            .map(|[a, b]| ((a[0], a[1]), (b[0], b[1])))
            .collect(),
    )
}

impl Development {
    /// Validates the gluing data and snaps glued side lengths to their mean.
    pub fn new(mut triangles: Vec<[f64; 3]>, gluings: Vec<(SideRef, SideRef)>) -> Result<Self> {
        let mut problems = Vec::new();
        let n = triangles.len();
        if n == 0 {
            problems.push("no triangles".to_string());
        }
        let mut seen = vec![[0usize; 3]; n];
        for (g, &(a, b)) in gluings.iter().enumerate() {
            let mut ok = true;
            for &(t, s) in [a, b].iter() {
                if t >= n || s >= 3 {
                    problems.push(format!("gluing {g}: side ({t}, {s}) out of range"));
                    ok = false;
                }
            }
            if !ok {
                continue;
            }
            if a == b {
                problems.push(format!("gluing {g}: side ({}, {}) glued to itself", a.0, a.1));
                continue;
            }
            seen[a.0][a.1] += 1;
            seen[b.0][b.1] += 1;
        }
        for (t, counts) in seen.iter().enumerate() {
            for (s, &c) in counts.iter().enumerate() {
                if c != 1 {
                    problems.push(format!("side ({t}, {s}) appears in {c} gluings, expected 1"));
                }
            }
        }
        for (t, sides) in triangles.iter().enumerate() {
            if !trig::is_strict_triangle(sides[0], sides[1], sides[2]) {
                problems.push(format!(
                    "triangle {t}: sides ({}, {}, {}) violate the strict triangle inequality",
                    sides[0], sides[1], sides[2]
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Schema(problems));
        }
        for (g, &(a, b)) in gluings.iter().enumerate() {
            let (la, lb) = (triangles[a.0][a.1], triangles[b.0][b.1]);
            if (la - lb).abs() > GLUE_TOLERANCE * la.max(lb) {
                problems.push(format!("gluing {g}: side lengths {la} and {lb} differ"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Schema(problems));
        }
        for &(a, b) in &gluings {
            let mean = 0.5 * (triangles[a.0][a.1] + triangles[b.0][b.1]);
            triangles[a.0][a.1] = mean;
            triangles[b.0][b.1] = mean;
        }
        Ok(Development { triangles, gluings })
    }

    /// Serializes to the JSON interchange format.
    pub fn to_json(&self) -> String {
        let raw = RawDevelopment {
            triangles: self.triangles.iter().map(|&sides| RawTriangle { sides }).collect(),
            gluings: self
                .gluings
                .iter()
                .map(|&(a, b)| [[a.0, a.1], [b.0, b.1]])
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("development serializes")
    }

    /// Partner of every side under the gluing, `partner[t][s]`.
    pub fn partners(&self) -> Vec<[SideRef; 3]> {
        let mut p = vec![[(usize::MAX, 0); 3]; self.triangles.len()];
        for &(a, b) in &self.gluings {
            p[a.0][a.1] = b;
            p[b.0][b.1] = a;
        }
        p
    }
}

/// The cone metric of a development: vertices, cone angles and deficits.
#[derive(Debug, Clone)]
pub struct PolyhedralMetric {
    pub development: Development,
    /// Vertex index of every triangle corner.
    pub corner_vertex: Vec<[usize; 3]>,
    /// Smallest `(triangle, corner)` of each vertex orbit; vertices are numbered in this order.
    pub vertex_labels: Vec<(usize, usize)>,
    pub cone_angles: Vec<f64>,
    pub deficits: Vec<f64>,
    pub euler: (usize, usize, usize),
}

impl PolyhedralMetric {
    pub fn vertex_count(&self) -> usize {
        self.cone_angles.len()
    }

    /// `Σ δ_i − 4π`.
    pub fn gauss_bonnet_residual(&self) -> f64 {
        self.deficits.iter().sum::<f64>() - 4.0 * PI
    }

    /// Largest side length in the development.
    pub fn max_edge(&self) -> f64 {
        self.development
            .triangles
            .iter()
            .flat_map(|t| t.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Total area of the surface.
    pub fn area(&self) -> f64 {
        self.development
            .triangles
            .iter()
            .map(|t| trig::triangle_area(t[0], t[1], t[2]))
            .sum()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Computes vertex orbits, cone angles and deficits, and checks that the
/// result is a convex polyhedral metric on the sphere.
pub fn build_metric(dev: Development) -> Result<PolyhedralMetric> {
    let nt = dev.triangles.len();
    let corner = |t: usize, c: usize| 3 * t + c;
    let mut parent: Vec<usize> = (0..3 * nt).collect();
    for &((t, s), (u, r)) in &dev.gluings {
        union(&mut parent, corner(t, (s + 1) % 3), corner(u, (r + 2) % 3));
        union(&mut parent, corner(t, (s + 2) % 3), corner(u, (r + 1) % 3));
    }

    // Roots are the smallest corner index in each orbit, so sorting roots
    // gives the labeling by smallest (triangle, corner).
    let mut root_index = BTreeMap::new();
    for c in 0..3 * nt {
        let r = find(&mut parent, c);
        root_index.entry(r).or_insert(());
    }
    let roots: Vec<usize> = root_index.keys().copied().collect();
    let index_of: BTreeMap<usize, usize> = roots.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut corner_vertex = vec![[0usize; 3]; nt];
    for t in 0..nt {
        for c in 0..3 {
            let r = find(&mut parent, corner(t, c));
            corner_vertex[t][c] = index_of[&r];
        }
    }
    let vertex_labels: Vec<(usize, usize)> = roots.iter().map(|&r| (r / 3, r % 3)).collect();

    let v = roots.len();
    let e = dev.gluings.len();
    let f = nt;
    if v + f != e + 2 {
        return Err(Error::Topology(format!(
            "Euler characteristic V − E + F = {} − {} + {} ≠ 2",
            v, e, f
        )));
    }
    check_connected(&dev)?;
    check_vertex_links(&dev, &corner_vertex, v)?;

    let mut cone = vec![0.0; v];
    for (t, sides) in dev.triangles.iter().enumerate() {
        let ang = trig::euclidean_angles(sides[0], sides[1], sides[2])?;
        for c in 0..3 {
            cone[corner_vertex[t][c]] += ang.0[c];
        }
    }
    let deficits: Vec<f64> = cone.iter().map(|a| 2.0 * PI - a).collect();
    let bad: Vec<(usize, f64)> = deficits
        .iter()
        .enumerate()
        .filter(|(_, &d)| !(d > FLAT_TOLERANCE && d < 2.0 * PI))
        .map(|(i, &d)| (i, d))
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonConvex(bad));
    }
    let metric = PolyhedralMetric {
        development: dev,
        corner_vertex,
        vertex_labels,
        cone_angles: cone,
        deficits,
        euler: (v, e, f),
    };
    let gb = metric.gauss_bonnet_residual();
    if gb.abs() > GAUSS_BONNET_TOLERANCE {
        return Err(Error::Topology(format!("Gauss-Bonnet residual {gb:e}")));
    }
    Ok(metric)
}

fn check_connected(dev: &Development) -> Result<()> {
    let nt = dev.triangles.len();
    let mut parent: Vec<usize> = (0..nt).collect();
    for &((t, _), (u, _)) in &dev.gluings {
        union(&mut parent, t, u);
    }
    let r0 = find(&mut parent, 0);
    if (0..nt).any(|t| find(&mut parent, t) != r0) {
        return Err(Error::Topology("development is disconnected".into()));
    }
    Ok(())
}

/// Each vertex must have a single cycle of corners around it.
fn check_vertex_links(dev: &Development, corner_vertex: &[[usize; 3]], v: usize) -> Result<()> {
    let partners = dev.partners();
    let nt = dev.triangles.len();
    let mut visited = vec![[false; 3]; nt];
    let mut cycles = vec![0usize; v];
    for t in 0..nt {
        for c in 0..3 {
            if visited[t][c] {
                continue;
            }
            cycles[corner_vertex[t][c]] += 1;
            let (mut ft, mut fc) = (t, c);
            while !visited[ft][fc] {
                visited[ft][fc] = true;
                // side from corner fc to fc + 1 is side fc + 2
                let (u, r) = partners[ft][(fc + 2) % 3];
                ft = u;
                fc = (r + 2) % 3;
            }
        }
    }
    if let Some(i) = cycles.iter().position(|&k| k != 1) {
        return Err(Error::Topology(format!(
            "vertex {i} has {} corner cycles (not a manifold point)",
            cycles[i]
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn doubly_covered_triangle() {
        let dev = parse_development(&samples::doubly_covered_triangle(1.0, 1.0, 1.0).to_json()).unwrap();
        assert_eq!(dev.triangles.len(), 2);
        assert_eq!(dev.gluings.len(), 3);
        let m = build_metric(dev).unwrap();
        assert_eq!(m.vertex_count(), 3);
        for (&a, &d) in m.cone_angles.iter().zip(&m.deficits) {
            assert!((a - 2.0 * PI / 3.0).abs() < 1e-14);
            assert!((d - 4.0 * PI / 3.0).abs() < 1e-14);
        }
        assert!(m.gauss_bonnet_residual().abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_development() {
        let dev = samples::regular_tetrahedron(1.0);
        assert_eq!(dev.gluings.len(), 6);
        let m = build_metric(dev).unwrap();
        assert_eq!(m.euler, (4, 6, 4));
        for &d in &m.deficits {
            assert!((d - PI).abs() < 1e-14);
        }
    }

    #[test]
    fn cube_development() {
        let m = build_metric(samples::cube(1.0)).unwrap();
        assert_eq!(m.vertex_count(), 8);
        for &d in &m.deficits {
            assert!((d - PI / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn self_glued_side_rejected() {
        let text = r#"{"triangles":[{"sides":[1,1,1]}],"gluings":[[[0,0],[0,0]],[[0,1],[0,2]]]}"#;
        match parse_development(text) {
            Err(Error::Schema(v)) => assert!(v.iter().any(|s| s.contains("glued to itself"))),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(parse_development("{\"triangles\": ["), Err(Error::Json(_))));
    }

    #[test]
    fn unmatched_and_mismatched_sides() {
        let text = r#"{"triangles":[{"sides":[1,1,1]},{"sides":[1,1,1]}],"gluings":[[[0,0],[1,0]],[[0,1],[1,2]]]}"#;
        assert!(matches!(parse_development(text), Err(Error::Schema(_))));
        let text = r#"{"triangles":[{"sides":[1,1,1]},{"sides":[1,1,1.001]}],"gluings":[[[0,0],[1,0]],[[0,1],[1,2]],[[0,2],[1,1]]]}"#;
        assert!(matches!(parse_development(text), Err(Error::Schema(_))));
    }

    #[test]
    fn triangle_inequality_violation() {
        let text = r#"{"triangles":[{"sides":[1,1,3]},{"sides":[1,1,3]}],"gluings":[[[0,0],[1,0]],[[0,1],[1,2]],[[0,2],[1,1]]]}"#;
        assert!(matches!(parse_development(text), Err(Error::Schema(_))));
    }

    #[test]
    fn lengths_snapped_to_mean() {
        let mut dev = samples::doubly_covered_triangle(1.0, 1.0, 1.0);
        dev.triangles[0][0] = 1.0 + 2e-13;
        let dev = Development::new(dev.triangles, dev.gluings).unwrap();
        assert_eq!(dev.triangles[0][0], dev.triangles[1][0]);
    }

    #[test]
    fn flat_vertex_rejected() {
        // a hexagonal fan around a flat interior point, doubled
        let m = build_metric(samples::doubly_covered_fan(6, 1.0));
        assert!(matches!(m, Err(Error::NonConvex(_))));
    }

    #[test]
    fn shuffled_input_same_cone_angles() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let dev = samples::cube(1.3);
        let base = build_metric(dev.clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let mut perm: Vec<usize> = (0..dev.triangles.len()).collect();
            perm.shuffle(&mut rng);
            let mut inv = vec![0; perm.len()];
            for (new, &old) in perm.iter().enumerate() {
                inv[old] = new;
            }
            let tris = perm.iter().map(|&o| dev.triangles[o]).collect();
            let glu = dev
                .gluings
                .iter()
                .map(|&((a, s), (b, r))| ((inv[a], s), (inv[b], r)))
                .collect();
            let m = build_metric(Development::new(tris, glu).unwrap()).unwrap();
            let mut x = m.cone_angles.clone();
            let mut y = base.cone_angles.clone();
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }
}
