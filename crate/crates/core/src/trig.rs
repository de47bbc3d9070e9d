//! Euclidean and spherical triangle kernel.
//!
//! Angles are indexed like the sides: angle `k` is opposite side `k`.
//! Derivative matrices are laid out as `m[angle][side]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Denominator sines below this value make a derivative unusable.
pub const SINE_FLOOR: f64 = 1e-10;

/// Relative slack under which a Euclidean triangle counts as degenerate.
const DEGENERATE_REL: f64 = 1e-14;

/// The three angles of a triangle, each opposite the side with the same index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleAngles(pub [f64; 3]);

impl TriangleAngles {
    pub fn alpha(&self) -> f64 {
        self.0[0]
    }
    pub fn beta(&self) -> f64 {
        self.0[1]
    }
    pub fn gamma(&self) -> f64 {
        self.0[2]
    }
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// 3×3 matrix of angle derivatives, `m[i][j] = ∂angle_i / ∂side_j`.
pub type AngleJacobian = [[f64; 3]; 3];

/// Four times the area of a Euclidean triangle, by Kahan's stable Heron form.
/// Returns a non-positive value for degenerate or impossible triangles.
pub fn quadruple_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if p <= 0.0 {
        return 0.0;
    }
    p.sqrt()
}

/// Area of a Euclidean triangle from its side lengths.
pub fn triangle_area(a: f64, b: f64, c: f64) -> f64 {
    0.25 * quadruple_area(a, b, c)
}

/// Whether `(a, b, c)` satisfies the strict triangle inequality with the
/// degeneracy margin used throughout the crate.
pub fn is_strict_triangle(a: f64, b: f64, c: f64) -> bool {
    let per = a + b + c;
    let margin = DEGENERATE_REL * per;
    a > 0.0
        && b > 0.0
        && c > 0.0
        && a.is_finite()
        && b.is_finite()
        && c.is_finite()
        && b + c - a > margin
        && a + c - b > margin
        && a + b - c > margin
}

/// Angles of the Euclidean triangle with sides `a, b, c`.
pub fn euclidean_angles(a: f64, b: f64, c: f64) -> Result<TriangleAngles> {
    if !is_strict_triangle(a, b, c) {
        return Err(Error::DegenerateTriangle(a, b, c));
    }
    let q = quadruple_area(a, b, c);
    let s = [a, b, c];
    let mut out = [0.0; 3];
    for k in 0..3 {
        let (x, y, z) = (s[k], s[(k + 1) % 3], s[(k + 2) % 3]);
        // tan(angle) = 4·area / (y² + z² − x²)
        out[k] = q.atan2(y * y + z * z - x * x);
    }
    Ok(TriangleAngles(out))
}

/// Angle opposite `a` in the Euclidean triangle with sides `a, b, c`.
pub fn euclidean_angle(a: f64, b: f64, c: f64) -> Result<f64> {
    Ok(euclidean_angles(a, b, c)?.alpha())
}

/// Angles of the spherical triangle (unit sphere) with side lengths `a, b, c`.
pub fn spherical_angles(a: f64, b: f64, c: f64) -> Result<TriangleAngles> {
    let sides = [a, b, c];
    let valid = sides.iter().all(|&s| s > 0.0 && s < PI)
        && a < b + c
        && b < a + c
        && c < a + b
        && a + b + c < 2.0 * PI;
    if !valid {
        return Err(Error::NoSphericalTriangle(a, b, c));
    }
    // half-angle form, which keeps its precision for small triangles
    let p = 0.5 * (a + b + c);
    let sp = p.sin();
    let d = [(p - a).sin(), (p - b).sin(), (p - c).sin()];
    let mut out = [0.0; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        out[k] = 2.0 * (d[i] * d[j]).max(0.0).sqrt().atan2((sp * d[k]).max(0.0).sqrt());
    }
    Ok(TriangleAngles(out))
}

/// Side opposite angle `gamma` in the spherical triangle with adjacent sides `a, b`.
pub fn spherical_third_side(a: f64, b: f64, gamma: f64) -> f64 {
    let hav = |x: f64| (0.5 * x).sin().powi(2);
    let h = hav(a - b) + a.sin() * b.sin() * hav(gamma);
    2.0 * h.clamp(0.0, 1.0).sqrt().asin()
}

fn checked(s: f64) -> Result<f64> {
    if s.abs() < SINE_FLOOR {
        Err(Error::NearDegenerate(s))
    } else {
        Ok(s)
    }
}

/// `∂(α,β,γ)/∂(a,b,c)` for a spherical triangle.
pub fn spherical_angle_derivatives(a: f64, b: f64, c: f64) -> Result<AngleJacobian> {
    let ang = spherical_angles(a, b, c)?.0;
    let sides = [a, b, c];
    let mut sin_s = [0.0; 3];
    let mut sin_a = [0.0; 3];
    for k in 0..3 {
        sin_s[k] = checked(sides[k].sin())?;
        sin_a[k] = checked(ang[k].sin())?;
    }
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                let (p, q) = ((i + 1) % 3, (i + 2) % 3);
                m[i][i] = 1.0 / (sin_s[p] * sin_a[q]);
            } else {
                let k = 3 - i - j;
                m[i][j] = -(ang[k].cos() / sin_a[k]) / sin_s[j];
            }
        }
    }
    Ok(m)
}

/// `∂(α,β,γ)/∂(a,b,c)` for a Euclidean triangle.
pub fn euclidean_angle_derivatives(a: f64, b: f64, c: f64) -> Result<AngleJacobian> {
    let ang = euclidean_angles(a, b, c)?.0;
    let sides = [a, b, c];
    let mut sin_a = [0.0; 3];
    for k in 0..3 {
        sin_a[k] = checked(ang[k].sin())?;
    }
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                let (p, q) = ((i + 1) % 3, (i + 2) % 3);
                m[i][i] = 1.0 / (sides[p] * sin_a[q]);
            } else {
                let k = 3 - i - j;
                m[i][j] = -(ang[k].cos() / sin_a[k]) / sides[j];
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_jacobian<F>(f: F, s: [f64; 3], h: f64) -> AngleJacobian
    where
        F: Fn(f64, f64, f64) -> TriangleAngles,
    {
        let mut m = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut p = s;
            let mut q = s;
            p[j] += h;
            q[j] -= h;
            let fp = f(p[0], p[1], p[2]).0;
            let fq = f(q[0], q[1], q[2]).0;
            for i in 0..3 {
                m[i][j] = (fp[i] - fq[i]) / (2.0 * h);
            }
        }
        m
    }

    #[test]
    fn equilateral_euclidean() {
        let t = euclidean_angles(1.0, 1.0, 1.0).unwrap();
        for a in t.0 {
            assert!((a - PI / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn right_triangle() {
        let t = euclidean_angles(3.0, 4.0, 5.0).unwrap();
        assert!((t.gamma() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn obtuse_sum_is_pi() {
        let t = euclidean_angles(1.0, 1.0, 1.9).unwrap();
        assert!((t.sum() - PI).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(euclidean_angles(1.0, 1.0, 2.0).is_err());
        assert!(euclidean_angles(1.0, 1.0, 2.0 - 1e-16).is_err());
        assert!(euclidean_angles(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn octant_triangle() {
        let h = PI / 2.0;
        let t = spherical_angles(h, h, h).unwrap();
        for a in t.0 {
            assert!((a - h).abs() < 1e-15);
        }
        let m = spherical_angle_derivatives(h, h, h).unwrap();
        assert!((m[0][0] - 1.0).abs() < 1e-15);
        assert!(m[0][1].abs() < 1e-15);
    }

    #[test]
    fn equilateral_spherical_closed_form() {
        let a = PI / 3.0;
        let t = spherical_angles(a, a, a).unwrap();
        // cos α = (cos a − cos² a) / sin² a
        let expected = ((a.cos() - a.cos().powi(2)) / a.sin().powi(2)).acos();
        for x in t.0 {
            assert!((x - expected).abs() < 1e-14);
            assert!(x > PI / 3.0);
        }
    }

    #[test]
    fn spherical_perimeter_too_large() {
        assert!(spherical_angles(2.0, 2.0, 2.5).is_err());
        assert!(spherical_angles(0.5, 0.5, 1.5).is_err());
    }

    #[test]
    fn spherical_equilateral_symmetry() {
        let a = 1.1;
        let m = spherical_angle_derivatives(a, a, a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (pi, pj) = ((i + 1) % 3, (j + 1) % 3);
                assert!((m[i][j] - m[pi][pj]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn euclidean_derivative_values() {
        let m = euclidean_angle_derivatives(1.0, 1.0, 1.0).unwrap();
        assert!((m[0][0] - 2.0 / 3f64.sqrt()).abs() < 1e-14);
        let m = euclidean_angle_derivatives(3.0, 4.0, 5.0).unwrap();
        assert!(m[0][1].abs() < 1e-15);
    }

    #[test]
    fn third_side_inverts_angle() {
        let (a, b, c) = (0.7, 0.9, 1.1);
        let t = spherical_angles(a, b, c).unwrap();
        assert!((spherical_third_side(a, b, t.gamma()) - c).abs() < 1e-12);
    }

    fn spherical_sides() -> impl Strategy<Value = [f64; 3]> {
        (0.05f64..3.0, 0.05f64..3.0, 0.05f64..3.0)
            .prop_map(|(a, b, c)| [a, b, c])
            .prop_filter("valid spherical triangle", |s| {
                spherical_angles(s[0], s[1], s[2])
                    .map(|t| t.0.iter().all(|&x| x > 0.2 && x < PI - 0.2))
                    .unwrap_or(false)
                    && s[0] + s[1] + s[2] < 2.0 * PI - 0.1
            })
    }

    fn euclidean_sides() -> impl Strategy<Value = [f64; 3]> {
        (0.1f64..5.0, 0.1f64..5.0, 0.1f64..5.0)
            .prop_map(|(a, b, c)| [a, b, c])
            .prop_filter("valid triangle", |s| {
                euclidean_angles(s[0], s[1], s[2])
                    .map(|t| t.0.iter().all(|&x| x > 0.05))
                    .unwrap_or(false)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn spherical_derivatives_match_fd(s in spherical_sides()) {
            let m = spherical_angle_derivatives(s[0], s[1], s[2]).unwrap();
            let fd = fd_jacobian(|a, b, c| spherical_angles(a, b, c).unwrap(), s, 1e-6);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((m[i][j] - fd[i][j]).abs() < 1e-6,
                        "entry ({},{}) analytic {} fd {}", i, j, m[i][j], fd[i][j]);
                }
            }
        }

        #[test]
        fn euclidean_derivatives_match_fd(s in euclidean_sides()) {
            let m = euclidean_angle_derivatives(s[0], s[1], s[2]).unwrap();
            let fd = fd_jacobian(|a, b, c| euclidean_angles(a, b, c).unwrap(), s, 1e-6);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((m[i][j] - fd[i][j]).abs() < 1e-6);
                }
            }
            for j in 0..3 {
                let col: f64 = (0..3).map(|i| m[i][j]).sum();
                prop_assert!(col.abs() < 1e-10);
            }
        }

        #[test]
        fn euclidean_angles_sum_to_pi(s in euclidean_sides()) {
            let t = euclidean_angles(s[0], s[1], s[2]).unwrap();
            prop_assert!((t.sum() - PI).abs() < 1e-12);
        }
    }
}
