//! Quadrature on full elements, cut polygons and boundary segments.

use crate::error::{FcmError, Result};
use crate::geometry::{polygon_area, BoundarySegment, Classification, CutMesh};
use crate::point::Vec2;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint<T> {
    pub point: Vec2<T>,
    pub weight: T,
}

/// Boundary point with the segment's outward normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryQuadPoint<T> {
    pub point: Vec2<T>,
    pub weight: T,
    pub normal: Vec2<T>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    assert!(n >= 1, "at least one Gauss point");
    let mut out = vec![(0.0f64, 0.0f64); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and P_n'
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    out.into_iter().map(|(x, w)| (T::lit(x), T::lit(w))).collect()
}

/// Tensor Gauss rule with `n` points per axis on `[lo, lo + h]^2`.
pub fn square_rule<T: Real>(lo: Vec2<T>, h: T, n: usize) -> Vec<QuadPoint<T>> {
    let gl = gauss_legendre::<T>(n);
    let half = h * T::lit(0.5);
    let mut out = Vec::with_capacity(n * n);
    for &(yi, wy) in &gl {
        for &(xi, wx) in &gl {
            out.push(QuadPoint {
                point: Vec2::new(lo.x + half * (xi + T::one()), lo.y + half * (yi + T::one())),
                weight: wx * wy * half * half,
            });
        }
    }
    out
}

// (weight, barycentric orbit) with orbits: 0 = centroid, 1 = (a, b, b) perms, 2 = all perms of (a, b, c)
type DunavantOrbit = (f64, u8, [f64; 3]);

const DUNAVANT_1: &[DunavantOrbit] = &[(1.0, 0, [1.0 / 3.0; 3])];
const DUNAVANT_2: &[DunavantOrbit] = &[(1.0 / 3.0, 1, [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0])];
const DUNAVANT_4: &[DunavantOrbit] = &[
    (0.223381589678011, 1, [0.108103018168070, 0.445948490915965, 0.445948490915965]),
    (0.109951743655322, 1, [0.816847572980459, 0.091576213509771, 0.091576213509771]),
];
const DUNAVANT_6: &[DunavantOrbit] = &[
    (0.116786275726379, 1, [0.501426509658179, 0.249286745170910, 0.249286745170910]),
    (0.050844906370207, 1, [0.873821971016996, 0.063089014491502, 0.063089014491502]),
    (0.082851075618374, 2, [0.053145049844817, 0.310352451033784, 0.636502499121399]),
];

fn barycentric_points(orbits: &[DunavantOrbit]) -> Vec<(f64, [f64; 3])> {
    let mut out = Vec::new();
    for &(w, kind, [a, b, c]) in orbits {
        match kind {
            0 => out.push((w, [a, b, c])),
            1 => {
                out.push((w, [a, b, b]));
                out.push((w, [b, a, b]));
                out.push((w, [b, b, a]));
            }
            _ => {
                for perm in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    out.push((w, perm));
                }
            }
        }
    }
    out
}

/// Rule on the triangle `(a, b, c)` exact for polynomials of total degree `degree`.
/// Weights carry the signed area of the triangle.
pub fn triangle_rule<T: Real>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>, degree: usize) -> Vec<QuadPoint<T>> {
    let area = (b - a).cross(c - a) * T::lit(0.5);
    let table = match degree {
        0 | 1 => Some(DUNAVANT_1),
        2 => Some(DUNAVANT_2),
        3 | 4 => Some(DUNAVANT_4),
        5 | 6 => Some(DUNAVANT_6),
        _ => None,
    };
    if let Some(table) = table {
        return barycentric_points(table)
            .into_iter()
            .map(|(w, [l0, l1, l2])| QuadPoint {
                point: a * T::lit(l0) + b * T::lit(l1) + c * T::lit(l2),
                weight: T::lit(w) * area,
            })
            .collect();
    }
    // collapsed Gauss: (u, v) in [0,1]^2 -> a + u (b - a) + u v (c - b)
    let n = (degree + 2).div_ceil(2);
    let gl = gauss_legendre::<T>(n);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut out = Vec::with_capacity(n * n);
    for &(xu, wu) in &gl {
        let u = half * (xu + T::one());
        for &(xv, wv) in &gl {
            let v = half * (xv + T::one());
            out.push(QuadPoint {
                point: a + (b - a) * u + (c - b) * (u * v),
                weight: two * area * u * wu * wv * half * half,
            });
        }
    }
    out
}

fn is_star_from<T: Real>(poly: &[Vec2<T>], c: Vec2<T>) -> bool {
    let n = poly.len();
    (0..n).all(|i| (poly[i] - c).cross(poly[(i + 1) % n] - c) >= T::zero())
}

fn polygon_centroid<T: Real>(poly: &[Vec2<T>]) -> Vec2<T> {
    let n = poly.len();
    let (mut cx, mut cy, mut a2) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let cr = p.cross(q);
        a2 += cr;
        cx += (p.x + q.x) * cr;
        cy += (p.y + q.y) * cr;
    }
    let s = T::one() / (T::lit(3.0) * a2);
    Vec2::new(cx * s, cy * s)
}

/// Splits a (weakly) simple CCW polygon into triangles: a fan from the centroid when the
/// polygon is star-shaped with respect to it, ear clipping otherwise.
pub fn triangulate<T: Real>(poly: &[Vec2<T>]) -> Result<Vec<[Vec2<T>; 3]>> {
    if poly.len() < 3 {
        return Ok(vec![]);
    }
    if poly.len() == 3 {
        return Ok(vec![[poly[0], poly[1], poly[2]]]);
    }
    let c = polygon_centroid(poly);
    if c.is_finite() && is_star_from(poly, c) {
        let n = poly.len();
        return Ok((0..n).map(|i| [c, poly[i], poly[(i + 1) % n]]).collect());
    }
    ear_clip(poly)
}

fn ear_clip<T: Real>(poly: &[Vec2<T>]) -> Result<Vec<[Vec2<T>; 3]>> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::with_capacity(poly.len() - 2);
    let inside_strict = |q: Vec2<T>, a: Vec2<T>, b: Vec2<T>, c: Vec2<T>| {
        (b - a).cross(q - a) > T::zero() && (c - b).cross(q - b) > T::zero() && (a - c).cross(q - c) > T::zero()
    };
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            let turn = (b - a).cross(c - b);
            if turn < T::zero() {
                continue;
            }
            let blocked = turn > T::zero()
                && idx.iter().any(|&j| {
                    let q = poly[j];
                    q != a && q != b && q != c && inside_strict(q, a, b, c)
                });
            if !blocked {
                if turn > T::zero() {
                    out.push([a, b, c]);
                }
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(FcmError::UnsupportedTopology {
                element: usize::MAX,
                reason: "polygon could not be triangulated".into(),
            });
        }
    }
    let (a, b, c) = (poly[idx[0]], poly[idx[1]], poly[idx[2]]);
    if (b - a).cross(c - a) > T::zero() {
        out.push([a, b, c]);
    }
    Ok(out)
}

/// Rule on a CCW polygon exact for total degree `degree`; empty below area `1e-14 h^2`.
pub fn volume_rule<T: Real>(poly: &[Vec2<T>], degree: usize, h: T) -> Result<Vec<QuadPoint<T>>> {
    if poly.len() < 3 || polygon_area(poly) < T::lit(1e-14) * h * h {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    for [a, b, c] in triangulate(poly)? {
        out.extend(triangle_rule(a, b, c, degree));
    }
    Ok(out)
}

/// `n`-point Gauss rule on every segment.
pub fn boundary_rule<T: Real>(segments: &[BoundarySegment<T>], n: usize) -> Vec<BoundaryQuadPoint<T>> {
    let gl = gauss_legendre::<T>(n);
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(segments.len() * n);
    for s in segments {
        let len = s.length();
        for &(xi, w) in &gl {
            out.push(BoundaryQuadPoint {
                point: s.a.lerp(s.b, half * (xi + T::one())),
                weight: w * half * len,
                normal: s.normal,
            });
        }
    }
    out
}

/// Quadrature points of one active element.
#[derive(Clone, Debug, Default)]
pub struct ElementQuadrature<T> {
    /// `T ∩ Ω`
    pub inside: Vec<QuadPoint<T>>,
    /// `T \ Ω`
    pub outside: Vec<QuadPoint<T>>,
    /// Boundary pieces owned by the element.
    pub boundary: Vec<BoundaryQuadPoint<T>>,
}

/// Points per axis on full elements and per boundary segment, and the total degree on cut polygons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureOrders {
    pub full_points: usize,
    pub cut_degree: usize,
    pub boundary_points: usize,
}

impl QuadratureOrders {
    pub fn for_order(p: usize) -> Self {
        Self { full_points: p + 2, cut_degree: 4 * p - 2, boundary_points: 5 }
    }
}

impl<T: Real> ElementQuadrature<T> {
    pub fn build(cuts: &CutMesh<T>, e: usize, orders: QuadratureOrders) -> Result<Self> {
        let grid = cuts.grid();
        let h = grid.h;
        match cuts.classification(e) {
            Classification::Inside => Ok(Self {
                inside: square_rule(grid.element_lo(e), h, orders.full_points),
                ..Self::default()
            }),
            Classification::Outside => Ok(Self {
                outside: square_rule(grid.element_lo(e), h, orders.full_points),
                ..Self::default()
            }),
            Classification::Cut => {
                let g = cuts.cut_geometry(e).expect("cut element has geometry");
                let with_element = |err: FcmError| match err {
                    FcmError::UnsupportedTopology { reason, .. } => FcmError::UnsupportedTopology { element: e, reason },
                    other => other,
                };
                let mut inside = Vec::new();
                for poly in &g.inside_regions {
                    inside.extend(volume_rule(poly, orders.cut_degree, h).map_err(with_element)?);
                }
                let mut outside = Vec::new();
                for poly in &g.outside_regions {
                    outside.extend(volume_rule(poly, orders.cut_degree, h).map_err(with_element)?);
                }
                Ok(Self { inside, outside, boundary: boundary_rule(&g.boundary_chain, orders.boundary_points) })
            }
        }
    }

    pub fn inside_measure(&self) -> T {
        self.inside.iter().map(|q| q.weight).sum()
    }

    pub fn boundary_measure(&self) -> T {
        self.boundary.iter().map(|q| q.weight).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..=8 {
            let gl = gauss_legendre::<f64>(n);
            for k in 0..(2 * n) as i32 {
                let approx: f64 = gl.iter().map(|(x, w)| w * x.powi(k)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_rules_exact_on_reference() {
        for degree in 1..=10usize {
            let rule = triangle_rule(v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0), degree);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let approx: f64 = rule.iter().map(|q| q.weight * q.point.x.powi(a as i32) * q.point.y.powi(b as i32)).sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((approx - exact).abs() < 1e-13, "degree={degree} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn nonconvex_polygon_area_and_moment() {
        // L-shape
        let poly = vec![v(0.0, 0.0), v(2.0, 0.0), v(2.0, 1.0), v(1.0, 1.0), v(1.0, 2.0), v(0.0, 2.0)];
        let rule = volume_rule(&poly, 6, 1.0).unwrap();
        let area: f64 = rule.iter().map(|q| q.weight).sum();
        assert!((area - 3.0).abs() < 1e-14);
        assert!(rule.iter().all(|q| q.weight > 0.0));
        let mx: f64 = rule.iter().map(|q| q.weight * q.point.x * q.point.x).sum();
        // int x^2 over [0,2]x[0,1] + [0,1]x[1,2]
        assert!((mx - (8.0 / 3.0 + 1.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn weakly_simple_bridge_polygon() {
        let poly = vec![
            v(1.0, 0.5),
            v(1.0, 1.0),
            v(0.0, 1.0),
            v(0.0, 0.0),
            v(1.0, 0.0),
            v(1.0, 0.5),
            v(0.6, 0.5),
            v(0.5, 0.4),
            v(0.4, 0.5),
            v(0.5, 0.6),
            v(0.6, 0.5),
        ];
        let rule = volume_rule(&poly, 4, 1.0).unwrap();
        let area: f64 = rule.iter().map(|q| q.weight).sum();
        assert!((area - (1.0 - 0.02)).abs() < 1e-14);
    }

    #[test]
    fn tiny_polygon_dropped() {
        let poly = vec![v(0.0, 0.0), v(1e-9, 0.0), v(0.0, 1e-9)];
        assert!(volume_rule(&poly, 2, 1.0).unwrap().is_empty());
    }

    #[test]
    fn square_rule_exactness() {
        let rule = square_rule(v(1.0, 2.0), 0.5, 4);
        let approx: f64 = rule.iter().map(|q| q.weight * q.point.x.powi(7) * q.point.y.powi(7)).sum();
        let exact = (1.5f64.powi(8) - 1.0) / 8.0 * (2.5f64.powi(8) - 2.0f64.powi(8)) / 8.0;
        assert!((approx / exact - 1.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_rule_length() {
        let seg = BoundarySegment { a: v(0.0, 0.0), b: v(3.0, 4.0), normal: v(0.8, -0.6) };
        let rule = boundary_rule(&[seg], 5);
        let len: f64 = rule.iter().map(|q| q.weight).sum();
        assert!((len - 5.0).abs() < 1e-14);
        let moment: f64 = rule.iter().map(|q| q.weight * q.point.x.powi(9)).sum();
        assert!((moment - 5.0 * 3.0f64.powi(9) / 10.0).abs() < 1e-9);
    }
}
