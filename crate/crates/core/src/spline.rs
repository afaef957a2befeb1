//! Uniform-lattice tensor-product B-splines and the active space built on a cut grid.

use crate::error::{FcmError, Result};
use crate::geometry::{Classification, CutMesh, DomainPolygon};
use crate::point::Vec2;
use crate::scalar::Real;

/// Uniform background grid of square elements.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundGrid<T> {
    pub origin: Vec2<T>,
    pub h: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> BackgroundGrid<T> {
    pub fn new(origin: Vec2<T>, h: T, nx: usize, ny: usize) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(FcmError::Configuration(format!("mesh size must be positive, got {h}")));
        }
        if nx == 0 || ny == 0 {
            return Err(FcmError::Configuration("grid needs at least one element per axis".into()));
        }
        if !origin.is_finite() {
            return Err(FcmError::Configuration("grid origin must be finite".into()));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Smallest grid with spacing `h` whose lower corner sits `margin` elements below `lo`
    /// and which extends at least `margin` elements past `hi`.
    pub fn covering(lo: Vec2<T>, hi: Vec2<T>, h: T, margin: usize) -> Result<Self> {
        let m = T::of_usize(margin);
        let origin = Vec2::new(lo.x - m * h, lo.y - m * h);
        let count = |extent: T| -> usize {
            let cells = (extent / h - T::lit(1e-9)).ceil().max(T::one());
            cells.to_usize().unwrap_or(1) + 2 * margin
        };
        Self::new(origin, h, count(hi.x - lo.x), count(hi.y - lo.y))
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn element_id(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    /// Lower-left corner of element `e`.
    pub fn element_lo(&self, e: usize) -> Vec2<T> {
        let (ix, iy) = self.element_ij(e);
        Vec2::new(
            self.origin.x + T::of_usize(ix) * self.h,
            self.origin.y + T::of_usize(iy) * self.h,
        )
    }

    pub fn element_center(&self, e: usize) -> Vec2<T> {
        let half = self.h * T::lit(0.5);
        self.element_lo(e) + Vec2::new(half, half)
    }

    /// Upper-right corner of the whole grid.
    pub fn upper(&self) -> Vec2<T> {
        Vec2::new(
            self.origin.x + T::of_usize(self.nx) * self.h,
            self.origin.y + T::of_usize(self.ny) * self.h,
        )
    }

    /// Element indices containing `point`; points on the upper grid boundary map to the last element.
    pub fn locate(&self, point: Vec2<T>) -> Option<(usize, usize)> {
        let gx = (point.x - self.origin.x) / self.h;
        let gy = (point.y - self.origin.y) / self.h;
        let tol = T::lit(1e-12);
        let clamp = |g: T, n: usize| -> Option<usize> {
            let nn = T::of_usize(n);
            if !(g >= -tol && g <= nn + tol) {
                return None;
            }
            Some(g.floor().max(T::zero()).to_usize()?.min(n - 1))
        };
        Some((clamp(gx, self.nx)?, clamp(gy, self.ny)?))
    }

    /// Knot vector along one axis: `n + 2p + 1` uniform knots so that element `e`
    /// spans knots `e + p .. e + p + 1`.
    pub fn knots(&self, axis: usize, p: usize) -> Vec<T> {
        let (start, n) = if axis == 0 { (self.origin.x, self.nx) } else { (self.origin.y, self.ny) };
        (0..n + 2 * p + 1)
            .map(|k| start + (T::of_usize(k) - T::of_usize(p)) * self.h)
            .collect()
    }

    /// Elements sharing at least a vertex with `e` (excluding `e`).
    pub fn vertex_neighbors(&self, e: usize) -> Vec<usize> {
        let (ix, iy) = self.element_ij(e);
        let mut out = Vec::with_capacity(8);
        for jy in iy.saturating_sub(1)..=(iy + 1).min(self.ny - 1) {
            for jx in ix.saturating_sub(1)..=(ix + 1).min(self.nx - 1) {
                if jx != ix || jy != iy {
                    out.push(self.element_id(jx, jy));
                }
            }
        }
        out
    }
}

/// Value, gradient and Laplacian of a scalar field at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldEval<T> {
    pub value: T,
    pub gradient: Vec2<T>,
    pub laplacian: T,
}

impl<T: Real> FieldEval<T> {
    pub fn zero() -> Self {
        Self { value: T::zero(), gradient: Vec2::zero(), laplacian: T::zero() }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.is_finite() && self.laplacian.is_finite()
    }

    pub fn scaled(self, s: T) -> Self {
        Self { value: self.value * s, gradient: self.gradient * s, laplacian: self.laplacian * s }
    }

    pub fn minus(self, other: Self) -> Self {
        Self {
            value: self.value - other.value,
            gradient: self.gradient - other.gradient,
            laplacian: self.laplacian - other.laplacian,
        }
    }

    pub fn accumulate(&mut self, other: Self, s: T) {
        self.value += other.value * s;
        self.gradient += other.gradient * s;
        self.laplacian += other.laplacian * s;
    }
}

/// Nonzero 1D basis functions at a coordinate, with first and second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisValues1d<T> {
    /// Index of the first nonzero basis function.
    pub first: usize,
    pub values: Vec<T>,
    pub d1: Vec<T>,
    pub d2: Vec<T>,
}

/// Locates the knot span of `x`, restricted to spans where all `p + 1` functions are defined.
pub fn find_span<T: Real>(knots: &[T], p: usize, x: T) -> Result<usize> {
    if knots.len() < 2 * p + 2 {
        return Err(FcmError::Configuration(format!(
            "knot vector of length {} too short for order {p}",
            knots.len()
        )));
    }
    if knots.windows(2).any(|w| w[1] < w[0]) {
        return Err(FcmError::Configuration("knot vector must be nondecreasing".into()));
    }
    let m = knots.len() - 1;
    let (lo, hi) = (knots[p], knots[m - p]);
    if !(x >= lo && x <= hi) {
        return Err(FcmError::OutOfDomain(format!("x = {x} outside knot range [{lo}, {hi}]")));
    }
    let last = m - p - 1;
    if x >= knots[last + 1] {
        return Ok((p..=last).rev().find(|&s| knots[s] < knots[s + 1]).unwrap_or(last));
    }
    // upper_bound - 1 over the valid range
    let mut a = p;
    let mut b = last + 1;
    while b - a > 1 {
        let mid = (a + b) / 2;
        if x < knots[mid] {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(a)
}

/// Cox–de Boor evaluation of the `p + 1` nonzero basis functions on `span` and their
/// derivatives up to order `n`. Row `k` of the result holds the `k`-th derivatives.
/// `x` need not lie inside the span; the span's polynomial piece is evaluated.
pub fn basis_derivatives<T: Real>(span: usize, x: T, p: usize, knots: &[T], n: usize) -> Vec<Vec<T>> {
    let mut ndu = vec![vec![T::zero(); p + 1]; p + 1];
    let mut left = vec![T::zero(); p + 1];
    let mut right = vec![T::zero(); p + 1];
    ndu[0][0] = T::one();
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = T::zero();
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![T::zero(); p + 1]; n + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![T::zero(); p + 1]; 2];
    let pi = p as isize;
    for r in 0..=pi {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = T::one();
        for k in 1..=(n as isize) {
            let mut d = T::zero();
            let rk = r - k;
            let pk = pi - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk as usize];
            }
            let j1 = if rk >= -1 { 1 } else { -rk };
            let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
            for j in j1..=j2 {
                let (ju, idx) = (j as usize, (rk + j) as usize);
                a[s2][ju] = (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][idx];
                d += a[s2][ju] * ndu[idx][pk as usize];
            }
            if r <= pk {
                a[s2][k as usize] = -a[s1][(k - 1) as usize] / ndu[(pk + 1) as usize][r as usize];
                d += a[s2][k as usize] * ndu[r as usize][pk as usize];
            }
            ders[k as usize][r as usize] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = T::of_usize(p);
    for k in 1..=n {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= T::of_usize(p.saturating_sub(k));
    }
    ders
}

/// The `p + 1` nonzero basis functions at `x` with first and second derivatives.
pub fn eval_basis_1d<T: Real>(knots: &[T], p: usize, x: T) -> Result<BasisValues1d<T>> {
    let span = find_span(knots, p, x)?;
    let mut ders = basis_derivatives(span, x, p, knots, 2);
    let d2 = ders.pop().unwrap_or_default();
    let d1 = ders.pop().unwrap_or_default();
    let values = ders.pop().unwrap_or_default();
    Ok(BasisValues1d { first: span - p, values, d1, d2 })
}

/// C^{p-1} tensor-product B-spline space restricted to the basis functions whose
/// support meets the domain with positive area.
#[derive(Clone, Debug)]
pub struct TensorSplineSpace<T> {
    grid: BackgroundGrid<T>,
    p: usize,
    knots_x: Vec<T>,
    knots_y: Vec<T>,
    active_basis: Vec<usize>,
    basis_to_dof: Vec<usize>,
    active_elements: Vec<usize>,
    element_active: Vec<bool>,
}

const INACTIVE: usize = usize::MAX;

impl<T: Real> TensorSplineSpace<T> {
    /// Builds the active space of `grid` against `domain`.
    pub fn build(grid: BackgroundGrid<T>, p: usize, domain: &DomainPolygon<T>) -> Result<Self> {
        let cuts = CutMesh::new(domain, &grid)?;
        Self::from_cut_mesh(p, domain, &cuts)
    }

    /// Builds the active space from an existing element classification.
    pub fn from_cut_mesh(p: usize, domain: &DomainPolygon<T>, cuts: &CutMesh<T>) -> Result<Self> {
        if p < 2 {
            return Err(FcmError::Configuration(format!("spline order must be >= 2, got {p}")));
        }
        let grid = cuts.grid().clone();
        check_margin(&grid, p, domain)?;

        let nbx = grid.nx + p;
        let nby = grid.ny + p;
        let mut element_active = vec![false; grid.n_elements()];
        let mut basis_used = vec![false; nbx * nby];
        let mut active_elements = Vec::new();
        for e in 0..grid.n_elements() {
            let active = match cuts.classification(e) {
                Classification::Inside => true,
                Classification::Outside => false,
                Classification::Cut => cuts.inside_area(e) > T::zero(),
            };
            if !active {
                continue;
            }
            element_active[e] = true;
            active_elements.push(e);
            let (ix, iy) = grid.element_ij(e);
            for ly in 0..=p {
                for lx in 0..=p {
                    basis_used[(iy + ly) * nbx + ix + lx] = true;
                }
            }
        }
        if active_elements.is_empty() {
            return Err(FcmError::EmptySpace);
        }

        let mut basis_to_dof = vec![INACTIVE; nbx * nby];
        let mut active_basis = Vec::new();
        for (g, used) in basis_used.iter().enumerate() {
            if *used {
                basis_to_dof[g] = active_basis.len();
                active_basis.push(g);
            }
        }

        Ok(Self {
            knots_x: grid.knots(0, p),
            knots_y: grid.knots(1, p),
            grid,
            p,
            active_basis,
            basis_to_dof,
            active_elements,
            element_active,
        })
    }

    pub fn grid(&self) -> &BackgroundGrid<T> {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn h(&self) -> T {
        self.grid.h
    }

    pub fn dof_count(&self) -> usize {
        self.active_basis.len()
    }

    /// Global tensor indices (`iy * (nx + p) + ix`) of the active basis, lexicographic.
    pub fn active_basis(&self) -> &[usize] {
        &self.active_basis
    }

    pub fn active_elements(&self) -> &[usize] {
        &self.active_elements
    }

    pub fn is_element_active(&self, e: usize) -> bool {
        self.element_active.get(e).copied().unwrap_or(false)
    }

    /// Tensor index pair `(ix, iy)` of a degree of freedom.
    pub fn basis_ij(&self, dof: usize) -> (usize, usize) {
        let g = self.active_basis[dof];
        let nbx = self.grid.nx + self.p;
        (g % nbx, g / nbx)
    }

    /// Support box `[lo, hi]` of a degree of freedom.
    pub fn basis_support(&self, dof: usize) -> (Vec2<T>, Vec2<T>) {
        let (ix, iy) = self.basis_ij(dof);
        let lo = Vec2::new(self.knots_x[ix], self.knots_y[iy]);
        let hi = Vec2::new(self.knots_x[ix + self.p + 1], self.knots_y[iy + self.p + 1]);
        (lo, hi)
    }

    pub fn knots_x(&self) -> &[T] {
        &self.knots_x
    }

    pub fn knots_y(&self) -> &[T] {
        &self.knots_y
    }

    /// `(local, dof)` pairs of element `e`; local index is `ly * (p + 1) + lx`.
    pub fn element_dofs(&self, e: usize) -> Vec<(usize, usize)> {
        let (ix, iy) = self.grid.element_ij(e);
        let nbx = self.grid.nx + self.p;
        let mut out = Vec::with_capacity((self.p + 1) * (self.p + 1));
        for ly in 0..=self.p {
            for lx in 0..=self.p {
                let dof = self.basis_to_dof[(iy + ly) * nbx + ix + lx];
                if dof != INACTIVE {
                    out.push((ly * (self.p + 1) + lx, dof));
                }
            }
        }
        out
    }

    /// All `(p + 1)^2` local basis functions of element `e` evaluated at `point`
    /// using the element's polynomial piece.
    pub fn element_basis(&self, e: usize, point: Vec2<T>) -> Vec<FieldEval<T>> {
        let p = self.p;
        let (ix, iy) = self.grid.element_ij(e);
        let bx = basis_derivatives(ix + p, point.x, p, &self.knots_x, 2);
        let by = basis_derivatives(iy + p, point.y, p, &self.knots_y, 2);
        let mut out = Vec::with_capacity((p + 1) * (p + 1));
        for ly in 0..=p {
            for lx in 0..=p {
                out.push(FieldEval {
                    value: bx[0][lx] * by[0][ly],
                    gradient: Vec2::new(bx[1][lx] * by[0][ly], bx[0][lx] * by[1][ly]),
                    laplacian: bx[2][lx] * by[0][ly] + bx[0][lx] * by[2][ly],
                });
            }
        }
        out
    }

    /// Field `sum_i coeffs[i] phi_i` evaluated with element `e`'s polynomial piece.
    pub fn eval_in_element(&self, e: usize, coeffs: &[T], point: Vec2<T>) -> FieldEval<T> {
        let basis = self.element_basis(e, point);
        let mut acc = FieldEval::zero();
        for (local, dof) in self.element_dofs(e) {
            acc.accumulate(basis[local], coeffs[dof]);
        }
        acc
    }

    /// Active element containing `point`, if any.
    pub fn locate_active(&self, point: Vec2<T>) -> Option<usize> {
        let (ix, iy) = self.grid.locate(point)?;
        let e = self.grid.element_id(ix, iy);
        if self.element_active[e] {
            return Some(e);
        }
        // points on a face shared with an active neighbor
        let tol = self.grid.h * T::lit(1e-12);
        self.grid.vertex_neighbors(e).into_iter().find(|&n| {
            let lo = self.grid.element_lo(n);
            let hi = lo + Vec2::new(self.grid.h, self.grid.h);
            self.element_active[n]
                && point.x >= lo.x - tol
                && point.x <= hi.x + tol
                && point.y >= lo.y - tol
                && point.y <= hi.y + tol
        })
    }

    /// Value, gradient and Laplacian of `sum_i coeffs[i] phi_i` at `point`.
    pub fn eval_field(&self, coeffs: &[T], point: Vec2<T>) -> Result<FieldEval<T>> {
        if coeffs.len() != self.dof_count() {
            return Err(FcmError::Configuration(format!(
                "coefficient vector has length {}, expected {}",
                coeffs.len(),
                self.dof_count()
            )));
        }
        let e = self
            .locate_active(point)
            .ok_or_else(|| FcmError::OutOfDomain(format!("({}, {}) not in any active element", point.x, point.y)))?;
        Ok(self.eval_in_element(e, coeffs, point))
    }
}

fn check_margin<T: Real>(grid: &BackgroundGrid<T>, p: usize, domain: &DomainPolygon<T>) -> Result<()> {
    let (lo, hi) = domain.bbox();
    let up = grid.upper();
    let need = grid.h * (T::of_usize(p) - T::lit(1e-9));
    let ok = lo.x - grid.origin.x >= need
        && lo.y - grid.origin.y >= need
        && up.x - hi.x >= need
        && up.y - hi.y >= need;
    if ok {
        Ok(())
    } else {
        Err(FcmError::Configuration(format!(
            "domain bounding box [{}, {}]x[{}, {}] not contained in grid with a margin of {p} elements",
            lo.x, hi.x, lo.y, hi.y
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_disc_polygon;

    fn uniform_knots(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64).collect()
    }

    #[test]
    fn quadratic_midpoint_values() {
        let knots = uniform_knots(10);
        let b = eval_basis_1d(&knots, 2, 4.5).unwrap();
        let expect = [0.125, 0.75, 0.125];
        for (v, e) in b.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(b.first, 2);
    }

    #[test]
    fn quadratic_at_interior_knot() {
        let knots = uniform_knots(10);
        let b = eval_basis_1d(&knots, 2, 4.0).unwrap();
        let expect = [0.5, 0.5, 0.0];
        for (v, e) in b.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let knots: Vec<f64> = (0..12).map(|k| 0.3 * k as f64).collect();
        let p = 2;
        let x = 1.37;
        let span = find_span(&knots, p, x).unwrap();
        let d = basis_derivatives(span, x, p, &knots, 2);
        let eps = 1e-5;
        let plus = basis_derivatives(span, x + eps, p, &knots, 0);
        let minus = basis_derivatives(span, x - eps, p, &knots, 0);
        for j in 0..=p {
            let fd1 = (plus[0][j] - minus[0][j]) / (2.0 * eps);
            let fd2 = (plus[0][j] - 2.0 * d[0][j] + minus[0][j]) / (eps * eps);
            assert!((fd1 - d[1][j]).abs() < 1e-8, "d1 {j}");
            assert!((fd2 - d[2][j]).abs() < 1e-4, "d2 {j}");
        }
    }

    #[test]
    fn cubic_partition_of_unity() {
        let knots = uniform_knots(14);
        for i in 0..50 {
            let x = 3.0 + 7.0 * i as f64 / 49.0;
            let b = eval_basis_1d(&knots, 3, x).unwrap();
            assert_eq!(b.values.len(), 4);
            assert!((b.values.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(b.d1.iter().sum::<f64>().abs() < 1e-12);
            assert!(b.d2.iter().sum::<f64>().abs() < 1e-11);
        }
    }

    #[test]
    fn outside_knot_range_is_error() {
        let knots = uniform_knots(10);
        assert!(matches!(eval_basis_1d(&knots, 2, 1.5), Err(FcmError::OutOfDomain(_))));
        assert!(matches!(eval_basis_1d(&knots, 2, 7.5), Err(FcmError::OutOfDomain(_))));
        assert!(eval_basis_1d(&knots, 2, 7.0).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let knots: Vec<f32> = (0..10).map(|k| k as f32).collect();
        let b = eval_basis_1d(&knots, 2, 4.5f32).unwrap();
        assert!((b.values[1] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn tiny_disc_activates_one_element() {
        let grid = BackgroundGrid::new(Vec2::new(0.0, 0.0), 1.0, 7, 7).unwrap();
        let disc = make_disc_polygon(Vec2::new(3.5, 3.5), 0.1, 64).unwrap();
        let space = TensorSplineSpace::build(grid, 2, &disc).unwrap();
        assert_eq!(space.active_elements(), &[3 * 7 + 3]);
        assert_eq!(space.dof_count(), 9);
        let ij: Vec<_> = (0..9).map(|d| space.basis_ij(d)).collect();
        for iy in 3..6 {
            for ix in 3..6 {
                assert!(ij.contains(&(ix, iy)));
            }
        }
    }

    #[test]
    fn domain_outside_grid_is_error() {
        let grid = BackgroundGrid::new(Vec2::new(0.0, 0.0), 1.0, 7, 7).unwrap();
        let disc = make_disc_polygon(Vec2::new(30.0, 3.5), 0.1, 64).unwrap();
        assert!(matches!(
            TensorSplineSpace::build(grid, 2, &disc),
            Err(FcmError::Configuration(_))
        ));
    }

    #[test]
    fn zero_and_unit_coefficients() {
        let grid = BackgroundGrid::new(Vec2::new(-0.75, -0.75), 0.25, 14, 14).unwrap();
        let disc = make_disc_polygon(Vec2::new(1.0, 1.0), 0.8, 256).unwrap();
        let space = TensorSplineSpace::build(grid, 2, &disc).unwrap();
        let pt = Vec2::new(1.1, 0.9);
        let zero = space.eval_field(&vec![0.0; space.dof_count()], pt).unwrap();
        assert_eq!(zero, FieldEval::zero());
        let one: FieldEval<f64> = space.eval_field(&vec![1.0; space.dof_count()], pt).unwrap();
        assert!((one.value - 1.0).abs() < 1e-14);
        assert!(one.gradient.norm() < 1e-12);
        assert!(one.laplacian.abs() < 1e-10);
        assert!(space.eval_field(&vec![0.0; space.dof_count()], Vec2::new(5.0, 5.0)).is_err());
    }

    #[test]
    fn greville_coefficients_reproduce_linear() {
        let grid = BackgroundGrid::new(Vec2::new(-0.75, -0.75), 0.25, 14, 14).unwrap();
        let disc = make_disc_polygon(Vec2::new(1.0, 1.0), 0.8, 256).unwrap();
        let space = TensorSplineSpace::build(grid, 2, &disc).unwrap();
        let kx = space.knots_x().to_vec();
        let coeffs: Vec<f64> = (0..space.dof_count())
            .map(|d| {
                let (ix, _) = space.basis_ij(d);
                0.5 * (kx[ix + 1] + kx[ix + 2])
            })
            .collect();
        for pt in [Vec2::new(1.0, 1.0), Vec2::new(0.51, 1.33), Vec2::new(1.6, 0.7)] {
            let f = space.eval_field(&coeffs, pt).unwrap();
            assert!((f.value - pt.x).abs() < 1e-13);
            assert!((f.gradient.x - 1.0).abs() < 1e-12 && f.gradient.y.abs() < 1e-12);
            assert!(f.laplacian.abs() < 1e-10);
        }
    }
}
