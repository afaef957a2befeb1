//! Stiffness matrix and load vector of the stabilized Nitsche finite cell method.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{FcmError, Result};
use crate::geometry::{boundary_layer_elements, CutMesh, DomainPolygon};
use crate::point::Vec2;
use crate::quadrature::{ElementQuadrature, QuadratureOrders};
use crate::scalar::Real;
use crate::spline::{BackgroundGrid, FieldEval, TensorSplineSpace};

/// Parameters of the discrete bilinear form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodParams<T> {
    pub beta: T,
    pub tau: T,
    pub c_alpha: T,
    /// Least-squares interior and tangential boundary terms.
    pub ls_terms: bool,
}

impl<T: Real> Default for MethodParams<T> {
    fn default() -> Self {
        Self { beta: T::lit(5.0), tau: T::lit(0.1), c_alpha: T::lit(1e-3), ls_terms: true }
    }
}

impl<T: Real> MethodParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero()) {
            return Err(FcmError::Configuration(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.tau > T::zero()) {
            return Err(FcmError::Configuration(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.c_alpha >= T::zero()) {
            return Err(FcmError::Configuration(format!("c_alpha must be nonnegative, got {}", self.c_alpha)));
        }
        Ok(())
    }

    /// `2 + 1/tau`
    pub fn penalty_factor(&self) -> T {
        T::lit(2.0) + T::one() / self.tau
    }

    /// Effective Nitsche penalty `beta (2 + 1/tau)`.
    pub fn effective_penalty(&self) -> T {
        self.beta * self.penalty_factor()
    }

    /// Finite cell coefficient `c_alpha h^(2p-1)`.
    pub fn alpha(&self, h: T, p: usize) -> T {
        self.c_alpha * h.powi(2 * p as i32 - 1)
    }
}

pub type ScalarFn<T> = Arc<dyn Fn(Vec2<T>) -> T + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(Vec2<T>) -> Vec2<T> + Send + Sync>;
pub type FieldFn<T> = Arc<dyn Fn(Vec2<T>) -> FieldEval<T> + Send + Sync>;

/// Source term, Dirichlet data and optionally the exact solution.
#[derive(Clone)]
pub struct ProblemData<T> {
    pub source: ScalarFn<T>,
    pub boundary_value: ScalarFn<T>,
    /// Gradient of the Dirichlet data; without it the tangential derivative is differenced.
    pub boundary_gradient: Option<VectorFn<T>>,
    pub exact: Option<FieldFn<T>>,
}

impl<T: Real> ProblemData<T> {
    pub fn new(source: ScalarFn<T>, boundary_value: ScalarFn<T>) -> Self {
        Self { source, boundary_value, boundary_gradient: None, exact: None }
    }

    /// Data derived from an exact solution: `f = -Δu`, `g = u`, `∇g = ∇u`.
    pub fn from_exact(exact: FieldFn<T>) -> Self {
        let (e1, e2, e3) = (exact.clone(), exact.clone(), exact.clone());
        Self {
            source: Arc::new(move |x| -e1(x).laplacian),
            boundary_value: Arc::new(move |x| e2(x).value),
            boundary_gradient: Some(Arc::new(move |x| e3(x).gradient)),
            exact: Some(exact),
        }
    }

    pub fn source_at(&self, x: Vec2<T>) -> Result<T> {
        finite((self.source)(x), x)
    }

    pub fn boundary_value_at(&self, x: Vec2<T>) -> Result<T> {
        finite((self.boundary_value)(x), x)
    }

    /// `(I - n n^T) ∇g` at a boundary point with unit tangent `t`.
    pub fn tangent_gradient_at(&self, x: Vec2<T>, t: Vec2<T>, h: T) -> Result<Vec2<T>> {
        let dg = match &self.boundary_gradient {
            Some(grad) => grad(x).dot(t),
            None => {
                let step = h * T::lit(1e-6);
                let gp = self.boundary_value_at(x + t * step)?;
                let gm = self.boundary_value_at(x - t * step)?;
                (gp - gm) / (step + step)
            }
        };
        finite(dg, x).map(|d| t * d)
    }
}

fn finite<T: Real>(v: T, x: Vec2<T>) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FcmError::Data { x: x.x.to_f64_lossy(), y: x.y.to_f64_lossy() })
    }
}

/// Spline space, cut geometry, boundary layer and element quadrature for one grid placement.
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    cuts: CutMesh<T>,
    space: TensorSplineSpace<T>,
    in_layer: Vec<bool>,
    layer: Vec<usize>,
    // aligned with `space.active_elements()`
    quadrature: Vec<ElementQuadrature<T>>,
    orders: QuadratureOrders,
}

impl<T: Real> Discretization<T> {
    pub fn new(domain: &DomainPolygon<T>, grid: BackgroundGrid<T>, p: usize) -> Result<Self> {
        Self::with_orders(domain, grid, p, QuadratureOrders::for_order(p))
    }

    pub fn with_orders(
        domain: &DomainPolygon<T>,
        grid: BackgroundGrid<T>,
        p: usize,
        orders: QuadratureOrders,
    ) -> Result<Self> {
        let cuts = CutMesh::new(domain, &grid)?;
        let space = TensorSplineSpace::from_cut_mesh(p, domain, &cuts)?;
        let layer = boundary_layer_elements(&space, &cuts);
        let mut in_layer = vec![false; grid.n_elements()];
        for &e in &layer {
            in_layer[e] = true;
        }
        let quadrature = space
            .active_elements()
            .par_iter()
            .map(|&e| ElementQuadrature::build(&cuts, e, orders))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cuts, space, in_layer, layer, quadrature, orders })
    }

    pub fn space(&self) -> &TensorSplineSpace<T> {
        &self.space
    }

    pub fn cuts(&self) -> &CutMesh<T> {
        &self.cuts
    }

    pub fn grid(&self) -> &BackgroundGrid<T> {
        self.space.grid()
    }

    pub fn h(&self) -> T {
        self.space.h()
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn orders(&self) -> QuadratureOrders {
        self.orders
    }

    pub fn dof_count(&self) -> usize {
        self.space.dof_count()
    }

    /// Boundary layer elements (cut elements and their vertex neighbors), ascending.
    pub fn layer(&self) -> &[usize] {
        &self.layer
    }

    pub fn in_layer(&self, e: usize) -> bool {
        self.in_layer[e]
    }

    /// Active elements paired with their quadrature.
    pub fn elements(&self) -> impl Iterator<Item = (usize, &ElementQuadrature<T>)> + '_ {
        self.space.active_elements().iter().copied().zip(self.quadrature.iter())
    }

    pub fn par_elements(&self) -> impl IndexedParallelIterator<Item = (usize, &ElementQuadrature<T>)> + '_ {
        self.space.active_elements().par_iter().copied().zip(self.quadrature.par_iter())
    }
}

/// Symmetric matrix in compressed sparse row form (both triangles) with its right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymSystem<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> SparseSymSystem<T> {
    /// Builds a system from dense row-major storage, keeping nonzero entries and the diagonal.
    pub fn from_dense(n: usize, dense: &[T], rhs: Vec<T>) -> Self {
        assert_eq!(dense.len(), n * n);
        assert_eq!(rhs.len(), n);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = dense[i * n + j];
                if a != T::zero() || i == j {
                    col_idx.push(j);
                    values.push(a);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values, rhs }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).fold(T::zero(), |acc, (j, a)| acc + a * x[j]))
            .collect()
    }

    /// `w^T A v`
    pub fn bilinear(&self, v: &[T], w: &[T]) -> T {
        self.matvec(v).iter().zip(w).map(|(&a, &b)| a * b).sum()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`
    pub fn symmetry_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n * self.n];
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                out[i * self.n + j] = a;
            }
        }
        out
    }

    /// `D^{-1/2} A D^{-1/2}` with `D = diag(A)`, applied to a copy; the right-hand side is scaled alike.
    pub fn symmetric_scaled(&self, scale: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] = out.values[k] * scale[i] * scale[out.col_idx[k]];
            }
            out.rhs[i] *= scale[i];
        }
        out
    }

    /// Symmetric permutation `P A P^T` with `new[perm[i]] = old[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.n];
        let mut rhs = vec![T::zero(); self.n];
        for i in 0..self.n {
            rhs[perm[i]] = self.rhs[i];
            for (j, a) in self.row(i) {
                rows[perm[i]].push((perm[j], a));
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for mut r in rows {
            r.sort_by_key(|&(j, _)| j);
            for (j, a) in r {
                col_idx.push(j);
                values.push(a);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n: self.n, row_ptr, col_idx, values, rhs }
    }
}

/// Local matrix (row-major) and vector of one element with the global dofs of its rows.
#[derive(Clone, Debug)]
pub struct ElementContribution<T> {
    pub dofs: Vec<usize>,
    pub matrix: Vec<T>,
    pub vector: Vec<T>,
}

/// Contribution of active element `e` to the stiffness matrix and load vector.
pub fn element_contribution<T: Real>(
    disc: &Discretization<T>,
    e: usize,
    quad: &ElementQuadrature<T>,
    params: &MethodParams<T>,
    data: &ProblemData<T>,
) -> Result<ElementContribution<T>> {
    let space = disc.space();
    let h = disc.h();
    let p = disc.order();
    let pairs = space.element_dofs(e);
    let m = pairs.len();
    let mut k = vec![T::zero(); m * m];
    let mut f = vec![T::zero(); m];
    let mut basis: Vec<FieldEval<T>> = Vec::with_capacity(m);
    let load_basis = |x: Vec2<T>, basis: &mut Vec<FieldEval<T>>| {
        let all = space.element_basis(e, x);
        basis.clear();
        basis.extend(pairs.iter().map(|&(local, _)| all[local]));
    };

    let ls_volume = params.ls_terms && disc.in_layer(e);
    let ls_weight = params.tau * h * h;
    for q in &quad.inside {
        load_basis(q.point, &mut basis);
        let fx = data.source_at(q.point)?;
        for i in 0..m {
            let bi = basis[i];
            f[i] += q.weight * fx * bi.value;
            if ls_volume {
                f[i] -= q.weight * ls_weight * fx * bi.laplacian;
            }
            for j in 0..m {
                let bj = basis[j];
                let mut a = bi.gradient.dot(bj.gradient);
                if ls_volume {
                    a += ls_weight * bi.laplacian * bj.laplacian;
                }
                k[i * m + j] += q.weight * a;
            }
        }
    }

    let alpha = params.alpha(h, p);
    if alpha > T::zero() {
        for q in &quad.outside {
            load_basis(q.point, &mut basis);
            for i in 0..m {
                for j in 0..m {
                    k[i * m + j] += q.weight * alpha * basis[i].gradient.dot(basis[j].gradient);
                }
            }
        }
    }

    let penalty = params.effective_penalty() / h;
    let tangent_weight = params.beta * T::lit(2.0) * h;
    let mut dn = vec![T::zero(); m];
    let mut tg = vec![Vec2::zero(); m];
    for q in &quad.boundary {
        load_basis(q.point, &mut basis);
        let n = q.normal;
        let t = Vec2::new(-n.y, n.x);
        for i in 0..m {
            dn[i] = basis[i].gradient.dot(n);
            tg[i] = basis[i].gradient - n * dn[i];
        }
        let g = data.boundary_value_at(q.point)?;
        let tg_g = if params.ls_terms { data.tangent_gradient_at(q.point, t, h)? } else { Vec2::zero() };
        for i in 0..m {
            let vi = basis[i].value;
            let mut fi = -g * dn[i] + penalty * g * vi;
            if params.ls_terms {
                fi += tangent_weight * tg_g.dot(tg[i]);
            }
            f[i] += q.weight * fi;
            for j in 0..m {
                let vj = basis[j].value;
                let mut a = -dn[i] * vj - vi * dn[j] + penalty * vi * vj;
                if params.ls_terms {
                    a += tangent_weight * tg[i].dot(tg[j]);
                }
                k[i * m + j] += q.weight * a;
            }
        }
    }

    Ok(ElementContribution { dofs: pairs.into_iter().map(|(_, d)| d).collect(), matrix: k, vector: f })
}

/// Sparsity pattern: dofs whose supports overlap.
fn sparsity<T: Real>(space: &TensorSplineSpace<T>) -> (Vec<usize>, Vec<usize>) {
    let p = space.order();
    let n = space.dof_count();
    let mut dof_of = std::collections::HashMap::with_capacity(n);
    for d in 0..n {
        dof_of.insert(space.basis_ij(d), d);
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for d in 0..n {
        let (ix, iy) = space.basis_ij(d);
        for jy in iy.saturating_sub(p)..=iy + p {
            for jx in ix.saturating_sub(p)..=ix + p {
                if let Some(&c) = dof_of.get(&(jx, jy)) {
                    col_idx.push(c);
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    (row_ptr, col_idx)
}

/// Assembles the global stiffness matrix and load vector.
pub fn assemble_system<T: Real>(
    disc: &Discretization<T>,
    params: &MethodParams<T>,
    data: &ProblemData<T>,
) -> Result<SparseSymSystem<T>> {
    params.validate()?;
    let n = disc.dof_count();
    if n == 0 {
        return Err(FcmError::EmptySpace);
    }
    let contributions = disc
        .par_elements()
        .map(|(e, quad)| element_contribution(disc, e, quad, params, data))
        .collect::<Result<Vec<_>>>()?;

    let (row_ptr, col_idx) = sparsity(disc.space());
    let mut values = vec![T::zero(); col_idx.len()];
    let mut rhs = vec![T::zero(); n];
    for c in &contributions {
        let m = c.dofs.len();
        for (i, &gi) in c.dofs.iter().enumerate() {
            rhs[gi] += c.vector[i];
            let cols = &col_idx[row_ptr[gi]..row_ptr[gi + 1]];
            for (j, &gj) in c.dofs.iter().enumerate() {
                let pos = cols.binary_search(&gj).expect("dof pair within sparsity pattern");
                values[row_ptr[gi] + pos] += c.matrix[i * m + j];
            }
        }
    }
    Ok(SparseSymSystem { n, row_ptr, col_idx, values, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_rectangle;
    use crate::quadrature::square_rule;

    fn fitted_square(n: usize) -> Discretization<f64> {
        let h = 1.0 / n as f64;
        let dom = make_rectangle(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let grid = BackgroundGrid::covering(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), h, 3).unwrap();
        Discretization::new(&dom, grid, 2).unwrap()
    }

    fn zero_data() -> ProblemData<f64> {
        ProblemData::new(Arc::new(|_| 0.0), Arc::new(|_| 0.0))
    }

    #[test]
    fn effective_penalty_values() {
        let mut p = MethodParams::<f64>::default();
        for (tau, expected) in [(1.0, 15.0), (0.1, 60.0), (0.01, 510.0), (0.001, 5010.0)] {
            p.tau = tau;
            assert!((p.effective_penalty() - expected).abs() < 1e-9 * expected);
        }
        assert!((p.alpha(0.1, 2) - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn constant_function_sees_only_penalty() {
        let disc = fitted_square(4);
        let params = MethodParams { c_alpha: 0.0, ..MethodParams::default() };
        let sys = assemble_system(&disc, &params, &zero_data()).unwrap();
        let ones = vec![1.0; sys.n];
        let q = sys.bilinear(&ones, &ones);
        let expected = params.effective_penalty() / disc.h() * 4.0;
        assert!((q / expected - 1.0).abs() < 1e-12, "{q} vs {expected}");
    }

    #[test]
    fn interior_element_is_plain_laplace_stiffness() {
        let disc = fitted_square(8);
        let e = disc
            .elements()
            .map(|(e, _)| e)
            .find(|&e| !disc.in_layer(e))
            .expect("interior element");
        let quad = disc.elements().find(|&(k, _)| k == e).unwrap().1;
        let c = element_contribution(&disc, e, quad, &MethodParams::default(), &zero_data()).unwrap();
        let m = c.dofs.len();
        assert_eq!(m, 9);
        // oracle: 6x6 Gauss rule, independent of the assembly rule
        let space = disc.space();
        let lo = disc.grid().element_lo(e);
        let rule = square_rule(lo, disc.h(), 6);
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for q in &rule {
                    let b = space.element_basis(e, q.point);
                    acc += q.weight * b[i].gradient.dot(b[j].gradient);
                }
                assert!((c.matrix[i * m + j] - acc).abs() < 1e-14);
            }
            let row_sum: f64 = (0..m).map(|j| c.matrix[i * m + j]).sum();
            assert!(row_sum.abs() < 1e-14);
        }
    }

    #[test]
    fn outside_only_element_gets_alpha_term() {
        let dom = make_rectangle(Vec2::new(0.0, 0.0), Vec2::new(0.4, 1.0)).unwrap();
        let grid = BackgroundGrid::covering(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 0.25, 3).unwrap();
        let disc = Discretization::new(&dom, grid, 2).unwrap();
        // an active element whose inside part is empty does not exist by construction;
        // emulate it with an element quadrature carrying only outside points
        let (e, quad) = disc.elements().find(|(_, q)| !q.outside.is_empty()).unwrap();
        let only_outside = ElementQuadrature { outside: quad.outside.clone(), ..Default::default() };
        let params = MethodParams { c_alpha: 1.0, ..MethodParams::default() };
        let c = element_contribution(&disc, e, &only_outside, &params, &zero_data()).unwrap();
        let none = element_contribution(&disc, e, &only_outside, &MethodParams { c_alpha: 0.0, ..params }, &zero_data())
            .unwrap();
        assert!(none.matrix.iter().all(|&a| a == 0.0));
        assert!(c.matrix.iter().any(|&a| a != 0.0));
        assert!(c.vector.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let dom = crate::geometry::make_disc_polygon(Vec2::new(0.0, 0.0), 1.0, 512).unwrap();
        let grid = BackgroundGrid::covering(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), 0.2, 3).unwrap();
        let disc = Discretization::new(&dom, grid, 2).unwrap();
        let sys = assemble_system(&disc, &MethodParams::default(), &zero_data()).unwrap();
        assert!(sys.symmetry_defect() <= 1e-12 * sys.max_abs());
    }

    #[test]
    fn nonfinite_data_is_reported() {
        let disc = fitted_square(2);
        let data = ProblemData::new(Arc::new(|_| f64::NAN), Arc::new(|_| 0.0));
        assert!(matches!(
            assemble_system(&disc, &MethodParams::default(), &data),
            Err(FcmError::Data { .. })
        ));
    }

    #[test]
    fn dense_roundtrip_and_permutation() {
        let dense = vec![4.0, 1.0, 0.0, 1.0, 3.0, 2.0, 0.0, 2.0, 5.0];
        let sys = SparseSymSystem::from_dense(3, &dense, vec![1.0, 2.0, 3.0]);
        assert_eq!(sys.to_dense(), dense);
        let perm = [2, 0, 1];
        let pt = sys.permuted(&perm);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(pt.get(perm[i], perm[j]), sys.get(i, j));
            }
        }
        assert_eq!(pt.rhs, vec![2.0, 3.0, 1.0]);
    }
}
