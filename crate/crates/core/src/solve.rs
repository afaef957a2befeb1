//! Linear solvers, diagonal scaling and extreme eigenvalues of assembled systems.

use nalgebra::DMatrix;

use crate::assembly::SparseSymSystem;
use crate::error::{FcmError, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual `|A x - b| / |b|` to reach.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Direct, tol: 1e-10, max_iter: 0 }
    }
}

impl SolveOptions {
    pub fn cg() -> Self {
        Self { method: SolveMethod::ConjugateGradient, tol: 1e-12, max_iter: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub coefficients: Vec<T>,
    pub method: SolveMethod,
    pub iterations: usize,
    pub relative_residual: T,
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `|A x - b| / |b|` (absolute residual when `b = 0`).
pub fn relative_residual<T: Real>(sys: &SparseSymSystem<T>, x: &[T]) -> T {
    let ax = sys.matvec(x);
    let r: Vec<T> = ax.iter().zip(&sys.rhs).map(|(&a, &b)| a - b).collect();
    let nb = norm(&sys.rhs);
    if nb > T::zero() {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// `L D L^T` factorization in envelope (skyline) storage, without pivoting.
#[derive(Clone, Debug)]
pub struct EnvelopeLdl<T> {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    // row i holds L[i][first[i]..i]
    lower: Vec<T>,
    diag: Vec<T>,
}

impl<T: Real> EnvelopeLdl<T> {
    /// Factors `A - shift I`. Pivots with magnitude at most `1e-14 max|A_ii|` are rejected
    /// when `reject_small` is set.
    pub fn factor(sys: &SparseSymSystem<T>, shift: T, reject_small: bool) -> Result<Self> {
        let n = sys.n;
        let mut first = vec![0; n];
        let mut start = vec![0; n + 1];
        for i in 0..n {
            first[i] = sys.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i);
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut lower = vec![T::zero(); start[n]];
        let mut diag = vec![T::zero(); n];
        for i in 0..n {
            for (j, a) in sys.row(i) {
                if j < i {
                    lower[start[i] + j - first[i]] = a;
                } else if j == i {
                    diag[i] = a - shift;
                }
            }
        }
        let scale = (0..n).map(|i| sys.get(i, i).abs()).fold(T::zero(), |m, v| m.max(v));
        let threshold = T::lit(1e-14) * scale;

        for i in 0..n {
            let fi = first[i];
            // g_ij = a_ij - sum_k g_ik L_jk, stored in place, then L_ij = g_ij / d_j
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = lower[start[i] + j - fi];
                let (ri, rj) = (start[i] + k0 - fi, start[j] + k0 - fj);
                for k in 0..(j - k0) {
                    s -= lower[ri + k] * lower[rj + k];
                }
                lower[start[i] + j - fi] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let g = lower[start[i] + j - fi];
                let l = g / diag[j];
                d -= g * l;
                lower[start[i] + j - fi] = l;
            }
            diag[i] = d;
            if (reject_small && d.abs() <= threshold) || d == T::zero() {
                return Err(FcmError::SingularSystem { row: i, pivot: d.to_f64_lossy() });
            }
        }
        Ok(Self { n, first, start, lower, diag })
    }

    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|&&d| d < T::zero()).count()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = x[i];
            for j in fi..i {
                s -= self.lower[self.start[i] + j - fi] * x[j];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            for j in fi..i {
                x[j] -= self.lower[self.start[i] + j - fi] * xi;
            }
        }
        x
    }
}

/// Solves `A x = b` for a symmetric positive (semi)definite system.
pub fn solve_spd<T: Real>(sys: &SparseSymSystem<T>, options: SolveOptions) -> Result<SolveReport<T>> {
    match options.method {
        SolveMethod::Direct => solve_direct(sys, options.tol),
        SolveMethod::ConjugateGradient => solve_cg(sys, options.tol, options.max_iter),
    }
}

fn solve_direct<T: Real>(sys: &SparseSymSystem<T>, tol: f64) -> Result<SolveReport<T>> {
    let ldl = EnvelopeLdl::factor(sys, T::zero(), true)?;
    let mut x = ldl.solve(&sys.rhs);
    let mut res = relative_residual(sys, &x);
    // iterative refinement
    for _ in 0..3 {
        if res.to_f64_lossy() <= tol * 1e-2 {
            break;
        }
        let ax = sys.matvec(&x);
        let r: Vec<T> = sys.rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let dx = ldl.solve(&r);
        let candidate: Vec<T> = x.iter().zip(&dx).map(|(&a, &b)| a + b).collect();
        let cres = relative_residual(sys, &candidate);
        if !(cres < res) {
            break;
        }
        x = candidate;
        res = cres;
    }
    if !(res.to_f64_lossy() <= tol) {
        return Err(FcmError::ToleranceNotMet { residual: res.to_f64_lossy(), tolerance: tol });
    }
    Ok(SolveReport { coefficients: x, method: SolveMethod::Direct, iterations: 0, relative_residual: res })
}

fn solve_cg<T: Real>(sys: &SparseSymSystem<T>, tol: f64, max_iter: usize) -> Result<SolveReport<T>> {
    let n = sys.n;
    let max_iter = if max_iter == 0 { 10 * n.max(10) } else { max_iter };
    let diag = sys.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
        return Err(FcmError::IndefiniteSystem(format!("nonpositive diagonal entry at row {i}")));
    }
    let nb = norm(&sys.rhs);
    let mut x = vec![T::zero(); n];
    if nb == T::zero() {
        return Ok(SolveReport { coefficients: x, method: SolveMethod::ConjugateGradient, iterations: 0, relative_residual: T::zero() });
    }
    let target = T::lit(tol) * nb;
    let mut r = sys.rhs.clone();
    let mut z: Vec<T> = r.iter().zip(&diag).map(|(&a, &d)| a / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = sys.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(FcmError::IndefiniteSystem(format!("negative curvature at iteration {it}")));
        }
        let a = rz / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        if norm(&r) <= target {
            let res = relative_residual(sys, &x);
            if res.to_f64_lossy() <= tol {
                return Ok(SolveReport { coefficients: x, method: SolveMethod::ConjugateGradient, iterations: it, relative_residual: res });
            }
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let b = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + b * p[i];
        }
    }
    Err(FcmError::ToleranceNotMet { residual: relative_residual(sys, &x).to_f64_lossy(), tolerance: tol })
}

/// `D^{-1/2} A D^{-1/2}` and the scaling vector `D^{-1/2}`.
pub fn jacobi_scale<T: Real>(sys: &SparseSymSystem<T>) -> Result<(SparseSymSystem<T>, Vec<T>)> {
    let diag = sys.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
        return Err(FcmError::IndefiniteSystem(format!("nonpositive diagonal entry {} at row {i}", diag[i])));
    }
    let scale: Vec<T> = diag.iter().map(|&d| T::one() / d.sqrt()).collect();
    let mut scaled = sys.symmetric_scaled(&scale);
    for i in 0..scaled.n {
        for k in scaled.row_ptr[i]..scaled.row_ptr[i + 1] {
            if scaled.col_idx[k] == i {
                scaled.values[k] = T::one();
            }
        }
    }
    Ok((scaled, scale))
}

/// Largest dimension handled by the dense eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumReport<T> {
    pub lambda_min: T,
    pub lambda_max: T,
    /// `lambda_max / lambda_min`, infinite when `lambda_min <= 1e-14 lambda_max`.
    pub kappa: T,
    pub preconditioned_kappa: Option<T>,
}

pub fn condition_number<T: Real>(lambda_min: T, lambda_max: T) -> T {
    if lambda_min <= T::lit(1e-14) * lambda_max {
        T::infinity()
    } else {
        lambda_max / lambda_min
    }
}

/// All eigenvalues in ascending order.
pub fn eigenvalues<T: Real>(sys: &SparseSymSystem<T>) -> Result<Vec<T>> {
    let n = sys.n;
    if n > DENSE_EIGEN_LIMIT {
        return Err(FcmError::Capability { n, limit: DENSE_EIGEN_LIMIT });
    }
    let dense = sys.to_dense();
    let m = DMatrix::from_fn(n, n, |i, j| dense[i * n + j].to_f64_lossy());
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(FcmError::NoConvergence);
    }
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(eig.into_iter().map(T::lit).collect())
}

pub fn extreme_eigenvalues<T: Real>(sys: &SparseSymSystem<T>) -> Result<SpectrumReport<T>> {
    let eig = eigenvalues(sys)?;
    let (lambda_min, lambda_max) = (eig[0], eig[eig.len() - 1]);
    Ok(SpectrumReport { lambda_min, lambda_max, kappa: condition_number(lambda_min, lambda_max), preconditioned_kappa: None })
}

/// Spectrum of `A` together with the condition number of its Jacobi-scaled form.
pub fn spectrum_with_jacobi<T: Real>(sys: &SparseSymSystem<T>) -> Result<SpectrumReport<T>> {
    let mut report = extreme_eigenvalues(sys)?;
    report.preconditioned_kappa = match jacobi_scale(sys) {
        Ok((scaled, _)) => Some(extreme_eigenvalues(&scaled)?.kappa),
        Err(_) => Some(T::infinity()),
    };
    Ok(report)
}

/// Rayleigh-quotient estimate of the largest eigenvalue by power iteration.
pub fn power_lambda_max<T: Real>(sys: &SparseSymSystem<T>, iterations: usize) -> T {
    let n = sys.n;
    let mut x: Vec<T> = (0..n).map(|i| T::one() + T::of_usize(i % 7) * T::lit(0.1)).collect();
    let mut lambda = T::zero();
    for _ in 0..iterations {
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = sys.matvec(&x);
        lambda = dot(&x, &y);
        x = y;
    }
    lambda
}

/// Number of eigenvalues strictly below `sigma`, from the inertia of `A - sigma I`.
pub fn count_eigenvalues_below<T: Real>(sys: &SparseSymSystem<T>, sigma: T) -> Result<usize> {
    Ok(EnvelopeLdl::factor(sys, sigma, false)?.negative_pivots())
}

/// Sign information about the spectrum obtained from factorizations only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefinitenessCertificate<T> {
    /// Power-iteration estimate of the largest eigenvalue.
    pub lambda_max_estimate: T,
    /// Eigenvalues below zero.
    pub negative: usize,
    /// Eigenvalues below `-rel_tol * lambda_max_estimate`.
    pub below_tolerance: usize,
}

/// Counts negative and significantly negative eigenvalues through `L D L^T` inertia.
pub fn definiteness<T: Real>(sys: &SparseSymSystem<T>, rel_tol: T) -> Result<DefinitenessCertificate<T>> {
    let lambda_max_estimate = power_lambda_max(sys, 300);
    let negative = count_eigenvalues_below(sys, T::zero())?;
    let below_tolerance = count_eigenvalues_below(sys, -rel_tol * lambda_max_estimate)?;
    Ok(DefinitenessCertificate { lambda_max_estimate, negative, below_tolerance })
}
