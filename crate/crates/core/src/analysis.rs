//! Error norms, direct evaluation of the discrete forms and convergence rates.

use rayon::prelude::*;

use crate::assembly::{Discretization, MethodParams, ProblemData};
use crate::error::{FcmError, Result};
use crate::point::Vec2;
use crate::scalar::Real;
use crate::spline::FieldEval;

/// Squared contributions to the energy norm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts<T> {
    /// `|∇e|^2` over `Ω`
    pub gradient: T,
    /// `τ h^2 |Δe|^2` over the boundary layer inside `Ω`
    pub laplacian: T,
    /// `(2 + 1/τ) h^-1 |e|^2` on `∂Ω`
    pub boundary: T,
    /// `2 h |∇_T e|^2` on `∂Ω`
    pub tangent: T,
    /// `α |∇e|^2` over `Ω_h \ Ω`
    pub finite_cell: T,
    /// `|e|^2` over `Ω`
    pub l2: T,
}

impl<T: Real> EnergyParts<T> {
    pub fn energy_squared(&self) -> T {
        self.gradient + self.laplacian + self.boundary + self.tangent + self.finite_cell
    }

    fn add(self, o: Self) -> Self {
        Self {
            gradient: self.gradient + o.gradient,
            laplacian: self.laplacian + o.laplacian,
            boundary: self.boundary + o.boundary,
            tangent: self.tangent + o.tangent,
            finite_cell: self.finite_cell + o.finite_cell,
            l2: self.l2 + o.l2,
        }
    }
}

/// Energy-norm parts of the field `field(e, x)` (evaluated with element `e`'s polynomial piece).
pub fn energy_parts_of<T, F>(disc: &Discretization<T>, params: &MethodParams<T>, field: F) -> EnergyParts<T>
where
    T: Real,
    F: Fn(usize, Vec2<T>) -> FieldEval<T> + Sync,
{
    let h = disc.h();
    let alpha = params.alpha(h, disc.order());
    let ls_weight = params.tau * h * h;
    let pen = params.penalty_factor() / h;
    let tan = T::lit(2.0) * h;
    let parts: Vec<EnergyParts<T>> = disc
        .par_elements()
        .map(|(e, quad)| {
            let mut acc = EnergyParts::default();
            let in_layer = disc.in_layer(e);
            for q in &quad.inside {
                let v = field(e, q.point);
                acc.gradient += q.weight * v.gradient.norm_squared();
                acc.l2 += q.weight * v.value * v.value;
                if in_layer {
                    acc.laplacian += q.weight * ls_weight * v.laplacian * v.laplacian;
                }
            }
            for q in &quad.outside {
                let v = field(e, q.point);
                acc.finite_cell += q.weight * alpha * v.gradient.norm_squared();
            }
            for q in &quad.boundary {
                let v = field(e, q.point);
                let n = q.normal;
                let tg = v.gradient - n * v.gradient.dot(n);
                acc.boundary += q.weight * pen * v.value * v.value;
                acc.tangent += q.weight * tan * tg.norm_squared();
            }
            acc
        })
        .collect();
    parts.into_iter().fold(EnergyParts::default(), EnergyParts::add)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport<T> {
    pub l2: T,
    pub h1_semi: T,
    pub energy: T,
    pub dof_count: usize,
    pub h: T,
    pub shift: T,
}

/// Norms of `u - u_h` for the discrete solution with coefficients `coeffs`.
pub fn error_norms<T, U>(
    disc: &Discretization<T>,
    coeffs: &[T],
    exact: U,
    params: &MethodParams<T>,
    shift: T,
) -> Result<ErrorReport<T>>
where
    T: Real,
    U: Fn(Vec2<T>) -> FieldEval<T> + Sync,
{
    if coeffs.len() != disc.dof_count() {
        return Err(FcmError::Configuration(format!(
            "coefficient vector has length {}, expected {}",
            coeffs.len(),
            disc.dof_count()
        )));
    }
    let space = disc.space();
    let parts = energy_parts_of(disc, params, |e, x| exact(x).minus(space.eval_in_element(e, coeffs, x)));
    Ok(ErrorReport {
        l2: parts.l2.sqrt(),
        h1_semi: parts.gradient.sqrt(),
        energy: parts.energy_squared().sqrt(),
        dof_count: disc.dof_count(),
        h: disc.h(),
        shift,
    })
}

/// `A_{h,α}(v, w)` evaluated point by point from the two coefficient vectors.
pub fn bilinear_form<T: Real>(disc: &Discretization<T>, params: &MethodParams<T>, v: &[T], w: &[T]) -> T {
    let space = disc.space();
    let h = disc.h();
    let alpha = params.alpha(h, disc.order());
    let ls_weight = params.tau * h * h;
    let pen = params.effective_penalty() / h;
    let tan = params.beta * T::lit(2.0) * h;
    let terms: Vec<T> = disc
        .par_elements()
        .map(|(e, quad)| {
            let mut acc = T::zero();
            let ls = params.ls_terms && disc.in_layer(e);
            for q in &quad.inside {
                let (a, b) = (space.eval_in_element(e, v, q.point), space.eval_in_element(e, w, q.point));
                acc += q.weight * a.gradient.dot(b.gradient);
                if ls {
                    acc += q.weight * ls_weight * a.laplacian * b.laplacian;
                }
            }
            for q in &quad.outside {
                let (a, b) = (space.eval_in_element(e, v, q.point), space.eval_in_element(e, w, q.point));
                acc += q.weight * alpha * a.gradient.dot(b.gradient);
            }
            for q in &quad.boundary {
                let (a, b) = (space.eval_in_element(e, v, q.point), space.eval_in_element(e, w, q.point));
                let n = q.normal;
                let (dna, dnb) = (a.gradient.dot(n), b.gradient.dot(n));
                let mut t = -dna * b.value - a.value * dnb + pen * a.value * b.value;
                if params.ls_terms {
                    t += tan * (a.gradient - n * dna).dot(b.gradient - n * dnb);
                }
                acc += q.weight * t;
            }
            acc
        })
        .collect();
    terms.into_iter().sum()
}

/// `L_h(v)` evaluated point by point.
pub fn linear_form<T: Real>(
    disc: &Discretization<T>,
    params: &MethodParams<T>,
    data: &ProblemData<T>,
    v: &[T],
) -> Result<T> {
    let space = disc.space();
    let h = disc.h();
    let ls_weight = params.tau * h * h;
    let pen = params.effective_penalty() / h;
    let tan = params.beta * T::lit(2.0) * h;
    let terms = disc
        .par_elements()
        .map(|(e, quad)| -> Result<T> {
            let mut acc = T::zero();
            let ls = params.ls_terms && disc.in_layer(e);
            for q in &quad.inside {
                let a = space.eval_in_element(e, v, q.point);
                let f = data.source_at(q.point)?;
                acc += q.weight * f * a.value;
                if ls {
                    acc -= q.weight * ls_weight * f * a.laplacian;
                }
            }
            for q in &quad.boundary {
                let a = space.eval_in_element(e, v, q.point);
                let n = q.normal;
                let dna = a.gradient.dot(n);
                let g = data.boundary_value_at(q.point)?;
                let mut t = -g * dna + pen * g * a.value;
                if params.ls_terms {
                    let tg = data.tangent_gradient_at(q.point, Vec2::new(-n.y, n.x), h)?;
                    t += tan * tg.dot(a.gradient - n * dna);
                }
                acc += q.weight * t;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(terms.into_iter().sum())
}

/// Rates `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`; `None` where an error is not positive.
pub fn eoc<T: Real>(h: &[T], errors: &[T]) -> Vec<Option<T>> {
    h.windows(2)
        .zip(errors.windows(2))
        .map(|(hh, ee)| {
            (ee[0] > T::zero() && ee[1] > T::zero() && ee[0].is_finite() && ee[1].is_finite())
                .then(|| (ee[0] / ee[1]).ln() / (hh[0] / hh[1]).ln())
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`; `None` unless at least two positive finite pairs.
pub fn fitted_slope<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    let pts: Vec<(T, T)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > T::zero() && b > T::zero() && a.is_finite() && b.is_finite())
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = T::of_usize(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > T::zero()).then(|| sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow<T> {
    pub h: T,
    /// Worst `[l2, h1_semi, energy]` over the shifts at this `h`.
    pub errors: [T; 3],
    /// Rates against the previous row.
    pub eoc: [Option<T>; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable<T> {
    pub rows: Vec<ConvergenceRow<T>>,
}

impl<T: Real> ConvergenceTable<T> {
    /// Worst case per mesh size over all reports; rows are ordered by decreasing `h`.
    pub fn from_reports(reports: &[ErrorReport<T>]) -> Result<Self> {
        let mut hs: Vec<T> = Vec::new();
        for r in reports {
            if !hs.contains(&r.h) {
                hs.push(r.h);
            }
        }
        if hs.len() < 2 {
            return Err(FcmError::Configuration("convergence table needs at least two mesh sizes".into()));
        }
        hs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let worst: Vec<[T; 3]> = hs
            .iter()
            .map(|&h| {
                reports.iter().filter(|r| r.h == h).fold([T::zero(); 3], |w, r| {
                    [w[0].max(r.l2), w[1].max(r.h1_semi), w[2].max(r.energy)]
                })
            })
            .collect();
        let column = |k: usize| eoc(&hs, &worst.iter().map(|w| w[k]).collect::<Vec<_>>());
        let (c0, c1, c2) = (column(0), column(1), column(2));
        let rows = hs
            .iter()
            .enumerate()
            .map(|(i, &h)| ConvergenceRow {
                h,
                errors: worst[i],
                eoc: if i == 0 { [None; 3] } else { [c0[i - 1], c1[i - 1], c2[i - 1]] },
            })
            .collect();
        Ok(Self { rows })
    }

    /// Fitted log-log slopes of the worst-case `[l2, h1_semi, energy]` errors.
    pub fn fitted_rates(&self) -> [Option<T>; 3] {
        let hs: Vec<T> = self.rows.iter().map(|r| r.h).collect();
        let col = |k: usize| fitted_slope(&hs, &self.rows.iter().map(|r| r.errors[k]).collect::<Vec<_>>());
        [col(0), col(1), col(2)]
    }
}
