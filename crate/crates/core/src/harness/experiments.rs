//! Convergence, conditioning and special-case sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{error_norms, fitted_slope, ConvergenceTable, ErrorReport};
use crate::assembly::{assemble_system, Discretization, MethodParams};
use crate::error::{FcmError, Result};
use crate::geometry::{make_diamond, make_disc_polygon, make_rectangle, shift_grid, DomainPolygon, ShiftSpec};
use crate::harness::config::{Experiment, ExperimentConfig, GeometrySpec};
use crate::harness::manufactured::Solution;
use crate::harness::output::{format_number, results_csv, ResultRow};
use crate::point::Vec2;
use crate::solve::{solve_spd, spectrum_with_jacobi, SolveOptions};
use crate::spline::BackgroundGrid;

/// Shift parameters `s_k = k / (n - 1)`, `k = 0..n`.
pub fn shift_values(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

/// Domain and background grid of one case.
#[derive(Clone, Debug)]
pub struct CaseSetup {
    pub domain: DomainPolygon<f64>,
    pub grid: BackgroundGrid<f64>,
}

/// Grid covering the domain with `p + 1` elements of margin, translated by `(s h, s h / 3)`.
pub fn shifted_setup(domain: DomainPolygon<f64>, h: f64, s: f64, p: usize) -> Result<CaseSetup> {
    let (lo, hi) = domain.bbox();
    let base = BackgroundGrid::covering(lo, hi, h, p + 1)?;
    let grid = shift_grid(&base, ShiftSpec::new(s, h)?)?;
    Ok(CaseSetup { domain, grid })
}

/// Rotated square with half-diagonal `8h` centered on a grid node, displaced by `δ h (1, 1) / √2`.
pub fn rotated_square_setup(h: f64, delta: f64, p: usize) -> Result<CaseSetup> {
    let r = 8.0 * h;
    let base = make_diamond(Vec2::new(0.0, 0.0), r)?;
    let (lo, hi) = base.bbox();
    let grid = BackgroundGrid::covering(lo, hi, h, p + 1)?;
    let offset = delta * h / std::f64::consts::SQRT_2;
    Ok(CaseSetup { domain: base.translated(Vec2::new(offset, offset)), grid })
}

/// Axis-aligned square of side `14h` on grid lines, displaced by `(δ, δ)`.
pub fn aligned_square_setup(h: f64, delta: f64, p: usize) -> Result<CaseSetup> {
    let side = 14.0 * h;
    let base = make_rectangle(Vec2::new(0.0, 0.0), Vec2::new(side, side))?;
    let grid = BackgroundGrid::covering(Vec2::new(0.0, 0.0), Vec2::new(side, side), h, p + 1)?;
    Ok(CaseSetup { domain: base.translated(Vec2::new(delta, delta)), grid })
}

/// Domain of a non-special geometry.
pub fn build_domain(spec: &GeometrySpec) -> Result<DomainPolygon<f64>> {
    match spec {
        GeometrySpec::Disc { center, radius, n_vertices } => make_disc_polygon(*center, *radius, *n_vertices),
        GeometrySpec::UnitSquare => make_rectangle(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)),
        GeometrySpec::Polygon(path) => DomainPolygon::from_csv_path(path),
        GeometrySpec::Rotated45 | GeometrySpec::Aligned => Err(FcmError::Configuration(format!(
            "geometry `{}` is only available in special-case",
            spec.name()
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measure {
    pub norms: bool,
    pub spectrum: bool,
}

/// Assembles one case and measures the requested quantities; failures end up in the row status.
pub fn run_case(
    experiment: Experiment,
    geometry: &str,
    setup: Result<CaseSetup>,
    params: &MethodParams<f64>,
    p: usize,
    solution: Solution,
    solver: SolveOptions,
    shift: f64,
    h: f64,
    measure: Measure,
) -> ResultRow {
    let start = Instant::now();
    let mut row = ResultRow {
        experiment: experiment.to_string(),
        geometry: geometry.to_string(),
        h,
        shift,
        tau: params.tau,
        ls: params.ls_terms,
        c_alpha: params.c_alpha,
        l2: None,
        h1_semi: None,
        energy: None,
        kappa: None,
        kappa_jacobi: None,
        lambda_min: None,
        lambda_max: None,
        dofs: 0,
        wall_time: 0.0,
        status: "ok".into(),
    };
    let outcome = (|| -> Result<()> {
        let setup = setup?;
        let disc = Discretization::new(&setup.domain, setup.grid, p)?;
        row.dofs = disc.dof_count();
        let data = solution.problem();
        let sys = assemble_system(&disc, params, &data)?;
        if measure.spectrum {
            let spec = spectrum_with_jacobi(&sys)?;
            row.kappa = Some(spec.kappa);
            row.kappa_jacobi = spec.preconditioned_kappa;
            row.lambda_min = Some(spec.lambda_min);
            row.lambda_max = Some(spec.lambda_max);
        }
        if measure.norms {
            let report = solve_spd(&sys, solver)?;
            let err = error_norms(&disc, &report.coefficients, |x| solution.eval(x), params, shift)?;
            row.l2 = Some(err.l2);
            row.h1_semi = Some(err.h1_semi);
            row.energy = Some(err.energy);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.status = format!("error: {e}");
    }
    row.wall_time = start.elapsed().as_secs_f64();
    row
}

/// Result of a pass/fail threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub csv: String,
    pub summary: Vec<String>,
    pub checks: Vec<Check>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Convergence => run_convergence(cfg),
        Experiment::ConditionSweep => run_condition_sweep(cfg),
        Experiment::SpecialCase => run_special_case(cfg),
        Experiment::Solve => run_solve(cfg),
    }
}

fn sweep(cfg: &ExperimentConfig, measure: Measure) -> Result<Vec<ResultRow>> {
    let domain = build_domain(&cfg.geometry)?;
    let shifts = shift_values(cfg.shifts);
    let cases: Vec<(f64, f64)> = cfg.h_list.iter().flat_map(|&h| shifts.iter().map(move |&s| (h, s))).collect();
    Ok(cases
        .par_iter()
        .map(|&(h, s)| {
            run_case(
                cfg.experiment,
                cfg.geometry.name(),
                shifted_setup(domain.clone(), h, s, cfg.p),
                &cfg.params,
                cfg.p,
                cfg.solution,
                cfg.solver,
                s,
                h,
                measure,
            )
        })
        .collect())
}

fn failed_rows_summary(rows: &[ResultRow], summary: &mut Vec<String>) {
    let failed: Vec<&ResultRow> = rows.iter().filter(|r| !r.is_ok()).collect();
    if !failed.is_empty() {
        summary.push(format!("{} of {} cases failed", failed.len(), rows.len()));
        for r in failed.iter().take(5) {
            summary.push(format!("  h={} shift={}: {}", r.h, r.shift, r.status));
        }
    }
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let rows = sweep(cfg, Measure { norms: true, spectrum: false })?;
    let mut summary = Vec::new();
    failed_rows_summary(&rows, &mut summary);
    let reports: Vec<ErrorReport<f64>> = rows
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| ErrorReport {
            l2: r.l2.unwrap_or(f64::NAN),
            h1_semi: r.h1_semi.unwrap_or(f64::NAN),
            energy: r.energy.unwrap_or(f64::NAN),
            dof_count: r.dofs,
            h: r.h,
            shift: r.shift,
        })
        .collect();
    let mut checks = Vec::new();
    let all_ok = rows.iter().all(|r| r.is_ok());
    match ConvergenceTable::from_reports(&reports) {
        Ok(table) => {
            summary.push(format!("{:>10} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6}", "h", "L2", "eoc", "H1", "eoc", "energy", "eoc"));
            for r in &table.rows {
                let rate = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
                summary.push(format!(
                    "{:>10} {:>12.4e} {:>6} {:>12.4e} {:>6} {:>12.4e} {:>6}",
                    r.h,
                    r.errors[0],
                    rate(r.eoc[0]),
                    r.errors[1],
                    rate(r.eoc[1]),
                    r.errors[2],
                    rate(r.eoc[2])
                ));
            }
            let fit = table.fitted_rates();
            let show = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "undefined".into());
            summary.push(format!("fitted rates: L2 {} H1 {} energy {}", show(fit[0]), show(fit[1]), show(fit[2])));
            checks.push(Check {
                name: "L2 rate >= 2.7".into(),
                passed: all_ok && fit[0].is_some_and(|r| r >= 2.7),
                detail: show(fit[0]),
            });
            checks.push(Check {
                name: "H1 rate >= 1.7".into(),
                passed: all_ok && fit[1].is_some_and(|r| r >= 1.7),
                detail: show(fit[1]),
            });
        }
        Err(e) => summary.push(format!("no convergence table: {e}")),
    }
    Ok(ExperimentOutput { csv: results_csv(&rows), rows, summary, checks })
}

/// Largest value per mesh size, `inf` dominating; `None` if a mesh size has no finite or infinite value.
fn worst_per_h(rows: &[ResultRow], h_list: &[f64], pick: impl Fn(&ResultRow) -> Option<f64>) -> Vec<Option<f64>> {
    h_list
        .iter()
        .map(|&h| {
            rows.iter()
                .filter(|r| r.h == h && r.is_ok())
                .filter_map(&pick)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        })
        .collect()
}

pub fn run_condition_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let rows = sweep(cfg, Measure { norms: false, spectrum: true })?;
    let mut summary = Vec::new();
    failed_rows_summary(&rows, &mut summary);
    let worst = worst_per_h(&rows, &cfg.h_list, |r| r.kappa);
    let worst_jacobi = worst_per_h(&rows, &cfg.h_list, |r| r.kappa_jacobi);
    summary.push(format!("{:>10} {:>14} {:>14}", "h", "worst kappa", "worst jacobi"));
    for (i, h) in cfg.h_list.iter().enumerate() {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
        summary.push(format!("{:>10} {:>14} {:>14}", h, f(worst[i]), f(worst_jacobi[i])));
    }
    let negative = rows.iter().filter(|r| r.lambda_min.is_some_and(|l| l < 0.0)).count();
    summary.push(format!("cases with negative lambda_min: {negative} of {}", rows.len()));

    let mut checks = Vec::new();
    if cfg.h_list.len() >= 2 {
        let all: Option<Vec<f64>> = worst.iter().copied().collect();
        let slope = all.and_then(|w| fitted_slope(&cfg.h_list, &w));
        let show = slope.map(|s| format!("{s:.3}")).unwrap_or_else(|| "undefined".into());
        summary.push(format!("fitted kappa slope: {show}"));
        checks.push(Check {
            name: "kappa slope in [-3.7, -2.3]".into(),
            passed: slope.is_some_and(|s| (-3.7..=-2.3).contains(&s)),
            detail: show,
        });
    }
    if cfg.params.ls_terms && cfg.params.c_alpha > 0.0 {
        let ok = rows.iter().all(|r| match (r.kappa, r.kappa_jacobi) {
            (Some(k), Some(j)) => j <= k,
            _ => false,
        });
        checks.push(Check { name: "jacobi kappa <= kappa".into(), passed: ok, detail: String::new() });
    }
    Ok(ExperimentOutput { csv: results_csv(&rows), rows, summary, checks })
}

pub fn run_special_case(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let h = cfg.h_list[0];
    let rotated = cfg.geometry == GeometrySpec::Rotated45;
    let cases: Vec<(f64, f64)> = cfg
        .c_alpha_list
        .iter()
        .flat_map(|&c| cfg.deltas.iter().map(move |&d| (c, d)))
        .collect();
    let rows: Vec<ResultRow> = cases
        .par_iter()
        .map(|&(c_alpha, delta)| {
            let setup = if rotated {
                rotated_square_setup(h, delta, cfg.p)
            } else {
                aligned_square_setup(h, delta, cfg.p)
            };
            let params = MethodParams { c_alpha, ..cfg.params };
            run_case(
                Experiment::SpecialCase,
                cfg.geometry.name(),
                setup,
                &params,
                cfg.p,
                cfg.solution,
                cfg.solver,
                delta,
                h,
                Measure { norms: false, spectrum: true },
            )
        })
        .collect();

    let mut summary = Vec::new();
    failed_rows_summary(&rows, &mut summary);
    let mut checks = Vec::new();
    for &c_alpha in &cfg.c_alpha_list {
        let group: Vec<&ResultRow> = rows.iter().filter(|r| r.c_alpha == c_alpha).collect();
        let kappas: Vec<f64> = group.iter().map(|r| r.kappa.unwrap_or(f64::NAN)).collect();
        let jacobi: Vec<f64> = group.iter().map(|r| r.kappa_jacobi.unwrap_or(f64::NAN)).collect();
        let st = SpecialStats::new(&cfg.deltas, &kappas);
        let sj = SpecialStats::new(&cfg.deltas, &jacobi);
        summary.push(format!(
            "c_alpha={}: kappa {} | growth {} spread {} | jacobi growth {} spread {}",
            format_number(c_alpha),
            kappas.iter().map(|&k| format!("{k:.3e}")).collect::<Vec<_>>().join(" "),
            fmt_ratio(st.growth),
            fmt_ratio(st.spread),
            fmt_ratio(sj.growth),
            fmt_ratio(sj.spread)
        ));
        match (rotated, c_alpha) {
            (true, c) if c == 0.0 => {
                checks.push(Check {
                    name: "rotated45 c_alpha=0 kappa growth >= 10".into(),
                    passed: st.growth.is_some_and(|g| g >= 10.0),
                    detail: fmt_ratio(st.growth),
                });
                checks.push(Check {
                    name: "rotated45 c_alpha=0 jacobi kappa growth >= 10".into(),
                    passed: sj.growth.is_some_and(|g| g >= 10.0),
                    detail: fmt_ratio(sj.growth),
                });
            }
            (true, c) if c == 1e-3 => checks.push(Check {
                name: "rotated45 c_alpha=1e-3 kappa spread <= 100".into(),
                passed: st.all_finite && st.spread.is_some_and(|s| s <= 100.0),
                detail: fmt_ratio(st.spread),
            }),
            (false, c) if c == 0.0 => checks.push(Check {
                name: "aligned c_alpha=0 kappa finite, spread <= 1e3".into(),
                passed: st.all_finite && st.spread.is_some_and(|s| s <= 1e3),
                detail: fmt_ratio(st.spread),
            }),
            _ => {}
        }
    }
    Ok(ExperimentOutput { csv: results_csv(&rows), rows, summary, checks })
}

fn fmt_ratio(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "undefined".into())
}

/// Condition-number statistics over a `δ` sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpecialStats {
    /// `κ(smallest δ) / κ(largest δ)`
    pub growth: Option<f64>,
    /// `max κ / min κ`
    pub spread: Option<f64>,
    pub all_finite: bool,
}

impl SpecialStats {
    pub fn new(deltas: &[f64], kappas: &[f64]) -> Self {
        let all_finite = !kappas.is_empty() && kappas.iter().all(|k| k.is_finite());
        let valid = kappas.iter().all(|k| !k.is_nan()) && !kappas.is_empty();
        let (imin, imax) = deltas.iter().enumerate().fold((0, 0), |(lo, hi), (i, &d)| {
            (if d < deltas[lo] { i } else { lo }, if d > deltas[hi] { i } else { hi })
        });
        let growth = valid.then(|| kappas[imin] / kappas[imax]).filter(|g| !g.is_nan());
        let max = kappas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = kappas.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = valid.then(|| max / min).filter(|s| !s.is_nan());
        Self { growth, spread, all_finite }
    }
}

pub fn run_solve(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let domain = build_domain(&cfg.geometry)?;
    let h = cfg.h_list[0];
    let s = shift_values(cfg.shifts)[0];
    let setup = shifted_setup(domain.clone(), h, s, cfg.p)?;
    let disc = Discretization::new(&setup.domain, setup.grid, cfg.p)?;
    let data = cfg.solution.problem();
    let sys = assemble_system(&disc, &cfg.params, &data)?;
    let report = solve_spd(&sys, cfg.solver)?;
    let err = error_norms(&disc, &report.coefficients, |x| cfg.solution.eval(x), &cfg.params, s)?;

    let (lo, hi) = domain.bbox();
    let n = cfg.lattice;
    let coord = |a: f64, b: f64, i: usize| if n == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    let mut csv = String::from("x,y,u_h,inside\n");
    let mut max_error: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let pt = Vec2::new(coord(lo.x, hi.x, i), coord(lo.y, hi.y, j));
            let inside = domain.contains(pt);
            let value = disc.space().eval_field(&report.coefficients, pt).ok().map(|f| f.value);
            if let (Some(v), true) = (value, inside) {
                max_error = max_error.max((v - cfg.solution.eval(pt).value).abs());
            }
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                format_number(pt.x),
                format_number(pt.y),
                value.map(format_number).unwrap_or_default(),
                u8::from(inside)
            );
        }
    }
    let summary = vec![
        format!("dofs {} relative residual {:.3e}", disc.dof_count(), report.relative_residual),
        format!("L2 {:.6e} H1 {:.6e} energy {:.6e}", err.l2, err.h1_semi, err.energy),
        format!("max lattice error inside the domain {max_error:.3e}"),
    ];
    let checks = vec![Check {
        name: "solution finite".into(),
        passed: report.coefficients.iter().all(|c| c.is_finite()),
        detail: String::new(),
    }];
    Ok(ExperimentOutput { rows: vec![], csv, summary, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_are_inclusive() {
        assert_eq!(shift_values(1), vec![0.0]);
        assert_eq!(shift_values(3), vec![0.0, 0.5, 1.0]);
        let s = shift_values(100);
        assert_eq!(s.len(), 100);
        assert_eq!(s[99], 1.0);
    }

    #[test]
    fn special_setups_have_expected_cuts() {
        let rot = rotated_square_setup(0.09, 0.0, 2).unwrap();
        let cuts = crate::geometry::CutMesh::new(&rot.domain, &rot.grid).unwrap();
        for e in cuts.cut_elements() {
            let g = cuts.cut_geometry(e).unwrap();
            assert!((g.inside_area() - 0.5 * 0.09 * 0.09).abs() < 1e-14, "element {e} not halved");
        }
        let al = aligned_square_setup(0.07, 0.0, 2).unwrap();
        let (lo, hi) = al.domain.bbox();
        assert!((hi.x - lo.x - 0.98).abs() < 1e-12);
    }

    #[test]
    fn stats() {
        let s = SpecialStats::new(&[1e-2, 1e-4], &[10.0, 1000.0]);
        assert_eq!(s.growth, Some(100.0));
        assert_eq!(s.spread, Some(100.0));
        assert!(s.all_finite);
        let s = SpecialStats::new(&[1e-2, 1e-4], &[10.0, f64::INFINITY]);
        assert!(!s.all_finite);
        assert_eq!(s.growth, Some(f64::INFINITY));
    }
}
