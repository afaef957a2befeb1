//! CSV rows written by the experiments.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

pub const RESULT_HEADER: &str =
    "experiment,geometry,h,shift,tau,ls,c_alpha,l2,h1_semi,energy,kappa,kappa_jacobi,dofs,wall_time,status";

/// One case of a sweep. Unmeasured quantities are `None` and written as empty fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub geometry: String,
    pub h: f64,
    /// Grid shift parameter `s`, or the domain displacement `δ` in the special cases.
    pub shift: f64,
    pub tau: f64,
    pub ls: bool,
    pub c_alpha: f64,
    pub l2: Option<f64>,
    pub h1_semi: Option<f64>,
    pub energy: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_jacobi: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub dofs: usize,
    pub wall_time: f64,
    /// `ok` or `error: <message>`
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.geometry,
            format_number(self.h),
            format_number(self.shift),
            format_number(self.tau),
            self.ls,
            format_number(self.c_alpha),
            opt(self.l2),
            opt(self.h1_semi),
            opt(self.energy),
            opt(self.kappa),
            opt(self.kappa_jacobi),
            self.dofs,
            format_number(self.wall_time),
            csv_field(&self.status),
        );
        s
    }
}

/// Shortest round-trip decimal; unbounded values become `inf`.
pub fn format_number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            experiment: "convergence".into(),
            geometry: "disc".into(),
            h: 0.1,
            shift: 0.5,
            tau: 0.1,
            ls: true,
            c_alpha: 1e-3,
            l2: Some(1.5e-5),
            h1_semi: None,
            energy: None,
            kappa: Some(f64::INFINITY),
            kappa_jacobi: None,
            lambda_min: None,
            lambda_max: None,
            dofs: 42,
            wall_time: 0.25,
            status: "error: a, b".into(),
        }
    }

    #[test]
    fn line_format() {
        assert_eq!(
            row().to_csv_line(),
            "convergence,disc,0.1,0.5,0.1,true,0.001,0.000015,,,inf,,42,0.25,\"error: a, b\""
        );
        let csv = results_csv(&[row()]);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 15);
    }
}
