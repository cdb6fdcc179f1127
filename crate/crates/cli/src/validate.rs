//! Mean field and spin waves against exact diagonalization at small N.

use std::fmt::Write as _;
use std::path::PathBuf;

use jtchain::oracle::{converged_ground_state, exact_vs_meanfield, Basis, Comparison};
use jtchain::{Boundary, EdConfig, EdResult, ModelParams};
use rayon::prelude::*;

use crate::config::ValidateConfig;
use crate::error::{CliError, CliResult};
use crate::format::{boundary_name, write_file, Fmt, Table};

/// Tolerated violation of the variational bound.
pub const BOUND_TOL: f64 = 1e-10;
/// Mean field is exact without a transverse field.
pub const ZERO_FIELD_TOL: f64 = 1e-8;
/// Decoupled rows agree to roundoff.
pub const DECOUPLED_TOL: f64 = 1e-12;
/// Exact ground states keep the Z2 symmetry.
pub const PARITY_TOL: f64 = 1e-10;

const START_CUTOFF: usize = 4;
const CUTOFF_STEP: usize = 2;

const HEADER: [&str; 19] = [
    "kind",
    "boundary",
    "N",
    "omega",
    "omega0",
    "t",
    "g",
    "cutoff",
    "e_exact",
    "e_mean_field",
    "variational_gap",
    "max_abs_sz",
    "max_abs_displacement",
    "f_spin_exact",
    "f_spin_wave",
    "discrepancy",
    "zero_point_energy",
    "status",
    "failures",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Grid,
    Trend,
}

impl RowKind {
    fn name(self) -> &'static str {
        match self {
            RowKind::Grid => "grid",
            RowKind::Trend => "trend",
        }
    }
}

/// One exact-vs-approximate comparison and the checks it failed.
#[derive(Debug, Clone)]
pub struct ValidationRow {
    pub kind: RowKind,
    pub params: ModelParams,
    pub ed: EdResult,
    pub comparison: Comparison<f64>,
    pub failures: Vec<String>,
}

impl ValidationRow {
    pub fn max_abs_sz(&self) -> f64 {
        self.ed.sz_mean.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn max_abs_displacement(&self) -> f64 {
        self.ed.boson_displacement.iter().fold(0.0, |m, a| m.max(a.norm()))
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    /// Spin-wave discrepancy along the trend couplings.
    pub trend: Vec<(f64, Option<f64>)>,
    pub trend_monotone: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| {
                let p = r.params;
                r.failures.iter().map(move |f| format!("g={} omega={} t={}: {f}", p.g, p.omega, p.t))
            })
            .collect();
        if !self.trend_monotone {
            out.push(format!("spin-wave discrepancy is not monotone along the trend: {:?}", self.trend));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

fn params(cfg: &ValidateConfig, g: f64, omega: f64, t: f64) -> CliResult<ModelParams> {
    Ok(ModelParams::new(cfg.n_sites, cfg.omega0, t, g, omega, cfg.boundary)?)
}

/// Converged exact ground state and its comparison with mean field.
pub fn compare_point(p: &ModelParams, max_cutoff: usize) -> CliResult<(EdResult, Comparison<f64>)> {
    let ed = converged_ground_state(p, Basis::BareModes, START_CUTOFF, CUTOFF_STEP, max_cutoff)?;
    let cfg = EdConfig::new(*p, ed.cutoff_used, Basis::BareModes)?;
    let cmp = exact_vs_meanfield(&cfg, &ed)?;
    Ok((ed, cmp))
}

fn check(p: &ModelParams, ed: &EdResult, c: &Comparison<f64>) -> Vec<String> {
    let mut f = Vec::new();
    if c.variational_gap < -BOUND_TOL {
        f.push(format!("variational bound violated: E_MF - E_exact = {:e}", c.variational_gap));
    }
    if p.omega == 0.0 {
        if c.variational_gap.abs() >= ZERO_FIELD_TOL {
            f.push(format!("zero field: |E_MF - E_exact| = {:e}", c.variational_gap.abs()));
        }
        if p.boundary == Boundary::Periodic {
            let closed = -(p.n_sites as f64) * p.g * p.g / p.omega0;
            if (c.e_exact - closed).abs() >= ZERO_FIELD_TOL {
                f.push(format!("zero field: E_exact = {} but -N g^2/omega0 = {closed}", c.e_exact));
            }
        }
    }
    if p.g == 0.0 {
        let sx = c.sx_exact.iter().zip(&c.sin_theta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let occ =
            c.occupation_exact.iter().zip(&c.occupation_mean_field).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let worst = c.variational_gap.abs().max(sx).max(occ);
        if worst > DECOUPLED_TOL {
            f.push(format!("decoupled: exact and mean field differ by {worst:e}"));
        }
    }
    let sz = ed.sz_mean.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let disp = ed.boson_displacement.iter().fold(0.0f64, |m, a| m.max(a.norm()));
    if sz >= PARITY_TOL || disp >= PARITY_TOL {
        f.push(format!("parity broken: |<sz>| = {sz:e}, |<a>| = {disp:e}"));
    }
    f
}

/// Runs the grid and the weak-coupling trend.
pub fn run_validation(cfg: &ValidateConfig) -> CliResult<ValidationReport> {
    let mut jobs: Vec<(RowKind, ModelParams)> = Vec::new();
    for &g in &cfg.g {
        for &omega in &cfg.omega {
            for &t in &cfg.t {
                jobs.push((RowKind::Grid, params(cfg, g, omega, t)?));
            }
        }
    }
    for &g in &cfg.trend_g {
        jobs.push((RowKind::Trend, params(cfg, g, cfg.trend_omega, cfg.trend_t)?));
    }
    let rows = crate::format::with_pool(|| {
        jobs.par_iter()
            .map(|&(kind, p)| {
                let (ed, comparison) = compare_point(&p, cfg.max_cutoff)?;
                let failures = check(&p, &ed, &comparison);
                Ok(ValidationRow { kind, params: p, ed, comparison, failures })
            })
            .collect::<CliResult<Vec<_>>>()
    })??;
    let trend: Vec<(f64, Option<f64>)> = rows
        .iter()
        .filter(|r| r.kind == RowKind::Trend)
        .map(|r| (r.params.g, r.comparison.fluctuation_discrepancy()))
        .collect();
    let trend_monotone = trend.iter().all(|(_, d)| d.is_some())
        && trend.windows(2).all(|w| w[1].1.unwrap_or(f64::NAN) < w[0].1.unwrap_or(f64::NAN));
    Ok(ValidationReport { rows, trend, trend_monotone })
}

pub fn report_table(report: &ValidationReport, fmt: Fmt) -> Table {
    let mut t = Table::new(HEADER.to_vec());
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| fmt.float(v));
    for r in &report.rows {
        let p = &r.params;
        let c = &r.comparison;
        t.push(vec![
            r.kind.name().into(),
            boundary_name(p.boundary).into(),
            p.n_sites.to_string(),
            fmt.float(p.omega),
            fmt.float(p.omega0),
            fmt.float(p.t),
            fmt.float(p.g),
            r.ed.cutoff_used.to_string(),
            fmt.float(c.e_exact),
            fmt.float(c.e_mean_field),
            fmt.float(c.variational_gap),
            fmt.float(r.max_abs_sz()),
            fmt.float(r.max_abs_displacement()),
            fmt.float(c.f_spin_exact),
            opt(c.f_spin_wave),
            opt(c.fluctuation_discrepancy()),
            opt(c.zero_point_energy),
            if r.failures.is_empty() { "pass".into() } else { "fail".into() },
            r.failures.join("; "),
        ]);
    }
    t
}

pub fn report_text(report: &ValidationReport) -> String {
    let mut s = String::new();
    let grid = report.rows.iter().filter(|r| r.kind == RowKind::Grid).count();
    let failed = report.rows.iter().filter(|r| !r.failures.is_empty()).count();
    let worst_gap = report.rows.iter().map(|r| r.comparison.variational_gap).fold(f64::INFINITY, f64::min);
    let _ = writeln!(s, "grid points: {grid}, rows failing a check: {failed}");
    let _ = writeln!(s, "smallest E_MF - E_exact: {worst_gap:e}");
    let _ = writeln!(s, "spin-wave discrepancy along the trend:");
    for (g, d) in &report.trend {
        match d {
            Some(d) => {
                let _ = writeln!(s, "  g = {g}: {d:e}");
            }
            None => {
                let _ = writeln!(s, "  g = {g}: undefined");
            }
        }
    }
    let _ = writeln!(s, "trend monotone: {}", report.trend_monotone);
    let failures = report.failures();
    if failures.is_empty() {
        let _ = writeln!(s, "result: PASS");
    } else {
        let _ = writeln!(s, "result: FAIL");
        for f in failures {
            let _ = writeln!(s, "  {f}");
        }
    }
    s
}

/// Runs, writes `validation.csv` and `validation_report.txt`, and fails with
/// a validation error if any check failed.
pub fn validate_and_write(cfg: &ValidateConfig) -> CliResult<(ValidationReport, Vec<PathBuf>)> {
    let fmt = Fmt::from_env()?;
    let report = run_validation(cfg)?;
    let csv_path = cfg.out_path.join("validation.csv");
    let txt_path = cfg.out_path.join("validation_report.txt");
    write_file(&csv_path, &report_table(&report, fmt).to_bytes())?;
    write_file(&txt_path, report_text(&report).as_bytes())?;
    if !report.passed() {
        return Err(CliError::Validation(report.failures().join("; ")));
    }
    Ok((report, vec![csv_path, txt_path]))
}
