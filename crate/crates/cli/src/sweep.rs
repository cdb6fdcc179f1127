//! Parameter sweeps: evaluate every point, then write the CSVs.

use std::path::{Path, PathBuf};

use jtchain::lattice::modes_for;
use jtchain::meanfield::{solve_pbc, solve_self_consistent};
use jtchain::spinwave::{
    build_gaussian_hamiltonian, diagonalize_quadratic, fluctuations_general, fluctuations_pbc, gaussian_spectrum_pbc,
};
use jtchain::{BosonModes, Boundary, FluctuationReport, MeanFieldSolution, ModelParams};
use rayon::prelude::*;

use crate::config::{Axis, Output, SweepConfig};
use crate::error::CliResult;
use crate::format::{meta_path, write_file, Fmt, Metadata, Table};

/// Column layout of the main sweep CSV.
pub const SWEEP_HEADER: [&str; 17] = [
    "axis_name",
    "axis_value",
    "N",
    "omega",
    "omega0",
    "t",
    "g",
    "f_spin_total",
    "f_boson_total",
    "f_spin_zero",
    "f_boson_zero",
    "f_spin_rest",
    "f_boson_rest",
    "e_minus_0",
    "e_plus_0",
    "sin_theta",
    "phase",
];

const SPECTRUM_HEADER: [&str; 13] = [
    "axis_name",
    "axis_value",
    "N",
    "omega",
    "omega0",
    "t",
    "g",
    "mode",
    "omega_bar",
    "e_minus",
    "e_plus",
    "f_spin",
    "f_boson",
];

const MEANFIELD_HEADER: [&str; 16] = [
    "axis_name",
    "axis_value",
    "N",
    "omega",
    "omega0",
    "t",
    "g",
    "site",
    "theta",
    "sin_theta",
    "cos_theta",
    "mode",
    "alpha_re",
    "alpha_im",
    "energy",
    "phase",
];

/// One collective mode of an evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRow {
    pub label: usize,
    pub omega_bar: f64,
    pub e_minus: f64,
    pub e_plus: f64,
}

/// Everything computed at one sweep point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub axis_value: f64,
    pub params: ModelParams,
    pub mean_field: MeanFieldSolution,
    pub report: FluctuationReport,
    /// Mode rows in the order of `report.mode_labels`.
    pub modes: Vec<ModeRow>,
    pub e_minus_0: f64,
    pub e_plus_0: f64,
    /// Site average of `sin θ_j`.
    pub sin_theta: f64,
}

/// Mean field plus Gaussian fluctuations at one parameter set. Periodic
/// chains use the closed forms, everything else the general quadrature
/// diagonalization on `custom` (or the modes of the boundary condition).
pub fn evaluate_point(params: &ModelParams, custom: Option<&BosonModes>) -> CliResult<PointResult> {
    params.validate()?;
    if params.boundary == Boundary::Periodic && custom.is_none() {
        let mf = solve_pbc(params)?;
        let spec = gaussian_spectrum_pbc(params, &mf)?;
        let report = fluctuations_pbc(&spec);
        let modes = report
            .mode_labels
            .iter()
            .map(|&k| ModeRow {
                label: k,
                omega_bar: spec.omega_bar[k],
                e_minus: spec.e_minus[k],
                e_plus: spec.e_plus[k],
            })
            .collect();
        return Ok(finish(params, mf, report, modes));
    }
    let owned;
    let modes = match custom {
        Some(m) => m,
        None => {
            owned = modes_for(params)?;
            &owned
        }
    };
    let mf = solve_self_consistent(modes, params, &[], 1e-13, 100_000)?;
    let form = build_gaussian_hamiltonian(modes, &mf, params)?;
    let bogo = diagonalize_quadratic(&form)?;
    let report = fluctuations_general(&bogo, &form);
    let rows = form
        .mode_labels
        .iter()
        .enumerate()
        .map(|(k, &label)| {
            let (e_minus, e_plus) = form.mode_energies(k);
            ModeRow { label, omega_bar: modes.energies()[k], e_minus, e_plus }
        })
        .collect();
    Ok(finish(params, mf, report, rows))
}

fn finish(params: &ModelParams, mf: MeanFieldSolution, report: FluctuationReport, modes: Vec<ModeRow>) -> PointResult {
    let zero = modes.iter().find(|m| m.label == 0);
    let (e_minus_0, e_plus_0) = zero.map_or((f64::NAN, f64::NAN), |m| (m.e_minus, m.e_plus));
    let sin_theta = mf.sin_theta.iter().sum::<f64>() / mf.sin_theta.len() as f64;
    PointResult { axis_value: f64::NAN, params: *params, mean_field: mf, report, modes, e_minus_0, e_plus_0, sin_theta }
}

/// Evaluates every point of a sweep in parallel, keeping axis order.
pub fn evaluate_sweep(cfg: &SweepConfig) -> CliResult<Vec<PointResult>> {
    crate::format::with_pool(|| {
        cfg.values
            .par_iter()
            .map(|&v| {
                let p = cfg.axis.apply(&cfg.base, v);
                let mut r = evaluate_point(&p, cfg.custom_modes.as_ref())?;
                r.axis_value = v;
                Ok(r)
            })
            .collect::<CliResult<Vec<_>>>()
    })?
}

fn axis_value(axis: Axis, v: f64, fmt: Fmt) -> String {
    match axis {
        Axis::N => format!("{}", v as usize),
        _ => fmt.float(v),
    }
}

fn param_cells(axis: Axis, r: &PointResult, fmt: Fmt) -> Vec<String> {
    let p = &r.params;
    vec![
        axis.name().to_string(),
        axis_value(axis, r.axis_value, fmt),
        p.n_sites.to_string(),
        fmt.float(p.omega),
        fmt.float(p.omega0),
        fmt.float(p.t),
        fmt.float(p.g),
    ]
}

pub fn sweep_table(axis: Axis, points: &[PointResult], fmt: Fmt) -> Table {
    let mut t = Table::new(SWEEP_HEADER.to_vec());
    for r in points {
        let f = &r.report;
        let mut row = param_cells(axis, r, fmt);
        row.extend(
            [
                f.f_spin_total,
                f.f_boson_total,
                f.zero_mode_spin,
                f.zero_mode_boson,
                f.rest_spin,
                f.rest_boson,
                r.e_minus_0,
                r.e_plus_0,
                r.sin_theta,
            ]
            .map(|x| fmt.float(x)),
        );
        row.push(r.mean_field.phase.as_str().to_string());
        t.push(row);
    }
    t
}

pub fn spectrum_table(axis: Axis, points: &[PointResult], fmt: Fmt) -> Table {
    let mut t = Table::new(SPECTRUM_HEADER.to_vec());
    for r in points {
        for (i, m) in r.modes.iter().enumerate() {
            let mut row = param_cells(axis, r, fmt);
            row.push(m.label.to_string());
            row.extend(
                [m.omega_bar, m.e_minus, m.e_plus, r.report.per_mode_spin[i], r.report.per_mode_boson[i]]
                    .map(|x| fmt.float(x)),
            );
            t.push(row);
        }
    }
    t
}

pub fn meanfield_table(axis: Axis, points: &[PointResult], fmt: Fmt) -> Table {
    let mut t = Table::new(MEANFIELD_HEADER.to_vec());
    for r in points {
        let mf = &r.mean_field;
        for j in 0..mf.n_sites() {
            let label = r.modes.get(j).map_or(j, |m| m.label);
            let mut row = param_cells(axis, r, fmt);
            row.push(j.to_string());
            row.extend([mf.thetas[j], mf.sin_theta[j], mf.cos_theta[j]].map(|x| fmt.float(x)));
            row.push(label.to_string());
            row.extend([mf.alphas[j].re, mf.alphas[j].im, mf.energy].map(|x| fmt.float(x)));
            row.push(mf.phase.as_str().to_string());
            t.push(row);
        }
    }
    t
}

/// Files produced for one sweep, not yet written.
#[derive(Debug, Clone)]
pub struct SweepFiles {
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

impl SweepFiles {
    pub fn write(&self) -> CliResult<()> {
        for (path, bytes) in &self.files {
            write_file(path, bytes)?;
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().filter_map(|(p, _)| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect()
    }
}

/// Renders the CSVs of a sweep. `stem` names the files inside `dir`.
pub fn render_sweep(cfg: &SweepConfig, points: &[PointResult], dir: &Path, stem: &str, fmt: Fmt) -> SweepFiles {
    let mut files = vec![(dir.join(format!("{stem}.csv")), sweep_table(cfg.axis, points, fmt).to_bytes())];
    if cfg.outputs.contains(&Output::Spectrum) {
        files.push((dir.join(format!("{stem}_spectrum.csv")), spectrum_table(cfg.axis, points, fmt).to_bytes()));
    }
    if cfg.outputs.contains(&Output::MeanField) {
        files.push((dir.join(format!("{stem}_meanfield.csv")), meanfield_table(cfg.axis, points, fmt).to_bytes()));
    }
    SweepFiles { files }
}

/// Runs all sweeps of a config file. Every point of every sweep is evaluated
/// before the first file is written.
pub fn run_sweeps(cfgs: &[SweepConfig], config_bytes: &[u8]) -> CliResult<Vec<PathBuf>> {
    let fmt = Fmt::from_env()?;
    let mut pending = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let points = evaluate_sweep(cfg)?;
        let files = render_sweep(cfg, &points, &cfg.out_path, &cfg.name, fmt);
        let mut meta = Metadata::new(config_bytes, &cfg.base, cfg.axis.name(), fmt);
        meta.files = files.names();
        meta.assumptions
            .push(format!("outputs: {}", cfg.outputs.iter().map(|o| o.name()).collect::<Vec<_>>().join(", ")));
        if cfg.custom_modes.is_some() {
            meta.assumptions.push("custom hopping matrix read from hopping_csv".into());
        }
        pending.push((cfg, files, meta));
    }
    let mut written = Vec::new();
    for (cfg, files, meta) in pending {
        files.write()?;
        let mp = meta_path(&cfg.out_path, &cfg.name);
        meta.write(&mp)?;
        written.extend(files.files.into_iter().map(|(p, _)| p));
        written.push(mp);
    }
    Ok(written)
}
