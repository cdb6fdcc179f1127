//! The sweeps behind the four standard figures, plus a plot script.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jtchain::ModelParams;

use crate::config::{apply_overrides, linear_grid, Axis, Output, SweepConfig};
use crate::error::CliResult;
use crate::format::{meta_path, write_file, Fmt, Metadata};
use crate::sweep::{evaluate_sweep, render_sweep, SweepFiles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

/// Chain sizes of the "increasing N" panels.
pub const FIG2_SIZES: [usize; 4] = [5, 10, 20, 40];
/// Size range of the `F(N)` panels.
pub const SIZE_RANGE: (usize, usize) = (2, 100);
pub const FIG3_HOPPING: [f64; 2] = [0.4, 10.0];
pub const FIG4_HOPPING: [f64; 4] = [0.4, 0.8, 1.5, 5.0];
pub const FIG4_COUPLING: [f64; 2] = [0.6, 0.5];
pub const COUPLING_POINTS: usize = 201;

impl FigureId {
    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig1 => "fig1",
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
        }
    }

    /// Parameters the figure varies; these cannot be overridden.
    pub fn locked(self) -> &'static [&'static str] {
        match self {
            FigureId::Fig1 => &["g"],
            FigureId::Fig2 => &["g", "n_sites", "N", "n"],
            FigureId::Fig3 => &["n_sites", "N", "n", "t"],
            FigureId::Fig4 => &["n_sites", "N", "n", "t", "g"],
        }
    }

    fn defaults(self) -> ModelParams {
        let g = match self {
            FigureId::Fig1 | FigureId::Fig2 => 0.0,
            FigureId::Fig3 | FigureId::Fig4 => 0.6,
        };
        ModelParams::periodic(20, 1.0, 0.4, g, 1.0).expect("figure defaults are valid")
    }
}

/// A figure with optional parameter overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub figure_id: FigureId,
    pub overrides: Vec<String>,
}

/// One curve of a figure: a named sweep.
#[derive(Debug, Clone)]
pub struct Series {
    pub stem: String,
    pub label: String,
    pub sweep: SweepConfig,
}

/// Resolved sweeps of a figure.
#[derive(Debug, Clone)]
pub struct FigurePlan {
    pub id: FigureId,
    pub base: ModelParams,
    pub series: Vec<Series>,
    pub assumptions: Vec<String>,
    pub overrides: Vec<(String, String)>,
}

fn coupling_grid() -> Vec<f64> {
    linear_grid(0.0, 1.0, COUPLING_POINTS).expect("static grid")
}

fn size_grid() -> Vec<f64> {
    (SIZE_RANGE.0..=SIZE_RANGE.1).map(|n| n as f64).collect()
}

fn series(
    stem: String,
    label: String,
    base: ModelParams,
    axis: Axis,
    values: Vec<f64>,
    out: &Path,
) -> CliResult<Series> {
    let mut sweep = SweepConfig::new(stem.clone(), base, axis, values, out.to_path_buf())?;
    sweep.outputs.insert(Output::ZeroMode);
    sweep.outputs.insert(Output::Rest);
    Ok(Series { stem, label, sweep })
}

pub fn plan(spec: &FigureSpec, out: &Path) -> CliResult<FigurePlan> {
    let id = spec.figure_id;
    let (base, overrides) = apply_overrides(id.defaults(), &spec.overrides, id.locked())?;
    let mut assumptions = vec!["periodic boundary conditions".to_string()];
    let mut list = Vec::new();
    match id {
        FigureId::Fig1 => {
            list.push(series("fig1".into(), format!("N={}", base.n_sites), base, Axis::G, coupling_grid(), out)?);
            assumptions.push(format!("g grid: {COUPLING_POINTS} points on [0, 1]"));
        }
        FigureId::Fig2 => {
            for n in FIG2_SIZES {
                let p = base.with_n_sites(n);
                list.push(series(format!("fig2_N{n}"), format!("N={n}"), p, Axis::G, coupling_grid(), out)?);
            }
            assumptions.push(format!("N values {FIG2_SIZES:?} chosen for the increasing-N panels"));
            assumptions.push(format!("g grid: {COUPLING_POINTS} points on [0, 1]"));
        }
        FigureId::Fig3 => {
            for t in FIG3_HOPPING {
                let p = base.with_t(t);
                list.push(series(format!("fig3_t{t}"), format!("t={t}"), p, Axis::N, size_grid(), out)?);
            }
            assumptions.push(format!("N range {}..={} chosen for the F(N) panels", SIZE_RANGE.0, SIZE_RANGE.1));
        }
        FigureId::Fig4 => {
            for g in FIG4_COUPLING {
                for t in FIG4_HOPPING {
                    let p = base.with_g(g).with_t(t);
                    list.push(series(format!("fig4_g{g}_t{t}"), format!("t={t}"), p, Axis::N, size_grid(), out)?);
                }
            }
            assumptions.push(format!("N range {}..={} chosen for the F(N) panels", SIZE_RANGE.0, SIZE_RANGE.1));
        }
    }
    Ok(FigurePlan { id, base, series: list, assumptions, overrides })
}

/// Matplotlib script that reads the CSVs next to it.
pub fn plot_script(plan: &FigurePlan) -> String {
    let mut s = String::new();
    let files: Vec<String> =
        plan.series.iter().map(|x| format!("    (\"{}.csv\", \"{}\"),", x.stem, x.label)).collect();
    let _ = writeln!(s, "# Regenerate with: jtchain figure {}", plan.id.name());
    let _ = writeln!(s, "import csv");
    let _ = writeln!(s, "import math");
    let _ = writeln!(s, "import os");
    let _ = writeln!(s, "import matplotlib");
    let _ = writeln!(s, "matplotlib.use(\"Agg\")");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "HERE = os.path.dirname(os.path.abspath(__file__))");
    let _ = writeln!(s, "SERIES = [");
    for f in &files {
        let _ = writeln!(s, "{f}");
    }
    let _ = writeln!(s, "]");
    let _ = writeln!(s);
    let _ = writeln!(s, "def load(name):");
    let _ = writeln!(s, "    with open(os.path.join(HERE, name), newline=\"\") as fh:");
    let _ = writeln!(s, "        return list(csv.DictReader(fh))");
    let _ = writeln!(s);
    let _ = writeln!(s, "def col(rows, key):");
    let _ = writeln!(s, "    return [float(r[key]) for r in rows]");
    let _ = writeln!(s);
    let _ = writeln!(s, "def finite(xs, ys):");
    let _ = writeln!(s, "    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]");
    let _ = writeln!(s, "    return [p[0] for p in pts], [p[1] for p in pts]");
    let _ = writeln!(s);
    let body = match plan.id {
        FigureId::Fig1 => {
            "\
fig, ax = plt.subplots()
for name, label in SERIES:
    rows = load(name)
    x = col(rows, \"axis_value\")
    ax.plot(*finite(x, col(rows, \"f_spin_total\")), label=\"spin \" + label)
    ax.plot(*finite(x, col(rows, \"f_boson_total\")), \"--\", label=\"boson \" + label)
ax.set_xlabel(\"g\")
ax.set_ylabel(\"F\")
ax.set_yscale(\"log\")
ax.legend()
"
        }
        FigureId::Fig2 => {
            "\
fig, (top, bottom) = plt.subplots(2, 1, sharex=True)
for name, label in SERIES:
    rows = load(name)
    x = col(rows, \"axis_value\")
    top.plot(*finite(x, col(rows, \"f_spin_total\")), label=label)
    bottom.plot(*finite(x, col(rows, \"f_spin_zero\")), label=label)
top.set_ylabel(\"F spin, all modes\")
bottom.set_ylabel(\"F spin, n = 0\")
bottom.set_xlabel(\"g\")
top.set_yscale(\"log\")
bottom.set_yscale(\"log\")
top.legend()
"
        }
        FigureId::Fig3 => {
            "\
fig, axes = plt.subplots(len(SERIES), 1, sharex=True)
for ax, (name, label) in zip(axes, SERIES):
    rows = load(name)
    x = col(rows, \"axis_value\")
    ax.plot(*finite(x, col(rows, \"f_spin_total\")), label=\"total\")
    ax.plot(*finite(x, col(rows, \"f_spin_rest\")), \"--\", label=\"n != 0\")
    ax.set_title(label)
    ax.set_ylabel(\"F spin\")
    ax.legend()
axes[-1].set_xlabel(\"N\")
"
        }
        FigureId::Fig4 => {
            "\
fig, axes = plt.subplots(1, 2, sharey=True)
panels = {}
for name, label in SERIES:
    g = name.split(\"_\")[1]
    panels.setdefault(g, []).append((name, label))
for ax, (g, items) in zip(axes, panels.items()):
    for name, label in items:
        rows = load(name)
        ax.plot(*finite(col(rows, \"axis_value\"), col(rows, \"f_spin_rest\")), label=label)
    ax.set_title(g.replace(\"g\", \"g = \"))
    ax.set_xlabel(\"N\")
    ax.legend()
axes[0].set_ylabel(\"F spin, n != 0\")
"
        }
    };
    s.push_str(body);
    let _ = writeln!(s, "fig.tight_layout()");
    let _ = writeln!(s, "fig.savefig(os.path.join(HERE, \"{}.png\"), dpi=150)", plan.id.name());
    s
}

/// Computes every series, then writes CSVs, metadata and the plot script.
pub fn reproduce_figure(spec: &FigureSpec, out: &Path) -> CliResult<Vec<PathBuf>> {
    let fmt = Fmt::from_env()?;
    let plan = plan(spec, out)?;
    let mut rendered: Vec<SweepFiles> = Vec::with_capacity(plan.series.len());
    for s in &plan.series {
        let points = evaluate_sweep(&s.sweep)?;
        rendered.push(render_sweep(&s.sweep, &points, out, &s.stem, fmt));
    }
    // The figure id plus resolved overrides fully determine the output.
    let mut identity = format!("figure={}\n", plan.id.name());
    for (k, v) in &plan.overrides {
        let _ = writeln!(identity, "{k}={v}");
    }
    let axis = plan.series.first().map_or("g", |s| s.sweep.axis.name());
    let mut meta = Metadata::new(identity.as_bytes(), &plan.base, axis, fmt);
    meta.assumptions = plan.assumptions.clone();
    meta.overrides = plan.overrides.clone();
    let script_name = format!("{}.py", plan.id.name());
    let mut written = Vec::new();
    for files in &rendered {
        files.write()?;
        meta.files.extend(files.names());
        written.extend(files.files.iter().map(|(p, _)| p.clone()));
    }
    let script = out.join(&script_name);
    write_file(&script, plot_script(&plan).as_bytes())?;
    meta.files.push(script_name);
    let mp = meta_path(out, plan.id.name());
    meta.write(&mp)?;
    written.push(script);
    written.push(mp);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans_have_expected_series() {
        let out = Path::new("/tmp/x");
        let count = |id| plan(&FigureSpec { figure_id: id, overrides: vec![] }, out).unwrap().series.len();
        assert_eq!(count(FigureId::Fig1), 1);
        assert_eq!(count(FigureId::Fig2), 4);
        assert_eq!(count(FigureId::Fig3), 2);
        assert_eq!(count(FigureId::Fig4), 8);
        let p = plan(&FigureSpec { figure_id: FigureId::Fig3, overrides: vec![] }, out).unwrap();
        assert_eq!(p.series[0].sweep.values.len(), 99);
        assert_eq!(p.series[1].stem, "fig3_t10");
        assert_eq!(p.series[1].sweep.base.g, 0.6);
    }

    #[test]
    fn overrides_respect_locked_keys() {
        let out = Path::new("/tmp/x");
        let ok = plan(&FigureSpec { figure_id: FigureId::Fig1, overrides: vec!["omega=2".into()] }, out).unwrap();
        assert_eq!(ok.base.omega, 2.0);
        assert_eq!(ok.overrides, vec![("omega".to_string(), "2".to_string())]);
        assert!(plan(&FigureSpec { figure_id: FigureId::Fig4, overrides: vec!["t=1".into()] }, out).is_err());
    }
}
