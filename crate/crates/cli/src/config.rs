//! TOML configuration for sweeps and validation runs.
//!
//! ```toml
//! [base]
//! n_sites = 20
//! omega0 = 1.0
//! t = 0.4
//! omega = 1.0
//! boundary = "periodic"        # periodic | open | custom
//! # hopping_csv = "chain.csv"  # N x N single-particle matrix, custom only
//!
//! [[sweep]]
//! name = "coupling"
//! axis = "g"                   # g | n | t
//! grid = { start = 0.0, stop = 1.0, count = 201 }
//! # values = [0.1, 0.2, 0.3]
//! outputs = ["total", "spectrum", "meanfield"]
//! out = "out"
//! set = { t = 10.0 }           # per-sweep overrides of [base]
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use jtchain::lattice::collective_modes;
use jtchain::{BosonModes, Boundary, HoppingMatrix, ModelParams};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Axis {
    G,
    N,
    T,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::G => "g",
            Axis::N => "N",
            Axis::T => "t",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g" => Ok(Axis::G),
            "n" | "n_sites" => Ok(Axis::N),
            "t" => Ok(Axis::T),
            other => Err(CliError::config(format!("unknown axis '{other}' (expected g, n or t)"))),
        }
    }

    pub fn apply(self, base: &ModelParams, value: f64) -> ModelParams {
        match self {
            Axis::G => base.with_g(value),
            Axis::N => base.with_n_sites(value as usize),
            Axis::T => base.with_t(value),
        }
    }
}

/// Requested outputs. `Total`, `ZeroMode` and `Rest` all live in the main
/// CSV; `Spectrum` and `MeanField` add their own files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Output {
    Total,
    ZeroMode,
    Rest,
    Spectrum,
    MeanField,
}

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::Total => "total",
            Output::ZeroMode => "zero_mode",
            Output::Rest => "rest",
            Output::Spectrum => "spectrum",
            Output::MeanField => "meanfield",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "total" => Ok(Output::Total),
            "zero_mode" => Ok(Output::ZeroMode),
            "rest" => Ok(Output::Rest),
            "spectrum" => Ok(Output::Spectrum),
            "meanfield" => Ok(Output::MeanField),
            other => Err(CliError::config(format!("unknown output '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub name: String,
    pub base: ModelParams,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub outputs: BTreeSet<Output>,
    pub out_path: PathBuf,
    /// Collective modes of a custom lattice.
    pub custom_modes: Option<BosonModes>,
}

impl SweepConfig {
    pub fn new(
        name: impl Into<String>,
        base: ModelParams,
        axis: Axis,
        values: Vec<f64>,
        out_path: PathBuf,
    ) -> CliResult<Self> {
        let cfg = Self {
            name: name.into(),
            base,
            axis,
            values,
            outputs: [Output::Total].into_iter().collect(),
            out_path,
            custom_modes: None,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> CliResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::config(format!("invalid sweep name '{}'", self.name)));
        }
        if self.values.is_empty() {
            return Err(CliError::config(format!("sweep '{}' has no values", self.name)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config(format!("sweep '{}' has non-finite values", self.name)));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config(format!("sweep '{}' values must be strictly increasing", self.name)));
        }
        if self.axis == Axis::N && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return Err(CliError::config(format!("sweep '{}': N values must be positive integers", self.name)));
        }
        if self.base.boundary == Boundary::Custom && self.axis != Axis::G {
            return Err(CliError::config("custom lattices can only be swept along g"));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub n_sites: Option<usize>,
    pub omega0: Option<f64>,
    pub t: Option<f64>,
    pub g: Option<f64>,
    pub omega: Option<f64>,
    pub boundary: Option<String>,
    pub hopping_csv: Option<PathBuf>,
}

impl RawParams {
    /// Fills unset fields from `base`.
    fn over(&self, base: &RawParams) -> RawParams {
        RawParams {
            n_sites: self.n_sites.or(base.n_sites),
            omega0: self.omega0.or(base.omega0),
            t: self.t.or(base.t),
            g: self.g.or(base.g),
            omega: self.omega.or(base.omega),
            boundary: self.boundary.clone().or_else(|| base.boundary.clone()),
            hopping_csv: self.hopping_csv.clone().or_else(|| base.hopping_csv.clone()),
        }
    }

    fn boundary(&self) -> CliResult<Boundary> {
        match self.boundary.as_deref().unwrap_or("periodic") {
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            "open" | "obc" => Ok(Boundary::Open),
            "custom" => Ok(Boundary::Custom),
            other => Err(CliError::config(format!("unknown boundary '{other}'"))),
        }
    }

    /// Parameters with the documented defaults `N = 20, ω̄_0 = 1, t = 0.4,
    /// g = 0, Ω = 1`, periodic. A custom lattice takes its hopping from the
    /// matrix, so `t` defaults to 0 there.
    pub fn resolve(&self) -> CliResult<ModelParams> {
        let boundary = self.boundary()?;
        let default_t = if boundary == Boundary::Custom { 0.0 } else { 0.4 };
        let p = ModelParams::new(
            self.n_sites.unwrap_or(20),
            self.omega0.unwrap_or(1.0),
            self.t.unwrap_or(default_t),
            self.g.unwrap_or(0.0),
            self.omega.unwrap_or(1.0),
            boundary,
        )?;
        Ok(p)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start: f64,
    stop: f64,
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    name: String,
    axis: String,
    values: Option<Vec<f64>>,
    grid: Option<RawGrid>,
    outputs: Option<Vec<String>>,
    out: Option<PathBuf>,
    set: Option<RawParams>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweepFile {
    #[serde(default)]
    base: RawParams,
    #[serde(default)]
    sweep: Vec<RawSweep>,
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> CliResult<Vec<f64>> {
    if count < 2 {
        return Err(CliError::config("grid count must be at least 2"));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(CliError::config("grid bounds must be finite"));
    }
    let span = stop - start;
    let last = (count - 1) as f64;
    Ok((0..count).map(|i| if i + 1 == count { stop } else { start + span * (i as f64 / last) }).collect())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn relative_to(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Reads a square single-particle hopping matrix (no header, comma separated).
pub fn read_hopping_csv(path: &Path) -> CliResult<HoppingMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| CliError::config(format!("{}: '{f}': {e}", path.display()))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config(format!("{}: hopping matrix must be square and nonempty", path.display())));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(HoppingMatrix::from_single_particle(&m)?)
}

fn custom_modes(raw: &RawParams, dir: &Path, n_sites: usize) -> CliResult<Option<BosonModes>> {
    if raw.boundary()? != Boundary::Custom {
        if raw.hopping_csv.is_some() {
            return Err(CliError::config("hopping_csv requires boundary = \"custom\""));
        }
        return Ok(None);
    }
    let path = raw.hopping_csv.as_ref().ok_or_else(|| CliError::config("boundary = \"custom\" needs hopping_csv"))?;
    let h = read_hopping_csv(&relative_to(dir, path))?;
    if h.n_sites() != n_sites {
        return Err(CliError::config(format!("hopping matrix has {} sites, n_sites = {n_sites}", h.n_sites())));
    }
    Ok(Some(collective_modes(&h)?))
}

/// Parses a sweep configuration. Relative paths are resolved against the
/// directory of the config file.
pub fn parse_sweep_config(text: &str, dir: &Path) -> CliResult<Vec<SweepConfig>> {
    let raw: RawSweepFile = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    if raw.sweep.is_empty() {
        return Err(CliError::config("no [[sweep]] tables"));
    }
    let mut names = BTreeSet::new();
    let mut out = Vec::with_capacity(raw.sweep.len());
    for s in raw.sweep {
        if !names.insert(s.name.clone()) {
            return Err(CliError::config(format!("duplicate sweep name '{}'", s.name)));
        }
        let merged = s.set.as_ref().map_or_else(|| raw.base.clone(), |o| o.over(&raw.base));
        let base = merged.resolve()?;
        let axis = Axis::parse(&s.axis)?;
        let values = match (s.values, s.grid) {
            (Some(v), None) => v,
            (None, Some(g)) => linear_grid(g.start, g.stop, g.count)?,
            _ => return Err(CliError::config(format!("sweep '{}' needs exactly one of values or grid", s.name))),
        };
        let outputs = match s.outputs {
            Some(list) => list.iter().map(|o| Output::parse(o)).collect::<CliResult<BTreeSet<_>>>()?,
            None => [Output::Total].into_iter().collect(),
        };
        if outputs.is_empty() {
            return Err(CliError::config(format!("sweep '{}' requests no outputs", s.name)));
        }
        let cfg = SweepConfig {
            custom_modes: custom_modes(&merged, dir, base.n_sites)?,
            name: s.name,
            base,
            axis,
            values,
            outputs,
            out_path: relative_to(dir, &s.out.unwrap_or_else(|| PathBuf::from("out"))),
        };
        cfg.check()?;
        out.push(cfg);
    }
    Ok(out)
}

/// Exact-diagonalization validation pack.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidateConfig {
    pub n_sites: usize,
    pub omega0: f64,
    pub boundary: Boundary,
    pub g: Vec<f64>,
    pub omega: Vec<f64>,
    pub t: Vec<f64>,
    pub trend_g: Vec<f64>,
    pub trend_omega: f64,
    pub trend_t: f64,
    pub max_cutoff: usize,
    pub out_path: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    n_sites: Option<usize>,
    omega0: Option<f64>,
    boundary: Option<String>,
    g: Option<Vec<f64>>,
    omega: Option<Vec<f64>>,
    t: Option<Vec<f64>>,
    trend_g: Option<Vec<f64>>,
    trend_omega: Option<f64>,
    trend_t: Option<f64>,
    max_cutoff: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidateFile {
    validate: RawValidate,
}

impl Default for ValidateConfig {
    /// Two-site grid over `g × Ω × t = {0.2, 0.5, 0.8} × {0, 0.5, 1} × {0, 0.4, 1}`
    /// plus the weak-coupling trend `g ∈ {0.3, 0.2, 0.1, 0.05}` at `Ω = 1, t = 0.4`.
    fn default() -> Self {
        Self {
            n_sites: 2,
            omega0: 1.0,
            boundary: Boundary::Periodic,
            g: vec![0.2, 0.5, 0.8],
            omega: vec![0.0, 0.5, 1.0],
            t: vec![0.0, 0.4, 1.0],
            trend_g: vec![0.3, 0.2, 0.1, 0.05],
            trend_omega: 1.0,
            trend_t: 0.4,
            max_cutoff: 40,
            out_path: PathBuf::from("validation"),
        }
    }
}

pub fn parse_validate_config(text: &str, dir: &Path) -> CliResult<ValidateConfig> {
    let raw: RawValidateFile = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    let r = raw.validate;
    let d = ValidateConfig::default();
    let boundary = RawParams { boundary: r.boundary, ..RawParams::default() }.boundary()?;
    if boundary == Boundary::Custom {
        return Err(CliError::config("validation runs support periodic and open chains"));
    }
    let cfg = ValidateConfig {
        n_sites: r.n_sites.unwrap_or(d.n_sites),
        omega0: r.omega0.unwrap_or(d.omega0),
        boundary,
        g: r.g.unwrap_or(d.g),
        omega: r.omega.unwrap_or(d.omega),
        t: r.t.unwrap_or(d.t),
        trend_g: r.trend_g.unwrap_or(d.trend_g),
        trend_omega: r.trend_omega.unwrap_or(d.trend_omega),
        trend_t: r.trend_t.unwrap_or(d.trend_t),
        max_cutoff: r.max_cutoff.unwrap_or(d.max_cutoff),
        out_path: relative_to(dir, &r.out.unwrap_or(d.out_path)),
    };
    if cfg.n_sites == 0 || cfg.n_sites > jtchain::oracle::MAX_SITES {
        return Err(CliError::config(format!(
            "validation needs 1 <= n_sites <= {}, got {}",
            jtchain::oracle::MAX_SITES,
            cfg.n_sites
        )));
    }
    if cfg.g.is_empty() || cfg.omega.is_empty() || cfg.t.is_empty() {
        return Err(CliError::config("validation grid axes must be nonempty"));
    }
    Ok(cfg)
}

/// Applies `key=value` overrides to a parameter set.
pub fn apply_overrides(
    base: ModelParams,
    sets: &[String],
    locked: &[&str],
) -> CliResult<(ModelParams, Vec<(String, String)>)> {
    let mut p = base;
    let mut applied = Vec::new();
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::config(format!("override '{s}' is not key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        if locked.contains(&k) {
            return Err(CliError::config(format!("'{k}' is varied by this figure and cannot be overridden")));
        }
        let num = || v.parse::<f64>().map_err(|e| CliError::config(format!("override {k}: '{v}': {e}")));
        match k {
            "n_sites" | "N" | "n" => {
                p.n_sites = v.parse::<usize>().map_err(|e| CliError::config(format!("override {k}: '{v}': {e}")))?
            }
            "omega0" => p.omega0 = num()?,
            "t" => p.t = num()?,
            "g" => p.g = num()?,
            "omega" => p.omega = num()?,
            other => return Err(CliError::config(format!("unknown override key '{other}'"))),
        }
        applied.push((k.to_string(), v.to_string()));
    }
    p.validate()?;
    Ok((p, applied))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = linear_grid(0.0, 1.0, 201).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 0.5);
        assert_eq!(g[200], 1.0);
        assert!(linear_grid(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn parses_sweeps_with_overrides() {
        let text = r#"
            [base]
            n_sites = 20
            t = 0.4

            [[sweep]]
            name = "a"
            axis = "g"
            grid = { start = 0.0, stop = 1.0, count = 5 }
            outputs = ["total", "spectrum"]

            [[sweep]]
            name = "b"
            axis = "n"
            values = [2, 4, 8]
            set = { t = 10.0, g = 0.6 }
        "#;
        let cfgs = parse_sweep_config(text, Path::new("/tmp")).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(cfgs[0].values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(cfgs[0].outputs.contains(&Output::Spectrum));
        assert_eq!(cfgs[1].base.t, 10.0);
        assert_eq!(cfgs[1].base.g, 0.6);
        assert_eq!(cfgs[1].base.n_sites, 20);
        assert_eq!(cfgs[1].out_path, PathBuf::from("/tmp/out"));
    }

    #[test]
    fn rejects_bad_sweeps() {
        let bad = [
            "[[sweep]]\nname='a'\naxis='g'\nvalues=[0.2, 0.1]",
            "[[sweep]]\nname='a'\naxis='g'\nvalues=[]",
            "[[sweep]]\nname='a'\naxis='q'\nvalues=[0.1]",
            "[[sweep]]\nname='a'\naxis='n'\nvalues=[2.5]",
            "[[sweep]]\nname='a'\naxis='g'\nvalues=[0.1]\ngrid={start=0.0, stop=1.0, count=3}",
            "[[sweep]]\nname='a'\naxis='g'\nvalues=[-0.1]",
            "[base]\nfoo=1\n[[sweep]]\nname='a'\naxis='g'\nvalues=[0.1]",
            "[base]\nboundary='custom'\n[[sweep]]\nname='a'\naxis='g'\nvalues=[0.1]",
        ];
        for text in bad {
            assert!(parse_sweep_config(text, Path::new(".")).is_err(), "{text}");
        }
    }

    #[test]
    fn overrides() {
        let base = ModelParams::periodic(20, 1.0, 0.4, 0.0, 1.0).unwrap();
        let (p, applied) = apply_overrides(base, &["omega=2".into(), "N=10".into()], &["g"]).unwrap();
        assert_eq!(p.omega, 2.0);
        assert_eq!(p.n_sites, 10);
        assert_eq!(applied.len(), 2);
        assert!(apply_overrides(base, &["g=0.3".into()], &["g"]).is_err());
        assert!(apply_overrides(base, &["x=1".into()], &[]).is_err());
        assert!(apply_overrides(base, &["t=-1".into()], &[]).is_err());
    }

    #[test]
    fn validate_defaults_and_limits() {
        let cfg = parse_validate_config("[validate]\n", Path::new("/x")).unwrap();
        assert_eq!(cfg.g.len() * cfg.omega.len() * cfg.t.len(), 27);
        assert!(parse_validate_config("[validate]\nn_sites = 4\n", Path::new(".")).is_err());
    }
}
