//! TOML run configuration: parsing, unknown-key suggestions and full
//! validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use qpos_core::degeneracy::{PolyMap, DEFAULT_ZERO_THRESHOLD};
use qpos_core::geometry::{Axis, ConstantHermitianClass, KahlerClass, TorusModel};
use qpos_core::surface_cones::{DivisorClass, SurfaceLattice};

/// Grid size used when neither the config nor `--grid` gives one.
pub const DEFAULT_GRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Intersect,
    MaSolve,
    Certify,
    Pseff,
    AgSurface,
    Degeneracy,
    Glue,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Intersect => "intersect",
            Command::MaSolve => "ma-solve",
            Command::Certify => "certify",
            Command::Pseff => "pseff",
            Command::AgSurface => "ag-surface",
            Command::Degeneracy => "degeneracy",
            Command::Glue => "glue",
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// A matrix entry: a real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub type Matrix = Vec<Vec<Entry>>;

/// Exact lattice entry: an integer or a string such as `"-1/2"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalEntry {
    Int(i64),
    Text(String),
}

impl RationalEntry {
    fn text(&self) -> String {
        match self {
            RationalEntry::Int(v) => v.to_string(),
            RationalEntry::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TorusSection {
    pub grid: Option<usize>,
    pub active_axes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassesSection {
    #[serde(rename = "L")]
    pub l: Option<Matrix>,
    pub omega: Option<Matrix>,
    pub background: Option<Matrix>,
    #[serde(rename = "H")]
    pub h: Option<Matrix>,
    pub omega0: Option<Matrix>,
    pub list: Option<Vec<Matrix>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub k_max: Option<u32>,
    pub q: Option<usize>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldsSection {
    pub psi0: Option<String>,
    pub density: Option<String>,
    pub phi_s: Option<String>,
    pub phi_b: Option<String>,
    pub pole_mask: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatticeSection {
    /// `"p1xp1"` or `"f1"`; alternative to an explicit matrix.
    pub model: Option<String>,
    pub matrix: Option<Vec<Vec<RationalEntry>>>,
    pub nef: Option<Vec<Vec<RationalEntry>>>,
    pub effective: Option<Vec<Vec<RationalEntry>>>,
    #[serde(rename = "L")]
    pub l: Option<Vec<RationalEntry>>,
    pub omega_class: Option<Vec<RationalEntry>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapSection {
    pub file: Option<String>,
    pub text: Option<String>,
    pub center: Option<Vec<[f64; 2]>>,
    pub radius: Option<f64>,
    pub points: Option<usize>,
    pub threshold: Option<f64>,
    pub fibre_target: Option<Vec<[f64; 2]>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlueSection {
    pub u_radius: Option<usize>,
    pub pole_band: Option<usize>,
    pub eps_start: Option<f64>,
    pub eps_min: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub heatmaps: Option<bool>,
    /// `"csv"` (default) or `"bin"`.
    pub field_format: Option<String>,
}

/// The structured file as written, with CLI overrides merged in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    pub command: Option<String>,
    #[serde(default)]
    pub torus: TorusSection,
    #[serde(default)]
    pub classes: ClassesSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub fields: FieldsSection,
    pub lattice: Option<LatticeSection>,
    pub map: Option<MapSection>,
    #[serde(default)]
    pub glue: GlueSection,
    #[serde(default)]
    pub output: OutputSection,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("", &["command", "torus", "classes", "solve", "fields", "lattice", "map", "glue", "output"]),
    ("torus", &["grid", "active_axes"]),
    ("classes", &["L", "omega", "background", "H", "omega0", "list"]),
    ("solve", &["tol", "max_iter", "k_max", "q", "margin"]),
    ("fields", &["psi0", "density", "phi_s", "phi_b", "pole_mask"]),
    ("lattice", &["model", "matrix", "nef", "effective", "L", "omega_class"]),
    ("map", &["file", "text", "center", "radius", "points", "threshold", "fibre_target", "samples", "seed"]),
    ("glue", &["u_radius", "pole_band", "eps_start", "eps_min"]),
    ("output", &["heatmaps", "field_format"]),
];

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub q: Option<usize>,
    pub k_max: Option<u32>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub raw: RawConfig,
    /// Directory that relative field paths are resolved against.
    pub base_dir: PathBuf,
}

pub fn parse_config(path: &Path, command: Command, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base_dir, command, overrides)
}

pub fn parse_config_str(
    text: &str,
    base_dir: &Path,
    command: Command,
    overrides: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let value: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let mut errors = unknown_keys(&value);
    let mut raw: RawConfig = match RawConfig::deserialize(toml::Value::Table(value)) {
        Ok(raw) => raw,
        Err(e) => {
            errors.push(e.message().to_string());
            return Err(ConfigError::Invalid(errors));
        }
    };
    if let Some(g) = overrides.grid {
        raw.torus.grid = Some(g);
    }
    if let Some(q) = overrides.q {
        raw.solve.q = Some(q);
    }
    if let Some(k) = overrides.k_max {
        raw.solve.k_max = Some(k);
    }
    if let Some(t) = overrides.tol {
        raw.solve.tol = Some(t);
    }
    let config = RunConfig { command, raw, base_dir: base_dir.to_path_buf() };
    errors.extend(config.validate());
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

fn parse_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Parse { line, column, message: e.message().to_string() }
}

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut errors = Vec::new();
    let known = |section: &str| KNOWN.iter().find(|(s, _)| *s == section).map(|(_, k)| *k);
    let mut check = |section: &str, t: &toml::Table| {
        let Some(keys) = known(section) else { return };
        for key in t.keys() {
            if keys.contains(&key.as_str()) {
                continue;
            }
            let full = if section.is_empty() { key.clone() } else { format!("{section}.{key}") };
            let best = keys
                .iter()
                .map(|k| (strsim::levenshtein(&key.to_lowercase(), &k.to_lowercase()), *k))
                .min()
                .filter(|(d, k)| *d <= 2.max(k.len() / 3));
            match best {
                Some((_, k)) => errors.push(format!("unknown key `{full}` (did you mean `{k}`?)")),
                None => errors.push(format!("unknown key `{full}`")),
            }
        }
    };
    check("", table);
    for (name, v) in table {
        if let toml::Value::Table(t) = v {
            check(name, t);
        }
    }
    errors
}

impl RunConfig {
    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Every problem with the config for its command, not just the first.
    fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let raw = &self.raw;
        if let Some(c) = &raw.command {
            if c != self.command.name() {
                errors.push(format!("config is for `{c}` but the command is `{}`", self.command.name()));
            }
        }
        let mut push = |r: Result<(), String>| {
            if let Err(e) = r {
                errors.push(e);
            }
        };
        if let Some(t) = raw.solve.tol {
            push(positive("solve.tol", t));
        }
        if let Some(m) = raw.solve.margin {
            push(positive("solve.margin", m));
        }
        if raw.solve.max_iter == Some(0) {
            push(Err("solve.max_iter must be at least 1".into()));
        }
        if let Some(f) = &raw.output.field_format {
            if f != "csv" && f != "bin" {
                push(Err(format!("output.field_format must be \"csv\" or \"bin\", got \"{f}\"")));
            }
        }
        let mut need_file = |key: &str, value: &Option<String>, required: bool| match value {
            Some(p) if !self.resolve_path(p).is_file() => push(Err(format!("{key}: file {p} does not exist"))),
            None if required => push(Err(format!("{key} is required for `{}`", self.command.name()))),
            _ => {}
        };
        let f = &raw.fields;
        match self.command {
            Command::MaSolve => {
                need_file("fields.density", &f.density, false);
                need_file("fields.psi0", &f.psi0, false);
            }
            Command::Certify => need_file("fields.psi0", &f.psi0, false),
            Command::Glue => {
                need_file("fields.phi_s", &f.phi_s, true);
                need_file("fields.phi_b", &f.phi_b, true);
                need_file("fields.pole_mask", &f.pole_mask, true);
            }
            _ => {}
        }
        if let (Command::Degeneracy, Some(m)) = (self.command, &raw.map) {
            need_file("map.file", &m.file, false);
        }

        let class = |key: &str, m: &Option<Matrix>, required: bool| -> Result<Option<ConstantHermitianClass>, String> {
            match m {
                Some(m) => class_from_matrix(key, m).map(Some),
                None if required => Err(format!("{key} is required for `{}`", self.command.name())),
                None => Ok(None),
            }
        };
        let c = &raw.classes;
        let mut n = None;
        let mut collect = |r: Result<Option<ConstantHermitianClass>, String>, errors: &mut Vec<String>| match r {
            Ok(Some(cl)) => {
                if n.is_some_and(|n| n != cl.dim()) {
                    errors.push(format!("classes have inconsistent dimensions ({} vs {})", n.unwrap_or(0), cl.dim()));
                }
                n.get_or_insert(cl.dim());
                Some(cl)
            }
            Ok(None) => None,
            Err(e) => {
                errors.push(e);
                None
            }
        };
        match self.command {
            Command::Intersect => match &c.list {
                Some(list) if !list.is_empty() => {
                    for (i, m) in list.iter().enumerate() {
                        collect(class(&format!("classes.list[{i}]"), &Some(m.clone()), true), &mut errors);
                    }
                }
                _ => errors.push("classes.list must hold at least one matrix for `intersect`".into()),
            },
            Command::MaSolve => {
                if let Some(b) = collect(class("classes.background", &c.background, true), &mut errors) {
                    if !b.is_positive_definite() {
                        errors.push("classes.background must be positive definite".into());
                    }
                }
            }
            Command::Certify | Command::Pseff => {
                collect(class("classes.L", &c.l, true), &mut errors);
                if let Some(o) = collect(class("classes.omega", &c.omega, true), &mut errors) {
                    if let Err(e) = KahlerClass::new(o) {
                        errors.push(format!("classes.omega: {e}"));
                    }
                }
            }
            Command::AgSurface => {
                collect(class("classes.L", &c.l, false), &mut errors);
                if let Some(o) = collect(class("classes.omega", &c.omega, false), &mut errors) {
                    if let Err(e) = KahlerClass::new(o) {
                        errors.push(format!("classes.omega: {e}"));
                    }
                }
                match &raw.lattice {
                    None => errors.push("[lattice] is required for `ag-surface`".into()),
                    Some(lat) => {
                        if let Err(e) = lattice_from_section(lat) {
                            errors.push(e);
                        }
                        if lat.l.is_none() {
                            errors.push("lattice.L is required for `ag-surface`".into());
                        }
                    }
                }
            }
            Command::Glue => {
                collect(class("classes.H", &c.h, true), &mut errors);
                collect(class("classes.omega0", &c.omega0, false), &mut errors);
            }
            Command::Degeneracy => match &raw.map {
                None => errors.push("[map] is required for `degeneracy`".into()),
                Some(m) => {
                    if m.file.is_none() && m.text.is_none() {
                        errors.push("map.file or map.text is required".into());
                    }
                    if let Some(t) = &m.text {
                        match PolyMap::parse(t) {
                            Ok(f) => n = Some(f.n()),
                            Err(e) => errors.push(format!("map.text: {e}")),
                        }
                    }
                    if let Some(r) = m.radius {
                        if !(r >= 0.0) {
                            errors.push("map.radius must be nonnegative".into());
                        }
                    }
                    if m.points == Some(0) {
                        errors.push("map.points must be at least 1".into());
                    }
                }
            },
        }

        let grid = raw.torus.grid.unwrap_or(DEFAULT_GRID);
        if !grid.is_power_of_two() || grid < 8 {
            errors.push(format!("torus.grid must be a power of two ≥ 8, got {grid}"));
        } else if let Some(n) = n.filter(|_| self.command.uses_torus()) {
            if let Err(e) = self.torus_for(n) {
                errors.push(e);
            }
        }
        if let (Some(q), Some(n)) = (raw.solve.q, n) {
            if q >= n {
                errors.push(format!("solve.q = {q} must be below n = {n}"));
            }
        }
        errors
    }

    pub fn torus_for(&self, n: usize) -> Result<TorusModel, String> {
        let grid = self.raw.torus.grid.unwrap_or(DEFAULT_GRID);
        let result = match &self.raw.torus.active_axes {
            None => TorusModel::new(n, grid),
            Some(names) => {
                let mut axes = Vec::new();
                for a in names {
                    match Axis::parse(a) {
                        Some(ax) => axes.push(ax),
                        None => return Err(format!("torus.active_axes: `{a}` is not an axis name like x1 or y2")),
                    }
                }
                TorusModel::with_active_axes(n, grid, &axes)
            }
        };
        result.map_err(|e| format!("torus: {e}"))
    }

    pub fn class(&self, key: &str) -> Result<Option<ConstantHermitianClass>, String> {
        let c = &self.raw.classes;
        let m = match key {
            "L" => &c.l,
            "omega" => &c.omega,
            "background" => &c.background,
            "H" => &c.h,
            "omega0" => &c.omega0,
            _ => return Ok(None),
        };
        m.as_ref().map(|m| class_from_matrix(&format!("classes.{key}"), m)).transpose()
    }

    pub fn lattice(&self) -> Result<SurfaceLattice, String> {
        lattice_from_section(self.raw.lattice.as_ref().ok_or("[lattice] is required")?)
    }

    pub fn lattice_class(&self, key: &str) -> Result<Option<DivisorClass>, String> {
        let Some(lat) = &self.raw.lattice else { return Ok(None) };
        let v = match key {
            "L" => &lat.l,
            "omega_class" => &lat.omega_class,
            _ => return Ok(None),
        };
        v.as_ref().map(|v| divisor(&format!("lattice.{key}"), v)).transpose()
    }

    pub fn poly_map(&self) -> Result<PolyMap, String> {
        let m = self.raw.map.as_ref().ok_or("[map] is required")?;
        let text = match (&m.text, &m.file) {
            (Some(t), _) => t.clone(),
            (None, Some(f)) => std::fs::read_to_string(self.resolve_path(f)).map_err(|e| format!("map.file: {e}"))?,
            (None, None) => return Err("map.file or map.text is required".into()),
        };
        PolyMap::parse(&text).map_err(|e| format!("map: {e}"))
    }

    pub fn zero_threshold(&self) -> f64 {
        self.raw.map.as_ref().and_then(|m| m.threshold).unwrap_or(DEFAULT_ZERO_THRESHOLD)
    }

    /// Field files and map files the run reads, in a fixed order.
    pub fn referenced_files(&self) -> Vec<PathBuf> {
        let f = &self.raw.fields;
        let mut out: Vec<PathBuf> = [&f.psi0, &f.density, &f.phi_s, &f.phi_b, &f.pole_mask]
            .into_iter()
            .flatten()
            .map(|p| self.resolve_path(p))
            .collect();
        if let Some(file) = self.raw.map.as_ref().and_then(|m| m.file.as_ref()) {
            out.push(self.resolve_path(file));
        }
        out
    }
}

impl Command {
    fn uses_torus(self) -> bool {
        !matches!(self, Command::Intersect | Command::Degeneracy)
    }
}

fn positive(key: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{key} must be positive, got {v}"))
    }
}

pub fn class_from_matrix(key: &str, m: &Matrix) -> Result<ConstantHermitianClass, String> {
    let n = m.len();
    if n == 0 || m.iter().any(|row| row.len() != n) {
        return Err(format!("{key}: matrix must be square and nonempty"));
    }
    let pairs: Vec<(f64, f64)> = m
        .iter()
        .flatten()
        .map(|e| match *e {
            Entry::Real(re) => (re, 0.0),
            Entry::Complex([re, im]) => (re, im),
        })
        .collect();
    ConstantHermitianClass::from_pairs(n, &pairs).map_err(|e| match e {
        qpos_core::Error::NotHermitian { row, col, deviation } => format!(
            "{key}: entry ({}, {}) is not the conjugate of entry ({}, {}) (off by {deviation:.3e})",
            row + 1,
            col + 1,
            col + 1,
            row + 1
        ),
        e => format!("{key}: {e}"),
    })
}

fn divisor(key: &str, v: &[RationalEntry]) -> Result<DivisorClass, String> {
    DivisorClass::parse(&v.iter().map(RationalEntry::text).collect::<Vec<_>>()).map_err(|e| format!("{key}: {e}"))
}

fn lattice_from_section(lat: &LatticeSection) -> Result<SurfaceLattice, String> {
    if let Some(model) = &lat.model {
        if lat.matrix.is_some() {
            return Err("lattice: give either `model` or `matrix`, not both".into());
        }
        return match model.as_str() {
            "p1xp1" => Ok(SurfaceLattice::p1_x_p1()),
            "f1" => Ok(SurfaceLattice::hirzebruch_f1()),
            other => Err(format!("lattice.model: unknown model `{other}` (known: p1xp1, f1)")),
        };
    }
    let (Some(q), Some(nef), Some(eff)) = (&lat.matrix, &lat.nef, &lat.effective) else {
        return Err("lattice needs `model`, or all of `matrix`, `nef`, `effective`".into());
    };
    let q = q
        .iter()
        .map(|row| divisor("lattice.matrix", row).map(|d| d.coeffs().to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let nef = nef.iter().map(|g| divisor("lattice.nef", g)).collect::<Result<Vec<_>, _>>()?;
    let eff = eff.iter().map(|g| divisor("lattice.effective", g)).collect::<Result<Vec<_>, _>>()?;
    SurfaceLattice::new(q, nef, eff).map_err(|e| format!("lattice: {e}"))
}
