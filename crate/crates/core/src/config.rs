//! Run configuration: a TOML document with the sections `grid`, `core`, `omega0`, `media`,
//! `solver`, `time`, `rescale`, `study` and `output`.
//!
//! Parsing collects every problem (unknown key, wrong type, missing key, violated constraint)
//! with its dotted key path instead of stopping at the first one.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;
use toml::{Table, Value};

use crate::geometry::{make_grid, GeometryError, GridProblem, InitialProfile};
use crate::media::{LatentHeatField, MediaError, MediumKind};
use crate::obstacle::{Relaxation, RunSchedule, SolverParams, SweepOrdering};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigIssue {
    Syntax(String),
    UnknownKey(String),
    MissingKey(String),
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: String,
    },
    Constraint {
        keys: Vec<String>,
        message: String,
    },
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigIssue::Syntax(m) => write!(f, "syntax error: {m}"),
            ConfigIssue::UnknownKey(k) => write!(f, "{k}: unknown key"),
            ConfigIssue::MissingKey(k) => write!(f, "{k}: missing required key"),
            ConfigIssue::TypeMismatch {
                key,
                expected,
                found,
            } => write!(f, "{key}: expected {expected}, found {found}"),
            ConfigIssue::Constraint { keys, message } => {
                write!(f, "{}: {message}", keys.join(", "))
            }
        }
    }
}

/// All problems found in one configuration document.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaSetting {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub dimension: usize,
    pub h: f64,
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreSection {
    pub radius: f64,
    pub datum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Omega0Section {
    pub radius: f64,
    pub profile: InitialProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediaSection {
    pub kind: MediumKind,
    pub lower: f64,
    pub upper: f64,
    pub period: f64,
    pub seed: Option<u64>,
    pub mollify: bool,
    /// Midpoint samples per cell and axis when averaging a mollified field.
    pub average_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub omega: OmegaSetting,
    pub tol: f64,
    pub max_iterations: Option<usize>,
    pub ordering: SweepOrdering,
    pub parallel: bool,
    pub window_margin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: f64,
    pub snapshots: Vec<f64>,
    pub guard_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaleSection {
    /// When set, `run` also writes rescaled snapshots for this `λ`.
    pub lambda: Option<f64>,
    pub target_h: f64,
    pub target_extent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySection {
    pub lambdas: Vec<f64>,
    pub rescaled_times: Vec<f64>,
    pub annulus_inner: f64,
    pub annulus_outer: f64,
    pub rescaled_dt: f64,
    /// Half-width of the simulation box in rescaled units; derived from the front when unset.
    pub box_extent: Option<f64>,
    /// Multipliers of the reference amplitude also compared against (amplitude discrimination).
    pub amplitude_probes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub write_dumps: bool,
    pub write_fronts: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schema_version: i64,
    pub grid: GridSection,
    pub core: CoreSection,
    pub omega0: Omega0Section,
    pub media: MediaSection,
    pub solver: SolverSection,
    pub time: TimeSection,
    pub rescale: RescaleSection,
    pub study: StudySection,
    pub output: OutputSection,
}

const KNOWN_KEYS: &[&str] = &[
    "schema_version",
    "grid.dimension",
    "grid.h",
    "grid.extent",
    "core.radius",
    "core.datum",
    "omega0.radius",
    "omega0.profile",
    "media.kind",
    "media.lower",
    "media.upper",
    "media.period",
    "media.seed",
    "media.mollify",
    "media.average_samples",
    "solver.omega",
    "solver.tol",
    "solver.max_iterations",
    "solver.ordering",
    "solver.parallel",
    "solver.window_margin",
    "time.t_end",
    "time.dt",
    "time.snapshots",
    "time.guard_cells",
    "rescale.lambda",
    "rescale.target_h",
    "rescale.target_extent",
    "study.lambdas",
    "study.rescaled_times",
    "study.annulus_inner",
    "study.annulus_outer",
    "study.rescaled_dt",
    "study.box_extent",
    "study.amplitude_probes",
    "output.dir",
    "output.write_dumps",
    "output.write_fronts",
];

fn type_name(v: &Value) -> String {
    v.type_str().to_string()
}

struct Reader<'a> {
    root: &'a Table,
    issues: Vec<ConfigIssue>,
}

impl<'a> Reader<'a> {
    fn lookup(&self, path: &str) -> Option<&'a Value> {
        let mut table = self.root;
        let mut parts = path.split('.').peekable();
        while let Some(part) = parts.next() {
            let v = table.get(part)?;
            if parts.peek().is_none() {
                return Some(v);
            }
            table = v.as_table()?;
        }
        None
    }

    fn mismatch(&mut self, key: &str, expected: &'static str, v: &Value) {
        self.issues.push(ConfigIssue::TypeMismatch {
            key: key.to_string(),
            expected,
            found: type_name(v),
        });
    }

    fn missing(&mut self, key: &str) {
        self.issues.push(ConfigIssue::MissingKey(key.to_string()));
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        match self.lookup(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.mismatch(key, "number", other);
                None
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        if self.lookup(key).is_none() {
            return default;
        }
        self.opt_f64(key).unwrap_or(f64::NAN)
    }

    fn req_f64(&mut self, key: &str) -> f64 {
        if self.lookup(key).is_none() {
            self.missing(key);
            return f64::NAN;
        }
        self.opt_f64(key).unwrap_or(f64::NAN)
    }

    fn opt_int(&mut self, key: &str) -> Option<i64> {
        match self.lookup(key)? {
            Value::Integer(i) => Some(*i),
            other => {
                self.mismatch(key, "integer", other);
                None
            }
        }
    }

    fn opt_usize(&mut self, key: &str) -> Option<usize> {
        let i = self.opt_int(key)?;
        if i < 0 {
            self.constraint(&[key], "must be non-negative");
            return None;
        }
        Some(i as usize)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> usize {
        self.opt_usize(key).unwrap_or(default)
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.lookup(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(other) => {
                self.mismatch(key, "boolean", other);
                default
            }
        }
    }

    fn opt_str(&mut self, key: &str) -> Option<&'a str> {
        match self.lookup(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.mismatch(key, "string", other);
                None
            }
        }
    }

    fn f64_list_or(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.lookup(key) {
            None => default.to_vec(),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.mismatch(key, "array of numbers", other);
                            return default.to_vec();
                        }
                    }
                }
                out
            }
            Some(other) => {
                self.mismatch(key, "array of numbers", other);
                default.to_vec()
            }
        }
    }

    fn constraint(&mut self, keys: &[&str], message: &str) {
        self.issues.push(ConfigIssue::Constraint {
            keys: keys.iter().map(|k| k.to_string()).collect(),
            message: message.to_string(),
        });
    }

    fn check(&mut self, ok: bool, keys: &[&str], message: &str) {
        if !ok {
            self.constraint(keys, message);
        }
    }
}

fn unknown_keys(root: &Table, issues: &mut Vec<ConfigIssue>) {
    let known: BTreeSet<&str> = KNOWN_KEYS.iter().copied().collect();
    let sections: BTreeSet<&str> = KNOWN_KEYS
        .iter()
        .filter_map(|k| k.split_once('.').map(|(s, _)| s))
        .collect();
    for (key, value) in root {
        if sections.contains(key.as_str()) {
            match value.as_table() {
                Some(t) => {
                    for sub in t.keys() {
                        let path = format!("{key}.{sub}");
                        if !known.contains(path.as_str()) {
                            issues.push(ConfigIssue::UnknownKey(path));
                        }
                    }
                }
                None => issues.push(ConfigIssue::TypeMismatch {
                    key: key.clone(),
                    expected: "table",
                    found: type_name(value),
                }),
            }
        } else if !known.contains(key.as_str()) {
            issues.push(ConfigIssue::UnknownKey(key.clone()));
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Like [`parse_config`], with `key.path=value` overrides applied first (overrides win).
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        issues: vec![ConfigIssue::Syntax(e.to_string())],
    })?;
    let mut issues = Vec::new();
    for o in overrides {
        if let Err(issue) = apply_override(&mut root, o) {
            issues.push(issue);
        }
    }
    unknown_keys(&root, &mut issues);
    let mut r = Reader {
        root: &root,
        issues,
    };
    let cfg = read(&mut r);
    if r.issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { issues: r.issues })
    }
}

/// Sets `key.path` to `value`, which is read as a TOML value and falls back to a bare string.
pub fn apply_override(root: &mut Table, assignment: &str) -> Result<(), ConfigIssue> {
    let Some((path, raw)) = assignment.split_once('=') else {
        return Err(ConfigIssue::Syntax(format!(
            "override `{assignment}` is not of the form key.path=value"
        )));
    };
    let path = path.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigIssue::Syntax(format!("override `{assignment}` has an empty key")))?;
    let mut table = root;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigIssue::TypeMismatch {
                key: part.to_string(),
                expected: "table",
                found: "scalar".to_string(),
            })?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}

fn read(r: &mut Reader<'_>) -> RunConfig {
    let schema_version = r.opt_int("schema_version").unwrap_or(SCHEMA_VERSION);
    r.check(
        schema_version == SCHEMA_VERSION,
        &["schema_version"],
        &format!("unsupported schema version (this build reads {SCHEMA_VERSION})"),
    );

    let dimension = match r.opt_usize("grid.dimension") {
        Some(d) => d,
        None => {
            if r.lookup("grid.dimension").is_none() {
                r.missing("grid.dimension");
            }
            2
        }
    };
    let grid = GridSection {
        dimension,
        h: r.req_f64("grid.h"),
        extent: r.req_f64("grid.extent"),
    };
    r.check(
        dimension == 2 || dimension == 3,
        &["grid.dimension"],
        "must be 2 or 3",
    );
    r.check(grid.h > 0.0, &["grid.h"], "must be positive");
    r.check(grid.extent > 0.0, &["grid.extent"], "must be positive");

    let core = CoreSection {
        radius: r.req_f64("core.radius"),
        datum: r.f64_or("core.datum", 1.0),
    };
    r.check(core.radius > 0.0, &["core.radius"], "must be positive");
    r.check(core.datum > 0.0, &["core.datum"], "must be positive");

    let profile = match r.opt_str("omega0.profile") {
        None => InitialProfile::Linear,
        Some(s) => InitialProfile::parse(s).unwrap_or_else(|| {
            r.constraint(&["omega0.profile"], "must be \"linear\" or \"cubic\"");
            InitialProfile::Linear
        }),
    };
    let omega0 = Omega0Section {
        radius: r.req_f64("omega0.radius"),
        profile,
    };
    r.check(
        !(core.radius >= omega0.radius),
        &["core.radius", "omega0.radius"],
        "core.radius must be smaller than omega0.radius",
    );
    r.check(
        !(omega0.radius >= grid.extent),
        &["omega0.radius", "grid.extent"],
        "omega0.radius must be smaller than grid.extent",
    );
    r.check(
        !((omega0.radius - core.radius) / grid.h < 4.0 - 1e-9),
        &["omega0.radius", "core.radius", "grid.h"],
        "the initial annulus must span at least 4 cells",
    );

    let kind = match r.opt_str("media.kind") {
        None => MediumKind::Constant,
        Some(s) => MediumKind::parse(s).unwrap_or_else(|| {
            r.constraint(
                &["media.kind"],
                "must be \"constant\", \"periodic-checkerboard\" or \"random-checkerboard\"",
            );
            MediumKind::Constant
        }),
    };
    let lower = r.f64_or("media.lower", 1.0);
    let upper = r.f64_or("media.upper", lower);
    let seed = match r.opt_int("media.seed") {
        Some(s) if s >= 0 => Some(s as u64),
        Some(_) => {
            r.constraint(&["media.seed"], "must be non-negative");
            None
        }
        None => None,
    };
    let media = MediaSection {
        kind,
        lower,
        upper,
        period: r.f64_or("media.period", 1.0),
        seed,
        mollify: r.bool_or("media.mollify", false),
        average_samples: r.usize_or("media.average_samples", 16),
    };
    r.check(media.lower > 0.0, &["media.lower"], "must be positive");
    r.check(
        !(media.lower > media.upper),
        &["media.lower", "media.upper"],
        "media.lower must not exceed media.upper",
    );
    r.check(media.period > 0.0, &["media.period"], "must be positive");
    r.check(
        media.average_samples >= 1,
        &["media.average_samples"],
        "must be at least 1",
    );
    if kind == MediumKind::RandomCheckerboard && r.lookup("media.seed").is_none() {
        r.missing("media.seed");
    }

    let omega = match r.lookup("solver.omega") {
        None => OmegaSetting::Fixed(1.5),
        Some(Value::String(s)) if s == "auto" => OmegaSetting::Auto,
        Some(Value::Float(x)) => OmegaSetting::Fixed(*x),
        Some(Value::Integer(i)) => OmegaSetting::Fixed(*i as f64),
        Some(other) => {
            r.mismatch("solver.omega", "number or \"auto\"", other);
            OmegaSetting::Auto
        }
    };
    if let OmegaSetting::Fixed(w) = omega {
        r.check(w > 0.0 && w < 2.0, &["solver.omega"], "must lie in (0, 2)");
    }
    let ordering = match r.opt_str("solver.ordering") {
        None | Some("lexicographic") => SweepOrdering::Lexicographic,
        Some("red-black") => SweepOrdering::RedBlack,
        Some(_) => {
            r.constraint(
                &["solver.ordering"],
                "must be \"lexicographic\" or \"red-black\"",
            );
            SweepOrdering::Lexicographic
        }
    };
    let solver = SolverSection {
        omega,
        tol: r.f64_or("solver.tol", 1e-10),
        max_iterations: r.opt_usize("solver.max_iterations"),
        ordering,
        parallel: r.bool_or("solver.parallel", false),
        window_margin: r.usize_or("solver.window_margin", 4),
    };
    r.check(solver.tol > 0.0, &["solver.tol"], "must be positive");
    r.check(
        solver.window_margin >= 1,
        &["solver.window_margin"],
        "must be at least 1",
    );
    r.check(
        !(solver.parallel && solver.ordering == SweepOrdering::Lexicographic),
        &["solver.parallel", "solver.ordering"],
        "parallel sweeps require red-black ordering",
    );

    let t_end = r.req_f64("time.t_end");
    let time = TimeSection {
        t_end,
        dt: r.req_f64("time.dt"),
        snapshots: r.f64_list_or("time.snapshots", &[t_end]),
        guard_cells: r.usize_or("time.guard_cells", 4),
    };
    r.check(time.t_end > 0.0, &["time.t_end"], "must be positive");
    r.check(time.dt > 0.0, &["time.dt"], "must be positive");
    r.check(
        time.snapshots
            .iter()
            .all(|&s| s >= 0.0 && !(s > time.t_end * (1.0 + 1e-12))),
        &["time.snapshots", "time.t_end"],
        "snapshot times must lie in [0, time.t_end]",
    );

    let rescale = RescaleSection {
        lambda: r.opt_f64("rescale.lambda"),
        target_h: r.f64_or("rescale.target_h", 1.0 / 128.0),
        target_extent: r.f64_or("rescale.target_extent", 1.0),
    };
    if let Some(l) = rescale.lambda {
        let min = if dimension == 2 {
            std::f64::consts::E
        } else {
            1.0
        };
        r.check(
            l > min || (dimension != 2 && l == 1.0),
            &["rescale.lambda", "grid.dimension"],
            "lambda must be >= 1 (n >= 3) or > e (n = 2)",
        );
    }
    r.check(
        rescale.target_h > 0.0,
        &["rescale.target_h"],
        "must be positive",
    );
    r.check(
        rescale.target_extent > 0.0,
        &["rescale.target_extent"],
        "must be positive",
    );

    let study = StudySection {
        lambdas: r.f64_list_or("study.lambdas", &[1e2, 1e3, 1e4]),
        rescaled_times: r.f64_list_or("study.rescaled_times", &[0.5, 1.0]),
        annulus_inner: r.f64_or("study.annulus_inner", 0.25),
        annulus_outer: r.f64_or("study.annulus_outer", 1.0),
        rescaled_dt: r.f64_or("study.rescaled_dt", 1.0 / 64.0),
        box_extent: r.opt_f64("study.box_extent"),
        amplitude_probes: r.f64_list_or("study.amplitude_probes", &[]),
    };
    r.check(
        study.lambdas.windows(2).all(|w| w[0] < w[1]) && !study.lambdas.is_empty(),
        &["study.lambdas"],
        "must be a non-empty strictly increasing list",
    );
    let min_lambda = if dimension == 2 {
        std::f64::consts::E
    } else {
        1.0
    };
    r.check(
        study.lambdas.iter().all(|&l| l >= min_lambda),
        &["study.lambdas", "grid.dimension"],
        "lambdas must be >= 1 (n >= 3) or > e (n = 2)",
    );
    r.check(
        !study.rescaled_times.is_empty() && study.rescaled_times.iter().all(|&t| t > 0.0),
        &["study.rescaled_times"],
        "must be a non-empty list of positive times",
    );
    r.check(
        study.annulus_inner > 0.0 && study.annulus_inner < study.annulus_outer,
        &["study.annulus_inner", "study.annulus_outer"],
        "need 0 < study.annulus_inner < study.annulus_outer",
    );
    r.check(
        study.rescaled_dt > 0.0,
        &["study.rescaled_dt"],
        "must be positive",
    );
    if let Some(b) = study.box_extent {
        r.check(
            b > study.annulus_outer,
            &["study.box_extent", "study.annulus_outer"],
            "the box must contain the evaluation annulus",
        );
    }
    r.check(
        study.amplitude_probes.iter().all(|&p| p > 0.0),
        &["study.amplitude_probes"],
        "must be positive",
    );

    let dir = match r.opt_str("output.dir") {
        Some(s) => PathBuf::from(s),
        None => PathBuf::from("out"),
    };
    let output = OutputSection {
        dir,
        write_dumps: r.bool_or("output.write_dumps", true),
        write_fronts: r.bool_or("output.write_fronts", true),
    };

    RunConfig {
        schema_version,
        grid,
        core,
        omega0,
        media,
        solver,
        time,
        rescale,
        study,
        output,
    }
}

fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

/// Renders the full effective configuration; `parse_config(render_config(c)) == c`.
pub fn render_config(c: &RunConfig) -> String {
    let mut root = Table::new();
    root.insert("schema_version".into(), Value::Integer(c.schema_version));
    let mut sec = |name: &str, entries: Vec<(&str, Value)>| {
        let t: Table = entries
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        root.insert(name.to_string(), Value::Table(t));
    };
    sec(
        "grid",
        vec![
            ("dimension", Value::Integer(c.grid.dimension as i64)),
            ("h", Value::Float(c.grid.h)),
            ("extent", Value::Float(c.grid.extent)),
        ],
    );
    sec(
        "core",
        vec![
            ("radius", Value::Float(c.core.radius)),
            ("datum", Value::Float(c.core.datum)),
        ],
    );
    sec(
        "omega0",
        vec![
            ("radius", Value::Float(c.omega0.radius)),
            ("profile", Value::String(c.omega0.profile.name().into())),
        ],
    );
    let mut media = vec![
        ("kind", Value::String(c.media.kind.name().into())),
        ("lower", Value::Float(c.media.lower)),
        ("upper", Value::Float(c.media.upper)),
        ("period", Value::Float(c.media.period)),
        ("mollify", Value::Boolean(c.media.mollify)),
        (
            "average_samples",
            Value::Integer(c.media.average_samples as i64),
        ),
    ];
    if let Some(s) = c.media.seed {
        media.push(("seed", Value::Integer(s as i64)));
    }
    sec("media", media);
    let mut solver = vec![
        (
            "omega",
            match c.solver.omega {
                OmegaSetting::Auto => Value::String("auto".into()),
                OmegaSetting::Fixed(w) => Value::Float(w),
            },
        ),
        ("tol", Value::Float(c.solver.tol)),
        (
            "ordering",
            Value::String(
                match c.solver.ordering {
                    SweepOrdering::Lexicographic => "lexicographic",
                    SweepOrdering::RedBlack => "red-black",
                }
                .into(),
            ),
        ),
        ("parallel", Value::Boolean(c.solver.parallel)),
        (
            "window_margin",
            Value::Integer(c.solver.window_margin as i64),
        ),
    ];
    if let Some(m) = c.solver.max_iterations {
        solver.push(("max_iterations", Value::Integer(m as i64)));
    }
    sec("solver", solver);
    sec(
        "time",
        vec![
            ("t_end", Value::Float(c.time.t_end)),
            ("dt", Value::Float(c.time.dt)),
            ("snapshots", floats(&c.time.snapshots)),
            ("guard_cells", Value::Integer(c.time.guard_cells as i64)),
        ],
    );
    let mut rescale = vec![
        ("target_h", Value::Float(c.rescale.target_h)),
        ("target_extent", Value::Float(c.rescale.target_extent)),
    ];
    if let Some(l) = c.rescale.lambda {
        rescale.push(("lambda", Value::Float(l)));
    }
    sec("rescale", rescale);
    let mut study = vec![
        ("lambdas", floats(&c.study.lambdas)),
        ("rescaled_times", floats(&c.study.rescaled_times)),
        ("annulus_inner", Value::Float(c.study.annulus_inner)),
        ("annulus_outer", Value::Float(c.study.annulus_outer)),
        ("rescaled_dt", Value::Float(c.study.rescaled_dt)),
        ("amplitude_probes", floats(&c.study.amplitude_probes)),
    ];
    if let Some(b) = c.study.box_extent {
        study.push(("box_extent", Value::Float(b)));
    }
    sec("study", study);
    sec(
        "output",
        vec![
            ("dir", Value::String(c.output.dir.to_string_lossy().into())),
            ("write_dumps", Value::Boolean(c.output.write_dumps)),
            ("write_fronts", Value::Boolean(c.output.write_fronts)),
        ],
    );
    toml::to_string(&root).expect("a table of plain values always serialises")
}

impl RunConfig {
    pub fn problem(&self) -> Result<GridProblem<f64>, GeometryError> {
        make_grid(
            self.grid.dimension,
            self.grid.h,
            self.grid.extent,
            self.core.radius,
            self.omega0.radius,
            self.core.datum,
            self.omega0.profile,
        )
    }

    pub fn field(&self) -> Result<LatentHeatField<f64>, MediaError> {
        let m = &self.media;
        Ok(LatentHeatField::new(
            m.kind,
            m.lower,
            m.upper,
            m.period,
            m.seed.unwrap_or(0),
            self.grid.dimension,
        )?
        .with_mollification(m.mollify))
    }

    pub fn solver_params(&self) -> SolverParams<f64> {
        SolverParams {
            relaxation: match self.solver.omega {
                OmegaSetting::Auto => Relaxation::Auto,
                OmegaSetting::Fixed(w) => Relaxation::Fixed(w),
            },
            tol: self.solver.tol,
            max_iterations: self.solver.max_iterations,
            ordering: self.solver.ordering,
            parallel: self.solver.parallel,
            window_margin: self.solver.window_margin,
        }
    }

    pub fn schedule(&self) -> RunSchedule<f64> {
        RunSchedule {
            t_end: self.time.t_end,
            dt: self.time.dt,
            snapshots: self.time.snapshots.clone(),
            guard_cells: self.time.guard_cells,
        }
    }
}
