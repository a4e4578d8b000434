//! Run configuration, result emission and the subcommand drivers.

use crate::bie::{build_mesh_with, MeshOptions};
use crate::geometry::{make_disk, make_kite, Curve, Partition, Point, TrigPoly};
use crate::optimize::{self, OptimizeConfig, OptimizeError, OptimizeTrace};
use crate::spectral::{sigma_min_scan, Derivative, ScanOptions};
use crate::validate;
use crate::zaremba::{solve_field, ZarembaError};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;
use toml::{Table, Value};

/// Environment variable that overrides the worker thread count.
pub const THREADS_ENV: &str = "ZAREMBA_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    EigScan,
    FieldGrid,
    ZarembaEval,
    Optimize,
    Validate,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::EigScan,
        Command::FieldGrid,
        Command::ZarembaEval,
        Command::Optimize,
        Command::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::EigScan => "eig-scan",
            Command::FieldGrid => "field-grid",
            Command::ZarembaEval => "zaremba-eval",
            Command::Optimize => "optimize",
            Command::Validate => "validate",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveSpec {
    Disk {
        radius: f64,
    },
    Kite,
    /// coefficients of a truncated trigonometric polynomial
    Trig(TrigPoly),
}

impl CurveSpec {
    pub fn try_build(&self) -> Result<Curve, String> {
        match self {
            CurveSpec::Disk { radius } => make_disk(*radius).map_err(|e| e.to_string()),
            CurveSpec::Kite => Ok(make_kite()),
            CurveSpec::Trig(shape) => Curve::new("trig", shape.clone()).map_err(|e| e.to_string()),
        }
    }

    pub fn build(&self) -> Curve {
        self.try_build().expect("curve validated")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub curve: CurveSpec,
    /// Neumann arcs as [center arclength, half-length]
    pub neumann_arcs: Vec<[f64; 2]>,
    pub pure_neumann: bool,
    pub k: f64,
    pub k_lo: f64,
    pub k_hi: f64,
    pub grid_step: f64,
    pub k_star: f64,
    pub c_tol: f64,
    pub eps0: f64,
    pub source: Point,
    pub receiver: Point,
    pub receivers: Vec<Point>,
    pub nodes_per_arc: usize,
    pub grading_order: u32,
    pub grid_resolution: usize,
    pub max_iterations: usize,
    pub contour_points: usize,
    pub polish_steps: usize,
    pub arcs: usize,
    /// "forward" or "central"
    pub derivative: String,
    pub derivative_step: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn defaults(command: Command) -> RunConfig {
        RunConfig {
            command,
            curve: CurveSpec::Disk { radius: 1.0 },
            neumann_arcs: Vec::new(),
            pure_neumann: false,
            k: 1.0,
            k_lo: 1.0,
            k_hi: 3.0,
            grid_step: 0.01,
            k_star: 1.0,
            c_tol: 1e-3,
            eps0: 0.1,
            source: [0.0, 0.0],
            receiver: [0.0, 0.5],
            receivers: Vec::new(),
            nodes_per_arc: 64,
            grading_order: 6,
            grid_resolution: 101,
            max_iterations: 200,
            contour_points: 32,
            polish_steps: 2,
            arcs: 1,
            derivative: "forward".into(),
            derivative_step: 0.01,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn mesh_options(&self) -> MeshOptions {
        MeshOptions {
            nodes_per_arc: self.nodes_per_arc,
            grading_order: self.grading_order,
        }
    }

    pub fn partition(&self) -> Partition {
        let curve = self.curve.build();
        if self.pure_neumann {
            return Partition::pure_neumann(curve);
        }
        let arcs: Vec<(f64, f64)> = self.neumann_arcs.iter().map(|a| (a[0], a[1])).collect();
        Partition::with_arcs(curve, &arcs).expect("arcs validated")
    }

    pub fn derivative_rule(&self) -> Derivative {
        if self.derivative == "central" {
            Derivative::Central(self.derivative_step)
        } else {
            Derivative::Forward(self.derivative_step)
        }
    }

    pub fn optimize_config(&self) -> OptimizeConfig {
        let mut c = OptimizeConfig::new(self.curve.build(), self.source, self.receiver, self.k_star, self.c_tol, self.eps0);
        c.mesh = self.mesh_options();
        c.max_iterations = self.max_iterations;
        c.contour_points = self.contour_points;
        c.derivative = self.derivative_rule();
        c.polish_steps = self.polish_steps;
        c.arcs = self.arcs;
        c.scan.grid_step = self.grid_step;
        c
    }

    /// Flat TOML document that parses back to the same configuration.
    pub fn to_toml(&self) -> String {
        let mut t = Table::new();
        let pt = |p: Point| Value::Array(vec![Value::Float(p[0]), Value::Float(p[1])]);
        t.insert("command".into(), Value::String(self.command.as_str().into()));
        match &self.curve {
            CurveSpec::Disk { radius } => {
                t.insert("curve".into(), Value::String("disk".into()));
                t.insert("radius".into(), Value::Float(*radius));
            }
            CurveSpec::Kite => {
                t.insert("curve".into(), Value::String("kite".into()));
            }
            CurveSpec::Trig(shape) => {
                t.insert("curve".into(), Value::String("trig".into()));
                let arr = |v: &Vec<f64>| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
                t.insert("x_cos".into(), arr(&shape.x_cos));
                t.insert("x_sin".into(), arr(&shape.x_sin));
                t.insert("y_cos".into(), arr(&shape.y_cos));
                t.insert("y_sin".into(), arr(&shape.y_sin));
            }
        }
        t.insert(
            "neumann_arcs".into(),
            Value::Array(self.neumann_arcs.iter().map(|a| pt(*a)).collect()),
        );
        t.insert("pure_neumann".into(), Value::Boolean(self.pure_neumann));
        for (key, v) in [
            ("k", self.k),
            ("k_lo", self.k_lo),
            ("k_hi", self.k_hi),
            ("grid_step", self.grid_step),
            ("k_star", self.k_star),
            ("c_tol", self.c_tol),
            ("eps0", self.eps0),
            ("derivative_step", self.derivative_step),
        ] {
            t.insert(key.into(), Value::Float(v));
        }
        t.insert("source".into(), pt(self.source));
        t.insert("receiver".into(), pt(self.receiver));
        t.insert("receivers".into(), Value::Array(self.receivers.iter().map(|p| pt(*p)).collect()));
        for (key, v) in [
            ("nodes_per_arc", self.nodes_per_arc as i64),
            ("grading_order", self.grading_order as i64),
            ("grid_resolution", self.grid_resolution as i64),
            ("max_iterations", self.max_iterations as i64),
            ("contour_points", self.contour_points as i64),
            ("polish_steps", self.polish_steps as i64),
            ("arcs", self.arcs as i64),
        ] {
            t.insert(key.into(), Value::Integer(v));
        }
        t.insert("derivative".into(), Value::String(self.derivative.clone()));
        t.insert("output_dir".into(), Value::String(self.output_dir.to_string_lossy().into_owned()));
        t.to_string()
    }
}

/// All problems found in a configuration document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", .0.join("\n"))]
pub struct ConfigErrors(pub Vec<String>);

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_point(v: &Value) -> Option<Point> {
    match v {
        Value::Array(a) if a.len() == 2 => Some([as_float(&a[0])?, as_float(&a[1])?]),
        _ => None,
    }
}

fn as_points(v: &Value) -> Option<Vec<Point>> {
    match v {
        Value::Array(a) => a.iter().map(as_point).collect(),
        _ => None,
    }
}

fn as_floats(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::Array(a) => a.iter().map(as_float).collect(),
        _ => None,
    }
}

fn as_count(v: &Value) -> Option<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as usize),
        _ => None,
    }
}

/// Parses a flat TOML run configuration. `fallback` supplies the command
/// when the document has no `command` key.
pub fn parse_config(text: &str, fallback: Option<Command>) -> Result<RunConfig, ConfigErrors> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {}", e.message())]))?;
    let mut errs = Vec::new();
    let command = match table.get("command") {
        Some(Value::String(s)) => match Command::parse(s) {
            Some(c) => {
                if let Some(f) = fallback {
                    if f != c {
                        errs.push(format!("command: file says {s} but {} was requested", f.as_str()));
                    }
                }
                c
            }
            None => {
                errs.push(format!("command: unknown command {s:?}"));
                fallback.unwrap_or(Command::Validate)
            }
        },
        Some(_) => {
            errs.push("command: expected a string".into());
            fallback.unwrap_or(Command::Validate)
        }
        None => match fallback {
            Some(c) => c,
            None => {
                errs.push("command: missing".into());
                Command::Validate
            }
        },
    };
    let mut c = RunConfig::defaults(command);
    let mut curve_name = "disk".to_string();
    let mut radius = 1.0;
    let mut shape = TrigPoly {
        x_cos: Vec::new(),
        x_sin: Vec::new(),
        y_cos: Vec::new(),
        y_sin: Vec::new(),
    };
    let mut has_coefficients = false;
    for (key, v) in &table {
        let bad = |what: &str| format!("{key}: expected {what}");
        macro_rules! set {
            ($field:expr, $conv:expr, $what:expr) => {
                match $conv(v) {
                    Some(x) => $field = x,
                    None => errs.push(bad($what)),
                }
            };
        }
        match key.as_str() {
            "command" => {}
            "curve" => set!(curve_name, |v: &Value| v.as_str().map(String::from), "a string"),
            "radius" => set!(radius, as_float, "a number"),
            "x_cos" | "x_sin" | "y_cos" | "y_sin" => {
                has_coefficients = true;
                let field = match key.as_str() {
                    "x_cos" => &mut shape.x_cos,
                    "x_sin" => &mut shape.x_sin,
                    "y_cos" => &mut shape.y_cos,
                    _ => &mut shape.y_sin,
                };
                set!(*field, as_floats, "an array of numbers")
            }
            "neumann_arcs" => set!(c.neumann_arcs, as_points, "an array of [center, half_length] pairs"),
            "pure_neumann" => set!(c.pure_neumann, Value::as_bool, "a boolean"),
            "k" => set!(c.k, as_float, "a number"),
            "k_lo" => set!(c.k_lo, as_float, "a number"),
            "k_hi" => set!(c.k_hi, as_float, "a number"),
            "grid_step" => set!(c.grid_step, as_float, "a number"),
            "k_star" => set!(c.k_star, as_float, "a number"),
            "c_tol" => set!(c.c_tol, as_float, "a number"),
            "eps0" => set!(c.eps0, as_float, "a number"),
            "derivative_step" => set!(c.derivative_step, as_float, "a number"),
            "source" => set!(c.source, as_point, "an [x, y] pair"),
            "receiver" => set!(c.receiver, as_point, "an [x, y] pair"),
            "receivers" => set!(c.receivers, as_points, "an array of [x, y] pairs"),
            "nodes_per_arc" => set!(c.nodes_per_arc, as_count, "a non-negative integer"),
            "grading_order" => set!(c.grading_order, |v| as_count(v).map(|n| n as u32), "a non-negative integer"),
            "grid_resolution" => set!(c.grid_resolution, as_count, "a non-negative integer"),
            "max_iterations" => set!(c.max_iterations, as_count, "a non-negative integer"),
            "contour_points" => set!(c.contour_points, as_count, "a non-negative integer"),
            "polish_steps" => set!(c.polish_steps, as_count, "a non-negative integer"),
            "arcs" => set!(c.arcs, as_count, "a non-negative integer"),
            "derivative" => set!(c.derivative, |v: &Value| v.as_str().map(String::from), "a string"),
            "output_dir" => set!(c.output_dir, |v: &Value| v.as_str().map(PathBuf::from), "a string"),
            _ => errs.push(format!("{key}: unknown key")),
        }
    }
    match curve_name.as_str() {
        "disk" => c.curve = CurveSpec::Disk { radius },
        "kite" => c.curve = CurveSpec::Kite,
        "trig" => c.curve = CurveSpec::Trig(shape),
        other => errs.push(format!("curve: unknown curve {other:?} (disk, kite or trig)")),
    }
    if has_coefficients && curve_name != "trig" {
        errs.push("x_cos, x_sin, y_cos, y_sin: only valid with curve = \"trig\"".into());
    }
    errs.extend(range_violations(&c));
    if errs.is_empty() {
        Ok(c)
    } else {
        Err(ConfigErrors(errs))
    }
}

fn range_violations(c: &RunConfig) -> Vec<String> {
    let mut e = Vec::new();
    let mut positive = |name: &str, v: f64| {
        if !(v > 0.0 && v.is_finite()) {
            e.push(format!("{name}: must be positive, got {v}"));
        }
    };
    positive("k", c.k);
    positive("k_lo", c.k_lo);
    positive("k_hi", c.k_hi);
    positive("grid_step", c.grid_step);
    positive("k_star", c.k_star);
    positive("c_tol", c.c_tol);
    positive("eps0", c.eps0);
    positive("derivative_step", c.derivative_step);
    if c.k_hi <= c.k_lo {
        e.push(format!("k_hi: must exceed k_lo ({} <= {})", c.k_hi, c.k_lo));
    }
    if c.nodes_per_arc < 8 {
        e.push(format!("nodes_per_arc: must be at least 8, got {}", c.nodes_per_arc));
    }
    if c.grading_order < 2 {
        e.push(format!("grading_order: must be at least 2, got {}", c.grading_order));
    }
    if c.grid_resolution < 2 {
        e.push(format!("grid_resolution: must be at least 2, got {}", c.grid_resolution));
    }
    if c.contour_points < 4 {
        e.push(format!("contour_points: must be at least 4, got {}", c.contour_points));
    }
    if c.arcs < 1 {
        e.push("arcs: must be at least 1".into());
    }
    if c.max_iterations < 1 {
        e.push("max_iterations: must be at least 1".into());
    }
    if c.derivative != "forward" && c.derivative != "central" {
        e.push(format!("derivative: must be \"forward\" or \"central\", got {:?}", c.derivative));
    }
    if c.pure_neumann && !c.neumann_arcs.is_empty() {
        e.push("neumann_arcs: must be empty when pure_neumann is set".into());
    }
    match c.curve.try_build() {
        Err(msg) => e.push(format!("curve: {msg}")),
        Ok(curve) => {
            let len = curve.length();
            for (i, a) in c.neumann_arcs.iter().enumerate() {
                if !(a[1] > 0.0 && 2.0 * a[1] < len) {
                    e.push(format!("neumann_arcs[{i}]: half-length must lie in (0, {:.6})", len / 2.0));
                }
            }
            if c.eps0 > 0.0 && c.eps0 >= len / 20.0 {
                e.push(format!("eps0: must be below length/20 = {:.6}", len / 20.0));
            }
            let inside = |p: Point| curve.contains(p);
            if !inside(c.source) {
                e.push(format!("source: ({}, {}) is not inside the curve", c.source[0], c.source[1]));
            }
            if matches!(c.command, Command::Optimize | Command::ZarembaEval) && !inside(c.receiver) {
                e.push(format!("receiver: ({}, {}) is not inside the curve", c.receiver[0], c.receiver[1]));
            }
            for (i, p) in c.receivers.iter().enumerate() {
                if !inside(*p) {
                    e.push(format!("receivers[{i}]: ({}, {}) is not inside the curve", p[0], p[1]));
                }
            }
            if c.command == Command::Optimize && c.source == c.receiver {
                e.push("receiver: must differ from source".into());
            }
        }
    }
    e
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} propert(ies) failed")]
    Validation(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Validation(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ZarembaError> for CliError {
    fn from(e: ZarembaError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Comma-separated table with a header row.
pub fn emit_table(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::to_string)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_file(path, &String::from_utf8(bytes).expect("cells are UTF-8"))
}

/// Field sample on a plotting grid. mask: 1 evaluated, 0 outside the
/// curve, 2 inside but within the evaluation distance floor or at the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    pub x: f64,
    pub y: f64,
    pub re: f64,
    pub im: f64,
    pub mask: u8,
}

pub fn emit_grid(path: &Path, samples: &[GridSample]) -> Result<(), CliError> {
    let rows: Vec<Vec<Cell>> = samples
        .iter()
        .map(|s| {
            vec![
                Cell::Num(s.x),
                Cell::Num(s.y),
                Cell::Num(s.re),
                Cell::Num(s.im),
                Cell::Int(s.mask as i64),
            ]
        })
        .collect();
    emit_table(path, &["x", "y", "re_z", "im_z", "mask"], &rows)
}

/// Sets the global worker count from the environment, if requested.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second initialization only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Executes a configuration, writing results under `output_dir`. Returns a
/// short human-readable summary.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    match config.command {
        Command::EigScan => eig_scan(config),
        Command::FieldGrid => field_grid(config),
        Command::ZarembaEval => zaremba_eval(config),
        Command::Optimize => optimize_cmd(config),
        Command::Validate => validate_cmd(config),
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn eig_scan(c: &RunConfig) -> Result<String, CliError> {
    let mesh = build_mesh_with(&c.partition(), c.mesh_options()).map_err(numerical)?;
    let options = ScanOptions {
        grid_step: c.grid_step,
        ..ScanOptions::default()
    };
    let scan = sigma_min_scan(&mesh, c.k_lo, c.k_hi, options).map_err(numerical)?;
    let samples: Vec<Vec<Cell>> = scan.samples.iter().map(|(k, s)| vec![Cell::Num(*k), Cell::Num(*s)]).collect();
    emit_table(&c.output_dir.join("scan_samples.csv"), &["k", "sigma_min"], &samples)?;
    let values: Vec<Vec<Cell>> = scan
        .values
        .iter()
        .map(|v| {
            vec![
                Cell::Num(v.k),
                Cell::Int(v.multiplicity as i64),
                Cell::Num(v.sigma_min),
                Cell::Int(v.nodes as i64),
                Cell::Text(format!("{:016x}", v.fingerprint)),
            ]
        })
        .collect();
    emit_table(
        &c.output_dir.join("char_values.csv"),
        &["k", "multiplicity", "sigma_min", "nodes", "fingerprint"],
        &values,
    )?;
    let mut out = format!("{} characteristic value(s) in [{}, {}]\n", scan.values.len(), c.k_lo, c.k_hi);
    for v in &scan.values {
        let _ = writeln!(
            out,
            "  k = {:.10}  multiplicity {}  sigma_min {:.3e}",
            v.k, v.multiplicity, v.sigma_min
        );
    }
    Ok(out)
}

/// Samples Z(x_S, ·) on a square grid over the curve's bounding box.
pub fn sample_grid(c: &RunConfig) -> Result<Vec<GridSample>, CliError> {
    let partition = c.partition();
    let mesh = build_mesh_with(&partition, c.mesh_options()).map_err(numerical)?;
    let field = solve_field(&mesh, c.k, c.source)?;
    let curve = partition.curve();
    let n = c.grid_resolution;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for j in 0..512 {
        let p = curve.point(2.0 * std::f64::consts::PI * j as f64 / 512.0);
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let coord = |d: usize, i: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / (n - 1) as f64;
    Ok((0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = (coord(0, idx % n), coord(1, idx / n));
            if !curve.contains([x, y]) {
                return GridSample {
                    x,
                    y,
                    re: f64::NAN,
                    im: f64::NAN,
                    mask: 0,
                };
            }
            match field.eval_full([x, y]) {
                Ok(v) => GridSample {
                    x,
                    y,
                    re: v.re,
                    im: v.im,
                    mask: 1,
                },
                Err(_) => GridSample {
                    x,
                    y,
                    re: f64::NAN,
                    im: f64::NAN,
                    mask: 2,
                },
            }
        })
        .collect())
}

fn field_grid(c: &RunConfig) -> Result<String, CliError> {
    let samples = sample_grid(c)?;
    let path = c.output_dir.join("field_grid.csv");
    emit_grid(&path, &samples)?;
    let inside = samples.iter().filter(|s| s.mask == 1).count();
    Ok(format!(
        "{} grid points ({} evaluated) written to {}\n",
        samples.len(),
        inside,
        path.display()
    ))
}

fn zaremba_eval(c: &RunConfig) -> Result<String, CliError> {
    let mesh = build_mesh_with(&c.partition(), c.mesh_options()).map_err(numerical)?;
    let field = solve_field(&mesh, c.k, c.source)?;
    let receivers = if c.receivers.is_empty() {
        vec![c.receiver]
    } else {
        c.receivers.clone()
    };
    let mut rows = Vec::new();
    let mut out = String::new();
    for p in receivers {
        let v = field.eval_full(p)?;
        let _ = writeln!(out, "Z({:.4}, {:.4}) = {:.10e}  (imaginary part {:.3e})", p[0], p[1], v.re, v.im);
        rows.push(vec![Cell::Num(p[0]), Cell::Num(p[1]), Cell::Num(v.re), Cell::Num(v.im)]);
    }
    emit_table(&c.output_dir.join("zaremba_values.csv"), &["x", "y", "re_z", "im_z"], &rows)?;
    Ok(out)
}

/// Structured text report of an optimizer run.
pub fn report(c: &RunConfig, t: &OptimizeTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "curve            {}", c.curve.build().name());
    let _ = writeln!(s, "source           ({}, {})", c.source[0], c.source[1]);
    let _ = writeln!(s, "receiver         ({}, {})", c.receiver[0], c.receiver[1]);
    let _ = writeln!(s, "k_star           {}", c.k_star);
    if let Some(v) = &t.start {
        let _ = writeln!(s, "start            {:.10} (multiplicity {})", v.k, v.multiplicity);
    }
    for site in &t.sites {
        let _ = writeln!(
            s,
            "site             t = {:.6}  point ({:.6}, {:.6})",
            site.t, site.point[0], site.point[1]
        );
    }
    let _ = writeln!(s, "iterations       {}", t.records.len());
    let _ = writeln!(s, "k_final          {:.10}", t.k_final);
    let _ = writeln!(s, "z_dirichlet      {:e}", t.z_dirichlet);
    let _ = writeln!(s, "z_end            {:e}", t.z_end);
    let _ = writeln!(s, "z_end_imag       {:e}", t.z_end_imag);
    let _ = writeln!(s, "gain             {:e}", t.gain);
    let _ = writeln!(s, "theta_center/pi  {:.6}", t.theta_center / std::f64::consts::PI);
    let _ = writeln!(s, "center           ({:.6}, {:.6})", t.center_point[0], t.center_point[1]);
    let _ = writeln!(s, "l_n              {:.6}", t.l_n);
    let _ = writeln!(s, "l_n/pi           {:.6}", t.l_n / std::f64::consts::PI);
    s
}

fn optimize_cmd(c: &RunConfig) -> Result<String, CliError> {
    let trace = optimize::run(&c.optimize_config())?;
    let rows: Vec<Vec<Cell>> = trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                Cell::Int(i as i64),
                Cell::Text(format!("{:?}", r.phase).to_lowercase()),
                Cell::Num(r.eps),
                Cell::Num(r.neumann_length),
                Cell::Num(r.k.unwrap_or(f64::NAN)),
                Cell::Text(format!("{:?}", r.method).to_lowercase()),
                Cell::Text(format!("{:?}", r.outcome).to_lowercase()),
            ]
        })
        .collect();
    emit_table(
        &c.output_dir.join("iterations.csv"),
        &["step", "phase", "eps", "neumann_length", "k", "method", "outcome"],
        &rows,
    )?;
    let r = (c.receiver[0] - c.source[0]).hypot(c.receiver[1] - c.source[1]);
    emit_table(
        &c.output_dir.join("summary.csv"),
        &["r", "z_d", "z_end", "ratio", "theta_center", "l_n"],
        &[vec![
            Cell::Num(r),
            Cell::Num(trace.z_dirichlet),
            Cell::Num(trace.z_end),
            Cell::Num(trace.gain),
            Cell::Num(trace.theta_center),
            Cell::Num(trace.l_n),
        ]],
    )?;
    let text = report(c, &trace);
    write_file(&c.output_dir.join("report.txt"), &text)?;
    Ok(text)
}

fn validate_cmd(c: &RunConfig) -> Result<String, CliError> {
    let checks = validate::run_suite(c.nodes_per_arc);
    let mut out = String::new();
    let rows: Vec<Vec<Cell>> = checks
        .iter()
        .map(|ch| {
            let _ = writeln!(
                out,
                "{} {:<22} {:>7.2}s  {}",
                if ch.passed { "PASS" } else { "FAIL" },
                ch.name,
                ch.seconds,
                ch.detail
            );
            vec![
                Cell::Text(ch.name.into()),
                Cell::Int(ch.passed as i64),
                Cell::Num(ch.seconds),
                Cell::Text(ch.detail.clone()),
            ]
        })
        .collect();
    emit_table(&c.output_dir.join("validate.csv"), &["check", "passed", "seconds", "detail"], &rows)?;
    let failed = checks.iter().filter(|ch| !ch.passed).count();
    if failed > 0 {
        eprint!("{out}");
        return Err(CliError::Validation(failed));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("command = \"eig-scan\"\ncurve = \"disk\"\n", None).unwrap();
        assert_eq!(c.command, Command::EigScan);
        assert_eq!(c.nodes_per_arc, 64);
        assert_eq!(c.grid_step, 0.01);
    }

    #[test]
    fn violations_are_itemized() {
        let e = parse_config("command = \"optimize\"\nc_tol = -1.0\nnodes = 3\nk_lo = 5\nk_hi = 2\n", None).unwrap_err();
        assert_eq!(e.0.len(), 3, "{:?}", e.0);
        assert!(e.0.iter().any(|m| m.starts_with("c_tol")));
        assert!(e.0.iter().any(|m| m.starts_with("nodes: unknown key")));
        assert!(e.0.iter().any(|m| m.starts_with("k_hi")));
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::defaults(Command::Optimize);
        c.curve = CurveSpec::Kite;
        c.k_star = 1.5;
        c.c_tol = 1e-2;
        c.eps0 = 0.05;
        c.source = [-1.25, 1.25];
        c.receiver = [-1.25, -1.25];
        c.neumann_arcs = vec![[1.0, 0.1]];
        c.receivers = vec![[0.1, 0.2]];
        let back = parse_config(&c.to_toml(), None).unwrap();
        assert_eq!(back, c);

        // an ellipse given by coefficients
        c.curve = CurveSpec::Trig(TrigPoly {
            x_cos: vec![0.0, 2.0],
            x_sin: vec![],
            y_cos: vec![],
            y_sin: vec![0.0, 1.5],
        });
        c.command = Command::ZarembaEval;
        c.source = [0.3, 0.1];
        c.receiver = [-0.4, 0.2];
        let back = parse_config(&c.to_toml(), None).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn coefficient_curve_checks() {
        let e = parse_config("command = \"eig-scan\"\ncurve = \"trig\"\nx_cos = [0.0]\n", None).unwrap_err();
        assert!(e.0.iter().any(|m| m.starts_with("curve:")), "{:?}", e.0);
        let e = parse_config("command = \"eig-scan\"\nx_cos = [0.0, 1.0]\n", None).unwrap_err();
        assert!(e.0.iter().any(|m| m.contains("only valid")), "{:?}", e.0);
    }

    #[test]
    fn command_mismatch() {
        assert!(parse_config("command = \"optimize\"", Some(Command::EigScan)).is_err());
        assert_eq!(parse_config("", Some(Command::Validate)).unwrap().command, Command::Validate);
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        emit_table(&p, &["a", "b"], &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n");
    }
}
