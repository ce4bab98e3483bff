//! Run configuration: JSON parsing with path-qualified errors, and the
//! canonical scenario description that feeds the identity hash.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use zermelo_core::solvers::{GridSpec, Locus, Scenario, SolverId, Target, Tolerances};
use zermelo_core::{ControlSet, CurrentField, Mat2, Vec2};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_owned(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetSpec {
    Disk { radius: f64 },
    Ellipse { r1: f64, r2: f64 },
    /// `u₁² + a²u₂² ≤ 1`.
    Elliptic { a: f64 },
    Egg { v0: f64, e: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CurrentSpec {
    Zero,
    Constant { b: [f64; 2] },
    /// `s(x) = D x + b`, `D` row-major.
    Affine { d: [[f64; 2]; 2], b: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSpec {
    Point([f64; 2]),
    Segment([[f64; 2]; 2]),
}

/// The physical problem. Serializing this value (sorted keys, shortest
/// round-trip floats) is the canonical form hashed into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub start: StartSpec,
    pub target: [f64; 2],
    pub target_radius: f64,
    pub set: SetSpec,
    pub current: CurrentSpec,
    pub horizon: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub scenario: ScenarioSpec,
    pub solvers: Vec<SolverId>,
    pub output_dir: Option<PathBuf>,
    pub plot: bool,
    pub seed: u64,
    pub grid: GridSpec,
}

pub const DEFAULT_TARGET_RADIUS: f64 = 1e-9;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::parse(&text, fallback)
    }

    pub fn parse(text: &str, fallback_name: &str) -> Result<Self, ConfigError> {
        let root: Value = serde_json::from_str(text)?;
        let root = object(&root, "config")?;
        only(root, "config", &["name", "description", "scenario", "solvers", "output_dir", "plot", "seed", "brute_force"])?;
        let name = match root.get("name") {
            None => fallback_name.to_owned(),
            Some(v) => v.as_str().ok_or_else(|| invalid("name", "expected a string"))?.to_owned(),
        };
        let scenario = parse_scenario(field(root, "config", "scenario")?, "scenario")?;
        let solvers = parse_solvers(field(root, "config", "solvers")?)?;
        let output_dir = match root.get("output_dir") {
            None => None,
            Some(v) => Some(PathBuf::from(v.as_str().ok_or_else(|| invalid("output_dir", "expected a string"))?)),
        };
        let plot = match root.get("plot") {
            None => true,
            Some(v) => v.as_bool().ok_or_else(|| invalid("plot", "expected true or false"))?,
        };
        let seed = match root.get("seed") {
            None => 0,
            Some(v) => v.as_u64().ok_or_else(|| invalid("seed", "expected a non-negative integer"))?,
        };
        let grid = match root.get("brute_force") {
            None => GridSpec::new(201, 201, 64, 5e-3),
            Some(v) => parse_grid(v, "brute_force")?,
        };
        Ok(Self { name, scenario, solvers, output_dir, plot, seed, grid })
    }

    pub fn to_scenario(&self) -> Scenario {
        self.scenario.build(&self.name)
    }
}

impl ScenarioSpec {
    pub fn build(&self, name: &str) -> Scenario {
        let v = |a: [f64; 2]| Vec2::new(a[0], a[1]);
        let start = match self.start {
            StartSpec::Point(p) => Locus::Point(v(p)),
            StartSpec::Segment([a, b]) => Locus::Segment(v(a), v(b)),
        };
        let set = self.set.build().expect("validated while parsing");
        let field = match self.current {
            CurrentSpec::Zero => CurrentField::zero(),
            CurrentSpec::Constant { b } => CurrentField::constant(v(b)),
            CurrentSpec::Affine { d, b } => CurrentField::affine(Mat2::new(d[0][0], d[0][1], d[1][0], d[1][1]), v(b)),
        };
        let target = Target { point: v(self.target), radius: self.target_radius };
        Scenario { name: name.to_owned(), start, target, set, field, horizon: self.horizon, tolerances: Tolerances::default() }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("plain data serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

impl SetSpec {
    fn build(&self) -> Result<ControlSet, zermelo_core::convex::ConvexError> {
        match *self {
            Self::Disk { radius } => ControlSet::disk(radius),
            Self::Ellipse { r1, r2 } => ControlSet::ellipse(r1, r2),
            Self::Elliptic { a } => ControlSet::elliptic(a),
            Self::Egg { v0, e } => ControlSet::egg(v0, e),
        }
    }
}

// ---------------------------------------------------------------------------
// parsing helpers

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ConfigError> {
    v.as_object().ok_or_else(|| invalid(path, "expected an object"))
}

/// Rejects keys outside `allowed`, so misspelt options do not pass silently.
fn only(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        None => Ok(()),
        Some(k) => {
            let full = if path == "config" { k.clone() } else { format!("{path}.{k}") };
            Err(invalid(&full, format!("unknown field; expected one of {}", allowed.join(", "))))
        }
    }
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, ConfigError> {
    let full = if path == "config" { key.to_owned() } else { format!("{path}.{key}") };
    obj.get(key).ok_or_else(|| invalid(&full, "missing required field"))
}

fn number(v: &Value, path: &str) -> Result<f64, ConfigError> {
    let x = v.as_f64().ok_or_else(|| invalid(path, "expected a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(path, "expected a finite number"))
    }
}

fn positive(v: &Value, path: &str) -> Result<f64, ConfigError> {
    let x = number(v, path)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(path, format!("expected a positive number, got {x}")))
    }
}

fn pair(v: &Value, path: &str) -> Result<[f64; 2], ConfigError> {
    match v.as_array().map(Vec::as_slice) {
        Some([a, b]) => Ok([number(a, &format!("{path}[0]"))?, number(b, &format!("{path}[1]"))?]),
        _ => Err(invalid(path, "expected [x, y]")),
    }
}

fn count(v: &Value, path: &str, min: u64) -> Result<usize, ConfigError> {
    match v.as_u64() {
        Some(n) if n >= min => Ok(n as usize),
        _ => Err(invalid(path, format!("expected an integer ≥ {min}"))),
    }
}

fn kind<'a>(obj: &'a Map<String, Value>, path: &str) -> Result<&'a str, ConfigError> {
    field(obj, path, "type")?.as_str().ok_or_else(|| invalid(&format!("{path}.type"), "expected a string"))
}

fn parse_scenario(v: &Value, path: &str) -> Result<ScenarioSpec, ConfigError> {
    let obj = object(v, path)?;
    only(obj, path, &["start", "target", "set", "current", "horizon"])?;
    let start = parse_start(field(obj, path, "start")?, &format!("{path}.start"))?;
    let tpath = format!("{path}.target");
    let target = object(field(obj, path, "target")?, &tpath)?;
    only(target, &tpath, &["point", "radius"])?;
    let target_point = pair(field(target, &tpath, "point")?, &format!("{tpath}.point"))?;
    let target_radius = match target.get("radius") {
        None => DEFAULT_TARGET_RADIUS,
        Some(r) => positive(r, &format!("{tpath}.radius"))?,
    };
    let set = parse_set(field(obj, path, "set")?, &format!("{path}.set"))?;
    let current = parse_current(field(obj, path, "current")?, &format!("{path}.current"))?;
    let horizon = positive(field(obj, path, "horizon")?, &format!("{path}.horizon"))?;
    let spec = ScenarioSpec { start, target: target_point, target_radius, set, current, horizon };
    let dist = match start {
        StartSpec::Point(p) => (p[0] - target_point[0]).hypot(p[1] - target_point[1]),
        StartSpec::Segment([a, b]) => segment_distance(a, b, target_point),
    };
    if dist <= target_radius {
        return Err(invalid(&tpath, "start and target must be disjoint"));
    }
    Ok(spec)
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (a, b, p) = (Vec2::new(a[0], a[1]), Vec2::new(b[0], b[1]), Vec2::new(p[0], p[1]));
    let ab = b - a;
    let tau = if ab.norm_sq() > 0.0 { ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * tau).distance(p)
}

fn parse_start(v: &Value, path: &str) -> Result<StartSpec, ConfigError> {
    let obj = object(v, path)?;
    match (obj.get("point"), obj.get("segment")) {
        (Some(p), None) => Ok(StartSpec::Point(pair(p, &format!("{path}.point"))?)),
        (None, Some(s)) => {
            let sp = format!("{path}.segment");
            match s.as_array().map(Vec::as_slice) {
                Some([a, b]) => {
                    let (a, b) = (pair(a, &format!("{sp}[0]"))?, pair(b, &format!("{sp}[1]"))?);
                    if a == b {
                        return Err(invalid(&sp, "segment endpoints coincide"));
                    }
                    Ok(StartSpec::Segment([a, b]))
                }
                _ => Err(invalid(&sp, "expected [[x, y], [x, y]]")),
            }
        }
        _ => Err(invalid(path, "expected exactly one of \"point\" or \"segment\"")),
    }
}

fn parse_set(v: &Value, path: &str) -> Result<SetSpec, ConfigError> {
    let obj = object(v, path)?;
    let num = |key: &str| positive(field(obj, path, key)?, &format!("{path}.{key}"));
    let kind = kind(obj, path)?;
    let params: &[&str] = match kind {
        "disk" => &["type", "radius"],
        "ellipse" => &["type", "r1", "r2"],
        "elliptic" => &["type", "a"],
        "egg" => &["type", "v0", "e"],
        _ => &["type"],
    };
    only(obj, path, params)?;
    let spec = match kind {
        "disk" => SetSpec::Disk { radius: num("radius")? },
        "ellipse" => SetSpec::Ellipse { r1: num("r1")?, r2: num("r2")? },
        "elliptic" => SetSpec::Elliptic { a: num("a")? },
        "egg" => SetSpec::Egg { v0: num("v0")?, e: number(field(obj, path, "e")?, &format!("{path}.e"))? },
        other => return Err(invalid(&format!("{path}.type"), format!("unknown set type {other:?}"))),
    };
    spec.build().map_err(|e| invalid(path, e.to_string()))?;
    Ok(spec)
}

fn parse_current(v: &Value, path: &str) -> Result<CurrentSpec, ConfigError> {
    let obj = object(v, path)?;
    let b = || match obj.get("b") {
        None => Ok([0.0, 0.0]),
        Some(b) => pair(b, &format!("{path}.b")),
    };
    let kind = kind(obj, path)?;
    let params: &[&str] = match kind {
        "affine" => &["type", "d", "b"],
        "constant" => &["type", "b"],
        _ => &["type"],
    };
    only(obj, path, params)?;
    match kind {
        "zero" => Ok(CurrentSpec::Zero),
        "constant" => Ok(CurrentSpec::Constant { b: b()? }),
        "affine" => {
            let dp = format!("{path}.d");
            let rows = field(obj, path, "d")?.as_array().map(Vec::as_slice);
            let d = match rows {
                Some([r0, r1]) => [pair(r0, &format!("{dp}[0]"))?, pair(r1, &format!("{dp}[1]"))?],
                _ => return Err(invalid(&dp, "expected [[d11, d12], [d21, d22]]")),
            };
            Ok(CurrentSpec::Affine { d, b: b()? })
        }
        other => Err(invalid(&format!("{path}.type"), format!("unknown current type {other:?}"))),
    }
}

fn parse_solvers(v: &Value) -> Result<Vec<SolverId>, ConfigError> {
    let list = v.as_array().ok_or_else(|| invalid("solvers", "expected a list of solver names"))?;
    if list.is_empty() {
        return Err(invalid("solvers", "at least one solver is required"));
    }
    let mut out = Vec::new();
    for (k, item) in list.iter().enumerate() {
        let path = format!("solvers[{k}]");
        let id = match item.as_str() {
            Some("shoot") => SolverId::Shoot,
            Some("constant") => SolverId::Constant,
            Some("analytic_example") => SolverId::AnalyticExample,
            Some("brute_force") => SolverId::BruteForce,
            _ => return Err(invalid(&path, "expected one of shoot, constant, analytic_example, brute_force")),
        };
        if out.contains(&id) {
            return Err(invalid(&path, format!("{} listed twice", id.as_str())));
        }
        out.push(id);
    }
    Ok(out)
}

fn parse_grid(v: &Value, path: &str) -> Result<GridSpec, ConfigError> {
    let obj = object(v, path)?;
    only(obj, path, &["nx", "ny", "n_controls", "dt"])?;
    let get = |key: &str, default: usize, min: u64| match obj.get(key) {
        None => Ok(default),
        Some(x) => count(x, &format!("{path}.{key}"), min),
    };
    let dt = match obj.get("dt") {
        None => 5e-3,
        Some(x) => positive(x, &format!("{path}.dt"))?,
    };
    Ok(GridSpec::new(get("nx", 201, 3)?, get("ny", 201, 3)?, get("n_controls", 64, 8)?, dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "scenario": {
            "start": {"point": [0, 0]},
            "target": {"point": [1, 0]},
            "set": {"type": "disk", "radius": 1},
            "current": {"type": "zero"},
            "horizon": 2
        },
        "solvers": ["shoot"]
    }"#;

    fn error_path(text: &str) -> String {
        match RunConfig::parse(text, "t") {
            Err(ConfigError::Invalid { path, .. }) => path,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_defaults() {
        let cfg = RunConfig::parse(MINIMAL, "fallback").unwrap();
        assert_eq!(cfg.name, "fallback");
        assert!(cfg.plot);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.scenario.target_radius, DEFAULT_TARGET_RADIUS);
        assert_eq!(cfg.grid.nx, 201);
    }

    #[test]
    fn missing_and_malformed_fields_are_named() {
        assert_eq!(error_path(&MINIMAL.replace(r#""set": {"type": "disk", "radius": 1},"#, "")), "scenario.set");
        assert_eq!(error_path(&MINIMAL.replace(r#""radius": 1"#, r#""radius": -1"#)), "scenario.set.radius");
        assert_eq!(error_path(&MINIMAL.replace(r#""zero""#, r#""swirl""#)), "scenario.current.type");
        assert_eq!(error_path(&MINIMAL.replace(r#"[1, 0]"#, r#"[1]"#)), "scenario.target.point");
        assert_eq!(error_path(&MINIMAL.replace(r#"["shoot"]"#, r#"[]"#)), "solvers");
        assert_eq!(error_path(&MINIMAL.replace(r#"["shoot"]"#, r#"["shoot", "warp"]"#)), "solvers[1]");
        assert_eq!(error_path(&MINIMAL.replace(r#"[1, 0]"#, r#"[0, 0]"#)), "scenario.target");
        assert_eq!(error_path(&MINIMAL.replace(r#""solvers""#, r#""solver""#)), "solver");
        assert_eq!(error_path(&MINIMAL.replace(r#""radius": 1"#, r#""radius": 1, "r2": 1"#)), "scenario.set.r2");
    }

    #[test]
    fn non_strictly_convex_egg_rejected() {
        let text = MINIMAL.replace(r#""type": "disk", "radius": 1"#, r#""type": "egg", "v0": 1, "e": 0.5"#);
        assert_eq!(error_path(&text), "scenario.set");
    }

    #[test]
    fn hash_ignores_number_spelling_but_not_values() {
        let a = RunConfig::parse(MINIMAL, "a").unwrap();
        let b = RunConfig::parse(&MINIMAL.replace(r#""horizon": 2"#, r#""horizon": 2.0"#), "b").unwrap();
        let c = RunConfig::parse(&MINIMAL.replace(r#""horizon": 2"#, r#""horizon": 3"#), "c").unwrap();
        assert_eq!(a.scenario.hash(), b.scenario.hash());
        assert_ne!(a.scenario.hash(), c.scenario.hash());
        assert_eq!(a.scenario.hash().len(), 64);
    }
}
