//! Line-oriented scenario files.
//!
//! ```text
//! name = gap-01
//! seed = 7
//!
//! [environment]
//! bounds = 0 -0.4 0  2.4 0.4 1.2
//! resolution = 0.02
//! blade = 1.2 1.26 0.1 0.4     # x0 x1 z0 z1, full y extent
//!
//! [robot]
//! units = 5
//! base = 0.05 0 0.6
//!
//! [start]
//! l = 0
//!
//! [goal]
//! position = 1.6 0 0.5
//! ```
//!
//! Blades may instead be given as a regular array with `rows`, `columns`,
//! `blade_width`, `blade_height`, `gap`, `column_pitch`, `first_column_x`,
//! `bottom_z` and optional `column_offsets`. Unset robot and start keys take
//! the defaults of [`RobotDefaults`]. An optional `[planner]` section
//! overrides planner parameters for this scenario.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use bladecrawl::env::{Blade, BladeArraySpec, Bounds, Environment, Interval};
use bladecrawl::robot::{is_valid_state, Configuration, RobotSpec};
use bladecrawl::search::{GoalPose, Problem};
use bladecrawl::{build_distance_field, build_environment, Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {field}: {msg}")]
    Parse { line: usize, field: String, msg: String },
    #[error("missing required field `{0}`")]
    Missing(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Geometry of the blade field: explicit blades or a regular array.
#[derive(Debug, Clone, PartialEq)]
pub enum BladeLayout {
    Explicit(Vec<[f64; 4]>),
    Array(BladeArraySpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub bounds: Bounds,
    pub layout: BladeLayout,
    pub resolution: f64,
    pub d_max: f64,
    pub robot: RobotSpec,
    pub start: Configuration,
    pub goal: GoalPose,
    /// Raw `[planner]` overrides, applied by the harness.
    pub planner: BTreeMap<String, String>,
}

/// Robot used when a scenario leaves fields unset.
pub struct RobotDefaults;

impl RobotDefaults {
    pub fn spec() -> RobotSpec {
        RobotSpec {
            num_units: 5,
            subunits_per_unit: 5,
            subunit_length: 0.04,
            body_radius: 0.015,
            pitch_limit: 0.35,
            yaw_limit: 0.35,
            prismatic_range: Interval::new(0.0, 0.8),
            base_position: Point3::new(0.05, 0.0, 0.6),
            base_forward: Vector3::x(),
        }
    }
}

impl Scenario {
    pub fn environment(&self) -> Result<Environment, ScenarioError> {
        let v = |e: bladecrawl::EnvError| ScenarioError::Validation(e.to_string());
        match &self.layout {
            BladeLayout::Array(spec) => build_environment(spec).map_err(v),
            BladeLayout::Explicit(list) => {
                let blades = list
                    .iter()
                    .map(|b| Blade::new(Interval::new(b[0], b[1]), self.bounds.axis(1), Interval::new(b[2], b[3])))
                    .collect();
                Environment::from_blades(self.bounds.clone(), blades).map_err(v)
            }
        }
    }

    /// Builds the planning problem and checks start validity and goal bounds.
    pub fn problem(&self) -> Result<Problem, ScenarioError> {
        let env = self.environment()?;
        let problem = Problem::new(
            env,
            self.robot.clone(),
            self.start.clone(),
            self.goal.clone(),
            self.resolution,
            self.d_max,
        )
        .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        if !problem.env.bounds().contains(&self.goal.position) {
            return Err(ScenarioError::Validation("goal lies outside the bounds".into()));
        }
        if !is_valid_state(&problem.spec, &problem.df, &problem.start) {
            return Err(ScenarioError::Validation("start configuration is in collision or out of limits".into()));
        }
        Ok(problem)
    }

    /// Checks the scenario without keeping the problem.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let env = self.environment()?;
        let df = build_distance_field(&env, self.resolution, self.d_max)
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        self.robot.validate().map_err(|e| ScenarioError::Validation(e.to_string()))?;
        self.start.check_dimension(&self.robot).map_err(|e| ScenarioError::Validation(e.to_string()))?;
        if !is_valid_state(&self.robot, &df, &self.start) {
            return Err(ScenarioError::Validation("start configuration is in collision or out of limits".into()));
        }
        if !env.bounds().contains(&self.goal.position) {
            return Err(ScenarioError::Validation("goal lies outside the bounds".into()));
        }
        Ok(())
    }

    /// Serializes to the text format; [`parse_scenario`] reads it back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let v3 = |p: &[f64]| p.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[environment]");
        let b = &self.bounds;
        let _ = writeln!(s, "bounds = {}  {}", v3(b.min.coords.as_slice()), v3(b.max.coords.as_slice()));
        let _ = writeln!(s, "resolution = {}", fmt_f(self.resolution));
        let _ = writeln!(s, "d_max = {}", fmt_f(self.d_max));
        match &self.layout {
            BladeLayout::Explicit(list) => {
                for bl in list {
                    let _ = writeln!(s, "blade = {}", v3(bl));
                }
            }
            BladeLayout::Array(a) => {
                let _ = writeln!(s, "rows = {}", a.rows);
                let _ = writeln!(s, "columns = {}", a.columns);
                let _ = writeln!(s, "blade_width = {}", fmt_f(a.blade_width));
                let _ = writeln!(s, "blade_height = {}", fmt_f(a.blade_height));
                let _ = writeln!(s, "gap = {}", fmt_f(a.gap));
                let _ = writeln!(s, "column_pitch = {}", fmt_f(a.column_pitch));
                let _ = writeln!(s, "first_column_x = {}", fmt_f(a.first_column_x));
                let _ = writeln!(s, "bottom_z = {}", fmt_f(a.bottom_z));
                if !a.column_offsets.is_empty() {
                    let _ = writeln!(s, "column_offsets = {}", v3(&a.column_offsets));
                }
            }
        }
        let r = &self.robot;
        let _ = writeln!(s, "\n[robot]");
        let _ = writeln!(s, "units = {}", r.num_units);
        let _ = writeln!(s, "subunits = {}", r.subunits_per_unit);
        let _ = writeln!(s, "subunit_length = {}", fmt_f(r.subunit_length));
        let _ = writeln!(s, "body_radius = {}", fmt_f(r.body_radius));
        let _ = writeln!(s, "pitch_limit = {}", fmt_f(r.pitch_limit));
        let _ = writeln!(s, "yaw_limit = {}", fmt_f(r.yaw_limit));
        let _ = writeln!(s, "prismatic = {} {}", fmt_f(r.prismatic_range.min), fmt_f(r.prismatic_range.max));
        let _ = writeln!(s, "base = {}", v3(r.base_position.coords.as_slice()));
        let _ = writeln!(s, "forward = {}", v3(r.base_forward.as_slice()));
        let _ = writeln!(s, "\n[start]");
        let _ = writeln!(s, "l = {}", fmt_f(self.start.l));
        let _ = writeln!(s, "pitch = {}", v3(&self.start.pitch));
        let _ = writeln!(s, "yaw = {}", v3(&self.start.yaw));
        let _ = writeln!(s, "\n[goal]");
        let _ = writeln!(s, "position = {}", v3(self.goal.position.coords.as_slice()));
        if let Some(a) = &self.goal.axis {
            let _ = writeln!(s, "axis = {}", v3(a.as_slice()));
        }
        if !self.planner.is_empty() {
            let _ = writeln!(s, "\n[planner]");
            for (k, v) in &self.planner {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }
}

/// Shortest decimal form that parses back to the same value.
pub fn fmt_f(x: f64) -> String {
    let s = format!("{x}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

struct Field {
    line: usize,
    value: String,
}

#[derive(Default)]
struct Section {
    fields: BTreeMap<String, Field>,
    blades: Vec<Field>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Field> {
        self.fields.remove(key)
    }
}

fn parse_err(line: usize, field: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, field: field.to_string(), msg: msg.into() }
}

fn floats(f: &Field, key: &str, n: Option<usize>) -> Result<Vec<f64>, ScenarioError> {
    let vals: Result<Vec<f64>, _> = f.value.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| parse_err(f.line, key, format!("expected numbers: {e}")))?;
    if let Some(n) = n {
        if vals.len() != n {
            return Err(parse_err(f.line, key, format!("expected {n} values, found {}", vals.len())));
        }
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(f.line, key, "values must be finite"));
    }
    Ok(vals)
}

fn float(sec: &mut Section, key: &str, default: Option<f64>) -> Result<f64, ScenarioError> {
    match sec.take(key) {
        Some(f) => Ok(floats(&f, key, Some(1))?[0]),
        None => default.ok_or_else(|| ScenarioError::Missing(key.to_string())),
    }
}

fn uint(sec: &mut Section, key: &str, default: Option<usize>) -> Result<usize, ScenarioError> {
    match sec.take(key) {
        Some(f) => f.value.trim().parse().map_err(|e| parse_err(f.line, key, format!("expected an integer: {e}"))),
        None => default.ok_or_else(|| ScenarioError::Missing(key.to_string())),
    }
}

fn vec3(sec: &mut Section, key: &str) -> Result<Option<[f64; 3]>, ScenarioError> {
    sec.take(key).map(|f| floats(&f, key, Some(3)).map(|v| [v[0], v[1], v[2]])).transpose()
}

fn reject_leftovers(name: &str, sec: &Section) -> Result<(), ScenarioError> {
    if let Some((k, f)) = sec.fields.iter().next() {
        return Err(parse_err(f.line, k, format!("unknown key in [{name}]")));
    }
    if let Some(f) = sec.blades.first() {
        return Err(parse_err(f.line, "blade", format!("unexpected in [{name}]")));
    }
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    const SECTIONS: [&str; 6] = ["", "environment", "robot", "start", "goal", "planner"];
    let mut sections: BTreeMap<&str, Section> = SECTIONS.iter().map(|s| (*s, Section::default())).collect();
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, content, "unterminated section header"))?
                .trim();
            current = SECTIONS
                .iter()
                .find(|s| **s == name && !name.is_empty())
                .ok_or_else(|| parse_err(line, name, "unknown section"))?;
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| parse_err(line, content, "expected `key = value`"))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let sec = sections.get_mut(current).unwrap();
        if k == "blade" && current == "environment" {
            sec.blades.push(Field { line, value: v });
        } else if let Some(prev) = sec.fields.get(&k) {
            return Err(parse_err(line, &k, format!("duplicate key (first on line {})", prev.line)));
        } else {
            sec.fields.insert(k, Field { line, value: v });
        }
    }

    let top = sections.get_mut("").unwrap();
    let name = top.take("name").map(|f| f.value).unwrap_or_else(|| "unnamed".into());
    let seed = uint(top, "seed", Some(0))? as u64;
    reject_leftovers("top level", top)?;

    let env = sections.get_mut("environment").unwrap();
    let b = floats(&env.take("bounds").ok_or_else(|| ScenarioError::Missing("bounds".into()))?, "bounds", Some(6))?;
    let bounds = Bounds::new(Point3::new(b[0], b[1], b[2]), Point3::new(b[3], b[4], b[5]));
    let resolution = float(env, "resolution", Some(0.02))?;
    let d_max = float(env, "d_max", Some(1.0))?;
    let layout = if env.fields.contains_key("rows") {
        if let Some(f) = env.blades.first() {
            return Err(parse_err(f.line, "blade", "cannot mix explicit blades with an array"));
        }
        let offsets = match env.take("column_offsets") {
            Some(f) => floats(&f, "column_offsets", None)?,
            None => Vec::new(),
        };
        BladeLayout::Array(BladeArraySpec {
            bounds: bounds.clone(),
            rows: uint(env, "rows", None)?,
            columns: uint(env, "columns", None)?,
            blade_width: float(env, "blade_width", None)?,
            blade_height: float(env, "blade_height", None)?,
            gap: float(env, "gap", None)?,
            column_pitch: float(env, "column_pitch", None)?,
            first_column_x: float(env, "first_column_x", None)?,
            bottom_z: float(env, "bottom_z", None)?,
            column_offsets: offsets,
        })
    } else {
        let list = std::mem::take(&mut env.blades)
            .iter()
            .map(|f| floats(f, "blade", Some(4)).map(|v| [v[0], v[1], v[2], v[3]]))
            .collect::<Result<Vec<_>, _>>()?;
        BladeLayout::Explicit(list)
    };
    reject_leftovers("environment", env)?;

    let d = RobotDefaults::spec();
    let rob = sections.get_mut("robot").unwrap();
    let prismatic = match rob.take("prismatic") {
        Some(f) => {
            let v = floats(&f, "prismatic", Some(2))?;
            Interval::new(v[0], v[1])
        }
        None => d.prismatic_range,
    };
    let robot = RobotSpec {
        num_units: uint(rob, "units", Some(d.num_units))?,
        subunits_per_unit: uint(rob, "subunits", Some(d.subunits_per_unit))?,
        subunit_length: float(rob, "subunit_length", Some(d.subunit_length))?,
        body_radius: float(rob, "body_radius", Some(d.body_radius))?,
        pitch_limit: float(rob, "pitch_limit", Some(d.pitch_limit))?,
        yaw_limit: float(rob, "yaw_limit", Some(d.yaw_limit))?,
        prismatic_range: prismatic,
        base_position: vec3(rob, "base")?.map(Point3::from).unwrap_or(d.base_position),
        base_forward: vec3(rob, "forward")?.map(Vector3::from).unwrap_or(d.base_forward),
    };
    reject_leftovers("robot", rob)?;

    let st = sections.get_mut("start").unwrap();
    let n = robot.num_units;
    let l = float(st, "l", Some(0.0))?;
    let mut angles = |key: &str| -> Result<Vec<f64>, ScenarioError> {
        match st.take(key) {
            Some(f) => floats(&f, key, Some(n)),
            None => Ok(vec![0.0; n]),
        }
    };
    let pitch = angles("pitch")?;
    let yaw = angles("yaw")?;
    reject_leftovers("start", st)?;
    let start = Configuration { l, pitch, yaw };

    let g = sections.get_mut("goal").unwrap();
    let position = vec3(g, "position")?.ok_or_else(|| ScenarioError::Missing("goal".into()))?;
    let axis = vec3(g, "axis")?.map(Vector3::from);
    reject_leftovers("goal", g)?;
    let goal = GoalPose { position: Point3::from(position), axis };

    let planner = std::mem::take(&mut sections.get_mut("planner").unwrap().fields)
        .into_iter()
        .map(|(k, f)| (k, f.value))
        .collect();

    Ok(Scenario { name, seed, bounds, layout, resolution, d_max, robot, start, goal, planner })
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let sc = parse_scenario(&text)?;
    sc.validate()?;
    Ok(sc)
}
