//! Procedural scenario suites.
//!
//! Every scenario is built around a witness: a straight-line joint-space
//! motion from the straight start to a randomly bent final configuration.
//! Columns of blades are placed across the witness sweep, each leaving one
//! gap around it, and the goal is the witness tip. The witness is checked
//! against the planner's own distance field before the scenario is kept and
//! is then discarded.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bladecrawl::env::{Bounds, Interval};
use bladecrawl::robot::{forward_kinematics, is_valid_transition, Configuration, RobotSpec, TransitionSteps};
use bladecrawl::search::GoalPose;
use bladecrawl::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scenario::{BladeLayout, RobotDefaults, Scenario};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("scenario count must be at least 1")]
    EmptySuite,
    #[error("scenario {index}: no feasible layout after {attempts} attempts")]
    RetriesExhausted { index: usize, attempts: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Difficulty {
    /// One column, generous gap.
    Easy,
    /// One or two columns with tight gaps and decoy openings.
    Clutter,
    /// Two columns; the first column has a slit in line with the second
    /// column's gap. The slit is wider than a grid cell but narrower than the
    /// body, so the 2-D projection admits it and the body cannot use it. The
    /// witness passes through an offset gap instead, and a second passable
    /// opening on the far side of that gap gives two relevant classes.
    Trap,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Clutter => "clutter",
            Difficulty::Trap => "trap",
        })
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "clutter" => Ok(Difficulty::Clutter),
            "trap" => Ok(Difficulty::Trap),
            _ => Err(format!("unknown difficulty `{s}` (easy, clutter, trap)")),
        }
    }
}

const ATTEMPTS: usize = 400;
const BLADE_WIDTH: f64 = 0.06;
/// Shortest blade piece kept when a column is split.
const MIN_PIECE: f64 = 0.04;
const FIRST_COLUMN_X: f64 = 1.12;
/// Extension change between witness waypoints.
const WITNESS_STEP: f64 = 0.02;

struct Params {
    columns: (usize, usize),
    pitch: f64,
    /// Clearance added on each side of the swept body in a gap.
    margin: (f64, f64),
    max_gap: f64,
    decoys: bool,
    trap: bool,
}

fn params(d: Difficulty) -> Params {
    match d {
        Difficulty::Easy => {
            Params { columns: (1, 1), pitch: 0.08, margin: (0.04, 0.06), max_gap: 0.4, decoys: false, trap: false }
        }
        Difficulty::Clutter => {
            Params { columns: (1, 2), pitch: 0.1, margin: (0.006, 0.012), max_gap: 0.25, decoys: true, trap: false }
        }
        Difficulty::Trap => {
            Params { columns: (2, 2), pitch: 0.12, margin: (0.012, 0.02), max_gap: 0.25, decoys: false, trap: true }
        }
    }
}

/// A generated scenario and the motion that proves its goal reachable.
#[derive(Debug, Clone)]
pub struct Generated {
    pub scenario: Scenario,
    /// Waypoints of the witness motion, from the start to a configuration
    /// whose tip is the goal. Consecutive waypoints are valid transitions.
    pub witness: Vec<Configuration>,
}

fn bounds() -> Bounds {
    Bounds::new(Point3::new(0.0, -0.4, 0.0), Point3::new(2.4, 0.4, 1.2))
}

/// Generates `count` scenarios. Scenario `i` depends only on `(seed, i)`.
pub fn generate_suite(seed: u64, count: usize, difficulty: Difficulty) -> Result<Vec<Generated>, SuiteError> {
    if count == 0 {
        return Err(SuiteError::EmptySuite);
    }
    (0..count).map(|i| generate_scenario(seed, i, difficulty)).collect()
}

pub fn generate_scenario(seed: u64, index: usize, difficulty: Difficulty) -> Result<Generated, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let p = params(difficulty);
    for _ in 0..ATTEMPTS {
        if let Some(g) = attempt(&mut rng, &p, seed, index, difficulty) {
            return Ok(g);
        }
    }
    Err(SuiteError::RetriesExhausted { index, attempts: ATTEMPTS })
}

/// z values of every swept body point within `band` of x.
fn swept_heights(sweep: &[Vec<Point3>], band: Interval) -> Option<Interval> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for pts in sweep {
        for p in pts {
            if band.contains(p.x) {
                lo = lo.min(p.z);
                hi = hi.max(p.z);
            }
        }
    }
    (lo <= hi).then(|| Interval::new(lo, hi))
}

/// Splits the solid column range `[lo, hi]` around an optional extra opening.
fn pieces(lo: f64, hi: f64, opening: Option<Interval>) -> Vec<(f64, f64)> {
    match opening {
        Some(o) if o.min - lo >= MIN_PIECE && hi - o.max >= MIN_PIECE => vec![(lo, o.min), (o.max, hi)],
        _ => vec![(lo, hi)],
    }
}

/// Pitches that lay the body, advanced to extension `l`, along the curve
/// traced by `fin`: straight up to `fin.l`, then `fin`'s bends. Each unit takes
/// the mean turning of the curve over the arc length it covers.
fn follow(spec: &RobotSpec, fin: &Configuration, l: f64) -> Configuration {
    let m = spec.subunits_per_unit;
    let len = spec.subunit_length;
    let turning = |s0: f64, s1: f64| -> f64 {
        (0..spec.num_units * m)
            .map(|k| {
                let a = fin.l + k as f64 * len;
                let overlap = (s1.min(a + len) - s0.max(a)).max(0.0);
                fin.pitch[k / m] * overlap / len
            })
            .sum()
    };
    let mut c = Configuration::straight(spec.num_units, l);
    for u in 0..spec.num_units {
        let s0 = l + (u * m) as f64 * len;
        c.pitch[u] = turning(s0, s0 + m as f64 * len) / m as f64;
    }
    c
}

fn attempt(rng: &mut ChaCha8Rng, p: &Params, seed: u64, index: usize, difficulty: Difficulty) -> Option<Generated> {
    let spec = RobotDefaults::spec();
    let b = bounds();
    let r = spec.body_radius;
    let n = spec.num_units;

    let mut fin = Configuration::straight(n, rng.random_range(0.4..=spec.prismatic_range.max));
    for i in 0..n {
        fin.pitch[i] = rng.random_range(-p.pitch..=p.pitch);
    }
    let tip = forward_kinematics(&spec, &fin).tip();
    let num_cols = rng.random_range(p.columns.0..=p.columns.1);
    let last_x = tip.x - 0.08 - BLADE_WIDTH;
    if last_x < FIRST_COLUMN_X || tip.z < 0.1 || tip.z > b.max.z - 0.1 {
        return None;
    }
    let mut xs = vec![rng.random_range(FIRST_COLUMN_X..=last_x)];
    if num_cols == 2 {
        let x1 = xs[0] + BLADE_WIDTH + rng.random_range(0.12..=0.25);
        if x1 > last_x {
            return None;
        }
        xs.push(x1);
    }

    // Bend in place, then slide along the curve.
    let slides = (fin.l / WITNESS_STEP).ceil() as usize;
    let mut witness = vec![Configuration::straight(n, 0.0)];
    witness.extend((0..=slides).map(|k| follow(&spec, &fin, fin.l * k as f64 / slides as f64)));
    let steps = TransitionSteps { revolute: 0.005, prismatic: 0.005 };
    let mut sweep: Vec<Vec<Point3>> = Vec::new();
    for w in witness.windows(2) {
        let intervals = steps.intervals(&w[0], &w[1]).max(1);
        sweep.extend((0..=intervals).map(|k| forward_kinematics(&spec, &w[0].lerp(&w[1], k as f64 / intervals as f64)).0));
    }
    if sweep.iter().flatten().any(|q| q.z < 2.0 * r || q.z > b.max.z - 2.0 * r || q.x > b.max.x - 2.0 * r) {
        return None;
    }

    let mut blades: Vec<[f64; 4]> = Vec::new();
    let mut gaps: Vec<Interval> = Vec::new();
    for &x0 in &xs {
        let margin = rng.random_range(p.margin.0..=p.margin.1);
        let band = Interval::new(x0 - r - margin, x0 + BLADE_WIDTH + r + margin);
        let h = swept_heights(&sweep, band)?;
        let gap = Interval::new(h.min - r - margin, h.max + r + margin);
        if gap.width() > p.max_gap || gap.min < MIN_PIECE || gap.max > b.max.z - MIN_PIECE {
            return None;
        }
        gaps.push(gap);
    }

    for (c, &x0) in xs.iter().enumerate() {
        let gap = gaps[c];
        let (mut below, mut above) = (None, None);
        if p.trap && c == 0 {
            // Narrower than the body, wider than a grid cell.
            let target = gaps[1].center();
            if (target - gap.center()).abs() < 0.12 {
                return None;
            }
            let w = 2.0 * r - 0.004;
            let slit = Interval::new(target - w / 2.0, target + w / 2.0);
            if slit.max + MIN_PIECE > gap.min && slit.min - MIN_PIECE < gap.max {
                return None;
            }
            // A passable opening on the far side of the gap adds a second
            // relevant class that leads away from the goal height.
            let w = gap.width();
            let (lo, hi) = if slit.max < gap.min { (gap.max, b.max.z) } else { (b.min.z, gap.min) };
            if hi - lo < w + 2.0 * MIN_PIECE {
                return None;
            }
            let z = rng.random_range(lo + MIN_PIECE..=hi - MIN_PIECE - w);
            let alt = Interval::new(z, z + w);
            if slit.max < gap.min {
                (below, above) = (Some(slit), Some(alt));
            } else {
                (below, above) = (Some(alt), Some(slit));
            }
        } else if p.decoys {
            let decoy = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Option<Interval> {
                let w = rng.random_range(1.5 * r..=2.0 * r + 0.02);
                if hi - lo < w + 2.0 * MIN_PIECE || rng.random_bool(0.4) {
                    return None;
                }
                let z = rng.random_range(lo + MIN_PIECE..=hi - MIN_PIECE - w);
                Some(Interval::new(z, z + w))
            };
            below = decoy(rng, b.min.z, gap.min);
            above = decoy(rng, gap.max, b.max.z);
        }
        for (z0, z1) in pieces(b.min.z, gap.min, below).into_iter().chain(pieces(gap.max, b.max.z, above)) {
            blades.push([x0, x0 + BLADE_WIDTH, z0, z1]);
        }
    }

    let scenario = Scenario {
        name: format!("{difficulty}-{index:02}"),
        seed: seed.wrapping_add(index as u64),
        bounds: b,
        layout: BladeLayout::Explicit(blades),
        resolution: 0.02,
        d_max: 1.0,
        robot: spec.clone(),
        start: witness[0].clone(),
        goal: GoalPose { position: forward_kinematics(&spec, witness.last()?).tip(), axis: None },
        planner: Default::default(),
    };
    let problem = scenario.problem().ok()?;
    if !witness.windows(2).all(|w| is_valid_transition(&problem.spec, &problem.df, &w[0], &w[1], steps)) {
        return None;
    }
    Some(Generated { scenario, witness })
}

/// Writes each scenario to `<dir>/<name>.scn` and returns the paths.
pub fn write_suite(dir: &Path, suite: &[Generated]) -> Result<Vec<PathBuf>, SuiteError> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::with_capacity(suite.len());
    for g in suite {
        let path = dir.join(format!("{}.scn", g.scenario.name));
        std::fs::write(&path, g.scenario.to_text())?;
        out.push(path);
    }
    Ok(out)
}
