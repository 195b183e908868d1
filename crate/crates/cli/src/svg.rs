//! x-z projection of a scenario and a plan as SVG.

use std::fmt::Write as _;
use std::path::Path;

use bladecrawl::env::{place_beams, Environment};
use bladecrawl::robot::forward_kinematics;
use bladecrawl::search::Plan;
use bladecrawl::Point3;
use thiserror::Error;

use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum SvgError {
    #[error("plan has no states")]
    EmptyPlan,
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pixels per meter.
const SCALE: f64 = 400.0;
/// Most body polylines drawn; the first and last state are always included.
const MAX_POSES: usize = 12;

struct Frame {
    x0: f64,
    z1: f64,
}

impl Frame {
    fn new(env: &Environment) -> Self {
        let b = env.bounds();
        Self { x0: b.min.x, z1: b.max.z }
    }

    fn x(&self, x: f64) -> f64 {
        (x - self.x0) * SCALE
    }

    /// z grows upward; SVG y grows downward.
    fn y(&self, z: f64) -> f64 {
        (self.z1 - z) * SCALE
    }
}

/// Indices of the plan states drawn as body polylines.
fn sampled(len: usize) -> Vec<usize> {
    if len <= MAX_POSES {
        return (0..len).collect();
    }
    let mut out: Vec<usize> = (0..MAX_POSES).map(|k| k * (len - 1) / (MAX_POSES - 1)).collect();
    out.dedup();
    out
}

pub fn svg_string(scenario: &Scenario, plan: &Plan) -> Result<String, SvgError> {
    if plan.states.is_empty() {
        return Err(SvgError::EmptyPlan);
    }
    let env = scenario.environment()?;
    let spec = &scenario.robot;
    let f = Frame::new(&env);
    let b = env.bounds();
    let (w, h) = ((b.max.x - b.min.x) * SCALE, (b.max.z - b.min.z) * SCALE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", scenario.name);
    let _ = writeln!(
        s,
        r##"<rect class="bounds" x="0" y="0" width="{w:.1}" height="{h:.1}" fill="#fafafa" stroke="#333"/>"##
    );
    for blade in env.blades() {
        let _ = writeln!(
            s,
            r##"<rect class="blade" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#8a8f99"/>"##,
            f.x(blade.x.min),
            f.y(blade.z.max),
            blade.x.width() * SCALE,
            blade.z.width() * SCALE
        );
    }
    for beam in place_beams(&env) {
        let z = beam.z_range();
        let _ = writeln!(
            s,
            r##"<line class="beam" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#d08c2b" stroke-dasharray="4 3"/>"##,
            f.y(z.min),
            f.y(z.max),
            x = f.x(beam.x()),
        );
    }
    let stroke = (2.0 * spec.body_radius * SCALE).max(1.0);
    let idx = sampled(plan.states.len());
    for (k, &i) in idx.iter().enumerate() {
        let pts = forward_kinematics(spec, &plan.states[i]);
        let coords: Vec<String> = pts.points().iter().map(|p| format!("{:.2},{:.2}", f.x(p.x), f.y(p.z))).collect();
        let opacity = 0.25 + 0.75 * (k + 1) as f64 / idx.len() as f64;
        let _ = writeln!(
            s,
            r##"<polyline class="body" points="{}" fill="none" stroke="#2b6cb0" stroke-opacity="{opacity:.2}" stroke-width="{stroke:.1}" stroke-linecap="round"/>"##,
            coords.join(" ")
        );
    }
    let marker = |s: &mut String, class: &str, p: &Point3, color: &str| {
        let _ = writeln!(
            s,
            r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="5" fill="{color}"/>"#,
            f.x(p.x),
            f.y(p.z)
        );
    };
    marker(&mut s, "start", &forward_kinematics(spec, &plan.states[0]).tip(), "#2f855a");
    marker(&mut s, "goal", &scenario.goal.position, "#c53030");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_svg(scenario: &Scenario, plan: &Plan, out: &Path) -> Result<(), SvgError> {
    let text = svg_string(scenario, plan)?;
    std::fs::write(out, text)?;
    Ok(())
}
