//! Shared fixtures for the criterion benchmarks.

use bladecrawl::env::{Blade, Bounds, Environment, Interval};
use bladecrawl::robot::{Configuration, RobotSpec, TransitionSteps};
use bladecrawl::search::{ActionDeltas, GoalPose, PlannerConfig, Problem};
use bladecrawl::{Point3, Vector3};

/// Five units of five subunits, 1 m of body.
pub fn desk_spec() -> RobotSpec {
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

/// One column of two blades with the goal just past the slot between them.
pub fn desk_problem() -> Problem {
    let bounds = Bounds::new(Point3::new(0.0, -0.4, 0.0), Point3::new(2.4, 0.4, 1.2));
    let blade = |z0: f64, z1: f64| Blade::new(Interval::new(1.2, 1.26), bounds.axis(1), Interval::new(z0, z1));
    let env = Environment::from_blades(bounds, vec![blade(0.1, 0.4), blade(0.55, 0.85)]).expect("valid blades");
    Problem::new(env, desk_spec(), Configuration::straight(5, 0.0), GoalPose::at(Point3::new(1.45, 0.0, 0.5)), 0.02, 1.0)
        .expect("valid problem")
}

pub fn desk_config() -> PlannerConfig {
    let mut cfg = PlannerConfig {
        heuristic_weight: 5.0,
        deltas: ActionDeltas { revolute: 0.02, prismatic: 0.02 },
        steps: TransitionSteps { revolute: 0.01, prismatic: 0.01 },
        eps: 0.04,
        eps_pos: 0.03,
        timeout: None,
        eval_budget: Some(300_000),
        ..PlannerConfig::default()
    };
    cfg.optimizer.eps_reach = cfg.eps / 2.0;
    cfg.optimizer.sigma0 = 0.01;
    cfg.optimizer.weights.lambda = 100.0;
    cfg.optimizer.weights.gamma = 30.0;
    cfg
}

/// A gently curved pose clear of the blades.
pub fn curved(l: f64) -> Configuration {
    let mut c = Configuration::straight(5, l);
    for (k, p) in c.pitch.iter_mut().enumerate() {
        *p = 0.05 * (k as f64 - 2.0);
    }
    c.yaw[2] = 0.1;
    c
}
