//! Optimization-based successor generation.
//!
//! A successor is found by minimizing
//! `obstacle_cost(c) + lambda * goal_cost(c, target) + gamma * state_cost(s_min, c)`
//! over the joint vector with CMA-ES. Joint limits are enforced by the
//! sine box mapping `y = m + h sin((x - m) / h)`.

pub mod cmaes;

use crate::env::{DistanceField, Interval};
use crate::robot::{end_effector, forward_kinematics, is_valid_state, Configuration, RobotSpec};
use crate::{Point3, Vector3};
use cmaes::{cmaes_minimize, CmaesOptions};

/// Cost of a body point with zero clearance.
pub const P_COLLIDE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { lambda: 10.0, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRequest {
    pub s_min: Configuration,
    pub ee_goal: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub candidate: Configuration,
    pub objective_value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub weights: ObjectiveWeights,
    pub sigma0: f64,
    pub budget: usize,
    pub population: Option<usize>,
    /// Goal distance at which a candidate counts as converged.
    pub eps_reach: f64,
    /// Scores states that fail `is_valid_state` as [`P_COLLIDE`] inside the
    /// search. The objective alone only penalizes zero clearance, so without
    /// this the minimizer settles on poses closer than `body_radius`.
    pub penalize_invalid: bool,
}

impl OptimizerSettings {
    /// Defaults for an end-effector step of `eps`.
    pub fn for_step(eps: f64) -> Self {
        Self { weights: ObjectiveWeights::default(), sigma0: 0.1, budget: 1500, population: None, eps_reach: eps / 2.0, penalize_invalid: true }
    }
}

/// `1 / sum(clearance * subunit_length)` over body points, or [`P_COLLIDE`]
/// if any point has zero clearance.
pub fn obstacle_cost(spec: &RobotSpec, df: &DistanceField, c: &Configuration) -> f64 {
    let mut sum = 0.0;
    for p in forward_kinematics(spec, c).points() {
        let d = df.clearance(p);
        if d <= 0.0 {
            return P_COLLIDE;
        }
        sum += d * spec.subunit_length;
    }
    1.0 / sum
}

pub fn goal_cost(spec: &RobotSpec, c: &Configuration, g: &Point3) -> f64 {
    (end_effector(spec, c) - g).norm()
}

/// Euclidean distance between stacked joint vectors.
pub fn state_cost(a: &Configuration, b: &Configuration) -> f64 {
    a.to_vector().iter().zip(b.to_vector()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn objective(
    spec: &RobotSpec,
    df: &DistanceField,
    req: &OptRequest,
    w: &ObjectiveWeights,
    c: &Configuration,
) -> f64 {
    obstacle_cost(spec, df, c) + w.lambda * goal_cost(spec, c, &req.ee_goal) + w.gamma * state_cost(&req.s_min, c)
}

/// Tip displaced by `eps` along `+x, -x, +y, -y, +z, -z`, in that order.
pub fn six_connected_ee_goals(spec: &RobotSpec, c: &Configuration, eps: f64) -> [Point3; 6] {
    let t = end_effector(spec, c);
    [
        t + Vector3::x() * eps,
        t - Vector3::x() * eps,
        t + Vector3::y() * eps,
        t - Vector3::y() * eps,
        t + Vector3::z() * eps,
        t - Vector3::z() * eps,
    ]
}

fn to_box(x: f64, iv: &Interval) -> f64 {
    let (m, h) = (iv.center(), iv.width() / 2.0);
    m + h * ((x - m) / h).sin()
}

fn from_box(y: f64, iv: &Interval) -> f64 {
    let (m, h) = (iv.center(), iv.width() / 2.0);
    m + h * ((y - m) / h).clamp(-1.0, 1.0).asin()
}

/// Runs CMA-ES from `req.s_min` toward `req.ee_goal`. Never fails: a start
/// the optimizer rejects yields `s_min` itself, marked not converged.
pub fn generate_neighbor(
    spec: &RobotSpec,
    df: &DistanceField,
    req: &OptRequest,
    settings: &OptimizerSettings,
    seed: u64,
) -> OptResult {
    let bounds = spec.joint_bounds();
    let decode = |x: &[f64]| -> Configuration {
        let y: Vec<f64> = x.iter().zip(&bounds).map(|(v, iv)| to_box(*v, iv)).collect();
        Configuration::from_vector(&y)
    };
    let x0: Vec<f64> = req.s_min.to_vector().iter().zip(&bounds).map(|(v, iv)| from_box(*v, iv)).collect();
    let opts = CmaesOptions {
        sigma0: settings.sigma0,
        budget: settings.budget,
        population: settings.population,
        seed,
        ..Default::default()
    };
    let f = |x: &[f64]| {
        let c = decode(x);
        let v = objective(spec, df, req, &settings.weights, &c);
        if settings.penalize_invalid && !is_valid_state(spec, df, &c) {
            v.max(P_COLLIDE)
        } else {
            v
        }
    };
    match cmaes_minimize(f, &x0, &opts) {
        Ok(out) => {
            let candidate = decode(&out.x_best);
            let objective_value = objective(spec, df, req, &settings.weights, &candidate);
            let converged = goal_cost(spec, &candidate, &req.ee_goal) <= settings.eps_reach;
            OptResult { candidate, objective_value, evaluations: out.evaluations, converged }
        }
        Err(_) => OptResult {
            candidate: req.s_min.clone(),
            objective_value: objective(spec, df, req, &settings.weights, &req.s_min),
            evaluations: 1,
            converged: false,
        },
    }
}
