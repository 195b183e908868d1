//! Multi-queue weighted A* over joint space.
//!
//! All queues share g-values and the CLOSED set. Queue 0 is an anchor ordered
//! by straight-line tip distance to the goal; the remaining queues use either
//! a plain grid distance or one homotopy-class distance each. When a queue's
//! best heuristic stalls, expansions from it also emit optimizer-generated
//! successors toward six end-effector targets, either immediately (eager) or
//! as pseudostates resolved on first pop (lazy).

mod planner;
pub mod scheduler;

use crate::env::{build_distance_field, place_beams, Beam, DistanceField, Environment};
use crate::error::PlanError;
use crate::homotopy::MapOptions;
use crate::optimizer::{generate_neighbor, OptRequest, OptimizerSettings};
use crate::robot::{
    end_effector, forward_kinematics, is_valid_state, is_valid_transition, transition_cost,
    Configuration, RobotSpec, TransitionSteps,
};
use crate::{Point3, Vector3};

pub use planner::{plan, plan_with_generator};

/// Target end-effector pose: position plus optional forward axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalPose {
    pub position: Point3,
    pub axis: Option<Vector3>,
}

impl GoalPose {
    pub fn at(position: Point3) -> Self {
        Self { position, axis: None }
    }
}

/// Fixed inputs of a planning query.
#[derive(Debug, Clone)]
pub struct Problem {
    pub env: Environment,
    pub spec: RobotSpec,
    pub df: DistanceField,
    pub beams: Vec<Beam>,
    pub start: Configuration,
    pub goal: GoalPose,
}

impl Problem {
    /// Builds the distance field at `resolution` with cap `d_max`.
    pub fn new(
        env: Environment,
        spec: RobotSpec,
        start: Configuration,
        goal: GoalPose,
        resolution: f64,
        d_max: f64,
    ) -> Result<Self, PlanError> {
        spec.validate()?;
        start.check_dimension(&spec)?;
        let df = build_distance_field(&env, resolution, d_max).map_err(|e| PlanError::Config(e.to_string()))?;
        let beams = place_beams(&env);
        Ok(Self { env, spec, df, beams, start, goal })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionMode {
    PredefinedOnly,
    OptEager,
    OptLazy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeuristicMode {
    /// Anchor queue alone.
    AnchorOnly,
    /// Anchor plus one queue on the plain projected grid distance.
    Bfs,
    /// Anchor plus one queue per relevant homotopy class, up to `k`.
    Homotopy { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerMode {
    Dts,
    RoundRobin,
}

/// Predefined action step per joint type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDeltas {
    pub revolute: f64,
    pub prismatic: f64,
}

impl Default for ActionDeltas {
    fn default() -> Self {
        Self { revolute: 0.05, prismatic: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub heuristic_weight: f64,
    pub deltas: ActionDeltas,
    pub steps: TransitionSteps,
    /// End-effector step of optimization actions.
    pub eps: f64,
    pub eps_pos: f64,
    pub eps_axis: Option<f64>,
    pub stagnation_window: usize,
    /// Defaults to `eps / 2`.
    pub stagnation_tol: Option<f64>,
    /// Wall-clock limit in seconds.
    pub timeout: Option<f64>,
    /// Limit on state checks plus objective evaluations. Unlike the timeout
    /// this is deterministic.
    pub eval_budget: Option<u64>,
    pub seed: u64,
    pub action_mode: ActionMode,
    pub heuristic_mode: HeuristicMode,
    pub scheduler: SchedulerMode,
    pub dts_cap: f64,
    pub optimizer: OptimizerSettings,
    pub map: MapOptions,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let eps = 0.05;
        Self {
            heuristic_weight: 5.0,
            deltas: ActionDeltas::default(),
            steps: TransitionSteps::default(),
            eps,
            eps_pos: 0.05,
            eps_axis: None,
            stagnation_window: 50,
            stagnation_tol: None,
            timeout: Some(60.0),
            eval_budget: None,
            seed: 0,
            action_mode: ActionMode::OptLazy,
            heuristic_mode: HeuristicMode::Homotopy { k: 2 },
            scheduler: SchedulerMode::Dts,
            dts_cap: 10.0,
            optimizer: OptimizerSettings::for_step(eps),
            map: MapOptions::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::Config(m.to_string()));
        if !(self.heuristic_weight >= 1.0) {
            return bad("heuristic weight must be at least 1");
        }
        if self.stagnation_window == 0 {
            return bad("stagnation window must be at least 1");
        }
        if !(self.eps > 0.0) || !(self.eps_pos >= 0.0) {
            return bad("end-effector step must be positive and goal tolerance non-negative");
        }
        if !(self.deltas.revolute > 0.0 && self.deltas.prismatic > 0.0) {
            return bad("action deltas must be positive");
        }
        if !(self.dts_cap >= 2.0) {
            return bad("DTS cap must be at least 2");
        }
        if let HeuristicMode::Homotopy { k: 0 } = self.heuristic_mode {
            return bad("homotopy mode needs k >= 1");
        }
        Ok(())
    }

    pub fn stagnation_tolerance(&self) -> f64 {
        self.stagnation_tol.unwrap_or(self.eps / 2.0)
    }
}

/// A solution path.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub states: Vec<Configuration>,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanStats {
    pub expansions: usize,
    /// Expansions per queue, anchor first.
    pub queue_expansions: Vec<usize>,
    pub optimizer_calls: usize,
    pub pseudostates_inserted: usize,
    pub pseudostates_popped: usize,
    pub pseudostates_reinserted: usize,
    pub pseudostates_discarded: usize,
    /// Reinserted pseudostates whose true g fell below the insertion estimate.
    pub pseudo_g_violations: usize,
    /// Expansions of already closed nodes; zero unless the CLOSED
    /// discipline is broken.
    pub reexpansions: usize,
    /// State checks plus objective evaluations consumed.
    pub evaluations: u64,
    pub num_queues: usize,
    pub setup_seconds: f64,
    pub search_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    Timeout,
    BudgetExhausted,
    OpenExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: Option<Plan>,
    pub failure: Option<FailureReason>,
    pub stats: PlanStats,
}

/// Result of one generator call.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// `None` when the generator did not converge.
    pub config: Option<Configuration>,
    /// Evaluations charged against the planner budget.
    pub evaluations: u64,
}

/// Source of optimization-based successors.
pub trait NeighborGenerator {
    /// Successor of `from` whose tip should reach `target`. Must be a pure
    /// function of its arguments.
    fn generate(&self, problem: &Problem, from: &Configuration, target: &Point3, seed: u64) -> Generated;
}

/// CMA-ES generator; keeps only converged candidates.
#[derive(Debug, Clone)]
pub struct CmaesGenerator {
    pub settings: OptimizerSettings,
}

impl NeighborGenerator for CmaesGenerator {
    fn generate(&self, problem: &Problem, from: &Configuration, target: &Point3, seed: u64) -> Generated {
        let req = OptRequest { s_min: from.clone(), ee_goal: *target };
        let out = generate_neighbor(&problem.spec, &problem.df, &req, &self.settings, seed);
        Generated { config: out.converged.then_some(out.candidate), evaluations: out.evaluations as u64 }
    }
}

/// One successor per signed step of each joint, in the order
/// `l+, l-, pitch_1+, pitch_1-, yaw_1+, yaw_1-, ...`. Steps leaving the
/// joint limits are omitted; steps overshooting a limit by rounding error
/// land exactly on it.
pub fn predefined_successors(spec: &RobotSpec, c: &Configuration, deltas: &ActionDeltas) -> Vec<Configuration> {
    let bounds = spec.joint_bounds();
    let mut out = Vec::with_capacity(2 * c.dof());
    for (i, iv) in bounds.iter().enumerate() {
        let d = if i == 0 { deltas.prismatic } else { deltas.revolute };
        for sign in [1.0, -1.0] {
            let v = c.get(i) + sign * d;
            if v >= iv.min - 1e-12 && v <= iv.max + 1e-12 {
                let mut s = c.clone();
                s.set(i, v.clamp(iv.min, iv.max));
                out.push(s);
            }
        }
    }
    out
}

/// Whether the tip is within `eps_pos` of the goal and, if both an axis and
/// `eps_axis` are given, the terminal segment points within `eps_axis` of it.
pub fn goal_check(spec: &RobotSpec, c: &Configuration, goal: &GoalPose, eps_pos: f64, eps_axis: Option<f64>) -> bool {
    let body = forward_kinematics(spec, c);
    if (body.tip() - goal.position).norm() > eps_pos {
        return false;
    }
    match (goal.axis, eps_axis) {
        (Some(axis), Some(tol)) => body.terminal_axis().angle(&axis) <= tol,
        _ => true,
    }
}

/// Re-checks a plan end to end: starts at the problem start, every
/// transition valid, ends in the goal set, and the cost matches.
pub fn validate_plan(problem: &Problem, cfg: &PlannerConfig, plan: &Plan) -> Result<(), String> {
    let spec = &problem.spec;
    let first = plan.states.first().ok_or("plan is empty")?;
    if first != &problem.start {
        return Err("plan does not begin at the start configuration".into());
    }
    if !is_valid_state(spec, &problem.df, first) {
        return Err("start state is invalid".into());
    }
    let mut cost = 0.0;
    for (i, w) in plan.states.windows(2).enumerate() {
        if !is_valid_transition(spec, &problem.df, &w[0], &w[1], cfg.steps) {
            return Err(format!("transition {i} -> {} is invalid", i + 1));
        }
        cost += transition_cost(spec, &w[0], &w[1]);
    }
    let last = plan.states.last().unwrap();
    if !goal_check(spec, last, &problem.goal, cfg.eps_pos, cfg.eps_axis) {
        let d = (end_effector(spec, last) - problem.goal.position).norm();
        return Err(format!("final tip is {d:.4} m from the goal"));
    }
    if (cost - plan.cost).abs() > 1e-9 {
        return Err(format!("re-summed cost {cost} differs from reported {}", plan.cost));
    }
    Ok(())
}
