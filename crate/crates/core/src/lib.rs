//! Search-based motion planning for a serpentine manipulator threading
//! through arrays of blades.
//!
//! The robot is a prismatic base followed by a chain of two-axis flexible
//! units. Planning is a multi-queue weighted A* over joint space with:
//!
//! * a predefined action set of single-joint increments,
//! * optimization-generated actions toward six end-effector targets, created
//!   lazily as pseudostates when the search stagnates,
//! * homotopy-aware heuristics computed from word-based h-signatures in the
//!   projected x-z plane, scheduled by dynamic Thompson sampling.
//!
//! Modules map onto the planner's layers: [`env`] (world and distance field),
//! [`robot`] (kinematics and validity), [`homotopy`] (signatures, augmented
//! distance maps, class detection), [`optimizer`] (objective and CMA-ES) and
//! [`search`] (the planner).

pub mod env;
pub mod error;
pub mod homotopy;
pub mod optimizer;
pub mod robot;
pub mod search;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
/// Point in the projected plane; components are `(x, z)`.
pub type Point2 = nalgebra::Point2<f64>;

pub use env::{
    build_distance_field, build_environment, place_beams, project, Beam, Blade, BladeArraySpec,
    Bounds, DistanceField, Environment, Interval,
};
pub use error::{EnvError, HomotopyError, OptimizerError, PlanError, RobotError};
pub use homotopy::{
    build_homotopy_distance_map, detect_relevant_classes, homotopy_heuristic, reduce_word,
    remainder_signature, signature_of_polyline, signature_of_state, ClassSpec, HSignature,
    HomotopyDistanceMap, Passage, SignedLetter,
};
pub use optimizer::{
    cmaes::{cmaes_minimize, CmaesOptions, CmaesOutcome},
    generate_neighbor, goal_cost, objective, obstacle_cost, six_connected_ee_goals, state_cost,
    ObjectiveWeights, OptRequest, OptResult, OptimizerSettings,
};
pub use robot::{
    end_effector, forward_kinematics, is_valid_state, is_valid_transition, transition_cost,
    BodyPoints, Configuration, RobotSpec, TransitionSteps,
};
pub use search::{
    plan, ActionMode, GoalPose, HeuristicMode, Plan, PlanOutcome, PlanStats, PlannerConfig,
    Problem, SchedulerMode,
};
