use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("blade array needs at least one row and one column")]
    EmptyArray,
    #[error("blade gap must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("blade width and height must be positive")]
    NonPositiveBladeSize,
    #[error("environment bounds are degenerate")]
    DegenerateBounds,
    #[error("blade {0} has a degenerate extent")]
    DegenerateBlade(usize),
    #[error("blade {0} lies outside the environment bounds")]
    BladeOutOfBounds(usize),
    #[error("blades {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("column {0} is not strictly to the right of the previous column")]
    ColumnOrder(usize),
    #[error("distance field resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("distance cap must be positive, got {0}")]
    NonPositiveCap(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobotError {
    #[error("robot needs at least one unit with at least one subunit")]
    EmptyChain,
    #[error("joint limits and lengths must be positive")]
    NonPositiveDimension,
    #[error("prismatic range is degenerate")]
    DegeneratePrismaticRange,
    #[error("base forward axis must be non-zero")]
    ZeroForward,
    #[error("configuration has {got} units, robot has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomotopyError {
    #[error("goal projection ({0}, {1}) lies inside an obstacle or outside the grid")]
    GoalBlocked(f64, f64),
    #[error("passage search needs k >= 1")]
    ZeroClasses,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("objective is not finite at the initial point")]
    NonFiniteStart,
    #[error("problem dimension must be at least 1")]
    ZeroDimension,
    #[error("initial step size must be positive")]
    NonPositiveSigma,
    #[error("evaluation budget {budget} is smaller than the population size {population}")]
    BudgetTooSmall { budget: usize, population: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start configuration is invalid")]
    InvalidStart,
    #[error("goal position lies outside the environment bounds")]
    GoalOutOfBounds,
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
    #[error("extracted path cost {summed} disagrees with stored g {stored}")]
    CostMismatch { summed: f64, stored: f64 },
    #[error("invalid planner configuration: {0}")]
    Config(String),
}
