//! Planner variants and per-scenario parameter overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use bladecrawl::search::{ActionMode, HeuristicMode, PlannerConfig, SchedulerMode};

/// One point of the action x heuristic x scheduler grid, named like
/// `predefined_opt_lazy+homotopy_k2+dts`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub action: ActionMode,
    pub heuristic: HeuristicMode,
    pub scheduler: SchedulerMode,
}

pub const ACTIONS: [ActionMode; 3] = [ActionMode::PredefinedOnly, ActionMode::OptEager, ActionMode::OptLazy];
pub const HEURISTICS: [HeuristicMode; 3] =
    [HeuristicMode::Bfs, HeuristicMode::Homotopy { k: 1 }, HeuristicMode::Homotopy { k: 2 }];
pub const SCHEDULERS: [SchedulerMode; 2] = [SchedulerMode::Dts, SchedulerMode::RoundRobin];

impl Variant {
    pub fn new(action: ActionMode, heuristic: HeuristicMode, scheduler: SchedulerMode) -> Self {
        Self { action, heuristic, scheduler }
    }

    /// All 18 combinations.
    pub fn all() -> Vec<Variant> {
        let mut out = Vec::new();
        for a in ACTIONS {
            for h in HEURISTICS {
                for s in SCHEDULERS {
                    out.push(Variant::new(a, h, s));
                }
            }
        }
        out
    }

    pub fn apply(&self, cfg: &mut PlannerConfig) {
        cfg.action_mode = self.action;
        cfg.heuristic_mode = self.heuristic;
        cfg.scheduler = self.scheduler;
    }
}

fn action_name(a: ActionMode) -> &'static str {
    match a {
        ActionMode::PredefinedOnly => "predefined_only",
        ActionMode::OptEager => "predefined_opt_eager",
        ActionMode::OptLazy => "predefined_opt_lazy",
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = match self.heuristic {
            HeuristicMode::AnchorOnly => "anchor_only".to_string(),
            HeuristicMode::Bfs => "bfs_heuristic".to_string(),
            HeuristicMode::Homotopy { k } => format!("homotopy_k{k}"),
        };
        let s = match self.scheduler {
            SchedulerMode::Dts => "dts",
            SchedulerMode::RoundRobin => "round_robin",
        };
        write!(f, "{}+{}+{}", action_name(self.action), h, s)
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('+').collect();
        let [a, h, sch] = parts[..] else {
            return Err(format!("variant `{s}` must have the form action+heuristic+scheduler"));
        };
        let action = ACTIONS
            .into_iter()
            .find(|x| action_name(*x) == a)
            .ok_or_else(|| format!("unknown action set `{a}`"))?;
        let heuristic = match h {
            "anchor_only" => HeuristicMode::AnchorOnly,
            "bfs_heuristic" => HeuristicMode::Bfs,
            _ => {
                let k = h
                    .strip_prefix("homotopy_k")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| format!("unknown heuristic `{h}`"))?;
                HeuristicMode::Homotopy { k }
            }
        };
        let scheduler = match sch {
            "dts" => SchedulerMode::Dts,
            "round_robin" => SchedulerMode::RoundRobin,
            _ => return Err(format!("unknown scheduler `{sch}`")),
        };
        Ok(Variant { action, heuristic, scheduler })
    }
}

/// Applies `[planner]` overrides. Unknown keys and malformed values are
/// errors.
pub fn apply_overrides(cfg: &mut PlannerConfig, overrides: &BTreeMap<String, String>) -> Result<(), String> {
    for (k, v) in overrides {
        let num = || v.trim().parse::<f64>().map_err(|e| format!("{k}: {e}"));
        let int = || v.trim().parse::<usize>().map_err(|e| format!("{k}: {e}"));
        match k.as_str() {
            "heuristic_weight" => cfg.heuristic_weight = num()?,
            "delta_revolute" => cfg.deltas.revolute = num()?,
            "delta_prismatic" => cfg.deltas.prismatic = num()?,
            "step_revolute" => cfg.steps.revolute = num()?,
            "step_prismatic" => cfg.steps.prismatic = num()?,
            "eps" => {
                cfg.eps = num()?;
                cfg.optimizer.eps_reach = cfg.eps / 2.0;
            }
            "eps_reach" => cfg.optimizer.eps_reach = num()?,
            "eps_pos" => cfg.eps_pos = num()?,
            "eps_axis" => cfg.eps_axis = Some(num()?),
            "stagnation_window" => cfg.stagnation_window = int()?,
            "stagnation_tol" => cfg.stagnation_tol = Some(num()?),
            "eval_budget" => cfg.eval_budget = Some(int()? as u64),
            "dts_cap" => cfg.dts_cap = num()?,
            "lambda" => cfg.optimizer.weights.lambda = num()?,
            "gamma" => cfg.optimizer.weights.gamma = num()?,
            "sigma0" => cfg.optimizer.sigma0 = num()?,
            "opt_budget" => cfg.optimizer.budget = int()?,
            "max_word_len" => cfg.map.max_word_len = int()?,
            "detour_letters" => cfg.map.detour_letters = int()?,
            _ => return Err(format!("unknown planner key `{k}`")),
        }
    }
    Ok(())
}
