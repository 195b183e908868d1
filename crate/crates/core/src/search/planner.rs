use std::cmp::Ordering;
use std::collections::hash_map::Entry as MapEntry;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scheduler::{Dts, RoundRobin, StagnationWindow};
use super::{
    goal_check, predefined_successors, ActionMode, CmaesGenerator, FailureReason, HeuristicMode,
    NeighborGenerator, Plan, PlanOutcome, PlanStats, PlannerConfig, Problem, SchedulerMode,
};
use crate::env::project;
use crate::error::PlanError;
use crate::homotopy::{
    build_homotopy_distance_map, detect_relevant_classes, remainder_signature, signature_of_polyline,
    HSignature, HomotopyDistanceMap, PlainDistanceMap,
};
use crate::optimizer::six_connected_ee_goals;
use crate::robot::{check_transition, forward_kinematics, is_valid_state, transition_cost, Configuration};
use crate::{Point2, Point3};

/// Plans with the CMA-ES successor generator configured in `cfg.optimizer`.
pub fn plan(problem: &Problem, cfg: &PlannerConfig) -> Result<PlanOutcome, PlanError> {
    let generator = CmaesGenerator { settings: cfg.optimizer.clone() };
    plan_with_generator(problem, cfg, &generator)
}

enum QueueKind {
    Anchor,
    Plain,
    Class(HSignature),
}

struct Heuristics {
    kinds: Vec<QueueKind>,
    plain: Option<PlainDistanceMap>,
    classes: Option<HomotopyDistanceMap>,
    goal: Point3,
    eps_pos: f64,
}

impl Heuristics {
    fn build(problem: &Problem, cfg: &PlannerConfig) -> Result<Self, PlanError> {
        let goal = problem.goal.position;
        let g_proj = project(&goal);
        let res = problem.df.resolution();
        let mut h = Self { kinds: vec![QueueKind::Anchor], plain: None, classes: None, goal, eps_pos: cfg.eps_pos };
        let mut use_plain = matches!(cfg.heuristic_mode, HeuristicMode::Bfs);
        if let HeuristicMode::Homotopy { k } = cfg.heuristic_mode {
            let classes =
                detect_relevant_classes(&problem.env, &problem.beams, &problem.spec, &problem.start, &g_proj, k)?;
            if classes.is_empty() {
                log::warn!("no passage sequence reaches the goal; using the plain grid distance");
                use_plain = true;
            } else {
                let sigs: Vec<HSignature> = classes.iter().map(|c| c.signature.clone()).collect();
                let opts = crate::homotopy::MapOptions { resolution: res, ..cfg.map };
                h.classes = Some(build_homotopy_distance_map(&problem.env, &problem.beams, &g_proj, Some(&sigs), &opts)?);
                h.kinds.extend(sigs.into_iter().map(QueueKind::Class));
            }
        }
        if use_plain {
            h.plain = Some(PlainDistanceMap::build(&problem.env, &problem.beams, &g_proj, res)?);
            h.kinds.push(QueueKind::Plain);
        }
        Ok(h)
    }

    fn lift(&self, planar: f64, tip: &Point3) -> f64 {
        if !planar.is_finite() {
            return f64::INFINITY;
        }
        let dy = tip.y - self.goal.y;
        ((planar * planar + dy * dy).sqrt() - self.eps_pos).max(0.0)
    }

    /// Per-queue values for a body polyline ending at `tip`.
    fn eval(&self, problem: &Problem, body: &[Point3], tip: &Point3) -> Vec<f64> {
        let tip_proj = project(tip);
        let mut sig: Option<HSignature> = None;
        self.kinds
            .iter()
            .map(|kind| match kind {
                QueueKind::Anchor => ((tip - self.goal).norm() - self.eps_pos).max(0.0),
                QueueKind::Plain => self.lift(self.plain.as_ref().unwrap().query(&tip_proj), tip),
                QueueKind::Class(goal_sig) => {
                    let s = sig.get_or_insert_with(|| {
                        let pts: Vec<Point2> = body.iter().map(project).collect();
                        signature_of_polyline(&problem.beams, &pts)
                    });
                    let map = self.classes.as_ref().unwrap();
                    let rest = remainder_signature(s, goal_sig);
                    self.lift(map.query(&tip_proj, &rest, &problem.beams), tip)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    Real(u32),
    Pseudo(u32),
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    f: f64,
    g: f64,
    seq: u64,
    item: Item,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // Greater pops first: smaller f, then larger g, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(self.g.total_cmp(&other.g)).then(other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<QueueEntry>,
    best_h: f64,
    window: StagnationWindow,
}

struct Node {
    config: Configuration,
    tip: Point3,
    g: f64,
    h: Vec<f64>,
    parent: Option<u32>,
    closed: bool,
}

struct Pseudo {
    parent: u32,
    target: Point3,
    target_index: usize,
    g_est: f64,
    done: bool,
}

enum Step {
    Continue,
    Found(u32),
}

struct Search<'a, G: NeighborGenerator + ?Sized> {
    problem: &'a Problem,
    cfg: &'a PlannerConfig,
    generator: &'a G,
    heur: Heuristics,
    queues: Vec<Queue>,
    nodes: Vec<Node>,
    pseudos: Vec<Pseudo>,
    index: HashMap<Vec<i64>, u32>,
    seq: u64,
    stats: PlanStats,
    /// Whether the last expansion lowered its queue's best heuristic.
    last_reward: bool,
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl<'a, G: NeighborGenerator + ?Sized> Search<'a, G> {
    fn key(&self, c: &Configuration) -> Vec<i64> {
        let start = &self.problem.start;
        let hp = self.cfg.deltas.prismatic / 2.0;
        let hr = self.cfg.deltas.revolute / 2.0;
        let mut k = Vec::with_capacity(c.dof());
        k.push(((c.l - start.l) / hp).round() as i64);
        for i in 0..c.num_units() {
            k.push(((c.pitch[i] - start.pitch[i]) / hr).round() as i64);
            k.push(((c.yaw[i] - start.yaw[i]) / hr).round() as i64);
        }
        k
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn push_all(&mut self, item: Item, g: f64, h: &[f64], seq: u64) {
        let w = self.cfg.heuristic_weight;
        for (q, hq) in self.queues.iter_mut().zip(h) {
            if hq.is_finite() {
                q.heap.push(QueueEntry { f: g + w * hq, g, seq, item });
            }
        }
    }

    /// Adds `config` reached from `parent` with cost `g`, or improves the
    /// existing node with the same key. Returns false if nothing changed.
    fn insert(&mut self, config: Configuration, g: f64, parent: Option<u32>, seq: u64) -> bool {
        let key = self.key(&config);
        let idx = match self.index.entry(key) {
            MapEntry::Occupied(e) => {
                let i = *e.get();
                let n = &self.nodes[i as usize];
                if n.closed || g >= n.g {
                    return false;
                }
                i
            }
            MapEntry::Vacant(e) => {
                let i = self.nodes.len() as u32;
                e.insert(i);
                self.nodes.push(Node {
                    config: config.clone(),
                    tip: Point3::origin(),
                    g,
                    h: Vec::new(),
                    parent,
                    closed: false,
                });
                i
            }
        };
        let body = forward_kinematics(&self.problem.spec, &config);
        let tip = body.tip();
        let h = self.heur.eval(self.problem, body.points(), &tip);
        for (q, hq) in self.queues.iter_mut().zip(&h) {
            q.best_h = q.best_h.min(*hq);
        }
        self.push_all(Item::Real(idx), g, &h, seq);
        let n = &mut self.nodes[idx as usize];
        n.config = config;
        n.tip = tip;
        n.g = g;
        n.h = h;
        n.parent = parent;
        true
    }

    fn generator_seed(&self, parent: &Configuration, target_index: usize) -> u64 {
        let mut s = mix(self.cfg.seed ^ 0x5851f42d4c957f2d);
        for v in parent.to_vector() {
            s = mix(s ^ v.to_bits());
        }
        mix(s ^ target_index as u64)
    }

    /// Runs the generator from `parent` toward `target` and inserts a valid
    /// result with sequence number `seq`. Returns the inserted g, if any.
    fn generate_and_insert(&mut self, parent: u32, target: &Point3, target_index: usize, seq: u64) -> Option<f64> {
        let from = self.nodes[parent as usize].config.clone();
        let seed = self.generator_seed(&from, target_index);
        let out = self.generator.generate(self.problem, &from, target, seed);
        self.stats.optimizer_calls += 1;
        self.stats.evaluations += out.evaluations;
        let Some(cand) = out.config else {
            log::trace!("generator did not converge");
            return None;
        };
        if let Some(&j) = self.index.get(&self.key(&cand)) {
            if self.nodes[j as usize].closed {
                log::trace!("generated state already closed");
                return None;
            }
        }
        let spec = &self.problem.spec;
        let (ok, checked) = check_transition(spec, &self.problem.df, &from, &cand, self.cfg.steps, true);
        self.stats.evaluations += checked as u64;
        if !ok {
            log::trace!("generated transition invalid");
            return None;
        }
        let g = self.nodes[parent as usize].g + transition_cost(spec, &from, &cand);
        self.insert(cand, g, Some(parent), seq);
        Some(g)
    }

    fn resolve_pseudo(&mut self, p: u32, seq: u64) {
        let ps = &mut self.pseudos[p as usize];
        ps.done = true;
        let (parent, target, ti, g_est) = (ps.parent, ps.target, ps.target_index, ps.g_est);
        self.stats.pseudostates_popped += 1;
        match self.generate_and_insert(parent, &target, ti, seq) {
            Some(g) => {
                self.stats.pseudostates_reinserted += 1;
                if g < g_est {
                    self.stats.pseudo_g_violations += 1;
                }
            }
            None => self.stats.pseudostates_discarded += 1,
        }
    }

    fn expand(&mut self, i: u32, q: usize) -> Step {
        if self.nodes[i as usize].closed {
            self.stats.reexpansions += 1;
        }
        self.nodes[i as usize].closed = true;
        self.stats.expansions += 1;
        self.stats.queue_expansions[q] += 1;
        let problem = self.problem;
        let cfg = self.cfg;
        let config = self.nodes[i as usize].config.clone();
        if goal_check(&problem.spec, &config, &problem.goal, cfg.eps_pos, cfg.eps_axis) {
            return Step::Found(i);
        }
        let stagnating = self.queues[q].window.is_stagnating();
        let before = self.queues[q].best_h;
        let g = self.nodes[i as usize].g;

        for succ in predefined_successors(&problem.spec, &config, &cfg.deltas) {
            if let Some(&j) = self.index.get(&self.key(&succ)) {
                if self.nodes[j as usize].closed {
                    continue;
                }
            }
            let (ok, checked) = check_transition(&problem.spec, &problem.df, &config, &succ, cfg.steps, true);
            self.stats.evaluations += checked as u64;
            if !ok {
                continue;
            }
            let g2 = g + transition_cost(&problem.spec, &config, &succ);
            let seq = self.next_seq();
            self.insert(succ, g2, Some(i), seq);
        }

        if stagnating && cfg.action_mode != ActionMode::PredefinedOnly {
            let body = forward_kinematics(&problem.spec, &config);
            let targets = six_connected_ee_goals(&problem.spec, &config, cfg.eps);
            for (ti, target) in targets.iter().enumerate() {
                let seq = self.next_seq();
                match cfg.action_mode {
                    ActionMode::OptEager => {
                        self.generate_and_insert(i, target, ti, seq);
                    }
                    ActionMode::OptLazy => {
                        // The tip moves by eps up to the reach tolerance.
                        let g_est = g + (cfg.eps - cfg.optimizer.eps_reach).max(0.0);
                        let mut pts = body.points().to_vec();
                        pts.push(*target);
                        let h = self.heur.eval(problem, &pts, target);
                        let p = self.pseudos.len() as u32;
                        self.pseudos.push(Pseudo { parent: i, target: *target, target_index: ti, g_est, done: false });
                        self.stats.pseudostates_inserted += 1;
                        self.push_all(Item::Pseudo(p), g_est, &h, seq);
                    }
                    ActionMode::PredefinedOnly => unreachable!(),
                }
            }
        }

        let queue = &mut self.queues[q];
        let improved = queue.best_h < before;
        let best = queue.best_h;
        queue.window.push(best);
        self.last_reward = improved;
        Step::Continue
    }

    /// Pops the best live real node from queue `q`, resolving pseudostates
    /// on the way.
    fn pop_real(&mut self, q: usize) -> Option<u32> {
        while let Some(e) = self.queues[q].heap.pop() {
            match e.item {
                Item::Real(i) => {
                    let n = &self.nodes[i as usize];
                    if n.g != e.g {
                        continue;
                    }
                    if n.closed {
                        // Copies of an expanded node remain in other queues.
                        continue;
                    }
                    return Some(i);
                }
                Item::Pseudo(p) => {
                    if !self.pseudos[p as usize].done {
                        self.resolve_pseudo(p, e.seq);
                    }
                }
            }
        }
        None
    }

    fn extract(&self, goal: u32) -> Result<Plan, PlanError> {
        let mut chain = vec![goal];
        while let Some(p) = self.nodes[*chain.last().unwrap() as usize].parent {
            chain.push(p);
        }
        chain.reverse();
        let states: Vec<Configuration> = chain.iter().map(|&i| self.nodes[i as usize].config.clone()).collect();
        let mut cost = 0.0;
        for w in states.windows(2) {
            cost += transition_cost(&self.problem.spec, &w[0], &w[1]);
        }
        let stored = self.nodes[goal as usize].g;
        if (cost - stored).abs() > 1e-9 {
            return Err(PlanError::CostMismatch { summed: cost, stored });
        }
        Ok(Plan { states, cost: stored })
    }
}

/// Plans with an arbitrary successor generator.
pub fn plan_with_generator<G: NeighborGenerator + ?Sized>(
    problem: &Problem,
    cfg: &PlannerConfig,
    generator: &G,
) -> Result<PlanOutcome, PlanError> {
    let t0 = Instant::now();
    cfg.validate()?;
    problem.spec.validate()?;
    problem.start.check_dimension(&problem.spec)?;
    if !problem.env.bounds().contains(&problem.goal.position) {
        return Err(PlanError::GoalOutOfBounds);
    }
    if !is_valid_state(&problem.spec, &problem.df, &problem.start) {
        return Err(PlanError::InvalidStart);
    }
    let mut stats = PlanStats::default();
    if goal_check(&problem.spec, &problem.start, &problem.goal, cfg.eps_pos, cfg.eps_axis) {
        stats.num_queues = 1;
        stats.queue_expansions = vec![0];
        return Ok(PlanOutcome {
            plan: Some(Plan { states: vec![problem.start.clone()], cost: 0.0 }),
            failure: None,
            stats,
        });
    }

    let heur = Heuristics::build(problem, cfg)?;
    let nq = heur.kinds.len();
    stats.num_queues = nq;
    stats.queue_expansions = vec![0; nq];
    let tol = cfg.stagnation_tolerance();
    let queues = (0..nq)
        .map(|_| Queue {
            heap: BinaryHeap::new(),
            best_h: f64::INFINITY,
            window: StagnationWindow::new(cfg.stagnation_window, tol),
        })
        .collect();
    let mut s = Search {
        problem,
        cfg,
        generator,
        heur,
        queues,
        nodes: Vec::new(),
        pseudos: Vec::new(),
        index: HashMap::new(),
        seq: 0,
        stats,
        last_reward: false,
    };
    s.insert(problem.start.clone(), 0.0, None, 0);
    s.stats.setup_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed));
    let mut dts = Dts::new(nq, cfg.dts_cap);
    let mut rr = RoundRobin::default();
    let failure = loop {
        if cfg.timeout.is_some_and(|t| t1.elapsed().as_secs_f64() >= t) {
            break FailureReason::Timeout;
        }
        if cfg.eval_budget.is_some_and(|b| s.stats.evaluations >= b) {
            break FailureReason::BudgetExhausted;
        }
        let eligible: Vec<bool> = s.queues.iter().map(|q| !q.heap.is_empty()).collect();
        let chosen = match cfg.scheduler {
            SchedulerMode::Dts => dts.select(&eligible, &mut rng),
            SchedulerMode::RoundRobin => rr.select(&eligible),
        };
        let Some(q) = chosen else {
            break FailureReason::OpenExhausted;
        };
        let Some(i) = s.pop_real(q) else {
            continue;
        };
        match s.expand(i, q) {
            Step::Found(goal) => {
                let plan = s.extract(goal)?;
                s.stats.search_seconds = t1.elapsed().as_secs_f64();
                return Ok(PlanOutcome { plan: Some(plan), failure: None, stats: s.stats });
            }
            Step::Continue => {
                if cfg.scheduler == SchedulerMode::Dts {
                    dts.reward(q, s.last_reward);
                }
            }
        }
    };
    s.stats.search_seconds = t1.elapsed().as_secs_f64();
    Ok(PlanOutcome { plan: None, failure: Some(failure), stats: s.stats })
}
