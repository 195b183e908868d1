//! Queue selection and per-queue progress tracking.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Beta, Distribution};

/// Sliding window over a queue's best heuristic value, one entry per
/// expansion from that queue.
#[derive(Debug, Clone)]
pub struct StagnationWindow {
    window: usize,
    tol: f64,
    history: VecDeque<f64>,
}

impl StagnationWindow {
    pub fn new(window: usize, tol: f64) -> Self {
        Self { window: window.max(1), tol, history: VecDeque::with_capacity(window.max(1)) }
    }

    pub fn push(&mut self, best_h: f64) {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(best_h);
    }

    /// True once the window is full and the best value has not dropped by
    /// more than the tolerance across it.
    pub fn is_stagnating(&self) -> bool {
        if self.history.len() < self.window {
            return false;
        }
        let drop = self.history.front().unwrap() - self.history.back().unwrap();
        // Infinite-minus-infinite counts as no progress.
        !(drop > self.tol)
    }
}

/// Beta-Bernoulli bandit arm with a capped pseudo-count total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Arm {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }
}

impl Arm {
    /// Adds the reward, then rescales to total `cap` if exceeded. Both
    /// parameters stay at least 1.
    pub fn update(&mut self, reward: bool, cap: f64) {
        if reward {
            self.alpha += 1.0;
        } else {
            self.beta += 1.0;
        }
        let total = self.alpha + self.beta;
        if total > cap {
            let s = cap / total;
            self.alpha = (self.alpha * s).max(1.0);
            self.beta = (self.beta * s).max(1.0);
        }
    }
}

/// Dynamic Thompson sampling over queues.
#[derive(Debug, Clone)]
pub struct Dts {
    pub arms: Vec<Arm>,
    pub cap: f64,
}

impl Dts {
    pub fn new(num_queues: usize, cap: f64) -> Self {
        Self { arms: vec![Arm::default(); num_queues], cap }
    }

    /// Samples each eligible arm and returns the argmax; lowest index wins
    /// ties. `None` when nothing is eligible.
    pub fn select<R: Rng + ?Sized>(&self, eligible: &[bool], rng: &mut R) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, arm) in self.arms.iter().enumerate() {
            if !eligible[i] {
                continue;
            }
            let theta = Beta::new(arm.alpha, arm.beta).expect("arm parameters are positive").sample(rng);
            if best.map_or(true, |(_, t)| theta > t) {
                best = Some((i, theta));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn reward(&mut self, queue: usize, reward: bool) {
        let cap = self.cap;
        self.arms[queue].update(reward, cap);
    }
}

/// Strict rotation over eligible queues.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    next: usize,
}

impl RoundRobin {
    pub fn select(&mut self, eligible: &[bool]) -> Option<usize> {
        let n = eligible.len();
        let chosen = (0..n).map(|k| (self.next + k) % n).find(|&i| eligible[i])?;
        self.next = (chosen + 1) % n;
        Some(chosen)
    }
}
