//! Best-first search whose expanded keys are certified lower bounds.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;

use super::upper::outward_moves;
use crate::error::Result;
use crate::game::Game;
use crate::perturb::{grid_width, Instruction};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeuristicMode {
    #[default]
    Admissible,
    /// Uniform-cost search.
    Zero,
}

/// The cheapest outward one-move extension of `ins` that stays in the ball
/// and under the move cap. Distances depend only on the multiset of
/// `|Θ_i|`, so bumping the first untouched dimension or the smallest touched
/// one covers every norm.
fn cheapest_child(game: &Game, ins: &Instruction) -> Option<f64> {
    if !game.depth_left(ins.moves() as usize) {
        return None;
    }
    let mut candidates = Vec::with_capacity(2);
    if ins.len() < game.dim_count() {
        if let Some(k) = game.dims().into_iter().find(|k| ins.get(k) == 0) {
            let mut c = ins.clone();
            c.add(k, 1);
            candidates.push(c);
        }
    }
    if let Some((&k, &v)) = ins.iter().min_by_key(|(_, v)| v.unsigned_abs()) {
        let mut c = ins.clone();
        c.add(k, v.signum());
        candidates.push(c);
    }
    candidates.iter().map(|c| game.distance(c)).filter(|&d| game.within_radius(d)).min_by(f64::total_cmp)
}

/// `DistanceEstimation(s)`: the distance of `ins` plus a lower estimate of
/// the remaining distance to the nearest adversarial point beyond it.
///
/// The estimate is half the grid width over the untouched dimensions, capped
/// by the cheapest single outward move (a non-adversarial node needs at least
/// one more). That move must stay in the ball, which also caps the estimate
/// at the room left to the boundary. Returns `None` for a non-adversarial
/// node with no legal continuation: nothing beyond it can be adversarial.
pub fn estimate(game: &Game, ins: &Instruction, adversarial: bool, mode: HeuristicMode) -> Option<f64> {
    let dist = game.distance(ins);
    if adversarial {
        return Some(dist);
    }
    let next = cheapest_child(game, ins)?;
    if mode == HeuristicMode::Zero {
        return Some(dist);
    }
    let c = game.config();
    let untouched = game.dim_count() - ins.len();
    let half_width = if untouched == 0 { 0.0 } else { grid_width(c.norm, c.tau, untouched) / 2.0 };
    Some((dist + half_width).min(next))
}

#[derive(Clone, Debug)]
struct Entry {
    key: f64,
    dist: f64,
    adversarial: bool,
    ins: Instruction,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then_with(|| self.ins.cmp(&other.ins))
    }
}

/// One expanded node, kept when recording is enabled.
#[derive(Clone, Debug, PartialEq)]
pub struct Expanded {
    pub instruction: Instruction,
    pub distance: f64,
    /// `distance + heuristic`.
    pub key: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AStarStatus {
    Running,
    /// The popped node was adversarial; the lower bound is the exact FMSR.
    Found(Instruction),
    /// No adversarial point in the ball; the lower bound is `d + ε`.
    Exhausted,
}

/// Resumable A*. Each [`step`](Self::step) pops and expands one node.
pub struct AStar<'g> {
    game: &'g Game,
    mode: HeuristicMode,
    heap: BinaryHeap<Reverse<Entry>>,
    seen: HashSet<Instruction>,
    lower: f64,
    expansions: u64,
    status: AStarStatus,
    record: Option<Vec<Expanded>>,
}

impl<'g> AStar<'g> {
    pub fn new(game: &'g Game, mode: HeuristicMode) -> Result<Self> {
        let root = Instruction::new();
        let adversarial = game.evaluate(&root)?.adversarial;
        let mut s = Self {
            game,
            mode,
            heap: BinaryHeap::new(),
            seen: HashSet::from([root.clone()]),
            lower: 0.0,
            expansions: 0,
            status: AStarStatus::Running,
            record: None,
        };
        if let Some(key) = estimate(game, &root, adversarial, mode) {
            s.heap.push(Reverse(Entry { key, dist: 0.0, adversarial, ins: root }));
        }
        Ok(s)
    }

    /// Keep every expanded node for inspection.
    pub fn record_expansions(mut self) -> Self {
        self.record = Some(Vec::new());
        self
    }

    pub fn expanded(&self) -> &[Expanded] {
        self.record.as_deref().unwrap_or(&[])
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn expansions(&self) -> u64 {
        self.expansions
    }

    pub fn status(&self) -> &AStarStatus {
        &self.status
    }

    pub fn is_done(&self) -> bool {
        self.status != AStarStatus::Running
    }

    /// Pop the minimal key. Returns the lower bound if it rose.
    pub fn step(&mut self) -> Result<Option<f64>> {
        if self.is_done() {
            return Ok(None);
        }
        let before = self.lower;
        let Some(Reverse(node)) = self.heap.pop() else {
            self.status = AStarStatus::Exhausted;
            self.lower = self.lower.max(self.game.fallback());
            return Ok((self.lower > before).then_some(self.lower));
        };
        self.expansions += 1;
        self.lower = self.lower.max(node.key);
        if let Some(r) = &mut self.record {
            r.push(Expanded { instruction: node.ins.clone(), distance: node.dist, key: node.key });
        }
        if node.adversarial {
            self.status = AStarStatus::Found(node.ins);
            return Ok((self.lower > before).then_some(self.lower));
        }
        let mut children = Vec::new();
        for key in self.game.dims() {
            for m in outward_moves(self.game, &node.ins, key) {
                let ins = node.ins.with_move(&m);
                if self.seen.insert(ins.clone()) {
                    children.push(ins);
                }
            }
        }
        let entries = children
            .into_par_iter()
            .map(|ins| {
                let adversarial = self.game.evaluate(&ins)?.adversarial;
                let dist = self.game.distance(&ins);
                Ok(estimate(self.game, &ins, adversarial, self.mode).map(|key| Entry { key, dist, adversarial, ins }))
            })
            .collect::<Result<Vec<_>>>()?;
        self.heap.extend(entries.into_iter().flatten().map(Reverse));
        Ok((self.lower > before).then_some(self.lower))
    }

    /// Run until done or `max_expansions` more nodes have been expanded.
    pub fn run(&mut self, max_expansions: Option<u64>) -> Result<f64> {
        let stop = max_expansions.map(|m| self.expansions + m);
        while !self.is_done() && stop.is_none_or(|s| self.expansions < s) {
            self.step()?;
        }
        // An empty heap is only noticed on the next pop.
        if !self.is_done() && self.heap.is_empty() {
            self.step()?;
        }
        Ok(self.lower)
    }
}
