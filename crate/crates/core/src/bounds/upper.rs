//! Saliency-guided branch-and-bound search for adversarial grid points.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::saliency::{flow_saliency, GradientMap};
use crate::error::Result;
use crate::flow::Component;
use crate::game::Game;
use crate::perturb::{AtomicMove, DimKey, Instruction};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperConfig {
    /// Width of the saliency frontier considered at every node.
    pub top_k: usize,
    /// Pixel-intensity step of the finite-difference saliency.
    pub saliency_step: f64,
}

impl Default for UpperConfig {
    fn default() -> Self {
        Self { top_k: 8, saliency_step: 0.05 }
    }
}

/// Moves from `ins` that move one dimension further from zero, stay in the
/// ball and respect the move cap.
pub(crate) fn outward_moves(game: &Game, ins: &Instruction, key: DimKey) -> Vec<AtomicMove> {
    if !game.depth_left(ins.moves() as usize) {
        return Vec::new();
    }
    let signs: &[i8] = match ins.get(&key) {
        0 => &[1, -1],
        v if v > 0 => &[1],
        _ => &[-1],
    };
    signs
        .iter()
        .map(|&sign| AtomicMove { flow: key.flow, pixel: key.pixel, component: key.component, sign })
        .filter(|m| game.in_ball(&ins.with_move(m)))
        .collect()
}

struct Node {
    ins: Instruction,
    dist: f64,
}

/// Resumable depth-first search. Each [`step`](Self::step) expands one node.
pub struct UpperSearch<'g> {
    game: &'g Game,
    top_k: usize,
    order: Vec<DimKey>,
    stack: Vec<Node>,
    visited: HashSet<Instruction>,
    rng: ChaCha8Rng,
    best: Option<(f64, Instruction)>,
    iterations: u64,
    evaluations: u64,
}

impl<'g> UpperSearch<'g> {
    /// Rank dimensions by saliency and start from `s₀`.
    pub fn new(game: &'g Game, cfg: UpperConfig, seed: u64) -> Result<Self> {
        let c = game.config();
        let sal = flow_saliency(
            &c.network,
            &c.video,
            cfg.saliency_step,
            game.label(),
            c.objective,
            c.norm,
            game.flows(),
            game.pixels(),
        )?;
        Self::with_order(game, cfg.top_k, rank_dims(game, &sal), seed)
    }

    /// Search over an explicit dimension ranking.
    pub fn with_order(game: &'g Game, top_k: usize, order: Vec<DimKey>, seed: u64) -> Result<Self> {
        let root = Instruction::new();
        let mut s = Self {
            game,
            top_k: top_k.max(1),
            order,
            stack: Vec::new(),
            visited: HashSet::from([root.clone()]),
            rng: ChaCha8Rng::seed_from_u64(seed),
            best: None,
            iterations: 0,
            evaluations: 1,
        };
        if game.evaluate(&root)?.adversarial {
            s.best = Some((0.0, root));
        } else {
            s.stack.push(Node { ins: root, dist: 0.0 });
        }
        Ok(s)
    }

    pub fn order(&self) -> &[DimKey] {
        &self.order
    }

    pub fn is_done(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn best(&self) -> Option<&(f64, Instruction)> {
        self.best.as_ref()
    }

    /// Current upper bound: the best adversarial distance, else `d + ε`.
    pub fn upper(&self) -> f64 {
        self.best.as_ref().map_or(self.game.fallback(), |b| b.0)
    }

    /// Adopt an adversarial point found elsewhere if it is better.
    pub fn offer(&mut self, dist: f64, ins: &Instruction) -> bool {
        if self.improves(dist, ins) {
            self.best = Some((dist, ins.clone()));
            true
        } else {
            false
        }
    }

    fn improves(&self, dist: f64, ins: &Instruction) -> bool {
        match &self.best {
            None => true,
            Some((d, i)) => dist < *d || (dist == *d && ins < i),
        }
    }

    fn bound(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    /// Expand the next live node. Returns the new upper bound if it improved.
    pub fn step(&mut self) -> Result<Option<f64>> {
        let node = loop {
            match self.stack.pop() {
                None => return Ok(None),
                Some(n) if n.dist >= self.bound() => continue,
                Some(n) => break n,
            }
        };
        self.iterations += 1;
        let mut children = Vec::new();
        let mut taken = 0;
        for &key in &self.order {
            if taken == self.top_k {
                break;
            }
            let moves = outward_moves(self.game, &node.ins, key);
            if moves.is_empty() {
                continue;
            }
            taken += 1;
            for m in moves {
                let ins = node.ins.with_move(&m);
                if self.visited.insert(ins.clone()) {
                    children.push(ins);
                }
            }
        }
        let evals = children
            .par_iter()
            .map(|ins| self.game.evaluate(ins))
            .collect::<Result<Vec<_>>>()?;
        self.evaluations += children.len() as u64;

        let before = self.bound();
        let mut live = Vec::new();
        for (ins, ev) in children.into_iter().zip(evals) {
            let dist = self.game.distance(&ins);
            if ev.adversarial {
                if self.improves(dist, &ins) {
                    self.best = Some((dist, ins));
                }
            } else {
                live.push((ins, dist, ev.objective));
            }
        }
        let bound = self.bound();
        live.retain(|c| c.1 < bound);
        live.shuffle(&mut self.rng);
        // Stable sort keeps the shuffled order among equal objectives.
        live.sort_by(|a, b| b.2.total_cmp(&a.2));
        self.stack.extend(live.into_iter().rev().map(|(ins, dist, _)| Node { ins, dist }));
        Ok((bound < before).then_some(bound))
    }
}

/// Player I's flow order (descending saliency mass), then pixels by
/// descending absolute saliency, `u` before `v`.
pub fn rank_dims(game: &Game, sal: &GradientMap) -> Vec<DimKey> {
    let mut flows = game.flows().to_vec();
    flows.sort_by(|&a, &b| sal.mass(b).total_cmp(&sal.mass(a)).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(game.dim_count());
    for t in flows {
        let g = sal.maps[t].values();
        let mut pixels = game.pixels().to_vec();
        pixels.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
        for pixel in pixels {
            for component in [Component::U, Component::V] {
                out.push(DimKey { flow: t, pixel, component });
            }
        }
    }
    out
}
