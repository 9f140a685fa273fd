//! The cooperative two-player game over τ-grid flow manipulations.
//!
//! Player I picks a flow, Player II nudges one component of one pixel of that
//! flow by `±τ`. A play ends when the manipulated clip is misclassified or
//! leaves the norm ball around the original flows.

mod brute;
mod reward;

pub use brute::{brute_force, brute_force_fmsr, enumerate_grid, write_oracle_csv, BruteForce, GridPoint, MAX_LEAVES};
pub use reward::{reward, GameAction, GamePath, StrategyProfile};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::flow::{flow_sequence, impose_flow, Component, FlowSequence};
use crate::net::{argmax, Network, Objective};
use crate::perturb::{apply_manipulation, AtomicMove, DimKey, Instruction};
use crate::tensor::{NormKind, Video};

/// Relative slack on the ball boundary so that grid points exactly at radius
/// `d` are not lost to rounding.
const BALL_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GameConfig {
    pub network: Arc<Network>,
    pub video: Video,
    /// `P(v)`.
    pub flows: FlowSequence,
    pub norm: NormKind,
    pub radius: f64,
    pub tau: f64,
    /// Added to `d` when no adversarial grid point exists in the ball.
    pub epsilon: f64,
    /// Flows Player I may select (0-based); all when `None`.
    pub flow_mask: Option<Vec<usize>>,
    /// Pixels Player II may touch (row-major index); all when `None`.
    pub pixel_mask: Option<Vec<usize>>,
    /// Maximum number of atomic moves in a play.
    pub max_moves: Option<usize>,
    pub objective: Objective,
}

impl GameConfig {
    /// Config over `flow_sequence(video)` with `ε = 1e-6 · d`.
    pub fn new(network: Arc<Network>, video: Video, norm: NormKind, radius: f64, tau: f64) -> Result<Self> {
        let flows = flow_sequence(&video)?;
        Ok(Self {
            network,
            video,
            flows,
            norm,
            radius,
            tau,
            epsilon: 1e-6 * radius,
            flow_mask: None,
            pixel_mask: None,
            max_moves: None,
            objective: Objective::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("radius", self.radius)?;
        positive("tau", self.tau)?;
        positive("epsilon", self.epsilon)?;
        if self.flows.len() + 1 != self.video.frames()
            || self.flows.height() != self.video.height()
            || self.flows.width() != self.video.width()
        {
            return Err(Error::ShapeMismatch("flow sequence does not match the video".into()));
        }
        if let Some(mask) = &self.flow_mask {
            if mask.is_empty() {
                return Err(Error::NoManipulableFlows);
            }
            if let Some(&t) = mask.iter().find(|&&t| t >= self.flows.len()) {
                return Err(Error::IndexOutOfRange(format!("flow {t} of {}", self.flows.len())));
            }
        }
        if let Some(mask) = &self.pixel_mask {
            if mask.is_empty() {
                return Err(Error::InvalidConfig("empty pixel mask".into()));
            }
            if let Some(&p) = mask.iter().find(|&&p| p >= self.flows.pixels()) {
                return Err(Error::IndexOutOfRange(format!("pixel {p} of {}", self.flows.pixels())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Owner {
    PlayerOne,
    /// Player II to move on the selected flow.
    PlayerTwo(usize),
}

impl Owner {
    fn name(self) -> &'static str {
        match self {
            Owner::PlayerOne => "player one",
            Owner::PlayerTwo(_) => "player two",
        }
    }
}

/// A game state. Its flow sequence is `apply_manipulation(P(v), instruction, τ)`,
/// available through [`Game::flow_seq`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    pub instruction: Instruction,
    /// Atomic moves played so far.
    pub depth: usize,
    pub owner: Owner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Terminal {
    Adversarial,
    OutOfBall,
    No,
}

/// Classification of one manipulated clip.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub logits: Vec<f64>,
    pub class: usize,
    pub adversarial: bool,
    /// The configured objective; larger is closer to misclassification.
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct Game {
    cfg: GameConfig,
    label: usize,
    flows: Vec<usize>,
    pixels: Vec<usize>,
}

impl Game {
    pub fn new(cfg: GameConfig) -> Result<Self> {
        cfg.validate()?;
        let label = cfg.network.classify(&cfg.video)?;
        let mut flows = cfg.flow_mask.clone().unwrap_or_else(|| (0..cfg.flows.len()).collect());
        flows.sort_unstable();
        flows.dedup();
        let mut pixels = cfg.pixel_mask.clone().unwrap_or_else(|| (0..cfg.flows.pixels()).collect());
        pixels.sort_unstable();
        pixels.dedup();
        Ok(Self { cfg, label, flows, pixels })
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    /// `classify(v)`, the label every play tries to change.
    pub fn label(&self) -> usize {
        self.label
    }

    pub fn initial_state(&self) -> GameState {
        GameState { instruction: Instruction::new(), depth: 0, owner: Owner::PlayerOne }
    }

    /// Flows Player I may select, ascending.
    pub fn flows(&self) -> &[usize] {
        &self.flows
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    /// All manipulable dimensions in canonical order.
    pub fn dims(&self) -> Vec<DimKey> {
        let mut out = Vec::with_capacity(self.dim_count());
        for &flow in &self.flows {
            for &pixel in &self.pixels {
                for component in [Component::U, Component::V] {
                    out.push(DimKey { flow, pixel, component });
                }
            }
        }
        out
    }

    pub fn dim_count(&self) -> usize {
        self.flows.len() * self.pixels.len() * 2
    }

    /// `d + ε`.
    pub fn fallback(&self) -> f64 {
        self.cfg.radius + self.cfg.epsilon
    }

    pub fn distance(&self, ins: &Instruction) -> f64 {
        ins.distance(self.cfg.norm, self.cfg.tau)
    }

    pub fn within_radius(&self, dist: f64) -> bool {
        dist <= self.cfg.radius * (1.0 + BALL_SLACK)
    }

    pub fn in_ball(&self, ins: &Instruction) -> bool {
        self.within_radius(self.distance(ins))
    }

    pub fn depth_left(&self, depth: usize) -> bool {
        self.cfg.max_moves.is_none_or(|cap| depth < cap)
    }

    pub fn flow_seq(&self, s: &GameState) -> Result<FlowSequence> {
        apply_manipulation(&self.cfg.flows, &s.instruction, self.cfg.tau)
    }

    /// The clip obtained by imposing the manipulated flows on `v`.
    pub fn manipulated_video(&self, ins: &Instruction) -> Result<Video> {
        impose_flow(&self.cfg.video, &apply_manipulation(&self.cfg.flows, ins, self.cfg.tau)?)
    }

    pub fn evaluate(&self, ins: &Instruction) -> Result<Evaluation> {
        self.evaluate_video(&self.manipulated_video(ins)?)
    }

    pub fn evaluate_video(&self, v: &Video) -> Result<Evaluation> {
        let logits = self.cfg.network.logits(v)?;
        let class = argmax(&logits);
        let objective = self.cfg.objective.evaluate(&logits, self.label);
        Ok(Evaluation { adversarial: class != self.label, class, objective, logits })
    }

    pub fn player1_moves(&self, s: &GameState) -> Result<Vec<usize>> {
        match s.owner {
            Owner::PlayerOne => Ok(self.flows.clone()),
            other => Err(Error::WrongOwner { expected: "player one", actual: other.name() }),
        }
    }

    /// Moves on the selected flow that keep the state in the ball, in
    /// pixel-major order with `u` before `v` and `+` before `−`. Empty once
    /// the move cap is reached.
    pub fn player2_moves(&self, s: &GameState) -> Result<Vec<AtomicMove>> {
        let Owner::PlayerTwo(flow) = s.owner else {
            return Err(Error::WrongOwner { expected: "player two", actual: s.owner.name() });
        };
        if !self.depth_left(s.depth) {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for &pixel in &self.pixels {
            for component in [Component::U, Component::V] {
                for sign in [1i8, -1] {
                    let m = AtomicMove { flow, pixel, component, sign };
                    if self.in_ball(&s.instruction.with_move(&m)) {
                        out.push(m);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Player I's transition.
    pub fn select_flow(&self, s: &GameState, flow: usize) -> Result<GameState> {
        if !self.player1_moves(s)?.contains(&flow) {
            return Err(Error::IndexOutOfRange(format!("flow {flow} is not selectable")));
        }
        Ok(GameState { instruction: s.instruction.clone(), depth: s.depth, owner: Owner::PlayerTwo(flow) })
    }

    /// Player II's transition. The move must be on the selected flow; the
    /// ball filter is not applied so that out-of-ball states can be built.
    pub fn apply_move(&self, s: &GameState, m: &AtomicMove) -> Result<GameState> {
        let Owner::PlayerTwo(flow) = s.owner else {
            return Err(Error::WrongOwner { expected: "player two", actual: s.owner.name() });
        };
        if m.flow != flow || !self.pixels.contains(&m.pixel) || m.sign.abs() != 1 {
            return Err(Error::InconsistentPath(format!("move {m:?} is not available on flow {flow}")));
        }
        Ok(GameState { instruction: s.instruction.with_move(m), depth: s.depth + 1, owner: Owner::PlayerOne })
    }

    /// Adversarial is checked before OutOfBall.
    pub fn terminal(&self, s: &GameState) -> Result<Terminal> {
        self.terminal_of(&s.instruction)
    }

    pub fn terminal_of(&self, ins: &Instruction) -> Result<Terminal> {
        if self.evaluate(ins)?.adversarial {
            Ok(Terminal::Adversarial)
        } else if !self.in_ball(ins) {
            Ok(Terminal::OutOfBall)
        } else {
            Ok(Terminal::No)
        }
    }
}
