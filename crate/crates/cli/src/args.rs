use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use flowcert::bounds::{Clock, HeuristicMode, SearchBudget, UpperConfig, VerifyOptions};
use flowcert::game::{Game, GameConfig};
use flowcert::net::{nnwf, Network, Objective};
use flowcert::perturb::{tau_bound, TauBound};
use flowcert::{pgm, vten, NormKind, Video};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NormArg {
    L1,
    L2,
    Linf,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => NormKind::L1,
            NormArg::L2 => NormKind::L2,
            NormArg::Linf => NormKind::Linf,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObjectiveArg {
    Logit,
    CrossEntropy,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Logit => Objective::LogitDiscrepancy,
            ObjectiveArg::CrossEntropy => Objective::CrossEntropy,
        }
    }
}

/// Inputs and search settings shared by every verification command.
#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// NNWF weight file.
    #[arg(long)]
    pub weights: PathBuf,
    /// VTEN video, or a directory of PGM frames.
    #[arg(long)]
    pub video: PathBuf,
    #[arg(long, value_enum, default_value = "l2")]
    pub norm: NormArg,
    /// Radius `d` of the flow-space ball.
    #[arg(long)]
    pub radius: f64,
    /// Atomic manipulation magnitude.
    #[arg(long, required_unless_present = "auto_tau", conflicts_with = "auto_tau")]
    pub tau: Option<f64>,
    /// Derive `tau` from the confidence margin and Lipschitz bounds.
    #[arg(long)]
    pub auto_tau: bool,
    /// Input-to-flow scale used with `--auto-tau`.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Added to `d` when no adversarial point exists [default: 1e-6 · d].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Upper-bound search iterations.
    #[arg(long)]
    pub ub_iters: Option<u64>,
    /// A* node expansions.
    #[arg(long)]
    pub lb_nodes: Option<u64>,
    /// Wall-clock limit in milliseconds.
    #[arg(long)]
    pub wall_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated 0-based flows that may be manipulated [default: all].
    #[arg(long, value_delimiter = ',')]
    pub flow_mask: Option<Vec<usize>>,
    /// Comma-separated row-major pixels that may be manipulated [default: all].
    #[arg(long, value_delimiter = ',')]
    pub pixel_mask: Option<Vec<usize>>,
    /// Maximum atomic moves per play.
    #[arg(long)]
    pub max_moves: Option<usize>,
    /// Saliency frontier width of the upper-bound search.
    #[arg(long, default_value_t = 8)]
    pub top_k: usize,
    /// Pixel step of the finite-difference saliency.
    #[arg(long, default_value_t = 0.05)]
    pub saliency_step: f64,
    #[arg(long, value_enum, default_value = "logit")]
    pub objective: ObjectiveArg,
    /// Use A* with a zero heuristic (uniform-cost search).
    #[arg(long)]
    pub uniform_cost: bool,
    /// Search steps per turn when interleaving the two searches.
    #[arg(long, default_value_t = 8)]
    pub slice: u64,
    /// Record 0 for every timestamp so traces depend only on the search.
    #[arg(long)]
    pub logical_clock: bool,
    /// Trace CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report JSON output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn read_video(path: &Path) -> Result<Video> {
    let v = if path.is_dir() { pgm::read_video_dir(path) } else { vten::read_video(path) };
    v.with_context(|| format!("reading video {}", path.display()))
}

pub fn read_network(path: &Path) -> Result<Network> {
    nnwf::load_weights(path).with_context(|| format!("reading weights {}", path.display()))
}

/// How `tau` was chosen.
#[derive(Clone, Copy, Debug)]
pub struct TauChoice {
    pub tau: f64,
    pub bound: Option<(TauBound, f64)>,
}

pub struct Setup {
    pub game: Game,
    pub tau: TauChoice,
}

impl RunArgs {
    pub fn norm(&self) -> NormKind {
        self.norm.into()
    }

    pub fn budget(&self) -> Result<SearchBudget> {
        let b = SearchBudget::new(self.ub_iters, self.lb_nodes, self.wall_ms, self.seed)
            .context("give at least one of --ub-iters, --lb-nodes, --wall-ms")?;
        if self.logical_clock && self.ub_iters.is_none() && self.lb_nodes.is_none() {
            bail!("--wall-ms is not enforced with --logical-clock; give --ub-iters or --lb-nodes");
        }
        Ok(b)
    }

    pub fn clock(&self) -> Clock {
        if self.logical_clock {
            Clock::Logical
        } else {
            Clock::wall()
        }
    }

    pub fn options(&self) -> VerifyOptions {
        VerifyOptions {
            upper: UpperConfig { top_k: self.top_k, saliency_step: self.saliency_step },
            heuristic: if self.uniform_cost { HeuristicMode::Zero } else { HeuristicMode::Admissible },
            slice: self.slice,
            ..VerifyOptions::default()
        }
    }

    pub fn setup(&self) -> Result<Setup> {
        self.setup_with_flows(self.flow_mask.clone())
    }

    /// Build the game, overriding the flow mask.
    pub fn setup_with_flows(&self, flow_mask: Option<Vec<usize>>) -> Result<Setup> {
        ensure!(self.radius > 0.0 && self.radius.is_finite(), "--radius must be positive");
        ensure!(self.kappa > 0.0 && self.kappa.is_finite(), "--kappa must be positive");
        let net = read_network(&self.weights)?;
        let video = read_video(&self.video)?;
        net.logits(&video).context("the network cannot take this video")?;
        let norm = self.norm();
        let flows = flow_mask.as_ref().map_or(video.frames().saturating_sub(1), Vec::len);
        let pixels = self.pixel_mask.as_ref().map_or(video.height() * video.width(), Vec::len);
        let dims = flows * pixels * 2;
        let tau = match self.tau {
            Some(t) => TauChoice { tau: t, bound: None },
            None => {
                let b = tau_bound(&net, &video, norm)?;
                let t = b.flow_tau(self.kappa, norm, dims.max(1));
                ensure!(t > 0.0 && t.is_finite(), "derived tau {t} is not positive; the video sits on a decision boundary");
                TauChoice { tau: t, bound: Some((b, self.kappa)) }
            }
        };
        let mut cfg = GameConfig::new(Arc::new(net), video, norm, self.radius, tau.tau)?;
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        cfg.flow_mask = flow_mask;
        cfg.pixel_mask = self.pixel_mask.clone();
        cfg.max_moves = self.max_moves;
        cfg.objective = self.objective.into();
        Ok(Setup { game: Game::new(cfg)?, tau })
    }
}
