use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use flowcert::bounds::{LowerStatus, SearchBudget, VerifyOutcome};
use flowcert::perturb::Instruction;
use flowcert::NormKind;
use serde::Serialize;

use crate::args::Setup;

pub const EXIT_COMPLETED: u8 = 0;
pub const EXIT_ADVERSARIAL: u8 = 2;
pub const EXIT_CERTIFIED: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// An adversarial grid point was found in the ball.
    Adversarial,
    /// The whole ball was searched and nothing is adversarial.
    Certified,
    /// The budget ran out first.
    Completed,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Adversarial => EXIT_ADVERSARIAL,
            Outcome::Certified => EXIT_CERTIFIED,
            Outcome::Completed => EXIT_COMPLETED,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TauBoundReport {
    pub margin: f64,
    pub lipschitz_sum: f64,
    pub input_width: f64,
    pub kappa: f64,
}

#[derive(Debug, Serialize)]
pub struct WitnessReport {
    pub instruction: Instruction,
    /// Compact form, e.g. `{1:5:u=+1;1:6:v=-2}`.
    pub text: String,
    pub distance: f64,
    pub class: usize,
    pub class_name: String,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub weights: String,
    pub video: String,
    pub norm: NormKind,
    pub radius: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub tau_source: &'static str,
    pub tau_bound: Option<TauBoundReport>,
    pub dim_count: usize,
    pub grid_width: f64,
    pub flows: Vec<usize>,
    pub pixel_mask: Option<Vec<usize>>,
    pub max_moves: Option<usize>,
    pub label: usize,
    pub label_name: String,
    pub budget: SearchBudget,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub interval: Option<[f64; 2]>,
    pub witness: Option<WitnessReport>,
    pub lower_status: LowerStatus,
    pub upper_iterations: u64,
    pub lower_expansions: u64,
    pub outcome: Outcome,
    pub exit_code: u8,
}

/// What a verification run concluded.
pub fn outcome(out: &VerifyOutcome) -> Outcome {
    if out.witness.is_some() {
        Outcome::Adversarial
    } else if out.certified() {
        Outcome::Certified
    } else {
        Outcome::Completed
    }
}

pub struct Parts {
    pub command: &'static str,
    pub weights: String,
    pub video: String,
    pub has_upper: bool,
    pub has_lower: bool,
}

pub fn build(parts: Parts, setup: &Setup, budget: SearchBudget, out: &VerifyOutcome) -> Result<Report> {
    let game = &setup.game;
    let c = game.config();
    let witness = match &out.witness {
        Some(ins) => {
            let class = game.evaluate(ins)?.class;
            Some(WitnessReport {
                instruction: ins.clone(),
                text: ins.to_string(),
                distance: game.distance(ins),
                class,
                class_name: c.network.classes()[class].clone(),
            })
        }
        None => None,
    };
    let outcome = outcome(out);
    Ok(Report {
        command: parts.command,
        weights: parts.weights,
        video: parts.video,
        norm: c.norm,
        radius: c.radius,
        epsilon: c.epsilon,
        tau: c.tau,
        tau_source: if setup.tau.bound.is_some() { "auto" } else { "given" },
        tau_bound: setup.tau.bound.map(|(b, kappa)| TauBoundReport {
            margin: b.margin,
            lipschitz_sum: b.lipschitz_sum,
            input_width: b.input_width,
            kappa,
        }),
        dim_count: game.dim_count(),
        grid_width: out.grid_width,
        flows: game.flows().to_vec(),
        pixel_mask: c.pixel_mask.clone(),
        max_moves: c.max_moves,
        label: game.label(),
        label_name: c.network.classes()[game.label()].clone(),
        budget,
        upper: parts.has_upper.then_some(out.upper),
        lower: parts.has_lower.then_some(out.lower),
        interval: (parts.has_upper && parts.has_lower).then_some([out.interval.0, out.interval.1]),
        witness,
        lower_status: out.lower_status,
        upper_iterations: out.upper_iterations,
        lower_expansions: out.lower_expansions,
        outcome,
        exit_code: outcome.exit_code(),
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
