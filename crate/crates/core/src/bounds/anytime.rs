//! Interleaved upper- and lower-bound searches with a merged trace.

use serde::{Deserialize, Serialize};

use super::astar::{AStar, AStarStatus, HeuristicMode};
use super::trace::{BoundKind, BoundsTrace, Clock, SearchBudget, TraceEntry};
use super::upper::{UpperConfig, UpperSearch};
use crate::error::Result;
use crate::game::Game;
use crate::perturb::{msr_interval, GridSpec, Instruction};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub upper: UpperConfig,
    pub heuristic: HeuristicMode,
    /// Steps each search takes before handing over to the other.
    pub slice: u64,
    pub run_upper: bool,
    pub run_lower: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { upper: UpperConfig::default(), heuristic: HeuristicMode::Admissible, slice: 8, run_upper: true, run_lower: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerStatus {
    NotRun,
    /// Stopped by the budget; the lower bound is sound but may be loose.
    Budget,
    /// The search reached an adversarial node: the lower bound is the FMSR.
    Exact,
    /// The whole ball was searched without finding an adversarial point.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub trace: BoundsTrace,
    /// Best adversarial distance found, else `d + ε`.
    pub upper: f64,
    /// Certified lower bound on the FMSR.
    pub lower: f64,
    /// Replayable adversarial instruction whose distance is `upper`.
    pub witness: Option<Instruction>,
    /// The witness behind every upper-bound trace entry below `d + ε`, in
    /// trace order.
    pub upper_witnesses: Vec<Instruction>,
    /// Range containing the MSR: `[max(lower − d̃/2, 0), upper]`.
    pub interval: (f64, f64),
    pub grid_width: f64,
    pub lower_status: LowerStatus,
    pub upper_iterations: u64,
    pub lower_expansions: u64,
}

impl VerifyOutcome {
    pub fn adversarial_found(&self) -> bool {
        self.witness.is_some()
    }

    /// No adversarial grid point exists in the ball.
    pub fn certified(&self) -> bool {
        self.lower_status == LowerStatus::Exhausted
    }
}

struct Recorder<'c> {
    trace: BoundsTrace,
    witnesses: Vec<Instruction>,
    clock: &'c Clock,
}

impl Recorder<'_> {
    fn push(&mut self, kind: BoundKind, value: f64, iteration: u64, nodes_expanded: u64) {
        self.trace.push(TraceEntry { iteration, wall_ms: self.clock.elapsed_ms(), kind, value, nodes_expanded });
    }

    fn push_upper(&mut self, best: &(f64, Instruction), iteration: u64, nodes_expanded: u64) {
        self.push(BoundKind::Upper, best.0, iteration, nodes_expanded);
        self.witnesses.push(best.1.clone());
    }
}

fn under(limit: Option<u64>, used: u64) -> bool {
    limit.is_none_or(|l| used < l)
}

/// Alternate slices of the upper-bound search (bounded by
/// `budget.max_iterations`) and A* (bounded by `budget.max_nodes`) until the
/// bounds meet, both searches finish, or the budget runs out.
///
/// Trace rows carry the producing search's step count as `iteration` and the
/// combined steps of both searches as `nodes_expanded`.
pub fn verify_anytime(game: &Game, budget: &SearchBudget, opts: &VerifyOptions, clock: &Clock) -> Result<VerifyOutcome> {
    budget.validate()?;
    let c = game.config();
    let spec = GridSpec::new(c.tau, c.norm, c.radius, game.dim_count())?;
    let mut rec = Recorder { trace: BoundsTrace::new(), witnesses: Vec::new(), clock };

    let mut upper = if opts.run_upper { Some(UpperSearch::new(game, opts.upper, budget.seed)?) } else { None };
    let mut lower = if opts.run_lower { Some(AStar::new(game, opts.heuristic)?) } else { None };
    let steps = |u: &Option<UpperSearch>, l: &Option<AStar>| {
        u.as_ref().map_or(0, |u| u.iterations()) + l.as_ref().map_or(0, |l| l.expansions())
    };

    // Best adversarial point: the UB search's incumbent, or A*'s when the UB
    // search is not running.
    let mut best: Option<(f64, Instruction)> = None;
    if let Some(u) = &upper {
        if let Some(b) = u.best() {
            rec.push_upper(b, 0, 0);
            best = Some(b.clone());
        }
    }
    let mut lb = 0.0;
    let slice = opts.slice.max(1);

    loop {
        let ub_now = best.as_ref().map_or(game.fallback(), |b| b.0);
        if lb >= ub_now || budget.wall_exhausted(clock) {
            break;
        }
        let mut progressed = false;

        if let Some(u) = upper.as_mut() {
            for _ in 0..slice {
                if u.is_done() || !under(budget.max_iterations, u.iterations()) || budget.wall_exhausted(clock) {
                    break;
                }
                progressed = true;
                if u.step()?.is_some() {
                    best = u.best().cloned();
                    let n = u.iterations() + lower.as_ref().map_or(0, |l| l.expansions());
                    rec.push_upper(best.as_ref().expect("an improved bound has a witness"), u.iterations(), n);
                }
                if best.as_ref().is_some_and(|b| b.0 <= lb) {
                    break;
                }
            }
        }

        if let Some(a) = lower.as_mut() {
            for _ in 0..slice {
                if a.is_done() || !under(budget.max_nodes, a.expansions()) || budget.wall_exhausted(clock) {
                    break;
                }
                progressed = true;
                let rose = a.step()?;
                let n = upper.as_ref().map_or(0, |u| u.iterations()) + a.expansions();
                match a.status().clone() {
                    AStarStatus::Found(ins) => {
                        let d = game.distance(&ins);
                        let improves = match &best {
                            None => true,
                            Some((bd, bi)) => d < *bd || (d == *bd && ins < *bi),
                        };
                        if improves {
                            if let Some(u) = upper.as_mut() {
                                u.offer(d, &ins);
                            }
                            let b = (d, ins);
                            rec.push_upper(&b, a.expansions(), n);
                            best = Some(b);
                        }
                    }
                    AStarStatus::Exhausted | AStarStatus::Running => {}
                }
                if let Some(v) = rose {
                    lb = v;
                    rec.push(BoundKind::Lower, v, a.expansions(), n);
                }
                if a.is_done() {
                    break;
                }
            }
        }

        if !progressed {
            break;
        }
    }

    let n = steps(&upper, &lower);
    let ub = best.as_ref().map_or(game.fallback(), |b| b.0);
    if best.is_none() && rec.trace.last(BoundKind::Upper) != Some(ub) {
        rec.push(BoundKind::Upper, ub, upper.as_ref().map_or(0, |u| u.iterations()), n);
    }
    if lower.is_some() && rec.trace.last(BoundKind::Lower).is_none() {
        rec.push(BoundKind::Lower, lb, lower.as_ref().map_or(0, |a| a.expansions()), n);
    }

    let lower_status = match lower.as_ref().map(|a| a.status()) {
        None => LowerStatus::NotRun,
        Some(AStarStatus::Running) => LowerStatus::Budget,
        Some(AStarStatus::Found(_)) => LowerStatus::Exact,
        Some(AStarStatus::Exhausted) => LowerStatus::Exhausted,
    };
    Ok(VerifyOutcome {
        trace: rec.trace,
        upper: ub,
        lower: lb,
        witness: best.map(|b| b.1),
        upper_witnesses: rec.witnesses,
        interval: (msr_interval(lb, &spec).0, ub),
        grid_width: spec.width(),
        lower_status,
        upper_iterations: upper.as_ref().map_or(0, |u| u.iterations()),
        lower_expansions: lower.as_ref().map_or(0, |a| a.expansions()),
    })
}

/// Upper-bound search alone.
pub fn upper_bound_search(
    game: &Game,
    budget: &SearchBudget,
    cfg: UpperConfig,
    clock: &Clock,
) -> Result<(BoundsTrace, Option<Instruction>)> {
    let opts = VerifyOptions { upper: cfg, run_lower: false, ..VerifyOptions::default() };
    let out = verify_anytime(game, budget, &opts, clock)?;
    Ok((out.trace, out.witness))
}

/// A* alone. The returned value is the certified lower bound.
pub fn admissible_astar(
    game: &Game,
    budget: &SearchBudget,
    mode: HeuristicMode,
    clock: &Clock,
) -> Result<(BoundsTrace, f64)> {
    let opts = VerifyOptions { heuristic: mode, run_upper: false, ..VerifyOptions::default() };
    let out = verify_anytime(game, budget, &opts, clock)?;
    Ok((out.trace, out.lower))
}
