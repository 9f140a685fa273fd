use std::sync::Arc;

use super::*;
use crate::game::tests::{gradient_video, small_game, sum_net};
use crate::game::{brute_force, Game, GameConfig, GridPoint, Terminal};
use crate::perturb::Instruction;
use crate::tensor::NormKind;

fn game(offset: f64, radius: f64, cap: usize, norm: NormKind) -> Game {
    let mut cfg: GameConfig = small_game(offset, radius).config().clone();
    cfg.norm = norm;
    cfg.max_moves = Some(cap);
    cfg.flow_mask = Some(vec![1]);
    Game::new(cfg).unwrap()
}

fn nodes(n: u64) -> SearchBudget {
    SearchBudget::new(None, Some(n), None, 7).unwrap()
}

const NORMS: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::Linf];

#[test]
fn astar_matches_brute_force() {
    for norm in NORMS {
        for offset in [0.01, 0.02, 0.05, 1e6] {
            let g = game(offset, 1.5, 3, norm);
            let oracle = brute_force(&g, 3).unwrap().fmsr;
            let mut a = AStar::new(&g, HeuristicMode::Admissible).unwrap();
            let lb = a.run(None).unwrap();
            assert!((lb - oracle).abs() < 1e-9, "{norm:?} {offset}: {lb} vs {oracle}");
            let mut z = AStar::new(&g, HeuristicMode::Zero).unwrap();
            assert_eq!(z.run(None).unwrap(), lb);
        }
    }
}

/// Smallest adversarial distance among points whose every coordinate extends
/// `ins` away from zero.
fn best_completion(points: &[GridPoint], ins: &Instruction) -> f64 {
    points
        .iter()
        .filter(|p| p.adversarial)
        .filter(|p| {
            ins.iter().all(|(k, &v)| {
                let w = p.instruction.get(k);
                w.signum() == v.signum() && w.abs() >= v.abs()
            })
        })
        .map(|p| p.distance)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn estimates_never_overestimate() {
    for norm in NORMS {
        let g = game(0.03, 1.5, 3, norm);
        let points = brute_force(&g, 3).unwrap().points;
        let mut a = AStar::new(&g, HeuristicMode::Admissible).unwrap().record_expansions();
        a.run(None).unwrap();
        assert!(!a.expanded().is_empty());
        for e in a.expanded() {
            assert!(e.key <= best_completion(&points, &e.instruction), "{norm:?} {}", e.instruction);
        }
    }
}

#[test]
fn uniform_cost_first_layer() {
    let g = game(1e6, 1.5, 3, NormKind::L1);
    let mut a = AStar::new(&g, HeuristicMode::Zero).unwrap();
    assert_eq!(a.step().unwrap(), None);
    assert_eq!(a.lower(), 0.0);
    assert_eq!(a.step().unwrap(), Some(0.5));
}

#[test]
fn full_frontier_upper_search_is_exact() {
    for norm in NORMS {
        let g = game(0.03, 1.5, 3, norm);
        let oracle = brute_force(&g, 3).unwrap();
        let cfg = UpperConfig { top_k: g.dim_count(), ..UpperConfig::default() };
        let mut u = UpperSearch::new(&g, cfg, 3).unwrap();
        while !u.is_done() {
            u.step().unwrap();
        }
        assert_eq!(u.upper(), oracle.fmsr, "{norm:?}");
        let (d, w) = u.best().unwrap();
        assert_eq!(g.terminal_of(w).unwrap(), Terminal::Adversarial);
        assert_eq!(g.distance(w), *d);
    }
}

#[test]
fn anytime_sandwich_and_witness() {
    for norm in NORMS {
        for offset in [0.02, 0.04] {
            let g = game(offset, 1.5, 3, norm);
            let oracle = brute_force(&g, 3).unwrap().fmsr;
            let budget = SearchBudget::new(Some(10_000), Some(10_000), None, 1).unwrap();
            let out = verify_anytime(&g, &budget, &VerifyOptions::default(), &Clock::Logical).unwrap();
            out.trace.check_invariants().unwrap();
            assert!(out.trace.values(BoundKind::Lower).all(|v| v <= oracle));
            assert!(out.trace.values(BoundKind::Upper).all(|v| v >= oracle));
            assert_eq!(out.upper, oracle);
            assert_eq!(out.lower, oracle);
            let w = out.witness.as_ref().unwrap();
            assert_eq!(g.terminal_of(w).unwrap(), Terminal::Adversarial);
            assert_eq!(g.distance(w), out.upper);
            assert!(out.upper - out.lower < g.config().tau);
            assert_eq!(out.interval, ((oracle - out.grid_width / 2.0).max(0.0), oracle));
        }
    }
}

#[test]
fn constant_network_is_certified() {
    let v = gradient_video();
    let mut cfg = GameConfig::new(Arc::new(sum_net(1e6)), v, NormKind::L1, 1.0, 0.5).unwrap();
    cfg.pixel_mask = Some(vec![5, 6]);
    cfg.flow_mask = Some(vec![1]);
    let g = Game::new(cfg).unwrap();
    let out = verify_anytime(&g, &nodes(100_000), &VerifyOptions::default(), &Clock::Logical).unwrap();
    assert!(out.witness.is_none());
    assert!(out.certified());
    assert_eq!(out.upper, g.fallback());
    assert_eq!(out.lower, g.fallback());
    assert_eq!(out.trace.last(BoundKind::Upper), Some(g.fallback()));
}

#[test]
fn standalone_searches() {
    let g = game(0.02, 1.5, 3, NormKind::L2);
    let oracle = brute_force(&g, 3).unwrap().fmsr;
    let (trace, lb) = admissible_astar(&g, &nodes(1_000_000), HeuristicMode::Admissible, &Clock::Logical).unwrap();
    assert_eq!(lb, oracle);
    assert!(trace.values(BoundKind::Upper).all(|v| v >= oracle));
    let budget = SearchBudget::new(Some(3), None, None, 1).unwrap();
    let (trace, witness) = upper_bound_search(&g, &budget, UpperConfig::default(), &Clock::Logical).unwrap();
    trace.check_invariants().unwrap();
    assert_eq!(trace.values(BoundKind::Lower).count(), 0);
    match witness {
        Some(w) => assert_eq!(trace.last(BoundKind::Upper), Some(g.distance(&w))),
        None => assert_eq!(trace.last(BoundKind::Upper), Some(g.fallback())),
    }
}

#[test]
fn node_budget_gives_partial_sound_bound() {
    let g = game(0.05, 1.5, 3, NormKind::L1);
    let oracle = brute_force(&g, 3).unwrap().fmsr;
    let (_, lb) = admissible_astar(&g, &nodes(3), HeuristicMode::Admissible, &Clock::Logical).unwrap();
    assert!(lb <= oracle);
}

#[test]
fn trace_is_seed_deterministic() {
    let g = game(0.04, 1.5, 3, NormKind::L1);
    let budget = SearchBudget::new(Some(50), Some(50), None, 11).unwrap();
    let a = verify_anytime(&g, &budget, &VerifyOptions::default(), &Clock::Logical).unwrap();
    let b = verify_anytime(&g, &budget, &VerifyOptions::default(), &Clock::Logical).unwrap();
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
}
