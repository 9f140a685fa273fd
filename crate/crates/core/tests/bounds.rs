mod common;

use std::sync::Arc;

use common::*;
use flowcert::bounds::{
    admissible_astar, grad_features_wrt_flow, grad_loss_wrt_features, verify_anytime, BoundKind, BoundsTrace, Clock,
    HeuristicMode, SearchBudget, UpperConfig, VerifyOptions,
};
use flowcert::game::{Game, GameConfig};
use flowcert::net::Objective;
use flowcert::synth::{SynthSpec, AMPLITUDE, BACKGROUND};
use flowcert::{NormKind, Tensor, Video};
use proptest::prelude::*;

/// Fraction of clearly non-zero entries on the object's support whose
/// relative change between the two maps stays within `tol`. Off the support
/// the image is flat, the flow responds to a one-pixel change only at second
/// order, and the ratio grows like one over the step.
fn stable_fraction(v: &Video, a: &[Tensor], b: &[Tensor], tol: f64) -> (usize, f64) {
    let support = |t: usize, px: usize| v.frame_values(t)[px] > BACKGROUND + 0.1 * AMPLITUDE;
    let mut peak: f64 = 0.0;
    for (t, m) in a.iter().enumerate() {
        for (px, x) in m.values().iter().enumerate() {
            if support(t, px) {
                peak = peak.max(x.abs());
            }
        }
    }
    let (mut n, mut ok) = (0, 0);
    for (t, (ma, mb)) in a.iter().zip(b).enumerate() {
        for (px, (x, y)) in ma.values().iter().zip(mb.values()).enumerate() {
            if support(t, px) && x.abs() > 1e-3 * peak {
                n += 1;
                ok += usize::from((x - y).abs() <= tol * x.abs());
            }
        }
    }
    (n, ok as f64 / n as f64)
}

#[test]
fn saliency_factors_are_stable_under_step_halving() {
    let net = fixture_net();
    let spec = SynthSpec { object_sigma: 3.0, height: 24, width: 24, ..SynthSpec::default() };
    for i in 0..2 {
        let (v, _) = spec.sample(i).unwrap();
        // The finite difference is only linear while the step is small against
        // the local intensity gradient.
        let step = 0.005;
        for p in NORMS {
            let (n, frac) = stable_fraction(
                &v,
                &grad_features_wrt_flow(&v, step, p).unwrap(),
                &grad_features_wrt_flow(&v, step / 2.0, p).unwrap(),
                0.3,
            );
            assert!(n > 0 && frac == 1.0, "clip {i} {p}: flow factor stable on {frac} of {n}");
        }
        // The fixture network reads the default 16x16 frames. It is piecewise
        // linear, so the step is kept small enough not to cross ReLU or
        // max-pool switches.
        let (v, label) = SynthSpec::default().sample(i).unwrap();
        let step = 0.001;
        for p in NORMS {
            let (n, frac) = stable_fraction(
                &v,
                &grad_loss_wrt_features(&net, &v, step, label, Objective::LogitDiscrepancy, p).unwrap(),
                &grad_loss_wrt_features(&net, &v, step / 2.0, label, Objective::LogitDiscrepancy, p).unwrap(),
                0.3,
            );
            assert!(n > 0 && frac == 1.0, "clip {i} {p}: objective factor stable on {frac} of {n}");
        }
    }
}

#[test]
fn generous_budget_closes_the_gap() {
    for seed in 0..12 {
        let t = tiny_instance(seed);
        let budget = SearchBudget::new(Some(100_000), Some(100_000), None, seed).unwrap();
        let out = verify_anytime(&t.game, &budget, &VerifyOptions::default(), &Clock::Logical).unwrap();
        let tau = t.game.config().tau;
        assert!(out.upper - out.lower < tau, "seed {seed}: UB {} LB {}", out.upper, out.lower);
        assert!(out.lower <= out.upper);
    }
}

/// Lower bound in force after `k` expansions.
fn lb_at(trace: &BoundsTrace, k: u64) -> f64 {
    trace.entries.iter().filter(|e| e.kind == BoundKind::Lower && e.nodes_expanded <= k).map(|e| e.value).fold(0.0, f64::max)
}

fn with_flows(game: &Game, flows: Vec<usize>) -> Game {
    let mut cfg: GameConfig = game.config().clone();
    cfg.flow_mask = Some(flows);
    Game::new(cfg).unwrap()
}

#[test]
fn single_flow_lower_bound_dominates_all_flows() {
    for seed in (0..24).filter(|s| s % 2 == 1) {
        let t = tiny_instance(seed);
        let budget = SearchBudget::new(None, Some(60), None, 0).unwrap();
        let all = with_flows(&t.game, vec![0, 1, 2]);
        let (all_trace, _) = admissible_astar(&all, &budget, HeuristicMode::Admissible, &Clock::Logical).unwrap();
        for f in 0..3 {
            let one = with_flows(&t.game, vec![f]);
            let (one_trace, _) = admissible_astar(&one, &budget, HeuristicMode::Admissible, &Clock::Logical).unwrap();
            let shared = all_trace.entries.last().unwrap().nodes_expanded.min(one_trace.entries.last().unwrap().nodes_expanded);
            for k in 0..=shared {
                assert!(
                    lb_at(&one_trace, k) >= lb_at(&all_trace, k),
                    "seed {seed} flow {f} after {k} expansions: {} < {}",
                    lb_at(&one_trace, k),
                    lb_at(&all_trace, k)
                );
            }
        }
    }
}

#[test]
fn fixture_network_sandwich_holds() {
    let (v, _) = fixtures().remove(2);
    let mut cfg = GameConfig::new(Arc::new(fixture_net()), v, NormKind::L2, 2.0, 0.5).unwrap();
    cfg.pixel_mask = Some(window(16, 6, 6, 4, 4));
    let game = Game::new(cfg).unwrap();
    let budget = SearchBudget::new(Some(40), Some(200), None, 1).unwrap();
    let out = verify_anytime(&game, &budget, &VerifyOptions::default(), &Clock::Logical).unwrap();
    out.trace.check_invariants().unwrap();
    assert!(out.lower <= out.upper);
    assert!(out.interval.0 <= out.interval.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_budgets_keep_trace_invariants(
        seed in 0u64..200,
        ub in 1u64..40,
        lb in 1u64..80,
        top_k in 1usize..10,
        slice in 1u64..10,
        zero in any::<bool>(),
    ) {
        let t = tiny_instance(seed);
        let budget = SearchBudget::new(Some(ub), Some(lb), None, seed).unwrap();
        let opts = VerifyOptions {
            upper: UpperConfig { top_k, ..UpperConfig::default() },
            heuristic: if zero { HeuristicMode::Zero } else { HeuristicMode::Admissible },
            slice,
            ..VerifyOptions::default()
        };
        let out = verify_anytime(&t.game, &budget, &opts, &Clock::Logical).unwrap();
        prop_assert!(out.trace.check_invariants().is_ok());
        prop_assert!(out.lower <= out.upper);
        prop_assert!(out.lower_expansions <= lb && out.upper_iterations <= ub);
        let csv = out.trace.to_csv();
        prop_assert_eq!(BoundsTrace::parse_csv(&csv).unwrap().to_csv(), csv);
    }
}
