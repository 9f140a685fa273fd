use std::fmt;
use std::sync::Arc;

use super::{Game, GameState, Owner, Terminal};
use crate::error::{Error, Result};
use crate::perturb::AtomicMove;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GameAction {
    Flow(usize),
    Move(AtomicMove),
}

/// Alternating states and actions from `s₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct GamePath {
    states: Vec<GameState>,
    actions: Vec<GameAction>,
}

impl GamePath {
    pub fn root(game: &Game) -> Self {
        Self { states: vec![game.initial_state()], actions: Vec::new() }
    }

    /// Replay `actions` from `s₀`.
    pub fn from_actions(game: &Game, actions: &[GameAction]) -> Result<Self> {
        let mut path = Self::root(game);
        for a in actions {
            path = path.extend(game, *a)?;
        }
        Ok(path)
    }

    pub fn states(&self) -> &[GameState] {
        &self.states
    }

    pub fn actions(&self) -> &[GameAction] {
        &self.actions
    }

    pub fn last(&self) -> &GameState {
        self.states.last().expect("paths are never empty")
    }

    pub fn extend(&self, game: &Game, action: GameAction) -> Result<Self> {
        let next = step(game, self.last(), action)?;
        let mut out = self.clone();
        out.states.push(next);
        out.actions.push(action);
        Ok(out)
    }

    /// Check that every element follows from the previous one.
    pub fn validate(&self, game: &Game) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::InconsistentPath("state and action counts disagree".into()));
        }
        if self.states[0] != game.initial_state() {
            return Err(Error::InconsistentPath("path does not start at the initial state".into()));
        }
        for (i, a) in self.actions.iter().enumerate() {
            if step(game, &self.states[i], *a)? != self.states[i + 1] {
                return Err(Error::InconsistentPath(format!("transition {i} does not follow the rules")));
            }
        }
        Ok(())
    }
}

fn step(game: &Game, s: &GameState, action: GameAction) -> Result<GameState> {
    match (s.owner, action) {
        (Owner::PlayerOne, GameAction::Flow(t)) => game.select_flow(s, t),
        (Owner::PlayerTwo(_), GameAction::Move(m)) => game.apply_move(s, &m),
        _ => Err(Error::InconsistentPath(format!("{action:?} played out of turn"))),
    }
}

type FlowPolicy = dyn Fn(&GamePath, &[usize]) -> Vec<(usize, f64)> + Send + Sync;
type MovePolicy = dyn Fn(&GamePath, &[AtomicMove]) -> Vec<(AtomicMove, f64)> + Send + Sync;

/// `σ = (σ_I, σ_II)`: each maps a path (and its legal actions) to a finite
/// distribution over those actions.
#[derive(Clone)]
pub struct StrategyProfile {
    pub sigma_one: Arc<FlowPolicy>,
    pub sigma_two: Arc<MovePolicy>,
}

impl fmt::Debug for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StrategyProfile")
    }
}

impl StrategyProfile {
    pub fn new(
        sigma_one: impl Fn(&GamePath, &[usize]) -> Vec<(usize, f64)> + Send + Sync + 'static,
        sigma_two: impl Fn(&GamePath, &[AtomicMove]) -> Vec<(AtomicMove, f64)> + Send + Sync + 'static,
    ) -> Self {
        Self { sigma_one: Arc::new(sigma_one), sigma_two: Arc::new(sigma_two) }
    }

    /// Uniform over the legal actions everywhere.
    pub fn uniform() -> Self {
        fn spread<T: Copy>(xs: &[T]) -> Vec<(T, f64)> {
            xs.iter().map(|&x| (x, 1.0 / xs.len() as f64)).collect()
        }
        Self::new(|_, flows| spread(flows), |_, moves| spread(moves))
    }

    /// Point distributions that follow `play` and otherwise pick the first
    /// legal action.
    pub fn following(play: Vec<GameAction>) -> Self {
        let play = Arc::new(play);
        let p2 = Arc::clone(&play);
        Self::new(
            move |path, flows| {
                let t = match play.get(path.actions().len()) {
                    Some(GameAction::Flow(t)) if flows.contains(t) && play[..path.actions().len()] == *path.actions() => *t,
                    _ => flows[0],
                };
                vec![(t, 1.0)]
            },
            move |path, moves| {
                let m = match p2.get(path.actions().len()) {
                    Some(GameAction::Move(m)) if moves.contains(m) && p2[..path.actions().len()] == *path.actions() => *m,
                    _ => moves[0],
                };
                vec![(m, 1.0)]
            },
        )
    }
}

fn check_distribution<T: PartialEq + fmt::Debug>(dist: &[(T, f64)], legal: &[T]) -> Result<()> {
    let mut sum = 0.0;
    for (a, w) in dist {
        if !(*w >= 0.0 && w.is_finite()) {
            return Err(Error::BadDistribution(*w));
        }
        if !legal.contains(a) {
            return Err(Error::InconsistentPath(format!("strategy plays illegal action {a:?}")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::BadDistribution(sum));
    }
    Ok(())
}

/// Expected terminal distance of the plays that `sigma` induces from `path`.
///
/// A terminal Player-I path is worth its flow distance from `P(v)`; other
/// paths are worth the strategy-weighted sum over their successors. A path
/// with no legal continuation (move cap reached, or every move would leave
/// the ball) is worth `d + ε`.
pub fn reward(game: &Game, sigma: &StrategyProfile, path: &GamePath) -> Result<f64> {
    path.validate(game)?;
    reward_rec(game, sigma, path)
}

fn reward_rec(game: &Game, sigma: &StrategyProfile, path: &GamePath) -> Result<f64> {
    let s = path.last();
    match s.owner {
        Owner::PlayerOne => {
            if game.terminal(s)? != Terminal::No {
                return Ok(game.distance(&s.instruction));
            }
            if !game.depth_left(s.depth) {
                return Ok(game.fallback());
            }
            let legal = game.player1_moves(s)?;
            let dist = (sigma.sigma_one)(path, &legal);
            check_distribution(&dist, &legal)?;
            let mut total = 0.0;
            for (t, w) in dist.into_iter().filter(|(_, w)| *w > 0.0) {
                total += w * reward_rec(game, sigma, &path.extend(game, GameAction::Flow(t))?)?;
            }
            Ok(total)
        }
        Owner::PlayerTwo(_) => {
            let legal = game.player2_moves(s)?;
            if legal.is_empty() {
                return Ok(game.fallback());
            }
            let dist = (sigma.sigma_two)(path, &legal);
            check_distribution(&dist, &legal)?;
            let mut total = 0.0;
            for (m, w) in dist.into_iter().filter(|(_, w)| *w > 0.0) {
                total += w * reward_rec(game, sigma, &path.extend(game, GameAction::Move(m))?)?;
            }
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::small_game;
    use super::*;
    use crate::flow::Component;
    use crate::game::GameConfig;
    use crate::perturb::Instruction;

    fn capped(threshold: f64, radius: f64, cap: usize) -> Game {
        let mut cfg: GameConfig = small_game(threshold, radius).config().clone();
        cfg.max_moves = Some(cap);
        Game::new(cfg).unwrap()
    }

    #[test]
    fn deterministic_profile_rewards_its_play() {
        let g = capped(1e6, 10.0, 2);
        let m = |pixel, sign| AtomicMove { flow: 1, pixel, component: Component::U, sign };
        let play = vec![GameAction::Flow(1), GameAction::Move(m(5, 1)), GameAction::Flow(1), GameAction::Move(m(6, -1))];
        // Nothing is adversarial, so the play ends at the cap with d + ε.
        let r = reward(&g, &StrategyProfile::following(play), &GamePath::root(&g)).unwrap();
        assert_eq!(r, g.fallback());
    }

    fn adversarial_game() -> (Game, Instruction) {
        let g = capped(0.02, 10.0, 2);
        let w = crate::game::brute_force(&g, 2).unwrap().witness.expect("offset chosen so a flip exists");
        (g, w)
    }

    fn play_of(ins: &Instruction) -> Vec<GameAction> {
        let mut out = Vec::new();
        for (k, &v) in ins.iter() {
            for _ in 0..v.abs() {
                out.push(GameAction::Flow(k.flow));
                out.push(GameAction::Move(AtomicMove { flow: k.flow, pixel: k.pixel, component: k.component, sign: v.signum() as i8 }));
            }
        }
        out
    }

    #[test]
    fn terminal_path_is_worth_its_distance() {
        let (g, w) = adversarial_game();
        let path = GamePath::from_actions(&g, &play_of(&w)).unwrap();
        assert_eq!(g.terminal(path.last()).unwrap(), Terminal::Adversarial);
        let r = reward(&g, &StrategyProfile::uniform(), &path).unwrap();
        assert_eq!(r, g.distance(&w));
        let r0 = reward(&g, &StrategyProfile::following(play_of(&w)), &GamePath::root(&g)).unwrap();
        assert_eq!(r0, g.distance(&w));
    }

    #[test]
    fn mixture_is_the_weighted_sum() {
        let (g, w) = adversarial_game();
        let play = play_of(&w);
        let GameAction::Move(first) = play[1] else { unreachable!() };
        let GameAction::Flow(flow) = play[0] else { unreachable!() };
        let other = AtomicMove { sign: -first.sign, ..first };
        let alt = vec![GameAction::Flow(flow), GameAction::Move(other)];
        let (ra, rb) = (
            reward(&g, &StrategyProfile::following(play.clone()), &GamePath::root(&g)).unwrap(),
            reward(&g, &StrategyProfile::following(alt.clone()), &GamePath::root(&g)).unwrap(),
        );
        let (pa, pb) = (play.clone(), alt);
        let mixed = StrategyProfile::new(
            move |_, _| vec![(flow, 1.0)],
            move |path, moves| {
                let n = path.actions().len();
                if n == 1 {
                    vec![(first, 0.25), (other, 0.75)]
                } else {
                    let follow = if path.actions()[1] == pa[1] { &pa } else { &pb };
                    match follow.get(n) {
                        Some(GameAction::Move(m)) if moves.contains(m) => vec![(*m, 1.0)],
                        _ => vec![(moves[0], 1.0)],
                    }
                }
            },
        );
        let r = reward(&g, &mixed, &GamePath::root(&g)).unwrap();
        assert!((r - (0.25 * ra + 0.75 * rb)).abs() < 1e-12, "{r} vs {ra} {rb}");
    }

    #[test]
    fn uniform_profile_is_an_expectation() {
        let g = capped(1e6, 10.0, 1);
        // Every leaf is worth d + ε, so any mixture is too.
        let r = reward(&g, &StrategyProfile::uniform(), &GamePath::root(&g)).unwrap();
        assert!((r - g.fallback()).abs() < 1e-12);
    }

    #[test]
    fn bad_distributions_and_paths() {
        let g = capped(1e6, 10.0, 1);
        let half = StrategyProfile::new(|_, f| vec![(f[0], 0.5)], |_, m| vec![(m[0], 1.0)]);
        assert!(matches!(reward(&g, &half, &GamePath::root(&g)), Err(Error::BadDistribution(_))));
        let illegal = StrategyProfile::new(|_, _| vec![(7, 1.0)], |_, m| vec![(m[0], 1.0)]);
        assert!(matches!(reward(&g, &illegal, &GamePath::root(&g)), Err(Error::InconsistentPath(_))));
        let m = AtomicMove { flow: 0, pixel: 5, component: Component::U, sign: 1 };
        assert!(GamePath::from_actions(&g, &[GameAction::Move(m)]).is_err());
        assert!(GamePath::from_actions(&g, &[GameAction::Flow(1), GameAction::Move(m)]).is_err());
    }
}
