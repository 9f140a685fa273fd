use std::io::Write;

use rayon::prelude::*;

use super::Game;
use crate::error::{Error, Result};
use crate::perturb::{DimKey, Instruction};

/// Upper limit on grid points evaluated by [`brute_force`].
pub const MAX_LEAVES: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub instruction: Instruction,
    pub distance: f64,
    pub adversarial: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    /// Smallest adversarial distance, or `d + ε` if there is none.
    pub fmsr: f64,
    pub witness: Option<Instruction>,
    /// Every grid point visited, by number of moves then canonical order.
    pub points: Vec<GridPoint>,
}

/// Number of instructions over `dims` dimensions using at most `cap` moves:
/// `Σ_j C(dims, j) · 2^j · C(cap, j)`.
fn count_points(dims: usize, cap: usize) -> u128 {
    let choose = |n: usize, k: usize| -> u128 {
        if k > n {
            return 0;
        }
        (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
    };
    (0..=dims.min(cap))
        .map(|j| choose(dims, j).saturating_mul(1u128 << j.min(100)).saturating_mul(choose(cap, j)))
        .fold(0u128, u128::saturating_add)
}

/// Every grid point within the ball reachable in at most `move_cap` atomic
/// moves, each exactly once, ordered by move count then canonically.
pub fn enumerate_grid(game: &Game, move_cap: usize) -> Result<Vec<Instruction>> {
    let dims = game.dims();
    if count_points(dims.len(), move_cap) > MAX_LEAVES as u128 {
        return Err(Error::SearchSpaceTooLarge { limit: MAX_LEAVES });
    }
    let mut out = vec![Instruction::new()];
    let mut cur = Instruction::new();
    extend(game, &dims, 0, move_cap, &mut cur, &mut out);
    out.sort_by(|a, b| a.moves().cmp(&b.moves()).then_with(|| a.cmp(b)));
    Ok(out)
}

fn extend(game: &Game, dims: &[DimKey], start: usize, left: usize, cur: &mut Instruction, out: &mut Vec<Instruction>) {
    for (i, &key) in dims.iter().enumerate().skip(start) {
        for sign in [1i64, -1] {
            for mag in 1..=left as i64 {
                cur.add(key, sign * mag);
                // Norms grow with every magnitude, so the first point outside
                // the ball ends this direction.
                if !game.in_ball(cur) {
                    cur.add(key, -sign * mag);
                    break;
                }
                out.push(cur.clone());
                extend(game, dims, i + 1, left - mag as usize, cur, out);
                cur.add(key, -sign * mag);
            }
        }
    }
}

/// Evaluate every grid point of [`enumerate_grid`].
pub fn brute_force(game: &Game, move_cap: usize) -> Result<BruteForce> {
    let points = enumerate_grid(game, move_cap)?
        .into_par_iter()
        .map(|ins| {
            let eval = game.evaluate(&ins)?;
            Ok(GridPoint { distance: game.distance(&ins), adversarial: eval.adversarial, instruction: ins })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = points
        .iter()
        .filter(|p| p.adversarial)
        .min_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.instruction.cmp(&b.instruction)));
    Ok(BruteForce {
        fmsr: best.map_or(game.fallback(), |p| p.distance),
        witness: best.map(|p| p.instruction.clone()),
        points,
    })
}

/// Finite maximum safe radius by exhaustive enumeration.
pub fn brute_force_fmsr(game: &Game, move_cap: usize) -> Result<f64> {
    Ok(brute_force(game, move_cap)?.fmsr)
}

/// `instruction,distance,adversarial` rows; distances use 17 significant digits.
pub fn write_oracle_csv(points: &[GridPoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "instruction,distance,adversarial")?;
    for p in points {
        writeln!(out, "{},{:.16e},{}", p.instruction, p.distance, p.adversarial)?;
    }
    Ok(())
}
