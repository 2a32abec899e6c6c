//! Finite normal-form games and the solvers used to probe equilibrium claims.
//!
//! Joint actions are stored row-major with player 0 most significant. Best
//! responses break ties toward the lowest action index.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{rat, solve_square, to_f64, Rational};

/// Default limit on the number of joint actions enumerated.
pub const DEFAULT_CELL_CAP: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormGame {
    action_counts: Vec<usize>,
    /// `payoffs[cell * n_players + player]`
    payoffs: Vec<f64>,
}

pub type Profile = Vec<usize>;

impl NormalFormGame {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<f64>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(Error::Config("a game needs at least one player".into()));
        }
        if action_counts.contains(&0) {
            return Err(Error::Config("every player needs at least one action".into()));
        }
        let cells = action_counts
            .iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .ok_or_else(|| Error::Config("joint action space overflows".into()))?;
        let expected = cells * action_counts.len();
        if payoffs.len() != expected {
            return Err(Error::LengthMismatch {
                what: "payoff tensor",
                expected,
                found: payoffs.len(),
            });
        }
        if let Some(x) = payoffs.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("payoff {x} is not finite")));
        }
        Ok(NormalFormGame {
            action_counts,
            payoffs,
        })
    }

    /// Builds the tensor from a payoff function of the joint action.
    pub fn from_fn<F>(action_counts: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let n = action_counts.len();
        let cells: usize = action_counts.iter().product();
        let mut payoffs = Vec::with_capacity(cells * n);
        let mut profile = vec![0; n];
        for cell in 0..cells {
            decode_into(&action_counts, cell, &mut profile);
            let p = f(&profile);
            if p.len() != n {
                return Err(Error::LengthMismatch {
                    what: "payoffs per cell",
                    expected: n,
                    found: p.len(),
                });
            }
            payoffs.extend(p);
        }
        Self::new(action_counts, payoffs)
    }

    /// Two-player game from row and column payoff matrices.
    pub fn bimatrix(row: &[Vec<f64>], col: &[Vec<f64>]) -> Result<Self> {
        let m = row.len();
        let k = row.first().map_or(0, |r| r.len());
        if col.len() != m || row.iter().chain(col).any(|r| r.len() != k) {
            return Err(Error::Config("bimatrix shapes differ".into()));
        }
        Self::from_fn(vec![m, k], |p| vec![row[p[0]][p[1]], col[p[0]][p[1]]])
    }

    pub fn n_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn n_cells(&self) -> usize {
        self.payoffs.len() / self.n_players()
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn cell_index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.action_counts)
            .fold(0, |acc, (&a, &k)| acc * k + a)
    }

    pub fn profile_of(&self, cell: usize) -> Profile {
        let mut p = vec![0; self.n_players()];
        decode_into(&self.action_counts, cell, &mut p);
        p
    }

    pub fn payoff(&self, profile: &[usize], player: usize) -> f64 {
        self.payoffs[self.cell_index(profile) * self.n_players() + player]
    }

    /// Applies `x -> a*x + b` to one player's payoffs.
    pub fn affine_transform(&self, player: usize, a: f64, b: f64) -> Self {
        let n = self.n_players();
        let payoffs = self
            .payoffs
            .iter()
            .enumerate()
            .map(|(k, &x)| if k % n == player { a * x + b } else { x })
            .collect();
        NormalFormGame {
            action_counts: self.action_counts.clone(),
            payoffs,
        }
    }

    fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.n_players() {
            return Err(Error::LengthMismatch {
                what: "profile",
                expected: self.n_players(),
                found: profile.len(),
            });
        }
        for (p, (&a, &k)) in profile.iter().zip(&self.action_counts).enumerate() {
            if a >= k {
                return Err(Error::Config(format!(
                    "player {p} action {a} out of range 0..{k}"
                )));
            }
        }
        Ok(())
    }

    /// Lowest-index best response of `player` against the rest of `profile`.
    pub fn best_response(&self, player: usize, profile: &[usize]) -> usize {
        let mut p = profile.to_vec();
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for a in 0..self.action_counts[player] {
            p[player] = a;
            let v = self.payoff(&p, player);
            if v > best_val {
                best_val = v;
                best = a;
            }
        }
        best
    }

    /// True if some player gains strictly by a unilateral deviation.
    pub fn has_profitable_deviation(&self, profile: &[usize]) -> bool {
        let mut p = profile.to_vec();
        (0..self.n_players()).any(|i| {
            let current = self.payoff(profile, i);
            let orig = p[i];
            let found = (0..self.action_counts[i]).any(|a| {
                p[i] = a;
                self.payoff(&p, i) > current
            });
            p[i] = orig;
            found
        })
    }
}

fn decode_into(counts: &[usize], mut cell: usize, out: &mut [usize]) {
    for (slot, &k) in out.iter_mut().zip(counts).rev() {
        *slot = cell % k;
        cell /= k;
    }
}

pub fn pure_nash(game: &NormalFormGame) -> Result<Vec<Profile>> {
    pure_nash_with_cap(game, DEFAULT_CELL_CAP)
}

/// Every joint action at which no player gains strictly by deviating alone.
pub fn pure_nash_with_cap(game: &NormalFormGame, cap: usize) -> Result<Vec<Profile>> {
    let cells = game.n_cells();
    if cells > cap {
        return Err(Error::CapExceeded { cells, cap });
    }
    Ok((0..cells)
        .map(|c| game.profile_of(c))
        .filter(|p| !game.has_profitable_deviation(p))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedEquilibrium {
    pub row: Vec<Rational>,
    pub col: Vec<Rational>,
}

impl MixedEquilibrium {
    pub fn row_f64(&self) -> Vec<f64> {
        self.row.iter().map(to_f64).collect()
    }

    pub fn col_f64(&self) -> Vec<f64> {
        self.col.iter().map(to_f64).collect()
    }

    pub fn is_pure(&self) -> bool {
        let support = |v: &[Rational]| v.iter().filter(|x| !x.is_zero()).count();
        support(&self.row) == 1 && support(&self.col) == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportEnumeration {
    pub equilibria: Vec<MixedEquilibrium>,
    /// Set when a singular indifference system was met or an equilibrium
    /// has more pure best responses than support actions; the list may then
    /// be incomplete or contain non-isolated points.
    pub degenerate: bool,
}

pub const MAX_SUPPORT_ACTIONS: usize = 8;

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Finds the mix over `support` (of the opponent, with payoff matrix `m`
/// seen by the indifferent player) that makes every action in `own` yield
/// the same payoff. `m[i][j]`: payoff to the indifferent player for own
/// action `i` against opponent action `j`.
fn indifference_mix(m: &[Vec<Rational>], own: &[usize], support: &[usize]) -> Option<(Vec<Rational>, Rational)> {
    let k = support.len();
    // unknowns: y_j for j in support, then u
    let mut a = Vec::with_capacity(k + 1);
    let mut b = Vec::with_capacity(k + 1);
    for &i in own {
        let mut row: Vec<Rational> = support.iter().map(|&j| m[i][j].clone()).collect();
        row.push(-Rational::from_integer(1.into()));
        a.push(row);
        b.push(Rational::zero());
    }
    let mut sum_row = vec![Rational::from_integer(1.into()); k];
    sum_row.push(Rational::zero());
    a.push(sum_row);
    b.push(Rational::from_integer(1.into()));
    let sol = solve_square(a, b)?;
    let u = sol[k].clone();
    Some((sol[..k].to_vec(), u))
}

/// Mixed equilibria of a two-player game by enumerating equal-size support
/// pairs and solving the indifference systems in exact arithmetic.
pub fn support_enumeration_2p(game: &NormalFormGame) -> Result<SupportEnumeration> {
    if game.n_players() != 2 {
        return Err(Error::Config(format!(
            "support enumeration needs 2 players, got {}",
            game.n_players()
        )));
    }
    let (m, k) = (game.action_counts[0], game.action_counts[1]);
    if m > MAX_SUPPORT_ACTIONS || k > MAX_SUPPORT_ACTIONS {
        return Err(Error::Config(format!(
            "support enumeration handles at most {MAX_SUPPORT_ACTIONS} actions per player"
        )));
    }
    let a: Vec<Vec<Rational>> = (0..m).map(|i| (0..k).map(|j| rat(game.payoff(&[i, j], 0))).collect()).collect();
    // column player's payoffs indexed [own][opponent]
    let bt: Vec<Vec<Rational>> = (0..k).map(|j| (0..m).map(|i| rat(game.payoff(&[i, j], 1))).collect()).collect();

    let mut equilibria: Vec<MixedEquilibrium> = Vec::new();
    let mut degenerate = false;
    for size in 1..=m.min(k) {
        for rs in k_subsets(m, size) {
            for cs in k_subsets(k, size) {
                // column mix makes the row player indifferent over rs
                let Some((y_s, u)) = indifference_mix(&a, &rs, &cs) else {
                    degenerate = true;
                    continue;
                };
                let Some((x_s, w)) = indifference_mix(&bt, &cs, &rs) else {
                    degenerate = true;
                    continue;
                };
                if y_s.iter().chain(&x_s).any(|p| p < &Rational::zero()) {
                    continue;
                }
                let mut x = vec![Rational::zero(); m];
                for (&i, p) in rs.iter().zip(x_s) {
                    x[i] = p;
                }
                let mut y = vec![Rational::zero(); k];
                for (&j, p) in cs.iter().zip(y_s) {
                    y[j] = p;
                }
                let row_vals: Vec<Rational> = (0..m)
                    .map(|i| (0..k).map(|j| &a[i][j] * &y[j]).sum())
                    .collect();
                let col_vals: Vec<Rational> = (0..k)
                    .map(|j| (0..m).map(|i| &bt[j][i] * &x[i]).sum())
                    .collect();
                if row_vals.iter().any(|v| v > &u) || col_vals.iter().any(|v| v > &w) {
                    continue;
                }
                let row_br = row_vals.iter().filter(|v| **v == u).count();
                let col_br = col_vals.iter().filter(|v| **v == w).count();
                let supp = |v: &[Rational]| v.iter().filter(|p| !p.is_zero()).count();
                if row_br > supp(&y) || col_br > supp(&x) {
                    degenerate = true;
                }
                let eq = MixedEquilibrium { row: x, col: y };
                if !equilibria.contains(&eq) {
                    equilibria.push(eq);
                }
            }
        }
    }
    Ok(SupportEnumeration {
        equilibria,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    /// Start profile followed by the profile after every single update.
    pub trajectory: Vec<Profile>,
    pub converged: bool,
    /// Completed rounds (one update per player each).
    pub rounds: usize,
}

/// Sequential best-response updates in player order; converged once a full
/// round leaves every action unchanged.
pub fn best_response_dynamics(game: &NormalFormGame, start: &[usize], max_iter: usize) -> Result<Dynamics> {
    game.check_profile(start)?;
    if max_iter < 1 {
        return Err(Error::Config("max_iter must be >= 1".into()));
    }
    let mut profile = start.to_vec();
    let mut trajectory = vec![profile.clone()];
    for round in 1..=max_iter {
        let mut changed = false;
        for player in 0..game.n_players() {
            let br = game.best_response(player, &profile);
            if br != profile[player] {
                profile[player] = br;
                changed = true;
            }
            trajectory.push(profile.clone());
        }
        if !changed {
            return Ok(Dynamics {
                trajectory,
                converged: true,
                rounds: round,
            });
        }
    }
    Ok(Dynamics {
        trajectory,
        converged: false,
        rounds: max_iter,
    })
}

/// For each player, the action that weakly beats every alternative against
/// all opponent profiles and strictly beats each alternative somewhere.
/// Players with a single action report `None`.
pub fn dominant_strategy_report(game: &NormalFormGame) -> Vec<Option<usize>> {
    let n = game.n_players();
    let counts = game.action_counts();
    (0..n)
        .map(|player| {
            if counts[player] < 2 {
                return None;
            }
            let others: Vec<Profile> = (0..game.n_cells())
                .map(|c| game.profile_of(c))
                .filter(|p| p[player] == 0)
                .collect();
            let dominates = |a: usize, b: usize| {
                let mut strict = false;
                for base in &others {
                    let mut pa = base.clone();
                    pa[player] = a;
                    let mut pb = base.clone();
                    pb[player] = b;
                    let (ua, ub) = (game.payoff(&pa, player), game.payoff(&pb, player));
                    if ua < ub {
                        return false;
                    }
                    if ua > ub {
                        strict = true;
                    }
                }
                strict
            };
            (0..counts[player]).find(|&a| (0..counts[player]).filter(|&b| b != a).all(|b| dominates(a, b)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointImprovement {
    pub coalition: Vec<usize>,
    /// New actions for the coalition members, in member order.
    pub deviation: Vec<usize>,
}

/// First coalition of 2..=`max_size` players with a joint change of all its
/// members' actions that strictly improves every member. Coalitions are
/// scanned by size, then lexicographically; deviations lexicographically.
pub fn joint_improvability(game: &NormalFormGame, profile: &[usize], max_size: usize) -> Result<Option<JointImprovement>> {
    game.check_profile(profile)?;
    let n = game.n_players();
    for size in 2..=max_size.min(n) {
        for members in k_subsets(n, size) {
            let counts: Vec<usize> = members.iter().map(|&i| game.action_counts[i]).collect();
            let total: usize = counts.iter().product();
            let mut dev = vec![0; size];
            for code in 0..total {
                decode_into(&counts, code, &mut dev);
                if members.iter().zip(&dev).any(|(&i, &a)| profile[i] == a) {
                    continue;
                }
                let mut p = profile.to_vec();
                for (&i, &a) in members.iter().zip(&dev) {
                    p[i] = a;
                }
                if members.iter().all(|&i| game.payoff(&p, i) > game.payoff(profile, i)) {
                    return Ok(Some(JointImprovement {
                        coalition: members,
                        deviation: dev,
                    }));
                }
            }
        }
    }
    Ok(None)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::exact::ratio;

    #[test]
    fn construction_validates() {
        assert!(NormalFormGame::new(vec![], vec![]).is_err());
        assert!(NormalFormGame::new(vec![2, 0], vec![]).is_err());
        assert!(NormalFormGame::new(vec![2, 2], vec![0.0; 7]).is_err());
        assert!(NormalFormGame::new(vec![1], vec![f64::INFINITY]).is_err());
        let g = prisoners_dilemma();
        assert_eq!(g.profile_of(g.cell_index(&[1, 0])), vec![1, 0]);
    }

    #[test]
    fn pure_nash_examples() {
        assert_eq!(pure_nash(&prisoners_dilemma()).unwrap(), vec![vec![1, 1]]);
        assert!(pure_nash(&matching_pennies()).unwrap().is_empty());
        let single = NormalFormGame::new(vec![3], vec![1.0, 4.0, 4.0]).unwrap();
        assert_eq!(pure_nash(&single).unwrap(), vec![vec![1], vec![2]]);
        assert!(matches!(
            pure_nash_with_cap(&prisoners_dilemma(), 3),
            Err(Error::CapExceeded { cells: 4, cap: 3 })
        ));
    }

    #[test]
    fn support_enumeration_examples() {
        let mp = support_enumeration_2p(&matching_pennies()).unwrap();
        assert_eq!(mp.equilibria.len(), 1);
        assert_eq!(mp.equilibria[0].row, vec![ratio(1, 2), ratio(1, 2)]);
        assert_eq!(mp.equilibria[0].col, vec![ratio(1, 2), ratio(1, 2)]);
        assert!(!mp.degenerate);

        let pd = support_enumeration_2p(&prisoners_dilemma()).unwrap();
        assert_eq!(pd.equilibria.len(), 1);
        assert!(pd.equilibria[0].is_pure());
        assert_eq!(pd.equilibria[0].row_f64(), vec![0.0, 1.0]);

        let flat = NormalFormGame::bimatrix(&[vec![1.0; 2], vec![1.0; 2]], &[vec![1.0; 2], vec![1.0; 2]]).unwrap();
        assert!(support_enumeration_2p(&flat).unwrap().degenerate);

        let three = NormalFormGame::new(vec![1, 1, 1], vec![0.0; 3]).unwrap();
        assert!(support_enumeration_2p(&three).is_err());
    }

    #[test]
    fn coordination_has_three_equilibria() {
        let se = support_enumeration_2p(&coordination()).unwrap();
        assert_eq!(se.equilibria.len(), 3);
        let mixed = se.equilibria.iter().find(|e| !e.is_pure()).unwrap();
        assert_eq!(mixed.row, vec![ratio(1, 3), ratio(2, 3)]);
    }

    #[test]
    fn dynamics_examples() {
        let d = best_response_dynamics(&prisoners_dilemma(), &[1, 1], 10).unwrap();
        assert!(d.converged);
        assert_eq!(d.rounds, 1);

        let d = best_response_dynamics(&matching_pennies(), &[0, 0], 8).unwrap();
        assert!(!d.converged);
        let cycle: Vec<Profile> = d.trajectory[1..5].to_vec();
        assert_eq!(cycle, vec![vec![0, 0], vec![0, 1], vec![1, 1], vec![1, 0]]);
        assert_eq!(d.trajectory[5], vec![0, 0]);

        let d = best_response_dynamics(&coordination(), &[0, 1], 10).unwrap();
        assert!(d.converged);
        let end = d.trajectory.last().unwrap();
        assert!(end == &vec![0, 0] || end == &vec![1, 1]);
        assert!(pure_nash(&coordination()).unwrap().contains(end));

        assert!(best_response_dynamics(&coordination(), &[0, 2], 3).is_err());
        assert!(best_response_dynamics(&coordination(), &[0, 0], 0).is_err());
    }

    #[test]
    fn dominance_examples() {
        assert_eq!(dominant_strategy_report(&prisoners_dilemma()), vec![Some(1), Some(1)]);
        assert_eq!(dominant_strategy_report(&matching_pennies()), vec![None, None]);
        let single = NormalFormGame::new(vec![1, 1], vec![1.0, 1.0]).unwrap();
        assert_eq!(dominant_strategy_report(&single), vec![None, None]);
    }

    #[test]
    fn joint_improvement_examples() {
        let j = joint_improvability(&prisoners_dilemma(), &[1, 1], 2).unwrap().unwrap();
        assert_eq!(j.coalition, vec![0, 1]);
        assert_eq!(j.deviation, vec![0, 0]);

        let common = NormalFormGame::bimatrix(&[vec![4.0, 1.0], vec![1.0, 2.0]], &[vec![4.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(joint_improvability(&common, &[0, 0], 2).unwrap(), None);

        // players 1 and 2 gain by jointly switching to action 1; player 0 is inert
        let g = NormalFormGame::from_fn(vec![2, 2, 2], |p| {
            let pair = if p[1] == 1 && p[2] == 1 { 5.0 } else { 1.0 };
            vec![0.0, pair, pair]
        })
        .unwrap();
        let j = joint_improvability(&g, &[0, 0, 0], 2).unwrap().unwrap();
        assert_eq!(j.coalition, vec![1, 2]);
        assert_eq!(j.deviation, vec![1, 1]);
    }
}
