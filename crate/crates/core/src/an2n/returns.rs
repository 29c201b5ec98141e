use crate::error::{Error, Result};
use crate::replay::{EvalTrajectory, KeyStateEntry};

/// A discount factor in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discount(f64);

impl Discount {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid("gamma", format!("{gamma} is outside [0, 1]")));
        }
        Ok(Discount(gamma))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Bootstrapped discounted return of every step of a trajectory:
///
/// `R_t = Σ_{k=t}^{T-1} γ^{k-t} r_k + γ^{T-t} · terminal_value`
///
/// computed in one backward sweep `R_t = r_t + γ R_{t+1}` with
/// `R_T = terminal_value`.
pub fn score_returns(rewards: &[f64], terminal_value: f64, gamma: Discount) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let g = gamma.get();
    let mut out = vec![0.0; rewards.len()];
    let mut acc = terminal_value;
    for (slot, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + g * acc;
        *slot = acc;
    }
    Ok(out)
}

pub fn score_trajectory(traj: &EvalTrajectory, terminal_value: f64, gamma: Discount) -> Result<Vec<f64>> {
    score_returns(&traj.rewards, terminal_value, gamma)
}

/// The `count` states with the smallest returns, lowest first. Ties keep the
/// earlier index first; `count` larger than the trajectory takes everything.
pub fn select_worst(states: &[Vec<f64>], returns: &[f64], count: usize, epoch: usize) -> Result<Vec<KeyStateEntry>> {
    if states.len() != returns.len() {
        return Err(Error::shape("select_worst returns", states.len(), returns.len()));
    }
    let mut order: Vec<usize> = (0..returns.len()).collect();
    order.sort_by(|&a, &b| returns[a].total_cmp(&returns[b]));
    Ok(order
        .into_iter()
        .take(count)
        .map(|i| KeyStateEntry { state: states[i].clone(), score: returns[i], epoch })
        .collect())
}

/// Magnitudes below this count as a zero trajectory return.
pub const ZERO_RETURN_EPS: f64 = 1e-12;

/// How many key states to keep from one trajectory:
/// `round(clip(20·(avg/traj)², lower, upper))`.
///
/// A (near-)zero trajectory return, or one whose sign differs from the
/// average, yields `upper`.
pub fn key_state_count(avg_reward: f64, traj_reward: f64, lower: usize, upper: usize) -> usize {
    if traj_reward.abs() < ZERO_RETURN_EPS
        || (avg_reward * traj_reward < 0.0)
        || !avg_reward.is_finite()
        || !traj_reward.is_finite()
    {
        return upper;
    }
    let ratio = avg_reward / traj_reward;
    let raw = 20.0 * ratio * ratio;
    if !raw.is_finite() {
        return upper;
    }
    raw.clamp(lower as f64, upper as f64).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(rewards: &[f64], v: f64, g: f64) -> Vec<f64> {
        let t_end = rewards.len();
        (0..t_end)
            .map(|t| {
                let mut s = 0.0;
                for (k, r) in rewards.iter().enumerate().skip(t) {
                    s += g.powi((k - t) as i32) * r;
                }
                s + g.powi((t_end - t) as i32) * v
            })
            .collect()
    }

    #[test]
    fn zero_discount_gives_immediate_rewards() {
        let r = [3.0, -1.0, 0.5];
        assert_eq!(score_returns(&r, 100.0, Discount::new(0.0).unwrap()).unwrap(), r.to_vec());
    }

    #[test]
    fn worked_example() {
        let got = score_returns(&[1.0, 1.0, 1.0], 4.0, Discount::new(0.5).unwrap()).unwrap();
        assert_eq!(got[0], 2.25);
        assert_eq!(got, brute_force(&[1.0, 1.0, 1.0], 4.0, 0.5));
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(score_returns(&[], 0.0, Discount::new(0.9).unwrap()), Err(Error::EmptyTrajectory)));
        assert!(Discount::new(1.01).is_err());
    }

    #[test]
    fn worst_states() {
        let states = vec![vec![0.0], vec![1.0], vec![2.0]];
        let picked = select_worst(&states, &[3.0, 1.0, 2.0], 1, 0).unwrap();
        assert_eq!(picked.len(), 1);
        assert_eq!(picked[0].state, vec![1.0]);
        assert!(select_worst(&states, &[3.0, 1.0, 2.0], 0, 0).unwrap().is_empty());
        let all = select_worst(&states, &[3.0, 1.0, 2.0], 10, 0).unwrap();
        assert_eq!(all.iter().map(|e| e.score).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn ties_prefer_earlier_states() {
        let states = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let picked = select_worst(&states, &[1.0, 0.0, 1.0, 0.0], 3, 2).unwrap();
        assert_eq!(picked.iter().map(|e| e.state[0]).collect::<Vec<_>>(), vec![1.0, 3.0, 0.0]);
        assert!(picked.iter().all(|e| e.epoch == 2));
    }

    #[test]
    fn clip_formula_examples() {
        assert_eq!(key_state_count(100.0, 200.0, 5, 20), 5);
        assert_eq!(key_state_count(100.0, 100.0, 5, 20), 20);
        assert_eq!(key_state_count(100.0, 50.0, 5, 20), 20);
        assert_eq!(key_state_count(100.0, 0.0, 5, 20), 20);
        assert_eq!(key_state_count(100.0, -50.0, 5, 20), 20);
        // 20 · (0.6)² = 7.2
        assert_eq!(key_state_count(-60.0, -100.0, 5, 20), 7);
    }

    proptest! {
        #[test]
        fn one_step_recurrence_holds(
            rewards in prop::collection::vec(-10.0f64..10.0, 1..60),
            v in -50.0f64..50.0,
            g in 0.0f64..=1.0,
        ) {
            let out = score_returns(&rewards, v, Discount::new(g).unwrap()).unwrap();
            let n = rewards.len();
            for t in 0..n {
                let next = if t + 1 < n { out[t + 1] } else { v };
                prop_assert!((out[t] - (rewards[t] + g * next)).abs() <= 1e-12 * (1.0 + out[t].abs()));
            }
        }

        #[test]
        fn selection_is_the_sorted_prefix(returns in prop::collection::vec(-5i32..5, 0..30), count in 0usize..40) {
            let returns: Vec<f64> = returns.into_iter().map(f64::from).collect();
            let states: Vec<Vec<f64>> = (0..returns.len()).map(|i| vec![i as f64]).collect();
            let picked = select_worst(&states, &returns, count, 0).unwrap();
            prop_assert_eq!(picked.len(), count.min(returns.len()));
            let mut chosen = vec![false; returns.len()];
            for e in &picked {
                chosen[e.state[0] as usize] = true;
            }
            // Nothing left behind is strictly worse than anything chosen.
            let worst_left = returns.iter().zip(&chosen).filter(|(_, c)| !**c).map(|(r, _)| *r).fold(f64::INFINITY, f64::min);
            for e in &picked {
                prop_assert!(e.score <= worst_left);
            }
        }
    }
}
