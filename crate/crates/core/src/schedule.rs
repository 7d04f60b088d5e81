//! Piecewise-constant reference heading with tracking-error triggered switches.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Role, SwarmState};
use crate::{Error, Result, Scalar};

/// One logged switch: the sampling index and the maximum heading error that
/// triggered it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SwitchRecord<T> {
    pub k: usize,
    pub max_error: T,
    /// Segment entered by the switch.
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ReferenceSchedule<T> {
    headings: Vec<T>,
    epsilon: T,
    current: usize,
    switch_log: Vec<SwitchRecord<T>>,
    /// Measure the trigger over followers only instead of all agents.
    #[serde(default)]
    followers_only: bool,
}

impl<T: Scalar> ReferenceSchedule<T> {
    pub fn new(headings: Vec<T>, epsilon: T) -> Result<Self> {
        if headings.is_empty() {
            return Err(Error::param("schedule", "needs at least one heading"));
        }
        if let Some(h) = headings.iter().find(|h| !h.is_finite()) {
            return Err(Error::param("schedule", format!("heading {h} is not finite")));
        }
        if !(epsilon > T::zero() && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(Self { headings, epsilon, current: 0, switch_log: Vec::new(), followers_only: false })
    }

    pub fn constant(heading: T, epsilon: T) -> Result<Self> {
        Self::new(vec![heading], epsilon)
    }

    pub fn followers_only(mut self, yes: bool) -> Self {
        self.followers_only = yes;
        self
    }

    pub fn headings(&self) -> &[T] {
        &self.headings
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn segment(&self) -> usize {
        self.current
    }

    pub fn segment_count(&self) -> usize {
        self.headings.len()
    }

    pub fn is_final_segment(&self) -> bool {
        self.current + 1 == self.headings.len()
    }

    pub fn switch_log(&self) -> &[SwitchRecord<T>] {
        &self.switch_log
    }

    pub fn current_heading(&self) -> T {
        self.headings[self.current]
    }

    /// `D_k = |θ̄_{k+1} − θ̄_k|`.
    pub fn jumps(&self) -> Vec<T> {
        self.headings.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
    }

    /// `Σ_k D_k`.
    pub fn total_variation(&self) -> T {
        self.jumps().into_iter().fold(T::zero(), |a, d| a + d)
    }

    /// Maximum `|θ_i − θ̄_current|` over the agents the trigger watches.
    pub fn tracking_error(&self, state: &SwarmState<T>) -> T {
        self.tracking_error_against(state, self.current_heading())
    }

    pub fn tracking_error_against(&self, state: &SwarmState<T>, target: T) -> T {
        state
            .agents
            .iter()
            .zip(&state.roles)
            .filter(|(_, r)| !self.followers_only || **r == Role::Follower)
            .map(|(a, _)| (a.heading - target).abs())
            .fold(T::zero(), T::max)
    }

    /// Advances to the next segment when the tracking error at the state's
    /// sampling instant is within `ε`. At most one switch per instant.
    pub fn maybe_advance(&mut self, state: &SwarmState<T>) -> bool {
        if self.is_final_segment() {
            return false;
        }
        let k = state.sample_index;
        if self.switch_log.last().is_some_and(|s| s.k >= k) {
            return false;
        }
        let err = self.tracking_error(state);
        if err <= self.epsilon {
            self.current += 1;
            self.switch_log.push(SwitchRecord { k, max_error: err, segment: self.current });
            true
        } else {
            false
        }
    }

    /// A priori switching instants `K_1, K_2, …` from the contraction factor
    /// `α̂ = 1 − ϑα_n/2`: the first segment needs
    /// `⌈log(ε/(|θ̄_0| + L_n))/log α̂⌉ + 1` steps, segment `p` another
    /// `⌈log(ε/(ε + D_{p−1}))/log α̂⌉ + 1`. Empty when `α̂ ∉ (0, 1)`.
    pub fn a_priori_switch_bounds(&self, vartheta: T, alpha_n: T, l_n: T) -> Vec<usize> {
        let alpha_hat = T::one() - vartheta * alpha_n / T::lit(2.0);
        if !(alpha_hat > T::zero() && alpha_hat < T::one()) {
            return Vec::new();
        }
        let steps = |ratio: T| -> usize {
            let s = (ratio.ln() / alpha_hat.ln()).ceil();
            if s > T::zero() {
                s.as_f64() as usize + 1
            } else {
                1
            }
        };
        let mut bounds = Vec::with_capacity(self.headings.len().saturating_sub(1));
        if self.headings.len() < 2 {
            return bounds;
        }
        let mut k = steps(self.epsilon / (self.headings[0].abs() + l_n));
        bounds.push(k);
        for d in self.jumps().into_iter().take(self.headings.len() - 2) {
            k += steps(self.epsilon / (self.epsilon + d));
            bounds.push(k);
        }
        bounds
    }

    /// Rechecks every logged switch against `ε`.
    pub fn log_is_sound(&self) -> bool {
        self.switch_log.windows(2).all(|w| w[0].k < w[1].k)
            && self.switch_log.iter().all(|s| s.max_error <= self.epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::AgentState;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fig3() -> ReferenceSchedule<f64> {
        ReferenceSchedule::new(vec![0.0, FRAC_PI_2, 0.0, -FRAC_PI_2, 0.0], 0.05).unwrap()
    }

    fn at(headings: &[f64], k: usize) -> SwarmState<f64> {
        let mut s = SwarmState::leaderless(headings.iter().map(|&h| AgentState::new(0.0, 0.0, h, 0.0)).collect());
        s.sample_index = k;
        s
    }

    #[test]
    fn total_variation_values() {
        assert!((fig3().total_variation() - 2.0 * PI).abs() < 1e-15);
        assert_eq!(ReferenceSchedule::constant(1.0, 0.05).unwrap().total_variation(), 0.0);
        assert_eq!(ReferenceSchedule::new(vec![0.3, 0.3, 0.3], 0.05).unwrap().total_variation(), 0.0);
    }

    #[test]
    fn switch_when_on_target() {
        let mut s = fig3();
        assert!(s.maybe_advance(&at(&[0.0, 0.0], 0)));
        assert_eq!(s.segment(), 1);
        assert_eq!(s.current_heading(), FRAC_PI_2);
    }

    #[test]
    fn no_switch_when_one_agent_is_off() {
        let mut s = fig3();
        assert!(!s.maybe_advance(&at(&[0.0, 0.1], 0)));
        assert_eq!(s.segment(), 0);
    }

    #[test]
    fn one_switch_per_instant() {
        let mut s = ReferenceSchedule::new(vec![0.0, 0.0, 0.0], 0.05).unwrap();
        let state = at(&[0.0], 4);
        assert!(s.maybe_advance(&state));
        assert!(!s.maybe_advance(&state));
        assert!(s.maybe_advance(&at(&[0.0], 5)));
        assert!(!s.maybe_advance(&at(&[0.0], 6)));
        assert_eq!(s.switch_log().iter().map(|r| r.k).collect::<Vec<_>>(), vec![4, 5]);
        assert!(s.log_is_sound());
    }

    #[test]
    fn followers_only_ignores_leaders() {
        let mut state = at(&[0.0, 1.0], 0);
        state.roles[1] = Role::Leader;
        let mut all = fig3();
        assert!(!all.maybe_advance(&state));
        let mut followers = fig3().followers_only(true);
        assert!(followers.maybe_advance(&state));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ReferenceSchedule::<f64>::new(vec![], 0.05).is_err());
        assert!(ReferenceSchedule::new(vec![0.0], 0.0).is_err());
        assert!(ReferenceSchedule::new(vec![f64::NAN], 0.1).is_err());
    }

    #[test]
    fn a_priori_bounds_are_increasing() {
        let b = fig3().a_priori_switch_bounds(0.5, 0.15, 0.1);
        assert_eq!(b.len(), 4);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        // α̂ = 0.9625; first segment: log(0.05/0.1)/log α̂ = 18.13 → 19 + 1
        assert_eq!(b[0], 20);
        assert!(fig3().a_priori_switch_bounds(0.0, 0.15, 0.1).is_empty());
    }
}
