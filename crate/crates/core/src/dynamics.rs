//! Hybrid closed loop: discrete heading/speed updates at sampling instants,
//! linear interpolation within dwell intervals and exact position integration.

use nalgebra::RealField;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Position2D, ProximityGraph, STRICT_ETA_MAX};
use crate::metrics::{MetricsTracker, StepMetrics};
use crate::schedule::ReferenceSchedule;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Follower,
    Leader,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Follower => "follower",
            Role::Leader => "leader",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState<T> {
    pub position: Position2D<T>,
    /// Unwrapped heading in radians.
    pub heading: T,
    pub speed: T,
}

impl<T: Scalar> AgentState<T> {
    pub fn new(x: T, y: T, heading: T, speed: T) -> Self {
        Self { position: Position2D::new(x, y), heading, speed }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.heading.is_finite() && self.speed.is_finite()
    }
}

/// All agents at one sampling instant `t_k = k·τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SwarmState<T> {
    pub agents: Vec<AgentState<T>>,
    pub roles: Vec<Role>,
    pub sample_index: usize,
}

impl<T: Scalar> SwarmState<T> {
    /// All-follower swarm at `k = 0`.
    pub fn leaderless(agents: Vec<AgentState<T>>) -> Self {
        let roles = vec![Role::Follower; agents.len()];
        Self { agents, roles, sample_index: 0 }
    }

    pub fn with_roles(agents: Vec<AgentState<T>>, roles: Vec<Role>) -> Result<Self> {
        if agents.len() != roles.len() {
            return Err(Error::DimensionMismatch { left: (agents.len(), 1), right: (roles.len(), 1) });
        }
        Ok(Self { agents, roles, sample_index: 0 })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn positions(&self) -> Vec<Position2D<T>> {
        self.agents.iter().map(|a| a.position).collect()
    }

    pub fn headings(&self) -> Vec<T> {
        self.agents.iter().map(|a| a.heading).collect()
    }

    pub fn speeds(&self) -> Vec<T> {
        self.agents.iter().map(|a| a.speed).collect()
    }

    pub fn leader_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Leader).count()
    }

    pub fn has_leaders(&self) -> bool {
        self.roles.contains(&Role::Leader)
    }

    pub fn graph(&self, params: &ModelParams<T>) -> Result<ProximityGraph<T>> {
        ProximityGraph::build_with(&self.positions(), params.radius, params.self_inclusive)
    }
}

/// Model parameters. Field names follow their role: `radius` is `r_n`,
/// `tau` the dwell time, `vartheta` the leader mixing weight, `eta` the
/// annulus constant and `c`, `c_prime` the drift-budget constants
/// (`η_n = c·r_n²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct ModelParams<T> {
    /// Follower count.
    pub n: usize,
    /// Leader-to-follower ratio; `0` means leaderless.
    pub alpha_n: T,
    pub radius: T,
    /// Maximum initial speed, also the desired speed for leaders.
    pub v_n: T,
    pub tau: T,
    pub vartheta: T,
    pub eta: T,
    pub c: T,
    pub c_prime: T,
    /// Tracking error that triggers a reference switch.
    pub epsilon: T,
    /// Constant of the initial leader-deviation estimate `L_n`.
    pub c1: T,
    pub strict: bool,
    pub self_inclusive: bool,
}

impl<T: Scalar> Default for ModelParams<T> {
    fn default() -> Self {
        Self {
            n: 50,
            alpha_n: T::zero(),
            radius: T::lit(0.4),
            v_n: T::lit(0.05),
            tau: T::lit(0.01),
            vartheta: T::lit(0.5),
            eta: T::lit(STRICT_ETA_MAX),
            c: T::lit(STRICT_C_MAX),
            c_prime: T::lit(STRICT_C_PRIME_MAX),
            epsilon: T::lit(0.05),
            c1: T::one(),
            strict: false,
            self_inclusive: true,
        }
    }
}

pub const STRICT_C_MAX: f64 = 1.0 / (144.0 * 320.0);
pub const STRICT_C_PRIME_MAX: f64 = 1.0 / 144.0;

impl<T: Scalar> ModelParams<T> {
    pub fn leaderless(n: usize, radius: T, v_n: T, tau: T) -> Self {
        Self { n, radius, v_n, tau, ..Default::default() }
    }

    pub fn with_leaders(n: usize, alpha_n: T, radius: T, v_n: T, tau: T, vartheta: T) -> Self {
        Self { n, alpha_n, radius, v_n, tau, vartheta, ..Default::default() }
    }

    /// `ρ_n = ⌈n·α_n⌉`, rounding guarded against representation error.
    pub fn leader_count(&self) -> usize {
        if self.alpha_n <= T::zero() {
            return 0;
        }
        let product = (T::from_count(self.n) * self.alpha_n).as_f64();
        (product - 1e-9).ceil().max(0.0) as usize
    }

    pub fn agent_count(&self) -> usize {
        self.n + self.leader_count()
    }

    /// Drift budget `η_n = c·r_n²`.
    pub fn eta_n(&self) -> T {
        self.c * self.radius * self.radius
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        if self.n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        positive("radius", self.radius)?;
        positive("tau", self.tau)?;
        positive("eta", self.eta)?;
        positive("c", self.c)?;
        positive("c_prime", self.c_prime)?;
        positive("epsilon", self.epsilon)?;
        if !(self.v_n >= T::zero()) || !self.v_n.is_finite() {
            return Err(Error::param("v_n", format!("must be non-negative, got {}", self.v_n)));
        }
        if !(self.alpha_n >= T::zero() && self.alpha_n <= T::one()) {
            return Err(Error::param("alpha_n", format!("must lie in [0, 1], got {}", self.alpha_n)));
        }
        if !(self.vartheta >= T::zero() && self.vartheta <= T::one()) {
            return Err(Error::param("vartheta", format!("must lie in [0, 1], got {}", self.vartheta)));
        }
        if self.strict {
            if self.vartheta <= T::zero() {
                return Err(Error::param("vartheta", "strict mode requires vartheta > 0"));
            }
            if self.c > T::lit(STRICT_C_MAX) {
                return Err(Error::param("c", format!("strict mode requires c <= 1/46080, got {}", self.c)));
            }
            if self.c_prime > T::lit(STRICT_C_PRIME_MAX) {
                return Err(Error::param(
                    "c_prime",
                    format!("strict mode requires c_prime <= 1/144, got {}", self.c_prime),
                ));
            }
            if self.eta > T::lit(STRICT_ETA_MAX) {
                return Err(Error::param("eta", format!("strict mode requires eta <= 1/512, got {}", self.eta)));
            }
        }
        Ok(())
    }
}

/// Stream ids for the per-agent ChaCha8 streams.
const POSITION_STREAM: u64 = 0;
const HEADING_STREAM: u64 = 1;
const SPEED_STREAM: u64 = 2;

fn agent_rng(seed: u64, agent: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3 * agent as u64 + stream);
    rng
}

/// Independent uniform initial states: positions on `[0,1)²`, headings on
/// `[−π, π)`, speeds on `[0, v_n]`. Followers take indices `0..n`, leaders the
/// last `ρ_n` indices.
///
/// Every agent draws from its own ChaCha8 streams (`3i`, `3i+1`, `3i+2` for
/// position, heading and speed), so adding agents never perturbs the draws of
/// existing ones.
pub fn sample_initial<T: Scalar>(params: &ModelParams<T>, seed: u64) -> SwarmState<T> {
    let total = params.agent_count();
    let unit = Uniform::new(T::zero(), T::one()).expect("unit interval");
    let heading = Uniform::new(-T::PI(), T::PI()).expect("heading interval");
    let speed = Uniform::new_inclusive(T::zero(), params.v_n).expect("speed interval");
    let agents = (0..total)
        .map(|i| {
            let mut pos_rng = agent_rng(seed, i, POSITION_STREAM);
            let x = unit.sample(&mut pos_rng);
            let y = unit.sample(&mut pos_rng);
            AgentState::new(
                x,
                y,
                heading.sample(&mut agent_rng(seed, i, HEADING_STREAM)),
                speed.sample(&mut agent_rng(seed, i, SPEED_STREAM)),
            )
        })
        .collect();
    let roles = (0..total).map(|i| if i < params.n { Role::Follower } else { Role::Leader }).collect();
    SwarmState { agents, roles, sample_index: 0 }
}

/// Mean of `values[j] − values[i]` over the neighbourhood, added back to
/// `values[i]`; a synchronised neighbourhood maps to itself exactly.
#[inline]
fn neighbor_average<T: Scalar>(i: usize, neighbors: &[usize], values: &[T]) -> T {
    if neighbors.is_empty() {
        return values[i];
    }
    let own = values[i];
    let sum = neighbors.iter().fold(T::zero(), |acc, &j| acc + (values[j] - own));
    own + sum / T::from_count(neighbors.len())
}

fn next_instant<T: Scalar>(state: &SwarmState<T>, mut update: impl FnMut(usize) -> (T, T)) -> SwarmState<T> {
    let agents = state
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let (heading, speed) = update(i);
            AgentState { position: a.position, heading, speed }
        })
        .collect();
    SwarmState { agents, roles: state.roles.clone(), sample_index: state.sample_index + 1 }
}

/// Nearest-neighbour averaging of headings and speeds for every agent,
/// `θ(t_{k+1}) = P(t_k) θ(t_k)`. Positions are left untouched.
pub fn leaderless_step<T: Scalar>(state: &SwarmState<T>, graph: &ProximityGraph<T>) -> SwarmState<T> {
    let headings = state.headings();
    let speeds = state.speeds();
    next_instant(state, |i| {
        let nb = graph.neighbors(i);
        (neighbor_average(i, nb, &headings), neighbor_average(i, nb, &speeds))
    })
}

/// Followers average; leaders blend the average with the reference:
/// `θ_i ← ϑ θ̄ + (1 − ϑ)·avg`, and likewise for the speed with `v_n`.
pub fn leader_step<T: Scalar>(
    state: &SwarmState<T>,
    graph: &ProximityGraph<T>,
    reference_heading: T,
    reference_speed: T,
    vartheta: T,
) -> SwarmState<T> {
    let headings = state.headings();
    let speeds = state.speeds();
    let keep = T::one() - vartheta;
    next_instant(state, |i| {
        let nb = graph.neighbors(i);
        let heading = neighbor_average(i, nb, &headings);
        let speed = neighbor_average(i, nb, &speeds);
        match state.roles[i] {
            Role::Follower => (heading, speed),
            // θ̄ + (1−ϑ)(avg − θ̄): exact at ϑ = 1 and at the fixed point
            Role::Leader => (
                reference_heading + keep * (heading - reference_heading),
                reference_speed + keep * (speed - reference_speed),
            ),
        }
    })
}

/// Headings and speeds at `t_k + s·τ`, linear in `s ∈ [0, 1]`.
pub fn interpolate<T: Scalar>(state_k: &SwarmState<T>, state_k1: &SwarmState<T>, s: T) -> Result<Vec<(T, T)>> {
    if !(s >= T::zero() && s <= T::one()) {
        return Err(Error::InterpolationRange(s.as_f64()));
    }
    if state_k.len() != state_k1.len() {
        return Err(Error::DimensionMismatch { left: (state_k.len(), 1), right: (state_k1.len(), 1) });
    }
    let r = T::one() - s;
    Ok(state_k
        .agents
        .iter()
        .zip(&state_k1.agents)
        .map(|(a, b)| (r * a.heading + s * b.heading, r * a.speed + s * b.speed))
        .collect())
}

/// `sin(x)/x`.
fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

/// `(sin x − x cos x)/x³`, with its Taylor series near zero where the direct
/// form cancels.
fn sin_minus_x_cos_over_cube<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(0.25) {
        // Σ_{k≥1} (−1)^{k+1} 2k x^{2k−2} / (2k+1)!
        const COEFFS: [f64; 6] = [
            1.0 / 3.0,
            -1.0 / 30.0,
            1.0 / 840.0,
            -1.0 / 45_360.0,
            1.0 / 3_991_680.0,
            -1.0 / 518_918_400.0,
        ];
        let x2 = x * x;
        COEFFS.iter().rev().fold(T::zero(), |acc, &c| acc * x2 + T::lit(c))
    } else {
        (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// Displacement over one dwell interval when heading and speed move linearly
/// from `(heading0, speed0)` to `(heading1, speed1)`.
///
/// Expanding around the interval midpoint gives
/// `Δx = τ[m cos μ · sinc h − (ΔvΔθ/4) sin μ · g(h)]` and
/// `Δy = τ[m sin μ · sinc h + (ΔvΔθ/4) cos μ · g(h)]`, with mean speed `m`,
/// mid heading `μ`, half turn `h = Δθ/2` and `g(h) = (sin h − h cos h)/h³`.
pub fn interval_displacement<T: Scalar>(heading0: T, heading1: T, speed0: T, speed1: T, tau: T) -> (T, T) {
    let half = T::lit(0.5);
    let mean_speed = half * (speed0 + speed1);
    let turn = heading1 - heading0;
    let mid = heading0 + half * turn;
    let h = half * turn;
    let (sin_mid, cos_mid) = mid.sin_cos();
    let s = sinc(h);
    let cross = (speed1 - speed0) * turn * T::lit(0.25) * sin_minus_x_cos_over_cube(h);
    (
        tau * (mean_speed * cos_mid * s - cross * sin_mid),
        tau * (mean_speed * sin_mid * s + cross * cos_mid),
    )
}

/// Closed form of `∫₀^τ (a + b s)(cos, sin)(c + d s) ds`.
pub fn displacement<T: Scalar>(a: T, b: T, c: T, d: T, tau: T) -> (T, T) {
    interval_displacement(c, c + d * tau, a, a + b * tau, tau)
}

/// Positions at `t_{k+1}` given the endpoint headings and speeds. No walls:
/// agents may leave the unit square.
pub fn advance_positions<T: Scalar>(state_k: &SwarmState<T>, state_k1: &SwarmState<T>, tau: T) -> Vec<Position2D<T>> {
    state_k
        .agents
        .iter()
        .zip(&state_k1.agents)
        .map(|(a, b)| {
            let (dx, dy) = interval_displacement(a.heading, b.heading, a.speed, b.speed, tau);
            Position2D::new(a.position.x + dx, a.position.y + dy)
        })
        .collect()
}

/// Which discrete update rule the run uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "snake_case")]
pub enum Controller<T> {
    Leaderless,
    LeaderConstant { heading: T },
    LeaderDynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub k: usize,
    pub connected: bool,
    pub components: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub edges: usize,
    /// Agents outside the unit square.
    pub exits: usize,
}

impl GraphDiagnostics {
    pub fn of<T: Scalar>(k: usize, state: &SwarmState<T>, graph: &ProximityGraph<T>) -> Self {
        let degrees = graph.degrees();
        let components = graph.component_count();
        Self {
            k,
            connected: components == 1,
            components,
            min_degree: degrees.iter().copied().min().unwrap_or(0),
            max_degree: degrees.iter().copied().max().unwrap_or(0),
            edges: graph.edges().len(),
            exits: state.agents.iter().filter(|a| !a.position.in_unit_square()).count(),
        }
    }
}

/// Sampled trajectory of one run.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub params: ModelParams<T>,
    pub controller: Controller<T>,
    /// States at `k = 0..=steps`.
    pub states: Vec<SwarmState<T>>,
    /// Reference heading applied over `[t_k, t_{k+1})`, one per step.
    pub references: Vec<Option<T>>,
    /// Graph diagnostics at every sampling instant.
    pub diagnostics: Vec<GraphDiagnostics>,
    pub metrics: Vec<StepMetrics<T>>,
    /// Final schedule state including its switch log (dynamic runs only).
    pub schedule: Option<ReferenceSchedule<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn initial(&self) -> &SwarmState<T> {
        &self.states[0]
    }

    pub fn last(&self) -> &SwarmState<T> {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn connectivity_preserved(&self) -> bool {
        self.diagnostics.iter().all(|d| d.connected)
    }
}

/// Simulates `steps` dwell intervals: rebuild the graph from the current
/// positions, apply the discrete update, integrate positions exactly.
pub fn run_epoch<T: Scalar + RealField>(
    state: SwarmState<T>,
    params: &ModelParams<T>,
    steps: usize,
    controller: Controller<T>,
    schedule: Option<ReferenceSchedule<T>>,
) -> Result<Trajectory<T>> {
    if steps == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    params.validate()?;
    if state.is_empty() {
        return Err(Error::EmptySwarm);
    }
    if let Some(i) = state.agents.iter().position(|a| !a.is_finite()) {
        return Err(Error::param("state", format!("agent {i} is not finite")));
    }
    let mut schedule = schedule;
    if matches!(controller, Controller::LeaderDynamic) && schedule.is_none() {
        return Err(Error::Config("dynamic leader mode requires a reference schedule".into()));
    }

    let mut graph = state.graph(params)?;
    let mut tracker = MetricsTracker::new(&state, &graph, params.v_n)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut references = Vec::with_capacity(steps);
    let mut diagnostics = Vec::with_capacity(steps + 1);
    let mut metrics = Vec::with_capacity(steps + 1);
    let mut current = state;

    for k in 0..steps {
        let reference = match controller {
            Controller::Leaderless => None,
            Controller::LeaderConstant { heading } => Some(heading),
            Controller::LeaderDynamic => {
                let sched = schedule.as_mut().expect("checked above");
                sched.maybe_advance(&current);
                Some(sched.current_heading())
            }
        };
        diagnostics.push(GraphDiagnostics::of(k, &current, &graph));
        metrics.push(tracker.observe(&current, &graph, reference)?);

        let mut next = match reference {
            None => leaderless_step(&current, &graph),
            Some(h) => leader_step(&current, &graph, h, params.v_n, params.vartheta),
        };
        let positions = advance_positions(&current, &next, params.tau);
        for (agent, p) in next.agents.iter_mut().zip(positions) {
            agent.position = p;
        }
        debug_assert!(next.agents.iter().all(|a| a.speed >= -T::lit(1e-12)));
        references.push(reference);
        states.push(std::mem::replace(&mut current, next));
        graph = current.graph(params)?;
    }
    let final_reference = references.last().copied().flatten();
    diagnostics.push(GraphDiagnostics::of(steps, &current, &graph));
    metrics.push(tracker.observe(&current, &graph, final_reference)?);
    states.push(current);

    Ok(Trajectory {
        params: params.clone(),
        controller,
        states,
        references,
        diagnostics,
        metrics,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_position_oracle;
    use proptest::prelude::*;

    fn swarm(values: &[(f64, f64, f64, f64)]) -> SwarmState<f64> {
        SwarmState::leaderless(values.iter().map(|&(x, y, h, v)| AgentState::new(x, y, h, v)).collect())
    }

    fn path_state() -> SwarmState<f64> {
        swarm(&[(0.0, 0.0, 0.0, 0.1), (0.1, 0.0, 0.3, 0.2), (0.2, 0.0, 0.6, 0.3)])
    }

    #[test]
    fn path_headings_follow_self_inclusive_average() {
        let state = path_state();
        let g = ProximityGraph::build(&state.positions(), 0.15).unwrap();
        let next = leaderless_step(&state, &g);
        let expect = [0.15, 0.3, 0.45];
        for (a, e) in next.headings().iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(next.positions(), state.positions());
        assert_eq!(next.sample_index, 1);
    }

    #[test]
    fn complete_graph_reaches_mean_in_one_step() {
        let state = swarm(&[(0.5, 0.5, -1.0, 0.0), (0.5, 0.5, 0.5, 0.2), (0.5, 0.5, 2.0, 0.4)]);
        let g = ProximityGraph::build(&state.positions(), 0.1).unwrap();
        let next = leaderless_step(&state, &g);
        for a in &next.agents {
            assert!((a.heading - 0.5).abs() < 1e-15);
            assert!((a.speed - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_agent_holds_state() {
        let state = swarm(&[(0.0, 0.0, 1.3, 0.2), (0.9, 0.9, -0.4, 0.1)]);
        for self_inclusive in [true, false] {
            let g = ProximityGraph::build_with(&state.positions(), 0.1, self_inclusive).unwrap();
            let next = leaderless_step(&state, &g);
            assert_eq!(next.headings(), state.headings());
            assert_eq!(next.speeds(), state.speeds());
        }
    }

    fn leader_pair() -> SwarmState<f64> {
        SwarmState::with_roles(
            vec![AgentState::new(0.0, 0.0, 0.0, 0.0), AgentState::new(0.1, 0.0, 0.0, 0.0)],
            vec![Role::Follower, Role::Leader],
        )
        .unwrap()
    }

    #[test]
    fn leader_half_mixing() {
        let state = leader_pair();
        let g = ProximityGraph::build(&state.positions(), 0.3).unwrap();
        let next = leader_step(&state, &g, 1.0, 0.0, 0.5);
        assert_eq!(next.agents[0].heading, 0.0);
        assert_eq!(next.agents[1].heading, 0.5);
    }

    #[test]
    fn full_mixing_jumps_leaders_to_reference() {
        let state = sample_initial(&ModelParams::with_leaders(20, 0.3, 0.3, 0.2, 0.01, 1.0), 3);
        let g = ProximityGraph::build(&state.positions(), 0.3).unwrap();
        let next = leader_step(&state, &g, 0.7, 0.2, 1.0);
        for (a, r) in next.agents.iter().zip(&next.roles) {
            if *r == Role::Leader {
                assert_eq!((a.heading, a.speed), (0.7, 0.2));
            }
        }
    }

    #[test]
    fn reference_state_is_fixed_point() {
        let mut state = sample_initial(&ModelParams::with_leaders(15, 0.4, 0.4, 0.2, 0.01, 0.3), 11);
        for a in &mut state.agents {
            a.heading = 0.9;
            a.speed = 0.2;
        }
        let g = ProximityGraph::build(&state.positions(), 0.4).unwrap();
        let next = leader_step(&state, &g, 0.9, 0.2, 0.3);
        assert_eq!(next.headings(), state.headings());
        assert_eq!(next.speeds(), state.speeds());
    }

    #[test]
    fn sampling_is_deterministic() {
        let params = ModelParams::<f64>::with_leaders(30, 0.2, 0.3, 0.3, 0.01, 0.5);
        assert_eq!(sample_initial(&params, 42), sample_initial(&params, 42));
        assert_ne!(sample_initial(&params, 42), sample_initial(&params, 43));
    }

    #[test]
    fn sampling_moments() {
        let params = ModelParams::<f64>::leaderless(100_000, 0.1, 2.0, 0.01);
        let s = sample_initial(&params, 7);
        let n = s.len() as f64;
        let mean_v = s.speeds().iter().sum::<f64>() / n;
        let mean_h = s.headings().iter().sum::<f64>() / n;
        assert!((mean_v - 1.0).abs() < 3.0 * 2.0 / (12.0f64 * n).sqrt());
        let sd_h = 2.0 * std::f64::consts::PI / 12f64.sqrt();
        assert!(mean_h.abs() < 3.0 * sd_h / n.sqrt());
        assert!(s.agents.iter().all(|a| a.position.in_unit_square()));
        assert!(s.headings().iter().all(|h| (-std::f64::consts::PI..std::f64::consts::PI).contains(h)));
    }

    #[test]
    fn leader_count_rounds_up() {
        let p = ModelParams::<f64>::with_leaders(20, 0.15, 0.3, 0.3, 0.01, 0.5);
        assert_eq!(p.leader_count(), 3);
        let p = ModelParams::<f64>::with_leaders(100, 0.3, 0.3, 0.1, 0.01, 0.5);
        assert_eq!(p.leader_count(), 30);
        let p = ModelParams::<f64>::with_leaders(10, 0.11, 0.3, 0.1, 0.01, 0.5);
        assert_eq!(p.leader_count(), 2);
        let s = sample_initial(&ModelParams::<f64>::with_leaders(20, 0.15, 0.3, 0.3, 0.01, 0.5), 1);
        assert_eq!(s.roles[19], Role::Follower);
        assert_eq!(&s.roles[20..], &[Role::Leader; 3]);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let a = path_state();
        let g = ProximityGraph::build(&a.positions(), 0.15).unwrap();
        let b = leaderless_step(&a, &g);
        let at0 = interpolate(&a, &b, 0.0).unwrap();
        let at1 = interpolate(&a, &b, 1.0).unwrap();
        let mid = interpolate(&a, &b, 0.5).unwrap();
        for i in 0..3 {
            assert_eq!(at0[i], (a.agents[i].heading, a.agents[i].speed));
            assert_eq!(at1[i], (b.agents[i].heading, b.agents[i].speed));
            assert!((mid[i].0 - 0.5 * (a.agents[i].heading + b.agents[i].heading)).abs() < 1e-16);
        }
        assert!(matches!(interpolate(&a, &b, 1.5), Err(Error::InterpolationRange(_))));
        assert!(interpolate(&a, &b, -0.1).is_err());
    }

    #[test]
    fn constant_heading_displacement() {
        let (dx, dy) = displacement(0.3, 0.0, 0.7, 0.0, 0.01);
        assert!((dx - 0.003 * 0.7f64.cos()).abs() < 1e-16);
        assert!((dy - 0.003 * 0.7f64.sin()).abs() < 1e-16);
        assert_eq!(displacement(0.0, 0.0, 1.0, 5.0, 0.01), (0.0, 0.0));
    }

    #[test]
    fn half_turn_has_zero_x_displacement() {
        let (dx, dy) = displacement(1.0, 0.0, 0.0, 1.0, std::f64::consts::PI);
        assert!(dx.abs() < 1e-15);
        assert!((dy - 2.0).abs() < 1e-15);
    }

    #[test]
    fn near_singular_turn_matches_limit() {
        let (a, b, c, tau) = (0.4f64, -3.0, 1.1, 0.01);
        let limit = displacement(a, b, c, 0.0, tau);
        let near = displacement(a, b, c, 1e-15, tau);
        assert!((limit.0 - near.0).abs() < 1e-10 && (limit.1 - near.1).abs() < 1e-10);
        let oracle = integrate_position_oracle(a, b, c, 1e-15, tau).unwrap();
        assert!((oracle.0 - near.0).abs() < 1e-10 && (oracle.1 - near.1).abs() < 1e-10);
    }

    #[test]
    fn series_branch_is_continuous() {
        // Direct form is well conditioned at these arguments.
        for x in [0.2499999f64, 0.25, 0.2500001, 0.1] {
            let direct = (x.sin() - x * x.cos()) / (x * x * x);
            assert!((sin_minus_x_cos_over_cube(x) - direct).abs() < 1e-13, "{x}");
        }
        let below = sin_minus_x_cos_over_cube(0.25f64 - 1e-12);
        let above = sin_minus_x_cos_over_cube(0.25f64);
        assert!((below - above).abs() < 1e-13);
        assert!((sin_minus_x_cos_over_cube(1e-3f64) - (1.0 / 3.0 - 1e-6 / 30.0 + 1e-12 / 840.0)).abs() < 1e-15);
    }

    #[test]
    fn single_agent_moves_straight() {
        let params = ModelParams::<f64>::leaderless(1, 0.3, 0.2, 0.01);
        let state = swarm(&[(0.5, 0.5, 0.4, 0.2)]);
        let traj = run_epoch(state, &params, 10, Controller::Leaderless, None).unwrap();
        let last = traj.last().agents[0];
        assert_eq!(last.heading, 0.4);
        assert_eq!(last.speed, 0.2);
        assert!((last.position.x - (0.5 + 0.02 * 0.4f64.cos())).abs() < 1e-14);
        assert!((last.position.y - (0.5 + 0.02 * 0.4f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn zero_steps_rejected() {
        let params = ModelParams::<f64>::leaderless(1, 0.3, 0.2, 0.01);
        let err = run_epoch(swarm(&[(0.5, 0.5, 0.0, 0.0)]), &params, 0, Controller::Leaderless, None);
        assert!(err.is_err());
    }

    #[test]
    fn dynamic_mode_needs_schedule() {
        let params = ModelParams::<f64>::leaderless(1, 0.3, 0.2, 0.01);
        let err = run_epoch(swarm(&[(0.5, 0.5, 0.0, 0.0)]), &params, 3, Controller::LeaderDynamic, None);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn two_visible_agents_share_mean_heading() {
        let params = ModelParams::<f64>::leaderless(2, 0.5, 0.2, 0.01);
        let state = swarm(&[(0.4, 0.5, -0.6, 0.1), (0.5, 0.5, 1.0, 0.3)]);
        let traj = run_epoch(state, &params, 5, Controller::Leaderless, None).unwrap();
        for s in &traj.states[1..] {
            assert!((s.agents[0].heading - 0.2).abs() < 1e-15);
            assert!((s.agents[1].heading - 0.2).abs() < 1e-15);
            assert!((s.agents[0].speed - 0.2).abs() < 1e-15);
        }
        // after step 1 both translate rigidly
        let d = |s: &SwarmState<f64>| s.agents[0].position.distance(&s.agents[1].position);
        assert!((d(&traj.states[1]) - d(&traj.states[5])).abs() < 1e-15);
    }

    #[test]
    fn synchronized_swarm_is_fixed_point() {
        let mut state = sample_initial(&ModelParams::<f64>::leaderless(40, 0.3, 0.1, 0.01), 5);
        for a in &mut state.agents {
            a.heading = -2.25;
            a.speed = 0.0731;
        }
        let g = ProximityGraph::build(&state.positions(), 0.3).unwrap();
        let next = leaderless_step(&state, &g);
        assert_eq!(next.headings(), state.headings());
        assert_eq!(next.speeds(), state.speeds());
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::<f64>::default();
        assert!(p.validate().is_ok());
        p.strict = true;
        p.vartheta = 0.0;
        assert!(p.validate().is_err());
        p.strict = false;
        assert!(p.validate().is_ok());
        p.tau = 0.0;
        assert!(p.validate().is_err());
        let p = ModelParams::<f64> { strict: true, c: 1e-3, ..Default::default() };
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn closed_form_matches_quadrature(
            a in 0.0f64..1.0, b in -50.0f64..50.0, c in -10.0f64..10.0,
            d in -100.0f64..100.0, tau in 1e-3f64..0.1,
        ) {
            let exact = displacement(a, b, c, d, tau);
            let oracle = integrate_position_oracle(a, b, c, d, tau).unwrap();
            prop_assert!((exact.0 - oracle.0).abs() < 1e-10);
            prop_assert!((exact.1 - oracle.1).abs() < 1e-10);
        }

        #[test]
        fn relabeling_commutes_with_a_step(seed in 0u64..1000, shift in 1usize..24) {
            let params = ModelParams::<f64>::leaderless(25, 0.3, 0.2, 0.01);
            let state = sample_initial(&params, seed);
            let n = state.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let permuted = SwarmState::leaderless(perm.iter().map(|&i| state.agents[i]).collect());
            let step = |s: &SwarmState<f64>| {
                let g = ProximityGraph::build(&s.positions(), params.radius).unwrap();
                let mut next = leaderless_step(s, &g);
                let pos = advance_positions(s, &next, params.tau);
                for (a, p) in next.agents.iter_mut().zip(pos) { a.position = p; }
                next
            };
            let a = step(&state);
            let b = step(&permuted);
            for (slot, &i) in perm.iter().enumerate() {
                let (x, y) = (a.agents[i], b.agents[slot]);
                prop_assert!((x.heading - y.heading).abs() < 1e-12);
                prop_assert!((x.speed - y.speed).abs() < 1e-12);
                prop_assert!(x.position.distance(&y.position) < 1e-12);
            }
        }
    }
}
