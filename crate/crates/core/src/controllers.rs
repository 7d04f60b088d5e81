//! Zero-order-hold control signals: the rotational speed `ω_i` and the
//! acceleration `u_i` held constant over each dwell interval.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Role, SwarmState};
use crate::graph::ProximityGraph;
use crate::schedule::ReferenceSchedule;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSignal<T> {
    pub omega: T,
    pub u: T,
}

impl<T: Scalar> ControlSignal<T> {
    pub fn is_finite(&self) -> bool {
        self.omega.is_finite() && self.u.is_finite()
    }
}

/// `(1/d_i) Σ_{j∈N_i} (x_j − x_i)`, zero for an empty neighbourhood.
fn mean_difference<T: Scalar>(i: usize, neighbors: &[usize], values: impl Fn(usize) -> T) -> T {
    if neighbors.is_empty() {
        return T::zero();
    }
    let own = values(i);
    let sum = neighbors.iter().fold(T::zero(), |acc, &j| acc + (values(j) - own));
    sum / T::from_count(neighbors.len())
}

/// Nearest-neighbour rule: `ω_i = (1/(τ d_i)) Σ (θ_j − θ_i)`, `u_i` alike.
pub fn follower_control<T: Scalar>(agent: usize, state: &SwarmState<T>, graph: &ProximityGraph<T>, tau: T) -> ControlSignal<T> {
    let nb = graph.neighbors(agent);
    let dtheta = mean_difference(agent, nb, |j| state.agents[j].heading);
    let dv = mean_difference(agent, nb, |j| state.agents[j].speed);
    ControlSignal { omega: dtheta / tau, u: dv / tau }
}

/// Leader rule: `ω_i = (1/τ){ϑ(θ̄ − θ_i) + (1 − ϑ)(1/d_i) Σ (θ_j − θ_i)}`,
/// and `u_i` with `v_n` in place of `θ̄`.
pub fn leader_control<T: Scalar>(
    agent: usize,
    state: &SwarmState<T>,
    graph: &ProximityGraph<T>,
    tau: T,
    vartheta: T,
    reference_heading: T,
    reference_speed: T,
) -> Result<ControlSignal<T>> {
    if state.roles.get(agent) != Some(&Role::Leader) {
        return Err(Error::RoleMismatch { agent });
    }
    let nb = graph.neighbors(agent);
    let me = state.agents[agent];
    let keep = T::one() - vartheta;
    let dtheta = mean_difference(agent, nb, |j| state.agents[j].heading);
    let dv = mean_difference(agent, nb, |j| state.agents[j].speed);
    Ok(ControlSignal {
        omega: (vartheta * (reference_heading - me.heading) + keep * dtheta) / tau,
        u: (vartheta * (reference_speed - me.speed) + keep * dv) / tau,
    })
}

/// Leader rule driven by the schedule's current reference heading.
pub fn dynamic_leader_control<T: Scalar>(
    agent: usize,
    state: &SwarmState<T>,
    graph: &ProximityGraph<T>,
    tau: T,
    vartheta: T,
    schedule: &ReferenceSchedule<T>,
    reference_speed: T,
) -> Result<ControlSignal<T>> {
    leader_control(agent, state, graph, tau, vartheta, schedule.current_heading(), reference_speed)
}

/// Signals for every agent: followers use the neighbour rule, leaders the
/// blended rule when a reference is given (and the neighbour rule otherwise).
pub fn swarm_controls<T: Scalar>(
    state: &SwarmState<T>,
    graph: &ProximityGraph<T>,
    tau: T,
    vartheta: T,
    reference: Option<(T, T)>,
) -> Vec<ControlSignal<T>> {
    (0..state.len())
        .map(|i| match (state.roles[i], reference) {
            (Role::Leader, Some((heading, speed))) => {
                leader_control(i, state, graph, tau, vartheta, heading, speed).expect("leader role checked")
            }
            _ => follower_control(i, state, graph, tau),
        })
        .collect()
}

/// Writes `k,agent,omega,u` rows; `header` controls the first line.
pub fn write_controls_csv<T: Scalar, W: Write>(
    mut out: W,
    k: usize,
    controls: &[ControlSignal<T>],
    header: bool,
) -> std::io::Result<()> {
    if header {
        writeln!(out, "k,agent,omega,u")?;
    }
    for (i, c) in controls.iter().enumerate() {
        writeln!(out, "{k},{i},{:.16e},{:.16e}", c.omega.as_f64(), c.u.as_f64())?;
    }
    Ok(())
}
