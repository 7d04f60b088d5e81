//! Per-step synchronisation and tracking metrics, and audits of the
//! trajectory against the distance recursion, the convexity of the consensus
//! map, the leader contraction envelopes and the ring-set bounds.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, RealField};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Controller, Role, SwarmState, Trajectory};
use crate::graph::{ring_sets, Position2D, ProximityGraph};
use crate::{Error, Result, Scalar};

/// Absolute slack allowed on inequalities that hold unconditionally.
pub const AUDIT_TOL: f64 = 1e-9;
/// Tolerance on the monotonicity of extremal headings and speeds.
pub const CONVEXITY_TOL: f64 = 1e-12;
/// Relative margin granted to bounds that only hold up to `(1 + o(1))`.
pub const ASYMPTOTIC_MARGIN: f64 = 0.25;
pub const DEFAULT_SUBSTEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    /// The inequality holds.
    Pass,
    /// An unconditional inequality is violated.
    Fail,
    /// A premise is not met, nothing was checked.
    Skip,
    /// An asymptotic bound is exceeded; informative only.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StepMetrics<T> {
    pub k: usize,
    /// `max_{i,j} |θ_i − θ_j|`.
    pub delta_theta: T,
    pub delta_v: T,
    /// `max_i |θ_i − θ̄|` (reference runs only).
    pub tracking_theta: Option<T>,
    /// `max_i |v_i − v_n|` (reference runs only).
    pub tracking_v: Option<T>,
    /// `max_{i,j} |Δ_ij(t_k) − Δ_ij(0)|`.
    pub max_distance_drift: T,
    /// `‖P(t_k) − P(0)‖₂`.
    pub p_deviation: T,
    /// `max_i |α_i(t_k) − α_i(0)|` (runs with leaders only).
    pub alpha_drift: Option<T>,
    pub connected: bool,
}

fn spread<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    let (lo, hi) = values.fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        T::zero()
    }
}

fn max_abs_difference<T: Scalar>(pairs: impl Iterator<Item = (T, T)>) -> T {
    pairs.map(|(a, b)| (a - b).abs()).fold(T::zero(), T::max)
}

/// Leader fraction among the neighbours of every agent, optionally counting
/// the agent itself. Zero for an empty neighbourhood.
pub fn leader_fractions<T: Scalar>(graph: &ProximityGraph<T>, roles: &[Role], count_self: bool) -> Vec<T> {
    (0..graph.node_count())
        .map(|i| {
            let (mut leaders, mut total) = (0usize, 0usize);
            for &j in graph.neighbors(i) {
                if j == i && !count_self {
                    continue;
                }
                total += 1;
                if roles[j] == Role::Leader {
                    leaders += 1;
                }
            }
            if total == 0 {
                T::zero()
            } else {
                T::from_count(leaders) / T::from_count(total)
            }
        })
        .collect()
}

/// Largest change of any pairwise distance between two position snapshots.
pub fn max_distance_change<T: Scalar>(now: &[Position2D<T>], then: &[Position2D<T>]) -> (T, usize, usize) {
    let mut best = (T::zero(), 0, 0);
    for i in 0..now.len() {
        for j in i + 1..now.len() {
            let d = (now[i].distance(&now[j]) - then[i].distance(&then[j])).abs();
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    best
}

fn averaging_row<T: Scalar>(graph: &ProximityGraph<T>, i: usize, n: usize) -> Vec<T> {
    let mut row = vec![T::zero(); n];
    let nb = graph.neighbors(i);
    if nb.is_empty() {
        row[i] = T::one();
    } else {
        let w = T::one() / T::from_count(nb.len());
        for &j in nb {
            row[j] = w;
        }
    }
    row
}

/// `‖P_a − P_b‖₂` using only the rows whose neighbourhoods differ.
pub fn averaging_deviation<T: Scalar + RealField>(a: &ProximityGraph<T>, b: &ProximityGraph<T>) -> Result<T> {
    let n = a.node_count();
    if n != b.node_count() {
        return Err(Error::DimensionMismatch { left: (n, n), right: (b.node_count(), b.node_count()) });
    }
    let changed: Vec<usize> = (0..n).filter(|&i| a.neighbors(i) != b.neighbors(i)).collect();
    if changed.is_empty() {
        return Ok(T::zero());
    }
    let mut diff = DMatrix::<T>::zeros(changed.len(), n);
    for (r, &i) in changed.iter().enumerate() {
        let (ra, rb) = (averaging_row(a, i, n), averaging_row(b, i, n));
        for j in 0..n {
            diff[(r, j)] = ra[j] - rb[j];
        }
    }
    Ok(diff.singular_values().iter().copied().fold(T::zero(), num_traits::Float::max))
}

/// Incremental computation of [`StepMetrics`] along a run.
#[derive(Debug, Clone)]
pub struct MetricsTracker<T> {
    initial_positions: Vec<Position2D<T>>,
    initial_graph: ProximityGraph<T>,
    initial_alpha: Option<Vec<T>>,
    alpha_counts_self: bool,
    reference_speed: T,
    previous: Option<(ProximityGraph<T>, T)>,
}

impl<T: Scalar + RealField> MetricsTracker<T> {
    pub fn new(initial: &SwarmState<T>, initial_graph: &ProximityGraph<T>, reference_speed: T) -> Result<Self> {
        Self::with_alpha_self(initial, initial_graph, reference_speed, false)
    }

    /// `alpha_counts_self` includes the agent itself in the counts of `α_i`.
    pub fn with_alpha_self(
        initial: &SwarmState<T>,
        initial_graph: &ProximityGraph<T>,
        reference_speed: T,
        alpha_counts_self: bool,
    ) -> Result<Self> {
        if initial_graph.node_count() != initial.len() {
            return Err(Error::DimensionMismatch {
                left: (initial.len(), 1),
                right: (initial_graph.node_count(), 1),
            });
        }
        let initial_alpha = initial
            .has_leaders()
            .then(|| leader_fractions(initial_graph, &initial.roles, alpha_counts_self));
        Ok(Self {
            initial_positions: initial.positions(),
            initial_graph: initial_graph.clone(),
            initial_alpha,
            alpha_counts_self,
            reference_speed,
            previous: None,
        })
    }

    pub fn observe(&mut self, state: &SwarmState<T>, graph: &ProximityGraph<T>, reference: Option<T>) -> Result<StepMetrics<T>> {
        if state.len() != self.initial_positions.len() {
            return Err(Error::DimensionMismatch {
                left: (state.len(), 1),
                right: (self.initial_positions.len(), 1),
            });
        }
        let p_deviation = match &self.previous {
            Some((g, dev)) if g.same_neighborhoods(graph) => *dev,
            _ if graph.same_neighborhoods(&self.initial_graph) => T::zero(),
            _ => averaging_deviation(graph, &self.initial_graph)?,
        };
        self.previous = Some((graph.clone(), p_deviation));
        let (drift, _, _) = max_distance_change(&state.positions(), &self.initial_positions);
        let alpha_drift = self
            .initial_alpha
            .as_ref()
            .map(|a0| max_abs_difference(leader_fractions(graph, &state.roles, self.alpha_counts_self).into_iter().zip(a0.iter().copied())));
        let tracking_theta = reference.map(|h| max_abs_difference(state.agents.iter().map(|a| (a.heading, h))));
        let tracking_v = reference.map(|_| max_abs_difference(state.agents.iter().map(|a| (a.speed, self.reference_speed))));
        Ok(StepMetrics {
            k: state.sample_index,
            delta_theta: spread(state.agents.iter().map(|a| a.heading)),
            delta_v: spread(state.agents.iter().map(|a| a.speed)),
            tracking_theta,
            tracking_v,
            max_distance_drift: drift,
            p_deviation,
            alpha_drift,
            connected: graph.is_connected(),
        })
    }
}

/// One-shot metrics of `state` relative to `initial`.
pub fn step_metrics<T: Scalar + RealField>(
    state: &SwarmState<T>,
    initial: &SwarmState<T>,
    graph: &ProximityGraph<T>,
    initial_graph: &ProximityGraph<T>,
    reference: Option<T>,
    reference_speed: T,
) -> Result<StepMetrics<T>> {
    MetricsTracker::new(initial, initial_graph, reference_speed)?.observe(state, graph, reference)
}

/// First sampling index with `δθ ≤ tol_theta` and `δv ≤ tol_v`.
pub fn sync_detect<T: Scalar>(traj: &Trajectory<T>, tol_theta: T, tol_v: T) -> Option<usize> {
    traj.metrics
        .iter()
        .find(|m| m.delta_theta <= tol_theta && m.delta_v <= tol_v)
        .map(|m| m.k)
}

/// Writes `k,delta_theta,delta_v,tracking_theta,tracking_v,drift,p_dev,alpha_drift,connected`.
pub fn write_metrics_csv<T: Scalar, W: std::io::Write>(mut out: W, metrics: &[StepMetrics<T>]) -> std::io::Result<()> {
    writeln!(out, "k,delta_theta,delta_v,tracking_theta,tracking_v,drift,p_dev,alpha_drift,connected")?;
    let opt = |v: Option<T>| v.map(|x| format!("{:.16e}", x.as_f64())).unwrap_or_default();
    for m in metrics {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{},{}",
            m.k,
            m.delta_theta.as_f64(),
            m.delta_v.as_f64(),
            opt(m.tracking_theta),
            opt(m.tracking_v),
            m.max_distance_drift.as_f64(),
            m.p_deviation.as_f64(),
            opt(m.alpha_drift),
            m.connected
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
    pub report: usize,
}

impl VerdictCounts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Pass => self.pass += 1,
            Verdict::Fail => self.fail += 1,
            Verdict::Skip => self.skip += 1,
            Verdict::Report => self.report += 1,
        }
    }

    pub fn merge(&mut self, other: &VerdictCounts) {
        self.pass += other.pass;
        self.fail += other.fail;
        self.skip += other.skip;
        self.report += other.report;
    }

    pub fn total(&self) -> usize {
        self.pass + self.fail + self.skip + self.report
    }
}

impl FromIterator<Verdict> for VerdictCounts {
    fn from_iter<I: IntoIterator<Item = Verdict>>(iter: I) -> Self {
        let mut c = VerdictCounts::default();
        iter.into_iter().for_each(|v| c.add(v));
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionStep {
    pub k: usize,
    /// Pair realising the largest distance change.
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionAudit {
    pub substeps: usize,
    pub steps: Vec<RecursionStep>,
    pub counts: VerdictCounts,
    pub min_slack: f64,
}

/// Trapezoid integral over one dwell interval of the spread of linearly
/// interpolated values, on `substeps` equal pieces. The spread is convex in
/// time, so the result never underestimates the exact integral.
pub fn envelope_integral<T: Scalar>(start: &[T], end: &[T], tau: T, substeps: usize) -> T {
    let m = substeps.max(1);
    let value = |s: T| spread(start.iter().zip(end).map(|(&a, &b)| a + s * (b - a)));
    let h = T::one() / T::from_count(m);
    let mut sum = T::zero();
    let mut prev = value(T::zero());
    for q in 1..=m {
        let s = if q == m { T::one() } else { T::from_count(q) * h };
        let cur = value(s);
        sum = sum + (prev + cur) * T::lit(0.5) * h;
        prev = cur;
    }
    sum * tau
}

/// Checks `|Δ_ij(t_{k+1}) − Δ_ij(t_k)| ≤ 2∫δv + 2·V·∫δθ` at every step for the
/// pair with the largest distance change, where `V` is the largest speed at
/// either end of the interval. `stride > 1` audits every `stride`-th step.
pub fn recursion_audit<T: Scalar>(traj: &Trajectory<T>, substeps: usize, stride: usize) -> Result<RecursionAudit> {
    if traj.states.len() < 2 {
        return Err(Error::Trajectory("recursion audit needs at least two sampling instants".into()));
    }
    let tau = traj.params.tau;
    let two = T::lit(2.0);
    let mut steps = Vec::new();
    for k in (0..traj.steps()).step_by(stride.max(1)) {
        let (a, b) = (&traj.states[k], &traj.states[k + 1]);
        let (lhs, i, j) = max_distance_change(&b.positions(), &a.positions());
        let int_v = envelope_integral(&a.speeds(), &b.speeds(), tau, substeps);
        let int_theta = envelope_integral(&a.headings(), &b.headings(), tau, substeps);
        let vmax = a
            .agents
            .iter()
            .chain(&b.agents)
            .map(|x| x.speed.abs())
            .fold(T::zero(), T::max);
        let rhs = two * int_v + two * vmax * int_theta;
        let (lhs, rhs) = (lhs.as_f64(), rhs.as_f64());
        let verdict = if lhs <= rhs + AUDIT_TOL { Verdict::Pass } else { Verdict::Fail };
        steps.push(RecursionStep { k, i, j, lhs, rhs, slack: rhs - lhs, verdict });
    }
    let counts = steps.iter().map(|s| s.verdict).collect();
    let min_slack = steps.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
    Ok(RecursionAudit { substeps, steps, counts, min_slack })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityAudit {
    pub verdict: Verdict,
    /// `(k, quantity)` pairs where an extremum moved outward.
    pub violations: Vec<(usize, String)>,
    pub notes: String,
}

/// In leaderless runs every update is a convex combination, so the largest
/// heading and speed never increase and the smallest never decrease.
pub fn convexity_audit<T: Scalar>(traj: &Trajectory<T>) -> ConvexityAudit {
    if traj.states.iter().any(|s| s.has_leaders()) || !matches!(traj.controller, Controller::Leaderless) {
        return ConvexityAudit {
            verdict: Verdict::Skip,
            violations: Vec::new(),
            notes: "leaders pull extremes towards the reference".into(),
        };
    }
    let tol = T::lit(CONVEXITY_TOL);
    let extremes = |s: &SwarmState<T>, f: fn(&crate::dynamics::AgentState<T>) -> T| {
        s.agents.iter().map(f).fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let mut violations = Vec::new();
    for (k, w) in traj.states.windows(2).enumerate() {
        for (name, f) in [
            ("heading", (|a: &crate::dynamics::AgentState<T>| a.heading) as fn(&_) -> T),
            ("speed", |a: &crate::dynamics::AgentState<T>| a.speed),
        ] {
            let (lo0, hi0) = extremes(&w[0], f);
            let (lo1, hi1) = extremes(&w[1], f);
            if hi1 > hi0 + tol {
                violations.push((k + 1, format!("max {name}")));
            }
            if lo1 < lo0 - tol {
                violations.push((k + 1, format!("min {name}")));
            }
        }
    }
    ConvexityAudit {
        verdict: if violations.is_empty() { Verdict::Pass } else { Verdict::Fail },
        violations,
        notes: String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeStep {
    pub k: usize,
    pub follower_error: f64,
    pub leader_error: f64,
    pub follower_bound: f64,
    pub leader_bound: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeAudit {
    pub kind: String,
    pub verdict: Verdict,
    pub counts: VerdictCounts,
    /// Largest observed leader-fraction drift `μ`.
    pub mu: f64,
    /// Contraction factor `γ`.
    pub gamma: f64,
    /// Envelope amplitude `A`.
    pub amplitude: f64,
    /// Whether leaders start inside `(1 − ϑ)·max_{V1}|θ̃(t_1)|`, so that the
    /// amplitude reduces to the follower error alone.
    pub leader_premise: bool,
    pub steps: Vec<EnvelopeStep>,
    pub notes: String,
}

impl EnvelopeAudit {
    fn skipped(kind: &str, notes: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            verdict: Verdict::Skip,
            counts: VerdictCounts::default(),
            mu: 0.0,
            gamma: 0.0,
            amplitude: 0.0,
            leader_premise: false,
            steps: Vec::new(),
            notes: notes.into(),
        }
    }
}

/// Geometric contraction envelopes.
///
/// With a constant reference `θ̄` and `θ̃_i = θ_i − θ̄`, followers satisfy
/// `max_{V1}|θ̃(t_k)| ≤ γ^{k−1} A` and leaders `max_{V2}|θ̃(t_k)| ≤ (1−ϑ)γ^{k−1} A`
/// with `γ = max_i (1 − ϑ·max(0, α_i(0) − μ))`, `μ` the largest observed drift
/// of the leader fractions and `A = max(max_{V1}|θ̃(t_1)|, max_{V2}|θ̃(t_1)|/(1−ϑ))`.
/// Leader fractions count the agent itself exactly when the graph does.
///
/// Leaderless runs are compared against `δv(t_k) ≤ 2√2 λ̂^k ‖v(t_1)‖` with
/// `λ̂ = 1 − r²/288`; that bound is asymptotic and only reported.
pub fn geometric_envelope_audit<T: Scalar>(traj: &Trajectory<T>) -> Result<EnvelopeAudit> {
    match traj.controller {
        Controller::Leaderless => Ok(leaderless_envelope(traj)),
        Controller::LeaderConstant { heading } => leader_envelope(traj, heading),
        Controller::LeaderDynamic => Ok(EnvelopeAudit::skipped("leader", "the reference switches during the run")),
    }
}

fn leaderless_envelope<T: Scalar>(traj: &Trajectory<T>) -> EnvelopeAudit {
    if traj.states.len() < 2 {
        return EnvelopeAudit::skipped("leaderless", "needs at least two sampling instants");
    }
    let r = traj.params.radius.as_f64();
    let lambda_hat = 1.0 - r * r / 288.0;
    let v1 = traj.states[1].speeds().iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
    let scale = 2.0 * 2f64.sqrt() * v1;
    let steps: Vec<EnvelopeStep> = traj.metrics[1..]
        .iter()
        .map(|m| {
            let bound = scale * lambda_hat.powi(m.k as i32);
            let err = m.delta_v.as_f64();
            EnvelopeStep {
                k: m.k,
                follower_error: err,
                leader_error: 0.0,
                follower_bound: bound,
                leader_bound: 0.0,
                verdict: if err <= bound * (1.0 + ASYMPTOTIC_MARGIN) { Verdict::Pass } else { Verdict::Report },
            }
        })
        .collect();
    let counts: VerdictCounts = steps.iter().map(|s| s.verdict).collect();
    EnvelopeAudit {
        kind: "leaderless".into(),
        verdict: if counts.report == 0 { Verdict::Pass } else { Verdict::Report },
        counts,
        mu: 0.0,
        gamma: lambda_hat,
        amplitude: scale,
        leader_premise: true,
        steps,
        notes: "asymptotic speed-dissimilarity envelope".into(),
    }
}

fn leader_envelope<T: Scalar>(traj: &Trajectory<T>, reference: T) -> Result<EnvelopeAudit> {
    let first = traj.initial();
    if !first.has_leaders() {
        return Ok(EnvelopeAudit::skipped("leader", "no leaders in the swarm"));
    }
    if traj.states.len() < 2 {
        return Ok(EnvelopeAudit::skipped("leader", "needs at least two sampling instants"));
    }
    let vartheta = traj.params.vartheta.as_f64();
    let roles = &first.roles;
    let fractions = |s: &SwarmState<T>| -> Result<Vec<f64>> {
        let g = s.graph(&traj.params)?;
        Ok(leader_fractions(&g, roles, g.is_self_inclusive()).into_iter().map(|a| a.as_f64()).collect())
    };
    let alpha0 = fractions(first)?;
    let mut mu = 0.0f64;
    for s in &traj.states[1..traj.states.len() - 1] {
        for (a, b) in fractions(s)?.iter().zip(&alpha0) {
            mu = mu.max((a - b).abs());
        }
    }
    let gamma = alpha0.iter().map(|a| 1.0 - vartheta * (a - mu).max(0.0)).fold(0.0, f64::max);
    let errors = |s: &SwarmState<T>| {
        let mut e = (0.0f64, 0.0f64);
        for (a, r) in s.agents.iter().zip(roles) {
            let d = (a.heading - reference).abs().as_f64();
            match r {
                Role::Follower => e.0 = e.0.max(d),
                Role::Leader => e.1 = e.1.max(d),
            }
        }
        e
    };
    let (f1, l1) = errors(&traj.states[1]);
    let keep = 1.0 - vartheta;
    let leader_premise = l1 <= keep * f1;
    let amplitude = if keep > 0.0 { f1.max(l1 / keep) } else { f1 };
    if keep <= 0.0 && l1 > 0.0 {
        return Ok(EnvelopeAudit::skipped("leader", "full mixing but leaders are off the reference after one step"));
    }
    let rel = 1e-12;
    let steps: Vec<EnvelopeStep> = traj.states[1..]
        .iter()
        .map(|s| {
            let (fe, le) = errors(s);
            let g = gamma.powi((s.sample_index - 1) as i32) * amplitude;
            let (fb, lb) = (g, keep * g);
            let ok = fe <= fb * (1.0 + rel) + AUDIT_TOL * 1e-3 && le <= lb * (1.0 + rel) + AUDIT_TOL * 1e-3;
            EnvelopeStep {
                k: s.sample_index,
                follower_error: fe,
                leader_error: le,
                follower_bound: fb,
                leader_bound: lb,
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            }
        })
        .collect();
    let counts: VerdictCounts = steps.iter().map(|s| s.verdict).collect();
    Ok(EnvelopeAudit {
        kind: "leader".into(),
        verdict: if counts.fail > 0 { Verdict::Fail } else { Verdict::Pass },
        counts,
        mu,
        gamma,
        amplitude,
        leader_premise,
        steps,
        notes: String::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingAudit {
    pub verdict: Verdict,
    /// `max_k drift / r`, the narrowest annulus guaranteed to hold every
    /// neighbourhood change of the run.
    pub eta_observed: f64,
    /// Pairs whose adjacency changed at some instant.
    pub changed_pairs: usize,
    pub violations: Vec<(usize, usize, usize)>,
    /// Drift budget `η·r` used by the theory (`η_n = c r²` without leaders).
    pub budget_eta: f64,
    /// Last instant up to which the drift stayed within the budget.
    pub budget_steps: usize,
    pub budget_verdict: Verdict,
    /// Largest ring-set size at the budget annulus.
    pub max_ring: usize,
}

/// Annulus constant of the drift budget: `η_n = c·r²` for leaderless runs, the
/// constant `η` with leaders.
pub fn budget_eta<T: Scalar>(traj: &Trajectory<T>) -> T {
    if traj.initial().has_leaders() {
        traj.params.eta
    } else {
        traj.params.eta_n()
    }
}

fn changed_pairs<T: Scalar>(now: &ProximityGraph<T>, then: &ProximityGraph<T>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..now.node_count() {
        let (a, b) = (now.neighbors(i), then.neighbors(i));
        if a == b {
            continue;
        }
        let (mut p, mut q) = (0, 0);
        while p < a.len() || q < b.len() {
            let next = match (a.get(p), b.get(q)) {
                (Some(&x), Some(&y)) if x == y => {
                    p += 1;
                    q += 1;
                    continue;
                }
                (Some(&x), Some(&y)) if x < y => {
                    p += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    q += 1;
                    y
                }
                (Some(&x), None) => {
                    p += 1;
                    x
                }
                (None, Some(&y)) => {
                    q += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            if i < next {
                out.push((i, next));
            }
        }
    }
    out
}

/// Every neighbourhood change must lie in the ring sets of the observed drift,
/// and, while the drift budget holds, in those of the budget annulus.
pub fn ring_containment_audit<T: Scalar>(traj: &Trajectory<T>) -> Result<RingAudit> {
    let first = traj.initial();
    let r = traj.params.radius;
    let initial_positions = first.positions();
    let g0 = first.graph(&traj.params)?;
    let budget = budget_eta(traj);
    let mut running = T::zero();
    let mut budget_steps = 0usize;
    let mut within_budget = true;
    let mut changes: Vec<(usize, usize, usize)> = Vec::new();
    for (k, (s, m)) in traj.states.iter().zip(&traj.metrics).enumerate() {
        running = running.max(m.max_distance_drift);
        if within_budget && running <= budget * r {
            budget_steps = k;
        } else {
            within_budget = false;
        }
        let g = s.graph(&traj.params)?;
        changes.extend(changed_pairs(&g, &g0).into_iter().map(|(i, j)| (k, i, j)));
    }
    let eta_obs = running / r + T::lit(1e-12);
    let mut violations = Vec::new();
    let verdict = if eta_obs >= T::one() {
        Verdict::Skip
    } else {
        let rings = ring_sets(&initial_positions, r, eta_obs, &first.roles, false)?;
        violations.extend(changes.iter().copied().filter(|&(_, i, j)| !rings[i].contains(j)));
        if violations.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };
    let (budget_verdict, max_ring) = if budget > T::zero() && budget < T::one() {
        let rings = ring_sets(&initial_positions, r, budget, &first.roles, false)?;
        let ok = changes
            .iter()
            .filter(|&&(k, _, _)| k <= budget_steps)
            .all(|&(_, i, j)| rings[i].contains(j));
        (if ok { Verdict::Pass } else { Verdict::Fail }, rings.iter().map(|x| x.len()).max().unwrap_or(0))
    } else {
        (Verdict::Skip, 0)
    };
    let mut pairs: Vec<(usize, usize)> = changes.iter().map(|&(_, i, j)| (i, j)).collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(RingAudit {
        verdict,
        eta_observed: eta_obs.as_f64(),
        changed_pairs: pairs.len(),
        violations,
        budget_eta: budget.as_f64(),
        budget_steps,
        budget_verdict,
        max_ring,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub verdict: Verdict,
    pub observed: f64,
    pub bound: f64,
    pub notes: String,
}

/// Asymptotic bounds on `‖P(t_k) − P(0)‖ ≤ 80η_n` and
/// `max_i|α_i(t_k) − α_i(0)| ≤ 256ηα_n`, checked with a 25% margin while the
/// drift budget holds.
pub fn asymptotic_bound_reports<T: Scalar>(traj: &Trajectory<T>, ring: &RingAudit) -> Vec<BoundReport> {
    let upto = ring.budget_steps.min(traj.metrics.len().saturating_sub(1));
    let window = &traj.metrics[..=upto];
    let d_min0 = traj.diagnostics.first().map(|d| d.min_degree).unwrap_or(0);
    let premise = ring.budget_verdict == Verdict::Pass && 2 * ring.max_ring <= d_min0;
    let judge = |observed: f64, bound: f64, premise: bool| {
        if !premise {
            Verdict::Skip
        } else if observed <= bound * (1.0 + ASYMPTOTIC_MARGIN) {
            Verdict::Pass
        } else {
            Verdict::Report
        }
    };
    let mut out = Vec::new();
    let p_obs = window.iter().map(|m| m.p_deviation.as_f64()).fold(0.0, f64::max);
    let p_bound = 80.0 * traj.params.eta_n().as_f64();
    out.push(BoundReport {
        name: "averaging_matrix_deviation".into(),
        verdict: judge(p_obs, p_bound, premise),
        observed: p_obs,
        bound: p_bound,
        notes: format!("instants 0..={upto}; requires ring containment and max ring size <= d_min(0)/2"),
    });
    if traj.initial().has_leaders() {
        let a_obs = window.iter().filter_map(|m| m.alpha_drift).map(|a| a.as_f64()).fold(0.0, f64::max);
        let a_bound = 256.0 * traj.params.eta.as_f64() * traj.params.alpha_n.as_f64();
        out.push(BoundReport {
            name: "leader_fraction_drift".into(),
            verdict: judge(a_obs, a_bound, ring.budget_verdict == Verdict::Pass),
            observed: a_obs,
            bound: a_bound,
            notes: format!("instants 0..={upto}"),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAudit {
    pub verdict: Verdict,
    pub switches: Vec<(usize, f64)>,
    pub segments_visited: usize,
    pub segment_count: usize,
    /// Switches whose logged error does not match the stored trajectory or
    /// exceeds `ε`.
    pub violations: Vec<usize>,
}

/// Recomputes the tracking error at every logged switch from the trajectory.
pub fn schedule_audit<T: Scalar>(traj: &Trajectory<T>) -> Option<ScheduleAudit> {
    let sched = traj.schedule.as_ref()?;
    let headings = sched.headings();
    let eps = sched.epsilon();
    let mut violations = Vec::new();
    let mut prev_k = None;
    for (idx, rec) in sched.switch_log().iter().enumerate() {
        let target = headings[rec.segment - 1];
        let recomputed = traj.states.get(rec.k).map(|s| sched.tracking_error_against(s, target));
        let ok = recomputed == Some(rec.max_error) && rec.max_error <= eps && prev_k.is_none_or(|p| p < rec.k);
        if !ok {
            violations.push(idx);
        }
        prev_k = Some(rec.k);
    }
    Some(ScheduleAudit {
        verdict: if violations.is_empty() { Verdict::Pass } else { Verdict::Fail },
        switches: sched.switch_log().iter().map(|r| (r.k, r.max_error.as_f64())).collect(),
        segments_visited: sched.segment() + 1,
        segment_count: sched.segment_count(),
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub substeps: usize,
    /// Audit every `stride`-th dwell interval of the distance recursion.
    pub stride: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { substeps: DEFAULT_SUBSTEPS, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub recursion: RecursionAudit,
    pub convexity: ConvexityAudit,
    pub envelope: EnvelopeAudit,
    pub ring: RingAudit,
    pub bounds: Vec<BoundReport>,
    pub schedule: Option<ScheduleAudit>,
    /// Top-level verdict per audit.
    pub verdicts: BTreeMap<String, Verdict>,
}

impl AuditReport {
    pub fn counts(&self) -> VerdictCounts {
        self.verdicts.values().copied().collect()
    }

    pub fn has_failures(&self) -> bool {
        self.verdicts.values().any(|v| *v == Verdict::Fail)
    }
}

pub const AUDIT_SCHEMA_VERSION: u32 = 1;

/// Runs every audit on a trajectory.
pub fn audit_trajectory<T: Scalar>(traj: &Trajectory<T>, options: AuditOptions) -> Result<AuditReport> {
    let recursion = recursion_audit(traj, options.substeps, options.stride)?;
    let convexity = convexity_audit(traj);
    let envelope = geometric_envelope_audit(traj)?;
    let ring = ring_containment_audit(traj)?;
    let bounds = asymptotic_bound_reports(traj, &ring);
    let schedule = schedule_audit(traj);
    let mut verdicts = BTreeMap::new();
    verdicts.insert(
        "distance_recursion".to_string(),
        if recursion.counts.fail > 0 { Verdict::Fail } else { Verdict::Pass },
    );
    verdicts.insert("convexity".into(), convexity.verdict);
    verdicts.insert(format!("{}_envelope", envelope.kind), envelope.verdict);
    verdicts.insert("ring_containment".into(), ring.verdict);
    verdicts.insert("ring_containment_budget".into(), ring.budget_verdict);
    for b in &bounds {
        verdicts.insert(b.name.clone(), b.verdict);
    }
    if let Some(s) = &schedule {
        verdicts.insert("schedule_switches".into(), s.verdict);
    }
    Ok(AuditReport {
        schema_version: AUDIT_SCHEMA_VERSION,
        recursion,
        convexity,
        envelope,
        ring,
        bounds,
        schedule,
        verdicts,
    })
}
