//! Parameter conditions of the synchronisation and tracking results, and
//! statistics of the random initial configuration they rely on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelParams, Role, SwarmState};
use crate::graph::ProximityGraph;
use crate::schedule::ReferenceSchedule;
use crate::{Error, Result, Scalar};

/// Default factor standing in for `≫` / `≪`.
pub const DEFAULT_SEPARATION: f64 = 10.0;

/// One inequality `lhs ≤ rhs`, with `satisfied ⇔ lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// Whether the regime this condition belongs to applies.
    pub applicable: bool,
    pub notes: String,
    pub details: BTreeMap<String, f64>,
}

impl ConditionReport {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            satisfied: lhs <= rhs,
            lhs,
            rhs,
            margin: rhs - lhs,
            applicable: true,
            notes: String::new(),
            details: BTreeMap::new(),
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }

    fn note(mut self, text: impl Into<String>) -> Self {
        let text = text.into();
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(&text);
        self
    }

    fn applicable(mut self, yes: bool) -> Self {
        self.applicable = yes;
        self
    }
}

struct Common {
    n: f64,
    log_n: f64,
    r: f64,
    v: f64,
    tau: f64,
}

fn common<T: Scalar>(params: &ModelParams<T>) -> Result<Common> {
    if params.n < 2 {
        return Err(Error::param("n", "conditions need at least two followers"));
    }
    let positive = |name: &'static str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::param(name, format!("must be positive, got {v}")))
        }
    };
    let r = positive("radius", params.radius.as_f64())?;
    let tau = params.tau.as_f64();
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("must be non-negative, got {tau}")));
    }
    positive("c", params.c.as_f64())?;
    positive("c_prime", params.c_prime.as_f64())?;
    positive("eta", params.eta.as_f64())?;
    let v = params.v_n.as_f64();
    if !(v >= 0.0) {
        return Err(Error::param("v_n", format!("must be non-negative, got {v}")));
    }
    let n = params.n as f64;
    Ok(Common { n, log_n: n.ln(), r, v, tau })
}

fn strict_note<T: Scalar>(params: &ModelParams<T>) -> String {
    let c = params.c.as_f64();
    let cp = params.c_prime.as_f64();
    let within = c <= crate::dynamics::STRICT_C_MAX && cp <= crate::dynamics::STRICT_C_PRIME_MAX;
    if within {
        "constants within the guaranteed range".into()
    } else {
        "constants beyond the guaranteed range (practical mode)".into()
    }
}

/// Leaderless synchronisation: `v_n τ_n ≤ c′ η_n r_n³ / log n` with `η_n = c r_n²`.
///
/// Details carry the drift chain `288 v τ log n / r² ≤ η_n r` and the radius
/// regime ratios `(log n/n)^{1/6} / r` and `r`, both of which should be small.
pub fn check_theorem1<T: Scalar>(params: &ModelParams<T>) -> Result<ConditionReport> {
    let Common { n, log_n, r, v, tau } = common(params)?;
    let eta_n = params.c.as_f64() * r * r;
    let cp = params.c_prime.as_f64();
    let rhs = cp * eta_n * r.powi(3) / log_n;
    let chain_lhs = 288.0 * v * tau * log_n / (r * r);
    let lower = (log_n / n).powf(1.0 / 6.0);
    Ok(ConditionReport::new("theorem1", v * tau, rhs)
        .detail("eta_n", eta_n)
        .detail("drift_chain_lhs", chain_lhs)
        .detail("drift_chain_rhs", eta_n * r)
        .detail("radius_lower_ratio", lower / r)
        .detail("radius_upper_ratio", r)
        .note(strict_note(params))
        .note("radius regime ratios are asymptotic and reported only"))
}

/// Constant radius and speed: `τ_n ≤ c̃ / log n`, by default with
/// `c̃ = c′ c r⁵ / v` from the leaderless condition.
pub fn check_corollary1<T: Scalar>(params: &ModelParams<T>, c_tilde: Option<f64>) -> Result<ConditionReport> {
    let Common { log_n, r, v, tau, .. } = common(params)?;
    let default = params.c_prime.as_f64() * params.c.as_f64() * r.powi(5) / v;
    let c_tilde = c_tilde.unwrap_or(default);
    Ok(ConditionReport::new("corollary1", tau, c_tilde / log_n)
        .detail("c_tilde", c_tilde)
        .note(if v == 0.0 { "zero speed: any dwell time" } else { "" }))
}

/// `|θ̄_0|`-dependent leader condition shared by the constant and switching
/// references.
fn leader_branches<T: Scalar>(
    params: &ModelParams<T>,
    name: &str,
    constant: f64,
    variation: f64,
    theta0: f64,
    separation: f64,
) -> Result<Vec<ConditionReport>> {
    let Common { n, log_n, r, v, tau } = common(params)?;
    let eta = params.eta.as_f64();
    let vartheta = params.vartheta.as_f64();
    let alpha = params.alpha_n.as_f64();
    let scale = log_n / (n * r);
    let regime = v * tau / scale;
    let has_leaders = params.leader_count() > 0;
    // both branches are lower bounds, phrased as `required ≤ actual`
    let required1 = constant * v * tau * (1.0 + variation + theta0.abs()) / (eta * r);
    let mut b1 = ConditionReport::new(&format!("{name}.branch1"), required1, vartheta * alpha)
        .applicable(has_leaders && regime >= separation)
        .detail("regime_ratio", regime)
        .detail("required_alpha", if vartheta > 0.0 { required1 / vartheta } else { f64::INFINITY })
        .detail("total_variation", variation)
        .note("requires v·tau >> log n/(n r)");
    let required2 = separation * log_n / (n * r * r);
    let mut b2 = ConditionReport::new(&format!("{name}.branch2"), required2, alpha)
        .applicable(has_leaders && regime < separation)
        .detail("regime_ratio", regime)
        .detail("alpha_ratio", alpha / (log_n / (n * r * r)))
        .detail("separation", separation)
        .note("requires v·tau << log n/(n r) or of that order");
    if !has_leaders {
        b1 = b1.note("no leaders configured");
        b2 = b2.note("no leaders configured");
    }
    Ok(vec![b1, b2])
}

/// Constant-reference tracking: branch 1 `ϑα_n ≥ 8v_nτ_n(1+|θ̄_0|)/(η r_n)`,
/// branch 2 `α_n ≫ log n/(n r_n²)`. Both branches are always reported; the
/// `applicable` flag marks the one whose speed regime holds. Each report is
/// phrased as `lhs ≤ rhs` with the required value on the left.
pub fn check_theorem2<T: Scalar>(params: &ModelParams<T>, theta0: f64, separation: f64) -> Result<Vec<ConditionReport>> {
    leader_branches(params, "theorem2", 8.0, 0.0, theta0, separation)
}

/// Switching-reference tracking: branch 1
/// `ϑα_n ≥ 4v_nτ_n(1 + Σ D_k + |θ̄_0|)/(η r_n)`, branch 2 as for a constant
/// reference.
pub fn check_theorem3<T: Scalar>(
    params: &ModelParams<T>,
    schedule: &ReferenceSchedule<T>,
    separation: f64,
) -> Result<Vec<ConditionReport>> {
    let theta0 = schedule.headings()[0].as_f64();
    leader_branches(params, "theorem3", 4.0, schedule.total_variation().as_f64(), theta0, separation)
}

/// Initial leader deviation estimate `L_n = 4C₁/π · √(log n/(n r²))`.
pub fn leader_initial_deviation<T: Scalar>(params: &ModelParams<T>) -> f64 {
    let n = params.n.max(2) as f64;
    let r = params.radius.as_f64();
    4.0 * params.c1.as_f64() / std::f64::consts::PI * (n.ln() / (n * r * r)).sqrt()
}

/// Compares logged switching instants against the a priori bounds.
pub fn switch_bound_report<T: Scalar>(params: &ModelParams<T>, schedule: &ReferenceSchedule<T>) -> ConditionReport {
    let bounds = schedule.a_priori_switch_bounds(params.vartheta, params.alpha_n, T::lit(leader_initial_deviation(params)));
    let log = schedule.switch_log();
    let mut worst = f64::NEG_INFINITY;
    let mut report = ConditionReport::new("switch_times", 0.0, 0.0);
    for (l, rec) in log.iter().enumerate() {
        if let Some(&b) = bounds.get(l) {
            worst = worst.max(rec.k as f64 - b as f64);
            report = report.detail(&format!("K{}_observed", l + 1), rec.k as f64).detail(&format!("K{}_bound", l + 1), b as f64);
        }
    }
    let lhs = if worst.is_finite() { worst } else { 0.0 };
    let mut out = ConditionReport { lhs, rhs: 0.0, satisfied: lhs <= 0.0, margin: -lhs, ..report };
    out.applicable = !bounds.is_empty();
    out.note("observed minus a priori switching instant, worst segment; a priori bounds are asymptotic")
}

/// Statistics of the initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDiagnostics {
    pub a_n: f64,
    /// `⌈1/a_n⌉`, cells per side.
    pub grid_side: usize,
    pub grid_cells: usize,
    pub max_cell_followers: usize,
    pub max_cell_leaders: usize,
    pub max_cell_total: usize,
    pub expected_cell_followers: f64,
    pub cell_occupancy_ok: bool,
    pub f_n: f64,
    pub theta_sum_max: f64,
    pub v_sum_max: f64,
    pub theta_ratio: f64,
    pub v_ratio: f64,
    pub sums_ok: bool,
    pub d_max0: usize,
    pub d_min0: usize,
    pub kappa: f64,
    pub lambda_hat: f64,
    /// `d_max(0)/(Nπr²)` with `N` the agent count.
    pub d_max_ratio: f64,
    /// `d_min(0)/(Nπr²/4)`.
    pub d_min_ratio: f64,
    pub degrees_ok: bool,
    pub warnings: Vec<String>,
}

/// Default grid side `a_n = (log n/n)^{1/4}`.
pub fn default_a_n(n: usize) -> f64 {
    let n = n.max(2) as f64;
    (n.ln() / n).powf(0.25)
}

/// Bound applied to the normalised neighbourhood sums.
pub const DEFAULT_SUM_BOUND: f64 = 5.0;

pub fn initial_diagnostics<T: Scalar>(
    state: &SwarmState<T>,
    params: &ModelParams<T>,
    a_n: Option<f64>,
    sum_bound: f64,
) -> Result<InitialDiagnostics> {
    if state.is_empty() {
        return Err(Error::EmptySwarm);
    }
    let graph = ProximityGraph::build_with(&state.positions(), params.radius, params.self_inclusive)?;
    let n_followers = state.roles.iter().filter(|r| **r == Role::Follower).count();
    let total = state.len();
    let n_log = (params.n.max(2) as f64).ln();
    let a_n = a_n.unwrap_or_else(|| default_a_n(params.n));
    let mut warnings = Vec::new();
    let lo = (n_log / params.n.max(2) as f64).sqrt();
    if !(a_n > lo && a_n < 1.0) {
        warnings.push(format!("a_n = {a_n} outside ({lo}, 1)"));
    }
    let side = (1.0 / a_n).ceil().max(1.0) as usize;
    let mut followers = vec![0usize; side * side];
    let mut leaders = vec![0usize; side * side];
    let mut outside = 0usize;
    for (a, r) in state.agents.iter().zip(&state.roles) {
        let (x, y) = (a.position.x.as_f64(), a.position.y.as_f64());
        if !(0.0..1.0).contains(&x) || !(0.0..1.0).contains(&y) {
            outside += 1;
            continue;
        }
        let cx = ((x / a_n) as usize).min(side - 1);
        let cy = ((y / a_n) as usize).min(side - 1);
        match r {
            Role::Follower => followers[cy * side + cx] += 1,
            Role::Leader => leaders[cy * side + cx] += 1,
        }
    }
    if outside > 0 {
        warnings.push(format!("{outside} agents outside the unit square"));
    }
    let max_cell_followers = followers.iter().copied().max().unwrap_or(0);
    let max_cell_leaders = leaders.iter().copied().max().unwrap_or(0);
    let max_cell_total = followers.iter().zip(&leaders).map(|(a, b)| a + b).max().unwrap_or(0);
    let expected = n_followers as f64 * a_n * a_n;
    let cell_occupancy_ok = (max_cell_followers as f64 - expected).abs() <= 0.2 * expected;

    let r = params.radius.as_f64();
    let f_n = (total as f64 * r * r * n_log).sqrt();
    let half_v = params.v_n.as_f64() / 2.0;
    let mut theta_sum_max = 0.0f64;
    let mut v_sum_max = 0.0f64;
    for i in 0..total {
        let nb = graph.neighbors(i);
        let ts: f64 = nb.iter().map(|&j| state.agents[j].heading.as_f64()).sum();
        let vs: f64 = nb.iter().map(|&j| state.agents[j].speed.as_f64() - half_v).sum();
        theta_sum_max = theta_sum_max.max(ts.abs());
        v_sum_max = v_sum_max.max(vs.abs());
    }
    let theta_ratio = theta_sum_max / f_n;
    let v_ratio = if params.v_n > T::zero() { v_sum_max / (params.v_n.as_f64() * f_n) } else { 0.0 };
    let degrees = graph.degrees();
    let d_max0 = degrees.iter().copied().max().unwrap_or(0);
    let d_min0 = degrees.iter().copied().min().unwrap_or(0);
    let mean_degree = total as f64 * std::f64::consts::PI * r * r;
    let d_max_ratio = d_max0 as f64 / mean_degree;
    let d_min_ratio = d_min0 as f64 / (mean_degree / 4.0);
    Ok(InitialDiagnostics {
        a_n,
        grid_side: side,
        grid_cells: side * side,
        max_cell_followers,
        max_cell_leaders,
        max_cell_total,
        expected_cell_followers: expected,
        cell_occupancy_ok,
        f_n,
        theta_sum_max,
        v_sum_max,
        theta_ratio,
        v_ratio,
        sums_ok: theta_ratio < sum_bound && v_ratio < sum_bound,
        d_max0,
        d_min0,
        kappa: if d_min0 > 0 { (d_max0 as f64 / d_min0 as f64).sqrt() } else { f64::INFINITY },
        lambda_hat: 1.0 - r * r / 288.0,
        d_max_ratio,
        d_min_ratio,
        degrees_ok: (d_max_ratio - 1.0).abs() <= 0.2 && (d_min_ratio - 1.0).abs() <= 0.2,
        warnings,
    })
}

/// Follower and leader neighbour counts at the initial instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderDegreeReport {
    pub min_follower_neighbors: usize,
    pub max_follower_neighbors: usize,
    pub min_leader_neighbors: usize,
    pub max_leader_neighbors: usize,
    pub min_alpha: f64,
    pub max_alpha: f64,
    pub mean_alpha: f64,
    /// `α_n/(1 + α_n)`.
    pub expected_alpha: f64,
    /// `nπr²`.
    pub follower_scale: f64,
    /// `nπr²α_n`.
    pub leader_scale: f64,
    pub follower_band_ok: bool,
    pub leader_band_ok: bool,
    pub alpha_ok: bool,
}

/// Band half-width of the statistical neighbour-count estimates.
pub const DEGREE_BAND: f64 = 0.25;

/// Neighbour counts exclude the agent itself; `α_i(0)` is the leader share.
pub fn leader_degree_estimates<T: Scalar>(state: &SwarmState<T>, params: &ModelParams<T>) -> Result<LeaderDegreeReport> {
    if state.is_empty() {
        return Err(Error::EmptySwarm);
    }
    let graph = ProximityGraph::build_with(&state.positions(), params.radius, true)?;
    let mut fcounts = Vec::with_capacity(state.len());
    let mut lcounts = Vec::with_capacity(state.len());
    let mut alphas = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let (mut f, mut l) = (0usize, 0usize);
        for &j in graph.neighbors(i) {
            if j == i {
                continue;
            }
            match state.roles[j] {
                Role::Follower => f += 1,
                Role::Leader => l += 1,
            }
        }
        fcounts.push(f);
        lcounts.push(l);
        alphas.push(if f + l == 0 { 0.0 } else { l as f64 / (f + l) as f64 });
    }
    let r = params.radius.as_f64();
    let alpha_n = params.alpha_n.as_f64();
    let follower_scale = params.n as f64 * std::f64::consts::PI * r * r;
    let leader_scale = follower_scale * alpha_n;
    let min_max = |v: &[usize]| (v.iter().copied().min().unwrap_or(0), v.iter().copied().max().unwrap_or(0));
    let (fmin, fmax) = min_max(&fcounts);
    let (lmin, lmax) = min_max(&lcounts);
    let band = |lo: usize, hi: usize, scale: f64| {
        lo as f64 >= (1.0 - DEGREE_BAND) * scale / 4.0 && hi as f64 <= (1.0 + DEGREE_BAND) * scale
    };
    let mean_alpha = alphas.iter().sum::<f64>() / alphas.len() as f64;
    let expected_alpha = alpha_n / (1.0 + alpha_n);
    Ok(LeaderDegreeReport {
        min_follower_neighbors: fmin,
        max_follower_neighbors: fmax,
        min_leader_neighbors: lmin,
        max_leader_neighbors: lmax,
        min_alpha: alphas.iter().copied().fold(f64::INFINITY, f64::min),
        max_alpha: alphas.iter().copied().fold(0.0, f64::max),
        mean_alpha,
        expected_alpha,
        follower_scale,
        leader_scale,
        follower_band_ok: band(fmin, fmax, follower_scale),
        leader_band_ok: band(lmin, lmax, leader_scale),
        alpha_ok: if expected_alpha == 0.0 {
            mean_alpha == 0.0
        } else {
            (mean_alpha / expected_alpha - 1.0).abs() <= DEGREE_BAND
        },
    })
}
