//! Seeded runs, campaigns, named scenarios and their on-disk outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    check_corollary1, check_theorem1, check_theorem2, check_theorem3, switch_bound_report, ConditionReport,
    DEFAULT_SEPARATION,
};
use crate::dynamics::{run_epoch, sample_initial, Controller, GraphDiagnostics, ModelParams, SwarmState, Trajectory};
use crate::io;
use crate::metrics::{audit_trajectory, sync_detect, write_metrics_csv, AuditOptions, AuditReport, MetricsTracker, Verdict, VerdictCounts};
use crate::schedule::ReferenceSchedule;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Tolerance on `δθ` and `δv` that counts as synchronised.
pub const SYNC_TOL: f64 = 1e-6;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const AUDITS_FILE: &str = "audits.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Leaderless,
    LeaderConstant,
    LeaderDynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditLevel {
    Off,
    /// Distance recursion on every tenth interval, everything else in full.
    Sampled,
    #[default]
    Full,
}

/// Axis-aligned ellipse used for a post-hoc intersection count only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
}

impl Default for Obstacle {
    fn default() -> Self {
        Self { center: [1.5, 0.5], semi_axes: [0.4, 0.25] }
    }
}

impl Obstacle {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.center[0]) / self.semi_axes[0];
        let dy = (y - self.center[1]) / self.semi_axes[1];
        dx * dx + dy * dy < 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_substeps() -> usize {
    crate::metrics::DEFAULT_SUBSTEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub params: ModelParams<f64>,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    pub mode: Mode,
    /// Constant reference heading (`leader_constant`, default 0).
    #[serde(default)]
    pub reference_heading: Option<f64>,
    /// Reference headings in radians (`leader_dynamic`).
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    /// Trigger switches on follower errors only.
    #[serde(default)]
    pub schedule_followers_only: bool,
    #[serde(default)]
    pub audit_level: AuditLevel,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Redraw the initial state until its proximity graph is connected.
    #[serde(default)]
    pub connected_start: bool,
    #[serde(default)]
    pub obstacle: Option<Obstacle>,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl RunConfig {
    pub fn leaderless(params: ModelParams<f64>, steps: usize, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            params,
            steps,
            seed,
            mode: Mode::Leaderless,
            reference_heading: None,
            schedule: None,
            schedule_followers_only: false,
            audit_level: AuditLevel::Full,
            substeps: default_substeps(),
            connected_start: false,
            obstacle: None,
            outputs: OutputConfig::default(),
        }
    }

    pub fn leader_constant(params: ModelParams<f64>, heading: f64, steps: usize, seed: u64) -> Self {
        Self { mode: Mode::LeaderConstant, reference_heading: Some(heading), ..Self::leaderless(params, steps, seed) }
    }

    pub fn leader_dynamic(params: ModelParams<f64>, schedule: Vec<f64>, steps: usize, seed: u64) -> Self {
        Self { mode: Mode::LeaderDynamic, schedule: Some(schedule), ..Self::leaderless(params, steps, seed) }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "at `schema_version`: unsupported version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.params
            .validate()
            .map_err(|e| Error::Config(format!("in `params`: {e}")))?;
        if self.steps == 0 {
            return Err(Error::Config("at `steps`: must be at least 1".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Config("at `substeps`: must be at least 1".into()));
        }
        let leaders = self.params.leader_count();
        match self.mode {
            Mode::Leaderless => {
                if leaders > 0 {
                    return Err(Error::Config("at `params.alpha_n`: leaderless mode requires alpha_n = 0".into()));
                }
                if self.schedule.is_some() || self.reference_heading.is_some() {
                    return Err(Error::Config("at `mode`: leaderless mode takes no reference".into()));
                }
            }
            Mode::LeaderConstant => {
                if leaders == 0 {
                    return Err(Error::Config("at `params.alpha_n`: leader mode requires alpha_n > 0".into()));
                }
                if self.schedule.is_some() {
                    return Err(Error::Config("at `schedule`: use mode leader_dynamic for a schedule".into()));
                }
                if self.reference_heading.is_some_and(|h| !h.is_finite()) {
                    return Err(Error::Config("at `reference_heading`: must be finite".into()));
                }
            }
            Mode::LeaderDynamic => {
                if leaders == 0 {
                    return Err(Error::Config("at `params.alpha_n`: leader mode requires alpha_n > 0".into()));
                }
                if self.schedule.is_none() {
                    return Err(Error::Config("at `schedule`: dynamic leader mode requires a schedule".into()));
                }
                self.reference_schedule()?;
            }
        }
        Ok(())
    }

    pub fn controller(&self) -> Controller<f64> {
        match self.mode {
            Mode::Leaderless => Controller::Leaderless,
            Mode::LeaderConstant => Controller::LeaderConstant { heading: self.reference_heading.unwrap_or(0.0) },
            Mode::LeaderDynamic => Controller::LeaderDynamic,
        }
    }

    pub fn reference_schedule(&self) -> Result<Option<ReferenceSchedule<f64>>> {
        match (&self.schedule, self.mode) {
            (Some(h), Mode::LeaderDynamic) => ReferenceSchedule::new(h.clone(), self.params.epsilon)
                .map(|s| Some(s.followers_only(self.schedule_followers_only)))
                .map_err(|e| Error::Config(format!("at `schedule`: {e}"))),
            _ => Ok(None),
        }
    }

    pub fn audit_options(&self) -> Option<AuditOptions> {
        match self.audit_level {
            AuditLevel::Off => None,
            AuditLevel::Sampled => Some(AuditOptions { substeps: self.substeps, stride: 10 }),
            AuditLevel::Full => Some(AuditOptions { substeps: self.substeps, stride: 1 }),
        }
    }

    /// First reference heading, zero without leaders.
    pub fn initial_reference(&self) -> f64 {
        match self.mode {
            Mode::Leaderless => 0.0,
            Mode::LeaderConstant => self.reference_heading.unwrap_or(0.0),
            Mode::LeaderDynamic => self.schedule.as_ref().and_then(|s| s.first().copied()).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDisplacement {
    pub segment: usize,
    pub heading: f64,
    pub start_k: usize,
    pub end_k: usize,
    /// Mean agent displacement over the segment.
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleReport {
    pub obstacle: Obstacle,
    /// Agents whose sampled position fell inside the ellipse at least once.
    pub agents_inside: usize,
    pub first_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub config: RunConfig,
    pub agents: usize,
    pub leaders: usize,
    pub sync_index: Option<usize>,
    pub final_delta_theta: f64,
    pub final_delta_v: f64,
    pub final_tracking_theta: Option<f64>,
    pub final_tracking_v: Option<f64>,
    pub connectivity_preserved: bool,
    pub disconnected_instants: usize,
    pub max_exits: usize,
    pub switch_log: Vec<(usize, f64)>,
    pub segments_visited: usize,
    pub segment_displacements: Vec<SegmentDisplacement>,
    pub switch_times: Option<ConditionReport>,
    pub obstacle: Option<ObstacleReport>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub verdict_counts: VerdictCounts,
}

impl RunSummary {
    /// Synchronised within tolerance at the last instant with every sampled
    /// graph connected.
    pub fn synchronized(&self) -> bool {
        self.final_delta_theta < SYNC_TOL && self.final_delta_v < SYNC_TOL && self.connectivity_preserved
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory<f64>,
    pub audits: Option<AuditReport>,
    pub summary: RunSummary,
}

impl RunOutcome {
    pub fn has_failures(&self) -> bool {
        self.audits.as_ref().is_some_and(|a| a.has_failures())
    }

    /// Writes the trajectory, metrics, audits and summary files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut t = io::create_file(&dir.join(TRAJECTORY_FILE))?;
        io::write_trajectory_csv(&mut t, &self.trajectory.states)?;
        std::io::Write::flush(&mut t)?;
        let mut m = io::create_file(&dir.join(METRICS_FILE))?;
        write_metrics_csv(&mut m, &self.trajectory.metrics)?;
        std::io::Write::flush(&mut m)?;
        io::write_json(&dir.join(AUDITS_FILE), &self.audits)?;
        io::write_json(&dir.join(SUMMARY_FILE), &self.summary)?;
        Ok(())
    }
}

fn segment_displacements(traj: &Trajectory<f64>) -> Vec<SegmentDisplacement> {
    let Some(sched) = &traj.schedule else {
        return Vec::new();
    };
    let mut bounds = vec![0usize];
    bounds.extend(sched.switch_log().iter().map(|r| r.k));
    let last = traj.steps();
    (0..bounds.len())
        .map(|seg| {
            let start = bounds[seg];
            let end = bounds.get(seg + 1).copied().unwrap_or(last);
            let (a, b) = (&traj.states[start], &traj.states[end]);
            let n = a.len() as f64;
            let (mut dx, mut dy) = (0.0, 0.0);
            for (p, q) in a.agents.iter().zip(&b.agents) {
                dx += q.position.x - p.position.x;
                dy += q.position.y - p.position.y;
            }
            SegmentDisplacement {
                segment: seg,
                heading: sched.headings()[seg],
                start_k: start,
                end_k: end,
                dx: dx / n,
                dy: dy / n,
            }
        })
        .collect()
}

fn obstacle_report(traj: &Trajectory<f64>, obstacle: Obstacle) -> ObstacleReport {
    let mut inside = vec![false; traj.initial().len()];
    let mut first_k = None;
    for s in &traj.states {
        for (i, a) in s.agents.iter().enumerate() {
            if obstacle.contains(a.position.x, a.position.y) {
                inside[i] = true;
                first_k.get_or_insert(s.sample_index);
            }
        }
    }
    ObstacleReport { obstacle, agents_inside: inside.iter().filter(|x| **x).count(), first_k }
}

fn summarize(config: &RunConfig, traj: &Trajectory<f64>, audits: Option<&AuditReport>) -> RunSummary {
    let last = traj.metrics.last().expect("at least one instant");
    let verdicts = audits.map(|a| a.verdicts.clone()).unwrap_or_default();
    let verdict_counts = verdicts.values().copied().collect();
    RunSummary {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        agents: traj.initial().len(),
        leaders: traj.initial().leader_count(),
        sync_index: sync_detect(traj, SYNC_TOL, SYNC_TOL),
        final_delta_theta: last.delta_theta,
        final_delta_v: last.delta_v,
        final_tracking_theta: last.tracking_theta,
        final_tracking_v: last.tracking_v,
        connectivity_preserved: traj.connectivity_preserved(),
        disconnected_instants: traj.diagnostics.iter().filter(|d| !d.connected).count(),
        max_exits: traj.diagnostics.iter().map(|d| d.exits).max().unwrap_or(0),
        switch_log: traj
            .schedule
            .as_ref()
            .map(|s| s.switch_log().iter().map(|r| (r.k, r.max_error)).collect())
            .unwrap_or_default(),
        segments_visited: traj.schedule.as_ref().map(|s| s.segment() + 1).unwrap_or(1),
        segment_displacements: segment_displacements(traj),
        switch_times: traj.schedule.as_ref().map(|s| switch_bound_report(&traj.params, s)),
        obstacle: config.obstacle.map(|o| obstacle_report(traj, o)),
        verdicts,
        verdict_counts,
    }
}

/// Redraws allowed for `connected_start`.
pub const MAX_START_ATTEMPTS: u64 = 10_000;

/// The run's initial state. With `connected_start`, attempt `j` samples with
/// seed `seed + j·2³²` and the first connected draw is kept.
pub fn initial_state(config: &RunConfig) -> Result<SwarmState<f64>> {
    if !config.connected_start {
        return Ok(sample_initial(&config.params, config.seed));
    }
    for attempt in 0..MAX_START_ATTEMPTS {
        let state = sample_initial(&config.params, config.seed.wrapping_add(attempt << 32));
        if state.graph(&config.params)?.is_connected() {
            return Ok(state);
        }
    }
    Err(Error::Config(format!(
        "at `connected_start`: no connected initial graph in {MAX_START_ATTEMPTS} draws"
    )))
}

/// Runs one configuration in memory.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let initial = initial_state(config)?;
    let trajectory = run_epoch(
        initial,
        &config.params,
        config.steps,
        config.controller(),
        config.reference_schedule()?,
    )?;
    let audits = config.audit_options().map(|o| audit_trajectory(&trajectory, o)).transpose()?;
    let summary = summarize(config, &trajectory, audits.as_ref());
    Ok(RunOutcome { trajectory, audits, summary })
}

/// Runs and writes the four output files into `dir`.
pub fn run_to_dir(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    let outcome = run(config)?;
    outcome.write_to(dir)?;
    Ok(outcome)
}

/// Rebuilds graph diagnostics, metrics and the schedule state from stored
/// sampling instants.
pub fn reconstruct(config: &RunConfig, states: Vec<SwarmState<f64>>) -> Result<Trajectory<f64>> {
    config.validate()?;
    if states.len() < 2 {
        return Err(Error::Trajectory("need at least two sampling instants".into()));
    }
    let params = &config.params;
    if states[0].len() != params.agent_count() {
        return Err(Error::Trajectory(format!(
            "stored swarm has {} agents, config implies {}",
            states[0].len(),
            params.agent_count()
        )));
    }
    let controller = config.controller();
    let mut schedule = config.reference_schedule()?;
    let g0 = states[0].graph(params)?;
    let mut tracker = MetricsTracker::new(&states[0], &g0, params.v_n)?;
    let steps = states.len() - 1;
    let mut references = Vec::with_capacity(steps);
    let mut diagnostics = Vec::with_capacity(states.len());
    let mut metrics = Vec::with_capacity(states.len());
    for (k, s) in states.iter().enumerate() {
        let graph = if k == 0 { g0.clone() } else { s.graph(params)? };
        let reference = if k < steps {
            let r = match controller {
                Controller::Leaderless => None,
                Controller::LeaderConstant { heading } => Some(heading),
                Controller::LeaderDynamic => {
                    let sched = schedule.as_mut().expect("validated");
                    sched.maybe_advance(s);
                    Some(sched.current_heading())
                }
            };
            references.push(r);
            r
        } else {
            references.last().copied().flatten()
        };
        diagnostics.push(GraphDiagnostics::of(k, s, &graph));
        metrics.push(tracker.observe(s, &graph, reference)?);
    }
    Ok(Trajectory { params: params.clone(), controller, states, references, diagnostics, metrics, schedule })
}

/// Result of re-auditing a stored run.
#[derive(Debug, Clone)]
pub struct StoredAudit {
    pub report: Option<AuditReport>,
    pub stored: Option<AuditReport>,
    pub summary: RunSummary,
}

impl StoredAudit {
    pub fn matches_stored(&self) -> bool {
        self.report == self.stored
    }

    pub fn has_failures(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.has_failures())
    }
}

/// Re-runs the audits on a directory written by [`run_to_dir`].
pub fn audit_dir(dir: &Path) -> Result<StoredAudit> {
    let stored_summary: RunSummary = io::read_json(&dir.join(SUMMARY_FILE))?;
    let config = stored_summary.config.clone();
    let states = io::read_trajectory_file(&dir.join(TRAJECTORY_FILE))?;
    let traj = reconstruct(&config, states)?;
    let options = config.audit_options().unwrap_or_default();
    let report = Some(audit_trajectory(&traj, options)?);
    let audits_path = dir.join(AUDITS_FILE);
    let stored: Option<AuditReport> = if audits_path.exists() { io::read_json(&audits_path)? } else { None };
    let summary = summarize(&config, &traj, report.as_ref());
    Ok(StoredAudit { report, stored, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub sync_index: Option<usize>,
    pub synchronized: bool,
    pub final_delta_theta: Option<f64>,
    pub final_delta_v: Option<f64>,
    pub final_tracking_theta: Option<f64>,
    pub final_tracking_v: Option<f64>,
    pub connectivity_preserved: bool,
    pub segments_visited: Option<usize>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub count: usize,
    pub min: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles; `None` for an empty sample.
    pub fn of(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let at = |q: f64| values[((q * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1];
        Some(Self { count: values.len(), min: values[0], p50: at(0.5), p90: at(0.9), max: values[values.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub schema_version: u32,
    pub run_count: usize,
    pub error_count: usize,
    pub sync_fraction: f64,
    pub connectivity_fraction: f64,
    pub verdict_totals: BTreeMap<String, VerdictCounts>,
    pub sync_index: Option<Quantiles>,
    pub final_delta_theta: Option<Quantiles>,
    pub final_tracking_theta: Option<Quantiles>,
    /// One record per seed, ordered by seed.
    pub runs: Vec<RunRecord>,
}

fn record(seed: u64, result: Result<RunOutcome>) -> RunRecord {
    match result {
        Ok(o) => {
            let s = &o.summary;
            RunRecord {
                seed,
                sync_index: s.sync_index,
                synchronized: s.synchronized(),
                final_delta_theta: Some(s.final_delta_theta),
                final_delta_v: Some(s.final_delta_v),
                final_tracking_theta: s.final_tracking_theta,
                final_tracking_v: s.final_tracking_v,
                connectivity_preserved: s.connectivity_preserved,
                segments_visited: s.config.schedule.as_ref().map(|_| s.segments_visited),
                verdicts: s.verdicts.clone(),
                error: None,
            }
        }
        Err(e) => RunRecord {
            seed,
            sync_index: None,
            synchronized: false,
            final_delta_theta: None,
            final_delta_v: None,
            final_tracking_theta: None,
            final_tracking_v: None,
            connectivity_preserved: false,
            segments_visited: None,
            verdicts: BTreeMap::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Aggregates per-seed records; the result does not depend on their order.
pub fn aggregate(mut runs: Vec<RunRecord>) -> CampaignSummary {
    runs.sort_by_key(|r| r.seed);
    let n = runs.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let mut verdict_totals: BTreeMap<String, VerdictCounts> = BTreeMap::new();
    for r in &runs {
        for (name, v) in &r.verdicts {
            verdict_totals.entry(name.clone()).or_default().add(*v);
        }
    }
    CampaignSummary {
        schema_version: SCHEMA_VERSION,
        run_count: n,
        error_count: runs.iter().filter(|r| r.error.is_some()).count(),
        sync_fraction: frac(runs.iter().filter(|r| r.synchronized).count()),
        connectivity_fraction: frac(runs.iter().filter(|r| r.connectivity_preserved).count()),
        verdict_totals,
        sync_index: Quantiles::of(runs.iter().filter_map(|r| r.sync_index.map(|k| k as f64)).collect()),
        final_delta_theta: Quantiles::of(runs.iter().filter_map(|r| r.final_delta_theta).collect()),
        final_tracking_theta: Quantiles::of(runs.iter().filter_map(|r| r.final_tracking_theta).collect()),
        runs,
    }
}

/// Runs `base` once per seed in parallel. Failed runs are recorded, not fatal.
pub fn campaign(base: &RunConfig, seeds: &[u64]) -> Result<CampaignSummary> {
    if seeds.is_empty() {
        return Err(Error::Config("campaign needs at least one seed".into()));
    }
    base.validate()?;
    let runs = seeds.par_iter().map(|&seed| record(seed, run(&base.with_seed(seed)))).collect();
    Ok(aggregate(runs))
}

/// Every condition report for a configuration.
pub fn check_config(config: &RunConfig) -> Result<Vec<ConditionReport>> {
    config.validate()?;
    let params = &config.params;
    let theta0 = config.initial_reference();
    let schedule = match config.reference_schedule()? {
        Some(s) => s,
        None => ReferenceSchedule::constant(theta0, params.epsilon)?,
    };
    let mut out = vec![check_theorem1(params)?, check_corollary1(params, None)?];
    out.extend(check_theorem2(params, theta0, DEFAULT_SEPARATION)?);
    out.extend(check_theorem3(params, &schedule, DEFAULT_SEPARATION)?);
    Ok(out)
}

pub const FIG3_SCHEDULE: [f64; 5] =
    [0.0, std::f64::consts::FRAC_PI_2, 0.0, -std::f64::consts::FRAC_PI_2, 0.0];
pub const FIG3_STEPS: usize = 3000;

/// Twenty followers and three leaders crossing past an oval obstacle with the
/// reference sequence right, up, right, down, right.
pub fn scenario_fig3(vartheta: f64, epsilon: f64) -> RunConfig {
    let params = ModelParams {
        n: 20,
        alpha_n: 0.15,
        radius: 0.3,
        v_n: 0.3,
        tau: 0.01,
        vartheta,
        epsilon,
        ..ModelParams::default()
    };
    RunConfig {
        connected_start: true,
        obstacle: Some(Obstacle::default()),
        ..RunConfig::leader_dynamic(params, FIG3_SCHEDULE.to_vec(), FIG3_STEPS, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig::leaderless(ModelParams::leaderless(20, 0.4, 0.05, 0.01), 50, 3)
    }

    #[test]
    fn validation_catches_mode_mismatch() {
        let mut c = small();
        c.mode = Mode::LeaderDynamic;
        assert!(c.validate().is_err());
        let mut c = small();
        c.params.alpha_n = 0.2;
        assert!(c.validate().is_err());
        let mut c = RunConfig::leader_dynamic(ModelParams::with_leaders(10, 0.2, 0.3, 0.1, 0.01, 0.5), vec![], 10, 0);
        assert!(c.validate().is_err());
        c.schedule = Some(vec![0.0, 1.0]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn deterministic_outputs() {
        let a = run(&small()).unwrap();
        let b = run(&small()).unwrap();
        let csv = |o: &RunOutcome| {
            let mut buf = Vec::new();
            write_metrics_csv(&mut buf, &o.trajectory.metrics).unwrap();
            buf
        };
        assert_eq!(csv(&a), csv(&b));
    }

    #[test]
    fn reconstruct_matches_run() {
        let cfg = scenario_fig3(0.5, 0.05);
        let cfg = RunConfig { steps: 400, ..cfg.with_seed(2) };
        let o = run(&cfg).unwrap();
        let traj = reconstruct(&cfg, o.trajectory.states.clone()).unwrap();
        assert_eq!(traj.metrics, o.trajectory.metrics);
        assert_eq!(traj.references, o.trajectory.references);
        assert_eq!(traj.schedule, o.trajectory.schedule);
    }

    #[test]
    fn stored_run_audits_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { steps: 200, ..scenario_fig3(0.5, 0.05).with_seed(5) };
        let o = run_to_dir(&cfg, dir.path()).unwrap();
        let stored = audit_dir(dir.path()).unwrap();
        assert!(stored.matches_stored());
        assert_eq!(stored.report, o.audits);
        assert_eq!(stored.summary, o.summary);
    }

    #[test]
    fn connected_start_redraws() {
        let mut cfg = scenario_fig3(0.5, 0.05);
        for seed in 0..10 {
            cfg.seed = seed;
            let s = initial_state(&cfg).unwrap();
            assert!(s.graph(&cfg.params).unwrap().is_connected());
        }
        cfg.connected_start = false;
        cfg.seed = 0;
        assert_eq!(initial_state(&cfg).unwrap(), sample_initial(&cfg.params, 0));
    }

    #[test]
    fn aggregate_ignores_order() {
        let cfg = small();
        let runs: Vec<RunRecord> = [4, 1, 9].iter().map(|&s| record(s, run(&cfg.with_seed(s)))).collect();
        let mut reversed = runs.clone();
        reversed.reverse();
        assert_eq!(aggregate(runs), aggregate(reversed));
    }

    #[test]
    fn quantiles_nearest_rank() {
        let q = Quantiles::of(vec![5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!((q.min, q.p50, q.p90, q.max), (1.0, 3.0, 5.0, 5.0));
        assert!(Quantiles::of(vec![]).is_none());
    }

    #[test]
    fn single_seed_campaign_mirrors_run() {
        let cfg = small();
        let s = campaign(&cfg, &[3]).unwrap();
        let o = run(&cfg).unwrap();
        assert_eq!(s.run_count, 1);
        assert_eq!(s.runs[0].final_delta_theta, Some(o.summary.final_delta_theta));
        assert_eq!(s.runs[0].sync_index, o.summary.sync_index);
    }

    #[test]
    fn obstacle_membership() {
        let o = Obstacle::default();
        assert!(o.contains(1.5, 0.5));
        assert!(o.contains(1.85, 0.5));
        assert!(!o.contains(1.5, 0.8));
    }

    #[test]
    fn fig3_configuration() {
        let c = scenario_fig3(0.5, 0.05);
        assert_eq!(c.params.n, 20);
        assert_eq!(c.params.leader_count(), 3);
        assert_eq!((c.params.v_n, c.params.radius, c.params.tau), (0.3, 0.3, 0.01));
        let tv = c.reference_schedule().unwrap().unwrap().total_variation();
        assert!((tv - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn check_lists_every_condition() {
        let c = scenario_fig3(0.5, 0.05);
        let names: Vec<String> = check_config(&c).unwrap().into_iter().map(|r| r.name).collect();
        assert_eq!(
            names,
            ["theorem1", "corollary1", "theorem2.branch1", "theorem2.branch2", "theorem3.branch1", "theorem3.branch2"]
        );
    }
}
