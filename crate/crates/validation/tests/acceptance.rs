//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarmsync::conditions::initial_diagnostics;
use swarmsync::controllers::swarm_controls;
use swarmsync::dynamics::{displacement, leader_step, leaderless_step, sample_initial};
use swarmsync::harness::{self, RunConfig};
use swarmsync::metrics::Verdict;
use swarmsync::quadrature::integrate_position_oracle;
use swarmsync::{Agent, Graph, Params, Position, Role, Swarm};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn leaderless_base() -> RunConfig {
    RunConfig::leaderless(Params::leaderless(50, 0.4, 0.05, 0.01), 500, 0)
}

/// Criteria 1 to 3 share one campaign.
fn leaderless_campaign() -> (Outcome, Outcome, Outcome) {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..50).collect();
    let summary = harness::campaign(&leaderless_base(), &seeds).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let totals = &summary.verdict_totals;
    let recursion = totals.get("distance_recursion").copied().unwrap_or_default();
    let convexity = totals.get("convexity").copied().unwrap_or_default();
    let c1 = outcome(
        summary.error_count == 0 && recursion.fail == 0 && recursion.pass == 50 && secs < 120.0,
        format!("recursion audits pass={} fail={} in {secs:.1}s", recursion.pass, recursion.fail),
    );
    let c2 = outcome(
        summary.error_count == 0 && convexity.fail == 0 && convexity.pass == 50,
        format!("convexity audits pass={} fail={} skip={}", convexity.pass, convexity.fail, convexity.skip),
    );
    let c3 = outcome(
        summary.sync_fraction >= 0.95,
        format!(
            "synchronised with connectivity preserved in {:.0}% of runs (connected {:.0}%)",
            100.0 * summary.sync_fraction,
            100.0 * summary.connectivity_fraction
        ),
    );
    (c1, c2, c3)
}

fn criterion4() -> Outcome {
    let start = Instant::now();
    let params = Params::leaderless(5000, 0.1, 0.05, 0.01);
    let mut hits = 0;
    let mut max_ratios = Vec::new();
    let mut min_ratios = Vec::new();
    for seed in 0..50 {
        let state = sample_initial(&params, seed);
        let d = initial_diagnostics(&state, &params, None, 5.0).unwrap();
        let ok_max = (0.8..=1.2).contains(&d.d_max_ratio);
        let ok_min = (0.75..=1.25).contains(&d.d_min_ratio);
        hits += usize::from(ok_max && ok_min);
        max_ratios.push(d.d_max_ratio);
        min_ratios.push(d.d_min_ratio);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        hits >= 45 && secs < 60.0,
        format!(
            "{hits}/50 seeds inside both bands; mean d_max ratio {:.3}, mean d_min ratio {:.3}; {secs:.1}s",
            mean(&max_ratios),
            mean(&min_ratios)
        ),
    )
}

/// Eigenvalues of `P = T⁻¹A` from a general (non-symmetric) Schur
/// decomposition, built straight from the positions.
fn brute_force_p_eigenvalues(points: &[Position], radius: f64) -> Vec<f64> {
    let n = points.len();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&j| points[i].distance(&points[j]) < radius).collect();
        for &j in &nbrs {
            p[(i, j)] = 1.0 / nbrs.len() as f64;
        }
    }
    let eig = p.complex_eigenvalues();
    let mut re: Vec<f64> = eig
        .iter()
        .map(|z| {
            assert!(z.im.abs() < 1e-9, "P is similar to a symmetric matrix");
            z.re
        })
        .collect();
    re.sort_by(f64::total_cmp);
    re
}

fn criterion5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gap = 0.0f64;
    let mut worst_spectrum = 0.0f64;
    let mut graphs = 0;
    while graphs < 100 {
        let n = rng.random_range(2..=30);
        let radius = rng.random_range(0.3..0.9);
        let points: Vec<Position> = (0..n).map(|_| Position::new(rng.random(), rng.random())).collect();
        let graph = Graph::build(&points, radius).unwrap();
        if !graph.is_connected() {
            continue;
        }
        graphs += 1;
        let summary = graph.spectral_summary().unwrap();
        let mu = brute_force_p_eigenvalues(&points, radius);
        // μ sorted ascending, μ_{n-1} = 1; λ = 1 − μ
        let gap = mu[0].abs().max(if n > 1 { mu[n - 2].abs() } else { 0.0 });
        worst_gap = worst_gap.max((gap - summary.spectral_gap).abs());
        let mut from_l: Vec<f64> = summary.eigenvalues.iter().map(|l| 1.0 - l).collect();
        from_l.sort_by(f64::total_cmp);
        for (a, b) in from_l.iter().zip(&mu) {
            worst_spectrum = worst_spectrum.max((a - b).abs());
        }
    }
    let cluster: Vec<Position> = (0..12).map(|i| Position::new(0.5 + 1e-3 * i as f64, 0.5)).collect();
    let complete_gap = Graph::build(&cluster, 0.3).unwrap().spectral_summary().unwrap().spectral_gap;
    outcome(
        worst_gap <= 1e-9 && worst_spectrum <= 1e-9 && complete_gap.abs() <= 1e-12,
        format!("gap error {worst_gap:.1e}, spectrum error {worst_spectrum:.1e}, complete-graph gap {complete_gap:.1e}"),
    )
}

fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for draw in 0..10_000 {
        let a = rng.random_range(0.0..1.0);
        let b = rng.random_range(-10.0..10.0);
        let c = rng.random_range(-PI..PI);
        let d = if draw % 4 == 0 { rng.random_range(-1e-8..1e-8) } else { rng.random_range(-50.0..50.0) };
        let tau = rng.random_range(1e-4..0.1);
        let (x, y) = displacement(a, b, c, d, tau);
        let (ox, oy) = integrate_position_oracle(a, b, c, d, tau).unwrap();
        worst = worst.max((x - ox).abs()).max((y - oy).abs());
    }
    outcome(worst <= 1e-10, format!("worst deviation from quadrature {worst:.1e} over 10^4 draws"))
}

fn random_swarm(rng: &mut ChaCha8Rng) -> Swarm {
    let n = rng.random_range(2..=25);
    let agents = (0..n)
        .map(|_| Agent::new(rng.random(), rng.random(), rng.random_range(-PI..PI), rng.random_range(0.0..0.3)))
        .collect();
    let roles = (0..n).map(|_| if rng.random_bool(0.3) { Role::Leader } else { Role::Follower }).collect();
    Swarm::with_roles(agents, roles).unwrap()
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let state = random_swarm(&mut rng);
        let radius = rng.random_range(0.1..0.8);
        let tau = rng.random_range(1e-3..0.1);
        let vartheta = rng.random_range(0.0..=1.0);
        let (ref_heading, ref_speed) = (rng.random_range(-PI..PI), rng.random_range(0.0..0.3));
        let graph = Graph::build(&state.positions(), radius).unwrap();
        let follower_only = Swarm { roles: vec![Role::Follower; state.len()], ..state.clone() };
        for (s, next, reference) in [
            (&follower_only, leaderless_step(&follower_only, &graph), None),
            (&state, leader_step(&state, &graph, ref_heading, ref_speed, vartheta), Some((ref_heading, ref_speed))),
        ] {
            let controls = swarm_controls(s, &graph, tau, vartheta, reference);
            for ((a, b), u) in s.agents.iter().zip(&next.agents).zip(&controls) {
                worst = worst.max((a.heading + tau * u.omega - b.heading).abs());
                worst = worst.max((a.speed + tau * u.u - b.speed).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("worst hold-and-integrate mismatch {worst:.1e} over 10^3 states"))
}

fn criterion8() -> Outcome {
    let params = Params::with_leaders(100, 0.3, 0.3, 0.1, 0.01, 0.5);
    let base = RunConfig::leader_constant(params, FRAC_PI_4, 1000, 0);
    let seeds: Vec<u64> = (0..20).collect();
    let summary = harness::campaign(&base, &seeds).unwrap();
    let tracked = summary
        .runs
        .iter()
        .filter(|r| r.final_tracking_theta.is_some_and(|e| e < 1e-3) && r.final_tracking_v.is_some_and(|e| e < 1e-3))
        .count();
    let envelope = summary.verdict_totals.get("leader_envelope").copied().unwrap_or_default();
    outcome(
        summary.error_count == 0 && tracked >= 18 && envelope.fail == 0,
        format!(
            "{tracked}/20 seeds track within 1e-3; envelope pass={} skip={} fail={}",
            envelope.pass, envelope.skip, envelope.fail
        ),
    )
}

fn criterion9() -> Outcome {
    let base = harness::scenario_fig3(0.5, 0.05);
    let mut ok = 0;
    let mut reasons = Vec::new();
    for seed in 0..20 {
        let run = harness::run(&base.with_seed(seed)).unwrap();
        let s = &run.summary;
        let visited = s.segments_visited == 5;
        let switches_ok = s.verdicts.get("schedule_switches") == Some(&Verdict::Pass)
            && s.switch_log.iter().all(|&(_, e)| e <= 0.05);
        let speeds_ok = run.trajectory.last().agents.iter().all(|a| (a.speed - 0.3).abs() < 1e-3);
        let expected = [(1.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (1.0, 0.0)];
        let pattern_ok = s.segment_displacements.len() == 5
            && s.segment_displacements.iter().zip(expected).all(|(d, (ex, ey))| {
                let along = d.dx * ex + d.dy * ey;
                let across = (d.dx * ey - d.dy * ex).abs();
                along > 0.0 && along > across
            });
        if visited && switches_ok && speeds_ok && pattern_ok {
            ok += 1;
        } else {
            reasons.push(format!("seed {seed}: {} segments", s.segments_visited));
        }
    }
    outcome(ok >= 16, format!("{ok}/20 seeds complete the course; {}", reasons.join(", ")))
}

fn criterion10() -> Outcome {
    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let (c, cp) = (1.0 / 46_080.0, 1.0 / 144.0);

    let p1 = Params { c, c_prime: cp, strict: true, ..Params::leaderless(200, 0.3, 0.3, 0.01) };
    let reports = harness::check_config(&RunConfig::leaderless(p1, 10, 0)).unwrap();
    let t1 = reports.iter().find(|r| r.name == "theorem1").unwrap();
    let rhs1 = cp * (c * 0.09) * 0.027 / 200f64.ln();
    worst = worst.max(rel(t1.rhs, rhs1)).max(rel(t1.lhs, 3e-3));
    let t1_ok = !t1.satisfied && (rhs1 - 6.9e-11).abs() < 0.05e-11;

    let p2 = Params { eta: 1.0 / 512.0, ..Params::with_leaders(200, 0.1, 0.3, 0.3, 0.01, 0.5) };
    let reports = harness::check_config(&RunConfig::leader_constant(p2.clone(), 0.0, 10, 0)).unwrap();
    let t2 = reports.iter().find(|r| r.name == "theorem2.branch1").unwrap();
    let alpha2 = 8.0 * 0.003 / (0.5 * (1.0 / 512.0) * 0.3);
    worst = worst.max(rel(t2.details["required_alpha"], alpha2));
    let t2_ok = !t2.satisfied && (alpha2 - 81.92).abs() < 1e-9;

    let schedule = vec![0.0, FRAC_PI_2, 0.0, -FRAC_PI_2, 0.0];
    let reports = harness::check_config(&RunConfig::leader_dynamic(p2, schedule, 10, 0)).unwrap();
    let t3 = reports.iter().find(|r| r.name == "theorem3.branch1").unwrap();
    let req3 = 4.0 * 0.003 * (1.0 + 2.0 * PI) / ((1.0 / 512.0) * 0.3);
    worst = worst.max(rel(t3.lhs, req3));
    let t3_ok = !t3.satisfied && (req3 - 149.2).abs() < 0.1;

    outcome(
        worst <= 1e-12 && t1_ok && t2_ok && t3_ok,
        format!("worst relative error {worst:.1e}; rhs1 {rhs1:.4e}, alpha2 {alpha2:.4}, required3 {req3:.2}"),
    )
}

fn criterion11() -> Outcome {
    let mut same = true;
    let configs = [leaderless_base().with_seed(11), harness::scenario_fig3(0.5, 0.05).with_seed(11)];
    for config in configs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        harness::run_to_dir(&config, a.path()).unwrap();
        harness::run_to_dir(&config, b.path()).unwrap();
        for file in [harness::METRICS_FILE, harness::TRAJECTORY_FILE, harness::AUDITS_FILE, harness::SUMMARY_FILE] {
            let x = std::fs::read(a.path().join(file)).unwrap();
            let y = std::fs::read(b.path().join(file)).unwrap();
            same &= !x.is_empty() && x == y;
        }
    }
    outcome(same, "repeated runs write byte-identical outputs".into())
}

#[test]
fn acceptance() {
    let (c1, c2, c3) = leaderless_campaign();
    let results = [
        ("1 distance recursion audit", c1),
        ("2 monotone extrema", c2),
        ("3 leaderless synchronisation", c3),
        ("4 initial degree bands", criterion4()),
        ("5 spectral consistency", criterion5()),
        ("6 closed-form positions", criterion6()),
        ("7 hold-and-integrate", criterion7()),
        ("8 leader tracking", criterion8()),
        ("9 obstacle course", criterion9()),
        ("10 condition arithmetic", criterion10()),
        ("11 determinism", criterion11()),
    ];
    let mut failed = Vec::new();
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
