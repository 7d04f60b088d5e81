//! Small hand-evaluated runs.

use swarmsync::dynamics::run_epoch;
use swarmsync::metrics::sync_detect;
use swarmsync::{Agent, Controller, Params, Role, Schedule, Swarm};

#[test]
fn two_visible_agents_sync_in_one_step() {
    let params = Params::leaderless(2, 0.5, 0.2, 0.01);
    let state = Swarm::leaderless(vec![Agent::new(0.4, 0.5, 1.0, 0.1), Agent::new(0.6, 0.5, -0.5, 0.2)]);
    let traj = run_epoch(state, &params, 5, Controller::Leaderless, None).unwrap();
    assert_eq!(sync_detect(&traj, 1e-12, 1e-12), Some(1));
    let s1 = &traj.states[1];
    assert_eq!(s1.agents[0].heading, 0.25);
    assert_eq!(s1.agents[1].speed, 0.15000000000000002);
}

#[test]
fn separated_agents_never_sync() {
    let params = Params::leaderless(2, 0.1, 0.2, 0.01);
    let state = Swarm::leaderless(vec![Agent::new(0.1, 0.1, 0.0, 0.1), Agent::new(0.9, 0.9, 1.0, 0.1)]);
    let traj = run_epoch(state, &params, 20, Controller::Leaderless, None).unwrap();
    assert_eq!(sync_detect(&traj, 1e-6, 1e-6), None);
    assert!(!traj.connectivity_preserved());
}

/// One follower and one leader with ϑ = 1: the leader sits on the reference
/// from the first step and the follower error halves each step.
#[test]
fn scripted_schedule_switches() {
    let params = Params { epsilon: 0.06, ..Params::with_leaders(1, 1.0, 1.0, 0.01, 0.01, 1.0) };
    assert_eq!(params.leader_count(), 1);
    let state = Swarm::with_roles(
        vec![Agent::new(0.5, 0.5, 0.4, 0.0), Agent::new(0.6, 0.5, 0.0, 0.0)],
        vec![Role::Follower, Role::Leader],
    )
    .unwrap();
    let schedule = Schedule::new(vec![0.0, 1.0, 1.0], params.epsilon).unwrap();
    let traj = run_epoch(state, &params, 12, Controller::LeaderDynamic, Some(schedule)).unwrap();
    let log = traj.schedule.as_ref().unwrap().switch_log();
    // follower errors: 0.4, 0.2, 0.1, 0.05 → switch at k = 3; then
    // 0.975, 0.4875, …, 0.0609375, 0.03046875 → switch at k = 9
    let ks: Vec<usize> = log.iter().map(|r| r.k).collect();
    assert_eq!(ks, vec![3, 9]);
    assert!((log[0].max_error - 0.05).abs() < 1e-15);
    assert!((log[1].max_error - 0.03046875).abs() < 1e-15);
    assert_eq!(traj.references[2], Some(0.0));
    assert_eq!(traj.references[3], Some(1.0));
    assert!(traj.states.iter().skip(1).all(|s| s.agents[1].heading == traj.references[s.sample_index - 1].unwrap()));
}
