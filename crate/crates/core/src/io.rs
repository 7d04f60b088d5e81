//! File formats: trajectory CSV, JSON configs and reports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dynamics::{AgentState, Role, SwarmState};
use crate::{Error, Result, Scalar};

pub const TRAJECTORY_HEADER: &str = "k,agent,role,x,y,theta,v";

/// Full-precision scientific notation; round-trips every `f64`.
pub fn fmt_real<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

/// One row per agent and sampling instant: `k,agent,role,x,y,theta,v`.
pub fn write_trajectory_csv<T: Scalar, W: Write>(mut out: W, states: &[SwarmState<T>]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for s in states {
        for (i, (a, r)) in s.agents.iter().zip(&s.roles).enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.sample_index,
                i,
                r.as_str(),
                fmt_real(a.position.x),
                fmt_real(a.position.y),
                fmt_real(a.heading),
                fmt_real(a.speed)
            )?;
        }
    }
    Ok(())
}

fn parse_real(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Trajectory(format!("line {line}: bad number {field:?}: {e}")))
}

/// Reads states written by [`write_trajectory_csv`]. Instants must be
/// contiguous from zero and agents listed in order.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<SwarmState<f64>>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != TRAJECTORY_HEADER {
        return Err(Error::Trajectory(format!("unexpected header {header:?}")));
    }
    let mut states: Vec<SwarmState<f64>> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Trajectory(format!("line {lineno}: expected 7 fields, found {}", f.len())));
        }
        let k: usize = f[0].parse().map_err(|_| Error::Trajectory(format!("line {lineno}: bad instant {:?}", f[0])))?;
        let agent: usize = f[1].parse().map_err(|_| Error::Trajectory(format!("line {lineno}: bad agent {:?}", f[1])))?;
        let role = match f[2] {
            "follower" => Role::Follower,
            "leader" => Role::Leader,
            other => return Err(Error::Trajectory(format!("line {lineno}: unknown role {other:?}"))),
        };
        let a = AgentState::new(
            parse_real(f[3], lineno)?,
            parse_real(f[4], lineno)?,
            parse_real(f[5], lineno)?,
            parse_real(f[6], lineno)?,
        );
        if k == states.len() {
            states.push(SwarmState { agents: Vec::new(), roles: Vec::new(), sample_index: k });
        } else if k + 1 != states.len() {
            return Err(Error::Trajectory(format!("line {lineno}: instant {k} out of order")));
        }
        let s = states.last_mut().expect("pushed above");
        if agent != s.agents.len() {
            return Err(Error::Trajectory(format!("line {lineno}: agent {agent} out of order")));
        }
        s.agents.push(a);
        s.roles.push(role);
    }
    if let Some(first) = states.first() {
        if states.iter().any(|s| s.roles != first.roles) {
            return Err(Error::Trajectory("agent count or roles change over time".into()));
        }
    } else {
        return Err(Error::Trajectory("no states".into()));
    }
    Ok(states)
}

pub fn read_trajectory_file(path: &Path) -> Result<Vec<SwarmState<f64>>> {
    read_trajectory_csv(File::open(path)?)
}

/// Parses JSON, naming the offending field on failure.
pub fn from_json_str<D: DeserializeOwned>(text: &str) -> Result<D> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sample_initial, ModelParams};

    #[test]
    fn trajectory_round_trip_is_exact() {
        let p = ModelParams::<f64>::with_leaders(12, 0.25, 0.3, 0.3, 0.01, 0.5);
        let mut s1 = sample_initial(&p, 5);
        s1.sample_index = 1;
        s1.agents[0].heading = -1.0 / 3.0;
        let states = vec![sample_initial(&p, 4), s1];
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &states).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(back, states);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let bad = format!("{TRAJECTORY_HEADER}\n0,0,follower,0.1,0.2,0.3\n");
        assert!(matches!(read_trajectory_csv(bad.as_bytes()), Err(Error::Trajectory(_))));
        let gap = format!("{TRAJECTORY_HEADER}\n0,0,follower,0,0,0,0\n2,0,follower,0,0,0,0\n");
        assert!(read_trajectory_csv(gap.as_bytes()).is_err());
        assert!(read_trajectory_csv("x,y\n".as_bytes()).is_err());
    }

    #[test]
    fn json_error_names_field() {
        let err = from_json_str::<ModelParams<f64>>(r#"{"radius": "wide"}"#).unwrap_err();
        assert!(err.to_string().contains("radius"), "{err}");
        let err = from_json_str::<ModelParams<f64>>(r#"{"raduis": 0.3}"#).unwrap_err();
        assert!(err.to_string().contains("raduis"), "{err}");
    }
}
