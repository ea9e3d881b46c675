//! Plain-text trajectory export: `t,q1..qN,qd1..qdN,qdd1..qdd N` per row.

use std::fmt::Write as _;

use super::HalfStepTrajectory;
use crate::error::{GaitError, Result};
use crate::kinematics::Side;
use crate::model::Configuration;

fn header(dof: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for prefix in ["q", "qd", "qdd"] {
        cols.extend((1..=dof).map(|j| format!("{prefix}{j}")));
    }
    cols.join(",")
}

pub fn write_trajectory_csv(traj: &HalfStepTrajectory) -> String {
    let dof = traj.dof();
    let mut out = header(dof);
    out.push('\n');
    for (i, s) in traj.samples.iter().enumerate() {
        let _ = write!(out, "{:.17e}", traj.time(i));
        for v in s.q.iter().chain(&s.qd).chain(&s.qdd) {
            let _ = write!(out, ",{v:.17e}");
        }
        out.push('\n');
    }
    out
}

/// Parses the output of [`write_trajectory_csv`]. Times must be uniform.
pub fn read_trajectory_csv(text: &str, stance_side: Side) -> Result<HalfStepTrajectory> {
    let bad = |line: usize, msg: &str| GaitError::Trajectory(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let ncols = head.split(',').count();
    if ncols < 4 || (ncols - 1) % 3 != 0 {
        return Err(bad(1, "header must be t followed by 3*dof columns"));
    }
    let dof = (ncols - 1) / 3;
    if head.trim() != header(dof) {
        return Err(bad(1, "unexpected column names"));
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (n, line) in lines {
        let values: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(n + 1, &e.to_string()))?;
        if values.len() != ncols {
            return Err(bad(n + 1, &format!("{} columns, expected {ncols}", values.len())));
        }
        times.push(values[0]);
        samples.push(Configuration {
            q: values[1..=dof].to_vec(),
            qd: values[dof + 1..=2 * dof].to_vec(),
            qdd: values[2 * dof + 1..].to_vec(),
        });
    }
    if samples.len() < 2 {
        return Err(bad(1, "need at least two samples"));
    }
    let n_int = samples.len() - 1;
    let duration = times[n_int] - times[0];
    let dt = duration / n_int as f64;
    for (i, t) in times.iter().enumerate() {
        if ((t - times[0]) - i as f64 * dt).abs() > 1e-9 * duration.max(1.0) {
            return Err(bad(i + 2, "non-uniform time step"));
        }
    }
    let traj = HalfStepTrajectory {
        samples,
        dt,
        duration,
        stance_side,
        n_int,
    };
    traj.check()?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_traj() -> HalfStepTrajectory {
        let samples = (0..=10)
            .map(|i| {
                let x = i as f64 * 0.1;
                Configuration {
                    q: vec![x, -x, 1.0 / 3.0],
                    qd: vec![1.0, -1.0, 0.0],
                    qdd: vec![0.0, 0.0, std::f64::consts::PI],
                }
            })
            .collect();
        HalfStepTrajectory {
            samples,
            dt: 0.05,
            duration: 0.5,
            stance_side: Side::Right,
            n_int: 10,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let t = sample_traj();
        let text = write_trajectory_csv(&t);
        assert!(text.starts_with("t,q1,q2,q3,qd1,qd2,qd3,qdd1,qdd2,qdd3\n"));
        let back = read_trajectory_csv(&text, Side::Right).unwrap();
        assert_eq!(back.samples, t.samples);
        assert!((back.duration - 0.5).abs() < 1e-15);
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = write_trajectory_csv(&sample_traj()).replacen("1.00000000000000000e0", "abc", 1);
        let err = read_trajectory_csv(&text, Side::Right).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
