use crate::geometry::{wrap_angle, Pose, Vec3};
use crate::taskgen::Task;

use super::atsp::{CostMatrix, Tour, UNREACHABLE};

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionSequence {
    pub tasks: Vec<Task>,
    /// Views along the connecting paths, starting at the agent pose.
    pub poses: Vec<Pose>,
    pub cumulative_length: f64,
}

/// Number of leading legs to execute: the longest prefix whose cumulative
/// cost stays within `l_exec`, at least one, never crossing an unreachable leg.
pub fn prefix_len(leg_costs: &[f64], l_exec: f64) -> usize {
    let mut total = 0.0;
    let mut n = 0;
    for &c in leg_costs {
        if c >= UNREACHABLE {
            break;
        }
        total += c;
        if total > l_exec && n > 0 {
            break;
        }
        n += 1;
    }
    n
}

/// Point at arc length `s` along a polyline.
fn point_at(points: &[Vec3], s: f64) -> Vec3 {
    let mut left = s;
    for w in points.windows(2) {
        let seg = (w[1] - w[0]).norm();
        if left <= seg && seg > 0.0 {
            return w[0] + (w[1] - w[0]) * (left / seg);
        }
        left -= seg;
    }
    *points.last().expect("non-empty polyline")
}

/// Poses every at most `l_res` along `points`, both ends included. The
/// orientation blends from `from` to `to`, yaw along the shorter arc.
pub fn sample_leg(points: &[Vec3], from: &Pose, to: &Pose, l_res: f64) -> Vec<Pose> {
    let len: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let n = ((len / l_res) - 1e-9).ceil().max(1.0) as usize;
    let dyaw = wrap_angle(to.yaw - from.yaw);
    (0..=n)
        .map(|k| {
            if k == n {
                return *to;
            }
            let f = k as f64 / n as f64;
            Pose::new(
                point_at(points, len * f),
                from.pitch + (to.pitch - from.pitch) * f,
                from.yaw + dyaw * f,
            )
        })
        .collect()
}

/// Truncates the tour and samples every executed leg.
pub fn build_execution(
    agent: &Pose,
    tasks: &[Task],
    tour: &Tour,
    matrix: &CostMatrix,
    l_exec: f64,
    l_res: f64,
) -> ExecutionSequence {
    let k = prefix_len(&tour.leg_costs, l_exec);
    let mut seq = ExecutionSequence {
        tasks: Vec::with_capacity(k),
        poses: vec![*agent],
        cumulative_length: 0.0,
    };
    let mut prev_node = 0;
    let mut prev_pose = *agent;
    for (&t, &c) in tour.order.iter().zip(&tour.leg_costs).take(k) {
        let node = t + 1;
        let path = matrix.paths[prev_node][node]
            .clone()
            .unwrap_or_else(|| vec![prev_pose.position, tasks[t].view.position]);
        let leg = sample_leg(&path, &prev_pose, &tasks[t].view, l_res);
        seq.poses.extend(leg.into_iter().skip(1));
        seq.tasks.push(tasks[t]);
        seq.cumulative_length += c;
        prev_node = node;
        prev_pose = tasks[t].view;
    }
    seq
}
