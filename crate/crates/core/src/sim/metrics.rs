//! Per-tick metrics, their CSV form and the run summary.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::kinematics::Side;
use crate::qp::QpStatus;

pub const SLACK_COLUMNS: [&str; 12] = [
    "slack_pp_x", "slack_pp_y", "slack_pp_z", "slack_po_x", "slack_po_y", "slack_po_z",
    "slack_sp_x", "slack_sp_y", "slack_sp_z", "slack_so_x", "slack_so_y", "slack_so_z",
];

/// Inter-arm distance below which a tick counts as a proximity episode.
pub const PROXIMITY_EPISODE_DISTANCE: f64 = 0.06;

/// Relative tolerance of the unimodality test, as a fraction of the peak.
pub const UNIMODAL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Not controlled or nothing scheduled.
    Idle,
    /// Moving to a discrete target.
    Reach,
    /// Target reached, waiting before the next one.
    Dwell,
    /// Script finished; the last target is held.
    Hold,
    /// Moving to the first point of a streamed reference.
    LeadIn,
    /// Following a streamed reference.
    Track,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Reach => "reach",
            Phase::Dwell => "dwell",
            Phase::Hold => "hold",
            Phase::LeadIn => "lead_in",
            Phase::Track => "track",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        Ok(match s {
            "idle" => Phase::Idle,
            "reach" => Phase::Reach,
            "dwell" => Phase::Dwell,
            "hold" => Phase::Hold,
            "lead_in" => Phase::LeadIn,
            "track" => Phase::Track,
            other => return Err(SimError::Csv(format!("unknown phase {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmMetrics {
    pub position: [f64; 3],
    /// Axis-angle vector.
    pub orientation: [f64; 3],
    pub phase: Phase,
    /// Index of the commanded target within this arm's list, -1 if none.
    pub target: i64,
    /// Distance to the commanded goal (or streamed reference), NaN when idle.
    pub position_error: f64,
    pub orientation_error: f64,
    /// Set on the first tick the current target is within tolerance.
    pub reached: bool,
    /// Linear end-effector speed under the applied joint velocity.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickMetrics {
    pub tick: u64,
    pub time: f64,
    /// Indexed by `Side::index`.
    pub arms: [ArmMetrics; 2],
    /// Robot surface to the nearest scripted moving obstacle; +inf if none.
    pub min_obstacle_distance: f64,
    /// Closest approach of the two arms' surface samples.
    pub inter_arm_distance: f64,
    pub status: QpStatus,
    pub first_status: QpStatus,
    pub fallback: bool,
    pub frozen: bool,
    pub mu: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub obstacle_violation: f64,
    pub q: Vec<f64>,
    pub q_dot: Vec<f64>,
    /// Slack values in `SLACK_COLUMNS` order, NaN where absent.
    pub slack: [f64; 12],
    /// `source/part/tag/threat` for every collision point, `;`-separated.
    pub collisions: String,
}

const ARM_FIELDS: [&str; 12] =
    ["x", "y", "z", "rx", "ry", "rz", "phase", "target", "pos_err", "ori_err", "reached", "speed"];

/// Column names for a model with `dof` joints.
pub fn header(dof: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["tick".into(), "time".into()];
    for side in Side::BOTH {
        h.extend(ARM_FIELDS.iter().map(|f| format!("{side}_{f}")));
    }
    for c in [
        "min_obstacle_distance", "inter_arm_distance", "status", "first_status", "fallback", "frozen", "mu",
        "iterations", "kkt_residual", "obstacle_violation",
    ] {
        h.push(c.into());
    }
    h.extend((0..dof).map(|i| format!("q_{i}")));
    h.extend((0..dof).map(|i| format!("qd_{i}")));
    h.extend(SLACK_COLUMNS.iter().map(|s| s.to_string()));
    h.push("collisions".into());
    h
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

impl TickMetrics {
    fn record(&self) -> Vec<String> {
        let mut r = vec![self.tick.to_string(), self.time.to_string()];
        for a in &self.arms {
            r.extend(a.position.iter().chain(&a.orientation).map(f64::to_string));
            r.push(a.phase.to_string());
            r.push(a.target.to_string());
            r.push(a.position_error.to_string());
            r.push(a.orientation_error.to_string());
            r.push(flag(a.reached));
            r.push(a.speed.to_string());
        }
        r.push(self.min_obstacle_distance.to_string());
        r.push(self.inter_arm_distance.to_string());
        r.push(self.status.name().into());
        r.push(self.first_status.name().into());
        r.push(flag(self.fallback));
        r.push(flag(self.frozen));
        r.push(self.mu.to_string());
        r.push(self.iterations.to_string());
        r.push(self.kkt_residual.to_string());
        r.push(self.obstacle_violation.to_string());
        r.extend(self.q.iter().chain(&self.q_dot).chain(&self.slack).map(f64::to_string));
        r.push(self.collisions.clone());
        r
    }
}

/// Writes the header and one row per tick. Floats use the shortest
/// representation that reads back to the same bits.
pub fn write_csv<W: Write>(out: W, ticks: &[TickMetrics]) -> Result<(), SimError> {
    let dof = ticks.first().map_or(0, |t| t.q.len());
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| SimError::Csv(e.to_string());
    w.write_record(header(dof)).map_err(csv_err)?;
    for t in ticks {
        if t.q.len() != dof || t.q_dot.len() != dof {
            return Err(SimError::Csv("joint count changes between ticks".into()));
        }
        w.write_record(t.record()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| SimError::Csv(e.to_string()))
}

fn parse_status(s: &str) -> Result<QpStatus, SimError> {
    Ok(match s {
        "optimal" => QpStatus::Optimal,
        "infeasible" => QpStatus::Infeasible,
        "max_iter" => QpStatus::MaxIter,
        other => return Err(SimError::Csv(format!("unknown status {other:?}"))),
    })
}

struct Fields<'a> {
    rec: &'a csv::StringRecord,
    at: usize,
    line: u64,
}

impl Fields<'_> {
    fn text(&mut self) -> Result<&str, SimError> {
        let s = self.rec.get(self.at).ok_or_else(|| SimError::Csv(format!("line {}: too few fields", self.line)))?;
        self.at += 1;
        Ok(s)
    }

    fn parse<T: FromStr>(&mut self) -> Result<T, SimError> {
        let line = self.line;
        let s = self.text()?;
        s.parse().map_err(|_| SimError::Csv(format!("line {line}: cannot parse {s:?}")))
    }

    fn flag(&mut self) -> Result<bool, SimError> {
        Ok(self.parse::<u8>()? != 0)
    }
}

/// Reads a metrics CSV written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<TickMetrics>, SimError> {
    let mut r = csv::Reader::from_reader(input);
    let head = r.headers().map_err(|e| SimError::Csv(e.to_string()))?.clone();
    let dof = head.iter().filter(|h| h.starts_with("q_")).count();
    if head.iter().collect::<Vec<_>>() != header(dof) {
        return Err(SimError::Csv("header does not match the metrics schema".into()));
    }
    let mut ticks = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| SimError::Csv(e.to_string()))?;
        let mut f = Fields { rec: &rec, at: 0, line: i as u64 + 2 };
        let tick = f.parse()?;
        let time = f.parse()?;
        let mut arms = Vec::with_capacity(2);
        for _ in 0..2 {
            arms.push(ArmMetrics {
                position: [f.parse()?, f.parse()?, f.parse()?],
                orientation: [f.parse()?, f.parse()?, f.parse()?],
                phase: f.text()?.parse()?,
                target: f.parse()?,
                position_error: f.parse()?,
                orientation_error: f.parse()?,
                reached: f.flag()?,
                speed: f.parse()?,
            });
        }
        let right = arms.pop().expect("two arms");
        let left = arms.pop().expect("two arms");
        let mut t = TickMetrics {
            tick,
            time,
            arms: [left, right],
            min_obstacle_distance: f.parse()?,
            inter_arm_distance: f.parse()?,
            status: parse_status(f.text()?)?,
            first_status: parse_status(f.text()?)?,
            fallback: f.flag()?,
            frozen: f.flag()?,
            mu: f.parse()?,
            iterations: f.parse()?,
            kkt_residual: f.parse()?,
            obstacle_violation: f.parse()?,
            q: Vec::with_capacity(dof),
            q_dot: Vec::with_capacity(dof),
            slack: [f64::NAN; 12],
            collisions: String::new(),
        };
        for _ in 0..dof {
            t.q.push(f.parse()?);
        }
        for _ in 0..dof {
            t.q_dot.push(f.parse()?);
        }
        for s in t.slack.iter_mut() {
            *s = f.parse()?;
        }
        t.collisions = f.text()?.to_string();
        ticks.push(t);
    }
    Ok(ticks)
}

/// Speed profile of one discrete reach, from the tick the target became
/// active to the tick the next one did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachSegment {
    pub arm: Side,
    pub target: i64,
    pub reached: bool,
    /// Seconds from activation to the first in-tolerance tick.
    pub time_to_reach: f64,
    pub peak_speed: f64,
    pub start_speed_ratio: f64,
    pub end_speed_ratio: f64,
    pub unimodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub ticks: u64,
    pub duration: f64,
    pub targets_total: usize,
    pub targets_reached: usize,
    /// Reached over total, 1 when no discrete target was scheduled.
    pub reach_rate: f64,
    /// Over all `track` ticks; NaN when nothing was streamed.
    pub tracking_position_error_median: f64,
    pub tracking_position_error_mean: f64,
    pub tracking_orientation_error_median: f64,
    pub tracking_orientation_error_mean: f64,
    /// Primary-arm tracking error on ticks with the arms closer than
    /// `PROXIMITY_EPISODE_DISTANCE`, and on the other tracking ticks.
    pub proximity_ticks: u64,
    pub primary_error_median_in_proximity: f64,
    pub primary_error_median_outside_proximity: f64,
    /// Ticks whose final QP status was optimal, over all ticks.
    pub solver_success_fraction: f64,
    /// Ticks solved without relaxing the primary position task.
    pub first_solve_success_fraction: f64,
    pub fallback_ticks: u64,
    pub frozen_ticks: u64,
    pub min_obstacle_distance: f64,
    pub min_inter_arm_distance: f64,
    pub peak_speed: f64,
    /// True when every reach segment's speed profile is unimodal.
    pub speed_profile_unimodal: bool,
    pub max_start_speed_ratio: f64,
    pub max_end_speed_ratio: f64,
    pub segments: Vec<ReachSegment>,
}

impl Summary {
    pub fn to_toml_string(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Rises to its maximum and falls after it, ignoring wiggles smaller than
/// `tolerance * peak`.
pub fn is_unimodal(speeds: &[f64], tolerance: f64) -> bool {
    let Some((peak_at, peak)) = speeds.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)) else {
        return true;
    };
    let slack = tolerance * peak;
    let rising = speeds[..=peak_at].windows(2).all(|w| w[1] >= w[0] - slack);
    let falling = speeds[peak_at..].windows(2).all(|w| w[1] <= w[0] + slack);
    rising && falling
}

fn segments(ticks: &[TickMetrics], period: f64) -> Vec<ReachSegment> {
    let mut out = Vec::new();
    for side in Side::BOTH {
        let mut start = 0;
        while start < ticks.len() {
            let arm = |k: usize| &ticks[k].arms[side.index()];
            let phase = arm(start).phase;
            if !matches!(phase, Phase::Reach) {
                start += 1;
                continue;
            }
            let target = arm(start).target;
            let mut end = start;
            while end + 1 < ticks.len()
                && arm(end + 1).target == target
                && matches!(arm(end + 1).phase, Phase::Reach | Phase::Dwell | Phase::Hold)
            {
                end += 1;
            }
            let speeds: Vec<f64> = (start..=end).map(|k| arm(k).speed).collect();
            let peak = speeds.iter().copied().fold(0.0, f64::max);
            let reached_at = (start..=end).find(|&k| arm(k).reached);
            let ratio = |s: f64| if peak > 0.0 { s / peak } else { 0.0 };
            out.push(ReachSegment {
                arm: side,
                target,
                reached: reached_at.is_some(),
                time_to_reach: reached_at.map_or(f64::NAN, |k| (k - start) as f64 * period),
                peak_speed: peak,
                start_speed_ratio: ratio(speeds[0]),
                end_speed_ratio: ratio(speeds[speeds.len() - 1]),
                unimodal: is_unimodal(&speeds, UNIMODAL_TOLERANCE),
            });
            start = end + 1;
        }
    }
    out
}

/// Aggregates a metrics stream. `primary` names the arm whose tracking error
/// is split by proximity episodes.
pub fn summarize(ticks: &[TickMetrics], primary: Side) -> Result<Summary, SimError> {
    let (first, last) = match (ticks.first(), ticks.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(SimError::EmptyStream),
    };
    let period = if ticks.len() > 1 { (last.time - first.time) / (ticks.len() - 1) as f64 } else { 0.0 };
    let n = ticks.len() as f64;
    let segments = segments(ticks, period);
    let targets_total = segments.len();
    let targets_reached = segments.iter().filter(|s| s.reached).count();

    let mut pos = Vec::new();
    let mut ori = Vec::new();
    let mut near = Vec::new();
    let mut far = Vec::new();
    for t in ticks {
        for (i, a) in t.arms.iter().enumerate() {
            if a.phase != Phase::Track {
                continue;
            }
            pos.push(a.position_error);
            ori.push(a.orientation_error);
            if i == primary.index() {
                if t.inter_arm_distance < PROXIMITY_EPISODE_DISTANCE {
                    near.push(a.position_error);
                } else {
                    far.push(a.position_error);
                }
            }
        }
    }
    let count = |f: &dyn Fn(&TickMetrics) -> bool| ticks.iter().filter(|t| f(t)).count();
    let min_of = |f: &dyn Fn(&TickMetrics) -> f64| ticks.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(Summary {
        ticks: ticks.len() as u64,
        duration: ticks.len() as f64 * period,
        targets_total,
        targets_reached,
        reach_rate: if targets_total == 0 { 1.0 } else { targets_reached as f64 / targets_total as f64 },
        tracking_position_error_median: median(pos.clone()),
        tracking_position_error_mean: mean(&pos),
        tracking_orientation_error_median: median(ori.clone()),
        tracking_orientation_error_mean: mean(&ori),
        proximity_ticks: near.len() as u64,
        primary_error_median_in_proximity: median(near),
        primary_error_median_outside_proximity: median(far),
        solver_success_fraction: count(&|t| t.status == QpStatus::Optimal && !t.frozen) as f64 / n,
        first_solve_success_fraction: count(&|t| t.first_status == QpStatus::Optimal) as f64 / n,
        fallback_ticks: count(&|t| t.fallback) as u64,
        frozen_ticks: count(&|t| t.frozen) as u64,
        min_obstacle_distance: min_of(&|t| t.min_obstacle_distance),
        min_inter_arm_distance: min_of(&|t| t.inter_arm_distance),
        peak_speed: ticks.iter().flat_map(|t| t.arms.iter().map(|a| a.speed)).fold(0.0, f64::max),
        speed_profile_unimodal: segments.iter().all(|s| s.unimodal),
        max_start_speed_ratio: segments.iter().map(|s| s.start_speed_ratio).fold(0.0, f64::max),
        max_end_speed_ratio: segments.iter().map(|s| s.end_speed_ratio).fold(0.0, f64::max),
        segments,
    })
}
