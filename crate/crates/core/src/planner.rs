//! Strike primitives and the two-arm minimum-jerk scheduler.
//!
//! Every strike is a start (hover) pose, a contact pose reached exactly at
//! the beat time, and an end pose equal to the start pose. Between strikes
//! an arm transits to the next primitive's hover pose. All pieces are
//! quintic minimum-jerk segments, so joint velocity and acceleration are
//! zero at every segment boundary.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{inverse_kinematics, ArmConfig, IkError, JointState, Joints};
use crate::tab::{BeatEvent, DrumId, DrumTab};
use crate::world::{DrumKit, DrumPad};

/// Tool angle commanded at contact: stick pointing straight down.
pub const STRIKE_TOOL_ANGLE: f64 = -FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmId {
    Left,
    Right,
}

impl ArmId {
    pub const BOTH: [ArmId; 2] = [ArmId::Left, ArmId::Right];

    pub fn index(self) -> usize {
        match self {
            ArmId::Left => 0,
            ArmId::Right => 1,
        }
    }

    pub fn other(self) -> ArmId {
        match self {
            ArmId::Left => ArmId::Right,
            ArmId::Right => ArmId::Left,
        }
    }
}

impl std::fmt::Display for ArmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArmId::Left => "left",
            ArmId::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub stroke_dur_s: f64,
    pub hover_height_m: f64,
    pub min_transit_s: f64,
    pub tail_s: f64,
    /// The strike point sits this far below the pad surface so that the
    /// sampled effector actually crosses it around the beat.
    pub strike_depth_m: f64,
    /// Trajectories are held at their final pose up to at least this time.
    pub min_duration_s: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            stroke_dur_s: 0.12,
            hover_height_m: 0.06,
            min_transit_s: 0.05,
            tail_s: 0.5,
            strike_depth_m: 1.5e-5,
            min_duration_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub drum_id: DrumId,
    pub arm: ArmId,
    pub q_start: Joints,
    pub q_contact: Joints,
    pub q_end: Joints,
    pub stroke_dur_s: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("drum {drum} is out of reach of the {arm} arm: {source}")]
    Unreachable {
        drum: DrumId,
        arm: ArmId,
        source: IkError,
    },
    #[error("time {t} is outside [0, {duration}]")]
    Domain { t: f64, duration: f64 },
    #[error("no arm is free to strike {drum} at {time_s:.4} s")]
    Infeasible { time_s: f64, drum: DrumId },
    #[error("tab starts too early: {drum} at {time_s:.4} s needs at least {min_s:.4} s of lead time")]
    TooEarly { time_s: f64, drum: DrumId, min_s: f64 },
    #[error("drum {0} is not in the kit")]
    UnknownDrum(DrumId),
}

pub fn build_primitive(
    pad: &DrumPad,
    arm_cfg: &ArmConfig,
    arm: ArmId,
    params: &PlannerParams,
) -> Result<MotionPrimitive, PlanError> {
    let strike = [pad.x_center, pad.y_surface - params.strike_depth_m];
    let hover = [strike[0], strike[1] + params.hover_height_m];
    let wrap = |source| PlanError::Unreachable {
        drum: pad.drum_id.clone(),
        arm,
        source,
    };
    let q_contact = inverse_kinematics(strike, STRIKE_TOOL_ANGLE, arm_cfg).map_err(wrap)?;
    let q_start = inverse_kinematics(hover, STRIKE_TOOL_ANGLE, arm_cfg).map_err(wrap)?;
    Ok(MotionPrimitive {
        drum_id: pad.drum_id.clone(),
        arm,
        q_start,
        q_contact,
        q_end: q_start,
        stroke_dur_s: params.stroke_dur_s,
    })
}

/// Quintic minimum-jerk interpolation from `q0` to `q1` over `duration`,
/// evaluated at `t`: position, velocity and acceleration.
pub fn min_jerk<const N: usize>(
    q0: &[f64; N],
    q1: &[f64; N],
    duration: f64,
    t: f64,
) -> Result<([f64; N], [f64; N], [f64; N]), PlanError> {
    if !(duration > 0.0) || !(0.0..=duration).contains(&t) {
        return Err(PlanError::Domain { t, duration });
    }
    let s = t / duration;
    let s2 = s * s;
    let s3 = s2 * s;
    let p = s3 * (10.0 - 15.0 * s + 6.0 * s2);
    let dp = 30.0 * s2 * (1.0 - 2.0 * s + s2) / duration;
    let ddp = 60.0 * s * (1.0 - 3.0 * s + 2.0 * s2) / (duration * duration);
    let mut q = [0.0; N];
    let mut qd = [0.0; N];
    let mut qdd = [0.0; N];
    for i in 0..N {
        let d = q1[i] - q0[i];
        q[i] = q0[i] + d * p;
        qd[i] = d * dp;
        qdd[i] = d * ddp;
    }
    Ok((q, qd, qdd))
}

/// The primitive table for a kit: `table[pad][arm]`, `None` where the arm
/// cannot reach the pad.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveTable {
    pub entries: Vec<[Option<MotionPrimitive>; 2]>,
    /// Arm whose base is nearest in x; ties go to the left arm.
    pub preferred: Vec<ArmId>,
}

impl PrimitiveTable {
    pub fn build(kit: &DrumKit, arms: &[ArmConfig; 2], params: &PlannerParams) -> Self {
        let entries = kit
            .pads
            .iter()
            .map(|pad| ArmId::BOTH.map(|a| build_primitive(pad, &arms[a.index()], a, params).ok()))
            .collect();
        let preferred = kit
            .pads
            .iter()
            .map(|pad| {
                let dl = (pad.x_center - arms[0].base[0]).abs();
                let dr = (pad.x_center - arms[1].base[0]).abs();
                if dr < dl {
                    ArmId::Right
                } else {
                    ArmId::Left
                }
            })
            .collect();
        Self { entries, preferred }
    }

    pub fn get(&self, pad: usize, arm: ArmId) -> Option<&MotionPrimitive> {
        self.entries.get(pad).and_then(|e| e[arm.index()].as_ref())
    }

    /// Every pad reachable by its preferred arm, or the first failure.
    pub fn check_preferred(&self, kit: &DrumKit, arms: &[ArmConfig; 2], params: &PlannerParams) -> Result<(), PlanError> {
        for (i, pad) in kit.pads.iter().enumerate() {
            let arm = self.preferred[i];
            build_primitive(pad, &arms[arm.index()], arm, params)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub event: BeatEvent,
    pub pad: usize,
    pub arm: ArmId,
}

/// Greedy arm assignment in beat order. An arm is free for a strike at `t`
/// when its previous engagement ended (previous beat + stroke) at least
/// `min_transit` before the down-stroke starts at `t - stroke`.
pub fn assign_arms(tab: &DrumTab, kit: &DrumKit, table: &PrimitiveTable, params: &PlannerParams) -> Result<Vec<Assignment>, PlanError> {
    let lead = params.stroke_dur_s + params.min_transit_s;
    let mut free_at = [0.0_f64; 2];
    let mut out = Vec::with_capacity(tab.events.len());
    for e in &tab.events {
        let pad = kit
            .pad_index(&e.drum_id)
            .ok_or_else(|| PlanError::UnknownDrum(e.drum_id.clone()))?;
        if e.time_s < lead - 1e-12 {
            return Err(PlanError::TooEarly {
                time_s: e.time_s,
                drum: e.drum_id.clone(),
                min_s: lead,
            });
        }
        let preferred = table.preferred[pad];
        let chosen = [preferred, preferred.other()].into_iter().find(|&arm| {
            table.get(pad, arm).is_some()
                && e.time_s - params.stroke_dur_s >= free_at[arm.index()] + params.min_transit_s - 1e-12
        });
        let Some(arm) = chosen else {
            return Err(PlanError::Infeasible {
                time_s: e.time_s,
                drum: e.drum_id.clone(),
            });
        };
        free_at[arm.index()] = e.time_s + params.stroke_dur_s;
        out.push(Assignment {
            event: e.clone(),
            pad,
            arm,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Hold,
    Transit,
    Down,
    Up,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub q0: Joints,
    pub q1: Joints,
    pub arm: ArmId,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn eval(&self, t: f64) -> JointState {
        if self.kind == SegmentKind::Hold || self.t1 <= self.t0 {
            return JointState::at_rest(self.q0);
        }
        let dur = self.t1 - self.t0;
        let local = (t - self.t0).clamp(0.0, dur);
        let (q, qd, qdd) = min_jerk(&self.q0, &self.q1, dur, local).expect("local time clamped into segment");
        JointState { q, qd, qdd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Per-arm segment lists, each contiguous over `[0, duration_s]`.
    pub arms: [Vec<Segment>; 2],
    pub duration_s: f64,
}

impl Trajectory {
    /// Both arms held still for the whole duration.
    pub fn hold(rest: [Joints; 2], duration_s: f64) -> Self {
        let arms = ArmId::BOTH.map(|a| {
            vec![Segment {
                t0: 0.0,
                t1: duration_s,
                q0: rest[a.index()],
                q1: rest[a.index()],
                arm: a,
                kind: SegmentKind::Hold,
            }]
        });
        Self { arms, duration_s }
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.arms.iter().flatten()
    }

    /// Samples one arm at `t`. A time on a boundary belongs to the later
    /// segment.
    pub fn sample(&self, t: f64, arm: ArmId) -> Result<JointState, PlanError> {
        if !(0.0..=self.duration_s).contains(&t) {
            return Err(PlanError::Domain {
                t,
                duration: self.duration_s,
            });
        }
        let segs = &self.arms[arm.index()];
        let idx = segs.partition_point(|s| s.t0 <= t).saturating_sub(1);
        Ok(segs[idx].eval(t))
    }
}

/// Compiles a validated tab into a two-arm trajectory whose contact poses
/// land exactly on the beat times.
pub fn schedule(
    tab: &DrumTab,
    kit: &DrumKit,
    arms: &[ArmConfig; 2],
    rest: [Joints; 2],
    params: &PlannerParams,
) -> Result<(Trajectory, Vec<Assignment>), PlanError> {
    let table = PrimitiveTable::build(kit, arms, params);
    let assignments = assign_arms(tab, kit, &table, params)?;
    let last_beat = assignments.iter().map(|a| a.event.time_s).fold(0.0, f64::max);
    let duration_s = (last_beat + params.stroke_dur_s + params.tail_s).max(params.min_duration_s);

    let mut per_arm: [Vec<Segment>; 2] = [Vec::new(), Vec::new()];
    for arm in ArmId::BOTH {
        let segs = &mut per_arm[arm.index()];
        let mut t_cur = 0.0;
        let mut q_cur = rest[arm.index()];
        let push = |segs: &mut Vec<Segment>, t0: f64, t1: f64, q0: Joints, q1: Joints, kind| {
            let kind = if kind == SegmentKind::Transit && q0 == q1 {
                SegmentKind::Hold
            } else {
                kind
            };
            segs.push(Segment { t0, t1, q0, q1, arm, kind });
        };
        for a in assignments.iter().filter(|a| a.arm == arm) {
            let prim = table.get(a.pad, arm).expect("assigned arms reach their pads");
            let beat = a.event.time_s;
            let t_start = beat - prim.stroke_dur_s;
            if t_start > t_cur {
                push(segs, t_cur, t_start, q_cur, prim.q_start, SegmentKind::Transit);
            }
            push(segs, t_start, beat, prim.q_start, prim.q_contact, SegmentKind::Down);
            push(segs, beat, beat + prim.stroke_dur_s, prim.q_contact, prim.q_end, SegmentKind::Up);
            t_cur = beat + prim.stroke_dur_s;
            q_cur = prim.q_end;
        }
        if t_cur < duration_s || segs.is_empty() {
            push(segs, t_cur, duration_s, q_cur, q_cur, SegmentKind::Hold);
        }
    }
    Ok((
        Trajectory {
            arms: per_arm,
            duration_s,
        },
        assignments,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::forward_kinematics;
    use crate::arm::Handedness;
    use crate::tab::parse_tab;

    fn arms() -> [ArmConfig; 2] {
        [
            ArmConfig::default_for(Handedness::Left),
            ArmConfig::default_for(Handedness::Right),
        ]
    }

    fn rest() -> [Joints; 2] {
        let a = arms();
        [
            inverse_kinematics([-0.3, 0.6], STRIKE_TOOL_ANGLE, &a[0]).unwrap(),
            inverse_kinematics([0.3, 0.6], STRIKE_TOOL_ANGLE, &a[1]).unwrap(),
        ]
    }

    #[test]
    fn primitive_hover_is_above_contact() {
        let kit = DrumKit::default();
        let params = PlannerParams::default();
        let a = arms();
        let table = PrimitiveTable::build(&kit, &a, &params);
        table.check_preferred(&kit, &a, &params).unwrap();
        for (i, pad) in kit.pads.iter().enumerate() {
            let arm = table.preferred[i];
            let p = table.get(i, arm).unwrap();
            assert_eq!(p.q_end, p.q_start);
            let cfg = &a[arm.index()];
            let dy = forward_kinematics(&p.q_start, cfg).y - forward_kinematics(&p.q_contact, cfg).y;
            assert!((dy - params.hover_height_m).abs() < 1e-9);
            let contact = forward_kinematics(&p.q_contact, cfg);
            assert!((contact.x - pad.x_center).abs() < 1e-9);
            assert!((contact.y - (pad.y_surface - params.strike_depth_m)).abs() < 1e-9);
        }
        assert_eq!(table.preferred, vec![ArmId::Left, ArmId::Left, ArmId::Right]);
    }

    #[test]
    fn far_pad_is_unreachable() {
        let mut pad = DrumKit::default().pads[0].clone();
        pad.x_center = 5.0;
        let err = build_primitive(&pad, &arms()[0], ArmId::Left, &PlannerParams::default()).unwrap_err();
        assert!(matches!(err, PlanError::Unreachable { arm: ArmId::Left, .. }));
    }

    #[test]
    fn min_jerk_boundaries_and_midpoint() {
        let q0 = [0.0, 1.0, -2.0];
        let q1 = [1.0, -1.0, 2.0];
        let t = 0.4;
        let (q, qd, qdd) = min_jerk(&q0, &q1, t, 0.0).unwrap();
        assert_eq!((q, qd, qdd), (q0, [0.0; 3], [0.0; 3]));
        let (q, qd, qdd) = min_jerk(&q0, &q1, t, t).unwrap();
        assert_eq!(q, q1);
        assert!(qd.iter().chain(&qdd).all(|v| v.abs() < 1e-12));
        let (q, qd, _) = min_jerk(&q0, &q1, t, t / 2.0).unwrap();
        for i in 0..3 {
            assert!((q[i] - 0.5 * (q0[i] + q1[i])).abs() < 1e-15);
            assert!((qd[i] - 15.0 / 8.0 * (q1[i] - q0[i]) / t).abs() < 1e-12);
        }
        assert!(min_jerk(&q0, &q1, t, t + 1e-9).is_err());
        assert!(min_jerk(&q0, &q1, t, -1e-9).is_err());
        assert!(min_jerk(&q0, &q1, 0.0, 0.0).is_err());
    }

    #[test]
    fn single_beat_keeps_preferred_arm() {
        let kit = DrumKit::default();
        let params = PlannerParams::default();
        let table = PrimitiveTable::build(&kit, &arms(), &params);
        let tab = parse_tab("offset: 1\nSN|x|").unwrap();
        let a = assign_arms(&tab, &kit, &table, &params).unwrap();
        assert_eq!(a[0].arm, ArmId::Left);
    }

    #[test]
    fn spaced_repeats_stay_on_one_arm_close_ones_alternate() {
        let kit = DrumKit::default();
        let params = PlannerParams::default();
        let table = PrimitiveTable::build(&kit, &arms(), &params);
        // gap 0.5 > 2 * 0.12 + 0.05
        let tab = parse_tab("tempo: 120\ndiv: 1\noffset: 1\nSN|xx|").unwrap();
        let a = assign_arms(&tab, &kit, &table, &params).unwrap();
        assert_eq!(a[0].arm, a[1].arm);
        // gap 0.2 < 2 * 0.12
        let tab = parse_tab("tempo: 75\ndiv: 4\noffset: 1\nSN|xx|").unwrap();
        let a = assign_arms(&tab, &kit, &table, &params).unwrap();
        assert_eq!((a[0].arm, a[1].arm), (ArmId::Left, ArmId::Right));
    }

    #[test]
    fn unreachable_alternate_is_infeasible() {
        let kit = DrumKit::default();
        let params = PlannerParams::default();
        let table = PrimitiveTable::build(&kit, &arms(), &params);
        let tab = parse_tab("tempo: 75\ndiv: 4\noffset: 1\nHH|xx|").unwrap();
        let err = assign_arms(&tab, &kit, &table, &params).unwrap_err();
        assert!(matches!(err, PlanError::Infeasible { ref drum, .. } if drum.as_str() == "HH"), "{err}");
    }

    #[test]
    fn early_tab_is_rejected() {
        let kit = DrumKit::default();
        let params = PlannerParams::default();
        let tab = parse_tab("SN|x|").unwrap();
        let err = schedule(&tab, &kit, &arms(), rest(), &params).unwrap_err();
        assert!(matches!(err, PlanError::TooEarly { .. }));
    }

    #[test]
    fn one_beat_down_stroke_window() {
        let kit = DrumKit::default();
        let params = PlannerParams::default();
        let tab = parse_tab("tempo: 60\ndiv: 1\nSN|-x|").unwrap();
        let (traj, assignments) = schedule(&tab, &kit, &arms(), rest(), &params).unwrap();
        let arm = assignments[0].arm;
        let down = traj.arms[arm.index()]
            .iter()
            .find(|s| s.kind == SegmentKind::Down)
            .unwrap();
        assert!((down.t0 - 0.88).abs() < 1e-12 && down.t1 == 1.0);
        let table = PrimitiveTable::build(&kit, &arms(), &params);
        let prim = table.get(1, arm).unwrap();
        assert_eq!(down.q1, prim.q_contact);
        assert_eq!(traj.sample(1.0, arm).unwrap().q, prim.q_contact);
        assert!((traj.duration_s - (1.0 + 0.12 + 0.5)).abs() < 1e-12);
        // The other arm only holds.
        let other = &traj.arms[arm.other().index()];
        assert_eq!(other.len(), 1);
        let st = traj.sample(0.3, arm.other()).unwrap();
        assert_eq!((st.qd, st.qdd), ([0.0; 3], [0.0; 3]));
    }

    #[test]
    fn sampling_out_of_range_fails() {
        let traj = Trajectory::hold(rest(), 1.0);
        assert!(traj.sample(1.0, ArmId::Left).is_ok());
        assert!(traj.sample(1.0 + 1e-9, ArmId::Left).is_err());
        assert!(traj.sample(-1e-9, ArmId::Right).is_err());
    }

    #[test]
    fn min_duration_extends_final_hold() {
        let kit = DrumKit::default();
        let params = PlannerParams {
            min_duration_s: 3.0,
            ..PlannerParams::default()
        };
        let tab = parse_tab("offset: 0.5\nTM|x|").unwrap();
        let (traj, _) = schedule(&tab, &kit, &arms(), rest(), &params).unwrap();
        assert_eq!(traj.duration_s, 3.0);
        for segs in &traj.arms {
            assert_eq!(segs.last().unwrap().t1, 3.0);
        }
    }
}
