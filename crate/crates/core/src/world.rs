//! Side-view drum world: pads, edge-triggered contact detection and the
//! frame/substep simulation loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{forward_kinematics, ArmConfig, JointState};
use crate::audio::TimbreSpec;
use crate::planner::{ArmId, PlanError, Trajectory};
use crate::tab::DrumId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrumPad {
    pub drum_id: DrumId,
    pub x_center: f64,
    pub y_surface: f64,
    pub half_width: f64,
    pub timbre: TimbreSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrumKit {
    pub pads: Vec<DrumPad>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KitError {
    #[error("drum {0} appears twice in the kit")]
    DuplicateDrum(DrumId),
    #[error("pad {0} has a non-positive half width")]
    BadWidth(DrumId),
    #[error("pads {0} and {1} overlap")]
    Overlap(DrumId, DrumId),
    #[error("a kit holds at most 8 pads, got {0}")]
    TooManyPads(usize),
    #[error("pad {0}: {1}")]
    BadTimbre(DrumId, String),
}

impl Default for DrumKit {
    fn default() -> Self {
        let pad = |name: &str, x: f64, timbre: TimbreSpec| DrumPad {
            drum_id: DrumId::from(name),
            x_center: x,
            y_surface: 0.35,
            half_width: 0.12,
            timbre,
        };
        Self {
            pads: vec![
                pad("HH", -0.45, TimbreSpec::hipass_noise(0.03, 0.6)),
                pad("SN", 0.0, TimbreSpec::noise(0.08, 0.8)),
                pad("TM", 0.45, TimbreSpec::tone(110.0, 0.25, 0.9)),
            ],
        }
    }
}

impl DrumKit {
    pub fn pad_index(&self, drum: &DrumId) -> Option<usize> {
        self.pads.iter().position(|p| &p.drum_id == drum)
    }

    pub fn pad(&self, drum: &DrumId) -> Option<&DrumPad> {
        self.pads.iter().find(|p| &p.drum_id == drum)
    }

    pub fn drum_ids(&self) -> Vec<DrumId> {
        self.pads.iter().map(|p| p.drum_id.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), KitError> {
        if self.pads.len() > 8 {
            return Err(KitError::TooManyPads(self.pads.len()));
        }
        for (i, a) in self.pads.iter().enumerate() {
            if !(a.half_width > 0.0) {
                return Err(KitError::BadWidth(a.drum_id.clone()));
            }
            a.timbre
                .validate()
                .map_err(|e| KitError::BadTimbre(a.drum_id.clone(), e))?;
            for b in &self.pads[i + 1..] {
                if a.drum_id == b.drum_id {
                    return Err(KitError::DuplicateDrum(a.drum_id.clone()));
                }
                if a.y_surface == b.y_surface
                    && (a.x_center - b.x_center).abs() < a.half_width + b.half_width
                {
                    return Err(KitError::Overlap(a.drum_id.clone(), b.drum_id.clone()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub time_s: f64,
    pub drum_id: DrumId,
    pub arm: ArmId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldFrame {
    pub t: f64,
    pub states: [JointState; 2],
    /// One flag per kit pad: a contact happened in `[t, t + 1/frame_rate)`.
    pub contacts: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub frame_rate: f64,
    pub substeps: u32,
    pub rearm_eps: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            frame_rate: 25.0,
            substeps: 8,
            rearm_eps: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub frames: Vec<WorldFrame>,
    pub contacts: Vec<ContactEvent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("frame rate must be positive")]
    BadFrameRate,
    #[error("substeps must be at least 1")]
    BadSubsteps,
    #[error(transparent)]
    Sample(#[from] PlanError),
}

/// Edge-triggered crossing test of one effector against one pad. Returns
/// the interpolated contact time (if any) and the new armed state: a contact
/// disarms the pad, rising above `y_surface + rearm_eps` re-arms it.
pub fn detect_contact(
    prev: [f64; 2],
    cur: [f64; 2],
    prev_t: f64,
    cur_t: f64,
    pad: &DrumPad,
    armed: bool,
    rearm_eps: f64,
) -> (Option<f64>, bool) {
    let ys = pad.y_surface;
    if armed && prev[1] > ys && cur[1] <= ys {
        let f = (prev[1] - ys) / (prev[1] - cur[1]);
        let x = prev[0] + f * (cur[0] - prev[0]);
        if (x - pad.x_center).abs() <= pad.half_width {
            return (Some(prev_t + f * (cur_t - prev_t)), false);
        }
        return (None, armed);
    }
    if !armed && cur[1] > ys + rearm_eps {
        return (None, true);
    }
    (None, armed)
}

pub fn frame_count(duration_s: f64, frame_rate: f64) -> usize {
    (duration_s * frame_rate - 1e-9).ceil().max(0.0) as usize + 1
}

pub fn simulate(
    traj: &Trajectory,
    kit: &DrumKit,
    arms: &[ArmConfig; 2],
    params: &SimParams,
) -> Result<SimOutput, SimError> {
    if !(params.frame_rate > 0.0 && params.frame_rate.is_finite()) {
        return Err(SimError::BadFrameRate);
    }
    if params.substeps == 0 {
        return Err(SimError::BadSubsteps);
    }
    let n_frames = frame_count(traj.duration_s, params.frame_rate);
    let steps_per_s = params.frame_rate * f64::from(params.substeps);
    let clamp = |t: f64| t.min(traj.duration_s);
    let tip = |arm: ArmId, t: f64| -> Result<[f64; 2], PlanError> {
        let st = traj.sample(clamp(t), arm)?;
        let p = forward_kinematics(&st.q, &arms[arm.index()]);
        Ok([p.x, p.y])
    };

    let mut frames = Vec::with_capacity(n_frames);
    let mut contacts = Vec::new();
    let mut armed = vec![[true; 2]; kit.pads.len()];
    let mut prev = [tip(ArmId::Left, 0.0)?, tip(ArmId::Right, 0.0)?];
    let mut prev_t = 0.0;

    for k in 0..n_frames {
        let t = k as f64 / params.frame_rate;
        let states = [
            traj.sample(clamp(t), ArmId::Left)?,
            traj.sample(clamp(t), ArmId::Right)?,
        ];
        let mut flags = vec![false; kit.pads.len()];
        for j in 1..=params.substeps {
            let cur_t = (k as f64 * f64::from(params.substeps) + f64::from(j)) / steps_per_s;
            for arm in ArmId::BOTH {
                let cur = tip(arm, cur_t)?;
                for (pi, pad) in kit.pads.iter().enumerate() {
                    let (hit, now_armed) = detect_contact(
                        prev[arm.index()],
                        cur,
                        prev_t,
                        cur_t,
                        pad,
                        armed[pi][arm.index()],
                        params.rearm_eps,
                    );
                    armed[pi][arm.index()] = now_armed;
                    if let Some(time_s) = hit {
                        flags[pi] = true;
                        contacts.push(ContactEvent {
                            time_s,
                            drum_id: pad.drum_id.clone(),
                            arm,
                        });
                    }
                }
                prev[arm.index()] = cur;
            }
            prev_t = cur_t;
        }
        frames.push(WorldFrame {
            t,
            states,
            contacts: flags,
        });
    }
    // Events are produced in substep order already; the sort only settles
    // ties inside one substep.
    contacts.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    Ok(SimOutput { frames, contacts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pad() -> DrumPad {
        DrumKit::default().pads[1].clone()
    }

    #[test]
    fn crossing_interpolates() {
        let p = pad();
        let ys = p.y_surface;
        let (hit, armed) = detect_contact([0.0, ys + 0.05], [0.0, ys - 0.01], 0.0, 1.0, &p, true, 0.01);
        let t = hit.unwrap();
        assert!((t - 5.0 / 6.0).abs() < 1e-12, "{t}");
        assert!(!armed);
    }

    #[test]
    fn crossing_outside_pad_is_ignored() {
        let p = pad();
        let ys = p.y_surface;
        let (hit, armed) = detect_contact([0.5, ys + 0.05], [0.5, ys - 0.01], 0.0, 1.0, &p, true, 0.01);
        assert!(hit.is_none() && armed);
    }

    #[test]
    fn touching_the_surface_counts() {
        let p = pad();
        let ys = p.y_surface;
        let (hit, _) = detect_contact([0.0, ys + 0.05], [0.0, ys], 0.0, 1.0, &p, true, 0.01);
        assert_eq!(hit, Some(1.0));
    }

    #[test]
    fn rearm_needs_clearance() {
        let p = pad();
        let ys = p.y_surface;
        let (hit, armed) = detect_contact([0.0, ys - 0.01], [0.0, ys + 0.005], 0.0, 1.0, &p, false, 0.01);
        assert!(hit.is_none() && !armed);
        let (_, armed) = detect_contact([0.0, ys + 0.005], [0.0, ys + 0.02], 0.0, 1.0, &p, false, 0.01);
        assert!(armed);
        // Disarmed pads ignore crossings.
        let (hit, _) = detect_contact([0.0, ys + 0.05], [0.0, ys - 0.01], 0.0, 1.0, &p, false, 0.01);
        assert!(hit.is_none());
    }

    #[test]
    fn default_kit_is_valid() {
        DrumKit::default().validate().unwrap();
        let mut kit = DrumKit::default();
        kit.pads[2].x_center = 0.1;
        assert!(matches!(kit.validate(), Err(KitError::Overlap(..))));
        let mut kit = DrumKit::default();
        kit.pads[2].drum_id = DrumId::from("SN");
        kit.pads[2].x_center = 0.9;
        assert!(matches!(kit.validate(), Err(KitError::DuplicateDrum(_))));
    }

    #[test]
    fn frame_count_rounds_up() {
        assert_eq!(frame_count(2.0, 25.0), 51);
        assert_eq!(frame_count(2.01, 25.0), 52);
        assert_eq!(frame_count(0.0, 25.0), 1);
    }
}
