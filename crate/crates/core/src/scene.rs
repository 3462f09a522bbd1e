//! Scene configuration: arms, kit, planner and sensor rates.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{inverse_kinematics, ArmConfig, ArmConfigError, Handedness, IkError, Joints};
use crate::audio::AudioClock;
use crate::planner::{PlanError, PlannerParams, PrimitiveTable, STRIKE_TOOL_ANGLE};
use crate::vision::Viewport;
use crate::world::{DrumKit, KitError, SimParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Left arm first.
    pub arms: [ArmConfig; 2],
    /// Tool-tip positions of the rest poses (stick pointing down).
    pub rest_points: [[f64; 2]; 2],
    pub kit: DrumKit,
    pub planner: PlannerParams,
    pub frame_rate: u32,
    pub sample_rate: u32,
    pub substeps: u32,
    pub rearm_eps: f64,
    pub viewport: Viewport,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scene: {0}")]
    Json(#[from] serde_json::Error),
    #[error("arm {0}: {1}")]
    Arm(usize, ArmConfigError),
    #[error("arm {0} handedness does not match its slot")]
    Handedness(usize),
    #[error(transparent)]
    Kit(#[from] KitError),
    #[error("rest pose of arm {0} is unreachable: {1}")]
    Rest(usize, IkError),
    #[error(transparent)]
    Reach(#[from] PlanError),
    #[error("sample rate {sample_rate} is not a multiple of frame rate {frame_rate}")]
    Rates { sample_rate: u32, frame_rate: u32 },
    #[error("{0}")]
    Invalid(String),
}

impl Default for SceneConfig {
    fn default() -> Self {
        let sim = SimParams::default();
        Self {
            arms: [
                ArmConfig::default_for(Handedness::Left),
                ArmConfig::default_for(Handedness::Right),
            ],
            rest_points: [[-0.3, 0.6], [0.3, 0.6]],
            kit: DrumKit::default(),
            planner: PlannerParams::default(),
            frame_rate: 25,
            sample_rate: 8000,
            substeps: sim.substeps,
            rearm_eps: sim.rearm_eps,
            viewport: Viewport::default(),
        }
    }
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: SceneConfig = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        for (i, arm) in self.arms.iter().enumerate() {
            arm.validate().map_err(|e| SceneError::Arm(i, e))?;
        }
        if self.arms[0].handedness != Handedness::Left || self.arms[1].handedness != Handedness::Right {
            return Err(SceneError::Handedness(
                if self.arms[0].handedness != Handedness::Left { 0 } else { 1 },
            ));
        }
        self.kit.validate()?;
        self.clock()?;
        if self.substeps == 0 {
            return Err(SceneError::Invalid("substeps must be at least 1".into()));
        }
        let p = &self.planner;
        if !(p.stroke_dur_s > 0.0 && p.hover_height_m > 0.0 && p.min_transit_s >= 0.0 && p.tail_s >= 0.0 && p.strike_depth_m >= 0.0) {
            return Err(SceneError::Invalid("planner durations and heights must be positive".into()));
        }
        self.rest_poses()?;
        PrimitiveTable::build(&self.kit, &self.arms, &self.planner).check_preferred(&self.kit, &self.arms, &self.planner)?;
        Ok(())
    }

    pub fn clock(&self) -> Result<AudioClock, SceneError> {
        AudioClock::new(self.sample_rate, self.frame_rate).map_err(|_| SceneError::Rates {
            sample_rate: self.sample_rate,
            frame_rate: self.frame_rate,
        })
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            frame_rate: f64::from(self.frame_rate),
            substeps: self.substeps,
            rearm_eps: self.rearm_eps,
        }
    }

    pub fn rest_poses(&self) -> Result<[Joints; 2], SceneError> {
        let mut out = [[0.0; 3]; 2];
        for i in 0..2 {
            out[i] = inverse_kinematics(self.rest_points[i], STRIKE_TOOL_ANGLE, &self.arms[i])
                .map_err(|e| SceneError::Rest(i, e))?;
        }
        Ok(out)
    }

    pub fn primitives(&self) -> PrimitiveTable {
        PrimitiveTable::build(&self.kit, &self.arms, &self.planner)
    }
}
