//! Planar three-link arm: forward kinematics, Jacobian and closed-form
//! inverse kinematics with a fixed tool angle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Joints = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub base: [f64; 2],
    pub link_lengths: [f64; 3],
    pub joint_limits: [[f64; 2]; 3],
    pub handedness: Handedness,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub q: Joints,
    pub qd: Joints,
    pub qdd: Joints,
}

impl JointState {
    pub fn at_rest(q: Joints) -> Self {
        Self {
            q,
            qd: [0.0; 3],
            qdd: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub tool_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IkError {
    #[error("wrist point at distance {distance:.4} m is outside the annulus [{min:.4}, {max:.4}]")]
    Unreachable { distance: f64, min: f64, max: f64 },
    #[error("both elbow branches violate the joint limits")]
    JointLimits,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArmConfigError {
    #[error("link lengths must be positive and finite")]
    BadLinks,
    #[error("joint {0} has min >= max")]
    BadLimits(usize),
}

impl ArmConfig {
    /// Default geometry for one side of the side-view world. The elbow is
    /// restricted to its branch half-range.
    pub fn default_for(handedness: Handedness) -> Self {
        let (base_x, elbow) = match handedness {
            Handedness::Left => (-0.3, [0.0, PI]),
            Handedness::Right => (0.3, [-PI, 0.0]),
        };
        Self {
            base: [base_x, 0.9],
            link_lengths: [0.3, 0.25, 0.15],
            joint_limits: [[-PI, PI], elbow, [-PI, PI]],
            handedness,
        }
    }

    pub fn validate(&self) -> Result<(), ArmConfigError> {
        if self.link_lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(ArmConfigError::BadLinks);
        }
        for (i, [lo, hi]) in self.joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(ArmConfigError::BadLimits(i));
            }
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn within_limits(&self, q: &Joints) -> bool {
        q.iter()
            .zip(&self.joint_limits)
            .all(|(v, [lo, hi])| *v >= *lo && *v <= *hi)
    }

    /// Base, elbow, wrist and tool tip positions.
    pub fn joint_points(&self, q: &Joints) -> [[f64; 2]; 4] {
        let mut pts = [self.base; 4];
        let mut angle = 0.0;
        for i in 0..3 {
            angle += q[i];
            pts[i + 1] = [
                pts[i][0] + self.link_lengths[i] * angle.cos(),
                pts[i][1] + self.link_lengths[i] * angle.sin(),
            ];
        }
        pts
    }
}

pub fn forward_kinematics(q: &Joints, arm: &ArmConfig) -> Pose {
    let tip = arm.joint_points(q)[3];
    Pose {
        x: tip[0],
        y: tip[1],
        tool_angle: q[0] + q[1] + q[2],
    }
}

/// `∂(x, y)/∂q` of the tool tip.
pub fn jacobian(q: &Joints, arm: &ArmConfig) -> [[f64; 3]; 2] {
    let [l1, l2, l3] = arm.link_lengths;
    let a1 = q[0];
    let a2 = a1 + q[1];
    let a3 = a2 + q[2];
    let (s1, c1) = a1.sin_cos();
    let (s2, c2) = a2.sin_cos();
    let (s3, c3) = a3.sin_cos();
    [
        [
            -l1 * s1 - l2 * s2 - l3 * s3,
            -l2 * s2 - l3 * s3,
            -l3 * s3,
        ],
        [l1 * c1 + l2 * c2 + l3 * c3, l2 * c2 + l3 * c3, l3 * c3],
    ]
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Places the tool tip at `target` with the given tool angle. The elbow
/// branch is `q2 >= 0` for a left arm and `q2 <= 0` for a right arm; the
/// opposite branch is used only if the preferred one breaks a joint limit.
pub fn inverse_kinematics(target: [f64; 2], tool_angle: f64, arm: &ArmConfig) -> Result<Joints, IkError> {
    let [l1, l2, l3] = arm.link_lengths;
    let wx = target[0] - l3 * tool_angle.cos() - arm.base[0];
    let wy = target[1] - l3 * tool_angle.sin() - arm.base[1];
    let r2 = wx * wx + wy * wy;
    let r = r2.sqrt();
    let (min, max) = ((l1 - l2).abs(), l1 + l2);
    const SLACK: f64 = 1e-12;
    if r > max + SLACK || r < min - SLACK {
        return Err(IkError::Unreachable { distance: r, min, max });
    }
    let c2 = ((r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let s2_abs = (1.0 - c2 * c2).max(0.0).sqrt();
    let preferred = match arm.handedness {
        Handedness::Left => 1.0,
        Handedness::Right => -1.0,
    };

    let solve = |sign: f64| -> Joints {
        let s2 = sign * s2_abs;
        let q2 = s2.atan2(c2);
        let q1 = wrap_angle(wy.atan2(wx) - (l2 * s2).atan2(l1 + l2 * c2));
        let q3 = wrap_angle(tool_angle - q1 - q2);
        [q1, q2, q3]
    };

    let first = solve(preferred);
    if arm.within_limits(&first) {
        return Ok(first);
    }
    let second = solve(-preferred);
    if arm.within_limits(&second) {
        return Ok(second);
    }
    Err(IkError::JointLimits)
}
