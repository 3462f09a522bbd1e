use std::f64::consts::PI;

use drumsense::arm::{forward_kinematics, inverse_kinematics, jacobian, ArmConfig};
use drumsense::{Handedness, SceneConfig};
use proptest::prelude::*;

fn arms() -> [ArmConfig; 2] {
    SceneConfig::default().arms
}

/// Joint angles inside the limits and safely inside the preferred elbow
/// branch, so the inverse picks the same solution.
fn arb_pose() -> impl Strategy<Value = (usize, [f64; 3])> {
    (0usize..2, -PI + 1e-3..PI - 1e-3, 0.05..PI - 0.05, -PI + 1e-3..PI - 1e-3).prop_map(|(arm, q1, e, q3)| {
        let q2 = match arms()[arm].handedness {
            Handedness::Left => e,
            Handedness::Right => -e,
        };
        (arm, [q1, q2, q3])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ik_inverts_fk((arm, q) in arb_pose()) {
        let cfg = &arms()[arm];
        prop_assume!(cfg.within_limits(&q));
        let pose = forward_kinematics(&q, cfg);
        let back = inverse_kinematics([pose.x, pose.y], pose.tool_angle, cfg).unwrap();
        for j in 0..3 {
            prop_assert!((back[j] - q[j]).abs() <= 1e-9, "joint {}: {} vs {}", j, back[j], q[j]);
        }
    }

    #[test]
    fn jacobian_matches_central_differences((arm, q) in arb_pose()) {
        const H: f64 = 1e-5;
        let cfg = &arms()[arm];
        let jac = jacobian(&q, cfg);
        for j in 0..3 {
            let mut plus = q;
            let mut minus = q;
            plus[j] += H;
            minus[j] -= H;
            let (p, m) = (forward_kinematics(&plus, cfg), forward_kinematics(&minus, cfg));
            let fd = [(p.x - m.x) / (2.0 * H), (p.y - m.y) / (2.0 * H)];
            for r in 0..2 {
                prop_assert!((jac[r][j] - fd[r]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn fk_is_lipschitz((arm, q) in arb_pose(), d in prop::array::uniform3(-1e-2f64..1e-2)) {
        let cfg = &arms()[arm];
        let moved = [q[0] + d[0], q[1] + d[1], q[2] + d[2]];
        let (a, b) = (forward_kinematics(&q, cfg), forward_kinematics(&moved, cfg));
        let bound: f64 = cfg.link_lengths.iter().sum::<f64>() * d.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() <= bound + 1e-15);
    }
}

#[test]
fn target_beyond_reach_is_rejected() {
    let cfg = &arms()[0];
    let far = 2.0 * cfg.link_lengths.iter().sum::<f64>();
    assert!(inverse_kinematics([cfg.base[0] + far, cfg.base[1]], 0.0, cfg).is_err());
}
