//! Grayscale head-camera stand-in: a 64×64 side view of pads and arms.

use serde::{Deserialize, Serialize};

use crate::arm::{ArmConfig, JointState};
use crate::world::DrumKit;

pub const BACKGROUND: f64 = 0.05;
pub const ARM_INTENSITY: f64 = 0.9;
pub const EFFECTOR_INTENSITY: f64 = 1.0;
pub const PAD_THICKNESS_M: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities in `[0, 1]`.
    pub pixels: Vec<f64>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Writes one pixel; out-of-bounds coordinates are ignored.
    pub fn put(&mut self, col: i64, row: i64, value: f64) {
        if col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height {
            self.pixels[row as usize * self.width + col as usize] = value.clamp(0.0, 1.0);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Self {
        Self {
            width,
            height,
            pixels: bytes.iter().map(|b| f64::from(*b) / 255.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Viewport {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.2,
            width: 64,
            height: 64,
        }
    }
}

impl Viewport {
    /// Continuous column coordinate of world `x`.
    pub fn col_f(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min) * (self.width - 1) as f64
    }

    /// Continuous row coordinate of world `y` (row 0 at the top).
    pub fn row_f(&self, y: f64) -> f64 {
        (self.y_max - y) / (self.y_max - self.y_min) * (self.height - 1) as f64
    }

    /// World coordinates of a pixel center.
    pub fn pixel_center(&self, col: usize, row: usize) -> [f64; 2] {
        [
            self.x_min + col as f64 / (self.width - 1) as f64 * (self.x_max - self.x_min),
            self.y_max - row as f64 / (self.height - 1) as f64 * (self.y_max - self.y_min),
        ]
    }
}

/// Rounds half down, so the exact center of an even-sized image maps to
/// the lower index.
fn round_half_down(v: f64) -> i64 {
    let v = v.clamp(-1e9, 1e9);
    (v - 0.5).ceil() as i64
}

pub fn world_to_pixel(p: [f64; 2], viewport: &Viewport) -> (i64, i64) {
    (round_half_down(viewport.col_f(p[0])), round_half_down(viewport.row_f(p[1])))
}

/// Integer line raster; pixels outside the frame are skipped.
pub fn draw_line(frame: &mut Frame, p0: (i64, i64), p1: (i64, i64), intensity: f64) {
    // Keep absurd endpoints from turning into multi-billion-step loops.
    let lim = 4 * (frame.width.max(frame.height) as i64) + 16;
    let clampi = |v: i64| v.clamp(-lim, lim);
    let (mut x, mut y) = (clampi(p0.0), clampi(p0.1));
    let (x1, y1) = (clampi(p1.0), clampi(p1.1));
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        frame.put(x, y, intensity);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Fills every pixel whose center lies inside the world-space rectangle.
pub fn fill_rect(frame: &mut Frame, viewport: &Viewport, x: [f64; 2], y: [f64; 2], intensity: f64) {
    let c0 = viewport.col_f(x[0]).ceil().max(0.0) as i64;
    let c1 = viewport.col_f(x[1]).floor().min((frame.width - 1) as f64) as i64;
    let r0 = viewport.row_f(y[1]).ceil().max(0.0) as i64;
    let r1 = viewport.row_f(y[0]).floor().min((frame.height - 1) as f64) as i64;
    for r in r0..=r1 {
        for c in c0..=c1 {
            frame.put(c, r, intensity);
        }
    }
}

pub fn pad_intensity(pad_index: usize) -> f64 {
    0.5 + 0.1 * pad_index as f64
}

pub fn render_frame(kit: &DrumKit, arms: &[(&ArmConfig, &JointState)], viewport: &Viewport) -> Frame {
    let mut frame = Frame::filled(viewport.width, viewport.height, BACKGROUND);
    for (i, pad) in kit.pads.iter().enumerate() {
        fill_rect(
            &mut frame,
            viewport,
            [pad.x_center - pad.half_width, pad.x_center + pad.half_width],
            [pad.y_surface - PAD_THICKNESS_M, pad.y_surface],
            pad_intensity(i),
        );
    }
    let mut tips = Vec::with_capacity(arms.len());
    for (cfg, state) in arms {
        let pts = cfg.joint_points(&state.q);
        for seg in pts.windows(2) {
            draw_line(
                &mut frame,
                world_to_pixel(seg[0], viewport),
                world_to_pixel(seg[1], viewport),
                ARM_INTENSITY,
            );
        }
        tips.push(world_to_pixel(pts[3], viewport));
    }
    for (c, r) in tips {
        for dr in -1..=1 {
            for dc in -1..=1 {
                frame.put(c + dc, r + dr, EFFECTOR_INTENSITY);
            }
        }
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::Handedness;

    fn painted(frame: &Frame, v: f64) -> usize {
        frame.pixels.iter().filter(|p| **p == v).count()
    }

    #[test]
    fn corners_and_center() {
        let vp = Viewport::default();
        assert_eq!(world_to_pixel([-1.0, 1.2], &vp), (0, 0));
        assert_eq!(world_to_pixel([1.0, 0.0], &vp), (63, 63));
        let (c, r) = world_to_pixel([0.0, 0.6], &vp);
        assert!((31..=32).contains(&c) && (31..=32).contains(&r));
        assert_eq!((c, r), (31, 31));
    }

    #[test]
    fn empty_scene_is_background() {
        let kit = DrumKit { pads: vec![] };
        let f = render_frame(&kit, &[], &Viewport::default());
        assert!(f.pixels.iter().all(|p| *p == BACKGROUND));
    }

    #[test]
    fn line_pixel_counts() {
        let mut f = Frame::filled(64, 64, 0.0);
        draw_line(&mut f, (7, 9), (7, 9), 1.0);
        assert_eq!(painted(&f, 1.0), 1);

        let mut f = Frame::filled(64, 64, 0.0);
        draw_line(&mut f, (5, 5), (10, 5), 1.0);
        assert_eq!(painted(&f, 1.0), 6);

        let mut f = Frame::filled(64, 64, 0.0);
        draw_line(&mut f, (0, 0), (5, 5), 1.0);
        assert_eq!(painted(&f, 1.0), 6);
        for c in 0..6 {
            assert_eq!(f.get(c, c), 1.0);
        }
    }

    #[test]
    fn lines_are_clipped() {
        let mut f = Frame::filled(64, 64, 0.0);
        draw_line(&mut f, (-100, -50), (200, 300), 1.0);
        draw_line(&mut f, (i64::MIN / 2, 3), (i64::MAX / 2, 3), 0.5);
        assert!(f.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(painted(&f, 0.5) > 0);
    }

    #[test]
    fn effector_is_drawn_on_top() {
        let kit = DrumKit::default();
        let arm = ArmConfig::default_for(Handedness::Left);
        let state = JointState::at_rest([-1.2, 0.8, -0.3]);
        let vp = Viewport::default();
        let f = render_frame(&kit, &[(&arm, &state)], &vp);
        let tip = arm.joint_points(&state.q)[3];
        let (c, r) = world_to_pixel(tip, &vp);
        assert_eq!(f.get(c as usize, r as usize), EFFECTOR_INTENSITY);
        assert!(painted(&f, ARM_INTENSITY) > 10);
    }

    #[test]
    fn bytes_round_trip_quantizes() {
        let f = Frame {
            width: 2,
            height: 1,
            pixels: vec![0.05, 1.0],
        };
        assert_eq!(f.to_bytes(), vec![13, 255]);
        let g = Frame::from_bytes(2, 1, &f.to_bytes());
        assert!((g.pixels[0] - 0.05).abs() < 0.5 / 255.0 + 1e-12);
    }
}
