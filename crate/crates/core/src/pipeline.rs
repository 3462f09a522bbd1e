//! Tab text in, synchronized multimodal record out.

use serde::Serialize;
use thiserror::Error;

use crate::audio::{render_audio, SpectrogramExtractor};
use crate::planner::{assign_arms, schedule, Assignment, PlanError, PrimitiveTable, Trajectory};
use crate::record::{MMFrame, MultimodalRecord, RecordMeta, JOINT_COUNT};
use crate::scene::{SceneConfig, SceneError};
use crate::tab::{gen_random_tab, parse_tab, validate_tab, DrumTab, RandomTabParams, TabError};
use crate::vision::render_frame;
use crate::world::{simulate, ContactEvent, SimError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Tab(#[from] TabError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("no feasible random tab after {0} draws")]
    NoFeasibleDraw(usize),
}

impl PipelineError {
    /// Whether the failure is an unplayable tab rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            PipelineError::Plan(PlanError::Infeasible { .. } | PlanError::TooEarly { .. })
                | PipelineError::NoFeasibleDraw(_)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenSummary {
    pub frames: usize,
    pub contacts: usize,
    pub beats: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub tab: DrumTab,
    pub trajectory: Trajectory,
    pub assignments: Vec<Assignment>,
    pub contacts: Vec<ContactEvent>,
    /// Full mixed waveform, `frames × samples_per_frame` long.
    pub waveform: Vec<f64>,
    pub record: MultimodalRecord,
}

impl Generated {
    pub fn summary(&self) -> GenSummary {
        GenSummary {
            frames: self.record.frames.len(),
            contacts: self.contacts.len(),
            beats: self.tab.events.len(),
            duration_s: self.trajectory.duration_s,
        }
    }
}

pub fn generate_from_text(text: &str, scene: &SceneConfig, seed: u64, noise_sigma: f64) -> Result<Generated, PipelineError> {
    let tab = parse_tab(text)?;
    generate(tab, text, scene, seed, noise_sigma)
}

/// Schedules, simulates, renders and packs one trial.
pub fn generate(tab: DrumTab, tab_text: &str, scene: &SceneConfig, seed: u64, noise_sigma: f64) -> Result<Generated, PipelineError> {
    scene.validate()?;
    let tab = validate_tab(tab, &scene.kit)?;
    let rest = scene.rest_poses()?;
    let (trajectory, assignments) = schedule(&tab, &scene.kit, &scene.arms, rest, &scene.planner)?;
    let sim = simulate(&trajectory, &scene.kit, &scene.arms, &scene.sim_params())?;

    let clock = scene.clock()?;
    let spf = clock.samples_per_frame();
    let n_frames = sim.frames.len();
    let waveform = render_audio(&sim.contacts, &scene.kit, n_frames * spf, &clock, noise_sigma, seed);
    let extractor = SpectrogramExtractor::new(spf);

    let mut frames = Vec::with_capacity(n_frames);
    for (k, wf) in sim.frames.iter().enumerate() {
        let image = render_frame(
            &scene.kit,
            &[(&scene.arms[0], &wf.states[0]), (&scene.arms[1], &wf.states[1])],
            &scene.viewport,
        );
        // The stored spectrum is computed from the stored (f32) audio so the
        // two stay consistent on read.
        let audio: Vec<f32> = waveform[k * spf..(k + 1) * spf].iter().map(|v| *v as f32).collect();
        let audio64: Vec<f64> = audio.iter().map(|v| f64::from(*v)).collect();
        let spec = extractor
            .frame(&audio64)
            .expect("window has samples_per_frame samples")
            .into_iter()
            .map(|v| v as f32)
            .collect();
        let mut q = [0.0f32; JOINT_COUNT];
        let mut qd = [0.0f32; JOINT_COUNT];
        for arm in 0..2 {
            for j in 0..3 {
                q[arm * 3 + j] = wf.states[arm].q[j] as f32;
                qd[arm * 3 + j] = wf.states[arm].qd[j] as f32;
            }
        }
        let contacts = wf
            .contacts
            .iter()
            .enumerate()
            .fold(0u8, |m, (i, hit)| if *hit { m | (1 << i) } else { m });
        frames.push(MMFrame {
            q,
            qd,
            image: image.to_bytes(),
            audio,
            spec,
            contacts,
        });
    }

    let meta = RecordMeta {
        frame_rate: scene.frame_rate,
        sample_rate: scene.sample_rate,
        image_width: scene.viewport.width as u32,
        image_height: scene.viewport.height as u32,
        joint_count: JOINT_COUNT as u32,
        drums: scene.kit.pads.iter().map(|p| p.drum_id.to_string()).collect(),
        tab: tab_text.to_owned(),
        seed,
        noise_sigma,
    };
    Ok(Generated {
        tab,
        trajectory,
        assignments,
        contacts: sim.contacts,
        waveform,
        record: MultimodalRecord { meta, frames },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DatasetParams {
    /// Length of every record; strikes are placed so the trajectory fits.
    pub duration_s: f64,
    pub tempo_bpm: f64,
    pub div: u32,
    pub density: f64,
    pub noise_sigma: f64,
    /// Lead-in before the first grid cell.
    pub offset_s: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            duration_s: 2.0,
            tempo_bpm: 120.0,
            div: 4,
            density: 0.25,
            noise_sigma: 0.02,
            offset_s: 0.3,
        }
    }
}

/// Maximum number of tab draws per dataset record.
pub const MAX_DRAWS: usize = 16;

/// Draws a feasible random tab. The strikes lie inside
/// `[offset, duration - stroke - tail]`, so every record is exactly
/// `duration_s` long.
pub fn random_tab(scene: &SceneConfig, seed: u64, params: &DatasetParams) -> Result<DrumTab, PipelineError> {
    let table = PrimitiveTable::build(&scene.kit, &scene.arms, &scene.planner);
    let drums = scene.kit.drum_ids();
    let span = params.duration_s - scene.planner.stroke_dur_s - scene.planner.tail_s - params.offset_s;
    let tab_params = RandomTabParams {
        // One extra cell so that a cell landing on the span end is kept.
        duration_s: span + crate::tab::cell_duration(params.tempo_bpm, params.div) - 1e-9,
        tempo_bpm: params.tempo_bpm,
        div: params.div,
        density: params.density,
        offset_s: params.offset_s,
    };
    for draw in 0..MAX_DRAWS {
        let draw_seed = seed.wrapping_add((draw as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let tab = gen_random_tab(draw_seed, &tab_params, &drums, |t| {
            assign_arms(t, &scene.kit, &table, &scene.planner).is_ok()
        });
        if !tab.events.is_empty() && assign_arms(&tab, &scene.kit, &table, &scene.planner).is_ok() {
            return Ok(tab);
        }
    }
    Err(PipelineError::NoFeasibleDraw(MAX_DRAWS))
}

pub fn random_record(scene: &SceneConfig, seed: u64, params: &DatasetParams) -> Result<Generated, PipelineError> {
    let tab = random_tab(scene, seed, params)?;
    let mut scene = scene.clone();
    scene.planner.min_duration_s = params.duration_s;
    let text = tab.serialize();
    generate(tab, &text, &scene, seed, params.noise_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_beat_makes_one_contact() {
        let scene = SceneConfig::default();
        let text = "offset: 0.5\nHH|x---x---|\nSN|--x---x-|\nTM|-x---x--|\n";
        let g = generate_from_text(text, &scene, 1, 0.0).unwrap();
        assert_eq!(g.tab.events.len(), 6);
        assert_eq!(g.contacts.len(), 6);
        let flagged: u32 = g.record.frames.iter().map(|f| f.contacts.count_ones()).sum();
        assert_eq!(flagged, 6);
        g.record.validate().unwrap();
        g.record.check_spectra().unwrap();
    }

    #[test]
    fn random_records_have_fixed_length() {
        let scene = SceneConfig::default();
        let params = DatasetParams::default();
        for seed in 0..5 {
            let g = random_record(&scene, seed, &params).unwrap();
            assert_eq!(g.record.frames.len(), 51);
            assert_eq!(g.contacts.len(), g.tab.events.len());
        }
    }

    #[test]
    fn unknown_drum_is_a_tab_error() {
        let err = generate_from_text("offset: 1\nCY|x|", &SceneConfig::default(), 0, 0.0).unwrap_err();
        assert!(matches!(err, PipelineError::Tab(TabError::UnknownDrum(_))));
        assert!(!err.is_infeasible());
    }

    #[test]
    fn early_tab_is_infeasible() {
        let err = generate_from_text("SN|x|", &SceneConfig::default(), 0, 0.0).unwrap_err();
        assert!(err.is_infeasible());
    }
}
