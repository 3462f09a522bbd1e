//! Cross-modal retrieval scoring: reconstruct withheld modalities, detect
//! and classify drum hits in reconstructed spectra, match reconstructed
//! joint angles to strike poses, and measure the silent-frame noise floor.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::audio::{mix_hits, SpectrogramExtractor, SUPPORT_TAUS};
use crate::net::{FusionModel, ModalityMask, NetError, Sequence};
use crate::planner::{assign_arms, ArmId, PlanError, PrimitiveTable};
use crate::record::MultimodalRecord;
use crate::scene::{SceneConfig, SceneError};
use crate::tab::{parse_tab, validate_tab, DrumId, DrumTab, TabError};
use crate::world::ContactEvent;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("embedded tab: {0}")]
    Tab(#[from] TabError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("no templates to classify against")]
    EmptyTemplates,
    #[error("no records to evaluate")]
    EmptyDataset,
    #[error("record does not match the scene: {0}")]
    Mismatch(String),
}

/// Spectral-flux peak picking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetParams {
    /// Peaks must exceed `median + threshold_k · MAD` of the flux.
    pub threshold_k: f64,
    /// Absolute flux floor; keeps the decay wobble of noise-like timbres
    /// from firing on clean audio, where median and MAD are both zero.
    pub min_flux: f64,
    /// Frames after an onset in which no other onset is reported.
    pub refractory: usize,
}

impl Default for OnsetParams {
    fn default() -> Self {
        Self { threshold_k: 6.0, min_flux: 4.5, refractory: 2 }
    }
}

/// `f_k = Σ_b max(0, s_k[b] − max(s_{k−1}[b], s_{k−2}[b]))`, with `f_0 = 0`.
///
/// Against a one-frame reference, the bin-to-bin wobble of a decaying noise
/// burst reads as flux as large as a tom re-struck while still ringing; a
/// decaying burst is always louder two frames back, so the two-frame
/// reference suppresses it.
pub fn spectral_flux(specs: &[Vec<f64>]) -> Vec<f64> {
    let mut flux = vec![0.0; specs.len()];
    for k in 1..specs.len() {
        let prev2 = if k >= 2 { Some(&specs[k - 2]) } else { None };
        flux[k] = specs[k]
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let reference = prev2.map_or(specs[k - 1][b], |p| specs[k - 1][b].max(p[b]));
                (s - reference).max(0.0)
            })
            .sum();
    }
    flux
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Frame indices of detected onsets, ascending.
pub fn onset_detect(specs: &[Vec<f64>], params: &OnsetParams) -> Vec<usize> {
    let flux = spectral_flux(specs);
    let med = median(&mut flux.clone());
    let mad = median(&mut flux.iter().map(|f| (f - med).abs()).collect::<Vec<_>>());
    let threshold = (med + params.threshold_k * mad).max(params.min_flux);
    let mut out: Vec<usize> = Vec::new();
    for k in 1..flux.len() {
        let left = flux[k - 1];
        let right = flux.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        let peak = flux[k] > left && flux[k] >= right && flux[k] > threshold;
        let clear = out.last().is_none_or(|last| k > last + params.refractory);
        if peak && clear {
            out.push(k);
        }
    }
    out
}

/// Mean clean onset spectrum of every drum, in kit order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Templates {
    pub drums: Vec<DrumId>,
    pub spectra: Vec<Vec<f64>>,
}

/// Sub-frame onset positions averaged into each template.
pub const TEMPLATE_OFFSETS: usize = 8;

impl Templates {
    /// Synthesizes clean single hits of every pad at [`TEMPLATE_OFFSETS`]
    /// sub-frame positions and averages the spectrum at the flux peak.
    pub fn from_scene(scene: &SceneConfig) -> Result<Self, EvalError> {
        let clock = scene.clock()?;
        let spf = clock.samples_per_frame();
        let fr = f64::from(scene.frame_rate);
        let sr = f64::from(scene.sample_rate);
        let extractor = SpectrogramExtractor::new(spf);
        let lead = 4;
        let mut spectra = Vec::new();
        for pad in &scene.kit.pads {
            let frames = lead + (SUPPORT_TAUS * pad.timbre.decay_tau_s * fr).ceil() as usize + 2;
            let mut mean = vec![0.0; crate::audio::SPEC_BINS];
            for j in 0..TEMPLATE_OFFSETS {
                let hit = ContactEvent {
                    time_s: (lead as f64 + j as f64 / TEMPLATE_OFFSETS as f64) / fr,
                    drum_id: pad.drum_id.clone(),
                    arm: ArmId::Left,
                };
                let wave = mix_hits(&[hit], &scene.kit, frames * spf, sr, 0);
                let specs = extractor.sequence(&wave);
                let flux = spectral_flux(&specs);
                let peak = (0..flux.len()).max_by(|a, b| flux[*a].total_cmp(&flux[*b])).unwrap_or(0);
                for (m, v) in mean.iter_mut().zip(&specs[peak]) {
                    *m += v / TEMPLATE_OFFSETS as f64;
                }
            }
            spectra.push(mean);
        }
        Ok(Self { drums: scene.kit.drum_ids(), spectra })
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Index of the template with the highest cosine similarity; ties (and the
/// all-zero input) go to the earliest drum.
pub fn classify_drum(spec: &[f64], templates: &Templates) -> Result<usize, EvalError> {
    if templates.spectra.is_empty() {
        return Err(EvalError::EmptyTemplates);
    }
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, t) in templates.spectra.iter().enumerate() {
        let s = cosine(spec, t);
        if s > best_sim {
            best = i;
            best_sim = s;
        }
    }
    Ok(best)
}

/// Anything that maps a (partially masked) sequence to reconstructions of
/// all three modalities.
pub trait Reconstructor {
    fn id(&self) -> String;
    fn reconstruct(&self, seq: &Sequence, mask: ModalityMask) -> Result<Sequence, NetError>;
}

impl Reconstructor for FusionModel {
    fn id(&self) -> String {
        let bytes = crate::net::encode_checkpoint(self);
        format!("fusion-{:08x}", crc32fast::hash(&bytes))
    }

    fn reconstruct(&self, seq: &Sequence, mask: ModalityMask) -> Result<Sequence, NetError> {
        Ok(self.forward_sequence(seq, mask)?.0)
    }
}

/// Predicts the per-element training mean of every modality, whatever the
/// input.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPredictor {
    pub image: Vec<f64>,
    pub audio: Vec<f64>,
    pub motion: Vec<f64>,
}

impl MeanPredictor {
    pub fn fit(seqs: &[Sequence]) -> Result<Self, EvalError> {
        let first = seqs.first().ok_or(EvalError::EmptyDataset)?;
        let dims = [
            first.image.len() / first.len,
            first.audio.len() / first.len,
            first.motion.len() / first.len,
        ];
        let mut sums = dims.map(|d| vec![0.0; d]);
        let mut frames = 0usize;
        for s in seqs {
            for (k, data) in [&s.image, &s.audio, &s.motion].into_iter().enumerate() {
                for row in data.chunks_exact(dims[k]) {
                    for (acc, v) in sums[k].iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            frames += s.len;
        }
        let [image, audio, motion] = sums.map(|v| v.into_iter().map(|x| x / frames as f64).collect());
        Ok(Self { image, audio, motion })
    }
}

impl Reconstructor for MeanPredictor {
    fn id(&self) -> String {
        "mean-predictor".into()
    }

    fn reconstruct(&self, seq: &Sequence, _mask: ModalityMask) -> Result<Sequence, NetError> {
        let rep = |v: &[f64]| v.iter().copied().cycle().take(v.len() * seq.len).collect();
        Ok(Sequence {
            len: seq.len,
            image: rep(&self.image),
            audio: rep(&self.audio),
            motion: rep(&self.motion),
        })
    }
}

/// Returns the true signals regardless of the mask; an upper bound used to
/// validate the scoring itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleIdentity;

impl Reconstructor for OracleIdentity {
    fn id(&self) -> String {
        "oracle-identity".into()
    }

    fn reconstruct(&self, seq: &Sequence, _mask: ModalityMask) -> Result<Sequence, NetError> {
        Ok(seq.clone())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ModalityMse {
    pub image: f64,
    pub audio: f64,
    pub motion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskReport {
    /// Comma-separated dropped modalities.
    pub dropped: String,
    pub mse: ModalityMse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl ClassificationScore {
    fn new(correct: usize, total: usize) -> Self {
        Self {
            correct,
            total,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseScore {
    pub silent_frames: usize,
    pub input_energy: f64,
    pub recon_energy: f64,
    /// `recon_energy / input_energy`.
    pub ratio: f64,
    /// Beat times with a detected onset on keep-all reconstructions.
    pub onset_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub model_id: String,
    pub dataset_size: usize,
    pub frames: usize,
    pub keep_all: ModalityMse,
    pub masks: Vec<MaskReport>,
    /// Image and motion dropped: nearest strike pose of the reconstructed
    /// joint angles at every beat.
    pub motion_from_audio: ClassificationScore,
    /// Motion MSE of the same reconstruction, in `q/π` units.
    pub motion_from_audio_mse: f64,
    /// Audio dropped: onset detection plus template classification on the
    /// reconstructed spectra, per distinct beat time.
    pub audio_from_vision_motion: ClassificationScore,
    pub denoising: DenoiseScore,
}

impl RetrievalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    pub onset: OnsetParams,
    /// Onset/beat matching tolerance, in frames.
    pub match_window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { onset: OnsetParams::default(), match_window: 2 }
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

fn modality_mse(recon: &Sequence, truth: &Sequence) -> ModalityMse {
    ModalityMse {
        image: mse(&recon.image, &truth.image),
        audio: mse(&recon.audio, &truth.audio),
        motion: mse(&recon.motion, &truth.motion),
    }
}

fn spec_rows(seq: &Sequence) -> Vec<Vec<f64>> {
    let bins = seq.audio.len() / seq.len.max(1);
    seq.audio.chunks_exact(bins).map(<[f64]>::to_vec).collect()
}

/// The embedded tab, validated against the scene's kit.
pub fn record_tab(rec: &MultimodalRecord, scene: &SceneConfig) -> Result<DrumTab, EvalError> {
    Ok(validate_tab(parse_tab(&rec.meta.tab)?, &scene.kit)?)
}

/// Frame whose audio window contains the onset at `t`.
fn beat_frame(t: f64, frame_rate: f64) -> usize {
    (t * frame_rate + 1e-9).floor().max(0.0) as usize
}

/// Distinct beat times with their drum sets, in time order.
fn beat_groups(tab: &DrumTab, scene: &SceneConfig) -> Vec<(f64, Vec<usize>)> {
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for e in &tab.events {
        let pad = scene.kit.pad_index(&e.drum_id).expect("validated tab");
        match groups.last_mut() {
            Some((t, pads)) if (*t - e.time_s).abs() < 1e-9 => pads.push(pad),
            _ => groups.push((e.time_s, vec![pad])),
        }
    }
    groups
}

/// Greedy one-to-one matching of onsets to beat frames within `window`.
/// Returns, per beat, the matched onset index.
fn match_onsets(beats: &[usize], onsets: &[usize], window: usize) -> Vec<Option<usize>> {
    let mut used = vec![false; onsets.len()];
    beats
        .iter()
        .map(|b| {
            let best = onsets
                .iter()
                .enumerate()
                .filter(|(i, o)| !used[*i] && o.abs_diff(*b) <= window)
                .min_by_key(|(i, o)| (o.abs_diff(*b), *i))
                .map(|(i, _)| i);
            if let Some(i) = best {
                used[i] = true;
            }
            best
        })
        .collect()
}

/// Frames whose audio window cannot contain any sound: every earlier hit
/// has fully decayed and none starts inside the window. Uses the frame
/// contact flags and the longest support among the drums struck.
pub fn silent_frames(rec: &MultimodalRecord, scene: &SceneConfig) -> Vec<usize> {
    let fr = f64::from(rec.meta.frame_rate);
    let support: Vec<f64> = rec
        .meta
        .drums
        .iter()
        .map(|d| {
            scene
                .kit
                .pad(&DrumId::new(d))
                .map_or(f64::INFINITY, |p| SUPPORT_TAUS * p.timbre.decay_tau_s)
        })
        .collect();
    (0..rec.frames.len())
        .filter(|&k| {
            rec.frames[..=k].iter().enumerate().all(|(j, f)| {
                (0..support.len())
                    .filter(|i| f.contacts & (1 << i) != 0)
                    .all(|i| j < k && (k - j - 1) as f64 / fr >= support[i])
            })
        })
        .collect()
}

/// `Σ expm1(s)²` summed over the given frames of a log1p-magnitude
/// spectrogram, averaged per frame.
fn silent_energy(specs: &[Vec<f64>], frames: &[usize]) -> f64 {
    let total: f64 = frames.iter().map(|k| specs[*k].iter().map(|s| s.exp_m1().powi(2)).sum::<f64>()).sum();
    total / frames.len().max(1) as f64
}

/// Runs every retrieval measurement on held-out records.
pub fn evaluate(
    model: &dyn Reconstructor,
    records: &[MultimodalRecord],
    scene: &SceneConfig,
    cfg: &EvalConfig,
) -> Result<RetrievalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let templates = Templates::from_scene(scene)?;
    let table = PrimitiveTable::build(&scene.kit, &scene.arms, &scene.planner);
    let fr = f64::from(scene.frame_rate);
    let masks = ModalityMask::retrieval_set();
    let audio_only = ModalityMask { image: false, audio: true, motion: false };
    let no_audio = ModalityMask { image: true, audio: false, motion: true };

    let mut mask_sums = vec![ModalityMse::default(); masks.len()];
    let mut keep_all = ModalityMse::default();
    let (mut mot_ok, mut mot_n, mut mot_mse) = (0, 0, 0.0);
    let (mut aud_ok, mut aud_n) = (0, 0);
    let (mut recalled, mut beats_total) = (0, 0);
    let (mut in_energy, mut out_energy, mut silent_total) = (0.0, 0.0, 0usize);
    let mut frames = 0;

    let add = |acc: &mut ModalityMse, m: ModalityMse| {
        acc.image += m.image;
        acc.audio += m.audio;
        acc.motion += m.motion;
    };

    for rec in records {
        if rec.meta.drums != scene.kit.drum_ids().iter().map(|d| d.to_string()).collect::<Vec<_>>() {
            return Err(EvalError::Mismatch("drum list differs from the kit".into()));
        }
        let truth = Sequence::from_record(rec, 0, rec.frames.len())?;
        frames += truth.len;
        let tab = record_tab(rec, scene)?;
        let groups = beat_groups(&tab, scene);
        let beat_frames: Vec<usize> = groups.iter().map(|(t, _)| beat_frame(*t, fr)).collect();

        for (acc, mask) in mask_sums.iter_mut().zip(&masks) {
            let recon = model.reconstruct(&truth, *mask)?;
            add(acc, modality_mse(&recon, &truth));
            if *mask == audio_only {
                mot_mse += mse(&recon.motion, &truth.motion);
                let assignments = assign_arms(&tab, &scene.kit, &table, &scene.planner)?;
                for a in &assignments {
                    let k = ((a.event.time_s * fr).round() as usize).min(truth.len - 1);
                    let base = a.arm.index() * 3;
                    let q: Vec<f64> = (0..3).map(|j| recon.motion[k * 6 + base + j] * PI).collect();
                    let predicted = (0..scene.kit.pads.len())
                        .filter_map(|p| table.get(p, a.arm).map(|prim| (p, prim)))
                        .map(|(p, prim)| (p, prim.q_contact.iter().zip(&q).map(|(c, r)| (c - r).powi(2)).sum::<f64>()))
                        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
                        .map(|(p, _)| p);
                    mot_ok += usize::from(predicted == Some(a.pad));
                    mot_n += 1;
                }
            }
            if *mask == no_audio {
                let specs = spec_rows(&recon);
                let onsets = onset_detect(&specs, &cfg.onset);
                for ((_, pads), m) in groups.iter().zip(match_onsets(&beat_frames, &onsets, cfg.match_window)) {
                    if let Some(i) = m {
                        aud_ok += usize::from(pads.contains(&classify_drum(&specs[onsets[i]], &templates)?));
                    }
                    aud_n += 1;
                }
            }
        }

        let full = model.reconstruct(&truth, ModalityMask::KEEP_ALL)?;
        add(&mut keep_all, modality_mse(&full, &truth));
        let full_specs = spec_rows(&full);
        let onsets = onset_detect(&full_specs, &cfg.onset);
        recalled += match_onsets(&beat_frames, &onsets, cfg.match_window).iter().flatten().count();
        beats_total += groups.len();
        let silent = silent_frames(rec, scene);
        in_energy += silent_energy(&spec_rows(&truth), &silent) * silent.len() as f64;
        out_energy += silent_energy(&full_specs, &silent) * silent.len() as f64;
        silent_total += silent.len();
    }

    let n = records.len() as f64;
    let mean = |m: ModalityMse| ModalityMse { image: m.image / n, audio: m.audio / n, motion: m.motion / n };
    let in_mean = in_energy / silent_total.max(1) as f64;
    let out_mean = out_energy / silent_total.max(1) as f64;
    Ok(RetrievalReport {
        model_id: model.id(),
        dataset_size: records.len(),
        frames,
        keep_all: mean(keep_all),
        masks: masks
            .iter()
            .zip(mask_sums)
            .map(|(m, s)| MaskReport { dropped: m.label(), mse: mean(s) })
            .collect(),
        motion_from_audio: ClassificationScore::new(mot_ok, mot_n),
        motion_from_audio_mse: mot_mse / n,
        audio_from_vision_motion: ClassificationScore::new(aud_ok, aud_n),
        denoising: DenoiseScore {
            silent_frames: silent_total,
            input_energy: in_mean,
            recon_energy: out_mean,
            ratio: if in_mean > 0.0 { out_mean / in_mean } else { 0.0 },
            onset_recall: if beats_total == 0 { 0.0 } else { recalled as f64 / beats_total as f64 },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{generate_from_text, random_record, DatasetParams};

    #[test]
    fn silence_has_no_onsets() {
        let specs = vec![vec![0.0; 128]; 30];
        assert!(onset_detect(&specs, &OnsetParams::default()).is_empty());
    }

    fn tom_specs(frames: &[usize]) -> Vec<Vec<f64>> {
        let scene = SceneConfig::default();
        let hits: Vec<ContactEvent> = frames
            .iter()
            .map(|f| ContactEvent { time_s: *f as f64 / 25.0, drum_id: DrumId::new("TM"), arm: ArmId::Right })
            .collect();
        let wave = mix_hits(&hits, &scene.kit, 50 * 320, 8000.0, 0);
        SpectrogramExtractor::new(320).sequence(&wave)
    }

    #[test]
    fn single_tom_hit_gives_one_onset() {
        let onsets = onset_detect(&tom_specs(&[25]), &OnsetParams::default());
        assert_eq!(onsets.len(), 1);
        assert!((24..=26).contains(&onsets[0]), "{onsets:?}");
    }

    #[test]
    fn two_hits_give_two_ordered_onsets() {
        let onsets = onset_detect(&tom_specs(&[10, 20]), &OnsetParams::default());
        assert_eq!(onsets.len(), 2, "{onsets:?}");
        assert!(onsets[0].abs_diff(10) <= 1 && onsets[1].abs_diff(20) <= 1);
    }

    #[test]
    fn templates_self_classify() {
        let t = Templates::from_scene(&SceneConfig::default()).unwrap();
        assert_eq!(t.spectra.len(), 3);
        for (i, s) in t.spectra.iter().enumerate() {
            assert_eq!(classify_drum(s, &t).unwrap(), i);
        }
        assert_eq!(classify_drum(&[0.0; 128], &t).unwrap(), 0);
        let empty = Templates { drums: vec![], spectra: vec![] };
        assert!(matches!(classify_drum(&[1.0; 128], &empty), Err(EvalError::EmptyTemplates)));
    }

    #[test]
    fn tom_hit_classifies_as_tom() {
        let t = Templates::from_scene(&SceneConfig::default()).unwrap();
        let specs = tom_specs(&[12]);
        let k = onset_detect(&specs, &OnsetParams::default())[0];
        assert_eq!(t.drums[classify_drum(&specs[k], &t).unwrap()], DrumId::new("TM"));
    }

    #[test]
    fn clean_records_recover_every_contact() {
        let scene = SceneConfig::default();
        let params = DatasetParams { noise_sigma: 0.0, ..DatasetParams::default() };
        for seed in 0..10 {
            let g = random_record(&scene, seed, &params).unwrap();
            let seq = Sequence::from_record(&g.record, 0, g.record.frames.len()).unwrap();
            let onsets = onset_detect(&spec_rows(&seq), &OnsetParams::default());
            let groups = beat_groups(&g.tab, &scene);
            let beats: Vec<usize> = groups.iter().map(|(t, _)| beat_frame(*t, 25.0)).collect();
            let matched = match_onsets(&beats, &onsets, 1);
            assert!(matched.iter().all(Option::is_some), "seed {seed}: beats {beats:?} onsets {onsets:?}");
            assert_eq!(onsets.len(), beats.len(), "seed {seed}: spurious onsets {onsets:?} vs {beats:?}");
        }
    }

    #[test]
    fn silent_frames_follow_decay() {
        let scene = SceneConfig::default();
        // One snare hit at 0.5 s: frame 12; 6τ = 0.48 s = 12 frames.
        let g = generate_from_text("offset: 0.5\nSN|x|", &scene, 0, 0.0).unwrap();
        let silent = silent_frames(&g.record, &scene);
        let hit = g.record.frames.iter().position(|f| f.contacts != 0).unwrap();
        assert!(silent.contains(&(hit - 1)));
        assert!(!silent.contains(&hit));
        assert!(!silent.contains(&(hit + 12)));
        assert!(silent.contains(&(hit + 13)));
        for k in &silent {
            assert!(g.record.frames[*k].audio.iter().all(|s| *s == 0.0), "frame {k}");
        }
    }

    #[test]
    fn oracle_report_is_well_formed() {
        let scene = SceneConfig::default();
        let recs: Vec<_> = (0..3)
            .map(|s| random_record(&scene, s, &DatasetParams::default()).unwrap().record)
            .collect();
        let report = evaluate(&OracleIdentity, &recs, &scene, &EvalConfig::default()).unwrap();
        assert_eq!(report.masks.len(), 6);
        assert_eq!(report.keep_all, ModalityMse::default());
        assert_eq!(report.denoising.ratio, 1.0);
        assert_eq!(report.motion_from_audio.accuracy, 1.0);
        let again = evaluate(&OracleIdentity, &recs, &scene, &EvalConfig::default()).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let r = evaluate(&OracleIdentity, &[], &SceneConfig::default(), &EvalConfig::default());
        assert!(matches!(r, Err(EvalError::EmptyDataset)));
    }
}
