//! Modality-dropout contractive LSTM autoencoder.
//!
//! Frames are encoded per modality (a two-layer strided CNN for images, a
//! dense stack for spectra, raw `q/π` for motion), concatenated into a
//! fused vector, passed through a tanh contraction layer and an LSTM, and
//! decoded back into all three signals. All training math is `f64`.

mod checkpoint;
mod gradcheck;
pub(crate) mod linalg;
mod model;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{gradient_check, GradCheckReport, TensorCheck, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
pub use linalg::conv_out;
pub use model::{
    contractive_penalty, fuse, loss, split_fused, Batch, FusionModel, LossParts, LstmState, ParamInfo, Reconstruction,
    Sequence,
};
pub use train::{sequences_from_records, train, train_sequences, Adam, TrainReport};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    Arch(String),
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("mask must keep at least one modality")]
    EmptyMask,
    #[error("unknown modality {0:?}")]
    UnknownModality(String),
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },
    #[error("checkpoint header: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), NetError> {
    if expected == found {
        Ok(())
    } else {
        Err(NetError::Shape { what, expected, found })
    }
}

/// Layer sizes. Decoders mirror the encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub image_width: usize,
    pub image_height: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub img_feat: usize,
    pub audio_bins: usize,
    pub audio_hidden: usize,
    pub aud_feat: usize,
    pub motion_dim: usize,
    pub contract_dim: usize,
    pub lstm_hidden: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            image_width: 64,
            image_height: 64,
            conv1_channels: 8,
            conv2_channels: 16,
            kernel: 5,
            stride: 2,
            img_feat: 32,
            audio_bins: crate::audio::SPEC_BINS,
            audio_hidden: 64,
            aud_feat: 32,
            motion_dim: crate::record::JOINT_COUNT,
            contract_dim: 64,
            lstm_hidden: 64,
        }
    }
}

impl ArchSpec {
    /// Small enough for exhaustive finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            image_width: 17,
            image_height: 17,
            conv1_channels: 2,
            conv2_channels: 3,
            kernel: 5,
            stride: 2,
            img_feat: 4,
            audio_bins: 8,
            audio_hidden: 6,
            aud_feat: 4,
            motion_dim: 6,
            contract_dim: 8,
            lstm_hidden: 5,
        }
    }

    pub fn fused_dim(&self) -> usize {
        self.img_feat + self.aud_feat + self.motion_dim
    }

    pub fn pixels(&self) -> usize {
        self.image_width * self.image_height
    }

    /// Spatial size `(h, w)` after the first and second convolution.
    pub fn conv_dims(&self) -> [(usize, usize); 2] {
        let h1 = conv_out(self.image_height, self.kernel, self.stride);
        let w1 = conv_out(self.image_width, self.kernel, self.stride);
        [
            (h1, w1),
            (conv_out(h1, self.kernel, self.stride), conv_out(w1, self.kernel, self.stride)),
        ]
    }

    /// Length of the flattened second conv map.
    pub fn flat_dim(&self) -> usize {
        let [_, (h2, w2)] = self.conv_dims();
        h2 * w2 * self.conv2_channels
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let sizes = [
            self.image_width,
            self.image_height,
            self.conv1_channels,
            self.conv2_channels,
            self.kernel,
            self.stride,
            self.img_feat,
            self.audio_bins,
            self.audio_hidden,
            self.aud_feat,
            self.motion_dim,
            self.contract_dim,
            self.lstm_hidden,
        ];
        if sizes.iter().any(|s| *s == 0) {
            return Err(NetError::Arch("every size must be positive".into()));
        }
        if self.flat_dim() == 0 {
            return Err(NetError::Arch(format!(
                "{}x{} image too small for two {}x{} stride-{} convolutions",
                self.image_width, self.image_height, self.kernel, self.kernel, self.stride
            )));
        }
        Ok(())
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Weight of the contractive penalty.
    pub lambda: f64,
    /// Per-modality dropout probability.
    pub drop_p: f64,
    pub seq_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lambda: 1e-4,
            drop_p: 0.3,
            seq_len: 50,
            batch_size: 8,
            epochs: 100,
            seed: 0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::Hyper(m.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("contractive weight must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.drop_p) {
            return bad("dropout probability must lie in [0, 1)");
        }
        if self.seq_len == 0 || self.batch_size == 0 {
            return bad("sequence length and batch size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Audio,
    Motion,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Image, Modality::Audio, Modality::Motion];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Audio => "audio",
            Modality::Motion => "motion",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "image" | "vision" => Ok(Modality::Image),
            "audio" => Ok(Modality::Audio),
            "motion" => Ok(Modality::Motion),
            other => Err(NetError::UnknownModality(other.to_owned())),
        }
    }
}

/// Keep flags of one sequence; a dropped modality is fed as zeros but is
/// still a reconstruction target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModalityMask {
    pub image: bool,
    pub audio: bool,
    pub motion: bool,
}

impl Default for ModalityMask {
    fn default() -> Self {
        Self::KEEP_ALL
    }
}

impl ModalityMask {
    pub const KEEP_ALL: ModalityMask = ModalityMask { image: true, audio: true, motion: true };

    /// Mask that drops exactly the listed modalities.
    pub fn dropping(dropped: &[Modality]) -> Self {
        let mut m = Self::KEEP_ALL;
        for d in dropped {
            match d {
                Modality::Image => m.image = false,
                Modality::Audio => m.audio = false,
                Modality::Motion => m.motion = false,
            }
        }
        m
    }

    /// Parses a comma-separated list of dropped modalities; the result must
    /// keep at least one.
    pub fn parse_dropped(text: &str) -> Result<Self, NetError> {
        let dropped = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty() && *s != "none")
            .map(str::parse)
            .collect::<Result<Vec<Modality>, _>>()?;
        let mask = Self::dropping(&dropped);
        if mask.is_valid() {
            Ok(mask)
        } else {
            Err(NetError::EmptyMask)
        }
    }

    pub fn keeps(&self, m: Modality) -> bool {
        match m {
            Modality::Image => self.image,
            Modality::Audio => self.audio,
            Modality::Motion => self.motion,
        }
    }

    pub fn dropped(&self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|m| !self.keeps(*m)).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.image || self.audio || self.motion
    }

    /// The six masks that drop at least one and keep at least one modality.
    pub fn retrieval_set() -> Vec<ModalityMask> {
        (1u8..7)
            .map(|bits| ModalityMask {
                image: bits & 1 == 0,
                audio: bits & 2 == 0,
                motion: bits & 4 == 0,
            })
            .collect()
    }

    /// `"audio,motion"`-style label of the dropped set (`"none"` if empty).
    pub fn label(&self) -> String {
        let d = self.dropped();
        if d.is_empty() {
            "none".into()
        } else {
            d.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
        }
    }
}

fn dropout_rng(seed: u64, sequence_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::audio::splitmix64(seed ^ crate::audio::splitmix64(sequence_index)))
}

/// One unconditioned draw of drop flags `[image, audio, motion]`.
fn draw_drops<R: Rng>(rng: &mut R, p: f64) -> [bool; 3] {
    [rng.random::<f64>() < p, rng.random::<f64>() < p, rng.random::<f64>() < p]
}

/// The first, pre-resample drop draw of a sequence; its marginals are
/// exactly `p`.
pub fn raw_dropout_draw(seed: u64, p: f64, sequence_index: u64) -> [bool; 3] {
    draw_drops(&mut dropout_rng(seed, sequence_index), p)
}

/// Independent per-modality dropout with probability `p`, redrawn until at
/// least one modality survives. Deterministic per `(seed, sequence_index)`.
pub fn apply_modality_dropout(seed: u64, p: f64, sequence_index: u64) -> ModalityMask {
    let mut rng = dropout_rng(seed, sequence_index);
    loop {
        let [di, da, dm] = draw_drops(&mut rng, p);
        let mask = ModalityMask { image: !di, audio: !da, motion: !dm };
        if mask.is_valid() {
            return mask;
        }
    }
}
