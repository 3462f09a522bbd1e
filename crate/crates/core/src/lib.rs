//! Synthetic two-arm drumming robot: tablature → minimum-jerk motion →
//! contacts → audio, vision and proprioception records, plus a
//! modality-dropout contractive LSTM autoencoder trained on those records
//! and the tooling to score its cross-modal reconstructions.

pub mod arm;
pub mod audio;
pub mod eval;
pub mod export;
pub mod net;
pub mod pipeline;
pub mod planner;
pub mod record;
pub mod scene;
pub mod tab;
pub mod vision;
pub mod world;

pub use arm::{ArmConfig, Handedness, JointState};
pub use audio::{AudioClock, TimbreSpec};
pub use net::{ArchSpec, FusionModel, Hyper, Modality, ModalityMask};
pub use pipeline::{generate, generate_from_text, random_record, DatasetParams, Generated};
pub use planner::{ArmId, MotionPrimitive, PlannerParams, Trajectory};
pub use record::{MultimodalRecord, RecordMeta};
pub use scene::SceneConfig;
pub use tab::{parse_tab, validate_tab, BeatEvent, DrumId, DrumTab};
pub use world::{ContactEvent, DrumKit, DrumPad};
