//! Central finite-difference check of the analytic gradient on the tiny
//! preset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{Batch, FusionModel, Sequence};
use super::{ArchSpec, Modality, ModalityMask, NetError};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: &'static str,
    pub len: usize,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`.
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub lambda: f64,
    pub max_rel_error: f64,
    pub worst: &'static str,
    pub passed: bool,
    pub tensors: Vec<TensorCheck>,
}

/// Two random sequences of three frames; the second drops the image so
/// the masked path is exercised too.
fn fixture(arch: &ArchSpec, rng: &mut ChaCha8Rng) -> Result<(Batch, Vec<ModalityMask>), NetError> {
    let seqs: Vec<Sequence> = (0..2)
        .map(|_| Sequence {
            len: 3,
            image: (0..3 * arch.pixels()).map(|_| rng.random::<f64>()).collect(),
            audio: (0..3 * arch.audio_bins).map(|_| rng.random::<f64>() * 2.0).collect(),
            motion: (0..3 * arch.motion_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let batch = Batch::from_sequences(&seqs.iter().collect::<Vec<_>>(), arch)?;
    Ok((batch, vec![ModalityMask::KEEP_ALL, ModalityMask::dropping(&[Modality::Image])]))
}

/// Compares every parameter tensor's analytic gradient with central
/// differences. Biases are randomized so no unit sits at a ReLU kink.
pub fn gradient_check(seed: u64, lambda: f64) -> Result<GradCheckReport, NetError> {
    let arch = ArchSpec::tiny();
    let mut model = FusionModel::init_params(arch, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    for i in 0..model.layout().len() {
        if model.layout()[i].glorot_bound().is_none() {
            model.tensor_mut(i).iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
        }
    }
    let (batch, masks) = fixture(&arch, &mut rng)?;
    let (_, analytic) = model.loss_and_gradient(&batch, &masks, lambda)?;

    let mut tensors = Vec::new();
    for info in model.layout().to_vec() {
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for k in info.offset..info.offset + info.len {
            let orig = model.params()[k];
            model.params_mut()[k] = orig + GRADCHECK_STEP;
            let up = model.batch_loss(&batch, &masks, lambda)?.total;
            model.params_mut()[k] = orig - GRADCHECK_STEP;
            let down = model.batch_loss(&batch, &masks, lambda)?.total;
            model.params_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
            diff2 += (analytic[k] - numeric).powi(2);
            a2 += analytic[k].powi(2);
            n2 += numeric.powi(2);
        }
        let denom = a2.sqrt().max(n2.sqrt());
        tensors.push(TensorCheck {
            name: info.name,
            len: info.len,
            analytic_norm: a2.sqrt(),
            numeric_norm: n2.sqrt(),
            rel_error: if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 },
        });
    }
    let worst = tensors
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .expect("model has tensors");
    Ok(GradCheckReport {
        lambda,
        max_rel_error: worst.rel_error,
        worst: worst.name,
        passed: worst.rel_error <= GRADCHECK_TOLERANCE,
        tensors,
    })
}
