//! Mini-batch BPTT training with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{Batch, FusionModel, Sequence};
use super::{apply_modality_dropout, check_len, Hyper, NetError};
use crate::record::MultimodalRecord;

/// Adam with bias correction over the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, hyper: &Hyper) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: hyper.lr,
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            eps: hyper.eps,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    /// Mean training loss of every epoch, including the dropout noise.
    pub loss_history: Vec<f64>,
    pub sequences: usize,
    pub seq_len: usize,
    pub updates: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (i, l) in self.loss_history.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, l));
        }
        out
    }
}

/// Cuts every record into non-overlapping windows of `seq_len` frames
/// (shortened to the shortest record if needed). All records must share
/// their sensor shapes.
pub fn sequences_from_records(records: &[MultimodalRecord], seq_len: usize) -> Result<Vec<Sequence>, NetError> {
    let first = records.first().ok_or(NetError::EmptyDataset)?;
    let shortest = records.iter().map(|r| r.frames.len()).min().unwrap_or(0);
    let len = seq_len.min(shortest);
    if len == 0 {
        return Err(NetError::EmptyDataset);
    }
    let mut out = Vec::new();
    for rec in records {
        check_len("image pixels", first.meta.pixels(), rec.meta.pixels())?;
        check_len("samples per frame", first.meta.samples_per_frame(), rec.meta.samples_per_frame())?;
        check_len("joint count", first.meta.joint_count as usize, rec.meta.joint_count as usize)?;
        let mut start = 0;
        while start + len <= rec.frames.len() {
            out.push(Sequence::from_record(rec, start, len)?);
            start += len;
        }
    }
    Ok(out)
}

pub fn train(model: &mut FusionModel, records: &[MultimodalRecord], hyper: &Hyper) -> Result<TrainReport, NetError> {
    let seqs = sequences_from_records(records, hyper.seq_len)?;
    train_sequences(model, &seqs, hyper, |_, _| {})
}

/// Trains in place. Each epoch shuffles the sequences with a seeded RNG and
/// draws one dropout mask per sequence from `(seed, epoch·count + index)`;
/// `progress` is called with `(epoch, mean loss)` after every epoch.
pub fn train_sequences(
    model: &mut FusionModel,
    seqs: &[Sequence],
    hyper: &Hyper,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainReport, NetError> {
    hyper.validate()?;
    if seqs.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let arch = *model.arch();
    for s in seqs {
        check_len("sequence length", seqs[0].len, s.len)?;
        s.check(&arch)?;
    }
    let mut adam = Adam::new(model.param_count(), hyper);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut updates = 0;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let members: Vec<&Sequence> = chunk.iter().map(|i| &seqs[*i]).collect();
            let masks: Vec<_> = chunk
                .iter()
                .map(|i| apply_modality_dropout(hyper.seed, hyper.drop_p, (epoch * seqs.len() + i) as u64))
                .collect();
            let batch = Batch::from_sequences(&members, &arch)?;
            let (parts, grad) = model.loss_and_gradient(&batch, &masks, hyper.lambda)?;
            adam.step(model.params_mut(), &grad);
            total += parts.total * chunk.len() as f64;
            updates += 1;
        }
        let mean = total / seqs.len() as f64;
        history.push(mean);
        progress(epoch + 1, mean);
    }
    Ok(TrainReport {
        loss_history: history,
        sequences: seqs.len(),
        seq_len: seqs[0].len,
        updates,
    })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::super::ArchSpec;
    use super::*;

    fn random_seq(arch: &ArchSpec, len: usize, seed: u64) -> Sequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Sequence {
            len,
            image: (0..len * arch.pixels()).map(|_| rng.random::<f64>()).collect(),
            audio: (0..len * arch.audio_bins).map(|_| rng.random::<f64>() * 2.0).collect(),
            motion: (0..len * arch.motion_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn overfits_one_sequence() {
        let arch = ArchSpec::tiny();
        let mut model = FusionModel::init_params(arch, 1).unwrap();
        let seqs = vec![random_seq(&arch, 5, 3)];
        let hyper = Hyper { lr: 1e-2, drop_p: 0.0, epochs: 200, batch_size: 1, ..Hyper::default() };
        let report = train_sequences(&mut model, &seqs, &hyper, |_, _| {}).unwrap();
        let first = report.loss_history[0];
        let last = report.final_loss().unwrap();
        assert_eq!(report.updates, 200);
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let arch = ArchSpec::tiny();
        let mut model = FusionModel::init_params(arch, 1).unwrap();
        let before = model.clone();
        let seqs = vec![random_seq(&arch, 4, 3), random_seq(&arch, 4, 4)];
        let hyper = Hyper { lr: 0.0, drop_p: 0.0, epochs: 5, ..Hyper::default() };
        let report = train_sequences(&mut model, &seqs, &hyper, |_, _| {}).unwrap();
        assert_eq!(model, before);
        assert!(report.loss_history.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn same_seed_same_history() {
        let arch = ArchSpec::tiny();
        let seqs: Vec<_> = (0..5).map(|i| random_seq(&arch, 4, i)).collect();
        let hyper = Hyper { epochs: 4, batch_size: 2, seed: 9, ..Hyper::default() };
        let run = || {
            let mut m = FusionModel::init_params(arch, 2).unwrap();
            let r = train_sequences(&mut m, &seqs, &hyper, |_, _| {}).unwrap();
            (m, r.loss_history)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let mut m = FusionModel::init_params(ArchSpec::tiny(), 2).unwrap();
        assert!(matches!(train_sequences(&mut m, &[], &Hyper::default(), |_, _| {}), Err(NetError::EmptyDataset)));
        assert!(matches!(train(&mut m, &[], &Hyper::default()), Err(NetError::EmptyDataset)));
    }
}
