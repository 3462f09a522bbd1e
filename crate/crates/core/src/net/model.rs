use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::linalg::{add_bias, col2im, gemm, im2col, sigmoid, sum_rows, ConvGeom, Mat};
use super::{check_len, ArchSpec, ModalityMask, NetError};
use crate::record::MultimodalRecord;

// Tensor order; checkpoints store parameters in exactly this order.
pub(crate) const CONV1_W: usize = 0;
pub(crate) const CONV1_B: usize = 1;
pub(crate) const CONV2_W: usize = 2;
pub(crate) const CONV2_B: usize = 3;
pub(crate) const IMG_FC_W: usize = 4;
pub(crate) const IMG_FC_B: usize = 5;
pub(crate) const AUD_FC1_W: usize = 6;
pub(crate) const AUD_FC1_B: usize = 7;
pub(crate) const AUD_FC2_W: usize = 8;
pub(crate) const AUD_FC2_B: usize = 9;
pub(crate) const CONTRACT_W: usize = 10;
pub(crate) const CONTRACT_B: usize = 11;
pub(crate) const LSTM_WX: usize = 12;
pub(crate) const LSTM_WH: usize = 13;
pub(crate) const LSTM_B: usize = 14;
pub(crate) const OUT_W: usize = 15;
pub(crate) const OUT_B: usize = 16;
pub(crate) const DEC_IMG_FC_W: usize = 17;
pub(crate) const DEC_IMG_FC_B: usize = 18;
pub(crate) const DECONV2_W: usize = 19;
pub(crate) const DECONV2_B: usize = 20;
pub(crate) const DECONV1_W: usize = 21;
pub(crate) const DECONV1_B: usize = 22;
pub(crate) const DEC_AUD_FC1_W: usize = 23;
pub(crate) const DEC_AUD_FC1_B: usize = 24;
pub(crate) const DEC_AUD_FC2_W: usize = 25;
pub(crate) const DEC_AUD_FC2_B: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    Zero,
    /// Zero except the forget-gate block, which starts at 1.
    LstmBias { hidden: usize },
}

/// One parameter tensor inside the flat parameter vector. Weights are
/// stored `[in, out]` row-major; conv kernels as `[k·k·c_in, c_out]` with
/// the patch laid out `(ky, kx, c)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamInfo {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
    #[serde(skip)]
    init: Init,
}

impl ParamInfo {
    /// Glorot bound, or `None` for tensors that start at constants.
    pub fn glorot_bound(&self) -> Option<f64> {
        match self.init {
            Init::Glorot { fan_in, fan_out } => Some((6.0 / (fan_in + fan_out) as f64).sqrt()),
            _ => None,
        }
    }
}

fn layout(a: &ArchSpec) -> Vec<ParamInfo> {
    let kk = a.kernel * a.kernel;
    let (c1, c2) = (a.conv1_channels, a.conv2_channels);
    let flat = a.flat_dim();
    let fd = a.fused_dim();
    let g4 = 4 * a.lstm_hidden;
    let w = |name, fan_in, fan_out, shape: Vec<usize>| (name, shape, Init::Glorot { fan_in, fan_out });
    let b = |name, n: usize| (name, vec![n], Init::Zero);
    let specs: Vec<(&'static str, Vec<usize>, Init)> = vec![
        w("enc.conv1.w", kk, kk * c1, vec![kk, c1]),
        b("enc.conv1.b", c1),
        w("enc.conv2.w", kk * c1, kk * c2, vec![kk * c1, c2]),
        b("enc.conv2.b", c2),
        w("enc.img_fc.w", flat, a.img_feat, vec![flat, a.img_feat]),
        b("enc.img_fc.b", a.img_feat),
        w("enc.aud_fc1.w", a.audio_bins, a.audio_hidden, vec![a.audio_bins, a.audio_hidden]),
        b("enc.aud_fc1.b", a.audio_hidden),
        w("enc.aud_fc2.w", a.audio_hidden, a.aud_feat, vec![a.audio_hidden, a.aud_feat]),
        b("enc.aud_fc2.b", a.aud_feat),
        w("core.contract.w", fd, a.contract_dim, vec![fd, a.contract_dim]),
        b("core.contract.b", a.contract_dim),
        w("core.lstm.wx", a.contract_dim, g4, vec![a.contract_dim, g4]),
        w("core.lstm.wh", a.lstm_hidden, g4, vec![a.lstm_hidden, g4]),
        ("core.lstm.b", vec![g4], Init::LstmBias { hidden: a.lstm_hidden }),
        w("core.out.w", a.lstm_hidden, fd, vec![a.lstm_hidden, fd]),
        b("core.out.b", fd),
        w("dec.img_fc.w", a.img_feat, flat, vec![a.img_feat, flat]),
        b("dec.img_fc.b", flat),
        w("dec.deconv2.w", kk * c2, kk * c1, vec![kk * c1, c2]),
        b("dec.deconv2.b", c1),
        w("dec.deconv1.w", kk * c1, kk, vec![kk, c1]),
        b("dec.deconv1.b", 1),
        w("dec.aud_fc1.w", a.aud_feat, a.audio_hidden, vec![a.aud_feat, a.audio_hidden]),
        b("dec.aud_fc1.b", a.audio_hidden),
        w("dec.aud_fc2.w", a.audio_hidden, a.audio_bins, vec![a.audio_hidden, a.audio_bins]),
        b("dec.aud_fc2.b", a.audio_bins),
    ];
    let mut offset = 0;
    specs
        .into_iter()
        .map(|(name, shape, init)| {
            let len = shape.iter().product();
            let info = ParamInfo { name, shape, offset, len, init };
            offset += len;
            info
        })
        .collect()
}

/// A run of consecutive frames, in network units: pixels in `[0, 1]`,
/// log-magnitude spectra, joint angles divided by π.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub len: usize,
    pub image: Vec<f64>,
    pub audio: Vec<f64>,
    pub motion: Vec<f64>,
}

impl Sequence {
    pub fn from_record(rec: &MultimodalRecord, start: usize, len: usize) -> Result<Self, NetError> {
        if start + len > rec.frames.len() {
            return Err(NetError::Shape { what: "record frames", expected: start + len, found: rec.frames.len() });
        }
        let frames = &rec.frames[start..start + len];
        Ok(Self {
            len,
            image: frames.iter().flat_map(|f| f.image.iter().map(|p| f64::from(*p) / 255.0)).collect(),
            audio: frames.iter().flat_map(|f| f.spec.iter().map(|v| f64::from(*v))).collect(),
            motion: frames.iter().flat_map(|f| f.q.iter().map(|v| f64::from(*v) / PI)).collect(),
        })
    }

    pub fn check(&self, arch: &ArchSpec) -> Result<(), NetError> {
        check_len("image", self.len * arch.pixels(), self.image.len())?;
        check_len("audio", self.len * arch.audio_bins, self.audio.len())?;
        check_len("motion", self.len * arch.motion_dim, self.motion.len())
    }
}

/// Sequences of equal length interleaved time-major: row `t·seqs + b` is
/// frame `t` of sequence `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub steps: usize,
    pub seqs: usize,
    pub image: Vec<f64>,
    pub audio: Vec<f64>,
    pub motion: Vec<f64>,
}

impl Batch {
    pub fn from_sequences(seqs: &[&Sequence], arch: &ArchSpec) -> Result<Self, NetError> {
        let first = seqs.first().ok_or(NetError::EmptyDataset)?;
        let steps = first.len;
        if steps == 0 {
            return Err(NetError::EmptyDataset);
        }
        for s in seqs {
            check_len("sequence length", steps, s.len)?;
            s.check(arch)?;
        }
        let interleave = |dim: usize, get: fn(&Sequence) -> &[f64]| {
            let mut out = Vec::with_capacity(steps * seqs.len() * dim);
            for t in 0..steps {
                for s in seqs {
                    out.extend_from_slice(&get(s)[t * dim..(t + 1) * dim]);
                }
            }
            out
        };
        Ok(Self {
            steps,
            seqs: seqs.len(),
            image: interleave(arch.pixels(), |s| &s.image),
            audio: interleave(arch.audio_bins, |s| &s.audio),
            motion: interleave(arch.motion_dim, |s| &s.motion),
        })
    }

    pub fn rows(&self) -> usize {
        self.steps * self.seqs
    }

    fn check(&self, arch: &ArchSpec) -> Result<(), NetError> {
        let n = self.rows();
        if n == 0 {
            return Err(NetError::EmptyDataset);
        }
        check_len("image", n * arch.pixels(), self.image.len())?;
        check_len("audio", n * arch.audio_bins, self.audio.len())?;
        check_len("motion", n * arch.motion_dim, self.motion.len())
    }

    /// Frames of sequence `b`, back in sequence order.
    pub fn sequence(&self, b: usize) -> Sequence {
        let pick = |data: &[f64]| {
            let dim = data.len() / self.rows();
            (0..self.steps)
                .flat_map(|t| data[(t * self.seqs + b) * dim..(t * self.seqs + b + 1) * dim].iter().copied())
                .collect()
        };
        Sequence {
            len: self.steps,
            image: pick(&self.image),
            audio: pick(&self.audio),
            motion: pick(&self.motion),
        }
    }
}

/// Decoded outputs of a batch in the same row layout as the input, plus
/// the contractive penalty averaged over all frames.
pub type Reconstruction = Batch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParts {
    pub image: f64,
    pub audio: f64,
    pub motion: f64,
    pub penalty: f64,
    pub total: f64,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Equal-weight tri-modal MSE plus the weighted contractive penalty.
pub fn loss(recon: &Reconstruction, targets: &Batch, penalty: f64, lambda: f64) -> LossParts {
    let image = mse(&recon.image, &targets.image);
    let audio = mse(&recon.audio, &targets.audio);
    let motion = mse(&recon.motion, &targets.motion);
    LossParts {
        image,
        audio,
        motion,
        penalty,
        total: (image + audio + motion) / 3.0 + lambda * penalty,
    }
}

/// Hidden and cell state of the LSTM for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// Concatenates the unimodal features in the order image, audio, motion.
pub fn fuse(img: &[f64], aud: &[f64], motion: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.len() + aud.len() + motion.len());
    out.extend_from_slice(img);
    out.extend_from_slice(aud);
    out.extend_from_slice(motion);
    out
}

pub fn split_fused(x: &[f64], arch: &ArchSpec) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (a, rest) = x.split_at(arch.img_feat);
    let (b, c) = rest.split_at(arch.aud_feat);
    (a.to_vec(), b.to_vec(), c.to_vec())
}

/// `Σ_j (1 − h_j²)² ‖W_c[:, j]‖²` for one frame; `w_c` is `[in, hcon.len()]`.
pub fn contractive_penalty(hcon: &[f64], w_c: &[f64]) -> f64 {
    let m = hcon.len();
    let mut norms = vec![0.0; m];
    for row in w_c.chunks_exact(m) {
        for (s, w) in norms.iter_mut().zip(row) {
            *s += w * w;
        }
    }
    hcon.iter().zip(&norms).map(|(h, s)| (1.0 - h * h).powi(2) * s).sum()
}

// Convolutions run in chunks of frames to bound the unfolded buffers.
const CONV_CHUNK: usize = 32;

fn dense_forward(x: &[f64], n: usize, din: usize, dout: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n * dout];
    gemm(Mat::new(x, n, din), Mat::new(w, din, dout), 0.0, &mut y);
    add_bias(&mut y, b);
    y
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    x: &[f64],
    n: usize,
    din: usize,
    dout: usize,
    w: &[f64],
    dy: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    gemm(Mat::new(x, n, din).t(), Mat::new(dy, n, dout), 1.0, gw);
    sum_rows(dy, gb);
    want_dx.then(|| {
        let mut dx = vec![0.0; n * din];
        gemm(Mat::new(dy, n, dout), Mat::new(w, din, dout).t(), 0.0, &mut dx);
        dx
    })
}

fn conv_forward(g: &ConvGeom, w: &[f64], b: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let cout = b.len();
    let (pos, patch) = (g.out_positions(), g.patch());
    let mut y = vec![0.0; n * pos * cout];
    let mut cols = Vec::new();
    for start in (0..n).step_by(CONV_CHUNK) {
        let m = CONV_CHUNK.min(n - start);
        cols.resize(m * pos * patch, 0.0);
        im2col(g, m, &x[start * g.in_len()..(start + m) * g.in_len()], &mut cols);
        gemm(
            Mat::new(&cols, m * pos, patch),
            Mat::new(w, patch, cout),
            0.0,
            &mut y[start * pos * cout..(start + m) * pos * cout],
        );
    }
    add_bias(&mut y, b);
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    g: &ConvGeom,
    w: &[f64],
    n: usize,
    x: &[f64],
    dy: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    let cout = gb.len();
    let (pos, patch) = (g.out_positions(), g.patch());
    sum_rows(dy, gb);
    let mut dx = want_dx.then(|| vec![0.0; n * g.in_len()]);
    let mut cols = Vec::new();
    let mut dcols = Vec::new();
    for start in (0..n).step_by(CONV_CHUNK) {
        let m = CONV_CHUNK.min(n - start);
        let rows = m * pos;
        let dy_c = &dy[start * pos * cout..(start + m) * pos * cout];
        cols.resize(rows * patch, 0.0);
        im2col(g, m, &x[start * g.in_len()..(start + m) * g.in_len()], &mut cols);
        gemm(Mat::new(&cols, rows, patch).t(), Mat::new(dy_c, rows, cout), 1.0, gw);
        if let Some(dx) = dx.as_mut() {
            dcols.resize(rows * patch, 0.0);
            gemm(Mat::new(dy_c, rows, cout), Mat::new(w, patch, cout).t(), 0.0, &mut dcols);
            col2im(g, m, &dcols, &mut dx[start * g.in_len()..(start + m) * g.in_len()]);
        }
    }
    dx
}

/// Transposed convolution: the exact adjoint of the conv with geometry `g`,
/// mapping `[n, out_h, out_w, c_in]` to `[n, in_h, in_w, g.channels]`.
fn deconv_forward(g: &ConvGeom, w: &[f64], b: &[f64], n: usize, z: &[f64]) -> Vec<f64> {
    let (pos, patch) = (g.out_positions(), g.patch());
    let cin = w.len() / patch;
    let mut y = vec![0.0; n * g.in_len()];
    let mut cols = Vec::new();
    for start in (0..n).step_by(CONV_CHUNK) {
        let m = CONV_CHUNK.min(n - start);
        let rows = m * pos;
        cols.resize(rows * patch, 0.0);
        gemm(
            Mat::new(&z[start * pos * cin..(start + m) * pos * cin], rows, cin),
            Mat::new(w, patch, cin).t(),
            0.0,
            &mut cols,
        );
        col2im(g, m, &cols, &mut y[start * g.in_len()..(start + m) * g.in_len()]);
    }
    add_bias(&mut y, b);
    y
}

fn deconv_backward(g: &ConvGeom, w: &[f64], n: usize, z: &[f64], dy: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
    let (pos, patch) = (g.out_positions(), g.patch());
    let cin = w.len() / patch;
    sum_rows(dy, gb);
    let mut dz = vec![0.0; n * pos * cin];
    let mut dcols = Vec::new();
    for start in (0..n).step_by(CONV_CHUNK) {
        let m = CONV_CHUNK.min(n - start);
        let rows = m * pos;
        let z_c = &z[start * pos * cin..(start + m) * pos * cin];
        dcols.resize(rows * patch, 0.0);
        im2col(g, m, &dy[start * g.in_len()..(start + m) * g.in_len()], &mut dcols);
        gemm(Mat::new(&dcols, rows, patch).t(), Mat::new(z_c, rows, cin), 1.0, gw);
        gemm(
            Mat::new(&dcols, rows, patch),
            Mat::new(w, patch, cin),
            0.0,
            &mut dz[start * pos * cin..(start + m) * pos * cin],
        );
    }
    dz
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Zeroes `d` wherever the ReLU output `a` was clamped.
fn relu_back(d: &mut [f64], a: &[f64]) {
    for (g, y) in d.iter_mut().zip(a) {
        if *y <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Copies the column block `[from, from + width)` of a row-major matrix.
fn columns(x: &[f64], cols: usize, from: usize, width: usize) -> Vec<f64> {
    x.chunks_exact(cols).flat_map(|r| r[from..from + width].iter().copied()).collect()
}

/// Activations kept for the backward pass.
struct Cache {
    x_img: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    x_aud: Vec<f64>,
    u1: Vec<f64>,
    fused: Vec<f64>,
    hcon: Vec<f64>,
    /// Activated gates `[i, f, g, o]` per row.
    gates: Vec<f64>,
    cells: Vec<f64>,
    hidden: Vec<f64>,
    z_img: Vec<f64>,
    z_aud: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    e1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    arch: ArchSpec,
    params: Vec<f64>,
    layout: Vec<ParamInfo>,
}

impl FusionModel {
    /// Glorot-uniform weights, zero biases, forget-gate bias 1.
    pub fn init_params(arch: ArchSpec, seed: u64) -> Result<Self, NetError> {
        let mut model = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for info in &model.layout {
            let t = &mut model.params[info.offset..info.offset + info.len];
            match info.init {
                Init::Glorot { .. } => {
                    let bound = info.glorot_bound().expect("glorot tensor");
                    t.iter_mut().for_each(|v| *v = rng.random_range(-bound..=bound));
                }
                Init::Zero => {}
                Init::LstmBias { hidden } => t[hidden..2 * hidden].fill(1.0),
            }
        }
        Ok(model)
    }

    /// All parameters zero.
    pub fn zeros(arch: ArchSpec) -> Result<Self, NetError> {
        arch.validate()?;
        let layout = layout(&arch);
        let n = layout.last().map_or(0, |l| l.offset + l.len);
        Ok(Self { arch, params: vec![0.0; n], layout })
    }

    pub fn from_params(arch: ArchSpec, params: Vec<f64>) -> Result<Self, NetError> {
        let mut model = Self::zeros(arch)?;
        check_len("parameters", model.params.len(), params.len())?;
        model.params = params;
        Ok(model)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn layout(&self) -> &[ParamInfo] {
        &self.layout
    }

    pub fn tensor(&self, i: usize) -> &[f64] {
        let l = &self.layout[i];
        &self.params[l.offset..l.offset + l.len]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        let l = &self.layout[i];
        &mut self.params[l.offset..l.offset + l.len]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }

    fn geoms(&self) -> (ConvGeom, ConvGeom) {
        let a = &self.arch;
        let [(h1, w1), _] = a.conv_dims();
        (
            ConvGeom::new(a.image_height, a.image_width, 1, a.kernel, a.stride),
            ConvGeom::new(h1, w1, a.conv1_channels, a.kernel, a.stride),
        )
    }

    fn encode_image_rows(&self, x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (g1, g2) = self.geoms();
        let mut a1 = conv_forward(&g1, self.tensor(CONV1_W), self.tensor(CONV1_B), n, x);
        relu(&mut a1);
        let mut a2 = conv_forward(&g2, self.tensor(CONV2_W), self.tensor(CONV2_B), n, &a1);
        relu(&mut a2);
        let f = dense_forward(&a2, n, self.arch.flat_dim(), self.arch.img_feat, self.tensor(IMG_FC_W), self.tensor(IMG_FC_B));
        (a1, a2, f)
    }

    fn encode_audio_rows(&self, x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
        let a = &self.arch;
        let mut u1 = dense_forward(x, n, a.audio_bins, a.audio_hidden, self.tensor(AUD_FC1_W), self.tensor(AUD_FC1_B));
        relu(&mut u1);
        let f = dense_forward(&u1, n, a.audio_hidden, a.aud_feat, self.tensor(AUD_FC2_W), self.tensor(AUD_FC2_B));
        (u1, f)
    }

    /// Image feature of one frame (`pixels` row-major, values in `[0, 1]`).
    pub fn encode_image(&self, pixels: &[f64]) -> Result<Vec<f64>, NetError> {
        check_len("image", self.arch.pixels(), pixels.len())?;
        Ok(self.encode_image_rows(pixels, 1).2)
    }

    /// Audio feature of one spectrum frame.
    pub fn encode_audio(&self, spec: &[f64]) -> Result<Vec<f64>, NetError> {
        check_len("audio", self.arch.audio_bins, spec.len())?;
        Ok(self.encode_audio_rows(spec, 1).1)
    }

    /// LSTM gates from pre-activations and the previous cell; writes the
    /// activated gates back and returns `(c, h)` per unit.
    fn lstm_cell(hh: usize, gates: &mut [f64], c_prev: &[f64], c: &mut [f64], h: &mut [f64]) {
        for j in 0..hh {
            let i = sigmoid(gates[j]);
            let f = sigmoid(gates[hh + j]);
            let g = gates[2 * hh + j].tanh();
            let o = sigmoid(gates[3 * hh + j]);
            gates[j] = i;
            gates[hh + j] = f;
            gates[2 * hh + j] = g;
            gates[3 * hh + j] = o;
            c[j] = f * c_prev[j] + i * g;
            h[j] = o * c[j].tanh();
        }
    }

    /// One recurrent step on a fused vector: returns the new state, the
    /// reconstructed fused vector and the contraction code.
    pub fn core_step(&self, state: &LstmState, x: &[f64]) -> Result<(LstmState, Vec<f64>, Vec<f64>), NetError> {
        let a = &self.arch;
        let hh = a.lstm_hidden;
        check_len("fused input", a.fused_dim(), x.len())?;
        check_len("hidden state", hh, state.h.len())?;
        check_len("cell state", hh, state.c.len())?;
        let mut hcon = dense_forward(x, 1, a.fused_dim(), a.contract_dim, self.tensor(CONTRACT_W), self.tensor(CONTRACT_B));
        hcon.iter_mut().for_each(|v| *v = v.tanh());
        let mut gates = dense_forward(&hcon, 1, a.contract_dim, 4 * hh, self.tensor(LSTM_WX), self.tensor(LSTM_B));
        gemm(Mat::new(&state.h, 1, hh), Mat::new(self.tensor(LSTM_WH), hh, 4 * hh), 1.0, &mut gates);
        let mut next = LstmState::zeros(hh);
        Self::lstm_cell(hh, &mut gates, &state.c, &mut next.c, &mut next.h);
        let xhat = dense_forward(&next.h, 1, hh, a.fused_dim(), self.tensor(OUT_W), self.tensor(OUT_B));
        Ok((next, xhat, hcon))
    }

    fn forward_cached(&self, batch: &Batch, masks: &[ModalityMask]) -> Result<(Reconstruction, f64, Cache), NetError> {
        let a = &self.arch;
        batch.check(a)?;
        check_len("masks", batch.seqs, masks.len())?;
        if masks.iter().any(|m| !m.is_valid()) {
            return Err(NetError::EmptyMask);
        }
        let (steps, bsz, n) = (batch.steps, batch.seqs, batch.rows());
        let (px, bins, md, fd, cd, hh) = (a.pixels(), a.audio_bins, a.motion_dim, a.fused_dim(), a.contract_dim, a.lstm_hidden);
        let g4 = 4 * hh;

        // Dropped modalities are zeroed before encoding; targets stay intact.
        let masked = |data: &[f64], dim: usize, keep: fn(&ModalityMask) -> bool| {
            let mut x = data.to_vec();
            for (r, row) in x.chunks_exact_mut(dim).enumerate() {
                if !keep(&masks[r % bsz]) {
                    row.fill(0.0);
                }
            }
            x
        };
        let x_img = masked(&batch.image, px, |m| m.image);
        let x_aud = masked(&batch.audio, bins, |m| m.audio);
        let x_mot = masked(&batch.motion, md, |m| m.motion);

        let (a1, a2, f_img) = self.encode_image_rows(&x_img, n);
        let (u1, f_aud) = self.encode_audio_rows(&x_aud, n);
        let mut fused = Vec::with_capacity(n * fd);
        for r in 0..n {
            fused.extend_from_slice(&f_img[r * a.img_feat..(r + 1) * a.img_feat]);
            fused.extend_from_slice(&f_aud[r * a.aud_feat..(r + 1) * a.aud_feat]);
            fused.extend_from_slice(&x_mot[r * md..(r + 1) * md]);
        }

        let mut hcon = dense_forward(&fused, n, fd, cd, self.tensor(CONTRACT_W), self.tensor(CONTRACT_B));
        hcon.iter_mut().for_each(|v| *v = v.tanh());
        let penalty = hcon.chunks_exact(cd).map(|h| contractive_penalty(h, self.tensor(CONTRACT_W))).sum::<f64>() / n as f64;

        let mut gates = dense_forward(&hcon, n, cd, g4, self.tensor(LSTM_WX), self.tensor(LSTM_B));
        let mut cells = vec![0.0; n * hh];
        let mut hidden = vec![0.0; n * hh];
        let zeros = vec![0.0; hh];
        for t in 0..steps {
            let rows = t * bsz..(t + 1) * bsz;
            if t > 0 {
                let (prev, _) = hidden.split_at(t * bsz * hh);
                gemm(
                    Mat::new(&prev[(t - 1) * bsz * hh..], bsz, hh),
                    Mat::new(self.tensor(LSTM_WH), hh, g4),
                    1.0,
                    &mut gates[rows.start * g4..rows.end * g4],
                );
            }
            for r in rows {
                let c_prev = if t > 0 { cells[(r - bsz) * hh..(r - bsz + 1) * hh].to_vec() } else { zeros.clone() };
                Self::lstm_cell(
                    hh,
                    &mut gates[r * g4..(r + 1) * g4],
                    &c_prev,
                    &mut cells[r * hh..(r + 1) * hh],
                    &mut hidden[r * hh..(r + 1) * hh],
                );
            }
        }
        let xhat = dense_forward(&hidden, n, hh, fd, self.tensor(OUT_W), self.tensor(OUT_B));

        let (g1, g2) = self.geoms();
        let z_img = columns(&xhat, fd, 0, a.img_feat);
        let z_aud = columns(&xhat, fd, a.img_feat, a.aud_feat);
        let motion = columns(&xhat, fd, a.img_feat + a.aud_feat, md);
        let mut d1 = dense_forward(&z_img, n, a.img_feat, a.flat_dim(), self.tensor(DEC_IMG_FC_W), self.tensor(DEC_IMG_FC_B));
        relu(&mut d1);
        let mut d2 = deconv_forward(&g2, self.tensor(DECONV2_W), self.tensor(DECONV2_B), n, &d1);
        relu(&mut d2);
        let mut image = deconv_forward(&g1, self.tensor(DECONV1_W), self.tensor(DECONV1_B), n, &d2);
        image.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut e1 = dense_forward(&z_aud, n, a.aud_feat, a.audio_hidden, self.tensor(DEC_AUD_FC1_W), self.tensor(DEC_AUD_FC1_B));
        relu(&mut e1);
        let audio = dense_forward(&e1, n, a.audio_hidden, bins, self.tensor(DEC_AUD_FC2_W), self.tensor(DEC_AUD_FC2_B));

        let recon = Batch { steps, seqs: bsz, image, audio, motion };
        let cache = Cache {
            x_img,
            a1,
            a2,
            x_aud,
            u1,
            fused,
            hcon,
            gates,
            cells,
            hidden,
            z_img,
            z_aud,
            d1,
            d2,
            e1,
        };
        Ok((recon, penalty, cache))
    }

    /// Reconstructions of all three modalities and the mean contractive
    /// penalty, with the masked modalities fed as zeros.
    pub fn forward(&self, batch: &Batch, masks: &[ModalityMask]) -> Result<(Reconstruction, f64), NetError> {
        let (recon, penalty, _) = self.forward_cached(batch, masks)?;
        Ok((recon, penalty))
    }

    /// Single-sequence convenience wrapper around [`FusionModel::forward`].
    pub fn forward_sequence(&self, seq: &Sequence, mask: ModalityMask) -> Result<(Sequence, f64), NetError> {
        let batch = Batch::from_sequences(&[seq], &self.arch)?;
        let (recon, penalty) = self.forward(&batch, &[mask])?;
        Ok((recon.sequence(0), penalty))
    }

    pub fn batch_loss(&self, batch: &Batch, masks: &[ModalityMask], lambda: f64) -> Result<LossParts, NetError> {
        let (recon, penalty) = self.forward(batch, masks)?;
        Ok(loss(&recon, batch, penalty, lambda))
    }

    /// Loss and its exact gradient (flat, in parameter order), by reverse
    /// mode through the decoders, the unrolled LSTM, the contraction layer
    /// including its penalty, and the encoders.
    pub fn loss_and_gradient(&self, batch: &Batch, masks: &[ModalityMask], lambda: f64) -> Result<(LossParts, Vec<f64>), NetError> {
        let (recon, penalty, c) = self.forward_cached(batch, masks)?;
        let parts = loss(&recon, batch, penalty, lambda);
        let a = &self.arch;
        let (steps, bsz, n) = (batch.steps, batch.seqs, batch.rows());
        let (px, bins, md, fd, cd, hh) = (a.pixels(), a.audio_bins, a.motion_dim, a.fused_dim(), a.contract_dim, a.lstm_hidden);
        let g4 = 4 * hh;
        let mut gr: Vec<Vec<f64>> = self.layout.iter().map(|l| vec![0.0; l.len]).collect();
        let (g1, g2) = self.geoms();

        // Loss → decoder outputs.
        let scale = |dim: usize| 2.0 / (3.0 * (n * dim) as f64);
        let d_img: Vec<f64> = recon
            .image
            .iter()
            .zip(&batch.image)
            .map(|(y, t)| scale(px) * (y - t) * y * (1.0 - y))
            .collect();
        let d_aud: Vec<f64> = recon.audio.iter().zip(&batch.audio).map(|(y, t)| scale(bins) * (y - t)).collect();
        let d_mot: Vec<f64> = recon.motion.iter().zip(&batch.motion).map(|(y, t)| scale(md) * (y - t)).collect();

        // Audio decoder.
        let (w_slot, rest) = gr.split_at_mut(DEC_AUD_FC2_B);
        let mut de1 = dense_backward(
            &c.e1,
            n,
            a.audio_hidden,
            bins,
            self.tensor(DEC_AUD_FC2_W),
            &d_aud,
            &mut w_slot[DEC_AUD_FC2_W],
            &mut rest[0],
            true,
        )
        .expect("dx requested");
        relu_back(&mut de1, &c.e1);
        let (w_slot, rest) = gr.split_at_mut(DEC_AUD_FC1_B);
        let dz_aud = dense_backward(
            &c.z_aud,
            n,
            a.aud_feat,
            a.audio_hidden,
            self.tensor(DEC_AUD_FC1_W),
            &de1,
            &mut w_slot[DEC_AUD_FC1_W],
            &mut rest[0],
            true,
        )
        .expect("dx requested");

        // Image decoder.
        let (w_slot, rest) = gr.split_at_mut(DECONV1_B);
        let mut dd2 = deconv_backward(&g1, self.tensor(DECONV1_W), n, &c.d2, &d_img, &mut w_slot[DECONV1_W], &mut rest[0]);
        relu_back(&mut dd2, &c.d2);
        let (w_slot, rest) = gr.split_at_mut(DECONV2_B);
        let mut dd1 = deconv_backward(&g2, self.tensor(DECONV2_W), n, &c.d1, &dd2, &mut w_slot[DECONV2_W], &mut rest[0]);
        relu_back(&mut dd1, &c.d1);
        let (w_slot, rest) = gr.split_at_mut(DEC_IMG_FC_B);
        let dz_img = dense_backward(
            &c.z_img,
            n,
            a.img_feat,
            a.flat_dim(),
            self.tensor(DEC_IMG_FC_W),
            &dd1,
            &mut w_slot[DEC_IMG_FC_W],
            &mut rest[0],
            true,
        )
        .expect("dx requested");

        let mut dxhat = Vec::with_capacity(n * fd);
        for r in 0..n {
            dxhat.extend_from_slice(&dz_img[r * a.img_feat..(r + 1) * a.img_feat]);
            dxhat.extend_from_slice(&dz_aud[r * a.aud_feat..(r + 1) * a.aud_feat]);
            dxhat.extend_from_slice(&d_mot[r * md..(r + 1) * md]);
        }
        let (w_slot, rest) = gr.split_at_mut(OUT_B);
        let dh_out = dense_backward(&c.hidden, n, hh, fd, self.tensor(OUT_W), &dxhat, &mut w_slot[OUT_W], &mut rest[0], true)
            .expect("dx requested");

        // Backpropagation through time.
        let mut da = vec![0.0; n * g4];
        let mut dh_next = vec![0.0; bsz * hh];
        let mut dc_next = vec![0.0; bsz * hh];
        for t in (0..steps).rev() {
            for b in 0..bsz {
                let r = t * bsz + b;
                let gt = &c.gates[r * g4..(r + 1) * g4];
                for j in 0..hh {
                    let (i, f, g, o) = (gt[j], gt[hh + j], gt[2 * hh + j], gt[3 * hh + j]);
                    let cell = c.cells[r * hh + j];
                    let c_prev = if t > 0 { c.cells[(r - bsz) * hh + j] } else { 0.0 };
                    let tc = cell.tanh();
                    let dh = dh_out[r * hh + j] + dh_next[b * hh + j];
                    let dc = dc_next[b * hh + j] + dh * o * (1.0 - tc * tc);
                    let dr = &mut da[r * g4..(r + 1) * g4];
                    dr[j] = dc * g * i * (1.0 - i);
                    dr[hh + j] = dc * c_prev * f * (1.0 - f);
                    dr[2 * hh + j] = dc * i * (1.0 - g * g);
                    dr[3 * hh + j] = dh * tc * o * (1.0 - o);
                    dc_next[b * hh + j] = dc * f;
                }
            }
            if t > 0 {
                let da_t = &da[t * bsz * g4..(t + 1) * bsz * g4];
                let h_prev = &c.hidden[(t - 1) * bsz * hh..t * bsz * hh];
                gemm(Mat::new(da_t, bsz, g4), Mat::new(self.tensor(LSTM_WH), hh, g4).t(), 0.0, &mut dh_next);
                gemm(Mat::new(h_prev, bsz, hh).t(), Mat::new(da_t, bsz, g4), 1.0, &mut gr[LSTM_WH]);
            }
        }
        let (w_slot, rest) = gr.split_at_mut(LSTM_B);
        let dhcon = dense_backward(&c.hcon, n, cd, g4, self.tensor(LSTM_WX), &da, &mut w_slot[LSTM_WX], &mut rest[0], true)
            .expect("dx requested");

        // Contraction layer with the penalty's own gradient.
        let w_c = self.tensor(CONTRACT_W);
        let mut col_norms = vec![0.0; cd];
        let mut sat = vec![0.0; cd];
        for row in w_c.chunks_exact(cd) {
            for (s, w) in col_norms.iter_mut().zip(row) {
                *s += w * w;
            }
        }
        let mut dz = vec![0.0; n * cd];
        for r in 0..n {
            for j in 0..cd {
                let h = c.hcon[r * cd + j];
                let one = 1.0 - h * h;
                sat[j] += one * one;
                let dpen = -4.0 * h * one * col_norms[j] / n as f64;
                dz[r * cd + j] = (dhcon[r * cd + j] + lambda * dpen) * one;
            }
        }
        for (gw_row, w_row) in gr[CONTRACT_W].chunks_exact_mut(cd).zip(w_c.chunks_exact(cd)) {
            for j in 0..cd {
                gw_row[j] += lambda * 2.0 * w_row[j] * sat[j] / n as f64;
            }
        }
        let (w_slot, rest) = gr.split_at_mut(CONTRACT_B);
        let dfused = dense_backward(&c.fused, n, fd, cd, w_c, &dz, &mut w_slot[CONTRACT_W], &mut rest[0], true)
            .expect("dx requested");
        let df_img = columns(&dfused, fd, 0, a.img_feat);
        let df_aud = columns(&dfused, fd, a.img_feat, a.aud_feat);

        // Image encoder.
        let (w_slot, rest) = gr.split_at_mut(IMG_FC_B);
        let mut da2 = dense_backward(
            &c.a2,
            n,
            a.flat_dim(),
            a.img_feat,
            self.tensor(IMG_FC_W),
            &df_img,
            &mut w_slot[IMG_FC_W],
            &mut rest[0],
            true,
        )
        .expect("dx requested");
        relu_back(&mut da2, &c.a2);
        let (w_slot, rest) = gr.split_at_mut(CONV2_B);
        let mut da1 = conv_backward(&g2, self.tensor(CONV2_W), n, &c.a1, &da2, &mut w_slot[CONV2_W], &mut rest[0], true)
            .expect("dx requested");
        relu_back(&mut da1, &c.a1);
        let (w_slot, rest) = gr.split_at_mut(CONV1_B);
        conv_backward(&g1, self.tensor(CONV1_W), n, &c.x_img, &da1, &mut w_slot[CONV1_W], &mut rest[0], false);

        // Audio encoder.
        let (w_slot, rest) = gr.split_at_mut(AUD_FC2_B);
        let mut du1 = dense_backward(
            &c.u1,
            n,
            a.audio_hidden,
            a.aud_feat,
            self.tensor(AUD_FC2_W),
            &df_aud,
            &mut w_slot[AUD_FC2_W],
            &mut rest[0],
            true,
        )
        .expect("dx requested");
        relu_back(&mut du1, &c.u1);
        let (w_slot, rest) = gr.split_at_mut(AUD_FC1_B);
        dense_backward(&c.x_aud, n, bins, a.audio_hidden, self.tensor(AUD_FC1_W), &du1, &mut w_slot[AUD_FC1_W], &mut rest[0], false);

        Ok((parts, gr.concat()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sequence(arch: &ArchSpec, len: usize, seed: u64) -> Sequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Sequence {
            len,
            image: (0..len * arch.pixels()).map(|_| rng.random::<f64>()).collect(),
            audio: (0..len * arch.audio_bins).map(|_| rng.random::<f64>() * 3.0).collect(),
            motion: (0..len * arch.motion_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn default_parameter_count() {
        let m = FusionModel::zeros(ArchSpec::default()).unwrap();
        assert_eq!(m.layout().len(), 27);
        assert_eq!(m.param_count(), 245_511);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = FusionModel::init_params(ArchSpec::tiny(), 3).unwrap();
        let b = FusionModel::init_params(ArchSpec::tiny(), 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, FusionModel::init_params(ArchSpec::tiny(), 4).unwrap());
        for (i, info) in a.layout().iter().enumerate() {
            match info.glorot_bound() {
                Some(bound) => assert!(a.tensor(i).iter().all(|v| v.abs() <= bound)),
                None if info.name == "core.lstm.b" => {
                    let h = ArchSpec::tiny().lstm_hidden;
                    for (k, v) in a.tensor(i).iter().enumerate() {
                        assert_eq!(*v, if (h..2 * h).contains(&k) { 1.0 } else { 0.0 });
                    }
                }
                None => assert!(a.tensor(i).iter().all(|v| *v == 0.0)),
            }
        }
    }

    #[test]
    fn zero_model_encodes_zero() {
        let m = FusionModel::zeros(ArchSpec::tiny()).unwrap();
        assert!(m.encode_image(&vec![0.0; 17 * 17]).unwrap().iter().all(|v| *v == 0.0));
        assert!(m.encode_audio(&[0.0; 8]).unwrap().iter().all(|v| *v == 0.0));
        assert!(matches!(m.encode_audio(&[0.0; 7]), Err(NetError::Shape { .. })));
    }

    #[test]
    fn random_inputs_give_finite_features() {
        let m = FusionModel::init_params(ArchSpec::tiny(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let img: Vec<f64> = (0..17 * 17).map(|_| rng.random()).collect();
            let spec: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 5.0).collect();
            assert!(m.encode_image(&img).unwrap().iter().all(|v| v.is_finite()));
            assert!(m.encode_audio(&spec).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn fuse_layout() {
        let arch = ArchSpec::default();
        let img: Vec<f64> = (0..32).map(f64::from).collect();
        let aud: Vec<f64> = (100..132).map(f64::from).collect();
        let mot = [0.5, -0.5, 0.1, 0.2, 0.3, 0.4];
        let x = fuse(&img, &aud, &mot);
        assert_eq!(x.len(), 70);
        assert_eq!(x[64], 0.5);
        assert_eq!(split_fused(&x, &arch), (img, aud, mot.to_vec()));
    }

    #[test]
    fn zero_core_step() {
        let m = FusionModel::zeros(ArchSpec::tiny()).unwrap();
        let fd = ArchSpec::tiny().fused_dim();
        let (s, xhat, hcon) = m.core_step(&LstmState::zeros(5), &vec![0.3; fd]).unwrap();
        assert!(s.h.iter().chain(&s.c).chain(&xhat).chain(&hcon).all(|v| *v == 0.0));
    }

    #[test]
    fn forget_bias_scales_the_cell() {
        // Zero input weights and forget bias 1: c' = σ(1)·c exactly, since
        // the candidate gate is tanh(0) = 0.
        let mut m = FusionModel::zeros(ArchSpec::tiny()).unwrap();
        m.tensor_mut(LSTM_B)[5..10].fill(1.0);
        let state = LstmState { h: vec![0.0; 5], c: vec![1.0, -2.0, 0.5, 0.0, 3.0] };
        let (next, _, _) = m.core_step(&state, &[0.0; 14]).unwrap();
        let sig1 = 1.0 / (1.0 + (-1.0f64).exp());
        for (got, c) in next.c.iter().zip(&state.c) {
            assert!((got - sig1 * c).abs() < 1e-15);
        }
        for (h, c) in next.h.iter().zip(&next.c) {
            assert!((h - 0.5 * c.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn sequence_of_one_is_one_core_step() {
        let arch = ArchSpec::tiny();
        let m = FusionModel::init_params(arch, 4).unwrap();
        let seq = random_sequence(&arch, 1, 8);
        let (recon, penalty) = m.forward_sequence(&seq, ModalityMask::KEEP_ALL).unwrap();
        let x = fuse(
            &m.encode_image(&seq.image).unwrap(),
            &m.encode_audio(&seq.audio).unwrap(),
            &seq.motion,
        );
        let (_, xhat, hcon) = m.core_step(&LstmState::zeros(arch.lstm_hidden), &x).unwrap();
        for (a, b) in recon.motion.iter().zip(&xhat[8..]) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = contractive_penalty(&hcon, m.tensor(CONTRACT_W));
        assert!((penalty - p).abs() < 1e-12 * p.max(1.0));
    }

    #[test]
    fn multi_step_forward_matches_core_steps() {
        let arch = ArchSpec::tiny();
        let m = FusionModel::init_params(arch, 6).unwrap();
        let seq = random_sequence(&arch, 4, 2);
        let (recon, _) = m.forward_sequence(&seq, ModalityMask::KEEP_ALL).unwrap();
        let mut state = LstmState::zeros(arch.lstm_hidden);
        for t in 0..4 {
            let x = fuse(
                &m.encode_image(&seq.image[t * 289..(t + 1) * 289]).unwrap(),
                &m.encode_audio(&seq.audio[t * 8..(t + 1) * 8]).unwrap(),
                &seq.motion[t * 6..(t + 1) * 6],
            );
            let (next, xhat, _) = m.core_step(&state, &x).unwrap();
            for (a, b) in recon.motion[t * 6..(t + 1) * 6].iter().zip(&xhat[8..]) {
                assert!((a - b).abs() < 1e-12);
            }
            state = next;
        }
    }

    #[test]
    fn shapes_and_masking() {
        let arch = ArchSpec::tiny();
        let m = FusionModel::init_params(arch, 4).unwrap();
        let seq = random_sequence(&arch, 3, 8);
        let (full, _) = m.forward_sequence(&seq, ModalityMask::KEEP_ALL).unwrap();
        full.check(&arch).unwrap();
        assert!(full.image.iter().chain(&full.audio).chain(&full.motion).all(|v| v.is_finite()));
        // Dropping audio is the same as feeding zero spectra.
        let no_audio = ModalityMask::dropping(&[super::super::Modality::Audio]);
        let (dropped, _) = m.forward_sequence(&seq, no_audio).unwrap();
        let zeroed = Sequence { audio: vec![0.0; seq.audio.len()], ..seq.clone() };
        let (fed_zero, _) = m.forward_sequence(&zeroed, ModalityMask::KEEP_ALL).unwrap();
        assert_eq!(dropped, fed_zero);
        assert_eq!(dropped.audio.len(), seq.audio.len());
    }

    #[test]
    fn dropped_modality_gets_no_input_weight_gradient() {
        let arch = ArchSpec::tiny();
        let m = FusionModel::init_params(arch, 4).unwrap();
        let seq = random_sequence(&arch, 3, 8);
        let batch = Batch::from_sequences(&[&seq], &arch).unwrap();
        let mask = ModalityMask { image: false, audio: false, motion: true };
        let (_, grad) = m.loss_and_gradient(&batch, &[mask], 0.0).unwrap();
        for t in [CONV1_W, AUD_FC1_W] {
            let l = &m.layout()[t];
            assert!(grad[l.offset..l.offset + l.len].iter().all(|g| *g == 0.0), "{}", l.name);
        }
    }

    #[test]
    fn loss_properties() {
        let arch = ArchSpec::tiny();
        let seq = random_sequence(&arch, 2, 1);
        let b = Batch::from_sequences(&[&seq], &arch).unwrap();
        assert_eq!(loss(&b, &b, 0.0, 0.0).total, 0.0);
        let mut worse = b.clone();
        worse.image[0] += 0.5;
        let l1 = loss(&worse, &b, 0.0, 0.0);
        worse.image[0] += 0.5;
        let l2 = loss(&worse, &b, 0.0, 0.0);
        assert!(((l2.total - l1.total) - (l2.image - l1.image) / 3.0).abs() < 1e-15);
        assert_eq!(loss(&b, &b, 2.0, 0.5).total, 1.0);
    }

    #[test]
    fn penalty_closed_form() {
        assert_eq!(contractive_penalty(&[0.3, -0.2], &[0.0; 6]), 0.0);
        // Saturated unit contributes nothing.
        assert_eq!(contractive_penalty(&[1.0, 0.0], &[5.0, 0.0, 5.0, 0.0]), 0.0);
        assert_eq!(contractive_penalty(&[0.0], &[3.0, 4.0]), 25.0);
    }

    #[test]
    fn gradient_is_deterministic() {
        let arch = ArchSpec::tiny();
        let m = FusionModel::init_params(arch, 4).unwrap();
        let seq = random_sequence(&arch, 3, 8);
        let batch = Batch::from_sequences(&[&seq], &arch).unwrap();
        let g1 = m.loss_and_gradient(&batch, &[ModalityMask::KEEP_ALL], 0.1).unwrap();
        let g2 = m.loss_and_gradient(&batch, &[ModalityMask::KEEP_ALL], 0.1).unwrap();
        assert_eq!(g1.1, g2.1);
    }

    #[test]
    fn batch_interleaving_round_trips() {
        let arch = ArchSpec::tiny();
        let s1 = random_sequence(&arch, 3, 1);
        let s2 = random_sequence(&arch, 3, 2);
        let b = Batch::from_sequences(&[&s1, &s2], &arch).unwrap();
        assert_eq!(b.sequence(0), s1);
        assert_eq!(b.sequence(1), s2);
    }
}
