//! Recurrent autoencoder over acoustic-unit code sequences.
//!
//! A GRU encoder reads the code embeddings left to right; its final state is
//! projected through `tanh` to a latent vector that becomes the initial
//! state of a GRU decoder. The decoder is teacher-forced with a
//! begin-of-sequence symbol followed by the true codes and predicts every
//! code with a softmax. The reconstruction negative log-likelihood of a
//! segment is its cost in word segmentation.
//!
//! Everything runs in double precision. Gradients are exact
//! backpropagation through time.
//!
//! GRU cell, with `x` the input and `h` the previous state:
//!
//! ```text
//! z  = sigmoid(Wz x + Uz h + bz)
//! r  = sigmoid(Wr x + Ur h + br)
//! n  = tanh(Wn x + Un (r * h) + bn)
//! h' = (1 - z) * n + z * h
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{par, Error, Matrix, Result};

pub const AERN_MAGIC: &[u8; 4] = b"AERN";
pub const AERN_VERSION: u32 = 1;

/// Longest sequence accepted by [`forward_nll`] and [`backward`].
pub const MAX_SCORED_LEN: usize = 4096;

const CLIP_NORM: f64 = 5.0;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Unit codes of one utterance with the frame span of every code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSequence {
    pub utt_id: String,
    pub codes: Vec<usize>,
    /// Inclusive frame range of each code, contiguous over the utterance.
    pub frame_spans: Vec<(usize, usize)>,
}

impl CodeSequence {
    pub fn validate(&self, vocab: usize) -> Result<()> {
        let err = |m: String| Err(Error::Data(format!("{}: {m}", self.utt_id)));
        if self.codes.is_empty() {
            return err("empty code sequence".into());
        }
        if self.codes.len() != self.frame_spans.len() {
            return err(format!(
                "{} codes but {} frame spans",
                self.codes.len(),
                self.frame_spans.len()
            ));
        }
        if let Some(c) = self.codes.iter().find(|&&c| c >= vocab) {
            return err(format!("code {c} outside vocabulary of {vocab}"));
        }
        if self.frame_spans[0].0 != 0 {
            return err("frame spans do not start at frame 0".into());
        }
        for (i, &(a, b)) in self.frame_spans.iter().enumerate() {
            if a > b {
                return err(format!("frame span {i} is ({a}, {b})"));
            }
            if i > 0 && a != self.frame_spans[i - 1].1 + 1 {
                return err(format!("frame span {i} is not contiguous with its predecessor"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeRnnConfig {
    pub vocab: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Training sequences longer than this are split into chunks.
    pub max_seq_len: usize,
}

impl Default for AeRnnConfig {
    fn default() -> Self {
        Self {
            vocab: 100,
            emb_dim: 64,
            hidden_dim: 128,
            epochs: 15,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
            max_seq_len: 256,
        }
    }
}

impl AeRnnConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.vocab,
            self.emb_dim,
            self.hidden_dim,
            self.epochs,
            self.batch_size,
            self.max_seq_len,
        ];
        if counts.contains(&0) {
            return Err(Error::Config("autoencoder sizes, epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Affine map `w x + b` with `w` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(out: usize, inp: usize) -> Self {
        Self {
            w: Matrix::zeros(out, inp),
            b: vec![0.0; out],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        mat_vec_add(&mut out, &self.w, x);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub wz: Matrix<f64>,
    pub wr: Matrix<f64>,
    pub wn: Matrix<f64>,
    pub uz: Matrix<f64>,
    pub ur: Matrix<f64>,
    pub un: Matrix<f64>,
    pub bz: Vec<f64>,
    pub br: Vec<f64>,
    pub bn: Vec<f64>,
}

/// Intermediate values of one GRU step, kept for backpropagation.
struct GruStep {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    n: Vec<f64>,
}

impl GruCell {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            wz: Matrix::zeros(hidden, input),
            wr: Matrix::zeros(hidden, input),
            wn: Matrix::zeros(hidden, input),
            uz: Matrix::zeros(hidden, hidden),
            ur: Matrix::zeros(hidden, hidden),
            un: Matrix::zeros(hidden, hidden),
            bz: vec![0.0; hidden],
            br: vec![0.0; hidden],
            bn: vec![0.0; hidden],
        }
    }

    fn step(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, GruStep) {
        let mut z = self.bz.clone();
        mat_vec_add(&mut z, &self.wz, x);
        mat_vec_add(&mut z, &self.uz, h);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut r = self.br.clone();
        mat_vec_add(&mut r, &self.wr, x);
        mat_vec_add(&mut r, &self.ur, h);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
        let mut n = self.bn.clone();
        mat_vec_add(&mut n, &self.wn, x);
        mat_vec_add(&mut n, &self.un, &rh);
        n.iter_mut().for_each(|v| *v = v.tanh());

        let h_new = (0..h.len()).map(|i| (1.0 - z[i]) * n[i] + z[i] * h[i]).collect();
        let cache = GruStep {
            h_prev: h.to_vec(),
            z,
            r,
            rh,
            n,
        };
        (h_new, cache)
    }

    /// Accumulates parameter gradients into `grad` and returns the
    /// gradients with respect to the step's input and previous state.
    fn step_backward(&self, x: &[f64], c: &GruStep, dh: &[f64], grad: &mut GruCell) -> (Vec<f64>, Vec<f64>) {
        let hidden = dh.len();
        let mut dh_prev: Vec<f64> = (0..hidden).map(|i| dh[i] * c.z[i]).collect();
        let dpre_n: Vec<f64> = (0..hidden)
            .map(|i| dh[i] * (1.0 - c.z[i]) * (1.0 - c.n[i] * c.n[i]))
            .collect();
        let dpre_z: Vec<f64> = (0..hidden)
            .map(|i| dh[i] * (c.h_prev[i] - c.n[i]) * c.z[i] * (1.0 - c.z[i]))
            .collect();

        let mut dx = vec![0.0; x.len()];
        outer_add(&mut grad.wn, &dpre_n, x);
        outer_add(&mut grad.un, &dpre_n, &c.rh);
        add_into(&mut grad.bn, &dpre_n);
        mat_t_vec_add(&mut dx, &self.wn, &dpre_n);
        let mut d_rh = vec![0.0; hidden];
        mat_t_vec_add(&mut d_rh, &self.un, &dpre_n);

        let dpre_r: Vec<f64> = (0..hidden)
            .map(|i| d_rh[i] * c.h_prev[i] * c.r[i] * (1.0 - c.r[i]))
            .collect();
        for i in 0..hidden {
            dh_prev[i] += d_rh[i] * c.r[i];
        }

        outer_add(&mut grad.wz, &dpre_z, x);
        outer_add(&mut grad.uz, &dpre_z, &c.h_prev);
        add_into(&mut grad.bz, &dpre_z);
        mat_t_vec_add(&mut dx, &self.wz, &dpre_z);
        mat_t_vec_add(&mut dh_prev, &self.uz, &dpre_z);

        outer_add(&mut grad.wr, &dpre_r, x);
        outer_add(&mut grad.ur, &dpre_r, &c.h_prev);
        add_into(&mut grad.br, &dpre_r);
        mat_t_vec_add(&mut dx, &self.wr, &dpre_r);
        mat_t_vec_add(&mut dh_prev, &self.ur, &dpre_r);

        (dx, dh_prev)
    }

    fn blocks(&self) -> [&[f64]; 9] {
        [
            self.wz.as_slice(),
            self.wr.as_slice(),
            self.wn.as_slice(),
            self.uz.as_slice(),
            self.ur.as_slice(),
            self.un.as_slice(),
            &self.bz,
            &self.br,
            &self.bn,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.wz.as_mut_slice(),
            self.wr.as_mut_slice(),
            self.wn.as_mut_slice(),
            self.uz.as_mut_slice(),
            self.ur.as_mut_slice(),
            self.un.as_mut_slice(),
            &mut self.bz,
            &mut self.br,
            &mut self.bn,
        ]
    }
}

/// Autoencoder parameters. The same type holds gradients and optimizer
/// moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AeRnnModel {
    pub vocab: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    /// `(vocab + 1) × emb_dim`; row `vocab` is the begin-of-sequence symbol.
    pub embedding: Matrix<f64>,
    pub encoder: GruCell,
    /// `hidden × hidden` map from the final encoder state to the latent.
    pub latent: Dense,
    pub decoder: GruCell,
    /// `vocab × hidden` map from decoder states to logits.
    pub output: Dense,
}

/// Gradient of a loss with respect to every [`AeRnnModel`] parameter.
pub type Gradient = AeRnnModel;

impl AeRnnModel {
    pub fn zeros(vocab: usize, emb_dim: usize, hidden_dim: usize) -> Self {
        Self {
            vocab,
            emb_dim,
            hidden_dim,
            embedding: Matrix::zeros(vocab + 1, emb_dim),
            encoder: GruCell::zeros(hidden_dim, emb_dim),
            latent: Dense::zeros(hidden_dim, hidden_dim),
            decoder: GruCell::zeros(hidden_dim, emb_dim),
            output: Dense::zeros(vocab, hidden_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.vocab, self.emb_dim, self.hidden_dim)
    }

    pub fn bos(&self) -> usize {
        self.vocab
    }

    /// Parameter blocks in serialization order: embedding; encoder
    /// `Wz Wr Wn Uz Ur Un bz br bn`; latent `W b`; decoder (as encoder);
    /// output `W b`. Matrices are row-major.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![self.embedding.as_slice()];
        v.extend(self.encoder.blocks());
        v.push(self.latent.w.as_slice());
        v.push(&self.latent.b);
        v.extend(self.decoder.blocks());
        v.push(self.output.w.as_slice());
        v.push(&self.output.b);
        v
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![self.embedding.as_mut_slice()];
        v.extend(self.encoder.blocks_mut());
        v.push(self.latent.w.as_mut_slice());
        v.push(&mut self.latent.b);
        v.extend(self.decoder.blocks_mut());
        v.push(self.output.w.as_mut_slice());
        v.push(&mut self.output.b);
        v
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn param_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks().into_iter().flat_map(|b| b.iter().copied())
    }

    fn scale(&mut self, s: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            add_into(a, b);
        }
    }

    fn sq_norm(&self) -> f64 {
        self.param_iter().map(|v| v * v).sum()
    }

    fn check(&self, codes: &[usize]) -> Result<()> {
        if codes.is_empty() {
            return Err(Error::Data("cannot score an empty code sequence".into()));
        }
        if codes.len() > MAX_SCORED_LEN {
            return Err(Error::Data(format!(
                "sequence of {} codes exceeds the limit of {MAX_SCORED_LEN}",
                codes.len()
            )));
        }
        if let Some(c) = codes.iter().find(|&&c| c >= self.vocab) {
            return Err(Error::Index(format!("code {c} outside vocabulary of {}", self.vocab)));
        }
        Ok(())
    }

    fn embed(&self, symbol: usize) -> &[f64] {
        self.embedding.row(symbol)
    }

    /// Encoder state after each prefix of `codes`. Element `i` is the state
    /// after reading `codes[..=i]`.
    pub(crate) fn encoder_states(&self, codes: &[usize]) -> Vec<Vec<f64>> {
        let mut h = vec![0.0; self.hidden_dim];
        codes
            .iter()
            .map(|&c| {
                h = self.encoder.step(self.embed(c), &h).0;
                h.clone()
            })
            .collect()
    }

    /// Reconstruction NLL of `codes` given the final encoder state.
    pub(crate) fn decode_nll(&self, encoded: &[f64], codes: &[usize]) -> f64 {
        let mut h: Vec<f64> = self.latent.apply(encoded).into_iter().map(f64::tanh).collect();
        let mut nll = 0.0;
        let mut input = self.bos();
        for &target in codes {
            h = self.decoder.step(self.embed(input), &h).0;
            let logits = self.output.apply(&h);
            nll -= log_softmax_at(&logits, target);
            input = target;
        }
        nll
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let to_io = |e| Error::io(path, e);
        w.write_all(AERN_MAGIC).map_err(to_io)?;
        for v in [AERN_VERSION, self.vocab as u32, self.emb_dim as u32, self.hidden_dim as u32] {
            w.write_u32::<LittleEndian>(v).map_err(to_io)?;
        }
        for v in self.param_iter() {
            w.write_f64::<LittleEndian>(v).map_err(to_io)?;
        }
        w.flush().map_err(to_io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let to_io = |e| Error::io(path, e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(to_io)?;
        if &magic != AERN_MAGIC {
            return Err(Error::Format(format!("bad model magic {magic:?}")));
        }
        let version = r.read_u32::<LittleEndian>().map_err(to_io)?;
        if version != AERN_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = r.read_u32::<LittleEndian>().map_err(to_io)? as usize;
        }
        if dims.contains(&0) {
            return Err(Error::Format(format!("model dimensions {dims:?} contain 0")));
        }
        let mut model = Self::zeros(dims[0], dims[1], dims[2]);
        let expected = model.num_params();
        let mut count = 0;
        for block in model.blocks_mut() {
            for v in block.iter_mut() {
                *v = r.read_f64::<LittleEndian>().map_err(|_| Error::Truncated {
                    expected,
                    found: count,
                })?;
                count += 1;
            }
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(to_io)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after parameters", rest.len())));
        }
        if model.param_iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite model parameter".into()));
        }
        Ok(model)
    }
}

/// Parameters drawn uniformly from `[-s, s]`, `s = 1/sqrt(hidden_dim)`, in
/// block order from a generator seeded with `cfg.seed`.
pub fn init_model(cfg: &AeRnnConfig) -> AeRnnModel {
    let mut model = AeRnnModel::zeros(cfg.vocab, cfg.emb_dim, cfg.hidden_dim);
    let s = 1.0 / (cfg.hidden_dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for block in model.blocks_mut() {
        block.iter_mut().for_each(|v| *v = rng.random_range(-s..=s));
    }
    model
}

/// Reconstruction negative log-likelihood `-sum_t log P(codes[t])`.
pub fn forward_nll(model: &AeRnnModel, codes: &[usize]) -> Result<f64> {
    model.check(codes)?;
    let states = model.encoder_states(codes);
    Ok(model.decode_nll(states.last().expect("non-empty"), codes))
}

/// Decoder output distribution at every step, for inspection and tests.
pub fn step_distributions(model: &AeRnnModel, codes: &[usize]) -> Result<Vec<Vec<f64>>> {
    model.check(codes)?;
    let states = model.encoder_states(codes);
    let mut h: Vec<f64> = model.latent.apply(states.last().expect("non-empty")).into_iter().map(f64::tanh).collect();
    let mut input = model.bos();
    let mut out = Vec::with_capacity(codes.len());
    for &target in codes {
        h = model.decoder.step(model.embed(input), &h).0;
        out.push(softmax(&model.output.apply(&h)));
        input = target;
    }
    Ok(out)
}

/// NLL of `codes` and its exact gradient.
pub fn backward(model: &AeRnnModel, codes: &[usize]) -> Result<(f64, Gradient)> {
    let mut grad = model.zeros_like();
    let nll = backward_into(model, codes, 1.0, &mut grad)?;
    Ok((nll, grad))
}

/// Adds `scale` times the gradient of the NLL of `codes` into `grad` and
/// returns the unscaled NLL.
pub fn backward_into(model: &AeRnnModel, codes: &[usize], scale: f64, grad: &mut Gradient) -> Result<f64> {
    model.check(codes)?;
    let hidden = model.hidden_dim;

    // Forward pass with caches.
    let mut enc_steps = Vec::with_capacity(codes.len());
    let mut h = vec![0.0; hidden];
    for &c in codes {
        let (h_new, cache) = model.encoder.step(model.embed(c), &h);
        enc_steps.push(cache);
        h = h_new;
    }
    let enc_final = h;
    let latent: Vec<f64> = model.latent.apply(&enc_final).into_iter().map(f64::tanh).collect();

    let inputs: Vec<usize> = std::iter::once(model.bos()).chain(codes[..codes.len() - 1].iter().copied()).collect();
    let mut dec_steps = Vec::with_capacity(codes.len());
    let mut dec_states = Vec::with_capacity(codes.len());
    let mut probs = Vec::with_capacity(codes.len());
    let mut nll = 0.0;
    let mut h = latent.clone();
    for (&input, &target) in inputs.iter().zip(codes) {
        let (h_new, cache) = model.decoder.step(model.embed(input), &h);
        let logits = model.output.apply(&h_new);
        nll -= log_softmax_at(&logits, target);
        probs.push(softmax(&logits));
        dec_steps.push(cache);
        dec_states.push(h_new.clone());
        h = h_new;
    }

    // Decoder, last step first.
    let mut dh = vec![0.0; hidden];
    for t in (0..codes.len()).rev() {
        let mut dlogits = probs[t].clone();
        dlogits[codes[t]] -= 1.0;
        dlogits.iter_mut().for_each(|v| *v *= scale);
        outer_add(&mut grad.output.w, &dlogits, &dec_states[t]);
        add_into(&mut grad.output.b, &dlogits);
        mat_t_vec_add(&mut dh, &model.output.w, &dlogits);

        let x = model.embed(inputs[t]);
        let (dx, dh_prev) = model.decoder.step_backward(x, &dec_steps[t], &dh, &mut grad.decoder);
        add_into(grad.embedding.row_mut(inputs[t]), &dx);
        dh = dh_prev;
    }

    // Latent projection.
    let dpre: Vec<f64> = dh.iter().zip(&latent).map(|(d, l)| d * (1.0 - l * l)).collect();
    outer_add(&mut grad.latent.w, &dpre, &enc_final);
    add_into(&mut grad.latent.b, &dpre);
    let mut dh = vec![0.0; hidden];
    mat_t_vec_add(&mut dh, &model.latent.w, &dpre);

    // Encoder.
    for t in (0..codes.len()).rev() {
        let x = model.embed(codes[t]);
        let (dx, dh_prev) = model.encoder.step_backward(x, &enc_steps[t], &dh, &mut grad.encoder);
        add_into(grad.embedding.row_mut(codes[t]), &dx);
        dh = dh_prev;
    }
    Ok(nll)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean per-symbol NLL of each epoch, measured on the minibatches as
    /// they were trained.
    pub epoch_loss: Vec<f64>,
}

struct Adam {
    m: AeRnnModel,
    v: AeRnnModel,
    t: i32,
}

impl Adam {
    fn new(model: &AeRnnModel) -> Self {
        Self {
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
        }
    }

    fn update(&mut self, model: &mut AeRnnModel, grad: &Gradient, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let blocks = model
            .blocks_mut()
            .into_iter()
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut())
            .zip(grad.blocks());
        for (((p, m), v), g) in blocks {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Splits sequences longer than `max_len` into consecutive chunks.
fn training_chunks(corpus: &[CodeSequence], max_len: usize) -> Vec<&[usize]> {
    corpus
        .iter()
        .flat_map(|s| s.codes.chunks(max_len))
        .filter(|c| !c.is_empty())
        .collect()
}

/// Minibatch Adam on mean per-symbol NLL for `cfg.epochs` epochs.
///
/// Chunk order is reshuffled every epoch from `cfg.seed`. Per-sequence
/// gradients within a batch may be computed in parallel; they are summed in
/// batch order, so training is a pure function of `(model, corpus, cfg)`.
pub fn train(model: &AeRnnModel, corpus: &[CodeSequence], cfg: &AeRnnConfig) -> Result<(AeRnnModel, TrainReport)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Data("cannot train on an empty corpus".into()));
    }
    let chunks = training_chunks(corpus, cfg.max_seq_len);
    if chunks.is_empty() {
        return Err(Error::Data("corpus contains no codes".into()));
    }
    for c in &chunks {
        model.check(c)?;
    }

    let mut model = model.clone();
    let mut adam = Adam::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total_nll = 0.0;
        let mut total_symbols = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let symbols: usize = batch.iter().map(|&i| chunks[i].len()).sum();
            let scale = 1.0 / symbols as f64;
            let results = par::map(batch, |&i| {
                let mut g = model.zeros_like();
                let nll = backward_into(&model, chunks[i], scale, &mut g).expect("chunks validated");
                (nll, g)
            });
            let mut grad = model.zeros_like();
            for (nll, g) in &results {
                total_nll += nll;
                grad.add_assign(g);
            }
            total_symbols += symbols;
            let norm = grad.sq_norm().sqrt();
            if norm > CLIP_NORM {
                grad.scale(CLIP_NORM / norm);
            }
            adam.update(&mut model, &grad, cfg.learning_rate);
        }
        let loss = total_nll / total_symbols as f64;
        log::debug!("epoch {}: mean NLL per symbol {loss:.4}", epoch + 1);
        epoch_loss.push(loss);
    }
    Ok((model, TrainReport { epoch_loss }))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn log_softmax_at(logits: &[f64], i: usize) -> f64 {
    logits[i] - log_sum_exp(logits)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|x| (x - lse).exp()).collect()
}

/// `out += w x`
fn mat_vec_add(out: &mut [f64], w: &Matrix<f64>, x: &[f64]) {
    for (o, row) in out.iter_mut().zip(w.iter_rows()) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += w^T v`
fn mat_t_vec_add(out: &mut [f64], w: &Matrix<f64>, v: &[f64]) {
    for (row, &s) in w.iter_rows().zip(v) {
        if s != 0.0 {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * s;
            }
        }
    }
}

/// `g += u v^T`
fn outer_add(g: &mut Matrix<f64>, u: &[f64], v: &[f64]) {
    for (i, &ui) in u.iter().enumerate() {
        if ui != 0.0 {
            for (gij, &vj) in g.row_mut(i).iter_mut().zip(v) {
                *gij += ui * vj;
            }
        }
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}
