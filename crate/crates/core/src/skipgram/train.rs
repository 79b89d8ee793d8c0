use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::thread;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use super::{Embeddings, SkipGramError};

/// Learning rate never decays below this fraction of its initial value.
const MIN_LR_FRACTION: f64 = 1e-4;
/// Redraws allowed when a negative sample hits the true context.
const MAX_NEGATIVE_REDRAWS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// Effective window drawn uniformly from `1..=window` per center token.
    Sampled,
    /// Always the full window.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub window: usize,
    pub negatives: usize,
    pub dim: usize,
    pub min_count: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Frequent-word subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    pub seed: u64,
    pub window_mode: WindowMode,
    /// More than one worker trains lock-free and is not reproducible.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 12,
            negatives: 15,
            dim: 300,
            min_count: 15,
            epochs: 5,
            learning_rate: 0.025,
            subsample: None,
            seed: 1,
            window_mode: WindowMode::Sampled,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SkipGramError> {
        let bad = |msg: &str| Err(SkipGramError::Config(msg.to_owned()));
        if self.window < 1 {
            return bad("window must be at least 1");
        }
        if self.negatives < 1 {
            return bad("negatives must be at least 1");
        }
        if self.dim < 1 {
            return bad("dim must be at least 1");
        }
        if self.workers < 1 {
            return bad("workers must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if let Some(t) = self.subsample {
            if t.is_nan() || t <= 0.0 {
                return bad("subsample threshold must be positive");
            }
        }
        Ok(())
    }
}

/// (center, context) index pairs for one token sequence.
pub fn generate_pairs<R: Rng + ?Sized>(
    tokens: &[u32],
    window: usize,
    mode: WindowMode,
    rng: &mut R,
) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for_each_context(tokens, window, mode, rng, |c, x| pairs.push((c, x)));
    pairs
}

fn for_each_context<R, F>(tokens: &[u32], window: usize, mode: WindowMode, rng: &mut R, mut f: F)
where
    R: Rng + ?Sized,
    F: FnMut(u32, u32),
{
    for t in 0..tokens.len() {
        let b = match mode {
            WindowMode::Fixed => window,
            WindowMode::Sampled => rng.random_range(1..=window),
        };
        let lo = t.saturating_sub(b);
        let hi = (t + b).min(tokens.len() - 1);
        for j in lo..=hi {
            if j != t {
                f(tokens[t], tokens[j]);
            }
        }
    }
}

fn log_sigmoid<T: Float>(x: T) -> T {
    // log σ(x) = -softplus(-x), evaluated without overflow.
    let zero = T::zero();
    let one = T::one();
    -(-x).max(zero) - (one + (-x.abs()).exp()).ln()
}

fn sigmoid<T: Float>(x: T) -> T {
    let one = T::one();
    if x >= T::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    }
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Negative-sampling loss of one pair.
///
/// `outputs` holds `1 + k` context-side rows of length `dim`, flattened: the
/// true context first, then the negatives. The loss is
/// `-log σ(u_ctx·v) - Σ log σ(-u_neg·v)`, the negated objective.
pub fn pair_loss<T: Float>(center: &[T], outputs: &[T], dim: usize) -> T {
    outputs
        .chunks_exact(dim)
        .enumerate()
        .fold(T::zero(), |acc, (i, u)| {
            let s = dot(center, u);
            acc - if i == 0 { log_sigmoid(s) } else { log_sigmoid(-s) }
        })
}

/// Loss of one pair plus its gradient with respect to the center row and
/// every output row, written into the given buffers.
pub fn pair_loss_grad<T: Float>(
    center: &[T],
    outputs: &[T],
    dim: usize,
    grad_center: &mut [T],
    grad_outputs: &mut [T],
) -> T {
    grad_center.iter_mut().for_each(|g| *g = T::zero());
    let mut loss = T::zero();
    for (i, (u, gu)) in outputs
        .chunks_exact(dim)
        .zip(grad_outputs.chunks_exact_mut(dim))
        .enumerate()
    {
        let s = dot(center, u);
        // d/ds of -log σ(s) is σ(s) - 1; of -log σ(-s) it is σ(s).
        let g = if i == 0 {
            loss = loss - log_sigmoid(s);
            sigmoid(s) - T::one()
        } else {
            loss = loss - log_sigmoid(-s);
            sigmoid(s)
        };
        for ((gc, gu), (&uk, &vk)) in grad_center
            .iter_mut()
            .zip(gu.iter_mut())
            .zip(u.iter().zip(center))
        {
            *gc = *gc + g * uk;
            *gu = g * vk;
        }
    }
    loss
}

/// Row-major f32 matrix updated in place by concurrent workers.
///
/// Cells are relaxed atomics: concurrent updates may overwrite each other
/// (lost updates) but never tear.
struct SharedMatrix {
    cells: Vec<AtomicU32>,
    dim: usize,
}

impl SharedMatrix {
    fn from_vec(data: Vec<f32>, dim: usize) -> Self {
        SharedMatrix {
            cells: data.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
            dim,
        }
    }

    fn load_row(&self, row: usize, out: &mut [f32]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add_scaled(&self, row: usize, scale: f32, delta: &[f32]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (c, &d) in cells.iter().zip(delta) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + scale * d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f32> {
        self.cells
            .into_iter()
            .map(|c| f32::from_bits(c.into_inner()))
            .collect()
    }
}

/// Trained parameters: input (word) and output (context) matrices.
#[derive(Debug, Clone)]
pub struct SkipGramModel {
    pub vocab: Vocabulary,
    pub config: TrainConfig,
    input: Vec<f32>,
    output: Vec<f32>,
}

impl SkipGramModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn input_vector(&self, idx: usize) -> &[f32] {
        &self.input[idx * self.dim()..(idx + 1) * self.dim()]
    }

    pub fn output_vector(&self, idx: usize) -> &[f32] {
        &self.output[idx * self.dim()..(idx + 1) * self.dim()]
    }

    pub fn input_matrix(&self) -> &[f32] {
        &self.input
    }

    pub fn output_matrix(&self) -> &[f32] {
        &self.output
    }

    /// Loss of one (center, context) pair against the given negatives.
    pub fn pair_loss(&self, center: usize, context: usize, negatives: &[usize]) -> f64 {
        let to64 = |s: &[f32]| s.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
        let v = to64(self.input_vector(center));
        let mut outputs = to64(self.output_vector(context));
        for &n in negatives {
            outputs.extend(to64(self.output_vector(n)));
        }
        pair_loss(&v, &outputs, self.dim())
    }

    /// The word embeddings (input vectors) with their tokens.
    pub fn embeddings(&self) -> Embeddings {
        Embeddings::new(self.vocab.words().to_vec(), self.config.dim, self.input.clone())
            .expect("model shape is consistent")
    }
}

struct Worker<'a> {
    vocab: &'a Vocabulary,
    config: &'a TrainConfig,
    input: &'a SharedMatrix,
    output: &'a SharedMatrix,
    processed: &'a AtomicU64,
    budget: f64,
}

impl Worker<'_> {
    fn run(&self, sentences: &[Vec<u32>], rng: &mut ChaCha8Rng) {
        let dim = self.config.dim;
        let k = self.config.negatives;
        let mut center = vec![0f32; dim];
        let mut outputs = vec![0f32; (k + 1) * dim];
        let mut rows = vec![0usize; k + 1];
        let mut grad_center = vec![0f32; dim];
        let mut grad_outputs = vec![0f32; (k + 1) * dim];
        let mut kept = Vec::new();

        for _ in 0..self.config.epochs {
            for sentence in sentences {
                let done = self.processed.load(Ordering::Relaxed) as f64;
                let lr = (self.config.learning_rate
                    * (1.0 - done / self.budget).max(MIN_LR_FRACTION)) as f32;
                self.subsample(sentence, rng, &mut kept);
                let window = self.config.window;
                let mode = self.config.window_mode;
                let mut pairs = Vec::new();
                for_each_context(&kept, window, mode, rng, |c, x| pairs.push((c, x)));
                for (c, x) in pairs {
                    let (c, x) = (c as usize, x as usize);
                    rows[0] = x;
                    let mut n_out = 1;
                    for _ in 0..k {
                        if let Some(neg) = self.draw_negative(x, rng) {
                            rows[n_out] = neg;
                            n_out += 1;
                        }
                    }
                    self.input.load_row(c, &mut center);
                    for (slot, &r) in rows[..n_out].iter().enumerate() {
                        self.output
                            .load_row(r, &mut outputs[slot * dim..(slot + 1) * dim]);
                    }
                    pair_loss_grad(
                        &center,
                        &outputs[..n_out * dim],
                        dim,
                        &mut grad_center,
                        &mut grad_outputs[..n_out * dim],
                    );
                    for (slot, &r) in rows[..n_out].iter().enumerate() {
                        self.output
                            .add_scaled(r, -lr, &grad_outputs[slot * dim..(slot + 1) * dim]);
                    }
                    self.input.add_scaled(c, -lr, &grad_center);
                }
                self.processed
                    .fetch_add(sentence.len() as u64, Ordering::Relaxed);
            }
        }
    }

    fn draw_negative(&self, context: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        (0..MAX_NEGATIVE_REDRAWS)
            .map(|_| self.vocab.sampler().sample(rng))
            .find(|&n| n != context)
    }

    fn subsample(&self, sentence: &[u32], rng: &mut ChaCha8Rng, kept: &mut Vec<u32>) {
        kept.clear();
        let Some(t) = self.config.subsample else {
            kept.extend_from_slice(sentence);
            return;
        };
        let total = self.vocab.total_tokens() as f64;
        for &w in sentence {
            let f = self.vocab.count(w as usize) as f64 / total;
            let keep = ((f / t).sqrt() + 1.0) * t / f;
            if keep >= 1.0 || rng.random::<f64>() < keep {
                kept.push(w);
            }
        }
    }
}

/// Initial parameters: input uniform in [-0.5/d, 0.5/d], output zero.
fn initial_parameters(vocab_len: usize, dim: usize, rng: &mut ChaCha8Rng) -> (Vec<f32>, Vec<f32>) {
    let bound = 0.5 / dim as f32;
    let input = (0..vocab_len * dim)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    (input, vec![0.0; vocab_len * dim])
}

/// Trains skip-gram embeddings with negative sampling.
///
/// With one worker and a fixed seed the result is bit-reproducible. With
/// several workers the corpus is sharded and workers update the shared
/// matrices without locks.
pub fn train(
    corpus: &[Vec<String>],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<SkipGramModel, SkipGramError> {
    config.validate()?;
    if vocab.min_count() != config.min_count {
        return Err(SkipGramError::Config(format!(
            "vocabulary built with min_count {} but config has {}",
            vocab.min_count(),
            config.min_count
        )));
    }
    let encoded: Vec<Vec<u32>> = corpus
        .iter()
        .map(|s| vocab.encode(s))
        .filter(|s| s.len() > 1)
        .collect();
    if encoded.is_empty() && config.epochs > 0 {
        return Err(SkipGramError::Config(
            "no sentence has two in-vocabulary tokens".to_owned(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (input, output) = initial_parameters(vocab.len(), config.dim, &mut rng);
    let input = SharedMatrix::from_vec(input, config.dim);
    let output = SharedMatrix::from_vec(output, config.dim);
    let processed = AtomicU64::new(0);
    let tokens: usize = encoded.iter().map(Vec::len).sum();
    let worker = Worker {
        vocab,
        config,
        input: &input,
        output: &output,
        processed: &processed,
        budget: (config.epochs * tokens).max(1) as f64,
    };

    if config.workers == 1 || encoded.len() < 2 {
        worker.run(&encoded, &mut rng);
    } else {
        let shard = encoded.len().div_ceil(config.workers);
        thread::scope(|scope| {
            for (i, chunk) in encoded.chunks(shard).enumerate() {
                let worker = &worker;
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1 + i as u64));
                scope.spawn(move || worker.run(chunk, &mut rng));
            }
        });
    }

    Ok(SkipGramModel {
        vocab: vocab.clone(),
        config: config.clone(),
        input: input.into_vec(),
        output: output.into_vec(),
    })
}
