//! Window MLP tagger: embedding lookup and concatenation, tanh hidden
//! layers, softmax over {B, I, O}.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{encode, Tag, TaggedSentence, Window, NUM_TAGS};
use crate::decoder::{decode_sentence, Emissions, Tagger, TransitionModel};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{score_spans, Score};
use crate::rng::seeded;

/// Fully connected layer; `weight` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Dense {
            inputs,
            outputs,
            weight,
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weight.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + dot(row, x);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize.
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// All trainable parameters of the tagger.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub embedding: EmbeddingTable,
    pub hidden: Vec<Dense>,
    pub output: Dense,
    pub radius: usize,
}

/// Layer activations kept from the forward pass.
#[derive(Clone, Debug)]
pub struct Cache {
    pub indices: Vec<usize>,
    pub input: Vec<f64>,
    pub hidden: Vec<Vec<f64>>,
    pub logits: [f64; NUM_TAGS],
    pub probs: [f64; NUM_TAGS],
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseGrad {
    fn zeros_like(layer: &Dense) -> Self {
        DenseGrad {
            weight: vec![0.0; layer.weight.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

/// Gradients for one example. Embedding gradients are sparse: one entry
/// per distinct row in the window.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<DenseGrad>,
    pub output: DenseGrad,
    pub embedding: Vec<(usize, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(params: &Mlp) -> Self {
        Gradients {
            hidden: params.hidden.iter().map(DenseGrad::zeros_like).collect(),
            output: DenseGrad::zeros_like(&params.output),
            embedding: Vec::new(),
        }
    }

    /// Per-tensor dense views in [`Mlp::tensor_names`] order.
    pub fn to_dense(&self, params: &Mlp) -> Vec<Vec<f64>> {
        let mut emb = vec![0.0; params.embedding.as_slice().len()];
        let d = params.embedding.dim();
        for (row, g) in &self.embedding {
            for (e, x) in emb[row * d..(row + 1) * d].iter_mut().zip(g) {
                *e += x;
            }
        }
        let mut out = vec![emb];
        for layer in &self.hidden {
            out.push(layer.weight.clone());
            out.push(layer.bias.clone());
        }
        out.push(self.output.weight.clone());
        out.push(self.output.bias.clone());
        out
    }
}

pub fn softmax(logits: &[f64; NUM_TAGS]) -> [f64; NUM_TAGS] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_TAGS];
    let mut z = 0.0;
    for (pi, &l) in p.iter_mut().zip(logits) {
        *pi = (l - m).exp();
        z += *pi;
    }
    p.iter_mut().for_each(|pi| *pi /= z);
    p
}

pub fn log_softmax(logits: &[f64; NUM_TAGS]) -> [f64; NUM_TAGS] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let mut out = [0.0; NUM_TAGS];
    for (o, l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
    out
}

pub const MIN_PROB: f64 = 1e-300;

/// `-ln p[gold]`, with the probability clamped at 1e-300.
pub fn nll_loss(probs: &[f64; NUM_TAGS], gold: Tag) -> f64 {
    let p = probs[gold.code()];
    if p < MIN_PROB {
        log::warn!("probability of gold tag {gold} underflowed to {p:e}; clamping");
        return -MIN_PROB.ln();
    }
    -p.ln()
}

impl Mlp {
    pub fn new(embedding: EmbeddingTable, radius: usize, hidden_sizes: &[usize], seed: u64) -> Self {
        let mut rng = seeded(seed, 20);
        let mut inputs = (2 * radius + 1) * embedding.dim();
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        for &h in hidden_sizes {
            hidden.push(Dense::glorot(inputs, h, &mut rng));
            inputs = h;
        }
        let output = Dense::glorot(inputs, NUM_TAGS, &mut rng);
        Mlp {
            embedding,
            hidden,
            output,
            radius,
        }
    }

    pub fn zeros(embedding: EmbeddingTable, radius: usize, hidden_sizes: &[usize]) -> Self {
        let mut inputs = (2 * radius + 1) * embedding.dim();
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        for &h in hidden_sizes {
            hidden.push(Dense::zeros(inputs, h));
            inputs = h;
        }
        Mlp {
            embedding,
            hidden,
            output: Dense::zeros(inputs, NUM_TAGS),
            radius,
        }
    }

    pub fn input_dim(&self) -> usize {
        (2 * self.radius + 1) * self.embedding.dim()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.outputs).collect()
    }

    /// Checks that layer shapes chain from the window input to three tags.
    pub fn validate(&self) -> Result<()> {
        let mut inputs = self.input_dim();
        let layers = self.hidden.iter().chain(std::iter::once(&self.output));
        for (k, layer) in layers.enumerate() {
            if layer.inputs != inputs
                || layer.weight.len() != layer.inputs * layer.outputs
                || layer.bias.len() != layer.outputs
            {
                return Err(Error::Dimension(format!(
                    "layer {k} is {}x{} but receives {inputs} inputs",
                    layer.outputs, layer.inputs
                )));
            }
            inputs = layer.outputs;
        }
        if self.output.outputs != NUM_TAGS {
            return Err(Error::Dimension("output layer must have 3 rows".into()));
        }
        Ok(())
    }

    pub fn forward(&self, window: &Window) -> Result<Cache> {
        self.forward_indices(&window.indices)
    }

    pub fn forward_indices(&self, indices: &[usize]) -> Result<Cache> {
        if indices.len() != 2 * self.radius + 1 {
            return Err(Error::Dimension(format!(
                "window has {} positions, model expects {}",
                indices.len(),
                2 * self.radius + 1
            )));
        }
        let mut input = vec![0.0; self.input_dim()];
        self.embedding.lookup_concat_into(indices, &mut input)?;
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let x = hidden.last().unwrap_or(&input);
            let mut h = vec![0.0; layer.outputs];
            layer.apply(x, &mut h);
            h.iter_mut().for_each(|v| *v = v.tanh());
            hidden.push(h);
        }
        let mut logits = [0.0; NUM_TAGS];
        self.output.apply(hidden.last().unwrap_or(&input), &mut logits);
        Ok(Cache {
            indices: indices.to_vec(),
            input,
            hidden,
            probs: softmax(&logits),
            logits,
        })
    }

    /// Exact NLL gradients for one window; no regularization term.
    pub fn backward(&self, window: &Window, gold: Tag, cache: &Cache) -> Result<Gradients> {
        if cache.indices != window.indices {
            return Err(Error::Dimension("cache was computed for a different window".into()));
        }
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(gold, cache, &mut grads)?;
        Ok(grads)
    }

    pub(crate) fn backward_into(&self, gold: Tag, cache: &Cache, grads: &mut Gradients) -> Result<()> {
        if cache.input.len() != self.input_dim()
            || cache.hidden.len() != self.hidden.len()
            || cache.hidden.iter().zip(&self.hidden).any(|(h, l)| h.len() != l.outputs)
            || grads.hidden.len() != self.hidden.len()
        {
            return Err(Error::Dimension("stale forward cache".into()));
        }

        let mut delta: Vec<f64> = cache.probs.to_vec();
        delta[gold.code()] -= 1.0;

        let top = cache.hidden.last().unwrap_or(&cache.input);
        outer_into(&delta, top, &mut grads.output.weight);
        grads.output.bias.copy_from_slice(&delta);
        let mut below = transpose_mul(&self.output, &delta);

        for k in (0..self.hidden.len()).rev() {
            let h = &cache.hidden[k];
            for (d, hv) in below.iter_mut().zip(h) {
                *d *= 1.0 - hv * hv;
            }
            delta = below;
            let x = if k == 0 { &cache.input } else { &cache.hidden[k - 1] };
            outer_into(&delta, x, &mut grads.hidden[k].weight);
            grads.hidden[k].bias.copy_from_slice(&delta);
            below = transpose_mul(&self.hidden[k], &delta);
        }

        let d = self.embedding.dim();
        grads.embedding.clear();
        for (pos, &row) in cache.indices.iter().enumerate() {
            let g = &below[pos * d..(pos + 1) * d];
            match grads.embedding.iter_mut().find(|(r, _)| *r == row) {
                Some((_, acc)) => acc.iter_mut().zip(g).for_each(|(a, x)| *a += x),
                None => grads.embedding.push((row, g.to_vec())),
            }
        }
        Ok(())
    }

    /// Per-position log-probabilities for an encoded sentence.
    pub fn emissions_for_indices(&self, indices: &[usize]) -> Result<Emissions> {
        let mut rows = Vec::with_capacity(indices.len());
        for t in 0..indices.len() {
            let window = Window::at(indices, t, self.radius);
            let cache = self.forward(&window)?;
            rows.push(log_softmax(&cache.logits));
        }
        Ok(Emissions::new(rows))
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for k in 0..self.hidden.len() {
            names.push(format!("hidden{k}.weight"));
            names.push(format!("hidden{k}.bias"));
        }
        names.push("output.weight".into());
        names.push("output.bias".into());
        names
    }

    pub fn tensor(&self, k: usize) -> &[f64] {
        let n = self.hidden.len();
        match k {
            0 => self.embedding.as_slice(),
            _ if k <= 2 * n => {
                let layer = &self.hidden[(k - 1) / 2];
                if k % 2 == 1 {
                    &layer.weight
                } else {
                    &layer.bias
                }
            }
            _ if k == 2 * n + 1 => &self.output.weight,
            _ => &self.output.bias,
        }
    }

    pub fn tensor_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.hidden.len();
        match k {
            0 => self.embedding.as_mut_slice(),
            _ if k <= 2 * n => {
                let layer = &mut self.hidden[(k - 1) / 2];
                if k % 2 == 1 {
                    &mut layer.weight
                } else {
                    &mut layer.bias
                }
            }
            _ if k == 2 * n + 1 => &mut self.output.weight,
            _ => &mut self.output.bias,
        }
    }

    /// Weight matrices carry L2; embeddings and biases do not.
    pub fn is_regularized(&self, k: usize) -> bool {
        k > 0 && k % 2 == 1
    }
}

impl Tagger for Mlp {
    fn emissions(&self, chars: &[char]) -> Result<Emissions> {
        self.emissions_for_indices(&encode(chars, self.embedding.vocab()))
    }
}

fn outer_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    for (row, &x) in out.chunks_exact_mut(b.len()).zip(a) {
        for (o, &y) in row.iter_mut().zip(b) {
            *o = x * y;
        }
    }
}

fn transpose_mul(layer: &Dense, delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layer.inputs];
    for (row, &d) in layer.weight.chunks_exact(layer.inputs).zip(delta) {
        for (o, &w) in out.iter_mut().zip(row) {
            *o += w * d;
        }
    }
    out
}

/// `θ ← θ − lr·(g + λ·θ)` for weight matrices, `θ ← θ − lr·g` otherwise.
/// Only embedding rows present in `grads` change.
pub fn sgd_step(params: &mut Mlp, grads: &Gradients, lr: f64, l2: f64) -> Result<()> {
    if grads.hidden.len() != params.hidden.len() {
        return Err(Error::Dimension("gradient layer count differs".into()));
    }
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    let d = params.embedding.dim();
    for (row, g) in &grads.embedding {
        if *row >= params.embedding.rows() || g.len() != d {
            return Err(Error::Dimension(format!("embedding gradient row {row}")));
        }
        if !finite(g) {
            return Err(Error::NonFinite("embedding".into()));
        }
    }
    let layers = params.hidden.iter().zip(&grads.hidden).enumerate();
    for (k, (layer, g)) in layers {
        if g.weight.len() != layer.weight.len() || g.bias.len() != layer.bias.len() {
            return Err(Error::Dimension(format!("hidden{k} gradient shape")));
        }
        if !finite(&g.weight) {
            return Err(Error::NonFinite(format!("hidden{k}.weight")));
        }
        if !finite(&g.bias) {
            return Err(Error::NonFinite(format!("hidden{k}.bias")));
        }
    }
    if grads.output.weight.len() != params.output.weight.len()
        || grads.output.bias.len() != params.output.bias.len()
    {
        return Err(Error::Dimension("output gradient shape".into()));
    }
    if !finite(&grads.output.weight) {
        return Err(Error::NonFinite("output.weight".into()));
    }
    if !finite(&grads.output.bias) {
        return Err(Error::NonFinite("output.bias".into()));
    }

    let decay = 1.0 - lr * l2;
    let update = |theta: &mut [f64], g: &[f64], decay: f64| {
        for (t, x) in theta.iter_mut().zip(g) {
            *t = *t * decay - lr * x;
        }
    };
    for (row, g) in &grads.embedding {
        update(params.embedding.row_mut(*row), g, 1.0);
    }
    for (layer, g) in params.hidden.iter_mut().zip(&grads.hidden) {
        update(&mut layer.weight, &g.weight, decay);
        update(&mut layer.bias, &g.bias, 1.0);
    }
    update(&mut params.output.weight, &grads.output.weight, decay);
    update(&mut params.output.bias, &grads.output.bias, 1.0);
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub radius: usize,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub shuffle: bool,
    pub seed: u64,
    /// Epochs without dev-F1 improvement before stopping; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            radius: 2,
            hidden: vec![300],
            lr: 0.01,
            epochs: 30,
            l2: 1e-4,
            shuffle: true,
            seed: 1,
            patience: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub dev: Score,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were returned; 0 means untrained.
    pub best_epoch: usize,
}

/// Decodes every sentence and scores the spans against gold.
pub fn evaluate(tagger: &dyn Tagger, tm: &TransitionModel, data: &[TaggedSentence]) -> Result<Score> {
    let mut pred = Vec::with_capacity(data.len());
    let mut gold = Vec::with_capacity(data.len());
    for s in data {
        pred.push(decode_sentence(tagger, tm, s.chars())?);
        gold.push(s.spans());
    }
    score_spans(&pred, &gold)
}

/// Mean NLL over every position of `data`.
pub fn mean_loss(model: &Mlp, data: &[TaggedSentence]) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in data {
        let indices = encode(s.chars(), model.embedding.vocab());
        for (t, &gold) in s.tags().iter().enumerate() {
            let cache = model.forward(&Window::at(&indices, t, model.radius))?;
            total += nll_loss(&cache.probs, gold);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Per-character SGD over all training windows, fine-tuning the
/// embeddings together with the network.
pub fn train_supervised(
    train: &[TaggedSentence],
    dev: &[TaggedSentence],
    init: EmbeddingTable,
    cfg: &TrainConfig,
    tm: &TransitionModel,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no sentences".into()));
    }
    if cfg.radius == 0 || cfg.hidden.contains(&0) || !(cfg.lr >= 0.0) || !(cfg.l2 >= 0.0) {
        return Err(Error::Config(
            "radius and hidden sizes must be >= 1, lr and l2 >= 0".into(),
        ));
    }
    let vocab = init.vocab().clone();
    let encoded: Vec<Vec<usize>> = train.iter().map(|s| encode(s.chars(), &vocab)).collect();
    if encoded.iter().flatten().all(|&i| i == crate::corpus::UNK) {
        return Err(Error::VocabMismatch(
            "embedding vocabulary covers none of the training characters".into(),
        ));
    }

    let mut model = Mlp::new(init, cfg.radius, &cfg.hidden, cfg.seed);
    let mut examples: Vec<(usize, usize)> = encoded
        .iter()
        .enumerate()
        .flat_map(|(s, idx)| (0..idx.len()).map(move |t| (s, t)))
        .collect();
    let mut rng = seeded(cfg.seed, 21);
    let mut grads = Gradients::zeros_like(&model);
    let mut log = Vec::with_capacity(cfg.epochs);
    let use_dev = cfg.patience > 0 && !dev.is_empty();
    let mut best: Option<(f64, usize, Mlp)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            examples.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for &(s, t) in &examples {
            let window = Window::at(&encoded[s], t, cfg.radius);
            let gold = train[s].tags()[t];
            let cache = model.forward(&window)?;
            total += nll_loss(&cache.probs, gold);
            model.backward_into(gold, &cache, &mut grads)?;
            sgd_step(&mut model, &grads, cfg.lr, cfg.l2)?;
        }
        let loss = total / examples.len() as f64;
        let dev_score = if dev.is_empty() {
            Score::default()
        } else {
            evaluate(&model, tm, dev)?
        };
        log::info!(
            "epoch {epoch}: loss {loss:.6} dev P={:.2} R={:.2} F1={:.2}",
            dev_score.precision,
            dev_score.recall,
            dev_score.f1
        );
        log.push(EpochLog {
            epoch,
            loss,
            dev: dev_score,
        });

        if use_dev {
            if best.as_ref().is_none_or(|(f, _, _)| dev_score.f1 > *f) {
                best = Some((dev_score.f1, epoch, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, epoch, m)) => (m, epoch),
        None => (model, log.len()),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
    })
}

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// L2 coefficient added to the checked objective as (λ/2)·‖W‖².
    pub l2: f64,
    /// Coordinates sampled per tensor (at least 20 are used).
    pub coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            l2: 0.0,
            coords_per_tensor: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub coords: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.tensors
            .iter()
            .filter(|t| !t.passed)
            .map(|t| t.name.as_str())
            .collect()
    }
}

/// `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn objective(params: &Mlp, examples: &[(Window, Tag)], l2: f64) -> Result<f64> {
    let mut total = 0.0;
    for (w, gold) in examples {
        let cache = params.forward(w)?;
        total -= log_softmax(&cache.logits)[gold.code()];
    }
    if l2 > 0.0 {
        for k in 0..params.tensor_names().len() {
            if params.is_regularized(k) {
                total += 0.5 * l2 * params.tensor(k).iter().map(|x| x * x).sum::<f64>();
            }
        }
    }
    Ok(total)
}

/// Compares backpropagation against central finite differences.
pub fn grad_check(params: &Mlp, examples: &[(Window, Tag)], cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    grad_check_with(params, examples, cfg, |_, _| {})
}

/// Like [`grad_check`], but lets `adjust` modify each analytic tensor
/// gradient (by tensor name) before comparison.
pub fn grad_check_with<F>(
    params: &Mlp,
    examples: &[(Window, Tag)],
    cfg: &GradCheckConfig,
    adjust: F,
) -> Result<GradCheckReport>
where
    F: Fn(&str, &mut [f64]),
{
    if !(cfg.step > 0.0) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let names = params.tensor_names();
    let mut analytic: Vec<Vec<f64>> = names
        .iter()
        .enumerate()
        .map(|(k, _)| vec![0.0; params.tensor(k).len()])
        .collect();
    for (w, gold) in examples {
        let cache = params.forward(w)?;
        let g = params.backward(w, *gold, &cache)?.to_dense(params);
        for (acc, x) in analytic.iter_mut().zip(g) {
            acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
        }
    }
    for (k, acc) in analytic.iter_mut().enumerate() {
        if cfg.l2 > 0.0 && params.is_regularized(k) {
            for (a, t) in acc.iter_mut().zip(params.tensor(k)) {
                *a += cfg.l2 * t;
            }
        }
        adjust(&names[k], acc);
    }

    let d = params.embedding.dim();
    let mut touched_rows: Vec<usize> = examples.iter().flat_map(|(w, _)| w.indices.iter().copied()).collect();
    touched_rows.sort_unstable();
    touched_rows.dedup();

    let mut rng = seeded(cfg.seed, 30);
    let want = cfg.coords_per_tensor.max(20);
    let mut probe = params.clone();
    let mut tensors = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let candidates: Vec<usize> = if k == 0 {
            touched_rows
                .iter()
                .flat_map(|&r| r * d..(r + 1) * d)
                .collect()
        } else {
            (0..params.tensor(k).len()).collect()
        };
        let coords: Vec<usize> = if candidates.len() <= want {
            candidates
        } else {
            sample(&mut rng, candidates.len(), want)
                .into_iter()
                .map(|i| candidates[i])
                .collect()
        };
        let mut max_err: f64 = 0.0;
        for &c in &coords {
            let orig = probe.tensor(k)[c];
            probe.tensor_mut(k)[c] = orig + cfg.step;
            let plus = objective(&probe, examples, cfg.l2)?;
            probe.tensor_mut(k)[c] = orig - cfg.step;
            let minus = objective(&probe, examples, cfg.l2)?;
            probe.tensor_mut(k)[c] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            max_err = max_err.max(relative_error(analytic[k][c], numeric));
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            coords: coords.len(),
            max_rel_error: max_err,
            passed: max_err < cfg.tolerance,
        });
    }
    let passed = tensors.iter().all(|t| t.passed);
    Ok(GradCheckReport { tensors, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Vocabulary, PAD};
    use crate::embeddings::init_embeddings;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_tokens((0..n as u32).map(|i| char::from_u32(0x4E00 + i).unwrap()).collect())
            .unwrap()
    }

    fn random_model(seed: u64, dim: usize, radius: usize, hidden: &[usize]) -> Mlp {
        let mut rng = seeded(seed, 99);
        let mut table = init_embeddings(&vocab(6), dim, seed);
        table.as_mut_slice().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let mut m = Mlp::new(table, radius, hidden, seed);
        for k in 1..m.tensor_names().len() {
            m.tensor_mut(k).iter_mut().for_each(|x| *x = rng.gen_range(-0.8..0.8));
        }
        m
    }

    #[test]
    fn zero_network_is_uniform() {
        let m = Mlp::zeros(init_embeddings(&vocab(4), 3, 0), 2, &[5]);
        let w = Window::at(&[2, 3, 4], 1, 2);
        let cache = m.forward(&w).unwrap();
        for p in cache.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let em = m.emissions_for_indices(&[2, 3, 4]).unwrap();
        for row in em.rows() {
            for x in row {
                assert!((x - (1.0f64 / 3.0).ln()).abs() < 1e-12);
            }
        }
        assert!(m.emissions_for_indices(&[]).unwrap().is_empty());
    }

    #[test]
    fn analytic_softmax_example() {
        let p = softmax(&[2f64.ln(), 0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15);
        assert!((p[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[0.3, -1.2, 2.5]);
        let b = softmax(&[100.3, 98.8, 102.5]);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn nll_examples() {
        let u = [1.0 / 3.0; 3];
        assert!((nll_loss(&u, Tag::I) - 3f64.ln()).abs() < 1e-12);
        assert_eq!(nll_loss(&[1.0, 0.0, 0.0], Tag::B), 0.0);
        assert!((nll_loss(&[0.5, 0.25, 0.25], Tag::B) - 2f64.ln()).abs() < 1e-12);
        assert!((nll_loss(&[1.0, 0.0, 0.0], Tag::O) - 1e300f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn output_gradient_is_p_minus_onehot() {
        let m = Mlp::zeros(init_embeddings(&vocab(4), 3, 0), 1, &[4]);
        let w = Window::at(&[2, 3], 0, 1);
        let cache = m.forward(&w).unwrap();
        let g = m.backward(&w, Tag::B, &cache).unwrap();
        let expected = [1.0 / 3.0 - 1.0, 1.0 / 3.0, 1.0 / 3.0];
        for k in 0..3 {
            assert!((g.output.bias[k] - expected[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn embedding_gradient_is_sparse_and_accumulates() {
        let m = random_model(3, 4, 2, &[6]);
        let w = Window {
            center: 0,
            radius: 2,
            indices: vec![PAD, 3, 3, 4, PAD],
        };
        let cache = m.forward(&w).unwrap();
        let g = m.backward(&w, Tag::I, &cache).unwrap();
        let mut rows: Vec<usize> = g.embedding.iter().map(|(r, _)| *r).collect();
        rows.sort();
        assert_eq!(rows, vec![PAD, 3, 4]);
        let dense = g.to_dense(&m);
        for r in [1usize, 2, 5, 6, 7] {
            assert!(dense[0][r * 4..(r + 1) * 4].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let m = random_model(1, 3, 1, &[4]);
        let w1 = Window::at(&[2, 3, 4], 1, 1);
        let w2 = Window::at(&[2, 3, 5], 1, 1);
        let cache = m.forward(&w1).unwrap();
        assert!(m.backward(&w2, Tag::O, &cache).is_err());
        let other = random_model(1, 3, 1, &[5]);
        let mut grads = Gradients::zeros_like(&other);
        assert!(other.backward_into(Tag::O, &cache, &mut grads).is_err());
    }

    #[test]
    fn forward_rejects_bad_windows() {
        let m = random_model(1, 3, 1, &[4]);
        assert!(m.forward(&Window::at(&[2, 3], 0, 2)).is_err());
        assert!(m.forward(&Window::at(&[2, 30, 4], 1, 1)).is_err());
    }

    #[test]
    fn sgd_step_examples() {
        let mut m = Mlp::zeros(init_embeddings(&vocab(1), 1, 0), 1, &[]);
        m.output.weight[0] = 1.0;
        m.output.bias[0] = 1.0;
        let mut g = Gradients::zeros_like(&m);
        g.output.weight[0] = 2.0;
        g.output.bias[0] = 2.0;
        sgd_step(&mut m, &g, 0.1, 0.0).unwrap();
        assert!((m.output.weight[0] - 0.8).abs() < 1e-15);
        assert!((m.output.bias[0] - 0.8).abs() < 1e-15);

        let before = m.clone();
        sgd_step(&mut m, &g, 0.0, 0.0).unwrap();
        assert_eq!(m, before);

        m.output.weight[0] = 1.0;
        m.output.bias[0] = 1.0;
        let g = Gradients::zeros_like(&m);
        sgd_step(&mut m, &g, 0.1, 0.5).unwrap();
        assert!((m.output.weight[0] - 0.95).abs() < 1e-15);
        assert_eq!(m.output.bias[0], 1.0);
    }

    #[test]
    fn sgd_step_rejects_non_finite_and_leaves_params() {
        let mut m = random_model(2, 3, 1, &[4]);
        let before = m.clone();
        let mut g = Gradients::zeros_like(&m);
        g.hidden[0].bias[1] = f64::NAN;
        match sgd_step(&mut m, &g, 0.1, 0.0) {
            Err(Error::NonFinite(name)) => assert_eq!(name, "hidden0.bias"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(m, before);
    }

    #[test]
    fn untouched_embedding_rows_are_bit_identical_after_step() {
        let mut m = random_model(4, 3, 1, &[5]);
        let before = m.embedding.clone();
        let w = Window::at(&[2, 3, 4], 0, 1);
        let cache = m.forward(&w).unwrap();
        let g = m.backward(&w, Tag::B, &cache).unwrap();
        sgd_step(&mut m, &g, 0.5, 1e-3).unwrap();
        for r in 0..m.embedding.rows() {
            if w.indices.contains(&r) {
                continue;
            }
            assert_eq!(
                m.embedding.row(r).iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                before.row(r).iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
        assert_ne!(m.embedding.row(2), before.row(2));
    }

    #[test]
    fn grad_check_passes_and_localizes_fault() {
        let m = random_model(7, 3, 1, &[5, 4]);
        let examples = vec![
            (Window::at(&[2, 3, 4, 5], 0, 1), Tag::B),
            (Window::at(&[2, 3, 4, 5], 1, 1), Tag::I),
            (Window::at(&[2, 3, 4, 5], 3, 1), Tag::O),
        ];
        let cfg = GradCheckConfig::default();
        let report = grad_check(&m, &examples, &cfg).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.tensors.iter().all(|t| t.coords >= 3));

        let report = grad_check_with(&m, &examples, &cfg, |name, g| {
            if name == "output.bias" {
                g.iter_mut().for_each(|x| *x *= 1.1);
            }
        })
        .unwrap();
        assert!(!report.passed);
        assert_eq!(report.failing(), vec!["output.bias"]);

        let cfg = GradCheckConfig { l2: 0.3, ..GradCheckConfig::default() };
        assert!(grad_check(&m, &examples, &cfg).unwrap().passed);
    }

    #[test]
    fn grad_check_on_zero_model_is_finite() {
        let m = Mlp::zeros(init_embeddings(&vocab(3), 2, 0), 1, &[3]);
        let examples = vec![(Window::at(&[2, 3], 0, 1), Tag::O)];
        let report = grad_check(&m, &examples, &GradCheckConfig::default()).unwrap();
        assert!(report.tensors.iter().all(|t| t.max_rel_error.is_finite()));
    }
}
