//! Character embedding table and skip-gram pretraining.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::corpus::{PAD_NAME, UNK_NAME};
use crate::corpus::{build_vocab, Vocabulary, Window, PAD, UNK};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// One row per vocabulary index (PAD and UNK included), `dim` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("embedding dimension must be >= 1".into()));
        }
        if data.len() != vocab.len() * dim {
            return Err(Error::Dimension(format!(
                "embedding data has {} values, expected {}x{}",
                data.len(),
                vocab.len(),
                dim
            )));
        }
        if let Some(p) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite embedding value in row {}",
                p / dim
            )));
        }
        Ok(EmbeddingTable { vocab, dim, data })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.vocab.len()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Concatenation of the window's rows, left to right.
    pub fn lookup_concat(&self, window: &Window) -> Result<Vec<f64>> {
        let mut out = vec![0.0; window.indices.len() * self.dim];
        self.lookup_concat_into(&window.indices, &mut out)?;
        Ok(out)
    }

    pub fn lookup_concat_into(&self, indices: &[usize], out: &mut [f64]) -> Result<()> {
        if out.len() != indices.len() * self.dim {
            return Err(Error::Dimension(format!(
                "output buffer has {} slots, expected {}",
                out.len(),
                indices.len() * self.dim
            )));
        }
        for (chunk, &i) in out.chunks_exact_mut(self.dim).zip(indices) {
            if i >= self.rows() {
                return Err(Error::Dimension(format!(
                    "index {i} outside embedding table of {} rows",
                    self.rows()
                )));
            }
            chunk.copy_from_slice(self.row(i));
        }
        Ok(())
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (self.row(a), self.row(b));
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
        let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }

    /// Copies rows of `source` into this table wherever both vocabularies
    /// contain the character. Returns the number of rows copied.
    pub fn copy_shared_rows(&mut self, source: &EmbeddingTable) -> Result<usize> {
        if source.dim != self.dim {
            return Err(Error::Dimension(format!(
                "source dimension {} differs from {}",
                source.dim, self.dim
            )));
        }
        let mut copied = 0;
        for (k, &c) in self.vocab.tokens().to_vec().iter().enumerate() {
            if let Some(j) = source.vocab.get(c) {
                self.row_mut(k + 2).copy_from_slice(source.row(j));
                copied += 1;
            }
        }
        Ok(copied)
    }

    /// Writes the text interchange format: a `<rows> <dim>` header, then one
    /// `<token> <values...>` line per row with PAD and UNK last.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(c) = self.vocab.tokens().iter().find(|c| c.is_whitespace()) {
            return Err(Error::Format(format!(
                "token {c:?} contains whitespace and cannot be saved"
            )));
        }
        let io = |e| Error::io("<embedding text>", e);
        writeln!(w, "{} {}", self.rows(), self.dim).map_err(io)?;
        let order = (2..self.rows()).map(|i| (i, None)).chain([
            (PAD, Some(PAD_NAME)),
            (UNK, Some(UNK_NAME)),
        ]);
        for (i, reserved) in order {
            match reserved {
                Some(name) => write!(w, "{name}").map_err(io)?,
                None => write!(w, "{}", self.vocab.token(i).expect("non-reserved")).map_err(io)?,
            }
            for v in self.row(i) {
                write!(w, " {v:.16e}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("missing header".into()))?
            .map_err(|e| Error::io("<embedding text>", e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad header `{header}`")))
        };
        if fields.len() != 2 {
            return Err(Error::Format(format!("bad header `{header}`")));
        }
        let (rows, dim) = (parse_usize(fields[0])?, parse_usize(fields[1])?);
        if rows < 2 || dim == 0 {
            return Err(Error::Format(format!("bad header `{header}`")));
        }

        let mut tokens = Vec::with_capacity(rows - 2);
        let mut values = Vec::with_capacity(rows - 2);
        let mut pad = None;
        let mut unk = None;
        let mut count = 0;
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<embedding text>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            count += 1;
            let mut parts = line.split(' ');
            let token = parts.next().unwrap_or_default();
            let row: Vec<f64> = parts
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Format(format!("row {}: bad value `{s}`", k + 1)))
                })
                .collect::<Result<_>>()?;
            if row.len() != dim {
                return Err(Error::Format(format!(
                    "row {}: {} values, expected {dim}",
                    k + 1,
                    row.len()
                )));
            }
            match token {
                PAD_NAME => pad = Some(row),
                UNK_NAME => unk = Some(row),
                t => {
                    let mut it = t.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) => {
                            tokens.push(c);
                            values.push(row);
                        }
                        _ => {
                            return Err(Error::Format(format!(
                                "row {}: token `{t}` is not a single character",
                                k + 1
                            )))
                        }
                    }
                }
            }
        }
        if count != rows {
            return Err(Error::Format(format!(
                "header declares {rows} rows, found {count}"
            )));
        }
        let (pad, unk) = match (pad, unk) {
            (Some(p), Some(u)) => (p, u),
            _ => return Err(Error::Format("missing <PAD> or <UNK> row".into())),
        };
        let vocab = Vocabulary::from_tokens(tokens)
            .map_err(|c| Error::Format(format!("duplicate token {c:?}")))?;
        let mut data = Vec::with_capacity(rows * dim);
        data.extend(pad);
        data.extend(unk);
        for row in values {
            data.extend(row);
        }
        EmbeddingTable::new(vocab, dim, data)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(BufWriter::new(file))
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(BufReader::new(file))
    }
}

/// Uniform on [-0.5/d, 0.5/d], deterministic per (vocab, d, seed).
pub fn init_embeddings(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingTable {
    assert!(dim >= 1, "embedding dimension must be >= 1");
    let mut rng = seeded(seed, 10);
    let bound = 0.5 / dim as f64;
    let data = (0..vocab.len() * dim)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    EmbeddingTable::new(vocab.clone(), dim, data).expect("shape is consistent")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Maximum context distance; each center draws its radius from [1, window].
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_count: usize,
    /// Frequent-token downsampling threshold; 0 disables.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            min_count: 5,
            subsample: 1e-3,
            seed: 1,
        }
    }
}

pub const UNIGRAM_POWER: f64 = 0.75;

/// Noise distribution `count^0.75 / sum count^0.75`, aligned with `counts`.
pub fn neg_sampling_dist(counts: &[u64]) -> Result<Vec<f64>> {
    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64).powf(UNIGRAM_POWER))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Empty("no token has a positive count".into()));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Negative-sampling loss `-ln σ(u·v) - Σ ln σ(-n·v)` and its gradients.
pub fn sgns_pair_loss_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> Result<PairGrad> {
    let d = center.len();
    if context.len() != d || negatives.iter().any(|n| n.len() != d) {
        return Err(Error::Dimension("SGNS vectors differ in length".into()));
    }
    let pos = dot(context, center);
    let mut loss = softplus(-pos);
    let g_pos = sigmoid(pos) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let d_context = center.iter().map(|v| g_pos * v).collect();
    let mut d_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let s = dot(n, center);
        loss += softplus(s);
        let g = sigmoid(s);
        for (dc, u) in d_center.iter_mut().zip(n.iter()) {
            *dc += g * u;
        }
        d_negs.push(center.iter().map(|v| g * v).collect());
    }
    Ok(PairGrad {
        loss,
        center: d_center,
        context: d_context,
        negatives: d_negs,
    })
}

/// One in-place SGD step on the pair loss. `scratch` must have the vectors'
/// length. Output vectors are updated sequentially, each from the
/// pre-step center vector.
pub(crate) fn sgns_step(
    center: &mut [f64],
    outputs: &mut [f64],
    dim: usize,
    targets: &[(usize, bool)],
    lr: f64,
    scratch: &mut [f64],
) {
    scratch.iter_mut().for_each(|x| *x = 0.0);
    for &(t, positive) in targets {
        let u = &mut outputs[t * dim..(t + 1) * dim];
        let label = if positive { 1.0 } else { 0.0 };
        let g = (label - sigmoid(dot(u, center))) * lr;
        for k in 0..dim {
            scratch[k] += g * u[k];
            u[k] += g * center[k];
        }
    }
    for (v, s) in center.iter_mut().zip(scratch.iter()) {
        *v += s;
    }
}

/// Trains character vectors with skip-gram and negative sampling and
/// returns the input-vector table over the corpus vocabulary.
pub fn skipgram_train(sentences: &[Vec<char>], cfg: &SgnsConfig) -> Result<EmbeddingTable> {
    if cfg.dim == 0 || cfg.window == 0 || cfg.lr <= 0.0 {
        return Err(Error::Config("dim, window and lr must be positive".into()));
    }
    let vocab = build_vocab(sentences.iter().map(Vec::as_slice), cfg.min_count);
    if vocab.is_empty() {
        return Err(Error::Empty(
            "no character reaches min_count in the unlabeled corpus".into(),
        ));
    }
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|&c| vocab.get(c)).collect())
        .collect();
    let mut counts = vec![0u64; vocab.len()];
    for &i in encoded.iter().flatten() {
        counts[i] += 1;
    }
    let total_tokens: u64 = counts.iter().sum();

    let mut table = init_embeddings(&vocab, cfg.dim, cfg.seed);
    if cfg.epochs == 0 {
        return Ok(table);
    }

    let noise = neg_sampling_dist(&counts[2..])?;
    let noise = WeightedIndex::new(&noise).map_err(|e| Error::Config(e.to_string()))?;
    let keep_prob: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if cfg.subsample <= 0.0 || c == 0 {
                1.0
            } else {
                let threshold = cfg.subsample * total_tokens as f64;
                ((c as f64 / threshold).sqrt() + 1.0) * threshold / c as f64
            }
        })
        .collect();

    let dim = cfg.dim;
    let mut outputs = vec![0.0; vocab.len() * dim];
    let mut rng = seeded(cfg.seed, 11);
    let mut scratch = vec![0.0; dim];
    let mut center = vec![0.0; dim];
    let mut targets = Vec::with_capacity(cfg.negatives + 1);
    let mut kept = Vec::new();
    let schedule = (cfg.epochs as u64 * total_tokens) as f64 + 1.0;
    let mut processed = 0u64;

    for _ in 0..cfg.epochs {
        for sentence in &encoded {
            let lr = cfg.lr * (1.0 - processed as f64 / schedule).max(1e-4);
            processed += sentence.len() as u64;
            kept.clear();
            for &i in sentence {
                let p = keep_prob[i];
                if p >= 1.0 || rng.gen::<f64>() < p {
                    kept.push(i);
                }
            }
            for pos in 0..kept.len() {
                let radius = rng.gen_range(1..=cfg.window);
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(kept.len() - 1);
                let word = kept[pos];
                for (cpos, &ctx) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    targets.clear();
                    targets.push((ctx, true));
                    for _ in 0..cfg.negatives {
                        let neg = noise.sample(&mut rng) + 2;
                        if neg != ctx {
                            targets.push((neg, false));
                        }
                    }
                    center.copy_from_slice(table.row(word));
                    sgns_step(&mut center, &mut outputs, dim, &targets, lr, &mut scratch);
                    table.row_mut(word).copy_from_slice(&center);
                }
            }
        }
    }
    Ok(table)
}
