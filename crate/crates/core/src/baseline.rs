//! Maximum-entropy baseline over lexical character features.
//!
//! Each position is classified independently from unigram and bigram
//! character templates around it; the resulting log-probabilities go
//! through the same Viterbi decoder as the neural tagger.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::corpus::{Tag, TaggedSentence, NUM_TAGS};
use crate::decoder::{Emissions, Tagger};
use crate::error::{Error, Result};
use crate::network::{log_softmax, softmax};
use crate::rng::seeded;

pub const PAD_TOKEN: &str = "<PAD>";

fn offset_label(offset: isize) -> String {
    if offset > 0 {
        format!("+{offset}")
    } else {
        offset.to_string()
    }
}

/// Unigrams `U<k>=c` for k in -w..=w and bigrams `B<k>=c c'` over
/// positions (k, k+1) for k in -w..w. Positions past the sentence edges
/// read as `<PAD>`.
pub fn extract_features(chars: &[char], t: usize, radius: usize) -> Vec<String> {
    let w = radius as isize;
    let at = |offset: isize| -> String {
        let pos = t as isize + offset;
        if pos < 0 || pos as usize >= chars.len() {
            PAD_TOKEN.to_string()
        } else {
            chars[pos as usize].to_string()
        }
    };
    let mut out = Vec::with_capacity(4 * radius + 1);
    for k in -w..=w {
        out.push(format!("U{}={}", offset_label(k), at(k)));
    }
    for k in -w..w {
        out.push(format!("B{}={}{}", offset_label(k), at(k), at(k + 1)));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxEntConfig {
    pub radius: usize,
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for MaxEntConfig {
    fn default() -> Self {
        MaxEntConfig {
            radius: 2,
            lr: 0.1,
            epochs: 20,
            l2: 1e-4,
            seed: 1,
        }
    }
}

/// Multinomial logistic regression over a fixed feature dictionary.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxEntModel {
    features: Vec<String>,
    index: HashMap<String, usize>,
    /// `features x 3`, row-major.
    pub weights: Vec<f64>,
    pub bias: [f64; NUM_TAGS],
    pub radius: usize,
    pub l2: f64,
}

impl MaxEntModel {
    pub fn new(features: Vec<String>, radius: usize, l2: f64) -> Result<Self> {
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if index.insert(f.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate feature `{f}`")));
            }
        }
        Ok(MaxEntModel {
            weights: vec![0.0; features.len() * NUM_TAGS],
            features,
            index,
            bias: [0.0; NUM_TAGS],
            radius,
            l2,
        })
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    /// Ids of known features at position `t`; unseen features are dropped.
    pub fn active(&self, chars: &[char], t: usize) -> Vec<usize> {
        extract_features(chars, t, self.radius)
            .iter()
            .filter_map(|f| self.index.get(f).copied())
            .collect()
    }

    fn logits(&self, active: &[usize]) -> [f64; NUM_TAGS] {
        let mut z = self.bias;
        for &f in active {
            for (zc, w) in z.iter_mut().zip(&self.weights[f * NUM_TAGS..(f + 1) * NUM_TAGS]) {
                *zc += w;
            }
        }
        z
    }

    pub fn probabilities(&self, chars: &[char], t: usize) -> [f64; NUM_TAGS] {
        softmax(&self.logits(&self.active(chars, t)))
    }

    /// Mean per-position NLL plus (λ/2)·‖W‖².
    pub fn objective(&self, data: &[TaggedSentence]) -> f64 {
        self.objective_grad(data, false).0
    }

    /// Objective and, when requested, its exact full-batch gradient
    /// (weights, bias).
    pub fn objective_grad(&self, data: &[TaggedSentence], with_grad: bool) -> (f64, Vec<f64>, [f64; NUM_TAGS]) {
        let mut gw = if with_grad { vec![0.0; self.weights.len()] } else { Vec::new() };
        let mut gb = [0.0; NUM_TAGS];
        let mut total = 0.0;
        let mut n = 0usize;
        for s in data {
            for (t, &gold) in s.tags().iter().enumerate() {
                let active = self.active(s.chars(), t);
                let z = self.logits(&active);
                total -= log_softmax(&z)[gold.code()];
                n += 1;
                if with_grad {
                    let mut delta = softmax(&z);
                    delta[gold.code()] -= 1.0;
                    for &f in &active {
                        for c in 0..NUM_TAGS {
                            gw[f * NUM_TAGS + c] += delta[c];
                        }
                    }
                    for c in 0..NUM_TAGS {
                        gb[c] += delta[c];
                    }
                }
            }
        }
        let n = n.max(1) as f64;
        let reg = 0.5 * self.l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        if with_grad {
            for (g, w) in gw.iter_mut().zip(&self.weights) {
                *g = *g / n + self.l2 * w;
            }
            gb.iter_mut().for_each(|g| *g /= n);
        }
        (total / n + reg, gw, gb)
    }

    pub fn accuracy(&self, data: &[TaggedSentence]) -> f64 {
        let mut right = 0usize;
        let mut total = 0usize;
        for s in data {
            for (t, &gold) in s.tags().iter().enumerate() {
                let p = self.probabilities(s.chars(), t);
                let best = (0..NUM_TAGS)
                    .fold(0, |b, c| if p[c] > p[b] { c } else { b });
                right += usize::from(best == gold.code());
                total += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            right as f64 / total as f64
        }
    }
}

impl Tagger for MaxEntModel {
    fn emissions(&self, chars: &[char]) -> Result<Emissions> {
        Ok(Emissions::new(
            (0..chars.len())
                .map(|t| log_softmax(&self.logits(&self.active(chars, t))))
                .collect(),
        ))
    }
}

#[derive(Clone, Debug)]
pub struct MaxEntOutcome {
    pub model: MaxEntModel,
    /// Objective after each accepted epoch, starting with the untrained value.
    pub losses: Vec<f64>,
    pub final_lr: f64,
}

/// Per-position SGD with lazy L2 on the active features. An epoch that
/// raises the training objective is rolled back and the learning rate
/// halved.
pub fn maxent_train(train: &[TaggedSentence], cfg: &MaxEntConfig) -> Result<MaxEntOutcome> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no sentences".into()));
    }
    if cfg.radius == 0 || !(cfg.lr > 0.0) || !(cfg.l2 >= 0.0) {
        return Err(Error::Config("radius >= 1, lr > 0 and l2 >= 0 required".into()));
    }
    let mut names = Vec::new();
    let mut seen = HashMap::new();
    for s in train {
        for t in 0..s.len() {
            for f in extract_features(s.chars(), t, cfg.radius) {
                if !seen.contains_key(&f) {
                    seen.insert(f.clone(), names.len());
                    names.push(f);
                }
            }
        }
    }
    let mut model = MaxEntModel::new(names, cfg.radius, cfg.l2)?;

    let examples: Vec<(Vec<usize>, Tag)> = train
        .iter()
        .flat_map(|s| {
            let model = &model;
            (0..s.len()).map(move |t| (model.active(s.chars(), t), s.tags()[t]))
        })
        .collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = seeded(cfg.seed, 40);
    let mut lr = cfg.lr;
    let mut losses = vec![model.objective(train)];

    for epoch in 1..=cfg.epochs {
        let snapshot = (model.weights.clone(), model.bias);
        order.shuffle(&mut rng);
        for &e in &order {
            let (active, gold) = &examples[e];
            let mut delta = softmax(&model.logits(active));
            delta[gold.code()] -= 1.0;
            for &f in active {
                let row = &mut model.weights[f * NUM_TAGS..(f + 1) * NUM_TAGS];
                for c in 0..NUM_TAGS {
                    row[c] -= lr * (delta[c] + cfg.l2 * row[c]);
                }
            }
            for c in 0..NUM_TAGS {
                model.bias[c] -= lr * delta[c];
            }
        }
        let loss = model.objective(train);
        let prev = *losses.last().expect("initial loss recorded");
        if loss > prev {
            model.weights = snapshot.0;
            model.bias = snapshot.1;
            lr *= 0.5;
            log::debug!("maxent epoch {epoch}: loss rose to {loss:.6}, lr -> {lr}");
            losses.push(prev);
        } else {
            log::debug!("maxent epoch {epoch}: loss {loss:.6}");
            losses.push(loss);
        }
    }
    Ok(MaxEntOutcome {
        model,
        losses,
        final_lr: lr,
    })
}
