//! Deterministic synthetic trigger corpora.
//!
//! Sentences are background characters with at most one trigger word from a
//! small lexicon. Trigger words use an alphabet disjoint from the background
//! and are usually preceded by a cue character. Background characters and
//! lexicon words are both Zipf-distributed, so a small labeled sample leaves
//! the rarer trigger words unseen while a large unlabeled sample contains
//! them.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Tag, TaggedSentence};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::rng::seeded;

const BACKGROUND_BASE: u32 = 0x4E00;
const TRIGGER_BASE: u32 = 0x7000;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub background_size: usize,
    /// Background characters that only occur in unlabeled output.
    pub extra_unlabeled_chars: usize,
    /// Probability that an unlabeled background character is one of the extras.
    pub extra_char_prob: f64,
    pub background_zipf: f64,
    pub trigger_alphabet_size: usize,
    pub lexicon_size: usize,
    pub trigger_min_len: usize,
    pub trigger_max_len: usize,
    pub lexicon_zipf: f64,
    pub cue_count: usize,
    pub cue_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub trigger_prob: f64,
    pub labeled: usize,
    pub unlabeled: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            background_size: 200,
            extra_unlabeled_chars: 40,
            extra_char_prob: 0.05,
            background_zipf: 1.0,
            trigger_alphabet_size: 60,
            lexicon_size: 30,
            trigger_min_len: 1,
            trigger_max_len: 3,
            lexicon_zipf: 1.0,
            cue_count: 10,
            cue_prob: 0.9,
            min_len: 8,
            max_len: 30,
            trigger_prob: 0.7,
            labeled: 2400,
            unlabeled: 50_000,
        }
    }
}

macro_rules! synth_keys {
    ($mac:ident) => {
        $mac!(background_size, extra_unlabeled_chars, extra_char_prob, background_zipf,
              trigger_alphabet_size, lexicon_size, trigger_min_len, trigger_max_len,
              lexicon_zipf, cue_count, cue_prob, min_len, max_len, trigger_prob,
              labeled, unlabeled)
    };
}

impl SynthConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut cfg = SynthConfig::default();
        cfg.apply_kv(kv)?;
        Ok(cfg)
    }

    /// Overrides fields named in `kv`; unknown keys are rejected.
    pub fn apply_kv(&mut self, kv: &KeyValues) -> Result<()> {
        macro_rules! apply {
            ($($f:ident),*) => {
                const KNOWN: &[&str] = &[$(stringify!($f)),*];
                for key in kv.keys() {
                    if !KNOWN.contains(&key) {
                        return Err(Error::Config(format!("unknown generator key `{key}`")));
                    }
                }
                $(kv.apply(stringify!($f), &mut self.$f)?;)*
            };
        }
        synth_keys!(apply);
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        macro_rules! put {
            ($($f:ident),*) => { $(kv.set(stringify!($f), self.$f);)* };
        }
        synth_keys!(put);
        kv
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.lexicon_size == 0 || self.trigger_alphabet_size == 0 {
            return fail("trigger lexicon is empty");
        }
        if self.trigger_min_len == 0 || self.trigger_max_len < self.trigger_min_len {
            return fail("trigger length range is empty");
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return fail("sentence length range is empty");
        }
        if self.min_len < self.trigger_max_len + 1 {
            return fail("min_len must leave room for a cue and the longest trigger");
        }
        if self.background_size == 0 {
            return fail("background alphabet is empty");
        }
        if self.cue_count > self.background_size {
            return fail("more cue characters than background characters");
        }
        for (name, p) in [
            ("cue_prob", self.cue_prob),
            ("trigger_prob", self.trigger_prob),
            ("extra_char_prob", self.extra_char_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.cue_count == 0 && self.cue_prob > 0.0 {
            return fail("cue_prob > 0 requires at least one cue character");
        }
        if self.background_zipf < 0.0 || self.lexicon_zipf < 0.0 {
            return fail("Zipf exponents must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub labeled: Vec<TaggedSentence>,
    pub unlabeled: Vec<Vec<char>>,
    pub lexicon: Vec<Vec<char>>,
    pub cues: Vec<char>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitCorpus {
    pub train: Vec<TaggedSentence>,
    pub dev: Vec<TaggedSentence>,
    pub test: Vec<TaggedSentence>,
}

impl SyntheticCorpus {
    /// Partitions the labeled sentences in generation order.
    pub fn split(&self, train: usize, dev: usize, test: usize) -> Result<SplitCorpus> {
        if train + dev + test > self.labeled.len() {
            return Err(Error::Config(format!(
                "split {train}+{dev}+{test} exceeds {} labeled sentences",
                self.labeled.len()
            )));
        }
        let l = &self.labeled;
        Ok(SplitCorpus {
            train: l[..train].to_vec(),
            dev: l[train..train + dev].to_vec(),
            test: l[train + dev..train + dev + test].to_vec(),
        })
    }
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| (r as f64).powf(-s))).expect("non-empty weights")
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    background: Vec<char>,
    extras: Vec<char>,
    background_dist: WeightedIndex<f64>,
    lexicon: Vec<Vec<char>>,
    lexicon_dist: WeightedIndex<f64>,
    cues: Vec<char>,
}

impl Generator<'_> {
    fn background_char(&self, rng: &mut ChaCha8Rng, unlabeled: bool) -> char {
        if unlabeled && !self.extras.is_empty() && rng.gen_bool(self.cfg.extra_char_prob) {
            return *self.extras.choose(rng).expect("non-empty");
        }
        self.background[self.background_dist.sample(rng)]
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, unlabeled: bool) -> (Vec<char>, Vec<Tag>) {
        let cfg = self.cfg;
        let len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let mut chars: Vec<char> = (0..len)
            .map(|_| self.background_char(rng, unlabeled))
            .collect();
        let mut tags = vec![Tag::O; len];
        if rng.gen_bool(cfg.trigger_prob) {
            let word = &self.lexicon[self.lexicon_dist.sample(rng)];
            let cued = rng.gen_bool(cfg.cue_prob);
            let lead = usize::from(cued);
            let start = rng.gen_range(lead..=len - word.len());
            if cued {
                chars[start - 1] = *self.cues.choose(rng).expect("cue set non-empty");
            }
            for (k, &c) in word.iter().enumerate() {
                chars[start + k] = c;
                tags[start + k] = if k == 0 { Tag::B } else { Tag::I };
            }
        }
        (chars, tags)
    }
}

/// Generates a labeled and an unlabeled corpus; a pure function of its inputs.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = seeded(seed, 0);

    let total_bg = config.background_size + config.extra_unlabeled_chars;
    let bg_chars: Vec<char> = (0..total_bg as u32)
        .map(|i| char::from_u32(BACKGROUND_BASE + i).expect("CJK range"))
        .collect();
    let (background, extras) = bg_chars.split_at(config.background_size);

    let mut alphabet: Vec<char> = (0..config.trigger_alphabet_size as u32)
        .map(|i| char::from_u32(TRIGGER_BASE + i).expect("CJK range"))
        .collect();
    alphabet.shuffle(&mut rng);
    let mut lexicon = Vec::with_capacity(config.lexicon_size);
    let mut cursor = 0;
    for _ in 0..config.lexicon_size {
        let len = rng.gen_range(config.trigger_min_len..=config.trigger_max_len);
        let word: Vec<char> = (0..len)
            .map(|k| alphabet[(cursor + k) % alphabet.len()])
            .collect();
        cursor += len;
        lexicon.push(word);
    }
    let cues: Vec<char> = background
        .choose_multiple(&mut rng, config.cue_count)
        .copied()
        .collect();

    let gen = Generator {
        cfg: config,
        background: background.to_vec(),
        extras: extras.to_vec(),
        background_dist: zipf(config.background_size, config.background_zipf),
        lexicon_dist: zipf(config.lexicon_size, config.lexicon_zipf),
        lexicon,
        cues,
    };

    let mut rng = seeded(seed, 1);
    let mut labeled = Vec::with_capacity(config.labeled);
    let mut seen = HashSet::new();
    while labeled.len() < config.labeled {
        let (chars, tags) = gen.sentence(&mut rng, false);
        if seen.insert(chars.clone()) {
            labeled.push(TaggedSentence::new(chars, tags).expect("generator emits valid BIO"));
        }
    }

    let mut rng = seeded(seed, 2);
    let unlabeled = (0..config.unlabeled)
        .map(|_| gen.sentence(&mut rng, true).0)
        .collect();

    Ok(SyntheticCorpus {
        labeled,
        unlabeled,
        lexicon: gen.lexicon,
        cues: gen.cues,
    })
}
