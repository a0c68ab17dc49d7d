//! Embedding-dimension sweep: one tagger per dimension, shared seed.

use crate::corpus::{build_vocab, TaggedSentence};
use crate::decoder::TransitionModel;
use crate::embeddings::{init_embeddings, skipgram_train, EmbeddingTable, SgnsConfig};
use crate::error::{Error, Result};
use crate::eval::{round2, Score};
use crate::network::{evaluate, train_supervised, TrainConfig};

pub const DEFAULT_DIMS: [usize; 5] = [10, 25, 50, 100, 200];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub dim: usize,
    pub dev: Score,
}

/// Seeded random embeddings over the characters of `train`.
pub fn random_embeddings(train: &[TaggedSentence], dim: usize, seed: u64) -> EmbeddingTable {
    let vocab = build_vocab(train.iter().map(TaggedSentence::chars), 1);
    init_embeddings(&vocab, dim, seed)
}

/// Trains one model per dimension and scores it on `dev`. With an
/// unlabeled corpus the embeddings are pretrained at each dimension,
/// otherwise they start random.
pub fn sweep_dims(
    dims: &[usize],
    unlabeled: Option<&[Vec<char>]>,
    sgns: &SgnsConfig,
    train: &[TaggedSentence],
    dev: &[TaggedSentence],
    cfg: &TrainConfig,
    tm: &TransitionModel,
) -> Result<Vec<SweepRow>> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Config("sweep needs a non-empty list of positive dims".into()));
    }
    if dev.is_empty() {
        return Err(Error::Empty("sweep needs a dev set".into()));
    }
    let mut rows = Vec::with_capacity(dims.len());
    for &dim in dims {
        let init = match unlabeled {
            Some(text) => skipgram_train(text, &SgnsConfig { dim, ..sgns.clone() })?,
            None => random_embeddings(train, dim, cfg.seed),
        };
        let out = train_supervised(train, dev, init, cfg, tm)?;
        let dev_score = evaluate(&out.model, tm, dev)?;
        log::info!("dim {dim}: dev F1 {:.2}", dev_score.f1);
        rows.push(SweepRow { dim, dev: dev_score });
    }
    Ok(rows)
}

/// `dim<TAB>P<TAB>R<TAB>F1` with a header line.
pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("dim\tP\tR\tF1\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.dim,
            round2(r.dev.precision),
            round2(r.dev.recall),
            round2(r.dev.f1)
        ));
    }
    out
}
