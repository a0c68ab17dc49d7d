//! Fixtures shared by the benchmarks.

use etrig_core::corpus::{generate_synthetic, SynthConfig, TaggedSentence};
use etrig_core::network::Mlp;
use etrig_core::sweep::random_embeddings;

/// A default-architecture network over a small synthetic corpus.
pub fn fixture(dim: usize) -> (Mlp, Vec<TaggedSentence>) {
    let cfg = SynthConfig { labeled: 200, unlabeled: 0, ..SynthConfig::default() };
    let corpus = generate_synthetic(&cfg, 1).expect("default generator config is valid");
    let model = Mlp::new(random_embeddings(&corpus.labeled, dim, 1), 2, &[300], 1);
    (model, corpus.labeled)
}
