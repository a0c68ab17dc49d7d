use std::time::Instant;

use etrig_core::corpus::{encode, generate_synthetic, SynthConfig, TaggedSentence, Tag};
use etrig_core::decoder::{decode_sentence, estimate_transitions, Tagger, TransitionModel};
use etrig_core::embeddings::{skipgram_train, SgnsConfig};
use etrig_core::network::{evaluate, mean_loss, train_supervised, Mlp, TrainConfig};
use etrig_core::rng::seeded;
use etrig_core::sweep::random_embeddings;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn sgns_places_adjacent_characters_together() {
    let mut rng = seeded(5, 0);
    // Each pair lives among its own filler characters.
    let topics = [(['a', 'b'], ['e', 'f', 'g', 'h']), (['c', 'd'], ['i', 'j', 'k', 'l'])];
    let sentences: Vec<Vec<char>> = (0..1000)
        .map(|_| {
            let (pair, filler) = topics[rng.gen_range(0..2)];
            let mut s = Vec::new();
            for _ in 0..rng.gen_range(3..7) {
                if rng.gen_bool(0.3) {
                    s.extend(pair);
                } else {
                    s.push(*filler.choose(&mut rng).unwrap());
                }
            }
            s
        })
        .collect();
    let cfg = SgnsConfig { dim: 10, min_count: 1, subsample: 0.0, ..SgnsConfig::default() };
    let table = skipgram_train(&sentences, &cfg).unwrap();
    let ix = |c| table.vocab().get(c).unwrap();
    let (ab, ad) = (table.cosine(ix('a'), ix('b')), table.cosine(ix('a'), ix('d')));
    assert!(ab > ad, "cos(a,b)={ab} cos(a,d)={ad}");
    assert_eq!(table, skipgram_train(&sentences, &cfg).unwrap());
}

fn tagged(text: &str, start: usize, len: usize) -> TaggedSentence {
    let chars: Vec<char> = text.chars().collect();
    let mut tags = vec![Tag::O; chars.len()];
    tags[start] = Tag::B;
    for t in &mut tags[start + 1..start + len] {
        *t = Tag::I;
    }
    TaggedSentence::new(chars, tags).unwrap()
}

#[test]
fn single_sentence_is_memorized() {
    let data = vec![tagged("我们今天收购了这家公司", 4, 2)];
    assert_eq!(data[0].len(), 11);
    let cfg = TrainConfig { epochs: 200, patience: 0, ..TrainConfig::default() };
    let tm = TransitionModel::uniform(true);
    let out = train_supervised(&data, &[], random_embeddings(&data, 50, 1), &cfg, &tm).unwrap();
    assert_eq!(evaluate(&out.model, &tm, &data).unwrap().f1, 100.0);
}

#[test]
fn first_epoch_lowers_the_loss() {
    let corpus = generate_synthetic(&SynthConfig { labeled: 100, unlabeled: 0, ..SynthConfig::default() }, 3).unwrap();
    let train = &corpus.labeled;
    let cfg = TrainConfig { epochs: 1, patience: 0, ..TrainConfig::default() };
    let init = random_embeddings(train, 50, cfg.seed);
    let untrained = Mlp::new(init.clone(), cfg.radius, &cfg.hidden, cfg.seed);
    let before = mean_loss(&untrained, train).unwrap();
    assert!((before - 3f64.ln()).abs() < 0.1, "initial loss {before}");
    let out = train_supervised(train, &[], init, &cfg, &TransitionModel::uniform(true)).unwrap();
    let after = mean_loss(&out.model, train).unwrap();
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn default_network_fits_fifty_sentences() {
    let corpus = generate_synthetic(&SynthConfig { labeled: 50, unlabeled: 0, ..SynthConfig::default() }, 11).unwrap();
    let train = &corpus.labeled;
    let cfg = TrainConfig { epochs: 500, patience: 0, ..TrainConfig::default() };
    let tm = estimate_transitions(train.iter().map(|s| s.tags()), 1.0, true).unwrap();
    let out = train_supervised(train, &[], random_embeddings(train, 50, 1), &cfg, &tm).unwrap();
    let (mut right, mut total) = (0, 0);
    for s in train {
        let predicted = out.model.emissions(s.chars()).unwrap().argmax_tags();
        right += predicted.iter().zip(s.tags()).filter(|(a, b)| a == b).count();
        total += s.len();
    }
    assert_eq!(right, total);
}

#[test]
fn tagging_throughput() {
    let corpus = generate_synthetic(&SynthConfig { labeled: 400, unlabeled: 0, ..SynthConfig::default() }, 2).unwrap();
    let model = Mlp::new(random_embeddings(&corpus.labeled, 50, 1), 2, &[300], 1);
    let tm = TransitionModel::uniform(true);
    let chars: usize = corpus.labeled.iter().map(TaggedSentence::len).sum();
    let mut best = 0.0f64;
    for _ in 0..3 {
        let t0 = Instant::now();
        for s in &corpus.labeled {
            decode_sentence(&model, &tm, s.chars()).unwrap();
        }
        best = best.max(chars as f64 / t0.elapsed().as_secs_f64());
    }
    assert!(best >= 10_000.0, "{best:.0} chars/s");
    assert_eq!(encode(&[], model.embedding.vocab()), Vec::<usize>::new());
}
