use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use etrig_core::baseline::{maxent_train, MaxEntModel};
use etrig_core::corpus::{
    generate_synthetic, read_corpus, read_unlabeled, write_corpus_file, write_unlabeled_file,
    TaggedSentence,
};
use etrig_core::decoder::{decode_sentence, estimate_transitions, Tagger, TransitionModel};
use etrig_core::embeddings::{skipgram_train, EmbeddingTable};
use etrig_core::eval::{round2, score_report, score_spans};
use etrig_core::kv::{format_list, parse_list, KeyValues};
use etrig_core::model_io::{self, ModelKind};
use etrig_core::network::{evaluate, train_supervised};
use etrig_core::sweep::{random_embeddings, sweep_dims, sweep_tsv, DEFAULT_DIMS};
use etrig_core::Error;

use crate::settings::{self, log_resolved, merge, Settings};
use crate::{Common, EvalArgs, ModelFlags, PretrainArgs, SweepArgs, SynthArgs, TagArgs, TrainArgs};

/// Bad flags or unusable input files.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NonFinite(_) | Error::Decode(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn required_out(common: &Common) -> Result<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| usage("--out is required for this command"))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn settings_for(common: &Common) -> Result<Settings> {
    let mut s = Settings::load(common.config.as_deref())?;
    s.flag("seed", common.seed);
    Ok(s)
}

fn apply_model_flags(s: &mut Settings, m: &ModelFlags) {
    s.flag("dim", m.dim);
    s.flag("radius", m.radius);
    s.flag("hidden", m.hidden.clone());
    s.flag("lr", m.lr);
    s.flag("epochs", m.epochs);
    s.flag("l2", m.l2);
    s.flag("patience", m.patience);
    s.flag("alpha", m.alpha);
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut s = settings_for(&args.common)?;
    s.flag("train", args.train);
    s.flag("dev", args.dev);
    s.flag("test", args.test);
    s.flag("unlabeled", args.unlabeled);
    let out = required_out(&args.common)?;
    let seed = s.get("seed", 1u64)?;
    let (train, dev, test) = (s.get("train", 2000usize)?, s.get("dev", 200usize)?, s.get("test", 200usize)?);
    let cfg = settings::synth_config(&s, train + dev + test)?;

    let mut resolved = cfg.to_kv();
    resolved.set("seed", seed);
    resolved.set("train", train);
    resolved.set("dev", dev);
    resolved.set("test", test);
    log_resolved("synth", &resolved);

    let corpus = generate_synthetic(&cfg, seed)?;
    let split = corpus.split(train, dev, test)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_corpus_file(out.join("train.txt"), &split.train)?;
    write_corpus_file(out.join("dev.txt"), &split.dev)?;
    write_corpus_file(out.join("test.txt"), &split.test)?;
    write_unlabeled_file(out.join("unlabeled.txt"), &corpus.unlabeled)?;
    fs::write(out.join("synth.config"), resolved.to_text())
        .with_context(|| format!("writing {}", out.display()))?;
    log::info!(
        "wrote {} train, {} dev, {} test, {} unlabeled sentences to {}",
        split.train.len(),
        split.dev.len(),
        split.test.len(),
        corpus.unlabeled.len(),
        out.display()
    );
    Ok(())
}

pub fn pretrain(args: PretrainArgs) -> Result<()> {
    let mut s = settings_for(&args.common)?;
    s.flag("dim", args.dim);
    s.flag("window", args.window);
    s.flag("negatives", args.negatives);
    s.flag("epochs", args.epochs);
    s.flag("lr", args.lr);
    s.flag("min_count", args.min_count);
    s.flag("subsample", args.subsample);
    s.warn_unknown(settings::SGNS_KEYS);
    let out = required_out(&args.common)?;
    let cfg = settings::sgns_config(s.raw(), 1)?;
    let resolved = settings::sgns_kv(&cfg);
    log_resolved("pretrain", &resolved);

    let text = read_unlabeled(&args.input)?;
    let t0 = Instant::now();
    let table = skipgram_train(&text, &cfg)?;
    log::info!(
        "pretrained {} x {} embeddings in {:.1}s",
        table.rows(),
        table.dim(),
        t0.elapsed().as_secs_f64()
    );
    model_io::save_embeddings(out, &table, &resolved)?;
    let text_path = with_suffix(out, ".txt");
    table.save_text(&text_path)?;
    log::info!("wrote {} and {}", out.display(), text_path.display());
    Ok(())
}

fn load_init_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let bytes = fs::read(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    if bytes.starts_with(model_io::MAGIC) {
        Ok(model_io::load_embeddings(path)?.0)
    } else {
        Ok(EmbeddingTable::load_text(path)?)
    }
}

/// A transition archive, or a text table of 4 lines x 3 log scores.
fn load_transitions_any(path: &Path, weight: Option<f64>, constrained: bool) -> Result<TransitionModel> {
    let bytes = fs::read(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    if bytes.starts_with(model_io::MAGIC) {
        let tm = model_io::load_transitions(path)?.0;
        Ok(match weight {
            Some(w) => tm.with_weight(w),
            None => tm,
        })
    } else {
        Ok(TransitionModel::load_text(path, weight.unwrap_or(1.0), constrained)?)
    }
}

fn transitions_for(
    s: &Settings,
    external: Option<&Path>,
    train: &[TaggedSentence],
    resolved: &mut KeyValues,
) -> Result<TransitionModel> {
    let constrained = s.get("constrained", true)?;
    let weight = s.get("transition_weight", 1.0f64)?;
    resolved.set("constrained", constrained);
    resolved.set("transition_weight", weight);
    if let Some(path) = external {
        resolved.set("transitions", path.display());
        return load_transitions_any(path, Some(weight), constrained);
    }
    let alpha = s.get("alpha", 1.0f64)?;
    resolved.set("alpha", alpha);
    Ok(estimate_transitions(train.iter().map(|t| t.tags()), alpha, constrained)?.with_weight(weight))
}

fn write_dev_predictions(path: &Path, tagger: &dyn Tagger, tm: &TransitionModel, dev: &[TaggedSentence]) -> Result<()> {
    let pred = tag_all(tagger, tm, dev.iter().map(|s| s.chars().to_vec()).collect())?;
    write_corpus_file(path, &pred)?;
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut s = settings_for(&args.common)?;
    apply_model_flags(&mut s, &args.model);
    s.flag("kind", args.kind.clone());
    s.warn_unknown(settings::TRAIN_KEYS);
    let out = required_out(&args.common)?;
    let kind: String = s.get("kind", "dnn".to_string())?;
    let train = read_corpus(&args.train)?;
    let dev = read_corpus(&args.dev)?;
    let log_path = args.log.clone().unwrap_or_else(|| with_suffix(out, ".log.tsv"));
    let mut log_text = String::from("epoch\tloss\tP\tR\tF1\n");

    match kind.as_str() {
        "dnn" => {
            let cfg = settings::train_config(&s)?;
            let mut resolved = settings::train_kv(&cfg);
            let tm = transitions_for(&s, args.transitions.as_deref(), &train, &mut resolved)?;
            let init = match &args.init_embeddings {
                Some(path) => {
                    let table = load_init_embeddings(path)?;
                    if let Some(dim) = s.raw().get_parsed::<usize>("dim")? {
                        if dim != table.dim() {
                            return Err(Error::Dimension(format!(
                                "dim={dim} but {} has dimension {}",
                                path.display(),
                                table.dim()
                            ))
                            .into());
                        }
                    }
                    resolved.set("init_embeddings", path.display());
                    table
                }
                None => random_embeddings(&train, s.get("dim", 50usize)?, cfg.seed),
            };
            resolved.set("dim", init.dim());
            resolved.set("kind", "dnn");
            log_resolved("train", &resolved);

            let outcome = train_supervised(&train, &dev, init, &cfg, &tm)?;
            for e in &outcome.log {
                writeln!(
                    log_text,
                    "{}\t{:.6}\t{}\t{}\t{}",
                    e.epoch,
                    e.loss,
                    round2(e.dev.precision),
                    round2(e.dev.recall),
                    round2(e.dev.f1)
                )?;
            }
            log::info!("keeping epoch {} of {}", outcome.best_epoch, outcome.log.len());
            model_io::save_dnn(out, &outcome.model, &resolved)?;
            model_io::save_transitions(with_suffix(out, ".trans"), &tm, &resolved)?;
            if let Some(p) = &args.dev_predictions {
                write_dev_predictions(p, &outcome.model, &tm, &dev)?;
            }
        }
        "maxent" => {
            if args.init_embeddings.is_some() {
                return Err(usage("--init-embeddings applies to dnn models only"));
            }
            let cfg = settings::maxent_config(&s)?;
            let mut resolved = settings::maxent_kv(&cfg);
            let tm = transitions_for(&s, args.transitions.as_deref(), &train, &mut resolved)?;
            resolved.set("kind", "maxent");
            log_resolved("train", &resolved);

            let outcome = maxent_train(&train, &cfg)?;
            let dev_score = evaluate(&outcome.model, &tm, &dev)?;
            // Row 0 is the objective before any update.
            let last = outcome.losses.len() - 1;
            for (k, loss) in outcome.losses.iter().enumerate() {
                if k == last {
                    writeln!(
                        log_text,
                        "{k}\t{loss:.6}\t{}\t{}\t{}",
                        round2(dev_score.precision),
                        round2(dev_score.recall),
                        round2(dev_score.f1)
                    )?;
                } else {
                    writeln!(log_text, "{k}\t{loss:.6}\t-\t-\t-")?;
                }
            }
            log::info!("final learning rate {}", outcome.final_lr);
            model_io::save_maxent(out, &outcome.model, &resolved)?;
            model_io::save_transitions(with_suffix(out, ".trans"), &tm, &resolved)?;
            if let Some(p) = &args.dev_predictions {
                write_dev_predictions(p, &outcome.model, &tm, &dev)?;
            }
        }
        other => return Err(usage(format!("unknown model kind `{other}`, expected dnn or maxent"))),
    }
    fs::write(&log_path, log_text).with_context(|| format!("writing {}", log_path.display()))?;
    log::info!("wrote {} and {}", out.display(), log_path.display());
    Ok(())
}

fn tag_all(tagger: &dyn Tagger, tm: &TransitionModel, input: Vec<Vec<char>>) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::with_capacity(input.len());
    for chars in input {
        let spans = decode_sentence(tagger, tm, &chars)?;
        out.push(TaggedSentence::from_spans(chars, &spans)?);
    }
    Ok(out)
}

/// Either tagger kind behind one trait object.
pub fn load_tagger(path: &Path) -> Result<Box<dyn Tagger>> {
    Ok(match model_io::peek_kind(path)? {
        ModelKind::Dnn => Box::new(model_io::load_dnn(path)?.0),
        ModelKind::MaxEnt => Box::<MaxEntModel>::new(model_io::load_maxent(path)?.0),
        other => {
            return Err(Error::WrongKind {
                expected: "dnn or maxent".into(),
                found: other.to_string(),
            }
            .into())
        }
    })
}

pub fn tag(args: TagArgs) -> Result<()> {
    let out = required_out(&args.common)?;
    let tagger = load_tagger(&args.model)?;
    let trans_path = args.transitions.clone().unwrap_or_else(|| with_suffix(&args.model, ".trans"));
    let tm = if trans_path.exists() {
        load_transitions_any(&trans_path, None, true)?
    } else if args.transitions.is_some() {
        return Err(usage(format!("{} does not exist", trans_path.display())));
    } else {
        log::warn!("{} not found, decoding with uniform constrained transitions", trans_path.display());
        TransitionModel::uniform(true)
    };
    let input: Vec<Vec<char>> = if args.labeled_input {
        read_corpus(&args.input)?.iter().map(|s| s.chars().to_vec()).collect()
    } else {
        read_unlabeled(&args.input)?
    };
    let n_chars: usize = input.iter().map(Vec::len).sum();
    let t0 = Instant::now();
    let tagged = tag_all(tagger.as_ref(), &tm, input)?;
    let secs = t0.elapsed().as_secs_f64();
    log::info!(
        "tagged {} sentences, {n_chars} characters ({:.0} chars/s)",
        tagged.len(),
        n_chars as f64 / secs.max(1e-9)
    );
    write_corpus_file(out, &tagged)?;
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let pred = read_corpus(&args.pred)?;
    let gold = read_corpus(&args.gold)?;
    if pred.len() != gold.len() {
        return Err(usage(format!(
            "{} has {} sentences but {} has {}",
            args.pred.display(),
            pred.len(),
            args.gold.display(),
            gold.len()
        )));
    }
    for (k, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.len() != g.len() {
            return Err(usage(format!(
                "sentence {} has {} characters in the predictions but {} in gold",
                k + 1,
                p.len(),
                g.len()
            )));
        }
    }
    let pred_spans: Vec<_> = pred.iter().map(TaggedSentence::spans).collect();
    let gold_spans: Vec<_> = gold.iter().map(TaggedSentence::spans).collect();
    let score = score_spans(&pred_spans, &gold_spans)?;
    let report = score_report(&score, &args.label);
    println!("{report}");
    if let Some(out) = &args.common.out {
        fs::write(out, format!("{report}\n")).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let mut s = settings_for(&args.common)?;
    apply_model_flags(&mut s, &args.model);
    s.flag("dims", args.dims.clone());
    let mut known = settings::TRAIN_KEYS.to_vec();
    known.extend(["dims", "pretrain"]);
    s.warn_unknown(&known);
    let out = required_out(&args.common)?;
    let dims: Vec<usize> = match s.raw().get("dims") {
        Some(text) => parse_list(text)?,
        None => DEFAULT_DIMS.to_vec(),
    };
    if dims.is_empty() {
        return Err(usage("--dims must list at least one dimension"));
    }
    let cfg = settings::train_config(&s)?;
    let mut resolved = settings::train_kv(&cfg);
    resolved.set("dims", format_list(&dims));
    let train = read_corpus(&args.train)?;
    let dev = read_corpus(&args.dev)?;
    let tm = transitions_for(&s, None, &train, &mut resolved)?;
    let unlabeled = match &args.unlabeled {
        Some(p) => Some(read_unlabeled(p)?),
        None => None,
    };
    let sgns = settings::sgns_config(&s.scoped("pretrain"), cfg.seed)?;
    if unlabeled.is_some() {
        let mut scoped = KeyValues::new();
        for (k, v) in settings::sgns_kv(&sgns).iter().filter(|(k, _)| *k != "dim") {
            scoped.set(format!("pretrain.{k}"), v);
        }
        merge(&mut resolved, &scoped);
    }
    log_resolved("sweep", &resolved);

    let rows = sweep_dims(&dims, unlabeled.as_deref(), &sgns, &train, &dev, &cfg, &tm)?;
    let tsv = sweep_tsv(&rows);
    print!("{tsv}");
    fs::write(out, &tsv).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
