//! Config file + flag merging. Flags win over file values.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use etrig_core::baseline::MaxEntConfig;
use etrig_core::corpus::SynthConfig;
use etrig_core::embeddings::SgnsConfig;
use etrig_core::kv::{format_list, parse_list, KeyValues};
use etrig_core::network::TrainConfig;
use etrig_core::{Error, Result};

pub struct Settings {
    kv: KeyValues,
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Self> {
        let kv = match config {
            Some(path) => KeyValues::read(path)?,
            None => KeyValues::new(),
        };
        Ok(Settings { kv })
    }

    pub fn flag<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.kv.set(key, v);
        }
    }

    pub fn get<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.kv.get_parsed(key)?.unwrap_or(default))
    }

    pub fn raw(&self) -> &KeyValues {
        &self.kv
    }

    /// Keys with `prefix.` stripped, for nested settings.
    pub fn scoped(&self, prefix: &str) -> KeyValues {
        let mut out = KeyValues::new();
        for (k, v) in self.kv.iter() {
            if let Some(rest) = k.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) {
                out.set(rest, v);
            }
        }
        out
    }

    pub fn warn_unknown(&self, known: &[&str]) {
        for key in self.kv.keys() {
            let base = key.split('.').next().unwrap_or(key);
            if !known.contains(&key) && !known.contains(&base) {
                log::warn!("ignoring unknown config key `{key}`");
            }
        }
    }
}

pub fn log_resolved(command: &str, resolved: &KeyValues) {
    log::info!("{command}: resolved config");
    for (k, v) in resolved.iter() {
        log::info!("  {k}={v}");
    }
}

pub const SGNS_KEYS: &[&str] = &["dim", "window", "negatives", "epochs", "lr", "min_count", "subsample", "seed"];

pub fn sgns_config(kv: &KeyValues, seed: u64) -> Result<SgnsConfig> {
    let mut c = SgnsConfig { seed, ..SgnsConfig::default() };
    kv.apply("dim", &mut c.dim)?;
    kv.apply("window", &mut c.window)?;
    kv.apply("negatives", &mut c.negatives)?;
    kv.apply("epochs", &mut c.epochs)?;
    kv.apply("lr", &mut c.lr)?;
    kv.apply("min_count", &mut c.min_count)?;
    kv.apply("subsample", &mut c.subsample)?;
    kv.apply("seed", &mut c.seed)?;
    Ok(c)
}

pub fn sgns_kv(c: &SgnsConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("dim", c.dim);
    kv.set("window", c.window);
    kv.set("negatives", c.negatives);
    kv.set("epochs", c.epochs);
    kv.set("lr", c.lr);
    kv.set("min_count", c.min_count);
    kv.set("subsample", c.subsample);
    kv.set("seed", c.seed);
    kv
}

pub const TRAIN_KEYS: &[&str] = &[
    "kind", "dim", "radius", "hidden", "lr", "epochs", "l2", "patience", "shuffle", "seed",
    "alpha", "constrained", "transition_weight",
];

pub fn train_config(s: &Settings) -> Result<TrainConfig> {
    let kv = s.raw();
    let mut c = TrainConfig::default();
    kv.apply("radius", &mut c.radius)?;
    if let Some(h) = kv.get("hidden") {
        c.hidden = parse_list(h)?;
        if c.hidden.is_empty() {
            return Err(Error::Config("hidden needs at least one layer size".into()));
        }
    }
    kv.apply("lr", &mut c.lr)?;
    kv.apply("epochs", &mut c.epochs)?;
    kv.apply("l2", &mut c.l2)?;
    kv.apply("patience", &mut c.patience)?;
    kv.apply("shuffle", &mut c.shuffle)?;
    kv.apply("seed", &mut c.seed)?;
    Ok(c)
}

pub fn train_kv(c: &TrainConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("radius", c.radius);
    kv.set("hidden", format_list(&c.hidden));
    kv.set("lr", c.lr);
    kv.set("epochs", c.epochs);
    kv.set("l2", c.l2);
    kv.set("patience", c.patience);
    kv.set("shuffle", c.shuffle);
    kv.set("seed", c.seed);
    kv
}

pub fn maxent_config(s: &Settings) -> Result<MaxEntConfig> {
    let kv = s.raw();
    let mut c = MaxEntConfig::default();
    kv.apply("radius", &mut c.radius)?;
    kv.apply("lr", &mut c.lr)?;
    kv.apply("epochs", &mut c.epochs)?;
    kv.apply("l2", &mut c.l2)?;
    kv.apply("seed", &mut c.seed)?;
    Ok(c)
}

pub fn maxent_kv(c: &MaxEntConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("radius", c.radius);
    kv.set("lr", c.lr);
    kv.set("epochs", c.epochs);
    kv.set("l2", c.l2);
    kv.set("seed", c.seed);
    kv
}

pub const SPLIT_KEYS: &[&str] = &["train", "dev", "test", "seed"];

/// Generator settings: every key except the split sizes and seed.
pub fn synth_config(s: &Settings, total: usize) -> Result<SynthConfig> {
    let mut gen = KeyValues::new();
    for (k, v) in s.raw().iter() {
        if !SPLIT_KEYS.contains(&k) {
            gen.set(k, v);
        }
    }
    let mut c = SynthConfig::from_kv(&gen)?;
    c.labeled = total;
    c.validate()?;
    Ok(c)
}

pub fn merge(into: &mut KeyValues, from: &KeyValues) {
    for (k, v) in from.iter() {
        into.set(k, v);
    }
}
