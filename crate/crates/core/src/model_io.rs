//! Versioned binary archives for trained artifacts.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ETRIG"  u32 version  str kind  str config
//! u32 n_lists   { str name  u32 n  { str item }* }*
//! u32 n_tensors { str name  u32 ndim  { u64 dim }*  { f64 value }* }*
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8. The config block holds
//! sorted `key=value` lines, so saving the same archive twice yields the
//! same bytes.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::baseline::MaxEntModel;
use crate::corpus::{Vocabulary, NUM_TAGS};
use crate::decoder::TransitionModel;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::kv::{format_list, parse_list, KeyValues};
use crate::network::{Dense, Mlp};

pub const MAGIC: &[u8; 5] = b"ETRIG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Dnn,
    MaxEnt,
    Embeddings,
    Transitions,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dnn => "dnn",
            ModelKind::MaxEnt => "maxent",
            ModelKind::Embeddings => "embeddings",
            ModelKind::Transitions => "transitions",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dnn" => Some(ModelKind::Dnn),
            "maxent" => Some(ModelKind::MaxEnt),
            "embeddings" => Some(ModelKind::Embeddings),
            "transitions" => Some(ModelKind::Transitions),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        Tensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelArchive {
    pub version: u32,
    pub kind: ModelKind,
    pub config: KeyValues,
    pub lists: Vec<(String, Vec<String>)>,
    pub tensors: Vec<Tensor>,
}

impl ModelArchive {
    pub fn new(kind: ModelKind, config: KeyValues) -> Self {
        ModelArchive {
            version: FORMAT_VERSION,
            kind,
            config,
            lists: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn list(&self, name: &str) -> Result<&[String]> {
        self.lists
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, l)| l.as_slice())
            .ok_or_else(|| Error::CorruptArchive(format!("missing list `{name}`")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::CorruptArchive(format!("missing tensor `{name}`")))
    }

    fn tensor_shaped(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.tensor(name)?;
        if t.shape != shape {
            return Err(Error::CorruptArchive(format!(
                "tensor `{name}` has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        Ok(t)
    }

    fn config_value<T>(&self, key: &str) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: fmt::Display,
    {
        self.config
            .get_parsed(key)
            .map_err(|e| Error::CorruptArchive(e.to_string()))?
            .ok_or_else(|| Error::CorruptArchive(format!("config is missing `{key}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        put_str(&mut out, self.kind.as_str());
        put_str(&mut out, &self.config.to_text());
        out.extend_from_slice(&(self.lists.len() as u32).to_le_bytes());
        for (name, items) in &self.lists {
            put_str(&mut out, name);
            out.extend_from_slice(&(items.len() as u32).to_le_bytes());
            for item in items {
                put_str(&mut out, item);
            }
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses an archive, checking magic, version and the expected kind.
    pub fn from_bytes(bytes: &[u8], expected: Option<ModelKind>) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::UnsupportedFormat("bad magic string".into()));
        }
        r.pos = MAGIC.len();
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(format!(
                "archive version {version}, this reader supports {FORMAT_VERSION}"
            )));
        }
        let kind_name = r.string("kind")?;
        let kind = ModelKind::parse(&kind_name)
            .ok_or_else(|| Error::UnsupportedFormat(format!("unknown kind `{kind_name}`")))?;
        if let Some(expected) = expected {
            if kind != expected {
                return Err(Error::WrongKind {
                    expected: expected.to_string(),
                    found: kind.to_string(),
                });
            }
        }
        let config = KeyValues::parse(&r.string("config")?)
            .map_err(|e| Error::CorruptArchive(format!("config block: {e}")))?;
        let n_lists = r.u32("list count")?;
        let mut lists = Vec::new();
        for _ in 0..n_lists {
            let name = r.string("list name")?;
            let n = r.u32(&name)?;
            let mut items = Vec::new();
            for _ in 0..n {
                items.push(r.string(&name)?);
            }
            lists.push((name, items));
        }
        let n_tensors = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for _ in 0..n_tensors {
            let name = r.string("tensor name")?;
            let ndim = r.u32(&name)?;
            let mut shape = Vec::new();
            for _ in 0..ndim {
                shape.push(r.u64(&name)? as usize);
            }
            let count = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| Error::CorruptArchive(format!("tensor `{name}` is too large")))?;
            if count.saturating_mul(8) > r.remaining() {
                return Err(Error::CorruptArchive(format!("tensor `{name}` is truncated")));
            }
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                data.push(f64::from_le_bytes(r.take::<8>(&name)?));
            }
            tensors.push(Tensor { name, shape, data });
        }
        if r.remaining() != 0 {
            return Err(Error::CorruptArchive(format!(
                "{} trailing bytes",
                r.remaining()
            )));
        }
        Ok(ModelArchive {
            version,
            kind,
            config,
            lists,
            tensors,
        })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        if self.remaining() < N {
            return Err(Error::CorruptArchive(format!("truncated while reading {what}")));
        }
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take::<4>(what).map(u32::from_le_bytes)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.take::<8>(what).map(u64::from_le_bytes)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        if self.remaining() < len {
            return Err(Error::CorruptArchive(format!("truncated while reading {what}")));
        }
        let s = std::str::from_utf8(&self.bytes[self.pos..self.pos + len])
            .map_err(|_| Error::CorruptArchive(format!("{what} is not UTF-8")))?
            .to_string();
        self.pos += len;
        Ok(s)
    }
}

/// Writes the archive to a temporary file next to `path`, then renames it
/// into place.
pub fn save_model(path: impl AsRef<Path>, archive: &ModelArchive) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(&archive.to_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Loads and validates an archive of the expected kind, including the
/// tensor shapes implied by its config.
pub fn load_model(path: impl AsRef<Path>, expected: ModelKind) -> Result<ModelArchive> {
    let archive = read_archive(path, Some(expected))?;
    match archive.kind {
        ModelKind::Dnn => {
            mlp_from_archive(&archive)?;
        }
        ModelKind::MaxEnt => {
            maxent_from_archive(&archive)?;
        }
        ModelKind::Embeddings => {
            embeddings_from_archive(&archive)?;
        }
        ModelKind::Transitions => {
            transitions_from_archive(&archive)?;
        }
    }
    Ok(archive)
}

pub fn read_archive(path: impl AsRef<Path>, expected: Option<ModelKind>) -> Result<ModelArchive> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelArchive::from_bytes(&bytes, expected)
}

/// The kind recorded in an archive, without validating the rest.
pub fn peek_kind(path: impl AsRef<Path>) -> Result<ModelKind> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::UnsupportedFormat("bad magic string".into()));
    }
    let mut r = Reader {
        bytes: &bytes,
        pos: MAGIC.len(),
    };
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedFormat(format!("archive version {version}")));
    }
    let kind = r.string("kind")?;
    ModelKind::parse(&kind).ok_or_else(|| Error::UnsupportedFormat(format!("unknown kind `{kind}`")))
}

fn vocab_list(vocab: &Vocabulary) -> Vec<String> {
    vocab.tokens().iter().map(char::to_string).collect()
}

fn vocab_from_list(items: &[String]) -> Result<Vocabulary> {
    let chars = items
        .iter()
        .map(|s| {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::CorruptArchive(format!("vocabulary entry `{s}` is not one character"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Vocabulary::from_tokens(chars)
        .map_err(|c| Error::CorruptArchive(format!("duplicate vocabulary entry {c:?}")))
}

fn embedding_tensor(table: &EmbeddingTable) -> Tensor {
    Tensor::new(
        "embedding",
        vec![table.rows(), table.dim()],
        table.as_slice().to_vec(),
    )
}

fn embedding_from(archive: &ModelArchive, dim: usize) -> Result<EmbeddingTable> {
    let vocab = vocab_from_list(archive.list("vocab")?)?;
    let t = archive.tensor_shaped("embedding", &[vocab.len(), dim])?;
    EmbeddingTable::new(vocab, dim, t.data.clone())
        .map_err(|e| Error::CorruptArchive(format!("tensor `embedding`: {e}")))
}

pub fn embeddings_to_archive(table: &EmbeddingTable, config: &KeyValues) -> ModelArchive {
    let mut cfg = config.clone();
    cfg.set("dim", table.dim());
    let mut a = ModelArchive::new(ModelKind::Embeddings, cfg);
    a.lists.push(("vocab".into(), vocab_list(table.vocab())));
    a.tensors.push(embedding_tensor(table));
    a
}

pub fn embeddings_from_archive(archive: &ModelArchive) -> Result<EmbeddingTable> {
    embedding_from(archive, archive.config_value("dim")?)
}

pub fn mlp_to_archive(model: &Mlp, config: &KeyValues) -> ModelArchive {
    let mut cfg = config.clone();
    cfg.set("radius", model.radius);
    cfg.set("dim", model.embedding.dim());
    cfg.set("hidden", format_list(&model.hidden_sizes()));
    let mut a = ModelArchive::new(ModelKind::Dnn, cfg);
    a.lists.push(("vocab".into(), vocab_list(model.embedding.vocab())));
    a.tensors.push(embedding_tensor(&model.embedding));
    for (k, layer) in model.hidden.iter().enumerate() {
        a.tensors.push(Tensor::new(
            format!("hidden{k}.weight"),
            vec![layer.outputs, layer.inputs],
            layer.weight.clone(),
        ));
        a.tensors.push(Tensor::new(
            format!("hidden{k}.bias"),
            vec![layer.outputs],
            layer.bias.clone(),
        ));
    }
    a.tensors.push(Tensor::new(
        "output.weight",
        vec![model.output.outputs, model.output.inputs],
        model.output.weight.clone(),
    ));
    a.tensors.push(Tensor::new(
        "output.bias",
        vec![model.output.outputs],
        model.output.bias.clone(),
    ));
    a
}

pub fn mlp_from_archive(archive: &ModelArchive) -> Result<Mlp> {
    let radius: usize = archive.config_value("radius")?;
    let dim: usize = archive.config_value("dim")?;
    let hidden_text: String = archive.config_value("hidden")?;
    let hidden_sizes: Vec<usize> =
        parse_list(&hidden_text).map_err(|e| Error::CorruptArchive(e.to_string()))?;
    let embedding = embedding_from(archive, dim)?;

    let dense = |name: &str, outputs: usize, inputs: usize| -> Result<Dense> {
        let w = archive.tensor_shaped(&format!("{name}.weight"), &[outputs, inputs])?;
        let b = archive.tensor_shaped(&format!("{name}.bias"), &[outputs])?;
        Ok(Dense {
            inputs,
            outputs,
            weight: w.data.clone(),
            bias: b.data.clone(),
        })
    };
    let mut inputs = (2 * radius + 1) * dim;
    let mut hidden = Vec::with_capacity(hidden_sizes.len());
    for (k, &h) in hidden_sizes.iter().enumerate() {
        hidden.push(dense(&format!("hidden{k}"), h, inputs)?);
        inputs = h;
    }
    let output = dense("output", NUM_TAGS, inputs)?;
    let model = Mlp {
        embedding,
        hidden,
        output,
        radius,
    };
    model
        .validate()
        .map_err(|e| Error::CorruptArchive(e.to_string()))?;
    Ok(model)
}

pub fn maxent_to_archive(model: &MaxEntModel, config: &KeyValues) -> ModelArchive {
    let mut cfg = config.clone();
    cfg.set("radius", model.radius);
    cfg.set("l2", model.l2);
    let mut a = ModelArchive::new(ModelKind::MaxEnt, cfg);
    a.lists.push(("features".into(), model.features().to_vec()));
    a.tensors.push(Tensor::new(
        "weights",
        vec![model.num_features(), NUM_TAGS],
        model.weights.clone(),
    ));
    a.tensors.push(Tensor::new("bias", vec![NUM_TAGS], model.bias.to_vec()));
    a
}

pub fn maxent_from_archive(archive: &ModelArchive) -> Result<MaxEntModel> {
    let radius = archive.config_value("radius")?;
    let l2 = archive.config_value("l2")?;
    let features = archive.list("features")?.to_vec();
    let n = features.len();
    let mut model = MaxEntModel::new(features, radius, l2)
        .map_err(|e| Error::CorruptArchive(e.to_string()))?;
    model.weights = archive.tensor_shaped("weights", &[n, NUM_TAGS])?.data.clone();
    let b = &archive.tensor_shaped("bias", &[NUM_TAGS])?.data;
    model.bias.copy_from_slice(b);
    Ok(model)
}

pub fn transitions_to_archive(tm: &TransitionModel, config: &KeyValues) -> ModelArchive {
    let mut cfg = config.clone();
    cfg.set("weight", tm.weight);
    cfg.set("constrained", tm.constrained);
    let mut a = ModelArchive::new(ModelKind::Transitions, cfg);
    a.tensors.push(Tensor::new("start", vec![NUM_TAGS], tm.start.to_vec()));
    a.tensors.push(Tensor::new(
        "trans",
        vec![NUM_TAGS, NUM_TAGS],
        tm.trans.iter().flatten().copied().collect(),
    ));
    a
}

pub fn transitions_from_archive(archive: &ModelArchive) -> Result<TransitionModel> {
    let weight = archive.config_value("weight")?;
    let constrained = archive.config_value("constrained")?;
    let s = &archive.tensor_shaped("start", &[NUM_TAGS])?.data;
    let t = &archive.tensor_shaped("trans", &[NUM_TAGS, NUM_TAGS])?.data;
    let mut trans = [[0.0; NUM_TAGS]; NUM_TAGS];
    for (i, row) in trans.iter_mut().enumerate() {
        row.copy_from_slice(&t[i * NUM_TAGS..(i + 1) * NUM_TAGS]);
    }
    TransitionModel::new([s[0], s[1], s[2]], trans, weight, constrained)
        .map_err(|e| Error::CorruptArchive(format!("transitions: {e}")))
}

pub fn save_dnn(path: impl AsRef<Path>, model: &Mlp, config: &KeyValues) -> Result<()> {
    save_model(path, &mlp_to_archive(model, config))
}

pub fn load_dnn(path: impl AsRef<Path>) -> Result<(Mlp, KeyValues)> {
    let a = read_archive(path, Some(ModelKind::Dnn))?;
    Ok((mlp_from_archive(&a)?, a.config))
}

pub fn save_maxent(path: impl AsRef<Path>, model: &MaxEntModel, config: &KeyValues) -> Result<()> {
    save_model(path, &maxent_to_archive(model, config))
}

pub fn load_maxent(path: impl AsRef<Path>) -> Result<(MaxEntModel, KeyValues)> {
    let a = read_archive(path, Some(ModelKind::MaxEnt))?;
    Ok((maxent_from_archive(&a)?, a.config))
}

pub fn save_embeddings(path: impl AsRef<Path>, table: &EmbeddingTable, config: &KeyValues) -> Result<()> {
    save_model(path, &embeddings_to_archive(table, config))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(EmbeddingTable, KeyValues)> {
    let a = read_archive(path, Some(ModelKind::Embeddings))?;
    Ok((embeddings_from_archive(&a)?, a.config))
}

pub fn save_transitions(path: impl AsRef<Path>, tm: &TransitionModel, config: &KeyValues) -> Result<()> {
    save_model(path, &transitions_to_archive(tm, config))
}

pub fn load_transitions(path: impl AsRef<Path>) -> Result<(TransitionModel, KeyValues)> {
    let a = read_archive(path, Some(ModelKind::Transitions))?;
    Ok((transitions_from_archive(&a)?, a.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{maxent_train, MaxEntConfig};
    use crate::corpus::{parse_corpus_str, Tag};
    use crate::decoder::{estimate_transitions, Tagger};
    use crate::embeddings::init_embeddings;

    fn model() -> Mlp {
        let vocab = Vocabulary::from_tokens("abcdé夏".chars().collect()).unwrap();
        Mlp::new(init_embeddings(&vocab, 4, 1), 2, &[6, 5], 3)
    }

    fn bits(xs: &[f64]) -> Vec<u64> {
        xs.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn dnn_round_trip_is_bit_exact_and_canonical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dnn");
        let m = model();
        let mut cfg = KeyValues::new();
        cfg.set("lr", 0.01);
        save_dnn(&path, &m, &cfg).unwrap();
        let (back, back_cfg) = load_dnn(&path).unwrap();
        for k in 0..m.tensor_names().len() {
            assert_eq!(bits(m.tensor(k)), bits(back.tensor(k)));
        }
        assert_eq!(back, m);
        assert_eq!(back_cfg.get("lr"), Some("0.01"));

        let first = fs::read(&path).unwrap();
        save_dnn(&path, &back, &back_cfg).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());

        let params: usize = (0..m.tensor_names().len()).map(|k| m.tensor(k).len()).sum();
        assert!(first.len() >= 8 * params && first.len() < 8 * params + 1024);

        let chars: Vec<char> = "abc夏zd".chars().collect();
        let a = m.emissions(&chars).unwrap();
        let b = back.emissions(&chars).unwrap();
        for (ra, rb) in a.rows().iter().zip(b.rows()) {
            assert_eq!(bits(ra), bits(rb));
        }
    }

    #[test]
    fn wrong_kind_version_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dnn");
        save_dnn(&path, &model(), &KeyValues::new()).unwrap();
        assert!(matches!(load_model(&path, ModelKind::MaxEnt), Err(Error::WrongKind { .. })));
        assert_eq!(peek_kind(&path).unwrap(), ModelKind::Dnn);

        let mut bytes = fs::read(&path).unwrap();
        let good = bytes.clone();
        bytes[5..9].copy_from_slice(&2u32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path, ModelKind::Dnn), Err(Error::UnsupportedFormat(_))));

        fs::write(&path, b"NOTAMODEL").unwrap();
        assert!(matches!(load_model(&path, ModelKind::Dnn), Err(Error::UnsupportedFormat(_))));

        fs::write(&path, &good[..good.len() - 20]).unwrap();
        assert!(matches!(load_model(&path, ModelKind::Dnn), Err(Error::CorruptArchive(_))));
    }

    #[test]
    fn inconsistent_shape_names_the_tensor() {
        let mut a = mlp_to_archive(&model(), &KeyValues::new());
        let out = a.tensors.iter_mut().find(|t| t.name == "output.weight").unwrap();
        out.shape = vec![2, 5];
        out.data.truncate(10);
        match mlp_from_archive(&a) {
            Err(Error::CorruptArchive(msg)) => assert!(msg.contains("output.weight"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_kinds_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = parse_corpus_str("a\tB\nb\tI\nc\tO\n\nc\tO\na\tB\n").unwrap();
        let me = maxent_train(&data, &MaxEntConfig { epochs: 3, ..Default::default() }).unwrap().model;
        let p = dir.path().join("m.maxent");
        save_maxent(&p, &me, &KeyValues::new()).unwrap();
        assert_eq!(load_maxent(&p).unwrap().0, me);

        let tm = estimate_transitions(data.iter().map(|s| s.tags()), 1.0, true).unwrap();
        let p = dir.path().join("t.trans");
        save_transitions(&p, &tm, &KeyValues::new()).unwrap();
        let back = load_transitions(&p).unwrap().0;
        assert_eq!(back, tm);
        assert_eq!(back.trans[Tag::O.code()][Tag::I.code()], f64::NEG_INFINITY);

        let table = model().embedding;
        let p = dir.path().join("e.emb");
        save_embeddings(&p, &table, &KeyValues::new()).unwrap();
        assert_eq!(load_embeddings(&p).unwrap().0, table);
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let err = save_dnn("/nonexistent/dir/m.dnn", &model(), &KeyValues::new()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
