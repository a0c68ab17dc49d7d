//! Labeled and unlabeled character corpora.
//!
//! Supervised data is a sequence of [`TaggedSentence`]s: one tag from the
//! {B, I, O} scheme per character, where B begins a trigger, I continues it
//! and O is outside any trigger. The labeled file format is one
//! `<char>\t<tag>` line per character with a blank line between sentences.
//! Unlabeled text is one sentence per line.

mod synth;
mod vocab;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use synth::{generate_synthetic, SplitCorpus, SynthConfig, SyntheticCorpus};
pub use vocab::{build_vocab, encode, Vocabulary, PAD, PAD_NAME, UNK, UNK_NAME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    B = 0,
    I = 1,
    O = 2,
}

pub const NUM_TAGS: usize = 3;

impl Tag {
    pub const ALL: [Tag; NUM_TAGS] = [Tag::B, Tag::I, Tag::O];

    #[inline]
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Tag> {
        Tag::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::B => "B",
            Tag::I => "I",
            Tag::O => "O",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "B" => Ok(Tag::B),
            "I" => Ok(Tag::I),
            "O" => Ok(Tag::O),
            other => Err(format!("unknown tag `{other}`")),
        }
    }
}

/// Returns the first position violating the BIO scheme, if any.
pub fn check_bio(tags: &[Tag]) -> std::result::Result<(), (usize, &'static str)> {
    let mut prev = None;
    for (i, &tag) in tags.iter().enumerate() {
        if tag == Tag::I {
            match prev {
                None => return Err((i, "I at sentence start")),
                Some(Tag::O) => return Err((i, "I after O")),
                _ => {}
            }
        }
        prev = Some(tag);
    }
    Ok(())
}

/// A trigger as a character offset and length within one sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriggerSpan {
    pub start: usize,
    pub len: usize,
}

impl TriggerSpan {
    pub fn new(start: usize, len: usize) -> Self {
        TriggerSpan { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Converts a BIO-valid tag sequence to its trigger spans.
pub fn tags_to_spans(tags: &[Tag]) -> Result<Vec<TriggerSpan>> {
    check_bio(tags).map_err(|(position, message)| Error::InvalidTags {
        sentence: 0,
        position,
        message: message.to_string(),
    })?;
    let mut spans = Vec::new();
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            Tag::B => spans.push(TriggerSpan::new(i, 1)),
            Tag::I => {
                if let Some(last) = spans.last_mut() {
                    last.len += 1;
                }
            }
            Tag::O => {}
        }
    }
    Ok(spans)
}

/// Inverse of [`tags_to_spans`]; uncovered positions are O.
pub fn spans_to_tags(spans: &[TriggerSpan], len: usize) -> Result<Vec<Tag>> {
    let mut tags = vec![Tag::O; len];
    let mut prev_end = 0;
    for (k, span) in spans.iter().enumerate() {
        if span.len == 0 {
            return Err(Error::InvalidSpans(format!("span {k} has zero length")));
        }
        if span.end() > len {
            return Err(Error::InvalidSpans(format!(
                "span {k} ({}, {}) exceeds length {len}",
                span.start, span.len
            )));
        }
        if k > 0 && span.start < prev_end {
            return Err(Error::InvalidSpans(format!(
                "span {k} overlaps or precedes its predecessor"
            )));
        }
        tags[span.start] = Tag::B;
        for tag in &mut tags[span.start + 1..span.end()] {
            *tag = Tag::I;
        }
        prev_end = span.end();
    }
    Ok(tags)
}

/// A non-empty character sequence with a BIO-valid tag per character.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaggedSentence {
    chars: Vec<char>,
    tags: Vec<Tag>,
}

impl TaggedSentence {
    pub fn new(chars: Vec<char>, tags: Vec<Tag>) -> Result<Self> {
        if chars.len() != tags.len() {
            return Err(Error::InvalidTags {
                sentence: 0,
                position: chars.len().min(tags.len()),
                message: format!("{} characters but {} tags", chars.len(), tags.len()),
            });
        }
        if chars.is_empty() {
            return Err(Error::InvalidTags {
                sentence: 0,
                position: 0,
                message: "empty sentence".to_string(),
            });
        }
        check_bio(&tags).map_err(|(position, message)| Error::InvalidTags {
            sentence: 0,
            position,
            message: message.to_string(),
        })?;
        Ok(TaggedSentence { chars, tags })
    }

    pub fn from_spans(chars: Vec<char>, spans: &[TriggerSpan]) -> Result<Self> {
        let tags = spans_to_tags(spans, chars.len())?;
        TaggedSentence::new(chars, tags)
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn spans(&self) -> Vec<TriggerSpan> {
        tags_to_spans(&self.tags).expect("tags validated at construction")
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }
}

/// Reads the labeled corpus format.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<TaggedSentence>> {
    let mut sentences = Vec::new();
    let mut chars = Vec::new();
    let mut tags = Vec::new();

    let flush = |chars: &mut Vec<char>, tags: &mut Vec<Tag>, out: &mut Vec<TaggedSentence>| {
        if chars.is_empty() {
            return Ok(());
        }
        let index = out.len();
        let sentence = TaggedSentence::new(std::mem::take(chars), std::mem::take(tags))
            .map_err(|e| match e {
                Error::InvalidTags {
                    position, message, ..
                } => Error::InvalidTags {
                    sentence: index,
                    position,
                    message,
                },
                other => other,
            })?;
        out.push(sentence);
        Ok::<(), Error>(())
    };

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            flush(&mut chars, &mut tags, &mut sentences)?;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 2 tab-separated fields, found {}", fields.len()),
            });
        }
        let mut it = fields[0].chars();
        let ch = match (it.next(), it.next()) {
            (Some(c), None) => c,
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected a single character, found `{}`", fields[0]),
                })
            }
        };
        let tag = fields[1].parse::<Tag>().map_err(|message| Error::Parse {
            line: lineno,
            message,
        })?;
        chars.push(ch);
        tags.push(tag);
    }
    flush(&mut chars, &mut tags, &mut sentences)?;
    Ok(sentences)
}

pub fn parse_corpus_str(text: &str) -> Result<Vec<TaggedSentence>> {
    parse_corpus(text.as_bytes())
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<TaggedSentence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut writer: W, sentences: &[TaggedSentence]) -> std::io::Result<()> {
    for (k, sentence) in sentences.iter().enumerate() {
        if k > 0 {
            writeln!(writer)?;
        }
        for (c, t) in sentence.chars.iter().zip(&sentence.tags) {
            writeln!(writer, "{c}\t{t}")?;
        }
    }
    writer.flush()
}

pub fn corpus_to_string(sentences: &[TaggedSentence]) -> String {
    let mut buf = Vec::new();
    write_corpus(&mut buf, sentences).expect("writing to memory");
    String::from_utf8(buf).expect("corpus is UTF-8")
}

pub fn write_corpus_file(path: impl AsRef<Path>, sentences: &[TaggedSentence]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(BufWriter::new(file), sentences).map_err(|e| Error::io(path, e))
}

/// Reads unlabeled text: one sentence per line, empty lines skipped.
pub fn parse_unlabeled<R: BufRead>(reader: R) -> Result<Vec<Vec<char>>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if !line.is_empty() {
            out.push(line.chars().collect());
        }
    }
    Ok(out)
}

pub fn read_unlabeled(path: impl AsRef<Path>) -> Result<Vec<Vec<char>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_unlabeled(BufReader::new(file))
}

pub fn write_unlabeled<W: Write>(mut writer: W, sentences: &[Vec<char>]) -> std::io::Result<()> {
    for sentence in sentences {
        let line: String = sentence.iter().collect();
        writeln!(writer, "{line}")?;
    }
    writer.flush()
}

pub fn write_unlabeled_file(path: impl AsRef<Path>, sentences: &[Vec<char>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_unlabeled(BufWriter::new(file), sentences).map_err(|e| Error::io(path, e))
}

/// Fixed-radius context around one position, PAD-filled past the edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub center: usize,
    pub radius: usize,
    pub indices: Vec<usize>,
}

impl Window {
    pub fn at(indices: &[usize], center: usize, radius: usize) -> Window {
        let mut out = Vec::with_capacity(2 * radius + 1);
        for offset in 0..=2 * radius {
            let pos = center as isize + offset as isize - radius as isize;
            if pos < 0 || pos as usize >= indices.len() {
                out.push(PAD);
            } else {
                out.push(indices[pos as usize]);
            }
        }
        Window {
            center,
            radius,
            indices: out,
        }
    }
}

/// One window per position of `indices`.
pub fn windows(indices: &[usize], radius: usize) -> Vec<Window> {
    (0..indices.len())
        .map(|t| Window::at(indices, t, radius))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tags(s: &str) -> Vec<Tag> {
        s.chars().map(|c| c.to_string().parse().unwrap()).collect()
    }

    #[test]
    fn parses_single_sentence() {
        let corpus = parse_corpus_str("夏\tB\n购\tI\n网\tO\n").unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus[0].chars(), &['夏', '购', '网']);
        assert_eq!(corpus[0].tags(), &tags("BIO")[..]);
    }

    #[test]
    fn parses_empty_input() {
        assert!(parse_corpus_str("").unwrap().is_empty());
    }

    #[test]
    fn rejects_leading_inside_tag() {
        let err = parse_corpus_str("a\tI").unwrap_err();
        match err {
            Error::InvalidTags {
                sentence,
                position,
                message,
            } => {
                assert_eq!((sentence, position), (0, 0));
                assert_eq!(message, "I at sentence start");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_sentence_index_and_line_numbers() {
        let err = parse_corpus_str("a\tB\n\nb\tO\nc\tI\n").unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidTags {
                sentence: 1,
                position: 1,
                ..
            }
        ));
        let err = parse_corpus_str("a\tB\nb\tX\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_corpus_str("a\tB\tO\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_corpus_str("ab\tB\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn tolerates_crlf_and_missing_trailing_blank() {
        let corpus = parse_corpus_str("a\tB\r\nb\tI\r\n\r\nc\tO").unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[1].chars(), &['c']);
    }

    #[test]
    fn span_conversion_examples() {
        assert_eq!(
            tags_to_spans(&tags("OBIO")).unwrap(),
            vec![TriggerSpan::new(1, 2)]
        );
        assert!(tags_to_spans(&tags("OOO")).unwrap().is_empty());
        assert_eq!(
            tags_to_spans(&tags("BBO")).unwrap(),
            vec![TriggerSpan::new(0, 1), TriggerSpan::new(1, 1)]
        );
        assert!(tags_to_spans(&tags("OI")).is_err());

        assert_eq!(
            spans_to_tags(&[TriggerSpan::new(1, 2)], 4).unwrap(),
            tags("OBIO")
        );
        assert_eq!(spans_to_tags(&[], 3).unwrap(), tags("OOO"));
        assert_eq!(
            spans_to_tags(&[TriggerSpan::new(0, 1), TriggerSpan::new(1, 1)], 2).unwrap(),
            tags("BB")
        );
    }

    #[test]
    fn rejects_bad_spans() {
        assert!(spans_to_tags(&[TriggerSpan::new(0, 2), TriggerSpan::new(1, 1)], 4).is_err());
        assert!(spans_to_tags(&[TriggerSpan::new(3, 2)], 4).is_err());
        assert!(spans_to_tags(&[TriggerSpan::new(2, 1), TriggerSpan::new(0, 1)], 4).is_err());
        assert!(spans_to_tags(&[TriggerSpan::new(0, 0)], 4).is_err());
    }

    #[test]
    fn window_examples() {
        let w = Window::at(&[7], 0, 2);
        assert_eq!(w.indices, vec![PAD, PAD, 7, PAD, PAD]);
        let w = Window::at(&[3, 4, 5, 6, 7], 2, 2);
        assert_eq!(w.indices, vec![3, 4, 5, 6, 7]);
        let w = Window::at(&[3, 4, 5], 0, 2);
        assert_eq!(w.indices, vec![PAD, PAD, 3, 4, 5]);
    }

    fn bio_tags() -> impl Strategy<Value = Vec<Tag>> {
        prop::collection::vec(0usize..3, 1..40).prop_map(|codes| {
            let mut out = Vec::with_capacity(codes.len());
            for c in codes {
                let mut tag = Tag::from_code(c).unwrap();
                if tag == Tag::I && matches!(out.last(), None | Some(Tag::O)) {
                    tag = Tag::B;
                }
                out.push(tag);
            }
            out
        })
    }

    proptest! {
        #[test]
        fn tags_spans_round_trip(t in bio_tags()) {
            let spans = tags_to_spans(&t).unwrap();
            prop_assert_eq!(spans_to_tags(&spans, t.len()).unwrap(), t);
        }

        #[test]
        fn window_center_and_padding(x in prop::collection::vec(2usize..50, 1..30), w in 1usize..5) {
            let n = x.len();
            for (t, win) in windows(&x, w).iter().enumerate() {
                prop_assert_eq!(win.indices.len(), 2 * w + 1);
                prop_assert_eq!(win.indices[w], x[t]);
                let pads = win.indices.iter().filter(|&&i| i == PAD).count();
                let expected = w.saturating_sub(t) + w.saturating_sub(n - 1 - t);
                prop_assert_eq!(pads, expected);
            }
        }

        #[test]
        fn corpus_format_round_trip(
            sents in prop::collection::vec(
                (bio_tags(), prop::collection::vec(prop::char::range('a', 'z'), 40)),
                0..6,
            )
        ) {
            let sentences: Vec<TaggedSentence> = sents
                .into_iter()
                .map(|(t, cs)| TaggedSentence::new(cs[..t.len()].to_vec(), t).unwrap())
                .collect();
            let text = corpus_to_string(&sentences);
            prop_assert_eq!(parse_corpus_str(&text).unwrap(), sentences);
        }
    }
}
