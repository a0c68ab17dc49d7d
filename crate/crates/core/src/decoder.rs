//! Transition estimation and Viterbi decoding over per-position tag
//! log-probabilities.

use std::fs;
use std::path::Path;

use crate::corpus::{tags_to_spans, Tag, TriggerSpan, NUM_TAGS};
use crate::error::{Error, Result};

/// Per-position tag log-probabilities, one row per character.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Emissions {
    rows: Vec<[f64; NUM_TAGS]>,
}

impl Emissions {
    pub fn new(rows: Vec<[f64; NUM_TAGS]>) -> Self {
        Emissions { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64; NUM_TAGS] {
        &self.rows[t]
    }

    pub fn rows(&self) -> &[[f64; NUM_TAGS]] {
        &self.rows
    }

    /// Largest |logsumexp(row)| over all rows; 0 for a normalized matrix.
    pub fn max_normalization_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| log_sum_exp(r).abs())
            .fold(0.0, f64::max)
    }

    /// Tags maximizing each row independently, lowest code on ties.
    pub fn argmax_tags(&self) -> Vec<Tag> {
        self.rows
            .iter()
            .map(|r| Tag::from_code(argmax_lowest(r)).expect("three tags"))
            .collect()
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Anything that produces emission rows for a raw character sequence.
pub trait Tagger {
    fn emissions(&self, chars: &[char]) -> Result<Emissions>;
}

/// Tag-bigram log-probabilities plus a start distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionModel {
    pub start: [f64; NUM_TAGS],
    /// `trans[i][j]` is ln p(tag j | previous tag i).
    pub trans: [[f64; NUM_TAGS]; NUM_TAGS],
    /// Multiplier on transition and start scores relative to emissions.
    pub weight: f64,
    /// Forbids I at sentence start and I after O.
    pub constrained: bool,
}

const I: usize = 1;
const O: usize = 2;

fn admissible_start(constrained: bool, j: usize) -> bool {
    !(constrained && j == I)
}

fn admissible(constrained: bool, i: usize, j: usize) -> bool {
    !(constrained && i == O && j == I)
}

impl TransitionModel {
    /// Builds a model from raw log-scores; forbidden cells are forced to -inf
    /// when `constrained`.
    pub fn new(
        start: [f64; NUM_TAGS],
        trans: [[f64; NUM_TAGS]; NUM_TAGS],
        weight: f64,
        constrained: bool,
    ) -> Result<Self> {
        let cells = start.iter().chain(trans.iter().flatten());
        if cells.clone().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::Format(
                "transition scores must be finite or -inf".into(),
            ));
        }
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::Config(format!(
                "transition weight must be finite and >= 0, got {weight}"
            )));
        }
        let mut model = TransitionModel {
            start,
            trans,
            weight,
            constrained,
        };
        model.apply_constraints();
        Ok(model)
    }

    pub fn uniform(constrained: bool) -> Self {
        let mut start = [0.0; NUM_TAGS];
        let mut trans = [[0.0; NUM_TAGS]; NUM_TAGS];
        let n_start = (0..NUM_TAGS).filter(|&j| admissible_start(constrained, j)).count();
        for j in 0..NUM_TAGS {
            start[j] = -(n_start as f64).ln();
        }
        for (i, row) in trans.iter_mut().enumerate() {
            let n = (0..NUM_TAGS).filter(|&j| admissible(constrained, i, j)).count();
            row.iter_mut().for_each(|x| *x = -(n as f64).ln());
        }
        let mut model = TransitionModel {
            start,
            trans,
            weight: 1.0,
            constrained,
        };
        model.apply_constraints();
        model
    }

    fn apply_constraints(&mut self) {
        if self.constrained {
            self.start[I] = f64::NEG_INFINITY;
            self.trans[O][I] = f64::NEG_INFINITY;
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    #[inline]
    fn start_score(&self, j: usize) -> f64 {
        scaled(self.weight, self.start[j])
    }

    #[inline]
    fn trans_score(&self, i: usize, j: usize) -> f64 {
        scaled(self.weight, self.trans[i][j])
    }

    /// Reads the transition text format: start scores on line 1, then the
    /// three rows of the matrix.
    pub fn parse_text(text: &str, weight: f64, constrained: bool) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(k, line)| {
                line.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>().map_err(|_| Error::Parse {
                            line: k + 1,
                            message: format!("bad score `{tok}`"),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        if rows.len() != 1 + NUM_TAGS || rows.iter().any(|r| r.len() != NUM_TAGS) {
            return Err(Error::Format(
                "transition file needs 4 lines of 3 scores".into(),
            ));
        }
        let start = [rows[0][0], rows[0][1], rows[0][2]];
        let mut trans = [[0.0; NUM_TAGS]; NUM_TAGS];
        for i in 0..NUM_TAGS {
            trans[i].copy_from_slice(&rows[i + 1]);
        }
        TransitionModel::new(start, trans, weight, constrained)
    }

    pub fn to_text(&self) -> String {
        let line = |r: &[f64]| {
            r.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = line(&self.start);
        out.push('\n');
        for row in &self.trans {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }

    pub fn load_text(path: impl AsRef<Path>, weight: f64, constrained: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, weight, constrained)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// `weight * x`, keeping -inf as a hard constraint even at weight 0.
#[inline]
fn scaled(weight: f64, x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        x
    } else {
        weight * x
    }
}

/// Smoothed bigram estimate from gold tag sequences.
pub fn estimate_transitions<'a, I>(sequences: I, alpha: f64, constrained: bool) -> Result<TransitionModel>
where
    I: IntoIterator<Item = &'a [Tag]>,
{
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("smoothing must be >= 0, got {alpha}")));
    }
    let mut start_counts = [0.0f64; NUM_TAGS];
    let mut counts = [[0.0f64; NUM_TAGS]; NUM_TAGS];
    for tags in sequences {
        if let Some(first) = tags.first() {
            start_counts[first.code()] += 1.0;
        }
        for pair in tags.windows(2) {
            counts[pair[0].code()][pair[1].code()] += 1.0;
        }
    }

    let normalize = |counts: &[f64; NUM_TAGS], allowed: &dyn Fn(usize) -> bool, what: &str| {
        let n_allowed = (0..NUM_TAGS).filter(|&j| allowed(j)).count() as f64;
        let total: f64 = (0..NUM_TAGS).filter(|&j| allowed(j)).map(|j| counts[j]).sum();
        let denom = total + alpha * n_allowed;
        if denom <= 0.0 {
            return Err(Error::Config(format!(
                "no observations for {what} and smoothing is 0"
            )));
        }
        let mut row = [f64::NEG_INFINITY; NUM_TAGS];
        for j in 0..NUM_TAGS {
            if allowed(j) {
                row[j] = ((counts[j] + alpha) / denom).ln();
            }
        }
        Ok(row)
    };

    let start = normalize(&start_counts, &|j| admissible_start(constrained, j), "the start tag")?;
    let mut trans = [[0.0; NUM_TAGS]; NUM_TAGS];
    for i in 0..NUM_TAGS {
        let from = Tag::from_code(i).expect("three tags");
        trans[i] = normalize(
            &counts[i],
            &|j| admissible(constrained, i, j),
            &format!("successors of {from}"),
        )?;
    }
    TransitionModel::new(start, trans, 1.0, constrained)
}

/// Highest-scoring tag sequence under weighted start + emission +
/// transition scores. Among equal scores the backtrace prefers the lowest
/// tag code at every step.
pub fn viterbi(em: &Emissions, tm: &TransitionModel) -> Result<(Vec<Tag>, f64)> {
    let n = em.len();
    if n == 0 {
        return Err(Error::Decode("no positions to decode".into()));
    }
    let mut score = [0.0; NUM_TAGS];
    for (j, s) in score.iter_mut().enumerate() {
        *s = tm.start_score(j) + em.row(0)[j];
    }
    let mut back = vec![[0u8; NUM_TAGS]; n];
    for t in 1..n {
        let mut next = [0.0; NUM_TAGS];
        for j in 0..NUM_TAGS {
            let mut best = 0;
            let mut best_score = score[0] + tm.trans_score(0, j);
            for i in 1..NUM_TAGS {
                let s = score[i] + tm.trans_score(i, j);
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            back[t][j] = best as u8;
            next[j] = best_score + em.row(t)[j];
        }
        score = next;
    }
    let last = argmax_lowest(&score);
    let best = score[last];
    if best == f64::NEG_INFINITY || best.is_nan() {
        return Err(Error::Decode("every tag sequence has score -inf".into()));
    }
    let mut codes = vec![0usize; n];
    codes[n - 1] = last;
    for t in (1..n).rev() {
        codes[t - 1] = back[t][codes[t]] as usize;
    }
    let tags = codes
        .into_iter()
        .map(|c| Tag::from_code(c).expect("three tags"))
        .collect();
    Ok((tags, best))
}

pub const EXHAUSTIVE_MAX_LEN: usize = 12;

/// Brute-force search over all 3^T sequences; testing oracle for [`viterbi`].
/// Scores are accumulated in the same order as the dynamic program and ties
/// go to the sequence that is smallest when compared from the last
/// position backwards.
pub fn exhaustive_decode(em: &Emissions, tm: &TransitionModel) -> Result<(Vec<Tag>, f64)> {
    let n = em.len();
    if n == 0 {
        return Err(Error::Decode("no positions to decode".into()));
    }
    if n > EXHAUSTIVE_MAX_LEN {
        return Err(Error::Decode(format!(
            "exhaustive search limited to {EXHAUSTIVE_MAX_LEN} positions, got {n}"
        )));
    }
    let total = NUM_TAGS.pow(n as u32);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut codes = vec![0usize; n];
    for k in 0..total {
        let mut rest = k;
        for c in codes.iter_mut() {
            *c = rest % NUM_TAGS;
            rest /= NUM_TAGS;
        }
        let mut s = tm.start_score(codes[0]) + em.row(0)[codes[0]];
        for t in 1..n {
            s = s + tm.trans_score(codes[t - 1], codes[t]) + em.row(t)[codes[t]];
        }
        let better = match &best {
            None => true,
            Some((b, bs)) => s > *bs || (s == *bs && reverse_lex_less(&codes, b)),
        };
        if better {
            best = Some((codes.clone(), s));
        }
    }
    let (codes, score) = best.expect("at least one sequence");
    if score == f64::NEG_INFINITY {
        return Err(Error::Decode("every tag sequence has score -inf".into()));
    }
    let tags = codes
        .into_iter()
        .map(|c| Tag::from_code(c).expect("three tags"))
        .collect();
    Ok((tags, score))
}

fn reverse_lex_less(a: &[usize], b: &[usize]) -> bool {
    a.iter().rev().lt(b.iter().rev())
}

/// Emissions, then Viterbi, then spans. Both taggers decode through here.
pub fn decode_tags(tagger: &dyn Tagger, tm: &TransitionModel, chars: &[char]) -> Result<Vec<Tag>> {
    if chars.is_empty() {
        return Ok(Vec::new());
    }
    let em = tagger.emissions(chars)?;
    viterbi(&em, tm).map(|(tags, _)| tags)
}

pub fn decode_sentence(
    tagger: &dyn Tagger,
    tm: &TransitionModel,
    chars: &[char],
) -> Result<Vec<TriggerSpan>> {
    let tags = decode_tags(tagger, tm, chars)?;
    if tm.constrained {
        tags_to_spans(&tags)
    } else {
        Ok(repair_spans(&tags))
    }
}

/// Spans from a possibly BIO-invalid sequence: a stray I opens a new span.
pub fn repair_spans(tags: &[Tag]) -> Vec<TriggerSpan> {
    let mut spans: Vec<TriggerSpan> = Vec::new();
    let mut prev = Tag::O;
    for (i, &tag) in tags.iter().enumerate() {
        match (tag, prev) {
            (Tag::B, _) | (Tag::I, Tag::O) => spans.push(TriggerSpan::new(i, 1)),
            (Tag::I, _) => spans.last_mut().expect("open span").len += 1,
            (Tag::O, _) => {}
        }
        prev = tag;
    }
    spans
}

/// Replaces stray I tags (at the start or after O) with B.
pub fn repair_tags(tags: &[Tag]) -> Vec<Tag> {
    let mut out = Vec::with_capacity(tags.len());
    for &tag in tags {
        let fixed = if tag == Tag::I && matches!(out.last(), None | Some(Tag::O)) {
            Tag::B
        } else {
            tag
        };
        out.push(fixed);
    }
    out
}
