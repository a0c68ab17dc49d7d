use std::collections::HashMap;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_NAME: &str = "<PAD>";
pub const UNK_NAME: &str = "<UNK>";

/// Character dictionary. Indices 0 and 1 are reserved for padding and
/// unknown characters; corpus characters start at 2.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary whose non-reserved tokens are `tokens` in order.
    pub fn from_tokens(tokens: Vec<char>) -> std::result::Result<Self, char> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, &c) in tokens.iter().enumerate() {
            if index.insert(c, i + 2).is_some() {
                return Err(c);
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Number of rows including PAD and UNK.
    pub fn len(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn index_of(&self, c: char) -> usize {
        self.get(c).unwrap_or(UNK)
    }

    /// The character at `index`, or `None` for reserved/out-of-range indices.
    pub fn token(&self, index: usize) -> Option<char> {
        index.checked_sub(2).and_then(|i| self.tokens.get(i)).copied()
    }

    /// Non-reserved tokens in index order (index 2 first).
    pub fn tokens(&self) -> &[char] {
        &self.tokens
    }
}

/// Assigns indices 2, 3, ... by descending frequency, ties broken by first
/// occurrence. Characters seen fewer than `min_count` times are left out.
pub fn build_vocab<'a, I>(sentences: I, min_count: usize) -> Vocabulary
where
    I: IntoIterator<Item = &'a [char]>,
{
    let min_count = min_count.max(1);
    let mut counts: HashMap<char, (usize, usize)> = HashMap::new();
    let mut seen = 0usize;
    for sentence in sentences {
        for &c in sentence {
            let entry = counts.entry(c).or_insert((0, seen));
            entry.0 += 1;
            seen += 1;
        }
    }
    let mut entries: Vec<(char, usize, usize)> = counts
        .into_iter()
        .filter(|&(_, (n, _))| n >= min_count)
        .map(|(c, (n, first))| (c, n, first))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    Vocabulary::from_tokens(entries.into_iter().map(|e| e.0).collect())
        .expect("counted characters are distinct")
}

/// Maps characters to vocabulary indices, unknown characters to UNK.
pub fn encode(chars: &[char], vocab: &Vocabulary) -> Vec<usize> {
    chars.iter().map(|&c| vocab.index_of(c)).collect()
}
