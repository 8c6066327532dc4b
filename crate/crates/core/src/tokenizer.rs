//! Wordpiece tokenisation with a small frequency-trained vocabulary.
//!
//! Words are split greedily into the longest vocabulary piece from the left;
//! pieces after the first carry the `##` continuation prefix. Every character
//! seen during training is in the vocabulary both as a word-initial piece and
//! as a continuation, so encoding in-alphabet text never needs `[UNK]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SEP: usize = 4;
pub const MASK: usize = 5;
pub const NUM_SPECIAL: usize = 6;

const SPECIAL_TOKENS: [&str; NUM_SPECIAL] = ["[PAD]", "[BOS]", "[EOS]", "[UNK]", "[SEP]", "[MASK]"];
const CONT: &str = "##";

/// Lowercases, drops characters outside `[a-z' .]` and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        let w: String = word
            .chars()
            .flat_map(char::to_lowercase)
            .filter(|c| c.is_ascii_lowercase() || *c == '\'' || *c == '.')
            .collect();
        if w.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&w);
    }
    out
}

/// Token ids, usually `[BOS] … [EOS]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence(Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn into_ids(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Ids right-padded with `[PAD]` to `len`.
    pub fn padded(&self, len: usize) -> Vec<usize> {
        let mut v = self.0.clone();
        v.resize(len.max(v.len()), PAD);
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::Vocabulary(format!("special token {s} must have id {i}")));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(Error::Vocabulary(format!("invalid token {t:?} at id {i}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Trains a vocabulary by greedy pair merging over word frequencies.
    ///
    /// The result always holds the specials and every seen character in both
    /// word-initial and `##` form; merged pieces are added until `target_size`
    /// is reached or nothing is left to merge.
    pub fn build<S: AsRef<str>>(corpus: &[S], target_size: usize) -> Result<Self> {
        let mut word_freq: BTreeMap<String, usize> = BTreeMap::new();
        for line in corpus {
            for w in normalize(line.as_ref()).split(' ').filter(|w| !w.is_empty()) {
                *word_freq.entry(w.to_string()).or_default() += 1;
            }
        }
        if word_freq.is_empty() {
            return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut chars: Vec<char> = word_freq.keys().flat_map(|w| w.chars()).collect();
        chars.sort_unstable();
        chars.dedup();
        if target_size < NUM_SPECIAL + chars.len() {
            return Err(Error::Data(format!(
                "target size {target_size} below {} specials plus {} characters",
                NUM_SPECIAL,
                chars.len()
            )));
        }

        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(chars.iter().map(|c| c.to_string()));
        tokens.extend(chars.iter().map(|c| format!("{CONT}{c}")));
        let mut known: std::collections::HashSet<String> = tokens.iter().cloned().collect();

        let mut words: Vec<(Vec<String>, usize)> = word_freq
            .into_iter()
            .map(|(w, f)| {
                let pieces = w
                    .chars()
                    .enumerate()
                    .map(|(i, c)| if i == 0 { c.to_string() } else { format!("{CONT}{c}") })
                    .collect();
                (pieces, f)
            })
            .collect();

        while tokens.len() < target_size {
            let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
            for (pieces, f) in &words {
                for w in pieces.windows(2) {
                    *pairs.entry((&w[0], &w[1])).or_default() += f;
                }
            }
            // Highest count first; ties go to the lexicographically smallest merge.
            let best = pairs
                .into_iter()
                .map(|((a, b), n)| (n, merge_pieces(a, b), a.to_string(), b.to_string()))
                .max_by(|x, y| x.0.cmp(&y.0).then_with(|| y.1.cmp(&x.1)));
            let Some((_, merged, a, b)) = best else { break };
            for (pieces, _) in &mut words {
                let mut i = 0;
                while i + 1 < pieces.len() {
                    if pieces[i] == a && pieces[i + 1] == b {
                        pieces[i] = merged.clone();
                        pieces.remove(i + 1);
                    }
                    i += 1;
                }
            }
            if known.insert(merged.clone()) {
                tokens.push(merged);
            }
        }
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Wordpiece-encodes `text`, framing it with `[BOS]`/`[EOS]`. Sequences
    /// longer than `max_len` keep their first `max_len − 1` ids and end in
    /// `[EOS]`.
    pub fn encode(&self, text: &str, max_len: usize) -> Result<TokenSequence> {
        Ok(self.encode_counting(text, max_len)?.0)
    }

    /// Like [`encode`](Self::encode) but also reports whether truncation happened.
    pub fn encode_counting(&self, text: &str, max_len: usize) -> Result<(TokenSequence, bool)> {
        if max_len < 2 {
            return Err(Error::Usage(format!("max_len {max_len} cannot hold BOS and EOS")));
        }
        let norm = normalize(text);
        if norm.is_empty() {
            return Err(Error::Data(format!("text {text:?} is empty after normalization")));
        }
        let mut ids = vec![BOS];
        for word in norm.split(' ') {
            self.encode_word(word, &mut ids);
        }
        let truncated = ids.len() + 1 > max_len;
        ids.truncate(max_len - 1);
        ids.push(EOS);
        Ok((TokenSequence(ids), truncated))
    }

    fn encode_word(&self, word: &str, out: &mut Vec<usize>) {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let from = chars[start].0;
            let mut found = None;
            for end in (start + 1..=chars.len()).rev() {
                let to = chars.get(end).map_or(word.len(), |c| c.0);
                let piece = if start == 0 {
                    self.index.get(&word[from..to])
                } else {
                    self.index.get(&format!("{CONT}{}", &word[from..to]))
                };
                if let Some(&id) = piece {
                    found = Some((id, end));
                    break;
                }
            }
            match found {
                Some((id, end)) => {
                    pieces.push(id);
                    start = end;
                }
                None => {
                    out.push(UNK);
                    return;
                }
            }
        }
        out.extend(pieces);
    }

    /// Joins pieces back into text, skipping specials and stopping at the
    /// first `[EOS]`.
    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            let tok = self
                .token(id)
                .ok_or_else(|| Error::Vocabulary(format!("unknown token id {id}")))?;
            if id == EOS {
                break;
            }
            if id < NUM_SPECIAL {
                continue;
            }
            match tok.strip_prefix(CONT) {
                Some(rest) => out.push_str(rest),
                None => {
                    if !out.is_empty() {
                        out.push(' ');
                    }
                    out.push_str(tok);
                }
            }
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let tokens = r.lines().collect::<std::io::Result<Vec<_>>>()?;
        Self::from_tokens(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl fmt::Display for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vocabulary({} tokens)", self.tokens.len())
    }
}

fn merge_pieces(a: &str, b: &str) -> String {
    format!("{a}{}", b.strip_prefix(CONT).unwrap_or(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize("  Hello,   World!  It's 3 p.m. "), "hello world it's p.m.");
        assert_eq!(normalize("!!! 42"), "");
    }

    #[test]
    fn minimal_corpus() {
        let v = Vocabulary::build(&["aa"], 10).unwrap();
        for t in ["a", "##a", "[PAD]", "[BOS]", "[EOS]", "[UNK]", "[SEP]", "[MASK]"] {
            assert!(v.contains(t), "{t}");
        }
        assert_eq!(v.id("[PAD]"), Some(PAD));
        assert_eq!(v.id("[MASK]"), Some(MASK));
    }

    #[test]
    fn frequent_word_becomes_whole_piece() {
        let mut corpus = vec!["the"; 100];
        corpus.push("cat sat");
        let v = Vocabulary::build(&corpus, 40).unwrap();
        assert!(v.contains("the"));
        let ids = v.encode("the", 8).unwrap();
        assert_eq!(ids.ids(), &[BOS, v.id("the").unwrap(), EOS]);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(Vocabulary::build::<&str>(&[], 50), Err(Error::Data(_))));
        assert!(matches!(Vocabulary::build(&["  ?? "], 50), Err(Error::Data(_))));
        assert!(matches!(Vocabulary::build(&["abc"], 8), Err(Error::Data(_))));
    }

    #[test]
    fn single_letter_shows_length_inflation() {
        let v = Vocabulary::build(&["a b"], 12).unwrap();
        let s = v.encode("a", 8).unwrap();
        assert_eq!(s.ids(), &[BOS, v.id("a").unwrap(), EOS]);
        assert!(s.len() > 1);
    }

    #[test]
    fn unseen_word_falls_back_to_characters() {
        let v = Vocabulary::build(&["cat", "act", "tac"], 14).unwrap();
        let s = v.encode("tact", 16).unwrap();
        assert!(!s.ids().contains(&UNK));
        assert_eq!(v.decode(s.ids()).unwrap(), "tact");
    }

    #[test]
    fn unseen_character_is_unk() {
        let v = Vocabulary::build(&["cat"], 14).unwrap();
        let s = v.encode("dog", 16).unwrap();
        assert_eq!(s.ids(), &[BOS, UNK, EOS]);
    }

    #[test]
    fn decode_rules() {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(["play", "##ing", "run"].map(String::from));
        let v = Vocabulary::from_tokens(tokens).unwrap();
        assert_eq!(v.decode(&[BOS, EOS]).unwrap(), "");
        let (play, ing, run) = (6, 7, 8);
        assert_eq!(v.decode(&[BOS, play, ing, EOS]).unwrap(), "playing");
        assert_eq!(v.decode(&[BOS, run, PAD, play, EOS, run]).unwrap(), "run play");
        assert_eq!(v.encode("playing", 8).unwrap().ids(), &[BOS, play, ing, EOS]);
        assert!(matches!(v.decode(&[BOS, 10_000]), Err(Error::Vocabulary(_))));
    }

    #[test]
    fn truncation_keeps_eos() {
        let v = Vocabulary::build(&["a b c d e f"], 20).unwrap();
        let (s, truncated) = v.encode_counting("a b c d e f", 4).unwrap();
        assert!(truncated);
        assert_eq!(s.len(), 4);
        assert_eq!(*s.ids().last().unwrap(), EOS);
        assert!(matches!(v.encode("   ", 10), Err(Error::Data(_))));
    }

    #[test]
    fn file_roundtrip_and_validation() {
        let v = Vocabulary::build(&["the cat sat on the mat"], 40).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("[PAD]\n[BOS]\n[EOS]\n[UNK]\n[SEP]\n[MASK]\n"));
        assert_eq!(Vocabulary::read_from(buf.as_slice()).unwrap(), v);
        assert!(Vocabulary::read_from("[BOS]\n[PAD]\n".as_bytes()).is_err());
    }
}
