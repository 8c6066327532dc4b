//! Sentence-pair corpora: TSV loading, a templated synthetic generator with
//! rule-based paraphrases, deterministic splits and epoch batching.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tokenizer::{normalize, TokenSequence, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// Target repeats the source.
    AutoRegressive,
    /// Target is a rephrasing of the source.
    Semantic,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SentencePair {
    pub source: String,
    pub target: String,
    pub kind: PairKind,
}

impl SentencePair {
    /// Normalises both sides; the kind follows from whether they agree.
    pub fn new(source: &str, target: &str) -> Result<Self> {
        let (source, target) = (normalize(source), normalize(target));
        if source.is_empty() || target.is_empty() {
            return Err(Error::Data("sentence empty after normalization".into()));
        }
        let kind = if source == target {
            PairKind::AutoRegressive
        } else {
            PairKind::Semantic
        };
        Ok(Self { source, target, kind })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub pairs: Vec<SentencePair>,
    train: Vec<usize>,
    valid: Vec<usize>,
    test: Vec<usize>,
}

pub const DEFAULT_SPLIT_SEED: u64 = 0x5EED;

impl Corpus {
    /// Corpus with the default 80/10/10 split.
    pub fn new(pairs: Vec<SentencePair>) -> Self {
        Self::with_split(pairs, DEFAULT_SPLIT_SEED, 0.8, 0.1)
    }

    pub fn with_split(pairs: Vec<SentencePair>, seed: u64, train: f64, valid: f64) -> Self {
        let mut c = Self {
            pairs,
            train: vec![],
            valid: vec![],
            test: vec![],
        };
        c.resplit(seed, train, valid);
        c
    }

    /// Shuffles indices with `seed` and cuts them into train/valid/test.
    pub fn resplit(&mut self, seed: u64, train: f64, valid: f64) {
        let n = self.pairs.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (n as f64 * train).round() as usize;
        let n_valid = ((n as f64 * valid).round() as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        self.train = idx[..n_train].to_vec();
        self.valid = idx[n_train..n_train + n_valid].to_vec();
        self.test = idx[n_train + n_valid..].to_vec();
    }

    pub fn split(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn split_pairs(&self, which: Split) -> impl Iterator<Item = &SentencePair> {
        self.split(which).iter().map(|&i| &self.pairs[i])
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every distinct sentence (sources and targets), for vocabulary training.
    pub fn sentences(&self) -> Vec<&str> {
        self.pairs
            .iter()
            .flat_map(|p| [p.source.as_str(), p.target.as_str()])
            .collect()
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        for p in &self.pairs {
            writeln!(w, "{}\t{}", p.source, p.target)?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_tsv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Reads `source<TAB>target` lines.
pub fn read_pairs<R: BufRead>(r: R) -> Result<Corpus> {
    let mut pairs = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(src), Some(tgt), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Parse {
                line: n + 1,
                msg: "expected exactly two tab-separated columns".into(),
            });
        };
        let pair = SentencePair::new(src, tgt).map_err(|e| Error::Parse {
            line: n + 1,
            msg: e.to_string(),
        })?;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(Error::Data("corpus file holds no sentence pairs".into()));
    }
    Ok(Corpus::new(pairs))
}

pub fn load_pairs(path: &Path) -> Result<Corpus> {
    read_pairs(BufReader::new(std::fs::File::open(path)?))
}

// Synthetic corpus ----------------------------------------------------------

const PEOPLE: &[&str] = &[
    "man", "woman", "boy", "girl", "child", "person", "worker", "player", "dancer", "tourist",
    "student", "farmer", "cyclist", "musician", "teenager", "gentleman", "surfer", "climber",
];
const ANIMALS: &[&str] = &["dog", "cat", "horse", "bird", "puppy", "elephant", "sheep", "cow"];
const ADJECTIVES: &[&str] = &[
    "young", "old", "tall", "small", "happy", "tired", "little", "large", "smiling", "blond",
    "quiet", "brown", "black", "white", "friendly", "famous",
];
const COLORS: &[&str] = &["red", "blue", "green", "yellow", "orange", "purple", "black", "white"];
const OBJECTS: &[&str] = &[
    "ball", "bicycle", "guitar", "umbrella", "camera", "kite", "newspaper", "sandwich", "basket",
    "bottle", "book", "hat", "jacket", "frisbee", "skateboard", "surfboard", "backpack", "letter",
];
const PLACES: &[&str] = &[
    "park", "street", "beach", "river", "field", "market", "garden", "building", "bridge",
    "station", "kitchen", "mountain", "forest", "stadium", "restaurant", "fountain", "crowd",
    "window",
];
const PREPOSITIONS: &[&str] = &["near", "in", "on", "behind", "beside", "across", "through", "under", "along"];
const PLURALS: &[(&str, &str)] = &[
    ("two", "men"),
    ("two", "women"),
    ("three", "children"),
    ("several", "people"),
    ("two", "dogs"),
    ("four", "players"),
    ("many", "tourists"),
    ("three", "students"),
];

/// Transitive verbs: (progressive, third person, past participle).
const TRANSITIVE: &[(&str, &str, &str)] = &[
    ("holding", "holds", "held"),
    ("carrying", "carries", "carried"),
    ("throwing", "throws", "thrown"),
    ("riding", "rides", "ridden"),
    ("playing", "plays", "played"),
    ("reading", "reads", "read"),
    ("eating", "eats", "eaten"),
    ("watching", "watches", "watched"),
    ("painting", "paints", "painted"),
    ("pushing", "pushes", "pushed"),
    ("pulling", "pulls", "pulled"),
    ("catching", "catches", "caught"),
    ("cleaning", "cleans", "cleaned"),
    ("wearing", "wears", "worn"),
];
const INTRANSITIVE: &[(&str, &str)] = &[
    ("walking", "walks"),
    ("running", "runs"),
    ("standing", "stands"),
    ("sitting", "sits"),
    ("jumping", "jumps"),
    ("waiting", "waits"),
    ("dancing", "dances"),
    ("swimming", "swims"),
    ("resting", "rests"),
    ("smiling", "smiles"),
    ("climbing", "climbs"),
    ("singing", "sings"),
];
const SYNONYMS: &[(&str, &str)] = &[
    ("man", "guy"),
    ("woman", "lady"),
    ("child", "kid"),
    ("boy", "kid"),
    ("small", "little"),
    ("large", "big"),
    ("happy", "cheerful"),
    ("running", "jogging"),
    ("near", "close to"),
    ("beside", "next to"),
    ("street", "road"),
    ("field", "meadow"),
    ("holding", "grasping"),
    ("walking", "strolling"),
    ("sitting", "seated"),
    ("puppy", "young dog"),
    ("tired", "sleepy"),
    ("building", "tower"),
];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn article(next: &str) -> &'static str {
    if next.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

/// `a/an/the [adj] noun` as words.
fn noun_phrase<R: Rng>(rng: &mut R, nouns: &[&str], adjs: &[&str], adj_prob: f64) -> Vec<String> {
    let noun = pick(rng, nouns);
    let adj = rng.gen_bool(adj_prob).then(|| pick(rng, adjs));
    let head = adj.unwrap_or(noun);
    let det = if rng.gen_bool(0.3) { "the" } else { article(head) };
    let mut out = vec![det.to_string()];
    out.extend(adj.map(str::to_string));
    out.push(noun.to_string());
    out
}

fn place_phrase<R: Rng>(rng: &mut R) -> Vec<String> {
    let mut out = vec![pick(rng, PREPOSITIONS).to_string(), "the".to_string()];
    if rng.gen_bool(0.25) {
        out.push(pick(rng, &["busy", "crowded", "quiet", "sunny", "empty", "old"]).to_string());
    }
    out.push(pick(rng, PLACES).to_string());
    out
}

/// One template sentence plus, where the structure allows, a passive
/// rephrasing.
fn synth_sentence<R: Rng>(rng: &mut R) -> (Vec<String>, Option<Vec<String>>) {
    let subject = |rng: &mut R| {
        let nouns = if rng.gen_bool(0.75) { PEOPLE } else { ANIMALS };
        noun_phrase(rng, nouns, ADJECTIVES, 0.5)
    };
    match rng.gen_range(0..5) {
        0 | 1 => {
            let (ing, _, pp) = TRANSITIVE[rng.gen_range(0..TRANSITIVE.len())];
            let subj = subject(rng);
            let obj = noun_phrase(rng, OBJECTS, COLORS, 0.5);
            let place = rng.gen_bool(0.6).then(|| place_phrase(rng));
            let mut active = subj.clone();
            active.extend(["is".to_string(), ing.to_string()]);
            active.extend(obj.iter().cloned());
            let mut passive = obj;
            passive.extend(["is", "being", pp, "by"].map(str::to_string));
            passive.extend(subj);
            if let Some(p) = place {
                active.extend(p.iter().cloned());
                passive.extend(p);
            }
            (active, Some(passive))
        }
        2 => {
            let (ing, _) = INTRANSITIVE[rng.gen_range(0..INTRANSITIVE.len())];
            let mut s = subject(rng);
            s.extend(["is".to_string(), ing.to_string()]);
            s.extend(place_phrase(rng));
            (s, None)
        }
        3 => {
            let (num, noun) = PLURALS[rng.gen_range(0..PLURALS.len())];
            let (ing, _) = INTRANSITIVE[rng.gen_range(0..INTRANSITIVE.len())];
            let mut s = vec![num.to_string(), noun.to_string(), "are".to_string(), ing.to_string()];
            s.extend(place_phrase(rng));
            (s, None)
        }
        _ => {
            let (_, third, _) = TRANSITIVE[rng.gen_range(0..TRANSITIVE.len())];
            let mut s = subject(rng);
            s.push(third.to_string());
            s.extend(noun_phrase(rng, OBJECTS, COLORS, 0.4));
            if rng.gen_bool(0.5) {
                s.extend(place_phrase(rng));
            }
            (s, None)
        }
    }
}

/// Rephrases by passive voice (when available) or synonym substitution.
fn paraphrase<R: Rng>(rng: &mut R, words: &[String], passive: Option<Vec<String>>) -> Option<Vec<String>> {
    if let Some(p) = passive {
        if rng.gen_bool(0.5) {
            return Some(p);
        }
    }
    let candidates: Vec<usize> = words
        .iter()
        .enumerate()
        .filter(|(_, w)| SYNONYMS.iter().any(|(a, _)| a == w))
        .map(|(i, _)| i)
        .collect();
    let &i = candidates.choose(rng)?;
    let syn = SYNONYMS.iter().find(|(a, _)| *a == words[i]).map(|(_, b)| *b)?;
    let mut out: Vec<String> = words[..i].to_vec();
    out.extend(syn.split(' ').map(str::to_string));
    out.extend(words[i + 1..].iter().cloned());
    // Keep the indefinite article in agreement with the new word.
    if i > 0 && (out[i - 1] == "a" || out[i - 1] == "an") {
        out[i - 1] = article(&out[i]).to_string();
    }
    Some(out)
}

pub const SYNTH_MAX_WORDS: usize = 12;
pub const SYNTH_MIN_WORDS: usize = 4;
/// Fraction of synthetic pairs whose target is a rephrasing.
pub const DEFAULT_SEMANTIC_FRACTION: f64 = 0.05;

/// Templated English-like corpus of `size` pairs, deterministic in `seed`.
pub fn synth_corpus(seed: u64, size: usize) -> Result<Corpus> {
    synth_corpus_with(seed, size, DEFAULT_SEMANTIC_FRACTION)
}

pub fn synth_corpus_with(seed: u64, size: usize, semantic_fraction: f64) -> Result<Corpus> {
    if size < 10 {
        return Err(Error::Data(format!("synthetic corpus size {size} below minimum of 10")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng::derive(seed, rng::label("synth")));
    let mut pairs = Vec::with_capacity(size);
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0;
    while pairs.len() < size {
        attempts += 1;
        let (words, passive) = synth_sentence(&mut rng);
        let source = words.join(" ");
        // Prefer distinct sources; fall back to repeats only if the grammar
        // is exhausted.
        if !seen.insert(source.clone()) && attempts < size * 20 {
            continue;
        }
        let target = if rng.gen_bool(semantic_fraction) {
            paraphrase(&mut rng, &words, passive)
                .filter(|p| p.len() <= SYNTH_MAX_WORDS)
                .map(|p| p.join(" "))
                .unwrap_or_else(|| source.clone())
        } else {
            source.clone()
        };
        debug_assert!((SYNTH_MIN_WORDS..=SYNTH_MAX_WORDS).contains(&words.len()));
        pairs.push(SentencePair::new(&source, &target)?);
    }
    Ok(Corpus::new(pairs))
}

// Batching ------------------------------------------------------------------

/// A tokenised pair; both sides are `[BOS] … [EOS]` of at most `L_E` ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedPair {
    pub src: TokenSequence,
    pub tgt: TokenSequence,
}

/// Tokenised split plus epoch-shuffled batching.
#[derive(Clone, Debug)]
pub struct Batcher {
    pub pairs: Vec<EncodedPair>,
    pub batch_size: usize,
    pub max_len: usize,
    pub seed: u64,
    /// Sequences truncated to fit `max_len` while encoding.
    pub truncated: usize,
}

impl Batcher {
    pub fn new(
        corpus: &Corpus,
        split: Split,
        vocab: &Vocabulary,
        max_len: usize,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Usage("batch size must be at least 1".into()));
        }
        let mut truncated = 0;
        let mut pairs = Vec::new();
        for p in corpus.split_pairs(split) {
            let (src, t1) = vocab.encode_counting(&p.source, max_len)?;
            let (tgt, t2) = vocab.encode_counting(&p.target, max_len)?;
            truncated += usize::from(t1) + usize::from(t2);
            pairs.push(EncodedPair { src, tgt });
        }
        Ok(Self {
            pairs,
            batch_size,
            max_len,
            seed,
            truncated,
        })
    }

    pub fn num_batches(&self) -> usize {
        self.pairs.len().div_ceil(self.batch_size)
    }

    /// Batches for `epoch`; the order depends only on `(seed, epoch)`.
    pub fn epoch(&self, epoch: u64) -> impl Iterator<Item = Vec<&EncodedPair>> + '_ {
        let mut order: Vec<usize> = (0..self.pairs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng::derive(self.seed, epoch)));
        let chunks: Vec<Vec<usize>> = order.chunks(self.batch_size).map(<[usize]>::to_vec).collect();
        chunks
            .into_iter()
            .map(move |c| c.into_iter().map(|i| &self.pairs[i]).collect())
    }

    /// Source ids of a batch, each padded to `max_len`.
    pub fn padded_sources(&self, batch: &[&EncodedPair]) -> Vec<Vec<usize>> {
        batch.iter().map(|p| p.src.padded(self.max_len)).collect()
    }
}
