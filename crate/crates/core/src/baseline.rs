//! Separate source/channel coding chain used as the comparison scheme:
//! letter statistics, Huffman source code, rate-1/3 convolutional channel
//! code with erasure-aware hard-decision Viterbi decoding, and the resulting
//! per-sentence overhead arithmetic.

use std::fmt;

use crate::channels::{apply_stream, ChannelConfig};
use crate::error::{Error, Result};
use crate::tokenizer::{Vocabulary, NUM_SPECIAL};

/// `a`–`z` then space.
pub const ALPHABET_SIZE: usize = 27;
const SPACE: u8 = 26;

/// Maps text to symbol indices, lowercasing ASCII letters.
pub fn to_symbols(text: &str) -> Result<Vec<u8>> {
    text.chars()
        .map(|c| match c.to_ascii_lowercase() {
            l @ 'a'..='z' => Ok(l as u8 - b'a'),
            ' ' => Ok(SPACE),
            _ => Err(Error::Normalization(c)),
        })
        .collect()
}

pub fn symbol_char(s: u8) -> char {
    if s == SPACE {
        ' '
    } else {
        (b'a' + s) as char
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolStats {
    pub probabilities: [f64; ALPHABET_SIZE],
    /// Entropy in bits per symbol.
    pub entropy: f64,
    /// Average letters per token.
    pub avg_token_len: f64,
}

impl SymbolStats {
    pub fn from_probabilities(probabilities: [f64; ALPHABET_SIZE], avg_token_len: f64) -> Result<Self> {
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!("symbol probabilities sum to {total}, not 1")));
        }
        Ok(Self {
            probabilities,
            entropy: entropy(&probabilities),
            avg_token_len,
        })
    }

    /// Letter and space frequencies over `sentences`. With a vocabulary the
    /// token count comes from its wordpiece encoding, otherwise from
    /// whitespace splitting.
    pub fn estimate<S: AsRef<str>>(sentences: &[S], vocab: Option<&Vocabulary>) -> Result<Self> {
        let mut counts = [0u64; ALPHABET_SIZE];
        let mut tokens = 0usize;
        for s in sentences {
            let s = s.as_ref();
            for sym in to_symbols(s)? {
                counts[sym as usize] += 1;
            }
            tokens += match vocab {
                Some(v) => v
                    .encode(s, usize::MAX)?
                    .ids()
                    .iter()
                    .filter(|&&id| id >= NUM_SPECIAL)
                    .count(),
                None => s.split_whitespace().count(),
            };
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Data("no symbols to estimate statistics from".into()));
        }
        let letters = total - counts[SPACE as usize];
        let mut probabilities = [0.0; ALPHABET_SIZE];
        for (p, &c) in probabilities.iter_mut().zip(&counts) {
            *p = c as f64 / total as f64;
        }
        Ok(Self {
            entropy: entropy(&probabilities),
            probabilities,
            avg_token_len: if tokens == 0 { 0.0 } else { letters as f64 / tokens as f64 },
        })
    }
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

// Huffman --------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf(u8),
    Internal(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HuffmanCode {
    codes: Vec<Option<Vec<u8>>>,
    nodes: Vec<Node>,
    root: usize,
    /// Expected codeword length in bits per symbol.
    pub avg_len: f64,
}

/// Best-effort decoding result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub text: String,
    /// The stream ended inside a codeword.
    pub truncated: bool,
}

impl HuffmanCode {
    /// Builds an optimal prefix code over the symbols with nonzero
    /// probability. Merges always take the two lightest subtrees, with ties
    /// going to the lexicographically smallest symbol set.
    pub fn build(stats: &SymbolStats) -> Result<Self> {
        Self::from_probabilities(&stats.probabilities)
    }

    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        if p.len() > ALPHABET_SIZE {
            return Err(Error::Data(format!("{} symbols exceed the alphabet", p.len())));
        }
        let mut nodes = Vec::new();
        // (weight, sorted symbol set, node index)
        let mut pool: Vec<(f64, Vec<u8>, usize)> = Vec::new();
        for (s, &w) in p.iter().enumerate() {
            if w > 0.0 {
                nodes.push(Node::Leaf(s as u8));
                pool.push((w, vec![s as u8], nodes.len() - 1));
            }
        }
        if pool.is_empty() {
            return Err(Error::Data("Huffman code needs at least one symbol with nonzero probability".into()));
        }
        while pool.len() > 1 {
            pool.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let (wa, sa, a) = pool.remove(0);
            let (wb, sb, b) = pool.remove(0);
            nodes.push(Node::Internal(a, b));
            let mut set = sa;
            set.extend(sb);
            set.sort_unstable();
            pool.push((wa + wb, set, nodes.len() - 1));
        }
        let root = pool[0].2;

        let mut codes = vec![None; ALPHABET_SIZE];
        let mut stack = vec![(root, Vec::new())];
        while let Some((n, prefix)) = stack.pop() {
            match nodes[n] {
                // A lone symbol still needs one bit.
                Node::Leaf(s) => codes[s as usize] = Some(if prefix.is_empty() { vec![0] } else { prefix }),
                Node::Internal(a, b) => {
                    let mut pa = prefix.clone();
                    pa.push(0);
                    let mut pb = prefix;
                    pb.push(1);
                    stack.push((a, pa));
                    stack.push((b, pb));
                }
            }
        }
        let total: f64 = p.iter().sum();
        let avg_len = p
            .iter()
            .zip(&codes)
            .filter_map(|(w, c)| c.as_ref().map(|c| w * c.len() as f64))
            .sum::<f64>()
            / total;
        Ok(Self {
            codes,
            nodes,
            root,
            avg_len,
        })
    }

    pub fn codeword(&self, symbol: u8) -> Option<&[u8]> {
        self.codes.get(symbol as usize)?.as_deref()
    }

    /// Codewords of all coded symbols.
    pub fn codewords(&self) -> impl Iterator<Item = (u8, &[u8])> {
        self.codes
            .iter()
            .enumerate()
            .filter_map(|(s, c)| c.as_deref().map(|c| (s as u8, c)))
    }

    pub fn kraft_sum(&self) -> f64 {
        self.codewords().map(|(_, c)| 0.5f64.powi(c.len() as i32)).sum()
    }

    /// Bits (0/1) for `text`.
    pub fn encode(&self, text: &str) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for s in to_symbols(text)? {
            let code = self
                .codeword(s)
                .ok_or_else(|| Error::Vocabulary(format!("symbol {:?} has no codeword", symbol_char(s))))?;
            out.extend_from_slice(code);
        }
        Ok(out)
    }

    /// Walks the code tree; a bit with no matching branch is skipped so
    /// decoding resumes at the next codeword boundary.
    pub fn decode(&self, bits: &[u8]) -> Decoded {
        let mut text = String::new();
        let mut node = self.root;
        let mut inside = false;
        for &b in bits {
            match self.nodes[node] {
                Node::Internal(l, r) => {
                    node = if b == 0 { l } else { r };
                    inside = true;
                }
                // Single-symbol code: only `0` is a codeword.
                Node::Leaf(_) if b != 0 => continue,
                Node::Leaf(_) => inside = true,
            }
            if let Node::Leaf(s) = self.nodes[node] {
                if inside {
                    text.push(symbol_char(s));
                }
                node = self.root;
                inside = false;
            }
        }
        Decoded { text, truncated: inside }
    }
}

// Convolutional code -----------------------------------------------------------

/// Rate-1/3 feed-forward convolutional code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvCode {
    /// Constraint length `K`.
    pub k: usize,
    /// Generator polynomials; bit `K−1` taps the newest input.
    pub generators: [u32; 3],
}

impl ConvCode {
    pub const RATE: f64 = 1.0 / 3.0;

    /// `K = 3`, generators 7, 5, 7 (octal).
    pub fn k3() -> Self {
        Self {
            k: 3,
            generators: [0o7, 0o5, 0o7],
        }
    }

    /// `K = 7`, generators 133, 171, 165 (octal).
    pub fn k7() -> Self {
        Self {
            k: 7,
            generators: [0o133, 0o171, 0o165],
        }
    }

    pub fn new(k: usize, generators: [u32; 3]) -> Result<Self> {
        if !(2..=16).contains(&k) || generators.iter().any(|&g| g == 0 || g >> k != 0) {
            return Err(Error::Config(format!(
                "invalid convolutional code K={k} generators {generators:?}"
            )));
        }
        Ok(Self { k, generators })
    }

    fn num_states(&self) -> usize {
        1 << (self.k - 1)
    }

    /// The three output bits for input `u` from `state`, and the next state.
    fn branch(&self, state: usize, u: u8) -> ([u8; 3], usize) {
        let reg = ((u as u32) << (self.k - 1)) | state as u32;
        let out = self.generators.map(|g| ((reg & g).count_ones() & 1) as u8);
        (out, (reg >> 1) as usize)
    }

    /// Encodes `bits` followed by `K−1` flushing zeros;
    /// output length `3·(n + K − 1)`.
    pub fn encode(&self, bits: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 * (bits.len() + self.k - 1));
        let mut state = 0;
        for &u in bits.iter().chain(std::iter::repeat(&0).take(self.k - 1)) {
            let (o, next) = self.branch(state, u & 1);
            out.extend_from_slice(&o);
            state = next;
        }
        out
    }

    /// Hard-decision Viterbi over `{−1, 0, +1}` symbols (bit `b` sent as
    /// `2b − 1`, `0` = erased). Erased symbols add nothing to any branch
    /// metric. Ties keep the lower-numbered predecessor.
    pub fn viterbi_decode(&self, received: &[i8]) -> Result<Vec<u8>> {
        if received.len() % 3 != 0 {
            return Err(Error::Usage(format!(
                "received length {} is not a multiple of 3",
                received.len()
            )));
        }
        let steps = received.len() / 3;
        if steps < self.k - 1 {
            return Ok(Vec::new());
        }
        let ns = self.num_states();
        let table: Vec<[([u8; 3], usize); 2]> = (0..ns).map(|s| [self.branch(s, 0), self.branch(s, 1)]).collect();
        const INF: u32 = u32::MAX / 2;
        let mut metric = vec![INF; ns];
        metric[0] = 0;
        // survivor[t][state] = (previous state, input bit)
        let mut survivors: Vec<Vec<(u32, u8)>> = Vec::with_capacity(steps);
        let mut next = vec![INF; ns];
        for t in 0..steps {
            let r = &received[3 * t..3 * t + 3];
            next.fill(INF);
            let mut surv = vec![(0u32, 0u8); ns];
            for s in 0..ns {
                if metric[s] >= INF {
                    continue;
                }
                for u in 0..2u8 {
                    let (out, to) = table[s][u as usize];
                    let cost: u32 = out
                        .iter()
                        .zip(r)
                        .filter(|(&b, &x)| x != 0 && (x > 0) != (b == 1))
                        .count() as u32;
                    let m = metric[s] + cost;
                    if m < next[to] {
                        next[to] = m;
                        surv[to] = (s as u32, u);
                    }
                }
            }
            std::mem::swap(&mut metric, &mut next);
            survivors.push(surv);
        }
        let mut state = 0usize;
        let mut bits = vec![0u8; steps];
        for t in (0..steps).rev() {
            let (prev, u) = survivors[t][state];
            bits[t] = u;
            state = prev as usize;
        }
        bits.truncate(steps - (self.k - 1));
        Ok(bits)
    }
}

/// Maps 0/1 bits to the ±1 channel alphabet.
pub fn to_antipodal(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect()
}

/// The full separate-coding chain.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub huffman: HuffmanCode,
    pub conv: ConvCode,
}

impl Baseline {
    pub fn new(stats: &SymbolStats, conv: ConvCode) -> Result<Self> {
        Ok(Self {
            huffman: HuffmanCode::build(stats)?,
            conv,
        })
    }

    /// Huffman → convolutional encode → channel → Viterbi → Huffman decode.
    /// Deletion-channel output is zero-padded at the tail to the sent
    /// length before decoding.
    pub fn transmit(&self, text: &str, channel: &ChannelConfig) -> Result<Decoded> {
        let source = self.huffman.encode(text)?;
        let coded = to_antipodal(&self.conv.encode(&source));
        let received = apply_stream(&coded, channel);
        let bits = self.conv.viterbi_decode(&received)?;
        Ok(self.huffman.decode(&bits))
    }

    /// Channel bits spent on `text`.
    pub fn coded_len(&self, text: &str) -> Result<usize> {
        Ok(3 * (self.huffman.encode(text)?.len() + self.conv.k - 1))
    }
}

// Overhead arithmetic -----------------------------------------------------------

pub const REFERENCE_H: f64 = 4.059;
pub const REFERENCE_HBAR: f64 = 4.093;
pub const REFERENCE_LBAR: f64 = 4.588;
pub const REFERENCE_Q: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct OverheadReport {
    pub h: f64,
    pub h_bar: f64,
    pub l_bar: f64,
    pub rate: f64,
}

impl OverheadReport {
    pub const CSV_HEADER: &'static str =
        "corpus_H,corpus_Hbar,corpus_Lbar,R,bits_per_symbol,Q_formula,ref_H,ref_Hbar,ref_Lbar,ref_Q";

    pub fn new(stats: &SymbolStats, code: &HuffmanCode, rate: f64) -> Self {
        Self {
            h: stats.entropy,
            h_bar: code.avg_len,
            l_bar: stats.avg_token_len,
            rate,
        }
    }

    /// The published operating point.
    pub fn reference() -> Self {
        Self {
            h: REFERENCE_H,
            h_bar: REFERENCE_HBAR,
            l_bar: REFERENCE_LBAR,
            rate: ConvCode::RATE,
        }
    }

    /// Channel bits per source symbol, `H̄ / R`.
    pub fn bits_per_symbol(&self) -> f64 {
        self.h_bar / self.rate
    }

    /// Bits per token, `⌈L̄·H̄ / R⌉`.
    pub fn q_formula(&self) -> usize {
        // Rounding guards against 56.0000000001-style float noise.
        let x = self.l_bar * self.h_bar / self.rate;
        let r = (x * 1e9).round() / 1e9;
        r.ceil() as usize
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.3},{},{},{},{},{}",
            self.h,
            self.h_bar,
            self.l_bar,
            self.rate,
            self.bits_per_symbol(),
            self.q_formula(),
            REFERENCE_H,
            REFERENCE_HBAR,
            REFERENCE_LBAR,
            REFERENCE_Q
        )
    }
}

impl fmt::Display for OverheadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = Self::reference();
        writeln!(f, "{:<28}{:>12}{:>12}", "", "corpus", "reference")?;
        writeln!(f, "{:<28}{:>12.3}{:>12.3}", "entropy H (bits/symbol)", self.h, r.h)?;
        writeln!(f, "{:<28}{:>12.3}{:>12.3}", "Huffman length H-bar", self.h_bar, r.h_bar)?;
        writeln!(f, "{:<28}{:>12.3}{:>12.3}", "letters per token L-bar", self.l_bar, r.l_bar)?;
        writeln!(f, "{:<28}{:>12.4}{:>12.4}", "code rate R", self.rate, r.rate)?;
        writeln!(
            f,
            "{:<28}{:>12.3}{:>12.3}",
            "H-bar / R (bits/symbol)",
            self.bits_per_symbol(),
            r.bits_per_symbol()
        )?;
        writeln!(f, "{:<28}{:>12}{:>12}", "ceil(L-bar H-bar / R)", self.q_formula(), r.q_formula())?;
        writeln!(f, "{:<28}{:>12}{:>12}", "stated Q", "", REFERENCE_Q)
    }
}

/// Fraction of sent symbols reproduced at the same position.
pub fn char_accuracy(sent: &str, received: &str) -> f64 {
    let n = sent.chars().count();
    if n == 0 {
        return 1.0;
    }
    sent.chars().zip(received.chars()).filter(|(a, b)| a == b).count() as f64 / n as f64
}
