//! Sentence-level evaluation metrics: BLEU, perplexity, an encoder-based
//! similarity proxy, word accuracy and unigram F1.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::Result;
use crate::model::JsccModel;
use crate::tokenizer::TokenSequence;

/// Counts of every contiguous `n`-gram in `tokens`.
fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped `n`-gram matches and candidate `n`-gram total.
pub fn clipped_matches<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refr = ngram_counts(reference, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refr.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, (candidate.len() + 1).saturating_sub(n))
}

/// Sentence BLEU with uniform weights over `1..=max_n`. Without smoothing,
/// any level with zero matches gives 0; with `smooth`, levels `n ≥ 2` use
/// add-one counts.
pub fn bleu<T: Eq + Hash>(candidate: &[T], reference: &[T], max_n: usize, smooth: bool) -> f64 {
    if candidate.is_empty() || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (m, total) = clipped_matches(candidate, reference, n);
        let (m, total) = if smooth && n >= 2 {
            (m as f64 + 1.0, total as f64 + 1.0)
        } else {
            (m as f64, total as f64)
        };
        if m == 0.0 || total == 0.0 {
            return 0.0;
        }
        log_sum += (m / total).ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * (log_sum / max_n as f64).exp()
}

/// `e^loss`.
pub fn perplexity(loss: f64) -> f64 {
    loss.exp()
}

/// Fraction of aligned positions holding the same word, over the longer of
/// the two sentences.
pub fn word_accuracy<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let n = candidate.len().max(reference.len());
    if n == 0 {
        return 1.0;
    }
    candidate.iter().zip(reference).filter(|(a, b)| a == b).count() as f64 / n as f64
}

/// Bag-of-words F1 with clipped counts.
pub fn unigram_f1<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let (overlap, _) = clipped_matches(candidate, reference, 1);
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / candidate.len() as f64;
    let r = overlap as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine of the model's mean-pooled encoder states for two sentences.
pub fn similarity(model: &JsccModel, a: &TokenSequence, b: &TokenSequence) -> Result<f64> {
    Ok(cosine(&model.sentence_embedding(a)?, &model.sentence_embedding(b)?))
}

pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Mean metrics over a set of transmitted sentences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub bleu: f64,
    /// Mean BLEU with add-one smoothing on `n ≥ 2`; not part of the CSV row.
    pub bleu_smoothed: f64,
    pub ppl: f64,
    pub similarity: f64,
    pub unigram_f1: f64,
    pub word_accuracy: f64,
    pub n_samples: usize,
}

impl EvalReport {
    /// `bleu,ppl,similarity,unigram_f1,word_accuracy,n_samples`
    pub fn csv_fields(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.bleu, self.ppl, self.similarity, self.unigram_f1, self.word_accuracy, self.n_samples
        )
    }

    /// Moves the smoothed score into the `bleu` column.
    pub fn with_smoothed_bleu(self) -> Self {
        Self {
            bleu: self.bleu_smoothed,
            ..self
        }
    }
}

/// Running sums for an [`EvalReport`].
#[derive(Clone, Debug, Default)]
pub struct EvalAccumulator {
    bleu: f64,
    bleu_smoothed: f64,
    similarity: f64,
    unigram_f1: f64,
    word_accuracy: f64,
    n: usize,
}

impl EvalAccumulator {
    /// Adds one (reference, output) pair; `similarity` is supplied by the
    /// caller since it needs a model.
    pub fn add(&mut self, reference: &str, output: &str, similarity: f64) {
        let (r, c) = (words(reference), words(output));
        self.bleu += bleu(&c, &r, 4, false);
        self.bleu_smoothed += bleu(&c, &r, 4, true);
        self.unigram_f1 += unigram_f1(&c, &r);
        self.word_accuracy += word_accuracy(&c, &r);
        self.similarity += similarity;
        self.n += 1;
    }

    pub fn finish(&self, ppl: f64) -> EvalReport {
        let n = self.n.max(1) as f64;
        EvalReport {
            bleu: self.bleu / n,
            bleu_smoothed: self.bleu_smoothed / n,
            ppl,
            similarity: self.similarity / n,
            unigram_f1: self.unigram_f1 / n,
            word_accuracy: self.word_accuracy / n,
            n_samples: self.n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bleu_basics() {
        let s = words("a dog runs in the park");
        assert_eq!(bleu(&s, &s, 4, false), 1.0);
        assert_eq!(bleu(&words("x y z w"), &s, 4, false), 0.0);
        assert_eq!(bleu::<&str>(&[], &s, 4, false), 0.0);
        let (m, t) = clipped_matches(&words("the the the"), &words("the cat"), 1);
        assert_eq!((m, t), (1, 3));
        // Reversal lowers the score for n ≥ 2.
        let rev: Vec<&str> = s.iter().rev().copied().collect();
        assert!(bleu(&rev, &s, 2, true) < bleu(&s, &s, 2, true));
    }

    #[test]
    fn brevity_penalty_and_smoothing() {
        let r = words("a b c d e f g h");
        let c = words("a b c d");
        assert!((bleu(&c, &r, 4, false) - (1.0f64 - 2.0).exp()).abs() < 1e-12);
        let partial = words("a b x d e f");
        assert_eq!(bleu(&words("a x b y"), &r, 4, false), 0.0);
        assert!(bleu(&words("a x b y"), &r, 4, true) > 0.0);
        assert!(bleu(&partial, &r, 4, true) > 0.0);
    }

    #[test]
    fn word_level_metrics() {
        let r = words("one two three four five six seven eight nine ten");
        let mut c = r.clone();
        c[4] = "zzz";
        assert!((word_accuracy(&c, &r) - 0.9).abs() < 1e-12);
        assert_eq!(word_accuracy(&r, &r), 1.0);
        assert_eq!(unigram_f1(&r, &r), 1.0);
        assert_eq!(word_accuracy::<&str>(&[], &r), 0.0);
        assert_eq!(unigram_f1::<&str>(&[], &r), 0.0);
    }

    #[test]
    fn perplexity_values() {
        assert_eq!(perplexity(0.0), 1.0);
        assert!((perplexity(300f64.ln()) - 300.0).abs() < 1e-9);
        assert!(perplexity(2.0) > perplexity(1.0));
    }

    #[test]
    fn cosine_bounds() {
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine(&[0.0], &[1.0]), 0.0);
        assert!((cosine(&[1.0, -1.0], &[-1.0, 1.0]) + 1.0).abs() < 1e-15);
    }
}
