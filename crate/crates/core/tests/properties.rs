//! Property tests over channels, tokenization, metrics and batching, plus a
//! brute-force BLEU oracle.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textjscc::autodiff::Graph;
use textjscc::channels::{apply, ChannelConfig, ChannelKind, Codeword};
use textjscc::data::{synth_corpus, Batcher, Split};
use textjscc::metrics::{bleu, perplexity, unigram_f1, word_accuracy};
use textjscc::tensor::Tensor;
use textjscc::tokenizer::{normalize, Vocabulary, BOS, EOS, PAD};

fn kind() -> impl Strategy<Value = ChannelKind> {
    prop_oneof![Just(ChannelKind::Bec), Just(ChannelKind::Bsc), Just(ChannelKind::Dc)]
}

fn codeword(rows: usize, cols: usize, seed: u64) -> Codeword {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..rows * cols).map(|_| if r.gen::<bool>() { 1 } else { -1 }).collect();
    Codeword::new(rows, cols, bits).unwrap()
}

proptest! {
    #[test]
    fn channel_output_shape_and_alphabet(
        k in kind(), pe in 0.0f64..=1.0, seed in any::<u64>(), rows in 1usize..8, cols in 1usize..20,
    ) {
        let c = codeword(rows, cols, seed ^ 1);
        let ch = ChannelConfig::new(k, pe, seed).unwrap();
        let out = apply(&c, &ch);
        prop_assert_eq!(out.shape(), c.shape());
        prop_assert_eq!(apply(&c, &ch), out.clone());
        match k {
            ChannelKind::Bec => {
                for (&x, &y) in c.bits().iter().zip(out.symbols()) {
                    prop_assert!(y == 0 || y == x);
                }
            }
            ChannelKind::Bsc => {
                prop_assert!(out.symbols().iter().all(|&y| y == 1 || y == -1));
            }
            ChannelKind::Dc => {
                // The kept symbols form an in-order subsequence, then zeros.
                let kept = out.retained();
                prop_assert!(out.symbols()[kept..].iter().all(|&y| y == 0));
                let mut it = c.bits().iter();
                for y in &out.symbols()[..kept] {
                    prop_assert!(it.any(|x| x == y));
                }
            }
        }
    }

    #[test]
    fn tokenizer_roundtrips_in_vocabulary_text(seed in 0u64..50, pick in 0usize..200) {
        let corpus = synth_corpus(seed, 60).unwrap();
        let sentences = corpus.sentences();
        let vocab = Vocabulary::build(&sentences, 300).unwrap();
        let s = &sentences[pick % sentences.len()];
        let ids = vocab.encode(s, 64).unwrap();
        prop_assert_eq!(ids.ids()[0], BOS);
        prop_assert_eq!(*ids.ids().last().unwrap(), EOS);
        prop_assert!(ids.ids().iter().all(|&i| i < vocab.len()));
        prop_assert_eq!(vocab.decode(ids.ids()).unwrap(), normalize(s));
    }

    #[test]
    fn normalization_is_idempotent(s in "[ -~]{0,40}") {
        let n = normalize(&s);
        prop_assert_eq!(normalize(&n), n.clone());
        prop_assert!(!n.contains("  ") && !n.starts_with(' ') && !n.ends_with(' '));
    }

    #[test]
    fn metric_ranges(
        a in prop::collection::vec(0u8..6, 0..15),
        b in prop::collection::vec(0u8..6, 1..15),
    ) {
        for smooth in [false, true] {
            let s = bleu(&a, &b, 4, smooth);
            prop_assert!((0.0..=1.0).contains(&s));
        }
        if b.len() >= 4 {
            prop_assert_eq!(bleu(&b, &b, 4, false), 1.0);
        }
        prop_assert!((0.0..=1.0).contains(&word_accuracy(&a, &b)));
        prop_assert!((unigram_f1(&a, &b) - unigram_f1(&b, &a)).abs() < 1e-12);
    }
}

/// Clipped precision by explicit enumeration of n-gram positions.
fn brute_precision(c: &[usize], r: &[usize], n: usize) -> (f64, f64) {
    if c.len() < n {
        return (0.0, 0.0);
    }
    let cand: Vec<&[usize]> = (0..=c.len() - n).map(|i| &c[i..i + n]).collect();
    let refs: Vec<&[usize]> = if r.len() >= n { (0..=r.len() - n).map(|i| &r[i..i + n]).collect() } else { vec![] };
    let mut matched = 0usize;
    for (i, g) in cand.iter().enumerate() {
        if cand[..i].contains(g) {
            continue;
        }
        let in_c = cand.iter().filter(|x| *x == g).count();
        let in_r = refs.iter().filter(|x| *x == g).count();
        matched += in_c.min(in_r);
    }
    (matched as f64, cand.len() as f64)
}

fn brute_bleu(c: &[usize], r: &[usize]) -> f64 {
    let mut prod = 1.0;
    for n in 1..=4 {
        let (m, t) = brute_precision(c, r, n);
        if m == 0.0 {
            return 0.0;
        }
        prod *= m / t;
    }
    let bp = if c.len() < r.len() { (1.0 - r.len() as f64 / c.len() as f64).exp() } else { 1.0 };
    bp * prod.powf(0.25)
}

#[test]
fn bleu_agrees_with_brute_force_counting() {
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    let mut nonzero = 0;
    for _ in 0..50 {
        let rlen = r.gen_range(4..14);
        let reference: Vec<usize> = (0..rlen).map(|_| r.gen_range(0..5)).collect();
        let mut cand = Vec::new();
        for &t in &reference {
            if r.gen::<f64>() < 0.1 {
                continue;
            }
            cand.push(if r.gen::<f64>() < 0.15 { r.gen_range(0..5) } else { t });
        }
        let lib = bleu(&cand, &reference, 4, false);
        let oracle = brute_bleu(&cand, &reference);
        assert!((lib - oracle).abs() < 1e-12, "{cand:?} vs {reference:?}: {lib} {oracle}");
        nonzero += usize::from(lib > 0.0);
    }
    assert!(nonzero > 10);
}

#[test]
fn uniform_model_perplexity_is_vocabulary_size() {
    for v in [2usize, 17, 512] {
        let mut g = Graph::new();
        let logits = g.input(Tensor::zeros(6, v));
        let targets = [1, 0, v - 1, 1 % v, PAD, PAD];
        let loss = g.cross_entropy(logits, &targets, PAD).unwrap();
        let ppl = perplexity(g.value(loss).get(0, 0));
        assert!((ppl - v as f64).abs() < 1e-9, "V={v}: {ppl}");
    }
}

#[test]
fn batches_cover_the_split_once_per_epoch() {
    let corpus = synth_corpus(3, 200).unwrap();
    let vocab = Vocabulary::build(&corpus.sentences(), 300).unwrap();
    let b = Batcher::new(&corpus, Split::Train, &vocab, 24, 32, 9).unwrap();
    for e in 0..3 {
        let mut seen: Vec<*const _> = b.epoch(e).flatten().map(|p| p as *const _).collect();
        assert_eq!(seen.len(), b.pairs.len());
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), b.pairs.len());
    }
    let order = |e| b.epoch(e).flatten().map(|p| p.src.clone()).collect::<Vec<_>>();
    assert_eq!(order(1), order(1));
    assert_ne!(order(1), order(2));
}
