//! Batch experiment commands behind the `textjscc` binary: training, P_e
//! sweeps for the learned and classical schemes, single-sentence
//! transmission, corpus statistics and synthetic corpus generation.
//!
//! Every command writes its files only after the work succeeds, or removes
//! what it wrote when it fails.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::baseline::{Baseline, ConvCode, HuffmanCode, OverheadReport, SymbolStats};
use crate::channels::{ChannelConfig, ChannelKind};
use crate::config::{KeyValues, ModelConfig, TrainConfig};
use crate::data::{load_pairs, synth_corpus, Batcher, Corpus, Split};
use crate::error::{Error, Result};
use crate::metrics::{cosine, perplexity, EvalAccumulator, EvalReport};
use crate::model::{Checkpoint, JsccModel};
use crate::rng;
use crate::tokenizer::{TokenSequence, Vocabulary};
use crate::train::{diverging, EpochLog, Trainer};

pub const SWEEP_HEADER: &str = "scheme,channel,pe,bleu,ppl,similarity,unigram_f1,word_accuracy,n_samples";
pub const SCHEME_JSCC: &str = "jscc";
pub const SCHEME_BASELINE: &str = "huffman_conv";
/// Similarity above which a non-exact output counts as a semantic match.
pub const SEMANTIC_THRESHOLD: f64 = 0.9;

pub const VOCAB_FILE: &str = "vocab.txt";
pub const FINAL_CKPT: &str = "model.ckpt";
pub const BEST_CKPT: &str = "best.ckpt";
pub const TRAIN_LOG: &str = "train_log.csv";

/// Removes registered files on drop unless committed.
#[derive(Default)]
struct OutputGuard {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn track(&mut self, p: &Path) {
        if !self.paths.iter().any(|x| x == p) {
            self.paths.push(p.to_path_buf());
        }
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.paths {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let res = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    res
}

/// Model and training settings from one flat config file. Unknown keys are
/// rejected.
pub fn load_config(path: Option<&Path>) -> Result<(ModelConfig, TrainConfig)> {
    let mut model = ModelConfig::default();
    let mut train = TrainConfig::default();
    if let Some(p) = path {
        let kv = KeyValues::parse(&std::fs::read_to_string(p)?)?;
        let known_model = model.to_key_values();
        let known_train = train.to_key_values();
        if let Some(k) = kv
            .keys()
            .find(|k| known_model.get(k).is_none() && known_train.get(k).is_none())
        {
            return Err(Error::Config(format!("unknown config key {k:?}")));
        }
        // vocab_size follows the built vocabulary.
        model.apply(&kv)?;
        train.apply(&kv)?;
    }
    Ok((model, train))
}

/// A trained model with its vocabulary and the split it was trained on.
pub struct System {
    pub model: JsccModel,
    pub vocab: Vocabulary,
    pub train: TrainConfig,
}

impl System {
    /// Loads a checkpoint and the `vocab.txt` beside it.
    pub fn load(checkpoint: &Path) -> Result<Self> {
        let ckpt = Checkpoint::load(checkpoint)?;
        let vocab_path = checkpoint.with_file_name(VOCAB_FILE);
        let vocab = Vocabulary::load(&vocab_path)?;
        if vocab.len() != ckpt.model.config().vocab_size {
            return Err(Error::ConfigMismatch(format!(
                "{} holds {} tokens but the model expects {}",
                vocab_path.display(),
                vocab.len(),
                ckpt.model.config().vocab_size
            )));
        }
        let mut kv = KeyValues::default();
        for k in ckpt.meta.keys() {
            if let Some(stripped) = k.strip_prefix("train.") {
                kv.set(stripped, ckpt.meta.get(k).unwrap_or_default());
            }
        }
        let mut train = TrainConfig::default();
        train.apply(&kv)?;
        Ok(Self {
            model: ckpt.model,
            vocab,
            train,
        })
    }

    pub fn split_corpus(&self, corpus: &Corpus) -> Corpus {
        Corpus::with_split(
            corpus.pairs.clone(),
            self.train.seed,
            self.train.train_fraction,
            self.train.valid_fraction,
        )
    }

    pub fn encode(&self, text: &str) -> Result<TokenSequence> {
        self.vocab.encode(text, self.model.config().max_len)
    }

    /// Similarity of two token sequences under this model's encoder.
    pub fn similarity(&self, a: &TokenSequence, b: &TokenSequence) -> Result<f64> {
        Ok(cosine(&self.model.sentence_embedding(a)?, &self.model.sentence_embedding(b)?))
    }
}

// train --------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub log: Vec<EpochLog>,
    pub steps: u64,
    pub best_valid: f64,
    pub warnings: Vec<String>,
}

/// Trains on `corpus` and writes `vocab.txt`, `model.ckpt`, `best.ckpt` and
/// `train_log.csv` into `out_dir`. With `resume`, continues from that
/// checkpoint (and its vocabulary) until `train.epochs` epochs are done.
pub fn cmd_train(
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    train: &TrainConfig,
    out_dir: &Path,
    resume: Option<&Path>,
    progress: bool,
) -> Result<TrainSummary> {
    train.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut guard = OutputGuard::default();
    let corpus = Corpus::with_split(corpus.pairs.clone(), train.seed, train.train_fraction, train.valid_fraction);

    let (mut trainer, vocab, mut log) = match resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let vocab = Vocabulary::load(&path.with_file_name(VOCAB_FILE))?;
            let log = read_train_log(&out_dir.join(TRAIN_LOG)).unwrap_or_default();
            (Trainer::resume(ckpt, train.clone())?, vocab, log)
        }
        None => {
            let vocab = Vocabulary::build(&corpus.sentences(), train.vocab_target)?;
            let cfg = ModelConfig {
                vocab_size: vocab.len(),
                ..model_cfg.clone()
            };
            let model = JsccModel::new(cfg, rng::derive(train.seed, rng::label("init")))?;
            (Trainer::new(model, train.clone())?, vocab, Vec::new())
        }
    };
    let max_len = trainer.model.config().max_len;
    let shuffle_seed = rng::derive(train.seed, rng::label("shuffle"));
    let train_set = Batcher::new(&corpus, Split::Train, &vocab, max_len, train.batch_size, shuffle_seed)?;
    let valid_set = Batcher::new(&corpus, Split::Valid, &vocab, max_len, train.batch_size, shuffle_seed)?;
    if train_set.pairs.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }

    let mut warnings = Vec::new();
    let truncated = train_set.truncated + valid_set.truncated;
    if truncated > 0 {
        warnings.push(format!("{truncated} sequences truncated to {max_len} tokens"));
    }

    let vocab_path = out_dir.join(VOCAB_FILE);
    let final_path = out_dir.join(FINAL_CKPT);
    let best_path = out_dir.join(BEST_CKPT);
    let log_path = out_dir.join(TRAIN_LOG);
    for p in [&vocab_path, &final_path, &best_path, &log_path] {
        guard.track(p);
    }
    if resume.is_none() {
        vocab.save(&vocab_path)?;
    } else if resume.map(|r| r.with_file_name(VOCAB_FILE)) != Some(vocab_path.clone()) {
        vocab.save(&vocab_path)?;
    }

    let mut best = log.iter().map(|l| l.valid_loss).fold(f64::INFINITY, f64::min);
    while trainer.epoch < train.epochs {
        let train_loss = trainer.train_epoch(&train_set)?;
        let valid_loss = if valid_set.pairs.is_empty() {
            train_loss
        } else {
            trainer.evaluate(&valid_set)?
        };
        let entry = EpochLog {
            epoch: trainer.epoch,
            step: trainer.step(),
            train_loss,
            valid_loss,
        };
        if progress {
            eprintln!(
                "epoch {:>3}  step {:>6}  loss {:.4}  ppl {:.3}  valid {:.4}",
                entry.epoch,
                entry.step,
                train_loss,
                perplexity(train_loss),
                valid_loss
            );
        }
        log.push(entry);
        if log.len() == 3 && diverging(&log) {
            let w = "training loss did not decrease over the first 3 epochs".to_string();
            if progress {
                eprintln!("warning: {w}");
            }
            warnings.push(w);
        }
        if !train_loss.is_finite() {
            return Err(Error::Data(format!("training diverged: loss {train_loss}")));
        }
        let ckpt = trainer.checkpoint();
        if valid_loss < best {
            best = valid_loss;
            ckpt.save(&best_path)?;
        }
        ckpt.save(&final_path)?;
        write_atomic(&log_path, train_log_csv(&log).as_bytes())?;
    }
    if !final_path.exists() {
        trainer.checkpoint().save(&final_path)?;
        write_atomic(&log_path, train_log_csv(&log).as_bytes())?;
    }
    if !best_path.exists() {
        std::fs::copy(&final_path, &best_path)?;
    }
    guard.commit();
    Ok(TrainSummary {
        steps: trainer.step(),
        log,
        best_valid: best,
        warnings,
    })
}

pub fn train_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from(EpochLog::CSV_HEADER);
    s.push('\n');
    for l in log {
        s.push_str(&l.csv_row());
        s.push('\n');
    }
    s
}

fn read_train_log(path: &Path) -> Result<Vec<EpochLog>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse {
            line: n + 1,
            msg: "malformed training log row".into(),
        };
        if f.len() != 6 {
            return Err(bad());
        }
        out.push(EpochLog {
            epoch: f[0].parse().map_err(|_| bad())?,
            step: f[1].parse().map_err(|_| bad())?,
            train_loss: f[2].parse().map_err(|_| bad())?,
            valid_loss: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

// sweep --------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub channels: Vec<ChannelKind>,
    pub grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Report add-one smoothed BLEU in the `bleu` column.
    pub smooth_bleu: bool,
}

impl SweepSpec {
    pub fn new(channels: Vec<ChannelKind>, grid: Vec<f64>, samples: usize, seed: u64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Config("sweep needs at least one channel".into()));
        }
        if grid.is_empty() || grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("P_e grid values must lie in [0, 1]".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("P_e grid must be strictly increasing".into()));
        }
        if samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        Ok(Self {
            channels,
            grid,
            samples,
            seed,
            smooth_bleu: false,
        })
    }

    pub fn smoothed(self, smooth_bleu: bool) -> Self {
        Self { smooth_bleu, ..self }
    }

    fn column(&self, report: EvalReport) -> EvalReport {
        if self.smooth_bleu {
            report.with_smoothed_bleu()
        } else {
            report
        }
    }

    /// `0, 0.05, …, 0.5`.
    pub fn default_grid() -> Vec<f64> {
        (0..=10).map(|i| i as f64 * 0.05).collect()
    }

    /// Seed for one sweep point, a hash of `(seed, channel, P_e)`.
    pub fn point_seed(&self, kind: ChannelKind, pe: f64) -> u64 {
        rng::derive(rng::derive(self.seed, rng::label(kind.as_str())), pe.to_bits())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scheme: &'static str,
    pub channel: ChannelKind,
    pub pe: f64,
    pub report: EvalReport,
}

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.scheme, self.channel, self.pe, self.report.csv_fields())
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// The first `n` held-out source sentences.
pub fn held_out_sources(corpus: &Corpus, n: usize) -> Vec<String> {
    corpus
        .split_pairs(Split::Test)
        .take(n)
        .map(|p| p.source.clone())
        .collect()
}

/// Transmits every sentence through the learned system at one sweep point.
pub fn evaluate_jscc(system: &System, sentences: &[String], channel: &ChannelConfig) -> Result<EvalReport> {
    let items: Vec<(String, String, f64, f64)> = sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let ch = channel.with_seed(rng::derive(channel.seed, i as u64));
            let src = system.encode(s)?;
            let reference = system.vocab.decode(src.ids())?;
            let out = system.model.transmit(&src, &ch)?;
            let text = system.vocab.decode(out.ids())?;
            let sim = system.similarity(&src, &out)?;
            let loss = system.model.forward_teacher_forced(&src, &src, &ch)?;
            Ok((reference, text, sim, loss))
        })
        .collect::<Result<_>>()?;
    let mut acc = EvalAccumulator::default();
    let mut loss = 0.0;
    for (r, t, sim, l) in &items {
        acc.add(r, t, *sim);
        loss += l;
    }
    Ok(acc.finish(perplexity(loss / items.len().max(1) as f64)))
}

/// Runs the learned system over the sweep grid; rows ordered by channel
/// then P_e.
pub fn run_sweep(system: &System, sentences: &[String], spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &kind in &spec.channels {
        for &pe in &spec.grid {
            let ch = ChannelConfig::new(kind, pe, spec.point_seed(kind, pe))?;
            rows.push(SweepRow {
                scheme: SCHEME_JSCC,
                channel: kind,
                pe,
                report: spec.column(evaluate_jscc(system, sentences, &ch)?),
            });
        }
    }
    Ok(rows)
}

/// Sweep from a checkpoint over the held-out split of `corpus`; writes the
/// CSV to `out` and a gnuplot script beside it.
pub fn cmd_sweep(checkpoint: &Path, corpus: &Corpus, spec: &SweepSpec, out: &Path) -> Result<Vec<SweepRow>> {
    let system = System::load(checkpoint)?;
    let corpus = system.split_corpus(corpus);
    let sentences = held_out_sources(&corpus, spec.samples);
    if sentences.is_empty() {
        return Err(Error::Data("held-out split is empty".into()));
    }
    let rows = run_sweep(&system, &sentences, spec)?;
    write_sweep_outputs(&rows, out)?;
    Ok(rows)
}

fn write_sweep_outputs(rows: &[SweepRow], out: &Path) -> Result<()> {
    let mut guard = OutputGuard::default();
    let script = out.with_extension("gp");
    guard.track(out);
    guard.track(&script);
    write_atomic(out, sweep_csv(rows).as_bytes())?;
    write_atomic(&script, plot_script(out, rows).as_bytes())?;
    guard.commit();
    Ok(())
}

/// gnuplot script drawing similarity and BLEU against P_e, one curve per
/// (scheme, channel).
pub fn plot_script(csv: &Path, rows: &[SweepRow]) -> String {
    let file = csv.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = csv.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut curves: Vec<(&str, ChannelKind)> = Vec::new();
    for r in rows {
        if !curves.contains(&(r.scheme, r.channel)) {
            curves.push((r.scheme, r.channel));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 800,500");
    let _ = writeln!(s, "set xlabel 'P_e'");
    let _ = writeln!(s, "set key outside right");
    for (col, name) in [(6, "similarity"), (4, "bleu")] {
        let _ = writeln!(s, "set output '{stem}_{name}.png'");
        let _ = writeln!(s, "set ylabel '{name}'");
        let plots: Vec<String> = curves
            .iter()
            .map(|(scheme, ch)| {
                format!(
                    "'{file}' every ::1 using 3:((strcol(1) eq '{scheme}' && strcol(2) eq '{ch}') ? ${col} : 1/0) \
                     with linespoints title '{scheme} {ch}'"
                )
            })
            .collect();
        let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    }
    s
}

// baseline -----------------------------------------------------------------

/// Classical chain fitted to the training split's letter statistics.
pub fn fit_baseline(corpus: &Corpus) -> Result<Baseline> {
    let text: Vec<&str> = corpus
        .split_pairs(Split::Train)
        .flat_map(|p| [p.source.as_str(), p.target.as_str()])
        .collect();
    let stats = SymbolStats::estimate(&text, None)?;
    Baseline::new(&stats, ConvCode::k3())
}

pub fn evaluate_baseline(
    baseline: &Baseline,
    sentences: &[String],
    channel: &ChannelConfig,
    system: Option<&System>,
) -> Result<EvalReport> {
    let items: Vec<(String, f64)> = sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let ch = channel.with_seed(rng::derive(channel.seed, i as u64));
            let out = baseline.transmit(s, &ch)?.text;
            let sim = match system {
                Some(sys) => sys.similarity(&sys.encode(s)?, &sys.encode(&out)?)?,
                None => f64::NAN,
            };
            Ok((out, sim))
        })
        .collect::<Result<_>>()?;
    let mut acc = EvalAccumulator::default();
    for (s, (out, sim)) in sentences.iter().zip(&items) {
        acc.add(s, out, *sim);
    }
    Ok(acc.finish(f64::NAN))
}

pub fn run_baseline_sweep(
    baseline: &Baseline,
    sentences: &[String],
    spec: &SweepSpec,
    system: Option<&System>,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &kind in &spec.channels {
        for &pe in &spec.grid {
            let ch = ChannelConfig::new(kind, pe, spec.point_seed(kind, pe))?;
            rows.push(SweepRow {
                scheme: SCHEME_BASELINE,
                channel: kind,
                pe,
                report: spec.column(evaluate_baseline(baseline, sentences, &ch, system)?),
            });
        }
    }
    Ok(rows)
}

/// Baseline sweep over the held-out split. The split follows `split_seed`
/// (the training seed) so both schemes see the same sentences; with a
/// checkpoint, similarity uses that model's encoder.
pub fn cmd_baseline(
    corpus: &Corpus,
    spec: &SweepSpec,
    checkpoint: Option<&Path>,
    split: &TrainConfig,
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let system = checkpoint.map(System::load).transpose()?;
    let corpus = match &system {
        Some(s) => s.split_corpus(corpus),
        None => Corpus::with_split(corpus.pairs.clone(), split.seed, split.train_fraction, split.valid_fraction),
    };
    let baseline = fit_baseline(&corpus)?;
    let sentences = held_out_sources(&corpus, spec.samples);
    if sentences.is_empty() {
        return Err(Error::Data("held-out split is empty".into()));
    }
    let rows = run_baseline_sweep(&baseline, &sentences, spec, system.as_ref())?;
    write_sweep_outputs(&rows, out)?;
    Ok(rows)
}

// transmit -----------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchFlag {
    Exact,
    Semantic,
    Fail,
}

impl MatchFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchFlag::Exact => "exact",
            MatchFlag::Semantic => "semantic",
            MatchFlag::Fail => "fail",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmitLine {
    pub channel: ChannelKind,
    pub output: String,
    pub similarity: f64,
    pub flag: MatchFlag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmitReport {
    pub source: String,
    pub pe: f64,
    pub lines: Vec<TransmitLine>,
}

impl std::fmt::Display for TransmitReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "source:  {}", self.source)?;
        for l in &self.lines {
            writeln!(
                f,
                "{} P_e={}:  {}  [{}, sim {:.3}]",
                l.channel.as_str().to_uppercase(),
                self.pe,
                l.output,
                l.flag.as_str(),
                l.similarity
            )?;
        }
        Ok(())
    }
}

pub fn transmit_sentence(system: &System, sentence: &str, pe: f64, seed: u64) -> Result<TransmitReport> {
    let src = system.encode(sentence)?;
    let source = system.vocab.decode(src.ids())?;
    let mut lines = Vec::new();
    for kind in ChannelKind::ALL {
        let ch = ChannelConfig::new(kind, pe, rng::derive(seed, rng::label(kind.as_str())))?;
        let out = system.model.transmit(&src, &ch)?;
        let output = system.vocab.decode(out.ids())?;
        let similarity = system.similarity(&src, &out)?;
        let flag = if output == source {
            MatchFlag::Exact
        } else if similarity > SEMANTIC_THRESHOLD {
            MatchFlag::Semantic
        } else {
            MatchFlag::Fail
        };
        lines.push(TransmitLine {
            channel: kind,
            output,
            similarity,
            flag,
        });
    }
    Ok(TransmitReport { source, pe, lines })
}

pub fn cmd_transmit(checkpoint: &Path, sentence: &str, pe: f64, seed: u64) -> Result<TransmitReport> {
    let system = System::load(checkpoint)?;
    transmit_sentence(&system, sentence, pe, seed)
}

// stats / synth ------------------------------------------------------------

/// Overhead report for `corpus` (sources and targets); `L̄` is measured with
/// a vocabulary of `vocab_target` tokens trained on the same text.
pub fn corpus_report(corpus: &Corpus, vocab_target: usize) -> Result<OverheadReport> {
    let text = corpus.sentences();
    let vocab = Vocabulary::build(&text, vocab_target)?;
    let stats = SymbolStats::estimate(&text, Some(&vocab))?;
    let code = HuffmanCode::build(&stats)?;
    Ok(OverheadReport::new(&stats, &code, ConvCode::RATE))
}

pub fn cmd_stats(corpus: &Corpus, vocab_target: usize, out: Option<&Path>) -> Result<OverheadReport> {
    let report = corpus_report(corpus, vocab_target)?;
    if let Some(out) = out {
        let csv = format!("{}\n{}\n", OverheadReport::CSV_HEADER, report.csv_row());
        write_atomic(out, csv.as_bytes())?;
    }
    Ok(report)
}

pub fn cmd_synth(seed: u64, size: usize, out: &Path) -> Result<Corpus> {
    let corpus = synth_corpus(seed, size)?;
    let mut buf = Vec::new();
    corpus.write_tsv(&mut buf)?;
    write_atomic(out, &buf)?;
    Ok(corpus)
}

/// Loads a TSV corpus, or generates a synthetic one when no path is given.
pub fn corpus_or_synth(path: Option<&Path>, seed: u64, size: usize) -> Result<Corpus> {
    match path {
        Some(p) => load_pairs(p),
        None => synth_corpus(seed, size),
    }
}
