//! End-to-end harness behaviour on a tiny model: output files, determinism,
//! resume and error handling.

use std::path::Path;

use textjscc::channels::ChannelKind;
use textjscc::config::{ModelConfig, TrainConfig};
use textjscc::data::{load_pairs, synth_corpus};
use textjscc::harness::{self, SweepSpec, BEST_CKPT, FINAL_CKPT, SWEEP_HEADER, TRAIN_LOG, VOCAB_FILE};
use textjscc::Error;

const TINY: &str = "\
# tiny model for fast tests
n_emb = 16
n_heads = 2
n_attn = 8
m_enc = 1
m_dec = 1
q_bits = 4
max_len = 24
ffn_dim = 24
epochs = 2
batch_size = 8
vocab_target = 120
";

fn tiny(dir: &Path) -> (ModelConfig, TrainConfig) {
    let p = dir.join("tiny.cfg");
    std::fs::write(&p, TINY).unwrap();
    harness::load_config(Some(&p)).unwrap()
}

fn spec() -> SweepSpec {
    SweepSpec::new(vec![ChannelKind::Bec, ChannelKind::Dc], vec![0.0, 0.3], 6, 11).unwrap()
}

#[test]
fn train_writes_outputs_and_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = tiny(dir.path());
    let corpus = synth_corpus(4, 80).unwrap();
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let summary = harness::cmd_train(&corpus, &m, &t, &out, None, false).unwrap();
        assert_eq!(summary.log.len(), 2);
        for f in [VOCAB_FILE, FINAL_CKPT, BEST_CKPT, TRAIN_LOG] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        let csv = out.join("sweep.csv");
        let rows = harness::cmd_sweep(&out.join(FINAL_CKPT), &corpus, &spec(), &csv).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(csv.with_extension("gp").exists());
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with(SWEEP_HEADER));
        csvs.push((text, std::fs::read(out.join(TRAIN_LOG)).unwrap()));
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = tiny(dir.path());
    let corpus = synth_corpus(5, 60).unwrap();
    let three = TrainConfig { epochs: 3, ..t.clone() };

    let full = dir.path().join("full");
    harness::cmd_train(&corpus, &m, &three, &full, None, false).unwrap();

    let part = dir.path().join("part");
    harness::cmd_train(&corpus, &m, &t, &part, None, false).unwrap();
    let resumed = harness::cmd_train(&corpus, &m, &three, &part, Some(&part.join(FINAL_CKPT)), false).unwrap();
    assert_eq!(resumed.log.len(), 3);

    let a = harness::System::load(&full.join(FINAL_CKPT)).unwrap();
    let b = harness::System::load(&part.join(FINAL_CKPT)).unwrap();
    for ((na, ta), (nb, tb)) in a.model.params().iter().zip(b.model.params().iter()) {
        assert_eq!(na, nb);
        assert_eq!(ta, tb, "{na} differs after resume");
    }
    assert_eq!(
        std::fs::read(full.join(TRAIN_LOG)).unwrap(),
        std::fs::read(part.join(TRAIN_LOG)).unwrap()
    );
}

#[test]
fn failed_sweep_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join(FINAL_CKPT);
    std::fs::write(&bogus, b"not a checkpoint").unwrap();
    std::fs::write(dir.path().join(VOCAB_FILE), b"").unwrap();
    let csv = dir.path().join("sweep.csv");
    let corpus = synth_corpus(1, 40).unwrap();
    assert!(harness::cmd_sweep(&bogus, &corpus, &spec(), &csv).is_err());
    assert!(!csv.exists());
    assert!(!csv.with_extension("gp").exists());
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "n_emb = 64\nlearning_rate = 0.1\n").unwrap();
    assert!(matches!(harness::load_config(Some(&p)), Err(Error::Config(_))));
    std::fs::write(&p, "n_emb = 63\n").unwrap();
    assert!(harness::load_config(Some(&p)).is_err());
    assert!(SweepSpec::new(vec![ChannelKind::Bsc], vec![0.2, 0.1], 1, 0).is_err());
    assert!(SweepSpec::new(vec![ChannelKind::Bsc], vec![0.1], 0, 0).is_err());
    assert!(SweepSpec::new(vec![ChannelKind::Bsc], vec![1.5], 1, 0).is_err());
    assert_eq!(SweepSpec::default_grid().len(), 11);
}

#[test]
fn transmit_reports_every_channel() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = tiny(dir.path());
    let corpus = synth_corpus(6, 50).unwrap();
    let out = dir.path().join("run");
    harness::cmd_train(&corpus, &m, &TrainConfig { epochs: 1, ..t }, &out, None, false).unwrap();
    let report = harness::cmd_transmit(&out.join(FINAL_CKPT), "a dog is in the park", 0.1, 3).unwrap();
    assert_eq!(report.lines.len(), 3);
    assert_eq!(report.source, "a dog is in the park");
    let text = report.to_string();
    for k in ["BEC", "BSC", "DC"] {
        assert!(text.contains(&format!("{k} P_e=0.1")));
    }
    assert!(report.lines.iter().all(|l| (-1.0..=1.0).contains(&l.similarity)));
}

#[test]
fn baseline_sweep_rows_and_stats_csv() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(7, 200).unwrap();
    let csv = dir.path().join("baseline.csv");
    let spec = SweepSpec::new(vec![ChannelKind::Bsc], vec![0.0, 0.5], 10, 1).unwrap();
    let rows = harness::cmd_baseline(&corpus, &spec, None, &TrainConfig::default(), &csv).unwrap();
    assert_eq!(rows[0].report.bleu, 1.0);
    assert!(rows[1].report.word_accuracy < 0.5);
    assert!(rows.iter().all(|r| r.report.ppl.is_nan() && r.report.similarity.is_nan()));
    let smoothed = harness::cmd_baseline(&corpus, &spec.clone().smoothed(true), None, &TrainConfig::default(), &csv).unwrap();
    for (a, b) in rows.iter().zip(&smoothed) {
        assert_eq!(b.report.bleu, a.report.bleu_smoothed);
        assert!(b.report.bleu >= a.report.bleu);
    }

    let stats = dir.path().join("stats.csv");
    let report = harness::cmd_stats(&corpus, 300, Some(&stats)).unwrap();
    let text = std::fs::read_to_string(&stats).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().ends_with(",4.059,4.093,4.588,60"));
    assert!(report.h > 3.5 && report.h < 4.5);
}

#[test]
fn synth_file_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pairs.tsv");
    let written = harness::cmd_synth(9, 120, &p).unwrap();
    let read = load_pairs(&p).unwrap();
    assert_eq!(written.pairs, read.pairs);
    assert_eq!(written.len(), 120);
}
