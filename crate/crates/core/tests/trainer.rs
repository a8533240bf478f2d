mod common;

use std::fs;
use std::path::Path;

use common::{tiny_corpus, tiny_train_config};
use eegspeech_core::error::Error;
use eegspeech_core::model::{Model, EEG_PREFIX, PHONEME_PREFIX, SPEECH_PREFIX};
use eegspeech_core::trainer::{
    checkpoint_name, load_examples, train, training_keys, Checkpoint, StepMetrics, Trainer, METRICS_FILE,
};
use eegspeech_core::corpus::CorpusManifest;

fn trainer(m: &CorpusManifest, iterations: u64) -> Trainer<f64> {
    let cfg = tiny_train_config(m.config.n_channels, iterations);
    let keys = training_keys(&cfg, m).unwrap();
    let (_, ex) = load_examples(m, &keys).unwrap();
    Trainer::new(cfg, m.inventory.len(), ex).unwrap()
}

fn metrics(dir: &Path) -> String {
    fs::read_to_string(dir.join(METRICS_FILE)).unwrap()
}

#[test]
fn one_iteration_gives_one_metrics_row() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 1);
    let cfg = tiny_train_config(m.config.n_channels, 1);
    let out = tmp.path().join("run");
    let outcome = train::<f64>(&cfg, &m, &out, None, |_| {}).unwrap();
    assert_eq!(outcome.metrics.len(), 1);
    let text = metrics(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], StepMetrics::csv_header(true));
    assert!(lines[1].starts_with("1,"));
    assert!(outcome.final_checkpoint.ends_with(checkpoint_name(1)));
}

#[test]
fn seeded_runs_write_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 2);
    let cfg = tiny_train_config(m.config.n_channels, 3);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    train::<f64>(&cfg, &m, &a, None, |_| {}).unwrap();
    train::<f64>(&cfg, &m, &b, None, |_| {}).unwrap();
    assert_eq!(metrics(&a), metrics(&b));
    let ca = fs::read(a.join(checkpoint_name(3))).unwrap();
    let cb = fs::read(b.join(checkpoint_name(3))).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn speech_losses_leave_the_eeg_module_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 3);
    let mut t = trainer(&m, 3);
    t.step().unwrap();
    for ex in 0..t.examples.len() {
        let grads = t.speech_gradients(ex).unwrap();
        let eeg_max = Model::params(&t.store, EEG_PREFIX)
            .iter()
            .map(|&id| grads.param(id).map_or(0.0, |g| g.max_abs()))
            .fold(0.0, f64::max);
        assert_eq!(eeg_max, 0.0);
        let speech_max = Model::params(&t.store, SPEECH_PREFIX)
            .iter()
            .map(|&id| grads.param(id).map_or(0.0, |g| g.max_abs()))
            .fold(0.0, f64::max);
        assert!(speech_max > 0.0);
    }
}

#[test]
fn resumed_run_matches_the_uninterrupted_one() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 4);
    let mut cfg = tiny_train_config(m.config.n_channels, 5);
    cfg.checkpoint_every = 2;
    let full = tmp.path().join("full");
    let reference = train::<f64>(&cfg, &m, &full, None, |_| {}).unwrap().metrics;

    let part = tmp.path().join("part");
    let mut short = cfg.clone();
    short.iterations = 2;
    train::<f64>(&short, &m, &part, None, |_| {}).unwrap();
    let resumed = train::<f64>(&cfg, &m, &part, Some(&part.join(checkpoint_name(2))), |_| {})
        .unwrap()
        .metrics;
    assert_eq!(resumed.len(), 3);
    for (a, b) in resumed.iter().zip(&reference[2..]) {
        assert_eq!(a.iteration, b.iteration);
        let pairs = [
            (a.l_eeg, b.l_eeg),
            (a.l_ctc.unwrap(), b.l_ctc.unwrap()),
            (a.l_ce.unwrap(), b.l_ce.unwrap()),
            (a.l_mel, b.l_mel),
            (a.l_kl, b.l_kl),
            (a.l_adv_g, b.l_adv_g),
            (a.l_fm, b.l_fm),
            (a.l_disc, b.l_disc),
        ];
        for (x, y) in pairs {
            assert!((x - y).abs() <= 1e-6, "iteration {}: {x} vs {y}", a.iteration);
        }
    }
    assert_eq!(metrics(&part), metrics(&full));
}

#[test]
fn resume_rejects_a_changed_config() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 5);
    let cfg = tiny_train_config(m.config.n_channels, 1);
    let out = tmp.path().join("run");
    train::<f64>(&cfg, &m, &out, None, |_| {}).unwrap();
    let mut other = cfg.clone();
    other.iterations = 2;
    other.lr = 1e-3;
    let err = train::<f64>(&other, &m, &out, Some(&out.join(checkpoint_name(1))), |_| {});
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 6);
    let mut t = trainer(&m, 2);
    t.step().unwrap();
    t.step().unwrap();
    let ck = t.checkpoint();
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::<f64>::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes().unwrap(), bytes);
    assert_eq!(back.iteration, 2);
    let restored = Trainer::from_checkpoint(&back, m.inventory.len(), t.examples.clone()).unwrap();
    for id in t.store.ids() {
        let a: Vec<u64> = t.store.get(id).data().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = restored.store.get(id).data().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b, "{}", t.store.name(id));
    }
    let mut corrupt = bytes.clone();
    corrupt[0] ^= 0xff;
    assert!(Checkpoint::<f64>::from_bytes(&corrupt).is_err());
    assert!(Checkpoint::<f64>::from_bytes(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn disabled_predictor_has_no_phoneme_terms_or_updates() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 7);
    let mut cfg = tiny_train_config(m.config.n_channels, 2);
    cfg.enable_phoneme_predictor = false;
    cfg.alpha = 0.0;
    let keys = training_keys(&cfg, &m).unwrap();
    let (_, ex) = load_examples::<f64>(&m, &keys).unwrap();
    let mut t = Trainer::new(cfg.clone(), m.inventory.len(), ex).unwrap();
    let before: Vec<_> = Model::params(&t.store, PHONEME_PREFIX)
        .iter()
        .map(|&id| t.store.get(id).clone())
        .collect();
    assert!(!before.is_empty());
    for _ in 0..2 {
        let s = t.step().unwrap();
        assert!(s.l_ctc.is_none() && s.l_ce.is_none());
        assert!(!s.csv_row().contains("NaN"));
    }
    let after: Vec<_> = Model::params(&t.store, PHONEME_PREFIX)
        .iter()
        .map(|&id| t.store.get(id).clone())
        .collect();
    assert_eq!(before, after);

    let out = tmp.path().join("run");
    train::<f64>(&cfg, &m, &out, None, |_| {}).unwrap();
    let header = metrics(&out).lines().next().unwrap().to_string();
    assert!(!header.contains("l_ctc") && !header.contains("l_ce"));
    assert!(header.contains("l_mel"));
}

#[test]
fn speech_trajectory_ignores_the_idle_predictor() {
    // Same seed, predictor off: the speech terms must not depend on whether
    // the predictor's loss weight is zero or the predictor is disabled.
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 8);
    let run = |alpha: f64| {
        let mut cfg = tiny_train_config(m.config.n_channels, 2);
        cfg.enable_phoneme_predictor = false;
        cfg.alpha = alpha;
        let keys = training_keys(&cfg, &m).unwrap();
        let (_, ex) = load_examples::<f64>(&m, &keys).unwrap();
        let mut t = Trainer::new(cfg, m.inventory.len(), ex).unwrap();
        (0..2).map(|_| t.step().unwrap().csv_row()).collect::<Vec<_>>()
    };
    assert_eq!(run(0.0), run(0.7));
}

#[test]
fn empty_training_set_is_a_config_error() {
    let cfg = tiny_train_config(4, 1);
    assert!(matches!(Trainer::<f64>::new(cfg, 39, vec![]), Err(Error::Config(_))));
}

#[test]
fn batches_cover_every_example_once_per_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tiny_corpus(&tmp.path().join("corpus"), 9);
    let t = trainer(&m, 1);
    let n = t.examples.len();
    for pass in 0..3u64 {
        let mut seen: Vec<usize> = (1..=n as u64).flat_map(|i| t.batch_indices(pass * n as u64 + i)).collect();
        seen.sort();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }
}
