//! Checkpoint-level decoding and evaluation shared by the command line and
//! the end-to-end tests.

use eegspeech_tensor::Scalar;

use crate::corpus::{CorpusManifest, SplitName, TrialKey};
use crate::error::Result;
use crate::eval::{decode_all, DecodeOptions, DecodedTrial, EvalConfig, EvalReport};
use crate::trainer::{load_examples, restore_model, training_keys, Checkpoint, TrainConfig};

/// Trial keys of `split` under the held-out settings of `cfg`. The training
/// split honours the utterance cap.
pub fn split_keys(cfg: &TrainConfig, manifest: &CorpusManifest, split: SplitName) -> Result<Vec<TrialKey>> {
    if split == SplitName::Train {
        return training_keys(cfg, manifest);
    }
    let s = manifest.split(cfg.heldout_subjects, cfg.heldout_sentences, cfg.split_seed)?;
    Ok(s.get(split).iter().cloned().collect())
}

/// Decodes `splits` with the checkpointed model.
pub fn decode_splits<T: Scalar>(
    ck: &Checkpoint<T>,
    manifest: &CorpusManifest,
    splits: &[SplitName],
    temperature: f64,
    workers: usize,
) -> Result<Vec<(SplitName, Vec<DecodedTrial>)>> {
    let (model, store) = restore_model(ck, manifest.inventory.len())?;
    let opts = DecodeOptions {
        seed: ck.config.seed,
        temperature,
        with_phonemes: ck.config.enable_phoneme_predictor,
    };
    splits
        .iter()
        .map(|&name| {
            let keys = split_keys(&ck.config, manifest, name)?;
            let (prepared, examples) = load_examples::<T>(manifest, &keys)?;
            Ok((name, decode_all(&model, &store, &prepared, &examples, opts, workers)?))
        })
        .collect()
}

pub fn evaluate_checkpoint<T: Scalar>(
    ck: &Checkpoint<T>,
    manifest: &CorpusManifest,
    splits: &[SplitName],
    cfg: &EvalConfig,
    workers: usize,
) -> Result<EvalReport> {
    cfg.validate(manifest.inventory.decoder_vocab())?;
    let decoded = decode_splits(ck, manifest, splits, cfg.temperature, workers)?;
    EvalReport::build(
        &decoded,
        &manifest.inventory,
        cfg,
        ck.config.variant.as_str(),
        ck.config.seed,
        ck.config.enable_phoneme_predictor,
    )
}
