//! The full network: EEG module, phoneme predictor, speech generator and
//! discriminators, each under its own parameter prefix.

use eegspeech_tensor::{ParamId, ParamStore, Scalar};
use serde::{Deserialize, Serialize};

use crate::eeg::{EegConfig, EegModule};
use crate::error::Result;
use crate::nn::Builder;
use crate::phoneme::{PhonemePredictor, PredictorConfig};
use crate::rng;
use crate::speech::{Discriminators, SpeechConfig, SpeechModule};

pub const EEG_PREFIX: &str = "eeg";
pub const PHONEME_PREFIX: &str = "phoneme";
pub const SPEECH_PREFIX: &str = "speech";
pub const DISC_PREFIX: &str = "disc";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub eeg: EegConfig,
    pub speech: SpeechConfig,
    pub predictor: PredictorConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.eeg.validate()?;
        self.speech.validate()?;
        self.predictor.validate()
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ModelConfig,
    pub eeg: EegModule,
    pub phoneme: PhonemePredictor,
    pub speech: SpeechModule,
    pub disc: Discriminators,
}

impl Model {
    /// Registers every parameter in `store`. Each module draws its
    /// initial values from its own stream, so adding or removing one module
    /// leaves the others unchanged.
    pub fn build<T: Scalar>(cfg: &ModelConfig, n_phonemes: usize, seed: u64, store: &mut ParamStore<T>) -> Result<Self> {
        cfg.validate()?;
        let mut r = rng::stream(seed, rng::tag::INIT, 0);
        let eeg = EegModule::new(&mut Builder::new(store, &mut r, EEG_PREFIX), &cfg.eeg)?;
        let d_e = cfg.eeg.d_e();
        let mut r = rng::stream(seed, rng::tag::INIT, 1);
        let phoneme = PhonemePredictor::new(&mut Builder::new(store, &mut r, PHONEME_PREFIX), &cfg.predictor, d_e, n_phonemes)?;
        let mut r = rng::stream(seed, rng::tag::INIT, 2);
        let speech = SpeechModule::new(&mut Builder::new(store, &mut r, SPEECH_PREFIX), &cfg.speech, d_e)?;
        let mut r = rng::stream(seed, rng::tag::INIT, 3);
        let disc = Discriminators::new(&mut Builder::new(store, &mut r, DISC_PREFIX), &cfg.speech.disc_periods);
        Ok(Self {
            cfg: cfg.clone(),
            eeg,
            phoneme,
            speech,
            disc,
        })
    }

    pub fn params<T: Scalar>(store: &ParamStore<T>, prefix: &str) -> Vec<ParamId> {
        store.ids_with_prefix(&format!("{prefix}."))
    }
}
