use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialKey {
    pub subject: String,
    pub sentence: String,
}

impl TrialKey {
    pub fn new(subject: impl Into<String>, sentence: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            sentence: sentence.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    UnseenSpeech,
    UnseenSubject,
    UnseenBoth,
}

impl SplitName {
    pub const TEST: [SplitName; 3] = [
        SplitName::UnseenSpeech,
        SplitName::UnseenSubject,
        SplitName::UnseenBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::UnseenSpeech => "unseen_speech",
            SplitName::UnseenSubject => "unseen_subject",
            SplitName::UnseenBoth => "unseen_both",
        }
    }

    pub fn parse(s: &str) -> Option<SplitName> {
        [
            SplitName::Train,
            SplitName::UnseenSpeech,
            SplitName::UnseenSubject,
            SplitName::UnseenBoth,
        ]
        .into_iter()
        .find(|n| n.as_str() == s)
    }
}

/// Four-way partition of the subject x sentence grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub heldout_subjects: BTreeSet<String>,
    pub heldout_sentences: BTreeSet<String>,
    pub train: BTreeSet<TrialKey>,
    pub unseen_speech: BTreeSet<TrialKey>,
    pub unseen_subject: BTreeSet<TrialKey>,
    pub unseen_both: BTreeSet<TrialKey>,
}

impl SplitAssignment {
    pub fn get(&self, name: SplitName) -> &BTreeSet<TrialKey> {
        match name {
            SplitName::Train => &self.train,
            SplitName::UnseenSpeech => &self.unseen_speech,
            SplitName::UnseenSubject => &self.unseen_subject,
            SplitName::UnseenBoth => &self.unseen_both,
        }
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.unseen_speech.len() + self.unseen_subject.len() + self.unseen_both.len()
    }
}

/// Holds out `n_subjects` subjects and `n_sentences` sentences, chosen
/// uniformly without replacement under `seed`.
pub fn split_grid(
    subjects: &[String],
    sentences: &[String],
    n_subjects: usize,
    n_sentences: usize,
    seed: u64,
) -> Result<SplitAssignment> {
    if n_subjects >= subjects.len() {
        return Err(config(format!(
            "cannot hold out {n_subjects} of {} subjects",
            subjects.len()
        )));
    }
    if n_sentences >= sentences.len() {
        return Err(config(format!(
            "cannot hold out {n_sentences} of {} sentences",
            sentences.len()
        )));
    }
    let pick = |items: &[String], n: usize, idx: u64| -> BTreeSet<String> {
        let mut v = items.to_vec();
        v.sort();
        v.shuffle(&mut rng::stream(seed, rng::tag::SPLIT, idx));
        v.into_iter().take(n).collect()
    };
    let hs = pick(subjects, n_subjects, 0);
    let hz = pick(sentences, n_sentences, 1);
    let mut out = SplitAssignment {
        heldout_subjects: hs,
        heldout_sentences: hz,
        train: BTreeSet::new(),
        unseen_speech: BTreeSet::new(),
        unseen_subject: BTreeSet::new(),
        unseen_both: BTreeSet::new(),
    };
    for s in subjects {
        for z in sentences {
            let key = TrialKey::new(s.clone(), z.clone());
            let set = match (
                out.heldout_subjects.contains(s),
                out.heldout_sentences.contains(z),
            ) {
                (false, false) => &mut out.train,
                (false, true) => &mut out.unseen_speech,
                (true, false) => &mut out.unseen_subject,
                (true, true) => &mut out.unseen_both,
            };
            set.insert(key);
        }
    }
    Ok(out)
}
