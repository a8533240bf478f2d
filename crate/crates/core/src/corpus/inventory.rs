use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{data, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhonemeClass {
    Consonant,
    Vowel,
}

/// Articulatory attributes; consonant fields and vowel fields are exclusive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attributes {
    pub class: PhonemeClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manner: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voicing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tenseness: Option<String>,
}

pub const MANNERS: [&str; 5] = ["plosive", "fricative", "affricate", "nasal", "approximant"];
pub const PLACES: [&str; 6] = ["labial", "dental", "alveolar", "postalveolar", "velar", "glottal"];
pub const VOICINGS: [&str; 2] = ["voiced", "voiceless"];
pub const POSITIONS: [&str; 3] = ["front", "central", "back"];
pub const HEIGHTS: [&str; 3] = ["close", "mid", "open"];
pub const TENSENESS: [&str; 2] = ["tense", "lax"];

/// Grouping axes used by the phoneme-group analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupAxis {
    Manner,
    Place,
    Voicing,
    Position,
    Height,
    Tenseness,
}

impl GroupAxis {
    pub const ALL: [GroupAxis; 6] = [
        GroupAxis::Manner,
        GroupAxis::Place,
        GroupAxis::Voicing,
        GroupAxis::Position,
        GroupAxis::Height,
        GroupAxis::Tenseness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupAxis::Manner => "manner",
            GroupAxis::Place => "place",
            GroupAxis::Voicing => "voicing",
            GroupAxis::Position => "position",
            GroupAxis::Height => "height",
            GroupAxis::Tenseness => "tenseness",
        }
    }

    pub fn class(self) -> PhonemeClass {
        match self {
            GroupAxis::Manner | GroupAxis::Place | GroupAxis::Voicing => PhonemeClass::Consonant,
            _ => PhonemeClass::Vowel,
        }
    }
}

impl Attributes {
    fn consonant(manner: &str, place: &str, voicing: &str) -> Self {
        Self {
            class: PhonemeClass::Consonant,
            manner: Some(manner.into()),
            place: Some(place.into()),
            voicing: Some(voicing.into()),
            position: None,
            height: None,
            tenseness: None,
        }
    }

    fn vowel(position: &str, height: &str, tenseness: &str) -> Self {
        Self {
            class: PhonemeClass::Vowel,
            manner: None,
            place: None,
            voicing: None,
            position: Some(position.into()),
            height: Some(height.into()),
            tenseness: Some(tenseness.into()),
        }
    }

    pub fn group(&self, axis: GroupAxis) -> Option<&str> {
        match axis {
            GroupAxis::Manner => self.manner.as_deref(),
            GroupAxis::Place => self.place.as_deref(),
            GroupAxis::Voicing => self.voicing.as_deref(),
            GroupAxis::Position => self.position.as_deref(),
            GroupAxis::Height => self.height.as_deref(),
            GroupAxis::Tenseness => self.tenseness.as_deref(),
        }
    }

    /// Checks the value sets allowed for each class.
    pub fn validate(&self, symbol: &str) -> Result<()> {
        let check = |v: &Option<String>, allowed: &[&str], what: &str| -> Result<()> {
            match v.as_deref() {
                Some(x) if allowed.contains(&x) => Ok(()),
                other => Err(data(format!("phoneme {symbol}: invalid {what} {other:?}"))),
            }
        };
        let absent = |v: &Option<String>, what: &str| -> Result<()> {
            if v.is_some() {
                Err(data(format!("phoneme {symbol}: unexpected {what}")))
            } else {
                Ok(())
            }
        };
        match self.class {
            PhonemeClass::Consonant => {
                check(&self.manner, &MANNERS, "manner")?;
                check(&self.place, &PLACES, "place")?;
                check(&self.voicing, &VOICINGS, "voicing")?;
                absent(&self.position, "position")?;
                absent(&self.height, "height")?;
                absent(&self.tenseness, "tenseness")
            }
            PhonemeClass::Vowel => {
                check(&self.position, &POSITIONS, "position")?;
                check(&self.height, &HEIGHTS, "height")?;
                check(&self.tenseness, &TENSENESS, "tenseness")?;
                absent(&self.manner, "manner")?;
                absent(&self.place, "place")?;
                absent(&self.voicing, "voicing")
            }
        }
    }
}

/// Phoneme symbol table. Ids: blank is 0, `symbols[i]` is `i + 1`, BOS is
/// `symbols.len() + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhonemeInventory {
    pub symbols: Vec<String>,
    pub blank_id: usize,
    pub bos_id: usize,
    pub attributes: BTreeMap<String, Attributes>,
}

pub const BLANK: &str = "<blank>";
pub const BOS: &str = "<bos>";

impl PhonemeInventory {
    pub fn new(entries: Vec<(String, Attributes)>) -> Result<Self> {
        let mut attributes = BTreeMap::new();
        let mut symbols = Vec::with_capacity(entries.len());
        for (s, a) in entries {
            if s == BLANK || s == BOS || s.is_empty() || s.contains(char::is_whitespace) {
                return Err(data(format!("invalid phoneme symbol {s:?}")));
            }
            a.validate(&s)?;
            if attributes.insert(s.clone(), a).is_some() {
                return Err(data(format!("duplicate phoneme symbol {s}")));
            }
            symbols.push(s);
        }
        if symbols.is_empty() {
            return Err(data("empty phoneme inventory"));
        }
        let bos_id = symbols.len() + 1;
        Ok(Self {
            symbols,
            blank_id: 0,
            bos_id,
            attributes,
        })
    }

    /// 40 English phonemes: the ARPAbet set plus schwa.
    pub fn english() -> Self {
        use Attributes as A;
        let c = |s: &str, m: &str, p: &str, v: &str| (s.to_string(), A::consonant(m, p, v));
        let v = |s: &str, p: &str, h: &str, t: &str| (s.to_string(), A::vowel(p, h, t));
        let entries = vec![
            c("P", "plosive", "labial", "voiceless"),
            c("B", "plosive", "labial", "voiced"),
            c("T", "plosive", "alveolar", "voiceless"),
            c("D", "plosive", "alveolar", "voiced"),
            c("K", "plosive", "velar", "voiceless"),
            c("G", "plosive", "velar", "voiced"),
            c("CH", "affricate", "postalveolar", "voiceless"),
            c("JH", "affricate", "postalveolar", "voiced"),
            c("F", "fricative", "labial", "voiceless"),
            c("V", "fricative", "labial", "voiced"),
            c("TH", "fricative", "dental", "voiceless"),
            c("DH", "fricative", "dental", "voiced"),
            c("S", "fricative", "alveolar", "voiceless"),
            c("Z", "fricative", "alveolar", "voiced"),
            c("SH", "fricative", "postalveolar", "voiceless"),
            c("ZH", "fricative", "postalveolar", "voiced"),
            c("HH", "fricative", "glottal", "voiceless"),
            c("M", "nasal", "labial", "voiced"),
            c("N", "nasal", "alveolar", "voiced"),
            c("NG", "nasal", "velar", "voiced"),
            c("L", "approximant", "alveolar", "voiced"),
            c("R", "approximant", "postalveolar", "voiced"),
            c("W", "approximant", "labial", "voiced"),
            c("Y", "approximant", "postalveolar", "voiced"),
            v("IY", "front", "close", "tense"),
            v("IH", "front", "close", "lax"),
            v("EY", "front", "mid", "tense"),
            v("EH", "front", "mid", "lax"),
            v("AE", "front", "open", "lax"),
            v("AH", "central", "mid", "lax"),
            v("AX", "central", "mid", "lax"),
            v("ER", "central", "mid", "tense"),
            v("AY", "central", "open", "tense"),
            v("AW", "central", "open", "tense"),
            v("AA", "back", "open", "tense"),
            v("AO", "back", "mid", "tense"),
            v("OW", "back", "mid", "tense"),
            v("OY", "back", "mid", "tense"),
            v("UH", "back", "close", "lax"),
            v("UW", "back", "close", "tense"),
        ];
        Self::new(entries).expect("built-in inventory is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// CTC vocabulary size: symbols plus blank.
    pub fn ctc_vocab(&self) -> usize {
        self.symbols.len() + 1
    }

    /// Decoder output size: symbols plus the end marker, which reuses id 0.
    pub fn decoder_vocab(&self) -> usize {
        self.symbols.len() + 1
    }

    /// Decoder input size: symbols, the end/blank slot and BOS.
    pub fn decoder_input_vocab(&self) -> usize {
        self.symbols.len() + 2
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol).map(|i| i + 1)
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        match id {
            0 => Some(BLANK),
            i if i == self.bos_id => Some(BOS),
            i => self.symbols.get(i - 1).map(String::as_str),
        }
    }

    pub fn attributes_of(&self, id: usize) -> Option<&Attributes> {
        self.symbols
            .get(id.checked_sub(1)?)
            .and_then(|s| self.attributes.get(s))
    }

    pub fn encode(&self, symbols: &[&str]) -> Result<Vec<usize>> {
        symbols
            .iter()
            .map(|s| self.id(s).ok_or_else(|| data(format!("unknown phoneme symbol {s}"))))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter_map(|&i| self.symbol(i).map(str::to_string))
            .collect()
    }

    /// Group labels present in the inventory for `axis`, sorted.
    pub fn groups(&self, axis: GroupAxis) -> Vec<String> {
        let mut g: Vec<String> = self
            .attributes
            .values()
            .filter_map(|a| a.group(axis).map(str::to_string))
            .collect();
        g.sort();
        g.dedup();
        g
    }

    /// Rebuilds derived ids and re-validates after deserialisation.
    pub fn validated(self) -> Result<Self> {
        let entries = self
            .symbols
            .iter()
            .map(|s| {
                let a = self
                    .attributes
                    .get(s)
                    .cloned()
                    .ok_or_else(|| data(format!("phoneme {s} has no attributes")))?;
                Ok((s.clone(), a))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.attributes.len() != self.symbols.len() {
            return Err(data("attribute table lists symbols outside the inventory"));
        }
        let inv = Self::new(entries)?;
        if inv.blank_id != self.blank_id || inv.bos_id != self.bos_id {
            return Err(data("inventory blank/BOS ids are inconsistent"));
        }
        Ok(inv)
    }
}
