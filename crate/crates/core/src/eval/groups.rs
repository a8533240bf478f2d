//! Per-phoneme-group metrics over aligned frames.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{mean, mel_corr, mcd_frames};
use super::DecodedTrial;
use crate::corpus::{AlignedPhone, GroupAxis, PhonemeInventory, SplitName};
use crate::error::{data, Error, Result};
use crate::frontend::stft::Spectrogram;
use crate::frontend::AUDIO_RATE_HZ;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub n_frames: usize,
    pub mcd: Option<f64>,
    pub mel_corr: Option<f64>,
    pub n_positions: usize,
    pub top3: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTable {
    pub split: SplitName,
    pub axis: GroupAxis,
    pub rows: Vec<GroupRow>,
}

/// Index of the alignment row containing the centre of frame `t`, if any.
pub fn frame_phone(rows: &[AlignedPhone], t: usize, hop: usize) -> Option<usize> {
    let time = (t * hop) as f64 / AUDIO_RATE_HZ as f64;
    let last = rows.len().checked_sub(1)?;
    rows.iter()
        .position(|r| r.start_sec <= time && time < r.end_sec)
        .or_else(|| (time == rows[last].end_sec).then_some(last))
}

#[derive(Default)]
struct Acc {
    ref_cols: Vec<Spectrogram>,
    hyp_cols: Vec<Spectrogram>,
    hits: usize,
    positions: usize,
}

/// One table per grouping axis, with a row for every group value the
/// inventory defines. Top-3 is omitted when `with_topk` is false.
pub fn group_tables(
    split: SplitName,
    trials: &[DecodedTrial],
    inv: &PhonemeInventory,
    n_mcc: usize,
    with_topk: bool,
) -> Result<Vec<GroupTable>> {
    let mut acc: BTreeMap<(usize, String), Acc> = BTreeMap::new();
    for tr in trials {
        let attrs = |sym: &str| {
            inv.id(sym)
                .and_then(|id| inv.attributes_of(id))
                .ok_or_else(|| data(format!("phoneme {sym} has no attributes in the inventory")))
        };
        for t in 0..tr.mel_ref.n_frames {
            let Some(row) = frame_phone(&tr.alignment, t, tr.mel_ref.hop) else {
                continue;
            };
            let a = attrs(&tr.alignment[row].symbol)?;
            for (ai, axis) in GroupAxis::ALL.iter().enumerate() {
                if let Some(gname) = a.group(*axis) {
                    let e = acc.entry((ai, gname.to_string())).or_default();
                    e.ref_cols.push(tr.mel_ref.slice_frames(t, t + 1));
                    e.hyp_cols.push(tr.mel_hyp.slice_frames(t, t + 1));
                }
            }
        }
        if with_topk {
            for (&target, &rank) in tr.targets.iter().zip(&tr.ranks) {
                let sym = inv
                    .symbol(target)
                    .ok_or_else(|| data(format!("phoneme id {target} outside the inventory")))?;
                let a = attrs(sym)?;
                for (ai, axis) in GroupAxis::ALL.iter().enumerate() {
                    if let Some(gname) = a.group(*axis) {
                        let e = acc.entry((ai, gname.to_string())).or_default();
                        e.positions += 1;
                        e.hits += usize::from(rank < 3);
                    }
                }
            }
        }
    }
    let mut tables = Vec::new();
    for (ai, axis) in GroupAxis::ALL.iter().enumerate() {
        let mut rows = Vec::new();
        for gname in inv.groups(*axis) {
            let e = acc.remove(&(ai, gname.clone())).unwrap_or_default();
            let (mcd, corr) = match (
                Spectrogram::concat_frames(&e.ref_cols),
                Spectrogram::concat_frames(&e.hyp_cols),
            ) {
                (Some(r), Some(h)) => {
                    let corr = match mel_corr(&r, &h) {
                        Ok(v) => Some(v),
                        Err(Error::UndefinedCorrelation(_)) => None,
                        Err(e) => return Err(e),
                    };
                    (Some(mean(&mcd_frames(&r, &h, n_mcc)?)), corr)
                }
                _ => (None, None),
            };
            rows.push(GroupRow {
                group: gname,
                n_frames: e.ref_cols.len(),
                mcd,
                mel_corr: corr,
                n_positions: e.positions,
                top3: (with_topk && e.positions > 0).then(|| 100.0 * e.hits as f64 / e.positions as f64),
            });
        }
        tables.push(GroupTable {
            split,
            axis: *axis,
            rows,
        });
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_centres_map_to_intervals() {
        let rows = vec![
            AlignedPhone {
                symbol: "AA".into(),
                start_sec: 0.0,
                end_sec: 0.1,
            },
            AlignedPhone {
                symbol: "B".into(),
                start_sec: 0.1,
                end_sec: 0.2,
            },
        ];
        // 256 / 22050 s per frame: frame 8 is at 0.0929 s, frame 9 at 0.1045 s.
        assert_eq!(frame_phone(&rows, 8, 256), Some(0));
        assert_eq!(frame_phone(&rows, 9, 256), Some(1));
        assert_eq!(frame_phone(&rows, 40, 256), None);
    }
}
