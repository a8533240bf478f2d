//! On-disk formats: raw f32 EEG with JSON sidecar, 16-bit WAV, phoneme text
//! and alignment TSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{data, Error, Result};
use crate::frontend::{EegRecording, Waveform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EegSidecar {
    pub channels: usize,
    pub samples: usize,
    pub rate_hz: u32,
}

pub fn sidecar_path(eeg: &Path) -> PathBuf {
    eeg.with_extension("json")
}

pub fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_string(path)?)?)
}

/// Writes channel-major little-endian f32 samples plus the sidecar.
pub fn write_eeg(path: &Path, eeg: &EegRecording) -> Result<()> {
    let mut bytes = Vec::with_capacity(eeg.data.len() * 4);
    for &v in &eeg.data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_bytes(path, &bytes)?;
    write_json(
        &sidecar_path(path),
        &EegSidecar {
            channels: eeg.n_channels,
            samples: eeg.n_samples(),
            rate_hz: eeg.rate_hz,
        },
    )
}

pub fn read_eeg(path: &Path, subject: &str) -> Result<EegRecording> {
    let meta: EegSidecar = read_json(&sidecar_path(path))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if meta.channels == 0 || bytes.len() != meta.channels * meta.samples * 4 {
        return Err(data(format!(
            "{}: {} bytes do not match {} channels x {} samples",
            path.display(),
            bytes.len(),
            meta.channels,
            meta.samples
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(data(format!("{}: non-finite EEG sample", path.display())));
    }
    Ok(EegRecording::new(meta.channels, meta.rate_hz, subject, values))
}

/// 16-bit PCM mono; samples are clipped to [-1, 1].
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    create_parent(path)?;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec)?;
    for &v in &w.samples {
        writer.write_sample((v.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Reads integer or float WAV; multichannel input is averaged to mono.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(other),
    })?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
    };
    let ch = spec.channels as usize;
    let samples = interleaved
        .chunks_exact(ch)
        .map(|f| f.iter().sum::<f64>() / ch as f64)
        .collect();
    Ok(Waveform::new(samples, spec.sample_rate))
}

pub fn write_phonemes(path: &Path, symbols: &[String]) -> Result<()> {
    let mut s = symbols.join(" ");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_phonemes(path: &Path) -> Result<Vec<String>> {
    Ok(read_string(path)?
        .split_whitespace()
        .map(str::to_string)
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignedPhone {
    pub symbol: String,
    pub start_sec: f64,
    pub end_sec: f64,
}

pub fn write_alignment(path: &Path, rows: &[AlignedPhone]) -> Result<()> {
    create_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        writeln!(w, "{}\t{:.6}\t{:.6}", r.symbol, r.start_sec, r.end_sec)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_alignment(path: &Path) -> Result<Vec<AlignedPhone>> {
    let text = read_string(path)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                data(format!("{}:{}: bad time {s:?}", path.display(), n + 1))
            })
        };
        if f.len() != 3 {
            return Err(data(format!(
                "{}:{}: expected 3 tab-separated fields",
                path.display(),
                n + 1
            )));
        }
        rows.push(AlignedPhone {
            symbol: f[0].to_string(),
            start_sec: parse(f[1])?,
            end_sec: parse(f[2])?,
        });
    }
    Ok(rows)
}

/// Sorted, non-overlapping and gap-free from 0 to `duration` (within `tol`).
pub fn check_alignment(rows: &[AlignedPhone], duration: f64, tol: f64) -> Result<()> {
    let mut t = 0.0;
    for r in rows {
        if (r.start_sec - t).abs() > tol || r.end_sec < r.start_sec {
            return Err(data(format!(
                "alignment interval {} [{}, {}] does not continue from {t}",
                r.symbol, r.start_sec, r.end_sec
            )));
        }
        t = r.end_sec;
    }
    if (t - duration).abs() > tol {
        return Err(data(format!("alignment ends at {t}, audio at {duration}")));
    }
    Ok(())
}
