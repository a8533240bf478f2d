//! Versioned binary checkpoints.
//!
//! Layout (little-endian): magic, format version `u32`, scalar tag, iteration
//! `u64`, seed `u64`, training config as JSON, then every parameter (name,
//! shape, values) in registration order, then the three optimizer states
//! (step count and both moment buffers).

use std::path::Path;

use eegspeech_tensor::{Scalar, Tensor};

use super::TrainConfig;
use crate::corpus::io::write_bytes;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EEGSPCKP";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct OptState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub iteration: u64,
    pub seed: u64,
    pub config: TrainConfig,
    pub params: Vec<(String, Tensor<T>)>,
    /// Optimizers A (EEG + phoneme), B (speech), C (discriminators).
    pub optimizers: [OptState<T>; 3],
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::State("checkpoint is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::State("checkpoint length overflow".into()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::State("checkpoint string is not UTF-8".into()))
    }

    fn values<T: Scalar>(&mut self, shape: &[usize]) -> Result<Tensor<T>> {
        let n: usize = shape.iter().product();
        let bytes = self.take(n * T::BYTES)?;
        let data = bytes.chunks_exact(T::BYTES).map(T::read_le).collect();
        Ok(Tensor::new(shape, data))
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u64(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

fn put_values<T: Scalar>(out: &mut Vec<u8>, t: &Tensor<T>) {
    for &v in t.data() {
        v.write_le(out);
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, T::NAME);
        put_u64(&mut out, self.iteration);
        put_u64(&mut out, self.seed);
        put_str(&mut out, &serde_json::to_string(&self.config)?);
        put_u64(&mut out, self.params.len() as u64);
        for (name, t) in &self.params {
            put_str(&mut out, name);
            put_u64(&mut out, t.rank() as u64);
            for &d in t.shape() {
                put_u64(&mut out, d as u64);
            }
            put_values(&mut out, t);
        }
        for o in &self.optimizers {
            put_u64(&mut out, o.step);
            put_u64(&mut out, o.m.len() as u64);
            for (m, v) in o.m.iter().zip(&o.v) {
                put_u64(&mut out, m.rank() as u64);
                for &d in m.shape() {
                    put_u64(&mut out, d as u64);
                }
                put_values(&mut out, m);
                put_values(&mut out, v);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::State("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::State(format!("checkpoint version {version}, expected {VERSION}")));
        }
        let scalar = r.string()?;
        if scalar != T::NAME {
            return Err(Error::State(format!("checkpoint holds {scalar} values, expected {}", T::NAME)));
        }
        let iteration = r.u64()?;
        let seed = r.u64()?;
        let config: TrainConfig = serde_json::from_str(&r.string()?)?;
        let shape = |r: &mut Reader| -> Result<Vec<usize>> {
            let rank = r.len()?;
            (0..rank).map(|_| r.len()).collect()
        };
        let n = r.len()?;
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let s = shape(&mut r)?;
            params.push((name, r.values(&s)?));
        }
        let mut opt = Vec::with_capacity(3);
        for _ in 0..3 {
            let step = r.u64()?;
            let k = r.len()?;
            let (mut m, mut v) = (Vec::with_capacity(k), Vec::with_capacity(k));
            for _ in 0..k {
                let s = shape(&mut r)?;
                m.push(r.values(&s)?);
                v.push(r.values(&s)?);
            }
            opt.push(OptState { step, m, v });
        }
        if r.pos != buf.len() {
            return Err(Error::State("trailing bytes after checkpoint".into()));
        }
        let optimizers: [OptState<T>; 3] = opt.try_into().map_err(|_| Error::State("optimizer count".into()))?;
        Ok(Self {
            iteration,
            seed,
            config,
            params,
            optimizers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn checkpoint_name(iteration: u64) -> String {
    format!("ckpt_{iteration}.bin")
}
