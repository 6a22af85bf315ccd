//! Binary network checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "VSRC" | version u32 | kind u8 | config_len u32 | config (UTF-8 TOML)
//! | tensor table | has_optimizer u8 | [optimizer table] | crc32 u32
//!
//! table  := count u32, then per tensor:
//!           name_len u32 | name | dtype u8 (1 = f32, 2 = f64) | rank u32
//!           | extents u64 * rank | values
//! ```
//!
//! The CRC-32 covers every preceding byte. Writers always emit f64 values, so
//! load followed by save reproduces the file exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Network, NetworkKind};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"VSRC";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 1;
const DTYPE_F64: u8 = 2;
/// Name of the optimizer step counter in the optimizer table.
pub const STEP_TENSOR: &str = "optimizer.step";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: NetworkKind,
    pub config: String,
    pub tensors: Vec<(String, Tensor)>,
    pub optimizer: Option<Vec<(String, Tensor)>>,
}

impl Checkpoint {
    /// Snapshot of a network's parameters and buffers; with `optimizer_step`
    /// the ADAM moments and step counter are included as well.
    pub fn from_network<N: Network + ?Sized>(net: &N, optimizer_step: Option<u64>) -> Self {
        let optimizer = optimizer_step.map(|step| {
            let mut table = vec![(STEP_TENSOR.to_string(), Tensor::scalar(step as f64))];
            for p in net.params() {
                table.push((format!("{}.adam_m", p.name), p.adam_m.clone()));
                table.push((format!("{}.adam_v", p.name), p.adam_v.clone()));
            }
            table
        });
        Checkpoint {
            kind: net.kind(),
            config: net.config_text(),
            tensors: net.named_tensors(),
            optimizer,
        }
    }

    /// Loads values (and optimizer moments when present) into `net`. Returns
    /// the stored optimizer step, or 0 without optimizer state.
    pub fn apply_to<N: Network + ?Sized>(&self, net: &mut N) -> Result<u64> {
        if self.kind != net.kind() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} but the target is a {}",
                self.kind.name(),
                net.kind().name()
            )));
        }
        net.load_named_tensors(&self.tensors)?;
        let Some(table) = &self.optimizer else {
            for p in net.params_mut() {
                p.reset_moments();
            }
            return Ok(0);
        };
        let find = |name: &str| table.iter().find(|(n, _)| n == name).map(|(_, t)| t);
        let mut missing = Vec::new();
        for p in net.params_mut() {
            let m = find(&format!("{}.adam_m", p.name));
            let v = find(&format!("{}.adam_v", p.name));
            match (m, v) {
                (Some(m), Some(v)) if m.shape() == p.value.shape() && v.shape() == p.value.shape() => {
                    p.adam_m = m.clone();
                    p.adam_v = v.clone();
                }
                _ => missing.push(p.name.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Checkpoint(format!(
                "optimizer state missing or misshapen for [{}]",
                missing.join(", ")
            )));
        }
        let step = find(STEP_TENSOR)
            .ok_or_else(|| Error::Checkpoint("optimizer table has no step counter".into()))?;
        Ok(step.data()[0] as u64)
    }

    pub fn optimizer_step(&self) -> Option<u64> {
        self.optimizer
            .as_ref()?
            .iter()
            .find(|(n, _)| n == STEP_TENSOR)
            .map(|(_, t)| t.data()[0] as u64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        write_table(&mut out, &self.tensors);
        match &self.optimizer {
            Some(table) => {
                out.push(1);
                write_table(&mut out, table);
            }
            None => out.push(0),
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 4 + 1 + 4 + 4 + 1 + 4 {
            return Err(Error::Checkpoint("file is too short".into()));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::Checkpoint("CRC mismatch: file is corrupted".into()));
        }
        let mut r = Reader::new(body);
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a VSRC checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let kind = NetworkKind::from_code(r.u8()?)?;
        let len = r.u32()? as usize;
        let config = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;
        let tensors = read_table(&mut r)?;
        let optimizer = match r.u8()? {
            0 => None,
            1 => Some(read_table(&mut r)?),
            other => return Err(Error::Checkpoint(format!("bad optimizer flag {other}"))),
        };
        if !r.is_empty() {
            return Err(Error::Checkpoint("trailing bytes after optimizer table".into()));
        }
        Ok(Checkpoint {
            kind,
            config,
            tensors,
            optimizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn generator_config(&self) -> Result<GeneratorConfig> {
        self.expect_kind(NetworkKind::Generator)?;
        parse_config(&self.config)
    }

    pub fn discriminator_config(&self) -> Result<DiscriminatorConfig> {
        self.expect_kind(NetworkKind::Discriminator)?;
        parse_config(&self.config)
    }

    /// Rebuilds the generator stored in this checkpoint.
    pub fn to_generator(&self) -> Result<Generator> {
        let mut g = Generator::new(self.generator_config()?, 0)?;
        self.apply_to(&mut g)?;
        Ok(g)
    }

    pub fn to_discriminator(&self) -> Result<Discriminator> {
        let mut d = Discriminator::new(self.discriminator_config()?, 0)?;
        self.apply_to(&mut d)?;
        Ok(d)
    }

    fn expect_kind(&self, kind: NetworkKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "expected a {} checkpoint, found {}",
                kind.name(),
                self.kind.name()
            )));
        }
        Ok(())
    }
}

fn parse_config<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Checkpoint(format!("bad config block: {e}")))
}

fn write_table(out: &mut Vec<u8>, table: &[(String, Tensor)]) {
    out.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (name, t) in table {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F64);
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn read_table(r: &mut Reader<'_>) -> Result<Vec<(String, Tensor)>> {
    let count = r.u32()? as usize;
    let mut table: Vec<(String, Tensor)> = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if table.iter().any(|(n, _)| *n == name) {
            return Err(Error::Checkpoint(format!("tensor {name} appears twice")));
        }
        let dtype = r.u8()?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|e| e as usize)).collect::<Result<Vec<_>>>()?;
        let numel = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        let numel = numel.ok_or_else(|| Error::Checkpoint(format!("tensor {name} is too large")))?;
        let data = match dtype {
            DTYPE_F64 => r
                .take(numel.checked_mul(8).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            DTYPE_F32 => r
                .take(numel.checked_mul(4).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            other => return Err(Error::Checkpoint(format!("tensor {name}: unknown dtype {other}"))),
        };
        let t = Tensor::new(&shape, data)
            .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
        table.push((name, t));
    }
    Ok(table)
}

/// Bounds-checked cursor over a byte slice.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GeneratorConfig;

    fn small_generator() -> Generator {
        let cfg = GeneratorConfig {
            base_channels: 4,
            num_res_blocks: 1,
            patch_size: 8,
            ..Default::default()
        };
        Generator::new(cfg, 9).unwrap()
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let mut g = small_generator();
        for p in g.params_mut() {
            p.adam_m.fill(0.25);
        }
        let ck = Checkpoint::from_network(&g, Some(17));
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.optimizer_step(), Some(17));
        let mut h = back.to_generator().unwrap();
        assert_eq!(ck.apply_to(&mut h).unwrap(), 17);
        assert!(h.params().iter().all(|p| p.adam_m.data().iter().all(|&v| v == 0.25)));
    }

    #[test]
    fn every_single_byte_flip_is_detected() {
        let bytes = Checkpoint::from_network(&small_generator(), None).to_bytes();
        for i in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(Checkpoint::from_bytes(&bad).is_err(), "flip at {i} went unnoticed");
        }
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let ck = Checkpoint::from_network(&small_generator(), None);
        assert!(ck.to_discriminator().is_err());
    }
}
