//! Little-endian binary encoding for state checkpoints.
//!
//! Layout: 8-byte magic, `u32` version, then a flat stream of `u64` counts,
//! `f64` values and length-prefixed UTF-8 strings. Writers go through a
//! temporary file and a rename so an interrupted save never clobbers the
//! previous checkpoint.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mps::{EntryKind, FidelityEntry, FidelityLog};
use crate::tensor::Tensor;
use crate::C64;

pub(crate) const MAGIC: &[u8; 8] = b"CHIMPSCK";
pub(crate) const VERSION: u32 = 1;

pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub(crate) fn new() -> Self {
        let mut buf = MAGIC.to_vec();
        buf.extend_from_slice(&VERSION.to_le_bytes());
        Self { buf }
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub(crate) fn tensor(&mut self, t: &Tensor) {
        self.usize(t.shape().len());
        for &d in t.shape() {
            self.usize(d);
        }
        for z in t.data() {
            self.f64(z.re);
            self.f64(z.im);
        }
    }

    pub(crate) fn log(&mut self, log: &FidelityLog) {
        self.usize(log.two_qubit_gates());
        self.usize(log.len());
        for e in log.entries() {
            self.usize(e.ordinal);
            self.usize(e.qubits.0);
            self.usize(e.qubits.1);
            self.usize(e.site);
            self.f64(e.f);
            self.usize(e.depth);
            self.u64(match e.kind {
                EntryKind::Gate => 0,
                EntryKind::Regroup => 1,
            });
        }
    }

    pub(crate) fn save(self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.buf)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

pub(crate) struct Decoder {
    buf: Vec<u8>,
    pos: usize,
}

impl Decoder {
    pub(crate) fn open(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(buf)
    }

    pub(crate) fn from_bytes(buf: Vec<u8>) -> Result<Self> {
        if buf.len() < 12 || &buf[..8] != MAGIC {
            return Err(Error::Invalid("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Invalid(format!("unsupported checkpoint version {version}")));
        }
        Ok(Self { buf, pos: 12 })
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Invalid("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Invalid("count overflows usize".into()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Invalid("checkpoint string is not UTF-8".into()))
    }

    pub(crate) fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.usize()?;
        let shape = (0..rank).map(|_| self.usize()).collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.filter(|&l| l.saturating_mul(16) <= self.buf.len() - self.pos);
        let len = len.ok_or_else(|| Error::Invalid(format!("implausible tensor shape {shape:?}")))?;
        let data = (0..len).map(|_| Ok(C64::new(self.f64()?, self.f64()?))).collect::<Result<Vec<_>>>()?;
        Tensor::new(shape, data)
    }

    pub(crate) fn log(&mut self) -> Result<FidelityLog> {
        let gates = self.usize()?;
        let n = self.usize()?;
        let mut entries = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let ordinal = self.usize()?;
            let qubits = (self.usize()?, self.usize()?);
            let site = self.usize()?;
            let f = self.f64()?;
            let depth = self.usize()?;
            let kind = match self.u64()? {
                0 => EntryKind::Gate,
                1 => EntryKind::Regroup,
                k => return Err(Error::Invalid(format!("unknown log entry kind {k}"))),
            };
            entries.push(FidelityEntry { ordinal, qubits, site, f, depth, kind });
        }
        FidelityLog::from_entries(entries, gates)
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Invalid("trailing bytes in checkpoint".into()));
        }
        Ok(())
    }
}
