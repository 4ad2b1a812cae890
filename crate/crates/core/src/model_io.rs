//! Binary model container.
//!
//! All integers and floats are little-endian; floats are IEEE-754 `f64`
//! bit patterns, so a save/load cycle is bit-exact.
//!
//! ```text
//! magic            8 bytes  "WRELMMDL"
//! version          u32      = 1
//! seed             u64
//! z                u32
//! n_neurons        u32      (Ñ)
//! activation       u8       0 exact, 1 pade
//! svd_tolerance    f64
//! p_low, p_high    f64, f64
//! w0 kind          u8       0 scalar, 1 per-sample
//!   scalar:        f64
//!   per-sample:    u64 count, count × f64
//! prune flag       u8       0 none, 1 enabled
//! prune window     u32 n_before, u32 n_after   (present either way)
//! train_rows       u64
//! rank             u64
//! condition        f64
//! feature scaler   f64 p_low, f64 p_high, z × (f64 lo, f64 hi)
//! target scaler    f64 p_low, f64 p_high, f64 lo, f64 hi
//! input weights    z × Ñ f64, row-major (row = feature, column = neuron)
//! P₀               Ñ × Ñ f64, row-major
//! β₀               Ñ f64
//! checksum         32 bytes SHA-256 of every preceding byte
//! ```
//!
//! Load checks, in order: length, magic, version, checksum, then structure.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::elm::{Activation, InputWeights};
use crate::error::{Error, Result};
use crate::scaler::{ColumnBounds, Scaler};
use crate::trainer::{OfflineModel, OfflineWeights, PruneConfig, TrainConfig, TrainDiagnostics};

pub const MAGIC: &[u8; 8] = b"WRELMMDL";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;
const HEADER_LEN: usize = 12;

pub fn encode(m: &OfflineModel) -> Vec<u8> {
    let cfg = m.config();
    let (z, n) = (m.z(), m.n_neurons());
    let mut out = Vec::with_capacity(256 + 8 * (z * n + n * n + n + 2 * z));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&m.input_weights().seed().to_le_bytes());
    out.extend_from_slice(&(z as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.push(cfg.activation.tag());
    put_f64(&mut out, cfg.svd_tolerance);
    put_f64(&mut out, cfg.p_low);
    put_f64(&mut out, cfg.p_high);
    match &cfg.w0 {
        OfflineWeights::Scalar(w) => {
            out.push(0);
            put_f64(&mut out, *w);
        }
        OfflineWeights::PerSample(ws) => {
            out.push(1);
            out.extend_from_slice(&(ws.len() as u64).to_le_bytes());
            ws.iter().for_each(|w| put_f64(&mut out, *w));
        }
    }
    let prune = cfg.prune.unwrap_or_default();
    out.push(u8::from(cfg.prune.is_some()));
    out.extend_from_slice(&(prune.n_before as u32).to_le_bytes());
    out.extend_from_slice(&(prune.n_after as u32).to_le_bytes());
    let d = m.diagnostics();
    out.extend_from_slice(&(d.train_rows as u64).to_le_bytes());
    out.extend_from_slice(&(d.rank as u64).to_le_bytes());
    put_f64(&mut out, d.condition);
    for scaler in [m.feature_scaler(), m.target_scaler()] {
        let (lo, hi) = scaler.percentiles();
        put_f64(&mut out, lo);
        put_f64(&mut out, hi);
        for b in scaler.bounds() {
            put_f64(&mut out, b.lo);
            put_f64(&mut out, b.hi);
        }
    }
    let a = m.input_weights().matrix();
    for r in 0..z {
        for c in 0..n {
            put_f64(&mut out, a[(r, c)]);
        }
    }
    let p0 = m.p0();
    for r in 0..n {
        for c in 0..n {
            put_f64(&mut out, p0[(r, c)]);
        }
    }
    m.beta0().iter().for_each(|v| put_f64(&mut out, *v));
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    out
}

pub fn decode(bytes: &[u8]) -> Result<OfflineModel> {
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(Error::Checksum);
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::Checksum);
    }

    let mut cur = Cursor { bytes: body, pos: HEADER_LEN };
    let seed = cur.u64()?;
    let z = cur.u32()? as usize;
    let n = cur.u32()? as usize;
    if z == 0 || n == 0 {
        return Err(Error::Format("zero feature or neuron count".into()));
    }
    let activation =
        Activation::from_tag(cur.u8()?).ok_or_else(|| Error::Format("unknown activation tag".into()))?;
    let svd_tolerance = cur.f64()?;
    let p_low = cur.f64()?;
    let p_high = cur.f64()?;
    let w0 = match cur.u8()? {
        0 => OfflineWeights::Scalar(cur.f64()?),
        1 => {
            let count = cur.u64()? as usize;
            cur.ensure(count.saturating_mul(8))?;
            OfflineWeights::PerSample((0..count).map(|_| cur.f64()).collect::<Result<_>>()?)
        }
        _ => return Err(Error::Format("unknown w0 kind".into())),
    };
    let prune_on = cur.u8()?;
    let prune = PruneConfig { n_before: cur.u32()? as usize, n_after: cur.u32()? as usize };
    let diagnostics = TrainDiagnostics {
        train_rows: cur.u64()? as usize,
        rank: cur.u64()? as usize,
        condition: cur.f64()?,
    };
    let feature_scaler = read_scaler(&mut cur, z)?;
    let target_scaler = read_scaler(&mut cur, 1)?;
    cur.ensure(8 * (z * n + n * n + n))?;
    let mut a = DMatrix::zeros(z, n);
    for r in 0..z {
        for c in 0..n {
            a[(r, c)] = cur.f64()?;
        }
    }
    let mut p0 = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            p0[(r, c)] = cur.f64()?;
        }
    }
    let beta0 = DVector::from_iterator(n, (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?);
    if cur.pos != body.len() {
        return Err(Error::Format(format!("{} trailing bytes", body.len() - cur.pos)));
    }

    let config = TrainConfig {
        seed,
        n_neurons: n,
        w0,
        p_low,
        p_high,
        activation,
        svd_tolerance,
        prune: (prune_on != 0).then_some(prune),
    };
    Ok(OfflineModel::from_parts(
        InputWeights::from_parts(seed, a),
        feature_scaler,
        target_scaler,
        p0,
        beta0,
        config,
        diagnostics,
    ))
}

pub fn save_model(m: &OfflineModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(m))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OfflineModel> {
    decode(&fs::read(path)?)
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_bits().to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn ensure(&self, len: usize) -> Result<()> {
        if self.bytes.len().saturating_sub(self.pos) < len {
            Err(Error::Format("unexpected end of payload".into()))
        } else {
            Ok(())
        }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        self.ensure(N)?;
        let out = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

fn read_scaler(cur: &mut Cursor<'_>, arity: usize) -> Result<Scaler> {
    let (p_low, p_high) = (cur.f64()?, cur.f64()?);
    let mut bounds = Vec::with_capacity(arity);
    for _ in 0..arity {
        bounds.push(ColumnBounds { lo: cur.f64()?, hi: cur.f64()? });
    }
    Scaler::from_bounds(bounds, p_low, p_high).map_err(|e| Error::Format(e.to_string()))
}
