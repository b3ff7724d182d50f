//! Binary store checkpoints: magic, version, config fingerprint, header, then
//! little-endian arrays `z0`, hop-1 keys and values, hop-2 keys and values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CacheConfig, NCacheStore};
use crate::error::{Error, Result};
use crate::graph::NodeId;

pub const STORE_MAGIC: &[u8; 8] = b"TLNKNCHE";
pub const STORE_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_store<W: Write>(store: &NCacheStore, mut w: W) -> std::io::Result<()> {
    let c = store.config();
    w.write_all(STORE_MAGIC)?;
    w.write_all(&STORE_VERSION.to_le_bytes())?;
    w.write_all(&c.fingerprint().to_le_bytes())?;
    w.write_all(&(store.num_nodes() as u64).to_le_bytes())?;
    for x in [c.d0, c.f, c.m1, c.m2, c.k] {
        w.write_all(&(x as u32).to_le_bytes())?;
    }
    w.write_all(&c.q.to_le_bytes())?;
    w.write_all(&c.alpha.to_le_bytes())?;
    w.write_all(&c.seed.to_le_bytes())?;
    w.write_all(&store.events_seen().to_le_bytes())?;

    let (z0, keys, vals) = store.raw_parts();
    let floats = |w: &mut W, xs: &[f64]| -> std::io::Result<()> {
        for x in xs {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    };
    floats(&mut w, z0)?;
    for h in 0..2 {
        for k in &keys[h] {
            w.write_all(&k.to_le_bytes())?;
        }
        floats(&mut w, &vals[h])?;
    }
    w.flush()
}

struct Cursor<R> {
    r: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r
            .read_exact(&mut b)
            .map_err(|_| bad("truncated checkpoint"))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn keys(&mut self, n: usize) -> Result<Vec<NodeId>> {
        (0..n).map(|_| self.u32()).collect()
    }
}

/// Reads a checkpoint. When `expect` is given, the stored configuration must
/// match it exactly.
pub fn read_store<R: Read>(r: R, expect: Option<&CacheConfig>) -> Result<NCacheStore> {
    let mut c = Cursor { r };
    if &c.bytes::<8>()? != STORE_MAGIC {
        return Err(bad("not a cache checkpoint (bad magic)"));
    }
    let version = c.u32()?;
    if version != STORE_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let fingerprint = c.u64()?;
    let num_nodes = c.u64()? as usize;
    let [d0, f, m1, m2, k] = [c.u32()?, c.u32()?, c.u32()?, c.u32()?, c.u32()?].map(|x| x as usize);
    let cfg = CacheConfig {
        d0,
        f,
        m1,
        m2,
        k,
        q: c.u64()?,
        alpha: c.f64()?,
        seed: c.u64()?,
    };
    let events = c.u64()?;
    if cfg.fingerprint() != fingerprint {
        return Err(bad("header does not match its fingerprint"));
    }
    if let Some(e) = expect {
        if e.fingerprint() != fingerprint {
            return Err(bad("checkpoint was written with a different cache configuration"));
        }
    }
    cfg.validate()?;
    let rows = num_nodes + 1;
    let z0 = c.f64s(rows * d0)?;
    let mut keys = [Vec::new(), Vec::new()];
    let mut vals = [Vec::new(), Vec::new()];
    for h in 0..2 {
        let m = cfg.capacity(h + 1);
        keys[h] = c.keys(rows * m)?;
        vals[h] = c.f64s(rows * m * f)?;
    }
    let store = NCacheStore::from_parts(cfg, num_nodes, z0, keys, vals, events)?;
    if store.slot_violations() != 0 {
        return Err(bad("checkpoint holds keys outside their hash slots"));
    }
    Ok(store)
}

pub fn save_store(store: &NCacheStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_store(store, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_store(path: impl AsRef<Path>, expect: Option<&CacheConfig>) -> Result<NCacheStore> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_store(BufReader::new(f), expect)
}
