//! Model checkpoints: magic, version, embedded `key=value` configuration,
//! then the flat parameter vector as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Ablations, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::ncache::CacheConfig;

pub const MODEL_MAGIC: &[u8; 8] = b"TLNKMODL";
pub const MODEL_VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl ModelConfig {
    pub fn to_record(&self) -> String {
        let c = &self.cache;
        format!(
            "m1={}\nm2={}\nf={}\nd0={}\nalpha={}\nq={}\nk={}\ncache_seed={}\nd_e={}\nd_t={}\nhidden={}\nablations={}\n",
            c.m1,
            c.m2,
            c.f,
            c.d0,
            c.alpha,
            c.q,
            c.k,
            c.seed,
            self.d_e,
            self.d_t,
            self.hidden,
            self.ablations.names().join(",")
        )
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut cache = CacheConfig::default();
        let mut cfg = ModelConfig::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed config line '{line}'")))?;
            let num = |v: &str| -> Result<u64> {
                v.parse().map_err(|_| bad(format!("bad value for {k}: '{v}'")))
            };
            match k {
                "m1" => cache.m1 = num(v)? as usize,
                "m2" => cache.m2 = num(v)? as usize,
                "f" => cache.f = num(v)? as usize,
                "d0" => cache.d0 = num(v)? as usize,
                "alpha" => {
                    cache.alpha = v.parse().map_err(|_| bad(format!("bad alpha '{v}'")))?
                }
                "q" => cache.q = num(v)?,
                "k" => cache.k = num(v)? as usize,
                "cache_seed" => cache.seed = num(v)?,
                "d_e" => cfg.d_e = num(v)? as usize,
                "d_t" => cfg.d_t = num(v)? as usize,
                "hidden" => cfg.hidden = num(v)? as usize,
                "ablations" => cfg.ablations = Ablations::parse(v)?,
                other => return Err(bad(format!("unknown config key '{other}'"))),
            }
        }
        cfg.cache = cache;
        Ok(cfg)
    }
}

pub fn write_model<W: Write>(model: &Model, mut w: W) -> std::io::Result<()> {
    let rec = model.config().to_record();
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(rec.len() as u32).to_le_bytes())?;
    w.write_all(rec.as_bytes())?;
    w.write_all(&(model.params.len() as u64).to_le_bytes())?;
    for p in &model.params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_model<R: Read>(mut r: R) -> Result<Model> {
    let mut read = |n: usize| -> Result<Vec<u8>> {
        let mut b = vec![0u8; n];
        r.read_exact(&mut b).map_err(|_| bad("truncated model checkpoint"))?;
        Ok(b)
    };
    if read(8)? != MODEL_MAGIC {
        return Err(bad("not a model checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(read(4)?.try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(bad(format!("unsupported model checkpoint version {version}")));
    }
    let len = u32::from_le_bytes(read(4)?.try_into().unwrap()) as usize;
    let rec = String::from_utf8(read(len)?).map_err(|_| bad("config block is not utf-8"))?;
    let cfg = ModelConfig::from_record(&rec)?;
    let n = u64::from_le_bytes(read(8)?.try_into().unwrap()) as usize;
    let expect = super::Layout::new(&cfg).total;
    if n != expect {
        return Err(bad(format!("config implies {expect} parameters, file holds {n}")));
    }
    let raw = read(n * 8)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Model::from_params(cfg, params)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(model, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(f))
}
