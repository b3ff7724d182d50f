//! Flat `key=value` run configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ncache::CacheConfig;
use crate::neural::{Ablations, ModelConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `.csv` means JODIE layout, anything else a whitespace edge list.
    Auto,
    Jodie,
    EdgeList,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: Format,
    pub cache: CacheConfig,
    pub d_t: usize,
    pub hidden: usize,
    pub ablations: Ablations,
    pub train: TrainConfig,
    pub train_frac: f64,
    pub val_frac: f64,
    pub mask_prob: f64,
    pub mask_seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            format: Format::Auto,
            cache: CacheConfig::default(),
            d_t: 8,
            hidden: 32,
            ablations: Ablations::default(),
            train: TrainConfig::default(),
            train_frac: 0.7,
            val_frac: 0.15,
            mask_prob: 0.0,
            mask_seed: 0,
            threads: 0,
            out: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value '{v}' for key '{key}'")))
}

impl RunConfig {
    pub const KEYS: [&'static str; 26] = [
        "data", "format", "m1", "m2", "f", "d0", "alpha", "q", "k", "cache_seed", "d_t",
        "hidden", "ablations", "batch_size", "eval_batch_size", "lr", "epochs", "patience",
        "seed", "train_frac", "val_frac", "mask_prob", "mask_seed", "threads", "out", "d_e",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "data" => self.data = (!v.is_empty()).then(|| PathBuf::from(v)),
            "format" => {
                self.format = match v {
                    "auto" => Format::Auto,
                    "jodie" => Format::Jodie,
                    "edgelist" => Format::EdgeList,
                    _ => return Err(Error::Config(format!("unknown format '{v}' (auto, jodie, edgelist)"))),
                }
            }
            "m1" => self.cache.m1 = parse(key, v)?,
            "m2" => self.cache.m2 = parse(key, v)?,
            "f" => self.cache.f = parse(key, v)?,
            "d0" => self.cache.d0 = parse(key, v)?,
            "alpha" => self.cache.alpha = parse(key, v)?,
            "q" => self.cache.q = parse(key, v)?,
            "k" => self.cache.k = parse(key, v)?,
            "cache_seed" => self.cache.seed = parse(key, v)?,
            "d_t" => self.d_t = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "ablations" => self.ablations = Ablations::parse(v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "eval_batch_size" => self.train.eval_batch_size = parse(key, v)?,
            "lr" => self.train.lr = parse(key, v)?,
            "epochs" => self.train.epochs_max = parse(key, v)?,
            "patience" => self.train.patience = parse(key, v)?,
            "seed" => self.train.seed = parse(key, v)?,
            "train_frac" => self.train_frac = parse(key, v)?,
            "val_frac" => self.val_frac = parse(key, v)?,
            "mask_prob" => self.mask_prob = parse(key, v)?,
            "mask_seed" => self.mask_seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "out" => self.out = (!v.is_empty()).then(|| PathBuf::from(v)),
            // derived from the dataset; accepted so written configs reload
            "d_e" => {}
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn assign(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{kv}'")))?;
        self.set(k, v)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            c.assign(line)?;
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let fmt = match self.format {
            Format::Auto => "auto",
            Format::Jodie => "jodie",
            Format::EdgeList => "edgelist",
        };
        let c = &self.cache;
        let t = &self.train;
        let _ = writeln!(s, "data={}", path(&self.data));
        let _ = writeln!(s, "format={fmt}");
        let _ = writeln!(s, "m1={}\nm2={}\nf={}\nd0={}\nalpha={}\nq={}\nk={}\ncache_seed={}", c.m1, c.m2, c.f, c.d0, c.alpha, c.q, c.k, c.seed);
        let _ = writeln!(s, "d_t={}\nhidden={}", self.d_t, self.hidden);
        let _ = writeln!(s, "ablations={}", self.ablations.names().join(","));
        let _ = writeln!(
            s,
            "batch_size={}\neval_batch_size={}\nlr={}\nepochs={}\npatience={}\nseed={}",
            t.batch_size, t.eval_batch_size, t.lr, t.epochs_max, t.patience, t.seed
        );
        let _ = writeln!(s, "train_frac={}\nval_frac={}\nmask_prob={}\nmask_seed={}", self.train_frac, self.val_frac, self.mask_prob, self.mask_seed);
        let _ = writeln!(s, "threads={}", self.threads);
        let _ = writeln!(s, "out={}", path(&self.out));
        s
    }

    pub fn model_config(&self, d_e: usize) -> ModelConfig {
        ModelConfig {
            cache: self.cache,
            d_e,
            d_t: self.d_t,
            hidden: self.hidden,
            ablations: self.ablations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config(0).validate()?;
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return Err(Error::Config(format!("mask_prob must be in [0, 1] (got {})", self.mask_prob)));
        }
        Ok(())
    }

    /// Values outside the usual ranges; reported, not rejected.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (name, m) in [("m1", self.cache.m1), ("m2", self.cache.m2)] {
            if m > 40 {
                w.push(format!("{name}={m} is above the usual range [0, 40]"));
            }
        }
        if !(2..=8).contains(&self.cache.f) {
            w.push(format!("f={} is outside the usual range [2, 8]", self.cache.f));
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.assign("m1=8").unwrap();
        c.assign("lr=0.003").unwrap();
        c.assign("ablations=no_de,no_hop2").unwrap();
        c.assign("data=/tmp/x.csv").unwrap();
        c.assign("alpha=0.3").unwrap();
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn defaults_match_reference_setting() {
        let c = RunConfig::default();
        assert_eq!((c.cache.m1, c.cache.m2, c.cache.f, c.cache.d0), (32, 16, 4, 72));
        assert_eq!(c.cache.alpha, 0.9);
        assert_eq!((c.train.batch_size, c.train.eval_batch_size), (100, 32));
        assert!(c.validate().is_ok());
        assert!(c.warnings().is_empty());
    }

    #[test]
    fn bad_input() {
        let mut c = RunConfig::default();
        assert!(c.assign("nonsense=1").is_err());
        assert!(c.assign("m1=abc").is_err());
        assert!(c.assign("novalue").is_err());
        c.assign("f=12").unwrap();
        assert_eq!(c.warnings().len(), 1);
    }
}
