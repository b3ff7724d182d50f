//! Learnable parts: time encoding, recurrent cache updates, self projection,
//! attention readout, loss with gradients, Adam, and the training loop.

mod adam;
mod checkpoint;
pub mod layers;
mod model;
mod params;
mod train;

pub use adam::Adam;
pub use checkpoint::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use model::{LinkGrad, LossOutput, Model};
pub use params::{init_params, Layout};
pub use train::{
    eval_sampler, final_reports, finite_difference_check, fit, train_epoch, EpochStats, FdReport,
    FitResult, FD_FLOOR,
};

use std::fmt;

use crate::error::{Error, Result};
use crate::ncache::CacheConfig;

/// Ablation switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablations {
    /// Drop the hop-2 dictionary (`K = 1`).
    pub no_hop2: bool,
    /// Keep only self representations (`K = 0`).
    pub no_hop1_hop2: bool,
    /// Feed zeros in place of the time encoding.
    pub no_tenc: bool,
    /// Replace the recurrent cell by `W x + U h + b`.
    pub rnn_as_linear: bool,
    /// Uniform weights instead of attention.
    pub mean_readout: bool,
    /// Zero the distance-encoding slice of every feature.
    pub no_de: bool,
}

impl Ablations {
    pub const NAMES: [&'static str; 6] = [
        "no_hop2",
        "no_hop1_hop2",
        "no_tenc",
        "rnn_as_linear",
        "mean_readout",
        "no_de",
    ];

    pub fn set(&mut self, name: &str) -> Result<()> {
        match name.trim() {
            "no_hop2" => self.no_hop2 = true,
            "no_hop1_hop2" => self.no_hop1_hop2 = true,
            "no_tenc" => self.no_tenc = true,
            "rnn_as_linear" => self.rnn_as_linear = true,
            "mean_readout" => self.mean_readout = true,
            "no_de" => self.no_de = true,
            other => return Err(Error::Config(format!("unknown ablation '{other}'"))),
        }
        Ok(())
    }

    /// Parses a comma-separated list; empty string means none.
    pub fn parse(list: &str) -> Result<Self> {
        let mut a = Self::default();
        for name in list.split(',').filter(|s| !s.trim().is_empty()) {
            a.set(name)?;
        }
        Ok(a)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let on = [
            self.no_hop2,
            self.no_hop1_hop2,
            self.no_tenc,
            self.rnn_as_linear,
            self.mean_readout,
            self.no_de,
        ];
        Self::NAMES
            .iter()
            .zip(on)
            .filter(|(_, b)| *b)
            .map(|(n, _)| *n)
            .collect()
    }
}

impl fmt::Display for Ablations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.names();
        if n.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&n.join(","))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Cache shape before ablations are applied.
    pub cache: CacheConfig,
    /// Link feature width.
    pub d_e: usize,
    /// Time encoding width (even).
    pub d_t: usize,
    /// Readout hidden width.
    pub hidden: usize,
    pub ablations: Ablations,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            cache: CacheConfig::default(),
            d_e: 0,
            d_t: 8,
            hidden: 32,
            ablations: Ablations::default(),
        }
    }
}

impl ModelConfig {
    /// Cache configuration with hop ablations applied.
    pub fn cache(&self) -> CacheConfig {
        let mut c = self.cache;
        if self.ablations.no_hop1_hop2 {
            c.k = 0;
        } else if self.ablations.no_hop2 {
            c.k = c.k.min(1);
        }
        c
    }

    pub fn rnn_input_width(&self) -> usize {
        self.cache.d0 + self.d_t + self.d_e
    }

    pub fn validate(&self) -> Result<()> {
        self.cache().validate()?;
        if self.d_t == 0 || !self.d_t.is_multiple_of(2) {
            return Err(Error::Config(format!("time encoding width must be even and positive (got {})", self.d_t)));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub eval_batch_size: usize,
    pub lr: f64,
    pub epochs_max: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            eval_batch_size: 32,
            lr: 1e-4,
            epochs_max: 50,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::Config("batch sizes must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive (got {})", self.lr)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_parsing() {
        let a = Ablations::parse("no_de, no_hop1_hop2").unwrap();
        assert!(a.no_de && a.no_hop1_hop2 && !a.no_tenc);
        assert_eq!(a.to_string(), "no_hop1_hop2,no_de");
        assert_eq!(Ablations::parse("").unwrap(), Ablations::default());
        assert!(Ablations::parse("bogus").is_err());
    }

    #[test]
    fn hop_ablations_shrink_k() {
        let mut m = ModelConfig::default();
        assert_eq!(m.cache().de_width(), 6);
        m.ablations.no_hop2 = true;
        assert_eq!(m.cache().de_width(), 4);
        m.ablations.no_hop1_hop2 = true;
        assert_eq!(m.cache().de_width(), 2);
    }

    #[test]
    fn config_checks() {
        assert!(ModelConfig { d_t: 3, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { patience: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
