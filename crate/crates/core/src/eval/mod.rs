//! Metrics and evaluation protocols.

mod metrics;

pub use metrics::{auc, average_precision};

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Dataset, NegativeSampler, NodeId, SplitPlan, TemporalEdge};
use crate::ncache::NCacheStore;
use crate::neural::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Transductive,
    Inductive,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Transductive => "transductive",
            Mode::Inductive => "inductive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub ap: f64,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub split: Split,
    pub mode: Mode,
    pub seconds: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Positive and negative scores in stream order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamScores {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl StreamScores {
    pub fn report(&self, split: Split, mode: Mode, seconds: f64) -> Result<EvalReport> {
        let mut scores = self.pos.clone();
        scores.extend_from_slice(&self.neg);
        let mut labels = vec![true; self.pos.len()];
        labels.resize(scores.len(), false);
        Ok(EvalReport {
            ap: average_precision(&scores, &labels)?,
            auc: auc(&scores, &labels)?,
            n_pos: self.pos.len(),
            n_neg: self.neg.len(),
            split,
            mode,
            seconds,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StreamOptions {
    /// Absolute stream position of the first edge (keys negative sampling).
    pub start: usize,
    pub batch_size: usize,
    /// Keep the cache updates made while evaluating.
    pub commit: bool,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            start: 0,
            batch_size: 32,
            commit: true,
        }
    }
}

/// Scores every batch against the current caches, then applies the batch's
/// true edges. Negatives never touch the caches.
pub fn score_stream(
    store: &mut NCacheStore,
    model: &Model,
    edges: &[TemporalEdge],
    sampler: &NegativeSampler,
    opts: StreamOptions,
) -> Result<StreamScores> {
    if edges.is_empty() {
        return Err(Error::NothingToEvaluate);
    }
    let snap = (!opts.commit).then(|| store.snapshot());
    let bs = opts.batch_size.max(1);
    let mut out = StreamScores::default();
    for (i, chunk) in edges.chunks(bs).enumerate() {
        let negs = sampler.for_batch(opts.start + i * bs, chunk);
        let mut links: Vec<(NodeId, NodeId)> = chunk.iter().map(|e| (e.src, e.dst)).collect();
        links.extend(chunk.iter().zip(&negs).map(|(e, &n)| (e.src, n)));
        let scores = model.score_links(store, &links);
        out.pos.extend_from_slice(&scores[..chunk.len()]);
        out.neg.extend_from_slice(&scores[chunk.len()..]);
        store.apply_batch(chunk, model)?;
    }
    if let Some(s) = snap {
        store.restore(&s)?;
    }
    Ok(out)
}

pub fn evaluate_stream(
    store: &mut NCacheStore,
    model: &Model,
    edges: &[TemporalEdge],
    sampler: &NegativeSampler,
    opts: StreamOptions,
    split: Split,
    mode: Mode,
) -> Result<EvalReport> {
    let t0 = Instant::now();
    let scores = score_stream(store, model, edges, sampler, opts)?;
    scores.report(split, mode, t0.elapsed().as_secs_f64())
}

/// How caches are warmed before scoring inductive test links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warmup {
    /// Replay the full train and validation streams with nothing masked.
    FullReplay,
    /// Only the edges visible during training: train and validation edges
    /// with no masked endpoint.
    MaskedHistory,
}

/// Test links touching at least one masked node, scored after warming a
/// fresh store per `warmup`.
pub fn evaluate_inductive(
    ds: &Dataset,
    plan: &SplitPlan,
    model: &Model,
    sampler: &NegativeSampler,
    batch_size: usize,
    warmup: Warmup,
) -> Result<EvalReport> {
    let test = plan.inductive_test_edges(ds);
    if test.is_empty() {
        return Err(Error::EmptyInductiveSet);
    }
    let t0 = Instant::now();
    let mut store = model.new_store(ds.num_nodes)?;
    let history = &ds.edges[..plan.val_end];
    match warmup {
        Warmup::FullReplay => store.replay(history, batch_size, model)?,
        Warmup::MaskedHistory => {
            let visible: Vec<TemporalEdge> = history
                .iter()
                .filter(|e| !plan.is_masked_edge(e))
                .cloned()
                .collect();
            store.replay(&visible, batch_size, model)?
        }
    }
    let opts = StreamOptions {
        start: plan.val_end,
        batch_size,
        commit: true,
    };
    let scores = score_stream(&mut store, model, &test, sampler, opts)?;
    scores.report(Split::Test, Mode::Inductive, t0.elapsed().as_secs_f64())
}
