use std::time::Instant;

use serde::Serialize;

use super::{Adam, Model, ModelConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_stream, EvalReport, Mode, Split, StreamOptions};
use crate::graph::{Dataset, NegativeSampler, NodeId, SplitPlan, TemporalEdge};
use crate::ncache::{CommitLog, NCacheStore};
use crate::rng::mix;

// Seed domain for evaluation negatives.
const EVAL_DOMAIN: u64 = 0xE7A1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ap: f64,
    pub val_auc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: Model,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub val: EvalReport,
    pub test: EvalReport,
}

/// Sampler for evaluation negatives; draws are keyed by absolute stream
/// position.
pub fn eval_sampler(ds: &Dataset, seed: u64) -> NegativeSampler {
    NegativeSampler::new(ds.destination_universe(), mix(&[seed, EVAL_DOMAIN]))
}

/// One pass over `stream` from empty caches. Each batch is scored against
/// the caches (with the previous batch's writes recomputed for gradients),
/// the parameters take one Adam step, then the batch is committed with the
/// updated parameters. Returns the mean training loss.
pub fn train_epoch(
    model: &mut Model,
    adam: &mut Adam,
    store: &mut NCacheStore,
    stream: &[TemporalEdge],
    sampler: &NegativeSampler,
    batch_size: usize,
) -> Result<f64> {
    store.reset();
    let bs = batch_size.max(1);
    let mut prev = CommitLog::default();
    let mut total = 0.0;
    for (i, chunk) in stream.chunks(bs).enumerate() {
        let negs = sampler.for_batch(i * bs, chunk);
        let out = model.loss_batch(store, &prev, chunk, &negs, i)?;
        total += out.loss * chunk.len() as f64;
        adam.step(&mut model.params, &out.grad);
        prev = store.apply_batch(chunk, &*model)?;
    }
    Ok(total / stream.len().max(1) as f64)
}

/// Trains with early stopping on validation AP, restores the best
/// parameters, then reports validation and test AP after replaying the
/// training stream with those parameters.
pub fn fit(
    ds: &Dataset,
    plan: &SplitPlan,
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<FitResult> {
    cfg.validate()?;
    let mut model = Model::new(model_cfg, cfg.seed)?;
    let stream = plan.training_stream(ds);
    if stream.is_empty() {
        return Err(Error::NoEdges);
    }
    let val = plan.val(ds);
    let universe = ds.destination_universe();
    let eval_neg = eval_sampler(ds, cfg.seed);
    let mut adam = Adam::new(model.params.len(), cfg.lr);
    let mut store = model.new_store(ds.num_nodes)?;

    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize, model.params.clone());
    let mut stale = 0;
    for epoch in 0..cfg.epochs_max {
        let t0 = Instant::now();
        let train_neg = NegativeSampler::new(universe.clone(), mix(&[cfg.seed, epoch as u64]));
        let loss = train_epoch(&mut model, &mut adam, &mut store, &stream, &train_neg, cfg.batch_size)?;
        let opts = StreamOptions {
            start: plan.train_end,
            batch_size: cfg.eval_batch_size,
            commit: false,
        };
        let rep = evaluate_stream(&mut store, &model, val, &eval_neg, opts, Split::Val, Mode::Transductive)?;
        let stats = EpochStats {
            epoch,
            train_loss: loss,
            val_ap: rep.ap,
            val_auc: rep.auc,
            seconds: t0.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        history.push(stats);
        if rep.ap >= best.0 + 1e-4 {
            best = (rep.ap, epoch, model.params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    model.params = best.2;

    let (val_rep, test_rep) = final_reports(ds, plan, &model, &stream, cfg)?;
    Ok(FitResult {
        model,
        history,
        best_epoch: best.1,
        val: val_rep,
        test: test_rep,
    })
}

/// Transductive validation and test reports: replay the training stream,
/// then evaluate validation and test in order, committing as they go.
pub fn final_reports(
    ds: &Dataset,
    plan: &SplitPlan,
    model: &Model,
    stream: &[TemporalEdge],
    cfg: &TrainConfig,
) -> Result<(EvalReport, EvalReport)> {
    let eval_neg = eval_sampler(ds, cfg.seed);
    let mut store = model.new_store(ds.num_nodes)?;
    store.replay(stream, cfg.batch_size, model)?;
    let mut opts = StreamOptions {
        start: plan.train_end,
        batch_size: cfg.eval_batch_size,
        commit: true,
    };
    let val = evaluate_stream(&mut store, model, plan.val(ds), &eval_neg, opts, Split::Val, Mode::Transductive)?;
    opts.start = plan.val_end;
    let test = evaluate_stream(&mut store, model, plan.test(ds), &eval_neg, opts, Split::Test, Mode::Transductive)?;
    Ok((val, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub max_rel_err: f64,
    /// Tensor name and offset of the worst entry.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Denominator floor for relative errors, so entries whose true gradient is
/// zero are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-6;

/// Compares analytic gradients of the batch loss with central differences.
/// The loss is a function of the parameters through the readout and through
/// the cache writes of `prev_batch`, which are applied to a copy of `before`.
pub fn finite_difference_check(
    model: &Model,
    before: &NCacheStore,
    prev_batch: &[TemporalEdge],
    batch: &[TemporalEdge],
    negatives: &[NodeId],
    step: f64,
) -> Result<FdReport> {
    let mut store = before.clone();
    let log = store.apply_batch(prev_batch, model)?;
    let analytic = model.loss_batch(&store, &log, batch, negatives, 0)?.grad;

    let loss_at = |m: &Model| -> Result<f64> {
        let mut s = before.clone();
        s.apply_batch(prev_batch, m)?;
        Ok(m.loss_value(&s, batch, negatives))
    };
    let mut probe = model.clone();
    let mut report = FdReport {
        max_rel_err: 0.0,
        worst: (String::new(), 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (name, range) in model.layout().tensors() {
        for i in range.clone() {
            let x = probe.params[i];
            probe.params[i] = x + step;
            let up = loss_at(&probe)?;
            probe.params[i] = x - step;
            let down = loss_at(&probe)?;
            probe.params[i] = x;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = (name.to_string(), i - range.start);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
