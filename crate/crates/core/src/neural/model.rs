use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use super::layers::{
    gru_backward, gru_forward, linear, linear_backward, linear_cell, linear_cell_backward,
    sigmoid, softplus, t_encode, t_encode_backward, GruGrads, GruWeights,
};
use super::params::{init_params, Layout};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalEdge};
use crate::joint::{build_joint, JointFeature, JointSet, SelfProjection};
use crate::ncache::{CacheConfig, CacheEncoder, CommitLog, NCacheStore, StepInput};

// Links per gradient accumulation chunk; fixed so reductions are reproducible.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    cfg: ModelConfig,
    layout: Layout,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Mean binary cross-entropy.
    pub loss: f64,
    pub grad: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Gradients a single link sends into cache entries written by the previous
/// batch.
#[derive(Debug, Clone, Default)]
pub struct LinkGrad {
    pub dz0: BTreeMap<NodeId, Vec<f64>>,
    pub dpair: BTreeMap<(NodeId, usize), Vec<f64>>,
}

struct FeatureTrace {
    h: Vec<f64>,
    a1: Vec<f64>,
    r1: Vec<f64>,
    m: Vec<f64>,
}

struct ReadoutTrace {
    feats: Vec<FeatureTrace>,
    alpha: Vec<f64>,
    pooled: Vec<f64>,
    a3: Vec<f64>,
    r3: Vec<f64>,
    logit: f64,
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Model {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let params = init_params(&cfg, &layout, seed);
        Ok(Self {
            cfg,
            layout,
            params,
        })
    }

    pub fn from_params(cfg: ModelConfig, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        if params.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            cfg,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn cache_config(&self) -> CacheConfig {
        self.cfg.cache()
    }

    /// Empty store shaped for this model.
    pub fn new_store(&self, num_nodes: usize) -> Result<NCacheStore> {
        NCacheStore::new(self.cache_config(), num_nodes)
    }

    fn p(&self, r: &std::ops::Range<usize>) -> &[f64] {
        &self.params[r.clone()]
    }

    fn cell_weights(&self, self_cell: bool) -> GruWeights<'_> {
        let l = &self.layout;
        if self_cell {
            GruWeights {
                w: self.p(&l.gru0_w),
                u: self.p(&l.gru0_u),
                b: self.p(&l.gru0_b),
            }
        } else {
            GruWeights {
                w: self.p(&l.gru1_w),
                u: self.p(&l.gru1_u),
                b: self.p(&l.gru1_b),
            }
        }
    }

    fn rnn_input(&self, inp: &StepInput) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.cfg.rnn_input_width());
        x.extend_from_slice(&inp.partner);
        if self.cfg.ablations.no_tenc {
            x.extend(std::iter::repeat_n(0.0, self.cfg.d_t));
        } else {
            x.extend(t_encode(inp.t, self.p(&self.layout.omega)));
        }
        x.extend_from_slice(&inp.feat);
        debug_assert_eq!(x.len(), self.cfg.rnn_input_width());
        x
    }

    fn cell(&self, self_cell: bool, inp: &StepInput) -> Vec<f64> {
        let x = self.rnn_input(inp);
        let w = self.cell_weights(self_cell);
        if self.cfg.ablations.rnn_as_linear {
            linear_cell(w, &inp.h, &x)
        } else {
            gru_forward(w, &inp.h, &x).out
        }
    }

    /// Backpropagates `dout` through one recomputed cell step.
    fn cell_backward(&self, self_cell: bool, inp: &StepInput, dout: &[f64], grad: &mut [f64]) {
        let l = &self.layout;
        let x = self.rnn_input(inp);
        let w = self.cell_weights(self_cell);
        let (rw, ru, rb) = if self_cell {
            (l.gru0_w.clone(), l.gru0_u.clone(), l.gru0_b.clone())
        } else {
            (l.gru1_w.clone(), l.gru1_u.clone(), l.gru1_b.clone())
        };
        // split the gradient vector into disjoint tensor views
        let (head, rest) = grad.split_at_mut(rw.start);
        let (gw, rest) = rest.split_at_mut(rw.len());
        let (gu, rest) = rest.split_at_mut(ru.len());
        let (gb, _) = rest.split_at_mut(rb.len());
        debug_assert_eq!(ru.start, rw.end);
        debug_assert_eq!(rb.start, ru.end);
        let mut g = GruGrads { w: gw, u: gu, b: gb };
        let dx = if self.cfg.ablations.rnn_as_linear {
            linear_cell_backward(w, &mut g, &inp.h, &x, dout)
        } else {
            let tr = gru_forward(w, &inp.h, &x);
            gru_backward(w, &mut g, &inp.h, &x, &tr, dout)
        };
        if !self.cfg.ablations.no_tenc {
            let d0 = self.cfg.cache.d0;
            let d_enc = &dx[d0..d0 + self.cfg.d_t];
            t_encode_backward(inp.t, self.p(&l.omega), d_enc, &mut head[l.omega.clone()]);
        }
    }

    fn feature_input(&self, f: &JointFeature) -> Vec<f64> {
        let mut h = if self.cfg.ablations.no_de {
            vec![0.0; f.de.width as usize]
        } else {
            f.de.to_vec()
        };
        h.extend_from_slice(&f.q);
        h
    }

    fn readout_forward(&self, feats: &[JointFeature]) -> Result<ReadoutTrace> {
        if feats.is_empty() {
            return Err(Error::EmptyFeatures);
        }
        let l = &self.layout;
        let traces: Vec<FeatureTrace> = feats
            .iter()
            .map(|f| {
                let h = self.feature_input(f);
                let a1 = linear(self.p(&l.inner1_w), self.p(&l.inner1_b), &h);
                let r1 = relu(&a1);
                let m = linear(self.p(&l.inner2_w), self.p(&l.inner2_b), &r1);
                FeatureTrace { h, a1, r1, m }
            })
            .collect();
        let alpha = if self.cfg.ablations.mean_readout {
            vec![1.0 / traces.len() as f64; traces.len()]
        } else {
            let w = self.p(&l.attn);
            let s: Vec<f64> = traces
                .iter()
                .map(|t| t.m.iter().zip(w).map(|(a, b)| a * b).sum())
                .collect();
            let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|x| (x - mx).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|x| x / z).collect()
        };
        let mut pooled = vec![0.0; self.cfg.hidden];
        for (t, a) in traces.iter().zip(&alpha) {
            for (p, m) in pooled.iter_mut().zip(&t.m) {
                *p += a * m;
            }
        }
        let a3 = linear(self.p(&l.outer1_w), self.p(&l.outer1_b), &pooled);
        let r3 = relu(&a3);
        let logit = linear(self.p(&l.outer2_w), self.p(&l.outer2_b), &r3)[0];
        Ok(ReadoutTrace {
            feats: traces,
            alpha,
            pooled,
            a3,
            r3,
            logit,
        })
    }

    /// Returns `d loss / d q` for every feature.
    fn readout_backward(&self, tr: &ReadoutTrace, dlogit: f64, grad: &mut [f64]) -> Vec<Vec<f64>> {
        let l = &self.layout;
        let hdim = self.cfg.hidden;
        let mut dr3 = vec![0.0; hdim];
        {
            let (dw, db) = two_mut(grad, &l.outer2_w, &l.outer2_b);
            linear_backward(self.p(&l.outer2_w), &tr.r3, &[dlogit], dw, db, Some(&mut dr3));
        }
        let da3: Vec<f64> = dr3
            .iter()
            .zip(&tr.a3)
            .map(|(d, a)| if *a > 0.0 { *d } else { 0.0 })
            .collect();
        let mut dpooled = vec![0.0; hdim];
        {
            let (dw, db) = two_mut(grad, &l.outer1_w, &l.outer1_b);
            linear_backward(self.p(&l.outer1_w), &tr.pooled, &da3, dw, db, Some(&mut dpooled));
        }

        let mut dm: Vec<Vec<f64>> = tr
            .alpha
            .iter()
            .map(|a| dpooled.iter().map(|d| a * d).collect())
            .collect();
        if !self.cfg.ablations.mean_readout {
            let dot: Vec<f64> = tr
                .feats
                .iter()
                .map(|t| t.m.iter().zip(&dpooled).map(|(a, b)| a * b).sum())
                .collect();
            let avg: f64 = tr.alpha.iter().zip(&dot).map(|(a, d)| a * d).sum();
            let w = self.p(&l.attn).to_vec();
            for (i, t) in tr.feats.iter().enumerate() {
                let ds = tr.alpha[i] * (dot[i] - avg);
                for j in 0..hdim {
                    dm[i][j] += ds * w[j];
                    grad[l.attn.start + j] += ds * t.m[j];
                }
            }
        }

        let f = self.cfg.cache.f;
        tr.feats
            .iter()
            .zip(&dm)
            .map(|(t, dmi)| {
                let mut dr1 = vec![0.0; hdim];
                {
                    let (dw, db) = two_mut(grad, &l.inner2_w, &l.inner2_b);
                    linear_backward(self.p(&l.inner2_w), &t.r1, dmi, dw, db, Some(&mut dr1));
                }
                let da1: Vec<f64> = dr1
                    .iter()
                    .zip(&t.a1)
                    .map(|(d, a)| if *a > 0.0 { *d } else { 0.0 })
                    .collect();
                let mut dh = vec![0.0; t.h.len()];
                let (dw, db) = two_mut(grad, &l.inner1_w, &l.inner1_b);
                linear_backward(self.p(&l.inner1_w), &t.h, &da1, dw, db, Some(&mut dh));
                dh[dh.len() - f..].to_vec()
            })
            .collect()
    }

    /// Raw readout score of a feature set.
    pub fn readout(&self, feats: &[JointFeature]) -> Result<f64> {
        Ok(self.readout_forward(feats)?.logit)
    }

    /// Attention weights the readout assigns to `feats`.
    pub fn attention(&self, feats: &[JointFeature]) -> Result<Vec<f64>> {
        Ok(self.readout_forward(feats)?.alpha)
    }

    pub fn joint(&self, store: &NCacheStore, u: NodeId, v: NodeId) -> JointSet {
        build_joint(store, u, v, self)
    }

    pub fn logit(&self, store: &NCacheStore, u: NodeId, v: NodeId) -> f64 {
        let j = self.joint(store, u, v);
        self.readout(&j.features)
            .expect("joint sets always hold both endpoints")
    }

    /// Link probability given the store's current state.
    pub fn forward_link(&self, store: &NCacheStore, u: NodeId, v: NodeId) -> f64 {
        sigmoid(self.logit(store, u, v))
    }

    pub fn score_links(&self, store: &NCacheStore, links: &[(NodeId, NodeId)]) -> Vec<f64> {
        links
            .par_iter()
            .map(|&(u, v)| self.forward_link(store, u, v))
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn link_backward(
        &self,
        store: &NCacheStore,
        u: NodeId,
        v: NodeId,
        label: f64,
        scale: f64,
        tracked: &Tracked,
        grad: &mut [f64],
        lg: &mut LinkGrad,
    ) -> (f64, f64) {
        let l = &self.layout;
        let joint = self.joint(store, u, v);
        let tr = self
            .readout_forward(&joint.features)
            .expect("joint sets always hold both endpoints");
        let x = tr.logit;
        let loss = softplus(x) - label * x;
        let dlogit = (sigmoid(x) - label) * scale;
        let dq = self.readout_backward(&tr, dlogit, grad);

        let f = self.cfg.cache.f;
        let mut dproj = [vec![0.0; f], vec![0.0; f]];
        for (e, &g) in joint.entries.iter().zip(&joint.phi) {
            match e.hop {
                0 => add_into(&mut dproj[e.side as usize], &dq[g]),
                1 if tracked.pair.contains(&(e.owner, e.slot as usize)) => {
                    add_into(
                        lg.dpair
                            .entry((e.owner, e.slot as usize))
                            .or_insert_with(|| vec![0.0; f]),
                        &dq[g],
                    );
                }
                _ => {}
            }
        }
        for (side, w) in [(0usize, u), (1usize, v)] {
            let z0 = store.z0(w);
            let track = tracked.nodes.contains(&w);
            let mut dz0 = vec![0.0; z0.len()];
            let (dw, db) = two_mut(grad, &l.proj_w, &l.proj_b);
            linear_backward(
                self.p(&l.proj_w),
                z0,
                &dproj[side],
                dw,
                db,
                track.then_some(&mut dz0[..]),
            );
            if track {
                add_into(lg.dz0.entry(w).or_insert_with(|| vec![0.0; z0.len()]), &dz0);
            }
        }
        (loss, x)
    }

    /// Mean cross-entropy of `positives` (label 1) and `(src, negatives[i])`
    /// (label 0), with gradients for every parameter. Entries written by the
    /// previous batch (`prev`) are recomputed from their logged inputs so the
    /// recurrent cells receive gradients.
    pub fn loss_batch(
        &self,
        store: &NCacheStore,
        prev: &CommitLog,
        positives: &[TemporalEdge],
        negatives: &[NodeId],
        batch_index: usize,
    ) -> Result<LossOutput> {
        assert_eq!(positives.len(), negatives.len(), "one negative per positive");
        let mut links: Vec<(NodeId, NodeId, f64)> =
            positives.iter().map(|e| (e.src, e.dst, 1.0)).collect();
        links.extend(positives.iter().zip(negatives).map(|(e, &n)| (e.src, n, 0.0)));
        if links.is_empty() {
            return Err(Error::NothingToEvaluate);
        }
        let scale = 1.0 / links.len() as f64;
        let tracked = Tracked::from_log(prev);

        let parts: Vec<(f64, Vec<f64>, Vec<f64>, LinkGrad)> = links
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; self.layout.total];
                let mut lg = LinkGrad::default();
                let mut loss = 0.0;
                let mut logits = Vec::with_capacity(chunk.len());
                for &(u, v, y) in chunk {
                    let (l, x) =
                        self.link_backward(store, u, v, y, scale, &tracked, &mut grad, &mut lg);
                    loss += l;
                    logits.push(x);
                }
                (loss, logits, grad, lg)
            })
            .collect();

        let mut loss = 0.0;
        let mut grad = vec![0.0; self.layout.total];
        let mut logits = Vec::with_capacity(links.len());
        let mut dz0: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
        let mut dpair: BTreeMap<(NodeId, usize), Vec<f64>> = BTreeMap::new();
        for (l, lg_logits, g, lg) in parts {
            loss += l;
            logits.extend(lg_logits);
            add_into(&mut grad, &g);
            for (k, d) in lg.dz0 {
                match dz0.get_mut(&k) {
                    Some(acc) => add_into(acc, &d),
                    None => {
                        dz0.insert(k, d);
                    }
                }
            }
            for (k, d) in lg.dpair {
                match dpair.get_mut(&k) {
                    Some(acc) => add_into(acc, &d),
                    None => {
                        dpair.insert(k, d);
                    }
                }
            }
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { batch: batch_index });
        }

        for (node, input) in &prev.self_writes {
            if let Some(d) = dz0.get(node) {
                self.cell_backward(true, input, d, &mut grad);
            }
        }
        for (node, slot, input) in &prev.pair_writes {
            if let Some(d) = dpair.get(&(*node, *slot)) {
                self.cell_backward(false, input, d, &mut grad);
            }
        }
        Ok(LossOutput { loss, grad, logits })
    }

    /// Loss only (no gradients).
    pub fn loss_value(
        &self,
        store: &NCacheStore,
        positives: &[TemporalEdge],
        negatives: &[NodeId],
    ) -> f64 {
        let mut links: Vec<(NodeId, NodeId, f64)> =
            positives.iter().map(|e| (e.src, e.dst, 1.0)).collect();
        links.extend(positives.iter().zip(negatives).map(|(e, &n)| (e.src, n, 0.0)));
        let total: f64 = links
            .iter()
            .map(|&(u, v, y)| {
                let x = self.logit(store, u, v);
                softplus(x) - y * x
            })
            .sum();
        total / links.len() as f64
    }
}

struct Tracked {
    nodes: HashSet<NodeId>,
    pair: HashSet<(NodeId, usize)>,
}

impl Tracked {
    fn from_log(log: &CommitLog) -> Self {
        Self {
            nodes: log.self_writes.iter().map(|(n, _)| *n).collect(),
            pair: log.pair_writes.iter().map(|(n, s, _)| (*n, *s)).collect(),
        }
    }
}

/// Disjoint mutable views of two adjacent-or-not tensors, `a` before `b`.
fn two_mut<'a>(
    g: &'a mut [f64],
    a: &std::ops::Range<usize>,
    b: &std::ops::Range<usize>,
) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert!(a.end <= b.start);
    let (left, right) = g.split_at_mut(b.start);
    (&mut left[a.clone()], &mut right[..b.len()])
}

impl CacheEncoder for Model {
    fn self_step(&self, input: &StepInput) -> Vec<f64> {
        self.cell(true, input)
    }

    fn pair_step(&self, input: &StepInput) -> Vec<f64> {
        self.cell(false, input)
    }
}

impl SelfProjection for Model {
    fn project(&self, z0: &[f64]) -> Vec<f64> {
        linear(self.p(&self.layout.proj_w), self.p(&self.layout.proj_b), z0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::DeVector;
    use crate::neural::Ablations;

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            cache: CacheConfig {
                m1: 4,
                m2: 2,
                f: 3,
                d0: 6,
                alpha: 0.9,
                seed: 2,
                ..Default::default()
            },
            d_e: 2,
            d_t: 4,
            hidden: 5,
            ablations: Ablations::default(),
        }
    }

    fn feat(node: NodeId, bits: u8, q: &[f64]) -> JointFeature {
        JointFeature {
            node,
            de: DeVector { bits, width: 6 },
            q: q.to_vec(),
        }
    }

    #[test]
    fn zero_params_give_half() {
        let cfg = small_cfg();
        let mut m = Model::new(cfg, 1).unwrap();
        m.params.fill(0.0);
        let s = m.new_store(5).unwrap();
        assert_eq!(m.forward_link(&s, 1, 2), 0.5);
        let e = [TemporalEdge::new(1, 2, 0.0)];
        assert!((m.loss_value(&s, &e, &[3]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn singleton_attention() {
        let m = Model::new(small_cfg(), 4).unwrap();
        let a = m.attention(&[feat(1, 1, &[0.3, -0.1, 2.0])]).unwrap();
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn duplicated_set_same_logit() {
        let m = Model::new(small_cfg(), 4).unwrap();
        let f = feat(1, 0b001001, &[0.3, -0.1, 2.0]);
        let one = m.readout(std::slice::from_ref(&f)).unwrap();
        let two = m.readout(&[f.clone(), f]).unwrap();
        assert!((one - two).abs() < 1e-12);
    }

    #[test]
    fn softmax_sums_to_one_and_permutation_invariant() {
        let m = Model::new(small_cfg(), 5).unwrap();
        let fs = vec![
            feat(1, 1, &[0.3, -0.1, 2.0]),
            feat(2, 8, &[1.3, 0.1, -2.0]),
            feat(7, 0b010010, &[0.0, 0.5, 0.5]),
        ];
        let a = m.attention(&fs).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.iter().all(|x| *x >= 0.0));
        let mut rev = fs.clone();
        rev.reverse();
        assert!((m.readout(&fs).unwrap() - m.readout(&rev).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mean_readout_weights() {
        let mut cfg = small_cfg();
        cfg.ablations.mean_readout = true;
        let m = Model::new(cfg, 5).unwrap();
        let fs = vec![feat(1, 1, &[0.3, -0.1, 2.0]), feat(2, 8, &[1.3, 0.1, -2.0]), feat(3, 2, &[0.0; 3])];
        assert_eq!(m.attention(&fs).unwrap(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn no_de_ignores_bits() {
        let mut cfg = small_cfg();
        cfg.ablations.no_de = true;
        let m = Model::new(cfg, 5).unwrap();
        let a = m.readout(&[feat(1, 1, &[0.3, -0.1, 2.0])]).unwrap();
        let b = m.readout(&[feat(1, 0b100010, &[0.3, -0.1, 2.0])]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_features_error() {
        let m = Model::new(small_cfg(), 5).unwrap();
        assert!(matches!(m.readout(&[]), Err(Error::EmptyFeatures)));
    }

    #[test]
    fn single_batch_has_no_recurrent_grad() {
        let m = Model::new(small_cfg(), 5).unwrap();
        let s = m.new_store(6).unwrap();
        let pos = [TemporalEdge { src: 1, dst: 2, t: 1.0, feat: vec![0.1, 0.2] }];
        let out = m.loss_batch(&s, &CommitLog::default(), &pos, &[3], 0).unwrap();
        let l = m.layout();
        for r in [&l.gru0_w, &l.gru0_u, &l.gru0_b, &l.gru1_w, &l.gru1_u, &l.gru1_b, &l.omega] {
            assert!(out.grad[r.clone()].iter().all(|g| *g == 0.0));
        }
        assert!(out.grad[l.outer2_w.clone()].iter().any(|g| *g != 0.0));
    }

    #[test]
    fn symmetric_fresh_store_scores_equal() {
        let m = Model::new(small_cfg(), 8).unwrap();
        let s = m.new_store(6).unwrap();
        assert_eq!(m.forward_link(&s, 1, 2), m.forward_link(&s, 1, 3));
    }
}
