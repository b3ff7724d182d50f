use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;

/// Offsets of every named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub omega: Range<usize>,
    pub gru0_w: Range<usize>,
    pub gru0_u: Range<usize>,
    pub gru0_b: Range<usize>,
    pub gru1_w: Range<usize>,
    pub gru1_u: Range<usize>,
    pub gru1_b: Range<usize>,
    pub proj_w: Range<usize>,
    pub proj_b: Range<usize>,
    pub inner1_w: Range<usize>,
    pub inner1_b: Range<usize>,
    pub inner2_w: Range<usize>,
    pub inner2_b: Range<usize>,
    pub attn: Range<usize>,
    pub outer1_w: Range<usize>,
    pub outer1_b: Range<usize>,
    pub outer2_w: Range<usize>,
    pub outer2_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let c = cfg.cache();
        let (d0, f, h) = (c.d0, c.f, cfg.hidden);
        let input = cfg.rnn_input_width();
        let feat = c.de_width() + f;
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let omega = take(cfg.d_t / 2);
        let gru0_w = take(3 * d0 * input);
        let gru0_u = take(3 * d0 * d0);
        let gru0_b = take(3 * d0);
        let gru1_w = take(3 * f * input);
        let gru1_u = take(3 * f * f);
        let gru1_b = take(3 * f);
        let proj_w = take(f * d0);
        let proj_b = take(f);
        let inner1_w = take(h * feat);
        let inner1_b = take(h);
        let inner2_w = take(h * h);
        let inner2_b = take(h);
        let attn = take(h);
        let outer1_w = take(h * h);
        let outer1_b = take(h);
        let outer2_w = take(h);
        let outer2_b = take(1);
        Self {
            omega,
            gru0_w,
            gru0_u,
            gru0_b,
            gru1_w,
            gru1_u,
            gru1_b,
            proj_w,
            proj_b,
            inner1_w,
            inner1_b,
            inner2_w,
            inner2_b,
            attn,
            outer1_w,
            outer1_b,
            outer2_w,
            outer2_b,
            total: at,
        }
    }

    /// `(name, range)` for every tensor, in storage order.
    pub fn tensors(&self) -> Vec<(&'static str, Range<usize>)> {
        vec![
            ("omega", self.omega.clone()),
            ("gru0_w", self.gru0_w.clone()),
            ("gru0_u", self.gru0_u.clone()),
            ("gru0_b", self.gru0_b.clone()),
            ("gru1_w", self.gru1_w.clone()),
            ("gru1_u", self.gru1_u.clone()),
            ("gru1_b", self.gru1_b.clone()),
            ("proj_w", self.proj_w.clone()),
            ("proj_b", self.proj_b.clone()),
            ("inner1_w", self.inner1_w.clone()),
            ("inner1_b", self.inner1_b.clone()),
            ("inner2_w", self.inner2_w.clone()),
            ("inner2_b", self.inner2_b.clone()),
            ("attn", self.attn.clone()),
            ("outer1_w", self.outer1_w.clone()),
            ("outer1_b", self.outer1_b.clone()),
            ("outer2_w", self.outer2_w.clone()),
            ("outer2_b", self.outer2_b.clone()),
        ]
    }
}

/// Fan-in uniform init for weights and biases; geometric frequency ladder
/// `1 / 10^(2i / d_t)` for the time encoding.
pub fn init_params(cfg: &ModelConfig, layout: &Layout, seed: u64) -> Vec<f64> {
    let c = cfg.cache();
    let input = cfg.rnn_input_width();
    let feat = c.de_width() + c.f;
    let h = cfg.hidden;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; layout.total];
    for (i, w) in p[layout.omega.clone()].iter_mut().enumerate() {
        *w = 1.0 / 10f64.powf(2.0 * i as f64 / cfg.d_t as f64);
    }
    let fan_in = |name: &str| -> usize {
        match name {
            "gru0_w" | "gru0_b" | "gru1_w" | "gru1_b" => input,
            "gru0_u" => c.d0,
            "gru1_u" => c.f,
            "proj_w" | "proj_b" => c.d0,
            "inner1_w" | "inner1_b" => feat,
            _ => h,
        }
    };
    for (name, r) in layout.tensors() {
        if name == "omega" {
            continue;
        }
        let bound = 1.0 / (fan_in(name).max(1) as f64).sqrt();
        for x in &mut p[r] {
            *x = rng.gen_range(-bound..=bound);
        }
    }
    p
}
