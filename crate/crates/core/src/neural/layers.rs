//! Dense building blocks with hand-written backward passes. Weight matrices
//! are row-major `out x in` slices into the flat parameter vector.

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Interleaved `[cos(w_i t), sin(w_i t)]`.
pub fn t_encode(t: f64, omega: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * omega.len());
    for w in omega {
        let (s, c) = (w * t).sin_cos();
        out.push(c);
        out.push(s);
    }
    out
}

/// Accumulates `d loss / d omega` given `d loss / d encoding`.
pub fn t_encode_backward(t: f64, omega: &[f64], d_enc: &[f64], d_omega: &mut [f64]) {
    for (i, w) in omega.iter().enumerate() {
        let (s, c) = (w * t).sin_cos();
        d_omega[i] += d_enc[2 * i] * (-t * s) + d_enc[2 * i + 1] * (t * c);
    }
}

/// `y = W x + b`.
pub fn linear(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    debug_assert_eq!(w.len(), b.len() * n_in);
    b.iter()
        .enumerate()
        .map(|(o, bo)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            bo + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
        })
        .collect()
}

/// Backward of [`linear`]; `dx` may be `None` when the input is detached.
pub fn linear_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, g) in dy.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        db[o] += g;
        let row = &mut dw[o * n_in..(o + 1) * n_in];
        for (r, xi) in row.iter_mut().zip(x) {
            *r += g * xi;
        }
    }
    if let Some(dx) = dx {
        for (o, g) in dy.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let row = &w[o * n_in..(o + 1) * n_in];
            for (d, wi) in dx.iter_mut().zip(row) {
                *d += g * wi;
            }
        }
    }
}

/// GRU weights: `w` is `3H x I`, `u` is `3H x H`, `b` is `3H`, gate blocks
/// ordered update, reset, candidate.
#[derive(Clone, Copy)]
pub struct GruWeights<'a> {
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
}

pub struct GruGrads<'a> {
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruTrace {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub out: Vec<f64>,
}

fn row_dot(m: &[f64], row: usize, v: &[f64]) -> f64 {
    let n = v.len();
    m[row * n..(row + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn gru_forward(p: GruWeights, h: &[f64], x: &[f64]) -> GruTrace {
    let hd = h.len();
    let mut z = vec![0.0; hd];
    let mut r = vec![0.0; hd];
    for i in 0..hd {
        z[i] = sigmoid(row_dot(p.w, i, x) + row_dot(p.u, i, h) + p.b[i]);
        r[i] = sigmoid(row_dot(p.w, hd + i, x) + row_dot(p.u, hd + i, h) + p.b[hd + i]);
    }
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let mut n = vec![0.0; hd];
    let mut out = vec![0.0; hd];
    for i in 0..hd {
        let k = 2 * hd + i;
        n[i] = (row_dot(p.w, k, x) + row_dot(p.u, k, &rh) + p.b[k]).tanh();
        out[i] = (1.0 - z[i]) * h[i] + z[i] * n[i];
    }
    GruTrace { z, r, n, out }
}

pub fn gru_step(p: GruWeights, h: &[f64], x: &[f64]) -> Vec<f64> {
    gru_forward(p, h, x).out
}

fn add_outer(m: &mut [f64], row: usize, g: f64, v: &[f64]) {
    let n = v.len();
    for (a, b) in m[row * n..(row + 1) * n].iter_mut().zip(v) {
        *a += g * b;
    }
}

fn add_row_t(dst: &mut [f64], m: &[f64], row: usize, g: f64) {
    let n = dst.len();
    for (d, a) in dst.iter_mut().zip(&m[row * n..(row + 1) * n]) {
        *d += g * a;
    }
}

/// Backward of one GRU step. Returns `d loss / d x`; the gradient through
/// `h` is not propagated (cache states are detached).
pub fn gru_backward(
    p: GruWeights,
    g: &mut GruGrads,
    h: &[f64],
    x: &[f64],
    tr: &GruTrace,
    dout: &[f64],
) -> Vec<f64> {
    let hd = h.len();
    let mut dx = vec![0.0; x.len()];
    let rh: Vec<f64> = tr.r.iter().zip(h).map(|(a, b)| a * b).collect();
    let mut drh = vec![0.0; hd];
    let mut da_n = vec![0.0; hd];
    for i in 0..hd {
        let dn = dout[i] * tr.z[i];
        da_n[i] = dn * (1.0 - tr.n[i] * tr.n[i]);
        let k = 2 * hd + i;
        g.b[k] += da_n[i];
        add_outer(g.w, k, da_n[i], x);
        add_outer(g.u, k, da_n[i], &rh);
        add_row_t(&mut drh, p.u, k, da_n[i]);
        add_row_t(&mut dx, p.w, k, da_n[i]);
    }
    for i in 0..hd {
        let dz = dout[i] * (tr.n[i] - h[i]);
        let da_z = dz * tr.z[i] * (1.0 - tr.z[i]);
        let dr = drh[i] * h[i];
        let da_r = dr * tr.r[i] * (1.0 - tr.r[i]);
        for (k, da) in [(i, da_z), (hd + i, da_r)] {
            g.b[k] += da;
            add_outer(g.w, k, da, x);
            add_outer(g.u, k, da, h);
            add_row_t(&mut dx, p.w, k, da);
        }
    }
    dx
}

/// Linear replacement for the recurrent cell: `W_c x + U_c h + b_c` using the
/// candidate block of the GRU weights.
pub fn linear_cell(p: GruWeights, h: &[f64], x: &[f64]) -> Vec<f64> {
    let hd = h.len();
    (0..hd)
        .map(|i| {
            let k = 2 * hd + i;
            row_dot(p.w, k, x) + row_dot(p.u, k, h) + p.b[k]
        })
        .collect()
}

pub fn linear_cell_backward(
    p: GruWeights,
    g: &mut GruGrads,
    h: &[f64],
    x: &[f64],
    dout: &[f64],
) -> Vec<f64> {
    let hd = h.len();
    let mut dx = vec![0.0; x.len()];
    for i in 0..hd {
        let k = 2 * hd + i;
        g.b[k] += dout[i];
        add_outer(g.w, k, dout[i], x);
        add_outer(g.u, k, dout[i], h);
        add_row_t(&mut dx, p.w, k, dout[i]);
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    #[test]
    fn t_encode_at_zero() {
        assert_eq!(t_encode(0.0, &[1.0, 0.1, 0.01]), vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn t_encode_unit_circle() {
        let e = t_encode(123.456, &[1.0, 0.3, 1e-3, 7.0]);
        for p in e.chunks(2) {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn t_encode_grad_matches_fd() {
        let omega = [0.7, 0.05, 1.3];
        let t = 3.7;
        let weights = [0.3, -1.2, 0.8, 0.5, -0.4, 1.1];
        let f = |om: &[f64]| -> f64 {
            t_encode(t, om).iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let mut d = [0.0; 3];
        t_encode_backward(t, &omega, &weights, &mut d);
        for i in 0..3 {
            let mut p = omega;
            let mut m = omega;
            p[i] += 1e-5;
            m[i] -= 1e-5;
            let num = (f(&p) - f(&m)) / 2e-5;
            assert!(rel_err(d[i], num) < 1e-5, "{i}: {} vs {num}", d[i]);
        }
    }

    #[test]
    fn gru_zero_weights_halves_state() {
        let (hd, id) = (3, 4);
        let w = vec![0.0; 3 * hd * id];
        let u = vec![0.0; 3 * hd * hd];
        let b = vec![0.0; 3 * hd];
        let p = GruWeights { w: &w, u: &u, b: &b };
        let out = gru_step(p, &[2.0, -4.0, 0.5], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(out, vec![1.0, -2.0, 0.25]);
    }

    #[test]
    fn gru_output_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (hd, id) = (4, 5);
            let w: Vec<f64> = (0..3 * hd * id).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let u: Vec<f64> = (0..3 * hd * hd).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..3 * hd).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let h: Vec<f64> = (0..hd).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let x = rand_vec(&mut rng, id);
            let out = gru_step(GruWeights { w: &w, u: &u, b: &b }, &h, &x);
            for (o, hi) in out.iter().zip(&h) {
                assert!(o.abs() <= hi.abs().max(1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn gru_grad_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (hd, id) = (3, 4);
        let mut w = rand_vec(&mut rng, 3 * hd * id);
        let mut u = rand_vec(&mut rng, 3 * hd * hd);
        let mut b = rand_vec(&mut rng, 3 * hd);
        let h = rand_vec(&mut rng, hd);
        let x = rand_vec(&mut rng, id);
        let probe = rand_vec(&mut rng, hd);
        let loss = |w: &[f64], u: &[f64], b: &[f64], x: &[f64]| -> f64 {
            gru_step(GruWeights { w, u, b }, &h, x)
                .iter()
                .zip(&probe)
                .map(|(a, c)| a * c)
                .sum()
        };
        let tr = gru_forward(GruWeights { w: &w, u: &u, b: &b }, &h, &x);
        let (mut gw, mut gu, mut gb) = (vec![0.0; w.len()], vec![0.0; u.len()], vec![0.0; b.len()]);
        let dx = gru_backward(
            GruWeights { w: &w, u: &u, b: &b },
            &mut GruGrads { w: &mut gw, u: &mut gu, b: &mut gb },
            &h,
            &x,
            &tr,
            &probe,
        );
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..w.len() {
            w[i] += eps;
            let a = loss(&w, &u, &b, &x);
            w[i] -= 2.0 * eps;
            let c = loss(&w, &u, &b, &x);
            w[i] += eps;
            worst = worst.max(rel_err(gw[i], (a - c) / (2.0 * eps)));
        }
        for i in 0..u.len() {
            u[i] += eps;
            let a = loss(&w, &u, &b, &x);
            u[i] -= 2.0 * eps;
            let c = loss(&w, &u, &b, &x);
            u[i] += eps;
            worst = worst.max(rel_err(gu[i], (a - c) / (2.0 * eps)));
        }
        for i in 0..b.len() {
            b[i] += eps;
            let a = loss(&w, &u, &b, &x);
            b[i] -= 2.0 * eps;
            let c = loss(&w, &u, &b, &x);
            b[i] += eps;
            worst = worst.max(rel_err(gb[i], (a - c) / (2.0 * eps)));
        }
        let mut xm = x.clone();
        for i in 0..x.len() {
            xm[i] += eps;
            let a = loss(&w, &u, &b, &xm);
            xm[i] -= 2.0 * eps;
            let c = loss(&w, &u, &b, &xm);
            xm[i] += eps;
            worst = worst.max(rel_err(dx[i], (a - c) / (2.0 * eps)));
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn linear_backward_matches_definition() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [0.5, -0.5];
        let x = [1.0, 0.0, -1.0];
        assert_eq!(linear(&w, &b, &x), vec![-1.5, -2.5]);
        let (mut dw, mut db, mut dx) = ([0.0; 6], [0.0; 2], [0.0; 3]);
        linear_backward(&w, &x, &[1.0, 2.0], &mut dw, &mut db, Some(&mut dx));
        assert_eq!(db, [1.0, 2.0]);
        assert_eq!(dw, [1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
        assert_eq!(dx, [9.0, 12.0, 15.0]);
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
