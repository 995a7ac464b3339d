//! Forward and backward passes of the stacked bidirectional recurrent layers.
//!
//! Weights are copied into a [`Work`] buffer in the compute precision at the
//! start of each pass, together with transposed copies so every inner loop
//! is a contiguous axpy.

use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

use super::layout::{CellSlots, Layout};
use super::CellKind;

pub trait Real: Float + AddAssign + SubAssign + MulAssign + Default + Send + Sync + std::fmt::Debug + 'static {
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
}

#[inline]
fn axpy<F: Real>(a: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn transpose<F: Real>(m: &[F], rows: usize, cols: usize) -> Vec<F> {
    let mut t = vec![F::zero(); m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

pub(crate) struct DirWork<F> {
    /// Row-major `[gates·H, input]`.
    w_ih: Vec<F>,
    /// Row-major `[input, gates·H]`.
    w_ih_t: Vec<F>,
    w_hh: Vec<F>,
    w_hh_t: Vec<F>,
    b_ih: Vec<F>,
    b_hh: Vec<F>,
    input: usize,
}

pub(crate) struct Work<F> {
    kind: CellKind,
    hidden: usize,
    gates: usize,
    z_w: Vec<F>,
    z_b: Vec<F>,
    layers: Vec<[DirWork<F>; 2]>,
    out_w: Vec<F>,
    out_b: Vec<F>,
}

impl<F: Real> Work<F> {
    pub(crate) fn new(layout: &Layout, params: &[f64]) -> Self {
        let conv = |r: std::ops::Range<usize>| params[r].iter().map(|&v| F::of(v)).collect::<Vec<F>>();
        let h = layout.hidden;
        let g = layout.gates();
        let dir = |s: &CellSlots| {
            let w_ih = conv(s.w_ih.clone());
            let w_hh = conv(s.w_hh.clone());
            DirWork {
                w_ih_t: transpose(&w_ih, g * h, s.input),
                w_hh_t: transpose(&w_hh, g * h, h),
                w_ih,
                w_hh,
                b_ih: conv(s.b_ih.clone()),
                b_hh: s.b_hh.clone().map(conv).unwrap_or_default(),
                input: s.input,
            }
        };
        Self {
            kind: layout.kind,
            hidden: h,
            gates: g,
            z_w: conv(layout.z_w.clone()),
            z_b: conv(layout.z_b.clone()),
            layers: layout.cells.iter().map(|[f, b]| [dir(f), dir(b)]).collect(),
            out_w: conv(layout.out_w.clone()),
            out_b: conv(layout.out_b.clone()),
        }
    }
}

struct DirTape<F> {
    /// Post-activation gates per time index (`[i,f,g,o]` or `[r,u,n]`).
    gates: Vec<F>,
    /// LSTM: cell state. GRU: `W_hn h + b_hn`.
    aux: Vec<F>,
    /// LSTM only: tanh of the cell state.
    tanh_c: Vec<F>,
    h: Vec<F>,
}

struct LayerTape<F> {
    input: Vec<F>,
    dirs: [DirTape<F>; 2],
}

pub(crate) struct Tape<F> {
    work: Work<F>,
    z_norm: F,
    pub(crate) len: usize,
    layers: Vec<LayerTape<F>>,
    /// Output of the last layer, `[T, 2H]`.
    top: Vec<F>,
}

fn run_direction<F: Real>(w: &Work<F>, d: &DirWork<F>, x: &[F], len: usize, reverse: bool) -> DirTape<F> {
    let h = w.hidden;
    let gh = w.gates * h;
    let mut pre_in = vec![F::zero(); len * gh];
    for t in 0..len {
        let row = &mut pre_in[t * gh..(t + 1) * gh];
        row.copy_from_slice(&d.b_ih);
        for (k, &xv) in x[t * d.input..(t + 1) * d.input].iter().enumerate() {
            axpy(xv, &d.w_ih_t[k * gh..(k + 1) * gh], row);
        }
    }
    let mut tape = DirTape {
        gates: vec![F::zero(); len * gh],
        aux: vec![F::zero(); len * h],
        tanh_c: if w.kind == CellKind::BiLstm { vec![F::zero(); len * h] } else { Vec::new() },
        h: vec![F::zero(); len * h],
    };
    let mut h_prev = vec![F::zero(); h];
    let mut c_prev = vec![F::zero(); h];
    let mut rec = vec![F::zero(); gh];
    for step in 0..len {
        let t = if reverse { len - 1 - step } else { step };
        match w.kind {
            CellKind::BiLstm => {
                let pre = &mut tape.gates[t * gh..(t + 1) * gh];
                pre.copy_from_slice(&pre_in[t * gh..(t + 1) * gh]);
                for (j, &hv) in h_prev.iter().enumerate() {
                    axpy(hv, &d.w_hh_t[j * gh..(j + 1) * gh], pre);
                }
                for j in 0..h {
                    let i = sigmoid(pre[j]);
                    let f = sigmoid(pre[h + j]);
                    let g = pre[2 * h + j].tanh();
                    let o = sigmoid(pre[3 * h + j]);
                    pre[j] = i;
                    pre[h + j] = f;
                    pre[2 * h + j] = g;
                    pre[3 * h + j] = o;
                    let c = f * c_prev[j] + i * g;
                    let tc = c.tanh();
                    tape.aux[t * h + j] = c;
                    tape.tanh_c[t * h + j] = tc;
                    c_prev[j] = c;
                    h_prev[j] = o * tc;
                }
            }
            CellKind::BiGru => {
                rec.copy_from_slice(&d.b_hh);
                for (j, &hv) in h_prev.iter().enumerate() {
                    axpy(hv, &d.w_hh_t[j * gh..(j + 1) * gh], &mut rec);
                }
                let pin = &pre_in[t * gh..(t + 1) * gh];
                let gates = &mut tape.gates[t * gh..(t + 1) * gh];
                for j in 0..h {
                    let r = sigmoid(pin[j] + rec[j]);
                    let u = sigmoid(pin[h + j] + rec[h + j]);
                    let hn = rec[2 * h + j];
                    let n = (pin[2 * h + j] + r * hn).tanh();
                    gates[j] = r;
                    gates[h + j] = u;
                    gates[2 * h + j] = n;
                    tape.aux[t * h + j] = hn;
                    h_prev[j] = (F::one() - u) * n + u * h_prev[j];
                }
            }
        }
        tape.h[t * h..(t + 1) * h].copy_from_slice(&h_prev);
    }
    tape
}

/// Runs the network on `features` (`[T, 4]`, already normalized). Returns the
/// `[T, 4]` outputs and the tape needed by [`backward`].
pub(crate) fn forward<F: Real>(work: Work<F>, features: &[F], z_norm: F) -> (Vec<F>, Tape<F>) {
    let len = features.len() / 4;
    let h = work.hidden;
    let e = work.z_b.len();
    let emb: Vec<F> = work.z_w.iter().zip(&work.z_b).map(|(&w, &b)| w * z_norm + b).collect();
    let mut input = Vec::with_capacity(len * (4 + e));
    for t in 0..len {
        input.extend_from_slice(&features[t * 4..t * 4 + 4]);
        input.extend_from_slice(&emb);
    }
    let mut layers = Vec::with_capacity(work.layers.len());
    for pair in &work.layers {
        let fwd = run_direction(&work, &pair[0], &input, len, false);
        let bwd = run_direction(&work, &pair[1], &input, len, true);
        let mut next = Vec::with_capacity(len * 2 * h);
        for t in 0..len {
            next.extend_from_slice(&fwd.h[t * h..(t + 1) * h]);
            next.extend_from_slice(&bwd.h[t * h..(t + 1) * h]);
        }
        layers.push(LayerTape { input, dirs: [fwd, bwd] });
        input = next;
    }
    let top = input;
    let mut out = vec![F::zero(); len * 4];
    for t in 0..len {
        let o = &top[t * 2 * h..(t + 1) * 2 * h];
        for k in 0..4 {
            let row = &work.out_w[k * 2 * h..(k + 1) * 2 * h];
            let mut acc = work.out_b[k];
            for (&a, &b) in row.iter().zip(o) {
                acc += a * b;
            }
            out[t * 4 + k] = acc;
        }
    }
    (out, Tape { work, z_norm, len, layers, top })
}

struct DirGrads<F> {
    w_ih_t: Vec<F>,
    w_hh_t: Vec<F>,
    b_ih: Vec<F>,
    b_hh: Vec<F>,
}

/// Backpropagation through time for one direction. Adds the gradient with
/// respect to the layer input into `dx`.
fn backward_direction<F: Real>(
    w: &Work<F>,
    d: &DirWork<F>,
    tape: &DirTape<F>,
    x: &[F],
    dh_above: &[F],
    reverse: bool,
    dx: &mut [F],
) -> DirGrads<F> {
    let len = x.len() / d.input;
    let h = w.hidden;
    let gh = w.gates * h;
    let mut g = DirGrads {
        w_ih_t: vec![F::zero(); d.input * gh],
        w_hh_t: vec![F::zero(); h * gh],
        b_ih: vec![F::zero(); gh],
        b_hh: vec![F::zero(); if w.kind == CellKind::BiGru { gh } else { 0 }],
    };
    let mut dpre_in = vec![F::zero(); len * gh];
    let mut dh_next = vec![F::zero(); h];
    let mut dc_next = vec![F::zero(); h];
    let mut dpre_hh = vec![F::zero(); gh];
    let zeros = vec![F::zero(); h];
    let one = F::one();
    for step in (0..len).rev() {
        let t = if reverse { len - 1 - step } else { step };
        let prev = if step == 0 {
            None
        } else if reverse {
            Some(t + 1)
        } else {
            Some(t - 1)
        };
        let h_prev = prev.map_or(&zeros[..], |p| &tape.h[p * h..(p + 1) * h]);
        let gates = &tape.gates[t * gh..(t + 1) * gh];
        let dpre = &mut dpre_in[t * gh..(t + 1) * gh];
        match w.kind {
            CellKind::BiLstm => {
                let c_prev = prev.map_or(&zeros[..], |p| &tape.aux[p * h..(p + 1) * h]);
                for j in 0..h {
                    let dh = dh_above[t * h + j] + dh_next[j];
                    let (i, f, gg, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    let tc = tape.tanh_c[t * h + j];
                    let dc = dh * o * (one - tc * tc) + dc_next[j];
                    dpre[j] = dc * gg * i * (one - i);
                    dpre[h + j] = dc * c_prev[j] * f * (one - f);
                    dpre[2 * h + j] = dc * i * (one - gg * gg);
                    dpre[3 * h + j] = dh * tc * o * (one - o);
                    dc_next[j] = dc * f;
                }
                dpre_hh.copy_from_slice(dpre);
                dh_next.iter_mut().for_each(|v| *v = F::zero());
            }
            CellKind::BiGru => {
                for j in 0..h {
                    let dh = dh_above[t * h + j] + dh_next[j];
                    let (r, u, n) = (gates[j], gates[h + j], gates[2 * h + j]);
                    let hn = tape.aux[t * h + j];
                    let dn = dh * (one - u) * (one - n * n);
                    let du = dh * (h_prev[j] - n) * u * (one - u);
                    let dr = dn * hn * r * (one - r);
                    dpre[j] = dr;
                    dpre[h + j] = du;
                    dpre[2 * h + j] = dn;
                    dpre_hh[j] = dr;
                    dpre_hh[h + j] = du;
                    dpre_hh[2 * h + j] = dn * r;
                    dh_next[j] = dh * u;
                }
                for (b, &v) in g.b_hh.iter_mut().zip(&dpre_hh) {
                    *b += v;
                }
            }
        }
        for (j, &hv) in h_prev.iter().enumerate() {
            axpy(hv, &dpre_hh, &mut g.w_hh_t[j * gh..(j + 1) * gh]);
        }
        for (r, &dv) in dpre_hh.iter().enumerate() {
            axpy(dv, &d.w_hh[r * h..(r + 1) * h], &mut dh_next);
        }
    }
    for t in 0..len {
        let dpre = &dpre_in[t * gh..(t + 1) * gh];
        for (b, &v) in g.b_ih.iter_mut().zip(dpre) {
            *b += v;
        }
        let xt = &x[t * d.input..(t + 1) * d.input];
        for (k, &xv) in xt.iter().enumerate() {
            axpy(xv, dpre, &mut g.w_ih_t[k * gh..(k + 1) * gh]);
        }
        let dxt = &mut dx[t * d.input..(t + 1) * d.input];
        for (r, &dv) in dpre.iter().enumerate() {
            axpy(dv, &d.w_ih[r * d.input..(r + 1) * d.input], dxt);
        }
    }
    g
}

fn add_transposed<F: Real>(dst: &mut [f64], src_t: &[F], rows: usize, cols: usize) {
    // src_t is [cols, rows]; dst is [rows, cols]
    for r in 0..rows {
        for c in 0..cols {
            dst[r * cols + c] += src_t[c * rows + r].f64();
        }
    }
}

fn add<F: Real>(dst: &mut [f64], src: &[F]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s.f64());
}

/// Accumulates parameter gradients for output gradient `dy` (`[T, 4]`).
pub(crate) fn backward<F: Real>(tape: &Tape<F>, layout: &Layout, dy: &[F], grads: &mut [f64]) {
    let w = &tape.work;
    let h = w.hidden;
    let len = tape.len;
    let gh = w.gates * h;

    let mut d_top = vec![F::zero(); len * 2 * h];
    let mut d_out_w = vec![F::zero(); 4 * 2 * h];
    let mut d_out_b = [F::zero(); 4];
    for t in 0..len {
        let o = &tape.top[t * 2 * h..(t + 1) * 2 * h];
        let dt = &mut d_top[t * 2 * h..(t + 1) * 2 * h];
        for k in 0..4 {
            let g = dy[t * 4 + k];
            d_out_b[k] += g;
            axpy(g, o, &mut d_out_w[k * 2 * h..(k + 1) * 2 * h]);
            axpy(g, &w.out_w[k * 2 * h..(k + 1) * 2 * h], dt);
        }
    }
    add(&mut grads[layout.out_w.clone()], &d_out_w);
    add(&mut grads[layout.out_b.clone()], &d_out_b);

    let mut d_above = d_top;
    for (l, layer) in tape.layers.iter().enumerate().rev() {
        let input_dim = w.layers[l][0].input;
        let mut dx = vec![F::zero(); len * input_dim];
        for (dir, reverse) in [(0usize, false), (1usize, true)] {
            let dh: Vec<F> = (0..len)
                .flat_map(|t| d_above[t * 2 * h + dir * h..t * 2 * h + (dir + 1) * h].iter().copied())
                .collect();
            let g = backward_direction(w, &w.layers[l][dir], &layer.dirs[dir], &layer.input, &dh, reverse, &mut dx);
            let slots = &layout.cells[l][dir];
            add_transposed(&mut grads[slots.w_ih.clone()], &g.w_ih_t, gh, input_dim);
            add_transposed(&mut grads[slots.w_hh.clone()], &g.w_hh_t, gh, h);
            add(&mut grads[slots.b_ih.clone()], &g.b_ih);
            if let Some(r) = &slots.b_hh {
                add(&mut grads[r.clone()], &g.b_hh);
            }
        }
        d_above = dx;
    }

    // layer-0 input: 4 signal features followed by the z embedding
    let e = w.z_b.len();
    let mut d_emb = vec![0.0f64; e];
    for t in 0..len {
        for (k, v) in d_emb.iter_mut().enumerate() {
            *v += d_above[t * (4 + e) + 4 + k].f64();
        }
    }
    let z = tape.z_norm.f64();
    for (k, &g) in d_emb.iter().enumerate() {
        grads[layout.z_w.start + k] += g * z;
        grads[layout.z_b.start + k] += g;
    }
}
