//! Batched sequence classifier: one recurrent layer (optionally
//! bidirectional), last-step readout, linear head, softmax cross-entropy and
//! full backpropagation through time.
//!
//! Activations are laid out time-major, `[t][batch][unit]`, so every
//! timestep is a pair of row-major GEMMs.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{CellKind, RecurrentParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequence::SequenceSample;

/// Summed loss and correct-prediction count over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub loss_sum: f64,
    pub correct: usize,
    pub count: usize,
}

/// Time-major input block `[t][b][f]`.
struct Inputs<S> {
    t_len: usize,
    batch: usize,
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> Inputs<S> {
    fn gather(p: &RecurrentParams<S>, batch: &[&SequenceSample<S>]) -> Result<Self> {
        let first = batch.first().ok_or_else(|| Error::domain("empty batch"))?;
        let (t_len, dim) = (first.timesteps, first.feature_dim);
        if dim != p.input_dim() {
            return Err(Error::dim("sequence feature dim", p.input_dim(), dim));
        }
        for s in batch {
            if s.timesteps != t_len || s.feature_dim != dim || s.values.len() != t_len * dim {
                return Err(Error::domain("batch members disagree on sequence shape"));
            }
            if s.label as usize >= p.classes() {
                return Err(Error::dim("label bound", p.classes(), s.label as usize));
            }
        }
        let b = batch.len();
        let mut data = vec![S::ZERO; t_len * b * dim];
        for (bi, s) in batch.iter().enumerate() {
            for t in 0..t_len {
                data[(t * b + bi) * dim..(t * b + bi + 1) * dim].copy_from_slice(s.step(t));
            }
        }
        Ok(Inputs {
            t_len,
            batch: b,
            dim,
            data,
        })
    }

    fn at(&self, t: usize) -> &[S] {
        let n = self.batch * self.dim;
        &self.data[t * n..(t + 1) * n]
    }
}

/// Forward activations of one direction, indexed by processing step `s`
/// (time `T-1-s` for the backward direction). With `keep` every step is
/// stored for BPTT, and `gates` holds the post-activation gate block of each
/// step; otherwise two rolling state slots are used.
struct Tape<S> {
    keep: bool,
    block: usize,
    hs: Vec<S>,
    cs: Vec<S>,
    gates: Vec<S>,
}

impl<S: Scalar> Tape<S> {
    fn slot(&self, s: usize) -> usize {
        if self.keep {
            s
        } else {
            s % 2
        }
    }

    fn h(&self, s: usize) -> &[S] {
        let o = self.slot(s) * self.block;
        &self.hs[o..o + self.block]
    }
}

/// Returns `(&buf[a], &mut buf[b])` for two distinct equal-size blocks.
fn split_blocks<S>(buf: &mut [S], a: usize, b: usize, len: usize) -> (&[S], &mut [S]) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = buf.split_at_mut(b * len);
        (&lo[a * len..(a + 1) * len], &mut hi[..len])
    } else {
        let (lo, hi) = buf.split_at_mut(a * len);
        (&hi[..len], &mut lo[b * len..(b + 1) * len])
    }
}

fn time_index(dir: usize, s: usize, t_len: usize) -> usize {
    if dir == 0 {
        s
    } else {
        t_len - 1 - s
    }
}

/// Inputs of steps `s0..s1` in processing order, `[s][b][f]`.
fn inputs_in_step_order<S: Scalar>(x: &Inputs<S>, dir: usize, s0: usize, s1: usize) -> Vec<S> {
    if dir == 0 {
        let n = x.batch * x.dim;
        return x.data[s0 * n..s1 * n].to_vec();
    }
    let mut out = Vec::with_capacity((s1 - s0) * x.batch * x.dim);
    for s in s0..s1 {
        out.extend_from_slice(x.at(time_index(dir, s, x.t_len)));
    }
    out
}

/// Writes `bias + W_x x_s` for steps `s0..s1` into `out` (`[s][b][G]`).
fn project_inputs<S: Scalar>(p: &RecurrentParams<S>, dir: usize, x: &Inputs<S>, s0: usize, s1: usize, out: &mut [S]) {
    let g = p.kind().gates() * p.hidden_dim();
    let bias = p.bias(dir);
    for row in out.chunks_exact_mut(g) {
        row.copy_from_slice(bias);
    }
    let xs = inputs_in_step_order(x, dir, s0, s1);
    S::gemm((s1 - s0) * x.batch, x.dim, g, S::ONE, &xs, false, p.w_x(dir), true, S::ONE, out);
}

/// Element budget of the input-projection window used without a tape.
const PROJECTION_WINDOW: usize = 1 << 18;

fn run_direction<S: Scalar>(
    p: &RecurrentParams<S>,
    dir: usize,
    x: &Inputs<S>,
    keep: bool,
) -> Tape<S> {
    let (b, m) = (x.batch, p.hidden_dim());
    let kind = p.kind();
    let g = kind.gates() * m;
    let slots = if keep { x.t_len + 1 } else { 2 };
    let lstm = kind == CellKind::Lstm;
    let mut tape = Tape {
        keep,
        block: b * m,
        hs: vec![S::ZERO; slots * b * m],
        cs: if lstm { vec![S::ZERO; slots * b * m] } else { Vec::new() },
        gates: if keep { vec![S::ZERO; x.t_len * b * g] } else { Vec::new() },
    };
    let window = if keep {
        x.t_len
    } else {
        (PROJECTION_WINDOW / (b * g)).clamp(1, x.t_len)
    };
    let mut scratch = if keep { Vec::new() } else { vec![S::ZERO; window * b * g] };
    let w_h = p.w_h(dir);

    for s0 in (0..x.t_len).step_by(window) {
        let s1 = (s0 + window).min(x.t_len);
        let zbuf = if keep {
            &mut tape.gates[..]
        } else {
            &mut scratch[..(s1 - s0) * b * g]
        };
        project_inputs(p, dir, x, s0, s1, zbuf);
        for s in s0..s1 {
            let zo = if keep { s } else { s - s0 } * b * g;
            let z = &mut zbuf[zo..zo + b * g];
            let (prev, cur) = if keep { (s, s + 1) } else { (s % 2, (s + 1) % 2) };
            let block = b * m;
            let (h_prev, h_cur) = split_blocks(&mut tape.hs, prev, cur, block);
            match kind {
                CellKind::Rnn => {
                    S::gemm(b, m, g, S::ONE, h_prev, false, w_h, true, S::ONE, z);
                    for (h, &a) in h_cur.iter_mut().zip(z.iter()) {
                        *h = a.tanh();
                    }
                }
                CellKind::IndRnn => {
                    for ((hc, hp), zr) in h_cur.chunks_exact_mut(m).zip(h_prev.chunks_exact(m)).zip(z.chunks_exact(m)) {
                        for u in 0..m {
                            hc[u] = (zr[u] + w_h[u] * hp[u]).max(S::ZERO);
                        }
                    }
                }
                CellKind::Lstm => {
                    S::gemm(b, m, g, S::ONE, h_prev, false, w_h, true, S::ONE, z);
                    let (c_prev, c_cur) = split_blocks(&mut tape.cs, prev, cur, block);
                    for (bi, zr) in z.chunks_exact_mut(g).enumerate() {
                        let (ifg, rest) = zr.split_at_mut(2 * m);
                        let (gg, o) = rest.split_at_mut(m);
                        for v in ifg.iter_mut() {
                            *v = v.sigmoid();
                        }
                        for v in gg.iter_mut() {
                            *v = v.tanh();
                        }
                        for v in o.iter_mut() {
                            *v = v.sigmoid();
                        }
                        let (i, fg) = ifg.split_at(m);
                        let cp = &c_prev[bi * m..(bi + 1) * m];
                        let cc = &mut c_cur[bi * m..(bi + 1) * m];
                        let hc = &mut h_cur[bi * m..(bi + 1) * m];
                        for u in 0..m {
                            let c = fg[u] * cp[u] + i[u] * gg[u];
                            cc[u] = c;
                            hc[u] = o[u] * c.tanh();
                        }
                    }
                }
            }
        }
    }
    tape
}

/// BPTT through one direction, accumulating into `grad`. Consumes the tape:
/// each step's gate block is overwritten with its pre-activation gradient,
/// and the weight gradients are then formed with one GEMM over all steps.
fn backprop_direction<S: Scalar>(
    p: &RecurrentParams<S>,
    dir: usize,
    x: &Inputs<S>,
    mut tape: Tape<S>,
    mut dh: Vec<S>,
    grad: &mut RecurrentParams<S>,
) {
    let (b, m) = (x.batch, p.hidden_dim());
    let kind = p.kind();
    let g = kind.gates() * m;
    let w_h = p.w_h(dir);
    let mut dc = vec![S::ZERO; if kind == CellKind::Lstm { b * m } else { 0 }];

    for s in (0..x.t_len).rev() {
        let (h_all, gates) = (&tape.hs, &mut tape.gates);
        let h_prev = &h_all[s * b * m..(s + 1) * b * m];
        let h_cur = &h_all[(s + 1) * b * m..(s + 2) * b * m];
        let da = &mut gates[s * b * g..(s + 1) * b * g];
        match kind {
            CellKind::Rnn => {
                for ((d, &dhv), &h) in da.iter_mut().zip(&dh).zip(h_cur) {
                    *d = dhv * (S::ONE - h * h);
                }
            }
            CellKind::IndRnn => {
                for ((d, &dhv), &h) in da.iter_mut().zip(&dh).zip(h_cur) {
                    *d = if h > S::ZERO { dhv } else { S::ZERO };
                }
                let gw = grad.w_h_mut(dir);
                for (dr, hp) in da.chunks_exact(m).zip(h_prev.chunks_exact(m)) {
                    for u in 0..m {
                        gw[u] += dr[u] * hp[u];
                    }
                }
            }
            CellKind::Lstm => {
                let c_cur = &tape.cs[(s + 1) * b * m..(s + 2) * b * m];
                let c_prev = &tape.cs[s * b * m..(s + 1) * b * m];
                for (bi, dr) in da.chunks_exact_mut(g).enumerate() {
                    let (ifg, rest) = dr.split_at_mut(2 * m);
                    let (i, fg) = ifg.split_at_mut(m);
                    let (gg, o) = rest.split_at_mut(m);
                    let k0 = bi * m;
                    for u in 0..m {
                        let k = k0 + u;
                        let (iv, fv, gv, ov) = (i[u], fg[u], gg[u], o[u]);
                        let tc = c_cur[k].tanh();
                        let dhv = dh[k];
                        let dcv = dc[k] + dhv * ov * (S::ONE - tc * tc);
                        i[u] = dcv * gv * iv * (S::ONE - iv);
                        fg[u] = dcv * c_prev[k] * fv * (S::ONE - fv);
                        gg[u] = dcv * iv * (S::ONE - gv * gv);
                        o[u] = dhv * tc * ov * (S::ONE - ov);
                        dc[k] = dcv * fv;
                    }
                }
            }
        }
        if s == 0 {
            break;
        }
        let da = &tape.gates[s * b * g..(s + 1) * b * g];
        match kind {
            CellKind::IndRnn => {
                for (d, dr) in dh.chunks_exact_mut(m).zip(da.chunks_exact(m)) {
                    for u in 0..m {
                        d[u] = dr[u] * w_h[u];
                    }
                }
            }
            _ => S::gemm(b, g, m, S::ONE, da, false, w_h, false, S::ZERO, &mut dh),
        }
    }

    let rows = x.t_len * b;
    let da_all = &tape.gates[..rows * g];
    let xs = inputs_in_step_order(x, dir, 0, x.t_len);
    S::gemm(g, rows, x.dim, S::ONE, da_all, true, &xs, false, S::ONE, grad.w_x_mut(dir));
    if kind != CellKind::IndRnn {
        let hs = &tape.hs[..rows * m];
        S::gemm(g, rows, m, S::ONE, da_all, true, hs, false, S::ONE, grad.w_h_mut(dir));
    }
    let gb = grad.bias_mut(dir);
    for row in da_all.chunks_exact(g) {
        for (acc, &v) in gb.iter_mut().zip(row) {
            *acc += v;
        }
    }
}

/// Concatenated last-step states `[b][dir·M]`.
fn readout<S: Scalar>(p: &RecurrentParams<S>, tapes: &[Tape<S>], t_len: usize, b: usize) -> Vec<S> {
    let m = p.hidden_dim();
    let hw = m * tapes.len();
    let mut feat = vec![S::ZERO; b * hw];
    for (d, tape) in tapes.iter().enumerate() {
        let last = tape.h(t_len);
        for bi in 0..b {
            feat[bi * hw + d * m..bi * hw + (d + 1) * m]
                .copy_from_slice(&last[bi * m..(bi + 1) * m]);
        }
    }
    feat
}

fn head_logits<S: Scalar>(p: &RecurrentParams<S>, feat: &[S], b: usize) -> Vec<S> {
    let (c, hw) = (p.classes(), p.shape().head_input());
    let mut logits = vec![S::ZERO; b * c];
    for row in logits.chunks_exact_mut(c) {
        row.copy_from_slice(p.head_b());
    }
    S::gemm(b, hw, c, S::ONE, feat, false, p.head_w(), true, S::ONE, &mut logits);
    logits
}

fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Forward pass for a batch; returns row-major `[b][C]` logits.
pub fn batch_logits<S: Scalar>(p: &RecurrentParams<S>, batch: &[&SequenceSample<S>]) -> Result<Vec<S>> {
    let x = Inputs::gather(p, batch)?;
    let tapes: Vec<Tape<S>> = (0..p.direction().count())
        .map(|d| run_direction(p, d, &x, false))
        .collect();
    let feat = readout(p, &tapes, x.t_len, x.batch);
    Ok(head_logits(p, &feat, x.batch))
}

/// Class logits of a single sequence: last forward state (and last backward
/// state when bidirectional) through the linear head.
pub fn run_sequence<S: Scalar>(p: &RecurrentParams<S>, sample: &SequenceSample<S>) -> Result<Vec<S>> {
    batch_logits(p, &[sample])
}

/// Predicted class per batch member.
pub fn predict<S: Scalar>(p: &RecurrentParams<S>, batch: &[&SequenceSample<S>]) -> Result<Vec<usize>> {
    let logits = batch_logits(p, batch)?;
    Ok(logits.chunks_exact(p.classes()).map(argmax).collect())
}

/// Forward + backward on `batch`, adding `scale · ∂(Σ losses)/∂θ` into
/// `grad`. Splitting a batch into chunks and accumulating them in a fixed
/// order with `scale = 1 / total` reproduces the mean-loss gradient.
pub fn accumulate_gradient<S: Scalar>(
    p: &RecurrentParams<S>,
    batch: &[&SequenceSample<S>],
    scale: S,
    grad: &mut RecurrentParams<S>,
) -> Result<BatchStats> {
    if grad.shape() != p.shape() {
        return Err(Error::domain("gradient buffer shape differs from parameters"));
    }
    let x = Inputs::gather(p, batch)?;
    let b = x.batch;
    let (c, m) = (p.classes(), p.hidden_dim());
    let hw = p.shape().head_input();

    let tapes: Vec<Tape<S>> = (0..p.direction().count())
        .map(|d| run_direction(p, d, &x, true))
        .collect();
    let feat = readout(p, &tapes, x.t_len, b);
    let mut dlogits = head_logits(p, &feat, b);

    let mut stats = BatchStats {
        loss_sum: 0.0,
        correct: 0,
        count: b,
    };
    for (bi, row) in dlogits.chunks_exact_mut(c).enumerate() {
        let label = batch[bi].label as usize;
        if argmax(row) == label {
            stats.correct += 1;
        }
        let mx = row.iter().fold(row[0], |a, &v| a.max(v));
        let mut z = S::ZERO;
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            z += *v;
        }
        let loss = z.to_f64().ln() - libm::log(row[label].to_f64());
        if !loss.is_finite() {
            return Err(Error::Numeric(alloc::format!(
                "non-finite loss at batch index {bi}"
            )));
        }
        stats.loss_sum += loss;
        for (k, v) in row.iter_mut().enumerate() {
            let prob = *v / z;
            *v = (prob - if k == label { S::ONE } else { S::ZERO }) * scale;
        }
    }

    S::gemm(c, b, hw, S::ONE, &dlogits, true, &feat, false, S::ONE, grad.head_w_mut());
    let gb = grad.head_b_mut();
    for row in dlogits.chunks_exact(c) {
        for (acc, &v) in gb.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut dfeat = vec![S::ZERO; b * hw];
    S::gemm(b, c, hw, S::ONE, &dlogits, false, p.head_w(), false, S::ZERO, &mut dfeat);

    for (d, tape) in tapes.into_iter().enumerate() {
        let mut dh = vec![S::ZERO; b * m];
        for bi in 0..b {
            dh[bi * m..(bi + 1) * m].copy_from_slice(&dfeat[bi * hw + d * m..bi * hw + (d + 1) * m]);
        }
        backprop_direction(p, d, &x, tape, dh, grad);
    }
    Ok(stats)
}

/// Mean softmax cross-entropy over the batch and its exact gradient.
pub fn loss_and_grad<S: Scalar>(
    p: &RecurrentParams<S>,
    batch: &[&SequenceSample<S>],
) -> Result<(f64, RecurrentParams<S>)> {
    let mut grad = p.zeros_like();
    let stats = accumulate_gradient(p, batch, S::ONE / S::from_f64(batch.len().max(1) as f64), &mut grad)?;
    Ok((stats.loss_sum / stats.count as f64, grad))
}

/// Mean loss only (forward pass, no tape).
pub fn batch_loss<S: Scalar>(p: &RecurrentParams<S>, batch: &[&SequenceSample<S>]) -> Result<f64> {
    let logits = batch_logits(p, batch)?;
    let mut total = 0.0;
    for (row, s) in logits.chunks_exact(p.classes()).zip(batch) {
        let row: Vec<f64> = row.iter().map(|v| v.to_f64()).collect();
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + libm::log(row.iter().map(|v| libm::exp(v - mx)).sum::<f64>());
        total += lse - row[s.label as usize];
    }
    Ok(total / batch.len() as f64)
}
