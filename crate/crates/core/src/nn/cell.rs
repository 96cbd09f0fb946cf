//! Single-sample, single-timestep cell updates.
//!
//! These are the readable reference forms of the three recurrences. The
//! batched training path in [`super::network`] is tested against them.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{CellKind, RecurrentParams};
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Hidden state of one direction; `c` is empty except for LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState<S> {
    pub h: Vec<S>,
    pub c: Vec<S>,
}

impl<S: Scalar> HiddenState<S> {
    pub fn zeros(kind: CellKind, hidden_dim: usize) -> Self {
        HiddenState {
            h: vec![S::ZERO; hidden_dim],
            c: if kind == CellKind::Lstm {
                vec![S::ZERO; hidden_dim]
            } else {
                Vec::new()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<S: Scalar>(self, v: S) -> S {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(S::ZERO),
        }
    }
}

fn check_dims<S: Scalar>(
    p: &RecurrentParams<S>,
    kind: CellKind,
    dir: usize,
    state: &HiddenState<S>,
    x: &[S],
) -> Result<()> {
    if p.kind() != kind {
        return Err(Error::domain(alloc::format!(
            "{} step called on {} parameters",
            kind.name(),
            p.kind().name()
        )));
    }
    if dir >= p.direction().count() {
        return Err(Error::dim("direction index", p.direction().count(), dir));
    }
    check_len("step input", p.input_dim(), x.len())?;
    check_len("hidden state", p.hidden_dim(), state.h.len())?;
    if kind == CellKind::Lstm {
        check_len("cell state", p.hidden_dim(), state.c.len())?;
    }
    Ok(())
}

/// `W_x x + b` for gate row block `rows`.
fn input_preactivation<S: Scalar>(p: &RecurrentParams<S>, dir: usize, x: &[S]) -> Vec<S> {
    let f = p.input_dim();
    p.bias(dir)
        .iter()
        .enumerate()
        .map(|(r, &b)| {
            let w = &p.w_x(dir)[r * f..(r + 1) * f];
            w.iter().zip(x).fold(b, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

/// `h_t = σ(W_h h_{t-1} + W_x x_t + b)` with an explicit activation.
pub fn rnn_step_with<S: Scalar>(
    p: &RecurrentParams<S>,
    dir: usize,
    state: &HiddenState<S>,
    x: &[S],
    act: Activation,
) -> Result<HiddenState<S>> {
    check_dims(p, CellKind::Rnn, dir, state, x)?;
    let m = p.hidden_dim();
    let mut a = input_preactivation(p, dir, x);
    for (r, ar) in a.iter_mut().enumerate() {
        let w = &p.w_h(dir)[r * m..(r + 1) * m];
        *ar += w.iter().zip(&state.h).map(|(&wi, &hi)| wi * hi).sum::<S>();
    }
    Ok(HiddenState {
        h: a.into_iter().map(|v| act.apply(v)).collect(),
        c: Vec::new(),
    })
}

/// Vanilla RNN step with `σ = tanh`.
pub fn rnn_step<S: Scalar>(
    p: &RecurrentParams<S>,
    state: &HiddenState<S>,
    x: &[S],
) -> Result<HiddenState<S>> {
    rnn_step_with(p, 0, state, x, Activation::Tanh)
}

/// IndRNN step `h_t = relu(w_h ⊙ h_{t-1} + W_x x_t + b)`.
pub fn indrnn_step<S: Scalar>(
    p: &RecurrentParams<S>,
    state: &HiddenState<S>,
    x: &[S],
) -> Result<HiddenState<S>> {
    indrnn_step_dir(p, 0, state, x)
}

pub fn indrnn_step_dir<S: Scalar>(
    p: &RecurrentParams<S>,
    dir: usize,
    state: &HiddenState<S>,
    x: &[S],
) -> Result<HiddenState<S>> {
    check_dims(p, CellKind::IndRnn, dir, state, x)?;
    let a = input_preactivation(p, dir, x);
    let h = a
        .iter()
        .zip(p.w_h(dir))
        .zip(&state.h)
        .map(|((&ai, &wi), &hi)| (ai + wi * hi).max(S::ZERO))
        .collect();
    Ok(HiddenState { h, c: Vec::new() })
}

/// LSTM step: `i, f, o` logistic, `g` tanh,
/// `c_t = f ⊙ c_{t-1} + i ⊙ g`, `h_t = o ⊙ tanh(c_t)`.
pub fn lstm_step<S: Scalar>(
    p: &RecurrentParams<S>,
    state: &HiddenState<S>,
    x: &[S],
) -> Result<HiddenState<S>> {
    lstm_step_dir(p, 0, state, x)
}

pub fn lstm_step_dir<S: Scalar>(
    p: &RecurrentParams<S>,
    dir: usize,
    state: &HiddenState<S>,
    x: &[S],
) -> Result<HiddenState<S>> {
    check_dims(p, CellKind::Lstm, dir, state, x)?;
    let m = p.hidden_dim();
    let mut a = input_preactivation(p, dir, x);
    for (r, ar) in a.iter_mut().enumerate() {
        let w = &p.w_h(dir)[r * m..(r + 1) * m];
        *ar += w.iter().zip(&state.h).map(|(&wi, &hi)| wi * hi).sum::<S>();
    }
    let mut h = vec![S::ZERO; m];
    let mut c = vec![S::ZERO; m];
    for u in 0..m {
        let i = a[u].sigmoid();
        let f = a[m + u].sigmoid();
        let g = a[2 * m + u].tanh();
        let o = a[3 * m + u].sigmoid();
        c[u] = f * state.c[u] + i * g;
        h[u] = o * c[u].tanh();
    }
    Ok(HiddenState { h, c })
}

/// Dispatches on the parameter kind (RNN uses tanh).
pub fn step<S: Scalar>(
    p: &RecurrentParams<S>,
    dir: usize,
    state: &HiddenState<S>,
    x: &[S],
) -> Result<HiddenState<S>> {
    match p.kind() {
        CellKind::Rnn => rnn_step_with(p, dir, state, x, Activation::Tanh),
        CellKind::IndRnn => indrnn_step_dir(p, dir, state, x),
        CellKind::Lstm => lstm_step_dir(p, dir, state, x),
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::nn::params::{Direction, Shape};

    fn shape(kind: CellKind, f: usize, m: usize) -> Shape {
        Shape {
            kind,
            direction: Direction::Forward,
            input_dim: f,
            hidden_dim: m,
            classes: 2,
        }
    }

    fn random_params(kind: CellKind, f: usize, m: usize, seed: u64) -> RecurrentParams<f64> {
        let mut p = RecurrentParams::<f64>::zeros(shape(kind, f, m)).unwrap();
        let mut s = seed;
        for v in p.as_mut_slice() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        }
        p
    }

    /// Scalar loops written out with explicit indices, no shared helpers.
    fn lstm_oracle(p: &RecurrentParams<f64>, h: &[f64], c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (f, m) = (p.input_dim(), p.hidden_dim());
        let mut pre = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        for (g, pg) in pre.iter_mut().enumerate() {
            for u in 0..m {
                let row = g * m + u;
                let mut acc = p.bias(0)[row];
                for k in 0..f {
                    acc += p.w_x(0)[row * f + k] * x[k];
                }
                for k in 0..m {
                    acc += p.w_h(0)[row * m + k] * h[k];
                }
                pg[u] = acc;
            }
        }
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut hn = vec![0.0; m];
        let mut cn = vec![0.0; m];
        for u in 0..m {
            cn[u] = sig(pre[1][u]) * c[u] + sig(pre[0][u]) * pre[2][u].tanh();
            hn[u] = sig(pre[3][u]) * cn[u].tanh();
        }
        (hn, cn)
    }

    fn rnn_oracle(p: &RecurrentParams<f64>, h: &[f64], x: &[f64]) -> Vec<f64> {
        let (f, m) = (p.input_dim(), p.hidden_dim());
        (0..m)
            .map(|u| {
                let mut acc = p.bias(0)[u];
                for k in 0..f {
                    acc += p.w_x(0)[u * f + k] * x[k];
                }
                for k in 0..m {
                    acc += p.w_h(0)[u * m + k] * h[k];
                }
                acc.tanh()
            })
            .collect()
    }

    #[test]
    fn rnn_zero_params_give_zero() {
        let p = RecurrentParams::<f64>::zeros(shape(CellKind::Rnn, 3, 4)).unwrap();
        let s = rnn_step(&p, &HiddenState::zeros(CellKind::Rnn, 4), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(s.h, vec![0.0; 4]);
    }

    #[test]
    fn rnn_feedforward_degeneracy() {
        let mut p = RecurrentParams::<f64>::zeros(shape(CellKind::Rnn, 3, 3)).unwrap();
        for i in 0..3 {
            p.w_x_mut(0)[i * 3 + i] = 1.0;
        }
        let x = [0.01, -0.02, 0.03];
        let s = rnn_step(&p, &HiddenState::zeros(CellKind::Rnn, 3), &x).unwrap();
        for (h, xi) in s.h.iter().zip(&x) {
            assert!((h - libm::tanh(*xi)).abs() < 1e-15);
            assert!((h - xi).abs() < 1e-5);
        }
    }

    #[test]
    fn rnn_matches_oracle() {
        let p = random_params(CellKind::Rnn, 3, 5, 9);
        let h: Vec<f64> = (0..5).map(|i| 0.1 * i as f64 - 0.2).collect();
        let x = [0.3, -0.7, 0.2];
        let s = rnn_step(&p, &HiddenState { h: h.clone(), c: vec![] }, &x).unwrap();
        for (a, b) in s.h.iter().zip(rnn_oracle(&p, &h, &x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn indrnn_cases() {
        let mut p = random_params(CellKind::IndRnn, 2, 4, 3);
        let x = [0.5, -0.25];
        let h = HiddenState { h: vec![0.3, 0.9, 0.0, 0.4], c: vec![] };
        for w in p.w_h_mut(0) {
            *w = 0.0;
        }
        let s = indrnn_step(&p, &h, &x).unwrap();
        let ff = indrnn_step(&p, &HiddenState::zeros(CellKind::IndRnn, 4), &x).unwrap();
        assert_eq!(s, ff);

        let z = RecurrentParams::<f64>::zeros(shape(CellKind::IndRnn, 2, 4)).unwrap();
        let s = indrnn_step(&z, &HiddenState::zeros(CellKind::IndRnn, 4), &[0.0, 0.0]).unwrap();
        assert_eq!(s.h, vec![0.0; 4]);
    }

    #[test]
    fn indrnn_equals_rnn_with_diagonal_recurrence() {
        for seed in 0..20 {
            let ind = random_params(CellKind::IndRnn, 3, 6, seed);
            let mut full = RecurrentParams::<f64>::zeros(shape(CellKind::Rnn, 3, 6)).unwrap();
            full.w_x_mut(0).copy_from_slice(ind.w_x(0));
            full.bias_mut(0).copy_from_slice(ind.bias(0));
            for u in 0..6 {
                full.w_h_mut(0)[u * 6 + u] = ind.w_h(0)[u];
            }
            let h = HiddenState {
                h: (0..6).map(|i| 0.2 * i as f64).collect(),
                c: vec![],
            };
            let x = [0.1 * seed as f64, -0.3, 0.7];
            let a = indrnn_step(&ind, &h, &x).unwrap();
            let b = rnn_step_with(&full, 0, &h, &x, Activation::Relu).unwrap();
            for (u, v) in a.h.iter().zip(&b.h) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lstm_zero_and_oracle() {
        let z = RecurrentParams::<f64>::zeros(shape(CellKind::Lstm, 2, 3)).unwrap();
        let s = lstm_step(&z, &HiddenState::zeros(CellKind::Lstm, 3), &[0.0, 0.0]).unwrap();
        assert_eq!(s.h, vec![0.0; 3]);
        assert_eq!(s.c, vec![0.0; 3]);

        let p = random_params(CellKind::Lstm, 2, 3, 17);
        let h = vec![0.1, -0.2, 0.3];
        let c = vec![0.5, 0.0, -0.4];
        let x = [0.9, -0.6];
        let s = lstm_step(&p, &HiddenState { h: h.clone(), c: c.clone() }, &x).unwrap();
        let (ho, co) = lstm_oracle(&p, &h, &c, &x);
        for i in 0..3 {
            assert!((s.h[i] - ho[i]).abs() < 1e-12);
            assert!((s.c[i] - co[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_saturated_forget_gate_retains_memory() {
        let mut p = RecurrentParams::<f64>::zeros(shape(CellKind::Lstm, 1, 2)).unwrap();
        let m = 2;
        for u in 0..m {
            p.bias_mut(0)[u] = -10.0; // input gate closed
            p.bias_mut(0)[m + u] = 10.0; // forget gate open
        }
        let c0 = vec![0.7, -1.3];
        let s = lstm_step(&p, &HiddenState { h: vec![0.0; 2], c: c0.clone() }, &[5.0]).unwrap();
        for (c, c_prev) in s.c.iter().zip(&c0) {
            assert!((c - c_prev).abs() < 1e-3 * c_prev.abs());
        }
    }

    #[test]
    fn dimension_and_kind_errors() {
        let p = RecurrentParams::<f64>::zeros(shape(CellKind::Lstm, 2, 3)).unwrap();
        assert!(lstm_step(&p, &HiddenState::zeros(CellKind::Lstm, 3), &[0.0]).is_err());
        assert!(lstm_step(&p, &HiddenState::zeros(CellKind::Lstm, 2), &[0.0, 0.0]).is_err());
        assert!(lstm_step(&p, &HiddenState::zeros(CellKind::Rnn, 3), &[0.0, 0.0]).is_err());
        assert!(rnn_step(&p, &HiddenState::zeros(CellKind::Rnn, 3), &[0.0, 0.0]).is_err());
        assert!(step(&p, 1, &HiddenState::zeros(CellKind::Lstm, 3), &[0.0, 0.0]).is_err());
    }
}
