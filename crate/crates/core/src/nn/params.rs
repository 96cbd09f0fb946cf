use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Recurrent update rule of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    /// `h = tanh(W_h h + W_x x + b)`
    Rnn,
    /// `h = relu(w_h ⊙ h + W_x x + b)` with a per-unit recurrent weight.
    IndRnn,
    /// Forget-gate LSTM without peepholes, gate order `i, f, g, o`.
    Lstm,
}

impl CellKind {
    /// Number of stacked pre-activation blocks (4 for LSTM gates).
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Rnn | CellKind::IndRnn => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::IndRnn => "indrnn",
            CellKind::Lstm => "lstm",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            CellKind::Rnn => 0,
            CellKind::IndRnn => 1,
            CellKind::Lstm => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CellKind::Rnn),
            1 => Some(CellKind::IndRnn),
            2 => Some(CellKind::Lstm),
            _ => None,
        }
    }
}

impl core::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(CellKind::Rnn),
            "indrnn" => Ok(CellKind::IndRnn),
            "lstm" => Ok(CellKind::Lstm),
            _ => Err(Error::domain(alloc::format!("unknown cell kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Bidirectional,
}

impl Direction {
    pub fn count(self) -> usize {
        match self {
            Direction::Forward => 1,
            Direction::Bidirectional => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Bidirectional => "bidirectional",
        }
    }
}

impl core::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" | "uni" => Ok(Direction::Forward),
            "bidirectional" | "bi" => Ok(Direction::Bidirectional),
            _ => Err(Error::domain(alloc::format!("unknown direction `{s}`"))),
        }
    }
}

/// Network geometry: everything needed to size the parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub kind: CellKind,
    pub direction: Direction,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub classes: usize,
}

impl Shape {
    fn w_x_len(&self) -> usize {
        self.kind.gates() * self.hidden_dim * self.input_dim
    }

    fn w_h_len(&self) -> usize {
        match self.kind {
            CellKind::IndRnn => self.hidden_dim,
            _ => self.kind.gates() * self.hidden_dim * self.hidden_dim,
        }
    }

    fn bias_len(&self) -> usize {
        self.kind.gates() * self.hidden_dim
    }

    fn cell_len(&self) -> usize {
        self.w_x_len() + self.w_h_len() + self.bias_len()
    }

    /// Width of the classifier input (`M` or `2M`).
    pub fn head_input(&self) -> usize {
        self.hidden_dim * self.direction.count()
    }

    pub fn parameter_count(&self) -> usize {
        self.direction.count() * self.cell_len() + self.classes * self.head_input() + self.classes
    }
}

/// Trainable parameters of one recurrent layer (one or two directions) plus
/// a linear classifier head, stored in a single flat buffer.
///
/// Per direction: `W_x` (`G·M × F`), `W_h` (`G·M × M`, or length `M` for
/// IndRNN), `b` (`G·M`), with `G` the gate count. Then the head `W`
/// (`C × H`) and bias (`C`).
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentParams<S> {
    shape: Shape,
    data: Vec<S>,
}

/// `4(M(F+M)+M) + CM + C` for a forward LSTM; the general form for every
/// kind and direction.
pub fn parameter_count(
    kind: CellKind,
    direction: Direction,
    input_dim: usize,
    hidden_dim: usize,
    classes: usize,
) -> usize {
    Shape {
        kind,
        direction,
        input_dim,
        hidden_dim,
        classes,
    }
    .parameter_count()
}

impl<S: Scalar> RecurrentParams<S> {
    pub fn zeros(shape: Shape) -> Result<Self> {
        if shape.input_dim == 0 || shape.hidden_dim == 0 || shape.classes == 0 {
            return Err(Error::domain("network dimensions must be positive"));
        }
        Ok(RecurrentParams {
            shape,
            data: vec![S::ZERO; shape.parameter_count()],
        })
    }

    pub fn from_vec(shape: Shape, data: Vec<S>) -> Result<Self> {
        let p = Self::zeros(shape)?;
        check_len("parameter buffer", p.data.len(), data.len())?;
        Ok(RecurrentParams { shape, data })
    }

    /// Seeded initialization: Glorot-uniform input and head kernels,
    /// orthogonal recurrent matrices (per gate block), `U[0, 1]` IndRNN
    /// recurrent weights, zero biases except the LSTM forget gate (1).
    pub fn init(shape: Shape, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, m, g) = (shape.input_dim, shape.hidden_dim, shape.kind.gates());
        for dir in 0..shape.direction.count() {
            let limit = libm::sqrt(6.0 / (f + g * m) as f64);
            for w in p.w_x_mut(dir) {
                *w = S::from_f64(rng.gen_range(-limit..limit));
            }
            match shape.kind {
                CellKind::IndRnn => {
                    for w in p.w_h_mut(dir) {
                        *w = S::from_f64(rng.gen::<f64>());
                    }
                }
                _ => {
                    for gate in 0..g {
                        let q = random_orthogonal(&mut rng, m);
                        let block = &mut p.w_h_mut(dir)[gate * m * m..(gate + 1) * m * m];
                        for (dst, src) in block.iter_mut().zip(q) {
                            *dst = S::from_f64(src);
                        }
                    }
                }
            }
            if shape.kind == CellKind::Lstm {
                for b in &mut p.bias_mut(dir)[m..2 * m] {
                    *b = S::ONE;
                }
            }
        }
        let limit = libm::sqrt(6.0 / (shape.head_input() + shape.classes) as f64);
        for w in p.head_w_mut() {
            *w = S::from_f64(rng.gen_range(-limit..limit));
        }
        Ok(p)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn kind(&self) -> CellKind {
        self.shape.kind
    }

    pub fn direction(&self) -> Direction {
        self.shape.direction
    }

    pub fn input_dim(&self) -> usize {
        self.shape.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.shape.hidden_dim
    }

    pub fn classes(&self) -> usize {
        self.shape.classes
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn zeros_like(&self) -> Self {
        RecurrentParams {
            shape: self.shape,
            data: vec![S::ZERO; self.data.len()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn cast<T: Scalar>(&self) -> RecurrentParams<T> {
        RecurrentParams {
            shape: self.shape,
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }

    fn cell_offset(&self, dir: usize) -> usize {
        assert!(dir < self.shape.direction.count(), "direction index out of range");
        dir * self.shape.cell_len()
    }

    fn range(&self, dir: usize, part: u8) -> core::ops::Range<usize> {
        let s = &self.shape;
        let base = self.cell_offset(dir);
        let (wx, wh, b) = (s.w_x_len(), s.w_h_len(), s.bias_len());
        match part {
            0 => base..base + wx,
            1 => base + wx..base + wx + wh,
            _ => base + wx + wh..base + wx + wh + b,
        }
    }

    fn head_offset(&self) -> usize {
        self.shape.direction.count() * self.shape.cell_len()
    }

    /// Input kernel of direction `dir` (0 forward, 1 backward), `G·M × F`.
    pub fn w_x(&self, dir: usize) -> &[S] {
        &self.data[self.range(dir, 0)]
    }

    /// Recurrent kernel, `G·M × M` (or the length-`M` vector for IndRNN).
    pub fn w_h(&self, dir: usize) -> &[S] {
        &self.data[self.range(dir, 1)]
    }

    pub fn bias(&self, dir: usize) -> &[S] {
        &self.data[self.range(dir, 2)]
    }

    pub fn w_x_mut(&mut self, dir: usize) -> &mut [S] {
        let r = self.range(dir, 0);
        &mut self.data[r]
    }

    pub fn w_h_mut(&mut self, dir: usize) -> &mut [S] {
        let r = self.range(dir, 1);
        &mut self.data[r]
    }

    pub fn bias_mut(&mut self, dir: usize) -> &mut [S] {
        let r = self.range(dir, 2);
        &mut self.data[r]
    }

    /// Classifier weight, `C × H`.
    pub fn head_w(&self) -> &[S] {
        let o = self.head_offset();
        &self.data[o..o + self.shape.classes * self.shape.head_input()]
    }

    pub fn head_b(&self) -> &[S] {
        let o = self.head_offset() + self.shape.classes * self.shape.head_input();
        &self.data[o..]
    }

    pub fn head_w_mut(&mut self) -> &mut [S] {
        let o = self.head_offset();
        let n = self.shape.classes * self.shape.head_input();
        &mut self.data[o..o + n]
    }

    pub fn head_b_mut(&mut self) -> &mut [S] {
        let o = self.head_offset() + self.shape.classes * self.shape.head_input();
        &mut self.data[o..]
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 in (0, 1]
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Row-major `n × n` orthogonal matrix from Gram-Schmidt on Gaussian rows.
fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    let mut i = 0;
    while i < n {
        let mut row: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        // twice is enough for numerical orthogonality
        for _ in 0..2 {
            for j in 0..i {
                let prev = &q[j * n..(j + 1) * n];
                let dot: f64 = row.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (r, p) in row.iter_mut().zip(prev) {
                    *r -= dot * p;
                }
            }
        }
        let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
        if norm < 1e-8 {
            continue;
        }
        for (dst, v) in q[i * n..(i + 1) * n].iter_mut().zip(&row) {
            *dst = v / norm;
        }
        i += 1;
    }
    q
}
