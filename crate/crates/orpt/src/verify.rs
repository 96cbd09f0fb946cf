//! Self-check suites run by `orpt verify`.

use std::time::Instant;

use orpt_core::nn::conv::{dilated_causal_conv, ConvSpec};
use orpt_core::nn::gradcheck::check_gradient;
use orpt_core::nn::{parameter_count, CellKind, Direction, RecurrentParams, Shape};
use orpt_core::numtheory::{divisors, totient};
use orpt_core::{AnalysisOperator, ImagePlane, OrptMatrix, SequenceSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The transform matrix for `N = 6`, row-major.
pub const R6: [[i64; 6]; 6] = [
    [1, 1, 2, 0, 2, 0],
    [1, -1, -1, 1, 1, -1],
    [1, 1, -1, -1, -1, -1],
    [1, -1, 2, 0, -2, 0],
    [1, 1, -1, 1, -1, 1],
    [1, -1, -1, -1, 1, 1],
];

pub const GRAD_EPS: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-5;
/// Denominator floor for gradient relative errors.
pub const GRAD_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> SuiteResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    SuiteResult {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Pairwise column dot products are exactly zero and there are
/// `Σ_{d|N} φ(d) = N` columns, for every `N` in `2..=max_n`.
pub fn orthogonality(max_n: usize) -> Result<String, String> {
    for n in 2..=max_n {
        let m = OrptMatrix::build(n).map_err(|e| format!("N={n}: {e}"))?;
        let phi_sum: u64 = divisors(n as u64)
            .unwrap()
            .iter()
            .map(|&d| totient(d).unwrap())
            .sum();
        if phi_sum != n as u64 || m.column_divisors().len() != n {
            return Err(format!("N={n}: column count mismatch"));
        }
        let cols: Vec<Vec<i64>> = (0..n).map(|c| m.column(c)).collect();
        for a in 0..n {
            for b in a + 1..n {
                let dot: i64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
                if dot != 0 {
                    return Err(format!("N={n}: columns {a},{b} have dot product {dot}"));
                }
            }
        }
    }
    Ok(format!("N = 2..={max_n}"))
}

pub fn golden_r6() -> Result<String, String> {
    let m = OrptMatrix::build(6).map_err(|e| e.to_string())?;
    for (i, row) in R6.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if m.entry(i, j) != v {
                return Err(format!("entry ({i},{j}) is {}, expected {v}", m.entry(i, j)));
            }
        }
    }
    Ok("entrywise equal".into())
}

/// 1-D round trip and weighted Parseval on `trials` random vectors for every
/// `N` in `1..=max_n`. Returns `(max ∞-norm error, max relative energy error)`.
pub fn transform_1d(max_n: usize, trials: usize, seed: u64) -> Result<(f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_rt, mut worst_pv) = (0.0f64, 0.0f64);
    for n in 1..=max_n {
        let m = OrptMatrix::build(n).map_err(|e| e.to_string())?;
        let norms = m.column_norms();
        for _ in 0..trials {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let beta = m.forward(&x).map_err(|e| e.to_string())?;
            let back = m.inverse(&beta).map_err(|e| e.to_string())?;
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let energy: f64 = x.iter().map(|v| v * v).sum();
            let weighted: f64 = beta.values.iter().zip(norms).map(|(b, &d)| b * b / d as f64).sum();
            worst_rt = worst_rt.max(err);
            worst_pv = worst_pv.max((weighted - energy).abs() / energy.max(f64::MIN_POSITIVE));
        }
    }
    Ok((worst_rt, worst_pv))
}

/// Image sides and plane counts of the two datasets.
pub const IMAGE_SHAPES: [(usize, usize); 2] = [(28, 1), (32, 3)];

/// 2-D round trip and weighted Parseval for every valid divisor of the
/// dataset image sides plus all `N ≤ max_n` with all their divisors.
pub fn transform_2d(max_n: usize, trials: usize, seed: u64) -> Result<(f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases: Vec<(usize, usize)> = Vec::new();
    for (side, _) in IMAGE_SHAPES {
        for d in divisors(side as u64).unwrap() {
            cases.push((side, d as usize));
        }
    }
    for n in 1..=max_n {
        for d in divisors(n as u64).unwrap() {
            cases.push((n, d as usize));
        }
    }
    let (mut worst_rt, mut worst_pv) = (0.0f64, 0.0f64);
    for (side, d) in cases {
        let op = AnalysisOperator::for_divisor(d, side).map_err(|e| e.to_string())?;
        for _ in 0..trials {
            let px = (0..side * side).map(|_| rng.gen_range(0.0..1.0)).collect();
            let x = ImagePlane::new(side, px).unwrap();
            let y = op.transform_2d(&x).map_err(|e| e.to_string())?;
            let back = op.inverse_2d(&y).map_err(|e| e.to_string())?;
            worst_rt = worst_rt.max(back.max_abs_diff(&x));
            let e = x.energy();
            worst_pv = worst_pv.max((op.weighted_energy(&y) - e).abs() / e.max(f64::MIN_POSITIVE));
        }
    }
    Ok((worst_rt, worst_pv))
}

/// Worst relative gradient error over every cell kind and direction on
/// nets with `F=2, M=3, T=4, C=3`.
pub fn gradients(seeds: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for kind in [CellKind::Rnn, CellKind::IndRnn, CellKind::Lstm] {
        for direction in [Direction::Forward, Direction::Bidirectional] {
            for seed in 0..seeds {
                let shape = Shape {
                    kind,
                    direction,
                    input_dim: 2,
                    hidden_dim: 3,
                    classes: 3,
                };
                let p = RecurrentParams::<f64>::init(shape, seed).map_err(|e| e.to_string())?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                let batch: Vec<SequenceSample<f64>> = (0..3)
                    .map(|_| {
                        let v = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        SequenceSample::new(4, 2, v, rng.gen_range(0..3)).unwrap()
                    })
                    .collect();
                let refs: Vec<_> = batch.iter().collect();
                let gc = check_gradient(&p, &refs, GRAD_EPS, GRAD_FLOOR).map_err(|e| e.to_string())?;
                worst = worst.max(gc.max_rel_error);
            }
        }
    }
    Ok(worst)
}

/// Perturbation causality on `cases` random convolutions, plus the `d = 1`
/// comparison with a direct convolution. Returns the worst `d = 1` error.
pub fn causality(cases: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let len = rng.gen_range(1..40);
        let taps: Vec<f64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dilation = rng.gen_range(1..5);
        let spec = ConvSpec::new(taps.clone(), dilation).unwrap();
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = dilated_causal_conv(&spec, &x).unwrap();
        let t = rng.gen_range(0..len);
        let mut xp = x.clone();
        xp[t] += rng.gen_range(0.5..2.0);
        let yp = dilated_causal_conv(&spec, &xp).unwrap();
        if let Some(k) = (0..t).find(|&k| y[k] != yp[k]) {
            return Err(format!("case {case}: output {k} changed after perturbing input {t}"));
        }
        let one = ConvSpec::new(taps.clone(), 1).unwrap();
        let y1 = dilated_causal_conv(&one, &x).unwrap();
        for (k, v) in y1.iter().enumerate() {
            let mut direct = 0.0;
            for (i, f) in taps.iter().enumerate() {
                if i <= k {
                    direct += f * x[k - i];
                }
            }
            worst = worst.max((v - direct).abs());
        }
    }
    Ok(worst)
}

/// Runs every suite. `quick` shrinks the random corpora.
pub fn run_all(seed: u64, quick: bool) -> Vec<SuiteResult> {
    let trials = if quick { 5 } else { 100 };
    vec![
        timed("orthogonality", || orthogonality(128)),
        timed("golden-r6", golden_r6),
        timed("roundtrip-1d", || {
            let (rt, pv) = transform_1d(64, trials, seed)?;
            let detail = format!("max err {rt:.2e}, parseval rel {pv:.2e}");
            if rt < 1e-9 && pv < 1e-8 {
                Ok(detail)
            } else {
                Err(detail)
            }
        }),
        timed("roundtrip-2d", || {
            let (rt, pv) = transform_2d(if quick { 16 } else { 64 }, trials.min(10), seed)?;
            let detail = format!("max err {rt:.2e}, parseval rel {pv:.2e}");
            if rt < 1e-9 && pv < 1e-8 {
                Ok(detail)
            } else {
                Err(detail)
            }
        }),
        timed("gradients", || {
            let worst = gradients(if quick { 1 } else { 3 })?;
            let detail = format!("max rel err {worst:.2e}");
            if worst < GRAD_TOL {
                Ok(detail)
            } else {
                Err(detail)
            }
        }),
        timed("causality", || {
            let worst = causality(1000, seed)?;
            let detail = format!("d=1 direct diff {worst:.2e}");
            if worst <= 1e-12 {
                Ok(detail)
            } else {
                Err(detail)
            }
        }),
        timed("param-count", || {
            let n = parameter_count(CellKind::Lstm, Direction::Forward, 4, 128, 10);
            if n == 69_386 {
                Ok(format!("{n}"))
            } else {
                Err(format!("{n} != 69386"))
            }
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        for r in run_all(1, true) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
