use orpt_core::nn::gradcheck::check_gradient;
use orpt_core::nn::{CellKind, Direction, RecurrentParams, Shape};
use orpt_core::SequenceSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn batch(rng: &mut ChaCha8Rng, n: usize, t: usize, f: usize, classes: u32) -> Vec<SequenceSample<f64>> {
    (0..n)
        .map(|_| {
            let vals = (0..t * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
            SequenceSample::new(t, f, vals, rng.gen_range(0..classes)).unwrap()
        })
        .collect()
}

/// Denominator floor: gradients below this magnitude are compared on an
/// absolute scale, where central-difference rounding noise (~1e-11) lives.
const GRAD_FLOOR: f64 = 1e-5;

fn check(kind: CellKind, direction: Direction, seed: u64) -> f64 {
    let shape = Shape {
        kind,
        direction,
        input_dim: 2,
        hidden_dim: 3,
        classes: 3,
    };
    let p = RecurrentParams::<f64>::init(shape, seed).unwrap();
    assert!(p.len() <= 200);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let samples = batch(&mut rng, 3, 4, 2, 3);
    let refs: Vec<_> = samples.iter().collect();
    let gc = check_gradient(&p, &refs, 1e-5, GRAD_FLOOR).unwrap();
    gc.max_rel_error
}

#[test]
fn bptt_matches_finite_differences_for_every_cell() {
    for &kind in &[CellKind::Rnn, CellKind::IndRnn, CellKind::Lstm] {
        for &dir in &[Direction::Forward, Direction::Bidirectional] {
            for seed in 0..3 {
                let err = check(kind, dir, seed);
                assert!(err < 1e-5, "{kind:?} {dir:?} seed {seed}: max rel err {err:e}");
            }
        }
    }
}

#[test]
fn longer_sequences_still_agree() {
    let shape = Shape {
        kind: CellKind::Lstm,
        direction: Direction::Bidirectional,
        input_dim: 3,
        hidden_dim: 2,
        classes: 4,
    };
    let p = RecurrentParams::<f64>::init(shape, 77).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = batch(&mut rng, 2, 25, 3, 4);
    let refs: Vec<_> = samples.iter().collect();
    let gc = check_gradient(&p, &refs, 1e-5, GRAD_FLOOR).unwrap();
    assert!(gc.max_rel_error < 1e-5, "{:e}", gc.max_rel_error);
}
