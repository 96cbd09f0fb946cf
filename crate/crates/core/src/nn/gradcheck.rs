//! Central finite-difference oracle for the BPTT gradients.

use alloc::vec::Vec;

use super::network::{batch_loss, loss_and_grad};
use super::params::RecurrentParams;
use crate::error::Result;
use crate::sequence::SequenceSample;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// Largest `|a - n| / max(|a|, |n|, floor)` over all coordinates.
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Relative error with an absolute floor on the denominator so coordinates
/// whose true gradient is zero compare on an absolute scale.
pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares every coordinate of the BPTT gradient with
/// `(L(θ + ε e_i) - L(θ - ε e_i)) / 2ε`, evaluated with forward passes only.
pub fn check_gradient(
    p: &RecurrentParams<f64>,
    batch: &[&SequenceSample<f64>],
    eps: f64,
    floor: f64,
) -> Result<GradCheck> {
    let (_, grad) = loss_and_grad(p, batch)?;
    let analytic = grad.into_vec();
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut probe = p.clone();
    for i in 0..p.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + eps;
        let up = batch_loss(&probe, batch)?;
        probe.as_mut_slice()[i] = orig - eps;
        let down = batch_loss(&probe, batch)?;
        probe.as_mut_slice()[i] = orig;
        numeric.push((up - down) / (2.0 * eps));
    }
    let (worst_index, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n, floor))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    Ok(GradCheck {
        analytic,
        numeric,
        max_rel_error,
        worst_index,
    })
}
