//! Packing subband grids into recurrent-network input sequences.
//!
//! Timestep `t` carries the `t`-th coefficient (row-major raster inside a
//! channel) of every channel. Features are ordered plane-major, then by
//! grid row, then grid column. With `d = 1` this is the raster pixel
//! sequence of the image.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::subband::SubbandGrid;

/// A `T × F` feature sequence (row-major: `values[t * F + f]`) with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample<T = f32> {
    pub timesteps: usize,
    pub feature_dim: usize,
    pub values: Vec<T>,
    pub label: u32,
}

impl<T: Copy> SequenceSample<T> {
    pub fn new(timesteps: usize, feature_dim: usize, values: Vec<T>, label: u32) -> Result<Self> {
        if timesteps == 0 || feature_dim == 0 {
            return Err(Error::domain("sequence dimensions must be positive"));
        }
        check_len("sequence values", timesteps * feature_dim, values.len())?;
        Ok(SequenceSample {
            timesteps,
            feature_dim,
            values,
            label,
        })
    }

    /// Feature vector at timestep `t`.
    pub fn step(&self, t: usize) -> &[T] {
        &self.values[t * self.feature_dim..(t + 1) * self.feature_dim]
    }
}

impl SequenceSample<f64> {
    pub fn to_f32(&self) -> SequenceSample<f32> {
        SequenceSample {
            timesteps: self.timesteps,
            feature_dim: self.feature_dim,
            values: self.values.iter().map(|&v| v as f32).collect(),
            label: self.label,
        }
    }
}

/// Sequence shape `(T, F)` for an `N × N` image with `planes` colour planes
/// split with divisor `d`.
pub fn sequence_shape(side: usize, divisor: usize, planes: usize) -> Result<(usize, usize)> {
    if divisor == 0 || side == 0 || planes == 0 || !side.is_multiple_of(divisor) {
        return Err(Error::domain(alloc::format!(
            "divisor {divisor} does not divide image side {side}"
        )));
    }
    let m = side / divisor;
    Ok((m * m, divisor * divisor * planes))
}

/// Flattens one grid per colour plane into a sequence sample.
pub fn pack_sequence(grids: &[SubbandGrid], label: u32) -> Result<SequenceSample<f64>> {
    let first = grids
        .first()
        .ok_or_else(|| Error::domain("pack_sequence: no grids given"))?;
    let (d, n) = (first.divisor(), first.side());
    if grids.iter().any(|g| g.divisor() != d || g.side() != n) {
        return Err(Error::domain("pack_sequence: grids disagree on divisor or side"));
    }
    let (t_len, f_len) = sequence_shape(n, d, grids.len())?;
    let mut values = vec![0.0; t_len * f_len];
    for t in 0..t_len {
        let row = &mut values[t * f_len..(t + 1) * f_len];
        let mut f = 0;
        for g in grids {
            for i in 0..d {
                for j in 0..d {
                    row[f] = g.get(i, j, t);
                    f += 1;
                }
            }
        }
    }
    SequenceSample::new(t_len, f_len, values, label)
}

/// Exact inverse of [`pack_sequence`].
pub fn unpack_sequence(
    s: &SequenceSample<f64>,
    divisor: usize,
    side: usize,
    planes: usize,
) -> Result<Vec<SubbandGrid>> {
    let (t_len, f_len) = sequence_shape(side, divisor, planes)?;
    check_len("sequence timesteps", t_len, s.timesteps)?;
    check_len("sequence features", f_len, s.feature_dim)?;
    let mut grids = vec![SubbandGrid::zeros(divisor, side)?; planes];
    for t in 0..t_len {
        let row = s.step(t);
        let mut f = 0;
        for g in grids.iter_mut() {
            for i in 0..divisor {
                for j in 0..divisor {
                    g.set(i, j, t, row[f]);
                    f += 1;
                }
            }
        }
    }
    Ok(grids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subband::{AnalysisOperator, ImagePlane};

    fn plane(n: usize, seed: u64) -> ImagePlane {
        let px = (0..n * n)
            .map(|i| ((i as u64 * 2654435761 + seed) % 256) as f64 / 255.0)
            .collect();
        ImagePlane::new(n, px).unwrap()
    }

    #[test]
    fn mnist_and_cifar_shapes() {
        assert_eq!(sequence_shape(28, 2, 1).unwrap(), (196, 4));
        assert_eq!(sequence_shape(28, 1, 1).unwrap(), (784, 1));
        assert_eq!(sequence_shape(32, 4, 3).unwrap(), (64, 48));
        assert_eq!(sequence_shape(32, 2, 3).unwrap(), (256, 12));
        assert!(sequence_shape(28, 5, 1).is_err());

        let op = AnalysisOperator::for_divisor(4, 32).unwrap();
        let grids: Vec<_> = (0..3).map(|s| op.transform_2d(&plane(32, s)).unwrap()).collect();
        let s = pack_sequence(&grids, 7).unwrap();
        assert_eq!((s.timesteps, s.feature_dim, s.label), (64, 48, 7));
    }

    #[test]
    fn divisor_one_is_raster_scan() {
        let x = plane(28, 3);
        let g = AnalysisOperator::for_divisor(1, 28).unwrap().transform_2d(&x).unwrap();
        let s = pack_sequence(&[g], 1).unwrap();
        assert_eq!((s.timesteps, s.feature_dim), (784, 1));
        assert_eq!(s.values, x.pixels());
    }

    #[test]
    fn pack_unpack_round_trip() {
        let op = AnalysisOperator::for_divisor(7, 28).unwrap();
        let grids: Vec<_> = (0..3).map(|s| op.transform_2d(&plane(28, s)).unwrap()).collect();
        let s = pack_sequence(&grids, 2).unwrap();
        assert_eq!(unpack_sequence(&s, 7, 28, 3).unwrap(), grids);
    }

    #[test]
    fn single_pixel_channels() {
        let g = AnalysisOperator::for_divisor(6, 6).unwrap().transform_2d(&plane(6, 1)).unwrap();
        let s = pack_sequence(std::slice::from_ref(&g), 0).unwrap();
        assert_eq!((s.timesteps, s.feature_dim), (1, 36));
        assert_eq!(unpack_sequence(&s, 6, 6, 1).unwrap(), vec![g]);
    }

    #[test]
    fn zero_sample_unpacks_to_zero_grid() {
        let s = SequenceSample::new(49, 16, vec![0.0; 49 * 16], 0).unwrap();
        let g = unpack_sequence(&s, 4, 28, 1).unwrap();
        assert_eq!(g, vec![SubbandGrid::zeros(4, 28).unwrap()]);
    }

    #[test]
    fn inconsistent_inputs_rejected() {
        let a = SubbandGrid::zeros(2, 28).unwrap();
        let b = SubbandGrid::zeros(4, 28).unwrap();
        assert!(pack_sequence(&[a, b], 0).is_err());
        assert!(pack_sequence(&[], 0).is_err());
        let s = SequenceSample::new(196, 4, vec![0.0; 784], 0).unwrap();
        assert!(unpack_sequence(&s, 4, 28, 1).is_err());
        assert!(unpack_sequence(&s, 2, 28, 3).is_err());
        assert!(SequenceSample::new(2, 2, vec![0.0f32; 3], 0).is_err());
    }
}
