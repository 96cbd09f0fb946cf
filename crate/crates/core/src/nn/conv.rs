//! Reference temporal-convolution ops: dilated causal convolution and the
//! residual block `o = relu(x + F(x))`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// Filter taps `f[0..L]` and dilation `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub taps: Vec<f64>,
    pub dilation: usize,
}

impl ConvSpec {
    pub fn new(taps: Vec<f64>, dilation: usize) -> Result<Self> {
        if taps.is_empty() || dilation == 0 {
            return Err(Error::domain("conv spec needs L >= 1 and d >= 1"));
        }
        Ok(ConvSpec { taps, dilation })
    }

    /// How far back output `k` can see: `(L - 1) · d + 1` samples.
    pub fn receptive_field(&self) -> usize {
        (self.taps.len() - 1) * self.dilation + 1
    }
}

/// `R[k] = Σ_i f[i] · x[k - d·i]`, with `x` zero for negative indices.
/// Output length equals input length.
pub fn dilated_causal_conv(spec: &ConvSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::domain("dilated_causal_conv: empty input"));
    }
    Ok((0..x.len())
        .map(|k| {
            spec.taps
                .iter()
                .enumerate()
                .take_while(|(i, _)| i * spec.dilation <= k)
                .map(|(i, &f)| f * x[k - i * spec.dilation])
                .sum()
        })
        .collect())
}

/// `o = relu(proj(x) + F(x))` over channel-major sequences (`[channel][t]`).
///
/// `projection` is the `C_out × C_in` weight of a 1×1 convolution used when
/// `F` changes the channel count; without it the widths must agree.
pub fn residual_block<F>(x: &[Vec<f64>], transform: F, projection: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<Vec<f64>>>,
{
    let t_len = x.first().map(Vec::len).unwrap_or(0);
    if x.iter().any(|c| c.len() != t_len) {
        return Err(Error::domain("residual_block: ragged input channels"));
    }
    let fx = transform(x)?;
    let skip: Vec<Vec<f64>> = match projection {
        None => x.to_vec(),
        Some(w) => w
            .iter()
            .map(|row| {
                check_len("projection width", x.len(), row.len())?;
                let mut out = vec![0.0; t_len];
                for (wc, xc) in row.iter().zip(x) {
                    for (o, v) in out.iter_mut().zip(xc) {
                        *o += wc * v;
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?,
    };
    check_len("residual channels", skip.len(), fx.len())?;
    skip.iter()
        .zip(&fx)
        .map(|(s, f)| {
            check_len("residual length", s.len(), f.len())?;
            Ok(s.iter().zip(f).map(|(a, b)| (a + b).max(0.0)).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_one_is_plain_causal_convolution() {
        let spec = ConvSpec::new(vec![0.5, -1.0, 2.0], 1).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = dilated_causal_conv(&spec, &x).unwrap();
        assert_eq!(y, vec![0.5, 0.0, 1.5, 3.0]);
    }

    #[test]
    fn impulse_response_is_spread_by_dilation() {
        let spec = ConvSpec::new(vec![1.0, 2.0, 3.0], 2).unwrap();
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        let y = dilated_causal_conv(&spec, &x).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(spec.receptive_field(), 5);
    }

    #[test]
    fn unit_filter_is_identity() {
        for d in 1..5 {
            let spec = ConvSpec::new(vec![1.0], d).unwrap();
            let x = [3.0, -1.0, 4.0, 1.5];
            assert_eq!(dilated_causal_conv(&spec, &x).unwrap(), x.to_vec());
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(ConvSpec::new(vec![], 1).is_err());
        assert!(ConvSpec::new(vec![1.0], 0).is_err());
        let spec = ConvSpec::new(vec![1.0], 1).unwrap();
        assert!(dilated_causal_conv(&spec, &[]).is_err());
    }

    #[test]
    fn residual_identity_and_cancellation() {
        let x = vec![vec![0.0, 1.0, 2.5], vec![3.0, 0.5, 0.0]];
        let id = residual_block(&x, |v| Ok(v.iter().map(|c| vec![0.0; c.len()]).collect()), None).unwrap();
        assert_eq!(id, x);
        let neg = residual_block(
            &x,
            |v| Ok(v.iter().map(|c| c.iter().map(|a| -a).collect()).collect()),
            None,
        )
        .unwrap();
        assert!(neg.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_with_projection_and_errors() {
        let x = vec![vec![1.0, -2.0], vec![0.5, 1.0]];
        let w = vec![vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, -1.0]];
        let out = residual_block(&x, |_| Ok(vec![vec![0.0; 2]; 3]), Some(&w)).unwrap();
        assert_eq!(out, vec![vec![1.5, 0.0], vec![2.0, 0.0], vec![0.0, 0.0]]);
        assert!(residual_block(&x, |_| Ok(vec![vec![0.0; 2]; 3]), None).is_err());
        assert!(residual_block(&x, |_| Ok(vec![vec![0.0; 3]; 2]), None).is_err());
    }
}
