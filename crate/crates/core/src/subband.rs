//! Blockwise ORPT analysis operator and 2-D subband decomposition.
//!
//! For a divisor `d` of `N` the operator `B` applies `R_dᵀ` to every
//! consecutive length-`d` block of a vector and then groups the `k`-th
//! coefficient of every block into the contiguous output segment `k`:
//!
//! ```text
//! (B x)[k·(N/d) + b] = Σ_i R_d[i][k] · x[b·d + i]
//! ```
//!
//! `Y = B X Bᵀ` then splits into a `d × d` grid of equal `(N/d) × (N/d)`
//! channels; channel `(0, 0)` is the block average, the rest are details.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::matrix::OrptMatrix;

/// Square `N × N` plane of real pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    side: usize,
    pixels: Vec<f64>,
}

impl ImagePlane {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::domain("image side must be positive"));
        }
        check_len("image pixels", side * side, pixels.len())?;
        Ok(ImagePlane { side, pixels })
    }

    pub fn zeros(side: usize) -> Self {
        ImagePlane {
            side,
            pixels: vec![0.0; side * side],
        }
    }

    /// Scales raw bytes by `1/255`.
    pub fn from_bytes(side: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(side, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }

    pub fn max_abs_diff(&self, other: &ImagePlane) -> f64 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    pub fn energy(&self) -> f64 {
        self.pixels.iter().map(|v| v * v).sum()
    }
}

/// The `N × N` blockwise analysis operator built from `R_d`.
#[derive(Debug, Clone)]
pub struct AnalysisOperator {
    kernel: OrptMatrix,
    side: usize,
}

impl AnalysisOperator {
    /// `B = P · (I_{N/d} ⊗ R_dᵀ)`.
    pub fn new(kernel: OrptMatrix, side: usize) -> Result<Self> {
        let d = kernel.size();
        if side == 0 || !side.is_multiple_of(d) {
            return Err(Error::domain(alloc::format!(
                "divisor {d} does not divide image side {side}"
            )));
        }
        Ok(AnalysisOperator { kernel, side })
    }

    /// Convenience: builds `R_d` and the operator in one go.
    pub fn for_divisor(divisor: usize, side: usize) -> Result<Self> {
        if divisor == 0 || side == 0 || !side.is_multiple_of(divisor) {
            return Err(Error::domain(alloc::format!(
                "divisor {divisor} does not divide image side {side}"
            )));
        }
        Self::new(OrptMatrix::build(divisor)?, side)
    }

    pub fn divisor(&self) -> usize {
        self.kernel.size()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn kernel(&self) -> &OrptMatrix {
        &self.kernel
    }

    fn blocks(&self) -> usize {
        self.side / self.kernel.size()
    }

    /// Materializes `B` as a dense row-major `N × N` matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let (n, d, m) = (self.side, self.divisor(), self.blocks());
        let mut b = vec![0.0; n * n];
        for k in 0..d {
            for blk in 0..m {
                for i in 0..d {
                    b[(k * m + blk) * n + blk * d + i] = self.kernel.entry(i, k) as f64;
                }
            }
        }
        b
    }

    /// Materializes `B⁻¹ = (I ⊗ R_d D⁻¹) Pᵀ` densely.
    pub fn inverse_dense(&self) -> Vec<f64> {
        let (n, d, m) = (self.side, self.divisor(), self.blocks());
        let norms = self.kernel.column_norms();
        let mut b = vec![0.0; n * n];
        for k in 0..d {
            for blk in 0..m {
                for i in 0..d {
                    b[(blk * d + i) * n + k * m + blk] =
                        self.kernel.entry(i, k) as f64 / norms[k] as f64;
                }
            }
        }
        b
    }

    /// `B x` for a strided vector.
    fn apply(&self, x: &[f64], xs: usize, out: &mut [f64], os: usize) {
        let (d, m) = (self.divisor(), self.blocks());
        for blk in 0..m {
            self.kernel
                .analyze_into(&x[blk * d * xs..], xs, &mut out[blk * os..], m * os);
        }
    }

    /// `B⁻¹ y` for a strided vector.
    fn apply_inverse(&self, y: &[f64], ys: usize, out: &mut [f64], os: usize) {
        let (d, m) = (self.divisor(), self.blocks());
        for blk in 0..m {
            self.kernel
                .synthesize_into(&y[blk * ys..], m * ys, &mut out[blk * d * os..], os);
        }
    }

    /// Applies `B` to a single length-`N` vector.
    pub fn apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("analysis input", self.side, x.len())?;
        let mut out = vec![0.0; self.side];
        self.apply(x, 1, &mut out, 1);
        Ok(out)
    }

    /// `Y = B X Bᵀ`, separably: columns first, then rows.
    pub fn transform_2d(&self, x: &ImagePlane) -> Result<SubbandGrid> {
        check_len("image side", self.side, x.side)?;
        let n = self.side;
        let mut z = vec![0.0; n * n];
        for c in 0..n {
            self.apply(&x.pixels[c..], n, &mut z[c..], n);
        }
        let mut y = vec![0.0; n * n];
        for r in 0..n {
            self.apply(&z[r * n..], 1, &mut y[r * n..], 1);
        }
        Ok(SubbandGrid {
            divisor: self.divisor(),
            side: n,
            coeffs: y,
        })
    }

    /// `X = B⁻¹ Y B⁻ᵀ`.
    pub fn inverse_2d(&self, y: &SubbandGrid) -> Result<ImagePlane> {
        check_len("subband side", self.side, y.side)?;
        check_len("subband divisor", self.divisor(), y.divisor)?;
        let n = self.side;
        let mut z = vec![0.0; n * n];
        for r in 0..n {
            self.apply_inverse(&y.coeffs[r * n..], 1, &mut z[r * n..], 1);
        }
        let mut x = vec![0.0; n * n];
        for c in 0..n {
            self.apply_inverse(&z[c..], n, &mut x[c..], n);
        }
        Ok(ImagePlane {
            side: n,
            pixels: x,
        })
    }

    /// `Σ_{u,v} Y[u][v]² / (D[k(u)] · D[k(v)])`, where `k(u)` is the channel
    /// index of row/column `u`. Equals `‖X‖²_F` for `Y = B X Bᵀ`.
    pub fn weighted_energy(&self, y: &SubbandGrid) -> f64 {
        let (n, m) = (self.side, self.blocks());
        let norms = self.kernel.column_norms();
        let mut e = 0.0;
        for u in 0..n {
            let wu = norms[u / m] as f64;
            for v in 0..n {
                let c = y.coeffs[u * n + v];
                e += c * c / (wu * norms[v / m] as f64);
            }
        }
        e
    }
}

/// `d × d` grid of `(N/d) × (N/d)` coefficient channels.
///
/// Backed by the full `N × N` coefficient matrix `Y`; channel `(i, j)` is
/// the `(i, j)` block of `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandGrid {
    divisor: usize,
    side: usize,
    coeffs: Vec<f64>,
}

impl SubbandGrid {
    pub fn zeros(divisor: usize, side: usize) -> Result<Self> {
        if divisor == 0 || side == 0 || !side.is_multiple_of(divisor) {
            return Err(Error::domain("subband grid: divisor must divide side"));
        }
        Ok(SubbandGrid {
            divisor,
            side,
            coeffs: vec![0.0; side * side],
        })
    }

    pub fn divisor(&self) -> usize {
        self.divisor
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Side length of every channel, `N / d`.
    pub fn channel_side(&self) -> usize {
        self.side / self.divisor
    }

    pub fn channel_count(&self) -> usize {
        self.divisor * self.divisor
    }

    /// Full coefficient matrix `Y`, row-major.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient `t` (row-major raster) of channel `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, t: usize) -> f64 {
        let m = self.channel_side();
        let (r, c) = (t / m, t % m);
        self.coeffs[(i * m + r) * self.side + j * m + c]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, t: usize, v: f64) {
        let m = self.channel_side();
        let (r, c) = (t / m, t % m);
        self.coeffs[(i * m + r) * self.side + j * m + c] = v;
    }

    /// Copy of channel `(i, j)` as its own plane.
    pub fn channel(&self, i: usize, j: usize) -> ImagePlane {
        let m = self.channel_side();
        ImagePlane {
            side: m,
            pixels: (0..m * m).map(|t| self.get(i, j, t)).collect(),
        }
    }

    /// All channels in row-major grid order; index 0 is the average.
    pub fn channels(&self) -> Vec<ImagePlane> {
        (0..self.divisor)
            .flat_map(|i| (0..self.divisor).map(move |j| (i, j)))
            .map(|(i, j)| self.channel(i, j))
            .collect()
    }
}

/// Unnormalized 2-D Haar split of one plane into `[LL, LH, HL, HH]`.
///
/// For a 2×2 block `[[a, b], [c, d]]`: `LL = a+b+c+d`, `LH = a+b-c-d`,
/// `HL = a-b+c-d`, `HH = a-b-c+d`.
fn haar_level(x: &ImagePlane) -> [ImagePlane; 4] {
    let h = x.side / 2;
    let mut out = [
        ImagePlane::zeros(h),
        ImagePlane::zeros(h),
        ImagePlane::zeros(h),
        ImagePlane::zeros(h),
    ];
    for r in 0..h {
        for c in 0..h {
            let a = x.get(2 * r, 2 * c);
            let b = x.get(2 * r, 2 * c + 1);
            let cc = x.get(2 * r + 1, 2 * c);
            let d = x.get(2 * r + 1, 2 * c + 1);
            let idx = r * h + c;
            out[0].pixels[idx] = a + b + cc + d;
            out[1].pixels[idx] = a + b - cc - d;
            out[2].pixels[idx] = a - b + cc - d;
            out[3].pixels[idx] = a - b - cc + d;
        }
    }
    out
}

fn haar_level_inverse(bands: &[ImagePlane]) -> ImagePlane {
    let h = bands[0].side;
    let mut x = ImagePlane::zeros(2 * h);
    let n = 2 * h;
    for r in 0..h {
        for c in 0..h {
            let idx = r * h + c;
            let (ll, lh, hl, hh) = (
                bands[0].pixels[idx],
                bands[1].pixels[idx],
                bands[2].pixels[idx],
                bands[3].pixels[idx],
            );
            x.pixels[2 * r * n + 2 * c] = (ll + lh + hl + hh) / 4.0;
            x.pixels[2 * r * n + 2 * c + 1] = (ll + lh - hl - hh) / 4.0;
            x.pixels[(2 * r + 1) * n + 2 * c] = (ll - lh + hl - hh) / 4.0;
            x.pixels[(2 * r + 1) * n + 2 * c + 1] = (ll - lh - hl + hh) / 4.0;
        }
    }
    x
}

/// Haar baseline. `levels = 1` gives `[LL, LH, HL, HH]` (four `N/2` planes);
/// `levels = 2` re-splits `LL` and gives
/// `[LL2, LH2, HL2, HH2, LH1, HL1, HH1]` (four `N/4` planes then three
/// `N/2` planes).
pub fn haar_subbands(x: &ImagePlane, levels: u32) -> Result<Vec<ImagePlane>> {
    if !(1..=2).contains(&levels) {
        return Err(Error::domain("haar_subbands: levels must be 1 or 2"));
    }
    if !x.side.is_multiple_of(1 << levels) {
        return Err(Error::domain(alloc::format!(
            "haar_subbands: side {} not divisible by 2^{levels}",
            x.side
        )));
    }
    let [ll, lh, hl, hh] = haar_level(x);
    if levels == 1 {
        return Ok(vec![ll, lh, hl, hh]);
    }
    let [ll2, lh2, hl2, hh2] = haar_level(&ll);
    Ok(vec![ll2, lh2, hl2, hh2, lh, hl, hh])
}

/// Inverse of [`haar_subbands`].
pub fn haar_reconstruct(bands: &[ImagePlane]) -> Result<ImagePlane> {
    match bands.len() {
        4 => Ok(haar_level_inverse(bands)),
        7 => {
            let ll = haar_level_inverse(&bands[..4]);
            Ok(haar_level_inverse(&[
                ll,
                bands[4].clone(),
                bands[5].clone(),
                bands[6].clone(),
            ]))
        }
        n => Err(Error::domain(alloc::format!(
            "haar_reconstruct: expected 4 or 7 bands, got {n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, n: usize) -> ImagePlane {
        ImagePlane::new(n, (0..n * n).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    /// Dense `B X Bᵀ` by triple loops.
    fn dense_transform(b: &[f64], x: &[f64], n: usize) -> Vec<f64> {
        let mut bx = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                bx[i * n + j] = (0..n).map(|k| b[i * n + k] * x[k * n + j]).sum();
            }
        }
        let mut y = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                y[i * n + j] = (0..n).map(|k| bx[i * n + k] * b[j * n + k]).sum();
            }
        }
        y
    }

    #[test]
    fn operator_degenerate_cases() {
        let id = AnalysisOperator::for_divisor(1, 5).unwrap().to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(id[i * 5 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let full = AnalysisOperator::for_divisor(6, 6).unwrap();
        let r6 = full.kernel().clone();
        let dense = full.to_dense();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(dense[i * 6 + j], r6.entry(j, i) as f64);
            }
        }
        assert!(AnalysisOperator::for_divisor(5, 28).is_err());
        assert!(AnalysisOperator::for_divisor(0, 28).is_err());
    }

    #[test]
    fn operator_channel_grouping() {
        let op = AnalysisOperator::for_divisor(2, 4).unwrap();
        let (a, b, c, d) = (3.0, 5.0, 7.0, 11.0);
        assert_eq!(
            op.apply_vec(&[a, b, c, d]).unwrap(),
            vec![a + b, c + d, a - b, c - d]
        );
    }

    #[test]
    fn dense_inverse_is_inverse() {
        let op = AnalysisOperator::for_divisor(3, 12).unwrap();
        let (b, bi) = (op.to_dense(), op.inverse_dense());
        for i in 0..12 {
            for j in 0..12 {
                let v: f64 = (0..12).map(|k| bi[i * 12 + k] * b[k * 12 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn separable_transform_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(d, n) in &[(1, 6), (2, 6), (3, 6), (6, 6), (4, 12), (2, 8)] {
            let op = AnalysisOperator::for_divisor(d, n).unwrap();
            let x = random_plane(&mut rng, n);
            let y = op.transform_2d(&x).unwrap();
            let expect = dense_transform(&op.to_dense(), x.pixels(), n);
            for (a, b) in y.coefficients().iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_image_has_no_detail() {
        let op = AnalysisOperator::for_divisor(3, 6).unwrap();
        let y = op.transform_2d(&ImagePlane::new(6, vec![1.0; 36]).unwrap()).unwrap();
        let chans = y.channels();
        assert_eq!(chans.len(), 9);
        assert!(chans[0].pixels().iter().all(|&v| v == 9.0));
        for c in &chans[1..] {
            assert!(c.pixels().iter().all(|&v| v == 0.0));
        }
        let back = op.inverse_2d(&y).unwrap();
        assert!(back.pixels().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_image_and_shapes() {
        let op = AnalysisOperator::for_divisor(2, 28).unwrap();
        let y = op.transform_2d(&ImagePlane::zeros(28)).unwrap();
        assert!(y.coefficients().iter().all(|&v| v == 0.0));
        let chans = y.channels();
        assert_eq!(chans.len(), 4);
        assert!(chans.iter().all(|c| c.side() == 14));
        assert!(op.transform_2d(&ImagePlane::zeros(27)).is_err());
        let other = SubbandGrid::zeros(4, 28).unwrap();
        assert!(op.inverse_2d(&other).is_err());
    }

    #[test]
    fn divisor_one_is_passthrough() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_plane(&mut rng, 7);
        let op = AnalysisOperator::for_divisor(1, 7).unwrap();
        let y = op.transform_2d(&x).unwrap();
        assert_eq!(y.coefficients(), x.pixels());
        assert_eq!(op.inverse_2d(&y).unwrap(), x);
    }

    #[test]
    fn round_trip_and_weighted_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[12usize, 28] {
            for d in (1..=n).filter(|d| n % d == 0) {
                let op = AnalysisOperator::for_divisor(d, n).unwrap();
                for _ in 0..5 {
                    let x = random_plane(&mut rng, n);
                    let y = op.transform_2d(&x).unwrap();
                    assert!(op.inverse_2d(&y).unwrap().max_abs_diff(&x) < 1e-9);
                    let e = op.weighted_energy(&y);
                    assert!((e - x.energy()).abs() / x.energy() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn haar_shapes_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_plane(&mut rng, 28);
        let one = haar_subbands(&x, 1).unwrap();
        assert_eq!(one.len(), 4);
        assert!(one.iter().all(|p| p.side() == 14));
        let two = haar_subbands(&x, 2).unwrap();
        let sides: Vec<usize> = two.iter().map(|p| p.side()).collect();
        assert_eq!(sides, vec![7, 7, 7, 7, 14, 14, 14]);
        assert!(haar_reconstruct(&one).unwrap().max_abs_diff(&x) < 1e-12);
        assert!(haar_reconstruct(&two).unwrap().max_abs_diff(&x) < 1e-12);
        assert!(haar_subbands(&x, 3).is_err());
        assert!(haar_subbands(&random_plane(&mut rng, 6), 2).is_err());
    }

    #[test]
    fn haar_matches_divisor_two_orpt() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_plane(&mut rng, 8);
        let bands = haar_subbands(&x, 1).unwrap();
        let y = AnalysisOperator::for_divisor(2, 8).unwrap().transform_2d(&x).unwrap();
        // grid (i, j): i = row filter, j = column filter
        let order = [(0, 0), (1, 0), (0, 1), (1, 1)];
        for (band, &(i, j)) in bands.iter().zip(&order) {
            assert!(band.max_abs_diff(&y.channel(i, j)) < 1e-12);
        }
    }

    #[test]
    fn haar_constant_image_detail_zero() {
        let x = ImagePlane::new(8, vec![0.5; 64]).unwrap();
        for bands in [haar_subbands(&x, 1).unwrap(), haar_subbands(&x, 2).unwrap()] {
            assert!(bands[1..]
                .iter()
                .all(|b| b.pixels().iter().all(|&v| v == 0.0)));
        }
    }
}
