//! The exact integer ORPT matrix and the 1-D transforms built on it.
//!
//! Columns are the basis vectors. For every divisor `d = Π p_t^r_t` of `N`
//! there are `φ(d)` columns, each the pointwise product over the prime
//! powers of `d` of an upsampled, shifted sparse Ramanujan sequence:
//!
//! ```text
//! v(n) = Π_t c^{k_t}_{p_t}( (n - j_t) / p_t^(r_t - 1) )
//! ```
//!
//! where a factor is zero whenever `n - j_t` is not a multiple of
//! `p_t^(r_t - 1)`. Shifts satisfy `0 <= j_t < p_t^(r_t - 1)` and indices
//! `0 <= k_t < p_t - 1`.
//!
//! Columns are ordered by increasing divisor; inside one divisor the shift
//! tuple varies slowest and the index tuple fastest, both lexicographic.
//! For `N = 6` this reproduces the familiar `R_6` column for column.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{check_len, Error, Result};
use crate::numtheory::{divisors, factorize, sparse_ramanujan, totient, PeriodicIntSequence};

/// Largest transform size accepted by [`OrptMatrix::build`].
pub const MAX_SIZE: usize = 4096;

/// Dense exact integer `N × N` transform matrix, stored row-major
/// (`entry(n, col)`), with the squared norm of every column cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrptMatrix {
    size: usize,
    entries: Vec<i64>,
    column_norms: Vec<i64>,
    column_divisors: Vec<u64>,
}

/// Transform coefficients `β`, each tagged with the divisor whose basis
/// column produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
    pub divisors: Vec<u64>,
}

impl CoefficientVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluates a single basis column of length `n_len`.
///
/// `shifts` and `indices` are given per prime factor of `d`, in increasing
/// prime order. `d = 1` takes empty slices and yields the all-ones column.
pub fn basis_column(n_len: usize, d: u64, shifts: &[u64], indices: &[u64]) -> Result<Vec<i64>> {
    if n_len == 0 || d == 0 || !(n_len as u64).is_multiple_of(d) {
        return Err(Error::domain("basis_column: d must divide N"));
    }
    let fact = factorize(d)?;
    let m = fact.factors().len();
    check_len("basis_column shifts", m, shifts.len())?;
    check_len("basis_column indices", m, indices.len())?;

    let mut col = vec![1i64; n_len];
    for (t, &(p, r)) in fact.factors().iter().enumerate() {
        let stride = p.pow(r - 1);
        if shifts[t] >= stride {
            return Err(Error::domain("basis_column: shift out of range"));
        }
        if indices[t] + 1 >= p {
            return Err(Error::domain("basis_column: index out of range"));
        }
        let seq = sparse_ramanujan(p, indices[t])?;
        let factor = PrimePowerFactor {
            seq,
            stride: stride as i64,
            shift: shifts[t] as i64,
        };
        for (n, v) in col.iter_mut().enumerate() {
            *v *= factor.at(n as i64);
        }
    }
    Ok(col)
}

struct PrimePowerFactor {
    seq: PeriodicIntSequence,
    stride: i64,
    shift: i64,
}

impl PrimePowerFactor {
    fn at(&self, n: i64) -> i64 {
        let m = n - self.shift;
        if m.rem_euclid(self.stride) != 0 {
            0
        } else {
            self.seq.at(m.div_euclid(self.stride))
        }
    }
}

/// Advances a mixed-radix counter (last digit fastest). Returns false on wrap.
fn next_tuple(digits: &mut [u64], radices: &[u64]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radices[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

impl OrptMatrix {
    /// Builds the `N × N` matrix and verifies completeness and exact
    /// pairwise orthogonality of the columns.
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SIZE {
            return Err(Error::domain("build_matrix: N must be in 1..=4096"));
        }
        let mut columns: Vec<Vec<i64>> = Vec::with_capacity(n);
        let mut column_divisors = Vec::with_capacity(n);

        for d in divisors(n as u64)? {
            let fact = factorize(d)?;
            let shift_radix: Vec<u64> = fact.factors().iter().map(|&(p, r)| p.pow(r - 1)).collect();
            let index_radix: Vec<u64> = fact.factors().iter().map(|&(p, _)| p - 1).collect();
            let mut shifts = vec![0u64; shift_radix.len()];
            let before = columns.len();
            loop {
                let mut indices = vec![0u64; index_radix.len()];
                loop {
                    columns.push(basis_column(n, d, &shifts, &indices)?);
                    column_divisors.push(d);
                    if !next_tuple(&mut indices, &index_radix) {
                        break;
                    }
                }
                if !next_tuple(&mut shifts, &shift_radix) {
                    break;
                }
            }
            let expected = totient(d)? as usize;
            if columns.len() - before != expected {
                return Err(Error::Construction(alloc::format!(
                    "divisor {d} produced {} columns, expected phi(d) = {expected}",
                    columns.len() - before
                )));
            }
        }
        if columns.len() != n {
            return Err(Error::Construction(alloc::format!(
                "{} columns for N = {n}",
                columns.len()
            )));
        }

        let column_norms = verify_orthogonal(&columns)?;

        let mut entries = vec![0i64; n * n];
        for (c, col) in columns.iter().enumerate() {
            for (row, &v) in col.iter().enumerate() {
                entries[row * n + c] = v;
            }
        }
        Ok(OrptMatrix {
            size: n,
            entries,
            column_norms,
            column_divisors,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.size + col]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn column(&self, col: usize) -> Vec<i64> {
        (0..self.size).map(|r| self.entry(r, col)).collect()
    }

    /// `⟨col_i, col_i⟩` for every column.
    pub fn column_norms(&self) -> &[i64] {
        &self.column_norms
    }

    /// Generating divisor of each column.
    pub fn column_divisors(&self) -> &[u64] {
        &self.column_divisors
    }

    /// Analysis `β = Rᵀ x`.
    pub fn forward(&self, x: &[f64]) -> Result<CoefficientVector> {
        check_len("forward_1d input", self.size, x.len())?;
        let mut out = vec![0.0; self.size];
        self.analyze_into(x, 1, &mut out, 1);
        Ok(CoefficientVector {
            values: out,
            divisors: self.column_divisors.clone(),
        })
    }

    /// Synthesis `x = R D⁻¹ β`, `D = diag(column_norms)`.
    pub fn inverse(&self, beta: &CoefficientVector) -> Result<Vec<f64>> {
        check_len("inverse_1d coefficients", self.size, beta.values.len())?;
        let mut out = vec![0.0; self.size];
        self.synthesize_into(&beta.values, 1, &mut out, 1);
        Ok(out)
    }

    /// Strided analysis kernel: reads `x[i * xs]`, writes `out[k * os]`.
    pub(crate) fn analyze_into(&self, x: &[f64], xs: usize, out: &mut [f64], os: usize) {
        let n = self.size;
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                let r = self.entries[i * n + k];
                if r != 0 {
                    acc += r as f64 * x[i * xs];
                }
            }
            out[k * os] = acc;
        }
    }

    /// Strided synthesis kernel, the exact inverse of [`Self::analyze_into`].
    pub(crate) fn synthesize_into(&self, beta: &[f64], bs: usize, out: &mut [f64], os: usize) {
        let n = self.size;
        for i in 0..n {
            let row = &self.entries[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for k in 0..n {
                if row[k] != 0 {
                    acc += row[k] as f64 * beta[k * bs] / self.column_norms[k] as f64;
                }
            }
            out[i * os] = acc;
        }
    }
}

/// Checks every pair of columns for an exactly zero dot product and returns
/// the squared column norms.
fn verify_orthogonal(columns: &[Vec<i64>]) -> Result<Vec<i64>> {
    let sparse: Vec<Vec<(u32, i64)>> = columns
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(i, &v)| (i as u32, v))
                .collect()
        })
        .collect();
    let norms: Vec<i64> = sparse
        .iter()
        .map(|c| c.iter().map(|&(_, v)| v * v).sum())
        .collect();
    if let Some(i) = norms.iter().position(|&v| v == 0) {
        return Err(Error::Construction(alloc::format!("column {i} is zero")));
    }
    for (i, a) in columns.iter().enumerate() {
        for (j, b) in sparse.iter().enumerate().skip(i + 1) {
            let dot: i64 = b.iter().map(|&(r, v)| a[r as usize] * v).sum();
            if dot != 0 {
                return Err(Error::Construction(alloc::format!(
                    "columns {i} and {j} are not orthogonal (dot = {dot})"
                )));
            }
        }
    }
    Ok(norms)
}

/// Plain-text export: `ORPT N` followed by `N` rows of `N` space-separated
/// integers.
impl fmt::Display for OrptMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ORPT {}", self.size)?;
        for row in self.entries.chunks(self.size) {
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) const R6: [[i64; 6]; 6] = [
        [1, 1, 2, 0, 2, 0],
        [1, -1, -1, 1, 1, -1],
        [1, 1, -1, -1, -1, -1],
        [1, -1, 2, 0, -2, 0],
        [1, 1, -1, 1, -1, 1],
        [1, -1, -1, -1, 1, 1],
    ];

    #[test]
    fn basis_column_examples() {
        assert_eq!(basis_column(6, 1, &[], &[]).unwrap(), vec![1; 6]);
        assert_eq!(
            basis_column(6, 6, &[0, 0], &[0, 1]).unwrap(),
            vec![0, -1, -1, 0, 1, 1]
        );
        assert_eq!(
            basis_column(6, 3, &[0], &[0]).unwrap(),
            vec![2, -1, -1, 2, -1, -1]
        );
        assert_eq!(basis_column(4, 4, &[1], &[0]).unwrap(), vec![0, 1, 0, -1]);
    }

    #[test]
    fn basis_column_errors() {
        assert!(basis_column(6, 4, &[0], &[0]).is_err());
        assert!(basis_column(6, 3, &[1], &[0]).is_err());
        assert!(basis_column(6, 3, &[0], &[2]).is_err());
        assert!(basis_column(6, 6, &[0], &[0]).is_err());
        assert!(basis_column(0, 1, &[], &[]).is_err());
    }

    #[test]
    fn small_matrices() {
        let r1 = OrptMatrix::build(1).unwrap();
        assert_eq!(r1.entries(), &[1]);
        let r2 = OrptMatrix::build(2).unwrap();
        assert_eq!(r2.column(0), vec![1, 1]);
        assert_eq!(r2.column(1), vec![1, -1]);
        assert!(OrptMatrix::build(0).is_err());
        assert!(OrptMatrix::build(MAX_SIZE + 1).is_err());
    }

    #[test]
    fn r6_entrywise() {
        let r = OrptMatrix::build(6).unwrap();
        for (i, row) in R6.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(r.entry(i, j), v, "({i},{j})");
            }
        }
        assert_eq!(r.column_norms(), &[6, 6, 12, 4, 12, 4]);
        assert_eq!(r.column_divisors(), &[1, 2, 3, 3, 6, 6]);
    }

    #[test]
    fn forward_examples() {
        let r = OrptMatrix::build(6).unwrap();
        let ones = r.forward(&[1.0; 6]).unwrap();
        assert_eq!(ones.values, vec![6.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let imp = r.forward(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(imp.values, vec![1.0, 1.0, 2.0, 0.0, 2.0, 0.0]);
        assert_eq!(r.forward(&[0.0; 6]).unwrap().values, vec![0.0; 6]);
        assert!(r.forward(&[0.0; 5]).is_err());
    }

    #[test]
    fn inverse_examples() {
        let r = OrptMatrix::build(6).unwrap();
        let beta = CoefficientVector {
            values: vec![6.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            divisors: r.column_divisors().to_vec(),
        };
        assert_eq!(r.inverse(&beta).unwrap(), vec![1.0; 6]);
        let zero = CoefficientVector {
            values: vec![0.0; 6],
            divisors: r.column_divisors().to_vec(),
        };
        assert_eq!(r.inverse(&zero).unwrap(), vec![0.0; 6]);
        let short = CoefficientVector {
            values: vec![0.0; 3],
            divisors: vec![1; 3],
        };
        assert!(r.inverse(&short).is_err());
    }

    #[test]
    fn text_export() {
        assert_eq!(OrptMatrix::build(1).unwrap().to_string(), "ORPT 1\n1\n");
        assert_eq!(
            OrptMatrix::build(2).unwrap().to_string(),
            "ORPT 2\n1 1\n1 -1\n"
        );
    }
}
