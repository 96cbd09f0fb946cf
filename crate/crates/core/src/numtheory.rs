//! Exact integer number-theoretic kernels.
//!
//! Everything in here is integer arithmetic. Ramanujan sums use the
//! Möbius / totient closed form so the values are exact; the trigonometric
//! definition is kept around as [`ramanujan_sum_direct`] for cross-checking.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest argument accepted by [`divisors`].
pub const MAX_DIVISOR_ARG: u64 = 1 << 31;

/// Canonical factorization `n = Π p_i^r_i` with strictly increasing primes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrimePowerFactorization {
    factors: Vec<(u64, u32)>,
}

impl PrimePowerFactorization {
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Multiplies the factors back together.
    pub fn value(&self) -> u64 {
        self.factors.iter().map(|&(p, r)| p.pow(r)).product()
    }
}

/// One period of an integer sequence; evaluation at any integer index wraps
/// modulo the period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicIntSequence {
    values: Vec<i64>,
}

impl PeriodicIntSequence {
    fn new(values: Vec<i64>) -> Self {
        debug_assert!(!values.is_empty());
        PeriodicIntSequence { values }
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Value at `n`, reduced modulo the period (negative `n` wraps too).
    pub fn at(&self, n: i64) -> i64 {
        let q = self.values.len() as i64;
        self.values[n.rem_euclid(q) as usize]
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            return false;
        }
        p += 1;
    }
    true
}

/// All divisors of `n` in increasing order.
pub fn divisors(n: u64) -> Result<Vec<u64>> {
    if n == 0 || n > MAX_DIVISOR_ARG {
        return Err(Error::domain("divisors: argument must be in 1..=2^31"));
    }
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n.is_multiple_of(i) {
            small.push(i);
            if i != n / i {
                large.push(n / i);
            }
        }
        i += 1;
    }
    small.extend(large.into_iter().rev());
    Ok(small)
}

/// Trial-division factorization. `factorize(1)` is the empty product.
pub fn factorize(n: u64) -> Result<PrimePowerFactorization> {
    if n == 0 {
        return Err(Error::domain("factorize: argument must be positive"));
    }
    let mut factors = Vec::new();
    let mut rest = n;
    let mut p = 2;
    while p * p <= rest {
        if rest.is_multiple_of(p) {
            let mut r = 0;
            while rest.is_multiple_of(p) {
                rest /= p;
                r += 1;
            }
            factors.push((p, r));
        }
        p += 1;
    }
    if rest > 1 {
        factors.push((rest, 1));
    }
    Ok(PrimePowerFactorization { factors })
}

/// Euler's φ(n).
pub fn totient(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::domain("totient: argument must be positive"));
    }
    let f = factorize(n)?;
    Ok(f.factors
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1)))
}

/// Möbius function μ(n).
pub fn mobius(n: u64) -> Result<i64> {
    let f = factorize(n)?;
    if f.factors.iter().any(|&(_, r)| r > 1) {
        return Ok(0);
    }
    Ok(if f.factors.len() % 2 == 0 { 1 } else { -1 })
}

/// One period of the Ramanujan sum `c_q(n)`, `n = 0..q`.
///
/// Uses `c_q(n) = μ(q/g) φ(q) / φ(q/g)` with `g = gcd(n, q)`.
pub fn ramanujan_sum(q: u64) -> Result<PeriodicIntSequence> {
    if q == 0 {
        return Err(Error::domain("ramanujan_sum: period must be positive"));
    }
    let phi_q = totient(q)? as i64;
    let values = (0..q)
        .map(|n| {
            let g = gcd(n, q);
            let m = q / g;
            Ok(mobius(m)? * phi_q / totient(m)? as i64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PeriodicIntSequence::new(values))
}

/// Evaluates the exponential sum `Σ_{gcd(k,q)=1} exp(2πi k n / q)` in floating
/// point. Returns `(re, im)`; the imaginary part is zero up to rounding.
pub fn ramanujan_sum_direct(q: u64, n: i64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for k in 1..=q {
        if gcd(k, q) == 1 {
            let kn = (k as i64 * n).rem_euclid(q as i64) as f64;
            let theta = 2.0 * core::f64::consts::PI * kn / q as f64;
            re += libm::cos(theta);
            im += libm::sin(theta);
        }
    }
    (re, im)
}

/// One period of the sparse Ramanujan sequence `c^k_q(n)` for prime `q`:
///
/// ```text
/// c^k_q(n) = u((n mod q) - k) c_q(n - k) - k δ((n mod q) - k),   0 <= k < q - 1
/// ```
///
/// `c_q(n - k)` is read periodically, so the argument may be negative.
pub fn sparse_ramanujan(q: u64, k: u64) -> Result<PeriodicIntSequence> {
    if !is_prime(q) {
        return Err(Error::domain("sparse_ramanujan: period must be prime"));
    }
    if k + 1 >= q {
        return Err(Error::domain("sparse_ramanujan: index k must satisfy k < q - 1"));
    }
    let cq = ramanujan_sum(q)?;
    let k = k as i64;
    let values = (0..q as i64)
        .map(|n| {
            let r = n % q as i64;
            let step = if r >= k { cq.at(n - k) } else { 0 };
            let delta = if r == k { k } else { 0 };
            step - delta
        })
        .collect();
    Ok(PeriodicIntSequence::new(values))
}
