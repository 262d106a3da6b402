//! Scalar primitives shared by every other module.
//!
//! All complex powers here have positive real bases (`[k]`, `q`,
//! `q^k / [k]`), so every power is `exp(s * ln b)` with the real logarithm
//! and there is no branch cut to choose.

use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Complex scalar at binary64 precision.
pub type Complex = num_complex::Complex64;

pub(crate) const ZERO: Complex = Complex::new(0.0, 0.0);
pub(crate) const ONE: Complex = Complex::new(1.0, 0.0);

/// The deformation parameter `0 < q < 1` with its cached logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParam {
    q: f64,
    log_q: f64,
}

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 || q >= 1.0 {
            return Err(Error::InvalidQ(q));
        }
        Ok(Self {
            q,
            log_q: libm::log(q),
        })
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.q
    }

    /// Natural logarithm of `q`; always negative.
    #[inline]
    pub fn log_q(&self) -> f64 {
        self.log_q
    }

    /// Imaginary period `2*pi/|log q|` of `t -> q^t`.
    pub fn lattice_period(&self) -> f64 {
        2.0 * core::f64::consts::PI / -self.log_q
    }

    /// `ln [k]_q`, accurate also when `q` is close to 1.
    pub(crate) fn log_bracket(&self, k: u64) -> f64 {
        if k == 1 {
            return 0.0;
        }
        let qk = libm::exp(k as f64 * self.log_q);
        libm::log1p(-qk) - libm::log1p(-self.q)
    }
}

impl fmt::Display for QParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.q)
    }
}

/// Ordered argument tuple `(s_1, ..., s_r)` with `r >= 1` and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgVector(Vec<Complex>);

impl ArgVector {
    pub fn new(args: Vec<Complex>) -> Result<Self> {
        if args.is_empty() {
            return Err(Error::Domain("argument vector must have depth >= 1".into()));
        }
        if args.iter().any(|z| !is_finite(*z)) {
            return Err(Error::NonFinite);
        }
        Ok(Self(args))
    }

    pub fn from_reals(args: &[f64]) -> Result<Self> {
        Self::new(args.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex> {
        self.0
    }

    /// `s_1 + ... + s_j` for `1 <= j <= depth`.
    pub fn partial_sum(&self, j: usize) -> Complex {
        assert!(
            j >= 1 && j <= self.depth(),
            "partial sum index {j} out of range"
        );
        self.0[..j].iter().sum()
    }

    /// All partial sums `s_1, s_1 + s_2, ..., s_1 + ... + s_r`.
    pub fn partial_sums(&self) -> Vec<Complex> {
        self.0
            .iter()
            .scan(ZERO, |acc, z| {
                *acc += z;
                Some(*acc)
            })
            .collect()
    }

    /// Smallest real part among the partial sums.
    pub fn min_partial_re(&self) -> f64 {
        self.partial_sums()
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }
}

impl core::ops::Index<usize> for ArgVector {
    type Output = Complex;

    fn index(&self, i: usize) -> &Complex {
        &self.0[i]
    }
}

#[inline]
pub(crate) fn is_finite(z: Complex) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `|z|` without overflow in the intermediate squares.
#[inline]
pub fn cabs(z: Complex) -> f64 {
    libm::hypot(z.re, z.im)
}

/// `e^z`.
#[inline]
pub fn cexp(z: Complex) -> Complex {
    let m = libm::exp(z.re);
    let (s, c) = libm::sincos(z.im);
    Complex::new(m * c, m * s)
}

/// `e^z - 1` without cancellation for small `|z|`.
pub(crate) fn cexpm1(z: Complex) -> Complex {
    let (s, c) = libm::sincos(z.im);
    let em1 = libm::expm1(z.re);
    let half = libm::sin(0.5 * z.im);
    // e^x cos y - 1 = expm1(x) cos y - 2 sin^2(y/2)
    Complex::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
}

/// `[k]_q = (1 - q^k)/(1 - q) = 1 + q + ... + q^{k-1}`.
pub fn q_bracket(k: i64, q: &QParam) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain(alloc::format!(
            "q-bracket needs k >= 1, got {k}"
        )));
    }
    Ok(libm::expm1(k as f64 * q.log_q) / libm::expm1(q.log_q))
}

/// `b^s = exp(s ln b)` for a positive real base.
pub fn cpow_real_base(b: f64, s: Complex) -> Result<Complex> {
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::Domain(alloc::format!(
            "power base must be positive, got {b}"
        )));
    }
    if !is_finite(s) {
        return Err(Error::NonFinite);
    }
    Ok(cexp(s * libm::log(b)))
}

/// Pochhammer symbol `s (s+1) ... (s+k-1)`; `1` for `k = 0`.
pub fn rising_factorial(s: Complex, k: usize) -> Complex {
    (0..k).fold(ONE, |acc, j| acc * (s + j as f64))
}

/// `q_i(t) = q^{-(t+i)} - 1`.
///
/// Vanishes exactly when `t + i` lies in `(2 pi i / log q) Z`; callers that
/// divide by it guard against that themselves.
pub fn q_pole_factor(t: Complex, i: usize, q: &QParam) -> Complex {
    cexpm1(-(t + i as f64) * q.log_q)
}

/// Neumaier-compensated accumulator for complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn value(&self) -> Complex {
        Complex::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

impl core::ops::AddAssign<Complex> for CompensatedSum {
    fn add_assign(&mut self, z: Complex) {
        self.add(z);
    }
}

#[inline]
fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (s, c) = *acc;
    let t = s + x;
    let err = if s.abs() >= x.abs() {
        (s - t) + x
    } else {
        (x - t) + s
    };
    *acc = (t, c + err);
}
