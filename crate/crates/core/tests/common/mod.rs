#![allow(dead_code)]

use qmz_core::kernel::{cabs, cexp};
use qmz_core::{Complex, QParam};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn rel(a: Complex, b: Complex) -> f64 {
    cabs(a - b) / cabs(b).max(1e-300)
}

/// Distance from `z` to the set `(2 pi i / log q) Z` where `q^{-z} = 1`.
pub fn dist_to_period_lattice(z: Complex, q: &QParam) -> f64 {
    let step = 2.0 * std::f64::consts::PI / q.log_q().abs();
    let m = (z.im / step).round();
    cabs(z - Complex::new(0.0, m * step))
}

/// Distance from `z` to the pole lattice `Z_{<=0} + (2 pi i / log q) Z`.
pub fn dist_to_pole_lattice(z: Complex, q: &QParam) -> f64 {
    let step = 2.0 * std::f64::consts::PI / q.log_q().abs();
    let k = (-z.re).round().max(0.0);
    let m = (z.im / step).round();
    cabs(z - Complex::new(-k, m * step))
}

/// `(t, q)` with `t` in `[-3, 3]^2` and every `t + i`, `0 <= i < n`, at least
/// `0.05` from the zeros of `q_i`.
pub fn coefficient_point(rng: &mut ChaCha8Rng, n: usize) -> (Complex, QParam) {
    loop {
        let q = QParam::new(rng.gen_range(0.2..0.9)).unwrap();
        let t = Complex::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        if (0..n).all(|i| dist_to_period_lattice(t + i as f64, &q) >= 0.05) {
            return (t, q);
        }
    }
}

/// `zeta_q(s)` of the SZ model from the binomial expansion
///
/// `[k]^{-s} = (1-q)^s sum_m (s)_m / m! q^{k m}`,
///
/// which after summing the geometric series in `k` gives
///
/// `(1-q)^{s_1+...+s_r} sum_{m in N^r} prod_i (s_i)_{m_i}/m_i! prod_j y_j/(1-y_j)`,
/// `y_j = q^{(s_1+m_1)+...+(s_j+m_j)}`,
///
/// valid at every point off the pole lattice. Each `m_i` runs to `m_max`.
pub fn binomial_oracle(s: &[Complex], q: f64, m_max: usize) -> Complex {
    let r = s.len();
    let ln_q = q.ln();
    let coef: Vec<Vec<Complex>> = s
        .iter()
        .map(|&si| {
            let mut v = Vec::with_capacity(m_max + 1);
            let mut c = Complex::new(1.0, 0.0);
            for m in 0..=m_max {
                v.push(c);
                c = c * (si + m as f64) / (m + 1) as f64;
            }
            v
        })
        .collect();
    let sigma: Vec<Complex> = s
        .iter()
        .scan(Complex::new(0.0, 0.0), |acc, z| {
            *acc += z;
            Some(*acc)
        })
        .collect();
    let q_sigma: Vec<Complex> = sigma.iter().map(|z| cexp(z * ln_q)).collect();
    let q_int: Vec<f64> = (0..=r * m_max).map(|n| q.powi(n as i32)).collect();

    fn go(
        level: usize,
        shift: usize,
        acc: Complex,
        coef: &[Vec<Complex>],
        q_sigma: &[Complex],
        q_int: &[f64],
        m_max: usize,
    ) -> Complex {
        if level == coef.len() {
            return acc;
        }
        let mut total = Complex::new(0.0, 0.0);
        for m in 0..=m_max {
            let y = q_sigma[level] * q_int[shift + m];
            let f = acc * coef[level][m] * y / (Complex::new(1.0, 0.0) - y);
            total += go(level + 1, shift + m, f, coef, q_sigma, q_int, m_max);
        }
        total
    }
    let sum = go(0, 0, Complex::new(1.0, 0.0), &coef, &q_sigma, &q_int, m_max);
    let pre = cexp(sigma[r - 1] * (1.0 - q).ln());
    pre * sum
}

/// Argument tuple of depth `r` with `s_j` in `[-1.5, 1.5] + i[-1, 1]`, every
/// partial sum at least `0.1` from the pole lattice and the smallest real
/// part of a partial sum inside `(lo, hi]`.
pub fn sample_args(rng: &mut ChaCha8Rng, r: usize, q: &QParam, lo: f64, hi: f64) -> Vec<Complex> {
    loop {
        let s: Vec<Complex> = (0..r)
            .map(|_| Complex::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut acc = Complex::new(0.0, 0.0);
        let mut min_re = f64::INFINITY;
        let mut ok = true;
        for z in &s {
            acc += z;
            min_re = min_re.min(acc.re);
            ok &= dist_to_pole_lattice(acc, q) >= 0.1;
        }
        if ok && min_re > lo && min_re <= hi {
            return s;
        }
    }
}
