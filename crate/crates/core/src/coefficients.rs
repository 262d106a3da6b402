//! Entries of `M(t)^{-1}`, `H(t) = M(t)^{-1} N(t)` and the tail blocks.
//!
//! Everything here is built on the pole factors `q_i = q_i(t) = q^{-(t+i)} - 1`
//! and the coefficients
//!
//! ```text
//! L_n(t) = 1/(q_0 ... q_{n-2}) + sum_{i=2}^{n-1} sum_{p in P(i), parts >= 2} U_p(t) / prod(p_r!)
//! ```
//!
//! with `D_{1,n}(t) = t (t+1) ... (t+n-2) L_n(t)`. Each term of the
//! determinant picks a run of `c` consecutive rising-factorial factors
//! starting at offset `a`, which carries the weight `1/(c! q_a)`. Runs of
//! length one are the `1/q_v` factors; the runs of length >= 2 form the
//! partition `p`, and `U_p` sums over every way of placing those runs in
//! `0..n-1`.
//!
//! `U_p` sums over every distinct ordering of the parts. The closed form that
//! keeps only the given order and its reverse ([`u_sum_forward_backward`])
//! agrees with it while a partition has at most two distinct orderings, and
//! first differs at `n = 8` through `(3, 2, 2)`.
//!
//! Two independent determinant routes, [`hessenberg_det`] and
//! [`permutation_det`], check `L_n`.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernel::{cabs, q_pole_factor, rising_factorial, Complex, QParam, ONE, ZERO};
use crate::{Error, Result};

/// `|q_i(t)|` below this is treated as a pole.
pub const POLE_GUARD: f64 = 1e-10;

/// Largest `n` for which [`permutation_det`] will expand.
pub const PERMUTATION_DET_MAX_N: usize = 9;

/// [`CoeffTable`] switches from the partition sum to the run recurrence above this `n`.
pub const PARTITION_FORMULA_MAX_N: usize = 14;

/// A partition with every part `>= 2`, stored in nonincreasing order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    /// Canonicalises `parts` to nonincreasing order; `None` if any part is below 2.
    pub fn new(mut parts: Vec<usize>) -> Option<Self> {
        if parts.is_empty() || parts.iter().any(|&p| p < 2) {
            return None;
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Some(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// `T_r = i_1 + ... + i_r` for `r = 1..=j`.
    pub fn forward_sums(&self) -> Vec<usize> {
        prefix_sums(self.parts.iter().copied())
    }

    /// `T'_r = i_j + i_{j-1} + ... + i_{j+1-r}` for `r = 1..=j`.
    pub fn backward_sums(&self) -> Vec<usize> {
        prefix_sums(self.parts.iter().rev().copied())
    }

    /// Whether all parts are equal (the Kronecker delta of the closed form).
    pub fn all_parts_equal(&self) -> bool {
        self.parts.windows(2).all(|w| w[0] == w[1])
    }

    /// `prod_r i_r!` as a float.
    pub fn factorial_product(&self) -> f64 {
        self.parts.iter().map(|&p| factorial(p)).product()
    }

    /// Every distinct ordering of the parts, starting with the stored one.
    pub fn arrangements(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(self.parts.len());
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for &p in &self.parts {
            match counts.last_mut() {
                Some((v, c)) if *v == p => *c += 1,
                _ => counts.push((p, 1)),
            }
        }
        fn go(
            counts: &mut [(usize, usize)],
            len: usize,
            cur: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if cur.len() == len {
                out.push(cur.clone());
                return;
            }
            for idx in 0..counts.len() {
                if counts[idx].1 == 0 {
                    continue;
                }
                counts[idx].1 -= 1;
                cur.push(counts[idx].0);
                go(counts, len, cur, out);
                cur.pop();
                counts[idx].1 += 1;
            }
        }
        go(&mut counts, self.parts.len(), &mut current, &mut out);
        out
    }
}

fn prefix_sums(it: impl Iterator<Item = usize>) -> Vec<usize> {
    it.scan(0, |acc, p| {
        *acc += p;
        Some(*acc)
    })
    .collect()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (2..=n).map(|k| k as f64).product()
}

/// All partitions of `i` into parts `>= 2`, largest first part first.
pub fn partitions_no_ones(i: usize) -> Vec<Partition> {
    fn go(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rest == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        for p in (2..=rest.min(max)).rev() {
            cur.push(p);
            go(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if i >= 2 {
        go(i, i, &mut Vec::new(), &mut out);
    }
    out
}

/// Reciprocals `1/q_i(t)` for `i = 0..count`, refusing anything inside [`POLE_GUARD`].
#[derive(Debug, Clone)]
pub struct PoleFactors {
    inv: Vec<Complex>,
}

impl PoleFactors {
    pub fn new(t: Complex, count: usize, q: &QParam) -> Result<Self> {
        let mut inv = Vec::with_capacity(count);
        for i in 0..count {
            let f = q_pole_factor(t, i, q);
            let mag = cabs(f);
            if mag.is_nan() || mag < POLE_GUARD {
                return Err(Error::Singular { index: i });
            }
            inv.push(ONE / f);
        }
        Ok(Self { inv })
    }

    /// `1/q_i(t)`.
    #[inline]
    pub fn inv(&self, i: usize) -> Complex {
        self.inv[i]
    }

    pub fn len(&self) -> usize {
        self.inv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv.is_empty()
    }
}

/// Sum over placements of the runs `order` (in that order) among `n - 1 - i`
/// unit runs, following the nested index form
/// `0 <= c_1 <= ... <= c_j <= n - i - 1` with `c_b` unit runs before run `b`.
fn ordered_run_sum(order: &[usize], n: usize, f: &PoleFactors) -> Complex {
    let i: usize = order.iter().sum();
    let ones = n - 1 - i;
    let offsets = prefix_sums(order.iter().copied());

    // prod_{u=0}^{c_1} 1/q_u
    let head = |c1: usize| (0..=c1).fold(ONE, |acc, u| acc * f.inv(u));
    // prod_{v=i+c_j}^{n-2} 1/q_v
    let tail = |cj: usize| (i + cj..=n - 2).fold(ONE, |acc, v| acc * f.inv(v));

    fn inner(
        r: usize,
        prev: usize,
        ones: usize,
        offsets: &[usize],
        f: &PoleFactors,
        acc: Complex,
        tail: &dyn Fn(usize) -> Complex,
    ) -> Complex {
        // r indexes the gap between run r and run r+1 (1-based as in T_r)
        if r == offsets.len() {
            return acc * tail(prev);
        }
        let base = offsets[r - 1];
        let mut sum = ZERO;
        let mut factor = ONE;
        for next in prev..=ones {
            // prod_{s=prev}^{next} 1/q_{T_r + s}
            if next == prev {
                factor = f.inv(base + prev);
            } else {
                factor *= f.inv(base + next);
            }
            sum += inner(r + 1, next, ones, offsets, f, acc * factor, tail);
        }
        sum
    }

    let mut total = ZERO;
    for c1 in 0..=ones {
        total += inner(1, c1, ones, &offsets, f, head(c1), &tail);
    }
    total
}

fn check_u_sum_args(p: &Partition, n: usize) -> Result<()> {
    if n < p.total() + 1 {
        return Err(Error::Domain(alloc::format!(
            "U-sum for a partition of {} needs n >= {}, got {n}",
            p.total(),
            p.total() + 1
        )));
    }
    Ok(())
}

/// `U_p(t)` for `L_n`: the run-placement sum over every distinct ordering of `p`.
pub fn u_sum(p: &Partition, t: Complex, n: usize, q: &QParam) -> Result<Complex> {
    check_u_sum_args(p, n)?;
    let f = PoleFactors::new(t, n - 1, q)?;
    Ok(u_sum_with(p, n, &f))
}

fn u_sum_with(p: &Partition, n: usize, f: &PoleFactors) -> Complex {
    p.arrangements()
        .iter()
        .map(|order| ordered_run_sum(order, n, f))
        .sum()
}

/// The forward-plus-backward closed form: the stored order plus, unless all
/// parts are equal, the reversed order.
///
/// Equal to [`u_sum`] whenever `p` has at most two distinct orderings.
pub fn u_sum_forward_backward(p: &Partition, t: Complex, n: usize, q: &QParam) -> Result<Complex> {
    check_u_sum_args(p, n)?;
    let f = PoleFactors::new(t, n - 1, q)?;
    let mut v = ordered_run_sum(p.parts(), n, &f);
    if !p.all_parts_equal() {
        let rev: Vec<usize> = p.parts().iter().rev().copied().collect();
        v += ordered_run_sum(&rev, n, &f);
    }
    Ok(v)
}

fn l_from_partitions(n: usize, f: &PoleFactors, u: impl Fn(&Partition) -> Complex) -> Complex {
    if n == 1 {
        return ONE;
    }
    let mut total = (0..=n - 2).fold(ONE, |acc, i| acc * f.inv(i));
    for i in 2..n {
        for p in partitions_no_ones(i) {
            total += u(&p) / p.factorial_product();
        }
    }
    total
}

/// `L_n(t)` by the partition formula. `L_1 = 1`.
pub fn l_n(n: usize, t: Complex, q: &QParam) -> Result<Complex> {
    if n == 0 {
        return Err(Error::Domain("L_n needs n >= 1".into()));
    }
    let f = PoleFactors::new(t, n.saturating_sub(1), q)?;
    Ok(l_from_partitions(n, &f, |p| u_sum_with(p, n, &f)))
}

/// `L_n(t)` with [`u_sum_forward_backward`] in place of [`u_sum`].
pub fn l_n_forward_backward(n: usize, t: Complex, q: &QParam) -> Result<Complex> {
    if n == 0 {
        return Err(Error::Domain("L_n needs n >= 1".into()));
    }
    let f = PoleFactors::new(t, n.saturating_sub(1), q)?;
    Ok(l_from_partitions(n, &f, |p| {
        let mut v = ordered_run_sum(p.parts(), n, &f);
        if !p.all_parts_equal() {
            let rev: Vec<usize> = p.parts().iter().rev().copied().collect();
            v += ordered_run_sum(&rev, n, &f);
        }
        v
    }))
}

/// `L_n` by the run recurrence `F(a) = sum_c F(a+c) / (c! q_a)`, `F(n-1) = 1`, `L_n = F(0)`.
fn l_by_runs(n: usize, f: &PoleFactors) -> Complex {
    let last = n - 1;
    let mut tail = vec![ZERO; n];
    tail[last] = ONE;
    for a in (0..last).rev() {
        let mut acc = ZERO;
        let mut inv_fact = 1.0;
        for c in 1..=last - a {
            inv_fact /= c as f64;
            acc += tail[a + c] * inv_fact;
        }
        tail[a] = acc * f.inv(a);
    }
    tail[0]
}

/// `(t + offset)_{len} / fact!` for `fact <= len`, without forming either factorial.
pub(crate) fn rising_over_factorial(t: Complex, offset: usize, len: usize, fact: usize) -> Complex {
    debug_assert!(fact <= len);
    let base = t + offset as f64;
    let mut v = ONE;
    for l in 0..len {
        v *= base + l as f64;
        if l < fact {
            v /= (l + 1) as f64;
        }
    }
    v
}

#[inline]
fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Absolute values of the entries of the `(n-1) x (n-1)` matrix whose
/// determinant is `D_{1,n}(t)`: `a[i][j] = (t+i)_{j-i+1} / ((j-i+1)! q_i)` on and
/// above the diagonal (0-based), ones on the subdiagonal.
#[allow(clippy::needless_range_loop)]
fn d_matrix_magnitudes(n: usize, t: Complex, f: &PoleFactors) -> Vec<Vec<Complex>> {
    let m = n - 1;
    let mut a = vec![vec![ZERO; m]; m];
    for i in 0..m {
        for j in i..m {
            let c = j - i + 1;
            a[i][j] = rising_over_factorial(t, i, c, c) * f.inv(i);
        }
        if i + 1 < m {
            a[i + 1][i] = ONE;
        }
    }
    a
}

fn check_det_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain("D_{1,n} needs n >= 2".into()));
    }
    Ok(())
}

/// `D_{1,n}(t)` from the all-positive upper-Hessenberg recurrence
/// `d_k = a_kk d_{k-1} + sum_{i<k} a_ik prod_{j=i}^{k-1} a_{j+1,j} d_{i-1}`.
pub fn hessenberg_det(n: usize, t: Complex, q: &QParam) -> Result<Complex> {
    check_det_n(n)?;
    let f = PoleFactors::new(t, n - 1, q)?;
    let a = d_matrix_magnitudes(n, t, &f);
    Ok(hessenberg_recurrence(&a))
}

/// Determinant of a sign-alternating upper-Hessenberg matrix given the
/// magnitudes of its entries.
pub fn hessenberg_recurrence(a: &[Vec<Complex>]) -> Complex {
    let m = a.len();
    let mut d = vec![ZERO; m + 1];
    d[0] = ONE;
    for k in 1..=m {
        let mut acc = a[k - 1][k - 1] * d[k - 1];
        let mut sub = ONE;
        for i in (1..k).rev() {
            sub *= a[i][i - 1];
            acc += a[i - 1][k - 1] * sub * d[i - 1];
        }
        d[k] = acc;
    }
    d[m]
}

/// `D_{1,n}(t)` by signed Leibniz expansion over permutations with
/// `sigma(j) >= j - 1`, for `n <= 9`.
pub fn permutation_det(n: usize, t: Complex, q: &QParam) -> Result<Complex> {
    check_det_n(n)?;
    if n > PERMUTATION_DET_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: PERMUTATION_DET_MAX_N,
        });
    }
    let f = PoleFactors::new(t, n - 1, q)?;
    let mag = d_matrix_magnitudes(n, t, &f);
    let m = n - 1;
    // signed entries as displayed: (-1)^{j-i} above the diagonal
    let signed: Vec<Vec<Complex>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if j >= i {
                        mag[i][j] * sign(j - i)
                    } else {
                        mag[i][j]
                    }
                })
                .collect()
        })
        .collect();

    fn go(
        row: usize,
        used: &mut [bool],
        inversions: usize,
        acc: Complex,
        a: &[Vec<Complex>],
    ) -> Complex {
        let m = a.len();
        if row == m {
            return acc * sign(inversions);
        }
        let mut sum = ZERO;
        for col in row.saturating_sub(1)..m {
            if used[col] {
                continue;
            }
            let entry = a[row][col];
            if entry == ZERO {
                continue;
            }
            let inv = used[col + 1..].iter().filter(|&&u| u).count();
            used[col] = true;
            sum += go(row + 1, used, inversions + inv, acc * entry, a);
            used[col] = false;
        }
        sum
    }
    let mut used = vec![false; m];
    Ok(go(0, &mut used, 0, ONE, &signed))
}

/// `R_{1,n}(t) = (-1)^{n-1} t (t+1) ... (t+n-2) L_n(t)`, the `(1, n)` entry of `M(t)^{-1}`.
pub fn r_entry(n: usize, t: Complex, q: &QParam) -> Result<Complex> {
    if n == 0 {
        return Err(Error::Domain("R_{1,n} needs n >= 1".into()));
    }
    Ok(rising_factorial(t, n - 1) * l_n(n, t, q)? * sign(n - 1))
}

/// General entry `m_{k,n}(t)` of `M(t)^{-1}` (1-based) via `m_{k,n}(t) = R_{1,n-k+1}(t+k-1)`.
pub fn m_inv_entry(k: usize, n: usize, t: Complex, q: &QParam) -> Result<Complex> {
    if k == 0 || n == 0 {
        return Err(Error::Domain("matrix indices are 1-based".into()));
    }
    if k > n {
        return Ok(ZERO);
    }
    r_entry(n - k + 1, t + (k - 1) as f64, q)
}

/// `H_{1,n}(t) = (-1)^{n-1} t ... (t+n-2) sum_{i=1}^n L_i(t) / ((n-i)! q_{i-1}(t))`.
pub fn h_entry(n: usize, t: Complex, q: &QParam) -> Result<Complex> {
    if n == 0 {
        return Err(Error::Domain("H_{1,n} needs n >= 1".into()));
    }
    let table = CoeffTable::new(t, q, n)?;
    table.h_entry(n)
}

/// Entry `(m, n)` of `M_II(t)^{-1} N_IJ(t)` for block size `K`:
///
/// `(-1)^{K+n-m} (t+m-1) ... (t+K+n-2) sum_{j=1}^{K-m+1} L_j(t+m-1) / ((K+n-m-j+1)! q_{m-2+j}(t))`.
///
/// Since `N_IJ = -M_IJ`, this is also minus the entry of `M_II^{-1} M_IJ`.
pub fn r_tail_entry(m: usize, n: usize, t: Complex, k_block: usize, q: &QParam) -> Result<Complex> {
    if m == 0 || m > k_block || n == 0 {
        return Err(Error::Domain(alloc::format!(
            "tail entry needs 1 <= m <= K and n >= 1 (m={m}, n={n}, K={k_block})"
        )));
    }
    let shifted = t + (m - 1) as f64;
    let span = k_block - m + 1;
    let table = CoeffTable::new(shifted, q, span)?;
    let f = PoleFactors::new(t, k_block, q)?;
    let len = k_block + n - m;
    let mut sum = ZERO;
    for j in 1..=span {
        let fact = k_block + n - m - j + 1;
        sum += table.l(j) * rising_over_factorial(t, m - 1, len, fact) * f.inv(m + j - 2);
    }
    Ok(sum * sign(len))
}

/// `L_1(t), ..., L_{n_max}(t)` for one base point, filled once.
#[derive(Debug, Clone)]
pub struct CoeffTable {
    base_t: Complex,
    q: QParam,
    factors: PoleFactors,
    l: Vec<Complex>,
}

impl CoeffTable {
    /// Needs `q_i(t) != 0` for `0 <= i <= n_max - 1` (one more than `L_{n_max}`
    /// itself uses, so that `H_{1,n}` for `n <= n_max` is available too).
    pub fn new(t: Complex, q: &QParam, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Domain("coefficient table needs n_max >= 1".into()));
        }
        let factors = PoleFactors::new(t, n_max.max(1), q)?;
        let l = Self::fill(n_max, &factors);
        Ok(Self {
            base_t: t,
            q: *q,
            factors,
            l,
        })
    }

    /// Like [`CoeffTable::new`] but only requires the factors `L_{n_max}` uses
    /// (`q_0 .. q_{n_max-2}`); `h_entry(n_max)` is then unavailable.
    pub fn l_only(t: Complex, q: &QParam, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Domain("coefficient table needs n_max >= 1".into()));
        }
        let factors = PoleFactors::new(t, n_max - 1, q)?;
        let l = Self::fill(n_max, &factors);
        Ok(Self {
            base_t: t,
            q: *q,
            factors,
            l,
        })
    }

    fn fill(n_max: usize, f: &PoleFactors) -> Vec<Complex> {
        (1..=n_max)
            .map(|n| {
                if n <= PARTITION_FORMULA_MAX_N {
                    l_from_partitions(n, f, |p| u_sum_with(p, n, f))
                } else {
                    l_by_runs(n, f)
                }
            })
            .collect()
    }

    pub fn base_t(&self) -> Complex {
        self.base_t
    }

    pub fn q(&self) -> &QParam {
        &self.q
    }

    pub fn n_max(&self) -> usize {
        self.l.len()
    }

    /// `L_n(base_t)`, `1 <= n <= n_max`.
    pub fn l(&self, n: usize) -> Complex {
        self.l[n - 1]
    }

    /// `1/q_i(base_t)`.
    pub fn inv_q(&self, i: usize) -> Complex {
        self.factors.inv(i)
    }

    pub fn r_entry(&self, n: usize) -> Complex {
        rising_factorial(self.base_t, n - 1) * self.l(n) * sign(n - 1)
    }

    pub fn h_entry(&self, n: usize) -> Result<Complex> {
        if n == 0 || n > self.n_max() || n > self.factors.len() {
            return Err(Error::Domain(alloc::format!(
                "H_{{1,{n}}} is outside this table"
            )));
        }
        let t = self.base_t;
        let mut sum = ZERO;
        for i in 1..=n {
            sum += self.l(i) * rising_over_factorial(t, 0, n - 1, n - i) * self.inv_q(i - 1);
        }
        Ok(sum * sign(n - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn rel(a: Complex, b: Complex) -> f64 {
        cabs(a - b) / cabs(b).max(1e-300)
    }

    fn half() -> QParam {
        QParam::new(0.5).unwrap()
    }

    #[test]
    fn partition_examples() {
        let parts = |i| -> Vec<Vec<usize>> {
            partitions_no_ones(i)
                .iter()
                .map(|p| p.parts().to_vec())
                .collect()
        };
        assert_eq!(parts(2), vec![vec![2]]);
        assert_eq!(parts(4), vec![vec![4], vec![2, 2]]);
        assert_eq!(
            parts(6),
            vec![vec![6], vec![4, 2], vec![3, 3], vec![2, 2, 2]]
        );
        assert!(parts(1).is_empty());
        assert!(parts(0).is_empty());
    }

    #[test]
    fn partition_counts_match_brute_force() {
        // brute force: all compositions into parts >= 2, sorted and deduplicated
        fn compositions(i: usize) -> Vec<Vec<usize>> {
            if i == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for first in 2..=i {
                for mut rest in compositions(i - first) {
                    rest.insert(0, first);
                    out.push(rest);
                }
            }
            out
        }
        for i in 2..=20 {
            let mut brute: Vec<Vec<usize>> = compositions(i)
                .into_iter()
                .map(|mut v| {
                    v.sort_unstable_by(|a, b| b.cmp(a));
                    v
                })
                .collect();
            brute.sort();
            brute.dedup();
            let ours = partitions_no_ones(i);
            assert_eq!(ours.len(), brute.len(), "i = {i}");
            let mut sorted: Vec<Vec<usize>> = ours.iter().map(|p| p.parts().to_vec()).collect();
            sorted.sort();
            assert_eq!(sorted, brute);
        }
    }

    #[test]
    fn partition_accessors() {
        let p = Partition::new(vec![2, 3, 2]).unwrap();
        assert_eq!(p.parts(), &[3, 2, 2]);
        assert_eq!(p.forward_sums(), vec![3, 5, 7]);
        assert_eq!(p.backward_sums(), vec![2, 4, 7]);
        assert!(!p.all_parts_equal());
        assert_eq!(
            p.arrangements(),
            vec![vec![3, 2, 2], vec![2, 3, 2], vec![2, 2, 3]]
        );
        assert!(Partition::new(vec![3, 1]).is_none());
        assert!(Partition::new(vec![2, 2]).unwrap().all_parts_equal());
    }

    #[test]
    fn u_sum_examples() {
        let q = half();
        let t1 = c(1.0, 0.0);
        // L_3(1) = 1/(q0 q1) + u/2! with q0 = 1, q1 = 3 and L_3(1) = 5/6 forces u = 1
        let u = u_sum(&Partition::new(vec![2]).unwrap(), t1, 3, &q).unwrap();
        assert!(rel(u, c(1.0, 0.0)) < 1e-15);

        let t = c(0.37, -0.61);
        let qq = QParam::new(0.7).unwrap();
        let inv = |i| ONE / q_pole_factor(t, i, &qq);
        let expect22 =
            inv(0) * inv(2) * inv(4) + inv(0) * inv(2) * inv(3) + inv(0) * inv(1) * inv(3);
        let p22 = Partition::new(vec![2, 2]).unwrap();
        assert!(rel(u_sum(&p22, t, 6, &qq).unwrap(), expect22) < 1e-14);
        let expect32 = inv(0) * inv(2) + inv(0) * inv(3);
        let p32 = Partition::new(vec![3, 2]).unwrap();
        assert!(rel(u_sum(&p32, t, 6, &qq).unwrap(), expect32) < 1e-14);
        assert!(rel(u_sum_forward_backward(&p32, t, 6, &qq).unwrap(), expect32) < 1e-14);

        assert!(u_sum(&p32, t, 5, &qq).is_err());
    }

    #[test]
    fn l_n_examples() {
        let q = half();
        let t1 = c(1.0, 0.0);
        assert_eq!(l_n(1, c(-3.3, 2.0), &q).unwrap(), ONE);
        assert!(rel(l_n(2, t1, &q).unwrap(), ONE) < 1e-15);
        assert!(rel(l_n(3, t1, &q).unwrap(), c(5.0 / 6.0, 0.0)) < 1e-15);
        assert!(matches!(
            l_n(3, ZERO, &q),
            Err(Error::Singular { index: 0 })
        ));
        // L_2 q_0 = 1
        let t = c(-0.4, 0.9);
        assert!(rel(l_n(2, t, &q).unwrap() * q_pole_factor(t, 0, &q), ONE) < 1e-14);
    }

    #[test]
    fn determinant_examples() {
        let q = half();
        let t1 = c(1.0, 0.0);
        let t = c(0.3, 0.2);
        let h2 = hessenberg_det(2, t, &q).unwrap();
        assert!(rel(h2, t / q_pole_factor(t, 0, &q)) < 1e-15);
        assert_eq!(permutation_det(2, t, &q).unwrap(), h2);
        assert!(rel(hessenberg_det(3, t1, &q).unwrap(), c(5.0 / 3.0, 0.0)) < 1e-15);
        assert!(rel(permutation_det(3, t1, &q).unwrap(), c(5.0 / 3.0, 0.0)) < 1e-15);
        assert!(matches!(
            permutation_det(10, t, &q),
            Err(Error::TooLarge { .. })
        ));
        assert!(hessenberg_det(1, t, &q).is_err());
    }

    #[test]
    fn entry_examples() {
        let q = half();
        let t1 = c(1.0, 0.0);
        assert_eq!(r_entry(1, c(0.2, 0.1), &q).unwrap(), ONE);
        assert!(rel(r_entry(2, t1, &q).unwrap(), c(-1.0, 0.0)) < 1e-15);
        assert!(rel(r_entry(3, t1, &q).unwrap(), c(5.0 / 3.0, 0.0)) < 1e-15);
        assert!(rel(h_entry(1, t1, &q).unwrap(), ONE) < 1e-15);
        assert_eq!(m_inv_entry(3, 2, t1, &q).unwrap(), ZERO);
        assert_eq!(m_inv_entry(2, 2, t1, &q).unwrap(), ONE);

        // m = K, n = 1: -(t+K-1) L_1 / (1! q_{K-1}(t))
        let t = c(0.45, -0.2);
        for k in 1..5 {
            let v = r_tail_entry(k, 1, t, k, &q).unwrap();
            let expect = -(t + (k - 1) as f64) / q_pole_factor(t, k - 1, &q);
            assert!(rel(v, expect) < 1e-14);
        }
        assert!(r_tail_entry(0, 1, t, 2, &q).is_err());
        assert!(r_tail_entry(3, 1, t, 2, &q).is_err());
    }

    #[test]
    fn run_recurrence_matches_partition_formula() {
        let q = QParam::new(0.63).unwrap();
        let t = c(-1.3, 0.4);
        let f = PoleFactors::new(t, 16, &q).unwrap();
        for n in 1..=12 {
            let a = l_n(n, t, &q).unwrap();
            let b = if n == 1 { ONE } else { l_by_runs(n, &f) };
            assert!(rel(a, b) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn forward_backward_form_differs_from_n_8() {
        let q = QParam::new(0.5).unwrap();
        let t = c(0.37, 0.21);
        for n in 1..=7 {
            let a = l_n(n, t, &q).unwrap();
            let b = l_n_forward_backward(n, t, &q).unwrap();
            assert!(rel(a, b) < 1e-13, "n = {n}");
        }
        let exact = hessenberg_det(8, t, &q).unwrap() / rising_factorial(t, 7);
        let full = l_n(8, t, &q).unwrap();
        let two = l_n_forward_backward(8, t, &q).unwrap();
        assert!(rel(full, exact) < 1e-12);
        assert!(rel(two, exact) > 1e-3);
        // the gap is exactly the middle ordering (2, 3, 2)
        let f = PoleFactors::new(t, 7, &q).unwrap();
        let missing = ordered_run_sum(&[2, 3, 2], 8, &f) / 24.0;
        assert!(rel(two + missing, full) < 1e-12);
    }

    #[test]
    fn coeff_table_consistency() {
        let q = QParam::new(0.8).unwrap();
        let t = c(0.6, 1.4);
        let table = CoeffTable::new(t, &q, 18).unwrap();
        assert_eq!(table.l(1), ONE);
        for n in 1..=9 {
            assert!(rel(table.l(n), l_n(n, t, &q).unwrap()) < 1e-13);
        }
        let f = PoleFactors::new(t, 18, &q).unwrap();
        for n in 15..=18 {
            assert!(rel(table.l(n), l_by_runs(n, &f)) < 1e-15);
        }
        assert!(CoeffTable::new(ZERO, &q, 3).is_err());
        // L_1 needs no factor, so a table at a pole of q_0 still exists for l_only(1)
        assert!(CoeffTable::l_only(ZERO, &q, 1).is_ok());
    }
}
