//! Pole loci and residues.
//!
//! The SZ model of depth `r` is singular exactly where some partial sum
//! `s_1 + ... + s_j` lies on the lattice `Z_{<=0} + (2 pi i / log q) Z`. All
//! poles are simple. Residues are taken in the transverse coordinate
//! `u = s_1 + ... + s_j + k`.

use alloc::vec::Vec;
use core::fmt;

use crate::coefficients::{factorial, l_n, CoeffTable};
use crate::kernel::{cabs, ArgVector, Complex, QParam, ONE, ZERO};
use crate::matrix::{continue_eval, ContinuationPlan};
use crate::series::{eval_series, in_domain, ModelKind, SumBudget};
use crate::{Error, Result};

/// The hyperplane `s_1 + ... + s_j = -k + m (2 pi i / log q)`.
///
/// `k` is negative only for BZ branches (`s_1 = 1 + ...` and `s_1 + ... + s_j <= j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HyperplaneId {
    /// Partial-sum index, `1 <= j <= r`.
    pub j: usize,
    pub k: i64,
    /// Lattice sheet; 0 is the real one.
    pub m: i64,
}

impl HyperplaneId {
    /// The lattice point `-k + m (2 pi i / log q)`.
    pub fn point(&self, q: &QParam) -> Complex {
        Complex::new(
            -(self.k as f64),
            self.m as f64 * 2.0 * core::f64::consts::PI / q.log_q(),
        )
    }
}

impl fmt::Display for HyperplaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(j={}, k={}, m={})", self.j, self.k, self.m)
    }
}

/// Models with a known pole set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocusModel {
    Sz,
    Bz,
}

/// How a residue was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    NumericLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueResult {
    pub value: Complex,
    pub hyperplane: HyperplaneId,
    pub method: Method,
}

/// Nearest lattice point `(k, m)` to `z`, with its distance.
fn nearest_lattice(z: Complex, q: &QParam) -> (i64, i64, f64) {
    let step = 2.0 * core::f64::consts::PI / q.log_q();
    let k = libm::round(-z.re) as i64;
    let m = libm::round(z.im / step) as i64;
    let p = Complex::new(-(k as f64), m as f64 * step);
    (k, m, cabs(z - p))
}

/// Every hyperplane of the model's pole set passing within `tol` of `s`
/// (distance measured on the partial sum).
pub fn pole_locus(model: LocusModel, s: &ArgVector, q: &QParam, tol: f64) -> Vec<HyperplaneId> {
    let mut out = Vec::new();
    for (idx, sigma) in s.partial_sums().into_iter().enumerate() {
        let j = idx + 1;
        let (k, m, dist) = nearest_lattice(sigma, q);
        if dist > tol {
            continue;
        }
        let hit = match model {
            LocusModel::Sz => k >= 0,
            LocusModel::Bz if j == 1 => k == -1 || (k >= 0 && m != 0),
            LocusModel::Bz => k >= -(j as i64),
        };
        if hit {
            out.push(HyperplaneId { j, k, m });
        }
    }
    out
}

/// `zeta_q` of the SZ model at `s`, by direct summation on the domain and
/// continuation elsewhere. The empty tuple has value 1.
fn zeta_anywhere(s: &[Complex], q: &QParam, plan: ContinuationPlan) -> Result<Complex> {
    if s.is_empty() {
        return Ok(ONE);
    }
    let args = ArgVector::new(s.to_vec())?;
    if in_domain(&ModelKind::Sz, &args)? {
        let budget = SumBudget {
            max_outer_index: plan.series_max_terms,
            tol: plan.tail_tol,
        };
        let r = eval_series(&ModelKind::Sz, &args, q, budget)?;
        if r.converged {
            return Ok(r.value);
        }
    }
    Ok(continue_eval(&args, q, plan)?.value)
}

fn ensure_off_locus(trailing: &[Complex], q: &QParam) -> Result<()> {
    if trailing.is_empty() {
        return Ok(());
    }
    let args = ArgVector::new(trailing.to_vec())?;
    let guard = crate::matrix::NEAR_POLE_REL * q.lattice_period();
    if let Some(hp) = pole_locus(LocusModel::Sz, &args, q, guard)
        .into_iter()
        .next()
    {
        return Err(Error::NearPole(hp));
    }
    Ok(())
}

/// `-n! L_{n+1}(-n) / log q`, the residue factor along `s_1 = -n`.
fn h1_factor(n: usize, q: &QParam) -> Result<Complex> {
    Ok(-(l_n(n + 1, Complex::new(-(n as f64), 0.0), q)? * factorial(n)) / q.log_q())
}

/// Residue along `s_1 = -n`: `-n! L_{n+1}(-n) zeta_q(s_2, ..., s_r) / log q`.
///
/// `trailing` is `(s_2, ..., s_r)`, possibly empty (depth 1).
pub fn residue_h1(n: usize, trailing: &[Complex], q: &QParam) -> Result<ResidueResult> {
    ensure_off_locus(trailing, q)?;
    let z = zeta_anywhere(trailing, q, ContinuationPlan::default())?;
    Ok(ResidueResult {
        value: h1_factor(n, q)? * z,
        hyperplane: HyperplaneId {
            j: 1,
            k: n as i64,
            m: 0,
        },
        method: Method::ClosedForm,
    })
}

/// `point` must lie within this distance of the hyperplane for [`residue_hjk`].
pub const ON_HYPERPLANE_TOL: f64 = 1e-10;

/// Residue along `s_1 + ... + s_j = -k` for `j >= 2`:
///
/// ```text
/// sum_{m=0}^{k} -(k-m)! L_{k-m+1}(-(k-m)) zeta_q(s_{j+1}, ..., s_r) / log q
///               * [H(s_1) H(s_1+s_2) ... H(s_1+...+s_{j-1})]_{0,m}
/// ```
///
/// with the `H` blocks truncated at `k_block > k` (exact for these entries).
pub fn residue_hjk(
    j: usize,
    k: usize,
    point: &ArgVector,
    q: &QParam,
    k_block: usize,
) -> Result<ResidueResult> {
    let r = point.depth();
    if j < 2 || j > r {
        return Err(Error::Domain(alloc::format!(
            "hyperplane index j={j} must satisfy 2 <= j <= {r}"
        )));
    }
    if k_block <= k {
        return Err(Error::Domain(alloc::format!(
            "block size {k_block} must exceed k={k}"
        )));
    }
    let sums = point.partial_sums();
    if cabs(sums[j - 1] + k as f64) > ON_HYPERPLANE_TOL {
        return Err(Error::Domain(alloc::format!(
            "point is not on the hyperplane s_1+...+s_{j} = -{k}"
        )));
    }
    let guard = crate::matrix::NEAR_POLE_REL * q.lattice_period();
    let hits = pole_locus(LocusModel::Sz, point, q, guard);
    let target = HyperplaneId {
        j,
        k: k as i64,
        m: 0,
    };
    if hits != [target] {
        return Err(Error::Domain(alloc::format!(
            "point lies on several pole hyperplanes: {hits:?}"
        )));
    }

    // first row of H(sigma_1) ... H(sigma_{j-1}), columns 0..=k
    let mut row = alloc::vec![ZERO; k_block];
    row[0] = ONE;
    for sigma in &sums[..j - 1] {
        let mut next = alloc::vec![ZERO; k_block];
        for (a, &ra) in row.iter().enumerate() {
            if ra == ZERO {
                continue;
            }
            // row a of H(sigma) is row 1 of H(sigma + a)
            let table = CoeffTable::new(sigma + a as f64, q, k_block - a)?;
            for (b, slot) in next.iter_mut().enumerate().skip(a) {
                *slot += ra * table.h_entry(b - a + 1)?;
            }
        }
        row = next;
    }

    let z = zeta_anywhere(&point.as_slice()[j..], q, ContinuationPlan::default())?;
    let mut total = ZERO;
    for (m, &h) in row.iter().enumerate().take(k + 1) {
        total += h1_factor(k - m, q)? * h;
    }
    Ok(ResidueResult {
        value: total * z,
        hyperplane: target,
        method: Method::ClosedForm,
    })
}

/// Default offsets for [`numeric_residue`]: `1e-2 / 2^i`, `i = 0..5`.
///
/// Three offsets are not enough when the residue is small against the regular
/// part (e.g. `s_1 = -2` at `q = 0.3`).
pub const DEFAULT_H_SEQ: [f64; 5] = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];

/// `lim_{h -> 0} h zeta_q(..., s_j + h, ...)` by polynomial extrapolation of
/// the samples at `h_seq` (Neville); a single offset returns the raw product.
pub fn numeric_residue(
    hp: HyperplaneId,
    point_on_hp: &ArgVector,
    q: &QParam,
    h_seq: &[f64],
) -> Result<ResidueResult> {
    numeric_residue_with(hp, point_on_hp, q, h_seq, ContinuationPlan::default())
}

/// [`numeric_residue`] with an explicit continuation plan.
pub fn numeric_residue_with(
    hp: HyperplaneId,
    point_on_hp: &ArgVector,
    q: &QParam,
    h_seq: &[f64],
    plan: ContinuationPlan,
) -> Result<ResidueResult> {
    if h_seq.is_empty() || h_seq.iter().any(|h| !(h.is_finite() && *h != 0.0)) {
        return Err(Error::Domain(
            "h_seq must hold nonzero finite offsets".into(),
        ));
    }
    if hp.j == 0 || hp.j > point_on_hp.depth() {
        return Err(Error::DepthMismatch {
            expected: point_on_hp.depth(),
            got: hp.j,
        });
    }
    let mut samples = Vec::with_capacity(h_seq.len());
    for &h in h_seq {
        let mut s = point_on_hp.as_slice().to_vec();
        s[hp.j - 1] += h;
        let v = continue_eval(&ArgVector::new(s)?, q, plan)?;
        samples.push(v.value * h);
    }
    // Neville tableau evaluated at h = 0
    let n = samples.len();
    let mut p = samples;
    for level in 1..n {
        for i in 0..n - level {
            let (hi, hl) = (h_seq[i], h_seq[i + level]);
            p[i] = (p[i + 1] * hi - p[i] * hl) / (hi - hl);
        }
    }
    Ok(ResidueResult {
        value: p[0],
        hyperplane: hp,
        method: Method::NumericLimit,
    })
}
