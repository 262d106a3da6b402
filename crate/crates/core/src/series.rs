//! Direct summation of the q-multiple zeta series on their convergence domains.
//!
//! All four models share one engine. A term of depth `r` is
//! `prod_i q^{k_i t_i} / [k_i]^{s_i}` over the strict simplex
//! `k_1 > ... > k_r >= 1` (weak `>=` for the star model):
//!
//! | model        | numerator exponents `t_i` | simplex |
//! |--------------|---------------------------|---------|
//! | SZ           | `s_i`                     | strict  |
//! | SZ star      | `s_i`                     | weak    |
//! | BZ           | `s_i - 1`                 | strict  |
//! | general f_q  | caller supplied           | strict  |
//!
//! The nested sum is accumulated layer by layer in the outer index `k_1`,
//! so a depth-`r` value costs `O(r * k_max)` terms. The numerator is
//! regrouped as `sum_i k_i t_i = sum_j (k_j - k_{j+1}) T_j` with
//! `T_j = t_1 + ... + t_j` and `k_{r+1} = 0`. Each level then carries a
//! running sum `C_j(k) = sum_{m < k} q^{(k-m) T_j} B_{j+1}(m)` updated as
//! `C_j(k+1) = q^{T_j} (C_j(k) + B_{j+1}(k))`. On the domain `Re T_j > 0`, so
//! the update is contractive: individual arguments with negative real part
//! never produce intermediate overflow.
//!
//! Truncation policy: the layer magnitudes are tracked through an envelope
//! `E_k = max(|layer_k|, E_{k-1} * rho_a)` where `rho_a = q^{min_j Re(t_1+...+t_j)}`
//! is the asymptotic layer ratio. The tail beyond `k` is estimated as
//! `E_k * rho / (1 - rho)` with `rho = E_k / E_{k-1}`, and summation stops once
//! that estimate drops below the requested tolerance.

use alloc::format;
use alloc::vec::Vec;

use crate::kernel::{cabs, cexp, is_finite, ArgVector, CompensatedSum, Complex, QParam, ZERO};
use crate::{Error, Result};

/// Which q-multiple zeta series to sum.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Sz,
    SzStar,
    Bz,
    /// Zhao's `f_q(s; t)`; carries the numerator exponents `(t_1, ..., t_r)`.
    FqGeneral(ArgVector),
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Sz => "sz",
            ModelKind::SzStar => "sz-star",
            ModelKind::Bz => "bz",
            ModelKind::FqGeneral(_) => "fq",
        }
    }
}

/// Truncation controls for [`eval_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumBudget {
    /// Largest outer index `k_1` that may be summed.
    pub max_outer_index: usize,
    /// Target bound on the absolute tail.
    pub tol: f64,
}

impl SumBudget {
    pub fn new(max_outer_index: usize, tol: f64) -> Result<Self> {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        if max_outer_index == 0 {
            return Err(Error::Domain("max_outer_index must be at least 1".into()));
        }
        Ok(Self {
            max_outer_index,
            tol,
        })
    }

    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }
}

impl Default for SumBudget {
    fn default() -> Self {
        Self {
            max_outer_index: 10_000,
            tol: 1e-12,
        }
    }
}

/// Value with its truncation-error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: Complex,
    pub err_est: f64,
    /// Number of outer layers summed (or, for continued values, series terms).
    pub terms_used: usize,
    pub converged: bool,
}

fn check_depth(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DepthMismatch { expected, got });
    }
    Ok(())
}

/// Whether the model's series converges at `s`.
///
/// SZ and star: `Re(s_1+...+s_j) > 0`; BZ: `Re(s_1+...+s_j) > j`;
/// general `f_q`: `Re(t_1+...+t_j) > 0`, for every `j`.
pub fn in_domain(model: &ModelKind, s: &ArgVector) -> Result<bool> {
    let ok = match model {
        ModelKind::Sz | ModelKind::SzStar => s.partial_sums().iter().all(|z| z.re > 0.0),
        ModelKind::Bz => s
            .partial_sums()
            .iter()
            .enumerate()
            .all(|(j, z)| z.re > (j + 1) as f64),
        ModelKind::FqGeneral(t) => {
            check_depth(s.depth(), t.depth())?;
            t.partial_sums().iter().all(|z| z.re > 0.0)
        }
    };
    Ok(ok)
}

/// Sum the model's series at `s`.
///
/// Fails with [`Error::Domain`] outside the convergence domain. Running out
/// of budget is not an error: the best value comes back with
/// `converged = false`.
pub fn eval_series(
    model: &ModelKind,
    s: &ArgVector,
    q: &QParam,
    budget: SumBudget,
) -> Result<EvalResult> {
    if !in_domain(model, s)? {
        return Err(Error::Domain(format!(
            "{} series diverges at this point",
            model.name()
        )));
    }
    let numer: Vec<Complex> = match model {
        ModelKind::Sz | ModelKind::SzStar => s.as_slice().to_vec(),
        ModelKind::Bz => s.as_slice().iter().map(|z| z - 1.0).collect(),
        ModelKind::FqGeneral(t) => t.as_slice().to_vec(),
    };
    let weak = matches!(model, ModelKind::SzStar);
    sum_nested(s.as_slice(), &numer, weak, q, budget)
}

/// `f_q(s_1..s_r; t_1..t_r) = sum q^{k_1 t_1 + ... + k_r t_r} / ([k_1]^{s_1} ... [k_r]^{s_r})`.
pub fn eval_f_q(s: &ArgVector, t: &ArgVector, q: &QParam, budget: SumBudget) -> Result<EvalResult> {
    eval_series(&ModelKind::FqGeneral(t.clone()), s, q, budget)
}

fn sum_nested(
    denom: &[Complex],
    numer: &[Complex],
    weak: bool,
    q: &QParam,
    budget: SumBudget,
) -> Result<EvalResult> {
    let r = denom.len();
    let log_q = q.log_q();

    let min_numer_re = numer
        .iter()
        .scan(0.0, |acc, z| {
            *acc += z.re;
            Some(*acc)
        })
        .fold(f64::INFINITY, f64::min);
    let rho_a = libm::exp(min_numer_re * log_q);
    let rho_fallback = (1.1 * rho_a).min(0.5 * (1.0 + rho_a));

    let partial: Vec<Complex> = numer
        .iter()
        .scan(ZERO, |acc, z| {
            *acc += z;
            Some(*acc)
        })
        .collect();
    let step: Vec<Complex> = partial.iter().map(|t| cexp(t * log_q)).collect();

    // carry[j] = C_j(k); level[j] = B_j(k), the level-j term at outer index k
    let mut carry = alloc::vec![ZERO; r];
    let mut level = alloc::vec![ZERO; r];
    let mut total = CompensatedSum::new();

    // outer indices below r contribute nothing on the strict simplex
    let first_live = if weak { 1 } else { r };
    let mut envelope = 0.0f64;
    let mut tail = f64::INFINITY;
    let mut k = 0usize;

    while k < budget.max_outer_index {
        k += 1;
        let log_br = q.log_bracket(k as u64);
        let kf = k as f64;
        let inv_power = |i: usize| cexp(-denom[i] * log_br);

        let innermost = inv_power(r - 1) * cexp(partial[r - 1] * (kf * log_q));
        if weak {
            // C_j(k) = q^{T_j} C_j(k-1) + B_{j+1}(k): the diagonal k_j = k_{j+1} counts
            level[r - 1] = innermost;
            for j in (0..r - 1).rev() {
                carry[j] = step[j] * carry[j] + level[j + 1];
                level[j] = inv_power(j) * carry[j];
            }
        } else {
            // level still holds B(k-1) here
            for j in 0..r - 1 {
                carry[j] = step[j] * (carry[j] + level[j + 1]);
            }
            level[r - 1] = innermost;
            for j in (0..r - 1).rev() {
                level[j] = inv_power(j) * carry[j];
            }
        }
        let layer = level[0];
        total += layer;
        if k < first_live {
            continue;
        }

        let mag = cabs(layer);
        if !mag.is_finite() {
            return Err(Error::NonFinite);
        }
        let prev = envelope;
        envelope = mag.max(prev * rho_a);
        if k == first_live || prev == 0.0 {
            continue;
        }
        let mut rho = envelope / prev;
        if rho >= 1.0 {
            rho = rho_fallback;
        }
        tail = envelope * rho / (1.0 - rho);
        if tail <= budget.tol {
            return finish(total.value(), tail, k, true);
        }
    }

    if !tail.is_finite() {
        tail = envelope * rho_fallback / (1.0 - rho_fallback);
    }
    finish(total.value(), tail, k, false)
}

fn finish(value: Complex, err_est: f64, terms_used: usize, converged: bool) -> Result<EvalResult> {
    if !is_finite(value) {
        return Err(Error::NonFinite);
    }
    Ok(EvalResult {
        value,
        err_est,
        terms_used,
        converged,
    })
}
