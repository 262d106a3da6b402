//! Truncated triangular matrices, translation-formula checks and the
//! meromorphic continuation of the SZ model.
//!
//! With `V(s)` the column `(zeta_q(s_1 + c - 1, s_2, ..., s_r))_{c >= 1}`, the
//! translation formula reads `M(s_1) V(s) = N(s_1) V(s_1 + s_2, s_3, ...)`
//! for the infinite upper-triangular matrices (rows `k`, `d = c - k >= 1`)
//!
//! ```text
//! M_{k,k} = 1,          M_{k,k+d} = (-1)^{d+1} (t+k-1)_d / (d! q_{k-1}(t))
//! N_{k,k} = 1/q_{k-1},  N_{k,k+d} = (-1)^d     (t+k-1)_d / (d! q_{k-1}(t))
//! ```
//!
//! so off the diagonal `N = -M`. Splitting the index set into the first `K`
//! columns `I` and the rest `J` gives
//!
//! ```text
//! zeta(s) = sum_{i<=K} H_{1,i}(s_1) zeta(s_1+s_2+i-1, s_3, ...)
//!         + sum_{n>=1} R*_{1,n}(s_1) [zeta(s_1+K+n-1, s_2, ...) + zeta(s_1+s_2+K+n-1, s_3, ...)]
//! ```
//!
//! where `R* = M_II^{-1} N_IJ = -M_II^{-1} M_IJ`. Once `K` exceeds
//! `1 - min_j Re(s_1+...+s_j)` both tail series are direct sums, and only the
//! depth `r - 1` values in the first sum need further continuation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coefficients::{rising_over_factorial, CoeffTable, PoleFactors};
use crate::kernel::{
    cabs, cpow_real_base, is_finite, ArgVector, CompensatedSum, Complex, QParam, ONE, ZERO,
};
use crate::poles::{pole_locus, LocusModel};
use crate::series::{eval_series, EvalResult, ModelKind, SumBudget};
use crate::{Error, Result};

/// Which matrix a [`TriBlock`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    M,
    N,
    MInv,
    H,
}

/// How `M^{-1}` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMethod {
    /// `m_{k,n}(t) = R_{1,n-k+1}(t+k-1)` from the `L_n` coefficients.
    ClosedForm,
    /// Back-substitution on the truncated unit-upper-triangular `M`.
    BackSubstitution,
}

/// Rows `1..=K` of an upper-triangular matrix, columns `1..=K+J`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriBlock {
    base_t: Complex,
    q: QParam,
    k: usize,
    j_cols: usize,
    kind: BlockKind,
    rows: Vec<Vec<Complex>>,
}

impl TriBlock {
    pub fn base_t(&self) -> Complex {
        self.base_t
    }

    pub fn q(&self) -> &QParam {
        &self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn j_cols(&self) -> usize {
        self.j_cols
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    /// Entry `(row, col)`, both 1-based, `row <= K`, `col <= K + J`.
    pub fn entry(&self, row: usize, col: usize) -> Complex {
        self.rows[row - 1][col - 1]
    }

    /// The `K x K` block.
    pub fn ii(&self) -> Vec<Vec<Complex>> {
        self.rows.iter().map(|r| r[..self.k].to_vec()).collect()
    }

    /// The `K x J` block.
    pub fn ij(&self) -> Vec<Vec<Complex>> {
        self.rows.iter().map(|r| r[self.k..].to_vec()).collect()
    }
}

/// `(t+k-1)_d / d!` for `d = 0..len`, row `k` (1-based).
fn row_binomials(t: Complex, k: usize, len: usize) -> Vec<Complex> {
    let base = t + (k - 1) as f64;
    let mut out = Vec::with_capacity(len);
    let mut c = ONE;
    for d in 0..len {
        if d > 0 {
            c = c * (base + (d - 1) as f64) / d as f64;
        }
        out.push(c);
    }
    out
}

/// Rows `1..=rows` and columns `1..=cols` of `M(t)` (`negate_off = false`)
/// or `N(t)` (`negate_off = true`).
fn dense_m_or_n(
    t: Complex,
    rows: usize,
    cols: usize,
    q: &QParam,
    is_n: bool,
) -> Result<Vec<Vec<Complex>>> {
    let f = PoleFactors::new(t, rows, q)?;
    let mut out = vec![vec![ZERO; cols]; rows];
    for k in 1..=rows {
        let inv = f.inv(k - 1);
        let bin = row_binomials(t, k, cols.saturating_sub(k) + 1);
        for c in k..=cols {
            let d = c - k;
            out[k - 1][c - 1] = if d == 0 {
                if is_n {
                    inv
                } else {
                    ONE
                }
            } else {
                let signed = if (d % 2 == 1) != is_n {
                    bin[d]
                } else {
                    -bin[d]
                };
                signed * inv
            };
        }
    }
    Ok(out)
}

/// Inverse of a square unit-upper-triangular matrix by back-substitution.
#[allow(clippy::needless_range_loop)]
fn unit_upper_inverse(m: &[Vec<Complex>]) -> Vec<Vec<Complex>> {
    let n = m.len();
    let mut x = vec![vec![ZERO; n]; n];
    for c in 0..n {
        x[c][c] = ONE;
        for k in (0..c).rev() {
            let mut acc = ZERO;
            for l in k + 1..=c {
                acc += m[k][l] * x[l][c];
            }
            x[k][c] = -acc;
        }
    }
    x
}

/// Materialise the `K x (K + J)` leading rows of `kind` at `t`.
pub fn build_block(
    kind: BlockKind,
    t: Complex,
    k: usize,
    j_cols: usize,
    q: &QParam,
) -> Result<TriBlock> {
    build_block_with(kind, t, k, j_cols, q, InverseMethod::ClosedForm)
}

/// [`build_block`] with an explicit route for `M^{-1}` (ignored for the other kinds).
pub fn build_block_with(
    kind: BlockKind,
    t: Complex,
    k: usize,
    j_cols: usize,
    q: &QParam,
    method: InverseMethod,
) -> Result<TriBlock> {
    if k == 0 {
        return Err(Error::Domain("block size K must be at least 1".into()));
    }
    if !is_finite(t) {
        return Err(Error::NonFinite);
    }
    let cols = k + j_cols;
    let rows = match kind {
        BlockKind::M => dense_m_or_n(t, k, cols, q, false)?,
        BlockKind::N => dense_m_or_n(t, k, cols, q, true)?,
        BlockKind::MInv => match method {
            InverseMethod::ClosedForm => {
                shifted_rows(t, k, cols, q, |table, n| Ok(table.r_entry(n)))?
            }
            InverseMethod::BackSubstitution => {
                let full = dense_m_or_n(t, cols, cols, q, false)?;
                unit_upper_inverse(&full).into_iter().take(k).collect()
            }
        },
        BlockKind::H => shifted_rows(t, k, cols, q, |table, n| table.h_entry(n))?,
    };
    Ok(TriBlock {
        base_t: t,
        q: *q,
        k,
        j_cols,
        kind,
        rows,
    })
}

/// Fill row `k` with `entry(table at t+k-1, c-k+1)` for `c >= k`.
fn shifted_rows(
    t: Complex,
    k: usize,
    cols: usize,
    q: &QParam,
    entry: impl Fn(&CoeffTable, usize) -> Result<Complex>,
) -> Result<Vec<Vec<Complex>>> {
    let mut out = vec![vec![ZERO; cols]; k];
    for row in 1..=k {
        let width = cols - row + 1;
        let table = CoeffTable::new(t + (row - 1) as f64, q, width).map_err(|e| match e {
            Error::Singular { index } => Error::Singular {
                index: index + row - 1,
            },
            other => other,
        })?;
        for c in row..=cols {
            out[row - 1][c - 1] = entry(&table, c - row + 1)?;
        }
    }
    Ok(out)
}

fn square_product(a: &[Vec<Complex>], b: &[Vec<Complex>]) -> Vec<Vec<Complex>> {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![ZERO; m]; n];
    for i in 0..n {
        for l in 0..b.len() {
            let x = a[i][l];
            if x == ZERO {
                continue;
            }
            for j in 0..m {
                out[i][j] += x * b[l][j];
            }
        }
    }
    out
}

/// `max |(M_II M_II^{-1} - I)_{ab}|` with the closed-form inverse.
pub fn verify_inverse(t: Complex, k: usize, q: &QParam) -> Result<f64> {
    let m = build_block(BlockKind::M, t, k, 0, q)?.ii();
    let inv = build_block(BlockKind::MInv, t, k, 0, q)?.ii();
    let prod = square_product(&m, &inv);
    let mut worst = 0.0f64;
    for (a, row) in prod.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            let id = if a == b { ONE } else { ZERO };
            worst = worst.max(cabs(v - id));
        }
    }
    Ok(worst)
}

/// `max |closed-form - back-substituted|` over the `K x K` block of `M^{-1}`.
pub fn inverse_agreement(t: Complex, k: usize, q: &QParam) -> Result<f64> {
    let a = build_block_with(BlockKind::MInv, t, k, 0, q, InverseMethod::ClosedForm)?;
    let b = build_block_with(BlockKind::MInv, t, k, 0, q, InverseMethod::BackSubstitution)?;
    let mut worst = 0.0f64;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max(cabs(x - y));
        }
    }
    Ok(worst)
}

/// Models whose translation identity [`check_translation`] can test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationModel {
    Sz,
    Bz,
    SzStar,
}

impl TranslationModel {
    fn series_model(self) -> ModelKind {
        match self {
            TranslationModel::Sz => ModelKind::Sz,
            TranslationModel::Bz => ModelKind::Bz,
            TranslationModel::SzStar => ModelKind::SzStar,
        }
    }
}

/// Both sides of a translation identity and their distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationCheck {
    pub lhs: Complex,
    pub rhs: Complex,
    pub residual: f64,
}

/// Evaluate both sides of the model's translation identity at `s` with the
/// binomial `k`-sums truncated at `k_terms` and every value summed directly.
///
/// Depth `r >= 2`:
///
/// ```text
/// SZ:   sum_k (-1)^k (s_1)_k/k! zeta(s_1+s_2+k, ...)
///         = (q^{-s_1} - 1) zeta(s) + sum_k (-1)^k (s_1)_{k+1}/(k+1)! zeta(s_1+k+1, s_2, ...)
/// BZ:   sum_k (-1)^k (s_1)_k/k! [zeta(s_1+s_2+k, ...) + (1-q) zeta(s_1+s_2+k-1, ...)]
///         = (q^{1-s_1} - 1) zeta(s) + sum_k (-1)^k (s_1)_{k+1}/(k+1)! zeta(s_1+k+1, s_2, ...)
/// star: zeta*(s_1+s_2, ...)
///         = (1 - q^{s_1}) zeta*(s) + q^{s_1} sum_k (-1)^k (s_1)_{k+1}/(k+1)! zeta*(s_1+k+1, s_2, ...)
/// ```
///
/// Depth 1 (SZ and star coincide there):
///
/// ```text
/// SZ:   q^s = (1 - q^s) zeta(s) + q^s sum_k (-1)^k (s)_{k+1}/(k+1)! zeta(s+k+1)
/// BZ:   1   = (q^{1-s} - 1) zeta(s) + sum_k (-1)^k (s)_{k+1}/(k+1)! zeta(s+k+1)
/// ```
pub fn check_translation(
    model: TranslationModel,
    s: &ArgVector,
    q: &QParam,
    k_terms: usize,
    budget: SumBudget,
) -> Result<TranslationCheck> {
    if k_terms == 0 {
        return Err(Error::Domain("k_terms must be at least 1".into()));
    }
    let kind = model.series_model();
    let zeta = |args: Vec<Complex>| -> Result<Complex> {
        let a = ArgVector::new(args)?;
        Ok(eval_series(&kind, &a, q, budget)?.value)
    };
    let sv = s.as_slice();
    let s1 = sv[0];
    let rest = &sv[1..];
    let with_first = |first: Complex, tail: &[Complex]| -> Vec<Complex> {
        let mut v = Vec::with_capacity(tail.len() + 1);
        v.push(first);
        v.extend_from_slice(tail);
        v
    };

    let zeta_s = zeta(sv.to_vec())?;

    // a_k = (-1)^k (s_1)_{k+1}/(k+1)!
    let mut shifted = CompensatedSum::new();
    let mut a = s1;
    for k in 0..k_terms {
        shifted += a * zeta(with_first(s1 + (k + 1) as f64, rest))?;
        a = a * -(s1 + (k + 1) as f64) / (k + 2) as f64;
    }
    let shifted = shifted.value();

    let q_s1 = cpow_real_base(q.value(), s1)?;
    let (lhs, rhs) = if sv.len() == 1 {
        match model {
            TranslationModel::Sz | TranslationModel::SzStar => {
                (q_s1, (ONE - q_s1) * zeta_s + q_s1 * shifted)
            }
            TranslationModel::Bz => {
                let f = cpow_real_base(q.value(), ONE - s1)? - 1.0;
                (ONE, f * zeta_s + shifted)
            }
        }
    } else {
        let s12 = s1 + sv[1];
        let tail = &sv[2..];
        match model {
            TranslationModel::SzStar => {
                let lhs = zeta(with_first(s12, tail))?;
                (lhs, (ONE - q_s1) * zeta_s + q_s1 * shifted)
            }
            TranslationModel::Sz | TranslationModel::Bz => {
                // b_k = (-1)^k (s_1)_k / k!
                let mut left = CompensatedSum::new();
                let mut b = ONE;
                for k in 0..k_terms {
                    let mut z = zeta(with_first(s12 + k as f64, tail))?;
                    if model == TranslationModel::Bz {
                        z += zeta(with_first(s12 + k as f64 - 1.0, tail))? * (1.0 - q.value());
                    }
                    left += b * z;
                    b = b * -(s1 + k as f64) / (k + 1) as f64;
                }
                let diag = match model {
                    TranslationModel::Sz => cpow_real_base(q.value(), -s1)? - 1.0,
                    _ => cpow_real_base(q.value(), ONE - s1)? - 1.0,
                };
                (left.value(), diag * zeta_s + shifted)
            }
        }
    };
    Ok(TranslationCheck {
        lhs,
        rhs,
        residual: cabs(lhs - rhs),
    })
}

/// Controls for [`continue_eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationPlan {
    /// Block size at the top node; `None` picks `max(1, ceil(1.5 - min_j Re(s_1+...+s_j)))`.
    /// Recursive sub-nodes always use that default.
    pub k: Option<usize>,
    /// Tail series stop once three consecutive terms fall below this.
    pub tail_tol: f64,
    /// Cap on the number of terms in any one tail series.
    pub tail_max_terms: usize,
    /// Cap on the outer index of every direct series.
    pub series_max_terms: usize,
    /// Deepest argument vector accepted.
    pub max_depth: usize,
}

impl Default for ContinuationPlan {
    fn default() -> Self {
        Self {
            k: None,
            tail_tol: 1e-13,
            tail_max_terms: 5_000,
            series_max_terms: 10_000,
            max_depth: 12,
        }
    }
}

impl ContinuationPlan {
    pub fn with_k(self, k: usize) -> Self {
        Self { k: Some(k), ..self }
    }
}

/// Pole-proximity guard: partial sums within this fraction of the lattice
/// period `2 pi / |log q|` of a pole are refused.
pub const NEAR_POLE_REL: f64 = 1e-8;

/// Smallest admissible block size at a point, `K > 1 - min_j Re(s_1+...+s_j)`.
pub fn min_block_size(s: &[Complex]) -> usize {
    let m = min_partial_re(s);
    let bound = libm::floor(1.0 - m) + 1.0;
    if bound < 1.0 {
        1
    } else {
        bound as usize
    }
}

/// The default block size `max(1, ceil(1.5 - min_j Re(s_1+...+s_j)))`.
pub fn default_block_size(s: &[Complex]) -> usize {
    let v = libm::ceil(1.5 - min_partial_re(s));
    if v < 1.0 {
        1
    } else {
        v as usize
    }
}

fn min_partial_re(s: &[Complex]) -> f64 {
    let mut acc = 0.0;
    let mut m = f64::INFINITY;
    for z in s {
        acc += z.re;
        m = m.min(acc);
    }
    m
}

/// Continued value plus bookkeeping of one [`continue_eval_report`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationReport {
    pub result: EvalResult,
    /// Block size used at the top node.
    pub k: usize,
    /// Nodes evaluated (memo misses).
    pub nodes: usize,
    pub memo_hits: usize,
    /// Direct series summed inside tails.
    pub series_calls: usize,
    pub max_recursion: usize,
}

/// `zeta_q(s)` of the SZ model continued to any point off the pole locus.
pub fn continue_eval(s: &ArgVector, q: &QParam, plan: ContinuationPlan) -> Result<EvalResult> {
    Ok(continue_eval_report(s, q, plan)?.result)
}

/// [`continue_eval`] with recursion statistics.
pub fn continue_eval_report(
    s: &ArgVector,
    q: &QParam,
    plan: ContinuationPlan,
) -> Result<ContinuationReport> {
    if plan.tail_tol.is_nan()
        || plan.tail_tol <= 0.0
        || plan.tail_max_terms == 0
        || plan.series_max_terms == 0
    {
        return Err(Error::Domain(
            "continuation plan needs positive tolerances and budgets".into(),
        ));
    }
    if s.depth() > plan.max_depth {
        return Err(Error::TooLarge {
            n: s.depth(),
            max: plan.max_depth,
        });
    }
    let guard = NEAR_POLE_REL * q.lattice_period();
    if let Some(hp) = pole_locus(LocusModel::Sz, s, q, guard).into_iter().next() {
        return Err(Error::NearPole(hp));
    }
    let args = s.as_slice();
    let k_top = match plan.k {
        Some(k) => {
            let need = min_block_size(args);
            if k < need {
                return Err(Error::Domain(format!(
                    "block size {k} is below the admissible minimum {need}"
                )));
            }
            k
        }
        None => default_block_size(args),
    };
    let mut engine = Continuer {
        q: *q,
        plan,
        memo: BTreeMap::new(),
        nodes: 0,
        memo_hits: 0,
        series_calls: 0,
        max_recursion: 0,
    };
    let result = engine.eval(args, 1, plan.tail_tol)?;
    Ok(ContinuationReport {
        result,
        k: k_top,
        nodes: engine.nodes,
        memo_hits: engine.memo_hits,
        series_calls: engine.series_calls,
        max_recursion: engine.max_recursion,
    })
}

type MemoKey = (usize, Vec<(i64, i64)>);

fn memo_key(s: &[Complex]) -> MemoKey {
    let r = |x: f64| libm::round(x * 1e12) as i64;
    (s.len(), s.iter().map(|z| (r(z.re), r(z.im))).collect())
}

struct Continuer {
    q: QParam,
    plan: ContinuationPlan,
    memo: BTreeMap<MemoKey, (f64, EvalResult)>,
    nodes: usize,
    memo_hits: usize,
    series_calls: usize,
    max_recursion: usize,
}

/// Running state of a tail series `sum_n term_n`.
struct Tail {
    sum: CompensatedSum,
    err: f64,
    small_run: usize,
    prev_mag: f64,
    ratio: f64,
    terms: usize,
}

impl Tail {
    fn new() -> Self {
        Self {
            sum: CompensatedSum::new(),
            err: 0.0,
            small_run: 0,
            prev_mag: f64::INFINITY,
            ratio: 1.0,
            terms: 0,
        }
    }

    /// Adds a term; returns true once the series may stop.
    fn push(&mut self, term: Complex, term_err: f64, tol: f64) -> bool {
        self.sum += term;
        self.err += term_err;
        self.terms += 1;
        let mag = cabs(term);
        self.ratio = if self.prev_mag > 0.0 && self.prev_mag.is_finite() {
            mag / self.prev_mag
        } else {
            1.0
        };
        self.prev_mag = mag;
        if mag < tol && self.ratio < 1.0 {
            self.small_run += 1;
        } else {
            self.small_run = 0;
        }
        self.small_run >= 3
    }

    /// Sum and error, the latter including a geometric bound on the remainder.
    fn finish(self, floor_ratio: f64) -> (Complex, f64) {
        let rho = self.ratio.max(floor_ratio).min(0.999);
        let rest = self.prev_mag * rho / (1.0 - rho);
        (self.sum.value(), self.err + rest)
    }
}

impl Continuer {
    /// The plan's `K` applies to the top node only; every sub-node uses its own default.
    fn block_size(&self, s: &[Complex], level: usize) -> usize {
        match self.plan.k {
            Some(k) if level == 1 => k,
            _ => default_block_size(s),
        }
    }

    fn series(&mut self, s: Vec<Complex>, tol: f64) -> Result<EvalResult> {
        self.series_calls += 1;
        let args = ArgVector::new(s)?;
        let budget = SumBudget {
            max_outer_index: self.plan.series_max_terms,
            tol,
        };
        let r = eval_series(&ModelKind::Sz, &args, &self.q, budget)?;
        if !r.converged {
            return Err(Error::Budget {
                terms: r.terms_used,
                err_est: r.err_est,
            });
        }
        Ok(r)
    }

    /// Value at `s` with absolute accuracy target `tol`. A memoised value is
    /// reused only if it was computed with a target at least as tight.
    fn eval(&mut self, s: &[Complex], level: usize, tol: f64) -> Result<EvalResult> {
        self.max_recursion = self.max_recursion.max(level);
        let key = memo_key(s);
        if let Some((stored_tol, r)) = self.memo.get(&key) {
            if *stored_tol <= tol {
                self.memo_hits += 1;
                return Ok(*r);
            }
        }
        self.nodes += 1;
        let r = if s.len() == 1 {
            self.depth_one(s[0], level, tol)?
        } else {
            self.depth_many(s, level, tol)?
        };
        if !is_finite(r.value) {
            return Err(Error::NonFinite);
        }
        self.memo.insert(key, (tol, r));
        Ok(r)
    }

    fn budget_error(&self, tail: &Tail) -> Error {
        Error::Budget {
            terms: tail.terms,
            err_est: tail.prev_mag,
        }
    }

    /// Rows `1..=K` of `M(s) V(s) = b` with `b_k = 1/q_{k-1}(s)`, the columns
    /// beyond `K` moved to the right-hand side as direct series, then
    /// back-substitution.
    fn depth_one(&mut self, s: Complex, level: usize, tol: f64) -> Result<EvalResult> {
        let k_block = self.block_size(&[s], level);
        let f = PoleFactors::new(s, k_block, &self.q)?;
        let floor_ratio = self.q.value();

        // M_{k,k+d} = g_d / q_{k-1} with g_d = (-1)^{d+1} (s+k-1)_d / d!
        let next_g = |g: Complex, base: Complex, d: usize| g * -(base + (d - 1) as f64) / d as f64;
        let mut block = vec![vec![ZERO; k_block]; k_block];
        for k in 1..=k_block {
            let base = s + (k - 1) as f64;
            let mut g = -ONE;
            for d in 1..=k_block - k {
                g = next_g(g, base, d);
                block[k - 1][k + d - 1] = g * f.inv(k - 1);
            }
        }
        // w = first row of the block inverse: rhs_k enters x_1 with weight w_k
        let mut w = vec![ZERO; k_block];
        w[0] = ONE;
        for c in 1..k_block {
            w[c] = -(0..c).map(|k| w[k] * block[k][c]).sum::<Complex>();
        }

        // zeta(s + c - 1) for c > K, shared by every row
        let series_tol = tol * 1e-4;
        let mut z: Vec<EvalResult> = Vec::new();
        let mut rhs = vec![ZERO; k_block];
        let mut rhs_err = vec![0.0f64; k_block];
        let mut terms = 0usize;

        for k in 1..=k_block {
            let inv = f.inv(k - 1);
            let base = s + (k - 1) as f64;
            let row_tol = tol / (2.0 * k_block as f64 * cabs(w[k - 1]).max(1.0));
            let mut g = -ONE;
            for d in 1..=k_block - k {
                g = next_g(g, base, d);
            }
            let mut tail = Tail::new();
            let mut d = k_block - k;
            loop {
                d += 1;
                g = next_g(g, base, d);
                let idx = k + d - k_block - 1;
                while z.len() <= idx {
                    let v = self.series(vec![s + (k_block + z.len()) as f64], series_tol)?;
                    z.push(v);
                }
                let coef = g * inv;
                if tail.push(coef * z[idx].value, cabs(coef) * z[idx].err_est, row_tol) {
                    break;
                }
                if tail.terms >= self.plan.tail_max_terms {
                    return Err(self.budget_error(&tail));
                }
            }
            terms += tail.terms;
            let (v, e) = tail.finish(floor_ratio);
            rhs[k - 1] = inv - v;
            rhs_err[k - 1] = e;
        }

        let mut x = vec![ZERO; k_block];
        let mut err = vec![0.0f64; k_block];
        for k in (0..k_block).rev() {
            let mut acc = CompensatedSum::new();
            acc += rhs[k];
            let mut e = rhs_err[k];
            for c in k + 1..k_block {
                acc += -(block[k][c] * x[c]);
                e += cabs(block[k][c]) * err[c];
            }
            x[k] = acc.value();
            err[k] = e;
        }
        Ok(EvalResult {
            value: x[0],
            err_est: err[0],
            terms_used: terms,
            converged: true,
        })
    }

    fn depth_many(&mut self, s: &[Complex], level: usize, tol: f64) -> Result<EvalResult> {
        let k_block = self.block_size(s, level);
        let s1 = s[0];
        let s12 = s1 + s[1];
        let rest2 = &s[2..];
        let rest1 = &s[1..];
        let table = CoeffTable::new(s1, &self.q, k_block)?;

        let with_first = |first: Complex, tail: &[Complex]| -> Vec<Complex> {
            let mut v = Vec::with_capacity(tail.len() + 1);
            v.push(first);
            v.extend_from_slice(tail);
            v
        };

        let mut total = CompensatedSum::new();
        let mut err = 0.0;
        let mut terms = 0usize;
        for i in 1..=k_block {
            let h = table.h_entry(i)?;
            let sub_tol = tol / (2.0 * k_block as f64 * cabs(h).max(1.0));
            let sub = self.eval(&with_first(s12 + (i - 1) as f64, rest2), level + 1, sub_tol)?;
            total += h * sub.value;
            err += cabs(h) * sub.err_est;
            terms += sub.terms_used;
        }

        // R*_{1,n} = (-1)^{K+n-1} sum_j L_j / q_{j-1} * (s_1)_{K+n-1} / (K+n-j)!
        let weights: Vec<Complex> = (1..=k_block)
            .map(|j| table.l(j) * table.inv_q(j - 1))
            .collect();
        let mut ratios: Vec<Complex> = (1..=k_block)
            .map(|j| rising_over_factorial(s1, 0, k_block, k_block + 1 - j))
            .collect();
        let mut sign = if k_block.is_multiple_of(2) { 1.0 } else { -1.0 };
        let tail_tol = tol / 2.0;
        let mut tail = Tail::new();
        let mut n = 1usize;
        loop {
            let r_star: Complex = weights
                .iter()
                .zip(&ratios)
                .map(|(w, c)| w * c)
                .sum::<Complex>()
                * sign;
            let shift = (k_block + n - 1) as f64;
            let series_tol = tol * 1e-4 / cabs(r_star).max(1.0);
            let v = self.series(with_first(s1 + shift, rest1), series_tol)?;
            let w = self.series(with_first(s12 + shift, rest2), series_tol)?;
            if tail.push(
                r_star * (v.value + w.value),
                cabs(r_star) * (v.err_est + w.err_est),
                tail_tol,
            ) {
                break;
            }
            if tail.terms >= self.plan.tail_max_terms {
                return Err(self.budget_error(&tail));
            }
            // advance n -> n + 1
            for (j, c) in ratios.iter_mut().enumerate() {
                *c = *c * (s1 + shift) / (k_block + n - j) as f64;
            }
            sign = -sign;
            n += 1;
        }
        terms += tail.terms;
        let (v, e) = tail.finish(self.q.value());
        total += v;
        err += e;
        Ok(EvalResult {
            value: total.value(),
            err_est: err,
            terms_used: terms,
            converged: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{h_entry, m_inv_entry, r_tail_entry};
    use crate::kernel::q_pole_factor;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn half() -> QParam {
        QParam::new(0.5).unwrap()
    }

    #[test]
    fn block_examples() {
        let q = half();
        let m1 = build_block(BlockKind::M, c(0.3, 0.4), 1, 0, &q).unwrap();
        assert_eq!(m1.ii(), vec![vec![ONE]]);
        let m2 = build_block(BlockKind::M, ONE, 2, 0, &q).unwrap();
        assert!(cabs(m2.entry(1, 2) - ONE) < 1e-15);
        assert_eq!(m2.entry(2, 2), ONE);
        let n2 = build_block(BlockKind::N, ONE, 2, 0, &q).unwrap();
        assert!(cabs(n2.entry(1, 1) - ONE) < 1e-15);
        assert!(cabs(n2.entry(1, 2) + ONE) < 1e-15);
        assert!(matches!(
            build_block(BlockKind::M, c(-1.0, 0.0), 3, 0, &q),
            Err(Error::Singular { index: 1 })
        ));
    }

    #[test]
    fn h_block_is_the_product_of_inverse_and_n() {
        let q = half();
        for t in [ONE, c(-0.6, 0.8)] {
            let k = 3;
            let j = 4;
            let h = build_block(BlockKind::H, t, k, j, &q).unwrap();
            let inv = build_block_with(
                BlockKind::MInv,
                t,
                k + j,
                0,
                &q,
                InverseMethod::BackSubstitution,
            )
            .unwrap();
            let n = build_block(BlockKind::N, t, k + j, 0, &q).unwrap();
            let prod = square_product(&inv.ii(), &n.ii());
            for a in 1..=k {
                for b in 1..=k + j {
                    assert!(
                        cabs(h.entry(a, b) - prod[a - 1][b - 1]) < 1e-12,
                        "({a},{b})"
                    );
                }
            }
        }
        assert!(
            cabs(
                build_block(BlockKind::H, ONE, 3, 0, &q)
                    .unwrap()
                    .entry(1, 1)
                    - ONE
            ) < 1e-15
        );
    }

    #[test]
    fn off_diagonal_n_is_minus_m() {
        let q = QParam::new(0.7).unwrap();
        let t = c(0.4, -1.1);
        let m = build_block(BlockKind::M, t, 4, 5, &q).unwrap();
        let n = build_block(BlockKind::N, t, 4, 5, &q).unwrap();
        for a in 1..=4 {
            for b in a + 1..=9 {
                assert_eq!(m.entry(a, b), -n.entry(a, b));
            }
            assert!(cabs(n.entry(a, a) * q_pole_factor(t, a - 1, &q) - ONE) < 1e-14);
        }
    }

    #[test]
    fn inverse_examples() {
        let q = half();
        assert_eq!(verify_inverse(ONE, 1, &q).unwrap(), 0.0);
        assert!(verify_inverse(c(1.3, 0.7), 8, &q).unwrap() <= 1e-11);
        assert!(verify_inverse(c(-2.5, 0.0), 6, &QParam::new(0.9).unwrap()).unwrap() <= 1e-10);
        assert!(inverse_agreement(c(1.3, 0.7), 8, &q).unwrap() <= 1e-10);
    }

    #[test]
    fn closed_form_tail_entries_match_block_product() {
        let q = half();
        for (t, k) in [(c(0.8, 0.3), 1), (ONE, 2), (c(-1.4, 0.5), 4)] {
            let j = 6;
            let inv = build_block_with(
                BlockKind::MInv,
                t,
                k,
                0,
                &q,
                InverseMethod::BackSubstitution,
            )
            .unwrap();
            let n = build_block(BlockKind::N, t, k, j, &q).unwrap();
            let prod = square_product(&inv.ii(), &n.ij());
            for m in 1..=k {
                for col in 1..=j {
                    let v = r_tail_entry(m, col, t, k, &q).unwrap();
                    assert!(
                        cabs(v - prod[m - 1][col - 1]) < 1e-11 * (1.0 + cabs(v)),
                        "m={m} n={col}"
                    );
                }
            }
        }
    }

    #[test]
    fn shift_law_for_inverse_and_h() {
        let q = QParam::new(0.6).unwrap();
        let t = c(0.25, 0.9);
        let inv = build_block(BlockKind::MInv, t, 5, 3, &q).unwrap();
        let h = build_block(BlockKind::H, t, 5, 3, &q).unwrap();
        for k in 1..=5 {
            for n in k..=8 {
                let direct = m_inv_entry(k, n, t, &q).unwrap();
                assert!(cabs(inv.entry(k, n) - direct) < 1e-12);
                let hs = h_entry(n - k + 1, t + (k - 1) as f64, &q).unwrap();
                assert!(cabs(h.entry(k, n) - hs) < 1e-12);
            }
        }
    }

    #[test]
    fn translation_examples() {
        let q = half();
        let b = SumBudget::default();
        let r = check_translation(
            TranslationModel::Sz,
            &ArgVector::from_reals(&[2.0, 2.0]).unwrap(),
            &q,
            40,
            b,
        )
        .unwrap();
        assert!(r.residual <= 1e-9, "{r:?}");
        let r = check_translation(
            TranslationModel::Sz,
            &ArgVector::from_reals(&[3.0]).unwrap(),
            &q,
            40,
            b,
        )
        .unwrap();
        assert!(r.residual <= 1e-10, "{r:?}");
        let r = check_translation(
            TranslationModel::Bz,
            &ArgVector::from_reals(&[3.0, 2.5]).unwrap(),
            &q,
            40,
            b,
        )
        .unwrap();
        assert!(r.residual <= 1e-8, "{r:?}");
        let r = check_translation(
            TranslationModel::SzStar,
            &ArgVector::from_reals(&[2.0, 2.0]).unwrap(),
            &q,
            40,
            b,
        )
        .unwrap();
        assert!(r.residual <= 1e-9, "{r:?}");
        let bad = check_translation(
            TranslationModel::Bz,
            &ArgVector::from_reals(&[1.5, 0.4]).unwrap(),
            &q,
            40,
            b,
        );
        assert!(matches!(bad, Err(Error::Domain(_))));
    }

    #[test]
    fn continuation_examples() {
        let q = half();
        let plan = ContinuationPlan::default();
        let s = ArgVector::from_reals(&[2.0, 1.0]).unwrap();
        let direct = eval_series(&ModelKind::Sz, &s, &q, SumBudget::default()).unwrap();
        let cont = continue_eval(&s, &q, plan).unwrap();
        assert!(cabs(cont.value - direct.value) < 1e-8);

        let s = ArgVector::from_reals(&[0.5]).unwrap();
        let direct = eval_series(&ModelKind::Sz, &s, &q, SumBudget::default()).unwrap();
        let cont = continue_eval(&s, &q, plan).unwrap();
        assert!(cabs(cont.value - direct.value) < 1e-10);

        let s = ArgVector::from_reals(&[-0.5, 3.2]).unwrap();
        let a = continue_eval(&s, &q, plan.with_k(2)).unwrap();
        let b = continue_eval(&s, &q, plan.with_k(4)).unwrap();
        assert!(cabs(a.value - b.value) < 1e-8, "{a:?} {b:?}");

        let zero = ArgVector::from_reals(&[0.0]).unwrap();
        match continue_eval(&zero, &q, plan) {
            Err(Error::NearPole(hp)) => assert_eq!((hp.j, hp.k, hp.m), (1, 0, 0)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            continue_eval(&s, &q, plan.with_k(1)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn default_block_sizes() {
        assert_eq!(default_block_size(&[c(2.0, 0.0)]), 1);
        assert_eq!(default_block_size(&[c(-0.5, 0.0), c(3.2, 0.0)]), 2);
        assert_eq!(min_block_size(&[c(-0.5, 0.0)]), 2);
        assert_eq!(min_block_size(&[c(0.5, 0.0)]), 1);
        assert_eq!(default_block_size(&[c(-2.9, 1.0)]), 5);
    }
}
