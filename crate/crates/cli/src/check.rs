//! Built-in verification suites for `qmz check`.
//!
//! Each suite draws its own samples from a ChaCha8 stream keyed by the seed
//! and the suite name, so `all` runs exactly the union of the single suites.

use qmz_core::coefficients::{hessenberg_det, l_n, permutation_det};
use qmz_core::kernel::{cabs, rising_factorial};
use qmz_core::matrix::{check_translation, inverse_agreement, verify_inverse, TranslationModel};
use qmz_core::poles::{numeric_residue, residue_h1, residue_hjk, HyperplaneId, DEFAULT_H_SEQ};
use qmz_core::series::SumBudget;
use qmz_core::{ArgVector, Complex, QParam, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::complex_arg::format_list;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Translation,
    Inverse,
    Residue,
    Coeff,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Translation => "translation",
            Suite::Inverse => "inverse",
            Suite::Residue => "residue",
            Suite::Coeff => "coeff",
            Suite::All => "all",
        }
    }

    fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Translation,
                Suite::Inverse,
                Suite::Residue,
                Suite::Coeff,
            ],
            s => vec![s],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub suite: &'static str,
    pub case: String,
    pub q: f64,
    pub input: String,
    /// `None` when the computation itself failed.
    pub residual: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub samples: usize,
    pub tol_scale: f64,
    pub suites: Vec<&'static str>,
    pub passed: usize,
    pub failed: usize,
    pub ok: bool,
    pub cases: Vec<CaseResult>,
}

/// Run `suite` with `samples` random cases per suite. Every tolerance is
/// multiplied by `tol_scale` (1 reproduces the documented bounds).
pub fn run(suite: Suite, samples: usize, seed: u64, tol_scale: f64) -> CheckReport {
    let mut cases = Vec::new();
    let suites = suite.expand();
    for s in &suites {
        let mut g = suite_rng(seed, s.name());
        match s {
            Suite::Translation => translation(&mut g, samples, &mut cases),
            Suite::Inverse => inverse(&mut g, samples, &mut cases),
            Suite::Residue => residue(&mut g, samples, &mut cases),
            Suite::Coeff => coeff(&mut g, samples, &mut cases),
            Suite::All => unreachable!("expanded above"),
        }
    }
    for c in &mut cases {
        c.tol *= tol_scale;
        c.pass = c.residual.is_some_and(|r| r <= c.tol);
    }
    let passed = cases.iter().filter(|c| c.pass).count();
    let failed = cases.len() - passed;
    CheckReport {
        seed,
        samples,
        tol_scale,
        suites: suites.iter().map(|s| s.name()).collect(),
        passed,
        failed,
        ok: failed == 0,
        cases,
    }
}

fn suite_rng(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a of the suite name, mixed into the seed
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn record(
    out: &mut Vec<CaseResult>,
    suite: &'static str,
    case: String,
    q: f64,
    input: String,
    tol: f64,
    residual: Result<f64>,
) {
    let (residual, error) = match residual {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let pass = residual.is_some_and(|r| r <= tol);
    out.push(CaseResult {
        suite,
        case,
        q,
        input,
        residual,
        tol,
        pass,
        error,
    });
}

fn rel(a: Complex, b: Complex) -> f64 {
    cabs(a - b) / cabs(b).max(1e-300)
}

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn period_distance(z: Complex, q: &QParam) -> f64 {
    let step = q.lattice_period();
    let m = (z.im / step).round();
    cabs(z - c(0.0, m * step))
}

/// `t` in `[-3, 3]^2`, `q` in `q_range`, with `t + i` kept `0.05` away
/// from the zeros of `q_i` for `0 <= i < n`.
fn coefficient_point(
    g: &mut ChaCha8Rng,
    n: usize,
    q_range: core::ops::Range<f64>,
) -> (Complex, QParam) {
    loop {
        let q = QParam::new(g.gen_range(q_range.clone())).expect("q in range");
        let t = c(g.gen_range(-3.0..3.0), g.gen_range(-3.0..3.0));
        if (0..n).all(|i| period_distance(t + i as f64, &q) >= 0.05) {
            return (t, q);
        }
    }
}

/// `r` arguments with every partial sum real part above `lo`.
fn domain_point(g: &mut ChaCha8Rng, r: usize, lo: f64, bz: bool) -> Vec<Complex> {
    loop {
        let s: Vec<Complex> = (0..r)
            .map(|_| {
                if bz {
                    c(g.gen_range(1.2..3.0), g.gen_range(-1.0..1.0))
                } else {
                    c(g.gen_range(-1.5..1.5), g.gen_range(-1.0..1.0))
                }
            })
            .collect();
        let mut acc = c(0.0, 0.0);
        let mut ok = true;
        for (j, z) in s.iter().enumerate() {
            acc += z;
            let floor = if bz { (j + 1) as f64 + 0.2 } else { lo };
            ok &= acc.re > floor && acc.re <= floor + 3.0;
        }
        if ok {
            return s;
        }
    }
}

fn translation(g: &mut ChaCha8Rng, samples: usize, out: &mut Vec<CaseResult>) {
    const CONFIGS: [(TranslationModel, &str, usize); 6] = [
        (TranslationModel::Sz, "sz", 1),
        (TranslationModel::Sz, "sz", 2),
        (TranslationModel::Sz, "sz", 3),
        (TranslationModel::Bz, "bz", 1),
        (TranslationModel::Bz, "bz", 2),
        (TranslationModel::SzStar, "sz-star", 2),
    ];
    let budget = SumBudget::default();
    for i in 0..samples {
        let (model, name, depth) = CONFIGS[i % CONFIGS.len()];
        let q = QParam::new(g.gen_range(0.2..0.55)).expect("q in range");
        let s = domain_point(g, depth, 0.3, model == TranslationModel::Bz);
        let residual = ArgVector::new(s.clone())
            .and_then(|a| check_translation(model, &a, &q, 60, budget))
            .map(|r| r.residual);
        record(
            out,
            "translation",
            format!("{name} depth {depth}"),
            q.value(),
            format_list(&s),
            1e-8,
            residual,
        );
    }
}

fn inverse(g: &mut ChaCha8Rng, samples: usize, out: &mut Vec<CaseResult>) {
    for i in 0..samples {
        let k = 1 + i % 12;
        // the absolute residual is about eps * max sum |M||M^-1|, which grows
        // like |log q|^-K; above q = 0.5 it passes 1e-10 before K = 12
        let (t, q) = coefficient_point(g, k + 1, 0.2..0.5);
        let input = format_list(&[t]);
        record(
            out,
            "inverse",
            format!("M M^-1 = I, K={k}"),
            q.value(),
            input.clone(),
            1e-10,
            verify_inverse(t, k, &q),
        );
        record(
            out,
            "inverse",
            format!("closed form = back-substitution, K={k}"),
            q.value(),
            input,
            1e-10,
            inverse_agreement(t, k, &q),
        );
    }
}

fn residue(g: &mut ChaCha8Rng, samples: usize, out: &mut Vec<CaseResult>) {
    let trailing: [&[Complex]; 2] = [&[c(3.0, 0.0)], &[c(2.5, 0.0), c(2.0, 0.0)]];
    for qv in [0.3, 0.5, 0.7] {
        let q = QParam::new(qv).expect("q in range");
        for n in 0..=2usize {
            for tr in trailing {
                let mut point = vec![c(-(n as f64), 0.0)];
                point.extend_from_slice(tr);
                let hp = HyperplaneId {
                    j: 1,
                    k: n as i64,
                    m: 0,
                };
                let residual = (|| -> Result<f64> {
                    let closed = residue_h1(n, tr, &q)?.value;
                    let limit =
                        numeric_residue(hp, &ArgVector::new(point.clone())?, &q, &DEFAULT_H_SEQ)?
                            .value;
                    Ok(rel(closed, limit))
                })();
                record(
                    out,
                    "residue",
                    format!("h1 n={n}"),
                    qv,
                    format_list(&point),
                    1e-4,
                    residual,
                );
            }
        }
    }
    let q = QParam::new(0.5).expect("q in range");
    let exact = 1.0 / std::f64::consts::LN_2;
    let residual = residue_h1(0, &[], &q).map(|r| rel(r.value, c(exact, 0.0)));
    record(
        out,
        "residue",
        "depth 1 at s=0 vs 1/log 2".into(),
        0.5,
        "0".into(),
        1e-6,
        residual,
    );

    for i in 0..samples {
        let k = i % 2;
        let qv = g.gen_range(0.3..0.7);
        let q = QParam::new(qv).expect("q in range");
        let s1 = c(g.gen_range(0.3..1.2), g.gen_range(-0.5..0.5));
        let s3 = c(g.gen_range(2.0..3.0), g.gen_range(-0.5..0.5));
        let point = vec![s1, -s1 - k as f64, s3];
        let hp = HyperplaneId {
            j: 2,
            k: k as i64,
            m: 0,
        };
        let residual = (|| -> Result<f64> {
            let a = ArgVector::new(point.clone())?;
            let closed = residue_hjk(2, k, &a, &q, k + 1)?.value;
            let limit = numeric_residue(hp, &a, &q, &DEFAULT_H_SEQ)?.value;
            Ok(rel(closed, limit))
        })();
        record(
            out,
            "residue",
            format!("hjk j=2 k={k}"),
            qv,
            format_list(&point),
            1e-3,
            residual,
        );
    }
}

fn coeff(g: &mut ChaCha8Rng, samples: usize, out: &mut Vec<CaseResult>) {
    for i in 0..samples {
        let n = 2 + i % 7;
        let (t, q) = coefficient_point(g, n, 0.2..0.9);
        let input = format_list(&[t]);
        let hess = hessenberg_det(n, t, &q);
        let partition = l_n(n, t, &q).map(|l| rising_factorial(t, n - 1) * l);
        let residual = match (&hess, &partition) {
            (Ok(h), Ok(p)) => Ok(rel(*h, *p)),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        };
        record(
            out,
            "coeff",
            format!("hessenberg = partition formula, n={n}"),
            q.value(),
            input.clone(),
            1e-9,
            residual,
        );
        if n <= 7 {
            let residual = hess.and_then(|h| permutation_det(n, t, &q).map(|p| rel(h, p)));
            record(
                out,
                "coeff",
                format!("hessenberg = permutation expansion, n={n}"),
                q.value(),
                input,
                1e-9,
                residual,
            );
        }
    }
}
