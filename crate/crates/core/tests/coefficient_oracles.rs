mod common;

use common::{coefficient_point, rel, rng};
use proptest::prelude::*;
use qmz_core::coefficients::{h_entry, hessenberg_det, l_n, m_inv_entry, permutation_det, r_entry};
use qmz_core::kernel::{cabs, q_pole_factor, rising_factorial};
use qmz_core::matrix::{build_block, build_block_with, BlockKind, InverseMethod};
use qmz_core::{Complex, QParam};

/// The worked `D_{1,6}` expansion, written out term by term.
fn d16_expanded(t: Complex, q: &QParam) -> Complex {
    let qi = |i: usize| q_pole_factor(t, i, q);
    let (q0, q1, q2, q3, q4) = (qi(0), qi(1), qi(2), qi(3), qi(4));
    let one = Complex::new(1.0, 0.0);
    let braces = one / (q0 * q1 * q2 * q3 * q4)
        + (one / (q0 * q2 * q3 * q4)
            + one / (q0 * q1 * q3 * q4)
            + one / (q0 * q1 * q2 * q4)
            + one / (q0 * q1 * q2 * q3))
            / 2.0
        + (one / (q0 * q3 * q4) + one / (q0 * q1 * q4) + one / (q0 * q1 * q2)) / 6.0
        + (one / (q0 * q4) + one / (q0 * q1)) / 24.0
        + one / q0 / 120.0
        + (one / (q0 * q2 * q4) + one / (q0 * q2 * q3) + one / (q0 * q1 * q3)) / 4.0
        + (one / (q0 * q2) + one / (q0 * q3)) / 12.0;
    t * (t + 1.0) * (t + 2.0) * (t + 3.0) * (t + 4.0) * braces
}

#[test]
fn determinant_triangle_up_to_seven() {
    let mut g = rng(11);
    for n in 2..=7 {
        for _ in 0..100 {
            let (t, q) = coefficient_point(&mut g, n);
            let h = hessenberg_det(n, t, &q).unwrap();
            let p = permutation_det(n, t, &q).unwrap();
            let l = rising_factorial(t, n - 1) * l_n(n, t, &q).unwrap();
            assert!(rel(p, h) <= 1e-9, "n={n} t={t} q={q}: {p} vs {h}");
            assert!(rel(l, h) <= 1e-9, "n={n} t={t} q={q}: {l} vs {h}");
        }
    }
}

#[test]
fn hessenberg_matches_partition_formula_at_eight() {
    let mut g = rng(12);
    for _ in 0..100 {
        let (t, q) = coefficient_point(&mut g, 8);
        let h = hessenberg_det(8, t, &q).unwrap();
        let l = rising_factorial(t, 7) * l_n(8, t, &q).unwrap();
        assert!(rel(l, h) <= 1e-9, "t={t} q={q}");
    }
}

#[test]
fn worked_example_d16() {
    let mut g = rng(13);
    for _ in 0..20 {
        let (t, q) = coefficient_point(&mut g, 6);
        let h = hessenberg_det(6, t, &q).unwrap();
        assert!(rel(h, d16_expanded(t, &q)) <= 1e-10, "t={t} q={q}");
    }
}

#[test]
fn low_order_coefficients() {
    let mut g = rng(14);
    for _ in 0..50 {
        let (t, q) = coefficient_point(&mut g, 2);
        assert_eq!(l_n(1, t, &q).unwrap(), Complex::new(1.0, 0.0));
        assert!(
            rel(
                l_n(2, t, &q).unwrap() * q_pole_factor(t, 0, &q),
                Complex::new(1.0, 0.0)
            ) < 1e-14
        );
    }
}

#[test]
fn shift_law_against_back_substitution() {
    let mut g = rng(15);
    for _ in 0..20 {
        let (t, q) = coefficient_point(&mut g, 8);
        let inv = build_block_with(
            BlockKind::MInv,
            t,
            8,
            0,
            &q,
            InverseMethod::BackSubstitution,
        )
        .unwrap();
        for k in 1..=8 {
            for n in k..=8 {
                let shifted = r_entry(n - k + 1, t + (k - 1) as f64, &q).unwrap();
                let direct = inv.entry(k, n);
                assert!(
                    cabs(shifted - direct) <= 1e-10 * (1.0 + cabs(direct)),
                    "({k},{n}) t={t} q={q}"
                );
                assert_eq!(m_inv_entry(k, n, t, &q).unwrap(), shifted);
            }
        }
    }
}

#[test]
fn h_entries_match_truncated_product() {
    let mut g = rng(16);
    for k in 1..=10 {
        for _ in 0..5 {
            let (t, q) = coefficient_point(&mut g, k);
            let inv = build_block_with(
                BlockKind::MInv,
                t,
                k,
                0,
                &q,
                InverseMethod::BackSubstitution,
            )
            .unwrap()
            .ii();
            let nb = build_block(BlockKind::N, t, k, 0, &q).unwrap().ii();
            for n in 1..=k {
                let prod: Complex = (0..k).map(|c| inv[0][c] * nb[c][n - 1]).sum();
                let h = h_entry(n, t, &q).unwrap();
                assert!(
                    cabs(h - prod) <= 1e-10 * (1.0 + cabs(prod)),
                    "n={n} K={k} t={t} q={q}: {h} vs {prod}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hessenberg_equals_permutation(n in 2usize..=7, re in -3.0f64..3.0, im in 0.05f64..3.0, qv in 0.2f64..0.9) {
        let q = QParam::new(qv).unwrap();
        let t = Complex::new(re, im);
        let h = hessenberg_det(n, t, &q).unwrap();
        let p = permutation_det(n, t, &q).unwrap();
        prop_assert!(rel(p, h) <= 1e-9);
    }

    #[test]
    fn first_row_shift(n in 1usize..=6, k in 1usize..=4, re in -2.0f64..2.0, im in 0.1f64..2.0) {
        let q = QParam::new(0.55).unwrap();
        let t = Complex::new(re, im);
        let a = m_inv_entry(k, k + n - 1, t, &q).unwrap();
        let b = m_inv_entry(1, n, t + (k - 1) as f64, &q).unwrap();
        prop_assert_eq!(a, b);
    }
}
