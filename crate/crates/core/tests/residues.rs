mod common;

use common::{dist_to_pole_lattice, rel, rng, sample_args};
use proptest::prelude::*;
use qmz_core::kernel::cabs;
use qmz_core::matrix::{continue_eval, ContinuationPlan};
use qmz_core::poles::{
    numeric_residue, pole_locus, residue_h1, residue_hjk, HyperplaneId, LocusModel, Method,
    DEFAULT_H_SEQ,
};
use qmz_core::{ArgVector, Complex, QParam};
use rand::Rng;

fn c(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

#[test]
fn h1_closed_form_matches_limit() {
    for qv in [0.3, 0.5, 0.7] {
        let q = QParam::new(qv).unwrap();
        for trailing in [vec![c(3.0)], vec![c(2.5), c(2.0)]] {
            for n in 0..=2usize {
                let closed = residue_h1(n, &trailing, &q).unwrap();
                assert_eq!(closed.method, Method::ClosedForm);
                let mut point = vec![c(-(n as f64))];
                point.extend_from_slice(&trailing);
                let hp = HyperplaneId {
                    j: 1,
                    k: n as i64,
                    m: 0,
                };
                let lim = numeric_residue(hp, &ArgVector::new(point).unwrap(), &q, &DEFAULT_H_SEQ)
                    .unwrap();
                assert_eq!(lim.method, Method::NumericLimit);
                assert!(
                    rel(lim.value, closed.value) <= 1e-4,
                    "q={qv} n={n} trailing={trailing:?}: {} vs {}",
                    lim.value,
                    closed.value
                );
            }
        }
    }
}

#[test]
fn hjk_closed_form_matches_limit() {
    let q = QParam::new(0.5).unwrap();
    for (k, point) in [
        (0usize, [1.3, -1.3, 3.0]),
        (1, [0.7, -1.7, 3.0]),
        (0, [0.4, -0.4, 2.5]),
        (1, [-0.3, -0.7, 2.2]),
    ] {
        let p = ArgVector::from_reals(&point).unwrap();
        let closed = residue_hjk(2, k, &p, &q, k + 3).unwrap();
        let lim = numeric_residue(closed.hyperplane, &p, &q, &DEFAULT_H_SEQ).unwrap();
        assert!(
            rel(lim.value, closed.value) <= 1e-3,
            "k={k} {point:?}: {} vs {}",
            lim.value,
            closed.value
        );
        // the truncation size does not matter once it exceeds k
        let wider = residue_hjk(2, k, &p, &q, k + 6).unwrap();
        assert!(rel(wider.value, closed.value) < 1e-12);
    }
}

#[test]
fn depth_one_residue_at_zero() {
    let q = QParam::new(0.5).unwrap();
    let target = 1.0 / std::f64::consts::LN_2;
    let closed = residue_h1(0, &[], &q).unwrap();
    assert!((closed.value - c(target)).norm_sqr().sqrt() <= 1e-6);
    let hp = HyperplaneId { j: 1, k: 0, m: 0 };
    let lim = numeric_residue(
        hp,
        &ArgVector::from_reals(&[0.0]).unwrap(),
        &q,
        &DEFAULT_H_SEQ,
    )
    .unwrap();
    assert!(rel(lim.value, c(target)) <= 1e-4);
}

#[test]
fn poles_are_simple() {
    // h zeta(s + h) settles as h shrinks, so no higher-order term survives
    let q = QParam::new(0.5).unwrap();
    let plan = ContinuationPlan::default();
    for point in [vec![-1.0, 3.0], vec![0.6, -2.6, 2.0]] {
        let j = point.len() - 1;
        let samples: Vec<Complex> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&h| {
                let mut s = point.clone();
                s[j - 1] += h;
                continue_eval(&ArgVector::from_reals(&s).unwrap(), &q, plan)
                    .unwrap()
                    .value
                    * h
            })
            .collect();
        let d1 = cabs(samples[0] - samples[1]);
        let d2 = cabs(samples[1] - samples[2]);
        assert!(d2 < 0.2 * d1, "{point:?}: {samples:?}");
    }
}

#[test]
fn labelled_lattice_sample() {
    let mut g = rng(31);
    let step = |q: &QParam| 2.0 * std::f64::consts::PI / q.log_q();
    for i in 0..200 {
        let q = QParam::new(g.gen_range(0.2..0.9)).unwrap();
        let depth = g.gen_range(1..=3usize);
        let mut s = sample_args(&mut g, depth, &q, -3.0, 3.0);
        let on = i % 2 == 0;
        let expected = if on {
            // move partial sum j onto a lattice point, keep the others off it
            let j = g.gen_range(1..=depth);
            let k = g.gen_range(0..4i64);
            let m = g.gen_range(-2..=2i64);
            let target = Complex::new(-(k as f64), m as f64 * step(&q));
            let sigma: Complex = s[..j].iter().sum();
            let jitter = Complex::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)) * 5e-11;
            s[j - 1] += target - sigma + jitter;
            if j < depth {
                s[j] -= target - sigma + jitter;
            }
            let others_ok = s
                .iter()
                .scan(Complex::new(0.0, 0.0), |a, z| {
                    *a += z;
                    Some(*a)
                })
                .enumerate()
                .all(|(idx, z)| idx + 1 == j || dist_to_pole_lattice(z, &q) >= 0.1);
            if !others_ok {
                continue;
            }
            vec![HyperplaneId { j, k, m }]
        } else {
            vec![]
        };
        let got = pole_locus(
            LocusModel::Sz,
            &ArgVector::new(s.clone()).unwrap(),
            &q,
            1e-9,
        );
        assert_eq!(got, expected, "s={s:?} q={q}");
    }
}

#[test]
fn off_lattice_points_continue() {
    let mut g = rng(32);
    for _ in 0..20 {
        let q = QParam::new(g.gen_range(0.2..0.8)).unwrap();
        let depth = g.gen_range(1..=3usize);
        let s = ArgVector::new(sample_args(&mut g, depth, &q, -3.0, 3.0)).unwrap();
        assert!(pole_locus(LocusModel::Sz, &s, &q, 1e-9).is_empty());
        let v = continue_eval(&s, &q, ContinuationPlan::default()).unwrap();
        assert!(v.value.re.is_finite() && v.value.im.is_finite());
    }
}

#[test]
fn blow_up_next_to_a_shifted_pole() {
    let q = QParam::new(0.5).unwrap();
    let step = 2.0 * std::f64::consts::PI / q.log_q();
    let s = ArgVector::new(vec![Complex::new(-1.0 + 1e-4, step), c(0.5)]).unwrap();
    let v = continue_eval(&s, &q, ContinuationPlan::default()).unwrap();
    assert!(cabs(v.value) >= 1e3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn locus_is_periodic_in_s1(qv in 0.2f64..0.9, k in 0i64..5, m in -3i64..3, im2 in -1.0f64..1.0, re2 in 0.2f64..0.8) {
        let q = QParam::new(qv).unwrap();
        let step = 2.0 * std::f64::consts::PI / q.log_q();
        let base = vec![Complex::new(-(k as f64), m as f64 * step), Complex::new(re2, im2)];
        let mut shifted = base.clone();
        shifted[0] += Complex::new(0.0, step);
        let a = pole_locus(LocusModel::Sz, &ArgVector::new(base).unwrap(), &q, 1e-9);
        let b = pole_locus(LocusModel::Sz, &ArgVector::new(shifted).unwrap(), &q, 1e-9);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!((x.j, x.k, x.m + 1), (y.j, y.k, y.m));
        }
    }
}
