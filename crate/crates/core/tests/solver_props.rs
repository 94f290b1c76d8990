use std::f64::consts::PI;

use proptest::prelude::*;

use toeplitz_maxdet::model::apply_k_involution;
use toeplitz_maxdet::solver::{
    complete_auto, find_pd_completion, is_toeplitz, maxdet_complete, structured_class, structured_complete,
    FeasibilityStatus, DEFAULT_TOL,
};
use toeplitz_maxdet::{classify, PartialToeplitz, PatternClass, SymMatrix};

/// Random pattern with diagonally dominated data, so the zero fill is PD.
fn dominated_instance(max_n: usize) -> impl Strategy<Value = PartialToeplitz> {
    (3usize..=max_n)
        .prop_flat_map(|n| (Just(n), proptest::collection::btree_set(1..n, 1..n)))
        .prop_flat_map(|(n, diags)| {
            let m = diags.len();
            (
                Just(n),
                Just(diags),
                0.5f64..4.0,
                proptest::collection::vec(-0.99f64..0.99, m),
            )
        })
        .prop_map(|(n, diags, t0, fracs)| {
            let cap = t0 / (2.0 * diags.len() as f64);
            let vals: Vec<(usize, f64)> = diags.iter().zip(&fracs).map(|(&d, &f)| (d, f * cap)).collect();
            PartialToeplitz::from_values(n, t0, &vals).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completion_is_certified(pt in dominated_instance(9)) {
        let res = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
        let x = &res.completion;
        prop_assert!(x.is_positive_definite());
        prop_assert_eq!(pt.data_mismatch(x), 0.0);
        prop_assert!(res.certificate_residual <= 1e-8 * res.inverse.max_abs());

        let prod = res.inverse.mul(x);
        let n = pt.order();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((prod[(i, j)] - f64::from(u8::from(i == j))).abs());
            }
        }
        prop_assert!(worst <= 1e-8, "inverse residual {}", worst);

        // The free entries are an independent check of the zero pattern.
        for e in &res.free_entries {
            prop_assert!(!pt.pattern().is_specified(e.i, e.j));
            prop_assert!(res.inverse.get(e.i, e.j).abs() <= res.certificate_residual);
        }
    }

    #[test]
    fn completion_is_k_symmetric(pt in dominated_instance(9)) {
        let res = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
        prop_assert!(apply_k_involution(&res.completion).max_diff(&res.completion) <= 1e-8);
    }

    #[test]
    fn log_det_never_decreases(pt in dominated_instance(9)) {
        let res = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
        for w in res.log_det_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()), "{:?}", res.log_det_trace);
        }
        let last = *res.log_det_trace.last().unwrap();
        prop_assert!((last - res.log_det).abs() <= 1e-9 * (1.0 + last.abs()));
        prop_assert!((res.completion.cholesky().unwrap().log_det() - res.log_det).abs() <= 1e-9 * (1.0 + last.abs()));
    }

    #[test]
    fn structured_output_is_toeplitz(pt in dominated_instance(12)) {
        if let Some(class) = structured_class(&pt) {
            let s = structured_complete(&pt, class).unwrap();
            let (ok, dev) = is_toeplitz(&s.completion, 1e-10);
            prop_assert!(ok, "deviation {}", dev);
        }
    }

    #[test]
    fn banded_completions_are_permanent(
        p in 3usize..9,
        r_frac in 0.0f64..1.0,
        t0 in 0.5f64..3.0,
        fracs in proptest::collection::vec(-0.99f64..0.99, 8),
    ) {
        let r = 1 + ((p - 2) as f64 * r_frac) as usize;
        let cap = t0 / (2.0 * r as f64);
        let vals: Vec<(usize, f64)> = (1..=r).map(|d| (d, fracs[d - 1] * cap)).collect();
        let small = maxdet_complete(&PartialToeplitz::from_values(p, t0, &vals).unwrap(), DEFAULT_TOL).unwrap();
        let big = maxdet_complete(&PartialToeplitz::from_values(p + 1, t0, &vals).unwrap(), DEFAULT_TOL).unwrap();
        let lead = SymMatrix::from_fn(p, |i, j| big.completion.get(i, j));
        prop_assert!(lead.max_diff(&small.completion) <= 1e-8);
    }
}

fn log_det_of(m: &SymMatrix) -> f64 {
    m.cholesky().map_or(f64::NEG_INFINITY, |c| c.log_det())
}

/// Maximizes `f` over a box by a coarse grid followed by shrinking local grids.
fn grid_maximize(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut cx, mut cy, mut half) = (0.5 * (lo + hi), 0.5 * (lo + hi), 0.5 * (hi - lo));
    let mut best = f(cx, cy);
    for _ in 0..60 {
        let (bx, by) = (cx, cy);
        for a in -10..=10 {
            for b in -10..=10 {
                let (x, y) = (bx + half * a as f64 / 10.0, by + half * b as f64 / 10.0);
                let v = f(x, y);
                if v > best {
                    best = v;
                    cx = x;
                    cy = y;
                }
            }
        }
        half *= 0.5;
    }
    best
}

#[test]
fn grid_oracle_matches_newton_on_small_instances() {
    let mut checked = 0;
    for (t0, t1, t3) in [(1.0, 0.3, -0.2), (2.0, 0.9, 0.4), (1.3, (PI / 9.0).cos(), (PI / 3.0).cos())] {
        let pt = PartialToeplitz::from_values(4, t0, &[(1, t1), (3, t3)]).unwrap();
        let res = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
        let oracle = grid_maximize(
            |x, y| {
                let mut m = pt.base_matrix();
                m.set(2, 0, x);
                m.set(3, 1, y);
                log_det_of(&m)
            },
            -t0,
            t0,
        );
        assert!((oracle - res.log_det).abs() <= 1e-6, "oracle {oracle} vs {}", res.log_det);
        checked += 1;
    }

    // Five-by-five with diagonals {1,3,4}: K-symmetry pairs (1,3) with (3,5).
    let pt = PartialToeplitz::from_values(5, 6.0, &[(1, 1.0), (3, 1.0), (4, 1.0)]).unwrap();
    let res = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
    let oracle = grid_maximize(
        |x, y| {
            let mut m = pt.base_matrix();
            m.set(2, 0, x);
            m.set(4, 2, x);
            m.set(3, 1, y);
            log_det_of(&m)
        },
        -6.0,
        6.0,
    );
    assert!((oracle - res.log_det).abs() <= 1e-6);
    checked += 1;
    assert_eq!(checked, 4);
}

fn matrix_m() -> PartialToeplitz {
    PartialToeplitz::from_values(5, 6.0, &[(1, 1.0), (3, 1.0), (4, 1.0)]).unwrap()
}

#[test]
fn matrix_m_completion_is_not_toeplitz() {
    let res = complete_auto(&matrix_m(), DEFAULT_TOL).unwrap();
    let x = &res.completion;
    assert!((x.get(2, 0) - 0.3113).abs() < 5e-5);
    assert!((x.get(4, 2) - 0.3113).abs() < 5e-5);
    assert!((x.get(3, 1) - 0.4247).abs() < 5e-5);
    let (ok, dev) = is_toeplitz(x, 1e-6);
    assert!(!ok && dev > 0.1, "deviation {dev}");
    assert!((dev - (x.get(3, 1) - x.get(2, 0))).abs() < 1e-12);
}

#[test]
fn three_by_three_band() {
    let pt = PartialToeplitz::from_values(3, 1.0, &[(1, 0.5)]).unwrap();
    let res = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
    assert!((res.completion.get(2, 0) - 0.25).abs() < 1e-12);

    let pt = PartialToeplitz::from_values(3, 1.0, &[(1, 0.0)]).unwrap();
    let res = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
    assert!(res.completion.max_diff(&SymMatrix::identity(3)) < 1e-14);
    assert_eq!(is_toeplitz(&SymMatrix::identity(4), 1e-10), (true, 0.0));
}

#[test]
fn feasibility_classification() {
    let r = find_pd_completion(&matrix_m());
    assert_eq!(r.status, FeasibilityStatus::StrictlyFeasible);
    assert!(r.witness.unwrap().is_positive_definite());

    let pt = PartialToeplitz::from_values(4, 1.0, &[(1, (PI / 3.0).cos()), (3, PI.cos())]).unwrap();
    let r = find_pd_completion(&pt);
    assert_eq!(r.status, FeasibilityStatus::BoundaryOnly);
    let w = r.witness.unwrap();
    assert!(w.min_eigenvalue().abs() <= r.tol);
    assert_eq!(pt.data_mismatch(&w), 0.0);

    let pt = PartialToeplitz::from_values(2, 1.0, &[(1, 2.0)]).unwrap();
    let r = find_pd_completion(&pt);
    assert_eq!(r.status, FeasibilityStatus::Infeasible);
    assert!(r.lambda_min_achieved < -r.tol);
    assert!(maxdet_complete(&pt, DEFAULT_TOL).unwrap_err().is_infeasible());
}

#[test]
fn structured_examples() {
    let pt = PartialToeplitz::from_values(5, 2.0, &[(2, 1.0), (4, 0.5)]).unwrap();
    let s = structured_complete(&pt, PatternClass::P1 { k: 2, r: 2 }).unwrap();
    let g = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
    assert!(is_toeplitz(&s.completion, 1e-10).0);
    assert!(s.completion.max_diff(&g.completion) < 1e-8);

    let (theta, alpha) = (PI / 4.0, 0.2);
    let pt = PartialToeplitz::from_values(4, 1.0 + alpha, &[(1, (theta / 3.0).cos()), (3, theta.cos())]).unwrap();
    let s = structured_complete(&pt, PatternClass::P2 { k: 1, r: 3 }).unwrap();
    let c = (theta / 3.0).cos();
    let x = 0.5 * ((alpha * (alpha + 2.0) + (4.0 * c * c - 1.0).powi(2)).sqrt() - (1.0 + alpha));
    assert!(is_toeplitz(&s.completion, 1e-10).0);
    assert!((s.completion.get(2, 0) - x).abs() < 1e-8);

    // rk = n - 1: every block is fully specified and the free entries are zero.
    let pt = PartialToeplitz::from_values(7, 3.0, &[(2, 0.4), (4, -0.3), (6, 0.2)]).unwrap();
    assert!(classify(pt.pattern()).contains(&PatternClass::P1 { k: 2, r: 3 }));
    let s = structured_complete(&pt, PatternClass::P1 { k: 2, r: 3 }).unwrap();
    for (i, j) in pt.pattern().free_pairs() {
        assert_eq!(s.completion.get(i, j), 0.0);
    }

    let err = structured_complete(&matrix_m(), PatternClass::P3 { k: 1 }).unwrap_err();
    assert_eq!(err.kind(), "class_mismatch");
}
