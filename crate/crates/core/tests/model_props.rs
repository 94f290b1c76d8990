use proptest::prelude::*;

use toeplitz_maxdet::model::{apply_k_involution, block_permutation, specified_cliques, PartialMatrixJson};
use toeplitz_maxdet::{classify, PartialToeplitz, Pattern, PatternClass, SymMatrix};

fn subsets(max_n: usize) -> impl Strategy<Value = (usize, Vec<usize>)> {
    (2usize..=max_n).prop_flat_map(|m| {
        (Just(m), proptest::collection::btree_set(1..m, 1..m)).prop_map(|(m, s)| (m, s.into_iter().collect()))
    })
}

/// Direct transcription of the form definitions, checked for every class.
fn defining_set(class: PatternClass, n: usize) -> Option<Vec<usize>> {
    match class {
        PatternClass::P1 { k, r } => Some((1..=r).map(|i| i * k).collect()),
        PatternClass::P2 { k, r } | PatternClass::P2Prime { k, r } => {
            let mut v: Vec<usize> = (1..r - 1).map(|i| i * k).collect();
            v.push(r * k);
            Some(v)
        }
        PatternClass::P3 { k } => Some(vec![k, n - k]),
        PatternClass::P3Prime { k, r } => Some(vec![k, r]),
        PatternClass::General => None,
    }
}

proptest! {
    #[test]
    fn classify_tags_reconstruct_the_pattern((n, diags) in subsets(14)) {
        let p = Pattern::new(n, diags.clone()).unwrap();
        let classes = classify(&p);
        prop_assert!(!classes.is_empty());
        for c in &classes {
            match defining_set(*c, n) {
                Some(set) => {
                    prop_assert_eq!(&set, &diags, "{} at n={}", c, n);
                    prop_assert!(c.matches(&p));
                    match *c {
                        PatternClass::P2 { k, r } => prop_assert_eq!(n, (r + 1) * k),
                        PatternClass::P3 { k } => prop_assert!(k < n - k),
                        PatternClass::P3Prime { k, r } => prop_assert!(n >= k + r),
                        _ => {}
                    }
                }
                None => prop_assert_eq!(classes.len(), 1),
            }
        }
    }

    #[test]
    fn block_mask_is_block_diagonal(n in 2usize..=30, k_seed in 0usize..100, r_seed in 0usize..100, p2 in any::<bool>()) {
        let (n, class) = if p2 {
            let k = 1 + k_seed % 7;
            let r = 2 + r_seed % (30 / k - 1).max(1);
            if (r + 1) * k > 30 { return Ok(()); }
            ((r + 1) * k, PatternClass::P2 { k, r })
        } else {
            let k = 1 + k_seed % (n - 1);
            let r = 1 + r_seed % ((n - 1) / k);
            (n, PatternClass::P1 { k, r })
        };
        let diags = class.diagonals(n);
        let values: Vec<(usize, f64)> = diags.iter().map(|&d| (d, 0.1)).collect();
        let pt = PartialToeplitz::from_values(n, 1.0, &values).unwrap();
        let bd = block_permutation(&pt, class).unwrap();

        prop_assert_eq!(bd.blocks.iter().map(|b| b.size).sum::<usize>(), n);
        let mut seen = bd.permutation.clone();
        seen.sort();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());

        let loc = bd.block_of_position();
        for a in 0..n {
            for b in 0..n {
                let (ba, oa) = loc[a];
                let (bb, ob) = loc[b];
                let specified = a == b || pt.pattern().is_specified(bd.permutation[a], bd.permutation[b]);
                if ba != bb {
                    prop_assert!(!specified, "specified entry outside blocks at ({}, {})", a, b);
                } else if let Some(inner) = &bd.blocks[ba].partial {
                    let inner_spec = oa == ob || inner.pattern().is_specified(oa, ob);
                    prop_assert_eq!(specified, inner_spec);
                }
            }
        }
    }

    #[test]
    fn k_involution_is_exact(n in 1usize..9, vals in proptest::collection::vec(-5.0f64..5.0, 45)) {
        let mut it = vals.into_iter();
        let m = SymMatrix::from_fn(n, |_, _| it.next().unwrap());
        prop_assert_eq!(&apply_k_involution(&apply_k_involution(&m)), &m);
        let t = SymMatrix::toeplitz(&m.rows()[0]);
        prop_assert_eq!(&apply_k_involution(&t), &t);
    }

    #[test]
    fn cliques_match_brute_force((n, diags) in subsets(12)) {
        let values: Vec<(usize, f64)> = diags.iter().map(|&d| (d, 0.0)).collect();
        let pt = PartialToeplitz::from_values(n, 1.0, &values).unwrap();
        let got = specified_cliques(&pt, n).unwrap();
        prop_assert_eq!(got, brute_force_cliques(pt.pattern()));
    }
}

fn brute_force_cliques(p: &Pattern) -> Vec<Vec<usize>> {
    let n = p.order();
    let closed = |mask: u32| {
        (0..n).all(|i| (i + 1..n).all(|j| mask & (1 << i) == 0 || mask & (1 << j) == 0 || p.contains(j - i)))
    };
    let mut out: Vec<Vec<usize>> = (1u32..1 << n)
        .filter(|&m| closed(m) && (0..n).all(|v| m & (1 << v) != 0 || !closed(m | (1 << v))))
        .map(|m| (0..n).filter(|&i| m & (1 << i) != 0).collect())
        .collect();
    out.sort();
    out
}

#[test]
fn classify_examples() {
    let p = |n, d: &[usize]| Pattern::new(n, d.iter().copied()).unwrap();
    assert_eq!(classify(&p(5, &[1, 3, 4])), vec![PatternClass::General]);
    assert!(classify(&p(4, &[1, 2, 3])).contains(&PatternClass::P1 { k: 1, r: 3 }));
    let c = classify(&p(4, &[1, 3]));
    assert!(c.contains(&PatternClass::P2 { k: 1, r: 3 }) && c.contains(&PatternClass::P3 { k: 1 }));
    let c = classify(&p(6, &[1, 3]));
    assert!(c.contains(&PatternClass::P3Prime { k: 1, r: 3 }));
    assert!(!c.contains(&PatternClass::P3 { k: 1 }));
    // A lone outermost diagonal is {k} with r = 1 and never P3.
    assert_eq!(classify(&p(5, &[4])), vec![PatternClass::P1 { k: 4, r: 1 }]);
}

#[test]
fn block_examples() {
    let pt = PartialToeplitz::from_values(5, 2.0, &[(2, 1.0), (4, 0.5)]).unwrap();
    let bd = block_permutation(&pt, PatternClass::P1 { k: 2, r: 2 }).unwrap();
    assert_eq!(bd.permutation, vec![0, 2, 4, 1, 3]);
    let sizes: Vec<usize> = bd.blocks.iter().map(|b| b.size).collect();
    assert_eq!(sizes, vec![3, 2]);
    assert_eq!(bd.blocks[0].partial.as_ref().unwrap().pattern().diagonals(), &[1, 2]);
    assert_eq!(bd.blocks[1].partial.as_ref().unwrap().pattern().diagonals(), &[1]);

    let full = PartialToeplitz::from_values(4, 1.0, &[(1, 0.1), (2, 0.1), (3, 0.1)]).unwrap();
    let bd = block_permutation(&full, PatternClass::P1 { k: 1, r: 3 }).unwrap();
    assert_eq!(bd.permutation, vec![0, 1, 2, 3]);
    assert_eq!(bd.blocks.len(), 1);

    let bad = PartialToeplitz::from_values(6, 1.0, &[(2, 0.1), (4, 0.1)]).unwrap();
    let err = block_permutation(&bad, PatternClass::P2 { k: 2, r: 2 }).unwrap_err();
    assert_eq!(err.kind(), "class_mismatch");
}

#[test]
fn clique_examples() {
    let pt = |n, d: &[usize]| {
        let v: Vec<(usize, f64)> = d.iter().map(|&x| (x, 0.0)).collect();
        PartialToeplitz::from_values(n, 1.0, &v).unwrap()
    };
    assert_eq!(specified_cliques(&pt(4, &[1, 2, 3]), 4).unwrap(), vec![vec![0, 1, 2, 3]]);
    let c = specified_cliques(&pt(5, &[1, 4]), 5).unwrap();
    assert_eq!(c, vec![vec![0, 1], vec![0, 4], vec![1, 2], vec![2, 3], vec![3, 4]]);
    assert!(specified_cliques(&pt(5, &[1, 3, 4]), 5).unwrap().contains(&vec![0, 1, 4]));
}

#[test]
fn json_round_trip() {
    let text = r#"{"n": 5, "t0": 6.0, "data": {"1": 1.0, "3": 1.0, "4": 1.0}}"#;
    let parsed: PartialMatrixJson = serde_json::from_str(text).unwrap();
    let pt = parsed.partial().unwrap();
    assert_eq!(pt.pattern().diagonals(), &[1, 3, 4]);
    assert_eq!(PartialMatrixJson::from_partial(&pt), parsed);

    let bad: PartialMatrixJson = serde_json::from_str(r#"{"n": 3, "t0": 1.0, "data": {"01": 0.5}}"#).unwrap();
    assert!(bad.partial().is_err());
    let bad: PartialMatrixJson = serde_json::from_str(r#"{"n": 3, "t0": 1.0, "data": {"3": 0.5}}"#).unwrap();
    assert!(bad.partial().is_err());
}
