use case::metrics::{ami, ami_report, entropy, expected_mi, mutual_info, ContingencyTable, NoiseHandling};
use case::rng;
use proptest::prelude::*;
use rand::Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct Reference {
    t: Vec<i64>,
    p: Vec<i64>,
    ami: f64,
    mi: f64,
    emi: f64,
}

#[test]
fn matches_reference_values() {
    let refs: Vec<Reference> = serde_json::from_str(include_str!("fixtures/ami_reference.json")).unwrap();
    for (i, r) in refs.iter().enumerate() {
        let rep = ami_report(&r.t, &r.p, NoiseHandling::IncludeNoise).unwrap();
        assert!((rep.mi - r.mi).abs() < 1e-10, "case {i}: mi {} vs {}", rep.mi, r.mi);
        assert!((rep.emi - r.emi).abs() < 1e-10, "case {i}: emi {} vs {}", rep.emi, r.emi);
        assert!((rep.ami - r.ami).abs() < 1e-8, "case {i}: ami {} vs {}", rep.ami, r.ami);
    }
}

/// Heap's algorithm over all orderings of `0..n`.
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn expected_mi_equals_permutation_average() {
    let mut r = rng::seeded(8);
    for n in 1..=8 {
        for _ in 0..3 {
            let t: Vec<i64> = (0..n).map(|_| r.random_range(0..3)).collect();
            let p: Vec<i64> = (0..n).map(|_| r.random_range(0..4)).collect();
            let mut total = 0.0;
            let mut count = 0usize;
            for_each_permutation(n, |perm| {
                let shuffled: Vec<i64> = perm.iter().map(|&k| p[k]).collect();
                total += mutual_info(&ContingencyTable::from_labels(&t, &shuffled).unwrap());
                count += 1;
            });
            let table = ContingencyTable::from_labels(&t, &p).unwrap();
            let emi = expected_mi(table.row_sums(), table.col_sums(), n).unwrap();
            assert!((emi - total / count as f64).abs() < 1e-10, "n={n}: {emi} vs {}", total / count as f64);
        }
    }
}

#[test]
fn anti_correlated_pair() {
    let t = [0i64, 0, 1, 1];
    let p = [0i64, 1, 0, 1];
    let table = ContingencyTable::from_labels(&t, &p).unwrap();
    let emi = expected_mi(table.row_sums(), table.col_sums(), 4).unwrap();
    let ln2 = std::f64::consts::LN_2;
    let expected = (0.0 - emi) / (ln2 - emi);
    let got = ami(&t, &p).unwrap();
    assert!((got - expected).abs() < 1e-12);
    assert!((got + 0.5).abs() < 1e-12);
}

#[test]
fn mutual_info_matches_direct_sum() {
    let counts = vec![vec![3, 0, 5, 1], vec![2, 7, 1, 4], vec![0, 2, 6, 3]];
    let table = ContingencyTable::from_counts(counts.clone());
    let n: f64 = counts.iter().flatten().sum::<usize>() as f64;
    let mut direct = 0.0;
    for i in 0..3 {
        let pi: f64 = counts[i].iter().sum::<usize>() as f64 / n;
        for j in 0..4 {
            let pj: f64 = counts.iter().map(|r| r[j]).sum::<usize>() as f64 / n;
            let pij = counts[i][j] as f64 / n;
            if pij > 0.0 {
                direct += pij * (pij / (pi * pj)).ln();
            }
        }
    }
    assert!((mutual_info(&table) - direct).abs() < 1e-12);
    assert!(mutual_info(&table) <= entropy(table.row_sums()).min(entropy(table.col_sums())) + 1e-12);
}

#[test]
fn random_labelings_average_to_zero() {
    let mut r = rng::seeded(99);
    let trials = 100;
    let mut sum = 0.0;
    for _ in 0..trials {
        let t: Vec<i64> = (0..1000).map(|_| r.random_range(0..5)).collect();
        let p: Vec<i64> = (0..1000).map(|_| r.random_range(0..5)).collect();
        sum += ami(&t, &p).unwrap();
    }
    let mean = sum / trials as f64;
    assert!(mean.abs() < 0.02, "mean ami {mean}");
}

proptest! {
    #[test]
    fn symmetric_and_relabel_invariant(
        pairs in prop::collection::vec((0i64..4, 0i64..5), 2..60),
        shift in 1i64..50,
    ) {
        let (t, p): (Vec<i64>, Vec<i64>) = pairs.into_iter().unzip();
        let a = ami(&t, &p).unwrap();
        let b = ami(&p, &t).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        let relabeled: Vec<i64> = p.iter().map(|&x| (x + shift) * 7).collect();
        prop_assert!((ami(&t, &relabeled).unwrap() - a).abs() < 1e-10);
        prop_assert!(a <= 1.0 + 1e-10);
    }
}
