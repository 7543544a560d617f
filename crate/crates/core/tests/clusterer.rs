use std::collections::HashMap;

use case::clusterer::{
    core_distances, hdbscan, hdbscan_detailed, mutual_reachability, mutual_reachability_mst, phc, HdbscanParams,
    LabelAssignment, Points, NOISE,
};
use case::rng;
use rand::Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct Reference {
    name: String,
    dim: usize,
    min_cluster_size: usize,
    min_samples: usize,
    points: Vec<f64>,
    /// Reference pipeline with equal-weight MST edges kept in discovery order.
    labels: Vec<i64>,
    /// Reference library output as shipped (its edge sort is not stable).
    sklearn_labels: Vec<i64>,
}

fn references() -> Vec<Reference> {
    let text = include_str!("fixtures/hdbscan_reference.json");
    serde_json::from_str(text).unwrap()
}

/// True when `a` and `b` agree up to a bijective renaming that fixes noise.
fn same_partition(a: &[i64], b: &[i64]) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x == NOISE) != (y == NOISE) {
            return false;
        }
        *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
    })
}

#[test]
fn matches_reference_labels() {
    for r in references() {
        let pts = Points::new(&r.points, r.dim).unwrap();
        let params = HdbscanParams { min_cluster_size: r.min_cluster_size, min_samples: r.min_samples };
        let got = hdbscan(&pts, params).unwrap();
        let mismatched = got.labels().iter().zip(&r.labels).filter(|(a, b)| a != b).count();
        assert!(same_partition(got.labels(), &r.labels), "{}: {} labels differ", r.name, mismatched);
        // tie order may move a few border points, never much more
        let agreement = case::metrics::ami(got.labels(), &r.sklearn_labels).unwrap();
        assert!(agreement > 0.9, "{}: ami {agreement}", r.name);
    }
}

fn blobs(centers: &[[f64; 2]], per: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    let mut out = Vec::new();
    for c in centers {
        for _ in 0..per {
            // Box-Muller
            let (u1, u2): (f64, f64) = (r.random::<f64>().max(1e-300), r.random());
            let rad = (-2.0 * u1.ln()).sqrt() * sigma;
            let th = std::f64::consts::TAU * u2;
            out.push(c[0] + rad * th.cos());
            out.push(c[1] + rad * th.sin());
        }
    }
    out
}

#[test]
fn two_separated_blobs_are_recovered() {
    let data = blobs(&[[0.0, 0.0], [20.0, 0.0]], 50, 1.0, 3);
    let pts = Points::new(&data, 2).unwrap();
    let labels = hdbscan(&pts, HdbscanParams::default()).unwrap();
    let l = labels.labels();
    assert_eq!(labels.cluster_count(), 2);
    let first = l[..50].iter().filter(|&&x| x != NOISE).collect::<std::collections::HashSet<_>>();
    let second = l[50..].iter().filter(|&&x| x != NOISE).collect::<std::collections::HashSet<_>>();
    assert_eq!(first.len(), 1);
    assert_eq!(second.len(), 1);
    assert_ne!(first, second);
}

#[test]
fn uniform_noise_with_large_min_cluster_size_is_mostly_noise() {
    let mut r = rng::seeded(11);
    let data: Vec<f64> = (0..100).map(|_| r.random()).collect();
    let pts = Points::new(&data, 2).unwrap();
    let labels = hdbscan(&pts, HdbscanParams { min_cluster_size: 25, min_samples: 25 }).unwrap();
    assert!(labels.noise_count() > 25, "{}", labels.noise_count());
}

fn kruskal_weight(pts: &Points<'_>, core: &[f64]) -> f64 {
    let n = pts.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((mutual_reachability(pts, core, i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    let mut total = 0.0;
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += w;
        }
    }
    total
}

#[test]
fn mst_weight_matches_kruskal() {
    for seed in 0..5 {
        let mut r = rng::seeded(seed);
        let n = 40 + 30 * seed as usize;
        let data: Vec<f64> = (0..n * 3).map(|_| r.random::<f64>() * 10.0).collect();
        let pts = Points::new(&data, 3).unwrap();
        let core = core_distances(&pts, 5);
        let mst = mutual_reachability_mst(&pts, &core);
        assert_eq!(mst.len(), n - 1);
        let w: f64 = mst.iter().map(|e| e.weight).sum();
        let k = kruskal_weight(&pts, &core);
        assert!((w - k).abs() <= 1e-9 * k.max(1.0), "seed {seed}: {w} vs {k}");
    }
}

#[test]
fn mutual_reachability_properties() {
    let mut r = rng::seeded(4);
    let data: Vec<f64> = (0..60 * 2).map(|_| r.random()).collect();
    let pts = Points::new(&data, 2).unwrap();
    let core = core_distances(&pts, 5);
    for i in 0..60 {
        for j in 0..60 {
            let d = mutual_reachability(&pts, &core, i, j);
            assert_eq!(d, mutual_reachability(&pts, &core, j, i));
            if i != j {
                assert!(d >= core[i] && d >= core[j]);
            }
        }
    }
}

#[test]
fn clusters_respect_min_cluster_size() {
    for r in references() {
        let pts = Points::new(&r.points, r.dim).unwrap();
        let params = HdbscanParams { min_cluster_size: r.min_cluster_size, min_samples: r.min_samples };
        let res = hdbscan_detailed(&pts, params).unwrap();
        let mut sizes: HashMap<i64, usize> = HashMap::new();
        for &l in res.labels.labels().iter().filter(|&&l| l != NOISE) {
            *sizes.entry(l).or_default() += 1;
        }
        assert!(sizes.values().all(|&s| s >= r.min_cluster_size), "{}: {sizes:?}", r.name);
    }
}

#[test]
fn too_few_points_is_an_error() {
    let data = [0.0, 1.0, 2.0];
    let pts = Points::new(&data, 1).unwrap();
    assert!(hdbscan(&pts, HdbscanParams::default()).is_err());
}

#[test]
fn phc_leaves_no_noise_and_is_idempotent() {
    for r in references().into_iter().filter(|r| r.labels.iter().any(|&l| l != NOISE)) {
        let pts = Points::new(&r.points, r.dim).unwrap();
        let original = LabelAssignment::new(r.labels.clone());
        let once = phc(&original, &pts, 20).unwrap();
        assert_eq!(once.labels.noise_count(), 0, "{}", r.name);
        for (i, (&a, &b)) in r.labels.iter().zip(once.labels.labels()).enumerate() {
            if a != NOISE {
                assert_eq!(a, b, "{}: labeled point {i} changed", r.name);
            }
        }
        let twice = phc(&once.labels, &pts, 20).unwrap();
        assert_eq!(twice.labels, once.labels);
    }
}

#[test]
fn phc_matches_brute_force_vote() {
    let r = references().into_iter().find(|r| r.name == "mixed").unwrap();
    let pts = Points::new(&r.points, r.dim).unwrap();
    let out = phc(&LabelAssignment::new(r.labels.clone()), &pts, 20).unwrap();
    let labeled: Vec<usize> = (0..r.labels.len()).filter(|&i| r.labels[i] != NOISE).collect();
    for i in (0..r.labels.len()).filter(|&i| r.labels[i] == NOISE) {
        let mut d: Vec<(f64, usize)> = labeled.iter().map(|&j| (pts.distance(i, j), j)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: HashMap<i64, usize> = HashMap::new();
        for &(_, j) in &d[..20] {
            *votes.entry(r.labels[j]).or_default() += 1;
        }
        let best = *votes.values().max().unwrap();
        let expected = d[..20].iter().map(|&(_, j)| r.labels[j]).find(|l| votes[l] == best).unwrap();
        assert_eq!(out.labels.labels()[i], expected);
    }
}
