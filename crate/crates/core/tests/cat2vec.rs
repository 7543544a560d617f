use case::cat2vec::{Cat2Vec, Cat2VecConfig, Cat2VecError};
use case::dataset::{EventDataset, PatientSequence};
use case::numcore::ConvergenceRule;
use case::syngen::{generate_dataset, SynthConfig};
use rand::{Rng, SeedableRng};

fn patient(id: &str, events: Vec<usize>) -> PatientSequence {
    PatientSequence { patient_id: id.into(), events, categories: None, groups: None }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn repeated_event_trains_to_zero() {
    let ds = EventDataset {
        patients: vec![patient("a", vec![3; 50]), patient("b", vec![3; 30])],
        vocab_size: 10,
        category_vocab_size: None,
        group_count: None,
    };
    let mut m = Cat2Vec::init(Cat2VecConfig { input_dims: vec![10], ..Cat2VecConfig::default() }).unwrap();
    let report = m.train(&ds).unwrap();
    assert!(report.final_loss() < 1e-6, "{}", report.final_loss());
}

#[test]
fn random_params_separate_every_event() {
    let m = Cat2Vec::init(Cat2VecConfig { seed: 11, ..Cat2VecConfig::default() }).unwrap();
    let y = m.encode_indices(&[(0..100).collect()]).unwrap();
    let mut distinct: Vec<&[f64]> = Vec::new();
    for i in 0..100 {
        let row = y.row(i);
        if distinct.iter().all(|d| d.iter().zip(row).any(|(a, b)| (a - b).abs() > 1e-9)) {
            distinct.push(row);
        }
    }
    assert!(distinct.len() >= 99, "{} distinct encodings", distinct.len());
    assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
}

fn adjacent_vs_random(m: &Cat2Vec, ds: &EventDataset) -> (f64, f64) {
    let enc = m.encode_dataset(ds).unwrap();
    let mut adjacent = (0.0, 0usize);
    let mut offset = 0;
    for p in &ds.patients {
        for i in offset..offset + p.len() - 1 {
            adjacent.0 += dist(enc.row(i), enc.row(i + 1));
            adjacent.1 += 1;
        }
        offset += p.len();
    }
    let mut r = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(5);
    let samples = 20_000;
    let random: f64 = (0..samples)
        .map(|_| dist(enc.row(r.random_range(0..enc.len())), enc.row(r.random_range(0..enc.len()))))
        .sum();
    (adjacent.0 / adjacent.1 as f64, random / samples as f64)
}

#[test]
fn adjacent_events_end_up_closer_than_random_pairs() {
    let (ds, _) = generate_dataset(&SynthConfig::uniform_beta(100, 6, 0.03, 2.0, 20, 1000, 1)).unwrap();

    // plain objective: the pull term alone never pushes pairs apart
    let mut plain = Cat2Vec::init(Cat2VecConfig { seed: 1, ..Cat2VecConfig::default() }).unwrap();
    plain.train(&ds).unwrap();
    let (adj, rnd) = adjacent_vs_random(&plain, &ds);
    assert!(adj <= rnd * (1.0 + 1e-9), "{adj} vs {rnd}");

    let mut repelled = Cat2Vec::init(Cat2VecConfig {
        seed: 1,
        contrastive_weight: 1.0,
        convergence: ConvergenceRule { max_epochs: 60, ..Default::default() },
        ..Cat2VecConfig::default()
    })
    .unwrap();
    repelled.train(&ds).unwrap();
    let (adj, rnd) = adjacent_vs_random(&repelled, &ds);
    assert!(adj < 0.9 * rnd, "{adj} vs {rnd}");
}

#[test]
fn loss_curve_is_non_increasing_within_tolerance() {
    let (ds, _) = generate_dataset(&SynthConfig::uniform_beta(100, 6, 0.03, 2.0, 10, 500, 2)).unwrap();
    let mut m = Cat2Vec::init(Cat2VecConfig { seed: 2, ..Cat2VecConfig::default() }).unwrap();
    let report = m.train(&ds).unwrap();
    assert!(report.epochs() >= 2);
    for (e, w) in report.losses.windows(2).enumerate() {
        assert!(w[1] <= w[0] * 1.05, "epoch {}: {} -> {}", e + 1, w[0], w[1]);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut m = Cat2Vec::init(Cat2VecConfig { input_dims: vec![4], ..Cat2VecConfig::default() }).unwrap();
    let short = EventDataset { patients: vec![patient("s", vec![1])], vocab_size: 4, category_vocab_size: None, group_count: None };
    assert!(matches!(m.train(&short), Err(Cat2VecError::ShortSequence { .. })));
    let empty = EventDataset { patients: vec![], vocab_size: 4, category_vocab_size: None, group_count: None };
    assert!(matches!(m.train(&empty), Err(Cat2VecError::EmptyDataset)));
    assert!(matches!(m.encode(&[&[0.0, 1.0, 1.0, 0.0]]), Err(Cat2VecError::NotOneHot { .. })));
    assert!(matches!(m.encode(&[&[0.0; 4]]), Err(Cat2VecError::NotOneHot { .. })));
    assert!(matches!(m.encode(&[&[0.0, 1.0, 0.0, 0.0], &[1.0]]), Err(Cat2VecError::FieldCount { .. })));
    assert!(Cat2Vec::init(Cat2VecConfig { hidden_dim: 0, ..Cat2VecConfig::default() }).is_err());
    assert!(Cat2Vec::init(Cat2VecConfig { input_dims: vec![], ..Cat2VecConfig::default() }).is_err());
}

#[test]
fn two_fields_encode_jointly() {
    let cfg = Cat2VecConfig { input_dims: vec![5, 3], ..Cat2VecConfig::default() };
    let m = Cat2Vec::init(cfg).unwrap();
    let a = m.encode(&[&[0.0, 1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]).unwrap();
    let b = m.encode(&[&[0.0, 1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
    assert_eq!(a.len(), 8);
    assert_ne!(a, b);
}

#[test]
fn artifact_roundtrip_validates_shapes() {
    let m = Cat2Vec::init(Cat2VecConfig { seed: 4, ..Cat2VecConfig::default() }).unwrap();
    let text = serde_json::to_string(&m).unwrap();
    let back: Cat2Vec = serde_json::from_str(&text).unwrap();
    back.validate().unwrap();
    assert_eq!(back, m);

    let mut wrong = back.clone();
    wrong.config.encoding_dim = 3;
    assert!(matches!(wrong.validate(), Err(Cat2VecError::ParamShape { .. })));
    let mut old = back;
    old.format_version = 99;
    assert!(matches!(old.validate(), Err(Cat2VecError::Version(99))));
}
