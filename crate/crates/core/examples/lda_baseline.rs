//! Sliding-window topic model baseline on a synthetic corpus, scored per
//! window and per event.

use case::lda::{event_labels, fit, make_windows, window_level_truth, window_topics, LdaConfig};
use case::metrics::ami;
use case::syngen::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dataset, _) = generate_dataset(&SynthConfig::uniform_beta(100, 6, 0.03, 2.0, 5, 1000, 4))?;
    let config = LdaConfig { topics: 6, iterations: 300, burn_in: 100, seed: 4, ..LdaConfig::default() };
    let corpus = make_windows(&dataset, config.window_len, config.stride)?;
    let model = fit(&corpus, &config)?;

    let as_i64 = |v: &[usize]| v.iter().map(|&x| x as i64).collect::<Vec<_>>();
    let topics = window_topics(&model);
    let window_truth = window_level_truth(&corpus, &dataset)?;
    let events = event_labels(&corpus, &topics)?;
    let truth = as_i64(&dataset.flat_groups().unwrap());
    println!("{} windows", corpus.len());
    println!("window-level AMI {:.4}", ami(&as_i64(&window_truth), &as_i64(&topics))?);
    println!("event-level AMI  {:.4}", ami(&truth, events.labels())?);
    Ok(())
}
