//! Runs one grid cell (6 groups, 100 event types) end to end and prints
//! the four scores. Takes a couple of minutes in release mode.
//!
//! ```text
//! cargo run --release --example desk_cell -- [seed]
//! ```

use case::harness::{run_cell, ExperimentConfig};

fn main() {
    env_logger::init();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cell = run_cell(&ExperimentConfig::default(), 6, 100, seed, None);
    match (&cell.scores, &cell.error) {
        (Some(s), _) => {
            println!("LDA window {:.4}  LDA event {:.4}  CaSE {:.4}  CaSE+PHC {:.4}", s.lda_window, s.lda_event, s.case, s.case_phc);
            println!("{} clusters, {} noise points, {} relabeled", cell.clusters, cell.noise, cell.relabeled);
        }
        (None, Some(e)) => eprintln!("cell failed: {e}"),
        (None, None) => unreachable!(),
    }
}
