//! Adjusted mutual information on a few hand-made labelings.

use case::metrics::{ami, ami_report, NoiseHandling};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = [0i64, 0, 0, 1, 1, 1, 2, 2, 2];
    let cases: [(&str, [i64; 9]); 4] = [
        ("identical", [0, 0, 0, 1, 1, 1, 2, 2, 2]),
        ("renamed", [5, 5, 5, 9, 9, 9, 1, 1, 1]),
        ("one point moved", [0, 0, 1, 1, 1, 1, 2, 2, 2]),
        ("interleaved", [0, 1, 2, 0, 1, 2, 0, 1, 2]),
    ];
    for (name, pred) in cases {
        println!("{name:>16}: {:+.4}", ami(&truth, &pred)?);
    }

    // noise (-1) counts as its own cluster unless excluded
    let pred = [0i64, 0, -1, 1, 1, -1, 2, 2, -1];
    for mode in [NoiseHandling::IncludeNoise, NoiseHandling::ExcludeNoise] {
        let r = ami_report(&truth, &pred, mode)?;
        println!("{mode:?}: ami {:.4}, mi {:.4}, emi {:.4}, n {}", r.ami, r.mi, r.emi, r.n);
    }
    Ok(())
}
