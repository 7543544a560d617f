//! Reads a long-format CSV of coded events, drops short sequences, and
//! writes the retained patients back out with their original codes.

use case::harness::{export_csv, ingest, IngestFormat, IngestSchema};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("events.csv");
    let mut text = String::from("patient_id,event\n");
    for i in 0..40 {
        text += &format!("long,{}\n", ["401.9", "250.00", "428.0", "V58.61"][i % 4]);
    }
    for code in ["272.4", "401.9"] {
        text += &format!("short,{code}\n");
    }
    std::fs::write(&input, text)?;

    let schema = IngestSchema::default();
    let (dataset, vocab, report) = ingest(&input, IngestFormat::Csv, &schema)?;
    println!("read {} sequences, kept {}, dropped {}", report.read, report.retained, report.dropped);
    println!("vocabulary {:?}", vocab.events);
    println!("first events as indices {:?}", &dataset.patients[0].events[..6]);

    let out = dir.path().join("roundtrip.csv");
    export_csv(&dataset, &vocab, &schema, &out)?;
    println!("{}", std::fs::read_to_string(out)?.lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
