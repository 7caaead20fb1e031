//! Parse a small raw trade file, aggregate 6-digit codes to 4 digits and
//! inspect the rejected rows.
//!
//! cargo run --example ingest

use std::io::Write;

use tradeshape::ingest::{country_volume_sample, RecordFormat};
use tradeshape::pipeline::ingest_file;

fn main() -> tradeshape::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("trade.csv");
    let mut f = std::fs::File::create(&path).expect("create");
    writeln!(
        f,
        "year,country,product,volume\n\
         2010,ITA,870321,150.5\n\
         2010,ITA,870322,49.5\n\
         2010,ITA,8471,310\n\
         2010,DEU,8703,900\n\
         2010,DEU,84,12\n\
         2010,FRA,8703,-3\n\
         2010,FRA,3004,75"
    )
    .expect("write");
    drop(f);

    let report = ingest_file(&path, &RecordFormat::default())?;
    let m = &report.matrix;
    println!("matrix: {} countries x {} products", m.n_countries(), m.n_products());
    println!("products: {:?}", m.products());
    for c in m.countries() {
        println!("  {c}: {:?}", country_volume_sample(m, c)?);
    }
    println!("rejected rows (exit code would be {}):", report.outcome.exit_code());
    for r in &report.rejects {
        println!("  line {}: {}", r.line, r.reason);
    }

    let mut canonical = Vec::new();
    m.write_csv(&mut canonical)?;
    println!("canonical file:\n{}", String::from_utf8_lossy(&canonical));
    Ok(())
}
