//! Read a price CSV, convert it to returns and split it in time order.

use bootrobopt::panel::{read_csv, split, to_returns, CsvSchema, ReturnKind, SplitSpec};

const PRICES: &str = "\
date,SPX,GOLD
2024-01-02,4742.8,2064.4
2024-01-03,4704.8,2042.8
2024-01-04,4688.7,
2024-01-05,4697.2,2049.8
2024-01-08,4763.5,2033.0
2024-01-09,4756.5,2029.5
2024-01-10,4783.5,2024.0
";

fn main() -> bootrobopt::Result<()> {
    let ingested = read_csv(PRICES.as_bytes(), &CsvSchema::default())?;
    println!("kept {} rows, dropped {}", ingested.panel.len(), ingested.dropped_rows);

    let r = to_returns(&ingested.panel, ReturnKind::Log)?;
    let (train, test) = split(&r, SplitSpec { train_fraction: 0.6 })?;
    println!("train {:?}", train.dates());
    println!("test  {:?}", test.dates());
    Ok(())
}
