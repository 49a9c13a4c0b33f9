//! Grow the default forest on the PBC trial data and print the main
//! diagnostics.
//!
//! ```text
//! cargo run --release -p rsf-core --example pbc_summary -- [seed]
//! ```

use std::time::Instant;

use rsf_core::dataset::pbc;
use rsf_core::importance::{interactions, minimal_depth, vimp};
use rsf_core::inference::{predict_oob, predict_test};
use rsf_core::{grow, GrowConfig};

fn main() -> rsf_core::Result<()> {
    let seed = std::env::args().nth(1).map_or(42, |s| s.parse().expect("integer seed"));
    let trial = pbc::trial();
    let test = pbc::test();
    let config = GrowConfig { seed, ..GrowConfig::default() };

    let start = Instant::now();
    let forest = grow(&trial, &config)?;
    println!("grown in {:.2?}", start.elapsed());

    let oob = predict_oob(&forest, &trial)?;
    println!("OOB error     {:.4}", oob.error()?);
    let pred = predict_test(&forest, &test, true)?;
    println!("test error    {:.4}", pred.error()?);

    let depth = minimal_depth(&forest);
    println!("threshold     {:.4}", depth.threshold);
    println!("model size    {}", depth.model_size);
    let importance = vimp(&forest, &trial, seed)?;
    println!("{:<12} {:>7} {:>5} {:>8} {:>5}", "variable", "depth", "rank", "vimp", "rank");
    for d in depth.ranked() {
        let v = importance.get(&d.variable).expect("same variables");
        println!(
            "{:<12} {:>7.3} {:>5} {:>8.4} {:>5}",
            d.variable, d.depth, d.rank, v.vimp, v.rank
        );
    }

    let m = interactions(&forest);
    print!("{:<12}", "");
    for v in &m.variables {
        print!(" {:>5.5}", v);
    }
    println!();
    for (v, row) in m.variables.iter().zip(&m.values) {
        print!("{v:<12}");
        for x in row {
            print!(" {x:>5.2}");
        }
        println!();
    }
    println!("total {:.2?}", start.elapsed());
    Ok(())
}
