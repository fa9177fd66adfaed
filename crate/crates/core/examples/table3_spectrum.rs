//! Reproduces the published grid of spectral abscissae at N = 80 and prints
//! it next to the reference values.
//!
//! ```text
//! cargo run --release --example table3_spectrum
//! ```

use piezobeam::material::MaterialParams;
use piezobeam::spectrum::{table3, table3_sweep, SpectrumGrid};

pub fn run_example() -> piezobeam::Result<SpectrumGrid> {
    let grid = table3_sweep(&MaterialParams::TABLE1, 80)?;
    let cols = table3::columns();
    println!("rows: current gain xi2, columns: velocity gain xi1; computed [published]");
    print!("{:>7}", "");
    for c in cols {
        print!("{:>18.2e}", c);
    }
    println!();
    let mut worst: f64 = 0.0;
    for (r, row) in table3::ROWS.iter().enumerate() {
        print!("{row:>7.0e}");
        for c in 0..cols.len() {
            // grid is indexed (xi1, xi2) = (column, row)
            let v = grid.max_real(c, r).unwrap_or(f64::NAN);
            let reference = table3::REFERENCE[r][c];
            worst = worst.max((v - reference).abs() / reference.abs());
            print!("{:>10.2} [{:>5}]", v, reference);
        }
        println!();
    }
    println!("largest relative deviation from the published grid: {:.1}%", 100.0 * worst);
    Ok(grid)
}

#[allow(dead_code)]
fn main() -> piezobeam::Result<()> {
    run_example().map(|_| ())
}
