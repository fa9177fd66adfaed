//! Spectral abscissa over a log grid of amplifiers, written as CSV for a
//! contour plot. Cells inside the design box are marked.
//!
//! ```text
//! cargo run --release --example decay_contour -- [N] [points] [out.csv]
//! ```

use piezobeam::io::write_grid_csv;
use piezobeam::material::MaterialParams;
use piezobeam::spectrum::{log_grid, sweep, SpectrumGrid};

pub fn contour(n: usize, points: usize) -> piezobeam::Result<SpectrumGrid> {
    let axis = log_grid(1e-8, 1e12, points)?;
    sweep(&MaterialParams::TABLE1, &axis, &axis, n)
}

pub fn print_grid(grid: &SpectrumGrid) {

    print!("{:>9}", "xi1\\xi2");
    for xi2 in &grid.xi2_values {
        print!("{:>9.0e}", xi2);
    }
    println!();
    for (i, xi1) in grid.xi1_values.iter().enumerate() {
        print!("{xi1:>9.0e}");
        for j in 0..grid.xi2_values.len() {
            let c = grid.cell(i, j);
            let mark = if c.in_design_box { "*" } else { " " };
            match c.max_real {
                Some(v) => print!("{:>8.1}{mark}", v),
                None => print!("{:>9}", "fail"),
            }
        }
        println!();
    }
    println!("(* inside (c1-, c1+) x (c2-, c2+))");
}

/// Coarse 11 x 11 grid (two decades apart) on a 12-node mesh: a quick look at the landscape.
pub fn run_example() -> piezobeam::Result<SpectrumGrid> {
    let grid = contour(12, 11)?;
    print_grid(&grid);
    Ok(grid)
}

#[allow(dead_code)]
fn main() -> piezobeam::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().and_then(|a| a.parse().ok()).unwrap_or(12);
    let points = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(11);
    let grid = contour(n, points)?;
    print_grid(&grid);
    if let Some(path) = args.get(2) {
        write_grid_csv(path, &grid)?;
        println!("wrote {path}");
    }
    Ok(())
}
