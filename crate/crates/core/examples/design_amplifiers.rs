//! Safe amplifier intervals for the reference material, and how they move
//! with the Young-inequality weight epsilon.
//!
//! ```text
//! cargo run --example design_amplifiers
//! ```

use piezobeam::design::{self, FeedbackDesign};
use piezobeam::material::{derive_constants, MaterialParams};

pub fn run_example() -> piezobeam::Result<Vec<FeedbackDesign>> {
    let p = MaterialParams::TABLE1;
    let d = derive_constants(&p)?;
    let (lo, hi) = design::epsilon_bounds(&d, &p);
    println!("eta = {:.6e} s/m, sigma_max = {:.4} 1/s", d.eta, d.sigma_max);
    println!("epsilon must lie in ({lo:.3e}, {hi:.4})\n");
    println!("{:>10}  {:>24}  {:>24}", "epsilon", "(c1-, c1+)", "(c2-, c2+)");

    let mut designs = Vec::new();
    for eps in [1e-3, 1e-1, 0.5, 1.0, 2.0, 2.9] {
        let des = design::amplifier_intervals(eps, &d, &p)?;
        println!(
            "{eps:>10}  ({:.3e}, {:.3e})  ({:.3e}, {:.3e})",
            des.c1_lo, des.c1_hi, des.c2_lo, des.c2_hi
        );
        designs.push(des);
    }

    // the two amplifier pairs used by the simulations
    for (xi1, xi2) in [(1e6, 1e9), (1e4, 1e9)] {
        let check = design::verify_design(xi1, xi2, 1.0, &d, &p)?;
        let verdict = if check.passed() { "guarantees sigma_max" } else { "does not" };
        println!("\n({xi1:e}, {xi2:e}) {verdict}; guaranteed rate {:.3} 1/s", check.guaranteed_sigma);
        for v in &check.violations {
            println!("  - {v}");
        }
    }
    Ok(designs)
}

#[allow(dead_code)]
fn main() -> piezobeam::Result<()> {
    run_example().map(|_| ())
}
