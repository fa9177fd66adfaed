//! Energy decay from hat initial data for a pair inside the design box and
//! a pair whose velocity gain is too small, run side by side.
//!
//! ```text
//! cargo run --release --example energy_decay -- [out_dir]
//! ```

use std::path::PathBuf;

use piezobeam::io::{write_normalized_csv, write_trace_csv};
use piezobeam::material::{derive_constants, MaterialParams};
use piezobeam::orfd::build_system;
use piezobeam::simulation::{envelope_check, fit_decay, hat_initial_condition, integrate_many, SimulationOptions};

pub fn run_example(out_dir: Option<PathBuf>) -> piezobeam::Result<Vec<f64>> {
    let p = MaterialParams::TABLE1;
    let d = derive_constants(&p)?;
    let n = 80;
    let pairs = [(1e6, 1e9), (1e4, 1e9)];
    let systems = pairs
        .iter()
        .map(|&(a, b)| build_system(&p, a, b, n))
        .collect::<piezobeam::Result<Vec<_>>>()?;
    let s0 = hat_initial_condition(n, 0.5)?;
    let jobs: Vec<_> = systems.iter().map(|s| (s, &s0)).collect();
    let opts = SimulationOptions { record_every: 10, ..SimulationOptions::default() };

    let mut rates = Vec::new();
    for ((xi1, xi2), trace) in pairs.iter().zip(integrate_many(&jobs, &opts)) {
        let trace = trace?;
        let fit = fit_decay(&trace)?;
        let env = envelope_check(&trace, d.sigma_max, 3.0)?;
        println!(
            "({xi1:e}, {xi2:e}): E(T)/E(0) = {:.3e}, sigma_fit = {:.2} (r^2 {:.4}), envelope 3 E(0) exp(-{:.1} t) {}",
            trace.normalized().last().unwrap(),
            fit.sigma_fit,
            fit.r_squared,
            d.sigma_max,
            if env.passed { "holds" } else { "violated" }
        );
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
            write_trace_csv(dir.join(format!("trace_{xi1:e}_{xi2:e}.csv")), &trace)?;
            write_normalized_csv(dir.join(format!("normalized_{xi1:e}_{xi2:e}.csv")), &trace)?;
        }
        rates.push(fit.sigma_fit);
    }
    println!("rate ratio optimal / suboptimal = {:.1}", rates[0] / rates[1]);
    Ok(rates)
}

#[allow(dead_code)]
fn main() -> piezobeam::Result<()> {
    run_example(std::env::args().nth(1).map(PathBuf::from)).map(|_| ())
}
