//! Without feedback the semi-discrete beam is conservative: the midpoint
//! rule keeps the discrete energy constant and the spectrum sits on the
//! imaginary axis.

use piezobeam::material::MaterialParams;
use piezobeam::orfd::build_system;
use piezobeam::simulation::{hat_initial_condition, integrate, Integrator, SimulationOptions};
use piezobeam::spectrum;

/// Returns `(max relative energy drift, max Re(mu) / spectral radius)`.
pub fn run_example() -> piezobeam::Result<(f64, f64)> {
    let n = 40;
    let sys = build_system(&MaterialParams::TABLE1, 0.0, 0.0, n)?;
    let s0 = hat_initial_condition(n, 0.5)?;
    let opts = SimulationOptions { t_end: 1e-2, dt: 1e-6, integrator: Integrator::ImplicitMidpoint, record_every: 500 };
    let trace = integrate(&sys, &s0, &opts)?;
    let e0 = trace.initial_energy();
    let drift = trace.energies.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
    println!("N = {n}, {} midpoint steps: max |E(t) - E(0)| / E(0) = {drift:.3e}", trace.times.last().map_or(0.0, |t| t / opts.dt).round());

    let spec = spectrum::eigenvalues(&sys)?;
    let ratio = spec.max_real.abs() / spec.spectral_radius;
    println!("max |Re(mu)| / spectral radius = {ratio:.3e}  (radius {:.3e})", spec.spectral_radius);
    println!("eigen-residual {:.2e} x norm", spec.residual_max / spec.norm);
    Ok((drift, ratio))
}

#[allow(dead_code)]
fn main() -> piezobeam::Result<()> {
    run_example().map(|_| ())
}
