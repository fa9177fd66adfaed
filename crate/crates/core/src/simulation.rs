//! Time integration of the semi-discrete closed loop, energy traces,
//! exponential fits and envelope checks.
//!
//! States are advanced in energy coordinates `y = W s`, where the discrete
//! energy is `|y|^2 / 2` and the operator is skew apart from a rank-two
//! damping term at the tip.

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, EigenDecomposition};
use crate::error::{Error, Result};
use crate::orfd::{OrfdSystem, StateVector};
use crate::C64;

pub const DEFAULT_DT: f64 = 1e-6;
pub const DEFAULT_T: f64 = 0.1;
pub const DEFAULT_PEAK_FRAC: f64 = 0.5;
/// Samples below this multiple of `eps * E(0)` are excluded from fits.
pub const ENERGY_FLOOR: f64 = 1e3;
/// Largest acceptable eigenvector condition number for modal stepping.
const MAX_MODAL_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Exact one-step propagator `exp(dt A)` from the eigendecomposition.
    #[default]
    Modal,
    /// Implicit midpoint rule; conserves the energy exactly when undamped.
    ImplicitMidpoint,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modal" => Ok(Integrator::Modal),
            "midpoint" | "implicit-midpoint" => Ok(Integrator::ImplicitMidpoint),
            _ => Err(Error::InvalidArgument(format!("unknown integrator '{s}' (modal | midpoint)"))),
        }
    }
}

impl std::fmt::Display for Integrator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Integrator::Modal => "modal",
            Integrator::ImplicitMidpoint => "midpoint",
        })
    }
}

/// One-step map in energy coordinates.
pub enum Propagator {
    Midpoint { lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn> },
    Modal { step: DMatrix<f64> },
}

impl Propagator {
    /// Builds the map for step `dt`; negative `dt` steps backwards.
    pub fn new(sys: &OrfdSystem, dt: f64, integrator: Integrator) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be finite and nonzero, got {dt:e}")));
        }
        let a = sys.energy_operator();
        let n = a.nrows();
        match integrator {
            Integrator::ImplicitMidpoint => {
                let lhs = DMatrix::<f64>::identity(n, n) - a * (0.5 * dt);
                let lu = lhs.lu();
                if !lu.is_invertible() {
                    return Err(Error::Singular(format!("midpoint step matrix at dt = {dt:e}")));
                }
                Ok(Propagator::Midpoint { lu })
            }
            Integrator::Modal => {
                let dec = EigenDecomposition::with_vectors(a, |lambda| sys.pencil_eigenvector(lambda))?;
                let cond = dec.condition();
                if !(cond < MAX_MODAL_CONDITION) {
                    return Err(Error::Singular(format!(
                        "eigenvector basis too ill-conditioned for modal stepping (cond = {cond:e}); use the midpoint integrator"
                    )));
                }
                let v = &dec.vectors;
                let v_inv = v
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Singular("eigenvector basis".into()))?;
                let mut scaled = v.clone();
                for (k, lambda) in dec.values.iter().enumerate() {
                    let factor = (lambda * dt).exp();
                    scaled.column_mut(k).scale_mut_complex(factor);
                }
                let step = (scaled * v_inv).map(|z: C64| z.re);
                Ok(Propagator::Modal { step })
            }
        }
    }

    /// Advances `y` by one step in place.
    pub fn step(&self, y: &mut DVector<f64>) {
        match self {
            Propagator::Midpoint { lu } => {
                // (I - dt/2 A) z = y,  y+ = 2 z - y
                let z = lu.solve(y).expect("factorization checked invertible");
                y.axpy(2.0, &z, -1.0);
            }
            Propagator::Modal { step } => {
                *y = step * &*y;
            }
        }
    }

    /// Midpoint state `(y_k + y_{k+1}) / 2` of the step taken from `y`
    /// (only meaningful for the midpoint rule, where it is the solve result).
    pub fn midpoint(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Propagator::Midpoint { lu } => lu.solve(y).expect("factorization checked invertible"),
            Propagator::Modal { step } => (y + step * y) * 0.5,
        }
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, f: C64);
}

impl<S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>> ScaleComplex
    for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_complex(&mut self, f: C64) {
        for z in self.iter_mut() {
            *z *= f;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub t_end: f64,
    pub dt: f64,
    pub integrator: Integrator,
    /// Record every `record_every`-th step (the initial state is always recorded).
    pub record_every: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { t_end: DEFAULT_T, dt: DEFAULT_DT, integrator: Integrator::Modal, record_every: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Tip velocity `v'_{N+1}`.
    pub boundary_v_dot: Vec<f64>,
    /// Tip current `p'_{N+1}`.
    pub boundary_p_dot: Vec<f64>,
    pub integrator: Integrator,
    pub dt: f64,
    /// Power-iteration estimate of the operator's largest eigenvalue magnitude.
    pub spectral_radius_estimate: f64,
    /// `dt > 0.2 / |mu_max|`: the step does not resolve the fastest mode.
    /// Harmless for the modal integrator, which is exact for any step.
    pub under_resolved: bool,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_energy(&self) -> f64 {
        self.energies.first().copied().unwrap_or(0.0)
    }

    /// `E(t) / E(0)`.
    pub fn normalized(&self) -> Vec<f64> {
        let e0 = self.initial_energy();
        self.energies.iter().map(|e| if e0 > 0.0 { e / e0 } else { 0.0 }).collect()
    }

    fn push(&mut self, sys: &OrfdSystem, t: f64, y: &DVector<f64>) {
        let (vd, pd) = sys.tip_rates(y);
        self.times.push(t);
        self.energies.push(0.5 * y.norm_squared());
        self.boundary_v_dot.push(vd);
        self.boundary_p_dot.push(pd);
    }
}

/// Piecewise-linear hat with unit peak at node `floor(peak_frac (N+1))`,
/// applied to both `v` and `p`, zero velocities.
pub fn hat_initial_condition(interior_nodes: usize, peak_frac: f64) -> Result<StateVector> {
    if !(peak_frac > 0.0 && peak_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("peak_frac must lie in (0, 1), got {peak_frac}")));
    }
    let n = interior_nodes + 1;
    let k = (peak_frac * n as f64).floor() as usize;
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "hat peak at node {k} coincides with a boundary node (valid: 1..={})",
            n - 1
        )));
    }
    let hat: Vec<f64> = (1..=n)
        .map(|j| if j <= k { j as f64 / k as f64 } else { (n - j) as f64 / (n - k) as f64 })
        .collect();
    let zeros = vec![0.0; n];
    StateVector::from_parts(&hat, &hat, &zeros, &zeros)
}

/// Integrates `s' = A s` from `s0` over `[0, t_end]`.
pub fn integrate(sys: &OrfdSystem, s0: &StateVector, opts: &SimulationOptions) -> Result<EnergyTrace> {
    let SimulationOptions { t_end, dt, integrator, record_every } = *opts;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt:e}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("T = {t_end:e} must be at least dt = {dt:e}")));
    }
    if record_every == 0 {
        return Err(Error::InvalidArgument("record stride must be at least 1".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let rho = estimate_spectral_radius(sys);
    let prop = Propagator::new(sys, dt, integrator)?;
    let mut y = sys.to_energy_coords(s0)?;

    let cap = steps / record_every + 2;
    let mut trace = EnergyTrace {
        times: Vec::with_capacity(cap),
        energies: Vec::with_capacity(cap),
        boundary_v_dot: Vec::with_capacity(cap),
        boundary_p_dot: Vec::with_capacity(cap),
        integrator,
        dt,
        spectral_radius_estimate: rho,
        under_resolved: dt > 0.2 / rho,
    };
    trace.push(sys, 0.0, &y);
    for k in 1..=steps {
        prop.step(&mut y);
        if k % record_every == 0 || k == steps {
            let t = k as f64 * dt;
            trace.push(sys, t, &y);
            if !trace.energies.last().is_some_and(|e| e.is_finite()) {
                return Err(Error::NonFinite { step: k, time: t });
            }
        }
    }
    Ok(trace)
}

/// Runs independent simulations concurrently; results keep the input order.
pub fn integrate_many(jobs: &[(&OrfdSystem, &StateVector)], opts: &SimulationOptions) -> Vec<Result<EnergyTrace>> {
    jobs.par_iter().map(|(sys, s0)| integrate(sys, s0, opts)).collect()
}

/// Largest eigenvalue magnitude of the closed-loop operator, estimated by
/// power iteration (the energy-coordinate form is nearly normal, so its
/// 2-norm is a tight estimate).
pub fn estimate_spectral_radius(sys: &OrfdSystem) -> f64 {
    eigen::spectral_radius_bound(sys.energy_operator(), 50)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Minus the least-squares slope of `ln E` [1/s].
    pub sigma_fit: f64,
    pub r_squared: f64,
    /// `(t_start, t_end)` of the samples actually used.
    pub window: (f64, f64),
    /// Set when the energy reached the numerical floor inside the window
    /// and only the positive prefix was fitted.
    pub truncated: bool,
    pub samples: usize,
}

/// Least-squares fit of `ln E` against `t` over `[0.1 T, 0.9 T]`.
pub fn fit_decay(trace: &EnergyTrace) -> Result<DecayFit> {
    if trace.len() < 2 {
        return Err(Error::InvalidArgument("trace has fewer than two samples".into()));
    }
    let t0 = trace.times[0];
    let span = trace.times[trace.len() - 1] - t0;
    let (lo, hi) = (t0 + 0.1 * span, t0 + 0.9 * span);
    let floor = ENERGY_FLOOR * f64::EPSILON * trace.initial_energy();

    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut truncated = false;
    for (&t, &e) in trace.times.iter().zip(&trace.energies) {
        if t < lo || t > hi {
            continue;
        }
        if !(e > floor && e > 0.0) {
            truncated = true;
            break;
        }
        ts.push(t);
        logs.push(e.ln());
    }
    if ts.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "only {} positive samples above the energy floor in the fit window; need at least 10",
            ts.len()
        )));
    }
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (t, l) in ts.iter().zip(&logs) {
        let (dx, dy) = (t - tm, l - lm);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = ts.iter().zip(&logs).map(|(t, l)| (l - lm - slope * (t - tm)).powi(2)).sum();
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * n * lm.abs().max(1.0).powi(2) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        sigma_fit: -slope,
        r_squared,
        window: (ts[0], ts[ts.len() - 1]),
        truncated,
        samples: ts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub passed: bool,
    /// `min_k (M E0 e^{-sigma t_k} - E_k) / (M E0)`; negative on failure.
    pub min_margin: f64,
    pub worst_index: usize,
}

/// Checks `E(t_k) <= M E(0) exp(-sigma t_k)` at every sample.
pub fn envelope_check(trace: &EnergyTrace, sigma: f64, big_m: f64) -> Result<EnvelopeReport> {
    if !(sigma >= 0.0 && big_m >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "envelope needs sigma >= 0 and M >= 1, got sigma = {sigma:e}, M = {big_m:e}"
        )));
    }
    let e0 = trace.initial_energy();
    let t0 = trace.times.first().copied().unwrap_or(0.0);
    let scale = big_m * e0;
    let mut min_margin = f64::INFINITY;
    let mut worst_index = 0;
    for (k, (&t, &e)) in trace.times.iter().zip(&trace.energies).enumerate() {
        let bound = scale * (-sigma * (t - t0)).exp();
        let margin = if scale > 0.0 { (bound - e) / scale } else { -e };
        if margin < min_margin {
            min_margin = margin;
            worst_index = k;
        }
    }
    Ok(EnvelopeReport { passed: min_margin >= 0.0, min_margin, worst_index })
}
