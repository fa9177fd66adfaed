//! Spectral abscissa of the semi-discrete closed loop and sweeps over the
//! amplifier plane.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{self, FeedbackDesign};
use crate::eigen::{self, Reduction};
use crate::error::{Error, Result};
use crate::material::{derive_constants, MaterialParams};
use crate::orfd::{build_system, OrfdSystem};
use crate::C64;

/// Default mesh for spectral work.
pub const DEFAULT_N: usize = 80;
/// Eigenpairs whose residual is checked per spectrum.
pub const CHECKED_PAIRS: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    #[serde(with = "complex_list")]
    pub eigenvalues: Vec<C64>,
    pub max_real: f64,
    pub spectral_radius: f64,
    /// Largest `||A x - mu x|| / ||x||` over the checked pairs.
    pub residual_max: f64,
    /// Frobenius norm of the operator the residuals refer to.
    pub norm: f64,
}

impl SpectrumResult {
    pub fn residual_ok(&self) -> bool {
        self.residual_max < 1e-8 * self.norm
    }
}

mod complex_list {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

/// Full spectrum of the closed-loop operator.
///
/// The solve runs on the energy-coordinate form, which is exactly similar to
/// the first-order operator but nearly normal, so its eigenvalues are far
/// better conditioned.
pub fn eigenvalues(sys: &OrfdSystem) -> Result<SpectrumResult> {
    spectrum_of(sys.energy_operator())
}

/// Spectrum of an arbitrary dense real matrix with sampled residual checks.
pub fn spectrum_of(a: &DMatrix<f64>) -> Result<SpectrumResult> {
    let red = Reduction::new(a)?;
    let values = red.eigenvalues()?;
    let n = values.len();
    let mut max_real = f64::NEG_INFINITY;
    let mut arg_max = 0;
    let mut spectral_radius = 0.0f64;
    for (k, z) in values.iter().enumerate() {
        if z.re > max_real {
            max_real = z.re;
            arg_max = k;
        }
        spectral_radius = spectral_radius.max(z.norm());
    }
    let norm = a.norm();
    let mut residual_max = 0.0f64;
    for k in sample_indices(n, arg_max) {
        let x = red.eigenvector(values[k])?;
        residual_max = residual_max.max(eigen::residual(a, values[k], &x));
    }
    Ok(SpectrumResult { eigenvalues: values, max_real, spectral_radius, residual_max, norm })
}

/// Up to [`CHECKED_PAIRS`] indices spread over the spectrum, always including `must`.
fn sample_indices(n: usize, must: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..CHECKED_PAIRS.min(n)).map(|k| k * n / CHECKED_PAIRS.min(n)).collect();
    if !idx.contains(&must) {
        idx.pop();
        idx.push(must);
    }
    idx
}

/// Convenience: assemble and solve in one call.
pub fn max_real_part(p: &MaterialParams, xi1: f64, xi2: f64, n: usize) -> Result<f64> {
    let sys = build_system(p, xi1, xi2, n)?;
    let red = Reduction::new(sys.energy_operator())?;
    let values = red.eigenvalues()?;
    Ok(values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridCell {
    pub xi1: f64,
    pub xi2: f64,
    /// `None` when the eigensolve failed for this cell.
    pub max_real: Option<f64>,
    pub in_design_box: bool,
    pub error: Option<String>,
}

/// Results of a sweep, stored row-major with `xi1` as the outer index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub xi1_values: Vec<f64>,
    pub xi2_values: Vec<f64>,
    pub cells: Vec<GridCell>,
    pub interior_nodes: usize,
    /// Design used to annotate cells (`epsilon = 1`).
    pub design: FeedbackDesign,
}

impl SpectrumGrid {
    pub fn cell(&self, i1: usize, i2: usize) -> &GridCell {
        &self.cells[i1 * self.xi2_values.len() + i2]
    }

    pub fn max_real(&self, i1: usize, i2: usize) -> Option<f64> {
        self.cell(i1, i2).max_real
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.max_real.is_none()).count()
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo <= hi and count >= 1, got ({lo:e}, {hi:e}, {count})"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect())
}

/// Default sweep axis: 25 points over `[1e-8, 1e12]`.
pub fn default_axis() -> Vec<f64> {
    log_grid(1e-8, 1e12, 25).expect("static grid")
}

/// Evaluates the spectral abscissa on every `(xi1, xi2)` pair. Cells are
/// independent and run concurrently; the result order is fixed by index.
pub fn sweep(p: &MaterialParams, xi1_values: &[f64], xi2_values: &[f64], n: usize) -> Result<SpectrumGrid> {
    if xi1_values.is_empty() || xi2_values.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be nonempty".into()));
    }
    let consts = derive_constants(p)?;
    let design = design::amplifier_intervals(design::DEFAULT_EPSILON, &consts, p)?;
    let pairs: Vec<(f64, f64)> = xi1_values
        .iter()
        .flat_map(|&a| xi2_values.iter().map(move |&b| (a, b)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(xi1, xi2)| {
            let (max_real, error) = match max_real_part(p, xi1, xi2, n) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            GridCell { xi1, xi2, max_real, in_design_box: design.admits(xi1, xi2), error }
        })
        .collect();
    Ok(SpectrumGrid {
        xi1_values: xi1_values.to_vec(),
        xi2_values: xi2_values.to_vec(),
        cells,
        interior_nodes: n,
        design,
    })
}

/// Like [`sweep`] but on a dedicated pool of `threads` workers.
pub fn sweep_with_threads(
    p: &MaterialParams,
    xi1_values: &[f64],
    xi2_values: &[f64],
    n: usize,
    threads: usize,
) -> Result<SpectrumGrid> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| sweep(p, xi1_values, xi2_values, n))
}

/// The published reference grid.
///
/// Its row labels act on the charge (current) feedback and its column
/// labels on the velocity feedback: only that reading reproduces the
/// published values with the velocity/current gains as defined here.
pub mod table3 {
    /// Row labels (current gain `xi2`).
    pub const ROWS: [f64; 7] = [1e-7, 1e-5, 1e-3, 1e6, 1e9, 1e10, 1e11];
    /// Column labels (velocity gain `xi1`).
    pub fn columns() -> [f64; 6] {
        [1e5, 10f64.powf(5.5), 1e6, 10f64.powf(6.5), 1e7, 10f64.powf(7.5)]
    }
    /// Published spectral abscissae, `REFERENCE[row][col]`.
    pub const REFERENCE: [[f64; 6]; 7] = [
        [-0.1, -0.1, -0.1, -0.1, -0.1, -0.1],
        [-10.0, -10.0, -10.0, -10.0, -10.0, -10.0],
        [-17.0, -53.0, -177.0, -421.0, -101.9, -32.0],
        [-17.0, -53.0, -177.0, -421.0, -101.9, -31.0],
        [-17.0, -53.0, -177.0, -421.0, -101.0, -30.0],
        [-17.0, -52.0, -100.0, -100.0, -97.0, -23.0],
        [-10.0, -10.0, -10.0, -10.0, -10.0, -9.0],
    ];

    /// `(xi1, xi2)` for a table entry.
    pub fn amplifiers(row: usize, col: usize) -> (f64, f64) {
        (columns()[col], ROWS[row])
    }
}

/// Sweeps the reference grid; `xi1_values` are the table columns and
/// `xi2_values` the table rows.
pub fn table3_sweep(p: &MaterialParams, n: usize) -> Result<SpectrumGrid> {
    sweep(p, &table3::columns(), &table3::ROWS, n)
}
