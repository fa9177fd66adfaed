//! Physical parameters of the beam and the closed-form constants derived
//! from them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming a directory searched for `<name>.toml`
/// presets when `name` is not a built-in preset.
pub const PRESET_DIR_ENV: &str = "PIEZOBEAM_PRESET_DIR";

/// The six material constants of the beam plus its length, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Beam length [m].
    #[serde(rename = "L")]
    pub length: f64,
    /// Mass density [kg/m^3].
    pub rho: f64,
    /// Magnetic permeability [H/m].
    pub mu: f64,
    /// Elastic stiffness [N/m^2].
    pub alpha: f64,
    /// Piezoelectric constant [C/m^3].
    pub gamma: f64,
    /// Impermittivity [m/F].
    pub beta: f64,
}

impl MaterialParams {
    /// Realistic piezoelectric material used throughout the examples.
    pub const TABLE1: MaterialParams = MaterialParams {
        length: 1.0,
        rho: 6000.0,
        mu: 1e-6,
        alpha: 1e9,
        gamma: 1e-3,
        beta: 1e12,
    };

    pub fn new(length: f64, rho: f64, mu: f64, alpha: f64, gamma: f64, beta: f64) -> Result<Self> {
        let p = MaterialParams { length, rho, mu, alpha, gamma, beta };
        p.validate()?;
        Ok(p)
    }

    /// Reduced stiffness `alpha1 = alpha - gamma^2 beta`.
    pub fn alpha1(&self) -> f64 {
        self.alpha - self.gamma * self.gamma * self.beta
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("L", self.length),
            ("rho", self.rho),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("beta", self.beta),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {value:e} must be finite and strictly positive"
                )));
            }
        }
        let alpha1 = self.alpha1();
        if !(alpha1 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "alpha1 = alpha - gamma^2*beta = {alpha1:e} must be strictly positive"
            )));
        }
        Ok(())
    }

    /// Built-in preset by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "table1" => Some(Self::TABLE1),
            _ => None,
        }
    }

    /// Resolves a preset: built-in names first, then `<dir>/<name>.toml` in
    /// the directory named by [`PRESET_DIR_ENV`].
    pub fn preset(name: &str) -> Result<Self> {
        if let Some(p) = Self::builtin(name) {
            return Ok(p);
        }
        match std::env::var_os(PRESET_DIR_ENV) {
            Some(dir) => {
                let path = PathBuf::from(dir).join(format!("{name}.toml"));
                if path.is_file() {
                    Self::from_config_file(&path)
                } else {
                    Err(Error::Config(format!(
                        "unknown preset '{name}' (not built in, {} not found)",
                        path.display()
                    )))
                }
            }
            None => Err(Error::Config(format!(
                "unknown preset '{name}'; built-in presets: table1"
            ))),
        }
    }

    /// Parses `key = value` lines (keys `L, rho, mu, alpha, gamma, beta`;
    /// `#` starts a comment).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let p: MaterialParams = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Config text that parses back to exactly `self`.
    pub fn to_config_string(&self) -> String {
        // `{:?}` prints the shortest representation that round-trips.
        format!(
            "# beam material parameters (SI units)\n\
             L = {:?}\nrho = {:?}\nmu = {:?}\nalpha = {:?}\ngamma = {:?}\nbeta = {:?}\n",
            self.length, self.rho, self.mu, self.alpha, self.gamma, self.beta
        )
    }
}

/// Closed-form constants of the continuous model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Beam length carried along for the rate formulas [m].
    pub length: f64,
    /// `alpha - gamma^2 beta` [N/m^2].
    pub alpha1: f64,
    /// Lyapunov constant [s/m].
    pub eta: f64,
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    /// `1 / (4 eta L)` [1/s].
    pub sigma_max: f64,
    /// `2L / max(zeta-, zeta+)`, the observation-time threshold.
    pub t_obs_min: f64,
}

impl DerivedConstants {
    /// `1 / (2 eta)`, the level both bound functions must exceed.
    pub fn half_inv_eta(&self) -> f64 {
        0.5 / self.eta
    }

    /// Perturbation weight `1/(2 eta L)` at which `sigma_max` is attained.
    pub fn optimal_delta(&self) -> f64 {
        0.5 / (self.eta * self.length)
    }
}

pub fn derive_constants(p: &MaterialParams) -> Result<DerivedConstants> {
    p.validate()?;
    let alpha1 = p.alpha1();

    // zeta^2 are the roots of z^2 - a z + c = 0.
    let a = p.alpha * p.mu / (alpha1 * p.beta) + p.rho / alpha1;
    let c = p.rho * p.mu / (p.beta * alpha1);
    let disc = a * a - 4.0 * c;
    let disc = if disc < 0.0 {
        if -disc <= 1e-12 * a * a {
            0.0
        } else {
            return Err(Error::InvalidParams(format!(
                "negative wave-speed discriminant {disc:e}"
            )));
        }
    } else {
        disc
    };
    let root = disc.sqrt();
    let big = 0.5 * (a + root);
    // small root from the product of roots avoids cancellation
    let small = if big > 0.0 { c / big } else { 0.0 };
    let zeta_plus = big.sqrt();
    let zeta_minus = small.sqrt();

    let coupling = (p.mu * p.gamma * p.gamma / alpha1).sqrt();
    let eta = f64::max(
        (p.rho / alpha1).sqrt() + coupling,
        (p.mu / p.beta).sqrt() + coupling,
    );

    Ok(DerivedConstants {
        length: p.length,
        alpha1,
        eta,
        zeta_minus,
        zeta_plus,
        sigma_max: 1.0 / (4.0 * eta * p.length),
        t_obs_min: 2.0 * p.length / zeta_minus.max(zeta_plus),
    })
}
