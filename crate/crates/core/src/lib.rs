//! Boundary feedback amplifier design for magnetizable piezoelectric beams,
//! with numerical verification on an order-reduced finite-difference (ORFD)
//! semi-discretization.
//!
//! The beam is clamped at `x = 0` and actuated at the free tip `x = L` by
//! two controllers proportional to the measured tip velocity and tip
//! current,
//!
//! ```text
//! u1(t) = -xi1 * v_t(L, t),    u2(t) = -xi2 * p_t(L, t).
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`material`]: physical parameters and closed-form derived constants
//!   (wave-speed constants, the Lyapunov constant `eta`, `sigma_max`).
//! * [`design`]: guaranteed Lyapunov decay rates and the safe amplifier
//!   intervals `(c1-, c1+)`, `(c2-, c2+)`.
//! * [`orfd`]: mass/stiffness/boundary matrices, the first-order operator,
//!   discrete energy and the discrete multiplier functional.
//! * [`eigen`]: dense nonsymmetric eigensolver (balancing, Hessenberg
//!   reduction, Francis double-shift QR, inverse iteration).
//! * [`simulation`]: hat initial data, time integration, energy traces,
//!   decay-rate fits and envelope checks.
//! * [`spectrum`]: spectral abscissa of the semi-discrete operator and
//!   amplifier-plane sweeps.
//! * [`cli`]: the `piezobeam` command line front end and its file formats.
//!
//! ```
//! use piezobeam::{design, material::{derive_constants, MaterialParams}};
//!
//! let params = MaterialParams::TABLE1;
//! let consts = derive_constants(&params).unwrap();
//! let plan = design::amplifier_intervals(1.0, &consts, &params).unwrap();
//! assert!((consts.sigma_max - 102.0).abs() < 0.5);
//! assert!(plan.c1_lo < 1e6 && 1e6 < plan.c1_hi);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod eigen;
pub mod error;
pub mod io;
pub mod material;
pub mod orfd;
pub mod simulation;
pub mod spectrum;

pub use error::{Error, Result};

/// Complex scalar used for spectra and eigenvectors.
pub type C64 = nalgebra::Complex<f64>;
