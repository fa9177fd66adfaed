//! Order-reduced finite-difference (ORFD) semi-discretization.
//!
//! The interval `[0, L]` is split into `N + 1` cells of width
//! `h = L / (N + 1)`. Unknowns live on nodes `1..=N+1`; the clamped node
//! `x_0` is eliminated. Odd derivatives are sampled at the cell midpoints,
//! which produces the tridiagonal averaging mass matrix `M` next to the
//! usual central-difference matrix `A_h`:
//!
//! ```text
//! (C1 ⊗ M) [v'' p''] + (C2 ⊗ A_h) [v p] + (C3 ⊗ B) [v' p'] = 0
//! ```
//!
//! with `C1 = diag(rho, mu)`, `C2 = [[alpha, -gamma beta], [-gamma beta, beta]]`,
//! `C3 = diag(xi1, xi2)` and `B = e_{N+1} e_{N+1}^T / h`.
//!
//! Besides the first-order operator in the original state
//! `(v, p, v', p')`, [`OrfdSystem`] keeps an exactly similar operator in
//! *energy coordinates* `y = W s`, where `W` is the block Cholesky factor of
//! the discrete energy. There the energy is `|y|^2 / 2` and the operator is
//! a skew-symmetric matrix minus a rank-two positive semidefinite damping
//! term, which is what the time integrators and the eigensolver work on.

use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::C64;

/// Samples of `(v, p, v', p')` on nodes `1..=N+1`, flattened in that block order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    data: DVector<f64>,
}

impl StateVector {
    pub fn zeros(nodes: usize) -> Self {
        StateVector { data: DVector::zeros(4 * nodes) }
    }

    pub fn from_parts(v: &[f64], p: &[f64], v_dot: &[f64], p_dot: &[f64]) -> Result<Self> {
        let n = v.len();
        for part in [p, v_dot, p_dot] {
            if part.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: part.len() });
            }
        }
        let data = DVector::from_iterator(
            4 * n,
            v.iter().chain(p).chain(v_dot).chain(p_dot).copied(),
        );
        Ok(StateVector { data })
    }

    pub fn from_vector(data: DVector<f64>) -> Result<Self> {
        if !data.len().is_multiple_of(4) || data.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 4 * (data.len() / 4).max(1),
                got: data.len(),
            });
        }
        Ok(StateVector { data })
    }

    /// Number of unknown nodes per field (`N + 1`).
    pub fn nodes(&self) -> usize {
        self.data.len() / 4
    }

    fn block(&self, k: usize) -> &[f64] {
        let n = self.nodes();
        &self.data.as_slice()[k * n..(k + 1) * n]
    }

    pub fn v(&self) -> &[f64] {
        self.block(0)
    }

    pub fn p(&self) -> &[f64] {
        self.block(1)
    }

    pub fn v_dot(&self) -> &[f64] {
        self.block(2)
    }

    pub fn p_dot(&self) -> &[f64] {
        self.block(3)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }

    pub fn scaled(&self, factor: f64) -> Self {
        StateVector { data: &self.data * factor }
    }
}

/// Midpoint averages `(v_{j+1} + v_j)/2` and differences `(v_{j+1} - v_j)/h`
/// of consecutive samples.
pub fn average_and_difference(samples: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    let avg = samples.windows(2).map(|w| 0.5 * (w[1] + w[0])).collect();
    let diff = samples.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    Ok((avg, diff))
}

/// Assembled ORFD system for one material and one amplifier pair.
#[derive(Debug, Clone)]
pub struct OrfdSystem {
    params: MaterialParams,
    interior_nodes: usize,
    h: f64,
    xi1: f64,
    xi2: f64,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    boundary: DMatrix<f64>,
    c1: Matrix2<f64>,
    c2: Matrix2<f64>,
    c3: Matrix2<f64>,
    operator: DMatrix<f64>,
    energy: EnergyCoordinates,
}

/// Factors of the discrete energy and the operator expressed in them.
#[derive(Debug, Clone)]
struct EnergyCoordinates {
    /// Lower Cholesky factor of `h C2 ⊗ A_h`.
    stiff_l: DMatrix<f64>,
    /// Lower Cholesky factor of `h C1 ⊗ M`.
    mass_l: DMatrix<f64>,
    /// Rows mapping the velocity half of `y` to the tip velocities `(v'_{N+1}, p'_{N+1})`.
    tip_rows: [DVector<f64>; 2],
    operator: DMatrix<f64>,
}

fn tridiagonal(n: usize, diag: f64, off: f64, last: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            if i == n - 1 {
                last
            } else {
                diag
            }
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}

pub fn build_system(p: &MaterialParams, xi1: f64, xi2: f64, interior_nodes: usize) -> Result<OrfdSystem> {
    p.validate()?;
    if interior_nodes < 2 {
        return Err(Error::InvalidArgument(format!(
            "ORFD needs N >= 2 interior nodes, got {interior_nodes}"
        )));
    }
    if !(xi1 >= 0.0 && xi2 >= 0.0 && xi1.is_finite() && xi2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "amplifiers must be finite and nonnegative, got ({xi1:e}, {xi2:e})"
        )));
    }
    let n = interior_nodes + 1;
    let h = p.length / n as f64;

    let mass = tridiagonal(n, 0.5, 0.25, 0.25);
    let stiffness = tridiagonal(n, 2.0, -1.0, 1.0) / (h * h);
    let mut boundary = DMatrix::zeros(n, n);
    boundary[(n - 1, n - 1)] = 1.0 / h;

    let c1 = Matrix2::new(p.rho, 0.0, 0.0, p.mu);
    let gb = p.gamma * p.beta;
    let c2 = Matrix2::new(p.alpha, -gb, -gb, p.beta);
    let c3 = Matrix2::new(xi1, 0.0, 0.0, xi2);
    let c1_inv = c1
        .try_inverse()
        .ok_or_else(|| Error::Singular("material matrix C1".into()))?;

    let mass_chol = Cholesky::new(mass.clone())
        .ok_or_else(|| Error::Singular("ORFD mass matrix is not positive definite".into()))?;
    let minv_stiff = mass_chol.solve(&stiffness);
    let minv_boundary = mass_chol.solve(&boundary);

    let m2 = 2 * n;
    let mut operator = DMatrix::zeros(2 * m2, 2 * m2);
    operator
        .view_mut((0, m2), (m2, m2))
        .copy_from(&DMatrix::identity(m2, m2));
    let lower_left = -to_dynamic(&(c1_inv * c2)).kronecker(&minv_stiff);
    let lower_right = -to_dynamic(&(c1_inv * c3)).kronecker(&minv_boundary);
    operator.view_mut((m2, 0), (m2, m2)).copy_from(&lower_left);
    operator.view_mut((m2, m2), (m2, m2)).copy_from(&lower_right);

    let energy = EnergyCoordinates::new(&mass, &stiffness, &c1, &c2, h, xi1, xi2)?;

    Ok(OrfdSystem {
        params: *p,
        interior_nodes,
        h,
        xi1,
        xi2,
        mass,
        stiffness,
        boundary,
        c1,
        c2,
        c3,
        operator,
        energy,
    })
}

fn to_dynamic(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

impl EnergyCoordinates {
    fn new(
        mass: &DMatrix<f64>,
        stiffness: &DMatrix<f64>,
        c1: &Matrix2<f64>,
        c2: &Matrix2<f64>,
        h: f64,
        xi1: f64,
        xi2: f64,
    ) -> Result<Self> {
        let n = mass.nrows();
        let m2 = 2 * n;
        let gram_stiff = to_dynamic(c2).kronecker(stiffness) * h;
        let gram_mass = to_dynamic(c1).kronecker(mass) * h;
        let stiff_l = Cholesky::new(gram_stiff)
            .ok_or_else(|| Error::Singular("stiffness energy form is not positive definite".into()))?
            .unpack();
        let mass_l = Cholesky::new(gram_mass)
            .ok_or_else(|| Error::Singular("kinetic energy form is not positive definite".into()))?
            .unpack();

        // S = Lk^T Lm^{-T}, i.e. S^T = Lm^{-1} Lk.
        let st = mass_l
            .solve_lower_triangular(&stiff_l)
            .ok_or_else(|| Error::Singular("kinetic energy factor".into()))?;
        let s = st.transpose();

        let tip = |idx: usize| -> Result<DVector<f64>> {
            let mut e = DVector::zeros(m2);
            e[idx] = 1.0;
            mass_l
                .solve_lower_triangular(&e)
                .ok_or_else(|| Error::Singular("kinetic energy factor".into()))
        };
        let tip_rows = [tip(n - 1)?, tip(m2 - 1)?];

        let mut damping = DMatrix::zeros(m2, m2);
        for (u, xi) in tip_rows.iter().zip([xi1, xi2]) {
            if xi != 0.0 {
                damping.ger(xi, u, u, 1.0);
            }
        }

        let mut operator = DMatrix::zeros(2 * m2, 2 * m2);
        operator.view_mut((0, m2), (m2, m2)).copy_from(&s);
        operator.view_mut((m2, 0), (m2, m2)).copy_from(&(-st));
        operator.view_mut((m2, m2), (m2, m2)).copy_from(&(-damping));

        Ok(EnergyCoordinates { stiff_l, mass_l, tip_rows, operator })
    }
}

impl OrfdSystem {
    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    /// Interior node count `N`.
    pub fn interior_nodes(&self) -> usize {
        self.interior_nodes
    }

    /// Unknowns per field, `N + 1`.
    pub fn nodes(&self) -> usize {
        self.interior_nodes + 1
    }

    /// State dimension `4 (N + 1)`.
    pub fn dim(&self) -> usize {
        4 * self.nodes()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn amplifiers(&self) -> (f64, f64) {
        (self.xi1, self.xi2)
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn boundary(&self) -> &DMatrix<f64> {
        &self.boundary
    }

    pub fn c1(&self) -> &Matrix2<f64> {
        &self.c1
    }

    pub fn c2(&self) -> &Matrix2<f64> {
        &self.c2
    }

    pub fn c3(&self) -> &Matrix2<f64> {
        &self.c3
    }

    /// First-order operator acting on `(v, p, v', p')`.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// The operator in energy coordinates: `W A W^{-1}` with `|W s|^2 / 2 = E_h(s)`.
    pub fn energy_operator(&self) -> &DMatrix<f64> {
        &self.energy.operator
    }

    /// Node coordinates `x_j = j h`, `j = 0..=N+1`.
    pub fn node_positions(&self) -> Vec<f64> {
        (0..=self.nodes()).map(|j| j as f64 * self.h).collect()
    }

    fn check_dim(&self, s: &StateVector) -> Result<()> {
        if s.nodes() != self.nodes() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: s.as_vector().len() });
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }

    /// `y = W s`; the discrete energy of `s` is `|y|^2 / 2`.
    pub fn to_energy_coords(&self, s: &StateVector) -> Result<DVector<f64>> {
        self.check_dim(s)?;
        let m2 = 2 * self.nodes();
        let x = s.as_vector();
        let q = x.rows(0, m2);
        let w = x.rows(m2, m2);
        let mut y = DVector::zeros(2 * m2);
        y.rows_mut(0, m2).copy_from(&(self.energy.stiff_l.tr_mul(&q)));
        y.rows_mut(m2, m2).copy_from(&(self.energy.mass_l.tr_mul(&w)));
        Ok(y)
    }

    /// Inverse of [`Self::to_energy_coords`].
    pub fn from_energy_coords(&self, y: &DVector<f64>) -> Result<StateVector> {
        self.check_len(y.len())?;
        let m2 = 2 * self.nodes();
        let yq = y.rows(0, m2).into_owned();
        let yw = y.rows(m2, m2).into_owned();
        let q = self
            .energy
            .stiff_l
            .tr_solve_lower_triangular(&yq)
            .ok_or_else(|| Error::Singular("stiffness energy factor".into()))?;
        let w = self
            .energy
            .mass_l
            .tr_solve_lower_triangular(&yw)
            .ok_or_else(|| Error::Singular("kinetic energy factor".into()))?;
        let mut x = DVector::zeros(2 * m2);
        x.rows_mut(0, m2).copy_from(&q);
        x.rows_mut(m2, m2).copy_from(&w);
        StateVector::from_vector(x)
    }

    /// Unit eigenvector, in energy coordinates, for an eigenvalue `lambda`
    /// of the closed loop.
    ///
    /// Computed as the null vector `q` of the quadratic pencil
    /// `lambda^2 C1⊗M + lambda C3⊗B + C2⊗A_h` (inverse iteration), then
    /// lifted to `W (q, lambda q)`. The pencil never divides by the mass
    /// coefficients, so it stays well scaled even when the first-order
    /// operator has an enormous norm (tiny `mu` with large `xi2`), where
    /// inverse iteration on the first-order operator cannot separate
    /// neighbouring modes.
    pub fn pencil_eigenvector(&self, lambda: C64) -> Result<DVector<C64>> {
        let n = self.nodes();
        let m2 = 2 * n;
        let cplx = |m: DMatrix<f64>| m.map(|x| C64::new(x, 0.0));
        let k1 = cplx(to_dynamic(&self.c1).kronecker(&self.mass));
        let k2 = cplx(to_dynamic(&self.c2).kronecker(&self.stiffness));
        let k3 = cplx(to_dynamic(&self.c3).kronecker(&self.boundary));

        let mut shift = lambda;
        let mut q = None;
        for attempt in 0..4 {
            let pencil = &k1 * (shift * shift) + &k3 * shift + &k2;
            let lu = pencil.lu();
            let mut x = DVector::from_fn(m2, |i, _| C64::new(1.0 + ((i * 7919) % 101) as f64 / 101.0, 0.0));
            let mut ok = true;
            for _ in 0..3 {
                match lu.solve(&x) {
                    Some(next) if next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                        let norm = next.norm();
                        if !(norm > 0.0 && norm.is_finite()) {
                            ok = false;
                            break;
                        }
                        x = next.unscale(norm);
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                q = Some(x);
                break;
            }
            // exactly singular to working precision: nudge the shift
            shift = lambda * (1.0 + 1e-14 * 10f64.powi(attempt));
        }
        let q = q.ok_or_else(|| Error::Singular(format!("pencil at lambda = {lambda}")))?;

        let lk = self.energy.stiff_l.map(|x| C64::new(x, 0.0));
        let lm = self.energy.mass_l.map(|x| C64::new(x, 0.0));
        let mut y = DVector::zeros(2 * m2);
        y.rows_mut(0, m2).copy_from(&lk.tr_mul(&q));
        y.rows_mut(m2, m2).copy_from(&(lm.tr_mul(&q) * lambda));
        let norm = y.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Singular(format!("null eigenvector at lambda = {lambda}")));
        }
        Ok(y.unscale(norm))
    }

    /// Tip velocity `v'_{N+1}` and tip current `p'_{N+1}` of an energy-coordinate state.
    pub fn tip_rates(&self, y: &DVector<f64>) -> (f64, f64) {
        let m2 = 2 * self.nodes();
        let yw = y.rows(m2, m2);
        (self.energy.tip_rows[0].dot(&yw), self.energy.tip_rows[1].dot(&yw))
    }

    /// Instantaneous boundary dissipation `xi1 v'(L)^2 + xi2 p'(L)^2` of an energy-coordinate state.
    pub fn dissipation_rate(&self, y: &DVector<f64>) -> f64 {
        let (vd, pd) = self.tip_rates(y);
        self.xi1 * vd * vd + self.xi2 * pd * pd
    }

    /// Writes `M`, `A_h`, `B` and the first-order operator as dense text matrices into `dir`.
    pub fn dump_matrices(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let items = [
            ("mass.txt", &self.mass),
            ("stiffness.txt", &self.stiffness),
            ("boundary.txt", &self.boundary),
            ("operator.txt", &self.operator),
            ("energy_operator.txt", &self.energy.operator),
        ];
        let mut written = Vec::new();
        for (name, m) in items {
            let path = dir.join(name);
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write_dense_matrix(&mut f, m)?;
            f.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Dense row-major text: a `rows cols` header line, then one line per row.
pub fn write_dense_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Parses the format written by [`write_dense_matrix`].
pub fn read_dense_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Config("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad matrix header '{header}'"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Config(format!("bad matrix header '{header}'")));
    };
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{tok}'")))?);
        }
    }
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, got: values.len() });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Discrete energy `h/2 <(C1 ⊗ M) w, w> + h/2 <(C2 ⊗ A_h) q, q>` with
/// `q = (v, p)` and `w = (v', p')`.
pub fn discrete_energy(sys: &OrfdSystem, s: &StateVector) -> Result<f64> {
    sys.check_dim(s)?;
    let quad = |m: &DMatrix<f64>, a: &[f64], b: &[f64]| -> f64 {
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        a.dot(&(m * b))
    };
    let c1 = &sys.c1;
    let c2 = &sys.c2;
    let kinetic = c1[(0, 0)] * quad(&sys.mass, s.v_dot(), s.v_dot())
        + c1[(1, 1)] * quad(&sys.mass, s.p_dot(), s.p_dot());
    let potential = c2[(0, 0)] * quad(&sys.stiffness, s.v(), s.v())
        + 2.0 * c2[(0, 1)] * quad(&sys.stiffness, s.v(), s.p())
        + c2[(1, 1)] * quad(&sys.stiffness, s.p(), s.p());
    Ok(0.5 * sys.h * (kinetic + potential))
}

/// Midpoint quadrature of `int_0^L (rho v_t x v_x + mu p_t x p_x) dx`,
/// the multiplier functional of the Lyapunov argument.
pub fn discrete_f(sys: &OrfdSystem, s: &StateVector) -> Result<f64> {
    sys.check_dim(s)?;
    let h = sys.h;
    let with_clamp = |x: &[f64]| -> Vec<f64> { std::iter::once(0.0).chain(x.iter().copied()).collect() };
    let (_, dv) = average_and_difference(&with_clamp(s.v()), h)?;
    let (_, dp) = average_and_difference(&with_clamp(s.p()), h)?;
    let (vd_avg, _) = average_and_difference(&with_clamp(s.v_dot()), h)?;
    let (pd_avg, _) = average_and_difference(&with_clamp(s.p_dot()), h)?;
    let p = &sys.params;
    let sum: f64 = (0..dv.len())
        .map(|j| {
            let x = (j as f64 + 0.5) * h;
            x * (p.rho * vd_avg[j] * dv[j] + p.mu * pd_avg[j] * dp[j])
        })
        .sum();
    Ok(h * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn small_params() -> MaterialParams {
        MaterialParams::new(1.0, 2.0, 0.5, 3.0, 0.4, 1.5).unwrap()
    }

    fn rel_max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max() / b.abs().max().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn n2_mass_matrix() {
        let sys = build_system(&MaterialParams::TABLE1, 0.0, 0.0, 2).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 1.0]) / 4.0;
        assert_eq!(sys.mass(), &expected);
        let h = 1.0 / 3.0;
        let stiff = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]) / (h * h);
        assert!(rel_max_diff(sys.stiffness(), &stiff) < 1e-15);
        assert_eq!(sys.boundary()[(2, 2)], 3.0);
        assert_eq!(sys.boundary().iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = MaterialParams::TABLE1;
        assert!(build_system(&p, 1.0, 1.0, 1).is_err());
        assert!(build_system(&p, -1.0, 1.0, 4).is_err());
        assert!(build_system(&p, 1.0, f64::NAN, 4).is_err());
    }

    #[test]
    fn operator_blocks_match_kronecker_form() {
        let p = small_params();
        let sys = build_system(&p, 0.7, 0.3, 5).unwrap();
        let n = sys.nodes();
        let m2 = 2 * n;
        let a = sys.operator();
        assert_eq!(a.view((0, 0), (m2, m2)).abs().max(), 0.0);
        assert_eq!(a.view((0, m2), (m2, m2)).into_owned(), DMatrix::identity(m2, m2));

        // M X = A_h column by column
        let x_stiff = DMatrix::from_fn(n, n, |i, j| -a[(m2 + i, j)] / (p.alpha / p.rho));
        let residual = sys.mass() * &x_stiff - sys.stiffness();
        assert!(residual.abs().max() < 1e-12 * sys.stiffness().abs().max());

        // bottom-right: -(C1^{-1} C3) ⊗ (M^{-1} B), only last column non-zero
        for i in 0..m2 {
            for j in 0..m2 {
                let v = a[(m2 + i, m2 + j)];
                if j != n - 1 && j != m2 - 1 {
                    assert_eq!(v, 0.0);
                }
            }
        }
        // cross-block coupling factor -(C1^{-1} C2)_{12} = gamma beta / rho
        let ratio = a[(m2, n)] / a[(m2, 0)];
        assert_relative_eq!(ratio, -(p.gamma * p.beta) / p.alpha, max_relative = 1e-12);
    }

    #[test]
    fn energy_operator_is_similar() {
        let p = small_params();
        let sys = build_system(&p, 0.7, 0.3, 6).unwrap();
        let n = sys.dim();
        let mut w = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            let y = sys.to_energy_coords(&StateVector::from_vector(e).unwrap()).unwrap();
            w.set_column(j, &y);
        }
        let lhs = &w * sys.operator();
        let rhs = sys.energy_operator() * &w;
        assert!(rel_max_diff(&lhs, &rhs) < 1e-12);

        let at = sys.energy_operator();
        let sym = at + at.transpose();
        // symmetric part is -2 * damping: negative semidefinite, rank <= 2
        let eig = sym.symmetric_eigenvalues();
        assert!(eig.max() <= 1e-12 * at.abs().max());
        assert!(eig.iter().filter(|&&l| l.abs() > 1e-10 * at.abs().max()).count() <= 2);
    }

    #[test]
    fn average_difference_examples() {
        let (a, d) = average_and_difference(&[2.5; 5], 0.1).unwrap();
        assert!(a.iter().all(|&x| x == 2.5) && d.iter().all(|&x| x == 0.0));
        let h = 0.125;
        let ramp: Vec<f64> = (0..9).map(|j| j as f64 * h).collect();
        let (_, d) = average_and_difference(&ramp, h).unwrap();
        assert!(d.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let (a, d) = average_and_difference(&[0.0, 1.0, 0.0], 1.0 / 3.0).unwrap();
        assert_eq!(a, vec![0.5, 0.5]);
        assert_relative_eq!(d[0], 3.0, max_relative = 1e-15);
        assert_relative_eq!(d[1], -3.0, max_relative = 1e-15);
        assert!(average_and_difference(&[1.0], 1.0).is_err());
    }

    #[test]
    fn energy_matches_quadrature_of_operators() {
        let p = small_params();
        let sys = build_system(&p, 0.0, 0.0, 7).unwrap();
        let n = sys.nodes();
        let v: Vec<f64> = (0..n).map(|j| (j as f64 * 0.7).sin()).collect();
        let q: Vec<f64> = (0..n).map(|j| (j as f64 * 0.3).cos()).collect();
        let vd: Vec<f64> = (0..n).map(|j| 0.2 * j as f64).collect();
        let pd: Vec<f64> = (0..n).map(|j| 1.0 - 0.1 * j as f64).collect();
        let s = StateVector::from_parts(&v, &q, &vd, &pd).unwrap();
        let h = sys.h();
        let clamp = |x: &[f64]| -> Vec<f64> { std::iter::once(0.0).chain(x.iter().copied()).collect() };
        let (_, dv) = average_and_difference(&clamp(&v), h).unwrap();
        let (_, dq) = average_and_difference(&clamp(&q), h).unwrap();
        let (av, _) = average_and_difference(&clamp(&vd), h).unwrap();
        let (ap, _) = average_and_difference(&clamp(&pd), h).unwrap();
        let a1 = p.alpha1();
        let mut e = 0.0;
        for j in 0..dv.len() {
            e += p.rho * av[j] * av[j] + p.mu * ap[j] * ap[j];
            e += a1 * dv[j] * dv[j] + p.beta * (p.gamma * dv[j] - dq[j]).powi(2);
        }
        e *= 0.5 * h;
        assert_relative_eq!(discrete_energy(&sys, &s).unwrap(), e, max_relative = 1e-12);
        let y = sys.to_energy_coords(&s).unwrap();
        assert_relative_eq!(0.5 * y.norm_squared(), e, max_relative = 1e-12);
        let back = sys.from_energy_coords(&y).unwrap();
        assert!((back.as_vector() - s.as_vector()).amax() < 1e-12);
    }

    #[test]
    fn energy_is_zero_and_quadratic() {
        let sys = build_system(&small_params(), 0.1, 0.1, 4).unwrap();
        let zero = StateVector::zeros(sys.nodes());
        assert_eq!(discrete_energy(&sys, &zero).unwrap(), 0.0);
        assert_eq!(discrete_f(&sys, &zero).unwrap(), 0.0);
        assert!(discrete_energy(&sys, &StateVector::zeros(3)).is_err());
    }

    #[test]
    fn tip_rates_read_last_node() {
        let sys = build_system(&small_params(), 0.4, 0.9, 5).unwrap();
        let n = sys.nodes();
        let mut vd = vec![0.0; n];
        let mut pd = vec![0.0; n];
        vd[n - 1] = 1.25;
        pd[n - 1] = -0.5;
        vd[2] = 3.0;
        let s = StateVector::from_parts(&vec![0.0; n], &vec![0.0; n], &vd, &pd).unwrap();
        let y = sys.to_energy_coords(&s).unwrap();
        let (a, b) = sys.tip_rates(&y);
        assert_relative_eq!(a, 1.25, max_relative = 1e-12);
        assert_relative_eq!(b, -0.5, max_relative = 1e-12);
        assert_relative_eq!(sys.dissipation_rate(&y), 0.4 * 1.5625 + 0.9 * 0.25, max_relative = 1e-12);
    }

    #[test]
    fn matrix_text_roundtrip() {
        let sys = build_system(&MaterialParams::TABLE1, 1e6, 1e9, 3).unwrap();
        let mut buf = Vec::new();
        write_dense_matrix(&mut buf, sys.operator()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("16 16\n"));
        let back = read_dense_matrix(&text).unwrap();
        assert_eq!(&back, sys.operator());
        let dir = tempfile::tempdir().unwrap();
        let files = sys.dump_matrices(dir.path()).unwrap();
        assert_eq!(files.len(), 5);
    }

    proptest! {
        #[test]
        fn energy_scales_quadratically(seed in proptest::collection::vec(-1.0f64..1.0, 24), lambda in -5.0f64..5.0) {
            let sys = build_system(&small_params(), 0.2, 0.6, 5).unwrap();
            let s = StateVector::from_vector(DVector::from_vec(seed)).unwrap();
            let e = discrete_energy(&sys, &s).unwrap();
            let el = discrete_energy(&sys, &s.scaled(lambda)).unwrap();
            prop_assert!(e >= 0.0);
            prop_assert!((el - lambda * lambda * e).abs() <= 1e-12 * (1.0 + el.abs()));
        }

        #[test]
        fn multiplier_bounded_by_energy(seed in proptest::collection::vec(-1.0f64..1.0, 24)) {
            let p = small_params();
            let sys = build_system(&p, 0.2, 0.6, 5).unwrap();
            let d = crate::material::derive_constants(&p).unwrap();
            let s = StateVector::from_vector(DVector::from_vec(seed)).unwrap();
            let e = discrete_energy(&sys, &s).unwrap();
            let f = discrete_f(&sys, &s).unwrap();
            prop_assert!(f.abs() <= p.length * d.eta * e + 1e-6 * e);
        }
    }
}
