//! Dense real nonsymmetric eigensolver.
//!
//! Pipeline: diagonal balancing (Parlett-Reinsch, radix 2), Householder
//! reduction to upper Hessenberg form with accumulated orthogonal factor,
//! Francis implicit double-shift QR for the eigenvalues, and shifted
//! inverse iteration on the Hessenberg matrix for eigenvectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

const RADIX: f64 = 2.0;
/// QR sweeps allowed per eigenvalue before giving up.
const MAX_SWEEPS: usize = 60;

/// Balances `a` in place: `a <- D^{-1} a D`. Returns the diagonal of `D`.
pub fn balance(a: &mut DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut scale = DVector::from_element(n, 1.0);
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                scale[i] *= f;
                a.row_mut(i).scale_mut(g);
                a.column_mut(i).scale_mut(f);
            }
        }
    }
    scale
}

/// Householder reduction `a = Q H Q^T`. Returns `(H, Q)`.
pub fn hessenberg(mut a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut q = DMatrix::<f64>::identity(n, n);
    if n < 3 {
        return (a, q);
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let alpha_norm = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 > 0.0 { -alpha_norm } else { alpha_norm };
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;

        // left: rows k+1.., all columns k..
        for j in k..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * a[(i, j)]).sum();
            let s = s * beta;
            for i in k + 1..n {
                a[(i, j)] -= s * v[i];
            }
        }
        // right: all rows, columns k+1..
        for i in 0..n {
            let s: f64 = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum();
            let s = s * beta;
            for j in k + 1..n {
                a[(i, j)] -= s * v[j];
            }
        }
        // accumulate Q <- Q H_k
        for i in 0..n {
            let s: f64 = (k + 1..n).map(|j| q[(i, j)] * v[j]).sum();
            let s = s * beta;
            for j in k + 1..n {
                q[(i, j)] -= s * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
    (a, q)
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.
///
/// On failure the error reports how many eigenvalues had deflated.
pub fn hessenberg_eigenvalues(h: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = h.nrows();
    let mut a = h.clone();
    let mut w = vec![C64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(w);
    }
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut found = 0usize;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            // look for a single small subdiagonal element
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                w[nu] = C64::new(x + t, 0.0);
                nn -= 1;
                found += 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut ww = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + ww;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    w[nu - 1] = C64::new(x + z, 0.0);
                    w[nu] = w[nu - 1];
                    if z != 0.0 {
                        w[nu] = C64::new(x - ww / z, 0.0);
                    }
                } else {
                    w[nu] = C64::new(x + p, -z);
                    w[nu - 1] = w[nu].conj();
                }
                nn -= 2;
                found += 2;
                break;
            }
            if its == MAX_SWEEPS {
                return Err(Error::NoConvergence { found, total: n });
            }
            if its > 0 && its.is_multiple_of(10) {
                // exceptional shift
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                ww = -0.4375 * s * s;
            }
            its += 1;

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - ww) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = 0.0;
                if i != m {
                    a[(i + 2, i - 1)] = 0.0;
                }
            }

            // double QR step on rows l..nn and columns m..nn
            let mut xk = 0.0;
            for k in m..nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                    xk = p.abs() + q.abs() + r.abs();
                    if xk != 0.0 {
                        p /= xk;
                        q /= xk;
                        r /= xk;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * xk;
                }
                p += s;
                let xx = p / s;
                let yy = q / s;
                let zz = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k + 1 != nu {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * zz;
                    }
                    a[(k + 1, j)] -= pp * yy;
                    a[(k, j)] -= pp * xx;
                }
                let mmin = if nu < k + 3 { nu } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = xx * a[(i, k)] + yy * a[(i, k + 1)];
                    if k + 1 != nu {
                        pp += zz * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(w)
}

/// Reduced form of a real square matrix, reusable for eigenvalues and
/// eigenvectors.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// Grading permutation: row `i` of the reduced problem is row `perm[i]` of `A`.
    pub perm: Vec<usize>,
    /// Balancing diagonal `D`: `A_bal = D^{-1} P A P^T D`.
    pub scale: DVector<f64>,
    /// Upper Hessenberg `H = Q^T A_bal Q`.
    pub hess: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl Reduction {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let perm = grading_permutation(a);
        let mut bal = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(perm[i], perm[j])]);
        let scale = balance(&mut bal);
        let (hess, q) = hessenberg(bal);
        Ok(Reduction { perm, scale, hess, q })
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        hessenberg_eigenvalues(&self.hess)
    }

    /// Unit eigenvector of the original matrix for the (approximate)
    /// eigenvalue `lambda`, by inverse iteration on `H`.
    pub fn eigenvector(&self, lambda: C64) -> Result<DVector<C64>> {
        let y = hessenberg_inverse_iteration(&self.hess, lambda)?;
        let n = self.hess.nrows();
        let mut x = DVector::from_element(n, C64::new(0.0, 0.0));
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += y[j] * self.q[(i, j)];
            }
            x[self.perm[i]] = acc * self.scale[i];
        }
        let norm = x.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Singular("inverse iteration produced a null vector".into()));
        }
        Ok(x.unscale(norm))
    }
}

/// Symmetric permutation ordering the diagonal by decreasing magnitude
/// (stable, so zero diagonals keep their order).
///
/// A few dominant diagonal entries (heavy damping) placed top-left are never
/// mixed into the rest by the Householder reduction and are barely rotated
/// by the QR sweeps, which keeps the small eigenvalues accurate far below
/// `eps * ||A||`. Anywhere else they smear rounding errors of that size
/// over the whole spectrum.
pub fn grading_permutation(a: &DMatrix<f64>) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..a.nrows()).collect();
    perm.sort_by(|&i, &j| a[(j, j)].abs().total_cmp(&a[(i, i)].abs()));
    perm
}

/// Eigenvalues of a dense real matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    Reduction::new(a)?.eigenvalues()
}

/// Solves `(H - lambda I) x = b` repeatedly for an upper Hessenberg `H`
/// using Gaussian elimination with partial pivoting (O(n^2) per solve).
fn hessenberg_inverse_iteration(h: &DMatrix<f64>, lambda: C64) -> Result<DVector<C64>> {
    let n = h.nrows();
    let hnorm = h.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    // a tiny perturbation keeps the shifted matrix numerically nonsingular
    let shift = lambda + C64::new(hnorm * 1e-14, 0.0);

    let mut lu: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = C64::new(h[(i, j)], 0.0);
                    if i == j {
                        v - shift
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    // elimination only touches the single subdiagonal
    let mut swaps = vec![false; n];
    let mut mult = vec![C64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        if lu[k + 1][k].norm() > lu[k][k].norm() {
            lu.swap(k, k + 1);
            swaps[k] = true;
        }
        let pivot = lu[k][k];
        let pivot = if pivot.norm() == 0.0 { C64::new(hnorm * f64::EPSILON, 0.0) } else { pivot };
        lu[k][k] = pivot;
        let m = lu[k + 1][k] / pivot;
        mult[k] = m;
        lu[k + 1][k] = C64::new(0.0, 0.0);
        if m.norm() != 0.0 {
            let (upper, lower) = lu.split_at_mut(k + 1);
            let row_k = &upper[k];
            let row_k1 = &mut lower[0];
            for j in k + 1..n {
                row_k1[j] -= m * row_k[j];
            }
        }
    }
    if lu[n - 1][n - 1].norm() == 0.0 {
        lu[n - 1][n - 1] = C64::new(hnorm * f64::EPSILON, 0.0);
    }

    let solve = |b: &mut Vec<C64>| {
        for k in 0..n.saturating_sub(1) {
            if swaps[k] {
                b.swap(k, k + 1);
            }
            let bk = b[k];
            b[k + 1] -= mult[k] * bk;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= lu[i][j] * b[j];
            }
            b[i] = acc / lu[i][i];
        }
    };

    // deterministic start vector with no special structure
    let mut b: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + ((i * 7919) % 101) as f64 / 101.0, 0.0))
        .collect();
    for _ in 0..3 {
        solve(&mut b);
        let norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Singular("inverse iteration diverged".into()));
        }
        for z in b.iter_mut() {
            *z /= norm;
        }
    }
    Ok(DVector::from_vec(b))
}

/// `||A x - lambda x|| / ||x||` for a real matrix and complex pair.
pub fn residual(a: &DMatrix<f64>, lambda: C64, x: &DVector<C64>) -> f64 {
    let n = a.nrows();
    let mut r2 = 0.0;
    for i in 0..n {
        let mut acc = -lambda * x[i];
        for j in 0..n {
            acc += x[j] * a[(i, j)];
        }
        r2 += acc.norm_sqr();
    }
    r2.sqrt() / x.norm()
}

/// Full eigendecomposition `A V = V diag(lambda)` of a diagonalizable real matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    /// Unit eigenvectors as columns, conjugate pairs stored as conjugate columns.
    pub vectors: DMatrix<C64>,
}

impl EigenDecomposition {
    /// Eigenvalues from QR, eigenvectors by inverse iteration on the Hessenberg form.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let red = Reduction::new(a)?;
        let values = red.eigenvalues()?;
        Self::assemble(values, a.nrows(), |lambda| red.eigenvector(lambda))
    }

    /// Eigenvalues from QR, eigenvectors from a caller-supplied routine
    /// (for matrices with extra structure that gives better-conditioned vectors).
    pub fn with_vectors<F>(a: &DMatrix<f64>, eigenvector: F) -> Result<Self>
    where
        F: Fn(C64) -> Result<DVector<C64>>,
    {
        let values = eigenvalues(a)?;
        Self::assemble(values, a.nrows(), eigenvector)
    }

    fn assemble<F>(mut values: Vec<C64>, n: usize, eigenvector: F) -> Result<Self>
    where
        F: Fn(C64) -> Result<DVector<C64>>,
    {
        // order: conjugate pairs adjacent, positive imaginary part first
        values.sort_by(|x, y| {
            x.re.partial_cmp(&y.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(y.im.abs().partial_cmp(&x.im.abs()).unwrap_or(std::cmp::Ordering::Equal))
                .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        let mut vectors = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        let mut k = 0;
        while k < n {
            let lambda = values[k];
            let x = eigenvector(lambda)?;
            if lambda.im != 0.0 && k + 1 < n && (values[k + 1] - lambda.conj()).norm() <= 1e-12 * lambda.norm().max(1.0) {
                // enforce exact conjugate pairing
                let lambda = C64::new(lambda.re, lambda.im.abs());
                let x = if values[k].im < 0.0 { x.map(|z| z.conj()) } else { x };
                values[k] = lambda;
                values[k + 1] = lambda.conj();
                vectors.set_column(k, &x);
                vectors.set_column(k + 1, &x.map(|z| z.conj()));
                k += 2;
            } else {
                vectors.set_column(k, &x);
                k += 1;
            }
        }
        Ok(EigenDecomposition { values, vectors })
    }

    /// 2-norm condition estimate of the eigenvector matrix via its singular values.
    pub fn condition(&self) -> f64 {
        let sv = self.vectors.clone().svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Largest-magnitude eigenvalue estimate by power iteration on `A^T A`
/// (an upper bound `||A||_2` for the spectral radius).
pub fn spectral_radius_bound(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut x = DVector::from_fn(n, |i, _| 1.0 + (i % 13) as f64 / 13.0);
    x.normalize_mut();
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let y = a * &x;
        let z = a.tr_mul(&y);
        let nz = z.norm();
        if nz == 0.0 {
            return 0.0;
        }
        est = nz.sqrt();
        x = z / nz;
    }
    est
}
