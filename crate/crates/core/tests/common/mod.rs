//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix2};
use piezobeam::orfd::OrfdSystem;
use piezobeam::C64;

/// Quadratic matrix polynomial `P(lambda) = K0 + lambda K1 + lambda^2 K2`
/// of the closed loop, built from the system's assembled blocks:
/// `K2 = C1⊗M`, `K1 = C3⊗B`, `K0 = C2⊗A_h`.
pub fn pencil(sys: &OrfdSystem) -> [DMatrix<f64>; 3] {
    let small = |m: &Matrix2<f64>| DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    [
        small(sys.c2()).kronecker(sys.stiffness()),
        small(sys.c3()).kronecker(sys.boundary()),
        small(sys.c1()).kronecker(sys.mass()),
    ]
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients (lowest degree first) of `det P(lambda)` by the Leibniz
/// formula over polynomial entries. Only sums of products of the physical
/// entries appear, so no coefficient is formed by cancellation between
/// powers of a large operator. Exponential cost: small matrices only.
pub fn pencil_determinant(k: &[DMatrix<f64>; 3]) -> Vec<f64> {
    let n = k[0].nrows();
    let entry = |i: usize, j: usize| [k[0][(i, j)], k[1][(i, j)], k[2][(i, j)]];
    let mut total = vec![0.0; 2 * n + 1];
    let mut perm: Vec<usize> = (0..n).collect();
    // Heap's algorithm; each swap flips the sign
    let mut counters = vec![0usize; n];
    let mut sign = 1.0;
    let mut add = |perm: &[usize], sign: f64| {
        let mut term = vec![sign];
        for (i, &j) in perm.iter().enumerate() {
            let e = entry(i, j);
            if e == [0.0; 3] {
                return;
            }
            term = poly_mul(&term, &e);
        }
        for (t, x) in total.iter_mut().zip(term) {
            *t += x;
        }
    };
    add(&perm, sign);
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            let swap = if i % 2 == 0 { 0 } else { counters[i] };
            perm.swap(swap, i);
            sign = -sign;
            add(&perm, sign);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    total
}

/// Closed-loop eigenvalues of a small system, independent of any QR code:
/// roots of `det P(lambda)`, polished by Newton's method on the determinant
/// itself, `lambda <- lambda - 1 / tr(P^{-1} P')`.
pub fn pencil_eigenvalues(sys: &OrfdSystem) -> Vec<C64> {
    let k = pencil(sys);
    let mut coeffs = pencil_determinant(&k);
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    let lead = *coeffs.last().unwrap();
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let cplx = |m: &DMatrix<f64>| m.map(|x| C64::new(x, 0.0));
    let kc = [cplx(&k[0]), cplx(&k[1]), cplx(&k[2])];
    polynomial_roots(&monic)
        .into_iter()
        .map(|mut z| {
            for _ in 0..20 {
                let p = &kc[0] + &kc[1] * z + &kc[2] * (z * z);
                let dp = &kc[1] + &kc[2] * (z * 2.0);
                let Some(inv) = p.try_inverse() else { break };
                let step = C64::new(1.0, 0.0) / (inv * dp).trace();
                if !(step.re.is_finite() && step.im.is_finite()) {
                    break;
                }
                z -= step;
                if step.norm() <= 1e-15 * z.norm() {
                    break;
                }
            }
            z
        })
        .collect()
}

fn horner(c: &[f64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &coef in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + coef;
    }
    (p, dp)
}

/// All roots of a monic real polynomial by Aberth-Ehrlich iteration
/// followed by Newton polishing.
///
/// The variable is rescaled by the geometric mean of the root moduli first,
/// so that coefficients spanning hundreds of decades stay representable.
pub fn polynomial_roots(c: &[f64]) -> Vec<C64> {
    let n = c.len() - 1;
    let lowest = c.iter().position(|&x| x != 0.0).unwrap_or(n);
    let scale = if lowest < n { (c[lowest].abs().ln() / (n - lowest) as f64).exp() } else { 1.0 };
    // c_k s^k / s^n, with powers of s accumulated in the log domain
    let scaled: Vec<f64> =
        c.iter().enumerate().map(|(k, &x)| if x == 0.0 { 0.0 } else { x * scale.powf(k as f64 - n as f64) }).collect();
    let scaled: Vec<f64> = if scaled.iter().all(|x| x.is_finite()) {
        scaled
    } else {
        c.iter()
            .enumerate()
            .map(|(k, &x)| {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum() * (x.abs().ln() + (k as f64 - n as f64) * scale.ln()).exp()
                }
            })
            .collect()
    };
    unit_scale_roots(&scaled).into_iter().map(|w| w * scale).collect()
}

/// Initial guesses on the circles of the Newton polygon of `c`: the upper
/// convex hull of `(k, ln|c_k|)` gives one radius per segment, carrying as
/// many roots as the segment is wide.
fn newton_polygon_guesses(c: &[f64]) -> Vec<C64> {
    let pts: Vec<(usize, f64)> =
        c.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(k, x)| (k, x.abs().ln())).collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) as f64 * (pt.1 - a.1) - (pt.0 - a.0) as f64 * (b.1 - a.1);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut guesses = Vec::new();
    // zero roots from vanishing low-order coefficients
    guesses.extend((0..pts[0].0).map(|_| C64::new(0.0, 0.0)));
    for w in hull.windows(2) {
        let count = w[1].0 - w[0].0;
        let radius = ((w[0].1 - w[1].1) / count as f64).exp();
        for m in 0..count {
            let angle = 2.0 * std::f64::consts::PI * (m as f64 + 0.25) / count as f64 + 0.4 * guesses.len() as f64;
            guesses.push(C64::from_polar(radius, angle));
        }
    }
    guesses
}

/// `a / b` without forming `|b|^2`.
fn safe_div(a: C64, b: C64) -> C64 {
    let s = b.norm();
    (a / s) / (b / s)
}

fn unit_scale_roots(c: &[f64]) -> Vec<C64> {
    let n = c.len() - 1;
    let mut z = newton_polygon_guesses(c);
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, dp) = horner(c, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = safe_div(p, dp);
            let repulsion: C64 =
                (0..n).filter(|&j| j != i).map(|j| safe_div(C64::new(1.0, 0.0), z[i] - z[j])).sum();
            let step = safe_div(ratio, C64::new(1.0, 0.0) - ratio * repulsion);
            z[i] -= step;
            moved = moved.max(step.norm() / z[i].norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..5 {
            let (p, dp) = horner(c, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            *zi -= safe_div(p, dp);
        }
    }
    z
}

/// Largest relative distance from each `computed` value to its nearest oracle root.
pub fn max_relative_mismatch(computed: &[C64], oracle: &[C64]) -> f64 {
    computed
        .iter()
        .map(|z| {
            let nearest = oracle.iter().map(|r| (r - z).norm()).fold(f64::INFINITY, f64::min);
            nearest / z.norm().max(1.0)
        })
        .fold(0.0, f64::max)
}
