//! Eigenvalues of symmetric matrices.
//!
//! Householder reduction to tridiagonal form followed by the implicit-shift
//! QL iteration, eigenvalues only. Plenty for condition numbers at the
//! matrix sizes this crate works with.

use crate::error::{Error, Result};
use crate::mat::Mat;

const MAX_QL_ITERATIONS: usize = 50;

/// All eigenvalues of a symmetric matrix, in no particular order.
pub fn symmetric_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let (mut d, mut e) = householder_tridiagonalize(a);
    ql_implicit_shift(&mut d, &mut e)?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConditioningFailure(
            "non-finite eigenvalue".to_string(),
        ));
    }
    Ok(d)
}

/// Reduce to tridiagonal form; returns (diagonal, subdiagonal) with the
/// subdiagonal in e[1..].
fn householder_tridiagonalize(a: &Mat) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut w = a.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| w[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = w[(i, l)];
            } else {
                for k in 0..=l {
                    let v = w[(i, k)] / scale;
                    w[(i, k)] = v;
                    h += v * v;
                }
                let f = w[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                w[(i, l)] = f - g;

                let mut f_acc = 0.0;
                for j in 0..=l {
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += w[(j, k)] * w[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g_acc += w[(k, j)] * w[(i, k)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * w[(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let fj = w[(i, j)];
                    let gj = e[j] - hh * fj;
                    e[j] = gj;
                    for k in 0..=j {
                        let delta = fj * e[k] + gj * w[(i, k)];
                        w[(j, k)] -= delta;
                    }
                }
            }
        } else {
            e[i] = w[(i, l)];
        }
        d[i] = h;
    }

    for i in 0..n {
        d[i] = w[(i, i)];
    }
    e[0] = 0.0;
    (d, e)
}

/// Implicit-shift QL on a tridiagonal matrix; eigenvalues land in `d`.
fn ql_implicit_shift(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return Err(Error::ConditioningFailure(format!(
                    "QL iteration did not converge within {MAX_QL_ITERATIONS} sweeps"
                )));
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / denom;

            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
