//! Rank-k inverse update kernels and the instrumented SPD inversion.
//!
//! Three interchangeable routes compute `(M + XᵀX)⁻¹` given a k×s design
//! matrix `X`:
//!
//! * [`di_update`] — rebuild `M + XᵀX` and invert it by Cholesky;
//! * [`ism_update`] — apply the rank-1 Sherman-Morrison correction k times;
//! * [`wmi_update`] — one Woodbury correction through a k×k inner solve.
//!
//! Every kernel carries a [`FlopLedger`] and accounts each scalar add,
//! multiply, divide, and square root it performs, so the closed-form cost
//! formulas in [`crate::costmodel`] can be checked against reality:
//!
//! * ISM: exactly `4ks² + 2ks`;
//! * WMI: exactly `4ks² + (4k² − 2k)s` plus the inner k×k inversion;
//! * DI: exactly `2ks²` plus the s×s inversion.
//!
//! The kernels never exploit symmetry to halve products (the single
//! matrix-vector product per Sherman-Morrison step is the one symmetry
//! shortcut taken, and the division is applied to the length-s vector
//! rather than the s×s outer product). Loops are laid out for contiguous
//! row access so that measured times track the counted work.

use crate::costmodel;
use crate::error::{Error, Result};
use crate::mat::{assign_scaled, axpy, dot, Mat};

/// Guard threshold for a vanishing Sherman-Morrison denominator. For a true
/// SPD inverse the denominator is strictly greater than 1; the guard only
/// trips on corrupted input.
const SM_DENOMINATOR_GUARD: f64 = 1e-12;

/// Row-block width for the batched kernels. Keeps a block of update rows
/// hot in cache so the big accumulators stream through memory once per
/// block instead of once per row. Pure loop tiling: per-entry accumulation
/// order and operation counts are unchanged.
const ROW_BLOCK: usize = 32;

/// Counter of scalar floating-point operations. One add, multiply, divide,
/// or square root each count 1.
#[derive(Clone, Debug, Default)]
pub struct FlopLedger {
    count: u64,
}

impl FlopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    #[inline]
    pub fn add(&mut self, flops: u64) {
        self.count += flops;
    }
}

/// Strategy for correcting the inverse after a rank-k update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UpdateMethod {
    /// Direct inversion of the updated matrix.
    Di,
    /// Iterative Sherman-Morrison, one rank-1 step per row.
    Ism,
    /// Woodbury matrix identity with a k×k inner inversion.
    Wmi,
    /// Resolve to one of the above via [`select_method`] before executing.
    Auto,
}

impl UpdateMethod {
    pub fn label(self) -> &'static str {
        match self {
            UpdateMethod::Di => "DI",
            UpdateMethod::Ism => "ISM",
            UpdateMethod::Wmi => "WMI",
            UpdateMethod::Auto => "AUTO",
        }
    }
}

impl std::fmt::Display for UpdateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for UpdateMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "di" => Ok(UpdateMethod::Di),
            "ism" => Ok(UpdateMethod::Ism),
            "wmi" => Ok(UpdateMethod::Wmi),
            "auto" => Ok(UpdateMethod::Auto),
            other => Err(Error::InvalidInput(format!("unknown method: {other}"))),
        }
    }
}

/// How [`select_method`] picks a concrete method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SelectionRule {
    /// Measured rule: ISM for k = 1, WMI for 2 ≤ k ≤ ⌊s/3⌋, DI beyond.
    Experimental,
    /// Argmin of the closed-form flop formulas.
    Theoretical,
}

/// Pick the cheapest update method for an s×s matrix and rank-k update.
pub fn select_method(s: usize, k: usize, rule: SelectionRule) -> UpdateMethod {
    assert!(s >= 1 && k >= 1, "select_method requires s >= 1 and k >= 1");
    match rule {
        SelectionRule::Experimental => {
            if k == 1 {
                UpdateMethod::Ism
            } else if k <= s / 3 {
                UpdateMethod::Wmi
            } else {
                UpdateMethod::Di
            }
        }
        SelectionRule::Theoretical => costmodel::theoretical_best(s, k),
    }
}

/// Invert a symmetric positive definite matrix via Cholesky factorization.
///
/// Factors A = L·Lᵀ, inverts the triangle, and forms A⁻¹ = L⁻ᵀ·L⁻¹
/// explicitly (every caller needs the full inverse). The caller guarantees
/// symmetry; a non-positive pivot is reported with its index.
///
/// The total operation count is value-independent; see
/// [`spd_invert_flop_count`].
pub fn spd_invert(a: &Mat, ledger: &mut FlopLedger) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    let s = a.rows();

    // Cholesky factor, lower triangular, row-major.
    let mut l = vec![0.0f64; s * s];
    for j in 0..s {
        let dot_cost = if j > 0 { 2 * j as u64 } else { 0 };
        let pivot = a[(j, j)] - dot(&l[j * s..j * s + j], &l[j * s..j * s + j]);
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = pivot.sqrt();
        l[j * s + j] = ljj;
        for i in (j + 1)..s {
            let t = a[(i, j)] - dot(&l[i * s..i * s + j], &l[j * s..j * s + j]);
            l[i * s + j] = t / ljj;
        }
        // diag: dot + subtract + sqrt; each off-diagonal: dot + subtract + divide
        ledger.add((s - j) as u64 * (dot_cost + 1));
    }

    // Rows of `tinv` hold the columns of L⁻¹, so the forward substitution
    // and the final product both run over contiguous slices. Columns are
    // independent given L, so they are tiled: each block of columns is
    // filled while a row of L streams through once per block.
    let mut tinv = vec![0.0f64; s * s];
    for j in 0..s {
        tinv[j * s + j] = 1.0 / l[j * s + j];
        ledger.add(1);
    }
    for j0 in (0..s).step_by(ROW_BLOCK) {
        let j1 = (j0 + ROW_BLOCK).min(s);
        for i in (j0 + 1)..s {
            for j in j0..j1.min(i) {
                let m = i - j;
                let sum = dot(&l[i * s + j..i * s + i], &tinv[j * s + j..j * s + i]);
                tinv[j * s + i] = -(sum / l[i * s + i]);
                ledger.add(2 * m as u64);
            }
        }
    }

    // A⁻¹ = (L⁻¹)ᵀ·L⁻¹; fill the upper triangle and mirror. Row blocks of
    // the triangle inverse stay hot while the partner rows stream by.
    let mut inv = Mat::zeros(s, s);
    for i0 in (0..s).step_by(ROW_BLOCK) {
        let i1 = (i0 + ROW_BLOCK).min(s);
        for j in i0..s {
            for i in i0..i1.min(j + 1) {
                let v = dot(&tinv[i * s + j..(i + 1) * s], &tinv[j * s + j..(j + 1) * s]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
                ledger.add(2 * (s - j) as u64 - 1);
            }
        }
    }

    Ok(inv)
}

/// Exact operation count of [`spd_invert`] for an s×s input.
pub fn spd_invert_flop_count(s: usize) -> u64 {
    let s = s as u64;
    let mut total = 0u64;
    for j in 0..s {
        let dot_cost = if j > 0 { 2 * j } else { 0 };
        total += (s - j) * (dot_cost + 1); // factorization column j
        total += 1 + (s - 1 - j) * (s - j); // triangle inversion column j
    }
    for i in 0..s {
        total += (s - i) * (s - i); // Σ_{j≥i} 2(s−j)−1
    }
    total
}

fn check_update_shapes(m: &Mat, x: &Mat) -> Result<(usize, usize)> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch {
            expected: m.rows(),
            got: m.cols(),
        });
    }
    if x.cols() != m.rows() {
        return Err(Error::ShapeMismatch {
            expected: m.rows(),
            got: x.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok((m.rows(), x.rows()))
}

/// Direct inversion: form `M + XᵀX` and invert it.
///
/// Ledger delta: `2ks²` for the update plus the [`spd_invert`] count.
pub fn di_update(m_raw: &Mat, x: &Mat, ledger: &mut FlopLedger) -> Result<Mat> {
    let (s, k) = check_update_shapes(m_raw, x)?;

    // XᵀX accumulated over blocks of update rows; for each output row the
    // contributions still arrive in row order 0..k.
    let mut updated = Mat::zeros(s, s);
    let row0 = x.row(0);
    for i in 0..s {
        assign_scaled(updated.row_mut(i), row0[i], row0);
    }
    for l0 in (1..k).step_by(ROW_BLOCK) {
        let l1 = (l0 + ROW_BLOCK).min(k);
        for i in 0..s {
            let out = updated.row_mut(i);
            for l in l0..l1 {
                let row = x.row(l);
                axpy(out, row[i], row);
            }
        }
    }
    for i in 0..s {
        let out = updated.row_mut(i);
        for (o, &m) in out.iter_mut().zip(m_raw.row(i)) {
            *o += m;
        }
    }
    // XᵀX costs s²(2k−1), the term-by-term addition of M costs s².
    ledger.add((s * s) as u64 * (2 * k as u64 - 1) + (s * s) as u64);

    spd_invert(&updated, ledger)
}

/// Iterative Sherman-Morrison: k sequential rank-1 corrections of `M⁻¹`,
/// one per row of `X`, in row order.
///
/// Ledger delta: exactly `4ks² + 2ks`.
pub fn ism_update(m_inv: &Mat, x: &Mat, ledger: &mut FlopLedger) -> Result<Mat> {
    let (s, k) = check_update_shapes(m_inv, x)?;

    let mut out = Mat::zeros(s, s);
    let mut l = vec![0.0f64; s];
    let mut ld = vec![0.0f64; s];
    for step in 0..k {
        let v = x.row(step);
        let src: &Mat = if step == 0 { m_inv } else { &out };

        // M·v = Σ_j v_j·(row j of M) since M is symmetric; the accumulator
        // stays in cache while M streams through once. 2s² − s as for the
        // row-by-row form.
        assign_scaled(&mut l, v[0], src.row(0));
        for (j, &vj) in v.iter().enumerate().skip(1) {
            axpy(&mut l, vj, src.row(j));
        }
        let d = 1.0 + dot(v, &l); // 2s
        if d.abs() <= SM_DENOMINATOR_GUARD {
            return Err(Error::SingularUpdate { step });
        }
        let inv_d = 1.0 / d;
        for (o, &li) in ld.iter_mut().zip(&l) {
            *o = li * inv_d; // s: division applied to the vector, not the matrix
        }

        if step == 0 {
            for i in 0..s {
                let ldi = ld[i];
                let src_row = m_inv.row(i);
                let out_row = out.row_mut(i);
                for ((o, &m), &lj) in out_row.iter_mut().zip(src_row).zip(&l) {
                    *o = m - ldi * lj; // 2s²
                }
            }
        } else {
            for i in 0..s {
                let ldi = ld[i];
                let out_row = out.row_mut(i);
                for (o, &lj) in out_row.iter_mut().zip(&l) {
                    *o -= ldi * lj;
                }
            }
        }
        ledger.add(4 * (s as u64) * (s as u64) + 2 * s as u64);
    }
    Ok(out)
}

/// Woodbury identity: `M⁻¹ − Rᵀ·(I + R·Xᵀ)⁻¹·R` with `R = X·M⁻¹`.
///
/// Ledger delta: exactly `4ks² + (4k² − 2k)s` plus the inner k×k
/// [`spd_invert`] count.
pub fn wmi_update(m_inv: &Mat, x: &Mat, ledger: &mut FlopLedger) -> Result<Mat> {
    let (s, k) = check_update_shapes(m_inv, x)?;
    let (su, ku) = (s as u64, k as u64);

    // R = X·M⁻¹, blocks of R rows accumulated while M⁻¹ streams through
    // once per block.
    let mut r = Mat::zeros(k, s);
    for l0 in (0..k).step_by(ROW_BLOCK) {
        let l1 = (l0 + ROW_BLOCK).min(k);
        for ii in 0..s {
            let m_row = m_inv.row(ii);
            for l in l0..l1 {
                let a = x[(l, ii)];
                if ii == 0 {
                    assign_scaled(r.row_mut(l), a, m_row);
                } else {
                    axpy(r.row_mut(l), a, m_row);
                }
            }
        }
    }
    ledger.add(ku * su * (2 * su - 1)); // 2ks² − ks

    // S = I + R·Xᵀ; the identity add is a real operation on every entry.
    let mut s_mat = Mat::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let eye = if a == b { 1.0 } else { 0.0 };
            s_mat[(a, b)] = eye + dot(r.row(a), x.row(b));
        }
    }
    ledger.add(ku * ku * (2 * su - 1) + ku * ku); // 2k²s

    let s_inv = spd_invert(&s_mat, ledger)?;

    // Q = Rᵀ·S⁻¹. R is transposed once (no arithmetic) so both operands of
    // each inner product are contiguous; S⁻¹ is symmetric so its rows serve
    // as its columns.
    let rt = r.transpose();
    let mut q = Mat::zeros(s, k);
    for i in 0..s {
        let rrow = rt.row(i);
        let qrow = q.row_mut(i);
        for (b, slot) in qrow.iter_mut().enumerate() {
            *slot = dot(rrow, s_inv.row(b));
        }
    }
    ledger.add(su * ku * (2 * ku - 1)); // 2k²s − ks

    // M⁻¹ − Q·R. Both shapes accumulate each entry over a = 0..k in order,
    // so they compute identical values; they differ only in which operand
    // streams. While R fits in cache the product is built one output row
    // at a time and subtracted in the same pass; for large R the output is
    // accumulated over blocks of R rows and the subtraction runs last.
    let mut out = Mat::zeros(s, s);
    if k * s <= 262_144 {
        let mut acc = vec![0.0f64; s];
        for i in 0..s {
            let qrow = q.row(i);
            assign_scaled(&mut acc, qrow[0], r.row(0));
            for a in 1..k {
                axpy(&mut acc, qrow[a], r.row(a));
            }
            let out_row = out.row_mut(i);
            for ((o, &m), &p) in out_row.iter_mut().zip(m_inv.row(i)).zip(&acc) {
                *o = m - p;
            }
        }
    } else {
        let row0 = r.row(0);
        for i in 0..s {
            assign_scaled(out.row_mut(i), q[(i, 0)], row0);
        }
        for a0 in (1..k).step_by(ROW_BLOCK) {
            let a1 = (a0 + ROW_BLOCK).min(k);
            for i in 0..s {
                let out_row = out.row_mut(i);
                let qrow = q.row(i);
                for a in a0..a1 {
                    axpy(out_row, qrow[a], r.row(a));
                }
            }
        }
        for i in 0..s {
            let out_row = out.row_mut(i);
            for (o, &m) in out_row.iter_mut().zip(m_inv.row(i)) {
                *o = m - *o;
            }
        }
    }
    ledger.add(su * su * (2 * ku - 1) + su * su); // 2ks²

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent inversion oracle: Gauss-Jordan with partial pivoting.
    /// Deliberately a different algorithm from the Cholesky path.
    fn gauss_jordan_invert(a: &Mat) -> Mat {
        let n = a.rows();
        let mut work = a.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| {
                    work[(i, col)]
                        .abs()
                        .partial_cmp(&work[(j, col)].abs())
                        .unwrap()
                })
                .unwrap();
            if pivot_row != col {
                for j in 0..n {
                    let tmp = work[(col, j)];
                    work[(col, j)] = work[(pivot_row, j)];
                    work[(pivot_row, j)] = tmp;
                    let tmp = inv[(col, j)];
                    inv[(col, j)] = inv[(pivot_row, j)];
                    inv[(pivot_row, j)] = tmp;
                }
            }
            let p = work[(col, col)];
            assert!(p.abs() > 1e-14, "oracle: singular matrix");
            for j in 0..n {
                work[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = work[(i, col)];
                for j in 0..n {
                    work[(i, j)] -= f * work[(col, j)];
                    inv[(i, j)] -= f * inv[(col, j)];
                }
            }
        }
        inv
    }

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut state = seed;
        let data = (0..rows * cols)
            .map(|_| 2.0 * splitmix(&mut state) - 1.0)
            .collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    /// Well-conditioned random SPD matrix: BᵀB/s + I.
    fn random_spd(s: usize, seed: u64) -> Mat {
        let b = random_mat(s, s, seed);
        let mut g = b.transpose().mul(&b);
        g.scale(1.0 / s as f64);
        g.add_diagonal(1.0);
        g
    }

    #[test]
    fn spd_invert_scaled_identity() {
        let a = Mat::identity(3).scaled(2.0);
        let inv = spd_invert(&a, &mut FlopLedger::new()).unwrap();
        assert!(inv.rel_frobenius_distance(&Mat::identity(3).scaled(0.5)) < 1e-15);
    }

    #[test]
    fn spd_invert_2x2_closed_form() {
        let a = Mat::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let inv = spd_invert(&a, &mut FlopLedger::new()).unwrap();
        let expected =
            Mat::from_rows(&[vec![3.0 / 8.0, -2.0 / 8.0], vec![-2.0 / 8.0, 4.0 / 8.0]]).unwrap();
        assert!(inv.rel_frobenius_distance(&expected) < 1e-15);
    }

    #[test]
    fn spd_invert_reports_failing_pivot() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match spd_invert(&a, &mut FlopLedger::new()) {
            Err(Error::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn spd_invert_ledger_matches_closed_count() {
        for (s, seed) in [(1usize, 1u64), (2, 2), (5, 3), (17, 4), (64, 5)] {
            let a = random_spd(s, seed);
            let mut ledger = FlopLedger::new();
            spd_invert(&a, &mut ledger).unwrap();
            assert_eq!(ledger.count(), spd_invert_flop_count(s), "s={s}");
        }
    }

    #[test]
    fn inversion_constant_stays_near_cubic() {
        for s in [100usize, 200, 400] {
            let c = spd_invert_flop_count(s) as f64 / (s as f64).powi(3);
            assert!((0.5..=1.2).contains(&c), "c_inv({s}) = {c}");
        }
    }

    #[test]
    fn di_update_scalar_case() {
        let m = Mat::from_rows(&[vec![2.0]]).unwrap();
        let x = Mat::from_rows(&[vec![1.0]]).unwrap();
        let out = di_update(&m, &x, &mut FlopLedger::new()).unwrap();
        assert_relative_eq!(out[(0, 0)], 1.0 / 3.0);
    }

    #[test]
    fn di_update_matches_refit_oracle() {
        let s = 5;
        let m = random_spd(s, 11);
        let x = random_mat(3, s, 12);
        let out = di_update(&m, &x, &mut FlopLedger::new()).unwrap();
        let expected = {
            let mut updated = m.clone();
            let gram = x.transpose().mul(&x);
            for i in 0..s {
                for j in 0..s {
                    updated[(i, j)] += gram[(i, j)];
                }
            }
            gauss_jordan_invert(&updated)
        };
        assert!(out.rel_frobenius_distance(&expected) < 1e-10);
    }

    #[test]
    fn di_update_ledger_identity() {
        for (s, k) in [(1usize, 1usize), (7, 2), (12, 5), (9, 9)] {
            let m = random_spd(s, 21);
            let x = random_mat(k, s, 22);
            let mut ledger = FlopLedger::new();
            di_update(&m, &x, &mut ledger).unwrap();
            let expected = 2 * (k as u64) * (s as u64) * (s as u64) + spd_invert_flop_count(s);
            assert_eq!(ledger.count(), expected, "s={s} k={k}");
        }
    }

    #[test]
    fn ism_update_scalar_case() {
        let m_inv = Mat::from_rows(&[vec![0.5]]).unwrap();
        let x = Mat::from_rows(&[vec![1.0]]).unwrap();
        let out = ism_update(&m_inv, &x, &mut FlopLedger::new()).unwrap();
        assert_relative_eq!(out[(0, 0)], 1.0 / 3.0);
    }

    #[test]
    fn ism_update_matches_di() {
        let s = 4;
        let m = random_spd(s, 31);
        let m_inv = spd_invert(&m, &mut FlopLedger::new()).unwrap();
        let x = random_mat(2, s, 32);
        let by_ism = ism_update(&m_inv, &x, &mut FlopLedger::new()).unwrap();
        let by_di = di_update(&m, &x, &mut FlopLedger::new()).unwrap();
        assert!(by_ism.rel_frobenius_distance(&by_di) < 1e-10);
    }

    #[test]
    fn ism_ledger_is_exact() {
        let (s, k) = (10usize, 3usize);
        let m_inv = spd_invert(&random_spd(s, 41), &mut FlopLedger::new()).unwrap();
        let x = random_mat(k, s, 42);
        let mut ledger = FlopLedger::new();
        ism_update(&m_inv, &x, &mut ledger).unwrap();
        assert_eq!(ledger.count(), 1260); // 4·3·100 + 2·3·10
    }

    #[test]
    fn ism_guards_vanishing_denominator() {
        // −I is not an SPD inverse; the first step gives d = 1 − vᵀv = 0.
        let m_inv = Mat::from_rows(&[vec![-1.0]]).unwrap();
        let x = Mat::from_rows(&[vec![1.0]]).unwrap();
        match ism_update(&m_inv, &x, &mut FlopLedger::new()) {
            Err(Error::SingularUpdate { step }) => assert_eq!(step, 0),
            other => panic!("expected singular update, got {other:?}"),
        }
    }

    #[test]
    fn wmi_rank1_reduces_to_sherman_morrison() {
        let s = 6;
        let m_inv = spd_invert(&random_spd(s, 51), &mut FlopLedger::new()).unwrap();
        let x = random_mat(1, s, 52);
        let by_wmi = wmi_update(&m_inv, &x, &mut FlopLedger::new()).unwrap();
        let by_ism = ism_update(&m_inv, &x, &mut FlopLedger::new()).unwrap();
        assert!(by_wmi.rel_frobenius_distance(&by_ism) < 1e-12);
    }

    #[test]
    fn wmi_update_matches_di() {
        let s = 6;
        let m = random_spd(s, 61);
        let m_inv = spd_invert(&m, &mut FlopLedger::new()).unwrap();
        let x = random_mat(4, s, 62);
        let by_wmi = wmi_update(&m_inv, &x, &mut FlopLedger::new()).unwrap();
        let by_di = di_update(&m, &x, &mut FlopLedger::new()).unwrap();
        assert!(by_wmi.rel_frobenius_distance(&by_di) < 1e-10);
    }

    #[test]
    fn wmi_ledger_identity() {
        for (s, k) in [(6usize, 1usize), (10, 3), (12, 7)] {
            let m_inv = spd_invert(&random_spd(s, 71), &mut FlopLedger::new()).unwrap();
            let x = random_mat(k, s, 72);
            let mut ledger = FlopLedger::new();
            wmi_update(&m_inv, &x, &mut ledger).unwrap();
            let (su, ku) = (s as u64, k as u64);
            let expected = 4 * ku * su * su + (4 * ku * ku - 2 * ku) * su + spd_invert_flop_count(k);
            assert_eq!(ledger.count(), expected, "s={s} k={k}");
        }
    }

    #[test]
    fn updates_preserve_symmetry() {
        let s = 9;
        let m = random_spd(s, 81);
        let m_inv = spd_invert(&m, &mut FlopLedger::new()).unwrap();
        let x = random_mat(3, s, 82);
        for out in [
            di_update(&m, &x, &mut FlopLedger::new()).unwrap(),
            ism_update(&m_inv, &x, &mut FlopLedger::new()).unwrap(),
            wmi_update(&m_inv, &x, &mut FlopLedger::new()).unwrap(),
        ] {
            assert!(out.symmetry_gap() < 1e-9);
        }
    }

    #[test]
    fn experimental_rule_examples() {
        assert_eq!(
            select_method(1287, 1, SelectionRule::Experimental),
            UpdateMethod::Ism
        );
        assert_eq!(
            select_method(1287, 300, SelectionRule::Experimental),
            UpdateMethod::Wmi
        );
        assert_eq!(
            select_method(1287, 500, SelectionRule::Experimental),
            UpdateMethod::Di
        );
        assert_eq!(
            select_method(10, 1, SelectionRule::Experimental),
            UpdateMethod::Ism
        );
        // boundary: k = ⌊s/3⌋ is still WMI, one past it is DI
        assert_eq!(
            select_method(1287, 429, SelectionRule::Experimental),
            UpdateMethod::Wmi
        );
        assert_eq!(
            select_method(1287, 430, SelectionRule::Experimental),
            UpdateMethod::Di
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn routes_agree_on_well_conditioned_inputs(
            s in 2usize..=12,
            k in 1usize..=6,
            seed in 0u64..1 << 48,
        ) {
            let m = random_spd(s, seed);
            let m_inv = spd_invert(&m, &mut FlopLedger::new()).unwrap();
            let x = random_mat(k, s, seed ^ 0xABCD);
            let by_di = di_update(&m, &x, &mut FlopLedger::new()).unwrap();
            let by_ism = ism_update(&m_inv, &x, &mut FlopLedger::new()).unwrap();
            let by_wmi = wmi_update(&m_inv, &x, &mut FlopLedger::new()).unwrap();
            prop_assert!(by_ism.rel_frobenius_distance(&by_di) < 1e-8);
            prop_assert!(by_wmi.rel_frobenius_distance(&by_di) < 1e-8);
            prop_assert!(by_wmi.rel_frobenius_distance(&by_ism) < 1e-8);
        }

        #[test]
        fn ism_ledger_closed_form(s in 1usize..=16, k in 1usize..=8, seed in 0u64..1 << 48) {
            let m_inv = spd_invert(&random_spd(s, seed), &mut FlopLedger::new()).unwrap();
            let x = random_mat(k, s, seed ^ 0x1234);
            let mut ledger = FlopLedger::new();
            ism_update(&m_inv, &x, &mut ledger).unwrap();
            let (su, ku) = (s as u64, k as u64);
            prop_assert_eq!(ledger.count(), 4 * ku * su * su + 2 * ku * su);
        }

        #[test]
        fn experimental_selector_contract(s in 1usize..=64, k in 1usize..=64) {
            let got = select_method(s, k, SelectionRule::Experimental);
            let expected = if k == 1 {
                UpdateMethod::Ism
            } else if k <= s / 3 {
                UpdateMethod::Wmi
            } else {
                UpdateMethod::Di
            };
            prop_assert_eq!(got, expected);
        }
    }
}
