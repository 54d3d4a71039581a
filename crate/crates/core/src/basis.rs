//! Graded-lexicographic monomial bases of d-variate polynomials.
//!
//! A basis of degree n in dimension d holds every multi-index α with
//! |α| ≤ n, ordered by ascending total degree and, within a degree, by
//! dictionary order on the variables with x1 as the first letter
//! (x1² before x1·x2 before x2²). Its size is binomial(d+n, n).

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Exponent vector of a single monomial. Exponents are stored as `u8`;
/// moment matrices become intractable long before degree 255.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u8>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u8>) -> Self {
        Self { exponents }
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exponents
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().map(|&e| e as u32).sum()
    }
}

impl Ord for MultiIndex {
    /// Ascending total degree; ties broken by treating x1 as the most
    /// significant letter, so within a degree the exponent tuple with the
    /// larger leading entries sorts first.
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(self.exponents.len(), other.exponents.len());
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                for (a, b) in self.exponents.iter().zip(&other.exponents) {
                    match a.cmp(b) {
                        Ordering::Equal => continue,
                        // larger exponent on an earlier variable = earlier word
                        ord => return ord.reverse(),
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Number of d-variate monomials of degree at most n: binomial(d+n, n).
///
/// Overflow is reported, never wrapped.
pub fn basis_size(d: usize, n: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let r = n.min(d) as u128;
    let m = (d as u128) + (n as u128);
    let mut acc: u128 = 1;
    for i in 1..=r {
        acc = acc
            .checked_mul(m - r + i)
            .ok_or(Error::BasisSizeOverflow { d, n })?
            / i;
    }
    usize::try_from(acc).map_err(|_| Error::BasisSizeOverflow { d, n })
}

/// The ordered monomial basis together with an evaluation plan that lets
/// `vectorize` reuse lower-degree values instead of calling `pow`.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    d: usize,
    n: usize,
    indices: Vec<MultiIndex>,
    // for entry i >= 1: out[i] = x[plan[i-1].0] * out[plan[i-1].1]
    eval_plan: Vec<(usize, usize)>,
}

impl MonomialBasis {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if n > u8::MAX as usize {
            return Err(Error::DegreeTooLarge(n));
        }
        let size = basis_size(d, n)?;
        let mut indices = Vec::with_capacity(size);
        let mut scratch = vec![0u8; d];
        for degree in 0..=n {
            emit_compositions(&mut scratch, 0, degree as u32, &mut indices);
        }
        debug_assert_eq!(indices.len(), size);

        let positions: HashMap<&[u8], usize> = indices
            .iter()
            .enumerate()
            .map(|(i, mi)| (mi.exponents(), i))
            .collect();
        let mut eval_plan = Vec::with_capacity(size.saturating_sub(1));
        for mi in indices.iter().skip(1) {
            let var = mi
                .exponents()
                .iter()
                .position(|&e| e > 0)
                .expect("non-constant monomial has a positive exponent");
            let mut parent = mi.exponents().to_vec();
            parent[var] -= 1;
            let parent_pos = positions[parent.as_slice()];
            eval_plan.push((var, parent_pos));
        }

        Ok(Self {
            d,
            n,
            indices,
            eval_plan,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Evaluate the monomial vector at `x`. The first component is always 1.
    pub fn vectorize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::ShapeMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let mut out = Vec::with_capacity(self.size());
        out.push(1.0);
        for &(var, parent) in &self.eval_plan {
            let v = x[var] * out[parent];
            out.push(v);
        }
        Ok(out)
    }

    /// Stack the monomial vectors of `points` as the rows of a design matrix.
    pub fn vectorize_batch(&self, points: &[Vec<f64>]) -> Result<UpdateBatch> {
        if points.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let s = self.size();
        let mut data = Vec::with_capacity(points.len() * s);
        for p in points {
            data.extend_from_slice(&self.vectorize(p)?);
        }
        UpdateBatch::from_mat(Mat::from_vec(points.len(), s, data)?)
    }
}

fn emit_compositions(scratch: &mut [u8], var: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if var + 1 == scratch.len() {
        scratch[var] = remaining as u8;
        out.push(MultiIndex::new(scratch.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        scratch[var] = e as u8;
        emit_compositions(scratch, var + 1, remaining - e, out);
    }
}

/// A k×s design matrix of vectorized points, k ≥ 1.
#[derive(Clone, Debug)]
pub struct UpdateBatch {
    x: Mat,
}

impl UpdateBatch {
    pub fn from_mat(x: Mat) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(Self { x })
    }

    pub fn k(&self) -> usize {
        self.x.rows()
    }

    pub fn width(&self) -> usize {
        self.x.cols()
    }

    pub fn design(&self) -> &Mat {
        &self.x
    }

    pub fn into_design(self) -> Mat {
        self.x
    }
}
