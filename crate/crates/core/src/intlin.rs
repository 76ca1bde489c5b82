//! Exact integer linear algebra: Hermite and Smith normal forms, determinant
//! divisors and primitivity of integer vectors.
//!
//! Matrices are stored row-major with arbitrary precision entries. Rod
//! structures are usually handled as the columns of an `n x m` matrix.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type IntVector = Vec<BigInt>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntLinError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("k = {k} is out of range for a {rows}x{cols} matrix")]
    OrderOutOfRange { k: usize, rows: usize, cols: usize },
    #[error("empty input")]
    Empty,
    #[error("matrix is not unimodular")]
    NotUnimodular,
}

/// Build an integer vector from machine integers.
pub fn int_vec(values: &[i64]) -> IntVector {
    values.iter().map(|&x| BigInt::from(x)).collect()
}

/// The `i`-th standard basis vector of `Z^n`.
pub fn unit_vector(n: usize, i: usize) -> IntVector {
    let mut v = vec![BigInt::zero(); n];
    v[i] = BigInt::one();
    v
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[IntVector]) -> Result<Self, IntLinError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(IntLinError::DimensionMismatch("rows of unequal length".into()));
        }
        Ok(IntMatrix { rows: r, cols: c, data: rows.iter().flatten().cloned().collect() })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[IntVector]) -> Result<Self, IntLinError> {
        Ok(Self::from_rows(columns)?.transpose())
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Result<Self, IntLinError> {
        let rows: Vec<IntVector> = rows.iter().map(|r| int_vec(r)).collect();
        Self::from_rows(&rows)
    }

    pub fn from_i64_columns(columns: &[Vec<i64>]) -> Result<Self, IntLinError> {
        Ok(Self::from_i64_rows(columns)?.transpose())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> IntVector {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn columns(&self) -> Vec<IntVector> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn row_vectors(&self) -> Vec<IntVector> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn checked_mul(&self, other: &IntMatrix) -> Result<IntMatrix, IntLinError> {
        if self.cols != other.rows {
            return Err(IntLinError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Result<IntVector, IntLinError> {
        if v.len() != self.cols {
            return Err(IntLinError::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect())
    }

    /// Submatrix on the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> IntMatrix {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j).clone());
            }
        }
        out
    }

    /// Fraction-free (Bareiss) determinant of a square matrix.
    pub fn determinant(&self) -> Result<BigInt, IntLinError> {
        if self.rows != self.cols {
            return Err(IntLinError::DimensionMismatch("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut m = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m.get(k, k).is_zero() {
                match (k + 1..n).find(|&i| !m.get(i, k).is_zero()) {
                    Some(i) => {
                        m.swap_rows(k, i);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (m.get(i, j) * m.get(k, k) - m.get(i, k) * m.get(k, j)) / &prev;
                    m.set(i, j, v);
                }
            }
            prev = m.get(k, k).clone();
        }
        Ok(sign * m.get(n - 1, n - 1))
    }

    pub fn rank(&self) -> usize {
        hermite_normal_form(self).pivots.len()
    }

    /// Inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> Result<IntMatrix, IntLinError> {
        if self.rows != self.cols {
            return Err(IntLinError::NotUnimodular);
        }
        let hf = hermite_normal_form(self);
        if hf.h != Self::identity(self.rows) {
            return Err(IntLinError::NotUnimodular);
        }
        Ok(hf.q)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let idx = i * self.cols + j;
            self.data[idx] = -&self.data[idx];
        }
    }

    /// row[target] -= factor * row[source]
    fn sub_row_multiple(&mut self, target: usize, source: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = self.get(source, j) * factor;
            self.data[target * self.cols + j] -= v;
        }
    }

    /// Replace rows (a, b) by (s*a + t*b, u*a + w*b).
    fn combine_rows(&mut self, a: usize, b: usize, m: &[BigInt; 4]) {
        let [s, t, u, w] = m;
        for j in 0..self.cols {
            let x = self.get(a, j).clone();
            let y = self.get(b, j).clone();
            self.set(a, j, s * &x + t * &y);
            self.set(b, j, u * &x + w * &y);
        }
    }

    /// Replace columns (a, b) by (s*a + t*b, u*a + w*b).
    fn combine_cols(&mut self, a: usize, b: usize, m: &[BigInt; 4]) {
        let [s, t, u, w] = m;
        for i in 0..self.rows {
            let x = self.get(i, a).clone();
            let y = self.get(i, b).clone();
            self.set(i, a, s * &x + t * &y);
            self.set(i, b, u * &x + w * &y);
        }
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix{:?}", self.row_vectors())
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.data.iter().map(ToString::to_string).collect();
        let width = cells.iter().map(String::len).max().unwrap_or(1);
        for i in 0..self.rows {
            let line: Vec<String> = (0..self.cols).map(|j| format!("{:>width$}", cells[i * self.cols + j])).collect();
            writeln!(f, "[ {} ]", line.join(" "))?;
        }
        Ok(())
    }
}

/// Unimodular 2x2 block `[[s, t], [-b/g, a/g]]` sending `(a, b)` to `(g, 0)`.
fn gcd_block(a: &BigInt, b: &BigInt) -> [BigInt; 4] {
    // Plain elimination when a divides b, so a settled pivot is never disturbed.
    if !a.is_zero() && b.is_multiple_of(a) {
        return [BigInt::one(), BigInt::zero(), -(b / a), BigInt::one()];
    }
    let e = a.extended_gcd(b);
    let (mut g, mut s, mut t) = (e.gcd, e.x, e.y);
    if g.is_negative() {
        g = -g;
        s = -s;
        t = -t;
    }
    [s, t, -(b / &g), a / &g]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HermiteForm {
    /// `Q * A`
    pub h: IntMatrix,
    /// Unimodular transform with `Q * A = H`.
    pub q: IntMatrix,
    /// `(row, column)` of each pivot.
    pub pivots: Vec<(usize, usize)>,
}

/// Row-style Hermite normal form under left multiplication.
pub fn hermite_normal_form(a: &IntMatrix) -> HermiteForm {
    let (m, n) = (a.rows(), a.cols());
    let mut h = a.clone();
    let mut q = IntMatrix::identity(m);
    let mut pivots = Vec::new();
    let mut r = 0;
    for j in 0..n {
        if r == m {
            break;
        }
        for i in r + 1..m {
            if h.get(i, j).is_zero() {
                continue;
            }
            let block = gcd_block(h.get(r, j), h.get(i, j));
            h.combine_rows(r, i, &block);
            q.combine_rows(r, i, &block);
        }
        if h.get(r, j).is_zero() {
            continue;
        }
        if h.get(r, j).is_negative() {
            h.negate_row(r);
            q.negate_row(r);
        }
        let pivot = h.get(r, j).clone();
        for i in 0..r {
            let factor = h.get(i, j).div_floor(&pivot);
            h.sub_row_multiple(i, r, &factor);
            q.sub_row_multiple(i, r, &factor);
        }
        pivots.push((r, j));
        r += 1;
    }
    HermiteForm { h, q, pivots }
}

/// Whether `h` satisfies the row-style Hermite conditions.
pub fn is_hermite_normal_form(h: &IntMatrix) -> bool {
    let mut last_col: Option<usize> = None;
    let mut seen_zero_row = false;
    for i in 0..h.rows() {
        match (0..h.cols()).find(|&j| !h.get(i, j).is_zero()) {
            None => seen_zero_row = true,
            Some(j) => {
                if seen_zero_row || last_col.is_some_and(|c| j <= c) {
                    return false;
                }
                let pivot = h.get(i, j);
                if !pivot.is_positive() {
                    return false;
                }
                if (0..i).any(|k| h.get(k, j).is_negative() || h.get(k, j) >= pivot) {
                    return false;
                }
                last_col = Some(j);
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithForm {
    /// `U * A * V`
    pub s: IntMatrix,
    pub u: IntMatrix,
    pub v: IntMatrix,
    /// Diagonal of `S`, `min(rows, cols)` entries, zeros after the rank.
    pub divisors: Vec<BigInt>,
}

impl SmithForm {
    pub fn rank(&self) -> usize {
        self.divisors.iter().filter(|d| !d.is_zero()).count()
    }
}

pub fn smith_normal_form(a: &IntMatrix) -> SmithForm {
    let (m, n) = (a.rows(), a.cols());
    let mut s = a.clone();
    let mut u = IntMatrix::identity(m);
    let mut v = IntMatrix::identity(n);
    let steps = m.min(n);
    for t in 0..steps {
        let Some((pi, pj)) = smallest_entry(&s, t) else { break };
        s.swap_rows(t, pi);
        u.swap_rows(t, pi);
        s.swap_cols(t, pj);
        v.swap_cols(t, pj);
        loop {
            for i in t + 1..m {
                if !s.get(i, t).is_zero() {
                    let block = gcd_block(s.get(t, t), s.get(i, t));
                    s.combine_rows(t, i, &block);
                    u.combine_rows(t, i, &block);
                }
            }
            for j in t + 1..n {
                if !s.get(t, j).is_zero() {
                    let block = gcd_block(s.get(t, t), s.get(t, j));
                    s.combine_cols(t, j, &block);
                    v.combine_cols(t, j, &block);
                }
            }
            if (t + 1..m).any(|i| !s.get(i, t).is_zero()) {
                continue;
            }
            let pivot = s.get(t, t).clone();
            let offender = (t + 1..m).find(|&i| (t + 1..n).any(|j| !s.get(i, j).is_multiple_of(&pivot)));
            match offender {
                Some(i) => {
                    let one = BigInt::one();
                    s.sub_row_multiple(t, i, &-&one);
                    u.sub_row_multiple(t, i, &-&one);
                }
                None => break,
            }
        }
        if s.get(t, t).is_negative() {
            s.negate_row(t);
            u.negate_row(t);
        }
    }
    let divisors = (0..steps).map(|t| s.get(t, t).clone()).collect();
    SmithForm { s, u, v, divisors }
}

fn smallest_entry(s: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in t..s.rows() {
        for j in t..s.cols() {
            let x = s.get(i, j);
            if x.is_zero() {
                continue;
            }
            if best.is_none_or(|(bi, bj)| x.abs() < s.get(bi, bj).abs()) {
                best = Some((i, j));
            }
        }
    }
    best
}

/// Visit all increasing `k`-subsets of `0..n`; stop early when `f` returns false.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx) {
            return;
        }
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else { return };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

/// `Det_k(A)`: gcd of all `k x k` minors. `Det_0 = 1` by convention.
pub fn determinant_divisor(a: &IntMatrix, k: usize) -> Result<BigInt, IntLinError> {
    if k > a.rows().min(a.cols()) {
        return Err(IntLinError::OrderOutOfRange { k, rows: a.rows(), cols: a.cols() });
    }
    if k == 0 {
        return Ok(BigInt::one());
    }
    let mut g = BigInt::zero();
    for_each_subset(a.rows(), k, |rows| {
        for_each_subset(a.cols(), k, |cols| {
            let minor = a.select(rows, cols).determinant().expect("square minor");
            g = g.gcd(&minor);
            !g.is_one()
        });
        !g.is_one()
    });
    Ok(g)
}

fn check_same_length(vectors: &[&[BigInt]]) -> Result<usize, IntLinError> {
    let n = vectors.first().ok_or(IntLinError::Empty)?.len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(IntLinError::DimensionMismatch("vectors of unequal length".into()));
    }
    Ok(n)
}

/// `Det_2(v, w)`, the gcd of the 2x2 minors of the pair.
pub fn det2(v: &[BigInt], w: &[BigInt]) -> Result<BigInt, IntLinError> {
    check_same_length(&[v, w])?;
    let mut g = BigInt::zero();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            g = g.gcd(&(&v[i] * &w[j] - &v[j] * &w[i]));
        }
    }
    Ok(g)
}

/// `Det_k` of the column set.
pub fn det_k(vectors: &[IntVector]) -> Result<BigInt, IntLinError> {
    let refs: Vec<&[BigInt]> = vectors.iter().map(Vec::as_slice).collect();
    check_same_length(&refs)?;
    determinant_divisor(&IntMatrix::from_columns(vectors)?, vectors.len())
}

pub fn vector_gcd(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
}

pub fn is_primitive_vector(v: &[BigInt]) -> Result<bool, IntLinError> {
    if v.is_empty() {
        return Err(IntLinError::Empty);
    }
    Ok(vector_gcd(v).is_one())
}

/// Whether the vectors extend to a basis of `Z^n`: the upper `k x k` block of the
/// Hermite form of the column matrix is the identity.
pub fn is_primitive_set(vectors: &[IntVector]) -> Result<bool, IntLinError> {
    let refs: Vec<&[BigInt]> = vectors.iter().map(Vec::as_slice).collect();
    let n = check_same_length(&refs)?;
    let k = vectors.len();
    if k > n {
        return Ok(false);
    }
    let h = hermite_normal_form(&IntMatrix::from_columns(vectors)?).h;
    Ok((0..k).all(|i| (0..k).all(|j| *h.get(i, j) == BigInt::from(u8::from(i == j)))))
}

/// Flip the sign so the first nonzero component is positive.
pub fn sign_normalize(v: &[BigInt]) -> IntVector {
    match v.iter().find(|x| !x.is_zero()) {
        Some(x) if x.is_negative() => v.iter().map(|x| -x).collect(),
        _ => v.to_vec(),
    }
}

pub fn format_vector(v: &[BigInt]) -> String {
    let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_i64_rows(rows).unwrap()
    }

    #[test]
    fn hermite_of_four_columns() {
        let a = IntMatrix::from_i64_columns(&[vec![1, 0, 0], vec![1, -1, 1], vec![2, 0, 3], vec![1, 1, 0]]).unwrap();
        let hf = hermite_normal_form(&a);
        let expected =
            IntMatrix::from_i64_columns(&[vec![1, 0, 0], vec![0, 1, 0], vec![2, 0, 3], vec![2, -1, 1]]).unwrap();
        assert_eq!(hf.h, expected);
        assert_eq!(hf.q, m(&[vec![1, 1, 0], vec![0, -1, 0], vec![0, 1, 1]]));
        assert_eq!(hf.q.checked_mul(&a).unwrap(), hf.h);
    }

    #[test]
    fn hermite_of_zero_and_empty() {
        let z = IntMatrix::zeros(3, 2);
        let hf = hermite_normal_form(&z);
        assert!(hf.h.is_zero());
        assert!(hf.pivots.is_empty());
        assert_eq!(hf.q, IntMatrix::identity(3));
        let e = IntMatrix::zeros(0, 0);
        assert_eq!(hermite_normal_form(&e).h, e);
    }

    #[test]
    fn smith_examples() {
        let s = smith_normal_form(&m(&[vec![2, 0], vec![0, 3]]));
        assert_eq!(s.divisors, int_vec(&[1, 6]));
        let s = smith_normal_form(&IntMatrix::zeros(2, 3));
        assert_eq!(s.divisors, int_vec(&[0, 0]));
        let s = smith_normal_form(&IntMatrix::from_i64_columns(&[vec![1, 2], vec![1, 0]]).unwrap());
        assert_eq!(s.divisors, int_vec(&[1, 2]));
    }

    #[test]
    fn smith_transform_identity() {
        let a = m(&[vec![4, 6, 2], vec![6, 9, 3], vec![2, 3, 8]]);
        let sf = smith_normal_form(&a);
        let usv = sf.u.checked_mul(&a).unwrap().checked_mul(&sf.v).unwrap();
        assert_eq!(usv, sf.s);
        assert_eq!(sf.divisors, int_vec(&[1, 7, 0]));
    }

    #[test]
    fn determinant_divisor_examples() {
        let a = IntMatrix::from_i64_columns(&[vec![1, 0, 0], vec![11, 9, 24]]).unwrap();
        assert_eq!(determinant_divisor(&a, 2).unwrap(), BigInt::from(3));
        let a = IntMatrix::from_i64_columns(&[vec![4, 6, 10]]).unwrap();
        assert_eq!(determinant_divisor(&a, 1).unwrap(), BigInt::from(2));
        assert!(determinant_divisor(&a, 2).is_err());
    }

    #[test]
    fn primitivity_examples() {
        assert!(is_primitive_vector(&int_vec(&[2, 3, 5])).unwrap());
        assert!(!is_primitive_vector(&int_vec(&[2, 4, 6])).unwrap());
        assert!(!is_primitive_set(&[int_vec(&[1, 0]), int_vec(&[0, 2])]).unwrap());
        assert!(is_primitive_set(&[int_vec(&[0, 1, 0]), int_vec(&[2, 3, 5]), int_vec(&[1, 0, 2])]).unwrap());
        assert!(is_primitive_vector(&[]).is_err());
    }

    #[test]
    fn bareiss_determinant() {
        let a = m(&[vec![0, 2, 1], vec![1, 3, 0], vec![0, 5, 2]]);
        assert_eq!(a.determinant().unwrap(), BigInt::from(1));
        assert_eq!(a.transpose().determinant().unwrap(), BigInt::from(1));
        let b = m(&[vec![1, 2], vec![2, 4]]);
        assert_eq!(b.determinant().unwrap(), BigInt::zero());
    }

    #[test]
    fn unimodular_inverse() {
        let q = m(&[vec![1, 1, 0], vec![0, -1, 0], vec![0, 1, 1]]);
        let qi = q.inverse_unimodular().unwrap();
        assert_eq!(q.checked_mul(&qi).unwrap(), IntMatrix::identity(3));
        assert!(m(&[vec![2, 0], vec![0, 1]]).inverse_unimodular().is_err());
    }

    #[test]
    fn subsets_enumerated_in_order() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| {
            seen.push(s.to_vec());
            true
        });
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
    }
}
