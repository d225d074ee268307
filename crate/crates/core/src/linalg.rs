//! Small dense complex matrices, specialized to the nilpotent local-system data
//! that appears in the normal forms: finite exponentials, duals, tensor sums,
//! middle-leg contractions and intertwiner spaces.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MirrorError, Result};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// A map `V1 -> V2` stored as a `dim V2 x dim V1` matrix.
pub type HomTensor = Matrix;

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "[")?;
            for c in 0..self.cols {
                let v = self[(r, c)];
                write!(f, "{}{:+}i", v.re, v.im)?;
                if c + 1 < self.cols {
                    write!(f, ", ")?;
                }
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn scalar(v: C64) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    /// Upper-triangular Jordan block with zero eigenvalue.
    pub fn jordan(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            m[(i, i + 1)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(MirrorError::ShapeMismatch("ragged matrix rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let conv: Vec<Vec<C64>> =
            rows.iter().map(|row| row.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&conv)
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows).map(|r| self.data[r * self.cols..(r + 1) * self.cols].to_vec()).collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == ZERO)
    }

    /// Largest entrywise distance; `INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(MirrorError::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(MirrorError::ShapeMismatch(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// `self += s * rhs`; shapes must agree.
    pub fn axpy(&mut self, s: C64, rhs: &Self) {
        assert_eq!(self.shape(), rhs.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
    }

    pub fn pow(&self, k: usize) -> Self {
        assert!(self.is_square());
        let mut out = Self::identity(self.rows);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Kronecker product; index `(i, j)` of `self ⊗ rhs` is `i * rhs.dim + j`.
    pub fn kron(&self, rhs: &Self) -> Self {
        Self::from_fn(self.rows * rhs.rows, self.cols * rhs.cols, |r, c| {
            self[(r / rhs.rows, c / rhs.cols)] * rhs[(r % rhs.rows, c % rhs.cols)]
        })
    }

    /// Smallest `k` with `self^k = 0` (within `tol`), if `k <= dim`.
    pub fn nilpotency_index(&self, tol: f64) -> Option<usize> {
        if !self.is_square() {
            return None;
        }
        let mut p = Self::identity(self.rows);
        for k in 0..=self.rows {
            if p.max_abs() <= tol {
                return Some(k);
            }
            p = &p * self;
        }
        None
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.try_mul(rhs).expect("matrix shape mismatch")
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("matrix shape mismatch")
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.try_add(&rhs.scale_real(-1.0)).expect("matrix shape mismatch")
    }
}

const NILPOTENT_TOL: f64 = 1e-12;

/// A local system `(V, exp N)` with `N` nilpotent; `nil_index` is the
/// smallest `k` with `N^k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSystemData {
    n: Matrix,
    nil_index: usize,
}

impl LocalSystemData {
    pub fn new(n: Matrix) -> Result<Self> {
        if !n.is_square() || n.rows() == 0 {
            return Err(MirrorError::ShapeMismatch(format!(
                "connection matrix must be square and non-empty, got {:?}",
                n.shape()
            )));
        }
        let scale = n.max_abs().max(1.0);
        let tol = NILPOTENT_TOL * scale.powi(n.rows() as i32);
        match n.nilpotency_index(tol) {
            Some(k) => Ok(Self { n, nil_index: k }),
            None => Err(MirrorError::NotNilpotent(n.rows())),
        }
    }

    pub fn trivial(dim: usize) -> Self {
        Self { n: Matrix::zeros(dim, dim), nil_index: if dim == 0 { 0 } else { 1 } }
    }

    pub fn jordan(dim: usize) -> Self {
        Self { n: Matrix::jordan(dim), nil_index: dim }
    }

    pub fn dim(&self) -> usize {
        self.n.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.n
    }

    pub fn nil_index(&self) -> usize {
        self.nil_index
    }

    pub fn is_trivial(&self) -> bool {
        self.n.is_zero()
    }

    /// `(V, exp(s N))`; nilpotency index is unchanged for `s != 0`.
    pub fn scaled(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::trivial(self.dim());
        }
        Self { n: self.n.scale_real(s), nil_index: self.nil_index }
    }

    /// `N^j` for `j < nil_index`.
    pub fn powers(&self) -> Vec<Matrix> {
        let mut out = Vec::with_capacity(self.nil_index.max(1));
        let mut p = Matrix::identity(self.dim());
        for _ in 0..self.nil_index.max(1) {
            out.push(p.clone());
            p = &p * &self.n;
        }
        out
    }
}

impl Serialize for LocalSystemData {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::schema::MatrixRecord::from(&self.n).serialize(s)
    }
}

impl<'de> Deserialize<'de> for LocalSystemData {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = crate::schema::MatrixRecord::deserialize(d)?;
        let m = rec.to_matrix().map_err(serde::de::Error::custom)?;
        LocalSystemData::new(m).map_err(serde::de::Error::custom)
    }
}

/// `sum_{j < nil_index} N^j / j!`.
pub fn nilpotent_exp(sys: &LocalSystemData) -> Matrix {
    exp_truncated(sys.matrix(), sys.nil_index())
}

/// `exp(N)` for a matrix known to be nilpotent; fails otherwise.
pub fn exp_nilpotent(n: &Matrix) -> Result<Matrix> {
    let sys = LocalSystemData::new(n.clone())?;
    Ok(nilpotent_exp(&sys))
}

fn exp_truncated(n: &Matrix, terms: usize) -> Matrix {
    let dim = n.rows();
    let mut out = Matrix::identity(dim);
    let mut p = Matrix::identity(dim);
    let mut fact = 1.0;
    for j in 1..terms {
        p = &p * n;
        fact *= j as f64;
        out.axpy(C64::new(1.0 / fact, 0.0), &p);
    }
    out
}

/// Matrix of the dual operator `N*` in the dual basis (the transpose).
pub fn adjoint_on_dual(sys: &LocalSystemData) -> LocalSystemData {
    LocalSystemData { n: sys.matrix().transpose(), nil_index: sys.nil_index() }
}

/// `N1 ⊗ 1 + 1 ⊗ N2` on `V1 ⊗ V2`.
pub fn tensor_sum(a: &LocalSystemData, b: &LocalSystemData) -> LocalSystemData {
    let n = &a.matrix().kron(&Matrix::identity(b.dim())) + &Matrix::identity(a.dim()).kron(b.matrix());
    let bound = a.nil_index() + b.nil_index() - 1;
    let nil_index = n.nilpotency_index(NILPOTENT_TOL).unwrap_or(bound).min(bound);
    LocalSystemData { n, nil_index }
}

/// An element of `(V1* ⊗ V2) ⊗ (V2'* ⊗ V3)`, stored as
/// `data[((i3 * d2b + k2) * d2 + j2) * d1 + l1]` where `(j2, l1)` index the
/// first leg (`V1 -> V2`) and `(i3, k2)` the second (`V2' -> V3`).
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTensor {
    d1: usize,
    d2: usize,
    d2b: usize,
    d3: usize,
    data: Vec<C64>,
}

impl ChainTensor {
    /// `A ⊗ B` for `A: V1 -> V2`, `B: V2' -> V3`.
    pub fn from_pair(a: &HomTensor, b: &HomTensor) -> Self {
        let (d2, d1) = a.shape();
        let (d3, d2b) = b.shape();
        let mut data = Vec::with_capacity(d1 * d2 * d2b * d3);
        for i in 0..d3 {
            for k in 0..d2b {
                for j in 0..d2 {
                    for l in 0..d1 {
                        data.push(b[(i, k)] * a[(j, l)]);
                    }
                }
            }
        }
        Self { d1, d2, d2b, d3, data }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.d1, self.d2, self.d2b, self.d3)
    }

    pub fn add_scaled(&mut self, s: C64, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(MirrorError::ShapeMismatch("chain tensor legs differ".into()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Contracts the `V2` leg against the `V2'*` leg; `A ⊗ B` maps to `B·A`.
    pub fn partial_trace_middle(&self) -> Result<HomTensor> {
        if self.d2 != self.d2b {
            return Err(MirrorError::ShapeMismatch(format!(
                "middle legs have dimensions {} and {}",
                self.d2, self.d2b
            )));
        }
        let mut out = Matrix::zeros(self.d3, self.d1);
        for i in 0..self.d3 {
            for j in 0..self.d2 {
                for l in 0..self.d1 {
                    out[(i, l)] += self.data[((i * self.d2b + j) * self.d2 + j) * self.d1 + l];
                }
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`ChainTensor::partial_trace_middle`].
pub fn partial_trace_middle(x: &ChainTensor) -> Result<HomTensor> {
    x.partial_trace_middle()
}

/// Basis of `{T : T·N1 = N2·T}` (maps `V1 -> V2` intertwining the nilpotents).
pub fn intertwiners(n1: &LocalSystemData, n2: &LocalSystemData) -> Vec<HomTensor> {
    let (d1, d2) = (n1.dim(), n2.dim());
    let unknowns = d1 * d2;
    // Unknown T[r][c] sits at index r * d1 + c.
    let mut sys = Matrix::zeros(unknowns, unknowns);
    for r in 0..d2 {
        for c in 0..d1 {
            let eq = r * d1 + c;
            for k in 0..d1 {
                sys[(eq, r * d1 + k)] += n1.matrix()[(k, c)];
            }
            for k in 0..d2 {
                sys[(eq, k * d1 + c)] -= n2.matrix()[(r, k)];
            }
        }
    }
    null_space(&sys, 1e-10)
        .into_iter()
        .map(|v| Matrix::from_fn(d2, d1, |r, c| v[r * d1 + c]))
        .collect()
}

/// Null space by Gauss–Jordan elimination with partial pivoting.
fn null_space(a: &Matrix, tol: f64) -> Vec<Vec<C64>> {
    let (rows, cols) = a.shape();
    let mut m = a.clone();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let (best, val) = (row..rows)
            .map(|r| (r, m[(r, col)].norm()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        for c in 0..cols {
            let tmp = m[(row, c)];
            m[(row, c)] = m[(best, c)];
            m[(best, c)] = tmp;
        }
        let p = m[(row, col)];
        for c in 0..cols {
            m[(row, c)] /= p;
        }
        for r in 0..rows {
            if r != row {
                let f = m[(r, col)];
                if f != ZERO {
                    for c in 0..cols {
                        let sub = f * m[(row, c)];
                        m[(r, c)] -= sub;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![ZERO; cols];
            v[f] = ONE;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[(r, f)];
            }
            v
        })
        .collect()
}

/// Precomputed products `N3^i · B · N2^j · A · N1^k` for a chain
/// `V1 -A-> V2 -B-> V3` with nilpotents acting on each space.
///
/// Any power series in the three commuting operators (left action of `N3`,
/// middle action of `N2`, right action of `N1`) applied to `A ⊗ B` and then
/// contracted over `V2` is a finite weighted sum of these products.
#[derive(Clone, Debug)]
pub struct TripleContraction {
    terms: Vec<(usize, usize, usize, Matrix)>,
    shape: (usize, usize),
}

impl TripleContraction {
    pub fn new(
        left: &LocalSystemData,
        middle: &LocalSystemData,
        right: &LocalSystemData,
        a: &HomTensor,
        b: &HomTensor,
    ) -> Result<Self> {
        if a.rows() != middle.dim() || b.cols() != middle.dim() {
            return Err(MirrorError::ShapeMismatch(format!(
                "middle space has dimension {}, maps are {:?} and {:?}",
                middle.dim(),
                a.shape(),
                b.shape()
            )));
        }
        if a.cols() != right.dim() || b.rows() != left.dim() {
            return Err(MirrorError::ShapeMismatch("outer spaces do not match the maps".into()));
        }
        let (lp, mp, rp) = (left.powers(), middle.powers(), right.powers());
        let mut terms = Vec::new();
        for (j, m) in mp.iter().enumerate() {
            let bm = b * m;
            for (i, l) in lp.iter().enumerate() {
                let lbm = l * &bm;
                let lbma = &lbm * a;
                for (k, r) in rp.iter().enumerate() {
                    let t = &lbma * r;
                    if !t.is_zero() {
                        terms.push((i, j, k, t));
                    }
                }
            }
        }
        Ok(Self { terms, shape: (b.rows(), a.cols()) })
    }

    /// `sum_{i,j,k} weight(i, j, k) · N3^i B N2^j A N1^k`.
    pub fn apply(&self, mut weight: impl FnMut(usize, usize, usize) -> C64) -> Matrix {
        let mut out = Matrix::zeros(self.shape.0, self.shape.1);
        for (i, j, k, t) in &self.terms {
            let w = weight(*i, *j, *k);
            if w != ZERO {
                out.axpy(w, t);
            }
        }
        out
    }

    /// Contraction of `exp(x3 N3 + x2 N2 + x1 N1)` applied to `A ⊗ B`.
    pub fn apply_exp(&self, x3: C64, x2: C64, x1: C64) -> Matrix {
        self.apply(|i, j, k| {
            x3.powu(i as u32) * x2.powu(j as u32) * x1.powu(k as u32)
                / (factorial(i) * factorial(j) * factorial(k))
        })
    }

    pub fn max_total_degree(&self) -> usize {
        self.terms.iter().map(|(i, j, k, _)| i + j + k).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(n: usize) -> LocalSystemData {
        LocalSystemData::jordan(n)
    }

    #[test]
    fn exp_examples() {
        assert_eq!(nilpotent_exp(&LocalSystemData::trivial(2)), Matrix::identity(2));
        let e2 = nilpotent_exp(&j(2));
        assert_eq!(e2, &Matrix::identity(2) + &Matrix::jordan(2));
        let n3 = Matrix::jordan(3);
        let expect = &(&Matrix::identity(3) + &n3) + &(&n3 * &n3).scale_real(0.5);
        assert_eq!(nilpotent_exp(&j(3)), expect);
    }

    #[test]
    fn rejects_non_nilpotent() {
        let m = Matrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(LocalSystemData::new(m), Err(MirrorError::NotNilpotent(2)));
        let m = Matrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(LocalSystemData::new(m).is_err());
    }

    #[test]
    fn exp_inverse() {
        let m = Matrix::from_real_rows(&[vec![0.0, 2.0, -1.0], vec![0.0, 0.0, 3.0], vec![0.0, 0.0, 0.0]])
            .unwrap();
        let s = LocalSystemData::new(m.clone()).unwrap();
        let e = nilpotent_exp(&s);
        let ei = nilpotent_exp(&LocalSystemData::new(m.scale_real(-1.0)).unwrap());
        assert_eq!(&e * &ei, Matrix::identity(3));
    }

    #[test]
    fn dual_examples() {
        assert!(adjoint_on_dual(&LocalSystemData::trivial(2)).matrix().is_zero());
        assert_eq!(adjoint_on_dual(&j(2)).matrix(), &Matrix::jordan(2).transpose());
        // <v, N* xi> = <N v, xi> on basis vectors.
        let s = LocalSystemData::new(
            Matrix::from_real_rows(&[vec![0.0, 1.0, 5.0], vec![0.0, 0.0, -2.0], vec![0.0, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let d = adjoint_on_dual(&s);
        for v in 0..3 {
            for xi in 0..3 {
                // <e_v, N* f_xi> = (N*)_{v, xi};  <N e_v, f_xi> = N_{xi, v}
                assert_eq!(d.matrix()[(v, xi)], s.matrix()[(xi, v)]);
            }
        }
        assert_eq!(adjoint_on_dual(&d), s);
    }

    #[test]
    fn tensor_sum_examples() {
        let z = tensor_sum(&LocalSystemData::trivial(2), &LocalSystemData::trivial(3));
        assert!(z.matrix().is_zero());
        assert_eq!(z.dim(), 6);
        let t = tensor_sum(&j(2), &LocalSystemData::trivial(1));
        assert_eq!(t.matrix(), &Matrix::jordan(2));
        let t = tensor_sum(&j(2), &j(2));
        assert_eq!(t.dim(), 4);
        assert!(t.nil_index() <= 3);
        let lhs = nilpotent_exp(&t);
        let rhs = nilpotent_exp(&j(2)).kron(&nilpotent_exp(&j(2)));
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(ChainTensor::from_pair(&i2, &i2).partial_trace_middle().unwrap(), i2);
        let a = Matrix::from_real_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let zero = Matrix::zeros(3, 2);
        assert!(ChainTensor::from_pair(&a, &zero).partial_trace_middle().unwrap().is_zero());
        let a = Matrix::from_real_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![4.0, 1.0]]).unwrap();
        let b = Matrix::from_real_rows(&[vec![2.0, 0.0, 1.0], vec![-1.0, 1.0, 0.25]]).unwrap();
        let got = ChainTensor::from_pair(&a, &b).partial_trace_middle().unwrap();
        // Entry-wise oracle for B·A.
        for r in 0..2 {
            for c in 0..2 {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..3 {
                    s += b.to_rows()[r][k] * a.to_rows()[k][c];
                }
                assert!((got[(r, c)] - s).norm() < 1e-15);
            }
        }
        let bad = ChainTensor::from_pair(&a, &Matrix::zeros(2, 2));
        assert!(matches!(bad.partial_trace_middle(), Err(MirrorError::ShapeMismatch(_))));
    }

    #[test]
    fn intertwiner_dimensions() {
        assert_eq!(intertwiners(&LocalSystemData::trivial(2), &LocalSystemData::trivial(2)).len(), 4);
        let b = intertwiners(&j(2), &j(2));
        assert_eq!(b.len(), 2);
        for t in &b {
            let lhs = t * j(2).matrix();
            let rhs = j(2).matrix() * t;
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
        let b = intertwiners(&LocalSystemData::trivial(1), &j(2));
        assert_eq!(b.len(), 1);
        assert!((j(2).matrix() * &b[0]).is_zero());
        assert_eq!(intertwiners(&j(3), &j(2)).len(), 2);
    }

    #[test]
    fn triple_contraction_matches_explicit_exponentials() {
        let a = Matrix::from_real_rows(&[vec![1.0, 2.0], vec![0.0, -1.0]]).unwrap();
        let b = Matrix::from_real_rows(&[vec![3.0, 1.0], vec![0.5, 0.0], vec![1.0, 1.0]]).unwrap();
        let (l, m, r) = (j(3), j(2), j(2));
        let tc = TripleContraction::new(&l, &m, &r, &a, &b).unwrap();
        let (x3, x2, x1) = (C64::new(0.3, 0.1), C64::new(-0.7, 0.0), C64::new(0.2, -0.4));
        let got = tc.apply_exp(x3, x2, x1);
        let e = |s: &LocalSystemData, x: C64| exp_nilpotent(&s.matrix().scale(x)).unwrap();
        let expect = &(&(&(&e(&l, x3) * &b) * &e(&m, x2)) * &a) * &e(&r, x1);
        assert!(got.max_abs_diff(&expect) < 1e-14);
    }
}
