use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const INLINE: usize = 4;

type Storage = SmallVec<[C64; INLINE]>;

#[inline]
fn storage(len: usize) -> Storage {
    if len <= INLINE {
        SmallVec::from_buf_and_len([ZERO; INLINE], len)
    } else {
        SmallVec::from_vec(vec![ZERO; len])
    }
}

/// Dense square complex matrix in row-major order.
///
/// Storage is inline up to 4×4 so qubit and qutrit arithmetic never touches the heap.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Storage,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self { dim, data: storage(dim * dim) }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from `dim * dim` entries listed row by row.
    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Self { dim, data: SmallVec::from_slice(entries) })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        let out = m.data.as_mut_slice();
        for i in 0..dim {
            for j in 0..dim {
                out[i * dim + j] = f(i, j);
            }
        }
        m
    }

    fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        if let Ok(a) = <&[C64; INLINE]>::try_from(self.data.as_slice()) {
            return Self { dim: self.dim, data: SmallVec::from_buf(a.map(f)) };
        }
        let mut data = storage(self.data.len());
        for (o, z) in data.iter_mut().zip(self.data.iter()) {
            *o = f(*z);
        }
        Self { dim: self.dim, data }
    }

    fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        if let (Ok(a), Ok(b)) =
            (<&[C64; INLINE]>::try_from(self.data.as_slice()), <&[C64; INLINE]>::try_from(other.data.as_slice()))
        {
            let data = [f(a[0], b[0]), f(a[1], b[1]), f(a[2], b[2]), f(a[3], b[3])];
            return Self { dim: self.dim, data: SmallVec::from_buf(data) };
        }
        let mut data = storage(self.data.len());
        for ((o, a), b) in data.iter_mut().zip(self.data.iter()).zip(other.data.iter()) {
            *o = f(*a, *b);
        }
        Self { dim: self.dim, data }
    }

    /// |v⟩⟨w|
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        assert_eq!(v.len(), w.len());
        Self::from_fn(v.len(), |i, j| v[i] * w[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let a = self.data.as_slice();
        if n == 2 {
            let data = [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()];
            return Self { dim: 2, data: SmallVec::from_buf(data) };
        }
        Self::from_fn(n, |i, j| a[j * n + i].conj())
    }

    pub fn trace(&self) -> C64 {
        let a = self.data.as_slice();
        (0..self.dim).map(|i| a[i * self.dim + i]).sum()
    }

    /// tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let (a, b) = (self.data.as_slice(), other.data.as_slice());
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + i];
            }
        }
        acc
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|z| z * factor)
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        self.map(|z| z * factor)
    }

    /// self += factor · other
    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b * factor;
        }
    }

    /// Largest entrywise distance to the conjugate transpose.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let a = self.data.as_slice();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((a[i * n + j] - a[j * n + i].conj()).norm());
            }
        }
        worst
    }

    /// (A + A†)/2
    pub fn hermitian_part(&self) -> Self {
        let n = self.dim;
        let a = self.data.as_slice();
        Self::from_fn(n, |i, j| (a[i * n + j] + a[j * n + i].conj()) * 0.5)
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix product");
        let n = self.dim;
        let (a, b) = (self.data.as_slice(), rhs.data.as_slice());
        if n == 2 {
            let (a, b) = (&a[..4], &b[..4]);
            let data = [
                a[0] * b[0] + a[1] * b[2],
                a[0] * b[1] + a[1] * b[3],
                a[2] * b[0] + a[3] * b[2],
                a[2] * b[1] + a[3] * b[3],
            ];
            return Self { dim: 2, data: SmallVec::from_buf(data) };
        }
        let mut out = Self::zeros(n);
        let o = out.data.as_mut_slice();
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                for j in 0..n {
                    o[i * n + j] += aik * b[k * n + j];
                }
            }
        }
        out
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self.get(i, j);
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix sum");
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix difference");
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.add_scaled(rhs, 1.0);
    }
}

/// Qubit operators in the basis (|e⟩, |g⟩), so that σ_z|e⟩ = |e⟩.
pub mod pauli {
    use super::{ComplexMatrix, C64};

    fn qubit(entries: [[C64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, |i, j| entries[i][j])
    }

    const O: C64 = C64::new(0.0, 0.0);
    const ONE: C64 = C64::new(1.0, 0.0);
    const I: C64 = C64::new(0.0, 1.0);

    pub fn sigma_x() -> ComplexMatrix {
        qubit([[O, ONE], [ONE, O]])
    }

    pub fn sigma_y() -> ComplexMatrix {
        qubit([[O, -I], [I, O]])
    }

    pub fn sigma_z() -> ComplexMatrix {
        qubit([[ONE, O], [O, -ONE]])
    }

    /// Lowering operator |g⟩⟨e|.
    pub fn sigma_minus() -> ComplexMatrix {
        qubit([[O, O], [ONE, O]])
    }

    pub fn excited() -> ComplexMatrix {
        qubit([[ONE, O], [O, O]])
    }

    pub fn ground() -> ComplexMatrix {
        qubit([[O, O], [O, ONE]])
    }
}
