//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn is_hermitian(h: &CMat, tol: f64) -> bool {
    h.is_square() && max_abs_diff(h, &h.adjoint()) <= tol * (1.0 + max_abs(h))
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let x = a[(i, j)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn determinant(m: &CMat) -> C64 {
    m.clone().lu().determinant()
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    let lu = m.clone().lu();
    if lu.determinant().norm() == 0.0 {
        return Err(Error::Singular("zero pivot in LU factorization".into()));
    }
    lu.try_inverse().ok_or_else(|| Error::Singular("LU inverse failed".into()))
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(h: &CMat) -> Result<Self> {
        if !is_hermitian(h, 1e-12) {
            return Err(Error::NonHermitian("matrix differs from its adjoint".into()));
        }
        let e = SymmetricEigen::new(h.clone());
        Ok(HermitianEigen { values: e.eigenvalues.iter().copied().collect(), vectors: e.eigenvectors })
    }

    /// `f(H)` for a scalar function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Rotate an operator into the eigenbasis: `U^dagger A U`.
    pub fn to_eigenbasis(&self, a: &CMat) -> CMat {
        self.vectors.adjoint() * a * &self.vectors
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `e^{-i z H}` for Hermitian `H` and complex `z` (`z = -i tau` gives `e^{-tau H}`).
pub fn exp_hermitian(h: &CMat, z: C64) -> Result<CMat> {
    let e = HermitianEigen::new(h)?;
    Ok(e.apply(|l| (-crate::I * z * l).exp()))
}

/// General matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        s += 1;
        scale *= 0.5;
    }
    let x = a * C64::new(scale, 0.0);
    let mut term = eye(n);
    let mut sum = eye(n);
    for k in 1..40 {
        term = &term * &x * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if max_abs(&term) < 1e-18 * max_abs(&sum) {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
