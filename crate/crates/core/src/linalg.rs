//! Dense complex matrix helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let mut s = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entry magnitude of `U^dag U - I`.
pub fn unitarity_error(u: &CMat) -> f64 {
    let p = u.adjoint() * u;
    let mut e: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { ONE } else { ZERO };
            e = e.max((p[(i, j)] - target).norm());
        }
    }
    e
}

/// Largest entry magnitude of `H - H^dag`.
pub fn hermiticity_error(h: &CMat) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            e = e.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    e
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigendecomposition `H = V diag(lambda) V^dag` of a Hermitian matrix.
pub struct HermitianEigen {
    pub vectors: CMat,
    pub values: Vec<f64>,
}

pub fn eigh(h: &CMat) -> Result<HermitianEigen> {
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("Hamiltonian entry".into()));
    }
    let e = SymmetricEigen::new(h.clone());
    Ok(HermitianEigen {
        vectors: e.eigenvectors,
        values: e.eigenvalues.iter().copied().collect(),
    })
}

impl HermitianEigen {
    /// `V diag(f(lambda)) V^dag`.
    pub fn apply_fn<F: Fn(f64) -> Complex64>(&self, f: F) -> CMat {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fj = f(l);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// `exp(-i tau H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, tau: f64) -> Result<CMat> {
    let e = eigh(h)?;
    Ok(e.apply_fn(|l| Complex64::from_polar(1.0, -tau * l)))
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// phases of `diag(R)` divided out.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMat::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * scale, im * scale)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}
