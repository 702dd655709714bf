//! Pulse basis families, control fields and their repeated antiderivatives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance of the quadrature fallback.
pub const QUAD_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// `cos(2 pi k t / T)`.
    Fourier,
    /// Unit-height Gaussian centred at `T k / K`.
    Gaussian,
    /// `P_k` of the mapped time.
    Legendre,
    /// Indicator of window `[kT/K, (k+1)T/K)`, last window closed.
    Pwc,
    /// `t^k`; used for test fields with hand-integrable coefficients.
    Polynomial,
}

/// Argument mapping for the Legendre family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegendreDomain {
    /// `x = t / T`, on `[0, 1]`.
    #[default]
    Unit,
    /// `x = 2t / T - 1`, on `[-1, 1]`.
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisFamily {
    pub kind: BasisKind,
    /// Basis size `K`.
    pub size: usize,
    /// Total evolution time `T`.
    pub total_time: f64,
    /// Gaussian width; `T / (4K)` when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub legendre_domain: LegendreDomain,
}

impl BasisFamily {
    pub fn new(kind: BasisKind, size: usize, total_time: f64) -> Result<Self> {
        let b = BasisFamily {
            kind,
            size,
            total_time,
            sigma: None,
            legendre_domain: LegendreDomain::Unit,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn fourier(size: usize, total_time: f64) -> Result<Self> {
        Self::new(BasisKind::Fourier, size, total_time)
    }

    pub fn gaussian(size: usize, total_time: f64, sigma: Option<f64>) -> Result<Self> {
        let mut b = Self::new(BasisKind::Gaussian, size, total_time)?;
        b.sigma = sigma;
        b.validate()?;
        Ok(b)
    }

    pub fn legendre(size: usize, total_time: f64) -> Result<Self> {
        Self::new(BasisKind::Legendre, size, total_time)
    }

    pub fn pwc(size: usize, total_time: f64) -> Result<Self> {
        Self::new(BasisKind::Pwc, size, total_time)
    }

    pub fn polynomial(size: usize, total_time: f64) -> Result<Self> {
        Self::new(BasisKind::Polynomial, size, total_time)
    }

    pub fn with_legendre_domain(mut self, d: LegendreDomain) -> Self {
        self.legendre_domain = d;
        self
    }

    /// Same family with a different total time; PWC windows and Gaussian
    /// centres rescale with `T`, an explicit sigma is kept.
    pub fn with_total_time(&self, total_time: f64) -> Self {
        let mut b = self.clone();
        b.total_time = total_time;
        b
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidSpec("basis size K must be at least 1".into()));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "total time must be positive and finite, got {}",
                self.total_time
            )));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "gaussian sigma must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
            .unwrap_or(self.total_time / (4.0 * self.size as f64))
    }

    pub fn gaussian_centre(&self, k: usize) -> f64 {
        self.total_time * k as f64 / self.size as f64
    }

    /// Window `[a, b)` of the `k`-th PWC function.
    pub fn window(&self, k: usize) -> (f64, f64) {
        let w = self.total_time / self.size as f64;
        (k as f64 * w, (k + 1) as f64 * w)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.total_time;
        if !(t >= -slack && t <= self.total_time + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                total: self.total_time,
            });
        }
        Ok(())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.size {
            return Err(Error::IndexOutOfRange {
                index: k,
                size: self.size,
            });
        }
        Ok(())
    }

    fn legendre_arg(&self, t: f64) -> f64 {
        match self.legendre_domain {
            LegendreDomain::Unit => t / self.total_time,
            LegendreDomain::Symmetric => 2.0 * t / self.total_time - 1.0,
        }
    }

    fn pwc_index(&self, t: f64) -> usize {
        let k = (t / self.total_time * self.size as f64).floor();
        (k.max(0.0) as usize).min(self.size - 1)
    }

    /// `g_k(t)`.
    pub fn eval(&self, k: usize, t: f64) -> Result<f64> {
        self.check_index(k)?;
        self.check_time(t)?;
        Ok(self.eval_unchecked(k, t))
    }

    pub(crate) fn eval_unchecked(&self, k: usize, t: f64) -> f64 {
        match self.kind {
            BasisKind::Fourier => (2.0 * PI * k as f64 * t / self.total_time).cos(),
            BasisKind::Gaussian => {
                let s = self.sigma();
                let u = t - self.gaussian_centre(k);
                (-u * u / (2.0 * s * s)).exp()
            }
            BasisKind::Legendre => quadrature::legendre_with_derivative(k, self.legendre_arg(t)).0,
            BasisKind::Pwc => {
                if self.pwc_index(t) == k {
                    1.0
                } else {
                    0.0
                }
            }
            BasisKind::Polynomial => t.powi(k as i32),
        }
    }

    /// All `g_k(t)` for `k in 0..K`.
    pub fn values(&self, t: f64) -> Vec<f64> {
        match self.kind {
            BasisKind::Legendre => {
                let x = self.legendre_arg(t);
                let mut out = Vec::with_capacity(self.size);
                let (mut p0, mut p1) = (1.0, x);
                out.push(1.0);
                if self.size > 1 {
                    out.push(x);
                }
                for k in 2..self.size {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    out.push(p2);
                    p0 = p1;
                    p1 = p2;
                }
                out
            }
            BasisKind::Pwc => {
                let mut out = vec![0.0; self.size];
                out[self.pwc_index(t)] = 1.0;
                out
            }
            _ => (0..self.size).map(|k| self.eval_unchecked(k, t)).collect(),
        }
    }

    /// Monomial coefficients `c_m` with `g_k(t) = sum_m c_m t^m`, for
    /// polynomial families.
    pub fn monomial_coeffs(&self, k: usize) -> Option<Vec<f64>> {
        match self.kind {
            BasisKind::Polynomial => {
                let mut c = vec![0.0; k + 1];
                c[k] = 1.0;
                Some(c)
            }
            BasisKind::Fourier if k == 0 => Some(vec![1.0]),
            BasisKind::Legendre => {
                let x = legendre_monomials(k);
                let (scale, shift) = match self.legendre_domain {
                    LegendreDomain::Unit => (1.0 / self.total_time, 0.0),
                    LegendreDomain::Symmetric => (2.0 / self.total_time, -1.0),
                };
                Some(compose_affine(&x, scale, shift))
            }
            _ => None,
        }
    }

    /// `order`-fold repeated antiderivative of `g_k`, zero at `t = 0`.
    pub fn antiderivative(&self, k: usize, order: usize, t: f64) -> Result<f64> {
        check_order(order)?;
        self.check_index(k)?;
        self.check_time(t)?;
        Ok(self.antiderivative_unchecked(k, order, t))
    }

    pub(crate) fn antiderivative_unchecked(&self, k: usize, order: usize, t: f64) -> f64 {
        if let Some(c) = self.monomial_coeffs(k) {
            return poly_antiderivative(&c, order, t);
        }
        match self.kind {
            BasisKind::Fourier => {
                let w = 2.0 * PI * k as f64 / self.total_time;
                let (s, c) = (w * t).sin_cos();
                match order {
                    1 => s / w,
                    2 => (1.0 - c) / (w * w),
                    _ => t / (w * w) - s / (w * w * w),
                }
            }
            BasisKind::Pwc => {
                let (a, b) = self.window(k);
                let b = if k + 1 == self.size { f64::INFINITY } else { b };
                let ramp = |x: f64| if x > 0.0 { x.powi(order as i32) } else { 0.0 };
                let tail = if b.is_finite() { ramp(t - b) } else { 0.0 };
                (ramp(t - a) - tail) / factorial(order)
            }
            BasisKind::Gaussian => {
                let n = order as i32;
                let f = |tau: f64| {
                    (t - tau).powi(n - 1) / factorial(order - 1) * self.eval_unchecked(k, tau)
                };
                quadrature::adaptive(f, 0.0, t, QUAD_TOL)
            }
            _ => unreachable!("polynomial families handled above"),
        }
    }
}

pub(crate) fn check_order(order: usize) -> Result<()> {
    if !(1..=3).contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    Ok(())
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Monomial coefficients of the Legendre polynomial `P_k(x)`.
pub fn legendre_monomials(k: usize) -> Vec<f64> {
    let mut p0 = vec![1.0];
    if k == 0 {
        return p0;
    }
    let mut p1 = vec![0.0, 1.0];
    for n in 2..=k {
        let nf = n as f64;
        let mut p2 = vec![0.0; n + 1];
        for (m, &c) in p1.iter().enumerate() {
            p2[m + 1] += (2.0 * nf - 1.0) / nf * c;
        }
        for (m, &c) in p0.iter().enumerate() {
            p2[m] -= (nf - 1.0) / nf * c;
        }
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Coefficients in `t` of `p(scale * t + shift)`.
fn compose_affine(p: &[f64], scale: f64, shift: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    // (scale t + shift)^m expanded binomially
    for (m, &c) in p.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut binom = 1.0;
        for j in 0..=m {
            out[j] += c * binom * scale.powi(j as i32) * shift.powi((m - j) as i32);
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

fn poly_antiderivative(c: &[f64], order: usize, t: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(m, &cm)| {
            // m! / (m + order)!
            let ratio: f64 = (m + 1..=m + order).map(|j| 1.0 / j as f64).product();
            cm * ratio * t.powi((m + order) as i32)
        })
        .sum()
}

/// `f(t) = sum_k a_k g_k(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    pub basis: BasisFamily,
    pub coeffs: Vec<f64>,
}

impl ControlField {
    pub fn new(basis: BasisFamily, coeffs: Vec<f64>) -> Result<Self> {
        basis.validate()?;
        if coeffs.len() != basis.size {
            return Err(Error::ShapeMismatch(format!(
                "field has {} coefficients but basis size is {}",
                coeffs.len(),
                basis.size
            )));
        }
        Ok(ControlField { basis, coeffs })
    }

    pub fn zero(basis: BasisFamily) -> Self {
        let coeffs = vec![0.0; basis.size];
        ControlField { basis, coeffs }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.basis.check_time(t)?;
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        self.basis
            .values(t)
            .iter()
            .zip(&self.coeffs)
            .map(|(g, a)| g * a)
            .sum()
    }

    pub fn antiderivative(&self, order: usize, t: f64) -> Result<f64> {
        check_order(order)?;
        self.basis.check_time(t)?;
        if self.coeffs.iter().all(|&a| a == 0.0) {
            return Ok(0.0);
        }
        if self.basis.kind == BasisKind::Gaussian {
            // one quadrature for the whole field instead of one per basis function
            let f = |tau: f64| {
                (t - tau).powi(order as i32 - 1) / factorial(order - 1) * self.eval_unchecked(tau)
            };
            return Ok(quadrature::adaptive(f, 0.0, t, QUAD_TOL));
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(k, &a)| a * self.basis.antiderivative_unchecked(k, order, t))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_examples() {
        let f = BasisFamily::fourier(4, 2.0).unwrap();
        assert_eq!(f.eval(0, 1.3).unwrap(), 1.0);
        let g = BasisFamily::gaussian(5, 2.0, None).unwrap();
        assert!((g.eval(2, 2.0 * 2.0 / 5.0).unwrap() - 1.0).abs() < 1e-15);
        let l = BasisFamily::legendre(3, 1.5).unwrap();
        assert!((l.eval(2, 1.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_errors() {
        let f = BasisFamily::fourier(4, 1.0).unwrap();
        assert!(matches!(f.eval(4, 0.5), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(f.eval(0, 1.5), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(
            f.antiderivative(1, 4, 0.5),
            Err(Error::UnsupportedOrder(4))
        ));
        assert!(BasisFamily::fourier(0, 1.0).is_err());
        assert!(BasisFamily::gaussian(2, 1.0, Some(-1.0)).is_err());
    }

    #[test]
    fn field_examples() {
        let b = BasisFamily::fourier(3, 1.0).unwrap();
        let z = ControlField::zero(b.clone());
        assert_eq!(z.eval(0.4).unwrap(), 0.0);
        for order in 1..=3 {
            assert_eq!(z.antiderivative(order, 0.7).unwrap(), 0.0);
        }
        let f = ControlField::new(b, vec![0.0, 2.0, 0.0]).unwrap();
        assert!((f.eval(0.5).unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_antiderivative() {
        let t: f64 = 1.7;
        let b = BasisFamily::polynomial(3, t).unwrap();
        let f = ControlField::new(b, vec![0.0, 0.0, 1.0]).unwrap();
        assert!((f.antiderivative(1, t).unwrap() - t.powi(3) / 3.0).abs() < 1e-14);
        assert!((f.antiderivative(3, t).unwrap() - t.powi(5) / 60.0).abs() < 1e-13);
    }

    #[test]
    fn pwc_windows() {
        let b = BasisFamily::pwc(4, 2.0).unwrap();
        assert_eq!(b.eval(1, 0.5).unwrap(), 1.0);
        assert_eq!(b.eval(0, 0.5).unwrap(), 0.0);
        assert_eq!(b.eval(3, 2.0).unwrap(), 1.0);
        // window 1 is [0.5, 1): antiderivative saturates at its width
        assert!((b.antiderivative(1, 1, 1.7).unwrap() - 0.5).abs() < 1e-15);
        assert!((b.antiderivative(3, 1, 2.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn legendre_monomials_match_recurrence() {
        let b = BasisFamily::legendre(6, 2.0).unwrap();
        let bs = b.clone().with_legendre_domain(LegendreDomain::Symmetric);
        for k in 0..6 {
            for &t in &[0.0f64, 0.3, 1.1, 2.0] {
                for fam in [&b, &bs] {
                    let c = fam.monomial_coeffs(k).unwrap();
                    let v: f64 = c
                        .iter()
                        .enumerate()
                        .map(|(m, cm)| cm * t.powi(m as i32))
                        .sum();
                    assert!((v - fam.eval(k, t).unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fourier_second_antiderivative_vs_quadrature() {
        let b = BasisFamily::fourier(4, 1.3).unwrap();
        let f = ControlField::new(b, vec![0.2, -0.7, 1.1, 0.4]).unwrap();
        let t = 1.1;
        let nested = quadrature::adaptive(|s| f.antiderivative(1, s).unwrap(), 0.0, t, 1e-14);
        assert!((nested - f.antiderivative(2, t).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_antiderivative_vs_nested_quadrature() {
        let b = BasisFamily::gaussian(3, 1.0, None).unwrap();
        let f = ControlField::new(b, vec![1.0, -0.5, 0.8]).unwrap();
        let t = 0.9;
        let a2 = quadrature::adaptive(|s| f.antiderivative(1, s).unwrap(), 0.0, t, 1e-13);
        assert!((a2 - f.antiderivative(2, t).unwrap()).abs() < 1e-10);
    }
}
