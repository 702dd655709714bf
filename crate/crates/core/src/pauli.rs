//! Exact algebra of N-qubit Pauli strings.
//!
//! Products of Pauli letters close with unit phases, so a string is stored as
//! its letters plus a power of `i`. Dense realizations use the Kronecker order
//! where qubit 0 (the leftmost letter) is the most significant bit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest qubit count accepted by dense realizations.
pub const DEFAULT_DENSE_CAP: usize = 10;
/// Largest qubit count for exhaustive string enumeration.
pub const ENUMERATION_CAP: usize = 6;
/// Coefficients below this magnitude are dropped during canonicalization.
pub const COEFF_EPS: f64 = 1e-14;

/// Scale applied to every non-identity letter in dense realizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Plain Pauli matrices, `[X, Y] = 2iZ`.
    #[default]
    FullPauli,
    /// Spin operators `sigma / 2`, `[X, Y] = iZ`.
    SpinHalf,
}

impl Convention {
    pub fn letter_scale(self) -> f64 {
        match self {
            Convention::FullPauli => 1.0,
            Convention::SpinHalf => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn index(self) -> usize {
        self as usize
    }

    /// Single-site product `a * b = phase * c`.
    pub fn mul(self, other: Pauli) -> (Phase, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (Phase::ONE, p),
            (a, b) if a == b => (Phase::ONE, I),
            (X, Y) => (Phase::I, Z),
            (Y, X) => (Phase::MINUS_I, Z),
            (Y, Z) => (Phase::I, X),
            (Z, Y) => (Phase::MINUS_I, X),
            (Z, X) => (Phase::I, Y),
            (X, Z) => (Phase::MINUS_I, Y),
            _ => unreachable!(),
        }
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        self != Pauli::I && other != Pauli::I && self != other
    }

    pub fn as_char(self) -> char {
        ['I', 'X', 'Y', 'Z'][self.index()]
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// 2x2 matrix of the letter (full-Pauli normalization).
    pub fn matrix(self) -> DMatrix<Complex64> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let v = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        DMatrix::from_row_slice(2, 2, &v)
    }
}

/// Unit phase `i^k`, `k` in `0..4`.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: i64) -> Phase {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn neg(self) -> Phase {
        self.mul(Phase::MINUS_ONE)
    }

    pub fn conj(self) -> Phase {
        Phase((4 - self.0) % 4)
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

/// Phase-tagged tensor product of Pauli letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    letters: Vec<Pauli>,
    phase: Phase,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, phase: Phase) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidSpec(
                "Pauli string needs at least one site".into(),
            ));
        }
        Ok(PauliString { letters, phase })
    }

    pub fn identity(n: usize) -> Self {
        PauliString {
            letters: vec![Pauli::I; n.max(1)],
            phase: Phase::ONE,
        }
    }

    /// String with `letter` at each listed site and identity elsewhere.
    pub fn from_sites(n: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(n);
        for &(q, p) in sites {
            if q >= n {
                return Err(Error::IndexOutOfRange { index: q, size: n });
            }
            s.letters[q] = p;
        }
        Ok(s)
    }

    pub fn single(n: usize, site: usize, p: Pauli) -> Result<Self> {
        Self::from_sites(n, &[(site, p)])
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// Same letters, phase reset to +1.
    pub fn phase_free(&self) -> Self {
        PauliString {
            letters: self.letters.clone(),
            phase: Phase::ONE,
        }
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Sites carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        (0..self.letters.len())
            .filter(|&q| self.letters[q] != Pauli::I)
            .collect()
    }

    fn check_len(&self, other: &PauliString) -> Result<()> {
        if self.letters.len() != other.letters.len() {
            return Err(Error::LengthMismatch {
                left: self.letters.len(),
                right: other.letters.len(),
            });
        }
        Ok(())
    }

    pub fn commutes_with(&self, other: &PauliString) -> Result<bool> {
        self.check_len(other)?;
        let anti = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(a, b)| a.anticommutes(**b))
            .count();
        Ok(anti % 2 == 0)
    }

    /// Bit masks for the action `P|c> = i^{nY} (-1)^{|c & z|} |c ^ x>`.
    pub(crate) fn masks(&self) -> (usize, usize, u32) {
        let n = self.letters.len();
        let (mut x, mut z, mut ny) = (0usize, 0usize, 0u32);
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    ny += 1;
                }
                Pauli::Z => z |= bit,
            }
        }
        (x, z, ny)
    }

    /// Sparse action: for each column `c`, the row index and matrix entry.
    pub fn monomial(&self, convention: Convention) -> Vec<(usize, Complex64)> {
        let n = self.letters.len();
        let (x, z, ny) = self.masks();
        let base = self.phase.mul(Phase::from_power(ny as i64)).to_complex()
            * convention.letter_scale().powi(self.weight() as i32);
        (0..1usize << n)
            .map(|c| {
                let sign = if (c & z).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                (c ^ x, base * sign)
            })
            .collect()
    }

    pub fn to_dense(&self, convention: Convention) -> Result<DMatrix<Complex64>> {
        check_dense_cap(self.letters.len(), DEFAULT_DENSE_CAP)?;
        let d = 1usize << self.letters.len();
        let mut m = DMatrix::zeros(d, d);
        for (c, (r, v)) in self.monomial(convention).into_iter().enumerate() {
            m[(r, c)] = v;
        }
        Ok(m)
    }
}

pub(crate) fn check_dense_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::CapExceeded {
            what: "qubit count",
            got: n,
            cap,
        });
    }
    Ok(())
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase.power() {
            0 => "",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(r) = s.strip_prefix("+i") {
            (Phase::I, r)
        } else if let Some(r) = s.strip_prefix("-i") {
            (Phase::MINUS_I, r)
        } else if let Some(r) = s.strip_prefix('i') {
            (Phase::I, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (Phase::MINUS_ONE, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (Phase::ONE, r)
        } else {
            (Phase::ONE, s)
        };
        let letters = body
            .chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(letters, phase)
    }
}

/// Product `pq` with accumulated phase.
pub fn multiply(p: &PauliString, q: &PauliString) -> Result<PauliString> {
    p.check_len(q)?;
    let mut phase = p.phase.mul(q.phase);
    let letters = p
        .letters
        .iter()
        .zip(&q.letters)
        .map(|(&a, &b)| {
            let (ph, c) = a.mul(b);
            phase = phase.mul(ph);
            c
        })
        .collect();
    Ok(PauliString { letters, phase })
}

/// `[p, q]` as a single phase-free string and coefficient, or `None` when they commute.
pub fn commutator_term(
    p: &PauliString,
    q: &PauliString,
) -> Result<Option<(PauliString, Complex64)>> {
    if p.commutes_with(q)? {
        return Ok(None);
    }
    let pq = multiply(p, q)?;
    let coeff = pq.phase.to_complex() * 2.0;
    Ok(Some((pq.phase_free(), coeff)))
}

/// `[p, q] = pq - qp`.
pub fn commutator(p: &PauliString, q: &PauliString) -> Result<WeightedPauliSum> {
    let mut out = WeightedPauliSum::zero(p.num_qubits());
    if let Some((s, c)) = commutator_term(p, q)? {
        out.add_term(&s, c)?;
    }
    Ok(out)
}

/// All `4^N - 1` non-identity strings, lexicographic with `I < X < Y < Z`
/// and the leftmost site most significant.
pub fn enumerate_strings(n: usize) -> Result<Vec<PauliString>> {
    if n == 0 {
        return Err(Error::InvalidSpec("qubit count must be at least 1".into()));
    }
    if n > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            what: "exhaustive enumeration qubit count",
            got: n,
            cap: ENUMERATION_CAP,
        });
    }
    let total = 1usize << (2 * n);
    Ok((1..total)
        .map(|mut code| {
            let mut letters = vec![Pauli::I; n];
            for q in (0..n).rev() {
                letters[q] = Pauli::ALL[code & 3];
                code >>= 2;
            }
            PauliString {
                letters,
                phase: Phase::ONE,
            }
        })
        .collect())
}

/// Linear combination of phase-free Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPauliSum {
    n: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl WeightedPauliSum {
    pub fn zero(n: usize) -> Self {
        WeightedPauliSum {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms<'a, I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a PauliString, Complex64)>,
    {
        let mut s = Self::zero(n);
        for (p, c) in terms {
            s.add_term(p, c)?;
        }
        Ok(s)
    }

    pub fn from_string(p: &PauliString) -> Self {
        let mut s = Self::zero(p.num_qubits());
        s.add_term(p, Complex64::new(1.0, 0.0))
            .expect("length matches");
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &PauliString) -> Complex64 {
        let c = self.terms.get(&p.phase_free()).copied().unwrap_or_default();
        c * p.phase.conj().to_complex()
    }

    /// Adds `c * p`, absorbing the string's phase into the coefficient.
    pub fn add_term(&mut self, p: &PauliString, c: Complex64) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::LengthMismatch {
                left: self.n,
                right: p.num_qubits(),
            });
        }
        let c = c * p.phase.to_complex();
        let key = p.phase_free();
        let entry = self.terms.entry(key.clone()).or_default();
        *entry += c;
        if entry.norm() < COEFF_EPS {
            self.terms.remove(&key);
        }
        Ok(())
    }

    pub fn add(&self, other: &WeightedPauliSum) -> Result<Self> {
        let mut out = self.clone();
        for (p, &c) in &other.terms {
            out.add_term(p, c)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &WeightedPauliSum) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.n);
        for (p, &c) in &self.terms {
            let v = c * s;
            if v.norm() >= COEFF_EPS {
                out.terms.insert(p.clone(), v);
            }
        }
        out
    }

    pub fn mul(&self, other: &WeightedPauliSum) -> Result<Self> {
        let mut out = Self::zero(self.n);
        for (p, &a) in &self.terms {
            for (q, &b) in &other.terms {
                out.add_term(&multiply(p, q)?, a * b)?;
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &WeightedPauliSum) -> Result<Self> {
        let mut out = Self::zero(self.n);
        for (p, &a) in &self.terms {
            for (q, &b) in &other.terms {
                if let Some((s, c)) = commutator_term(p, q)? {
                    out.add_term(&s, a * b * c)?;
                }
            }
        }
        Ok(out)
    }

    /// True when every coefficient is real to within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Largest coefficient difference against `other`.
    pub fn max_diff(&self, other: &WeightedPauliSum) -> f64 {
        let mut keys: Vec<&PauliString> = self.terms.keys().collect();
        keys.extend(other.terms.keys());
        keys.into_iter()
            .map(|k| {
                let a = self.terms.get(k).copied().unwrap_or_default();
                let b = other.terms.get(k).copied().unwrap_or_default();
                (a - b).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self, convention: Convention) -> Result<DMatrix<Complex64>> {
        to_dense_capped(self, self.n, convention, DEFAULT_DENSE_CAP)
    }

    /// Writes one `coeff<TAB>string` line per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in &self.terms {
            out.push_str(&format!("{c}\t{p}\n"));
        }
        out
    }

    pub fn from_text(n: usize, text: &str) -> Result<Self> {
        let mut s = Self::zero(n);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (c, p) = line.split_once('\t').ok_or_else(|| {
                Error::Parse(format!("line {}: expected coeff<TAB>string", lineno + 1))
            })?;
            let c: Complex64 = c
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad coefficient {c:?}", lineno + 1)))?;
            let p: PauliString = p.parse()?;
            s.add_term(&p, c)?;
        }
        Ok(s)
    }
}

/// Dense realization of `s` on `n` qubits, refusing sizes beyond `cap`.
pub fn to_dense_capped(
    s: &WeightedPauliSum,
    n: usize,
    convention: Convention,
    cap: usize,
) -> Result<DMatrix<Complex64>> {
    check_dense_cap(n, cap)?;
    if s.n != n {
        return Err(Error::LengthMismatch {
            left: s.n,
            right: n,
        });
    }
    let d = 1usize << n;
    let mut m = DMatrix::zeros(d, d);
    for (p, &c) in &s.terms {
        for (col, (row, v)) in p.monomial(convention).into_iter().enumerate() {
            m[(row, col)] += c * v;
        }
    }
    Ok(m)
}

pub fn to_dense(s: &WeightedPauliSum, n: usize) -> Result<DMatrix<Complex64>> {
    to_dense_capped(s, n, Convention::FullPauli, DEFAULT_DENSE_CAP)
}

/// `Tr(A P)` computed from the monomial structure of `P` in `O(d)`.
pub fn trace_with(a: &DMatrix<Complex64>, p: &PauliString, convention: Convention) -> Complex64 {
    p.monomial(convention)
        .into_iter()
        .enumerate()
        .map(|(c, (r, v))| a[(c, r)] * v)
        .sum()
}

/// Hilbert-Schmidt decomposition `A = sum_P c_P P` (full-Pauli normalization).
pub fn decompose(a: &DMatrix<Complex64>, n: usize) -> Result<WeightedPauliSum> {
    let d = 1usize << n;
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "expected {d}x{d}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut out = WeightedPauliSum::zero(n);
    let id = PauliString::identity(n);
    out.add_term(&id, trace_with(a, &id, Convention::FullPauli) / d as f64)?;
    for p in enumerate_strings(n)? {
        out.add_term(&p, trace_with(a, &p, Convention::FullPauli) / d as f64)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_site_products() {
        let xx = multiply(&ps("X"), &ps("X")).unwrap();
        assert!(xx.is_identity());
        assert_eq!(xx.phase(), Phase::ONE);
        let xy = multiply(&ps("X"), &ps("Y")).unwrap();
        assert_eq!(xy, ps("+iZ"));
    }

    #[test]
    fn two_site_product_phase() {
        assert_eq!(multiply(&ps("XZ"), &ps("YY")).unwrap(), ps("ZX"));
    }

    #[test]
    fn commutator_examples() {
        assert!(commutator(&ps("X"), &ps("X")).unwrap().is_empty());
        let c = commutator(&ps("X"), &ps("Y")).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c.coeff(&ps("Z")) - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        let c = commutator(&ps("ZZ"), &ps("IX")).unwrap();
        assert!((c.coeff(&ps("ZY")) - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn dense_examples() {
        let id = to_dense(&WeightedPauliSum::from_string(&PauliString::identity(2)), 2).unwrap();
        assert_eq!(id, DMatrix::identity(4, 4));
        let zz = ps("ZZ").to_dense(Convention::FullPauli).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| zz[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        assert!(matches!(
            to_dense_capped(&WeightedPauliSum::zero(11), 11, Convention::FullPauli, 10),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn spin_half_scales_letters() {
        let m = ps("XZ").to_dense(Convention::SpinHalf).unwrap();
        let f = ps("XZ").to_dense(Convention::FullPauli).unwrap();
        assert!((m - f * Complex64::new(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn enumeration_counts() {
        let one: Vec<String> = enumerate_strings(1)
            .unwrap()
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(one, vec!["X", "Y", "Z"]);
        assert_eq!(enumerate_strings(2).unwrap().len(), 15);
        let five = enumerate_strings(5).unwrap();
        let set: std::collections::HashSet<_> = five.iter().collect();
        assert_eq!(five.len(), 1023);
        assert_eq!(set.len(), 1023);
        assert!(enumerate_strings(7).is_err());
    }

    #[test]
    fn length_mismatch_is_reported() {
        assert!(matches!(
            multiply(&ps("X"), &ps("XX")),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
        assert!(commutator(&ps("X"), &ps("XX")).is_err());
    }

    #[test]
    fn text_round_trip() {
        for s in ["XZIZ", "+iXY", "-ZZ", "-iYIX"] {
            assert_eq!(ps(s).to_string(), s);
        }
        let mut sum = WeightedPauliSum::zero(2);
        sum.add_term(&ps("XZ"), Complex64::new(0.5, -1.25)).unwrap();
        sum.add_term(&ps("YY"), Complex64::new(-3.0, 0.0)).unwrap();
        assert_eq!(WeightedPauliSum::from_text(2, &sum.to_text()).unwrap(), sum);
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn decomposition_round_trip() {
        let mut sum = WeightedPauliSum::zero(2);
        sum.add_term(&ps("XZ"), Complex64::new(0.5, 0.0)).unwrap();
        sum.add_term(&ps("IY"), Complex64::new(0.0, 2.0)).unwrap();
        let back = decompose(&sum.to_dense(Convention::FullPauli).unwrap(), 2).unwrap();
        assert!(back.max_diff(&sum) < 1e-14);
    }

    #[test]
    fn cancellation_removes_terms() {
        let mut s = WeightedPauliSum::zero(1);
        s.add_term(&ps("X"), Complex64::new(1.0, 0.0)).unwrap();
        s.add_term(&ps("-X"), Complex64::new(1.0, 0.0)).unwrap();
        assert!(s.is_empty());
    }
}
