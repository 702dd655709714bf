//! Analog ansatz Hamiltonians `H(t; theta) = H_nat(J) + sum_i,alpha f_i^alpha(t) h_i^alpha`,
//! their time-ordered propagators and parameter derivatives.

mod a2;
mod propagate;

pub use a2::{
    construct_a2_qp_schedule, pi_pulse_residual, strong_drive_pair, A2Options, A2Schedule,
};
pub use propagate::{
    default_slice_count, dynamical_derivatives, loss_and_gradient, propagate, propagate_window,
    unitary_derivatives, PropagationResult, SliceData, UNITARITY_TOL,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::controls::{BasisFamily, BasisKind};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::pauli::{Convention, Pauli, PauliString, WeightedPauliSum};

/// Native interaction graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// `sum_i J_i Z_i Z_{i+1}`.
    IsingChain,
    /// `sum_i J_i Z_i Z_N`, the last qubit being the output.
    QpStar,
    /// `sum_i J_i X_i X_{i+1}`.
    XChain,
    /// Star couplings plus the fixed transverse drift `-h sum_i X_i`.
    StarTarget,
}

impl Topology {
    pub const ALL: [Topology; 4] = [
        Topology::IsingChain,
        Topology::QpStar,
        Topology::XChain,
        Topology::StarTarget,
    ];

    /// Sites `(i, j)` and letter of each coupling slot.
    pub fn coupling_sites(self, n: usize) -> Vec<(usize, usize, Pauli)> {
        match self {
            Topology::IsingChain => (0..n - 1).map(|i| (i, i + 1, Pauli::Z)).collect(),
            Topology::QpStar | Topology::StarTarget => {
                (0..n - 1).map(|i| (i, n - 1, Pauli::Z)).collect()
            }
            Topology::XChain => (0..n - 1).map(|i| (i, i + 1, Pauli::X)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(Error::Parse(format!(
                "unknown axis {s:?} (expected x, y or z)"
            ))),
        }
    }
}

/// One control field `f(t) h` acting on a single qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlEntry {
    pub qubit: usize,
    pub axis: Axis,
    pub basis: BasisFamily,
}

fn default_drift() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub num_qubits: usize,
    pub topology: Topology,
    /// Sorted by `(qubit, axis)`; entries sharing both keep insertion order.
    pub controls: Vec<ControlEntry>,
    #[serde(default)]
    pub convention: Convention,
    pub total_time: f64,
    /// Transverse drift strength `h` of the `StarTarget` topology.
    #[serde(default = "default_drift")]
    pub drift_field: f64,
}

impl AnsatzSpec {
    pub fn new(
        num_qubits: usize,
        topology: Topology,
        mut controls: Vec<ControlEntry>,
        convention: Convention,
        total_time: f64,
    ) -> Result<Self> {
        controls.sort_by_key(|c| (c.qubit, c.axis));
        let spec = AnsatzSpec {
            num_qubits,
            topology,
            controls,
            convention,
            total_time,
            drift_field: default_drift(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Quantum perceptron with one basis family on the x and y axes of every qubit.
    pub fn qp_uniform(n: usize, basis: BasisFamily) -> Result<Self> {
        let t = basis.total_time;
        let controls = (0..n)
            .flat_map(|q| {
                [Axis::X, Axis::Y].map(|axis| ControlEntry {
                    qubit: q,
                    axis,
                    basis: basis.clone(),
                })
            })
            .collect();
        Self::new(n, Topology::QpStar, controls, Convention::FullPauli, t)
    }

    /// A1 perceptron: Fourier x, y controls on all qubits.
    pub fn a1_qp(n: usize, k: usize, total_time: f64) -> Result<Self> {
        Self::qp_uniform(n, BasisFamily::fourier(k, total_time)?)
    }

    /// A2 perceptron: Gaussian x, y controls on all qubits plus PWC x, y on the output.
    pub fn a2_qp(n: usize, k: usize, total_time: f64) -> Result<Self> {
        let g = BasisFamily::gaussian(k, total_time, None)?;
        let p = BasisFamily::pwc(k, total_time)?;
        let mut controls: Vec<ControlEntry> = (0..n)
            .flat_map(|q| {
                [Axis::X, Axis::Y].map(|axis| ControlEntry {
                    qubit: q,
                    axis,
                    basis: g.clone(),
                })
            })
            .collect();
        for axis in [Axis::X, Axis::Y] {
            controls.push(ControlEntry {
                qubit: n - 1,
                axis,
                basis: p.clone(),
            });
        }
        Self::new(
            n,
            Topology::QpStar,
            controls,
            Convention::FullPauli,
            total_time,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_qubits == 0 {
            return Err(Error::InvalidSpec("qubit count must be at least 1".into()));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "total time must be positive, got {}",
                self.total_time
            )));
        }
        for (i, c) in self.controls.iter().enumerate() {
            if c.qubit >= self.num_qubits {
                return Err(Error::InvalidSpec(format!(
                    "control {i} targets qubit {} but the system has {} qubits",
                    c.qubit, self.num_qubits
                )));
            }
            c.basis.validate()?;
            if (c.basis.total_time - self.total_time).abs() > 1e-12 * self.total_time {
                return Err(Error::InvalidSpec(format!(
                    "control {i} basis has T = {} but the ansatz has T = {}",
                    c.basis.total_time, self.total_time
                )));
            }
        }
        if !self.drift_field.is_finite() {
            return Err(Error::InvalidSpec("drift field must be finite".into()));
        }
        Ok(())
    }

    pub fn num_couplings(&self) -> usize {
        self.num_qubits.saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    /// Offset of each control entry's coefficients in the flat parameter vector.
    pub fn control_offsets(&self) -> Vec<usize> {
        let mut off = self.num_couplings();
        self.controls
            .iter()
            .map(|c| {
                let o = off;
                off += c.basis.size;
                o
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.num_couplings() + self.controls.iter().map(|c| c.basis.size).sum::<usize>()
    }

    /// Human-readable label of each flat parameter.
    pub fn param_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .topology
            .coupling_sites(self.num_qubits)
            .iter()
            .map(|(i, j, _)| format!("J[{i},{j}]"))
            .collect();
        for c in &self.controls {
            for k in 0..c.basis.size {
                out.push(format!(
                    "a[{},{},{:?},{k}]",
                    c.qubit,
                    c.axis.name(),
                    c.basis.kind
                ));
            }
        }
        out
    }

    pub fn coupling_strings(&self) -> Vec<PauliString> {
        self.topology
            .coupling_sites(self.num_qubits)
            .into_iter()
            .map(|(i, j, p)| {
                PauliString::from_sites(self.num_qubits, &[(i, p), (j, p)]).expect("sites in range")
            })
            .collect()
    }

    /// Parameter-independent part of the Hamiltonian.
    pub fn drift(&self) -> WeightedPauliSum {
        let mut s = WeightedPauliSum::zero(self.num_qubits);
        if self.topology == Topology::StarTarget && self.drift_field != 0.0 {
            for q in 0..self.num_qubits {
                let p = PauliString::single(self.num_qubits, q, Pauli::X).expect("site in range");
                s.add_term(&p, Complex64::new(-self.drift_field, 0.0))
                    .expect("length matches");
            }
        }
        s
    }

    pub fn check_params(&self, theta: &ParameterVector) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "parameter vector has length {} but the ansatz expects {}",
                theta.len(),
                self.num_params()
            )));
        }
        if let Some(i) = theta.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        Ok(())
    }

    /// `H(t; theta)` as a Pauli sum with numeric coefficients (full-Pauli letters;
    /// the spin-half convention scales each coefficient by `2^-weight`).
    pub fn hamiltonian_sum(&self, theta: &ParameterVector, t: f64) -> Result<WeightedPauliSum> {
        self.check_params(theta)?;
        let scale = self.convention.letter_scale();
        let mut s = WeightedPauliSum::zero(self.num_qubits);
        for (p, &j) in self.coupling_strings().iter().zip(theta.couplings(self)) {
            s.add_term(p, Complex64::new(j * scale * scale, 0.0))?;
        }
        for (p, c) in self.drift().iter() {
            s.add_term(p, c * scale.powi(p.weight() as i32))?;
        }
        for (entry, off) in self.controls.iter().zip(self.control_offsets()) {
            let coeffs = &theta.values[off..off + entry.basis.size];
            let f = crate::controls::ControlField::new(entry.basis.clone(), coeffs.to_vec())?
                .eval(t)?;
            let p = PauliString::single(self.num_qubits, entry.qubit, entry.axis.pauli())?;
            s.add_term(&p, Complex64::new(f * scale, 0.0))?;
        }
        Ok(s)
    }

    /// Dense `H(t; theta)`.
    pub fn hamiltonian_at(&self, theta: &ParameterVector, t: f64) -> Result<CMat> {
        self.check_params(theta)?;
        if !(t >= -1e-12 * self.total_time && t <= self.total_time * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange {
                t,
                total: self.total_time,
            });
        }
        Ok(Compiled::new(self)?.hamiltonian(theta, t))
    }

    /// Whether any control uses a basis without smooth closed-form integrals.
    pub fn has_kind(&self, kind: BasisKind) -> bool {
        self.controls.iter().any(|c| c.basis.kind == kind)
    }

    /// Same ansatz over a different total time.
    pub fn with_total_time(&self, total_time: f64) -> Self {
        let mut s = self.clone();
        s.total_time = total_time;
        for c in &mut s.controls {
            c.basis = c.basis.with_total_time(total_time);
        }
        s
    }
}

/// Flat parameters: couplings first, then control coefficients by `(qubit, axis, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParameterVector { values }
    }

    pub fn zeros(spec: &AnsatzSpec) -> Self {
        ParameterVector {
            values: vec![0.0; spec.num_params()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn couplings<'a>(&'a self, spec: &AnsatzSpec) -> &'a [f64] {
        &self.values[..spec.num_couplings()]
    }

    /// Coefficients of control entry `idx`.
    pub fn control<'a>(&'a self, spec: &AnsatzSpec, idx: usize) -> &'a [f64] {
        let off = spec.control_offsets()[idx];
        &self.values[off..off + spec.controls[idx].basis.size]
    }

    pub fn control_mut<'a>(&'a mut self, spec: &AnsatzSpec, idx: usize) -> &'a mut [f64] {
        let off = spec.control_offsets()[idx];
        &mut self.values[off..off + spec.controls[idx].basis.size]
    }
}

/// A Pauli term with its precomputed monomial action.
#[derive(Clone, Debug)]
pub(crate) struct Term {
    pub mono: Vec<(usize, Complex64)>,
}

impl Term {
    fn new(string: PauliString, convention: Convention) -> Self {
        Term {
            mono: string.monomial(convention),
        }
    }

    pub fn add_to(&self, h: &mut CMat, coeff: f64) {
        for (col, &(row, v)) in self.mono.iter().enumerate() {
            h[(row, col)] += v * coeff;
        }
    }

    /// `Tr(A P)`.
    pub fn trace_with(&self, a: &CMat) -> Complex64 {
        self.mono
            .iter()
            .enumerate()
            .map(|(col, &(row, v))| a[(col, row)] * v)
            .sum()
    }
}

/// Ansatz with every operator realized once, for repeated Hamiltonian assembly.
#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub spec: AnsatzSpec,
    pub couplings: Vec<Term>,
    pub drift: Vec<(Term, f64)>,
    pub controls: Vec<(Term, BasisFamily, usize)>,
}

impl Compiled {
    pub fn new(spec: &AnsatzSpec) -> Result<Self> {
        spec.validate()?;
        crate::pauli::check_dense_cap(spec.num_qubits, crate::pauli::DEFAULT_DENSE_CAP)?;
        let conv = spec.convention;
        let couplings = spec
            .coupling_strings()
            .into_iter()
            .map(|p| Term::new(p, conv))
            .collect();
        let drift = spec
            .drift()
            .iter()
            .map(|(p, c)| (Term::new(p.clone(), conv), c.re))
            .collect();
        let controls = spec
            .controls
            .iter()
            .zip(spec.control_offsets())
            .map(|(c, off)| {
                let p = PauliString::single(spec.num_qubits, c.qubit, c.axis.pauli())
                    .expect("validated");
                (Term::new(p, conv), c.basis.clone(), off)
            })
            .collect();
        Ok(Compiled {
            spec: spec.clone(),
            couplings,
            drift,
            controls,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Field amplitude of every control entry at time `t`.
    pub fn field_values(&self, theta: &ParameterVector, t: f64) -> Vec<(Vec<f64>, f64)> {
        self.controls
            .iter()
            .map(|(_, basis, off)| {
                let g = basis.values(t);
                let f = g
                    .iter()
                    .zip(&theta.values[*off..*off + basis.size])
                    .map(|(g, a)| g * a)
                    .sum();
                (g, f)
            })
            .collect()
    }

    pub fn hamiltonian_from_fields(
        &self,
        theta: &ParameterVector,
        fields: &[(Vec<f64>, f64)],
    ) -> CMat {
        let d = self.dim();
        let mut h = CMat::zeros(d, d);
        for (term, &j) in self.couplings.iter().zip(&theta.values) {
            if j != 0.0 {
                term.add_to(&mut h, j);
            }
        }
        for (term, c) in &self.drift {
            term.add_to(&mut h, *c);
        }
        for ((term, _, _), (_, f)) in self.controls.iter().zip(fields) {
            if *f != 0.0 {
                term.add_to(&mut h, *f);
            }
        }
        h
    }

    pub fn hamiltonian(&self, theta: &ParameterVector, t: f64) -> CMat {
        let fields = self.field_values(theta, t);
        self.hamiltonian_from_fields(theta, &fields)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_error, max_abs_diff};
    use crate::pauli::to_dense;

    #[test]
    fn qp_star_constant_couplings() {
        let b = BasisFamily::fourier(2, 1.0).unwrap();
        let spec = AnsatzSpec::qp_uniform(3, b).unwrap();
        let mut theta = ParameterVector::zeros(&spec);
        theta.values[0] = 1.0;
        theta.values[1] = 1.0;
        let h = spec.hamiltonian_at(&theta, 0.3).unwrap();
        let mut s = WeightedPauliSum::zero(3);
        s.add_term(&"ZIZ".parse().unwrap(), Complex64::new(1.0, 0.0))
            .unwrap();
        s.add_term(&"IZZ".parse().unwrap(), Complex64::new(1.0, 0.0))
            .unwrap();
        assert!(max_abs_diff(&h, &to_dense(&s, 3).unwrap()) < 1e-15);
    }

    #[test]
    fn ising_zero_coupling_is_zero() {
        let spec =
            AnsatzSpec::new(2, Topology::IsingChain, vec![], Convention::FullPauli, 1.0).unwrap();
        let h = spec
            .hamiltonian_at(&ParameterVector::new(vec![0.0]), 0.5)
            .unwrap();
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dense_matches_pauli_sum() {
        let spec = AnsatzSpec::a2_qp(3, 4, 1.3).unwrap();
        let theta = ParameterVector::new(
            (0..spec.num_params())
                .map(|i| (i as f64 * 0.37).sin())
                .collect(),
        );
        let t = 0.71;
        let h = spec.hamiltonian_at(&theta, t).unwrap();
        let s = spec.hamiltonian_sum(&theta, t).unwrap();
        assert!(hermiticity_error(&h) < 1e-12);
        assert!(max_abs_diff(&h, &to_dense(&s, 3).unwrap()) < 1e-13);
    }

    #[test]
    fn parameter_layout() {
        let spec = AnsatzSpec::a1_qp(3, 5, 1.0).unwrap();
        assert_eq!(spec.num_params(), 2 + 6 * 5);
        assert_eq!(spec.control_offsets(), vec![2, 7, 12, 17, 22, 27]);
        let labels = spec.param_labels();
        assert_eq!(labels[0], "J[0,2]");
        assert_eq!(labels[2], "a[0,x,Fourier,0]");
        assert!(spec
            .check_params(&ParameterVector::new(vec![0.0; 3]))
            .is_err());
    }

    #[test]
    fn validation_rejects_bad_controls() {
        let b = BasisFamily::fourier(2, 1.0).unwrap();
        let bad_qubit = vec![ControlEntry {
            qubit: 5,
            axis: Axis::X,
            basis: b.clone(),
        }];
        assert!(
            AnsatzSpec::new(2, Topology::QpStar, bad_qubit, Convention::FullPauli, 1.0).is_err()
        );
        let bad_time = vec![ControlEntry {
            qubit: 0,
            axis: Axis::X,
            basis: b,
        }];
        assert!(
            AnsatzSpec::new(2, Topology::QpStar, bad_time, Convention::FullPauli, 2.0).is_err()
        );
        assert!("w".parse::<Axis>().is_err());
    }

    #[test]
    fn star_target_has_transverse_drift() {
        let spec =
            AnsatzSpec::new(3, Topology::StarTarget, vec![], Convention::FullPauli, 1.0).unwrap();
        let s = spec
            .hamiltonian_sum(&ParameterVector::new(vec![1.0, 1.0]), 0.0)
            .unwrap();
        assert_eq!(s.len(), 5);
        assert!((s.coeff(&"XII".parse().unwrap()).re + 0.5).abs() < 1e-15);
    }
}
