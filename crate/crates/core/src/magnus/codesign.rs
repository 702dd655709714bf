//! Co-design computations on top of the expansion engine: coefficient
//! independence, squeezing from the perceptron and Jordan-Wigner reachability.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{edges_of, expand, GraphEdge, Resolver, SeriesMode, SymbolicHamiltonian};
use crate::ansatz::{propagate, AnsatzSpec, Axis, ControlEntry, ParameterVector, Topology};
use crate::controls::{BasisFamily, BasisKind, ControlField};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, frobenius_sq, max_abs_diff, CMat};
use crate::pauli::{Convention, Pauli, PauliString, WeightedPauliSum};
use crate::quadrature;
use crate::training::trial_rng;

/// Singular values below this fraction of the largest count as zero.
pub const SVD_REL_TOL: f64 = 1e-10;
/// Imaginary parts of Hermitian coefficients above this are reported as errors.
const IMAG_TOL: f64 = 1e-9;

/// Ising chain with local x, y and z controls on every qubit.
pub fn ising_local_spec(
    n: usize,
    kind: BasisKind,
    k: usize,
    total_time: f64,
) -> Result<AnsatzSpec> {
    let basis = BasisFamily::new(kind, k, total_time)?;
    let controls = (0..n)
        .flat_map(|q| {
            [Axis::X, Axis::Y, Axis::Z].map(|axis| ControlEntry {
                qubit: q,
                axis,
                basis: basis.clone(),
            })
        })
        .collect();
    AnsatzSpec::new(
        n,
        Topology::IsingChain,
        controls,
        Convention::FullPauli,
        total_time,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvdRow {
    pub kind: BasisKind,
    pub k: usize,
    pub samples: usize,
    pub operators: Vec<String>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

impl SvdRow {
    pub fn num_coefficients(&self) -> usize {
        self.operators.len()
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.num_coefficients()
    }

    /// Smallest singular value relative to the largest.
    pub fn min_ratio(&self) -> f64 {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        let min = self.singular_values.last().copied().unwrap_or(0.0);
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }

    pub fn csv_header(max_len: usize) -> String {
        let mut s = String::from("kind,k,samples,num_coefficients,rank");
        for i in 1..=max_len {
            s.push_str(&format!(",sigma_{i}"));
        }
        s
    }

    pub fn csv_line(&self, max_len: usize) -> String {
        let mut s = format!(
            "{},{},{},{},{}",
            kind_name(self.kind),
            self.k,
            self.samples,
            self.num_coefficients(),
            self.rank
        );
        for i in 0..max_len {
            match self.singular_values.get(i) {
                Some(v) => s.push_str(&format!(",{v:e}")),
                None => s.push(','),
            }
        }
        s
    }
}

fn kind_name(k: BasisKind) -> &'static str {
    match k {
        BasisKind::Fourier => "fourier",
        BasisKind::Gaussian => "gaussian",
        BasisKind::Legendre => "legendre",
        BasisKind::Pwc => "pwc",
        BasisKind::Polynomial => "polynomial",
    }
}

/// Singular values of the matrix whose rows are the order `<= l_max`
/// coefficient vectors at `samples` parameter draws from `[0, 1)`.
pub fn coefficient_svd(
    spec: &AnsatzSpec,
    l_max: usize,
    mode: SeriesMode,
    samples: usize,
    seed: u64,
) -> Result<SvdRow> {
    let ham = SymbolicHamiltonian::from_spec(spec);
    let exp = expand(&ham, l_max, mode)?;
    let ops = exp.operators();
    if samples < ops.len() {
        return Err(Error::Precondition(format!(
            "{samples} samples cannot resolve {} coefficients",
            ops.len()
        )));
    }
    let index: HashMap<&PauliString, usize> = ops.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut data = DMatrix::<f64>::zeros(samples, ops.len());
    for s in 0..samples {
        let mut rng = trial_rng(seed, s as u64);
        let theta = ParameterVector::new(
            (0..spec.num_params())
                .map(|_| rng.random::<f64>())
                .collect(),
        );
        let vals = exp.term_values(&Resolver::from_spec(spec, &theta)?)?;
        for (t, v) in exp.terms.iter().zip(vals) {
            if v.im.abs() > IMAG_TOL * (1.0 + v.re.abs()) {
                return Err(Error::Precondition(format!(
                    "coefficient of {} is not real: {v}",
                    t.string
                )));
            }
            data[(s, index[&t.string])] += v.re;
        }
    }
    let mut sv: Vec<f64> = data.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let max = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&v| v > SVD_REL_TOL * max).count();
    let kind = spec
        .controls
        .first()
        .map(|c| c.basis.kind)
        .unwrap_or(BasisKind::Fourier);
    let k = spec.controls.first().map(|c| c.basis.size).unwrap_or(0);
    Ok(SvdRow {
        kind,
        k,
        samples,
        operators: ops.iter().map(|p| p.to_string()).collect(),
        singular_values: sv,
        rank,
    })
}

/// `coefficient_svd` of `ising_local_spec` for every kind and basis size.
pub fn svd_sweep(
    n: usize,
    kinds: &[BasisKind],
    ks: &[usize],
    total_time: f64,
    mode: SeriesMode,
    samples: usize,
    seed: u64,
) -> Result<Vec<SvdRow>> {
    let mut rows = vec![];
    for &kind in kinds {
        for &k in ks {
            rows.push(coefficient_svd(
                &ising_local_spec(n, kind, k, total_time)?,
                2,
                mode,
                samples,
                seed,
            )?);
        }
    }
    Ok(rows)
}

/// `(J^2 / 2T) int_0^T dt2 int_0^t2 dt1 f(t1) t1` through repeated
/// antiderivatives: the double integral equals `T G(T) - 2 H(T)`.
pub fn alpha_zzx(f: &ControlField, coupling: f64, total_time: f64) -> Result<f64> {
    let g = f.antiderivative(2, total_time)?;
    let h = f.antiderivative(3, total_time)?;
    Ok(coupling * coupling / (2.0 * total_time) * (total_time * g - 2.0 * h))
}

/// The antiderivative-difference form as printed, `(J^2 / 2T)(dG - dH)`.
/// Kept for comparison; it does not equal the double integral.
pub fn alpha_zzx_printed(f: &ControlField, coupling: f64, total_time: f64) -> Result<f64> {
    let g = f.antiderivative(2, total_time)?;
    let h = f.antiderivative(3, total_time)?;
    Ok(coupling * coupling / (2.0 * total_time) * (g - h))
}

/// The double integral by nested adaptive quadrature.
pub fn alpha_zzx_quadrature(f: &ControlField, coupling: f64, total_time: f64) -> Result<f64> {
    f.eval(total_time)?;
    let inner = |t2: f64| quadrature::adaptive(|t1| f.eval_unchecked(t1) * t1, 0.0, t2, 1e-14);
    Ok(coupling * coupling / (2.0 * total_time)
        * quadrature::adaptive(inner, 0.0, total_time, 1e-13))
}

/// Perceptron whose only control is a two-term Fourier field on the output's x axis.
pub fn squeezing_spec(n: usize, total_time: f64) -> Result<AnsatzSpec> {
    let controls = vec![ControlEntry {
        qubit: n - 1,
        axis: Axis::X,
        basis: BasisFamily::fourier(2, total_time)?,
    }];
    AnsatzSpec::new(
        n,
        Topology::QpStar,
        controls,
        Convention::FullPauli,
        total_time,
    )
}

fn squeezing_theta(spec: &AnsatzSpec, coupling: f64, lambda: f64) -> ParameterVector {
    let mut v = vec![coupling; spec.num_couplings()];
    v.extend([0.0, lambda]);
    ParameterVector::new(v)
}

fn zz_string(n: usize, i: usize, j: usize, tail: Option<Pauli>) -> PauliString {
    let mut sites = vec![(i, Pauli::Z), (j, Pauli::Z)];
    if let Some(p) = tail {
        sites.push((n - 1, p));
    }
    PauliString::from_sites(n, &sites).expect("sites in range")
}

/// Order `<= 2` coefficient of `Z_0 Z_N` at field amplitude `lambda`.
pub fn alpha_zz_at_scale(spec: &AnsatzSpec, coupling: f64, lambda: f64) -> Result<f64> {
    let exp = expand(&SymbolicHamiltonian::from_spec(spec), 2, SeriesMode::Exact)?;
    let h = exp.evaluate(&Resolver::from_spec(
        spec,
        &squeezing_theta(spec, coupling, lambda),
    )?)?;
    Ok(
        h.coeff(&zz_string(spec.num_qubits, 0, spec.num_qubits - 1, None))
            .re,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub num_qubits: usize,
    pub coupling: f64,
    pub total_time: f64,
    /// Field amplitude at which the `Z_i Z_N` coefficient vanishes.
    pub lambda: f64,
    pub alpha_zz: f64,
    /// Engine coefficient of `Z_0 Z_1 X_N`, halved to match the ordered-pair sum.
    pub alpha_zzx_engine: f64,
    /// Closed form below; it counts each commutation with factor `i`, so it
    /// is a quarter of the engine value under full Pauli strings.
    pub alpha_zzx: f64,
    pub alpha_zzx_quadrature: f64,
    pub alpha_zzx_printed: f64,
    /// Mean of the field, the `X_N` coefficient of the average Hamiltonian.
    pub mean_field: f64,
    /// `||U - exp(-iT H_sq)||_F` with `H_sq = mean_field X_N + alpha_zzx_engine (S^z_in)^2 X_N`.
    pub distance: f64,
    /// `||U - exp(-iT H_eff)||_F` with the full order `<= 2` expansion.
    pub distance_truncated: f64,
    pub slices: usize,
}

/// Tunes the field amplitude until the order `<= 2` `Z_i Z_N` coefficient
/// vanishes, then compares the exact propagator with the squeezing generator.
pub fn squeezing_check(
    n: usize,
    coupling: f64,
    total_time: f64,
    slices: usize,
) -> Result<SqueezingReport> {
    if n < 3 {
        return Err(Error::InvalidSpec(
            "squeezing needs at least two input qubits".into(),
        ));
    }
    let spec = squeezing_spec(n, total_time)?;
    let zz = |l: f64| alpha_zz_at_scale(&spec, coupling, l);
    let z0 = zz(0.0)?;
    let mut hi = 1.0 / total_time;
    let mut steps = 0;
    while zz(hi)?.signum() == z0.signum() {
        hi *= 2.0;
        steps += 1;
        if steps > 60 {
            return Err(Error::Unreachable(
                "no field amplitude cancels the ZZ coefficient".into(),
            ));
        }
    }
    let mut lo = hi / 2.0;
    if steps == 0 {
        lo = 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if zz(mid)?.signum() == z0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let theta = squeezing_theta(&spec, coupling, lambda);
    let resolver = Resolver::from_spec(&spec, &theta)?;
    let exp = expand(&SymbolicHamiltonian::from_spec(&spec), 2, SeriesMode::Exact)?;
    let heff = exp.evaluate(&resolver)?;
    let alpha_zz = heff.coeff(&zz_string(n, 0, n - 1, None)).re;
    let alpha_zzx_engine = heff.coeff(&zz_string(n, 0, 1, Some(Pauli::X))).re / 2.0;

    let field = &resolver.fields[0];
    let mean_field = field.antiderivative(1, total_time)? / total_time;
    let a = alpha_zzx(field, coupling, total_time)?;

    let mut hsq = WeightedPauliSum::zero(n);
    let xn = PauliString::single(n, n - 1, Pauli::X)?;
    hsq.add_term(
        &xn,
        Complex64::new(mean_field + alpha_zzx_engine * (n - 1) as f64, 0.0),
    )?;
    for i in 0..n - 1 {
        for j in i + 1..n - 1 {
            hsq.add_term(
                &zz_string(n, i, j, Some(Pauli::X)),
                Complex64::new(2.0 * alpha_zzx_engine, 0.0),
            )?;
        }
    }
    let u = propagate(&spec, &theta, slices)?.u;
    let dist = |h: &CMat| -> Result<f64> {
        Ok(frobenius_sq(&(&u - expm_hermitian(h, total_time)?)).sqrt())
    };
    Ok(SqueezingReport {
        num_qubits: n,
        coupling,
        total_time,
        lambda,
        alpha_zz,
        alpha_zzx_engine,
        alpha_zzx: a,
        alpha_zzx_quadrature: alpha_zzx_quadrature(field, coupling, total_time)?,
        alpha_zzx_printed: alpha_zzx_printed(field, coupling, total_time)?,
        mean_field,
        distance: dist(&hsq.to_dense(Convention::FullPauli)?)?,
        distance_truncated: dist(&heff.to_dense(Convention::FullPauli)?)?,
        slices,
    })
}

/// Chain of commutations from a coupling term to a target string.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachabilityCertificate {
    pub start: PauliString,
    pub steps: Vec<GraphEdge>,
    /// Product of the edge factors.
    pub factor: Complex64,
}

impl ReachabilityCertificate {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn describe(&self, ham: &SymbolicHamiltonian) -> String {
        let mut s = self.start.to_string();
        for e in &self.steps {
            s.push_str(&format!(" -[{}]-> {}", ham.terms[e.via].string, e.target));
        }
        s
    }
}

/// Shortest commutation chain from any coupling term to `pattern`, or `None`
/// when it is not reached within `max_depth` commutations.
pub fn jw_reachability(
    ham: &SymbolicHamiltonian,
    pattern: &PauliString,
    max_depth: usize,
) -> Result<Option<ReachabilityCertificate>> {
    let target = pattern.phase_free();
    let starts: Vec<PauliString> = ham
        .terms
        .iter()
        .filter(|t| matches!(t.symbol, super::Symbol::Coupling(_)))
        .map(|t| t.string.clone())
        .collect();
    let mut parent: HashMap<PauliString, Option<GraphEdge>> = HashMap::new();
    let mut queue = VecDeque::new();
    for s in starts {
        if parent.insert(s.clone(), None).is_none() {
            queue.push_back((s, 0));
        }
    }
    while let Some((s, depth)) = queue.pop_front() {
        if s == target {
            let mut steps = vec![];
            let mut cur = s;
            while let Some(Some(e)) = parent.get(&cur) {
                steps.push(e.clone());
                cur = e.source.clone();
            }
            steps.reverse();
            let factor = steps.iter().map(|e| e.factor).product();
            return Ok(Some(ReachabilityCertificate {
                start: cur,
                steps,
                factor,
            }));
        }
        if depth == max_depth {
            continue;
        }
        for e in edges_of(ham, &s)? {
            if !parent.contains_key(&e.target) {
                parent.insert(e.target.clone(), Some(e.clone()));
                queue.push_back((e.target, depth + 1));
            }
        }
    }
    Ok(None)
}

/// Replays a certificate with dense commutators and returns the largest
/// entry deviation from `factor * target`.
pub fn replay_certificate(
    ham: &SymbolicHamiltonian,
    cert: &ReachabilityCertificate,
) -> Result<f64> {
    let mut m = cert.start.to_dense(Convention::FullPauli)?;
    let mut last = &cert.start;
    for e in &cert.steps {
        if &e.source != last {
            return Err(Error::Precondition(
                "certificate steps are not chained".into(),
            ));
        }
        let h = ham.terms[e.via].string.to_dense(Convention::FullPauli)?
            * Complex64::new(ham.terms[e.via].weight, 0.0);
        m = &h * &m - &m * &h;
        last = &e.target;
    }
    let expect = last.to_dense(Convention::FullPauli)? * cert.factor;
    Ok(max_abs_diff(&m, &expect))
}

/// Graph of the XChain Hamiltonian with z controls, the setting of the
/// Jordan-Wigner chains.
pub fn xchain_z_hamiltonian(n: usize, total_time: f64) -> Result<SymbolicHamiltonian> {
    let controls = (0..n)
        .map(|q| ControlEntry {
            qubit: q,
            axis: Axis::Z,
            basis: BasisFamily::fourier(1, total_time).expect("positive time"),
        })
        .collect();
    let spec = AnsatzSpec::new(
        n,
        Topology::XChain,
        controls,
        Convention::FullPauli,
        total_time,
    )?;
    Ok(SymbolicHamiltonian::from_spec(&spec))
}
