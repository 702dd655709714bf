//! Hessians and critical-point classification, local-surjectivity scans,
//! the Gamma-matrix rank/signature theory, and Haar Monte-Carlo checks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{
    dynamical_derivatives, loss_and_gradient, propagate, unitary_derivatives, AnsatzSpec,
    ParameterVector,
};
use crate::error::{Error, Result};
use crate::linalg::{haar_unitary, identity, trace_product, CMat};
use crate::pauli::{enumerate_strings, trace_with, Convention, PauliString};
use crate::training::trial_rng;

/// Central-difference step of the fd Hessian.
pub const FD_STEP: f64 = 1e-4;
/// Largest accepted `max |H - H^T|` of an fd Hessian before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-6;
/// Gradient norm below which a point counts as critical.
pub const CRITICAL_GRAD_TOL: f64 = 1e-4;
/// Zero-eigenvalue threshold relative to `max |lambda|`.
pub const ZERO_EIG_REL_TOL: f64 = 1e-6;
/// Largest qubit count of an exhaustive string scan.
pub const SCAN_QUBIT_CAP: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMethod {
    /// Central differences of the analytic gradient.
    FdOfAnalyticGrad,
    /// `Re Tr(chi {mu_a, mu_b})` with `chi = U^dag W`, valid at critical points.
    AnalyticAtCp,
}

/// Symmetrized Hessian of the normalized loss.
#[derive(Clone, Debug)]
pub struct Hessian {
    pub matrix: DMatrix<f64>,
    /// `max |H - H^T|` before symmetrization (zero for the analytic method).
    pub asymmetry: f64,
    pub grad_norm: f64,
    pub loss: f64,
}

/// Hessian of the normalized loss `2^-(N+1) ||U - W||_F^2` at `theta`.
pub fn hessian(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    w: &CMat,
    m: usize,
    method: HessianMethod,
) -> Result<Hessian> {
    let (loss, g) = loss_and_gradient(spec, theta, w, m, true)?;
    let grad_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let p = theta.len();
    match method {
        HessianMethod::FdOfAnalyticGrad => {
            let cols: Vec<Vec<f64>> = (0..p)
                .into_par_iter()
                .map(|a| {
                    let shifted = |s: f64| {
                        let mut t = theta.clone();
                        t.values[a] += s;
                        loss_and_gradient(spec, &t, w, m, true).map(|r| r.1)
                    };
                    let (gp, gm) = (shifted(FD_STEP)?, shifted(-FD_STEP)?);
                    Ok(gp
                        .iter()
                        .zip(&gm)
                        .map(|(x, y)| (x - y) / (2.0 * FD_STEP))
                        .collect())
                })
                .collect::<Result<_>>()?;
            let raw = DMatrix::from_fn(p, p, |i, j| cols[j][i]);
            let asymmetry = (0..p)
                .flat_map(|i| (0..p).map(move |j| (i, j)))
                .map(|(i, j)| (raw[(i, j)] - raw[(j, i)]).abs())
                .fold(0.0, f64::max);
            let matrix = (&raw + raw.transpose()) * 0.5;
            Ok(Hessian {
                matrix,
                asymmetry,
                grad_norm,
                loss,
            })
        }
        HessianMethod::AnalyticAtCp => {
            if grad_norm >= CRITICAL_GRAD_TOL {
                return Err(Error::Precondition(format!(
                    "analytic-at-cp Hessian needs |grad| < {CRITICAL_GRAD_TOL:e}, got {grad_norm:e}"
                )));
            }
            let u = propagate(spec, theta, m)?.u;
            let chi = u.adjoint() * w;
            let mu = dynamical_derivatives(spec, theta, m)?;
            let left: Vec<CMat> = mu.iter().map(|x| &chi * x).collect();
            let right: Vec<CMat> = mu.iter().map(|x| x * &chi).collect();
            let f = 2f64.powi(-(spec.num_qubits as i32 + 1));
            let rows: Vec<Vec<f64>> = (0..p)
                .into_par_iter()
                .map(|a| {
                    (0..p)
                        .map(|b| {
                            // Tr(chi mu_a mu_b) + Tr(mu_a chi mu_b)
                            let t =
                                trace_product(&left[a], &mu[b]) + trace_product(&right[a], &mu[b]);
                            f * t.re
                        })
                        .collect()
                })
                .collect();
            let raw = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
            let matrix = (&raw + raw.transpose()) * 0.5;
            Ok(Hessian {
                matrix,
                asymmetry: 0.0,
                grad_norm,
                loss,
            })
        }
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(h: &DMatrix<f64>) -> Result<Vec<f64>> {
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Hessian entry".into()));
    }
    let mut e: Vec<f64> = SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Minimum,
    Maximum,
    Saddle,
    DegenerateFlat,
}

/// Sign-pattern classification with absolute zero threshold `tol`.
pub fn classify(eigs: &[f64], tol: f64) -> Result<Classification> {
    if eigs.is_empty() {
        return Err(Error::Precondition("empty eigenvalue list".into()));
    }
    if eigs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigenvalue".into()));
    }
    let pos = eigs.iter().any(|&x| x > tol);
    let neg = eigs.iter().any(|&x| x < -tol);
    Ok(match (pos, neg) {
        (true, true) => Classification::Saddle,
        (true, false) => Classification::Minimum,
        (false, true) => Classification::Maximum,
        (false, false) => Classification::DegenerateFlat,
    })
}

/// `ZERO_EIG_REL_TOL * max |lambda|`.
pub fn relative_tolerance(eigs: &[f64]) -> f64 {
    ZERO_EIG_REL_TOL * eigs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub method: HessianMethod,
    pub asymmetry: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub tolerance: f64,
    pub classification: Classification,
    pub zero_eigenvalues: usize,
}

impl CriticalPointReport {
    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue\n");
        for (i, e) in self.eigenvalues.iter().enumerate() {
            s.push_str(&format!("{i},{e:e}\n"));
        }
        s
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty")
    }
}

/// Hessian, spectrum and classification at `theta`.
pub fn analyze_critical_point(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    w: &CMat,
    m: usize,
    method: HessianMethod,
) -> Result<CriticalPointReport> {
    let h = hessian(spec, theta, w, m, method)?;
    let eigenvalues = sorted_eigenvalues(&h.matrix)?;
    let tolerance = relative_tolerance(&eigenvalues);
    let classification = classify(&eigenvalues, tolerance)?;
    let zero_eigenvalues = eigenvalues.iter().filter(|x| x.abs() <= tolerance).count();
    Ok(CriticalPointReport {
        theta: theta.values.clone(),
        loss: h.loss,
        grad_norm: h.grad_norm,
        method,
        asymmetry: h.asymmetry,
        eigenvalues,
        tolerance,
        classification,
        zero_eigenvalues,
    })
}

/// I.i.d. uniform parameter distribution on `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaDistribution {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ThetaDistribution {
    fn default() -> Self {
        ThetaDistribution { lo: 0.0, hi: 1.0 }
    }
}

impl ThetaDistribution {
    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidSpec(format!(
                "empty range [{}, {})",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!("uniform[{}, {})", self.lo, self.hi)
    }
}

/// Monte-Carlo overlap statistics of one Pauli string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapEntry {
    pub string: String,
    /// Mean over samples of the parameter-averaged `Tr(P dU_a)`.
    pub mean_re: f64,
    pub mean_im: f64,
    pub abs_mean: f64,
    pub stderr: f64,
    /// Largest `|mean_theta Tr(P dU_a)|` over parameters `a`.
    pub max_param_abs_mean: f64,
    pub max_param_stderr: f64,
    pub max_param_index: usize,
}

/// Parameter-averaged overlaps below this are treated as exact zeros.
pub const NULL_OVERLAP_TOL: f64 = 1e-12;

impl OverlapEntry {
    /// True when the mean is zero up to roundoff or within `k` standard errors.
    pub fn is_null(&self, k: f64) -> bool {
        self.abs_mean < NULL_OVERLAP_TOL || self.abs_mean < k * self.stderr
    }

    /// `|mean| / stderr`; infinite for an exact nonzero mean.
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            self.abs_mean / self.stderr
        } else if self.abs_mean > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurjectivityReport {
    pub num_qubits: usize,
    pub num_params: usize,
    pub samples: usize,
    pub distribution: String,
    /// One entry per non-identity string, in enumeration order.
    pub entries: Vec<OverlapEntry>,
}

impl SurjectivityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "string,mean_re,mean_im,abs_mean,stderr,max_param_abs_mean,max_param_stderr\n",
        );
        for e in &self.entries {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                e.string,
                e.mean_re,
                e.mean_im,
                e.abs_mean,
                e.stderr,
                e.max_param_abs_mean,
                e.max_param_stderr
            ));
        }
        s
    }
}

/// Running sums of complex samples.
#[derive(Clone, Copy, Default)]
struct Moments {
    re: f64,
    im: f64,
    sq: f64,
}

impl Moments {
    fn push(&mut self, z: Complex64) {
        self.re += z.re;
        self.im += z.im;
        self.sq += z.norm_sqr();
    }

    fn merge(&mut self, o: &Moments) {
        self.re += o.re;
        self.im += o.im;
        self.sq += o.sq;
    }

    /// Mean and the standard error `sqrt((var_re + var_im) / n)`.
    fn stats(&self, n: usize) -> (Complex64, f64) {
        let nf = n as f64;
        let mean = Complex64::new(self.re / nf, self.im / nf);
        let var = if n > 1 {
            ((self.sq - nf * mean.norm_sqr()) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, (var / nf).sqrt())
    }
}

struct ScanAcc {
    averaged: Vec<Moments>,
    per_param: Vec<Vec<Moments>>,
}

impl ScanAcc {
    fn new(strings: usize, params: usize) -> Self {
        ScanAcc {
            averaged: vec![Moments::default(); strings],
            per_param: vec![vec![Moments::default(); params]; strings],
        }
    }

    fn merge(&mut self, o: &ScanAcc) {
        for (a, b) in self.averaged.iter_mut().zip(&o.averaged) {
            a.merge(b);
        }
        for (ra, rb) in self.per_param.iter_mut().zip(&o.per_param) {
            for (a, b) in ra.iter_mut().zip(rb) {
                a.merge(b);
            }
        }
    }

    fn into_report(
        self,
        strings: &[PauliString],
        num_qubits: usize,
        samples: usize,
        distribution: String,
    ) -> SurjectivityReport {
        let num_params = self.per_param.first().map_or(0, Vec::len);
        let entries = strings
            .iter()
            .zip(self.averaged.iter().zip(&self.per_param))
            .map(|(p, (avg, per))| {
                let (mean, stderr) = avg.stats(samples);
                let (mut best, mut best_se, mut best_i) = (0.0, 0.0, 0);
                for (i, mo) in per.iter().enumerate() {
                    let (mn, se) = mo.stats(samples);
                    if mn.norm() > best {
                        (best, best_se, best_i) = (mn.norm(), se, i);
                    }
                }
                OverlapEntry {
                    string: p.to_string(),
                    mean_re: mean.re,
                    mean_im: mean.im,
                    abs_mean: mean.norm(),
                    stderr,
                    max_param_abs_mean: best,
                    max_param_stderr: best_se,
                    max_param_index: best_i,
                }
            })
            .collect();
        SurjectivityReport {
            num_qubits,
            num_params,
            samples,
            distribution,
            entries,
        }
    }
}

const SCAN_CHUNK: usize = 32;

/// Fixed-size chunks folded in parallel and merged in order, so results do
/// not depend on the thread count.
fn chunked_scan<F>(samples: usize, strings: usize, params: usize, per_sample: F) -> Result<ScanAcc>
where
    F: Fn(usize, &mut ScanAcc) -> Result<()> + Sync,
{
    let chunks: Vec<ScanAcc> = (0..samples.div_ceil(SCAN_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = ScanAcc::new(strings, params);
            for s in c * SCAN_CHUNK..((c + 1) * SCAN_CHUNK).min(samples) {
                per_sample(s, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = ScanAcc::new(strings, params);
    for c in &chunks {
        total.merge(c);
    }
    Ok(total)
}

fn check_scan_args(n: usize, samples: usize) -> Result<Vec<PauliString>> {
    if samples < 10 {
        return Err(Error::Precondition(format!(
            "surjectivity scan needs at least 10 samples, got {samples}"
        )));
    }
    if n > SCAN_QUBIT_CAP {
        return Err(Error::CapExceeded {
            what: "surjectivity scan qubits",
            got: n,
            cap: SCAN_QUBIT_CAP,
        });
    }
    Ok(enumerate_strings(n)?
        .into_iter()
        .filter(|p| !p.is_identity())
        .collect())
}

/// Monte-Carlo estimate of `E_theta Tr(P dU/dtheta_a)` for every non-identity
/// string, with sample `s` drawn from `trial_rng(seed, s)`.
pub fn surjectivity_scan(
    spec: &AnsatzSpec,
    samples: usize,
    dist: ThetaDistribution,
    m: usize,
    seed: u64,
) -> Result<SurjectivityReport> {
    dist.validate()?;
    let strings = check_scan_args(spec.num_qubits, samples)?;
    let p = spec.num_params();
    let acc = chunked_scan(samples, strings.len(), p, |s, acc| {
        let mut rng = trial_rng(seed, s as u64);
        let theta =
            ParameterVector::new((0..p).map(|_| rng.random_range(dist.lo..dist.hi)).collect());
        let (_, du) = unitary_derivatives(spec, &theta, m)?;
        for (i, ps) in strings.iter().enumerate() {
            let mut avg = Complex64::new(0.0, 0.0);
            for (a, d) in du.iter().enumerate() {
                let z = trace_with(d, ps, Convention::FullPauli);
                acc.per_param[i][a].push(z);
                avg += z;
            }
            acc.averaged[i].push(avg / p as f64);
        }
        Ok(())
    })?;
    Ok(acc.into_report(&strings, spec.num_qubits, samples, dist.describe()))
}

/// The scan with the ansatz replaced by independent Haar unitaries: each
/// sample and generator `h` contributes `-i Tr(P U_T U_tau^dag h U_tau)`.
pub fn haar_overlap_scan(
    n: usize,
    generators: &[PauliString],
    samples: usize,
    seed: u64,
) -> Result<SurjectivityReport> {
    let strings = check_scan_args(n, samples)?;
    if generators.is_empty() {
        return Err(Error::Precondition("no generators".into()));
    }
    let hs: Vec<CMat> = generators
        .iter()
        .map(|g| g.to_dense(Convention::FullPauli))
        .collect::<Result<_>>()?;
    let d = 1usize << n;
    let mi = Complex64::new(0.0, -1.0);
    let acc = chunked_scan(samples, strings.len(), hs.len(), |s, acc| {
        let mut rng = trial_rng(seed, s as u64);
        let ut = haar_unitary(d, &mut rng);
        let ops: Vec<CMat> = hs
            .iter()
            .map(|h| {
                let ur = haar_unitary(d, &mut rng);
                &ut * ur.adjoint() * h * &ur * mi
            })
            .collect();
        for (i, ps) in strings.iter().enumerate() {
            let mut avg = Complex64::new(0.0, 0.0);
            for (a, o) in ops.iter().enumerate() {
                let z = trace_with(o, ps, Convention::FullPauli);
                acc.per_param[i][a].push(z);
                avg += z;
            }
            acc.averaged[i].push(avg / ops.len() as f64);
        }
        Ok(())
    })?;
    Ok(acc.into_report(&strings, n, samples, "haar".into()))
}

/// Diagonal of Gamma for a critical point whose `chi` has `n` eigenvalues
/// `-1`, with closed-form rank and signature printed alongside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSpectrum {
    pub d: usize,
    pub n: usize,
    /// `d` diagonal entries, then the real-part and imaginary-part pair blocks.
    pub entries: Vec<f64>,
    pub rank: usize,
    pub signature: i64,
    /// `d(d - 2n) + 2 n^2`, the count of nonzero entries.
    pub rank_formula: i64,
    /// `d(d - 2n) + 2 d n^2` as printed in the source derivation.
    pub printed_rank: i64,
    /// `d(d - 2n)`.
    pub signature_formula: i64,
}

impl GammaSpectrum {
    pub fn classification(&self) -> Classification {
        let r = self.rank as i64;
        if self.signature == r {
            Classification::Minimum
        } else if self.signature == -r {
            Classification::Maximum
        } else {
            Classification::Saddle
        }
    }
}

pub fn gamma_spectrum(num_qubits: usize, n: usize) -> Result<GammaSpectrum> {
    let d = 1usize << num_qubits;
    if n > d {
        return Err(Error::IndexOutOfRange {
            index: n,
            size: d + 1,
        });
    }
    let s: Vec<f64> = (0..d).map(|i| if i < n { -1.0 } else { 1.0 }).collect();
    let mut entries: Vec<f64> = s.iter().map(|x| 2.0 * x).collect();
    let pairs: Vec<f64> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .map(|(i, j)| 2.0 * (s[i] + s[j]))
        .collect();
    entries.extend_from_slice(&pairs);
    entries.extend_from_slice(&pairs);
    let rank = entries.iter().filter(|&&x| x != 0.0).count();
    let signature = entries
        .iter()
        .map(|&x| (x > 0.0) as i64 - (x < 0.0) as i64)
        .sum();
    let (di, ni) = (d as i64, n as i64);
    Ok(GammaSpectrum {
        d,
        n,
        entries,
        rank,
        signature,
        rank_formula: di * (di - 2 * ni) + 2 * ni * ni,
        printed_rank: di * (di - 2 * ni) + 2 * di * ni * ni,
        signature_formula: di * (di - 2 * ni),
    })
}

/// `(loss, multiplicity)` pairs sorted by loss.
pub type LossSpectrum = Vec<(f64, usize)>;

fn tally(losses: impl Iterator<Item = f64>) -> LossSpectrum {
    // losses are small integers up to rounding
    let mut m: BTreeMap<i64, usize> = BTreeMap::new();
    for l in losses {
        *m.entry((l * 1e6).round() as i64).or_default() += 1;
    }
    m.into_iter().map(|(k, c)| (k as f64 * 1e-6, c)).collect()
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut p: Vec<usize> = (0..d).collect();
    heap_permute(d, &mut p, &mut out);
    out
}

fn heap_permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k {
        heap_permute(k - 1, p, out);
        let j = if k % 2 == 0 { i } else { 0 };
        p.swap(j, k - 1);
    }
}

/// Largest qubit count for the permutation brute force (`d! ` candidates).
pub const PERMUTATION_QUBIT_CAP: usize = 3;

/// Unnormalized losses of `U = W Pi` over every column permutation `Pi`
/// with `chi = Pi^dag` Hermitian (the critical-point condition).
pub fn permutation_critical_losses(w: &CMat) -> Result<LossSpectrum> {
    let d = w.nrows();
    if d > 1 << PERMUTATION_QUBIT_CAP {
        return Err(Error::CapExceeded {
            what: "permutation brute-force dimension",
            got: d,
            cap: 1 << PERMUTATION_QUBIT_CAP,
        });
    }
    let mut losses = vec![];
    for perm in permutations(d) {
        let involution = (0..d).all(|i| perm[perm[i]] == i);
        if !involution {
            continue;
        }
        let u = CMat::from_fn(d, d, |i, j| w[(i, perm[j])]);
        losses.push(crate::linalg::frobenius_sq(&(&u - w)));
    }
    Ok(tally(losses.into_iter()))
}

/// Unnormalized losses of `U = W D` over every sign pattern `D = diag(+-1)`,
/// i.e. every Hermitian `chi` diagonal in the basis of `W`.
pub fn sign_flip_critical_losses(w: &CMat) -> Result<LossSpectrum> {
    let d = w.nrows();
    if d > 1 << PERMUTATION_QUBIT_CAP {
        return Err(Error::CapExceeded {
            what: "sign-flip brute-force dimension",
            got: d,
            cap: 1 << PERMUTATION_QUBIT_CAP,
        });
    }
    let losses = (0u32..1 << d).map(|mask| {
        let u = CMat::from_fn(d, d, |i, j| {
            if mask >> j & 1 == 1 {
                -w[(i, j)]
            } else {
                w[(i, j)]
            }
        });
        crate::linalg::frobenius_sq(&(&u - w))
    });
    Ok(tally(losses))
}

/// Monte-Carlo mean of a complex statistic with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaResidual {
    pub mean_re: f64,
    pub mean_im: f64,
    pub abs_mean: f64,
    pub stderr: f64,
}

impl LemmaResidual {
    fn from_moments(m: &Moments, n: usize) -> Self {
        let (mean, stderr) = m.stats(n);
        LemmaResidual {
            mean_re: mean.re,
            mean_im: mean.im,
            abs_mean: mean.norm(),
            stderr,
        }
    }

    /// `|mean| <= k * stderr`.
    pub fn within(&self, k: f64) -> bool {
        self.abs_mean <= k * self.stderr
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarCheckReport {
    pub num_qubits: usize,
    pub samples: usize,
    /// `Tr(P U_1 U_2^dag h U_2)` over independent Haar `U_1, U_2`.
    pub lemma1: LemmaResidual,
    /// `Tr(U M)` over Haar `U`.
    pub lemma2: LemmaResidual,
}

pub const HAAR_QUBIT_CAP: usize = 4;

/// Haar Monte-Carlo residuals of the two zero-mean lemmas.
pub fn haar_checks(
    n: usize,
    samples: usize,
    p: &PauliString,
    h: &PauliString,
    m_op: &CMat,
    seed: u64,
) -> Result<HaarCheckReport> {
    if n > HAAR_QUBIT_CAP {
        return Err(Error::CapExceeded {
            what: "Haar check qubits",
            got: n,
            cap: HAAR_QUBIT_CAP,
        });
    }
    if samples < 100 {
        return Err(Error::Precondition(format!(
            "Haar checks need at least 100 samples, got {samples}"
        )));
    }
    let d = 1usize << n;
    if p.num_qubits() != n || h.num_qubits() != n || m_op.nrows() != d || m_op.ncols() != d {
        return Err(Error::ShapeMismatch(
            "Haar check operators do not match the qubit count".into(),
        ));
    }
    let hd = h.to_dense(Convention::FullPauli)?;
    let (mut l1, mut l2) = (Moments::default(), Moments::default());
    let mut rng = trial_rng(seed, 0);
    for _ in 0..samples {
        let u1 = haar_unitary(d, &mut rng);
        let u2 = haar_unitary(d, &mut rng);
        let inner = &u1 * u2.adjoint() * &hd * &u2;
        l1.push(trace_with(&inner, p, Convention::FullPauli));
        l2.push(trace_product(&u1, m_op));
    }
    Ok(HaarCheckReport {
        num_qubits: n,
        samples,
        lemma1: LemmaResidual::from_moments(&l1, samples),
        lemma2: LemmaResidual::from_moments(&l2, samples),
    })
}

/// `Tr(dU/dtheta_a)` for every parameter.
pub fn derivative_traces(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    m: usize,
) -> Result<Vec<Complex64>> {
    let (_, du) = unitary_derivatives(spec, theta, m)?;
    let id = identity(spec.dim());
    Ok(du.iter().map(|x| trace_product(x, &id)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{Axis, ControlEntry, Topology};
    use crate::controls::BasisFamily;
    use crate::linalg::expm_hermitian;
    use crate::pauli::Pauli;

    fn single_x() -> AnsatzSpec {
        let entry = ControlEntry {
            qubit: 0,
            axis: Axis::X,
            basis: BasisFamily::pwc(1, 1.0).unwrap(),
        };
        AnsatzSpec::new(1, Topology::QpStar, vec![entry], Convention::FullPauli, 1.0).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify(&[1.0, 2.0, 3.0], 1e-9).unwrap(),
            Classification::Minimum
        );
        assert_eq!(
            classify(&[-1.0, 0.0, 2.0], 1e-9).unwrap(),
            Classification::Saddle
        );
        assert_eq!(
            classify(&[-1.0, 0.0], 1e-9).unwrap(),
            Classification::Maximum
        );
        assert_eq!(
            classify(&[1e-12, -1e-12], 1e-9).unwrap(),
            Classification::DegenerateFlat
        );
        assert!(classify(&[], 1e-9).is_err());
    }

    #[test]
    fn toy_hessian_positive_at_minimum() {
        let spec = single_x();
        let x = PauliString::single(1, 0, Pauli::X)
            .unwrap()
            .to_dense(Convention::FullPauli)
            .unwrap();
        let w = expm_hermitian(&x, 1.0).unwrap();
        let theta = ParameterVector::new(vec![1.0]);
        for method in [HessianMethod::FdOfAnalyticGrad, HessianMethod::AnalyticAtCp] {
            let r = analyze_critical_point(&spec, &theta, &w, 50, method).unwrap();
            assert_eq!(r.classification, Classification::Minimum);
            // L = 1 - cos(theta - 1), so L'' = 1 at the minimum
            assert!((r.eigenvalues[0] - 1.0).abs() < 1e-6, "{:?}", r.eigenvalues);
        }
    }

    #[test]
    fn analytic_requires_critical_point() {
        let spec = single_x();
        let w = identity(2);
        let theta = ParameterVector::new(vec![0.7]);
        assert!(matches!(
            hessian(&spec, &theta, &w, 20, HessianMethod::AnalyticAtCp),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn gamma_examples() {
        let g0 = gamma_spectrum(2, 0).unwrap();
        assert_eq!((g0.rank, g0.signature), (16, 16));
        assert_eq!(g0.entries.len(), 16);
        let gd = gamma_spectrum(2, 4).unwrap();
        assert_eq!((gd.rank, gd.signature), (16, -16));
        let g1 = gamma_spectrum(2, 1).unwrap();
        assert_eq!(g1.signature, g1.signature_formula);
        assert_eq!(g1.rank as i64, g1.rank_formula);
        assert_eq!(g1.classification(), Classification::Saddle);
        assert!(gamma_spectrum(1, 3).is_err());
    }

    #[test]
    fn single_qubit_brute_force() {
        let mut rng = trial_rng(5, 0);
        let w = haar_unitary(2, &mut rng);
        let perm = permutation_critical_losses(&w).unwrap();
        assert_eq!(perm.len(), 2);
        assert!(perm[0].0.abs() < 1e-9 && (perm[1].0 - 4.0).abs() < 1e-9);
        let flips = sign_flip_critical_losses(&w).unwrap();
        let counts: Vec<usize> = flips.iter().map(|x| x.1).collect();
        assert_eq!(counts, vec![1, 2, 1]);
        assert!((flips[2].0 - 8.0).abs() < 1e-9);
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn zero_operator_gives_zero_lemma2() {
        let p = PauliString::single(1, 0, Pauli::X).unwrap();
        let h = PauliString::single(1, 0, Pauli::Z).unwrap();
        let r = haar_checks(1, 200, &p, &h, &CMat::zeros(2, 2), 1).unwrap();
        assert_eq!(r.lemma2.abs_mean, 0.0);
        assert!(r.lemma2.within(4.0));
        assert!(haar_checks(1, 50, &p, &h, &CMat::zeros(2, 2), 1).is_err());
    }

    #[test]
    fn single_x_overlap_nonzero() {
        let r = surjectivity_scan(&single_x(), 1000, ThetaDistribution::default(), 20, 3).unwrap();
        let x = r.entries.iter().find(|e| e.string == "X").unwrap();
        assert!(x.z_score() > 3.0);
        // E Tr(X dU) = -2i sin(1) for U = exp(-i a X), a ~ U[0,1)
        assert!((x.mean_im + 2.0 * 1f64.sin()).abs() < 4.0 * x.stderr);
        assert!(surjectivity_scan(&single_x(), 5, ThetaDistribution::default(), 20, 3).is_err());
    }
}
