//! Experiment configuration files (TOML).

use std::path::Path;

use aqml_core::ansatz::{AnsatzSpec, Axis, ControlEntry, Topology};
use aqml_core::controls::{BasisFamily, BasisKind, LegendreDomain};
use aqml_core::landscape::{HessianMethod, ThetaDistribution};
use aqml_core::magnus::{SeriesMode, MAX_ORDER};
use aqml_core::pauli::{Convention, PauliString};
use aqml_core::training::{
    parse_jw_pattern, qp_chain_order, target_ising, target_ising_along, target_jw, target_star,
    AdamConfig, TargetUnitary,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest qubit count any experiment accepts.
pub const QUBIT_CAP: usize = 6;
/// Largest basis size per control.
pub const BASIS_CAP: usize = 256;

/// Desk-scale defaults, against the 100 trials and 6000 epochs of the reference runs.
pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_EPOCHS: usize = 1500;
pub const REFERENCE_TRIALS: usize = 100;
pub const REFERENCE_EPOCHS: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TrainEnsemble,
    HessianAudit,
    SurjectivityScan,
    MagnusTable,
    SvdAnalysis,
    JwFidelity,
    SqueezingCheck,
    A2Construction,
    GammaTheory,
    HaarCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::TrainEnsemble,
        ExperimentKind::HessianAudit,
        ExperimentKind::SurjectivityScan,
        ExperimentKind::MagnusTable,
        ExperimentKind::SvdAnalysis,
        ExperimentKind::JwFidelity,
        ExperimentKind::SqueezingCheck,
        ExperimentKind::A2Construction,
        ExperimentKind::GammaTheory,
        ExperimentKind::HaarCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::TrainEnsemble => "train-ensemble",
            ExperimentKind::HessianAudit => "hessian-audit",
            ExperimentKind::SurjectivityScan => "surjectivity-scan",
            ExperimentKind::MagnusTable => "magnus-table",
            ExperimentKind::SvdAnalysis => "svd-analysis",
            ExperimentKind::JwFidelity => "jw-fidelity",
            ExperimentKind::SqueezingCheck => "squeezing-check",
            ExperimentKind::A2Construction => "a2-construction",
            ExperimentKind::GammaTheory => "gamma-theory",
            ExperimentKind::HaarCheck => "haar-check",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::TrainEnsemble => {
                "Adam trials against a target; final losses and convergence metrics"
            }
            ExperimentKind::HessianAudit => {
                "train, then Hessian spectra and classification of the end points"
            }
            ExperimentKind::SurjectivityScan => {
                "Monte-Carlo overlaps of dynamical derivatives with every Pauli string"
            }
            ExperimentKind::MagnusTable => {
                "symbolic Magnus terms of an ansatz, evaluated at seeded parameters"
            }
            ExperimentKind::SvdAnalysis => {
                "singular values of the Magnus coefficient map per basis kind and size"
            }
            ExperimentKind::JwFidelity => {
                "best and mean channel fidelity to a Jordan-Wigner product versus time"
            }
            ExperimentKind::SqueezingCheck => {
                "perceptron effective Hamiltonian against the squeezing generator"
            }
            ExperimentKind::A2Construction => {
                "explicit A2 schedule for the Ising target and its loss"
            }
            ExperimentKind::GammaTheory => {
                "critical-point losses, rank and signature of Gamma per n"
            }
            ExperimentKind::HaarCheck => "Haar Monte-Carlo residuals of the zero-mean lemmas",
        }
    }

    /// Blocks this experiment reads, besides the top-level keys.
    pub fn required_blocks(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::TrainEnsemble => &["ansatz", "target"],
            ExperimentKind::HessianAudit => &["ansatz", "target"],
            ExperimentKind::SurjectivityScan => &["ansatz"],
            ExperimentKind::MagnusTable => &["ansatz"],
            ExperimentKind::SvdAnalysis => &["svd"],
            ExperimentKind::JwFidelity => &["ansatz", "jw"],
            ExperimentKind::SqueezingCheck => &["squeezing"],
            ExperimentKind::A2Construction => &["a2"],
            ExperimentKind::GammaTheory => &["gamma"],
            ExperimentKind::HaarCheck => &["haar"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: Option<usize>,
    /// Relative paths resolve against the output root.
    pub output_dir: Option<String>,
    pub ansatz: Option<AnsatzBlock>,
    pub target: Option<TargetBlock>,
    pub optimizer: Option<OptimizerBlock>,
    pub scan: Option<ScanBlock>,
    pub hessian: Option<HessianBlock>,
    pub magnus: Option<MagnusBlock>,
    pub svd: Option<SvdBlock>,
    pub jw: Option<JwBlock>,
    pub squeezing: Option<SqueezingBlock>,
    pub a2: Option<A2Block>,
    pub gamma: Option<GammaBlock>,
    pub haar: Option<HaarBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Fourier x, y controls on every qubit of the perceptron.
    A1Qp,
    /// Gaussian x, y controls on every qubit plus PWC x, y on the output.
    A2Qp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisBlock {
    pub kind: BasisKind,
    pub size: usize,
    pub sigma: Option<f64>,
    pub legendre_domain: Option<LegendreDomain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    pub qubit: usize,
    pub axis: Axis,
    /// Falls back to the ansatz-level basis.
    pub basis: Option<BasisBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzBlock {
    pub num_qubits: usize,
    pub total_time: f64,
    pub preset: Option<Preset>,
    /// Basis size of a preset.
    pub k: Option<usize>,
    pub topology: Option<Topology>,
    pub convention: Option<Convention>,
    pub drift_field: Option<f64>,
    /// Axes driven on every qubit.
    pub axes: Option<Vec<Axis>>,
    pub basis: Option<BasisBlock>,
    /// Extra per-qubit controls.
    #[serde(default)]
    pub controls: Vec<ControlBlock>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Open transverse-field Ising chain in qubit order.
    Ising,
    /// The same chain laid out along the perceptron's native bonds.
    IsingQpChain,
    /// Star-coupled transverse-field Ising model.
    Star,
    /// `exp(-i T P)` for a Pauli product `P`.
    Jw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBlock {
    pub kind: TargetKind,
    pub h: Option<f64>,
    /// Defaults to the ansatz total time.
    pub time: Option<f64>,
    pub pattern: Option<String>,
}

/// Overrides on top of the desk-scale Adam defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub epochs: Option<usize>,
    pub slices: Option<usize>,
    pub grad_tol: Option<f64>,
    pub diff_tol: Option<f64>,
    pub window: Option<usize>,
    pub early_stop: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub samples: usize,
    pub slices: Option<usize>,
    pub theta_lo: Option<f64>,
    pub theta_hi: Option<f64>,
    /// Replace the ansatz by Haar-random unitaries driven by its generators.
    #[serde(default)]
    pub haar: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianBlock {
    pub method: Option<HessianMethod>,
    pub slices: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnusBlock {
    pub l_max: usize,
    pub mode: Option<SeriesMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvdBlock {
    pub num_qubits: usize,
    pub kinds: Vec<BasisKind>,
    pub sizes: Vec<usize>,
    pub total_time: f64,
    pub l_max: Option<usize>,
    pub mode: Option<SeriesMode>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JwBlock {
    pub pattern: String,
    /// Evolution times; the ansatz total time is replaced by each in turn.
    pub times: Vec<f64>,
    pub eval_slices: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezingBlock {
    pub num_qubits: usize,
    pub coupling: f64,
    pub total_time: f64,
    pub slices: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct A2Block {
    pub num_qubits: usize,
    pub n_trotter: usize,
    pub total_time: Option<f64>,
    pub field: Option<f64>,
    pub k: Option<usize>,
    pub strong_drive: Option<f64>,
    pub slices: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaBlock {
    pub num_qubits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaarBlock {
    pub num_qubits: usize,
    pub samples: usize,
    pub p: String,
    pub h: String,
    /// Pauli string used as the Hermitian operator of the trace lemma.
    pub m: String,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_qubits(what: &str, n: usize) -> Result<(), CliError> {
    if n == 0 || n > QUBIT_CAP {
        return Err(invalid(format!(
            "{what}: num_qubits = {n} outside 1..={QUBIT_CAP}"
        )));
    }
    Ok(())
}

fn check_time(what: &str, t: f64) -> Result<(), CliError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("{what}: time must be positive, got {t}")));
    }
    Ok(())
}

fn check_size(what: &str, k: usize) -> Result<(), CliError> {
    if k == 0 || k > BASIS_CAP {
        return Err(invalid(format!(
            "{what}: basis size {k} outside 1..={BASIS_CAP}"
        )));
    }
    Ok(())
}

fn parse_string(what: &str, s: &str, n: usize) -> Result<PauliString, CliError> {
    let p: PauliString = s.parse().map_err(|e| invalid(format!("{what}: {e}")))?;
    if p.num_qubits() != n {
        return Err(invalid(format!(
            "{what}: {s:?} has {} letters, expected {n}",
            p.num_qubits()
        )));
    }
    Ok(p)
}

impl BasisBlock {
    pub fn build(&self, total_time: f64) -> Result<BasisFamily, CliError> {
        check_size("basis", self.size)?;
        let mut b = BasisFamily::new(self.kind, self.size, total_time)
            .map_err(|e| invalid(format!("basis: {e}")))?;
        if self.sigma.is_some() {
            b.sigma = self.sigma;
        }
        if let Some(d) = self.legendre_domain {
            b.legendre_domain = d;
        }
        b.validate().map_err(|e| invalid(format!("basis: {e}")))?;
        Ok(b)
    }
}

impl AnsatzBlock {
    /// The ansatz with its total time replaced by `total_time`.
    pub fn build_at(&self, total_time: f64) -> Result<AnsatzSpec, CliError> {
        let n = self.num_qubits;
        check_qubits("ansatz", n)?;
        check_time("ansatz", total_time)?;
        let wrap = |e: aqml_core::Error| invalid(format!("ansatz: {e}"));
        let mut spec = match self.preset {
            Some(p) => {
                let k = self.k.ok_or_else(|| invalid("ansatz: a preset needs k"))?;
                check_size("ansatz", k)?;
                if self.axes.is_some() || self.basis.is_some() || self.topology.is_some() {
                    return Err(invalid("ansatz: preset excludes topology, axes and basis"));
                }
                match p {
                    Preset::A1Qp => AnsatzSpec::a1_qp(n, k, total_time),
                    Preset::A2Qp => AnsatzSpec::a2_qp(n, k, total_time),
                }
                .map_err(wrap)?
            }
            None => {
                let topology = self
                    .topology
                    .ok_or_else(|| invalid("ansatz: topology is required without a preset"))?;
                let default_basis = self
                    .basis
                    .as_ref()
                    .map(|b| b.build(total_time))
                    .transpose()?;
                let mut controls = vec![];
                if let Some(axes) = &self.axes {
                    let b = default_basis
                        .clone()
                        .ok_or_else(|| invalid("ansatz: axes need an ansatz-level basis"))?;
                    for q in 0..n {
                        for &axis in axes {
                            controls.push(ControlEntry {
                                qubit: q,
                                axis,
                                basis: b.clone(),
                            });
                        }
                    }
                }
                for c in &self.controls {
                    let basis = match &c.basis {
                        Some(b) => b.build(total_time)?,
                        None => default_basis.clone().ok_or_else(|| {
                            invalid(format!("ansatz: control on qubit {} has no basis", c.qubit))
                        })?,
                    };
                    controls.push(ControlEntry {
                        qubit: c.qubit,
                        axis: c.axis,
                        basis,
                    });
                }
                AnsatzSpec::new(
                    n,
                    topology,
                    controls,
                    self.convention.unwrap_or_default(),
                    total_time,
                )
                .map_err(wrap)?
            }
        };
        if let Some(c) = self.convention {
            spec.convention = c;
        }
        if let Some(h) = self.drift_field {
            spec.drift_field = h;
        }
        spec.validate().map_err(wrap)?;
        Ok(spec)
    }

    pub fn build(&self) -> Result<AnsatzSpec, CliError> {
        self.build_at(self.total_time)
    }
}

impl TargetBlock {
    pub fn build(&self, n: usize, default_time: f64) -> Result<TargetUnitary, CliError> {
        let time = self.time.unwrap_or(default_time);
        check_time("target", time)?;
        let need_h = || {
            self.h
                .ok_or_else(|| invalid("target: h is required for this kind"))
        };
        let wrap = |e: aqml_core::Error| invalid(format!("target: {e}"));
        let t = match self.kind {
            TargetKind::Ising => target_ising(n, need_h()?, time),
            TargetKind::IsingQpChain => target_ising_along(&qp_chain_order(n), need_h()?, time),
            TargetKind::Star => target_star(n, need_h()?, time),
            TargetKind::Jw => {
                let p = self
                    .pattern
                    .as_deref()
                    .ok_or_else(|| invalid("target: jw needs a pattern"))?;
                target_jw(p, time)
            }
        }
        .map_err(wrap)?;
        if t.num_qubits() != n {
            return Err(invalid(format!(
                "target: acts on {} qubits, the ansatz on {n}",
                t.num_qubits()
            )));
        }
        Ok(t)
    }
}

impl OptimizerBlock {
    pub fn build(&self) -> Result<AdamConfig, CliError> {
        let d = AdamConfig {
            epochs: DEFAULT_EPOCHS,
            ..AdamConfig::default()
        };
        let cfg = AdamConfig {
            lr: self.lr.unwrap_or(d.lr),
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            eps: self.eps.unwrap_or(d.eps),
            epochs: self.epochs.unwrap_or(d.epochs),
            slices: self.slices.unwrap_or(d.slices),
            grad_tol: self.grad_tol.unwrap_or(d.grad_tol),
            diff_tol: self.diff_tol.unwrap_or(d.diff_tol),
            window: self.window.unwrap_or(d.window),
            early_stop: self.early_stop.unwrap_or(d.early_stop),
        };
        cfg.validate()
            .map_err(|e| invalid(format!("optimizer: {e}")))?;
        Ok(cfg)
    }
}

impl ScanBlock {
    pub fn distribution(&self) -> ThetaDistribution {
        let d = ThetaDistribution::default();
        ThetaDistribution {
            lo: self.theta_lo.unwrap_or(d.lo),
            hi: self.theta_hi.unwrap_or(d.hi),
        }
    }
}

/// Findings of a dry run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub experiment: String,
    pub num_qubits: Option<usize>,
    pub num_params: Option<usize>,
    /// `4^N - 1`, the parameter count needed for local surjectivity.
    pub surjectivity_threshold: Option<usize>,
    pub over_parametrized: Option<bool>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn render(&self) -> String {
        let mut s = format!("experiment: {}\n", self.experiment);
        if let (Some(n), Some(p), Some(t)) = (
            self.num_qubits,
            self.num_params,
            self.surjectivity_threshold,
        ) {
            let flag = if p >= t {
                "over-parametrized"
            } else {
                "under-parametrized"
            };
            s.push_str(&format!(
                "ansatz: N = {n}, {p} parameters, 4^N - 1 = {t}: {flag}\n"
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Parse(format!("{}: not UTF-8: {e}", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn optimizer(&self) -> Result<AdamConfig, CliError> {
        self.optimizer.clone().unwrap_or_default().build()
    }

    fn block<'a, T>(&self, b: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        b.as_ref().ok_or_else(|| {
            invalid(format!(
                "experiment {} needs a [{name}] block",
                self.experiment.name()
            ))
        })
    }

    pub fn ansatz_block(&self) -> Result<&AnsatzBlock, CliError> {
        self.block(&self.ansatz, "ansatz")
    }
    pub fn target_block(&self) -> Result<&TargetBlock, CliError> {
        self.block(&self.target, "target")
    }
    pub fn scan_block(&self) -> Result<&ScanBlock, CliError> {
        self.block(&self.scan, "scan")
    }
    pub fn magnus_block(&self) -> Result<&MagnusBlock, CliError> {
        self.block(&self.magnus, "magnus")
    }
    pub fn svd_block(&self) -> Result<&SvdBlock, CliError> {
        self.block(&self.svd, "svd")
    }
    pub fn jw_block(&self) -> Result<&JwBlock, CliError> {
        self.block(&self.jw, "jw")
    }
    pub fn squeezing_block(&self) -> Result<&SqueezingBlock, CliError> {
        self.block(&self.squeezing, "squeezing")
    }
    pub fn a2_block(&self) -> Result<&A2Block, CliError> {
        self.block(&self.a2, "a2")
    }
    pub fn gamma_block(&self) -> Result<&GammaBlock, CliError> {
        self.block(&self.gamma, "gamma")
    }
    pub fn haar_block(&self) -> Result<&HaarBlock, CliError> {
        self.block(&self.haar, "haar")
    }

    /// Checks every block the experiment reads without running anything.
    pub fn validate(&self) -> Result<ValidationReport, CliError> {
        let mut rep = ValidationReport {
            experiment: self.experiment.name().into(),
            num_qubits: None,
            num_params: None,
            surjectivity_threshold: None,
            over_parametrized: None,
            notes: vec![],
        };
        let note_spec = |rep: &mut ValidationReport, spec: &AnsatzSpec| {
            let n = spec.num_qubits;
            let p = spec.num_params();
            let t = (1usize << (2 * n)) - 1;
            rep.num_qubits = Some(n);
            rep.num_params = Some(p);
            rep.surjectivity_threshold = Some(t);
            rep.over_parametrized = Some(p >= t);
        };
        if self.trials == Some(0) {
            return Err(invalid("trials must be at least 1"));
        }
        use ExperimentKind::*;
        match self.experiment {
            TrainEnsemble | HessianAudit => {
                let spec = self.ansatz_block()?.build()?;
                self.target_block()?
                    .build(spec.num_qubits, spec.total_time)?;
                let cfg = self.optimizer()?;
                note_spec(&mut rep, &spec);
                if self.experiment == HessianAudit {
                    if let Some(h) = &self.hessian {
                        if h.slices == Some(0) {
                            return Err(invalid("hessian: slices must be at least 1"));
                        }
                    }
                }
                let trials = self.trials();
                if trials < REFERENCE_TRIALS || cfg.epochs < REFERENCE_EPOCHS {
                    rep.notes.push(format!(
                        "desk scale: {trials} trials x {} epochs (reference runs: {REFERENCE_TRIALS} x {REFERENCE_EPOCHS})",
                        cfg.epochs
                    ));
                }
            }
            SurjectivityScan => {
                let spec = self.ansatz_block()?.build()?;
                let s = self.scan_block()?;
                if s.samples < 10 {
                    return Err(invalid(format!("scan: samples = {} below 10", s.samples)));
                }
                if spec.num_qubits > aqml_core::landscape::SCAN_QUBIT_CAP {
                    return Err(invalid(format!(
                        "scan: N = {} above the enumeration cap {}",
                        spec.num_qubits,
                        aqml_core::landscape::SCAN_QUBIT_CAP
                    )));
                }
                let d = s.distribution();
                if !(d.lo.is_finite() && d.hi.is_finite() && d.lo < d.hi) {
                    return Err(invalid(format!("scan: empty range [{}, {})", d.lo, d.hi)));
                }
                note_spec(&mut rep, &spec);
            }
            MagnusTable => {
                let spec = self.ansatz_block()?.build()?;
                let m = self.magnus_block()?;
                if m.l_max > MAX_ORDER {
                    return Err(invalid(format!(
                        "magnus: l_max = {} above the cap {MAX_ORDER}",
                        m.l_max
                    )));
                }
                note_spec(&mut rep, &spec);
            }
            SvdAnalysis => {
                let s = self.svd_block()?;
                check_qubits("svd", s.num_qubits)?;
                check_time("svd", s.total_time)?;
                if s.kinds.is_empty() || s.sizes.is_empty() {
                    return Err(invalid("svd: kinds and sizes must be non-empty"));
                }
                for &k in &s.sizes {
                    check_size("svd", k)?;
                }
                let l = s.l_max.unwrap_or(2);
                if l > MAX_ORDER {
                    return Err(invalid(format!(
                        "svd: l_max = {l} above the cap {MAX_ORDER}"
                    )));
                }
            }
            JwFidelity => {
                let a = self.ansatz_block()?;
                let j = self.jw_block()?;
                let p = parse_jw_pattern(&j.pattern).map_err(|e| invalid(format!("jw: {e}")))?;
                if p.num_qubits() != a.num_qubits {
                    return Err(invalid(format!(
                        "jw: pattern acts on {} qubits, the ansatz on {}",
                        p.num_qubits(),
                        a.num_qubits
                    )));
                }
                if j.times.is_empty() {
                    return Err(invalid("jw: times must be non-empty"));
                }
                for &t in &j.times {
                    a.build_at(t)?;
                }
                self.optimizer()?;
                note_spec(&mut rep, &a.build_at(j.times[0])?);
            }
            SqueezingCheck => {
                let s = self.squeezing_block()?;
                check_qubits("squeezing", s.num_qubits)?;
                check_time("squeezing", s.total_time)?;
                if s.num_qubits < 3 {
                    return Err(invalid("squeezing: needs at least 3 qubits"));
                }
            }
            A2Construction => {
                let a = self.a2_block()?;
                check_qubits("a2", a.num_qubits)?;
                if a.num_qubits < 2 || a.n_trotter == 0 {
                    return Err(invalid("a2: needs num_qubits >= 2 and n_trotter >= 1"));
                }
                let min_k = 3 * a.num_qubits * a.n_trotter;
                let k = a.k.unwrap_or(min_k);
                if k < min_k {
                    return Err(invalid(format!(
                        "a2: K = {k} violates the bound K >= 3 N n = {min_k}"
                    )));
                }
                if k % a.n_trotter != 0 {
                    return Err(invalid(format!(
                        "a2: K = {k} must be a multiple of n_trotter = {}",
                        a.n_trotter
                    )));
                }
                check_size("a2", k)?;
                let spec = AnsatzSpec::a2_qp(a.num_qubits, k, a.total_time.unwrap_or(1.0))
                    .map_err(|e| invalid(format!("a2: {e}")))?;
                note_spec(&mut rep, &spec);
            }
            GammaTheory => {
                let g = self.gamma_block()?;
                if g.num_qubits == 0 || g.num_qubits > 4 {
                    return Err(invalid(format!(
                        "gamma: num_qubits = {} outside 1..=4",
                        g.num_qubits
                    )));
                }
            }
            HaarCheck => {
                let h = self.haar_block()?;
                if h.num_qubits == 0 || h.num_qubits > aqml_core::landscape::HAAR_QUBIT_CAP {
                    return Err(invalid(format!(
                        "haar: num_qubits = {} outside 1..={}",
                        h.num_qubits,
                        aqml_core::landscape::HAAR_QUBIT_CAP
                    )));
                }
                if h.samples < 100 {
                    return Err(invalid(format!("haar: samples = {} below 100", h.samples)));
                }
                for (what, s) in [("haar.p", &h.p), ("haar.h", &h.h), ("haar.m", &h.m)] {
                    parse_string(what, s, h.num_qubits)?;
                }
            }
        }
        Ok(rep)
    }
}

/// Pauli string of the expected width, reported as a validation error otherwise.
pub fn pauli_arg(what: &str, s: &str, n: usize) -> Result<PauliString, CliError> {
    parse_string(what, s, n)
}
