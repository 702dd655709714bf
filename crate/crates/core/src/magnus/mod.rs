//! Symbolic Magnus expansion of ansatz Hamiltonians.
//!
//! `H_eff = sum_l H^(l)` with `H^(l)` a combination of `l`-fold nested
//! commutators of `H` at ordered times `t_l > ... > t_0`. Each term is a Pauli
//! string times a sum of coefficient words: ordered products of symbols
//! (couplings, control fields, unity) integrated over the time simplex.

mod codesign;
mod words;

pub use codesign::{
    alpha_zz_at_scale, alpha_zzx, alpha_zzx_printed, alpha_zzx_quadrature, coefficient_svd,
    ising_local_spec, jw_reachability, replay_certificate, squeezing_check, squeezing_spec,
    svd_sweep, xchain_z_hamiltonian, ReachabilityCertificate, SqueezingReport, SvdRow, SVD_REL_TOL,
};
pub use words::{eval_word, Route, WordEvaluator};

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzSpec, ParameterVector};
use crate::controls::ControlField;
use crate::error::{Error, Result};
use crate::linalg::{hermiticity_error, CMat};
use crate::pauli::{commutator_term, Convention, PauliString, WeightedPauliSum};

/// Highest supported expansion order.
pub const MAX_ORDER: usize = 3;
/// Largest number of distinct nested paths kept at one depth.
pub const TERM_CAP: usize = 100_000;
/// Hermiticity tolerance of an assembled effective Hamiltonian.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Coefficient symbol of a Hamiltonian term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Unity,
    Coupling(usize),
    Field(usize),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Unity => write!(f, "1"),
            Symbol::Coupling(i) => write!(f, "J{i}"),
            Symbol::Field(i) => write!(f, "f{i}"),
        }
    }
}

/// `weight * value(symbol)(t) * string`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamTerm {
    pub symbol: Symbol,
    pub string: PauliString,
    pub weight: f64,
}

/// Hamiltonian as a list of symbolic terms over full-Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicHamiltonian {
    pub num_qubits: usize,
    pub total_time: f64,
    pub terms: Vec<HamTerm>,
}

impl SymbolicHamiltonian {
    pub fn new(num_qubits: usize, total_time: f64, terms: Vec<HamTerm>) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        for t in &terms {
            if t.string.num_qubits() != num_qubits {
                return Err(Error::LengthMismatch {
                    left: t.string.num_qubits(),
                    right: num_qubits,
                });
            }
            if t.string.is_identity() {
                return Err(Error::InvalidSpec(
                    "identity term in symbolic Hamiltonian".into(),
                ));
            }
        }
        Ok(SymbolicHamiltonian {
            num_qubits,
            total_time,
            terms: terms
                .into_iter()
                .map(|t| HamTerm {
                    string: t.string.phase_free(),
                    ..t
                })
                .collect(),
        })
    }

    /// Couplings as `Coupling(b)`, the drift as `Unity`, control entry `i` as
    /// `Field(i)`; weights carry the convention scaling.
    pub fn from_spec(spec: &AnsatzSpec) -> Self {
        let scale = spec.convention.letter_scale();
        let mut terms: Vec<HamTerm> = spec
            .coupling_strings()
            .into_iter()
            .enumerate()
            .map(|(b, s)| HamTerm {
                symbol: Symbol::Coupling(b),
                weight: scale.powi(s.weight() as i32),
                string: s,
            })
            .collect();
        for (p, c) in spec.drift().iter() {
            terms.push(HamTerm {
                symbol: Symbol::Unity,
                string: p.clone(),
                weight: c.re * scale.powi(p.weight() as i32),
            });
        }
        for (i, c) in spec.controls.iter().enumerate() {
            terms.push(HamTerm {
                symbol: Symbol::Field(i),
                string: PauliString::single(spec.num_qubits, c.qubit, c.axis.pauli())
                    .expect("validated spec"),
                weight: scale,
            });
        }
        SymbolicHamiltonian {
            num_qubits: spec.num_qubits,
            total_time: spec.total_time,
            terms,
        }
    }
}

/// Numeric values of the symbols.
#[derive(Clone, Debug)]
pub struct Resolver {
    pub total_time: f64,
    pub couplings: Vec<f64>,
    pub fields: Vec<ControlField>,
}

impl Resolver {
    pub fn new(total_time: f64, couplings: Vec<f64>, fields: Vec<ControlField>) -> Result<Self> {
        for (i, f) in fields.iter().enumerate() {
            if (f.basis.total_time - total_time).abs() > 1e-12 * total_time {
                return Err(Error::InvalidSpec(format!(
                    "field {i} is defined on a different time window"
                )));
            }
        }
        Ok(Resolver {
            total_time,
            couplings,
            fields,
        })
    }

    pub fn from_spec(spec: &AnsatzSpec, theta: &ParameterVector) -> Result<Self> {
        spec.check_params(theta)?;
        let fields = spec
            .controls
            .iter()
            .zip(spec.control_offsets())
            .map(|(c, off)| {
                ControlField::new(
                    c.basis.clone(),
                    theta.values[off..off + c.basis.size].to_vec(),
                )
            })
            .collect::<Result<_>>()?;
        Resolver::new(spec.total_time, theta.couplings(spec).to_vec(), fields)
    }

    pub(crate) fn check(&self, s: Symbol) -> Result<()> {
        match s {
            Symbol::Coupling(i) if i >= self.couplings.len() => {
                Err(Error::UnresolvedSymbol(s.to_string()))
            }
            Symbol::Field(i) if i >= self.fields.len() => {
                Err(Error::UnresolvedSymbol(s.to_string()))
            }
            _ => Ok(()),
        }
    }
}

/// Ordered product of symbols, outermost time first, times `prefactor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientWord {
    pub prefactor: Complex64Repr,
    pub factors: Vec<Symbol>,
}

/// Serializable complex number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex64Repr {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Complex64Repr {
    fn from(z: Complex64) -> Self {
        Complex64Repr { re: z.re, im: z.im }
    }
}

impl From<Complex64Repr> for Complex64 {
    fn from(z: Complex64Repr) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl CoefficientWord {
    pub fn new(prefactor: Complex64, factors: Vec<Symbol>) -> Self {
        CoefficientWord {
            prefactor: prefactor.into(),
            factors,
        }
    }

    pub fn order(&self) -> usize {
        self.factors.len().saturating_sub(1)
    }

    pub fn prefactor(&self) -> Complex64 {
        self.prefactor.into()
    }

    pub fn spec_string(&self) -> String {
        let f: Vec<String> = self.factors.iter().map(Symbol::to_string).collect();
        format!(
            "({:+e}{:+e}i)*[{}]",
            self.prefactor.re,
            self.prefactor.im,
            f.join(" ")
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MagnusTerm {
    pub order: usize,
    pub string: PauliString,
    pub words: Vec<CoefficientWord>,
}

/// Weights of the nested-commutator patterns of one order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMode {
    /// The Magnus series itself.
    Exact,
    /// Only `[H(t_l), [..., [H(t_1), H(t_0)]]]` with weight `1 / l!`.
    NestedRight,
}

/// Patterns `(pi, w)`: nesting position `p` (outermost first) carries time
/// label `pi[p]`, and the pattern enters the order-`l` term with weight `w`.
fn patterns(l: usize, mode: SeriesMode) -> Vec<(Vec<usize>, f64)> {
    match (mode, l) {
        (_, 0) => vec![(vec![0], 1.0)],
        (SeriesMode::Exact, 1) => vec![(vec![1, 0], 0.5)],
        (SeriesMode::Exact, 2) => vec![(vec![2, 1, 0], 1.0 / 6.0), (vec![0, 1, 2], 1.0 / 6.0)],
        (SeriesMode::Exact, _) => vec![
            (vec![0, 1, 2, 3], -1.0 / 12.0),
            (vec![3, 0, 1, 2], 1.0 / 12.0),
            (vec![3, 2, 1, 0], 1.0 / 12.0),
            (vec![2, 1, 0, 3], 1.0 / 12.0),
        ],
        (SeriesMode::NestedRight, l) => {
            let w = 1.0 / crate::controls::factorial(l);
            vec![((0..=l).rev().collect(), w)]
        }
    }
}

/// Symbolic expansion up to `l_max`.
#[derive(Clone, Debug)]
pub struct MagnusExpansion {
    pub num_qubits: usize,
    pub total_time: f64,
    pub l_max: usize,
    pub mode: SeriesMode,
    pub terms: Vec<MagnusTerm>,
}

type Nested = BTreeMap<(PauliString, Vec<Symbol>), Complex64>;

/// All `l`-fold nested commutators `[h_{s_0}, [h_{s_1}, ..., h_{s_l}]]`, keyed by
/// result string and symbol sequence `s` (outermost first).
fn nested_paths(ham: &SymbolicHamiltonian, l: usize) -> Result<Nested> {
    let mut cur: Nested = BTreeMap::new();
    for t in &ham.terms {
        *cur.entry((t.string.clone(), vec![t.symbol])).or_default() +=
            Complex64::new(t.weight, 0.0);
    }
    for _ in 0..l {
        let mut next: Nested = BTreeMap::new();
        for ((s, seq), c) in &cur {
            for t in &ham.terms {
                if let Some((r, f)) = commutator_term(&t.string, s)? {
                    let mut key = Vec::with_capacity(seq.len() + 1);
                    key.push(t.symbol);
                    key.extend_from_slice(seq);
                    *next.entry((r, key)).or_default() += c * f * t.weight;
                }
            }
            if next.len() > TERM_CAP {
                return Err(Error::CapExceeded {
                    what: "nested commutator paths",
                    got: next.len(),
                    cap: TERM_CAP,
                });
            }
        }
        next.retain(|_, c| c.norm() > 0.0);
        cur = next;
    }
    Ok(cur)
}

pub fn expand(
    ham: &SymbolicHamiltonian,
    l_max: usize,
    mode: SeriesMode,
) -> Result<MagnusExpansion> {
    if l_max > MAX_ORDER {
        return Err(Error::UnsupportedOrder(l_max));
    }
    let mut terms = vec![];
    for l in 0..=l_max {
        let paths = nested_paths(ham, l)?;
        let base = Complex64::new(0.0, -1.0).powi(l as i32) / ham.total_time;
        let mut words: BTreeMap<PauliString, BTreeMap<Vec<Symbol>, Complex64>> = BTreeMap::new();
        for (pi, w) in patterns(l, mode) {
            let mut pos = vec![0; l + 1];
            for (p, &k) in pi.iter().enumerate() {
                pos[k] = p;
            }
            for ((r, seq), c) in &paths {
                let factors: Vec<Symbol> = (0..=l).rev().map(|k| seq[pos[k]]).collect();
                *words
                    .entry(r.clone())
                    .or_default()
                    .entry(factors)
                    .or_default() += base * w * c;
            }
        }
        for (string, ws) in words {
            let words: Vec<CoefficientWord> = ws
                .into_iter()
                .filter(|(_, p)| p.norm() > 1e-15)
                .map(|(f, p)| CoefficientWord::new(p, f))
                .collect();
            if !words.is_empty() {
                terms.push(MagnusTerm {
                    order: l,
                    string,
                    words,
                });
            }
        }
    }
    Ok(MagnusExpansion {
        num_qubits: ham.num_qubits,
        total_time: ham.total_time,
        l_max,
        mode,
        terms,
    })
}

impl MagnusExpansion {
    /// Distinct operators over all orders, sorted.
    pub fn operators(&self) -> Vec<PauliString> {
        let mut v: Vec<PauliString> = self.terms.iter().map(|t| t.string.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn term(&self, order: usize, string: &PauliString) -> Option<&MagnusTerm> {
        self.terms
            .iter()
            .find(|t| t.order == order && &t.string == string)
    }

    /// `sum_words eval(word)` per term.
    pub fn term_values(&self, resolver: &Resolver) -> Result<Vec<Complex64>> {
        let mut ev = WordEvaluator::new(resolver, Route::Auto)?;
        self.terms
            .iter()
            .map(|t| {
                t.words
                    .iter()
                    .try_fold(Complex64::new(0.0, 0.0), |acc, w| Ok(acc + ev.eval(w)?))
            })
            .collect()
    }

    /// `H^(l)` for each order.
    pub fn evaluate_by_order(&self, resolver: &Resolver) -> Result<Vec<WeightedPauliSum>> {
        let vals = self.term_values(resolver)?;
        let mut out = vec![WeightedPauliSum::zero(self.num_qubits); self.l_max + 1];
        for (t, v) in self.terms.iter().zip(vals) {
            out[t.order].add_term(&t.string, v)?;
        }
        Ok(out)
    }

    /// `sum_l H^(l)`.
    pub fn evaluate(&self, resolver: &Resolver) -> Result<WeightedPauliSum> {
        let mut total = WeightedPauliSum::zero(self.num_qubits);
        for s in self.evaluate_by_order(resolver)? {
            total = total.add(&s)?;
        }
        Ok(total)
    }

    /// `operator,order,word,value` rows.
    pub fn to_csv(&self, resolver: &Resolver) -> Result<String> {
        let mut ev = WordEvaluator::new(resolver, Route::Auto)?;
        let mut s = String::from("operator,order,word,value_re,value_im\n");
        for t in &self.terms {
            for w in &t.words {
                let v = ev.eval(w)?;
                s.push_str(&format!(
                    "{},{},{},{:e},{:e}\n",
                    t.string,
                    t.order,
                    w.spec_string(),
                    v.re,
                    v.im
                ));
            }
        }
        Ok(s)
    }
}

/// Dense `sum_{l <= l_max} H^(l)` of an ansatz at `theta`.
pub fn effective_hamiltonian(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    l_max: usize,
    mode: SeriesMode,
) -> Result<CMat> {
    let ham = SymbolicHamiltonian::from_spec(spec);
    let exp = expand(&ham, l_max, mode)?;
    let h = exp
        .evaluate(&Resolver::from_spec(spec, theta)?)?
        .to_dense(Convention::FullPauli)?;
    let e = hermiticity_error(&h);
    if e > HERMITIAN_TOL {
        return Err(Error::Precondition(format!(
            "effective Hamiltonian not Hermitian: {e:e}"
        )));
    }
    Ok(h)
}

/// One commutation `[weight * value * via, source] = factor * value * target`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    pub source: PauliString,
    /// Index into the Hamiltonian terms.
    pub via: usize,
    pub symbol: Symbol,
    pub target: PauliString,
    pub factor: Complex64,
}

impl GraphEdge {
    /// Factor picked up when the edge is traversed against its direction, `[source, via]`.
    pub fn reverse_factor(&self) -> Complex64 {
        -self.factor
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommutationGraph {
    pub nodes: Vec<PauliString>,
    pub edges: Vec<GraphEdge>,
}

impl CommutationGraph {
    pub fn edges_from<'a>(
        &'a self,
        s: &'a PauliString,
    ) -> impl Iterator<Item = &'a GraphEdge> + 'a {
        self.edges.iter().filter(move |e| &e.source == s)
    }

    /// Largest entry error of any edge replayed on dense matrices.
    pub fn verify(&self, ham: &SymbolicHamiltonian) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for e in &self.edges {
            let h = ham.terms[e.via].string.to_dense(Convention::FullPauli)?
                * Complex64::new(ham.terms[e.via].weight, 0.0);
            let s = e.source.to_dense(Convention::FullPauli)?;
            let lhs = &h * &s - &s * &h;
            let rhs = e.target.to_dense(Convention::FullPauli)? * e.factor;
            worst = worst.max(crate::linalg::max_abs_diff(&lhs, &rhs));
        }
        Ok(worst)
    }
}

fn edges_of(ham: &SymbolicHamiltonian, s: &PauliString) -> Result<Vec<GraphEdge>> {
    let mut out = vec![];
    for (i, t) in ham.terms.iter().enumerate() {
        if let Some((r, f)) = commutator_term(&t.string, s)? {
            out.push(GraphEdge {
                source: s.clone(),
                via: i,
                symbol: t.symbol,
                target: r,
                factor: f * t.weight,
            });
        }
    }
    Ok(out)
}

/// Hamiltonian strings, everything one commutation away from them, and every
/// edge leaving those nodes.
pub fn build_graph(ham: &SymbolicHamiltonian) -> Result<CommutationGraph> {
    let mut nodes: Vec<PauliString> = ham.terms.iter().map(|t| t.string.clone()).collect();
    nodes.sort();
    nodes.dedup();
    let mut all = nodes.clone();
    for s in &nodes {
        for e in edges_of(ham, s)? {
            all.push(e.target);
        }
    }
    all.sort();
    all.dedup();
    let mut edges = vec![];
    for s in &all {
        edges.extend(edges_of(ham, s)?);
    }
    Ok(CommutationGraph { nodes: all, edges })
}
