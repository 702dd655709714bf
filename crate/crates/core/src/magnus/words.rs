//! Time-ordered integrals of coefficient words.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;

use super::{CoefficientWord, Resolver, Symbol};
use crate::controls::{BasisKind, ControlField};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, legendre_with_derivative};

/// Gauss nodes per panel.
pub const PANEL_NODES: usize = 16;
/// Minimum number of uniform panels.
pub const MIN_PANELS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Closed form when every field is a trigonometric polynomial times a
    /// polynomial, panels otherwise.
    Auto,
    Exact,
    Panels,
}

/// `sum c t^p exp(i m w0 t)`, keyed by `(m, p)`.
type QuasiPoly = BTreeMap<(i64, u32), Complex64>;

fn qp_mul(a: &QuasiPoly, b: &QuasiPoly) -> QuasiPoly {
    let mut out = QuasiPoly::new();
    for (&(m1, p1), c1) in a {
        for (&(m2, p2), c2) in b {
            *out.entry((m1 + m2, p1 + p2)).or_default() += c1 * c2;
        }
    }
    out
}

/// Antiderivative vanishing at zero.
fn qp_integrate(a: &QuasiPoly, w0: f64) -> QuasiPoly {
    let mut out = QuasiPoly::new();
    for (&(m, p), &c) in a {
        if m == 0 {
            *out.entry((0, p + 1)).or_default() += c / (p + 1) as f64;
            continue;
        }
        let iw = Complex64::new(0.0, m as f64 * w0);
        // sum_j (-1)^j p!/(p-j)! t^(p-j) e^(iwt) / (iw)^(j+1)
        let mut falling = 1.0;
        for j in 0..=p {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *out.entry((m, p - j)).or_default() += c * sign * falling / iw.powi(j as i32 + 1);
            falling *= (p - j) as f64;
        }
        let pf: f64 = (1..=p).map(|k| k as f64).product();
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        *out.entry((0, 0)).or_default() -= c * sign * pf / iw.powi(p as i32 + 1);
    }
    out
}

fn qp_at(a: &QuasiPoly, w0: f64, t: f64) -> Complex64 {
    a.iter()
        .map(|(&(m, p), &c)| c * t.powi(p as i32) * Complex64::from_polar(1.0, m as f64 * w0 * t))
        .sum()
}

fn qp_constant(v: f64) -> QuasiPoly {
    let mut q = QuasiPoly::new();
    q.insert((0, 0), Complex64::new(v, 0.0));
    q
}

fn field_quasipoly(f: &ControlField) -> Option<QuasiPoly> {
    let mut q = QuasiPoly::new();
    for (k, &a) in f.coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        match f.basis.kind {
            BasisKind::Fourier if k > 0 => {
                *q.entry((k as i64, 0)).or_default() += a / 2.0;
                *q.entry((-(k as i64), 0)).or_default() += a / 2.0;
            }
            BasisKind::Fourier | BasisKind::Polynomial | BasisKind::Legendre => {
                for (p, &c) in f.basis.monomial_coeffs(k)?.iter().enumerate() {
                    if c != 0.0 {
                        *q.entry((0, p as u32)).or_default() += a * c;
                    }
                }
            }
            _ => return None,
        }
    }
    Some(q)
}

/// Panel grid with per-panel spectral integration.
struct Panels {
    /// Panel edges.
    edges: Vec<f64>,
    /// All nodes, panel-major.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `S[i][j]`: `int_{-1}^{x_i} l_j` on the reference panel.
    integ: Vec<Vec<f64>>,
}

impl Panels {
    fn new(resolver: &Resolver) -> Self {
        let t = resolver.total_time;
        let mut n_uniform = MIN_PANELS;
        let mut edges = vec![];
        for f in &resolver.fields {
            n_uniform = n_uniform.max(4 * f.basis.size);
            if f.basis.kind == BasisKind::Pwc {
                edges.extend((1..f.basis.size).map(|k| t * k as f64 / f.basis.size as f64));
            }
        }
        edges.extend((0..=n_uniform).map(|k| t * k as f64 / n_uniform as f64));
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * t);

        let (x, w) = gauss_legendre(PANEL_NODES);
        let c: Vec<Vec<f64>> = (0..PANEL_NODES)
            .map(|k| {
                let s = (2 * k + 1) as f64 / 2.0;
                (0..PANEL_NODES)
                    .map(|j| w[j] * legendre_with_derivative(k, x[j]).0 * s)
                    .collect()
            })
            .collect();
        let q = |k: usize, xi: f64| -> f64 {
            if k == 0 {
                xi + 1.0
            } else {
                (legendre_with_derivative(k + 1, xi).0 - legendre_with_derivative(k - 1, xi).0)
                    / (2 * k + 1) as f64
            }
        };
        let integ: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                (0..PANEL_NODES)
                    .map(|j| (0..PANEL_NODES).map(|k| c[k][j] * q(k, xi)).sum())
                    .collect()
            })
            .collect();

        let mut nodes = vec![];
        let mut weights = vec![];
        for p in edges.windows(2) {
            let (a, b) = (p[0], p[1]);
            let h = (b - a) / 2.0;
            for j in 0..PANEL_NODES {
                nodes.push(a + h * (x[j] + 1.0));
                weights.push(h * w[j]);
            }
        }
        Panels {
            edges,
            nodes,
            weights,
            integ,
        }
    }

    /// Running integral at every node, and the total.
    fn integrate(&self, f: &[f64]) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; f.len()];
        let mut acc = 0.0;
        for (p, e) in self.edges.windows(2).enumerate() {
            let h = (e[1] - e[0]) / 2.0;
            let base = p * PANEL_NODES;
            let seg = &f[base..base + PANEL_NODES];
            for i in 0..PANEL_NODES {
                let s: f64 = self.integ[i].iter().zip(seg).map(|(a, b)| a * b).sum();
                out[base + i] = acc + h * s;
            }
            acc += seg
                .iter()
                .zip(&self.weights[base..base + PANEL_NODES])
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        (out, acc)
    }
}

enum Backend {
    Exact {
        w0: f64,
        fields: Vec<QuasiPoly>,
        cache: HashMap<Vec<Symbol>, QuasiPoly>,
    },
    Panels {
        grid: Panels,
        fields: Vec<Vec<f64>>,
        cache: HashMap<Vec<Symbol>, (Vec<f64>, f64)>,
    },
}

/// Evaluates words against one resolver, caching shared inner integrals.
pub struct WordEvaluator<'a> {
    resolver: &'a Resolver,
    backend: Backend,
}

impl<'a> WordEvaluator<'a> {
    pub fn new(resolver: &'a Resolver, route: Route) -> Result<Self> {
        let exact: Option<Vec<QuasiPoly>> = if route == Route::Panels {
            None
        } else {
            resolver.fields.iter().map(field_quasipoly).collect()
        };
        let backend = match (route, exact) {
            (Route::Exact, None) => {
                return Err(Error::Precondition(
                    "closed-form route needs Fourier, Legendre or polynomial fields".into(),
                ))
            }
            (_, Some(fields)) => Backend::Exact {
                w0: 2.0 * PI / resolver.total_time,
                fields,
                cache: HashMap::new(),
            },
            (_, None) => {
                let grid = Panels::new(resolver);
                let fields = resolver
                    .fields
                    .iter()
                    .map(|f| grid.nodes.iter().map(|&t| f.eval_unchecked(t)).collect())
                    .collect();
                Backend::Panels {
                    grid,
                    fields,
                    cache: HashMap::new(),
                }
            }
        };
        Ok(WordEvaluator { resolver, backend })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.backend, Backend::Exact { .. })
    }

    fn constant(&self, s: Symbol) -> Option<f64> {
        match s {
            Symbol::Unity => Some(1.0),
            Symbol::Coupling(i) => Some(self.resolver.couplings[i]),
            Symbol::Field(_) => None,
        }
    }

    /// `int_{T > t_l > ... > t_0 > 0} prod_k value(factors[l - k])(t_k)`.
    pub fn simplex_integral(&mut self, factors: &[Symbol]) -> Result<f64> {
        if factors.is_empty() {
            return Err(Error::InvalidSpec("empty coefficient word".into()));
        }
        for &s in factors {
            self.resolver.check(s)?;
        }
        // pull constants out so the cache only sees field patterns
        let mut scale = 1.0;
        let pattern: Vec<Symbol> = factors
            .iter()
            .map(|&s| match self.constant(s) {
                Some(v) => {
                    scale *= v;
                    Symbol::Unity
                }
                None => s,
            })
            .collect();
        if scale == 0.0 {
            return Ok(0.0);
        }
        let t = self.resolver.total_time;
        let v = match &mut self.backend {
            Backend::Exact { w0, fields, cache } => {
                let q = exact_suffix(&pattern, *w0, fields, cache);
                qp_at(&q, *w0, t).re
            }
            Backend::Panels {
                grid,
                fields,
                cache,
            } => panel_suffix(&pattern, grid, fields, cache).1,
        };
        Ok(scale * v)
    }

    pub fn eval(&mut self, word: &CoefficientWord) -> Result<Complex64> {
        Ok(word.prefactor() * self.simplex_integral(&word.factors)?)
    }
}

fn exact_suffix(
    pattern: &[Symbol],
    w0: f64,
    fields: &[QuasiPoly],
    cache: &mut HashMap<Vec<Symbol>, QuasiPoly>,
) -> QuasiPoly {
    if let Some(q) = cache.get(pattern) {
        return q.clone();
    }
    let f = match pattern[0] {
        Symbol::Field(i) => fields[i].clone(),
        _ => qp_constant(1.0),
    };
    let integrand = if pattern.len() == 1 {
        f
    } else {
        qp_mul(&f, &exact_suffix(&pattern[1..], w0, fields, cache))
    };
    let mut q = qp_integrate(&integrand, w0);
    q.retain(|_, c| c.norm() != 0.0);
    cache.insert(pattern.to_vec(), q.clone());
    q
}

fn panel_suffix(
    pattern: &[Symbol],
    grid: &Panels,
    fields: &[Vec<f64>],
    cache: &mut HashMap<Vec<Symbol>, (Vec<f64>, f64)>,
) -> (Vec<f64>, f64) {
    if let Some(q) = cache.get(pattern) {
        return q.clone();
    }
    let mut integrand = match pattern[0] {
        Symbol::Field(i) => fields[i].clone(),
        _ => vec![1.0; grid.nodes.len()],
    };
    if pattern.len() > 1 {
        let (inner, _) = panel_suffix(&pattern[1..], grid, fields, cache);
        for (a, b) in integrand.iter_mut().zip(inner) {
            *a *= b;
        }
    }
    let r = grid.integrate(&integrand);
    cache.insert(pattern.to_vec(), r.clone());
    r
}

/// One-off evaluation of a word.
pub fn eval_word(resolver: &Resolver, word: &CoefficientWord) -> Result<Complex64> {
    WordEvaluator::new(resolver, Route::Auto)?.eval(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controls::BasisFamily;

    fn poly(coeffs: Vec<f64>, t: f64) -> ControlField {
        ControlField::new(BasisFamily::polynomial(coeffs.len(), t).unwrap(), coeffs).unwrap()
    }

    #[test]
    fn ordered_monomials() {
        let t = 1.3;
        // f0 = t^3 at the outer time, f1 = t^2 in the middle, unity innermost
        let r = Resolver::new(
            t,
            vec![],
            vec![
                poly(vec![0.0, 0.0, 0.0, 1.0], t),
                poly(vec![0.0, 0.0, 1.0], t),
            ],
        )
        .unwrap();
        for route in [Route::Exact, Route::Panels] {
            let mut ev = WordEvaluator::new(&r, route).unwrap();
            let a = ev
                .simplex_integral(&[Symbol::Field(0), Symbol::Field(1), Symbol::Unity])
                .unwrap();
            let b = ev
                .simplex_integral(&[Symbol::Field(1), Symbol::Field(0), Symbol::Unity])
                .unwrap();
            assert!((a - t.powi(8) / 32.0).abs() < 1e-12, "{route:?} {a}");
            assert!((b - t.powi(8) / 40.0).abs() < 1e-12, "{route:?} {b}");
        }
    }

    #[test]
    fn fourier_routes_agree() {
        let t = 2.0;
        let b = BasisFamily::fourier(3, t).unwrap();
        let f = ControlField::new(b.clone(), vec![0.3, -0.7, 0.4]).unwrap();
        let g = ControlField::new(b, vec![-0.1, 0.2, 0.9]).unwrap();
        let r = Resolver::new(t, vec![1.7], vec![f, g]).unwrap();
        let words = [
            vec![Symbol::Field(0)],
            vec![Symbol::Field(1), Symbol::Field(0)],
            vec![Symbol::Field(0), Symbol::Coupling(0), Symbol::Field(1)],
            vec![
                Symbol::Field(1),
                Symbol::Field(0),
                Symbol::Field(1),
                Symbol::Field(0),
            ],
        ];
        let mut e = WordEvaluator::new(&r, Route::Exact).unwrap();
        let mut p = WordEvaluator::new(&r, Route::Panels).unwrap();
        for w in &words {
            let a = e.simplex_integral(w).unwrap();
            let b = p.simplex_integral(w).unwrap();
            assert!((a - b).abs() < 1e-11, "{w:?}: {a} vs {b}");
        }
    }

    #[test]
    fn pwc_single_window() {
        let t = 1.0;
        let f =
            ControlField::new(BasisFamily::pwc(4, t).unwrap(), vec![0.0, 2.0, 0.0, 0.0]).unwrap();
        let r = Resolver::new(t, vec![], vec![f]).unwrap();
        let mut ev = WordEvaluator::new(&r, Route::Auto).unwrap();
        assert!(!ev.is_exact());
        // int_{t1 > t0} f(t1) * 1 = 2 * int_{1/4}^{1/2} t dt
        let v = ev
            .simplex_integral(&[Symbol::Field(0), Symbol::Unity])
            .unwrap();
        assert!((v - 2.0 * (0.25 - 0.0625) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn unknown_symbol_is_an_error() {
        let r = Resolver::new(1.0, vec![], vec![]).unwrap();
        let mut ev = WordEvaluator::new(&r, Route::Auto).unwrap();
        assert!(ev.simplex_integral(&[Symbol::Field(0)]).is_err());
        assert!(ev.simplex_integral(&[]).is_err());
    }
}
