//! Midpoint-rule propagation and exact derivatives of the sliced propagator.
//!
//! `U = S_{M-1} ... S_0` with `S_j = exp(-i dt H(t_j + dt/2))`. Derivatives
//! differentiate this product exactly: each slice contributes
//! `L_j D_j[dH_j] R_j`, where `D_j` is the Frechet derivative of the slice
//! exponential in the eigenbasis of `H_j`.

use num_complex::Complex64;

use super::{AnsatzSpec, Compiled, ParameterVector, Term};
use crate::controls::BasisKind;
use crate::error::{Error, Result};
use crate::linalg::{eigh, identity, unitarity_error, CMat, HermitianEigen};

/// Largest tolerated `max |U^dag U - I|`.
pub const UNITARITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub u: CMat,
    pub slices: usize,
    pub total_time: f64,
    /// Per-slice propagators, earliest first, when requested.
    pub slice_unitaries: Option<Vec<CMat>>,
}

/// One time slice: midpoint, field values, eigendecomposition and propagator.
pub struct SliceData {
    pub t_mid: f64,
    pub dt: f64,
    pub(crate) fields: Vec<(Vec<f64>, f64)>,
    pub eig: HermitianEigen,
    pub s: CMat,
}

/// `ceil(400 T (1 + ||H||))` with `||H||` bounded by the sum of coefficient magnitudes.
pub fn default_slice_count(spec: &AnsatzSpec, theta: &ParameterVector) -> usize {
    let mut bound: f64 = theta.couplings(spec).iter().map(|j| j.abs()).sum();
    bound += spec.drift().iter().map(|(_, c)| c.norm()).sum::<f64>();
    for (i, c) in spec.controls.iter().enumerate() {
        let sup = |k: usize| match c.basis.kind {
            BasisKind::Polynomial => spec.total_time.powi(k as i32).max(1.0),
            _ => 1.0,
        };
        bound += theta
            .control(spec, i)
            .iter()
            .enumerate()
            .map(|(k, a)| a.abs() * sup(k))
            .sum::<f64>();
    }
    (400.0 * spec.total_time * (1.0 + bound)).ceil().max(1.0) as usize
}

fn slices(
    c: &Compiled,
    theta: &ParameterVector,
    t0: f64,
    t1: f64,
    m: usize,
) -> Result<Vec<SliceData>> {
    if m == 0 {
        return Err(Error::Precondition(
            "slice count M must be at least 1".into(),
        ));
    }
    c.spec.check_params(theta)?;
    let dt = (t1 - t0) / m as f64;
    (0..m)
        .map(|j| {
            let t_mid = t0 + (j as f64 + 0.5) * dt;
            let fields = c.field_values(theta, t_mid);
            let h = c.hamiltonian_from_fields(theta, &fields);
            let eig = eigh(&h)?;
            let s = eig.apply_fn(|l| Complex64::from_polar(1.0, -dt * l));
            Ok(SliceData {
                t_mid,
                dt,
                fields,
                eig,
                s,
            })
        })
        .collect()
}

fn check_unitary(u: &CMat) -> Result<()> {
    let e = unitarity_error(u);
    if !(e < UNITARITY_TOL) {
        return Err(Error::NonUnitary(e));
    }
    Ok(())
}

/// Propagator over `[t0, t1]` with `m` slices.
pub fn propagate_window(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    t0: f64,
    t1: f64,
    m: usize,
    keep_slices: bool,
) -> Result<PropagationResult> {
    let c = Compiled::new(spec)?;
    let sl = slices(&c, theta, t0, t1, m)?;
    let mut u = identity(spec.dim());
    for s in &sl {
        u = &s.s * u;
    }
    check_unitary(&u)?;
    Ok(PropagationResult {
        u,
        slices: m,
        total_time: t1 - t0,
        slice_unitaries: keep_slices.then(|| sl.into_iter().map(|s| s.s).collect()),
    })
}

/// Time-ordered propagator `U(T; theta)` with `m` midpoint slices.
pub fn propagate(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    m: usize,
) -> Result<PropagationResult> {
    propagate_window(spec, theta, 0.0, spec.total_time, m, false)
}

/// Divided differences of `exp(-i dt lambda)`.
fn gamma(eig: &HermitianEigen, dt: f64) -> CMat {
    let l = &eig.values;
    let d = l.len();
    let e: Vec<Complex64> = l
        .iter()
        .map(|&x| Complex64::from_polar(1.0, -dt * x))
        .collect();
    CMat::from_fn(d, d, |m, n| {
        let diff = l[m] - l[n];
        if diff.abs() * dt < 1e-7 {
            // second-order expansion around the midpoint eigenvalue
            let mid = 0.5 * (l[m] + l[n]);
            let em = Complex64::from_polar(1.0, -dt * mid);
            em * Complex64::new(0.0, -dt) * (1.0 - dt * dt * diff * diff / 24.0)
        } else {
            (e[m] - e[n]) / diff
        }
    })
}

/// `P V` for a monomial `P`.
fn apply_term(term: &Term, v: &CMat) -> CMat {
    let mut out = CMat::zeros(v.nrows(), v.ncols());
    for (col, &(row, val)) in term.mono.iter().enumerate() {
        for k in 0..v.ncols() {
            out[(row, k)] = val * v[(col, k)];
        }
    }
    out
}

/// Prefix products `R_j = S_{j-1} ... S_0`, plus the full propagator.
fn prefixes(sl: &[SliceData], d: usize) -> (Vec<CMat>, CMat) {
    let mut r = Vec::with_capacity(sl.len());
    let mut acc = identity(d);
    for s in sl {
        r.push(acc.clone());
        acc = &s.s * &acc;
    }
    (r, acc)
}

/// Indices of every operator's parameters and the weight each slice gives them.
/// Couplings map to their own index with weight 1; a control entry maps to
/// its `K` coefficients weighted by `g_k(t_mid)`.
fn accumulate(
    c: &Compiled,
    slice: &SliceData,
    traces_coupling: &[Complex64],
    traces_control: &[Complex64],
    out: &mut [Complex64],
) {
    for (i, t) in traces_coupling.iter().enumerate() {
        out[i] += t;
    }
    for ((_, _, off), ((g, _), t)) in c
        .controls
        .iter()
        .zip(slice.fields.iter().zip(traces_control))
    {
        for (k, gk) in g.iter().enumerate() {
            out[off + k] += t * gk;
        }
    }
}

/// Loss `||U - W||_F^2` (scaled by `2^-(N+1)` when `normalized`) and its gradient.
pub fn loss_and_gradient(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    w: &CMat,
    m: usize,
    normalized: bool,
) -> Result<(f64, Vec<f64>)> {
    let c = Compiled::new(spec)?;
    let d = spec.dim();
    if w.nrows() != d || w.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "target is {}x{}, ansatz dimension {d}",
            w.nrows(),
            w.ncols()
        )));
    }
    let sl = slices(&c, theta, 0.0, spec.total_time, m)?;
    let (r, u) = prefixes(&sl, d);
    check_unitary(&u)?;
    let mut grad = vec![Complex64::new(0.0, 0.0); spec.num_params()];
    // B = W^dag L_j, built backwards
    let mut wl = w.adjoint();
    let mut tc = vec![Complex64::new(0.0, 0.0); c.couplings.len()];
    let mut tf = vec![Complex64::new(0.0, 0.0); c.controls.len()];
    for j in (0..sl.len()).rev() {
        let s = &sl[j];
        let v = &s.eig.vectors;
        let g = gamma(&s.eig, s.dt);
        let qt = v.adjoint() * &r[j] * (&wl * v);
        let y = CMat::from_fn(d, d, |n, mm| qt[(n, mm)] * g[(mm, n)]);
        let z = v * y * v.adjoint();
        for (t, term) in tc.iter_mut().zip(&c.couplings) {
            *t = term.trace_with(&z);
        }
        for (t, (term, _, _)) in tf.iter_mut().zip(&c.controls) {
            *t = term.trace_with(&z);
        }
        accumulate(&c, s, &tc, &tf, &mut grad);
        wl = wl * &s.s;
    }
    let raw = crate::linalg::frobenius_sq(&(&u - w));
    let (loss, scale) = if normalized {
        let f = 2f64.powi(-(spec.num_qubits as i32 + 1));
        (f * raw, -2.0 * f)
    } else {
        (raw, -2.0)
    };
    let grad: Vec<f64> = grad.iter().map(|g| scale * g.re).collect();
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss or gradient".into()));
    }
    Ok((loss, grad))
}

/// `U` and `dU/dtheta_a` for every flat parameter.
pub fn unitary_derivatives(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    m: usize,
) -> Result<(CMat, Vec<CMat>)> {
    let c = Compiled::new(spec)?;
    let d = spec.dim();
    let sl = slices(&c, theta, 0.0, spec.total_time, m)?;
    let (r, u) = prefixes(&sl, d);
    check_unitary(&u)?;
    let mut du = vec![CMat::zeros(d, d); spec.num_params()];
    let mut l = identity(d);
    for j in (0..sl.len()).rev() {
        let s = &sl[j];
        let v = &s.eig.vectors;
        let g = gamma(&s.eig, s.dt);
        let a = &l * v;
        let b = v.adjoint() * &r[j];
        let piece = |term: &Term| -> CMat {
            let ht = v.adjoint() * apply_term(term, v);
            let inner = ht.component_mul(&g);
            &a * inner * &b
        };
        for (i, term) in c.couplings.iter().enumerate() {
            du[i] += piece(term);
        }
        for ((term, _, off), (gv, _)) in c.controls.iter().zip(&s.fields) {
            if gv.iter().all(|&x| x == 0.0) {
                continue;
            }
            let p = piece(term);
            for (k, &gk) in gv.iter().enumerate() {
                if gk != 0.0 {
                    du[off + k] += &p * Complex64::new(gk, 0.0);
                }
            }
        }
        l = l * &s.s;
    }
    Ok((u, du))
}

/// Dynamical derivatives `mu_a = i U^dag dU/dtheta_a`, so that `dU = -i U mu_a`.
pub fn dynamical_derivatives(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    m: usize,
) -> Result<Vec<CMat>> {
    let (u, du) = unitary_derivatives(spec, theta, m)?;
    let ud = u.adjoint() * Complex64::new(0.0, 1.0);
    Ok(du.iter().map(|x| &ud * x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{Axis, ControlEntry, Topology};
    use crate::controls::BasisFamily;
    use crate::linalg::{hermiticity_error, max_abs_diff};
    use crate::pauli::{Convention, PauliString};

    fn single_x(t: f64) -> AnsatzSpec {
        let entry = ControlEntry {
            qubit: 0,
            axis: Axis::X,
            basis: BasisFamily::fourier(1, t).unwrap(),
        };
        AnsatzSpec::new(1, Topology::QpStar, vec![entry], Convention::FullPauli, t).unwrap()
    }

    #[test]
    fn zero_parameters_give_identity() {
        let spec = AnsatzSpec::a1_qp(3, 2, 1.0).unwrap();
        for m in [1, 7] {
            let u = propagate(&spec, &ParameterVector::zeros(&spec), m)
                .unwrap()
                .u;
            assert!(max_abs_diff(&u, &identity(8)) < 1e-15);
        }
    }

    #[test]
    fn constant_x_rotation() {
        let t = std::f64::consts::FRAC_PI_2;
        let spec = single_x(t);
        let u = propagate(&spec, &ParameterVector::new(vec![1.0]), 64)
            .unwrap()
            .u;
        let x = PauliString::single(1, 0, crate::pauli::Pauli::X)
            .unwrap()
            .to_dense(Convention::FullPauli)
            .unwrap();
        assert!(max_abs_diff(&u, &(x * Complex64::new(0.0, -1.0))) < 1e-12);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let spec = AnsatzSpec::a1_qp(2, 3, 1.0).unwrap();
        let theta = ParameterVector::new(
            (0..spec.num_params())
                .map(|i| 0.3 + 0.1 * i as f64)
                .collect(),
        );
        let u = |m| propagate(&spec, &theta, m).unwrap().u;
        let (u1, u2, u4) = (u(20), u(40), u(80));
        let ratio = max_abs_diff(&u1, &u2) / max_abs_diff(&u2, &u4);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn coupling_mu_for_constant_ising() {
        let spec =
            AnsatzSpec::new(2, Topology::IsingChain, vec![], Convention::FullPauli, 0.8).unwrap();
        let mu = dynamical_derivatives(&spec, &ParameterVector::new(vec![0.7]), 10).unwrap();
        let zz = PauliString::from_sites(
            2,
            &[(0, crate::pauli::Pauli::Z), (1, crate::pauli::Pauli::Z)],
        )
        .unwrap()
        .to_dense(Convention::FullPauli)
        .unwrap();
        assert!(max_abs_diff(&mu[0], &(zz * Complex64::new(0.8, 0.0))) < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = AnsatzSpec::a2_qp(2, 3, 1.0).unwrap();
        let theta = ParameterVector::new(
            (0..spec.num_params())
                .map(|i| ((i * 7) as f64).sin())
                .collect(),
        );
        let m = 60;
        let (u, du) = unitary_derivatives(&spec, &theta, m).unwrap();
        let mu = dynamical_derivatives(&spec, &theta, m).unwrap();
        let h = 1e-5;
        for a in 0..spec.num_params() {
            let mut p = theta.clone();
            p.values[a] += h;
            let up = propagate(&spec, &p, m).unwrap().u;
            p.values[a] -= 2.0 * h;
            let um = propagate(&spec, &p, m).unwrap().u;
            let fd = (up - um) / Complex64::new(2.0 * h, 0.0);
            assert!(
                max_abs_diff(&fd, &du[a]) < 1e-8 * (1.0 + fd.norm()),
                "param {a}"
            );
            assert!(hermiticity_error(&mu[a]) < 1e-9);
            let back = &u * &mu[a] * Complex64::new(0.0, -1.0);
            assert!(max_abs_diff(&back, &du[a]) < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_unitary_derivatives() {
        let spec = AnsatzSpec::a1_qp(2, 2, 0.9).unwrap();
        let theta = ParameterVector::new(
            (0..spec.num_params())
                .map(|i| 0.2 * i as f64 - 0.5)
                .collect(),
        );
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let w = crate::linalg::haar_unitary(4, &mut rng);
        let (loss, g) = loss_and_gradient(&spec, &theta, &w, 30, true).unwrap();
        let (u, du) = unitary_derivatives(&spec, &theta, 30).unwrap();
        let direct = (&u - &w).iter().map(|z| z.norm_sqr()).sum::<f64>() / 8.0;
        assert!((loss - direct).abs() < 1e-12);
        for (a, dua) in du.iter().enumerate() {
            let expect = -0.25 * (w.adjoint() * dua).trace().re;
            assert!((g[a] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn slice_count_must_be_positive() {
        let spec = single_x(1.0);
        assert!(propagate(&spec, &ParameterVector::new(vec![1.0]), 0).is_err());
    }

    #[test]
    fn nan_parameter_rejected() {
        let spec = single_x(1.0);
        assert!(matches!(
            propagate(&spec, &ParameterVector::new(vec![f64::NAN]), 4),
            Err(Error::NonFinite(_))
        ));
    }
}
