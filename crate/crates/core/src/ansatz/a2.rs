//! Trotterized Ising schedule for the A2 perceptron (Gaussian kicks on the
//! inputs, piecewise-constant drive on the output).

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::{AnsatzSpec, Axis, ParameterVector};
use crate::controls::BasisKind;
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, identity, max_abs_diff, CMat};
use crate::pauli::{Convention, Pauli, PauliString};

/// Constructed A2 schedule.
#[derive(Clone, Debug)]
pub struct A2Schedule {
    pub spec: AnsatzSpec,
    pub theta: ParameterVector,
    pub n_trotter: usize,
    /// Output drive added in the strong-drive windows (unused for `N = 2`).
    pub strong_drive: f64,
}

/// Parameters of the construction.
#[derive(Clone, Debug)]
pub struct A2Options {
    pub total_time: f64,
    pub field: f64,
    /// Basis size; defaults to the minimum `3 N n`.
    pub k: Option<usize>,
    pub strong_drive: f64,
}

impl Default for A2Options {
    fn default() -> Self {
        A2Options {
            total_time: 1.0,
            field: 0.1,
            k: None,
            strong_drive: 20.0,
        }
    }
}

/// Builds an A2 perceptron and parameters approximating
/// `exp(-i T (sum Z_i Z_{i+1} - h sum X_i))` with `n` Trotter steps.
///
/// Each step owns `3N` windows. The output bond is the native coupling
/// `Z_{N-1} Z_N`, the output field is the PWC drive `-h`, and each input
/// receives one Gaussian kick of area `-h T / n` at the centre of the step.
/// For `N > 2`, input-input bonds come from strong-drive window pairs on the
/// output with `+-pi` echo kicks on the qubits outside the bond.
pub fn construct_a2_qp_schedule(
    n: usize,
    n_trotter: usize,
    opts: &A2Options,
) -> Result<A2Schedule> {
    if n < 2 {
        return Err(Error::Precondition(
            "A2 construction needs at least 2 qubits".into(),
        ));
    }
    if n_trotter == 0 {
        return Err(Error::Precondition("n_trotter must be at least 1".into()));
    }
    let min_k = 3 * n * n_trotter;
    let k = opts.k.unwrap_or(min_k);
    if k < min_k {
        return Err(Error::Precondition(format!(
            "basis size K = {k} below the bound K >= 3 N n = {min_k}"
        )));
    }
    if k % n_trotter != 0 {
        return Err(Error::Precondition(format!(
            "basis size K = {k} must be a multiple of n_trotter = {n_trotter}"
        )));
    }
    let t = opts.total_time;
    let spec = AnsatzSpec::a2_qp(n, k, t)?;
    let mut theta = ParameterVector::zeros(&spec);
    let per_step = k / n_trotter;
    let tau = t / n_trotter as f64;
    let w = t / k as f64;
    let sigma = spec.controls[0].basis.sigma();
    // area of a unit-height Gaussian
    let area = sigma * (2.0 * PI).sqrt();

    let find = |qubit: usize, axis: Axis, kind: BasisKind| {
        spec.controls
            .iter()
            .position(|c| c.qubit == qubit && c.axis == axis && c.basis.kind == kind)
            .expect("a2 layout")
    };
    let out = n - 1;
    let out_pwc = find(out, Axis::X, BasisKind::Pwc);
    let kicks: Vec<usize> = (0..n - 1)
        .map(|q| find(q, Axis::X, BasisKind::Gaussian))
        .collect();

    let b = opts.strong_drive;
    let inner_bonds = n.saturating_sub(2);
    // J_m J_{m+1} * 2w / b accumulates the bond angle tau over a window pair
    let j_in = if inner_bonds > 0 {
        (tau * b / (2.0 * w)).sqrt()
    } else {
        0.0
    };
    {
        let j = &mut theta.values[..spec.num_couplings()];
        for (i, ji) in j.iter_mut().enumerate() {
            *ji = if i == n - 2 { 1.0 } else { j_in };
        }
    }

    for s in 0..n_trotter {
        let base = s * per_step;
        {
            let f = theta.control_mut(&spec, out_pwc);
            for v in &mut f[base..base + per_step] {
                *v = -opts.field;
            }
        }
        let centre = base + per_step / 2;
        for &idx in &kicks {
            theta.control_mut(&spec, idx)[centre] += -opts.field * tau / area;
        }
        for m in 0..inner_bonds {
            let (w1, w2) = (base + 3 * m + 1, base + 3 * m + 2);
            {
                let f = theta.control_mut(&spec, out_pwc);
                f[w1] += b;
                f[w2] += b;
            }
            for (q, &idx) in kicks.iter().enumerate() {
                if q == m || q == m + 1 {
                    continue;
                }
                let kick = theta.control_mut(&spec, idx);
                // e^{-i (pi/2) X} flips Z; the second kick undoes it
                kick[w2] += FRAC_PI_2 / area;
                kick[w2 + 1] -= FRAC_PI_2 / area;
            }
        }
    }
    Ok(A2Schedule {
        spec,
        theta,
        n_trotter,
        strong_drive: b,
    })
}

/// `max |e^{-i phi ZZ} R e^{-i phi ZZ} R^dag - 1|` with `R = exp(i pi X_j)` on qubit `j`
/// of a two-qubit pair, the rotation generator scaled by `convention`.
pub fn pi_pulse_residual(phi: f64, convention: Convention) -> Result<f64> {
    let zz = PauliString::from_sites(2, &[(0, Pauli::Z), (1, Pauli::Z)])?
        .to_dense(Convention::FullPauli)?;
    let x = PauliString::single(2, 1, Pauli::X)?.to_dense(convention)?;
    let e = expm_hermitian(&zz, phi)?;
    let r = expm_hermitian(&x, -PI)?;
    let p: CMat = &e * &r * &e * r.adjoint();
    Ok(max_abs_diff(&p, &identity(4)))
}

/// Exact strong-drive propagator and its effective form, for tests and reports:
/// returns `exp(-i tau (b X_N + sum_i J_i Z_i Z_N))` and
/// `exp(-i tau b X_N) exp(-i tau (sum J_i Z_i)^2 X_N / (2b))`.
pub fn strong_drive_pair(couplings: &[f64], b: f64, tau: f64) -> Result<(CMat, CMat)> {
    let n = couplings.len() + 1;
    let d = 1usize << n;
    let out = n - 1;
    let zn = PauliString::single(n, out, Pauli::Z)?.to_dense(Convention::FullPauli)?;
    let xn = PauliString::single(n, out, Pauli::X)?.to_dense(Convention::FullPauli)?;
    let mut a = CMat::zeros(d, d);
    for (i, &j) in couplings.iter().enumerate() {
        a += PauliString::single(n, i, Pauli::Z)?.to_dense(Convention::FullPauli)?
            * Complex64::new(j, 0.0);
    }
    let h = &xn * Complex64::new(b, 0.0) + &a * &zn;
    let exact = expm_hermitian(&h, tau)?;
    let eff = &a * &a * &xn * Complex64::new(0.5 / b, 0.0);
    let approx = expm_hermitian(&(&xn * Complex64::new(b, 0.0)), tau)? * expm_hermitian(&eff, tau)?;
    Ok((exact, approx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_enforced() {
        let opts = A2Options {
            k: Some(11),
            ..A2Options::default()
        };
        assert!(matches!(
            construct_a2_qp_schedule(2, 2, &opts),
            Err(Error::Precondition(_))
        ));
        assert!(construct_a2_qp_schedule(2, 2, &A2Options::default()).is_ok());
        assert!(construct_a2_qp_schedule(1, 2, &A2Options::default()).is_err());
    }

    #[test]
    fn pi_pulse_cancels_in_spin_half() {
        for phi in [0.1, 0.77, 2.3] {
            assert!(pi_pulse_residual(phi, Convention::SpinHalf).unwrap() < 1e-12);
        }
        // a full-Pauli pi rotation is -1 and leaves e^{-2 i phi ZZ} behind
        assert!(pi_pulse_residual(0.3, Convention::FullPauli).unwrap() > 0.1);
    }

    #[test]
    fn schedule_shape() {
        let s = construct_a2_qp_schedule(3, 2, &A2Options::default()).unwrap();
        assert_eq!(s.spec.controls[0].basis.size, 18);
        assert_eq!(s.theta.len(), s.spec.num_params());
    }
}
