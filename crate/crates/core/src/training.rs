//! Loss, targets, Adam training and convergence diagnostics.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{loss_and_gradient, propagate, AnsatzSpec, ParameterVector};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, unitarity_error, CMat};
use crate::pauli::{to_dense, Pauli, PauliString, WeightedPauliSum};

/// Unitarity tolerance of target unitaries.
pub const TARGET_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetDescriptor {
    IsingTfim { h: f64, time: f64 },
    StarTfim { h: f64, time: f64 },
    JwProduct { pattern: String, time: f64 },
    Custom,
}

#[derive(Clone, Debug)]
pub struct TargetUnitary {
    pub w: CMat,
    pub descriptor: TargetDescriptor,
}

impl TargetUnitary {
    pub fn custom(w: CMat) -> Result<Self> {
        let e = unitarity_error(&w);
        if !(e < TARGET_TOL) {
            return Err(Error::NonUnitary(e));
        }
        Ok(TargetUnitary {
            w,
            descriptor: TargetDescriptor::Custom,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.w.nrows().trailing_zeros() as usize
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn tfim_hamiltonian(n: usize, h: f64, bonds: &[(usize, usize)]) -> Result<WeightedPauliSum> {
    let mut s = WeightedPauliSum::zero(n);
    for &(i, j) in bonds {
        s.add_term(
            &PauliString::from_sites(n, &[(i, Pauli::Z), (j, Pauli::Z)])?,
            c(1.0),
        )?;
    }
    for q in 0..n {
        s.add_term(&PauliString::single(n, q, Pauli::X)?, c(-h))?;
    }
    Ok(s)
}

/// `exp(-i T (sum_i Z_i Z_{i+1} - h sum_i X_i))`.
pub fn target_ising(n: usize, h: f64, time: f64) -> Result<TargetUnitary> {
    let order: Vec<usize> = (0..n).collect();
    target_ising_along(&order, h, time)
}

/// Ising chain target laid out along `order`: bonds join `order[i]` and `order[i + 1]`.
pub fn target_ising_along(order: &[usize], h: f64, time: f64) -> Result<TargetUnitary> {
    let n = order.len();
    if n < 2 {
        return Err(Error::Precondition(
            "Ising target needs at least 2 qubits".into(),
        ));
    }
    let mut seen = vec![false; n];
    for &q in order {
        if q >= n || std::mem::replace(&mut seen[q], true) {
            return Err(Error::InvalidSpec(format!(
                "chain order {order:?} is not a permutation"
            )));
        }
    }
    let bonds: Vec<_> = order.windows(2).map(|b| (b[0], b[1])).collect();
    let w = expm_hermitian(&to_dense(&tfim_hamiltonian(n, h, &bonds)?, n)?, time)?;
    Ok(TargetUnitary {
        w,
        descriptor: TargetDescriptor::IsingTfim { h, time },
    })
}

/// Chain order that runs through the perceptron's output qubit second, so the
/// first two chain bonds are native star bonds: `[0, N-1, 1, 2, ..., N-2]`.
pub fn qp_chain_order(n: usize) -> Vec<usize> {
    if n < 3 {
        return (0..n).collect();
    }
    let mut o = vec![0, n - 1];
    o.extend(1..n - 1);
    o
}

/// `exp(-i T (sum_i Z_i Z_N - h sum_i X_i))`.
pub fn target_star(n: usize, h: f64, time: f64) -> Result<TargetUnitary> {
    if n < 2 {
        return Err(Error::Precondition(
            "star target needs at least 2 qubits".into(),
        ));
    }
    let bonds: Vec<_> = (0..n - 1).map(|i| (i, n - 1)).collect();
    let w = expm_hermitian(&to_dense(&tfim_hamiltonian(n, h, &bonds)?, n)?, time)?;
    Ok(TargetUnitary {
        w,
        descriptor: TargetDescriptor::StarTfim { h, time },
    })
}

/// Parses a Jordan-Wigner product `{X,Y} Z...Z {X,Y}`.
pub fn parse_jw_pattern(pattern: &str) -> Result<PauliString> {
    let p: PauliString = pattern
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("malformed Jordan-Wigner pattern {pattern:?}")))?;
    let l = p.letters();
    let ends_ok = |x: Pauli| x == Pauli::X || x == Pauli::Y;
    let ok = l.len() >= 2
        && p.phase() == crate::pauli::Phase::ONE
        && ends_ok(l[0])
        && ends_ok(l[l.len() - 1])
        && l[1..l.len() - 1].iter().all(|&x| x == Pauli::Z);
    if !ok {
        return Err(Error::InvalidSpec(format!(
            "pattern {pattern:?} is not of the form {{X,Y}} Z...Z {{X,Y}}"
        )));
    }
    Ok(p)
}

/// `exp(-i T P)` for a Jordan-Wigner product `P`.
pub fn target_jw(pattern: &str, time: f64) -> Result<TargetUnitary> {
    let p = parse_jw_pattern(pattern)?;
    let n = p.num_qubits();
    let w = expm_hermitian(&to_dense(&WeightedPauliSum::from_string(&p), n)?, time)?;
    Ok(TargetUnitary {
        w,
        descriptor: TargetDescriptor::JwProduct {
            pattern: pattern.to_string(),
            time,
        },
    })
}

fn check_dims(u: &CMat, w: &CMat) -> Result<()> {
    if u.shape() != w.shape() {
        return Err(Error::ShapeMismatch(format!(
            "unitary is {:?} but target is {:?}",
            u.shape(),
            w.shape()
        )));
    }
    Ok(())
}

/// `||U - W||_F^2`, times `2^-(N+1)` when `normalized`.
pub fn loss_e(u: &CMat, w: &CMat, normalized: bool) -> Result<f64> {
    check_dims(u, w)?;
    let d = u.nrows() as f64;
    let l = crate::linalg::frobenius_sq(&(u - w));
    Ok(if normalized { l / (2.0 * d) } else { l })
}

/// `(|Tr(W^dag U)|^2 + d) / (d^2 + d)`.
pub fn avg_channel_fidelity(u: &CMat, w: &CMat) -> Result<f64> {
    check_dims(u, w)?;
    let d = u.nrows() as f64;
    let t = (w.adjoint() * u).trace().norm_sqr();
    Ok((t + d) / (d * d + d))
}

/// Gradient of the normalized loss.
pub fn grad_loss(
    spec: &AnsatzSpec,
    theta: &ParameterVector,
    w: &CMat,
    m: usize,
) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(spec, theta, w, m, true)?.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    /// Propagator slice count.
    pub slices: usize,
    /// Convergence thresholds on the two squared-norm metrics.
    pub grad_tol: f64,
    pub diff_tol: f64,
    /// Trailing window over which both metrics must stay below threshold.
    pub window: usize,
    /// Stop once converged instead of running all epochs.
    pub early_stop: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 6000,
            slices: 200,
            grad_tol: 1e-4,
            diff_tol: 1e-4,
            window: 100,
            early_stop: false,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Precondition("epochs must be at least 1".into()));
        }
        if self.slices == 0 {
            return Err(Error::Precondition("slices must be at least 1".into()));
        }
        if !(self.lr > 0.0)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
        {
            return Err(Error::Precondition(
                "Adam needs lr > 0 and betas in [0, 1)".into(),
            ));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Precondition("Adam eps must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch history of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Loss at the parameters entering each epoch.
    pub loss: Vec<f64>,
    /// `||grad||^2` at each epoch.
    pub grad_norm: Vec<f64>,
    /// `||grad_i - grad_{i-1}||^2`, zero at the first epoch.
    pub grad_diff_norm: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub final_loss: f64,
    pub epochs: usize,
    pub converged: bool,
}

impl TrainRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,grad_norm,grad_diff_norm\n");
        for i in 0..self.loss.len() {
            s.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                i, self.loss[i], self.grad_norm[i], self.grad_diff_norm[i]
            ));
        }
        s
    }
}

/// Both squared-norm metrics below their thresholds over the last `window` epochs.
pub fn is_converged(grad_norm: &[f64], grad_diff_norm: &[f64], cfg: &AdamConfig) -> bool {
    let w = cfg.window.max(1);
    if grad_norm.len() < w {
        return false;
    }
    let tail = grad_norm.len() - w;
    grad_norm[tail..].iter().all(|&g| g < cfg.grad_tol)
        && grad_diff_norm[tail..].iter().all(|&g| g < cfg.diff_tol)
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Adam on the normalized loss from `theta0`.
pub fn adam_train(
    spec: &AnsatzSpec,
    theta0: &ParameterVector,
    w: &CMat,
    cfg: &AdamConfig,
) -> Result<TrainRecord> {
    cfg.validate()?;
    spec.check_params(theta0)?;
    let p = theta0.len();
    let mut theta = theta0.clone();
    let (mut m1, mut m2) = (vec![0.0; p], vec![0.0; p]);
    let mut rec = TrainRecord {
        loss: Vec::with_capacity(cfg.epochs),
        grad_norm: Vec::with_capacity(cfg.epochs),
        grad_diff_norm: Vec::with_capacity(cfg.epochs),
        final_theta: vec![],
        final_loss: f64::NAN,
        epochs: 0,
        converged: false,
    };
    let mut prev: Option<Vec<f64>> = None;
    for epoch in 0..cfg.epochs {
        let (loss, g) = loss_and_gradient(spec, &theta, w, cfg.slices, true)
            .map_err(|e| Error::NonFinite(format!("epoch {epoch}: {e}")))?;
        rec.loss.push(loss);
        rec.grad_norm.push(norm_sq(&g));
        rec.grad_diff_norm.push(match &prev {
            Some(q) => g.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(),
            None => 0.0,
        });
        let t = (epoch + 1) as i32;
        let (c1, c2) = (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t));
        for i in 0..p {
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g[i];
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let step = cfg.lr * (m1[i] / c1) / ((m2[i] / c2).sqrt() + cfg.eps);
            theta.values[i] -= step;
        }
        prev = Some(g);
        rec.epochs = epoch + 1;
        if cfg.early_stop && is_converged(&rec.grad_norm, &rec.grad_diff_norm, cfg) {
            break;
        }
    }
    rec.converged = is_converged(&rec.grad_norm, &rec.grad_diff_norm, cfg);
    let u = propagate(spec, &theta, cfg.slices)?.u;
    rec.final_loss = loss_e(&u, w, true)?;
    rec.final_theta = theta.values;
    Ok(rec)
}

/// Parameters i.i.d. uniform on `[lo, hi)`.
pub fn random_init<R: Rng + ?Sized>(
    spec: &AnsatzSpec,
    rng: &mut R,
    lo: f64,
    hi: f64,
) -> ParameterVector {
    ParameterVector::new(
        (0..spec.num_params())
            .map(|_| rng.random_range(lo..hi))
            .collect(),
    )
}

/// Independent RNG stream for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `trials` independent Adam runs from uniform `[0, 1)` initializations.
pub fn train_ensemble(
    spec: &AnsatzSpec,
    w: &CMat,
    cfg: &AdamConfig,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrainRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let theta0 = random_init(spec, &mut rng, 0.0, 1.0);
            adam_train(spec, &theta0, w, cfg)
        })
        .collect()
}

/// Trial-averaged convergence metrics per epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceMetrics {
    pub grad_norm_mean: Vec<f64>,
    pub grad_diff_norm_mean: Vec<f64>,
}

/// Averages the squared-norm histories over records, truncated to the shortest run.
pub fn convergence_metrics(records: &[TrainRecord]) -> Result<ConvergenceMetrics> {
    if records.is_empty() {
        return Err(Error::Precondition("no training records".into()));
    }
    let len = records.iter().map(|r| r.grad_norm.len()).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::Precondition("empty training record".into()));
    }
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(&TrainRecord) -> &Vec<f64>| -> Vec<f64> {
        (0..len)
            .map(|i| records.iter().map(|r| f(r)[i]).sum::<f64>() / n)
            .collect()
    };
    Ok(ConvergenceMetrics {
        grad_norm_mean: mean(&|r| &r.grad_norm),
        grad_diff_norm_mean: mean(&|r| &r.grad_diff_norm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff};
    use crate::pauli::Convention;

    #[test]
    fn loss_examples() {
        let w = target_ising(2, 0.1, 1.0).unwrap().w;
        assert!(loss_e(&w, &w, true).unwrap().abs() < 1e-14);
        let minus = &w * Complex64::new(-1.0, 0.0);
        assert!((loss_e(&minus, &w, true).unwrap() - 2.0).abs() < 1e-14);
        assert!(loss_e(&identity(2), &w, true).is_err());
    }

    #[test]
    fn fidelity_is_phase_invariant() {
        let w = target_jw("XZZX", 0.3).unwrap().w;
        assert!((avg_channel_fidelity(&w, &w).unwrap() - 1.0).abs() < 1e-14);
        let ph = &w * Complex64::from_polar(1.0, 0.7);
        assert!((avg_channel_fidelity(&ph, &w).unwrap() - 1.0).abs() < 1e-14);
        assert!(loss_e(&ph, &w, true).unwrap() > 0.1);
    }

    #[test]
    fn ising_target_without_field_is_diagonal() {
        let w = target_ising(3, 0.0, 1.0).unwrap().w;
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert!(w[(i, j)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn jw_two_site_closed_form() {
        let t = 0.4f64;
        let w = target_jw("XX", t).unwrap().w;
        let xx = PauliString::from_sites(2, &[(0, Pauli::X), (1, Pauli::X)])
            .unwrap()
            .to_dense(Convention::FullPauli)
            .unwrap();
        let expect = identity(4) * Complex64::new(t.cos(), 0.0) - xx * Complex64::new(0.0, t.sin());
        assert!(max_abs_diff(&w, &expect) < 1e-14);
        assert!(max_abs_diff(&target_jw("XZX", 0.0).unwrap().w, &identity(8)) < 1e-15);
    }

    #[test]
    fn chain_order_relabels_bonds() {
        assert_eq!(qp_chain_order(3), vec![0, 2, 1]);
        assert_eq!(qp_chain_order(5), vec![0, 4, 1, 2, 3]);
        let a = target_ising_along(&[0, 1], 0.1, 1.0).unwrap().w;
        assert!(max_abs_diff(&a, &target_ising(2, 0.1, 1.0).unwrap().w) < 1e-15);
        assert!(target_ising_along(&[0, 0, 1], 0.1, 1.0).is_err());
    }

    #[test]
    fn jw_pattern_validation() {
        for bad in ["X", "XZ", "ZZX", "XXZX", "-XZX", "XQ"] {
            assert!(parse_jw_pattern(bad).is_err(), "{bad}");
        }
        for good in ["XX", "YZY", "XZZY", "YZZZX"] {
            assert!(parse_jw_pattern(good).is_ok(), "{good}");
        }
    }

    #[test]
    fn adam_fixed_point_at_zero_gradient() {
        let spec = AnsatzSpec::a1_qp(2, 2, 1.0).unwrap();
        let theta = ParameterVector::zeros(&spec);
        let cfg = AdamConfig {
            epochs: 5,
            slices: 40,
            ..AdamConfig::default()
        };
        let rec = adam_train(&spec, &theta, &identity(4), &cfg).unwrap();
        assert!(
            rec.grad_norm.iter().all(|&g| g == 0.0),
            "{:?}",
            rec.grad_norm
        );
        assert_eq!(rec.final_theta, theta.values);
        assert_eq!(rec.final_loss, 0.0);
    }

    #[test]
    fn metrics_of_constant_run() {
        let r = TrainRecord {
            loss: vec![1.0; 4],
            grad_norm: vec![0.5; 4],
            grad_diff_norm: vec![0.0; 4],
            final_theta: vec![],
            final_loss: 1.0,
            epochs: 4,
            converged: false,
        };
        let m = convergence_metrics(&[r.clone(), r]).unwrap();
        assert_eq!(m.grad_norm_mean, vec![0.5; 4]);
        assert!(m.grad_diff_norm_mean.iter().all(|&x| x == 0.0));
        assert!(convergence_metrics(&[]).is_err());
    }

    #[test]
    fn trial_streams_are_distinct_and_reproducible() {
        let a: f64 = trial_rng(5, 0).random();
        let b: f64 = trial_rng(5, 1).random();
        let a2: f64 = trial_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
