//! Fixtures shared by the benchmarks in `benches/`.

use aqml_core::ansatz::{AnsatzSpec, ParameterVector};
use aqml_core::linalg::CMat;
use aqml_core::training::{qp_chain_order, random_init, target_ising_along, trial_rng};

/// A1 perceptron with seeded parameters and its Ising target.
pub fn a1_fixture(n: usize, k: usize) -> (AnsatzSpec, ParameterVector, CMat) {
    let spec = AnsatzSpec::a1_qp(n, k, 1.0).expect("valid preset");
    let theta = random_init(&spec, &mut trial_rng(0, 0), 0.0, 1.0);
    let w = target_ising_along(&qp_chain_order(n), 0.1, 1.0)
        .expect("valid target")
        .w;
    (spec, theta, w)
}
