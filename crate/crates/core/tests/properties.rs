//! Invariants checked over random inputs.

use aqml_core::ansatz::{
    loss_and_gradient, propagate, AnsatzSpec, Axis, ControlEntry, ParameterVector, Topology,
};
use aqml_core::controls::{BasisFamily, BasisKind, ControlField};
use aqml_core::linalg::{max_abs_diff, unitarity_error, CMat};
use aqml_core::magnus::{
    expand, Resolver, Route, SeriesMode, Symbol, SymbolicHamiltonian, WordEvaluator,
};
use aqml_core::pauli::{
    commutator, decompose, multiply, Convention, Pauli, PauliString, WeightedPauliSum,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn letter() -> impl Strategy<Value = Pauli> {
    prop_oneof![
        Just(Pauli::I),
        Just(Pauli::X),
        Just(Pauli::Y),
        Just(Pauli::Z)
    ]
}

fn string(n: usize) -> impl Strategy<Value = PauliString> {
    proptest::collection::vec(letter(), n)
        .prop_map(|l| PauliString::new(l, Default::default()).unwrap())
}

fn dense(p: &PauliString) -> CMat {
    p.to_dense(Convention::FullPauli).unwrap()
}

fn kind() -> impl Strategy<Value = BasisKind> {
    prop_oneof![
        Just(BasisKind::Fourier),
        Just(BasisKind::Gaussian),
        Just(BasisKind::Legendre),
        Just(BasisKind::Pwc),
        Just(BasisKind::Polynomial),
    ]
}

fn spec_with(n: usize, topology: Topology, kind: BasisKind, k: usize, t: f64) -> AnsatzSpec {
    let b = BasisFamily::new(kind, k, t).unwrap();
    let controls = (0..n)
        .flat_map(|q| {
            [Axis::X, Axis::Z].map(|axis| ControlEntry {
                qubit: q,
                axis,
                basis: b.clone(),
            })
        })
        .collect();
    AnsatzSpec::new(n, topology, controls, Convention::FullPauli, t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_matches_dense(p in string(3), q in string(3)) {
        let pq = multiply(&p, &q).unwrap();
        prop_assert!(max_abs_diff(&dense(&pq), &(dense(&p) * dense(&q))) < 1e-14);
    }

    #[test]
    fn commutator_is_antisymmetric(p in string(3), q in string(3)) {
        let a = commutator(&p, &q).unwrap();
        let b = commutator(&q, &p).unwrap();
        prop_assert!(a.add(&b).unwrap().iter().all(|(_, c)| c.norm() < 1e-14));
        let d = dense(&p) * dense(&q) - dense(&q) * dense(&p);
        prop_assert!(max_abs_diff(&a.to_dense(Convention::FullPauli).unwrap(), &d) < 1e-14);
    }

    #[test]
    fn decomposition_round_trips(p in string(2), q in string(2), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let mut s = WeightedPauliSum::zero(2);
        s.add_term(&p, Complex64::new(a, 0.0)).unwrap();
        s.add_term(&q, Complex64::new(0.0, b)).unwrap();
        let m = s.to_dense(Convention::FullPauli).unwrap();
        let back = decompose(&m, 2).unwrap().to_dense(Convention::FullPauli).unwrap();
        prop_assert!(max_abs_diff(&m, &back) < 1e-13);
    }

    #[test]
    fn antiderivative_differentiates_back(kind in kind(), k in 1usize..5, seed in 0u64..1000, frac in 0.05..0.95f64) {
        let t = 1.3;
        let b = BasisFamily::new(kind, k, t).unwrap();
        let coeffs: Vec<f64> = (0..k).map(|i| ((seed as f64 + 1.0) * (i as f64 + 0.37)).sin()).collect();
        let f = ControlField::new(b, coeffs).unwrap();
        let x = frac * t;
        let h = 1e-4;
        for order in 2..=3 {
            let d = (f.antiderivative(order, x + h).unwrap() - f.antiderivative(order, x - h).unwrap()) / (2.0 * h);
            let lower = f.antiderivative(order - 1, x).unwrap();
            prop_assert!((d - lower).abs() < 1e-6, "{kind:?} order {order}: {d} vs {lower}");
        }
    }

    #[test]
    fn propagator_is_unitary(topo in 0usize..4, kind in kind(), seed in 0u64..1000) {
        let topology = Topology::ALL[topo];
        let spec = spec_with(3, topology, kind, 3, 0.9);
        let theta = ParameterVector::new(
            (0..spec.num_params()).map(|i| ((seed * 31 + i as u64) as f64).sin()).collect(),
        );
        let u = propagate(&spec, &theta, 60).unwrap().u;
        prop_assert!(unitarity_error(&u) < 1e-10);
    }

    #[test]
    fn loss_is_bounded_and_gradient_finite(seed in 0u64..1000) {
        let spec = spec_with(2, Topology::QpStar, BasisKind::Fourier, 2, 1.0);
        let theta = ParameterVector::new(
            (0..spec.num_params()).map(|i| ((seed * 17 + i as u64) as f64).cos()).collect(),
        );
        let w = propagate(&spec, &ParameterVector::zeros(&spec), 10).unwrap().u;
        let (l, g) = loss_and_gradient(&spec, &theta, &w, 40, true).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&l));
        prop_assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn word_pair_sums_to_product(a in proptest::collection::vec(-1.0..1.0f64, 3), b in proptest::collection::vec(-1.0..1.0f64, 3)) {
        // word(f, g) + word(g, f) = int f * int g, and word(f, g) - word(g, f) = 0 for f = g
        let t = 1.1;
        let basis = BasisFamily::fourier(3, t).unwrap();
        let f = ControlField::new(basis.clone(), a).unwrap();
        let g = ControlField::new(basis, b).unwrap();
        let (fi, gi) = (f.antiderivative(1, t).unwrap(), g.antiderivative(1, t).unwrap());
        let r = Resolver::new(t, vec![], vec![f, g]).unwrap();
        let mut ev = WordEvaluator::new(&r, Route::Auto).unwrap();
        let fg = ev.simplex_integral(&[Symbol::Field(0), Symbol::Field(1)]).unwrap();
        let gf = ev.simplex_integral(&[Symbol::Field(1), Symbol::Field(0)]).unwrap();
        prop_assert!((fg + gf - fi * gi).abs() < 1e-12);
        let ff = ev.simplex_integral(&[Symbol::Field(0), Symbol::Field(0)]).unwrap();
        prop_assert!((2.0 * ff - fi * fi).abs() < 1e-12);
    }

    #[test]
    fn assembled_orders_are_hermitian(kind in prop_oneof![Just(BasisKind::Fourier), Just(BasisKind::Pwc), Just(BasisKind::Legendre)], seed in 0u64..500) {
        let spec = spec_with(3, Topology::IsingChain, kind, 2, 0.7);
        let theta = ParameterVector::new(
            (0..spec.num_params()).map(|i| ((seed * 13 + i as u64) as f64).sin()).collect(),
        );
        let exp = expand(&SymbolicHamiltonian::from_spec(&spec), 2, SeriesMode::Exact).unwrap();
        for h in exp.evaluate_by_order(&Resolver::from_spec(&spec, &theta).unwrap()).unwrap() {
            prop_assert!(h.is_hermitian(1e-12));
        }
    }
}
