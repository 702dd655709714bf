use aqml_bench::a1_fixture;

#[test]
fn fixture_shapes_match() {
    let (spec, theta, w) = a1_fixture(3, 4);
    assert_eq!(theta.len(), spec.num_params());
    assert_eq!(w.nrows(), 8);
}
