use gstkit_bench::fixture;

#[test]
fn fixture_matches_default_experiment_sizes() {
    let f = fixture();
    assert_eq!(f.short.len(), 85);
    assert_eq!(f.long.len(), 1066);
    assert_eq!(f.test.len(), 1010);
    assert_eq!(f.short_data.len(), f.short.unique_sequences().len());
    assert!(f.test_data.iter().all(|(_, c)| c.n_total == 950));
}
