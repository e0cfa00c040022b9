use opsys::acceptance::{format_line, run_all, AcceptanceConfig, CRITERIA};

#[test]
fn acceptance_criteria() {
    let results = run_all(&AcceptanceConfig::default());
    assert_eq!(results.len(), CRITERIA);
    for r in &results {
        println!("{}", format_line(r));
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
