use opbmo::growth::{run_growth, summary_path, ExperimentConfig, OutputFormat};
use opbmo::Error;

fn small() -> ExperimentConfig {
    ExperimentConfig::new(vec![1, 3], 2, 4)
}

#[test]
fn header_matches_golden_file() {
    let golden = include_str!("data/growth_header.csv");
    let csv = run_growth(&small()).unwrap().records_csv().unwrap();
    assert_eq!(csv.lines().next().unwrap(), golden.trim_end());
}

#[test]
fn reruns_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    run_growth(&small()).unwrap().write(&a, OutputFormat::Csv).unwrap();
    run_growth(&small()).unwrap().write(&b, OutputFormat::Csv).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(summary_path(&a)).unwrap(),
        std::fs::read(summary_path(&b)).unwrap()
    );
    let rows = std::fs::read_to_string(&a).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 4);
}

#[test]
fn json_output_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    run_growth(&small()).unwrap().write(&path, OutputFormat::Json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 8);
    assert_eq!(v["summary"].as_array().unwrap().len(), 2);
}

#[test]
fn unwritable_output_reports_the_path() {
    let report = run_growth(&small()).unwrap();
    let err = report
        .write(std::path::Path::new("/nonexistent/dir/g.csv"), OutputFormat::Csv)
        .unwrap_err();
    assert!(matches!(err, Error::Io { ref path, .. } if path.contains("/nonexistent/dir/g.csv")));
}
