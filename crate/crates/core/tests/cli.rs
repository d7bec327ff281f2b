use std::process::Command;

fn rechain() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rechain"))
}

#[test]
fn show_config_prints_parseable_toml() {
    let out = rechain()
        .args(["show-config", "--task", "shelf"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Shelf2D") || text.contains("shelf"), "{text}");
}

#[test]
fn unsupported_ablation_size_is_an_error() {
    let out = rechain()
        .args(["ablate-pp", "--pp-dataset-size", "300", "--out"])
        .arg(tempfile::tempdir().unwrap().path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn evaluate_assert_fails_on_an_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = rechain()
        .args(["evaluate", "--assert", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[FAIL]"), "{text}");
}
