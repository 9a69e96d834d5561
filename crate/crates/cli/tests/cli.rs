use std::path::Path;
use std::process::Command;

fn twophase() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twophase"))
}

fn write_config(dir: &Path, example: u8, extra: &str) -> std::path::PathBuf {
    let out = dir.join("out");
    let text = format!(
        "example = {example}\npretrain_epochs = 2\nmain_epochs = 2\nhidden = \"8x8\"\neval_grid = \"10x10x3\"\noutput = {:?}\n{extra}",
        out.display().to_string()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_then_inspect_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, "");
    let status = twophase().arg("run").arg(&cfg).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let ckpt = dir.path().join("out/checkpoint.bin");
    assert!(ckpt.exists());
    for sub in ["eval", "track", "export-fields"] {
        let o = twophase().arg(sub).arg(&ckpt).arg(&cfg).output().unwrap();
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let metrics = std::fs::read_to_string(dir.path().join("out/metrics.json")).unwrap();
    assert!(metrics.contains("gen_error_velocity"));
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, "");
    let rows = dir.path().join("rows.txt");
    std::fs::write(&rows, "10x10x5 4x4x5 4x5 4x4\n10x10x5 8x4x5 8x5 8x8\n").unwrap();
    let o = twophase().arg("sweep").arg(&cfg).arg(&rows).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, "colour = \"blue\"\n");
    let o = twophase().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = twophase().arg("run").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_finite_loss_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1, "pretrain_lr = 1e300\n");
    let o = twophase().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out/last_good.bin").exists());
}
