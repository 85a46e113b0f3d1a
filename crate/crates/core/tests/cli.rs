use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nlburgers"));
    c.env_remove("NLBURGERS_SEED")
        .env_remove("NLBURGERS_THREADS")
        .stdout(std::process::Stdio::null());
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.conf");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn eigs_are_sorted_ascending() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let st = bin().args(["eigs", "-o"]).arg(&out).status().unwrap();
    assert!(st.success());
    let text = fs::read_to_string(out.join("eigs.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,lambda_k"));
    let lam: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(lam.len(), 16);
    assert!(lam.windows(2).all(|w| w[0] <= w[1]));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("files: eigs.csv, manifest.txt"));
}

#[test]
fn run_det_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_cells = 32\nn_modes = 10\nt_final = 0.3\n");
    for d in ["a", "b"] {
        let st = bin().arg("run-det").arg("-c").arg(&cfg).arg("-o").arg(tmp.path().join(d)).status().unwrap();
        assert!(st.success());
    }
    let a = fs::read(tmp.path().join("a/trajectory.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert!(header.starts_with("t,c_1,") && header.ends_with("c_10,energy_H,energy_V2"));
}

#[test]
fn run_sde_ignores_thread_count_and_records_seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n_cells = 32\nn_modes = 6\nt_final = 0.2\nnoise = additive\nnoise_sigma = 0.2\nmc_paths = 40\n",
    );
    for (d, threads) in [("one", "1"), ("four", "4")] {
        let st = bin()
            .arg("run-sde")
            .arg("-c")
            .arg(&cfg)
            .arg("-o")
            .arg(tmp.path().join(d))
            .env("NLBURGERS_THREADS", threads)
            .env("NLBURGERS_SEED", "123")
            .status()
            .unwrap();
        assert!(st.success());
    }
    for f in ["paths.csv", "moments.csv"] {
        let a = fs::read(tmp.path().join("one").join(f)).unwrap();
        let b = fs::read(tmp.path().join("four").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let m = fs::read_to_string(tmp.path().join("four/manifest.txt")).unwrap();
    assert!(m.contains("seed: 123") && m.contains("seed_source: environment") && m.contains("threads: 4"));
    let paths = fs::read_to_string(tmp.path().join("one/paths.csv")).unwrap();
    assert!(paths.starts_with("path_id,t,c_1,"));
}

#[test]
fn config_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    for text in ["alpha = 2.5\n", "wibble = 3\n", "n_cells 32\n"] {
        let cfg = write_config(tmp.path(), text);
        let out = bin().arg("eigs").arg("-c").arg(&cfg).arg("-o").arg(tmp.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    }
    let out = bin().args(["run-sde"]).arg("-o").arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn weak_residual_and_convergence_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_cells = 32\nn_modes = 31\nt_final = 0.5\nstride = 1\n");
    let st = bin().arg("weak-residual").arg("-c").arg(&cfg).arg("-o").arg(tmp.path().join("w")).status().unwrap();
    assert!(st.success());
    let text = fs::read_to_string(tmp.path().join("w/weak_residual.csv")).unwrap();
    assert!(text.starts_with("t,residual\n"));
    let st = bin().arg("convergence").arg("-c").arg(&cfg).arg("-o").arg(tmp.path().join("c")).status().unwrap();
    assert!(st.success());
    let text = fs::read_to_string(tmp.path().join("c/convergence.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}
