use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn oscillate(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscillate"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("OSCILLATE_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn cell_prints_the_cosine_effective_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cell");
    let o = oscillate(&["cell", "--spec", "cos1d", "--m", "1"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "effective_value 1.73205"), "{}", stdout(&o));
    assert!(out.join("cell.json").exists() && out.join("corrector.csv").exists());
}

#[test]
fn mono_check_reports_a_positive_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let o = oscillate(&["check", "--lemma", "mono"], &tmp.path().join("check"));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("mono=")).expect("mono flag");
    assert!(line.starts_with("mono=PASS"), "{line}");
    let gap: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(gap > 0.3 && gap < 0.4, "{gap}");
}

#[test]
fn zero_data_solve_dumps_a_zero_solution() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("solve");
    let o = oscillate(&["solve", "--spec", "separable2d", "--epsilons", "0.25", "--rhs", "0", "--boundary", "0"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("solution.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        assert_eq!(line.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0);
        rows += 1;
    }
    assert_eq!(rows, 33 * 33);
}

#[test]
fn reruns_with_force_are_byte_identical_and_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let args = ["sweep", "--spec", "cos1d", "--epsilons", "0.125,0.0625"];
    assert!(oscillate(&args, &out).status.success());
    let first = read_manifest(&out);
    for entry in first["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(entry["path"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(entry["sha256"].as_str().unwrap(), digest);
    }
    let refused = oscillate(&args, &out);
    assert_eq!(refused.status.code(), Some(2));
    let mut forced = args.to_vec();
    forced.extend(["--force", "--jobs", "1"]);
    assert!(oscillate(&forced, &out).status.success());
    assert_eq!(read_manifest(&out), first);
}

#[test]
fn config_files_are_merged_and_errors_are_line_anchored() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("good.toml");
    fs::write(&good, "version = 1\ncommand = \"cell\"\nspec = \"cos1d\"\nm = [2.0]\nresolution = 128\n").unwrap();
    let out = tmp.path().join("good");
    let o = oscillate(&["cell", "--config", good.to_str().unwrap(), "--m", "1"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("effective_value 1.73205"));
    let manifest = read_manifest(&out);
    assert_eq!(manifest["settings"]["resolution"], 128);

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "version = 1\nspec = \"cos1d\"\ntol = -1.0\n").unwrap();
    let o = oscillate(&["cell", "--config", bad.to_str().unwrap()], &tmp.path().join("bad"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:3: tol"), "{}", stderr(&o));

    let typo = tmp.path().join("typo.toml");
    fs::write(&typo, "version = 1\nresolutoin = 64\n").unwrap();
    let o = oscillate(&["cell", "--config", typo.to_str().unwrap()], &tmp.path().join("typo"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let wrong = tmp.path().join("wrong.toml");
    fs::write(&wrong, "version = 1\ncommand = \"sweep\"\n").unwrap();
    let o = oscillate(&["cell", "--config", wrong.to_str().unwrap()], &tmp.path().join("wrong"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = oscillate(&["cell", "--spec", "no-such-operator"], &tmp.path().join("a"));
    assert_eq!(o.status.code(), Some(2));
    let o = oscillate(&["cell", "--spec", "cos1d", "--m", "1,2,3"], &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
    let o = oscillate(&["check", "--lemma", "bogus"], &tmp.path().join("c"));
    assert_eq!(o.status.code(), Some(2));
    // an unresolved scale is a numerical failure of the solver
    let o = oscillate(&["solve", "--spec", "cos1d", "--epsilons", "0.1", "--resolution", "16"], &tmp.path().join("d"));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("solver failed"));
}

#[test]
fn operator_files_and_the_cache_directory_are_used() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = oscillate::operator::builtin("cos1d").unwrap();
    let path = tmp.path().join("op.toml");
    fs::write(&path, spec.to_toml()).unwrap();
    let cache = tmp.path().join("cache");
    let o = Command::new(env!("CARGO_BIN_EXE_oscillate"))
        .args(["cell", "--m", "1", "--spec", path.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("out"))
        .env("OSCILLATE_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("effective_value 1.73205"));
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);
}

#[test]
fn boundary_layer_and_certificate_runs_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let o = oscillate(&["blayer", "--epsilons", "0.125,0.0625"], &tmp.path().join("bl"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("eps2_scaling=PASS"));
    let o = oscillate(&["certify", "--spec", "cos1d"], &tmp.path().join("cert"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("certificate=PASS"));
    let o = oscillate(&["campanato", "--spec", "cos1d", "--epsilons", "0.015625", "--rhs-gradient", "1"], &tmp.path().join("camp"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("contraction=PASS"));
}
