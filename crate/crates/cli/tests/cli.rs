//! End-to-end CLI tests against the built binary.

use num_complex::Complex64;
use riesz_core::{
    grid_samples, multiplier_scan, read_coeff_table, rng, CoefficientMatrix, GroupSpec,
    SpectralFunction,
};
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riesz"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path
}

const Z3_SQUARED: &str = r#"
[group]
cyclic_orders = [3, 3]
torus_dim = 0
band_limit = 0

[alpha]
x = [{ re = 1.0 }, { re = 0.0 }]
y = []

[sim]
n_paths = 500
horizon_t = 4.0
dt = 4.0
lambda = 2.0
master_seed = 3

[verify]
weak_identity_pairs = 5
weak_identity_tol = 1e-12
pairing_cases = 1
pairing_z_max = 3.5
subordination_alphas = 1
subordination_p = [2.0, 4.0]
bins = 1
map_z_max = 6.0

[norms]
p = [2.0, 3.0]
torus_res = 0
max_iter = 100
tol = 1e-9
random_alphas = 1
"#;

#[test]
fn transform_matches_brute_force_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GroupSpec::new(vec![3, 3], 0, 0).unwrap();
    let mut rng = rng::test_rng(99);
    let f = SpectralFunction::random_mean_zero(spec.clone(), &mut rng);
    let input = dir.path().join("f.coeffs");
    {
        let mut w = fs::File::create(&input).unwrap();
        riesz_core::write_coeff_table(&f, &mut w).unwrap();
    }
    let config = format!(
        "{Z3_SQUARED}\n[transform]\ninput = \"{}\"\noutput_coeffs = \"out.coeffs\"\noutput_grid = \"out_grid.csv\"\ntorus_res = 0\n",
        input.display()
    );
    let config_path = write_config(dir.path(), &config);
    let status = bin()
        .args(["--config"])
        .arg(&config_path)
        .args(["--out"])
        .arg(dir.path())
        .arg("transform")
        .status()
        .unwrap();
    assert!(status.success());

    let got = read_coeff_table(
        spec.clone(),
        BufReader::new(fs::File::open(dir.path().join("out.coeffs")).unwrap()),
    )
    .unwrap();

    // Golden route: the dense grid oracle applied to the grid samples of f.
    let alpha = CoefficientMatrix::discrete_unit(2, 0, 0);
    let oracle = riesz_core::brute_force_matrix(&spec, &alpha, 1).unwrap();
    let f_grid = grid_samples(&f, 1).unwrap();
    let got_grid = grid_samples(&got, 1).unwrap();
    for r in 0..f_grid.len() {
        let mut want = Complex64::ZERO;
        for c in 0..f_grid.len() {
            want += oracle[(r, c)] * f_grid[c];
        }
        assert!(
            (want - got_grid[r]).norm() < 1e-10,
            "grid point {r}: oracle {want} vs cli {}",
            got_grid[r]
        );
    }
}

#[test]
fn transform_zero_alpha_writes_zero_function() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.coeffs");
    fs::write(&input, "1,0;;1;0\n").unwrap();
    let config = format!(
        r#"
[group]
cyclic_orders = [3, 3]
torus_dim = 0
band_limit = 0

[alpha]
x = [{{ re = 0.0 }}, {{ re = 0.0 }}]
y = []

[transform]
input = "{}"
output_coeffs = "out.coeffs"
output_grid = "out_grid.csv"
torus_res = 0
"#,
        input.display()
    );
    let config_path = write_config(dir.path(), &config);
    let status = bin()
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path())
        .arg("transform")
        .status()
        .unwrap();
    assert!(status.success());
    let spec = GroupSpec::new(vec![3, 3], 0, 0).unwrap();
    let got = read_coeff_table(
        spec,
        BufReader::new(fs::File::open(dir.path().join("out.coeffs")).unwrap()),
    )
    .unwrap();
    assert!(got.coeffs().iter().all(|c| c.norm() == 0.0));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), "[group]\ncyclic_orders = \"nope\"");
    let status = bin().arg("--config").arg(&config_path).arg("verify").status().unwrap();
    assert_eq!(status.code(), Some(2));

    // Unknown keys are rejected.
    let config_path = write_config(
        dir.path(),
        "[group]\ncyclic_orders = [2]\ntorus_dim = 0\nband_limit = 0\nsurprise = 1\n",
    );
    let status = bin().arg("--config").arg(&config_path).arg("verify").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn zero_paths_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = Z3_SQUARED.replace("n_paths = 500", "n_paths = 0");
    let config_path = write_config(dir.path(), &config);
    let status = bin()
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path())
        .arg("verify")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn empty_p_list_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = Z3_SQUARED.replace("p = [2.0, 3.0]", "p = []");
    let config_path = write_config(dir.path(), &config);
    let status = bin()
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path())
        .arg("norms")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn verify_passes_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), Z3_SQUARED);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(out)
            .arg("verify")
            .status()
            .unwrap();
        assert!(status.success(), "verify failed");
    }
    let a = fs::read(out_a.join("verify.jsonl")).unwrap();
    let b = fs::read(out_b.join("verify.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "verify output not byte-identical across reruns");
}

#[test]
fn norms_csv_has_expected_rows_and_p2_matches_scan() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), Z3_SQUARED);
    let status = bin()
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path())
        .arg("norms")
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("norms.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "alpha_index,p,lower_bound,upper_bound,choi_bound,iterations,config_hash,seed"
    );
    // 2 alphas (config + 1 random) × 2 exponents.
    assert_eq!(lines.len(), 1 + 4);
    // α from the config is e₁ on (Z/3)²: at p = 2 the lower bound equals the
    // multiplier scan; the Choi interval [0,1]... α^x = (1,0) has duplicated
    // diagonal {1,0} → (a,b) = (0,1) and a finite Choi column.
    let spec = GroupSpec::new(vec![3, 3], 0, 0).unwrap();
    let alpha = CoefficientMatrix::discrete_unit(2, 0, 0);
    let (peak, _) = multiplier_scan(&spec, &alpha);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "2");
    let lower: f64 = first[2].parse().unwrap();
    let upper: f64 = first[3].parse().unwrap();
    assert!((lower - peak).abs() < 1e-6);
    assert!(lower <= upper + 1e-9);
    assert_ne!(first[4], "NA");
}

#[test]
fn print_config_dumps_resolved_toml() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), Z3_SQUARED);
    let output = bin()
        .arg("--config")
        .arg(&config_path)
        .arg("--print-config")
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    // Defaults made explicit.
    assert!(text.contains("[transform]"));
    assert!(text.contains("fixed_order = true"));
    // The dump itself parses.
    let reparsed: toml::Value = toml::from_str(&text).unwrap();
    assert!(reparsed.get("simulate").is_some());
}

#[test]
fn simulate_dumps_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{Z3_SQUARED}\n[simulate]\nn_paths = 2\noutput = \"paths.log\"\n");
    let config_path = write_config(dir.path(), &config);
    let status = bin()
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path())
        .arg("simulate")
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("paths.log")).unwrap();
    assert!(text.contains("# path 0"));
    assert!(text.contains("# path 1"));
    // Event lines are "t;axis;sign".
    let event = text
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with("start") && !l.starts_with("step"));
    if let Some(line) = event {
        let parts: Vec<&str> = line.split(';').collect();
        assert_eq!(parts.len(), 3);
        let _: f64 = parts[0].parse().unwrap();
        let axis: usize = parts[1].parse().unwrap();
        assert!(axis < 2);
        let sign: i32 = parts[2].parse().unwrap();
        assert!(sign == 1 || sign == -1);
    }
}

#[test]
fn shipped_default_config_verifies() {
    // The repository's default experiment must pass end to end.
    let repo_root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .current_dir(&repo_root)
        .arg("--config")
        .arg(repo_root.join("configs/default.toml"))
        .arg("--out")
        .arg(dir.path())
        .arg("verify")
        .status()
        .unwrap();
    assert!(status.success(), "shipped default config failed verify");

    let status = bin()
        .current_dir(&repo_root)
        .arg("--config")
        .arg(repo_root.join("configs/default.toml"))
        .arg("--out")
        .arg(dir.path())
        .arg("transform")
        .status()
        .unwrap();
    assert!(status.success(), "shipped default config failed transform");
}
