//! Batch front-end: transform | verify | norms | simulate.
//!
//! Exit codes: 0 success, 1 verification or statistical failure, 2 config,
//! input, or validation errors.

mod config;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use riesz_core::{
    choi_upper_bound, conditional_expectation_map, default_torus_res, grid_samples, lambda_min,
    operator_norm_lower_bound, project_mean_zero, read_coeff_table, representation_pairing,
    riesz2_apply, rng, sample_trajectory, subordination_ensemble, weak_identity_check,
    write_coeff_table, CoefficientMatrix, GridLayout, GroupSpec, SimConfig, SpectralFunction,
    StartPoint,
};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "riesz", about = "Second-order Riesz transforms on semi-discrete groups")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override [sim].master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rayon worker threads (default: all cores). Results are independent of
    /// the worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Apply R²_α to a coefficient table; write coefficients and grid samples.
    Transform,
    /// Run the verification battery; exit 1 on any failed check.
    Verify,
    /// Operator-norm lower/upper bounds per (α, p) as CSV.
    Norms,
    /// Dump event logs and Brownian step records for a few paths.
    Simulate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(AppError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Check(msg)) => {
            eprintln!("verification failure: {msg}");
            ExitCode::from(1)
        }
    }
}

enum AppError {
    /// Config, input, or validation problem → exit 2.
    Config(String),
    /// A check or statistical contract failed → exit 1.
    Check(String),
}

impl From<riesz_core::GroupError> for AppError {
    fn from(e: riesz_core::GroupError) -> Self {
        AppError::Config(e.to_string())
    }
}

fn cfg_err<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Config(e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, AppError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?,
        None => return Err(AppError::Config("--config PATH is required".into())),
    };
    let config = ExperimentConfig::from_str(&text).map_err(AppError::Config)?;

    if cli.print_config {
        print!("{}", config.resolved_toml());
        return Ok(ExitCode::SUCCESS);
    }

    if let Some(workers) = cli.workers {
        // Ignore failures from double initialization (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }

    let spec = config.group_spec().map_err(AppError::Config)?;
    let alpha = config.coefficients(&spec).map_err(AppError::Config)?;
    let sim = config.sim_config(cli.seed);
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let hash = config.hash();

    match cli.command {
        None => Err(AppError::Config("missing subcommand (transform|verify|norms|simulate)".into())),
        Some(Command::Transform) => cmd_transform(&config, &spec, &alpha, &out_dir, &hash),
        Some(Command::Verify) => cmd_verify(&config, &spec, &alpha, &sim, &out_dir, &hash),
        Some(Command::Norms) => cmd_norms(&config, &spec, &alpha, &sim, &out_dir, &hash),
        Some(Command::Simulate) => cmd_simulate(&config, &spec, &sim, &out_dir, &hash),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

fn cmd_transform(
    config: &ExperimentConfig,
    spec: &GroupSpec,
    alpha: &CoefficientMatrix,
    out_dir: &Path,
    hash: &str,
) -> Result<ExitCode, AppError> {
    let input = Path::new(&config.transform.input);
    let reader = File::open(input)
        .map(BufReader::new)
        .map_err(|e| AppError::Config(format!("cannot open {}: {e}", input.display())))?;
    let f = read_coeff_table(spec.clone(), reader)?;
    let transformed = riesz2_apply(alpha, &f).map_err(cfg_err)?;

    let coeff_path = out_dir.join(&config.transform.output_coeffs);
    let mut w = create(&coeff_path)?;
    writeln!(w, "# config_hash={hash}").map_err(cfg_err)?;
    write_coeff_table(&transformed, &mut w)?;

    let torus_res = if config.transform.torus_res == 0 {
        spec.torus_band()
    } else {
        config.transform.torus_res
    };
    let grid_path = out_dir.join(&config.transform.output_grid);
    let samples = grid_samples(&transformed, torus_res)?;
    let layout = GridLayout::new(spec, torus_res)?;
    let mut w = create(&grid_path)?;
    let mut header: Vec<String> =
        (0..spec.discrete_dims()).map(|i| format!("x{}", i + 1)).collect();
    header.extend((0..spec.torus_dim).map(|j| format!("y{}", j + 1)));
    header.push("re".into());
    header.push("im".into());
    header.push("config_hash".into());
    writeln!(w, "{}", header.join(",")).map_err(cfg_err)?;
    for (idx, v) in samples.iter().enumerate() {
        let z = layout.point(idx);
        let mut row: Vec<String> = z.x.iter().map(|x| x.to_string()).collect();
        row.extend(z.y.iter().map(|y| y.to_string()));
        row.push(v.re.to_string());
        row.push(v.im.to_string());
        row.push(hash.to_string());
        writeln!(w, "{}", row.join(",")).map_err(cfg_err)?;
    }
    println!("transform: wrote {} and {}", coeff_path.display(), grid_path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyRecord {
    check: String,
    params: serde_json::Value,
    value: Option<Complex64>,
    reference: Option<Complex64>,
    std_error: Option<f64>,
    z_score: Option<f64>,
    pass: bool,
    config_hash: String,
    seed: u64,
}

fn cmd_verify(
    config: &ExperimentConfig,
    spec: &GroupSpec,
    alpha: &CoefficientMatrix,
    sim: &SimConfig,
    out_dir: &Path,
    hash: &str,
) -> Result<ExitCode, AppError> {
    if sim.n_paths == 0 {
        return Err(AppError::Config("[sim].n_paths must be ≥ 1 for verify".into()));
    }
    sim.validate().map_err(cfg_err)?;
    let vc = &config.verify;
    let path = out_dir.join("verify.jsonl");
    let mut w = create(&path)?;
    let mut all_pass = true;
    let mut first_failure: Option<String> = None;
    let mut emit = |rec: &VerifyRecord, w: &mut BufWriter<File>| -> Result<(), AppError> {
        let line = serde_json::to_string(rec).map_err(cfg_err)?;
        writeln!(w, "{line}").map_err(cfg_err)?;
        println!("{} {}: {line}", if rec.pass { "PASS" } else { "FAIL" }, rec.check);
        Ok(())
    };

    // Weak identity over seeded random mean-zero pairs.
    let mut rng = rng::test_rng(sim.master_seed ^ 0x5741_4b49);
    let mut worst = 0.0f64;
    for _ in 0..vc.weak_identity_pairs {
        let f = SpectralFunction::random_mean_zero(spec.clone(), &mut rng);
        let g = SpectralFunction::random_mean_zero(spec.clone(), &mut rng);
        worst = worst.max(weak_identity_check(&f, &g).map_err(cfg_err)?);
    }
    let pass = worst <= vc.weak_identity_tol;
    all_pass &= pass;
    let rec = VerifyRecord {
        check: "weak_identity".into(),
        params: serde_json::json!({"pairs": vc.weak_identity_pairs, "tol": vc.weak_identity_tol}),
        value: Some(Complex64::new(worst, 0.0)),
        reference: Some(Complex64::ZERO),
        std_error: None,
        z_score: None,
        pass,
        config_hash: hash.into(),
        seed: sim.master_seed,
    };
    emit(&rec, &mut w)?;
    if !pass && first_failure.is_none() {
        first_failure = Some(serde_json::to_string(&rec).map_err(cfg_err)?);
    }

    // Representation pairing on seeded cases.
    let horizon_floor = (-lambda_min(spec) * sim.horizon_t).exp();
    if horizon_floor > 1e-3 {
        eprintln!(
            "warning: horizon_t = {} leaves stationary-residual bias e^(-λ_min T) = {horizon_floor:.3e} above 1e-3",
            sim.horizon_t
        );
    }
    let mut rng = rng::test_rng(sim.master_seed ^ 0x5041_4952);
    for case in 0..vc.pairing_cases {
        let f = project_mean_zero(&SpectralFunction::random_mean_zero(spec.clone(), &mut rng));
        let g = project_mean_zero(&SpectralFunction::random_mean_zero(spec.clone(), &mut rng));
        let est = representation_pairing(&f, &g, alpha, sim).map_err(cfg_err)?;
        let pass = est.z_score <= vc.pairing_z_max;
        all_pass &= pass;
        let rec = VerifyRecord {
            check: "representation_pairing".into(),
            params: serde_json::json!({
                "case": case,
                "n_paths": est.n_paths,
                "bias_bound": est.bias_bound,
                "horizon_warning": est.horizon_warning,
            }),
            value: Some(est.value),
            reference: Some(est.reference),
            std_error: Some(est.std_error),
            z_score: Some(est.z_score),
            pass,
            config_hash: hash.into(),
            seed: sim.master_seed,
        };
        emit(&rec, &mut w)?;
        if !pass && first_failure.is_none() {
            first_failure = Some(serde_json::to_string(&rec).map_err(cfg_err)?);
        }
    }

    // Conditional-expectation map (optional).
    if vc.bins > 0 {
        let mut rng = rng::test_rng(sim.master_seed ^ 0x4d41_5030);
        let f = project_mean_zero(&SpectralFunction::random_mean_zero(spec.clone(), &mut rng));
        let map = conditional_expectation_map(&f, alpha, sim, vc.bins).map_err(cfg_err)?;
        let pass = map.max_z <= vc.map_z_max;
        all_pass &= pass;
        let rec = VerifyRecord {
            check: "conditional_expectation_map".into(),
            params: serde_json::json!({
                "bins": vc.bins,
                "empty_bins": map.empty_bins,
                "chi_square": map.chi_square,
                "dof": map.dof,
            }),
            value: Some(Complex64::new(map.max_z, 0.0)),
            reference: None,
            std_error: None,
            z_score: Some(map.max_z),
            pass,
            config_hash: hash.into(),
            seed: sim.master_seed,
        };
        emit(&rec, &mut w)?;
        if !pass && first_failure.is_none() {
            first_failure = Some(serde_json::to_string(&rec).map_err(cfg_err)?);
        }
    }

    // Differential subordination: config α plus seeded random ones.
    let mut rng = rng::test_rng(sim.master_seed ^ 0x5355_424f);
    let mut alphas = vec![alpha.clone()];
    for _ in 0..vc.subordination_alphas {
        alphas.push(CoefficientMatrix::random(spec.discrete_dims(), spec.torus_dim, &mut rng));
    }
    let mut rng_f = rng::test_rng(sim.master_seed ^ 0x5355_4246);
    let f = project_mean_zero(&SpectralFunction::random_mean_zero(spec.clone(), &mut rng_f));
    for (i, a) in alphas.iter().enumerate() {
        let report = subordination_ensemble(&f, a, sim, &vc.subordination_p).map_err(cfg_err)?;
        all_pass &= report.pass;
        let rec = VerifyRecord {
            check: "subordination".into(),
            params: serde_json::json!({
                "alpha_index": i,
                "n_paths": report.n_paths,
                "violations": report.violations,
                "lp": report.lp_checks,
            }),
            value: Some(Complex64::new(report.min_increment, 0.0)),
            reference: None,
            std_error: None,
            z_score: None,
            pass: report.pass,
            config_hash: hash.into(),
            seed: sim.master_seed,
        };
        emit(&rec, &mut w)?;
        if !report.pass && first_failure.is_none() {
            first_failure = Some(serde_json::to_string(&rec).map_err(cfg_err)?);
        }
    }

    if all_pass {
        println!("verify: all checks passed ({})", path.display());
        Ok(ExitCode::SUCCESS)
    } else {
        Err(AppError::Check(first_failure.unwrap_or_else(|| "see verify.jsonl".into())))
    }
}

// ---------------------------------------------------------------------------
// norms
// ---------------------------------------------------------------------------

fn cmd_norms(
    config: &ExperimentConfig,
    spec: &GroupSpec,
    alpha: &CoefficientMatrix,
    sim: &SimConfig,
    out_dir: &Path,
    hash: &str,
) -> Result<ExitCode, AppError> {
    let nc = &config.norms;
    if nc.p.is_empty() {
        return Err(AppError::Config("[norms].p must list at least one exponent".into()));
    }
    if nc.p.iter().any(|&p| !(p > 1.0) || !p.is_finite()) {
        return Err(AppError::Config("[norms].p entries must satisfy 1 < p < ∞".into()));
    }
    let torus_res = if nc.torus_res == 0 { default_torus_res(spec) } else { nc.torus_res };
    let mut alphas = vec![alpha.clone()];
    let mut rng = rng::test_rng(sim.master_seed ^ 0x4e4f_524d);
    for _ in 0..nc.random_alphas {
        alphas.push(CoefficientMatrix::random(spec.discrete_dims(), spec.torus_dim, &mut rng));
    }

    let path = out_dir.join("norms.csv");
    let mut w = create(&path)?;
    writeln!(w, "alpha_index,p,lower_bound,upper_bound,choi_bound,iterations,config_hash,seed")
        .map_err(cfg_err)?;
    for (ai, a) in alphas.iter().enumerate() {
        let choi_interval = a.real_spectrum_bounds(1e-12);
        for &p in &nc.p {
            let report =
                operator_norm_lower_bound(spec, a, p, torus_res, nc.max_iter, nc.tol, sim.master_seed)
                    .map_err(cfg_err)?;
            let choi = match choi_interval {
                Some((lo, hi)) => choi_upper_bound(lo, hi, p)
                    .map_err(cfg_err)?
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "NA".into()),
                None => "NA".into(),
            };
            if report.lower_bound > report.upper_bound + 1e-9 {
                return Err(AppError::Check(format!(
                    "lower bound {} exceeds upper bound {} at p = {p}",
                    report.lower_bound, report.upper_bound
                )));
            }
            writeln!(
                w,
                "{ai},{p},{},{},{choi},{},{hash},{}",
                report.lower_bound, report.upper_bound, report.iterations, sim.master_seed
            )
            .map_err(cfg_err)?;
        }
    }
    println!("norms: wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(
    config: &ExperimentConfig,
    spec: &GroupSpec,
    sim: &SimConfig,
    out_dir: &Path,
    hash: &str,
) -> Result<ExitCode, AppError> {
    if config.simulate.n_paths == 0 {
        return Err(AppError::Config("[simulate].n_paths must be ≥ 1".into()));
    }
    sim.validate().map_err(cfg_err)?;
    let path = out_dir.join(&config.simulate.output);
    let mut w = create(&path)?;
    writeln!(w, "# config_hash={hash} seed={}", sim.master_seed).map_err(cfg_err)?;
    for p in 0..config.simulate.n_paths {
        let traj =
            sample_trajectory(spec, sim, &StartPoint::Stationary, p as u64).map_err(cfg_err)?;
        writeln!(w, "# path {p}").map_err(cfg_err)?;
        let xs: Vec<String> = traj.z0.x.iter().map(|x| x.to_string()).collect();
        let ys: Vec<String> = traj.z0.y.iter().map(|y| y.to_string()).collect();
        writeln!(w, "start;{};{}", xs.join(","), ys.join(",")).map_err(cfg_err)?;
        for e in &traj.events {
            writeln!(w, "{};{};{}", e.time, e.axis, e.sign).map_err(cfg_err)?;
        }
        for step in 0..traj.steps() {
            for j in 0..spec.torus_dim {
                writeln!(
                    w,
                    "step;{};{};{};{}",
                    traj.times[step],
                    traj.times[step + 1],
                    j,
                    traj.dy(step, j)
                )
                .map_err(cfg_err)?;
            }
        }
    }
    println!("simulate: wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}
