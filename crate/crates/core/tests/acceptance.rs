//! Acceptance suite: the headline identities and inequalities at desk scale,
//! one pass/fail line per criterion.
//!
//! Run with `cargo test -p riesz-core --test acceptance -- --nocapture`.
//! The criteria execute sequentially inside a single test so that the
//! stated runtime budgets are measured without harness interleaving.

use num_complex::Complex64;
use rand::Rng;
use riesz_core::*;
use std::fmt::Write as _;
use std::time::Instant;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn shipped_specs() -> Vec<(&'static str, GroupSpec)> {
    vec![
        ("Z/2", GroupSpec::new(vec![2], 0, 0).unwrap()),
        ("(Z/3)^2", GroupSpec::new(vec![3, 3], 0, 0).unwrap()),
        ("Z/4xT K=2", GroupSpec::new(vec![4], 1, 2).unwrap()),
        ("Z/3xT K=2", GroupSpec::new(vec![3], 1, 2).unwrap()),
        ("Z/8xT K=8", GroupSpec::new(vec![8], 1, 8).unwrap()),
        ("T^2 K=2", GroupSpec::new(vec![], 2, 2).unwrap()),
        ("T^2 K=4", GroupSpec::new(vec![], 2, 4).unwrap()),
        ("T^2 K=8", GroupSpec::new(vec![], 2, 8).unwrap()),
        ("T^2 K=16", GroupSpec::new(vec![], 2, 16).unwrap()),
    ]
}

// -------------------------------------------------------------------------
// 1. Oracle equivalence: dense grid matrix vs multiplier route.
// -------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut rng = rng::test_rng(1001);

    let z3sq = GroupSpec::new(vec![3, 3], 0, 0).unwrap();
    for alpha in [
        CoefficientMatrix::discrete_unit(2, 0, 0),
        CoefficientMatrix::identity(2, 0),
        CoefficientMatrix::random(2, 0, &mut rng),
    ] {
        let a = brute_force_matrix(&z3sq, &alpha, 1).unwrap();
        let b = multiplier_matrix(&z3sq, &alpha, 1).unwrap();
        worst = worst.max(a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
    }

    let z4t = GroupSpec::new(vec![4], 1, 2).unwrap();
    let res = z4t.torus_band();
    for alpha in [CoefficientMatrix::identity(1, 1), CoefficientMatrix::random(1, 1, &mut rng)] {
        let a = brute_force_matrix(&z4t, &alpha, res).unwrap();
        let b = multiplier_matrix(&z4t, &alpha, res).unwrap();
        worst = worst.max(a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && elapsed < 5.0;
    outcome(
        "criterion 1 (oracle equivalence)",
        pass,
        format!("max entrywise deviation {worst:.2e} (tol 1e-10), runtime {elapsed:.2}s (< 5s)"),
    )
}

// -------------------------------------------------------------------------
// 2. Trace identity ΣR_i² + ΣR_j² = −I on L²₀.
// -------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_spec = "";
    for (name, spec) in shipped_specs() {
        let m = spec.discrete_dims();
        let n = spec.torus_dim;
        for idx in 0..spec.frequency_count() {
            let xi = spec.frequency_at(idx);
            if xi.is_zero() {
                continue;
            }
            let mut trace = Complex64::ZERO;
            for i in 0..m {
                trace += riesz2_multiplier(&spec, &CoefficientMatrix::discrete_unit(m, n, i), &xi);
            }
            for j in 0..n {
                trace += riesz2_multiplier(&spec, &CoefficientMatrix::torus_unit(m, n, j, j), &xi);
            }
            let dev = (trace + Complex64::ONE).norm();
            if dev > worst {
                worst = dev;
                worst_spec = name;
            }
        }
    }
    outcome(
        "criterion 2 (trace identity)",
        worst <= 1e-14,
        format!("max frequency-wise deviation {worst:.2e} (tol 1e-14, worst on {worst_spec})"),
    )
}

// -------------------------------------------------------------------------
// 3. Weak identity in closed form, 100 random mean-zero pairs.
// -------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let mut rng = rng::test_rng(1003);
    let mut worst = 0.0f64;
    for spec in [GroupSpec::new(vec![4], 1, 2).unwrap(), GroupSpec::new(vec![3, 3], 0, 0).unwrap()]
    {
        for _ in 0..50 {
            let f = SpectralFunction::random_mean_zero(spec.clone(), &mut rng);
            let g = SpectralFunction::random_mean_zero(spec.clone(), &mut rng);
            worst = worst.max(weak_identity_check(&f, &g).unwrap());
        }
    }
    outcome(
        "criterion 3 (weak identity)",
        worst <= 1e-12,
        format!("max |<f,g> - 2∫<∇̂P_tf,∇̂P_tg>dt| = {worst:.2e} over 100 pairs (tol 1e-12)"),
    )
}

// -------------------------------------------------------------------------
// 4. Gundy–Varopoulos representation by Monte Carlo.
// -------------------------------------------------------------------------

fn sparse_random(spec: &GroupSpec, nonzeros: usize, seed: u64) -> SpectralFunction {
    let mut rng = rng::test_rng(seed);
    let mut f = SpectralFunction::zero(spec.clone());
    let count = spec.frequency_count();
    let mut placed = 0;
    while placed < nonzeros {
        let idx = rng.gen_range(0..count);
        let xi = spec.frequency_at(idx);
        if xi.is_zero() || f.get(&xi).unwrap() != Complex64::ZERO {
            continue;
        }
        f.set(&xi, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
        placed += 1;
    }
    f
}

struct PairingCase {
    label: String,
    estimate: PairingEstimate,
}

fn mixed_case_inputs() -> Vec<(String, SpectralFunction, SpectralFunction, u64)> {
    let spec = GroupSpec::new(vec![3], 1, 2).unwrap();
    let chi = |kx: u32, ky: i32, amp: Complex64| {
        SpectralFunction::character(spec.clone(), &Frequency { kx: vec![kx], ky: vec![ky] }, amp)
            .unwrap()
    };
    vec![
        (
            "chi(1,1) vs chi(2,-1)".into(),
            chi(1, 1, Complex64::ONE),
            chi(2, -1, Complex64::ONE),
            101,
        ),
        (
            "chi(2,1) vs chi(1,-1), complex amps".into(),
            chi(2, 1, Complex64::new(0.5, -0.25)),
            chi(1, -1, Complex64::new(-1.0, 0.5)),
            102,
        ),
        ("orthogonal chi(1,2) vs chi(1,1)".into(), chi(1, 2, Complex64::ONE), chi(1, 1, Complex64::ONE), 103),
        (
            "two-mode random pair A".into(),
            sparse_random(&spec, 2, 104),
            sparse_random(&spec, 2, 204),
            104,
        ),
        (
            "two-mode random pair B".into(),
            sparse_random(&spec, 2, 105),
            sparse_random(&spec, 2, 205),
            105,
        ),
    ]
}

fn mixed_cases(horizon_t: f64, dt: f64, n_paths: usize) -> Vec<PairingCase> {
    // One shared trajectory ensemble for the five cases (common random
    // numbers); each case keeps its own (f, g, α) seed.
    let inputs = mixed_case_inputs();
    let alphas: Vec<CoefficientMatrix> = inputs
        .iter()
        .map(|(_, _, _, seed)| {
            let mut arng = rng::test_rng(*seed);
            CoefficientMatrix::random(1, 1, &mut arng)
        })
        .collect();
    let cases: Vec<(&SpectralFunction, &SpectralFunction, &CoefficientMatrix)> = inputs
        .iter()
        .zip(&alphas)
        .map(|((_, f, g, _), a)| (f, g, a))
        .collect();
    let cfg = SimConfig { lambda: 2.0, horizon_t, dt, n_paths, master_seed: 4001 };
    let estimates = representation_pairing_batch(&cases, &cfg).unwrap();
    inputs
        .into_iter()
        .zip(estimates)
        .map(|((label, _, _, _), estimate)| PairingCase { label, estimate })
        .collect()
}

fn z2_case(horizon_t: f64, n_paths: usize) -> PairingEstimate {
    let spec = GroupSpec::new(vec![2], 0, 0).unwrap();
    let f = SpectralFunction::character(
        spec.clone(),
        &Frequency { kx: vec![1], ky: vec![] },
        Complex64::ONE,
    )
    .unwrap();
    let alpha = CoefficientMatrix::identity(1, 0);
    let cfg = SimConfig { lambda: 2.0, horizon_t, dt: 1e-3, n_paths, master_seed: 100 };
    representation_pairing(&f, &f, &alpha, &cfg).unwrap()
}

fn criterion_4() -> (Outcome, PairingEstimate, Vec<PairingCase>) {
    let start = Instant::now();
    let n_paths = 100_000;
    let z2 = z2_case(6.0, n_paths);
    let mixed = mixed_cases(6.0, 1e-3, n_paths);
    let elapsed = start.elapsed().as_secs_f64();

    let mut pass = true;
    let mut detail = String::new();
    let z2_ref_ok = (z2.reference - Complex64::new(-2.0, 0.0)).norm() < 1e-12;
    pass &= z2_ref_ok && z2.z_score <= 3.0;
    let _ = write!(detail, "Z/2: value {:.4}{:+.4}i vs ref -2, z = {:.2}; ", z2.value.re, z2.value.im, z2.z_score);
    for case in &mixed {
        pass &= case.estimate.z_score <= 3.0;
        let _ = write!(detail, "[{} z = {:.2}] ", case.label, case.estimate.z_score);
    }
    pass &= elapsed < 120.0;
    let _ = write!(detail, "runtime {elapsed:.1}s (< 120s), n_paths = {n_paths}");
    (outcome("criterion 4 (representation)", pass, detail), z2, mixed)
}

// -------------------------------------------------------------------------
// 5. Differential subordination: zero pathwise violations.
// -------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let spec = GroupSpec::new(vec![3], 1, 2).unwrap();
    let f = sparse_random(&spec, 8, 1005);
    let mut rng = rng::test_rng(1006);
    let mut min_inc = f64::INFINITY;
    let mut violations = 0usize;
    for trial in 0..10 {
        let alpha = CoefficientMatrix::random(1, 1, &mut rng);
        let cfg = SimConfig {
            lambda: 2.0,
            horizon_t: 2.0,
            dt: 1e-3,
            n_paths: 1000,
            master_seed: 2000 + trial,
        };
        let report = subordination_ensemble(&f, &alpha, &cfg, &[]).unwrap();
        violations += report.violations.len();
        min_inc = min_inc.min(report.min_increment);
    }
    outcome(
        "criterion 5 (differential subordination)",
        violations == 0,
        format!(
            "0 required violations over 10 alphas x 1000 paths: found {violations}, min increment {min_inc:.2e} (slack -1e-10)"
        ),
    )
}

// -------------------------------------------------------------------------
// 6. Sharp bound consistency for the power-method lower bounds.
// -------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let specs = [GroupSpec::new(vec![], 2, 8).unwrap(), GroupSpec::new(vec![8], 1, 8).unwrap()];
    let p_list = [1.5, 2.0, 3.0, 4.0];
    let mut pass = true;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_p2 = 0.0f64;
    let mut quad_detail = String::new();
    let mut rng = rng::test_rng(1007);
    for spec in &specs {
        let res = default_torus_res(spec);
        for a_idx in 0..10 {
            let alpha = CoefficientMatrix::random(spec.discrete_dims(), spec.torus_dim, &mut rng);
            for &p in &p_list {
                let report =
                    operator_norm_lower_bound(spec, &alpha, p, res, 40, 1e-8, 3000 + a_idx)
                        .unwrap();
                let bound = alpha.norm2() * (p_star(p) - 1.0);
                worst_gap = worst_gap.max(report.lower_bound - bound);
                pass &= report.lower_bound <= bound + 1e-9;
                if p == 2.0 {
                    let (peak, _) = multiplier_scan(spec, &alpha);
                    let err = (report.lower_bound - peak).abs();
                    worst_p2 = worst_p2.max(err);
                    pass &= err <= 1e-6;
                }
                // Quadrature stability spot check at the fractional exponent.
                if p == 1.5 && a_idx == 0 {
                    let (_, used_res, change) =
                        analysis::stabilized_ratio(spec, &alpha, &report.witness, p, res, 1e-6, 8)
                            .unwrap();
                    pass &= change < 1e-6;
                    let _ = write!(quad_detail, "quad change {change:.1e} at res {used_res}; ");
                }
            }
        }
    }
    outcome(
        "criterion 6 (sharp bound consistency)",
        pass,
        format!(
            "max (lower - upper) = {worst_gap:.2e} (<= 1e-9), max p=2 deviation {worst_p2:.2e} (<= 1e-6); {quad_detail}"
        ),
    )
}

// -------------------------------------------------------------------------
// 7. Convergence toward sharpness: K-sweep monotonicity for R₁²−R₂² on T².
// -------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let p = 4.0;
    let shared_res = 4 * (2 * 16 + 1);
    let ks = [2i32, 4, 8, 16];
    let mut bounds = Vec::new();
    let mut prev_witness: Option<(GroupSpec, SpectralFunction)> = None;
    let mut pass = true;
    for &k in &ks {
        let spec = GroupSpec::new(vec![], 2, k).unwrap();
        let mut alpha = CoefficientMatrix::zero(0, 2);
        alpha.alpha_y[0] = Complex64::ONE;
        alpha.alpha_y[3] = -Complex64::ONE;
        // Embed the previous witness: band-K functions are band-K' functions.
        let mut warm = Vec::new();
        let mut embedded_ratio = f64::NEG_INFINITY;
        if let Some((prev_spec, w)) = &prev_witness {
            let mut lifted = SpectralFunction::zero(spec.clone());
            for (xi, c) in w.iter_nonzero() {
                lifted.set(&xi, c).unwrap();
            }
            let _ = prev_spec;
            // Direct un-renormalized ratio of the lifted witness: identical
            // partial sums, so it reproduces the previous bound exactly.
            let t_lifted = riesz2_apply(&alpha, &lifted).unwrap();
            embedded_ratio = lp_norm(&t_lifted, p, shared_res).unwrap()
                / lp_norm(&lifted, p, shared_res).unwrap();
            warm.push(lifted);
        }
        let report = operator_norm_lower_bound_with_starts(
            &spec, &alpha, p, shared_res, 40, 1e-8, 1008, &warm,
        )
        .unwrap();
        let lower = report.lower_bound.max(embedded_ratio);
        pass &= lower <= report.upper_bound + 1e-9;
        if let Some(&prev) = bounds.last() {
            pass &= lower >= prev;
        }
        bounds.push(lower);
        prev_witness = Some((spec, report.witness));
    }
    let seq: Vec<String> = ks.iter().zip(&bounds).map(|(k, b)| format!("K={k}: {b:.6}")).collect();
    outcome(
        "criterion 7 (K-sweep monotonicity)",
        pass,
        format!("lower bounds nondecreasing exactly [{}], upper bound 3", seq.join(", ")),
    )
}

// -------------------------------------------------------------------------
// 8. Choi approximation.
// -------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    // Independent evaluation of the series through a different arithmetic
    // route: ln(1+e^{-2}) - ln 2 and 1/(1+e^2).
    let l = (-2.0f64).exp().ln_1p() - 2.0f64.ln();
    let r = 1.0 / (1.0 + 2.0f64.exp());
    let beta2 = l * l + 0.5 * l - 2.0 * r * r;
    let independent = 2.0 + 0.5 * l + beta2 / 4.0;
    let got = choi_upper_bound(0.0, 1.0, 4.0).unwrap().unwrap();
    let series_err = (got - independent).abs();
    let mut pass = series_err <= 1e-9 && (got - 1.719176).abs() < 2e-5;
    for p in [1.5, 2.0, 3.0, 4.0, 10.0] {
        let exact = choi_upper_bound(-1.0, 1.0, p).unwrap().unwrap();
        pass &= exact == p_star(p) - 1.0;
    }
    outcome(
        "criterion 8 (Choi constants)",
        pass,
        format!("C(0,1,4) = {got:.9} vs independent {independent:.9} (diff {series_err:.1e}); C(-1,1,p) = p*-1 exact"),
    )
}

// -------------------------------------------------------------------------
// 9. Statistical hygiene: horizon doubling and dt halving.
// -------------------------------------------------------------------------

/// The same Brownian path on the coarser grid: keep multiples of dt_coarse
/// plus the jump times and aggregate the fine increments over each kept
/// step. Pairing the fine and coarse walks isolates the discretization
/// effect from the Monte Carlo noise.
fn coarsen_trajectory(traj: &Trajectory, dt_coarse: f64) -> Trajectory {
    let n = traj.spec.torus_dim;
    let mut keep = vec![false; traj.times.len()];
    keep[0] = true;
    *keep.last_mut().unwrap() = true;
    for (idx, &t) in traj.times.iter().enumerate() {
        let r = (t / dt_coarse).round();
        if (t - r * dt_coarse).abs() <= 1e-9 * dt_coarse {
            keep[idx] = true;
        }
    }
    for e in &traj.events {
        keep[e.grid_index] = true;
    }
    let mut times = Vec::new();
    let mut remap = vec![usize::MAX; traj.times.len()];
    for (idx, &k) in keep.iter().enumerate() {
        if k {
            remap[idx] = times.len();
            times.push(traj.times[idx]);
        }
    }
    let steps = times.len() - 1;
    let mut gauss = vec![0.0f64; steps * n];
    let mut coarse_step = 0usize;
    for fine_step in 0..traj.steps() {
        for j in 0..n {
            gauss[coarse_step * n + j] += traj.dy(fine_step, j);
        }
        if keep[fine_step + 1] {
            coarse_step += 1;
        }
    }
    let events = traj
        .events
        .iter()
        .map(|e| JumpEvent { grid_index: remap[e.grid_index], ..*e })
        .collect();
    Trajectory {
        spec: traj.spec.clone(),
        z0: traj.z0.clone(),
        events,
        times,
        gauss,
        z_final: traj.z_final.clone(),
        horizon_t: traj.horizon_t,
        path_index: traj.path_index,
    }
}

fn criterion_9(base_z2: &PairingEstimate, base_mixed: &[PairingCase]) -> Outcome {
    use rayon::prelude::*;
    let n_paths = 100_000usize;
    let z2_long = z2_case(12.0, n_paths);
    let d_z2 = (z2_long.value - base_z2.value).norm();
    let tol_z2 = base_z2.std_error.max(z2_long.std_error).max(1e-13);

    // dt halving with common random numbers: walk the same Brownian path on
    // the dt/2 grid and on its dt-coarsening, pair the estimates.
    let spec = GroupSpec::new(vec![3], 1, 2).unwrap();
    let (_, f, g, seed) = mixed_case_inputs().remove(0);
    let mut arng = rng::test_rng(seed);
    let alpha = CoefficientMatrix::random(1, 1, &mut arng);
    let cfg_fine =
        SimConfig { lambda: 2.0, horizon_t: 6.0, dt: 5e-4, n_paths, master_seed: seed };
    let cfg_coarse = SimConfig { dt: 1e-3, ..cfg_fine.clone() };
    let samples: Vec<(Complex64, Complex64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let traj = sample_trajectory(&spec, &cfg_fine, &StartPoint::Stationary, i as u64)
                .unwrap();
            let coarse = coarsen_trajectory(&traj, cfg_coarse.dt);
            let gv = evaluate(&g, &traj.z_final).unwrap();
            let fine = stochastic::transformed_final(&f, &alpha, &traj, &cfg_fine).unwrap();
            let coarse =
                stochastic::transformed_final(&f, &alpha, &coarse, &cfg_coarse).unwrap();
            (fine.final_transformed * gv, coarse.final_transformed * gv)
        })
        .collect();
    let scale = spec.discrete_size() as f64;
    let nf = samples.len() as f64;
    let mean_fine: Complex64 = samples.iter().map(|s| s.0).sum::<Complex64>() / nf;
    let mean_coarse: Complex64 = samples.iter().map(|s| s.1).sum::<Complex64>() / nf;
    let d_dt = scale * (mean_fine - mean_coarse).norm();
    let var: f64 =
        samples.iter().map(|s| (s.0 - mean_fine).norm_sqr()).sum::<f64>() / (nf - 1.0);
    let se = scale * (var / nf).sqrt();

    let pass = d_z2 <= tol_z2 && d_dt <= se;
    let _ = &base_mixed; // the baseline cases document the dt=1e-3 estimates
    outcome(
        "criterion 9 (statistical hygiene)",
        pass,
        format!(
            "T doubling: |Δ| = {d_z2:.2e} <= se {tol_z2:.2e}; dt halving (coupled paths): |Δ| = {d_dt:.2e} <= se {se:.2e}"
        ),
    )
}

#[test]
fn acceptance() {
    let mut outcomes = Vec::new();
    outcomes.push(criterion_1());
    outcomes.push(criterion_2());
    outcomes.push(criterion_3());
    let (c4, z2, mixed) = criterion_4();
    outcomes.push(c4);
    outcomes.push(criterion_5());
    outcomes.push(criterion_6());
    outcomes.push(criterion_7());
    outcomes.push(criterion_8());
    outcomes.push(criterion_9(&z2, &mixed));

    let mut all = true;
    for o in &outcomes {
        println!("{}: {} — {}", o.name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    assert!(all, "acceptance criteria failed; see the lines above");
}
