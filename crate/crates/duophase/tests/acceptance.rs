//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS/FAIL` line (run with `-- --nocapture` to see them all).
//!
//! Criteria are pinned to the default 1D problem (256 elements, power
//! kernels p1 = 2, p2 = 5, p3 = 3.5, r = 3, s = 4, zero weight) unless
//! stated otherwise.

use duophase::config::RunConfig;
use duophase::{
    certify_nonexistence, minimize_r1, minimize_r2, r2, simon_estimate_check, solve_at,
    solve_at_warm, Domain, ExponentField, GridFunction, Kernel, Mesh, PowerPair, ProblemSpec,
    QuotientConfig, SolveStatus,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::sync::Arc;
use std::time::Instant;

fn default_problem() -> (ProblemSpec, QuotientConfig) {
    RunConfig::parse("").unwrap().build().unwrap()
}

fn random_function(mesh: &Arc<Mesh>, rng: &mut StdRng, amplitude: f64) -> GridFunction {
    let values: Vec<f64> = (0..mesh.n_interior())
        .map(|_| rng.random_range(-amplitude..amplitude))
        .collect();
    GridFunction::from_values(mesh, values).unwrap()
}

fn report(criterion: &str, passed: bool, detail: String) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion}: FAIL — {detail}");
}

/// Criterion 1: modular/norm equivalences on 200 randomized functions plus
/// the Luxemburg defining equation, at 1e-8, in under 10 s.
#[test]
fn criterion_1_modular_norm_suite() {
    let start = Instant::now();
    let mesh = Mesh::interval(0.0, 1.0, 256).unwrap();
    let domain = Domain::interval(0.0, 1.0).unwrap();
    let p = ExponentField::new(domain, |q| 2.0 + q[0]).unwrap();
    let (pm, pp) = (p.p_minus(), p.p_plus());
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst_defining = 0.0f64;
    for k in 0..200 {
        let amplitude = 10f64.powf(rng.random_range(-1.5..1.5));
        let u = random_function(&mesh, &mut rng, amplitude);
        let norm = duophase::luxemburg_norm(&u, &p).unwrap();
        let rho = duophase::modular(&u, &p);
        if norm == 0.0 {
            assert_eq!(rho, 0.0);
            continue;
        }
        // defining equation rho(u / ||u||) = 1
        let defining = duophase::modular(&u.scaled(1.0 / norm), &p);
        worst_defining = worst_defining.max((defining - 1.0).abs());
        assert!(
            (defining - 1.0).abs() <= 1e-8,
            "sample {k}: rho(u/norm) = {defining}"
        );
        // unit-ball equivalences
        if (norm - 1.0).abs() > 1e-8 {
            assert_eq!(norm < 1.0, rho < 1.0, "sample {k}: norm {norm}, rho {rho}");
            assert_eq!(norm > 1.0, rho > 1.0, "sample {k}: norm {norm}, rho {rho}");
        } else {
            assert!((rho - 1.0).abs() <= 1e-7);
        }
        // power sandwich on either side of the unit sphere
        if norm > 1.0 + 1e-8 {
            assert!(norm.powf(pm) <= rho * (1.0 + 1e-8), "sample {k}");
            assert!(rho <= norm.powf(pp) * (1.0 + 1e-8), "sample {k}");
        } else if norm < 1.0 - 1e-8 {
            assert!(norm.powf(pm) >= rho * (1.0 - 1e-8), "sample {k}");
            assert!(rho >= norm.powf(pp) * (1.0 - 1e-8), "sample {k}");
        }
    }
    let elapsed = start.elapsed();
    report(
        "1",
        elapsed.as_secs_f64() < 10.0,
        format!(
            "200 randomized functions, worst |rho(u/norm) - 1| = {worst_defining:.2e}, {elapsed:.2?}"
        ),
    );
}

/// Criterion 2: Gateaux gradient vs central finite differences, relative
/// error <= 1e-5, on 20 random directions x 3 kernels x {1D, 2D}.
#[test]
fn criterion_2_gradient_correctness() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut rng = StdRng::seed_from_u64(7);
    for dim in [1usize, 2] {
        let (mesh, domain) = if dim == 1 {
            (
                Mesh::interval(0.0, 1.0, 64).unwrap(),
                Domain::interval(0.0, 1.0).unwrap(),
            )
        } else {
            (
                Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 8, 8).unwrap(),
                Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap(),
            )
        };
        for kernel_kind in 0..3usize {
            let make = |p: f64| -> Kernel {
                let field = ExponentField::constant(domain, p).unwrap();
                match kernel_kind {
                    0 => Kernel::power(field),
                    1 => Kernel::mean_curvature(field),
                    _ => Kernel::capillarity(field),
                }
            };
            let weight = mesh.interpolate(|q| 0.5 - q[0]).unwrap();
            let spec = ProblemSpec::new(
                Arc::clone(&mesh),
                make(2.0),
                make(5.0),
                Kernel::power(ExponentField::constant(domain, 3.5).unwrap()),
                weight,
                PowerPair::new(3.0, 4.0).unwrap(),
            )
            .unwrap();
            let u = random_function(&mesh, &mut rng, 0.6);
            let lambda = 2.5;
            let grad = spec.gateaux_gradient(&u, lambda).unwrap();
            let h = 1e-6;
            for _ in 0..20 {
                let i = rng.random_range(0..mesh.n_interior());
                let mut up = u.clone();
                up.values_mut()[i] += h;
                let mut dn = u.clone();
                dn.values_mut()[i] -= h;
                let fd = (spec.total_energy(&up, lambda).unwrap()
                    - spec.total_energy(&dn, lambda).unwrap())
                    / (2.0 * h);
                let err = (grad[i] - fd).abs() / (1.0 + grad[i].abs());
                worst = worst.max(err);
                assert!(
                    err <= 1e-5,
                    "dim {dim} kernel {kernel_kind} direction {i}: err {err:.2e}"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        "2",
        elapsed.as_secs_f64() < 60.0,
        format!("20 directions x 3 kernels x (1D, 2D), worst rel err {worst:.2e}, {elapsed:.2?}"),
    );
}

/// Criterion 3: Simon-type estimate on 1000 random pairs per built-in kernel
/// with the grid-estimated ellipticity constant; zero violations.
#[test]
fn criterion_3_simon_estimates() {
    let start = Instant::now();
    let domain = Domain::interval(0.0, 1.0).unwrap();
    let mut rng = StdRng::seed_from_u64(31);
    // the exponent crosses 2, exercising both branches of the estimate
    let field = || ExponentField::new(domain, |q| 1.5 + q[0]).unwrap();
    for (name, kernel) in [
        ("power", Kernel::power(field())),
        ("mean_curvature", Kernel::mean_curvature(field())),
        ("capillarity", Kernel::capillarity(field())),
    ] {
        let pairs: Vec<_> = (0..1000)
            .map(|_| {
                (
                    [rng.random_range(0.0..1.0), 0.0],
                    [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
                    [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
                )
            })
            .collect();
        let result = simon_estimate_check(&kernel, &pairs);
        assert!(result.passed(), "{name}: {result}");
    }
    let elapsed = start.elapsed();
    report(
        "3",
        elapsed.as_secs_f64() < 10.0,
        format!("1000 pairs per kernel, zero violations, {elapsed:.2?}"),
    );
}

/// Criterion 4: converged solves satisfy |lambda - r2(u)| <= 1e-6 (1 + |lambda|),
/// and the discrete identity R(u).u = Num2 - lambda Den2 holds to 1e-12
/// relative for arbitrary u.
#[test]
fn criterion_4_eigenpair_identity() {
    let start = Instant::now();
    let (spec, cfg) = default_problem();

    // identity on arbitrary functions
    let mut rng = StdRng::seed_from_u64(99);
    let mut worst_identity = 0.0f64;
    for _ in 0..10 {
        let u = random_function(spec.mesh(), &mut rng, 1.0);
        let lambda = rng.random_range(-5.0..50.0);
        let (_, residual) = spec.weak_residual(&u, lambda).unwrap();
        let dot: f64 = residual.iter().zip(u.values()).map(|(r, v)| r * v).sum();
        let (num2, den2) = spec.num2_den2(&u).unwrap();
        let expected = num2 - lambda * den2;
        let rel = (dot - expected).abs() / (num2.abs() + lambda.abs() * den2.abs() + 1.0);
        worst_identity = worst_identity.max(rel);
        assert!(rel <= 1e-12, "identity defect {rel:.2e}");
    }

    // converged solve above the threshold
    let first = minimize_r1(&spec, &cfg).unwrap();
    let lambda = 1.5 * first.value;
    let solve_start = Instant::now();
    let result = solve_at(lambda, &spec, &cfg).unwrap();
    let solve_elapsed = solve_start.elapsed();
    assert_eq!(result.status, SolveStatus::Converged);
    let gap = (result.lambda - result.r2_value).abs();
    assert!(
        gap <= 1e-6 * (1.0 + result.lambda.abs()),
        "lambda = {}, r2 = {}, gap {gap:.2e}",
        result.lambda,
        result.r2_value
    );
    let elapsed = start.elapsed();
    report(
        "4",
        solve_elapsed.as_secs_f64() < 5.0,
        format!(
            "identity defect {worst_identity:.2e}, |lambda - r2| = {gap:.2e}, solve {solve_elapsed:.2?}, total {elapsed:.2?}"
        ),
    );
}

/// Criterion 5: threshold behavior at desk scale on the default config:
/// (i) the R1 minimizer is an eigenpair at lambda_star with residual <= 1e-6,
/// (ii) solves converge nontrivially at {1.01, 1.5, 3, 10} lambda_star,
/// (iii) at 0.5 lambda_lower everything collapses and nonexistence is
/// certified. Total under 5 minutes.
#[test]
fn criterion_5_threshold_behavior_desk_scale() {
    let start = Instant::now();
    let (spec, cfg) = default_problem();

    let first = minimize_r1(&spec, &cfg).unwrap();
    let (residual_at_star, _) = spec.weak_residual(&first.minimizer, first.value).unwrap();
    assert!(
        residual_at_star <= 1e-6,
        "(i) residual at lambda_star: {residual_at_star:.2e}"
    );

    for factor in [1.01, 1.5, 3.0, 10.0] {
        let lambda = factor * first.value;
        let result = solve_at_warm(lambda, &spec, &cfg, &first.minimizer).unwrap();
        assert_eq!(
            result.status,
            SolveStatus::Converged,
            "(ii) no eigenpair at {factor} lambda_star"
        );
        assert!(result.residual_norm <= 1e-6);
        assert!(result.u.max_abs() > 0.0);
    }

    let second = minimize_r2(&spec, &cfg).unwrap();
    let low = 0.5 * second.value;
    let result = solve_at(low, &spec, &cfg).unwrap();
    assert_eq!(
        result.status,
        SolveStatus::TrivialOnly,
        "(iii) expected trivial collapse below lambda_lower"
    );
    let certificate = certify_nonexistence(low, second.value, &spec, &cfg).unwrap();
    assert!(
        certificate.passed,
        "(iii) certificate failed: {certificate}"
    );

    let elapsed = start.elapsed();
    report(
        "5",
        elapsed.as_secs_f64() < 300.0,
        format!(
            "lambda_star {:.6e}, lambda_lower {:.6e}, sweep + certificate done, {elapsed:.2?}",
            first.value, second.value
        ),
    );
}

/// Dense zoomed grid scan of a quotient over the span of the first three
/// sine modes (the brute-force oracle of criterion 6).
fn sine_subspace_scan(spec: &ProblemSpec, quotient: impl Fn(&GridFunction) -> f64) -> f64 {
    let mesh = spec.mesh();
    let modes: Vec<GridFunction> = (1..=3)
        .map(|k| {
            mesh.interpolate(|p| (k as f64 * std::f64::consts::PI * p[0]).sin())
                .unwrap()
        })
        .collect();
    let mut center = [0.0f64; 3];
    let mut width = 1.0f64;
    let mut best = (f64::INFINITY, center);
    for _level in 0..6 {
        let steps = 10i64;
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let a = [
                        center[0] + width * i as f64 / steps as f64,
                        center[1] + width * j as f64 / steps as f64,
                        center[2] + width * k as f64 / steps as f64,
                    ];
                    let mut u = GridFunction::zero(mesh);
                    for (c, m) in a.iter().zip(&modes) {
                        u.axpy(*c, m);
                    }
                    let v = quotient(&u);
                    if v < best.0 {
                        best = (v, a);
                    }
                }
            }
        }
        center = best.1;
        width *= 0.15;
    }
    best.0
}

/// Criterion 6: solver thresholds vs the 3-sine-mode dense-scan oracle at
/// 1e-4 relative.
///
/// KNOWN-RED: the criterion is unattainable on the default config. The R1
/// minimizer is a rounded tent whose sine coefficients decay like 1/k^3, so
/// the infimum over the 3-mode span is a genuinely different number: the
/// scan floor sits ~3e-2 relative ABOVE the full-space minimum (and the
/// solver value is mesh-converging and residual-certified). The test keeps
/// the stated tolerance and reports the measured gaps; the attainable
/// containment direction (scan >= solver) is asserted first.
#[test]
fn criterion_6_subspace_oracle_agreement() {
    let start = Instant::now();
    let (spec, cfg) = default_problem();

    let scan_r1 = sine_subspace_scan(&spec, |u| duophase::r1(u, &spec).unwrap_or(f64::INFINITY));
    let scan_r2 = sine_subspace_scan(&spec, |u| r2(u, &spec).unwrap_or(f64::INFINITY));

    let first = minimize_r1(&spec, &cfg).unwrap();
    let second = minimize_r2(&spec, &cfg).unwrap();

    // the scan minimizes over a subset, so it can never undercut the solver
    assert!(scan_r1 >= first.value - 1e-9 * first.value.abs());
    assert!(scan_r2 >= second.value - 1e-9 * second.value.abs());

    let gap_r1 = (scan_r1 - first.value).abs() / first.value.abs();
    let gap_r2 = (scan_r2 - second.value).abs() / second.value.abs();
    let elapsed = start.elapsed();
    report(
        "6",
        gap_r1 <= 1e-4 && gap_r2 <= 1e-4 && elapsed.as_secs_f64() < 120.0,
        format!(
            "lambda_star solver {:.8e} vs 3-mode scan {scan_r1:.8e} (rel gap {gap_r1:.3e}); \
             lambda_lower solver {:.8e} vs scan {scan_r2:.8e} (rel gap {gap_r2:.3e}); \
             tolerance 1e-4; the 3-mode span cannot represent the rounded-tent minimizer, \
             see docs for the analysis; {elapsed:.2?}",
            first.value, second.value
        ),
    );
}

/// Criterion 7: weight optimization matches brute-force re-enumeration with
/// doubled restarts on a 5-member family, and the zero weight beats the
/// positive constant weight.
#[test]
fn criterion_7_weight_optimization() {
    let start = Instant::now();
    let (spec, cfg) = default_problem();
    let mesh = spec.mesh();

    let mut rng = StdRng::seed_from_u64(4242);
    let mut members: Vec<(String, GridFunction)> = Vec::new();
    for k in 0..5 {
        let freq = rng.random_range(1.0..9.0);
        let amp = rng.random_range(-0.8..0.8);
        let shift = rng.random_range(-0.3..0.3);
        members.push((
            format!("w{k}"),
            mesh.interpolate(|p| amp * (freq * p[0]).sin() + shift)
                .unwrap(),
        ));
    }
    let family = duophase::WeightFamily::new(members.clone()).unwrap();
    let outcome = duophase::optimize(&family, &spec, &cfg).unwrap();

    // brute force: evaluate every member independently with doubled restarts
    let doubled = QuotientConfig {
        restarts: cfg.restarts * 2,
        ..cfg.clone()
    };
    let mut brute: Vec<(String, f64)> = Vec::new();
    for (name, w) in &members {
        brute.push((
            name.clone(),
            duophase::lambda_star_of(w, &spec, &doubled).unwrap(),
        ));
    }
    let brute_winner = brute
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    assert_eq!(
        outcome.winner, brute_winner.0,
        "argmin mismatch: optimize chose {} (value {:.8e}), brute force {} (value {:.8e})",
        outcome.winner, outcome.value, brute_winner.0, brute_winner.1
    );

    // monotone pair: zero weight beats the positive constant weight
    let pair = duophase::WeightFamily::new(vec![
        ("zero".into(), GridFunction::zero(mesh)),
        ("one".into(), mesh.interpolate(|_| 1.0).unwrap()),
    ])
    .unwrap();
    let pair_outcome = duophase::optimize(&pair, &spec, &cfg).unwrap();
    assert_eq!(pair_outcome.winner, "zero");

    let elapsed = start.elapsed();
    report(
        "7",
        elapsed.as_secs_f64() < 600.0,
        format!(
            "5-member argmin {} agrees with doubled-restart brute force, zero beats one, {elapsed:.2?}",
            outcome.winner
        ),
    );
}

/// Criterion 8: R1 blow-up probe along rays through 10 random unit-norm
/// functions at t = 1e-3 and t = 1e3.
#[test]
fn criterion_8_blowup_probe() {
    let start = Instant::now();
    let (spec, _) = default_problem();
    let p2 = spec.psi().exponent();
    let mut rng = StdRng::seed_from_u64(8);
    let mut min_factor = f64::INFINITY;
    for _ in 0..10 {
        let mut u = random_function(spec.mesh(), &mut rng, 1.0);
        let norm = duophase::sobolev_norm(&u, p2).unwrap();
        u.scale(1.0 / norm);
        let base = duophase::r1(&u, &spec).unwrap();
        for t in [1e-3, 1e3] {
            let factor = duophase::r1(&u.scaled(t), &spec).unwrap() / base;
            min_factor = min_factor.min(factor);
            assert!(factor >= 10.0, "t = {t}: factor {factor:.2}");
        }
    }
    let elapsed = start.elapsed();
    report(
        "8",
        elapsed.as_secs_f64() < 10.0,
        format!("10 random rays, min blow-up factor {min_factor:.1}, {elapsed:.2?}"),
    );
}

/// Criterion 9: two `thresholds` runs of the CLI with identical config and
/// seed produce byte-identical CSVs.
#[test]
fn criterion_9_byte_identical_runs() {
    let start = Instant::now();
    let dir = std::env::temp_dir().join(format!("duophase-acc9-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("p.cfg");
    std::fs::write(&config, "problem.mesh = 256\nsolver.seed = 42\n").unwrap();
    for label in ["a", "b"] {
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_duophase"))
            .args([
                "thresholds",
                "--config",
                config.to_str().unwrap(),
                "--out",
                dir.join(label).to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(
            output.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let run_a = dir.join("a").join("thresholds").join("run");
    let run_b = dir.join("b").join("thresholds").join("run");
    let mut compared = 0usize;
    for entry in std::fs::read_dir(&run_a).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(run_a.join(&name)).unwrap();
        let b = std::fs::read(run_b.join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between identical runs");
        compared += 1;
    }
    assert!(
        compared >= 4,
        "expected several output files, saw {compared}"
    );
    let elapsed = start.elapsed();
    report(
        "9",
        true,
        format!("{compared} files byte-identical across reruns, {elapsed:.2?}"),
    );
}
