//! Batch driver: `validate`, `thresholds`, `solve --lambda <v>`, and
//! `optimize-weight --weights <file>`.
//!
//! Exit codes are a stable contract: 0 on success, 1 on validation or
//! convergence failures, 2 on usage or parse errors. All numeric CSV fields
//! carry 17 significant digits and runs with a fixed seed and label are
//! byte-reproducible.

use crate::config::{parse_weight_family, RunConfig};
use crate::energy::ProblemSpec;
use crate::error::{Error, Result};
use crate::kernels::{validate_balance, validate_ellipticity, validate_growth, SampleGrid};
use crate::mesh::GridFunction;
use crate::report::ValidationReport;
use crate::solver::{
    certify_nonexistence, minimize_r1, minimize_r2, solve_at_warm, EigenResult, RestartHistory,
    SolveStatus, ThresholdResult,
};
use crate::weights::optimize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const USAGE: &str = "usage: duophase <command> --config <path> [options]

commands:
  validate                      check structural hypotheses; no output files
  thresholds                    compute lambda_star and lambda_lower
  solve --lambda <v>            solve the eigenproblem at a given lambda
  optimize-weight --weights <f> minimize lambda_star over a weight family

options:
  --config <path>   problem configuration file (required)
  --out <dir>       output directory root (default: out)
  --label <name>    run label under <out>/<command>/ (default: run)
  --seed <int>      override solver.seed
  --mesh <n[,m]>    override problem.mesh
";

struct CliArgs {
    command: String,
    config: PathBuf,
    out: PathBuf,
    label: String,
    seed: Option<u64>,
    mesh: Option<String>,
    lambda: Option<f64>,
    weights: Option<PathBuf>,
}

fn parse_args(args: &[String]) -> Result<CliArgs> {
    if args.is_empty() {
        return Err(Error::Config("missing command".into()));
    }
    let command = args[0].clone();
    let mut config = None;
    let mut out = PathBuf::from("out");
    let mut label = "run".to_string();
    let mut seed = None;
    let mut mesh = None;
    let mut lambda = None;
    let mut weights = None;
    let mut i = 1;
    while i < args.len() {
        let flag = args[i].as_str();
        let value = args
            .get(i + 1)
            .ok_or_else(|| Error::Config(format!("flag {flag} needs a value")))?;
        match flag {
            "--config" => config = Some(PathBuf::from(value)),
            "--out" => out = PathBuf::from(value),
            "--label" => label = value.clone(),
            "--seed" => {
                seed = Some(
                    value
                        .parse()
                        .map_err(|_| Error::Config(format!("bad seed `{value}`")))?,
                )
            }
            "--mesh" => mesh = Some(value.clone()),
            "--lambda" => {
                lambda = Some(
                    value
                        .parse()
                        .map_err(|_| Error::Config(format!("bad lambda `{value}`")))?,
                )
            }
            "--weights" => weights = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown flag `{other}`"))),
        }
        i += 2;
    }
    let config = config.ok_or_else(|| Error::Config("--config is required".into()))?;
    Ok(CliArgs {
        command,
        config,
        out,
        label,
        seed,
        mesh,
        lambda,
        weights,
    })
}

/// Entry point used by `main` and by integration tests. Returns the process
/// exit code.
pub fn run(args: Vec<String>) -> i32 {
    let parsed = match parse_args(&args) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            eprint!("{USAGE}");
            return 2;
        }
    };
    match dispatch(&parsed) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Expr(_) | Error::Io(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(args: &CliArgs) -> Result<i32> {
    let mut config = RunConfig::parse_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.override_seed(seed);
    }
    if let Some(mesh) = &args.mesh {
        config.override_mesh(mesh)?;
    }
    match args.command.as_str() {
        "validate" => cmd_validate(&config),
        "thresholds" => cmd_thresholds(&config, args),
        "solve" => {
            let lambda = args
                .lambda
                .ok_or_else(|| Error::Config("solve requires --lambda <v>".into()))?;
            cmd_solve(&config, lambda, args)
        }
        "optimize-weight" => {
            let weights = args
                .weights
                .clone()
                .ok_or_else(|| Error::Config("optimize-weight requires --weights <file>".into()))?;
            cmd_optimize_weight(&config, &weights, args)
        }
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

struct ValidationOutput {
    mandatory: ValidationReport,
    lines: Vec<String>,
}

fn run_validation(config: &RunConfig, spec: &ProblemSpec) -> ValidationOutput {
    let mut mandatory = ValidationReport::new();
    mandatory.push(
        "r >= 2",
        config.r >= 2.0,
        format!("r = {} (reaction derivatives stay bounded)", config.r),
    );
    for check in spec.validate().checks {
        mandatory.checks.push(check);
    }

    let grid = SampleGrid::standard(&spec.mesh().domain());
    for (kernel, name) in [
        (spec.phi(), "phi"),
        (spec.psi(), "psi"),
        (spec.theta(), "theta"),
    ] {
        let growth = validate_growth(kernel, &grid);
        mandatory.push(
            format!("growth({name})"),
            growth.pass,
            format!(
                "b = {:.6e}, offset a = {:.3e}",
                growth.b_estimate.unwrap_or(f64::NAN),
                growth.a_offset.unwrap_or(f64::NAN)
            ),
        );
        let ellip = validate_ellipticity(kernel, &grid);
        mandatory.push(
            format!("ellipticity({name})"),
            ellip.pass,
            format!("c = {:.6e}", ellip.c_estimate.unwrap_or(f64::NAN)),
        );
    }

    let p1_plus = spec.phi().exponent().p_plus();
    let p2_plus = spec.psi().exponent().p_plus();
    let literal = validate_balance(spec.phi(), spec.psi(), p1_plus, &grid);
    let variant = validate_balance(spec.phi(), spec.psi(), p1_plus.max(p2_plus), &grid);
    let mut lines = Vec::new();
    lines.push(format!(
        "[{}] balance literal (bound p1+ = {p1_plus}): relative margin {:.6e}{}",
        if literal.pass { "pass" } else { "warn" },
        literal.balance_margin_rel.unwrap_or(f64::NAN),
        if literal.pass {
            ""
        } else {
            " (warning only; solver does not rely on it)"
        }
    ));
    lines.push(format!(
        "[{}] balance variant (bound max(p1+, p2+) = {}): relative margin {:.6e}",
        if variant.pass { "pass" } else { "warn" },
        p1_plus.max(p2_plus),
        variant.balance_margin_rel.unwrap_or(f64::NAN)
    ));
    if spec.phi().derivative_is_approximate()
        || spec.psi().derivative_is_approximate()
        || spec.theta().derivative_is_approximate()
    {
        lines.push(
            "[note] expression kernels use a finite-difference xi-derivative (approximate)"
                .to_string(),
        );
    }
    ValidationOutput { mandatory, lines }
}

fn cmd_validate(config: &RunConfig) -> Result<i32> {
    let (spec, _) = config.build()?;
    let output = run_validation(config, &spec);
    print!("{}", output.mandatory);
    for line in &output.lines {
        println!("{line}");
    }
    if output.mandatory.passed() {
        println!("validation: PASS");
        Ok(0)
    } else {
        println!("validation: FAIL");
        Ok(1)
    }
}

/// Validate before a solve command; failures print the report and exit 1.
fn require_valid(config: &RunConfig, spec: &ProblemSpec) -> Result<()> {
    let output = run_validation(config, spec);
    if !output.mandatory.passed() {
        print!("{}", output.mandatory);
        return Err(Error::Precondition(
            "configuration fails mandatory validation".into(),
        ));
    }
    Ok(())
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn out_dir(args: &CliArgs, command: &str) -> PathBuf {
    args.out.join(command).join(&args.label)
}

fn write_manifest(dir: &Path, config: &RunConfig, extra: &[(String, String)]) -> Result<()> {
    let mut text = config.manifest();
    for (k, v) in extra {
        let _ = writeln!(text, "{k} = {v}");
    }
    std::fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}

fn write_grid_function(path: &Path, u: &GridFunction) -> Result<()> {
    let mesh = u.mesh();
    let mut text = String::new();
    if mesh.dimension() == 1 {
        text.push_str("x,value\n");
        for node in 0..mesh.n_nodes() {
            let p = mesh.node(node);
            let _ = writeln!(text, "{},{}", fmt17(p[0]), fmt17(u.node_value(node)));
        }
    } else {
        text.push_str("x,y,value\n");
        for node in 0..mesh.n_nodes() {
            let p = mesh.node(node);
            let _ = writeln!(
                text,
                "{},{},{}",
                fmt17(p[0]),
                fmt17(p[1]),
                fmt17(u.node_value(node))
            );
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_histories(dir: &Path, prefix: &str, histories: &[RestartHistory]) -> Result<()> {
    for history in histories {
        let mut text = String::from("iter,objective,residual_norm,step_size\n");
        for row in &history.rows {
            let _ = writeln!(
                text,
                "{},{},{},{}",
                row.iter,
                fmt17(row.objective),
                fmt17(row.residual_norm),
                fmt17(row.step_size)
            );
        }
        std::fs::write(dir.join(format!("{prefix}_r{}.csv", history.restart)), text)?;
    }
    Ok(())
}

fn cmd_thresholds(config: &RunConfig, args: &CliArgs) -> Result<i32> {
    let (spec, solver_cfg) = config.build()?;
    require_valid(config, &spec)?;

    let first = minimize_r1(&spec, &solver_cfg)?;
    let second = minimize_r2(&spec, &solver_cfg)?;

    let dir = out_dir(args, "thresholds");
    std::fs::create_dir_all(&dir)?;
    write_manifest(&dir, config, &[("command".into(), "thresholds".into())])?;

    let mut table = String::from("name,lambda,iterations,restarts_used,residual_norm\n");
    for (name, result) in [("lambda_star", &first), ("lambda_lower", &second)] {
        let _ = writeln!(
            table,
            "{name},{},{},{},{}",
            fmt17(result.value),
            result.iterations,
            result.restarts_used,
            fmt17(result.residual_norm)
        );
    }
    std::fs::write(dir.join("thresholds.csv"), table)?;
    write_grid_function(&dir.join("minimizer_r1.csv"), &first.minimizer)?;
    write_grid_function(&dir.join("minimizer_r2.csv"), &second.minimizer)?;
    write_histories(&dir, "history_r1", &first.histories)?;
    write_histories(&dir, "history_r2", &second.histories)?;

    println!("lambda_star  = {:.12e}", first.value);
    println!("lambda_lower = {:.12e}", second.value);
    println!("outputs in {}", dir.display());
    Ok(0)
}

fn region_label(lambda: f64, lambda_star: f64, lambda_lower: f64) -> &'static str {
    if lambda < lambda_lower {
        "below_lambda_lower"
    } else if lambda < lambda_star {
        "indeterminate"
    } else {
        "eigenpair_expected"
    }
}

fn cmd_solve(config: &RunConfig, lambda: f64, args: &CliArgs) -> Result<i32> {
    let (spec, solver_cfg) = config.build()?;
    require_valid(config, &spec)?;

    let first = minimize_r1(&spec, &solver_cfg)?;
    let second = minimize_r2(&spec, &solver_cfg)?;
    let region = region_label(lambda, first.value, second.value);

    let result = solve_at_warm(lambda, &spec, &solver_cfg, &first.minimizer)?;

    let dir = out_dir(args, "solve");
    std::fs::create_dir_all(&dir)?;
    write_manifest(
        &dir,
        config,
        &[
            ("command".into(), "solve".into()),
            ("lambda".into(), fmt17(lambda)),
        ],
    )?;

    let mut summary = String::from(
        "lambda,status,region,residual_norm,r1,r2,iterations,restarts_used,lambda_star,lambda_lower\n",
    );
    let _ = writeln!(
        summary,
        "{},{},{region},{},{},{},{},{},{},{}",
        fmt17(lambda),
        result.status,
        fmt17(result.residual_norm),
        fmt17(result.r1_value),
        fmt17(result.r2_value),
        result.iterations,
        result.restarts_used,
        fmt17(first.value),
        fmt17(second.value)
    );
    std::fs::write(dir.join("summary.csv"), summary)?;

    let energies = spec.energies(&result.u)?;
    let mut energy_csv = String::from("phi,psi,theta,e2,total,lambda\n");
    let _ = writeln!(energy_csv, "{}", energies.csv_row(lambda));
    std::fs::write(dir.join("energies.csv"), energy_csv)?;

    write_grid_function(&dir.join("eigenfunction.csv"), &result.u)?;
    write_histories(&dir, "history", &result.histories)?;

    if region == "below_lambda_lower" {
        let certificate = certify_nonexistence(lambda, second.value, &spec, &solver_cfg)?;
        std::fs::write(dir.join("certificate.txt"), format!("{certificate}\n"))?;
        println!("{certificate}");
    }

    println!(
        "lambda = {lambda:.12e}: status {}, region {region}, residual {:.3e}",
        result.status, result.residual_norm
    );
    println!("outputs in {}", dir.display());

    // a converged eigenpair below lambda_lower would falsify the discrete
    // identity behind the certificate
    if result.status == SolveStatus::Converged && region == "below_lambda_lower" {
        eprintln!("error: converged below lambda_lower; discrete identity violated");
        return Ok(1);
    }
    Ok(0)
}

fn cmd_optimize_weight(config: &RunConfig, weights_path: &Path, args: &CliArgs) -> Result<i32> {
    let (spec, solver_cfg) = config.build()?;
    require_valid(config, &spec)?;

    let text = std::fs::read_to_string(weights_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", weights_path.display())))?;
    let family = parse_weight_family(&text, spec.mesh())?;
    let outcome = optimize(&family, &spec, &solver_cfg)?;

    let dir = out_dir(args, "optimize-weight");
    std::fs::create_dir_all(&dir)?;
    write_manifest(
        &dir,
        config,
        &[
            ("command".into(), "optimize-weight".into()),
            ("weights_file".into(), weights_path.display().to_string()),
        ],
    )?;

    let mut table = String::from("weight_name,lambda_star,iterations,restarts_used\n");
    for row in &outcome.table {
        let _ = writeln!(
            table,
            "{},{},{},{}",
            row.name,
            fmt17(row.lambda_star),
            row.iterations,
            row.restarts_used
        );
    }
    std::fs::write(dir.join("weights.csv"), table)?;
    std::fs::write(dir.join("winner.txt"), format!("{}\n", outcome.winner))?;

    println!(
        "best weight: {} (lambda_star = {:.12e})",
        outcome.winner, outcome.value
    );
    println!("outputs in {}", dir.display());
    Ok(0)
}

/// Helper for `EigenResult` consumers that need the summary line format.
pub fn summary_line(result: &EigenResult) -> String {
    format!(
        "lambda={} status={} residual={} r1={} r2={}",
        fmt17(result.lambda),
        result.status,
        fmt17(result.residual_norm),
        fmt17(result.r1_value),
        fmt17(result.r2_value)
    )
}

/// Helper shared with the Python bindings: threshold summary text.
pub fn threshold_line(name: &str, result: &ThresholdResult) -> String {
    format!(
        "{name}={} iterations={} restarts={} residual={}",
        fmt17(result.value),
        result.iterations,
        result.restarts_used,
        fmt17(result.residual_norm)
    )
}
