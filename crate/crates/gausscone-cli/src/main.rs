//! Command-line surface: one verb per library capability.
//!
//! Exit codes: 0 success, 2 not converged / audit violations, 3 input error.
//! Verbosity comes from GAUSSCONE_LOG={error|info|debug} (default error).

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use gausscone::cone::Direction;
use gausscone::error::Error;
use gausscone::io::{self, Gauge};
use gausscone::oracle::{self, GridSpec};
use gausscone::pseudocone::PseudoCone;
use gausscone::pushforward;
use gausscone::solver::{self, SolverConfig};

#[derive(Parser)]
#[command(
    name = "gausscone",
    version,
    about = "Discrete Gauss image problem for C-pseudo-cones"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance for the pseudo-cone with the prescribed Gauss image measure.
    Solve(SolveArgs),
    /// Re-verify a result file against its instance.
    Verify(VerifyArgs),
    /// Push a lambda measure forward through a candidate pseudo-cone.
    Pushforward(PushforwardArgs),
    /// Copolar dual of a pseudo-cone file.
    Dual(DualArgs),
    /// Evaluate the radial or support function of a pseudo-cone.
    Eval(EvalArgs),
    /// Run the built-in cross-checking oracles on random instances.
    Audit(AuditArgs),
    /// Generate a random instance file.
    Gen(GenArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Random-normal initialization seed (default: start from zero log-radii).
    #[arg(long)]
    seed: Option<u64>,
    /// Softmin warm-start temperature; 0 disables the smoothing phase.
    #[arg(long)]
    tau: Option<f64>,
    /// Output gauge: mean-zero (default) or unit-distance.
    #[arg(long)]
    gauge: Option<String>,
    /// Write the result JSON here (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-vertex plot CSV here (n = 2 also gets `<plot>.boundary.csv`).
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    result: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct PushforwardArgs {
    instance: PathBuf,
    /// Result file supplying log-radii (default: unit radii).
    #[arg(long)]
    result: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DualArgs {
    pseudocone: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    pseudocone: PathBuf,
    /// Evaluate the radial function (directions in Omega_C).
    #[arg(long, conflicts_with = "support")]
    radial: bool,
    /// Evaluate the support function (directions in cl Omega_{C°}).
    #[arg(long)]
    support: bool,
    /// Comma-separated direction, repeatable: --dir 0.6,0.8 --dir 1,2
    #[arg(long = "dir", required = true)]
    dirs: Vec<String>,
}

#[derive(Args)]
struct AuditArgs {
    /// Comma-separated subset of duality,variation,subgradient,oracle.
    #[arg(long, default_value = "duality,variation,subgradient,oracle")]
    checks: String,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ambient dimension of the generated audit instances.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Number of random instances per check.
    #[arg(long, default_value_t = 5)]
    instances: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    m_lambda: usize,
    #[arg(long, default_value_t = 3)]
    m_mu: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip rescaling to equal total masses.
    #[arg(long)]
    unbalanced: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn log_level() -> u8 {
    match std::env::var("GAUSSCONE_LOG").as_deref() {
        Ok("debug") => 2,
        Ok("info") => 1,
        _ => 0,
    }
}

macro_rules! info {
    ($($t:tt)*) => {
        if log_level() >= 1 { eprintln!($($t)*); }
    };
}

macro_rules! debug {
    ($($t:tt)*) => {
        if log_level() >= 2 { eprintln!($($t)*); }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::NotConverged { .. } | Error::LpFailure { .. } => 2,
        _ => 3,
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> gausscone::Result<()> {
    match out {
        Some(path) => io::write_string(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> gausscone::Result<u8> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Pushforward(args) => cmd_pushforward(args),
        Command::Dual(args) => cmd_dual(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn cmd_solve(args: SolveArgs) -> gausscone::Result<u8> {
    let loaded = io::load_instance(&args.instance)?;
    let mut config: SolverConfig = loaded.config;
    if let Some(t) = args.tol {
        config.tol = t;
    }
    if let Some(mi) = args.max_iter {
        config.max_iter = mi;
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if let Some(tau) = args.tau {
        config.tau = if tau > 0.0 { Some(tau) } else { None };
    }
    let gauge = match &args.gauge {
        Some(g) => io::parse_gauge(g)?,
        None => loaded.gauge,
    };
    let p = loaded.problem;
    info!(
        "solving: {} lambda atoms, {} mu atoms, balance ratio {:.6}",
        p.m_lambda(),
        p.m_mu(),
        p.balance_ratio()
    );
    if (p.balance_ratio() - 1.0).abs() > 1e-12 {
        eprintln!(
            "warning: unbalanced measures (|lambda|/|mu| = {:.6}); solving the normalized identity",
            p.balance_ratio()
        );
    }

    let result = solver::solve(&p, &config)?;
    debug!(
        "iterations {} residual {:.3e} raw {:.3e} certified {}",
        result.iterations, result.residual_linf, result.raw_residual_linf, result.certified
    );

    let mut dto = io::result_to_dto(&result);
    if gauge == Gauge::UnitDistance {
        let k = p.pseudo_cone(&result.log_radii)?;
        let shift = k.distance_to_origin().ln();
        for v in &mut dto.log_radii {
            *v -= shift;
        }
        info!("unit-distance gauge: shifted log-radii by {:.6e}", -shift);
    }
    emit(&args.out, &io::to_json(&dto))?;

    if let Some(plot) = &args.plot {
        io::emit_plot_data(&result, &p, plot)?;
        info!("plot data written to {}", plot.display());
    }

    if result.converged(config.tol) {
        Ok(0)
    } else {
        eprintln!(
            "not converged: residual {:.3e} > tol {:.3e} after {} iterations",
            result.residual_linf, config.tol, result.iterations
        );
        Ok(2)
    }
}

fn cmd_verify(args: VerifyArgs) -> gausscone::Result<u8> {
    let loaded = io::load_instance(&args.instance)?;
    let result = io::load_result(&args.result)?;
    let x = DVector::from_column_slice(&result.log_radii);
    let k = loaded.problem.pseudo_cone(&x)?;
    let report = solver::verify(&k, &loaded.problem, args.tol)?;
    let summary = serde_json::json!({
        "pass": report.pass,
        "residual_linf": report.residual_linf,
        "raw_residual_linf": report.raw_residual_linf,
        "per_vertex": report.per_vertex,
        "ties": report.ties,
        "masses": report.masses,
        "targets": report.targets,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(if report.pass { 0 } else { 2 })
}

fn cmd_pushforward(args: PushforwardArgs) -> gausscone::Result<u8> {
    let loaded = io::load_instance(&args.instance)?;
    let p = loaded.problem;
    let x = match &args.result {
        Some(path) => DVector::from_column_slice(&io::load_result(path)?.log_radii),
        None => DVector::zeros(p.m_mu()),
    };
    let k = p.pseudo_cone(&x)?;
    let report = pushforward(&k, p.lambda())?;
    emit(&args.out, &io::to_json(&io::pushforward_to_dto(&report)))?;
    Ok(0)
}

fn cmd_dual(args: DualArgs) -> gausscone::Result<u8> {
    let k = io::load_pseudocone(&args.pseudocone)?;
    let dual = io::dual_of(&k);
    emit(&args.out, &io::to_json(&io::pseudocone_to_dto(&dual)))?;
    Ok(0)
}

fn cmd_eval(args: EvalArgs) -> gausscone::Result<u8> {
    if !args.radial && !args.support {
        return Err(Error::Parse {
            pointer: "--radial/--support".into(),
            message: "pick one of --radial or --support".into(),
        });
    }
    let k = io::load_pseudocone(&args.pseudocone)?;
    let mut dirs = Vec::new();
    for (i, raw) in args.dirs.iter().enumerate() {
        let coords: std::result::Result<Vec<f64>, _> =
            raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let coords = coords.map_err(|e| Error::Parse {
            pointer: format!("--dir[{i}]"),
            message: e.to_string(),
        })?;
        dirs.push(Direction::from_slice(&coords)?);
    }
    let mut values = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let v = match (&k, args.radial) {
            (PseudoCone::V(k), true) => k.radial_value(d)?,
            (PseudoCone::V(k), false) => k.support_value(d)?,
            (PseudoCone::H(k), true) => k.radial_value(d)?,
            (PseudoCone::H(k), false) => k.support_value(d)?,
        };
        values.push(v);
    }
    let out = serde_json::json!({
        "op": if args.radial { "radial" } else { "support" },
        "dirs": args.dirs,
        "values": values,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(0)
}

fn cmd_audit(args: AuditArgs) -> gausscone::Result<u8> {
    let checks: Vec<&str> = args.checks.split(',').map(|s| s.trim()).collect();
    for c in &checks {
        if !["duality", "variation", "subgradient", "oracle"].contains(c) {
            return Err(Error::Parse {
                pointer: "--checks".into(),
                message: format!("unknown check {c:?}"),
            });
        }
    }
    let mut findings: Vec<serde_json::Value> = Vec::new();
    let mut violations = 0usize;

    if checks.contains(&"duality") {
        for i in 0..args.instances {
            let seed = args.seed.wrapping_add(i as u64);
            let k = random_pseudocone(args.n, seed);
            let rep = oracle::dense_duality_audit(&k, args.samples, seed);
            violations += rep.violations.len();
            findings.push(serde_json::json!({
                "check": "duality",
                "seed": seed,
                "directions": rep.directions_checked,
                "violations": rep.violations.iter().map(|v| format!("{}: {}", v.check, v.detail)).collect::<Vec<_>>(),
                "reciprocity_dev": rep.reciprocity_dev,
                "radial_dev": rep.radial_dev,
                "support_dev": rep.support_dev,
                "envelope_gap": rep.envelope_gap,
            }));
            debug!(
                "duality audit seed {seed}: {} violations",
                rep.violations.len()
            );
        }
    }
    if checks.contains(&"variation") {
        for i in 0..args.instances {
            let seed = args.seed.wrapping_add(1000 + i as u64);
            let (cone, normals, f0, g) = random_wulff_data(args.n, seed);
            let rep = oracle::wulff_variation_check(
                &cone,
                &normals,
                &f0,
                &g,
                &[1e-2, 1e-3, 1e-4],
                args.samples.min(200),
                seed,
            )?;
            let fine_dev = rep.per_t.last().map(|&(_, d)| d).unwrap_or(0.0);
            let ok = fine_dev <= 1e-6;
            if !ok {
                violations += 1;
            }
            findings.push(serde_json::json!({
                "check": "variation",
                "seed": seed,
                "per_t": rep.per_t,
                "excluded": rep.excluded,
                "c_empirical": rep.c_empirical,
                "pass": ok,
            }));
        }
    }
    if checks.contains(&"subgradient") {
        for i in 0..args.instances {
            let seed = args.seed.wrapping_add(2000 + i as u64);
            let p = io::random_problem(args.n, 4, 3, seed, true);
            let x = random_point(3, seed ^ 0xabc, 0.8);
            match oracle::fd_check_subgradient(&p, &x, 1e-4, 1e-6) {
                Ok(dev) => {
                    let ok = dev <= 1e-5;
                    if !ok {
                        violations += 1;
                    }
                    findings.push(serde_json::json!({
                        "check": "subgradient", "seed": seed, "deviation": dev, "pass": ok,
                    }));
                }
                Err(Error::TiedPoint { atom, .. }) => {
                    findings.push(serde_json::json!({
                        "check": "subgradient", "seed": seed, "skipped": format!("tied atom {atom}"),
                    }));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if checks.contains(&"oracle") {
        for i in 0..args.instances {
            let seed = args.seed.wrapping_add(3000 + i as u64);
            let p = io::random_problem(2, 3, 3, seed, true);
            let r = solver::solve(&p, &SolverConfig::default())?;
            let (gx, gphi) = oracle::grid_search_phi(
                &p,
                GridSpec {
                    lo: -2.0,
                    hi: 2.0,
                    step: 0.05,
                },
            )?;
            let _ = gx;
            let (xref, phiref) = oracle::transport_reference_potentials(&p)?;
            let _ = xref;
            let ok = r.phi <= gphi + 1e-9 && (r.phi - phiref).abs() <= 1e-8;
            if !ok {
                violations += 1;
            }
            findings.push(serde_json::json!({
                "check": "oracle", "seed": seed,
                "solver_phi": r.phi, "grid_phi": gphi, "transport_phi": phiref, "pass": ok,
            }));
        }
    }

    let report = serde_json::json!({
        "checks": checks,
        "samples": args.samples,
        "violations": violations,
        "findings": findings,
    });
    emit(
        &args.out,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("json")),
    )?;
    Ok(if violations == 0 { 0 } else { 2 })
}

fn random_pseudocone(n: usize, seed: u64) -> PseudoCone {
    use rand::RngExt;
    let mut rng = rand_chacha_rng(seed);
    let cone = Arc::new(gausscone::cone::random_simplicial_cone(n, &mut rng));
    let m = rng.random_range(2..8usize);
    if seed.is_multiple_of(2) {
        let dirs = cone.sample_interior_directions(m, seed ^ 0x55);
        let radii = (0..m).map(|_| rng.random_range(0.3..3.0)).collect();
        PseudoCone::V(gausscone::convexification(cone, dirs, radii).expect("valid"))
    } else {
        let normals = cone.dual().sample_interior_directions(m, seed ^ 0x55);
        let offsets = (0..m).map(|_| rng.random_range(0.3..3.0)).collect();
        PseudoCone::H(gausscone::wulff_shape(cone, normals, offsets).expect("valid"))
    }
}

fn random_wulff_data(
    n: usize,
    seed: u64,
) -> (Arc<gausscone::Cone>, Vec<Direction>, Vec<f64>, Vec<f64>) {
    use rand::RngExt;
    let mut rng = rand_chacha_rng(seed);
    let cone = Arc::new(gausscone::cone::random_simplicial_cone(n, &mut rng));
    let m = rng.random_range(2..6usize);
    let normals = cone.dual().sample_interior_directions(m, seed ^ 0x99);
    let f0 = (0..m).map(|_| rng.random_range(0.4..2.0)).collect();
    let g = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    (cone, normals, f0, g)
}

fn random_point(dim: usize, seed: u64, scale: f64) -> DVector<f64> {
    use rand::RngExt;
    let mut rng = rand_chacha_rng(seed);
    let mut x = DVector::from_fn(dim, |_, _| rng.random_range(-scale..scale));
    let mean = x.mean();
    for v in x.iter_mut() {
        *v -= mean;
    }
    x
}

fn rand_chacha_rng(seed: u64) -> impl rand::RngExt {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn cmd_gen(args: GenArgs) -> gausscone::Result<u8> {
    let dto = io::generate_instance(
        args.n,
        args.m_lambda,
        args.m_mu,
        args.seed,
        !args.unbalanced,
    );
    emit(&args.out, &io::to_json(&dto))?;
    if let Some(path) = &args.out {
        info!("instance written to {}", path.display());
    }
    Ok(0)
}
