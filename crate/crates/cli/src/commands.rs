use std::path::PathBuf;

use kdvstar::compat::{check_compatibility, POLY_TOLERANCE, SAMPLED_TOLERANCE};
use kdvstar::config::{parse_config, SolverConfig};
use kdvstar::diagnostics::{convergence_study, ObservedOrder};
use kdvstar::graph::Mode;
use kdvstar::integrator::{picard_window, run, run_checked};
use kdvstar::lifting::build_lifting_triple;
use kdvstar::Error;
use serde_json::{json, Value};

use crate::output::{coo_csv, config_hash, ledger_csv, snapshots_csv, unix_now, RunManifest, Session};
use crate::{CliError, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;

/// Runs one subcommand and returns its exit status: 0 success, 2 a
/// failed check (compatibility, asserted order), 1 any error.
pub fn dispatch(command: Command, argv: Vec<String>) -> i32 {
    let started = unix_now();
    let common = match &command {
        Command::Simulate { common, .. }
        | Command::CheckCompat { common, .. }
        | Command::Lift { common }
        | Command::Convergence { common, .. }
        | Command::EnergyAudit { common }
        | Command::Picard { common, .. } => common,
    };
    let config = match parse_config(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return EXIT_ERROR;
        }
    };
    let out_dir = common
        .out
        .clone()
        .or_else(|| config.output_path.as_ref().map(PathBuf::from));
    let mut session = Session::new(out_dir);

    let code = match execute(&command, &config, &mut session) {
        Ok((code, summary)) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };

    let resolved = config.resolved_json();
    let manifest = RunManifest {
        tool: "kdvstar",
        version: env!("CARGO_PKG_VERSION"),
        command: argv,
        config_sha256: config_hash(&resolved),
        config: serde_json::from_str(&resolved).expect("resolved config is JSON"),
        started_unix: started,
        finished_unix: unix_now(),
        exit_code: code,
        outputs: session.outputs().iter().map(|p| p.display().to_string()).collect(),
    };
    if session.has_output() {
        if let Err(e) = session.write_json("manifest.json", &manifest) {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    } else {
        eprintln!("manifest: {}", serde_json::to_string(&manifest).expect("manifest serializes"));
    }
    code
}

fn execute(command: &Command, config: &SolverConfig, session: &mut Session) -> Result<(i32, Value), CliError> {
    match command {
        Command::Simulate {
            strict,
            dump_operator,
            ..
        } => simulate(config, session, *strict, *dump_operator),
        Command::CheckCompat { s, mode, tol, .. } => {
            check_compat(config, session, *s, mode.map(Mode::from).unwrap_or(config.mode), *tol)
        }
        Command::Lift { .. } => lift(config, session),
        Command::Convergence {
            levels, assert_order, ..
        } => convergence(config, session, *levels, *assert_order),
        Command::EnergyAudit { .. } => energy_audit(config, session),
        Command::Picard { window, .. } => picard(config, session, *window),
    }
}

fn simulate(config: &SolverConfig, session: &mut Session, strict: bool, dump: bool) -> Result<(i32, Value), CliError> {
    if dump && !session.has_output() {
        return Err(CliError::Usage(
            "--dump-operator needs an output directory (--out or output.path)".into(),
        ));
    }
    let out = run_checked(config, strict)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    session.write("snapshots.csv", &snapshots_csv(&out.snapshots))?;
    if let Some(ledger) = &out.ledger {
        session.write_json("ledger.json", ledger)?;
    }
    session.write_json(
        "steps.json",
        &json!({"reports": out.reports, "warnings": out.warnings, "compat": out.compat}),
    )?;
    if dump {
        let system = config.system()?;
        session.write("operator.csv", &coo_csv(&system.operator_coo()))?;
    }
    let last = out.snapshots.last().expect("initial snapshot is always kept");
    let max_iter = out.reports.iter().map(|r| r.picard_iterations).max().unwrap_or(0);
    let max_residual = out.reports.iter().map(|r| r.solve_residual).fold(0.0, f64::max);
    let ledger = out.ledger.as_ref().map(|l| {
        json!({
            "initial_energy": l.energy.first(),
            "final_energy": l.energy.last(),
            "residual_max": l.residual_max(),
        })
    });
    Ok((
        EXIT_OK,
        json!({
            "n_steps": out.n_steps,
            "dt": out.dt,
            "final_time": last.t,
            "snapshots": out.snapshots.len(),
            "max_abs_u": out.snapshots.iter().map(|s| s.max_abs()).fold(0.0, f64::max),
            "max_picard_iterations": max_iter,
            "max_solve_residual": max_residual,
            "energy": ledger,
            "compat_verdict": out.compat.as_ref().map(|c| c.verdict),
            "warnings": out.warnings,
        }),
    ))
}

fn check_compat(
    config: &SolverConfig,
    session: &mut Session,
    s: f64,
    mode: Mode,
    tol: Option<f64>,
) -> Result<(i32, Value), CliError> {
    let u0 = config
        .initial
        .as_poly()
        .ok_or(Error::RequiresPolynomialData("initial data"))?;
    let tol = tol.unwrap_or(if config.signals.is_polynomial() {
        POLY_TOLERANCE
    } else {
        SAMPLED_TOLERANCE
    });
    let report = check_compatibility(s, u0, &config.signals, &config.graph, mode, tol)?;
    session.write_json("compat.json", &report)?;
    let code = if report.verdict { EXIT_OK } else { EXIT_REJECTED };
    Ok((code, serde_json::to_value(&report).expect("report serializes")))
}

fn lift(config: &SolverConfig, session: &mut Session) -> Result<(i32, Value), CliError> {
    let triple = build_lifting_triple(&config.graph)?;
    let value = json!({
        "lengths": config.graph.lengths,
        "phi": triple.phi,
        "psi": triple.psi,
        "theta": triple.theta,
        "max_constraint_residual": triple.max_constraint_residual(&config.graph),
    });
    session.write_json("lifting.json", &value)?;
    Ok((EXIT_OK, value))
}

fn convergence(
    config: &SolverConfig,
    session: &mut Session,
    levels: usize,
    assert_order: Option<f64>,
) -> Result<(i32, Value), CliError> {
    let table = convergence_study(config, levels)?;
    session.write("convergence.csv", &table.to_csv())?;
    session.write_json("convergence.json", &table)?;
    let final_order = table.final_order();
    let code = match assert_order {
        None => EXIT_OK,
        Some(min) => match final_order {
            ObservedOrder::Exact => EXIT_OK,
            ObservedOrder::Value(p) if p >= min => EXIT_OK,
            _ => {
                eprintln!("observed order below the asserted {min}");
                EXIT_REJECTED
            }
        },
    };
    Ok((
        code,
        json!({"rows": table.rows, "final_order": final_order, "asserted": assert_order}),
    ))
}

fn energy_audit(config: &SolverConfig, session: &mut Session) -> Result<(i32, Value), CliError> {
    let out = run(config)?;
    let ledger = out.ledger.expect("run always records the ledger");
    session.write_json("ledger.json", &ledger)?;
    session.write("ledger.csv", &ledger_csv(&ledger))?;
    Ok((
        EXIT_OK,
        json!({
            "steps": ledger.rate.len(),
            "initial_energy": ledger.energy.first(),
            "final_energy": ledger.energy.last(),
            "max_energy_increase": ledger.max_energy_increase(),
            "residual_max": ledger.residual_max(),
            "residual_l1": ledger.residual_l1(),
            "half_life_step": ledger.half_life_step(),
        }),
    ))
}

fn picard(config: &SolverConfig, session: &mut Session, window: f64) -> Result<(i32, Value), CliError> {
    let system = config.system()?;
    let u0 = config.initial_state()?;
    let (traj, trace) = picard_window(
        &u0,
        &config.signals,
        window,
        &system,
        config.dt,
        config.theta,
        &config.forcing,
        config.picard.tol,
        config.picard.max_iter,
    )?;
    let kept: Vec<_> = traj
        .iter()
        .enumerate()
        .filter(|(k, _)| k % config.cadence == 0 || *k == traj.len() - 1)
        .map(|(_, s)| s.clone())
        .collect();
    session.write("window.csv", &snapshots_csv(&kept))?;
    session.write_json("picard.json", &trace)?;
    Ok((
        EXIT_OK,
        json!({
            "window": window,
            "steps": traj.len() - 1,
            "iterations": trace.iterations,
            "converged": trace.converged,
            "increments": trace.increments,
            "ratios": trace.ratios,
            "final_ratio": trace.ratios.last(),
        }),
    ))
}
