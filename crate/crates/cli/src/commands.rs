use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use riskeig::model::{
    check_lyapunov, check_reachability, validate_model, LyapunovCert, Reachability,
    ValidationReport,
};
use riskeig::montecarlo::simulate as run_simulation;
use riskeig::oracle::brute_force_lambda_star;
use riskeig::pia::ConvergedBy;
use riskeig::{
    run_pia, solve_ladder, DirichletDomain, EigenOptions, Error, Exec, LadderConfig, Model,
    ModelSource, PiaConfig, PiaTrace, Policy, SimConfig, SimEstimate, SolveReport, TimeKind,
};

use crate::error::CliError;
use crate::output::{fmt_f64, print_json, OutDir};
use crate::{CompareArgs, OracleArgs, PiaArgs, SimulateArgs, SolveArgs, ValidateArgs};

struct Loaded {
    path: PathBuf,
    source: ModelSource,
    model: Model,
    cert: Option<LyapunovCert>,
}

impl Loaded {
    fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let source = ModelSource::from_json(&text).map_err(CliError::Load)?;
        let (model, cert) = source.resolve().map_err(CliError::Load)?;
        Ok(Self {
            path: path.to_path_buf(),
            source,
            model,
            cert,
        })
    }

    /// Loads and rejects models that fail validation.
    fn checked(path: &Path) -> Result<Self, CliError> {
        let loaded = Self::read(path)?;
        let report = validate_model(&loaded.model);
        if !report.passed {
            for v in &report.violations {
                eprintln!(
                    "violation: state {} action {:?} {:?} margin {:e}",
                    v.state, v.action, v.quantity, v.margin
                );
            }
            return Err(CliError::Invalid);
        }
        Ok(loaded)
    }

    fn manifest_source(&self) -> Value {
        json!({ "path": self.path.display().to_string(), "source": self.source })
    }
}

fn config_echo<T: Serialize>(args: &T, exec: &Exec) -> Value {
    let mut v = serde_json::to_value(args).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut v {
        map.insert("threads".into(), json!(exec.threads()));
    }
    v
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn read_policy(path: &Path) -> Result<Policy, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("policy file {}: {e}", path.display())))
}

#[derive(Serialize)]
struct ValidateOutput {
    kind: TimeKind,
    states: usize,
    reference_state: usize,
    closed: bool,
    policy_count: u128,
    passed: bool,
    model: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    lyapunov: Option<ValidationReport>,
    path_condition: ValidationReport,
}

pub fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let loaded = Loaded::read(&args.model)?;
    let m = &loaded.model;
    let model = validate_model(m);
    let lyapunov = match &loaded.cert {
        Some(c) if model.passed => Some(check_lyapunov(m, c)?),
        _ => None,
    };
    let passed = model.passed && lyapunov.as_ref().is_none_or(|r| r.passed);
    let out = ValidateOutput {
        kind: m.kind(),
        states: m.size(),
        reference_state: m.reference_state(),
        closed: m.closed(),
        policy_count: m.policy_count(),
        passed,
        model,
        lyapunov,
        path_condition: check_reachability(m, Reachability::PathCondition),
    };
    print_json(&out)?;
    if let Some(dir) = &args.out {
        let mut o = OutDir::create(dir, args.force)?;
        o.json("report.json", &out)?;
        o.finish(
            "validate",
            loaded.manifest_source(),
            config_echo(args, &Exec::serial()),
        )?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Invalid)
    }
}

/// Runs the ladder; a non-stabilizing ladder still yields its report.
fn ladder(loaded: &Loaded, cfg: &LadderConfig) -> Result<(SolveReport, bool), CliError> {
    match solve_ladder(&loaded.model, cfg) {
        Ok(r) => {
            let ok = r.converged;
            Ok((r, ok))
        }
        Err(Error::LadderNotConverged(r)) => Ok((*r, false)),
        Err(e) => Err(e.into()),
    }
}

fn rung_rows(report: &SolveReport) -> impl Iterator<Item = Vec<String>> + '_ {
    report.rungs.iter().map(|r| {
        vec![
            r.n.to_string(),
            fmt_f64(r.rho),
            r.iterations.to_string(),
            fmt_f64(r.cw_gap),
        ]
    })
}

pub fn solve(args: &SolveArgs, exec: &Exec) -> Result<(), CliError> {
    let loaded = Loaded::checked(&args.model)?;
    let cfg = LadderConfig {
        rung_sizes: if args.auto { None } else { args.rungs.clone() },
        tol_rho: args.tol_rho,
        watch_set: args.watch.clone(),
        mode: args.mode.into(),
        eigen: EigenOptions {
            exec: exec.clone(),
            ..EigenOptions::default().with_tol(args.tol)
        },
        certificate: loaded.cert.clone(),
        lambda_m_estimate: args.lambda_m,
        seed: args.seed,
        ..LadderConfig::default()
    };
    let (report, converged) = ladder(&loaded, &cfg)?;
    warn_all(&report.warnings);

    let mut out = OutDir::create(&args.out.out, args.out.force)?;
    out.json("report.json", &report)?;
    out.csv(
        "rungs.csv",
        &["n", "rho_n", "iterations", "cw_gap"],
        rung_rows(&report),
    )?;
    out.json("policy.json", &report.policy)?;
    out.finish("solve", loaded.manifest_source(), config_echo(args, exec))?;

    print_json(&json!({
        "lambda_star": report.lambda_star(),
        "converged": converged,
        "rungs": report.rungs.iter().map(|r| r.n).collect::<Vec<_>>(),
        "residual": report.residual,
        "supersolution_residual": report.near_monotone.as_ref().map(|d| d.supersolution_residual),
        "out": out_path(&args.out.out),
    }))?;
    if converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(
            "truncation ladder did not stabilize; see rungs.csv".into(),
        ))
    }
}

fn out_path(p: &Path) -> String {
    p.display().to_string()
}

fn pia_trace(
    loaded: &Loaded,
    initial: Option<Policy>,
    domain: Option<DirichletDomain>,
    tol: f64,
    max_iters: usize,
    exec: &Exec,
) -> Result<PiaTrace, CliError> {
    let defaults = PiaConfig::default();
    let cfg = PiaConfig {
        initial_policy: initial,
        domain,
        tol_lambda: tol,
        tol_theta: tol,
        max_iters,
        eigen: EigenOptions {
            exec: exec.clone(),
            ..defaults.eigen.clone()
        },
    };
    let trace = run_pia(&loaded.model, &cfg)?;
    warn_all(&trace.warnings);
    Ok(trace)
}

pub fn pia(args: &PiaArgs, exec: &Exec) -> Result<(), CliError> {
    let loaded = Loaded::checked(&args.model)?;
    let initial = match args.init.as_str() {
        "uniform" => None,
        path => Some(read_policy(Path::new(path))?),
    };
    let domain = args
        .truncation
        .map(|n| DirichletDomain::prefix(&loaded.model, n))
        .transpose()?;
    let trace = pia_trace(&loaded, initial, domain, args.tol, args.max_iters, exec)?;

    let mut out = OutDir::create(&args.out.out, args.out.force)?;
    out.json("report.json", &trace)?;
    out.csv(
        "iters.csv",
        &["k", "lambda_k", "max_theta", "policy_changes"],
        trace.iterates.iter().map(|it| {
            vec![
                it.k.to_string(),
                fmt_f64(it.lambda),
                fmt_f64(it.theta_max),
                it.policy_changes.to_string(),
            ]
        }),
    )?;
    out.json("policy.json", trace.policy())?;
    out.finish("pia", loaded.manifest_source(), config_echo(args, exec))?;

    print_json(&json!({
        "lambda": trace.lambda(),
        "iterations": trace.iterates.len() - 1,
        "converged_by": trace.converged_by,
        "out": out_path(&args.out.out),
    }))?;
    if trace.converged_by == ConvergedBy::MaxIters {
        return Err(CliError::NotConverged(format!(
            "policy iteration stopped at the iteration cap {}",
            args.max_iters
        )));
    }
    Ok(())
}

pub fn oracle(args: &OracleArgs, exec: &Exec) -> Result<(), CliError> {
    let loaded = Loaded::checked(&args.model)?;
    let res = brute_force_lambda_star(&loaded.model, args.cap, exec)?;
    let reducible = res.table.iter().filter(|r| r.reducible).count();
    if reducible > 0 {
        eprintln!("warning: {reducible} policies have reducible matrices");
    }
    let summary = json!({
        "lambda_star": res.lambda_star,
        "argmin_policy": res.argmin_policy,
        "argmin_vector": res.argmin_vector,
        "policy_count": res.table.len(),
        "reducible_policies": reducible,
    });

    let mut out = OutDir::create(&args.out.out, args.out.force)?;
    out.json("report.json", &summary)?;
    out.csv(
        "oracle.csv",
        &["policy", "value", "reducible"],
        res.table
            .iter()
            .map(|r| vec![r.policy.encode(), fmt_f64(r.value), r.reducible.to_string()]),
    )?;
    out.json("policy.json", &res.argmin_policy)?;
    out.finish("oracle", loaded.manifest_source(), config_echo(args, exec))?;

    print_json(&json!({
        "lambda_star": res.lambda_star,
        "argmin_policy": res.argmin_policy.encode(),
        "out": out_path(&args.out.out),
    }))
}

pub fn simulate(args: &SimulateArgs, exec: &Exec) -> Result<(), CliError> {
    let loaded = Loaded::checked(&args.model)?;
    let policy = read_policy(&args.policy)?;
    let cfg = SimConfig {
        start_state: args.start.unwrap_or(loaded.model.reference_state()),
        batch_count: args.batches,
        exec: exec.clone(),
        ..SimConfig::new(args.horizon, args.paths, args.seed)
    };
    let est = run_simulation(&loaded.model, &policy, &cfg)?;
    if est.degenerate {
        eprintln!("warning: a single path carries most of the exponential weight");
    }

    let mut out = OutDir::create(&args.out.out, args.out.force)?;
    out.json("report.json", &json!({ "estimate": est, "policy": policy }))?;
    out.finish(
        "simulate",
        loaded.manifest_source(),
        config_echo(args, exec),
    )?;
    print_json(&est)
}

#[derive(Debug, Serialize)]
struct Row {
    method: &'static str,
    lambda: f64,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    diff_vs_oracle: Option<f64>,
    diff_vs_ladder: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn compare(args: &CompareArgs, exec: &Exec) -> Result<(), CliError> {
    let loaded = Loaded::checked(&args.model)?;
    let mut out = OutDir::create(&args.out.out, args.out.force)?;
    let m = &loaded.model;
    let mut skipped: Vec<String> = Vec::new();

    let cfg = LadderConfig {
        mode: args.mode.into(),
        eigen: EigenOptions {
            exec: exec.clone(),
            ..EigenOptions::default().with_tol(args.tol)
        },
        certificate: loaded.cert.clone(),
        seed: args.seed,
        ..LadderConfig::default()
    };
    let (report, ladder_ok) = ladder(&loaded, &cfg)?;
    warn_all(&report.warnings);
    let l = report.lambda_star();

    let trace = match pia_trace(
        &loaded,
        None,
        Some(report.final_pair.domain.clone()),
        1e-10,
        PiaConfig::default().max_iters,
        exec,
    ) {
        Ok(t) => Some(t),
        Err(e) => {
            skipped.push(format!("pia: {e}"));
            None
        }
    };

    let oracle = if m.policy_count() > args.cap {
        skipped.push(format!(
            "oracle: {} policies above the cap {}",
            m.policy_count(),
            args.cap
        ));
        None
    } else {
        match brute_force_lambda_star(m, args.cap, exec) {
            Ok(r) => Some(r),
            Err(e) => {
                skipped.push(format!("oracle: {e}"));
                None
            }
        }
    };
    let o = oracle.as_ref().map(|r| r.lambda_star);

    let sim_cfg = SimConfig {
        start_state: m.reference_state(),
        exec: exec.clone(),
        ..SimConfig::new(args.horizon, args.paths, args.seed)
    };
    let sim: Option<SimEstimate> = match run_simulation(m, &report.policy, &sim_cfg) {
        Ok(e) => Some(e),
        Err(e) => {
            skipped.push(format!("simulate: {e}"));
            None
        }
    };
    for s in &skipped {
        eprintln!("skipped {s}");
    }

    let row = |method, lambda: f64, ci: Option<(f64, f64)>| Row {
        method,
        lambda,
        ci_low: ci.map(|c| c.0),
        ci_high: ci.map(|c| c.1),
        diff_vs_oracle: o.map(|o| (lambda - o).abs()),
        diff_vs_ladder: (lambda - l).abs(),
    };
    let mut table = vec![row("ladder", l, None)];
    if let Some(t) = &trace {
        table.push(row("pia", t.lambda(), None));
    }
    if let Some(o) = o {
        table.push(row("oracle", o, None));
    }
    if let Some(s) = &sim {
        table.push(row("simulate", s.point, Some((s.ci_low, s.ci_high))));
    }

    let full = json!({
        "ladder": {
            "lambda": l,
            "converged": ladder_ok,
            "rungs": report.rungs,
            "residual": report.residual,
            "policy": report.policy,
        },
        "pia": trace.as_ref().map(|t| json!({
            "lambda": t.lambda(),
            "iterations": t.iterates.len() - 1,
            "converged_by": t.converged_by,
            "policy": t.policy(),
        })),
        "oracle": oracle.as_ref().map(|r| json!({
            "lambda_star": r.lambda_star,
            "argmin_policy": r.argmin_policy,
            "policy_count": r.table.len(),
        })),
        "simulate": sim,
        "skipped": skipped,
        "table": table,
    });
    out.json("report.json", &full)?;
    out.csv(
        "compare.csv",
        &[
            "method",
            "lambda",
            "ci_low",
            "ci_high",
            "diff_vs_oracle",
            "diff_vs_ladder",
        ],
        table.iter().map(|r| {
            vec![
                r.method.to_string(),
                fmt_f64(r.lambda),
                opt(r.ci_low),
                opt(r.ci_high),
                opt(r.diff_vs_oracle),
                fmt_f64(r.diff_vs_ladder),
            ]
        }),
    )?;
    out.finish("compare", loaded.manifest_source(), config_echo(args, exec))?;
    print_json(&table)?;

    let pia_ok = trace
        .as_ref()
        .is_some_and(|t| t.converged_by != ConvergedBy::MaxIters);
    if !ladder_ok {
        Err(CliError::NotConverged(
            "truncation ladder did not stabilize".into(),
        ))
    } else if !pia_ok {
        Err(CliError::NotConverged(
            "policy iteration did not converge".into(),
        ))
    } else {
        Ok(())
    }
}
