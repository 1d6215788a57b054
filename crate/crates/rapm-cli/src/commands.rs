//! The four subcommands. Each returns `Ok(all_passed)` — the binary maps
//! `Ok(true)` to exit 0, `Ok(false)` to exit 1 (a check failed), usage and
//! configuration mistakes to exit 2, and runtime failures (divergence, I/O)
//! to exit 3.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use rapm::oracles::SmoothOracle;
use rapm::solvers::{rapm_solve, solve, SolverConfig, Variant};
use rapm::{
    certify_lemma_chain, certify_theorem1, compute_reference, estimate_rate, evaluate_trace,
    trace_csv_path, verify_weak_sharpness, write_trace_csv, CheckStatus, IterateTrace,
    MetricSeries, ProblemSpec, ProxOp, Reference, ReferenceSource,
};

use crate::config::{
    apply_output_dir_override, apply_seed_override, load_config, ProblemConfig, RunConfig,
    SolverEntry,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration — exit 2.
    Usage(String),
    /// The run itself failed (divergence, I/O, numerical trouble) — exit 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub struct RunContext {
    pub config: RunConfig,
    /// The effective config as JSON — embedded verbatim in manifests.
    pub effective: Value,
    pub problem: ProblemSpec,
    pub quiet: bool,
}

/// Loads and validates the config, applies CLI overrides, and builds the
/// problem. Everything that can go wrong here is the user's input, so all
/// errors are usage errors.
pub fn prepare(
    config_path: &Path,
    output_dir: Option<&str>,
    seed: Option<u64>,
    quiet: bool,
) -> Result<RunContext, CliError> {
    let (mut config, mut effective) = load_config(config_path).map_err(CliError::Usage)?;
    if let Some(s) = seed {
        apply_seed_override(&mut config, &mut effective, s).map_err(CliError::Usage)?;
    }
    if let Some(d) = output_dir {
        apply_output_dir_override(&mut config, &mut effective, d);
    }
    let problem = build_problem(&config.problem)
        .map_err(|e| CliError::Usage(format!("problem construction failed: {e}")))?;
    if let Some(x0) = &config.x0 {
        if x0.len() != problem.dimension {
            return Err(CliError::Usage(format!(
                "x0 has {} entries but the problem dimension is {}",
                x0.len(),
                problem.dimension
            )));
        }
    }
    Ok(RunContext { config, effective, problem, quiet })
}

fn build_problem(p: &ProblemConfig) -> rapm::Result<ProblemSpec> {
    match p {
        ProblemConfig::WeakSharpBox(w) => match (&w.c, &w.p) {
            (Some(c), Some(pp)) => rapm::make_weak_sharp_box(c.clone(), pp.clone()),
            _ => rapm::seeded_weak_sharp_box(
                w.n.expect("validated"),
                w.n_positive.expect("validated"),
                w.seed.expect("validated"),
            ),
        },
        ProblemConfig::SparseRegression(s) => rapm::make_sparse_regression(
            s.m_tr, s.m_val, s.n, s.k_sparse, s.noise_sigma, s.radius, s.seed,
        ),
        ProblemConfig::Csv(c) => rapm::load_regression_csv(
            Path::new(&c.a_tr),
            Path::new(&c.b_tr),
            Path::new(&c.a_val),
            Path::new(&c.b_val),
            c.radius,
        ),
    }
}

fn solver_config(ctx: &RunContext, entry: &SolverEntry, x0: Option<Vec<f64>>) -> SolverConfig {
    let variant = entry.parse_variant().expect("validated at load");
    SolverConfig {
        variant,
        budget: entry.k,
        eta_mode: entry.eta_mode.into(),
        gamma_rule: entry.gamma_rule.into(),
        x0,
        record_every: entry.record_every,
        seed: ctx.config.problem_seed().unwrap_or(0),
        record_timings: ctx.config.emit_timings,
    }
}

fn output_dir(ctx: &RunContext) -> Result<PathBuf, CliError> {
    let dir = ctx.config.output_dir.as_deref().ok_or_else(|| {
        CliError::Usage("no output directory: set output_dir in the config or pass --output-dir".into())
    })?;
    let path = PathBuf::from(dir);
    std::fs::create_dir_all(&path)
        .map_err(|e| CliError::Runtime(format!("cannot create output dir {dir}: {e}")))?;
    Ok(path)
}

enum RunOutcome {
    Done(IterateTrace),
    Diverged { at_k: usize, partial: IterateTrace },
}

fn run_entry(ctx: &RunContext, entry: &SolverEntry, x0: Option<Vec<f64>>) -> Result<RunOutcome, CliError> {
    let cfg = solver_config(ctx, entry, x0);
    match solve(&ctx.problem, &cfg) {
        Ok(trace) => Ok(RunOutcome::Done(trace)),
        Err(rapm::Error::Divergence { at_k, partial }) => {
            Ok(RunOutcome::Diverged { at_k, partial: *partial })
        }
        Err(e) => Err(runtime(format!("{} failed: {e}", entry.variant))),
    }
}

fn reference_json(r: &Reference) -> Value {
    let source = match &r.source {
        ReferenceSource::ClosedForm => json!("closed_form"),
        ReferenceSource::LongRun { budget, h_residual, f_residual } => json!({
            "long_run": {"budget": budget, "h_residual": h_residual, "f_residual": f_residual}
        }),
    };
    json!({"f_star": r.f_star, "h_bar_star": r.h_bar_star, "source": source})
}

fn write_manifest(out: &Path, effective: &Value, resolved: Value) -> Result<(), CliError> {
    let manifest = json!({
        "manifest_version": 1,
        "config": effective,
        "resolved": resolved,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    let path = out.join("manifest.json");
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn resolved_solver_row(
    entry: &SolverEntry,
    trace: &IterateTrace,
    csv_name: &str,
    diverged_at: Option<usize>,
) -> Value {
    json!({
        "variant": entry.variant,
        "k": entry.k,
        "eta": trace.eta,
        "gamma": trace.gamma,
        "record_every": entry.record_every,
        "trace_csv": csv_name,
        "diverged_at": diverged_at,
    })
}

/// Shared run loop of `solve` and `compare`: runs every entry, writes one
/// trace CSV each, and collects resolved-parameter rows. On divergence the
/// partial trace is still written and the manifest records where it stopped,
/// then the error propagates.
fn run_all(
    ctx: &RunContext,
    out: &Path,
    reference: &Reference,
    x0: Option<&[f64]>,
) -> Result<Vec<(IterateTrace, MetricSeries)>, CliError> {
    let mut occurrences: HashMap<Variant, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut failure: Option<CliError> = None;

    for entry in &ctx.config.solvers {
        let variant = entry.parse_variant().expect("validated at load");
        let occ = occurrences.entry(variant).or_insert(0);
        let csv_path = trace_csv_path(out, variant, *occ);
        *occ += 1;
        let csv_name = csv_path.file_name().unwrap().to_string_lossy().into_owned();

        let outcome = run_entry(ctx, entry, x0.map(<[f64]>::to_vec))?;
        let (trace, diverged_at) = match outcome {
            RunOutcome::Done(t) => (t, None),
            RunOutcome::Diverged { at_k, partial } => (partial, Some(at_k)),
        };
        let series = evaluate_trace(&ctx.problem, &trace, reference).map_err(runtime)?;
        write_trace_csv(&trace, &series, &csv_path).map_err(runtime)?;
        rows.push(resolved_solver_row(entry, &trace, &csv_name, diverged_at));

        if let Some(k) = diverged_at {
            failure = Some(CliError::Runtime(format!(
                "{} diverged at iteration {k}; partial trace preserved in {csv_name}",
                entry.variant
            )));
            results.push((trace, series));
            break;
        }
        if !ctx.quiet {
            println!(
                "{}: K = {}, eta = {:.6e}, gamma = {:.6e} -> {}",
                entry.variant, entry.k, trace.eta, trace.gamma, csv_name
            );
        }
        results.push((trace, series));
    }

    let resolved = json!({
        "problem_label": ctx.problem.label,
        "dimension": ctx.problem.dimension,
        "l_f": ctx.problem.upper.lipschitz(),
        "l_h": ctx.problem.lower.lipschitz(),
        "x0": x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; ctx.problem.dimension]),
        "reference": reference_json(reference),
        "solvers": rows,
    });
    write_manifest(out, &ctx.effective, resolved)?;

    match failure {
        Some(e) => Err(e),
        None => Ok(results),
    }
}

pub fn cmd_solve(ctx: &RunContext) -> Result<bool, CliError> {
    let out = output_dir(ctx)?;
    let reference = compute_reference(&ctx.problem, ctx.config.reference_budget).map_err(runtime)?;
    let results = run_all(ctx, &out, &reference, ctx.config.x0.as_deref())?;
    if !ctx.quiet {
        for ((trace, series), entry) in results.iter().zip(&ctx.config.solvers) {
            let _ = trace;
            println!(
                "{}: final suboptimality {:.6e}, final infeasibility {:.6e}",
                entry.variant,
                series.subopt.last().unwrap(),
                series.infeas_abs.last().unwrap()
            );
        }
        println!("wrote {}", out.join("manifest.json").display());
    }
    Ok(true)
}

/// Worst violation of the nonsmooth term's constraint along the trace — 0
/// for penalty-style terms, the maximal ℓ1/box excess for indicators.
fn max_constraint_violation(op: &ProxOp, trace: &IterateTrace) -> f64 {
    trace
        .records
        .iter()
        .map(|r| match op {
            ProxOp::Zero | ProxOp::L1Norm { .. } => 0.0,
            ProxOp::L1BallIndicator { radius } => {
                (r.x.iter().map(|v| v.abs()).sum::<f64>() - radius).max(0.0)
            }
            ProxOp::BoxIndicator { lo, hi } => r
                .x
                .iter()
                .zip(lo)
                .zip(hi)
                .map(|((x, l), h)| (l - x).max(x - h).max(0.0))
                .fold(0.0, f64::max),
        })
        .fold(0.0, f64::max)
}

fn first_k_below(ks: &[usize], values: &[f64], threshold: f64) -> Option<usize> {
    ks.iter().zip(values).find(|(_, &v)| v <= threshold).map(|(&k, _)| k)
}

fn fmt_opt_k(v: Option<usize>) -> String {
    v.map(|k| k.to_string()).unwrap_or_else(|| "not reached".into())
}

fn fmt_slope(ks: &[usize], values: &[f64]) -> String {
    match estimate_rate(ks, values, 0.5) {
        Ok(est) => format!("{:.16e}", est.slope),
        Err(_) => "n/a".into(),
    }
}

pub fn cmd_compare(ctx: &RunContext) -> Result<bool, CliError> {
    if ctx.config.solvers.len() < 2 {
        return Err(CliError::Usage("compare needs at least two solver entries".into()));
    }
    let out = output_dir(ctx)?;
    let reference = compute_reference(&ctx.problem, ctx.config.reference_budget).map_err(runtime)?;
    // One shared starting point for every solver, recorded in the manifest.
    let x0 = ctx.config.x0.clone().unwrap_or_else(|| vec![0.0; ctx.problem.dimension]);
    let results = run_all(ctx, &out, &reference, Some(&x0))?;

    let header = "variant,final_subopt,final_infeas,subopt_slope,infeas_slope,\
                  iters_subopt_below_1e-3,iters_subopt_below_1e-6,\
                  iters_infeas_below_1e-3,iters_infeas_below_1e-6,max_constraint_violation";
    let mut lines = vec![header.replace(char::is_whitespace, "")];
    for ((trace, series), entry) in results.iter().zip(&ctx.config.solvers) {
        let violation = max_constraint_violation(&ctx.problem.nonsmooth, trace);
        lines.push(format!(
            "{},{:.16e},{:.16e},{},{},{},{},{},{},{:.16e}",
            entry.variant,
            series.subopt.last().unwrap(),
            series.infeas_abs.last().unwrap(),
            fmt_slope(&series.ks, &series.subopt),
            fmt_slope(&series.ks, &series.infeas_abs),
            fmt_opt_k(first_k_below(&series.ks, &series.subopt, 1e-3)),
            fmt_opt_k(first_k_below(&series.ks, &series.subopt, 1e-6)),
            fmt_opt_k(first_k_below(&series.ks, &series.infeas_abs, 1e-3)),
            fmt_opt_k(first_k_below(&series.ks, &series.infeas_abs, 1e-6)),
            violation,
        ));
    }
    let summary_path = out.join("summary.csv");
    std::fs::write(&summary_path, lines.join("\n") + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", summary_path.display())))?;

    if !ctx.quiet {
        println!("{:<12} {:>14} {:>14} {:>9} {:>9}", "variant", "final_subopt", "final_infeas", "s-slope", "i-slope");
        for ((_, series), entry) in results.iter().zip(&ctx.config.solvers) {
            let short = |s: &str| -> String {
                s.parse::<f64>().map(|v| format!("{v:.2}")).unwrap_or_else(|_| s.to_string())
            };
            println!(
                "{:<12} {:>14.4e} {:>14.4e} {:>9} {:>9}",
                entry.variant,
                series.subopt.last().unwrap(),
                series.infeas_abs.last().unwrap(),
                short(&fmt_slope(&series.ks, &series.subopt)),
                short(&fmt_slope(&series.ks, &series.infeas_abs)),
            );
        }
        println!("wrote {}", summary_path.display());
    }
    Ok(true)
}

fn status_word(s: CheckStatus) -> &'static str {
    match s {
        CheckStatus::Pass => "PASS",
        CheckStatus::Fail => "FAIL",
        CheckStatus::NotApplicable => "not applicable",
    }
}

pub fn cmd_certify(ctx: &RunContext, inject_fault: Option<usize>) -> Result<bool, CliError> {
    let entry = ctx
        .config
        .solvers
        .iter()
        .find(|e| e.parse_variant() == Ok(Variant::Rapm))
        .ok_or_else(|| CliError::Usage("certify needs a rapm solver entry".into()))?;

    // Certification needs every iterate, whatever the config says.
    let mut cfg = solver_config(ctx, entry, ctx.config.x0.clone());
    cfg.record_every = 1;
    let mut trace = rapm_solve(&ctx.problem, &cfg).map_err(runtime)?;

    if let Some(k) = inject_fault {
        if k == 0 || k >= trace.records.len() {
            return Err(CliError::Usage(format!(
                "--inject-fault {k} is outside the recorded range 1..={}",
                trace.records.len() - 1
            )));
        }
        let eta = trace.eta;
        let r = &mut trace.records[k];
        r.x[0] += 1e-3;
        r.f = ctx.problem.upper.value(&r.x);
        r.h = ctx.problem.lower.value(&r.x);
        r.omega = ctx.problem.nonsmooth.value(&r.x).map_err(runtime)?;
        r.f_eta_total = r.h + eta * r.f + r.omega;
        if !ctx.quiet {
            println!("injected fault: perturbed iterate {k}");
        }
    }

    // Without closed-form ground truth the per-step certificates still need
    // a feasible comparison point: use the end of a longer run.
    let long_final: Option<Vec<f64>> = if ctx.problem.ground_truth.is_none() {
        let long_cfg = SolverConfig {
            budget: entry.k * 2,
            record_every: entry.k * 2,
            ..solver_config(ctx, entry, ctx.config.x0.clone())
        };
        Some(rapm_solve(&ctx.problem, &long_cfg).map_err(runtime)?.final_x().to_vec())
    } else {
        None
    };

    let mut all_pass = true;
    let mut print_report = |title: &str, report: &rapm::CertReport| {
        if !ctx.quiet {
            println!("{title} (tolerance {:.0e}):", report.tolerance);
        }
        for c in &report.checks {
            let failed = c.status == CheckStatus::Fail;
            if failed {
                all_pass = false;
            }
            if !ctx.quiet || failed {
                if c.status == CheckStatus::NotApplicable {
                    println!("  {:<44} {}", c.name, status_word(c.status));
                } else {
                    println!(
                        "  {:<44} {} (worst margin {:.3e} at k = {}, {} checks)",
                        c.name,
                        status_word(c.status),
                        c.worst_margin,
                        c.worst_k,
                        c.checked
                    );
                }
            }
        }
    };

    if ctx.config.certify.lemma_chain {
        let report = certify_lemma_chain(&ctx.problem, &trace, long_final.as_deref())
            .map_err(runtime)?;
        print_report("per-step certificates", &report);
    }
    if ctx.config.certify.theorem1 {
        if ctx.problem.ground_truth.is_some() {
            let report = certify_theorem1(&ctx.problem, &trace).map_err(runtime)?;
            print_report("end-to-end envelopes", &report);
        } else if !ctx.quiet {
            println!("end-to-end envelopes: not applicable (no closed-form ground truth)");
        }
    }

    println!("certification: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(all_pass)
}

pub fn cmd_validate(ctx: &RunContext, inject_nonconvex: bool) -> Result<bool, CliError> {
    let injected;
    let p: &ProblemSpec = if inject_nonconvex {
        // Test hook: a deliberately nonconvex upper objective that the
        // validator must reject.
        injected = ProblemSpec::new(
            "injected_nonconvex",
            ctx.problem.dimension,
            SmoothOracle::new(
                Box::new(|x: &[f64]| -x.iter().map(|v| v * v).sum::<f64>()),
                Box::new(|x: &[f64]| x.iter().map(|v| -2.0 * v).collect()),
                2.0,
            )
            .map_err(runtime)?,
            SmoothOracle::new(
                Box::new(|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>()),
                Box::new(|x: &[f64]| x.to_vec()),
                1.0,
            )
            .map_err(runtime)?,
            ProxOp::Zero,
            None,
            true,
        )
        .map_err(runtime)?;
        &injected
    } else {
        &ctx.problem
    };

    let report = p.validate(0x5eed_cafe, 16).map_err(runtime)?;
    let mut all_pass = true;
    for c in &report.checks {
        if !c.pass {
            all_pass = false;
        }
        if !ctx.quiet || !c.pass {
            println!(
                "  {:<40} {} (margin {:.3e}) {}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.margin,
                c.detail
            );
        }
    }

    let has_alpha = p.ground_truth.as_ref().is_some_and(|gt| gt.alpha.is_some());
    if has_alpha {
        let sharp = verify_weak_sharpness(p, 4000, 0xa1fa).map_err(runtime)?;
        if !sharp.pass {
            all_pass = false;
        }
        if !ctx.quiet || !sharp.pass {
            println!(
                "  {:<40} {} (alpha {:.6e}, worst margin {:.3e}, {} samples, {} violations)",
                "weak sharpness of the lower problem",
                if sharp.pass { "PASS" } else { "FAIL" },
                sharp.alpha,
                sharp.worst_margin,
                sharp.samples,
                sharp.violations
            );
        }
    }

    println!("validation: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(all_pass)
}
