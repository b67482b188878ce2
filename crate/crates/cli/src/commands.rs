use std::path::{Path, PathBuf};

use rand::distr::{Alphanumeric, SampleString};
use serde_json::json;

use precoding_core::baselines::family_of;
use precoding_core::scenarios::Catalog;
use precoding_harness::{
    emit_report, evaluate, sweep, FeasibilityMatrix, MethodSelector, Report, ReportFormat, SweepConfig,
};
use precoding_pipeline::remote::{LlmClient, RemoteBackend};
use precoding_pipeline::{replay, run_pipeline, FaultInjection, RuleBackend, StageBackend, TerminatedBy, Transcript};

use crate::config::{ensure_dir, BackendKind, RunConfig};
use crate::error::CliError;
use crate::{Cli, Command, Context, RunArgs, ScenarioAction, SweepArgs};

/// UTC timestamp plus a random six-character suffix.
pub fn new_run_id() -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let suffix = Alphanumeric.sample_string(&mut rand::rng(), 6).to_ascii_lowercase();
    format!("{stamp}-{suffix}")
}

fn out(ctx: &mut Context<'_>, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(ctx.stdout, "{}", line.as_ref()).map_err(|e| CliError::Io(e.to_string()))
}

fn load(cli: &Cli, ctx: &Context<'_>) -> Result<(RunConfig, Catalog), CliError> {
    let config = RunConfig::load(cli.config.as_deref(), &ctx.env)?;
    let catalog_path = cli.catalog.as_ref().or(config.paths.catalog.as_ref());
    let catalog = match catalog_path {
        Some(p) => Catalog::from_override_file(p)?,
        None => Catalog::default(),
    };
    Ok((config, catalog))
}

pub fn dispatch(cli: &Cli, ctx: &mut Context<'_>) -> Result<(), CliError> {
    match &cli.command {
        Command::Scenario {
            action: ScenarioAction::List,
        } => {
            let (_, catalog) = load(cli, ctx)?;
            scenario_list(&catalog, ctx)
        }
        Command::Run(args) => {
            let (mut config, catalog) = load(cli, ctx)?;
            if let Some(b) = args.backend {
                config.backend = b;
            }
            config.validate()?;
            let seed = cli.seed.unwrap_or(config.sweep.seed);
            cmd_run(args, &config, &catalog, seed, ctx)
        }
        Command::Sweep(args) => {
            let (config, catalog) = load(cli, ctx)?;
            config.validate()?;
            cmd_sweep(args, &config, &catalog, cli.seed, ctx)
        }
        Command::Replay { transcript } => cmd_replay(transcript, ctx),
    }
}

fn scenario_list(catalog: &Catalog, ctx: &mut Context<'_>) -> Result<(), CliError> {
    out(
        ctx,
        format!(
            "{:<4}{:<24}{:<20}{:<12}{}",
            "id", "family", "metric", "objective", "title"
        ),
    )?;
    for e in catalog.entries() {
        let objective = format!("{:?}", e.family.objective());
        let line = format!(
            "{:<4}{:<24}{:<20}{:<12}{}",
            format!("{:02}", e.scenario_id),
            format!("{:?}", e.family),
            e.metric().label(),
            objective,
            e.title
        );
        out(ctx, line.trim_end())?;
    }
    Ok(())
}

fn backend_for(config: &RunConfig, ctx: &Context<'_>) -> Result<Box<dyn StageBackend>, CliError> {
    Ok(match config.backend {
        BackendKind::Rule => Box::new(RuleBackend),
        BackendKind::Remote => {
            let rc = config.remote_config(&ctx.env)?;
            Box::new(RemoteBackend::new(LlmClient::new(rc, ctx.transport.clone())))
        }
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_run(
    args: &RunArgs,
    config: &RunConfig,
    catalog: &Catalog,
    seed: u64,
    ctx: &mut Context<'_>,
) -> Result<(), CliError> {
    let (task, theta) = catalog.instantiate(args.scenario, args.snr, seed)?;
    let family = family_of(&theta);
    let method = match MethodSelector::parse(&args.method)? {
        MethodSelector::One(m) if m.applies_to(family) => m,
        _ => {
            return Err(CliError::UnknownMethod(format!(
                "method `{}` does not apply to scenario {}",
                args.method, args.scenario
            )))
        }
    };
    let run_id = new_run_id();
    let mut pipeline = config.pipeline_config(seed);
    if args.fault_max_iter.is_some() || !args.fault_post.is_empty() {
        pipeline.fault = Some(FaultInjection {
            initial_max_iter: args.fault_max_iter,
            postprocessing: args.fault_post.clone(),
        });
    }

    let mut summary = json!({
        "run_id": run_id,
        "scenario_id": args.scenario,
        "snr_db": args.snr,
        "seed": seed,
        "method": method.name(family),
        "metric": family.metric().label(),
    });
    let (solution, terminated_by) = if matches!(method, precoding_harness::Method::Pipeline) {
        let backend = backend_for(config, ctx)?;
        let run = run_pipeline(&task, &theta, &pipeline, backend.as_ref());
        ensure_dir(&config.paths.transcript_dir)?;
        let path = config.paths.transcript_dir.join(format!("{run_id}.jsonl"));
        run.transcript.write_new(&path)?;
        summary["backend"] = json!(backend.name());
        summary["transcript"] = json!(path);
        summary["revisions"] = json!(run.result.plans.len());
        summary["terminated_by"] = json!(run.result.terminated_by);
        summary["warnings"] = json!(run.result.warnings);
        (run.result.final_solution, Some(run.result.terminated_by))
    } else {
        (method.run(&task, &theta, seed, &pipeline), None)
    };
    let eval = evaluate(solution.as_ref(), &theta, config.tolerances.feasibility_tol);
    summary["feasible"] = json!(eval.feasible);
    summary["objective"] = json!(eval.value);

    ensure_dir(&config.paths.report_dir)?;
    let report = config.paths.report_dir.join(format!("{run_id}.json"));
    write_json(&report, &json!({ "summary": summary, "solution": solution }))?;
    summary["report"] = json!(report);
    out(ctx, summary.to_string())?;

    if eval.feasible {
        Ok(())
    } else if terminated_by == Some(TerminatedBy::Unrecoverable) {
        Err(CliError::Unrecoverable(format!("run {run_id} ended unrecoverable")))
    } else {
        Err(CliError::Infeasible(format!(
            "run {run_id} produced no feasible solution"
        )))
    }
}

fn cmd_sweep(
    args: &SweepArgs,
    config: &RunConfig,
    catalog: &Catalog,
    seed: Option<u64>,
    ctx: &mut Context<'_>,
) -> Result<(), CliError> {
    if config.backend == BackendKind::Remote {
        return Err(CliError::Config(
            "sweeps run the pipeline with the rule backend only".into(),
        ));
    }
    let methods = args
        .methods
        .clone()
        .unwrap_or_else(|| config.sweep.methods.clone())
        .iter()
        .map(|m| MethodSelector::parse(m))
        .collect::<Result<Vec<_>, _>>()?;
    let scenario_ids = args.scenarios.clone().unwrap_or_else(|| config.sweep.scenarios.clone());
    for id in &scenario_ids {
        catalog.get(*id)?;
    }
    let seed = seed.unwrap_or(config.sweep.seed);
    let sweep_config = SweepConfig {
        scenario_ids: scenario_ids.clone(),
        methods,
        snrs_db: args.snrs.clone().unwrap_or_else(|| config.sweep.snrs_db.clone()),
        n_mc: args.n_mc.unwrap_or(config.sweep.n_mc),
        seed,
        feasibility_tol: config.tolerances.feasibility_tol,
        jobs: args.jobs.or(config.sweep.jobs),
        pipeline: config.pipeline_config(seed),
    };
    let run_id = new_run_id();
    let dir: PathBuf = args
        .out
        .clone()
        .unwrap_or_else(|| config.paths.report_dir.join(&run_id));
    ensure_dir(&dir)?;
    let table = sweep(catalog, &sweep_config)?;
    let mut files = Vec::new();
    for f in ReportFormat::ALL {
        files.extend(emit_report(Report::Table(&table), f, &dir)?);
    }
    for id in table.scenario_ids() {
        let m = FeasibilityMatrix::from_table(&table, id);
        for f in ReportFormat::ALL {
            files.extend(emit_report(Report::Matrix(&m), f, &dir)?);
        }
    }
    let failed = table.rows.iter().filter(|r| r.mean.is_none()).count();
    out(
        ctx,
        json!({
            "run_id": run_id,
            "out_dir": dir,
            "rows": table.rows.len(),
            "failed_cells": failed,
            "files": files,
        })
        .to_string(),
    )?;
    if failed == table.rows.len() {
        return Err(CliError::Infeasible("every sweep cell failed".into()));
    }
    Ok(())
}

fn cmd_replay(path: &Path, ctx: &mut Context<'_>) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("no transcript at {}", path.display())));
    }
    let transcript = Transcript::read(path)?;
    let report = replay(&transcript)?;
    let r = &report.result;
    out(
        ctx,
        json!({
            "transcript": path,
            "terminated_by": r.terminated_by,
            "final_objective": r.final_objective,
            "revisions": r.plans.len(),
            "strategies": r.strategy_history.iter().map(|s| s.strategy_id.name()).collect::<Vec<_>>(),
            "reproduced": report.reproduced(),
            "mismatched_revisions": report.mismatched_revisions,
        })
        .to_string(),
    )?;
    if report.reproduced() {
        Ok(())
    } else {
        Err(CliError::Unrecoverable(format!(
            "re-execution differs at revisions {:?}",
            report.mismatched_revisions
        )))
    }
}
