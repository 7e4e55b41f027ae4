use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use teamdm::eval::{evaluate, summarize, EvalParams, EvalReport, Summary};
use teamdm::stats::Alternative;
use teamdm::{LossKind, ModelKind, SessionLog, Task};

use crate::cmd::fit::{fit_config, ParamsFile};
use crate::error::{CliError, CliResult};
use crate::output::{
    create_dir, load_logs, write_csv, write_csv_records, write_json, RunManifest, MANIFEST_NAME,
};
use crate::{parse_loss, parse_model, parse_task, Common};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of session logs.
    #[arg(long)]
    pub logs: PathBuf,
    /// Models to compare, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_model)]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value = "l1", value_parser = parse_loss)]
    pub loss: LossKind,
    #[arg(long, default_value = "dt1", value_parser = parse_task)]
    pub task: Task,
    /// Parameter files from `fit`; repeat for several models.
    #[arg(long)]
    pub params: Vec<PathBuf>,
    /// Trust weight for CENT on DT2, instead of a fitted one.
    #[arg(long)]
    pub w: Option<f64>,
    /// Questions per team excluded from DT1 scoring.
    #[arg(long)]
    pub train_questions: Option<usize>,
    /// Fit config (JSON); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving the tables.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Effective<'a> {
    models: &'a [ModelKind],
    loss: LossKind,
    task: Task,
    w: Option<f64>,
    params: &'a [ParamsFile],
    fit: &'a teamdm::fit::FitConfig,
}

#[derive(Serialize)]
struct TeamRow<'a> {
    model: &'static str,
    team_id: &'a str,
    n_events: usize,
    mean_loss: f64,
}

#[derive(Serialize)]
struct SummaryCsvRow {
    model: &'static str,
    mean: f64,
    std: f64,
    n_teams: usize,
    n_events: usize,
}

#[derive(Serialize)]
struct EventRow<'a> {
    model: &'static str,
    team_id: &'a str,
    question: u32,
    observed_action: usize,
    loss: f64,
}

#[derive(Serialize)]
struct CumulativeRow {
    question: u32,
    model: &'static str,
    cumulative_loss: f64,
}

pub fn run(common: &Common, args: &EvaluateArgs) -> CliResult<()> {
    let cfg = fit_config(common, args.config.as_deref(), args.train_questions)?;
    let files: Vec<ParamsFile> = args
        .params
        .iter()
        .map(|p| ParamsFile::load(p))
        .collect::<CliResult<_>>()?;
    let (logs, paths) = load_logs(&args.logs)?;

    let w_file = files.iter().find_map(|f| f.w.as_ref());
    let w = args.w.or(w_file.map(|w| w.w));
    if let Some(w) = w {
        if !(0.0..=1.0).contains(&w) {
            return Err(CliError::usage(format!("w = {w} outside [0, 1]")));
        }
    }
    // DT2 is scored on the teams held out from learning w
    let logs: Vec<SessionLog> = match (args.task, w_file, args.w) {
        (Task::Dt2, Some(wp), None) if !wp.test_teams.is_empty() => logs
            .into_iter()
            .filter(|l| wp.test_teams.contains(&l.team_id))
            .collect(),
        _ => logs,
    };
    if logs.is_empty() {
        return Err(CliError::usage(
            "none of the held-out teams are in the log directory",
        ));
    }

    let mut reports = Vec::with_capacity(args.models.len());
    for model in &args.models {
        let params = params_for(*model, args.task, &files, w, &cfg)?;
        reports.push(evaluate(
            &logs, *model, args.loss, args.task, &params, &cfg,
        )?);
    }
    let summary = summarize(&reports, Alternative::TwoSided)?;

    let mut manifest = RunManifest::begin(
        &Effective {
            models: &args.models,
            loss: args.loss,
            task: args.task,
            w,
            params: &files,
            fit: &cfg,
        },
        Some(cfg.seed),
    );
    manifest.inputs = paths;
    manifest.inputs.extend(args.params.iter().cloned());
    create_dir(&args.out_dir)?;
    manifest.outputs = write_tables(&args.out_dir, &reports, &summary)?;
    manifest.finish(&args.out_dir.join(MANIFEST_NAME))?;
    print_summary(&summary);
    Ok(())
}

fn params_for(
    model: ModelKind,
    task: Task,
    files: &[ParamsFile],
    w: Option<f64>,
    cfg: &teamdm::fit::FitConfig,
) -> CliResult<EvalParams> {
    let mut params = EvalParams {
        w,
        agent_scoring: cfg.agent_scoring,
        ..EvalParams::default()
    };
    if model.needs_pt(task) {
        let file = files.iter().find(|f| f.model == model && !f.teams.is_empty()).ok_or_else(|| {
            CliError::usage(format!("{model} needs fitted parameters; run `teamdm fit --model {model}` and pass --params"))
        })?;
        params.pt = file
            .teams
            .iter()
            .map(|(t, f)| (t.clone(), f.params))
            .collect();
    }
    if model.needs_w(task) && w.is_none() {
        return Err(CliError::usage(format!(
            "{model} on {task} needs w; run `teamdm fit --model CENT` and pass --params, or give --w"
        )));
    }
    Ok(params)
}

fn write_tables(
    dir: &std::path::Path,
    reports: &[EvalReport],
    summary: &Summary,
) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();

    let path = dir.join("per_team.csv");
    write_csv(
        &path,
        reports.iter().flat_map(|r| {
            r.per_team_losses.iter().map(|(team, loss)| TeamRow {
                model: r.model_kind.name(),
                team_id: team,
                n_events: r.per_team_events[team],
                mean_loss: *loss,
            })
        }),
    )?;
    out.push(path);

    let path = dir.join("summary.csv");
    write_csv(
        &path,
        summary.rows.iter().map(|r| SummaryCsvRow {
            model: r.model.name(),
            mean: r.mean,
            std: r.std,
            n_teams: r.n_teams,
            n_events: r.n_events,
        }),
    )?;
    out.push(path);

    let path = dir.join("summary.json");
    write_json(&path, summary)?;
    out.push(path);

    let path = dir.join("pvalues.csv");
    let mut records = vec![std::iter::once("model".to_string())
        .chain(summary.rows.iter().map(|r| r.model.name().to_string()))
        .collect::<Vec<_>>()];
    for (row, ps) in summary.rows.iter().zip(&summary.p_values) {
        let mut rec = vec![row.model.name().to_string()];
        rec.extend(
            ps.iter()
                .map(|p| p.map(|p| p.to_string()).unwrap_or_default()),
        );
        records.push(rec);
    }
    write_csv_records(&path, &records)?;
    out.push(path);

    let path = dir.join("events.csv");
    write_csv(
        &path,
        reports.iter().flat_map(|r| {
            r.events.iter().map(|e| EventRow {
                model: r.model_kind.name(),
                team_id: &e.team_id,
                question: e.question,
                observed_action: e.observed + 1,
                loss: e.loss,
            })
        }),
    )?;
    out.push(path);

    let path = dir.join("cumulative.csv");
    let mut rows: BTreeMap<(u32, usize), CumulativeRow> = BTreeMap::new();
    for (k, r) in reports.iter().enumerate() {
        for (question, c) in r.cumulative_by_question() {
            rows.insert(
                (question, k),
                CumulativeRow {
                    question,
                    model: r.model_kind.name(),
                    cumulative_loss: c,
                },
            );
        }
    }
    write_csv(&path, rows.into_values())?;
    out.push(path);
    Ok(out)
}

fn print_summary(summary: &Summary) {
    println!(
        "{} {} loss (mean ± std over teams)",
        summary.task, summary.loss_kind
    );
    for r in &summary.rows {
        println!(
            "  {:<8} {:.4} ± {:.4}  ({} teams, {} decisions)",
            r.model.name(),
            r.mean,
            r.std,
            r.n_teams,
            r.n_events
        );
    }
    if summary.rows.len() > 1 {
        println!("Wilcoxon signed-rank p-values ({:?}):", summary.alternative);
        for (row, ps) in summary.rows.iter().zip(&summary.p_values) {
            let cells: Vec<String> = ps
                .iter()
                .map(|p| {
                    p.map(|p| format!("{p:>9.3e}"))
                        .unwrap_or_else(|| format!("{:>9}", "-"))
                })
                .collect();
            println!("  {:<8} {}", row.model.name(), cells.join(" "));
        }
    }
}
