use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use teamdm::fit::{fit_pt, fit_w, split_teams, FitConfig, PtFit};
use teamdm::{LossKind, ModelKind, RewardScheme, SessionLog};

use crate::error::{CliError, CliResult};
use crate::output::{load_logs, read_json, write_json, RunManifest};
use crate::{parse_loss, parse_model, Common};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory of session logs.
    #[arg(long)]
    pub logs: PathBuf,
    /// PT-NB or PT-CENT for per-team prospect-theory parameters; CENT for `w`.
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    /// Training loss; defaults to l1 for PT models and binary for `w`.
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossKind>,
    /// Questions per team used to fit PT parameters.
    #[arg(long)]
    pub train_questions: Option<usize>,
    /// Fit config (JSON); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output parameters file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Trust weight learned on a subset of teams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WParams {
    pub w: f64,
    pub train_loss: f64,
    pub n_events: usize,
    pub train_teams: Vec<String>,
    /// Teams held out for evaluation.
    pub test_teams: Vec<String>,
    pub profile: Vec<(f64, f64)>,
}

/// Contents of a parameters file written by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub model: ModelKind,
    pub loss: LossKind,
    pub scheme: RewardScheme,
    pub train_questions: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub teams: BTreeMap<String, PtFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<WParams>,
}

impl ParamsFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }
}

pub fn fit_config(
    common: &Common,
    config: Option<&Path>,
    train_questions: Option<usize>,
) -> CliResult<FitConfig> {
    let mut cfg: FitConfig = match config {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    cfg.scheme = common.scheme;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = train_questions {
        cfg.train_questions = n;
    }
    cfg.validate()
        .map_err(|e| CliError::usage(format!("bad fit config: {e}")))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Effective<'a> {
    model: ModelKind,
    loss: LossKind,
    fit: &'a FitConfig,
}

pub fn run(common: &Common, args: &FitArgs) -> CliResult<()> {
    let cfg = fit_config(common, args.config.as_deref(), args.train_questions)?;
    let (logs, paths) = load_logs(&args.logs)?;
    let params = match args.model {
        ModelKind::PtNb | ModelKind::PtCent => {
            let loss = args.loss.unwrap_or(LossKind::L1);
            fit_pt_file(&logs, args.model, loss, &cfg)?
        }
        ModelKind::Cent => {
            let loss = args.loss.unwrap_or(LossKind::Binary);
            fit_w_file(&logs, loss, &cfg)?
        }
        other => {
            return Err(CliError::usage(format!(
                "{other} has no fitted parameters; fit PT-NB, PT-CENT, or CENT (for w)"
            )))
        }
    };
    let mut manifest = RunManifest::begin(
        &Effective {
            model: params.model,
            loss: params.loss,
            fit: &cfg,
        },
        Some(cfg.seed),
    );
    manifest.inputs = paths;
    write_json(&args.out, &params)?;
    manifest.outputs.push(args.out.clone());
    manifest.finish(&manifest_path(&args.out))?;
    match &params.w {
        Some(w) => eprintln!(
            "w = {} on {} events from {} teams",
            w.w,
            w.n_events,
            w.train_teams.len()
        ),
        None => eprintln!("fitted {} teams", params.teams.len()),
    }
    Ok(())
}

/// `params.json` gets `params.manifest.json` beside it.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn fit_pt_file(
    logs: &[SessionLog],
    model: ModelKind,
    loss: LossKind,
    cfg: &FitConfig,
) -> CliResult<ParamsFile> {
    let teams = fit_pt(logs, model, loss, cfg)?;
    Ok(ParamsFile {
        model,
        loss,
        scheme: cfg.scheme,
        train_questions: cfg.train_questions,
        teams,
        w: None,
    })
}

fn fit_w_file(logs: &[SessionLog], loss: LossKind, cfg: &FitConfig) -> CliResult<ParamsFile> {
    let ids: Vec<String> = logs.iter().map(|l| l.team_id.clone()).collect();
    let (train_teams, test_teams) = split_teams(&ids, cfg.w_train_teams, cfg.seed);
    let train: Vec<SessionLog> = logs
        .iter()
        .filter(|l| train_teams.contains(&l.team_id))
        .cloned()
        .collect();
    let fit = fit_w(&train, loss, cfg)?;
    Ok(ParamsFile {
        model: ModelKind::Cent,
        loss,
        scheme: cfg.scheme,
        train_questions: cfg.train_questions,
        teams: BTreeMap::new(),
        w: Some(WParams {
            w: fit.w,
            train_loss: fit.train_loss,
            n_events: fit.n_events,
            train_teams,
            test_teams,
            profile: fit.profile,
        }),
    })
}
