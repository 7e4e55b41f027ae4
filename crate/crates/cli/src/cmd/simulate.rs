use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use teamdm::sim::{generate_teams, SimConfig};

use crate::error::{CliError, CliResult};
use crate::output::{create_dir, read_json, write_csv, write_json, RunManifest, MANIFEST_NAME};
use crate::Common;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON); omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving one `<team_id>.json` per team.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the config's team count.
    #[arg(long)]
    pub teams: Option<usize>,
    /// Overrides the config's questions per team.
    #[arg(long)]
    pub questions: Option<usize>,
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    team_id: &'a str,
    questions: usize,
    score: f64,
}

pub fn run(common: &Common, args: &SimulateArgs) -> CliResult<()> {
    let mut config: SimConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.scheme = common.scheme;
    if let Some(n) = args.teams {
        config.n_teams = n;
    }
    if let Some(n) = args.questions {
        config.n_questions = n;
    }
    config
        .validate()
        .map_err(|e| CliError::usage(format!("bad simulation config: {e}")))?;

    let mut manifest = RunManifest::begin(&config, Some(config.seed));
    manifest.inputs.extend(args.config.clone());
    let teams = generate_teams(&config)?;
    create_dir(&args.out_dir)?;
    for team in &teams {
        let path = args.out_dir.join(format!("{}.json", team.log.team_id));
        write_json(&path, &team.log)?;
        manifest.outputs.push(path);
    }
    let scores = args.out_dir.join("scores.csv");
    write_csv(
        &scores,
        teams.iter().map(|t| ScoreRow {
            team_id: &t.log.team_id,
            questions: t.log.questions.len(),
            score: t.score,
        }),
    )?;
    manifest.outputs.push(scores);
    manifest.finish(&args.out_dir.join(MANIFEST_NAME))?;
    eprintln!(
        "wrote {} sessions to {}",
        teams.len(),
        args.out_dir.display()
    );
    Ok(())
}
