//! Replaying sessions under a model, scoring each decision, and comparing
//! models across teams.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fit::{observed_dt1, observed_dt2, FitConfig};
use crate::loss::LossKind;
use crate::models::{AgentScoring, ModelKind, ModelParams, Task};
use crate::prospect::PtParams;
use crate::replay::replay;
use crate::session::SessionLog;
use crate::stats::{mean_std, wilcoxon_signed_rank_with, Alternative, MIN_PAIRS};

/// Parameters a model may need, per team where they are fitted per team.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    #[serde(default)]
    pub pt: BTreeMap<String, PtParams>,
    #[serde(default)]
    pub w: Option<f64>,
    #[serde(default)]
    pub agent_scoring: AgentScoring,
}

impl EvalParams {
    fn for_team(&self, model: ModelKind, task: Task, team_id: &str) -> Result<ModelParams> {
        let pt = if model.needs_pt(task) {
            Some(*self.pt.get(team_id).ok_or_else(|| {
                domain(format!(
                    "{model} needs prospect-theory parameters for team `{team_id}`"
                ))
            })?)
        } else {
            None
        };
        if model.needs_w(task) && self.w.is_none() {
            return Err(domain(format!("{model} needs the agent-trust weight w")));
        }
        Ok(ModelParams {
            pt,
            w: self.w,
            agent_scoring: self.agent_scoring,
        })
    }
}

/// Loss of one scored decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLoss {
    pub team_id: String,
    pub question: u32,
    pub observed: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_kind: ModelKind,
    pub loss_kind: LossKind,
    pub task: Task,
    /// Mean loss per team, over that team's scored decisions.
    pub per_team_losses: BTreeMap<String, f64>,
    pub per_team_events: BTreeMap<String, usize>,
    /// Mean of the team means; every team weighs the same.
    pub mean: f64,
    /// Sample standard deviation of the team means.
    pub std: f64,
    pub events: Vec<EventLoss>,
}

impl EvalReport {
    /// Cumulative loss by question index, averaged over teams: entry `(t, c)`
    /// means teams accumulated `c` loss on average over questions `≤ t`.
    pub fn cumulative_by_question(&self) -> Vec<(u32, f64)> {
        let mut by_q: BTreeMap<u32, f64> = BTreeMap::new();
        for e in &self.events {
            *by_q.entry(e.question).or_default() += e.loss;
        }
        let n_teams = self.per_team_losses.len().max(1) as f64;
        let mut running = 0.0;
        by_q.into_iter()
            .map(|(q, total)| {
                running += total / n_teams;
                (q, running)
            })
            .collect()
    }
}

/// Which decisions of a session are scored.
///
/// DT1 scores every question after the first `train_questions`. DT2 scores
/// every consultation, because `w` is held out by team instead.
pub fn scored_positions(
    task: Task,
    n_questions: usize,
    config: &FitConfig,
) -> std::ops::Range<usize> {
    match task {
        Task::Dt1 => config.train_questions.min(n_questions)..n_questions,
        Task::Dt2 => 0..n_questions,
    }
}

/// Replays each log, scores the model's distribution at every scored
/// decision against what the team did, and aggregates per team. Teams
/// without any scored decision are left out.
pub fn evaluate(
    logs: &[SessionLog],
    model: ModelKind,
    loss: LossKind,
    task: Task,
    params: &EvalParams,
    config: &FitConfig,
) -> Result<EvalReport> {
    if !model.supports(task) {
        return Err(crate::error::Error::Unsupported(format!(
            "{model} has no {task} form"
        )));
    }
    let per_team: Vec<Vec<EventLoss>> = logs
        .par_iter()
        .map(|log| score_team(log, model, loss, task, params, config))
        .collect::<Result<_>>()?;

    let mut per_team_losses = BTreeMap::new();
    let mut per_team_events = BTreeMap::new();
    for (log, events) in logs.iter().zip(&per_team) {
        if events.is_empty() {
            continue;
        }
        let total: f64 = events.iter().map(|e| e.loss).sum();
        if per_team_losses
            .insert(log.team_id.clone(), total / events.len() as f64)
            .is_some()
        {
            return Err(domain(format!("duplicate team id `{}`", log.team_id)));
        }
        per_team_events.insert(log.team_id.clone(), events.len());
    }
    if per_team_losses.is_empty() {
        return Err(domain(format!(
            "no scorable {task} decisions in {} logs",
            logs.len()
        )));
    }
    let means: Vec<f64> = per_team_losses.values().copied().collect();
    let (mean, std) = mean_std(&means);
    let mut events: Vec<EventLoss> = per_team.into_iter().flatten().collect();
    events.sort_by(|a, b| a.team_id.cmp(&b.team_id).then(a.question.cmp(&b.question)));
    Ok(EvalReport {
        model_kind: model,
        loss_kind: loss,
        task,
        per_team_losses,
        per_team_events,
        mean,
        std,
        events,
    })
}

fn score_team(
    log: &SessionLog,
    model: ModelKind,
    loss: LossKind,
    task: Task,
    params: &EvalParams,
    config: &FitConfig,
) -> Result<Vec<EventLoss>> {
    let states = replay(log, config.scheme)?;
    let positions = scored_positions(task, log.questions.len(), config);
    let mut out = Vec::new();
    let mut team_params = None;
    for t in positions {
        let q = &log.questions[t];
        let observed = match task {
            Task::Dt1 => observed_dt1(q),
            Task::Dt2 => observed_dt2(q).map(|(_, k)| k),
        };
        let Some(observed) = observed else { continue };
        let p = match &team_params {
            Some(p) => p,
            None => team_params.insert(params.for_team(model, task, &log.team_id)?),
        };
        let dist = match observed_dt2(q) {
            Some((ctx, _)) if task == Task::Dt2 => model.dt2(&states[t], &ctx, p)?,
            _ => model.dt1(&states[t], &q.responses, p)?,
        };
        out.push(EventLoss {
            team_id: log.team_id.clone(),
            question: q.index,
            observed,
            loss: loss.loss(dist.probs(), observed),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub mean: f64,
    pub std: f64,
    pub n_teams: usize,
    pub n_events: usize,
}

/// Side-by-side comparison of several models on one task and loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: Task,
    pub loss_kind: LossKind,
    pub alternative: Alternative,
    pub rows: Vec<SummaryRow>,
    /// `p_values[a][b]`: Wilcoxon p for model `a` against model `b` over
    /// their common teams; `None` with fewer than five common teams.
    pub p_values: Vec<Vec<Option<f64>>>,
}

impl Summary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Tabulates the reports in the order given and tests every pair.
pub fn summarize(reports: &[EvalReport], alternative: Alternative) -> Result<Summary> {
    let first = reports
        .first()
        .ok_or_else(|| domain("nothing to summarize"))?;
    if let Some(r) = reports
        .iter()
        .find(|r| r.task != first.task || r.loss_kind != first.loss_kind)
    {
        return Err(domain(format!(
            "reports disagree on task or loss ({} {} vs {} {})",
            first.task, first.loss_kind, r.task, r.loss_kind
        )));
    }
    let rows = reports
        .iter()
        .map(|r| SummaryRow {
            model: r.model_kind,
            mean: r.mean,
            std: r.std,
            n_teams: r.per_team_losses.len(),
            n_events: r.per_team_events.values().sum(),
        })
        .collect();
    let p_values = reports
        .iter()
        .map(|a| {
            reports
                .iter()
                .map(|b| paired_p(a, b, alternative))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Summary {
        task: first.task,
        loss_kind: first.loss_kind,
        alternative,
        rows,
        p_values,
    })
}

fn paired_p(a: &EvalReport, b: &EvalReport, alternative: Alternative) -> Result<Option<f64>> {
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .per_team_losses
        .iter()
        .filter_map(|(team, la)| b.per_team_losses.get(team).map(|lb| (*la, *lb)))
        .unzip();
    if x.len() < MIN_PAIRS {
        return Ok(None);
    }
    Ok(Some(
        wilcoxon_signed_rank_with(&x, &y, alternative)?.p_value,
    ))
}
