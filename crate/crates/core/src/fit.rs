//! Parameter estimation: per-team prospect-theory grid search for decision
//! task 1 and the shared agent-trust weight `w` for decision task 2.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::loss::LossKind;
use crate::models::{
    cent_dt2, dt1_agent_probs, option_probs, AgentScoring, BaseModel, Dt2Context, ModelKind,
};
use crate::prob::softmax_in_place;
use crate::prospect::{weight_unchecked, PtParams, GAMMA_FLOOR, LAMBDA_MAX};
use crate::replay::replay;
use crate::reward::RewardScheme;
use crate::session::{FinalAction, QuestionRecord, SessionLog, TeamAction, N_OPTIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Questions at the start of each session used for training.
    pub train_questions: usize,
    pub grid_alpha_step: f64,
    pub grid_gamma_step: f64,
    pub grid_lambda_step: f64,
    pub w_step: f64,
    /// Teams drawn for learning `w`; the rest are held out.
    pub w_train_teams: usize,
    pub seed: u64,
    pub scheme: RewardScheme,
    pub agent_scoring: AgentScoring,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            train_questions: 30,
            grid_alpha_step: 0.1,
            grid_gamma_step: 0.1,
            grid_lambda_step: 1.0,
            w_step: 0.1,
            w_train_teams: 20,
            seed: 0,
            scheme: RewardScheme::default(),
            agent_scoring: AgentScoring::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, step, max) in [
            ("grid_alpha_step", self.grid_alpha_step, 1.0),
            ("grid_gamma_step", self.grid_gamma_step, 1.0),
            ("grid_lambda_step", self.grid_lambda_step, LAMBDA_MAX),
            ("w_step", self.w_step, 1.0),
        ] {
            if !(step > 0.0 && step <= max) {
                return Err(domain(format!("{name} = {step} must lie in (0, {max}]")));
            }
        }
        if self.train_questions == 0 {
            return Err(domain("train_questions must be positive"));
        }
        self.scheme.validate()
    }

    /// `α = β` candidates.
    pub fn alpha_grid(&self) -> Vec<f64> {
        grid_points(1.0, self.grid_alpha_step)
    }

    /// `γ⁺` and `γ⁻` candidates, with 0 replaced by [`GAMMA_FLOOR`].
    pub fn gamma_grid(&self) -> Vec<f64> {
        grid_points(1.0, self.grid_gamma_step)
            .into_iter()
            .map(|g| if g == 0.0 { GAMMA_FLOOR } else { g })
            .collect()
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        grid_points(LAMBDA_MAX, self.grid_lambda_step)
    }

    pub fn w_grid(&self) -> Vec<f64> {
        grid_points(1.0, self.w_step)
    }
}

/// `0, max/n, …, max` with `n = round(max/step)`, so the endpoint is exact.
fn grid_points(max: f64, step: f64) -> Vec<f64> {
    let n = ((max / step).round() as usize).max(1);
    (0..=n).map(|k| k as f64 * max / n as f64).collect()
}

/// Observed DT1 action index: options 0..4, agents 4..8.
pub fn observed_dt1(q: &QuestionRecord) -> Option<usize> {
    match q.team_action {
        TeamAction::Answer(k) => Some(k.index()),
        TeamAction::ConsultAgent(j) => Some(N_OPTIONS + j.index()),
        TeamAction::NoConsensus => None,
    }
}

/// DT2 context and observed final option, for consultations that ended in an answer.
pub fn observed_dt2(q: &QuestionRecord) -> Option<(Dt2Context, usize)> {
    let c = q.consulted.as_ref()?;
    match c.final_action {
        FinalAction::Answer(k) => Some((
            Dt2Context {
                responses: q.responses,
                agent_id: c.agent_id,
                agent_response: c.agent_response,
            },
            k.index(),
        )),
        FinalAction::NoConsensus => None,
    }
}

/// The inputs a DT1 model needs at one scored decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dt1Event {
    pub question: u32,
    pub options: [f64; N_OPTIONS],
    pub agents: [f64; N_OPTIONS],
    pub observed: usize,
}

/// DT1 events among the questions at `positions`, skipping NoConsensus.
pub fn dt1_events(
    log: &SessionLog,
    base: BaseModel,
    scoring: AgentScoring,
    scheme: RewardScheme,
    positions: Range<usize>,
) -> Result<Vec<Dt1Event>> {
    let states = replay(log, scheme)?;
    let end = positions.end.min(log.questions.len());
    let start = positions.start.min(end);
    Ok((start..end)
        .filter_map(|t| {
            let q = &log.questions[t];
            let observed = observed_dt1(q)?;
            let s = &states[t];
            Some(Dt1Event {
                question: q.index,
                options: option_probs(base, s, &q.responses),
                agents: dt1_agent_probs(base, s, scoring),
                observed,
            })
        })
        .collect())
}

/// Base model whose beliefs a PT fit builds on.
pub fn fit_base(model: ModelKind) -> Result<BaseModel> {
    match model {
        ModelKind::Nb | ModelKind::PtNb => Ok(BaseModel::Nb),
        ModelKind::Cent | ModelKind::PtCent => Ok(BaseModel::Cent),
        other => Err(domain(format!(
            "prospect-theory fitting needs NB or CENT beliefs, got {other}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtFit {
    pub params: PtParams,
    /// Mean training loss at `params`.
    pub train_loss: f64,
    pub n_events: usize,
}

/// Exhaustive grid search of prospect-theory parameters for each team,
/// on the first `train_questions` questions.
pub fn fit_pt(
    logs: &[SessionLog],
    model: ModelKind,
    loss: LossKind,
    config: &FitConfig,
) -> Result<BTreeMap<String, PtFit>> {
    config.validate()?;
    let base = fit_base(model)?;
    let fits: Vec<(String, PtFit)> = logs
        .par_iter()
        .map(|log| {
            let events = dt1_events(
                log,
                base,
                config.agent_scoring,
                config.scheme,
                0..config.train_questions,
            )?;
            if events.is_empty() {
                return Err(domain(format!(
                    "team `{}` has no scorable training decisions",
                    log.team_id
                )));
            }
            Ok((log.team_id.clone(), fit_pt_events(&events, loss, config)))
        })
        .collect::<Result<_>>()?;
    collect_unique(fits)
}

fn collect_unique<T>(items: Vec<(String, T)>) -> Result<BTreeMap<String, T>> {
    let mut map = BTreeMap::new();
    for (id, v) in items {
        if map.insert(id.clone(), v).is_some() {
            return Err(domain(format!("duplicate team id `{id}`")));
        }
    }
    Ok(map)
}

/// Grid search over one team's events. Ties go to the smallest `α`, then
/// `γ⁺`, `γ⁻`, `λ`.
pub fn fit_pt_events(events: &[Dt1Event], loss: LossKind, config: &FitConfig) -> PtFit {
    let alphas = config.alpha_grid();
    let gammas = config.gamma_grid();
    let lambdas = config.lambda_grid();
    let scheme = &config.scheme;
    let n_actions = 2 * N_OPTIONS;
    let ng = gammas.len();

    // weighting tables indexed [(event·8 + action)·ng + gamma]
    let mut w_gain = vec![0.0; events.len() * n_actions * ng];
    let mut w_loss = vec![0.0; events.len() * n_actions * ng];
    for (e, ev) in events.iter().enumerate() {
        let probs = ev.options.iter().chain(&ev.agents);
        for (a, p) in probs.enumerate() {
            for (g, gamma) in gammas.iter().enumerate() {
                let idx = (e * n_actions + a) * ng + g;
                w_gain[idx] = weight_unchecked(*p, *gamma);
                w_loss[idx] = weight_unchecked(1.0 - *p, *gamma);
            }
        }
    }
    let gains = [scheme.c1, scheme.c1 - scheme.c3];
    let losses = [scheme.c2, scheme.c2 + scheme.c3];
    let family = |a: usize| usize::from(a >= N_OPTIONS);

    let outer: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..ng).map(move |g| (a, g)))
        .collect();
    let best = outer
        .par_iter()
        .map(|&(ai, gpi)| {
            let alpha = alphas[ai];
            let gain_pow = gains.map(|x| x.powf(alpha));
            let loss_pow = losses.map(|x| x.abs().powf(alpha));
            let mut up = vec![0.0; events.len() * n_actions];
            for (slot, u) in up.iter_mut().enumerate() {
                *u = gain_pow[family(slot % n_actions)] * w_gain[slot * ng + gpi];
            }
            let mut down = vec![0.0; events.len() * n_actions];
            let mut local: Option<(f64, [usize; 4])> = None;
            let mut buf = [0.0; 8];
            for gmi in 0..ng {
                for (slot, d) in down.iter_mut().enumerate() {
                    *d = loss_pow[family(slot % n_actions)] * w_loss[slot * ng + gmi];
                }
                for (li, lambda) in lambdas.iter().enumerate() {
                    let mut total = 0.0;
                    for (e, ev) in events.iter().enumerate() {
                        let base = e * n_actions;
                        for a in 0..n_actions {
                            buf[a] = up[base + a] - lambda * down[base + a];
                        }
                        softmax_in_place(&mut buf);
                        total += loss.loss(&buf, ev.observed);
                    }
                    let mean = total / events.len() as f64;
                    if local.is_none_or(|(l, _)| mean < l) {
                        local = Some((mean, [ai, gpi, gmi, li]));
                    }
                }
            }
            local.expect("grid is non-empty")
        })
        .collect::<Vec<_>>()
        .into_iter()
        // collected in grid order, so strict improvement keeps the earliest tie
        .fold(None::<(f64, [usize; 4])>, |acc, cand| match acc {
            Some(b) if b.0 <= cand.0 => Some(b),
            _ => Some(cand),
        })
        .expect("grid is non-empty");

    let [ai, gpi, gmi, li] = best.1;
    PtFit {
        params: PtParams {
            alpha: alphas[ai],
            beta: alphas[ai],
            lambda: lambdas[li],
            gamma_plus: gammas[gpi],
            gamma_minus: gammas[gmi],
        },
        train_loss: best.0,
        n_events: events.len(),
    }
}

/// Mean loss of fixed PT parameters over a set of events.
pub fn pt_events_loss(
    events: &[Dt1Event],
    params: &PtParams,
    loss: LossKind,
    scheme: &RewardScheme,
) -> Result<f64> {
    if events.is_empty() {
        return Err(domain("no events to score"));
    }
    let mut total = 0.0;
    for ev in events {
        let d = crate::prospect::pt_dt1_distribution(&ev.options, &ev.agents, params, scheme)?;
        total += loss.loss(d.probs(), ev.observed);
    }
    Ok(total / events.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WFit {
    pub w: f64,
    pub train_loss: f64,
    pub n_events: usize,
    /// Mean loss at every grid value, in grid order.
    pub profile: Vec<(f64, f64)>,
}

/// Grid search for the CENT agent-trust weight over every DT2 decision of
/// the given teams.
pub fn fit_w(logs: &[SessionLog], loss: LossKind, config: &FitConfig) -> Result<WFit> {
    config.validate()?;
    let per_team: Vec<Vec<(crate::models::TeamBeliefState, Dt2Context, usize)>> = logs
        .par_iter()
        .map(|log| {
            let states = replay(log, config.scheme)?;
            Ok(log
                .questions
                .iter()
                .zip(states)
                .filter_map(|(q, s)| observed_dt2(q).map(|(ctx, k)| (s, ctx, k)))
                .collect())
        })
        .collect::<Result<_>>()?;
    let events: Vec<_> = per_team.into_iter().flatten().collect();
    if events.is_empty() {
        return Err(domain("no decision-task-2 events to fit w on"));
    }
    let profile: Vec<(f64, f64)> = config
        .w_grid()
        .into_par_iter()
        .map(|w| {
            let mut total = 0.0;
            for (state, ctx, k) in &events {
                let d = cent_dt2(state, ctx, w)?;
                total += loss.loss(d.probs(), *k);
            }
            Ok((w, total / events.len() as f64))
        })
        .collect::<Result<_>>()?;
    let (w, train_loss) = profile
        .iter()
        .copied()
        .fold(None::<(f64, f64)>, |acc, c| match acc {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .expect("w grid is non-empty");
    Ok(WFit {
        w,
        train_loss,
        n_events: events.len(),
        profile,
    })
}

/// Seeded shuffle of the team ids into `n_train` training teams and the
/// rest. Both halves come back sorted.
pub fn split_teams(team_ids: &[String], n_train: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut ids = team_ids.to_vec();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = n_train.min(ids.len());
    let mut train = ids[..cut].to_vec();
    let mut test = ids[cut..].to_vec();
    train.sort();
    test.sort();
    (train, test)
}
