//! The NB and CENT team models for both decision tasks, their DT2
//! ablations, and the model dispatch used by fitting and evaluation.
//!
//! Decision task 1 (DT1) has eight actions: options 1..4 followed by
//! agents 1..4. Decision task 2 (DT2) has the four options, chosen after
//! an agent's answer is known.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::appraisal::{init_agent_appraisal, init_human_appraisal, BetaAppraisal, InfluenceState};
use crate::error::{domain, Error, Result};
use crate::prob::{clamp_prob, normalize, softmax, ActionDistribution};
use crate::prospect::{pt_dt1_distribution, PtParams};
use crate::reward::RewardScheme;
use crate::session::{AgentId, Choice, Matrix4, Responses, N_OPTIONS, TEAM_SIZE};

/// Rating every member gives every agent before the first survey.
pub const PRIOR_AGENT_RATING: f64 = 0.75;

/// Everything a model may consult before a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamBeliefState {
    pub human_appraisals: [BetaAppraisal; TEAM_SIZE],
    pub agent_appraisals: [BetaAppraisal; TEAM_SIZE],
    pub influence: InfluenceState,
    /// `agent_ratings[i][j]`: member `i`'s rating of agent `j`.
    pub agent_ratings: Matrix4,
    pub scheme: RewardScheme,
}

impl TeamBeliefState {
    /// State at the start of a session: flat priors, uniform influence.
    pub fn initial(scheme: RewardScheme) -> Self {
        Self {
            human_appraisals: [init_human_appraisal(); TEAM_SIZE],
            agent_appraisals: [init_agent_appraisal(); TEAM_SIZE],
            influence: InfluenceState::uniform(),
            agent_ratings: [[PRIOR_AGENT_RATING; TEAM_SIZE]; TEAM_SIZE],
            scheme,
        }
    }

    pub fn human_means(&self) -> [f64; TEAM_SIZE] {
        self.human_appraisals.map(|a| a.mean())
    }

    pub fn agent_means(&self) -> [f64; TEAM_SIZE] {
        self.agent_appraisals.map(|a| a.mean())
    }

    /// Centrality-weighted agent ratings `π_j`.
    pub fn collective_agent_ratings(&self) -> [f64; TEAM_SIZE] {
        let delta = &self.influence.delta;
        let mut out = [0.0; TEAM_SIZE];
        for (i, d) in delta.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += d * self.agent_ratings[i][j];
            }
        }
        out
    }
}

/// The consulted agent and its answer, plus the members' earlier answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dt2Context {
    pub responses: Responses,
    pub agent_id: AgentId,
    pub agent_response: Choice,
}

/// How an agent's probability of being right enters the DT1 agent rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentScoring {
    /// The agent's appraisal itself (Beta mean for NB, collective rating for CENT).
    #[default]
    Appraisal,
    /// Appraisals normalized to sum to one across the four agents.
    Normalized,
}

impl FromStr for AgentScoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "appraisal" => Ok(Self::Appraisal),
            "normalized" => Ok(Self::Normalized),
            _ => Err(domain(format!(
                "unknown agent scoring `{s}` (appraisal|normalized)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "dt1")]
    Dt1,
    #[serde(rename = "dt2")]
    Dt2,
}

impl Task {
    pub fn n_actions(self) -> usize {
        match self {
            Task::Dt1 => 2 * N_OPTIONS,
            Task::Dt2 => N_OPTIONS,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Dt1 => "dt1",
            Task::Dt2 => "dt2",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dt1" => Ok(Task::Dt1),
            "dt2" => Ok(Task::Dt2),
            _ => Err(domain(format!("unknown task `{s}` (dt1|dt2)"))),
        }
    }
}

/// Which belief-integration rule a model is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseModel {
    Nb,
    Cent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "NB")]
    Nb,
    #[serde(rename = "CENT")]
    Cent,
    #[serde(rename = "PT-NB")]
    PtNb,
    #[serde(rename = "PT-CENT")]
    PtCent,
    #[serde(rename = "NB-H")]
    NbH,
    #[serde(rename = "NB-A")]
    NbA,
    #[serde(rename = "CENT-H")]
    CentH,
    #[serde(rename = "CENT-A")]
    CentA,
    #[serde(rename = "RANDOM")]
    Random,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Nb,
        ModelKind::Cent,
        ModelKind::PtNb,
        ModelKind::PtCent,
        ModelKind::NbH,
        ModelKind::NbA,
        ModelKind::CentH,
        ModelKind::CentA,
        ModelKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nb => "NB",
            ModelKind::Cent => "CENT",
            ModelKind::PtNb => "PT-NB",
            ModelKind::PtCent => "PT-CENT",
            ModelKind::NbH => "NB-H",
            ModelKind::NbA => "NB-A",
            ModelKind::CentH => "CENT-H",
            ModelKind::CentA => "CENT-A",
            ModelKind::Random => "RANDOM",
        }
    }

    pub fn base(self) -> Option<BaseModel> {
        match self {
            ModelKind::Nb | ModelKind::PtNb | ModelKind::NbH | ModelKind::NbA => {
                Some(BaseModel::Nb)
            }
            ModelKind::Cent | ModelKind::PtCent | ModelKind::CentH | ModelKind::CentA => {
                Some(BaseModel::Cent)
            }
            ModelKind::Random => None,
        }
    }

    pub fn is_prospect(self) -> bool {
        matches!(self, ModelKind::PtNb | ModelKind::PtCent)
    }

    pub fn supports(self, task: Task) -> bool {
        match task {
            Task::Dt1 => matches!(
                self,
                ModelKind::Nb
                    | ModelKind::Cent
                    | ModelKind::PtNb
                    | ModelKind::PtCent
                    | ModelKind::Random
            ),
            Task::Dt2 => true,
        }
    }

    /// Whether the task needs a fitted parameter set from [`ModelParams`].
    pub fn needs_pt(self, task: Task) -> bool {
        task == Task::Dt1 && self.is_prospect()
    }

    pub fn needs_w(self, task: Task) -> bool {
        task == Task::Dt2 && matches!(self, ModelKind::Cent | ModelKind::PtCent)
    }

    /// Action distribution for decision task 1.
    pub fn dt1(
        self,
        state: &TeamBeliefState,
        responses: &Responses,
        params: &ModelParams,
    ) -> Result<ActionDistribution> {
        let scheme = &state.scheme;
        match self {
            ModelKind::Random => random_baseline(Task::Dt1.n_actions()),
            ModelKind::Nb | ModelKind::Cent | ModelKind::PtNb | ModelKind::PtCent => {
                let base = self.base().expect("model has a base");
                let options = option_probs(base, state, responses);
                let agents = dt1_agent_probs(base, state, params.agent_scoring);
                if self.is_prospect() {
                    let pt = params.pt.ok_or_else(|| {
                        domain(format!("{self} needs prospect-theory parameters"))
                    })?;
                    pt_dt1_distribution(&options, &agents, &pt, scheme)
                } else {
                    dt1_distribution(&options, &agents, scheme)
                }
            }
            _ => Err(Error::Unsupported(format!(
                "{self} has no decision-task-1 form"
            ))),
        }
    }

    /// Action distribution for decision task 2.
    ///
    /// The prospect-theory variants coincide with their base models here:
    /// all four options carry the same stakes once the agent fee is sunk.
    pub fn dt2(
        self,
        state: &TeamBeliefState,
        ctx: &Dt2Context,
        params: &ModelParams,
    ) -> Result<ActionDistribution> {
        let scheme = &state.scheme;
        match self {
            ModelKind::Random => random_baseline(Task::Dt2.n_actions()),
            ModelKind::Nb | ModelKind::PtNb => {
                dt2_distribution(&nb_dt2_posterior(state, ctx), scheme)
            }
            ModelKind::Cent | ModelKind::PtCent => {
                let w = params
                    .w
                    .ok_or_else(|| domain(format!("{self} needs the agent-trust weight w")))?;
                cent_dt2(state, ctx, w)
            }
            ModelKind::NbH => dt2_human_only(BaseModel::Nb, state, ctx),
            ModelKind::CentH => dt2_human_only(BaseModel::Cent, state, ctx),
            ModelKind::NbA => dt2_agent_only(BaseModel::Nb, state, ctx),
            ModelKind::CentA => dt2_agent_only(BaseModel::Cent, state, ctx),
        }
    }

    pub fn distribution(
        self,
        task: Task,
        state: &TeamBeliefState,
        ctx: &Dt2Context,
        params: &ModelParams,
    ) -> Result<ActionDistribution> {
        match task {
            Task::Dt1 => self.dt1(state, &ctx.responses, params),
            Task::Dt2 => self.dt2(state, ctx, params),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase().replace('_', "-");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == upper)
            .ok_or_else(|| {
                let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                domain(format!(
                    "unknown model `{s}`; valid models: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Fitted or configured parameters a model may need.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelParams {
    pub pt: Option<PtParams>,
    pub w: Option<f64>,
    #[serde(default)]
    pub agent_scoring: AgentScoring,
}

/// Per-member likelihood of `responses` under each option, times the
/// optional agent factor, with a uniform prior, normalized.
///
/// A member with accuracy `m` contributes `m` to the option they chose and
/// `(1−m)/3` to each other option. Abstentions contribute nothing.
pub fn nb_posterior(
    human_accuracies: &[f64; TEAM_SIZE],
    responses: &Responses,
    agent: Option<(f64, Choice)>,
) -> [f64; N_OPTIONS] {
    let mut post = [1.0 / N_OPTIONS as f64; N_OPTIONS];
    let factors = responses
        .iter()
        .zip(human_accuracies)
        .filter_map(|(r, m)| r.map(|c| (clamp_prob(*m), c)))
        .chain(agent.map(|(m, c)| (clamp_prob(m), c)));
    for (m, choice) in factors {
        let miss = (1.0 - m) / 3.0;
        for (k, p) in post.iter_mut().enumerate() {
            *p *= if choice.index() == k { m } else { miss };
        }
        // rescale as we go so long products cannot underflow
        post = normalize(post);
    }
    normalize(post)
}

/// Posterior over the options from the members' answers alone.
pub fn nb_option_posterior(state: &TeamBeliefState, responses: &Responses) -> [f64; N_OPTIONS] {
    nb_posterior(&state.human_means(), responses, None)
}

/// Agent appraisal means normalized across agents.
pub fn nb_agent_probs(state: &TeamBeliefState) -> [f64; TEAM_SIZE] {
    normalize(state.agent_means())
}

/// Posterior over the options once the consulted agent has answered.
pub fn nb_dt2_posterior(state: &TeamBeliefState, ctx: &Dt2Context) -> [f64; N_OPTIONS] {
    let agent_mean = state.agent_appraisals[ctx.agent_id.index()].mean();
    nb_posterior(
        &state.human_means(),
        &ctx.responses,
        Some((agent_mean, ctx.agent_response)),
    )
}

/// Centrality mass behind each option, renormalized over members who answered.
pub fn cent_option_probs(state: &TeamBeliefState, responses: &Responses) -> [f64; N_OPTIONS] {
    normalize(centrality_mass(&state.influence.delta, responses))
}

fn centrality_mass(delta: &[f64; TEAM_SIZE], responses: &Responses) -> [f64; N_OPTIONS] {
    let mut mass = [0.0; N_OPTIONS];
    for (r, d) in responses.iter().zip(delta) {
        if let Some(c) = r {
            mass[c.index()] += d;
        }
    }
    mass
}

/// Collective agent ratings normalized to sum to one.
pub fn cent_agent_probs(state: &TeamBeliefState) -> [f64; TEAM_SIZE] {
    normalize(state.collective_agent_ratings())
}

/// Mixes the agent's answer (weight `w`, scaled by its collective rating)
/// with the members' centrality mass (weight `1−w`), normalized.
pub fn cent_dt2_posterior(
    state: &TeamBeliefState,
    ctx: &Dt2Context,
    w: f64,
) -> Result<[f64; N_OPTIONS]> {
    if !(0.0..=1.0).contains(&w) {
        return Err(domain(format!("agent-trust weight {w} outside [0, 1]")));
    }
    let pi_j = state.collective_agent_ratings()[ctx.agent_id.index()];
    let mut q = centrality_mass(&state.influence.delta, &ctx.responses).map(|m| m * (1.0 - w));
    q[ctx.agent_response.index()] += pi_j * w;
    Ok(normalize(q))
}

pub fn cent_dt2(state: &TeamBeliefState, ctx: &Dt2Context, w: f64) -> Result<ActionDistribution> {
    dt2_distribution(&cent_dt2_posterior(state, ctx, w)?, &state.scheme)
}

/// Softmax over the expected rewards of the four options and four agents.
pub fn dt1_distribution(
    option_post: &[f64; N_OPTIONS],
    agent_probs: &[f64; TEAM_SIZE],
    scheme: &RewardScheme,
) -> Result<ActionDistribution> {
    let mut rewards = [0.0; 2 * N_OPTIONS];
    for (k, p) in option_post.iter().enumerate() {
        rewards[k] = scheme.option_reward(*p);
    }
    for (j, p) in agent_probs.iter().enumerate() {
        rewards[N_OPTIONS + j] = scheme.agent_reward(*p);
    }
    softmax(&rewards)
}

/// Softmax over DT2 rewards. The consultation fee is already paid, so every
/// option is worth `(c1−c3)` if right and costs `(c2+c3)` if wrong.
pub fn dt2_distribution(
    posterior: &[f64; N_OPTIONS],
    scheme: &RewardScheme,
) -> Result<ActionDistribution> {
    let rewards = posterior.map(|q| scheme.agent_reward(q));
    softmax(&rewards)
}

/// Probability of each option being right under a base model.
pub fn option_probs(
    base: BaseModel,
    state: &TeamBeliefState,
    responses: &Responses,
) -> [f64; N_OPTIONS] {
    match base {
        BaseModel::Nb => nb_option_posterior(state, responses),
        BaseModel::Cent => cent_option_probs(state, responses),
    }
}

/// Probability of each agent being right, as fed to the DT1 agent rewards.
pub fn dt1_agent_probs(
    base: BaseModel,
    state: &TeamBeliefState,
    scoring: AgentScoring,
) -> [f64; TEAM_SIZE] {
    match (base, scoring) {
        (BaseModel::Nb, AgentScoring::Appraisal) => state.agent_means(),
        (BaseModel::Nb, AgentScoring::Normalized) => nb_agent_probs(state),
        (BaseModel::Cent, AgentScoring::Appraisal) => state.collective_agent_ratings(),
        (BaseModel::Cent, AgentScoring::Normalized) => cent_agent_probs(state),
    }
}

/// Human-only DT2 posterior: the agent's answer is ignored.
pub fn dt2_human_only_posterior(
    base: BaseModel,
    state: &TeamBeliefState,
    ctx: &Dt2Context,
) -> [f64; N_OPTIONS] {
    option_probs(base, state, &ctx.responses)
}

/// Agent-only DT2 posterior: the agent's appraisal `m` on its answer and
/// `(1−m)/3` on each other option.
pub fn dt2_agent_only_posterior(
    base: BaseModel,
    state: &TeamBeliefState,
    ctx: &Dt2Context,
) -> [f64; N_OPTIONS] {
    let j = ctx.agent_id.index();
    let m = match base {
        BaseModel::Nb => state.agent_appraisals[j].mean(),
        BaseModel::Cent => state.collective_agent_ratings()[j],
    };
    let mut q = [(1.0 - m) / 3.0; N_OPTIONS];
    q[ctx.agent_response.index()] = m;
    q
}

pub fn dt2_human_only(
    base: BaseModel,
    state: &TeamBeliefState,
    ctx: &Dt2Context,
) -> Result<ActionDistribution> {
    dt2_distribution(&dt2_human_only_posterior(base, state, ctx), &state.scheme)
}

pub fn dt2_agent_only(
    base: BaseModel,
    state: &TeamBeliefState,
    ctx: &Dt2Context,
) -> Result<ActionDistribution> {
    dt2_distribution(&dt2_agent_only_posterior(base, state, ctx), &state.scheme)
}

/// Uniform choice among the task's actions.
pub fn random_baseline(n_actions: usize) -> Result<ActionDistribution> {
    match n_actions {
        4 | 8 => Ok(ActionDistribution::uniform(n_actions)),
        n => Err(domain(format!(
            "random baseline needs 4 or 8 actions, got {n}"
        ))),
    }
}
