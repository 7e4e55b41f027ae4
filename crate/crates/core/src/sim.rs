//! Seeded synthetic sessions drawn from the team models, and the scoring
//! rules of the game.
//!
//! Every random draw for question `t` of team `k` comes from its own
//! ChaCha8 stream seeded by `splitmix64` over `(seed, k, t)`; stream `t = 0`
//! sets the team up. Output is therefore independent of generation order.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::models::{option_probs, Dt2Context, ModelKind, ModelParams, Task};
use crate::prob::{argmax, ActionDistribution};
use crate::prospect::PtParams;
use crate::replay::BeliefTracker;
use crate::reward::RewardScheme;
use crate::session::{
    AgentId, Choice, Consultation, FinalAction, Matrix4, QuestionRecord, Responses, SessionLog,
    SurveyRecord, TeamAction, N_OPTIONS, TEAM_SIZE,
};

/// How the simulated team decides between answering and consulting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConsultPolicy {
    /// Sample the generative model's full DT1 distribution.
    #[default]
    Model,
    /// Always answer with the most probable option.
    Never,
    /// Consult with probability `p`; the agent, or else the option, is drawn
    /// from the model's distribution restricted to that family.
    Fixed { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_teams: usize,
    pub n_questions: usize,
    pub human_accuracies: [f64; TEAM_SIZE],
    pub agent_accuracies: [f64; TEAM_SIZE],
    pub generative_model: ModelKind,
    pub params: ModelParams,
    pub consult_policy: ConsultPolicy,
    /// Half-width of the uniform jitter added to reported influence weights.
    pub survey_noise: f64,
    pub survey_interval: u32,
    /// Ground-truth influence matrix; drawn per team when absent.
    pub influence: Option<Matrix4>,
    /// Fraction of the gap to an agent's observed accuracy closed by each survey.
    pub rating_drift: f64,
    pub no_consensus_dt1: f64,
    pub no_consensus_dt2: f64,
    pub scheme: RewardScheme,
    pub seed: u64,
    pub team_prefix: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_teams: 30,
            n_questions: 45,
            human_accuracies: [0.55, 0.6, 0.65, 0.7],
            agent_accuracies: [0.6, 0.7, 0.8, 0.9],
            generative_model: ModelKind::Nb,
            params: ModelParams {
                pt: None,
                w: Some(0.9),
                agent_scoring: Default::default(),
            },
            consult_policy: ConsultPolicy::Model,
            survey_noise: 0.05,
            survey_interval: 5,
            influence: None,
            rating_drift: 0.5,
            no_consensus_dt1: 0.02,
            no_consensus_dt2: 0.18,
            scheme: RewardScheme::default(),
            seed: 0,
            team_prefix: "team".into(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.n_questions == 0 {
            return Err(domain("n_questions must be positive"));
        }
        if self
            .human_accuracies
            .iter()
            .any(|a| !(0.0..=1.0).contains(a))
        {
            return Err(domain("human accuracies must lie in [0, 1]"));
        }
        if self
            .agent_accuracies
            .iter()
            .any(|a| !(0.5..=1.0).contains(a))
        {
            return Err(domain("agent accuracies must lie in [0.5, 1]"));
        }
        if !self.generative_model.supports(Task::Dt1) {
            return Err(domain(format!(
                "{} cannot generate first-stage decisions",
                self.generative_model
            )));
        }
        if self.generative_model.needs_pt(Task::Dt1) {
            match &self.params.pt {
                Some(p) => p.validate()?,
                None => {
                    return Err(domain(format!(
                        "{} needs prospect-theory parameters",
                        self.generative_model
                    )))
                }
            }
        }
        if self.generative_model.needs_w(Task::Dt2) {
            match self.params.w {
                Some(w) if (0.0..=1.0).contains(&w) => {}
                _ => {
                    return Err(domain(format!(
                        "{} needs w in [0, 1]",
                        self.generative_model
                    )))
                }
            }
        }
        for (name, p) in [
            ("no_consensus_dt1", self.no_consensus_dt1),
            ("no_consensus_dt2", self.no_consensus_dt2),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(domain(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if let ConsultPolicy::Fixed { p } = self.consult_policy {
            if !(0.0..=1.0).contains(&p) {
                return Err(domain(format!("consult probability {p} outside [0, 1]")));
            }
        }
        if self.survey_noise.is_nan() || self.survey_noise < 0.0 {
            return Err(domain("survey_noise must be non-negative"));
        }
        if self.survey_interval == 0 || !self.survey_interval.is_multiple_of(5) {
            return Err(domain("survey_interval must be a positive multiple of 5"));
        }
        if !(0.0..=1.0).contains(&self.rating_drift) {
            return Err(domain("rating_drift must lie in [0, 1]"));
        }
        if let Some(w) = &self.influence {
            crate::appraisal::check_row_stochastic(w)?;
        }
        Ok(())
    }

    pub fn team_id(&self, team: usize) -> String {
        format!("{}-{:03}", self.team_prefix, team + 1)
    }

    /// Convenience for PT generators.
    pub fn with_pt(mut self, model: ModelKind, pt: PtParams) -> Self {
        self.generative_model = model;
        self.params.pt = Some(pt);
        self
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream for question `question` (1-based; 0 is team setup) of team `team`.
pub fn stream_seed(seed: u64, team: usize, question: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ team as u64) ^ question)
}

fn stream(seed: u64, team: usize, question: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, team, question))
}

/// A generated session and the score tallied while generating it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTeam {
    pub log: SessionLog,
    pub score: f64,
}

pub fn generate(config: &SimConfig) -> Result<Vec<SessionLog>> {
    Ok(generate_teams(config)?.into_iter().map(|t| t.log).collect())
}

pub fn generate_teams(config: &SimConfig) -> Result<Vec<SimTeam>> {
    config.validate()?;
    (0..config.n_teams)
        .into_par_iter()
        .map(|k| simulate_team(config, k))
        .collect()
}

/// Positive random influence matrix leaning toward self-weight.
fn draw_influence(rng: &mut ChaCha8Rng) -> Matrix4 {
    let mut w = [[0.0; TEAM_SIZE]; TEAM_SIZE];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = rng.gen_range(0.05..1.0) + if i == j { 0.5 } else { 0.0 };
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
    w
}

/// Correct with probability `accuracy`, otherwise uniform over the other three.
fn draw_answer(rng: &mut ChaCha8Rng, correct: Choice, accuracy: f64) -> Choice {
    if rng.gen_bool(accuracy) {
        correct
    } else {
        let miss = rng.gen_range(0..N_OPTIONS - 1);
        Choice::from_index(if miss >= correct.index() {
            miss + 1
        } else {
            miss
        })
    }
}

fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    match WeightedIndex::new(weights) {
        Ok(d) => d.sample(rng),
        Err(_) => rng.gen_range(0..weights.len()),
    }
}

/// Generates one team's session.
pub fn simulate_team(config: &SimConfig, team: usize) -> Result<SimTeam> {
    let scheme = config.scheme;
    let model = config.generative_model;
    let params = &config.params;
    let mut setup = stream(config.seed, team, 0);
    let true_w = config
        .influence
        .unwrap_or_else(|| draw_influence(&mut setup));
    let mut ratings = [[crate::models::PRIOR_AGENT_RATING; TEAM_SIZE]; TEAM_SIZE];
    let mut agent_hits = [(0u32, 0u32); TEAM_SIZE];

    let mut tracker = BeliefTracker::new(scheme);
    let mut questions = Vec::with_capacity(config.n_questions);
    let mut surveys = Vec::new();
    let mut score = 0.0;

    for t in 1..=config.n_questions as u32 {
        let mut rng = stream(config.seed, team, u64::from(t));
        let correct = Choice::from_index(rng.gen_range(0..N_OPTIONS));
        let responses: Responses = std::array::from_fn(|i| {
            Some(draw_answer(&mut rng, correct, config.human_accuracies[i]))
        });
        let state = tracker.state();
        let dt1 = model.dt1(state, &responses, params)?;
        let action = choose_dt1(&mut rng, config, state, &responses, &dt1);

        let (team_action, consulted) = if rng.gen_bool(config.no_consensus_dt1) {
            (TeamAction::NoConsensus, None)
        } else if action < N_OPTIONS {
            (TeamAction::Answer(Choice::from_index(action)), None)
        } else {
            let agent_id = AgentId::from_index(action - N_OPTIONS);
            let agent_response =
                draw_answer(&mut rng, correct, config.agent_accuracies[agent_id.index()]);
            let ctx = Dt2Context {
                responses,
                agent_id,
                agent_response,
            };
            let dt2 = model.dt2(state, &ctx, params)?;
            let pick = sample(&mut rng, dt2.probs());
            let final_action = if rng.gen_bool(config.no_consensus_dt2) {
                FinalAction::NoConsensus
            } else {
                FinalAction::Answer(Choice::from_index(pick))
            };
            let hits = &mut agent_hits[agent_id.index()];
            hits.1 += 1;
            hits.0 += u32::from(agent_response == correct);
            (
                TeamAction::ConsultAgent(agent_id),
                Some(Consultation {
                    agent_id,
                    agent_response,
                    final_action,
                }),
            )
        };

        let record = QuestionRecord {
            index: t,
            responses,
            team_action,
            consulted,
            correct_option: correct,
        };
        score += question_score(&record, &scheme);
        tracker.observe_question(&record);
        questions.push(record);

        if t % config.survey_interval == 0 {
            let survey = draw_survey(&mut rng, config, t, &true_w, &mut ratings, &agent_hits);
            tracker.apply_survey(&survey)?;
            surveys.push(survey);
        }
    }

    let log = SessionLog {
        team_id: config.team_id(team),
        n_members: TEAM_SIZE,
        n_agents: TEAM_SIZE,
        questions,
        surveys,
        agent_true_accuracies: Some(config.agent_accuracies),
    };
    Ok(SimTeam { log, score })
}

fn choose_dt1(
    rng: &mut ChaCha8Rng,
    config: &SimConfig,
    state: &crate::models::TeamBeliefState,
    responses: &Responses,
    dt1: &ActionDistribution,
) -> usize {
    let probs = dt1.probs();
    match config.consult_policy {
        ConsultPolicy::Model => sample(rng, probs),
        ConsultPolicy::Never => match config.generative_model.base() {
            Some(base) => argmax(&option_probs(base, state, responses)),
            None => rng.gen_range(0..N_OPTIONS),
        },
        ConsultPolicy::Fixed { p } => {
            if rng.gen_bool(p) {
                N_OPTIONS + sample(rng, &probs[N_OPTIONS..])
            } else {
                sample(rng, &probs[..N_OPTIONS])
            }
        }
    }
}

/// Reported influence is the true matrix plus clipped jitter, renormalized.
/// Ratings move toward each agent's accuracy observed so far.
fn draw_survey(
    rng: &mut ChaCha8Rng,
    config: &SimConfig,
    after_question: u32,
    true_w: &Matrix4,
    ratings: &mut Matrix4,
    agent_hits: &[(u32, u32); TEAM_SIZE],
) -> SurveyRecord {
    let noise = config.survey_noise;
    let mut influence = *true_w;
    for (row, true_row) in influence.iter_mut().zip(true_w) {
        for x in row.iter_mut() {
            let jitter = if noise > 0.0 {
                rng.gen_range(-noise..=noise)
            } else {
                0.0
            };
            *x = (*x + jitter).max(0.0);
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|x| *x /= total);
        } else {
            *row = *true_row;
        }
    }
    for row in ratings.iter_mut() {
        for (j, r) in row.iter_mut().enumerate() {
            let (hits, asked) = agent_hits[j];
            if asked > 0 {
                let observed = f64::from(hits) / f64::from(asked);
                *r += config.rating_drift * (observed - *r);
            }
            let jitter = if noise > 0.0 {
                rng.gen_range(-noise..=noise)
            } else {
                0.0
            };
            *r = (*r + jitter).clamp(0.0, 1.0);
        }
    }
    SurveyRecord {
        after_question,
        influence,
        agent_ratings: *ratings,
    }
}

/// Points for one question: `+c1` if right, `−c2` if wrong or no consensus,
/// and `−c3` more if an agent was consulted.
pub fn question_score(q: &QuestionRecord, scheme: &RewardScheme) -> f64 {
    let answer = |choice: Choice| {
        if choice == q.correct_option {
            scheme.c1
        } else {
            -scheme.c2
        }
    };
    match (&q.team_action, &q.consulted) {
        (TeamAction::Answer(k), _) => answer(*k),
        (TeamAction::NoConsensus, _) => -scheme.c2,
        (TeamAction::ConsultAgent(_), Some(c)) => {
            -scheme.c3
                + match c.final_action {
                    FinalAction::Answer(k) => answer(k),
                    FinalAction::NoConsensus => -scheme.c2,
                }
        }
        (TeamAction::ConsultAgent(_), None) => -scheme.c3 - scheme.c2,
    }
}

pub fn realized_score(log: &SessionLog, scheme: &RewardScheme) -> f64 {
    log.questions
        .iter()
        .map(|q| question_score(q, scheme))
        .sum()
}

/// Expected total when each agent is consulted `consults_per_agent` times
/// and the most accurate one is consulted on every remaining question.
pub fn expected_score_explore_exploit(
    agent_accuracies: &[f64],
    consults_per_agent: usize,
    n_questions: usize,
    scheme: &RewardScheme,
) -> Result<f64> {
    if agent_accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(domain("agent accuracies must lie in [0, 1]"));
    }
    let explore = consults_per_agent * agent_accuracies.len();
    if explore > n_questions {
        return Err(domain(format!(
            "{explore} exploratory consults exceed {n_questions} questions"
        )));
    }
    if n_questions == 0 {
        return Ok(0.0);
    }
    let per_consult = |acc: f64| -scheme.c3 + acc * scheme.c1 - (1.0 - acc) * scheme.c2;
    let exploring: f64 = agent_accuracies
        .iter()
        .map(|a| consults_per_agent as f64 * per_consult(*a))
        .sum();
    let best = agent_accuracies
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(exploring + (n_questions - explore) as f64 * per_consult(best))
}
