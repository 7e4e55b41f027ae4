//! Rebuilding what a team knew before each decision.
//!
//! The state before question `t` reflects the correct answers of questions
//! `1..t` and every survey taken after one of those questions.

use crate::appraisal::InfluenceState;
use crate::error::{Error, Result};
use crate::models::TeamBeliefState;
use crate::reward::RewardScheme;
use crate::session::{QuestionRecord, SessionLog, SurveyRecord};

/// Incrementally folds questions and surveys into a [`TeamBeliefState`].
#[derive(Debug, Clone)]
pub struct BeliefTracker {
    state: TeamBeliefState,
}

impl BeliefTracker {
    pub fn new(scheme: RewardScheme) -> Self {
        Self {
            state: TeamBeliefState::initial(scheme),
        }
    }

    pub fn state(&self) -> &TeamBeliefState {
        &self.state
    }

    /// Scores every member's phase-1 answer, and the agent if one was asked.
    pub fn observe_question(&mut self, q: &QuestionRecord) {
        for (appraisal, response) in self.state.human_appraisals.iter_mut().zip(&q.responses) {
            if let Some(choice) = response {
                *appraisal = appraisal.observe(*choice == q.correct_option);
            }
        }
        if let Some(c) = &q.consulted {
            let agent = &mut self.state.agent_appraisals[c.agent_id.index()];
            *agent = agent.observe(c.agent_response == q.correct_option);
        }
    }

    /// Replaces the influence network and agent ratings with a survey's.
    pub fn apply_survey(&mut self, survey: &SurveyRecord) -> Result<()> {
        let mut s = survey.clone();
        s.normalize_influence();
        self.state.influence = InfluenceState::from_matrix(s.influence)?;
        self.state.agent_ratings = s.agent_ratings;
        Ok(())
    }
}

/// Fails with [`Error::InvalidLog`] unless the log, with survey rows
/// normalized as on ingest, passes validation.
pub fn check_log(log: &SessionLog) -> Result<()> {
    let mut normalized = log.clone();
    normalized.normalize_surveys();
    let report = normalized.validate();
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::InvalidLog {
            team_id: log.team_id.clone(),
            summary: report.to_string(),
        })
    }
}

/// Belief state before each question, in log order.
pub fn replay(log: &SessionLog, scheme: RewardScheme) -> Result<Vec<TeamBeliefState>> {
    check_log(log)?;
    let mut tracker = BeliefTracker::new(scheme);
    let mut surveys = log.surveys.iter().peekable();
    let mut states = Vec::with_capacity(log.questions.len());
    for q in &log.questions {
        states.push(tracker.state().clone());
        tracker.observe_question(q);
        while let Some(s) = surveys.next_if(|s| s.after_question <= q.index) {
            tracker.apply_survey(s)?;
        }
    }
    Ok(states)
}
