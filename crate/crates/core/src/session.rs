//! Session-log schema for one team's sequence of questions, plus validation.
//!
//! Options and agents are 1-indexed on the wire. Abstaining members are
//! written as `null` in `responses`.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Members per team and agents per team.
pub const TEAM_SIZE: usize = 4;
/// Answer options per question.
pub const N_OPTIONS: usize = 4;
/// Row-sum tolerance for influence matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

pub type Matrix4 = [[f64; 4]; 4];

/// One of the four answer options, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Choice(u8);

impl Choice {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=N_OPTIONS as u8).contains(&value) {
            Ok(Self(value))
        } else {
            Err(domain(format!("option {value} outside 1..=4")))
        }
    }

    /// From a 0-based index.
    pub fn from_index(idx: usize) -> Self {
        assert!(idx < N_OPTIONS, "option index {idx} out of range");
        Self(idx as u8 + 1)
    }

    /// 0-based index.
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn get(self) -> u8 {
        self.0
    }

    fn is_valid(self) -> bool {
        (1..=N_OPTIONS as u8).contains(&self.0)
    }
}

/// One of the four AI agents, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(u8);

impl AgentId {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=TEAM_SIZE as u8).contains(&value) {
            Ok(Self(value))
        } else {
            Err(domain(format!("agent {value} outside 1..=4")))
        }
    }

    pub fn from_index(idx: usize) -> Self {
        assert!(idx < TEAM_SIZE, "agent index {idx} out of range");
        Self(idx as u8 + 1)
    }

    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn get(self) -> u8 {
        self.0
    }

    fn is_valid(self) -> bool {
        (1..=TEAM_SIZE as u8).contains(&self.0)
    }
}

/// Phase-1 individual answers; `None` is an abstention.
pub type Responses = [Option<Choice>; TEAM_SIZE];

/// What the team did in the first decision task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamAction {
    #[serde(rename = "option")]
    Answer(Choice),
    ConsultAgent(AgentId),
    NoConsensus,
}

/// What the team submitted after hearing an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalAction {
    #[serde(rename = "option")]
    Answer(Choice),
    NoConsensus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consultation {
    pub agent_id: AgentId,
    pub agent_response: Choice,
    pub final_action: FinalAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    /// 1-based question number.
    pub index: u32,
    pub responses: Responses,
    pub team_action: TeamAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consulted: Option<Consultation>,
    pub correct_option: Choice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    /// The survey is taken after this question and applies from the next one.
    pub after_question: u32,
    /// Row `i` holds member `i`'s reported influence of each member.
    pub influence: Matrix4,
    /// `agent_ratings[i][j]` is member `i`'s rating of agent `j`, in [0, 1].
    pub agent_ratings: Matrix4,
}

impl SurveyRecord {
    /// Rescales each influence row to sum to one. All-zero rows become uniform.
    pub fn normalize_influence(&mut self) {
        for row in &mut self.influence {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                for x in row.iter_mut() {
                    *x /= sum;
                }
            } else if sum == 0.0 {
                *row = [1.0 / TEAM_SIZE as f64; TEAM_SIZE];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub team_id: String,
    pub n_members: usize,
    pub n_agents: usize,
    pub questions: Vec<QuestionRecord>,
    pub surveys: Vec<SurveyRecord>,
    /// Ground-truth agent accuracies; only simulated logs carry them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_true_accuracies: Option<[f64; TEAM_SIZE]>,
}

impl SessionLog {
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_to(&self, writer: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Applies [`SurveyRecord::normalize_influence`] to every survey, as done on ingest.
    pub fn normalize_surveys(&mut self) {
        for s in &mut self.surveys {
            s.normalize_influence();
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_session(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Location {
    Session,
    Question { index: u32 },
    Survey { after_question: u32 },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Session => write!(f, "session"),
            Location::Question { index } => write!(f, "question {index}"),
            Location::Survey { after_question } => write!(f, "survey {after_question}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(flatten)]
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// One JSON object per line, one line per violation.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            out.push_str(&serde_json::to_string(v).expect("violation serializes"));
            out.push('\n');
        }
        out
    }

    fn push(&mut self, location: Location, message: impl Into<String>) {
        self.violations.push(Violation {
            location,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks every schema invariant and reports all violations found.
pub fn validate_session(log: &SessionLog) -> ValidationReport {
    let mut report = ValidationReport::default();
    if log.n_members != TEAM_SIZE {
        report.push(
            Location::Session,
            format!("n_members is {}, expected {TEAM_SIZE}", log.n_members),
        );
    }
    if log.n_agents != TEAM_SIZE {
        report.push(
            Location::Session,
            format!("n_agents is {}, expected {TEAM_SIZE}", log.n_agents),
        );
    }
    if let Some(accs) = &log.agent_true_accuracies {
        for (j, a) in accs.iter().enumerate() {
            if !(0.0..=1.0).contains(a) {
                report.push(
                    Location::Session,
                    format!("agent {} true accuracy {a} outside [0, 1]", j + 1),
                );
            }
        }
    }

    let mut prev_index = 0;
    for q in &log.questions {
        let loc = Location::Question { index: q.index };
        if q.index <= prev_index {
            report.push(
                loc,
                format!("index not strictly increasing after {prev_index}"),
            );
        }
        prev_index = prev_index.max(q.index);
        for (member, r) in q.responses.iter().enumerate() {
            if let Some(c) = r {
                if !c.is_valid() {
                    report.push(
                        loc,
                        format!("member {} response {} outside 1..=4", member + 1, c.0),
                    );
                }
            }
        }
        if !q.correct_option.is_valid() {
            report.push(
                loc,
                format!("correct option {} outside 1..=4", q.correct_option.0),
            );
        }
        match (q.team_action, &q.consulted) {
            (TeamAction::ConsultAgent(j), None) => {
                report.push(
                    loc,
                    format!("consulted agent {} but no consultation record", j.0),
                );
            }
            (TeamAction::ConsultAgent(j), Some(c)) => {
                if c.agent_id != j {
                    report.push(
                        loc,
                        format!(
                            "consultation names agent {} but team consulted agent {}",
                            c.agent_id.0, j.0
                        ),
                    );
                }
                if !c.agent_response.is_valid() {
                    report.push(
                        loc,
                        format!("agent response {} outside 1..=4", c.agent_response.0),
                    );
                }
                if let FinalAction::Answer(k) = c.final_action {
                    if !k.is_valid() {
                        report.push(loc, format!("final option {} outside 1..=4", k.0));
                    }
                }
            }
            (_, Some(_)) => report.push(loc, "consultation record without a consult action"),
            (TeamAction::Answer(k), None) => {
                if !k.is_valid() {
                    report.push(loc, format!("team option {} outside 1..=4", k.0));
                }
            }
            (TeamAction::NoConsensus, None) => {}
        }
        if let TeamAction::ConsultAgent(j) = q.team_action {
            if !j.is_valid() {
                report.push(loc, format!("agent {} outside 1..=4", j.0));
            }
        }
    }

    let last_question = log.questions.last().map_or(0, |q| q.index);
    let mut prev_survey = 0;
    for s in &log.surveys {
        let loc = Location::Survey {
            after_question: s.after_question,
        };
        if s.after_question == 0 || s.after_question % 5 != 0 {
            report.push(loc, "after_question is not a positive multiple of 5");
        }
        if s.after_question <= prev_survey {
            report.push(loc, format!("not strictly after survey {prev_survey}"));
        }
        if s.after_question > last_question {
            report.push(
                loc,
                format!("after_question exceeds last question {last_question}"),
            );
        }
        prev_survey = prev_survey.max(s.after_question);
        for (i, row) in s.influence.iter().enumerate() {
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                report.push(
                    loc,
                    format!("row {} has a negative or non-finite weight", i + 1),
                );
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                report.push(loc, format!("row {} not stochastic (sum {sum})", i + 1));
            }
        }
        for (i, row) in s.agent_ratings.iter().enumerate() {
            for (j, r) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(r) {
                    report.push(
                        loc,
                        format!(
                            "rating of agent {} by member {} is {r}, outside [0, 1]",
                            j + 1,
                            i + 1
                        ),
                    );
                }
            }
        }
    }
    report
}
