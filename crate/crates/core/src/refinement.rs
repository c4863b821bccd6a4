//! Criteria generation and the simulate, evaluate, rewrite loop that tightens
//! a question until a criteria-blind answer is judged fairly.
//!
//! Neither operation writes anything; callers decide whether to persist the
//! generated criteria or the refined text.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Criterion, Limits, Question, QuestionId};
use crate::gateway::{
    complete, parse_criteria_list, parse_rewrite, parse_simulated_answer, parse_verdict,
    FairnessVerdict, GatewayError, GenerationParams, LlmProvider, ParseError,
};
use crate::prompt::{TemplateError, TemplateSet};

pub const DEFAULT_MAX_ROUNDS: u32 = 3;

/// Shortest criterion fragment the leak screen looks for, in scalar values.
pub const LEAK_WINDOW_CHARS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementRound {
    pub round_index: u32,
    pub simulated_answer: String,
    pub verdict: FairnessVerdict,
    pub rewritten_text: Option<String>,
    /// Set when `rewritten_text` copied criterion wording absent from the
    /// original question and was therefore not adopted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected_leak: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementOutcome {
    FairAtStart,
    Improved,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub question_id: QuestionId,
    pub initial_text: String,
    pub final_text: String,
    pub rounds: Vec<RefinementRound>,
    pub outcome: RefinementOutcome,
}

#[derive(Debug, Error)]
pub enum RefinementError {
    #[error("question already has criteria")]
    CriteriaAlreadyPresent,
    #[error("question has no criteria to refine against")]
    NoCriteria,
    #[error("max_rounds must be at least 1")]
    InvalidMaxRounds,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl RefinementError {
    pub fn name(&self) -> &'static str {
        match self {
            RefinementError::CriteriaAlreadyPresent => "CriteriaAlreadyPresent",
            RefinementError::NoCriteria => "NoCriteria",
            RefinementError::InvalidMaxRounds => "InvalidMaxRounds",
            RefinementError::Gateway(e) => e.name(),
            RefinementError::Parse(e) => e.name(),
            RefinementError::Template(_) => "TemplateError",
        }
    }
}

/// A refinement that stopped on an error, with the rounds completed so far.
#[derive(Debug, Error)]
#[error("refinement failed after {} completed rounds: {error}", rounds_so_far.len())]
pub struct RefinementFailure {
    #[source]
    pub error: RefinementError,
    pub rounds_so_far: Vec<RefinementRound>,
}

impl From<RefinementError> for RefinementFailure {
    fn from(error: RefinementError) -> Self {
        Self {
            error,
            rounds_so_far: Vec::new(),
        }
    }
}

/// Returns the first `LEAK_WINDOW_CHARS`-long fragment of any criterion that
/// appears verbatim in `candidate` but not in `baseline`.
///
/// Wording the instructor already put in the question is not new information,
/// so it is excused.
pub fn find_criterion_leak(candidate: &str, baseline: &str, criteria: &[Criterion]) -> Option<String> {
    let mut checked = HashSet::new();
    for criterion in criteria {
        let chars: Vec<char> = criterion.as_str().chars().collect();
        if chars.len() < LEAK_WINDOW_CHARS {
            continue;
        }
        for window in chars.windows(LEAK_WINDOW_CHARS) {
            let fragment: String = window.iter().collect();
            if !checked.insert(fragment.clone()) {
                continue;
            }
            if candidate.contains(&fragment) && !baseline.contains(&fragment) {
                return Some(fragment);
            }
        }
    }
    None
}

/// Runs model calls for criteria generation and refinement.
pub struct Refiner<'a> {
    templates: &'a TemplateSet,
    student: &'a dyn LlmProvider,
    evaluator: &'a dyn LlmProvider,
    params: GenerationParams,
    limits: Limits,
}

impl<'a> Refiner<'a> {
    /// One provider plays both the simulated student and the evaluator.
    pub fn new(templates: &'a TemplateSet, provider: &'a dyn LlmProvider) -> Self {
        Self {
            templates,
            student: provider,
            evaluator: provider,
            params: GenerationParams::default(),
            limits: Limits::default(),
        }
    }

    /// Use a distinct provider for evaluation, rewriting and criteria generation.
    pub fn with_evaluator(mut self, evaluator: &'a dyn LlmProvider) -> Self {
        self.evaluator = evaluator;
        self
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub async fn generate_criteria(&self, q: &Question) -> Result<Vec<Criterion>, RefinementError> {
        if !q.criteria.is_empty() {
            return Err(RefinementError::CriteriaAlreadyPresent);
        }
        let payload = self.templates.build_criteria_generation_prompt(q)?;
        let raw = complete(self.evaluator, &payload, &self.params).await?;
        Ok(parse_criteria_list(&raw, &self.limits)?)
    }

    pub async fn refine_question(
        &self,
        q: &Question,
        max_rounds: u32,
    ) -> Result<RefinementReport, RefinementFailure> {
        if max_rounds == 0 {
            return Err(RefinementError::InvalidMaxRounds.into());
        }
        if q.criteria.is_empty() {
            return Err(RefinementError::NoCriteria.into());
        }

        let mut rounds = Vec::new();
        let mut current = q.clone();
        let mut outcome = RefinementOutcome::Unresolved;

        for round_index in 0..max_rounds {
            let step = self.round(q, &current, round_index, max_rounds).await;
            let round = match step {
                Ok(round) => round,
                Err(error) => {
                    return Err(RefinementFailure {
                        error,
                        rounds_so_far: rounds,
                    })
                }
            };
            let fair = round.verdict.fair;
            let adopted = match (&round.rewritten_text, &round.rejected_leak) {
                (Some(text), None) => Some(text.clone()),
                _ => None,
            };
            let rejected = round.rejected_leak.is_some();
            rounds.push(round);

            if fair {
                outcome = if round_index == 0 {
                    RefinementOutcome::FairAtStart
                } else {
                    RefinementOutcome::Improved
                };
                break;
            }
            if rejected {
                break;
            }
            match adopted {
                Some(text) => current = current.with_text(text),
                None => break,
            }
        }

        Ok(RefinementReport {
            question_id: q.id,
            initial_text: q.text.clone(),
            final_text: current.text,
            rounds,
            outcome,
        })
    }

    async fn round(
        &self,
        original: &Question,
        current: &Question,
        round_index: u32,
        max_rounds: u32,
    ) -> Result<RefinementRound, RefinementError> {
        let sim_payload = self.templates.build_simulated_student_prompt(current)?;
        let raw = complete(self.student, &sim_payload, &self.params).await?;
        let simulated_answer = parse_simulated_answer(&raw)?;

        let eval_payload = self
            .templates
            .build_fairness_evaluation_prompt(current, &simulated_answer)?;
        let raw = complete(self.evaluator, &eval_payload, &self.params).await?;
        let verdict = parse_verdict(&raw)?;

        let mut round = RefinementRound {
            round_index,
            simulated_answer,
            verdict,
            rewritten_text: None,
            rejected_leak: None,
        };
        if round.verdict.fair || round_index + 1 >= max_rounds {
            return Ok(round);
        }

        let rewrite_payload = self
            .templates
            .build_question_rewrite_prompt(current, &round.verdict)?;
        let raw = complete(self.evaluator, &rewrite_payload, &self.params).await?;
        let rewritten = parse_rewrite(&raw)?;
        if rewritten.chars().count() > self.limits.max_question_chars {
            return Err(ParseError(format!(
                "rewrite exceeds {} characters",
                self.limits.max_question_chars
            ))
            .into());
        }
        round.rejected_leak = find_criterion_leak(&rewritten, &original.text, &original.criteria);
        if let Some(fragment) = &round.rejected_leak {
            tracing::info!(question = %original.id, round_index, fragment, "rewrite rejected: criterion wording leaked");
        }
        round.rewritten_text = Some(rewritten);
        Ok(round)
    }
}
