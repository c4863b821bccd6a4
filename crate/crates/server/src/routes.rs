use std::collections::HashSet;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use freetext_core::domain::{validate_assignment, AssignmentDraft, AssignmentId, Criterion, QuestionId};
use freetext_core::gateway::parse_feedback;
use freetext_core::storage::ResponseRecord;
use freetext_core::{
    complete, student_view, validate_question, Feedback, Question, QuestionDraft, RefinementReport, Refiner,
    StoreError, StudentQuestionView, StudentResponse,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::extract::{Body, Instructor, OptionalBody};
use crate::state::AppState;

/// Upper bound on `max_rounds` in a refine request.
pub const MAX_ROUNDS_CEILING: u32 = 10;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/questions", post(create_question))
        .route("/questions/{id}", get(get_question).put(update_question))
        .route("/questions/{id}/responses", post(submit_response))
        .route("/questions/{id}/refine", post(refine))
        .route("/questions/{id}/criteria:generate", post(generate_criteria))
        .route("/assignments", post(create_assignment))
        .route("/assignments/{id}", get(get_assignment))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route") })
        .with_state(state)
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    driver: String,
    provider_id: String,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        driver: state.store.driver_id().to_string(),
        provider_id: state.provider.id().to_string(),
    })
}

/// Malformed ids cannot name anything, so they are reported as not found.
fn question_id(raw: &str) -> Result<QuestionId, ApiError> {
    raw.parse().map_err(|_| ApiError::question_not_found(raw))
}

fn load_question(state: &AppState, raw: &str) -> Result<Question, ApiError> {
    let id = question_id(raw)?;
    state.store.get_question(&id).map_err(|e| match e {
        StoreError::NotFound(_) => ApiError::question_not_found(raw),
        other => other.into(),
    })
}

fn load_assignment(state: &AppState, id: &AssignmentId) -> Result<freetext_core::Assignment, ApiError> {
    state.store.get_assignment(id).map_err(|e| match e {
        StoreError::NotFound(_) => ApiError::assignment_not_found(&id.to_string()),
        other => other.into(),
    })
}

#[derive(Debug, Serialize)]
struct QuestionCreated {
    question_id: QuestionId,
}

async fn create_question(
    _: Instructor,
    State(state): State<AppState>,
    Body(draft): Body<QuestionDraft>,
) -> Result<(StatusCode, Json<QuestionCreated>), ApiError> {
    let q = validate_question(draft, &state.limits)?;
    if let Some(assignment_id) = &q.assignment_id {
        if let Err(StoreError::NotFound(_)) = state.store.get_assignment(assignment_id) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "UnknownAssignment",
                format!("no assignment with id {assignment_id}"),
            ));
        }
    }
    state.store.put_question(&q)?;
    tracing::info!(question = %q.id, "question created");
    Ok((StatusCode::CREATED, Json(QuestionCreated { question_id: q.id })))
}

async fn get_question(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StudentQuestionView>, ApiError> {
    let q = load_question(&state, &id)?;
    Ok(Json(student_view(&q)))
}

#[derive(Debug, Deserialize)]
pub struct ResponseBody {
    pub response_text: String,
}

async fn submit_response(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Body(body): Body<ResponseBody>,
) -> Result<Json<Feedback>, ApiError> {
    let q = load_question(&state, &id)?;
    let response = StudentResponse::new(q.id, body.response_text, &state.limits)?;
    let payload = state.templates.build_feedback_prompt(&q, &response)?;
    let raw = complete(state.provider.as_ref(), &payload, &state.params).await?;
    let feedback = parse_feedback(&raw, q.feedback_mode, &response.text)?;
    feedback.check(q.feedback_mode, &response.text)?;

    if state.store.persists_responses() {
        state.store.record_response(&ResponseRecord {
            question_id: q.id,
            response_text: response.text,
            feedback_holistic_copy: feedback.holistic.clone(),
            received_at: response.received_at,
        })?;
    }
    Ok(Json(feedback))
}

#[derive(Debug, Default, Deserialize)]
pub struct RefineBody {
    #[serde(default)]
    pub max_rounds: Option<u32>,
}

fn refiner(state: &AppState) -> Refiner<'_> {
    Refiner::new(&state.templates, state.provider.as_ref())
        .with_evaluator(state.evaluator())
        .with_params(state.params)
        .with_limits(state.limits)
}

async fn refine(
    _: Instructor,
    State(state): State<AppState>,
    Path(id): Path<String>,
    OptionalBody(body): OptionalBody<RefineBody>,
) -> Result<Json<RefinementReport>, ApiError> {
    let q = load_question(&state, &id)?;
    let max_rounds = body.max_rounds.unwrap_or(state.max_rounds);
    if max_rounds == 0 || max_rounds > MAX_ROUNDS_CEILING {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "InvalidMaxRounds",
            format!("max_rounds must be between 1 and {MAX_ROUNDS_CEILING}"),
        ));
    }
    let report = refiner(&state).refine_question(&q, max_rounds).await?;
    tracing::info!(question = %q.id, outcome = ?report.outcome, rounds = report.rounds.len(), "refinement finished");
    Ok(Json(report))
}

#[derive(Debug, Deserialize)]
pub struct UpdateBody {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub criteria: Option<Vec<String>>,
    pub expected_version: u64,
}

async fn update_question(
    _: Instructor,
    State(state): State<AppState>,
    Path(id): Path<String>,
    Body(body): Body<UpdateBody>,
) -> Result<Json<Question>, ApiError> {
    let current = load_question(&state, &id)?;
    let revised = current.revised(body.text, body.criteria, &state.limits)?;
    let stored = state
        .store
        .update_question(&revised, body.expected_version)
        .map_err(|e| match e {
            StoreError::NotFound(_) => ApiError::question_not_found(&id),
            other => other.into(),
        })?;
    Ok(Json(stored))
}

#[derive(Debug, Serialize)]
struct GeneratedCriteria {
    criteria: Vec<Criterion>,
}

async fn generate_criteria(
    _: Instructor,
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<GeneratedCriteria>, ApiError> {
    let q = load_question(&state, &id)?;
    let criteria = refiner(&state).generate_criteria(&q).await?;
    Ok(Json(GeneratedCriteria { criteria }))
}

#[derive(Debug, Serialize)]
struct AssignmentCreated {
    assignment_id: AssignmentId,
}

async fn create_assignment(
    _: Instructor,
    State(state): State<AppState>,
    Body(draft): Body<AssignmentDraft>,
) -> Result<(StatusCode, Json<AssignmentCreated>), ApiError> {
    let assignment = validate_assignment(draft, &state.limits)?;
    for qid in &assignment.question_ids {
        if let Err(StoreError::NotFound(_)) = state.store.get_question(qid) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "UnknownQuestion",
                format!("no question with id {qid}"),
            ));
        }
    }
    state.store.put_assignment(&assignment)?;
    Ok((
        StatusCode::CREATED,
        Json(AssignmentCreated {
            assignment_id: assignment.id,
        }),
    ))
}

#[derive(Debug, Serialize)]
struct AssignmentView {
    id: AssignmentId,
    title: String,
    questions: Vec<StudentQuestionView>,
}

/// Listed questions in their listed order, then questions that name this
/// assignment themselves, in creation order.
async fn get_assignment(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<AssignmentView>, ApiError> {
    let assignment_id: AssignmentId = id.parse().map_err(|_| ApiError::assignment_not_found(&id))?;
    let assignment = load_assignment(&state, &assignment_id)?;

    let mut seen = HashSet::new();
    let mut questions = Vec::new();
    for qid in &assignment.question_ids {
        match state.store.get_question(qid) {
            Ok(q) => {
                seen.insert(q.id);
                questions.push(student_view(&q));
            }
            Err(StoreError::NotFound(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    for q in state.store.list_questions(Some(&assignment_id))? {
        if seen.insert(q.id) {
            questions.push(student_view(&q));
        }
    }
    Ok(Json(AssignmentView {
        id: assignment.id,
        title: assignment.title,
        questions,
    }))
}
