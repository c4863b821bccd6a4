//! Core of the freetext feedback service: instructors register open-ended
//! questions with hidden grading criteria, and students get model-written
//! feedback on their free-text answers.
//!
//! - [`domain`]: questions, responses, feedback and their invariants.
//! - [`prompt`]: role-segmented templates and the prompt builders.
//! - [`gateway`]: provider contract, retries/timeouts, reply parsers.
//! - [`refinement`]: criteria generation and the question-fairness loop.
//! - [`storage`]: in-memory and JSON-file stores.

pub mod domain;
pub mod gateway;
pub mod prompt;
pub mod refinement;
pub mod storage;

pub use domain::{
    student_view, validate_question, validate_span, Assignment, AssignmentId, Criterion, Feedback,
    FeedbackMode, Limits, Question, QuestionDraft, QuestionId, SpanAnnotation, StudentQuestionView,
    StudentResponse, ValidationError,
};
pub use gateway::{complete, Completion, GatewayError, GenerationParams, LlmProvider};
pub use prompt::{PromptPayload, Role, TemplateSet};
pub use refinement::{RefinementOutcome, RefinementReport, Refiner};
pub use storage::{FileStore, FileStoreOptions, MemoryStore, QuestionStore, StoreError};
