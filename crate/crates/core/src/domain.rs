//! Core entities: questions with hidden criteria, student responses,
//! feedback with span annotations, and assignments.
//!
//! All text lengths and offsets in this module count unicode scalar values
//! (`char`s), never bytes.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use uuid::Uuid;

/// Returns true when `s` has the canonical 8-4-4-4-12 hexadecimal layout.
pub fn is_canonical_uuid(s: &str) -> bool {
    let bytes = s.as_bytes();
    if bytes.len() != 36 {
        return false;
    }
    bytes.iter().enumerate().all(|(i, b)| match i {
        8 | 13 | 18 | 23 => *b == b'-',
        _ => b.is_ascii_hexdigit(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("identifier {0:?} is not in canonical 8-4-4-4-12 form")]
pub struct InvalidId(pub String);

macro_rules! uuid_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(Uuid);

        impl $name {
            /// Fresh random (version 4) identifier.
            pub fn new_v4() -> Self {
                Self(Uuid::new_v4())
            }

            pub fn as_uuid(&self) -> &Uuid {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.hyphenated().fmt(f)
            }
        }

        impl FromStr for $name {
            type Err = InvalidId;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                if !is_canonical_uuid(s) {
                    return Err(InvalidId(s.to_string()));
                }
                Uuid::parse_str(s)
                    .map(Self)
                    .map_err(|_| InvalidId(s.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

uuid_id!(
    /// Identifier of a [`Question`].
    QuestionId
);
uuid_id!(
    /// Identifier of an [`Assignment`].
    AssignmentId
);

/// Which kinds of feedback a question returns to students.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    Holistic,
    SpanOnly,
    Both,
}

impl FeedbackMode {
    pub fn wants_holistic(self) -> bool {
        matches!(self, FeedbackMode::Holistic | FeedbackMode::Both)
    }

    pub fn wants_spans(self) -> bool {
        matches!(self, FeedbackMode::SpanOnly | FeedbackMode::Both)
    }
}

/// Size caps applied during validation. All counts are in unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_question_chars: usize,
    pub max_criterion_chars: usize,
    pub max_criteria: usize,
    pub max_response_chars: usize,
    pub max_title_chars: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_question_chars: 10_000,
            max_criterion_chars: 2_000,
            max_criteria: 50,
            max_response_chars: 5_000,
            max_title_chars: 500,
        }
    }
}

/// Validation failures. The variant names are stable and surface verbatim in
/// API error bodies.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("question text is empty")]
    EmptyQuestionText,
    #[error("question text has {len} characters, limit is {max}")]
    QuestionTooLong { len: usize, max: usize },
    #[error("criterion {index} is empty")]
    EmptyCriterionText { index: usize },
    #[error("criterion {index} has {len} characters, limit is {max}")]
    CriterionTooLong { index: usize, len: usize, max: usize },
    #[error("{count} criteria given, limit is {max}")]
    TooManyCriteria { count: usize, max: usize },
    #[error("response text is empty")]
    EmptyResponseText,
    #[error("response text has {len} characters, limit is {max}")]
    ResponseTooLong { len: usize, max: usize },
    #[error("assignment title is empty")]
    EmptyTitle,
    #[error("assignment title has {len} characters, limit is {max}")]
    TitleTooLong { len: usize, max: usize },
    #[error("question {0} appears more than once in the assignment")]
    DuplicateQuestionId(QuestionId),
}

impl ValidationError {
    /// Stable machine-readable name.
    pub fn name(&self) -> &'static str {
        match self {
            ValidationError::EmptyQuestionText => "EmptyQuestionText",
            ValidationError::QuestionTooLong { .. } => "QuestionTooLong",
            ValidationError::EmptyCriterionText { .. } => "EmptyCriterionText",
            ValidationError::CriterionTooLong { .. } => "CriterionTooLong",
            ValidationError::TooManyCriteria { .. } => "TooManyCriteria",
            ValidationError::EmptyResponseText => "EmptyResponseText",
            ValidationError::ResponseTooLong { .. } => "ResponseTooLong",
            ValidationError::EmptyTitle => "EmptyTitle",
            ValidationError::TitleTooLong { .. } => "TitleTooLong",
            ValidationError::DuplicateQuestionId(_) => "DuplicateQuestionId",
        }
    }
}

/// A single instructor-authored grading requirement. Never shown to students.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Criterion(String);

impl Criterion {
    pub fn new(text: impl Into<String>, limits: &Limits) -> Result<Self, ValidationError> {
        Self::checked(text.into(), 0, limits)
    }

    fn checked(text: String, index: usize, limits: &Limits) -> Result<Self, ValidationError> {
        if text.trim().is_empty() {
            return Err(ValidationError::EmptyCriterionText { index });
        }
        let len = text.chars().count();
        if len > limits.max_criterion_chars {
            return Err(ValidationError::CriterionTooLong {
                index,
                len,
                max: limits.max_criterion_chars,
            });
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Criterion {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub fn validate_criteria(
    texts: Vec<String>,
    limits: &Limits,
) -> Result<Vec<Criterion>, ValidationError> {
    if texts.len() > limits.max_criteria {
        return Err(ValidationError::TooManyCriteria {
            count: texts.len(),
            max: limits.max_criteria,
        });
    }
    texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| Criterion::checked(t, i, limits))
        .collect()
}

fn validate_question_text(text: &str, limits: &Limits) -> Result<(), ValidationError> {
    if text.trim().is_empty() {
        return Err(ValidationError::EmptyQuestionText);
    }
    let len = text.chars().count();
    if len > limits.max_question_chars {
        return Err(ValidationError::QuestionTooLong {
            len,
            max: limits.max_question_chars,
        });
    }
    Ok(())
}

/// An unvalidated question as submitted by an instructor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionDraft {
    pub text: String,
    #[serde(default)]
    pub criteria: Vec<String>,
    pub feedback_mode: FeedbackMode,
    #[serde(default)]
    pub assignment_id: Option<AssignmentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
    pub criteria: Vec<Criterion>,
    pub feedback_mode: FeedbackMode,
    pub assignment_id: Option<AssignmentId>,
    pub version: u64,
    pub created_at: DateTime<Utc>,
}

/// Validates a draft and mints a version-1 question with a fresh id.
pub fn validate_question(draft: QuestionDraft, limits: &Limits) -> Result<Question, ValidationError> {
    validate_question_text(&draft.text, limits)?;
    let criteria = validate_criteria(draft.criteria, limits)?;
    Ok(Question {
        id: QuestionId::new_v4(),
        text: draft.text,
        criteria,
        feedback_mode: draft.feedback_mode,
        assignment_id: draft.assignment_id,
        version: 1,
        created_at: Utc::now(),
    })
}

impl Question {
    /// Criteria are absent and may be produced by criteria generation.
    pub fn needs_generation(&self) -> bool {
        self.criteria.is_empty()
    }

    pub fn to_draft(&self) -> QuestionDraft {
        QuestionDraft {
            text: self.text.clone(),
            criteria: self.criteria.iter().map(|c| c.0.clone()).collect(),
            feedback_mode: self.feedback_mode,
            assignment_id: self.assignment_id,
        }
    }

    /// Copy with revised text and/or criteria, revalidated. Identity, version
    /// and timestamp are kept; the store assigns the next version.
    pub fn revised(
        &self,
        text: Option<String>,
        criteria: Option<Vec<String>>,
        limits: &Limits,
    ) -> Result<Question, ValidationError> {
        let mut next = self.clone();
        if let Some(text) = text {
            validate_question_text(&text, limits)?;
            next.text = text;
        }
        if let Some(criteria) = criteria {
            next.criteria = validate_criteria(criteria, limits)?;
        }
        Ok(next)
    }

    /// Same question with different text; used while refining.
    pub fn with_text(&self, text: impl Into<String>) -> Question {
        Question {
            text: text.into(),
            ..self.clone()
        }
    }
}

/// What a student is allowed to see of a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentQuestionView {
    pub id: QuestionId,
    pub text: String,
    pub feedback_mode: FeedbackMode,
}

pub fn student_view(q: &Question) -> StudentQuestionView {
    StudentQuestionView {
        id: q.id,
        text: q.text.clone(),
        feedback_mode: q.feedback_mode,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentResponse {
    pub question_id: QuestionId,
    pub text: String,
    pub received_at: DateTime<Utc>,
}

impl StudentResponse {
    pub fn new(
        question_id: QuestionId,
        text: String,
        limits: &Limits,
    ) -> Result<Self, ValidationError> {
        if text.trim().is_empty() {
            return Err(ValidationError::EmptyResponseText);
        }
        let len = text.chars().count();
        if len > limits.max_response_chars {
            return Err(ValidationError::ResponseTooLong {
                len,
                max: limits.max_response_chars,
            });
        }
        Ok(Self {
            question_id,
            text,
            received_at: Utc::now(),
        })
    }
}

/// Comment anchored to the half-open scalar range `[start, end)` of a response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub start: usize,
    pub end: usize,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("span [{start}, {end}) is out of bounds for a response of {len} characters")]
pub struct BoundsError {
    pub start: usize,
    pub end: usize,
    pub len: usize,
}

pub fn validate_span(span: &SpanAnnotation, response_text: &str) -> Result<(), BoundsError> {
    let len = response_text.chars().count();
    if span.start < span.end && span.end <= len {
        Ok(())
    } else {
        Err(BoundsError {
            start: span.start,
            end: span.end,
            len,
        })
    }
}

/// Slice `text` by scalar offsets. Returns `None` when out of range.
pub fn slice_scalars(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain([text.len()]);
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[from..to])
}

/// A model remark whose quote could not be found in the response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnlocatedNote {
    pub quote: String,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub holistic: Option<String>,
    pub spans: Vec<SpanAnnotation>,
    pub unlocated_notes: Vec<UnlocatedNote>,
    pub provider_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeedbackError {
    #[error("holistic-only feedback carries {0} spans")]
    UnexpectedSpans(usize),
    #[error("span-only feedback carries holistic text")]
    UnexpectedHolistic,
    #[error("feedback is missing required holistic text")]
    MissingHolistic,
    #[error("span comment at index {0} is empty")]
    EmptySpanComment(usize),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

impl Feedback {
    /// Checks the mode and span-bound invariants against the annotated response.
    pub fn check(&self, mode: FeedbackMode, response_text: &str) -> Result<(), FeedbackError> {
        let holistic = self
            .holistic
            .as_deref()
            .filter(|h| !h.trim().is_empty());
        match mode {
            FeedbackMode::Holistic if !self.spans.is_empty() => {
                return Err(FeedbackError::UnexpectedSpans(self.spans.len()))
            }
            FeedbackMode::SpanOnly if self.holistic.is_some() => {
                return Err(FeedbackError::UnexpectedHolistic)
            }
            FeedbackMode::Holistic | FeedbackMode::Both if holistic.is_none() => {
                return Err(FeedbackError::MissingHolistic)
            }
            _ => {}
        }
        for (i, span) in self.spans.iter().enumerate() {
            validate_span(span, response_text)?;
            if span.comment.trim().is_empty() {
                return Err(FeedbackError::EmptySpanComment(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentDraft {
    pub title: String,
    #[serde(default)]
    pub question_ids: Vec<QuestionId>,
}

/// Ordered collection of questions shared with students as one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: AssignmentId,
    pub title: String,
    pub question_ids: Vec<QuestionId>,
}

pub fn validate_assignment(
    draft: AssignmentDraft,
    limits: &Limits,
) -> Result<Assignment, ValidationError> {
    if draft.title.trim().is_empty() {
        return Err(ValidationError::EmptyTitle);
    }
    let len = draft.title.chars().count();
    if len > limits.max_title_chars {
        return Err(ValidationError::TitleTooLong {
            len,
            max: limits.max_title_chars,
        });
    }
    let mut seen = HashSet::new();
    if let Some(dup) = draft.question_ids.iter().find(|id| !seen.insert(**id)) {
        return Err(ValidationError::DuplicateQuestionId(*dup));
    }
    Ok(Assignment {
        id: AssignmentId::new_v4(),
        title: draft.title,
        question_ids: draft.question_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn draft(text: &str, criteria: &[&str], mode: FeedbackMode) -> QuestionDraft {
        QuestionDraft {
            text: text.to_string(),
            criteria: criteria.iter().map(|c| c.to_string()).collect(),
            feedback_mode: mode,
            assignment_id: None,
        }
    }

    #[test]
    fn rosetta_question_validates_to_version_one() {
        let q = validate_question(
            draft(
                "What is the Rosetta Stone?",
                &["Mention why the Ptolemaic dynasty created the Rosetta Stone"],
                FeedbackMode::Both,
            ),
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(q.version, 1);
        assert_eq!(q.criteria.len(), 1);
        assert!(is_canonical_uuid(&q.id.to_string()));
        assert_eq!(q.id.as_uuid().get_version_num(), 4);
        assert!(!q.needs_generation());
    }

    #[test]
    fn blank_text_is_rejected() {
        let err = validate_question(draft("   ", &[], FeedbackMode::Holistic), &Limits::default())
            .unwrap_err();
        assert_eq!(err, ValidationError::EmptyQuestionText);
        assert_eq!(err.name(), "EmptyQuestionText");
    }

    #[test]
    fn missing_criteria_marks_question_for_generation() {
        let q = validate_question(
            draft("Explain DNA base pairing.", &[], FeedbackMode::Holistic),
            &Limits::default(),
        )
        .unwrap();
        assert!(q.criteria.is_empty());
        assert!(q.needs_generation());
    }

    #[test]
    fn caps_are_enforced_in_scalar_values() {
        let limits = Limits {
            max_question_chars: 3,
            max_criterion_chars: 2,
            max_criteria: 1,
            ..Limits::default()
        };
        // three scalars, seven bytes
        assert!(validate_question(draft("é✓x", &[], FeedbackMode::Both), &limits).is_ok());
        assert!(matches!(
            validate_question(draft("abcd", &[], FeedbackMode::Both), &limits),
            Err(ValidationError::QuestionTooLong { len: 4, max: 3 })
        ));
        assert!(matches!(
            validate_question(draft("ab", &["a", "b"], FeedbackMode::Both), &limits),
            Err(ValidationError::TooManyCriteria { count: 2, max: 1 })
        ));
        assert!(matches!(
            validate_question(draft("ab", &["abc"], FeedbackMode::Both), &limits),
            Err(ValidationError::CriterionTooLong { index: 0, .. })
        ));
        assert!(matches!(
            validate_question(draft("ab", &[" \n"], FeedbackMode::Both), &limits),
            Err(ValidationError::EmptyCriterionText { index: 0 })
        ));
    }

    #[test]
    fn default_caps() {
        let limits = Limits::default();
        let long = "x".repeat(10_001);
        assert!(matches!(
            validate_question(draft(&long, &[], FeedbackMode::Both), &limits),
            Err(ValidationError::QuestionTooLong { len: 10_001, max: 10_000 })
        ));
        let many: Vec<String> = (0..51).map(|i| format!("criterion {i}")).collect();
        let d = QuestionDraft {
            criteria: many,
            ..draft("q", &[], FeedbackMode::Both)
        };
        assert!(matches!(
            validate_question(d, &limits),
            Err(ValidationError::TooManyCriteria { count: 51, max: 50 })
        ));
    }

    #[test]
    fn ids_require_canonical_form() {
        assert!("07b2c3ef-0f97-46bc-a11e-0123456789ab".parse::<QuestionId>().is_ok());
        assert!("07b2c3ef0f9746bca11e0123456789ab".parse::<QuestionId>().is_err());
        assert!("{07b2c3ef-0f97-46bc-a11e-0123456789ab}".parse::<QuestionId>().is_err());
        assert!("07b2c3ef-0f97-46bc-a11e-0123456789ag".parse::<QuestionId>().is_err());
        let id = QuestionId::new_v4();
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(json, format!("\"{id}\""));
    }

    #[test]
    fn student_view_depends_only_on_id_text_mode() {
        let q = validate_question(
            draft("What is the Rosetta Stone?", &[], FeedbackMode::Both),
            &Limits::default(),
        )
        .unwrap();
        let with_criteria = q
            .revised(None, Some(vec!["Mention the Ptolemaic dynasty".into()]), &Limits::default())
            .unwrap();
        assert_eq!(student_view(&q), student_view(&with_criteria));
        let json = serde_json::to_string(&student_view(&with_criteria)).unwrap();
        assert!(!json.contains("Ptolemaic"));
        assert!(json.contains("What is the Rosetta Stone?"));
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 3);
    }

    #[test]
    fn span_validation_examples() {
        let span = |start, end| SpanAnnotation {
            start,
            end,
            comment: "c".into(),
        };
        assert!(validate_span(&span(0, 1), "a").is_ok());
        assert!(validate_span(&span(2, 2), "abc").is_err());
        assert!(validate_span(&span(1, 3), "é✓x").is_ok());
        assert!(validate_span(&span(1, 4), "é✓x").is_err());
    }

    /// Scalar positions enumerated by hand-rolled decoding of UTF-8 lead bytes,
    /// independent of `char_indices`.
    fn scalar_count_by_lead_bytes(s: &str) -> usize {
        s.as_bytes().iter().filter(|b| (**b & 0xC0) != 0x80).count()
    }

    #[test]
    fn span_offsets_are_scalars_not_bytes() {
        let text = "é✓x";
        assert_eq!(scalar_count_by_lead_bytes(text), 3);
        assert_eq!(text.len(), 6);
        let span = SpanAnnotation {
            start: 1,
            end: 3,
            comment: "c".into(),
        };
        assert!(validate_span(&span, text).is_ok());
        assert_eq!(slice_scalars(text, 1, 3), Some("✓x"));
        // as bytes, [1, 3) would split 'é'
        assert!(!text.is_char_boundary(1));
    }

    #[test]
    fn slice_scalars_edges() {
        assert_eq!(slice_scalars("abc", 0, 0), Some(""));
        assert_eq!(slice_scalars("abc", 3, 3), Some(""));
        assert_eq!(slice_scalars("abc", 0, 3), Some("abc"));
        assert_eq!(slice_scalars("abc", 2, 4), None);
        assert_eq!(slice_scalars("abc", 2, 1), None);
    }

    #[test]
    fn feedback_mode_invariants() {
        let span = SpanAnnotation {
            start: 0,
            end: 1,
            comment: "look here".into(),
        };
        let fb = |holistic: Option<&str>, spans: Vec<SpanAnnotation>| Feedback {
            holistic: holistic.map(String::from),
            spans,
            unlocated_notes: vec![],
            provider_id: "p".into(),
            latency_ms: 0,
        };
        assert!(fb(Some("ok"), vec![]).check(FeedbackMode::Holistic, "abc").is_ok());
        assert_eq!(
            fb(Some("ok"), vec![span.clone()]).check(FeedbackMode::Holistic, "abc"),
            Err(FeedbackError::UnexpectedSpans(1))
        );
        assert_eq!(
            fb(Some("ok"), vec![]).check(FeedbackMode::SpanOnly, "abc"),
            Err(FeedbackError::UnexpectedHolistic)
        );
        assert!(fb(None, vec![span.clone()]).check(FeedbackMode::SpanOnly, "abc").is_ok());
        assert_eq!(
            fb(None, vec![]).check(FeedbackMode::Both, "abc"),
            Err(FeedbackError::MissingHolistic)
        );
        assert!(fb(Some("ok"), vec![]).check(FeedbackMode::Both, "abc").is_ok());
        assert!(matches!(
            fb(Some("ok"), vec![span]).check(FeedbackMode::Both, ""),
            Err(FeedbackError::Bounds(_))
        ));
    }

    #[test]
    fn assignment_rejects_duplicates() {
        let id = QuestionId::new_v4();
        let err = validate_assignment(
            AssignmentDraft {
                title: "Week 1".into(),
                question_ids: vec![id, id],
            },
            &Limits::default(),
        )
        .unwrap_err();
        assert_eq!(err, ValidationError::DuplicateQuestionId(id));
    }

    #[test]
    fn response_validation() {
        let limits = Limits {
            max_response_chars: 4,
            ..Limits::default()
        };
        let id = QuestionId::new_v4();
        assert!(StudentResponse::new(id, "ééé✓".into(), &limits).is_ok());
        assert!(matches!(
            StudentResponse::new(id, "abcde".into(), &limits),
            Err(ValidationError::ResponseTooLong { len: 5, max: 4 })
        ));
        assert_eq!(
            StudentResponse::new(id, "  ".into(), &limits),
            Err(ValidationError::EmptyResponseText)
        );
    }

    fn mode_strategy() -> impl Strategy<Value = FeedbackMode> {
        prop_oneof![
            Just(FeedbackMode::Holistic),
            Just(FeedbackMode::SpanOnly),
            Just(FeedbackMode::Both)
        ]
    }

    proptest! {
        #[test]
        fn draft_round_trips_through_validation(
            text in "\\PC{1,60}".prop_filter("non-blank", |t| !t.trim().is_empty()),
            criteria in prop::collection::vec("\\PC{1,40}".prop_filter("non-blank", |t| !t.trim().is_empty()), 0..6),
            mode in mode_strategy(),
            with_assignment in any::<bool>(),
        ) {
            let d = QuestionDraft {
                text,
                criteria,
                feedback_mode: mode,
                assignment_id: with_assignment.then(AssignmentId::new_v4),
            };
            let q = validate_question(d.clone(), &Limits::default()).unwrap();
            prop_assert_eq!(q.to_draft(), d.clone());
            let again = validate_question(q.to_draft(), &Limits::default()).unwrap();
            prop_assert_eq!(again.to_draft(), d);
        }

        #[test]
        fn question_json_round_trips(
            text in "\\PC{1,60}".prop_filter("non-blank", |t| !t.trim().is_empty()),
            mode in mode_strategy(),
        ) {
            let q = validate_question(QuestionDraft {
                text,
                criteria: vec!["x".into()],
                feedback_mode: mode,
                assignment_id: None,
            }, &Limits::default()).unwrap();
            let back: Question = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
            prop_assert_eq!(back, q);
        }
    }
}
