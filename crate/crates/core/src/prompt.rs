//! Role-segmented prompt templates and the builders for every model call the
//! service makes.
//!
//! Placeholders are `{name}` with `name` matching `[A-Za-z_][A-Za-z0-9_]*`.
//! `{{` and `}}` render as literal braces; any other brace is a syntax error.
//! Bound values are inserted verbatim and never rescanned.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{Criterion, FeedbackMode, Question, StudentResponse};
use crate::gateway::FairnessVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Task framing shared by every call.
    System,
    /// Material only the evaluating model may see: criteria, rubric, verdicts.
    Evaluator,
    /// Material the student (or simulated student) is entitled to see.
    Student,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Evaluator => "evaluator",
            Role::Student => "student",
        }
    }

    fn parse(s: &str) -> Option<Role> {
        match s {
            "system" => Some(Role::System),
            "evaluator" => Some(Role::Evaluator),
            "student" => Some(Role::Student),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("no binding for placeholder {{{0}}}")]
    MissingBinding(String),
    #[error("placeholder {{{0}}} is not declared by the template")]
    UnknownPlaceholder(String),
    #[error("template {template}: {message}")]
    Syntax { template: String, message: String },
    #[error("template {0} not found")]
    NotFound(String),
    #[error("reading template {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("template {template}: placeholder {{{placeholder}}} may only appear in evaluator segments")]
    RoleViolation { template: String, placeholder: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Slot(String),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn tokenize(body: &str) -> Result<Vec<Piece>, String> {
    let mut pieces = Vec::new();
    let mut literal = String::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) if name.is_empty() && is_ident_start(c) => name.push(c),
                        Some(c) if !name.is_empty() && is_ident_char(c) => name.push(c),
                        Some(c) => return Err(format!("invalid character {c:?} in placeholder")),
                        None => return Err("unterminated placeholder".to_string()),
                    }
                }
                if name.is_empty() {
                    return Err("empty placeholder `{}`".to_string());
                }
                if !literal.is_empty() {
                    pieces.push(Piece::Literal(std::mem::take(&mut literal)));
                }
                pieces.push(Piece::Slot(name));
            }
            '}' => return Err("unmatched `}` (write `}}` for a literal brace)".to_string()),
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        pieces.push(Piece::Literal(literal));
    }
    Ok(pieces)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSegment {
    pub role: Role,
    pub body: String,
    pieces: Vec<Piece>,
}

impl TemplateSegment {
    fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(name) => Some(name.as_str()),
            Piece::Literal(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub segments: Vec<TemplateSegment>,
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    /// Builds a template whose required set is every placeholder used.
    pub fn from_segments<I, S>(name: impl Into<String>, segments: I) -> Result<Self, TemplateError>
    where
        I: IntoIterator<Item = (Role, S)>,
        S: Into<String>,
    {
        let mut template = Self::with_required(name, segments, BTreeSet::new())?;
        template.required_placeholders = template
            .segments
            .iter()
            .flat_map(|s| s.placeholders().map(String::from))
            .collect();
        Ok(template)
    }

    /// Builds a template with an explicit required set. Placeholders outside
    /// that set are reported by [`render`].
    pub fn with_required<I, S>(
        name: impl Into<String>,
        segments: I,
        required: BTreeSet<String>,
    ) -> Result<Self, TemplateError>
    where
        I: IntoIterator<Item = (Role, S)>,
        S: Into<String>,
    {
        let name = name.into();
        let segments = segments
            .into_iter()
            .map(|(role, body)| {
                let body = body.into();
                let pieces = tokenize(&body).map_err(|message| TemplateError::Syntax {
                    template: name.clone(),
                    message,
                })?;
                Ok(TemplateSegment { role, body, pieces })
            })
            .collect::<Result<Vec<_>, TemplateError>>()?;
        Ok(Self {
            name,
            segments,
            required_placeholders: required,
        })
    }

    /// Parses the `.prompt` file format: segments introduced by
    /// `---role:<system|evaluator|student>` lines.
    pub fn parse(name: impl Into<String>, source: &str) -> Result<Self, TemplateError> {
        let name = name.into();
        let syntax = |message: String| TemplateError::Syntax {
            template: name.clone(),
            message,
        };
        let mut segments: Vec<(Role, Vec<&str>)> = Vec::new();
        for (lineno, line) in source.lines().enumerate() {
            if let Some(role) = line.trim_end().strip_prefix("---role:") {
                let role = Role::parse(role.trim())
                    .ok_or_else(|| syntax(format!("line {}: unknown role {role:?}", lineno + 1)))?;
                segments.push((role, Vec::new()));
            } else if let Some((_, lines)) = segments.last_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() {
                return Err(syntax(format!(
                    "line {}: text before the first ---role: divider",
                    lineno + 1
                )));
            }
        }
        if segments.is_empty() {
            return Err(syntax("no segments".to_string()));
        }
        let segments = segments
            .into_iter()
            .map(|(role, lines)| (role, lines.join("\n").trim_matches('\n').to_string()));
        Self::from_segments(name, segments)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RenderedSegment {
    pub role: Role,
    pub text: String,
}

/// A fully rendered prompt ready for a provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub template_name: String,
    pub segments: Vec<RenderedSegment>,
    pub fingerprint: String,
}

impl PromptPayload {
    pub fn new(template_name: impl Into<String>, segments: Vec<RenderedSegment>) -> Self {
        let fingerprint = fingerprint(&segments);
        Self {
            template_name: template_name.into(),
            segments,
            fingerprint,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(|s| s.text.is_empty())
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.segments.iter().any(|s| s.text.contains(needle))
    }

    pub fn segments_with_role(&self, role: Role) -> impl Iterator<Item = &RenderedSegment> {
        self.segments.iter().filter(move |s| s.role == role)
    }

    /// All segment texts joined, for diagnostics and substring matching.
    pub fn full_text(&self) -> String {
        self.segments
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// SHA-256 over `(role, length, bytes)` of each segment, hex encoded.
fn fingerprint(segments: &[RenderedSegment]) -> String {
    let mut hasher = Sha256::new();
    for segment in segments {
        hasher.update(segment.role.as_str().as_bytes());
        hasher.update([0u8]);
        hasher.update((segment.text.len() as u64).to_le_bytes());
        hasher.update(segment.text.as_bytes());
    }
    hex::encode(hasher.finalize())
}

pub fn render(
    template: &PromptTemplate,
    bindings: &HashMap<&str, String>,
) -> Result<PromptPayload, TemplateError> {
    let mut segments = Vec::with_capacity(template.segments.len());
    for segment in &template.segments {
        let mut text = String::with_capacity(segment.body.len());
        for piece in &segment.pieces {
            match piece {
                Piece::Literal(s) => text.push_str(s),
                Piece::Slot(name) => {
                    if !template.required_placeholders.contains(name) {
                        return Err(TemplateError::UnknownPlaceholder(name.clone()));
                    }
                    let value = bindings
                        .get(name.as_str())
                        .ok_or_else(|| TemplateError::MissingBinding(name.clone()))?;
                    text.push_str(value);
                }
            }
        }
        segments.push(RenderedSegment {
            role: segment.role,
            text,
        });
    }
    for name in &template.required_placeholders {
        if !bindings.contains_key(name.as_str()) {
            return Err(TemplateError::MissingBinding(name.clone()));
        }
    }
    Ok(PromptPayload::new(template.name.clone(), segments))
}

/// Names of every template the service loads.
pub mod names {
    pub const FEEDBACK: &str = "feedback";
    pub const SIMULATED_STUDENT: &str = "simulated_student";
    pub const FAIRNESS_EVALUATION: &str = "fairness_evaluation";
    pub const QUESTION_REWRITE: &str = "question_rewrite";
    pub const CRITERIA_GENERATION: &str = "criteria_generation";
    pub const CRITERIA_BLOCK: &str = "fragment_criteria";
    pub const GENERIC_RUBRIC: &str = "fragment_generic_rubric";
    pub const FORMAT_HOLISTIC: &str = "fragment_format_holistic";
    pub const FORMAT_SPAN_ONLY: &str = "fragment_format_span_only";
    pub const FORMAT_BOTH: &str = "fragment_format_both";
}

const BUILTIN: &[(&str, &str)] = &[
    (names::FEEDBACK, include_str!("../templates/feedback.prompt")),
    (
        names::SIMULATED_STUDENT,
        include_str!("../templates/simulated_student.prompt"),
    ),
    (
        names::FAIRNESS_EVALUATION,
        include_str!("../templates/fairness_evaluation.prompt"),
    ),
    (
        names::QUESTION_REWRITE,
        include_str!("../templates/question_rewrite.prompt"),
    ),
    (
        names::CRITERIA_GENERATION,
        include_str!("../templates/criteria_generation.prompt"),
    ),
    (
        names::CRITERIA_BLOCK,
        include_str!("../templates/fragment_criteria.prompt"),
    ),
    (
        names::GENERIC_RUBRIC,
        include_str!("../templates/fragment_generic_rubric.prompt"),
    ),
    (
        names::FORMAT_HOLISTIC,
        include_str!("../templates/fragment_format_holistic.prompt"),
    ),
    (
        names::FORMAT_SPAN_ONLY,
        include_str!("../templates/fragment_format_span_only.prompt"),
    ),
    (
        names::FORMAT_BOTH,
        include_str!("../templates/fragment_format_both.prompt"),
    ),
];

/// The full collection of templates used by the builders below.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: HashMap<String, PromptTemplate>,
}

impl TemplateSet {
    /// Templates shipped with the crate.
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, source)| {
                let t = PromptTemplate::parse(*name, source)
                    .unwrap_or_else(|e| panic!("built-in template {name} is malformed: {e}"));
                (name.to_string(), t)
            })
            .collect();
        Self { templates }
    }

    /// Built-in templates, with any `<dir>/<name>.prompt` file replacing the
    /// template of the same name.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.prompt"));
            match std::fs::read_to_string(&path) {
                Ok(source) => {
                    let template = PromptTemplate::parse(*name, &source)?;
                    set.check_contract(&template)?;
                    set.templates.insert(name.to_string(), template);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => {
                    return Err(TemplateError::Io {
                        path,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(set)
    }

    /// An override may use only placeholders the builtin declares, and
    /// criteria-bearing placeholders only in evaluator segments.
    fn check_contract(&self, candidate: &PromptTemplate) -> Result<(), TemplateError> {
        let builtin = self.get(&candidate.name)?;
        if let Some(extra) = candidate
            .required_placeholders
            .difference(&builtin.required_placeholders)
            .next()
        {
            return Err(TemplateError::UnknownPlaceholder(extra.clone()));
        }
        for segment in candidate.segments.iter().filter(|s| s.role != Role::Evaluator) {
            if let Some(slot) = segment.placeholders().find(|p| EVALUATOR_ONLY.contains(p)) {
                return Err(TemplateError::RoleViolation {
                    template: candidate.name.clone(),
                    placeholder: slot.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(name)
            .ok_or_else(|| TemplateError::NotFound(name.to_string()))
    }

    fn render_named(
        &self,
        name: &str,
        bindings: &HashMap<&str, String>,
    ) -> Result<PromptPayload, TemplateError> {
        render(self.get(name)?, bindings)
    }

    /// Renders a single-segment fragment to plain text.
    fn fragment(&self, name: &str, bindings: &HashMap<&str, String>) -> Result<String, TemplateError> {
        Ok(self.render_named(name, bindings)?.full_text())
    }

    /// Prompt pairing a student response with the question and its criteria.
    /// Criteria land only in evaluator segments.
    pub fn build_feedback_prompt(
        &self,
        q: &Question,
        r: &StudentResponse,
    ) -> Result<PromptPayload, TemplateError> {
        debug_assert_eq!(q.id, r.question_id);
        let guidance = if q.criteria.is_empty() {
            self.fragment(names::GENERIC_RUBRIC, &HashMap::new())?
        } else {
            self.fragment(
                names::CRITERIA_BLOCK,
                &HashMap::from([("criteria", numbered(&q.criteria))]),
            )?
        };
        let format = self.fragment(
            match q.feedback_mode {
                FeedbackMode::Holistic => names::FORMAT_HOLISTIC,
                FeedbackMode::SpanOnly => names::FORMAT_SPAN_ONLY,
                FeedbackMode::Both => names::FORMAT_BOTH,
            },
            &HashMap::new(),
        )?;
        self.render_named(
            names::FEEDBACK,
            &HashMap::from([
                ("question", q.text.clone()),
                ("response", r.text.clone()),
                ("evaluation_guidance", guidance),
                ("output_format", format),
            ]),
        )
    }

    /// Prompt asking a model to answer the question blind to its criteria.
    pub fn build_simulated_student_prompt(&self, q: &Question) -> Result<PromptPayload, TemplateError> {
        self.render_named(
            names::SIMULATED_STUDENT,
            &HashMap::from([("question", q.text.clone())]),
        )
    }

    pub fn build_fairness_evaluation_prompt(
        &self,
        q: &Question,
        simulated_answer: &str,
    ) -> Result<PromptPayload, TemplateError> {
        self.render_named(
            names::FAIRNESS_EVALUATION,
            &HashMap::from([
                ("question", q.text.clone()),
                ("criteria", numbered(&q.criteria)),
                ("simulated_answer", simulated_answer.to_string()),
            ]),
        )
    }

    pub fn build_question_rewrite_prompt(
        &self,
        q: &Question,
        verdict: &FairnessVerdict,
    ) -> Result<PromptPayload, TemplateError> {
        self.render_named(
            names::QUESTION_REWRITE,
            &HashMap::from([
                ("question", q.text.clone()),
                ("criteria", numbered(&q.criteria)),
                ("rationale", verdict.rationale.clone()),
            ]),
        )
    }

    pub fn build_criteria_generation_prompt(
        &self,
        q: &Question,
    ) -> Result<PromptPayload, TemplateError> {
        self.render_named(
            names::CRITERIA_GENERATION,
            &HashMap::from([("question", q.text.clone())]),
        )
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Placeholders whose bindings carry criteria text.
const EVALUATOR_ONLY: [&str; 2] = ["criteria", "evaluation_guidance"];

fn numbered(criteria: &[Criterion]) -> String {
    criteria
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {}", i + 1, c.as_str()))
        .collect::<Vec<_>>()
        .join("\n")
}
