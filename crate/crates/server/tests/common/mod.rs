//! Fixtures shared by the API and acceptance tests.
#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use freetext_core::gateway::{Matcher, ScriptEntry, ScriptTable, ScriptedProvider};
use freetext_core::prompt::names;
use freetext_core::{MemoryStore, QuestionStore};
use freetext_server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const TOKEN: &str = "instructor-secret-7f3a";

pub const ROSETTA: &str = "What is the Rosetta Stone?";
pub const ROSETTA_CRITERION: &str = "Mention why the Ptolemaic dynasty created the Rosetta Stone";
pub const GOOD_REWRITE: &str = "Explain what the Rosetta Stone is and the context of its creation";
pub const LEAKING_REWRITE: &str = "Explain why the Ptolemaic dynasty created the Rosetta Stone.";

pub const DNA: &str = "Explain how the two strands of a DNA molecule are held together.";
pub const DNA_CRITERION: &str = "Make sure the student mentions DNA base pairs in their answer.";

pub const ROSETTA_ANSWER: &str =
    "The Rosetta Stone is a granodiorite stele found in 1799. It carries one decree in three scripts.";
pub const ROSETTA_FEEDBACK: &str = "HOLISTIC:
You identify the stone and its three scripts, but you never say why it was made.
QUOTES:
- \"found in 1799\" => Who found it matters less than why it was carved.
- \"one decree in three scripts\" => Good; say whose decree it was.
";

pub const SIMULATED: &str = "It is a stone slab carved with the same text in three scripts.";
pub const UNFAIR: &str =
    "VERDICT: unfair\nRATIONALE: The question never asks about the circumstances of the stone's creation.";
pub const FAIR: &str = "VERDICT: fair\nRATIONALE: The answer had every chance to cover the criteria.";

pub fn template(name: &str) -> Matcher {
    Matcher::Template(name.to_string())
}

pub fn shown_question(text: &str) -> Matcher {
    Matcher::Contains(format!("Question shown to the student:\n{text}\n"))
}

/// Feedback replies for any question, plus the three refinement scenarios
/// keyed by question text.
pub fn standard_script() -> ScriptTable {
    ScriptTable::lenient(vec![
        ScriptEntry::new(template(names::FEEDBACK), ROSETTA_FEEDBACK),
        ScriptEntry::new(template(names::SIMULATED_STUDENT), SIMULATED),
        ScriptEntry::new(shown_question(GOOD_REWRITE), FAIR),
        ScriptEntry::new(shown_question(DNA), FAIR),
        ScriptEntry::new(template(names::FAIRNESS_EVALUATION), UNFAIR),
        ScriptEntry::new(template(names::QUESTION_REWRITE), format!("REWRITE:\n{GOOD_REWRITE}")),
        ScriptEntry::new(
            template(names::CRITERIA_GENERATION),
            "1. Names the four bases.\n2. States that A pairs with T and G with C.\n3. Mentions hydrogen bonding.\n",
        ),
    ])
}

pub fn improved_script() -> ScriptTable {
    ScriptTable::strict(vec![
        ScriptEntry::new(template(names::SIMULATED_STUDENT), SIMULATED),
        ScriptEntry::new(shown_question(ROSETTA), UNFAIR),
        ScriptEntry::new(shown_question(GOOD_REWRITE), FAIR),
        ScriptEntry::new(template(names::QUESTION_REWRITE), format!("REWRITE:\n{GOOD_REWRITE}")),
    ])
}

pub fn fair_script() -> ScriptTable {
    ScriptTable::strict(vec![
        ScriptEntry::new(template(names::SIMULATED_STUDENT), SIMULATED),
        ScriptEntry::new(template(names::FAIRNESS_EVALUATION), FAIR),
    ])
}

pub fn unresolved_script() -> ScriptTable {
    ScriptTable::lenient(vec![
        ScriptEntry::new(template(names::SIMULATED_STUDENT), SIMULATED),
        ScriptEntry::new(template(names::FAIRNESS_EVALUATION), UNFAIR),
        ScriptEntry::new(
            template(names::QUESTION_REWRITE),
            "REWRITE:\nDescribe the Rosetta Stone and where it was found.",
        )
        .times(1),
        ScriptEntry::new(
            template(names::QUESTION_REWRITE),
            "REWRITE:\nDescribe the Rosetta Stone, its scripts and where it was found.",
        ),
    ])
}

pub fn leaking_script() -> ScriptTable {
    ScriptTable::strict(vec![
        ScriptEntry::new(template(names::SIMULATED_STUDENT), SIMULATED),
        ScriptEntry::new(template(names::FAIRNESS_EVALUATION), UNFAIR),
        ScriptEntry::new(template(names::QUESTION_REWRITE), format!("REWRITE:\n{LEAKING_REWRITE}")),
    ])
}

pub struct TestApp {
    pub router: Router,
    pub state: AppState,
    pub provider: Arc<ScriptedProvider>,
}

impl TestApp {
    pub fn new(table: ScriptTable) -> Self {
        Self::with_store(Arc::new(MemoryStore::default()), ScriptedProvider::new(table))
    }

    pub fn with_store(store: Arc<dyn QuestionStore>, provider: ScriptedProvider) -> Self {
        let provider = Arc::new(provider);
        let state = AppState::new(store, provider.clone(), TOKEN);
        Self::from_state(state, provider)
    }

    pub fn from_state(state: AppState, provider: Arc<ScriptedProvider>) -> Self {
        Self {
            router: router(state.clone()),
            state,
            provider,
        }
    }

    pub async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(token) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {token}"));
        }
        let req = match body {
            Some(body) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(serde_json::to_vec(&body).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        self.raw(req).await
    }

    pub async fn raw(&self, req: Request<Body>) -> Reply {
        let response = self.router.clone().oneshot(req).await.unwrap();
        let status = response.status();
        let headers = response.headers().clone();
        let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
        let json = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        Reply {
            status,
            headers,
            bytes,
            json,
        }
    }

    pub async fn create_question(&self, text: &str, criteria: &[&str], mode: &str) -> String {
        let reply = self
            .call(
                Method::POST,
                "/questions",
                Some(TOKEN),
                Some(json!({"text": text, "criteria": criteria, "feedback_mode": mode})),
            )
            .await;
        assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.text());
        reply.json["question_id"].as_str().unwrap().to_string()
    }
}

#[derive(Debug)]
pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub bytes: Vec<u8>,
    pub json: Value,
}

impl Reply {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }

    pub fn error(&self) -> &str {
        self.json["error"].as_str().unwrap_or("")
    }
}

/// Half-open slice of `text` by unicode scalar offsets.
pub fn scalar_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end - start).collect()
}

/// Bounds and quote checks every returned span must satisfy.
pub fn assert_spans_valid(feedback: &Value, response: &str) {
    let len = response.chars().count();
    for span in feedback["spans"].as_array().unwrap() {
        let start = span["start"].as_u64().unwrap() as usize;
        let end = span["end"].as_u64().unwrap() as usize;
        assert!(start < end && end <= len, "span [{start},{end}) outside 0..{len}");
        assert!(!span["comment"].as_str().unwrap().trim().is_empty());
    }
}
