//! Prompt builder snapshots and the criteria-asymmetry properties.
//!
//! Snapshots live in `tests/golden/`. Regenerate with `UPDATE_GOLDEN=1` and
//! review the diff before committing.

use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use freetext_core::domain::{Criterion, FeedbackMode, Limits, Question, StudentResponse};
use freetext_core::gateway::FairnessVerdict;
use freetext_core::prompt::{PromptPayload, RenderedSegment, Role, TemplateSet};
use freetext_core::student_view;
use proptest::prelude::*;

fn fixed_question(text: &str, criteria: &[&str], mode: FeedbackMode) -> Question {
    Question {
        id: "07b2c3ef-0f97-46bc-a11e-5d1c2a3b4c5d".parse().unwrap(),
        text: text.into(),
        criteria: criteria
            .iter()
            .map(|c| Criterion::new(*c, &Limits::default()).unwrap())
            .collect(),
        feedback_mode: mode,
        assignment_id: None,
        version: 1,
        created_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
    }
}

fn dna() -> Question {
    fixed_question(
        "Explain how the two strands of a DNA molecule are held together.",
        &["Make sure the student mentions DNA base pairs in their answer."],
        FeedbackMode::Both,
    )
}

fn rosetta() -> Question {
    fixed_question(
        "What is the Rosetta Stone?",
        &["Mention why the Ptolemaic dynasty created the Rosetta Stone"],
        FeedbackMode::Both,
    )
}

fn response(q: &Question, text: &str) -> StudentResponse {
    StudentResponse {
        question_id: q.id,
        text: text.into(),
        received_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 1).unwrap(),
    }
}

fn render_snapshot(p: &PromptPayload) -> String {
    let mut out = format!("template: {}\nfingerprint: {}\n", p.template_name, p.fingerprint);
    for s in &p.segments {
        out.push_str(&format!("\n===== {} =====\n{}\n", s.role, s.text));
    }
    out
}

fn assert_golden(name: &str, payload: &PromptPayload) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.txt"));
    let actual = render_snapshot(payload);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}; run with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "payload differs from {}", path.display());
}

fn texts_with_role(p: &PromptPayload, role: Role) -> String {
    p.segments_with_role(role)
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn feedback_prompt_keeps_criteria_in_evaluator_segments() {
    let templates = TemplateSet::builtin();
    let q = dna();
    let r = response(&q, "The strands are held together by hydrogen bonds.");
    let p = templates.build_feedback_prompt(&q, &r).unwrap();
    let criterion = q.criteria[0].as_str();
    assert!(texts_with_role(&p, Role::Evaluator).contains(criterion));
    assert!(!texts_with_role(&p, Role::Student).contains(criterion));
    assert!(!texts_with_role(&p, Role::System).contains(criterion));
    assert!(p.contains(&q.text));
    assert!(p.contains(&r.text));
    assert!(p.contains("HOLISTIC:"));
    assert!(p.contains("QUOTES:"));
    assert!(p.contains("copied character for character"));
    assert_golden("feedback_both_with_criteria", &p);
}

#[test]
fn feedback_prompt_format_follows_mode() {
    let templates = TemplateSet::builtin();
    for (mode, holistic, quotes) in [
        (FeedbackMode::Holistic, true, false),
        (FeedbackMode::SpanOnly, false, true),
        (FeedbackMode::Both, true, true),
    ] {
        let q = fixed_question("Q?", &["criterion text"], mode);
        let p = templates.build_feedback_prompt(&q, &response(&q, "answer")).unwrap();
        assert_eq!(p.contains("HOLISTIC:"), holistic, "{mode:?}");
        assert_eq!(p.contains("QUOTES:"), quotes, "{mode:?}");
    }
}

#[test]
fn feedback_prompt_without_criteria_uses_generic_rubric() {
    let templates = TemplateSet::builtin();
    let q = fixed_question("Explain DNA base pairing.", &[], FeedbackMode::Holistic);
    let p = templates
        .build_feedback_prompt(&q, &response(&q, "A pairs with T and G with C."))
        .unwrap();
    assert!(p.contains("has not set grading criteria"));
    assert!(!p.contains("has set the following grading criteria"));
    assert_golden("feedback_holistic_generic_rubric", &p);
}

#[test]
fn feedback_prompt_is_deterministic() {
    let templates = TemplateSet::builtin();
    let q = dna();
    let r = response(&q, "hydrogen bonds");
    let a = templates.build_feedback_prompt(&q, &r).unwrap();
    let b = TemplateSet::builtin().build_feedback_prompt(&q.clone(), &r.clone()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fingerprint, b.fingerprint);
}

#[test]
fn simulated_student_prompt_is_blind_to_criteria() {
    let templates = TemplateSet::builtin();
    let q = rosetta();
    let p = templates.build_simulated_student_prompt(&q).unwrap();
    assert!(p.contains("What is the Rosetta Stone?"));
    assert!(!p.contains("Ptolemaic"));
    assert_golden("simulated_student_rosetta", &p);

    let bare = fixed_question(&q.text, &[], q.feedback_mode);
    assert_eq!(templates.build_simulated_student_prompt(&bare).unwrap(), p);
}

#[test]
fn fairness_prompt_contains_all_parts() {
    let templates = TemplateSet::builtin();
    let q = rosetta();
    let answer = "It is a stone slab with the same text in three scripts.";
    let p = templates.build_fairness_evaluation_prompt(&q, answer).unwrap();
    assert!(p.contains(&q.text));
    assert!(p.contains(q.criteria[0].as_str()));
    assert!(p.contains(answer));
    assert!(p.contains("VERDICT: fair"));
    assert!(p.contains("VERDICT: unfair"));
    assert_eq!(p, templates.build_fairness_evaluation_prompt(&q, answer).unwrap());
    assert_golden("fairness_evaluation_rosetta", &p);
}

#[test]
fn rewrite_prompt_carries_constraint_and_rationale() {
    let templates = TemplateSet::builtin();
    let q = rosetta();
    let verdict = FairnessVerdict {
        fair: false,
        rationale: "The question never asks about the context of the stone's creation.".into(),
    };
    let p = templates.build_question_rewrite_prompt(&q, &verdict).unwrap();
    assert!(p.contains(&verdict.rationale));
    assert!(p.contains("must not add information the student did not already have"));
    assert!(p.contains("REWRITE:"));
    assert_eq!(p, templates.build_question_rewrite_prompt(&q, &verdict).unwrap());
    assert_golden("question_rewrite_rosetta", &p);
}

#[test]
fn criteria_generation_prompt_asks_for_numbered_list() {
    let templates = TemplateSet::builtin();
    let q = fixed_question("Explain DNA base pairing.", &[], FeedbackMode::Holistic);
    let p = templates.build_criteria_generation_prompt(&q).unwrap();
    assert!(p.contains("between 1 and 5"));
    assert!(p.contains("1. <criterion>"));
    assert_eq!(p, templates.build_criteria_generation_prompt(&q).unwrap());
    assert_golden("criteria_generation_dna", &p);
}

#[test]
fn fingerprint_is_stable_across_processes() {
    // expected value computed outside Rust: sha256 over role, NUL, u64-LE length, bytes
    let p = PromptPayload::new(
        "any",
        vec![
            RenderedSegment {
                role: Role::System,
                text: "Be brief.".into(),
            },
            RenderedSegment {
                role: Role::Student,
                text: "What is the Rosetta Stone?".into(),
            },
        ],
    );
    assert_eq!(
        p.fingerprint,
        "21c2a17cc48474560b7be18d1cdf2be31aa41cf1a79f75eabaeb5ed217df4d67"
    );
}

fn mode() -> impl Strategy<Value = FeedbackMode> {
    prop_oneof![
        Just(FeedbackMode::Holistic),
        Just(FeedbackMode::SpanOnly),
        Just(FeedbackMode::Both)
    ]
}

/// A question whose criteria are not already spelled out in its own text.
fn question_strategy() -> impl Strategy<Value = Question> {
    (
        "\\PC{1,200}",
        prop::collection::vec("\\PC{8,60}", 1..6),
        mode(),
    )
        .prop_filter("blank text", |(t, _, _)| !t.trim().is_empty())
        .prop_filter("criterion inside question text", |(t, cs, _)| {
            cs.iter().all(|c| !t.contains(c.as_str()))
        })
        .prop_filter("blank criterion", |(_, cs, _)| cs.iter().all(|c| !c.trim().is_empty()))
        .prop_map(|(text, criteria, mode)| {
            let refs: Vec<&str> = criteria.iter().map(String::as_str).collect();
            fixed_question(&text, &refs, mode)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn criteria_never_reach_student_material(q in question_strategy(), answer in "\\PC{1,100}") {
        let templates = TemplateSet::builtin();
        let sim = templates.build_simulated_student_prompt(&q).unwrap();
        let view = serde_json::to_string(&student_view(&q)).unwrap();
        let r = response(&q, &answer);
        let feedback = templates.build_feedback_prompt(&q, &r).unwrap();
        for c in &q.criteria {
            let c = c.as_str();
            let escaped = serde_json::to_string(c).unwrap();
            let escaped = &escaped[1..escaped.len() - 1];
            prop_assert!(!sim.contains(c));
            prop_assert!(!view.contains(c));
            prop_assert!(!view.contains(escaped));
            if !answer.contains(c) {
                for s in &feedback.segments {
                    if s.role != Role::Evaluator {
                        prop_assert!(!s.text.contains(c));
                    }
                }
            }
        }
    }

    #[test]
    fn every_builder_succeeds_on_valid_questions(q in question_strategy(), answer in "\\PC{1,100}") {
        let templates = TemplateSet::builtin();
        let r = response(&q, &answer);
        let verdict = FairnessVerdict { fair: false, rationale: "why".into() };
        prop_assert!(templates.build_feedback_prompt(&q, &r).is_ok());
        prop_assert!(templates.build_simulated_student_prompt(&q).is_ok());
        prop_assert!(templates.build_fairness_evaluation_prompt(&q, &answer).is_ok());
        prop_assert!(templates.build_question_rewrite_prompt(&q, &verdict).is_ok());
        prop_assert!(templates.build_criteria_generation_prompt(&q).is_ok());
        let a = templates.build_feedback_prompt(&q, &r).unwrap();
        let b = templates.build_feedback_prompt(&q, &r).unwrap();
        prop_assert_eq!(a.fingerprint, b.fingerprint);
    }
}
