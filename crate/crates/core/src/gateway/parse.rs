//! Parsers for the labeled-block reply formats requested by the templates.
//!
//! A block starts at a line whose first word is a known label (`HOLISTIC`,
//! `QUOTES`, `VERDICT`, `RATIONALE`, `REWRITE`), optionally decorated with
//! markdown `#`/`*` and followed by `:`. Labels match case-insensitively.
//! Code-fence lines are ignored.

use thiserror::Error;

use crate::domain::{Criterion, Feedback, FeedbackMode, Limits, SpanAnnotation, UnlocatedNote};

use super::{Completion, FairnessVerdict};

/// Most criteria accepted from one generation reply.
pub const MAX_GENERATED_CRITERIA: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable completion: {0}")]
pub struct ParseError(pub String);

impl ParseError {
    pub fn name(&self) -> &'static str {
        "UnparseableCompletion"
    }
}

fn unparseable(detail: impl Into<String>) -> ParseError {
    ParseError(detail.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarRange {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("quote not found in response")]
pub struct NotFound;

/// First exact occurrence of `quote` in `haystack`, as scalar offsets.
/// An empty quote is never found.
pub fn locate_span(haystack: &str, quote: &str) -> Result<ScalarRange, NotFound> {
    if quote.is_empty() {
        return Err(NotFound);
    }
    let byte_start = haystack.find(quote).ok_or(NotFound)?;
    let start = haystack[..byte_start].chars().count();
    Ok(ScalarRange {
        start,
        end: start + quote.chars().count(),
    })
}

struct Block<'a> {
    label: &'static str,
    lines: Vec<&'a str>,
}

impl Block<'_> {
    fn text(&self) -> String {
        self.lines.join("\n").trim().to_string()
    }
}

fn match_label<'a>(line: &'a str, labels: &[&'static str]) -> Option<(&'static str, &'a str)> {
    let t = line.trim().trim_start_matches(['#', '*', ' ', '\t']);
    for label in labels {
        let Some(head) = t.get(..label.len()) else {
            continue;
        };
        if !head.eq_ignore_ascii_case(label) {
            continue;
        }
        let rest = t[label.len()..].trim_start_matches('*');
        if rest.trim().is_empty() {
            return Some((label, ""));
        }
        if let Some(inline) = rest.strip_prefix(':') {
            return Some((label, inline.trim_start_matches('*').trim()));
        }
    }
    None
}

/// Splits `text` into labeled blocks. Text before the first label is dropped.
fn blocks<'a>(text: &'a str, labels: &[&'static str]) -> Vec<Block<'a>> {
    let mut out: Vec<Block<'a>> = Vec::new();
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            continue;
        }
        if let Some((label, inline)) = match_label(line, labels) {
            let mut lines = Vec::new();
            if !inline.is_empty() {
                lines.push(inline);
            }
            out.push(Block { label, lines });
        } else if let Some(block) = out.last_mut() {
            block.lines.push(line);
        }
    }
    out
}

fn first_block<'a, 'b>(blocks: &'b [Block<'a>], label: &str) -> Option<&'b Block<'a>> {
    blocks.iter().find(|b| b.label == label)
}

const OPEN_QUOTES: [char; 2] = ['"', '\u{201C}'];
const CLOSE_QUOTES: [char; 2] = ['"', '\u{201D}'];
const SEPARATORS: [&str; 4] = ["=>", "->", ":", "\u{2014}"];

/// Every way to split `"quote" => comment` on a closing quote that is
/// followed by a separator, in left-to-right order.
fn quote_splits(entry: &str) -> Vec<(&str, &str)> {
    let Some(body) = entry.strip_prefix(OPEN_QUOTES) else {
        return Vec::new();
    };
    let mut splits = Vec::new();
    for (i, c) in body.char_indices() {
        if !CLOSE_QUOTES.contains(&c) {
            continue;
        }
        let after = body[i + c.len_utf8()..].trim_start();
        if let Some(sep) = SEPARATORS.iter().find(|s| after.starts_with(**s)) {
            splits.push((&body[..i], after[sep.len()..].trim()));
        } else if after.is_empty() {
            splits.push((&body[..i], ""));
        }
    }
    splits
}

enum Entry {
    Span(SpanAnnotation),
    Note(UnlocatedNote),
}

fn parse_quote_entry(entry: &str, response_text: &str) -> Entry {
    let splits = quote_splits(entry);
    // prefer the longest reading whose quote actually occurs in the response
    let located = splits
        .iter()
        .rev()
        .find_map(|(q, c)| locate_span(response_text, q).ok().map(|r| (r, *q, *c)));
    match located {
        Some((range, _, comment)) if !comment.is_empty() => Entry::Span(SpanAnnotation {
            start: range.start,
            end: range.end,
            comment: comment.to_string(),
        }),
        Some((_, quote, comment)) => Entry::Note(UnlocatedNote {
            quote: quote.to_string(),
            comment: comment.to_string(),
        }),
        None => match splits.first() {
            Some((quote, comment)) => Entry::Note(UnlocatedNote {
                quote: quote.to_string(),
                comment: comment.to_string(),
            }),
            None => Entry::Note(UnlocatedNote {
                quote: String::new(),
                comment: entry.to_string(),
            }),
        },
    }
}

/// Joins bullet lines with their continuation lines.
fn bullet_entries(lines: &[&str]) -> Vec<String> {
    let mut entries: Vec<String> = Vec::new();
    for line in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix(['-', '*', '\u{2022}']) {
            entries.push(rest.trim().to_string());
        } else if let Some(last) = entries.last_mut() {
            last.push(' ');
            last.push_str(t);
        } else {
            entries.push(t.to_string());
        }
    }
    entries
}

/// Extracts holistic text and quoted remarks according to `mode`.
///
/// Quotes are located in `response_text` by exact first occurrence. Remarks
/// whose quote cannot be found, or that carry no comment, are kept in
/// `unlocated_notes`.
pub fn parse_feedback(
    raw: &Completion,
    mode: FeedbackMode,
    response_text: &str,
) -> Result<Feedback, ParseError> {
    let blocks = blocks(&raw.text, &["HOLISTIC", "QUOTES"]);
    let holistic = first_block(&blocks, "HOLISTIC")
        .map(Block::text)
        .filter(|t| !t.is_empty());
    let quotes = first_block(&blocks, "QUOTES");

    if mode.wants_holistic() && holistic.is_none() {
        return Err(unparseable("missing HOLISTIC block"));
    }
    if mode == FeedbackMode::SpanOnly && quotes.is_none() {
        return Err(unparseable("missing QUOTES block"));
    }

    let mut spans = Vec::new();
    let mut unlocated_notes = Vec::new();
    if mode.wants_spans() {
        for entry in quotes.map(|b| bullet_entries(&b.lines)).unwrap_or_default() {
            match parse_quote_entry(&entry, response_text) {
                Entry::Span(span) => spans.push(span),
                Entry::Note(note) => unlocated_notes.push(note),
            }
        }
    }

    Ok(Feedback {
        holistic: if mode.wants_holistic() { holistic } else { None },
        spans,
        unlocated_notes,
        provider_id: raw.provider_id.clone(),
        latency_ms: raw.latency_ms,
    })
}

pub fn parse_verdict(raw: &Completion) -> Result<FairnessVerdict, ParseError> {
    let blocks = blocks(&raw.text, &["VERDICT", "RATIONALE"]);
    let verdict = first_block(&blocks, "VERDICT").ok_or_else(|| unparseable("missing VERDICT"))?;
    let mut lines = verdict.lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
    let head = lines.next().ok_or_else(|| unparseable("empty VERDICT"))?;
    let word_end = head
        .find(|c: char| !c.is_alphabetic())
        .unwrap_or(head.len());
    let fair = match head[..word_end].to_ascii_lowercase().as_str() {
        "fair" => true,
        "unfair" => false,
        other => return Err(unparseable(format!("verdict {other:?} is neither fair nor unfair"))),
    };
    let mut rationale = first_block(&blocks, "RATIONALE")
        .map(Block::text)
        .unwrap_or_default();
    if rationale.is_empty() {
        let trailing = head[word_end..].trim_start_matches(['*', '.', ',', ';', ':', '-', ' ']);
        rationale = std::iter::once(trailing)
            .chain(lines)
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join("\n");
    }
    if !fair && rationale.trim().is_empty() {
        return Err(unparseable("unfair verdict without rationale"));
    }
    Ok(FairnessVerdict { fair, rationale })
}

/// Strips a leading `12.` or `12)` enumeration marker.
fn strip_enumeration(line: &str) -> Option<&str> {
    let t = line.trim();
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let rest = t[digits..].strip_prefix(['.', ')'])?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let item = rest.trim();
    (!item.is_empty()).then_some(item)
}

/// Reads up to five numbered lines as criteria, in order.
pub fn parse_criteria_list(raw: &Completion, limits: &Limits) -> Result<Vec<Criterion>, ParseError> {
    let items: Vec<&str> = raw.text.lines().filter_map(strip_enumeration).collect();
    if items.is_empty() {
        return Err(unparseable("no numbered criteria"));
    }
    if items.len() > MAX_GENERATED_CRITERIA {
        tracing::debug!(count = items.len(), "keeping the first five generated criteria");
    }
    items
        .into_iter()
        .take(MAX_GENERATED_CRITERIA)
        .map(|item| Criterion::new(item, limits).map_err(|e| unparseable(e.to_string())))
        .collect()
}

/// Rewritten question text from a `REWRITE:` block, or the whole reply when
/// the model omitted the label.
pub fn parse_rewrite(raw: &Completion) -> Result<String, ParseError> {
    let blocks = blocks(&raw.text, &["REWRITE"]);
    let text = match first_block(&blocks, "REWRITE") {
        Some(b) => b.text(),
        None => raw.text.trim().to_string(),
    };
    let text = strip_wrapping_quotes(&text).trim();
    if text.is_empty() {
        return Err(unparseable("empty rewrite"));
    }
    Ok(text.to_string())
}

fn strip_wrapping_quotes(s: &str) -> &str {
    s.strip_prefix(OPEN_QUOTES)
        .and_then(|inner| inner.strip_suffix(CLOSE_QUOTES))
        .unwrap_or(s)
}

pub fn parse_simulated_answer(raw: &Completion) -> Result<String, ParseError> {
    let text = raw.text.trim();
    if text.is_empty() {
        return Err(unparseable("simulated student gave an empty answer"));
    }
    Ok(text.to_string())
}
