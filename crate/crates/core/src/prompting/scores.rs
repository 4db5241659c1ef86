//! Extraction of probability score blocks from free-form model replies.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::PromptError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    /// Legal answer → probability, in legal-answer order.
    pub scores: Vec<(String, f64)>,
    pub chosen: String,
    pub raw_text: String,
}

impl ScoredResponse {
    pub fn score_of(&self, answer: &str) -> f64 {
        self.scores.iter().find(|(k, _)| k == answer).map_or(0.0, |(_, v)| *v)
    }

    pub fn score_map(&self) -> BTreeMap<String, f64> {
        self.scores.iter().cloned().collect()
    }
}

pub fn normalize_key(key: &str) -> String {
    let k = key.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '`').trim().to_lowercase();
    let k = k.strip_prefix("node").map(|s| s.trim_start_matches([' ', '_', '#', '-']).to_string()).unwrap_or(k);
    k.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == ',' || c == ';');
    let (t, scale) = match t.strip_suffix('%') {
        Some(rest) => (rest.trim(), 0.01),
        None => (t, 1.0),
    };
    let end = t
        .char_indices()
        .take_while(|(i, c)| {
            c.is_ascii_digit() || *c == '.' || (*i == 0 && (*c == '-' || *c == '+')) || *c == 'e' || *c == 'E'
        })
        .map(|(i, c)| i + c.len_utf8())
        .last()?;
    t[..end].parse::<f64>().ok().map(|v| v * scale)
}

fn pairs_from_json(text: &str) -> Option<Vec<(String, f64)>> {
    let value: serde_json::Value = serde_json::from_str(text.trim()).ok()?;
    let obj = value.as_object()?;
    let pairs: Vec<(String, f64)> = obj
        .iter()
        .filter_map(|(k, v)| {
            let n = match v {
                serde_json::Value::Number(n) => n.as_f64(),
                serde_json::Value::String(s) => parse_number(s),
                _ => None,
            }?;
            Some((k.clone(), n))
        })
        .collect();
    (!pairs.is_empty()).then_some(pairs)
}

/// Bodies of fenced code blocks.
pub(crate) fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let Some(close) = after[body_start..].find("```") else { break };
        out.push(&after[body_start..body_start + close]);
        rest = &after[body_start + close + 3..];
    }
    out
}

/// Balanced `{...}` spans, outermost first.
pub(crate) fn brace_spans(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut depth = 0usize;
            let mut end = None;
            for (j, &b) in bytes.iter().enumerate().skip(i) {
                match b {
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(j);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            match end {
                Some(j) => {
                    out.push(&text[i..=j]);
                    i = j + 1;
                }
                None => break,
            }
        } else {
            i += 1;
        }
    }
    out
}

fn pairs_from_lines(text: &str, legal: &[String]) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for line in text.lines() {
        for piece in line.split([',', '{', '}']) {
            let Some(sep) = piece.find([':', '=']) else { continue };
            let (k, v) = (&piece[..sep], &piece[sep + 1..]);
            let key = normalize_key(k.trim_start_matches(['-', '*', ' ']));
            if !legal.iter().any(|l| normalize_key(l) == key) {
                continue;
            }
            if let Some(n) = parse_number(v) {
                out.push((key, n));
            }
        }
    }
    out
}

fn extract_pairs(raw: &str, legal: &[String]) -> Option<Vec<(String, f64)>> {
    fenced_blocks(raw)
        .into_iter()
        .find_map(pairs_from_json)
        .or_else(|| brace_spans(raw).into_iter().find_map(pairs_from_json))
        .or_else(|| {
            let p = pairs_from_lines(raw, legal);
            (!p.is_empty()).then_some(p)
        })
}

/// Parses a reply into probabilities over `legal`, whose order is the
/// tie-break order.
pub fn parse_scored_response(raw: &str, legal: &[String]) -> Result<ScoredResponse, PromptError> {
    if legal.is_empty() {
        return Err(PromptError::NoLegalAnswers);
    }
    let pairs = extract_pairs(raw, legal).ok_or(PromptError::Unparseable)?;
    let mut scores: Vec<(String, f64)> = legal.iter().map(|l| (l.clone(), 0.0)).collect();
    for (k, v) in pairs {
        let key = normalize_key(&k);
        match scores.iter_mut().find(|(l, _)| normalize_key(l) == key) {
            Some(slot) => {
                let v = if v.is_finite() && v > 0.0 { v } else { 0.0 };
                slot.1 = v;
            }
            None => log::warn!("dropping unknown answer key {k:?}"),
        }
    }
    let total: f64 = scores.iter().map(|s| s.1).sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(PromptError::AllZero);
    }
    for s in &mut scores {
        s.1 /= total;
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.1 > scores[best].1 {
            best = i;
        }
    }
    let chosen = scores[best].0.clone();
    Ok(ScoredResponse { scores, chosen, raw_text: raw.to_string() })
}

/// Fenced JSON score block in the given key order.
pub fn render_score_block(scores: &[(String, f64)]) -> String {
    let body: Vec<String> = scores
        .iter()
        .map(|(k, v)| format!("{}: {}", serde_json::Value::String(k.clone()), serde_json::Value::from(*v)))
        .collect();
    format!("```json\n{{{}}}\n```", body.join(", "))
}
