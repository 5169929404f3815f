use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::manifest::ManifestRecord;

pub const DEFAULT_CHAR_BUDGET: usize = 120;

/// Body posted to the summarizer hook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRequest {
    pub title: Option<String>,
    pub description: Option<String>,
    pub attributes: Option<BTreeMap<String, String>>,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResponse {
    pub summary: String,
}

/// HTTP client for an external summarization service.
#[derive(Debug, Clone)]
pub struct Summarizer {
    endpoint: String,
    agent: ureq::Agent,
}

impl Summarizer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn summarize(&self, request: &SummaryRequest) -> Result<String> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| Error::Unavailable {
                attempts: 1,
                message: e.to_string(),
            })?;
        let parsed: SummaryResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Protocol(format!("summarizer response: {e}")))?;
        Ok(parsed.summary)
    }
}

/// Longest prefix of at most `budget` chars that ends on a word boundary,
/// with trailing whitespace removed. Falls back to a hard cut when the first
/// word alone exceeds the budget.
pub fn truncate_at_whitespace(text: &str, budget: usize) -> String {
    let text = text.trim();
    if text.chars().count() <= budget {
        return text.to_string();
    }
    let byte_at = |n: usize| text.char_indices().nth(n).map_or(text.len(), |(i, _)| i);
    let limit = byte_at(budget);
    let next_is_space = text[limit..].chars().next().is_some_and(char::is_whitespace);
    let cut = if next_is_space {
        limit
    } else {
        match text[..limit].rfind(char::is_whitespace) {
            Some(i) => i,
            None => limit,
        }
    };
    text[..cut].trim_end().to_string()
}

fn non_blank(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

fn joined_attributes(attrs: &BTreeMap<String, String>) -> Option<String> {
    let joined = attrs
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join("; ");
    (!joined.trim().is_empty()).then_some(joined)
}

/// Resolves the text used for a listing.
///
/// A title within budget is used verbatim. Otherwise the summarizer, when
/// configured, condenses all fields; if it is absent or fails, the first of
/// title, description and joined attributes is truncated to the budget.
pub fn derive_title(
    record: &ManifestRecord,
    summarizer: Option<&Summarizer>,
    char_budget: usize,
) -> Result<String> {
    let title = non_blank(&record.title);
    let description = non_blank(&record.description);
    let attributes = record.attributes.as_ref().and_then(joined_attributes);
    if title.is_none() && description.is_none() && attributes.is_none() {
        // An explicitly blank title with nothing else means "no text".
        if record.title.is_some() {
            return Ok(String::new());
        }
        return Err(Error::invalid(format!(
            "record {} has no title, description or attributes",
            record.id
        )));
    }
    if let Some(t) = title {
        if t.chars().count() <= char_budget {
            return Ok(t.to_string());
        }
    }
    if let Some(s) = summarizer {
        let request = SummaryRequest {
            title: title.map(str::to_string),
            description: description.map(str::to_string),
            attributes: record.attributes.clone(),
            budget: char_budget,
        };
        match s.summarize(&request) {
            Ok(summary) if !summary.trim().is_empty() => {
                return Ok(truncate_at_whitespace(&summary, char_budget));
            }
            Ok(_) => log::warn!("summarizer returned an empty summary for record {}", record.id),
            Err(e) => log::warn!("summarizer failed for record {}: {e}; truncating", record.id),
        }
    }
    let source = title
        .map(str::to_string)
        .or(description.map(str::to_string))
        .or(attributes)
        .expect("checked above");
    Ok(truncate_at_whitespace(&source, char_budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record() -> ManifestRecord {
        ManifestRecord {
            id: 1,
            image: "a.png".into(),
            title: None,
            description: None,
            attributes: None,
            truth_id: None,
        }
    }

    /// Greedy word packing over single-space separated words.
    fn greedy_oracle(text: &str, budget: usize) -> String {
        let mut out = String::new();
        for word in text.split(' ') {
            let candidate = if out.is_empty() {
                word.to_string()
            } else {
                format!("{out} {word}")
            };
            if candidate.chars().count() > budget {
                break;
            }
            out = candidate;
        }
        if out.is_empty() {
            text.chars().take(budget).collect()
        } else {
            out
        }
    }

    #[test]
    fn blank_title_alone_is_empty_text() {
        let r = ManifestRecord {
            title: Some("  ".into()),
            ..record()
        };
        assert_eq!(derive_title(&r, None, 120).unwrap(), "");
        let r = ManifestRecord {
            title: Some(String::new()),
            description: Some("Suede upper".into()),
            ..record()
        };
        assert_eq!(derive_title(&r, None, 120).unwrap(), "Suede upper");
        assert!(derive_title(&record(), None, 120).is_err());
    }

    #[test]
    fn short_title_verbatim() {
        let r = ManifestRecord {
            title: Some("Nike Dunk Low".into()),
            ..record()
        };
        assert_eq!(derive_title(&r, None, 120).unwrap(), "Nike Dunk Low");
    }

    #[test]
    fn long_description_truncates_to_budget() {
        // "abcdefghij" then repeated " abcdefghi": a word ends exactly at char 120.
        let mut description = String::from("abcdefghij");
        while description.len() < 900 {
            description.push_str(" abcdefghi");
        }
        let description: String = description.chars().take(900).collect();
        let r = ManifestRecord {
            description: Some(description.clone()),
            ..record()
        };
        let out = derive_title(&r, None, 120).unwrap();
        assert_eq!(out.chars().count(), 120);
        assert_eq!(out, greedy_oracle(&description, 120));
        assert!(description.starts_with(&out));
    }

    #[test]
    fn attributes_fallback() {
        let mut attrs = BTreeMap::new();
        attrs.insert("brand".to_string(), "Gucci".to_string());
        attrs.insert("color".to_string(), "black".to_string());
        let r = ManifestRecord {
            attributes: Some(attrs),
            ..record()
        };
        assert_eq!(derive_title(&r, None, 120).unwrap(), "brand: Gucci; color: black");
    }

    #[test]
    fn no_fields_is_error() {
        assert!(derive_title(&record(), None, 120).is_err());
    }

    #[test]
    fn unbroken_word_is_hard_cut() {
        assert_eq!(truncate_at_whitespace(&"x".repeat(50), 10), "x".repeat(10));
        assert_eq!(truncate_at_whitespace("héllo wörld", 7), "héllo");
        assert_eq!(truncate_at_whitespace("abc", 0), "");
    }

    proptest! {
        #[test]
        fn truncation_matches_greedy_packing(
            words in proptest::collection::vec("[a-zA-Z0-9]{1,12}", 1..60),
            budget in 1usize..200,
        ) {
            let text = words.join(" ");
            let out = truncate_at_whitespace(&text, budget);
            prop_assert!(out.chars().count() <= budget);
            prop_assert_eq!(out, greedy_oracle(&text, budget));
        }
    }
}
