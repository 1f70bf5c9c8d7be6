//! Raw payload cleanup: visible-text extraction, normalization and stopword
//! filtering.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentType {
    Html,
    #[default]
    Plain,
}

/// One ingested comment or post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: String,
    pub fetched_at: DateTime<Utc>,
    pub raw: String,
    pub clean_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang_hint: Option<String>,
}

impl Document {
    /// Builds a document, deriving `clean_text` from `raw` with
    /// [`extract_text`] followed by [`normalize_text`].
    pub fn from_raw(
        id: impl Into<String>,
        source: impl Into<String>,
        fetched_at: DateTime<Utc>,
        raw: impl Into<String>,
        content_type: ContentType,
    ) -> Self {
        let raw = raw.into();
        let clean_text = normalize_text(&extract_text(&raw, content_type));
        Self {
            id: id.into(),
            source: source.into(),
            fetched_at,
            raw,
            clean_text,
            lang_hint: None,
        }
    }
}

/// Visible text of a payload.
///
/// For HTML, tags are stripped, `script`/`style` bodies and comments are
/// dropped, a handful of entities are decoded and whitespace runs collapse to
/// one space. Plain text passes through untouched.
pub fn extract_text(raw: &str, content_type: ContentType) -> String {
    match content_type {
        ContentType::Plain => raw.to_string(),
        ContentType::Html => collapse_whitespace(&strip_html(raw)),
    }
}

/// Like [`extract_text`] but tolerates invalid UTF-8 by substituting U+FFFD.
pub fn extract_text_bytes(raw: &[u8], content_type: ContentType) -> String {
    extract_text(&String::from_utf8_lossy(raw), content_type)
}

/// NFKC-normalizes text and removes control characters other than newline.
pub fn normalize_text(text: &str) -> String {
    text.nfkc()
        .filter(|c| *c == '\n' || !c.is_control())
        .collect()
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_html(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(pos) = rest.find(['<', '&']) {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        if rest.starts_with('&') {
            let (mut decoded, used) = decode_entity(rest);
            if out.ends_with('<') && decoded.starts_with(|c: char| c.is_ascii_alphabetic()) {
                decoded = rest[..used].to_string();
            }
            out.push_str(&decoded);
            rest = &rest[used..];
            continue;
        }
        if let Some(after) = rest.strip_prefix("<!--") {
            rest = after.find("-->").map_or("", |end| &after[end + 3..]);
            continue;
        }
        let next = rest[1..].chars().next();
        let is_tag = matches!(next, Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?');
        if !is_tag {
            out.push('<');
            rest = &rest[1..];
            continue;
        }
        let Some(end) = rest.find('>') else {
            // unterminated tag: nothing visible follows
            rest = "";
            break;
        };
        let tag = &rest[1..end];
        rest = &rest[end + 1..];
        // tags act as word separators
        out.push(' ');
        let name: String = tag
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if (name == "script" || name == "style") && !tag.ends_with('/') {
            rest = skip_raw_text_element(rest, &name);
        }
    }
    out.push_str(rest);
    out
}

fn skip_raw_text_element<'a>(rest: &'a str, name: &str) -> &'a str {
    let lower = rest.to_ascii_lowercase();
    let close = format!("</{name}");
    match lower.find(&close) {
        Some(start) => match rest[start..].find('>') {
            Some(end) => &rest[start + end + 1..],
            None => "",
        },
        None => "",
    }
}

/// Decodes an entity at the start of `s`, returning the text and bytes consumed.
/// Entities that would yield `<` are left as written so the output never
/// contains something that looks like a tag.
fn decode_entity(s: &str) -> (String, usize) {
    let Some(semi) = s.bytes().take(12).position(|b| b == b';') else {
        return ("&".into(), 1);
    };
    let body = &s[1..semi];
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'#') {
        return ("&".into(), 1);
    }
    let decoded = match body {
        "amp" => Some('&'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => body.strip_prefix('#').and_then(|num| {
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok(),
                None => num.parse().ok(),
            };
            code.and_then(char::from_u32).filter(|c| *c != '<')
        }),
    };
    match decoded {
        Some(c) => (c.to_string(), semi + 1),
        None => (s[..semi + 1].to_string(), semi + 1),
    }
}

/// A deduplicated set of stopwords.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordList {
    words: BTreeSet<String>,
    source_name: String,
}

impl StopwordList {
    pub fn new<I, S>(words: I, source_name: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words = words
            .into_iter()
            .map(Into::into)
            .filter(|w: &String| !w.is_empty())
            .collect();
        Self {
            words,
            source_name: source_name.into(),
        }
    }

    /// Parses the stopword file format: one word per line, `#` starts a
    /// comment line, surrounding whitespace is ignored.
    pub fn parse(text: &str, source_name: impl Into<String>) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(normalize_text);
        Self::new(words, source_name)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::parse(path, 0, format!("stopword file is not UTF-8: {e}")))?;
        Ok(Self::parse(&text, path.display().to_string()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

pub fn remove_stopwords<S: AsRef<str>>(tokens: &[S], stops: &StopwordList) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !stops.contains(t))
        .map(str::to_string)
        .collect()
}
