//! Procedure selection from catalog metadata.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::Metadata;

/// Predicate over a lower-cased title.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TitlePredicate {
    /// Matches every video, including ones without a title.
    Always,
    Contains(String),
    AnyOf(Vec<TitlePredicate>),
    AllOf(Vec<TitlePredicate>),
}

impl TitlePredicate {
    fn requires_title(&self) -> bool {
        !matches!(self, TitlePredicate::Always)
    }

    pub fn matches(&self, title_lower: &str) -> bool {
        match self {
            TitlePredicate::Always => true,
            TitlePredicate::Contains(s) => title_lower.contains(&s.to_lowercase()),
            TitlePredicate::AnyOf(ps) => ps.iter().any(|p| p.matches(title_lower)),
            TitlePredicate::AllOf(ps) => ps.iter().all(|p| p.matches(title_lower)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    pub name: String,
    pub umls_substring: String,
    pub search_term_substring: String,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub title: TitlePredicate,
}

impl FilterRule {
    fn new(name: &str, umls: &str, search: &str, title: TitlePredicate) -> Self {
        Self {
            name: name.into(),
            umls_substring: umls.into(),
            search_term_substring: search.into(),
            min_duration_s: 120.0,
            max_duration_s: 1800.0,
            title,
        }
    }

    pub fn appendectomy() -> Self {
        Self::new("appendectomy", "append", "append", TitlePredicate::Contains("append".into()))
    }

    pub fn pilonidal() -> Self {
        use TitlePredicate::*;
        Self::new(
            "pilonidal",
            "flap",
            "pilonidal",
            AnyOf(vec![
                Contains("karydakis".into()),
                AllOf(vec![
                    AnyOf(vec![Contains("pilon".into()), Contains("perin".into())]),
                    Contains("flap".into()),
                ]),
            ]),
        )
    }

    /// The title condition for this procedure is a manual review, so any title passes.
    pub fn thyroidectomy() -> Self {
        Self::new("thyroidectomy", "thyroid", "thyroid", TitlePredicate::Always)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "appendectomy" => Ok(Self::appendectomy()),
            "pilonidal" => Ok(Self::pilonidal()),
            "thyroidectomy" => Ok(Self::thyroidectomy()),
            other => Err(Error::Config(format!(
                "unknown rule {other:?}; expected appendectomy, pilonidal or thyroidectomy"
            ))),
        }
    }

    /// `Ok(true/false)` for a decision, `Err(field)` when a needed field is missing.
    fn evaluate(&self, m: &Metadata) -> std::result::Result<bool, &'static str> {
        let umls = m.umls_tags.as_ref().ok_or("umls_tags")?;
        let search = m.search_terms.as_ref().ok_or("search_terms")?;
        let duration = m.duration_s.ok_or("duration_s")?;
        let title = match (&m.title, self.title.requires_title()) {
            (Some(t), _) => t.to_lowercase(),
            (None, false) => String::new(),
            (None, true) => return Err("title"),
        };
        let any_contains =
            |items: &[String], needle: &str| items.iter().any(|s| s.to_lowercase().contains(&needle.to_lowercase()));
        Ok(any_contains(umls, &self.umls_substring)
            && any_contains(search, &self.search_term_substring)
            && (self.min_duration_s..=self.max_duration_s).contains(&duration)
            && self.title.matches(&title))
    }
}

/// One line of a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub video_id: String,
    #[serde(flatten)]
    pub metadata: Metadata,
}

/// Ids of catalog entries satisfying `rule`, in catalog order. Entries
/// missing a field the rule needs are excluded with a warning.
pub fn filter_videos(catalog: &[CatalogEntry], rule: &FilterRule) -> Vec<String> {
    catalog
        .iter()
        .filter(|e| match rule.evaluate(&e.metadata) {
            Ok(keep) => keep,
            Err(field) => {
                tracing::warn!(video = %e.video_id, field, "metadata missing; excluded");
                false
            }
        })
        .map(|e| e.video_id.clone())
        .collect()
}

pub fn read_catalog<R: BufRead>(input: R) -> Result<Vec<CatalogEntry>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("catalog", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_catalog(path: &Path) -> Result<Vec<CatalogEntry>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_catalog(std::io::BufReader::new(f))
}
