//! Language codes and the set of languages a configuration recognises.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The eleven languages shipped with built-in metadata, in reporting order.
pub const BUILTIN_LANGUAGES: [&str; 11] =
    ["en", "de", "fr", "es", "it", "da", "ar", "tr", "pt", "hi", "id"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LanguageError {
    #[error("malformed language code {0:?}: expected 2-3 lowercase ASCII letters")]
    Malformed(String),
    #[error("language {0:?} is neither built in nor registered in the configuration")]
    Unregistered(String),
}

/// A lowercase ISO 639-style language code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Language(String);

impl Language {
    pub fn new(code: &str) -> Result<Self, LanguageError> {
        let ok = (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase());
        if ok {
            Ok(Language(code.to_owned()))
        } else {
            Err(LanguageError::Malformed(code.to_owned()))
        }
    }

    pub fn code(&self) -> &str {
        &self.0
    }

    pub fn is_builtin(&self) -> bool {
        BUILTIN_LANGUAGES.contains(&self.0.as_str())
    }

    /// English display name for the built-in languages, the code otherwise.
    pub fn display_name(&self) -> &str {
        match self.0.as_str() {
            "en" => "English",
            "de" => "German",
            "fr" => "French",
            "es" => "Spanish",
            "it" => "Italian",
            "da" => "Danish",
            "ar" => "Arabic",
            "tr" => "Turkish",
            "pt" => "Portuguese",
            "hi" => "Hindi",
            "id" => "Indonesian",
            other => other,
        }
    }

    /// Sort key placing built-ins first in their canonical table order.
    pub fn report_rank(&self) -> (usize, &str) {
        let pos = BUILTIN_LANGUAGES
            .iter()
            .position(|l| *l == self.0)
            .unwrap_or(BUILTIN_LANGUAGES.len());
        (pos, self.0.as_str())
    }
}

impl TryFrom<String> for Language {
    type Error = LanguageError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Language::new(&s)
    }
}

impl From<Language> for String {
    fn from(l: Language) -> String {
        l.0
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Built-in languages plus any user-registered codes.
#[derive(Debug, Clone, Default)]
pub struct LanguageRegistry {
    extra: BTreeSet<Language>,
}

impl LanguageRegistry {
    pub fn with_extra<I: IntoIterator<Item = Language>>(extra: I) -> Self {
        LanguageRegistry { extra: extra.into_iter().collect() }
    }

    pub fn register(&mut self, lang: Language) {
        self.extra.insert(lang);
    }

    pub fn contains(&self, lang: &Language) -> bool {
        lang.is_builtin() || self.extra.contains(lang)
    }

    pub fn resolve(&self, code: &str) -> Result<Language, LanguageError> {
        let lang = Language::new(code)?;
        if self.contains(&lang) {
            Ok(lang)
        } else {
            Err(LanguageError::Unregistered(code.to_owned()))
        }
    }
}
