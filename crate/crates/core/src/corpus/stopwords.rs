//! Per-language stopword lists loaded from `<dir>/<lang>.txt`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use log::warn;

use super::translit::{transliterate, Scheme};
use super::CorpusError;
use crate::lang::Language;

#[derive(Debug, Clone, Default)]
pub struct Stopwords {
    lists: BTreeMap<Language, HashSet<String>>,
    empty: HashSet<String>,
}

impl Stopwords {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Loads the lists for `languages` from `dir`. A missing file is not an
    /// error: that language skips stopword removal and a warning is logged.
    pub fn load(dir: &Path, languages: &[Language]) -> Result<Self, CorpusError> {
        let mut sw = Stopwords::default();
        for lang in languages {
            let path = dir.join(format!("{}.txt", lang.code()));
            if !path.exists() {
                warn!("no stopword list for {lang} at {}; skipping stopword removal", path.display());
                continue;
            }
            let text = fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
            sw.insert(lang.clone(), text.lines());
        }
        Ok(sw)
    }

    /// Adds words for a language. Entries are romanized with the language's
    /// script scheme and lowercased so they match cleaned text.
    pub fn insert<'a, I: IntoIterator<Item = &'a str>>(&mut self, lang: Language, words: I) {
        let scheme = Scheme::for_language(lang.code());
        let set = self.lists.entry(lang).or_default();
        for w in words {
            let w = w.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            let w = match scheme {
                Some(s) => transliterate(w, s).text,
                None => w.to_owned(),
            };
            set.insert(w.to_ascii_lowercase());
        }
    }

    pub fn for_language(&self, lang: &Language) -> &HashSet<String> {
        self.lists.get(lang).unwrap_or(&self.empty)
    }

    pub fn has(&self, lang: &Language) -> bool {
        self.lists.contains_key(lang)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arabic_entries_are_romanized() {
        let mut sw = Stopwords::empty();
        let ar = Language::new("ar").unwrap();
        sw.insert(ar.clone(), ["في", "  ", "# comment"]);
        assert!(sw.for_language(&ar).contains("fy"));
        assert_eq!(sw.for_language(&ar).len(), 1);
    }

    #[test]
    fn missing_language_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("en.txt"), "The\nand\n").unwrap();
        let en = Language::new("en").unwrap();
        let hi = Language::new("hi").unwrap();
        let sw = Stopwords::load(dir.path(), &[en.clone(), hi.clone()]).unwrap();
        assert!(sw.for_language(&en).contains("the"));
        assert!(!sw.has(&hi));
        assert!(sw.for_language(&hi).is_empty());
    }

    #[test]
    fn shipped_lists_cover_expected_words() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("stopwords");
        let langs: Vec<Language> = ["en", "de", "ar", "hi"].iter().map(|c| Language::new(c).unwrap()).collect();
        let sw = Stopwords::load(&dir, &langs).unwrap();
        assert!(sw.for_language(&langs[0]).contains("i"));
        assert!(sw.for_language(&langs[0]).contains("the"));
        assert!(sw.for_language(&langs[1]).contains("und"));
        assert!(sw.for_language(&langs[2]).contains("fy"));
        assert!(!sw.has(&langs[3]));
    }
}
