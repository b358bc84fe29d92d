//! Text normalization applied to every record before embedding.

use std::collections::HashSet;

/// Cleans one text: strips carriage-return/newline characters and their
/// literal `\r` / `\n` escapes, drops every whitespace-separated token that
/// contains a character outside printable ASCII (which also removes emoji),
/// lowercases, removes stopwords and re-joins with single spaces.
///
/// The result may be empty; callers drop and count such records.
pub fn clean_text(text: &str, stopwords: &HashSet<String>) -> String {
    let unescaped = strip_line_breaks(text);
    let mut out = String::with_capacity(unescaped.len());
    for token in unescaped.split_whitespace() {
        if !token.chars().all(|c| c.is_ascii_graphic()) {
            continue;
        }
        let lower = token.to_ascii_lowercase();
        if stopwords.contains(&lower) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&lower);
    }
    out
}

fn strip_line_breaks(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\r' | '\n' => out.push(' '),
            // Literal escapes survive some CSV exports. Matched case-insensitively
            // so that lowercasing can never create a new escape.
            '\\' if matches!(chars.peek(), Some('r' | 'n' | 'R' | 'N')) => {
                chars.next();
                out.push(' ');
            }
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(ws: &[&str]) -> HashSet<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn english_example() {
        let sw = words(&["i", "the", "a"]);
        assert_eq!(clean_text("I love the \u{2615} Caf\u{e9} vibes\r\n", &sw), "love vibes");
    }

    #[test]
    fn german_example() {
        let sw = words(&["und", "der"]);
        assert_eq!(clean_text("Hunde und Katzen", &sw), "hunde katzen");
    }

    #[test]
    fn idempotent_on_clean_input() {
        let sw = words(&["the"]);
        let once = clean_text("hello world", &sw);
        assert_eq!(once, "hello world");
        assert_eq!(clean_text(&once, &sw), once);
    }

    #[test]
    fn literal_escapes_removed() {
        let sw = HashSet::new();
        assert_eq!(clean_text(r"first\nsecond\r\nthird", &sw), "first second third");
        assert_eq!(clean_text("a\\Nb", &sw), "a b");
    }

    #[test]
    fn emoji_and_control_tokens_dropped() {
        let sw = HashSet::new();
        assert_eq!(clean_text("good\u{1F600} day bell\u{7}ring ok", &sw), "day ok");
        assert_eq!(clean_text("\u{1F600}", &sw), "");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,40}", t in ".{0,20}") {
            let sw = words(&["the", "und", "a"]);
            let input = format!("{s} {t}");
            let once = clean_text(&input, &sw);
            prop_assert_eq!(clean_text(&once, &sw), once.clone());
            prop_assert!(once.chars().all(|c| c.is_ascii_graphic() || c == ' '));
            prop_assert!(!once.contains("  "));
        }
    }
}
