//! Romanization of Arabic script (Buckwalter) and Devanagari (ITRANS).
//!
//! Characters outside the source script pass through untouched. A
//! source-script character missing from the table is also passed through
//! and counted in [`Transliterated::unmapped`], so a corpus build never
//! aborts on an exotic codepoint.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Buckwalter,
    Itrans,
}

impl Scheme {
    /// The scheme used for a language's native script, if any.
    pub fn for_language(code: &str) -> Option<Scheme> {
        match code {
            "ar" => Some(Scheme::Buckwalter),
            "hi" => Some(Scheme::Itrans),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transliterated {
    pub text: String,
    /// Source-script codepoints with no table entry.
    pub unmapped: usize,
}

pub fn transliterate(text: &str, scheme: Scheme) -> Transliterated {
    match scheme {
        Scheme::Buckwalter => buckwalter(text),
        Scheme::Itrans => itrans(text),
    }
}

fn buckwalter_char(c: char) -> Option<char> {
    Some(match c {
        '\u{0621}' => '\'',
        '\u{0622}' => '|',
        '\u{0623}' => '>',
        '\u{0624}' => '&',
        '\u{0625}' => '<',
        '\u{0626}' => '}',
        '\u{0627}' => 'A',
        '\u{0628}' => 'b',
        '\u{0629}' => 'p',
        '\u{062A}' => 't',
        '\u{062B}' => 'v',
        '\u{062C}' => 'j',
        '\u{062D}' => 'H',
        '\u{062E}' => 'x',
        '\u{062F}' => 'd',
        '\u{0630}' => '*',
        '\u{0631}' => 'r',
        '\u{0632}' => 'z',
        '\u{0633}' => 's',
        '\u{0634}' => '$',
        '\u{0635}' => 'S',
        '\u{0636}' => 'D',
        '\u{0637}' => 'T',
        '\u{0638}' => 'Z',
        '\u{0639}' => 'E',
        '\u{063A}' => 'g',
        '\u{0640}' => '_',
        '\u{0641}' => 'f',
        '\u{0642}' => 'q',
        '\u{0643}' => 'k',
        '\u{0644}' => 'l',
        '\u{0645}' => 'm',
        '\u{0646}' => 'n',
        '\u{0647}' => 'h',
        '\u{0648}' => 'w',
        '\u{0649}' => 'Y',
        '\u{064A}' => 'y',
        '\u{064B}' => 'F',
        '\u{064C}' => 'N',
        '\u{064D}' => 'K',
        '\u{064E}' => 'a',
        '\u{064F}' => 'u',
        '\u{0650}' => 'i',
        '\u{0651}' => '~',
        '\u{0652}' => 'o',
        '\u{0670}' => '`',
        '\u{0671}' => '{',
        '\u{067E}' => 'P',
        '\u{0686}' => 'J',
        '\u{06A4}' => 'V',
        '\u{06AF}' => 'G',
        _ => return None,
    })
}

fn is_arabic_script(c: char) -> bool {
    matches!(c, '\u{0600}'..='\u{06FF}' | '\u{0750}'..='\u{077F}')
}

fn buckwalter(text: &str) -> Transliterated {
    let mut out = String::with_capacity(text.len());
    let mut unmapped = 0;
    for c in text.chars() {
        match buckwalter_char(c) {
            Some(r) => out.push(r),
            None => {
                if is_arabic_script(c) {
                    unmapped += 1;
                }
                out.push(c);
            }
        }
    }
    Transliterated { text: out, unmapped }
}

const VIRAMA: char = '\u{094D}';
const NUKTA: char = '\u{093C}';

fn itrans_consonant(c: char) -> Option<&'static str> {
    Some(match c {
        'क' => "k",
        'ख' => "kh",
        'ग' => "g",
        'घ' => "gh",
        'ङ' => "~N",
        'च' => "ch",
        'छ' => "Ch",
        'ज' => "j",
        'झ' => "jh",
        'ञ' => "~n",
        'ट' => "T",
        'ठ' => "Th",
        'ड' => "D",
        'ढ' => "Dh",
        'ण' => "N",
        'त' => "t",
        'थ' => "th",
        'द' => "d",
        'ध' => "dh",
        'न' => "n",
        'प' => "p",
        'फ' => "ph",
        'ब' => "b",
        'भ' => "bh",
        'म' => "m",
        'य' => "y",
        'र' => "r",
        'ल' => "l",
        'ळ' => "L",
        'व' => "v",
        'श' => "sh",
        'ष' => "Sh",
        'स' => "s",
        'ह' => "h",
        // precomposed nukta forms
        '\u{0958}' => "q",
        '\u{0959}' => "K",
        '\u{095A}' => "G",
        '\u{095B}' => "z",
        '\u{095C}' => ".D",
        '\u{095D}' => ".Dh",
        '\u{095E}' => "f",
        '\u{095F}' => "Y",
        _ => return None,
    })
}

/// Consonant followed by a separate nukta sign.
fn itrans_nukta(base: char) -> Option<&'static str> {
    Some(match base {
        'क' => "q",
        'ख' => "K",
        'ग' => "G",
        'ज' => "z",
        'ड' => ".D",
        'ढ' => ".Dh",
        'फ' => "f",
        'य' => "Y",
        _ => return None,
    })
}

fn itrans_vowel_sign(c: char) -> Option<&'static str> {
    Some(match c {
        'ा' => "A",
        'ि' => "i",
        'ी' => "I",
        'ु' => "u",
        'ू' => "U",
        'ृ' => "RRi",
        'ॄ' => "RRI",
        'ॢ' => "LLi",
        'ॣ' => "LLI",
        'े' => "e",
        'ै' => "ai",
        'ो' => "o",
        'ौ' => "au",
        _ => return None,
    })
}

fn itrans_other(c: char) -> Option<&'static str> {
    Some(match c {
        'अ' => "a",
        'आ' => "A",
        'इ' => "i",
        'ई' => "I",
        'उ' => "u",
        'ऊ' => "U",
        'ऋ' => "RRi",
        'ॠ' => "RRI",
        'ऌ' => "LLi",
        'ॡ' => "LLI",
        'ए' => "e",
        'ऐ' => "ai",
        'ओ' => "o",
        'औ' => "au",
        'ं' => "M",
        'ः' => "H",
        'ँ' => ".N",
        'ऽ' => ".a",
        'ॐ' => "OM",
        '।' => "|",
        '॥' => "||",
        '०' => "0",
        '१' => "1",
        '२' => "2",
        '३' => "3",
        '४' => "4",
        '५' => "5",
        '६' => "6",
        '७' => "7",
        '८' => "8",
        '९' => "9",
        _ => return None,
    })
}

fn is_devanagari(c: char) -> bool {
    matches!(c, '\u{0900}'..='\u{097F}' | '\u{A8E0}'..='\u{A8FF}')
}

fn itrans(text: &str) -> Transliterated {
    let mut out = String::with_capacity(text.len() * 2);
    let mut unmapped = 0;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        i += 1;
        let mut consonant = itrans_consonant(c);
        if consonant.is_some() && chars.get(i) == Some(&NUKTA) {
            if let Some(n) = itrans_nukta(c) {
                consonant = Some(n);
                i += 1;
            }
        }
        if let Some(cons) = consonant {
            out.push_str(cons);
            // inherent vowel unless suppressed by a virama or replaced by a sign
            match chars.get(i) {
                Some(&VIRAMA) => i += 1,
                Some(&next) if itrans_vowel_sign(next).is_some() => {
                    out.push_str(itrans_vowel_sign(next).unwrap_or_default());
                    i += 1;
                }
                _ => out.push('a'),
            }
        } else if let Some(s) = itrans_other(c).or_else(|| itrans_vowel_sign(c)) {
            out.push_str(s);
        } else {
            if is_devanagari(c) {
                unmapped += 1;
            }
            out.push(c);
        }
    }
    Transliterated { text: out, unmapped }
}
