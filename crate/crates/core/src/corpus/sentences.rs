use std::collections::HashSet;
use std::sync::OnceLock;

const ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// Rule-based splitter: a sentence ends at `.`, `!` or `?` (plus any closing
/// brackets or quotes) when followed by whitespace and an uppercase letter,
/// unless the word before a period is a known abbreviation.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(
            ABBREVIATIONS
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }
}

impl SentenceSplitter {
    pub fn with_abbreviations<I, S>(abbrevs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        SentenceSplitter {
            abbreviations: abbrevs
                .into_iter()
                .map(|s| s.as_ref().to_lowercase())
                .collect(),
        }
    }

    pub fn split<'a>(&self, text: &'a str) -> Vec<(usize, &'a str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (_, c) = chars[i];
            if !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            // swallow runs like "?!" or ".)" or '."'
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | ')' | ']' | '"' | '\'')
            {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
            let boundary = if j == chars.len() {
                true
            } else if chars[j].1.is_whitespace() {
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let next = chars.get(k).map(|&(_, c)| c);
                let after = chars.get(k + 1).map(|&(_, c)| c);
                let capital = match next {
                    None => true,
                    Some(n) if n.is_uppercase() => true,
                    Some('(' | '"' | '[') => after.is_some_and(char::is_uppercase),
                    _ => false,
                };
                capital && !(c == '.' && self.is_abbreviation(&text[start..chars[i].0]))
            } else {
                false
            };
            if boundary {
                push_sentence(&mut out, &text[start..end]);
                start = end;
            }
            i = j;
        }
        push_sentence(&mut out, &text[start..]);
        out
    }

    fn is_abbreviation(&self, before: &str) -> bool {
        let word = before
            .rsplit(char::is_whitespace)
            .next()
            .unwrap_or("")
            .trim_start_matches(['(', '[', '"']);
        !word.is_empty() && self.abbreviations.contains(&word.to_lowercase())
    }
}

fn push_sentence<'a>(out: &mut Vec<(usize, &'a str)>, s: &'a str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push((out.len(), s));
    }
}

/// Splits with the shipped abbreviation table.
pub fn split_sentences(text: &str) -> Vec<(usize, &str)> {
    static DEFAULT: OnceLock<SentenceSplitter> = OnceLock::new();
    DEFAULT.get_or_init(SentenceSplitter::default).split(text)
}
