//! Rule-based sentence splitting over Unicode scalar offsets.

/// Tokens that end in a period without ending a sentence. Compared
/// case-insensitively against the whitespace-delimited token.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "e.g.", "i.e.", "approx.",
    "cf.",
];

const TERMINATORS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

/// Split `text` into sentence ranges `(char_start, char_end)`, counted in
/// Unicode scalar values.
///
/// Boundaries fall after a run of `.`/`!`/`?` (plus closing quotes or
/// brackets) that is followed by whitespace or the end of the text, and at
/// every newline. A period closing a guarded abbreviation is not a boundary.
/// Each range is trimmed of surrounding whitespace, so the ranges jointly
/// cover every non-whitespace character exactly once.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;

    while i < n {
        let c = chars[i];
        if c == '\n' || c == '\r' {
            if let Some(s) = start.take() {
                out.push((s, trim_end(&chars, s, i)));
            }
            i += 1;
            continue;
        }
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(i);
        }
        if TERMINATORS.contains(&c) {
            let mut j = i;
            while j < n && TERMINATORS.contains(&chars[j]) {
                j += 1;
            }
            while j < n && CLOSERS.contains(&chars[j]) {
                j += 1;
            }
            let at_break = j == n || chars[j].is_whitespace();
            if at_break && !ends_with_abbreviation(&chars, start.unwrap_or(0), j) {
                let s = start.take().unwrap_or(0);
                out.push((s, j));
            }
            i = j;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let e = trim_end(&chars, s, n);
        if e > s {
            out.push((s, e));
        }
    }
    out
}

fn trim_end(chars: &[char], start: usize, mut end: usize) -> usize {
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    end
}

/// Whether the token ending at `end` (exclusive) is a guarded abbreviation.
fn ends_with_abbreviation(chars: &[char], floor: usize, end: usize) -> bool {
    let mut begin = end;
    while begin > floor && !chars[begin - 1].is_whitespace() {
        begin -= 1;
    }
    let token: String = chars[begin..end].iter().flat_map(|c| c.to_lowercase()).collect();
    let token = token.trim_start_matches(|c: char| CLOSERS.contains(&c) || c == '(' || c == '[');
    // Only a single trailing period can be an abbreviation.
    if !token.ends_with('.') || token.ends_with("..") {
        return false;
    }
    ABBREVIATIONS.contains(&token)
}

/// Number of whitespace-delimited tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_terminated_sentences() {
        assert_eq!(split_sentences("I slept. I ate."), vec![(0, 8), (9, 15)]);
    }

    #[test]
    fn fallback_single_sentence() {
        assert_eq!(split_sentences("no terminator"), vec![(0, 13)]);
    }

    #[test]
    fn empty_and_blank() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("  \n\n ").is_empty());
    }

    #[test]
    fn newline_runs_split() {
        assert_eq!(split_sentences("first line\n\nsecond line"), vec![(0, 10), (12, 23)]);
    }

    #[test]
    fn abbreviation_guard() {
        let text = "I saw Dr. Smith today. He was kind.";
        assert_eq!(split_sentences(text), vec![(0, 22), (23, 35)]);
    }

    #[test]
    fn terminator_runs_and_closers() {
        let text = "Really?! \"Yes.\" Fine";
        assert_eq!(split_sentences(text), vec![(0, 8), (9, 15), (16, 20)]);
    }

    #[test]
    fn inner_periods_do_not_split() {
        assert_eq!(split_sentences("It cost 3.50 today."), vec![(0, 19)]);
    }

    #[test]
    fn offsets_count_scalar_values() {
        let text = "Café é bon. Ça va.";
        let ranges = split_sentences(text);
        assert_eq!(ranges, vec![(0, 11), (12, 18)]);
        let chars: Vec<char> = text.chars().collect();
        let second: String = chars[12..18].iter().collect();
        assert_eq!(second, "Ça va.");
    }

    #[test]
    fn word_counts() {
        assert_eq!(word_count("  two   words "), 2);
        assert_eq!(word_count(""), 0);
    }
}
