//! Answer extraction from free-form generations and grading against gold.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::record::{AnswerValue, GeoRecord, QuestionType};

/// Default relative tolerance for numeric cloze answers.
pub const DEFAULT_REL_TOL: f64 = 1e-3;

const ANSWER_CUES: [&str; 3] = ["the answer is", "answer", "答案"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GradeError {
    #[error("no answer found in generation")]
    NoAnswerFound,
    #[error("{0} answers are not graded")]
    Unsupported(QuestionType),
}

/// Byte offsets just past each answer cue, ascending. Matching is
/// case-insensitive for ASCII cues.
fn cue_ends(text: &str) -> Vec<usize> {
    let lower = text.to_ascii_lowercase();
    let mut ends = Vec::new();
    for cue in ANSWER_CUES {
        let mut from = 0;
        while let Some(pos) = lower[from..].find(cue) {
            let end = from + pos + cue.len();
            ends.push(end);
            from = end;
        }
    }
    ends.sort_unstable();
    ends.dedup();
    ends
}

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

/// Byte positions of standalone capital letters valid for `n_choices` options.
fn standalone_letters(text: &str, n_choices: usize) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if !c.is_ascii_uppercase() {
            continue;
        }
        let idx = (c as u8 - b'A') as usize;
        if idx >= n_choices {
            continue;
        }
        let before = k.checked_sub(1).map(|j| chars[j].1);
        let after = chars.get(k + 1).map(|p| p.1);
        if !is_word_char(before) && !is_word_char(after) {
            out.push((pos, idx));
        }
    }
    out
}

fn extract_choice(text: &str, n_choices: usize) -> Option<usize> {
    let letters = standalone_letters(text, n_choices);
    // Latest cue that is followed by a letter; take the first letter after it.
    for &end in cue_ends(text).iter().rev() {
        if let Some(&(_, idx)) = letters.iter().find(|(pos, _)| *pos >= end) {
            return Some(idx);
        }
    }
    letters.last().map(|&(_, idx)| idx)
}

/// Longest numeric prefix of `s` (optional sign, digits, optional fraction).
fn leading_number(s: &str) -> Option<(f64, usize)> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i == digits_start {
        return None;
    }
    if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    s[..i].parse::<f64>().ok().map(|v| (v, i))
}

fn last_number(text: &str) -> Option<f64> {
    let mut last = None;
    let mut i = 0;
    while i < text.len() {
        let prev_digit = text[..i].chars().next_back().is_some_and(|c| c.is_ascii_digit() || c == '.');
        if !prev_digit {
            if let Some((v, len)) = leading_number(&text[i..]) {
                last = Some(v);
                i += len;
                continue;
            }
        }
        i += text[i..].chars().next().map_or(1, char::len_utf8);
    }
    last
}

fn extract_cloze(text: &str, rel_tol: f64) -> Option<AnswerValue> {
    if let Some(&end) = cue_ends(text).last() {
        let tail = text[end..].trim_start_matches(|c: char| c.is_whitespace() || c == ':' || c == '：');
        let tail = tail.strip_prefix("is ").unwrap_or(tail);
        let line = tail.lines().next().unwrap_or("").trim();
        let line = line.trim_end_matches(['.', '。']).trim();
        if line.is_empty() {
            return None;
        }
        return Some(match leading_number(line) {
            Some((value, len)) if line[len..].trim().chars().all(|c| !c.is_ascii_digit()) => {
                AnswerValue::Numeric { value, rel_tol: Some(rel_tol) }
            }
            _ => AnswerValue::Text(line.to_string()),
        });
    }
    last_number(text).map(|value| AnswerValue::Numeric { value, rel_tol: Some(rel_tol) })
}

/// Pull an answer out of a generation.
///
/// Selection: the first standalone choice letter after the last answer cue
/// that has one, else the last standalone choice letter anywhere. Cloze: the
/// text after the last answer cue (numeric when it parses), else the last
/// number. Proving and caption records are not graded.
pub fn extract_answer(generated: &str, qtype: QuestionType, n_choices: usize) -> Result<AnswerValue, GradeError> {
    match qtype {
        QuestionType::Selection => extract_choice(generated, n_choices).map(AnswerValue::Choice),
        QuestionType::Cloze => extract_cloze(generated, DEFAULT_REL_TOL),
        q => return Err(GradeError::Unsupported(q)),
    }
    .ok_or(GradeError::NoAnswerFound)
}

fn canonical_text(s: &str) -> String {
    s.trim().trim_end_matches(['.', '。']).trim().to_lowercase()
}

fn numbers_match(pred: f64, gold: f64, rel_tol: f64) -> bool {
    let diff = (pred - gold).abs();
    if gold == 0.0 {
        diff <= rel_tol
    } else {
        diff <= rel_tol * gold.abs()
    }
}

/// Whether `predicted` matches `gold`. Numeric golds use their own tolerance
/// when set, else `default_rel_tol`; text golds that parse as numbers are
/// compared numerically.
pub fn answers_match(predicted: &AnswerValue, gold: &AnswerValue, default_rel_tol: f64) -> bool {
    match (predicted, gold) {
        (AnswerValue::Choice(p), AnswerValue::Choice(g)) => p == g,
        (AnswerValue::Numeric { value: p, .. }, AnswerValue::Numeric { value: g, rel_tol }) => {
            numbers_match(*p, *g, rel_tol.unwrap_or(default_rel_tol))
        }
        (AnswerValue::Numeric { value: p, .. }, AnswerValue::Text(g)) => match g.trim().parse::<f64>() {
            Ok(g) => numbers_match(*p, g, default_rel_tol),
            Err(_) => false,
        },
        (AnswerValue::Text(p), AnswerValue::Numeric { value: g, rel_tol }) => match p.trim().parse::<f64>() {
            Ok(p) => numbers_match(p, *g, rel_tol.unwrap_or(default_rel_tol)),
            Err(_) => false,
        },
        (AnswerValue::Text(p), AnswerValue::Text(g)) => canonical_text(p) == canonical_text(g),
        _ => false,
    }
}

/// Outcome of grading one generation.
#[derive(Debug, Clone, PartialEq)]
pub enum Grade {
    Correct(AnswerValue),
    Incorrect(AnswerValue),
    NoAnswer,
    Unsupported,
}

/// Grade `generated` against `record`'s gold answer.
pub fn grade(record: &GeoRecord, generated: &str, rel_tol: f64, exact_match_proving: Option<&str>) -> Grade {
    if record.qtype == QuestionType::Proving {
        return match exact_match_proving {
            Some(target) if generated.trim() == target.trim() => Grade::Correct(AnswerValue::Text(generated.trim().into())),
            Some(_) => Grade::Incorrect(AnswerValue::Text(generated.trim().into())),
            None => Grade::Unsupported,
        };
    }
    let extracted = match record.qtype {
        QuestionType::Selection => extract_choice(generated, record.choices.len()).map(AnswerValue::Choice),
        QuestionType::Cloze => extract_cloze(generated, rel_tol),
        _ => return Grade::Unsupported,
    };
    match extracted {
        None => Grade::NoAnswer,
        Some(p) if answers_match(&p, &record.answer, rel_tol) => Grade::Correct(p),
        Some(p) => Grade::Incorrect(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_after_cue() {
        assert_eq!(extract_answer("…so the answer is C.", QuestionType::Selection, 4), Ok(AnswerValue::Choice(2)));
        assert_eq!(extract_answer("Answer: (B)", QuestionType::Selection, 4), Ok(AnswerValue::Choice(1)));
        assert_eq!(extract_answer("答案：D", QuestionType::Selection, 4), Ok(AnswerValue::Choice(3)));
        // Point labels before the cue do not count.
        assert_eq!(
            extract_answer("Point A lies on BC. The answer is B, not D.", QuestionType::Selection, 4),
            Ok(AnswerValue::Choice(1))
        );
    }

    #[test]
    fn selection_fallback_and_range() {
        assert_eq!(extract_answer("I pick A then switch to D", QuestionType::Selection, 4), Ok(AnswerValue::Choice(3)));
        assert_eq!(extract_answer("E is tempting but the answer is E", QuestionType::Selection, 4), Err(GradeError::NoAnswerFound));
        assert_eq!(extract_answer("triangle ABC", QuestionType::Selection, 4), Err(GradeError::NoAnswerFound));
    }

    #[test]
    fn no_answer() {
        assert_eq!(extract_answer("I cannot determine.", QuestionType::Selection, 4), Err(GradeError::NoAnswerFound));
        assert_eq!(extract_answer("I cannot determine.", QuestionType::Cloze, 0), Err(GradeError::NoAnswerFound));
    }

    #[test]
    fn cloze_tolerance() {
        let p = extract_answer("Answer: 3.14", QuestionType::Cloze, 0).unwrap();
        assert_eq!(p, AnswerValue::Numeric { value: 3.14, rel_tol: Some(1e-3) });
        // |3.14 - 3.1415| / 3.1415 = 4.77e-4 <= 1e-3.
        let gold = AnswerValue::Numeric { value: 3.1415, rel_tol: None };
        assert!(answers_match(&p, &gold, DEFAULT_REL_TOL));
        let far = AnswerValue::Numeric { value: 3.2, rel_tol: None };
        assert!(!answers_match(&p, &far, DEFAULT_REL_TOL));
    }

    #[test]
    fn cloze_forms() {
        assert_eq!(
            extract_answer("So the answer is 12 cm.", QuestionType::Cloze, 0),
            Ok(AnswerValue::Numeric { value: 12.0, rel_tol: Some(1e-3) })
        );
        assert_eq!(
            extract_answer("The answer is 2√3.", QuestionType::Cloze, 0),
            Ok(AnswerValue::Text("2√3".into()))
        );
        assert_eq!(
            extract_answer("Adding gives 7 and then 9.5", QuestionType::Cloze, 0),
            Ok(AnswerValue::Numeric { value: 9.5, rel_tol: Some(1e-3) })
        );
        assert!(answers_match(&AnswerValue::Text("2√3.".into()), &AnswerValue::Text("2√3".into()), 1e-3));
        assert!(answers_match(&AnswerValue::Numeric { value: 5.0, rel_tol: None }, &AnswerValue::Text("5".into()), 1e-3));
    }

    #[test]
    fn unsupported_kinds() {
        assert_eq!(extract_answer("QED", QuestionType::Proving, 0), Err(GradeError::Unsupported(QuestionType::Proving)));
    }
}
