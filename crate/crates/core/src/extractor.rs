//! Rule-based constraint extraction from question text.
//!
//! Each rule maps case-insensitive, word-bounded trigger phrases to one
//! constraint kind. Matching runs over the question and the evidence
//! separately. Overlaps are resolved by keeping the longest fired match,
//! so "at most" yields a comparison rather than an extremum, "total
//! number" yields a count rather than a sum, and "highest 5" yields a
//! Top-K rather than an extremum.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::types::{CompareOp, Constraint, ConstraintKind, ConstraintParam, Extremum, Recency};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("no number adjacent to Top-K trigger `{0}`")]
    NoNumber(String),
}

/// How a matched phrase turns into a constraint parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamCapture {
    None,
    /// Integer N following the trigger word.
    FollowingNumber,
    Compare(CompareOp),
    Extremum(Extremum),
    Recency(Recency),
}

#[derive(Debug, Clone)]
pub struct TriggerPattern {
    pub phrase: &'static str,
    pub capture: ParamCapture,
    regex: Regex,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub kind: ConstraintKind,
    pub patterns: Vec<TriggerPattern>,
}

/// The ordered rule set.
#[derive(Debug, Clone)]
pub struct RuleTable {
    pub rules: Vec<Rule>,
}

const SPELLED_NUMBERS: [&str; 10] = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];

const NUMBER_ALT: &str = r"\d+|one|two|three|four|five|six|seven|eight|nine|ten";

fn phrase_regex(phrase: &str) -> Regex {
    let body = phrase.split_whitespace().map(regex::escape).collect::<Vec<_>>().join(r"\s+");
    let pattern = if phrase.chars().all(|c| !c.is_alphanumeric()) {
        // symbol triggers like "%" cannot use word boundaries
        body
    } else {
        format!(r"\b{body}\b")
    };
    Regex::new(&format!("(?i){pattern}")).expect("trigger pattern compiles")
}

fn topk_regex(word: &str) -> Regex {
    Regex::new(&format!(r"(?i)\b{word}\s+({NUMBER_ALT})\b")).expect("top-k pattern compiles")
}

impl RuleTable {
    pub fn standard() -> Self {
        use ConstraintKind::*;
        use ParamCapture as P;

        let simple = |kind: ConstraintKind, phrases: &[&'static str]| Rule {
            kind,
            patterns: phrases
                .iter()
                .map(|p| TriggerPattern { phrase: p, capture: P::None, regex: phrase_regex(p) })
                .collect(),
        };
        let with = |kind: ConstraintKind, phrases: &[(&'static str, ParamCapture)]| Rule {
            kind,
            patterns: phrases
                .iter()
                .map(|(p, cap)| TriggerPattern { phrase: p, capture: *cap, regex: phrase_regex(p) })
                .collect(),
        };

        let top_k = Rule {
            kind: TopK,
            patterns: ["top", "first", "bottom", "highest", "lowest", "best", "worst"]
                .iter()
                .map(|w| TriggerPattern { phrase: w, capture: P::FollowingNumber, regex: topk_regex(w) })
                .collect(),
        };

        let rules = vec![
            simple(Distinct, &["unique", "distinct", "different", "no duplicate", "deduplicate"]),
            top_k,
            simple(Ranking, &["rank", "ranking", "position", "placed", "standing"]),
            simple(Count, &["how many", "count", "number of", "total number", "quantity of"]),
            simple(Percent, &["percentage", "percent", "%", "ratio", "rate", "proportion", "fraction of"]),
            simple(Sum, &["total", "sum", "overall", "combined", "aggregate"]),
            simple(Average, &["average", "mean", "avg", "on average", "typical"]),
            with(
                Extreme,
                &[
                    ("maximum", P::Extremum(Extremum::Max)),
                    ("minimum", P::Extremum(Extremum::Min)),
                    ("max", P::Extremum(Extremum::Max)),
                    ("min", P::Extremum(Extremum::Min)),
                    ("largest", P::Extremum(Extremum::Max)),
                    ("smallest", P::Extremum(Extremum::Min)),
                    ("most", P::Extremum(Extremum::Max)),
                    ("least", P::Extremum(Extremum::Min)),
                    ("highest", P::Extremum(Extremum::Max)),
                    ("lowest", P::Extremum(Extremum::Min)),
                ],
            ),
            with(
                Temporal,
                &[
                    ("latest", P::Recency(Recency::Latest)),
                    ("earliest", P::Recency(Recency::Earliest)),
                    ("most recent", P::Recency(Recency::Latest)),
                    ("newest", P::Recency(Recency::Latest)),
                    ("oldest", P::Recency(Recency::Earliest)),
                    ("last", P::Recency(Recency::Latest)),
                    ("first", P::Recency(Recency::Earliest)),
                ],
            ),
            with(
                Compare,
                &[
                    ("more than", P::Compare(CompareOp::Gt)),
                    ("less than", P::Compare(CompareOp::Lt)),
                    ("greater than", P::Compare(CompareOp::Gt)),
                    ("fewer than", P::Compare(CompareOp::Lt)),
                    ("at least", P::Compare(CompareOp::GtEq)),
                    ("at most", P::Compare(CompareOp::LtEq)),
                    ("no more than", P::Compare(CompareOp::LtEq)),
                    ("exceeds", P::Compare(CompareOp::Gt)),
                    ("no less than", P::Compare(CompareOp::GtEq)),
                ],
            ),
        ];
        Self { rules }
    }

    pub fn rule(&self, kind: ConstraintKind) -> Option<&Rule> {
        self.rules.iter().find(|r| r.kind == kind)
    }
}

static RULES: LazyLock<RuleTable> = LazyLock::new(RuleTable::standard);

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(?:19|20)\d{2}\b").unwrap());

// "may" is left out of the month names: as a modal verb it is far more common.
static TIME_CONTEXT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:years?|months?|dates?|times?|days?|january|february|march|april|june|july|august|september|october|november|december|(?:19|20)\d{2})\b",
    )
    .unwrap()
});

static FOLLOWING_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?i)^\s+({NUMBER_ALT})\b")).unwrap());

static NEXT_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s+([A-Za-z]+)").unwrap());

pub fn rule_table() -> &'static RuleTable {
    &RULES
}

fn parse_number(token: &str) -> Option<u32> {
    let t = token.to_ascii_lowercase();
    if let Some(i) = SPELLED_NUMBERS.iter().position(|w| *w == t) {
        return Some(i as u32 + 1);
    }
    t.parse::<u32>().ok().filter(|n| *n >= 1)
}

/// Parses N for a Top-K trigger located at `trigger_span` within `question`.
///
/// Digits or a spelled number one–ten directly after the trigger word give
/// N. A bare "first" followed by a singular noun means N = 1.
pub fn extract_topk_n(question: &str, trigger_span: Range<usize>) -> Result<u32, ExtractError> {
    let word = question.get(trigger_span.clone()).unwrap_or_default();
    let first_word = word.split_whitespace().next().unwrap_or_default().to_ascii_lowercase();
    let rest = question.get(first_word_end(question, &trigger_span)..).unwrap_or_default();
    if let Some(n) = FOLLOWING_NUMBER.captures(rest).and_then(|c| parse_number(&c[1])) {
        return Ok(n);
    }
    if first_word == "first" {
        if let Some(next) = NEXT_WORD.captures(rest).map(|c| c[1].to_ascii_lowercase()) {
            let plural = next.ends_with('s') && !next.ends_with("ss");
            if !plural && next != "name" {
                return Ok(1);
            }
        }
    }
    Err(ExtractError::NoNumber(word.to_string()))
}

fn first_word_end(text: &str, span: &Range<usize>) -> usize {
    let slice = text.get(span.clone()).unwrap_or_default();
    let len = slice.find(char::is_whitespace).unwrap_or(slice.len());
    span.start + len
}

#[derive(Debug, Clone)]
struct Candidate {
    kind: ConstraintKind,
    param: Option<ConstraintParam>,
    span: Range<usize>,
    trigger: String,
}

impl Candidate {
    fn strictly_inside(&self, other: &Candidate) -> bool {
        other.span.start <= self.span.start
            && self.span.end <= other.span.end
            && other.span.len() > self.span.len()
    }
}

fn sentence_bounds(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let is_end = match b {
            b'\n' | b';' => true,
            b'.' | b'!' | b'?' => bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace()),
            _ => false,
        };
        if is_end {
            out.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push(start..text.len());
    }
    out
}

fn has_time_context(text: &str, sentence: &Range<usize>, trigger: &Range<usize>) -> bool {
    let s = &text[sentence.clone()];
    TIME_CONTEXT.find_iter(s).any(|m| {
        let abs = (sentence.start + m.start())..(sentence.start + m.end());
        abs.end <= trigger.start || abs.start >= trigger.end
    })
}

fn percent_sign_ok(text: &str, at: usize) -> bool {
    // Skip LIKE-style wildcards such as '%abc%'.
    let before = text[..at].chars().next_back();
    let after = text[at + 1..].chars().next();
    let quote = |c: Option<char>| matches!(c, Some('\'' | '"' | '`'));
    !quote(before) && !quote(after) && !after.is_some_and(|c| c.is_alphanumeric())
}

fn candidates_in(text: &str, table: &RuleTable) -> Vec<Candidate> {
    let mut fired = Vec::new();
    let sentences = sentence_bounds(text);
    let sentence_of = |pos: usize| sentences.iter().find(|s| s.contains(&pos)).cloned().unwrap_or(0..text.len());

    for rule in &table.rules {
        for pat in &rule.patterns {
            for m in pat.regex.find_iter(text) {
                let span = m.range();
                let trigger = m.as_str().to_string();
                let param = match pat.capture {
                    ParamCapture::None => None,
                    ParamCapture::Compare(op) => Some(ConstraintParam::Compare(op)),
                    ParamCapture::Extremum(d) => Some(ConstraintParam::Extremum(d)),
                    ParamCapture::Recency(d) => Some(ConstraintParam::Recency(d)),
                    ParamCapture::FollowingNumber => {
                        let rest = &text[first_word_end(text, &span)..];
                        match FOLLOWING_NUMBER.captures(rest).and_then(|c| parse_number(&c[1])) {
                            Some(n) => Some(ConstraintParam::Limit(n)),
                            None => continue,
                        }
                    }
                };
                if pat.phrase == "%" && !percent_sign_ok(text, span.start) {
                    continue;
                }
                if rule.kind == ConstraintKind::Temporal && !has_time_context(text, &sentence_of(span.start), &span) {
                    continue;
                }
                fired.push(Candidate { kind: rule.kind, param, span, trigger });
            }
        }
    }

    // Top-K words without a number degrade to an extremum.
    static BARE_TOP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(top|best|bottom|worst)\b").unwrap());
    for m in BARE_TOP.find_iter(text) {
        let covered = fired.iter().any(|c| c.kind == ConstraintKind::TopK && c.span.start == m.start());
        if covered {
            continue;
        }
        let dir = match m.as_str().to_ascii_lowercase().as_str() {
            "top" | "best" => Extremum::Max,
            _ => Extremum::Min,
        };
        fired.push(Candidate {
            kind: ConstraintKind::Extreme,
            param: Some(ConstraintParam::Extremum(dir)),
            span: m.range(),
            trigger: m.as_str().to_string(),
        });
    }

    for m in YEAR.find_iter(text) {
        fired.push(Candidate {
            kind: ConstraintKind::LiteralPresence,
            param: Some(ConstraintParam::Literal(m.as_str().to_string())),
            span: m.range(),
            trigger: m.as_str().to_string(),
        });
    }

    let mut kept: Vec<Candidate> = fired
        .iter()
        .filter(|c| !fired.iter().any(|other| c.strictly_inside(other)))
        .cloned()
        .collect();
    kept.sort_by_key(|c| c.span.start);
    kept
}

/// Adds `c` to `set`, merging triggers when a constraint with the same
/// (kind, param) is already present.
pub fn merge_into(set: &mut Vec<Constraint>, c: Constraint) {
    if let Some(existing) = set.iter_mut().find(|e| e.key() == c.key()) {
        for t in std::iter::once(c.trigger).chain(c.also_triggered_by) {
            if t != existing.trigger && !existing.also_triggered_by.contains(&t) {
                existing.also_triggered_by.push(t);
            }
        }
    } else {
        set.push(c);
    }
}

fn sort_constraints(set: &mut [Constraint]) {
    set.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.param.cmp(&b.param)));
}

/// Extracts the deduplicated constraint set for a question and its evidence.
pub fn extract_constraints(question: &str, evidence: &str) -> Vec<Constraint> {
    extract_with(rule_table(), question, evidence)
}

pub fn extract_with(table: &RuleTable, question: &str, evidence: &str) -> Vec<Constraint> {
    let mut out = Vec::new();
    for text in [question, evidence] {
        for cand in candidates_in(text, table) {
            merge_into(&mut out, Constraint::new(cand.kind, cand.param, cand.trigger));
        }
    }
    sort_constraints(&mut out);
    out
}

/// Literal-presence constraints for probed value mappings whose question
/// term actually occurs in the question or evidence.
pub fn literals_from_mappings(
    question: &str,
    evidence: &str,
    mappings: &BTreeMap<String, String>,
) -> Vec<Constraint> {
    let haystack = format!("{}\n{}", question.to_lowercase(), evidence.to_lowercase());
    let mut out = Vec::new();
    for (term, value) in mappings {
        let term_trim = term.trim();
        if term_trim.is_empty() || value.trim().is_empty() {
            continue;
        }
        if let Some(pos) = haystack.find(&term_trim.to_lowercase()) {
            // Recover the original-case substring as the trigger.
            let combined = format!("{question}\n{evidence}");
            let trigger = combined.get(pos..pos + term_trim.len()).unwrap_or(term_trim).to_string();
            merge_into(&mut out, Constraint::literal(value.trim(), trigger));
        }
    }
    sort_constraints(&mut out);
    out
}

/// Set union keeping the fixed kind order.
pub fn union(base: &[Constraint], extra: &[Constraint]) -> Vec<Constraint> {
    let mut out = base.to_vec();
    for c in extra {
        merge_into(&mut out, c.clone());
    }
    sort_constraints(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConstraintKind::*;

    fn kinds(q: &str) -> Vec<ConstraintKind> {
        extract_constraints(q, "").iter().map(|c| c.kind).collect()
    }

    #[test]
    fn case_study_question() {
        let q = "List the top 3 unique product categories by percentage of orders from California customers that were shipped late in 2023";
        let got = extract_constraints(q, "");
        let keys: Vec<String> = got.iter().map(|c| c.to_string()).collect();
        assert_eq!(keys, vec!["Distinct", "TopK(3)", "Percent", "LiteralPresence(2023)"]);
        assert_eq!(got[1].trigger, "top 3");
    }

    #[test]
    fn nothing_to_extract() {
        assert!(extract_constraints("Show me the table of employees.", "").is_empty());
    }

    #[test]
    fn topk_n_parsing() {
        let q = "top 3 unique product categories";
        assert_eq!(extract_topk_n(q, 0..5), Ok(3));
        let q = "Who was the first student to enroll?";
        let at = q.find("first").unwrap();
        assert_eq!(extract_topk_n(q, at..at + 5), Ok(1));
        let q = "the best five players";
        let at = q.find("best").unwrap();
        assert_eq!(extract_topk_n(q, at..at + 4), Ok(5));
        let q = "the top students";
        let at = q.find("top").unwrap();
        assert!(matches!(extract_topk_n(q, at..at + 3), Err(ExtractError::NoNumber(_))));
    }

    #[test]
    fn number_adjacent_superlative_is_topk_only() {
        let got = extract_constraints("Give the highest 5 salaries.", "");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].limit(), Some(5));
    }

    #[test]
    fn bare_top_becomes_extreme() {
        let got = extract_constraints("Who are the top students in math?", "");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].param, Some(ConstraintParam::Extremum(Extremum::Max)));
    }

    #[test]
    fn first_name_is_not_a_constraint() {
        assert!(kinds("What is the first name of the oldest member?").is_empty());
    }

    #[test]
    fn temporal_needs_time_context() {
        assert!(kinds("Who finished last?").is_empty());
        assert_eq!(kinds("Which game was played last in the year?"), vec![Temporal]);
        // context in another sentence does not count
        assert!(kinds("Who finished last? Check the date.").is_empty());
    }

    #[test]
    fn count_and_distinct_compose() {
        assert_eq!(kinds("How many distinct cities are there?"), vec![Distinct, Count]);
    }

    #[test]
    fn compare_directions() {
        let op = |q: &str| match &extract_constraints(q, "")[0].param {
            Some(ConstraintParam::Compare(op)) => *op,
            other => panic!("{other:?}"),
        };
        assert_eq!(op("more than 3 goals"), CompareOp::Gt);
        assert_eq!(op("no more than 3 goals"), CompareOp::LtEq);
        assert_eq!(op("no less than 3 goals"), CompareOp::GtEq);
        assert_eq!(op("fewer than 3 goals"), CompareOp::Lt);
        assert_eq!(op("score exceeds 3"), CompareOp::Gt);
        assert_eq!(kinds("at most 3 goals"), vec![Compare]);
        assert_eq!(kinds("at least 3 goals"), vec![Compare]);
    }

    #[test]
    fn total_number_is_count_not_sum() {
        assert_eq!(kinds("What is the total number of flights?"), vec![Count]);
        assert_eq!(kinds("What is the total amount?"), vec![Sum]);
    }

    #[test]
    fn like_wildcards_are_not_percent() {
        assert!(extract_constraints("x", "name LIKE '%smith%'").is_empty());
        assert_eq!(kinds("What % of users are active?"), vec![Percent]);
        assert_eq!(kinds("Which stores grew 50% or more?"), vec![Percent]);
    }

    #[test]
    fn evidence_participates() {
        let got = extract_constraints("Which car is fastest?", "fastest refers to MAX(speed)");
        assert_eq!(got.iter().map(|c| c.kind).collect::<Vec<_>>(), vec![Extreme]);
    }

    #[test]
    fn duplicates_merge_triggers() {
        let got = extract_constraints("List unique and distinct names.", "");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].trigger, "unique");
        assert_eq!(got[0].also_triggered_by, vec!["distinct".to_string()]);
    }

    #[test]
    fn years_and_numbers() {
        let got = extract_constraints("Orders made in 1999 with more than 12345 items", "");
        let lits: Vec<_> = got.iter().filter_map(|c| c.literal_value()).collect();
        assert_eq!(lits, vec!["1999"]);
        // a year-looking Top-K count is not a literal requirement
        let got = extract_constraints("the top 2000 customers", "");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].limit(), Some(2000));
    }

    #[test]
    fn mapping_literals_need_term_in_question() {
        let maps: BTreeMap<String, String> =
            [("California".into(), "CA".into()), ("Mars".into(), "MR".into())].into();
        let got = literals_from_mappings("customers from california", "", &maps);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].literal_value(), Some("CA"));
        assert_eq!(got[0].trigger, "california");
    }

    #[test]
    fn every_table_phrase_fires_its_kind() {
        for rule in &rule_table().rules {
            for pat in &rule.patterns {
                let sentence = match (rule.kind, pat.capture) {
                    (TopK, _) => format!("Show the {} 4 rows.", pat.phrase),
                    (Temporal, _) => format!("Which is the {} entry by date?", pat.phrase),
                    _ => format!("Report {} for the rows.", pat.phrase),
                };
                let got = kinds(&sentence);
                assert!(got.contains(&rule.kind), "{sentence:?} gave {got:?}");
            }
        }
    }
}
