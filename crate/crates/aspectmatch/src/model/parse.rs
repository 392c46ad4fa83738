//! Tolerant parsing of free-form model output into canonical triplet sets,
//! and the inverse serialization.
//!
//! The grammar is deliberately forgiving: models wrap their answers in prose,
//! drift between braces and parentheses, and quote fields inconsistently.
//! Anything bracket-delimited with the right field count is extracted;
//! everything else is skipped with a warning, never a hard failure.

use serde::Serialize;

use super::{AspectClass, AspectTriplet, Task, TripletSet};

/// A non-fatal problem encountered while parsing one prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ParseWarning {
    /// A closed bracket group that did not yield a valid triplet
    /// (wrong field count, unknown class, or empty field).
    SkippedGroup { snippet: String },
    /// An exact duplicate triplet was collapsed.
    DuplicateTriplet { phrase: String },
}

/// Outcome of parsing one raw prediction. Always produced; parsing is total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsedPrediction {
    pub triplets: TripletSet,
    pub warnings: Vec<ParseWarning>,
    /// The model asserted there is no mismatch (a standalone `None` token and
    /// no parseable group).
    pub asserted_none: bool,
    /// Nothing could be extracted and no `None` assertion was found. Scores
    /// identically to an empty set; tracked separately for reporting.
    pub unparseable: bool,
}

/// Parses arbitrary model output into a canonical [`TripletSet`].
///
/// Extracts every `{...}` or `(...)` group containing 2 (MD) or 3 (MD&C)
/// comma-separated fields. Fields may be single- or double-quoted (backslash
/// escapes honored); class labels match case-insensitively. Groups that do
/// not fit are skipped with a warning and exact duplicates are collapsed.
pub fn parse_prediction_text(raw: &str, task: Task) -> ParsedPrediction {
    let chars: Vec<char> = raw.chars().collect();
    let mut triplets: Vec<AspectTriplet> = Vec::new();
    let mut warnings = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '{' | '(' => match parse_group(&chars, i) {
                Some((fields, end)) => match fields_to_triplet(&fields, task) {
                    Some(triplet) => {
                        triplets.push(triplet);
                        i = end + 1;
                    }
                    None => {
                        warnings.push(ParseWarning::SkippedGroup {
                            snippet: snippet(&chars, i, end),
                        });
                        i += 1;
                    }
                },
                // No closer before end of input: not a group at all.
                None => i += 1,
            },
            _ => i += 1,
        }
    }

    let extracted = triplets.len();
    let set = TripletSet::new(triplets);
    for _ in set.len()..extracted {
        warnings.push(ParseWarning::DuplicateTriplet {
            phrase: String::from("exact duplicate triplet collapsed"),
        });
    }

    let (asserted_none, unparseable) = if set.is_empty() {
        let none = has_none_token(raw);
        (none, !none)
    } else {
        (false, false)
    };

    ParsedPrediction {
        triplets: set,
        warnings,
        asserted_none,
        unparseable,
    }
}

fn snippet(chars: &[char], start: usize, end: usize) -> String {
    let slice: String = chars[start..=end.min(chars.len() - 1)].iter().collect();
    if slice.chars().count() > 60 {
        let mut s: String = slice.chars().take(57).collect();
        s.push_str("...");
        s
    } else {
        slice
    }
}

/// Attempts to read a whole group starting at the opener index. Returns the
/// field contents and the index of the closing bracket, or `None` if the
/// group never closes.
fn parse_group(chars: &[char], opener: usize) -> Option<(Vec<String>, usize)> {
    let closer = if chars[opener] == '{' { '}' } else { ')' };
    let mut fields = Vec::new();
    let mut i = opener + 1;
    loop {
        let (content, end) = parse_field(chars, i, closer)?;
        fields.push(content);
        if chars[end] == ',' {
            i = end + 1;
        } else {
            return Some((fields, end));
        }
    }
}

/// Parses one field starting at `i`. Returns the field content and the index
/// of the terminator (a comma or the closer), or `None` when the input ends
/// before either appears.
fn parse_field(chars: &[char], mut i: usize, closer: char) -> Option<(String, usize)> {
    let n = chars.len();
    while i < n && chars[i].is_whitespace() {
        i += 1;
    }
    let start = i;
    if i < n && (chars[i] == '"' || chars[i] == '\'') {
        if let Some((content, after_quote)) = parse_quoted(chars, i) {
            let mut k = after_quote;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            if k < n && (chars[k] == ',' || chars[k] == closer) {
                return Some((content, k));
            }
            // The quoted reading does not line up with a field boundary;
            // fall through and treat the field as raw text.
        }
    }
    let mut j = start;
    while j < n && chars[j] != ',' && chars[j] != closer {
        j += 1;
    }
    if j >= n {
        return None;
    }
    let mut content: String = chars[start..j].iter().collect();
    content.truncate(content.trim_end().len());
    let inner: Vec<char> = content.chars().collect();
    if inner.len() >= 2 && inner[0] == inner[inner.len() - 1] && (inner[0] == '"' || inner[0] == '\'')
    {
        content = inner[1..inner.len() - 1].iter().collect::<String>().trim().to_string();
    }
    Some((content, j))
}

/// Reads a quoted string starting at the opening quote. Returns the unescaped
/// content and the index just past the closing quote.
fn parse_quoted(chars: &[char], open: usize) -> Option<(String, usize)> {
    let quote = chars[open];
    let mut out = String::new();
    let mut j = open + 1;
    let n = chars.len();
    while j < n {
        let c = chars[j];
        if c == '\\' && j + 1 < n {
            let next = chars[j + 1];
            match next {
                '\'' | '"' | '\\' => out.push(next),
                other => {
                    out.push('\\');
                    out.push(other);
                }
            }
            j += 2;
        } else if c == quote {
            return Some((out, j + 1));
        } else {
            out.push(c);
            j += 1;
        }
    }
    None
}

fn fields_to_triplet(fields: &[String], task: Task) -> Option<AspectTriplet> {
    if fields.len() != task.expected_fields() {
        return None;
    }
    let class: AspectClass = fields[0].parse().ok()?;
    let correction = match task {
        Task::Md => None,
        Task::Mdc => Some(fields[2].trim().to_string()),
    };
    AspectTriplet::new(class, fields[1].trim(), correction).ok()
}

/// True when the text contains a standalone `none` token (split on
/// non-alphanumeric characters, case-insensitive).
fn has_none_token(raw: &str) -> bool {
    raw.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .any(|token| token == "none")
}

/// Renders a set in the canonical text form: `None` for the empty set,
/// otherwise one `{Class, "phrase"[, "correction"]}` group per triplet in
/// canonical order, double-quoted with `"` and `\` escaped.
///
/// Round-trip law: `parse_prediction_text(serialize_triplet_set(s, t), t)`
/// returns `s` with zero warnings.
pub fn serialize_triplet_set(set: &TripletSet, task: Task) -> String {
    if set.is_empty() {
        return "None".to_string();
    }
    let groups: Vec<String> = set
        .iter()
        .map(|t| {
            let mut g = format!("{{{}, {}", t.class.name(), quoted(&t.phrase));
            if task == Task::Mdc {
                if let Some(correction) = &t.correction {
                    g.push_str(", ");
                    g.push_str(&quoted(correction));
                }
            }
            g.push('}');
            g
        })
        .collect();
    groups.join(" ")
}

fn quoted(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}
