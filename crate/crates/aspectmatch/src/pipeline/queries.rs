//! Query selection by constituency-tree depth.

use serde::{Deserialize, Serialize};

/// A query that passed the depth filter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedQuery {
    pub query: String,
    pub depth: usize,
}

/// A query whose bracketed tree could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedQuery {
    pub query: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOutcome {
    pub selected: Vec<SelectedQuery>,
    pub rejected: Vec<RejectedQuery>,
}

/// Keeps the queries whose constituency tree is at least `min_depth` deep.
/// Depth counts nodes on the longest root-to-leaf path, leaf tokens included.
/// Malformed trees reject their query with a reason instead of failing the
/// batch. Monotone: raising `min_depth` never adds a query.
pub fn select_queries(parsed: &[(String, String)], min_depth: usize) -> SelectionOutcome {
    let mut selected = Vec::new();
    let mut rejected = Vec::new();
    for (query, tree) in parsed {
        match tree_depth(tree) {
            Ok(depth) => {
                if depth >= min_depth {
                    selected.push(SelectedQuery {
                        query: query.clone(),
                        depth,
                    });
                }
            }
            Err(reason) => rejected.push(RejectedQuery {
                query: query.clone(),
                reason,
            }),
        }
    }
    SelectionOutcome { selected, rejected }
}

/// Depth of one bracketed constituency tree, e.g. `(S (NP a) (VP b))` -> 3.
pub fn tree_depth(tree: &str) -> Result<usize, String> {
    let chars: Vec<char> = tree.chars().collect();
    let mut pos = 0;
    skip_ws(&chars, &mut pos);
    if pos >= chars.len() {
        return Err("empty tree".into());
    }
    let depth = parse_subtree(&chars, &mut pos)?;
    skip_ws(&chars, &mut pos);
    if pos != chars.len() {
        return Err("trailing content after the root".into());
    }
    Ok(depth)
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn parse_subtree(chars: &[char], pos: &mut usize) -> Result<usize, String> {
    skip_ws(chars, pos);
    if *pos >= chars.len() {
        return Err("unexpected end of input".into());
    }
    if chars[*pos] == ')' {
        return Err("unexpected closing bracket".into());
    }
    if chars[*pos] == '(' {
        *pos += 1;
        skip_ws(chars, pos);
        let label = read_token(chars, pos);
        if label.is_empty() {
            return Err("constituent without a label".into());
        }
        let mut max_child = 0;
        loop {
            skip_ws(chars, pos);
            if *pos >= chars.len() {
                return Err("unclosed bracket".into());
            }
            if chars[*pos] == ')' {
                *pos += 1;
                break;
            }
            max_child = max_child.max(parse_subtree(chars, pos)?);
        }
        // a childless constituent counts as a leaf (depth 1)
        Ok(1 + max_child)
    } else {
        let token = read_token(chars, pos);
        if token.is_empty() {
            return Err("unexpected character".into());
        }
        Ok(1)
    }
}

fn read_token(chars: &[char], pos: &mut usize) -> String {
    let start = *pos;
    while *pos < chars.len()
        && chars[*pos] != '('
        && chars[*pos] != ')'
        && !chars[*pos].is_whitespace()
    {
        *pos += 1;
    }
    chars[start..*pos].iter().collect()
}
