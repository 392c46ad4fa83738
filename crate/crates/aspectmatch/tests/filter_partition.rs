//! The debias filter over a mixed 10-candidate batch with scripted scorers;
//! the kept/rejected partition is frozen from a hand evaluation of the rules.

use aspectmatch::pipeline::{
    debias_filter, FilterCandidate, FilterConfig, RejectReason, ScorerKind, ScorerSet,
    ScriptedScorerClient,
};

fn candidate(i: usize) -> FilterCandidate {
    FilterCandidate {
        id: format!("f{i:02}"),
        original_caption: format!("orig-{i:02}"),
        mutated_caption: format!("mut-{i:02}"),
        image: format!("img-{i:02}"),
    }
}

/// (vera P/N, grammar P/N, clip P/N) per candidate.
type Scores = ((f64, f64), (f64, f64), (f64, f64));

fn scripted(rows: &[(usize, Scores)]) -> ScorerSet {
    let mut vera = ScriptedScorerClient::new(ScorerKind::Vera);
    let mut grammar = ScriptedScorerClient::new(ScorerKind::Grammar);
    let mut clip = ScriptedScorerClient::new(ScorerKind::Clip);
    for (i, ((vp, vn), (gp, gn), (cp, cn))) in rows {
        let orig = format!("orig-{i:02}");
        let mutated = format!("mut-{i:02}");
        let image = format!("img-{i:02}");
        vera = vera.with_score(&orig, None, *vp).with_score(&mutated, None, *vn);
        grammar = grammar
            .with_score(&orig, None, *gp)
            .with_score(&mutated, None, *gn);
        clip = clip
            .with_score(&orig, Some(&image), *cp)
            .with_score(&mutated, Some(&image), *cn);
    }
    ScorerSet {
        vera: Some(Box::new(vera)),
        grammar: Some(Box::new(grammar)),
        clip: Some(Box::new(clip)),
    }
}

#[test]
fn ten_candidate_partition_matches_the_rule_oracle() {
    // rules: vera N >= 0.5, vera gap <= 0.4; grammar N >= 0.6;
    //        clip N in [0.2, 0.9], clip gap <= 0.15
    let cfg = FilterConfig {
        vera_enabled: true,
        min_vera: 0.5,
        max_vera_gap: Some(0.4),
        grammar_enabled: true,
        min_grammar: 0.6,
        max_grammar_gap: None,
        clip_enabled: true,
        clip_min: 0.2,
        clip_max: 0.9,
        max_clip_gap: Some(0.15),
    };
    let rows: Vec<(usize, Scores)> = vec![
        (1, ((0.9, 0.8), (0.9, 0.9), (0.5, 0.45))),   // kept
        (2, ((0.9, 0.4), (0.9, 0.9), (0.5, 0.45))),   // vera score
        (3, ((0.95, 0.5), (0.9, 0.9), (0.5, 0.45))),  // vera gap 0.45
        (4, ((0.8, 0.7), (0.9, 0.5), (0.5, 0.45))),   // grammar score
        (5, ((0.8, 0.7), (0.9, 0.9), (0.95, 0.95))),  // clip above band
        (6, ((0.8, 0.7), (0.9, 0.9), (0.5, 0.1))),    // clip below band
        (7, ((0.8, 0.7), (0.9, 0.9), (0.7, 0.5))),    // clip gap 0.2
        (8, ((0.9, 0.85), (0.95, 0.9), (0.6, 0.55))), // kept
        (9, ((0.6, 0.55), (0.7, 0.65), (0.3, 0.28))), // kept
        (10, ((0.9, 0.3), (0.9, 0.9), (0.5, 0.45))),  // vera score
    ];
    let candidates: Vec<FilterCandidate> = rows.iter().map(|(i, _)| candidate(*i)).collect();
    let scorers = scripted(&rows);

    let outcome = debias_filter(&candidates, &cfg, &scorers).unwrap();
    let kept: Vec<&str> = outcome.kept.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(kept, vec!["f01", "f08", "f09"]);

    let rejected: Vec<(&str, &RejectReason)> = outcome
        .rejected
        .iter()
        .map(|(c, r)| (c.id.as_str(), r))
        .collect();
    let expect = [
        ("f02", "VeraScore"),
        ("f03", "VeraGap"),
        ("f04", "GrammarScore"),
        ("f05", "ClipScore"),
        ("f06", "ClipScore"),
        ("f07", "ClipGap"),
        ("f10", "VeraScore"),
    ];
    assert_eq!(rejected.len(), expect.len());
    for ((id, reason), (want_id, want_rule)) in rejected.iter().zip(expect) {
        assert_eq!(*id, want_id);
        let rule = match reason {
            RejectReason::VeraScore { .. } => "VeraScore",
            RejectReason::VeraGap { .. } => "VeraGap",
            RejectReason::GrammarScore { .. } => "GrammarScore",
            RejectReason::GrammarGap { .. } => "GrammarGap",
            RejectReason::ClipScore { .. } => "ClipScore",
            RejectReason::ClipGap { .. } => "ClipGap",
        };
        assert_eq!(rule, want_rule, "candidate {id}");
    }

    // partition covers the input, disjoint by construction
    assert_eq!(outcome.kept.len() + outcome.rejected.len(), candidates.len());
}
