//! The pipeline subcommands: generate, filter, select-queries, rank.

use aspectmatch::pipeline::{
    debias_filter, graph_to_caption, parse_caption_to_graph, rank_candidates, replace_nodes,
    AspectGraph, FilterCandidate, FilterConfig, HttpLlmClient, HttpScorerClient, ImageCandidate,
    LlmClient, PipelineConfig, PipelineError, PromptTemplates, RankWeights, ReplacementLog,
    ScorerKind, ScorerSet, SizeConstraints,
};
use serde::{Deserialize, Serialize};

use crate::io::{read_json, read_jsonl, write_jsonl_atomic};
use crate::mock::MockScript;
use crate::{CliError, FilterArgs, GenerateArgs, RankArgs, SelectQueriesArgs};

#[derive(Deserialize)]
struct CaptionRow {
    id: String,
    caption: String,
    #[serde(default)]
    image: Option<String>,
}

#[derive(Serialize)]
struct GeneratedRow {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    image: Option<String>,
    original_caption: String,
    mutated_caption: String,
    graph: AspectGraph,
    replacements: ReplacementLog,
    provenance: Provenance,
}

#[derive(Serialize)]
struct Provenance {
    seed: u64,
    llm_version: String,
    template_hash: String,
}

fn map_pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Client(err) => CliError::Provider(err.to_string()),
        PipelineError::Input(m) => CliError::Schema(m),
        other => CliError::Provider(other.to_string()),
    }
}

pub fn generate(args: GenerateArgs) -> Result<u8, CliError> {
    let rows: Vec<CaptionRow> = read_jsonl(&args.input)?;
    let templates = match &args.templates {
        Some(dir) => PromptTemplates::load_dir(dir).map_err(map_pipeline_error)?,
        None => PromptTemplates::default(),
    };
    let llm: Box<dyn LlmClient> = match (&args.mock, &args.llm_endpoint) {
        (Some(path), _) => Box::new(MockScript::load(path)?.llm_client()?),
        (None, Some(endpoint)) => Box::new(HttpLlmClient::new(endpoint.clone(), None)),
        (None, None) => Box::new(
            HttpLlmClient::from_env().map_err(|e| CliError::Provider(e.to_string()))?,
        ),
    };
    let cfg = PipelineConfig::default();
    let template_hash = templates.digest();

    let mut out = Vec::with_capacity(rows.len());
    for (index, row) in rows.iter().enumerate() {
        // one derived seed per record keeps runs reproducible line by line
        let seed = args.seed.wrapping_add(index as u64);
        let graph = parse_caption_to_graph(&row.caption, llm.as_ref(), &templates, &cfg)
            .map_err(map_pipeline_error)?;
        let (mutated, replacements) = replace_nodes(
            &graph,
            args.replacements,
            llm.as_ref(),
            &templates,
            &cfg,
            seed,
        )
        .map_err(map_pipeline_error)?;
        let caption = graph_to_caption(&mutated, llm.as_ref(), &templates, &cfg)
            .map_err(map_pipeline_error)?;
        out.push(GeneratedRow {
            id: row.id.clone(),
            image: row.image.clone(),
            original_caption: row.caption.clone(),
            mutated_caption: caption,
            graph: mutated,
            replacements,
            provenance: Provenance {
                seed,
                llm_version: llm.version(),
                template_hash: template_hash.clone(),
            },
        });
    }
    write_jsonl_atomic(&args.out, &out)?;
    println!("generated {} mutated captions -> {}", out.len(), args.out.display());
    Ok(0)
}

#[derive(Serialize)]
struct RejectedRow<'a> {
    #[serde(flatten)]
    candidate: &'a FilterCandidate,
    reason: &'a aspectmatch::pipeline::RejectReason,
}

pub fn filter(args: FilterArgs) -> Result<u8, CliError> {
    let candidates: Vec<FilterCandidate> = read_jsonl(&args.input)?;
    let cfg: FilterConfig = match &args.filter_config {
        Some(path) => read_json(path)?,
        None => FilterConfig::default(),
    };
    let scorers = build_scorers(&args)?;
    let outcome = debias_filter(&candidates, &cfg, &scorers).map_err(map_pipeline_error)?;

    write_jsonl_atomic(&args.out, &outcome.kept)?;
    if let Some(path) = &args.rejected {
        let rows: Vec<RejectedRow> = outcome
            .rejected
            .iter()
            .map(|(candidate, reason)| RejectedRow { candidate, reason })
            .collect();
        write_jsonl_atomic(path, &rows)?;
    }
    println!(
        "kept {} of {} candidates ({} rejected)",
        outcome.kept.len(),
        candidates.len(),
        outcome.rejected.len()
    );
    Ok(0)
}

fn build_scorers(args: &FilterArgs) -> Result<ScorerSet, CliError> {
    if let Some(path) = &args.mock {
        return MockScript::load(path)?.scorer_set();
    }
    let mut set = ScorerSet::default();
    for spec in &args.scorer_endpoint {
        let (kind, url) = spec.split_once('=').ok_or_else(|| {
            CliError::Schema(format!(
                "scorer endpoint {spec:?} must be kind=url (kinds: vera, grammar, clip)"
            ))
        })?;
        let client = |k| Box::new(HttpScorerClient::new(k, url.to_string(), None));
        match kind {
            "vera" => set.vera = Some(client(ScorerKind::Vera)),
            "grammar" => set.grammar = Some(client(ScorerKind::Grammar)),
            "clip" => set.clip = Some(client(ScorerKind::Clip)),
            other => {
                return Err(CliError::Schema(format!("unknown scorer kind {other:?}")));
            }
        }
    }
    Ok(set)
}

#[derive(Deserialize)]
struct QueryRow {
    query: String,
    tree: String,
}

pub fn select_queries(args: SelectQueriesArgs) -> Result<u8, CliError> {
    let rows: Vec<QueryRow> = read_jsonl(&args.input)?;
    let parsed: Vec<(String, String)> =
        rows.into_iter().map(|r| (r.query, r.tree)).collect();
    let outcome = aspectmatch::pipeline::select_queries(&parsed, args.min_depth);
    write_jsonl_atomic(&args.out, &outcome.selected)?;
    if let Some(path) = &args.rejected {
        write_jsonl_atomic(path, &outcome.rejected)?;
    }
    println!(
        "selected {} of {} queries ({} malformed)",
        outcome.selected.len(),
        parsed.len(),
        outcome.rejected.len()
    );
    Ok(0)
}

pub fn rank(args: RankArgs) -> Result<u8, CliError> {
    let candidates: Vec<ImageCandidate> = read_jsonl(&args.input)?;
    let ranked = rank_candidates(
        &candidates,
        &RankWeights {
            clip: args.clip_weight,
            aesthetic: args.aesthetic_weight,
        },
        &SizeConstraints {
            min_width: args.min_width,
            min_height: args.min_height,
        },
    );
    write_jsonl_atomic(&args.out, &ranked)?;
    println!("ranked {} of {} candidates", ranked.len(), candidates.len());
    Ok(0)
}
