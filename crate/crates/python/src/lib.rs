//! Python bindings over the core toolkit. Structured results cross the
//! boundary as JSON strings so the Python side stays dependency-free.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use vlmkit::curate;
use vlmkit::eval;
use vlmkit::layout;
use vlmkit::mixture;
use vlmkit::record::SampleRecord;
use vlmkit::synth;
use vlmkit::tokenize;
use vlmkit::transcript;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(err)
}

fn record_from_json(json: &str) -> PyResult<SampleRecord> {
    serde_json::from_str(json).map_err(err)
}

/// Tokenization plan for one image, as JSON. Strategy is one of
/// "dynamic_res", "dynamic_s2", "multi_crop", "multi_crop_s2".
#[pyfunction]
#[pyo3(signature = (width, height, strategy, max_tokens=None, min_patches=None, max_patches=None))]
fn plan_patches(
    width: u32,
    height: u32,
    strategy: &str,
    max_tokens: Option<u32>,
    min_patches: Option<u32>,
    max_patches: Option<u32>,
) -> PyResult<String> {
    let need_tokens =
        || max_tokens.ok_or_else(|| err(format!("{strategy} needs max_tokens")));
    let cfg = match strategy {
        "dynamic_res" => tokenize::StrategyConfig::dynamic_res(
            min_patches.ok_or_else(|| err("dynamic_res needs min_patches"))?,
            max_patches.ok_or_else(|| err("dynamic_res needs max_patches"))?,
        ),
        "dynamic_s2" => tokenize::StrategyConfig::dynamic_s2(need_tokens()?),
        "multi_crop" => tokenize::StrategyConfig::multi_crop(need_tokens()?),
        "multi_crop_s2" => tokenize::StrategyConfig::multi_crop_s2(need_tokens()?),
        other => return Err(err(format!("unknown strategy {other}"))),
    };
    let plan = tokenize::plan_patches(width, height, &cfg).map_err(err)?;
    to_json(&plan)
}

/// Fused-layout accounting for n text tokens plus the given plans (JSON
/// array of PatchPlan), image placeholders appended after the text.
#[pyfunction]
#[pyo3(signature = (text_tokens, plans_json, marker_overhead=layout::DEFAULT_MARKER_OVERHEAD))]
fn assemble_sequence(text_tokens: u32, plans_json: &str, marker_overhead: u32) -> PyResult<String> {
    let plans: Vec<tokenize::PatchPlan> = serde_json::from_str(plans_json).map_err(err)?;
    let mut stream = layout::TokenStream::text_only(text_tokens);
    for i in 0..plans.len() {
        stream.items.push(layout::StreamItem::ImagePlaceholder(i));
    }
    let fused = layout::assemble_sequence(&stream, &plans, marker_overhead).map_err(err)?;
    to_json(&fused)
}

/// Lint a record (JSON) against the defect catalogue; returns a JSON array
/// of issues.
#[pyfunction]
fn lint_record(record_json: &str) -> PyResult<String> {
    let rec = record_from_json(record_json)?;
    let issues = curate::lint_record(&rec, &curate::known_image_tags(&rec));
    to_json(&issues)
}

/// Apply automatic fixes; returns {"record": ..., "actions": [...]} JSON.
#[pyfunction]
fn repair_record(record_json: &str) -> PyResult<String> {
    let rec = record_from_json(record_json)?;
    let (fixed, actions) = curate::repair_record(&rec, &curate::known_image_tags(&rec));
    let notes: Vec<String> = actions.iter().map(|a| format!("{a:?}")).collect();
    to_json(&serde_json::json!({ "record": fixed, "actions": notes }))
}

/// Render a record (JSON) into its transcript wire form.
#[pyfunction]
fn render_sample(record_json: &str) -> PyResult<String> {
    transcript::render_sample(&record_from_json(record_json)?).map_err(err)
}

/// Parse raw model output into mode/think/final plus issues, as JSON.
#[pyfunction]
fn parse_transcript(raw: &str) -> PyResult<String> {
    to_json(&transcript::parse_transcript(raw))
}

/// Majority-vote over candidate answers; returns the verdict as JSON.
#[pyfunction]
#[pyo3(signature = (candidates, threshold=0.5))]
fn majority_vote(candidates: Vec<String>, threshold: f64) -> PyResult<String> {
    let verdict = curate::majority_vote(&candidates, curate::default_normalizer, threshold)
        .map_err(err)?;
    to_json(&verdict)
}

/// Mixture manifest (JSON) from a TOML config string.
#[pyfunction]
fn plan_mixture(config_toml: &str) -> PyResult<String> {
    let cfg = mixture::parse_config(config_toml).map_err(err)?;
    let mut manifest = mixture::plan_mixture(&cfg.categories).map_err(err)?;
    if cfg.default_avg_tokens.is_some() || manifest.specs.iter().all(|s| s.avg_tokens.is_some()) {
        manifest.total_tokens =
            Some(mixture::estimate_tokens(&manifest, cfg.default_avg_tokens).map_err(err)?);
    }
    to_json(&manifest)
}

/// Score one prediction. Reference is gold text, or "x,y,w,h" for
/// point_in_box. Returns (score, parse_failure).
#[pyfunction]
fn score_sample(task_kind: &str, prediction: &str, reference: &str) -> PyResult<(u8, bool)> {
    let kind = match task_kind {
        "exact_match" => eval::TaskKind::ExactMatch,
        "multiple_choice" => eval::TaskKind::MultipleChoice,
        "relaxed_numeric" => eval::TaskKind::RelaxedNumeric,
        "point_in_box" => eval::TaskKind::PointInBox,
        other => return Err(err(format!("unknown task kind {other}"))),
    };
    let reference = if kind == eval::TaskKind::PointInBox {
        let parts: Vec<f64> = reference
            .split(',')
            .map(|p| p.trim().parse().map_err(err))
            .collect::<PyResult<_>>()?;
        if parts.len() != 4 {
            return Err(err("point_in_box reference wants x,y,w,h"));
        }
        eval::Reference::Rect(
            vlmkit::geometry::NormRect::new(parts[0], parts[1], parts[2], parts[3]).map_err(err)?,
        )
    } else {
        eval::Reference::Text(reference.to_string())
    };
    let scored = eval::score_sample(kind, prediction, &reference);
    Ok((scored.score, scored.parse_failure))
}

/// Frontier indices (sorted by cost) for a JSON array of
/// {"label", "cost", "accuracy"} points.
#[pyfunction]
fn compute_pareto(points_json: &str) -> PyResult<Vec<usize>> {
    let points: Vec<eval::ParetoPoint> = serde_json::from_str(points_json).map_err(err)?;
    Ok(eval::compute_pareto(&points))
}

/// Seeded scrambled-captions record from a JSON array of
/// {"image", "caption"} items.
#[pyfunction]
#[pyo3(signature = (captions_json, seed, group_size=5, insert_prob=0.2))]
fn synth_scrambled(
    captions_json: &str,
    seed: u64,
    group_size: usize,
    insert_prob: f64,
) -> PyResult<String> {
    let items: Vec<synth::CaptionedImage> = serde_json::from_str(captions_json).map_err(err)?;
    let cfg = synth::SynthConfig { group_size, insert_prob, seed, ..Default::default() };
    let rec = synth::synth_scrambled(&items, &cfg).map_err(err)?;
    rec.to_json_line().map_err(err)
}

/// Seeded caption-matching record from the same captions format.
#[pyfunction]
fn synth_caption_match(captions_json: &str, seed: u64) -> PyResult<String> {
    let items: Vec<synth::CaptionedImage> = serde_json::from_str(captions_json).map_err(err)?;
    let rec = synth::synth_caption_match(&items, &synth::SynthConfig::with_seed(seed))
        .map_err(err)?;
    rec.to_json_line().map_err(err)
}

#[pymodule]
fn vlmkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(plan_patches, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(lint_record, m)?)?;
    m.add_function(wrap_pyfunction!(repair_record, m)?)?;
    m.add_function(wrap_pyfunction!(render_sample, m)?)?;
    m.add_function(wrap_pyfunction!(parse_transcript, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(plan_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(score_sample, m)?)?;
    m.add_function(wrap_pyfunction!(compute_pareto, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scrambled, m)?)?;
    m.add_function(wrap_pyfunction!(synth_caption_match, m)?)?;
    Ok(())
}
