//! Timed benchmark runs and macro aggregation.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{score_sample, EvalSample, GenConfig, ModelClient, ModelRequest};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenSource {
    /// Count reported by the endpoint.
    Server,
    /// Fallback estimate computed by the harness.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub sample_id: String,
    pub benchmark: String,
    pub prediction: String,
    pub score: u8,
    pub latency_ms: f64,
    pub output_tokens: u64,
    pub token_source: TokenSource,
    /// Present when the sample was scored 0 for an out-of-band reason
    /// (transport failure, unparseable prediction).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Abort the run on the first transport failure instead of recording a
    /// flagged zero.
    pub fail_fast: bool,
}

/// Whitespace-token fallback when the endpoint does not report a count.
pub fn estimate_output_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Drive `subset_size` seeded-sampled benchmark samples through the client,
/// strictly one request in flight, timing each around the full round trip.
pub fn run_benchmark(
    client: &dyn ModelClient,
    samples: &[EvalSample],
    gen: &GenConfig,
    subset_size: usize,
    seed: u64,
    opts: &RunOptions,
) -> Result<Vec<EvalResult>> {
    gen.validate()?;
    if subset_size > samples.len() {
        return Err(Error::Input(format!(
            "subset size {} exceeds the {} available samples",
            subset_size,
            samples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, samples.len(), subset_size);

    let mut results = Vec::with_capacity(subset_size);
    for idx in picked {
        let sample = &samples[idx];
        sample.validate()?;
        let req = ModelRequest {
            prompt: sample.prompt.clone(),
            images: sample.images.clone(),
            max_output_tokens: gen.max_output_tokens,
            temperature: gen.temperature,
        };
        let started = Instant::now();
        let outcome = client.generate(&req);
        let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
        let result = match outcome {
            Ok(resp) => {
                let (output_tokens, token_source) = match resp.output_tokens {
                    Some(n) => (n, TokenSource::Server),
                    None => (estimate_output_tokens(&resp.text), TokenSource::Estimated),
                };
                let scored = score_sample(sample.task_kind, &resp.text, &sample.reference);
                EvalResult {
                    sample_id: sample.id.clone(),
                    benchmark: sample.benchmark.clone(),
                    prediction: resp.text,
                    score: scored.score,
                    latency_ms,
                    output_tokens,
                    token_source,
                    flag: scored.parse_failure.then(|| "parse_failure".to_string()),
                }
            }
            Err(e @ Error::Transport(_)) if !opts.fail_fast => EvalResult {
                sample_id: sample.id.clone(),
                benchmark: sample.benchmark.clone(),
                prediction: String::new(),
                score: 0,
                latency_ms,
                output_tokens: 0,
                token_source: TokenSource::Estimated,
                flag: Some(format!("transport: {e}")),
            },
            Err(e) => return Err(e),
        };
        results.push(result);
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub benchmark: String,
    pub samples: usize,
    /// Percent correct, 0..=100.
    pub accuracy: f64,
    pub mean_latency_ms: f64,
    pub mean_output_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub benchmarks: Vec<BenchmarkSummary>,
    /// Unweighted mean over per-benchmark accuracies.
    pub macro_accuracy: f64,
    pub macro_latency_ms: f64,
    pub macro_output_tokens: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Per-benchmark means first, then an unweighted mean across benchmarks.
/// Benchmarks in `expected` that contributed no results are excluded with a
/// warning rather than dragging the macro average.
pub fn aggregate(results: &[EvalResult], expected: &[String]) -> Summary {
    let mut groups: BTreeMap<&str, Vec<&EvalResult>> = BTreeMap::new();
    for r in results {
        groups.entry(&r.benchmark).or_default().push(r);
    }
    let mut warnings: Vec<String> = expected
        .iter()
        .filter(|name| !groups.contains_key(name.as_str()))
        .map(|name| format!("benchmark {name} has no results; excluded from the macro average"))
        .collect();
    let estimated = results
        .iter()
        .filter(|r| r.token_source == TokenSource::Estimated)
        .count();
    if estimated > 0 {
        warnings.push(format!(
            "{estimated} of {} results use estimated output-token counts",
            results.len()
        ));
    }

    let benchmarks: Vec<BenchmarkSummary> = groups
        .iter()
        .map(|(name, rs)| {
            let n = rs.len() as f64;
            BenchmarkSummary {
                benchmark: name.to_string(),
                samples: rs.len(),
                accuracy: 100.0 * rs.iter().map(|r| r.score as f64).sum::<f64>() / n,
                mean_latency_ms: rs.iter().map(|r| r.latency_ms).sum::<f64>() / n,
                mean_output_tokens: rs.iter().map(|r| r.output_tokens as f64).sum::<f64>() / n,
            }
        })
        .collect();
    let k = benchmarks.len() as f64;
    let (macro_accuracy, macro_latency_ms, macro_output_tokens) = if benchmarks.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            benchmarks.iter().map(|b| b.accuracy).sum::<f64>() / k,
            benchmarks.iter().map(|b| b.mean_latency_ms).sum::<f64>() / k,
            benchmarks.iter().map(|b| b.mean_output_tokens).sum::<f64>() / k,
        )
    };
    Summary {
        benchmarks,
        macro_accuracy,
        macro_latency_ms,
        macro_output_tokens,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::eval::{MockModelClient, MockReply, Reference, TaskKind};

    fn samples(n: usize, benchmark: &str) -> Vec<EvalSample> {
        (0..n)
            .map(|i| EvalSample {
                id: format!("{benchmark}-{i}"),
                benchmark: benchmark.into(),
                task_kind: TaskKind::ExactMatch,
                prompt: format!("question {i}"),
                images: vec![],
                reference: Reference::Text("yes".into()),
            })
            .collect()
    }

    fn yes_client() -> MockModelClient {
        MockModelClient::new(Duration::ZERO, vec![MockReply::text("yes", 3)])
    }

    #[test]
    fn subset_is_deterministic_and_duplicate_free() {
        let pool = samples(2000, "bench");
        let gen = GenConfig::default();
        let run = |seed| {
            run_benchmark(&yes_client(), &pool, &gen, 100, seed, &RunOptions::default()).unwrap()
        };
        let a = run(9);
        let b = run(9);
        assert_eq!(a.len(), 100);
        let ids: Vec<&str> = a.iter().map(|r| r.sample_id.as_str()).collect();
        assert_eq!(ids, b.iter().map(|r| r.sample_id.as_str()).collect::<Vec<_>>());
        let mut unique = ids.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), 100);
        let c = run(10);
        assert_ne!(
            ids,
            c.iter().map(|r| r.sample_id.as_str()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn subset_zero_and_oversized_subset() {
        let pool = samples(5, "bench");
        let gen = GenConfig::default();
        let empty =
            run_benchmark(&yes_client(), &pool, &gen, 0, 1, &RunOptions::default()).unwrap();
        assert!(empty.is_empty());
        assert!(run_benchmark(&yes_client(), &pool, &gen, 6, 1, &RunOptions::default()).is_err());
    }

    #[test]
    fn transport_failure_becomes_flagged_zero() {
        let pool = samples(4, "bench");
        let mock = MockModelClient::new(
            Duration::ZERO,
            vec![MockReply::text("yes", 3), MockReply::failure()],
        );
        let results =
            run_benchmark(&mock, &pool, &GenConfig::default(), 4, 2, &RunOptions::default())
                .unwrap();
        assert_eq!(results.len(), 4);
        let failed: Vec<_> = results.iter().filter(|r| r.flag.is_some()).collect();
        assert_eq!(failed.len(), 2);
        assert!(failed.iter().all(|r| r.score == 0));
        assert!(failed[0].flag.as_deref().unwrap().starts_with("transport:"));

        let fail_fast = RunOptions { fail_fast: true };
        assert!(run_benchmark(&mock, &pool, &GenConfig::default(), 4, 2, &fail_fast).is_err());
    }

    #[test]
    fn missing_server_count_falls_back_to_estimate() {
        let pool = samples(1, "bench");
        let mock = MockModelClient::new(
            Duration::ZERO,
            vec![MockReply { text: "well yes maybe".into(), output_tokens: None, fail: false }],
        );
        let results =
            run_benchmark(&mock, &pool, &GenConfig::default(), 1, 0, &RunOptions::default())
                .unwrap();
        assert_eq!(results[0].output_tokens, 3);
        assert_eq!(results[0].token_source, TokenSource::Estimated);
    }

    #[test]
    fn latency_covers_the_mock_delay() {
        let pool = samples(2, "bench");
        let mock = MockModelClient::new(
            Duration::from_millis(20),
            vec![MockReply::text("yes", 3)],
        );
        let results =
            run_benchmark(&mock, &pool, &GenConfig::default(), 2, 0, &RunOptions::default())
                .unwrap();
        for r in &results {
            assert!(r.latency_ms >= 20.0, "latency {} below the delay", r.latency_ms);
            assert!(r.latency_ms < 200.0, "latency {} wildly above the delay", r.latency_ms);
        }
        assert_eq!(mock.max_in_flight(), 1);
    }

    fn result(benchmark: &str, score: u8, latency: f64, tokens: u64) -> EvalResult {
        EvalResult {
            sample_id: "s".into(),
            benchmark: benchmark.into(),
            prediction: String::new(),
            score,
            latency_ms: latency,
            output_tokens: tokens,
            token_source: TokenSource::Server,
            flag: None,
        }
    }

    #[test]
    fn aggregate_macro_means() {
        let results = vec![
            result("a", 1, 100.0, 10),
            result("a", 1, 100.0, 10),  // a: 100% on 2 samples
            result("b", 1, 300.0, 30),
            result("b", 0, 300.0, 30),
            result("b", 0, 300.0, 30),
            result("b", 0, 300.0, 30),
            result("b", 0, 300.0, 30),
            result("b", 1, 300.0, 30),
            result("b", 0, 300.0, 30),
            result("b", 0, 300.0, 30),  // b: 25% on 8 samples
        ];
        let summary = aggregate(&results, &[]);
        assert_eq!(summary.benchmarks.len(), 2);
        assert_eq!(summary.benchmarks[0].accuracy, 100.0);
        assert_eq!(summary.benchmarks[1].accuracy, 25.0);
        // Macro mean ignores group sizes; micro would be 40%.
        assert_eq!(summary.macro_accuracy, 62.5);
        assert_eq!(summary.macro_latency_ms, 200.0);
        assert_eq!(summary.macro_output_tokens, 20.0);
    }

    #[test]
    fn aggregate_two_benchmark_example() {
        let results = vec![
            result("x", 1, 0.0, 0),
            result("x", 1, 0.0, 0),
            result("x", 0, 0.0, 0),
            result("x", 1, 0.0, 0),
            result("x", 1, 0.0, 0),  // 80%
            result("y", 1, 0.0, 0),
            result("y", 1, 0.0, 0),
            result("y", 1, 0.0, 0),
            result("y", 0, 0.0, 0),
            result("y", 0, 0.0, 0),  // 60%
        ];
        assert_eq!(aggregate(&results, &[]).macro_accuracy, 70.0);
    }

    #[test]
    fn aggregate_single_benchmark_equals_its_mean() {
        let results = vec![result("only", 1, 50.0, 5), result("only", 0, 70.0, 7)];
        let summary = aggregate(&results, &[]);
        assert_eq!(summary.macro_accuracy, 50.0);
        assert_eq!(summary.macro_latency_ms, 60.0);
    }

    #[test]
    fn empty_expected_group_warns_and_is_excluded() {
        let results = vec![result("a", 1, 0.0, 0)];
        let summary = aggregate(&results, &["a".into(), "ghost".into()]);
        assert_eq!(summary.benchmarks.len(), 1);
        assert_eq!(summary.macro_accuracy, 100.0);
        assert!(summary.warnings.iter().any(|w| w.contains("ghost")));
    }
}
