//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every exported function takes plain numbers or strings and returns a
//! JSON string, so the page needs no generated type glue beyond
//! `wasm-bindgen` itself. The same functions are callable from Rust.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use smmfit::diagnostics::recovery_report;
use smmfit::markov::{context_tuple, count_transitions, Alphabet};
use smmfit::metrics::{adjusted_rand_index, rand_index};
use smmfit::partition::PartitionLabels;
use smmfit::selection::{fit_counts, FitConfig};
use smmfit::simulate::{build_setup1, build_setup2, generate_sequence, GroundTruthSmm};
use smmfit::weights::{Distance, Kernel, WeightScheme};

#[derive(Serialize)]
struct PathPoint {
    lambda: f64,
    k: usize,
    bic: f64,
}

#[derive(Serialize)]
struct FitView {
    contexts: Vec<String>,
    truth: Vec<usize>,
    fitted: Vec<usize>,
    path: Vec<PathPoint>,
    selected: usize,
    lambda: f64,
    k: usize,
    ri: f64,
    ari: f64,
    recovered: bool,
    lambda_min: Option<f64>,
    lambda_max: Option<f64>,
    sequence_head: String,
}

fn error_json(msg: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": msg.to_string() }).to_string()
}

fn scheme_from(weights: &str, knn: usize, phi: f64) -> Result<WeightScheme, String> {
    match weights {
        "uniform" => Ok(WeightScheme::Uniform),
        "l2" => Ok(WeightScheme::knn(Distance::L2, Kernel::Gaussian, phi, knn)),
        "linf" => Ok(WeightScheme::knn(Distance::Linf, Kernel::Exponential, phi, knn)),
        other => Err(format!("unknown weight scheme {other}")),
    }
}

fn truth_for(setup: u32, m: usize, rng: &mut ChaCha8Rng) -> Result<GroundTruthSmm, String> {
    match setup {
        1 => build_setup1(m, rng).map_err(|e| e.to_string()),
        2 => Ok(build_setup2()),
        other => Err(format!("unknown setup {other}")),
    }
}

fn simulate_and_fit_inner(
    setup: u32,
    m: usize,
    n: usize,
    seed: u64,
    weights: &str,
    knn: usize,
    phi: f64,
) -> Result<FitView, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = truth_for(setup, m, &mut rng)?;
    let seq = generate_sequence(&truth, n, &mut rng).map_err(|e| e.to_string())?;
    let counts = count_transitions(&seq, truth.m).map_err(|e| e.to_string())?;
    let config = FitConfig {
        scheme: scheme_from(weights, knn, phi)?,
        ..FitConfig::default()
    };
    let alphabet = Alphabet::dna();
    let fit = fit_counts(alphabet.clone(), &counts, &config).map_err(|e| e.to_string())?;
    let best = fit.path.best();
    let truth_obs: Vec<usize> = fit.contexts.iter().map(|&c| truth.labels[c]).collect();
    let truth_part = PartitionLabels::from_labels(&truth_obs);
    let report = recovery_report(fit.points.view(), &fit.graph, &truth_part, None, None).ok();
    Ok(FitView {
        contexts: fit
            .contexts
            .iter()
            .map(|&c| alphabet.decode(&context_tuple(c, truth.m, truth.d)))
            .collect(),
        truth: truth_part.labels().to_vec(),
        fitted: best.partition.labels().to_vec(),
        path: fit
            .path
            .solutions
            .iter()
            .map(|s| PathPoint {
                lambda: s.lambda,
                k: s.k,
                bic: s.bic,
            })
            .collect(),
        selected: fit.path.selected,
        lambda: best.lambda,
        k: best.k,
        ri: rand_index(best.partition.labels(), truth_part.labels()).map_err(|e| e.to_string())?,
        ari: adjusted_rand_index(best.partition.labels(), truth_part.labels()).map_err(|e| e.to_string())?,
        recovered: best.partition == truth_part,
        lambda_min: report.as_ref().and_then(|r| r.lambda_min),
        lambda_max: report.as_ref().map(|r| r.lambda_max).filter(|v| v.is_finite()),
        sequence_head: alphabet.decode(&seq.codes()[..seq.len().min(120)]),
    })
}

/// Simulate a chain, fit the penalty path and compare with the truth.
/// `weights` is `uniform`, `l2` (Gaussian kNN) or `linf` (exponential kNN).
#[wasm_bindgen]
pub fn simulate_and_fit(setup: u32, m: usize, n: usize, seed: u64, weights: &str, knn: usize, phi: f64) -> String {
    match simulate_and_fit_inner(setup, m, n, seed, weights, knn, phi) {
        Ok(view) => serde_json::to_string(&view).expect("serializable"),
        Err(e) => error_json(e),
    }
}

/// Fit a pasted sequence over `alphabet` at order `m`; returns the selected
/// partition as context groups plus the penalty path.
#[wasm_bindgen]
pub fn fit_text(text: &str, alphabet: &str, m: usize, weights: &str, knn: usize, phi: f64) -> String {
    let run = || -> Result<serde_json::Value, String> {
        let alphabet: Alphabet = alphabet.parse().map_err(|e: smmfit::SmmError| e.to_string())?;
        let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let seq = smmfit::markov::encode_sequence(&cleaned, &alphabet, smmfit::UnknownTokenPolicy::DropAndSplit)
            .map_err(|e| e.to_string())?;
        let counts = count_transitions(&seq, m).map_err(|e| e.to_string())?;
        let config = FitConfig {
            scheme: scheme_from(weights, knn, phi)?,
            ..FitConfig::default()
        };
        let fit = fit_counts(alphabet.clone(), &counts, &config).map_err(|e| e.to_string())?;
        let best = fit.path.best();
        let groups: Vec<Vec<String>> = best
            .partition
            .groups()
            .into_iter()
            .map(|g| {
                g.into_iter()
                    .map(|j| alphabet.decode(&context_tuple(fit.contexts[j], m, alphabet.size())))
                    .collect()
            })
            .collect();
        Ok(serde_json::json!({
            "n": counts.n_observations,
            "lambda": best.lambda,
            "k": best.k,
            "bic": best.bic,
            "groups": groups,
            "group_probs": best.group_probs,
            "path": fit.path.solutions.iter().map(|s| PathPoint { lambda: s.lambda, k: s.k, bic: s.bic }).collect::<Vec<_>>(),
            "selected": fit.path.selected,
        }))
    };
    match run() {
        Ok(v) => v.to_string(),
        Err(e) => error_json(e),
    }
}

/// RI and ARI between two label lists separated by commas or whitespace.
#[wasm_bindgen]
pub fn compare_partitions(a: &str, b: &str) -> String {
    let split = |s: &str| -> Vec<String> {
        s.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect()
    };
    let (a, b) = (split(a), split(b));
    match (rand_index(&a, &b), adjusted_rand_index(&a, &b)) {
        (Ok(ri), Ok(ari)) => serde_json::json!({ "n": a.len(), "ri": ri, "ari": ari }).to_string(),
        (Err(e), _) | (_, Err(e)) => error_json(e),
    }
}
