use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use smmfit::classify::{fit_reference, run_classification_experiment, LabeledSequence, ReferenceSet};
use smmfit::diagnostics::recovery_report;
use smmfit::markov::{count_transitions, encode_sequence, Alphabet, EncodedSequence, UnknownTokenPolicy};
use smmfit::metrics::{adjusted_rand_index, rand_index};
use smmfit::partition::PartitionLabels;
use smmfit::selection::{fit_counts, FitConfig, SmmModel, DEFAULT_SMOOTHING};
use smmfit::simulate::{
    build_setup1, build_setup2, generate_sequence, run_recovery_experiment, ExperimentConfig, GroundTruthSmm, Setup,
};
use smmfit::solver::SolverConfig;
use smmfit::weights::{Distance, Kernel, WeightScheme};
use smmfit::SmmError;

use crate::io::{self, FastaRecord, FormatError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] SmmError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(SmmError::NotConverged { .. }) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// How a successful run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Outputs were written but some solves did not converge.
    Warnings(String),
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "smmfit", version, about = "Fit sparse Markov models by convex clustering of transition vectors")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SMMFIT_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Do not print the summary table.
    #[arg(long, short, global = true)]
    #[serde(skip)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Fit a model to one sequence file and select the penalty by BIC.
    Fit(FitArgs),
    /// Run a recovery study on simulated chains.
    Simulate(SimulateArgs),
    /// Write one simulated chain (and optionally its true model).
    Generate(GenerateArgs),
    /// Classify random segments of labeled samples against reference models.
    Classify(ClassifyArgs),
    /// Rand index and adjusted Rand index between two label files.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SchemeArgs {
    /// Neighbour count for kNN kernel weights; uniform weights when absent.
    #[arg(long)]
    pub knn: Option<usize>,
    /// Distance for neighbour search and kernel: l2, l1 or linf.
    #[arg(long, default_value = "l2")]
    pub distance: Distance,
    /// Kernel: gaussian exp(-phi d^2) or exponential exp(-phi d).
    #[arg(long, default_value = "gaussian")]
    pub kernel: Kernel,
    #[arg(long, default_value_t = 100.0)]
    pub phi: f64,
}

impl SchemeArgs {
    pub fn scheme(&self) -> WeightScheme {
        match self.knn {
            Some(k) => WeightScheme::knn(self.distance, self.kernel, self.phi, k),
            None => WeightScheme::Uniform,
        }
    }

    fn gaussian_knn(&self) -> Option<(f64, usize)> {
        match (self.knn, self.kernel) {
            (Some(k), Kernel::Gaussian) => Some((self.phi, k)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Number of penalty values on the path.
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Dual step size; defaults to 1/p' for p' observed contexts.
    #[arg(long)]
    pub step: Option<f64>,
    /// Relative duality-gap stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    /// Relative tolerance for reading fused rows as one cluster.
    #[arg(long, default_value_t = 1e-4)]
    pub fusion_tol: f64,
    /// Solve every penalty from scratch (parallel) instead of warm-starting.
    #[arg(long)]
    pub cold_start: bool,
}

impl SolverArgs {
    pub fn fit_config(&self, scheme: WeightScheme) -> FitConfig {
        FitConfig {
            scheme,
            solver: self.solver(),
            grid_size: self.grid_size,
            warm_start: !self.cold_start,
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            step: self.step,
            dual_gap_tol: self.gap_tol,
            max_iter: self.max_iter,
            fusion_tol: self.fusion_tol,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownArg {
    /// Fail on symbols outside the alphabet.
    Reject,
    /// Drop them and do not count transitions across the gap.
    Drop,
}

impl From<UnknownArg> for UnknownTokenPolicy {
    fn from(u: UnknownArg) -> Self {
        match u {
            UnknownArg::Reject => UnknownTokenPolicy::Reject,
            UnknownArg::Drop => UnknownTokenPolicy::DropAndSplit,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// FASTA or token file; every record is an independent run.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Markov order m.
    #[arg(long, short = 'm', alias = "m")]
    pub order: usize,
    /// Symbols in code order, e.g. ACGT. Inferred from the data when absent
    /// (ACGT if the data only use those letters).
    #[arg(long)]
    pub alphabet: Option<String>,
    #[arg(long, value_enum, default_value = "reject")]
    pub unknown: UnknownArg,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Pseudo-count stored in the model for scoring new sequences.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    pub smoothing: f64,
    /// Recorded in the model; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// True model (JSON from `generate --truth-out`) to score the fit against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
pub enum SetupArg {
    #[value(name = "1")]
    #[serde(rename = "1")]
    One,
    #[value(name = "2")]
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub setup: SetupArg,
    /// Order for setup 1 (2 or 3); setup 2 is always order 3.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Sequence lengths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also record the exact-recovery penalty interval per replicate.
    #[arg(long)]
    pub diagnostics: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub setup: SetupArg,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sequence output; FASTA when the extension is .fa/.fasta, else one line of tokens.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the true model as JSON.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    /// Directory of references: `<class>.json` models, or `<class>.fa`
    /// sequences that are fitted with `--order`.
    #[arg(long)]
    pub refs: PathBuf,
    /// FASTA samples; the class is `class=NAME` in the header, or else the
    /// first word after the id.
    #[arg(long)]
    pub samples: PathBuf,
    /// Fraction of each sample kept as the random segment, in (0, 1].
    #[arg(long)]
    pub eps: f64,
    /// Additive smoothing for segment likelihoods.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Order used when fitting sequence references.
    #[arg(long)]
    pub order: Option<usize>,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricsArgs {
    pub labels_a: PathBuf,
    pub labels_b: PathBuf,
    /// Also write the JSON result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Generate(a) => cmd_generate(a),
        Command::Classify(a) => cmd_classify(cli, a),
        Command::Metrics(a) => cmd_metrics(a),
    }
}

/// Files of one run, written only once everything has been computed.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    fn write(mut self, cli: &Cli, extra: serde_json::Value) -> CliResult<()> {
        let names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        let manifest = json!({
            "tool": "smmfit",
            "version": env!("CARGO_PKG_VERSION"),
            "config": cli,
            "outputs": names,
            "results": extra,
        });
        self.add("manifest.json", to_json(&manifest));
        fs::create_dir_all(&self.dir).map_err(|source| CliError::Write {
            path: self.dir.display().to_string(),
            source,
        })?;
        for (name, content) in &self.files {
            write_file(&self.dir.join(name), content)?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, content: &str) -> CliResult<()> {
    fs::write(path, content).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("serializable row");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

fn csv_from_records(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory writer");
    for r in rows {
        w.write_record(&r).expect("in-memory writer");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

fn infer_alphabet(sequences: &[(String, String)], given: Option<&str>) -> CliResult<Alphabet> {
    if let Some(s) = given {
        return Ok(s.parse()?);
    }
    let mut symbols: Vec<char> = sequences.iter().flat_map(|(_, s)| s.chars()).collect();
    symbols.sort_unstable();
    symbols.dedup();
    if symbols.iter().all(|c| "ACGT".contains(*c)) {
        return Ok(Alphabet::dna());
    }
    Ok(Alphabet::new(symbols)?)
}

fn encode_all(sequences: &[(String, String)], alphabet: &Alphabet, policy: UnknownTokenPolicy) -> CliResult<EncodedSequence> {
    let mut runs = Vec::new();
    for (_, raw) in sequences {
        let seq = encode_sequence(raw, alphabet, policy)?;
        runs.extend(seq.runs().map(<[usize]>::to_vec));
    }
    Ok(EncodedSequence::from_runs(runs, alphabet.size())?)
}

#[derive(Serialize)]
struct PathRow {
    lambda: f64,
    k: usize,
    loglik: f64,
    bic: f64,
    converged: bool,
    iterations: usize,
    relative_gap: f64,
    selected: bool,
}

/// One row per group of `partition`, taken from the true vector of the
/// group's first member.
fn truth_vectors(partition: &PartitionLabels, truth_labels: &[usize], vectors: &[Vec<f64>], d: usize) -> Array2<f64> {
    let groups = partition.groups();
    Array2::from_shape_fn((groups.len(), d), |(g, c)| vectors[truth_labels[groups[g][0]]][c])
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> CliResult<Outcome> {
    let sequences = io::read_sequences(&a.input)?;
    let truth = match &a.truth {
        Some(p) => Some(
            serde_json::from_str::<GroundTruthSmm>(&io::read_text(p)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    if !(a.smoothing >= 0.0) {
        return Err(CliError::Usage("--smoothing must be non-negative".into()));
    }
    let alphabet = infer_alphabet(&sequences, a.alphabet.as_deref())?;
    let seq = encode_all(&sequences, &alphabet, a.unknown.into())?;
    let counts = count_transitions(&seq, a.order)?;
    let fit = fit_counts(alphabet.clone(), &counts, &a.solver.fit_config(a.scheme.scheme()))?;
    let mut model = fit.model.clone();
    model.smoothing = a.smoothing;
    model.seed = Some(a.seed);
    let best = fit.path.best();

    let path_rows: Vec<PathRow> = fit
        .path
        .solutions
        .iter()
        .enumerate()
        .map(|(i, s)| PathRow {
            lambda: s.lambda,
            k: s.k,
            loglik: s.loglik,
            bic: s.bic,
            converged: s.converged,
            iterations: s.iterations,
            relative_gap: s.relative_gap,
            selected: i == fit.path.selected,
        })
        .collect();

    let fitted_report = recovery_report(
        fit.points.view(),
        &fit.graph,
        &best.partition,
        None,
        a.scheme.gaussian_knn(),
    );
    let mut diagnostics = json!({
        "grid_top": fit.grid_top,
        "nesting_violations": fit.path.nesting_violations,
        "not_converged": fit.path.not_converged,
        "fitted": match &fitted_report {
            Ok(r) => serde_json::to_value(r).expect("serializable"),
            Err(e) => json!({ "error": e.to_string() }),
        },
    });
    let mut truth_summary = serde_json::Value::Null;
    if let Some(t) = &truth {
        if t.d != alphabet.size() || t.m != a.order {
            return Err(CliError::Usage(format!(
                "true model has d={}, m={} but the fit uses d={}, m={}",
                t.d,
                t.m,
                alphabet.size(),
                a.order
            )));
        }
        let truth_obs: Vec<usize> = fit.contexts.iter().map(|&c| t.labels[c]).collect();
        let truth_part = PartitionLabels::from_labels(&truth_obs);
        let vectors = truth_vectors(&truth_part, &truth_obs, &t.group_vectors, t.d);
        let report = recovery_report(
            fit.points.view(),
            &fit.graph,
            &truth_part,
            Some(vectors.view()),
            a.scheme.gaussian_knn(),
        );
        truth_summary = json!({
            "recovered": best.partition == truth_part,
            "ri": rand_index(best.partition.labels(), truth_part.labels())?,
            "ari": adjusted_rand_index(best.partition.labels(), truth_part.labels())?,
            "k0": truth_part.k(),
        });
        diagnostics["truth"] = json!({
            "summary": truth_summary,
            "report": match &report {
                Ok(r) => serde_json::to_value(r).expect("serializable"),
                Err(e) => json!({ "error": e.to_string() }),
            },
        });
    }

    let mut out = Outputs::new(&a.out_dir);
    out.add("model.json", to_json(&model));
    out.add("path.csv", to_csv(&path_rows));
    out.add("diagnostics.json", to_json(&diagnostics));
    out.write(
        cli,
        json!({
            "n": counts.n_observations,
            "observed_contexts": fit.contexts.len(),
            "lambda": best.lambda,
            "k": best.k,
            "bic": best.bic,
            "not_converged": fit.path.not_converged,
            "truth": truth_summary,
        }),
    )?;
    if !cli.quiet {
        println!(
            "n={} observed contexts={} selected lambda={:.3e} k={} BIC={:.3}",
            counts.n_observations,
            fit.contexts.len(),
            best.lambda,
            best.k,
            best.bic
        );
        if !truth_summary.is_null() {
            println!(
                "vs truth: RI={:.3} ARI={:.3} recovered={}",
                truth_summary["ri"].as_f64().unwrap_or(f64::NAN),
                truth_summary["ari"].as_f64().unwrap_or(f64::NAN),
                truth_summary["recovered"]
            );
        }
    }
    Ok(warn_if(fit.path.not_converged))
}

fn warn_if(not_converged: usize) -> Outcome {
    if not_converged == 0 {
        Outcome::Clean
    } else {
        Outcome::Warnings(format!("{not_converged} penalty solves hit the iteration limit"))
    }
}

fn setup_of(setup: SetupArg, m: usize) -> CliResult<Setup> {
    match setup {
        SetupArg::One if m == 2 || m == 3 => Ok(Setup::Setup1 { m }),
        SetupArg::One => Err(CliError::Usage(format!("setup 1 needs --m 2 or 3, got {m}"))),
        SetupArg::Two => Ok(Setup::Setup2),
    }
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<Outcome> {
    let fit = a.solver.fit_config(a.scheme.scheme());
    let config = ExperimentConfig {
        setup: setup_of(a.setup, a.m)?,
        n_values: a.n.clone(),
        replicates: a.reps,
        schemes: vec![fit.scheme],
        solver: fit.solver,
        grid_size: fit.grid_size,
        seed: a.seed,
        diagnostics: a.diagnostics,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let summary = run_recovery_experiment(&config)?;
    let not_converged: usize = summary.rows.iter().map(|r| r.not_converged).sum();

    let mut out = Outputs::new(&a.out_dir);
    out.add("summary.csv", to_csv(&summary.rows));
    out.add("replicates.csv", to_csv(&summary.records));
    out.write(cli, json!({ "rows": summary.rows.len(), "not_converged": not_converged }))?;
    if !cli.quiet {
        println!("{:>7}  {:<32} {:>14} {:>14} {:>9}", "n", "weights", "RI (se)", "ARI (se)", "recovery");
        for r in &summary.rows {
            println!(
                "{:>7}  {:<32} {:>6.3} ({:.3}) {:>6.3} ({:.3}) {:>9.3}",
                r.n, r.scheme, r.mean_ri, r.se_ri, r.mean_ari, r.se_ari, r.recovery
            );
        }
    }
    Ok(warn_if(not_converged))
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut model = match setup_of(a.setup, a.m)? {
        Setup::Setup1 { m } => build_setup1(m, &mut rng)?,
        _ => build_setup2(),
    };
    model.seed = Some(a.seed);
    let seq = generate_sequence(&model, a.n, &mut rng)?;
    let text = Alphabet::dna().decode(seq.codes());
    let content = if io::is_fasta_path(&a.out) {
        io::write_fasta(
            &[FastaRecord {
                id: format!("setup{}_seed{}", if a.setup == SetupArg::One { 1 } else { 2 }, a.seed),
                description: format!("n={}", a.n),
                sequence: text,
            }],
            70,
        )
    } else {
        text + "\n"
    };
    let truth = a.truth_out.as_ref().map(|_| to_json(&model));
    write_file(&a.out, &content)?;
    if let (Some(p), Some(t)) = (&a.truth_out, truth) {
        write_file(p, &t)?;
    }
    Ok(Outcome::Clean)
}

fn sample_class(rec: &FastaRecord) -> Option<&str> {
    let words: Vec<&str> = rec.description.split_whitespace().collect();
    words
        .iter()
        .find_map(|w| w.strip_prefix("class="))
        .or_else(|| words.first().copied())
}

fn load_references(a: &ClassifyArgs) -> CliResult<ReferenceSet> {
    let entries = fs::read_dir(&a.refs).map_err(|source| FormatError::Io {
        path: a.refs.display().to_string(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
    paths.sort();
    let mut classes = Vec::new();
    for path in paths {
        let Some(name) = path.file_stem().and_then(|s| s.to_str()).map(String::from) else {
            continue;
        };
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        if ext == "json" {
            classes.push((name, SmmModel::from_json(&io::read_text(&path)?)?));
        } else if io::is_fasta_path(&path) || ext == "txt" {
            let order = a
                .order
                .ok_or_else(|| CliError::Usage("--order is required to fit sequence references".into()))?;
            let sequences = io::read_sequences(&path)?;
            let alphabet = infer_alphabet(&sequences, None)?;
            let seq = encode_all(&sequences, &alphabet, UnknownTokenPolicy::DropAndSplit)?;
            let config = a.solver.fit_config(a.scheme.scheme());
            let mut model = fit_reference(alphabet, &seq, order, &config)?;
            model.smoothing = a.alpha;
            classes.push((name, model));
        }
    }
    Ok(ReferenceSet::new(classes)?)
}

fn cmd_classify(cli: &Cli, a: &ClassifyArgs) -> CliResult<Outcome> {
    if !(a.eps > 0.0 && a.eps <= 1.0) {
        return Err(CliError::Usage(format!("--eps must lie in (0, 1], got {}", a.eps)));
    }
    if !(a.alpha >= 0.0) {
        return Err(CliError::Usage("--alpha must be non-negative".into()));
    }
    let records = io::parse_fasta(&a.samples)?;
    let refs = load_references(a)?;
    let names = refs.names();
    let mut samples = Vec::new();
    for rec in &records {
        let class = sample_class(rec)
            .ok_or_else(|| CliError::Usage(format!("sample {} has no class label", rec.id)))?;
        let idx = refs
            .position(class)
            .ok_or_else(|| CliError::Usage(format!("sample {} has unknown class {class}", rec.id)))?;
        let seq = encode_sequence(&rec.sequence, refs.alphabet(), UnknownTokenPolicy::DropAndSplit)?;
        samples.push(LabeledSequence {
            name: rec.id.clone(),
            class: idx,
            codes: seq.codes().to_vec(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let run = run_classification_experiment(&refs, &samples, a.eps, a.alpha, &mut rng)?;

    let mut header = vec!["truth".to_string()];
    header.extend(names.iter().map(|n| n.to_string()));
    let rows = run
        .confusion
        .counts
        .iter()
        .zip(&names)
        .map(|(row, n)| std::iter::once(n.to_string()).chain(row.iter().map(u64::to_string)).collect())
        .collect();
    let confusion = csv_from_records(header, rows);

    let mut header: Vec<String> = ["sample", "truth", "assigned", "start", "length", "skipped"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(names.iter().map(|n| format!("score_{n}")));
    let rows = run
        .samples
        .iter()
        .map(|s| {
            let mut r = vec![
                s.sample.clone(),
                s.truth.clone(),
                s.assigned.clone().unwrap_or_default(),
                s.start.to_string(),
                s.length.to_string(),
                s.skipped.to_string(),
            ];
            if s.skipped {
                r.extend(names.iter().map(|_| String::new()));
            } else {
                r.extend(s.scores.iter().map(f64::to_string));
            }
            r
        })
        .collect();
    let scores = csv_from_records(header, rows);

    let total = run.confusion.total();
    let rate = if total > 0 { run.confusion.misclassification_rate() } else { f64::NAN };
    let mut out = Outputs::new(&a.out_dir);
    out.add("confusion.csv", confusion);
    out.add("scores.csv", scores);
    out.write(
        cli,
        json!({
            "classified": total,
            "skipped": run.skipped,
            "misclassification_rate": if rate.is_finite() { json!(rate) } else { json!(null) },
        }),
    )?;
    if !cli.quiet {
        println!("classified {total} segments, skipped {}", run.skipped);
        println!("misclassification rate {:.3}", rate);
    }
    Ok(Outcome::Clean)
}

fn cmd_metrics(a: &MetricsArgs) -> CliResult<Outcome> {
    let left = io::read_labels(&a.labels_a)?;
    let right = io::read_labels(&a.labels_b)?;
    if left.len() != right.len() {
        return Err(CliError::Usage(format!(
            "label files have {} and {} entries",
            left.len(),
            right.len()
        )));
    }
    let result = json!({
        "n": left.len(),
        "ri": rand_index(&left, &right)?,
        "ari": adjusted_rand_index(&left, &right)?,
    });
    let text = to_json(&result);
    if let Some(p) = &a.out {
        write_file(p, &text)?;
    }
    print!("{text}");
    Ok(Outcome::Clean)
}
