//! Small recovery study: `cargo run --release --example recovery -- <setup> <n> <reps> <scheme>`
//! where setup is `1`, `1m3` or `2` and scheme is `knn3`, `uniform` or `linf15`.

use smmfit::simulate::{run_recovery_experiment, ExperimentConfig, Setup};
use smmfit::weights::{Distance, Kernel, WeightScheme};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let setup = match args.get(1).map(String::as_str).unwrap_or("1") {
        "2" => Setup::Setup2,
        "1m3" => Setup::Setup1 { m: 3 },
        _ => Setup::Setup1 { m: 2 },
    };
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let reps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
    let scheme = match args.get(4).map(String::as_str).unwrap_or("knn3") {
        "uniform" => WeightScheme::Uniform,
        "linf15" => WeightScheme::knn(Distance::Linf, Kernel::Exponential, 10.0, 15),
        _ => WeightScheme::knn(Distance::L2, Kernel::Gaussian, 100.0, 3),
    };
    let mut config = ExperimentConfig::new(setup, vec![n], vec![scheme]);
    config.replicates = reps;
    config.diagnostics = true;
    let summary = run_recovery_experiment(&config).expect("experiment failed");
    for row in &summary.rows {
        println!(
            "n={} {} ARI={:.3} (se {:.3}) RI={:.3} recovery={:.2} mean_k={:.2} not_converged={}",
            row.n, row.scheme, row.mean_ari, row.se_ari, row.mean_ri, row.recovery, row.mean_k, row.not_converged
        );
    }
    let ordered = summary
        .records
        .iter()
        .filter(|r| matches!((r.lambda_min, r.lambda_max), (Some(lo), Some(hi)) if lo < hi))
        .count();
    let inside: Vec<bool> = summary
        .records
        .iter()
        .filter(|r| matches!((r.lambda_min, r.lambda_max), (Some(lo), Some(hi)) if lo < r.lambda && r.lambda < hi))
        .map(|r| r.recovered)
        .collect();
    println!(
        "lambda_min < lambda_max in {ordered}/{}; selected lambda inside {} times, recovered in {}",
        summary.records.len(),
        inside.len(),
        inside.iter().filter(|&&b| b).count()
    );
    println!("elapsed {:.1}s", summary.elapsed_secs);
}
