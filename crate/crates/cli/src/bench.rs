//! `bench-cs` and `bench-lagged`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;

use ordsparse::experiment::cs::{run_cs_bench, CsAlgorithm, CsBenchConfig, CsModel};
use ordsparse::experiment::lagged::{
    best_row, lambda_sweep, logspace, parse_table, solve_lagged, synthetic_table, LaggedDataset,
    DEFAULT_MAX_LAG, DEFAULT_OBSERVATIONS,
};
use ordsparse::SolverConfig;

use crate::manifest::RunManifest;
use crate::{config_err, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Preset {
    /// n = 256, m = 54, s = 18
    Desk,
    /// n = 2560, m = 540, s = 180
    Small,
    /// n = 10240, m = 2160, s = 720
    Medium,
    /// n = 25600, m = 5400, s = 1800; needs --full-scale
    Large,
}

impl Preset {
    /// `(n, m, s, λ_lp, λ_log, maxtime)`
    fn settings(self) -> (usize, usize, usize, f64, f64, f64) {
        match self {
            Preset::Desk => (256, 54, 18, 5e-2, 8e-2, 0.5),
            Preset::Small => (2560, 540, 180, 5e-2, 8e-2, 4.0),
            Preset::Medium => (10240, 2160, 720, 8e-2, 1e-1, 16.0),
            Preset::Large => (25600, 5400, 1800, 1e-1, 2e-1, 40.0),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchCsArgs {
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    /// Allow the largest preset.
    #[arg(long)]
    pub full_scale: bool,
    /// Number of random instances.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First instance seed; instances use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-run time limit in seconds (defaults to the preset's).
    #[arg(long)]
    pub maxtime: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    /// Noise level of the measurements.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Solve instances concurrently. Timings are then taken under contention.
    #[arg(long)]
    pub parallel: bool,
}

pub fn cmd_bench_cs(args: &BenchCsArgs, out_dir: &Path) -> CliResult<()> {
    let started = Instant::now();
    if args.preset == Preset::Large && !args.full_scale {
        return config_err("the large preset runs for hours; pass --full-scale to confirm");
    }
    if args.seeds == 0 {
        return config_err("--seeds must be positive");
    }
    if args.grid_points < 2 {
        return config_err("--grid-points must be at least 2");
    }
    let (n, m, s, lambda_lp, lambda_log, maxtime) = args.preset.settings();
    let cfg = CsBenchConfig {
        n,
        m,
        s,
        sigma: args.sigma,
        seeds: (args.seed..args.seed + args.seeds).collect(),
        max_time_s: args.maxtime.unwrap_or(maxtime),
        grid_points: args.grid_points,
        model: CsModel {
            lambda_lp,
            lambda_log,
            ..CsModel::default()
        },
        algorithms: CsAlgorithm::ALL.to_vec(),
        parallel: args.parallel,
    };
    let report = run_cs_bench(&cfg)?;

    let curves_path = out_dir.join("curves.csv");
    let mut text = String::from("t");
    for c in &report.curves {
        write!(text, ",{}", c.algorithm).unwrap();
    }
    text.push('\n');
    for i in 0..cfg.grid_points {
        write!(text, "{:e}", report.curves[0].t[i]).unwrap();
        for c in &report.curves {
            write!(text, ",{:e}", c.e[i]).unwrap();
        }
        text.push('\n');
    }
    fs::write(&curves_path, text)?;

    let finals_path = out_dir.join("final_errors.csv");
    let mut text = String::from("seed,algorithm,final_error,iterations\n");
    for s in &report.seeds {
        for ((alg, err), (_, iters)) in s.final_errors.iter().zip(&s.iterations) {
            writeln!(text, "{},{alg},{err:e},{iters}", s.seed).unwrap();
        }
    }
    fs::write(&finals_path, text)?;

    let mut manifest = RunManifest::new(
        "bench-cs",
        out_dir,
        serde_json::json!({ "args": args, "bench": cfg }),
    );
    manifest.seeds = cfg.seeds.clone();
    manifest.add_output(&curves_path)?;
    manifest.add_output(&finals_path)?;
    let mean_final: Vec<_> = CsAlgorithm::ALL
        .iter()
        .map(|alg| {
            let errs: Vec<f64> = report
                .seeds
                .iter()
                .flat_map(|s| {
                    s.final_errors
                        .iter()
                        .filter(|(a, _)| a == alg)
                        .map(|(_, e)| *e)
                })
                .collect();
            (alg.name(), errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect();
    manifest.metrics = serde_json::json!({ "mean_final_error": mean_final });
    manifest.notes.push(
        "curves are averages over seeds of the prefix-minimum normalized recovery error on a uniform time grid".into(),
    );
    manifest.elapsed_s = started.elapsed().as_secs_f64();
    manifest.write()?;
    println!("{}", serde_json::to_string(&manifest.metrics)?);
    Ok(())
}

const LAOZONE_URL: &str = "https://hastie.su.domains/ElemStatLearn/datasets/LAozone.data";

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchLaggedArgs {
    /// Comma-separated table with a header row. Without it a small synthetic
    /// table with the same columns is used.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Download the table to --data if it is missing.
    #[arg(long, requires = "data")]
    pub fetch: bool,
    #[arg(long, default_value = LAOZONE_URL)]
    pub url: String,
    /// Rows of the synthetic table.
    #[arg(long, default_value_t = 30)]
    pub synthetic_rows: usize,
    /// Number of lags K (defaults to 20 on real data, 5 on synthetic).
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Training observations N (defaults to 155 on real data, 12 on synthetic).
    #[arg(long)]
    pub observations: Option<usize>,
    /// Penalty exponents; 1 selects the convex model.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 1.0])]
    pub q: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub lambdas: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_max: f64,
    /// Seed of the shared initial point.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iters: usize,
    /// Per-solve time limit in seconds.
    #[arg(long)]
    pub maxtime: Option<f64>,
}

fn fetch(url: &str, dest: &Path) -> CliResult<()> {
    if let Some(parent) = dest.parent() {
        fs::create_dir_all(parent)?;
    }
    let status = Command::new("curl")
        .args(["-fsSL", "-o"])
        .arg(dest)
        .arg(url)
        .status()
        .map_err(|e| CliError::Config(format!("could not run curl: {e}")))?;
    if !status.success() {
        let _ = fs::remove_file(dest);
        return config_err(format!("download of {url} failed ({status})"));
    }
    Ok(())
}

fn q_label(q: f64) -> String {
    format!("{q}").replace('.', "p")
}

pub fn cmd_bench_lagged(args: &BenchLaggedArgs, out_dir: &Path) -> CliResult<()> {
    let started = Instant::now();
    let (table, source, k_default, n_default) = match &args.data {
        Some(path) => {
            if !path.exists() {
                if !args.fetch {
                    return config_err(format!(
                        "data file {} does not exist; pass --fetch to download it",
                        path.display()
                    ));
                }
                fetch(&args.url, path)?;
            }
            let z = parse_table(File::open(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (
                z,
                path.display().to_string(),
                DEFAULT_MAX_LAG,
                DEFAULT_OBSERVATIONS,
            )
        }
        None => (
            synthetic_table(args.synthetic_rows, args.seed),
            format!("synthetic:{}", args.synthetic_rows),
            5,
            12,
        ),
    };
    let max_lag = args.max_lag.unwrap_or(k_default);
    let observations = args.observations.unwrap_or(n_default);
    if args.q.is_empty() {
        return config_err("--q needs at least one exponent");
    }
    if args.lambdas < 2 || !(args.lambda_min > 0.0 && args.lambda_min < args.lambda_max) {
        return config_err("need at least two lambdas and 0 < lambda-min < lambda-max");
    }
    let ds = LaggedDataset::from_table(&table, max_lag, observations)?;
    let lambdas = logspace(
        args.lambda_min.log10(),
        args.lambda_max.log10(),
        args.lambdas,
    );
    let mut config = SolverConfig::default()
        .with_tol_step(args.tol)
        .with_max_iters(args.max_iters);
    if let Some(t) = args.maxtime {
        config = config.with_max_time(t);
    }
    config.validate()?;
    let x0 = ds.initial_point(args.seed);

    let mut manifest = RunManifest::new(
        "bench-lagged",
        out_dir,
        serde_json::json!({ "args": args, "solver": config }),
    );
    manifest.seeds.push(args.seed);
    let mut best_text = String::from("q,lambda,identification_error,validation_error\n");
    let mut best = Vec::new();
    for &q in &args.q {
        let rows = lambda_sweep(&ds, q, &lambdas, &config, &x0)?;
        let label = q_label(q);
        let sweep_path = out_dir.join(format!("sweep_q{label}.csv"));
        let mut text =
            String::from("lambda,identification_error,validation_error,iterations,nonzeros\n");
        for r in &rows {
            writeln!(
                text,
                "{:e},{:e},{:e},{},{}",
                r.lambda, r.identification_error, r.validation_error, r.iterations, r.nonzeros
            )
            .unwrap();
        }
        fs::write(&sweep_path, text)?;
        manifest.add_output(&sweep_path)?;

        let row = best_row(&rows).expect("sweep is nonempty");
        writeln!(
            best_text,
            "{q},{:e},{:e},{:e}",
            row.lambda, row.identification_error, row.validation_error
        )
        .unwrap();
        best.push(serde_json::json!({ "q": q, "lambda": row.lambda, "validation_error": row.validation_error }));

        let res = solve_lagged(&ds, q, row.lambda, &config, x0.clone())?;
        let pred = ds.predict(&res.x)?;
        let pred_path = out_dir.join(format!("predictions_q{label}.csv"));
        let mut text = String::from("observed,predicted\n");
        for (o, p) in ds.b_val.iter().zip(&pred) {
            writeln!(text, "{o:e},{p:e}").unwrap();
        }
        fs::write(&pred_path, text)?;
        manifest.add_output(&pred_path)?;
    }
    let best_path = out_dir.join("best.csv");
    fs::write(&best_path, best_text)?;
    manifest.add_output(&best_path)?;
    manifest.metrics = serde_json::json!({
        "source": source,
        "max_lag": max_lag,
        "observations": observations,
        "num_predictors": ds.num_predictors,
        "best": best,
    });
    manifest.notes.push(
        "validation columns are standardized with their own sample statistics; predictions use the training response mean and std".into(),
    );
    manifest.elapsed_s = started.elapsed().as_secs_f64();
    manifest.write()?;
    println!("{}", serde_json::to_string(&manifest.metrics)?);
    Ok(())
}
