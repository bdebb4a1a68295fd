//! Command-line driver: loads a run configuration, dispatches to the
//! library checks, and writes newline-delimited JSON or CSV reports plus a
//! run manifest beside them.

use clap::{Parser, Subcommand};
use monocluster::bounds::{
    triple_link_check, majorant_sum, row_sum_check, simplex_integral_bound, simplex_integral_exact,
    volume_argument_check, BoundConstants,
};
use monocluster::engine::{expansion_identity_check, schwinger_direct, schwinger_series};
use monocluster::graph::enumerate;
use monocluster::interp::{recursion_check, restrict, support_with_margin, HVector};
use monocluster::model::{DiscretizedModel, Polynomial};
use monocluster::{Kernel, Window};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    dim: usize,
    side: i64,
    copy_ceiling: u32,
    /// interaction coefficients, constant term first
    coefficients: Vec<f64>,
    lambda: f64,
    sources: Vec<Vec<f64>>,
    order: usize,
    p_max: usize,
    quad_order: usize,
    kernel_quad_order: usize,
    budget: usize,
    tolerance: f64,
    format: String,
    output: Option<PathBuf>,
    seed: u64,
    samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 1,
            side: 2,
            copy_ceiling: 1,
            coefficients: vec![0.0, 0.0, 0.0, 0.0, 1.0],
            lambda: 0.01,
            sources: vec![vec![0.5], vec![1.5]],
            order: 2,
            p_max: 2,
            quad_order: 8,
            kernel_quad_order: 12,
            budget: 14,
            tolerance: 1e-6,
            format: "json".into(),
            output: None,
            seed: 7,
            samples: 50,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "monocluster", version, about = "Lattice cluster-expansion verification toolkit")]
struct Cli {
    /// JSON configuration file; command-line flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    side: Option<i64>,
    #[arg(long, global = true)]
    copy_ceiling: Option<u32>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    order: Option<usize>,
    #[arg(long, global = true)]
    p_max: Option<usize>,
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// json (newline-delimited records) or csv
    #[arg(long, global = true)]
    format: Option<String>,
    /// report file; stdout when omitted (the manifest then goes to stderr)
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the covariance kernel and its decay constants
    Kernel,
    /// Enumerate cluster-graphs over the configured window
    Enumerate,
    /// Sample random graphs: matrix recursion deviation and least eigenvalue
    Matrix,
    /// Compare the direct generating series with its graph expansion
    VerifyIdentity,
    /// Normalized two-point series, assembled and by direct division
    Schwinger,
    /// Constants and quantitative bound checks
    Bounds,
}

/// One report line plus whether its contract held.
struct Record {
    value: serde_json::Value,
    pass: bool,
}

fn record(pass: bool, value: serde_json::Value) -> Record {
    Record { value, pass }
}

fn threads() -> usize {
    std::env::var("MONOCLUSTER_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Deterministic parallel map: chunks by index, reassembled in order.
fn parallel_map<T: Send + Sync, U: Send>(items: Vec<T>, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let n = threads().min(items.len().max(1));
    if n <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut out: Vec<Option<U>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(n);
    std::thread::scope(|scope| {
        for (slot, work) in out.chunks_mut(chunk).zip(items.chunks(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (o, i) in slot.iter_mut().zip(work) {
                    *o = Some(f(i));
                }
            });
        }
    });
    out.into_iter().map(|o| o.unwrap()).collect()
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("config {path:?}: {e}"))?;
            serde_json::from_str(&text).map_err(|e| format!("config {path:?}: {e}"))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = cli.dim {
        cfg.dim = v;
    }
    if let Some(v) = cli.side {
        cfg.side = v;
    }
    if let Some(v) = cli.copy_ceiling {
        cfg.copy_ceiling = v;
    }
    if let Some(v) = cli.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = cli.order {
        cfg.order = v;
    }
    if let Some(v) = cli.p_max {
        cfg.p_max = v;
    }
    if let Some(v) = cli.quad_order {
        cfg.quad_order = v;
    }
    if let Some(v) = cli.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = &cli.format {
        cfg.format = v.clone();
    }
    if let Some(v) = &cli.output {
        cfg.output = Some(v.clone());
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.samples {
        cfg.samples = v;
    }
    if cfg.lambda < 0.0 {
        return Err("lambda must be nonnegative".into());
    }
    if cfg.tolerance <= 0.0 {
        return Err("tolerance must be strictly positive".into());
    }
    if cfg.dim == 0 || cfg.side < 1 {
        return Err("window must have positive dimension and side".into());
    }
    if !matches!(cfg.format.as_str(), "json" | "csv") {
        return Err(format!("unknown format {:?}", cfg.format));
    }
    Ok(cfg)
}

fn build_model(cfg: &RunConfig) -> Result<DiscretizedModel, String> {
    let kernel = Arc::new(
        Kernel::make_slice_kernel(cfg.dim, cfg.kernel_quad_order).map_err(|e| e.to_string())?,
    );
    let window = Window::hypercube(cfg.dim, cfg.side, cfg.copy_ceiling);
    let interaction =
        Polynomial::interaction(cfg.coefficients.clone()).map_err(|e| e.to_string())?;
    DiscretizedModel::new(
        window,
        kernel,
        1,
        interaction,
        cfg.lambda,
        cfg.sources.clone(),
    )
    .map_err(|e| e.to_string())
}

fn run_kernel(cfg: &RunConfig) -> Result<Vec<Record>, String> {
    let kernel =
        Kernel::make_slice_kernel(cfg.dim, cfg.kernel_quad_order).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    let mut sep = vec![0.0; cfg.dim];
    let mut t = 0.0;
    while t <= 8.0 {
        sep[0] = t;
        let v = kernel.eval_sep(&sep);
        out.push(record(
            v.is_finite(),
            json!({"record": "kernel", "separation": t, "value": v}),
        ));
        t += 0.5;
    }
    for r in [2u32, (cfg.dim as u32) + 1, 18] {
        let k1 = kernel.fit_decay_constant(r, 15.0);
        out.push(record(
            k1.is_finite() && k1 > 0.0,
            json!({"record": "decay_constant", "exponent": r, "value": k1}),
        ));
    }
    Ok(out)
}

fn run_enumerate(cfg: &RunConfig, model: &DiscretizedModel) -> Vec<Record> {
    let source = model.source_polymer();
    let graphs = enumerate(&model.window, &source, cfg.p_max);
    let mut out = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        let links: Vec<String> = g
            .links()
            .iter()
            .map(|l| format!("{:?}{}~{:?}{}", l.a.cell.0, l.a.copy, l.b.cell.0, l.b.copy))
            .collect();
        out.push(record(
            true,
            json!({
                "record": "graph",
                "index": i,
                "length": g.len(),
                "contributes": g.contributes(),
                "cluster_size": g.cluster().len(),
                "links": links,
            }),
        ));
    }
    out.push(record(
        true,
        json!({"record": "enumeration_total", "graphs": graphs.len()}),
    ));
    out
}

fn random_prefix(rng: &mut ChaCha8Rng, len: usize) -> HVector {
    let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.02..0.98)).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    HVector::new(v)
}

fn run_matrix(cfg: &RunConfig, model: &DiscretizedModel) -> Vec<Record> {
    let source = model.source_polymer();
    let graphs: Vec<_> = enumerate(&model.window, &source, cfg.p_max)
        .into_iter()
        .filter(|g| g.contributes())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let support = support_with_margin(&model.window, 1);
    let mut out = Vec::new();
    for i in 0..cfg.samples {
        let g = &graphs[rng.gen_range(0..graphs.len())];
        let h = random_prefix(&mut rng, g.len() + 1);
        let dev = recursion_check(g, &h, support.clone());
        let eig = restrict(g, &h.shorter()).min_eigenvalue();
        let pass = dev <= cfg.tolerance && eig >= -1e-10;
        out.push(record(
            pass,
            json!({
                "record": "matrix_sample",
                "sample": i,
                "length": g.len(),
                "recursion_deviation": dev,
                "min_eigenvalue": eig,
            }),
        ));
    }
    out
}

fn run_verify_identity(cfg: &RunConfig, model: &DiscretizedModel) -> Result<Vec<Record>, String> {
    let report = expansion_identity_check(model, cfg.order, cfg.p_max, cfg.quad_order, cfg.budget)
        .map_err(|e| e.to_string())?;
    let pass = report.max_relative_deviation <= cfg.tolerance;
    Ok(vec![record(
        pass,
        json!({
            "record": "expansion_identity",
            "direct": report.lhs.coefficients,
            "assembled": report.rhs.coefficients,
            "max_absolute_deviation": report.max_absolute_deviation,
            "max_relative_deviation": report.max_relative_deviation,
            "tolerance": cfg.tolerance,
        }),
    )])
}

fn run_schwinger(cfg: &RunConfig, model: &DiscretizedModel) -> Result<Vec<Record>, String> {
    let assembled = schwinger_series(model, cfg.order, cfg.p_max, cfg.quad_order, cfg.budget)
        .map_err(|e| e.to_string())?;
    let direct = schwinger_direct(model, cfg.order, cfg.budget).map_err(|e| e.to_string())?;
    let dev = assembled.max_abs_diff(&direct);
    Ok(vec![record(
        dev <= cfg.tolerance,
        json!({
            "record": "schwinger",
            "assembled": assembled.coefficients,
            "direct": direct.coefficients,
            "deviation": dev,
            "value": assembled.eval(cfg.lambda),
        }),
    )])
}

fn run_bounds(cfg: &RunConfig, model: &DiscretizedModel) -> Result<Vec<Record>, String> {
    let constants = BoundConstants::quartic_reference(&model.kernel, &model.interaction);
    let mut out = Vec::new();
    out.push(record(
        true,
        json!({
            "record": "constants",
            "k1": constants.k1, "k2": constants.k2, "k3": constants.k3,
            "k4": constants.k4, "k5": constants.k5, "k6": constants.k6,
            "k7": constants.k7, "k8": constants.k8, "k9": constants.k9,
            "k10": constants.k10, "r1": constants.r1, "r": constants.r,
            "lambda_star": constants.lambda_star(),
        }),
    ));

    let source = model.source_polymer();
    let graphs: Vec<_> = enumerate(&model.window, &source, cfg.p_max)
        .into_iter()
        .filter(|g| g.contributes())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jobs: Vec<_> = graphs
        .iter()
        .map(|g| (g, random_prefix(&mut rng, g.len())))
        .collect();
    let sums = parallel_map(jobs, |(g, h)| row_sum_check(g, h));
    let worst_row = sums.iter().cloned().fold(0.0f64, f64::max);
    out.push(record(
        worst_row <= 1.0 + 1e-12,
        json!({"record": "row_sums", "graphs": graphs.len(), "worst": worst_row}),
    ));

    let witness = triple_link_check(&model.window, &source, cfg.p_max);
    out.push(record(
        witness.is_none(),
        json!({"record": "triple_link_exclusion", "witness_found": witness.is_some()}),
    ));

    let (worst_ratio, tightest) =
        volume_argument_check(&model.window, &source, cfg.p_max, &constants);
    out.push(record(
        worst_ratio <= 1.0 + 1e-12,
        json!({"record": "volume_argument", "worst_ratio": worst_ratio, "tightest_constant": tightest}),
    ));

    for p in 1..=4usize {
        for mask in 0..(1u32 << p) {
            let j: Vec<usize> = (1..=p).filter(|q| mask & (1 << (q - 1)) != 0).collect();
            let v = simplex_integral_exact(p, &j);
            let vf = v.to_f64().unwrap();
            let bound = simplex_integral_bound(p, j.len());
            out.push(record(
                vf <= bound + 1e-12,
                json!({"record": "simplex_integral", "p": p, "j": j, "value": v.to_string(), "bound": bound}),
            ));
        }
    }

    let lambda = constants.lambda_star().min(cfg.lambda.max(1e-6));
    let report = majorant_sum(
        &model.window,
        &source,
        model.source_count(),
        cfg.p_max,
        lambda,
        &constants,
        cfg.quad_order.min(6),
    );
    let dominated = report
        .partial_sums
        .iter()
        .zip(&report.geometric)
        .all(|(s, g)| s <= &(g * (1.0 + 1e-9)));
    out.push(record(
        dominated && report.ratio_bound <= 0.5 + 1e-12,
        json!({
            "record": "majorant",
            "lambda": lambda,
            "partial_sums": report.partial_sums,
            "geometric": report.geometric,
            "ratio_bound": report.ratio_bound,
        }),
    ));
    Ok(out)
}

fn emit(cfg: &RunConfig, records: &[Record]) -> Result<(), String> {
    let mut text = String::new();
    if cfg.format == "csv" {
        text.push_str("record,pass,detail\n");
        for r in records {
            let obj = r.value.as_object().unwrap();
            let name = obj["record"].as_str().unwrap_or("?");
            let detail = serde_json::to_string(&r.value).unwrap().replace('"', "'");
            text.push_str(&format!("{name},{},\"{detail}\"\n", r.pass));
        }
    } else {
        for r in records {
            let mut obj = r.value.clone();
            obj["pass"] = json!(r.pass);
            text.push_str(&serde_json::to_string(&obj).unwrap());
            text.push('\n');
        }
    }
    match &cfg.output {
        Some(path) => fs::write(path, text).map_err(|e| format!("write {path:?}: {e}")),
        None => {
            print!("{text}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn write_manifest(cfg: &RunConfig, subcommand: &str, elapsed_ms: u128) {
    let manifest = json!({
        "subcommand": subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": threads(),
        "elapsed_ms": elapsed_ms,
        "config": serde_json::to_value(cfg).unwrap(),
    });
    let text = serde_json::to_string_pretty(&manifest).unwrap();
    match &cfg.output {
        Some(path) => {
            let mut m = path.clone();
            m.set_extension("manifest.json");
            fs::write(&m, text).ok();
        }
        None => eprintln!("{text}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let started = Instant::now();
    let name = match cli.command {
        Command::Kernel => "kernel",
        Command::Enumerate => "enumerate",
        Command::Matrix => "matrix",
        Command::VerifyIdentity => "verify-identity",
        Command::Schwinger => "schwinger",
        Command::Bounds => "bounds",
    };
    let result = match &cli.command {
        Command::Kernel => run_kernel(&cfg),
        _ => build_model(&cfg).and_then(|model| match &cli.command {
            Command::Enumerate => Ok(run_enumerate(&cfg, &model)),
            Command::Matrix => Ok(run_matrix(&cfg, &model)),
            Command::VerifyIdentity => run_verify_identity(&cfg, &model),
            Command::Schwinger => run_schwinger(&cfg, &model),
            Command::Bounds => run_bounds(&cfg, &model),
            Command::Kernel => unreachable!(),
        }),
    };
    let records = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let all_pass = records.iter().all(|r| r.pass);
    let mut records = records;
    if !all_pass {
        let failed: Vec<&str> = records
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.value["record"].as_str().unwrap_or("?"))
            .collect();
        let failure = json!({"record": "failure", "failed": failed});
        records.push(record(false, failure));
    }
    if let Err(e) = emit(&cfg, &records) {
        eprintln!("io error: {e}");
        return ExitCode::from(2);
    }
    write_manifest(&cfg, name, started.elapsed().as_millis());
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
