use clap::{Args, Parser, Subcommand, ValueEnum};
use renormkit::oseledets::SplittingEstimate;
use renormkit::pipeline::{
    build_reference, run_pipeline, write_report, ExperimentConfig, MapReport, Mode, PathFile, PermRows, PipelineReport,
};
use renormkit::{Error, Permutation};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "renormkit", version, about = "Renormalization and rigidity experiments for GIETs and circle maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record the reference path and its accelerated windows.
    Induce(Common),
    /// Oseledets splitting along the reference path.
    Split(Common),
    /// Affine shadow extraction.
    Shadow(Common),
    /// Cone-limit affine model and convergence series.
    Model(Common),
    /// Towers, cohomological equation and conjugacy verification.
    Conjugate(Common),
    /// Full pipeline with CSV and JSON reports.
    Pipeline(Common),
    /// Built-in cross-checks and golden experiments.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Giet,
    Circle,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "N")]
    depth: Option<usize>,
    #[arg(long, value_name = "M")]
    grid: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<ModeArg>,
    #[arg(long, value_name = "K")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, value_name = "K", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Diagnostic(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidData(_) | Error::InvalidPermutation(_) => Failure::Usage(e.to_string()),
            _ => Failure::Diagnostic(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn load(c: &Common) -> Result<ExperimentConfig, Failure> {
    if !c.config.exists() {
        return Err(Failure::Usage(format!("config file {} not found", c.config.display())));
    }
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(d) = c.depth {
        cfg.depth = d;
    }
    if let Some(g) = c.grid {
        cfg.grid = g;
    }
    if let Some(m) = c.mode {
        cfg.mode = match m {
            ModeArg::Giet => Mode::Giet,
            ModeArg::Circle => Mode::Circle,
        };
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(c: &Common, cfg: &ExperimentConfig) -> PathBuf {
    c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write(path, &serde_json::to_string_pretty(value).expect("report serializes"))
}

fn rows(p: &Permutation) -> PermRows {
    let row = |eps| {
        p.row(eps)
            .iter()
            .map(|&a| p.alphabet()[a].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    PermRows {
        top: row(0),
        bottom: row(1),
    }
}

fn induce(c: &Common) -> Outcome {
    let cfg = load(c)?;
    let r = build_reference(&cfg.reference, cfg.depth, cfg.splitting_depth)?;
    let dir = out_dir(c, &cfg);
    let path = PathFile {
        perm: rows(&r.path.start),
        types: r.path.types.clone(),
    };
    write_json(&dir.join("path.json"), &path)?;
    let mut lines = String::new();
    for (k, w) in r.windows.iter().enumerate() {
        let matrix: Vec<Vec<String>> = w.matrix.rows().iter().map(|row| row.iter().map(|x| x.to_string()).collect()).collect();
        let heights: Vec<String> = w.heights.iter().map(|x| x.to_string()).collect();
        let v = json!({"level": k, "start": w.start, "end": w.end, "matrix": matrix, "heights": heights});
        lines.push_str(&v.to_string());
        lines.push('\n');
    }
    write(&dir.join("windows.jsonl"), &lines)?;
    println!(
        "{} steps, {} windows, gamma of length {} -> {}",
        r.path.len(),
        r.windows.len(),
        r.schedule.gamma.len(),
        dir.display()
    );
    Ok(true)
}

fn split_summary(k: usize, s: &SplittingEstimate) -> Value {
    json!({
        "level": k,
        "dims": s.dims(),
        "exponents_u": s.exponents_u,
        "exponents_c": s.exponents_c,
        "exponents_s": s.exponents_s,
        "residual": s.residual(),
        "cond_central": s.cond_central,
    })
}

fn split(c: &Common) -> Outcome {
    let cfg = load(c)?;
    let r = build_reference(&cfg.reference, cfg.depth, cfg.splitting_depth)?;
    let levels: Vec<Value> = r.splits.iter().enumerate().take(cfg.depth + 1).map(|(k, s)| split_summary(k, s)).collect();
    let dir = out_dir(c, &cfg);
    write_json(&dir.join("split.json"), &json!({"config_hash": cfg.hash(), "periodic": r.periodic, "levels": levels}))?;
    let worst = r.splits.iter().map(|s| s.residual()).fold(0.0, f64::max);
    println!("splitting residual {worst:.3e} over {} levels", levels.len());
    Ok(true)
}

/// Runs the pipeline and keeps the checks whose names contain one of `keys`.
fn staged(c: &Common, name: &str, keys: &[&str], view: fn(&MapReport) -> Value) -> Outcome {
    let cfg = load(c)?;
    let rep = run_pipeline(&cfg)?;
    let checks: Vec<(&String, &bool)> = rep.checks.iter().filter(|(k, _)| keys.iter().any(|s| k.contains(s))).collect();
    let ok = rep.errors.is_empty() && checks.iter().all(|(_, &v)| v);
    let maps: Vec<Value> = rep.maps.iter().map(view).collect();
    let body = json!({
        "config_hash": rep.config_hash,
        "seed": rep.seed,
        "tolerances": rep.tolerances,
        "maps": maps,
        "errors": rep.errors,
        "checks": checks.iter().map(|(k, v)| ((*k).clone(), **v)).collect::<std::collections::BTreeMap<_, _>>(),
        "passed": ok,
    });
    write_json(&out_dir(c, &cfg).join(format!("{name}.json")), &body)?;
    summarize(&rep, &checks);
    Ok(ok)
}

fn fits(m: &MapReport, keys: &[&str]) -> Value {
    json!(keys
        .iter()
        .filter_map(|k| m.fits.get(*k).map(|f| (k.to_string(), f)))
        .collect::<std::collections::BTreeMap<_, _>>())
}

fn shadow_view(m: &MapReport) -> Value {
    json!({
        "index": m.index,
        "omega": m.omega,
        "omega_f": m.omega_f,
        "shadow_tolerance": m.shadow_tolerance,
        "cauchy_tail": m.cauchy_tail,
        "splitting_residual": m.splitting_residual,
        "fits": fits(m, &["e2", "e3", "r_n", "shadow_err", "increment"]),
        "ec_rv_clock": m.ec_rv_clock,
        "truth": m.truth,
    })
}

fn model_view(m: &MapReport) -> Value {
    json!({
        "index": m.index,
        "model_omega": m.model_omega,
        "certified_depth": m.certified_depth,
        "interval_ratio_limit": m.interval_ratio_limit,
        "fits": fits(m, &["e1", "distortion", "interval_gap", "image_gap", "d_p", "ratio_gap", "dC1"]),
        "circle": m.circle,
    })
}

fn conjugate_view(m: &MapReport) -> Value {
    json!({
        "index": m.index,
        "conj_level": m.conj_level,
        "conjugacy": m.conjugacy,
        "levels": m.levels,
        "birkhoff": m.birkhoff,
        "C": m.c,
        "truth": m.truth,
    })
}

fn summarize(rep: &PipelineReport, checks: &[(&String, &bool)]) {
    for e in &rep.errors {
        println!("error: {e}");
    }
    for (k, v) in checks {
        println!("{} {k}", if **v { "pass" } else { "FAIL" });
    }
}

fn pipeline(c: &Common) -> Outcome {
    let cfg = load(c)?;
    let rep = run_pipeline(&cfg)?;
    let dir = out_dir(c, &cfg);
    write_report(&rep, &dir)?;
    let checks: Vec<(&String, &bool)> = rep.checks.iter().collect();
    summarize(&rep, &checks);
    for m in &rep.maps {
        println!("map {}: omega {:?}, C {:.9}", m.index, m.omega, m.c);
    }
    println!("{} -> {}", if rep.passed { "passed" } else { "failed" }, dir.display());
    Ok(rep.passed)
}

fn selftest(a: &SelftestArgs) -> Outcome {
    let results = renormkit::selftest::run(a.seed);
    for r in &results {
        let tag = if r.passed { "pass" } else { "FAIL" };
        if r.detail.is_empty() {
            println!("{tag} {} ({:.2} s)", r.name, r.seconds);
        } else {
            println!("{tag} {} ({:.2} s): {}", r.name, r.seconds, r.detail);
        }
    }
    if let Some(dir) = &a.out {
        write_json(&dir.join("selftest.json"), &results)?;
    }
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Induce(c) => induce(c),
        Command::Split(c) => split(c),
        Command::Shadow(c) => staged(c, "shadow", &["e2", "e3", "r_n", "truth.omega"], shadow_view),
        Command::Model(c) => staged(
            c,
            "model",
            &["e1", "interval_gap", "image_gap", "dC1", "circle."],
            model_view,
        ),
        Command::Conjugate(c) => staged(
            c,
            "conjugate",
            &["conj_residual", "cohom_residual", "truth.psi", "truth.dh", "pair."],
            conjugate_view,
        ),
        Command::Pipeline(c) => pipeline(c),
        Command::Selftest(a) => selftest(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Diagnostic(m)) => {
            eprintln!("diagnostic failure: {m}");
            ExitCode::from(2)
        }
    }
}
