use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use argmaxlab::harness::{run_experiment, ExperimentConfig, ExperimentKind, Report};
use argmaxlab::perturb::perturb_path;
use argmaxlab::process::ProcessSampler;
use argmaxlab::sampler::SeedSpec;
use argmaxlab::{Error, Result};

/// Monte Carlo checks of argmax identities for random processes and fields.
#[derive(Parser)]
#[command(name = "argmaxlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a path (written as path.csv) and run the configured experiment, if any.
    Simulate(RunArgs),
    /// Covariance identities (identity-1d, identity-nd, gradient-identity).
    VerifyIdentity(RunArgs),
    /// Derivative criterion for the expected supremum of the tilted process.
    VerifyDerivative(RunArgs),
    /// Bridge reconstruction residuals and conditional covariances.
    VerifyBridge(RunArgs),
    /// Lévy case analysis and the reversal check.
    LevyCases(RunArgs),
    /// Last-passage geodesics through additive Brownian motion.
    LppGeodesic(RunArgs),
    /// Pool the replicates of several report.json files of one experiment.
    ReportMerge {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Grid resolution (subintervals per axis, or simplex resolution).
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &RunArgs, allowed: &[ExperimentKind]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if cfg.kind.is_none() && allowed.len() == 1 {
        cfg.kind = Some(allowed[0]);
    }
    if let Some(k) = cfg.kind {
        if !allowed.is_empty() && !allowed.contains(&k) {
            let names: Vec<&str> = allowed.iter().map(|k| k.as_str()).collect();
            return Err(Error::Configuration(format!(
                "kind `{}` does not belong to this subcommand (expected one of: {})",
                k.as_str(),
                names.join(", ")
            )));
        }
    } else if !allowed.is_empty() {
        return Err(Error::Configuration("missing field `kind`".into()));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.replicates {
        cfg.replicates = n;
    }
    if let Some(n) = args.grid_n {
        if let Some(g) = &cfg.grid {
            cfg.grid = Some(g.with_resolution(n));
        }
        if let Some(l) = cfg.lpp.as_mut() {
            l.resolution = n;
        }
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn finish(report: &Report, dir: &Path) -> Result<bool> {
    report.write(dir)?;
    for g in &report.gates {
        println!(
            "{} {}: {} ({})",
            if g.passed { "PASS" } else { "FAIL" },
            g.name,
            g.value,
            g.bound
        );
    }
    println!(
        "{}: {} gates, {} in {:.2}s; wrote {}",
        report.experiment,
        report.gates.len(),
        if report.passed { "all passed" } else { "some FAILED" },
        report.wall_clock_seconds,
        dir.join("report.json").display()
    );
    Ok(report.passed)
}

fn simulate(args: &RunArgs) -> Result<bool> {
    let cfg = load(args, &[])?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    if let (Some(process), Some(grid)) = (&cfg.process, &cfg.grid) {
        let sampler = ProcessSampler::new(process, grid)?;
        let mut path = sampler.sample(SeedSpec::new(cfg.seed, 0))?;
        if let Some(p) = &cfg.perturbation {
            path = perturb_path(&path, p)?;
        }
        path.write_csv(std::fs::File::create(dir.join("path.csv"))?)?;
        if path.jumps.is_some() {
            path.write_jumps_csv(std::fs::File::create(dir.join("jumps.csv"))?)?;
        }
    }
    if cfg.kind.is_some() {
        return finish(&run_experiment(&cfg)?, &dir);
    }
    Ok(true)
}

fn run(args: &RunArgs, allowed: &[ExperimentKind]) -> Result<bool> {
    let cfg = load(args, allowed)?;
    let report = run_experiment(&cfg)?;
    finish(&report, &out_dir(&cfg))
}

fn main() -> ExitCode {
    use ExperimentKind::*;
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::VerifyIdentity(a) => run(a, &[Identity1d, IdentityNd, GradientIdentity]),
        Command::VerifyDerivative(a) => run(a, &[Derivative]),
        Command::VerifyBridge(a) => run(a, &[BridgeCheck]),
        Command::LevyCases(a) => run(a, &[LevyCases]),
        Command::LppGeodesic(a) => run(a, &[LppGeodesic]),
        Command::ReportMerge { out, reports } => reports
            .iter()
            .map(|p| Report::read_for_merge(p))
            .collect::<Result<Vec<_>>>()
            .and_then(|rs| Report::merge(&rs))
            .and_then(|r| finish(&r, out)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
