use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kondra::lab::{self, ExperimentKind, Overrides, Status};

#[derive(Parser)]
#[command(
    name = "kondra-lab",
    version,
    about = "Weighted Sobolev experiments on singular planar domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the level meshes and report their quality.
    Mesh(Args),
    /// Solve the manufactured problem on every level.
    Solve(Args),
    /// Convergence rates against dof^-1/2.
    Converge(Args),
    /// Hardy constant trichotomy in the weight exponent.
    Hardy(Args),
    /// Weighted solution/data norm ratios across levels.
    Stability(Args),
    /// Admissibility, curvature, completeness and symbol probes.
    GeometryCheck(Args),
    /// Kondratiev against conformal Sobolev norms.
    NormsCheck(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Mesh(a) => (ExperimentKind::Mesh, a),
        Command::Solve(a) => (ExperimentKind::Solve, a),
        Command::Converge(a) => (ExperimentKind::Converge, a),
        Command::Hardy(a) => (ExperimentKind::Hardy, a),
        Command::Stability(a) => (ExperimentKind::Stability, a),
        Command::GeometryCheck(a) => (ExperimentKind::GeometryCheck, a),
        Command::NormsCheck(a) => (ExperimentKind::NormsCheck, a),
    };
    let overrides = Overrides {
        out: args.out,
        levels: args.levels,
    };
    let cfg = match lab::load_config(&args.config, kind, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("kondra-lab: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let report = lab::run_experiment(&cfg);
    if !args.quiet {
        for fit in &report.fits {
            println!(
                "fit {:<8} slope {:>8.4}  R2 {:.4}{}",
                fit.name,
                fit.slope,
                fit.r2,
                fit.flag.as_deref().map(|f| format!("  {f}")).unwrap_or_default()
            );
        }
        for v in &report.classifications {
            println!("{:<32} {:<12} {}", v.subject, v.value, v.detail);
        }
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        println!(
            "wrote {} artifacts to {}",
            report.artifacts.len(),
            cfg.output.dir.display()
        );
    }
    match report.status {
        Status::Ok => ExitCode::SUCCESS,
        Status::Failed => {
            eprintln!("kondra-lab: {}", report.error.as_deref().unwrap_or("failed"));
            ExitCode::from(1)
        }
    }
}
