use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use supertrans_cli::{run, Command, CommandArgs};

/// Transversality and preimage computations on superdomains.
#[derive(Parser)]
#[command(name = "supertrans", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Validate a morphism declaration and echo its images.
    CheckMorphism(CommonOpts),
    /// Print the symbolic super Jacobian blocks of a morphism.
    Jacobian(CommonOpts),
    /// Classify the tangent map of a morphism at listed points.
    Classify(CommonOpts),
    /// Decide transversality of a morphism to a submanifold.
    Transversal(CommonOpts),
    /// Construct the preimage submanifold in the coordinate-affine case.
    Preimage(CommonOpts),
}

#[derive(Args)]
struct CommonOpts {
    /// Scene file declaring the named objects.
    #[arg(long, value_name = "FILE")]
    scene: PathBuf,
    /// Morphism to operate on.
    #[arg(long, value_name = "NAME")]
    morphism: Option<String>,
    /// Submanifold of the morphism's target.
    #[arg(long, value_name = "NAME")]
    submanifold: Option<String>,
    /// Named grid for fiber scanning.
    #[arg(long, value_name = "NAME")]
    grid: Option<String>,
    /// Named point list to evaluate at.
    #[arg(long, value_name = "NAME")]
    points: Option<String>,
    /// Also write the report to this path.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Numeric tolerance for fiber membership and rank decisions.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Sub::CheckMorphism(o) => (Command::CheckMorphism, o),
        Sub::Jacobian(o) => (Command::Jacobian, o),
        Sub::Classify(o) => (Command::Classify, o),
        Sub::Transversal(o) => (Command::Transversal, o),
        Sub::Preimage(o) => (Command::Preimage, o),
    };
    let outcome = run(&CommandArgs {
        command,
        scene_path: opts.scene,
        morphism: opts.morphism,
        submanifold: opts.submanifold,
        grid: opts.grid,
        points: opts.points,
        tolerance: opts.tolerance,
    });
    if std::io::stdout().write_all(&outcome.stdout).is_err() {
        return ExitCode::from(2);
    }
    if let Some(path) = opts.json {
        if let Err(e) = std::fs::write(&path, &outcome.stdout) {
            eprintln!("cannot write report to `{}`: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(outcome.exit as u8)
}
