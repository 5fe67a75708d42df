use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradhom_core::{render_report, render_run_summary, run, Determinism, DisplayUnits, GradhomError, ReportOptions, RunConfig};

#[derive(Parser)]
#[command(name = "gradhom", version, about = "Effective strain-gradient tensors of a periodic cell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problems and print C, G and D.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Result JSON path (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for per-corrector VTK files.
    #[arg(long)]
    export_fields: Option<PathBuf>,
    /// Homothetic ratio; G and D are shown scaled by it.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Force sequential kernels (the default unless the config says otherwise).
    #[arg(long)]
    deterministic: bool,
    /// Print Pa, N/m and N instead of GPa, kN/mm and TN.
    #[arg(long)]
    si_units: bool,
    /// Write the reduced stiffness matrix in Matrix Market form.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn execute(args: RunArgs) -> Result<(), GradhomError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(out) = args.output {
        config.outputs.result = Some(out);
    }
    if let Some(dir) = args.export_fields {
        config.outputs.vtk_dir = Some(dir);
    }
    if let Some(path) = args.dump_matrix {
        config.outputs.matrix_market = Some(path);
    }
    if let Some(eps) = args.epsilon {
        config.epsilon = eps;
    }
    if args.deterministic {
        config.determinism = Determinism::Deterministic;
    }
    let (result, report) = run(&config)?;
    let options = ReportOptions {
        units: if args.si_units { DisplayUnits::Si } else { DisplayUnits::Engineering },
        apply_epsilon: args.epsilon.is_some(),
    };
    print!("{}", render_report(&result, &options));
    println!();
    print!("{}", render_run_summary(&report));
    if let Some(path) = args.report {
        std::fs::write(&path, report.to_json()).map_err(|source| GradhomError::Output { path, source })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => execute(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
