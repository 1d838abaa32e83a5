use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lognls_cli::output::write_atomic;
use lognls_cli::{exit, parse_config, plot, run_experiment, ParsedConfig, PlotSpec, Status, Table};

#[derive(Parser)]
#[command(name = "lognls", version, about = "Logarithmic NLS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Plot CSV columns as an SVG.
    Plot {
        csv: PathBuf,
        spec: PathBuf,
        /// Defaults to the CSV path with an `.svg` extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<ParsedConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(exit::IO)
    })?;
    let parsed = parse_config(&text).map_err(|errors| {
        for e in errors {
            match e.line {
                Some(_) => eprintln!("{}:{e}", path.display()),
                None => eprintln!("{}: {e}", path.display()),
            }
        }
        ExitCode::from(exit::INVALID)
    })?;
    for w in &parsed.warnings {
        eprintln!("{}: warning: {w}", path.display());
    }
    Ok(parsed)
}

fn run(path: &Path) -> Result<ExitCode, ExitCode> {
    let parsed = load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    match run_experiment(&parsed.config, base, parsed.warnings) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            for c in summary.checks.iter().filter(|c| !c.pass) {
                eprintln!("check failed: {} = {:.3e} > {:.3e}", c.name, c.value, c.limit);
            }
            Ok(ExitCode::from(match summary.status {
                Status::Passed => exit::OK,
                Status::Failed => exit::NUMERICAL,
            }))
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            println!("{}", serde_json::json!({ "status": "error", "error": e.to_json() }));
            Err(ExitCode::from(if e.is_numerical() {
                exit::NUMERICAL
            } else if matches!(e, lognls_cli::RunError::Output(_)) {
                exit::IO
            } else {
                exit::INVALID
            }))
        }
    }
}

fn plot_cmd(csv: &Path, spec_path: &Path, output: Option<PathBuf>) -> Result<ExitCode, ExitCode> {
    let io = |p: &Path, e: &dyn std::fmt::Display| {
        eprintln!("{}: {e}", p.display());
        ExitCode::from(exit::IO)
    };
    let text = std::fs::read_to_string(spec_path).map_err(|e| io(spec_path, &e))?;
    let spec: PlotSpec = toml::from_str(&text).map_err(|e| {
        match e.span() {
            Some(span) => {
                let line = text[..span.start].matches('\n').count() + 1;
                let col = span.start - text[..span.start].rfind('\n').map_or(0, |i| i + 1) + 1;
                eprintln!("{}:{line}:{col}: {}", spec_path.display(), e.message());
            }
            None => eprintln!("{}: {}", spec_path.display(), e.message()),
        }
        ExitCode::from(exit::INVALID)
    })?;
    let table = Table::read(csv).map_err(|e| io(csv, &e))?;
    let p = plot::render(&table, &spec).map_err(|e| {
        eprintln!("{}: {e}", csv.display());
        ExitCode::from(exit::INVALID)
    })?;
    let out = output.unwrap_or_else(|| csv.with_extension("svg"));
    write_atomic(&out, p.svg.as_bytes()).map_err(|e| io(&out, &e))?;
    let slopes: serde_json::Map<String, serde_json::Value> = spec
        .y
        .iter()
        .zip(&p.slopes)
        .map(|(name, s)| (name.clone(), serde_json::json!(s)))
        .collect();
    println!("{}", serde_json::json!({ "svg": out, "slopes": slopes }));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run(&config),
        Command::Validate { config } => load(&config).map(|p| {
            println!("{}", p.config.to_toml());
            ExitCode::SUCCESS
        }),
        Command::Plot { csv, spec, output } => plot_cmd(&csv, &spec, output),
    };
    result.unwrap_or_else(|code| code)
}
