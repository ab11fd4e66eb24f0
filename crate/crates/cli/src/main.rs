use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qgaudin_cli::commands::{self, Outcome};
use qgaudin_cli::config::{apply_set, load_table, Axis, RawConfig, RunConfig};
use qgaudin_cli::report::Report;
use qgaudin_cli::{verify, CliError, CliResult};

#[derive(Parser)]
#[command(name = "qgaudin", version, about = "Integrate and check deformed Gaudin systems")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set integrator.t1=40`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for random initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format. Repeatable.
    #[arg(long = "format", global = true, value_enum)]
    format: Vec<FormatArg>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Z,
    Kappa,
    Energy,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate and write trajectory files.
    Simulate,
    /// Closed-form cluster solutions against integration.
    Compare,
    /// Repeat the run over a parameter axis.
    Scan {
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Group law and Poisson-Lie checks.
    GroupCheck,
    /// Timing of integration against closed-form evaluation.
    Bench {
        /// Comma-separated chain sizes.
        #[arg(long = "n", value_delimiter = ',')]
        n_values: Vec<usize>,
    },
    /// Run the acceptance suite.
    Verify,
}

fn table(cli: &Cli) -> CliResult<toml::Table> {
    let mut t = load_table(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        apply_set(&mut t, &format!("init.seed={seed}"))?;
    }
    if let Some(out) = &cli.out {
        let mut output = toml::Table::new();
        if let Some(toml::Value::Table(old)) = t.remove("output") {
            output = old;
        }
        output.insert("dir".into(), toml::Value::String(out.display().to_string()));
        t.insert("output".into(), toml::Value::Table(output));
    }
    if !cli.format.is_empty() {
        let names = cli
            .format
            .iter()
            .map(|f| {
                let s = match f {
                    FormatArg::Csv => "'csv'",
                    FormatArg::Json => "'json'",
                    FormatArg::Svg => "'svg'",
                };
                s.to_string()
            })
            .collect::<Vec<_>>()
            .join(",");
        apply_set(&mut t, &format!("output.formats=[{names}]"))?;
    }
    Ok(t)
}

fn finish(out: &Outcome, dir: &Path) -> CliResult<()> {
    for c in &out.report.checks {
        println!("{}", c.line());
    }
    out.write(dir)?;
    println!("wrote {}", dir.display());
    out.status()
}

fn execute(cli: &Cli) -> CliResult<()> {
    let t = table(cli)?;
    match &cli.cmd {
        Cmd::Verify => {
            let checks = verify::run_all(|c| println!("{}", c.line()));
            let mut report = Report::new("verify", None);
            for c in checks {
                report.push(c);
            }
            let out = Outcome { report, artifacts: Vec::new() };
            if let Some(dir) = &cli.out {
                out.write(dir)?;
            }
            out.status()
        }
        Cmd::GroupCheck => {
            let raw = RawConfig::from_table(t)?;
            let out = commands::group_check(raw.z.unwrap_or(0.3), raw.kappa.unwrap_or(1.0), raw.init.seed)?;
            finish(&out, Path::new(&raw.output.dir))
        }
        cmd => {
            let cfg = RunConfig::from_table(t)?;
            let out = match cmd {
                Cmd::Simulate => commands::simulate(&cfg)?,
                Cmd::Compare => commands::compare(&cfg)?,
                Cmd::Scan { axis, values } => {
                    let axis = match axis {
                        Some(AxisArg::Z) => Axis::Z,
                        Some(AxisArg::Kappa) => Axis::Kappa,
                        Some(AxisArg::Energy) => Axis::Energy,
                        None => cfg
                            .scan
                            .axis
                            .ok_or_else(|| CliError::config("scan.axis", "give --axis or scan.axis"))?,
                    };
                    let values = if values.is_empty() { &cfg.scan.values } else { values };
                    commands::scan(&cfg, axis, values)?
                }
                Cmd::Bench { n_values } => {
                    let ns = if n_values.is_empty() { &cfg.bench.n_values } else { n_values };
                    commands::bench(&cfg, ns)?
                }
                Cmd::Verify | Cmd::GroupCheck => unreachable!("handled above"),
            };
            finish(&out, Path::new(&cfg.output.dir))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
