mod config;
mod suites;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use suites::{num, run_suite, Suite, SuiteResult};

/// Verification driver for the repeated-interaction low-density model.
#[derive(Debug, Parser)]
#[command(name = "repint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunFlags {
    /// Suite to run; repeat for several. Defaults to the config's list, or all.
    #[arg(long = "suite", value_name = "NAME")]
    suites: Vec<String>,
    /// Output directory for CSVs and report.txt.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace the point count of every h-grid.
    #[arg(long, value_name = "K")]
    grid_count: Option<usize>,
    /// Override a tolerance, e.g. `--tol gram=1e-9`.
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = config::parse_tol)]
    tolerances: Vec<(String, f64)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the selected suites and write CSVs plus report.txt.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check a config without running anything.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Print the report of a previous run; exits 0 iff it passed.
    Report { dir: PathBuf },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn overrides(flags: RunFlags) -> Overrides {
    Overrides {
        suites: flags.suites,
        out: flags.out,
        grid_count: flags.grid_count,
        tolerances: flags.tolerances,
    }
}

fn load_config(path: &Path, flags: RunFlags) -> Result<RunConfig> {
    let raw = config::load(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    RunConfig::from_raw(raw, &overrides(flags), dir)
}

fn grid_line(label: &str, g: &config::RawGrid) -> String {
    format!("{label}: start {}, ratio {}, {} points", num(g.start), num(g.ratio), g.count)
}

fn describe(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let gamma: Vec<String> = cfg.bath.gamma().iter().map(|g| num(*g)).collect();
    let _ = writeln!(
        s,
        "instance: d = {}, n = {}, beta = {}, gamma = ({})",
        cfg.system.d(),
        cfg.bath.n(),
        num(cfg.bath.beta()),
        gamma.join(", ")
    );
    if let Some(seed) = cfg.seed {
        let _ = writeln!(s, "seed: {seed}");
    }
    let _ = writeln!(s, "{}", grid_line("grid", &cfg.grid_spec));
    let _ = writeln!(s, "{}", grid_line("coefficient grid", &cfg.coefficient_grid_spec));
    let _ = writeln!(s, "t: {}", num(cfg.t));
    let names: Vec<&str> = cfg.suites.iter().map(|s| s.name()).collect();
    let _ = writeln!(s, "suites: {}", names.join(", "));
    let tols: Vec<String> = cfg.tolerances.iter().map(|(n, v)| format!("{n}={v:e}")).collect();
    let _ = writeln!(s, "tolerances: {}", tols.join(" "));
    s
}

fn render_report(cfg: &RunConfig, results: &[SuiteResult]) -> String {
    let mut s = String::from("repint verification report\n\n");
    s.push_str(&describe(cfg));
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "suite {} {} ({})",
            r.suite.name(),
            if r.passed { "PASS" } else { "FAIL" },
            r.suite.file_name()
        );
        for line in &r.details {
            let _ = writeln!(s, "  {line}");
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let _ = writeln!(
        s,
        "\ntotals: {} suites, {passed} passed, {} failed",
        results.len(),
        results.len() - passed
    );
    let _ = writeln!(s, "RESULT: {}", if passed == results.len() { "PASS" } else { "FAIL" });
    s
}

fn run(cfg: &RunConfig) -> Result<bool> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut results = Vec::with_capacity(cfg.suites.len());
    for &suite in &cfg.suites {
        let r = run_suite(suite, cfg).with_context(|| format!("suite {}", suite.name()))?;
        let path = cfg.out.join(suite.file_name());
        fs::write(&path, &r.csv).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("{} {}", suite.name(), if r.passed { "PASS" } else { "FAIL" });
        results.push(r);
    }
    let report = render_report(cfg, &results);
    let path = cfg.out.join("report.txt");
    fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
    print!("{report}");
    Ok(results.iter().all(|r| r.passed))
}

fn report(dir: &Path) -> Result<bool> {
    let path = dir.join("report.txt");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    print!("{text}");
    let mut missing = Vec::new();
    for line in text.lines() {
        if let Some(name) = line.strip_prefix("suite ").and_then(|r| r.split_whitespace().next()) {
            if let Some(s) = Suite::parse(name) {
                if !dir.join(s.file_name()).is_file() {
                    missing.push(s.file_name());
                }
            }
        }
    }
    if !missing.is_empty() {
        eprintln!("missing CSV files: {}", missing.join(", "));
    }
    Ok(missing.is_empty() && text.lines().any(|l| l == "RESULT: PASS"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { config, flags } => match load_config(&config, flags) {
            Ok(cfg) => {
                print!("config OK\n{}", describe(&cfg));
                return ExitCode::SUCCESS;
            }
            Err(e) => Err(e),
        },
        Command::Run { config, flags } => match load_config(&config, flags) {
            Ok(cfg) => run(&cfg),
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        Command::Report { dir } => report(&dir),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
