use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gerbe_index::scenario::{RunOptions, Scenario, ScenarioError, ScenarioReport};

#[derive(Parser)]
#[command(name = "gerbe-index", version, about = "Twisted K-theory and families index verification")]
struct Cli {
    /// Worker threads (defaults to available parallelism).
    #[arg(long, global = true, env = "GERBE_INDEX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural checks: cocycle laws, partition of unity, ellipticity.
    Validate(Common),
    /// Dixmier-Douady class of the scenario's twist.
    Ddclass {
        /// Scenario file or bundled fixture name.
        scenario: String,
    },
    /// Chern character integrals and the Thom/Riemann-Roch check.
    Chern(Common),
    /// Analytic index bundle and its Chern character.
    IndexAnalytic(Common),
    /// Cohomological index from the symbol.
    IndexTopological(Common),
    /// Every enabled check; exit 0 iff all pass.
    Verify(Common),
    /// Render a JSON report written by `--report`.
    Report { path: String },
    /// List the bundled fixtures.
    Fixtures,
}

#[derive(Args)]
struct Common {
    /// Scenario file or bundled fixture name.
    scenario: String,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<String>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions { resolution: self.resolution, truncation: self.truncation, tolerance: self.tolerance }
    }
}

fn emit(report: &ScenarioReport, path: Option<&str>) -> Result<ExitCode, ScenarioError> {
    print!("{}", report.render());
    if let Some(p) = path {
        let json = serde_json::to_string_pretty(report).expect("report serialises");
        std::fs::write(p, json + "\n").map_err(|e| ScenarioError::Io { path: p.into(), message: e.to_string() })?;
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode, ScenarioError> {
    let with = |c: &Common, f: fn(&Scenario, &RunOptions) -> Result<ScenarioReport, ScenarioError>| {
        let s = Scenario::load(&c.scenario)?;
        emit(&f(&s, &c.options())?, c.report.as_deref())
    };
    match cli.command {
        Command::Validate(c) => with(&c, Scenario::validate),
        Command::Chern(c) => with(&c, Scenario::chern),
        Command::IndexAnalytic(c) => with(&c, Scenario::index_analytic),
        Command::IndexTopological(c) => with(&c, Scenario::index_topological),
        Command::Verify(c) => with(&c, Scenario::verify),
        Command::Ddclass { scenario } => {
            let class = Scenario::load(&scenario)?.dd_class()?;
            println!("{}", class.summary());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ScenarioError::Io { path: path.clone(), message: e.to_string() })?;
            let report: ScenarioReport =
                serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
            print!("{}", report.render());
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Fixtures => {
            for (name, _) in gerbe_index::scenario::BUNDLED {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
