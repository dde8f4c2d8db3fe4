use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tropsheaf_cli::corpus::{full_corpus, gen_example};
use tropsheaf_cli::descriptor::DescriptorFile;
use tropsheaf_cli::run::{self, error_outcome, guarded, report_text, Outcome};
use tropsheaf_cli::scenario::{from_json, read_scenario, Scenario};

/// Directory for report files when `--report` is not given.
const REPORT_DIR_ENV: &str = "TROPSHEAF_REPORT_DIR";

#[derive(Parser)]
#[command(name = "tropsheaf", version, about = "Glue tropical sheaves from branes and extract branes back")]
struct Cli {
    /// Write the report here instead of stdout or the report directory.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check covering, slopes, gluing, Kaneyama data, local system and explicit k.
    Validate { scenario: PathBuf },
    /// Obstruction cochain per flag, closedness, triviality and witness.
    Obstruction { scenario: PathBuf },
    /// Assemble the sheaf and write its descriptor.
    Glue {
        scenario: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Certify a descriptor and write its associated brane as a scenario.
    Extract {
        descriptor: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Restrict a toric bundle on a fan-mode base to the polytope boundary.
    Restrict {
        scenario: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Glue, extract, glue again and compare up to gauge.
    Roundtrip { scenario: PathBuf },
    /// Bounded search for a chain of equivalences between two branes.
    Equiv {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
    /// Check that gluing and extraction invert each other on every scenario.
    Correspond {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Every stage on every scenario, plus randomized property suites.
    Pipeline {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random samples per property suite; 0 skips the suites.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Write one generated scenario.
    GenExample {
        /// square or cube.
        base: String,
        /// trivial, O11, O(a,b), O(a,b)+O(c,d), three-sheet, twisted, potential,
        /// obstructed, open-trivial, local-system, ramified-split, ramified-mixed.
        kind: String,
        /// Use the face fan instead of the polytope boundary.
        #[arg(long)]
        fan: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the desk corpus and its negative controls into a directory.
    GenCorpus { dir: PathBuf },
}

fn load(command: &str, path: &Path) -> Result<Scenario, Outcome> {
    read_scenario(path).map_err(|e| error_outcome(command, &path.display().to_string(), &e))
}

fn load_all(command: &str, paths: &[PathBuf]) -> Result<Vec<Scenario>, Outcome> {
    paths.iter().map(|p| load(command, p)).collect()
}

fn write(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn dispatch(cli: &Cli) -> Result<Outcome, Outcome> {
    let with_out = |o: Outcome, out: &Option<PathBuf>| -> Result<Outcome, Outcome> {
        if let (Some(path), Some(text)) = (out, &o.output) {
            write(path, text).map_err(|e| error_outcome("write", &path.display().to_string(), &tropsheaf::Error::Invalid(e.to_string())))?;
        }
        Ok(o)
    };
    match &cli.command {
        Command::Validate { scenario } => {
            let sc = load("validate", scenario)?;
            Ok(guarded("validate", &sc.name, || run::validate(&sc)))
        }
        Command::Obstruction { scenario } => {
            let sc = load("obstruction", scenario)?;
            Ok(guarded("obstruction", &sc.name, || run::obstruction(&sc)))
        }
        Command::Glue { scenario, out } => {
            let sc = load("glue", scenario)?;
            with_out(guarded("glue", &sc.name, || run::glue(&sc)), out)
        }
        Command::Extract { descriptor, out } => {
            let subject = descriptor.display().to_string();
            let text = std::fs::read_to_string(descriptor).map_err(|e| error_outcome("extract", &subject, &tropsheaf::Error::Schema { field: "(file)".into(), message: e.to_string() }))?;
            let df: DescriptorFile = from_json(&text).map_err(|e| error_outcome("extract", &subject, &e))?;
            with_out(guarded("extract", &df.name, || run::extract(&df)), out)
        }
        Command::Restrict { scenario, out } => {
            let sc = load("restrict", scenario)?;
            with_out(guarded("restrict", &sc.name, || run::restrict(&sc)), out)
        }
        Command::Roundtrip { scenario } => {
            let sc = load("roundtrip", scenario)?;
            Ok(guarded("roundtrip", &sc.name, || run::roundtrip(&sc)))
        }
        Command::Equiv { left, right, depth } => {
            let (a, b) = (load("equiv", left)?, load("equiv", right)?);
            Ok(guarded("equiv", &format!("{} ~ {}", a.name, b.name), || run::equiv(&a, &b, *depth)))
        }
        Command::Correspond { scenarios } => {
            let scs = load_all("correspond", scenarios)?;
            Ok(guarded("correspond", "scenarios", || run::correspond(&scs)))
        }
        Command::Pipeline { scenarios, seed, samples } => Ok(run::pipeline(&load_all("pipeline", scenarios)?, *seed, *samples)),
        Command::GenExample { base, kind, fan, seed, out } => {
            let sc = gen_example(base, kind, *fan, *seed).map_err(|e| error_outcome("gen-example", kind, &e))?;
            let text = sc.to_canonical_string();
            match out {
                Some(_) => {
                    let mut o = guarded("gen-example", &sc.name, || run::validate(&sc));
                    o.report["command"] = "gen-example".into();
                    o.output = Some(text);
                    with_out(o, out)
                }
                None => {
                    print!("{text}");
                    std::process::exit(0);
                }
            }
        }
        Command::GenCorpus { dir } => {
            let corpus = full_corpus().map_err(|e| error_outcome("gen-corpus", &dir.display().to_string(), &e))?;
            let mut names = Vec::new();
            for e in &corpus {
                let path = dir.join(format!("{}.json", e.scenario.name));
                write(&path, &e.scenario.to_canonical_string()).map_err(|err| error_outcome("gen-corpus", &path.display().to_string(), &tropsheaf::Error::Invalid(err.to_string())))?;
                names.push(e.scenario.name.clone());
            }
            Ok(Outcome { code: 0, report: serde_json::json!({ "format": run::REPORT_FORMAT, "format_version": tropsheaf_cli::scenario::FORMAT_VERSION, "command": "gen-corpus", "subject": dir.display().to_string(), "verdict": "ok", "body": { "scenarios": names } }), output: None })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let o = dispatch(&cli).unwrap_or_else(|o| o);
    let text = report_text(&o);
    let target = cli.report.clone().or_else(|| {
        std::env::var_os(REPORT_DIR_ENV).map(|d| {
            let cmd = o.report["command"].as_str().unwrap_or("report");
            let subject = o.report["subject"].as_str().unwrap_or("all");
            PathBuf::from(d).join(format!("{}-{}.json", cmd, slug(subject)))
        })
    });
    match target {
        Some(path) => {
            if let Err(e) = write(&path, &text) {
                eprintln!("cannot write report {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(o.code as u8)
}
