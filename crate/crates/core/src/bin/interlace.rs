use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interlace::harness::config::ExperimentConfig;
use interlace::harness::run::{exit_code, run};
use interlace::harness::suite::{run_suite, SuiteSettings};

/// Random interlacements on finite killed weighted graphs.
#[derive(Parser, Debug)]
#[command(name = "interlace", version)]
struct Cli {
    /// Base configuration file (flat `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build, validate and write a graph.
    Graph {
        /// `single`, `path2`, `biased_z:R`, `tree:b:d`, `lattice:d:R` or `file:PATH`.
        source: String,
    },
    /// Equilibrium measure, escape and hitting probabilities, hinge measure.
    Potential {
        source: String,
        #[arg(allow_hyphen_values = true)]
        window: String,
    },
    /// Draw one sample and dump its trajectories and occupation fields.
    Sample {
        source: String,
        #[arg(allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 1.0)]
        level: f64,
    },
    /// Criterion traces: `strong`, `weak`, `cap_identity` or `atom_flow`.
    Criteria {
        which: String,
        /// Extra `key=value` settings (family, levels, site, eps, from, to).
        settings: Vec<String>,
    },
    /// A statistical test (`vacancy`, `fkg`, `consistency`, ...), configured by `key=value` settings.
    Test {
        operation: String,
        settings: Vec<String>,
    },
    /// Run the operation named in a configuration file.
    Run { file: PathBuf },
    /// The full acceptance battery.
    Suite,
}

fn apply(cfg: &mut ExperimentConfig, settings: &[String]) -> interlace::Result<()> {
    for s in settings {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| interlace::Error::Config(format!("expected key=value, got `{s}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn build(cli: &Cli) -> interlace::Result<Option<ExperimentConfig>> {
    let mut cfg = match (&cli.config, &cli.command) {
        (_, Command::Run { file }) => ExperimentConfig::from_file(file)?,
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, _) => ExperimentConfig::default(),
    };
    let mut kv: Vec<String> = Vec::new();
    match &cli.command {
        Command::Graph { source } => kv.extend(["operation=graph".into(), format!("graph={source}")]),
        Command::Potential { source, window } => {
            kv.extend(["operation=potential".into(), format!("graph={source}"), format!("window={window}")])
        }
        Command::Sample { source, window, level } => kv.extend([
            "operation=sample".into(),
            format!("graph={source}"),
            format!("window={window}"),
            format!("level={level}"),
        ]),
        Command::Criteria { which, settings } => {
            let op = match which.as_str() {
                "strong" | "weak" => format!("{which}_criterion"),
                other => other.to_string(),
            };
            kv.push(format!("operation={op}"));
            kv.extend(settings.iter().cloned());
        }
        Command::Test { operation, settings } => {
            kv.push(format!("operation={operation}"));
            kv.extend(settings.iter().cloned());
        }
        Command::Run { .. } => {}
        Command::Suite => return Ok(None),
    }
    apply(&mut cfg, &kv)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = cli.samples {
        cfg.samples = samples;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn suite(cli: &Cli) -> i32 {
    let mut s = SuiteSettings::default();
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(n) = cli.samples {
        s.samples = n;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("suite_out"));
    match run_suite(&s, Some(&out)) {
        Ok(outcomes) => {
            for o in &outcomes {
                print!("{}", o.render());
            }
            if outcomes.iter().all(|o| o.pass) {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match build(&cli) {
        Ok(Some(cfg)) => run(&cfg),
        Ok(None) => suite(&cli),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use interlace::harness::report::strip_timing;

    fn exec(args: &[&str]) -> i32 {
        let cli = Cli::try_parse_from(std::iter::once("interlace").chain(args.iter().copied())).unwrap();
        match build(&cli) {
            Ok(Some(cfg)) => run(&cfg),
            Ok(None) => suite(&cli),
            Err(e) => exit_code(&e),
        }
    }

    #[test]
    fn config_file_run_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("vacancy.cfg");
        let out = dir.path().join("out");
        std::fs::write(
            &cfg,
            format!(
                "# vacancy on the two-vertex path\noperation = vacancy\ngraph = path2\nwindow = 0;1\nsamples = 20000\nseed = 3\nout = {}\n",
                out.display()
            ),
        )
        .unwrap();
        assert_eq!(exec(&["run", cfg.to_str().unwrap()]), 0);
        let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
        assert!(report.contains("pass = true"));
    }

    #[test]
    fn bad_input_exits_with_two() {
        assert_eq!(exec(&["test", "no_such_test", "graph=path2"]), 2);
        assert_eq!(exec(&["test", "vacancy", "graph=path2", "window=0", "colour=red"]), 2);
        assert_eq!(exec(&["test", "vacancy", "graph=path2", "window"]), 2);
        assert_eq!(exec(&["potential", "tree:2", "0"]), 2);
    }

    #[test]
    fn same_seed_gives_same_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut reports = Vec::new();
        for name in ["a", "b"] {
            let out = dir.path().join(name);
            let code = exec(&[
                "--seed",
                "11",
                "--samples",
                "5000",
                "--out",
                out.to_str().unwrap(),
                "test",
                "consistency",
                "graph=biased_z:3",
                "window=0",
                "outer=-2..2",
            ]);
            assert_eq!(code, 0);
            reports.push(strip_timing(&std::fs::read_to_string(out.join("report.txt")).unwrap()));
        }
        assert_eq!(reports[0], reports[1]);
        assert!(reports[0].contains("seed = 11"));
    }

    #[test]
    fn window_may_start_with_a_minus_sign() {
        let cli = Cli::try_parse_from(["interlace", "potential", "biased_z:3", "-1..1"]).unwrap();
        let cfg = build(&cli).unwrap().unwrap();
        assert_eq!(cfg.window.as_deref(), Some("-1..1"));
    }
}
