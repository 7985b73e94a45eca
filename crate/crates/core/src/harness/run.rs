//! Executes a configured operation and writes its artifacts.
//!
//! Exit codes: `0` when every declared assertion passes, `1` when some
//! assertion fails or the computation errors, `2` for configuration errors
//! and unknown operations.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::coupling::poisson_shift_tv;
use crate::criteria::{atom_flow, cap_identity, strong_criterion, weak_criterion, AtomThresholds, VerdictThresholds};
use crate::error::{Error, Result};
use crate::fmt17;
use crate::graph::{make_exhaustion, write_graph};
use crate::potential::Potential;
use crate::sampler::WindowSampler;
use crate::rng::RngStream;

use super::config::{locate_site, ExperimentConfig};
use super::mc::{
    bridge_test, consistency_test, direction_flow_test, extension_test, fkg_test, hinge_law_test, level_test,
    vacancy_test, Functional, McSettings,
};
use super::report::StatReport;
use super::suite::{run_suite, SuiteSettings};

pub const OPERATIONS: &[&str] = &[
    "graph",
    "potential",
    "sample",
    "vacancy",
    "fkg",
    "consistency",
    "extension",
    "hinge_law",
    "bridge",
    "levels",
    "direction_flow",
    "strong_criterion",
    "weak_criterion",
    "cap_identity",
    "atom_flow",
    "poisson_shift",
    "suite",
];

/// Reports with pass/fail and named text artifacts.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub reports: Vec<StatReport>,
    /// `(file name, contents)`.
    pub artifacts: Vec<(String, String)>,
    /// Extra failures not tied to a report.
    pub failures: Vec<String>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.reports.iter().all(|r| r.pass)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let _ = writeln!(out, "{}", r.summary());
        }
        for f in &self.failures {
            let _ = writeln!(out, "FAIL {f}");
        }
        out
    }
}

fn mc_settings(cfg: &ExperimentConfig) -> McSettings {
    McSettings { samples: cfg.samples, seed: cfg.seed, sigma: cfg.sigma, min_p_value: cfg.min_p_value }
}

fn with_reports(reports: Vec<StatReport>) -> RunOutput {
    let text: String = reports.iter().map(|r| r.render() + "\n").collect();
    RunOutput { reports, artifacts: vec![("report.txt".into(), text)], failures: Vec::new() }
}

fn exhaustion_for(cfg: &ExperimentConfig) -> Result<crate::graph::ExhaustionFamily> {
    if cfg.levels.is_empty() {
        return Err(Error::Config(format!("operation `{}` needs `levels`", cfg.operation)));
    }
    make_exhaustion(cfg.require_family()?, &cfg.levels)
}

fn eps_list(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    if cfg.eps.is_empty() {
        return Err(Error::Config(format!("operation `{}` needs `eps`", cfg.operation)));
    }
    Ok(cfg.eps.clone())
}

/// Runs the operation named in `cfg` without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mc = mc_settings(cfg);
    match cfg.operation.as_str() {
        "graph" => {
            let g = cfg.require_graph()?;
            let mut buf = Vec::new();
            write_graph(&g, &mut buf)?;
            let worst = g.vertices().map(|x| g.row_sum_defect(x)).fold(0.0, f64::max);
            let r = StatReport::exact("row sums", worst, 0.0, "stochastic rows", cfg.tolerance);
            let mut out = with_reports(vec![r]);
            out.artifacts.push(("graph.txt".into(), String::from_utf8_lossy(&buf).into_owned()));
            Ok(out)
        }
        "potential" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            let p = Potential::new(&g);
            let eq = p.equilibrium(&k)?;
            let hit = p.hitting(&k)?;
            let mut csv = String::from("x,equilibrium,escape,hitting\n");
            for x in g.vertices() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    x.0,
                    fmt17(eq.measure[x.0]),
                    fmt17(eq.escape[x.0]),
                    fmt17(hit.prob[x.0])
                );
            }
            let mut hinge = String::from("x,y,hinge\n");
            for (x, y, v) in p.hinge(&k)?.entries() {
                let _ = writeln!(hinge, "{},{},{}", x.0, y.0, fmt17(v));
            }
            Ok(RunOutput {
                artifacts: vec![
                    ("potential.csv".into(), csv),
                    ("hinge.csv".into(), hinge),
                    ("capacity.txt".into(), format!("capacity = {}\n", fmt17(eq.capacity))),
                ],
                ..Default::default()
            })
        }
        "sample" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            let s = WindowSampler::new(&g, &k)?.sample_marked(cfg.level, &mut RngStream::new(cfg.seed, 0))?;
            Ok(RunOutput {
                artifacts: vec![("trajectories.txt".into(), s.dump()), ("fields.csv".into(), s.fields.to_csv())],
                ..Default::default()
            })
        }
        "vacancy" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            Ok(with_reports(vec![vacancy_test(&g, &k, cfg.level, &mc)?]))
        }
        "fkg" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            let parse = |s: &Option<String>, key: &str| -> Result<Functional> {
                Functional::parse(s.as_deref().ok_or_else(|| Error::Config(format!("operation `fkg` needs `{key}`")))?, &g)
            };
            let f = parse(&cfg.functional_f, "f")?;
            let h = parse(&cfg.functional_g, "g")?;
            Ok(with_reports(fkg_test(&g, &k, &f, &h, &mc)?))
        }
        "consistency" | "extension" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            let l = cfg.require_outer(&g)?;
            if !k.is_subset(&l) {
                return Err(Error::Config("`window` must be contained in `outer`".into()));
            }
            let reports = if cfg.operation == "consistency" {
                consistency_test(&g, &k, &l, &mc)?
            } else {
                extension_test(&g, &k, &l, &mc)?
            };
            Ok(with_reports(reports))
        }
        "hinge_law" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            Ok(with_reports(vec![hinge_law_test(&g, &k, &mc)?]))
        }
        "bridge" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            let x = locate_site(&g, &cfg.require_site()?)?;
            Ok(with_reports(bridge_test(&g, &k, x, &mc)?))
        }
        "levels" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            if cfg.u_levels.is_empty() {
                return Err(Error::Config("operation `levels` needs `u_levels`".into()));
            }
            Ok(with_reports(level_test(&g, &k, &cfg.u_levels, &mc)?))
        }
        "direction_flow" => {
            let g = cfg.require_graph()?;
            let k = cfg.require_window(&g)?;
            let from = cfg.from.ok_or_else(|| Error::Config("operation `direction_flow` needs `from`".into()))?;
            let to = cfg.to.ok_or_else(|| Error::Config("operation `direction_flow` needs `to`".into()))?;
            let exact = Potential::new(&g).restricted_equilibrium(&k, from, to)?.capacity;
            Ok(with_reports(vec![direction_flow_test(
                &g,
                &k,
                from,
                to,
                exact,
                "restricted equilibrium, exact linear solve",
                &mc,
            )?]))
        }
        "strong_criterion" | "weak_criterion" => {
            let ex = exhaustion_for(cfg)?;
            let site = cfg.require_site()?;
            let mut out = RunOutput::default();
            for eps in eps_list(cfg)? {
                let t = if cfg.operation == "strong_criterion" {
                    strong_criterion(&ex, &site, eps, VerdictThresholds::default())?
                } else {
                    weak_criterion(&ex, &site, eps, VerdictThresholds::default())?
                };
                let stem = format!("{}_eps{}", t.kind, fmt17(eps));
                out.artifacts.push((format!("{stem}.csv"), t.to_csv()));
                out.artifacts.push((format!("{stem}.txt"), t.to_report()));
            }
            Ok(out)
        }
        "cap_identity" => {
            let ex = exhaustion_for(cfg)?;
            let site = cfg.require_site()?;
            let reports = cap_identity(&ex, &site)?
                .into_iter()
                .map(|r| {
                    StatReport::exact(
                        format!("cap identity level {}", r.level),
                        r.sum,
                        r.cap_site,
                        "cap of the site, exact linear solve",
                        cfg.tolerance,
                    )
                })
                .collect();
            Ok(with_reports(reports))
        }
        "atom_flow" => {
            let ex = exhaustion_for(cfg)?;
            let from = cfg.from.ok_or_else(|| Error::Config("operation `atom_flow` needs `from`".into()))?;
            let to = cfg.to.ok_or_else(|| Error::Config("operation `atom_flow` needs `to`".into()))?;
            let t = atom_flow(&ex, from, to, AtomThresholds::default())?;
            Ok(RunOutput {
                artifacts: vec![
                    ("atom_flow.csv".into(), t.to_csv()),
                    ("atom_flow.txt".into(), format!("from = {from}\nto = {to}\nverdict = {}\n", t.verdict)),
                ],
                ..Default::default()
            })
        }
        "poisson_shift" => {
            if cfg.lambdas.is_empty() {
                return Err(Error::Config("operation `poisson_shift` needs `lambdas`".into()));
            }
            let mut reports = Vec::new();
            let mut csv = String::from("lambda,exact,bound\n");
            for &lambda in &cfg.lambdas {
                let t = poisson_shift_tv(lambda)?;
                let _ = writeln!(csv, "{},{},{}", fmt17(lambda), fmt17(t.exact), fmt17(t.bound));
                let r = StatReport::exact(format!("shift distance lambda={lambda}"), t.exact, t.bound, "1/(2 sqrt(lambda))", f64::INFINITY);
                let ok = t.exact <= t.bound;
                reports.push(StatReport { pass: ok, ..r });
            }
            let mut out = with_reports(reports);
            out.artifacts.push(("poisson_shift.csv".into(), csv));
            Ok(out)
        }
        "suite" => {
            let s = SuiteSettings { seed: cfg.seed, samples: cfg.samples, sigma: cfg.sigma, min_p_value: cfg.min_p_value, ..SuiteSettings::default() };
            let outcomes = run_suite(&s, None)?;
            let mut out = RunOutput::default();
            let mut summary = String::new();
            for o in &outcomes {
                summary.push_str(&o.render());
                if !o.pass {
                    out.failures.push(format!("criterion {}: {}", o.id, o.title));
                }
                for (name, body) in &o.artifacts {
                    out.artifacts.push((format!("criterion_{}/{name}", o.id), body.clone()));
                }
            }
            out.artifacts.push(("summary.txt".into(), summary));
            Ok(out)
        }
        other => Err(Error::UnknownOperation(other.to_string())),
    }
}

/// Writes artifacts under `dir`, creating subdirectories as needed.
pub fn write_artifacts(dir: &Path, output: &RunOutput) -> Result<()> {
    for (name, body) in &output.artifacts {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, body)?;
    }
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::UnknownOperation(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

/// Executes `cfg`, writes artifacts to `cfg.out` and prints a summary to
/// stdout (diagnostics to stderr). Returns the process exit code.
pub fn run(cfg: &ExperimentConfig) -> i32 {
    let start = Instant::now();
    let output = match execute(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match &cfg.out {
        Some(dir) => {
            if let Err(e) = write_artifacts(dir, &output) {
                eprintln!("error: {e}");
                return 1;
            }
        }
        None => {
            for (name, body) in output.artifacts.iter().filter(|(n, _)| n != "report.txt") {
                println!("== {name} ==");
                print!("{body}");
            }
        }
    }
    print!("{}", output.summary());
    println!("wall_time = {:.3}s", start.elapsed().as_secs_f64());
    if output.passed() {
        0
    } else {
        1
    }
}

pub fn run_file(path: &Path) -> i32 {
    match ExperimentConfig::from_file(path) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_operation_exits_with_two() {
        let cfg = ExperimentConfig { operation: "teleport".into(), ..Default::default() };
        let err = execute(&cfg).unwrap_err();
        assert!(err.to_string().contains("teleport"));
        assert_eq!(run(&cfg), 2);
    }

    #[test]
    fn vacancy_config_passes() {
        let cfg = ExperimentConfig::parse("operation = vacancy\ngraph = single\nwindow = 0\nsamples = 5000\nseed = 2\n").unwrap();
        let out = execute(&cfg).unwrap();
        assert!(out.passed(), "{}", out.summary());
        assert!(out.artifacts[0].1.contains("reference = 0.36787944117144"));
    }

    #[test]
    fn missing_parameters_are_config_errors() {
        let cfg = ExperimentConfig::parse("operation = vacancy\ngraph = single\n").unwrap();
        assert_eq!(exit_code(&execute(&cfg).unwrap_err()), 2);
    }
}
