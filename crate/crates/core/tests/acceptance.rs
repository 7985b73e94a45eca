//! Acceptance battery: one `PASS`/`FAIL` line per criterion, itemized
//! failures underneath. Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use interlace::harness::report::strip_timing;
use interlace::harness::suite::{run_suite, CriterionOutcome, SuiteSettings, CRITERIA};

/// Tolerances and sample sizes pinned by the acceptance criteria.
const SETTINGS: SuiteSettings = SuiteSettings {
    seed: 20240611,
    samples: 100_000,
    level_samples: 10_000,
    sigma: 4.0,
    min_p_value: 1e-3,
};

fn read_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable artifact directory") {
            let path = entry.expect("directory entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read_to_string(&path).expect("utf-8 artifact"));
            }
        }
    }
    files
}

/// Two full suite runs with the same seed; artifacts must agree byte for
/// byte once `wall_time` lines are removed.
fn determinism() -> CriterionOutcome {
    let start = Instant::now();
    let a = tempfile::tempdir().expect("temp dir");
    let b = tempfile::tempdir().expect("temp dir");
    let mut outcome = CriterionOutcome {
        id: 10,
        title: "repeated suite runs produce identical artifacts".into(),
        pass: true,
        ..Default::default()
    };
    for dir in [a.path(), b.path()] {
        if let Err(e) = run_suite(&SETTINGS, Some(dir)) {
            outcome.pass = false;
            outcome.lines.push(format!("FAILED suite run errored: {e}"));
            return outcome;
        }
    }
    let (fa, fb) = (read_tree(a.path()), read_tree(b.path()));
    if fa.keys().ne(fb.keys()) {
        outcome.pass = false;
        outcome.lines.push("FAILED artifact file sets differ".into());
    }
    let mut compared = 0;
    for (name, body) in &fa {
        let other = fb.get(name).map(|s| strip_timing(s));
        if other.as_deref() != Some(strip_timing(body).as_str()) {
            outcome.pass = false;
            outcome.lines.push(format!("FAILED {name} differs between runs"));
        }
        compared += 1;
    }
    outcome.lines.push(format!("{} compared {compared} artifacts", if outcome.pass { "ok" } else { "FAILED" }));
    outcome.wall_time = start.elapsed();
    outcome
}

fn main() -> ExitCode {
    let mut all_pass = true;
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    for f in CRITERIA {
        let o = f(&SETTINGS).unwrap_or_else(|e| CriterionOutcome {
            title: format!("errored: {e}"),
            pass: false,
            ..Default::default()
        });
        outcomes.push(o);
    }
    outcomes.push(determinism());
    for o in &outcomes {
        all_pass &= o.pass;
        println!(
            "{} criterion {}: {} ({:.2}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            o.wall_time.as_secs_f64()
        );
        for l in o.lines.iter().filter(|l| l.starts_with("FAILED")) {
            println!("    {l}");
        }
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
