//! Config-driven experiment runner. Subcommands:
//!   fracdim run <config.json>       execute and write CSV + manifest
//!   fracdim validate <config.json>  parse and validate only
//!   fracdim schema                  print the config format with examples
//! Exit codes: 0 ok, 2 config error, 3 runtime error.

mod config;
mod experiments;
mod output;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use config::{parse_config, ExperimentConfig};
use experiments::{find, registry, RunFailure};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut workers: Option<usize> = None;
    let mut rest: Vec<String> = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--workers" {
            match it.next().and_then(|v| v.parse::<usize>().ok()) {
                Some(n) if n >= 1 => workers = Some(n),
                _ => {
                    eprintln!("--workers needs a positive integer");
                    return ExitCode::from(2);
                }
            }
        } else {
            rest.push(a);
        }
    }
    if let Some(n) = workers {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("warning: worker pool already initialized");
        }
    }

    match rest.first().map(String::as_str) {
        Some("run") => match rest.get(1) {
            Some(path) => cmd_run(path),
            None => usage(),
        },
        Some("validate") => match rest.get(1) {
            Some(path) => cmd_validate(path),
            None => usage(),
        },
        Some("schema") => {
            print!("{}", schema_text());
            ExitCode::SUCCESS
        }
        _ => usage(),
    }
}

fn usage() -> ExitCode {
    eprintln!("usage: fracdim [--workers N] run <config.json> | validate <config.json> | schema");
    ExitCode::from(2)
}

fn load(path: &str) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config `{path}`: {e}"))?;
    let cfg = parse_config(&text)?;
    let exp = find(&cfg.experiment)
        .ok_or_else(|| format!("unknown experiment `{}`", cfg.experiment))?;
    exp.validate(&cfg).map_err(|e| format!("config error in `{path}`: {e}"))?;
    Ok(cfg)
}

fn cmd_validate(path: &str) -> ExitCode {
    match load(path) {
        Ok(cfg) => {
            println!("ok: {} experiment, output {}", cfg.experiment, cfg.output);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(path: &str) -> ExitCode {
    let cfg = match load(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let exp = find(&cfg.experiment).expect("validated above");
    let start = Instant::now();
    let out = match exp.run(&cfg) {
        Ok(out) => out,
        Err(RunFailure::Config(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
        Err(RunFailure::Runtime(e)) => {
            eprintln!("runtime error ({}): {e}", cfg.experiment);
            return ExitCode::from(3);
        }
    };
    let wall = start.elapsed().as_secs_f64();

    if let Some(dir) = Path::new(&cfg.output).parent() {
        if !dir.as_os_str().is_empty() {
            if let Err(e) = std::fs::create_dir_all(dir) {
                eprintln!("runtime error: cannot create output directory: {e}");
                return ExitCode::from(3);
            }
        }
    }
    if let Err(e) = std::fs::write(&cfg.output, &out.csv) {
        eprintln!("runtime error: cannot write `{}`: {e}", cfg.output);
        return ExitCode::from(3);
    }
    let manifest = serde_json::json!({
        "config": serde_json::to_value(&cfg).unwrap(),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": wall,
        "summary": out.summary,
    });
    let manifest_path = format!("{}.manifest.json", cfg.output);
    if let Err(e) = std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap())
    {
        eprintln!("runtime error: cannot write `{manifest_path}`: {e}");
        return ExitCode::from(3);
    }
    println!("wrote {} and {manifest_path} ({wall:.2}s)", cfg.output);
    ExitCode::SUCCESS
}

fn schema_text() -> String {
    let mut out = String::new();
    out.push_str(
        "Config format: a single JSON object.\n\
         \n\
         Top-level fields:\n\
           experiment   one of the tags below\n\
           seed         integer; drives every sampler (mandatory)\n\
           output       CSV path; `<output>.manifest.json` is written next to it\n\
           measure      measure description (see below), where required\n\
           params       experiment knobs; unknown keys are rejected\n\
         \n\
         Measure descriptions (field `type`):\n\
           bernoulli-digits      base, digits (scalars or [x,y] pairs), probs\n\
           markov-digits         base, digits, transition (row-stochastic), initial\n\
           linear-ifs            maps: [{ratio, rotation, reflect, translation}], weights\n\
           product               left, right (digit dimensions must total <= 2)\n\
           bernoulli-convolution contraction, weight, block_len\n\
         \n\
         Experiments:\n",
    );
    for exp in registry() {
        out.push_str(&format!("\n{} — {}\n", exp.name(), exp.description()));
        out.push_str(&format!(
            "example:\n{}\n",
            serde_json::to_string_pretty(&exp.example()).unwrap()
        ));
    }
    out
}
