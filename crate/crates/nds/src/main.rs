//! Thin command-line front end; all behavior lives in the library.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 acceptance
//! failure (a run whose built-in checks did not pass, or a failing
//! invariant suite).

use std::path::PathBuf;
use std::process::ExitCode;

use nds::config::ExperimentConfig;
use nds::report::write_outputs;
use nds::scenario;
use nds::verify;

const USAGE: &str = "nds — nonautonomous circle dynamics experiments

USAGE:
    nds run --config <path> --out <dir>    run a scenario, write report.csv / report.json
    nds verify [--seed N]                  run the invariant suite, one line per check
    nds constants --config <path>          print predicted constants without simulating

The config format is flat `key = value` text; see README.md for the schema.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("verify") => cmd_verify(&args[1..]),
        Some("constants") => cmd_constants(&args[1..]),
        Some("--help") | Some("-h") | Some("help") => {
            println!("{USAGE}");
            ExitCode::SUCCESS
        }
        Some(other) => {
            eprintln!("unknown command '{other}'\n{USAGE}");
            ExitCode::from(1)
        }
        None => {
            eprintln!("{USAGE}");
            ExitCode::from(1)
        }
    }
}

fn flag_value(args: &[String], flag: &str) -> Result<Option<String>, String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == flag {
            return match it.next() {
                Some(v) => Ok(Some(v.clone())),
                None => Err(format!("flag {flag} needs a value")),
            };
        }
    }
    Ok(None)
}

fn load_config(args: &[String]) -> Result<ExperimentConfig, String> {
    let path = flag_value(args, "--config")?
        .ok_or_else(|| "missing --config <path>".to_string())?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config '{path}': {e}"))?;
    ExperimentConfig::parse(&text).map_err(|e| e.to_string())
}

fn cmd_run(args: &[String]) -> ExitCode {
    let cfg = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let out_dir = match flag_value(args, "--out") {
        Ok(Some(d)) => PathBuf::from(d),
        Ok(None) => {
            eprintln!("missing --out <dir>");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let output = match scenario::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_outputs(&out_dir, &output.rows, &output.report) {
        eprintln!("cannot write outputs: {e}");
        return ExitCode::from(2);
    }
    let r = &output.report;
    println!("scenario       {}", r.scenario);
    if let Some(l1) = r.predicted.lambda1_pred {
        println!("lambda1_pred   {l1}");
    }
    if let Some(l2) = r.predicted.lambda2_pred {
        println!("lambda2_pred   {l2}");
    }
    if let Some(g) = r.gap_measured {
        println!("gap_measured   {g}");
    }
    println!("historic       {}", r.historic);
    println!("pass           {}", r.pass);
    println!("wrote {}", out_dir.join("report.csv").display());
    println!("wrote {}", out_dir.join("report.json").display());
    if r.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_verify(args: &[String]) -> ExitCode {
    let seed = match flag_value(args, "--seed") {
        Ok(Some(v)) => match v.parse::<u64>() {
            Ok(s) => s,
            Err(_) => {
                eprintln!("--seed expects a decimal 64-bit unsigned integer, got '{v}'");
                return ExitCode::from(1);
            }
        },
        Ok(None) => 42,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let results = verify::run_suite(seed);
    let mut all = true;
    for r in &results {
        println!("{} {} — {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        all &= r.pass;
    }
    println!("{} of {} invariants passed", results.iter().filter(|r| r.pass).count(), results.len());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_constants(args: &[String]) -> ExitCode {
    let cfg = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let p = match scenario::predicted_for(&cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    println!("scenario  {}", cfg.scenario.as_str());
    if let Some(v) = p.sigma1 {
        println!("sigma1    {v}");
    }
    if let Some(v) = p.sigma2 {
        println!("sigma2    {v}");
    }
    if let Some(v) = p.lambda1_pred {
        println!("lambda1   {v}");
    }
    if let Some(v) = p.lambda2_pred {
        println!("lambda2   {v}");
    }
    if let Some(v) = p.gap_pred {
        println!("gap_pred  {v}");
    }
    println!("nu0       {}", p.nu0);
    println!("rho0      {}", p.rho0);
    println!("delta0    {}", p.delta0);
    println!("x_p       {}", p.x_p);
    println!("x_phat    {}", p.x_phat);
    ExitCode::SUCCESS
}
