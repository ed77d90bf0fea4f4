use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gn_plate::config::{parse_config, parse_config_unchecked};
use gn_plate::experiments::run_experiment;

#[derive(Parser)]
#[command(name = "gn-plate", version, about = "Thermoelastic-diffusion plate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config and write its CSVs.
    Run {
        config: PathBuf,
        /// Output directory; overrides [output] dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the material admissibility conditions only.
    Validate { config: PathBuf },
}

fn init_threads() {
    // 0 or unset keeps rayon's default pool
    let Some(n) = std::env::var("GN_PLATE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) else {
        return;
    };
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("gn-plate: cannot read {}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn validate(path: PathBuf) -> Result<ExitCode, ExitCode> {
    let text = read(&path)?;
    let cfg = parse_config_unchecked(&text).map_err(|e| {
        eprintln!("gn-plate: {}: {e}", path.display());
        ExitCode::from(2)
    })?;
    let report = cfg.material.validate().map_err(|e| {
        eprintln!("gn-plate: {e}");
        ExitCode::from(2)
    })?;
    println!("condition,margin,pass");
    for c in &report.conditions {
        println!("{},{:?},{}", c.name, c.margin, if c.passed { "pass" } else { "fail" });
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run(path: PathBuf, out: Option<PathBuf>) -> Result<ExitCode, ExitCode> {
    let text = read(&path)?;
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("gn-plate: {}: {e}", path.display());
            // still leave a machine-readable record when we know where to put it
            if let Some(dir) = out {
                let row = format!("criterion,value,threshold,pass\nerror,\"{}\",,fail\n", e.to_string().replace('"', "'"));
                let _ = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("summary.csv"), row));
            }
            return Err(ExitCode::from(2));
        }
    };
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let summary = run_experiment(&cfg, &dir).map_err(|e| {
        eprintln!("gn-plate: {}: {e}", dir.display());
        ExitCode::from(2)
    })?;
    for r in &summary.rows {
        println!("{:<24} {:>24}  {:<12} {}", r.criterion, r.value, r.threshold, if r.pass { "pass" } else { "FAIL" });
    }
    Ok(if summary.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Validate { config } => validate(config),
    };
    result.unwrap_or_else(|code| code)
}
