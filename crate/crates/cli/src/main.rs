use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use phi_heat::{parse_config, run, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "phi-heat", version, about = "Parametrix experiments for heat equations on model Φ-manifolds")]
struct Cli {
    /// solve, oracle-check, norms, audit-partition, audit-parametrix, maxprinciple or semilinear
    subcommand: String,
    /// line-based `key = value` config; omitted means all defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (overrides `out_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match go(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("phi-heat: {e}");
            ExitCode::from(2)
        }
    }
}

fn go(cli: &Cli) -> phi_heat_core::Result<bool> {
    let sub: Subcommand = cli.subcommand.parse()?;
    let mut text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| phi_heat_core::PhiError::Configuration(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    if let Some(s) = cli.seed {
        // the flag wins over the file
        text = text.lines().filter(|l| l.split('=').next().map(str::trim) != Some("seed")).collect::<Vec<_>>().join("\n");
        text.push_str(&format!("\nseed = {s}\n"));
    }
    let cells = parse_config(&text)?;
    let m = run(sub, &cells, cli.out.as_deref())?;
    for (k, ok) in &m.checks {
        println!("{k}: {}", if *ok { "pass" } else { "fail" });
    }
    if let Some((stage, msg)) = &m.failed_stage {
        eprintln!("stage {stage} failed: {msg}");
    }
    Ok(m.passed())
}
