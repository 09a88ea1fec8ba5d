use std::path::PathBuf;
use std::process::ExitCode;

use dacq::cli::{execute, CliOptions, EXIT_USAGE};

const USAGE: &str = "\
usage: dacq <verify|sample|probe|couple|constants> [options]

options:
  --config <path>   JSON run descriptor (required except for verify)
  --seed <u64>      override the config seed
  --threads <n>     thread pool size (0 or absent: all cores)
  --out <dir>       output directory (default: .)
";

fn parse_args(mut args: std::env::Args) -> Result<CliOptions, String> {
    let _ = args.next();
    let command = args.next().ok_or_else(|| "missing command".to_string())?;
    let mut opts = CliOptions {
        command,
        config_path: None,
        seed: None,
        threads: None,
        out_dir: PathBuf::from("."),
    };
    while let Some(flag) = args.next() {
        let mut value = || args.next().ok_or_else(|| format!("{flag} needs a value"));
        match flag.as_str() {
            "--config" => opts.config_path = Some(PathBuf::from(value()?)),
            "--seed" => {
                opts.seed = Some(value()?.parse().map_err(|e| format!("invalid --seed: {e}"))?)
            }
            "--threads" => {
                opts.threads =
                    Some(value()?.parse().map_err(|e| format!("invalid --threads: {e}"))?)
            }
            "--out" => opts.out_dir = PathBuf::from(value()?),
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(opts)
}

fn main() -> ExitCode {
    match parse_args(std::env::args()) {
        Ok(opts) => ExitCode::from(execute(&opts) as u8),
        Err(msg) => {
            eprintln!("error: {msg}\n{USAGE}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
