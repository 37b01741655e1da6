use std::process::ExitCode;

use volcount::driver::{parse_cli, run, CliAction, USAGE};
use volcount::frontends::parse_file;
use volcount::{Error, OutputMode};

fn threads_from_env() -> Result<usize, Error> {
    match std::env::var("VOLCOUNT_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("invalid VOLCOUNT_THREADS value `{v}`"))),
        _ => Ok(0),
    }
}

fn main_inner() -> Result<i32, Error> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut inv = match parse_cli(&args)? {
        CliAction::Help => {
            print!("{USAGE}");
            return Ok(0);
        }
        CliAction::Run(inv) => inv,
    };
    inv.config.threads = threads_from_env()?;
    let formula = parse_file(&inv.input)?;
    let report = run(&inv.config, &formula, &inv.input.display().to_string())?;
    match inv.config.output {
        OutputMode::Json => println!("{}", report.to_json()),
        OutputMode::Text => print!("{}", report.to_text()),
    }
    Ok(if report.has_backend_errors() { 3 } else { 0 })
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("volcount: {e}");
            if matches!(e, Error::Usage(_)) {
                eprintln!("try `volcount --help`");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
