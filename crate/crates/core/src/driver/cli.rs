//! Command-line parsing. Options use a single-dash `-name=value` style,
//! which is why this is done by hand.

use std::path::PathBuf;
use std::time::Duration;

use crate::error::Error;
use crate::model::{Backends, OutputMode, SolverConfig};

pub const USAGE: &str = "usage: volcount [options] FILE

Computes the volume of the solution space of a Boolean combination of linear
constraints, or counts its integer solutions. FILE is read as SMT-LIBv2 when
its name ends in .smt2 and in the .vs format otherwise.

backends (combinable; -P when none is given):
  -P              estimate the volume by multiphase Monte Carlo
  -V              compute the volume exactly
  -L              count integer solutions

options:
  -w=N            word length: every numeric variable lies in
                  [-2^(N-1), 2^(N-1)-1]; 0 disables the bounds (default 8)
  -minc=N         minimum sampling coefficient (default 40)
  -maxc=N         maximum sampling coefficient (default 1600)
  --seed=N        random seed (default 0)
  --burnin=N      hit-and-run steps discarded at the start of each phase (default 0)
  --timeout=SECS  give up after SECS seconds
  --json          print the report as JSON
  --help          print this message

environment:
  VOLCOUNT_THREADS  worker threads for per-bunch backends (unset or 0: sequential)
";

#[derive(Clone, Debug, PartialEq)]
pub struct Invocation {
    pub config: SolverConfig,
    pub input: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CliAction {
    Run(Invocation),
    Help,
}

fn number<T: std::str::FromStr>(flag: &str, value: &str) -> Result<T, Error> {
    value
        .parse()
        .map_err(|_| Error::Usage(format!("invalid value `{value}` for {flag}")))
}

/// Parses the arguments after the program name.
pub fn parse_cli<S: AsRef<str>>(args: &[S]) -> Result<CliAction, Error> {
    let mut config = SolverConfig::default();
    let mut backends = Backends::default();
    let mut input: Option<PathBuf> = None;
    for arg in args {
        let arg = arg.as_ref();
        let (flag, value) = match arg.split_once('=') {
            Some((f, v)) if f.starts_with('-') => (f, Some(v)),
            _ => (arg, None),
        };
        match (flag, value) {
            ("-h" | "--help" | "-help", None) => return Ok(CliAction::Help),
            ("-P", None) => backends.estimate = true,
            ("-V", None) => backends.exact_volume = true,
            ("-L", None) => backends.integer_count = true,
            ("-w", Some(v)) => config.word_length = number(flag, v)?,
            ("-minc", Some(v)) => config.min_coeff = number(flag, v)?,
            ("-maxc", Some(v)) => config.max_coeff = number(flag, v)?,
            ("--seed", Some(v)) => config.seed = number(flag, v)?,
            ("--burnin", Some(v)) => config.burnin = number(flag, v)?,
            ("--timeout", Some(v)) => {
                let secs: f64 = number(flag, v)?;
                if !(secs.is_finite() && secs > 0.0) {
                    return Err(Error::Usage(format!("invalid value `{v}` for --timeout")));
                }
                config.timeout = Some(Duration::from_secs_f64(secs));
            }
            ("--json", None) => config.output = OutputMode::Json,
            _ if arg.starts_with('-') && arg.len() > 1 => {
                return Err(Error::Usage(format!("unknown option `{arg}`")));
            }
            _ => {
                if input.is_some() {
                    return Err(Error::Usage("more than one input file given".into()));
                }
                input = Some(PathBuf::from(arg));
            }
        }
    }
    if backends.any() {
        config.backends = backends;
    }
    config.validate().map_err(Error::Usage)?;
    let input = input.ok_or_else(|| Error::Usage("missing input file".into()))?;
    Ok(CliAction::Run(Invocation { config, input }))
}
