//! Command-line front end of the `saddle` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use saddle_core::catalog::PresetRegistry;
use crate::config::{Overrides, Plan, Settings};
use crate::error::{HarnessError, EXIT_INVARIANT, EXIT_OK, EXIT_VALIDATION};
use crate::experiment::{solve, to_toml};
use crate::verify::verify;

#[derive(Parser)]
#[command(name = "saddle", version, about = "Projected saddle-point and networked optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured methods and write CSV traces and a summary.
    Solve(RunArgs),
    /// Run the invariant suite and print a TOML report.
    Verify(RunArgs),
    /// List the built-in presets.
    ListPresets,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Method to run; repeat or separate with commas.
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<String>,
}

impl RunArgs {
    fn plan(&self) -> Result<Plan, HarnessError> {
        let mut settings = match (&self.config, &self.preset) {
            (Some(path), _) => Settings::load(path)?,
            (None, Some(p)) => Settings::for_preset(p),
            (None, None) => return Err(HarnessError::Validation("give --config or --preset".into())),
        };
        settings.apply(&Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            alpha: self.alpha,
            iters: self.iters,
            out: self.out.clone(),
            methods: self.methods.clone(),
        });
        settings.validate(&PresetRegistry::builtin())
    }
}

pub fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::ListPresets => {
            for p in PresetRegistry::builtin().iter() {
                println!(
                    "{:<18} {:<10} {:>8} iters  {}",
                    p.name(),
                    format!("{:?}", p.kind()).to_lowercase(),
                    p.default_iters(),
                    p.description()
                );
            }
            Ok(EXIT_OK)
        }
        Command::Solve(args) => {
            let plan = args.plan()?;
            let out = solve(&plan)?;
            if let Some(dir) = &plan.out_dir {
                out.write(dir)?;
            }
            print!("{}", to_toml(&out.summary)?);
            match out.error() {
                Some(e) => Err(e),
                None => Ok(EXIT_OK),
            }
        }
        Command::Verify(args) => {
            let plan = args.plan()?;
            let report = verify(&plan)?;
            let text = to_toml(&report)?;
            if let Some(dir) = &plan.out_dir {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.clone(), source: e })?;
                let path = dir.join("verify.toml");
                std::fs::write(&path, &text).map_err(|e| HarnessError::Io { path, source: e })?;
            }
            print!("{text}");
            if report.passed {
                Ok(EXIT_OK)
            } else {
                eprintln!("failed checks: {}", report.failed().join(", "));
                Ok(EXIT_INVARIANT)
            }
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::EXIT_DIVERGENCE;

    fn code(args: &[&str]) -> i32 {
        main_with(std::iter::once("saddle").chain(args.iter().copied()))
    }

    #[test]
    fn exit_codes() {
        assert_eq!(code(&["list-presets"]), EXIT_OK);
        assert_eq!(code(&["--help"]), EXIT_OK);
        assert_eq!(code(&["frobnicate"]), EXIT_VALIDATION);
        assert_eq!(code(&["solve"]), EXIT_VALIDATION);
        assert_eq!(code(&["solve", "--preset", "nope"]), EXIT_VALIDATION);
        assert_eq!(code(&["solve", "--preset", "consensus5", "--method", "gda"]), EXIT_VALIDATION);
        assert_eq!(code(&["solve", "--preset", "bilinear", "--method", "ogda", "--alpha", "1"]), EXIT_VALIDATION);
        assert_eq!(code(&["solve", "--preset", "quadratic", "--iters", "50"]), EXIT_OK);
        assert_eq!(code(&["verify", "--preset", "corrupted"]), EXIT_INVARIANT);
        assert_ne!(EXIT_DIVERGENCE, EXIT_INVARIANT);
    }

    #[test]
    fn config_errors_carry_a_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "[instance]\npreset = \"bilinear\"\n[solver]\nalpha = inf\n").unwrap();
        let args = Cli::try_parse_from(["saddle", "solve", "--config", path.to_str().unwrap()]).unwrap();
        let err = run(args).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_VALIDATION);
        assert!(err.to_string().starts_with(&format!("{}:4:", path.display())), "{err}");
    }
}
