//! Command-line driver: matrix and family I/O, single projections and the
//! aquifer experiment batch runs. Every batch run writes a `manifest.json`
//! from which it can be repeated bit for bit.

pub mod args;
pub mod commands;
pub mod error;
pub mod local;

pub use args::{Cli, Command, ExperimentKind, MethodArg, Overrides};
pub use commands::{
    cmd_build_anchors, cmd_experiment, cmd_project, cmd_rerun, BuildAnchorsConfig, ProjectOutput,
    RunManifest, MANIFEST,
};
pub use error::{CliError, Result};

use std::io::Write;

use crate::error::io_err;

/// Runs a parsed command line. Results of `project` go to stdout unless an
/// output file is given; batch runs print their manifest.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let manifest = match cli.command {
        Command::Project {
            family,
            covariance,
            method,
            config,
            out,
        } => {
            let res = cmd_project(&family, &covariance, method, config.as_deref())?;
            let mut text = serde_json::to_string_pretty(&res).expect("results serialize");
            text.push('\n');
            match out {
                Some(p) => std::fs::write(&p, text).map_err(io_err(&p))?,
                None => print!("{text}"),
            }
            return Ok(());
        }
        Command::BuildAnchors {
            config,
            q,
            seed,
            out,
        } => cmd_build_anchors(config.as_deref(), q, seed, &out)?,
        Command::Experiment { name, args } => cmd_experiment(
            name,
            args.config.as_deref(),
            &args.overrides,
            args.seed,
            &args.out,
        )?,
        Command::Rerun { manifest, out } => cmd_rerun(&manifest, out.as_deref())?,
    };
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{}",
        serde_json::to_string_pretty(&manifest).expect("manifest serializes")
    );
    Ok(())
}
