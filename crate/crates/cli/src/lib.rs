//! Command-line front end for the entropy-feature EEG pipeline.

pub mod config;
pub mod run;

pub use config::{parse_config, Cli, Command, ConfigError, RunConfig, StudyAxis};
pub use run::{run, Provenance, RunError, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

/// Parses `argv`, runs the command and returns the process exit code.
/// Errors go to stderr as a single `error:` line.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    let cfg = match parse_config(argv.clone()) {
        Ok(cfg) => cfg,
        Err(ConfigError::Info(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(ConfigError::Usage(text)) => {
            eprintln!("{}", text.trim_end());
            return EXIT_USAGE;
        }
    };
    match run(&cfg, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let cmd = cfg.command.map(Command::name).unwrap_or("");
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: kind={} command={cmd} message={msg:?}", e.kind());
            e.exit_code()
        }
    }
}
