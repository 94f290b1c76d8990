use clap::{Parser, Subcommand, ValueEnum};

use toeplitz_maxdet::psd_path::PathOptions;
use toeplitz_maxdet::solver::DEFAULT_TOL;

#[derive(Debug, Parser)]
#[command(
    name = "toeplitz-maxdet",
    version,
    about = "Maximum-determinant and maximum-rank completions of partial symmetric Toeplitz matrices",
    after_help = "Partial matrices are read as JSON, e.g. {\"n\": 5, \"t0\": 6.0, \"data\": {\"1\": 1.0, \"3\": 1.0, \"4\": 1.0}}.\n\
                  Several objects (JSON lines) are processed as a batch.\n\n\
                  Exit status: 0 success, 1 usage or parse error, 2 infeasible input, 3 inconclusive probe."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Newton tolerance on the gradient max-norm
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    /// First shift of the path schedule
    #[arg(long, global = true, default_value_t = 1.0)]
    pub alpha0: f64,

    /// Geometric ratio of the path schedule
    #[arg(long, global = true, default_value_t = 0.5)]
    pub rho: f64,

    #[arg(long, global = true, value_enum, default_value_t = Output::Json)]
    pub output: Output,

    /// Worker threads for batch input
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Seed for the randomized checks of `demo`
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the pattern forms the input matches
    Classify {
        #[arg(default_value = "-")]
        input: String,
    },
    /// Maximum-determinant positive definite completion
    Complete {
        #[arg(default_value = "-")]
        input: String,
        /// Re-solve with the generic solver and compare
        #[arg(long)]
        verify: bool,
    },
    /// Maximum-rank positive semidefinite completion
    PsdComplete {
        #[arg(default_value = "-")]
        input: String,
    },
    /// Central path as JSON lines, one object per shift, then the limit
    Path {
        #[arg(default_value = "-")]
        input: String,
    },
    /// Singularity-degree probe
    Sd {
        #[arg(default_value = "-")]
        input: String,
    },
    /// Bezoutian of {"coefficients": [a0, a1, ...]} and the root test
    Bezout {
        #[arg(default_value = "-")]
        input: String,
    },
    /// Toeplitz inverse from {"first_column": [...]} of the inverse
    GsInvert {
        #[arg(default_value = "-")]
        input: String,
    },
    /// Run the built-in reference checks and report pass/fail
    Demo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Json,
    Text,
}

/// Validated numeric settings shared by all commands.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub tol: f64,
    pub path: PathOptions,
    pub seed: u64,
}

impl Cli {
    pub fn settings(&self) -> Result<Settings, String> {
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(format!("--tol must lie in (0, 1e-2], got {}", self.tol));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(format!("--rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(format!("--alpha0 must be positive, got {}", self.alpha0));
        }
        if self.jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        let defaults = PathOptions::default();
        let path = PathOptions {
            alpha0: self.alpha0,
            rho: self.rho,
            alpha_min: defaults.alpha_min.min(self.alpha0),
            tol: self.tol,
        };
        path.validate().map_err(|e| e.to_string())?;
        Ok(Settings {
            tol: self.tol,
            path,
            seed: self.seed,
        })
    }

    pub fn input(&self) -> Option<&str> {
        match &self.command {
            Command::Classify { input }
            | Command::Complete { input, .. }
            | Command::PsdComplete { input }
            | Command::Path { input }
            | Command::Sd { input }
            | Command::Bezout { input }
            | Command::GsInvert { input } => Some(input),
            Command::Demo => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn settings_reject_out_of_range_values() {
        let parse = |args: &[&str]| Cli::try_parse_from(args).unwrap().settings();
        assert!(parse(&["t", "demo"]).is_ok());
        assert!(parse(&["t", "--tol", "0.1", "demo"]).is_err());
        assert!(parse(&["t", "--rho", "1", "demo"]).is_err());
        assert!(parse(&["t", "--alpha0", "0", "demo"]).is_err());
        assert!(parse(&["t", "--jobs", "0", "demo"]).is_err());
        let s = parse(&["t", "--alpha0", "1e-9", "demo"]).unwrap();
        assert_eq!(s.path.schedule(), vec![1e-9]);
    }
}
