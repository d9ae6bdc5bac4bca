//! One module per subcommand, plus the data loading they share.

mod bench;
mod eval;
mod fit;
mod gen_toy;
mod marginal;
mod perms;
mod sample;

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use trde::datasets::{generate_toy_raw, read_matrix, ToyFamily, ToySpec};
use trde::{enumerate_circular, PermutationSet};

pub use bench::{bench, BenchPlan, BenchRow};
pub use eval::{eval, eval_dataset, sample_kl, EvalReport};
pub use fit::{fit, resolve_config, FitOutcome};
pub use gen_toy::gen_toy;
pub use marginal::{marginal, parse_fix, MarginalGrid};
pub use perms::perms;
pub use sample::sample;

use crate::cli::Command;
use crate::error::{CliError, CliResult};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => fit::run(&a),
        Command::Sample(a) => sample::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Marginal(a) => marginal::run(&a),
        Command::Perms(a) => perms::run(&a),
        Command::Bench(a) => bench::run(&a),
        Command::GenToy(a) => gen_toy::run(&a),
    }
}

/// Default row count for toy families.
pub const DEFAULT_TOY_ROWS: usize = 62_500;

/// Where raw rows come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Toy { family: ToyFamily, n: usize, noise: Option<f64> },
    Csv { path: std::path::PathBuf, header: bool },
}

impl Source {
    pub fn new(
        toy: Option<&str>,
        csv: Option<&Path>,
        header: bool,
        n: Option<usize>,
        noise: Option<f64>,
    ) -> CliResult<Self> {
        match (toy, csv) {
            (Some(_), Some(_)) => Err(CliError::usage("give either a toy family or a CSV, not both")),
            (Some(name), None) => Ok(Source::Toy {
                family: parse_family(name)?,
                n: n.unwrap_or(DEFAULT_TOY_ROWS),
                noise,
            }),
            (None, Some(path)) => Ok(Source::Csv {
                path: path.to_path_buf(),
                header,
            }),
            (None, None) => Err(CliError::usage("no dataset: give --toy or --csv")),
        }
    }

    /// Raw rows and a dataset label. Toy rows are generated under `seed`.
    pub fn load(&self, seed: u64) -> CliResult<(String, Array2<f64>)> {
        match self {
            Source::Toy { family, n, noise } => {
                let mut spec = ToySpec::new(*family, *n, seed);
                if let Some(v) = noise {
                    spec.noise = *v;
                }
                let raw = generate_toy_raw(&spec).map_err(|e| CliError::usage(e.to_string()))?;
                Ok((family.name().to_string(), raw))
            }
            Source::Csv { path, header } => {
                let raw = read_matrix(path, *header)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "csv".into());
                Ok((name, raw))
            }
        }
    }
}

pub fn parse_family(name: &str) -> CliResult<ToyFamily> {
    name.parse().map_err(|e: trde::Error| {
        let known: Vec<_> = ToyFamily::ALL.iter().map(|f| f.name()).collect();
        CliError::usage(format!("{e} (known: {})", known.join(", ")))
    })
}

/// `m` circular permutation classes for `d` dimensions. Asking for more
/// classes than exist is a usage error.
pub fn mixture_permutations(d: usize, m: usize, seed: u64) -> CliResult<PermutationSet> {
    if m == 0 {
        return Err(CliError::usage("components must be at least 1"));
    }
    if d == 1 {
        if m > 1 {
            return Err(CliError::usage("a 1-D model has a single ordering; use one component"));
        }
        return Ok(PermutationSet {
            perms: vec![vec![0]],
            classes: 1,
        });
    }
    let set = enumerate_circular(d, Some(m), seed)?;
    if set.classes < m {
        return Err(CliError::usage(format!(
            "{m} components requested but D = {d} has only {} circular permutation classes",
            set.classes
        )));
    }
    Ok(set)
}

/// Writes `text` to `path`, or to stdout when no path is given. A closed
/// stdout (as in `trde perms -d 9 | head`) is not an error.
fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}
