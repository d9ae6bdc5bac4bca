use ndarray::Array2;
use trde::datasets::{to_original, write_matrix};
use trde::mixture_sample;

use crate::checkpoint::Checkpoint;
use crate::cli::SampleArgs;
use crate::error::{CliError, CliResult};

/// `n` samples in original data units, deterministic under `seed`.
pub fn sample(checkpoint: &Checkpoint, n: usize, seed: u64) -> CliResult<Array2<f64>> {
    if n == 0 {
        return Err(CliError::usage("sample count must be at least 1"));
    }
    let unit = mixture_sample(&checkpoint.model, n, seed)?;
    Ok(to_original(&checkpoint.affine, &unit.view()))
}

pub(super) fn run(args: &SampleArgs) -> CliResult<()> {
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(anyhow::Error::from)?;
    let rows = sample(&ckpt, args.n, args.seed)?;
    write_matrix(&args.out, &rows.view())?;
    Ok(())
}
