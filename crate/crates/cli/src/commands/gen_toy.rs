use trde::datasets::write_matrix;

use super::Source;
use crate::cli::GenToyArgs;
use crate::error::CliResult;

/// Raw generator output in the family's natural coordinates.
pub fn gen_toy(family: &str, n: usize, noise: Option<f64>, seed: u64) -> CliResult<ndarray::Array2<f64>> {
    let source = Source::new(Some(family), None, false, Some(n), noise)?;
    Ok(source.load(seed)?.1)
}

pub(super) fn run(args: &GenToyArgs) -> CliResult<()> {
    let rows = gen_toy(&args.family, args.n, args.noise, args.seed)?;
    write_matrix(&args.out, &rows.view())?;
    Ok(())
}
