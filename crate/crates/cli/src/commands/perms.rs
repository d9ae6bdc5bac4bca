use std::fmt::Write as _;

use trde::mixture::circular_count;
use trde::{enumerate_circular, PermutationSet};

use super::emit;
use crate::cli::PermsArgs;
use crate::error::{CliError, CliResult};

/// Every class when `limit` allows, otherwise a subset drawn under `seed`.
pub fn perms(d: usize, limit: Option<usize>, seed: Option<u64>) -> CliResult<PermutationSet> {
    if d < 2 {
        return Err(CliError::usage(format!("need at least 2 dimensions, got {d}")));
    }
    if limit == Some(0) {
        return Err(CliError::usage("--limit must be at least 1"));
    }
    let subset = limit.is_some_and(|l| l < circular_count(d));
    let seed = match (subset, seed) {
        (true, None) => return Err(CliError::usage("--seed is required when --limit draws a subset")),
        (_, s) => s.unwrap_or(0),
    };
    Ok(enumerate_circular(d, limit, seed)?)
}

pub(super) fn run(args: &PermsArgs) -> CliResult<()> {
    let set = perms(args.dims, args.limit, args.seed)?;
    let mut text = format!("count {}\n", set.classes);
    if set.len() < set.classes {
        writeln!(text, "listed {}", set.len()).expect("write to string");
    }
    for p in &set.perms {
        let cells: Vec<String> = p.iter().map(usize::to_string).collect();
        writeln!(text, "{}", cells.join(",")).expect("write to string");
    }
    emit(None, &text)
}
