use std::fmt::Write as _;

use trde::DensityQuery;

use super::emit;
use crate::checkpoint::Checkpoint;
use crate::cli::MarginalArgs;
use crate::error::{CliError, CliResult};

/// Density on a midpoint grid over the free dimensions, in unit-cube
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalGrid {
    pub free: Vec<usize>,
    /// One row per grid point: free coordinates then density.
    pub rows: Vec<Vec<f64>>,
    /// Midpoint-rule integral of the density over the free dimensions.
    pub integral: f64,
}

/// Parses `dim=value`.
pub fn parse_fix(spec: &str) -> CliResult<(usize, f64)> {
    let (d, v) = spec
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--fix expects dim=value, got `{spec}`")))?;
    let dim = d
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("bad dimension in --fix `{spec}`")))?;
    let value = v
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("bad value in --fix `{spec}`")))?;
    Ok((dim, value))
}

/// Normalized marginal over `free` when nothing is fixed, otherwise the
/// conditional density given `fixed`. Every other dimension is integrated
/// out.
pub fn marginal(checkpoint: &Checkpoint, free: &[usize], fixed: &[(usize, f64)], grid: usize) -> CliResult<MarginalGrid> {
    let d = checkpoint.dims();
    if free.len() > 2 {
        return Err(CliError::usage(format!("at most two free dimensions, got {}", free.len())));
    }
    if grid == 0 {
        return Err(CliError::usage("--grid must be at least 1"));
    }
    let mut seen = vec![false; d];
    for &j in free.iter().chain(fixed.iter().map(|(j, _)| j)) {
        if j >= d {
            return Err(CliError::usage(format!("dimension {j} out of range for D = {d}")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(CliError::usage(format!("dimension {j} is used more than once")));
        }
    }
    for &(j, v) in fixed {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::usage(format!(
                "fixed value {v} for dimension {j} lies outside the unit interval"
            )));
        }
    }
    let given: Vec<usize> = fixed.iter().map(|&(j, _)| j).collect();
    let mut base = DensityQuery::new();
    for &(j, v) in fixed {
        base = base.fix(j, v);
    }
    for j in (0..d).filter(|j| !seen[*j]) {
        base = base.marginalize(j);
    }
    let model = &checkpoint.model;
    let density = |q: &DensityQuery| -> CliResult<f64> {
        Ok(if given.is_empty() {
            model.normalized_marginal(q)?
        } else {
            model.conditional_density(q, &given)?
        })
    };
    let mid = |i: usize| (i as f64 + 0.5) / grid as f64;
    let mut rows = Vec::new();
    match free {
        [] => rows.push(vec![density(&base)?]),
        [a] => {
            for i in 0..grid {
                let x = mid(i);
                rows.push(vec![x, density(&base.clone().fix(*a, x))?]);
            }
        }
        [a, b] => {
            for i in 0..grid {
                for j in 0..grid {
                    let (x, y) = (mid(i), mid(j));
                    rows.push(vec![x, y, density(&base.clone().fix(*a, x).fix(*b, y))?]);
                }
            }
        }
        _ => unreachable!("free dimensions checked above"),
    }
    let cell = (1.0 / grid as f64).powi(free.len() as i32);
    let integral = rows.iter().map(|r| r[r.len() - 1]).sum::<f64>() * cell;
    Ok(MarginalGrid {
        free: free.to_vec(),
        rows,
        integral,
    })
}

pub(super) fn run(args: &MarginalArgs) -> CliResult<()> {
    let fixed = args.fix.iter().map(|s| parse_fix(s)).collect::<CliResult<Vec<_>>>()?;
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(anyhow::Error::from)?;
    let g = marginal(&ckpt, &args.free, &fixed, args.grid)?;
    let mut text = String::new();
    let header: Vec<String> = g.free.iter().map(|j| format!("x{j}")).chain(["density".into()]).collect();
    writeln!(text, "{}", header.join(",")).expect("write to string");
    for row in &g.rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(text, "{}", cells.join(",")).expect("write to string");
    }
    emit(args.out.as_deref(), &text)?;
    eprintln!("grid_integral {}", g.integral);
    Ok(())
}
