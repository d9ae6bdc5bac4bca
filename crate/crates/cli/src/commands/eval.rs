use std::path::Path;

use trde::datasets::{default_bins, histogram_kl, read_matrix, SplitFractions};
use trde::trainer::summarize_nll;
use trde::{Dataset, Split};

use super::{parse_family, sample::sample, Source};
use crate::checkpoint::Checkpoint;
use crate::cli::EvalArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub split: Split,
    pub rows: usize,
    /// Mean NLL in original data units.
    pub nll: f64,
    pub std_error: f64,
    pub floor_hits: usize,
    /// Histogram KL of model samples against the reference set, with bins.
    pub kl: Option<(f64, usize)>,
}

/// Rebuilds the dataset with the checkpoint's own affine map, so the rows
/// and splits match the ones seen in training for equal seed and fractions.
pub fn eval_dataset(checkpoint: &Checkpoint, source: &Source, fractions: SplitFractions, seed: u64) -> CliResult<Dataset> {
    let (name, raw) = source.load(seed)?;
    if raw.ncols() != checkpoint.dims() {
        return Err(CliError::usage(format!(
            "data has {} columns, checkpoint has {} dimensions",
            raw.ncols(),
            checkpoint.dims()
        )));
    }
    Ok(Dataset::with_affine(&name, raw, checkpoint.affine.clone(), fractions, seed)?)
}

/// NLL of one split; the mean is exactly `trainer::evaluate_nll`.
pub fn eval(checkpoint: &Checkpoint, dataset: &Dataset, split: Split) -> CliResult<EvalReport> {
    let batch = dataset.split(split);
    if batch.nrows() == 0 {
        return Err(CliError::usage(format!("the {split} split is empty")));
    }
    let s = summarize_nll(&checkpoint.model, &batch, dataset.log_jacobian())?;
    Ok(EvalReport {
        split,
        rows: s.rows,
        nll: s.mean,
        std_error: s.std_error,
        floor_hits: s.floor_hits,
        kl: None,
    })
}

/// `KL(model samples || reference)` on histograms over original units.
pub fn sample_kl(checkpoint: &Checkpoint, reference: &Path, n: usize, seed: u64, bins: Option<usize>) -> CliResult<(f64, usize)> {
    let d = checkpoint.dims();
    if d > 3 {
        return Err(CliError::usage(format!("histogram KL needs D <= 3, checkpoint has D = {d}")));
    }
    let reference = read_matrix(reference, false)?;
    if reference.ncols() != d {
        return Err(CliError::usage(format!(
            "reference has {} columns, checkpoint has {d} dimensions",
            reference.ncols()
        )));
    }
    let bins = bins.unwrap_or_else(|| default_bins(d));
    let samples = sample(checkpoint, n, seed)?;
    let kl = histogram_kl(&samples.view(), &reference.view(), bins)?;
    Ok((kl, bins))
}

pub(super) fn run(args: &EvalArgs) -> CliResult<()> {
    let split: Split = args.split.parse().map_err(|e: trde::Error| CliError::usage(e.to_string()))?;
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(anyhow::Error::from)?;
    let d = &args.data;
    let toy = match (&d.toy, &d.csv) {
        // a checkpoint trained on a toy family names it
        (None, None) => {
            parse_family(&ckpt.dataset).map_err(|_| {
                CliError::usage(format!(
                    "checkpoint data `{}` is not a toy family; give --toy or --csv",
                    ckpt.dataset
                ))
            })?;
            Some(ckpt.dataset.clone())
        }
        _ => d.toy.clone(),
    };
    let source = Source::new(toy.as_deref(), d.csv.as_deref(), d.header, d.n, d.noise)?;
    let defaults = SplitFractions::default();
    let fractions = SplitFractions {
        validation: d.validation.unwrap_or(defaults.validation),
        test: d.test.unwrap_or(defaults.test),
    };
    let data_seed = args.data_seed.unwrap_or(ckpt.train_seed);
    let dataset = eval_dataset(&ckpt, &source, fractions, data_seed)?;
    let mut report = eval(&ckpt, &dataset, split)?;
    if let Some(reference) = &args.reference {
        let seed = args
            .seed
            .ok_or_else(|| CliError::usage("--seed is required to draw samples for KL"))?;
        report.kl = Some(sample_kl(&ckpt, reference, args.samples, seed, args.bins)?);
    }
    println!("dataset {}", dataset.name);
    println!("split {}", report.split);
    println!("rows {}", report.rows);
    println!("nll {} ± {}", report.nll, report.std_error);
    if report.floor_hits > 0 {
        println!("floor_hits {}", report.floor_hits);
    }
    if let Some((kl, bins)) = report.kl {
        println!("kl {kl}");
        println!("kl_bins {bins}");
    }
    Ok(())
}
