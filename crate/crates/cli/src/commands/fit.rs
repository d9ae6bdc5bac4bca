use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trde::{evaluate_nll, Dataset, Split, TermModel, TrainReport};

use super::{mixture_permutations, Source};
use crate::checkpoint::Checkpoint;
use crate::cli::FitArgs;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// A finished (or diverged) training run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    pub dataset: Dataset,
}

/// The config file (if any) with every given flag applied on top.
pub fn resolve_config(args: &FitArgs) -> CliResult<RunConfig> {
    let mut c = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let d = &args.data;
    if d.toy.is_some() || d.csv.is_some() {
        c.dataset.toy = d.toy.clone();
        c.dataset.csv = d.csv.clone();
    }
    if d.header {
        c.dataset.header = true;
    }
    macro_rules! set {
        ($flag:expr => $field:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v;
            }
        };
    }
    set!(d.n => c.dataset.n);
    set!(d.validation => c.dataset.validation);
    set!(d.test => c.dataset.test);
    set!(args.k_basis => c.model.k_basis);
    set!(args.rank => c.model.rank);
    set!(args.components => c.model.components);
    set!(args.learning_rate => c.train.learning_rate);
    set!(args.batch_size => c.train.batch_size);
    set!(args.max_epochs => c.train.max_epochs);
    set!(args.patience => c.train.patience);
    set!(args.optimizer => c.train.optimizer);
    if d.noise.is_some() {
        c.dataset.noise = d.noise;
    }
    if args.grad_clip.is_some() {
        c.train.grad_clip = args.grad_clip;
    }
    if args.seed.is_some() {
        c.seed = args.seed;
    }
    c.validate()?;
    Ok(c)
}

/// Builds the dataset, trains, and returns the best-validation checkpoint.
pub fn fit(config: &RunConfig) -> CliResult<FitOutcome> {
    config.validate()?;
    let seed = config.seed()?;
    let train = config.train_config()?;
    let ds = &config.dataset;
    let source = Source::new(ds.toy.as_deref(), ds.csv.as_deref(), ds.header, Some(ds.n), ds.noise)?;
    let (name, raw) = source.load(seed)?;
    let dataset = Dataset::from_raw(&name, raw, ds.fractions(), seed).map_err(|e| match e {
        trde::Error::InvalidArgument(m) => CliError::usage(m),
        other => other.into(),
    })?;
    let d = dataset.dims();
    let m = &config.model;
    let perms = mixture_permutations(d, m.components, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = TermModel::initialize(d, m.k_basis, m.rank, &perms, &mut rng)?;
    log::info!(
        "fitting {name}: D = {d}, K = {}, R = {}, M = {}, {} parameters",
        m.k_basis,
        m.rank,
        m.components,
        model.parameter_count()
    );
    let report = trde::fit(&mut model, &dataset, &train)?;
    let checkpoint = Checkpoint {
        dataset: name,
        train_seed: seed,
        affine: dataset.affine.clone(),
        model,
    };
    Ok(FitOutcome {
        checkpoint,
        report,
        dataset,
    })
}

pub(super) fn run(args: &FitArgs) -> CliResult<()> {
    let config = resolve_config(args)?;
    let outcome = fit(&config)?;
    let ckpt = &outcome.checkpoint;
    ckpt.save(&args.out).map_err(anyhow::Error::from)?;
    if let Some(path) = &args.report {
        outcome.report.save_csv(path)?;
    }
    if let Some(path) = &args.export_json {
        let text = serde_json::to_string_pretty(&ckpt.to_json()).map_err(anyhow::Error::from)?;
        std::fs::write(path, text)?;
    }
    let r = &outcome.report;
    println!("dataset {}", ckpt.dataset);
    println!("parameters {}", ckpt.model.parameter_count());
    println!("epochs {}", r.epochs.len());
    println!("best_epoch {}", r.best_epoch);
    println!("best_val_nll {}", r.best_val_nll);
    if !outcome.dataset.test().is_empty() {
        println!("test_nll {}", evaluate_nll(&ckpt.model, &outcome.dataset, Split::Test)?);
    }
    println!("checkpoint {}", args.out.display());
    if let Some(reason) = &r.divergence {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "training diverged ({reason}); the best finite parameters were saved to {}",
            args.out.display()
        )));
    }
    Ok(())
}
