use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trde::datasets::SplitFractions;
use trde::{evaluate_nll, mixture_sample, Dataset, Optimizer, Split, TermModel, TrainConfig};

use super::{emit, mixture_permutations, Source};
use crate::cli::BenchArgs;
use crate::error::{CliError, CliResult};

/// One configuration of the sweep. Timing and NLL fields are empty for a
/// parameter-only sweep or a failed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub k_basis: usize,
    pub rank: usize,
    pub components: usize,
    pub dims: usize,
    pub params: Option<usize>,
    pub test_nll: Option<f64>,
    pub train_seconds: Option<f64>,
    pub sample_seconds: Option<f64>,
    pub error: Option<String>,
}

impl BenchRow {
    pub const HEADER: &'static str = "k,rank,components,dims,params,test_nll,train_seconds,sample_seconds,error";

    pub fn to_csv(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        let error = self.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.k_basis,
            self.rank,
            self.components,
            self.dims,
            opt(&self.params),
            opt(&self.test_nll),
            opt(&self.train_seconds),
            opt(&self.sample_seconds),
            error
        )
    }
}

/// Settings shared by every cell.
#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub k_basis: Vec<usize>,
    pub rank: Vec<usize>,
    pub components: Vec<usize>,
    pub train: TrainConfig,
    pub samples: usize,
}

fn build(d: usize, k: usize, r: usize, m: usize, seed: u64) -> CliResult<TermModel> {
    let perms = mixture_permutations(d, m, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(TermModel::initialize(d, k, r, &perms, &mut rng)?)
}

fn run_cell(plan: &BenchPlan, dims: usize, data: Option<&Dataset>, k: usize, r: usize, m: usize) -> BenchRow {
    let mut row = BenchRow {
        k_basis: k,
        rank: r,
        components: m,
        dims,
        params: None,
        test_nll: None,
        train_seconds: None,
        sample_seconds: None,
        error: None,
    };
    let result = (|| -> CliResult<()> {
        let mut model = build(dims, k, r, m, plan.train.seed)?;
        row.params = Some(model.parameter_count());
        let Some(dataset) = data else { return Ok(()) };
        let start = Instant::now();
        let report = trde::fit(&mut model, dataset, &plan.train)?;
        row.train_seconds = Some(start.elapsed().as_secs_f64());
        if let Some(reason) = report.divergence {
            return Err(CliError::Runtime(anyhow::anyhow!("diverged: {reason}")));
        }
        row.test_nll = Some(evaluate_nll(&model, dataset, Split::Test)?);
        let start = Instant::now();
        mixture_sample(&model, plan.samples, plan.train.seed)?;
        row.sample_seconds = Some(start.elapsed().as_secs_f64());
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("bench cell K = {k}, R = {r}, M = {m} failed: {e}");
        row.error = Some(e.to_string());
    }
    row
}

/// Runs every (K, R, M) cell. A failing cell is reported in its row and the
/// sweep continues. Without a dataset only parameters are counted.
pub fn bench(plan: &BenchPlan, dims: usize, data: Option<&Dataset>) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &k in &plan.k_basis {
        for &r in &plan.rank {
            for &m in &plan.components {
                rows.push(run_cell(plan, dims, data, k, r, m));
            }
        }
    }
    rows
}

pub(super) fn run(args: &BenchArgs) -> CliResult<()> {
    if args.k_basis.is_empty() || args.rank.is_empty() || args.components.is_empty() {
        return Err(CliError::usage("--k-basis, --rank and --components need at least one value"));
    }
    let has_data = args.data.toy.is_some() || args.data.csv.is_some();
    let seed = match (args.params_only, args.seed) {
        (_, Some(s)) => s,
        (true, None) => 0,
        (false, None) => return Err(CliError::usage("--seed is required unless --params-only")),
    };
    let train = TrainConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        patience: args.patience,
        seed,
        optimizer: Optimizer::Adam,
        grad_clip: None,
    };
    train.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let plan = BenchPlan {
        k_basis: args.k_basis.clone(),
        rank: args.rank.clone(),
        components: args.components.clone(),
        train,
        samples: args.samples,
    };
    let dataset = if has_data && !args.params_only {
        let d = &args.data;
        let source = Source::new(d.toy.as_deref(), d.csv.as_deref(), d.header, d.n, d.noise)?;
        let (name, raw) = source.load(seed)?;
        let defaults = SplitFractions::default();
        let fractions = SplitFractions {
            validation: d.validation.unwrap_or(defaults.validation),
            test: d.test.unwrap_or(defaults.test),
        };
        Some(Dataset::from_raw(&name, raw, fractions, seed)?)
    } else if args.params_only {
        None
    } else {
        return Err(CliError::usage("give --toy or --csv, or use --params-only"));
    };
    let dims = match (&dataset, args.dims) {
        (Some(ds), _) => ds.dims(),
        (None, Some(d)) => d,
        (None, None) if has_data => {
            let d = &args.data;
            Source::new(d.toy.as_deref(), d.csv.as_deref(), d.header, Some(1), d.noise)?
                .load(seed)?
                .1
                .ncols()
        }
        (None, None) => return Err(CliError::usage("--params-only needs --dims or a dataset")),
    };
    let rows = bench(&plan, dims, dataset.as_ref());
    let mut text = String::new();
    writeln!(text, "{}", BenchRow::HEADER).expect("write to string");
    for row in &rows {
        writeln!(text, "{}", row.to_csv()).expect("write to string");
    }
    emit(args.out.as_deref(), &text)?;
    Ok(())
}
