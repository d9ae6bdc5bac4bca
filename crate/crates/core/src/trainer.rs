//! Minibatch maximum-likelihood training with validation early stopping.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::{Dataset, Split};
use crate::error::{Error, Result};
use crate::mixture::TermModel;
use crate::model::{gauge_factor, Gradient, LikelihoodSum, TrdeModel};

/// Norm used when clipping switches on after a non-finite gradient.
pub const AUTO_CLIP_NORM: f64 = 10.0;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" | "plain-sgd" => Ok(Optimizer::Sgd),
            "adam" | "adaptive-moment" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 512,
            max_epochs: 200,
            patience: 20,
            seed: 0,
            optimizer: Optimizer::Adam,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!("gradient clip must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// A density whose cores can be optimized by [`fit`].
pub trait Trainable: Clone + Send + Sync {
    fn dims(&self) -> usize;

    /// Rescales the cores to the gauge target using a fresh mass computation,
    /// then returns the summed log-likelihood of `batch` and its gradient
    /// (one entry per component).
    fn gauged_gradient(&mut self, batch: &ArrayView2<f64>) -> Result<(LikelihoodSum, Vec<Gradient>)>;

    /// Applies `f(component, axis, core)` to every core.
    fn update_cores(&mut self, f: &mut dyn FnMut(usize, usize, &mut Array3<f64>));

    fn row_log_likelihoods(&self, batch: &ArrayView2<f64>) -> Result<Vec<f64>>;

    fn total_mass(&self) -> f64;

    fn sigma(&self) -> Result<Vec<f64>>;

    /// Moves the cores to the gauge target without computing gradients.
    fn gauge(&mut self);
}

impl Trainable for TrdeModel {
    fn dims(&self) -> usize {
        TrdeModel::dims(self)
    }

    fn gauged_gradient(&mut self, batch: &ArrayView2<f64>) -> Result<(LikelihoodSum, Vec<Gradient>)> {
        let mut neg = self.negative_phase();
        if neg.z > 0.0 && neg.z.is_finite() {
            let s = gauge_factor(neg.z, 1.0, TrdeModel::dims(self));
            self.scale_cores(s);
            neg.rescale(s);
        }
        let (sum, grad) = self.grad_log_likelihood_with(batch, &neg)?;
        Ok((sum, vec![grad]))
    }

    fn update_cores(&mut self, f: &mut dyn FnMut(usize, usize, &mut Array3<f64>)) {
        TrdeModel::update_cores(self, |cores| {
            for (axis, c) in cores.iter_mut().enumerate() {
                f(0, axis, c.slices_mut());
            }
        });
    }

    fn row_log_likelihoods(&self, batch: &ArrayView2<f64>) -> Result<Vec<f64>> {
        TrdeModel::row_log_likelihoods(self, batch)
    }

    fn total_mass(&self) -> f64 {
        self.partition_function()
    }

    fn sigma(&self) -> Result<Vec<f64>> {
        Ok(vec![1.0])
    }

    fn gauge(&mut self) {
        self.gauge_fix();
    }
}

impl Trainable for TermModel {
    fn dims(&self) -> usize {
        TermModel::dims(self)
    }

    fn gauged_gradient(&mut self, batch: &ArrayView2<f64>) -> Result<(LikelihoodSum, Vec<Gradient>)> {
        let mut negs: Vec<_> = self.components().iter().map(TrdeModel::negative_phase).collect();
        let total: f64 = negs.iter().map(|n| n.z).sum();
        if total > 0.0 && total.is_finite() {
            let s = self.rescale_joint_from(total);
            for n in &mut negs {
                n.rescale(s);
            }
        }
        self.grad_log_likelihood_with(batch, &negs)
    }

    fn update_cores(&mut self, f: &mut dyn FnMut(usize, usize, &mut Array3<f64>)) {
        for (m, comp) in self.components_mut().iter_mut().enumerate() {
            comp.update_cores(|cores| {
                for (axis, c) in cores.iter_mut().enumerate() {
                    f(m, axis, c.slices_mut());
                }
            });
        }
    }

    fn row_log_likelihoods(&self, batch: &ArrayView2<f64>) -> Result<Vec<f64>> {
        TermModel::row_log_likelihoods(self, batch)
    }

    fn total_mass(&self) -> f64 {
        TermModel::total_mass(self)
    }

    fn sigma(&self) -> Result<Vec<f64>> {
        self.sigma_weights()
    }

    fn gauge(&mut self) {
        self.rescale_joint();
    }
}

/// Optimizer state over all cores of a model.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    step: u64,
    first: Vec<Vec<Array3<f64>>>,
    second: Vec<Vec<Array3<f64>>>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, learning_rate: f64, shape: &[Gradient]) -> Self {
        let zeros: Vec<Vec<Array3<f64>>> = shape
            .iter()
            .map(|g| g.cores.iter().map(|a| Array3::zeros(a.dim())).collect())
            .collect();
        OptimizerState {
            kind,
            learning_rate,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// Moves the cores along `descent`, the gradient of the loss to minimize.
    pub fn apply<M: Trainable>(&mut self, model: &mut M, descent: &[Gradient]) {
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            Optimizer::Sgd => model.update_cores(&mut |m, axis, core| {
                core.scaled_add(-lr, &descent[m].cores[axis]);
            }),
            Optimizer::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                let (first, second) = (&mut self.first, &mut self.second);
                model.update_cores(&mut |m, axis, core| {
                    let g = &descent[m].cores[axis];
                    let mm = &mut first[m][axis];
                    let vv = &mut second[m][axis];
                    ndarray::Zip::from(core)
                        .and(g)
                        .and(mm)
                        .and(vv)
                        .for_each(|p, &g, m1, m2| {
                            *m1 = ADAM_BETA1 * *m1 + (1.0 - ADAM_BETA1) * g;
                            *m2 = ADAM_BETA2 * *m2 + (1.0 - ADAM_BETA2) * g * g;
                            *p -= lr * (*m1 / c1) / ((*m2 / c2).sqrt() + ADAM_EPS);
                        });
                });
            }
        }
    }
}

fn gradient_norm(grads: &[Gradient]) -> f64 {
    grads.iter().map(|g| g.norm().powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training NLL over the epoch's minibatches, original units.
    pub train_nll: f64,
    pub val_nll: f64,
    pub sum_z: f64,
    pub sigma: Vec<f64>,
    pub seconds: f64,
    pub floor_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_nll: f64,
    /// Epoch at which clipping switched on after a non-finite gradient.
    pub auto_clip_epoch: Option<usize>,
    /// Set when training stopped on a non-finite likelihood.
    pub divergence: Option<String>,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_nll", "val_nll", "sum_z", "seconds"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_nll.to_string(),
                e.val_nll.to_string(),
                e.sum_z.to_string(),
                e.seconds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Mean NLL and its standard error over the rows of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllSummary {
    pub mean: f64,
    pub std_error: f64,
    pub rows: usize,
    pub floor_hits: usize,
}

/// Mean per-row NLL of `batch` in unit-cube coordinates plus `log_jacobian`.
pub fn summarize_nll<M: Trainable>(model: &M, batch: &ArrayView2<f64>, log_jacobian: f64) -> Result<NllSummary> {
    let ll = model.row_log_likelihoods(batch)?;
    let n = ll.len() as f64;
    let floor = (crate::model::LOG_FLOOR).ln() - model.total_mass().ln();
    let floor_hits = ll.iter().filter(|&&v| v <= floor + 1e-9).count();
    let mean_ll = ll.iter().sum::<f64>() / n;
    let var = if ll.len() > 1 {
        ll.iter().map(|v| (v - mean_ll).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(NllSummary {
        mean: -mean_ll + log_jacobian,
        std_error: (var / n).sqrt(),
        rows: ll.len(),
        floor_hits,
    })
}

/// Mean NLL of a split in original data units.
pub fn evaluate_nll<M: Trainable>(model: &M, dataset: &Dataset, split: Split) -> Result<f64> {
    let batch = dataset.split(split);
    if batch.nrows() == 0 {
        return Err(Error::Empty(format!("{split} split")));
    }
    Ok(summarize_nll(model, &batch, dataset.log_jacobian())?.mean)
}

/// Trains `model` in place on the training split; the best validation
/// parameters are restored before returning.
pub fn fit<M: Trainable>(model: &mut M, dataset: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if dataset.dims() != model.dims() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} dimensions, model has {}",
            dataset.dims(),
            model.dims()
        )));
    }
    let train = dataset.train();
    let val = dataset.validation();
    if train.nrows() == 0 || val.nrows() == 0 {
        return Err(Error::Empty("training needs train and validation rows".into()));
    }
    let log_jac = dataset.log_jacobian();
    let mut state: Option<OptimizerState> = None;
    let mut clip = config.grad_clip;
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_nll: f64::INFINITY,
        auto_clip_epoch: None,
        divergence: None,
    };
    let mut best = model.clone();
    let mut order: Vec<usize> = (0..train.nrows()).collect();
    let start = Instant::now();

    for epoch in 0..config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut ll_total = 0.0;
        let mut rows = 0usize;
        let mut floor_hits = 0usize;
        for idx in order.chunks(config.batch_size) {
            let batch = train.select(Axis(0), idx);
            let (sum, mut grads) = model.gauged_gradient(&batch.view())?;
            if !sum.total.is_finite() {
                report.divergence = Some(format!("training log-likelihood became {}", sum.total));
                break;
            }
            ll_total += sum.total;
            rows += sum.rows;
            floor_hits += sum.floor_hits;
            let b = sum.rows as f64;
            let finite = grads.iter().all(Gradient::is_finite);
            if !finite {
                if clip.is_none() {
                    log::warn!("non-finite gradient at epoch {epoch}; clipping gradients at norm {AUTO_CLIP_NORM}");
                    clip = Some(AUTO_CLIP_NORM);
                    report.auto_clip_epoch = Some(epoch);
                }
                continue;
            }
            // descend on the mean negative log-likelihood
            for g in &mut grads {
                g.scale(-1.0 / b);
            }
            if let Some(c) = clip {
                let norm = gradient_norm(&grads);
                if norm > c {
                    for g in &mut grads {
                        g.scale(c / norm);
                    }
                }
            }
            let st = state.get_or_insert_with(|| OptimizerState::new(config.optimizer, config.learning_rate, &grads));
            st.apply(model, &grads);
        }
        if report.divergence.is_some() {
            break;
        }
        model.gauge();
        let val_nll = summarize_nll(model, &val, log_jac)?.mean;
        let record = EpochRecord {
            epoch,
            train_nll: -ll_total / rows as f64 + log_jac,
            val_nll,
            sum_z: model.total_mass(),
            sigma: model.sigma()?,
            seconds: start.elapsed().as_secs_f64(),
            floor_hits,
        };
        log::info!(
            "epoch {epoch}: train {:.4} val {:.4} ({:.1}s)",
            record.train_nll,
            record.val_nll,
            record.seconds
        );
        report.epochs.push(record);
        if !val_nll.is_finite() {
            report.divergence = Some(format!("validation NLL became {val_nll}"));
            break;
        }
        if val_nll < report.best_val_nll {
            report.best_val_nll = val_nll;
            report.best_epoch = epoch;
            best = model.clone();
        } else if epoch - report.best_epoch >= config.patience {
            break;
        }
    }
    if let Some(reason) = &report.divergence {
        log::error!("training diverged: {reason}; restoring the best finite parameters");
    }
    *model = best;
    Ok(report)
}
