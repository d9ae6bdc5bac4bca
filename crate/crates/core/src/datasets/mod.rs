//! Sample sets mapped into the unit cube, with the bookkeeping needed to
//! report likelihoods in original units.

mod toy;

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use toy::{circles3d_deviation, generate_toy, generate_toy_raw, ToyFamily, ToySpec};

/// Distance kept between the training range and each end of `[0, 1]`.
pub const MARGIN: f64 = 0.025;

/// `u = (x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub offset: f64,
    pub scale: f64,
}

impl Affine {
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        u * self.scale + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// Fractions of rows assigned to validation and test; the rest is training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            validation: 0.1,
            test: 0.1,
        }
    }
}

/// Contiguous row ranges of the three splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    fn from_fractions(n: usize, f: SplitFractions) -> Result<Self> {
        if !(0.0..1.0).contains(&f.validation) || !(0.0..1.0).contains(&f.test) || f.validation + f.test >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "split fractions {} / {} leave no training rows",
                f.validation, f.test
            )));
        }
        let n_val = (n as f64 * f.validation).round() as usize;
        let n_test = (n as f64 * f.test).round() as usize;
        let n_train = n.saturating_sub(n_val + n_test);
        if n_train == 0 {
            return Err(Error::Empty("training split".into()));
        }
        Ok(Splits {
            train: 0..n_train,
            validation: n_train..n_train + n_val,
            test: n_train + n_val..n,
        })
    }

    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Validation => self.validation.clone(),
            Split::Test => self.test.clone(),
        }
    }
}

/// Rows in the unit cube with their maps back to original units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub data: Array2<f64>,
    pub affine: Vec<Affine>,
    pub splits: Splits,
}

impl Dataset {
    /// Shuffles `raw` under `seed`, splits it, and maps the training range of
    /// every column onto `[MARGIN, 1 - MARGIN]`. Validation and test rows are
    /// clipped into `[0, 1]`.
    ///
    /// The map is the composition of a z-score and a min/max scaling of the
    /// z-scored training rows, which is a single affine map per column.
    pub fn from_raw(name: &str, raw: Array2<f64>, fractions: SplitFractions, seed: u64) -> Result<Self> {
        let (n, d) = raw.dim();
        if n == 0 || d == 0 {
            return Err(Error::Empty(format!("dataset `{name}` has no rows or columns")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut data = raw.select(Axis(0), &order);
        let splits = Splits::from_fractions(n, fractions)?;

        let mut affine = Vec::with_capacity(d);
        for j in 0..d {
            let col = raw.column(j);
            let mean = col.mean().expect("nonempty column");
            let std = col.std(0.0);
            if !(std > 0.0) || !std.is_finite() {
                return Err(Error::ZeroVariance { column: j });
            }
            let train = data.slice(s![splits.train.clone(), j]);
            let (lo, hi) = train
                .iter()
                .map(|v| (v - mean) / std)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| (a.min(z), b.max(z)));
            if !(hi > lo) {
                return Err(Error::ZeroVariance { column: j });
            }
            // z = (x - mean) / std, u = MARGIN + (z - lo) / (hi - lo) * (1 - 2 MARGIN)
            let zscale = (hi - lo) / (1.0 - 2.0 * MARGIN);
            let scale = std * zscale;
            let offset = mean + std * (lo - MARGIN * zscale);
            affine.push(Affine { offset, scale });
        }
        for (j, a) in affine.iter().enumerate() {
            data.column_mut(j).mapv_inplace(|x| a.to_unit(x).clamp(0.0, 1.0));
        }
        Ok(Dataset {
            name: name.to_string(),
            data,
            affine,
            splits,
        })
    }

    /// Same row order and splits as [`Dataset::from_raw`] with equal
    /// `fractions` and `seed`, but mapped with a given affine (for evaluating
    /// a trained model on the data it was fitted to).
    pub fn with_affine(
        name: &str,
        raw: Array2<f64>,
        affine: Vec<Affine>,
        fractions: SplitFractions,
        seed: u64,
    ) -> Result<Self> {
        let n = raw.nrows();
        if n == 0 {
            return Err(Error::Empty(format!("dataset `{name}` has no rows")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = raw.select(Axis(0), &order);
        let data = to_unit(&affine, &shuffled.view())?;
        let splits = Splits::from_fractions(n, fractions)?;
        Ok(Dataset {
            name: name.to_string(),
            data,
            affine,
            splits,
        })
    }

    pub fn dims(&self) -> usize {
        self.data.ncols()
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn split(&self, split: Split) -> ArrayView2<'_, f64> {
        self.data.slice(s![self.splits.range(split), ..])
    }

    pub fn train(&self) -> ArrayView2<'_, f64> {
        self.split(Split::Train)
    }

    pub fn validation(&self) -> ArrayView2<'_, f64> {
        self.split(Split::Validation)
    }

    pub fn test(&self) -> ArrayView2<'_, f64> {
        self.split(Split::Test)
    }

    /// `sum_d log scale_d`: add to a unit-cube NLL to get original units.
    pub fn log_jacobian(&self) -> f64 {
        log_jacobian(&self.affine)
    }

    pub fn to_original(&self, unit: &ArrayView2<f64>) -> Array2<f64> {
        to_original(&self.affine, unit)
    }

    /// Maps rows in original units into the unit cube, clipped to `[0, 1]`.
    pub fn to_unit(&self, original: &ArrayView2<f64>) -> Result<Array2<f64>> {
        to_unit(&self.affine, original)
    }
}

pub fn log_jacobian(affine: &[Affine]) -> f64 {
    affine.iter().map(|a| a.scale.ln()).sum()
}

pub fn to_original(affine: &[Affine], unit: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = unit.to_owned();
    for (j, a) in affine.iter().enumerate() {
        out.column_mut(j).mapv_inplace(|u| a.from_unit(u));
    }
    out
}

pub fn to_unit(affine: &[Affine], original: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if original.ncols() != affine.len() {
        return Err(Error::InvalidArgument(format!(
            "data has {} columns, expected {}",
            original.ncols(),
            affine.len()
        )));
    }
    let mut out = original.to_owned();
    for (j, a) in affine.iter().enumerate() {
        out.column_mut(j).mapv_inplace(|x| a.to_unit(x).clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Reads a numeric CSV. Row and column numbers in errors are 1-based lines
/// and fields of the file.
pub fn read_matrix(path: &Path, header: bool) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1 + usize::from(header);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Ragged {
                row: line,
                got: record.len(),
                expected,
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: j + 1,
                cell: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: j + 1,
                    cell: cell.to_string(),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Empty(format!("{} has no data rows", path.display())))?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("rows checked for equal width"))
}

/// Writes rows without a header using shortest round-trip formatting.
pub fn write_matrix(path: &Path, data: &ArrayView2<f64>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in data.rows() {
        writer.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads `path` and standardizes it with [`Dataset::from_raw`].
pub fn ingest_csv(path: &Path, header: bool, fractions: SplitFractions, seed: u64) -> Result<Dataset> {
    let raw = read_matrix(path, header)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::from_raw(&name, raw, fractions, seed)
}

/// Bins per dimension used for histogram KL at a given dimension.
pub fn default_bins(d: usize) -> usize {
    if d <= 2 {
        100
    } else {
        50
    }
}

/// `KL(p̂ || q̂)` between add-one smoothed histograms on a regular grid over
/// the joint bounding box of both sets.
pub fn histogram_kl(p: &ArrayView2<f64>, q: &ArrayView2<f64>, bins: usize) -> Result<f64> {
    if p.nrows() == 0 || q.nrows() == 0 {
        return Err(Error::Empty("histogram KL needs two nonempty sample sets".into()));
    }
    let d = p.ncols();
    if q.ncols() != d {
        return Err(Error::InvalidArgument(format!("sample sets have {d} and {} columns", q.ncols())));
    }
    if d > 3 {
        return Err(Error::TooManyDimensions(d));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("histogram input".into()));
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in p.rows().into_iter().chain(q.rows()) {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let cells = bins.pow(d as u32);
    let count = |set: &ArrayView2<f64>| {
        let mut c = vec![0.0f64; cells];
        for row in set.rows() {
            let mut idx = 0;
            for j in 0..d {
                let width = hi[j] - lo[j];
                let b = if width > 0.0 {
                    (((row[j] - lo[j]) / width * bins as f64) as usize).min(bins - 1)
                } else {
                    0
                };
                idx = idx * bins + b;
            }
            c[idx] += 1.0;
        }
        c
    };
    let cp = count(p);
    let cq = count(q);
    let np = p.nrows() as f64 + cells as f64;
    let nq = q.nrows() as f64 + cells as f64;
    let kl: f64 = cp
        .iter()
        .zip(&cq)
        .map(|(a, b)| {
            let pa = (a + 1.0) / np;
            let qb = (b + 1.0) / nq;
            pa * (pa / qb).ln()
        })
        .sum();
    Ok(kl.max(0.0))
}

/// Full-covariance Gaussian fitted by maximum likelihood.
#[derive(Debug, Clone)]
pub struct GaussianBaseline {
    mean: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GaussianBaseline {
    pub fn fit(data: &ArrayView2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(Error::Empty("a Gaussian fit needs at least two rows".into()));
        }
        let mean = DVector::from_iterator(d, data.mean_axis(Axis(0)).expect("rows").iter().copied());
        let mut cov = DMatrix::zeros(d, d);
        for row in data.rows() {
            let c = DVector::from_iterator(d, row.iter().copied()) - &mean;
            cov += &c * c.transpose();
        }
        cov /= n as f64;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("sample covariance is not positive definite".into()))?;
        Ok(GaussianBaseline { mean, chol })
    }

    /// Mean negative log-density over the rows of `data`.
    pub fn mean_nll(&self, data: &ArrayView2<f64>) -> f64 {
        let d = self.mean.len();
        let log_det: f64 = 2.0 * self.chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let norm = 0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        let total: f64 = data
            .rows()
            .into_iter()
            .map(|row| {
                let c = DVector::from_iterator(d, row.iter().copied()) - &self.mean;
                let z = self.chol.l().solve_lower_triangular(&c).expect("nonsingular factor");
                norm + 0.5 * z.norm_squared()
            })
            .sum();
        total / data.nrows() as f64
    }
}
