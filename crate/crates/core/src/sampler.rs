//! Exact autoregressive sampling by sequential inverse-CDF transforms.
//!
//! Coordinates are drawn in model-axis order. With the left product
//! `P = Q_0(x_0) ... Q_{d-1}(x_{d-1})` and the right message
//! `R_d = E_{d+1} ... E_{D-1}` of mass-weighted paired transfer matrices,
//! the conditional density of axis `d` is `sum_{k,l} W[k,l] f_k(x) f_l(x)`
//! with `W[k,l] = Tr((P G_k ⊗ P G_l) R_d)`, a banded quadratic form whose CDF
//! is `<W, pair_integral_to(x)>`.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::linalg::kron;
use crate::model::{local_factor, TrdeModel};
use crate::splines::BasisGrid;
use crate::tensor_ring::Core;

/// Bisection steps on the local coordinate of one interval.
pub const BISECTION_STEPS: usize = 50;

/// Samples per parallel work unit in [`sample_batch`].
const SAMPLE_CHUNK: usize = 256;

/// Precomputed right messages for one model version.
#[derive(Debug, Clone)]
pub struct SamplePlan {
    version: u64,
    right: Vec<Array2<f64>>,
    first: BandMatrix,
}

impl SamplePlan {
    /// `right_messages()[d] = E_{d+1} ... E_{D-1}`; the last is the identity.
    pub fn right_messages(&self) -> &[Array2<f64>] {
        &self.right
    }

    /// Weights of the first axis' marginal.
    pub fn first_weights(&self) -> &BandMatrix {
        &self.first
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn check(&self, model: &TrdeModel) -> Result<()> {
        if self.version != model.version() {
            return Err(Error::StalePlan {
                plan: self.version,
                model: model.version(),
            });
        }
        Ok(())
    }
}

pub fn build_plan(model: &TrdeModel) -> SamplePlan {
    let d = model.dims();
    let neg = model.negative_phase();
    let r0 = model.coeff().core(0).left();
    let mut right = vec![Array2::eye(r0 * r0); d];
    for axis in (0..d.saturating_sub(1)).rev() {
        right[axis] = neg.transfer[axis + 1].dot(&right[axis + 1]);
    }
    let first = conditional_weights(model.coeff().core(0), &Array2::eye(r0).view(), &right[0], d == 1);
    SamplePlan {
        version: model.version(),
        right,
        first,
    }
}

/// Banded `W[k,l] = Tr((P G_k ⊗ P G_l) R)` for the lateral slices of `core`.
/// When `last` is set `R` is the identity and `W` is an outer product.
pub fn conditional_weights(core: &Core, left: &ArrayView2<f64>, right: &Array2<f64>, last: bool) -> BandMatrix {
    let k = core.modes();
    let mut w = BandMatrix::zeros(k);
    if last {
        // Tr(P G_k) = sum_{a,e} P[a,e] G_k[e,a]
        let pt = left.t();
        let v: Vec<f64> = (0..k)
            .map(|i| (&core.slice(i) * &pt).sum())
            .collect();
        for i in 0..k {
            for j in i..(i + BandMatrix::BANDWIDTH + 1).min(k) {
                w.set(i, j, v[i] * v[j]);
            }
        }
        return w;
    }
    let (rl, rr) = (core.left(), core.right());
    // S[(c, c'), (e, e')] = sum_{a,b} R[(c, c'), (a, b)] P[a, e] P[b, e']
    let s = right.dot(&kron(left, left));
    // X[(e, c), (e', c')] = S[(c, c'), (e, e')]
    let mut x = Array2::zeros((rl * rr, rl * rr));
    for e in 0..rl {
        for c in 0..rr {
            for ep in 0..rl {
                for cp in 0..rr {
                    x[[e * rr + c, ep * rr + cp]] = s[[c * rr + cp, e * rl + ep]];
                }
            }
        }
    }
    let g = core.as_matrix();
    let y = g.dot(&x);
    for i in 0..k {
        let yi = y.row(i);
        for j in i..(i + BandMatrix::BANDWIDTH + 1).min(k) {
            let a = yi.dot(&g.row(j));
            let b = y.row(j).dot(&g.row(i));
            w.set(i, j, 0.5 * (a + b));
        }
    }
    w
}

/// The CDF `F(x) = <W, int_0^x f f^T>` of one conditional, with per-interval
/// masses for inversion.
#[derive(Debug, Clone)]
pub struct ConditionalCdf<'a> {
    grid: &'a BasisGrid,
    weights: BandMatrix,
    cumulative: Vec<f64>,
}

impl<'a> ConditionalCdf<'a> {
    pub fn new(grid: &'a BasisGrid, weights: BandMatrix) -> Self {
        let block = grid.interval_pair_integral();
        let mut cumulative = Vec::with_capacity(grid.intervals() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for j in 0..grid.intervals() {
            acc += interval_form(&weights, j, block).max(0.0);
            cumulative.push(acc);
        }
        ConditionalCdf {
            grid,
            weights,
            cumulative,
        }
    }

    pub fn weights(&self) -> &BandMatrix {
        &self.weights
    }

    /// Unnormalized total mass.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("at least one interval")
    }

    /// Unnormalized density at `x`.
    pub fn density(&self, x: f64) -> Result<f64> {
        let (first, vals) = self.grid.eval_active(x)?;
        let mut s = 0.0;
        for r in 0..3 {
            for q in 0..3 {
                s += self.weights.get(first + r, first + q) * vals[r] * vals[q];
            }
        }
        Ok(s)
    }

    /// Normalized CDF at `x`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let (j, t) = self.grid.locate(x)?;
        let part = interval_form(&self.weights, j, &self.grid.partial_pair_integral(t)).max(0.0);
        Ok((self.cumulative[j] + part) / self.total())
    }

    /// `x` with `F(x) = u`. `dim` labels a degenerate-conditional error.
    pub fn invert(&self, u: f64, dim: usize) -> Result<f64> {
        let total = self.total();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateConditional { dim });
        }
        let target = u * total;
        let n = self.grid.intervals();
        // first interval whose upper cumulative mass reaches the target
        let j = self.cumulative[1..]
            .partition_point(|&c| c < target)
            .min(n - 1);
        let rest = target - self.cumulative[j];
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let f = interval_form(&self.weights, j, &self.grid.partial_pair_integral(mid));
            if f < rest {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = (j as f64 + 0.5 * (lo + hi)) * self.grid.knot_step();
        Ok(x.clamp(0.0, 1.0))
    }
}

fn interval_form(w: &BandMatrix, first: usize, block: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for r in 0..3 {
        for q in 0..3 {
            s += w.get(first + r, first + q) * block[r][q];
        }
    }
    s
}

/// Maps `u` in `[0, 1)^D` (indexed by model axis) to a sample in data order.
pub fn sample_one(model: &TrdeModel, plan: &SamplePlan, u: &[f64]) -> Result<Vec<f64>> {
    plan.check(model)?;
    let d = model.dims();
    if u.len() != d {
        return Err(Error::InvalidArgument(format!("u has {} entries for D = {d}", u.len())));
    }
    if let Some(&v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain { value: v });
    }
    let perm = model.permutation();
    let mut x = vec![0.0; d];
    let mut left: Option<Array2<f64>> = None;
    for axis in 0..d {
        let core = model.coeff().core(axis);
        let weights = match &left {
            None => plan.first.clone(),
            Some(p) => conditional_weights(core, &p.view(), &plan.right[axis], axis + 1 == d),
        };
        let cdf = ConditionalCdf::new(model.grid(axis), weights);
        let xd = cdf.invert(u[axis], perm[axis])?;
        x[perm[axis]] = xd;
        if axis + 1 < d {
            let (first, vals) = model.grid(axis).eval_active(xd)?;
            let q = local_factor(core, first, &vals);
            let mut next = match left {
                None => q,
                Some(p) => p.dot(&q),
            };
            // the conditional is scale free; keep the running product O(1)
            let m = next.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if m > 0.0 && m.is_finite() {
                next.mapv_inplace(|v| v / m);
            }
            left = Some(next);
        }
    }
    Ok(x)
}

/// Generator for sample `index` under `seed`; draws are consumed in axis order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `n` samples in data order, one independent stream per row.
pub fn sample_batch(model: &TrdeModel, plan: &SamplePlan, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    plan.check(model)?;
    let d = model.dims();
    let starts: Vec<usize> = (0..n).step_by(SAMPLE_CHUNK).collect();
    let chunks: Vec<Vec<f64>> = starts
        .into_par_iter()
        .map(|start| {
            let end = (start + SAMPLE_CHUNK).min(n);
            let mut out = Vec::with_capacity((end - start) * d);
            for i in start..end {
                let mut rng = sample_rng(seed, i as u64);
                let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                out.extend(sample_one(model, plan, &u)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = chunks.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, d), flat).expect("n rows of D coordinates"))
}
