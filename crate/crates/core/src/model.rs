//! One squared tensor-ring density component.
//!
//! `q(x) = T(x)^2`, `T(x) = Tr(Q_0(x_{π(0)}) ... Q_{D-1}(x_{π(D-1)}))`, where
//! `Q_d(x) = sum_k f_k(x) G_d(:, k, :)` and `π` maps model axes to data
//! dimensions.
//!
//! Every integral of `q` reduces to a product of *paired transfer matrices*
//! `E_d = sum_{k,l} W[k,l] G_d(:,k,:) ⊗ G_d(:,l,:)` for a banded weight `W`
//! (the mass matrix, a partial pair integral, or an outer product of basis
//! values at a fixed coordinate), followed by a trace.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::linalg::{kron, trace};
use crate::splines::BasisGrid;
use crate::tensor_ring::{kron_sum, Core, SliceWeights, TrCores};

/// Added to `T(x)^2` before taking logs.
pub const LOG_FLOOR: f64 = 1e-30;

/// Rows per work unit in batched likelihood and gradient evaluation. Fixed so
/// the reduction order does not depend on the thread count.
pub const CHUNK_ROWS: usize = 128;

static VERSION: AtomicU64 = AtomicU64::new(1);

pub(crate) fn next_version() -> u64 {
    VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Checks that `perm` is a bijection on `0..d`.
pub fn validate_permutation(perm: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if perm.len() != d {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= d || seen[p] {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// `sum_{k,l} W[k,l] G_k ⊗ G_l` with merged indices `(a, b)` / `(a', b')`.
pub fn paired_transfer(core: &Core, weights: &BandMatrix) -> Array2<f64> {
    kron_sum(&core.band_mix(weights), core).expect("band_mix preserves the mode count")
}

/// Per-core gradient arrays in core storage layout `(mode, left, right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub cores: Vec<Array3<f64>>,
}

impl Gradient {
    pub fn zeros_like(cores: &TrCores) -> Self {
        Gradient {
            cores: cores.cores().iter().map(|c| Array3::zeros(c.slices().dim())).collect(),
        }
    }

    pub fn add_scaled(&mut self, factor: f64, other: &Gradient) {
        for (a, b) in self.cores.iter_mut().zip(&other.cores) {
            a.scaled_add(factor, b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.cores {
            a.mapv_inplace(|v| v * factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.cores
            .iter()
            .flat_map(|a| a.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.cores.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn len(&self) -> usize {
        self.cores.iter().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Paired transfer matrices with the mass weights and the resulting `Z`.
#[derive(Debug, Clone)]
pub struct NegativePhase {
    /// `H_d`: core `d` with slices mixed by the mass matrix.
    pub mixed: Vec<Core>,
    /// `E_d = sum_k H_d(k) ⊗ G_d(k)`.
    pub transfer: Vec<Array2<f64>>,
    pub z: f64,
}

impl NegativePhase {
    /// Updates the cached quantities after every core was multiplied by `s`.
    pub fn rescale(&mut self, s: f64) {
        for h in &mut self.mixed {
            h.scale(s);
        }
        for e in &mut self.transfer {
            e.mapv_inplace(|v| v * s * s);
        }
        self.z *= s.powi(2 * self.transfer.len() as i32);
    }

    /// `dZ / dG_d` for every core.
    pub fn gradient(&self, cores: &TrCores) -> Gradient {
        let d = cores.order();
        let cyclic = cyclic_complements(&self.transfer);
        let mut grad = Gradient::zeros_like(cores);
        for axis in 0..d {
            let core = cores.core(axis);
            let (rl, rr) = (core.left(), core.right());
            let c = &cyclic[axis];
            // X[(a, a'), (b, b')] = C[(a', b'), (a, b)] + C[(b', a'), (b, a)]
            let mut x = Array2::zeros((rl * rr, rl * rr));
            for a in 0..rl {
                for ap in 0..rr {
                    for b in 0..rl {
                        for bp in 0..rr {
                            x[[a * rr + ap, b * rr + bp]] =
                                c[[ap * rr + bp, a * rl + b]] + c[[bp * rr + ap, b * rl + a]];
                        }
                    }
                }
            }
            let g = self.mixed[axis].as_matrix().dot(&x.t());
            let shape = (core.modes(), rl, rr);
            grad.cores[axis] = g.into_shape_with_order(shape).expect("gradient block shape");
        }
        grad
    }
}

/// `C_d = E_{d+1} ... E_{D-1} E_0 ... E_{d-1}` for every `d`.
pub(crate) fn cyclic_complements(transfer: &[Array2<f64>]) -> Vec<Array2<f64>> {
    let d = transfer.len();
    let mut prefix: Vec<Option<Array2<f64>>> = vec![None; d + 1];
    for i in 0..d {
        prefix[i + 1] = Some(match &prefix[i] {
            None => transfer[i].clone(),
            Some(p) => p.dot(&transfer[i]),
        });
    }
    let mut suffix: Vec<Option<Array2<f64>>> = vec![None; d + 1];
    for i in (0..d).rev() {
        suffix[i] = Some(match &suffix[i + 1] {
            None => transfer[i].clone(),
            Some(s) => transfer[i].dot(s),
        });
    }
    (0..d)
        .map(|i| match (&suffix[i + 1], &prefix[i]) {
            (Some(s), Some(p)) => s.dot(p),
            (Some(s), None) => s.clone(),
            (None, Some(p)) => p.clone(),
            (None, None) => Array2::eye(transfer[i].nrows()),
        })
        .collect()
}

/// Summed log-likelihood over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodSum {
    pub total: f64,
    pub rows: usize,
    /// Rows whose `T(x)^2` fell below the log floor.
    pub floor_hits: usize,
}

/// Which dimensions of a density query are fixed, integrated out, or
/// integrated up to a limit. Keys are data dimensions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensityQuery {
    pub fixed: BTreeMap<usize, f64>,
    pub marginalized: BTreeSet<usize>,
    pub upper_limits: BTreeMap<usize, f64>,
}

impl DensityQuery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(mut self, dim: usize, value: f64) -> Self {
        self.fixed.insert(dim, value);
        self
    }

    pub fn marginalize(mut self, dim: usize) -> Self {
        self.marginalized.insert(dim);
        self
    }

    pub fn upper_limit(mut self, dim: usize, value: f64) -> Self {
        self.upper_limits.insert(dim, value);
        self
    }

    /// Marginalizes every dimension in `0..d`.
    pub fn all_marginalized(d: usize) -> Self {
        DensityQuery {
            marginalized: (0..d).collect(),
            ..Self::default()
        }
    }

    /// Checks that the three sets are disjoint and cover `0..d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let mut role = vec![0u8; d];
        let dims = self
            .fixed
            .keys()
            .chain(self.marginalized.iter())
            .chain(self.upper_limits.keys());
        for &j in dims {
            if j >= d {
                return Err(Error::InconsistentQuery(format!("dimension {j} out of range for D = {d}")));
            }
            role[j] += 1;
            if role[j] > 1 {
                return Err(Error::InconsistentQuery(format!("dimension {j} appears in more than one role")));
            }
        }
        if let Some(j) = role.iter().position(|&r| r == 0) {
            return Err(Error::InconsistentQuery(format!("dimension {j} is neither fixed nor integrated")));
        }
        Ok(())
    }
}

/// A squared tensor-ring density component.
#[derive(Debug, Clone)]
pub struct TrdeModel {
    coeff: TrCores,
    grids: Vec<BasisGrid>,
    mass: Vec<BandMatrix>,
    permutation: Vec<usize>,
    version: u64,
}

impl TrdeModel {
    /// `permutation[d]` is the data dimension read by model axis `d`.
    pub fn new(coeff: TrCores, permutation: Vec<usize>) -> Result<Self> {
        validate_permutation(&permutation, coeff.order())?;
        let grids = coeff
            .mode_sizes()
            .into_iter()
            .map(BasisGrid::new)
            .collect::<Result<Vec<_>>>()?;
        let mass = grids.iter().map(BasisGrid::mass_matrix).collect();
        Ok(TrdeModel {
            coeff,
            grids,
            mass,
            permutation,
            version: next_version(),
        })
    }

    /// Cores with entries uniform in `[0.9, 1.1]`, rescaled to `Z = 1`.
    pub fn initialize<R: Rng + ?Sized>(
        dims: usize,
        k_basis: usize,
        rank: usize,
        permutation: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let coeff = TrCores::random(&vec![rank; dims], &vec![k_basis; dims], 0.9, 1.1, rng)?;
        let mut model = TrdeModel::new(coeff, permutation)?;
        model.gauge_fix();
        Ok(model)
    }

    /// Rank one with all-ones slices: `T ≡ 1` and the density is uniform.
    pub fn uniform(dims: usize, k_basis: usize) -> Result<Self> {
        let coeff = TrCores::ones(&vec![1; dims], &vec![k_basis; dims])?;
        TrdeModel::new(coeff, (0..dims).collect())
    }

    pub fn dims(&self) -> usize {
        self.coeff.order()
    }

    pub fn coeff(&self) -> &TrCores {
        &self.coeff
    }

    pub fn grids(&self) -> &[BasisGrid] {
        &self.grids
    }

    pub fn grid(&self, axis: usize) -> &BasisGrid {
        &self.grids[axis]
    }

    pub fn mass(&self, axis: usize) -> &BandMatrix {
        &self.mass[axis]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Model axis holding each data dimension.
    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.dims()];
        for (axis, &dim) in self.permutation.iter().enumerate() {
            inv[dim] = axis;
        }
        inv
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn parameter_count(&self) -> usize {
        self.coeff.parameter_count()
    }

    /// Applies `f` to the cores; the model version changes.
    pub fn update_cores<F: FnOnce(&mut [Core])>(&mut self, f: F) {
        f(self.coeff.cores_mut());
        self.version = next_version();
    }

    pub fn scale_cores(&mut self, factor: f64) {
        self.update_cores(|cores| cores.iter_mut().for_each(|c| c.scale(factor)));
    }

    /// Rescales the cores so that `Z = 1`; returns the previous `Z`.
    pub fn gauge_fix(&mut self) -> f64 {
        let z = self.partition_function();
        if z > 0.0 && z.is_finite() {
            self.scale_cores(gauge_factor(z, 1.0, self.dims()));
        }
        z
    }

    /// `Q_d(x) = sum_k f_k(x) G_d(:, k, :)` for model axis `axis`.
    pub fn phi_factor(&self, axis: usize, x: f64) -> Result<Array2<f64>> {
        let (first, vals) = self.grids[axis].eval_active(x)?;
        Ok(local_factor(self.coeff.core(axis), first, &vals))
    }

    /// `T(x)` for `x` in data order.
    pub fn ring_value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mut acc = self.phi_factor(0, x[self.permutation[0]])?;
        for axis in 1..self.dims() {
            acc = acc.dot(&self.phi_factor(axis, x[self.permutation[axis]])?);
        }
        Ok(trace(&acc.view()))
    }

    pub fn unnormalized_density(&self, x: &[f64]) -> Result<f64> {
        let t = self.ring_value(x)?;
        Ok(t * t)
    }

    /// `log(q(x) / Z)` for a single point, without the log floor.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.unnormalized_density(x)?.ln() - self.partition_function().ln())
    }

    pub fn negative_phase(&self) -> NegativePhase {
        let mixed: Vec<Core> = self
            .coeff
            .cores()
            .iter()
            .zip(&self.mass)
            .map(|(c, m)| c.band_mix(m))
            .collect();
        let transfer: Vec<Array2<f64>> = mixed
            .iter()
            .zip(self.coeff.cores())
            .map(|(h, g)| kron_sum(h, g).expect("band_mix preserves the mode count"))
            .collect();
        let z = trace_chain(&transfer);
        NegativePhase { mixed, transfer, z }
    }

    /// `Z = int q` over the unit cube by the mass-matrix chain.
    pub fn partition_function(&self) -> f64 {
        self.negative_phase().z
    }

    /// `Z` through the materialized Kronecker square marginalized with the
    /// flattened mass matrices. Memory grows as `K^2 R^4` per core.
    pub fn partition_function_via_squared(&self) -> Result<f64> {
        let weights: Vec<Vec<f64>> = self
            .mass
            .iter()
            .map(|m| {
                let k = m.size();
                let mut w = vec![0.0; k * k];
                for a in 0..k {
                    for b in 0..k {
                        w[a * k + b] = m.get(a, b);
                    }
                }
                w
            })
            .collect();
        let dims: Vec<usize> = (0..self.dims()).collect();
        let squared = self.coeff.kron_square();
        squared
            .marginalize(&dims, SliceWeights::Vectors(&weights))?
            .element(&vec![0; self.dims()])
    }

    /// `dZ / dG_d`.
    pub fn partition_gradient(&self) -> Gradient {
        self.negative_phase().gradient(&self.coeff)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, model has {} dimensions",
                x.len(),
                self.dims()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {v}")));
        }
        Ok(())
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.nrows() == 0 {
            return Err(Error::Empty("batch has no rows".into()));
        }
        if batch.ncols() != self.dims() {
            return Err(Error::InvalidArgument(format!(
                "batch has {} columns, model has {} dimensions",
                batch.ncols(),
                self.dims()
            )));
        }
        if let Some(v) = batch.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("batch entry {v}")));
        }
        if let Some(&v) = batch.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain { value: v });
        }
        Ok(())
    }

    /// Per-row `T(x)` for a batch.
    pub fn ring_values(&self, batch: &ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_batch(batch)?;
        let chunks: Vec<_> = batch.axis_chunks_iter(Axis(0), CHUNK_ROWS).collect();
        let values: Vec<f64> = chunks
            .into_par_iter()
            .map(|chunk| {
                chunk
                    .rows()
                    .into_iter()
                    .map(|row| self.ring_value_unchecked(&row))
                    .collect::<Vec<f64>>()
            })
            .flatten()
            .collect();
        Ok(Array1::from(values))
    }

    fn ring_value_unchecked(&self, row: &ArrayView1<f64>) -> f64 {
        let mut acc: Option<Array2<f64>> = None;
        for axis in 0..self.dims() {
            let (first, vals) = self.grids[axis]
                .eval_active(row[self.permutation[axis]])
                .expect("batch checked");
            let q = local_factor(self.coeff.core(axis), first, &vals);
            acc = Some(match acc {
                None => q,
                Some(a) => a.dot(&q),
            });
        }
        trace(&acc.expect("at least one axis").view())
    }

    /// Per-row `log(T(x_i)^2 + ε) - log Z`.
    pub fn row_log_likelihoods(&self, batch: &ArrayView2<f64>) -> Result<Vec<f64>> {
        let lz = self.partition_function().ln();
        Ok(self
            .ring_values(batch)?
            .iter()
            .map(|t| (t * t + LOG_FLOOR).ln() - lz)
            .collect())
    }

    /// `sum_i log(T(x_i)^2 + ε) - n log Z`.
    pub fn log_likelihood(&self, batch: &ArrayView2<f64>) -> Result<f64> {
        Ok(self.log_likelihood_sum(batch)?.total)
    }

    pub fn log_likelihood_sum(&self, batch: &ArrayView2<f64>) -> Result<LikelihoodSum> {
        let z = self.partition_function();
        self.log_likelihood_with_z(batch, z)
    }

    pub(crate) fn log_likelihood_with_z(&self, batch: &ArrayView2<f64>, z: f64) -> Result<LikelihoodSum> {
        let t = self.ring_values(batch)?;
        let mut total = 0.0;
        let mut floor_hits = 0;
        for &v in &t {
            let q = v * v;
            if q < LOG_FLOOR {
                floor_hits += 1;
            }
            total += (q + LOG_FLOOR).ln();
        }
        let rows = t.len();
        Ok(LikelihoodSum {
            total: total - rows as f64 * z.ln(),
            rows,
            floor_hits,
        })
    }

    /// Gradient of [`TrdeModel::log_likelihood`] with respect to every core.
    pub fn grad_log_likelihood(&self, batch: &ArrayView2<f64>) -> Result<(LikelihoodSum, Gradient)> {
        let neg = self.negative_phase();
        self.grad_log_likelihood_with(batch, &neg)
    }

    /// As [`TrdeModel::grad_log_likelihood`] with a precomputed negative phase.
    pub fn grad_log_likelihood_with(
        &self,
        batch: &ArrayView2<f64>,
        neg: &NegativePhase,
    ) -> Result<(LikelihoodSum, Gradient)> {
        let (positive, mut grad) = self.positive_phase(batch, 1.0)?;
        let n = positive.rows as f64;
        grad.add_scaled(-n / neg.z, &neg.gradient(&self.coeff));
        let sum = LikelihoodSum {
            total: positive.total - n * neg.z.ln(),
            ..positive
        };
        Ok((sum, grad))
    }

    /// `sum_i log(T_i^2 + ε)` and `row_weight * sum_i d/dG log(T_i^2 + ε)`.
    pub(crate) fn positive_phase(
        &self,
        batch: &ArrayView2<f64>,
        row_weight: f64,
    ) -> Result<(LikelihoodSum, Gradient)> {
        self.check_batch(batch)?;
        self.positive_phase_weighted(batch, |_, t| row_weight * 2.0 * t / (t * t + LOG_FLOOR))
    }

    /// Accumulates `sum_i w(i, T_i) dT_i/dG` with deterministic chunked reduction,
    /// together with `sum_i log(T_i^2 + ε)`.
    pub(crate) fn positive_phase_weighted<W>(
        &self,
        batch: &ArrayView2<f64>,
        weight: W,
    ) -> Result<(LikelihoodSum, Gradient)>
    where
        W: Fn(usize, f64) -> f64 + Sync,
    {
        let chunks: Vec<_> = batch.axis_chunks_iter(Axis(0), CHUNK_ROWS).collect();
        let partials: Vec<(Gradient, f64, usize)> = chunks
            .into_par_iter()
            .enumerate()
            .map(|(c, chunk)| {
                let mut grad = Gradient::zeros_like(&self.coeff);
                let mut ll = 0.0;
                let mut hits = 0;
                for (r, row) in chunk.rows().into_iter().enumerate() {
                    let t = self.accumulate_ring_gradient(&row, &mut grad, |t| weight(c * CHUNK_ROWS + r, t));
                    let q = t * t;
                    if q < LOG_FLOOR {
                        hits += 1;
                    }
                    ll += (q + LOG_FLOOR).ln();
                }
                (grad, ll, hits)
            })
            .collect();
        let mut grad = Gradient::zeros_like(&self.coeff);
        let mut ll = 0.0;
        let mut floor_hits = 0;
        for (g, l, h) in &partials {
            grad.add_scaled(1.0, g);
            ll += l;
            floor_hits += h;
        }
        let sum = LikelihoodSum {
            total: ll,
            rows: batch.nrows(),
            floor_hits,
        };
        Ok((sum, grad))
    }

    /// Adds `w(T) * dT/dG` for one row into `grad` and returns `T`.
    fn accumulate_ring_gradient<F: FnOnce(f64) -> f64>(&self, row: &ArrayView1<f64>, grad: &mut Gradient, w: F) -> f64 {
        let d = self.dims();
        let mut firsts = Vec::with_capacity(d);
        let mut values = Vec::with_capacity(d);
        let mut factors = Vec::with_capacity(d);
        for axis in 0..d {
            let (first, vals) = self.grids[axis]
                .eval_active(row[self.permutation[axis]])
                .expect("batch checked");
            factors.push(local_factor(self.coeff.core(axis), first, &vals));
            firsts.push(first);
            values.push(vals);
        }
        let cyclic = cyclic_complements(&factors);
        // T = Tr(Q_d C_d) for any d
        let t = trace(&factors[0].dot(&cyclic[0]).view());
        let scale = w(t);
        if scale == 0.0 {
            return t;
        }
        for axis in 0..d {
            let ct = cyclic[axis].t();
            for (r, &v) in values[axis].iter().enumerate() {
                if v != 0.0 {
                    grad.cores[axis]
                        .index_axis_mut(Axis(0), firsts[axis] + r)
                        .scaled_add(scale * v, &ct);
                }
            }
        }
        t
    }

    /// Paired transfer matrix of model axis `axis` for the role its data
    /// dimension plays in `query`.
    fn query_transfer(&self, axis: usize, query: &DensityQuery) -> Result<Array2<f64>> {
        let dim = self.permutation[axis];
        let core = self.coeff.core(axis);
        if let Some(&v) = query.fixed.get(&dim) {
            let q = self.phi_factor(axis, v)?;
            Ok(kron(&q.view(), &q.view()))
        } else if let Some(&c) = query.upper_limits.get(&dim) {
            let w = self.grids[axis].pair_integral_to(c)?;
            Ok(paired_transfer(core, &w))
        } else {
            Ok(paired_transfer(core, &self.mass[axis]))
        }
    }

    /// Paired transfer matrix of model axis `axis` integrated over `[0, upper]`.
    pub fn cumulative_transfer(&self, axis: usize, upper: f64) -> Result<Array2<f64>> {
        let w = self.grids[axis].pair_integral_to(upper)?;
        Ok(paired_transfer(self.coeff.core(axis), &w))
    }

    /// Unnormalized marginal: `q` integrated over the marginalized dimensions
    /// and up to each upper limit, evaluated at the fixed values.
    pub fn marginal_density(&self, query: &DensityQuery) -> Result<f64> {
        query.validate(self.dims())?;
        let transfer = (0..self.dims())
            .map(|axis| self.query_transfer(axis, query))
            .collect::<Result<Vec<_>>>()?;
        Ok(trace_chain(&transfer))
    }

    /// [`TrdeModel::marginal_density`] divided by `Z`.
    pub fn normalized_marginal(&self, query: &DensityQuery) -> Result<f64> {
        Ok(self.marginal_density(query)? / self.partition_function())
    }

    /// Density (or cumulative value) of `query` conditioned on the fixed
    /// values of the dimensions in `given`, which must all be fixed in `query`.
    pub fn conditional_density(&self, query: &DensityQuery, given: &[usize]) -> Result<f64> {
        query.validate(self.dims())?;
        for g in given {
            if !query.fixed.contains_key(g) {
                return Err(Error::InconsistentQuery(format!(
                    "conditioning dimension {g} has no fixed value"
                )));
            }
        }
        let mut evidence = DensityQuery::new();
        for j in 0..self.dims() {
            match query.fixed.get(&j) {
                Some(&v) if given.contains(&j) => evidence.fixed.insert(j, v),
                _ => {
                    evidence.marginalized.insert(j);
                    None
                }
            };
        }
        let denominator = self.marginal_density(&evidence)?;
        if denominator <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(self.marginal_density(query)? / denominator)
    }

    /// The same density with the ring rotated left by `shift` axes.
    pub fn rotated(&self, shift: usize) -> Result<TrdeModel> {
        let d = self.dims();
        let coeff = self.coeff.rotate_left(shift);
        let perm = (0..d).map(|i| self.permutation[(i + shift) % d]).collect();
        TrdeModel::new(coeff, perm)
    }
}

/// Factor `s` such that multiplying every core by `s` moves `Z` to `target`.
pub fn gauge_factor(z: f64, target: f64, dims: usize) -> f64 {
    (target / z).powf(1.0 / (2.0 * dims as f64))
}

pub(crate) fn local_factor(core: &Core, first: usize, vals: &[f64; 3]) -> Array2<f64> {
    let mut q = core.slice(first).to_owned();
    q.mapv_inplace(|v| v * vals[0]);
    q.scaled_add(vals[1], &core.slice(first + 1));
    q.scaled_add(vals[2], &core.slice(first + 2));
    q
}

pub(crate) fn trace_chain(mats: &[Array2<f64>]) -> f64 {
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc = acc.dot(m);
    }
    trace(&acc.view())
}
