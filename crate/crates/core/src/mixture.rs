//! Mixtures of density components over distinct circular orderings.
//!
//! A ring has no start and no direction, so two axis orderings describe the
//! same family of densities when they differ by a rotation or a reflection.
//! There are `(D - 1)! / 2` such classes for `D >= 3`.
//!
//! The mixture density is `sum_m q_m(x) / sum_m Z_m`; the weight of a
//! component is its share of the total mass, `σ_m = Z_m / sum Z`.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{gauge_factor, validate_permutation, DensityQuery, Gradient, LikelihoodSum, NegativePhase, TrdeModel, LOG_FLOOR};
use crate::sampler::{build_plan, sample_one, sample_rng, SamplePlan};

/// Class counts up to this size are enumerated exhaustively.
const ENUMERATION_LIMIT: usize = 1_000_000;

/// Lexicographically smallest of the `2D` rotations and reflections of `perm`.
pub fn canonical_circular(perm: &[usize]) -> Vec<usize> {
    let d = perm.len();
    let mut best = perm.to_vec();
    let mut reversed = perm.to_vec();
    reversed.reverse();
    for base in [perm.to_vec(), reversed] {
        for s in 0..d {
            let cand: Vec<usize> = (0..d).map(|i| base[(i + s) % d]).collect();
            if cand < best {
                best = cand;
            }
        }
    }
    best
}

/// `max(1, (D - 1)! / 2)`, saturating at `usize::MAX`.
pub fn circular_count(d: usize) -> usize {
    if d < 3 {
        return 1;
    }
    let mut f: usize = 1;
    for i in 2..d {
        f = match f.checked_mul(i) {
            Some(v) => v,
            None => return usize::MAX,
        };
    }
    (f / 2).max(1)
}

/// Canonical circular permutations of `0..D`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationSet {
    pub perms: Vec<Vec<usize>>,
    /// Number of distinct classes for this `D`.
    pub classes: usize,
}

impl PermutationSet {
    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }
}

/// All canonical classes in lexicographic order.
fn all_canonical(d: usize) -> Vec<Vec<usize>> {
    if d < 3 {
        return vec![(0..d).collect()];
    }
    let mut out = Vec::new();
    let mut rest: Vec<usize> = (1..d).collect();
    // lexicographic permutations of 1..D behind a leading 0
    loop {
        if rest[0] < rest[d - 2] {
            let mut p = vec![0];
            p.extend_from_slice(&rest);
            out.push(p);
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    out
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every class when there are at most `limit` of them; otherwise the
/// identity ordering plus `limit - 1` further classes drawn uniformly
/// without replacement under `seed`.
pub fn enumerate_circular(d: usize, limit: Option<usize>, seed: u64) -> Result<PermutationSet> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 dimensions, got {d}")));
    }
    let classes = circular_count(d);
    let limit = limit.unwrap_or(usize::MAX);
    if limit == 0 {
        return Err(Error::InvalidArgument("permutation limit must be at least 1".into()));
    }
    if classes <= limit {
        if classes > ENUMERATION_LIMIT {
            return Err(Error::SizeBound {
                size: classes,
                limit: ENUMERATION_LIMIT,
            });
        }
        return Ok(PermutationSet {
            perms: all_canonical(d),
            classes,
        });
    }
    let identity: Vec<usize> = (0..d).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perms = vec![identity.clone()];
    if classes <= ENUMERATION_LIMIT {
        let pool: Vec<Vec<usize>> = all_canonical(d).into_iter().filter(|p| p != &identity).collect();
        for i in index::sample(&mut rng, pool.len(), limit - 1) {
            perms.push(pool[i].clone());
        }
    } else {
        let mut seen = BTreeSet::from([identity]);
        let mut base: Vec<usize> = (0..d).collect();
        while perms.len() < limit {
            base.shuffle(&mut rng);
            let c = canonical_circular(&base);
            if seen.insert(c.clone()) {
                perms.push(c);
            }
        }
    }
    Ok(PermutationSet { perms, classes })
}

/// Gradients for every component.
pub type MixtureGradient = Vec<Gradient>;

/// A mixture of squared tensor-ring components.
#[derive(Debug, Clone)]
pub struct TermModel {
    components: Vec<TrdeModel>,
}

impl TermModel {
    pub fn new(components: Vec<TrdeModel>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("a mixture needs at least one component".into()))?;
        let modes = first.coeff().mode_sizes();
        for (m, c) in components.iter().enumerate() {
            if c.coeff().mode_sizes() != modes {
                return Err(Error::ModeMismatch(format!(
                    "component {m} has mode sizes {:?}, component 0 has {modes:?}",
                    c.coeff().mode_sizes()
                )));
            }
            validate_permutation(c.permutation(), modes.len())?;
        }
        Ok(TermModel { components })
    }

    /// One component per permutation, each initialized independently.
    pub fn initialize<R: Rng + ?Sized>(
        dims: usize,
        k_basis: usize,
        rank: usize,
        perms: &PermutationSet,
        rng: &mut R,
    ) -> Result<Self> {
        let components = perms
            .perms
            .iter()
            .map(|p| TrdeModel::initialize(dims, k_basis, rank, p.clone(), rng))
            .collect::<Result<Vec<_>>>()?;
        TermModel::new(components)
    }

    pub fn single(model: TrdeModel) -> Self {
        TermModel {
            components: vec![model],
        }
    }

    pub fn components(&self) -> &[TrdeModel] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [TrdeModel] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<TrdeModel> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.components[0].dims()
    }

    pub fn parameter_count(&self) -> usize {
        self.components.iter().map(TrdeModel::parameter_count).sum()
    }

    /// Sum of the components' versions; changes whenever any component does.
    pub fn version(&self) -> u64 {
        self.components.iter().fold(0u64, |acc, c| acc.wrapping_add(c.version()))
    }

    pub fn unnormalized_density(&self, x: &[f64]) -> Result<f64> {
        self.components
            .iter()
            .map(|c| c.unnormalized_density(x))
            .sum()
    }

    pub fn partition_functions(&self) -> Vec<f64> {
        self.components.par_iter().map(TrdeModel::partition_function).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.partition_functions().iter().sum()
    }

    /// `σ_m = Z_m / sum Z`.
    pub fn sigma_weights(&self) -> Result<Vec<f64>> {
        sigma_from(&self.partition_functions())
    }

    fn negative_phases(&self) -> Vec<NegativePhase> {
        self.components.par_iter().map(TrdeModel::negative_phase).collect()
    }

    pub fn log_likelihood(&self, batch: &ArrayView2<f64>) -> Result<f64> {
        Ok(self.log_likelihood_sum(batch)?.total)
    }

    /// Per-row `log(sum_m q_m(x_i) + ε) - log sum_m Z_m`.
    pub fn row_log_likelihoods(&self, batch: &ArrayView2<f64>) -> Result<Vec<f64>> {
        let lz = self.total_mass().ln();
        Ok(self
            .row_mass(batch)?
            .iter()
            .map(|q| (q + LOG_FLOOR).ln() - lz)
            .collect())
    }

    /// `sum_i log(sum_m q_m(x_i) + ε) - n log sum_m Z_m`.
    pub fn log_likelihood_sum(&self, batch: &ArrayView2<f64>) -> Result<LikelihoodSum> {
        let total = self.total_mass();
        let q = self.row_mass(batch)?;
        let mut ll = 0.0;
        let mut floor_hits = 0;
        for &v in &q {
            if v < LOG_FLOOR {
                floor_hits += 1;
            }
            ll += (v + LOG_FLOOR).ln();
        }
        Ok(LikelihoodSum {
            total: ll - q.len() as f64 * total.ln(),
            rows: q.len(),
            floor_hits,
        })
    }

    /// Per-row `sum_m T_m(x)^2`.
    fn row_mass(&self, batch: &ArrayView2<f64>) -> Result<Vec<f64>> {
        let mut q = vec![0.0; batch.nrows()];
        for c in &self.components {
            for (acc, t) in q.iter_mut().zip(c.ring_values(batch)?) {
                *acc += t * t;
            }
        }
        Ok(q)
    }

    pub fn grad_log_likelihood(&self, batch: &ArrayView2<f64>) -> Result<(LikelihoodSum, MixtureGradient)> {
        let negs = self.negative_phases();
        self.grad_log_likelihood_with(batch, &negs)
    }

    /// As [`TermModel::grad_log_likelihood`] with precomputed negative phases.
    pub fn grad_log_likelihood_with(
        &self,
        batch: &ArrayView2<f64>,
        negs: &[NegativePhase],
    ) -> Result<(LikelihoodSum, MixtureGradient)> {
        if let ([c], [neg]) = (self.components.as_slice(), negs) {
            let (sum, g) = c.grad_log_likelihood_with(batch, neg)?;
            return Ok((sum, vec![g]));
        }
        let q = self.row_mass(batch)?;
        let total: f64 = negs.iter().map(|n| n.z).sum();
        let n = q.len() as f64;
        let mut grads = Vec::with_capacity(self.len());
        for (c, neg) in self.components.iter().zip(negs) {
            let (_, mut g) = c.positive_phase_weighted(batch, |i, t| 2.0 * t / (q[i] + LOG_FLOOR))?;
            g.add_scaled(-n / total, &neg.gradient(c.coeff()));
            grads.push(g);
        }
        let mut ll = 0.0;
        let mut floor_hits = 0;
        for &v in &q {
            if v < LOG_FLOOR {
                floor_hits += 1;
            }
            ll += (v + LOG_FLOOR).ln();
        }
        let sum = LikelihoodSum {
            total: ll - n * total.ln(),
            rows: q.len(),
            floor_hits,
        };
        Ok((sum, grads))
    }

    /// Multiplies every core of every component by one common factor so that
    /// `sum Z_m` becomes `M`; returns the previous total.
    pub fn rescale_joint(&mut self) -> f64 {
        let total = self.total_mass();
        self.rescale_joint_from(total);
        total
    }

    pub(crate) fn rescale_joint_from(&mut self, total: f64) -> f64 {
        let s = gauge_factor(total, self.len() as f64, self.dims());
        if total > 0.0 && total.is_finite() {
            for c in &mut self.components {
                c.scale_cores(s);
            }
        }
        s
    }

    pub fn marginal_density(&self, query: &DensityQuery) -> Result<f64> {
        self.components.iter().map(|c| c.marginal_density(query)).sum()
    }

    pub fn normalized_marginal(&self, query: &DensityQuery) -> Result<f64> {
        Ok(self.marginal_density(query)? / self.total_mass())
    }

    /// Conditional analogue of [`TrdeModel::conditional_density`].
    pub fn conditional_density(&self, query: &DensityQuery, given: &[usize]) -> Result<f64> {
        query.validate(self.dims())?;
        let mut evidence = DensityQuery::new();
        for j in 0..self.dims() {
            match query.fixed.get(&j) {
                Some(&v) if given.contains(&j) => {
                    evidence.fixed.insert(j, v);
                }
                _ if given.contains(&j) => {
                    return Err(Error::InconsistentQuery(format!(
                        "conditioning dimension {j} has no fixed value"
                    )))
                }
                _ => {
                    evidence.marginalized.insert(j);
                }
            }
        }
        let denominator = self.marginal_density(&evidence)?;
        if denominator <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(self.marginal_density(query)? / denominator)
    }
}

fn sigma_from(z: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = z.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroMass);
    }
    Ok(z.iter().map(|v| v / total).collect())
}

/// Sample plans of every component plus the mixture weights.
#[derive(Debug, Clone)]
pub struct MixturePlan {
    pub plans: Vec<SamplePlan>,
    pub sigma: Vec<f64>,
}

pub fn build_mixture_plan(term: &TermModel) -> Result<MixturePlan> {
    let plans: Vec<SamplePlan> = term.components.iter().map(build_plan).collect();
    let sigma = term.sigma_weights()?;
    Ok(MixturePlan { plans, sigma })
}

/// `n` mixture samples in data order. Row `i` draws its component from the
/// first value of stream `i` and its coordinates from the following ones.
pub fn mixture_sample(term: &TermModel, n: usize, seed: u64) -> Result<Array2<f64>> {
    let plan = build_mixture_plan(term)?;
    mixture_sample_with(term, &plan, n, seed)
}

pub fn mixture_sample_with(term: &TermModel, plan: &MixturePlan, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let d = term.dims();
    let mut cumulative = Vec::with_capacity(plan.sigma.len());
    let mut acc = 0.0;
    for s in &plan.sigma {
        acc += s;
        cumulative.push(acc);
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let pick: f64 = rng.random::<f64>() * acc;
            let m = cumulative
                .partition_point(|&c| c <= pick)
                .min(term.len() - 1);
            let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            sample_one(&term.components[m], &plan.plans[m], &u)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, d), flat).expect("n rows of D coordinates"))
}
