//! Tensor-ring containers and contraction kernels.
//!
//! A tensor ring of order `D` stores one order-3 core per mode. Core `d`
//! has shape `(R_d, I_d, R_{d+1})` with `R_D = R_0`, and an element is the
//! trace of the product of the selected lateral slices.
//!
//! Cores are stored mode-major, `(I_d, R_d, R_{d+1})`, so that every lateral
//! slice `G_d(:, i, :)` is a contiguous row-major matrix.

use ndarray::{Array2, Array3, ArrayD, ArrayView2, ArrayViewMut2, Axis, IxDyn};
use rand::Rng;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::linalg::{interleave_pairs, kron, trace};

/// Upper bound on the number of entries [`TrCores::to_dense`] will produce.
pub const DENSE_LIMIT: usize = 1_000_000;

/// One order-3 core with lateral slices stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    data: Array3<f64>,
}

impl Core {
    pub fn zeros(left: usize, modes: usize, right: usize) -> Self {
        Core {
            data: Array3::zeros((modes, left, right)),
        }
    }

    /// Wraps an array laid out as `(mode, left, right)`.
    pub fn from_slices(data: Array3<f64>) -> Self {
        Core {
            data: data.as_standard_layout().into_owned(),
        }
    }

    /// Builds a core from the conventional `(left, mode, right)` layout.
    pub fn from_canonical(canonical: Array3<f64>) -> Self {
        Core::from_slices(canonical.permuted_axes([1, 0, 2]))
    }

    /// The core in the conventional `(left, mode, right)` layout.
    pub fn to_canonical(&self) -> Array3<f64> {
        self.data
            .view()
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned()
    }

    pub fn random<R: Rng + ?Sized>(left: usize, modes: usize, right: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let data = Array3::from_shape_simple_fn((modes, left, right), || rng.random_range(lo..hi));
        Core { data }
    }

    pub fn left(&self) -> usize {
        self.data.dim().1
    }

    pub fn modes(&self) -> usize {
        self.data.dim().0
    }

    pub fn right(&self) -> usize {
        self.data.dim().2
    }

    pub fn slice(&self, i: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), i)
    }

    pub fn slice_mut(&mut self, i: usize) -> ArrayViewMut2<'_, f64> {
        self.data.index_axis_mut(Axis(0), i)
    }

    /// Storage view, `(mode, left, right)`.
    pub fn slices(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn slices_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    /// Storage viewed as a `modes x (left * right)` matrix.
    pub fn as_matrix(&self) -> ArrayView2<'_, f64> {
        let (m, l, r) = self.data.dim();
        self.data
            .view()
            .into_shape_with_order((m, l * r))
            .expect("cores are kept in standard layout")
    }

    /// `sum_i w_i G(:, i, :)`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Array2<f64> {
        let mut acc = Array2::zeros((self.left(), self.right()));
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                acc.scaled_add(w, &self.slice(i));
            }
        }
        acc
    }

    /// New core with slices `H_k = sum_l W[k, l] G_l` for a banded symmetric `W`.
    pub fn band_mix(&self, weights: &BandMatrix) -> Core {
        let mut out = Core::zeros(self.left(), self.modes(), self.right());
        for (k, l, w) in weights.upper_entries() {
            if w == 0.0 {
                continue;
            }
            out.slice_mut(k).scaled_add(w, &self.slice(l));
            if k != l {
                out.slice_mut(l).scaled_add(w, &self.slice(k));
            }
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.mapv_inplace(|v| v * factor);
    }
}

/// `sum_i A(:, i, :) ⊗ B(:, i, :)`, the transfer matrix of the ring pair
/// `(A, B)` with merged row index `(a, b)` and column index `(a', b')`.
pub fn kron_sum(a: &Core, b: &Core) -> Result<Array2<f64>> {
    if a.modes() != b.modes() {
        return Err(Error::ModeMismatch(format!(
            "cores have {} and {} lateral slices",
            a.modes(),
            b.modes()
        )));
    }
    // F[(a, l), (b, r)] = sum_i A_i[a, l] B_i[b, r]
    let f = a.as_matrix().t().dot(&b.as_matrix());
    Ok(interleave_pairs(f, a.left(), a.right(), b.left(), b.right()))
}

/// Per-dimension weights for [`TrCores::marginalize`].
#[derive(Debug, Clone, Copy)]
pub enum SliceWeights<'a> {
    /// Plain summation over lateral slices.
    Sum,
    /// `weights[d]` is used for dimension `d`.
    Vectors(&'a [Vec<f64>]),
}

/// A tensor in tensor-ring format.
#[derive(Debug, Clone, PartialEq)]
pub struct TrCores {
    cores: Vec<Core>,
}

impl TrCores {
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidRing("a ring needs at least one core".into()));
        }
        for (d, core) in cores.iter().enumerate() {
            if core.left() == 0 || core.right() == 0 || core.modes() == 0 {
                return Err(Error::InvalidRing(format!("core {d} has an empty axis")));
            }
            let next = &cores[(d + 1) % cores.len()];
            if core.right() != next.left() {
                return Err(Error::InvalidRing(format!(
                    "core {d} right rank {} does not match core {} left rank {}",
                    core.right(),
                    (d + 1) % cores.len(),
                    next.left()
                )));
            }
        }
        Ok(TrCores { cores })
    }

    /// Random cores with entries uniform in `[lo, hi)`. `ranks` has length
    /// `D` (ring closure is implied).
    pub fn random<R: Rng + ?Sized>(ranks: &[usize], modes: &[usize], lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        if ranks.len() != modes.len() {
            return Err(Error::InvalidRing("ranks and modes differ in length".into()));
        }
        let d = ranks.len();
        let cores = (0..d)
            .map(|i| Core::random(ranks[i], modes[i], ranks[(i + 1) % d], lo, hi, rng))
            .collect();
        TrCores::new(cores)
    }

    /// Every slice of every core set to the all-ones matrix.
    pub fn ones(ranks: &[usize], modes: &[usize]) -> Result<Self> {
        let d = ranks.len();
        let cores = (0..d)
            .map(|i| {
                let mut c = Core::zeros(ranks[i], modes[i], ranks[(i + 1) % d]);
                c.slices_mut().fill(1.0);
                c
            })
            .collect();
        TrCores::new(cores)
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, d: usize) -> &Core {
        &self.cores[d]
    }

    pub(crate) fn cores_mut(&mut self) -> &mut [Core] {
        &mut self.cores
    }

    /// `(R_0, ..., R_D)` with `R_D = R_0`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(Core::left).collect();
        r.push(self.cores[0].left());
        r
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(Core::modes).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.cores.iter().map(|c| c.slices().len()).sum()
    }

    /// `Trace(G_1(:, i_1, :) ... G_D(:, i_D, :))`.
    pub fn element(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.order() {
            return Err(Error::InvalidArgument(format!(
                "index has {} entries for an order-{} tensor",
                index.len(),
                self.order()
            )));
        }
        for (d, (&i, core)) in index.iter().zip(&self.cores).enumerate() {
            if i >= core.modes() {
                return Err(Error::IndexOutOfBounds {
                    mode: d,
                    index: i,
                    size: core.modes(),
                });
            }
        }
        let mut acc = self.cores[0].slice(index[0]).to_owned();
        for (core, &i) in self.cores.iter().zip(index).skip(1) {
            acc = acc.dot(&core.slice(i));
        }
        Ok(trace(&acc.view()))
    }

    /// Inner product of the represented tensors, contracting core pairs
    /// left to right with the rank indices of both rings merged.
    pub fn inner_product(&self, other: &TrCores) -> Result<f64> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::ModeMismatch(format!(
                "mode sizes {:?} and {:?}",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        let mut res = kron_sum(&self.cores[0], &other.cores[0])?;
        for (a, b) in self.cores.iter().zip(&other.cores).skip(1) {
            res = res.dot(&kron_sum(a, b)?);
        }
        Ok(trace(&res.view()))
    }

    /// Replaces every core in `dims` by a weighted sum of its lateral slices
    /// (a core with a single slice). Other cores are copied unchanged.
    pub fn marginalize(&self, dims: &[usize], weights: SliceWeights<'_>) -> Result<TrCores> {
        let mut cores = self.cores.clone();
        for &d in dims {
            if d >= self.order() {
                return Err(Error::InvalidArgument(format!("dimension {d} out of range")));
            }
            let core = &self.cores[d];
            let summed = match weights {
                SliceWeights::Sum => core.weighted_sum(&vec![1.0; core.modes()]),
                SliceWeights::Vectors(w) => {
                    let w = w.get(d).ok_or(Error::WeightLength {
                        dim: d,
                        got: 0,
                        expected: core.modes(),
                    })?;
                    if w.len() != core.modes() {
                        return Err(Error::WeightLength {
                            dim: d,
                            got: w.len(),
                            expected: core.modes(),
                        });
                    }
                    core.weighted_sum(w)
                }
            };
            cores[d] = Core::from_slices(summed.insert_axis(Axis(0)));
        }
        TrCores::new(cores)
    }

    /// The ring of ranks `R_d^2` whose slice `(k, l)` (flattened `k * I_d + l`)
    /// is `G_d(:, k, :) ⊗ G_d(:, l, :)`; its elements are products of pairs
    /// of elements of `self`.
    pub fn kron_square(&self) -> TrCores {
        let cores = self
            .cores
            .iter()
            .map(|c| {
                let (m, l, r) = (c.modes(), c.left(), c.right());
                let mut out = Core::zeros(l * l, m * m, r * r);
                for k in 0..m {
                    for q in 0..m {
                        out.slice_mut(k * m + q).assign(&kron(&c.slice(k), &c.slice(q)));
                    }
                }
                out
            })
            .collect();
        TrCores { cores }
    }

    /// Dense reconstruction; refused above [`DENSE_LIMIT`] entries.
    pub fn to_dense(&self) -> Result<ArrayD<f64>> {
        let shape = self.mode_sizes();
        let size = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        let size = match size {
            Some(s) if s <= DENSE_LIMIT => s,
            other => {
                return Err(Error::SizeBound {
                    size: other.unwrap_or(usize::MAX),
                    limit: DENSE_LIMIT,
                })
            }
        };
        let mut values = Vec::with_capacity(size);
        let mut index = vec![0usize; shape.len()];
        for _ in 0..size {
            values.push(self.element(&index)?);
            for d in (0..shape.len()).rev() {
                index[d] += 1;
                if index[d] < shape[d] {
                    break;
                }
                index[d] = 0;
            }
        }
        Ok(ArrayD::from_shape_vec(IxDyn(&shape), values).expect("size computed from shape"))
    }

    /// The ring with its core list rotated left by `shift`.
    pub fn rotate_left(&self, shift: usize) -> TrCores {
        let mut cores = self.cores.clone();
        cores.rotate_left(shift % self.order());
        TrCores { cores }
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.cores {
            c.scale(factor);
        }
    }
}
