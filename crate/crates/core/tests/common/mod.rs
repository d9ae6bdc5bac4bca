//! Brute-force oracles shared by the oracle tests and the acceptance harness.
//! Nothing here calls the library's contraction, quadrature or gradient code:
//! basis functions, dense reconstructions and integrals are recomputed from
//! scratch.
#![allow(dead_code)]

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trde::stats::{chi_square_test, grid_cell_probabilities, ks_statistic, ChiSquareTest};
use trde::{enumerate_circular, DensityQuery, SliceWeights, TermModel, TrCores, TrdeModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform quadratic B-spline basis `f_k`, written out piecewise.
/// Basis `k` is the cardinal spline shifted to start at `(k - 2) h`.
pub fn basis(k_basis: usize, x: f64) -> Vec<f64> {
    let h = 1.0 / (k_basis - 2) as f64;
    (0..k_basis)
        .map(|k| {
            let t = x / h - (k as f64 - 2.0);
            // half-open pieces also give the right values at x = 0 and x = 1
            if (0.0..1.0).contains(&t) {
                0.5 * t * t
            } else if (1.0..2.0).contains(&t) {
                0.5 * (-2.0 * t * t + 6.0 * t - 3.0)
            } else if (2.0..3.0).contains(&t) {
                0.5 * (3.0 - t) * (3.0 - t)
            } else {
                0.0
            }
        })
        .collect()
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Composite 4-point Gauss–Legendre rule on `[lo, hi]` split at the knots of
/// a `k_basis` grid (exact for piecewise polynomials of degree 7).
pub fn gauss_rule(k_basis: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let h = 1.0 / (k_basis - 2) as f64;
    let mut breaks = vec![lo];
    let mut j = 1;
    while (j as f64) * h < hi - 1e-15 {
        let t = j as f64 * h;
        if t > lo + 1e-15 {
            breaks.push(t);
        }
        j += 1;
    }
    breaks.push(hi);
    let mut rule = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        for &(node, weight) in &GAUSS4 {
            rule.push((a + half * (node + 1.0), half * weight));
        }
    }
    rule
}

/// A dense tensor in row-major order.
#[derive(Debug, Clone)]
pub struct Dense {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Dense {
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for d in (0..self.shape.len()).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Cores in `(left, mode, right)` layout.
pub fn canonical(cores: &TrCores) -> Vec<Array3<f64>> {
    cores.cores().iter().map(|c| c.to_canonical()).collect()
}

/// One element as the trace of explicit slice products.
pub fn ring_entry(canon: &[Array3<f64>], idx: &[usize]) -> f64 {
    let r0 = canon[0].dim().0;
    let mut m = vec![0.0; r0 * r0];
    for i in 0..r0 {
        m[i * r0 + i] = 1.0;
    }
    let mut cols = r0;
    for (core, &i) in canon.iter().zip(idx) {
        let (_, _, right) = core.dim();
        let mut next = vec![0.0; r0 * right];
        for a in 0..r0 {
            for b in 0..cols {
                let v = m[a * cols + b];
                if v == 0.0 {
                    continue;
                }
                for c in 0..right {
                    next[a * right + c] += v * core[[b, i, c]];
                }
            }
        }
        m = next;
        cols = right;
    }
    (0..r0).map(|i| m[i * cols + i]).sum()
}

pub fn dense(cores: &TrCores) -> Dense {
    let canon = canonical(cores);
    let shape: Vec<usize> = canon.iter().map(|c| c.dim().1).collect();
    let size: usize = shape.iter().product();
    let mut out = Dense {
        shape,
        values: Vec::with_capacity(size),
    };
    for flat in 0..size {
        let idx = out.unflatten(flat);
        out.values.push(ring_entry(&canon, &idx));
    }
    out
}

pub fn dense_dot(a: &Dense, b: &Dense) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum()
}

/// Contracts every mode with `Some(w)` against `w`, keeping it as size 1.
pub fn dense_marginal(t: &Dense, weights: &[Option<Vec<f64>>]) -> Dense {
    let shape: Vec<usize> = t
        .shape
        .iter()
        .zip(weights)
        .map(|(&s, w)| if w.is_some() { 1 } else { s })
        .collect();
    let mut out = Dense {
        values: vec![0.0; shape.iter().product()],
        shape,
    };
    for (flat, &v) in t.values.iter().enumerate() {
        let idx = t.unflatten(flat);
        let mut factor = 1.0;
        let mut target = idx.clone();
        for (d, w) in weights.iter().enumerate() {
            if let Some(w) = w {
                factor *= w[idx[d]];
                target[d] = 0;
            }
        }
        let o = out.flatten(&target);
        out.values[o] += factor * v;
    }
    out
}

pub fn random_ring<R: Rng>(rng: &mut R, modes: &[usize], max_rank: usize) -> TrCores {
    let ranks: Vec<usize> = modes.iter().map(|_| rng.random_range(1..=max_rank)).collect();
    TrCores::random(&ranks, modes, -1.0, 1.0, rng).expect("valid ring")
}

/// Largest errors seen over a batch of random contraction instances.
#[derive(Debug, Default, Clone, Copy)]
pub struct ContractionErrors {
    pub inner: f64,
    pub marginal: f64,
    pub kron: f64,
}

/// Random rings with `D <= 5`, mode sizes `<= 4` and ranks `<= 3` checked
/// against dense reconstruction: inner product, marginalization with random
/// dimension sets and weights, and the paired-element identity of the
/// Kronecker square.
pub fn contraction_oracles(cases: usize, seed: u64) -> ContractionErrors {
    let mut rng = rng(seed);
    let mut worst = ContractionErrors::default();
    for _ in 0..cases {
        let d = rng.random_range(1..=5);
        let modes: Vec<usize> = (0..d).map(|_| rng.random_range(1..=4)).collect();
        let a = random_ring(&mut rng, &modes, 3);
        let b = random_ring(&mut rng, &modes, 3);
        let (da, db) = (dense(&a), dense(&b));

        let exact = dense_dot(&da, &db);
        let got = a.inner_product(&b).expect("matching modes");
        worst.inner = worst.inner.max((got - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));

        let mut dims = Vec::new();
        let mut vectors = Vec::new();
        let plain = rng.random_bool(0.3);
        for (axis, &m) in modes.iter().enumerate() {
            let w: Vec<f64> = if plain {
                vec![1.0; m]
            } else {
                (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            if rng.random_bool(0.5) {
                dims.push(axis);
            }
            vectors.push(w);
        }
        let weights = if plain { SliceWeights::Sum } else { SliceWeights::Vectors(&vectors) };
        let marg = a.marginalize(&dims, weights).expect("valid marginal");
        let oracle_weights: Vec<Option<Vec<f64>>> = (0..d)
            .map(|axis| dims.contains(&axis).then(|| vectors[axis].clone()))
            .collect();
        let expected = dense_marginal(&da, &oracle_weights);
        let got = dense(&marg);
        let scale = expected.max_abs().max(f64::MIN_POSITIVE);
        for (g, e) in got.values.iter().zip(&expected.values) {
            worst.marginal = worst.marginal.max((g - e).abs() / scale);
        }

        let sq = canonical(&a.kron_square());
        let pairs: usize = modes.iter().map(|m| m * m).product();
        let scale = (da.max_abs() * da.max_abs()).max(f64::MIN_POSITIVE);
        let mut check = |k: &[usize], l: &[usize]| {
            let paired: Vec<usize> = (0..d).map(|i| k[i] * modes[i] + l[i]).collect();
            let got = ring_entry(&sq, &paired);
            let e = da.values[da.flatten(k)] * da.values[da.flatten(l)];
            worst.kron = worst.kron.max((got - e).abs() / scale);
        };
        if pairs <= 4096 {
            for fk in 0..da.values.len() {
                for fl in 0..da.values.len() {
                    check(&da.unflatten(fk), &da.unflatten(fl));
                }
            }
        } else {
            for _ in 0..2000 {
                let k: Vec<usize> = modes.iter().map(|&m| rng.random_range(0..m)).collect();
                let l: Vec<usize> = modes.iter().map(|&m| rng.random_range(0..m)).collect();
                check(&k, &l);
            }
        }
    }
    worst
}

/// Random model with entries uniform in `[lo, hi)` and the given permutation.
pub fn random_model<R: Rng>(rng: &mut R, d: usize, k: usize, rank: usize, lo: f64, hi: f64, perm: Vec<usize>) -> TrdeModel {
    let coeff = TrCores::random(&vec![rank; d], &vec![k; d], lo, hi, rng).expect("valid ring");
    TrdeModel::new(coeff, perm).expect("valid model")
}

/// `T(x)` from the dense coefficient tensor and the oracle basis; `x` is in
/// data order and routed through the model permutation.
pub fn oracle_ring_value(model: &TrdeModel, coeff: &Dense, x: &[f64]) -> f64 {
    let k = model.grid(0).k_basis();
    let phis: Vec<Vec<f64>> = model.permutation().iter().map(|&dim| basis(k, x[dim])).collect();
    coeff
        .values
        .iter()
        .enumerate()
        .map(|(flat, &v)| {
            let idx = coeff.unflatten(flat);
            v * idx.iter().enumerate().map(|(d, &i)| phis[d][i]).product::<f64>()
        })
        .sum()
}

/// `Z = ∫ T^2` by composite Gauss quadrature on the full tensor grid.
/// `T` on the grid comes from mode-by-mode products of the dense
/// coefficient tensor with the sampled basis matrix.
pub fn quadrature_z(model: &TrdeModel) -> f64 {
    let coeff = dense(model.coeff());
    let k = model.grid(0).k_basis();
    let rule = gauss_rule(k, 0.0, 1.0);
    let phi: Vec<Vec<f64>> = rule.iter().map(|&(x, _)| basis(k, x)).collect();
    let p = rule.len();
    // contract the last remaining coefficient mode at each step
    let mut values = coeff.values.clone();
    let mut lead = coeff.values.len() / k;
    let mut trail = 1usize;
    for _ in 0..model.dims() {
        // values laid out as (lead, k, trail)
        let mut next = vec![0.0; lead * p * trail];
        for a in 0..lead {
            for j in 0..k {
                for q in 0..p {
                    let f = phi[q][j];
                    if f == 0.0 {
                        continue;
                    }
                    for t in 0..trail {
                        next[(a * p + q) * trail + t] += f * values[(a * k + j) * trail + t];
                    }
                }
            }
        }
        // move the contracted mode into the trailing block
        values = next;
        trail *= p;
        lead /= k;
        if lead == 0 {
            break;
        }
    }
    let d = model.dims();
    let mut z = 0.0;
    for (flat, v) in values.iter().enumerate() {
        let mut rest = flat;
        let mut w = 1.0;
        for _ in 0..d {
            w *= rule[rest % p].1;
            rest /= p;
        }
        z += w * v * v;
    }
    z
}

/// Largest elementwise relative error of an analytic gradient against
/// central differences of `f`, over entries of magnitude at least `floor`.
pub fn fd_max_rel_err<F: FnMut(usize, (usize, usize, usize), f64) -> f64>(
    analytic: &[Array3<f64>],
    step: f64,
    floor: f64,
    mut f: F,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (axis, g) in analytic.iter().enumerate() {
        for (idx, &an) in g.indexed_iter() {
            let fd = (f(axis, idx, step) - f(axis, idx, -step)) / (2.0 * step);
            let scale = an.abs().max(fd.abs());
            if scale >= floor {
                worst = worst.max((an - fd).abs() / scale);
            }
        }
    }
    worst
}

/// As [`fd_max_rel_err`] with the fourth-order central stencil
/// `(-f(2h) + 8 f(h) - 8 f(-h) + f(-2h)) / 12h`, which stays accurate where
/// the function has large curvature (points where `T` nearly vanishes).
pub fn fd4_max_rel_err<F: FnMut(usize, (usize, usize, usize), f64) -> f64>(
    analytic: &[Array3<f64>],
    step: f64,
    floor: f64,
    mut f: F,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (axis, g) in analytic.iter().enumerate() {
        for (idx, &an) in g.indexed_iter() {
            let fd = (-f(axis, idx, 2.0 * step) + 8.0 * f(axis, idx, step) - 8.0 * f(axis, idx, -step)
                + f(axis, idx, -2.0 * step))
                / (12.0 * step);
            let scale = an.abs().max(fd.abs());
            if scale >= floor {
                worst = worst.max((an - fd).abs() / scale);
            }
        }
    }
    worst
}

pub fn random_batch<R: Rng>(rng: &mut R, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng.random::<f64>())
}

/// Finite-difference check of the log-likelihood gradient of a random
/// `D = 3, K = 8, R = 3` model.
pub fn trde_gradient_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let model = random_model(&mut rng, 3, 8, 3, -1.0, 1.0, vec![0, 1, 2]);
    let batch = random_batch(&mut rng, 12, 3);
    let (_, grad) = model.grad_log_likelihood(&batch.view()).expect("gradient");
    fd_max_rel_err(&grad.cores, 1e-5, 1e-8, |axis, idx, delta| {
        let mut p = model.clone();
        p.update_cores(|c| c[axis].slices_mut()[idx] += delta);
        p.log_likelihood(&batch.view()).expect("likelihood")
    })
}

/// Finite-difference check of the mixture log-likelihood gradient with
/// `D = 4, M = 2, K = 6, R = 2`.
pub fn term_gradient_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let perms = enumerate_circular(4, Some(2), seed).expect("permutations");
    let components = perms
        .perms
        .iter()
        .map(|p| random_model(&mut rng, 4, 6, 2, -1.0, 1.0, p.clone()))
        .collect();
    let term = TermModel::new(components).expect("mixture");
    let batch = random_batch(&mut rng, 12, 4);
    let (_, grads) = term.grad_log_likelihood(&batch.view()).expect("gradient");
    let mut worst: f64 = 0.0;
    for (m, grad) in grads.iter().enumerate() {
        let err = fd_max_rel_err(&grad.cores, 1e-5, 1e-8, |axis, idx, delta| {
            let mut p = term.clone();
            p.components_mut()[m].update_cores(|c| c[axis].slices_mut()[idx] += delta);
            p.log_likelihood(&batch.view()).expect("likelihood")
        });
        worst = worst.max(err);
    }
    worst
}

/// One random normalization case: `(D, quadrature rel err if D <= 3, rel
/// err between the two library code paths)`.
pub fn normalization_case(seed: u64) -> (usize, Option<f64>, f64) {
    let mut rng = rng(seed);
    let d = rng.random_range(1..=4);
    let k = rng.random_range(4..=12);
    let r = rng.random_range(1..=4);
    let model = random_model(&mut rng, d, k, r, -1.0, 1.0, (0..d).collect());
    let z = model.partition_function();
    let squared = model.partition_function_via_squared().expect("squared path");
    let paths = (z - squared).abs() / squared.abs();
    let quad = (d <= 3).then(|| {
        let q = quadrature_z(&model);
        (z - q).abs() / q.abs()
    });
    (d, quad, paths)
}

/// Composite Simpson weights on `n` equal panels of `[0, 1]` (`n` even).
pub fn simpson(n: usize) -> Vec<(f64, f64)> {
    let h = 1.0 / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (i as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// Matrix rows as vectors.
pub fn rows(m: &ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.axis_iter(Axis(0)).map(|r| r.to_vec()).collect()
}

/// Goodness of fit of 2-D unit-cube samples against the mixture of
/// `components`: Pearson chi-square on a 100 x 100 grid (cells pooled to an
/// expected count of 5) and the KS statistic of each coordinate against its
/// exact marginal CDF.
pub fn sampler_statistics(components: &[TrdeModel], samples: &Array2<f64>) -> (ChiSquareTest, [f64; 2]) {
    let bins = 100;
    let n = samples.nrows() as f64;
    let cells = grid_cell_probabilities(components, bins).expect("2-D components");
    let mut counts = Array2::<f64>::zeros((bins, bins));
    for r in samples.axis_iter(Axis(0)) {
        let i = ((r[0] * bins as f64) as usize).min(bins - 1);
        let j = ((r[1] * bins as f64) as usize).min(bins - 1);
        counts[[i, j]] += 1.0;
    }
    let observed: Vec<f64> = counts.iter().copied().collect();
    let expected: Vec<f64> = cells.iter().map(|p| p * n).collect();
    let chi = chi_square_test(&observed, &expected, 5.0).expect("enough cells");
    let term = TermModel::new(components.to_vec()).expect("matching components");
    let total = term.total_mass();
    let ks = [0, 1].map(|dim| {
        let other = 1 - dim;
        let cdf = |x: f64| {
            let q = DensityQuery::new().upper_limit(dim, x).marginalize(other);
            term.marginal_density(&q).expect("valid query") / total
        };
        ks_statistic(&samples.column(dim).to_vec(), cdf)
    });
    (chi, ks)
}
