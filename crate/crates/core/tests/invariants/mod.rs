//! Property suites, one runner per invariant, 100 cases each. Shared between
//! the property tests and the acceptance harness; expects a sibling `common`
//! module at the crate root.
#![allow(dead_code)]

use ndarray::{Array2, Axis};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;

use crate::common::*;
use trde::datasets::{generate_toy_raw, Affine, SplitFractions, Splits, ToyFamily, ToySpec, MARGIN};
use trde::mixture::canonical_circular;
use trde::sampler::{conditional_weights, sample_rng, ConditionalCdf};
use trde::stats::{chi_square_test, ks_statistic};
use trde::{
    build_plan, enumerate_circular, evaluate_nll, fit, sample_batch, sample_one, BasisGrid, Dataset, DensityQuery, Optimizer,
    SliceWeights, Split, TermModel, TrCores, TrainConfig, TrdeModel,
};

pub const CASES: u32 = 100;

/// Significance level for statistical properties, Bonferroni-corrected over
/// the cases of one suite.
pub const STAT_ALPHA: f64 = 1e-4;

pub type Check = fn() -> Result<(), String>;

fn runner() -> TestRunner {
    TestRunner::new_with_rng(Config::with_cases(CASES), TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---- splines ----

pub fn partition_of_unity() -> Result<(), String> {
    run(4usize..=64, |k| {
        let grid = BasisGrid::new(k).unwrap();
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            let s: f64 = grid.eval_all(x).unwrap().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12, "K={} x={}: {}", k, x, s);
        }
        Ok(())
    })
}

pub fn basis_nonnegative_and_local() -> Result<(), String> {
    run((4usize..=64, 0.0f64..=1.0), |(k, x)| {
        let grid = BasisGrid::new(k).unwrap();
        let all = grid.eval_all(x).unwrap();
        let (first, vals) = grid.eval_active(x).unwrap();
        prop_assert!(all.iter().all(|&v| v >= 0.0));
        for (j, &v) in all.iter().enumerate() {
            if j < first || j >= first + 3 {
                prop_assert_eq!(v, 0.0);
            } else {
                prop_assert_eq!(v, vals[j - first]);
            }
        }
        let knots = grid.knots();
        let h = grid.knot_step();
        for w in knots.windows(2) {
            prop_assert!(w[1] > w[0] && close(w[1] - w[0], h, 1e-12));
        }
        Ok(())
    })
}

pub fn integral_to_derivative() -> Result<(), String> {
    run((4usize..=40, 0.01f64..0.99), |(k, x)| {
        let grid = BasisGrid::new(k).unwrap();
        let step = 1e-6;
        let hi = grid.integral_to(x + step).unwrap();
        let lo = grid.integral_to(x - step).unwrap();
        let f = grid.eval_all(x).unwrap();
        // the derivative is a vector; its relative error is taken in the max
        // norm, since tiny tail values sit below the stencil's truncation error
        let err = (0..k).map(|j| ((hi[j] - lo[j]) / (2.0 * step) - f[j]).abs()).fold(0.0, f64::max);
        let norm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err / norm <= 1e-6, "K={} x={}: {}", k, x, err / norm);
        Ok(())
    })
}

/// Dense Cholesky as a positive-definiteness certificate.
fn is_positive_definite(a: &Array2<f64>) -> bool {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[[i, p]] * l[[j, p]]).sum();
            if i == j {
                let d = a[[i, i]] - s;
                if d <= 0.0 {
                    return false;
                }
                l[[i, i]] = d.sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    true
}

pub fn mass_matrix_positive_definite() -> Result<(), String> {
    run(prop_oneof![Just(4usize), Just(8), Just(16), Just(64), 4usize..=64], |k| {
        let m = BasisGrid::new(k).unwrap().mass_matrix().to_dense();
        prop_assert!(is_positive_definite(&m), "K={}", k);
        Ok(())
    })
}

// ---- tensor ring ----

fn ring_shape() -> impl Strategy<Value = (Vec<usize>, u64)> {
    (prop::collection::vec(1usize..=4, 1..=5), any::<u64>())
}

pub fn trace_cyclic_invariance() -> Result<(), String> {
    run((ring_shape(), 0usize..5), |((modes, seed), s)| {
        let mut rng = rng(seed);
        let a = random_ring(&mut rng, &modes, 3);
        let d = modes.len();
        let shift = s % d;
        let rot = a.rotate_left(shift);
        let full = dense(&a);
        for (flat, &v) in full.values.iter().enumerate() {
            let idx = full.unflatten(flat);
            let moved: Vec<usize> = (0..d).map(|i| idx[(i + shift) % d]).collect();
            prop_assert!(close(rot.element(&moved).unwrap(), v, 1e-12 * v.abs().max(1.0)));
        }
        Ok(())
    })
}

pub fn inner_product_bilinear_symmetric() -> Result<(), String> {
    run((ring_shape(), -2.0f64..2.0, -2.0f64..2.0), |((modes, seed), alpha, beta)| {
        let mut rng = rng(seed);
        let a = random_ring(&mut rng, &modes, 3);
        let b = random_ring(&mut rng, &modes, 3);
        let ab = a.inner_product(&b).unwrap();
        let ba = b.inner_product(&a).unwrap();
        prop_assert!(close(ab, ba, 1e-12 * ab.abs().max(1.0)));
        // linearity in the slices of one core of the second argument
        let axis = rng.random_range(0..modes.len());
        let mut cores = b.cores().to_vec();
        let c_core = {
            let base = &cores[axis];
            trde::Core::random(base.left(), base.modes(), base.right(), -1.0, 1.0, &mut rng)
        };
        let mut with_c = cores.clone();
        with_c[axis] = c_core.clone();
        let c = TrCores::new(with_c).unwrap();
        let mut mixed = cores[axis].slices().clone() * alpha;
        mixed.scaled_add(beta, c_core.slices());
        cores[axis] = trde::Core::from_slices(mixed);
        let combo = TrCores::new(cores).unwrap();
        let lhs = a.inner_product(&combo).unwrap();
        let rhs = alpha * ab + beta * a.inner_product(&c).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10 * lhs.abs().max(1.0)), "{} vs {}", lhs, rhs);
        prop_assert!(a.inner_product(&a).unwrap() >= 0.0);
        Ok(())
    })
}

pub fn marginalize_composes() -> Result<(), String> {
    run((ring_shape(), any::<u64>()), |((modes, seed), split)| {
        let mut rng = rng(seed);
        let a = random_ring(&mut rng, &modes, 3);
        let d = modes.len();
        let weights: Vec<Vec<f64>> = modes.iter().map(|&m| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let p: Vec<usize> = (0..d).filter(|i| split >> i & 1 == 1).collect();
        let q: Vec<usize> = (0..d).filter(|i| split >> (i + 8) & 1 == 1).collect();
        let mut union = p.clone();
        union.extend(q.iter().filter(|i| !p.contains(i)));
        // a dimension already reduced to one slice is left as is by the second pass
        let q_rest: Vec<usize> = q.iter().copied().filter(|i| !p.contains(i)).collect();
        let two = a
            .marginalize(&p, SliceWeights::Vectors(&weights))
            .unwrap()
            .marginalize(&q_rest, SliceWeights::Vectors(&weights))
            .unwrap();
        let one = a.marginalize(&union, SliceWeights::Vectors(&weights)).unwrap();
        let (x, y) = (dense(&two), dense(&one));
        let scale = y.max_abs().max(1e-300);
        for (u, v) in x.values.iter().zip(&y.values) {
            prop_assert!((u - v).abs() <= 1e-12 * scale.max(1.0));
        }
        Ok(())
    })
}

pub fn kron_square_pairs() -> Result<(), String> {
    run(
        (prop::collection::vec(1usize..=3, 1..=4), any::<u64>()),
        |(modes, seed)| {
            let mut rng = rng(seed);
            let a = random_ring(&mut rng, &modes, 3);
            let da = dense(&a);
            let sq = a.kron_square();
            for fk in 0..da.values.len() {
                for fl in 0..da.values.len() {
                    let (k, l) = (da.unflatten(fk), da.unflatten(fl));
                    let paired: Vec<usize> = (0..modes.len()).map(|i| k[i] * modes[i] + l[i]).collect();
                    let e = da.values[fk] * da.values[fl];
                    prop_assert!(close(sq.element(&paired).unwrap(), e, 1e-12 * e.abs().max(1.0)));
                }
            }
            Ok(())
        },
    )
}

// ---- model ----

fn model_params() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=4, 4usize..=10, 1usize..=3, any::<u64>())
}

fn shuffled(rng: &mut impl Rng, d: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..d).collect();
    p.shuffle(rng);
    p
}

pub fn density_nonnegative() -> Result<(), String> {
    run(model_params(), |(d, k, r, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, d);
        let m = random_model(&mut rng, d, k, r, -1.0, 1.0, perm);
        // 1000 points per case, 10^5 over the suite
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            prop_assert!(m.unnormalized_density(&x).unwrap() >= 0.0);
        }
        Ok(())
    })
}

pub fn full_marginal_normalizes() -> Result<(), String> {
    run(model_params(), |(d, k, r, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, d);
        let m = random_model(&mut rng, d, k, r, -1.0, 1.0, perm);
        let v = m.normalized_marginal(&DensityQuery::all_marginalized(d)).unwrap();
        prop_assert!(close(v, 1.0, 1e-12), "{}", v);
        Ok(())
    })
}

pub fn marginal_consistency() -> Result<(), String> {
    run((2usize..=4, 4usize..=8, 1usize..=3, any::<u64>()), |(d, k, r, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, d);
        let m = random_model(&mut rng, d, k, r, -1.0, 1.0, perm);
        let z = m.partition_function();
        let drop = rng.random_range(0..d);
        let point: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let mut query = DensityQuery::new().marginalize(drop);
        for (j, &x) in point.iter().enumerate() {
            if j != drop {
                query = query.fix(j, x);
            }
        }
        let lib = m.normalized_marginal(&query).unwrap();
        let quad: f64 = gauss_rule(k, 0.0, 1.0)
            .iter()
            .map(|&(t, w)| {
                let mut x = point.clone();
                x[drop] = t;
                w * m.unnormalized_density(&x).unwrap() / z
            })
            .sum();
        prop_assert!((lib - quad).abs() <= 1e-8 * quad.abs().max(1e-12), "{} vs {}", lib, quad);
        Ok(())
    })
}

pub fn permutation_semantics() -> Result<(), String> {
    run(model_params(), |(d, k, r, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, d);
        let coeff = TrCores::random(&vec![r; d], &vec![k; d], -1.0, 1.0, &mut rng).unwrap();
        let permuted = TrdeModel::new(coeff.clone(), perm.clone()).unwrap();
        let plain = TrdeModel::new(coeff, (0..d).collect()).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let y: Vec<f64> = perm.iter().map(|&p| x[p]).collect();
            prop_assert_eq!(permuted.unnormalized_density(&x).unwrap(), plain.unnormalized_density(&y).unwrap());
        }
        Ok(())
    })
}

pub fn gradient_matches_finite_differences() -> Result<(), String> {
    run((1usize..=3, 4usize..=6, 1usize..=2, any::<u64>()), |(d, k, r, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, d);
        let m = random_model(&mut rng, d, k, r, -1.0, 1.0, perm);
        let batch = random_batch(&mut rng, 6, d);
        let (_, grad) = m.grad_log_likelihood(&batch.view()).unwrap();
        // random batches can land near zeros of T, where the two-point
        // stencil's truncation error alone exceeds the tolerance
        let err = fd4_max_rel_err(&grad.cores, 1e-5, 1e-8, |axis, idx, delta| {
            let mut p = m.clone();
            p.update_cores(|c| c[axis].slices_mut()[idx] += delta);
            p.log_likelihood(&batch.view()).unwrap()
        });
        prop_assert!(err <= 1e-5, "{}", err);
        Ok(())
    })
}

// ---- sampler ----

pub fn conditional_cdf_monotone() -> Result<(), String> {
    run((1usize..=4, 4usize..=10, 1usize..=3, any::<u64>()), |(d, k, r, seed)| {
        let mut rng = rng(seed);
        let m = random_model(&mut rng, d, k, r, -1.0, 1.0, (0..d).collect());
        let plan = build_plan(&m);
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let mut left: Option<Array2<f64>> = None;
        for (axis, &xa) in x.iter().enumerate() {
            let core = m.coeff().core(axis);
            let w = match &left {
                None => plan.first_weights().clone(),
                Some(p) => conditional_weights(core, &p.view(), &plan.right_messages()[axis], axis + 1 == d),
            };
            let cdf = ConditionalCdf::new(m.grid(axis), w);
            let mut prev = cdf.cdf(0.0).unwrap();
            prop_assert!(prev.abs() <= 1e-10);
            for i in 1..=400 {
                let v = cdf.cdf(i as f64 / 400.0).unwrap();
                prop_assert!(v >= prev - 1e-12, "axis {} step {}: {} < {}", axis, i, v, prev);
                prev = v;
            }
            prop_assert!((prev - 1.0).abs() <= 1e-10);
            // bisection path: endpoints and midpoints of a few inversions
            for u in [0.1, 0.5, 0.9] {
                let xu = cdf.invert(u, axis).unwrap();
                prop_assert!((cdf.cdf(xu).unwrap() - u).abs() <= 1e-9, "F^-1({}) misses", u);
            }
            let q = m.phi_factor(axis, xa).unwrap();
            left = Some(match left {
                None => q,
                Some(p) => p.dot(&q),
            });
        }
        Ok(())
    })
}

/// CDF of `g(x)^2 / ∫ g^2` for `g = sum_k c_k f_k`, by the oracle rule.
fn product_marginal_cdf(coeffs: &[f64], x: f64) -> f64 {
    let k = coeffs.len();
    let g2 = |t: f64| basis(k, t).iter().zip(coeffs).map(|(f, c)| f * c).sum::<f64>().powi(2);
    let part: f64 = gauss_rule(k, 0.0, x).iter().map(|&(t, w)| w * g2(t)).sum();
    let total: f64 = gauss_rule(k, 0.0, 1.0).iter().map(|&(t, w)| w * g2(t)).sum();
    part / total
}

pub fn product_model_sampling_exact() -> Result<(), String> {
    run((2usize..=3, 4usize..=8, any::<u64>()), |(d, k, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, d);
        let m = random_model(&mut rng, d, k, 1, 0.05, 1.0, perm.clone());
        let plan = build_plan(&m);
        let n = 100_000;
        let samples = sample_batch(&m, &plan, n, seed).unwrap();
        for (axis, &dim) in perm.iter().enumerate() {
            let coeffs: Vec<f64> = (0..k).map(|j| m.coeff().core(axis).slice(j)[[0, 0]]).collect();
            // sort once and evaluate the oracle CDF on a fine table
            let table: Vec<f64> = (0..=2000).map(|i| product_marginal_cdf(&coeffs, i as f64 / 2000.0)).collect();
            let cdf = |x: f64| {
                let s = x * 2000.0;
                let i = (s as usize).min(1999);
                let t = s - i as f64;
                // linear interpolation error is far below the KS resolution
                table[i] * (1.0 - t) + table[i + 1] * t
            };
            let ks = ks_statistic(&samples.column(dim).to_vec(), cdf);
            prop_assert!(ks <= 0.01, "dim {}: KS {}", dim, ks);
        }
        Ok(())
    })
}

pub fn permutation_round_trip_sampling() -> Result<(), String> {
    run((4usize..=7, 1usize..=2, any::<u64>()), |(k, r, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, 3);
        let coeff = TrCores::random(&[r; 3], &[k; 3], -1.0, 1.0, &mut rng).unwrap();
        let permuted = TrdeModel::new(coeff.clone(), perm.clone()).unwrap();
        let plain = TrdeModel::new(coeff, vec![0, 1, 2]).unwrap();
        let n = 20_000;
        let samples = sample_batch(&permuted, &build_plan(&permuted), n, seed).unwrap();
        // y[axis] = x[perm[axis]] reads the sample in the unpermuted layout
        let bins = 10;
        let mut counts = vec![0.0; bins * bins];
        for row in samples.axis_iter(Axis(0)) {
            let (a, b) = (row[perm[0]], row[perm[1]]);
            let i = ((a * bins as f64) as usize).min(bins - 1);
            let j = ((b * bins as f64) as usize).min(bins - 1);
            counts[i * bins + j] += 1.0;
        }
        let z = plain.partition_function();
        let cum = |a: f64, b: f64| {
            let q = DensityQuery::new().upper_limit(0, a).upper_limit(1, b).marginalize(2);
            plain.marginal_density(&q).unwrap() / z
        };
        let mut expected = Vec::with_capacity(bins * bins);
        for i in 0..bins {
            for j in 0..bins {
                let (a0, a1) = (i as f64 / bins as f64, (i + 1) as f64 / bins as f64);
                let (b0, b1) = (j as f64 / bins as f64, (j + 1) as f64 / bins as f64);
                expected.push(n as f64 * (cum(a1, b1) - cum(a0, b1) - cum(a1, b0) + cum(a0, b0)));
            }
        }
        let t = chi_square_test(&counts, &expected, 5.0).unwrap();
        prop_assert!(t.p_value > STAT_ALPHA, "{:?}", t);
        Ok(())
    })
}

// ---- mixture ----

fn random_term(rng: &mut impl Rng, d: usize, k: usize, r: usize, m: usize, seed: u64) -> TermModel {
    let perms = enumerate_circular(d, Some(m), seed).unwrap();
    let components = perms
        .perms
        .iter()
        .map(|p| random_model(rng, d, k, r, -1.0, 1.0, p.clone()))
        .collect();
    TermModel::new(components).unwrap()
}

pub fn sigma_on_simplex_during_training() -> Result<(), String> {
    run((1usize..=3, any::<u64>()), |(m, seed)| {
        let mut rng = rng(seed);
        let mut term = random_term(&mut rng, 4, 5, 2, m, seed);
        let n = 40;
        let dataset = Dataset {
            name: "simplex".into(),
            data: Array2::from_shape_simple_fn((n, 4), || rng.random_range(0.05..0.95)),
            affine: vec![Affine { offset: 0.0, scale: 1.0 }; 4],
            splits: Splits {
                train: 0..30,
                validation: 30..35,
                test: 35..n,
            },
        };
        // one optimizer step per epoch, so every record follows a step
        let config = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 30,
            max_epochs: 3,
            patience: 5,
            seed,
            optimizer: Optimizer::Adam,
            grad_clip: None,
        };
        let report = fit(&mut term, &dataset, &config).unwrap();
        let mut all: Vec<Vec<f64>> = report.epochs.iter().map(|e| e.sigma.clone()).collect();
        all.push(term.sigma_weights().unwrap());
        for sigma in all {
            prop_assert!(sigma.iter().all(|&s| s >= 0.0));
            prop_assert!(close(sigma.iter().sum::<f64>(), 1.0, 1e-12));
        }
        Ok(())
    })
}

pub fn mixture_normalizes() -> Result<(), String> {
    run((4usize..=5, 1usize..=4, any::<u64>()), |(d, m, seed)| {
        let mut rng = rng(seed);
        let term = random_term(&mut rng, d, 5, 2, m, seed);
        let v = term.normalized_marginal(&DensityQuery::all_marginalized(d)).unwrap();
        prop_assert!(close(v, 1.0, 1e-12));
        let sum: f64 = term.components().iter().map(|c| c.partition_function()).sum();
        prop_assert!(close(term.total_mass(), sum, 1e-12 * sum));
        Ok(())
    })
}

pub fn canonical_form_idempotent() -> Result<(), String> {
    run((3usize..=9, any::<u64>(), any::<usize>()), |(d, seed, shift)| {
        let mut rng = rng(seed);
        let p = shuffled(&mut rng, d);
        let c = canonical_circular(&p);
        prop_assert_eq!(canonical_circular(&c), c.clone());
        let s = shift % d;
        let rotated: Vec<usize> = (0..d).map(|i| p[(i + s) % d]).collect();
        let reflected: Vec<usize> = p.iter().rev().copied().collect();
        prop_assert_eq!(canonical_circular(&rotated), c.clone());
        prop_assert_eq!(canonical_circular(&reflected), c);
        Ok(())
    })
}

pub fn single_component_reduces() -> Result<(), String> {
    run(model_params(), |(d, k, r, seed)| {
        let mut rng = rng(seed);
        let perm = shuffled(&mut rng, d);
        let m = random_model(&mut rng, d, k, r, -1.0, 1.0, perm);
        let term = TermModel::single(m.clone());
        let batch = random_batch(&mut rng, 8, d);
        prop_assert_eq!(term.log_likelihood(&batch.view()).unwrap(), m.log_likelihood(&batch.view()).unwrap());
        let row: Vec<f64> = batch.row(0).to_vec();
        prop_assert_eq!(term.unnormalized_density(&row).unwrap(), m.unnormalized_density(&row).unwrap());
        prop_assert_eq!(term.sigma_weights().unwrap(), vec![1.0]);
        let (_, gt) = term.grad_log_likelihood(&batch.view()).unwrap();
        let (_, gm) = m.grad_log_likelihood(&batch.view()).unwrap();
        prop_assert_eq!(&gt[0].cores, &gm.cores);
        let q = DensityQuery::new().fix(0, row[0]);
        let q = (1..d).fold(q, |q, j| q.marginalize(j));
        prop_assert_eq!(term.marginal_density(&q).unwrap(), m.marginal_density(&q).unwrap());
        // the mixture spends one draw on the component, then samples the model
        let a = trde::mixture_sample(&term, 16, seed).unwrap();
        let plan = build_plan(&m);
        for (i, row) in a.axis_iter(Axis(0)).enumerate() {
            let mut stream = sample_rng(seed, i as u64);
            let _pick: f64 = stream.random();
            let u: Vec<f64> = (0..d).map(|_| stream.random::<f64>()).collect();
            prop_assert_eq!(row.to_vec(), sample_one(&m, &plan, &u).unwrap());
        }
        Ok(())
    })
}

// ---- trainer ----

fn small_dataset(rng: &mut impl Rng, d: usize, n: usize) -> Dataset {
    Dataset {
        name: "small".into(),
        data: Array2::from_shape_simple_fn((n, d), || rng.random_range(0.05..0.95)),
        affine: vec![Affine { offset: 0.0, scale: 1.0 }; d],
        splits: Splits {
            train: 0..n - 10,
            validation: n - 10..n - 5,
            test: n - 5..n,
        },
    }
}

pub fn small_step_does_not_decrease_likelihood() -> Result<(), String> {
    run((1usize..=3, any::<u64>()), |(d, seed)| {
        let mut rng = rng(seed);
        let mut m = TrdeModel::initialize(d, 6, 2, (0..d).collect(), &mut rng).unwrap();
        let data = small_dataset(&mut rng, d, 50);
        let before = m.log_likelihood(&data.train()).unwrap();
        let config = TrainConfig {
            learning_rate: 1e-4,
            batch_size: 40,
            max_epochs: 1,
            patience: 1,
            seed,
            optimizer: Optimizer::Sgd,
            grad_clip: None,
        };
        fit(&mut m, &data, &config).unwrap();
        let after = m.log_likelihood(&data.train()).unwrap();
        prop_assert!(after >= before - 1e-12 * before.abs(), "{} -> {}", before, after);
        Ok(())
    })
}

pub fn gauge_preserves_density() -> Result<(), String> {
    run((model_params(), 0.1f64..10.0), |((d, k, r, seed), c)| {
        let mut rng = rng(seed);
        let mut m = random_model(&mut rng, d, k, r, -1.0, 1.0, (0..d).collect());
        m.scale_cores(c);
        let batch = random_batch(&mut rng, 20, d);
        let before = m.log_likelihood(&batch.view()).unwrap();
        m.gauge_fix();
        let after = m.log_likelihood(&batch.view()).unwrap();
        prop_assert!((before - after).abs() / 20.0 <= 1e-10, "{} vs {}", before, after);
        let mut term = random_term(&mut rng, 4, 5, 2, 2, seed);
        let batch = random_batch(&mut rng, 20, 4);
        let before = term.log_likelihood(&batch.view()).unwrap();
        term.rescale_joint();
        let after = term.log_likelihood(&batch.view()).unwrap();
        prop_assert!((before - after).abs() / 20.0 <= 1e-10);
        Ok(())
    })
}

pub fn training_is_deterministic() -> Result<(), String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    run((1usize..=3, any::<u64>()), |(d, seed)| {
        let mut rng = rng(seed);
        let init = TrdeModel::initialize(d, 5, 2, (0..d).collect(), &mut rng).unwrap();
        let data = small_dataset(&mut rng, d, 60);
        let config = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            max_epochs: 4,
            patience: 2,
            seed,
            optimizer: Optimizer::Adam,
            grad_clip: None,
        };
        let go = || {
            let mut m = init.clone();
            let report = pool.install(|| fit(&mut m, &data, &config)).unwrap();
            let seq: Vec<(u64, u64)> = report.epochs.iter().map(|e| (e.train_nll.to_bits(), e.val_nll.to_bits())).collect();
            (seq, report)
        };
        let (a, report) = go();
        let (b, _) = go();
        prop_assert_eq!(a, b);
        prop_assert!(report.epochs.len() <= config.max_epochs);
        let best = report.epochs[report.best_epoch].val_nll;
        prop_assert_eq!(best, report.best_val_nll);
        prop_assert!(report.epochs.iter().all(|e| best <= e.val_nll));
        Ok(())
    })
}

pub fn config_validation() -> Result<(), String> {
    run((0usize..3, 0usize..3, 0usize..3, -1e-2f64..1e-2), |(batch, epochs, patience, lr)| {
        let config = TrainConfig {
            learning_rate: lr,
            batch_size: batch,
            max_epochs: epochs,
            patience,
            ..TrainConfig::default()
        };
        let valid = batch >= 1 && epochs >= 1 && patience >= 1 && lr > 0.0;
        prop_assert_eq!(config.validate().is_ok(), valid);
        Ok(())
    })
}

// ---- datasets ----

pub fn jacobian_identity() -> Result<(), String> {
    run((1usize..=3, any::<u64>()), |(d, seed)| {
        let mut rng = rng(seed);
        let m = random_model(&mut rng, d, 6, 2, 0.2, 1.0, (0..d).collect());
        let mut ds = small_dataset(&mut rng, d, 40);
        ds.affine = (0..d)
            .map(|_| Affine {
                offset: rng.random_range(-5.0..5.0),
                scale: rng.random_range(0.01..100.0),
            })
            .collect();
        let unit = -m.log_likelihood(&ds.test()).unwrap() / ds.test().nrows() as f64;
        let jac: f64 = ds.affine.iter().map(|a| a.scale.ln()).sum();
        let got = evaluate_nll(&m, &ds, Split::Test).unwrap();
        prop_assert!(close(got, unit + jac, 1e-10 * got.abs().max(1.0)), "{} vs {}", got, unit + jac);
        // inverse map reproduces the originals
        let orig = ds.to_original(&ds.test());
        let back = ds.to_unit(&orig.view()).unwrap();
        for (a, b) in back.iter().zip(ds.test().iter()) {
            prop_assert!(close(*a, *b, 1e-12));
        }
        Ok(())
    })
}

pub fn splits_disjoint_and_covering() -> Result<(), String> {
    run((20usize..500, 0.0f64..0.3, 0.0f64..0.3, any::<u64>()), |(n, val, test, seed)| {
        let mut rng = rng(seed);
        let raw = Array2::from_shape_simple_fn((n, 2), || rng.random::<f64>() * 7.0 - 2.0);
        let ds = Dataset::from_raw("raw", raw, SplitFractions { validation: val, test }, seed).unwrap();
        let s = &ds.splits;
        prop_assert_eq!(s.train.start, 0);
        prop_assert_eq!(s.train.end, s.validation.start);
        prop_assert_eq!(s.validation.end, s.test.start);
        prop_assert_eq!(s.test.end, n);
        prop_assert!(!s.train.is_empty());
        for row in ds.train().axis_iter(Axis(0)) {
            prop_assert!(row.iter().all(|&v| (MARGIN - 1e-12..=1.0 - MARGIN + 1e-12).contains(&v)));
        }
        prop_assert!(ds.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(ds.affine.iter().all(|a| a.scale > 0.0));
        prop_assert!(ds.log_jacobian().is_finite());
        Ok(())
    })
}

pub fn generators_stable_across_seeds() -> Result<(), String> {
    run((0usize..ToyFamily::ALL.len(), any::<u64>(), any::<u64>()), |(f, s1, s2)| {
        let family = ToyFamily::ALL[f];
        let n = 100_000;
        let a = generate_toy_raw(&ToySpec::new(family, n, s1)).unwrap();
        let b = generate_toy_raw(&ToySpec::new(family, n, s2)).unwrap();
        for dim in 0..family.dims() {
            let (ca, cb) = (a.column(dim), b.column(dim));
            let (ma, mb) = (ca.mean().unwrap(), cb.mean().unwrap());
            let (sa, sb) = (ca.std(0.0), cb.std(0.0));
            // means are compared on the scale of the spread, which is what a
            // 2% change in location means for a centered family
            prop_assert!((ma - mb).abs() <= 0.02 * sa.max(sb), "{} dim {}: mean {} vs {}", family, dim, ma, mb);
            prop_assert!((sa - sb).abs() <= 0.02 * sa.max(sb), "{} dim {}: std {} vs {}", family, dim, sa, sb);
        }
        Ok(())
    })
}

pub fn toy_count_positive() -> Result<(), String> {
    run((0usize..ToyFamily::ALL.len(), 0usize..50, any::<u64>()), |(f, n, seed)| {
        let spec = ToySpec::new(ToyFamily::ALL[f], n, seed);
        let out = generate_toy_raw(&spec);
        prop_assert_eq!(out.is_ok(), n >= 1);
        Ok(())
    })
}

/// Every suite with its name, in module order.
pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("splines: partition of unity", partition_of_unity as Check),
        ("splines: non-negative local basis", basis_nonnegative_and_local),
        ("splines: derivative of integral_to", integral_to_derivative),
        ("splines: mass matrix positive definite", mass_matrix_positive_definite),
        ("tensor_ring: trace cyclic invariance", trace_cyclic_invariance),
        ("tensor_ring: inner product bilinear and symmetric", inner_product_bilinear_symmetric),
        ("tensor_ring: marginalization composes", marginalize_composes),
        ("tensor_ring: kron_square paired elements", kron_square_pairs),
        ("model: non-negative density", density_nonnegative),
        ("model: normalization", full_marginal_normalizes),
        ("model: marginal consistency", marginal_consistency),
        ("model: permutation semantics", permutation_semantics),
        ("model: gradient vs finite differences", gradient_matches_finite_differences),
        ("sampler: monotone conditional CDF", conditional_cdf_monotone),
        ("sampler: exact on product models", product_model_sampling_exact),
        ("sampler: permutation round trip", permutation_round_trip_sampling),
        ("mixture: sigma on the simplex", sigma_on_simplex_during_training),
        ("mixture: normalization", mixture_normalizes),
        ("mixture: canonical form", canonical_form_idempotent),
        ("mixture: single component reduction", single_component_reduces),
        ("trainer: small step ascends", small_step_does_not_decrease_likelihood),
        ("trainer: gauge invariance", gauge_preserves_density),
        ("trainer: determinism and report", training_is_deterministic),
        ("trainer: config validation", config_validation),
        ("datasets: Jacobian identity", jacobian_identity),
        ("datasets: split layout", splits_disjoint_and_covering),
        ("datasets: generator stability", generators_stable_across_seeds),
        ("datasets: toy count", toy_count_positive),
    ]
}
