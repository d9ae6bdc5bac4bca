//! Synthetic 2-D and 3-D benchmark distributions.
//!
//! The 2-D families follow the constructions popularized by the FFJORD and
//! neural-spline-flow code bases; the 3-D manifolds follow scikit-learn's
//! `make_swiss_roll` and `make_s_curve`. Parameters are listed per family.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{Dataset, SplitFractions};
use crate::error::{Error, Result};
use crate::sampler::sample_rng;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyFamily {
    TwoSpirals,
    Checkerboard,
    Rings,
    SwissRoll2d,
    Pinwheel,
    Tree,
    Sierpinski,
    SwissRoll3d,
    Circles3d,
    SCurve,
}

impl ToyFamily {
    pub const ALL: [ToyFamily; 10] = [
        ToyFamily::TwoSpirals,
        ToyFamily::Checkerboard,
        ToyFamily::Rings,
        ToyFamily::SwissRoll2d,
        ToyFamily::Pinwheel,
        ToyFamily::Tree,
        ToyFamily::Sierpinski,
        ToyFamily::SwissRoll3d,
        ToyFamily::Circles3d,
        ToyFamily::SCurve,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ToyFamily::TwoSpirals => "two-spirals",
            ToyFamily::Checkerboard => "checkerboard",
            ToyFamily::Rings => "rings",
            ToyFamily::SwissRoll2d => "swissroll2d",
            ToyFamily::Pinwheel => "pinwheel",
            ToyFamily::Tree => "tree",
            ToyFamily::Sierpinski => "sierpinski",
            ToyFamily::SwissRoll3d => "swissroll3d",
            ToyFamily::Circles3d => "circles3d",
            ToyFamily::SCurve => "s-curve",
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            ToyFamily::SwissRoll3d | ToyFamily::Circles3d | ToyFamily::SCurve => 3,
            _ => 2,
        }
    }

    pub fn default_noise(&self) -> f64 {
        match self {
            ToyFamily::TwoSpirals => 0.1,
            ToyFamily::Checkerboard => 0.0,
            ToyFamily::Rings => 0.08,
            ToyFamily::SwissRoll2d => 1.0,
            ToyFamily::Pinwheel => 0.0,
            ToyFamily::Tree => 0.01,
            ToyFamily::Sierpinski => 0.005,
            ToyFamily::SwissRoll3d => 0.0,
            ToyFamily::Circles3d => 0.05,
            ToyFamily::SCurve => 0.0,
        }
    }
}

impl FromStr for ToyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyFamily::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

impl fmt::Display for ToyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub family: ToyFamily,
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
}

impl ToySpec {
    /// Spec with the family's default noise.
    pub fn new(family: ToyFamily, n: usize, seed: u64) -> Self {
        ToySpec {
            family,
            n,
            noise: family.default_noise(),
            seed,
        }
    }
}

/// Raw points in the family's natural coordinates.
pub fn generate_toy_raw(spec: &ToySpec) -> Result<Array2<f64>> {
    if spec.n == 0 {
        return Err(Error::InvalidArgument("toy sample count must be at least 1".into()));
    }
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(Error::InvalidArgument(format!("noise must be non-negative, got {}", spec.noise)));
    }
    let d = spec.family.dims();
    let starts: Vec<usize> = (0..spec.n).step_by(CHUNK).collect();
    let chunks: Vec<Vec<f64>> = starts
        .into_par_iter()
        .map(|start| {
            let end = (start + CHUNK).min(spec.n);
            let mut rng = sample_rng(spec.seed, (start / CHUNK) as u64);
            let mut out = Vec::with_capacity((end - start) * d);
            for _ in start..end {
                out.extend_from_slice(&draw(spec.family, spec.noise, &mut rng)[..d]);
            }
            out
        })
        .collect();
    let flat: Vec<f64> = chunks.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((spec.n, d), flat).expect("n rows of D coordinates"))
}

/// Generated points standardized into the unit cube and split 80/10/10.
pub fn generate_toy(spec: &ToySpec) -> Result<Dataset> {
    let raw = generate_toy_raw(spec)?;
    Dataset::from_raw(spec.family.name(), raw, SplitFractions::default(), spec.seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard normal truncated to `[-limit, limit]` by rejection.
fn truncated_normal(rng: &mut ChaCha8Rng, limit: f64) -> f64 {
    loop {
        let z = normal(rng);
        if z.abs() <= limit {
            return z;
        }
    }
}

fn draw(family: ToyFamily, noise: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    use std::f64::consts::PI;
    match family {
        // n = 3π sqrt(U), arm point (-n cos n + U(0, 0.5), n sin n + U(0, 0.5)),
        // mirrored for the second arm, divided by 3, plus N(0, noise²)
        ToyFamily::TwoSpirals => {
            let n = rng.random::<f64>().sqrt() * 540.0 * PI / 180.0;
            let mut x = -n.cos() * n + rng.random::<f64>() * 0.5;
            let mut y = n.sin() * n + rng.random::<f64>() * 0.5;
            if rng.random::<bool>() {
                x = -x;
                y = -y;
            }
            [x / 3.0 + noise * normal(rng), y / 3.0 + noise * normal(rng), 0.0]
        }
        // x1 ~ U(-2, 2); x2 picks the squares of the matching colour; both
        // scaled by 2, giving an 8x8 board on [-4, 4]^2 with uniform marginals
        ToyFamily::Checkerboard => {
            let x1 = rng.random::<f64>() * 4.0 - 2.0;
            let x2_ = rng.random::<f64>() - 2.0 * f64::from(rng.random_range(0..2u8));
            let x2 = x2_ + (x1.floor().rem_euclid(2.0));
            [2.0 * x1 + noise * normal(rng), 2.0 * x2 + noise * normal(rng), 0.0]
        }
        // four concentric circles of radius 0.75, 1.5, 2.25, 3 with equal
        // weight and uniform angle, plus N(0, noise²)
        ToyFamily::Rings => {
            let ring = rng.random_range(1..=4u8) as f64;
            let theta = rng.random::<f64>() * 2.0 * PI;
            let r = 0.75 * ring;
            [r * theta.cos() + noise * normal(rng), r * theta.sin() + noise * normal(rng), 0.0]
        }
        // (x, z) of the scikit-learn swiss roll with t = 1.5π(1 + 2U) and
        // N(0, noise²) on each coordinate, divided by 5
        ToyFamily::SwissRoll2d => {
            let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
            let x = t * t.cos() + noise * normal(rng);
            let z = t * t.sin() + noise * normal(rng);
            [x / 5.0, z / 5.0, 0.0]
        }
        // five arms; radial N(1, 0.3²), tangential N(0, 0.1²), rotated by
        // 2πc/5 + 0.25 exp(radial), scaled by 2
        ToyFamily::Pinwheel => {
            let class = rng.random_range(0..5u8) as f64;
            let f0 = 1.0 + 0.3 * normal(rng);
            let f1 = 0.1 * normal(rng);
            let angle = 2.0 * PI * class / 5.0 + 0.25 * f0.exp();
            let (s, c) = angle.sin_cos();
            [
                2.0 * (f0 * c - f1 * s) + noise * normal(rng),
                2.0 * (f0 * s + f1 * c) + noise * normal(rng),
                0.0,
            ]
        }
        // binary branching tree: trunk from (0, -1) of length 1 pointing up,
        // each level splits ±π/6 with length factor 0.7, six levels; a point
        // is uniform along the total branch length, plus N(0, noise²)
        ToyFamily::Tree => {
            const LEVELS: i32 = 6;
            const SHRINK: f64 = 0.7;
            // level l holds 2^l segments of length 0.7^l
            let weights: Vec<f64> = (0..LEVELS).map(|l| (2.0 * SHRINK).powi(l)).collect();
            let total: f64 = weights.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut level = 0;
            while level + 1 < LEVELS as usize && pick >= weights[level] {
                pick -= weights[level];
                level += 1;
            }
            let (mut x, mut y, mut angle, mut len) = (0.0, -1.0, PI / 2.0, 1.0);
            for _ in 0..level {
                x += len * angle.cos();
                y += len * angle.sin();
                angle += if rng.random::<bool>() { PI / 6.0 } else { -PI / 6.0 };
                len *= SHRINK;
            }
            let s = rng.random::<f64>() * len;
            [
                x + s * angle.cos() + noise * normal(rng),
                y + s * angle.sin() + noise * normal(rng),
                0.0,
            ]
        }
        // chaos game on the triangle (0,0), (1,0), (1/2, √3/2): 30 halving
        // steps from a uniform start, plus N(0, noise²)
        ToyFamily::Sierpinski => {
            let v = [(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)];
            let (mut x, mut y) = (rng.random::<f64>(), rng.random::<f64>());
            for _ in 0..30 {
                let (vx, vy) = v[rng.random_range(0..3usize)];
                x = 0.5 * (x + vx);
                y = 0.5 * (y + vy);
            }
            [x + noise * normal(rng), y + noise * normal(rng), 0.0]
        }
        // scikit-learn make_swiss_roll: t = 1.5π(1 + 2U), (t cos t, 21 U, t sin t);
        // noise defaults to scikit-learn's 0
        ToyFamily::SwissRoll3d => {
            let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
            let h = 21.0 * rng.random::<f64>();
            [
                t * t.cos() + noise * normal(rng),
                h + noise * normal(rng),
                t * t.sin() + noise * normal(rng),
            ]
        }
        // two interlocked unit circles, one in the xy-plane about the origin
        // and one in the xz-plane about (1, 0, 0); offsets along the in-plane
        // radius and the plane normal are N(0, noise²) truncated at ±2.5,
        // so no point is farther than 2.5√2 noise from its circle
        ToyFamily::Circles3d => {
            let theta = rng.random::<f64>() * 2.0 * PI;
            let r = 1.0 + noise * truncated_normal(rng, 2.5);
            let h = noise * truncated_normal(rng, 2.5);
            let (s, c) = theta.sin_cos();
            if rng.random::<bool>() {
                [r * c, r * s, h]
            } else {
                [1.0 + r * c, h, r * s]
            }
        }
        // scikit-learn make_s_curve: t = 3π(U - 1/2),
        // (sin t, 2U, sign(t)(cos t - 1)); noise defaults to scikit-learn's 0
        ToyFamily::SCurve => {
            let t = 3.0 * PI * (rng.random::<f64>() - 0.5);
            let h = 2.0 * rng.random::<f64>();
            [
                t.sin() + noise * normal(rng),
                h + noise * normal(rng),
                t.signum() * (t.cos() - 1.0) + noise * normal(rng),
            ]
        }
    }
}

/// Distance of a raw `circles3d` point to the nearer of its two circles.
pub fn circles3d_deviation(p: &[f64]) -> f64 {
    let a = {
        let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
        ((rho - 1.0).powi(2) + p[2] * p[2]).sqrt()
    };
    let b = {
        let dx = p[0] - 1.0;
        let rho = (dx * dx + p[2] * p[2]).sqrt();
        ((rho - 1.0).powi(2) + p[1] * p[1]).sqrt()
    };
    a.min(b)
}
