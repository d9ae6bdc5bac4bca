//! Uniform quadratic B-splines on `[0, 1]`.
//!
//! A grid with `K` basis functions uses `K - 2` equal intervals of width
//! `h = 1 / (K - 2)` and the uniform knot sequence `t_j = (j - 2) h`,
//! `j = 0..=K`, which extends two knots beyond each end of the unit interval.
//! On every interval `[i h, (i + 1) h]` exactly the bases `i, i + 1, i + 2`
//! are nonzero and they sum to one, so the partition of unity holds on all
//! of `[0, 1]`.
//!
//! Basis values are obtained once from the Cox–de Boor recursion and stored
//! as the three local quadratics shared by every interval. All integrals use
//! Gauss–Legendre rules that are exact for the polynomial degree involved.

use crate::band::BandMatrix;
use crate::error::{Error, Result};

/// Two-point Gauss–Legendre rule on `[0, 1]` (exact to degree 3).
const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

/// Three-point Gauss–Legendre rule on `[0, 1]` (exact to degree 5).
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 4.0 / 9.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Value of the `k`-th B-spline of the given degree over `knots` at `x`,
/// by the Cox–de Boor recursion with half-open support intervals.
pub fn cox_de_boor(knots: &[f64], k: usize, degree: usize, x: f64) -> f64 {
    if degree == 0 {
        return if knots[k] <= x && x < knots[k + 1] { 1.0 } else { 0.0 };
    }
    let mut value = 0.0;
    let left_span = knots[k + degree] - knots[k];
    if left_span > 0.0 {
        value += (x - knots[k]) / left_span * cox_de_boor(knots, k, degree - 1, x);
    }
    let right_span = knots[k + degree + 1] - knots[k + 1];
    if right_span > 0.0 {
        value += (knots[k + degree + 1] - x) / right_span * cox_de_boor(knots, k + 1, degree - 1, x);
    }
    value
}

/// The 1-D basis system of one data dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisGrid {
    k_basis: usize,
    knot_step: f64,
    knots: Vec<f64>,
    /// `local[r] = [c0, c1, c2]`: the piece of basis `i + r` on interval `i`
    /// as a quadratic in the local coordinate `t in [0, 1]`.
    local: [[f64; 3]; 3],
    /// `h * int_0^1 p_r(t) dt` for each local role.
    role_integral: [f64; 3],
    /// `h * int_0^1 p_r(t) p_s(t) dt`.
    role_pair_integral: [[f64; 3]; 3],
}

impl BasisGrid {
    pub fn new(k_basis: usize) -> Result<Self> {
        if k_basis < 4 {
            return Err(Error::InvalidBasis(format!(
                "need at least 4 basis functions, got {k_basis}"
            )));
        }
        let intervals = k_basis - 2;
        let h = 1.0 / intervals as f64;
        let knots: Vec<f64> = (0..k_basis + 3).map(|j| (j as f64 - 2.0) * h).collect();

        // Fit the three quadratics on the first interval through Cox–de Boor
        // values at t = 0, 1/4, 1/2 (all inside the half-open interval).
        let mut local = [[0.0; 3]; 3];
        for (role, coeffs) in local.iter_mut().enumerate() {
            let v0 = cox_de_boor(&knots, role, 2, 0.0);
            let va = cox_de_boor(&knots, role, 2, 0.25 * h);
            let vb = cox_de_boor(&knots, role, 2, 0.5 * h);
            coeffs[0] = v0;
            coeffs[1] = -6.0 * v0 + 8.0 * va - 2.0 * vb;
            coeffs[2] = 8.0 * (vb - 2.0 * va + v0);
        }

        let mut role_integral = [0.0; 3];
        for (r, acc) in role_integral.iter_mut().enumerate() {
            *acc = h * GAUSS2.iter().map(|&(t, w)| w * poly(&local[r], t)).sum::<f64>();
        }
        let mut role_pair_integral = [[0.0; 3]; 3];
        for r in 0..3 {
            for s in 0..3 {
                role_pair_integral[r][s] = h * GAUSS3
                    .iter()
                    .map(|&(t, w)| w * poly(&local[r], t) * poly(&local[s], t))
                    .sum::<f64>();
            }
        }

        Ok(BasisGrid {
            k_basis,
            knot_step: h,
            knots,
            local,
            role_integral,
            role_pair_integral,
        })
    }

    pub fn k_basis(&self) -> usize {
        self.k_basis
    }

    pub fn knot_step(&self) -> f64 {
        self.knot_step
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn intervals(&self) -> usize {
        self.k_basis - 2
    }

    /// Interval index and local coordinate of `x`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { value: x });
        }
        let s = x / self.knot_step;
        let i = (s.floor() as usize).min(self.intervals() - 1);
        Ok((i, s - i as f64))
    }

    /// Local quadratic of role `r` (`0..3`) evaluated at `t`.
    pub fn local_value(&self, role: usize, t: f64) -> f64 {
        poly(&self.local[role], t).max(0.0)
    }

    /// First active basis index and the values of the three active bases.
    pub fn eval_active(&self, x: f64) -> Result<(usize, [f64; 3])> {
        let (i, t) = self.locate(x)?;
        Ok((i, self.local_values(t)))
    }

    pub(crate) fn local_values(&self, t: f64) -> [f64; 3] {
        // the fitted coefficients carry rounding; roots at t = 0, 1 can dip below zero
        [
            poly(&self.local[0], t).max(0.0),
            poly(&self.local[1], t).max(0.0),
            poly(&self.local[2], t).max(0.0),
        ]
    }

    /// All `K` basis values at `x` (mostly zero).
    pub fn eval_all(&self, x: f64) -> Result<Vec<f64>> {
        let (first, vals) = self.eval_active(x)?;
        let mut out = vec![0.0; self.k_basis];
        out[first..first + 3].copy_from_slice(&vals);
        Ok(out)
    }

    /// `int_0^x f_k` for every basis `k`.
    pub fn integral_to(&self, x: f64) -> Result<Vec<f64>> {
        let (i, t) = self.locate(x)?;
        let mut out = vec![0.0; self.k_basis];
        for j in 0..i {
            for r in 0..3 {
                out[j + r] += self.role_integral[r];
            }
        }
        let partial = self.partial_role_integral(t);
        for r in 0..3 {
            out[i + r] += partial[r];
        }
        Ok(out)
    }

    /// `h * int_0^t p_r` for the three local roles.
    pub fn partial_role_integral(&self, t: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        if t <= 0.0 {
            return out;
        }
        for &(node, w) in &GAUSS2 {
            let s = node * t;
            for (r, acc) in out.iter_mut().enumerate() {
                *acc += w * poly(&self.local[r], s);
            }
        }
        out.iter_mut().for_each(|v| *v *= t * self.knot_step);
        out
    }

    /// `h * int_0^t p_r p_s` for the local roles (a full interval at `t = 1`).
    pub fn partial_pair_integral(&self, t: f64) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        if t <= 0.0 {
            return out;
        }
        if t >= 1.0 {
            return self.role_pair_integral;
        }
        for &(node, w) in &GAUSS3 {
            let vals = self.local_values(node * t);
            for r in 0..3 {
                for s in 0..3 {
                    out[r][s] += w * vals[r] * vals[s];
                }
            }
        }
        let scale = t * self.knot_step;
        out.iter_mut().flatten().for_each(|v| *v *= scale);
        out
    }

    /// Pair integrals of the three roles over one full interval.
    pub fn interval_pair_integral(&self) -> &[[f64; 3]; 3] {
        &self.role_pair_integral
    }

    /// `int_0^x f_k f_l` as a banded symmetric matrix.
    pub fn pair_integral_to(&self, x: f64) -> Result<BandMatrix> {
        let (i, t) = self.locate(x)?;
        let mut out = BandMatrix::zeros(self.k_basis);
        for j in 0..i {
            add_interval(&mut out, j, &self.role_pair_integral);
        }
        add_interval(&mut out, i, &self.partial_pair_integral(t));
        Ok(out)
    }

    /// Gram matrix `int_0^1 f_k f_l`.
    pub fn mass_matrix(&self) -> BandMatrix {
        let mut out = BandMatrix::zeros(self.k_basis);
        for j in 0..self.intervals() {
            add_interval(&mut out, j, &self.role_pair_integral);
        }
        out
    }
}

fn add_interval(out: &mut BandMatrix, first: usize, block: &[[f64; 3]; 3]) {
    for r in 0..3 {
        for s in r..3 {
            out.add(first + r, first + s, block[r][s]);
        }
    }
}

#[inline]
fn poly(c: &[f64; 3], t: f64) -> f64 {
    c[0] + t * (c[1] + t * c[2])
}
