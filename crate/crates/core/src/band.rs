//! Symmetric matrices with bandwidth two (five diagonals).

use ndarray::Array2;

/// Symmetric `n x n` matrix whose entries vanish for `|k - l| > 2`.
///
/// `diags[o][k]` holds entry `(k, k + o)` for offset `o` in `0..=2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    diags: [Vec<f64>; 3],
}

impl BandMatrix {
    pub const BANDWIDTH: usize = 2;

    pub fn zeros(n: usize) -> Self {
        BandMatrix {
            n,
            diags: [
                vec![0.0; n],
                vec![0.0; n.saturating_sub(1)],
                vec![0.0; n.saturating_sub(2)],
            ],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        let (lo, hi) = if k <= l { (k, l) } else { (l, k) };
        let offset = hi - lo;
        if offset > Self::BANDWIDTH || hi >= self.n {
            0.0
        } else {
            self.diags[offset][lo]
        }
    }

    /// Adds `value` to entry `(k, l)` (and its mirror). Panics outside the band.
    pub fn add(&mut self, k: usize, l: usize, value: f64) {
        let (lo, hi) = if k <= l { (k, l) } else { (l, k) };
        self.diags[hi - lo][lo] += value;
    }

    pub fn set(&mut self, k: usize, l: usize, value: f64) {
        let (lo, hi) = if k <= l { (k, l) } else { (l, k) };
        self.diags[hi - lo][lo] = value;
    }

    pub fn scale(&mut self, factor: f64) {
        for d in &mut self.diags {
            d.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Frobenius inner product `sum_{k,l} A[k,l] B[k,l]` over the full symmetric matrices.
    pub fn frobenius_dot(&self, other: &BandMatrix) -> f64 {
        assert_eq!(self.n, other.n, "band matrices differ in size");
        let mut total = 0.0;
        for (o, (a, b)) in self.diags.iter().zip(other.diags.iter()).enumerate() {
            let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            total += if o == 0 { s } else { 2.0 * s };
        }
        total
    }

    /// Sum of all entries of the full symmetric matrix.
    pub fn total(&self) -> f64 {
        self.diags
            .iter()
            .enumerate()
            .map(|(o, d)| {
                let s: f64 = d.iter().sum();
                if o == 0 {
                    s
                } else {
                    2.0 * s
                }
            })
            .sum()
    }

    /// Entries `(k, l)` with `k <= l` inside the band.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=Self::BANDWIDTH).flat_map(move |o| {
            self.diags[o]
                .iter()
                .enumerate()
                .map(move |(k, &v)| (k, k + o, v))
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for (k, l, v) in self.upper_entries() {
            m[[k, l]] = v;
            m[[l, k]] = v;
        }
        m
    }
}
