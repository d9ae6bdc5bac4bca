//! Small dense helpers shared by the contraction kernels.

use ndarray::{Array2, ArrayView2, Axis};

pub fn trace(m: &ArrayView2<f64>) -> f64 {
    m.diag().sum()
}

/// Kronecker product with row index `(i, k) -> i * b.nrows() + k`.
pub fn kron(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == 0.0 {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.scaled_add(s, b);
        }
    }
    out
}

/// Reorders a matrix indexed `[(a, b), (a', b')]` (all four sizes given) into
/// `[(a, a'), (b, b')]`.
pub fn interleave_pairs(f: Array2<f64>, ra: usize, rb: usize, ra2: usize, rb2: usize) -> Array2<f64> {
    let four = f
        .into_shape_with_order((ra, rb, ra2, rb2))
        .expect("shape matches by construction");
    four.permuted_axes([0, 2, 1, 3])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((ra * ra2, rb * rb2))
        .expect("standard layout reshape")
}

/// Frobenius inner product of two equally shaped matrices.
pub fn frobenius(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Trace of a product without forming it: `Tr(A B) = sum_ij A[i,j] B[j,i]`.
pub fn trace_of_product(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.axis_iter(Axis(0)).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            s += v * b[[j, i]];
        }
    }
    s
}
