//! Small dense kernels for the batched jet propagation.
//!
//! Accumulation-order contract: every output element of [`matmul_rows`] is
//! produced by a fold over `k` in ascending index order using `mul_add`,
//! starting from the init value. The scalar single-point evaluation path
//! uses the same order, so batched and pointwise results are bit-identical,
//! and results do not depend on batch size or thread count.

use crate::scalar::Scalar;

const COL_TILE: usize = 8;

pub(crate) enum Init<'a, S> {
    Zero,
    /// Per-output-row initial value (bias column).
    Bias(&'a [S]),
}

/// `out[j, 0..n] = init_j + sum_k w[j,k] * b[k, 0..n]` for `j in 0..m`.
///
/// `w` is row-major `m x k`; `out` and `b` are indexed with explicit row
/// strides so channel blocks of a wider buffer can be addressed in place.
pub(crate) fn matmul_rows<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    w: &[S],
    out: &mut [S],
    rs_out: usize,
    b: &[S],
    rs_b: usize,
    init: Init<'_, S>,
    pack: &mut Vec<S>,
) {
    debug_assert!(w.len() >= m * k);
    pack.clear();
    pack.resize(k * COL_TILE, S::zero());

    let mut col = 0;
    while col + COL_TILE <= n {
        // Pack the k x COL_TILE slab so the inner loop reads contiguously.
        for kk in 0..k {
            let src = &b[kk * rs_b + col..kk * rs_b + col + COL_TILE];
            pack[kk * COL_TILE..(kk + 1) * COL_TILE].copy_from_slice(src);
        }
        for j in 0..m {
            let row = &w[j * k..(j + 1) * k];
            let start = match &init {
                Init::Zero => S::zero(),
                Init::Bias(bias) => bias[j],
            };
            let mut acc0 = [start; 4];
            let mut acc1 = [start; 4];
            // Only lane 0 carries the init; the other lanes are independent
            // columns and start from the same init value as well.
            for (kk, &wv) in row.iter().enumerate() {
                let p = &pack[kk * COL_TILE..kk * COL_TILE + COL_TILE];
                for l in 0..4 {
                    acc0[l] = wv.mul_add(p[l], acc0[l]);
                }
                for l in 0..4 {
                    acc1[l] = wv.mul_add(p[4 + l], acc1[l]);
                }
            }
            let dst = &mut out[j * rs_out + col..j * rs_out + col + COL_TILE];
            dst[..4].copy_from_slice(&acc0);
            dst[4..].copy_from_slice(&acc1);
        }
        col += COL_TILE;
    }

    // Column tail, same per-element accumulation order.
    for c in col..n {
        for j in 0..m {
            let row = &w[j * k..(j + 1) * k];
            let mut acc = match &init {
                Init::Zero => S::zero(),
                Init::Bias(bias) => bias[j],
            };
            for (kk, &wv) in row.iter().enumerate() {
                acc = wv.mul_add(b[kk * rs_b + c], acc);
            }
            out[j * rs_out + c] = acc;
        }
    }
}

/// `grad_w[j, i] += dot(zbar[j, 0..cols], h[i, 0..cols])`.
///
/// The dot product is lane-split four ways and folded in a fixed order;
/// deterministic for given shapes.
pub(crate) fn accumulate_weight_grad<S: Scalar>(
    m: usize,
    n_in: usize,
    cols: usize,
    zbar: &[S],
    rs_z: usize,
    h: &[S],
    rs_h: usize,
    grad_w: &mut [S],
) {
    const BJ: usize = 4;
    const BI: usize = 4;
    let mut j = 0;
    while j < m {
        let jb = BJ.min(m - j);
        let mut i = 0;
        while i < n_in {
            let ib = BI.min(n_in - i);
            let mut acc = [[[S::zero(); 4]; BI]; BJ];
            let lanes = cols / 4 * 4;
            let mut c = 0;
            while c < lanes {
                for dj in 0..jb {
                    let zrow = &zbar[(j + dj) * rs_z + c..(j + dj) * rs_z + c + 4];
                    for di in 0..ib {
                        let hrow = &h[(i + di) * rs_h + c..(i + di) * rs_h + c + 4];
                        let a = &mut acc[dj][di];
                        for l in 0..4 {
                            a[l] = zrow[l].mul_add(hrow[l], a[l]);
                        }
                    }
                }
                c += 4;
            }
            for dj in 0..jb {
                for di in 0..ib {
                    let a = acc[dj][di];
                    let mut s = a[0] + a[1] + a[2] + a[3];
                    for c in lanes..cols {
                        s = zbar[(j + dj) * rs_z + c].mul_add(h[(i + di) * rs_h + c], s);
                    }
                    grad_w[(j + dj) * n_in + (i + di)] += s;
                }
            }
            i += ib;
        }
        j += jb;
    }
}

/// `grad_b[j] += sum(zbar[j, 0..cols])`, lane-split with a fixed fold order.
pub(crate) fn accumulate_bias_grad<S: Scalar>(
    m: usize,
    cols: usize,
    zbar: &[S],
    rs_z: usize,
    grad_b: &mut [S],
) {
    for j in 0..m {
        let row = &zbar[j * rs_z..j * rs_z + cols];
        let lanes = cols / 4 * 4;
        let mut acc = [S::zero(); 4];
        let mut c = 0;
        while c < lanes {
            for l in 0..4 {
                acc[l] += row[c + l];
            }
            c += 4;
        }
        let mut s = acc[0] + acc[1] + acc[2] + acc[3];
        for &v in &row[lanes..] {
            s += v;
        }
        grad_b[j] += s;
    }
}

/// Transpose a row-major `m x k` matrix into `k x m`.
pub(crate) fn transpose_into<S: Scalar>(m: usize, k: usize, w: &[S], out: &mut Vec<S>) {
    out.clear();
    out.resize(m * k, S::zero());
    for j in 0..m {
        for i in 0..k {
            out[i * m + j] = w[j * k + i];
        }
    }
}
