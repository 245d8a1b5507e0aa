//! Dense row-major kernels. Every output row is produced by one thread in a
//! fixed order, so results do not depend on the worker count.

use rayon::prelude::*;

const PAR_THRESHOLD: usize = 1 << 15;

/// `a (m×k) · b (k×n)`.
pub fn matmul(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    let row = |(r, o): (usize, &mut [f64])| {
        for (p, &av) in a[r * k..(r + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (ov, bv) in o.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *ov += av * bv;
            }
        }
    };
    if m * n * k >= PAR_THRESHOLD {
        out.par_chunks_mut(n.max(1)).enumerate().for_each(row);
    } else {
        out.chunks_mut(n.max(1)).enumerate().for_each(row);
    }
    out
}

/// `aᵀ · b` with `a (k×m)`, `b (k×n)`.
pub fn matmul_tn(a: &[f64], k: usize, m: usize, b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    let row = |(r, o): (usize, &mut [f64])| {
        for p in 0..k {
            let av = a[p * m + r];
            if av == 0.0 {
                continue;
            }
            for (ov, bv) in o.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *ov += av * bv;
            }
        }
    };
    if m * n * k >= PAR_THRESHOLD {
        out.par_chunks_mut(n.max(1)).enumerate().for_each(row);
    } else {
        out.chunks_mut(n.max(1)).enumerate().for_each(row);
    }
    out
}

/// `a · bᵀ` with `a (m×k)`, `b (n×k)`.
pub fn matmul_nt(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut out = vec![0.0; m * n];
    let row = |(r, o): (usize, &mut [f64])| {
        let ar = &a[r * k..(r + 1) * k];
        for (c, ov) in o.iter_mut().enumerate() {
            *ov = ar.iter().zip(&b[c * k..(c + 1) * k]).map(|(x, y)| x * y).sum();
        }
    };
    if m * n * k >= PAR_THRESHOLD {
        out.par_chunks_mut(n.max(1)).enumerate().for_each(row);
    } else {
        out.chunks_mut(n.max(1)).enumerate().for_each(row);
    }
    out
}

pub fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn add_row_bias(x: &mut [f64], bias: &[f64]) {
    for row in x.chunks_mut(bias.len()) {
        add_assign(row, bias);
    }
}

pub fn column_sums(x: &[f64], cols: usize) -> Vec<f64> {
    let mut s = vec![0.0; cols];
    for row in x.chunks(cols) {
        add_assign(&mut s, row);
    }
    s
}

pub fn softmax_rows(x: &mut [f64], cols: usize) {
    for row in x.chunks_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Columns `[c0, c0+w)` of an `m × cols` matrix.
pub fn take_cols(x: &[f64], cols: usize, c0: usize, w: usize) -> Vec<f64> {
    x.chunks(cols).flat_map(|r| r[c0..c0 + w].iter().copied()).collect()
}

pub fn put_cols(dst: &mut [f64], cols: usize, c0: usize, src: &[f64], w: usize) {
    for (d, s) in dst.chunks_mut(cols).zip(src.chunks(w)) {
        d[c0..c0 + w].copy_from_slice(s);
    }
}
