//! Dense kernels built on one register-blocked matrix product. Conv inputs
//! are read as overlapping rows of a strided view, so the forward pass needs
//! no im2col copy.

use super::Float;

const MR: usize = 4;
const NR: usize = 16;

/// `C[m x n] (+)= A[m x k] B[k x n]` with row strides `lda`, `ldb`, `ldc` and
/// unit column strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<S: Float>(
    m: usize,
    k: usize,
    n: usize,
    a: &[S],
    lda: usize,
    b: &[S],
    ldb: usize,
    c: &mut [S],
    ldc: usize,
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * lda + k <= a.len(), "gemm: A out of bounds");
    assert!(k == 0 || (k - 1) * ldb + n <= b.len(), "gemm: B out of bounds");
    assert!((m - 1) * ldc + n <= c.len(), "gemm: C out of bounds");
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were just detected.
            unsafe { gemm_avx2(m, k, n, a, lda, b, ldb, c, ldc, accumulate) };
            return;
        }
    }
    gemm_body::<S, false>(m, k, n, a, lda, b, ldb, c, ldc, accumulate);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_avx2<S: Float>(
    m: usize,
    k: usize,
    n: usize,
    a: &[S],
    lda: usize,
    b: &[S],
    ldb: usize,
    c: &mut [S],
    ldc: usize,
    accumulate: bool,
) {
    gemm_body::<S, true>(m, k, n, a, lda, b, ldb, c, ldc, accumulate);
}

#[inline(always)]
fn madd<S: Float, const FMA: bool>(a: S, b: S, acc: S) -> S {
    if FMA {
        a.mul_add(b, acc)
    } else {
        acc + a * b
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn gemm_body<S: Float, const FMA: bool>(
    m: usize,
    k: usize,
    n: usize,
    a: &[S],
    lda: usize,
    b: &[S],
    ldb: usize,
    c: &mut [S],
    ldc: usize,
    accumulate: bool,
) {
    let mut i = 0;
    while i < m {
        let mr = MR.min(m - i);
        let mut j = 0;
        while j < n {
            let nr = NR.min(n - j);
            if mr == MR && nr == NR {
                micro_full::<S, FMA>(k, &a[i * lda..], lda, &b[j..], ldb, &mut c[i * ldc + j..], ldc, accumulate);
            } else {
                micro_edge::<S, FMA>(mr, nr, k, &a[i * lda..], lda, &b[j..], ldb, &mut c[i * ldc + j..], ldc, accumulate);
            }
            j += NR;
        }
        i += MR;
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn micro_full<S: Float, const FMA: bool>(
    k: usize,
    a: &[S],
    lda: usize,
    b: &[S],
    ldb: usize,
    c: &mut [S],
    ldc: usize,
    accumulate: bool,
) {
    let rows: [&[S]; MR] = std::array::from_fn(|r| &a[r * lda..r * lda + k]);
    let mut acc = [[S::zero(); NR]; MR];
    for p in 0..k {
        let brow: &[S; NR] = b[p * ldb..p * ldb + NR].try_into().unwrap();
        let col: [S; MR] = std::array::from_fn(|r| rows[r][p]);
        for r in 0..MR {
            let av = col[r];
            for q in 0..NR {
                acc[r][q] = madd::<S, FMA>(av, brow[q], acc[r][q]);
            }
        }
    }
    for r in 0..MR {
        let out: &mut [S; NR] = (&mut c[r * ldc..r * ldc + NR]).try_into().unwrap();
        for q in 0..NR {
            out[q] = if accumulate { out[q] + acc[r][q] } else { acc[r][q] };
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn micro_edge<S: Float, const FMA: bool>(
    mr: usize,
    nr: usize,
    k: usize,
    a: &[S],
    lda: usize,
    b: &[S],
    ldb: usize,
    c: &mut [S],
    ldc: usize,
    accumulate: bool,
) {
    let mut acc = [[S::zero(); NR]; MR];
    for p in 0..k {
        let brow = &b[p * ldb..p * ldb + nr];
        for r in 0..mr {
            let av = a[r * lda + p];
            for q in 0..nr {
                acc[r][q] = madd::<S, FMA>(av, brow[q], acc[r][q]);
            }
        }
    }
    for r in 0..mr {
        for q in 0..nr {
            let o = &mut c[r * ldc + q];
            *o = if accumulate { *o + acc[r][q] } else { acc[r][q] };
        }
    }
}

/// Row-major `[rows, cols]` to `[cols, rows]`.
pub(crate) fn transpose<S: Float>(x: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut t = vec![S::zero(); x.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = x[r * cols + c];
        }
    }
    t
}

/// Kernel `[C_out, C_in, K]` to rows `[C_out][K * C_in]` matching the
/// layout of an input patch.
pub(crate) fn kernel_to_patch_rows<S: Float>(kernel: &[S], c_out: usize, c_in: usize, k: usize) -> Vec<S> {
    let mut rows = vec![S::zero(); kernel.len()];
    for o in 0..c_out {
        for c in 0..c_in {
            for kk in 0..k {
                rows[o * k * c_in + kk * c_in + c] = kernel[o * c_in * k + c * k + kk];
            }
        }
    }
    rows
}

pub(crate) fn patch_rows_to_kernel<S: Float>(rows: &[S], c_out: usize, c_in: usize, k: usize) -> Vec<S> {
    let mut kernel = vec![S::zero(); rows.len()];
    for o in 0..c_out {
        for c in 0..c_in {
            for kk in 0..k {
                kernel[o * c_in * k + c * k + kk] = rows[o * k * c_in + kk * c_in + c];
            }
        }
    }
    kernel
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub t_in: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
}

impl ConvDims {
    pub fn t_out(&self) -> usize {
        (self.t_in - self.k) / self.stride + 1
    }
}

pub(crate) fn conv1d_forward<S: Float>(input: &[S], kernel: &[S], bias: &[S], d: ConvDims) -> Vec<S> {
    let (t_out, width, item) = (d.t_out(), d.k * d.c_in, d.t_in * d.c_in);
    // [K*C_in, C_out]
    let wt = transpose(&kernel_to_patch_rows(kernel, d.c_out, d.c_in, d.k), d.c_out, width);
    let mut out = Vec::with_capacity(d.batch * t_out * d.c_out);
    for _ in 0..d.batch * t_out {
        out.extend_from_slice(bias);
    }
    for b in 0..d.batch {
        let x = &input[b * item..(b + 1) * item];
        let y = &mut out[b * t_out * d.c_out..(b + 1) * t_out * d.c_out];
        gemm(t_out, width, d.c_out, x, d.stride * d.c_in, &wt, d.c_out, y, d.c_out, true);
    }
    out
}

/// Gradients of a conv layer. `grad_input` is skipped when not needed.
pub(crate) fn conv1d_backward<S: Float>(
    input: &[S],
    kernel: &[S],
    grad_out: &[S],
    d: ConvDims,
    want_input: bool,
) -> (Option<Vec<S>>, Vec<S>, Vec<S>) {
    let (t_out, width, item) = (d.t_out(), d.k * d.c_in, d.t_in * d.c_in);
    let rows = kernel_to_patch_rows(kernel, d.c_out, d.c_in, d.k);
    let mut grad_rows = vec![S::zero(); rows.len()];
    let mut grad_bias = vec![S::zero(); d.c_out];
    let mut grad_input = want_input.then(|| vec![S::zero(); input.len()]);
    let mut grad_patches = vec![S::zero(); if want_input { t_out * width } else { 0 }];
    for b in 0..d.batch {
        let x = &input[b * item..(b + 1) * item];
        let g = &grad_out[b * t_out * d.c_out..(b + 1) * t_out * d.c_out];
        for row in g.chunks_exact(d.c_out) {
            for (gb, &v) in grad_bias.iter_mut().zip(row) {
                *gb += v;
            }
        }
        // [C_out, T_out] x patches [T_out, K*C_in]
        let gt = transpose(g, t_out, d.c_out);
        gemm(d.c_out, t_out, width, &gt, t_out, x, d.stride * d.c_in, &mut grad_rows, width, true);
        if let Some(gi) = grad_input.as_mut() {
            gemm(t_out, d.c_out, width, g, d.c_out, &rows, width, &mut grad_patches, width, false);
            let gx = &mut gi[b * item..(b + 1) * item];
            for (t, p) in grad_patches.chunks_exact(width).enumerate() {
                let off = t * d.stride * d.c_in;
                for (dst, &v) in gx[off..off + width].iter_mut().zip(p) {
                    *dst += v;
                }
            }
        }
    }
    let grad_kernel = patch_rows_to_kernel(&grad_rows, d.c_out, d.c_in, d.k);
    (grad_input, grad_kernel, grad_bias)
}

pub(crate) fn linear_forward<S: Float>(
    input: &[S],
    weight: &[S],
    bias: &[S],
    batch: usize,
    n_in: usize,
    n_out: usize,
) -> Vec<S> {
    let mut out = Vec::with_capacity(batch * n_out);
    for _ in 0..batch {
        out.extend_from_slice(bias);
    }
    let wt = transpose(weight, n_out, n_in);
    gemm(batch, n_in, n_out, input, n_in, &wt, n_out, &mut out, n_out, true);
    out
}

pub(crate) fn linear_backward<S: Float>(
    input: &[S],
    weight: &[S],
    grad_out: &[S],
    batch: usize,
    n_in: usize,
    n_out: usize,
    want_input: bool,
) -> (Option<Vec<S>>, Vec<S>, Vec<S>) {
    let mut grad_b = vec![S::zero(); n_out];
    for row in grad_out.chunks_exact(n_out) {
        for (gb, &v) in grad_b.iter_mut().zip(row) {
            *gb += v;
        }
    }
    let gt = transpose(grad_out, batch, n_out);
    let mut grad_w = vec![S::zero(); weight.len()];
    gemm(n_out, batch, n_in, &gt, batch, input, n_in, &mut grad_w, n_in, false);
    let grad_in = want_input.then(|| {
        let mut gi = vec![S::zero(); input.len()];
        gemm(batch, n_out, n_in, grad_out, n_out, weight, n_in, &mut gi, n_in, false);
        gi
    });
    (grad_in, grad_w, grad_b)
}
