//! Dense linear-algebra kernels used by the layers.
//!
//! Every routine has a fixed operation order independent of the SIMD width it
//! is compiled for, so results are bit-identical whichever path is taken. The
//! wide paths are selected at runtime on x86-64.

use std::sync::atomic::{AtomicU8, Ordering};

use crate::scalar::Scalar;

const LEVEL_UNKNOWN: u8 = 0;
const LEVEL_SCALAR: u8 = 1;
const LEVEL_AVX2: u8 = 2;
const LEVEL_AVX512: u8 = 3;

static LEVEL: AtomicU8 = AtomicU8::new(LEVEL_UNKNOWN);

fn detect() -> u8 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::env::var_os("DQN_NO_SIMD").is_some() {
            return LEVEL_SCALAR;
        }
        if std::is_x86_feature_detected!("avx512f") {
            return LEVEL_AVX512;
        }
        if std::is_x86_feature_detected!("avx2") {
            return LEVEL_AVX2;
        }
    }
    LEVEL_SCALAR
}

#[inline]
fn level() -> u8 {
    match LEVEL.load(Ordering::Relaxed) {
        LEVEL_UNKNOWN => {
            let l = detect();
            LEVEL.store(l, Ordering::Relaxed);
            l
        }
        l => l,
    }
}

/// Forces the portable path (`false`) or restores runtime detection (`true`).
pub fn set_simd_enabled(enabled: bool) {
    LEVEL.store(if enabled { detect() } else { LEVEL_SCALAR }, Ordering::Relaxed);
}

/// Name of the instruction set the kernels dispatch to.
pub fn simd_level_name() -> &'static str {
    match level() {
        LEVEL_AVX512 => "avx512",
        LEVEL_AVX2 => "avx2",
        _ => "portable",
    }
}

macro_rules! multiversion {
    ($(#[$meta:meta])* pub fn $name:ident<F: Scalar>($($arg:ident : $ty:ty),* $(,)?) $body:block) => {
        $(#[$meta])*
        #[allow(clippy::too_many_arguments)]
        pub fn $name<F: Scalar>($($arg: $ty),*) {
            #[inline(always)]
            #[allow(clippy::too_many_arguments)]
            fn body<F: Scalar>($($arg: $ty),*) $body

            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx512f,avx2")]
                #[allow(clippy::too_many_arguments)]
                unsafe fn wide512<F: Scalar>($($arg: $ty),*) {
                    body($($arg),*)
                }
                #[target_feature(enable = "avx2")]
                #[allow(clippy::too_many_arguments)]
                unsafe fn wide256<F: Scalar>($($arg: $ty),*) {
                    body($($arg),*)
                }
                match level() {
                    // SAFETY: the CPU feature was detected at runtime.
                    LEVEL_AVX512 => return unsafe { wide512($($arg),*) },
                    LEVEL_AVX2 => return unsafe { wide256($($arg),*) },
                    _ => {}
                }
            }
            body($($arg),*)
        }
    };
}

const LANES: usize = 16;
const COL_BLOCK: usize = 512;

#[inline(always)]
fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline(always)]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x: &[F; LANES] = x.try_into().unwrap();
        let y: &[F; LANES] = y.try_into().unwrap();
        for j in 0..LANES {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = F::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    // fixed pairwise reduction
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for j in 0..width {
            acc[j] = acc[j] + acc[j + width];
        }
    }
    acc[0] + tail
}

multiversion! {
    /// `C[m x n] (+)= A[m x k] * B[k x n]`, all row-major with the given leading dimensions.
    pub fn gemm_nn<F: Scalar>(
        m: usize, k: usize, n: usize,
        a: &[F], lda: usize,
        b: &[F], ldb: usize,
        c: &mut [F], ldc: usize,
        accumulate: bool,
    ) {
        if !accumulate {
            for i in 0..m {
                c[i * ldc..i * ldc + n].fill(F::zero());
            }
        }
        let mut j0 = 0;
        while j0 < n {
            let j1 = (j0 + COL_BLOCK).min(n);
            for i in 0..m {
                let crow = &mut c[i * ldc + j0..i * ldc + j1];
                let arow = &a[i * lda..i * lda + k];
                for (p, &aip) in arow.iter().enumerate() {
                    if aip != F::zero() {
                        axpy(aip, &b[p * ldb + j0..p * ldb + j1], crow);
                    }
                }
            }
            j0 = j1;
        }
    }
}

multiversion! {
    /// `C[m x n] (+)= A[m x k] * B[n x k]^T`.
    pub fn gemm_nt<F: Scalar>(
        m: usize, k: usize, n: usize,
        a: &[F], lda: usize,
        b: &[F], ldb: usize,
        c: &mut [F], ldc: usize,
        accumulate: bool,
    ) {
        for i in 0..m {
            let arow = &a[i * lda..i * lda + k];
            for j in 0..n {
                let v = dot(arow, &b[j * ldb..j * ldb + k]);
                let cij = &mut c[i * ldc + j];
                if accumulate {
                    *cij += v;
                } else {
                    *cij = v;
                }
            }
        }
    }
}

multiversion! {
    /// `C[m x n] (+)= A[k x m]^T * B[k x n]`.
    pub fn gemm_tn<F: Scalar>(
        m: usize, k: usize, n: usize,
        a: &[F], lda: usize,
        b: &[F], ldb: usize,
        c: &mut [F], ldc: usize,
        accumulate: bool,
    ) {
        if !accumulate {
            for i in 0..m {
                c[i * ldc..i * ldc + n].fill(F::zero());
            }
        }
        let mut j0 = 0;
        while j0 < n {
            let j1 = (j0 + COL_BLOCK).min(n);
            for p in 0..k {
                let brow = &b[p * ldb + j0..p * ldb + j1];
                for i in 0..m {
                    let api = a[p * lda + i];
                    if api != F::zero() {
                        axpy(api, brow, &mut c[i * ldc + j0..i * ldc + j1]);
                    }
                }
            }
            j0 = j1;
        }
    }
}

multiversion! {
    /// `y = max(x, 0)`.
    pub fn relu_forward<F: Scalar>(x: &[F], y: &mut [F]) {
        for (o, &v) in y.iter_mut().zip(x) {
            *o = if v > F::zero() { v } else { F::zero() };
        }
    }
}

multiversion! {
    /// `dx = dy` where the ReLU output is positive, else 0.
    pub fn relu_backward<F: Scalar>(y: &[F], dy: &[F], dx: &mut [F]) {
        for ((o, &g), &v) in dx.iter_mut().zip(dy).zip(y) {
            *o = if v > F::zero() { g } else { F::zero() };
        }
    }
}

/// Sum of each row of an `m x n` row-major matrix.
pub fn row_sums<F: Scalar>(m: usize, n: usize, a: &[F], out: &mut [F]) {
    for i in 0..m {
        out[i] = dot_ones(&a[i * n..(i + 1) * n]);
    }
}

fn dot_ones<F: Scalar>(a: &[F]) -> F {
    let mut acc = [F::zero(); LANES];
    let mut chunks = a.chunks_exact(LANES);
    for x in &mut chunks {
        for j in 0..LANES {
            acc[j] += x[j];
        }
    }
    let tail: F = chunks.remainder().iter().fold(F::zero(), |s, &v| s + v);
    acc.iter().fold(F::zero(), |s, &v| s + v) + tail
}
