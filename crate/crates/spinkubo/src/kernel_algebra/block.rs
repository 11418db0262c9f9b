//! Dense `d×d` block arithmetic on row-major slices.

use nalgebra::DMatrix;

use crate::lattice_model::C64;

#[inline]
pub fn gemm_acc(out: &mut [C64], a: &[C64], b: &[C64], d: usize) {
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        let o = &mut out[i * d..(i + 1) * d];
        for (k, &aik) in row.iter().enumerate() {
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let bk = &b[k * d..(k + 1) * d];
            for j in 0..d {
                o[j] += aik * bk[j];
            }
        }
    }
}

pub fn mul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    gemm_acc(&mut out, a, b, d);
    out
}

#[inline]
pub fn trace(a: &[C64], d: usize) -> C64 {
    (0..d).map(|i| a[i * d + i]).sum()
}

/// `tr(a·b)` without forming the product.
#[inline]
pub fn trace_of_product(a: &[C64], b: &[C64], d: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            s += a[i * d + k] * b[k * d + i];
        }
    }
    s
}

pub fn adjoint(a: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j].conj();
        }
    }
    out
}

pub fn frobenius(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_zero(a: &[C64]) -> bool {
    a.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

pub fn to_matrix(a: &[C64], d: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(d, d, a)
}

pub fn from_matrix(m: &DMatrix<C64>) -> Vec<C64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn spectral_norm(a: &[C64], d: usize) -> f64 {
    if is_zero(a) {
        return 0.0;
    }
    to_matrix(a, d)
        .singular_values()
        .iter()
        .fold(0.0_f64, |x, &y| x.max(y))
}
