//! Packed Gram-matrix kernel for squared Euclidean distances.
//!
//! Inputs are widened to f64 and packed into panels (`MR` rows or `NR`
//! columns interleaved k-major). Every dot product is a plain sequential
//! sum over k with separate multiply and add, so the result for a pair does
//! not depend on tiling, vector width or thread count, and equals the
//! cached squared norm bit-for-bit when a row meets itself.

use std::ops::Range;

use crate::scalar::Scalar;

pub(crate) const MR: usize = 4;
pub(crate) const NR: usize = 8;
const KC: usize = 128;

/// Panel-packed copy of a row range, `width` rows per panel.
pub(crate) struct Packed {
    buf: Vec<f64>,
    rows: usize,
    width: usize,
    d: usize,
}

impl Packed {
    pub(crate) fn new(width: usize) -> Self {
        Packed {
            buf: Vec::new(),
            rows: 0,
            width,
            d: 0,
        }
    }

    pub(crate) fn pack<T: Scalar>(&mut self, data: &[T], d: usize, rows: Range<usize>) {
        let w = self.width;
        let count = rows.len();
        let panels = count.div_ceil(w);
        self.rows = count;
        self.d = d;
        self.buf.clear();
        self.buf.resize(panels * w * d, 0.0);
        for p in 0..panels {
            let dst = &mut self.buf[p * w * d..(p + 1) * w * d];
            for lane in 0..w {
                let r = p * w + lane;
                if r >= count {
                    break;
                }
                let src = &data[(rows.start + r) * d..(rows.start + r + 1) * d];
                for (k, v) in src.iter().enumerate() {
                    dst[k * w + lane] = v.widen();
                }
            }
        }
    }

    fn panels(&self) -> usize {
        self.rows.div_ceil(self.width)
    }

    #[inline(always)]
    fn panel(&self, p: usize, k: Range<usize>) -> &[f64] {
        let base = p * self.width * self.d;
        &self.buf[base + k.start * self.width..base + k.end * self.width]
    }
}

#[inline(always)]
fn micro(a: &[f64], b: &[f64], acc: &mut [[f64; NR]; MR]) {
    for (ak, bk) in a.chunks_exact(MR).zip(b.chunks_exact(NR)) {
        for i in 0..MR {
            let x = ak[i];
            for j in 0..NR {
                acc[i][j] += x * bk[j];
            }
        }
    }
}

#[inline(always)]
fn gram_body(a: &Packed, b: &Packed, out: &mut [f64]) {
    let (rows, cols, d) = (a.rows, b.rows, a.d);
    out[..rows * cols].fill(0.0);
    for pb in 0..b.panels() {
        let j0 = pb * NR;
        let jn = NR.min(cols - j0);
        let mut k0 = 0;
        while k0 < d {
            let k1 = (k0 + KC).min(d);
            let bp = b.panel(pb, k0..k1);
            for pa in 0..a.panels() {
                let i0 = pa * MR;
                let im = MR.min(rows - i0);
                let mut acc = [[0.0f64; NR]; MR];
                for i in 0..im {
                    acc[i][..jn].copy_from_slice(&out[(i0 + i) * cols + j0..][..jn]);
                }
                micro(a.panel(pa, k0..k1), bp, &mut acc);
                for i in 0..im {
                    out[(i0 + i) * cols + j0..][..jn].copy_from_slice(&acc[i][..jn]);
                }
            }
            k0 = k1;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn gram_avx512(a: &Packed, b: &Packed, out: &mut [f64]) {
    gram_body(a, b, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gram_avx2(a: &Packed, b: &Packed, out: &mut [f64]) {
    gram_body(a, b, out)
}

/// Dot products of every packed row of `a` with every packed row of `b`,
/// written row-major into `out[..a.rows * b.rows]`.
pub(crate) fn gram(a: &Packed, b: &Packed, out: &mut [f64]) {
    assert_eq!(a.width, MR);
    assert_eq!(b.width, NR);
    assert_eq!(a.d, b.d);
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: feature presence checked at runtime.
            return unsafe { gram_avx512(a, b, out) };
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: feature presence checked at runtime.
            return unsafe { gram_avx2(a, b, out) };
        }
    }
    gram_body(a, b, out)
}

/// Turns a Gram tile into squared distances in place, clamping at zero.
pub(crate) fn gram_to_sq_dists(tile: &mut [f64], row_norms: &[f64], col_norms: &[f64]) {
    let cols = col_norms.len();
    for (line, &nr) in tile.chunks_exact_mut(cols).zip(row_norms) {
        for (v, &nc) in line.iter_mut().zip(col_norms) {
            *v = (nr + nc - 2.0 * *v).max(0.0);
        }
    }
}

/// Exact dot product in the kernel's summation order, for single pairs.
#[inline]
pub(crate) fn dot<T: Scalar>(x: &[T], y: &[T]) -> f64 {
    let mut acc = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        acc += a.widen() * b.widen();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matches_pairwise_dot_bitwise() {
        let d = 301;
        let data: Vec<f32> = (0..23 * d)
            .map(|i| ((i * 7919 % 1013) as f32 - 500.0) / 37.0)
            .collect();
        let mut a = Packed::new(MR);
        let mut b = Packed::new(NR);
        a.pack(&data, d, 3..16);
        b.pack(&data, d, 5..23);
        let mut out = vec![0.0; 13 * 18];
        gram(&a, &b, &mut out);
        for i in 0..13 {
            for j in 0..18 {
                let x = &data[(3 + i) * d..(4 + i) * d];
                let y = &data[(5 + j) * d..(6 + j) * d];
                assert_eq!(out[i * 18 + j].to_bits(), dot(x, y).to_bits());
            }
        }
    }
}
