//! Globally adaptive Gauss–Kronrod (7/15) quadrature for small vector-valued
//! integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const INITIAL_PIECES: usize = 8;
const MAX_INTERVALS: usize = 400;

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    err: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> Piece<N> {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let fc = f(c);
    for j in 0..N {
        k[j] = WGK[7] * fc[j];
        g[j] = WG[3] * fc[j];
    }
    for i in 0..7 {
        let dx = hw * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for j in 0..N {
            let s = f1[j] + f2[j];
            k[j] += WGK[i] * s;
            if i % 2 == 1 {
                g[j] += WG[i / 2] * s;
            }
        }
    }
    let mut err: f64 = 0.0;
    let mut value = [0.0; N];
    for j in 0..N {
        value[j] = k[j] * hw;
        let e = ((k[j] - g[j]) * hw).abs() / value[j].abs().max(1.0);
        err = err.max(e);
    }
    Piece { a, b, value, err }
}

/// Integrates `f` over `[a, b]` until the summed error estimate falls below
/// `tol`. Error estimates are absolute for components of magnitude below one
/// and relative above.
pub fn integrate<const N: usize, F: FnMut(f64) -> [f64; N]>(mut f: F, a: f64, b: f64, tol: f64) -> Result<[f64; N]> {
    let mut heap = BinaryHeap::new();
    let step = (b - a) / INITIAL_PIECES as f64;
    for i in 0..INITIAL_PIECES {
        let lo = a + step * i as f64;
        let hi = if i + 1 == INITIAL_PIECES { b } else { lo + step };
        heap.push(kronrod(&mut f, lo, hi));
    }
    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        if total_err <= tol {
            break;
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { achieved: total_err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod(&mut f, worst.a, mid));
        heap.push(kronrod(&mut f, mid, worst.b));
    }
    let mut out = [0.0; N];
    let mut pieces = heap.into_vec();
    pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
    for p in &pieces {
        for (o, v) in out.iter_mut().zip(&p.value) {
            *o += v;
        }
    }
    Ok(out)
}
