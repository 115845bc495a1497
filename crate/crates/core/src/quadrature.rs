//! Fixed quadrature rules.

use crate::scalar::{lit, Scalar};

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_26,
];

/// Composite 8-point Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre<T: Scalar>(a: T, b: T, panels: usize) -> (Vec<T>, Vec<T>) {
    let panels = panels.max(1);
    let width = (b - a) / lit::<T>(panels as f64);
    let half = width * lit(0.5);
    let mut nodes = Vec::with_capacity(8 * panels);
    let mut weights = Vec::with_capacity(8 * panels);
    for p in 0..panels {
        let mid = a + width * lit::<T>(p as f64 + 0.5);
        for (x, w) in GL8_NODES.iter().zip(&GL8_WEIGHTS) {
            let off = half * lit::<T>(*x);
            let w = half * lit::<T>(*w);
            nodes.push(mid - off);
            weights.push(w);
            nodes.push(mid + off);
            weights.push(w);
        }
    }
    (nodes, weights)
}

/// Trapezoid rule for samples at abscissae `x`.
pub fn trapezoid<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    let half = lit::<T>(0.5);
    x.windows(2)
        .zip(y.windows(2))
        .fold(T::zero(), |acc, (xw, yw)| acc + (xw[1] - xw[0]) * (yw[0] + yw[1]) * half)
}

/// `n` equally spaced points covering `[a, b]` inclusive.
pub fn linspace<T: Scalar>(a: T, b: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / lit::<T>((n - 1) as f64);
            (0..n)
                .map(|i| if i + 1 == n { b } else { a + step * lit::<T>(i as f64) })
                .collect()
        }
    }
}
