//! Gauss–Legendre rules and adaptive integration on intervals.

/// 5-point Gauss–Legendre nodes on `[-1, 1]`.
pub const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];

/// Weights matching [`GL5_NODES`].
pub const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Apply the 5-point rule on `[a, b]`.
pub fn gauss5(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Quadrature points `(t, weight)` of the 5-point rule on `[a, b]`.
pub fn gauss5_points(a: f64, b: f64) -> [(f64, f64); 5] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 5];
    for (slot, (x, w)) in out.iter_mut().zip(GL5_NODES.iter().zip(GL5_WEIGHTS)) {
        *slot = (mid + half * x, w * half);
    }
    out
}

const MAX_DEPTH: u32 = 24;
const INITIAL_PIECES: usize = 16;

/// Adaptive bisection on the 5-point rule. The interval is first split into
/// a few pieces to estimate the magnitude of the integral; each piece is then
/// bisected until its two halves agree with the whole to `rel_tol` times
/// that magnitude, or the depth limit is hit.
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = (b - a) / INITIAL_PIECES as f64;
    let pieces: Vec<(f64, f64, f64)> = (0..INITIAL_PIECES)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == INITIAL_PIECES { b } else { lo + width };
            (lo, hi, gauss5(f, lo, hi))
        })
        .collect();
    let scale = pieces.iter().map(|p| p.2.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    pieces
        .iter()
        .map(|&(lo, hi, whole)| recurse(f, lo, hi, whole, rel_tol, scale, 0))
        .sum()
}

fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    scale: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss5(f, a, mid);
    let right = gauss5(f, mid, b);
    let refined = left + right;
    if (refined - whole).abs() <= rel_tol * scale || depth >= MAX_DEPTH || mid <= a || mid >= b {
        return refined;
    }
    recurse(f, a, mid, left, rel_tol, scale, depth + 1)
        + recurse(f, mid, b, right, rel_tol, scale, depth + 1)
}

/// Adaptive integration over consecutive intervals `[breaks[i], breaks[i+1]]`.
pub fn adaptive_pieces(f: &impl Fn(f64) -> f64, breaks: &[f64], rel_tol: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| adaptive(f, w[0], w[1], rel_tol))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss5_is_exact_for_degree_nine() {
        let f = |x: f64| x.powi(9) - 3.0 * x.powi(4) + 1.0;
        let exact = |x: f64| x.powi(10) / 10.0 - 3.0 * x.powi(5) / 5.0 + x;
        let (a, b) = (-0.3, 1.7);
        assert!((gauss5(&f, a, b) - (exact(b) - exact(a))).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_two() {
        assert!((GL5_WEIGHTS.iter().sum::<f64>() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_sharp_features() {
        let f = |x: f64| (-(x - 0.3).powi(2) / 1e-4).exp();
        let v = adaptive(&f, 0.0, 1.0, 1e-12);
        let exact = (1e-4f64 * std::f64::consts::PI).sqrt();
        assert!((v - exact).abs() / exact < 1e-10, "{v} vs {exact}");
    }
}
