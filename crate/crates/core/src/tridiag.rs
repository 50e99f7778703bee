//! Symmetric tridiagonal kernels.
//!
//! Stiffness-dominated matrices are stored in *excess form*: the row sums
//! `s_i` and off-diagonals `c_i` (between nodes `i` and `i + 1`), with the
//! diagonal recovered as `a_i = s_i - c_{i-1} - c_i`. For assembled P1
//! operators `s_i = λ ∫ q φ_i ≥ 0` and `c_i ≤ 0`, so every quantity in the
//! elimination below is a sum of nonnegative terms. This keeps the Schur
//! complements accurate even when the coefficients span twelve orders of
//! magnitude and the row sums are tiny compared with the diagonal.

/// How the far end of an elimination is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarEnd {
    /// The far node is held at zero.
    Dirichlet,
    /// The far node is a free unknown (natural boundary condition).
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessTridiag {
    /// Row sums, one per node.
    pub s: Vec<f64>,
    /// Off-diagonals, one per element.
    pub c: Vec<f64>,
}

/// Result of eliminating nodes `1..` toward node 0.
#[derive(Debug, Clone)]
pub struct Elimination {
    /// Schur complement of the whole system onto node 0.
    pub schur: f64,
    /// `ratio[j - 1] = x_j / x_{j-1}` for the extension of data at node 0.
    pub ratio: Vec<f64>,
}

impl ExcessTridiag {
    pub fn nodes(&self) -> usize {
        self.s.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        let left = if i > 0 { self.c[i - 1] } else { 0.0 };
        let right = if i < self.c.len() { self.c[i] } else { 0.0 };
        self.s[i] - left - right
    }

    /// The same matrix with node order reversed.
    pub fn reversed(&self) -> ExcessTridiag {
        ExcessTridiag {
            s: self.s.iter().rev().copied().collect(),
            c: self.c.iter().rev().copied().collect(),
        }
    }

    /// Eliminate every node except 0, closing the last node as `far`.
    ///
    /// With `ẽ_j = s_j + (-c_j) ρ_{j+1}`, `d_j = ẽ_j + (-c_{j-1})` and
    /// `ρ_j = ẽ_j / d_j` (`ρ = 1` past a Dirichlet node, `ẽ_N = s_N` at a
    /// free one) the Schur complement at node 0 is `s_0 + (-c_0) ρ_1` and
    /// the extension ratios are `(-c_{j-1}) / d_j`.
    pub fn eliminate_toward_start(&self, far: FarEnd) -> Elimination {
        let n = self.c.len();
        let mut ratio = vec![0.0; n];
        let (mut rho, top) = match far {
            FarEnd::Dirichlet => (1.0, n.saturating_sub(1)),
            FarEnd::Free => {
                let e = self.s[n];
                let d = e - self.c[n - 1];
                ratio[n - 1] = -self.c[n - 1] / d;
                (e / d, n - 1)
            }
        };
        for j in (1..=top).rev() {
            let e = self.s[j] - self.c[j] * rho;
            let d = e - self.c[j - 1];
            ratio[j - 1] = -self.c[j - 1] / d;
            rho = e / d;
        }
        Elimination {
            schur: self.s[0] - self.c[0] * rho,
            ratio,
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nodes())
            .map(|i| {
                let mut y = self.diag(i) * x[i];
                if i > 0 {
                    y += self.c[i - 1] * x[i - 1];
                }
                if i < self.c.len() {
                    y += self.c[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.nodes())
            .map(|i| {
                let mut r = self.diag(i).abs();
                if i > 0 {
                    r += self.c[i - 1].abs();
                }
                if i < self.c.len() {
                    r += self.c[i].abs();
                }
                r
            })
            .fold(0.0, f64::max)
    }
}

/// Solve the symmetric tridiagonal system `T x = rhs` by Thomas elimination.
/// Zero pivots are nudged to a tiny value, which is what inverse iteration
/// needs; callers that want an exact solve check the residual.
pub fn thomas_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut pivot = guard(diag[0]);
    dp[0] = rhs[0] / pivot;
    for i in 1..n {
        cp[i - 1] = off[i - 1] / pivot;
        pivot = guard(diag[i] - off[i - 1] * cp[i - 1]);
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / pivot;
    }
    let mut x = dp;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

fn guard(p: f64) -> f64 {
    if p == 0.0 {
        1e-300
    } else {
        p
    }
}

/// Number of eigenvalues of the pencil `(A, B)` strictly below `mu`, for
/// symmetric tridiagonal `A` and positive definite tridiagonal `B`
/// (Sylvester's law of inertia on the `LDLᵀ` factors of `A - μB`).
pub fn sturm_count(a_diag: &[f64], a_off: &[f64], b_diag: &[f64], b_off: &[f64], mu: f64) -> usize {
    let mut count = 0;
    let mut d = guard(a_diag[0] - mu * b_diag[0]);
    if d < 0.0 {
        count += 1;
    }
    for i in 1..a_diag.len() {
        let o = a_off[i - 1] - mu * b_off[i - 1];
        d = guard(a_diag[i] - mu * b_diag[i] - o * o / d);
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `index`-th (0-based) eigenvalue of the pencil inside `[lo, hi]` by
/// bisection on [`sturm_count`]. `hi` is widened until it brackets.
pub fn bisect_eigenvalue(
    a_diag: &[f64],
    a_off: &[f64],
    b_diag: &[f64],
    b_off: &[f64],
    index: usize,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    while sturm_count(a_diag, a_off, b_diag, b_off, hi) <= index {
        hi = 2.0 * hi.abs().max(1.0);
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
        if sturm_count(a_diag, a_off, b_diag, b_off, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> ExcessTridiag {
        // -u'' on a uniform grid with unit spacing: row sums vanish inside
        ExcessTridiag {
            s: vec![0.0; n + 1],
            c: vec![-1.0; n],
        }
    }

    #[test]
    fn schur_of_pure_stiffness_is_series_conductance() {
        let t = laplacian(5);
        let dir = t.eliminate_toward_start(FarEnd::Dirichlet);
        assert!((dir.schur - 0.2).abs() < 1e-15);
        let free = t.eliminate_toward_start(FarEnd::Free);
        assert!(free.schur.abs() < 1e-15);
        // the extension of 1 with the far end pinned is linear
        let mut x = 1.0;
        for (j, r) in dir.ratio.iter().take(4).enumerate() {
            x *= r;
            assert!((x - (1.0 - (j + 1) as f64 / 5.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn reversal_round_trip() {
        let t = ExcessTridiag {
            s: vec![0.1, 0.2, 0.3],
            c: vec![-1.0, -2.0],
        };
        assert_eq!(t.reversed().reversed(), t);
        assert!((t.diag(1) - 3.2).abs() < 1e-15);
    }

    #[test]
    fn thomas_matches_apply() {
        let t = ExcessTridiag {
            s: vec![0.5, 0.1, 0.2, 0.3, 0.9],
            c: vec![-1.0, -0.5, -2.0, -0.25],
        };
        let diag: Vec<f64> = (0..5).map(|i| t.diag(i)).collect();
        let rhs = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let x = thomas_solve(&diag, &t.c, &rhs);
        let y = t.apply(&x);
        for (a, b) in y.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sturm_bisection_on_discrete_laplacian() {
        // eigenvalues of tridiag(-1, 2, -1) of size m: 2 - 2cos(kπ/(m+1))
        let m = 12;
        let ad = vec![2.0; m];
        let ao = vec![-1.0; m - 1];
        let bd = vec![1.0; m];
        let bo = vec![0.0; m - 1];
        for k in 0..m {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (m + 1) as f64).cos();
            let got = bisect_eigenvalue(&ad, &ao, &bd, &bo, k, 0.0, 1.0);
            assert!((got - exact).abs() < 1e-13, "{k}: {got} vs {exact}");
        }
    }
}
