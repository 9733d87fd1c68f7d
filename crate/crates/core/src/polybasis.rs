//! Legendre polynomials, Gauss-Legendre quadrature and the Neumann trial
//! basis.
//!
//! The trial functions are
//!
//! ```text
//! b_i(rho) = P_i(rho) - [i(i+1) / ((i+2)(i+3))] P_{i+2}(rho),
//! ```
//!
//! whose first derivatives vanish at rho = +-1 because
//! P_n'(+-1) = (+-1)^{n-1} n(n+1)/2. The correction ratio is applied as
//! (numerator * P) / denominator so that the endpoint cancellation is exact
//! in floating point, not merely small.

use crate::error::Error;
use crate::Result;

/// Evaluate the Legendre polynomial P_n(x) by the three-term recurrence
/// (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}.
pub fn legendre_eval(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut curr) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// P_n(x), P_n'(x) and P_n''(x) from the differentiated recurrences.
///
/// Differentiating the three-term recurrence once and twice gives
/// (n+1) P'_{n+1} = (2n+1)(P_n + x P'_n) - n P'_{n-1} and
/// (n+1) P''_{n+1} = (2n+1)(2 P'_n + x P''_n) - n P''_{n-1}, which are
/// stable on [-1, 1] including the endpoints.
pub fn legendre_with_derivs(n: usize, x: f64) -> (f64, f64, f64) {
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    let (mut s_prev, mut s) = (0.0, 0.0);
    for k in 1..n {
        let kf = k as f64;
        let a = 2.0 * kf + 1.0;
        let c = kf + 1.0;
        let p_next = (a * x * p - kf * p_prev) / c;
        let d_next = (a * (p + x * d) - kf * d_prev) / c;
        let s_next = (a * (2.0 * d + x * s) - kf * s_prev) / c;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
        s_prev = s;
        s = s_next;
    }
    (p, d, s)
}

/// First or second derivative of P_n at x.
pub fn legendre_deriv(n: usize, x: f64, order: usize) -> Result<f64> {
    let (_, d1, d2) = legendre_with_derivs(n, x);
    match order {
        1 => Ok(d1),
        2 => Ok(d2),
        got => Err(Error::UnsupportedOrder {
            got,
            expected: "{1, 2}",
        }),
    }
}

/// Gauss-Legendre rule: the `order` roots of P_order with their weights.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

impl QuadratureRule {
    /// Build the rule by Newton iteration from Chebyshev-like initial
    /// guesses cos(pi (i - 1/4) / (n + 1/2)). Nodes are computed for one
    /// half and mirrored, so the rule is exactly symmetric.
    pub fn gauss(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDiscretization(
                "quadrature order must be at least 1".into(),
            ));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 1..=(n / 2) {
            let mut x =
                (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (p, dp, _) = legendre_with_derivs(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::QuadratureDivergence { n, index: i });
            }
            let (_, dp, _) = legendre_with_derivs(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[n - i] = x;
            nodes[i - 1] = -x;
            weights[n - i] = w;
            weights[i - 1] = w;
        }
        if n % 2 == 1 {
            let (_, dp, _) = legendre_with_derivs(n, 0.0);
            nodes[n / 2] = 0.0;
            weights[n / 2] = 2.0 / (dp * dp);
        }
        Ok(QuadratureRule {
            nodes,
            weights,
            order: n,
        })
    }

    /// Apply the rule on [-1, 1].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Apply the rule mapped onto [a, b].
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        half
            * self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * f(mid + half * x))
                .sum::<f64>()
    }
}

/// Correction ratio numerator/denominator for trial function i.
#[inline]
fn correction(i: usize) -> (f64, f64) {
    ((i * (i + 1)) as f64, ((i + 2) * (i + 3)) as f64)
}

/// Combine P_i-family and P_{i+2}-family values into the trial function.
/// The (num * p) / den ordering keeps the endpoint derivative cancellation
/// exact for all i (both factors and the quotient are exact integers there).
#[inline]
fn combine(i: usize, p_i: f64, p_ip2: f64) -> f64 {
    let (num, den) = correction(i);
    p_i - (num * p_ip2) / den
}

/// Trial basis {b_0, ..., b_N} of size N+1 spanning the polynomials of
/// degree at most N+2 with vanishing endpoint derivatives.
#[derive(Debug, Clone)]
pub struct TrialBasis {
    n_max: usize,
}

/// Values and first two derivatives of every trial function at a fixed set
/// of points, stored row-major as `[point][function]`.
#[derive(Debug, Clone)]
pub struct BasisTables {
    pub size: usize,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl BasisTables {
    #[inline]
    pub fn value(&self, point: usize, i: usize) -> f64 {
        self.values[point * self.size + i]
    }

    /// Nodal values of the expansion with the given coefficients.
    pub fn expansion_at_points(&self, coeffs: &[f64], n_points: usize) -> Vec<f64> {
        (0..n_points)
            .map(|j| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * self.values[j * self.size + i])
                    .sum()
            })
            .collect()
    }
}

impl TrialBasis {
    pub fn new(n_max: usize) -> Self {
        TrialBasis { n_max }
    }

    /// Number of trial functions, N+1.
    pub fn size(&self) -> usize {
        self.n_max + 1
    }

    /// Highest polynomial degree in the span, N+2.
    pub fn degree_bound(&self) -> usize {
        self.n_max + 2
    }

    /// b_i(x), b_i'(x) or b_i''(x).
    pub fn eval(&self, i: usize, x: f64, order: usize) -> Result<f64> {
        assert!(i <= self.n_max, "trial index {i} out of range");
        let lo = legendre_with_derivs(i, x);
        let hi = legendre_with_derivs(i + 2, x);
        match order {
            0 => Ok(combine(i, lo.0, hi.0)),
            1 => Ok(combine(i, lo.1, hi.1)),
            2 => Ok(combine(i, lo.2, hi.2)),
            got => Err(Error::UnsupportedOrder {
                got,
                expected: "{0, 1, 2}",
            }),
        }
    }

    /// Evaluate sum_i coeffs[i] b_i(x) in a single O(N) recurrence pass.
    pub fn eval_expansion(&self, coeffs: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.size());
        let n = self.n_max;
        let mut sum = 0.0;
        let (mut p_prev, mut p) = (1.0, x);
        for k in 0..=(n + 2) {
            let p_k = match k {
                0 => 1.0,
                1 => x,
                _ => {
                    let kf = (k - 1) as f64;
                    let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
                    p_prev = p;
                    p = next;
                    next
                }
            };
            if k <= n {
                sum += coeffs[k] * p_k;
            }
            if k >= 2 && k - 2 <= n {
                let (num, den) = correction(k - 2);
                sum -= coeffs[k - 2] * ((num * p_k) / den);
            }
        }
        sum
    }

    /// Tabulate values and derivatives of all trial functions at `points`.
    pub fn tabulate(&self, points: &[f64]) -> BasisTables {
        let size = self.size();
        let deg = self.degree_bound();
        let mut values = vec![0.0; points.len() * size];
        let mut d1 = vec![0.0; points.len() * size];
        let mut d2 = vec![0.0; points.len() * size];
        let mut p = vec![0.0; deg + 1];
        let mut dp = vec![0.0; deg + 1];
        let mut sp = vec![0.0; deg + 1];
        for (j, &x) in points.iter().enumerate() {
            p[0] = 1.0;
            dp[0] = 0.0;
            sp[0] = 0.0;
            if deg >= 1 {
                p[1] = x;
                dp[1] = 1.0;
                sp[1] = 0.0;
            }
            for k in 1..deg {
                let kf = k as f64;
                let a = 2.0 * kf + 1.0;
                let c = kf + 1.0;
                p[k + 1] = (a * x * p[k] - kf * p[k - 1]) / c;
                dp[k + 1] = (a * (p[k] + x * dp[k]) - kf * dp[k - 1]) / c;
                sp[k + 1] = (a * (2.0 * dp[k] + x * sp[k]) - kf * sp[k - 1]) / c;
            }
            for i in 0..size {
                values[j * size + i] = combine(i, p[i], p[i + 2]);
                d1[j * size + i] = combine(i, dp[i], dp[i + 2]);
                d2[j * size + i] = combine(i, sp[i], sp[i + 2]);
            }
        }
        BasisTables {
            size,
            values,
            d1,
            d2,
        }
    }
}
