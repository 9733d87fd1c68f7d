//! Physiological coefficient functions and the model parameter set.
//!
//! The androgen level decays from therapy onset, a(t) = exp(-b t) + a_s,
//! and drives the proliferation rate alpha_p, the apoptosis rates delta_p
//! and delta_q, and the mutation rate beta. The parabolic equation's scalar
//! reaction term f(p) is affine in p, which the time stepper exploits.

use crate::error::Error;
use crate::Result;

/// Biological and therapy constants of the model.
///
/// `Default` is the parameter set used throughout the numerical
/// experiments: w1 = 0.35, w2 = 0.1, delta1 = 0.8245, delta2 = 1.035,
/// theta1 = 0.2, K = 1, a_s = 0, b = 1, beta1 = 0.1, D_p = 1, I = 1.
/// Note that this set has w1 < 1 and therefore fails the strict
/// admissibility condition w2 < 1 < w1; see [`ModelParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub w1: f64,
    pub w2: f64,
    /// Apoptosis scale of AD cells (1/day).
    pub delta1: f64,
    /// Apoptosis scale of AI cells (1/day).
    pub delta2: f64,
    pub theta1: f64,
    /// Androgen half-saturation level.
    pub k: f64,
    /// Residual androgen level (a_s > 0 models ADT, a_s = 0 models TAB).
    pub a_s: f64,
    /// Androgen decay rate (1/day).
    pub b: f64,
    /// Mutation-rate scale (1/day).
    pub beta1: f64,
    /// Random motility coefficient (cm^2/day).
    pub d_p: f64,
    /// Mutation-inhibitor intensity I in [0, 1].
    pub inhibitor: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            w1: 0.35,
            w2: 0.1,
            delta1: 0.8245,
            delta2: 1.035,
            theta1: 0.2,
            k: 1.0,
            a_s: 0.0,
            b: 1.0,
            beta1: 0.1,
            d_p: 1.0,
            inhibitor: 1.0,
        }
    }
}

impl ModelParams {
    /// Strictly validated construction; rejects any violated constraint,
    /// naming it.
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate(false)?;
        Ok(params)
    }

    /// Construction with the admissibility inequalities relaxed. Hard
    /// sanity constraints (finiteness, K > 0, b > 0, D_p >= 0, I in [0,1],
    /// a_s >= 0) still apply. The default parameter set requires this path.
    pub fn new_relaxed(params: ModelParams) -> Result<Self> {
        params.validate(true)?;
        Ok(params)
    }

    /// Check the parameter constraints. With `relaxed` the four
    /// admissibility inequalities (a_s < 1, theta1 < 1, delta1 < delta2,
    /// w2 < 1 < w1) and strict positivity of D_p are skipped.
    pub fn validate(&self, relaxed: bool) -> Result<()> {
        let fields = [
            (self.w1, "w1"),
            (self.w2, "w2"),
            (self.delta1, "delta1"),
            (self.delta2, "delta2"),
            (self.theta1, "theta1"),
            (self.k, "K"),
            (self.a_s, "a_s"),
            (self.b, "b"),
            (self.beta1, "beta1"),
            (self.d_p, "D_p"),
            (self.inhibitor, "I"),
        ];
        for (value, name) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.k <= 0.0 {
            return Err(Error::InvalidParams("K must satisfy K > 0".into()));
        }
        if self.b <= 0.0 {
            return Err(Error::InvalidParams("b must satisfy b > 0".into()));
        }
        if self.a_s < 0.0 {
            return Err(Error::InvalidParams("a_s must satisfy a_s >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.inhibitor) {
            return Err(Error::InvalidParams("I must satisfy 0 <= I <= 1".into()));
        }
        if self.theta1 < 0.0 {
            return Err(Error::InvalidParams("theta1 must satisfy theta1 >= 0".into()));
        }
        if self.d_p < 0.0 {
            return Err(Error::InvalidParams("D_p must satisfy D_p >= 0".into()));
        }
        if !relaxed {
            if self.d_p == 0.0 {
                return Err(Error::InvalidParams("D_p must satisfy D_p > 0".into()));
            }
            if self.a_s >= 1.0 {
                return Err(Error::InvalidParams("a_s must satisfy a_s < 1".into()));
            }
            if self.theta1 >= 1.0 {
                return Err(Error::InvalidParams("theta1 must satisfy theta1 < 1".into()));
            }
            if self.delta1 >= self.delta2 {
                return Err(Error::InvalidParams(
                    "apoptosis scales must satisfy delta1 < delta2".into(),
                ));
            }
            if !(self.w2 < 1.0 && 1.0 < self.w1) {
                return Err(Error::InvalidParams(
                    "weights must satisfy w2 < 1 < w1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Androgen level a(t) = exp(-b t) + a_s.
pub fn androgen(t: f64, p: &ModelParams) -> f64 {
    (-p.b * t).exp() + p.a_s
}

/// AD proliferation rate alpha_p(a) = theta1 + (1 - theta1) a / (a + K).
pub fn alpha_p(a: f64, p: &ModelParams) -> f64 {
    p.theta1 + (1.0 - p.theta1) * a / (a + p.k)
}

/// AD apoptosis rate delta_p(a) = delta1 [w1 + (1 - w1) a / (a + K)].
pub fn delta_p(a: f64, p: &ModelParams) -> f64 {
    p.delta1 * (p.w1 + (1.0 - p.w1) * a / (a + p.k))
}

/// AI apoptosis rate delta_q(a) = delta2 [w2 + (1 - w2) a / (a + K)].
pub fn delta_q(a: f64, p: &ModelParams) -> f64 {
    p.delta2 * (p.w2 + (1.0 - p.w2) * a / (a + p.k))
}

/// Mutation rate beta(a) = beta1 (1 - a / (1 + a_s)).
pub fn beta_mut(a: f64, p: &ModelParams) -> f64 {
    p.beta1 * (1.0 - a / (1.0 + p.a_s))
}

/// Affine decomposition of the reaction term: f(p_val, t) = c0 + c1 p_val.
///
/// f(p) = 1 - p - delta_p(a(t)) (1 - p) - (1 - I) beta(a(t)) p.
pub fn reaction_affine(t: f64, p: &ModelParams) -> (f64, f64) {
    let a = androgen(t, p);
    let dp = delta_p(a, p);
    let c0 = 1.0 - dp;
    let c1 = dp - 1.0 - (1.0 - p.inhibitor) * beta_mut(a, p);
    (c0, c1)
}

/// Scalar reaction term of the parabolic equation. p_val is deliberately
/// unconstrained: manufactured solutions leave [0, 1].
pub fn reaction_f(p_val: f64, t: f64, p: &ModelParams) -> f64 {
    let (c0, c1) = reaction_affine(t, p);
    c0 + c1 * p_val
}

/// Integrand of the elliptic velocity equation,
/// R (rho+1)^2 / 2 [alpha_p p + 1 - p - delta_p p - delta_q (1 - p)].
/// Vanishes identically at rho = -1.
pub fn velocity_rhs(p_val: f64, rho: f64, radius: f64, t: f64, p: &ModelParams) -> f64 {
    let a = androgen(t, p);
    let bracket = alpha_p(a, p) * p_val + 1.0 - p_val
        - delta_p(a, p) * p_val
        - delta_q(a, p) * (1.0 - p_val);
    radius * (rho + 1.0) * (rho + 1.0) / 2.0 * bracket
}

/// Initial AD-cell profile used for runs of the base model (which has no
/// manufactured solution): a smooth Neumann-compatible cubic inside the
/// trial space, decreasing from 1.0 at the tumor center to 0.8 at the rim.
pub fn default_initial_profile(rho: f64) -> f64 {
    0.9 - 0.05 * (3.0 * rho - rho.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn androgen_values() {
        let p = ModelParams::default();
        assert_eq!(androgen(0.0, &p), 1.0);
        assert!((androgen(1.0, &p) - (-1.0_f64).exp()).abs() < 1e-15);
        let p2 = ModelParams {
            a_s: 0.3,
            ..ModelParams::default()
        };
        assert!((androgen(1e3, &p2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn coefficient_special_values() {
        let p = ModelParams::default();
        // a = 0 kills the saturation term
        assert!((alpha_p(0.0, &p) - p.theta1).abs() < 1e-15);
        // theta1 = 0.2, K = 1: alpha_p(1) = 0.2 + 0.8 * 0.5
        assert!((alpha_p(1.0, &p) - 0.6).abs() < 1e-15);
        // beta vanishes at a = 1 + a_s
        assert!(beta_mut(1.0 + p.a_s, &p).abs() < 1e-15);
    }

    #[test]
    fn reaction_values() {
        let p = ModelParams::default();
        // p = 1 and I = 1: 1 - 1 - delta_p * 0 - 0
        assert!(reaction_f(1.0, 0.3, &p).abs() < 1e-15);
        // p = 0: 1 - delta_p(a(t))
        let t = 0.7;
        let expect = 1.0 - delta_p(androgen(t, &p), &p);
        assert!((reaction_f(0.0, t, &p) - expect).abs() < 1e-15);
        // direct substitution at p = 0.5, t = 0 (a(0) = 1)
        let dp = 0.8245 * (0.35 + 0.65 * 0.5);
        let expect = 1.0 - 0.5 - dp * 0.5;
        assert!((reaction_f(0.5, 0.0, &p) - expect).abs() < 1e-15);
    }

    #[test]
    fn velocity_rhs_values() {
        let p = ModelParams::default();
        for pv in [-0.3, 0.0, 0.8, 1.4] {
            assert_eq!(velocity_rhs(pv, -1.0, 2.3, 0.5, &p), 0.0);
        }
        // p = 0: R (rho+1)^2 / 2 (1 - delta_q)
        let (rho, t, r) = (0.4, 0.9, 1.7);
        let expect = r * (rho + 1.0f64).powi(2) / 2.0 * (1.0 - delta_q(androgen(t, &p), &p));
        assert!((velocity_rhs(0.0, rho, r, t, &p) - expect).abs() < 1e-15);
        // direct substitution at rho = 1, p = 0.5, R = 1, t = 0
        let a0 = 1.0;
        let expect = 2.0
            * (alpha_p(a0, &p) * 0.5 + 1.0 - 0.5 - delta_p(a0, &p) * 0.5 - delta_q(a0, &p) * 0.5);
        assert!((velocity_rhs(0.5, 1.0, 1.0, 0.0, &p) - expect).abs() < 1e-14);
    }

    #[test]
    fn default_set_needs_relaxed_construction() {
        let p = ModelParams::default();
        assert!(matches!(ModelParams::new(p), Err(Error::InvalidParams(_))));
        assert!(ModelParams::new_relaxed(p).is_ok());
    }

    #[test]
    fn each_constraint_rejected_individually() {
        let admissible = ModelParams {
            w1: 1.2,
            w2: 0.1,
            delta1: 0.8,
            delta2: 1.0,
            theta1: 0.2,
            k: 1.0,
            a_s: 0.5,
            b: 1.0,
            beta1: 0.1,
            d_p: 1.0,
            inhibitor: 0.5,
        };
        assert!(ModelParams::new(admissible).is_ok());
        let reject = |p: ModelParams, needle: &str| {
            match ModelParams::new(p) {
                Err(Error::InvalidParams(msg)) => {
                    assert!(msg.contains(needle), "message {msg:?} misses {needle:?}")
                }
                other => panic!("expected rejection for {needle}, got {other:?}"),
            }
        };
        reject(ModelParams { a_s: 1.0, ..admissible }, "a_s");
        reject(ModelParams { theta1: 1.0, ..admissible }, "theta1");
        reject(ModelParams { delta1: 1.5, ..admissible }, "delta1 < delta2");
        reject(ModelParams { w1: 0.9, ..admissible }, "w2 < 1 < w1");
        reject(ModelParams { w2: 1.1, ..admissible }, "w2 < 1 < w1");
        reject(ModelParams { k: 0.0, ..admissible }, "K");
        reject(ModelParams { b: -1.0, ..admissible }, "b");
        reject(ModelParams { d_p: 0.0, ..admissible }, "D_p");
        reject(ModelParams { inhibitor: 1.5, ..admissible }, "I");
        // relaxed mode keeps hard constraints
        assert!(ModelParams::new_relaxed(ModelParams { k: -2.0, ..admissible }).is_err());
        assert!(ModelParams::new_relaxed(ModelParams { d_p: -0.1, ..admissible }).is_err());
        assert!(ModelParams::new_relaxed(ModelParams { d_p: 0.0, ..admissible }).is_ok());
    }

    #[test]
    fn monotonicity() {
        let p = ModelParams {
            a_s: 0.2,
            ..ModelParams::default()
        };
        let mut prev_a = f64::INFINITY;
        let mut prev_alpha = -f64::INFINITY;
        let mut prev_beta = f64::INFINITY;
        for i in 0..=100 {
            let t = i as f64 * 0.05;
            let a = androgen(t, &p);
            assert!(a < prev_a, "androgen not strictly decreasing at t={t}");
            prev_a = a;
            // androgen decreases, so alpha_p over time must not increase and
            // beta over time must not decrease (alpha_p nondecreasing in a,
            // beta nonincreasing in a on [0, 1 + a_s]).
            let al = alpha_p(a, &p);
            let be = beta_mut(a, &p);
            if i > 0 {
                assert!(al <= prev_alpha + 1e-15);
                assert!(be >= prev_beta - 1e-15);
            }
            prev_alpha = al;
            prev_beta = be;
        }
    }

    #[test]
    fn initial_profile_shape() {
        assert!((default_initial_profile(-1.0) - 1.0).abs() < 1e-15);
        assert!((default_initial_profile(1.0) - 0.8).abs() < 1e-15);
        let s = 1e-6;
        for x in [-1.0, 1.0] {
            let fd = (default_initial_profile(x + s) - default_initial_profile(x - s)) / (2.0 * s);
            assert!(fd.abs() < 1e-8, "profile endpoint derivative at {x}");
        }
    }

    proptest! {
        /// The reaction term is exactly affine in p at fixed t.
        #[test]
        fn reaction_linearity(p1 in -2.0f64..2.0, p2 in -2.0f64..2.0, lam in 0.0f64..1.0, t in 0.0f64..2.0) {
            let p = ModelParams::default();
            let mixed = reaction_f(lam * p1 + (1.0 - lam) * p2, t, &p);
            let split = lam * reaction_f(p1, t, &p) + (1.0 - lam) * reaction_f(p2, t, &p);
            prop_assert!((mixed - split).abs() < 1e-13);
        }
    }
}
